use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use hiergen::analytics::{self, Estimate};
use hiergen::io;
use hiergen::metrics::{compute_histograms, compute_stats, summarize};
use hiergen::postprocess::{fit_box, reassign, rescale};
use hiergen::{
    generate_replicate, BatchSummary, Dataset, GeneratorParams, HierarchyStats, RandomSource,
    PRESET_NAMES,
};

#[derive(Parser)]
#[command(
    name = "hiergen",
    version,
    about = "Generate synthetic object-cluster hierarchies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one dataset and write points.csv and hierarchy.csv.
    Generate(GenerateArgs),
    /// Run replicated generations per parameter set and write a summary table.
    Batch(BatchArgs),
    /// Print closed-form shape estimates, optionally checked by simulation.
    Estimate(EstimateArgs),
    /// Recompute statistics from written files.
    Stats(StatsArgs),
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Start from a named reference set (s00..s07).
    #[arg(long, conflicts_with = "params")]
    preset: Option<String>,
    /// Start from a `key = value` parameter file.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, env = "HIERGEN_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Keep nodes that received no points.
    #[arg(long)]
    no_prune: bool,
    /// Move every point to its maximum-likelihood node.
    #[arg(long)]
    reassign: bool,
    /// Per-dimension scale (one value applies to all dimensions).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scale: Vec<f64>,
    /// Per-dimension offset (one value applies to all dimensions).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    offset: Vec<f64>,
    /// Map the data's bounding box onto LO,HI in every dimension.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true, conflicts_with_all = ["scale", "offset"])]
    fit_box: Vec<f64>,
}

#[derive(Args)]
struct BatchArgs {
    /// Reference sets: `s00..s07`, `all`, or a comma list.
    #[arg(long)]
    presets: Option<String>,
    /// Parameter files, each one set labelled by its file stem.
    #[arg(long)]
    params: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Also report every replicate after reassignment, labelled with an `r` suffix.
    #[arg(long)]
    both: bool,
    #[arg(long)]
    no_prune: bool,
    /// Override the point count of every set.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, env = "HIERGEN_SEED")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Summary file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Levels 0..LEVELS-1 of the retention table.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Child indices 1..=INDICES of the width table.
    #[arg(long, default_value_t = 4)]
    indices: usize,
    /// Compare against Monte-Carlo estimates.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory holding points.csv and hierarchy.csv.
    #[arg(long, required_unless_present_all = ["points", "hierarchy"])]
    dir: Option<PathBuf>,
    #[arg(long, requires = "hierarchy")]
    points: Option<PathBuf>,
    #[arg(long, requires = "points")]
    hierarchy: Option<PathBuf>,
    /// Also write the per-level summary table.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "data")]
    label: String,
}

/// Usage and parameter problems exit with 1, everything else with 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<hiergen::Error>() {
            Some(hiergen::Error::Param(_)) | Some(hiergen::Error::MissingKey(_)) => {
                Failure::Usage(e)
            }
            _ => Failure::Runtime(e),
        }
    }
}

impl From<hiergen::Error> for Failure {
    fn from(e: hiergen::Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_params_file(path: &Path) -> Result<GeneratorParams, Failure> {
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Usage)?;
    io::read_params(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)
}

fn preset(name: &str) -> Result<GeneratorParams, Failure> {
    GeneratorParams::preset(name).ok_or_else(|| {
        usage(format!(
            "unknown preset `{name}` (expected one of {})",
            PRESET_NAMES.join(", ")
        ))
    })
}

impl ParamArgs {
    /// Preset or file first, then individual flags on top.
    fn resolve(&self) -> Result<GeneratorParams, Failure> {
        let mut p = match (&self.preset, &self.params) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => load_params_file(path)?,
            (None, None) => GeneratorParams::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(n, d, alpha0, lambda, gamma, p, q, sigma_min, sigma_max, max_depth, seed);
        p.validate().map_err(|e| Failure::Usage(e.into()))?;
        Ok(p)
    }
}

fn stats_line(s: &HierarchyStats) -> String {
    format!(
        "nodes={} leaves={} depth={} breadth={:.4}+-{:.4} path_length={:.4}+-{:.4} object_depth={:.4}",
        s.node_count,
        s.leaf_count,
        s.depth,
        s.breadth.mean,
        s.breadth.std,
        s.path_length.mean,
        s.path_length.std,
        s.object_depth
    )
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Runtime)?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Runtime)?;
    Ok(BufReader::new(file))
}

fn broadcast(values: &[f64], d: usize, default: f64, name: &str) -> Result<Vec<f64>, Failure> {
    match values.len() {
        0 => Ok(vec![default; d]),
        1 => Ok(vec![values[0]; d]),
        k if k == d => Ok(values.to_vec()),
        k => Err(usage(format!("--{name} takes 1 or {d} values, got {k}"))),
    }
}

fn cmd_generate(args: GenerateArgs) -> CmdResult {
    let params = args.params.resolve()?;
    let mut rng = RandomSource::new(params.seed);
    let Dataset { hierarchy, points } =
        hiergen::generator::generate_with_rng(&params, &mut rng, !args.no_prune)?;
    let (mut hierarchy, mut points) = if args.reassign {
        reassign(hierarchy, points)
    } else {
        (hierarchy, points)
    };
    let d = params.d;
    let transform = if !args.fit_box.is_empty() {
        let [lo, hi] = args.fit_box[..] else {
            return Err(usage("--fit-box takes LO,HI"));
        };
        Some(fit_box(&points, d, lo, hi)?)
    } else if !args.scale.is_empty() || !args.offset.is_empty() {
        Some((
            broadcast(&args.scale, d, 1.0, "scale")?,
            broadcast(&args.offset, d, 0.0, "offset")?,
        ))
    } else {
        None
    };
    if let Some((scale, offset)) = transform {
        (hierarchy, points) = rescale(hierarchy, points, &scale, &offset)?;
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(Failure::Runtime)?;
    io::write_points(&points, d, create(&args.out.join("points.csv"))?)?;
    io::write_hierarchy(&hierarchy, create(&args.out.join("hierarchy.csv"))?)?;
    println!("{}", stats_line(&compute_stats(&hierarchy)));
    Ok(())
}

fn parse_preset_list(list: &str) -> Result<Vec<String>, Failure> {
    let list = list.trim();
    if list == "all" {
        return Ok(PRESET_NAMES.iter().map(|s| s.to_string()).collect());
    }
    if let Some((a, b)) = list.split_once("..") {
        let lo = PRESET_NAMES.iter().position(|n| *n == a.trim());
        let hi = PRESET_NAMES.iter().position(|n| *n == b.trim());
        return match (lo, hi) {
            (Some(lo), Some(hi)) if lo <= hi => Ok(PRESET_NAMES[lo..=hi]
                .iter()
                .map(|s| s.to_string())
                .collect()),
            _ => Err(usage(format!("bad preset range `{list}`"))),
        };
    }
    list.split(',')
        .map(|s| preset(s.trim()).map(|_| s.trim().to_string()))
        .collect()
}

/// Per-replicate measurements; `after` is filled when reassignment is on.
struct Replicate {
    before: (HierarchyStats, hiergen::LevelHistogram),
    after: Option<(HierarchyStats, hiergen::LevelHistogram)>,
}

fn run_replicate(
    params: &GeneratorParams,
    index: usize,
    prune: bool,
    both: bool,
) -> hiergen::Result<Replicate> {
    let ds = generate_replicate(params, index as u64, prune)?;
    let before = (
        compute_stats(&ds.hierarchy),
        compute_histograms(&ds.hierarchy, &ds.points),
    );
    let after = both.then(|| {
        let (h, pts) = reassign(ds.hierarchy, ds.points);
        (compute_stats(&h), compute_histograms(&h, &pts))
    });
    Ok(Replicate { before, after })
}

fn summarize_pairs(
    pairs: &[&(HierarchyStats, hiergen::LevelHistogram)],
) -> hiergen::Result<BatchSummary> {
    let stats: Vec<_> = pairs.iter().map(|p| p.0.clone()).collect();
    let hists: Vec<_> = pairs.iter().map(|p| p.1.clone()).collect();
    summarize(&stats, &hists)
}

fn cmd_batch(args: BatchArgs) -> CmdResult {
    if args.replicates == 0 {
        return Err(Failure::Usage(
            hiergen::Error::from(hiergen::ParamError::Replicates).into(),
        ));
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let mut sets: Vec<(String, GeneratorParams)> = Vec::new();
    if let Some(list) = &args.presets {
        for name in parse_preset_list(list)? {
            let p = preset(&name)?;
            sets.push((name, p));
        }
    }
    for path in &args.params {
        let label = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("params")
            .to_string();
        sets.push((label, load_params_file(path)?));
    }
    if sets.is_empty() {
        return Err(usage("give --presets or --params"));
    }
    for (_, p) in &mut sets {
        if let Some(n) = args.n {
            p.n = n;
        }
        if let Some(seed) = args.seed {
            p.seed = seed;
        }
        p.validate().map_err(|e| Failure::Usage(e.into()))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    let prune = !args.no_prune;
    let mut rows: Vec<(String, BatchSummary)> = Vec::new();
    println!(
        "{:<8} {:>5} {:>18} {:>18} {:>14} {:>14} {:>14} {:>8}",
        "set", "runs", "N", "L", "D", "B", "P", "obj_depth"
    );
    for (label, params) in &sets {
        let reps: Vec<Replicate> = pool.install(|| {
            (0..args.replicates)
                .into_par_iter()
                .map(|i| run_replicate(params, i, prune, args.both))
                .collect::<hiergen::Result<Vec<_>>>()
        })?;
        let before: Vec<_> = reps.iter().map(|r| &r.before).collect();
        rows.push((label.clone(), summarize_pairs(&before)?));
        if args.both {
            let after: Vec<_> = reps.iter().filter_map(|r| r.after.as_ref()).collect();
            rows.push((format!("{label}r"), summarize_pairs(&after)?));
        }
    }
    for (label, s) in &rows {
        let st = &s.stats;
        println!(
            "{:<8} {:>5} {:>9.2}+-{:<7.2} {:>9.2}+-{:<7.2} {:>6.2}+-{:<6.2} {:>6.2}+-{:<6.2} {:>6.2}+-{:<6.2} {:>8.3}",
            label,
            st.replicates,
            st.nodes.mean,
            st.nodes.std,
            st.leaves.mean,
            st.leaves.std,
            st.depth.mean,
            st.depth.std,
            st.breadth.mean,
            st.breadth.std,
            st.path_length.mean,
            st.path_length.std,
            st.object_depth.mean
        );
    }
    io::write_histograms(&rows, create(&args.out)?)?;
    Ok(())
}

fn verify_cells(e: &Estimate, expected: f64) -> String {
    format!(
        "  {:>10.5} {:>10.5} {:>7.2}",
        e.mean,
        e.std_err,
        e.z(expected)
    )
}

fn cmd_estimate(args: EstimateArgs) -> CmdResult {
    let p = args.params.resolve()?;
    if args.verify && args.samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let regime = analytics::predict_regime(p.alpha0, p.lambda, p.gamma);
    println!(
        "alpha0={} lambda={} gamma={} p={} q={}",
        p.alpha0, p.lambda, p.gamma, p.p, p.q
    );
    println!("regime: depth {}, width {}", regime.depth, regime.width);
    let mut rng = RandomSource::new(p.seed);
    let mc_header = if args.verify {
        "  monte_carlo    std_err       z"
    } else {
        ""
    };

    println!();
    println!(
        "{:>5} {:>10} {:>10}{mc_header}",
        "level", "retention", "variance"
    );
    let sim = if args.verify {
        Some(analytics::simulate_retention(
            p.alpha0,
            p.lambda,
            args.levels,
            args.samples,
            &mut rng,
        )?)
    } else {
        None
    };
    for level in 0..args.levels {
        let e = analytics::expected_retention(p.alpha0, p.lambda, level);
        let v = analytics::retention_variance(p.alpha0, p.lambda, level);
        let extra = sim
            .as_ref()
            .map(|s| verify_cells(&s[level], e))
            .unwrap_or_default();
        println!("{level:>5} {e:>10.5} {v:>10.5}{extra}");
    }

    println!();
    println!(
        "{:>5} {:>10} {:>10}{mc_header}",
        "index", "selection", "variance"
    );
    let sim = if args.verify {
        Some(analytics::simulate_child_selection(
            p.gamma,
            args.indices,
            args.samples,
            &mut rng,
        )?)
    } else {
        None
    };
    for index in 1..=args.indices {
        let e = analytics::expected_child_selection(p.gamma, index);
        let v = analytics::child_selection_variance(p.gamma, index);
        let extra = sim
            .as_ref()
            .map(|s| verify_cells(&s[index - 1], e))
            .unwrap_or_default();
        println!("{index:>5} {e:>10.5} {v:>10.5}{extra}");
    }

    println!();
    let r = analytics::expected_sigma_ratio(p.p, p.q);
    println!("sigma ratio: mean {:.5} variance {:.5}", r.mean, r.variance);
    if args.verify {
        let est =
            analytics::simulate_sigma_ratio(&p.kernel(), p.sigma_max, args.samples, &mut rng)?;
        println!(
            "  monte carlo: mean {:.5} (se {:.5}, z {:.2}) variance {:.5} (se {:.5}, z {:.2})",
            est.mean.mean,
            est.mean.std_err,
            est.mean.z(r.mean),
            est.variance.mean,
            est.variance.std_err,
            est.variance.z(r.variance)
        );
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> CmdResult {
    let (points_path, hierarchy_path) = match (&args.points, &args.hierarchy, &args.dir) {
        (Some(p), Some(h), _) => (p.clone(), h.clone()),
        (_, _, Some(dir)) => (dir.join("points.csv"), dir.join("hierarchy.csv")),
        _ => return Err(usage("give --dir or both --points and --hierarchy")),
    };
    let (points, pd) = io::read_points(open(&points_path)?)
        .with_context(|| format!("reading {}", points_path.display()))
        .map_err(Failure::Runtime)?;
    let (records, hd) = io::read_hierarchy(open(&hierarchy_path)?)
        .with_context(|| format!("reading {}", hierarchy_path.display()))
        .map_err(Failure::Runtime)?;
    if pd != hd && !points.is_empty() {
        return Err(Failure::Runtime(anyhow!(
            "points have {pd} features but the hierarchy has {hd} dimensions"
        )));
    }
    let params = GeneratorParams {
        n: points.len(),
        d: hd,
        ..GeneratorParams::default()
    };
    let hierarchy =
        io::assemble(records, &points, params).map_err(|e| Failure::Runtime(e.into()))?;
    let stats = compute_stats(&hierarchy);
    println!("{}", stats_line(&stats));
    if let Some(out) = &args.out {
        let summary = summarize(&[stats], &[compute_histograms(&hierarchy, &points)])?;
        io::write_histograms(&[(args.label.clone(), summary)], create(out)?)?;
    }
    Ok(())
}
