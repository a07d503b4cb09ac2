//! Plain-text formats: comma-separated, UTF-8, `\n` line endings.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which parses
//! back to the identical double. Node paths use the `/0/3/1` form with the
//! root written as `/`.
//!
//! * points: `point_id,node_path,f1,...,fd`, rows by id.
//! * hierarchy: `node_path,parent_path,depth,point_count,mu_1..mu_d,sigma_1..sigma_d`,
//!   rows in depth-first path order, empty parent for the root.
//! * summaries: long format `metric,level_or_factor,set_label,mean,std`.
//! * parameters: `key = value` lines, `#` starts a comment.
//!
//! A summary table with columns `Level;s00;s01;...` holding the mean
//! instance counts is the `level_instances` rows of one file pivoted on
//! `set_label`.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::metrics::{BatchSummary, HistogramSummary, MeanStd, StatsSummary};
use crate::model::{DataPoint, GeneratorParams, Hierarchy, NodeDistribution, NodePath, NodeState};

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {name} `{raw}`")))
}

fn parse_path(line: usize, raw: &str) -> Result<NodePath> {
    raw.parse().map_err(|e: String| Error::parse(line, e))
}

/// Lines numbered from 1.
fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn write_points<W: Write>(points: &[DataPoint], d: usize, mut out: W) -> Result<()> {
    let mut header = String::from("point_id,node_path");
    for k in 1..=d {
        header.push_str(&format!(",f{k}"));
    }
    writeln!(out, "{header}")?;
    let mut order: Vec<&DataPoint> = points.iter().collect();
    order.sort_by_key(|p| p.id);
    for p in order {
        if p.features.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.features.len(),
            });
        }
        let mut row = format!("{},{}", p.id, p.owner);
        for &x in &p.features {
            row.push(',');
            row.push_str(&float(x));
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a points file; returns the points and the feature dimension.
pub fn read_points<R: BufRead>(reader: R) -> Result<(Vec<DataPoint>, usize)> {
    let mut it = lines(reader);
    let (_, header) = it
        .next()
        .ok_or_else(|| Error::parse(1, "empty points file"))?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "point_id" || cols[1] != "node_path" {
        return Err(Error::parse(
            1,
            "expected header `point_id,node_path,f1,...`",
        ));
    }
    let d = cols.len() - 2;
    for (k, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{}", k + 1) {
            return Err(Error::parse(1, format!("unexpected column `{c}`")));
        }
    }
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for (no, line) in it {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(Error::parse(
                no,
                format!("expected {} fields, found {}", d + 2, fields.len()),
            ));
        }
        let id: u64 = parse_field(no, "point_id", fields[0])?;
        if !seen.insert(id) {
            return Err(Error::parse(no, format!("duplicate point_id {id}")));
        }
        let owner = parse_path(no, fields[1])?;
        let features = fields[2..]
            .iter()
            .map(|f| parse_field(no, "feature", f))
            .collect::<Result<Vec<f64>>>()?;
        points.push(DataPoint {
            id,
            features,
            owner,
        });
    }
    Ok((points, d))
}

pub fn write_hierarchy<W: Write>(hierarchy: &Hierarchy, mut out: W) -> Result<()> {
    let d = hierarchy.params.d;
    let mut header = String::from("node_path,parent_path,depth,point_count");
    for k in 1..=d {
        header.push_str(&format!(",mu_{k}"));
    }
    for k in 1..=d {
        header.push_str(&format!(",sigma_{k}"));
    }
    writeln!(out, "{header}")?;
    for (path, node) in &hierarchy.nodes {
        let parent = path.parent().map(|p| p.to_string()).unwrap_or_default();
        let mut row = format!("{path},{parent},{},{}", path.depth(), node.point_ids.len());
        for &x in node
            .distribution
            .means
            .iter()
            .chain(&node.distribution.sigmas)
        {
            row.push(',');
            row.push_str(&float(x));
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a hierarchy file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub path: NodePath,
    pub distribution: NodeDistribution,
    pub point_count: usize,
}

/// Reads a hierarchy file; returns the rows and the dimension.
///
/// Rows must be in strictly increasing path order with every parent listed
/// earlier; a row whose parent is missing is rejected as an orphan.
pub fn read_hierarchy<R: BufRead>(reader: R) -> Result<(Vec<NodeRecord>, usize)> {
    let mut it = lines(reader);
    let (_, header) = it
        .next()
        .ok_or_else(|| Error::parse(1, "empty hierarchy file"))?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    let fixed = ["node_path", "parent_path", "depth", "point_count"];
    if cols.len() < 4 || cols[..4] != fixed || !(cols.len() - 4).is_multiple_of(2) {
        return Err(Error::parse(
            1,
            "expected header `node_path,parent_path,depth,point_count,mu_..,sigma_..`",
        ));
    }
    let d = (cols.len() - 4) / 2;
    let expected: Vec<String> = (1..=d)
        .map(|k| format!("mu_{k}"))
        .chain((1..=d).map(|k| format!("sigma_{k}")))
        .collect();
    if cols[4..] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        return Err(Error::parse(1, "unexpected mu/sigma columns"));
    }
    let mut records: Vec<NodeRecord> = Vec::new();
    let mut known: HashSet<NodePath> = HashSet::new();
    for (no, line) in it {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + 2 * d {
            return Err(Error::parse(
                no,
                format!("expected {} fields, found {}", 4 + 2 * d, fields.len()),
            ));
        }
        let path = parse_path(no, fields[0])?;
        let declared_parent = if fields[1].is_empty() {
            None
        } else {
            Some(parse_path(no, fields[1])?)
        };
        if declared_parent != path.parent() {
            return Err(Error::parse(
                no,
                format!("parent_path `{}` does not match {path}", fields[1]),
            ));
        }
        let depth: usize = parse_field(no, "depth", fields[2])?;
        if depth != path.depth() {
            return Err(Error::parse(
                no,
                format!("depth {depth} does not match {path}"),
            ));
        }
        if let Some(prev) = records.last() {
            if prev.path >= path {
                return Err(Error::parse(
                    no,
                    format!("{path} is out of depth-first order"),
                ));
            }
        }
        if let Some(parent) = &declared_parent {
            if !known.contains(parent) {
                return Err(Error::Consistency(format!(
                    "line {no}: node {path} is an orphan"
                )));
            }
        } else if !records.is_empty() {
            return Err(Error::parse(no, "root must be the first row"));
        }
        let point_count = parse_field(no, "point_count", fields[3])?;
        let nums = fields[4..]
            .iter()
            .map(|f| parse_field(no, "number", f))
            .collect::<Result<Vec<f64>>>()?;
        let (means, sigmas) = nums.split_at(d);
        known.insert(path.clone());
        records.push(NodeRecord {
            path,
            distribution: NodeDistribution {
                means: means.to_vec(),
                sigmas: sigmas.to_vec(),
            },
            point_count,
        });
    }
    if records.first().is_some_and(|r| !r.path.is_root()) {
        return Err(Error::Consistency("hierarchy file has no root row".into()));
    }
    Ok((records, d))
}

/// Rebuilds a hierarchy from file rows and points, checking that every
/// point names a listed node and that the declared per-node counts match.
///
/// Sticks are not stored, so every node comes back with `nu = None` and no
/// child sticks. Only `params.d` needs to agree with the rows.
pub fn assemble(
    records: Vec<NodeRecord>,
    points: &[DataPoint],
    params: GeneratorParams,
) -> Result<Hierarchy> {
    let mut nodes = BTreeMap::new();
    let mut declared = BTreeMap::new();
    for r in records {
        if r.distribution.dim() != params.d {
            return Err(Error::DimensionMismatch {
                expected: params.d,
                found: r.distribution.dim(),
            });
        }
        declared.insert(r.path.clone(), r.point_count);
        nodes.insert(r.path.clone(), NodeState::new(r.path, r.distribution));
    }
    if nodes.is_empty() {
        return Err(Error::Consistency("hierarchy file has no rows".into()));
    }
    let mut hierarchy = Hierarchy { params, nodes };
    let mut sorted: Vec<&DataPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.id);
    for p in sorted {
        if p.features.len() != hierarchy.params.d {
            return Err(Error::DimensionMismatch {
                expected: hierarchy.params.d,
                found: p.features.len(),
            });
        }
        match hierarchy.nodes.get_mut(&p.owner) {
            Some(node) => node.point_ids.push(p.id),
            None => {
                return Err(Error::Consistency(format!(
                    "point {} references missing node {}",
                    p.id, p.owner
                )))
            }
        }
    }
    for (path, node) in &hierarchy.nodes {
        let want = declared[path];
        if node.point_ids.len() != want {
            return Err(Error::Consistency(format!(
                "node {path} declares {want} points but {} reference it",
                node.point_ids.len()
            )));
        }
    }
    Ok(hierarchy)
}

const SCALARS: [&str; 7] = [
    "replicates",
    "nodes",
    "leaves",
    "depth",
    "breadth",
    "path_length",
    "object_depth",
];
const FAMILIES: [&str; 5] = [
    "level_instances",
    "level_width",
    "level_leaves",
    "level_children",
    "branching",
];

fn scalar_rows(s: &StatsSummary) -> [MeanStd; 7] {
    [
        MeanStd::new(s.replicates as f64, 0.0),
        s.nodes,
        s.leaves,
        s.depth,
        s.breadth,
        s.path_length,
        s.object_depth,
    ]
}

/// Writes one or more labelled summaries.
pub fn write_histograms<W: Write>(sets: &[(String, BatchSummary)], mut out: W) -> Result<()> {
    writeln!(out, "metric,level_or_factor,set_label,mean,std")?;
    for (label, summary) in sets {
        if label.contains(',') || label.is_empty() {
            return Err(Error::Consistency(format!("bad set label `{label}`")));
        }
        let mut row = |metric: &str, key: &str, v: &MeanStd| -> Result<()> {
            writeln!(
                out,
                "{metric},{key},{label},{},{}",
                float(v.mean),
                float(v.std)
            )?;
            Ok(())
        };
        for (name, v) in SCALARS.iter().zip(scalar_rows(&summary.stats)) {
            row(name, "", &v)?;
        }
        let h = &summary.histograms;
        let levels = [&h.instances, &h.width, &h.leaves, &h.children_per_node];
        for (name, values) in FAMILIES.iter().zip(levels) {
            for (level, v) in values.iter().enumerate() {
                row(name, &level.to_string(), v)?;
            }
        }
        for (factor, v) in &h.branching {
            row(FAMILIES[4], &factor.to_string(), v)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Default)]
struct PartialSet {
    scalars: [Option<MeanStd>; 7],
    levels: [Vec<MeanStd>; 4],
    branching: BTreeMap<usize, MeanStd>,
}

/// Reads a summary file back into its labelled summaries, in the order the
/// labels first appear.
pub fn read_histograms<R: BufRead>(reader: R) -> Result<Vec<(String, BatchSummary)>> {
    let mut it = lines(reader);
    match it.next() {
        Some((_, Ok(h))) if h == "metric,level_or_factor,set_label,mean,std" => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => {
            return Err(Error::parse(
                1,
                "expected header `metric,level_or_factor,set_label,mean,std`",
            ))
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut sets: BTreeMap<String, PartialSet> = BTreeMap::new();
    for (no, line) in it {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(
                no,
                format!("expected 5 fields, found {}", f.len()),
            ));
        }
        let label = f[2].to_string();
        let value = MeanStd::new(
            parse_field(no, "mean", f[3])?,
            parse_field(no, "std", f[4])?,
        );
        let set = sets.entry(label.clone()).or_insert_with(|| {
            order.push(label.clone());
            PartialSet::default()
        });
        if let Some(i) = SCALARS.iter().position(|s| *s == f[0]) {
            if !f[1].is_empty() {
                return Err(Error::parse(no, format!("{} takes no level", f[0])));
            }
            if set.scalars[i].replace(value).is_some() {
                return Err(Error::parse(no, format!("duplicate {} for {label}", f[0])));
            }
        } else if let Some(i) = FAMILIES.iter().position(|s| *s == f[0]) {
            let key: usize = parse_field(no, "level_or_factor", f[1])?;
            if i == 4 {
                if set.branching.insert(key, value).is_some() {
                    return Err(Error::parse(
                        no,
                        format!("duplicate branching {key} for {label}"),
                    ));
                }
            } else {
                let column = &mut set.levels[i];
                if key != column.len() {
                    return Err(Error::parse(
                        no,
                        format!("{} level {key} out of sequence", f[0]),
                    ));
                }
                column.push(value);
            }
        } else {
            return Err(Error::parse(no, format!("unknown metric `{}`", f[0])));
        }
    }
    order
        .into_iter()
        .map(|label| {
            let set = sets.remove(&label).expect("label recorded");
            let mut scalars = [MeanStd::default(); 7];
            for (i, s) in set.scalars.iter().enumerate() {
                scalars[i] = s.ok_or_else(|| {
                    Error::Consistency(format!("set {label} lacks the {} row", SCALARS[i]))
                })?;
            }
            let [instances, width, leaves, children_per_node] = set.levels;
            let stats = StatsSummary {
                replicates: scalars[0].mean as usize,
                nodes: scalars[1],
                leaves: scalars[2],
                depth: scalars[3],
                breadth: scalars[4],
                path_length: scalars[5],
                object_depth: scalars[6],
            };
            let histograms = HistogramSummary {
                instances,
                width,
                leaves,
                children_per_node,
                branching: set.branching,
            };
            Ok((label, BatchSummary { stats, histograms }))
        })
        .collect()
}

/// Parses `key = value` lines into validated parameters.
///
/// `n` and `d` are required. Other keys default to `max_depth = 512`,
/// `sigma_min = 0.05`, `sigma_max = 10`, `alpha0 = 1`, `lambda = 0.5`,
/// `gamma = 0.2`, `p = 1`, `q = 5`, `seed = 0`.
pub fn parse_params(text: &str) -> Result<GeneratorParams> {
    let mut params = GeneratorParams::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(no, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::parse(no, format!("duplicate key `{key}`")));
        }
        match key {
            "n" => params.n = parse_field(no, key, value)?,
            "d" => params.d = parse_field(no, key, value)?,
            "alpha0" => params.alpha0 = parse_field(no, key, value)?,
            "lambda" => params.lambda = parse_field(no, key, value)?,
            "gamma" => params.gamma = parse_field(no, key, value)?,
            "p" => params.p = parse_field(no, key, value)?,
            "q" => params.q = parse_field(no, key, value)?,
            "sigma_min" => params.sigma_min = parse_field(no, key, value)?,
            "sigma_max" => params.sigma_max = parse_field(no, key, value)?,
            "seed" => params.seed = parse_field(no, key, value)?,
            "max_depth" => params.max_depth = parse_field(no, key, value)?,
            other => return Err(Error::parse(no, format!("unknown key `{other}`"))),
        }
    }
    for required in ["n", "d"] {
        if !seen.contains(required) {
            return Err(Error::MissingKey(required));
        }
    }
    params.validate()?;
    Ok(params)
}

pub fn read_params<R: BufRead>(mut reader: R) -> Result<GeneratorParams> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_params(&text)
}

/// Renders every field as a `key = value` line readable by [`parse_params`].
pub fn format_params(p: &GeneratorParams) -> String {
    format!(
        "n = {}\nd = {}\nalpha0 = {}\nlambda = {}\ngamma = {}\np = {}\nq = {}\nsigma_min = {}\nsigma_max = {}\nseed = {}\nmax_depth = {}\n",
        p.n, p.d, p.alpha0, p.lambda, p.gamma, p.p, p.q, p.sigma_min, p.sigma_max, p.seed, p.max_depth
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ParamError;
    use crate::generator::generate;
    use crate::metrics::{compute_histograms, compute_stats, summarize};

    fn small(seed: u64) -> crate::generator::Dataset {
        let params = GeneratorParams {
            n: 300,
            seed,
            ..GeneratorParams::preset("s03").unwrap()
        };
        generate(&params).unwrap()
    }

    fn text<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_points_is_header_only() {
        let s = text(|b| write_points(&[], 2, b));
        assert_eq!(s, "point_id,node_path,f1,f2\n");
        let (pts, d) = read_points(s.as_bytes()).unwrap();
        assert!(pts.is_empty());
        assert_eq!(d, 2);
    }

    #[test]
    fn points_round_trip_bit_exact() {
        let ds = small(1);
        let s = text(|b| write_points(&ds.points, 2, b));
        let (back, d) = read_points(s.as_bytes()).unwrap();
        assert_eq!(d, 2);
        assert_eq!(back.len(), ds.points.len());
        for (a, b) in ds.points.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.owner, b.owner);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(text(|b| write_points(&back, 2, b)), s);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let xs = [0.1, -0.0, 5e-324, f64::MAX, 1.0 / 3.0, -123456.789e-300];
        let pts = vec![DataPoint {
            id: 0,
            features: xs.to_vec(),
            owner: NodePath::root(),
        }];
        let s = text(|b| write_points(&pts, xs.len(), b));
        let (back, _) = read_points(s.as_bytes()).unwrap();
        for (x, y) in xs.iter().zip(&back[0].features) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn single_root_row() {
        let h = Hierarchy::new(GeneratorParams {
            n: 0,
            ..GeneratorParams::default()
        });
        let s = text(|b| write_hierarchy(&h, b));
        let rows: Vec<&str> = s.lines().collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].starts_with("/,,0,0,"));
    }

    #[test]
    fn hierarchy_round_trip() {
        let ds = small(2);
        let s = text(|b| write_hierarchy(&ds.hierarchy, b));
        let (records, d) = read_hierarchy(s.as_bytes()).unwrap();
        assert_eq!(records.len(), ds.hierarchy.len());
        let h = assemble(
            records,
            &ds.points,
            GeneratorParams {
                d,
                ..GeneratorParams::default()
            },
        )
        .unwrap();
        for (path, node) in &ds.hierarchy.nodes {
            let other = &h.nodes[path];
            assert_eq!(node.point_ids, other.point_ids);
            for (x, y) in node
                .distribution
                .means
                .iter()
                .chain(&node.distribution.sigmas)
                .zip(
                    other
                        .distribution
                        .means
                        .iter()
                        .chain(&other.distribution.sigmas),
                )
            {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(compute_stats(&h), compute_stats(&ds.hierarchy));
        assert!(h.check_invariants(&ds.points).is_empty());
    }

    #[test]
    fn parents_precede_children() {
        let ds = small(3);
        let s = text(|b| write_hierarchy(&ds.hierarchy, b));
        let mut seen = HashSet::new();
        for row in s.lines().skip(1) {
            let f: Vec<&str> = row.split(',').collect();
            if !f[1].is_empty() {
                assert!(seen.contains(f[1]), "{} before its parent", f[0]);
            }
            seen.insert(f[0].to_string());
        }
    }

    #[test]
    fn orphan_rejected() {
        let s =
            "node_path,parent_path,depth,point_count,mu_1,sigma_1\n/,,0,0,0,1\n/0/1,/0,2,0,0,1\n";
        assert!(matches!(
            read_hierarchy(s.as_bytes()),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn missing_node_rejected() {
        let s = "node_path,parent_path,depth,point_count,mu_1,sigma_1\n/,,0,1,0,1\n";
        let (records, _) = read_hierarchy(s.as_bytes()).unwrap();
        let pts = vec![DataPoint {
            id: 0,
            features: vec![1.0],
            owner: "/2".parse().unwrap(),
        }];
        let params = GeneratorParams {
            d: 1,
            ..GeneratorParams::default()
        };
        assert!(matches!(
            assemble(records, &pts, params),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn count_mismatch_rejected() {
        let s = "node_path,parent_path,depth,point_count,mu_1,sigma_1\n/,,0,2,0,1\n";
        let (records, _) = read_hierarchy(s.as_bytes()).unwrap();
        let pts = vec![DataPoint {
            id: 0,
            features: vec![1.0],
            owner: NodePath::root(),
        }];
        let params = GeneratorParams {
            d: 1,
            ..GeneratorParams::default()
        };
        assert!(matches!(
            assemble(records, &pts, params),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn bad_rows_report_line() {
        let s = "node_path,parent_path,depth,point_count,mu_1,sigma_1\n/,,0,0,0,1\n/0,/,1,x,0,1\n";
        match read_hierarchy(s.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    fn batch(seeds: &[u64]) -> BatchSummary {
        let sets: Vec<_> = seeds.iter().map(|&s| small(s)).collect();
        let stats: Vec<_> = sets.iter().map(|d| compute_stats(&d.hierarchy)).collect();
        let hists: Vec<_> = sets
            .iter()
            .map(|d| compute_histograms(&d.hierarchy, &d.points))
            .collect();
        summarize(&stats, &hists).unwrap()
    }

    #[test]
    fn summary_round_trip() {
        let sets = vec![
            ("s03".to_string(), batch(&[1, 2, 3])),
            ("s03r".to_string(), batch(&[4])),
        ];
        let s = text(|b| write_histograms(&sets, b));
        let back = read_histograms(s.as_bytes()).unwrap();
        assert_eq!(back, sets);
        assert_eq!(text(|b| write_histograms(&back, b)), s);
    }

    #[test]
    fn one_replicate_rows_are_raw() {
        let ds = small(9);
        let hist = compute_histograms(&ds.hierarchy, &ds.points);
        let summary = batch(&[9]);
        let s = text(|b| write_histograms(&[("x".into(), summary)], b));
        for row in s.lines().filter(|r| r.starts_with("level_instances,")) {
            let f: Vec<&str> = row.split(',').collect();
            let level: usize = f[1].parse().unwrap();
            assert_eq!(f[3].parse::<f64>().unwrap(), hist.instances[level] as f64);
            assert_eq!(f[4].parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn params_reference_file() {
        let text = "# reference set s00\nn = 10000\nd = 2\nalpha0 = 1\nlambda = 0.5\ngamma = 0.2\np = 1\nq = 5\nsigma_min = 0.05\nsigma_max = 10\n";
        let p = parse_params(text).unwrap();
        assert_eq!(p, GeneratorParams::preset("s00").unwrap());
    }

    #[test]
    fn params_round_trip() {
        let p = GeneratorParams {
            seed: 77,
            ..GeneratorParams::preset("s07").unwrap()
        };
        assert_eq!(parse_params(&format_params(&p)).unwrap(), p);
    }

    #[test]
    fn params_errors() {
        assert!(matches!(
            parse_params("n=5\nd=2\ngamma=0\n"),
            Err(Error::Param(ParamError::Gamma(_)))
        ));
        assert!(matches!(parse_params(""), Err(Error::MissingKey("n"))));
        assert!(matches!(
            parse_params("n = 3\n"),
            Err(Error::MissingKey("d"))
        ));
        match parse_params("n = 3\nd = 2\nbeta = 1\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("beta"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_params("n = 3\nn = 4\nd = 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_params("n = three\nd = 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
