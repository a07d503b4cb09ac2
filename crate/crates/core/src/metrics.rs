//! Structural statistics of a hierarchy and their batch aggregation.
//!
//! Levels are node depths, root = 0. Deviations are population standard
//! deviations (divide by the count), so a single value has deviation zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{DataPoint, Hierarchy};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn new(mean: f64, std: f64) -> Self {
        MeanStd { mean, std }
    }

    /// Mean and population deviation; zero for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

/// N, L, D, B and P for one hierarchy, plus the mean depth of its objects.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyStats {
    pub node_count: usize,
    /// Nodes without stored children.
    pub leaf_count: usize,
    /// Largest node depth in edges.
    pub depth: usize,
    /// Nodes per level over levels `0..=depth`.
    pub breadth: MeanStd,
    /// Root-to-leaf path lengths in edges.
    pub path_length: MeanStd,
    /// Mean depth of the owning node over all points; zero without points.
    pub object_depth: f64,
}

/// Per-level tables for one hierarchy; every vector has `depth + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelHistogram {
    pub instances: Vec<usize>,
    pub width: Vec<usize>,
    pub leaves: Vec<usize>,
    /// Mean number of children over the nodes of each level.
    pub children_per_node: Vec<f64>,
    /// Children count -> number of nodes with that many children.
    pub branching: BTreeMap<usize, usize>,
}

pub fn compute_stats(hierarchy: &Hierarchy) -> HierarchyStats {
    let children = hierarchy.child_counts();
    let depth = hierarchy.nodes.keys().map(|p| p.depth()).max().unwrap_or(0);
    let mut width = vec![0usize; depth + 1];
    let mut leaf_depths = Vec::new();
    let mut weighted_depth = 0usize;
    let mut points = 0usize;
    for (path, node) in &hierarchy.nodes {
        width[path.depth()] += 1;
        if children[path] == 0 {
            leaf_depths.push(path.depth() as f64);
        }
        weighted_depth += path.depth() * node.point_ids.len();
        points += node.point_ids.len();
    }
    let widths: Vec<f64> = width.iter().map(|&w| w as f64).collect();
    HierarchyStats {
        node_count: hierarchy.len(),
        leaf_count: leaf_depths.len(),
        depth,
        breadth: MeanStd::of(&widths),
        path_length: MeanStd::of(&leaf_depths),
        object_depth: if points == 0 {
            0.0
        } else {
            weighted_depth as f64 / points as f64
        },
    }
}

pub fn compute_histograms(hierarchy: &Hierarchy, points: &[DataPoint]) -> LevelHistogram {
    let children = hierarchy.child_counts();
    let depth = hierarchy.nodes.keys().map(|p| p.depth()).max().unwrap_or(0);
    let levels = depth + 1;
    let mut instances = vec![0usize; levels];
    let mut width = vec![0usize; levels];
    let mut leaves = vec![0usize; levels];
    let mut child_sum = vec![0usize; levels];
    let mut branching = BTreeMap::new();
    for (path, &count) in &children {
        let level = path.depth();
        width[level] += 1;
        child_sum[level] += count;
        if count == 0 {
            leaves[level] += 1;
        }
        *branching.entry(count).or_insert(0) += 1;
    }
    for pt in points {
        let level = pt.owner.depth();
        if level >= instances.len() {
            instances.resize(level + 1, 0);
        }
        instances[level] += 1;
    }
    let children_per_node = child_sum
        .iter()
        .zip(&width)
        .map(|(&c, &w)| if w == 0 { 0.0 } else { c as f64 / w as f64 })
        .collect();
    LevelHistogram {
        instances,
        width,
        leaves,
        children_per_node,
        branching,
    }
}

/// Cross-replicate summary of [`HierarchyStats`].
///
/// N, L, D and object depth carry the mean and deviation across replicates.
/// B and P carry the mean of the per-hierarchy means and the mean of the
/// per-hierarchy deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub replicates: usize,
    pub nodes: MeanStd,
    pub leaves: MeanStd,
    pub depth: MeanStd,
    pub breadth: MeanStd,
    pub path_length: MeanStd,
    pub object_depth: MeanStd,
}

pub fn aggregate(stats: &[HierarchyStats]) -> Result<StatsSummary> {
    if stats.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let across =
        |f: &dyn Fn(&HierarchyStats) -> f64| MeanStd::of(&stats.iter().map(f).collect::<Vec<_>>());
    let mean_of = |f: &dyn Fn(&HierarchyStats) -> f64| across(f).mean;
    Ok(StatsSummary {
        replicates: stats.len(),
        nodes: across(&|s| s.node_count as f64),
        leaves: across(&|s| s.leaf_count as f64),
        depth: across(&|s| s.depth as f64),
        breadth: MeanStd::new(mean_of(&|s| s.breadth.mean), mean_of(&|s| s.breadth.std)),
        path_length: MeanStd::new(
            mean_of(&|s| s.path_length.mean),
            mean_of(&|s| s.path_length.std),
        ),
        object_depth: across(&|s| s.object_depth),
    })
}

/// Per-level means and deviations across replicates.
///
/// Counts at levels a replicate does not reach are taken as zero; children
/// per node at such levels is undefined and only averaged over the
/// replicates that reach the level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistogramSummary {
    pub instances: Vec<MeanStd>,
    pub width: Vec<MeanStd>,
    pub leaves: Vec<MeanStd>,
    pub children_per_node: Vec<MeanStd>,
    pub branching: BTreeMap<usize, MeanStd>,
}

fn per_level(rows: &[&[usize]]) -> Vec<MeanStd> {
    let levels = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    (0..levels)
        .map(|l| {
            let vals: Vec<f64> = rows
                .iter()
                .map(|r| r.get(l).copied().unwrap_or(0) as f64)
                .collect();
            MeanStd::of(&vals)
        })
        .collect()
}

pub fn aggregate_histograms(histograms: &[LevelHistogram]) -> Result<HistogramSummary> {
    if histograms.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let collect = |f: fn(&LevelHistogram) -> &[usize]| -> Vec<MeanStd> {
        per_level(&histograms.iter().map(f).collect::<Vec<_>>())
    };
    let levels = histograms.iter().map(|h| h.width.len()).max().unwrap_or(0);
    let children_per_node = (0..levels)
        .map(|l| {
            let vals: Vec<f64> = histograms
                .iter()
                .filter_map(|h| h.children_per_node.get(l).copied())
                .collect();
            MeanStd::of(&vals)
        })
        .collect();
    let factors: std::collections::BTreeSet<usize> = histograms
        .iter()
        .flat_map(|h| h.branching.keys().copied())
        .collect();
    let branching = factors
        .into_iter()
        .map(|k| {
            let vals: Vec<f64> = histograms
                .iter()
                .map(|h| h.branching.get(&k).copied().unwrap_or(0) as f64)
                .collect();
            (k, MeanStd::of(&vals))
        })
        .collect();
    Ok(HistogramSummary {
        instances: collect(|h| &h.instances),
        width: collect(|h| &h.width),
        leaves: collect(|h| &h.leaves),
        children_per_node,
        branching,
    })
}

/// Everything reported for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub stats: StatsSummary,
    pub histograms: HistogramSummary,
}

pub fn summarize(stats: &[HierarchyStats], histograms: &[LevelHistogram]) -> Result<BatchSummary> {
    Ok(BatchSummary {
        stats: aggregate(stats)?,
        histograms: aggregate_histograms(histograms)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorParams, NodeDistribution, NodePath, NodeState};

    fn tree(paths: &[&[u32]]) -> Hierarchy {
        let mut h = Hierarchy::new(GeneratorParams::default());
        for p in paths {
            let path = NodePath::from_indices(p.to_vec());
            h.nodes.insert(
                path.clone(),
                NodeState::new(path, NodeDistribution::isotropic(2, 0.0, 1.0)),
            );
        }
        h
    }

    #[test]
    fn single_root() {
        let s = compute_stats(&tree(&[]));
        assert_eq!((s.node_count, s.leaf_count, s.depth), (1, 1, 0));
        assert_eq!(s.breadth, MeanStd::new(1.0, 0.0));
        assert_eq!(s.path_length, MeanStd::new(0.0, 0.0));
    }

    #[test]
    fn chain() {
        let s = compute_stats(&tree(&[&[0], &[0, 0]]));
        assert_eq!((s.node_count, s.leaf_count, s.depth), (3, 1, 2));
        assert_eq!(s.breadth, MeanStd::new(1.0, 0.0));
        assert_eq!(s.path_length, MeanStd::new(2.0, 0.0));
    }

    #[test]
    fn star() {
        let h = tree(&[&[0], &[1], &[2]]);
        let s = compute_stats(&h);
        assert_eq!((s.node_count, s.leaf_count, s.depth), (4, 3, 1));
        assert_eq!(s.breadth, MeanStd::new(2.0, 1.0));
        assert_eq!(s.path_length, MeanStd::new(1.0, 0.0));
        let hist = compute_histograms(&h, &[]);
        assert_eq!(hist.branching, BTreeMap::from([(0, 3), (3, 1)]));
        assert_eq!(hist.width, vec![1, 3]);
        assert_eq!(hist.leaves, vec![0, 3]);
        assert_eq!(hist.children_per_node, vec![3.0, 0.0]);
    }

    #[test]
    fn all_points_at_root() {
        let mut h = tree(&[]);
        let points: Vec<DataPoint> = (0..5)
            .map(|id| DataPoint {
                id,
                features: vec![0.0, 0.0],
                owner: NodePath::root(),
            })
            .collect();
        h.get_mut(&[]).unwrap().point_ids = (0..5).collect();
        let hist = compute_histograms(&h, &points);
        assert_eq!(hist.instances, vec![5]);
        assert_eq!(compute_stats(&h).object_depth, 0.0);
    }

    #[test]
    fn aggregate_single_and_identical() {
        let s = compute_stats(&tree(&[&[0], &[1], &[1, 0]]));
        let one = aggregate(std::slice::from_ref(&s)).unwrap();
        assert_eq!(one.nodes, MeanStd::new(4.0, 0.0));
        assert_eq!(one.leaves, MeanStd::new(2.0, 0.0));
        assert_eq!(one.depth, MeanStd::new(2.0, 0.0));
        assert_eq!(one.breadth, s.breadth);
        assert_eq!(one.path_length, s.path_length);
        let two = aggregate(&[s.clone(), s]).unwrap();
        assert_eq!(two.nodes.std, 0.0);
        assert_eq!(two.replicates, 2);
    }

    #[test]
    fn aggregate_uses_mean_of_deviations_for_breadth() {
        let a = compute_stats(&tree(&[])); // breadth 1 ± 0
        let b = compute_stats(&tree(&[&[0], &[1], &[2]])); // breadth 2 ± 1
        let sum = aggregate(&[a, b]).unwrap();
        assert_eq!(sum.breadth, MeanStd::new(1.5, 0.5));
        assert_eq!(sum.nodes, MeanStd::new(2.5, 1.5));
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyBatch)));
        assert!(matches!(aggregate_histograms(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn histogram_aggregation_pads_missing_levels() {
        let a = compute_histograms(&tree(&[]), &[]);
        let b = compute_histograms(&tree(&[&[0]]), &[]);
        let s = aggregate_histograms(&[a, b]).unwrap();
        assert_eq!(
            s.width,
            vec![MeanStd::new(1.0, 0.0), MeanStd::new(0.5, 0.5)]
        );
        // level 1 only exists in the second tree
        assert_eq!(s.children_per_node[1], MeanStd::new(0.0, 0.0));
        assert_eq!(s.children_per_node[0], MeanStd::new(0.5, 0.5));
        assert_eq!(s.branching[&0], MeanStd::new(1.0, 0.0));
        assert_eq!(s.branching[&1], MeanStd::new(0.5, 0.5));
    }
}
