//! Post-processing passes: likelihood-based reassignment of points and
//! per-dimension affine rescaling of data and node parameters.

use crate::error::{Error, ParamError, Result};
use crate::kernel::PreparedDistribution;
use crate::model::{DataPoint, Hierarchy, NodePath};

/// Node distributions packed contiguously in (depth, path) order.
struct LikelihoodTable {
    d: usize,
    paths: Vec<NodePath>,
    means: Vec<f64>,
    inv_sigmas: Vec<f64>,
    log_norms: Vec<f64>,
}

impl LikelihoodTable {
    fn new(hierarchy: &Hierarchy) -> Self {
        let d = hierarchy.params.d;
        let mut paths: Vec<&NodePath> = hierarchy.nodes.keys().collect();
        paths.sort_by(|a, b| a.depth().cmp(&b.depth()).then_with(|| a.cmp(b)));
        let mut table = LikelihoodTable {
            d,
            paths: Vec::with_capacity(paths.len()),
            means: Vec::with_capacity(paths.len() * d),
            inv_sigmas: Vec::with_capacity(paths.len() * d),
            log_norms: Vec::with_capacity(paths.len()),
        };
        for path in paths {
            let prepared = PreparedDistribution::new(&hierarchy.nodes[path].distribution);
            table.paths.push(path.clone());
            table.means.extend_from_slice(prepared.means());
            table.inv_sigmas.extend_from_slice(prepared.inv_sigmas());
            table.log_norms.push(prepared.log_norm());
        }
        table
    }

    // Same arithmetic, in the same order, as `PreparedDistribution::log_density`.
    #[inline]
    fn log_density(&self, k: usize, x: &[f64]) -> f64 {
        let means = &self.means[k * self.d..(k + 1) * self.d];
        let invs = &self.inv_sigmas[k * self.d..(k + 1) * self.d];
        let mut quad = 0.0;
        for ((&xi, &mu), &inv) in x.iter().zip(means).zip(invs) {
            let z = (xi - mu) * inv;
            quad += z * z;
        }
        self.log_norms[k] - 0.5 * quad
    }

    /// Index of the first maximiser in (depth, path) order and its value.
    fn best(&self, x: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_ll = f64::NEG_INFINITY;
        for k in 0..self.paths.len() {
            let ll = self.log_density(k, x);
            if ll > best_ll {
                best = k;
                best_ll = ll;
            }
        }
        (best, best_ll)
    }
}

/// Moves every point to a node of maximal likelihood.
///
/// Nodes, edges and node distributions are untouched. On ties the current
/// owner is kept; otherwise the shallowest maximiser wins, then the
/// lexicographically smallest path.
pub fn reassign(
    mut hierarchy: Hierarchy,
    mut points: Vec<DataPoint>,
) -> (Hierarchy, Vec<DataPoint>) {
    let table = LikelihoodTable::new(&hierarchy);
    let position: std::collections::HashMap<&NodePath, usize> = table
        .paths
        .iter()
        .enumerate()
        .map(|(k, p)| (p, k))
        .collect();
    let mut new_owner: Vec<usize> = Vec::with_capacity(points.len());
    for pt in &points {
        let (best, best_ll) = table.best(&pt.features);
        let chosen = match position.get(&pt.owner) {
            Some(&own) if table.log_density(own, &pt.features) == best_ll => own,
            _ => best,
        };
        new_owner.push(chosen);
    }
    for node in hierarchy.nodes.values_mut() {
        node.point_ids.clear();
    }
    for (pt, k) in points.iter_mut().zip(new_owner) {
        let path = &table.paths[k];
        if pt.owner != *path {
            pt.owner = path.clone();
        }
        hierarchy
            .nodes
            .get_mut(path)
            .expect("table paths come from the hierarchy")
            .point_ids
            .push(pt.id);
    }
    for node in hierarchy.nodes.values_mut() {
        node.point_ids.sort_unstable();
    }
    (hierarchy, points)
}

fn check_transform(d: usize, scale: &[f64], offset: &[f64]) -> Result<()> {
    for v in [scale.len(), offset.len()] {
        if v != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v,
            });
        }
    }
    for (dim, &s) in scale.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(ParamError::Scale { dim, value: s }.into());
        }
    }
    Ok(())
}

/// Applies `v * scale + offset` to features and node means and `sigma * scale`
/// to node sigmas, per dimension.
pub fn rescale(
    mut hierarchy: Hierarchy,
    mut points: Vec<DataPoint>,
    scale: &[f64],
    offset: &[f64],
) -> Result<(Hierarchy, Vec<DataPoint>)> {
    check_transform(hierarchy.params.d, scale, offset)?;
    for node in hierarchy.nodes.values_mut() {
        let dist = &mut node.distribution;
        for ((m, s), (&a, &b)) in dist
            .means
            .iter_mut()
            .zip(dist.sigmas.iter_mut())
            .zip(scale.iter().zip(offset))
        {
            *m = *m * a + b;
            *s *= a;
        }
    }
    for pt in &mut points {
        for (x, (&a, &b)) in pt.features.iter_mut().zip(scale.iter().zip(offset)) {
            *x = *x * a + b;
        }
    }
    Ok((hierarchy, points))
}

/// Per-dimension scale and offset mapping the data's bounding box onto
/// `[lo, hi]` in every dimension. A dimension with no spread is centred.
pub fn fit_box(points: &[DataPoint], d: usize, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(ParamError::Scale {
            dim: 0,
            value: hi - lo,
        }
        .into());
    }
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for pt in points {
        if pt.features.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: pt.features.len(),
            });
        }
        for (k, &x) in pt.features.iter().enumerate() {
            min[k] = min[k].min(x);
            max[k] = max[k].max(x);
        }
    }
    let mut scale = Vec::with_capacity(d);
    let mut offset = Vec::with_capacity(d);
    for k in 0..d {
        if points.is_empty() || max[k] <= min[k] {
            scale.push(1.0);
            offset.push(0.5 * (lo + hi) - if points.is_empty() { 0.0 } else { min[k] });
        } else {
            let s = (hi - lo) / (max[k] - min[k]);
            scale.push(s);
            offset.push(lo - min[k] * s);
        }
    }
    Ok((scale, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::generate;
    use crate::kernel::log_likelihood;
    use crate::model::{GeneratorParams, NodeDistribution, NodeState};
    use crate::sampling::RandomSource;

    fn small(seed: u64) -> GeneratorParams {
        GeneratorParams {
            n: 400,
            alpha0: 5.0,
            lambda: 0.5,
            gamma: 1.0,
            seed,
            ..GeneratorParams::default()
        }
    }

    fn owners(points: &[DataPoint]) -> Vec<NodePath> {
        points.iter().map(|p| p.owner.clone()).collect()
    }

    #[test]
    fn single_node_is_untouched() {
        let params = GeneratorParams {
            n: 50,
            alpha0: 1e-9,
            ..small(1)
        };
        let ds = generate(&params).unwrap();
        assert_eq!(ds.hierarchy.len(), 1);
        let (h, pts) = reassign(ds.hierarchy.clone(), ds.points.clone());
        assert_eq!(h, ds.hierarchy);
        assert_eq!(pts, ds.points);
    }

    #[test]
    fn point_at_tighter_child_mean_moves_down() {
        let mut h = Hierarchy::new(GeneratorParams {
            d: 2,
            ..GeneratorParams::default()
        });
        let child = NodePath::from_indices(vec![0]);
        let child_dist = NodeDistribution {
            means: vec![3.0, -1.0],
            sigmas: vec![2.0, 1.5],
        };
        h.nodes.insert(
            child.clone(),
            NodeState::new(child.clone(), child_dist.clone()),
        );
        h.get_mut(&[]).unwrap().point_ids.push(0);
        let pt = DataPoint {
            id: 0,
            features: vec![3.0, -1.0],
            owner: NodePath::root(),
        };
        // Direct comparison at the child's mode.
        let root_ll = log_likelihood(&pt.features, &h.root().distribution).unwrap();
        let child_ll = log_likelihood(&pt.features, &child_dist).unwrap();
        assert!(child_ll > root_ll);

        let (h2, pts) = reassign(h, vec![pt]);
        assert_eq!(pts[0].owner, child);
        assert_eq!(h2.nodes[&child].point_ids, vec![0]);
        assert!(h2.root().point_ids.is_empty());
    }

    #[test]
    fn ties_keep_owner_then_prefer_shallow() {
        let mut h = Hierarchy::new(GeneratorParams {
            d: 1,
            ..GeneratorParams::default()
        });
        let same = NodeDistribution::isotropic(1, 0.0, 1.0);
        h.get_mut(&[]).unwrap().distribution = same.clone();
        for idx in [vec![1], vec![0, 0]] {
            let p = NodePath::from_indices(idx);
            h.nodes.insert(p.clone(), NodeState::new(p, same.clone()));
        }
        let p0 = NodePath::from_indices(vec![0]);
        h.nodes.insert(
            p0.clone(),
            NodeState::new(p0.clone(), NodeDistribution::isotropic(1, 50.0, 1.0)),
        );
        let deep = NodePath::from_indices(vec![0, 0]);
        h.nodes.get_mut(&deep).unwrap().point_ids.push(0);
        h.nodes.get_mut(&p0).unwrap().point_ids.push(1);
        let pts = vec![
            DataPoint {
                id: 0,
                features: vec![0.2],
                owner: deep.clone(),
            },
            DataPoint {
                id: 1,
                features: vec![0.2],
                owner: p0,
            },
        ];
        let (_, out) = reassign(h, pts);
        assert_eq!(out[0].owner, deep, "tied owner kept");
        assert_eq!(out[1].owner, NodePath::root(), "shallowest maximiser");
    }

    #[test]
    fn reassignment_is_an_argmax_and_idempotent() {
        for seed in 0..4 {
            let ds = generate(&small(seed)).unwrap();
            let (h1, p1) = reassign(ds.hierarchy.clone(), ds.points.clone());
            assert_eq!(p1.len(), ds.points.len());
            assert!(h1.nodes.keys().eq(ds.hierarchy.nodes.keys()));
            for (a, b) in h1.nodes.values().zip(ds.hierarchy.nodes.values()) {
                assert_eq!(a.distribution, b.distribution);
            }
            assert!(h1.check_invariants(&p1).is_empty());
            for pt in &p1 {
                let own = log_likelihood(&pt.features, &h1.nodes[&pt.owner].distribution).unwrap();
                for node in h1.nodes.values() {
                    assert!(log_likelihood(&pt.features, &node.distribution).unwrap() <= own);
                }
            }
            let (h2, p2) = reassign(h1.clone(), p1.clone());
            assert_eq!(h2, h1);
            assert_eq!(p2, p1);
        }
    }

    #[test]
    fn identity_rescale() {
        let ds = generate(&small(5)).unwrap();
        let (h, p) = rescale(
            ds.hierarchy.clone(),
            ds.points.clone(),
            &[1.0, 1.0],
            &[0.0, 0.0],
        )
        .unwrap();
        assert_eq!(h, ds.hierarchy);
        assert_eq!(p, ds.points);
    }

    #[test]
    fn point_at_mean_stays_at_mean() {
        let mut h = Hierarchy::new(GeneratorParams::default());
        h.get_mut(&[]).unwrap().distribution.means = vec![1.5, -4.0];
        h.get_mut(&[]).unwrap().point_ids.push(0);
        let pt = DataPoint {
            id: 0,
            features: vec![1.5, -4.0],
            owner: NodePath::root(),
        };
        let (h, p) = rescale(h, vec![pt], &[2.0, 2.0], &[5.0, 5.0]).unwrap();
        assert_eq!(h.root().distribution.means, p[0].features);
        assert_eq!(p[0].features, vec![8.0, -3.0]);
        assert_eq!(h.root().distribution.sigmas, vec![20.0, 20.0]);
    }

    #[test]
    fn rescale_rejects_bad_scale() {
        let ds = generate(&small(0)).unwrap();
        let err = rescale(
            ds.hierarchy.clone(),
            ds.points.clone(),
            &[1.0, 0.0],
            &[0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Param(ParamError::Scale { dim: 1, .. })
        ));
        assert!(rescale(
            ds.hierarchy.clone(),
            ds.points.clone(),
            &[-1.0, 1.0],
            &[0.0, 0.0]
        )
        .is_err());
        assert!(matches!(
            rescale(ds.hierarchy, ds.points, &[1.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reassign_commutes_with_rescale() {
        let params = GeneratorParams { n: 50, ..small(9) };
        let ds = generate(&params).unwrap();
        let mut rng = RandomSource::new(77);
        for _ in 0..5 {
            let scale: Vec<f64> = (0..2).map(|_| 0.1 + 5.0 * rng.uniform_open()).collect();
            let offset: Vec<f64> = (0..2).map(|_| rng.gaussian(0.0, 10.0).unwrap()).collect();
            let (h, p) = rescale(ds.hierarchy.clone(), ds.points.clone(), &scale, &offset).unwrap();
            let (_, a) = reassign(h, p);
            let (h, p) = reassign(ds.hierarchy.clone(), ds.points.clone());
            let (_, b) = rescale(h, p, &scale, &offset).unwrap();
            assert_eq!(owners(&a), owners(&b));
        }
    }

    #[test]
    fn fit_box_maps_extremes() {
        let ds = generate(&small(3)).unwrap();
        let (scale, offset) = fit_box(&ds.points, 2, -1.0, 1.0).unwrap();
        let (_, p) = rescale(ds.hierarchy, ds.points, &scale, &offset).unwrap();
        for k in 0..2 {
            let lo = p
                .iter()
                .map(|x| x.features[k])
                .fold(f64::INFINITY, f64::min);
            let hi = p
                .iter()
                .map(|x| x.features[k])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
        assert!(fit_box(&[], 2, 1.0, 1.0).is_err());
    }
}
