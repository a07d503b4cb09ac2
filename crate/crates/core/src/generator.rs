//! The generation loop: draw an insertion value, route it, sample the point
//! from the node it lands in, repeat until `n` points exist.

use std::collections::HashSet;

use crate::error::Result;
use crate::kernel::draw_point;
use crate::model::{DataPoint, GeneratorParams, Hierarchy};
use crate::sampling::RandomSource;
use crate::tssb::route;

/// A generated hierarchy together with its points, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hierarchy: Hierarchy,
    pub points: Vec<DataPoint>,
}

/// Generates and prunes, seeding from `params.seed`.
pub fn generate(params: &GeneratorParams) -> Result<Dataset> {
    generate_with_rng(params, &mut RandomSource::new(params.seed), true)
}

/// Like [`generate`] but keeps every node instantiated during routing.
pub fn generate_unpruned(params: &GeneratorParams) -> Result<Dataset> {
    generate_with_rng(params, &mut RandomSource::new(params.seed), false)
}

/// Replicate `index` of a batch: uses child stream `index` of `params.seed`.
pub fn generate_replicate(
    params: &GeneratorParams,
    index: u64,
    prune_empty: bool,
) -> Result<Dataset> {
    let mut rng = RandomSource::new(params.seed).fork(index);
    generate_with_rng(params, &mut rng, prune_empty)
}

pub fn generate_with_rng(
    params: &GeneratorParams,
    rng: &mut RandomSource,
    prune_empty: bool,
) -> Result<Dataset> {
    params.validate()?;
    let mut hierarchy = Hierarchy::new(params.clone());
    let mut points = Vec::with_capacity(params.n);
    for id in 0..params.n as u64 {
        let insertion = rng.uniform_open();
        let outcome = route(&mut hierarchy, rng, insertion)?;
        let node = hierarchy
            .nodes
            .get_mut(&outcome.destination)
            .expect("destination is stored");
        let features = draw_point(&node.distribution, rng);
        node.point_ids.push(id);
        points.push(DataPoint {
            id,
            features,
            owner: outcome.destination,
        });
    }
    if prune_empty {
        hierarchy = prune(hierarchy);
    }
    Ok(Dataset { hierarchy, points })
}

/// Drops every node whose subtree holds no points. The root and every empty
/// node on the way to a populated one are kept.
pub fn prune(mut hierarchy: Hierarchy) -> Hierarchy {
    let mut keep: HashSet<Vec<u32>> = HashSet::new();
    keep.insert(Vec::new());
    for (path, node) in &hierarchy.nodes {
        if node.point_ids.is_empty() {
            continue;
        }
        let idx = path.indices();
        for len in (1..=idx.len()).rev() {
            if !keep.insert(idx[..len].to_vec()) {
                break;
            }
        }
    }
    hierarchy
        .nodes
        .retain(|path, _| keep.contains(path.indices()));
    hierarchy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeDistribution, NodePath, NodeState};

    fn small(seed: u64) -> GeneratorParams {
        GeneratorParams {
            n: 500,
            alpha0: 5.0,
            lambda: 0.5,
            gamma: 1.0,
            seed,
            ..GeneratorParams::default()
        }
    }

    #[test]
    fn empty_generation_is_bare_root() {
        let params = GeneratorParams {
            n: 0,
            ..GeneratorParams::default()
        };
        let ds = generate(&params).unwrap();
        assert!(ds.points.is_empty());
        assert_eq!(ds.hierarchy.len(), 1);
        let root = ds.hierarchy.root();
        assert_eq!(root.nu, None);
        assert!(root.psi_sticks.is_empty());
        assert_eq!(root.distribution, NodeDistribution::isotropic(2, 0.0, 10.0));
    }

    #[test]
    fn exact_count_and_invariants() {
        for seed in 0..5 {
            let ds = generate(&small(seed)).unwrap();
            assert_eq!(ds.points.len(), 500);
            assert!(ds.points.iter().enumerate().all(|(i, p)| p.id == i as u64));
            let problems = ds.hierarchy.check_invariants(&ds.points);
            assert!(problems.is_empty(), "{problems:?}");
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = generate(&small(42)).unwrap();
        let b = generate(&small(42)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(43)).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn invalid_params_rejected() {
        let params = GeneratorParams {
            gamma: 0.0,
            ..small(0)
        };
        assert!(generate(&params).is_err());
    }

    fn bare(params: GeneratorParams, paths: &[&[u32]], populated: &[&[u32]]) -> Hierarchy {
        let mut h = Hierarchy::new(params);
        for p in paths {
            let path = NodePath::from_indices(p.to_vec());
            h.nodes.insert(
                path.clone(),
                NodeState::new(path, NodeDistribution::isotropic(2, 0.0, 1.0)),
            );
        }
        for (id, p) in populated.iter().enumerate() {
            h.get_mut(p).unwrap().point_ids.push(id as u64);
        }
        h
    }

    #[test]
    fn prune_drops_empty_subtrees_only() {
        let h = bare(
            GeneratorParams::default(),
            &[&[0], &[0, 0], &[0, 0, 0], &[1], &[1, 0], &[2]],
            &[&[0, 0, 0]],
        );
        let pruned = prune(h);
        let kept: Vec<String> = pruned.nodes.keys().map(|p| p.to_string()).collect();
        assert_eq!(kept, ["/", "/0", "/0/0", "/0/0/0"]);
    }

    #[test]
    fn prune_keeps_root_when_everything_is_empty() {
        let h = bare(GeneratorParams::default(), &[&[0], &[1]], &[]);
        let pruned = prune(h);
        assert_eq!(pruned.len(), 1);
    }

    #[test]
    fn prune_is_idempotent() {
        let ds = generate_unpruned(&small(7)).unwrap();
        let once = prune(ds.hierarchy.clone());
        assert!(once.len() <= ds.hierarchy.len());
        assert_eq!(prune(once.clone()), once);
        assert_eq!(once.point_count(), 500);
    }

    #[test]
    fn replicate_streams_differ() {
        let p = small(1);
        let a = generate_replicate(&p, 0, true).unwrap();
        let b = generate_replicate(&p, 1, true).unwrap();
        assert_ne!(a.points, b.points);
        assert_eq!(a, generate_replicate(&p, 0, true).unwrap());
    }
}
