//! Stick-breaking routing through a lazily instantiated tree.
//!
//! A point enters at the root with an insertion value `x` in (0,1). At each
//! node it stops if `x <= nu`; otherwise `x` is renormalised onto the
//! remaining stick and the children are scanned in index order, each child
//! `i` claiming the fraction `psi_i` of what is left. Sticks and child
//! distributions are drawn the first time they are needed and stored in the
//! hierarchy, so later points see the same tree.

use std::collections::BTreeMap;

use crate::error::{Error, ParamError, Result};
use crate::kernel::derive_child;
use crate::model::{GeneratorParams, Hierarchy, NodePath, NodeState};
use crate::sampling::RandomSource;

const OPEN_FLOOR: f64 = f64::MIN_POSITIVE;
const OPEN_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingOutcome {
    pub destination: NodePath,
    /// New nu/psi sticks drawn while routing this point.
    pub sticks_drawn: usize,
}

/// Stop-stick concentration at `depth`: `alpha0 * lambda^depth`.
pub fn alpha_at(params: &GeneratorParams, depth: usize) -> f64 {
    params.alpha0 * params.lambda.powi(depth as i32)
}

// Rounding in the renormalisations can land exactly on an endpoint.
#[inline]
fn keep_open(x: f64) -> f64 {
    x.clamp(OPEN_FLOOR, OPEN_CEIL)
}

/// Routes one insertion value to its destination node.
pub fn route(
    hierarchy: &mut Hierarchy,
    rng: &mut RandomSource,
    insertion: f64,
) -> Result<RoutingOutcome> {
    if !(insertion > 0.0 && insertion < 1.0) {
        return Err(ParamError::Insertion(insertion).into());
    }
    let params = hierarchy.params.clone();
    let kernel = params.kernel();
    let mut path: Vec<u32> = Vec::new();
    let mut x = insertion;
    let mut drawn = 0;

    loop {
        let depth = path.len();
        let node = hierarchy
            .nodes
            .get_mut(path.as_slice())
            .expect("routing visits stored nodes only");
        let nu = match node.nu {
            Some(nu) => nu,
            None => {
                let nu = rng.beta_one(alpha_at(&params, depth))?;
                node.nu = Some(nu);
                drawn += 1;
                nu
            }
        };
        if x <= nu {
            return Ok(RoutingOutcome {
                destination: NodePath::from_indices(path),
                sticks_drawn: drawn,
            });
        }
        // Not stopping here means descending, which would go past the guard.
        if depth >= params.max_depth {
            return Err(Error::DepthLimit {
                max_depth: params.max_depth,
                path: NodePath::from_indices(path),
            });
        }
        x = keep_open((x - nu) / (1.0 - nu));

        let mut index: u32 = 0;
        loop {
            let parent = hierarchy
                .nodes
                .get_mut(path.as_slice())
                .expect("parent is stored");
            let psi = match parent.psi_sticks.get(index as usize) {
                Some(&psi) => psi,
                None => {
                    let psi = rng.beta_one(params.gamma)?;
                    parent.psi_sticks.push(psi);
                    drawn += 1;
                    psi
                }
            };
            path.push(index);
            if !hierarchy.nodes.contains_key(path.as_slice()) {
                let dist =
                    derive_child(&hierarchy.nodes[&path[..depth]].distribution, &kernel, rng);
                let child = NodePath::from_indices(path.clone());
                hierarchy
                    .nodes
                    .insert(child.clone(), NodeState::new(child, dist));
            }
            if x <= psi {
                x = keep_open(x / psi);
                break;
            }
            path.pop();
            x = keep_open((x - psi) / (1.0 - psi));
            index += 1;
        }
    }
}

/// Probability that a fresh insertion value stops at each stored node, from
/// the sticks drawn so far. Nodes whose stop stick is unset get zero.
pub fn node_masses(hierarchy: &Hierarchy) -> BTreeMap<&NodePath, f64> {
    // Probability of entering each node; parents precede children in path order.
    let mut reach: BTreeMap<&NodePath, f64> = BTreeMap::new();
    let mut masses = BTreeMap::new();
    for (path, node) in &hierarchy.nodes {
        let entering = match path.indices().split_last() {
            None => 1.0,
            Some((&i, parent_path)) => match hierarchy.nodes.get_key_value(parent_path) {
                Some((pk, parent)) => {
                    let passed = parent.nu.map_or(0.0, |nu| 1.0 - nu);
                    let sticks = &parent.psi_sticks;
                    let chosen = sticks.get(i as usize).copied().unwrap_or(0.0);
                    let skipped: f64 = sticks.iter().take(i as usize).map(|s| 1.0 - s).product();
                    reach.get(pk).copied().unwrap_or(0.0) * passed * skipped * chosen
                }
                None => 0.0,
            },
        };
        reach.insert(path, entering);
        masses.insert(path, entering * node.nu.unwrap_or(0.0));
    }
    masses
}

/// Total stopping mass accounted for by the stored nodes; never above one.
pub fn node_mass_prefix(hierarchy: &Hierarchy) -> f64 {
    node_masses(hierarchy).values().sum()
}
