//! Domain types shared across the crate.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::ParamError;
use crate::kernel::KernelParams;

pub const DEFAULT_MAX_DEPTH: usize = 512;
pub const DEFAULT_SIGMA_MIN: f64 = 0.05;
pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

/// Every hyperparameter of one generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Number of points to generate.
    pub n: usize,
    /// Feature dimension.
    pub d: usize,
    /// Stop-stick concentration at the root.
    pub alpha0: f64,
    /// Per-level decay of the stop-stick concentration.
    pub lambda: f64,
    /// Concentration of the child-selection sticks.
    pub gamma: f64,
    /// Kernel Beta shape for the sigma ratio.
    pub p: f64,
    pub q: f64,
    /// Lower clamp for node sigmas.
    pub sigma_min: f64,
    /// Root sigma in every dimension.
    pub sigma_max: f64,
    pub seed: u64,
    pub max_depth: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n: 10_000,
            d: 2,
            alpha0: 1.0,
            lambda: 0.5,
            gamma: 0.2,
            p: 1.0,
            q: 5.0,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Names of the eight reference parameter sets.
pub const PRESET_NAMES: [&str; 8] = ["s00", "s01", "s02", "s03", "s04", "s05", "s06", "s07"];

impl GeneratorParams {
    /// One of the reference sets `s00`..`s07`. They share n=10000, d=2, p=1,
    /// q=5, sigma_min=0.05, sigma_max=10 and differ in (alpha0, lambda, gamma).
    pub fn preset(name: &str) -> Option<Self> {
        let (alpha0, lambda, gamma) = match name {
            "s00" => (1.0, 0.5, 0.2),
            "s01" => (1.0, 1.0, 0.2),
            "s02" => (1.0, 1.0, 1.0),
            "s03" => (5.0, 0.5, 0.2),
            "s04" => (5.0, 1.0, 0.2),
            "s05" => (5.0, 0.5, 1.0),
            "s06" => (25.0, 0.5, 0.2),
            "s07" => (25.0, 0.5, 1.0),
            _ => return None,
        };
        Some(GeneratorParams {
            alpha0,
            lambda,
            gamma,
            ..GeneratorParams::default()
        })
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.d < 1 {
            return Err(ParamError::Dimension(self.d));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(ParamError::Alpha0(self.alpha0));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ParamError::Lambda(self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ParamError::Gamma(self.gamma));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(ParamError::P(self.p));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(ParamError::Q(self.q));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite())
        {
            return Err(ParamError::SigmaBounds {
                min: self.sigma_min,
                max: self.sigma_max,
            });
        }
        if self.max_depth < 1 {
            return Err(ParamError::MaxDepth(self.max_depth));
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams {
            p: self.p,
            q: self.q,
            sigma_min: self.sigma_min,
        }
    }
}

/// Position of a node: the child index taken at each level below the root.
///
/// Paths order lexicographically, which is depth-first pre-order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<u32>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn from_indices(indices: Vec<u32>) -> Self {
        NodePath(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<NodePath> {
        let (_, init) = self.0.split_last()?;
        Some(NodePath(init.to_vec()))
    }

    pub fn child(&self, index: u32) -> NodePath {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(index);
        NodePath(v)
    }

    /// True when `self` is an ancestor of `other` or equal to it.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl Borrow<[u32]> for NodePath {
    fn borrow(&self) -> &[u32] {
        &self.0
    }
}

/// Renders as `/` for the root and `/0/3/1` otherwise.
impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| format!("node path `{s}` must start with `/`"))?;
        if rest.is_empty() {
            return Ok(NodePath::root());
        }
        rest.split('/')
            .map(|part| {
                part.parse::<u32>()
                    .map_err(|_| format!("bad child index `{part}` in node path `{s}`"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(NodePath)
    }
}

/// Diagonal Gaussian attached to a node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDistribution {
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl NodeDistribution {
    pub fn isotropic(d: usize, mean: f64, sigma: f64) -> Self {
        NodeDistribution {
            means: vec![mean; d],
            sigmas: vec![sigma; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

/// One realized node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub path: NodePath,
    /// Stop stick, drawn the first time a point enters the node.
    pub nu: Option<f64>,
    /// Child-selection sticks, one per instantiated child index.
    pub psi_sticks: Vec<f64>,
    pub distribution: NodeDistribution,
    /// Owned point ids, ascending.
    pub point_ids: Vec<u64>,
}

impl NodeState {
    pub fn new(path: NodePath, distribution: NodeDistribution) -> Self {
        NodeState {
            path,
            nu: None,
            psi_sticks: Vec::new(),
            distribution,
            point_ids: Vec::new(),
        }
    }
}

/// A realized finite tree keyed by node path.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub params: GeneratorParams,
    pub nodes: BTreeMap<NodePath, NodeState>,
}

impl Hierarchy {
    /// A hierarchy holding only the root, distributed as `Gauss(0, sigma_max)`
    /// in every dimension.
    pub fn new(params: GeneratorParams) -> Self {
        let root = NodeState::new(
            NodePath::root(),
            NodeDistribution::isotropic(params.d, 0.0, params.sigma_max),
        );
        let mut nodes = BTreeMap::new();
        nodes.insert(NodePath::root(), root);
        Hierarchy { params, nodes }
    }

    pub fn root(&self) -> &NodeState {
        &self.nodes[&[][..]]
    }

    pub fn get(&self, path: &[u32]) -> Option<&NodeState> {
        self.nodes.get(path)
    }

    pub fn get_mut(&mut self, path: &[u32]) -> Option<&mut NodeState> {
        self.nodes.get_mut(path)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.nodes.values().map(|n| n.point_ids.len()).sum()
    }

    /// Number of stored children for every node, in path order.
    pub fn child_counts(&self) -> BTreeMap<&NodePath, usize> {
        let mut counts: BTreeMap<&NodePath, usize> = self.nodes.keys().map(|k| (k, 0)).collect();
        for path in self.nodes.keys() {
            if let Some((_, parent)) = path.indices().split_last() {
                if let Some((key, _)) = self.nodes.get_key_value(parent) {
                    *counts.get_mut(&key).expect("every key is counted") += 1;
                }
            }
        }
        counts
    }

    /// Lists every violated structural invariant: tree closure, point
    /// partition, and per-edge sigma monotonicity.
    pub fn check_invariants(&self, points: &[DataPoint]) -> Vec<String> {
        let mut problems = Vec::new();
        if !self.nodes.is_empty() && self.get(&[]).is_none() {
            problems.push("root missing".to_string());
        }
        for (path, node) in &self.nodes {
            if &node.path != path {
                problems.push(format!(
                    "node stored under {path} claims path {}",
                    node.path
                ));
            }
            if node.distribution.dim() != self.params.d
                || node.distribution.sigmas.len() != self.params.d
            {
                problems.push(format!("node {path} has wrong dimension"));
            }
            if let Some(parent) = path.parent() {
                match self.nodes.get(&parent) {
                    None => problems.push(format!("node {path} has no parent")),
                    Some(p) => {
                        for (k, (c, s)) in node
                            .distribution
                            .sigmas
                            .iter()
                            .zip(&p.distribution.sigmas)
                            .enumerate()
                        {
                            if c > s {
                                problems.push(format!(
                                    "sigma of {path} exceeds its parent in dimension {k}: {c} > {s}"
                                ));
                            }
                        }
                    }
                }
            }
        }
        let mut owner_of = std::collections::HashMap::new();
        for node in self.nodes.values() {
            for &id in &node.point_ids {
                if owner_of.insert(id, &node.path).is_some() {
                    problems.push(format!("point {id} owned by more than one node"));
                }
            }
        }
        if owner_of.len() != points.len() {
            problems.push(format!(
                "{} points listed in nodes, {} points in dataset",
                owner_of.len(),
                points.len()
            ));
        }
        for pt in points {
            match owner_of.get(&pt.id) {
                Some(owner) if **owner == pt.owner => {}
                Some(owner) => problems.push(format!(
                    "point {} says owner {} but node {} holds it",
                    pt.id, pt.owner, owner
                )),
                None => problems.push(format!("point {} is not held by any node", pt.id)),
            }
            if pt.features.len() != self.params.d {
                problems.push(format!("point {} has wrong dimension", pt.id));
            }
        }
        problems
    }
}

/// One generated object.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub id: u64,
    pub features: Vec<f64>,
    pub owner: NodePath,
}
