//! Synthetic object-cluster hierarchies from a tree-structured stick-breaking
//! process.
//!
//! A [`Hierarchy`] is grown lazily while `n` points are routed through nested
//! stick-breaking sticks; each node carries a diagonal Gaussian derived from
//! its parent's. Around the generator sit closed-form estimators of the
//! expected tree shape ([`analytics`]), likelihood-based reassignment and
//! affine rescaling ([`postprocess`]), structure metrics ([`metrics`]) and
//! plain-text serialization ([`io`]).
//!
//! ```
//! use hiergen::{generate, GeneratorParams};
//!
//! let params = GeneratorParams { n: 200, seed: 7, ..GeneratorParams::preset("s03").unwrap() };
//! let ds = generate(&params).unwrap();
//! assert_eq!(ds.points.len(), 200);
//! assert!(ds.hierarchy.check_invariants(&ds.points).is_empty());
//! ```

pub mod analytics;
pub mod error;
pub mod generator;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod postprocess;
pub mod sampling;
pub mod tssb;

pub use error::{Error, ParamError, Result};
pub use generator::{generate, generate_replicate, generate_unpruned, prune, Dataset};
pub use kernel::KernelParams;
pub use metrics::{BatchSummary, HierarchyStats, LevelHistogram, MeanStd};
pub use model::{
    DataPoint, GeneratorParams, Hierarchy, NodeDistribution, NodePath, NodeState, PRESET_NAMES,
};
pub use sampling::RandomSource;
