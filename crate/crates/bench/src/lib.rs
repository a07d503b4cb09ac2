//! Fixtures shared by the benchmarks.

use hiergen::{generate, Dataset, GeneratorParams};

/// A reference set with its point count replaced.
pub fn params(preset: &str, n: usize, seed: u64) -> GeneratorParams {
    GeneratorParams {
        n,
        seed,
        ..GeneratorParams::preset(preset).expect("known preset")
    }
}

pub fn dataset(preset: &str, n: usize, seed: u64) -> Dataset {
    generate(&params(preset, n, seed)).expect("reference sets validate")
}
