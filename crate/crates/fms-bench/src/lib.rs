//! Shared builders for the criterion benchmarks.

use fms_core::{generate, FunctionSet, GridSpec, SynthConfig};

/// One diffuse blob; every pairwise kernel weight stays active so the full
/// loop pays its whole quadratic cost.
pub fn diffuse_set(n: usize, num_points: usize, seed: u64) -> FunctionSet {
    let grid = GridSpec::unit(num_points).expect("valid grid");
    generate(&SynthConfig::new(grid, 1, n, 0.5, seed)).set
}
