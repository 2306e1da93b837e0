//! Fixed inputs shared by the benchmarks.

use nalgebra::DMatrix;
use uos_core::model::{
    generate_ensemble, sample_case3, zero_fill, EnsembleParams, GenerationMode, ObservedDataset,
};

/// The default experiment setting: `n = 50`, three 3-dimensional subspaces.
pub fn dataset(points_per_subspace: usize, p: f64, seed: u64) -> ObservedDataset {
    let params = EnsembleParams::uniform(
        50,
        3,
        3,
        points_per_subspace,
        GenerationMode::GaussianProduct,
    );
    let (_, x) = generate_ensemble(&params, seed).expect("valid parameters");
    let pattern = sample_case3(50, x.ncols(), p, seed).expect("valid ratio");
    zero_fill(&x, &pattern).expect("matching shapes")
}

/// Deterministic pseudo-random matrix, entries in `[-1, 1)`.
pub fn matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    DMatrix::from_fn(rows, cols, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}
