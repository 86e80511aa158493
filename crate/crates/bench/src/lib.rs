//! Fixtures shared by the benchmarks.

use tnr_core::{InitParams, TensorNetworkLayer};

/// The largest TT layer of the step-count sweeps.
pub fn sweep_tt(seed: u64) -> TensorNetworkLayer {
    TensorNetworkLayer::build_tt(34, 12, 10, &InitParams::gaussian(1.0, 0.5, seed)).unwrap()
}

/// The largest TT-M layer of the step-count sweeps.
pub fn sweep_ttm(seed: u64) -> TensorNetworkLayer {
    TensorNetworkLayer::build_ttm(34, 12, 12, 10, &InitParams::gaussian(1.0, 0.5, seed)).unwrap()
}

pub fn small_peps(seed: u64) -> TensorNetworkLayer {
    TensorNetworkLayer::build_peps(3, 3, 2, 3, &InitParams::gaussian(1.0, 0.5, seed)).unwrap()
}

/// A chain whose norm overflows, so the protocol has to take steps.
pub fn overflowing_tt(n: usize) -> TensorNetworkLayer {
    TensorNetworkLayer::build_tt(n, 8, 6, &InitParams::gaussian(3000.0, 1500.0, 7)).unwrap()
}
