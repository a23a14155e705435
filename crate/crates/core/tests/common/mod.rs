#![allow(dead_code)]

pub mod props;

use resonance_lab::landscape::{make_benchmark, Basin, DepthFunction, DriftField};
use resonance_lab::profile::EnergyProfile;

pub const BENCH_DEPTH: DepthFunction = DepthFunction::Cosine {
    mean: 0.5,
    amplitude: 0.25,
};

pub fn benchmark(d: usize) -> DriftField {
    make_benchmark(d, BENCH_DEPTH, 0.5).unwrap()
}

/// e_-(s) = 1 + 0.5 cos(2 pi s) and its half-period shift, on `m` phases.
pub fn sinusoid(m: usize) -> (EnergyProfile, EnergyProfile) {
    (
        EnergyProfile::cosine(Basin::Minus, m, 1.0, 0.5, 0.0).unwrap(),
        EnergyProfile::cosine(Basin::Plus, m, 1.0, 0.5, 0.5).unwrap(),
    )
}
