#![allow(dead_code)]

use limsup_core::radius::RadiusSpec;
use limsup_core::rng::{CounterRng, Stream};
use limsup_core::simulator::{sample_center, CoverageGrid, ExperimentConfig};

/// Per-cell, per-ball double loop: the reference the accumulator must match.
pub fn naive_grid(config: &ExperimentConfig) -> CoverageGrid {
    let d = config.d as usize;
    let per_axis = 1u64 << config.level;
    let total = 1u64 << (config.d * config.level);
    let balls: Vec<(Vec<f64>, f64)> = (config.tail_start..=config.horizon)
        .map(|n| {
            (
                sample_center(config.seed, n, config.d),
                config.spec.radius_at(n).unwrap(),
            )
        })
        .collect();
    let mut counts = vec![0u32; total as usize];
    for (cell, count) in counts.iter_mut().enumerate() {
        let mut rest = cell as u64;
        let mut coords = vec![0u64; d];
        for j in (0..d).rev() {
            coords[j] = rest % per_axis;
            rest /= per_axis;
        }
        for (center, r) in &balls {
            let mut sq = 0.0;
            for j in 0..d {
                let c = (coords[j] as f64 + 0.5) / per_axis as f64;
                let delta = c - center[j];
                sq += delta * delta;
            }
            if sq < r * r {
                *count += 1;
            }
        }
    }
    CoverageGrid {
        d: config.d,
        level: config.level,
        counts,
    }
}

/// Deterministic random experiment configs with `d ≤ 2`, `L ≤ 6`, `N ≤ 1000`.
pub fn random_small_config(index: u64) -> ExperimentConfig {
    let rng = CounterRng::new(0x5eed_cafe);
    let u = |slot: u32| rng.uniform(Stream::Auxiliary, index, slot);
    let d = 1 + (u(0) * 2.0) as u32;
    let level = 1 + (u(1) * 6.0) as u32;
    let horizon = 1 + (u(2) * 1000.0) as u64;
    let tail_start = 1 + (u(3) * horizon as f64) as u64;
    let spec = match (u(4) * 3.0) as u32 {
        0 => RadiusSpec::power_law(0.3 + 1.7 * u(5), 0.05 + 0.95 * u(6)).unwrap(),
        1 => RadiusSpec::geometric(0.5 + 0.49 * u(5), 0.05 + 0.95 * u(6)).unwrap(),
        _ => RadiusSpec::explicit(
            (0..horizon)
                .map(|n| 0.001 + 0.3 * rng.uniform(Stream::Auxiliary, index, 100 + n as u32))
                .collect(),
        )
        .unwrap(),
    };
    let mut config = ExperimentConfig::new(
        d,
        spec,
        horizon,
        level,
        rng.bits(Stream::Auxiliary, index, 7),
    );
    config.tail_start = tail_start.min(horizon);
    config
}
