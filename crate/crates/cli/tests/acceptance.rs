//! Acceptance suite: one PASS/FAIL line per criterion, each with a runtime budget.
//!
//! Run with `cargo test -p limsup-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use limsup_core::coding::{contraction_holds, encode_cube, preimage_ball_check, DyadicCube};
use limsup_core::dimension::{box_counts, critical_exponent_estimate, fit_dimension, CellSet};
use limsup_core::fiber::{dense_fiber_fraction, FiberConfig};
use limsup_core::radius::RadiusSpec;
use limsup_core::rng::{CounterRng, Stream};
use limsup_core::simulator::{
    accumulate_coverage, accumulate_coverage_with_threads, coverage_fraction, covered_set,
    ExperimentConfig,
};
use limsup_core::symbolic::{index_set_for, regularity_sweep, SpaceParams};
use serde_json::Value;

struct Outcome {
    passed: bool,
    detail: String,
}

/// Writes past the test harness capture so the report shows in plain `cargo test`.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn check(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = body();
    let elapsed = started.elapsed();
    let passed = outcome.passed && elapsed <= budget;
    report(&format!(
        "{} criterion {id} ({name}): {} [{:.2}s of {}s]",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    ));
    passed
}

fn exact_t0() -> Outcome {
    let mut mismatches = Vec::new();
    for i in 1..=20 {
        let s = i as f64 / 10.0;
        let t0 = RadiusSpec::power_law(s, 1.0)
            .unwrap()
            .critical_exponent()
            .unwrap();
        if t0 != s {
            mismatches.push(s);
        }
    }
    let geometric = RadiusSpec::geometric(0.5, 1.0)
        .unwrap()
        .critical_exponent()
        .unwrap();
    Outcome {
        passed: mismatches.is_empty() && geometric == 0.0,
        detail: format!("power-law mismatches {mismatches:?}, geometric t0 = {geometric}"),
    }
}

fn upper_bound_diagnostic() -> Outcome {
    let spec = RadiusSpec::power_law(0.5, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut passed = true;
    for m in [1_000u64, 10_000, 100_000] {
        let t_hat = critical_exponent_estimate(&spec, m, 1000 * m).unwrap();
        let bound = 0.7 / (m as f64).log10();
        passed &= (t_hat - 0.5).abs() <= bound;
        rows.push(t_hat);
    }
    passed &= rows.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        passed,
        detail: format!("t_hat = {rows:?}"),
    }
}

fn regularity() -> Outcome {
    let params = SpaceParams::new(2, 0.5, 1.0).unwrap();
    let mut passed = true;
    let mut constants = Vec::new();
    for t in [0.25, 0.5, 0.75, 1.0] {
        let positions = index_set_for(t, &params).unwrap();
        let deep = regularity_sweep(&positions, t, &params, 40).unwrap();
        let shallow = regularity_sweep(&positions, t, &params, 20).unwrap();
        passed &= deep.constant.is_finite() && deep.min_ratio > 0.0;
        passed &= deep.constant.to_bits() == shallow.constant.to_bits();
        constants.push(deep.constant);
    }
    Outcome {
        passed,
        detail: format!("c at depth 40 = {constants:?}, equal to depth 20: {passed}"),
    }
}

fn coding_map() -> Outcome {
    let rng = CounterRng::new(20);
    let depth = 20u32;
    let (mut violations, mut roundtrip, mut measure) = (0, 0, 0);
    for d in 1..=3u32 {
        let b = 1u32 << d;
        for i in 0..10_000u64 {
            let index = i + 100_000 * d as u64;
            let shared = rng.symbol(Stream::Auxiliary, index, 0, depth + 1) - 1;
            let a: Vec<u32> = (0..depth)
                .map(|j| rng.symbol(Stream::Auxiliary, index, 1 + j, b))
                .collect();
            let c: Vec<u32> = (0..depth)
                .map(|j| {
                    if j < shared {
                        a[j as usize]
                    } else {
                        rng.symbol(Stream::Auxiliary, index, 100 + j, b)
                    }
                })
                .collect();
            if !contraction_holds(&a, &c, d).unwrap() {
                violations += 1;
            }
            let level = rng.symbol(Stream::Auxiliary, index, 200, depth + 1) - 1;
            let coords = (0..d)
                .map(|j| rng.bits(Stream::Auxiliary, index, 201 + j) & ((1u64 << level) - 1))
                .collect();
            let cube = DyadicCube::new(d, level, coords).unwrap();
            let word = preimage_ball_check(&cube);
            if encode_cube(&word, d).unwrap() != cube {
                roundtrip += 1;
            }
            if word.measure().to_rational() != cube.volume() {
                measure += 1;
            }
        }
    }
    Outcome {
        passed: violations == 0 && roundtrip == 0 && measure == 0,
        detail: format!("violations {violations}, round-trip failures {roundtrip}, measure mismatches {measure}"),
    }
}

fn oracle_equivalence() -> Outcome {
    let (mut mismatches, mut thread_diffs) = (0, 0);
    for index in 0..50 {
        let config = common::random_small_config(index);
        let one = accumulate_coverage_with_threads(&config, 1).unwrap();
        let eight = accumulate_coverage_with_threads(&config, 8).unwrap();
        if one != common::naive_grid(&config) {
            mismatches += 1;
        }
        if one != eight {
            thread_diffs += 1;
        }
    }
    Outcome {
        passed: mismatches == 0 && thread_diffs == 0,
        detail: format!(
            "50 configs: oracle mismatches {mismatches}, 1 vs 8 thread differences {thread_diffs}"
        ),
    }
}

fn coverage_regimes() -> Outcome {
    let mut full =
        ExperimentConfig::new(1, RadiusSpec::power_law(1.0, 1.0).unwrap(), 100_000, 10, 7);
    full.k = 5;
    let full_fraction = coverage_fraction(&accumulate_coverage(&full).unwrap(), 5).unwrap();
    let mut null = ExperimentConfig::new(
        1,
        RadiusSpec::power_law(0.5, 1.0).unwrap(),
        1_000_000,
        10,
        7,
    );
    null.k = 10;
    let null_fraction = coverage_fraction(&accumulate_coverage(&null).unwrap(), 10).unwrap();
    Outcome {
        passed: full_fraction >= 0.99 && null_fraction <= 0.05,
        detail: format!("full regime {full_fraction}, null regime {null_fraction}"),
    }
}

fn fibers() -> Outcome {
    let params = SpaceParams::new(2, 0.5, 1.0).unwrap();
    let run = |n| {
        dense_fiber_fraction(&FiberConfig::matched(params, 0.5, n, 6, 2, 200, 3).unwrap()).unwrap()
    };
    let sums: Vec<f64> = [1_000u64, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            let mut config = FiberConfig::matched(params, 0.5, n, 1, 2, 1, 3).unwrap();
            config.samples = 1;
            dense_fiber_fraction(&config).unwrap().expected_hit_sum
        })
        .collect();
    let growth: Vec<f64> = sums.windows(2).map(|w| w[1] - w[0]).collect();
    let low = run(10_000).dense_fraction;
    let high = run(100_000).dense_fraction;
    Outcome {
        passed: high > low && high >= 0.5 && growth.iter().all(|&g| g >= 2.0),
        detail: format!(
            "dense fraction {low} -> {high}, expected hit sum growth per decade {growth:?}"
        ),
    }
}

fn box_counting() -> Outcome {
    let mut passed = true;
    let mut full_slopes = Vec::new();
    for (d, top) in [(1u32, 20u32), (2, 11), (3, 7)] {
        let series = box_counts(&CellSet::full(d, top), &(1..=top).collect::<Vec<_>>()).unwrap();
        passed &= series.aggregation_bounds_hold();
        let slope = fit_dimension(&series).unwrap().slope;
        passed &= slope == d as f64;
        full_slopes.push(slope);
    }
    let cantor = CellSet::middle_half_cantor(14).unwrap();
    let series = box_counts(&cantor, &[4, 6, 8, 10, 12, 14]).unwrap();
    passed &= series.aggregation_bounds_hold();
    let cantor_slope = fit_dimension(&series).unwrap().slope;
    passed &= (cantor_slope - 0.5).abs() <= 0.02;

    let mut simulated =
        ExperimentConfig::new(2, RadiusSpec::power_law(0.8, 0.5).unwrap(), 50_000, 9, 1);
    simulated.tail_start = 100;
    let cells = covered_set(&accumulate_coverage(&simulated).unwrap(), 1).unwrap();
    passed &= box_counts(&cells, &(0..=9).collect::<Vec<_>>())
        .unwrap()
        .aggregation_bounds_hold();
    Outcome {
        passed,
        detail: format!("full-grid slopes {full_slopes:?}, Cantor slope {cantor_slope}"),
    }
}

fn run_cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_limsup"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let values = root.path().join("values.json");
    fs::write(
        &values,
        "[0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0002]",
    )
    .unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "t0",
            "--family",
            "power-law",
            "--s",
            "0.5",
            "--scan",
            "M=1e3:1e5",
        ],
        vec![
            "t0",
            "--family",
            "explicit",
            "--values-file",
            values.to_str().unwrap(),
        ],
        vec![
            "simulate",
            "--d",
            "2",
            "--family",
            "power-law",
            "--s",
            "1",
            "--N",
            "1e5",
            "--level",
            "8",
            "--seed",
            "7",
        ],
        vec![
            "dimension",
            "--source",
            "simulate",
            "--d",
            "1",
            "--family",
            "geometric",
            "--ratio",
            "0.999",
            "--N",
            "5e3",
            "--level",
            "10",
            "--k",
            "1",
        ],
        vec!["dimension", "--source", "cantor", "--levels", "4:14:2"],
        vec![
            "fibers",
            "--t",
            "0.5",
            "--s",
            "0.5",
            "--N",
            "1e4,1e5",
            "--q",
            "2",
            "--m",
            "6",
            "--samples",
            "200",
            "--seed",
            "3",
        ],
        vec![
            "regularity",
            "--b",
            "2",
            "--rho",
            "0.5",
            "--t",
            "0.5",
            "--depth",
            "40",
        ],
        vec!["coding-check", "--d", "2", "--pairs", "1e4", "--seed", "1"],
    ];
    let mut failures = Vec::new();
    let mut artifacts = 0;
    for (i, args) in runs.iter().enumerate() {
        let first = root.path().join(format!("run{i}"));
        let replay = root.path().join(format!("replay{i}"));
        if !run_cli(args, &first) {
            failures.push(format!("{} failed", args[0]));
            continue;
        }
        let manifest_path = first.join("manifest.json");
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
        let command = manifest["command"].as_str().unwrap();
        if !run_cli(
            &[command, "--config", manifest_path.to_str().unwrap()],
            &replay,
        ) {
            failures.push(format!("{command} replay failed"));
            continue;
        }
        for name in manifest["artifacts"].as_array().unwrap() {
            let name = name.as_str().unwrap();
            artifacts += 1;
            if fs::read(first.join(name)).ok() != fs::read(replay.join(name)).ok() {
                failures.push(format!("{command}: {name} differs"));
            }
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{} commands, {artifacts} artifacts compared, problems {failures:?}",
            runs.len()
        ),
    }
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let results = [
        check(1, "exact t0", secs(1), exact_t0),
        check(
            2,
            "upper-bound cover diagnostic",
            secs(30),
            upper_bound_diagnostic,
        ),
        check(3, "ball regularity", secs(1), regularity),
        check(4, "coding map", secs(5), coding_map),
        check(
            5,
            "simulator oracle equivalence",
            secs(30),
            oracle_equivalence,
        ),
        check(
            6,
            "full-measure and null regimes",
            secs(60),
            coverage_regimes,
        ),
        check(7, "dense fibers at finite scale", secs(60), fibers),
        check(8, "box-count estimator", secs(5), box_counting),
        check(
            9,
            "reproducibility from manifests",
            secs(10),
            reproducibility,
        ),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    report(&format!("{passed}/{} criteria passed", results.len()));
    assert_eq!(passed, results.len());
}
