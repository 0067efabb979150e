use std::io::Write;

use anyhow::{bail, Context};
use limsup_core::coding::{contraction_holds, encode_cube, preimage_ball_check, DyadicCube};
use limsup_core::dimension::{
    box_counts, critical_exponent_estimate, fit_dimension, write_scan_csv, CellSet, ExponentScanRow,
};
use limsup_core::fiber::{dense_fiber_fraction, FiberConfig};
use limsup_core::radius::RadiusSpec;
use limsup_core::rng::{CounterRng, Stream};
use limsup_core::simulator::{accumulate_coverage, covered_set, ExperimentConfig, GridSidecar};
use limsup_core::symbolic::{index_set_for, regularity_sweep, SpaceParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::{parse_scan, Source};
use crate::output::Artifacts;

/// Defaults applied beneath flags and config files.
pub fn defaults(command: &str) -> Map<String, Value> {
    let value = match command {
        "t0" => json!({ "factor": 1000 }),
        "dimension" => json!({ "source": "full", "d": 1 }),
        "fibers" => json!({ "b": 2, "rho": 0.5, "gamma": 1.0, "m": 6, "q": 2, "samples": 200 }),
        "regularity" => json!({ "b": 2, "rho": 0.5, "gamma": 1.0, "depth": 40 }),
        "coding-check" => json!({ "d": 2, "pairs": 10000, "depth": 20 }),
        _ => json!({}),
    };
    match value {
        Value::Object(map) => map,
        _ => unreachable!(),
    }
}

/// Runs `command` on a merged config and returns the config as resolved.
pub fn run(command: &str, config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    match command {
        "t0" => t0(config, out),
        "simulate" => simulate(config, out),
        "dimension" => dimension(config, out),
        "fibers" => fibers(config, out),
        "regularity" => regularity(config, out),
        "coding-check" => coding_check(config, out),
        other => bail!("unknown command {other}"),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(config: &Value, what: &str) -> anyhow::Result<T> {
    serde_json::from_value(config.clone()).with_context(|| format!("invalid {what} config"))
}

fn stage(message: &str) {
    eprintln!("[limsup] {message}");
}

#[derive(Debug, Serialize, Deserialize)]
struct T0Config {
    #[serde(flatten)]
    spec: RadiusSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scan: Option<String>,
    factor: u64,
}

fn t0(config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let cfg: T0Config = parse(&config, "t0")?;
    cfg.spec.validate()?;
    if cfg.factor < 2 {
        bail!("factor must be >= 2");
    }
    let analytic = cfg.spec.critical_exponent().ok();
    match analytic {
        Some(t) => println!("t0 = {t}"),
        None => println!("t0 = undefined"),
    }

    let starts = match (&cfg.scan, cfg.spec.len()) {
        (Some(scan), _) => parse_scan(scan)?,
        (None, None) => parse_scan("M=1e3:1e5")?,
        (None, Some(len)) => std::iter::successors(Some(1u64), |m| m.checked_mul(10))
            .take_while(|&m| m < len)
            .collect(),
    };
    stage(&format!("scanning {} tail windows", starts.len()));
    let mut rows = Vec::new();
    let mut last_error = None;
    for m in starts {
        let mut n = m.saturating_mul(cfg.factor);
        if let Some(len) = cfg.spec.len() {
            n = n.min(len);
        }
        if m >= n {
            continue;
        }
        let t_hat = match critical_exponent_estimate(&cfg.spec, m, n) {
            Ok(t_hat) => t_hat,
            Err(e @ limsup_core::Error::NoRoot(_)) => {
                eprintln!("warning: M = {m}, N = {n}: {e}");
                last_error = Some(e);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        println!("M = {m}, N = {n}: t_hat = {t_hat}");
        rows.push(ExponentScanRow {
            tail_start: m,
            horizon: n,
            t_hat,
        });
    }
    if let (true, Some(e)) = (rows.is_empty(), last_error) {
        return Err(e.into());
    }
    out.write_with("t0_scan.csv", |w| write_scan_csv(&rows, w))?;
    out.write_json(
        "t0.json",
        &json!({ "family": cfg.spec.family_name(), "t0": analytic, "defined": analytic.is_some() }),
    )?;
    Ok(serde_json::to_value(&cfg)?)
}

fn simulate(config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let cfg: ExperimentConfig = parse(&config, "simulate")?;
    cfg.validate()?;
    stage(&format!(
        "accumulating balls {}..={} on a 2^{} grid",
        cfg.tail_start,
        cfg.horizon,
        cfg.d * cfg.level
    ));
    let grid = accumulate_coverage(&cfg)?;
    let sidecar = GridSidecar::new(&cfg, &grid)?;
    println!(
        "coverage_fraction(k = {}) = {}",
        cfg.k, sidecar.coverage_fraction
    );
    stage("writing grid");
    out.write_with("grid.csv", |w| grid.write_csv(w))?;
    out.write_json("grid.json", &sidecar)?;
    Ok(serde_json::to_value(&cfg)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct DimensionConfig {
    source: Source,
    #[serde(default)]
    levels: Option<Vec<u32>>,
    d: u32,
    #[serde(default)]
    level: Option<u32>,
}

fn dimension(config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let mut cfg: DimensionConfig = parse(&config, "dimension")?;
    let top = cfg.levels.as_ref().and_then(|l| l.iter().max().copied());
    let mut experiment = None;
    let cells = match cfg.source {
        Source::Full => {
            let level = cfg.level.or(top).unwrap_or(10);
            if cfg.d == 0 {
                bail!("d must be >= 1");
            }
            if cfg.d * level > 31 {
                return Err(limsup_core::Error::GridTooLarge {
                    log2_cells: (cfg.d * level) as u64,
                }
                .into());
            }
            CellSet::full(cfg.d, level)
        }
        Source::Cantor => {
            if cfg.d != 1 {
                bail!("the Cantor fixture lives in d = 1");
            }
            CellSet::middle_half_cantor(cfg.level.or(top).unwrap_or(14))?
        }
        Source::Simulate => {
            let exp: ExperimentConfig = parse(&config, "dimension (simulate)")?;
            exp.validate()?;
            stage("accumulating coverage");
            let grid = accumulate_coverage(&exp)?;
            let cells = covered_set(&grid, exp.k)?;
            experiment = Some(exp);
            cells
        }
    };
    cfg.d = cells.d;
    cfg.level = Some(cells.level);
    let levels = match cfg.levels.clone() {
        Some(levels) => levels,
        None if cfg.source == Source::Cantor => (1..=cells.level / 2).map(|l| 2 * l).collect(),
        None => (1..=cells.level).collect(),
    };
    cfg.levels = Some(levels.clone());
    stage(&format!("counting boxes at {} levels", levels.len()));
    let series = box_counts(&cells, &levels)?;
    if !series.aggregation_bounds_hold() {
        eprintln!("warning: box counts violate the aggregation bounds");
    }
    let estimate = fit_dimension(&series)?;
    println!("slope = {} (r^2 = {})", estimate.slope, estimate.r_squared);
    out.write_with("box_counts.csv", |w| series.write_csv(w))?;
    out.write_with("dimension.csv", |w| estimate.write_csv(w))?;

    let mut echo = serde_json::to_value(&cfg)?;
    if let (Some(exp), Value::Object(map)) = (experiment, &mut echo) {
        if let Value::Object(extra) = serde_json::to_value(&exp)? {
            for (k, v) in extra {
                map.entry(k).or_insert(v);
            }
        }
    }
    Ok(echo)
}

fn fibers(mut config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let map = config
        .as_object_mut()
        .context("config must be a JSON object")?;
    if !map.contains_key("family") {
        let t = map.get("t").cloned().context("fibers needs t")?;
        map.insert("family".into(), json!("power-law"));
        map.insert("s".into(), t);
    }
    let horizons: Vec<u64> = match map.get("N") {
        Some(Value::Array(_)) => parse(&map["N"], "N list")?,
        Some(n) => vec![parse(n, "N")?],
        None => bail!("fibers needs at least one horizon N"),
    };
    if horizons.is_empty() {
        bail!("fibers needs at least one horizon N");
    }

    let mut summary = Vec::new();
    for &n in &horizons {
        let mut single = config.clone();
        single["N"] = json!(n);
        let cfg: FiberConfig = parse(&single, "fibers")?;
        cfg.validate()?;
        stage(&format!("fibers at N = {n}"));
        let report = dense_fiber_fraction(&cfg)?;
        if report.insufficient_depth_warnings > 0 {
            eprintln!(
                "warning: {} ball tests at N = {n} exceeded max_depth and were skipped",
                report.insufficient_depth_warnings
            );
        }
        println!(
            "N = {n}: dense_fraction = {}, expected_hit_sum = {}",
            report.dense_fraction, report.expected_hit_sum
        );
        out.write_with(&format!("fibers_N{n}.csv"), |w| report.write_csv(w))?;
        summary.push((n, report));
    }
    out.write_with("fibers.csv", |w| {
        writeln!(
            w,
            "N,expected_hit_sum,dense_fraction,prefixes,exhaustive,insufficient_depth_warnings"
        )?;
        for (n, r) in &summary {
            writeln!(
                w,
                "{n},{},{},{},{},{}",
                r.expected_hit_sum,
                r.dense_fraction,
                r.prefixes.len(),
                r.exhaustive,
                r.insufficient_depth_warnings
            )?;
        }
        Ok(())
    })?;

    // echo the resolved per-run config with the horizon list restored
    let mut echo = config.clone();
    echo["N"] = json!(horizons[0]);
    let mut echo = serde_json::to_value(parse::<FiberConfig>(&echo, "fibers")?)?;
    echo["N"] = json!(horizons);
    Ok(echo)
}

#[derive(Debug, Serialize, Deserialize)]
struct RegularityConfig {
    #[serde(flatten)]
    params: SpaceParams,
    t: f64,
    depth: u64,
}

fn regularity(config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let cfg: RegularityConfig = parse(&config, "regularity")?;
    cfg.params.validate()?;
    let positions = index_set_for(cfg.t, &cfg.params)?;
    stage(&format!("sweeping {} scales", 2 * cfg.depth - 1));
    let report = regularity_sweep(&positions, cfg.t, &cfg.params, cfg.depth)?;
    println!(
        "c = {} (ratio range [{}, {}])",
        report.constant, report.min_ratio, report.max_ratio
    );
    out.write_with("regularity.csv", |w| {
        writeln!(w, "exponent,r,fixed,measure,ratio")?;
        for s in &report.samples {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.exponent, s.r, s.fixed, s.measure, s.ratio
            )?;
        }
        Ok(())
    })?;
    out.write_json(
        "regularity.json",
        &json!({
            "t": report.t,
            "depth_max": report.depth_max,
            "min_ratio": report.min_ratio,
            "max_ratio": report.max_ratio,
            "constant": report.constant,
        }),
    )?;
    Ok(serde_json::to_value(&cfg)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CodingCheckConfig {
    d: u32,
    pairs: u64,
    #[serde(default)]
    cubes: Option<u64>,
    depth: u32,
    #[serde(default)]
    seed: u64,
}

/// Offset separating cube draws from pair draws on the auxiliary stream.
const CUBE_INDEX_OFFSET: u64 = 1 << 40;

fn coding_check(config: Value, out: &mut Artifacts) -> anyhow::Result<Value> {
    let mut cfg: CodingCheckConfig = parse(&config, "coding-check")?;
    if !(1..=5).contains(&cfg.d) {
        bail!("coding-check supports 1 <= d <= 5, got {}", cfg.d);
    }
    if cfg.depth == 0 || cfg.depth > 30 {
        bail!("coding-check depth must lie in 1..=30, got {}", cfg.depth);
    }
    let cubes = *cfg.cubes.get_or_insert(cfg.pairs);
    let (d, depth) = (cfg.d, cfg.depth);
    let b = 1u32 << d;
    let rng = CounterRng::new(cfg.seed);

    stage(&format!("checking {} pairs at depth {depth}", cfg.pairs));
    let mut violations = 0u64;
    let mut a = vec![0u32; depth as usize];
    let mut c = vec![0u32; depth as usize];
    for i in 0..cfg.pairs {
        // a shared prefix of random length, then independent tails
        let shared = rng.symbol(Stream::Auxiliary, i, 0, depth + 1) - 1;
        for j in 0..depth {
            a[j as usize] = rng.symbol(Stream::Auxiliary, i, 1 + j, b);
            c[j as usize] = if j < shared {
                a[j as usize]
            } else {
                rng.symbol(Stream::Auxiliary, i, 1 + depth + j, b)
            };
        }
        if !contraction_holds(&a, &c, d)? {
            violations += 1;
        }
    }

    stage(&format!("round-tripping {cubes} cubes"));
    let mut roundtrip_failures = 0u64;
    let mut measure_mismatches = 0u64;
    for i in 0..cubes {
        let index = CUBE_INDEX_OFFSET + i;
        let level = rng.symbol(Stream::Auxiliary, index, 0, depth + 1) - 1;
        let mask = (1u64 << level) - 1;
        let coords = (0..d)
            .map(|j| rng.bits(Stream::Auxiliary, index, 1 + j) & mask)
            .collect();
        let cube = DyadicCube::new(d, level, coords)?;
        let word = preimage_ball_check(&cube);
        if encode_cube(&word, d)? != cube {
            roundtrip_failures += 1;
        }
        if word.measure().to_rational() != cube.volume() {
            measure_mismatches += 1;
        }
    }
    println!(
        "contraction violations = {violations}, round-trip failures = {roundtrip_failures}, measure mismatches = {measure_mismatches}"
    );
    out.write_with("coding_check.csv", |w| {
        writeln!(
            w,
            "d,depth,pairs,contraction_violations,cubes,roundtrip_failures,measure_mismatches"
        )?;
        writeln!(
            w,
            "{d},{depth},{},{violations},{cubes},{roundtrip_failures},{measure_mismatches}",
            cfg.pairs
        )
    })?;
    Ok(serde_json::to_value(&cfg)?)
}
