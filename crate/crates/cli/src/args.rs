use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Debug, Parser)]
#[command(name = "limsup", version, about = "Random limsup covering experiments")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, value_parser = parse_u64)]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, value_parser = parse_usize)]
    pub threads: Option<usize>,
    /// Directory receiving artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON config (or a run manifest); its keys override flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic critical exponent and a scan of finite-window estimates.
    T0(T0Args),
    /// Accumulate coverage multiplicities on a dyadic grid.
    Simulate(SimulateArgs),
    /// Box-counting dimension of a cell set.
    Dimension(DimensionArgs),
    /// Density of fibers above sampled base points.
    Fibers(FiberArgs),
    /// Ball measure to r^t ratios in the symbolic space.
    Regularity(RegularityArgs),
    /// Randomized checks of the dyadic coding map.
    CodingCheck(CodingArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::T0(_) => "t0",
            Command::Simulate(_) => "simulate",
            Command::Dimension(_) => "dimension",
            Command::Fibers(_) => "fibers",
            Command::Regularity(_) => "regularity",
            Command::CodingCheck(_) => "coding-check",
        }
    }

    /// Config keys given on the command line.
    pub fn flag_map(&self) -> anyhow::Result<Map<String, Value>> {
        let mut map = Map::new();
        match self {
            Command::T0(a) => {
                a.radius.insert(&mut map)?;
                put(&mut map, "scan", &a.scan);
                put(&mut map, "factor", &a.factor);
            }
            Command::Simulate(a) => a.experiment.insert(&mut map)?,
            Command::Dimension(a) => {
                put(&mut map, "source", &a.source);
                put(
                    &mut map,
                    "levels",
                    &a.levels.as_deref().map(parse_levels).transpose()?,
                );
                a.experiment.insert(&mut map)?;
            }
            Command::Fibers(a) => {
                a.space.insert(&mut map);
                a.radius.insert(&mut map)?;
                put(&mut map, "t", &a.t);
                if !a.horizons.is_empty() {
                    map.insert("N".into(), json!(a.horizons));
                }
                put(&mut map, "m", &a.m);
                put(&mut map, "q", &a.q);
                put(&mut map, "samples", &a.samples);
                put(&mut map, "max_depth", &a.max_depth);
            }
            Command::Regularity(a) => {
                a.space.insert(&mut map);
                put(&mut map, "t", &a.t);
                put(&mut map, "depth", &a.depth);
            }
            Command::CodingCheck(a) => {
                put(&mut map, "d", &a.d);
                put(&mut map, "pairs", &a.pairs);
                put(&mut map, "cubes", &a.cubes);
                put(&mut map, "depth", &a.depth);
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PowerLaw,
    Geometric,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Simulate,
    Full,
    Cantor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipFlag {
    Center,
    Outer,
}

#[derive(Debug, Args)]
pub struct RadiusArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Power-law exponent: r_n = scale * n^(-1/s).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Geometric ratio: r_n = scale * ratio^n.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Explicit radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// JSON file holding an array of radii or an object with a "values" array.
    #[arg(long)]
    pub values_file: Option<PathBuf>,
}

impl RadiusArgs {
    fn insert(&self, map: &mut Map<String, Value>) -> anyhow::Result<()> {
        put(map, "family", &self.family);
        put(map, "s", &self.s);
        put(map, "scale", &self.scale);
        put(map, "ratio", &self.ratio);
        if !self.values.is_empty() {
            map.insert("values".into(), json!(self.values));
        }
        if let Some(path) = &self.values_file {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let values = match value {
                Value::Array(_) => value,
                Value::Object(mut obj) => obj
                    .remove("values")
                    .context("values file has no \"values\" key")?,
                _ => bail!("values file must hold a JSON array"),
            };
            map.insert("values".into(), values);
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_parser = parse_u32)]
    pub d: Option<u32>,
    #[command(flatten)]
    pub radius: RadiusArgs,
    /// Horizon: last ball index.
    #[arg(long = "N", value_parser = parse_u64)]
    pub horizon: Option<u64>,
    /// Tail start: first ball index.
    #[arg(long = "M", value_parser = parse_u64)]
    pub tail_start: Option<u64>,
    /// Grid level L: 2^L cells per axis.
    #[arg(long, value_parser = parse_u32)]
    pub level: Option<u32>,
    /// Multiplicity threshold.
    #[arg(long, value_parser = parse_u32)]
    pub k: Option<u32>,
    #[arg(long, value_enum)]
    pub membership: Option<MembershipFlag>,
}

impl ExperimentArgs {
    fn insert(&self, map: &mut Map<String, Value>) -> anyhow::Result<()> {
        put(map, "d", &self.d);
        self.radius.insert(map)?;
        put(map, "N", &self.horizon);
        put(map, "M", &self.tail_start);
        put(map, "level", &self.level);
        put(map, "k", &self.k);
        put(map, "membership", &self.membership);
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Alphabet size.
    #[arg(long, value_parser = parse_u32)]
    pub b: Option<u32>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl SpaceArgs {
    fn insert(&self, map: &mut Map<String, Value>) {
        put(map, "b", &self.b);
        put(map, "rho", &self.rho);
        put(map, "gamma", &self.gamma);
    }
}

#[derive(Debug, Args)]
pub struct T0Args {
    #[command(flatten)]
    pub radius: RadiusArgs,
    /// Tail starts as `M=FROM:TO[:MULT]`, stepping by MULT (default 10).
    #[arg(long)]
    pub scan: Option<String>,
    /// Horizon multiplier: each row uses N = factor * M.
    #[arg(long, value_parser = parse_u64)]
    pub factor: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct DimensionArgs {
    #[arg(long, value_enum)]
    pub source: Option<Source>,
    /// Levels as a list `2,4,6` or a range `FROM:TO[:STEP]`.
    #[arg(long)]
    pub levels: Option<String>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct FiberArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub radius: RadiusArgs,
    #[arg(long)]
    pub t: Option<f64>,
    /// Horizons, comma separated.
    #[arg(long = "N", value_delimiter = ',', value_parser = parse_u64)]
    pub horizons: Vec<u64>,
    /// Prefix depth.
    #[arg(long, value_parser = parse_u32)]
    pub m: Option<u32>,
    /// Resolution depth.
    #[arg(long, value_parser = parse_u32)]
    pub q: Option<u32>,
    #[arg(long, value_parser = parse_u64)]
    pub samples: Option<u64>,
    #[arg(long, value_parser = parse_u64)]
    pub max_depth: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RegularityArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_parser = parse_u64)]
    pub depth: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CodingArgs {
    #[arg(long, value_parser = parse_u32)]
    pub d: Option<u32>,
    #[arg(long, value_parser = parse_u64)]
    pub pairs: Option<u64>,
    /// Random cubes for the round-trip check (default: same as pairs).
    #[arg(long, value_parser = parse_u64)]
    pub cubes: Option<u64>,
    #[arg(long, value_parser = parse_u32)]
    pub depth: Option<u32>,
}

fn put<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        map.insert(
            key.into(),
            serde_json::to_value(v).expect("flag values serialize"),
        );
    }
}

/// Unsigned integer, also written in scientific notation (`1e5`).
pub fn parse_u64(text: &str) -> Result<u64, String> {
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = text.parse().map_err(|_| format!("not a number: {text}"))?;
    if !(x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= 9_007_199_254_740_992.0) {
        return Err(format!("not a non-negative integer: {text}"));
    }
    Ok(x as u64)
}

pub fn parse_u32(text: &str) -> Result<u32, String> {
    parse_u64(text)?
        .try_into()
        .map_err(|_| format!("out of range: {text}"))
}

pub fn parse_usize(text: &str) -> Result<usize, String> {
    parse_u64(text)?
        .try_into()
        .map_err(|_| format!("out of range: {text}"))
}

/// `a,b,c` or `from:to[:step]`.
pub fn parse_levels(text: &str) -> anyhow::Result<Vec<u32>> {
    if text.contains(':') {
        let parts: Vec<u32> = text
            .split(':')
            .map(parse_u32)
            .collect::<Result<_, _>>()
            .map_err(anyhow::Error::msg)?;
        let (from, to, step) = match parts[..] {
            [a, b] => (a, b, 1),
            [a, b, c] if c > 0 => (a, b, c),
            _ => bail!("level range must be FROM:TO[:STEP], got {text}"),
        };
        return Ok((from..=to).step_by(step as usize).collect());
    }
    text.split(',')
        .map(|s| parse_u32(s.trim()).map_err(anyhow::Error::msg))
        .collect()
}

/// `M=from:to[:mult]` into the tail starts it names.
pub fn parse_scan(text: &str) -> anyhow::Result<Vec<u64>> {
    let body = text
        .strip_prefix("M=")
        .with_context(|| format!("scan must look like M=FROM:TO, got {text}"))?;
    let parts: Vec<u64> = body
        .split(':')
        .map(parse_u64)
        .collect::<Result<_, _>>()
        .map_err(anyhow::Error::msg)?;
    let (from, to, mult) = match parts[..] {
        [a, b] => (a, b, 10),
        [a, b, c] => (a, b, c),
        _ => bail!("scan must look like M=FROM:TO[:MULT], got {text}"),
    };
    if from == 0 || mult < 2 || from > to {
        bail!("scan needs 1 <= FROM <= TO and MULT >= 2, got {text}");
    }
    let mut out = Vec::new();
    let mut m = from;
    while m <= to {
        out.push(m);
        m = match m.checked_mul(mult) {
            Some(next) => next,
            None => break,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_accept_scientific_notation() {
        assert_eq!(parse_u64("100000"), Ok(100_000));
        assert_eq!(parse_u64("1e5"), Ok(100_000));
        assert_eq!(parse_u64("2.5e3"), Ok(2500));
        assert!(parse_u64("1.5").is_err());
        assert!(parse_u64("-1").is_err());
        assert!(parse_u32("1e10").is_err());
    }

    #[test]
    fn level_lists_and_ranges() {
        assert_eq!(parse_levels("2,4,6").unwrap(), vec![2, 4, 6]);
        assert_eq!(parse_levels("4:14:2").unwrap(), vec![4, 6, 8, 10, 12, 14]);
        assert_eq!(parse_levels("1:3").unwrap(), vec![1, 2, 3]);
        assert!(parse_levels("1:3:0").is_err());
    }

    #[test]
    fn scans_step_by_decades() {
        assert_eq!(
            parse_scan("M=1e3:1e5").unwrap(),
            vec![1000, 10_000, 100_000]
        );
        assert_eq!(parse_scan("M=2:16:2").unwrap(), vec![2, 4, 8, 16]);
        assert!(parse_scan("1e3:1e5").is_err());
        assert!(parse_scan("M=0:10").is_err());
    }
}
