//! Fibers of the limsup set over the product splitting `Σ = Σ_I × Σ_J`.
//!
//! For a base point `x₁ ∈ Σ_I`, the fiber hit set collects the `J`-parts of
//! the ball centres `ω_n` whose `I`-ball `B(ω_{n,I}, r_n)` contains `x₁`.
//! When `Σ_n μ_I(B(x₁, r_n))` diverges those `J`-parts become dense, which is
//! what makes the fiber of the limsup set residual. At finite scale "dense"
//! means: every depth-`q` cylinder of `Σ_J` contains a hit.
//!
//! Ball centres are uniform symbol sequences in `Σ`, drawn from the
//! counter-based generator at `(seed, n, position)`. Base points are uniform in
//! `Σ_I`; their first `m` symbols are the sampled prefix (enumerated
//! exhaustively when `b^m ≤ samples`) and deeper symbols are drawn at
//! `(seed, prefix_id, rank)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{least_squares, DimensionEstimate};
use crate::error::{Error, Result};
use crate::radius::{CompensatedSum, RadiusSpec};
use crate::rng::{CounterRng, Stream};
use crate::symbolic::{ball_depth, index_set_for, IndexSet, SpaceParams, Word};

fn default_max_depth() -> u64 {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberConfig {
    #[serde(flatten)]
    pub params: SpaceParams,
    pub t: f64,
    #[serde(flatten)]
    pub spec: RadiusSpec,
    #[serde(rename = "N")]
    pub horizon: u64,
    /// `m`: leading `I`-positions that identify a sampled prefix.
    #[serde(rename = "m")]
    pub prefix_depth: u32,
    /// `q`: leading `J`-positions resolved by the density test.
    #[serde(rename = "q")]
    pub resolution_depth: u32,
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    /// Balls whose `I`-cylinder fixes more positions than this are undecidable.
    #[serde(default = "default_max_depth")]
    pub max_depth: u64,
}

impl FiberConfig {
    /// Matched radii `r_n = n^{-1/t}`, so the expected hit sum grows like `log N`.
    pub fn matched(
        params: SpaceParams,
        t: f64,
        horizon: u64,
        m: u32,
        q: u32,
        samples: u64,
        seed: u64,
    ) -> Result<Self> {
        let config = Self {
            params,
            t,
            spec: RadiusSpec::power_law(t, 1.0)?,
            horizon,
            prefix_depth: m,
            resolution_depth: q,
            samples,
            seed,
            max_depth: default_max_depth(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.spec.validate()?;
        index_set_for(self.t, &self.params)?;
        if self.prefix_depth == 0 || self.resolution_depth == 0 {
            return Err(Error::InvalidConfig(
                "prefix depth m and resolution depth q must be >= 1".into(),
            ));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        if (self.params.b as f64).powi(self.resolution_depth as i32) > (1u64 << 32) as f64 {
            return Err(Error::InvalidConfig(
                "b^q exceeds 2^32 resolution cylinders".into(),
            ));
        }
        if let Some(len) = self.spec.len() {
            if self.horizon > len {
                return Err(Error::IndexOutOfRange {
                    index: self.horizon,
                    len: len as usize,
                });
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> IndexSet {
        index_set_for(self.t, &self.params).expect("validated t")
    }

    /// Prefix count and whether they enumerate all `b^m` prefixes.
    pub fn prefix_plan(&self) -> (u64, bool) {
        let all = (self.params.b as f64).powi(self.prefix_depth as i32);
        if all <= self.samples as f64 {
            (all as u64, true)
        } else {
            (self.samples, false)
        }
    }
}

/// `(I-part, J-part)` of a finite prefix: symbols at positions in `I` and in
/// its complement, each in increasing position order.
pub fn split_point(word: &Word, positions: &IndexSet) -> (Vec<u32>, Vec<u32>) {
    let mut i_part = Vec::new();
    let mut j_part = Vec::new();
    for (idx, &s) in word.symbols().iter().enumerate() {
        if positions.contains(idx as u64 + 1) {
            i_part.push(s);
        } else {
            j_part.push(s);
        }
    }
    (i_part, j_part)
}

/// Inverse of [`split_point`].
pub fn merge_point(
    i_part: &[u32],
    j_part: &[u32],
    positions: &IndexSet,
    alphabet: u32,
) -> Result<Word> {
    let depth = i_part.len() + j_part.len();
    let mut i_iter = i_part.iter();
    let mut j_iter = j_part.iter();
    let mut symbols = Vec::with_capacity(depth);
    for pos in 1..=depth as u64 {
        let next = if positions.contains(pos) {
            i_iter.next()
        } else {
            j_iter.next()
        };
        match next {
            Some(&s) => symbols.push(s),
            None => {
                return Err(Error::InsufficientDepth(format!(
                    "parts of length {} and {} do not tile positions 1..={depth}",
                    i_part.len(),
                    j_part.len()
                )))
            }
        }
    }
    Word::new(symbols, alphabet)
}

/// Symbols `1..=depth` of the ball centre `ω_n`.
pub fn ball_center_word(seed: u64, n: u64, depth: u64, alphabet: u32) -> Word {
    let rng = CounterRng::new(seed);
    let symbols = (1..=depth)
        .map(|i| rng.symbol(Stream::SymbolCenter, n, i as u32, alphabet))
        .collect();
    Word::new(symbols, alphabet).expect("generated symbols lie in the alphabet")
}

/// A base point `x₁ ∈ Σ_I`, materialized to a finite number of `I`-ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasePoint {
    pub id: u64,
    /// Symbol at `I`-rank `k` is `symbols[k - 1]`.
    pub symbols: Vec<u32>,
}

impl BasePoint {
    /// The sampled prefix: the first `m` symbols.
    pub fn prefix(&self, m: u32) -> &[u32] {
        &self.symbols[..(m as usize).min(self.symbols.len())]
    }
}

/// Base point number `id`: exhaustive prefixes spell `id` in base `b`, most
/// significant digit first; every other symbol is drawn at `(seed, id, rank)`.
pub fn base_point(config: &FiberConfig, id: u64, depth: u64) -> BasePoint {
    let rng = CounterRng::new(config.seed);
    let (_, exhaustive) = config.prefix_plan();
    let b = config.params.b as u64;
    let m = config.prefix_depth as u64;
    let symbols = (1..=depth)
        .map(|rank| {
            if exhaustive && rank <= m {
                (id / b.pow((m - rank) as u32) % b) as u32 + 1
            } else {
                rng.symbol(Stream::BasePoint, id, rank as u32, config.params.b)
            }
        })
        .collect();
    BasePoint { id, symbols }
}

/// Per-ball data shared by every base point.
struct BallTable {
    /// `k_n`: `I`-positions fixed by the ball `B(·, r_n)`.
    fixed: Vec<u64>,
    /// `i_1, i_2, …` up to the deepest decidable rank.
    i_positions: Vec<u64>,
    /// First `q` positions of `J`.
    j_positions: Vec<u64>,
    expected_hit_sum: f64,
}

fn fixed_positions(r: f64, positions: &IndexSet, params: &SpaceParams) -> u64 {
    if r > params.diameter() {
        0
    } else {
        ball_depth(r, positions, params).expect("radius in (0, diameter]")
    }
}

impl BallTable {
    fn build(config: &FiberConfig) -> Self {
        let positions = config.positions();
        let fixed: Vec<u64> = (1..=config.horizon)
            .map(|n| fixed_positions(config.spec.radius_unchecked(n), &positions, &config.params))
            .collect();
        let deepest = fixed
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .min(config.max_depth);
        let depth = deepest.max(config.prefix_depth as u64);
        let mut expected = CompensatedSum::default();
        for &k in &fixed {
            expected.add((config.params.b as f64).powf(-(k as f64)));
        }
        Self {
            fixed,
            i_positions: positions.iter().take(depth as usize).collect(),
            j_positions: positions
                .complement_iter()
                .take(config.resolution_depth as usize)
                .collect(),
            expected_hit_sum: expected.value(),
        }
    }
}

/// Hits of one base point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberHits {
    /// Ball indices `n` with `x₁ ∈ B(ω_{n,I}, r_n)`, increasing.
    pub balls: Vec<u64>,
    /// `J`-parts (first `q` positions of `J`) of the hit centres.
    pub j_parts: Vec<Vec<u32>>,
    /// Balls finer than the materialized depth, counted as non-hits.
    pub insufficient_depth: u64,
}

fn collect_hits(config: &FiberConfig, table: &BallTable, point: &BasePoint) -> FiberHits {
    let rng = CounterRng::new(config.seed);
    let b = config.params.b;
    let mut hits = FiberHits {
        balls: Vec::new(),
        j_parts: Vec::new(),
        insufficient_depth: 0,
    };
    for (idx, &k) in table.fixed.iter().enumerate() {
        let n = idx as u64 + 1;
        if k > point.symbols.len() as u64 {
            hits.insufficient_depth += 1;
            continue;
        }
        let inside = table.i_positions[..k as usize]
            .iter()
            .zip(&point.symbols)
            .all(|(&i, &s)| rng.symbol(Stream::SymbolCenter, n, i as u32, b) == s);
        if inside {
            hits.balls.push(n);
            hits.j_parts.push(
                table
                    .j_positions
                    .iter()
                    .map(|&j| rng.symbol(Stream::SymbolCenter, n, j as u32, b))
                    .collect(),
            );
        }
    }
    hits
}

/// Fiber hits above a base point for balls `1..=N`.
pub fn fiber_hits(point: &BasePoint, config: &FiberConfig) -> Result<FiberHits> {
    config.validate()?;
    Ok(collect_hits(config, &BallTable::build(config), point))
}

/// Whether the hit `J`-parts meet every one of the `b^q` depth-`q` cylinders.
pub fn is_dense_at_resolution(hits: &[Vec<u32>], q: u32, alphabet: u32) -> Result<bool> {
    if q == 0 {
        return Err(Error::InvalidConfig(
            "resolution depth q must be >= 1".into(),
        ));
    }
    let cells = (alphabet as usize).pow(q);
    let mut seen = vec![false; cells];
    let mut remaining = cells;
    for part in hits {
        if part.len() < q as usize {
            return Err(Error::InsufficientDepth(format!(
                "hit carries {} J-symbols, resolution needs {q}",
                part.len()
            )));
        }
        let mut cell = 0usize;
        for &s in &part[..q as usize] {
            if s == 0 || s > alphabet {
                return Err(Error::InvalidSymbol {
                    symbol: s,
                    alphabet,
                });
            }
            cell = cell * alphabet as usize + (s - 1) as usize;
        }
        if !seen[cell] {
            seen[cell] = true;
            remaining -= 1;
        }
    }
    Ok(remaining == 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixResult {
    pub prefix_id: u64,
    pub prefix: Vec<u32>,
    pub expected_hit_sum: f64,
    pub observed_hits: u64,
    pub dense: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberReport {
    pub prefixes: Vec<PrefixResult>,
    /// `Σ_{n≤N} μ_I(B(x₁, r_n))`, the same for every base point.
    pub expected_hit_sum: f64,
    pub dense_fraction: f64,
    pub exhaustive: bool,
    pub insufficient_depth_warnings: u64,
}

impl FiberReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "prefix_id,expected_hit_sum,observed_hits,dense")?;
        for p in &self.prefixes {
            writeln!(
                out,
                "{},{},{},{}",
                p.prefix_id, p.expected_hit_sum, p.observed_hits, p.dense
            )?;
        }
        Ok(())
    }
}

/// Runs every base point and reports the fraction with dense fibers.
pub fn dense_fiber_fraction(config: &FiberConfig) -> Result<FiberReport> {
    config.validate()?;
    let table = BallTable::build(config);
    let (count, exhaustive) = config.prefix_plan();
    let depth = table.i_positions.len() as u64;
    let prefixes: Vec<(PrefixResult, u64)> = (0..count)
        .into_par_iter()
        .map(|id| {
            let point = base_point(config, id, depth);
            let hits = collect_hits(config, &table, &point);
            let dense =
                is_dense_at_resolution(&hits.j_parts, config.resolution_depth, config.params.b)
                    .expect("hits carry q J-symbols");
            (
                PrefixResult {
                    prefix_id: id,
                    prefix: point.prefix(config.prefix_depth).to_vec(),
                    expected_hit_sum: table.expected_hit_sum,
                    observed_hits: hits.balls.len() as u64,
                    dense,
                },
                hits.insufficient_depth,
            )
        })
        .collect();
    let warnings = prefixes.iter().map(|(_, w)| w).sum();
    let prefixes: Vec<PrefixResult> = prefixes.into_iter().map(|(p, _)| p).collect();
    let dense = prefixes.iter().filter(|p| p.dense).count();
    Ok(FiberReport {
        dense_fraction: dense as f64 / prefixes.len() as f64,
        expected_hit_sum: table.expected_hit_sum,
        prefixes,
        exhaustive,
        insufficient_depth_warnings: warnings,
    })
}

/// Box-count slope of the dense prefixes viewed as cells of `Σ_I`.
///
/// At prefix depth `m' ≤ m` the count is the number of distinct `m'`-prefixes
/// with a dense extension, and the scale is `γρ^{i_{m'}}`, the largest radius
/// whose ball is a depth-`m'` cylinder. Returns the estimate together with the
/// slope the same fit gives when every prefix is dense.
pub fn dense_prefix_dimension(
    report: &FiberReport,
    config: &FiberConfig,
) -> Result<(DimensionEstimate, f64)> {
    if !report.exhaustive {
        return Err(Error::InvalidConfig(
            "prefix dimension needs exhaustively enumerated prefixes".into(),
        ));
    }
    let positions = config.positions();
    let m = config.prefix_depth;
    let levels: Vec<u32> = (1..=m).collect();
    let xs: Vec<f64> = levels
        .iter()
        .map(|&l| -config.params.scale_at(positions.nth(l as u64)).ln())
        .collect();
    let mut ys = Vec::with_capacity(levels.len());
    for &l in &levels {
        let mut seen: Vec<&[u32]> = report
            .prefixes
            .iter()
            .filter(|p| p.dense)
            .map(|p| &p.prefix[..l as usize])
            .collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.is_empty() {
            return Err(Error::Domain("no dense prefixes".into()));
        }
        ys.push((seen.len() as f64).ln());
    }
    let full: Vec<f64> = levels
        .iter()
        .map(|&l| l as f64 * (config.params.b as f64).ln())
        .collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys)?;
    let (reference, _, _) = least_squares(&xs, &full)?;
    Ok((
        DimensionEstimate {
            slope,
            intercept,
            r_squared,
            levels,
        },
        reference,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::distance;

    fn config(spec: RadiusSpec, horizon: u64, seed: u64) -> FiberConfig {
        FiberConfig {
            params: SpaceParams::binary(),
            t: 0.5,
            spec,
            horizon,
            prefix_depth: 6,
            resolution_depth: 2,
            samples: 200,
            seed,
            max_depth: 4096,
        }
    }

    #[test]
    fn split_examples() {
        let w = Word::new(vec![1, 2, 2, 1, 1, 2], 2).unwrap();
        let (i, j) = split_point(&w, &IndexSet::Full);
        assert_eq!(i, w.symbols());
        assert!(j.is_empty());
        let evens = index_set_for(0.5, &SpaceParams::binary()).unwrap();
        let (i, j) = split_point(&w, &evens);
        assert_eq!(i, vec![2, 1, 2]);
        assert_eq!(j, vec![1, 2, 1]);
        assert_eq!(merge_point(&i, &j, &evens, 2).unwrap(), w);
        assert!(merge_point(&i, &j[..1], &evens, 2).is_err());
    }

    #[test]
    fn all_covering_radii_hit_everything() {
        let c = config(RadiusSpec::explicit(vec![0.9; 40]).unwrap(), 40, 1);
        let point = base_point(&c, 3, 6);
        let hits = fiber_hits(&point, &c).unwrap();
        assert_eq!(hits.balls, (1..=40).collect::<Vec<_>>());
        let report = dense_fiber_fraction(&c).unwrap();
        assert_eq!(report.dense_fraction, 1.0);
        assert_eq!(report.expected_hit_sum, 40.0);
    }

    #[test]
    fn no_balls_no_hits() {
        let c = config(RadiusSpec::power_law(0.5, 1.0).unwrap(), 0, 1);
        let point = base_point(&c, 0, 6);
        assert!(fiber_hits(&point, &c).unwrap().j_parts.is_empty());
        let report = dense_fiber_fraction(&c).unwrap();
        assert_eq!(report.dense_fraction, 0.0);
        assert_eq!(report.prefixes.len(), 64);
        assert!(report.exhaustive);
    }

    // Oracle: evaluate d_I(x₁, ω_n) < r_n directly on materialized words.
    #[test]
    fn hits_match_direct_distance_check() {
        let params = SpaceParams::binary();
        let evens = index_set_for(0.5, &params).unwrap();
        let c = config(RadiusSpec::explicit(vec![0.3, 0.2, 0.1]).unwrap(), 3, 11);
        let depth = 30u64;
        for id in 0..64 {
            let point = base_point(&c, id, 15);
            let hits = fiber_hits(&point, &c).unwrap();
            let j_fill = vec![1; 15];
            let x = merge_point(&point.symbols, &j_fill, &evens, 2).unwrap();
            let expected: Vec<u64> = (1..=3)
                .filter(|&n| {
                    let omega = ball_center_word(11, n, depth, 2);
                    let r = c.spec.radius_at(n).unwrap();
                    distance(&x, &omega, &evens, &params).unwrap().value() < r
                })
                .collect();
            assert_eq!(hits.balls, expected, "prefix {id}");
            for (n, jp) in hits.balls.iter().zip(&hits.j_parts) {
                let omega = ball_center_word(11, *n, depth, 2);
                assert_eq!(jp, &vec![omega.at(1).unwrap(), omega.at(3).unwrap()]);
            }
        }
    }

    #[test]
    fn density_examples() {
        assert!(!is_dense_at_resolution(&[], 2, 2).unwrap());
        let all = vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]];
        assert!(is_dense_at_resolution(&all, 2, 2).unwrap());
        assert!(!is_dense_at_resolution(&all[..3], 2, 2).unwrap());
        assert!(is_dense_at_resolution(&[vec![1]], 2, 2).is_err());
    }

    #[test]
    fn exhaustive_prefixes_enumerate_base_b() {
        let c = config(RadiusSpec::power_law(0.5, 1.0).unwrap(), 10, 4);
        let p = base_point(&c, 0b101101, 8);
        assert_eq!(p.prefix(6), &[2, 1, 2, 2, 1, 2]);
        let mut sampled = c.clone();
        sampled.prefix_depth = 10;
        assert_eq!(sampled.prefix_plan(), (200, false));
    }

    #[test]
    fn expected_hit_sum_counts_dyadic_blocks() {
        // I = evens, r_n = n^{-2}: k_n = ⌊log2 n⌋, so each block [2^j, 2^{j+1}) adds 1.
        let c = config(RadiusSpec::power_law(0.5, 1.0).unwrap(), (1 << 12) - 1, 0);
        let report = dense_fiber_fraction(&c).unwrap();
        assert!(
            (report.expected_hit_sum - 12.0).abs() < 1e-12,
            "{}",
            report.expected_hit_sum
        );
    }
}
