//! The symbolic space `Σ = {1,…,b}^N` and its coordinate subspaces `Σ_I`.
//!
//! Points are infinite symbol sequences; only finite prefixes are ever stored,
//! and every prefix carries its depth. The metric on `Σ_I` is
//! `γ ρ^{i}` where `i` is the first position in `I` at which two sequences
//! differ, and the measure is the uniform product measure, so every open ball
//! is a cylinder of measure `b^{-k}` for the right `k`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alphabet size, contraction ratio and scale of the symbolic metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub b: u32,
    pub rho: f64,
    pub gamma: f64,
}

impl SpaceParams {
    pub fn new(b: u32, rho: f64, gamma: f64) -> Result<Self> {
        let params = Self { b, rho, gamma };
        params.validate()?;
        Ok(params)
    }

    /// The binary full shift, `b = 2`, `ρ = 1/2`, `γ = 1`.
    pub fn binary() -> Self {
        Self {
            b: 2,
            rho: 0.5,
            gamma: 1.0,
        }
    }

    /// Coding space of the middle-thirds Cantor set.
    pub fn middle_thirds() -> Self {
        Self {
            b: 2,
            rho: 1.0 / 3.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::InvalidConfig(format!(
                "alphabet size must be >= 2, got {}",
                self.b
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `α = log b / (−log ρ)`, the regularity exponent of the full shift.
    pub fn alpha(&self) -> f64 {
        (self.b as f64).ln() / -self.rho.ln()
    }

    /// Diameter of the whole space, `γρ`.
    pub fn diameter(&self) -> f64 {
        self.gamma * self.rho
    }

    /// `γ ρ^i`: the distance between sequences whose first difference is at `i`.
    #[inline]
    pub fn scale_at(&self, position: u64) -> f64 {
        self.gamma * self.rho.powi(position as i32)
    }

    /// Largest `i ≥ 0` with `γρ^i ≥ r`.
    pub fn last_scale_at_least(&self, r: f64) -> u64 {
        let guess = ((r / self.gamma).ln() / self.rho.ln()).floor();
        let mut i = if guess.is_finite() && guess > 0.0 {
            guess as u64
        } else {
            0
        };
        while i > 0 && self.scale_at(i) < r {
            i -= 1;
        }
        while self.scale_at(i + 1) >= r {
            i += 1;
        }
        i
    }
}

/// `α` of a parameter set.
pub fn alpha_of(params: &SpaceParams) -> f64 {
    params.alpha()
}

/// A set of coordinate positions `I ⊆ {1, 2, …}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndexSet {
    /// Every position.
    Full,
    /// `{⌊αk/t⌋ : k ≥ 1}`.
    Floor { alpha: f64, t: f64 },
}

/// Floor that treats values within rounding noise of an integer as that integer,
/// so `⌊2k/1⌋` is not lost to an `α` computed as `1.9999999999999998`.
fn snapped_floor(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 64.0 * f64::EPSILON * x.abs().max(1.0) {
        nearest as u64
    } else {
        x.floor() as u64
    }
}

impl IndexSet {
    /// The `k`-th element, `k ≥ 1`.
    #[inline]
    pub fn nth(&self, k: u64) -> u64 {
        debug_assert!(k >= 1);
        match *self {
            IndexSet::Full => k,
            IndexSet::Floor { alpha, t } => snapped_floor(alpha * k as f64 / t),
        }
    }

    fn spacing(&self) -> f64 {
        match *self {
            IndexSet::Full => 1.0,
            IndexSet::Floor { alpha, t } => alpha / t,
        }
    }

    pub fn contains(&self, position: u64) -> bool {
        if position == 0 {
            return false;
        }
        let k = (position as f64 / self.spacing()).ceil().max(1.0) as u64;
        (k.saturating_sub(1).max(1)..=k + 1).any(|k| self.nth(k) == position)
    }

    /// `|I ∩ [1, n]|`.
    pub fn count_up_to(&self, n: u64) -> u64 {
        let mut k = ((n + 1) as f64 / self.spacing()).floor() as u64;
        while self.nth(k + 1) <= n {
            k += 1;
        }
        while k > 0 && self.nth(k) > n {
            k -= 1;
        }
        k
    }

    /// Elements of `I` in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (1..).map(move |k| self.nth(k))
    }

    /// Elements of the complement `J = N \ I` in increasing order.
    pub fn complement_iter(&self) -> impl Iterator<Item = u64> + '_ {
        (1..).filter(move |&i| !self.contains(i))
    }
}

/// Builds `I = {⌊αk/t⌋ : k ≥ 1}` for `0 < t ≤ α`.
pub fn index_set_for(t: f64, params: &SpaceParams) -> Result<IndexSet> {
    params.validate()?;
    let alpha = params.alpha();
    if t.is_nan() || t <= 0.0 || t > alpha * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "t must lie in (0, alpha = {alpha}], got {t}"
        )));
    }
    Ok(IndexSet::Floor {
        alpha,
        t: t.min(alpha),
    })
}

/// A finite prefix `σ_1 … σ_depth` of a point of `Σ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<u32>,
}

impl Word {
    pub fn new(symbols: Vec<u32>, alphabet: u32) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s == 0 || s > alphabet) {
            return Err(Error::InvalidSymbol {
                symbol: bad,
                alphabet,
            });
        }
        Ok(Self { symbols })
    }

    pub fn depth(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    /// Symbol at 1-based `position`.
    pub fn at(&self, position: u64) -> Result<u32> {
        position
            .checked_sub(1)
            .and_then(|i| self.symbols.get(i as usize))
            .copied()
            .ok_or_else(|| {
                Error::InsufficientDepth(format!(
                    "position {position} beyond stored depth {}",
                    self.depth()
                ))
            })
    }
}

/// Result of comparing two finite prefixes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    /// The prefixes differ at a position of `I`; the distance is exact.
    Exact { value: f64, position: u64 },
    /// No difference on the stored positions; the true distance is at most
    /// `γρ^{i}` for the first position of `I` beyond `depth`, possibly zero.
    EqualAtDepth { depth: usize },
}

impl Distance {
    pub fn value(&self) -> f64 {
        match *self {
            Distance::Exact { value, .. } => value,
            Distance::EqualAtDepth { .. } => 0.0,
        }
    }

    pub fn is_equal_at_depth(&self) -> bool {
        matches!(self, Distance::EqualAtDepth { .. })
    }
}

/// `d_I(a, b) = γ ρ^{min{i ∈ I : a_i ≠ b_i}}`.
pub fn distance(
    a: &Word,
    b: &Word,
    positions: &IndexSet,
    params: &SpaceParams,
) -> Result<Distance> {
    if a.depth() != b.depth() {
        return Err(Error::InsufficientDepth(format!(
            "cannot compare prefixes of depth {} and {}",
            a.depth(),
            b.depth()
        )));
    }
    let depth = a.depth() as u64;
    for i in positions.iter().take_while(|&i| i <= depth) {
        let idx = (i - 1) as usize;
        if a.symbols[idx] != b.symbols[idx] {
            return Ok(Distance::Exact {
                value: params.scale_at(i),
                position: i,
            });
        }
    }
    Ok(Distance::EqualAtDepth { depth: a.depth() })
}

/// Measure `b^{-k}` of a cylinder fixing `k` symbols, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    pub base: u32,
    pub fixed: u64,
}

impl CylinderMeasure {
    pub fn to_f64(&self) -> f64 {
        (self.base as f64).powf(-(self.fixed as f64))
    }

    pub fn to_rational(&self) -> BigRational {
        let denom = num_traits::pow(BigInt::from(self.base), self.fixed as usize);
        BigRational::new(BigInt::one(), denom)
    }
}

/// A cylinder of `Σ_I`: the first `k` positions of `I` carry fixed symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderWord {
    pub params: SpaceParams,
    pub positions: IndexSet,
    symbols: Vec<u32>,
}

impl CylinderWord {
    pub fn new(params: SpaceParams, positions: IndexSet, symbols: Vec<u32>) -> Result<Self> {
        params.validate()?;
        Word::new(symbols.clone(), params.b)?;
        Ok(Self {
            params,
            positions,
            symbols,
        })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn depth(&self) -> usize {
        self.symbols.len()
    }

    /// The positions `i_1 < … < i_k` this cylinder constrains.
    pub fn constrained_positions(&self) -> Vec<u64> {
        self.positions.iter().take(self.symbols.len()).collect()
    }

    pub fn measure(&self) -> CylinderMeasure {
        CylinderMeasure {
            base: self.params.b,
            fixed: self.symbols.len() as u64,
        }
    }

    /// Whether a prefix of `Σ` lies in the cylinder.
    pub fn contains(&self, word: &Word) -> Result<bool> {
        for (&i, &s) in self.constrained_positions().iter().zip(&self.symbols) {
            if word.at(i)? != s {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Number of positions `i ∈ I` with `γρ^i ≥ r`, i.e. the `k` with
/// `γρ^{i_{k+1}} < r ≤ γρ^{i_k}`. `k = 0` means the ball is the whole space.
pub fn ball_depth(r: f64, positions: &IndexSet, params: &SpaceParams) -> Result<u64> {
    if !(r > 0.0 && r <= params.diameter()) {
        return Err(Error::Domain(format!(
            "radius must lie in (0, gamma*rho = {}], got {r}",
            params.diameter()
        )));
    }
    Ok(positions.count_up_to(params.last_scale_at_least(r)))
}

/// Measure of the open ball `B(σ, r)` in `Σ_I`; the same for every centre.
pub fn ball_measure(r: f64, positions: &IndexSet, params: &SpaceParams) -> Result<CylinderMeasure> {
    Ok(CylinderMeasure {
        base: params.b,
        fixed: ball_depth(r, positions, params)?,
    })
}

/// One radius of a regularity sweep. `r = γ ρ^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularitySample {
    pub exponent: f64,
    pub r: f64,
    pub fixed: u64,
    pub measure: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub t: f64,
    pub depth_max: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max(max_ratio, 1 / min_ratio)`.
    pub constant: f64,
    pub samples: Vec<RegularitySample>,
}

/// Sweeps `r = γρ^m` for `1 ≤ m ≤ depth_max` and the geometric midpoints
/// `γρ^{m+1/2}`, recording `μ(B(·, r)) / r^t`.
///
/// The ratio is evaluated as `exp(ln ρ · (αk − t·m) − t ln γ)`, which is the
/// same number as `b^{-k} / r^t` but depends only on `αk − tm`, so equal
/// exponents give bitwise equal ratios at every depth.
pub fn regularity_sweep(
    positions: &IndexSet,
    t: f64,
    params: &SpaceParams,
    depth_max: u64,
) -> Result<RegularityReport> {
    params.validate()?;
    if depth_max < 2 {
        return Err(Error::Domain(format!(
            "depth_max must be >= 2, got {depth_max}"
        )));
    }
    if let IndexSet::Floor { t: built_for, .. } = positions {
        if (built_for - t).abs() > 1e-12 * t.abs() {
            return Err(Error::Domain(format!(
                "index set was built for t = {built_for}, swept with t = {t}"
            )));
        }
    }
    let alpha = params.alpha();
    let ln_rho = params.rho.ln();
    let ln_gamma = params.gamma.ln();
    let half = params.rho.sqrt();

    let mut samples = Vec::with_capacity(2 * depth_max as usize);
    for m in 1..=depth_max {
        let mut push = |exponent: f64, r: f64| -> Result<()> {
            let fixed = ball_depth(r, positions, params)?;
            let ratio = (ln_rho * (alpha * fixed as f64 - t * exponent) - t * ln_gamma).exp();
            samples.push(RegularitySample {
                exponent,
                r,
                fixed,
                measure: CylinderMeasure {
                    base: params.b,
                    fixed,
                }
                .to_f64(),
                ratio,
            });
            Ok(())
        };
        let r = params.scale_at(m);
        push(m as f64, r)?;
        if m < depth_max {
            push(m as f64 + 0.5, r * half)?;
        }
    }
    let min_ratio = samples
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(RegularityReport {
        t,
        depth_max,
        min_ratio,
        max_ratio,
        constant: max_ratio.max(1.0 / min_ratio),
        samples,
    })
}

/// `Σ` over all `b^k` depth-`k` cylinders of their measures, exactly.
/// Enumerates every cylinder, so keep `b^k` modest.
pub fn total_cylinder_mass(params: &SpaceParams, depth: u64) -> BigRational {
    let count = (params.b as u64).pow(depth as u32);
    let each = CylinderMeasure {
        base: params.b,
        fixed: depth,
    }
    .to_rational();
    let mut total = BigRational::zero();
    for _ in 0..count {
        total += &each;
    }
    total
}
