//! The coding map `π : Σ → [0,1]^d` through nested closed dyadic cubes.
//!
//! With `b = 2^d`, `ρ = 1/2` and `γ = 2√d`, symbol `q` at depth `n` selects
//! one of the `2^d` children of the depth-`(n-1)` cube, and `π(σ)` is the
//! single point in the intersection of the whole nested chain. Child `q` sits
//! at offset bit `j` of `q - 1` in dimension `j`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{CylinderWord, IndexSet, SpaceParams};

/// Closed cube `∏_j [c_j 2^{-n}, (c_j + 1) 2^{-n}]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub d: u32,
    pub level: u32,
    pub coords: Vec<u64>,
}

pub const MAX_LEVEL: u32 = 62;

impl DyadicCube {
    pub fn new(d: u32, level: u32, coords: Vec<u64>) -> Result<Self> {
        if d == 0 || coords.len() != d as usize {
            return Err(Error::InvalidConfig(format!(
                "cube needs {d} >= 1 coordinates, got {}",
                coords.len()
            )));
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "level {level} above {MAX_LEVEL}"
            )));
        }
        if let Some(c) = coords.iter().find(|&&c| c >> level != 0) {
            return Err(Error::InvalidConfig(format!(
                "coordinate {c} outside [0, 2^{level})"
            )));
        }
        Ok(Self { d, level, coords })
    }

    pub fn unit(d: u32) -> Self {
        Self {
            d,
            level: 0,
            coords: vec![0; d as usize],
        }
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Euclidean diameter `√d · 2^{-level}`.
    pub fn diameter(&self) -> f64 {
        (self.d as f64).sqrt() * self.side()
    }

    pub fn lower_corner(&self) -> Vec<f64> {
        let side = self.side();
        self.coords.iter().map(|&c| c as f64 * side).collect()
    }

    /// Lebesgue volume `2^{-d·level}`, exactly.
    pub fn volume(&self) -> BigRational {
        let denom = num_traits::pow(BigInt::from(2), (self.d * self.level) as usize);
        BigRational::new(BigInt::one(), denom)
    }

    /// Child selected by symbol `q ∈ 1..=2^d`.
    pub fn child(&self, q: u32) -> Result<DyadicCube> {
        let offsets = subcube_enumeration(q, self.d)?;
        Ok(DyadicCube {
            d: self.d,
            level: self.level + 1,
            coords: self
                .coords
                .iter()
                .zip(offsets)
                .map(|(&c, o)| 2 * c + o as u64)
                .collect(),
        })
    }

    /// Whether `other` is a subcube of `self` (or equal to it).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.d == self.d
            && other.level >= self.level
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(&c, &o)| o >> (other.level - self.level) == c)
    }

    /// Euclidean distance from a point to the cube (zero inside).
    pub fn distance_to(&self, point: &[f64]) -> f64 {
        let side = self.side();
        self.coords
            .iter()
            .zip(point)
            .map(|(&c, &x)| {
                let lo = c as f64 * side;
                let hi = lo + side;
                let gap = if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                };
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Symbol space that codes `[0,1]^d`: `b = 2^d`, `ρ = 1/2`, `γ = 2√d`.
pub fn coding_params(d: u32) -> SpaceParams {
    SpaceParams {
        b: 1 << d,
        rho: 0.5,
        gamma: 2.0 * (d as f64).sqrt(),
    }
}

fn check_coding_params(params: &SpaceParams, d: u32) -> Result<()> {
    let expected = coding_params(d);
    let gamma_ok = (params.gamma - expected.gamma).abs() <= 1e-12 * expected.gamma;
    if params.b != expected.b || params.rho != 0.5 || !gamma_ok {
        return Err(Error::ParameterMismatch(format!(
            "dyadic coding in dimension {d} needs b = {}, rho = 0.5, gamma = {}; got b = {}, rho = {}, gamma = {}",
            expected.b, expected.gamma, params.b, params.rho, params.gamma
        )));
    }
    Ok(())
}

/// Offset in `{0,1}^d` of child `q`: bit `j` of `q - 1` for dimension `j`.
pub fn subcube_enumeration(q: u32, d: u32) -> Result<Vec<u8>> {
    if d == 0 || d > 16 {
        return Err(Error::InvalidConfig(format!(
            "dimension {d} outside 1..=16"
        )));
    }
    if q == 0 || q > 1 << d {
        return Err(Error::InvalidSymbol {
            symbol: q,
            alphabet: 1 << d,
        });
    }
    Ok((0..d).map(|j| ((q - 1) >> j & 1) as u8).collect())
}

/// Inverse of [`subcube_enumeration`].
fn symbol_for_offsets(offsets: impl Iterator<Item = u64>) -> u32 {
    offsets
        .enumerate()
        .map(|(j, o)| (o as u32) << j)
        .sum::<u32>()
        + 1
}

/// `D_n(σ)` for the symbols of a cylinder over all positions.
pub fn encode_cube(word: &CylinderWord, d: u32) -> Result<DyadicCube> {
    check_coding_params(&word.params, d)?;
    if word.positions != IndexSet::Full {
        return Err(Error::ParameterMismatch(
            "dyadic coding needs a cylinder over the full index set".into(),
        ));
    }
    encode_symbols(word.symbols(), d)
}

/// `D_n` for a raw symbol prefix of length `n`.
pub fn encode_symbols(symbols: &[u32], d: u32) -> Result<DyadicCube> {
    if symbols.len() > MAX_LEVEL as usize {
        return Err(Error::InvalidConfig(format!(
            "prefix depth {} above {MAX_LEVEL}",
            symbols.len()
        )));
    }
    symbols
        .iter()
        .try_fold(DyadicCube::unit(d), |cube, &q| cube.child(q))
}

/// Approximation of `π(σ)` from a depth-`n` prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodedPoint {
    /// Lower corner of `D_n(σ)`, an exact dyadic rational.
    pub lower: Vec<f64>,
    /// `√d · 2^{-n}`; the true `π(σ)` lies within this Euclidean distance.
    pub error_radius: f64,
}

pub fn pi_point(word: &CylinderWord, d: u32) -> Result<CodedPoint> {
    let cube = encode_cube(word, d)?;
    Ok(CodedPoint {
        lower: cube.lower_corner(),
        error_radius: cube.diameter(),
    })
}

/// The cylinder whose image under `π` is exactly `cube`.
///
/// As a subset of `Σ` it is the closed ball of radius `γρ^{n+1} = √d 2^{-n}`,
/// which is also the cube's diameter.
pub fn preimage_ball_check(cube: &DyadicCube) -> CylinderWord {
    let n = cube.level;
    let symbols = (1..=n)
        .map(|depth| symbol_for_offsets(cube.coords.iter().map(|&c| c >> (n - depth) & 1)))
        .collect();
    CylinderWord::new(coding_params(cube.d), IndexSet::Full, symbols)
        .expect("symbols built from cube bits lie in the alphabet")
}

/// Diameter in `Σ` of a depth-`n` cylinder over all positions: `γρ^{n+1}`.
pub fn cylinder_diameter(params: &SpaceParams, depth: u64) -> f64 {
    params.scale_at(depth + 1)
}

/// Exact check of `|π(a) − π(b)| ≤ d(a, b)` on depth-`n` prefixes, where the
/// points are the lower corners of `D_n(a)` and `D_n(b)`.
///
/// Works in integer units of `4^{-n}`: `Σ Δc_j² ≤ 4d · 4^{n-j}`, `j` the first
/// differing position.
pub fn contraction_holds(a: &[u32], b: &[u32], d: u32) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::InsufficientDepth(format!(
            "cannot compare prefixes of depth {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u32;
    if n > 60 {
        return Err(Error::InvalidConfig(format!("prefix depth {n} above 60")));
    }
    let ca = encode_symbols(a, d)?;
    let cb = encode_symbols(b, d)?;
    let squared: u128 = ca
        .coords
        .iter()
        .zip(&cb.coords)
        .map(|(&x, &y)| {
            let delta = x.abs_diff(y) as u128;
            delta * delta
        })
        .sum();
    match a.iter().zip(b).position(|(x, y)| x != y) {
        None => Ok(squared == 0),
        Some(idx) => {
            let first = idx as u32 + 1;
            let bound = 4u128 * d as u128 * (1u128 << (2 * (n - first)));
            Ok(squared <= bound)
        }
    }
}

/// Dyadic cubes of side `2^{-ℓ} ∈ (r/2, r]` meeting the open ball `B(x, r)`,
/// clipped to the unit cube.
pub fn cubes_meeting_ball(center: &[f64], r: f64) -> Result<Vec<DyadicCube>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("radius must lie in (0, 1], got {r}")));
    }
    let d = center.len() as u32;
    let level = (-r.log2()).ceil().max(0.0) as u32;
    if level > MAX_LEVEL {
        return Err(Error::Domain(format!("radius {r} below resolution")));
    }
    let cells = 1u64 << level;
    let side = (-(level as f64)).exp2();
    let ranges: Vec<(u64, u64)> = center
        .iter()
        .map(|&x| {
            let lo = ((x - r) / side).floor().max(0.0) as u64;
            let hi = (((x + r) / side).floor().max(0.0) as u64).min(cells - 1);
            (lo.min(cells - 1), hi)
        })
        .collect();
    let mut out = Vec::new();
    let mut coords: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let cube = DyadicCube {
            d,
            level,
            coords: coords.clone(),
        };
        if cube.distance_to(center) < r {
            out.push(cube);
        }
        let mut j = 0;
        loop {
            if j == coords.len() {
                return Ok(out);
            }
            if coords[j] < ranges[j].1 {
                coords[j] += 1;
                break;
            }
            coords[j] = ranges[j].0;
            j += 1;
        }
    }
}
