//! Radius sequences `(r_n)`, indexed from `n = 1`.
//!
//! Tail sums `Σ r_n^t` are the only quantity the upper bound on the dimension
//! of the limsup set needs: a tail of the ball sequence is itself a cover.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// A parametric radius family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RadiusSpec {
    /// `r_n = scale · n^(-1/s)`, critical exponent `s`.
    PowerLaw {
        s: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `r_n = scale · ratio^n`, critical exponent `0`.
    Geometric {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// A finite list `r_1, …, r_len`.
    Explicit { values: Vec<f64> },
}

impl RadiusSpec {
    pub fn power_law(s: f64, scale: f64) -> Result<Self> {
        let spec = RadiusSpec::PowerLaw { s, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn geometric(ratio: f64, scale: f64) -> Result<Self> {
        let spec = RadiusSpec::Geometric { ratio, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let spec = RadiusSpec::Explicit { values };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the family parameters. Deserialized specs should pass through here.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            RadiusSpec::PowerLaw { s, scale } => {
                positive("s", *s)?;
                positive("scale", *scale)
            }
            RadiusSpec::Geometric { ratio, scale } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "ratio must lie in (0, 1), got {ratio}"
                    )));
                }
                positive("scale", *scale)
            }
            RadiusSpec::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidConfig("explicit radius list is empty".into()));
                }
                values.iter().try_for_each(|&v| positive("radius", v))
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            RadiusSpec::PowerLaw { .. } => "power-law",
            RadiusSpec::Geometric { .. } => "geometric",
            RadiusSpec::Explicit { .. } => "explicit",
        }
    }

    /// Number of radii, `None` for the infinite families.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Option<u64> {
        match self {
            RadiusSpec::Explicit { values } => Some(values.len() as u64),
            _ => None,
        }
    }

    /// True when the radii are strictly decreasing by construction.
    pub fn is_decreasing(&self) -> bool {
        match self {
            RadiusSpec::Explicit { values } => values.windows(2).all(|w| w[1] < w[0]),
            _ => true,
        }
    }

    fn check_index(&self, n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::Domain("radius index starts at n = 1".into()));
        }
        match self.len() {
            Some(len) if n > len => Err(Error::IndexOutOfRange {
                index: n,
                len: len as usize,
            }),
            _ => Ok(()),
        }
    }

    /// `r_n`.
    pub fn radius_at(&self, n: u64) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.radius_unchecked(n))
    }

    #[inline]
    pub(crate) fn radius_unchecked(&self, n: u64) -> f64 {
        match self {
            RadiusSpec::PowerLaw { s, scale } => scale * (n as f64).powf(-1.0 / s),
            RadiusSpec::Geometric { ratio, scale } => scale * ratio.powf(n as f64),
            RadiusSpec::Explicit { values } => values[(n - 1) as usize],
        }
    }

    /// `r_n^t`, with the exponents folded together for the parametric families.
    #[inline]
    fn term(&self, n: u64, t: f64) -> f64 {
        match self {
            RadiusSpec::PowerLaw { s, scale } => scale.powf(t) * (n as f64).powf(-t / s),
            RadiusSpec::Geometric { ratio, scale } => scale.powf(t) * ratio.powf(t * n as f64),
            RadiusSpec::Explicit { values } => values[(n - 1) as usize].powf(t),
        }
    }

    /// `t_0 = inf{t : Σ r_n^t < ∞}`.
    pub fn critical_exponent(&self) -> Result<f64> {
        match self {
            RadiusSpec::PowerLaw { s, .. } => Ok(*s),
            RadiusSpec::Geometric { .. } => Ok(0.0),
            RadiusSpec::Explicit { .. } => Err(Error::UndefinedForFiniteSequence),
        }
    }

    fn check_window(&self, t: f64, from: u64, to: u64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "exponent t must be nonnegative, got {t}"
            )));
        }
        if from > to {
            return Err(Error::Domain(format!("empty window {from}..={to}")));
        }
        self.check_index(from)?;
        self.check_index(to)
    }

    /// `Σ_{n=from}^{to} r_n^t`, summed directly in ascending `n`.
    ///
    /// Terms shrink along the summation, so plain accumulation would lose the
    /// late terms; a Neumaier compensation term carries the lost low-order bits.
    pub fn partial_power_sum(&self, t: f64, from: u64, to: u64) -> Result<f64> {
        self.check_window(t, from, to)?;
        if t == 0.0 {
            return Ok((to - from + 1) as f64);
        }
        let mut acc = CompensatedSum::default();
        for n in from..=to {
            acc.add(self.term(n, t));
        }
        Ok(acc.value())
    }

    /// `2^t Σ_{n=M}^{N} r_n^t`: the `t`-dimensional cost of covering the
    /// limsup set by the balls `M..=N`, each of diameter `2 r_n`.
    pub fn hausdorff_upper_bound(&self, t: f64, tail_start: u64, horizon: u64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::Domain(format!("upper bound needs t > 0, got {t}")));
        }
        Ok(2f64.powf(t) * self.partial_power_sum(t, tail_start, horizon)?)
    }

    /// Same value as [`partial_power_sum`](Self::partial_power_sum), but long
    /// power-law windows are evaluated by Euler–Maclaurin after a direct head
    /// and geometric windows in closed form. Cost is O(1) in the window length.
    pub fn tail_power_sum(&self, t: f64, from: u64, to: u64) -> Result<f64> {
        self.check_window(t, from, to)?;
        if t == 0.0 {
            return Ok((to - from + 1) as f64);
        }
        match self {
            RadiusSpec::PowerLaw { s, scale } if to - from >= EM_DIRECT_HEAD * 2 => {
                let mut acc = CompensatedSum::default();
                let head_end = from + EM_DIRECT_HEAD - 1;
                for n in from..=head_end {
                    acc.add(self.term(n, t));
                }
                let tail = euler_maclaurin_power(t / s, (head_end + 1) as f64, to as f64);
                acc.add(scale.powf(t) * tail);
                Ok(acc.value())
            }
            RadiusSpec::Geometric { ratio, scale } => {
                let log_q = t * ratio.ln();
                let count = (to - from + 1) as f64;
                Ok(
                    scale.powf(t) * (log_q * from as f64).exp() * (log_q * count).exp_m1()
                        / log_q.exp_m1(),
                )
            }
            _ => self.partial_power_sum(t, from, to),
        }
    }
}

const EM_DIRECT_HEAD: u64 = 4096;

/// `Σ_{n=a}^{b} n^{-p}` for integer `a ≥ 1024`, by Euler–Maclaurin with
/// corrections through `B_6`.
fn euler_maclaurin_power(p: f64, a: f64, b: f64) -> f64 {
    let u = 1.0 - p;
    let span = (b / a).ln();
    let x = u * span;
    // ∫_a^b x^{-p} dx = a^u (e^{u·ln(b/a)} - 1) / u, stable through u = 0.
    let integral = if x.abs() < 1e-300 {
        a.powf(u) * span
    } else {
        a.powf(u) * span * (x.exp_m1() / x)
    };
    let f = |x: f64| x.powf(-p);
    // d^j/dx^j x^{-p} = (-1)^j p(p+1)…(p+j-1) x^{-p-j}
    let deriv = |x: f64, j: i32| {
        let mut c = 1.0;
        for i in 0..j {
            c *= -(p + i as f64);
        }
        c * x.powf(-p - j as f64)
    };
    let b2 = 1.0 / 6.0 / 2.0;
    let b4 = -1.0 / 30.0 / 24.0;
    let b6 = 1.0 / 42.0 / 720.0;
    integral
        + 0.5 * (f(a) + f(b))
        + b2 * (deriv(b, 1) - deriv(a, 1))
        + b4 * (deriv(b, 3) - deriv(a, 3))
        + b6 * (deriv(b, 5) - deriv(a, 5))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
