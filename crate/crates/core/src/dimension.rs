//! Box counting, log-log slope fits, and the critical-exponent estimate.
//!
//! Box counting the simulated covered set only tracks the Hausdorff dimension
//! of the limsup set in the full-measure regime `t_0 ≥ d`. Below that the
//! finite proxies are unions of balls with positive volume and their box
//! slope drifts to `d`, while the limsup set has dimension `t_0`. The
//! quantitative probe of `min(t_0, d)` is therefore the tail-cover estimate
//! [`critical_exponent_estimate`] from above, and fiber density from below.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radius::RadiusSpec;

/// A set of level-`L` dyadic cells in `[0,1]^d`, stored as sorted row-major
/// indices (last coordinate fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    pub d: u32,
    pub level: u32,
    indices: Vec<u64>,
}

impl CellSet {
    pub fn from_sorted_indices(d: u32, level: u32, indices: Vec<u64>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { d, level, indices }
    }

    pub fn from_coords<I: IntoIterator<Item = Vec<u64>>>(d: u32, level: u32, coords: I) -> Self {
        let mut indices: Vec<u64> = coords
            .into_iter()
            .map(|c| c.iter().fold(0, |acc, &x| (acc << level) | x))
            .collect();
        indices.sort_unstable();
        indices.dedup();
        Self { d, level, indices }
    }

    /// Every cell of the level-`L` grid.
    pub fn full(d: u32, level: u32) -> Self {
        Self {
            d,
            level,
            indices: (0..1u64 << (d * level)).collect(),
        }
    }

    /// Middle-half Cantor fixture in `d = 1` at even `level = 2m`: keep the
    /// first and last quarter, recursively, giving `2^m` cells.
    pub fn middle_half_cantor(level: u32) -> Result<Self> {
        if !level.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "middle-half Cantor fixture needs an even level, got {level}"
            )));
        }
        let m = level / 2;
        let mut indices = (0..1u64 << m)
            .map(|bits| {
                // binary digit 1 -> base-4 digit 3
                (0..m).fold(0, |acc, j| acc | ((bits >> j & 1) * 3) << (2 * j))
            })
            .collect::<Vec<u64>>();
        indices.sort_unstable();
        Ok(Self {
            d: 1,
            level,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn contains(&self, index: u64) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Cells of level `level ≤ L` that contain at least one member.
    pub fn coarsen(&self, level: u32) -> Result<CellSet> {
        if level > self.level {
            return Err(Error::LevelExceedsGrid {
                level,
                grid_level: self.level,
            });
        }
        let shift = self.level - level;
        let mask = (1u64 << self.level) - 1;
        let mut out: Vec<u64> = self
            .indices
            .iter()
            .map(|&idx| {
                (0..self.d).fold(0u64, |acc, j| {
                    let c = idx >> (self.level * (self.d - 1 - j)) & mask;
                    (acc << level) | (c >> shift)
                })
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(CellSet {
            d: self.d,
            level,
            indices: out,
        })
    }
}

/// `(ℓ, N_ℓ)` pairs with strictly increasing levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountSeries {
    pub d: u32,
    pub points: Vec<(u32, u64)>,
}

impl BoxCountSeries {
    /// `N_ℓ ≤ N_{ℓ+1} ≤ 2^d N_ℓ` for every pair of consecutive levels.
    pub fn aggregation_bounds_hold(&self) -> bool {
        self.points.windows(2).all(|w| {
            let (l0, n0) = w[0];
            let (l1, n1) = w[1];
            l1 != l0 + 1 || (n0 <= n1 && n1 <= (n0 << self.d))
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "level,count")?;
        for (l, n) in &self.points {
            writeln!(out, "{l},{n}")?;
        }
        Ok(())
    }
}

/// `N_ℓ` for each requested level.
pub fn box_counts(cells: &CellSet, levels: &[u32]) -> Result<BoxCountSeries> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "levels must be strictly increasing".into(),
        ));
    }
    // finest first, each level coarsened from the one above it
    let mut points = Vec::with_capacity(levels.len());
    let mut current: Option<CellSet> = None;
    for &l in levels.iter().rev() {
        let next = match &current {
            Some(set) => set.coarsen(l)?,
            None => cells.coarsen(l)?,
        };
        points.push((l, next.len() as u64));
        current = Some(next);
    }
    points.reverse();
    Ok(BoxCountSeries { d: cells.d, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub levels: Vec<u32>,
}

impl DimensionEstimate {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "slope,intercept,r_squared,levels")?;
        let levels: Vec<String> = self.levels.iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{},{},{},{}",
            self.slope,
            self.intercept,
            self.r_squared,
            levels.join(";")
        )
    }
}

/// Ordinary least squares `y ≈ slope · x + intercept`, with `R²`.
/// A constant response gets slope 0 and `R² = 1`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "least squares needs at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig(
            "least squares needs distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy == 0.0 {
        return Ok((0.0, my, 1.0));
    }
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    Ok((slope, intercept, (1.0 - ss_res / syy).clamp(0.0, 1.0)))
}

/// Slope of `log₂ N_ℓ` against `ℓ`, the same slope as `ln N_ℓ` against
/// `ℓ ln 2`. The intercept is `log₂` of the prefactor. Power-of-two counts
/// keep every term exact, so a full grid fits to exactly `d`.
pub fn fit_dimension(series: &BoxCountSeries) -> Result<DimensionEstimate> {
    if series.points.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "dimension fit needs at least 3 levels, got {}",
            series.points.len()
        )));
    }
    if series.points.iter().any(|&(_, n)| n == 0) {
        return Err(Error::Domain(
            "box count of zero at some level (empty set)".into(),
        ));
    }
    let xs: Vec<f64> = series.points.iter().map(|&(l, _)| l as f64).collect();
    let ys: Vec<f64> = series
        .points
        .iter()
        .map(|&(_, n)| (n as f64).log2())
        .collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys)?;
    Ok(DimensionEstimate {
        slope,
        intercept,
        r_squared,
        levels: series.points.iter().map(|&(l, _)| l).collect(),
    })
}

/// Bisection tolerance on `t`.
pub const EXPONENT_TOLERANCE: f64 = 1e-9;

/// `t̂` solving `2^t Σ_{n=M}^{N} r_n^t = 1`.
///
/// The cover cost is decreasing in `t` once every `2 r_n < 1`, and it exceeds
/// one at `t = 0` (it counts the balls). The upper bracket starts at 1 and is
/// doubled until the cost drops below one.
pub fn critical_exponent_estimate(spec: &RadiusSpec, tail_start: u64, horizon: u64) -> Result<f64> {
    spec.validate()?;
    if tail_start == 0 || tail_start >= horizon {
        return Err(Error::Domain(format!(
            "need 1 <= M < N, got M = {tail_start}, N = {horizon}"
        )));
    }
    if !spec.is_decreasing() {
        return Err(Error::Domain(
            "critical exponent estimate needs decreasing radii".into(),
        ));
    }
    let cost =
        |t: f64| -> Result<f64> { Ok(2f64.powf(t) * spec.tail_power_sum(t, tail_start, horizon)?) };

    let mut lo = 0.0;
    if cost(lo)? < 1.0 {
        return Err(Error::NoRoot(
            "tail cover cost is below one already at t = 0".into(),
        ));
    }
    let mut hi = 1.0;
    while cost(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1024.0 {
            return Err(Error::NoRoot(format!(
                "tail cover cost over n = {tail_start}..={horizon} stays >= 1 for every t <= 1024"
            )));
        }
    }
    while hi - lo > EXPONENT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if cost(mid)? >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of an exponent scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentScanRow {
    #[serde(rename = "M")]
    pub tail_start: u64,
    #[serde(rename = "N")]
    pub horizon: u64,
    pub t_hat: f64,
}

pub fn write_scan_csv<W: Write>(rows: &[ExponentScanRow], mut out: W) -> io::Result<()> {
    writeln!(out, "M,N,t_hat")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.tail_start, r.horizon, r.t_hat)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_counts_and_slope() {
        for d in 1..=3 {
            let cells = CellSet::full(d, 5);
            let series = box_counts(&cells, &[1, 2, 3, 4, 5]).unwrap();
            for &(l, n) in &series.points {
                assert_eq!(n, 1 << (d * l));
            }
            let est = fit_dimension(&series).unwrap();
            assert!((est.slope - d as f64).abs() < 1e-12);
            assert!((est.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell() {
        let cells = CellSet::from_coords(2, 8, [vec![3, 200]]);
        let series = box_counts(&cells, &[2, 4, 6, 8]).unwrap();
        assert!(series.points.iter().all(|&(_, n)| n == 1));
        let est = fit_dimension(&series).unwrap();
        assert_eq!(est.slope, 0.0);
        assert_eq!(est.r_squared, 1.0);
    }

    #[test]
    fn cantor_fixture_counts() {
        let cells = CellSet::middle_half_cantor(14).unwrap();
        assert_eq!(cells.len(), 128);
        for m in 1..=7 {
            assert_eq!(cells.coarsen(2 * m).unwrap().len(), 1 << m);
        }
        let levels: Vec<u32> = (4..=14).step_by(2).collect();
        let est = fit_dimension(&box_counts(&cells, &levels).unwrap()).unwrap();
        assert!((est.slope - 0.5).abs() < 1e-12);
        assert!(CellSet::middle_half_cantor(5).is_err());
    }

    #[test]
    fn level_errors() {
        let cells = CellSet::full(1, 4);
        assert_eq!(
            box_counts(&cells, &[2, 5]),
            Err(Error::LevelExceedsGrid {
                level: 5,
                grid_level: 4
            })
        );
        assert!(box_counts(&cells, &[3, 2]).is_err());
        assert!(fit_dimension(&box_counts(&cells, &[1, 2]).unwrap()).is_err());
    }

    #[test]
    fn estimate_csv() {
        let est = DimensionEstimate {
            slope: 0.5,
            intercept: 0.0,
            r_squared: 1.0,
            levels: vec![4, 6],
        };
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "slope,intercept,r_squared,levels\n0.5,0,1,4;6\n"
        );
    }

    #[test]
    fn geometric_radii_have_no_crossing_from_first_ball() {
        // 2^t Σ_{n≥1} 2^{-nt} = Σ_{n≥1} 2^{-(n-1)t} > 1 for every t: the n = 1 term is 1.
        let g = RadiusSpec::geometric(0.5, 1.0).unwrap();
        assert!(matches!(
            critical_exponent_estimate(&g, 1, 10_000),
            Err(Error::NoRoot(_))
        ));
        // dropping the first ball leaves Σ_{n≥2} 2^{-(n-1)t} ≈ 1/(2^t - 1): root at t = 1
        let t = critical_exponent_estimate(&g, 2, 10_000).unwrap();
        assert!((t - 1.0).abs() < 1e-8, "{t}");
    }

    #[test]
    fn power_law_estimate_is_above_t0_and_shrinks() {
        let p = RadiusSpec::power_law(0.5, 1.0).unwrap();
        let a = critical_exponent_estimate(&p, 1_000, 1_000_000).unwrap();
        let b = critical_exponent_estimate(&p, 10_000, 10_000_000).unwrap();
        assert!(a > b && b > 0.5, "{a} {b}");
    }

    #[test]
    fn estimate_domain_errors() {
        let p = RadiusSpec::power_law(0.5, 1.0).unwrap();
        assert!(matches!(
            critical_exponent_estimate(&p, 10, 10),
            Err(Error::Domain(_))
        ));
        let e = RadiusSpec::explicit(vec![0.1, 0.3, 0.05]).unwrap();
        assert!(matches!(
            critical_exponent_estimate(&e, 1, 3),
            Err(Error::Domain(_))
        ));
    }
}
