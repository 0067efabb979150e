//! Monte Carlo coverage of `[0,1]^d` by the random balls `B(ω_n, r_n)`.
//!
//! The limsup set is approximated on a level-`L` dyadic grid by the cells
//! covered at least `k` times among the balls `M..=N`. Centres come from the
//! counter-based generator, so any partition of the ball range across threads
//! gives the same grid: per-worker grids are merged by integer addition.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::CellSet;
use crate::error::{Error, Result};
use crate::radius::RadiusSpec;
use crate::rng::{CounterRng, Stream};

/// Largest supported grid, in cells.
pub const MAX_LOG2_CELLS: u64 = 31;
pub const MAX_LEVEL: u32 = 30;

/// Which cells a ball counts as covering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    /// Cell centre strictly inside the ball.
    #[default]
    Center,
    /// Cell meets the ball; dominates true coverage.
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: u32,
    #[serde(flatten)]
    pub spec: RadiusSpec,
    #[serde(rename = "N")]
    pub horizon: u64,
    #[serde(rename = "M", default = "default_tail_start")]
    pub tail_start: u64,
    pub level: u32,
    #[serde(default = "default_threshold")]
    pub k: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub membership: Membership,
}

fn default_tail_start() -> u64 {
    1
}

fn default_threshold() -> u32 {
    3
}

impl ExperimentConfig {
    pub fn new(d: u32, spec: RadiusSpec, horizon: u64, level: u32, seed: u64) -> Self {
        Self {
            d,
            spec,
            horizon,
            tail_start: 1,
            level,
            k: default_threshold(),
            seed,
            membership: Membership::Center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.d == 0 {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        if !(1..=MAX_LEVEL).contains(&self.level) {
            return Err(Error::InvalidConfig(format!(
                "grid level must lie in 1..={MAX_LEVEL}, got {}",
                self.level
            )));
        }
        if self.tail_start == 0 || self.tail_start > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= M <= N, got M = {}, N = {}",
                self.tail_start, self.horizon
            )));
        }
        if self.horizon > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!(
                "N = {} overflows the counters",
                self.horizon
            )));
        }
        if let Some(len) = self.spec.len() {
            if self.horizon > len {
                return Err(Error::IndexOutOfRange {
                    index: self.horizon,
                    len: len as usize,
                });
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig(
                "multiplicity threshold k must be >= 1".into(),
            ));
        }
        let log2_cells = self.d as u64 * self.level as u64;
        if log2_cells > MAX_LOG2_CELLS {
            return Err(Error::GridTooLarge { log2_cells });
        }
        Ok(())
    }
}

/// One simulated ball `B(ω_n, r_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallEvent {
    pub n: u64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `ω_n`: coordinate `j` is the uniform draw at counter `(n, j)`.
pub fn sample_center(seed: u64, n: u64, d: u32) -> Vec<f64> {
    let rng = CounterRng::new(seed);
    (0..d)
        .map(|j| rng.uniform(Stream::CubeCenter, n, j))
        .collect()
}

pub fn ball_event(config: &ExperimentConfig, n: u64) -> Result<BallEvent> {
    Ok(BallEvent {
        n,
        center: sample_center(config.seed, n, config.d),
        radius: config.spec.radius_at(n)?,
    })
}

/// Per-cell coverage counts on the level-`L` grid, row-major with the last
/// coordinate fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGrid {
    pub d: u32,
    pub level: u32,
    pub counts: Vec<u32>,
}

impl CoverageGrid {
    pub fn zeros(d: u32, level: u32) -> Self {
        Self {
            d,
            level,
            counts: vec![0; 1usize << (d * level)],
        }
    }

    pub fn cells_per_axis(&self) -> u64 {
        1 << self.level
    }

    pub fn coords_of(&self, index: u64) -> Vec<u64> {
        let mask = self.cells_per_axis() - 1;
        (0..self.d)
            .map(|j| index >> (self.level * (self.d - 1 - j)) & mask)
            .collect()
    }

    pub fn index_of(&self, coords: &[u64]) -> u64 {
        coords.iter().fold(0, |acc, &c| (acc << self.level) | c)
    }

    /// Centre of a cell, `(c_j + 1/2) 2^{-L}` per axis.
    pub fn cell_center(&self, index: u64) -> Vec<f64> {
        let side = (-(self.level as f64)).exp2();
        self.coords_of(index)
            .into_iter()
            .map(|c| (c as f64 + 0.5) * side)
            .collect()
    }

    fn add(&mut self, other: &CoverageGrid) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// `cell_index,count` rows for every cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "cell_index,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{i},{c}")?;
        }
        Ok(())
    }
}

/// Squared-distance membership test shared by every accumulation path.
#[inline]
fn covers(membership: Membership, center: &[f64], radius: f64, coords: &[u64], side: f64) -> bool {
    let mut sq = 0.0;
    for (&c, &x) in coords.iter().zip(center) {
        let delta = match membership {
            Membership::Center => (c as f64 + 0.5) * side - x,
            Membership::Outer => {
                let lo = c as f64 * side;
                let hi = lo + side;
                if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                }
            }
        };
        sq += delta * delta;
    }
    sq < radius * radius
}

fn stamp_ball(grid: &mut CoverageGrid, membership: Membership, center: &[f64], radius: f64) {
    let cells = grid.cells_per_axis();
    let side = (-(grid.level as f64)).exp2();
    // Candidate box, one cell wider than needed on each side.
    let ranges: Vec<(u64, u64)> = center
        .iter()
        .map(|&x| {
            let lo = ((x - radius) / side).floor() - 1.0;
            let hi = ((x + radius) / side).floor() + 1.0;
            let clip = |v: f64| v.clamp(0.0, (cells - 1) as f64) as u64;
            (clip(lo), clip(hi))
        })
        .collect();
    let mut coords: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        if covers(membership, center, radius, &coords, side) {
            let idx = grid.index_of(&coords) as usize;
            grid.counts[idx] += 1;
        }
        // odometer over the box, last axis fastest
        let mut j = coords.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if coords[j] < ranges[j].1 {
                coords[j] += 1;
                break;
            }
            coords[j] = ranges[j].0;
        }
    }
}

const BALLS_PER_TASK: u64 = 1 << 14;

/// Coverage multiplicities for balls `M..=N`, on the current rayon pool.
pub fn accumulate_coverage(config: &ExperimentConfig) -> Result<CoverageGrid> {
    config.validate()?;
    let rng = CounterRng::new(config.seed);
    let (d, level) = (config.d, config.level);
    let run = |from: u64, to: u64, grid: &mut CoverageGrid| {
        let mut center = vec![0.0; d as usize];
        for n in from..=to {
            for (j, x) in center.iter_mut().enumerate() {
                *x = rng.uniform(Stream::CubeCenter, n, j as u32);
            }
            let radius = config.spec.radius_unchecked(n);
            stamp_ball(grid, config.membership, &center, radius);
        }
    };

    let (m, n) = (config.tail_start, config.horizon);
    if rayon::current_num_threads() == 1 || n - m < BALLS_PER_TASK {
        let mut grid = CoverageGrid::zeros(d, level);
        run(m, n, &mut grid);
        return Ok(grid);
    }
    let tasks: Vec<(u64, u64)> = (m..=n)
        .step_by(BALLS_PER_TASK as usize)
        .map(|a| (a, (a + BALLS_PER_TASK - 1).min(n)))
        .collect();
    let grid = tasks
        .par_iter()
        .fold(
            || CoverageGrid::zeros(d, level),
            |mut grid, &(a, b)| {
                run(a, b, &mut grid);
                grid
            },
        )
        .reduce_with(|mut a, b| {
            a.add(&b);
            a
        })
        .unwrap_or_else(|| CoverageGrid::zeros(d, level));
    Ok(grid)
}

/// [`accumulate_coverage`] on a dedicated pool of `threads` workers.
pub fn accumulate_coverage_with_threads(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<CoverageGrid> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| accumulate_coverage(config))
}

/// Cells with multiplicity at least `k`.
pub fn covered_set(grid: &CoverageGrid, k: u32) -> Result<CellSet> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "multiplicity threshold k must be >= 1".into(),
        ));
    }
    let indices = grid
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= k)
        .map(|(i, _)| i as u64)
        .collect();
    Ok(CellSet::from_sorted_indices(grid.d, grid.level, indices))
}

/// `|covered_set(grid, k)| / 2^{dL}`.
pub fn coverage_fraction(grid: &CoverageGrid, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "multiplicity threshold k must be >= 1".into(),
        ));
    }
    let covered = grid.counts.iter().filter(|&&c| c >= k).count();
    Ok(covered as f64 / grid.counts.len() as f64)
}

/// JSON sidecar written next to a grid CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub d: u32,
    #[serde(rename = "L")]
    pub level: u32,
    #[serde(rename = "N")]
    pub horizon: u64,
    #[serde(rename = "M")]
    pub tail_start: u64,
    pub seed: u64,
    pub spec: RadiusSpec,
    pub k: u32,
    pub membership: Membership,
    pub coverage_fraction: f64,
}

impl GridSidecar {
    pub fn new(config: &ExperimentConfig, grid: &CoverageGrid) -> Result<Self> {
        Ok(Self {
            d: config.d,
            level: config.level,
            horizon: config.horizon,
            tail_start: config.tail_start,
            seed: config.seed,
            spec: config.spec.clone(),
            k: config.k,
            membership: config.membership,
            coverage_fraction: coverage_fraction(grid, config.k)?,
        })
    }
}
