//! Time grids on `[−r, T]` that contain every delay breakpoint.
//!
//! When all delays are integer multiples of a common unit `g`, the forward
//! grid is built from identical cells `[c·g, (c+1)·g]` whose interior nodes
//! are μ-uniform on the first cell. Every shift `t − r_j` of a node is then a
//! node again, so delayed lookups are exact. Otherwise each interval between
//! consecutive breakpoints gets its own μ-uniform nodes and delayed values are
//! interpolated linearly in μ.
//!
//! Refining by an integer factor subdivides every μ-uniform template, so the
//! coarse grid is always a subset of its refinement.

use crate::error::{Error, Result};
use crate::mu_calculus::MuMap;
use crate::q_lattice::enumerate_indices;

/// How to find the value at a (delayed) time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup {
    /// `t ≤ 0`: use the history function.
    History(f64),
    Node(usize),
    /// Linear interpolation in μ between nodes `left` and `left + 1`.
    Interp { left: usize, theta: f64 },
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    /// Commensurate delays: unit `g`, `m` nodes per cell.
    Cells { unit: f64, m: usize },
    /// `per_unit` nodes per unit of μ between breakpoints.
    Segments { per_unit: usize },
}

#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Vec<f64>,
    zero: usize,
    breakpoints: Vec<f64>,
    layout: Layout,
    history_nodes: usize,
    horizon: f64,
}

/// Lags `Σ i_j r_j ≤ T` (sorted, deduplicated), plus `T`.
pub fn breakpoints(delays: &[f64], horizon: f64) -> Vec<f64> {
    let mut b: Vec<f64> = enumerate_indices(delays, horizon)
        .iter()
        .map(|i| i.iter().zip(delays).map(|(&m, &r)| m as f64 * r).sum::<f64>())
        .filter(|&l| l <= horizon)
        .collect();
    b.push(horizon);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    b
}

/// Common unit `g` with every `r_j / g` a small integer.
pub fn common_unit(delays: &[f64]) -> Option<f64> {
    let r_min = delays.iter().copied().fold(f64::INFINITY, f64::min);
    (1..=64).map(|q| r_min / q as f64).find(|g| {
        delays.iter().all(|r| {
            let k = (r / g).round();
            k >= 1.0 && (r / g - k).abs() <= 1e-9 * k
        })
    })
}

impl TimeGrid {
    /// μ-uniform grid with roughly `per_unit` nodes per unit of μ.
    pub fn build(mu: &MuMap, delays: &[f64], horizon: f64, per_unit: usize) -> Result<Self> {
        if per_unit == 0 {
            return Err(Error::invalid("grid density must be positive"));
        }
        let bps = breakpoints(delays, horizon);
        let layout = match common_unit(delays) {
            Some(unit) => {
                let mut widest = 0.0f64;
                let mut c = 0.0;
                while c * unit < horizon {
                    let hi = ((c + 1.0) * unit).min(horizon);
                    widest = widest.max(mu.eval(hi) - mu.eval(c * unit));
                    c += 1.0;
                }
                Layout::Cells { unit, m: ((per_unit as f64 * widest).ceil() as usize).max(2) }
            }
            None => Layout::Segments { per_unit },
        };
        let r = delays.iter().copied().fold(0.0, f64::max);
        let hist = ((per_unit as f64 * (mu.eval(0.0) - mu.eval(-r))).ceil() as usize).max(8);
        Self::assemble(mu, delays, horizon, bps, layout, hist)
    }

    /// Nested refinement: every node of `self` is a node of the result.
    pub fn refined(&self, mu: &MuMap, delays: &[f64], factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("refinement factor must be positive"));
        }
        let layout = match self.layout {
            Layout::Cells { unit, m } => Layout::Cells { unit, m: m * factor },
            Layout::Segments { per_unit } => Layout::Segments { per_unit: per_unit * factor },
        };
        Self::assemble(mu, delays, self.horizon, self.breakpoints.clone(), layout, self.history_nodes * factor)
    }

    fn assemble(mu: &MuMap, delays: &[f64], horizon: f64, bps: Vec<f64>, layout: Layout, hist: usize) -> Result<Self> {
        let r = delays.iter().copied().fold(0.0, f64::max);
        let mut times = Vec::new();
        let (u_a, u_0) = (mu.eval(-r), mu.eval(0.0));
        for j in 0..hist {
            times.push(mu.inverse(u_a + (u_0 - u_a) * j as f64 / hist as f64).min(0.0));
        }
        times[0] = -r;
        let zero = times.len();
        let snap_to = |x: f64| {
            bps.iter().copied().find(|b| (b - x).abs() <= 1e-11 * (1.0 + x.abs())).unwrap_or(x)
        };
        match layout {
            Layout::Cells { unit, m } => {
                let (v0, v1) = (mu.eval(0.0), mu.eval(unit));
                let theta: Vec<f64> =
                    (0..m).map(|j| mu.inverse(v0 + (v1 - v0) * j as f64 / m as f64) / unit).collect();
                let mut c = 0usize;
                'outer: loop {
                    let start = snap_to(c as f64 * unit);
                    for (j, th) in theta.iter().enumerate() {
                        let t = if j == 0 { start } else { (c as f64 + th) * unit };
                        if t >= horizon - 1e-11 * (1.0 + horizon) {
                            break 'outer;
                        }
                        times.push(t);
                    }
                    c += 1;
                }
                times.push(horizon);
            }
            Layout::Segments { per_unit } => {
                let mut lo = 0.0;
                for &b in &bps {
                    if b <= lo {
                        continue;
                    }
                    let (ul, ub) = (mu.eval(lo), mu.eval(b));
                    let k = ((per_unit as f64 * (ub - ul)).ceil() as usize).max(1);
                    times.push(lo);
                    for j in 1..k {
                        times.push(mu.inverse(ul + (ub - ul) * j as f64 / k as f64));
                    }
                    lo = b;
                }
                times.push(horizon);
            }
        }
        let grid = TimeGrid { times, zero, breakpoints: bps, layout, history_nodes: hist, horizon };
        grid.check()?;
        Ok(grid)
    }

    /// Grid from explicit times; they must cover `−r`, `0`, `T` and every breakpoint.
    pub fn from_times(times: Vec<f64>, delays: &[f64], horizon: f64) -> Result<Self> {
        let zero = times
            .iter()
            .position(|&t| t == 0.0)
            .ok_or_else(|| Error::GridMismatch("grid does not contain t = 0".into()))?;
        let bps = breakpoints(delays, horizon);
        let grid = TimeGrid {
            times,
            zero,
            breakpoints: bps,
            layout: Layout::Segments { per_unit: 0 },
            history_nodes: zero,
            horizon,
        };
        grid.check()?;
        let r = delays.iter().copied().fold(0.0, f64::max);
        if (grid.times[0] + r).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!("grid starts at {} instead of −r = {}", grid.times[0], -r)));
        }
        for b in &grid.breakpoints {
            if !grid.times.iter().any(|t| (t - b).abs() <= 1e-11 * (1.0 + b.abs())) {
                return Err(Error::GridMismatch(format!("breakpoint {b} is not a grid node")));
            }
        }
        Ok(grid)
    }

    fn check(&self) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("grid times are not strictly increasing".into()));
        }
        if self.times[self.zero] != 0.0 || *self.times.last().unwrap_or(&f64::NAN) != self.horizon {
            return Err(Error::GridMismatch("grid must contain 0 and T exactly".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of `t = 0`.
    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Common delay unit, when the delays are commensurate.
    pub fn unit(&self) -> Option<f64> {
        match self.layout {
            Layout::Cells { unit, .. } => Some(unit),
            Layout::Segments { .. } => None,
        }
    }

    /// Where to read the solution at time `t`.
    pub fn lookup(&self, mu: &MuMap, t: f64) -> Lookup {
        if t <= 1e-13 * (1.0 + t.abs()) {
            return if t.abs() <= 1e-13 { Lookup::Node(self.zero) } else { Lookup::History(t) };
        }
        let fwd = &self.times[self.zero..];
        let tol = 1e-11 * (1.0 + t.abs());
        let k = fwd.partition_point(|&x| x < t);
        if k < fwd.len() && (fwd[k] - t).abs() <= tol {
            return Lookup::Node(self.zero + k);
        }
        if k > 0 && (t - fwd[k - 1]).abs() <= tol {
            return Lookup::Node(self.zero + k - 1);
        }
        if k == 0 || k >= fwd.len() {
            // Outside [0, T]; clamp to the nearest end.
            return Lookup::Node(if k == 0 { self.zero } else { self.times.len() - 1 });
        }
        let (ul, ur) = (mu.eval(fwd[k - 1]), mu.eval(fwd[k]));
        Lookup::Interp { left: self.zero + k - 1, theta: (mu.eval(t) - ul) / (ur - ul) }
    }

    /// Index of the node equal to `t`, if any.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&x| x < t);
        let tol = 1e-11 * (1.0 + t.abs());
        [k.wrapping_sub(1), k]
            .into_iter()
            .filter(|&i| i < self.times.len())
            .find(|&i| (self.times[i] - t).abs() <= tol)
    }
}
