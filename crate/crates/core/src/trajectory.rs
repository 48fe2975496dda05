//! Sampled solutions and their CSV export.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Lookup, TimeGrid};
use crate::system::DelaySystem;
use crate::{vec_inf_norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Picard,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Picard => "picard",
            Method::Oracle => "oracle",
        })
    }
}

/// Per-node truncation diagnostics of the series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDiagnostics {
    pub converged: bool,
    pub tail: f64,
}

impl Default for PointDiagnostics {
    fn default() -> Self {
        PointDiagnostics { converged: true, tail: 0.0 }
    }
}

impl PointDiagnostics {
    pub fn merge(&mut self, converged: bool, tail: f64) {
        self.converged &= converged;
        self.tail = self.tail.max(tail);
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub values: Vec<Vector>,
    pub method: Method,
    pub diagnostics: Vec<PointDiagnostics>,
    /// Free-form key/value metadata written to the sidecar file.
    pub meta: BTreeMap<String, String>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn n(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(vec_inf_norm).fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }

    /// Solution at an arbitrary time: φ for `t ≤ 0`, linear interpolation
    /// in μ between nodes otherwise.
    pub fn eval(&self, sys: &DelaySystem, t: f64) -> Result<Vector> {
        Ok(match self.grid.lookup(&sys.mu, t) {
            Lookup::History(s) => sys.phi(s)?,
            Lookup::Node(k) => self.values[k].clone(),
            Lookup::Interp { left, theta } => &self.values[left] * (1.0 - theta) + &self.values[left + 1] * theta,
        })
    }

    /// Sup-norm difference at the nodes of `self` that are also nodes of `other`.
    pub fn sup_diff_on_common_nodes(&self, other: &Trajectory) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut matched = 0;
        for (t, v) in self.times().iter().zip(&self.values) {
            if let Some(k) = other.grid.node_index(*t) {
                worst = worst.max(vec_inf_norm(&(v - &other.values[k])));
                matched += 1;
            }
        }
        if matched < self.grid.breakpoints().len() {
            return Err(Error::GridMismatch(format!("only {matched} common nodes between trajectories")));
        }
        Ok(worst)
    }

    /// CSV with header `t,w1..wn`, 17 significant digits, LF endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for k in 1..=self.n() {
            header.push_str(&format!(",w{k}"));
        }
        writeln!(w, "{header}")?;
        for (t, v) in self.times().iter().zip(&self.values) {
            let mut line = format!("{t:.16e}");
            for x in v.iter() {
                line.push_str(&format!(",{x:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// `key = value` sidecar.
    pub fn write_meta<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method = {}", self.method)?;
        writeln!(w, "points = {}", self.values.len())?;
        writeln!(w, "series_converged = {}", self.all_converged())?;
        let tail = self.diagnostics.iter().map(|d| d.tail).fold(0.0, f64::max);
        writeln!(w, "max_series_tail = {tail:e}")?;
        for (k, v) in &self.meta {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }
}
