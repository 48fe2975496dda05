//! The coefficient lattice `Q_k(i)`, indexed by level `k` and a multi-index
//! `i ∈ ℕ^d` of delay repetitions:
//!
//! ```text
//! Q_0 ≡ Θ,   Q_1(0) = I,   Q_k(i) = Θ if any i_j < 0,
//! Q_{k+1}(i) = B Q_k(i) + Σ_j F_j Q_k(i − e_j) + Σ_j A_j Q_{k+1}(i − e_j).
//! ```
//!
//! The last sum refers to the same level at a strictly smaller lag, so each
//! level is filled in ascending lag order. With [`BoundaryConvention::Recursive`]
//! the recursion also runs at level 1, giving `Q_1(m e_j) = A_j^m`; the
//! alternative [`BoundaryConvention::Published`] forces `Q_1(i) = Θ` for
//! `i ≠ 0`, which does not yield solutions once any `A_j ≠ Θ`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::system::Coefficients;
use crate::Matrix;

pub const DEFAULT_LEVEL_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryConvention {
    #[default]
    Recursive,
    Published,
}

#[derive(Debug, Clone)]
pub struct QTable {
    coeffs: Coefficients,
    indices: Vec<Vec<u32>>,
    lags: Vec<f64>,
    position: HashMap<Vec<u32>, usize>,
    /// `shifts[p][j]`: position of `indices[p] − e_j`, if on the lattice.
    shifts: Vec<Vec<Option<usize>>>,
    /// `levels[k][p] = Q_k(indices[p])` for `k = 0..=K`.
    levels: Vec<Vec<Matrix>>,
    lag_budget: f64,
    convention: BoundaryConvention,
}

fn lag_of(i: &[u32], delays: &[f64]) -> f64 {
    i.iter().zip(delays).map(|(&m, &r)| m as f64 * r).sum()
}

/// All multi-indices with `lag ≤ budget`, sorted by lag then lexicographically.
pub fn enumerate_indices(delays: &[f64], budget: f64) -> Vec<Vec<u32>> {
    fn rec(j: usize, cur: &mut Vec<u32>, used: f64, delays: &[f64], lim: f64, out: &mut Vec<Vec<u32>>) {
        if j == delays.len() {
            out.push(cur.clone());
            return;
        }
        let mut m = 0u32;
        while used + m as f64 * delays[j] <= lim {
            cur.push(m);
            rec(j + 1, cur, used + m as f64 * delays[j], delays, lim, out);
            cur.pop();
            m += 1;
        }
    }
    let lim = budget * (1.0 + 1e-12) + 1e-14;
    let mut out = Vec::new();
    rec(0, &mut Vec::new(), 0.0, delays, lim, &mut out);
    out.sort_by(|x, y| lag_of(x, delays).total_cmp(&lag_of(y, delays)).then_with(|| x.cmp(y)));
    out
}

impl QTable {
    pub fn build(coeffs: &Coefficients, level_cap: usize, lag_budget: f64) -> Result<Self> {
        Self::build_with(coeffs, level_cap, lag_budget, BoundaryConvention::Recursive)
    }

    pub fn build_with(
        coeffs: &Coefficients,
        level_cap: usize,
        lag_budget: f64,
        convention: BoundaryConvention,
    ) -> Result<Self> {
        coeffs.validate()?;
        if level_cap < 1 {
            return Err(Error::invalid("level cap K must be at least 1"));
        }
        if !(lag_budget >= 0.0) || !lag_budget.is_finite() {
            return Err(Error::invalid(format!("lag budget {lag_budget} must be nonnegative")));
        }
        let d = coeffs.d();
        let indices = enumerate_indices(&coeffs.delays, lag_budget);
        let lags = indices.iter().map(|i| lag_of(i, &coeffs.delays)).collect();
        let position: HashMap<Vec<u32>, usize> = indices.iter().cloned().enumerate().map(|(p, i)| (i, p)).collect();
        let shifts = indices
            .iter()
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i[j] == 0 {
                            return None;
                        }
                        let mut s = i.clone();
                        s[j] -= 1;
                        position.get(&s).copied()
                    })
                    .collect()
            })
            .collect();
        let mut table = QTable {
            coeffs: coeffs.clone(),
            indices,
            lags,
            position,
            shifts,
            levels: Vec::with_capacity(level_cap + 1),
            lag_budget,
            convention,
        };
        let n = coeffs.n();
        let m = table.indices.len();
        table.levels.push(vec![Matrix::zeros(n, n); m]);
        for k in 1..=level_cap {
            let mut level: Vec<Matrix> = Vec::with_capacity(m);
            for p in 0..m {
                let q = table.combine(k, p, |pp| &table.levels[k - 1][pp], |pp| &level[pp]);
                level.push(q);
            }
            table.levels.push(level);
        }
        Ok(table)
    }

    /// Scalar majorant lattice from operator norms.
    pub fn majorant(a: &[f64], b: f64, f: &[f64], delays: &[f64], level_cap: usize, lag_budget: f64) -> Result<Self> {
        if a.iter().chain(f).chain(std::iter::once(&b)).any(|x| !(*x >= 0.0)) {
            return Err(Error::invalid("majorant norms must be nonnegative"));
        }
        Self::build(&Coefficients::scalar(delays, a, b, f)?, level_cap, lag_budget)
    }

    /// One entry of level `k ≥ 1` at position `p`, given accessors for the
    /// previous level and for already computed entries of level `k`.
    fn combine<'m>(
        &self,
        k: usize,
        p: usize,
        prev: impl Fn(usize) -> &'m Matrix,
        same: impl Fn(usize) -> &'m Matrix,
    ) -> Matrix {
        let c = &self.coeffs;
        let n = c.n();
        let at_origin = self.lags[p] == 0.0;
        if k == 1 && (at_origin || self.convention == BoundaryConvention::Published) {
            return if at_origin { Matrix::identity(n, n) } else { Matrix::zeros(n, n) };
        }
        let mut q = &c.b * prev(p);
        for (j, s) in self.shifts[p].iter().enumerate() {
            if let Some(s) = *s {
                q += &c.f[j] * prev(s);
            }
        }
        for (j, s) in self.shifts[p].iter().enumerate() {
            if let Some(s) = *s {
                q += &c.a[j] * same(s);
            }
        }
        q
    }

    pub fn n(&self) -> usize {
        self.coeffs.n()
    }

    pub fn delays(&self) -> &[f64] {
        &self.coeffs.delays
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn level_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn lag_budget(&self) -> f64 {
        self.lag_budget
    }

    pub fn convention(&self) -> BoundaryConvention {
        self.convention
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    /// `Q_k` at lattice position `p` (see [`QTable::indices`]).
    pub fn at(&self, k: usize, p: usize) -> &Matrix {
        &self.levels[k][p]
    }

    /// `Q_k(i)`; indices with a negative coordinate give Θ.
    pub fn entry(&self, k: usize, i: &[i64]) -> Result<Matrix> {
        let n = self.n();
        if i.len() != self.coeffs.d() {
            return Err(Error::Dimension(format!("index has {} coordinates, expected {}", i.len(), self.coeffs.d())));
        }
        if i.iter().any(|&x| x < 0) {
            return Ok(Matrix::zeros(n, n));
        }
        if k > self.level_max() {
            return Err(Error::invalid(format!("level {k} exceeds the cap {}", self.level_max())));
        }
        let key: Vec<u32> = i.iter().map(|&x| x as u32).collect();
        match self.position.get(&key) {
            Some(&p) => Ok(self.levels[k][p].clone()),
            None => Err(Error::invalid(format!("index {i:?} lies beyond the lag budget {}", self.lag_budget))),
        }
    }

    /// CSV dump: `k,i1..id,q11,q12,…` (row-major).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        let mut header = vec!["k".to_string()];
        header.extend((1..=self.coeffs.d()).map(|j| format!("i{j}")));
        for r in 1..=n {
            for c in 1..=n {
                header.push(format!("q{r}{c}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, level) in self.levels.iter().enumerate() {
            for (p, q) in level.iter().enumerate() {
                let mut row: Vec<String> = vec![k.to_string()];
                row.extend(self.indices[p].iter().map(|x| x.to_string()));
                for r in 0..n {
                    for c in 0..n {
                        row.push(format!("{:.16e}", q[(r, c)]));
                    }
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}
