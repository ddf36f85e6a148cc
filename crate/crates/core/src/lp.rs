//! Generic dense two-phase simplex for `min c·x  s.t.  A x = b, x ≥ 0`.
//!
//! This is deliberately unrelated to the transportation simplex: it works on
//! the flat constraint matrix and serves as an independent route to the same
//! optimal values. Bland's rule picks the entering column, a Harris ratio
//! test the leaving row, and the tableau is periodically rebuilt from the
//! original data to keep rounding errors from accumulating.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;
/// Rebuild the tableau from the original data after this many pivots.
const REINVERT_EVERY: usize = 64;

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    /// The initial tableau `[A | I | b]`, kept for reinversion.
    orig: Array2<f64>,
    /// `B⁻¹ [A | I | b]`; the last column is the right-hand side.
    t: Array2<f64>,
    basis: Vec<usize>,
    vars: usize,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
    pivots: usize,
}

/// Solves `B X = R` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut b: Array2<f64>, mut r: Array2<f64>) -> Option<Array2<f64>> {
    let m = b.nrows();
    for k in 0..m {
        let p = (k..m).max_by(|&x, &y| b[[x, k]].abs().total_cmp(&b[[y, k]].abs()))?;
        if b[[p, k]].abs() < 1e-12 {
            return None;
        }
        if p != k {
            for j in 0..m {
                b.swap([p, j], [k, j]);
            }
            for j in 0..r.ncols() {
                r.swap([p, j], [k, j]);
            }
        }
        for i in k + 1..m {
            let f = b[[i, k]] / b[[k, k]];
            if f != 0.0 {
                for j in k..m {
                    b[[i, j]] -= f * b[[k, j]];
                }
                for j in 0..r.ncols() {
                    r[[i, j]] -= f * r[[k, j]];
                }
            }
        }
    }
    for k in (0..m).rev() {
        for i in k + 1..m {
            let f = b[[k, i]];
            if f != 0.0 {
                for j in 0..r.ncols() {
                    r[[k, j]] -= f * r[[i, j]];
                }
            }
        }
        let d = b[[k, k]];
        r.row_mut(k).mapv_inplace(|x| x / d);
    }
    Some(r)
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[[r, self.vars]]
    }

    fn reinvert(&mut self) -> Result<()> {
        let basis_cols = self.orig.select(Axis(1), &self.basis);
        self.t = solve_dense(basis_cols, self.orig.clone())
            .ok_or_else(|| Error::LpFailure("basis became singular".into()))?;
        let vars = self.vars;
        self.t.column_mut(vars).mapv_inplace(|x| {
            if x < 0.0 && x > -FEASIBILITY_TOL {
                0.0
            } else {
                x
            }
        });
        Ok(())
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t.ncols();
        let piv = self.t[[row, col]];
        for k in 0..width {
            self.t[[row, k]] /= piv;
        }
        let pivot_row = self.t.row(row).to_owned();
        for r in 0..self.t.nrows() {
            if r == row {
                continue;
            }
            let f = self.t[[r, col]];
            if f != 0.0 {
                for k in 0..width {
                    self.t[[r, k]] -= f * pivot_row[k];
                }
                self.t[[r, col]] = 0.0;
            }
        }
        let vars = self.vars;
        for r in 0..self.t.nrows() {
            if self.t[[r, vars]] < 0.0 && self.t[[r, vars]] > -FEASIBILITY_TOL {
                self.t[[r, vars]] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                let row: ArrayView1<f64> = self.t.row(r);
                for j in 0..self.vars {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    /// Harris ratio test: the largest pivot among rows whose ratio is within
    /// the feasibility tolerance of the minimum.
    fn leaving_row(&self, col: usize) -> Option<usize> {
        let candidates = || (0..self.t.nrows()).filter(move |&r| self.t[[r, col]] > PIVOT_TOL);
        let bound = candidates()
            .map(|r| (self.rhs(r).max(0.0) + FEASIBILITY_TOL) / self.t[[r, col]])
            .fold(f64::INFINITY, f64::min);
        candidates()
            .filter(|&r| self.rhs(r).max(0.0) / self.t[[r, col]] <= bound)
            .max_by(|&x, &y| {
                self.t[[x, col]]
                    .total_cmp(&self.t[[y, col]])
                    .then(self.basis[y].cmp(&self.basis[x]))
            })
    }

    /// Runs simplex iterations on `cost` until optimal, with Bland's rule for
    /// the entering column. Optimality is confirmed on a freshly reinverted
    /// tableau.
    fn optimize(&mut self, cost: &[f64], max_pivots: usize) -> Result<()> {
        let mut since_reinvert = 0;
        loop {
            let d = self.reduced_costs(cost);
            let entering = (0..self.vars).find(|&j| self.allowed[j] && d[j] < -COST_TOL);
            let Some(col) = entering else {
                if since_reinvert == 0 {
                    return Ok(());
                }
                self.reinvert()?;
                since_reinvert = 0;
                continue;
            };
            let Some(row) = self.leaving_row(col) else {
                return Err(Error::LpFailure("objective is unbounded".into()));
            };
            if self.pivots >= max_pivots {
                return Err(Error::LpFailure(format!(
                    "simplex did not terminate after {max_pivots} pivots"
                )));
            }
            self.pivot(row, col);
            since_reinvert += 1;
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
                since_reinvert = 0;
            }
        }
    }
}

/// Solves the standard-form program with a two-phase simplex.
pub fn solve_standard_form(a: &Array2<f64>, b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let (m, n) = a.dim();
    if b.len() != m || c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}×{n}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }
    let vars = n + m;
    let mut t = Array2::zeros((m, vars + 1));
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[[r, j]] = sign * a[[r, j]];
        }
        t[[r, n + r]] = 1.0;
        t[[r, vars]] = sign * b[r];
    }
    let mut tab = Tableau {
        orig: t.clone(),
        t,
        basis: (n..vars).collect(),
        vars,
        allowed: vec![true; vars],
        pivots: 0,
    };
    let max_pivots = 200 * (m + n) + 10_000;

    let mut phase1 = vec![0.0; vars];
    phase1[n..].iter_mut().for_each(|x| *x = 1.0);
    tab.optimize(&phase1, max_pivots)?;
    let infeasibility: f64 = (0..m)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.rhs(r))
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Err(Error::Infeasible);
    }

    // Drive zero-level artificials out of the basis. Where no structural
    // column can replace one, its row is redundant; the artificial then stays
    // basic at level zero and, with artificials barred from entering, its
    // row never changes the solution.
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let col = (0..n)
            .filter(|&j| !tab.basis.contains(&j))
            .max_by(|&x, &y| tab.t[[r, x]].abs().total_cmp(&tab.t[[r, y]].abs()))
            .filter(|&j| tab.t[[r, j]].abs() > PIVOT_TOL);
        if let Some(j) = col {
            tab.pivot(r, j);
        }
    }
    tab.reinvert()?;
    for j in n..vars {
        tab.allowed[j] = false;
    }

    let mut phase2 = c.to_vec();
    phase2.resize(vars, 0.0);
    tab.optimize(&phase2, max_pivots)?;

    let mut x = vec![0.0; n];
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.rhs(r).max(0.0);
        }
    }
    let value = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpOutcome {
        x,
        value,
        pivots: tab.pivots,
    })
}
