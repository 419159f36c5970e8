//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `maximize c·x subject to rows (<=, >=, =) rhs, x >= 0`. Sized for
//! the small dense programs that come out of matrix games; there is no
//! sparse machinery and no presolve.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    /// Objective coefficients, maximized.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective
    /// row (stored as `-c` reduced costs) and the last column is the rhs.
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.cols + 1;
        &mut self.data[r * w..(r + 1) * w]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.at(pr, pc);
        self.row_mut(pr).iter_mut().for_each(|v| *v *= inv);
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.at(r, pc);
            if factor != 0.0 {
                let row = self.row_mut(r);
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on the current objective row. Columns at or
    /// beyond `allowed` never enter.
    fn optimize(&mut self, allowed: usize, max_pivots: usize, pivots: &mut usize) -> Result<()> {
        loop {
            // Bland: lowest-index improving column.
            let obj = self.rows;
            let Some(enter) = (0..allowed).find(|&c| self.at(obj, c) < -PIVOT_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, best)) => {
                            if ratio < best - PIVOT_EPS
                                || (ratio <= best + PIVOT_EPS && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, best))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            if *pivots >= max_pivots {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {max_pivots} pivots"
                )));
            }
            self.pivot(pr, enter);
            *pivots += 1;
        }
    }
}

impl LinearProgram {
    pub fn solve(&self, max_pivots: usize) -> Result<LpSolution> {
        let n = self.objective.len();
        let m = self.constraints.len();
        if let Some(c) = self.constraints.iter().find(|c| c.coeffs.len() != n) {
            return Err(Error::Shape(format!(
                "constraint has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }

        // Normalize to rhs >= 0.
        let rows: Vec<(Vec<f64>, Relation, f64)> = self
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();

        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let art_start = n + num_slack;
        let cols = art_start + num_art;
        let mut t = Tableau {
            data: vec![0.0; (m + 1) * (cols + 1)],
            rows: m,
            cols,
            basis: vec![0; m],
        };

        let mut slack = n;
        let mut art = art_start;
        for (r, (coeffs, relation, rhs)) in rows.iter().enumerate() {
            let row = t.row_mut(r);
            row[..n].copy_from_slice(coeffs);
            row[cols] = *rhs;
            match relation {
                Relation::Le => {
                    row[slack] = 1.0;
                    t.basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    row[art] = 1.0;
                    t.basis[r] = art;
                    slack += 1;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    t.basis[r] = art;
                    art += 1;
                }
            }
        }

        let mut pivots = 0;
        if num_art > 0 {
            // Phase 1: maximize -(sum of artificials).
            let w = cols + 1;
            for c in art_start..cols {
                t.data[m * w + c] = 1.0;
            }
            for r in 0..m {
                if t.basis[r] >= art_start {
                    for c in 0..=cols {
                        t.data[m * w + c] -= t.data[r * w + c];
                    }
                }
            }
            t.optimize(cols, max_pivots, &mut pivots)?;
            let infeasibility = -t.rhs(m);
            if infeasibility > 1e-9 {
                return Err(Error::Numerical(format!(
                    "linear program is infeasible (phase-one residual {infeasibility:e})"
                )));
            }
            // Drive remaining artificials out of the basis where possible;
            // rows where that fails are redundant and stay inert.
            for r in 0..m {
                if t.basis[r] >= art_start {
                    if let Some(c) = (0..art_start).find(|&c| t.at(r, c).abs() > PIVOT_EPS) {
                        t.pivot(r, c);
                        pivots += 1;
                    }
                }
            }
        }

        // Phase 2 objective row.
        let w = cols + 1;
        t.data[m * w..].fill(0.0);
        for (c, &v) in self.objective.iter().enumerate() {
            t.data[m * w + c] = -v;
        }
        for r in 0..m {
            let b = t.basis[r];
            let coef = t.data[m * w + b];
            if coef != 0.0 {
                for c in 0..=cols {
                    t.data[m * w + c] -= coef * t.data[r * w + c];
                }
            }
        }
        t.optimize(art_start, max_pivots, &mut pivots)?;

        let mut x = vec![0.0; n];
        for r in 0..m {
            if t.basis[r] < n {
                x[t.basis[r]] = t.rhs(r);
            }
        }
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots,
        })
    }
}
