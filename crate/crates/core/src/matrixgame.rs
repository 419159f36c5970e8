//! Zero-sum matrix games solved exactly by linear programming.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Constraint, LinearProgram, Relation};

/// Default saddle-point tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Dense row-major payoff matrix; entries are paid to the row player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite payoff {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged payoff matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// The game seen by the column player: transposed and negated.
    pub fn negated_transpose(&self) -> PayoffMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(-self.get(r, c));
            }
        }
        PayoffMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `(G q)_a` for every row.
    pub fn row_payoffs(&self, q: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * q[c]).sum())
            .collect()
    }

    /// `(p^T G)_b` for every column.
    pub fn col_payoffs(&self, p: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| p[r] * self.get(r, c)).sum())
            .collect()
    }

    /// `max_a (G q)_a - min_b (p^T G)_b`.
    pub fn duality_gap(&self, p: &[f64], q: &[f64]) -> f64 {
        let best_row = self.row_payoffs(q).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let worst_col = self.col_payoffs(p).into_iter().fold(f64::INFINITY, f64::min);
        best_row - worst_col
    }

    fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl TryFrom<Vec<Vec<f64>>> for PayoffMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PayoffMatrix::from_rows(&rows)
    }
}

impl From<PayoffMatrix> for Vec<Vec<f64>> {
    fn from(m: PayoffMatrix) -> Self {
        m.data.chunks(m.cols).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub duality_gap: f64,
}

/// Solves `max_p min_q p^T G q`.
///
/// Returns a saddle point whose duality gap is at most `tol` (scaled by the
/// payoff magnitude when entries exceed one). When several equilibria exist
/// the first optimal vertex found by the fixed pivot rule is returned.
pub fn solve_matrix_game(g: &PayoffMatrix, tol: f64) -> Result<MatrixGameSolution> {
    let solution = match pure_saddle(g) {
        Some((r, c)) => {
            let mut p = vec![0.0; g.rows];
            let mut q = vec![0.0; g.cols];
            p[r] = 1.0;
            q[c] = 1.0;
            MatrixGameSolution {
                value: g.get(r, c),
                duality_gap: g.duality_gap(&p, &q),
                row_strategy: p,
                col_strategy: q,
            }
        }
        None => {
            let (value, p) = maximin_strategy(g)?;
            let (_, q) = maximin_strategy(&g.negated_transpose())?;
            MatrixGameSolution {
                value,
                duality_gap: g.duality_gap(&p, &q),
                row_strategy: p,
                col_strategy: q,
            }
        }
    };
    let allowed = tol * g.max_abs().max(1.0);
    if !(solution.duality_gap <= allowed) {
        return Err(Error::Numerical(format!(
            "matrix game certificate failed: duality gap {:e} exceeds {allowed:e}",
            solution.duality_gap
        )));
    }
    Ok(solution)
}

/// A pure saddle point, if one exists: an entry that is the minimum of its
/// row and the maximum of its column. Lowest row, then lowest column.
fn pure_saddle(g: &PayoffMatrix) -> Option<(usize, usize)> {
    let row_mins: Vec<f64> = (0..g.rows)
        .map(|r| (0..g.cols).map(|c| g.get(r, c)).fold(f64::INFINITY, f64::min))
        .collect();
    let col_maxs: Vec<f64> = (0..g.cols)
        .map(|c| (0..g.rows).map(|r| g.get(r, c)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for r in 0..g.rows {
        for c in 0..g.cols {
            let v = g.get(r, c);
            if v == row_mins[r] && v == col_maxs[c] {
                return Some((r, c));
            }
        }
    }
    None
}

/// Row player's LP: maximize `u` subject to `p^T (G - g_min) e_b >= u` for
/// every column and `p` on the simplex; the game value is `g_min + u`.
fn maximin_strategy(g: &PayoffMatrix) -> Result<(f64, Vec<f64>)> {
    let (rows, cols) = (g.rows, g.cols);
    let shift = g.min_entry();
    let mut constraints = Vec::with_capacity(cols + 1);
    for c in 0..cols {
        let mut coeffs: Vec<f64> = (0..rows).map(|r| -(g.get(r, c) - shift)).collect();
        coeffs.push(1.0);
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
    }
    let mut simplex_row = vec![1.0; rows];
    simplex_row.push(0.0);
    constraints.push(Constraint {
        coeffs: simplex_row,
        relation: Relation::Eq,
        rhs: 1.0,
    });
    let mut objective = vec![0.0; rows];
    objective.push(1.0);
    let lp = LinearProgram {
        objective,
        constraints,
    };
    let sol = lp.solve(200 * (rows + cols + 2))?;
    let mut p = sol.x[..rows].to_vec();
    clamp_and_renormalize(&mut p)?;
    Ok((shift + sol.x[rows], p))
}

fn clamp_and_renormalize(p: &mut [f64]) -> Result<()> {
    for v in p.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::Numerical(format!("LP strategy sums to {total}")));
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(())
}
