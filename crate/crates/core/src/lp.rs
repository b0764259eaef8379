//! A dense bounded-variable simplex for small covering LPs.
//!
//! Solves `min c.x` subject to `A x >= b` and `0 <= x <= u`, where every
//! objective coefficient, matrix entry, and right-hand side is nonnegative.
//! Under those signs the all-upper-bounds point is feasible whenever the
//! instance is coverable at all, which gives a starting basis for free: all
//! surplus variables basic, all structural variables nonbasic at their upper
//! bound. From there the usual bounded-simplex iteration (with bound flips)
//! walks the objective down.
//!
//! Problem sizes here are desk scale — hundreds of rows, tens of structural
//! columns — so the tableau is kept dense and pivots are plain row
//! operations. Dantzig pricing with a Bland fallback guards against cycling.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// `sum coeffs . x >= rhs`; coefficients are (column, value) pairs.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(objective.len(), upper.len());
        LinearProgram { objective, upper, rows: Vec::new() }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, v)| j < self.objective.len() && v >= 0.0));
        self.rows.push(LpRow { coeffs, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Solver::new(self)?.run()
    }
}

struct Solver {
    n: usize, // structural variables
    m: usize, // rows
    // tableau[i] is row i of B^-1 * [A | -I], length n + m
    tableau: Vec<Vec<f64>>,
    xb: Vec<f64>,       // values of basic variables, per row
    basis: Vec<usize>,  // variable occupying each row
    state: Vec<VarState>,
    reduced: Vec<f64>,  // objective row: c_j - z_j
    cost: Vec<f64>,     // objective incl. zero-cost surplus columns
    upper: Vec<f64>,    // bounds incl. infinite surplus uppers
    objective: f64,
}

impl Solver {
    fn new(lp: &LinearProgram) -> Result<Self> {
        let n = lp.objective.len();
        let m = lp.rows.len();
        for (j, &u) in lp.upper.iter().enumerate() {
            if !(u >= 0.0) || !u.is_finite() {
                return Err(Error::Lp(format!("variable {j}: bad upper bound {u}")));
            }
        }
        let mut tableau = vec![vec![0.0; n + m]; m];
        let mut xb = vec![0.0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            // equality form: sum a_ij x_j - s_i = b_i, basis s_i => B = -I,
            // so the initial tableau is -[A | -I] = [-A | I]
            let mut lhs_at_upper = 0.0;
            for &(j, v) in &row.coeffs {
                tableau[i][j] = -v;
                lhs_at_upper += v * lp.upper[j];
            }
            tableau[i][n + i] = 1.0;
            xb[i] = lhs_at_upper - row.rhs; // surplus value at x = upper
            if xb[i] < -1e-7 {
                return Err(Error::Lp(format!(
                    "row {i} unsatisfiable even at upper bounds (slack {})",
                    xb[i]
                )));
            }
            xb[i] = xb[i].max(0.0);
        }
        let mut cost = lp.objective.clone();
        cost.extend(std::iter::repeat(0.0).take(m));
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat(f64::INFINITY).take(m));
        let mut state = vec![VarState::AtUpper; n];
        state.extend((0..m).map(VarState::Basic));
        let basis: Vec<usize> = (n..n + m).collect();
        // basic costs are all zero initially, so reduced costs equal costs
        let reduced = cost.clone();
        let objective = lp
            .objective
            .iter()
            .zip(&lp.upper)
            .map(|(c, u)| c * u)
            .sum();
        Ok(Solver { n, m, tableau, xb, basis, state, reduced, cost, upper, objective })
    }

    fn run(mut self) -> Result<LpSolution> {
        let max_pivots = 10_000 + 50 * (self.n + self.m);
        let mut pivots = 0;
        let mut stalled = 0usize;
        loop {
            let bland = stalled > 2 * (self.n + self.m);
            let Some(entering) = self.price(bland) else {
                return Ok(self.extract(pivots));
            };
            if pivots >= max_pivots {
                return Err(Error::Lp(format!("simplex exceeded {max_pivots} pivots")));
            }
            pivots += 1;
            let progress = self.step(entering, bland)?;
            stalled = if progress { 0 } else { stalled + 1 };
        }
    }

    /// Picks an entering variable: nonbasic at lower with negative reduced
    /// cost, or at upper with positive reduced cost. Dantzig by default,
    /// smallest-index (Bland) when asked to break a stall.
    fn price(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n + self.m {
            let score = match self.state[j] {
                VarState::AtLower if self.reduced[j] < -EPS => -self.reduced[j],
                VarState::AtUpper if self.reduced[j] > EPS => self.reduced[j],
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Limit on the entering variable's move imposed by basic row `i`, with
    /// the bound the basic variable would exit at.
    fn row_limit(&self, i: usize, dir: f64, q: usize) -> Option<(f64, VarState)> {
        // basic values move as xb_i - dir * t * y_i when x_q moves by dir * t
        let rate = -dir * self.tableau[i][q];
        if rate < -EPS {
            Some(((self.xb[i] / -rate).max(0.0), VarState::AtLower))
        } else if rate > EPS && self.upper[self.basis[i]].is_finite() {
            Some((((self.upper[self.basis[i]] - self.xb[i]) / rate).max(0.0), VarState::AtUpper))
        } else {
            None
        }
    }

    /// One iteration for the chosen entering variable. Returns whether the
    /// objective strictly moved (false on degenerate pivots). Under `bland`
    /// the leaving row is the smallest-index tie instead of the largest
    /// pivot, which is what makes the stall escape cycle-free.
    fn step(&mut self, q: usize, bland: bool) -> Result<bool> {
        let dir = if self.state[q] == VarState::AtLower { 1.0 } else { -1.0 };
        // pass 1: tightest limit over all rows, capped by the bound flip
        let mut t_max = self.upper[q];
        for i in 0..self.m {
            if let Some((lim, _)) = self.row_limit(i, dir, q) {
                t_max = t_max.min(lim);
            }
        }
        if !t_max.is_finite() {
            return Err(Error::Lp("objective unbounded below".into()));
        }
        // pass 2: among rows tying the limit, prefer the largest pivot entry
        let mut leave: Option<(usize, VarState)> = None;
        let mut best: (f64, usize) = (0.0, usize::MAX);
        for i in 0..self.m {
            if let Some((lim, exit_state)) = self.row_limit(i, dir, q) {
                if lim > t_max + EPS {
                    continue;
                }
                let piv = self.tableau[i][q].abs();
                let better = if bland {
                    self.basis[i] < best.1
                } else {
                    piv > best.0
                };
                if better {
                    best = (piv, self.basis[i]);
                    leave = Some((i, exit_state));
                }
            }
        }
        if t_max < self.upper[q] - EPS && leave.is_none() {
            return Err(Error::Lp("ratio test found no leaving row".into()));
        }
        if t_max >= self.upper[q] - EPS && self.upper[q].is_finite() {
            // a full traversal to the opposite bound beats a degenerate pivot
            let row_blocks = leave.map_or(false, |(i, _)| {
                self.row_limit(i, dir, q).map_or(false, |(lim, _)| lim < self.upper[q] - EPS)
            });
            if !row_blocks {
                t_max = self.upper[q];
                leave = None;
            }
        }
        self.objective += self.reduced[q] * dir * t_max;
        match leave {
            None => {
                // bound flip: entering variable crosses to its other bound
                for i in 0..self.m {
                    self.xb[i] -= dir * t_max * self.tableau[i][q];
                }
                self.state[q] = match self.state[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    VarState::Basic(_) => unreachable!(),
                };
                Ok(t_max > EPS)
            }
            Some((r, exit_state)) => {
                for i in 0..self.m {
                    self.xb[i] -= dir * t_max * self.tableau[i][q];
                }
                let entering_value = match self.state[q] {
                    VarState::AtLower => dir * t_max,
                    VarState::AtUpper => self.upper[q] + dir * t_max,
                    VarState::Basic(_) => unreachable!(),
                };
                let leaving = self.basis[r];
                self.state[leaving] = exit_state;
                self.state[q] = VarState::Basic(r);
                self.basis[r] = q;
                self.pivot(r, q);
                self.xb[r] = entering_value;
                Ok(t_max > EPS)
            }
        }
    }

    /// Gaussian pivot on tableau row `r`, column `q` (objective row included).
    fn pivot(&mut self, r: usize, q: usize) {
        let piv = self.tableau[r][q];
        debug_assert!(piv.abs() > 1e-12, "numerically singular pivot");
        let inv = 1.0 / piv;
        for v in &mut self.tableau[r] {
            *v *= inv;
        }
        self.tableau[r][q] = 1.0;
        let pivot_row = self.tableau[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tableau[i][q];
            if f != 0.0 {
                for (v, p) in self.tableau[i].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.tableau[i][q] = 0.0;
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.reduced[q] = 0.0;
        }
    }

    fn extract(self, pivots: usize) -> LpSolution {
        let mut values = vec![0.0; self.n];
        for j in 0..self.n {
            values[j] = match self.state[j] {
                VarState::Basic(row) => self.xb[row].clamp(0.0, self.upper[j]),
                VarState::AtLower => 0.0,
                VarState::AtUpper => self.upper[j],
            };
        }
        let objective = self
            .cost
            .iter()
            .take(self.n)
            .zip(&values)
            .map(|(c, x)| c * x)
            .sum();
        LpSolution { values, objective, pivots }
    }
}
