//! Primal active-set method for small dense QPs of the form
//!
//! ```text
//!     minimize    1/2 x' H x + g' x
//!     subject to  A x = b
//!                 lower <= x <= upper
//! ```
//!
//! `H` must be positive definite on the null space of the active constraints
//! (the caller regularizes). Equality rows are assumed to stay linearly
//! independent on the free variables, which holds when every row keeps at
//! least one free variable; rows whose variables are all at a bound are
//! dropped from the step computation.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const STEP_TOL: f64 = 1e-13;
const DUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

pub(crate) struct BoxEqQp<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub linear: &'a DVector<f64>,
    pub eq: &'a DMatrix<f64>,
    pub rhs: &'a DVector<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Max-norm of the KKT residual (stationarity, primal feasibility, dual
    /// sign and complementarity) at `x`.
    pub kkt_residual: f64,
}

impl BoxEqQp<'_> {
    /// Solves from a feasible starting point `x0`.
    pub fn solve(&self, x0: DVector<f64>) -> Result<QpSolution> {
        let n = x0.len();
        let mut x = x0;
        let mut state = vec![Bound::Free; n];

        for iteration in 1..=MAX_ITERATIONS {
            let (step, eq_mult, rows) = self.equality_step(&x, &state)?;
            let step_norm = step.amax();

            if step_norm <= STEP_TOL {
                let reduced = self.reduced_gradient(&x, &eq_mult, &rows);
                // Most violated bound multiplier, lowest index on ties.
                let mut release: Option<(usize, f64)> = None;
                for i in 0..n {
                    let violation = match state[i] {
                        Bound::Free => 0.0,
                        Bound::Lower => -reduced[i],
                        Bound::Upper => reduced[i],
                    };
                    if violation > DUAL_TOL && release.is_none_or(|(_, v)| violation > v) {
                        release = Some((i, violation));
                    }
                }
                match release {
                    Some((i, _)) => state[i] = Bound::Free,
                    None => {
                        let kkt_residual = self.kkt_residual(&x, &state, &eq_mult, &rows);
                        return Ok(QpSolution {
                            x,
                            iterations: iteration,
                            kkt_residual,
                        });
                    }
                }
                continue;
            }

            // Ratio test against the box.
            let mut alpha = 1.0;
            let mut blocking: Option<(usize, Bound)> = None;
            for i in 0..n {
                if state[i] != Bound::Free {
                    continue;
                }
                let (limit, bound) = if step[i] < 0.0 {
                    ((self.lower - x[i]) / step[i], Bound::Lower)
                } else if step[i] > 0.0 {
                    ((self.upper - x[i]) / step[i], Bound::Upper)
                } else {
                    continue;
                };
                if limit < alpha {
                    alpha = limit.max(0.0);
                    blocking = Some((i, bound));
                }
            }
            x.axpy(alpha, &step, 1.0);
            if let Some((i, bound)) = blocking {
                state[i] = bound;
                x[i] = match bound {
                    Bound::Lower => self.lower,
                    _ => self.upper,
                };
            }
        }
        Err(Error::SolverFailure {
            iterations: MAX_ITERATIONS,
        })
    }

    /// Solves the equality-constrained subproblem on the free variables.
    /// Returns the step, the equality multipliers and the equality rows that
    /// took part.
    fn equality_step(
        &self,
        x: &DVector<f64>,
        state: &[Bound],
    ) -> Result<(DVector<f64>, DVector<f64>, Vec<usize>)> {
        let n = x.len();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let rows: Vec<usize> = (0..self.eq.nrows())
            .filter(|&r| free.iter().any(|&i| self.eq[(r, i)] != 0.0))
            .collect();
        let nf = free.len();
        let nr = rows.len();
        let gradient = self.hessian * x + self.linear;

        let mut kkt = DMatrix::<f64>::zeros(nf + nr, nf + nr);
        let mut rhs = DVector::<f64>::zeros(nf + nr);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.hessian[(i, j)];
            }
            for (b, &r) in rows.iter().enumerate() {
                kkt[(a, nf + b)] = self.eq[(r, i)];
                kkt[(nf + b, a)] = self.eq[(r, i)];
            }
            rhs[a] = -gradient[i];
        }
        // Step must keep A x = b; absorb any drift of the current iterate.
        let residual = self.eq * x - self.rhs;
        for (b, &r) in rows.iter().enumerate() {
            rhs[nf + b] = -residual[r];
        }

        let solution = kkt
            .full_piv_lu()
            .solve(&rhs)
            .ok_or(Error::SolverFailure { iterations: 0 })?;
        let mut step = DVector::<f64>::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            step[i] = solution[a];
        }
        // KKT rows read H p + A' y = -grad, so the constraint multipliers of
        // grad = A' nu + z are nu = -y.
        let mut eq_mult = DVector::<f64>::zeros(self.eq.nrows());
        for (b, &r) in rows.iter().enumerate() {
            eq_mult[r] = -solution[nf + b];
        }
        Ok((step, eq_mult, rows))
    }

    /// grad - A' nu, i.e. the bound multipliers z.
    fn reduced_gradient(&self, x: &DVector<f64>, eq_mult: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
        let mut reduced = self.hessian * x + self.linear;
        for &r in rows {
            for i in 0..x.len() {
                reduced[i] -= eq_mult[r] * self.eq[(r, i)];
            }
        }
        reduced
    }

    fn kkt_residual(&self, x: &DVector<f64>, state: &[Bound], eq_mult: &DVector<f64>, rows: &[usize]) -> f64 {
        // Rows without free variables carry a zero multiplier, matching the
        // dual check in `solve`.
        let reduced = self.reduced_gradient(x, eq_mult, rows);
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let r = match state[i] {
                Bound::Free => reduced[i].abs(),
                Bound::Lower => (-reduced[i]).max(0.0).max((x[i] - self.lower).abs()),
                Bound::Upper => reduced[i].max(0.0).max((x[i] - self.upper).abs()),
            };
            worst = worst.max(r);
            worst = worst.max((self.lower - x[i]).max(0.0)).max((x[i] - self.upper).max(0.0));
        }
        let primal = (self.eq * x - self.rhs).amax();
        worst.max(primal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_onto_simplex_with_box() {
        // min |x - t|^2 s.t. sum x = 1, 0 <= x <= 1 with t = (0.9, 0.6, -0.5)
        let h = DMatrix::<f64>::identity(3, 3) * 2.0;
        let g = DVector::from_vec(vec![-1.8, -1.2, 1.0]);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let qp = BoxEqQp {
            hessian: &h,
            linear: &g,
            eq: &a,
            rhs: &b,
            lower: 0.0,
            upper: 1.0,
        };
        let sol = qp.solve(DVector::from_vec(vec![1.0 / 3.0; 3])).unwrap();
        // Projection: shift tau with 0.9 - tau + 0.6 - tau = 1 -> tau = 0.25.
        assert!((sol.x[0] - 0.65).abs() < 1e-12);
        assert!((sol.x[1] - 0.35).abs() < 1e-12);
        assert!(sol.x[2].abs() < 1e-15);
        assert!(sol.kkt_residual < 1e-10);
    }

    #[test]
    fn upper_bound_becomes_active() {
        // min (x0 - 2)^2 + (x1 - 1.5)^2 s.t. x0 + x1 = 1.5, 0 <= x <= 1
        let h = DMatrix::<f64>::identity(2, 2) * 2.0;
        let g = DVector::from_vec(vec![-4.0, -3.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.5]);
        let qp = BoxEqQp {
            hessian: &h,
            linear: &g,
            eq: &a,
            rhs: &b,
            lower: 0.0,
            upper: 1.0,
        };
        let sol = qp.solve(DVector::from_vec(vec![0.75, 0.75])).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
    }
}
