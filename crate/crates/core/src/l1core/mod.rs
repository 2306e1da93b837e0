//! Exact solvers for `min ||c||_1 s.t. A c = y`, its dual, and the lasso.
//!
//! [`solve_bp`] only reports [`SolveStatus::Optimal`] after checking primal
//! feasibility, dual feasibility `||A^T nu||_inf <= 1` and a vanishing duality
//! gap on the original (unreduced) data.

mod brute;
mod lasso;
mod simplex;

pub use brute::brute_force_l1;
pub use lasso::{solve_lasso, LassoSolution};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result, UosError};
use crate::linalg::{self, inf_norm, l1_norm};
use simplex::{solve_standard_form, LpOptions, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Tolerances {
    /// Primal feasibility, relative: `||A c - y|| <= feas_tol (1 + ||y||)`.
    pub feas_tol: f64,
    /// Duality gap and dual feasibility slack.
    pub dual_gap_tol: f64,
}

impl Default for L1Tolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            dual_gap_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Solution {
    pub coefficients: DVector<f64>,
    pub objective: f64,
    /// Equality-constraint multipliers. `None` for the brute-force oracle.
    pub dual: Option<DVector<f64>>,
    pub status: SolveStatus,
}

impl L1Solution {
    fn failed(m: usize, status: SolveStatus) -> Self {
        Self {
            coefficients: DVector::zeros(m),
            objective: f64::NAN,
            dual: None,
            status,
        }
    }
}

/// Checks the optimality certificate of a primal/dual pair on `(a, y)`.
pub fn certify_pair(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
    nu: &DVector<f64>,
    tol: &L1Tolerances,
) -> bool {
    let feasible = (a * c - y).norm() <= tol.feas_tol * (1.0 + y.norm());
    let dual_feasible = inf_norm(&a.tr_mul(nu)) <= 1.0 + tol.dual_gap_tol;
    let obj = l1_norm(c);
    let gap = (obj - y.dot(nu)).abs() <= tol.dual_gap_tol * (1.0 + obj);
    feasible && dual_feasible && gap
}

fn split_lp(a: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>, LpStatus) {
    let (r, m) = a.shape();
    let mut split = DMatrix::zeros(r, 2 * m);
    split.columns_mut(0, m).copy_from(a);
    split.columns_mut(m, m).copy_from(&(-a));
    let cost = DVector::from_element(2 * m, 1.0);
    let sol = solve_standard_form(&split, y, &cost, LpOptions::default());
    if sol.status != LpStatus::Optimal {
        return (DVector::zeros(m), DVector::zeros(r), sol.status);
    }
    let c = DVector::from_fn(m, |j, _| sol.x[j] - sol.x[m + j]);
    (c, sol.duals, LpStatus::Optimal)
}

/// Basis pursuit: `min ||c||_1 s.t. A c = y`, via the split `c = c+ - c-`.
///
/// When `A` is row-rank deficient the constraints are first rotated onto an
/// orthonormal basis of its range, which leaves the feasible set and the
/// objective unchanged and keeps the basis small. If the certificate fails on
/// the reduced system the full system is solved instead.
pub fn solve_bp(a: &DMatrix<f64>, y: &DVector<f64>, tol: &L1Tolerances) -> Result<L1Solution> {
    let (r, m) = a.shape();
    if r == 0 || m == 0 {
        return param(format!("empty constraint matrix {r}x{m}"));
    }
    if y.len() != r {
        return param(format!("rhs has length {} but A has {r} rows", y.len()));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Ok(L1Solution {
            coefficients: DVector::zeros(m),
            objective: 0.0,
            dual: Some(DVector::zeros(r)),
            status: SolveStatus::Optimal,
        });
    }

    let finish = |c: DVector<f64>, nu: DVector<f64>| L1Solution {
        objective: l1_norm(&c),
        coefficients: c,
        dual: Some(nu),
        status: SolveStatus::Optimal,
    };

    let q = linalg::range_basis(a, 1e-13)?;
    if q.ncols() > 0 && q.ncols() < r {
        let ar = q.tr_mul(a);
        let yr = q.tr_mul(y);
        if let (c, pi, LpStatus::Optimal) = split_lp(&ar, &yr) {
            let nu = &q * pi;
            if certify_pair(a, y, &c, &nu, tol) {
                return Ok(finish(c, nu));
            }
        }
    }

    match split_lp(a, y) {
        (c, nu, LpStatus::Optimal) => {
            if certify_pair(a, y, &c, &nu, tol) {
                Ok(finish(c, nu))
            } else {
                log::debug!("basis pursuit certificate failed on {r}x{m} system");
                Ok(L1Solution::failed(m, SolveStatus::NumericalFailure))
            }
        }
        (_, _, LpStatus::Infeasible) => Ok(L1Solution::failed(m, SolveStatus::Infeasible)),
        _ => Ok(L1Solution::failed(m, SolveStatus::NumericalFailure)),
    }
}

/// A maximiser of `<a, lambda>` over `{lambda : ||B^T lambda||_inf <= 1}`.
#[derive(Debug, Clone)]
pub struct DualDirection {
    pub lambda: DVector<f64>,
    pub value: f64,
}

/// Solves the dual of basis pursuit. The optimal value equals the minimal
/// l1 norm of a representation of `a` by the columns of `b`; the returned
/// `lambda` is the vertex the simplex terminates at.
pub fn solve_dual_direction(
    a: &DVector<f64>,
    b: &DMatrix<f64>,
    tol: &L1Tolerances,
) -> Result<DualDirection> {
    if a.len() != b.nrows() {
        return param(format!(
            "target has length {} but B has {} rows",
            a.len(),
            b.nrows()
        ));
    }
    let sol = solve_bp(b, a, tol)?;
    match sol.status {
        SolveStatus::Optimal => {
            let lambda = sol.dual.expect("bp dual");
            let value = a.dot(&lambda);
            Ok(DualDirection { lambda, value })
        }
        SolveStatus::Infeasible => Err(UosError::Infeasible(
            "dual objective is unbounded: target is outside the span of the constraint directions"
                .into(),
        )),
        SolveStatus::NumericalFailure => {
            Err(UosError::Numerical("dual-direction LP failed".into()))
        }
    }
}
