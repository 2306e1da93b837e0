use nalgebra::{DMatrix, DVector};

use crate::error::{param, Result, UosError};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coefficients: DVector<f64>,
    /// Max over coordinates of the subgradient optimality violation.
    pub kkt_residual: f64,
    pub sweeps: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Violation of `0 in A^T (A c - y) + lambda * sign(c)` at coordinate `j`,
/// given the gradient entry `g`.
fn kkt_violation(g: f64, c: f64, lambda: f64) -> f64 {
    if c > 0.0 {
        (g + lambda).abs()
    } else if c < 0.0 {
        (g - lambda).abs()
    } else {
        (g.abs() - lambda).max(0.0)
    }
}

/// KKT residual of `c` on the full data, computed from scratch.
pub(crate) fn kkt_residual(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let grad = a.tr_mul(&(a * c - y));
    (0..c.len())
        .map(|j| kkt_violation(grad[j], c[j], lambda))
        .fold(0.0, f64::max)
}

struct CoordinateDescent<'a> {
    a: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    lambda: f64,
    col_sq: Vec<f64>,
    resid: DVector<f64>,
}

impl CoordinateDescent<'_> {
    fn update(&mut self, c: &mut DVector<f64>, j: usize) {
        let sq = self.col_sq[j];
        if sq == 0.0 {
            return;
        }
        let col = self.a.column(j);
        let old = c[j];
        let rho = col.dot(&self.resid) + sq * old;
        let new = soft_threshold(rho, self.lambda) / sq;
        if new != old {
            self.resid.axpy(old - new, &col, 1.0);
            c[j] = new;
        }
    }

    fn violation(&self, c: &DVector<f64>, j: usize) -> f64 {
        let g = -self.a.column(j).dot(&self.resid);
        kkt_violation(g, c[j], self.lambda)
    }

    /// Returns the final full-data KKT residual and the sweeps spent.
    fn run(&mut self, c: &mut DVector<f64>, tol: f64, max_sweeps: usize) -> (f64, usize) {
        let m = c.len();
        let mut sweeps = 0;
        let mut kkt = f64::INFINITY;
        while sweeps < max_sweeps {
            self.resid = self.y - self.a * &*c;
            for j in 0..m {
                self.update(c, j);
            }
            sweeps += 1;

            let active: Vec<usize> = (0..m).filter(|&j| c[j] != 0.0).collect();
            while sweeps < max_sweeps && !active.is_empty() {
                for &j in &active {
                    self.update(c, j);
                }
                sweeps += 1;
                let worst = active
                    .iter()
                    .map(|&j| self.violation(c, j))
                    .fold(0.0, f64::max);
                if worst <= 0.5 * tol {
                    break;
                }
            }

            self.resid = self.y - self.a * &*c;
            kkt = (0..m).map(|j| self.violation(c, j)).fold(0.0, f64::max);
            if kkt <= tol {
                break;
            }
        }
        (kkt, sweeps)
    }
}

fn coordinate_descent(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    c: &mut DVector<f64>,
    tol: f64,
    max_sweeps: usize,
) -> (f64, usize) {
    let mut cd = CoordinateDescent {
        a,
        y,
        lambda,
        col_sq: a.column_iter().map(|col| col.norm_squared()).collect(),
        resid: y.clone(),
    };
    cd.run(c, tol, max_sweeps)
}

/// Follows the piecewise-linear lasso path from `||A^T y||_inf` down to
/// `lambda`. Returns `None` when the active Gram matrix turns singular, which
/// happens only at ties, so the caller can fall back to coordinate descent.
fn homotopy(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let m = a.ncols();
    let mut c = DVector::zeros(m);
    let mut grad = a.tr_mul(y);
    let j0 = grad.iamax();
    let mut level_val = grad[j0].abs();
    if level_val <= lambda {
        return Some(c);
    }
    let mut active = vec![j0];
    let mut signs = vec![grad[j0].signum()];
    let mut just_dropped: Option<usize> = None;

    for _ in 0..(20 * m + 100) {
        let k = active.len();
        let a_s = DMatrix::from_fn(a.nrows(), k, |i, t| a[(i, active[t])]);
        let gram = a_s.tr_mul(&a_s);
        let chol = gram.cholesky()?;
        let dir = chol.solve(&DVector::from_vec(signs.clone()));
        let u = &a_s * &dir;
        let v = a.tr_mul(&u);

        let mut step = level_val - lambda;
        let mut event: Option<(bool, usize)> = None;
        for j in 0..m {
            if active.contains(&j) || just_dropped == Some(j) {
                continue;
            }
            for gamma in [
                (level_val - grad[j]) / (1.0 - v[j]),
                (level_val + grad[j]) / (1.0 + v[j]),
            ] {
                if gamma > 1e-14 * level_val && gamma < step {
                    step = gamma;
                    event = Some((true, j));
                }
            }
        }
        // active coefficients must keep their sign along the step
        for t in 0..k {
            if signs[t] * dir[t] < 0.0 {
                let gamma = (-c[active[t]] / dir[t]).max(0.0);
                if gamma < step {
                    step = gamma;
                    event = Some((false, t));
                }
            }
        }

        for t in 0..k {
            c[active[t]] += step * dir[t];
        }
        level_val -= step;
        grad = a.tr_mul(&(y - a * &c));
        just_dropped = None;
        match event {
            None => return Some(c),
            Some((true, j)) => {
                active.push(j);
                signs.push(grad[j].signum());
            }
            Some((false, t)) => {
                c[active[t]] = 0.0;
                just_dropped = Some(active[t]);
                active.remove(t);
                signs.remove(t);
            }
        }
        if active.is_empty() {
            return None;
        }
    }
    None
}

/// Minimises `lambda ||c||_1 + 0.5 ||A c - y||^2`, stopping once the
/// subgradient optimality residual is at most `tol` on every coordinate.
///
/// The exact regularisation path is tried first; coordinate descent with
/// active-set passes polishes or replaces it. `max_iter` bounds the number of
/// coordinate sweeps.
pub fn solve_lasso(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoSolution> {
    let (r, m) = a.shape();
    if !(lambda > 0.0) {
        return param(format!("lasso weight must be positive, got {lambda}"));
    }
    if y.len() != r {
        return param(format!("rhs has length {} but A has {r} rows", y.len()));
    }
    if m == 0 {
        return Ok(LassoSolution {
            coefficients: DVector::zeros(0),
            kkt_residual: 0.0,
            sweeps: 0,
        });
    }

    // Only the component of y in range(A) matters; work in range coordinates.
    let q = linalg::range_basis(a, 1e-13)?;
    let (ar, yr) = if q.ncols() > 0 && q.ncols() < r {
        (q.tr_mul(a), q.tr_mul(y))
    } else {
        (a.clone(), y.clone())
    };

    let mut c = homotopy(&ar, &yr, lambda).unwrap_or_else(|| DVector::zeros(m));
    let mut kkt = kkt_residual(a, y, &c, lambda);
    let mut sweeps = 0;
    if kkt > tol {
        let (_, s) = coordinate_descent(&ar, &yr, lambda, &mut c, 0.5 * tol, max_iter);
        sweeps += s;
        kkt = kkt_residual(a, y, &c, lambda);
    }
    if kkt > tol && sweeps < max_iter {
        let (_, s) = coordinate_descent(a, y, lambda, &mut c, tol, max_iter - sweeps);
        sweeps += s;
        kkt = kkt_residual(a, y, &c, lambda);
    }
    if kkt > tol {
        return Err(UosError::NotConverged {
            what: "lasso".into(),
            residual: kkt,
        });
    }
    Ok(LassoSolution {
        coefficients: c,
        kkt_residual: kkt,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_soft_threshold() {
        let a = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_lasso(&a, &y, 0.4, 1e-12, 100).unwrap();
        assert!((sol.coefficients[0] - 0.6).abs() < 1e-12);
        assert_eq!(sol.coefficients[1], 0.0);
    }

    #[test]
    fn full_shrinkage_gives_zero() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.2, 0.3, 1.0, 0.7]);
        let y = DVector::from_vec(vec![0.4, -0.9]);
        let lam = crate::linalg::inf_norm(&a.tr_mul(&y));
        let sol = solve_lasso(&a, &y, lam, 1e-10, 100).unwrap();
        assert_eq!(sol.coefficients, DVector::zeros(3));
    }

    #[test]
    fn rejects_non_positive_weight() {
        let a = DMatrix::identity(2, 2);
        assert!(solve_lasso(&a, &DVector::zeros(2), 0.0, 1e-8, 10).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        use rand::Rng;
        let mut g = crate::rng::stream(5, 0);
        let a = DMatrix::from_fn(5, 8, |_, _| g.gen::<f64>() - 0.5);
        let y = DVector::from_fn(5, |_, _| g.gen::<f64>() - 0.5);
        // no floating-point iterate meets this tolerance
        match solve_lasso(&a, &y, 1e-2, 1e-300, 1) {
            Err(UosError::NotConverged { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
