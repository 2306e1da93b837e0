use nalgebra::{DMatrix, DVector};

use super::{L1Solution, SolveStatus};
use crate::error::{param, Result};
use crate::linalg::{l1_norm, thin_svd};

/// Exhaustive basis-pursuit oracle for desk-scale instances.
///
/// Enumerates every support of size at most `max_support` whose columns are
/// linearly independent, solves the least-squares subproblem and keeps the
/// exactly feasible solution of least l1 norm. With `max_support = rows` this
/// is exact, since some optimal solution is basic.
pub fn brute_force_l1(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    max_support: usize,
) -> Result<L1Solution> {
    let (r, m) = a.shape();
    if m > 15 {
        return param(format!("brute force limited to 15 columns, got {m}"));
    }
    if max_support > r {
        return param(format!("max_support {max_support} exceeds the {r} rows"));
    }
    if y.len() != r {
        return param(format!("rhs has length {} but A has {r} rows", y.len()));
    }
    let feas = 1e-9 * (1.0 + y.norm());
    let mut best: Option<(f64, DVector<f64>)> = None;
    if y.norm() == 0.0 {
        best = Some((0.0, DVector::zeros(m)));
    }

    for bits in 1u32..(1u32 << m) {
        let size = bits.count_ones() as usize;
        if size > max_support {
            continue;
        }
        let support: Vec<usize> = (0..m).filter(|j| bits & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(r, size, |i, k| a[(i, support[k])]);
        let svd = thin_svd(&sub);
        let smax = svd.singular_values[0];
        let smin = svd.singular_values[size.min(r) - 1];
        if size > r || smax == 0.0 || smin <= 1e-10 * smax {
            continue;
        }
        // least squares on the full-column-rank support
        let cs = &svd.v * svd.u.tr_mul(y).component_div(&svd.singular_values);
        if (&sub * &cs - y).norm() > feas {
            continue;
        }
        let mut c = DVector::zeros(m);
        for (k, &j) in support.iter().enumerate() {
            c[j] = cs[k];
        }
        let obj = l1_norm(&c);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, c));
        }
    }

    Ok(match best {
        Some((objective, coefficients)) => L1Solution {
            coefficients,
            objective,
            dual: None,
            status: SolveStatus::Optimal,
        },
        None => L1Solution {
            coefficients: DVector::zeros(m),
            objective: f64::NAN,
            dual: None,
            status: SolveStatus::Infeasible,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_representation() {
        let a = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let sol = brute_force_l1(&a, &y, 3).unwrap();
        assert_eq!(sol.coefficients, y);
    }

    #[test]
    fn zero_rhs() {
        let a = DMatrix::from_element(2, 4, 1.0);
        let sol = brute_force_l1(&a, &DVector::zeros(2), 2).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.coefficients, DVector::zeros(4));
    }

    #[test]
    fn size_limits() {
        assert!(brute_force_l1(&DMatrix::zeros(2, 16), &DVector::zeros(2), 2).is_err());
        assert!(brute_force_l1(&DMatrix::zeros(2, 4), &DVector::zeros(2), 3).is_err());
    }
}
