//! In-radius of the symmetrised convex hull `P(A) = {A b : ||b||_1 <= 1}`.
//!
//! For a symmetric body the in-radius is the minimum of the support function
//! `h(u) = max_j |a_j^T u|` over unit directions, and also the reciprocal of
//! the circumradius of the polar body `{lambda : ||A^T lambda||_inf <= 1}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result, UosError};
use crate::l1core::{solve_bp, L1Tolerances, SolveStatus};
use crate::linalg::{range_basis, thin_svd};
use crate::rng::{self, ns};

/// Largest dimension handled by polar-vertex enumeration.
pub const EXACT_MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum InradiusMethod {
    ExactPolarVertices,
    SampledUpperBound {
        samples: usize,
        seed: u64,
    },
    /// `1 / sqrt(sum_k h_polar(u_k)^2)` over an orthonormal basis, with each
    /// polar support value obtained from a basis-pursuit LP.
    PolarBoxLowerBound,
    /// Exact up to [`EXACT_MAX_DIM`], the box lower bound above it.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    UpperBound,
    LowerBound,
}

impl BoundKind {
    /// Whether the value can stand on the right of a sufficient condition.
    pub fn is_rigorous_lower(self) -> bool {
        matches!(self, BoundKind::Exact | BoundKind::LowerBound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inradius {
    pub value: f64,
    pub kind: BoundKind,
    /// Dimension of the space the body was measured in.
    pub dim: usize,
}

fn full_row_rank(a: &DMatrix<f64>) -> bool {
    let s = thin_svd(a).singular_values;
    s.len() == a.nrows() && !s.is_empty() && s[s.len() - 1] > 1e-10 * s[0]
}

/// In-radius of `P(A)` in `R^d`, `d = A.nrows()`.
///
/// The exact and lower-bound methods require the columns to span `R^d`;
/// otherwise the body has empty interior and a parameter error is returned.
pub fn inradius(a: &DMatrix<f64>, method: InradiusMethod) -> Result<Inradius> {
    let d = a.nrows();
    if d == 0 || a.ncols() == 0 {
        return param("in-radius of an empty body");
    }
    match method {
        InradiusMethod::SampledUpperBound { samples, seed } => Ok(Inradius {
            value: sampled_upper_bound(a, samples, seed)?,
            kind: BoundKind::UpperBound,
            dim: d,
        }),
        _ if !full_row_rank(a) => {
            param("columns do not span the space: the body has empty interior")
        }
        InradiusMethod::ExactPolarVertices => Ok(Inradius {
            value: 1.0 / polar_circumradius(a)?,
            kind: BoundKind::Exact,
            dim: d,
        }),
        InradiusMethod::PolarBoxLowerBound => Ok(Inradius {
            value: polar_box_lower_bound(a)?,
            kind: BoundKind::LowerBound,
            dim: d,
        }),
        InradiusMethod::Auto if d <= EXACT_MAX_DIM => {
            inradius(a, InradiusMethod::ExactPolarVertices)
        }
        InradiusMethod::Auto => inradius(a, InradiusMethod::PolarBoxLowerBound),
    }
}

/// In-radius of `P(A)` measured inside the span of the columns of `A`.
/// An all-zero `A` gives value 0 in dimension 0.
pub fn inradius_in_span(a: &DMatrix<f64>, method: InradiusMethod) -> Result<Inradius> {
    let basis = range_basis(a, 1e-14)?;
    if basis.ncols() == 0 {
        let kind = match method {
            InradiusMethod::SampledUpperBound { .. } => BoundKind::UpperBound,
            _ => BoundKind::Exact,
        };
        return Ok(Inradius {
            value: 0.0,
            kind,
            dim: 0,
        });
    }
    inradius(&basis.tr_mul(a), method)
}

/// `min_u max_j |a_j^T u|` over `samples` Gaussian directions drawn from a
/// fixed stream, so larger sample counts extend smaller ones.
pub fn sampled_upper_bound(a: &DMatrix<f64>, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return param("need at least one sample direction");
    }
    let d = a.nrows();
    let mut g = rng::stream(seed, ns::SPHERE);
    let mut best = f64::INFINITY;
    let mut u = DVector::zeros(d);
    for _ in 0..samples {
        for k in 0..d {
            u[k] = g.sample::<f64, _>(StandardNormal);
        }
        let nrm = u.norm();
        if nrm == 0.0 {
            continue;
        }
        u /= nrm;
        let mut h = 0.0f64;
        for col in a.column_iter() {
            h = h.max(col.dot(&u).abs());
            if h >= best {
                break;
            }
        }
        best = best.min(h);
    }
    Ok(best)
}

/// Visits every `k`-subset of `lo..m` in lexicographic order, prefixed by `head`.
fn for_each_subset(
    head: &mut Vec<usize>,
    lo: usize,
    m: usize,
    k: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if k == 0 {
        f(head);
        return;
    }
    for j in lo..=(m - k) {
        head.push(j);
        for_each_subset(head, j + 1, m, k - 1, f);
        head.pop();
    }
}

/// Circumradius of the polar body by enumerating its vertices: solutions of
/// `a_j^T lambda = s_j` over `d`-subsets and sign patterns that satisfy every
/// constraint within `1e-9`. Candidates no longer than the current best are
/// skipped before the feasibility scan, which does not change the maximum.
pub fn polar_circumradius(a: &DMatrix<f64>) -> Result<f64> {
    let (d, m) = a.shape();
    if d > EXACT_MAX_DIM {
        return param(format!(
            "vertex enumeration is limited to dimension {EXACT_MAX_DIM}, got {d}"
        ));
    }
    if m < d {
        return param("fewer columns than dimensions: the polar body is unbounded");
    }
    // sign patterns with the first sign fixed; the opposite vertex has the same norm
    let patterns: Vec<DVector<f64>> = (0..1usize << (d - 1))
        .map(|bits| {
            DVector::from_fn(d, |k, _| {
                if k > 0 && bits & (1 << (k - 1)) != 0 {
                    -1.0
                } else {
                    1.0
                }
            })
        })
        .collect();

    let best = (0..=(m - d))
        .into_par_iter()
        .map(|first| {
            let mut best_sq = 0.0f64;
            let mut last_violator = 0usize;
            let mut head = vec![first];
            for_each_subset(&mut head, first + 1, m, d - 1, &mut |subset| {
                let sub = DMatrix::from_fn(d, d, |r, c| a[(c, subset[r])]);
                let Some(lu) = Some(sub.lu()).filter(|lu| lu.is_invertible()) else {
                    return;
                };
                for s in &patterns {
                    let Some(lambda) = lu.solve(s) else { continue };
                    let nsq = lambda.norm_squared();
                    if !(nsq > best_sq) || !nsq.is_finite() {
                        continue;
                    }
                    if a.column(last_violator).dot(&lambda).abs() > 1.0 + 1e-9 {
                        continue;
                    }
                    let violator = (0..m).find(|&j| a.column(j).dot(&lambda).abs() > 1.0 + 1e-9);
                    match violator {
                        Some(j) => last_violator = j,
                        None => best_sq = nsq,
                    }
                }
            });
            best_sq
        })
        .reduce(|| 0.0, f64::max);
    if best == 0.0 {
        return Err(UosError::Numerical("no feasible polar vertex found".into()));
    }
    Ok(best.sqrt())
}

/// Rigorous lower bound on the in-radius for any dimension.
///
/// For every polar point `lambda` and unit `u`, `<u, lambda>` is at most the
/// minimal l1 norm of a representation of `u`, so `||lambda||^2` is at most
/// the sum of those values squared over an orthonormal basis. The basis is
/// the left singular vectors of `A`, which follow the shape of the body.
pub fn polar_box_lower_bound(a: &DMatrix<f64>) -> Result<f64> {
    let d = a.nrows();
    let basis = thin_svd(a).u;
    if basis.ncols() < d {
        return param("columns do not span the space");
    }
    let tol = L1Tolerances::default();
    let mut total = 0.0;
    for k in 0..d {
        let u = basis.column(k).into_owned();
        let sol = solve_bp(a, &u, &tol)?;
        if sol.status != SolveStatus::Optimal {
            return Err(UosError::Numerical(format!(
                "polar support LP failed in direction {k}"
            )));
        }
        // the primal value bounds the support from above; pad for the solver tolerance
        let h = sol.objective * (1.0 + 10.0 * tol.dual_gap_tol) + tol.dual_gap_tol;
        total += h * h;
    }
    Ok(1.0 / total.sqrt())
}
