//! Per-point sufficient conditions for SSC-LP to keep a point's
//! representation inside its own subspace, evaluated on concrete instances.
//!
//! A point is reported [`Verdict::Certified`] only when the right-hand side of
//! its condition is exact or a proven lower bound. A condition that passes
//! against a sampled upper bound is reported as not certified, with
//! `inconclusive` set.

pub mod inradius;

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result, UosError};
use crate::l1core::{solve_bp, solve_dual_direction, L1Tolerances, SolveStatus};
use crate::linalg::{inf_norm, pinv, range_basis, select_rows, spectral_norm, thin_svd};
use crate::model::{ObservationPattern, SubspaceEnsemble};
use crate::rng::{self, ns};

pub use inradius::{inradius, inradius_in_span, BoundKind, Inradius, InradiusMethod};

/// A subspace basis restricted to the rows `rows`, with the rows outside
/// `kept` zeroed, and its thin SVD `v = q diag(sigma) r^T`.
#[derive(Debug, Clone)]
pub struct RestrictedBasis {
    pub v: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub r: DMatrix<f64>,
    pub subspace: usize,
    pub rows: Vec<usize>,
    /// Rows of `rows` that are also observed in the second mask.
    pub kept: Vec<usize>,
}

impl RestrictedBasis {
    pub fn min_singular_value(&self) -> f64 {
        if self.sigma.len() < self.v.ncols() {
            return 0.0;
        }
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_full_column_rank(&self, tol: f64) -> bool {
        self.min_singular_value() > tol
    }
}

/// `I_{Omega_i} U` with the rows outside `Omega_j` zeroed. Both masks are
/// sorted row indices.
pub fn restricted_basis(
    u: &DMatrix<f64>,
    omega_i: &[usize],
    omega_j: &[usize],
    subspace: usize,
) -> RestrictedBasis {
    let mut v = select_rows(u, omega_i);
    let mut kept = Vec::with_capacity(omega_i.len());
    for (r, row) in omega_i.iter().enumerate() {
        if omega_j.binary_search(row).is_ok() {
            kept.push(*row);
        } else {
            v.row_mut(r).fill(0.0);
        }
    }
    let svd = thin_svd(&v);
    RestrictedBasis {
        q: svd.u,
        sigma: svd.singular_values,
        r: svd.v,
        v,
        subspace,
        rows: omega_i.to_vec(),
        kept,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
    HypothesisViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    /// Required gap in the strict inequalities.
    pub margin: f64,
    pub inradius: InradiusMethod,
    /// Singular values at or below this count as zero in rank hypotheses.
    pub rank_tol: f64,
    pub check_uniqueness: bool,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            margin: 1e-6,
            inradius: InradiusMethod::Auto,
            rank_tol: 1e-10,
            check_uniqueness: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRef {
    /// 1-based subspace of the offending point.
    pub subspace: usize,
    /// Global column index of the offending point.
    pub point: usize,
}

/// The operator-norm form of the Case 2 condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseCheck {
    pub max_lhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCertificate {
    pub point: usize,
    /// 1-based.
    pub subspace: usize,
    pub case: u8,
    pub verdict: Verdict,
    pub reason: Option<String>,
    /// The condition held against a right-hand side that is only an upper bound.
    pub inconclusive: bool,
    pub inradius: Option<Inradius>,
    pub max_lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub worst_pair: Option<PairRef>,
    pub dual_direction: Option<Vec<f64>>,
    pub dual_non_unique: bool,
    /// Triangle-split weight witnessing the tightest pair (Case 3).
    pub alpha: Option<f64>,
    /// Whether one weight serves every pair at once (Case 3).
    pub common_alpha: Option<bool>,
    pub worst_case: Option<WorstCaseCheck>,
    /// Direct check of the dual certificate on the observed rows (Case 3).
    pub lemma1_direct: Option<bool>,
    pub notes: Vec<String>,
}

impl PointCertificate {
    fn new(point: usize, subspace: usize, case: u8) -> Self {
        Self {
            point,
            subspace: subspace + 1,
            case,
            verdict: Verdict::NotCertified,
            reason: None,
            inconclusive: false,
            inradius: None,
            max_lhs: None,
            rhs: None,
            worst_pair: None,
            dual_direction: None,
            dual_non_unique: false,
            alpha: None,
            common_alpha: None,
            worst_case: None,
            lemma1_direct: None,
            notes: Vec::new(),
        }
    }

    fn violated(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::HypothesisViolated;
        self.reason = Some(why.into());
        self
    }

    fn not_certified(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::NotCertified;
        self.reason = Some(why.into());
        self
    }

    /// Applies `lhs < rhs - margin`, honouring the kind of the in-radius value.
    fn decide(mut self, passes: bool, rhs: &Inradius) -> Self {
        if !passes {
            return self.not_certified("condition violated");
        }
        if rhs.kind.is_rigorous_lower() {
            self.verdict = Verdict::Certified;
        } else {
            self.inconclusive = true;
            self =
                self.not_certified("condition holds only against an upper bound on the in-radius");
        }
        self
    }
}

fn same_subspace_others(ens: &SubspaceEnsemble, i: usize) -> (usize, usize, Vec<usize>) {
    let (l, local) = ens.locate(i);
    let offset = ens.offsets()[l];
    let others = (0..ens.points_per_subspace()[l])
        .filter(|&t| t != local)
        .map(|t| offset + t)
        .collect();
    (l, local, others)
}

fn coefficient_of(ens: &SubspaceEnsemble, global: usize) -> DVector<f64> {
    let (k, local) = ens.locate(global);
    ens.scaled_coefficient(k, local)
}

/// Solves for the dual direction and, when asked, tests whether it moves under
/// a tiny perturbation of the target.
fn dual_with_uniqueness(
    target: &DVector<f64>,
    dict: &DMatrix<f64>,
    opts: &CertifyOptions,
    point: usize,
) -> Result<(DVector<f64>, bool)> {
    let tol = L1Tolerances::default();
    let dir = solve_dual_direction(target, dict, &tol)?;
    let mut non_unique = false;
    if opts.check_uniqueness {
        let mut g = rng::stream(opts.seed, ns::PERTURB | point as u64);
        let mut e = DVector::from_fn(target.len(), |_, _| g.sample::<f64, _>(StandardNormal));
        e /= e.norm().max(f64::MIN_POSITIVE);
        if let Ok(moved) = solve_dual_direction(&(target + e * 1e-8), dict, &tol) {
            non_unique = (moved.lambda - &dir.lambda).norm() > 1e-4;
        }
    }
    Ok((dir.lambda, non_unique))
}

/// Maps a dual-direction failure to a report.
fn dual_failure(cert: PointCertificate, err: UosError) -> Result<PointCertificate> {
    match err {
        UosError::Infeasible(msg) => {
            Ok(cert.not_certified(format!("dual direction unbounded: {msg}")))
        }
        UosError::Numerical(msg) => {
            Ok(cert.not_certified(format!("dual direction LP failed: {msg}")))
        }
        other => Err(other),
    }
}

fn inradius_or_zero(a: &DMatrix<f64>, method: InradiusMethod) -> Result<Inradius> {
    match inradius(a, method) {
        Ok(r) => Ok(r),
        Err(UosError::Parameter(_)) => Ok(Inradius {
            value: 0.0,
            kind: BoundKind::Exact,
            dim: a.nrows(),
        }),
        Err(e) => Err(e),
    }
}

/// Scaled coefficient matrix of subspace `l` without column `local`.
fn coefficients_without(ens: &SubspaceEnsemble, l: usize, local: usize) -> DMatrix<f64> {
    let count = ens.points_per_subspace()[l];
    let cols: Vec<usize> = (0..count).filter(|&t| t != local).collect();
    DMatrix::from_fn(ens.subspace_dim, cols.len(), |r, c| {
        ens.coefficients[l][(r, cols[c])] * ens.scales[l][cols[c]]
    })
}

/// Same-support condition: every column observed on the same rows.
pub fn check_case1(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
    opts: &CertifyOptions,
) -> Result<PointCertificate> {
    let (l, local) = ens.locate(i);
    let d = ens.subspace_dim;
    let cert = PointCertificate::new(i, l, 1);
    let omega = pattern.mask(i);
    if pattern.masks().iter().any(|m| m != omega) {
        return Ok(cert.violated("masks differ between columns"));
    }
    if omega.len() < d {
        return Ok(cert.violated(format!("|Omega| = {} is below d = {d}", omega.len())));
    }
    let v_l = select_rows(&ens.bases[l], omega);
    let s = thin_svd(&v_l).singular_values;
    if s.len() < d || s[d - 1] <= opts.rank_tol {
        return Ok(cert.violated("restricted basis is rank deficient"));
    }

    let a_i = ens.scaled_coefficient(l, local);
    let a_rest = coefficients_without(ens, l, local);
    let rhs = inradius_or_zero(&a_rest, opts.inradius)?;
    let (lambda, non_unique) = match dual_with_uniqueness(&a_i, &a_rest, opts, i) {
        Ok(x) => x,
        Err(e) => return dual_failure(cert, e),
    };
    let mut cert = cert;
    cert.inradius = Some(rhs);
    cert.rhs = Some(rhs.value);
    cert.dual_direction = Some(lambda.iter().copied().collect());
    cert.dual_non_unique = non_unique;
    if rhs.value == 0.0 {
        return Ok(cert.not_certified("in-radius is zero"));
    }
    let lam_hat = &lambda / lambda.norm();

    let v_pinv = pinv(&v_l, 1e-12);
    let mut worst = (0.0f64, None);
    for k in (0..ens.num_subspaces()).filter(|&k| k != l) {
        let m = &v_pinv * select_rows(&ens.bases[k], omega);
        let row = lam_hat.tr_mul(&m);
        let offset = ens.offsets()[k];
        for j in 0..ens.points_per_subspace()[k] {
            let lhs = (&row * ens.scaled_coefficient(k, j))[0].abs();
            if lhs > worst.0 || worst.1.is_none() {
                worst = (
                    lhs,
                    Some(PairRef {
                        subspace: k + 1,
                        point: offset + j,
                    }),
                );
            }
        }
    }
    cert.max_lhs = Some(worst.0);
    cert.worst_pair = worst.1;
    Ok(cert.decide(worst.0 < rhs.value - opts.margin, &rhs))
}

/// `(A~_{-i}, a^_i, Q_i)` for point `i`: the same-subspace columns seen on the
/// rows of `Omega_i`, in the coordinates of the restricted subspace.
pub fn tilde_dictionary(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
) -> (DMatrix<f64>, DVector<f64>, RestrictedBasis) {
    let (l, local, others) = same_subspace_others(ens, i);
    let omega_i = pattern.mask(i);
    let own = restricted_basis(&ens.bases[l], omega_i, omega_i, l);
    let a_hat =
        DMatrix::from_diagonal(&own.sigma) * own.r.tr_mul(&ens.scaled_coefficient(l, local));
    let cols: Vec<DVector<f64>> = others
        .iter()
        .map(|&j| {
            let vij = restricted_basis(&ens.bases[l], omega_i, pattern.mask(j), l);
            own.q.tr_mul(&(vij.v * coefficient_of(ens, j)))
        })
        .collect();
    let tilde = if cols.is_empty() {
        DMatrix::zeros(own.q.ncols(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (tilde, a_hat.column(0).into_owned(), own)
}

/// Exactly-`d` observations for point `i`.
pub fn check_case2(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
    opts: &CertifyOptions,
) -> Result<PointCertificate> {
    let (l, _) = ens.locate(i);
    let d = ens.subspace_dim;
    let cert = PointCertificate::new(i, l, 2);
    let omega_i = pattern.mask(i);
    if omega_i.len() != d {
        return Ok(cert.violated(format!("|Omega_i| = {} but d = {d}", omega_i.len())));
    }
    let (tilde, a_hat, own) = tilde_dictionary(ens, pattern, i);
    if !own.has_full_column_rank(opts.rank_tol) {
        return Ok(cert.violated("Q_i is not invertible"));
    }
    let mut cert = cert;
    if tilde.ncols() == 0 {
        return Ok(cert.not_certified("no other point in the subspace"));
    }
    let rhs = inradius_or_zero(&tilde, opts.inradius)?;
    cert.inradius = Some(rhs);
    cert.rhs = Some(rhs.value);
    if rhs.value == 0.0 {
        return Ok(cert.not_certified("in-radius is zero"));
    }
    let (lambda, non_unique) = match dual_with_uniqueness(&a_hat, &tilde, opts, i) {
        Ok(x) => x,
        Err(e) => return dual_failure(cert, e),
    };
    cert.dual_direction = Some(lambda.iter().copied().collect());
    cert.dual_non_unique = non_unique;
    let lam_hat = &lambda / lambda.norm();

    let mut worst = (0.0f64, None);
    let mut worst_op = 0.0f64;
    for k in (0..ens.num_subspaces()).filter(|&k| k != l) {
        let offset = ens.offsets()[k];
        for j in 0..ens.points_per_subspace()[k] {
            let g = offset + j;
            let vkj = restricted_basis(&ens.bases[k], omega_i, pattern.mask(g), k);
            let m = own.q.tr_mul(&vkj.v);
            let a_j = ens.scaled_coefficient(k, j);
            let lhs = lam_hat.dot(&(&m * &a_j)).abs();
            if lhs > worst.0 || worst.1.is_none() {
                worst = (
                    lhs,
                    Some(PairRef {
                        subspace: k + 1,
                        point: g,
                    }),
                );
            }
            worst_op = worst_op.max(spectral_norm(&m) * a_j.norm());
        }
    }
    cert.max_lhs = Some(worst.0);
    cert.worst_pair = worst.1;
    cert.worst_case = Some(WorstCaseCheck {
        max_lhs: worst_op,
        holds: worst_op < rhs.value - opts.margin,
    });
    Ok(cert.decide(worst.0 < rhs.value - opts.margin, &rhs))
}

/// Same-subspace zero-filled columns other than `i`, restricted to `Omega_i`.
fn own_body(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let (l, local, others) = same_subspace_others(ens, i);
    let omega_i = pattern.mask(i);
    let x_i = select_rows(&ens.bases[l], omega_i) * ens.scaled_coefficient(l, local);
    let cols: Vec<DVector<f64>> = others
        .iter()
        .map(|&j| {
            restricted_basis(&ens.bases[l], omega_i, pattern.mask(j), l).v * coefficient_of(ens, j)
        })
        .collect();
    let body = if cols.is_empty() {
        DMatrix::zeros(omega_i.len(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (body, x_i.column(0).into_owned(), others)
}

/// More than `d` observations for point `i`.
///
/// The in-radius is that of the symmetrised hull of the same-subspace columns
/// on `Omega_i`, measured inside their span. A pair passes when
/// `(T1 + T2) ||a_j|| / r < 1 - margin`, which is exactly when some split
/// weight in `[0, 1]` satisfies both triangle-inequality conditions.
pub fn check_case3(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
    opts: &CertifyOptions,
) -> Result<PointCertificate> {
    let (l, _) = ens.locate(i);
    let d = ens.subspace_dim;
    let mut cert = PointCertificate::new(i, l, 3);
    cert.notes
        .push("both conditions use the untransposed same-subspace body".into());
    let omega_i = pattern.mask(i);
    if omega_i.len() <= d {
        return Ok(cert.violated(format!(
            "|Omega_i| = {} is not above d = {d}",
            omega_i.len()
        )));
    }
    let own = restricted_basis(&ens.bases[l], omega_i, omega_i, l);
    if !own.has_full_column_rank(opts.rank_tol) {
        return Ok(cert.violated("Q_i does not have full column rank"));
    }
    let (body, x_i, _) = own_body(ens, pattern, i);
    if body.ncols() == 0 {
        return Ok(cert.not_certified("no other point in the subspace"));
    }
    let own_lp = solve_bp(&body, &x_i, &L1Tolerances::default())?;
    if own_lp.status != SolveStatus::Optimal {
        return Ok(cert
            .not_certified("point is not representable by its own subspace on its observed rows"));
    }
    let rhs = inradius_in_span(&body, opts.inradius)?;
    cert.inradius = Some(rhs);
    cert.rhs = Some(rhs.value);
    if rhs.value == 0.0 {
        return Ok(cert.not_certified("in-radius is zero"));
    }

    // dual certificate projected on the span of the body, for the direct check
    let span = range_basis(&body, 1e-14)?;
    let nu = own_lp.dual.as_ref().map(|nu| &span * span.tr_mul(nu));

    let q = &own.q;
    let mut worst = (f64::NEG_INFINITY, None, 0.0, 0.0);
    let (mut max_t1, mut max_t2) = (0.0f64, 0.0f64);
    let mut direct_ok = nu.is_some();
    for k in (0..ens.num_subspaces()).filter(|&k| k != l) {
        let offset = ens.offsets()[k];
        for j in 0..ens.points_per_subspace()[k] {
            let g = offset + j;
            let vkj = restricted_basis(&ens.bases[k], omega_i, pattern.mask(g), k).v;
            let a_norm = ens.scales[k][j] * ens.coefficients[k].column(j).norm();
            let proj = q.tr_mul(&vkj);
            let t1 = spectral_norm(&proj) * a_norm / rhs.value;
            let t2 = spectral_norm(&(&vkj - q * &proj)) * a_norm / rhs.value;
            max_t1 = max_t1.max(t1);
            max_t2 = max_t2.max(t2);
            if t1 + t2 > worst.0 {
                worst = (
                    t1 + t2,
                    Some(PairRef {
                        subspace: k + 1,
                        point: g,
                    }),
                    t1,
                    t2,
                );
            }
            if let Some(nu) = &nu {
                let x_j = vkj * ens.scaled_coefficient(k, j);
                direct_ok &= nu.dot(&x_j).abs() < 1.0 - opts.margin;
            }
        }
    }
    let (score, pair, t1, t2) = worst;
    cert.max_lhs = Some(score * rhs.value);
    cert.worst_pair = pair;
    cert.lemma1_direct = Some(direct_ok);
    let passes = score < 1.0 - opts.margin;
    if passes {
        cert.alpha = triangle_split(t1, t2);
    }
    cert.common_alpha = Some(max_t1 + max_t2 < 1.0 - opts.margin);
    Ok(cert.decide(passes, &rhs))
}

/// A weight `alpha` in `[0, 1]` with `t1 < alpha` and `t2 <= 1 - alpha`, for
/// in-radius-normalised `t1, t2 >= 0`. One exists iff `t1 + t2 < 1`; the
/// midpoint of the feasible interval is returned.
pub fn triangle_split(t1: f64, t2: f64) -> Option<f64> {
    (t1 >= 0.0 && t2 >= 0.0 && t1 + t2 < 1.0).then_some(t1 + 0.5 * (1.0 - t1 - t2))
}

/// Dispatches on the number of observations of point `i`: all masks equal
/// gives Case 1, exactly `d` rows Case 2, more Case 3.
pub fn check_point(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
    opts: &CertifyOptions,
) -> Result<PointCertificate> {
    let first = pattern.mask(0);
    if pattern.masks().iter().all(|m| m == first) {
        check_case1(ens, pattern, i, opts)
    } else if pattern.mask(i).len() == ens.subspace_dim {
        check_case2(ens, pattern, i, opts)
    } else {
        check_case3(ens, pattern, i, opts)
    }
}

/// The dual-certificate condition of the support lemma.
///
/// With `S` containing the support of a feasible `c`, `S` inside `T`: if
/// `A_S^T nu = sign(c_S)`, `||A_{T \ S}^T nu||_inf <= 1` and
/// `||A_{T^c}^T nu||_inf < 1`, every l1-minimal representation of `y` is
/// supported in `T`.
pub fn check_lemma1(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
    nu: &DVector<f64>,
    s: &[usize],
    t: &[usize],
    tol: f64,
) -> Result<bool> {
    let m = a.ncols();
    if c.len() != m || y.len() != a.nrows() || nu.len() != a.nrows() {
        return param("dimension mismatch in the certificate triple");
    }
    if s.iter().chain(t).any(|&j| j >= m) {
        return param("support index out of range");
    }
    if !s.iter().all(|j| t.contains(j)) {
        return param("S must be contained in T");
    }
    if (a * c - y).norm() > tol {
        return param("c does not represent y");
    }
    if (0..m).any(|j| !s.contains(&j) && c[j].abs() > tol) {
        return param("c is supported outside S");
    }
    let corr = a.tr_mul(nu);
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let on_s = s.iter().all(|&j| (corr[j] - sign(c[j])).abs() <= tol);
    let on_t = t
        .iter()
        .filter(|j| !s.contains(j))
        .all(|&j| corr[j].abs() <= 1.0 + tol);
    let off_t = (0..m)
        .filter(|j| !t.contains(j))
        .all(|j| corr[j].abs() < 1.0 - tol);
    Ok(on_s && on_t && off_t)
}

/// The restricted SSC-LP problem of point `i` with a certificate built from
/// its own subspace: `a` holds all other columns on `Omega_i` (global order
/// with `i` removed), `t` the same-subspace positions in `a`.
#[derive(Debug, Clone)]
pub struct Lemma1Triple {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub c: DVector<f64>,
    pub nu: DVector<f64>,
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    /// Global column index of each column of `a`.
    pub columns: Vec<usize>,
}

/// Builds the triple from the within-subspace LP. `None` when that LP has no
/// certified solution.
pub fn lemma1_triple(
    ens: &SubspaceEnsemble,
    pattern: &ObservationPattern,
    i: usize,
) -> Result<Option<Lemma1Triple>> {
    let (body, y, own_cols) = own_body(ens, pattern, i);
    if body.ncols() == 0 {
        return Ok(None);
    }
    let sol = solve_bp(&body, &y, &L1Tolerances::default())?;
    let Some(nu) = sol.dual.filter(|_| sol.status == SolveStatus::Optimal) else {
        return Ok(None);
    };
    let span = range_basis(&body, 1e-14)?;
    let nu = &span * span.tr_mul(&nu);

    let omega_i = pattern.mask(i);
    let full = ens.full_matrix();
    let columns: Vec<usize> = (0..ens.num_points()).filter(|&j| j != i).collect();
    let a = DMatrix::from_fn(omega_i.len(), columns.len(), |r, c| {
        let j = columns[c];
        if pattern.mask(j).binary_search(&omega_i[r]).is_ok() {
            full[(omega_i[r], j)]
        } else {
            0.0
        }
    });
    let t: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, j)| own_cols.contains(j))
        .map(|(p, _)| p)
        .collect();
    let mut c = DVector::zeros(columns.len());
    let mut s = Vec::new();
    for (k, &p) in t.iter().enumerate() {
        c[p] = sol.coefficients[k];
        if sol.coefficients[k] != 0.0 {
            s.push(p);
        }
    }
    Ok(Some(Lemma1Triple {
        a,
        y,
        c,
        nu,
        s,
        t,
        columns,
    }))
}

/// `||pinv(V_Omega^l) V_Omega^k||_F / d`, the mean-square size of the Case 1
/// left-hand side for uniformly random directions and coefficients.
pub fn coherence_diagnostic(
    ens: &SubspaceEnsemble,
    omega: &[usize],
    l: usize,
    k: usize,
) -> Result<f64> {
    let d = ens.subspace_dim;
    let v_l = select_rows(&ens.bases[l], omega);
    let s = thin_svd(&v_l).singular_values;
    if s.len() < d || s[d - 1] <= 1e-12 * s[0] {
        let cond = if s.len() < d {
            f64::INFINITY
        } else {
            s[0] / s[d - 1]
        };
        return param(format!(
            "restricted basis of subspace {} is rank deficient (condition number {cond:e})",
            l + 1
        ));
    }
    let m = pinv(&v_l, 1e-12) * select_rows(&ens.bases[k], omega);
    Ok(m.norm() / d as f64)
}

/// Writes one JSON object per line.
pub fn write_reports_jsonl(path: &Path, reports: &[PointCertificate]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Whether the largest out-of-subspace coefficient of `c` (column `i` of a
/// coefficient matrix, global indexing) stays at or below `threshold`.
pub fn support_in_subspace(
    ens: &SubspaceEnsemble,
    c: &DVector<f64>,
    i: usize,
    threshold: f64,
) -> bool {
    let (l, _) = ens.locate(i);
    let labels = ens.labels();
    let cross: Vec<f64> = (0..c.len())
        .filter(|&j| labels[j] != l + 1)
        .map(|j| c[j].abs())
        .collect();
    inf_norm(&DVector::from_vec(cross)) <= threshold
}
