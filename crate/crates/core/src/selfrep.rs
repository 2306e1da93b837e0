//! Self-representation and affinity matrices: SSC-LP, SSC-EWZF and TSC.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result, UosError};
use crate::l1core::{solve_bp, solve_lasso, L1Tolerances, SolveStatus};
use crate::model::ObservedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ssc-lp")]
    SscLp,
    #[serde(rename = "ssc-ewzf")]
    SscEwzf,
    #[serde(rename = "tsc")]
    Tsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::SscLp, Algorithm::SscEwzf, Algorithm::Tsc];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SscLp => "ssc-lp",
            Algorithm::SscEwzf => "ssc-ewzf",
            Algorithm::Tsc => "tsc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = UosError;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UosError::Parameter(format!("unknown algorithm {s:?}")))
    }
}

/// The `N x N` self-representation matrix, column `i` representing point `i`.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    pub c: DMatrix<f64>,
    pub statuses: Vec<SolveStatus>,
    pub algorithm: Algorithm,
    pub parameters: BTreeMap<String, f64>,
}

impl CoefficientMatrix {
    pub fn failure_count(&self) -> usize {
        self.statuses
            .iter()
            .filter(|s| **s != SolveStatus::Optimal)
            .count()
    }

    /// Writes `coeffs.csv` (dense, headerless) and `coeffs_meta.json`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(dir.join("coeffs.csv"))?;
        for r in 0..self.c.nrows() {
            w.write_record(self.c.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        let meta = CoefficientMeta {
            algorithm: self.algorithm,
            parameters: self.parameters.clone(),
            statuses: self.statuses.clone(),
            failures: self.failure_count(),
        };
        serde_json::to_writer_pretty(std::fs::File::create(dir.join("coeffs_meta.json"))?, &meta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientMeta {
    pub algorithm: Algorithm,
    pub parameters: BTreeMap<String, f64>,
    pub statuses: Vec<SolveStatus>,
    pub failures: usize,
}

/// Dictionary of the zero-filled columns other than `i`, restricted to the
/// rows observed in column `i`, together with the restricted target.
fn restricted_problem(ds: &ObservedDataset, i: usize) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let rows = ds.pattern.mask(i);
    let n_pts = ds.num_points();
    let others: Vec<usize> = (0..n_pts).filter(|&j| j != i).collect();
    let dict = DMatrix::from_fn(rows.len(), others.len(), |r, k| {
        ds.zero_filled[(rows[r], others[k])]
    });
    let y = ds.restricted_column(i, rows);
    (dict, y, others)
}

fn assemble(
    n_pts: usize,
    columns: Vec<(DVector<f64>, Vec<usize>, SolveStatus)>,
) -> (DMatrix<f64>, Vec<SolveStatus>) {
    let mut c = DMatrix::zeros(n_pts, n_pts);
    let mut statuses = Vec::with_capacity(n_pts);
    for (i, (coef, others, status)) in columns.into_iter().enumerate() {
        for (k, &j) in others.iter().enumerate() {
            c[(j, i)] = coef[k];
        }
        statuses.push(status);
    }
    (c, statuses)
}

/// Solves one SSC-LP column. Returns the coefficients over `others`.
pub fn ssc_lp_column(
    ds: &ObservedDataset,
    i: usize,
    normalize_columns: bool,
    tol: &L1Tolerances,
) -> Result<(DVector<f64>, Vec<usize>, SolveStatus)> {
    let (mut dict, mut y, others) = restricted_problem(ds, i);
    let norms: Vec<f64> = dict.column_iter().map(|c| c.norm()).collect();
    if norms.iter().all(|&v| v == 0.0) {
        log::warn!("column {i}: empty effective dictionary");
        return Ok((
            DVector::zeros(others.len()),
            others,
            SolveStatus::NumericalFailure,
        ));
    }
    let y_norm = y.norm();
    if normalize_columns {
        for (k, &nk) in norms.iter().enumerate() {
            if nk > 0.0 {
                dict.column_mut(k).scale_mut(1.0 / nk);
            }
        }
        if y_norm > 0.0 {
            y /= y_norm;
        }
    }
    let sol = solve_bp(&dict, &y, tol)?;
    if sol.status != SolveStatus::Optimal {
        return Ok((DVector::zeros(others.len()), others, sol.status));
    }
    let mut coef = sol.coefficients;
    if normalize_columns {
        for (k, &nk) in norms.iter().enumerate() {
            coef[k] = if nk > 0.0 { coef[k] * y_norm / nk } else { 0.0 };
        }
    }
    Ok((coef, others, SolveStatus::Optimal))
}

/// SSC-LP coefficients: for each point, the minimum-l1 representation of its
/// observed entries by the other zero-filled points restricted to the same rows.
pub fn ssc_lp_coefficients(
    ds: &ObservedDataset,
    normalize_columns: bool,
    tol: &L1Tolerances,
) -> Result<CoefficientMatrix> {
    let n_pts = ds.num_points();
    if n_pts < 2 {
        return param("need at least two points");
    }
    let columns = (0..n_pts)
        .into_par_iter()
        .map(|i| ssc_lp_column(ds, i, normalize_columns, tol))
        .collect::<Result<Vec<_>>>()?;
    let (c, statuses) = assemble(n_pts, columns);
    let mut parameters = BTreeMap::new();
    parameters.insert(
        "normalize_columns".into(),
        if normalize_columns { 1.0 } else { 0.0 },
    );
    parameters.insert("feas_tol".into(), tol.feas_tol);
    parameters.insert("dual_gap_tol".into(), tol.dual_gap_tol);
    let out = CoefficientMatrix {
        c,
        statuses,
        algorithm: Algorithm::SscLp,
        parameters,
    };
    if out.failure_count() > 0 {
        log::info!(
            "ssc-lp: {} of {n_pts} columns not optimal",
            out.failure_count()
        );
    }
    Ok(out)
}

/// How the Gram normaliser `mu` of the EWZF weight is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EwzfScale {
    /// `min_i max_{j != i} |x_i^T x_j|`: every column keeps a nonzero
    /// representation whenever `alpha > 1`.
    #[default]
    ColumnMinMax,
    /// `max_{i != j} |x_i^T x_j|`.
    GlobalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EwzfParams {
    pub alpha: f64,
    pub scale: EwzfScale,
    /// KKT tolerance relative to the l1 weight.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EwzfParams {
    fn default() -> Self {
        Self {
            alpha: 7.34,
            scale: EwzfScale::ColumnMinMax,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

/// Largest off-diagonal magnitude of the Gram matrix of the zero-filled data.
pub fn max_offdiag_gram(ds: &ObservedDataset) -> f64 {
    column_max_correlations(ds).into_iter().fold(0.0, f64::max)
}

/// `max_{j != i} |x_i^T x_j|` for every column `i`.
pub fn column_max_correlations(ds: &ObservedDataset) -> Vec<f64> {
    let g = ds.zero_filled.tr_mul(&ds.zero_filled);
    let n = g.nrows();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| g[(j, i)].abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// The Gram normaliser `mu` under `scale`. Columns with no correlation at all
/// are skipped by the min-max rule; `None` when every entry vanishes.
pub fn ewzf_mu(ds: &ObservedDataset, scale: EwzfScale) -> Option<f64> {
    let per_col = column_max_correlations(ds);
    let mu = match scale {
        EwzfScale::GlobalMax => per_col.iter().copied().fold(0.0, f64::max),
        EwzfScale::ColumnMinMax => per_col
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min),
    };
    (mu > 0.0 && mu.is_finite()).then_some(mu)
}

/// SSC-EWZF coefficients. The data-fidelity weight is `lambda = alpha / mu`,
/// so each column solves the lasso with l1 weight `mu / alpha`. The fit term
/// only involves the rows observed in the target column.
pub fn ssc_ewzf_coefficients(
    ds: &ObservedDataset,
    params: &EwzfParams,
) -> Result<CoefficientMatrix> {
    let n_pts = ds.num_points();
    if n_pts < 2 {
        return param("need at least two points");
    }
    let alpha = params.alpha;
    if !(alpha > 0.0) {
        return param(format!("alpha must be positive, got {alpha}"));
    }
    let Some(mu) = ewzf_mu(ds, params.scale) else {
        return param("all off-diagonal Gram entries vanish; the lasso weight is undefined");
    };
    let l1_weight = mu / alpha;
    let abs_tol = params.tol * l1_weight;

    let columns = (0..n_pts)
        .into_par_iter()
        .map(|i| {
            let (dict, y, others) = restricted_problem(ds, i);
            match solve_lasso(&dict, &y, l1_weight, abs_tol, params.max_sweeps) {
                Ok(sol) => Ok((sol.coefficients, others, SolveStatus::Optimal)),
                Err(UosError::NotConverged { residual, .. }) => {
                    log::warn!("ssc-ewzf column {i}: lasso stopped with residual {residual:e}");
                    Ok((
                        DVector::zeros(others.len()),
                        others,
                        SolveStatus::NumericalFailure,
                    ))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, statuses) = assemble(n_pts, columns);
    let mut parameters = BTreeMap::new();
    parameters.insert("alpha".into(), alpha);
    parameters.insert("mu".into(), mu);
    parameters.insert("lambda".into(), alpha / mu);
    parameters.insert("l1_weight".into(), l1_weight);
    parameters.insert("tol".into(), params.tol);
    parameters.insert(
        "global_max_scale".into(),
        if params.scale == EwzfScale::GlobalMax {
            1.0
        } else {
            0.0
        },
    );
    Ok(CoefficientMatrix {
        c,
        statuses,
        algorithm: Algorithm::SscEwzf,
        parameters,
    })
}

/// `round(sqrt(N_l ln N_l))`, clamped to `[1, N - 1]`.
pub fn tsc_neighbors(points_per_subspace: usize, num_points: usize) -> usize {
    let nl = points_per_subspace.max(1) as f64;
    let q = (nl * nl.ln()).sqrt().round() as usize;
    q.clamp(1, num_points.saturating_sub(1).max(1))
}

#[derive(Debug, Clone)]
pub struct TscAffinity {
    pub weights: DMatrix<f64>,
    pub neighbors: usize,
    /// Columns with no nonzero observation.
    pub zero_columns: Vec<usize>,
}

/// Thresholded absolute correlations of the normalised zero-filled columns:
/// each column keeps its `q` largest correlations, then `W = max(W, W^T)`.
/// Kept correlations are used as raw weights.
pub fn tsc_affinity(ds: &ObservedDataset, q: usize) -> Result<TscAffinity> {
    let n_pts = ds.num_points();
    if q == 0 || q >= n_pts {
        return param(format!(
            "neighbour count {q} must lie in [1, N-1] for N = {n_pts}"
        ));
    }
    let mut x = ds.zero_filled.clone();
    let mut zero_columns = Vec::new();
    for j in 0..n_pts {
        let nrm = x.column(j).norm();
        if nrm > 0.0 {
            x.column_mut(j).scale_mut(1.0 / nrm);
        } else {
            zero_columns.push(j);
        }
    }
    if !zero_columns.is_empty() {
        log::warn!(
            "tsc: {} columns have no nonzero observations",
            zero_columns.len()
        );
    }
    let corr = x.tr_mul(&x);
    let mut w = DMatrix::zeros(n_pts, n_pts);
    let mut order: Vec<usize> = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        order.clear();
        order.extend((0..n_pts).filter(|&j| j != i));
        // stable sort keeps index order among ties
        order.sort_by(|&a, &b| corr[(b, i)].abs().total_cmp(&corr[(a, i)].abs()));
        for &j in order.iter().take(q) {
            w[(j, i)] = corr[(j, i)].abs();
        }
    }
    let sym = DMatrix::from_fn(n_pts, n_pts, |r, c| w[(r, c)].max(w[(c, r)]));
    Ok(TscAffinity {
        weights: sym,
        neighbors: q,
        zero_columns,
    })
}

/// `|C| + |C|^T`.
pub fn affinity_from_coefficients(c: &CoefficientMatrix) -> DMatrix<f64> {
    let a = c.c.abs();
    &a + a.transpose()
}
