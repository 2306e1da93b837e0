//! Matrix completion by singular value thresholding, one cluster at a time.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result, UosError};
use crate::linalg::thin_svd;
use crate::model::ObservedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvtParams {
    /// Threshold; `None` means `5 sqrt(rows cols)`.
    pub tau: Option<f64>,
    /// Step size; `None` means `1.2 rows cols / |Omega|`.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvtParams {
    fn default() -> Self {
        Self {
            tau: None,
            delta: None,
            tol: 1e-4,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvtOutcome {
    pub matrix: DMatrix<f64>,
    pub iterations: usize,
    /// `||P(M - Z)||_F / ||P(M)||_F` at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Soft-thresholds the singular values of `y` by `tau`.
pub fn shrink(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = thin_svd(y);
    let keep = svd.singular_values.iter().take_while(|&&s| s > tau).count();
    let mut z = DMatrix::zeros(y.nrows(), y.ncols());
    for k in 0..keep {
        let s = svd.singular_values[k] - tau;
        z.ger(s, &svd.u.column(k), &svd.v.column(k), 1.0);
    }
    z
}

/// SVT on `observed` restricted to the 0/1 `indicator`. Entries outside
/// the mask are ignored.
pub fn svt_complete(
    observed: &DMatrix<f64>,
    indicator: &DMatrix<f64>,
    params: &SvtParams,
) -> Result<SvtOutcome> {
    let (rows, cols) = observed.shape();
    if indicator.shape() != (rows, cols) {
        return param("mask shape does not match the observed matrix");
    }
    let count = indicator.iter().filter(|&&v| v != 0.0).count();
    if count == 0 {
        return param("mask is empty");
    }
    let pm = observed.component_mul(indicator);
    let pm_norm = pm.norm();
    if pm_norm == 0.0 {
        return Ok(SvtOutcome {
            matrix: DMatrix::zeros(rows, cols),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let size = (rows * cols) as f64;
    let tau = params.tau.unwrap_or(5.0 * size.sqrt());
    let delta = params.delta.unwrap_or(1.2 * size / count as f64);
    if !(tau > 0.0) || !(delta > 0.0) {
        return param(format!(
            "SVT needs positive tau and delta, got {tau} and {delta}"
        ));
    }

    // kicking: skip the iterations where the shrinkage is identically zero
    let k0 = (tau / (delta * thin_svd(&pm).singular_values[0]))
        .ceil()
        .max(1.0);
    let mut y = &pm * (k0 * delta);
    let mut best: Option<(f64, DMatrix<f64>, usize)> = None;
    let mut first_residual = None;
    for it in 1..=params.max_iter {
        let z = shrink(&y, tau);
        let diff = (&pm - &z).component_mul(indicator);
        let residual = diff.norm() / pm_norm;
        if !residual.is_finite() {
            return Err(UosError::Numerical(format!(
                "SVT produced a non-finite residual at iteration {it}"
            )));
        }
        let initial = *first_residual.get_or_insert(residual);
        if residual > 10.0 * initial.max(1.0) {
            return Err(UosError::Numerical(format!(
                "SVT diverged: residual {residual:e} at iteration {it}, initial {initial:e}"
            )));
        }
        if residual <= params.tol {
            return Ok(SvtOutcome {
                matrix: z,
                iterations: it,
                residual,
                converged: true,
            });
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, z, it));
        }
        y += diff * delta;
    }
    let (residual, matrix, iterations) = best.expect("at least one iteration");
    log::debug!(
        "SVT stopped after {} iterations at residual {residual:e}",
        params.max_iter
    );
    Ok(SvtOutcome {
        matrix,
        iterations,
        residual,
        converged: false,
    })
}

/// Rank at the largest ratio of consecutive singular values. Values below
/// `1e-10 * sigma_1` count as zero, and a drop to zero beats any ratio.
pub fn estimate_rank(m: &DMatrix<f64>) -> usize {
    let all = thin_svd(m).singular_values;
    let floor = all.iter().copied().next().unwrap_or(0.0) * 1e-10;
    let s: Vec<f64> = all.iter().copied().filter(|&v| v > floor).collect();
    if s.len() < all.len() {
        return s.len();
    }
    let mut best = (0.0, s.len());
    for i in 0..s.len().saturating_sub(1) {
        let ratio = s[i] / s[i + 1];
        if ratio > best.0 {
            best = (ratio, i + 1);
        }
    }
    best.1
}

#[derive(Debug, Clone)]
pub struct ClusterCompletion {
    pub label: usize,
    pub columns: Vec<usize>,
    /// Top left singular vectors of the completed cluster, up to `d` of them.
    pub basis: DMatrix<f64>,
    pub rank_deficient: bool,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub recovered: DMatrix<f64>,
    pub clusters: Vec<ClusterCompletion>,
}

impl CompletionResult {
    pub fn all_converged(&self) -> bool {
        self.clusters.iter().all(|c| c.converged)
    }
}

/// Completes each predicted cluster separately. Labels are 1-based; labels
/// in `1..=num_clusters` with no points yield an empty, rank-deficient entry.
pub fn complete_by_cluster(
    ds: &ObservedDataset,
    labels: &[usize],
    num_clusters: usize,
    d: usize,
    params: &SvtParams,
) -> Result<CompletionResult> {
    let (n, n_pts) = (ds.ambient_dim(), ds.num_points());
    if labels.len() != n_pts {
        return param(format!("{} labels for {n_pts} points", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > num_clusters) {
        return param(format!("label {bad} outside 1..={num_clusters}"));
    }
    let indicator = ds.pattern.indicator();
    let clusters = (1..=num_clusters)
        .into_par_iter()
        .map(|label| {
            let columns: Vec<usize> = (0..n_pts).filter(|&j| labels[j] == label).collect();
            if columns.is_empty() {
                log::warn!("cluster {label} is empty");
                return Ok((
                    ClusterCompletion {
                        label,
                        columns,
                        basis: DMatrix::zeros(n, 0),
                        rank_deficient: true,
                        iterations: 0,
                        residual: 0.0,
                        converged: true,
                    },
                    DMatrix::zeros(n, 0),
                ));
            }
            let obs = ds.zero_filled.select_columns(&columns);
            let ind = indicator.select_columns(&columns);
            let out = svt_complete(&obs, &ind, params)?;
            let svd = thin_svd(&out.matrix);
            let k = d.min(svd.u.ncols());
            let nonzero = svd
                .singular_values
                .iter()
                .take(k)
                .filter(|&&s| s > 0.0)
                .count();
            let rank_deficient = columns.len() < d || nonzero < d;
            Ok((
                ClusterCompletion {
                    label,
                    columns,
                    basis: svd.u.columns(0, nonzero).into_owned(),
                    rank_deficient,
                    iterations: out.iterations,
                    residual: out.residual,
                    converged: out.converged,
                },
                out.matrix,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut recovered = DMatrix::zeros(n, n_pts);
    let mut reports = Vec::with_capacity(clusters.len());
    for (report, block) in clusters {
        for (k, &j) in report.columns.iter().enumerate() {
            recovered.set_column(j, &block.column(k));
        }
        reports.push(report);
    }
    Ok(CompletionResult {
        recovered,
        clusters: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_case1, sample_case3, zero_fill};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
        let mut g = rng::stream(seed, 0);
        DMatrix::from_fn(r, c, |_, _| g.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn shrink_reduces_singular_values() {
        let y = gaussian(1, 6, 9);
        let before = thin_svd(&y).singular_values;
        let tau = before[2];
        let after = thin_svd(&shrink(&y, tau)).singular_values;
        for k in 0..before.len() {
            assert!((after[k] - (before[k] - tau).max(0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn fully_observed_small_tau() {
        let m = gaussian(2, 5, 7);
        let ones = DMatrix::from_element(5, 7, 1.0);
        let params = SvtParams {
            tau: Some(1e-3),
            delta: Some(1.0),
            ..SvtParams::default()
        };
        let out = svt_complete(&m, &ones, &params).unwrap();
        assert!(out.converged);
        assert!((out.matrix - &m).norm() / m.norm() < 1e-4);
    }

    #[test]
    fn zero_observations_give_zero() {
        let ind = DMatrix::from_fn(4, 4, |i, j| ((i + j) % 2) as f64);
        let out = svt_complete(&DMatrix::zeros(4, 4), &ind, &SvtParams::default()).unwrap();
        assert_eq!(out.matrix, DMatrix::zeros(4, 4));
        assert!(svt_complete(
            &DMatrix::zeros(4, 4),
            &DMatrix::zeros(4, 4),
            &SvtParams::default()
        )
        .is_err());
    }

    #[test]
    fn rank_one_recovery() {
        let truth = gaussian(3, 50, 1) * gaussian(4, 1, 150);
        let pat = sample_case3(50, 150, 0.6, 5).unwrap();
        let ds = zero_fill(&truth, &pat).unwrap();
        let out = svt_complete(&ds.zero_filled, &pat.indicator(), &SvtParams::default()).unwrap();
        assert!(out.converged);
        assert!((out.matrix - &truth).norm() / truth.norm() < 1e-2);
    }

    #[test]
    fn rank_estimate_finds_gap() {
        let m = gaussian(6, 20, 3) * gaussian(7, 3, 30);
        assert_eq!(estimate_rank(&m), 3);
    }

    #[test]
    fn perfect_labels_full_observation() {
        let x = gaussian(8, 6, 2) * gaussian(9, 2, 5);
        let y = gaussian(10, 6, 2) * gaussian(11, 2, 5);
        let mut full = DMatrix::zeros(6, 10);
        full.columns_mut(0, 5).copy_from(&x);
        full.columns_mut(5, 5).copy_from(&y);
        let ds = zero_fill(&full, &sample_case1(6, 10, 1.0).unwrap()).unwrap();
        let labels: Vec<usize> = (0..10).map(|j| 1 + j / 5).collect();
        let params = SvtParams {
            tau: Some(1e-4),
            delta: Some(1.0),
            tol: 1e-9,
            max_iter: 200,
        };
        let res = complete_by_cluster(&ds, &labels, 2, 2, &params).unwrap();
        assert!((&res.recovered - &full).norm() / full.norm() < 1e-6);
        assert!(res
            .clusters
            .iter()
            .all(|c| !c.rank_deficient && c.basis.ncols() == 2));
    }
}
