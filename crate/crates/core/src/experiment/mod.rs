//! Sweeps over the sampling ratio and certificate tabulations.
//!
//! Every trial draws its data from a seed derived from `(master seed, p index,
//! trial)`, so all algorithms see the same instance and the sorted results do
//! not depend on how trials are scheduled.

mod certification;
mod output;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complete::{complete_by_cluster, SvtParams};
use crate::error::{param, Result, UosError};
use crate::l1core::L1Tolerances;
use crate::metrics::{align_labels, completion_error, subspace_error};
use crate::model::{
    generate_ensemble, sample_case1, sample_case3, zero_fill, EnsembleParams, GenerationMode,
    ObservedDataset, SubspaceEnsemble,
};
use crate::rng::derive_seed;
use crate::selfrep::{
    affinity_from_coefficients, ssc_ewzf_coefficients, ssc_lp_coefficients, tsc_affinity,
    tsc_neighbors, Algorithm, EwzfParams,
};
use crate::spectral::{spectral_cluster, KMeansOptions};

pub use certification::{
    certify_dataset, run_certify, write_certify_outputs, CertifyConfig, CertifySummary,
    Contingency, PointOutcome,
};
pub use output::{
    read_results_csv, summarize, thresholds, write_results_csv, Metric, PriorPoint, SummaryRow,
    ThresholdReport,
};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "UOS_THREADS";

/// Sampling ratios, either listed or as an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PGrid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

fn round10(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

impl PGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            PGrid::List(v) => v.clone(),
            PGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return param(format!("bad p range {start}..{stop} step {step}"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|k| round10(start + k as f64 * step))
                    .collect()
            }
        };
        if v.is_empty() {
            return param("empty p grid");
        }
        if let Some(bad) = v.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return param(format!("sampling ratio {bad} outside (0, 1]"));
        }
        Ok(v)
    }
}

/// A sampling-ratio sweep. Defaults reproduce the random-support experiment
/// on `n = 50`, three 3-dimensional subspaces with 150 points each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub num_subspaces: usize,
    pub points_per_subspace: usize,
    pub mode: GenerationMode,
    /// 1: same support for every column, 3: random support per column.
    pub case: u8,
    pub p_grid: PGrid,
    pub algorithms: Vec<Algorithm>,
    pub ewzf: EwzfParams,
    /// Scale SSC-LP dictionary columns to unit norm on the observed rows.
    pub normalize_columns: bool,
    pub l1: L1Tolerances,
    /// TSC neighbour count; `None` derives it from the points per subspace.
    pub tsc_neighbors: Option<usize>,
    pub kmeans_restarts: usize,
    pub trials: usize,
    pub seed: u64,
    pub svt: SvtParams,
    /// Run per-cluster completion and the completion and subspace metrics.
    pub run_completion: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 50,
            d: 3,
            num_subspaces: 3,
            points_per_subspace: 150,
            mode: GenerationMode::GaussianProduct,
            case: 3,
            p_grid: PGrid::Range {
                start: 0.25,
                stop: 0.95,
                step: 0.02,
            },
            algorithms: Algorithm::ALL.to_vec(),
            ewzf: EwzfParams::default(),
            normalize_columns: false,
            l1: L1Tolerances::default(),
            tsc_neighbors: None,
            kmeans_restarts: 20,
            trials: 25,
            seed: 2016,
            svt: SvtParams::default(),
            run_completion: true,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// The same-support experiment: p from 0.08 to 0.26, clustering only.
    pub fn same_support() -> Self {
        Self {
            case: 1,
            p_grid: PGrid::Range {
                start: 0.08,
                stop: 0.26,
                step: 0.02,
            },
            run_completion: false,
            ..Self::default()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n < self.d {
            return param(format!("need n >= d >= 1, got n={}, d={}", self.n, self.d));
        }
        if self.num_subspaces == 0 || self.points_per_subspace == 0 {
            return param("need at least one subspace and one point per subspace");
        }
        if self.num_subspaces * self.points_per_subspace < 2 {
            return param("need at least two points");
        }
        if self.case != 1 && self.case != 3 {
            return param(format!("sweeps support case 1 or 3, got {}", self.case));
        }
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.kmeans_restarts == 0 {
            return param("kmeans_restarts must be at least 1");
        }
        if self.algorithms.is_empty() {
            return param("no algorithms selected");
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return param("algorithm listed twice");
        }
        self.p_grid.values()?;
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.num_subspaces * self.points_per_subspace
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// Some columns had no certified l1 solution and were zeroed.
    SolverFailures,
    /// SVT stopped at the iteration cap; the best iterate was used.
    SvtNotConverged,
    /// SVT failed numerically; completion metrics are missing.
    SvtFailed,
    /// The trial could not be run; all metrics are missing.
    Failed,
}

impl RowStatus {
    /// Whether metrics are missing for the row.
    pub fn is_failure(self) -> bool {
        matches!(self, RowStatus::SvtFailed | RowStatus::Failed)
    }
}

/// One `(p, trial, algorithm)` result, in the fixed CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: u8,
    pub p: f64,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub clustering_error: Option<f64>,
    pub completion_error: Option<f64>,
    pub subspace_error_max_rad: Option<f64>,
    pub status: RowStatus,
    pub seed: u64,
    #[serde(skip)]
    pub subspace_error_mean_rad: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by `(p, trial, algorithm)`.
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub thresholds: Vec<ThresholdReport>,
    pub failures: usize,
}

/// Worker pool sized by `UOS_THREADS` when set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let t: usize = v.trim().parse().map_err(|_| {
            UosError::Parameter(format!("{THREADS_ENV}={v:?} is not a positive integer"))
        })?;
        if t == 0 {
            return param(format!("{THREADS_ENV} must be positive"));
        }
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| UosError::Parameter(format!("cannot build thread pool: {e}")))
}

/// Draws the trial instance: ensemble, full data and zero-filled observations.
pub fn trial_instance(
    cfg: &ExperimentConfig,
    p: f64,
    seed: u64,
) -> Result<(SubspaceEnsemble, ObservedDataset)> {
    let params = EnsembleParams::uniform(
        cfg.n,
        cfg.d,
        cfg.num_subspaces,
        cfg.points_per_subspace,
        cfg.mode,
    );
    let (ens, x) = generate_ensemble(&params, seed)?;
    let pattern = match cfg.case {
        1 => sample_case1(cfg.n, x.ncols(), p)?,
        3 => sample_case3(cfg.n, x.ncols(), p, seed)?,
        c => return param(format!("unsupported sweep case {c}")),
    };
    let mut ds = zero_fill(&x, &pattern)?;
    ds.true_labels = Some(ens.labels());
    Ok((ens, ds))
}

/// Clustering, completion and metrics for one algorithm on one instance.
pub fn evaluate_algorithm(
    cfg: &ExperimentConfig,
    ens: &SubspaceEnsemble,
    ds: &ObservedDataset,
    algorithm: Algorithm,
    seed: u64,
) -> Result<(
    RowStatus,
    Option<f64>,
    Option<f64>,
    Option<f64>,
    Option<f64>,
)> {
    let mut status = RowStatus::Ok;
    let w = match algorithm {
        Algorithm::SscLp => {
            let c = ssc_lp_coefficients(ds, cfg.normalize_columns, &cfg.l1)?;
            if c.failure_count() > 0 {
                status = RowStatus::SolverFailures;
            }
            affinity_from_coefficients(&c)
        }
        Algorithm::SscEwzf => {
            let c = ssc_ewzf_coefficients(ds, &cfg.ewzf)?;
            if c.failure_count() > 0 {
                status = RowStatus::SolverFailures;
            }
            affinity_from_coefficients(&c)
        }
        Algorithm::Tsc => {
            let q = cfg
                .tsc_neighbors
                .unwrap_or_else(|| tsc_neighbors(cfg.points_per_subspace, ds.num_points()));
            tsc_affinity(ds, q)?.weights
        }
    };
    let opts = KMeansOptions {
        restarts: cfg.kmeans_restarts,
        ..KMeansOptions::default()
    };
    let assignment = spectral_cluster(&w, cfg.num_subspaces, seed, opts)?;
    let truth = ens.labels();
    let alignment = align_labels(&assignment.labels, &truth)?;
    let clustering = alignment.mismatches as f64 / truth.len() as f64;
    if !cfg.run_completion {
        return Ok((status, Some(clustering), None, None, None));
    }

    let completed =
        match complete_by_cluster(ds, &assignment.labels, cfg.num_subspaces, cfg.d, &cfg.svt) {
            Ok(c) => c,
            Err(UosError::Numerical(msg)) => {
                log::debug!("{algorithm}: {msg}");
                return Ok((RowStatus::SvtFailed, Some(clustering), None, None, None));
            }
            Err(e) => return Err(e),
        };
    if !completed.all_converged() && status == RowStatus::Ok {
        status = RowStatus::SvtNotConverged;
    }
    let full = ds
        .full_matrix
        .as_ref()
        .ok_or_else(|| UosError::Parameter("ground truth required".into()))?;
    let completion = completion_error(&completed.recovered, full)?;
    let mut angles = Vec::with_capacity(completed.clusters.len());
    for (k, cluster) in completed.clusters.iter().enumerate() {
        let t = alignment.predicted_to_true[k];
        let angle = if cluster.basis.ncols() < cfg.d || t > ens.num_subspaces() {
            std::f64::consts::FRAC_PI_2
        } else {
            subspace_error(&ens.bases[t - 1], &cluster.basis)?
        };
        angles.push(angle);
    }
    let max = angles.iter().copied().fold(0.0, f64::max);
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    Ok((
        status,
        Some(clustering),
        Some(completion),
        Some(max),
        Some(mean),
    ))
}

fn run_trial(cfg: &ExperimentConfig, p_index: usize, p: f64, trial: usize) -> Vec<ResultRow> {
    let seed = derive_seed(cfg.seed, p_index as u64, trial as u64);
    let row = |algorithm, status, c, m, s, sm| ResultRow {
        case: cfg.case,
        p,
        trial,
        algorithm,
        clustering_error: c,
        completion_error: m,
        subspace_error_max_rad: s,
        status,
        seed,
        subspace_error_mean_rad: sm,
    };
    let (ens, ds) = match trial_instance(cfg, p, seed) {
        Ok(x) => x,
        Err(e) => {
            log::warn!("p={p} trial {trial}: {e}");
            return cfg
                .algorithms
                .iter()
                .map(|&a| row(a, RowStatus::Failed, None, None, None, None))
                .collect();
        }
    };
    cfg.algorithms
        .iter()
        .map(|&a| match evaluate_algorithm(cfg, &ens, &ds, a, seed) {
            Ok((status, c, m, s, sm)) => row(a, status, c, m, s, sm),
            Err(e) => {
                log::warn!("p={p} trial {trial} {a}: {e}");
                row(a, RowStatus::Failed, None, None, None, None)
            }
        })
        .collect()
}

/// Runs the sweep on the `UOS_THREADS` pool. With an output directory, rows
/// are appended to `results.partial.csv` as trials finish, then `results.csv`,
/// `summary.csv`, `thresholds.json` and one `.dat` file per metric are written.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let ps = cfg.p_grid.values()?;
    let jobs: Vec<(usize, f64, usize)> = ps
        .iter()
        .enumerate()
        .flat_map(|(k, &p)| (0..cfg.trials).map(move |t| (k, p, t)))
        .collect();

    let partial = match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            serde_json::to_writer_pretty(std::fs::File::create(dir.join("config.json"))?, cfg)?;
            Some(Mutex::new(csv::Writer::from_path(
                dir.join(output::PARTIAL_FILE),
            )?))
        }
        None => None,
    };

    let pool = thread_pool()?;
    let rows: Vec<ResultRow> = pool.install(|| {
        jobs.par_iter()
            .flat_map_iter(|&(k, p, t)| {
                let rows = run_trial(cfg, k, p, t);
                if let Some(w) = &partial {
                    let mut w = w.lock().expect("csv writer poisoned");
                    for r in &rows {
                        if let Err(e) = w.serialize(r) {
                            log::warn!("incremental write failed: {e}");
                        }
                    }
                    let _ = w.flush();
                }
                log::info!("p={p} trial {t} done");
                rows
            })
            .collect()
    });

    let mut rows = rows;
    sort_rows(&mut rows);
    let summary = summarize(&rows);
    let thresholds = thresholds(&summary, cfg.trials);
    let failures = rows.iter().filter(|r| r.status.is_failure()).count();
    if let Some(dir) = &cfg.output_dir {
        drop(partial);
        output::write_all(dir, &rows, &summary, &thresholds)?;
        std::fs::remove_file(dir.join(output::PARTIAL_FILE))?;
    }
    Ok(SweepOutcome {
        rows,
        summary,
        thresholds,
        failures,
    })
}

/// Orders rows by `(p, trial, algorithm)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.p.total_cmp(&b.p)
            .then(a.trial.cmp(&b.trial))
            .then(a.algorithm.cmp(&b.algorithm))
    });
}
