//! Certificate verdicts against the SSC-LP support actually obtained.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::thread_pool;
use crate::certify::{
    check_case1, check_case2, check_case3, check_point, support_in_subspace, CertifyOptions,
    PointCertificate, Verdict,
};
use crate::error::{param, Result};
use crate::l1core::{L1Tolerances, SolveStatus};
use crate::model::{
    generate_ensemble, sample_case1, sample_case2, sample_case3, zero_fill, EnsembleParams,
    GenerationMode, ObservationPattern, ObservedDataset, SubspaceEnsemble,
};
use crate::rng::derive_seed;
use crate::selfrep::ssc_lp_coefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub n: usize,
    pub d: usize,
    pub num_subspaces: usize,
    pub points_per_subspace: usize,
    /// Sampling ratio for cases 1 and 3.
    pub p: f64,
    pub instances: usize,
    pub seed: u64,
    pub normalize_columns: bool,
    pub options: CertifyOptions,
    pub l1: L1Tolerances,
    /// Coefficients above this magnitude count as support.
    pub support_threshold: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            n: 30,
            d: 3,
            num_subspaces: 3,
            points_per_subspace: 30,
            p: 0.5,
            instances: 1,
            seed: 1,
            normalize_columns: false,
            options: CertifyOptions::default(),
            l1: L1Tolerances::default(),
            support_threshold: 1e-6,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub instance: usize,
    pub certificate: PointCertificate,
    pub lp_status: SolveStatus,
    /// Largest coefficient on another subspace's columns.
    pub max_cross: f64,
    /// The LP succeeded and every coefficient above the threshold is on the
    /// point's own subspace.
    pub support_correct: bool,
}

/// Certified versus correct support. `certified_incorrect` must stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub certified_correct: usize,
    pub certified_incorrect: usize,
    pub uncertified_correct: usize,
    pub uncertified_incorrect: usize,
    pub hypothesis_violated: usize,
    pub inconclusive: usize,
    pub dual_non_unique: usize,
}

impl Contingency {
    pub fn add(&mut self, o: &PointOutcome) {
        let cert = o.certificate.verdict == Verdict::Certified;
        match (cert, o.support_correct) {
            (true, true) => self.certified_correct += 1,
            (true, false) => self.certified_incorrect += 1,
            (false, true) => self.uncertified_correct += 1,
            (false, false) => self.uncertified_incorrect += 1,
        }
        self.hypothesis_violated +=
            usize::from(o.certificate.verdict == Verdict::HypothesisViolated);
        self.inconclusive += usize::from(o.certificate.inconclusive);
        self.dual_non_unique += usize::from(o.certificate.dual_non_unique);
    }

    pub fn total(&self) -> usize {
        self.certified_correct
            + self.certified_incorrect
            + self.uncertified_correct
            + self.uncertified_incorrect
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub case: Option<u8>,
    pub contingency: Contingency,
    pub outcomes: Vec<PointOutcome>,
}

/// Runs the checker of `case` (or the one matching each point's mask when
/// `None`) and SSC-LP on every point of one instance.
#[allow(clippy::too_many_arguments)]
pub fn certify_dataset(
    ens: &SubspaceEnsemble,
    ds: &ObservedDataset,
    case: Option<u8>,
    opts: &CertifyOptions,
    l1: &L1Tolerances,
    normalize_columns: bool,
    support_threshold: f64,
    instance: usize,
) -> Result<Vec<PointOutcome>> {
    if ens.num_points() != ds.num_points() {
        return param("ensemble and dataset disagree on the number of points");
    }
    let check = |pattern: &ObservationPattern, i: usize| match case {
        Some(1) => check_case1(ens, pattern, i, opts),
        Some(2) => check_case2(ens, pattern, i, opts),
        Some(3) => check_case3(ens, pattern, i, opts),
        None => check_point(ens, pattern, i, opts),
        Some(c) => param(format!("unknown case {c}")),
    };
    let coeffs = ssc_lp_coefficients(ds, normalize_columns, l1)?;
    (0..ds.num_points())
        .into_par_iter()
        .map(|i| {
            let certificate = check(&ds.pattern, i)?;
            let col = coeffs.c.column(i).into_owned();
            let labels = ens.labels();
            let own = labels[i];
            let max_cross = (0..col.len())
                .filter(|&j| labels[j] != own)
                .map(|j| col[j].abs())
                .fold(0.0, f64::max);
            let lp_status = coeffs.statuses[i];
            Ok(PointOutcome {
                instance,
                certificate,
                lp_status,
                max_cross,
                support_correct: lp_status == SolveStatus::Optimal
                    && support_in_subspace(ens, &col, i, support_threshold),
            })
        })
        .collect()
}

/// Draws `instances` unit-sphere ensembles, samples masks for `case` and
/// tabulates verdicts against SSC-LP supports. Writes `certificates.jsonl`
/// and `contingency.json` when an output directory is set.
pub fn run_certify(cfg: &CertifyConfig, case: u8) -> Result<CertifySummary> {
    if !(1..=3).contains(&case) {
        return param(format!("case must be 1, 2 or 3, got {case}"));
    }
    if cfg.instances == 0 {
        return param("instances must be at least 1");
    }
    let params = EnsembleParams::uniform(
        cfg.n,
        cfg.d,
        cfg.num_subspaces,
        cfg.points_per_subspace,
        GenerationMode::OrthonormalUnitSphere,
    );
    let pool = thread_pool()?;
    let per_instance = pool.install(|| {
        (0..cfg.instances)
            .into_par_iter()
            .map(|k| {
                let seed = derive_seed(cfg.seed, case as u64, k as u64);
                let (ens, x) = generate_ensemble(&params, seed)?;
                let pattern = match case {
                    1 => sample_case1(cfg.n, x.ncols(), cfg.p)?,
                    2 => sample_case2(cfg.n, x.ncols(), cfg.d, seed)?,
                    _ => sample_case3(cfg.n, x.ncols(), cfg.p, seed)?,
                };
                let mut ds = zero_fill(&x, &pattern)?;
                ds.true_labels = Some(ens.labels());
                let opts = CertifyOptions {
                    seed,
                    ..cfg.options
                };
                certify_dataset(
                    &ens,
                    &ds,
                    Some(case),
                    &opts,
                    &cfg.l1,
                    cfg.normalize_columns,
                    cfg.support_threshold,
                    k,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let outcomes: Vec<PointOutcome> = per_instance.into_iter().flatten().collect();
    let mut contingency = Contingency::default();
    outcomes.iter().for_each(|o| contingency.add(o));
    let summary = CertifySummary {
        case: Some(case),
        contingency,
        outcomes,
    };
    if let Some(dir) = &cfg.output_dir {
        write_certify_outputs(dir, &summary)?;
    }
    Ok(summary)
}

/// `certificates.jsonl` (one outcome per line) and `contingency.json`.
pub fn write_certify_outputs(dir: &std::path::Path, summary: &CertifySummary) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("certificates.jsonl"))?);
    for o in &summary.outcomes {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    serde_json::to_writer_pretty(
        std::fs::File::create(dir.join("contingency.json"))?,
        &summary.contingency,
    )?;
    Ok(())
}
