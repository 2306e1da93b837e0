//! `uos`: generate datasets, cluster them, complete them, check certificates
//! and run parameter sweeps.
//!
//! Exit status is 0 on success, 2 when the command finished but some solver,
//! completion or trial failed, and 1 on bad input.

mod labels;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uos_core::certify::{CertifyOptions, InradiusMethod};
use uos_core::experiment::{
    certify_dataset, run_certify, run_sweep, write_certify_outputs, CertifyConfig, CertifySummary,
    Contingency, ExperimentConfig,
};
use uos_core::model::{
    ensemble_from_data, generate_ensemble, read_dataset, read_truth, sample_case1, sample_case2,
    sample_case3, write_dataset, zero_fill, DatasetMeta, EnsembleParams, GenerationMode,
    ObservationPattern,
};
use uos_core::selfrep::{
    affinity_from_coefficients, ssc_ewzf_coefficients, ssc_lp_coefficients, tsc_affinity,
    tsc_neighbors, EwzfParams,
};
use uos_core::spectral::{spectral_cluster, KMeansOptions};
use uos_core::{
    clustering_error, complete_by_cluster, completion_error, Algorithm, CaseTag, L1Tolerances,
    SvtParams,
};

#[derive(Parser)]
#[command(
    name = "uos",
    version,
    about = "Subspace clustering and completion with missing entries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a union-of-subspaces dataset and write it to a directory.
    Generate(GenerateArgs),
    /// Cluster a dataset and write `point,label` rows.
    Cluster(ClusterArgs),
    /// Complete each cluster and write the recovered dataset.
    Complete(CompleteArgs),
    /// Check per-point certificates and compare with SSC-LP supports.
    Certify(CertifyArgs),
    /// Run a sweep described by a JSON config.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    GaussianProduct,
    UnitSphere,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long = "subspaces", default_value_t = 3)]
    num_subspaces: usize,
    #[arg(long = "per-subspace", default_value_t = 150)]
    per_subspace: usize,
    #[arg(long, value_enum, default_value_t = Mode::GaussianProduct)]
    mode: Mode,
    /// 1 same support, 2 exactly d coordinates, 3 random per column.
    #[arg(long, default_value_t = 3)]
    case: u8,
    /// Sampling ratio (ignored for case 2).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dataset directory.
    dataset: PathBuf,
    #[arg(long, default_value = "ssc-lp")]
    algorithm: Algorithm,
    /// Labels CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Number of clusters; defaults to `L` from the dataset metadata.
    #[arg(long)]
    clusters: Option<usize>,
    /// Scale every SSC-LP column to unit norm on its observed rows.
    #[arg(long)]
    normalize: bool,
    /// EWZF tuning constant.
    #[arg(long, default_value_t = 7.34)]
    alpha: f64,
    /// TSC neighbours; defaults to `round(sqrt(N_l ln N_l))`.
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the coefficient matrix to this directory.
    #[arg(long)]
    coeffs: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    dataset: PathBuf,
    /// Labels CSV from `cluster`.
    #[arg(long)]
    labels: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inradius {
    Auto,
    Exact,
    Box,
    Sampled,
}

#[derive(Args)]
struct CertifyArgs {
    /// Dataset directory with `truth.csv` and labels in its metadata.
    #[arg(required_unless_present = "config")]
    dataset: Option<PathBuf>,
    /// Generate instances from this certification config instead.
    #[arg(long, conflicts_with = "dataset")]
    config: Option<PathBuf>,
    /// Case to check; by default the one matching each point's mask.
    #[arg(long)]
    case: Option<u8>,
    /// Output directory for `certificates.jsonl` and `contingency.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Inradius::Auto)]
    inradius: Inradius,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    #[arg(long)]
    skip_uniqueness: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file mirroring the experiment configuration.
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Finished, but with failures worth a non-zero status.
struct Partial;

type Status = Result<Option<Partial>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Cluster(a) => cluster(a),
        Command::Complete(a) => complete(a),
        Command::Certify(a) => certify(a),
        Command::Sweep(a) => sweep(a),
    };
    match run {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Partial)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn partial_if(failed: bool) -> Status {
    Ok(failed.then_some(Partial))
}

fn generate(a: GenerateArgs) -> Status {
    let mode = match a.mode {
        Mode::GaussianProduct => GenerationMode::GaussianProduct,
        Mode::UnitSphere => GenerationMode::OrthonormalUnitSphere,
    };
    let params = EnsembleParams::uniform(a.n, a.d, a.num_subspaces, a.per_subspace, mode);
    let (ens, x) = generate_ensemble(&params, a.seed)?;
    let big_n = x.ncols();
    let (pattern, case_tag) = match a.case {
        1 => (sample_case1(a.n, big_n, a.p)?, CaseTag::SameSupport),
        2 => (sample_case2(a.n, big_n, a.d, a.seed)?, CaseTag::ExactlyD),
        3 => (
            sample_case3(a.n, big_n, a.p, a.seed)?,
            CaseTag::RandomPerColumn,
        ),
        c => bail!("case must be 1, 2 or 3, got {c}"),
    };
    let ds = zero_fill(&x, &pattern)?;
    let meta = DatasetMeta {
        n: a.n,
        num_points: big_n,
        num_subspaces: a.num_subspaces,
        d: a.d,
        counts: ens.points_per_subspace(),
        case_tag,
        seed: Some(a.seed),
        labels: Some(ens.labels()),
    };
    write_dataset(&a.out, &ds, &meta)?;
    println!("wrote {} points in R^{} to {}", big_n, a.n, a.out.display());
    Ok(None)
}

fn cluster(a: ClusterArgs) -> Status {
    let (ds, meta) = read_dataset(&a.dataset)?;
    let k = a.clusters.unwrap_or(meta.num_subspaces);
    let tol = L1Tolerances::default();
    let mut failures = 0;
    let w = match a.algorithm {
        Algorithm::SscLp | Algorithm::SscEwzf => {
            let c = if a.algorithm == Algorithm::SscLp {
                ssc_lp_coefficients(&ds, a.normalize, &tol)?
            } else {
                ssc_ewzf_coefficients(
                    &ds,
                    &EwzfParams {
                        alpha: a.alpha,
                        ..EwzfParams::default()
                    },
                )?
            };
            failures = c.failure_count();
            if let Some(dir) = &a.coeffs {
                c.export(dir)?;
            }
            affinity_from_coefficients(&c)
        }
        Algorithm::Tsc => {
            let per = ds.num_points() / k.max(1);
            tsc_affinity(
                &ds,
                a.neighbors
                    .unwrap_or_else(|| tsc_neighbors(per, ds.num_points())),
            )?
            .weights
        }
    };
    let opts = KMeansOptions {
        restarts: a.restarts,
        ..KMeansOptions::default()
    };
    let assignment = spectral_cluster(&w, k, a.seed, opts)?;
    labels::write(&a.out, &assignment.labels)?;
    if let Some(truth) = meta.labels.as_deref().or(ds.true_labels.as_deref()) {
        println!(
            "clustering error {:.6}",
            clustering_error(&assignment.labels, truth)?
        );
    }
    if failures > 0 {
        eprintln!("{failures} columns had no optimal representation");
    }
    partial_if(failures > 0)
}

fn complete(a: CompleteArgs) -> Status {
    let (ds, meta) = read_dataset(&a.dataset)?;
    let labels = labels::read(&a.labels, ds.num_points())?;
    let k = labels
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(meta.num_subspaces);
    let params = SvtParams {
        tol: a.tol,
        max_iter: a.max_iter,
        ..SvtParams::default()
    };
    let result = complete_by_cluster(&ds, &labels, k, meta.d, &params)?;
    let n = ds.ambient_dim();
    let full = ObservationPattern::new(n, vec![(0..n).collect(); ds.num_points()], meta.case_tag)?;
    let mut recovered = zero_fill(&result.recovered, &full)?;
    // carry the truth forward so the output can be scored again
    recovered.full_matrix = read_truth(&a.dataset)?;
    if let Some(t) = &recovered.full_matrix {
        println!(
            "completion error {:.6}",
            completion_error(&result.recovered, t)?
        );
    }
    write_dataset(&a.out, &recovered, &meta)?;
    let stalled = result.clusters.iter().filter(|c| !c.converged).count();
    if stalled > 0 {
        eprintln!("{stalled} clusters did not converge");
    }
    partial_if(stalled > 0)
}

fn certify(a: CertifyArgs) -> Status {
    let options = CertifyOptions {
        margin: a.margin,
        inradius: match a.inradius {
            Inradius::Auto => InradiusMethod::Auto,
            Inradius::Exact => InradiusMethod::ExactPolarVertices,
            Inradius::Box => InradiusMethod::PolarBoxLowerBound,
            Inradius::Sampled => InradiusMethod::SampledUpperBound {
                samples: a.samples,
                seed: a.seed,
            },
        },
        check_uniqueness: !a.skip_uniqueness,
        seed: a.seed,
        ..CertifyOptions::default()
    };
    let summary = match (&a.dataset, &a.config) {
        (_, Some(cfg)) => {
            let mut cfg: CertifyConfig = read_json(cfg)?;
            cfg.options = options;
            cfg.output_dir = None;
            run_certify(&cfg, a.case.context("--case is required with --config")?)?
        }
        (Some(dir), None) => certify_directory(dir, a.case, &options)?,
        (None, None) => bail!("give a dataset directory or --config"),
    };
    write_certify_outputs(&a.out, &summary)?;
    let c = summary.contingency;
    println!("{}", serde_json::to_string_pretty(&c)?);
    // a certified point with cross-subspace support contradicts the theory
    partial_if(c.certified_incorrect > 0)
}

fn certify_directory(
    dir: &Path,
    case: Option<u8>,
    options: &CertifyOptions,
) -> Result<CertifySummary> {
    let (mut ds, meta) = read_dataset(dir)?;
    let truth = read_truth(dir)?.context("certification needs truth.csv")?;
    let labels = meta
        .labels
        .clone()
        .context("certification needs labels in meta.json")?;
    let ens = ensemble_from_data(&truth, &labels, meta.d)?;
    ds.full_matrix = Some(truth);
    ds.true_labels = Some(labels);
    let outcomes = certify_dataset(
        &ens,
        &ds,
        case,
        options,
        &L1Tolerances::default(),
        false,
        1e-6,
        0,
    )?;
    let mut contingency = Contingency::default();
    outcomes.iter().for_each(|o| contingency.add(o));
    Ok(CertifySummary {
        case,
        contingency,
        outcomes,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn sweep(a: SweepArgs) -> Status {
    let mut cfg = ExperimentConfig::from_json_file(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_dir = Some(out);
    }
    cfg.validate()?;
    let outcome = run_sweep(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&outcome.thresholds)?);
    if outcome.failures > 0 {
        eprintln!("{} rows failed", outcome.failures);
    }
    partial_if(outcome.failures > 0)
}
