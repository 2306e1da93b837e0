//! Clustering and completion of data drawn from a union of low-dimensional
//! subspaces when every column is observed on a subset of its coordinates.
//!
//! The pipeline is [`selfrep`] (self-representation by l1 minimisation, plus
//! two baselines), [`spectral`] clustering, per-cluster [`complete`]ion and
//! the [`metrics`]. [`certify`] evaluates per-point sufficient conditions for
//! the l1 representation to stay inside its own subspace, and [`experiment`]
//! runs parameter sweeps over all of it.

pub mod certify;
pub mod complete;
pub mod error;
pub mod experiment;
pub mod l1core;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod selfrep;
pub mod spectral;

pub use certify::{CertifyOptions, Inradius, InradiusMethod, PointCertificate, Verdict};
pub use complete::{complete_by_cluster, svt_complete, CompletionResult, SvtParams};
pub use error::{Result, UosError};
pub use experiment::{
    run_certify, run_sweep, CertifyConfig, ExperimentConfig, ResultRow, RowStatus,
};
pub use l1core::{
    solve_bp, solve_dual_direction, solve_lasso, L1Solution, L1Tolerances, SolveStatus,
};
pub use metrics::{clustering_error, completion_error, subspace_error, EvaluationRecord};
pub use model::{
    generate_ensemble, zero_fill, CaseTag, EnsembleParams, GenerationMode, ObservationPattern,
    ObservedDataset, SubspaceEnsemble,
};
pub use selfrep::{Algorithm, CoefficientMatrix, EwzfParams};
pub use spectral::{spectral_cluster, ClusterAssignment, KMeansOptions};
