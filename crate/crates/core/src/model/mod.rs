//! Union-of-subspaces data, observation masks and the zero-fill operator.

mod io;

pub use io::{read_dataset, read_truth, write_dataset, DatasetMeta};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::linalg;
use crate::rng::{self, ns};

/// How the per-subspace data is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// Orthonormal basis, coefficients uniform on the unit sphere.
    OrthonormalUnitSphere,
    /// Gaussian `n x d` times Gaussian `d x N_l`; no normalisation.
    GaussianProduct,
}

/// Ground truth of the generative model.
///
/// Column `j` of subspace `l` is `scales[l][j] * bases[l] * coefficients[l].column(j)`,
/// with orthonormal bases and unit-norm coefficient columns. Scales are all one in
/// [`GenerationMode::OrthonormalUnitSphere`].
#[derive(Debug, Clone)]
pub struct SubspaceEnsemble {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub bases: Vec<DMatrix<f64>>,
    pub coefficients: Vec<DMatrix<f64>>,
    pub scales: Vec<Vec<f64>>,
    pub mode: GenerationMode,
}

impl SubspaceEnsemble {
    pub fn num_subspaces(&self) -> usize {
        self.bases.len()
    }

    pub fn points_per_subspace(&self) -> Vec<usize> {
        self.coefficients.iter().map(|a| a.ncols()).collect()
    }

    pub fn num_points(&self) -> usize {
        self.points_per_subspace().iter().sum()
    }

    /// Global column index of the first point of each subspace.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.points_per_subspace()
            .into_iter()
            .map(|c| {
                let o = acc;
                acc += c;
                o
            })
            .collect()
    }

    /// `(subspace, local index)` of a global column.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let mut rest = global;
        for (l, count) in self.points_per_subspace().into_iter().enumerate() {
            if rest < count {
                return (l, rest);
            }
            rest -= count;
        }
        panic!("column {global} out of range");
    }

    /// Ground-truth labels in `1..=L`, subspaces laid out contiguously.
    pub fn labels(&self) -> Vec<usize> {
        self.points_per_subspace()
            .into_iter()
            .enumerate()
            .flat_map(|(l, c)| std::iter::repeat_n(l + 1, c))
            .collect()
    }

    /// Coefficient vector including its scale, so that `x = U a`.
    pub fn scaled_coefficient(&self, subspace: usize, local: usize) -> DVector<f64> {
        self.coefficients[subspace].column(local) * self.scales[subspace][local]
    }

    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.num_points();
        let mut x = DMatrix::zeros(self.ambient_dim, n);
        let mut col = 0;
        for l in 0..self.num_subspaces() {
            let block = &self.bases[l] * &self.coefficients[l];
            for j in 0..block.ncols() {
                x.set_column(col, &(block.column(j) * self.scales[l][j]));
                col += 1;
            }
        }
        x
    }

    /// Checks the orthonormality and unit-norm invariants within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for (l, (u, a)) in self.bases.iter().zip(&self.coefficients).enumerate() {
            if u.nrows() != self.ambient_dim || u.ncols() != self.subspace_dim {
                return param(format!("basis {l} has shape {:?}", u.shape()));
            }
            if linalg::orthonormality_defect(u) > tol {
                return param(format!("basis {l} is not orthonormal"));
            }
            for j in 0..a.ncols() {
                if (a.column(j).norm() - 1.0).abs() > tol {
                    return param(format!(
                        "coefficient column {j} of subspace {l} is not unit norm"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Parameters of [`generate_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub points_per_subspace: Vec<usize>,
    pub mode: GenerationMode,
}

impl EnsembleParams {
    pub fn uniform(
        n: usize,
        d: usize,
        num_subspaces: usize,
        per_subspace: usize,
        mode: GenerationMode,
    ) -> Self {
        Self {
            ambient_dim: n,
            subspace_dim: d,
            points_per_subspace: vec![per_subspace; num_subspaces],
            mode,
        }
    }
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill, matching DMatrix storage
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

fn gaussian_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform draw from the unit sphere in `R^dim` from stream `(seed, id)`.
pub fn unit_sphere_vector(seed: u64, id: u64, dim: usize) -> DVector<f64> {
    let mut rng = rng::stream(seed, id);
    loop {
        let v = gaussian_vector(&mut rng, dim);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Draws a union-of-subspaces ensemble and its `n x N` data matrix.
pub fn generate_ensemble(
    params: &EnsembleParams,
    seed: u64,
) -> Result<(SubspaceEnsemble, DMatrix<f64>)> {
    let n = params.ambient_dim;
    let d = params.subspace_dim;
    if d == 0 || n < d {
        return param(format!("need n >= d >= 1, got n={n}, d={d}"));
    }
    if params.points_per_subspace.is_empty() || params.points_per_subspace.contains(&0) {
        return param("need at least one subspace and N_l >= 1 in each");
    }

    let mut bases = Vec::new();
    let mut coefficients = Vec::new();
    let mut scales = Vec::new();
    let mut global = 0u64;
    for (l, &count) in params.points_per_subspace.iter().enumerate() {
        let mut basis_rng = rng::stream(seed, ns::BASIS | l as u64);
        let g = gaussian_matrix(&mut basis_rng, n, d);
        let qr = g.clone().qr();
        let mut u = qr.q();
        let mut r = qr.r();
        // Fix the sign ambiguity so that R has a non-negative diagonal.
        for k in 0..d {
            if r[(k, k)] < 0.0 {
                u.column_mut(k).neg_mut();
                r.row_mut(k).neg_mut();
            }
        }

        let mut a = DMatrix::zeros(d, count);
        let mut s = vec![1.0; count];
        for j in 0..count {
            let id = ns::COEFF | global;
            global += 1;
            match params.mode {
                GenerationMode::OrthonormalUnitSphere => {
                    a.set_column(j, &unit_sphere_vector(seed, id, d));
                }
                GenerationMode::GaussianProduct => {
                    let mut rng = rng::stream(seed, id);
                    let h = gaussian_vector(&mut rng, d);
                    let implied = &r * h;
                    let norm = implied.norm();
                    if norm > 0.0 {
                        a.set_column(j, &(implied / norm));
                    } else {
                        a[(0, j)] = 1.0;
                    }
                    s[j] = norm;
                }
            }
        }
        bases.push(u);
        coefficients.push(a);
        scales.push(s);
    }

    let ensemble = SubspaceEnsemble {
        ambient_dim: n,
        subspace_dim: d,
        bases,
        coefficients,
        scales,
        mode: params.mode,
    };
    let x = ensemble.full_matrix();
    Ok((ensemble, x))
}

/// Which sampling regime produced an observation pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// Every column observed on the same coordinates.
    SameSupport,
    /// Every column observed on exactly `d` random coordinates.
    ExactlyD,
    /// Independent random subsets per column.
    RandomPerColumn,
}

/// Per-column observation sets. Indices are zero-based rows of the data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPattern {
    ambient_dim: usize,
    masks: Vec<Vec<usize>>,
    case_tag: CaseTag,
}

impl ObservationPattern {
    /// Validates and wraps explicit masks (sorted, unique, in range, nonempty).
    pub fn new(ambient_dim: usize, masks: Vec<Vec<usize>>, case_tag: CaseTag) -> Result<Self> {
        for (i, m) in masks.iter().enumerate() {
            if m.is_empty() {
                return param(format!("mask of column {i} is empty"));
            }
            if m.windows(2).any(|w| w[0] >= w[1]) {
                return param(format!("mask of column {i} is not sorted and unique"));
            }
            if *m.last().unwrap() >= ambient_dim {
                return param(format!(
                    "mask of column {i} exceeds ambient dimension {ambient_dim}"
                ));
            }
        }
        if case_tag == CaseTag::SameSupport && masks.windows(2).any(|w| w[0] != w[1]) {
            return param("same-support pattern with differing masks");
        }
        Ok(Self {
            ambient_dim,
            masks,
            case_tag,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn num_columns(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[Vec<usize>] {
        &self.masks
    }

    pub fn mask(&self, column: usize) -> &[usize] {
        &self.masks[column]
    }

    pub fn case_tag(&self) -> CaseTag {
        self.case_tag
    }

    /// Dense 0/1 indicator, `n x N`.
    pub fn indicator(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ambient_dim, self.masks.len());
        for (i, mask) in self.masks.iter().enumerate() {
            for &k in mask {
                m[(k, i)] = 1.0;
            }
        }
        m
    }

    pub fn observed_count(&self) -> usize {
        self.masks.iter().map(Vec::len).sum()
    }

    /// Restriction of the pattern to a subset of columns (kept in the given order).
    pub fn select_columns(&self, columns: &[usize]) -> ObservationPattern {
        ObservationPattern {
            ambient_dim: self.ambient_dim,
            masks: columns.iter().map(|&c| self.masks[c].clone()).collect(),
            case_tag: self.case_tag,
        }
    }
}

/// Number of coordinates observed in the same-support case: `ceil(p n)`.
pub fn same_support_count(n: usize, p: f64) -> usize {
    // guard against products like 0.14 * 50 = 7.000000000000001
    (p * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Number of coordinates observed per column in the random case: `round(p n)`, halves up.
pub fn random_support_count(n: usize, p: f64) -> usize {
    (p * n as f64 + 0.5 + 1e-9).floor().max(0.0) as usize
}

fn check_ratio(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return param(format!("sampling ratio must lie in (0, 1], got {p}"));
    }
    Ok(())
}

/// Same support for every column: the first `ceil(p n)` coordinates.
pub fn sample_case1(n: usize, num_columns: usize, p: f64) -> Result<ObservationPattern> {
    check_ratio(p)?;
    let m = same_support_count(n, p).min(n);
    if m == 0 {
        return param(format!("ceil(p n) = 0 for p={p}, n={n}"));
    }
    let mask: Vec<usize> = (0..m).collect();
    ObservationPattern::new(n, vec![mask; num_columns], CaseTag::SameSupport)
}

/// Uniformly random subset of `size` out of `0..n`, sorted; partial Fisher–Yates.
fn random_subset(seed: u64, column: usize, n: usize, size: usize) -> Vec<usize> {
    let mut rng = rng::stream(seed, ns::MASK | column as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..size {
        let j = rng.gen_range(k..n);
        idx.swap(k, j);
    }
    let mut out = idx[..size].to_vec();
    out.sort_unstable();
    out
}

/// Independent uniformly random subsets of size `round(p n)` per column.
pub fn sample_case3(n: usize, num_columns: usize, p: f64, seed: u64) -> Result<ObservationPattern> {
    check_ratio(p)?;
    let m = random_support_count(n, p).min(n);
    if m == 0 {
        return param(format!("round(p n) = 0 for p={p}, n={n}"));
    }
    let masks = (0..num_columns)
        .map(|i| random_subset(seed, i, n, m))
        .collect();
    ObservationPattern::new(n, masks, CaseTag::RandomPerColumn)
}

/// Independent uniformly random subsets of size exactly `d` per column.
pub fn sample_case2(
    n: usize,
    num_columns: usize,
    d: usize,
    seed: u64,
) -> Result<ObservationPattern> {
    if d == 0 || d > n {
        return param(format!("need 1 <= d <= n, got d={d}, n={n}"));
    }
    let masks = (0..num_columns)
        .map(|i| random_subset(seed, i, n, d))
        .collect();
    ObservationPattern::new(n, masks, CaseTag::ExactlyD)
}

/// Data matrix with its observation pattern.
#[derive(Debug, Clone)]
pub struct ObservedDataset {
    /// Ground truth, when known.
    pub full_matrix: Option<DMatrix<f64>>,
    /// Observed values with zeros outside the masks.
    pub zero_filled: DMatrix<f64>,
    pub pattern: ObservationPattern,
    /// Ground-truth labels in `1..=L`, when known.
    pub true_labels: Option<Vec<usize>>,
}

impl ObservedDataset {
    pub fn ambient_dim(&self) -> usize {
        self.zero_filled.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.zero_filled.ncols()
    }

    /// Zero-filled column `j` restricted to the rows `rows`.
    pub fn restricted_column(&self, j: usize, rows: &[usize]) -> DVector<f64> {
        DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.zero_filled[(r, j)]))
    }

    /// Number of points per label, if labels are known.
    pub fn label_counts(&self) -> Option<Vec<usize>> {
        let labels = self.true_labels.as_ref()?;
        let l = labels.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0; l];
        for &lab in labels {
            counts[lab - 1] += 1;
        }
        Some(counts)
    }
}

/// Rebuilds an ensemble from complete labelled data whose columns are grouped
/// by label `1..=L`. Each basis is the top `d` left singular vectors of its
/// columns, so it matches the generating basis up to a rotation.
pub fn ensemble_from_data(
    x: &DMatrix<f64>,
    labels: &[usize],
    d: usize,
) -> Result<SubspaceEnsemble> {
    if labels.len() != x.ncols() {
        return param(format!("{} labels for {} columns", labels.len(), x.ncols()));
    }
    if labels.first() != Some(&1) || labels.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
        return param("columns must be grouped by label, labels running 1, 2, ...");
    }
    if d == 0 || d > x.nrows() {
        return param(format!("need 1 <= d <= n, got d={d}"));
    }
    let num = *labels.last().unwrap();
    let mut bases = Vec::with_capacity(num);
    let mut coefficients = Vec::with_capacity(num);
    let mut scales = Vec::with_capacity(num);
    let mut unit = true;
    for l in 1..=num {
        let cols: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == l).collect();
        let block = x.select_columns(&cols);
        let svd = linalg::thin_svd(&block);
        if svd.u.ncols() < d {
            return param(format!(
                "subspace {l} has fewer than d = {d} independent columns"
            ));
        }
        let u = svd.u.columns(0, d).into_owned();
        let proj = u.tr_mul(&block);
        let mut a = DMatrix::zeros(d, cols.len());
        let mut s = vec![0.0; cols.len()];
        for j in 0..cols.len() {
            let norm = proj.column(j).norm();
            if norm > 0.0 {
                a.set_column(j, &(proj.column(j) / norm));
            } else {
                a[(0, j)] = 1.0;
            }
            unit &= (norm - 1.0).abs() < 1e-10;
            s[j] = norm;
        }
        bases.push(u);
        coefficients.push(a);
        scales.push(s);
    }
    Ok(SubspaceEnsemble {
        ambient_dim: x.nrows(),
        subspace_dim: d,
        bases,
        coefficients,
        scales,
        mode: if unit {
            GenerationMode::OrthonormalUnitSphere
        } else {
            GenerationMode::GaussianProduct
        },
    })
}

/// Applies the observation pattern: entries outside each column's mask become zero.
pub fn zero_fill(full: &DMatrix<f64>, pattern: &ObservationPattern) -> Result<ObservedDataset> {
    if full.nrows() != pattern.ambient_dim() || full.ncols() != pattern.num_columns() {
        return param(format!(
            "matrix is {}x{} but pattern covers {}x{}",
            full.nrows(),
            full.ncols(),
            pattern.ambient_dim(),
            pattern.num_columns()
        ));
    }
    let mut z = DMatrix::zeros(full.nrows(), full.ncols());
    for (i, mask) in pattern.masks().iter().enumerate() {
        for &k in mask {
            z[(k, i)] = full[(k, i)];
        }
    }
    Ok(ObservedDataset {
        full_matrix: Some(full.clone()),
        zero_filled: z,
        pattern: pattern.clone(),
        true_labels: None,
    })
}
