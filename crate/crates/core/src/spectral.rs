//! Normalised spectral clustering with k-means++ restarts.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::linalg::sym_eigen_ascending;
use crate::rng::{self, ns};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// 1-based labels, canonicalised by first appearance.
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub inertia: f64,
    /// The smallest `L + 1` Laplacian eigenvalues (fewer if `N <= L`).
    pub eigenvalues: Vec<f64>,
    pub isolated_vertices: Vec<usize>,
    /// Number of requested clusters left empty by k-means.
    pub empty_clusters: usize,
}

impl ClusterAssignment {
    pub fn is_flagged(&self) -> bool {
        !self.isolated_vertices.is_empty() || self.empty_clusters > 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
        }
    }
}

/// `I - D^{-1/2} W D^{-1/2}`, with zero-degree rows of the normalised
/// affinity left at zero.
pub fn normalized_laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = w.row(i).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
    })
}

fn check_affinity(w: &DMatrix<f64>) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n {
        return param(format!("affinity must be square, got {}x{}", n, w.ncols()));
    }
    for j in 0..n {
        if w[(j, j)] != 0.0 {
            return param(format!("affinity diagonal entry {j} is nonzero"));
        }
        for i in 0..n {
            let v = w[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                return param(format!(
                    "affinity entry ({i},{j}) = {v} is not a finite nonnegative number"
                ));
            }
            if (v - w[(j, i)]).abs() > 1e-12 * (1.0 + v.abs()) {
                return param(format!("affinity is not symmetric at ({i},{j})"));
            }
        }
    }
    Ok(())
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, k: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centers.row(k).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

struct KMeansRun {
    assign: Vec<usize>,
    inertia: f64,
    empty: usize,
}

fn kmeans_once(points: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> KMeansRun {
    let (n, dim) = points.shape();
    let mut g = rng::stream(seed, ns::KMEANS);
    let mut centers = DMatrix::zeros(k, dim);

    // k-means++ seeding
    let first = g.gen_range(0..n);
    centers.row_mut(0).copy_from(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = g.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            g.gen_range(0..n)
        };
        centers.row_mut(c).copy_from(&points.row(pick));
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(points, i, &centers, c));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, slot) in assign.iter_mut().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    sq_dist(points, i, &centers, a).total_cmp(&sq_dist(points, i, &centers, b))
                })
                .unwrap();
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += points.row(i);
        }
        for c in 0..k {
            // an emptied cluster keeps its old centre
            if counts[c] > 0 {
                let mean = sums.row(c) / counts[c] as f64;
                centers.row_mut(c).copy_from(&mean);
            }
        }
    }

    let inertia = assign
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points, i, &centers, c))
        .sum();
    let mut counts = vec![0usize; k];
    for &c in &assign {
        counts[c] += 1;
    }
    KMeansRun {
        assign,
        inertia,
        empty: counts.iter().filter(|&&c| c == 0).count(),
    }
}

/// Relabels so that clusters are numbered 1, 2, ... in order of first appearance.
pub fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len() + 1;
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

/// Lowest-inertia k-means over `opts.restarts` seeded restarts.
/// Returns 0-based assignments, inertia and the number of empty clusters.
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<(Vec<usize>, f64, usize)> {
    if k == 0 || k > points.nrows() {
        return param(format!(
            "cannot form {k} clusters from {} points",
            points.nrows()
        ));
    }
    let mut best: Option<KMeansRun> = None;
    for r in 0..opts.restarts.max(1) {
        let run = kmeans_once(
            points,
            k,
            rng::derive_seed(seed, ns::KMEANS, r as u64),
            opts.max_iter,
        );
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let b = best.expect("at least one restart");
    Ok((b.assign, b.inertia, b.empty))
}

pub fn spectral_cluster(
    w: &DMatrix<f64>,
    num_clusters: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<ClusterAssignment> {
    let n = w.nrows();
    if num_clusters == 0 || num_clusters > n {
        return param(format!(
            "cannot form {num_clusters} clusters from {n} points"
        ));
    }
    check_affinity(w)?;

    let isolated_vertices: Vec<usize> = (0..n)
        .filter(|&i| w.row(i).iter().all(|v| *v == 0.0))
        .collect();
    let lap = normalized_laplacian(w);
    let (vals, vecs) = sym_eigen_ascending(lap)?;
    let eigenvalues = vals.iter().take(num_clusters + 1).copied().collect();

    let mut embed = vecs.columns(0, num_clusters).into_owned();
    for mut row in embed.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    let (assign, inertia, empty_clusters) = kmeans(&embed, num_clusters, seed, opts)?;
    if !isolated_vertices.is_empty() {
        log::debug!("spectral: {} isolated vertices", isolated_vertices.len());
    }
    Ok(ClusterAssignment {
        labels: canonical_labels(&assign),
        num_clusters,
        inertia,
        eigenvalues,
        isolated_vertices,
        empty_clusters,
    })
}
