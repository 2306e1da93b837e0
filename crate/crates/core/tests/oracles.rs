//! Library results against independent computations.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use uos_core::certify::inradius::{polar_box_lower_bound, sampled_upper_bound};
use uos_core::certify::{inradius, restricted_basis, tilde_dictionary, InradiusMethod};
use uos_core::complete::{svt_complete, SvtParams};
use uos_core::l1core::{
    brute_force_l1, solve_bp, solve_dual_direction, solve_lasso, L1Tolerances, SolveStatus,
};
use uos_core::linalg::{sym_eigen_ascending, thin_svd};
use uos_core::metrics::{clustering_error, subspace_error};
use uos_core::model::{generate_ensemble, sample_case3, zero_fill, EnsembleParams, GenerationMode};
use uos_core::spectral::normalized_laplacian;

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[test]
fn basis_pursuit_matches_brute_force() {
    let mut g = rng(1);
    let tol = L1Tolerances::default();
    for _ in 0..200 {
        let r = g.gen_range(1..=6);
        let m = g.gen_range(1..=12);
        let a = gaussian(&mut g, r, m);
        // half the targets are built from a sparse combination, so feasible
        let y = if g.gen_bool(0.5) {
            let mut c = DVector::zeros(m);
            for _ in 0..g.gen_range(1..=r.min(m)) {
                c[g.gen_range(0..m)] = g.gen_range(-2.0..2.0);
            }
            &a * c
        } else {
            gaussian_vec(&mut g, r)
        };
        let lp = solve_bp(&a, &y, &tol).unwrap();
        let bf = brute_force_l1(&a, &y, r).unwrap();
        assert_eq!(lp.status, bf.status, "r={r} m={m}");
        if lp.status == SolveStatus::Optimal {
            assert!(
                (lp.objective - bf.objective).abs() <= 1e-6,
                "{} vs {}",
                lp.objective,
                bf.objective
            );
            // weak duality against the oracle's primal point
            let nu = lp.dual.as_ref().unwrap();
            assert!((a.transpose() * nu).amax() <= 1.0 + tol.dual_gap_tol);
            assert!(y.dot(nu) <= l1(&bf.coefficients) + 1e-9);
        }
    }
}

/// Proximal gradient with step `1 / ||A||^2`.
fn ista(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, iters: usize) -> DVector<f64> {
    let step = 1.0 / thin_svd(a).singular_values[0].powi(2);
    let at = a.transpose();
    let mut c = DVector::zeros(a.ncols());
    for _ in 0..iters {
        let grad = &at * (a * &c - y);
        c -= grad * step;
        c.apply(|v| *v = v.signum() * (v.abs() - step * lambda).max(0.0));
    }
    c
}

fn lasso_objective(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, c: &DVector<f64>) -> f64 {
    lambda * l1(c) + 0.5 * (a * c - y).norm_squared()
}

#[test]
fn lasso_matches_long_proximal_gradient() {
    let mut g = rng(2);
    for _ in 0..3 {
        let a = gaussian(&mut g, 5, 8);
        let y = gaussian_vec(&mut g, 5);
        let lambda = 0.3;
        let ours = solve_lasso(&a, &y, lambda, 1e-10, 100_000)
            .unwrap()
            .coefficients;
        let reference = ista(&a, &y, lambda, 1_000_000);
        let (fo, fr) = (
            lasso_objective(&a, &y, lambda, &ours),
            lasso_objective(&a, &y, lambda, &reference),
        );
        assert!((fo - fr).abs() <= 1e-8, "{fo} vs {fr}");
    }
}

#[test]
fn lasso_with_tiny_weight_approaches_basis_pursuit() {
    let mut g = rng(3);
    let a = gaussian(&mut g, 4, 8);
    let y = gaussian_vec(&mut g, 4);
    let bp = solve_bp(&a, &y, &L1Tolerances::default()).unwrap();
    let lasso = solve_lasso(&a, &y, 1e-6, 1e-12, 1_000_000).unwrap();
    assert!((l1(&lasso.coefficients) - bp.objective).abs() <= 1e-3);
}

#[test]
fn dual_direction_value_is_best_polar_vertex() {
    let mut g = rng(4);
    for _ in 0..10 {
        let b = gaussian(&mut g, 3, 8);
        let a = gaussian_vec(&mut g, 3);
        let dir = solve_dual_direction(&a, &b, &L1Tolerances::default()).unwrap();
        let best = polar_vertices(&b)
            .iter()
            .map(|v| a.dot(v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (dir.value - best).abs() <= 1e-7 * (1.0 + best.abs()),
            "{} vs {best}",
            dir.value
        );
        assert!((b.transpose() * &dir.lambda).amax() <= 1.0 + 1e-7);
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// In-radius of the symmetric hull of planar points: distance from the origin
/// to the nearest edge of the convex hull of `+-a_j` (monotone chain).
fn planar_inradius(a: &DMatrix<f64>) -> f64 {
    let mut pts: Vec<(f64, f64)> = a
        .column_iter()
        .flat_map(|c| [(c[0], c[1]), (-c[0], -c[1])])
        .collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    (0..hull.len())
        .map(|k| {
            let (p, q) = (hull[k], hull[(k + 1) % hull.len()]);
            let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
            cross(p, q, (0.0, 0.0)).abs() / len
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn planar_inradius_matches_convex_hull() {
    let mut g = rng(5);
    for m in [2, 3, 5, 9, 20] {
        let a = gaussian(&mut g, 2, m);
        let exact = inradius(&a, InradiusMethod::ExactPolarVertices)
            .unwrap()
            .value;
        let hull = planar_inradius(&a);
        assert!((exact - hull).abs() < 1e-9, "m={m}: {exact} vs {hull}");
    }
}

#[test]
fn spatial_inradius_bounds_and_vertices() {
    let mut g = rng(6);
    for _ in 0..5 {
        let a = sphere_columns(&mut g, 3, 12);
        let exact = inradius(&a, InradiusMethod::ExactPolarVertices)
            .unwrap()
            .value;
        let far = polar_vertices(&a)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!((exact - 1.0 / far).abs() < 1e-9);
        assert!(sampled_upper_bound(&a, 20_000, 1).unwrap() >= exact - 1e-12);
        assert!(polar_box_lower_bound(&a).unwrap() <= exact + 1e-12);
    }
}

#[test]
fn svt_recovers_rank_three() {
    let mut g = rng(7);
    let truth = gaussian(&mut g, 50, 3) * gaussian(&mut g, 3, 150);
    let pattern = sample_case3(50, 150, 0.6, 8).unwrap();
    let ds = zero_fill(&truth, &pattern).unwrap();
    let ind = pattern.indicator();
    let params = SvtParams::default();
    let out = svt_complete(&ds.zero_filled, &ind, &params).unwrap();
    assert!(out.converged && out.iterations <= 500);
    assert!((&out.matrix - &truth).norm() / truth.norm() < 1e-2);
    let fidelity =
        (&out.matrix - &truth).component_mul(&ind).norm() / truth.component_mul(&ind).norm();
    assert!(fidelity <= params.tol);
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k);
            out.push(q);
        }
    }
    out
}

#[test]
fn hungarian_matches_permutation_search() {
    let mut g = rng(9);
    for _ in 0..30 {
        let truth: Vec<usize> = (0..30).map(|_| g.gen_range(1..=4)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| {
                if g.gen_bool(0.3) {
                    g.gen_range(1..=4)
                } else {
                    t
                }
            })
            .collect();
        let best = permutations(4)
            .iter()
            .map(|perm| {
                pred.iter()
                    .zip(&truth)
                    .filter(|(p, t)| perm[**p - 1] != **t)
                    .count()
            })
            .min()
            .unwrap();
        assert_eq!(clustering_error(&pred, &truth).unwrap(), best as f64 / 30.0);
    }
}

#[test]
fn subspace_error_is_largest_principal_angle() {
    let mut g = rng(10);
    for _ in 0..10 {
        let a = orthonormal(&mut g, 50, 3);
        let b = orthonormal(&mut g, 50, 3);
        let s = thin_svd(&a.tr_mul(&b)).singular_values;
        let expected = s[2].clamp(-1.0, 1.0).acos();
        assert!((subspace_error(&a, &b).unwrap() - expected).abs() < 1e-9);
    }
}

fn components(w: &DMatrix<f64>) -> usize {
    let n = w.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

#[test]
fn zero_eigenvalues_count_components() {
    let mut g = rng(11);
    for _ in 0..10 {
        let n = 24;
        let groups: Vec<usize> = (0..n).map(|_| g.gen_range(0..4)).collect();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if groups[i] == groups[j] && g.gen_bool(0.6) {
                    let v = g.gen_range(0.1..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        let (vals, _) = sym_eigen_ascending(normalized_laplacian(&w)).unwrap();
        let isolated = (0..n)
            .filter(|&i| w.row(i).iter().all(|v| *v == 0.0))
            .count();
        let zeros = vals.iter().filter(|v| v.abs() < 1e-10).count();
        // an isolated vertex keeps its identity row, so eigenvalue 1 rather than 0
        assert_eq!(zeros, components(&w) - isolated);
        assert!(vals.iter().all(|v| *v > -1e-8 && *v < 2.0 + 1e-8));
    }
}

#[test]
fn tilde_dictionary_matches_direct_products() {
    let params = EnsembleParams::uniform(12, 3, 2, 8, GenerationMode::OrthonormalUnitSphere);
    let (ens, x) = generate_ensemble(&params, 12).unwrap();
    let pattern = sample_case3(12, 16, 0.5, 13).unwrap();
    let ds = zero_fill(&x, &pattern).unwrap();
    let i = 2;
    let (tilde, _, own) = tilde_dictionary(&ens, &pattern, i);
    let rows = pattern.mask(i);
    let others: Vec<usize> = (0..8).filter(|&j| j != i).collect();
    for (c, &j) in others.iter().enumerate() {
        let direct = own.q.tr_mul(&ds.restricted_column(j, rows));
        assert!((tilde.column(c) - direct).norm() < 1e-12);
    }

    // full observation: an isometry of the coefficients
    let full = sample_case3(12, 16, 1.0, 13).unwrap();
    let (tilde, a_hat, _) = tilde_dictionary(&ens, &full, i);
    for (c, &j) in others.iter().enumerate() {
        assert!((tilde.column(c).norm() - ens.coefficients[0].column(j).norm()).abs() < 1e-10);
    }
    assert!((a_hat.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn restricted_basis_on_nested_masks_is_slicing() {
    let mut g = rng(14);
    let u = orthonormal(&mut g, 10, 3);
    let inner = vec![1, 4, 5, 8];
    let outer = vec![0, 1, 2, 4, 5, 7, 8];
    let rb = restricted_basis(&u, &inner, &outer, 0);
    for (r, &row) in inner.iter().enumerate() {
        assert_eq!(rb.v.row(r), u.row(row));
    }
    let recon = &rb.q * DMatrix::from_diagonal(&rb.sigma) * rb.r.transpose();
    assert!((recon - &rb.v).norm() < 1e-10);
    assert!(rb.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
}
