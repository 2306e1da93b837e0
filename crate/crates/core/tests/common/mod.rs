#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(g: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| g.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(g: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| g.sample::<f64, _>(StandardNormal))
}

/// Columns drawn uniformly from the unit sphere.
pub fn sphere_columns(g: &mut ChaCha8Rng, d: usize, m: usize) -> DMatrix<f64> {
    let mut a = gaussian(g, d, m);
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    a
}

/// Orthonormal `n x d` basis from a Gaussian matrix.
pub fn orthonormal(g: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    gaussian(g, n, d).qr().q().columns(0, d).into_owned()
}

/// Calls `f` on every `k`-subset of `0..m`.
pub fn subsets(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for j in start..m {
            cur.push(j);
            rec(j + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::new(), f);
}

/// Vertices of `{x : |a_j^T x| <= 1}` found by solving every `d x d` active
/// system with every sign pattern.
pub fn polar_vertices(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (d, m) = a.shape();
    let mut out = Vec::new();
    subsets(m, d, &mut |s| {
        let sub = DMatrix::from_fn(d, d, |r, c| a[(c, s[r])]);
        let Some(inv) = sub.try_inverse() else { return };
        for bits in 0..(1usize << d) {
            let rhs = DVector::from_fn(d, |k, _| if bits & (1 << k) != 0 { -1.0 } else { 1.0 });
            let x = &inv * rhs;
            if (a.transpose() * &x).amax() <= 1.0 + 1e-9 {
                out.push(x);
            }
        }
    });
    out
}
