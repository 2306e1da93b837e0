//! Dense revised simplex for `min c^T x  s.t.  A x = b, x >= 0`.
//!
//! Two phases with one artificial column per row. The basis inverse is kept
//! explicitly, updated by elementary row operations and refactorised
//! periodically. Dantzig pricing, switching to Bland's rule after a run of
//! degenerate pivots.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LpOptions {
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Phase-one infeasibility tolerance, relative to `1 + max|b|`.
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            opt_tol: 1e-10,
            feas_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 40,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Singular,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: DVector<f64>,
    /// Equality-constraint multipliers `y` with `A^T y <= c` at optimality.
    pub duals: DVector<f64>,
    pub status: LpStatus,
}

struct Revised {
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// +1/-1 per row; rows with negative rhs are negated.
    row_sign: Vec<f64>,
    nv: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
    opts: LpOptions,
}

impl Revised {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>, opts: LpOptions) -> Self {
        let (m, nv) = a.shape();
        let mut a = a.clone();
        let mut b = b.clone();
        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                row_sign[i] = -1.0;
                b[i] = -b[i];
                a.row_mut(i).neg_mut();
            }
        }
        let mut in_basis = vec![false; nv + m];
        for flag in in_basis.iter_mut().skip(nv) {
            *flag = true;
        }
        Revised {
            xb: b.clone(),
            a,
            b,
            row_sign,
            nv,
            basis: (nv..nv + m).collect(),
            in_basis,
            binv: DMatrix::identity(m, m),
            iterations: 0,
            opts,
        }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.nv
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> DVector<f64> {
        if self.is_artificial(j) {
            self.binv.column(j - self.nv).into_owned()
        } else {
            &self.binv * self.a.column(j)
        }
    }

    fn refactor(&mut self) -> bool {
        let m = self.rows();
        let mut bm = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            if self.is_artificial(j) {
                bm[(j - self.nv, k)] = 1.0;
            } else {
                bm.set_column(k, &self.a.column(j));
            }
        }
        match bm.try_inverse() {
            Some(inv) => {
                self.binv = inv;
                self.xb = &self.binv * &self.b;
                for v in self.xb.iter_mut() {
                    if *v < 0.0 && *v > -self.opts.feas_tol {
                        *v = 0.0;
                    }
                }
                true
            }
            None => false,
        }
    }

    fn pivot(&mut self, r: usize, q: usize, w: &DVector<f64>) -> bool {
        let m = self.rows();
        let theta = self.xb[r] / w[r];
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -self.opts.feas_tol {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;

        let piv = w[r];
        let prow = self.binv.row(r) / piv;
        self.binv.set_row(r, &prow);
        for i in 0..m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for c in 0..m {
                    self.binv[(i, c)] -= f * prow[c];
                }
            }
        }

        self.in_basis[self.basis[r]] = false;
        self.basis[r] = q;
        self.in_basis[q] = true;
        self.iterations += 1;
        if self.iterations.is_multiple_of(self.opts.refactor_every) {
            return self.refactor();
        }
        true
    }

    fn duals(&self, cost: &[f64]) -> DVector<f64> {
        let cb = DVector::from_iterator(self.rows(), self.basis.iter().map(|&j| cost[j]));
        self.binv.tr_mul(&cb)
    }

    /// Runs simplex iterations on `cost` (length `nv + m`) until optimal.
    /// Artificial columns never enter; in phase two a basic artificial is
    /// treated as bounded above by zero.
    fn iterate(&mut self, cost: &[f64], phase_two: bool) -> LpStatus {
        let m = self.rows();
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iter {
                return LpStatus::IterationLimit;
            }
            let pi = self.duals(cost);
            let at_pi = self.a.tr_mul(&pi);
            let bland = degenerate_run > 50;

            let mut enter = None;
            let mut best = -self.opts.opt_tol;
            for j in 0..self.nv {
                if self.in_basis[j] {
                    continue;
                }
                let dj = cost[j] - at_pi[j];
                if bland {
                    if dj < -self.opts.opt_tol {
                        enter = Some(j);
                        break;
                    }
                } else if dj < best {
                    best = dj;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return LpStatus::Optimal;
            };

            let w = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_w = 0.0;
            for i in 0..m {
                let artificial = self.is_artificial(self.basis[i]);
                let eff = if phase_two && artificial {
                    w[i].abs()
                } else {
                    w[i]
                };
                if eff <= self.opts.pivot_tol {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / eff;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            // prefer artificials leaving, then larger pivots (Bland: lowest index)
                            let la = self.is_artificial(self.basis[l]);
                            if artificial != la {
                                artificial
                            } else if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                eff > best_w
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = ratio;
                    best_w = eff;
                }
            }
            let Some(r) = leave else {
                return LpStatus::Unbounded;
            };
            if phase_two && self.is_artificial(self.basis[r]) {
                self.xb[r] = 0.0;
            }
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if !self.pivot(r, q, &w) {
                return LpStatus::Singular;
            }
        }
    }

    /// Pivots basic artificials (at zero level) out where a structural column
    /// can replace them; rows where none can are linearly dependent.
    fn drive_out_artificials(&mut self) -> bool {
        for r in 0..self.rows() {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row = self.binv.row(r).transpose();
            let vals = self.a.tr_mul(&row);
            let mut best = None;
            let mut best_abs = 1e-7;
            for j in 0..self.nv {
                if !self.in_basis[j] && vals[j].abs() > best_abs {
                    best_abs = vals[j].abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                self.xb[r] = 0.0;
                let w = self.ftran(q);
                if !self.pivot(r, q, &w) {
                    return false;
                }
            }
        }
        true
    }
}

/// Solves the standard-form LP. Costs must make the problem bounded below for
/// `Optimal` to be reachable; otherwise `Unbounded` is reported.
pub(crate) fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cost: &DVector<f64>,
    opts: LpOptions,
) -> LpSolution {
    let (m, nv) = a.shape();
    let mut lp = Revised::new(a, b, opts);
    let fail = |_: &Revised, status| LpSolution {
        x: DVector::zeros(nv),
        duals: DVector::zeros(m),
        status,
    };

    let mut phase_one = vec![0.0; nv + m];
    for c in phase_one.iter_mut().skip(nv) {
        *c = 1.0;
    }
    let st = lp.iterate(&phase_one, false);
    if st != LpStatus::Optimal {
        return fail(&lp, st);
    }
    if !lp.refactor() {
        return fail(&lp, LpStatus::Singular);
    }
    let scale = 1.0 + lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let infeasibility: f64 = (0..m)
        .filter(|&i| lp.is_artificial(lp.basis[i]))
        .map(|i| lp.xb[i].max(0.0))
        .sum();
    if infeasibility > opts.feas_tol * scale {
        return fail(&lp, LpStatus::Infeasible);
    }
    if !lp.drive_out_artificials() {
        return fail(&lp, LpStatus::Singular);
    }

    let mut phase_two = vec![0.0; nv + m];
    phase_two[..nv].copy_from_slice(cost.as_slice());
    let mut status = LpStatus::Optimal;
    // Re-check optimality on a fresh factorisation; a couple of rounds suffice.
    for _ in 0..3 {
        status = lp.iterate(&phase_two, true);
        if status != LpStatus::Optimal {
            break;
        }
        if !lp.refactor() {
            status = LpStatus::Singular;
            break;
        }
        let pi = lp.duals(&phase_two);
        let at_pi = lp.a.tr_mul(&pi);
        let clean = (0..nv).all(|j| lp.in_basis[j] || cost[j] - at_pi[j] >= -opts.opt_tol);
        if clean {
            break;
        }
    }
    if status != LpStatus::Optimal {
        return fail(&lp, status);
    }

    let mut x = DVector::zeros(nv);
    for (i, &j) in lp.basis.iter().enumerate() {
        if j < nv {
            x[j] = lp.xb[i].max(0.0);
        }
    }
    let mut duals = lp.duals(&phase_two);
    for i in 0..m {
        duals[i] *= lp.row_sign[i];
    }
    LpSolution {
        x,
        duals,
        status: LpStatus::Optimal,
    }
}
