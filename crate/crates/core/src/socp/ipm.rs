//! Primal-dual interior-point method for second-order cone programs.
//!
//! The problem is brought to the standard form
//!
//! ```text
//! minimize c^T x   subject to   G x + s = h,   s in K
//! ```
//!
//! with `G = -A`, `h = b`, `c = -objective`, and solved through the
//! homogeneous self-dual embedding with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector. The embedding yields either an optimal
//! pair or a certificate of primal or dual infeasibility. Newton systems are
//! reduced to the normal equations `G^T W^-2 G`, factored densely, and
//! polished with a few steps of iterative refinement on the full KKT system.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cone::{self, NtScaling};
use super::{ConeProblem, ConeSolution, Residuals, SolveStatus, SolverOptions};

const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-12;
const REFINE_STEPS: usize = 3;

struct Standard {
    g: DMatrix<f64>,
    h: DVector<f64>,
    c: DVector<f64>,
    /// `(offset, dim)` per cone.
    blocks: Vec<(usize, usize)>,
}

impl Standard {
    fn new(p: &ConeProblem) -> Self {
        let m = p.num_rows();
        let n = p.num_vars;
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        let mut blocks = Vec::with_capacity(p.cones.len());
        let mut off = 0;
        for c in &p.cones {
            let k = c.dim();
            g.rows_mut(off, k).copy_from(&(-&c.a));
            h.rows_mut(off, k).copy_from(&c.b);
            blocks.push((off, k));
            off += k;
        }
        Standard {
            g,
            h,
            c: -&p.objective,
            blocks,
        }
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.h.len());
        for &(off, _) in &self.blocks {
            e[off] = 1.0;
        }
        e
    }

    /// Smallest `alpha` such that `u + alpha e` is in the cone.
    fn shift_needed(&self, u: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|&(off, k)| -cone::margin(&u.as_slice()[off..off + k]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_step(&self, u: &DVector<f64>, du: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|&(off, k)| cone::max_step(&u.as_slice()[off..off + k], &du.as_slice()[off..off + k]))
            .fold(f64::INFINITY, f64::min)
    }

    fn jordan_prod(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for &(off, k) in &self.blocks {
            let r = off..off + k;
            cone::jordan_prod(&u.as_slice()[r.clone()], &v.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
        }
        out
    }

    fn jordan_div(&self, lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for &(off, k) in &self.blocks {
            let r = off..off + k;
            cone::jordan_div(&lambda.as_slice()[r.clone()], &v.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
        }
        out
    }
}

struct Scaling<'a> {
    blocks: &'a [(usize, usize)],
    cones: Vec<NtScaling>,
}

impl<'a> Scaling<'a> {
    fn new(blocks: &'a [(usize, usize)], s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let cones = blocks
            .iter()
            .map(|&(off, k)| NtScaling::new(&s.as_slice()[off..off + k], &z.as_slice()[off..off + k]))
            .collect::<Option<Vec<_>>>()?;
        Some(Scaling { blocks, cones })
    }

    fn map(&self, v: &[f64], out: &mut [f64], inverse: bool) {
        for (w, &(off, k)) in self.cones.iter().zip(self.blocks) {
            let r = off..off + k;
            if inverse {
                w.apply_inv(&v[r.clone()], &mut out[r]);
            } else {
                w.apply(&v[r.clone()], &mut out[r]);
            }
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        self.map(v.as_slice(), out.as_mut_slice(), false);
        out
    }

    fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        self.map(v.as_slice(), out.as_mut_slice(), true);
        out
    }
}

/// Factored `[[0, G^T], [G, -W^2]]`.
struct Kkt<'a> {
    g: &'a DMatrix<f64>,
    w: &'a Scaling<'a>,
    winv_g: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

fn regularized_cholesky(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    let mut delta = 1e-14 * max_diag;
    for _ in 0..6 {
        for i in 0..n {
            m[(i, i)] += delta;
        }
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(ch);
        }
        delta *= 100.0;
    }
    None
}

impl<'a> Kkt<'a> {
    fn new(g: &'a DMatrix<f64>, w: &'a Scaling<'a>) -> Option<Self> {
        let mut winv_g = DMatrix::zeros(g.nrows(), g.ncols());
        for j in 0..g.ncols() {
            let col = g.column(j);
            let mut out = winv_g.column_mut(j);
            w.map(col.as_slice(), out.as_mut_slice(), true);
        }
        let chol = regularized_cholesky(winv_g.tr_mul(&winv_g))?;
        Some(Kkt { g, w, winv_g, chol })
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let t = self.w.apply_inv(r2);
        let dx = self.chol.solve(&(r1 + self.winv_g.tr_mul(&t)));
        let dz = self.w.apply_inv(&(&self.winv_g * &dx - t));
        (dx, dz)
    }

    /// Solves `G^T dz = r1`, `G dx - W^2 dz = r2`.
    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dx, mut dz) = self.solve_once(r1, r2);
        let scale = 1.0 + r1.amax().max(r2.amax());
        for _ in 0..REFINE_STEPS {
            let e1 = r1 - self.g.tr_mul(&dz);
            let e2 = r2 - (self.g * &dx - self.w.apply(&self.w.apply(&dz)));
            if e1.amax().max(e2.amax()) <= 1e-15 * scale {
                break;
            }
            let (cx, cz) = self.solve_once(&e1, &e2);
            dx += cx;
            dz += cz;
        }
        (dx, dz)
    }
}

fn failure(status: SolveStatus, iterations: usize, residuals: Residuals) -> ConeSolution {
    ConeSolution {
        status,
        x: None,
        slack: f64::NAN,
        iterations,
        residuals,
    }
}

/// Solves `problem` to the requested tolerances. Deterministic: the same
/// input always yields the same output.
pub fn solve(problem: &ConeProblem, opts: &SolverOptions) -> ConeSolution {
    if problem.validate().is_err() {
        return failure(SolveStatus::NumericalFailure, 0, Residuals::default());
    }
    if problem.cones.is_empty() {
        return if problem.objective.iter().all(|v| *v == 0.0) {
            ConeSolution {
                status: SolveStatus::Optimal,
                x: Some(DVector::zeros(problem.num_vars)),
                slack: 0.0,
                iterations: 0,
                residuals: Residuals::default(),
            }
        } else {
            failure(SolveStatus::Unbounded, 0, Residuals::default())
        };
    }

    let sf = Standard::new(problem);
    let (g, h, c) = (&sf.g, &sf.h, &sf.c);
    let e = sf.identity();
    let degree = sf.blocks.len() as f64;
    let h_scale = h.norm().max(1.0);
    let c_scale = c.norm().max(1.0);

    // Least-squares starting point, shifted into the cone interior.
    let Some(gtg) = regularized_cholesky(g.tr_mul(g)) else {
        return failure(SolveStatus::NumericalFailure, 0, Residuals::default());
    };
    let mut x = gtg.solve(&g.tr_mul(h));
    let mut s = h - g * &x;
    let alpha_p = sf.shift_needed(&s);
    if alpha_p >= 0.0 {
        s += &e * (1.0 + alpha_p);
    }
    let mut z = g * gtg.solve(&(-c));
    let alpha_d = sf.shift_needed(&z);
    if alpha_d >= 0.0 {
        z += &e * (1.0 + alpha_d);
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut residuals = Residuals::default();
    for iter in 0..opts.max_iter {
        let rx = g.tr_mul(&z) + c * tau;
        let rz = g * &x + &s - h * tau;
        let cx = c.dot(&x);
        let hz = h.dot(&z);
        let rtau = kappa + cx + hz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (degree + 1.0);

        let pcost = cx / tau;
        let dcost = -hz / tau;
        let gap = sz / (tau * tau);
        residuals = Residuals {
            primal: rz.norm() / tau / h_scale,
            dual: rx.norm() / tau / c_scale,
            gap,
        };
        if !(residuals.primal.is_finite() && residuals.dual.is_finite() && gap.is_finite()) {
            return failure(SolveStatus::NumericalFailure, iter, residuals);
        }
        let rel_gap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        if residuals.primal < opts.tol_feas
            && residuals.dual < opts.tol_feas
            && (gap < opts.tol_gap || rel_gap < opts.tol_gap)
        {
            let xs = &x / tau;
            return ConeSolution {
                status: SolveStatus::Optimal,
                slack: problem.objective.dot(&xs),
                x: Some(xs),
                iterations: iter,
                residuals,
            };
        }
        if hz < 0.0 && g.tr_mul(&z).norm() <= opts.tol_feas * -hz {
            return failure(SolveStatus::Infeasible, iter, residuals);
        }
        if cx < 0.0 && (g * &x + &s).norm() <= opts.tol_feas * -cx {
            return failure(SolveStatus::Unbounded, iter, residuals);
        }

        let Some(w) = Scaling::new(&sf.blocks, &s, &z) else {
            return failure(SolveStatus::NumericalFailure, iter, residuals);
        };
        let lambda = w.apply(&z);
        let Some(kkt) = Kkt::new(g, &w) else {
            return failure(SolveStatus::NumericalFailure, iter, residuals);
        };
        let (x1, z1) = kkt.solve(&(-c), h);
        let tau_den = c.dot(&x1) + h.dot(&z1) - kappa / tau;

        // Newton direction for target complementarity `ds_target`, `dk_target`
        // and residual reduction factor `keep` (1 - sigma).
        let direction = |keep: f64, ds_target: &DVector<f64>, dk_target: f64| {
            let u = sf.jordan_div(&lambda, ds_target);
            let wu = w.apply(&u);
            let (x2, z2) = kkt.solve(&(-&rx * keep), &(-&rz * keep + &wu));
            let dtau = (-keep * rtau + dk_target / tau - c.dot(&x2) - h.dot(&z2)) / tau_den;
            let dx = x2 + &x1 * dtau;
            let dz = z2 + &z1 * dtau;
            let ds = -wu - w.apply(&w.apply(&dz));
            let dkappa = -(dk_target + kappa * dtau) / tau;
            (dx, ds, dz, dtau, dkappa)
        };
        let step_to_boundary = |ds: &DVector<f64>, dz: &DVector<f64>, dtau: f64, dkappa: f64| {
            let mut a = sf.max_step(&s, ds).min(sf.max_step(&z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let ll = sf.jordan_prod(&lambda, &lambda);
        let (_, ds_a, dz_a, dtau_a, dkappa_a) = direction(1.0, &ll, kappa * tau);
        let alpha_a = step_to_boundary(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);

        // corrector
        let cross = sf.jordan_prod(&w.apply_inv(&ds_a), &w.apply(&dz_a));
        let ds_target = ll + cross - &e * (sigma * mu);
        let dk_target = kappa * tau + dkappa_a * dtau_a - sigma * mu;
        let (dx, ds, dz, dtau, dkappa) = direction(1.0 - sigma, &ds_target, dk_target);
        let alpha = (STEP_FRACTION * step_to_boundary(&ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha.is_finite() && alpha > MIN_STEP) {
            return failure(SolveStatus::NumericalFailure, iter, residuals);
        }
        x += dx * alpha;
        s += ds * alpha;
        z += dz * alpha;
        tau += dtau * alpha;
        kappa += dkappa * alpha;
    }
    failure(SolveStatus::MaxIterations, opts.max_iter, residuals)
}
