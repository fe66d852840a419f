//! Second-order cone algebra on plain slices: Jordan product and inverse,
//! step-to-boundary, and Nesterov-Todd scaling.
//!
//! A vector `u = (u0, u1)` lies in the cone when `u0 >= ||u1||`. A cone of
//! dimension one is the nonnegative ray.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `u0 - ||u1||`; nonnegative inside the cone.
pub(crate) fn margin(u: &[f64]) -> f64 {
    u[0] - norm(&u[1..])
}

/// `u0^2 - ||u1||^2`, computed as a product to limit cancellation.
pub(crate) fn det(u: &[f64]) -> f64 {
    let n = norm(&u[1..]);
    (u[0] - n) * (u[0] + n)
}

/// `out = u o v = (u^T v, u0 v1 + v0 u1)`.
pub(crate) fn jordan_prod(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = dot(u, v);
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
}

/// Solves `lambda o out = v` for `out`. `lambda` must be interior.
pub(crate) fn jordan_div(lambda: &[f64], v: &[f64], out: &mut [f64]) {
    let l0 = lambda[0];
    let d = det(lambda);
    let u0 = (l0 * v[0] - dot(&lambda[1..], &v[1..])) / d;
    out[0] = u0;
    for i in 1..lambda.len() {
        out[i] = (v[i] - u0 * lambda[i]) / l0;
    }
}

/// Largest `alpha >= 0` with `s + alpha ds` in the cone, for interior `s`.
/// Returns `f64::INFINITY` if the ray never leaves the cone.
pub(crate) fn max_step(s: &[f64], ds: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    if ds[0] < 0.0 {
        best = -s[0] / ds[0];
    }
    if s.len() == 1 {
        return best;
    }
    // (s0 + a d0)^2 - ||s1 + a d1||^2 = qa a^2 + 2 qb a + qc
    let qa = ds[0] * ds[0] - dot(&ds[1..], &ds[1..]);
    let qb = s[0] * ds[0] - dot(&s[1..], &ds[1..]);
    let qc = det(s).max(0.0);
    let scale = ds[0] * ds[0] + dot(&ds[1..], &ds[1..]);
    if qa.abs() <= 1e-15 * scale {
        if qb < 0.0 {
            best = best.min(-qc / (2.0 * qb));
        }
        return best;
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return best;
    }
    let q = -(qb + qb.signum() * disc.sqrt());
    for root in [q / qa, if q != 0.0 { qc / q } else { f64::INFINITY }] {
        if root > 0.0 {
            best = best.min(root);
        }
    }
    best
}

/// Nesterov-Todd scaling `W = eta * Wbar` for one cone, with
/// `W z = W^{-1} s = lambda`.
///
/// `Wbar = [[w0, w1^T], [w1, I + w1 w1^T / (1 + w0)]]`, where
/// `w = (s/sqrt(det s) + J z/sqrt(det z)) / (2 gamma)` has `w0^2 - ||w1||^2 = 1`.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    eta: f64,
    w: Vec<f64>,
}

impl NtScaling {
    pub(crate) fn new(s: &[f64], z: &[f64]) -> Option<Self> {
        let ds = det(s);
        let dz = det(z);
        if !(ds > 0.0 && dz > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
            return None;
        }
        let (rs, rz) = (ds.sqrt(), dz.sqrt());
        let eta = (rs / rz).sqrt();
        let mut sz = 0.0;
        for i in 0..s.len() {
            sz += s[i] / rs * z[i] / rz;
        }
        let gamma = ((1.0 + sz) / 2.0).sqrt();
        let mut w = Vec::with_capacity(s.len());
        w.push((s[0] / rs + z[0] / rz) / (2.0 * gamma));
        for i in 1..s.len() {
            w.push((s[i] / rs - z[i] / rz) / (2.0 * gamma));
        }
        // w0 is determined by w1 on the hyperboloid; recompute for accuracy.
        w[0] = (1.0 + dot(&w[1..], &w[1..])).sqrt();
        if !(eta.is_finite() && w.iter().all(|v| v.is_finite())) {
            return None;
        }
        Some(NtScaling { eta, w })
    }

    fn apply_bar(&self, v: &[f64], out: &mut [f64], sign: f64) {
        let w0 = self.w[0];
        let w1 = &self.w[1..];
        let w1v1 = dot(w1, &v[1..]);
        out[0] = w0 * v[0] + sign * w1v1;
        let coef = sign * v[0] + w1v1 / (1.0 + w0);
        for i in 1..v.len() {
            out[i] = v[i] + coef * w1[i - 1];
        }
    }

    /// `out = W v`.
    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.apply_bar(v, out, 1.0);
        out.iter_mut().for_each(|o| *o *= self.eta);
    }

    /// `out = W^{-1} v`.
    pub(crate) fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        self.apply_bar(v, out, -1.0);
        out.iter_mut().for_each(|o| *o /= self.eta);
    }
}
