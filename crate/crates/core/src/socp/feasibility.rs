//! Max-slack cone program for a fixed SINR target.
//!
//! For a target `gamma = rho^2` the variables are `x = [Re w; Im w; t]` and
//! the program maximizes `t` subject to
//!
//! ```text
//! sqrt(P_s) Re(f_j^T w) - t >= rho * || [L_j x~ ; sqrt(c_j)] ||   per receiver j
//! sqrt(I_p)             - t >= || L_p x~ ||                        primary receiver
//! sqrt(P_t)             - t >= || x~ ||                            relay power
//! ```
//!
//! where `L^T L` is the lifted disturbance form (or the primary receiver
//! form). An optimal `t* >= 0` certifies that every receiver reaches
//! `gamma`. Using the real part of `f_j^T w` restricts the exact
//! `|f_j^T w|` constraint to a convex set; with a single receiver the two
//! coincide up to a global phase.

use nalgebra::{DMatrix, DVector, RowDVector};

use super::lift::{lift_functional, lift_hermitian, unlift_vector};
use super::{ConeBlock, ConeProblem};
use crate::error::{Error, Result};
use crate::signal::{BeamVector, ReceiverForms};

/// Optional pinning of the global phase of `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseAnchor {
    /// No phase constraint.
    #[default]
    Free,
    /// Require `Im(f_j^T w) = 0` for receiver `j`. The constraint is
    /// eliminated by optimizing over an orthonormal basis of its null space.
    Receiver(usize),
}

/// Upper-triangular `U` with `U^T U = q`, adding diagonal jitter of at most
/// `1e-12 * max(diag)` when `q` is only semidefinite.
pub(crate) fn psd_factor(q: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if let Some(ch) = q.clone().cholesky() {
        return Ok(ch.l().transpose());
    }
    let max_diag = q.diagonal().iter().copied().fold(0.0, f64::max);
    let jitter = if max_diag > 0.0 { 1e-12 * max_diag } else { 1e-12 };
    let mut shifted = q.clone();
    for i in 0..q.nrows() {
        shifted[(i, i)] += jitter;
    }
    shifted
        .cholesky()
        .map(|ch| ch.l().transpose())
        .ok_or_else(|| Error::Factorization { what: what.to_string() })
}

/// Everything in the feasibility program that does not depend on the target,
/// factored once per channel realization.
#[derive(Debug, Clone)]
pub struct ConeFactors {
    relays: usize,
    /// `sqrt(P_s) * Re(f_j^T .)` as a row over `x~`.
    signal_rows: Vec<RowDVector<f64>>,
    /// `Im(f_j^T .)` rows, used for phase anchoring.
    phase_rows: Vec<RowDVector<f64>>,
    disturbance: Vec<DMatrix<f64>>,
    noise_sqrt: Vec<f64>,
    pu_factor: DMatrix<f64>,
}

impl ConeFactors {
    pub fn new(forms: &ReceiverForms) -> Result<Self> {
        let n = forms.receivers();
        let ps_sqrt = forms.su_power.sqrt();
        let mut signal_rows = Vec::with_capacity(n);
        let mut phase_rows = Vec::with_capacity(n);
        let mut disturbance = Vec::with_capacity(n);
        for j in 0..n {
            let (re, im) = lift_functional(&forms.desired[j]);
            signal_rows.push(re * ps_sqrt);
            phase_rows.push(im);
            let lifted = lift_hermitian(&forms.disturbance(j))?;
            disturbance.push(psd_factor(&lifted, &format!("disturbance form of receiver {j}"))?);
        }
        let pu_factor = psd_factor(&lift_hermitian(&forms.pu_rx)?, "primary receiver form")?;
        Ok(ConeFactors {
            relays: forms.relays(),
            signal_rows,
            phase_rows,
            disturbance,
            noise_sqrt: forms.noise.iter().map(|c| c.sqrt()).collect(),
            pu_factor,
        })
    }

    pub fn receivers(&self) -> usize {
        self.signal_rows.len()
    }

    /// Orthonormal basis of `{x~ : Im(f_j^T w) = 0}` via a Householder
    /// reflection, or `None` when `f_j` vanishes.
    fn anchor_basis(&self, j: usize) -> Option<DMatrix<f64>> {
        let b = self.phase_rows[j].transpose();
        let nb = b.norm();
        if nb == 0.0 {
            return None;
        }
        let dim = b.len();
        let mut v = &b / nb;
        v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
        let vv = v.norm_squared();
        let house = DMatrix::<f64>::identity(dim, dim) - (&v * v.transpose()) * (2.0 / vv);
        Some(house.columns(1, dim - 1).into_owned())
    }

    /// The program for SINR target `rho^2`.
    pub fn problem(&self, rho: f64, interference_cap: f64, power_budget: f64, anchor: PhaseAnchor) -> FeasibilityProblem {
        let r2 = 2 * self.relays;
        let basis = match anchor {
            PhaseAnchor::Free => None,
            PhaseAnchor::Receiver(j) => self.anchor_basis(j.min(self.receivers().saturating_sub(1))),
        };
        let width = basis.as_ref().map_or(r2, |b| b.ncols());
        let n = width + 1;
        // row over x~ mapped onto the problem variables (without t)
        let map = |m: DMatrix<f64>| -> DMatrix<f64> {
            match &basis {
                Some(b) => m * b,
                None => m,
            }
        };
        // first row `head . x~ - t + b0`, then `tail . x~ + b_tail`
        let block = |name: String, head: DMatrix<f64>, b0: f64, tail: DMatrix<f64>, b_tail: DVector<f64>| {
            let k = 1 + tail.nrows();
            let mut a = DMatrix::zeros(k, n);
            a.view_mut((0, 0), (1, width)).copy_from(&map(head));
            a[(0, width)] = -1.0;
            a.view_mut((1, 0), (k - 1, width)).copy_from(&map(tail));
            let mut b = DVector::zeros(k);
            b[0] = b0;
            b.rows_mut(1, k - 1).copy_from(&b_tail);
            ConeBlock::new(name, a, b)
        };

        let mut cones = Vec::with_capacity(self.receivers() + 2);
        for j in 0..self.receivers() {
            let mut tail = DMatrix::zeros(r2 + 1, r2);
            tail.view_mut((0, 0), (r2, r2)).copy_from(&(&self.disturbance[j] * rho));
            let mut b_tail = DVector::zeros(r2 + 1);
            b_tail[r2] = rho * self.noise_sqrt[j];
            cones.push(block(
                format!("sinr[{j}]"),
                DMatrix::from_row_slice(1, r2, self.signal_rows[j].as_slice()),
                0.0,
                tail,
                b_tail,
            ));
        }
        cones.push(block(
            "pu_cap".into(),
            DMatrix::zeros(1, r2),
            interference_cap.sqrt(),
            self.pu_factor.clone(),
            DVector::zeros(r2),
        ));
        cones.push(block(
            "power".into(),
            DMatrix::zeros(1, r2),
            power_budget.sqrt(),
            DMatrix::identity(r2, r2),
            DVector::zeros(r2),
        ));
        let mut objective = DVector::zeros(n);
        objective[width] = 1.0;
        FeasibilityProblem {
            cone: ConeProblem {
                num_vars: n,
                objective,
                cones,
            },
            basis,
        }
    }
}

/// A max-slack program together with the map back to relay weights.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub cone: ConeProblem,
    basis: Option<DMatrix<f64>>,
}

impl FeasibilityProblem {
    /// Relay weights encoded in a solution vector.
    pub fn beam(&self, x: &DVector<f64>) -> BeamVector {
        let y = x.rows(0, x.len() - 1).into_owned();
        let lifted = match &self.basis {
            Some(b) => b * y,
            None => y,
        };
        BeamVector(unlift_vector(lifted.as_slice()))
    }

    /// The slack variable `t` of a solution vector.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        x[x.len() - 1]
    }

    /// Problem variables for weights `w` and slack `t`. With an anchor, `w`
    /// is projected onto the anchored subspace.
    pub fn point(&self, w: &BeamVector, t: f64) -> DVector<f64> {
        let lifted = super::lift::lift_vector(&w.0);
        let y = match &self.basis {
            Some(b) => b.tr_mul(&lifted),
            None => lifted,
        };
        let mut x = DVector::zeros(y.len() + 1);
        x.rows_mut(0, y.len()).copy_from(&y);
        x[y.len()] = t;
        x
    }
}

pub fn build_feasibility(
    forms: &ReceiverForms,
    rho: f64,
    interference_cap: f64,
    power_budget: f64,
    anchor: PhaseAnchor,
) -> Result<FeasibilityProblem> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("cone parameter rho must be nonnegative, got {rho}")));
    }
    Ok(ConeFactors::new(forms)?.problem(rho, interference_cap, power_budget, anchor))
}
