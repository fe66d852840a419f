//! Bisection on the worst-case SINR target.
//!
//! Each step solves the max-slack cone program at the midpoint of the current
//! bracket: a nonnegative optimal slack raises the lower end and the returned
//! weights become the incumbent, a negative one lowers the upper end. The
//! target is the linear SINR `gamma`; the cone parameter is `sqrt(gamma)`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::complex_gaussian;
use crate::signal::{disturbance_power, pu_interference, quad_form, sinr_all, BeamVector, ReceiverForms};
use crate::socp::{solve, ConeFactors, PhaseAnchor, SolveStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop once `gamma_hi - gamma_lo <= tol_gamma_rel * gamma_hi`.
    pub tol_gamma_rel: f64,
    pub max_bisection: usize,
    pub cone: SolverOptions,
    pub anchor: PhaseAnchor,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_gamma_rel: 1e-4,
            max_bisection: 64,
            cone: SolverOptions::default(),
            anchor: PhaseAnchor::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeamStatus {
    Converged,
    /// `max_bisection` steps ran out before the bracket closed.
    BisectionLimit,
}

/// One bisection step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub slack: f64,
    pub feasible: bool,
    /// Bracket after the step.
    pub gamma_lo: f64,
    pub gamma_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSolution {
    pub w: BeamVector,
    /// Worst-case SINR achieved by `w` (linear).
    pub gamma_star: f64,
    pub sinr_per_rx: Vec<f64>,
    pub pu_interference: f64,
    pub total_power: f64,
    pub bracket: (f64, f64),
    pub bisection_steps: usize,
    pub status: BeamStatus,
    pub trace: Vec<BisectionStep>,
}

impl BeamSolution {
    fn from_weights(w: BeamVector, forms: &ReceiverForms, bracket: (f64, f64), status: BeamStatus, trace: Vec<BisectionStep>) -> Self {
        let sinr_per_rx = sinr_all(&w, forms);
        BeamSolution {
            gamma_star: sinr_per_rx.iter().copied().fold(f64::INFINITY, f64::min),
            sinr_per_rx,
            pu_interference: pu_interference(&w, forms),
            total_power: w.power(),
            bisection_steps: trace.len(),
            w,
            bracket,
            status,
            trace,
        }
    }
}

/// Worst-case SINR ignoring every interference term and spending the whole
/// budget on each receiver separately: `min_j lambda_max(S_j) P_t / c_j`.
/// No feasible weights exceed it.
pub fn upper_bound_gamma(forms: &ReceiverForms, power_budget: f64) -> f64 {
    (0..forms.receivers())
        .map(|j| {
            // the signal form is rank one, so its trace is its largest eigenvalue
            let lambda_max: f64 = forms.signal[j].diagonal().iter().map(|c| c.re).sum();
            lambda_max.max(0.0) * power_budget / forms.noise[j]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Worst-case SINR certified by the real-part restriction at weights `w`:
/// `min_j P_s max(Re(f_j^T w), 0)^2 / (disturbance_j + c_j)`.
pub fn restricted_level(w: &BeamVector, forms: &ReceiverForms) -> f64 {
    (0..forms.receivers())
        .map(|j| {
            let response: Complex64 = forms.desired[j].iter().zip(w.0.iter()).map(|(f, x)| f * x).sum();
            let amplitude = response.re.max(0.0);
            forms.su_power * amplitude * amplitude / disturbance_power(w, forms, j)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn maximize_min_sinr(
    forms: &ReceiverForms,
    interference_cap: f64,
    power_budget: f64,
    settings: &SolverSettings,
) -> Result<BeamSolution> {
    if settings.tol_gamma_rel.is_nan() || settings.tol_gamma_rel <= 0.0 {
        return Err(Error::InvalidConfig("tol_gamma_rel must be positive".into()));
    }
    let relays = forms.relays();
    let upper = upper_bound_gamma(forms, power_budget);
    if upper.is_nan() || upper <= 0.0 {
        return Ok(BeamSolution::from_weights(
            BeamVector::zeros(relays),
            forms,
            (0.0, 0.0),
            BeamStatus::Converged,
            Vec::new(),
        ));
    }
    let factors = ConeFactors::new(forms)?;
    let (mut lo, mut hi) = (0.0, upper);
    let mut best = BeamVector::zeros(relays);
    let mut trace = Vec::new();
    let converged = |lo: f64, hi: f64| hi - lo <= settings.tol_gamma_rel * hi.max(1e-12);
    while !converged(lo, hi) && trace.len() < settings.max_bisection {
        let mid = 0.5 * (lo + hi);
        let problem = factors.problem(mid.sqrt(), interference_cap, power_budget, settings.anchor);
        let sol = solve(&problem.cone, &settings.cone);
        let x = match (sol.status, &sol.x) {
            (SolveStatus::Optimal, Some(x)) => x,
            (status, _) => return Err(Error::SolverFailure { gamma: mid, status }),
        };
        let feasible = sol.slack >= 0.0;
        if feasible {
            let w = problem.beam(x);
            // the incumbent may certify more than the midpoint
            lo = restricted_level(&w, forms).clamp(mid, hi);
            best = w;
        } else {
            hi = mid;
        }
        log::debug!("bisection gamma={mid:.6e} slack={:.3e} bracket=[{lo:.6e}, {hi:.6e}]", sol.slack);
        trace.push(BisectionStep {
            gamma: mid,
            slack: sol.slack,
            feasible,
            gamma_lo: lo,
            gamma_hi: hi,
        });
    }
    let status = if converged(lo, hi) {
        BeamStatus::Converged
    } else {
        BeamStatus::BisectionLimit
    };
    Ok(BeamSolution::from_weights(best, forms, (lo, hi), status, trace))
}

pub const ORACLE_MAX_RELAYS: usize = 3;
const ORACLE_RADII: usize = 100;
const ORACLE_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub gamma_best: f64,
    pub w_best: BeamVector,
}

/// Random-search lower bound on the max-min SINR.
///
/// Directions are drawn uniformly on the complex unit sphere. Along each
/// direction the radii `sqrt(P_t) k / 100` for `k = 1..=100` are scanned,
/// together with the radius at which the primary receiver cap becomes
/// tight; points violating the cap are discarded. Work is split into fixed
/// chunks with per-chunk ChaCha streams, so the result does not depend on
/// the thread count.
pub fn grid_oracle(
    forms: &ReceiverForms,
    interference_cap: f64,
    power_budget: f64,
    n_samples: usize,
    seed: u64,
) -> Result<OracleResult> {
    let relays = forms.relays();
    if relays > ORACLE_MAX_RELAYS {
        return Err(Error::OracleTooLarge {
            relays,
            max: ORACLE_MAX_RELAYS,
        });
    }
    let n = forms.receivers();
    let disturbance: Vec<_> = (0..n).map(|j| forms.disturbance(j)).collect();
    let chunks = n_samples.div_ceil(ORACLE_CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = ORACLE_CHUNK.min(n_samples - chunk * ORACLE_CHUNK);
            let mut best = (0.0f64, DVector::<Complex64>::zeros(relays));
            let mut signal = vec![0.0; n];
            let mut dist = vec![0.0; n];
            let mut radii = Vec::with_capacity(ORACLE_RADII + 1);
            for _ in 0..count {
                let mut u = DVector::from_fn(relays, |_, _| complex_gaussian(&mut rng));
                let len = u.norm();
                if len == 0.0 {
                    continue;
                }
                u /= Complex64::from(len);
                for j in 0..n {
                    signal[j] = quad_form(&forms.signal[j], &u).max(0.0);
                    dist[j] = quad_form(&disturbance[j], &u).max(0.0);
                }
                let pu = quad_form(&forms.pu_rx, &u).max(0.0);
                radii.clear();
                radii.extend((1..=ORACLE_RADII).map(|k| power_budget * (k as f64 / ORACLE_RADII as f64).powi(2)));
                if pu * power_budget > interference_cap {
                    radii.push(interference_cap / pu);
                }
                for &r2 in &radii {
                    if r2 * pu > interference_cap {
                        continue;
                    }
                    let level = (0..n)
                        .map(|j| r2 * signal[j] / (r2 * dist[j] + forms.noise[j]))
                        .fold(f64::INFINITY, f64::min);
                    if level > best.0 {
                        best = (level, &u * Complex64::from(r2.sqrt()));
                    }
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0f64, DVector::zeros(relays)), |acc, b| if b.0 > acc.0 { b } else { acc });
    Ok(OracleResult {
        gamma_best: best.0,
        w_best: BeamVector(best.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{sample_channels, ChannelSet, ScenarioConfig};
    use crate::signal::forms_for;
    use nalgebra::DMatrix;

    fn scalar_forms() -> ReceiverForms {
        let one = Complex64::new(1.0, 0.0);
        let ch = ChannelSet {
            su_to_relay: DMatrix::from_element(1, 1, one),
            pu_to_relay: DVector::from_element(1, one),
            relay_to_su: DMatrix::from_element(1, 1, one),
            relay_to_pu: DVector::from_element(1, one),
        };
        forms_for(&ScenarioConfig::new(1, 1), &ch).unwrap()
    }

    #[test]
    fn scalar_upper_bound() {
        let f = scalar_forms();
        assert!((upper_bound_gamma(&f, 3.0) - 1.0).abs() < 1e-15);
        assert!((upper_bound_gamma(&f, 6.0) - 2.0 * upper_bound_gamma(&f, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn deaf_receiver_bound_is_zero() {
        let cfg = ScenarioConfig { seed: 1, ..ScenarioConfig::new(3, 2) };
        let mut ch = sample_channels(&cfg);
        ch.relay_to_su.row_mut(0).fill(Complex64::default());
        let f = forms_for(&cfg, &ch).unwrap();
        assert_eq!(upper_bound_gamma(&f, 10.0), 0.0);
        let sol = maximize_min_sinr(&f, 1.0, 10.0, &SolverSettings::default()).unwrap();
        assert_eq!(sol.gamma_star, 0.0);
        assert_eq!(sol.total_power, 0.0);
    }

    #[test]
    fn scalar_power_limited() {
        let sol = maximize_min_sinr(&scalar_forms(), 2.0, 3.0, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, BeamStatus::Converged);
        assert!((sol.gamma_star - 1.0 / 3.0).abs() < 1e-3, "{}", sol.gamma_star);
        assert!((sol.total_power - 3.0).abs() < 1e-2);
    }

    #[test]
    fn scalar_interference_limited() {
        let sol = maximize_min_sinr(&scalar_forms(), 0.5, 3.0, &SolverSettings::default()).unwrap();
        assert!((sol.gamma_star - 1.0 / 6.0).abs() < 1e-3, "{}", sol.gamma_star);
        assert!((sol.total_power - 0.75).abs() < 1e-2);
        assert!(sol.pu_interference <= 0.5 * (1.0 + 1e-6));
    }

    #[test]
    fn scalar_oracle() {
        let o = grid_oracle(&scalar_forms(), 2.0, 3.0, 20_000, 1).unwrap();
        assert!((o.gamma_best - 1.0 / 3.0).abs() < 0.01 / 3.0, "{}", o.gamma_best);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let cfg = ScenarioConfig::new(4, 1);
        let f = forms_for(&cfg, &sample_channels(&cfg)).unwrap();
        assert!(matches!(grid_oracle(&f, 1.0, 1.0, 10, 0), Err(Error::OracleTooLarge { relays: 4, .. })));
    }

    #[test]
    fn oracle_points_are_feasible() {
        let cfg = ScenarioConfig { seed: 9, ..ScenarioConfig::new(3, 2) };
        let f = forms_for(&cfg, &sample_channels(&cfg)).unwrap();
        let o = grid_oracle(&f, 0.2, 2.0, 5_000, 3).unwrap();
        assert!(o.gamma_best > 0.0);
        assert!(o.w_best.power() <= 2.0 * (1.0 + 1e-12));
        assert!(pu_interference(&o.w_best, &f) <= 0.2 * (1.0 + 1e-12));
    }
}
