//! Generators and independent checks shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use relay_beamform_core::optimizer::{maximize_min_sinr, upper_bound_gamma, BeamSolution, BeamStatus, SolverSettings};
use relay_beamform_core::scenario::{sample_channels, ChannelSet, ScenarioConfig};
use relay_beamform_core::signal::{forms_for, pu_interference, sinr_all, BeamVector, ReceiverForms};
use relay_beamform_core::socp::{lift_functional, lift_hermitian, lift_vector, ConeBlock, ConeProblem};
use relay_beamform_core::units::db_to_linear;

pub type Check = Result<(), String>;

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_beam<R: Rng>(rng: &mut R, relays: usize) -> BeamVector {
    BeamVector(DVector::from_fn(relays, |_, _| random_complex(rng)))
}

/// Scenario with `relays` in 1..=max_relays, 1..=max_pairs pairs and powers
/// drawn uniformly in dB.
pub fn random_config<R: Rng>(rng: &mut R, max_relays: usize, max_pairs: usize) -> ScenarioConfig {
    let db = |rng: &mut R, lo: f64, hi: f64| db_to_linear(rng.random_range(lo..hi));
    let noise_var = db(rng, -3.0, 3.0);
    ScenarioConfig {
        relays: rng.random_range(1..=max_relays),
        transmitters: 0,
        receivers: 0,
        pu_power: noise_var * db(rng, -10.0, 10.0),
        su_power: noise_var * db(rng, -10.0, 10.0),
        noise_var,
        interference_cap: noise_var * db(rng, -10.0, 10.0),
        power_budget: noise_var * db(rng, -5.0, 20.0),
        seed: rng.random(),
    }
    .with_pairs(rng.random_range(1..=max_pairs))
}

trait WithPairs {
    fn with_pairs(self, pairs: usize) -> Self;
}

impl WithPairs for ScenarioConfig {
    fn with_pairs(self, pairs: usize) -> Self {
        ScenarioConfig {
            transmitters: pairs,
            receivers: pairs,
            ..self
        }
    }
}

pub fn forms(config: &ScenarioConfig) -> (ChannelSet, ReceiverForms) {
    let channels = sample_channels(config);
    let forms = forms_for(config, &channels).expect("valid scenario");
    (channels, forms)
}

/// Received powers computed straight from the channel coefficients:
/// per receiver the signal power and the total disturbance (including
/// receiver noise), plus the interference at the primary receiver.
pub fn direct_powers(config: &ScenarioConfig, ch: &ChannelSet, w: &BeamVector) -> (Vec<f64>, Vec<f64>, f64) {
    let (r_n, m_n) = (config.relays, config.transmitters);
    let (pp, ps, s2) = (config.pu_power, config.su_power, config.noise_var);
    let d: Vec<f64> = (0..r_n)
        .map(|r| {
            let su: f64 = (0..m_n).map(|m| ch.su_to_relay[(r, m)].norm_sqr()).sum();
            (pp * ch.pu_to_relay[r].norm_sqr() + ps * su + s2).sqrt()
        })
        .collect();
    let through = |tx: &dyn Fn(usize) -> Complex64, rx: &dyn Fn(usize) -> Complex64| -> f64 {
        (0..r_n).map(|r| rx(r) * tx(r) * w.0[r] / d[r]).sum::<Complex64>().norm_sqr()
    };
    let mut signal = Vec::new();
    let mut disturbance = Vec::new();
    for j in 0..config.receivers {
        let rx = |r: usize| ch.relay_to_su[(j, r)];
        signal.push(ps * through(&|r| ch.su_to_relay[(r, j)], &rx));
        let mut dist = pp * through(&|r| ch.pu_to_relay[r], &rx) + s2;
        for m in (0..m_n).filter(|&m| m != j) {
            dist += ps * through(&|r| ch.su_to_relay[(r, m)], &rx);
        }
        dist += (0..r_n).map(|r| s2 * rx(r).norm_sqr() * w.0[r].norm_sqr() / (d[r] * d[r])).sum::<f64>();
        disturbance.push(dist);
    }
    let pu_rx = |r: usize| ch.relay_to_pu[r];
    let mut pu = (0..r_n).map(|r| s2 * pu_rx(r).norm_sqr() * w.0[r].norm_sqr() / (d[r] * d[r])).sum::<f64>();
    for m in 0..m_n {
        pu += ps * through(&|r| ch.su_to_relay[(r, m)], &pu_rx);
    }
    (signal, disturbance, pu)
}

/// Eigenvalues of a Hermitian matrix, read off its real embedding (every
/// eigenvalue appears twice there), in decreasing order.
pub fn hermitian_eigenvalues(q: &DMatrix<Complex64>) -> Vec<f64> {
    let lifted = lift_hermitian(q).expect("Hermitian");
    let mut eig: Vec<f64> = SymmetricEigen::new(lifted).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig.iter().step_by(2).copied().collect()
}

fn check_hermitian_psd(q: &DMatrix<Complex64>, what: &str) -> Check {
    let scale = q.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let asym = (q - q.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    ensure(asym <= 1e-12 * scale, || format!("{what}: asymmetry {asym:e} at scale {scale:e}"))?;
    let eig = hermitian_eigenvalues(q);
    let (max, min) = (eig[0], eig[eig.len() - 1]);
    ensure(min >= -1e-10 * max.max(0.0), || format!("{what}: eigenvalue {min:e} below zero (max {max:e})"))
}

/// Hermitian, PSD and rank-one structure of every form, plus agreement of
/// the forms with [`direct_powers`] at random weights.
pub fn check_forms<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Check {
    let (ch, f) = forms(config);
    for j in 0..f.receivers() {
        check_hermitian_psd(&f.signal[j], &format!("signal[{j}]"))?;
        check_hermitian_psd(&f.pu_interference[j], &format!("pu_interference[{j}]"))?;
        check_hermitian_psd(&f.su_interference[j], &format!("su_interference[{j}]"))?;
        ensure(f.relay_noise[j].iter().all(|&v| v >= 0.0), || format!("relay_noise[{j}] negative"))?;
        ensure(f.noise[j] > 0.0, || format!("noise[{j}] not positive"))?;
        let eig = hermitian_eigenvalues(&f.signal[j]);
        if eig.len() > 1 {
            ensure(eig[1] <= 1e-10 * eig[0], || format!("signal[{j}] has second eigenvalue {:e} vs {:e}", eig[1], eig[0]))?;
        }
    }
    check_hermitian_psd(&f.pu_rx, "pu_rx")?;

    let w = random_beam(rng, config.relays);
    let (s, d, pu) = direct_powers(config, &ch, &w);
    for j in 0..f.receivers() {
        let sig = relay_beamform_core::signal::signal_power(&w, &f, j);
        let dist = relay_beamform_core::signal::disturbance_power(&w, &f, j);
        ensure(rel_close(sig, s[j], 1e-10), || format!("signal power {sig:e} vs direct {:e}", s[j]))?;
        ensure(rel_close(dist, d[j], 1e-10), || format!("disturbance {dist:e} vs direct {:e}", d[j]))?;
    }
    let pu_form = pu_interference(&w, &f);
    ensure(rel_close(pu_form, pu, 1e-10), || format!("PU interference {pu_form:e} vs direct {pu:e}"))
}

/// `x~^T Q~ x~ = w^H Q w`, `||x~|| = ||w||` and the functional rows.
pub fn check_lifting<R: Rng>(rng: &mut R) -> Check {
    let r = rng.random_range(1..=8);
    let a = DMatrix::from_fn(r, r, |_, _| random_complex(rng));
    let q = &a + a.adjoint();
    let w = DVector::from_fn(r, |_, _| random_complex(rng));
    let f = DVector::from_fn(r, |_, _| random_complex(rng));
    let x = lift_vector(&w);
    let lifted = lift_hermitian(&q).map_err(|e| e.to_string())?;
    let real = x.dot(&(&lifted * &x));
    let complex = w.dotc(&(&q * &w)).re;
    let scale = q.iter().map(|c| c.norm()).sum::<f64>() * w.norm_squared();
    ensure((real - complex).abs() <= 1e-12 * scale, || format!("quadratic form {real:e} vs {complex:e}"))?;
    ensure(rel_close(x.norm(), w.norm(), 1e-14), || "norm not preserved".into())?;
    let (p, im) = lift_functional(&f);
    let v: Complex64 = f.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    let bound = f.norm() * w.norm() * 1e-13;
    ensure((p.dot(&x.transpose()) - v.re).abs() <= bound, || "real part row".into())?;
    ensure((im.dot(&x.transpose()) - v.im).abs() <= bound, || "imaginary part row".into())
}

/// SINR and primary-receiver interference do not change under a global
/// phase rotation of the weights.
pub fn check_phase_invariance<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Check {
    let (_, f) = forms(config);
    let w = random_beam(rng, config.relays);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let rotated = w.rotated(theta);
    for (a, b) in sinr_all(&w, &f).iter().zip(sinr_all(&rotated, &f)) {
        ensure(rel_close(*a, b, 1e-12), || format!("SINR {a:e} became {b:e} after rotation by {theta}"))?;
    }
    let (a, b) = (pu_interference(&w, &f), pu_interference(&rotated, &f));
    ensure(rel_close(a, b, 1e-12), || format!("PU interference {a:e} became {b:e}"))?;
    ensure(rel_close(w.power(), rotated.power(), 1e-14), || "power changed".into())
}

/// Constraint soundness of a solution at the 1e-6 relative tolerance.
pub fn check_soundness(config: &ScenarioConfig, sol: &BeamSolution) -> Check {
    let tol = 1e-6;
    let min_sinr = sol.sinr_per_rx.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min_sinr >= sol.bracket.0 * (1.0 - tol), || {
        format!("min SINR {min_sinr:e} below certified {:e}", sol.bracket.0)
    })?;
    ensure(sol.pu_interference <= config.interference_cap * (1.0 + tol), || {
        format!("PU interference {:e} above cap {:e}", sol.pu_interference, config.interference_cap)
    })?;
    ensure(sol.total_power <= config.power_budget * (1.0 + tol), || {
        format!("power {:e} above budget {:e}", sol.total_power, config.power_budget)
    })
}

/// Bisection trace stays a nested bracket around the reported solution.
pub fn check_bracket(config: &ScenarioConfig, settings: &SolverSettings) -> Check {
    let (_, f) = forms(config);
    let sol = maximize_min_sinr(&f, config.interference_cap, config.power_budget, settings).map_err(|e| e.to_string())?;
    let ub = upper_bound_gamma(&f, config.power_budget);
    let (mut lo, mut hi) = (0.0, ub);
    for step in &sol.trace {
        ensure(step.gamma >= lo && step.gamma <= hi, || format!("probe {:e} outside [{lo:e}, {hi:e}]", step.gamma))?;
        ensure(step.gamma_lo >= lo && step.gamma_hi <= hi && step.gamma_lo <= step.gamma_hi, || {
            format!("bracket [{:e}, {:e}] not nested in [{lo:e}, {hi:e}]", step.gamma_lo, step.gamma_hi)
        })?;
        ensure(step.feasible == (step.slack >= 0.0), || "feasibility flag disagrees with slack".into())?;
        (lo, hi) = (step.gamma_lo, step.gamma_hi);
    }
    ensure(sol.bracket == (lo, hi), || "final bracket differs from trace".into())?;
    ensure(sol.gamma_star <= ub * (1.0 + 1e-9), || format!("gamma* {:e} above bound {ub:e}", sol.gamma_star))?;
    if sol.status == BeamStatus::Converged {
        ensure(hi - lo <= settings.tol_gamma_rel * hi.max(1e-12), || format!("bracket [{lo:e}, {hi:e}] not converged"))?;
    }
    check_soundness(config, &sol)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

fn ball(n: usize, cols: usize, radius: f64) -> ConeBlock {
    let mut a = DMatrix::zeros(n + 1, cols);
    a.view_mut((1, 0), (n, n)).fill_with_identity();
    let mut b = DVector::zeros(n + 1);
    b[0] = radius;
    ConeBlock::new("ball", a, b)
}

/// Bounded problem whose cones all hold strictly at a hidden point.
pub fn random_feasible_problem<R: Rng>(rng: &mut R) -> ConeProblem {
    let n = rng.random_range(2..=8);
    let x0 = DVector::from_fn(n, |_, _| normal(rng));
    let mut cones: Vec<ConeBlock> = (0..rng.random_range(1..=6))
        .map(|i| {
            let k = rng.random_range(1..=5);
            let a = random_matrix(rng, k, n);
            let mut b = DVector::from_fn(k, |_, _| normal(rng));
            let v = &a * &x0 + &b;
            let tail = v.rows(1, k - 1).norm();
            b[0] += tail - v[0] + rng.random_range(0.1..1.0);
            ConeBlock::new(format!("c{i}"), a, b)
        })
        .collect();
    cones.push(ball(n, n, x0.norm() + rng.random_range(1.0..3.0)));
    ConeProblem {
        num_vars: n,
        objective: DVector::from_fn(n, |_, _| normal(rng)),
        cones,
    }
}

/// Max-slack problem over `[x; t]` with two cones that cannot both hold
/// unless `t <= -1`, plus random cones tightened by `t`.
pub fn random_infeasible_max_slack<R: Rng>(rng: &mut R) -> ConeProblem {
    let n = rng.random_range(2..=8);
    let cols = n + 1;
    let u = DVector::from_fn(n, |_, _| normal(rng));
    let mut cones = Vec::new();
    for sign in [1.0, -1.0] {
        let k = rng.random_range(1..=4);
        let mut a = DMatrix::zeros(k, cols);
        a.view_mut((1, 0), (k - 1, n)).copy_from(&random_matrix(rng, k - 1, n));
        for c in 0..n {
            a[(0, c)] = sign * u[c];
        }
        a[(0, n)] = -1.0;
        let mut b = DVector::from_fn(k, |_, _| normal(rng));
        b[0] = -1.0;
        cones.push(ConeBlock::new(format!("half{sign}"), a, b));
    }
    for i in 0..rng.random_range(0..=3) {
        let k = rng.random_range(1..=4);
        let mut a = DMatrix::zeros(k, cols);
        a.view_mut((0, 0), (k, n)).copy_from(&random_matrix(rng, k, n));
        a[(0, n)] = -1.0;
        let mut b = DVector::from_fn(k, |_, _| normal(rng));
        b[0] = b.rows(1, k - 1).norm() + rng.random_range(0.5..2.0);
        cones.push(ConeBlock::new(format!("extra{i}"), a, b));
    }
    cones.push(ball(n, cols, rng.random_range(1.0..10.0)));
    let mut objective = DVector::zeros(cols);
    objective[n] = 1.0;
    ConeProblem {
        num_vars: cols,
        objective,
        cones,
    }
}
