//! Two-hop amplify-and-forward signal model.
//!
//! Relay `r` receives `y_r = sqrt(P_p) g_r x_p + sqrt(P_s) sum_m h_rm x_m + n_r`,
//! normalizes it by `d_r = sqrt(P_p |g_r|^2 + P_s sum_m |h_rm|^2 + sigma_n^2)` and
//! transmits `w_r y_r / d_r`. Every received power is then a Hermitian
//! quadratic form in the weight vector `w`, collected in [`ReceiverForms`].
//!
//! [`empirical_powers`] simulates the same chain symbol by symbol and serves as
//! an independent check of the closed forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{complex_gaussian, ChannelSet, ScenarioConfig};

/// Complex beamforming weights, one per relay. Relay `r` transmits
/// `w[r] * y_r / d_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SplitComplex", try_from = "SplitComplex")]
pub struct BeamVector(pub DVector<Complex64>);

/// Serialized form of a [`BeamVector`]: real and imaginary parts.
#[derive(Serialize, Deserialize)]
struct SplitComplex {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<BeamVector> for SplitComplex {
    fn from(w: BeamVector) -> Self {
        SplitComplex {
            re: w.0.iter().map(|c| c.re).collect(),
            im: w.0.iter().map(|c| c.im).collect(),
        }
    }
}

impl TryFrom<SplitComplex> for BeamVector {
    type Error = String;

    fn try_from(v: SplitComplex) -> std::result::Result<Self, String> {
        if v.re.len() != v.im.len() {
            return Err(format!("re has {} entries, im has {}", v.re.len(), v.im.len()));
        }
        Ok(BeamVector(DVector::from_iterator(
            v.re.len(),
            v.re.iter().zip(&v.im).map(|(&a, &b)| Complex64::new(a, b)),
        )))
    }
}

impl BeamVector {
    pub fn zeros(relays: usize) -> Self {
        BeamVector(DVector::zeros(relays))
    }

    pub fn from_slice(w: &[Complex64]) -> Self {
        BeamVector(DVector::from_column_slice(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total relay transmit power `sum_r |w_r|^2`.
    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn rotated(&self, theta: f64) -> Self {
        BeamVector(self.0.map(|c| c * Complex64::from_polar(1.0, theta)))
    }
}

/// Normalization constants and effective end-to-end channels.
#[derive(Debug, Clone)]
pub struct NormalizedModel {
    /// AF normalization `d_r`.
    pub scale: DVector<f64>,
    /// `su_paths[j][(m, r)] = hhat_jr h_rm / d_r`.
    pub su_paths: Vec<DMatrix<Complex64>>,
    /// `pu_paths[(j, r)] = hhat_jr g_r / d_r`.
    pub pu_paths: DMatrix<Complex64>,
    /// `ghat_r / d_r`, the relay to primary receiver gain after normalization.
    pub pu_rx_gain: DVector<Complex64>,
    /// `sigma_n^2 / d_r^2`, the relay noise power passed through.
    pub relay_noise_gain: DVector<f64>,
}

pub fn build_normalized(config: &ScenarioConfig, channels: &ChannelSet) -> NormalizedModel {
    let (r_count, m_count, n_count) = (config.relays, config.transmitters, config.receivers);
    let h = &channels.su_to_relay;
    let scale = DVector::from_fn(r_count, |r, _| {
        let su: f64 = h.row(r).iter().map(|c| c.norm_sqr()).sum();
        (config.pu_power * channels.pu_to_relay[r].norm_sqr() + config.su_power * su + config.noise_var).sqrt()
    });
    let hhat = &channels.relay_to_su;
    let su_paths = (0..n_count)
        .map(|j| DMatrix::from_fn(m_count, r_count, |m, r| hhat[(j, r)] * h[(r, m)] / scale[r]))
        .collect();
    let pu_paths = DMatrix::from_fn(n_count, r_count, |j, r| hhat[(j, r)] * channels.pu_to_relay[r] / scale[r]);
    let pu_rx_gain = DVector::from_fn(r_count, |r, _| channels.relay_to_pu[r] / scale[r]);
    let relay_noise_gain = DVector::from_fn(r_count, |r, _| config.noise_var / (scale[r] * scale[r]));
    NormalizedModel {
        scale,
        su_paths,
        pu_paths,
        pu_rx_gain,
        relay_noise_gain,
    }
}

/// Quadratic forms for every secondary receiver plus the primary receiver.
///
/// For receiver `j` the SINR is
/// `w^H S_j w / (w^H (P_j + I_j + N_j) w + c_j)` and the interference reaching
/// the primary receiver is `w^H D w`.
#[derive(Debug, Clone)]
pub struct ReceiverForms {
    pub su_power: f64,
    /// `f_j[r] = hhat_jr h_rj / d_r`, the desired effective channel of receiver `j`.
    pub desired: Vec<DVector<Complex64>>,
    /// `P_s conj(f_j) f_j^T`; rank one.
    pub signal: Vec<DMatrix<Complex64>>,
    /// Primary transmitter leaking through the relays.
    pub pu_interference: Vec<DMatrix<Complex64>>,
    /// Other secondary transmitters.
    pub su_interference: Vec<DMatrix<Complex64>>,
    /// Diagonal of the forwarded relay-noise form.
    pub relay_noise: Vec<DVector<f64>>,
    /// Receiver noise power `c_j`.
    pub noise: Vec<f64>,
    /// Primary receiver interference form.
    pub pu_rx: DMatrix<Complex64>,
}

impl ReceiverForms {
    pub fn receivers(&self) -> usize {
        self.signal.len()
    }

    pub fn relays(&self) -> usize {
        self.pu_rx.nrows()
    }

    /// `P_j + I_j + N_j`, the form in the SINR denominator.
    pub fn disturbance(&self, j: usize) -> DMatrix<Complex64> {
        let mut q = &self.pu_interference[j] + &self.su_interference[j];
        for (r, v) in self.relay_noise[j].iter().enumerate() {
            q[(r, r)] += Complex64::from(*v);
        }
        q
    }
}

/// `conj(v) v^T`, so that `w^H (conj(v) v^T) w = |v^T w|^2`.
pub(crate) fn conj_outer(v: impl Iterator<Item = Complex64> + Clone) -> DMatrix<Complex64> {
    let v: Vec<Complex64> = v.collect();
    DMatrix::from_fn(v.len(), v.len(), |a, b| v[a].conj() * v[b])
}

/// `Re(w^H Q w)`.
pub fn quad_form(q: &DMatrix<Complex64>, w: &DVector<Complex64>) -> f64 {
    w.dotc(&(q * w)).re
}

pub fn build_forms(config: &ScenarioConfig, model: &NormalizedModel, channels: &ChannelSet) -> Result<ReceiverForms> {
    let (r_count, m_count, n_count) = (config.relays, config.transmitters, config.receivers);
    if m_count != n_count {
        return Err(Error::dims("paired transmitters/receivers", n_count, m_count));
    }
    if model.scale.len() != r_count || model.su_paths.len() != n_count {
        return Err(Error::dims("normalized model relays", r_count, model.scale.len()));
    }
    let ps = config.su_power;
    let mut desired = Vec::with_capacity(n_count);
    let mut signal = Vec::with_capacity(n_count);
    let mut pu_interference = Vec::with_capacity(n_count);
    let mut su_interference = Vec::with_capacity(n_count);
    let mut relay_noise = Vec::with_capacity(n_count);
    for j in 0..n_count {
        let paths = &model.su_paths[j];
        let f = paths.row(j).transpose();
        signal.push(conj_outer(f.iter().copied()) * Complex64::from(ps));
        desired.push(f);
        pu_interference.push(conj_outer(model.pu_paths.row(j).iter().copied()) * Complex64::from(config.pu_power));
        let mut qis = DMatrix::zeros(r_count, r_count);
        for m in (0..m_count).filter(|&m| m != j) {
            qis += conj_outer(paths.row(m).iter().copied()) * Complex64::from(ps);
        }
        su_interference.push(qis);
        relay_noise.push(DVector::from_fn(r_count, |r, _| {
            channels.relay_to_su[(j, r)].norm_sqr() * model.relay_noise_gain[r]
        }));
    }
    let mut pu_rx = DMatrix::zeros(r_count, r_count);
    for m in 0..m_count {
        let v = (0..r_count).map(|r| model.pu_rx_gain[r] * channels.su_to_relay[(r, m)]);
        pu_rx += conj_outer(v) * Complex64::from(ps);
    }
    for r in 0..r_count {
        pu_rx[(r, r)] += Complex64::from(model.pu_rx_gain[r].norm_sqr() * config.noise_var);
    }
    Ok(ReceiverForms {
        su_power: ps,
        desired,
        signal,
        pu_interference,
        su_interference,
        relay_noise,
        noise: vec![config.noise_var; n_count],
        pu_rx,
    })
}

/// Normalizes and builds the forms in one step.
pub fn forms_for(config: &ScenarioConfig, channels: &ChannelSet) -> Result<ReceiverForms> {
    config.validate()?;
    channels.check_dims(config)?;
    build_forms(config, &build_normalized(config, channels), channels)
}

pub fn signal_power(w: &BeamVector, forms: &ReceiverForms, j: usize) -> f64 {
    quad_form(&forms.signal[j], &w.0)
}

/// Interference plus noise power at receiver `j`, including `c_j`.
pub fn disturbance_power(w: &BeamVector, forms: &ReceiverForms, j: usize) -> f64 {
    let noise: f64 = w
        .0
        .iter()
        .zip(forms.relay_noise[j].iter())
        .map(|(c, g)| c.norm_sqr() * g)
        .sum();
    quad_form(&forms.pu_interference[j], &w.0) + quad_form(&forms.su_interference[j], &w.0) + noise + forms.noise[j]
}

pub fn sinr(w: &BeamVector, forms: &ReceiverForms, j: usize) -> f64 {
    signal_power(w, forms, j).max(0.0) / disturbance_power(w, forms, j)
}

pub fn sinr_all(w: &BeamVector, forms: &ReceiverForms) -> Vec<f64> {
    (0..forms.receivers()).map(|j| sinr(w, forms, j)).collect()
}

pub fn worst_sinr(w: &BeamVector, forms: &ReceiverForms) -> f64 {
    sinr_all(w, forms).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn pu_interference(w: &BeamVector, forms: &ReceiverForms) -> f64 {
    quad_form(&forms.pu_rx, &w.0).max(0.0)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverPowers {
    pub signal: Estimate,
    pub interference: Estimate,
    /// Forwarded relay noise plus receiver noise.
    pub noise: Estimate,
    /// Per-sample `|interference|^2 + |noise|^2`.
    pub disturbance: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPowers {
    pub receivers: Vec<ReceiverPowers>,
    pub pu_interference: Estimate,
    pub samples: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn estimate(&self, n: usize) -> Estimate {
        let n = n as f64;
        let mean = self.sum / n;
        let var = if n > 1.0 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

const SAMPLES_PER_CHUNK: usize = 1 << 14;

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let bits: u8 = rng.random();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(
        if bits & 1 == 0 { s } else { -s },
        if bits & 2 == 0 { s } else { -s },
    )
}

/// Monte-Carlo estimate of the received powers for weights `w`.
///
/// Each draw takes QPSK symbols for every transmitter and CN(0, sigma_n^2)
/// noise at every relay and receiver, runs both hops and splits each
/// received sample into its desired, interference and noise parts. The
/// sample budget is cut into fixed-size chunks, each with its own ChaCha
/// stream derived from `(seed, chunk)`, so results do not depend on the
/// thread count.
pub fn empirical_powers(
    w: &BeamVector,
    config: &ScenarioConfig,
    channels: &ChannelSet,
    n_samples: usize,
    seed: u64,
) -> EmpiricalPowers {
    assert!(n_samples >= 1, "need at least one sample");
    let (r_count, m_count, n_count) = (config.relays, config.transmitters, config.receivers);
    let sqrt_pp = config.pu_power.sqrt();
    let sqrt_ps = config.su_power.sqrt();
    let noise_std = config.noise_var.sqrt();
    let h = &channels.su_to_relay;
    let g = &channels.pu_to_relay;
    let hhat = &channels.relay_to_su;
    let ghat = &channels.relay_to_pu;
    // relay amplification w_r / sqrt(E|y_r|^2)
    let amp: Vec<Complex64> = (0..r_count)
        .map(|r| {
            let mut rx_power = config.pu_power * g[r].norm_sqr() + config.noise_var;
            for m in 0..m_count {
                rx_power += config.su_power * h[(r, m)].norm_sqr();
            }
            w.0[r] / rx_power.sqrt()
        })
        .collect();

    let chunks = n_samples.div_ceil(SAMPLES_PER_CHUNK);
    let partials: Vec<(Vec<[Moments; 4]>, Moments)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = SAMPLES_PER_CHUNK.min(n_samples - chunk * SAMPLES_PER_CHUNK);
            let mut acc = vec![[Moments::default(); 4]; n_count];
            let mut pu_acc = Moments::default();
            let mut x_su = vec![Complex64::default(); m_count];
            // per relay: [primary part, secondary parts..., noise] of y_r
            let mut relay_parts = vec![Complex64::default(); r_count * (m_count + 2)];
            for _ in 0..count {
                let x_pu = qpsk(&mut rng);
                for x in x_su.iter_mut() {
                    *x = qpsk(&mut rng);
                }
                for r in 0..r_count {
                    let base = r * (m_count + 2);
                    relay_parts[base] = g[r] * x_pu * sqrt_pp;
                    for m in 0..m_count {
                        relay_parts[base + 1 + m] = h[(r, m)] * x_su[m] * sqrt_ps;
                    }
                    relay_parts[base + m_count + 1] = complex_gaussian(&mut rng) * noise_std;
                }
                for (j, acc_j) in acc.iter_mut().enumerate() {
                    let mut desired = Complex64::default();
                    let mut interference = Complex64::default();
                    let mut noise = complex_gaussian(&mut rng) * noise_std;
                    for r in 0..r_count {
                        let base = r * (m_count + 2);
                        let gain = hhat[(j, r)] * amp[r];
                        interference += gain * relay_parts[base];
                        for m in 0..m_count {
                            let part = gain * relay_parts[base + 1 + m];
                            if m == j {
                                desired += part;
                            } else {
                                interference += part;
                            }
                        }
                        noise += gain * relay_parts[base + m_count + 1];
                    }
                    acc_j[0].push(desired.norm_sqr());
                    acc_j[1].push(interference.norm_sqr());
                    acc_j[2].push(noise.norm_sqr());
                    acc_j[3].push(interference.norm_sqr() + noise.norm_sqr());
                }
                let mut at_pu = Complex64::default();
                for r in 0..r_count {
                    let base = r * (m_count + 2);
                    let su_and_noise: Complex64 = relay_parts[base + 1..base + m_count + 2].iter().sum();
                    at_pu += ghat[r] * amp[r] * su_and_noise;
                }
                pu_acc.push(at_pu.norm_sqr());
            }
            (acc, pu_acc)
        })
        .collect();

    let mut totals = vec![[Moments::default(); 4]; n_count];
    let mut pu_total = Moments::default();
    for (acc, pu_acc) in &partials {
        for (t, a) in totals.iter_mut().zip(acc) {
            for k in 0..4 {
                t[k].merge(&a[k]);
            }
        }
        pu_total.merge(pu_acc);
    }
    EmpiricalPowers {
        receivers: totals
            .iter()
            .map(|t| ReceiverPowers {
                signal: t[0].estimate(n_samples),
                interference: t[1].estimate(n_samples),
                noise: t[2].estimate(n_samples),
                disturbance: t[3].estimate(n_samples),
            })
            .collect(),
        pu_interference: pu_total.estimate(n_samples),
        samples: n_samples,
    }
}
