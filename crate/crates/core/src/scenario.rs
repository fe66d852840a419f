//! Network instances: scalar parameters plus one channel realization.
//!
//! Channels are i.i.d. circularly-symmetric complex Gaussian with unit
//! variance (Rayleigh fading). Secondary transmitter `i` is paired with
//! secondary receiver `i`, so the transmitter and receiver counts must agree.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Scalar parameters of one network instance. Powers are linear (watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "R")]
    pub relays: usize,
    #[serde(rename = "M")]
    pub transmitters: usize,
    #[serde(rename = "N")]
    pub receivers: usize,
    /// Primary transmitter power.
    #[serde(rename = "P_p")]
    pub pu_power: f64,
    /// Per secondary transmitter power.
    #[serde(rename = "P_s")]
    pub su_power: f64,
    /// Noise variance at the relays and at every receiver.
    #[serde(rename = "sigma_n2")]
    pub noise_var: f64,
    /// Interference cap at the primary receiver.
    #[serde(rename = "I_p")]
    pub interference_cap: f64,
    /// Total relay transmit power budget.
    #[serde(rename = "P_t")]
    pub power_budget: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// `pairs` secondary links through `relays` relays, unit noise.
    pub fn new(relays: usize, pairs: usize) -> Self {
        ScenarioConfig {
            relays,
            transmitters: pairs,
            receivers: pairs,
            pu_power: 1.0,
            su_power: 1.0,
            noise_var: 1.0,
            interference_cap: 1.0,
            power_budget: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.relays == 0 || self.transmitters == 0 || self.receivers == 0 {
            return bad(format!(
                "counts must be positive (R={}, M={}, N={})",
                self.relays, self.transmitters, self.receivers
            ));
        }
        if self.transmitters != self.receivers {
            return bad(format!(
                "secondary transmitters and receivers are paired, so M must equal N (M={}, N={})",
                self.transmitters, self.receivers
            ));
        }
        for (name, v) in [
            ("P_p", self.pu_power),
            ("P_s", self.su_power),
            ("sigma_n2", self.noise_var),
            ("I_p", self.interference_cap),
            ("P_t", self.power_budget),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

/// The four channel blocks of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// R x M, entry (r, m): secondary transmitter m to relay r.
    pub su_to_relay: DMatrix<Complex64>,
    /// Length R: primary transmitter to relay r.
    pub pu_to_relay: DVector<Complex64>,
    /// N x R, entry (j, r): relay r to secondary receiver j.
    pub relay_to_su: DMatrix<Complex64>,
    /// Length R: relay r to the primary receiver.
    pub relay_to_pu: DVector<Complex64>,
}

impl ChannelSet {
    pub fn check_dims(&self, config: &ScenarioConfig) -> Result<()> {
        let (r, m, n) = (config.relays, config.transmitters, config.receivers);
        let shape = |mat: &DMatrix<Complex64>| format!("{}x{}", mat.nrows(), mat.ncols());
        if self.su_to_relay.shape() != (r, m) {
            return Err(Error::dims("H (SU-TX to relay)", format!("{r}x{m}"), shape(&self.su_to_relay)));
        }
        if self.pu_to_relay.len() != r {
            return Err(Error::dims("g (PU-TX to relay)", r, self.pu_to_relay.len()));
        }
        if self.relay_to_su.shape() != (n, r) {
            return Err(Error::dims("Hhat (relay to SU-RX)", format!("{n}x{r}"), shape(&self.relay_to_su)));
        }
        if self.relay_to_pu.len() != r {
            return Err(Error::dims("ghat (relay to PU-RX)", r, self.relay_to_pu.len()));
        }
        let all_finite = self
            .su_to_relay
            .iter()
            .chain(self.pu_to_relay.iter())
            .chain(self.relay_to_su.iter())
            .chain(self.relay_to_pu.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(Error::InvalidConfig("channel coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// One CN(0, 1) draw.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws every channel coefficient i.i.d. CN(0, 1) from a ChaCha stream keyed
/// by `config.seed`. Blocks are drawn in the order H, g, Hhat, ghat, each
/// column-major.
pub fn sample_channels(config: &ScenarioConfig) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (r, m, n) = (config.relays, config.transmitters, config.receivers);
    let su_to_relay = DMatrix::from_fn(r, m, |_, _| complex_gaussian(&mut rng));
    let pu_to_relay = DVector::from_fn(r, |_, _| complex_gaussian(&mut rng));
    let relay_to_su = DMatrix::from_fn(n, r, |_, _| complex_gaussian(&mut rng));
    let relay_to_pu = DVector::from_fn(r, |_, _| complex_gaussian(&mut rng));
    ChannelSet {
        su_to_relay,
        pu_to_relay,
        relay_to_su,
        relay_to_pu,
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelsFile {
    #[serde(rename = "H_re")]
    h_re: Vec<Vec<f64>>,
    #[serde(rename = "H_im")]
    h_im: Vec<Vec<f64>>,
    g_re: Vec<f64>,
    g_im: Vec<f64>,
    #[serde(rename = "Hhat_re")]
    hhat_re: Vec<Vec<f64>>,
    #[serde(rename = "Hhat_im")]
    hhat_im: Vec<Vec<f64>>,
    ghat_re: Vec<f64>,
    ghat_im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    schema_version: u32,
    config: ScenarioConfig,
    channels: ChannelsFile,
}

fn split_matrix(m: &DMatrix<Complex64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&Complex64) -> f64| {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    (rows(|c| c.re), rows(|c| c.im))
}

fn split_vector(v: &DVector<Complex64>) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

fn join_matrix(name: &str, re: &[Vec<f64>], im: &[Vec<f64>], rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    let shape_of = |m: &[Vec<f64>]| {
        let widths: Vec<usize> = m.iter().map(Vec::len).collect();
        match widths.first() {
            Some(&w) if widths.iter().all(|&x| x == w) => format!("{}x{}", m.len(), w),
            Some(_) => format!("{} ragged rows", m.len()),
            None => "0x0".to_string(),
        }
    };
    let expected = format!("{rows}x{cols}");
    for part in [re, im] {
        if part.len() != rows || part.iter().any(|row| row.len() != cols) {
            return Err(Error::dims(name, &expected, shape_of(part)));
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| Complex64::new(re[i][j], im[i][j])))
}

fn join_vector(name: &str, re: &[f64], im: &[f64], len: usize) -> Result<DVector<Complex64>> {
    for part in [re, im] {
        if part.len() != len {
            return Err(Error::dims(name, len, part.len()));
        }
    }
    Ok(DVector::from_fn(len, |i, _| Complex64::new(re[i], im[i])))
}

pub fn scenario_to_json(config: &ScenarioConfig, channels: &ChannelSet) -> Result<String> {
    let (h_re, h_im) = split_matrix(&channels.su_to_relay);
    let (g_re, g_im) = split_vector(&channels.pu_to_relay);
    let (hhat_re, hhat_im) = split_matrix(&channels.relay_to_su);
    let (ghat_re, ghat_im) = split_vector(&channels.relay_to_pu);
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        config: *config,
        channels: ChannelsFile {
            h_re,
            h_im,
            g_re,
            g_im,
            hhat_re,
            hhat_im,
            ghat_re,
            ghat_im,
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn scenario_from_json(text: &str) -> Result<(ScenarioConfig, ChannelSet)> {
    decode(serde_json::from_str(text)?)
}

fn decode(file: ScenarioFile) -> Result<(ScenarioConfig, ChannelSet)> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCHEMA_VERSION,
            found: file.schema_version,
        });
    }
    let config = file.config;
    config.validate()?;
    let (r, m, n) = (config.relays, config.transmitters, config.receivers);
    let c = &file.channels;
    let channels = ChannelSet {
        su_to_relay: join_matrix("H", &c.h_re, &c.h_im, r, m)?,
        pu_to_relay: join_vector("g", &c.g_re, &c.g_im, r)?,
        relay_to_su: join_matrix("Hhat", &c.hhat_re, &c.hhat_im, n, r)?,
        relay_to_pu: join_vector("ghat", &c.ghat_re, &c.ghat_im, r)?,
    };
    channels.check_dims(&config)?;
    Ok((config, channels))
}

/// Writes the scenario as one JSON document. Floats are printed in shortest
/// round-trip form, so `load_scenario` recovers every bit.
pub fn save_scenario(config: &ScenarioConfig, channels: &ChannelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    channels.check_dims(config)?;
    let text = scenario_to_json(config, channels)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<(ScenarioConfig, ChannelSet)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    decode(file)
}
