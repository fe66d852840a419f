//! Monte-Carlo sweeps over scenario parameters.
//!
//! A [`SweepSpec`] fixes a base network (powers in dB relative to the noise
//! floor) and varies one parameter. Every (value, trial) pair draws its own
//! channel realization, solves the max-min problem and records the
//! worst-case SINR in dB. When the sweep leaves the network dimensions
//! unchanged (power budget or interference cap sweeps), trial `t` reuses the
//! same channel draw at every value.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{maximize_min_sinr, BeamSolution, SolverSettings};
use crate::scenario::{sample_channels, ScenarioConfig};
use crate::signal::forms_for;
use crate::units::{db_to_linear, linear_to_db};

/// Fraction of failed trials above which a point is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "P_t")]
    PowerBudget,
    #[serde(rename = "I_p")]
    InterferenceCap,
    #[serde(rename = "R")]
    Relays,
    #[serde(rename = "pairs")]
    Pairs,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PowerBudget => "P_t",
            SweepVariable::InterferenceCap => "I_p",
            SweepVariable::Relays => "R",
            SweepVariable::Pairs => "pairs",
        }
    }

    /// Whether the network dimensions stay fixed along the sweep.
    pub fn keeps_dimensions(self) -> bool {
        matches!(self, SweepVariable::PowerBudget | SweepVariable::InterferenceCap)
    }
}

fn unit_noise() -> f64 {
    1.0
}

/// Base network, powers in dB relative to `sigma_n2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    #[serde(rename = "R")]
    pub relays: usize,
    pub pairs: usize,
    #[serde(rename = "P_p_db")]
    pub pu_power_db: f64,
    #[serde(rename = "P_s_db")]
    pub su_power_db: f64,
    #[serde(rename = "I_p_db")]
    pub interference_cap_db: f64,
    #[serde(rename = "P_t_db")]
    pub power_budget_db: f64,
    #[serde(default = "unit_noise")]
    pub sigma_n2: f64,
}

impl BaseParams {
    pub fn to_config(&self, seed: u64) -> ScenarioConfig {
        let rel = |db: f64| self.sigma_n2 * db_to_linear(db);
        ScenarioConfig {
            relays: self.relays,
            transmitters: self.pairs,
            receivers: self.pairs,
            pu_power: rel(self.pu_power_db),
            su_power: rel(self.su_power_db),
            noise_var: self.sigma_n2,
            interference_cap: rel(self.interference_cap_db),
            power_budget: rel(self.power_budget_db),
            seed,
        }
    }
}

fn default_label() -> String {
    "sweep".to_string()
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default = "default_label")]
    pub label: String,
    pub base: BaseParams,
    pub sweep_variable: SweepVariable,
    /// dB for powers, integers for counts; strictly increasing.
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Free-form remark carried into the result metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.values.is_empty() {
            return bad("sweep values must not be empty".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("sweep values must be finite and strictly increasing: {:?}", self.values));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.sweep_variable.keeps_dimensions() && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return bad(format!("{} values must be positive integers", self.sweep_variable.name()));
        }
        for &v in &self.values {
            self.config_for(v, 0).validate()?;
        }
        Ok(())
    }

    pub fn common_random_numbers(&self) -> bool {
        self.sweep_variable.keeps_dimensions()
    }

    /// Channel seed of one trial. With common random numbers it depends only
    /// on the trial index; otherwise on both value and trial.
    pub fn trial_seed(&self, value: f64, trial: usize) -> u64 {
        let key = if self.common_random_numbers() {
            mix(trial as u64)
        } else {
            mix(mix(value.to_bits()) ^ trial as u64)
        };
        self.seed_base ^ key
    }

    /// Linear scenario for one sweep value.
    pub fn config_for(&self, value: f64, seed: u64) -> ScenarioConfig {
        let mut base = self.base;
        match self.sweep_variable {
            SweepVariable::PowerBudget => base.power_budget_db = value,
            SweepVariable::InterferenceCap => base.interference_cap_db = value,
            SweepVariable::Relays => base.relays = value as usize,
            SweepVariable::Pairs => base.pairs = value as usize,
        }
        base.to_config(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_worst_sinr_db: Option<f64>,
    pub stderr_db: Option<f64>,
    pub trials_ok: usize,
    pub trials_failed: usize,
    /// More than 10% of the trials failed.
    pub flagged: bool,
    /// Worst-case SINR (dB) per trial index; `None` for failed trials.
    pub raw_db: Vec<Option<f64>>,
}

impl SweepPoint {
    fn from_trials(value: f64, raw_db: Vec<Option<f64>>) -> Self {
        let ok: Vec<f64> = raw_db.iter().flatten().copied().collect();
        let n = ok.len();
        let failed = raw_db.len() - n;
        let (mean, stderr) = if n == 0 {
            (None, None)
        } else {
            let mean = ok.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            (Some(mean), Some((var / n as f64).sqrt()))
        };
        SweepPoint {
            value,
            mean_worst_sinr_db: mean,
            stderr_db: stderr,
            trials_ok: n,
            trials_failed: failed,
            flagged: failed as f64 > FAILURE_FLAG_FRACTION * raw_db.len() as f64,
            raw_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub code_version: String,
    /// Seconds since the Unix epoch; JSON output only.
    pub generated_unix: u64,
    pub common_random_numbers: bool,
    pub tol_gamma_rel: f64,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
    pub metadata: SweepMetadata,
}

/// A solved trial, handed to the observer of [`run_sweep_observed`].
pub struct TrialRecord<'a> {
    pub value: f64,
    pub trial: usize,
    pub config: &'a ScenarioConfig,
    pub solution: &'a BeamSolution,
}

/// Worst-case SINR in dB for one channel draw, or `None` when the solver
/// fails or no secondary link carries any signal.
fn run_trial<F>(value: f64, trial: usize, config: &ScenarioConfig, settings: &SolverSettings, observe: &F) -> Option<f64>
where
    F: Fn(&TrialRecord) + Sync,
{
    let channels = sample_channels(config);
    let forms = match forms_for(config, &channels) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("seed {}: {e}", config.seed);
            return None;
        }
    };
    match maximize_min_sinr(&forms, config.interference_cap, config.power_budget, settings) {
        Ok(solution) => {
            observe(&TrialRecord {
                value,
                trial,
                config,
                solution: &solution,
            });
            if solution.gamma_star > 0.0 {
                Some(linear_to_db(solution.gamma_star))
            } else {
                log::warn!("seed {}: zero worst-case SINR", config.seed);
                None
            }
        }
        Err(e) => {
            log::warn!("seed {}: {e}", config.seed);
            None
        }
    }
}

/// Runs every (value, trial) job on a pool of `workers` threads (0 picks
/// the rayon default). Output does not depend on the worker count.
pub fn run_sweep(spec: &SweepSpec, settings: &SolverSettings, workers: usize) -> Result<SweepResult> {
    run_sweep_observed(spec, settings, workers, |_| {})
}

/// [`run_sweep`], calling `observe` on every solved trial. Calls arrive
/// from worker threads in no particular order.
pub fn run_sweep_observed<F>(spec: &SweepSpec, settings: &SolverSettings, workers: usize, observe: F) -> Result<SweepResult>
where
    F: Fn(&TrialRecord) + Sync,
{
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let work = || -> Vec<Option<f64>> {
        jobs.par_iter()
            .map(|&(v, t)| {
                let value = spec.values[v];
                let config = spec.config_for(value, spec.trial_seed(value, t));
                run_trial(value, t, &config, settings, &observe)
            })
            .collect()
    };
    let outcomes = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
        .install(work);
    let points: Vec<SweepPoint> = outcomes
        .chunks(spec.trials)
        .zip(&spec.values)
        .map(|(raw, &value)| SweepPoint::from_trials(value, raw.to_vec()))
        .collect();
    for p in points.iter().filter(|p| p.flagged) {
        log::warn!(
            "{} = {}: {} of {} trials failed",
            spec.sweep_variable.name(),
            p.value,
            p.trials_failed,
            spec.trials
        );
    }
    let mut notes: Vec<String> = spec.note.iter().cloned().collect();
    notes.extend(
        points
            .iter()
            .filter(|p| p.flagged)
            .map(|p| format!("value {} flagged: {} failed trials", p.value, p.trials_failed)),
    );
    Ok(SweepResult {
        spec: spec.clone(),
        points,
        metadata: SweepMetadata {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            common_random_numbers: spec.common_random_numbers(),
            tol_gamma_rel: settings.tol_gamma_rel,
            notes,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown output format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: [&str; 6] = [
    "sweep_variable",
    "value",
    "mean_worst_sinr_db",
    "stderr_db",
    "trials_ok",
    "trials_failed",
];

/// CSV rows carry no timestamp, so identical specs give identical bytes.
pub fn to_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in &result.points {
        w.write_record([
            result.spec.sweep_variable.name().to_string(),
            p.value.to_string(),
            opt(p.mean_worst_sinr_db),
            opt(p.stderr_db),
            p.trials_ok.to_string(),
            p.trials_failed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit(result: &SweepResult, format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        OutputFormat::Csv => to_csv(result)?,
        OutputFormat::Json => serde_json::to_string_pretty(result)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_result(path: impl AsRef<Path>) -> Result<SweepResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// A sweep file holds one spec or a list of them.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(SweepSpec),
    Many(Vec<SweepSpec>),
}

pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<SweepSpec>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: SpecFile = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let specs = match parsed {
        SpecFile::One(s) => vec![s],
        SpecFile::Many(v) => v,
    };
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Replicas of the published power-budget sweeps. Every curve sweeps `P_t`
/// over 0..=20 dB in 4 dB steps with `P_p = P_s = 5 dB`, and all curves of a
/// figure share `seed_base`.
pub mod figures {
    use super::*;

    pub const POWER_GRID_DB: [f64; 6] = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0];
    const TX_POWER_DB: f64 = 5.0;

    fn curve(label: String, relays: usize, pairs: usize, cap_db: f64, trials: usize, seed_base: u64) -> SweepSpec {
        SweepSpec {
            label,
            base: BaseParams {
                relays,
                pairs,
                pu_power_db: TX_POWER_DB,
                su_power_db: TX_POWER_DB,
                interference_cap_db: cap_db,
                power_budget_db: POWER_GRID_DB[0],
                sigma_n2: 1.0,
            },
            sweep_variable: SweepVariable::PowerBudget,
            values: POWER_GRID_DB.to_vec(),
            trials,
            seed_base,
            note: None,
        }
    }

    /// R = 10, M = N = 3, one curve per cap in {-10, -5, 0} dB.
    pub fn interference_caps(trials: usize, seed_base: u64) -> Vec<SweepSpec> {
        [-10.0, -5.0, 0.0]
            .into_iter()
            .map(|cap| curve(format!("fig2_ip_{cap}db"), 10, 3, cap, trials, seed_base))
            .collect()
    }

    /// R = 10, I_p = 10 dB, one curve per pair count in {2, 3, 4}.
    pub fn pair_counts(trials: usize, seed_base: u64) -> Vec<SweepSpec> {
        [2, 3, 4]
            .into_iter()
            .map(|pairs| SweepSpec {
                note: Some(
                    "I_p = 10 dB as stated for this figure; it lies outside the {-10, -5, 0} dB caps of the power sweep"
                        .into(),
                ),
                ..curve(format!("fig3_pairs_{pairs}"), 10, pairs, 10.0, trials, seed_base)
            })
            .collect()
    }

    /// M = N = 3, I_p = 0 dB, one curve per relay count in {6, 8, 10, 12}.
    pub fn relay_counts(trials: usize, seed_base: u64) -> Vec<SweepSpec> {
        [6, 8, 10, 12]
            .into_iter()
            .map(|relays| curve(format!("fig4_relays_{relays}"), relays, 3, 0.0, trials, seed_base))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_spec(variable: SweepVariable, values: Vec<f64>, trials: usize) -> SweepSpec {
        SweepSpec {
            label: "t".into(),
            base: BaseParams {
                relays: 3,
                pairs: 2,
                pu_power_db: 5.0,
                su_power_db: 5.0,
                interference_cap_db: 0.0,
                power_budget_db: 5.0,
                sigma_n2: 1.0,
            },
            sweep_variable: variable,
            values,
            trials,
            seed_base: 42,
            note: None,
        }
    }

    #[test]
    fn validation() {
        let ok = small_spec(SweepVariable::PowerBudget, vec![0.0, 5.0], 2);
        ok.validate().unwrap();
        assert!(small_spec(SweepVariable::PowerBudget, vec![], 2).validate().is_err());
        assert!(small_spec(SweepVariable::PowerBudget, vec![5.0, 5.0], 2).validate().is_err());
        assert!(small_spec(SweepVariable::PowerBudget, vec![5.0, 0.0], 2).validate().is_err());
        assert!(small_spec(SweepVariable::PowerBudget, vec![0.0], 0).validate().is_err());
        assert!(small_spec(SweepVariable::Relays, vec![2.5], 1).validate().is_err());
        assert!(small_spec(SweepVariable::Pairs, vec![0.0], 1).validate().is_err());
    }

    #[test]
    fn db_boundary_conversion() {
        let spec = small_spec(SweepVariable::InterferenceCap, vec![-10.0], 1);
        let cfg = spec.config_for(-10.0, 3);
        assert!((cfg.interference_cap - 0.1).abs() < 1e-15);
        assert!((cfg.pu_power - 10f64.powf(0.5)).abs() < 1e-12);
        assert_eq!(cfg.seed, 3);
        let spec = small_spec(SweepVariable::Pairs, vec![4.0], 1);
        let cfg = spec.config_for(4.0, 0);
        assert_eq!((cfg.transmitters, cfg.receivers), (4, 4));
    }

    #[test]
    fn seeds_are_unique_without_common_numbers() {
        let spec = small_spec(SweepVariable::Relays, vec![2.0, 3.0, 4.0, 5.0], 500);
        let seeds: HashSet<u64> = spec
            .values
            .iter()
            .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
            .map(|(v, t)| spec.trial_seed(v, t))
            .collect();
        assert_eq!(seeds.len(), 4 * 500);
    }

    #[test]
    fn common_numbers_share_draws_across_values() {
        let spec = small_spec(SweepVariable::PowerBudget, vec![0.0, 10.0], 300);
        let seeds: HashSet<u64> = (0..300).map(|t| spec.trial_seed(0.0, t)).collect();
        assert_eq!(seeds.len(), 300);
        for t in 0..300 {
            assert_eq!(spec.trial_seed(0.0, t), spec.trial_seed(10.0, t));
        }
    }

    #[test]
    fn aggregation() {
        let p = SweepPoint::from_trials(1.0, vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(p.trials_ok, 2);
        assert_eq!(p.trials_failed, 1);
        assert!(p.flagged);
        assert_eq!(p.mean_worst_sinr_db, Some(2.0));
        // sample std sqrt(2), over sqrt(2)
        assert!((p.stderr_db.unwrap() - 1.0).abs() < 1e-15);
        let single = SweepPoint::from_trials(0.0, vec![Some(4.0)]);
        assert_eq!(single.stderr_db, Some(0.0));
        let none = SweepPoint::from_trials(0.0, vec![None]);
        assert_eq!(none.mean_worst_sinr_db, None);
    }

    #[test]
    fn single_trial_csv() {
        let spec = small_spec(SweepVariable::PowerBudget, vec![3.0], 1);
        let res = run_sweep(&spec, &SolverSettings::default(), 1).unwrap();
        let csv = to_csv(&res).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "sweep_variable,value,mean_worst_sinr_db,stderr_db,trials_ok,trials_failed");
        assert!(lines[1].starts_with("P_t,3,"));
        assert!(lines[1].ends_with(",1,0"));
    }

    #[test]
    fn mean_is_order_invariant() {
        let mut raw: Vec<Option<f64>> = (0..50).map(|i| Some((i as f64 * 0.731).sin())).collect();
        let a = SweepPoint::from_trials(0.0, raw.clone());
        raw.reverse();
        let b = SweepPoint::from_trials(0.0, raw);
        assert!((a.mean_worst_sinr_db.unwrap() - b.mean_worst_sinr_db.unwrap()).abs() < 1e-14);
        assert!((a.stderr_db.unwrap() - b.stderr_db.unwrap()).abs() < 1e-14);
    }

    #[test]
    fn figure_presets_validate() {
        for spec in figures::interference_caps(10, 0)
            .into_iter()
            .chain(figures::pair_counts(10, 0))
            .chain(figures::relay_counts(10, 0))
        {
            spec.validate().unwrap();
        }
    }
}
