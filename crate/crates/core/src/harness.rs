//! Seeded Monte-Carlo sweeps, CSV persistence and experiment presets.
//!
//! Every `(sweep value, trial)` pair draws its channels from stream
//! `(seed, trial)`, so all schemes at a point see the same realization.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, Scheme};
use crate::error::{Error, Result};
use crate::model::{db_to_linear, sample_channels, SystemConfig};
use crate::solver::SolveReport;

/// The swept parameter. `Iterations` runs the convergence experiment at
/// each listed sensor power and keeps the per-iteration traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Iterations(Vec<f64>),
    PSDb(Vec<f64>),
    K(Vec<usize>),
    Epsilon(Vec<f64>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Iterations(_) => "iterations",
            Sweep::PSDb(_) => "p_s_db",
            Sweep::K(_) => "k",
            Sweep::Epsilon(_) => "epsilon",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Iterations(v) | Sweep::PSDb(v) | Sweep::Epsilon(v) => v.clone(),
            Sweep::K(v) => v.iter().map(|&k| k as f64).collect(),
        }
    }

    /// The base configuration moved to the `index`-th sweep point.
    pub fn apply(&self, base: &SystemConfig, index: usize) -> SystemConfig {
        match self {
            Sweep::Iterations(v) | Sweep::PSDb(v) => base.clone().with_p_s_db(v[index]),
            Sweep::K(v) => base.clone().with_k(v[index]),
            Sweep::Epsilon(v) => base.clone().with_epsilon(v[index]),
        }
    }

    fn validate(&self) -> Result<()> {
        let values = self.values();
        if values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if !values.iter().all(|v| v.is_finite()) || !values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!("{} sweep must be finite and strictly increasing", self.name())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        for i in 0..self.sweep.values().len() {
            self.sweep.apply(&self.base, i).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub scheme: Scheme,
    pub sweep_name: String,
    pub sweep_value: f64,
    /// MSE divided by the number of sensors. NaN when the solver failed.
    pub normalized_mse: f64,
    pub kld_final: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// One row of the convergence-trace export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trial: u64,
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub iteration: usize,
    pub normalized_mse: f64,
    pub objective: f64,
    pub residual: f64,
    pub penalty: f64,
}

fn record_from(report: &Result<SolveReport>, trial: u64, scheme: Scheme, sweep: &Sweep, value: f64, k: usize) -> TrialRecord {
    let base = TrialRecord {
        trial,
        scheme,
        sweep_name: sweep.name().to_string(),
        sweep_value: value,
        normalized_mse: f64::NAN,
        kld_final: f64::NAN,
        iterations: 0,
        converged: false,
        wall_time_s: 0.0,
    };
    match report {
        Ok(r) => TrialRecord {
            normalized_mse: r.mse / k as f64,
            kld_final: r.kld_final,
            iterations: r.iterations,
            converged: r.converged,
            wall_time_s: r.wall_time,
            ..base
        },
        Err(_) => base,
    }
}

fn traces_from(report: &SolveReport, trial: u64, scheme: Scheme, value: f64, k: usize) -> Vec<TraceRecord> {
    (0..report.mse_trace.len())
        .map(|i| TraceRecord {
            trial,
            scheme,
            sweep_value: value,
            iteration: i,
            normalized_mse: report.mse_trace[i] / k as f64,
            objective: report.objective_trace[i],
            residual: report.residual_trace[i],
            penalty: report.penalty_trace[i],
        })
        .collect()
}

/// Runs every `(sweep value, scheme, trial)` cell and returns records in that
/// order. Solver failures become records with a NaN MSE.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    Ok(run_experiment_traced(spec)?.0)
}

/// As [`run_experiment`], also returning per-iteration traces when the sweep
/// is `Iterations`.
pub fn run_experiment_traced(spec: &ExperimentSpec) -> Result<(Vec<TrialRecord>, Vec<TraceRecord>)> {
    spec.validate()?;
    let values = spec.sweep.values();
    let cells: Vec<(usize, Scheme, u64)> = (0..values.len())
        .flat_map(|i| spec.schemes.iter().flat_map(move |&s| (0..spec.trials as u64).map(move |t| (i, s, t))))
        .collect();
    let keep_traces = matches!(spec.sweep, Sweep::Iterations(_));

    let outcomes: Vec<(TrialRecord, Vec<TraceRecord>)> = cells
        .par_iter()
        .map(|&(i, scheme, trial)| {
            let config = spec.sweep.apply(&spec.base, i);
            let report = sample_channels(&config, trial).and_then(|ch| run_baseline(scheme, &ch, &config, trial));
            let record = record_from(&report, trial, scheme, &spec.sweep, values[i], config.k);
            let traces = match &report {
                Ok(r) if keep_traces => traces_from(r, trial, scheme, values[i], config.k),
                _ => Vec::new(),
            };
            (record, traces)
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::new();
    for (r, t) in outcomes {
        records.push(r);
        traces.extend(t);
    }
    Ok((records, traces))
}

struct Sig9(f64);

impl fmt::Display for Sig9 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        if x.is_nan() {
            f.write_str("NaN")
        } else if x.is_infinite() {
            f.write_str(if x > 0.0 { "inf" } else { "-inf" })
        } else {
            // Shortest round-trip of the value rounded to 9 significant digits.
            let rounded: f64 = format!("{x:.8e}").parse().map_err(|_| fmt::Error)?;
            write!(f, "{rounded}")
        }
    }
}

pub const CSV_HEADER: [&str; 9] =
    ["trial", "scheme", "sweep_name", "sweep_value", "normalized_mse", "kld_final", "iterations", "converged", "wall_time_s"];

pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.scheme.to_string(),
            r.sweep_name.clone(),
            Sig9(r.sweep_value).to_string(),
            Sig9(r.normalized_mse).to_string(),
            Sig9(r.kld_final).to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            Sig9(r.wall_time_s).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header in {}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_traces_csv(traces: &[TraceRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "scheme", "sweep_value", "iteration", "normalized_mse", "objective", "residual", "penalty"])?;
    for t in traces {
        w.write_record([
            t.trial.to_string(),
            t.scheme.to_string(),
            Sig9(t.sweep_value).to_string(),
            t.iteration.to_string(),
            Sig9(t.normalized_mse).to_string(),
            Sig9(t.objective).to_string(),
            Sig9(t.residual).to_string(),
            Sig9(t.penalty).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub mean: f64,
    pub stderr: f64,
    /// Trials with a finite MSE.
    pub count: usize,
    pub failures: usize,
}

/// Mean and standard error of the normalized MSE per `(sweep value, scheme)`,
/// in first-appearance order. Failed trials are counted but excluded.
pub fn summarize(records: &[TrialRecord]) -> Vec<Summary> {
    let mut keys: Vec<(f64, Scheme)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(v, s)| v == r.sweep_value && s == r.scheme) {
            keys.push((r.sweep_value, r.scheme));
        }
    }
    keys.into_iter()
        .map(|(value, scheme)| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_value == value && r.scheme == scheme).collect();
            let xs: Vec<f64> = cell.iter().map(|r| r.normalized_mse).filter(|x| x.is_finite()).collect();
            let (mean, stderr) = mean_stderr(&xs);
            Summary { sweep_value: value, scheme, mean, stderr, count: xs.len(), failures: cell.len() - xs.len() }
        })
        .collect()
}

/// Sample mean and `sd / sqrt(n)` with the unbiased variance.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn write_summary_csv(summary: &[Summary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep_value", "scheme", "mean_normalized_mse", "stderr", "count", "failures"])?;
    for s in summary {
        w.write_record([
            Sig9(s.sweep_value).to_string(),
            s.scheme.to_string(),
            Sig9(s.mean).to_string(),
            Sig9(s.stderr).to_string(),
            s.count.to_string(),
            s.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `trials.csv`, `summary.csv`, `spec.json` and, when present,
/// `traces.csv` into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, records: &[TrialRecord], traces: &[TraceRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(records, &dir.join("trials.csv"))?;
    write_summary_csv(&summarize(records), &dir.join("summary.csv"))?;
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)?)?;
    if !traces.is_empty() {
        write_traces_csv(traces, &dir.join("traces.csv"))?;
    }
    Ok(())
}

/// Scenario as written in a config file. Powers are given in dB relative to
/// the noise power; missing fields take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub n_s: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub k: usize,
    pub p_s_db: f64,
    pub p_a_db: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub penalty: f64,
    pub max_iters: usize,
    pub tol_obj: f64,
    pub tol_residual: f64,
    pub seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let c = SystemConfig::desk();
        ConfigFile {
            n_s: c.n_s,
            n_t: c.n_t,
            n_r: c.n_r,
            k: c.k,
            p_s_db: 10.0,
            p_a_db: 30.0,
            sigma2: c.sigma2_a,
            rho: c.rho,
            epsilon: c.epsilon,
            penalty: c.penalty,
            max_iters: c.max_iters,
            tol_obj: c.tol_obj,
            tol_residual: c.tol_residual,
            seed: c.seed,
        }
    }
}

impl From<&ConfigFile> for SystemConfig {
    fn from(f: &ConfigFile) -> Self {
        SystemConfig {
            n_s: f.n_s,
            n_t: f.n_t,
            n_r: f.n_r,
            k: f.k,
            p_sensor: vec![db_to_linear(f.p_s_db, f.sigma2); f.k],
            p_ap: db_to_linear(f.p_a_db, f.sigma2),
            sigma2_a: f.sigma2,
            sigma2_w: f.sigma2,
            rho: f.rho,
            epsilon: f.epsilon,
            penalty: f.penalty,
            max_iters: f.max_iters,
            tol_obj: f.tol_obj,
            tol_residual: f.tol_residual,
            seed: f.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default)]
    pub base: ConfigFile,
    pub sweep: Sweep,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_trials() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentFile {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn into_spec(self) -> ExperimentSpec {
        ExperimentSpec {
            base: SystemConfig::from(&self.base),
            sweep: self.sweep,
            schemes: self.schemes,
            trials: self.trials,
            output_dir: self.output_dir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Two antennas everywhere and at most six sensors.
    Desk,
    /// Four antennas everywhere and ten sensors.
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::Config(format!("unknown scale {s:?}"))),
        }
    }
}

impl Preset {
    pub fn spec(self, scale: Scale) -> ExperimentSpec {
        let (n, k) = match scale {
            Scale::Desk => (2, 4),
            Scale::Full => (4, 10),
        };
        let base = SystemConfig::with_dims(n, k, 10.0);
        let (sweep, schemes, trials) = match (self, scale) {
            (Preset::Fig1, Scale::Desk) => (Sweep::Iterations(vec![5.0, 10.0, 15.0]), vec![Scheme::Proposed], 3),
            (Preset::Fig1, Scale::Full) => (Sweep::Iterations(vec![5.0, 10.0, 15.0]), vec![Scheme::Proposed], 3),
            (Preset::Fig2, Scale::Desk) => (Sweep::PSDb(vec![5.0, 10.0, 15.0]), all_schemes(), 100),
            (Preset::Fig2, Scale::Full) => (Sweep::PSDb(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]), all_schemes(), 100),
            (Preset::Fig3, Scale::Desk) => (Sweep::K(vec![2, 4, 6]), all_schemes(), 100),
            (Preset::Fig3, Scale::Full) => (Sweep::K(vec![2, 4, 6, 8, 10, 12]), all_schemes(), 100),
            (Preset::Fig4, _) => (Sweep::Epsilon(vec![0.05, 0.1, 0.2]), all_schemes(), 100),
        };
        let name = match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        };
        ExperimentSpec { base, sweep, schemes, trials, output_dir: PathBuf::from("results").join(name) }
    }
}
