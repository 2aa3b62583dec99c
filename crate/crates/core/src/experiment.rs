//! Monte Carlo experiments: configuration, per-`n` ensembles and the
//! convergence-rate fit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedging::{make_revision_grid, run_hedge, theorem_corrector, HedgeConfig, Strategy, Theorem};
use crate::model::{map_ensemble, EnsembleConfig, EnsembleReport, ModelSpec};
use crate::normal::SQRT_8_OVER_PI;
use crate::pricing::{ScheduleForm, VolSchedule};
use crate::rng::{derive_seed, substream};
use crate::stats::{fit_log_slope, SlopeFit, Summary};

/// Bootstrap replicates behind the slope confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const BOOTSTRAP_LABEL: u64 = 0xB007;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Enlarged-volatility schedule without the revision count, which each
/// ensemble fills in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleTemplate {
    pub form: ScheduleForm,
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub rho: f64,
    #[serde(default)]
    pub base_sigma: f64,
}

fn default_mu() -> f64 {
    1.0
}

impl ScheduleTemplate {
    pub fn with_n(&self, n: usize) -> Result<VolSchedule> {
        let s = VolSchedule {
            form: self.form,
            n,
            mu: self.mu,
            rho: self.rho,
            base_sigma: self.base_sigma,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeTemplate {
    pub strategy: Strategy,
    pub schedule: ScheduleTemplate,
    pub kappa: f64,
    pub strike: f64,
    #[serde(default)]
    pub include_initial_cost: bool,
}

impl HedgeTemplate {
    pub fn with_n(&self, n: usize) -> Result<HedgeConfig> {
        let cfg = HedgeConfig {
            strategy: self.strategy,
            schedule: self.schedule.with_n(n)?,
            kappa: self.kappa,
            strike: self.strike,
            include_initial_cost: self.include_initial_cost,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_stem")]
    pub stem: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_stem() -> String {
    "results".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            stem: default_stem(),
            format: OutputFormat::Csv,
        }
    }
}

fn default_substeps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub hedge: HedgeTemplate,
    pub n_values: Vec<usize>,
    pub n_paths: usize,
    pub master_seed: u64,
    #[serde(default = "default_substeps")]
    pub substeps_per_interval: usize,
    /// Corrector applied to the raw error; without one the corrected error
    /// equals the raw error.
    #[serde(default)]
    pub theorem: Option<Theorem>,
    /// Worker threads, 0 for one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Hull–White model with Gaussian price jumps, `S_0 = K = 1`,
    /// `rho = sqrt(8/pi)`, `kappa = 0.001`, Leland strategy on a uniform grid.
    pub fn hull_white_default() -> Self {
        Self {
            model: ModelSpec::hull_white_jumps(0.0),
            hedge: HedgeTemplate {
                strategy: Strategy::Leland,
                schedule: ScheduleTemplate {
                    form: ScheduleForm::Simple,
                    mu: 1.0,
                    rho: SQRT_8_OVER_PI,
                    base_sigma: 0.0,
                },
                kappa: 0.001,
                strike: 1.0,
                include_initial_cost: false,
            },
            n_values: vec![50, 100, 200, 400, 800],
            n_paths: 500,
            master_seed: 20_240_601,
            substeps_per_interval: 4,
            theorem: Some(Theorem::Svjp),
            workers: 0,
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_values must be strictly increasing".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if self.substeps_per_interval == 0 {
            return Err(Error::Config("substeps_per_interval must be >= 1".into()));
        }
        for &n in &self.n_values {
            self.hedge.with_n(n)?;
        }
        if let Some(theorem) = self.theorem {
            let cfg = self.hedge.with_n(self.n_values[0])?;
            theorem_corrector(self.model.s0, self.model.y0_init, &cfg, theorem, &self.model.sigma_fn)
                .map(|_| ())
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Seed of the ensemble for revision count `n`.
    pub fn seed_for(&self, n: usize) -> u64 {
        derive_seed(self.master_seed, n as u64)
    }
}

/// What one hedged path contributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub s1: f64,
    pub y1: f64,
    pub raw_error: f64,
    pub corrected_error: f64,
    pub gamma_n: f64,
    pub corrector: f64,
    pub n_trades: usize,
}

/// Statistics of one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub paths: usize,
    pub mean_raw: f64,
    pub std_raw: f64,
    pub mean_corrected: f64,
    pub std_corrected: f64,
    pub stderr_corrected: f64,
    pub skew_corrected: f64,
    pub mean_gamma_n: f64,
    pub mean_corrector: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub slope: Option<SlopeFit>,
}

/// A finished experiment with its per-path records.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub result: ExperimentResult,
    pub records: Vec<Vec<PathRecord>>,
    pub reports: Vec<EnsembleReport>,
}

impl ExperimentRun {
    pub fn corrected_samples(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.iter().map(|p| p.corrected_error).collect())
            .collect()
    }

    pub fn raw_samples(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.iter().map(|p| p.raw_error).collect())
            .collect()
    }
}

/// Hedges one independent ensemble of `config.n_paths` paths for revision
/// count `n`.
pub fn run_ensemble(config: &ExperimentConfig, n: usize) -> Result<(Vec<PathRecord>, EnsembleReport)> {
    let hedge = config.hedge.with_n(n)?;
    let grid = make_revision_grid(n, hedge.schedule.mu)?;
    let ensemble = EnsembleConfig {
        n_paths: config.n_paths,
        master_seed: config.seed_for(n),
        workers: config.workers,
    };
    let sigma_fn = config.model.sigma_fn;
    map_ensemble(
        &config.model,
        &grid.dates,
        config.substeps_per_interval,
        ensemble,
        |_, path| {
            let outcome = run_hedge(path, &hedge)?;
            let (s1, y1) = (path.terminal_s(), path.terminal_y());
            let corrector = match config.theorem {
                Some(theorem) => theorem_corrector(s1, y1, &hedge, theorem, &sigma_fn)?,
                None => 0.0,
            };
            Ok(PathRecord {
                s1,
                y1,
                raw_error: outcome.raw_error,
                corrected_error: outcome.raw_error - corrector,
                gamma_n: outcome.gamma_n,
                corrector,
                n_trades: outcome.n_trades,
            })
        },
    )
}

fn summarize(n: usize, seed: u64, records: &[PathRecord]) -> ResultRow {
    let column = |f: fn(&PathRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let raw = Summary::of(&column(|p| p.raw_error));
    let corrected = Summary::of(&column(|p| p.corrected_error));
    ResultRow {
        n,
        paths: records.len(),
        mean_raw: raw.mean,
        std_raw: raw.std,
        mean_corrected: corrected.mean,
        std_corrected: corrected.std,
        stderr_corrected: corrected.stderr,
        skew_corrected: corrected.skew,
        mean_gamma_n: crate::stats::mean(&column(|p| p.gamma_n)),
        mean_corrector: crate::stats::mean(&column(|p| p.corrector)),
        seed,
    }
}

/// Runs every `n` of the configuration on its own ensemble and, when there
/// are enough `n` values spanning at least a decade, fits the convergence
/// slope.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.n_values.len());
    let mut records = Vec::with_capacity(config.n_values.len());
    let mut reports = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let (recs, report) = run_ensemble(config, n)?;
        rows.push(summarize(n, config.master_seed, &recs));
        records.push(recs);
        reports.push(report);
    }
    let mut run = ExperimentRun {
        result: ExperimentResult { rows, slope: None },
        records,
        reports,
    };
    if slope_applicable(&config.n_values) {
        run.result.slope = Some(convergence_slope(&run, config.master_seed)?);
    }
    Ok(run)
}

fn slope_applicable(n_values: &[usize]) -> bool {
    match (n_values.first(), n_values.last()) {
        (Some(&lo), Some(&hi)) => n_values.len() >= 4 && hi >= 10 * lo,
        _ => false,
    }
}

/// OLS slope of `log std(corrected error)` on `log n` with a 95% bootstrap
/// interval over paths.
pub fn convergence_slope(run: &ExperimentRun, master_seed: u64) -> Result<SlopeFit> {
    let n_values: Vec<usize> = run.result.rows.iter().map(|r| r.n).collect();
    if !slope_applicable(&n_values) {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: n_values.len(),
        });
    }
    let mut rng = substream(derive_seed(master_seed, BOOTSTRAP_LABEL), 0, 0);
    fit_log_slope(&n_values, &run.corrected_samples(), BOOTSTRAP_RESAMPLES, &mut rng)
}
