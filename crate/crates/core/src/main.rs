use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leland_core::asymptotics::{self, default_rho_grid, gamma_table, superhedge_rho, LimitContext};
use leland_core::experiment::{run_ensemble, run_experiment, ExperimentConfig, OutputFormat};
use leland_core::hedging::make_revision_grid;
use leland_core::model::{map_ensemble, EnsembleConfig};
use leland_core::output::{emit_results, gamma_table_csv, table_csv, write_file};
use leland_core::pricing::VolSchedule;
use leland_core::Result;

#[derive(Parser)]
#[command(name = "leland", version, about = "Cost-adjusted hedging experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment configuration; the built-in Hull–White setup otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write per-path summaries.
    Simulate {
        /// Revision count of the simulation grid (first configured n by default).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Hedge one ensemble for a single revision count.
    Hedge {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Sweep the configured revision counts and fit the convergence slope.
    Converge {
        /// Repeat the sweep for kappa in {0.0005, 0.001, 0.002}.
        #[arg(long)]
        kappa_sweep: bool,
    },
    /// Limiting trading volume and corrector against the spot.
    GammaTable {
        #[arg(long)]
        strike: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.1)]
        x_min: f64,
        #[arg(long, default_value_t = 15.0)]
        x_max: f64,
        #[arg(long, default_value_t = 150)]
        points: usize,
    },
    /// Quantile price against the shortfall probability.
    Quantile {
        #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.5])]
        epsilons: Vec<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Smallest enlargement whose limiting portfolio dominates the payoff.
    Superhedge {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Revision dates and remaining enlarged variance for several exponents.
    Grid {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.5, 1.9])]
        mus: Vec<f64>,
    },
    /// Run the quick invariant checks.
    Selftest,
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::hull_white_default(),
    };
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    if let Some(paths) = global.paths {
        cfg.n_paths = paths;
    }
    if let Some(workers) = global.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &global.out {
        cfg.output.dir = out.clone();
    }
    if let Some(format) = global.format {
        cfg.output.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn limit_context(cfg: &ExperimentConfig) -> LimitContext {
    LimitContext {
        strike: cfg.hedge.strike,
        kappa: cfg.hedge.kappa,
        rho: cfg.hedge.schedule.rho,
        sigma_fn: cfg.model.sigma_fn,
    }
}

fn report(path: &Path) {
    eprintln!("wrote {}", path.display());
}

/// Terminal `(S_1, y_1)` of every path on the grid for `n` revisions.
fn terminal_states(cfg: &ExperimentConfig, n: usize) -> Result<Vec<(f64, f64)>> {
    let grid = make_revision_grid(n, cfg.hedge.schedule.mu)?;
    let ensemble = EnsembleConfig {
        n_paths: cfg.n_paths,
        master_seed: cfg.seed_for(n),
        workers: cfg.workers,
    };
    map_ensemble(&cfg.model, &grid.dates, cfg.substeps_per_interval, ensemble, |_, p| {
        Ok((p.terminal_s(), p.terminal_y()))
    })
    .map(|(v, _)| v)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.global)?;
    let dir = cfg.output.dir.clone();
    let stem = cfg.output.stem.clone();
    let format = cfg.output.format;
    match cli.command {
        Command::Simulate { n } => {
            let n = n.unwrap_or(cfg.n_values[0]);
            let grid = make_revision_grid(n, cfg.hedge.schedule.mu)?;
            let ensemble = EnsembleConfig {
                n_paths: cfg.n_paths,
                master_seed: cfg.seed_for(n),
                workers: cfg.workers,
            };
            let (rows, rep) =
                map_ensemble(&cfg.model, &grid.dates, cfg.substeps_per_interval, ensemble, |k, p| {
                    let (lo, hi) = p
                        .s_post
                        .iter()
                        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
                    Ok(vec![
                        k.to_string(),
                        p.terminal_s().to_string(),
                        p.terminal_y().to_string(),
                        lo.to_string(),
                        hi.to_string(),
                        p.jump_marks.len().to_string(),
                    ])
                })?;
            let text = table_csv(&["path", "s1", "y1", "s_min", "s_max", "jumps"], &rows);
            let path = dir.join(format!("{stem}_paths.csv"));
            write_file(&path, &text)?;
            report(&path);
            eprintln!("resampled {} paths, rejected {} jump draws", rep.resampled, rep.rejected_jumps);
        }
        Command::Hedge { n } => {
            let mut single = cfg.clone();
            single.n_values = vec![n.unwrap_or(cfg.n_values[0])];
            let run = run_experiment(&single)?;
            report(&emit_results(&run.result, &single, &dir, &stem, format)?);
        }
        Command::Converge { kappa_sweep } => {
            let kappas: Vec<Option<f64>> = if kappa_sweep {
                vec![Some(0.0005), Some(0.001), Some(0.002)]
            } else {
                vec![None]
            };
            for kappa in kappas {
                let mut sweep = cfg.clone();
                let mut name = stem.clone();
                if let Some(k) = kappa {
                    sweep.hedge.kappa = k;
                    name = format!("{stem}_kappa{k}");
                }
                let run = run_experiment(&sweep)?;
                report(&emit_results(&run.result, &sweep, &dir, &name, format)?);
                if let Some(fit) = &run.result.slope {
                    println!(
                        "{name}: slope {:.4} (95% CI {:.4} .. {:.4})",
                        fit.slope, fit.ci_low, fit.ci_high
                    );
                }
            }
        }
        Command::GammaTable {
            strike,
            y,
            x_min,
            x_max,
            points,
        } => {
            let mut ctx = limit_context(&cfg);
            if let Some(k) = strike {
                ctx.strike = k;
            }
            let rows = gamma_table(x_min, x_max, points, y, &ctx)?;
            let path = dir.join(format!("{stem}_gamma.csv"));
            write_file(&path, &gamma_table_csv(&rows))?;
            report(&path);
        }
        Command::Quantile { epsilons, n } => {
            let n = n.unwrap_or(cfg.n_values[0]);
            let states = terminal_states(&cfg, n)?;
            let terminal: Vec<f64> = states.iter().map(|s| s.0).collect();
            let mut rows = Vec::new();
            for eps in epsilons {
                let delta = asymptotics::quantile_price(
                    &terminal,
                    cfg.hedge.kappa,
                    cfg.model.s0,
                    cfg.hedge.strike,
                    eps,
                )?;
                rows.push(vec![eps.to_string(), delta.to_string()]);
            }
            let path = dir.join(format!("{stem}_quantile.csv"));
            write_file(&path, &table_csv(&["epsilon", "delta"], &rows))?;
            report(&path);
        }
        Command::Superhedge { n } => {
            let n = n.unwrap_or(cfg.n_values[0]);
            let states = terminal_states(&cfg, n)?;
            let grid = default_rho_grid();
            let found = superhedge_rho(&states, &limit_context(&cfg), &grid)?;
            let rows: Vec<Vec<String>> = found
                .grid
                .iter()
                .zip(&found.feasible)
                .map(|(r, f)| vec![r.to_string(), f.to_string()])
                .collect();
            let path = dir.join(format!("{stem}_superhedge.csv"));
            write_file(&path, &table_csv(&["rho", "feasible"], &rows))?;
            report(&path);
            println!("rho_star {}", found.rho_star);
        }
        Command::Grid { n, mus } => {
            let mut rows = Vec::new();
            for mu in mus {
                let grid = make_revision_grid(n, mu)?;
                let schedule = VolSchedule::simple(n, mu, cfg.hedge.schedule.rho)?;
                for (j, &t) in grid.dates.iter().enumerate() {
                    rows.push(vec![
                        mu.to_string(),
                        j.to_string(),
                        t.to_string(),
                        schedule.lambda_at(t).to_string(),
                    ]);
                }
            }
            let path = dir.join(format!("{stem}_grid.csv"));
            write_file(&path, &table_csv(&["mu", "j", "t", "lambda"], &rows))?;
            report(&path);
        }
        Command::Selftest => return Ok(selftest(&cfg)),
    }
    Ok(true)
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn selftest(cfg: &ExperimentConfig) -> bool {
    use leland_core::asymptotics::{g_fn, lambda_fn};
    use leland_core::pricing::{call_delta, call_gamma, call_price};

    let mut all = true;
    let g0 = (g_fn(0.0) - (2.0 / std::f64::consts::PI).sqrt()).abs();
    all &= check("G(0)", g0 < 1e-12, format!("error {g0:e}"));
    let l0 = (lambda_fn(0.0) - (1.0 - 2.0 / std::f64::consts::PI)).abs();
    all &= check("Lambda(0)", l0 < 1e-12, format!("error {l0:e}"));

    let (lam, x) = (0.7, 1.2);
    let h = 1e-4;
    let fd = (call_price(lam, x + h, 1.0) - call_price(lam, x - h, 1.0)) / (2.0 * h);
    let rel = (fd - call_delta(lam, x, 1.0)).abs() / call_delta(lam, x, 1.0);
    all &= check("delta vs finite difference", rel < 1e-6, format!("rel {rel:e}"));
    let fd = (call_delta(lam, x + h, 1.0) - call_delta(lam, x - h, 1.0)) / (2.0 * h);
    let exact = call_gamma(lam, x, 1.0).unwrap_or(f64::NAN);
    let rel = (fd - exact).abs() / exact;
    all &= check("gamma vs finite difference", rel < 1e-6, format!("rel {rel:e}"));

    let mut small = cfg.clone();
    small.n_values = vec![cfg.n_values[0]];
    small.n_paths = cfg.n_paths.min(2000);
    match run_ensemble(&small, small.n_values[0]) {
        Ok((records, _)) => {
            let s1: Vec<f64> = records.iter().map(|r| r.s1).collect();
            let m = leland_core::stats::mean(&s1);
            let se = leland_core::stats::std_dev(&s1) / (s1.len() as f64).sqrt();
            let dev = (m - cfg.model.s0).abs();
            all &= check("martingale", dev <= 3.0 * se, format!("|mean S1 - S0| = {dev:.5}, 3 se = {:.5}", 3.0 * se));
            let costs_ok = records.iter().all(|r| r.gamma_n >= 0.0 && r.raw_error.is_finite());
            all &= check("finite hedges", costs_ok, format!("{} paths", records.len()));
        }
        Err(e) => all &= check("ensemble", false, e.to_string()),
    }
    all
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
