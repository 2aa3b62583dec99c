//! Discrete hedging with proportional transaction costs.
//!
//! Positions are revised at `t_i = 1 - (1 - i/n)^mu`. The position chosen at
//! `t_i` looks at the left limit `S_{t_i-}`, is held on `(t_i, t_{i+1}]` and
//! earns `gamma_i (S_{t_{i+1}} - S_{t_i})` on post-jump prices. Rebalancing at
//! `t_i` costs `kappa S_{t_i} |gamma_i - gamma_{i-1}|` for `i = 1..n`. The last
//! position is the strategy's own rule at `t = 1`: the payoff hedge
//! `1{S_1 > K}`, minus the full correction integral for Lépinette.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, LimitContext};
use crate::error::{Error, Result};
use crate::model::{SimulatedPath, VolFunction};
use crate::pricing::{call_delta, call_price, gamma_unchecked, jump_remainder, VolSchedule};

const GRID_TOLERANCE: f64 = 1e-12;

/// Revision dates `t_i = 1 - (1 - i/n)^mu`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionGrid {
    pub n: usize,
    pub mu: f64,
    pub dates: Vec<f64>,
}

/// Builds the revision grid. `n = 1` (a single rebalancing at `t = 0`) is
/// allowed so the strategies can be compared in that edge case.
pub fn make_revision_grid(n: usize, mu: f64) -> Result<RevisionGrid> {
    if n == 0 {
        return Err(Error::InvalidSchedule("n must be >= 1".into()));
    }
    if !(1.0..2.0).contains(&mu) {
        return Err(Error::InvalidSchedule(format!("mu must lie in [1, 2), got {mu}")));
    }
    let mut dates: Vec<f64> = (0..=n)
        .map(|i| 1.0 - (1.0 - i as f64 / n as f64).powf(mu))
        .collect();
    dates[0] = 0.0;
    dates[n] = 1.0;
    Ok(RevisionGrid { n, mu, dates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Delta of the enlarged-volatility price.
    Leland,
    /// Leland delta minus the accumulated `int C_xt dt` along the path.
    Lepinette,
    /// Black–Scholes delta with the path's own volatility and no enlargement.
    /// A baseline only.
    PlainDelta,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Leland => "leland",
            Strategy::Lepinette => "lepinette",
            Strategy::PlainDelta => "plain_delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeConfig {
    pub strategy: Strategy,
    pub schedule: VolSchedule,
    pub kappa: f64,
    pub strike: f64,
    /// Also charge `kappa S_0 |gamma_0|` for setting up the initial position.
    #[serde(default)]
    pub include_initial_cost: bool,
}

impl HedgeConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::InvalidArgument(format!(
                "kappa must lie in [0, 1), got {}",
                self.kappa
            )));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeOutcome {
    pub v0: f64,
    pub v1: f64,
    pub payoff: f64,
    /// Traded dollar volume `sum S_{t_i} |gamma_i - gamma_{i-1}|`.
    pub gamma_n: f64,
    pub n_trades: usize,
    pub raw_error: f64,
    /// Positions `gamma_0 .. gamma_n`.
    pub positions: Vec<f64>,
}

impl HedgeOutcome {
    pub fn total_cost(&self, kappa: f64) -> f64 {
        kappa * self.gamma_n
    }
}

/// `C_x(t_prev, S_{t_prev-})`.
pub fn leland_position(schedule: &VolSchedule, t_prev: f64, s_pre: f64, strike: f64) -> f64 {
    call_delta(schedule.lambda_at(t_prev), s_pre, strike)
}

/// Leland position minus the running `int_0^{t_prev} C_xt(t, S_{t-}) dt`.
pub fn lepinette_position(
    schedule: &VolSchedule,
    t_prev: f64,
    s_pre: f64,
    strike: f64,
    accumulated_correction: f64,
) -> f64 {
    leland_position(schedule, t_prev, s_pre, strike) - accumulated_correction
}

/// `int_a^b C_xt(t, S) dt` with `S` frozen. Since `C_xt` is the time
/// derivative of `C_x` along the schedule, this is an exact difference.
fn frozen_correction(schedule: &VolSchedule, a: f64, b: f64, s: f64, strike: f64) -> f64 {
    call_delta(schedule.lambda_at(b), s, strike) - call_delta(schedule.lambda_at(a), s, strike)
}

/// Running Lépinette correction at each revision date `t_0 .. t_n`.
///
/// On every simulation step `[t_k, t_{k+1}]` the price is frozen at the
/// geometric mean of `S_{t_k}` and `S_{t_{k+1}-}`, the midpoint of the step
/// in log space, and the time integral is taken exactly.
pub fn lepinette_corrections(
    path: &SimulatedPath,
    schedule: &VolSchedule,
    strike: f64,
) -> Vec<f64> {
    let n = path.revisions();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        let (from, to) = (path.revision_nodes[i - 1], path.revision_nodes[i]);
        for k in from..to {
            let s_mid = (path.s_post[k] * path.s_pre[k + 1]).sqrt();
            acc += frozen_correction(schedule, path.times[k], path.times[k + 1], s_mid, strike);
        }
        out.push(acc);
    }
    out
}

fn check_grid(path: &SimulatedPath, schedule: &VolSchedule) -> Result<()> {
    if path.revisions() != schedule.n {
        return Err(Error::GridMismatch(format!(
            "path has {} revision intervals, schedule expects {}",
            path.revisions(),
            schedule.n
        )));
    }
    let grid = make_revision_grid(schedule.n, schedule.mu)?;
    for (i, (&node, &t)) in path.revision_nodes.iter().zip(&grid.dates).enumerate() {
        if (path.times[node] - t).abs() > GRID_TOLERANCE {
            return Err(Error::GridMismatch(format!(
                "revision date {i} is {} on the path but {t} on the grid",
                path.times[node]
            )));
        }
    }
    Ok(())
}

/// Positions `gamma_0 .. gamma_n` of `config.strategy` along `path`.
pub fn positions(path: &SimulatedPath, config: &HedgeConfig) -> Result<Vec<f64>> {
    config.validate()?;
    check_grid(path, &config.schedule)?;
    let n = config.schedule.n;
    let k = config.strike;
    let mut out = Vec::with_capacity(n + 1);
    let corrections = match config.strategy {
        Strategy::Lepinette => Some(lepinette_corrections(path, &config.schedule, k)),
        _ => None,
    };
    for i in 0..n {
        let node = path.revision_nodes[i];
        let t = path.times[node];
        let x = path.s_pre[node];
        let gamma = match config.strategy {
            Strategy::Leland => leland_position(&config.schedule, t, x, k),
            Strategy::Lepinette => {
                let acc = corrections.as_ref().map_or(0.0, |c| c[i]);
                lepinette_position(&config.schedule, t, x, k, acc)
            }
            Strategy::PlainDelta => {
                let vol = path.sigma[node];
                call_delta(vol * vol * (1.0 - t), x, k)
            }
        };
        out.push(gamma);
    }
    let hedge = if path.terminal_s() > k { 1.0 } else { 0.0 };
    out.push(hedge - corrections.as_ref().map_or(0.0, |c| c[n]));
    Ok(out)
}

/// Runs the self-financing portfolio along one path.
pub fn run_hedge(path: &SimulatedPath, config: &HedgeConfig) -> Result<HedgeOutcome> {
    let gammas = positions(path, config)?;
    let n = config.schedule.n;
    let s0 = path.s_post[0];
    // The baseline delta hedge starts from the price under the model's own
    // volatility, the others from the enlarged price.
    let lambda0 = match config.strategy {
        Strategy::PlainDelta => path.sigma[0] * path.sigma[0],
        _ => config.schedule.lambda_at(0.0),
    };
    let v0 = call_price(lambda0, s0, config.strike);

    let mut gains = 0.0;
    let mut volume = if config.include_initial_cost {
        s0 * gammas[0].abs()
    } else {
        0.0
    };
    let mut n_trades = 0;
    for i in 1..=n {
        let s_prev = path.s_post[path.revision_nodes[i - 1]];
        let s_now = path.s_post[path.revision_nodes[i]];
        gains += gammas[i - 1] * (s_now - s_prev);
        let change = gammas[i] - gammas[i - 1];
        if change != 0.0 {
            n_trades += 1;
            volume += s_now * change.abs();
        }
    }
    let v1 = v0 + gains - config.kappa * volume;
    let payoff = (path.terminal_s() - config.strike).max(0.0);
    Ok(HedgeOutcome {
        v0,
        v1,
        payoff,
        gamma_n: volume,
        n_trades,
        raw_error: v1 - payoff,
        positions: gammas,
    })
}

/// Which limit theorem supplies the corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Leland strategy, stochastic volatility with price jumps:
    /// `D = V_1 - h(S_1) - min(S_1, K) + kappa Gamma(S_1, y_1, rho)`.
    Svjp,
    /// Lépinette strategy: `D = V_1 - h(S_1) - eta min(S_1, K)`.
    Lepinette,
    /// Constant-volatility versions of the two above.
    ConstVol,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::Svjp => "svjp",
            Theorem::Lepinette => "lepinette",
            Theorem::ConstVol => "const_vol",
        }
    }
}

/// The quantity a theorem subtracts from the raw error: the corrector
/// `min(S_1, K) - kappa Gamma(S_1, y_1, rho)` for the Leland strategy and
/// `eta min(S_1, K)` for Lépinette's.
pub fn theorem_corrector(
    s1: f64,
    y1: f64,
    config: &HedgeConfig,
    theorem: Theorem,
    sigma_fn: &VolFunction,
) -> Result<f64> {
    let mismatch = || Error::TheoremMismatch {
        theorem: theorem.name(),
        strategy: config.strategy.name(),
    };
    let ctx = LimitContext {
        strike: config.strike,
        kappa: config.kappa,
        rho: config.schedule.rho,
        sigma_fn: *sigma_fn,
    };
    let use_eta = match (theorem, config.strategy) {
        (_, Strategy::PlainDelta) => return Err(mismatch()),
        (Theorem::Svjp, Strategy::Leland) => false,
        (Theorem::Lepinette, Strategy::Lepinette) => true,
        (Theorem::ConstVol, strategy) => {
            if !sigma_fn.is_constant() {
                return Err(mismatch());
            }
            strategy == Strategy::Lepinette
        }
        _ => return Err(mismatch()),
    };
    if use_eta {
        Ok(asymptotics::eta(y1, &ctx) * s1.min(config.strike))
    } else {
        asymptotics::corrector(s1, y1, &ctx)
    }
}

/// Theorem-specific corrected error for a finished hedge.
pub fn corrected_error(
    outcome: &HedgeOutcome,
    s1: f64,
    y1: f64,
    config: &HedgeConfig,
    theorem: Theorem,
    sigma_fn: &VolFunction,
) -> Result<f64> {
    Ok(outcome.raw_error - theorem_corrector(s1, y1, config, theorem, sigma_fn)?)
}

/// Terms of `V_1 - h(S_1) = 1/2 I_1 + I_2 - I_3 - kappa Gamma_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub gamma_n: f64,
    pub raw_error: f64,
    pub kappa: f64,
}

impl Decomposition {
    /// `1/2 I_1 + I_2 - I_3 - kappa Gamma_n`.
    pub fn reconstructed(&self) -> f64 {
        0.5 * self.i1 + self.i2 - self.i3 - self.kappa * self.gamma_n
    }

    pub fn residual(&self) -> f64 {
        self.raw_error - self.reconstructed()
    }
}

/// Evaluates the error decomposition on a coarsened copy of the simulation
/// grid with `fine_factor` steps per revision interval (plus every jump
/// node). `path.substeps` must be a multiple of `fine_factor`.
///
/// On a step `[a, b]` with price `S_a` at the start and `S_{b-}` at the end:
/// the enlarged part of `I_1` is the exact frozen-price integral
/// `2 (C(lambda_a, S_a) - C(lambda_b, S_a))`, the model part is
/// `C_xx(lambda_a, S_a) (S_{b-} - S_a)^2`, `I_2` collects
/// `(gamma - C_x(lambda_a, S_a)) (S_{b-} - S_a)` and, at a jump,
/// `(gamma - C_x(lambda_b, S_{b-})) (S_b - S_{b-})`, and `I_3` the jump
/// remainders `B(lambda_b, S_{b-}, S_b / S_{b-} - 1)`.
pub fn error_decomposition(
    path: &SimulatedPath,
    config: &HedgeConfig,
    fine_factor: usize,
) -> Result<Decomposition> {
    if fine_factor == 0 || path.substeps % fine_factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "fine_factor {fine_factor} must divide the path's {} substeps",
            path.substeps
        )));
    }
    let outcome = run_hedge(path, config)?;
    let stride = path.substeps / fine_factor;
    let k = config.strike;
    let schedule = &config.schedule;

    let mut kept = Vec::with_capacity(path.revisions() * fine_factor + path.jump_marks.len() + 1);
    let mut ordinal = 0;
    for node in 0..path.len() {
        let jumped = path.s_post[node] != path.s_pre[node];
        if path.on_base[node] {
            if path.revision_nodes.binary_search(&node).is_ok() {
                ordinal = 0;
            }
            if ordinal % stride == 0 || jumped {
                kept.push(node);
            }
            ordinal += 1;
        } else {
            kept.push(node);
        }
    }

    let (mut i1, mut i2, mut i3) = (0.0, 0.0, 0.0);
    let mut interval = 0;
    for w in kept.windows(2) {
        let (a, b) = (w[0], w[1]);
        while interval + 1 < path.revisions() && path.revision_nodes[interval + 1] <= a {
            interval += 1;
        }
        let gamma = outcome.positions[interval];
        let (lam_a, lam_b) = (schedule.lambda_at(path.times[a]), schedule.lambda_at(path.times[b]));
        let s_a = path.s_post[a];
        let ds = path.s_pre[b] - s_a;
        let enlarged = 2.0 * (call_price(lam_a, s_a, k) - call_price(lam_b, s_a, k));
        let realized = gamma_unchecked(lam_a, s_a, k) * ds * ds;
        i1 += enlarged - realized;
        i2 += (gamma - call_delta(lam_a, s_a, k)) * ds;

        let (pre, post) = (path.s_pre[b], path.s_post[b]);
        if post != pre {
            let z = post / pre - 1.0;
            i2 += (gamma - call_delta(lam_b, pre, k)) * (post - pre);
            i3 += jump_remainder(lam_b, pre, z, k);
        }
    }

    Ok(Decomposition {
        i1,
        i2,
        i3,
        gamma_n: outcome.gamma_n,
        raw_error: outcome.raw_error,
        kappa: config.kappa,
    })
}
