//! Limit objects of the cost-adjusted hedge: the functions `G` and `Lambda`,
//! the limiting trading volume `Gamma(x, y, rho)`, the correctors, the
//! quantile price and the super-hedging enlargement search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VolFunction;
use crate::normal::{self, SQRT_8_OVER_PI};
use crate::quadrature::{integrate, QuadratureOptions};

/// Samples needed before an empirical quantile price is trusted.
pub const MIN_QUANTILE_SAMPLES: usize = 1000;

/// Relative width at which the super-hedging bisection stops.
pub const SUPERHEDGE_REL_TOL: f64 = 1e-3;

/// `G(a) = E|Z + a| = 2 phi(a) + a (2 Phi(a) - 1)`.
///
/// Evaluated as `|a| + 2 (phi(a) - |a| Phi(-|a|))` so the excess over `|a|`
/// keeps its relative accuracy in the tails.
pub fn g_fn(a: f64) -> f64 {
    let m = a.abs();
    m + excess(m)
}

fn excess(m: f64) -> f64 {
    (2.0 * (normal::pdf(m) - m * normal::cdf(-m))).max(0.0)
}

/// `Lambda(a) = Var|Z + a| = 1 + a^2 - G(a)^2`.
pub fn lambda_fn(a: f64) -> f64 {
    let m = a.abs();
    let d = excess(m);
    1.0 - d * (2.0 * m + d)
}

/// Parameters shared by the limit objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitContext {
    pub strike: f64,
    pub kappa: f64,
    pub rho: f64,
    pub sigma_fn: VolFunction,
}

impl LimitContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be > 0, got {}", self.rho)));
        }
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

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }
}

/// `Gamma(x, y, rho) = x int_0^inf lambda^{-1/2} phi_tilde E|c Z + q| d lambda`
/// with `c = sigma(y) / rho`.
///
/// With `E|cZ + q| = c G(q / c)` and `lambda = u^2` the integrand becomes
/// `2 x c phi(v) G(q / c)` in `u`, which is then integrated in `ln u`. Off the
/// money, the region `u ~ |ln(x/K)|` carries mass `x/2` however close `x` is
/// to `K` (substituting `s = |ln(x/K)| / u` turns it into `int phi(s) ds`), so
/// `Gamma(K+) = Gamma(K-) = Gamma(K) + K/2`; the log scale resolves that
/// region at any distance from the strike. The range is cut where `v >= 12`
/// above and where `|ln(x/K)| / u >= 40` below.
pub fn gamma_limit(x: f64, y: f64, ctx: &LimitContext) -> Result<f64> {
    ctx.validate()?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_limit needs x > 0, got {x}")));
    }
    let c = ctx.sigma_fn.eval(y) / ctx.rho;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma(y)/rho must be > 0, got {c}")));
    }
    let log_m = (x / ctx.strike).ln();
    let upper = (12.0 + (144.0 + 2.0 * log_m.abs()).sqrt()).ln();
    let lower = if log_m == 0.0 {
        (1e-12f64).ln()
    } else {
        (log_m.abs() / 40.0).ln()
    };
    let mut breaks = vec![(2.0 * log_m.abs()).sqrt().ln()];
    if log_m != 0.0 {
        breaks.push(log_m.abs().ln());
    }
    let integrand = |w: f64| {
        let u = w.exp();
        let v = log_m / u + 0.5 * u;
        let density = normal::pdf(v);
        if density == 0.0 {
            return 0.0;
        }
        let q = log_m / (2.0 * u * u) - 0.25;
        2.0 * x * c * density * g_fn(q / c) * u
    };
    let opts = QuadratureOptions {
        abs_tol: 1e-15 * x.max(ctx.strike),
        ..Default::default()
    };
    Ok(integrate(integrand, lower, upper, &breaks, opts)?.value)
}

/// `min(x, K) - kappa Gamma(x, y, rho)`.
pub fn corrector(x: f64, y: f64, ctx: &LimitContext) -> Result<f64> {
    let floor = x.min(ctx.strike);
    if ctx.kappa == 0.0 {
        ctx.validate()?;
        return Ok(floor);
    }
    Ok(floor - ctx.kappa * gamma_limit(x, y, ctx)?)
}

/// One row of the corrector table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub x: f64,
    pub gamma_limit: f64,
    pub corrector: f64,
}

/// `Gamma` and the corrector on `points` equally spaced spots in `[x_min, x_max]`.
pub fn gamma_table(
    x_min: f64,
    x_max: f64,
    points: usize,
    y: f64,
    ctx: &LimitContext,
) -> Result<Vec<GammaRow>> {
    if !(x_min > 0.0 && x_max > x_min && points >= 2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < x_min < x_max and points >= 2, got [{x_min}, {x_max}] with {points}"
        )));
    }
    (0..points)
        .map(|i| {
            let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
            let gamma = gamma_limit(x, y, ctx)?;
            Ok(GammaRow {
                x,
                gamma_limit: gamma,
                corrector: x.min(ctx.strike) - ctx.kappa * gamma,
            })
        })
        .collect()
}

/// `eta = 1 - kappa sigma(y) sqrt(8/pi) / rho`.
pub fn eta(y: f64, ctx: &LimitContext) -> f64 {
    1.0 - ctx.kappa * ctx.sigma_fn.eval(y) * SQRT_8_OVER_PI / ctx.rho
}

/// `p(lambda, x, y) = rho q(lambda, x) / sigma(y)`.
pub fn p_fn(lambda: f64, x: f64, y: f64, ctx: &LimitContext) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("p needs lambda > 0, got {lambda}")));
    }
    let q = crate::pricing::q_fn(lambda, x, ctx.strike);
    Ok(ctx.rho * q / ctx.sigma_fn.eval(y))
}

/// Smallest number `m` of samples with `m / n >= level`, compared in the
/// same floating-point form as the direct definition.
fn required_count(n: usize, level: f64) -> usize {
    let total = n as f64;
    let mut m = (level * total).ceil().clamp(0.0, total) as usize;
    while m > 0 && (m - 1) as f64 / total >= level {
        m -= 1;
    }
    while m < n && (m as f64) / total < level {
        m += 1;
    }
    m
}

/// Empirical quantile price `delta_eps = inf{a > 0 : Upsilon(a) >= 1 - eps}`
/// with `Upsilon(a) = P((1 - kappa) min(S_1, K) > (1 - a) S_0)`.
///
/// `Upsilon` is a step function of `a` jumping at `d_j = 1 - (1 - kappa)
/// min(S_1^j, K) / S_0`, so the infimum is an order statistic of the `d_j`.
/// A result of `0` means every `a > 0` qualifies.
pub fn quantile_price(
    terminal: &[f64],
    kappa: f64,
    s0: f64,
    strike: f64,
    epsilon: f64,
) -> Result<f64> {
    let n = terminal.len();
    if n < MIN_QUANTILE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "quantile price needs at least {MIN_QUANTILE_SAMPLES} samples, got {n}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if epsilon < 1.0 / n as f64 {
        return Err(Error::Resolution {
            epsilon,
            samples: n,
        });
    }
    let mut d: Vec<f64> = terminal
        .iter()
        .map(|&s| 1.0 - (1.0 - kappa) * s.min(strike) / s0)
        .collect();
    d.sort_by(f64::total_cmp);
    let m = required_count(n, 1.0 - epsilon);
    if m == 0 {
        return Ok(0.0);
    }
    Ok(d[m - 1].clamp(0.0, 1.0))
}

/// Outcome of the super-hedging search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperhedgeResult {
    pub rho_star: f64,
    /// The search grid and whether each point super-hedges every sample.
    pub grid: Vec<f64>,
    pub feasible: Vec<bool>,
}

/// The default search grid: 64 log-spaced points on `[0.01, 100] sqrt(8/pi)`.
pub fn default_rho_grid() -> Vec<f64> {
    let (lo, hi) = (0.01f64.ln(), 100f64.ln());
    (0..64)
        .map(|i| (lo + (hi - lo) * i as f64 / 63.0).exp() * SQRT_8_OVER_PI)
        .collect()
}

/// Smallest corrector over the samples, with the sample that attains it.
fn worst_corrector(states: &[(f64, f64)], ctx: &LimitContext) -> Result<(f64, usize)> {
    let mut worst = (f64::INFINITY, 0);
    for (j, &(x, y)) in states.iter().enumerate() {
        let value = corrector(x, y, ctx)?;
        if value < worst.0 {
            worst = (value, j);
        }
    }
    Ok(worst)
}

/// Smallest `rho` on `grid` (refined by bisection) whose corrector
/// `min(x, K) - kappa Gamma(x, y, rho)` is nonnegative on every `(S_1, y_1)`
/// sample.
pub fn superhedge_rho(
    states: &[(f64, f64)],
    ctx: &LimitContext,
    grid: &[f64],
) -> Result<SuperhedgeResult> {
    if states.is_empty() || grid.is_empty() {
        return Err(Error::InvalidArgument("superhedge needs samples and a grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("rho grid must be increasing".into()));
    }
    let feasible_at = |rho: f64| -> Result<bool> {
        Ok(worst_corrector(states, &ctx.with_rho(rho))?.0 >= 0.0)
    };
    let feasible = grid.iter().map(|&r| feasible_at(r)).collect::<Result<Vec<_>>>()?;
    let Some(first) = feasible.iter().position(|&ok| ok) else {
        let top = *grid.last().expect("grid is not empty");
        let (value, j) = worst_corrector(states, &ctx.with_rho(top))?;
        return Err(Error::NoSuperhedge {
            rho_max: top,
            x: states[j].0,
            y: states[j].1,
            corrector: value,
        });
    };
    if first == 0 {
        return Ok(SuperhedgeResult {
            rho_star: grid[0],
            grid: grid.to_vec(),
            feasible,
        });
    }
    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    while (hi - lo) > SUPERHEDGE_REL_TOL * hi {
        let mid = (lo * hi).sqrt();
        if feasible_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SuperhedgeResult {
        rho_star: hi,
        grid: grid.to_vec(),
        feasible,
    })
}

/// Revision-grid quantities used in the asymptotic analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostics {
    pub n: usize,
    pub mu: f64,
    pub rho: f64,
    /// `lambda_j = lambda_0 (1 - t_j)^{(mu+1)/(2 mu)}`, `j = 0..n`.
    pub lambda: Vec<f64>,
    /// `lambda_{j-1} - lambda_j`, `j = 1..n`.
    pub delta_lambda: Vec<f64>,
    pub m1: usize,
    pub m2: usize,
    /// `ln^{-3} n`.
    pub l_star: f64,
    /// `ln^3 n`.
    pub l_star_upper: f64,
    /// True when `m1`/`m2` had to be clamped into `[1, n]`, i.e. `n` is too
    /// small for the truncation indices to mean anything.
    pub clamped: bool,
}

impl GridDiagnostics {
    /// `max_j |Delta lambda_j / sqrt(Delta t_j) - rho| / rho` over
    /// `j = 1..n-1` (the last step is excluded: there `lambda` hits zero).
    pub fn max_interior_ratio_deviation(&self) -> f64 {
        let dates: Vec<f64> = (0..=self.n)
            .map(|i| 1.0 - (1.0 - i as f64 / self.n as f64).powf(self.mu))
            .collect();
        (1..self.n)
            .map(|j| {
                let ratio = self.delta_lambda[j - 1] / (dates[j] - dates[j - 1]).sqrt();
                (ratio - self.rho).abs() / self.rho
            })
            .fold(0.0, f64::max)
    }
}

pub fn grid_diagnostics(n: usize, mu: f64, rho: f64) -> Result<GridDiagnostics> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!("grid diagnostics need n >= 16, got {n}")));
    }
    let schedule = crate::pricing::VolSchedule::simple(n, mu, rho)?;
    let lambda0 = schedule.lambda0();
    let exponent = (mu + 1.0) / (2.0 * mu);
    let lambda: Vec<f64> = (0..=n)
        .map(|j| lambda0 * ((1.0 - j as f64 / n as f64).powf(mu)).powf(exponent))
        .collect();
    let delta_lambda: Vec<f64> = lambda.windows(2).map(|w| w[0] - w[1]).collect();
    let log_n = (n as f64).ln();
    let l_star = log_n.powi(-3);
    let l_star_upper = log_n.powi(3);
    let index = |level: f64| -> (usize, bool) {
        let raw = n as f64 - (n as f64 * (level / lambda0).powf(2.0 / (mu + 1.0))).floor();
        let clamped = raw.clamp(1.0, n as f64);
        (clamped as usize, clamped != raw)
    };
    let (m1, c1) = index(l_star_upper);
    let (m2, c2) = index(l_star);
    Ok(GridDiagnostics {
        n,
        mu,
        rho,
        lambda,
        delta_lambda,
        m1,
        m2,
        l_star,
        l_star_upper,
        clamped: c1 || c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unit_vol() -> VolFunction {
        VolFunction::Constant { sigma: 1.0 }
    }

    fn ctx(kappa: f64, rho: f64) -> LimitContext {
        LimitContext {
            strike: 1.0,
            kappa,
            rho,
            sigma_fn: unit_vol(),
        }
    }

    #[test]
    fn g_and_lambda_at_zero() {
        assert!((g_fn(0.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((lambda_fn(0.0) - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-15);
        assert!((g_fn(0.0) - 0.79788).abs() < 1e-5);
        assert!((lambda_fn(0.0) - 0.36338).abs() < 1e-5);
    }

    #[test]
    fn g_at_one_matches_monte_carlo() {
        let mut rng = crate::rng::substream(2024, 0, 0);
        let samples = 10_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let z: f64 = rng.sample(StandardNormal);
            let v = (z + 1.0).abs();
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let stderr = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((g_fn(1.0) - mean).abs() < 4.0 * stderr, "{} vs {mean}", g_fn(1.0));
        assert!((g_fn(1.0) - 1.16664).abs() < 1e-5);
    }

    #[test]
    fn g_symmetry_and_tail() {
        for a in [0.3, 1.7, 4.0] {
            assert_eq!(g_fn(a), g_fn(-a));
        }
        assert!(g_fn(8.0) - 8.0 < 1e-13);
        assert!(g_fn(8.0) - 8.0 >= 0.0);
    }

    proptest! {
        #[test]
        fn g_lower_bounds(a in -50.0f64..50.0) {
            let g = g_fn(a);
            prop_assert!(g >= (2.0 / std::f64::consts::PI).sqrt() - 1e-15);
            prop_assert!(g >= a.abs());
        }

        #[test]
        fn lambda_is_a_proper_variance(a in -8.0f64..8.0) {
            let l = lambda_fn(a);
            prop_assert!(l > 0.0 && l < 1.0);
        }

        #[test]
        fn p_is_scaled_q(lam in 0.01f64..50.0, x in 0.1f64..10.0, y in -2.0f64..2.0) {
            let c = LimitContext {
                strike: 1.3,
                kappa: 0.01,
                rho: 0.8,
                sigma_fn: VolFunction::Exponential { scale: 2.0, floor: 1.0 },
            };
            let p = p_fn(lam, x, y, &c).unwrap();
            let q = crate::pricing::q_fn(lam, x, 1.3);
            prop_assert!((p - 0.8 * q / c.sigma_fn.eval(y)).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn p_examples() {
        let c = ctx(0.0, 2.0);
        assert!((p_fn(3.0, 1.0, 0.0, &c).unwrap() + 2.0 / 4.0).abs() < 1e-15);
        let same = ctx(0.0, 1.0);
        let q = crate::pricing::q_fn(0.7, 1.4, 1.0);
        assert!((p_fn(0.7, 1.4, 0.0, &same).unwrap() - q).abs() < 1e-15);
        assert!(p_fn(0.0, 1.0, 0.0, &c).is_err());
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(0.0, &ctx(0.0, 1.0)), 1.0);
        assert!((eta(0.0, &ctx(0.001, SQRT_8_OVER_PI)) - 0.999).abs() < 1e-15);
        assert!(eta(0.0, &ctx(0.2, 0.5)) < 1.0);
    }

    #[test]
    fn gamma_decreases_in_rho() {
        for x in [0.5, 1.0, 2.0] {
            let mut prev = f64::INFINITY;
            for rho in [0.2, 0.5, 1.0, 2.0, 5.0] {
                let g = gamma_limit(x, 0.0, &ctx(0.01, rho)).unwrap();
                assert!(g > 0.0 && g < prev, "x={x} rho={rho}: {g} vs {prev}");
                prev = g;
            }
        }
    }

    #[test]
    fn gamma_vanishes_deep_out_of_the_money() {
        // x phi(v) = K phi(v - sqrt(lambda)) and |v - sqrt(lambda)| >= sqrt(2 |ln(x/K)|),
        // so Gamma shrinks like x times a power of ln(1/x)
        let c = ctx(0.01, SQRT_8_OVER_PI);
        let mut prev = f64::INFINITY;
        for x in [1e-3, 1e-6, 1e-9, 1e-12] {
            let g = gamma_limit(x, 0.0, &c).unwrap();
            assert!(g > 0.0 && g < 2.0 * x, "x={x}: {g}");
            assert!(g < prev);
            prev = g;
        }
        assert!(gamma_limit(0.0, 0.0, &ctx(0.01, 1.0)).is_err());
    }

    #[test]
    fn gamma_with_equal_vol_and_rho_has_closed_form_at_the_money() {
        // c = 1 and x = K: integrand 2 phi(u/2) G(-1/4) in u, so
        // Gamma = 2 G(1/4) * int_0^inf phi(u/2) du = 2 G(1/4).
        let g = gamma_limit(1.0, 0.0, &ctx(0.01, 1.0)).unwrap();
        assert!((g - 2.0 * g_fn(0.25)).abs() < 1e-12, "{g}");
    }

    #[test]
    fn corrector_examples() {
        assert_eq!(corrector(0.7, 0.0, &ctx(0.0, 1.0)).unwrap(), 0.7);
        assert_eq!(corrector(1.7, 0.0, &ctx(0.0, 1.0)).unwrap(), 1.0);
        let c = ctx(0.01, SQRT_8_OVER_PI);
        // the one-sided values close in like sqrt(|x - K|); one ulp apart they agree
        let gap = |d: f64| {
            let left = corrector(1.0 - d, 0.0, &c).unwrap();
            let right = corrector(1.0 + d, 0.0, &c).unwrap();
            (left - right).abs()
        };
        let (wide, narrow, ulp) = (gap(1e-6), gap(1e-10), gap(f64::EPSILON));
        assert!(narrow < wide && ulp < narrow, "{wide} {narrow} {ulp}");
        assert!(ulp < 1e-10, "{ulp}");
    }

    #[test]
    fn one_sided_limits_at_the_strike_carry_half_the_strike() {
        let c = ctx(0.01, SQRT_8_OVER_PI);
        let at = gamma_limit(1.0, 0.0, &c).unwrap();
        for (x, tol) in [(1.0 - 1e-13, 1e-6), (1.0 + 1e-13, 1e-6), (1.0 + 1e-9, 1e-4)] {
            let near = gamma_limit(x, 0.0, &c).unwrap();
            assert!((near - at - 0.5).abs() < tol, "x={x}: {near} vs {at}");
        }
    }

    #[test]
    fn corrector_table_peaks_near_strike() {
        let c = LimitContext {
            strike: 5.0,
            kappa: 0.05,
            rho: SQRT_8_OVER_PI,
            sigma_fn: VolFunction::Exponential {
                scale: 2.0,
                floor: 1.0,
            },
        };
        let rows = gamma_table(0.1, 15.0, 150, 0.0, &c).unwrap();
        let best = rows
            .iter()
            .max_by(|a, b| a.corrector.total_cmp(&b.corrector))
            .unwrap();
        assert!((best.x - 5.0).abs() < 1.0, "peak at {}", best.x);
        assert!(rows.iter().all(|r| r.gamma_limit > 0.0 && r.corrector <= r.x.min(5.0)));
    }

    fn direct_quantile(d_sorted: &[f64], terminal: &[f64], kappa: f64, eps: f64) -> f64 {
        // scan candidates a in the sample's jump points and return the first
        // whose right limit satisfies Upsilon >= 1 - eps
        let n = terminal.len() as f64;
        let upsilon = |a: f64| {
            terminal
                .iter()
                .filter(|&&s| (1.0 - kappa) * s.min(1.0) > 1.0 - a)
                .count() as f64
                / n
        };
        for &cand in std::iter::once(&0.0).chain(d_sorted) {
            let a = cand.max(0.0);
            let right = a + 1e-9;
            if upsilon(right) >= 1.0 - eps {
                return a;
            }
        }
        1.0
    }

    #[test]
    fn quantile_inverts_the_empirical_distribution() {
        let mut rng = crate::rng::substream(99, 0, 0);
        for trial in 0..5 {
            let terminal: Vec<f64> = (0..1000)
                .map(|_| (0.3 * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect();
            let kappa = 0.01 * trial as f64;
            let mut d: Vec<f64> = terminal.iter().map(|&s| 1.0 - (1.0 - kappa) * s.min(1.0)).collect();
            d.sort_by(f64::total_cmp);
            for eps in [0.001, 0.01, 0.05, 0.3, 0.9] {
                let got = quantile_price(&terminal, kappa, 1.0, 1.0, eps).unwrap();
                let expect = direct_quantile(&d, &terminal, kappa, eps);
                assert!((got - expect).abs() < 1e-12, "eps={eps}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn quantile_edge_cases() {
        let high = vec![1.5; 1000];
        for eps in [0.01, 0.5] {
            assert_eq!(quantile_price(&high, 0.0, 1.0, 1.0, eps).unwrap(), 0.0);
        }
        let spread: Vec<f64> = (0..1000).map(|i| 0.5 + i as f64 / 1000.0).collect();
        assert!(quantile_price(&spread, 0.0, 1.0, 1.0, 0.999).unwrap() < 0.01);
        assert!(matches!(
            quantile_price(&spread, 0.0, 1.0, 1.0, 1e-4),
            Err(Error::Resolution { .. })
        ));
        assert!(quantile_price(&spread[..10], 0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn superhedge_without_costs_takes_the_smallest_rho() {
        let grid = default_rho_grid();
        let states = vec![(0.5, 0.0), (1.0, 0.0), (2.0, 0.0)];
        let r = superhedge_rho(&states, &ctx(0.0, 1.0), &grid).unwrap();
        assert_eq!(r.rho_star, grid[0]);
    }

    #[test]
    fn superhedge_feasibility_is_monotone() {
        let grid = default_rho_grid();
        let states = vec![(0.6, 0.0), (1.0, 0.3), (1.8, -0.5)];
        let c = LimitContext {
            strike: 1.0,
            kappa: 0.05,
            rho: 1.0,
            sigma_fn: VolFunction::Exponential {
                scale: 2.0,
                floor: 1.0,
            },
        };
        let r = superhedge_rho(&states, &c, &grid).unwrap();
        let first = r.feasible.iter().position(|&f| f).unwrap();
        assert!(r.feasible[first..].iter().all(|&f| f));
        assert!(first > 0);
        assert!(r.rho_star <= grid[first] && r.rho_star > grid[first - 1]);
        let (worst, _) = worst_corrector(&states, &c.with_rho(r.rho_star)).unwrap();
        assert!(worst >= 0.0);
        let (below, _) = worst_corrector(&states, &c.with_rho(r.rho_star * (1.0 - 2e-3))).unwrap();
        assert!(below < 0.0);
    }

    #[test]
    fn superhedge_reports_worst_sample() {
        let states = vec![(1.0, 0.0)];
        let err = superhedge_rho(&states, &ctx(0.9, 1.0), &[0.01, 0.02]).unwrap_err();
        assert!(matches!(err, Error::NoSuperhedge { x, .. } if x == 1.0));
    }

    #[test]
    fn grid_diagnostics_uniform_case() {
        let d = grid_diagnostics(100, 1.0, 1.0).unwrap();
        for (j, &l) in d.lambda.iter().enumerate() {
            assert!((l - 10.0 * (1.0 - j as f64 / 100.0)).abs() < 1e-12);
        }
        assert!(d.max_interior_ratio_deviation() < 1e-12);
        let total: f64 = d.delta_lambda.iter().sum();
        assert!((total - d.lambda[0]).abs() < 1e-12);
        assert!(d.m1 <= d.m2 && d.m1 >= 1 && d.m2 <= 100);
        assert!(grid_diagnostics(8, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_ratio_approaches_rho() {
        for mu in [1.0, 1.5] {
            let d = grid_diagnostics(1 << 14, mu, 0.7).unwrap();
            assert!(d.max_interior_ratio_deviation() <= 0.01);
            let total: f64 = d.delta_lambda.iter().sum();
            assert!((total - d.lambda[0]).abs() < 1e-9 * d.lambda[0]);
            assert!(d.lambda.windows(2).all(|w| w[1] < w[0]));
        }
        let big = grid_diagnostics(1 << 20, 1.5, 1.0).unwrap();
        assert!(big.max_interior_ratio_deviation() <= 0.01);
    }
}
