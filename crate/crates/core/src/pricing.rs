//! Enlarged-volatility Black–Scholes pricing.
//!
//! With `lambda_t = int_t^1 sigmahat^2_u du` the adjusted PDE
//! `C_t + 1/2 sigmahat_t^2 x^2 C_xx = 0`, `C(1, x) = (x - K)_+` becomes plain
//! Black–Scholes in the `lambda` clock, so every Greek here is a function of
//! the remaining enlarged variance rather than of calendar time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{self, SQRT_8_OVER_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleForm {
    /// `sigmahat^2 = rho sqrt(n f'(t))`.
    Simple,
    /// `sigmahat^2 = sigma^2 + rho sqrt(n f'(t))`.
    Classical,
}

/// Enlarged volatility schedule for a revision grid `t_i = 1 - (1 - i/n)^mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolSchedule {
    pub form: ScheduleForm,
    pub n: usize,
    pub mu: f64,
    pub rho: f64,
    /// Only used by [`ScheduleForm::Classical`].
    #[serde(default)]
    pub base_sigma: f64,
}

/// Leland's classical enlargement constant `kappa sigma sqrt(8/pi)` for a
/// constant cost rate.
pub fn leland_rho(sigma: f64, kappa: f64) -> f64 {
    kappa * sigma * SQRT_8_OVER_PI
}

impl VolSchedule {
    pub fn simple(n: usize, mu: f64, rho: f64) -> Result<Self> {
        let s = Self {
            form: ScheduleForm::Simple,
            n,
            mu,
            rho,
            base_sigma: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn classical(n: usize, mu: f64, base_sigma: f64, rho: f64) -> Result<Self> {
        let s = Self {
            form: ScheduleForm::Classical,
            n,
            mu,
            rho,
            base_sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSchedule("n must be >= 1".into()));
        }
        if !(1.0..2.0).contains(&self.mu) {
            return Err(Error::InvalidSchedule(format!(
                "mu must lie in [1, 2), got {}",
                self.mu
            )));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidSchedule(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.base_sigma.is_finite() && self.base_sigma >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "base_sigma must be >= 0, got {}",
                self.base_sigma
            )));
        }
        Ok(())
    }

    /// Same schedule for a different revision count.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }

    /// Convergence exponent `mu / (2 (mu + 1))`.
    pub fn beta(&self) -> f64 {
        self.mu / (2.0 * (self.mu + 1.0))
    }

    /// `lambda_0` of the enlargement part alone: `2 rho sqrt(n mu) / (mu + 1)`.
    pub fn lambda0(&self) -> f64 {
        2.0 * self.rho * (self.n as f64 * self.mu).sqrt() / (self.mu + 1.0)
    }

    fn classical_part(&self) -> f64 {
        match self.form {
            ScheduleForm::Simple => 0.0,
            ScheduleForm::Classical => self.base_sigma * self.base_sigma,
        }
    }

    /// Enlarged variance rate at time `t in [0, 1)`.
    pub fn sigma_hat_sq(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) || (t == 1.0 && self.mu > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_hat_sq needs t in [0, 1), got {t}"
            )));
        }
        let n = self.n as f64;
        let power = (1.0 - self.mu) / (2.0 * self.mu);
        let enlargement = self.rho * (n / self.mu).sqrt() * (1.0 - t).powf(power);
        Ok(self.classical_part() + enlargement)
    }

    /// Remaining enlarged variance `int_t^1 sigmahat^2_u du`.
    #[inline]
    pub fn lambda_at(&self, t: f64) -> f64 {
        let rest = (1.0 - t).clamp(0.0, 1.0);
        let exponent = (self.mu + 1.0) / (2.0 * self.mu);
        self.classical_part() * rest + self.lambda0() * rest.powf(exponent)
    }
}

/// `v(lambda, x) = ln(x/K)/sqrt(lambda) + sqrt(lambda)/2`.
#[inline]
pub fn v_fn(lambda: f64, x: f64, strike: f64) -> f64 {
    let root = lambda.sqrt();
    (x / strike).ln() / root + 0.5 * root
}

/// `q(lambda, x) = ln(x/K)/(2 lambda) - 1/4`.
#[inline]
pub fn q_fn(lambda: f64, x: f64, strike: f64) -> f64 {
    (x / strike).ln() / (2.0 * lambda) - 0.25
}

/// `phi(v(lambda, x))`.
#[inline]
pub fn phi_tilde(lambda: f64, x: f64, strike: f64) -> f64 {
    normal::pdf(v_fn(lambda, x, strike))
}

/// Call price with remaining variance `lambda`; the payoff at `lambda = 0`.
pub fn call_price(lambda: f64, x: f64, strike: f64) -> f64 {
    if lambda <= 0.0 {
        return (x - strike).max(0.0);
    }
    let v = v_fn(lambda, x, strike);
    x * normal::cdf(v) - strike * normal::cdf(v - lambda.sqrt())
}

/// `C_x`; the step `1{x > K}` at `lambda = 0`.
pub fn call_delta(lambda: f64, x: f64, strike: f64) -> f64 {
    if lambda <= 0.0 {
        return if x > strike { 1.0 } else { 0.0 };
    }
    normal::cdf(v_fn(lambda, x, strike))
}

fn require_positive_lambda(lambda: f64, what: &str) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} is undefined at lambda = {lambda}")))
    }
}

/// `C_xx = phi_tilde / (x sqrt(lambda))`.
pub fn call_gamma(lambda: f64, x: f64, strike: f64) -> Result<f64> {
    require_positive_lambda(lambda, "gamma")?;
    Ok(gamma_unchecked(lambda, x, strike))
}

#[inline]
pub(crate) fn gamma_unchecked(lambda: f64, x: f64, strike: f64) -> f64 {
    phi_tilde(lambda, x, strike) / (x * lambda.sqrt())
}

/// `C_xxx = -(phi_tilde / (x^2 lambda)) (3 sqrt(lambda)/2 + ln(x/K)/sqrt(lambda))`.
pub fn call_speed(lambda: f64, x: f64, strike: f64) -> Result<f64> {
    require_positive_lambda(lambda, "speed")?;
    let root = lambda.sqrt();
    let bracket = 1.5 * root + (x / strike).ln() / root;
    Ok(-phi_tilde(lambda, x, strike) / (x * x * lambda) * bracket)
}

/// `C_xt = -1/2 sigmahat_t^2 (2 x C_xx + x^2 C_xxx)`, which simplifies to
/// `sigmahat_t^2 phi_tilde q / sqrt(lambda)`.
pub fn theta_cross(schedule: &VolSchedule, t: f64, x: f64, strike: f64) -> Result<f64> {
    let last_revision = 1.0 - (1.0 / schedule.n as f64).powf(schedule.mu);
    if t > last_revision + 1e-12 || t >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "C_xt requested at t={t}, beyond the last revision date {last_revision}"
        )));
    }
    let rate = schedule.sigma_hat_sq(t)?;
    let lambda = schedule.lambda_at(t);
    require_positive_lambda(lambda, "C_xt")?;
    Ok(rate * phi_tilde(lambda, x, strike) * q_fn(lambda, x, strike) / lambda.sqrt())
}

/// Convexity remainder of a relative jump `z` at spot `x`:
/// `C(x(1+z)) - C(x) - z x C_x(x)`.
pub fn jump_remainder(lambda: f64, x: f64, z: f64, strike: f64) -> f64 {
    call_price(lambda, x * (1.0 + z), strike)
        - call_price(lambda, x, strike)
        - z * x * call_delta(lambda, x, strike)
}
