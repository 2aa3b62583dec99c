//! Jump-diffusion stochastic-volatility dynamics and path simulation.
//!
//! The price follows
//!
//! ```text
//! dS_t = S_{t-} (b dt + sigma(y_t) dW1_t + dzeta_t),
//! dy_t = alpha1(t, y_t) dt + alpha2(t, y_t) dW2_t + dzeta^y_t,
//! ```
//!
//! with compound Poisson jump parts. The drift `b` is always the compensator
//! `-theta E[xi]` of the price jumps, so `S` is a martingale whenever `sigma`
//! is bounded.
//!
//! Paths are simulated on the union of the revision dates, a uniform set of
//! substeps inside each revision interval and the drawn jump times. Between
//! nodes `y` moves by Euler–Maruyama and `log S` by the exact Gaussian step
//! with `sigma` frozen at the left node; jumps are applied at their node, so
//! every node carries a left limit (`*_pre`) and a value (`*_post`).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::{substream, PathRng};

/// Price-jump configurations whose rejection probability for `xi <= -1`
/// exceeds this are refused.
pub const MAX_REJECTION_RATE: f64 = 1e-3;

const MAX_RESAMPLE_ATTEMPTS: u32 = 16;

/// Law of a single jump size `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSize {
    /// `xi ~ N(mean, std^2)`.
    Normal { mean: f64, std: f64 },
    /// `1 + xi = e^Z`, `Z ~ N(mean, std^2)`.
    LogNormalFactor { mean: f64, std: f64 },
    PointMass { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpSize {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpSize::Normal { mean, std } | JumpSize::LogNormalFactor { mean, std } => {
                mean.is_finite() && std.is_finite() && std >= 0.0
            }
            JumpSize::PointMass { value } => value.is_finite(),
            JumpSize::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad jump-size parameters {self:?}")))
        }
    }

    /// Probability that a raw draw violates `xi > -1` and must be redrawn
    /// when the jump hits the price.
    pub fn rejection_probability(&self) -> f64 {
        match *self {
            JumpSize::Normal { mean, std } => {
                if std == 0.0 {
                    if mean <= -1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal::cdf((-1.0 - mean) / std)
                }
            }
            JumpSize::LogNormalFactor { .. } => 0.0,
            JumpSize::PointMass { value } => {
                if value <= -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            JumpSize::Uniform { low, high } => ((-1.0 - low) / (high - low)).clamp(0.0, 1.0),
        }
    }

    /// Unconditional mean of a raw draw (used for volatility jumps).
    pub fn mean(&self) -> f64 {
        match *self {
            JumpSize::Normal { mean, .. } => mean,
            JumpSize::LogNormalFactor { mean, std } => (mean + 0.5 * std * std).exp_m1(),
            JumpSize::PointMass { value } => value,
            JumpSize::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// Mean of a price jump, i.e. conditional on `xi > -1`.
    pub fn price_mean(&self) -> f64 {
        match *self {
            JumpSize::Normal { mean, std } if std > 0.0 => {
                let alpha = (-1.0 - mean) / std;
                let survival = normal::cdf(-alpha);
                mean + std * normal::pdf(alpha) / survival
            }
            JumpSize::Uniform { low, high } => 0.5 * (low.max(-1.0) + high),
            _ => self.mean(),
        }
    }

    /// Whether `E xi^2 < inf` and `E (1 + xi)^{-1} < inf` hold for the
    /// price-jump law. A normal law truncated at -1 keeps a positive density
    /// at the boundary, so the inverse moment diverges (logarithmically).
    pub fn satisfies_moment_condition(&self) -> bool {
        match *self {
            JumpSize::Normal { mean, std } => std == 0.0 && mean > -1.0,
            JumpSize::LogNormalFactor { .. } => true,
            JumpSize::PointMass { value } => value > -1.0,
            JumpSize::Uniform { low, .. } => low > -1.0,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpSize::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            JumpSize::LogNormalFactor { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean + std * z).exp_m1()
            }
            JumpSize::PointMass { value } => value,
            JumpSize::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpTarget {
    Price,
    Volatility,
    /// One common jump moving both coordinates (SVCJ-type).
    Both,
}

impl JumpTarget {
    pub fn hits_price(self) -> bool {
        matches!(self, JumpTarget::Price | JumpTarget::Both)
    }

    pub fn hits_volatility(self) -> bool {
        matches!(self, JumpTarget::Volatility | JumpTarget::Both)
    }
}

/// A compound Poisson jump source. Price jumps are relative (`S -> S (1+xi)`),
/// volatility jumps are additive on the state `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpChannel {
    pub intensity: f64,
    pub size: JumpSize,
    pub applies_to: JumpTarget,
}

impl JumpChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "jump intensity must be finite and >= 0, got {}",
                self.intensity
            )));
        }
        self.size.validate()?;
        if self.applies_to.hits_price() && self.intensity > 0.0 {
            let p = self.size.rejection_probability();
            if p >= MAX_REJECTION_RATE {
                return Err(Error::InvalidModel(format!(
                    "price jumps {:?} fall at or below -1 with probability {p:.3e} (limit {MAX_REJECTION_RATE:e})",
                    self.size
                )));
            }
        }
        Ok(())
    }

    /// Draws one size; price-hitting channels redraw until `xi > -1`.
    /// Returns the size and the number of rejected draws.
    pub fn draw_size<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u32) {
        let mut rejected = 0;
        loop {
            let xi = self.size.draw(rng);
            if !self.applies_to.hits_price() || xi > -1.0 {
                return (xi, rejected);
            }
            rejected += 1;
        }
    }
}

/// Drift rate `b = -theta E[xi]` that compensates a price-jump channel.
pub fn drift_compensator(channel: &JumpChannel) -> Result<f64> {
    if !channel.applies_to.hits_price() {
        return Err(Error::InvalidArgument(
            "drift compensator requested for a channel that does not move the price".into(),
        ));
    }
    channel.validate()?;
    if channel.intensity == 0.0 {
        return Ok(0.0);
    }
    Ok(-channel.intensity * channel.size.price_mean())
}

/// Arrival times of a homogeneous Poisson process on `(0, horizon)`.
pub fn sample_jump_times<R: Rng + ?Sized>(intensity: f64, horizon: f64, rng: &mut R) -> Vec<f64> {
    let mut times = Vec::new();
    if intensity <= 0.0 || horizon <= 0.0 {
        return times;
    }
    let mut t = 0.0;
    loop {
        // 1 - U lies in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        t += -u.ln() / intensity;
        if t >= horizon {
            return times;
        }
        if t > 0.0 {
            times.push(t);
        }
    }
}

/// Volatility as a function of the state `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolFunction {
    /// `scale * e^y + floor` (Hull–White type).
    Exponential { scale: f64, floor: f64 },
    /// `sqrt(max(y, floor))` (Heston/Bates type).
    Sqrt { floor: f64 },
    Constant { sigma: f64 },
}

impl VolFunction {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            VolFunction::Exponential { scale, floor } => scale * y.exp() + floor,
            VolFunction::Sqrt { floor } => y.max(floor).sqrt(),
            VolFunction::Constant { sigma } => sigma,
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match *self {
            VolFunction::Exponential { scale, floor } => {
                if scale >= 0.0 {
                    floor
                } else {
                    f64::NEG_INFINITY
                }
            }
            VolFunction::Sqrt { floor } => floor.max(0.0).sqrt(),
            VolFunction::Constant { sigma } => sigma,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, VolFunction::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            VolFunction::Exponential { scale, floor } => scale.is_finite() && floor.is_finite(),
            VolFunction::Sqrt { floor } => floor.is_finite(),
            VolFunction::Constant { sigma } => sigma.is_finite(),
        };
        let min = self.lower_bound();
        if !finite || min <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "volatility function {self:?} must be bounded below by a positive constant"
            )));
        }
        Ok(())
    }
}

/// Diffusive part of the volatility state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolDynamics {
    None,
    /// `dy = speed (mean - y) dt + vol dW`.
    OrnsteinUhlenbeck {
        mean: f64,
        vol: f64,
        #[serde(default = "unit_speed")]
        speed: f64,
    },
    /// `dy = speed (mean - y) dt + vol sqrt(y) dW` with full truncation.
    Cir { speed: f64, mean: f64, vol: f64 },
}

fn unit_speed() -> f64 {
    1.0
}

impl VolDynamics {
    #[inline]
    fn coefficients(&self, y: f64) -> (f64, f64) {
        match *self {
            VolDynamics::None => (0.0, 0.0),
            VolDynamics::OrnsteinUhlenbeck { mean, vol, speed } => (speed * (mean - y), vol),
            VolDynamics::Cir { speed, mean, vol } => {
                let y_plus = y.max(0.0);
                (speed * (mean - y_plus), vol * y_plus.sqrt())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            VolDynamics::None => true,
            VolDynamics::OrnsteinUhlenbeck { mean, vol, speed } => {
                mean.is_finite() && vol.is_finite() && speed.is_finite()
            }
            VolDynamics::Cir { speed, mean, vol } => {
                mean.is_finite() && vol.is_finite() && speed.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("non-finite volatility dynamics {self:?}")))
        }
    }
}

/// Model taxonomy by where the jumps act.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelClass {
    /// No jumps.
    Sv,
    /// Jumps in volatility only.
    Svjv,
    /// Jumps in price only.
    Svjp,
    /// Common jumps in price and volatility.
    Svcj,
    /// Separate (possibly several) jump sources in both coordinates.
    Svjj,
}

/// Full description of the `(S, y)` dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub s0: f64,
    pub sigma_fn: VolFunction,
    pub vol_sde: VolDynamics,
    #[serde(default)]
    pub jump_channels: Vec<JumpChannel>,
    #[serde(default)]
    pub brownian_corr: f64,
    #[serde(default)]
    pub y0_init: f64,
}

impl ModelSpec {
    /// Constant-volatility jump-diffusion (Merton-type when the sizes are
    /// log-normal factors).
    pub fn constant_vol(s0: f64, sigma: f64, jumps: Vec<JumpChannel>) -> Self {
        Self {
            s0,
            sigma_fn: VolFunction::Constant { sigma },
            vol_sde: VolDynamics::None,
            jump_channels: jumps,
            brownian_corr: 0.0,
            y0_init: 0.0,
        }
    }

    /// Hull–White-type model with Gaussian price jumps: OU state with
    /// `a = -1`, `b = 0.2`, `sigma(y) = 2 e^y + 1`, `theta = 3`,
    /// `xi ~ N(0, 0.2^2)`, `S_0 = 1`.
    pub fn hull_white_jumps(y0_init: f64) -> Self {
        Self {
            s0: 1.0,
            sigma_fn: VolFunction::Exponential {
                scale: 2.0,
                floor: 1.0,
            },
            vol_sde: VolDynamics::OrnsteinUhlenbeck {
                mean: -1.0,
                vol: 0.2,
                speed: 1.0,
            },
            jump_channels: vec![JumpChannel {
                intensity: 3.0,
                size: JumpSize::Normal {
                    mean: 0.0,
                    std: 0.2,
                },
                applies_to: JumpTarget::Price,
            }],
            brownian_corr: 0.0,
            y0_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::InvalidModel(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(-1.0..=1.0).contains(&self.brownian_corr) {
            return Err(Error::InvalidModel(format!(
                "brownian_corr must lie in [-1, 1], got {}",
                self.brownian_corr
            )));
        }
        if !self.y0_init.is_finite() {
            return Err(Error::InvalidModel("y0_init must be finite".into()));
        }
        self.sigma_fn.validate()?;
        self.vol_sde.validate()?;
        for channel in &self.jump_channels {
            channel.validate()?;
        }
        Ok(())
    }

    /// Martingale drift of the price: sum of the compensators of all
    /// price-hitting channels.
    pub fn drift(&self) -> f64 {
        self.jump_channels
            .iter()
            .filter(|c| c.applies_to.hits_price() && c.intensity > 0.0)
            .map(|c| -c.intensity * c.size.price_mean())
            .sum()
    }

    pub fn class(&self) -> ModelClass {
        let active = || self.jump_channels.iter().filter(|c| c.intensity > 0.0);
        let price = active().any(|c| c.applies_to == JumpTarget::Price);
        let vol = active().any(|c| c.applies_to == JumpTarget::Volatility);
        let both = active().any(|c| c.applies_to == JumpTarget::Both);
        match (price, vol, both) {
            (false, false, false) => ModelClass::Sv,
            (false, true, false) => ModelClass::Svjv,
            (true, false, false) => ModelClass::Svjp,
            (false, false, true) => ModelClass::Svcj,
            _ => ModelClass::Svjj,
        }
    }

    pub fn has_price_jumps(&self) -> bool {
        self.jump_channels
            .iter()
            .any(|c| c.applies_to.hits_price() && c.intensity > 0.0)
    }
}

/// A drawn jump, before it is attached to a path node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: usize,
    pub size: f64,
}

/// A jump recorded on a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpMark {
    pub node: usize,
    pub channel: usize,
    pub size: f64,
}

/// One simulated trajectory on the merged time grid.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub times: Vec<f64>,
    pub s_pre: Vec<f64>,
    pub s_post: Vec<f64>,
    pub y_pre: Vec<f64>,
    pub y_post: Vec<f64>,
    /// `sigma(y_post[k])`, the volatility used on `(t_k, t_{k+1}]`.
    pub sigma: Vec<f64>,
    /// Whether node `k` is a revision date or substep (as opposed to a node
    /// inserted only for a jump).
    pub on_base: Vec<bool>,
    /// Node index of each revision date `t_0 .. t_n`.
    pub revision_nodes: Vec<usize>,
    pub substeps: usize,
    pub jump_marks: Vec<JumpMark>,
    /// Raw price-jump draws discarded because they were `<= -1`.
    pub rejected_jumps: u32,
}

impl SimulatedPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_s(&self) -> f64 {
        *self.s_post.last().expect("paths have at least two nodes")
    }

    pub fn terminal_y(&self) -> f64 {
        *self.y_post.last().expect("paths have at least two nodes")
    }

    /// Number of revision intervals the path was built for.
    pub fn revisions(&self) -> usize {
        self.revision_nodes.len() - 1
    }

    pub fn revision_dates(&self) -> Vec<f64> {
        self.revision_nodes.iter().map(|&k| self.times[k]).collect()
    }

    /// Left limit `S_{t-}` at a grid time, `None` if `t` is not a node.
    pub fn left_limit(&self, t: f64) -> Option<f64> {
        self.times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .ok()
            .map(|k| self.s_pre[k])
    }
}

/// Source of the Brownian increments `(dW1, dW2)` over a step of length `dt`.
pub trait BrownianSource {
    fn increments(&mut self, dt: f64) -> (f64, f64);
}

/// Correlated Gaussian increments drawn from an RNG.
pub struct GaussianIncrements<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
    corr: f64,
    complement: f64,
}

impl<'a, R: Rng + ?Sized> GaussianIncrements<'a, R> {
    pub fn new(rng: &'a mut R, corr: f64) -> Self {
        Self {
            rng,
            corr,
            complement: (1.0 - corr * corr).max(0.0).sqrt(),
        }
    }
}

impl<R: Rng + ?Sized> BrownianSource for GaussianIncrements<'_, R> {
    #[inline]
    fn increments(&mut self, dt: f64) -> (f64, f64) {
        let z1: f64 = StandardNormal.sample(self.rng);
        let z2: f64 = StandardNormal.sample(self.rng);
        let h = dt.sqrt();
        (h * z1, h * (self.corr * z1 + self.complement * z2))
    }
}

/// Draws all jump events of the model on `(0, 1)`, sorted by time (ties
/// keep channel order). Also returns the number of rejected price draws.
pub fn draw_jump_events<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> (Vec<JumpEvent>, u32) {
    let mut events = Vec::new();
    let mut rejected = 0;
    for (channel, spec) in model.jump_channels.iter().enumerate() {
        for time in sample_jump_times(spec.intensity, 1.0, rng) {
            let (size, r) = spec.draw_size(rng);
            rejected += r;
            events.push(JumpEvent { time, channel, size });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.channel.cmp(&b.channel)));
    (events, rejected)
}

fn validate_dates(dates: &[f64]) -> Result<()> {
    if dates.len() < 2 || dates[0] != 0.0 || *dates.last().unwrap() != 1.0 {
        return Err(Error::GridMismatch(
            "revision dates must start at 0 and end at 1".into(),
        ));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("revision dates must be strictly increasing".into()));
    }
    Ok(())
}

/// Simulates one path with externally supplied jumps and Brownian noise.
pub fn simulate_path_with<B: BrownianSource + ?Sized>(
    model: &ModelSpec,
    revision_dates: &[f64],
    substeps: usize,
    jumps: &[JumpEvent],
    noise: &mut B,
) -> Result<SimulatedPath> {
    validate_dates(revision_dates)?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps_per_interval must be >= 1".into()));
    }
    let n = revision_dates.len() - 1;
    let capacity = n * substeps + 1 + jumps.len();
    let mut times = Vec::with_capacity(capacity);
    let mut on_base = Vec::with_capacity(capacity);
    let mut revision_nodes = Vec::with_capacity(n + 1);
    let mut marks = Vec::with_capacity(jumps.len());

    let mut pending = jumps.iter().peekable();
    let mut push_jumps_before = |limit: f64,
                                 times: &mut Vec<f64>,
                                 on_base: &mut Vec<bool>,
                                 marks: &mut Vec<JumpMark>| {
        while let Some(ev) = pending.peek() {
            if ev.time > limit {
                break;
            }
            if ev.time <= 0.0 || ev.time >= 1.0 {
                pending.next();
                continue;
            }
            // a jump landing exactly on a base node is attached to that node
            if ev.time < limit && times.last().is_none_or(|&last| ev.time > last) {
                times.push(ev.time);
                on_base.push(false);
            }
            let node = if ev.time == limit { times.len() } else { times.len() - 1 };
            marks.push(JumpMark {
                node,
                channel: ev.channel,
                size: ev.size,
            });
            pending.next();
        }
    };

    for i in 0..n {
        let (a, b) = (revision_dates[i], revision_dates[i + 1]);
        for j in 0..substeps {
            let t = if j == 0 {
                a
            } else {
                a + (b - a) * j as f64 / substeps as f64
            };
            push_jumps_before(t, &mut times, &mut on_base, &mut marks);
            if j == 0 {
                revision_nodes.push(times.len());
            }
            times.push(t);
            on_base.push(true);
        }
    }
    push_jumps_before(1.0, &mut times, &mut on_base, &mut marks);
    revision_nodes.push(times.len());
    times.push(1.0);
    on_base.push(true);

    let len = times.len();
    let mut s_pre = vec![0.0; len];
    let mut s_post = vec![0.0; len];
    let mut y_pre = vec![0.0; len];
    let mut y_post = vec![0.0; len];
    let mut sigma = vec![0.0; len];

    let drift = model.drift();
    s_pre[0] = model.s0;
    s_post[0] = model.s0;
    y_pre[0] = model.y0_init;
    y_post[0] = model.y0_init;
    sigma[0] = model.sigma_fn.eval(model.y0_init);

    let mut next_mark = 0;
    let mut s = model.s0;
    let mut y = model.y0_init;
    for k in 1..len {
        let dt = times[k] - times[k - 1];
        let vol = sigma[k - 1];
        let (dw1, dw2) = noise.increments(dt);
        let (a1, a2) = model.vol_sde.coefficients(y);
        s *= ((drift - 0.5 * vol * vol) * dt + vol * dw1).exp();
        y += a1 * dt + a2 * dw2;
        s_pre[k] = s;
        y_pre[k] = y;
        while next_mark < marks.len() && marks[next_mark].node == k {
            let mark = marks[next_mark];
            let target = model.jump_channels[mark.channel].applies_to;
            if target.hits_price() {
                s *= 1.0 + mark.size;
            }
            if target.hits_volatility() {
                y += mark.size;
            }
            next_mark += 1;
        }
        s_post[k] = s;
        y_post[k] = y;
        sigma[k] = model.sigma_fn.eval(y);
        if !(s_post[k].is_finite() && s_post[k] > 0.0 && y.is_finite() && sigma[k].is_finite()) {
            return Err(Error::NonFinite {
                path: 0,
                time: times[k],
            });
        }
    }

    Ok(SimulatedPath {
        times,
        s_pre,
        s_post,
        y_pre,
        y_post,
        sigma,
        on_base,
        revision_nodes,
        substeps,
        jump_marks: marks,
        rejected_jumps: 0,
    })
}

/// Simulates one path, drawing jumps and Brownian increments from `rng`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &ModelSpec,
    revision_dates: &[f64],
    substeps: usize,
    rng: &mut R,
) -> Result<SimulatedPath> {
    let (jumps, rejected) = draw_jump_events(model, rng);
    let mut noise = GaussianIncrements::new(rng, model.brownian_corr);
    let mut path = simulate_path_with(model, revision_dates, substeps, &jumps, &mut noise)?;
    path.rejected_jumps = rejected;
    Ok(path)
}

/// How an ensemble is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

/// Bookkeeping from an ensemble run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnsembleReport {
    /// Paths that hit a non-finite state and were redrawn.
    pub resampled: usize,
    pub rejected_jumps: u64,
}

/// Runs `f` on every path of an ensemble in parallel. Path `k` uses substream
/// `k` of `master_seed`, and results come back in path order, so the output
/// does not depend on the worker count.
pub fn map_ensemble<T, F>(
    model: &ModelSpec,
    revision_dates: &[f64],
    substeps: usize,
    config: EnsembleConfig,
    f: F,
) -> Result<(Vec<T>, EnsembleReport)>
where
    T: Send,
    F: Fn(usize, &SimulatedPath) -> Result<T> + Sync,
{
    model.validate()?;
    validate_dates(revision_dates)?;
    if config.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let run_one = |k: usize| -> Result<(T, u32, u32)> {
        let mut attempt = 0;
        loop {
            let mut rng: PathRng = substream(config.master_seed, k as u64, attempt);
            match simulate_path(model, revision_dates, substeps, &mut rng) {
                Ok(path) => return Ok((f(k, &path)?, attempt, path.rejected_jumps)),
                Err(Error::NonFinite { time, .. }) => {
                    attempt += 1;
                    if attempt >= MAX_RESAMPLE_ATTEMPTS {
                        return Err(Error::NonFinite { path: k as u64, time });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    };

    let results: Vec<Result<(T, u32, u32)>> =
        pool.install(|| (0..config.n_paths).into_par_iter().map(run_one).collect());
    let mut out = Vec::with_capacity(config.n_paths);
    let mut report = EnsembleReport::default();
    for r in results {
        let (value, attempts, rejected) = r?;
        report.resampled += attempts as usize;
        report.rejected_jumps += u64::from(rejected);
        out.push(value);
    }
    Ok((out, report))
}

/// Simulates and keeps every path of an ensemble.
pub fn simulate_ensemble(
    model: &ModelSpec,
    revision_dates: &[f64],
    substeps: usize,
    config: EnsembleConfig,
) -> Result<Vec<SimulatedPath>> {
    map_ensemble(model, revision_dates, substeps, config, |_, p| Ok(p.clone())).map(|(v, _)| v)
}
