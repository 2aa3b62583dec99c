//! Sample statistics and the log-log slope fit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::PathRng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Moment skewness `m3 / m2^{3/2}`; 0 when the sample has no spread.
pub fn skewness(xs: &[f64]) -> f64 {
    if xs.len() < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Summary of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub skew: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let std = std_dev(xs);
        Self {
            mean: mean(xs),
            std,
            stderr: std / (xs.len() as f64).sqrt(),
            skew: skewness(xs),
        }
    }
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `log std` against `log n` with a bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    /// `n` values that entered the fit.
    pub n_values: Vec<usize>,
}

pub const MIN_SLOPE_POINTS: usize = 4;

fn log_std_points(n_values: &[usize], samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut used = Vec::new();
    for (&n, sample) in n_values.iter().zip(samples) {
        let s = std_dev(sample);
        if s > 0.0 && s.is_finite() {
            xs.push((n as f64).ln());
            ys.push(s.ln());
            used.push(n);
        }
    }
    (xs, ys, used)
}

/// Fits `log std(sample_n) ~ a + slope log n`. Points with zero spread are
/// dropped. The 95% interval comes from `resamples` path-level bootstrap
/// replicates, each resampling every `n`'s sample independently.
pub fn fit_log_slope(
    n_values: &[usize],
    samples: &[Vec<f64>],
    resamples: usize,
    rng: &mut PathRng,
) -> Result<SlopeFit> {
    if n_values.len() != samples.len() {
        return Err(Error::InvalidArgument("one sample per n value is needed".into()));
    }
    let (xs, ys, used) = log_std_points(n_values, samples);
    if used.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_SLOPE_POINTS,
            got: used.len(),
        });
    }
    let slope = ols_slope(&xs, &ys);

    let kept: Vec<&Vec<f64>> = n_values
        .iter()
        .zip(samples)
        .filter(|(n, _)| used.contains(n))
        .map(|(_, s)| s)
        .collect();
    let mut replicate = Vec::new();
    let mut boot = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut ys_b = Vec::with_capacity(kept.len());
        for sample in &kept {
            replicate.clear();
            replicate.extend((0..sample.len()).map(|_| sample[rng.random_range(0..sample.len())]));
            ys_b.push(std_dev(&replicate).max(f64::MIN_POSITIVE).ln());
        }
        boot.push(ols_slope(&xs, &ys_b));
    }
    boot.sort_by(f64::total_cmp);
    let pick = |q: f64| -> f64 {
        if boot.is_empty() {
            return slope;
        }
        let idx = ((boot.len() - 1) as f64 * q).round() as usize;
        boot[idx]
    };
    Ok(SlopeFit {
        slope,
        ci_low: pick(0.025),
        ci_high: pick(0.975),
        resamples,
        n_values: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn moments_of_small_samples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((std_dev(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(skewness(&xs), 0.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 10.0]) > 1.0);
        assert_eq!(skewness(&[2.0; 5]), 0.0);
    }

    #[test]
    fn exact_power_law_has_its_exponent() {
        let ns = [32usize, 64, 128, 256, 512, 1024];
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| (3.0 * (n as f64).powf(-0.25)).ln()).collect();
        assert!((ols_slope(&xs, &ys) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn samples_scaled_by_power_law_fit_exactly() {
        let base: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let ns = vec![10usize, 100, 1000, 10_000];
        let samples: Vec<Vec<f64>> = ns
            .iter()
            .map(|&n| base.iter().map(|b| b * (n as f64).powf(-0.25)).collect())
            .collect();
        let fit = fit_log_slope(&ns, &samples, 50, &mut substream(1, 0, 0)).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-12);
        assert!(fit.ci_low <= fit.ci_high);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let ns = vec![10usize, 100, 1000, 10_000];
        let mut samples = vec![vec![1.0, 2.0, 3.0]; 4];
        samples[2] = vec![1.0; 3];
        let err = fit_log_slope(&ns, &samples, 10, &mut substream(1, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPoints { got: 3, .. }));
    }
}
