//! Stable laws in the S0 parameterization: distribution function and
//! density by inversion of the characteristic function, and maximum
//! likelihood fitting.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{expit, logit};

/// Absolute error target of each quadrature panel.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Smallest tail index considered when fitting.
pub const MIN_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    /// Tail index in `(0, 2]`.
    pub alpha: f64,
    /// Skewness in `[-1, 1]`.
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn standard(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, gamma: 1.0, delta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) || !(-1.0..=1.0).contains(&self.beta) || !(self.gamma > 0.0) || !self.delta.is_finite() {
            return Err(Error::config(format!("invalid stable parameters {self:?}")));
        }
        Ok(())
    }
}

/// Phase of the standardized characteristic function at `t > 0`, plus `t z`.
fn phase(t: f64, z: f64, alpha: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let skew = if (alpha - 1.0).abs() < 1e-10 {
        beta * std::f64::consts::FRAC_2_PI * t * t.ln()
    } else {
        // t - t^alpha without cancellation near alpha = 1
        let diff = -t * ((alpha - 1.0) * t.ln()).exp_m1();
        beta * (std::f64::consts::FRAC_PI_2 * alpha).tan() * diff
    };
    t * z + skew
}

/// Integrate `f` over `[0, t_max]` in panels short enough to resolve the
/// oscillation at `z`.
fn integrate_panels(z: f64, alpha: f64, f: impl Fn(f64) -> f64) -> f64 {
    let t_max = 40f64.powf(1.0 / alpha);
    let width = (std::f64::consts::PI / (z.abs() + 1.0)).min(1.0);
    let panels = ((t_max / width).ceil() as usize).clamp(1, 20_000);
    let h = t_max / panels as f64;
    (0..panels)
        .map(|k| quadrature::double_exponential::integrate(&f, k as f64 * h, (k + 1) as f64 * h, QUADRATURE_TOLERANCE / panels as f64).integral)
        .sum()
}

fn standard_cdf(z: f64, alpha: f64, beta: f64) -> f64 {
    let integral = integrate_panels(z, alpha, |t| {
        if t == 0.0 {
            return 0.0;
        }
        (-t.powf(alpha)).exp() * phase(t, z, alpha, beta).sin() / t
    });
    (0.5 + integral / std::f64::consts::PI).clamp(0.0, 1.0)
}

fn standard_pdf(z: f64, alpha: f64, beta: f64) -> f64 {
    let integral = integrate_panels(z, alpha, |t| (-t.powf(alpha)).exp() * phase(t, z, alpha, beta).cos());
    (integral / std::f64::consts::PI).max(0.0)
}

pub fn cdf(x: f64, p: &StableParams) -> f64 {
    standard_cdf((x - p.delta) / p.gamma, p.alpha, p.beta)
}

pub fn pdf(x: f64, p: &StableParams) -> f64 {
    standard_pdf((x - p.delta) / p.gamma, p.alpha, p.beta) / p.gamma
}

/// Quantile by bisection on [`cdf`].
pub fn quantile(prob: f64, p: &StableParams) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while cdf(p.delta + p.gamma * lo, p) > prob {
        lo *= 2.0;
    }
    while cdf(p.delta + p.gamma * hi, p) < prob {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(p.delta + p.gamma * mid, p) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    p.delta + p.gamma * 0.5 * (lo + hi)
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Location and scale from the sample median and interquartile range,
/// with the shape held fixed.
pub fn fit_location_scale(data: &[f64], alpha: f64, beta: f64) -> Result<StableParams> {
    StableParams::standard(alpha, beta).validate()?;
    let mut sorted: Vec<f64> = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < 2 {
        return Err(Error::input("at least two observations are needed"));
    }
    let std = StableParams::standard(alpha, beta);
    let (q1, q2, q3) = (quantile(0.25, &std), quantile(0.5, &std), quantile(0.75, &std));
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::input("data have zero interquartile range"));
    }
    let gamma = iqr / (q3 - q1);
    Ok(StableParams { alpha, beta, gamma, delta: sorted_quantile(&sorted, 0.5) - gamma * q2 })
}

struct NegLogLik<'a> {
    data: &'a [f64],
}

fn unpack(v: &[f64]) -> StableParams {
    StableParams {
        alpha: MIN_ALPHA + (2.0 - MIN_ALPHA) * expit(v[0]),
        beta: v[1].tanh(),
        gamma: v[2].exp(),
        delta: v[3],
    }
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let p = unpack(v);
        let ll: f64 = self.data.iter().map(|x| pdf(*x, &p).max(1e-300).ln()).sum();
        Ok(if ll.is_finite() { -ll } else { f64::INFINITY })
    }
}

/// Maximum likelihood over `alpha in [0.5, 2]`, `beta`, `gamma`, `delta` by
/// Nelder-Mead from a quantile-based start.
pub fn fit_mle(data: &[f64], max_iter: u64) -> Result<StableParams> {
    let start = fit_location_scale(data, 1.8, 0.0)?;
    let a0 = logit((start.alpha - MIN_ALPHA) / (2.0 - MIN_ALPHA));
    let v0 = vec![a0, 0.0, start.gamma.ln(), start.delta];
    let steps = [0.5, 0.3, 0.2, 0.25 * start.gamma];
    let mut simplex = vec![v0.clone()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = v0.clone();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-8)
        .map_err(|e| Error::numerical(format!("optimizer setup: {e}")))?;
    let res = Executor::new(NegLogLik { data }, solver)
        .configure(|s| s.max_iters(max_iter))
        .run()
        .map_err(|e| Error::numerical(format!("stable likelihood optimization failed: {e}")))?;
    let best = res.state.best_param.ok_or_else(|| Error::numerical("stable likelihood optimization returned no parameters"))?;
    if !res.state.best_cost.is_finite() {
        return Err(Error::numerical("stable likelihood is not finite at the optimum"));
    }
    Ok(unpack(&best))
}
