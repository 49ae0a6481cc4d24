use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stable::{self, StableParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GumbelOrientation {
    /// `exp(-exp(-(x - m) / s))`.
    #[default]
    Maximum,
    /// `1 - exp(-exp((x - m) / s))`.
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StableFit {
    Mle { max_iter: u64 },
    /// Keep the shape and fit location and scale from quantiles.
    FixedShape { alpha: f64, beta: f64 },
}

impl Default for StableFit {
    fn default() -> Self {
        StableFit::Mle { max_iter: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    AsymmetricLaplace,
    ExtremeValue {
        #[serde(default)]
        orientation: GumbelOrientation,
    },
    Stable {
        #[serde(default)]
        fit: StableFit,
    },
}

/// Asymmetric Laplace law with density
/// `lambda / (kappa + 1/kappa) exp(-lambda kappa^s |x - m|)`, `s = sign(x - m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricLaplace {
    pub m: f64,
    pub lambda: f64,
    pub kappa: f64,
}

impl AsymmetricLaplace {
    pub fn cdf(&self, x: f64) -> f64 {
        let k2 = self.kappa * self.kappa;
        if x >= self.m {
            1.0 - (-self.lambda * self.kappa * (x - self.m)).exp() / (1.0 + k2)
        } else {
            k2 / (1.0 + k2) * (-(self.lambda / self.kappa) * (self.m - x)).exp()
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let rate = if x >= self.m { self.lambda * self.kappa } else { self.lambda / self.kappa };
        (self.lambda / (self.kappa + 1.0 / self.kappa)).ln() - rate * (x - self.m).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gumbel {
    pub location: f64,
    pub scale: f64,
    pub orientation: GumbelOrientation,
}

impl Gumbel {
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        match self.orientation {
            GumbelOrientation::Maximum => (-(-z).exp()).exp(),
            GumbelOrientation::Minimum => -(-(z.exp())).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedDistortion {
    AsymmetricLaplace(AsymmetricLaplace),
    ExtremeValue(Gumbel),
    Stable(StableParams),
}

impl FittedDistortion {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            FittedDistortion::AsymmetricLaplace(d) => d.cdf(x),
            FittedDistortion::ExtremeValue(d) => d.cdf(x),
            FittedDistortion::Stable(p) => stable::cdf(x, p),
        }
    }
}

/// Closed-form maximum likelihood. For a fixed mode `m` with mean positive
/// and negative deviations `a`, `b`, the optimum has `kappa = (b/a)^(1/4)`
/// and profile likelihood decreasing in `sqrt(a) + sqrt(b)`, which is
/// concave between data points, so `m` is searched over the sample.
pub fn fit_asymmetric_laplace(data: &[f64]) -> Result<AsymmetricLaplace> {
    let n = data.len();
    if n < 3 || data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("asymmetric Laplace fit needs at least 3 finite values"));
    }
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let total: f64 = xs.iter().sum();
    let mut below = 0.0;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for (i, &m) in xs.iter().enumerate() {
        // below holds the sum of xs[..i]
        let b = (m * i as f64 - below) / n as f64;
        let a = (total - below - m * (n - i) as f64) / n as f64;
        below += m;
        if !(a > 0.0 && b > 0.0) {
            continue;
        }
        let crit = a.sqrt() + b.sqrt();
        if best.is_none_or(|(c, ..)| crit < c) {
            best = Some((crit, m, a, b));
        }
    }
    let (crit, m, a, b) = best.ok_or_else(|| Error::input("asymmetric Laplace fit needs at least two distinct values"))?;
    Ok(AsymmetricLaplace { m, kappa: (b / a).powf(0.25), lambda: 1.0 / ((a * b).powf(0.25) * crit) })
}

/// Maximum likelihood for the Gumbel law. The scale solves
/// `s = mean(x) - sum(x w) / sum(w)` with `w = exp(-x / s)` (bisection);
/// the minimum orientation is fitted on the negated data.
pub fn fit_gumbel(data: &[f64], orientation: GumbelOrientation) -> Result<Gumbel> {
    let n = data.len();
    if n < 2 || data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("Gumbel fit needs at least 2 finite values"));
    }
    let xs: Vec<f64> = match orientation {
        GumbelOrientation::Maximum => data.to_vec(),
        GumbelOrientation::Minimum => data.iter().map(|v| -v).collect(),
    };
    let mean = xs.iter().sum::<f64>() / n as f64;
    let lo_x = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::input("Gumbel fit needs at least two distinct values"));
    }
    let h = |s: f64| {
        let (mut sw, mut sxw) = (0.0, 0.0);
        for &x in &xs {
            let w = (-(x - lo_x) / s).exp();
            sw += w;
            sxw += x * w;
        }
        s - mean + sxw / sw
    };
    let mut lo = 1e-8 * sd;
    let mut hi = sd;
    let mut guard = 0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonConvergence { what: "Gumbel scale bracket".into(), iterations: guard, gap: hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let mean_w = xs.iter().map(|x| (-(x - lo_x) / scale).exp()).sum::<f64>() / n as f64;
    let location = lo_x - scale * mean_w.ln();
    Ok(match orientation {
        GumbelOrientation::Maximum => Gumbel { location, scale, orientation },
        GumbelOrientation::Minimum => Gumbel { location: -location, scale, orientation },
    })
}

fn fit_column(column: &[f64], family: &Family) -> Result<FittedDistortion> {
    Ok(match family {
        Family::AsymmetricLaplace => FittedDistortion::AsymmetricLaplace(fit_asymmetric_laplace(column)?),
        Family::ExtremeValue { orientation } => FittedDistortion::ExtremeValue(fit_gumbel(column, *orientation)?),
        Family::Stable { fit } => FittedDistortion::Stable(match fit {
            StableFit::Mle { max_iter } => stable::fit_mle(column, *max_iter)?,
            StableFit::FixedShape { alpha, beta } => stable::fit_location_scale(column, *alpha, *beta)?,
        }),
    })
}

/// A distortion applied column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub x: DMatrix<f64>,
    pub fitted: Vec<FittedDistortion>,
}

/// Replace every column by its fitted distribution function.
pub fn distort(y: &DMatrix<f64>, family: &Family) -> Result<Distortion> {
    let (n, p) = y.shape();
    let fitted: Vec<FittedDistortion> = (0..p)
        .into_par_iter()
        .map(|d| {
            let col: Vec<f64> = y.column(d).iter().copied().collect();
            fit_column(&col, family).map_err(|e| match e {
                Error::NonConvergence { what, iterations, gap } => {
                    Error::NonConvergence { what: format!("{what} (column {})", d + 1), iterations, gap }
                }
                Error::Numerical(msg) => Error::Numerical(format!("column {}: {msg}", d + 1)),
                Error::Input(msg) => Error::Input(format!("column {}: {msg}", d + 1)),
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    // keep values strictly inside the unit interval
    let x = DMatrix::from_fn(n, p, |i, d| fitted[d].cdf(y[(i, d)]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0));
    Ok(Distortion { x, fitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn gumbel_maximum_at_zero() {
        let g = Gumbel { location: 0.0, scale: 1.0, orientation: GumbelOrientation::Maximum };
        assert!((g.cdf(0.0) - (-1f64).exp()).abs() < 1e-16);
        let g = Gumbel { orientation: GumbelOrientation::Minimum, ..g };
        assert!((g.cdf(0.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn symmetric_laplace_median() {
        let d = AsymmetricLaplace { m: 0.0, lambda: 2.0, kappa: 1.0 };
        assert_eq!(d.cdf(0.0), 0.5);
        assert!((d.cdf(1.0) - (1.0 - 0.5 * (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn laplace_fit_is_a_maximum() {
        let mut rng = seeded_rng(1);
        let data: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal).exp()).collect();
        let fit = fit_asymmetric_laplace(&data).unwrap();
        let ll = |d: &AsymmetricLaplace| data.iter().map(|x| d.log_pdf(*x)).sum::<f64>();
        let best = ll(&fit);
        for (dm, dl, dk) in [(0.0, 1.05, 1.0), (0.0, 0.95, 1.0), (0.0, 1.0, 1.05), (0.0, 1.0, 0.95), (0.01, 1.0, 1.0), (-0.01, 1.0, 1.0)] {
            let other = AsymmetricLaplace { m: fit.m + dm, lambda: fit.lambda * dl, kappa: fit.kappa * dk };
            assert!(ll(&other) <= best + 1e-9);
        }
        // brute force over every sample point as the mode
        for &m in &data {
            let n = data.len() as f64;
            let a = data.iter().map(|x| (x - m).max(0.0)).sum::<f64>() / n;
            let b = data.iter().map(|x| (m - x).max(0.0)).sum::<f64>() / n;
            if a > 0.0 && b > 0.0 {
                let k = (b / a).powf(0.25);
                let lam = 1.0 / ((a * b).powf(0.25) * (a.sqrt() + b.sqrt()));
                assert!(ll(&AsymmetricLaplace { m, lambda: lam, kappa: k }) <= best + 1e-9);
            }
        }
    }

    #[test]
    fn gumbel_fit_recovers_parameters() {
        let mut rng = seeded_rng(2);
        for orientation in [GumbelOrientation::Maximum, GumbelOrientation::Minimum] {
            let truth = Gumbel { location: 1.0, scale: 2.0, orientation };
            let data: Vec<f64> = (0..50_000)
                .map(|_| {
                    let u: f64 = rng.random_range(1e-12..1.0);
                    match orientation {
                        GumbelOrientation::Maximum => 1.0 - 2.0 * (-u.ln()).ln(),
                        GumbelOrientation::Minimum => 1.0 + 2.0 * (-u.ln()).ln(),
                    }
                })
                .collect();
            let fit = fit_gumbel(&data, orientation).unwrap();
            assert!((fit.location - truth.location).abs() < 0.05, "{fit:?}");
            assert!((fit.scale - truth.scale).abs() < 0.05, "{fit:?}");
        }
    }

    #[test]
    fn gumbel_score_equations_hold() {
        let data = [0.3, 1.7, -0.4, 2.2, 0.9, 1.1];
        let g = fit_gumbel(&data, GumbelOrientation::Maximum).unwrap();
        let n = data.len() as f64;
        let z: Vec<f64> = data.iter().map(|x| (x - g.location) / g.scale).collect();
        // d/dm: sum(1 - exp(-z)) = 0, d/ds: sum(z - z exp(-z)) = n
        let dm: f64 = z.iter().map(|z| 1.0 - (-z).exp()).sum();
        let ds: f64 = z.iter().map(|z| z - z * (-z).exp()).sum();
        assert!(dm.abs() < 1e-9);
        assert!((ds - n).abs() < 1e-9);
    }

    #[test]
    fn distortions_preserve_order() {
        let mut rng = seeded_rng(3);
        let y = DMatrix::from_fn(100, 10, |_, _| rng.sample::<f64, _>(StandardNormal));
        for family in [
            Family::AsymmetricLaplace,
            Family::ExtremeValue { orientation: GumbelOrientation::Maximum },
            Family::Stable { fit: StableFit::FixedShape { alpha: 1.7, beta: 0.2 } },
        ] {
            let out = distort(&y, &family).unwrap();
            for d in 0..10 {
                let mut idx: Vec<usize> = (0..100).collect();
                idx.sort_by(|a, b| y[(*a, d)].total_cmp(&y[(*b, d)]));
                for w in idx.windows(2) {
                    assert!(out.x[(w[0], d)] <= out.x[(w[1], d)]);
                }
                assert!(out.x.column(d).iter().all(|v| *v > 0.0 && *v < 1.0));
            }
        }
    }

    #[test]
    fn many_columns_stay_ordered() {
        let mut rng = seeded_rng(4);
        let y = DMatrix::from_fn(50, 1000, |_, _| rng.sample::<f64, _>(StandardNormal));
        let out = distort(&y, &Family::ExtremeValue { orientation: GumbelOrientation::Maximum }).unwrap();
        for d in 0..1000 {
            for i in 0..50 {
                for j in 0..50 {
                    if y[(i, d)] < y[(j, d)] {
                        assert!(out.x[(i, d)] <= out.x[(j, d)]);
                    }
                }
            }
        }
    }
}
