//! Scalar distributions and test statistics used across the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::erf;
use statrs::function::gamma::gamma_ur;

/// Random stream type used by every chain. Seeded streams make runs reproducible.
pub type ChainRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child stream from a parent stream.
pub fn split_rng<R: Rng + ?Sized>(parent: &mut R) -> ChainRng {
    ChaCha8Rng::seed_from_u64(parent.random())
}

/// Smallest positive double spacing at 1.0, `2^-52`.
pub const MACHINE_EPSILON: f64 = f64::EPSILON;

pub fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inclusion probability with saturation: exactly 0 at or below
/// `logit(2^-52)`, exactly 1 at or above `logit(1 - 2^-52)`, and the stable
/// logistic function in between.
pub fn expit_saturated(eta: f64) -> f64 {
    let hi = saturation_threshold();
    if eta.is_nan() {
        return 0.5;
    }
    if eta <= -hi {
        0.0
    } else if eta >= hi {
        1.0
    } else {
        expit(eta)
    }
}

/// `logit(1 - 2^-52)`, equal to `-logit(2^-52)`.
pub fn saturation_threshold() -> f64 {
    ((1.0 - MACHINE_EPSILON) / MACHINE_EPSILON).ln()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -std_normal_quantile(1.0 - p);
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Halley step against the cdf
    let e = std_normal_cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse-gamma law with density proportional to `x^(-shape-1) exp(-rate/x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub rate: f64,
}

impl InvGamma {
    pub fn new(shape: f64, rate: f64) -> Self {
        debug_assert!(shape > 0.0 && rate > 0.0, "IG({shape}, {rate})");
        Self { shape, rate }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.rate)
            .expect("inverse-gamma parameters are positive and finite")
            .sample(rng);
        1.0 / g
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_ur(self.shape, self.rate / x)
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.rate / (self.shape - 1.0))
    }
}

/// Outcome of a one-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a continuous CDF, asymptotic Kolmogorov
/// p-value with Stephens' small-sample correction.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsTest {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if (j as i64) % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.025, 0.3, 0.5, 0.9, 0.999] {
            let q = std_normal_quantile(p);
            assert!((std_normal_cdf(q) - p).abs() < 1e-12, "p={p} err={}", std_normal_cdf(q) - p);
        }
        assert!((std_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn saturation_edges() {
        let t = saturation_threshold();
        assert!((t - 36.04365338911715).abs() < 1e-9);
        assert_eq!(expit_saturated(t), 1.0);
        assert_eq!(expit_saturated(-t), 0.0);
        assert_eq!(expit_saturated(800.0), 1.0);
        assert_eq!(expit_saturated(-800.0), 0.0);
        let inner = expit_saturated(t - 1e-6);
        assert!(inner > 0.0 && inner <= 1.0);
    }

    #[test]
    fn saturated_expit_is_monotone() {
        let mut prev = -1.0;
        let mut x = -60.0;
        while x < 60.0 {
            let v = expit_saturated(x);
            assert!(v >= prev, "x={x}");
            prev = v;
            x += 0.01;
        }
    }

    #[test]
    fn inverse_gamma_cdf_matches_reciprocal_gamma() {
        // IG(1, 1) has cdf exp(-1/x)
        let ig = InvGamma::new(1.0, 1.0);
        for &x in &[0.1, 0.5, 1.0, 3.0] {
            assert!((ig.cdf(x) - (-1.0 / x).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_gamma_sampler_passes_ks() {
        let mut rng = seeded_rng(11);
        let ig = InvGamma::new(2.5, 1.7);
        let xs: Vec<f64> = (0..10_000).map(|_| ig.sample(&mut rng)).collect();
        let ks = ks_test(&xs, |x| ig.cdf(x));
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        let mut rng = seeded_rng(3);
        let ig = InvGamma::new(2.5, 1.7);
        let xs: Vec<f64> = (0..5_000).map(|_| ig.sample(&mut rng)).collect();
        let wrong = InvGamma::new(2.5, 2.2);
        assert!(ks_test(&xs, |x| wrong.cdf(x)).p_value < 1e-6);
    }
}
