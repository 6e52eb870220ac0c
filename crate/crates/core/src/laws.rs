//! Distributions of the random scalars driving compound random measures.

use rand_distr::{Distribution, Gamma, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::seed::Rng;

/// Absolute tolerance of the Laplace-moment quadratures.
const MOMENT_TOL: f64 = 1e-12;

/// Law of a non-negative scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarLaw {
    Constant { value: f64 },
    /// Shape `shape`, rate `rate` (mean `shape / rate`).
    Gamma { shape: f64, rate: f64 },
    Uniform { low: f64, high: f64 },
    /// `exp(N(mu, sigma²))`.
    LogNormal { mu: f64, sigma: f64 },
}

/// The three weighted Laplace moments `E[α^k e^{-uα}]`, `k = 0, 1, 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

impl ScalarLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarLaw::Constant { value } => value > 0.0 && value.is_finite(),
            ScalarLaw::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            ScalarLaw::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
            ScalarLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid scalar law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => value,
            ScalarLaw::Gamma { shape, rate } => shape / rate,
            ScalarLaw::Uniform { low, high } => 0.5 * (low + high),
            ScalarLaw::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ScalarLaw::Constant { .. } => 0.0,
            ScalarLaw::Gamma { shape, rate } => shape / (rate * rate),
            ScalarLaw::Uniform { low, high } => (high - low).powi(2) / 12.0,
            ScalarLaw::LogNormal { mu, sigma } => ((sigma * sigma).exp() - 1.0) * (2.0 * mu + sigma * sigma).exp(),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            ScalarLaw::Constant { value } => value,
            ScalarLaw::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            ScalarLaw::Uniform { low, high } => Uniform::new(low, high).expect("validated").sample(rng),
            ScalarLaw::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
        }
    }

    /// True when [`laplace_moments`](Self::laplace_moments) is closed-form.
    pub fn has_closed_form(&self) -> bool {
        matches!(self, ScalarLaw::Constant { .. } | ScalarLaw::Gamma { .. })
    }

    /// `E[α^k e^{-uα}]` for `k = 0, 1, 2` and `u ≥ 0`.
    ///
    /// Gamma(a, b): with `q = b / (b + u)`, the moments are `q^a`,
    /// `a/(b+u) · q^a` and `a(a+1)/(b+u)² · q^a`, since `α^k e^{-uα}` times
    /// the Gamma(a, b) density is a multiple of the Gamma(a + k, b + u) density.
    pub fn laplace_moments(&self, u: f64) -> Result<LaplaceMoments> {
        match *self {
            ScalarLaw::Constant { value } => {
                let e = (-u * value).exp();
                Ok(LaplaceMoments { m0: e, m1: value * e, m2: value * value * e })
            }
            ScalarLaw::Gamma { shape: a, rate: b } => {
                let q = (b / (b + u)).powf(a);
                Ok(LaplaceMoments { m0: q, m1: a / (b + u) * q, m2: a * (a + 1.0) / (b + u).powi(2) * q })
            }
            ScalarLaw::Uniform { low, high } => {
                let w = 1.0 / (high - low);
                let m = |k: i32| integrate(|x| w * x.powi(k) * (-u * x).exp(), low, high, MOMENT_TOL);
                Ok(LaplaceMoments { m0: m(0)?, m1: m(1)?, m2: m(2)? })
            }
            ScalarLaw::LogNormal { mu, sigma } => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let m = |k: i32| {
                    integrate(
                        |z| {
                            let a = (mu + sigma * z).exp();
                            norm * (-0.5 * z * z).exp() * a.powi(k) * (-u * a).exp()
                        },
                        -12.0,
                        12.0,
                        MOMENT_TOL,
                    )
                };
                Ok(LaplaceMoments { m0: m(0)?, m1: m(1)?, m2: m(2)? })
            }
        }
    }
}

/// Joint law of the compound pair `(Λ₁, Λ₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaLaw {
    Constant { c1: f64, c2: f64 },
    /// `Λ₁, Λ₂` independent Gamma(shape, rate).
    Gamma { shape: f64, rate: f64 },
    /// `Λ₁ = Λ`, `Λ₂ = scale · Λ` with `Λ ~ base`.
    Linked { scale: f64, base: ScalarLaw },
    /// `Λ₁ ~ Uniform(0, total)`, `Λ₂ = total − Λ₁`.
    Balanced { total: f64 },
}

impl LambdaLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            LambdaLaw::Constant { c1, c2 } if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) => {
                bad(format!("constant law needs c1, c2 > 0, got {c1}, {c2}"))
            }
            LambdaLaw::Gamma { shape, rate } => ScalarLaw::Gamma { shape, rate }.validate(),
            LambdaLaw::Linked { scale, base } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad(format!("linked scale {scale} must be positive"));
                }
                base.validate()
            }
            LambdaLaw::Balanced { total } if !(total > 0.0 && total.is_finite()) => {
                bad(format!("balanced total {total} must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn means(&self) -> (f64, f64) {
        match *self {
            LambdaLaw::Constant { c1, c2 } => (c1, c2),
            LambdaLaw::Gamma { shape, rate } => (shape / rate, shape / rate),
            LambdaLaw::Linked { scale, base } => (base.mean(), scale * base.mean()),
            LambdaLaw::Balanced { total } => (0.5 * total, 0.5 * total),
        }
    }

    pub fn covariance(&self) -> f64 {
        match *self {
            LambdaLaw::Constant { .. } | LambdaLaw::Gamma { .. } => 0.0,
            LambdaLaw::Linked { scale, base } => scale * base.variance(),
            LambdaLaw::Balanced { total } => -total * total / 12.0,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> (f64, f64) {
        match *self {
            LambdaLaw::Constant { c1, c2 } => (c1, c2),
            LambdaLaw::Gamma { shape, rate } => {
                let g = ScalarLaw::Gamma { shape, rate };
                (g.sample(rng), g.sample(rng))
            }
            LambdaLaw::Linked { scale, base } => {
                let l = base.sample(rng);
                (l, scale * l)
            }
            LambdaLaw::Balanced { total } => {
                let l = ScalarLaw::Uniform { low: 0.0, high: total }.sample(rng);
                (l, total - l)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{SeedKey, Stream};

    #[test]
    fn moments_match_sampling() {
        let laws = [
            ScalarLaw::Gamma { shape: 2.0, rate: 2.0 },
            ScalarLaw::Uniform { low: 0.5, high: 3.0 },
            ScalarLaw::LogNormal { mu: -0.2, sigma: 0.6 },
        ];
        let mut rng = SeedKey::new(1, 0, Stream::Oracle).rng();
        for law in laws {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((mean - law.mean()).abs() < 4.0 * (law.variance() / n as f64).sqrt(), "{law:?}");
            assert!((var / law.variance() - 1.0).abs() < 0.03, "{law:?}");
            let u = 0.7;
            let lm = law.laplace_moments(u).unwrap();
            let emp = xs.iter().map(|x| x * (-u * x).exp()).sum::<f64>() / n as f64;
            assert!((emp - lm.m1).abs() < 0.01 * lm.m1, "{law:?}: {emp} vs {}", lm.m1);
        }
    }

    #[test]
    fn gamma_closed_form_agrees_with_quadrature() {
        let (a, b, u) = (2.0, 2.0, 1.3);
        let g = ScalarLaw::Gamma { shape: a, rate: b }.laplace_moments(u).unwrap();
        let dens = |x: f64| b * b * x * (-b * x).exp();
        for (k, want) in [(0, g.m0), (1, g.m1), (2, g.m2)] {
            let v = integrate(|x| dens(x) * x.powi(k) * (-u * x).exp(), 0.0, 60.0, 1e-13).unwrap();
            assert!((v - want).abs() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn law_moments() {
        assert_eq!(LambdaLaw::Balanced { total: 2.0 }.covariance(), -1.0 / 3.0);
        let linked = LambdaLaw::Linked { scale: 3.0, base: ScalarLaw::Gamma { shape: 2.0, rate: 2.0 } };
        let (m1, m2) = linked.means();
        assert!((linked.covariance() / (m1 * m2) - 0.5).abs() < 1e-15);
        assert!(LambdaLaw::Constant { c1: 0.0, c2: 1.0 }.validate().is_err());
        assert!(LambdaLaw::Balanced { total: -1.0 }.validate().is_err());
    }
}
