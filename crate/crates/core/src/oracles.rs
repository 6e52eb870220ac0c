//! Reference values for the cross statistics: closed forms, quadratures
//! and scalar Monte-Carlo oracles.
//!
//! # Compound models
//!
//! For `Ψ = (Λ₁ ν, Λ₂ ν)` the reweighted measures are `Φᵢ = (Λᵢ / EΛᵢ) ℓ`,
//! so with `s = κ_d t^d`:
//!
//! * `K₁₂(t) = s · E[Λ₁Λ₂] / (EΛ₁ EΛ₂) = s (1 + Cov(Λ₁, Λ₂) / (EΛ₁ EΛ₂))`,
//! * `L₂(t) = E exp(−s Λ₂ / EΛ₂)`,
//! * `L₁₂(t) = E[Λ₁ exp(−s Λ₂ / EΛ₂)] / EΛ₁`,
//! * `J₁₂(t) = L₁₂(t) / L₂(t)`.
//!
//! Linked law `Λ₁ = α`, `Λ₂ = Aα`: the scale `A` cancels and, with
//! `u = s / Eα`, `J₁₂ = E[α e^{−uα}] / (Eα · E e^{−uα})`. For `α ~ Gamma(a, b)`,
//! `E e^{−uα} = (b/(b+u))^a` and `E[α e^{−uα}] = a/(b+u) · (b/(b+u))^a`, so
//! `J₁₂ = b/(b+u)`. Since `u = s b / a` this is `a / (a + s)`, and
//! `L₂ = (a/(a+s))^a`, `L₁₂ = (a/(a+s))^{a+1}`.
//!
//! Balanced law `Λ₁ ~ U(0, A)`, `Λ₂ = A − Λ₁`: `Cov = −A²/12` and `EΛᵢ = A/2`
//! give the `K₁₂` factor `2/3`; `L₂` and `L₁₂` are one-dimensional
//! integrals over `Λ₁ ∈ (0, A)` evaluated by adaptive quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Ordering, Stat};
use crate::grid::lebesgue_ball;
use crate::laws::{LambdaLaw, ScalarLaw};
use crate::quad::integrate;
use crate::randfield::{ExpCovariance, MeanSurface};
use crate::seed::SeedKey;

/// Absolute tolerance of radial and scalar quadratures.
pub const RADIAL_TOL: f64 = 1e-9;
/// Absolute tolerance of the disc and union-of-discs quadratures.
pub const DISC_TOL: f64 = 1e-6;
/// Tolerance on successive differences when classifying monotonicity.
pub const MONOTONE_TOL: f64 = 1e-9;

/// How an oracle value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo { draws: u64 },
}

impl OracleMethod {
    pub fn tag(&self) -> String {
        match self {
            OracleMethod::ClosedForm => "closed-form".into(),
            OracleMethod::Quadrature => "quadrature".into(),
            OracleMethod::MonteCarlo { draws } => format!("monte-carlo({draws})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCurve {
    pub stat: Stat,
    pub ordering: Ordering,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub method: OracleMethod,
}

impl OracleCurve {
    pub(crate) fn new(stat: Stat, t: &[f64], values: Vec<f64>, method: OracleMethod) -> Self {
        Self { stat, ordering: Ordering::OneTwo, t: t.to_vec(), values, method }
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.t.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0)).map(|k| self.values[k])
    }
}

/// `K₁₂(t) = κ_d t^d (1 + Cov(Λ₁, Λ₂) / (EΛ₁ EΛ₂))`.
pub fn compound_k12(law: &LambdaLaw, t_values: &[f64], d: u32) -> Result<OracleCurve> {
    law.validate()?;
    let (e1, e2) = law.means();
    let factor = 1.0 + law.covariance() / (e1 * e2);
    let values = t_values.iter().map(|&t| lebesgue_ball(t, d) * factor).collect();
    Ok(OracleCurve::new(Stat::K12, t_values, values, OracleMethod::ClosedForm))
}

/// `L₂`, `L₁₂` and `J₁₂` of a compound model at one `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompoundLaplace {
    pub l2: f64,
    pub l12: f64,
    pub j12: f64,
}

fn compound_laplace_at(law: &LambdaLaw, s: f64) -> Result<CompoundLaplace> {
    let (l2, l12) = match *law {
        LambdaLaw::Constant { .. } => ((-s).exp(), (-s).exp()),
        LambdaLaw::Gamma { shape, rate } => {
            let g = ScalarLaw::Gamma { shape, rate };
            let m = g.laplace_moments(s / g.mean())?;
            (m.m0, m.m0)
        }
        LambdaLaw::Linked { base, .. } => {
            let m = base.laplace_moments(s / base.mean())?;
            (m.m0, m.m1 / base.mean())
        }
        LambdaLaw::Balanced { total } => {
            let u = s / (0.5 * total);
            let w = 1.0 / total;
            let l2 = integrate(|x| w * (-(total - x) * u).exp(), 0.0, total, RADIAL_TOL)?;
            let l12 = integrate(|x| w * x * (-(total - x) * u).exp(), 0.0, total, RADIAL_TOL)? / (0.5 * total);
            (l2, l12)
        }
    };
    Ok(CompoundLaplace { l2, l12, j12: l12 / l2 })
}

fn compound_method(law: &LambdaLaw) -> OracleMethod {
    match law {
        LambdaLaw::Balanced { .. } => OracleMethod::Quadrature,
        LambdaLaw::Linked { base, .. } if !base.has_closed_form() => OracleMethod::Quadrature,
        _ => OracleMethod::ClosedForm,
    }
}

/// `L₂`, `L₁₂`, `J₁₂` curves of a compound model, in that order.
pub fn compound_laplace(law: &LambdaLaw, t_values: &[f64], d: u32) -> Result<[OracleCurve; 3]> {
    law.validate()?;
    let vals: Vec<CompoundLaplace> =
        t_values.iter().map(|&t| compound_laplace_at(law, lebesgue_ball(t, d))).collect::<Result<_>>()?;
    let method = compound_method(law);
    Ok([
        OracleCurve::new(Stat::L2, t_values, vals.iter().map(|v| v.l2).collect(), method),
        OracleCurve::new(Stat::L12, t_values, vals.iter().map(|v| v.l12).collect(), method),
        OracleCurve::new(Stat::J12, t_values, vals.iter().map(|v| v.j12).collect(), method),
    ])
}

/// `J₁₂(t) = E[Λ₁ e^{−Λ₂ s}] / (EΛ₁ E e^{−Λ₂ s})` with `s = κ_d t^d / EΛ₂`.
pub fn compound_j12(law: &LambdaLaw, t_values: &[f64], d: u32) -> Result<OracleCurve> {
    let [_, _, j] = compound_laplace(law, t_values, d)?;
    Ok(j)
}

/// Monte-Carlo estimate of the compound statistics from scalar draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompoundMc {
    pub t: f64,
    pub k12: f64,
    pub k12_se: f64,
    pub l2: f64,
    pub l2_se: f64,
    pub l12: f64,
    pub l12_se: f64,
    pub j12: f64,
    pub j12_se: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Scalar Monte-Carlo oracle for any [`LambdaLaw`]: `draws` pairs
/// `(Λ₁, Λ₂)` shared by every `t`. `J₁₂` uses the ratio of means with a
/// delta-method standard error.
pub fn compound_monte_carlo(law: &LambdaLaw, t_values: &[f64], d: u32, draws: usize, seed: SeedKey) -> Result<Vec<CompoundMc>> {
    law.validate()?;
    if draws < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: draws });
    }
    let mut rng = seed.rng();
    let pairs: Vec<(f64, f64)> = (0..draws).map(|_| law.sample(&mut rng)).collect();
    let (e1, e2) = law.means();
    Ok(t_values
        .iter()
        .map(|&t| {
            let s = lebesgue_ball(t, d);
            let k: Vec<f64> = pairs.iter().map(|&(a, b)| s * a * b / (e1 * e2)).collect();
            let l2: Vec<f64> = pairs.iter().map(|&(_, b)| (-s * b / e2).exp()).collect();
            let l12: Vec<f64> = pairs.iter().map(|&(a, b)| a / e1 * (-s * b / e2).exp()).collect();
            let (k12, k12_se) = mean_se(&k);
            let (ml2, l2_se) = mean_se(&l2);
            let (ml12, l12_se) = mean_se(&l12);
            let r = ml12 / ml2;
            let resid: Vec<f64> = l12.iter().zip(&l2).map(|(a, b)| a - r * b).collect();
            let (_, rse) = mean_se(&resid);
            CompoundMc { t, k12, k12_se, l2: ml2, l2_se, l12: ml12, l12_se, j12: r, j12_se: rse / ml2 }
        })
        .collect())
}

fn check_nonnegative(lambda: &MeanSurface, center: [f64; 2], r: f64) -> Result<()> {
    lambda.validate()?;
    let rect = crate::grid::Rect::new(center[0] - r, center[0] + r, center[1] - r, center[1] + r);
    let (lo, _) = lambda.bounds(&rect);
    if lo < 0.0 {
        return Err(Error::InvalidParameter(format!("germ intensity takes negative values near {center:?}")));
    }
    Ok(())
}

/// `∫_{B(c, r)} λ` in polar coordinates around `c`.
fn disc_mass(lambda: &MeanSurface, c: [f64; 2], r: f64) -> Result<f64> {
    let mut inner_err = None;
    let v = integrate(
        |th| {
            let (s, co) = th.sin_cos();
            match integrate(|rho| rho * lambda.eval(c[0] + rho * co, c[1] + rho * s), 0.0, r, DISC_TOL * 1e-3) {
                Ok(v) => v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        2.0 * PI,
        DISC_TOL,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    v
}

/// `∫_{B(y, r) \ B(x, r)} λ`: polar around `y`, removing from each ray the
/// chord that lies inside `B(x, r)`.
fn lune_mass(lambda: &MeanSurface, x: [f64; 2], y: [f64; 2], r: f64) -> Result<f64> {
    let (dx, dy) = (y[0] - x[0], y[1] - x[1]);
    let c = dx * dx + dy * dy - r * r;
    let mut inner_err = None;
    let v = integrate(
        |th| {
            let (s, co) = th.sin_cos();
            let f = |rho: f64| rho * lambda.eval(y[0] + rho * co, y[1] + rho * s);
            let b = co * dx + s * dy;
            let disc = b * b - c;
            let mut pieces = vec![(0.0, r)];
            if disc > 0.0 {
                let (lo, hi) = ((-b - disc.sqrt()).max(0.0), (-b + disc.sqrt()).min(r));
                if lo < hi {
                    pieces = vec![(0.0, lo), (hi, r)];
                }
            }
            let mut acc = 0.0;
            for (a, b) in pieces {
                match integrate(f, a, b, DISC_TOL * 1e-3) {
                    Ok(v) => acc += v,
                    Err(e) => {
                        inner_err.get_or_insert(e);
                    }
                }
            }
            acc
        },
        0.0,
        2.0 * PI,
        DISC_TOL,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    v
}

/// Coverage functions of a Boolean model with germ intensity `λ(·)` and
/// ball grains of radius `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BooleanCoverage {
    pub p1_x: f64,
    pub p1_y: f64,
    pub p2: f64,
    /// `(p₂ − p₁(x) p₁(y)) / (p₁(x) p₁(y))`.
    pub xi2: f64,
}

/// `p₁(x) = 1 − exp(−∫_{B(x, r)} λ)`.
pub fn boolean_p1(lambda: &MeanSurface, r: f64, x: [f64; 2]) -> Result<f64> {
    check_nonnegative(lambda, x, r)?;
    if let MeanSurface::Constant { value } = *lambda {
        return Ok(1.0 - (-value * PI * r * r).exp());
    }
    Ok(1.0 - (-disc_mass(lambda, x, r)?).exp())
}

/// `p₂(x, y) = p₁(x) + p₁(y) − 1 + exp(−∫_{B(x, r) ∪ B(y, r)} λ)` and ξ₂.
pub fn boolean_coverage(lambda: &MeanSurface, r: f64, x: [f64; 2], y: [f64; 2]) -> Result<BooleanCoverage> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("grain radius {r} must be positive")));
    }
    check_nonnegative(lambda, x, r)?;
    check_nonnegative(lambda, y, r)?;
    let (mx, my) = (disc_mass(lambda, x, r)?, disc_mass(lambda, y, r)?);
    let union = mx + lune_mass(lambda, x, y, r)?;
    let (p1_x, p1_y) = (1.0 - (-mx).exp(), 1.0 - (-my).exp());
    let p2 = p1_x + p1_y - 1.0 + (-union).exp();
    Ok(BooleanCoverage { p1_x, p1_y, p2, xi2: (p2 - p1_x * p1_y) / (p1_x * p1_y) })
}

/// `K₁₂(t) = ∫_{B(0,t)} (1 + c₁₂^X(‖x‖)) exp(σ₁₂² e^{−β‖x‖}) dx` by radial
/// quadrature, for isotropic cross covariances of the sets.
pub fn loggauss_k12_with(cross: &ExpCovariance, x_cross: impl Fn(f64) -> f64, t_values: &[f64]) -> Result<OracleCurve> {
    cross.validate()?;
    let values = t_values
        .iter()
        .map(|&t| integrate(|rho| 2.0 * PI * rho * (1.0 + x_cross(rho)) * cross.at(rho).exp(), 0.0, t, RADIAL_TOL))
        .collect::<Result<_>>()?;
    Ok(OracleCurve::new(Stat::K12, t_values, values, OracleMethod::Quadrature))
}

/// [`loggauss_k12_with`] for independent set components (`c₁₂^X ≡ 0`).
pub fn loggauss_k12(cross: &ExpCovariance, t_values: &[f64]) -> Result<OracleCurve> {
    loggauss_k12_with(cross, |_| 0.0, t_values)
}

/// `K₁₂` and void-ratio oracles of a germ-grain model with independent
/// Poisson germs of intensities `λ₁, λ₂` and grain radius `r`.
///
/// With independent germs the joint empty-space function factorizes,
/// `F_N(t₁, t₂; x) = F_{N₁}(t₁) F_{N₂}(t₂)`, so the `K₁₂` integrand is
/// constant and the void ratio is one.
pub fn germgrain_stats(lambda1: f64, lambda2: f64, r: f64, t_values: &[f64]) -> Result<(OracleCurve, OracleCurve)> {
    for v in [lambda1, lambda2, r] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter("germ-grain oracle needs positive intensities and radius".into()));
        }
    }
    let f = |lambda: f64, u: f64| 1.0 - (-lambda * PI * u * u).exp();
    let (f1, f2) = (f(lambda1, r), f(lambda2, r));
    let k = t_values.iter().map(|&t| PI * t * t * (f1 * f2) / (f1 * f2)).collect();
    let void = t_values
        .iter()
        .map(|&t| {
            let joint = f1 * f(lambda2, r + t);
            (f1 - joint) / (f1 * (1.0 - f(lambda2, r + t)))
        })
        .collect();
    Ok((
        OracleCurve::new(Stat::K12, t_values, k, OracleMethod::ClosedForm),
        OracleCurve::new(Stat::VoidRatio, t_values, void, OracleMethod::ClosedForm),
    ))
}

/// Both sides of `(E[α e^{−α t^d}])² ≤ E[α² e^{−α t^d}] · E e^{−α t^d}` at one `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `rhs − lhs` (zero for exact evaluations).
    pub se: f64,
    pub holds: bool,
}

pub fn check_weighted_laplace_inequality(law: &ScalarLaw, t_values: &[f64], d: u32) -> Result<Vec<InequalityCheck>> {
    law.validate()?;
    t_values
        .iter()
        .map(|&t| {
            let m = law.laplace_moments(t.powi(d as i32))?;
            let (lhs, rhs) = (m.m1 * m.m1, m.m2 * m.m0);
            Ok(InequalityCheck { t, lhs, rhs, se: 0.0, holds: lhs <= rhs * (1.0 + 1e-10) })
        })
        .collect()
}

/// Sample-average version of [`check_weighted_laplace_inequality`]; holds
/// when `rhs − lhs ≥ −3 se`.
pub fn check_weighted_laplace_inequality_sample(samples: &[f64], t_values: &[f64], d: u32) -> Result<Vec<InequalityCheck>> {
    if samples.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: samples.len() });
    }
    let n = samples.len() as f64;
    Ok(t_values
        .iter()
        .map(|&t| {
            let u = t.powi(d as i32);
            let rows: Vec<[f64; 3]> = samples
                .iter()
                .map(|&a| {
                    let e = (-u * a).exp();
                    [e, a * e, a * a * e]
                })
                .collect();
            let mut m = [0.0; 3];
            for r in &rows {
                for k in 0..3 {
                    m[k] += r[k] / n;
                }
            }
            let (lhs, rhs) = (m[1] * m[1], m[2] * m[0]);
            // Delta method on D = m2 m0 − m1², gradient (m2, −2 m1, m0).
            let g = [m[2], -2.0 * m[1], m[0]];
            let var = rows
                .iter()
                .map(|r| (0..3).map(|k| g[k] * (r[k] - m[k])).sum::<f64>().powi(2))
                .sum::<f64>()
                / (n - 1.0)
                / n;
            let se = var.sqrt();
            InequalityCheck { t, lhs, rhs, se, holds: rhs - lhs >= -3.0 * se }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Monotonicity {
    pub direction: Direction,
    /// Every successive difference is within tolerance of zero.
    pub flat: bool,
}

/// Classifies a sequence; flat sequences count as non-increasing.
pub fn classify(values: &[f64], tol: f64) -> Monotonicity {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let up = diffs.iter().all(|&d| d >= -tol);
    let down = diffs.iter().all(|&d| d <= tol);
    let direction = if down {
        Direction::NonIncreasing
    } else if up {
        Direction::NonDecreasing
    } else {
        Direction::Neither
    };
    Monotonicity { direction, flat: up && down }
}

/// Direction of the oracle `J₁₂` curve on `t_values`.
pub fn j12_monotonicity(law: &LambdaLaw, t_values: &[f64], d: u32) -> Result<Monotonicity> {
    Ok(classify(&compound_j12(law, t_values, d)?.values, MONOTONE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Stream;

    fn linked_gamma(a: f64, b: f64) -> LambdaLaw {
        LambdaLaw::Linked { scale: 1.0, base: ScalarLaw::Gamma { shape: a, rate: b } }
    }

    #[test]
    fn compound_closed_forms() {
        let ts = [0.25, 0.5, 1.0, 2.0];
        let k = compound_k12(&linked_gamma(2.0, 2.0), &ts, 2).unwrap();
        for (v, t) in k.values.iter().zip(ts) {
            assert!((v - 1.5 * PI * t * t).abs() < 1e-12);
        }
        let k = compound_k12(&LambdaLaw::Balanced { total: 2.0 }, &ts, 2).unwrap();
        assert!((k.values[2] - 2.0 / 3.0 * PI).abs() < 1e-12);
        let k = compound_k12(&LambdaLaw::Constant { c1: 1.0, c2: 4.0 }, &ts, 2).unwrap();
        assert!((k.values[2] - PI).abs() < 1e-12);

        let [l2, l12, j] = compound_laplace(&linked_gamma(2.0, 2.0), &[1.0], 2).unwrap();
        let q = 2.0 / (2.0 + PI);
        assert!((j.values[0] - q).abs() < 1e-12);
        assert!((j.values[0] - 0.388_98).abs() < 1e-5);
        assert!((l2.values[0] - q * q).abs() < 1e-12);
        assert!((l12.values[0] - q * q * q).abs() < 1e-12);
        assert_eq!(j.method, OracleMethod::ClosedForm);

        let j = compound_j12(&LambdaLaw::Constant { c1: 2.0, c2: 3.0 }, &ts, 2).unwrap();
        assert!(j.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn series_truncation_identity() {
        // The first-order term of J₁₂ equals K₁₂ − ℓ(B(0, t)): the
        // covariance term of the compound formula.
        let law = linked_gamma(2.0, 2.0);
        let ts = [0.3, 1.0, 1.7];
        let k = compound_k12(&law, &ts, 2).unwrap();
        let (e1, e2) = law.means();
        for (v, t) in k.values.iter().zip(ts) {
            let j1 = PI * t * t * law.covariance() / (e1 * e2);
            assert!((v - PI * t * t - j1).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_quadrature_against_closed_form() {
        // For Λ₁ ~ U(0, A), E exp(−Λ₂ u) = (1 − e^{−Au}) / (Au).
        let a = 2.0;
        let ts = [0.2, 0.7, 1.5];
        let [l2, _, j] = compound_laplace(&LambdaLaw::Balanced { total: a }, &ts, 2).unwrap();
        for (k, &t) in ts.iter().enumerate() {
            let u = PI * t * t / (a / 2.0);
            let want = (1.0 - (-a * u).exp()) / (a * u);
            assert!((l2.values[k] - want).abs() < 1e-10);
            assert!(j.values[k] >= 1.0);
        }
        assert_eq!(j.method, OracleMethod::Quadrature);
    }

    #[test]
    fn closed_forms_match_monte_carlo() {
        let ts = [0.25, 1.0, 2.0];
        let laws = [linked_gamma(2.0, 2.0), LambdaLaw::Balanced { total: 2.0 }, LambdaLaw::Gamma { shape: 3.0, rate: 1.0 }];
        for (n, law) in laws.iter().enumerate() {
            let mc = compound_monte_carlo(law, &ts, 2, 1_000_000, SeedKey::new(40 + n as u64, 0, Stream::Oracle)).unwrap();
            let k = compound_k12(law, &ts, 2).unwrap();
            let [l2, l12, j] = compound_laplace(law, &ts, 2).unwrap();
            for (i, m) in mc.iter().enumerate() {
                let close = |got: f64, want: f64, se: f64| (got - want).abs() <= 3.0 * se + 1e-12;
                assert!(close(m.k12, k.values[i], m.k12_se), "{law:?} K t={}", m.t);
                assert!(close(m.l2, l2.values[i], m.l2_se), "{law:?} L2 t={}", m.t);
                assert!(close(m.l12, l12.values[i], m.l12_se), "{law:?} L12 t={}", m.t);
                assert!(close(m.j12, j.values[i], m.j12_se), "{law:?} J t={}: {} vs {}", m.t, m.j12, j.values[i]);
            }
        }
    }

    #[test]
    fn quadrant_dependence_signs() {
        let ts: Vec<f64> = (1..=50).map(|k| k as f64 * 0.04).collect();
        let linked = compound_j12(&linked_gamma(1.5, 0.7), &ts, 2).unwrap();
        assert!(linked.values.iter().all(|&v| v <= 1.0));
        let balanced = compound_j12(&LambdaLaw::Balanced { total: 3.0 }, &ts, 2).unwrap();
        assert!(balanced.values.iter().all(|&v| v >= 1.0));
        for law in [linked_gamma(1.5, 0.7), LambdaLaw::Balanced { total: 3.0 }] {
            let k = compound_k12(&law, &ts, 2).unwrap();
            let sign = law.covariance().signum();
            assert!(k.values.iter().zip(&ts).all(|(v, t)| (v - PI * t * t).signum() == sign));
        }
    }

    #[test]
    fn boolean_coverage_values() {
        let c = MeanSurface::Constant { value: 0.5 };
        let p = boolean_p1(&c, 0.5, [1.0, 1.0]).unwrap();
        assert!((p - 0.324_768_093_344).abs() < 1e-10);
        let far = boolean_coverage(&c, 0.5, [1.0, 1.0], [2.2, 1.0]).unwrap();
        assert!(far.xi2.abs() < 1e-6);
        assert!((far.p1_x - p).abs() < 1e-6);
        let near = boolean_coverage(&c, 0.5, [1.0, 1.0], [1.3, 1.0]).unwrap();
        assert!(near.xi2 > 0.0);
        // Union of two unit-intensity discs at distance r: 2πr² minus the lens.
        let one = MeanSurface::Constant { value: 1.0 };
        let u = boolean_coverage(&one, 1.0, [0.0, 0.0], [1.0, 0.0]).unwrap();
        let lens = 2.0 * (0.5f64).acos() - 0.5 * (3.0f64).sqrt();
        let union = 2.0 * PI - lens;
        assert!((u.p2 - (u.p1_x + u.p1_y - 1.0 + (-union).exp())).abs() < 1e-6);
    }

    #[test]
    fn linear_intensity_breaks_translation_invariance() {
        let lin = MeanSurface::Planar { scale: 10.0 };
        let a = boolean_coverage(&lin, 0.5, [2.0, 2.0], [2.4, 2.0]).unwrap();
        let b = boolean_coverage(&lin, 0.5, [8.0, 15.0], [8.4, 15.0]).unwrap();
        assert!((a.xi2 - b.xi2).abs() > 1e-3, "{} {}", a.xi2, b.xi2);
        // The disc integral of an affine λ is λ(center)·πr².
        let p = boolean_p1(&lin, 0.5, [3.0, 4.0]).unwrap();
        assert!((p - (1.0 - (-0.7 * PI * 0.25f64).exp())).abs() < 1e-7);
        assert!(boolean_p1(&lin, 0.5, [0.1, 0.1]).is_err());
    }

    #[test]
    fn loggauss_bounds_and_monotonicity() {
        let ts = [0.5, 1.0, 2.0];
        let tiny = loggauss_k12(&ExpCovariance::new(1e-12, 0.8).unwrap(), &ts).unwrap();
        for (v, t) in tiny.values.iter().zip(ts) {
            assert!((v - PI * t * t).abs() < 1e-9);
        }
        let cov = ExpCovariance::new(1.0, 0.8).unwrap();
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 0.05).collect();
        let k = loggauss_k12(&cov, &grid).unwrap();
        let ratio: Vec<f64> = k.values.iter().zip(&grid).map(|(v, t)| v / (PI * t * t)).collect();
        for (r, t) in ratio.iter().zip(&grid) {
            assert!(*r >= (1.0f64 * (-0.8 * t).exp()).exp() && *r <= 1.0f64.exp(), "t={t}");
        }
        assert_eq!(classify(&ratio, 0.0).direction, Direction::NonIncreasing);
    }

    #[test]
    fn germgrain_independence() {
        let ts = [0.0, 0.5, 1.0];
        let (k, v) = germgrain_stats(0.5, 0.5, 0.5, &ts).unwrap();
        assert_eq!(k.values[0], 0.0);
        for (i, t) in ts.iter().enumerate() {
            assert!((k.values[i] - PI * t * t).abs() < 1e-12);
            assert!((v.values[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_laplace_inequality_holds() {
        let c = check_weighted_laplace_inequality(&ScalarLaw::Constant { value: 2.0 }, &[0.5, 1.0], 2).unwrap();
        assert!(c.iter().all(|x| x.holds && (x.lhs - x.rhs).abs() < 1e-15 * x.rhs.max(1e-300)));
        let g = check_weighted_laplace_inequality(&ScalarLaw::Gamma { shape: 2.0, rate: 2.0 }, &[1.0], 2).unwrap();
        assert!(g[0].holds && g[0].lhs < g[0].rhs);
        // Gamma(2, 2), u = 1: m0 = 4/9, m1 = 8/27, m2 = 8/27.
        assert!((g[0].lhs - 64.0 / 729.0).abs() < 1e-15 && (g[0].rhs - 32.0 / 243.0).abs() < 1e-15);
        let law = ScalarLaw::LogNormal { mu: 0.0, sigma: 0.5 };
        let mut rng = SeedKey::new(5, 0, Stream::Oracle).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
        let s = check_weighted_laplace_inequality_sample(&xs, &[0.5, 1.0, 1.5], 2).unwrap();
        assert!(s.iter().all(|x| x.holds && x.se > 0.0));
    }

    #[test]
    fn monotonicity_classes() {
        let ts: Vec<f64> = (1..=100).map(|k| k as f64 * 0.02).collect();
        assert_eq!(j12_monotonicity(&linked_gamma(2.0, 2.0), &ts, 2).unwrap().direction, Direction::NonIncreasing);
        assert_eq!(j12_monotonicity(&LambdaLaw::Balanced { total: 2.0 }, &ts, 2).unwrap().direction, Direction::NonDecreasing);
        let flat = j12_monotonicity(&LambdaLaw::Constant { c1: 1.0, c2: 1.0 }, &ts, 2).unwrap();
        assert_eq!(flat, Monotonicity { direction: Direction::NonIncreasing, flat: true });
        assert_eq!(classify(&[1.0, 2.0, 1.0], 1e-9).direction, Direction::Neither);
    }
}
