//! Erosion-corrected estimators of the cross statistics, the stationary
//! random-closed-set statistics and Monte-Carlo envelopes.
//!
//! All integrals are Riemann sums over the pixel centers of `W ⊖ t`, with
//! ball masses from the shared [`BallMask`] kernels. Per-`t` work runs in
//! parallel; each `t` is summed sequentially in row-major order, so results
//! are bit-reproducible.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_mass_map, erode, hit_map, BallMask, BinaryField, CountPrefix, GridSpec, RowPrefix, ScalarField};
use crate::scalar::Real;

/// Default floor below which `L̂₂` makes `Ĵ₁₂` missing.
pub const J_FLOOR: f64 = 1e-8;

/// Statistic carried by a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stat {
    L2,
    L12,
    K12,
    J12,
    F2,
    H12,
    T12,
    VoidRatio,
}

impl Stat {
    pub fn name(&self) -> &'static str {
        match self {
            Stat::L2 => "L2",
            Stat::L12 => "L12",
            Stat::K12 => "K12",
            Stat::J12 => "J12",
            Stat::F2 => "F2",
            Stat::H12 => "H12",
            Stat::T12 => "T12",
            Stat::VoidRatio => "void_ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Stat::L2, Stat::L12, Stat::K12, Stat::J12, Stat::F2, Stat::H12, Stat::T12, Stat::VoidRatio]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Component order: `"12"` for the statistic as named, `"21"` with the
/// components exchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    #[serde(rename = "12")]
    OneTwo,
    #[serde(rename = "21")]
    TwoOne,
}

impl Ordering {
    pub fn name(&self) -> &'static str {
        match self {
            Ordering::OneTwo => "12",
            Ordering::TwoOne => "21",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "12" => Some(Ordering::OneTwo),
            "21" => Some(Ordering::TwoOne),
            _ => None,
        }
    }
}

/// Normalization of `K̂₁₂` and `L̂₁₂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// `ℓ(W ⊖ t)`.
    #[default]
    ErosionVolume,
    /// `Φ₁(W ⊖ t)`.
    Hamilton,
}

/// `(t, value)` pairs of one statistic; `None` marks a missing value.
#[derive(Clone, Debug, PartialEq)]
pub struct StatCurve {
    pub stat: Stat,
    pub ordering: Ordering,
    pub t: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub replicate: Option<u32>,
    pub denominator: Denominator,
}

impl StatCurve {
    pub fn new(stat: Stat, t: Vec<f64>, values: Vec<Option<f64>>) -> Self {
        Self { stat, ordering: Ordering::OneTwo, t, values, replicate: None, denominator: Denominator::default() }
    }

    pub fn with_ordering(mut self, ordering: Ordering) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn with_replicate(mut self, replicate: u32) -> Self {
        self.replicate = Some(replicate);
        self
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.t.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0)).and_then(|k| self.values[k])
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Rejects empty, negative, non-finite or non-ascending t grids.
pub fn check_t_values(t_values: &[f64]) -> Result<()> {
    if t_values.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    if t_values.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("t values must be finite and >= 0".into()));
    }
    if t_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("t values must be strictly ascending".into()));
    }
    Ok(())
}

fn check_same_t(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(Error::GridMismatch("curves are on different t grids".into()));
    }
    Ok(())
}

/// `L̂₂`, `L̂₁₂` and `K̂₁₂` from one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCurves {
    pub l2: StatCurve,
    pub l12: StatCurve,
    pub k12: StatCurve,
}

impl CrossCurves {
    pub fn j12(&self, floor: f64) -> Result<StatCurve> {
        estimate_j12(&self.l12, &self.l2, floor)
    }
}

struct CrossSums {
    count: usize,
    exp: f64,
    mass: f64,
    exp_weighted: f64,
    weight: f64,
}

fn cross_sums<T: Real>(phi1: &ScalarField<T>, prefix2: &RowPrefix<T>, t: f64, exponent_scale: f64) -> Result<CrossSums> {
    let spec = phi1.spec();
    let region = erode(spec, t)?;
    let masses: Vec<T> = if t == 0.0 {
        vec![T::zero(); region.pixel_count()]
    } else {
        ball_mass_map(prefix2, &region, &BallMask::new(t, spec.h))?
    };
    let mut s = CrossSums { count: masses.len(), exp: 0.0, mass: 0.0, exp_weighted: 0.0, weight: 0.0 };
    for ((i, j), m) in region.pixels().zip(masses) {
        let m = m.as_f64();
        let w = phi1.get(i, j).as_f64();
        let e = (-exponent_scale * m).exp();
        s.exp += e;
        s.mass += m * w;
        s.exp_weighted += e * w;
        s.weight += w;
    }
    Ok(s)
}

/// Computes `L̂₂`, `L̂₁₂` and `K̂₁₂` together, sharing the `Φ₂` ball masses.
///
/// `exponent_scale` multiplies `Φ₂(B(x, t))` inside the exponentials; it is
/// `1` for the estimators as defined and `s^d` for the statistics of the
/// scaled set `sX` at radius `st`. The Hamilton denominator applies to
/// both `K̂₁₂` and `L̂₁₂`.
pub fn cross_statistics<T: Real>(
    phi1: &ScalarField<T>,
    phi2: &ScalarField<T>,
    t_values: &[f64],
    denom: Denominator,
    exponent_scale: f64,
) -> Result<CrossCurves> {
    check_t_values(t_values)?;
    phi1.spec().check_same(phi2.spec(), "phi2")?;
    let prefix2 = RowPrefix::new(phi2);
    let sums: Vec<CrossSums> =
        t_values.par_iter().map(|&t| cross_sums(phi1, &prefix2, t, exponent_scale)).collect::<Result<_>>()?;
    let mut l2 = Vec::with_capacity(sums.len());
    let mut l12 = Vec::with_capacity(sums.len());
    let mut k12 = Vec::with_capacity(sums.len());
    for (s, &t) in sums.iter().zip(t_values) {
        let d = match denom {
            Denominator::ErosionVolume => s.count as f64,
            Denominator::Hamilton if s.weight > 0.0 => s.weight,
            Denominator::Hamilton => return Err(Error::ZeroDenominator { t }),
        };
        l2.push(Some(s.exp / s.count as f64));
        l12.push(Some(s.exp_weighted / d));
        k12.push(Some(s.mass / d));
    }
    let curve = |stat, values| StatCurve { denominator: denom, ..StatCurve::new(stat, t_values.to_vec(), values) };
    Ok(CrossCurves { l2: curve(Stat::L2, l2), l12: curve(Stat::L12, l12), k12: curve(Stat::K12, k12) })
}

/// `L̂₂(t) = ℓ(W⊖t)⁻¹ ∫_{W⊖t} exp(−Φ₂(B(x, t))) dx`.
pub fn estimate_l2<T: Real>(phi2: &ScalarField<T>, t_values: &[f64]) -> Result<StatCurve> {
    Ok(cross_statistics(phi2, phi2, t_values, Denominator::ErosionVolume, 1.0)?.l2)
}

/// `K̂₁₂(t) = denom⁻¹ ∫_{W⊖t} Φ₂(B(x, t)) dΦ₁(x)`.
pub fn estimate_k12<T: Real>(
    phi1: &ScalarField<T>,
    phi2: &ScalarField<T>,
    t_values: &[f64],
    denom: Denominator,
) -> Result<StatCurve> {
    Ok(cross_statistics(phi1, phi2, t_values, denom, 1.0)?.k12)
}

/// `L̂₁₂(t) = ℓ(W⊖t)⁻¹ ∫_{W⊖t} exp(−Φ₂(B(x, t))) dΦ₁(x)`.
pub fn estimate_l12<T: Real>(phi1: &ScalarField<T>, phi2: &ScalarField<T>, t_values: &[f64]) -> Result<StatCurve> {
    Ok(cross_statistics(phi1, phi2, t_values, Denominator::ErosionVolume, 1.0)?.l12)
}

/// Pointwise `L̂₁₂ / L̂₂`, missing where `L̂₂ ≤ floor` or either input is missing.
pub fn estimate_j12(l12: &StatCurve, l2: &StatCurve, floor: f64) -> Result<StatCurve> {
    check_same_t(&l12.t, &l2.t)?;
    let values = l12
        .values
        .iter()
        .zip(&l2.values)
        .map(|(&a, &b)| match (a, b) {
            (Some(a), Some(b)) if b > floor => Some(a / b),
            _ => None,
        })
        .collect();
    Ok(StatCurve {
        values,
        replicate: l12.replicate,
        denominator: l12.denominator,
        ordering: l12.ordering,
        ..StatCurve::new(Stat::J12, l12.t.clone(), Vec::new())
    })
}

/// `F̂₂`, `Ĥ₁₂`, `T̂₁₂` and the void ratio from one pair of sets. Entries
/// whose conditioning set or denominator is empty are missing.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryCurves {
    pub f2: StatCurve,
    pub h12: StatCurve,
    pub t12: StatCurve,
    pub void_ratio: StatCurve,
}

struct HitCounts {
    region: usize,
    hit: usize,
    covered: usize,
    covered_hit: usize,
}

fn hit_counts(x1: &BinaryField, prefix2: &CountPrefix, t: f64) -> Result<HitCounts> {
    let spec = x1.spec();
    let region = erode(spec, t)?;
    let hits = hit_map(prefix2, &region, &BallMask::new(t, spec.h))?;
    let mut c = HitCounts { region: hits.len(), hit: 0, covered: 0, covered_hit: 0 };
    for ((i, j), h) in region.pixels().zip(hits) {
        let cov = x1.get(i, j);
        c.hit += h as usize;
        c.covered += cov as usize;
        c.covered_hit += (cov && h) as usize;
    }
    Ok(c)
}

pub fn binary_statistics(x1: &BinaryField, x2: &BinaryField, t_values: &[f64]) -> Result<BinaryCurves> {
    check_t_values(t_values)?;
    x1.spec().check_same(x2.spec(), "x2")?;
    let prefix2 = CountPrefix::new(x2);
    let counts: Vec<HitCounts> = t_values.par_iter().map(|&t| hit_counts(x1, &prefix2, t)).collect::<Result<_>>()?;
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let curve = |stat, f: &dyn Fn(&HitCounts) -> Option<f64>| {
        StatCurve::new(stat, t_values.to_vec(), counts.iter().map(f).collect())
    };
    Ok(BinaryCurves {
        f2: curve(Stat::F2, &|c| ratio(c.hit, c.region)),
        h12: curve(Stat::H12, &|c| ratio(c.covered_hit, c.covered)),
        t12: curve(Stat::T12, &|c| ratio(c.covered_hit, c.region)),
        void_ratio: curve(Stat::VoidRatio, &|c| {
            let conditional = ratio(c.covered - c.covered_hit, c.covered)?;
            let unconditional = ratio(c.region - c.hit, c.region)?;
            (unconditional > 0.0).then(|| conditional / unconditional)
        }),
    })
}

fn strict(curve: StatCurve, err: impl Fn(f64) -> Error) -> Result<StatCurve> {
    if let Some(k) = curve.values.iter().position(Option::is_none) {
        return Err(err(curve.t[k]));
    }
    Ok(curve)
}

/// Fraction of `W ⊖ t` whose `t`-ball hits `X₂`.
pub fn estimate_f2(x2: &BinaryField, t_values: &[f64]) -> Result<StatCurve> {
    Ok(binary_statistics(x2, x2, t_values)?.f2)
}

/// Fraction of the `X₁`-covered pixels of `W ⊖ t` whose `t`-ball hits `X₂`.
pub fn estimate_h12(x1: &BinaryField, x2: &BinaryField, t_values: &[f64]) -> Result<StatCurve> {
    strict(binary_statistics(x1, x2, t_values)?.h12, |t| Error::NoConditioningPixels { t })
}

/// `ℓ(W⊖t)⁻¹ ∫_{W⊖t} 1{x ∈ X₁} 1{X₂ ∩ B(x, t) ≠ ∅} dx`.
pub fn estimate_t12(x1: &BinaryField, x2: &BinaryField, t_values: &[f64]) -> Result<StatCurve> {
    Ok(binary_statistics(x1, x2, t_values)?.t12)
}

/// `P(X₂ ∩ B(x, t) = ∅ | x ∈ X₁) / P(X₂ ∩ B(x, t) = ∅)`, pooled over `W ⊖ t`.
pub fn estimate_void_ratio(x1: &BinaryField, x2: &BinaryField, t_values: &[f64]) -> Result<StatCurve> {
    strict(binary_statistics(x1, x2, t_values)?.void_ratio, |t| Error::ZeroDenominator { t })
}

/// Pointwise replicate summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub stat: Stat,
    pub ordering: Ordering,
    pub t: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Standard error of the mean.
    pub se: Vec<Option<f64>>,
    /// Number of non-missing replicate values per `t`.
    pub count: Vec<usize>,
    pub level: f64,
}

impl Envelope {
    pub fn contains(&self, k: usize, value: f64) -> bool {
        matches!((self.lower[k], self.upper[k]), (Some(lo), Some(hi)) if lo <= value && value <= hi)
    }

    /// Fraction of t points whose envelope contains `f(t)`.
    pub fn fraction_containing(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = (0..self.t.len()).filter(|&k| self.contains(k, f(self.t[k]))).count();
        n as f64 / self.t.len() as f64
    }

    /// Do the two envelopes intersect at index `k`?
    pub fn overlaps(&self, other: &Envelope, k: usize) -> bool {
        match (self.lower[k], self.upper[k], other.lower[k], other.upper[k]) {
            (Some(a), Some(b), Some(c), Some(d)) => a <= d && c <= b,
            _ => false,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise mean, `(q/2, 1 − q/2)` quantiles and standard error across
/// replicate curves. Missing replicate values are skipped; points with
/// fewer than two values are missing.
pub fn mc_envelope(curves: &[StatCurve], q: f64) -> Result<Envelope> {
    if curves.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: curves.len() });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("envelope level q = {q} must lie in (0, 1)")));
    }
    let first = &curves[0];
    for c in &curves[1..] {
        check_same_t(&first.t, &c.t)?;
    }
    let n = first.t.len();
    let mut env = Envelope {
        stat: first.stat,
        ordering: first.ordering,
        t: first.t.clone(),
        mean: vec![None; n],
        lower: vec![None; n],
        upper: vec![None; n],
        se: vec![None; n],
        count: vec![0; n],
        level: q,
    };
    for k in 0..n {
        let mut xs: Vec<f64> = curves.iter().filter_map(|c| c.values[k]).collect();
        env.count[k] = xs.len();
        if xs.len() < 2 {
            continue;
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        xs.sort_by(f64::total_cmp);
        env.mean[k] = Some(mean);
        env.se[k] = Some((var / m).sqrt());
        env.lower[k] = Some(quantile(&xs, q / 2.0).min(mean));
        env.upper[k] = Some(quantile(&xs, 1.0 - q / 2.0).max(mean));
    }
    Ok(env)
}

/// Ratio of replicate means `mean(num) / mean(den)` with its delta-method
/// standard error, per `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledRatio {
    pub t: Vec<f64>,
    pub value: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
}

pub fn pooled_ratio(num: &[StatCurve], den: &[StatCurve]) -> Result<PooledRatio> {
    if num.len() != den.len() || num.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: num.len().min(den.len()) });
    }
    for c in num.iter().chain(den) {
        check_same_t(&num[0].t, &c.t)?;
    }
    let n_t = num[0].t.len();
    let mut out = PooledRatio { t: num[0].t.clone(), value: vec![None; n_t], se: vec![None; n_t] };
    for k in 0..n_t {
        let pairs: Vec<(f64, f64)> =
            num.iter().zip(den).filter_map(|(a, b)| Some((a.values[k]?, b.values[k]?))).collect();
        if pairs.len() < 2 {
            continue;
        }
        let m = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / m, pairs.iter().map(|p| p.1).sum::<f64>() / m);
        if mb <= 0.0 {
            continue;
        }
        let r = ma / mb;
        let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
        for &(a, b) in &pairs {
            saa += (a - ma).powi(2);
            sab += (a - ma) * (b - mb);
            sbb += (b - mb).powi(2);
        }
        let var = (saa - 2.0 * r * sab + r * r * sbb) / (m - 1.0) / (m * mb * mb);
        out.value[k] = Some(r);
        out.se[k] = Some(var.max(0.0).sqrt());
    }
    Ok(out)
}

/// `t_k = t_max · k / steps` for `k = 1..=steps`.
pub fn t_grid(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return Err(Error::InvalidParameter(format!("t grid needs t_max > 0 and steps > 0, got {t_max}, {steps}")));
    }
    Ok((1..=steps).map(|k| t_max * k as f64 / steps as f64).collect())
}

/// Largest `t` for which `W ⊖ t` is non-empty on this grid.
pub fn max_erosion_t(spec: &GridSpec) -> f64 {
    0.5 * (spec.x_max - spec.x_min).min(spec.y_max - spec.y_min) - 0.5 * spec.h
}
