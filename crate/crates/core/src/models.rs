//! Experiment models: per-replicate realizations of the bivariate measures
//! and a replicate runner that turns them into estimator curves.
//!
//! Every replicate draws from its own seed streams, so a realization can be
//! regenerated in isolation. Plug-in coverage functions use this to make two
//! passes over the replicates without holding them all in memory.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{binary_statistics, cross_statistics, mc_envelope, Denominator, Envelope, Ordering, Stat, StatCurve};
use crate::grid::{BinaryField, GridSpec, ScalarField};
use crate::measure::{compound_measure, coverage_measure, plug_in_floor, random_field_measure, reweight, CompoundSpec, MeasurePair, P1Source};
use crate::oracles::{compound_k12, compound_laplace, germgrain_stats, loggauss_k12, OracleCurve, OracleMethod};
use crate::randfield::{exp_transform, thinning_weights, ExpCovariance, GaussianFieldSampler, MeanSurface};
use crate::seed::{SeedKey, Stream};
use crate::setsim::{sample_dual_wr, sample_poisson, sample_wr_mixture, union_balls, Component, PointPattern, Sampler, WrConfig};

/// Replicates realized concurrently per accumulation step of the plug-in pass.
const PLUG_IN_CHUNK: usize = 32;

/// How the coverage functions are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P1Mode {
    /// The model's closed form.
    Analytic,
    /// Pixelwise replicate mean of `ψᵢ`, floored.
    PlugIn,
    /// Mean of `ψᵢ` over all pixels and replicates, floored (stationary models).
    VolumeFraction,
}

/// Stationary Boolean model with disc grains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BooleanSpec {
    /// Germ intensity.
    pub lambda: f64,
    /// Grain radius.
    pub r: f64,
}

impl BooleanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite() && self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("boolean model needs lambda, r > 0, got {self:?}")));
        }
        Ok(())
    }

    /// Volume fraction `1 − exp(−λπr²)`.
    pub fn coverage(&self) -> f64 {
        1.0 - (-self.lambda * PI * self.r * self.r).exp()
    }
}

/// Gaussian field `Γ₀` with exponential covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub sigma2: f64,
    pub beta: f64,
    #[serde(default = "zero_mean")]
    pub mean: MeanSurface,
}

fn zero_mean() -> MeanSurface {
    MeanSurface::Constant { value: 0.0 }
}

impl GaussianSpec {
    pub fn covariance(&self) -> Result<ExpCovariance> {
        ExpCovariance::new(self.sigma2, self.beta)
    }
}

/// Widom–Rowlinson type germ-grain model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GermGrainSpec {
    pub beta1: f64,
    pub beta2: f64,
    /// Interaction distance.
    pub r: f64,
    /// Grain radius; half the interaction distance when absent.
    #[serde(default)]
    pub grain_radius: Option<f64>,
    #[serde(default)]
    pub sampler: Sampler,
}

impl GermGrainSpec {
    pub fn wr_config(&self) -> Result<WrConfig> {
        WrConfig::new(self.beta1, self.beta2, self.r, self.sampler)
    }

    pub fn grain(&self) -> f64 {
        self.grain_radius.unwrap_or(0.5 * self.r)
    }
}

/// The experiment models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Compound {
        law: crate::laws::LambdaLaw,
        #[serde(default = "unit_density")]
        nu: MeanSurface,
    },
    WrMixture(GermGrainSpec),
    DualWr(GermGrainSpec),
    /// Two independent Boolean models with the same parameters.
    BooleanPair {
        lambda: f64,
        r: f64,
    },
    /// `Ψᵢ = ∫_{Xᵢ} e^{Γ₀}` over independent Boolean models.
    LinkedField {
        boolean: BooleanSpec,
        field: GaussianSpec,
    },
    /// `Ψᵢ = ∫_{Xᵢ} rᵢ e^{Γ₀}` with `r₂ = 1 − r₁`.
    ThinningField {
        boolean: BooleanSpec,
        field: GaussianSpec,
        r1: MeanSurface,
    },
}

fn unit_density() -> MeanSurface {
    MeanSurface::Constant { value: 1.0 }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Compound { .. } => "compound",
            ModelSpec::WrMixture(_) => "wr-mixture",
            ModelSpec::DualWr(_) => "dual-wr",
            ModelSpec::BooleanPair { .. } => "boolean-pair",
            ModelSpec::LinkedField { .. } => "linked-field",
            ModelSpec::ThinningField { .. } => "thinning-field",
        }
    }

    /// Analytic where a closed form exists, otherwise the pooled volume fraction.
    pub fn default_p1_mode(&self) -> P1Mode {
        match self {
            ModelSpec::WrMixture(_) | ModelSpec::DualWr(_) => P1Mode::VolumeFraction,
            _ => P1Mode::Analytic,
        }
    }

    pub fn has_sets(&self) -> bool {
        !matches!(self, ModelSpec::Compound { .. })
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match *self {
            ModelSpec::Compound { law, nu } => CompoundSpec { law, nu }.validate(grid),
            ModelSpec::WrMixture(params) | ModelSpec::DualWr(params) => {
                params.wr_config()?;
                let g = params.grain();
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::InvalidParameter(format!("grain radius {g} must be positive")));
                }
                Ok(())
            }
            ModelSpec::BooleanPair { lambda, r } => BooleanSpec { lambda, r }.validate(),
            ModelSpec::LinkedField { boolean, field } => {
                boolean.validate()?;
                field.mean.validate()?;
                field.covariance().map(|_| ())
            }
            ModelSpec::ThinningField { boolean, field, r1 } => {
                boolean.validate()?;
                field.mean.validate()?;
                r1.validate()?;
                thinning_weights(grid, &r1)?;
                field.covariance().map(|_| ())
            }
        }
    }

    /// Oracle curves for both orderings on `t_values`.
    ///
    /// Every model with an oracle is exchangeable after reweighting, so the
    /// `21` curves repeat the `12` values.
    pub fn oracles(&self, t_values: &[f64]) -> Result<Vec<OracleCurve>> {
        let mut out = match *self {
            ModelSpec::Compound { law, .. } => {
                let [l2, l12, j12] = compound_laplace(&law, t_values, 2)?;
                vec![l2, l12, compound_k12(&law, t_values, 2)?, j12]
            }
            ModelSpec::BooleanPair { lambda, r } => {
                let (k, void) = germgrain_stats(lambda, lambda, r, t_values)?;
                let constant = |stat, v: f64| OracleCurve {
                    stat,
                    ordering: Ordering::OneTwo,
                    t: t_values.to_vec(),
                    values: vec![v; t_values.len()],
                    method: OracleMethod::ClosedForm,
                };
                let f2: Vec<f64> = t_values.iter().map(|&t| 1.0 - (-lambda * PI * (r + t).powi(2)).exp()).collect();
                let with = |stat, values: &Vec<f64>| OracleCurve { stat, values: values.clone(), ..constant(stat, 0.0) };
                vec![k, constant(Stat::J12, 1.0), with(Stat::F2, &f2), with(Stat::H12, &f2), void]
            }
            ModelSpec::LinkedField { field, .. } | ModelSpec::ThinningField { field, .. } => {
                vec![loggauss_k12(&field.covariance()?, t_values)?]
            }
            ModelSpec::WrMixture(_) | ModelSpec::DualWr(_) => {
                return Err(Error::NoOracle { model: self.name().into() })
            }
        };
        let swapped: Vec<OracleCurve> =
            out.iter().map(|c| OracleCurve { ordering: Ordering::TwoOne, ..c.clone() }).collect();
        out.extend(swapped);
        Ok(out)
    }
}

/// One replicate: the measure densities and, for set-based models, the sets
/// and germs behind them.
#[derive(Clone, Debug)]
pub struct Realization {
    pub replicate: u32,
    pub psi: (ScalarField<f64>, ScalarField<f64>),
    pub sets: Option<(BinaryField, BinaryField)>,
    pub points: Option<(PointPattern, PointPattern)>,
}

/// A model bound to a grid, with its field sampler and closed-form
/// coverage functions computed once.
#[derive(Debug)]
pub struct PreparedModel {
    spec: ModelSpec,
    grid: GridSpec,
    sampler: Option<GaussianFieldSampler>,
    weights: Option<(ScalarField<f64>, ScalarField<f64>)>,
    analytic: Option<(ScalarField<f64>, ScalarField<f64>)>,
}

fn lognormal_mean(spec: &GridSpec, field: &GaussianSpec, scale: f64) -> Result<ScalarField<f64>> {
    let half_var = 0.5 * field.sigma2;
    ScalarField::from_fn(*spec, |x, y| scale * (field.mean.eval(x, y) + half_var).exp())
}

impl PreparedModel {
    pub fn new(spec: ModelSpec, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        spec.validate(&grid)?;
        let constant = |c: f64| -> Result<_> { Ok((ScalarField::constant(grid, c)?, ScalarField::constant(grid, c)?)) };
        let (sampler, weights, analytic) = match spec {
            ModelSpec::Compound { law, nu } => {
                let (e1, e2) = law.means();
                let f = |c: f64| ScalarField::new(grid, nu.raster(&grid).into_iter().map(|v| c * v).collect());
                (None, None, Some((f(e1)?, f(e2)?)))
            }
            ModelSpec::WrMixture(_) | ModelSpec::DualWr(_) => (None, None, None),
            ModelSpec::BooleanPair { lambda, r } => (None, None, Some(constant(BooleanSpec { lambda, r }.coverage())?)),
            ModelSpec::LinkedField { boolean, field } => {
                let sampler = GaussianFieldSampler::new(&grid, field.covariance()?)?;
                let p = lognormal_mean(&grid, &field, boolean.coverage())?;
                (Some(sampler), None, Some((p.clone(), p)))
            }
            ModelSpec::ThinningField { boolean, field, r1 } => {
                let sampler = GaussianFieldSampler::new(&grid, field.covariance()?)?;
                let (w1, w2) = thinning_weights(&grid, &r1)?;
                let p = lognormal_mean(&grid, &field, boolean.coverage())?;
                let analytic = (p.zip_with(&w1, |a, b| a * b)?, p.zip_with(&w2, |a, b| a * b)?);
                (Some(sampler), Some((w1, w2)), Some(analytic))
            }
        };
        Ok(Self { spec, grid, sampler, weights, analytic })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Closed-form `(p₁(·, 1), p₁(·, 2))`, if the model has one.
    pub fn analytic_p1(&self) -> Option<&(ScalarField<f64>, ScalarField<f64>)> {
        self.analytic.as_ref()
    }

    /// Draws replicate `replicate` of the experiment seeded by `master`.
    pub fn realize(&self, master: u64, replicate: u32) -> Result<Realization> {
        self.realize_inner(master, replicate).map_err(|e| Error::Replicate { replicate, source: Box::new(e) })
    }

    fn realize_inner(&self, master: u64, replicate: u32) -> Result<Realization> {
        let key = |stream| SeedKey::new(master, replicate, stream);
        let grid = &self.grid;
        let boolean = |b: BooleanSpec| -> Result<(PointPattern, PointPattern)> {
            Ok((
                sample_poisson(grid, b.lambda, Component::One, key(Stream::Germs1))?,
                sample_poisson(grid, b.lambda, Component::Two, key(Stream::Germs2))?,
            ))
        };
        let from_sets = |points: (PointPattern, PointPattern), radius: f64| -> Result<Realization> {
            let sets = (union_balls(&points.0, radius, grid)?, union_balls(&points.1, radius, grid)?);
            Ok(Realization {
                replicate,
                psi: (coverage_measure(&sets.0), coverage_measure(&sets.1)),
                sets: Some(sets),
                points: Some(points),
            })
        };
        match self.spec {
            ModelSpec::Compound { law, nu } => {
                let m: MeasurePair<f64> = compound_measure(&CompoundSpec { law, nu }, key(Stream::Lambda), grid)?;
                Ok(Realization { replicate, psi: (m.psi1, m.psi2), sets: None, points: None })
            }
            ModelSpec::WrMixture(params) => {
                from_sets(sample_wr_mixture(&params.wr_config()?, grid, key(Stream::Sampler))?, params.grain())
            }
            ModelSpec::DualWr(params) => {
                from_sets(sample_dual_wr(&params.wr_config()?, grid, key(Stream::Sampler))?, params.grain())
            }
            ModelSpec::BooleanPair { lambda, r } => from_sets(boolean(BooleanSpec { lambda, r })?, r),
            ModelSpec::LinkedField { boolean: b, field } | ModelSpec::ThinningField { boolean: b, field, .. } => {
                let sampler = self.sampler.as_ref().expect("field models carry a sampler");
                let gamma0 = exp_transform(&sampler.sample(&field.mean, key(Stream::Field))?)?;
                let (g1, g2) = match &self.weights {
                    Some((w1, w2)) => (gamma0.zip_with(w1, |a, b| a * b)?, gamma0.zip_with(w2, |a, b| a * b)?),
                    None => (gamma0.clone(), gamma0),
                };
                let points = boolean(b)?;
                let sets = (union_balls(&points.0, b.r, grid)?, union_balls(&points.1, b.r, grid)?);
                let p1 = self.analytic.clone().expect("field models have an analytic p1");
                let m = random_field_measure(&g1, &g2, &sets.0, &sets.1, p1)?;
                Ok(Realization { replicate, psi: (m.psi1, m.psi2), sets: Some(sets), points: Some(points) })
            }
        }
    }

    /// Coverage functions for a run, scaled by `scale`.
    ///
    /// The plug-in modes realize every replicate once, accumulating in
    /// replicate order so the result does not depend on the thread count.
    pub fn resolve_p1(&self, mode: P1Mode, master: u64, replicates: u32, scale: f64) -> Result<CoverageFunctions> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("p1 scale {scale} must be positive")));
        }
        let (p1, p2, source) = match mode {
            P1Mode::Analytic => {
                let (a, b) = self.analytic.clone().ok_or_else(|| {
                    Error::InvalidParameter(format!("the {} model has no analytic coverage function", self.spec.name()))
                })?;
                (a, b, P1Source::Analytic)
            }
            P1Mode::PlugIn | P1Mode::VolumeFraction => {
                let needed = if mode == P1Mode::PlugIn { 2 } else { 1 };
                if replicates < needed {
                    return Err(Error::TooFewReplicates { needed: needed as usize, got: replicates as usize });
                }
                let (mut s1, mut s2) = self.psi_sums(master, replicates)?;
                let n = replicates as f64;
                let floor = plug_in_floor(replicates as usize);
                for s in [&mut s1, &mut s2] {
                    if mode == P1Mode::VolumeFraction {
                        let mean = s.iter().sum::<f64>() / s.len() as f64;
                        s.iter_mut().for_each(|v| *v = mean);
                    }
                    s.iter_mut().for_each(|v| *v = (*v / n).max(floor));
                }
                (ScalarField::new(self.grid, s1)?, ScalarField::new(self.grid, s2)?, P1Source::PlugIn)
            }
        };
        let scaled = |f: ScalarField<f64>| if scale == 1.0 { Ok(f) } else { f.map(|v| v * scale) };
        Ok(CoverageFunctions { p1: scaled(p1)?, p2: scaled(p2)?, source })
    }

    fn psi_sums(&self, master: u64, replicates: u32) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.len();
        let (mut s1, mut s2) = (vec![0.0; n], vec![0.0; n]);
        let ids: Vec<u32> = (0..replicates).collect();
        for chunk in ids.chunks(PLUG_IN_CHUNK) {
            let psis: Vec<_> = chunk.par_iter().map(|&r| self.realize(master, r).map(|x| x.psi)).collect::<Result<_>>()?;
            for (a, b) in psis {
                s1.iter_mut().zip(a.values()).for_each(|(s, v)| *s += v);
                s2.iter_mut().zip(b.values()).for_each(|(s, v)| *s += v);
            }
        }
        Ok((s1, s2))
    }

    /// The measure pair of a realization under the given coverage functions.
    pub fn measure(&self, real: &Realization, p1: &CoverageFunctions) -> Result<MeasurePair<f64>> {
        MeasurePair::new(real.psi.0.clone(), real.psi.1.clone(), p1.p1.clone(), p1.p2.clone(), p1.source)
    }
}

/// Coverage functions shared by all replicates of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageFunctions {
    pub p1: ScalarField<f64>,
    pub p2: ScalarField<f64>,
    pub source: P1Source,
}

/// Estimation settings of a replicate run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub replicates: u32,
    pub seed: u64,
    pub t: Vec<f64>,
    pub denominator: Denominator,
    /// `None` picks [`ModelSpec::default_p1_mode`].
    pub p1_mode: Option<P1Mode>,
    /// Multiplier applied to the coverage functions (a sensitivity knob).
    pub p1_scale: f64,
    pub j_floor: f64,
}

impl RunSpec {
    pub fn new(replicates: u32, seed: u64, t: Vec<f64>) -> Self {
        Self {
            replicates,
            seed,
            t,
            denominator: Denominator::default(),
            p1_mode: None,
            p1_scale: 1.0,
            j_floor: crate::estimators::J_FLOOR,
        }
    }
}

/// All curves of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateCurves {
    pub replicate: u32,
    pub curves: Vec<StatCurve>,
}

impl ReplicateCurves {
    pub fn get(&self, stat: Stat, ordering: Ordering) -> Option<&StatCurve> {
        self.curves.iter().find(|c| c.stat == stat && c.ordering == ordering)
    }
}

/// `L̂₂, L̂₁₂, K̂₁₂, Ĵ₁₂` for both orderings, followed by `F̂₂, Ĥ₁₂, T̂₁₂` and
/// the void ratio for both orderings when the sets are given.
pub fn realization_curves(
    m: &MeasurePair<f64>,
    sets: Option<(&BinaryField, &BinaryField)>,
    t_values: &[f64],
    denom: Denominator,
    j_floor: f64,
) -> Result<Vec<StatCurve>> {
    let (phi1, phi2) = reweight(m)?;
    let mut out = Vec::with_capacity(16);
    for (ordering, a, b) in [(Ordering::OneTwo, &phi1, &phi2), (Ordering::TwoOne, &phi2, &phi1)] {
        let c = cross_statistics(a, b, t_values, denom, 1.0)?;
        let j = c.j12(j_floor)?;
        out.extend([c.l2, c.l12, c.k12, j].map(|x| x.with_ordering(ordering)));
    }
    if let Some((x1, x2)) = sets {
        for (ordering, a, b) in [(Ordering::OneTwo, x1, x2), (Ordering::TwoOne, x2, x1)] {
            let c = binary_statistics(a, b, t_values)?;
            out.extend([c.f2, c.h12, c.t12, c.void_ratio].map(|x| x.with_ordering(ordering)));
        }
    }
    Ok(out)
}

/// Runs every replicate and returns their curves in replicate order.
pub fn run_replicates(model: &PreparedModel, run: &RunSpec) -> Result<Vec<ReplicateCurves>> {
    let mode = run.p1_mode.unwrap_or_else(|| model.spec.default_p1_mode());
    let p1 = model.resolve_p1(mode, run.seed, run.replicates, run.p1_scale)?;
    run_with_p1(model, run, &p1)
}

/// [`run_replicates`] with given coverage functions.
pub fn run_with_p1(model: &PreparedModel, run: &RunSpec, p1: &CoverageFunctions) -> Result<Vec<ReplicateCurves>> {
    crate::estimators::check_t_values(&run.t)?;
    (0..run.replicates)
        .into_par_iter()
        .map(|rep| {
            let real = model.realize(run.seed, rep)?;
            let m = model.measure(&real, p1)?;
            let sets = real.sets.as_ref().map(|(a, b)| (a, b));
            let curves = realization_curves(&m, sets, &run.t, run.denominator, run.j_floor)
                .map_err(|e| Error::Replicate { replicate: rep, source: Box::new(e) })?;
            Ok(ReplicateCurves { replicate: rep, curves: curves.into_iter().map(|c| c.with_replicate(rep)).collect() })
        })
        .collect()
}

/// Replicate curves of one statistic and ordering.
pub fn collect_curves(runs: &[ReplicateCurves], stat: Stat, ordering: Ordering) -> Vec<StatCurve> {
    runs.iter().filter_map(|r| r.get(stat, ordering).cloned()).collect()
}

/// Envelopes at level `q` of every statistic present in the runs, in the
/// order of the first replicate's curves.
pub fn envelopes(runs: &[ReplicateCurves], q: f64) -> Result<Vec<Envelope>> {
    let first = runs.first().ok_or(Error::TooFewReplicates { needed: 2, got: 0 })?;
    first.curves.iter().map(|c| mc_envelope(&collect_curves(runs, c.stat, c.ordering), q)).collect()
}
