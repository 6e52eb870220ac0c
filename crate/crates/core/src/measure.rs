//! Realized bivariate random measures `Ψ = (Ψ₁, Ψ₂)` with their coverage
//! functions `p₁(·, i)`, and the reweighted measure `Φᵢ = Ψᵢ / p₁(·, i)`.
//!
//! Every measure here has a Lebesgue density on the grid, so a measure is
//! stored as a [`ScalarField`] of densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryField, GridSpec, ScalarField};
use crate::laws::LambdaLaw;
use crate::randfield::MeanSurface;
use crate::scalar::Real;
use crate::seed::SeedKey;

/// Smallest admissible coverage-function value.
pub const P1_MIN: f64 = 1e-12;

/// Where the coverage functions of a [`MeasurePair`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P1Source {
    Analytic,
    PlugIn,
}

/// Densities of `Ψ₁, Ψ₂` and of `p₁(·, 1), p₁(·, 2)` on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePair<T> {
    pub psi1: ScalarField<T>,
    pub psi2: ScalarField<T>,
    pub p1_1: ScalarField<T>,
    pub p1_2: ScalarField<T>,
    pub source: P1Source,
}

fn check_p1<T: Real>(p1: &ScalarField<T>) -> Result<()> {
    match p1.values().iter().position(|v| v.as_f64().is_nan() || v.as_f64() < P1_MIN) {
        Some(pixel) => Err(Error::DegenerateP1 { pixel, value: p1.values()[pixel].as_f64() }),
        None => Ok(()),
    }
}

impl<T: Real> MeasurePair<T> {
    /// Validates grids, non-negativity of `Ψ` and positivity of `p₁`.
    pub fn new(
        psi1: ScalarField<T>,
        psi2: ScalarField<T>,
        p1_1: ScalarField<T>,
        p1_2: ScalarField<T>,
        source: P1Source,
    ) -> Result<Self> {
        let spec = psi1.spec();
        for (f, what) in [(&psi2, "psi2"), (&p1_1, "p1_1"), (&p1_2, "p1_2")] {
            spec.check_same(f.spec(), what)?;
        }
        for (f, what) in [(&psi1, "psi1"), (&psi2, "psi2"), (&p1_1, "p1_1"), (&p1_2, "p1_2")] {
            if f.is_signed() {
                return Err(Error::InvalidField(format!("{what} is a raw signed field")));
            }
        }
        check_p1(&p1_1)?;
        check_p1(&p1_2)?;
        Ok(Self { psi1, psi2, p1_1, p1_2, source })
    }

    pub fn spec(&self) -> &GridSpec {
        self.psi1.spec()
    }

    /// Same `Ψ` with the coverage functions replaced.
    pub fn with_p1(self, p1_1: ScalarField<T>, p1_2: ScalarField<T>, source: P1Source) -> Result<Self> {
        Self::new(self.psi1, self.psi2, p1_1, p1_2, source)
    }

    /// The pair with components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            psi1: self.psi2.clone(),
            psi2: self.psi1.clone(),
            p1_1: self.p1_2.clone(),
            p1_2: self.p1_1.clone(),
            source: self.source,
        }
    }
}

/// Lebesgue density of `B ↦ ℓ(X ∩ B)`: the indicator of `X`.
pub fn coverage_measure<T: Real>(x: &BinaryField) -> ScalarField<T> {
    x.to_field()
}

/// Compound model `Ψ = (Λ₁ ν, Λ₂ ν)` with a density `f_ν` bounded below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundSpec {
    pub law: LambdaLaw,
    #[serde(default = "unit_density")]
    pub nu: MeanSurface,
}

fn unit_density() -> MeanSurface {
    MeanSurface::Constant { value: 1.0 }
}

impl CompoundSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        self.law.validate()?;
        self.nu.validate()?;
        let (lo, _) = self.nu.bounds(&grid.window());
        if lo.is_nan() || lo <= 0.0 {
            return Err(Error::InvalidParameter(format!("nu density has infimum {lo} on the window")));
        }
        Ok(())
    }
}

/// One compound realization: a single `(Λ₁, Λ₂)` draw, `ψᵢ = Λᵢ f_ν` and
/// the analytic `p₁(·, i) = E(Λᵢ) f_ν`.
pub fn compound_measure<T: Real>(spec: &CompoundSpec, seed: SeedKey, grid: &GridSpec) -> Result<MeasurePair<T>> {
    spec.validate(grid)?;
    let (l1, l2) = spec.law.sample(&mut seed.rng());
    let (e1, e2) = spec.law.means();
    let nu = spec.nu.raster(grid);
    let scaled = |c: f64| ScalarField::new(*grid, nu.iter().map(|&v| T::of(c * v)).collect());
    MeasurePair::new(scaled(l1)?, scaled(l2)?, scaled(e1)?, scaled(e2)?, P1Source::Analytic)
}

/// Random-field model `ψᵢ = Γᵢ · 1{x ∈ Xᵢ}` with analytic coverage functions.
pub fn random_field_measure<T: Real>(
    gamma1: &ScalarField<T>,
    gamma2: &ScalarField<T>,
    x1: &BinaryField,
    x2: &BinaryField,
    p1: (ScalarField<T>, ScalarField<T>),
) -> Result<MeasurePair<T>> {
    let spec = gamma1.spec();
    spec.check_same(gamma2.spec(), "gamma2")?;
    spec.check_same(x1.spec(), "x1")?;
    spec.check_same(x2.spec(), "x2")?;
    let mask = |g: &ScalarField<T>, x: &BinaryField| -> Result<ScalarField<T>> {
        if g.is_signed() || g.min() <= T::zero() {
            return Err(Error::InvalidField("gamma fields must be strictly positive".into()));
        }
        let v = g.values().iter().zip(x.values()).map(|(&g, &c)| if c { g } else { T::zero() }).collect();
        ScalarField::new(*spec, v)
    };
    MeasurePair::new(mask(gamma1, x1)?, mask(gamma2, x2)?, p1.0, p1.1, P1Source::Analytic)
}

/// Reweighted densities `ψᵢ / p₁(·, i)`.
pub fn reweight<T: Real>(m: &MeasurePair<T>) -> Result<(ScalarField<T>, ScalarField<T>)> {
    check_p1(&m.p1_1)?;
    check_p1(&m.p1_2)?;
    Ok((m.psi1.zip_with(&m.p1_1, |a, b| a / b)?, m.psi2.zip_with(&m.p1_2, |a, b| a / b)?))
}

/// Floor applied to plug-in coverage functions built from `n` replicates.
pub fn plug_in_floor(n: usize) -> f64 {
    1e-6f64.max(1.0 / (10.0 * n as f64))
}

fn check_replicates<T: Real>(replicates: &[ScalarField<T>]) -> Result<GridSpec> {
    if replicates.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: replicates.len() });
    }
    let spec = *replicates[0].spec();
    for r in &replicates[1..] {
        spec.check_same(r.spec(), "plug-in replicate")?;
    }
    Ok(spec)
}

/// Pixelwise replicate mean floored at [`plug_in_floor`].
pub fn plug_in_p1<T: Real>(replicates: &[ScalarField<T>]) -> Result<ScalarField<T>> {
    let spec = check_replicates(replicates)?;
    let mut acc = vec![0.0f64; spec.len()];
    for r in replicates {
        for (a, v) in acc.iter_mut().zip(r.values()) {
            *a += v.as_f64();
        }
    }
    let (n, floor) = (replicates.len() as f64, plug_in_floor(replicates.len()));
    ScalarField::new(spec, acc.into_iter().map(|a| T::of((a / n).max(floor))).collect())
}

/// Spatially constant plug-in: the mean over all pixels and replicates,
/// floored at [`plug_in_floor`]. Appropriate for stationary models.
pub fn plug_in_p1_constant<T: Real>(replicates: &[ScalarField<T>]) -> Result<ScalarField<T>> {
    let spec = check_replicates(replicates)?;
    let total: f64 = replicates.iter().map(|r| r.values().iter().map(|v| v.as_f64()).sum::<f64>()).sum();
    let mean = total / (replicates.len() * spec.len()) as f64;
    ScalarField::constant(spec, T::of(mean.max(plug_in_floor(replicates.len()))))
}
