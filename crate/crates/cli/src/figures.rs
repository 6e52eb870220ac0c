//! Built-in figure experiments.

use std::collections::BTreeMap;

use cvst::models::{BooleanSpec, GaussianSpec, GermGrainSpec, ModelSpec};
use cvst::randfield::MeanSurface;
use cvst::setsim::Sampler;

use crate::config::{ExperimentConfig, GridConfig, OutputConfig, RunConfig};

/// Replicates of a figure run unless overridden.
pub const DEFAULT_REPLICATES: u32 = 100;
pub const DEFAULT_T_MAX: f64 = 2.0;
pub const DEFAULT_T_STEPS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Widom–Rowlinson mixture, β₁ = β₂ = 1, r = 1.
    #[value(name = "WR")]
    Wr,
    /// Dual Widom–Rowlinson mixture, β₁ = β₂ = 1/4, r = 1.
    #[value(name = "dualWR")]
    DualWr,
    /// Log-Gaussian field with mean (x + y)/10 seen through independent
    /// Boolean models.
    #[value(name = "boolean-linked")]
    BooleanLinked,
    /// Thinning field with r₁(x, y) = y/20 over the same Boolean models.
    #[value(name = "thinning")]
    Thinning,
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::Wr => "WR",
            Figure::DualWr => "dualWR",
            Figure::BooleanLinked => "boolean-linked",
            Figure::Thinning => "thinning",
        }
    }

    pub fn model(&self) -> ModelSpec {
        let wr = |beta| GermGrainSpec { beta1: beta, beta2: beta, r: 1.0, grain_radius: None, sampler: Sampler::default() };
        let boolean = BooleanSpec { lambda: 0.5, r: 0.5 };
        let field = |mean| GaussianSpec { sigma2: 1.0, beta: 0.8, mean };
        match self {
            Figure::Wr => ModelSpec::WrMixture(wr(1.0)),
            Figure::DualWr => ModelSpec::DualWr(wr(0.25)),
            Figure::BooleanLinked => {
                ModelSpec::LinkedField { boolean, field: field(MeanSurface::Planar { scale: 10.0 }) }
            }
            Figure::Thinning => ModelSpec::ThinningField {
                boolean,
                field: field(MeanSurface::Constant { value: 0.0 }),
                r1: MeanSurface::Ramp { scale: 20.0 },
            },
        }
    }

    /// The figure's config on the standard window.
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model(),
            grid: GridConfig::default(),
            run: RunConfig {
                replicates: DEFAULT_REPLICATES,
                t_max: DEFAULT_T_MAX,
                t_steps: DEFAULT_T_STEPS,
                ..RunConfig::default()
            },
            output: OutputConfig::default(),
            compare: Default::default(),
        }
    }

    /// The tool-chosen settings of a run, for the manifest.
    pub fn defaults(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("replicates".to_string(), cfg.run.replicates.to_string()),
            ("t_max".to_string(), cfg.run.t_max.to_string()),
            ("t_steps".to_string(), cfg.run.t_steps.to_string()),
            ("h".to_string(), cfg.grid.h.to_string()),
            ("seed".to_string(), cfg.run.seed.to_string()),
            ("p1".to_string(), format!("{:?}", cfg.p1_mode())),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_configs_validate_and_round_trip() {
        for f in [Figure::Wr, Figure::DualWr, Figure::BooleanLinked, Figure::Thinning] {
            let c = f.config();
            c.validate().unwrap();
            let back = ExperimentConfig::parse(&c.to_toml(), f.name()).unwrap();
            assert_eq!(back, c);
        }
    }
}
