//! Point processes and germ-grain random closed sets: Poisson processes,
//! Boolean models and the Widom–Rowlinson mixture with its dual.

mod cftp;
mod index;
mod wr;
mod area;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{within, BinaryField, GridSpec, Rect};
use crate::seed::{Rng, SeedKey};

pub use area::{sample_area_interaction, AreaInteraction};
pub use wr::{sample_wr_mixture, WrChain};

/// Default number of Metropolis–Hastings moves before a state is returned.
pub const DEFAULT_BURN_IN: u64 = 100_000;
/// Default cap on dominating-process events generated by coupling from the past.
pub const DEFAULT_CFTP_EVENTS: u64 = 1 << 20;
/// Coverage-lattice resolution for area-interaction increments.
pub const AREA_NODES_PER_RADIUS: usize = 8;

/// Component label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    One = 1,
    Two = 2,
}

/// Finite planar point pattern of one component.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPattern {
    pub points: Vec<[f64; 2]>,
    pub component: Component,
    pub window: Rect,
}

impl PointPattern {
    pub fn empty(component: Component, window: Rect) -> Self {
        Self { points: Vec::new(), component, window }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smallest distance between a point of `a` and a point of `b`
/// (`+∞` if either is empty).
pub fn cross_distance(a: &PointPattern, b: &PointPattern) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.points {
        for q in &b.points {
            best = best.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    best
}

/// Sampler used for the Gibbs components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sampler {
    /// Birth–death Metropolis–Hastings: `burn_in` moves from the empty
    /// state, and `sweeps` moves between successive recorded states when a
    /// chain is sampled.
    Mh { burn_in: u64, sweeps: u64 },
    /// Dominated coupling from the past, giving up after `max_events`
    /// dominating-process events.
    Cftp {
        #[serde(default = "default_cftp_events")]
        max_events: u64,
    },
}

fn default_cftp_events() -> u64 {
    DEFAULT_CFTP_EVENTS
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Mh { burn_in: DEFAULT_BURN_IN, sweeps: 1_000 }
    }
}

/// Parameters of the Widom–Rowlinson mixture and its dual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub r: f64,
    #[serde(default)]
    pub sampler: Sampler,
}

impl WrConfig {
    pub fn new(beta1: f64, beta2: f64, r: f64, sampler: Sampler) -> Result<Self> {
        let c = Self { beta1, beta2, r, sampler };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("r", self.r)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        match self.sampler {
            Sampler::Mh { burn_in, sweeps } if burn_in == 0 || sweeps == 0 => {
                Err(Error::InvalidParameter("MH burn_in and sweeps must be positive".into()))
            }
            Sampler::Cftp { max_events: 0 } => Err(Error::InvalidParameter("CFTP max_events must be positive".into())),
            _ => Ok(()),
        }
    }
}

pub(crate) fn uniform_in(rect: &Rect, rng: &mut Rng) -> [f64; 2] {
    [
        rect.x0 + rng.random::<f64>() * rect.width(),
        rect.y0 + rng.random::<f64>() * rect.height(),
    ]
}

pub(crate) fn poisson_count(mean: f64, rng: &mut Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

pub(crate) fn poisson_in(rect: &Rect, intensity: f64, component: Component, rng: &mut Rng) -> PointPattern {
    let n = poisson_count(intensity * rect.area(), rng);
    let points = (0..n).map(|_| uniform_in(rect, rng)).collect();
    PointPattern { points, component, window: *rect }
}

/// Homogeneous Poisson process on the margin-extended window.
pub fn sample_poisson(window: &GridSpec, intensity: f64, component: Component, seed: SeedKey) -> Result<PointPattern> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity {intensity} must be finite and >= 0")));
    }
    Ok(poisson_in(&window.sim_window(), intensity, component, &mut seed.rng()))
}

/// Rasterizes `⋃ B(x, radius)` over the pattern: a pixel is set iff its
/// center lies within `radius` of some point. Points in the margin count.
pub fn union_balls(pattern: &PointPattern, radius: f64, spec: &GridSpec) -> Result<BinaryField> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("grain radius {radius} must be positive")));
    }
    let mut out = BinaryField::filled(*spec, false);
    let (nx, ny, h) = (spec.nx() as i64, spec.ny() as i64, spec.h);
    for &[px, py] in &pattern.points {
        let i0 = (((px - radius - spec.x_min) / h - 0.5).floor() as i64).max(0);
        let i1 = (((px + radius - spec.x_min) / h - 0.5).ceil() as i64).min(nx - 1);
        let j0 = (((py - radius - spec.y_min) / h - 0.5).floor() as i64).max(0);
        let j1 = (((py + radius - spec.y_min) / h - 0.5).ceil() as i64).min(ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let [cx, cy] = spec.center(i as usize, j as usize);
                if within((cx - px).powi(2) + (cy - py).powi(2), radius) {
                    let k = spec.index(i as usize, j as usize);
                    out.values_mut()[k] = true;
                }
            }
        }
    }
    Ok(out)
}

/// Dual Widom–Rowlinson mixture: component 1 from the area-interaction
/// process with activity `beta1` and `γ = exp(-beta2)`, then component 2
/// as Poisson(`beta2`) points kept iff within `r` of a component-1 point.
pub fn sample_dual_wr(cfg: &WrConfig, window: &GridSpec, seed: SeedKey) -> Result<(PointPattern, PointPattern)> {
    cfg.validate()?;
    let rect = window.sim_window();
    let model = AreaInteraction { beta: cfg.beta1, log_gamma: -cfg.beta2, r: cfg.r };
    let mut rng = seed.rng();
    let first = area::sample_with(&model, &rect, &cfg.sampler, &mut rng)?;
    let candidates = poisson_in(&rect, cfg.beta2, Component::Two, &mut rng);
    let mut idx = index::CellIndex::new(rect, cfg.r);
    for (k, &p) in first.points.iter().enumerate() {
        idx.insert(k as u64, p);
    }
    let points = candidates.points.into_iter().filter(|&p| idx.any_within(p, cfg.r)).collect();
    Ok((first, PointPattern { points, component: Component::Two, window: rect }))
}
