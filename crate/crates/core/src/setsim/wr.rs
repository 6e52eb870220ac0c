//! Widom–Rowlinson mixture: density `β₁^|φ₁| β₂^|φ₂| 1{d(φ₁, φ₂) > r}`
//! with respect to two unit-rate Poisson processes.

use rand::Rng as _;

use super::cftp::{coupled_from_the_past, Dominating, Event};
use super::index::CellIndex;
use super::{uniform_in, Component, PointPattern, Sampler, WrConfig};
use crate::error::Result;
use crate::grid::{GridSpec, Rect};
use crate::seed::{Rng, SeedKey};

/// Birth–death Metropolis–Hastings chain for the mixture.
///
/// Each move picks birth or death with probability 1/2 and a component
/// uniformly. Births are uniform on the window and rejected outright if
/// they land within `r` of the other component; deaths remove a uniformly
/// chosen point. The hard-core constraint therefore holds in every state.
pub struct WrChain {
    cfg: WrConfig,
    rect: Rect,
    comps: [CellIndex; 2],
    next_id: u64,
    rng: Rng,
}

impl WrChain {
    pub fn new(cfg: WrConfig, rect: Rect, seed: SeedKey) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rect,
            comps: [CellIndex::new(rect, cfg.r), CellIndex::new(rect, cfg.r)],
            next_id: 0,
            rng: seed.rng(),
        })
    }

    fn beta(&self, c: usize) -> f64 {
        if c == 0 {
            self.cfg.beta1
        } else {
            self.cfg.beta2
        }
    }

    pub fn step(&mut self) {
        let area = self.rect.area();
        let c = self.rng.random_range(0..2usize);
        let n = self.comps[c].len();
        if self.rng.random::<bool>() {
            let u = uniform_in(&self.rect, &mut self.rng);
            let accept = (self.beta(c) * area / (n + 1) as f64).min(1.0);
            if self.rng.random::<f64>() < accept && !self.comps[1 - c].any_within(u, self.cfg.r) {
                self.comps[c].insert(self.next_id, u);
                self.next_id += 1;
            }
        } else if n > 0 {
            let slot = self.rng.random_range(0..n);
            let accept = (n as f64 / (self.beta(c) * area)).min(1.0);
            if self.rng.random::<f64>() < accept {
                self.comps[c].remove_slot(slot);
            }
        }
    }

    pub fn run(&mut self, moves: u64) {
        for _ in 0..moves {
            self.step();
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.comps[0].len(), self.comps[1].len())
    }

    /// Records `n` successive count pairs, `spacing` moves apart.
    pub fn sample_counts(&mut self, n: usize, spacing: u64) -> Vec<(usize, usize)> {
        (0..n)
            .map(|_| {
                self.run(spacing);
                self.counts()
            })
            .collect()
    }

    pub fn state(&self) -> (PointPattern, PointPattern) {
        (
            PointPattern { points: self.comps[0].points().to_vec(), component: Component::One, window: self.rect },
            PointPattern { points: self.comps[1].points().to_vec(), component: Component::Two, window: self.rect },
        )
    }
}

/// Samples the mixture on the margin-extended window.
pub fn sample_wr_mixture(cfg: &WrConfig, window: &GridSpec, seed: SeedKey) -> Result<(PointPattern, PointPattern)> {
    sample_on(cfg, &window.sim_window(), seed)
}

pub(crate) fn sample_on(cfg: &WrConfig, rect: &Rect, seed: SeedKey) -> Result<(PointPattern, PointPattern)> {
    cfg.validate()?;
    match cfg.sampler {
        Sampler::Mh { burn_in, .. } => {
            let mut chain = WrChain::new(*cfg, *rect, seed)?;
            chain.run(burn_in);
            Ok(chain.state())
        }
        Sampler::Cftp { max_events } => cftp(cfg, rect, max_events, &mut seed.rng()),
    }
}

/// Dominated CFTP with the order `(x₁, x₂) ≼ (y₁, y₂)` iff `x₁ ⊆ y₁` and
/// `x₂ ⊇ y₂`, under which both conditional intensities are monotone. The
/// upper process starts from the dominating type-1 points, the lower from
/// the dominating type-2 points.
fn cftp(cfg: &WrConfig, rect: &Rect, max_events: u64, rng: &mut Rng) -> Result<(PointPattern, PointPattern)> {
    let mut dom = Dominating::new(*rect, &[cfg.beta1, cfg.beta2], rng);
    let r = cfg.r;
    coupled_from_the_past(&mut dom, max_events, rng, |dom| {
        let mut upper = [CellIndex::new(*rect, r), CellIndex::new(*rect, r)];
        let mut lower = [CellIndex::new(*rect, r), CellIndex::new(*rect, r)];
        for c in dom.initial() {
            match c.comp {
                0 => upper[0].insert(c.id, c.pos),
                _ => lower[1].insert(c.id, c.pos),
            }
        }
        for ev in dom.forward() {
            match *ev {
                Event::Birth { id, comp, pos, .. } => {
                    let other = 1 - comp;
                    if !upper[other].any_within(pos, r) {
                        upper[comp].insert(id, pos);
                    }
                    if !lower[other].any_within(pos, r) {
                        lower[comp].insert(id, pos);
                    }
                }
                Event::Death { id } => {
                    for set in upper.iter_mut().chain(lower.iter_mut()) {
                        set.remove_id(id);
                    }
                }
            }
        }
        let coalesced = upper[0].len() == lower[0].len() && upper[1].len() == lower[1].len();
        coalesced.then(|| {
            (
                PointPattern { points: upper[0].points().to_vec(), component: Component::One, window: *rect },
                PointPattern { points: upper[1].points().to_vec(), component: Component::Two, window: *rect },
            )
        })
    })
}
