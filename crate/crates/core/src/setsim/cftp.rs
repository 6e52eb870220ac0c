//! Dominating spatial birth–death process for dominated coupling from the
//! past.
//!
//! The dominating process is a multi-type Poisson birth–death process
//! (birth intensity `λ_c` per type, unit death rate) started in equilibrium
//! at time 0 and extended backwards in time by reversibility. Extending the
//! horizon keeps every event already generated, so forward passes from
//! successively earlier starts reuse the same randomness.

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use super::{poisson_count, uniform_in};
use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::seed::Rng;

#[derive(Clone, Copy, Debug)]
pub(crate) enum Event {
    /// Forward-time birth of a candidate point with a uniform mark.
    Birth { id: u64, comp: usize, pos: [f64; 2], mark: f64 },
    Death { id: u64 },
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub id: u64,
    pub comp: usize,
    pub pos: [f64; 2],
}

pub(crate) struct Dominating {
    rect: Rect,
    rates: Vec<f64>,
    alive: Vec<Candidate>,
    /// Events at decreasing times, from 0 back to the horizon.
    events: Vec<Event>,
    horizon: f64,
    next_id: u64,
}

impl Dominating {
    /// Equilibrium state at time 0: independent Poisson(`intensity_c`) per type.
    pub fn new(rect: Rect, intensities: &[f64], rng: &mut Rng) -> Self {
        let rates: Vec<f64> = intensities.iter().map(|l| l * rect.area()).collect();
        let mut alive = Vec::new();
        let mut next_id = 0;
        for (comp, &rate) in rates.iter().enumerate() {
            for _ in 0..poisson_count(rate, rng) {
                alive.push(Candidate { id: next_id, comp, pos: uniform_in(&rect, rng) });
                next_id += 1;
            }
        }
        Self { rect, rates, alive, events: Vec::new(), horizon: 0.0, next_id }
    }

    pub fn event_count(&self) -> u64 {
        self.events.len() as u64
    }

    /// Runs the reversed process from the current horizon back to `-to`.
    pub fn extend_to(&mut self, to: f64, max_events: u64, rng: &mut Rng) -> Result<()> {
        let total_birth: f64 = self.rates.iter().sum();
        let mut time = self.horizon;
        loop {
            let rate = total_birth + self.alive.len() as f64;
            if rate <= 0.0 {
                break;
            }
            time += Exp::new(rate).expect("positive rate").sample(rng);
            if time > to {
                break;
            }
            if self.events.len() as u64 >= max_events {
                return Err(Error::NonConvergence { events: self.events.len() as u64 });
            }
            if rng.random::<f64>() * rate < total_birth {
                // A point appearing in reversed time dies at this time going forward.
                let mut u = rng.random::<f64>() * total_birth;
                let mut comp = 0;
                while comp + 1 < self.rates.len() && u >= self.rates[comp] {
                    u -= self.rates[comp];
                    comp += 1;
                }
                let cand = Candidate { id: self.next_id, comp, pos: uniform_in(&self.rect, rng) };
                self.next_id += 1;
                self.alive.push(cand);
                self.events.push(Event::Death { id: cand.id });
            } else {
                let k = rng.random_range(0..self.alive.len());
                let cand = self.alive.swap_remove(k);
                let mark = rng.random::<f64>();
                self.events.push(Event::Birth { id: cand.id, comp: cand.comp, pos: cand.pos, mark });
            }
        }
        self.horizon = to;
        Ok(())
    }

    /// Dominating state at the current horizon.
    pub fn initial(&self) -> &[Candidate] {
        &self.alive
    }

    /// Events in forward time order.
    pub fn forward(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().rev()
    }
}

/// Doubles the backward horizon until `run` reports coalescence at time 0.
pub(crate) fn coupled_from_the_past<T>(
    dom: &mut Dominating,
    max_events: u64,
    rng: &mut Rng,
    mut run: impl FnMut(&Dominating) -> Option<T>,
) -> Result<T> {
    let mut horizon = 1.0;
    loop {
        dom.extend_to(horizon, max_events, rng)?;
        if let Some(state) = run(dom) {
            return Ok(state);
        }
        if dom.event_count() >= max_events {
            return Err(Error::NonConvergence { events: dom.event_count() });
        }
        horizon *= 2.0;
    }
}
