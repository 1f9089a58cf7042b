//! Markovian SIR jump process.
//!
//! The sampler gives every infective its own exponential removal clock,
//! drawn in order of infection from lane 0, and infects the next susceptible
//! once the accumulated infection pressure crosses the next of the ordered
//! susceptible thresholds, whose spacings are drawn from lane 1. This has
//! the law of the competing-clock process (all clocks are memoryless) and
//! couples runs with different `λ` monotonically.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{StopRule, EVENT_CAP};
use crate::error::{Error, Result};
use crate::params::SirParams;
use crate::path::{CompartmentState, EpidemicPath, EventKind};
use crate::rng::SeedSpec;

/// `(infection_rate, removal_rate)` in the given state.
pub fn sir_rates(state: CompartmentState, params: &SirParams) -> (f64, f64) {
    let i = state.i as f64;
    (params.contact() * state.s as f64 * i, params.gamma * i)
}

pub fn sir_simulate(params: &SirParams, stop: StopRule, seed: &SeedSpec) -> Result<EpidemicPath> {
    let mut path = EpidemicPath::new(params.initial());
    sir_extend(params, &mut path, stop, seed)?;
    Ok(path)
}

/// Min-heap entry for removal clocks.
#[derive(PartialEq)]
struct Clock(f64);

impl Eq for Clock {}

impl Ord for Clock {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Continues `path` from its horizon until the stop rule or extinction.
pub fn sir_extend(
    params: &SirParams,
    path: &mut EpidemicPath,
    stop: StopRule,
    seed: &SeedSpec,
) -> Result<()> {
    params.validate()?;
    stop.validate()?;
    let horizon = stop.horizon();
    let mut t = path.horizon();
    if path.is_absorbed() || t >= horizon || stop.reached(path)? {
        return Ok(());
    }
    let mut clocks = seed.lane(0);
    let mut gaps = seed.lane(1);
    let kappa = params.contact();
    let st = path.current_state();
    let (mut s, mut i) = (st.s, st.i);

    let mut removals: BinaryHeap<Clock> = (0..i)
        .map(|_| Clock(t + clocks.exponential(params.gamma)))
        .collect();
    let mut next_gap = |s: u64| {
        if s > 0 {
            gaps.exponential(1.0) / s as f64
        } else {
            f64::INFINITY
        }
    };
    // Pressure still needed before the next infection.
    let mut need = next_gap(s);

    loop {
        let pressure_rate = kappa * i as f64;
        let t_inf = if pressure_rate > 0.0 {
            t + need / pressure_rate
        } else {
            f64::INFINITY
        };
        let t_rem = removals.peek().map_or(f64::INFINITY, |c| c.0);
        let next = t_inf.min(t_rem);
        if next > horizon {
            path.extend_horizon(horizon);
            return Ok(());
        }
        if t_inf < t_rem {
            path.push(t_inf, EventKind::Infection)?;
            s -= 1;
            i += 1;
            removals.push(Clock(t_inf + clocks.exponential(params.gamma)));
            need = next_gap(s);
        } else {
            removals.pop();
            if need.is_finite() {
                need = (need - pressure_rate * (t_rem - t)).max(0.0);
            }
            path.push(t_rem, EventKind::Removal)?;
            i -= 1;
        }
        t = next;
        if i == 0 {
            return Ok(());
        }
        if path.events().len() as u64 >= EVENT_CAP {
            return Err(Error::EventCapExceeded { cap: EVENT_CAP });
        }
        if stop.reached(path)? {
            return Ok(());
        }
    }
}
