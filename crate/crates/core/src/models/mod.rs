//! Exact samplers for the Reed-Frost chain, the Markovian SIR process and
//! the contact-tracing model.

mod hiv;
mod reed_frost;
mod sir;

pub use hiv::{hiv_extend, hiv_rates, hiv_simulate};
pub(crate) use reed_frost::ln_choose;
pub use reed_frost::{rf_extend, rf_simulate, rf_step, rf_step_pmf};
pub use sir::{sir_extend, sir_rates, sir_simulate};

use crate::error::{Error, Result};
use crate::events::Axis;
use crate::params::ModelParams;
use crate::path::EpidemicPath;
use crate::rng::SeedSpec;

/// Hard cap on the number of events in one path.
pub const EVENT_CAP: u64 = 100_000_000;

/// When a continuous-time sampler stops. Every rule also stops at
/// extinction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    Extinction,
    /// Simulate up to and including time `t`.
    Horizon(f64),
    /// Stop at the first event after which the axis value reaches `level`,
    /// or at `horizon` (which may be `+inf`).
    FirstPassage {
        axis: Axis,
        level: f64,
        horizon: f64,
    },
}

impl StopRule {
    pub(crate) fn horizon(&self) -> f64 {
        match *self {
            StopRule::Extinction => f64::INFINITY,
            StopRule::Horizon(t) => t,
            StopRule::FirstPassage { horizon, .. } => horizon,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.horizon().is_nan() || self.horizon() < 0.0 {
            return Err(Error::param(format!(
                "stop rule horizon {} must be >= 0",
                self.horizon()
            )));
        }
        if let StopRule::FirstPassage {
            axis: Axis::Time, ..
        } = self
        {
            return Err(Error::Unsupported(
                "first passage on the time axis; use a horizon".into(),
            ));
        }
        Ok(())
    }

    /// Whether the recorded path already satisfies the passage condition.
    pub(crate) fn reached(&self, path: &EpidemicPath) -> Result<bool> {
        match *self {
            StopRule::FirstPassage { axis, level, .. } => Ok(axis.value_at_end(path)? >= level),
            _ => Ok(false),
        }
    }
}

/// Samples a continuous-time path of the model from its initial state.
pub fn simulate(model: &ModelParams, stop: StopRule, seed: &SeedSpec) -> Result<EpidemicPath> {
    match model {
        ModelParams::Sir(p) => sir_simulate(p, stop, seed),
        ModelParams::Hiv(p) => hiv_simulate(p, stop, seed),
        ModelParams::ReedFrost(_) => Err(Error::Unsupported(
            "the Reed-Frost chain evolves in generations; use rf_simulate".into(),
        )),
    }
}

/// Continues `path` from its horizon with fresh draws from `seed`.
pub fn extend(
    model: &ModelParams,
    path: &mut EpidemicPath,
    stop: StopRule,
    seed: &SeedSpec,
) -> Result<()> {
    match model {
        ModelParams::Sir(p) => sir_extend(p, path, stop, seed),
        ModelParams::Hiv(p) => hiv_extend(p, path, stop, seed),
        ModelParams::ReedFrost(_) => Err(Error::Unsupported(
            "the Reed-Frost chain evolves in generations; use rf_extend".into(),
        )),
    }
}
