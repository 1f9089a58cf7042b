//! Estimators of rare-event probabilities.
//!
//! Every estimator performs one run from a [`SeedSpec`] whose replication
//! index is fixed by the caller; particle and stage indices are assigned
//! here. [`Estimate::aggregate`] combines independent runs.

mod ce;
mod cmc;
mod ibps;
mod importance;
mod temporal;

pub use ce::{ce_estimate, CeOutput};
pub use cmc::cmc;
pub use ibps::{
    ibps_estimate, Conditional, IbpsOptions, IbpsOutput, Schedule, Variant, WeightRule,
};
pub use importance::{
    importance_sampling, rf_log_likelihood, sir_importance_ratio, sir_log_ratio, Instrumental,
    SirStats,
};
pub use temporal::{temporal_split_estimate, TemporalOptions, TimeGrid};

use crate::error::Result;
use crate::events::{self, EventSpec};
use crate::models::StopRule;
use crate::path::EpidemicPath;
use crate::stats;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Splitting runs in which no particle survived a stage.
    pub extinct_ensembles: u64,
    /// Runs whose estimate is exactly zero.
    pub zero_runs: u64,
    /// Cross-entropy iterations in which every weight was zero.
    pub zero_weight_iterations: u64,
    /// Runs in which some log likelihood ratio exceeded 700 in magnitude.
    pub likelihood_overflow: u64,
    /// Adaptive splitting runs stopped because no score exceeded the level.
    pub no_progress: u64,
    /// Restarts after ensemble extinction.
    pub restarts: u64,
}

impl Diagnostics {
    fn add(&mut self, o: &Diagnostics) {
        self.extinct_ensembles += o.extinct_ensembles;
        self.zero_runs += o.zero_runs;
        self.zero_weight_iterations += o.zero_weight_iterations;
        self.likelihood_overflow += o.likelihood_overflow;
        self.no_progress += o.no_progress;
        self.restarts += o.restarts;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sample standard deviation of the per-run values (0 for one run).
    pub std_error: f64,
    /// Survival fraction of each splitting stage, averaged over runs that
    /// reached the stage.
    pub per_level: Vec<f64>,
    pub replications: usize,
    pub diagnostics: Diagnostics,
    /// Per-run values, in replication order.
    pub values: Vec<f64>,
}

impl Estimate {
    pub(crate) fn single(value: f64, per_level: Vec<f64>, mut diagnostics: Diagnostics) -> Self {
        diagnostics.zero_runs = u64::from(value == 0.0);
        Estimate {
            value,
            std_error: 0.0,
            per_level,
            replications: 1,
            diagnostics,
            values: vec![value],
        }
    }

    /// Mean and sample standard deviation of independent runs.
    pub fn aggregate(runs: &[Estimate]) -> Estimate {
        let values: Vec<f64> = runs.iter().flat_map(|r| r.values.iter().copied()).collect();
        let mut diagnostics = Diagnostics::default();
        let depth = runs.iter().map(|r| r.per_level.len()).max().unwrap_or(0);
        let mut sums = vec![(0.0, 0usize); depth];
        for r in runs {
            diagnostics.add(&r.diagnostics);
            for (slot, p) in sums.iter_mut().zip(&r.per_level) {
                slot.0 += p;
                slot.1 += 1;
            }
        }
        Estimate {
            value: stats::mean(&values),
            std_error: stats::sample_sd(&values),
            per_level: sums.iter().map(|(s, n)| s / *n as f64).collect(),
            replications: values.len(),
            diagnostics,
            values,
        }
    }

    /// Standard error of the mean value.
    pub fn sem(&self) -> f64 {
        self.std_error / (self.replications as f64).sqrt()
    }
}

/// Stop rule under which a path determines the event, stopping as soon as
/// the target is reached.
pub(crate) fn stop_for(spec: &EventSpec) -> StopRule {
    match *spec {
        EventSpec::Duration { t } => StopRule::Horizon(t),
        _ => StopRule::FirstPassage {
            axis: spec.axis(),
            level: spec.threshold(),
            horizon: spec.horizon(),
        },
    }
}

/// Progress toward the event of a path simulated under [`stop_for`].
pub(crate) fn progress(path: &EpidemicPath, spec: &EventSpec) -> Result<f64> {
    match spec {
        EventSpec::Duration { .. } => events::score(path, spec),
        _ => Ok(events::peak(path, spec.axis(), spec.horizon())),
    }
}

pub(crate) fn occurred(path: &EpidemicPath, spec: &EventSpec) -> Result<bool> {
    match spec {
        EventSpec::Duration { t } => Ok(path.extinction_time().exceeds(*t)),
        _ => Ok(progress(path, spec)? >= spec.threshold()),
    }
}

/// Log likelihood ratios beyond this magnitude are flagged.
pub(crate) const LOG_RATIO_LIMIT: f64 = 700.0;

fn particle_index(i: usize) -> u32 {
    u32::try_from(i).expect("particle index exceeds u32")
}
