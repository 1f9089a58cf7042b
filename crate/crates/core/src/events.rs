//! Rare-event specifications, their evaluation on paths, and splitting levels.

use crate::error::{Error, Result};
use crate::path::{EpidemicPath, GenerationPath, StoppingTime};

/// A rare event `{τ_A <= 𝒯}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventSpec {
    /// `{τ > t}`: the epidemic is still active at time `t`.
    Duration { t: f64 },
    /// `{R(τ) >= n_c}`: at least `n_c` individuals ever infected.
    FinalSize { n_c: u64 },
    /// `{sup_{s <= t} I(s) >= n_i}`.
    Incidence { t: f64, n_i: u64 },
    /// `{R(t + u) - R(t) >= n_r}`.
    DiagnosesIncrement { t: f64, u: f64, n_r: u64 },
    /// Reed-Frost: `{Σ_{k < t} I_k >= n_c}`.
    CumulativeInfections { t: usize, n_c: u64 },
}

/// Quantity along which splitting levels are placed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    /// Current number of infectives `I(t)`.
    Infectives,
    /// Removals since the given time: `R(t) - R(since)` (0 before `since`).
    RemovedSince(f64),
    /// Number ever infected, `i0 + s0 - S(t)`.
    CumulativeInfections,
    Time,
}

impl EventSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EventSpec::Duration { t } => t >= 0.0 && t.is_finite(),
            EventSpec::FinalSize { n_c } => n_c >= 1,
            EventSpec::Incidence { t, n_i } => t > 0.0 && t.is_finite() && n_i >= 1,
            EventSpec::DiagnosesIncrement { t, u, n_r } => {
                t >= 0.0 && t.is_finite() && u > 0.0 && u.is_finite() && n_r >= 1
            }
            EventSpec::CumulativeInfections { t, n_c } => t >= 1 && n_c >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("malformed event {self:?}")))
        }
    }

    pub fn axis(&self) -> Axis {
        match *self {
            EventSpec::Duration { .. } => Axis::Time,
            EventSpec::FinalSize { .. } | EventSpec::CumulativeInfections { .. } => {
                Axis::CumulativeInfections
            }
            EventSpec::Incidence { .. } => Axis::Infectives,
            EventSpec::DiagnosesIncrement { t, .. } => Axis::RemovedSince(t),
        }
    }

    /// Target level on [`EventSpec::axis`].
    pub fn threshold(&self) -> f64 {
        match *self {
            EventSpec::Duration { t } => t,
            EventSpec::FinalSize { n_c } | EventSpec::CumulativeInfections { n_c, .. } => {
                n_c as f64
            }
            EventSpec::Incidence { n_i, .. } => n_i as f64,
            EventSpec::DiagnosesIncrement { n_r, .. } => n_r as f64,
        }
    }

    /// Deterministic horizon of a continuous-time event; `+inf` when the
    /// horizon is the extinction time.
    pub fn horizon(&self) -> f64 {
        match *self {
            EventSpec::Duration { t } | EventSpec::Incidence { t, .. } => t,
            EventSpec::FinalSize { .. } => f64::INFINITY,
            EventSpec::DiagnosesIncrement { t, u, .. } => t + u,
            EventSpec::CumulativeInfections { .. } => f64::NAN,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, EventSpec::CumulativeInfections { .. })
    }
}

fn require_horizon(path: &EpidemicPath, needed: f64) -> Result<()> {
    if path.horizon() >= needed {
        Ok(())
    } else {
        Err(Error::NotSimulated {
            requested: needed,
            horizon: path.horizon(),
        })
    }
}

impl Axis {
    /// Axis value at the end of the recorded path.
    pub fn value_at_end(&self, path: &EpidemicPath) -> Result<f64> {
        let st = path.current_state();
        Ok(match *self {
            Axis::Infectives => st.i as f64,
            Axis::CumulativeInfections => path.ever_infected() as f64,
            Axis::RemovedSince(since) => {
                if path.end_time() <= since {
                    0.0
                } else {
                    (st.r - path.state_at(since)?.r) as f64
                }
            }
            Axis::Time => return Err(Error::Unsupported("first passage on the time axis".into())),
        })
    }

    fn value_after(&self, path: &EpidemicPath, k: usize, base_r: Option<u64>) -> f64 {
        let st = if k == 0 {
            path.initial()
        } else {
            path.events()[k - 1].state_after
        };
        match *self {
            Axis::Infectives => st.i as f64,
            Axis::CumulativeInfections => (path.initial().i + path.initial().s - st.s) as f64,
            Axis::RemovedSince(since) => match base_r {
                Some(b) if k > 0 && path.events()[k - 1].time > since => (st.r - b) as f64,
                _ => 0.0,
            },
            Axis::Time => f64::NAN,
        }
    }
}

/// Largest axis value attained by events at times `<= until` (including the
/// initial state).
pub fn peak(path: &EpidemicPath, axis: Axis, until: f64) -> f64 {
    let base_r = match axis {
        Axis::RemovedSince(since) => path.state_at(since).ok().map(|s| s.r),
        _ => None,
    };
    let n = path.events_until(until);
    match axis {
        Axis::Infectives => (0..=n)
            .map(|k| axis.value_after(path, k, base_r))
            .fold(f64::NEG_INFINITY, f64::max),
        // Monotone along the path.
        _ => axis.value_after(path, n, base_r),
    }
}

/// Progress of a path toward the event: sup of `I` on `[0, t]` for
/// incidence, ever infected for final size, `min(τ, t)` for duration, and
/// the removal increment over the window for diagnoses.
pub fn score(path: &EpidemicPath, spec: &EventSpec) -> Result<f64> {
    match *spec {
        EventSpec::Duration { t } => {
            require_horizon(path, t)?;
            Ok(match path.extinction_time() {
                StoppingTime::Finite(tau) if tau <= t => tau,
                _ => t,
            })
        }
        EventSpec::FinalSize { .. } => {
            require_horizon(path, f64::INFINITY)?;
            Ok(path.ever_infected() as f64)
        }
        EventSpec::Incidence { t, .. } => {
            require_horizon(path, t)?;
            let n = path.events_until(t);
            let peak = path.events()[..n]
                .iter()
                .map(|e| e.state_after.i)
                .fold(path.initial().i, u64::max);
            Ok(peak as f64)
        }
        EventSpec::DiagnosesIncrement { t, u, .. } => {
            let end = path.state_at(t + u)?;
            let start = path.state_at(t)?;
            Ok((end.r - start.r) as f64)
        }
        EventSpec::CumulativeInfections { .. } => Err(Error::Unsupported(
            "generation events are scored on Reed-Frost paths".into(),
        )),
    }
}

/// Whether the event occurs on the path.
pub fn indicator(path: &EpidemicPath, spec: &EventSpec) -> Result<bool> {
    match *spec {
        EventSpec::Duration { t } => {
            require_horizon(path, t)?;
            Ok(path.extinction_time().exceeds(t))
        }
        _ => Ok(score(path, spec)? >= spec.threshold()),
    }
}

/// `Σ_{k < t} I_k` on a Reed-Frost path.
pub fn score_generations(path: &GenerationPath, spec: &EventSpec) -> Result<f64> {
    match *spec {
        EventSpec::CumulativeInfections { t, .. } => path
            .cumulative_infections(t)
            .map(|v| v as f64)
            .ok_or(Error::NotSimulated {
                requested: t as f64,
                horizon: path.len() as f64 - 1.0,
            }),
        _ => Err(Error::Unsupported(format!("{spec:?} on a Reed-Frost path"))),
    }
}

pub fn indicator_generations(path: &GenerationPath, spec: &EventSpec) -> Result<bool> {
    Ok(score_generations(path, spec)? >= spec.threshold())
}

/// First time at which the axis quantity reaches `level`; 0 if the initial
/// state already does. On the time axis the level itself is returned while
/// the epidemic is still active then.
pub fn hitting_time(path: &EpidemicPath, axis: Axis, level: f64) -> StoppingTime {
    if let Axis::Time = axis {
        return if path.extinction_time().exceeds(level) && path.horizon() >= level {
            StoppingTime::Finite(level)
        } else {
            StoppingTime::Infinite
        };
    }
    let base_r = match axis {
        Axis::RemovedSince(since) => path.state_at(since).ok().map(|s| s.r),
        _ => None,
    };
    (0..=path.events().len())
        .find(|&k| axis.value_after(path, k, base_r) >= level)
        .map_or(StoppingTime::Infinite, |k| {
            StoppingTime::Finite(if k == 0 {
                0.0
            } else {
                path.events()[k - 1].time
            })
        })
}

/// Number of paths an adaptive stage aims to keep: `⌈keep·N⌉`, at least 1.
pub fn keep_count(n: usize, keep_fraction: f64) -> usize {
    ((keep_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// The `⌈keep·N⌉`-th largest score. Ties are kept as a multiset, so more
/// paths than intended may attain the returned level.
pub fn quantile_level(scores: &[f64], keep_fraction: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::param("no scores to rank"));
    }
    if !(keep_fraction > 0.0 && keep_fraction < 1.0) {
        return Err(Error::param(format!(
            "keep fraction {keep_fraction} not in (0, 1)"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[keep_count(scores.len(), keep_fraction) - 1])
}

/// Next adaptive level: the empirical quantile capped at `target`. If the
/// quantile does not exceed `previous`, the smallest score above `previous`
/// is used instead; when no score exceeds it the ensemble cannot progress.
pub fn next_level(scores: &[f64], keep_fraction: f64, previous: f64, target: f64) -> Result<f64> {
    let q = quantile_level(scores, keep_fraction)?.min(target);
    if q > previous {
        return Ok(q);
    }
    scores
        .iter()
        .copied()
        .filter(|&s| s > previous)
        .min_by(f64::total_cmp)
        .map(|s| s.min(target))
        .ok_or(Error::NoProgress { level: previous })
}

/// Fixed splitting levels.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSchedule {
    levels: Vec<f64>,
    axis: Axis,
}

impl LevelSchedule {
    /// Levels must increase strictly and end at the event's target.
    pub fn new(levels: Vec<f64>, spec: &EventSpec) -> Result<Self> {
        if levels.is_empty()
            || levels
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::param(
                "levels must be non-empty and strictly increasing",
            ));
        }
        if *levels.last().unwrap() != spec.threshold() {
            return Err(Error::param(format!(
                "last level {} must equal the event threshold {}",
                levels.last().unwrap(),
                spec.threshold()
            )));
        }
        Ok(LevelSchedule {
            levels,
            axis: spec.axis(),
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }
}
