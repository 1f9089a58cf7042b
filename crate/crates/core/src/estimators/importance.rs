//! Importance sampling with exact likelihood ratios.

use super::{occurred, particle_index, stop_for, Diagnostics, Estimate, LOG_RATIO_LIMIT};
use crate::error::{Error, Result};
use crate::events::{indicator_generations, EventSpec};
use crate::models::ln_choose;
use crate::models::{rf_simulate, sir_simulate};
use crate::params::{ModelParams, ReedFrostParams, Scaling, SirParams};
use crate::path::{CompartmentState, EpidemicPath, EventKind, GenerationPath};
use crate::rng::SeedSpec;

/// Parameters of the instrumental (sampling) distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Instrumental {
    Sir { lambda: f64, gamma: f64 },
    ReedFrost { q: f64 },
}

impl Instrumental {
    /// The model's own parameters.
    pub fn of(model: &ModelParams) -> Result<Self> {
        match model {
            ModelParams::Sir(p) => Ok(Instrumental::Sir {
                lambda: p.lambda,
                gamma: p.gamma,
            }),
            ModelParams::ReedFrost(p) => Ok(Instrumental::ReedFrost { q: p.q }),
            ModelParams::Hiv(_) => Err(Error::Unsupported(
                "importance sampling for the contact-tracing model".into(),
            )),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            Instrumental::Sir { lambda, gamma } => {
                lambda > 0.0 && gamma > 0.0 && lambda.is_finite() && gamma.is_finite()
            }
            Instrumental::ReedFrost { q } => q > 0.0 && q < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!(
                "instrumental parameters {self:?} must be positive (q in (0, 1))"
            )))
        }
    }
}

/// Sufficient statistics of an SIR path for its likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SirStats {
    pub infections: u64,
    pub removals: u64,
    /// `∫ S I ds`, divided by `n` under mass action.
    pub contact_integral: f64,
    /// `∫ I ds`.
    pub infective_integral: f64,
}

impl SirStats {
    /// Statistics over `[0, end]`, where `end` is the horizon of a path that
    /// is still active and the extinction time otherwise.
    pub fn of(path: &EpidemicPath, params: &SirParams) -> Self {
        let end = if path.horizon().is_finite() {
            path.horizon()
        } else {
            path.end_time()
        };
        let mut st = SirStats::default();
        let mut si = 0.0;
        let mut accrue = |state: CompartmentState, dt: f64, st: &mut SirStats| {
            si += state.s as f64 * state.i as f64 * dt;
            st.infective_integral += state.i as f64 * dt;
        };
        let (mut state, mut t) = (path.initial(), 0.0);
        for e in path.events() {
            accrue(state, e.time - t, &mut st);
            match e.kind {
                EventKind::Infection => st.infections += 1,
                _ => st.removals += 1,
            }
            (state, t) = (e.state_after, e.time);
        }
        if end > t {
            accrue(state, end - t, &mut st);
        }
        st.contact_integral = match params.scaling {
            Scaling::MassAction => si / params.n,
            Scaling::Unscaled => si,
        };
        st
    }
}

fn count_log(count: u64, num: f64, den: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * (num / den).ln()
    }
}

/// `ln φ` for a path with statistics `stats`, nominal rates `base` and
/// instrumental rates `instr` (both `(λ, γ)`).
pub fn sir_log_ratio(stats: &SirStats, base: (f64, f64), instr: (f64, f64)) -> f64 {
    let (l, g) = base;
    let (ln, gn) = instr;
    -((l - ln) * stats.contact_integral + (g - gn) * stats.infective_integral)
        + count_log(stats.infections, l, ln)
        + count_log(stats.removals, g, gn)
}

/// Likelihood ratio of a path simulated under `instr` against `base`.
pub fn sir_importance_ratio(
    path: &EpidemicPath,
    base: &SirParams,
    instr: (f64, f64),
) -> Result<f64> {
    Instrumental::Sir {
        lambda: instr.0,
        gamma: instr.1,
    }
    .validate()?;
    let stats = SirStats::of(path, base);
    Ok(sir_log_ratio(&stats, (base.lambda, base.gamma), instr).exp())
}

/// Log likelihood of a Reed-Frost trajectory under escape probability `q`;
/// `-inf` if the trajectory is impossible.
pub fn rf_log_likelihood(path: &GenerationPath, q: f64) -> f64 {
    let mut ll = 0.0;
    for t in 0..path.len().saturating_sub(1) {
        let (s, i, new) = (path.s[t], path.i[t], path.i[t + 1]);
        if i == 0 || s == 0 || new > s {
            if new > 0 {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        let log_escape = i as f64 * q.ln();
        if new > 0 {
            if log_escape >= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += new as f64 * (-log_escape.exp_m1()).ln();
        }
        ll += ln_choose(s, new) + (s - new) as f64 * log_escape;
    }
    ll
}

/// Pooled sufficient statistics of Reed-Frost transitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct RfStats {
    /// `(i_t, i_{t+1})` for every transition with `i_t > 0`.
    pub infections: Vec<(u64, u64)>,
    /// `Σ (s_t - i_{t+1}) i_t`.
    pub escapes: f64,
}

impl RfStats {
    pub fn of(path: &GenerationPath) -> Self {
        let mut st = RfStats::default();
        for t in 0..path.len().saturating_sub(1) {
            let (s, i, new) = (path.s[t], path.i[t], path.i[t + 1]);
            if i > 0 && s > 0 {
                st.infections.push((i, new));
                st.escapes += (s - new) as f64 * i as f64;
            }
        }
        st
    }
}

/// One path under instrumental parameters.
pub(crate) struct Sample {
    pub log_ratio: f64,
    pub hit: bool,
    pub stats: SampleStats,
}

pub(crate) enum SampleStats {
    Sir(SirStats),
    ReedFrost(RfStats),
}

pub(crate) fn draw(
    model: &ModelParams,
    spec: &EventSpec,
    instr: &Instrumental,
    seed: &SeedSpec,
) -> Result<Sample> {
    match (model, instr) {
        (ModelParams::Sir(p), Instrumental::Sir { lambda, gamma }) => {
            if spec.is_discrete() {
                return Err(Error::Unsupported(format!("{spec:?} for the SIR model")));
            }
            let sampler = p.with_rates(*lambda, *gamma);
            let path = sir_simulate(&sampler, stop_for(spec), seed)?;
            let stats = SirStats::of(&path, p);
            Ok(Sample {
                log_ratio: sir_log_ratio(&stats, (p.lambda, p.gamma), (*lambda, *gamma)),
                hit: occurred(&path, spec)?,
                stats: SampleStats::Sir(stats),
            })
        }
        (ModelParams::ReedFrost(p), Instrumental::ReedFrost { q }) => {
            let EventSpec::CumulativeInfections { t, .. } = *spec else {
                return Err(Error::Unsupported(format!(
                    "{spec:?} for the Reed-Frost model"
                )));
            };
            let sampler = ReedFrostParams { q: *q, ..*p };
            let path = rf_simulate(&sampler, t - 1, seed)?;
            Ok(Sample {
                log_ratio: rf_log_likelihood(&path, p.q) - rf_log_likelihood(&path, *q),
                hit: indicator_generations(&path, spec)?,
                stats: SampleStats::ReedFrost(RfStats::of(&path)),
            })
        }
        _ => Err(Error::Unsupported(format!(
            "instrumental {instr:?} for the {} model",
            model.name()
        ))),
    }
}

/// Fixed importance sampling: mean of `φ · 1{event}` over `n` paths
/// simulated under `instr`.
pub fn importance_sampling(
    model: &ModelParams,
    spec: &EventSpec,
    n: usize,
    instr: &Instrumental,
    seed: &SeedSpec,
) -> Result<Estimate> {
    model.validate()?;
    spec.validate()?;
    instr.validate()?;
    if n == 0 {
        return Err(Error::param("importance sampling needs at least one path"));
    }
    let mut sum = 0.0;
    let mut diagnostics = Diagnostics::default();
    for i in 0..n {
        let s = draw(model, spec, instr, &seed.with_particle(particle_index(i)))?;
        if s.log_ratio.abs() > LOG_RATIO_LIMIT && s.log_ratio.is_finite() {
            diagnostics.likelihood_overflow = 1;
        }
        if s.hit {
            sum += s.log_ratio.exp();
        }
    }
    Ok(Estimate::single(sum / n as f64, Vec::new(), diagnostics))
}
