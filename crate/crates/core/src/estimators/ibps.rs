//! Interacting branching particle splitting.
//!
//! Continuous-time models are split along the event's axis: every particle
//! is simulated until it reaches the target, dies out or passes the horizon,
//! and stage `k` keeps the particles whose progress attains level `k`.
//! Replacement particles copy a survivor up to its hitting time of the level
//! and are re-simulated from there.
//!
//! The Reed-Frost chain is split in time: after each generation the
//! ensemble is selected with weights `1{cumulative infections >= level}`
//! times an optional potential, and the estimate is the unnormalised
//! Feynman-Kac estimator, which reduces to the product of survival fractions
//! for 0/1 weights.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use super::{particle_index, progress, stop_for, Diagnostics, Estimate};
use crate::error::{Error, Result};
use crate::events::{hitting_time, next_level, quantile_level, Axis, EventSpec, LevelSchedule};
use crate::models::{extend, rf_extend, simulate};
use crate::params::{ModelParams, ReedFrostParams};
use crate::path::{EpidemicPath, GenerationPath};
use crate::rng::{SeedSpec, SELECTION_PARTICLE};

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// Levels increasing to the event threshold.
    Fixed(Vec<f64>),
    /// Each level is the `⌈keep·N⌉`-th largest progress of the ensemble.
    Adaptive { keep: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Every particle of the next stage is drawn from the survivors in
    /// proportion to the weights and re-simulated beyond the level.
    Multinomial,
    /// Survivors are kept as they are; only killed particles are replaced
    /// by uniform draws among the survivors.
    KeepAll,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightRule {
    Indicator,
    /// `exp(α I_k)`
    PotentialV(f64),
    /// `exp(α (I_k - I_{k-1}))`
    PotentialDeltaV(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IbpsOptions {
    pub n: usize,
    pub schedule: Schedule,
    pub variant: Variant,
    pub weight: WeightRule,
    /// Re-run the whole ensemble up to this many times when every particle
    /// dies. `None` records the run as 0.
    pub restart_on_extinction: Option<u32>,
}

impl IbpsOptions {
    pub fn adaptive(n: usize, keep: f64, variant: Variant) -> Self {
        IbpsOptions {
            n,
            schedule: Schedule::Adaptive { keep },
            variant,
            weight: WeightRule::Indicator,
            restart_on_extinction: None,
        }
    }
}

/// Final ensemble, an empirical approximation of the law conditional on the
/// event.
#[derive(Clone, Debug, PartialEq)]
pub enum Conditional {
    Paths(Vec<EpidemicPath>),
    Generations(Vec<GenerationPath>),
}

impl Conditional {
    pub fn len(&self) -> usize {
        match self {
            Conditional::Paths(p) => p.len(),
            Conditional::Generations(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IbpsOutput {
    pub estimate: Estimate,
    pub conditional: Conditional,
    /// Levels used, in order.
    pub levels: Vec<f64>,
}

enum Attempt {
    Done(IbpsOutput),
    Extinct,
}

pub fn ibps_estimate(
    model: &ModelParams,
    spec: &EventSpec,
    opts: &IbpsOptions,
    seed: &SeedSpec,
) -> Result<IbpsOutput> {
    model.validate()?;
    spec.validate()?;
    if opts.n < 2 {
        return Err(Error::param("splitting needs at least two particles"));
    }
    if let Schedule::Adaptive { keep } = opts.schedule {
        if !(keep > 0.0 && keep < 1.0) {
            return Err(Error::param(format!("keep fraction {keep} not in (0, 1)")));
        }
    }
    if opts.variant == Variant::KeepAll && opts.weight != WeightRule::Indicator {
        return Err(Error::Unsupported(
            "potential weights with the keep-all variant".into(),
        ));
    }
    let tries = opts.restart_on_extinction.unwrap_or(0);
    for attempt in 0..=tries {
        let s = seed.with_restart(attempt);
        let outcome = match (model, spec) {
            (ModelParams::ReedFrost(p), EventSpec::CumulativeInfections { .. }) => {
                run_generations(p, spec, opts, &s)?
            }
            (ModelParams::ReedFrost(_), _) | (_, EventSpec::CumulativeInfections { .. }) => {
                return Err(Error::Unsupported(format!(
                    "{spec:?} for the {} model",
                    model.name()
                )))
            }
            (_, EventSpec::Duration { .. }) => {
                return Err(Error::Unsupported(
                    "duration events are split in time".into(),
                ))
            }
            _ => run_continuous(model, spec, opts, &s)?,
        };
        if let Attempt::Done(mut out) = outcome {
            out.estimate.diagnostics.restarts = u64::from(attempt);
            return Ok(out);
        }
    }
    let diagnostics = Diagnostics {
        extinct_ensembles: 1,
        restarts: u64::from(tries),
        ..Default::default()
    };
    Ok(IbpsOutput {
        estimate: Estimate::single(0.0, Vec::new(), diagnostics),
        conditional: match model {
            ModelParams::ReedFrost(_) => Conditional::Generations(Vec::new()),
            _ => Conditional::Paths(Vec::new()),
        },
        levels: Vec::new(),
    })
}

fn initial_value(model: &ModelParams, axis: Axis) -> f64 {
    match axis {
        Axis::Infectives | Axis::CumulativeInfections => model.i0() as f64,
        Axis::RemovedSince(_) | Axis::Time => 0.0,
    }
}

fn product(fractions: &[f64]) -> f64 {
    fractions.iter().product()
}

fn run_continuous(
    model: &ModelParams,
    spec: &EventSpec,
    opts: &IbpsOptions,
    seed: &SeedSpec,
) -> Result<Attempt> {
    if opts.weight != WeightRule::Indicator {
        return Err(Error::Unsupported(
            "potential weights are defined for generation-based models".into(),
        ));
    }
    let fixed = match &opts.schedule {
        Schedule::Fixed(levels) => Some(LevelSchedule::new(levels.clone(), spec)?),
        Schedule::Adaptive { .. } => None,
    };
    let n = opts.n;
    let axis = spec.axis();
    let target = spec.threshold();
    let stop = stop_for(spec);

    let stage0 = seed.with_stage(0);
    let mut paths = (0..n)
        .into_par_iter()
        .map(|i| simulate(model, stop, &stage0.with_particle(particle_index(i))))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = paths
        .iter()
        .map(|p| progress(p, spec))
        .collect::<Result<Vec<_>>>()?;

    let mut previous = initial_value(model, axis);
    let mut per_level = Vec::new();
    let mut levels = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for k in 0.. {
        let level = match (&fixed, &opts.schedule) {
            (Some(f), _) => f.levels()[k],
            (None, Schedule::Adaptive { keep }) => {
                match next_level(&scores, *keep, previous, target) {
                    Ok(l) => l,
                    Err(Error::NoProgress { .. }) => {
                        diagnostics.no_progress = 1;
                        let hits = scores.iter().filter(|&&s| s >= target).count();
                        per_level.push(hits as f64 / n as f64);
                        let value = product(&per_level);
                        return Ok(Attempt::Done(IbpsOutput {
                            estimate: Estimate::single(value, per_level, diagnostics),
                            conditional: Conditional::Paths(Vec::new()),
                            levels,
                        }));
                    }
                    Err(e) => return Err(e),
                }
            }
            (None, Schedule::Fixed(_)) => unreachable!(),
        };
        let survivors: Vec<usize> = (0..n).filter(|&i| scores[i] >= level).collect();
        per_level.push(survivors.len() as f64 / n as f64);
        levels.push(level);
        if survivors.is_empty() {
            return Ok(Attempt::Extinct);
        }
        if level >= target {
            let value = product(&per_level);
            let conditional = survivors.iter().map(|&i| paths[i].clone()).collect();
            return Ok(Attempt::Done(IbpsOutput {
                estimate: Estimate::single(value, per_level, diagnostics),
                conditional: Conditional::Paths(conditional),
                levels,
            }));
        }

        let stage = (k + 1) as u32;
        let parents = select_uniform(
            &survivors,
            &scores,
            level,
            n,
            opts.variant,
            &seed.with_stage(stage),
        );
        let stage_seed = seed.with_stage(stage);
        let old = &paths;
        let next = parents
            .par_iter()
            .enumerate()
            .map(|(i, parent)| -> Result<Option<EpidemicPath>> {
                let Some(j) = *parent else { return Ok(None) };
                let t_k = hitting_time(&old[j], axis, level)
                    .finite()
                    .expect("survivors reach the level");
                let mut p = old[j].truncated(t_k);
                extend(
                    model,
                    &mut p,
                    stop,
                    &stage_seed.with_particle(particle_index(i)),
                )?;
                Ok(Some(p))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in next.into_iter().enumerate() {
            if let Some(p) = p {
                scores[i] = progress(&p, spec)?;
                paths[i] = p;
            }
        }
        previous = level;
    }
    unreachable!()
}

/// Parent index for every slot that is re-simulated (`None`: kept as is).
fn select_uniform(
    survivors: &[usize],
    scores: &[f64],
    level: f64,
    n: usize,
    variant: Variant,
    stage: &SeedSpec,
) -> Vec<Option<usize>> {
    let mut rng = stage.with_particle(SELECTION_PARTICLE).rng();
    (0..n)
        .map(|i| match variant {
            Variant::KeepAll if scores[i] >= level => None,
            _ => Some(survivors[rng.index(survivors.len())]),
        })
        .collect()
}

fn run_generations(
    params: &ReedFrostParams,
    spec: &EventSpec,
    opts: &IbpsOptions,
    seed: &SeedSpec,
) -> Result<Attempt> {
    let EventSpec::CumulativeInfections { t, n_c } = *spec else {
        unreachable!()
    };
    let Schedule::Adaptive { keep } = opts.schedule else {
        return Err(Error::Unsupported(
            "generation-based splitting uses adaptive levels".into(),
        ));
    };
    let n = opts.n;
    let target = n_c as f64;
    let mut paths: Vec<GenerationPath> = vec![GenerationPath::start(params.s0, params.i0); n];
    // Σ ln(potential) along each particle's ancestral line.
    let mut log_potential = vec![0.0f64; n];
    let mut factor = 1.0;
    let mut per_level = Vec::new();
    let mut levels = Vec::new();

    let grow = |paths: &mut Vec<GenerationPath>, generation: usize| -> Result<()> {
        let stage = seed.with_stage(generation as u32);
        paths.par_iter_mut().enumerate().try_for_each(|(i, p)| {
            rf_extend(
                params,
                p,
                generation,
                &stage.with_particle(particle_index(i)),
            )
        })
    };
    if t >= 2 {
        grow(&mut paths, 1)?;
    }
    for k in 1..t {
        let scores: Vec<f64> = paths
            .iter()
            .map(|p| p.cumulative_infections(k + 1).unwrap() as f64)
            .collect();
        let level = quantile_level(&scores, keep)?.min(target);
        let potential = |p: &GenerationPath| match opts.weight {
            WeightRule::Indicator => 0.0,
            WeightRule::PotentialV(a) => a * p.i[k] as f64,
            WeightRule::PotentialDeltaV(a) => a * (p.i[k] as f64 - p.i[k - 1] as f64),
        };
        let log_g: Vec<f64> = paths.iter().map(potential).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if scores[i] >= level {
                    log_g[i].exp()
                } else {
                    0.0
                }
            })
            .collect();
        let survivors: Vec<usize> = (0..n).filter(|&i| scores[i] >= level).collect();
        per_level.push(survivors.len() as f64 / n as f64);
        levels.push(level);
        let mean_weight = weights.iter().sum::<f64>() / n as f64;
        if survivors.is_empty() || mean_weight == 0.0 {
            return Ok(Attempt::Extinct);
        }
        factor *= mean_weight;

        let mut rng = seed
            .with_stage(k as u32)
            .with_particle(SELECTION_PARTICLE)
            .rng();
        let parents: Vec<usize> = match opts.variant {
            Variant::Multinomial => {
                let dist = WeightedIndex::new(&weights)
                    .map_err(|e| Error::param(format!("selection weights: {e}")))?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            Variant::KeepAll => (0..n)
                .map(|i| {
                    if scores[i] >= level {
                        i
                    } else {
                        survivors[rng.index(survivors.len())]
                    }
                })
                .collect(),
        };
        paths = parents.iter().map(|&j| paths[j].clone()).collect();
        log_potential = parents
            .iter()
            .map(|&j| log_potential[j] + log_g[j])
            .collect();
        if k + 1 < t {
            grow(&mut paths, k + 1)?;
        }
    }

    let hit: Vec<bool> = paths
        .iter()
        .map(|p| p.cumulative_infections(t).unwrap() as f64 >= target)
        .collect();
    let terminal = (0..n)
        .filter(|&i| hit[i])
        .map(|i| (-log_potential[i]).exp())
        .sum::<f64>()
        / n as f64;
    let value = if opts.weight == WeightRule::Indicator {
        per_level.push(hit.iter().filter(|&&h| h).count() as f64 / n as f64);
        product(&per_level)
    } else {
        per_level.push(hit.iter().filter(|&&h| h).count() as f64 / n as f64);
        factor * terminal
    };
    let conditional = (0..n)
        .filter(|&i| hit[i])
        .map(|i| paths[i].clone())
        .collect();
    Ok(Attempt::Done(IbpsOutput {
        estimate: Estimate::single(value, per_level, Diagnostics::default()),
        conditional: Conditional::Generations(conditional),
        levels,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::cmc;
    use crate::params::SirParams;

    fn toy() -> ModelParams {
        ModelParams::Sir(SirParams::unscaled(0.12, 1.0, 9, 1))
    }

    #[test]
    fn single_level_equals_cmc_bitwise() {
        let spec = EventSpec::FinalSize { n_c: 6 };
        for r in 0..20 {
            let seed = SeedSpec::new(1).with_replication(r);
            let c = cmc(&toy(), &spec, 300, &seed).unwrap();
            for variant in [Variant::Multinomial, Variant::KeepAll] {
                let opts = IbpsOptions {
                    n: 300,
                    schedule: Schedule::Fixed(vec![6.0]),
                    variant,
                    weight: WeightRule::Indicator,
                    restart_on_extinction: None,
                };
                let e = ibps_estimate(&toy(), &spec, &opts, &seed).unwrap();
                assert_eq!(e.estimate.value.to_bits(), c.value.to_bits());
            }
        }
    }

    #[test]
    fn satisfied_first_level_reduces_exactly() {
        let spec = EventSpec::FinalSize { n_c: 5 };
        let seed = SeedSpec::new(2);
        let opts = |levels: Vec<f64>| IbpsOptions {
            n: 500,
            schedule: Schedule::Fixed(levels),
            variant: Variant::KeepAll,
            weight: WeightRule::Indicator,
            restart_on_extinction: None,
        };
        let two = ibps_estimate(&toy(), &spec, &opts(vec![1.0, 5.0]), &seed).unwrap();
        let one = ibps_estimate(&toy(), &spec, &opts(vec![5.0]), &seed).unwrap();
        assert_eq!(two.estimate.per_level[0], 1.0);
        assert_eq!(
            two.estimate.per_level[1].to_bits(),
            one.estimate.value.to_bits()
        );
        assert_eq!(two.estimate.value.to_bits(), one.estimate.value.to_bits());
    }

    #[test]
    fn estimate_is_product_of_fractions_and_sample_hits_target() {
        let spec = EventSpec::FinalSize { n_c: 10 };
        for variant in [Variant::Multinomial, Variant::KeepAll] {
            let out = ibps_estimate(
                &toy(),
                &spec,
                &IbpsOptions::adaptive(200, 0.2, variant),
                &SeedSpec::new(3),
            )
            .unwrap();
            let e = &out.estimate;
            assert!(e.per_level.iter().all(|p| (0.0..=1.0).contains(p)));
            assert_eq!(
                e.value.to_bits(),
                e.per_level.iter().product::<f64>().to_bits()
            );
            assert!(out.levels.windows(2).all(|w| w[0] < w[1]));
            let Conditional::Paths(paths) = &out.conditional else {
                panic!()
            };
            if e.value > 0.0 {
                assert!(!paths.is_empty());
            }
            assert!(paths.iter().all(|p| p.ever_infected() >= 10));
        }
    }

    #[test]
    fn unreachable_fixed_level_extinguishes_ensemble() {
        let m = ModelParams::Sir(SirParams::unscaled(0.0, 1.0, 9, 1));
        let spec = EventSpec::FinalSize { n_c: 3 };
        let mut opts = IbpsOptions {
            n: 10,
            schedule: Schedule::Fixed(vec![2.0, 3.0]),
            variant: Variant::Multinomial,
            weight: WeightRule::Indicator,
            restart_on_extinction: None,
        };
        let out = ibps_estimate(&m, &spec, &opts, &SeedSpec::new(4)).unwrap();
        assert_eq!(out.estimate.value, 0.0);
        assert_eq!(out.estimate.diagnostics.extinct_ensembles, 1);
        opts.restart_on_extinction = Some(3);
        let out = ibps_estimate(&m, &spec, &opts, &SeedSpec::new(4)).unwrap();
        assert_eq!(out.estimate.diagnostics.restarts, 3);
        assert_eq!(out.estimate.diagnostics.extinct_ensembles, 1);
    }

    #[test]
    fn potentials_with_zero_alpha_match_indicator() {
        let m = ModelParams::ReedFrost(ReedFrostParams::new(0.95, 30, 1).unwrap());
        let spec = EventSpec::CumulativeInfections { t: 6, n_c: 12 };
        let base = IbpsOptions::adaptive(200, 0.8, Variant::Multinomial);
        for w in [
            WeightRule::PotentialV(0.0),
            WeightRule::PotentialDeltaV(0.0),
        ] {
            let opts = IbpsOptions {
                weight: w,
                ..base.clone()
            };
            let a = ibps_estimate(&m, &spec, &opts, &SeedSpec::new(5)).unwrap();
            let b = ibps_estimate(&m, &spec, &base, &SeedSpec::new(5)).unwrap();
            assert!((a.estimate.value - b.estimate.value).abs() < 1e-12);
        }
    }
}
