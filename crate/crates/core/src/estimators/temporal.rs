//! Splitting in time for `P{τ > T}`, with `τ` the extinction time.

use rayon::prelude::*;

use super::{particle_index, Diagnostics, Estimate};
use crate::error::{Error, Result};
use crate::models::{extend, simulate, StopRule};
use crate::params::ModelParams;
use crate::path::EpidemicPath;
use crate::rng::{SeedSpec, SELECTION_PARTICLE};

/// Stage cap for the adaptive grid.
pub const MAX_STAGES: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub enum TimeGrid {
    /// Intermediate times `0 < t_1 < … < t_K < T`; a trailing `T` is
    /// accepted and ignored.
    Fixed(Vec<f64>),
    /// Each stage keeps the `keep_count` longest-lived paths and branches
    /// the others from the next-shortest extinction time.
    Adaptive { keep_count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalOptions {
    pub n: usize,
    pub grid: TimeGrid,
    /// Re-run the ensemble up to this many times when every path dies
    /// before a grid time.
    pub restart_on_extinction: Option<u32>,
}

fn alive_after(path: &EpidemicPath, t: f64) -> bool {
    path.extinction_time().exceeds(t)
}

fn score(path: &EpidemicPath, t: f64) -> f64 {
    path.extinction_time()
        .finite()
        .unwrap_or(f64::INFINITY)
        .min(t)
}

pub fn temporal_split_estimate(
    model: &ModelParams,
    t: f64,
    opts: &TemporalOptions,
    seed: &SeedSpec,
) -> Result<Estimate> {
    model.validate()?;
    if matches!(model, ModelParams::ReedFrost(_)) {
        return Err(Error::Unsupported(
            "time splitting for the Reed-Frost chain".into(),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(format!("horizon {t} must be finite and >= 0")));
    }
    if opts.n == 0 {
        return Err(Error::param("time splitting needs at least one particle"));
    }
    match &opts.grid {
        TimeGrid::Fixed(grid) => {
            let grid = match grid.split_last() {
                Some((&last, rest)) if last == t => rest,
                _ => grid.as_slice(),
            };
            let mut prev = 0.0;
            for &g in grid {
                if !(g > prev && g < t) {
                    return Err(Error::param(format!(
                        "grid {grid:?} must increase strictly within (0, {t})"
                    )));
                }
                prev = g;
            }
            let tries = opts.restart_on_extinction.unwrap_or(0);
            for attempt in 0..=tries {
                if let Some(mut e) = fixed(model, t, grid, opts.n, &seed.with_restart(attempt))? {
                    e.diagnostics.restarts = u64::from(attempt);
                    return Ok(e);
                }
            }
            let diagnostics = Diagnostics {
                extinct_ensembles: 1,
                restarts: u64::from(tries),
                ..Default::default()
            };
            Ok(Estimate::single(0.0, Vec::new(), diagnostics))
        }
        TimeGrid::Adaptive { keep_count } => {
            if *keep_count == 0 || *keep_count >= opts.n {
                return Err(Error::param(format!(
                    "keep count {keep_count} not in [1, {})",
                    opts.n
                )));
            }
            adaptive(model, t, *keep_count, opts.n, seed)
        }
    }
}

fn simulate_all(
    model: &ModelParams,
    n: usize,
    stop: StopRule,
    stage: &SeedSpec,
) -> Result<Vec<EpidemicPath>> {
    (0..n)
        .into_par_iter()
        .map(|i| simulate(model, stop, &stage.with_particle(particle_index(i))))
        .collect()
}

/// `None` when the ensemble dies out before some grid time.
fn fixed(
    model: &ModelParams,
    t: f64,
    grid: &[f64],
    n: usize,
    seed: &SeedSpec,
) -> Result<Option<Estimate>> {
    let times: Vec<f64> = grid.iter().copied().chain([t]).collect();
    let mut paths = simulate_all(model, n, StopRule::Horizon(times[0]), &seed.with_stage(0))?;
    let mut per_level = Vec::new();
    for (j, &tj) in times.iter().enumerate() {
        let survivors: Vec<usize> = (0..n).filter(|&i| alive_after(&paths[i], tj)).collect();
        per_level.push(survivors.len() as f64 / n as f64);
        if j + 1 == times.len() {
            break;
        }
        if survivors.is_empty() {
            return Ok(None);
        }
        let stage = seed.with_stage((j + 1) as u32);
        let mut rng = stage.with_particle(SELECTION_PARTICLE).rng();
        let parents: Vec<usize> = (0..n)
            .map(|i| {
                if alive_after(&paths[i], tj) {
                    i
                } else {
                    survivors[rng.index(survivors.len())]
                }
            })
            .collect();
        let old = &paths;
        paths = parents
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut path = old[p].clone();
                extend(
                    model,
                    &mut path,
                    StopRule::Horizon(times[j + 1]),
                    &stage.with_particle(particle_index(i)),
                )?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    let value = per_level.iter().product();
    Ok(Some(Estimate::single(
        value,
        per_level,
        Diagnostics::default(),
    )))
}

fn adaptive(
    model: &ModelParams,
    t: f64,
    keep: usize,
    n: usize,
    seed: &SeedSpec,
) -> Result<Estimate> {
    let stop = StopRule::Horizon(t);
    let mut paths = simulate_all(model, n, stop, &seed.with_stage(0))?;
    let mut scores: Vec<f64> = paths.iter().map(|p| score(p, t)).collect();
    let mut per_level = Vec::new();
    for stage in 1..=MAX_STAGES {
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let t_next = sorted[keep];
        if t_next >= t {
            break;
        }
        let survivors: Vec<usize> = (0..n).filter(|&i| scores[i] > t_next).collect();
        per_level.push(survivors.len() as f64 / n as f64);
        let stage_seed = seed.with_stage(stage as u32);
        let mut rng = stage_seed.with_particle(SELECTION_PARTICLE).rng();
        let parents: Vec<Option<usize>> = (0..n)
            .map(|i| (scores[i] <= t_next).then(|| survivors[rng.index(survivors.len())]))
            .collect();
        let old = &paths;
        let next = parents
            .par_iter()
            .enumerate()
            .map(|(i, parent)| -> Result<Option<EpidemicPath>> {
                let Some(p) = *parent else { return Ok(None) };
                let mut path = old[p].truncated(t_next);
                extend(
                    model,
                    &mut path,
                    stop,
                    &stage_seed.with_particle(particle_index(i)),
                )?;
                Ok(Some(path))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in next.into_iter().enumerate() {
            if let Some(p) = p {
                scores[i] = score(&p, t);
                paths[i] = p;
            }
        }
        if stage == MAX_STAGES {
            return Err(Error::NoProgress { level: t_next });
        }
    }
    per_level.push(paths.iter().filter(|p| alive_after(p, t)).count() as f64 / n as f64);
    let value = per_level.iter().product();
    Ok(Estimate::single(value, per_level, Diagnostics::default()))
}
