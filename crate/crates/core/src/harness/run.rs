//! Replicated runs and CSV tables.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::estimators::{
    ce_estimate, cmc, ibps_estimate, importance_sampling, temporal_split_estimate, Estimate,
};
use crate::events::EventSpec;
use crate::models::{simulate, StopRule};
use crate::oracle::{exact_final_size, tail_pf};
use crate::params::SirParams;
use crate::rng::SeedSpec;

pub const SWEEP_HEADER: [&str; 7] = [
    "method",
    "params",
    "value",
    "stderr",
    "extinct_ensembles",
    "zero_runs",
    "wall_seconds",
];

/// One table row: mean and sample standard deviation over replications.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub name: String,
    pub method: &'static str,
    pub params: String,
    pub estimate: Estimate,
    pub wall_seconds: f64,
}

/// Probabilities with four significant digits.
pub fn format_probability(x: f64) -> String {
    format!("{x:.3e}")
}

/// One replication of the configured estimator.
pub fn run_once(config: &ExperimentConfig, replication: u64) -> Result<Estimate> {
    let seed = SeedSpec::new(config.master_seed).with_replication(replication);
    let (model, event) = (&config.model, &config.event);
    match &config.method {
        Method::Cmc { n } => cmc(model, event, *n, &seed),
        Method::Is { n, instrumental } => {
            importance_sampling(model, event, *n, instrumental, &seed)
        }
        Method::Ce { n, iterations } => {
            Ok(ce_estimate(model, event, *n, *iterations, &seed)?.estimate)
        }
        Method::Ibps(opts) => Ok(ibps_estimate(model, event, opts, &seed)?.estimate),
        Method::Temporal(opts) => {
            let EventSpec::Duration { t } = *event else {
                return Err(Error::Unsupported(
                    "temporal splitting of a non-duration event".into(),
                ));
            };
            temporal_split_estimate(model, t, opts, &seed)
        }
    }
}

/// `replications` independent runs, aggregated in replication order.
pub fn run(config: &ExperimentConfig) -> Result<RunRow> {
    let start = Instant::now();
    if config.replications == 1 {
        log::warn!(
            "[{}] a single replication has no standard error; reporting 0",
            config.name
        );
    }
    let runs = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            run_once(config, r as u64).map_err(|e| Error::Run {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunRow {
        name: config.name.clone(),
        method: config.method.label(),
        params: format!("{};{}", config.name, config.method.describe()),
        estimate: Estimate::aggregate(&runs),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes rows under [`SWEEP_HEADER`]. Wall-clock times are written only
/// with `timing`, so that untimed tables are reproducible byte for byte.
pub fn write_rows<W: Write>(rows: &[RunRow], timing: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let d = &r.estimate.diagnostics;
        w.write_record([
            r.method.to_string(),
            r.params.clone(),
            format_probability(r.estimate.value),
            format_probability(r.estimate.std_error),
            d.extinct_ensembles.to_string(),
            d.zero_runs.to_string(),
            if timing {
                format!("{:.3}", r.wall_seconds)
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every config in order and writes the table.
pub fn sweep<W: Write>(configs: &[ExperimentConfig], timing: bool, out: W) -> Result<Vec<RunRow>> {
    let rows = configs.iter().map(run).collect::<Result<Vec<_>>>()?;
    write_rows(&rows, timing, out)?;
    Ok(rows)
}

/// Exact final-size tail against crude Monte-Carlo at every `N_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailPoint {
    pub n_c: u64,
    pub exact: f64,
    pub cmc: f64,
}

/// Tail curves for the mass-action SIR model: `p_f(N_c)` from the oracle
/// and the frequency of `{final size >= N_c}` among `n` simulated outbreaks.
pub fn tail_curves(params: &SirParams, n: usize, seed: &SeedSpec) -> Result<Vec<TailPoint>> {
    let dist = exact_final_size(params)?;
    let model = crate::params::ModelParams::Sir(*params);
    let sizes = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = seed.with_particle(u32::try_from(i).expect("particle index exceeds u32"));
            Ok(simulate(&model, StopRule::Extinction, &s)?.ever_infected())
        })
        .collect::<Result<Vec<u64>>>()?;
    let total = params.s0 + params.i0;
    Ok((params.i0..=total)
        .map(|n_c| TailPoint {
            n_c,
            exact: tail_pf(&dist, params.i0, n_c),
            cmc: sizes.iter().filter(|&&k| k >= n_c).count() as f64 / n as f64,
        })
        .collect())
}

pub fn write_tail_curves<W: Write>(points: &[TailPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_c", "exact", "cmc"])?;
    for p in points {
        w.write_record([
            p.n_c.to_string(),
            format_probability(p.exact),
            format_probability(p.cmc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the final-size distribution as `k,probability` rows.
pub fn write_distribution<W: Write>(dist: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "probability"])?;
    for (k, p) in dist.iter().enumerate() {
        w.write_record([k.to_string(), format_probability(*p)])?;
    }
    w.flush()?;
    Ok(())
}
