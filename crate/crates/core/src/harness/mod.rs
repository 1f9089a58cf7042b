//! Experiment configs, replicated runs and CSV output.

mod config;
mod run;

pub use config::{
    load_config, parse_config, ExperimentConfig, Method, Overrides, DEFAULT_CE_ITERATIONS,
    DEFAULT_PARTICLES, DEFAULT_REPLICATIONS,
};
pub use run::{
    format_probability, run, run_once, sweep, tail_curves, write_distribution, write_rows,
    write_tail_curves, RunRow, TailPoint, SWEEP_HEADER,
};
