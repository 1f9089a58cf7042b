use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use epirare::harness::{
    load_config, run, tail_curves, write_distribution, write_rows, write_tail_curves,
    ExperimentConfig, Overrides,
};
use epirare::models::{rf_simulate, simulate, StopRule};
use epirare::oracle::exact_final_size;
use epirare::{Error, EventSpec, ModelParams, Result, SeedSpec, SirParams};

#[derive(Parser)]
#[command(
    name = "epirare",
    version,
    about = "Rare-event estimation for stochastic epidemic models"
)]
struct Cli {
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of a config's model and write it as CSV.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Simulation horizon; defaults to the event's horizon.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Exact final-size distribution of the Markovian SIR model.
    Exact {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        s0: u64,
        #[arg(long)]
        i0: u64,
        #[arg(long, value_enum, default_value_t = ScalingArg::MassAction)]
        scaling: ScalingArg,
        /// Population size dividing the contact rate (default s0 + i0).
        #[arg(long)]
        n: Option<f64>,
    },
    /// Run one config section and write its table row.
    Estimate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Fill the wall_seconds column.
        #[arg(long)]
        timing: bool,
    },
    /// Run every section of a config and write the table.
    Sweep {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Fill the wall_seconds column.
        #[arg(long)]
        timing: bool,
    },
    /// Exact and crude Monte-Carlo final-size tails for the (40, 1) model.
    Fig2 {
        /// Simulated outbreaks.
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
    },
}

#[derive(Args)]
struct Source {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Section to use (default: the first).
    #[arg(long)]
    section: Option<String>,
}

#[derive(Args)]
struct OverrideArgs {
    /// cmc, is, ce, ibps or temporal.
    #[arg(long)]
    method: Option<String>,
    /// Independent estimator runs.
    #[arg(long)]
    replications: Option<usize>,
    /// Adaptive splitting keep fraction; replaces fixed levels.
    #[arg(long)]
    keep_frac: Option<f64>,
    /// Potential strength for Reed-Frost splitting.
    #[arg(long)]
    alpha: Option<f64>,
    /// multinomial or keep_all.
    #[arg(long)]
    variant: Option<String>,
    /// Ensemble restarts allowed after extinction.
    #[arg(long)]
    restart_on_extinction: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    MassAction,
    Unscaled,
}

impl OverrideArgs {
    fn into_overrides(self, seed: Option<u64>) -> Overrides {
        Overrides {
            method: self.method,
            replications: self.replications,
            seed,
            keep_fraction: self.keep_frac,
            alpha: self.alpha,
            variant: self.variant,
            restart_on_extinction: self.restart_on_extinction,
        }
    }
}

fn select(source: &Source, overrides: &Overrides) -> Result<ExperimentConfig> {
    let configs = load_config(&source.config, overrides)?;
    match &source.section {
        Some(name) => configs
            .into_iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::Config(format!("no section `{name}`"))),
        None => configs
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("config has no experiments".into())),
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<()> {
    let out = output(&cli.out)?;
    match cli.command {
        Command::Simulate { source, horizon } => {
            let overrides = Overrides {
                seed: cli.seed,
                ..Default::default()
            };
            let config = select(&source, &overrides)?;
            let seed = SeedSpec::new(config.master_seed);
            match (&config.model, config.event) {
                (ModelParams::ReedFrost(p), EventSpec::CumulativeInfections { t, .. }) => {
                    let t_max = horizon.map_or(t, |h| h as usize);
                    rf_simulate(p, t_max, &seed)?.write_csv(out)
                }
                (ModelParams::ReedFrost(_), _) => Err(Error::Config(
                    "reed_frost configs use the cumulative_infections event".into(),
                )),
                (model, event) => {
                    let h = horizon.unwrap_or(event.horizon());
                    let stop = if h.is_finite() {
                        StopRule::Horizon(h)
                    } else {
                        StopRule::Extinction
                    };
                    simulate(model, stop, &seed)?.write_csv(out)
                }
            }
        }
        Command::Exact {
            lambda,
            gamma,
            s0,
            i0,
            scaling,
            n,
        } => {
            let mut p = match scaling {
                ScalingArg::MassAction => SirParams::mass_action(lambda, gamma, s0, i0),
                ScalingArg::Unscaled => SirParams::unscaled(lambda, gamma, s0, i0),
            };
            if let Some(n) = n {
                p.n = n;
            }
            write_distribution(&exact_final_size(&p)?, out)
        }
        Command::Estimate {
            source,
            overrides,
            timing,
        } => {
            let config = select(&source, &overrides.into_overrides(cli.seed))?;
            write_rows(&[run(&config)?], timing, out)
        }
        Command::Sweep {
            config,
            overrides,
            timing,
        } => {
            let configs = load_config(&config, &overrides.into_overrides(cli.seed))?;
            epirare::harness::sweep(&configs, timing, out).map(|_| ())
        }
        Command::Fig2 { replications } => {
            if replications == 0 {
                return Err(Error::Config("replications must be >= 1".into()));
            }
            let p = SirParams::mass_action(1.0, 1.0, 40, 1);
            let seed = SeedSpec::new(cli.seed.unwrap_or(0));
            write_tail_curves(&tail_curves(&p, replications, &seed)?, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
