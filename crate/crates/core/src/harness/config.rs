//! Experiment configuration files.
//!
//! A config is a TOML document with one experiment per table. Keys at the
//! top level are defaults shared by every table:
//!
//! ```toml
//! model = "sir"
//! scaling = "unscaled"
//! lambda = 0.12
//! gamma = 1.0
//! s0 = 9
//! i0 = 1
//! event = "final_size"
//! n_c = 10
//! replications = 1000
//! seed = 1
//!
//! [cmc]
//! method = "cmc"
//! particles = 1000
//!
//! [ibps_5]
//! method = "ibps"
//! keep_fraction = 0.05
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::{
    IbpsOptions, Instrumental, Schedule, TemporalOptions, TimeGrid, Variant, WeightRule,
};
use crate::events::EventSpec;
use crate::params::{HivParams, ModelParams, ReedFrostParams, Scaling, SirParams};

pub const DEFAULT_PARTICLES: usize = 1000;
pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const DEFAULT_CE_ITERATIONS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Cmc {
        n: usize,
    },
    Is {
        n: usize,
        instrumental: Instrumental,
    },
    Ce {
        n: usize,
        iterations: usize,
    },
    Ibps(IbpsOptions),
    Temporal(TemporalOptions),
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Cmc { .. } => "cmc",
            Method::Is { .. } => "is",
            Method::Ce { .. } => "ce",
            Method::Ibps(_) => "ibps",
            Method::Temporal(_) => "temporal",
        }
    }

    /// Compact `key=value` list of the method options.
    pub fn describe(&self) -> String {
        match self {
            Method::Cmc { n } => format!("N={n}"),
            Method::Is { n, instrumental } => match instrumental {
                Instrumental::Sir { lambda, gamma } => {
                    format!("N={n};lambda={lambda};gamma={gamma}")
                }
                Instrumental::ReedFrost { q } => format!("N={n};q={q}"),
            },
            Method::Ce { n, iterations } => format!("N={n};K={iterations}"),
            Method::Ibps(o) => {
                let schedule = match &o.schedule {
                    Schedule::Adaptive { keep } => format!("keep={keep}"),
                    Schedule::Fixed(levels) => format!("levels={}", join(levels)),
                };
                let variant = match o.variant {
                    Variant::Multinomial => "multinomial",
                    Variant::KeepAll => "keep_all",
                };
                let weight = match o.weight {
                    WeightRule::Indicator => "indicator".to_string(),
                    WeightRule::PotentialV(a) => format!("potential_v({a})"),
                    WeightRule::PotentialDeltaV(a) => format!("potential_delta_v({a})"),
                };
                format!("N={};{schedule};variant={variant};weight={weight}", o.n)
            }
            Method::Temporal(o) => match &o.grid {
                TimeGrid::Fixed(g) => format!("N={};grid={}", o.n, join(g)),
                TimeGrid::Adaptive { keep_count } => format!("N={};keep_count={keep_count}", o.n),
            },
        }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelParams,
    pub event: EventSpec,
    pub method: Method,
    pub replications: usize,
    pub master_seed: u64,
}

/// Command-line values replacing those of every section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<String>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub keep_fraction: Option<f64>,
    pub alpha: Option<f64>,
    pub variant: Option<String>,
    pub restart_on_extinction: Option<u32>,
}

impl Overrides {
    fn apply(&self, table: &mut toml::Table) -> Result<()> {
        use toml::Value;
        let int = |v: u64| -> Result<Value> {
            i64::try_from(v)
                .map(Value::Integer)
                .map_err(|_| Error::Config(format!("{v} does not fit a config integer")))
        };
        if let Some(m) = &self.method {
            table.insert("method".into(), Value::String(m.clone()));
        }
        if let Some(r) = self.replications {
            table.insert("replications".into(), int(r as u64)?);
        }
        if let Some(s) = self.seed {
            table.insert("seed".into(), int(s)?);
        }
        if let Some(k) = self.keep_fraction {
            table.remove("levels");
            table.insert("keep_fraction".into(), Value::Float(k));
        }
        if let Some(a) = self.alpha {
            table.insert("alpha".into(), Value::Float(a));
        }
        if let Some(v) = &self.variant {
            table.insert("variant".into(), Value::String(v.clone()));
        }
        if let Some(r) = self.restart_on_extinction {
            table.insert("restart_on_extinction".into(), int(u64::from(r))?);
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    model: Option<String>,
    q: Option<f64>,
    lambda: Option<f64>,
    gamma: Option<f64>,
    scaling: Option<Scaling>,
    n: Option<f64>,
    s0: Option<u64>,
    i0: Option<u64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    c: Option<f64>,
    detection_ages: Option<Vec<f64>>,
    mu: Option<f64>,
    rho: Option<f64>,

    event: Option<String>,
    t: Option<f64>,
    n_c: Option<u64>,
    n_i: Option<u64>,
    u: Option<f64>,
    n_r: Option<u64>,

    method: Option<String>,
    particles: Option<usize>,
    iterations: Option<usize>,
    keep_fraction: Option<f64>,
    levels: Option<Vec<f64>>,
    variant: Option<String>,
    weight: Option<String>,
    alpha: Option<f64>,
    instr_lambda: Option<f64>,
    instr_gamma: Option<f64>,
    instr_q: Option<f64>,
    grid: Option<Vec<f64>>,
    keep_count: Option<usize>,
    restart_on_extinction: Option<u32>,
    replications: Option<usize>,
    seed: Option<u64>,
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

impl RawSection {
    fn model(&self) -> Result<ModelParams> {
        for (key, v) in [("mu", self.mu), ("rho", self.rho)] {
            if v.is_some_and(|x| x != 0.0) {
                return Err(Error::Config(format!("demography rate `{key}` must be 0")));
            }
        }
        let s0 = need(self.s0, "s0")?;
        let i0 = need(self.i0, "i0")?;
        let model = match need(self.model.as_deref(), "model")? {
            "reed_frost" => ModelParams::ReedFrost(ReedFrostParams {
                q: need(self.q, "q")?,
                s0,
                i0,
            }),
            "sir" => {
                let lambda = need(self.lambda, "lambda")?;
                let gamma = need(self.gamma, "gamma")?;
                let mut p = match self.scaling.unwrap_or(Scaling::MassAction) {
                    Scaling::MassAction => SirParams::mass_action(lambda, gamma, s0, i0),
                    Scaling::Unscaled => SirParams::unscaled(lambda, gamma, s0, i0),
                };
                if let Some(n) = self.n {
                    p.n = n;
                }
                ModelParams::Sir(p)
            }
            "hiv" => ModelParams::Hiv(HivParams {
                lambda: need(self.lambda, "lambda")?,
                gamma1: need(self.gamma1, "gamma1")?,
                gamma2: need(self.gamma2, "gamma2")?,
                c: need(self.c, "c")?,
                s0,
                i0,
                initial_detection_ages: self.detection_ages.clone().unwrap_or_default(),
            }),
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }

    fn event(&self) -> Result<EventSpec> {
        let t = || need(self.t, "t");
        let event = match need(self.event.as_deref(), "event")? {
            "duration" => EventSpec::Duration { t: t()? },
            "final_size" => EventSpec::FinalSize {
                n_c: need(self.n_c, "n_c")?,
            },
            "incidence" => EventSpec::Incidence {
                t: t()?,
                n_i: need(self.n_i, "n_i")?,
            },
            "diagnoses_increment" => EventSpec::DiagnosesIncrement {
                t: t()?,
                u: need(self.u, "u")?,
                n_r: need(self.n_r, "n_r")?,
            },
            "cumulative_infections" => {
                let t = t()?;
                if t.fract() != 0.0 || t < 1.0 {
                    return Err(Error::Config(format!(
                        "generation count t = {t} must be a positive integer"
                    )));
                }
                EventSpec::CumulativeInfections {
                    t: t as usize,
                    n_c: need(self.n_c, "n_c")?,
                }
            }
            other => return Err(Error::Config(format!("unknown event `{other}`"))),
        };
        event.validate()?;
        Ok(event)
    }

    fn method(&self, model: &ModelParams, event: &EventSpec) -> Result<Method> {
        let n = self.particles.unwrap_or(DEFAULT_PARTICLES);
        Ok(match need(self.method.as_deref(), "method")? {
            "cmc" => Method::Cmc { n },
            "is" => {
                let instrumental = match model {
                    ModelParams::Sir(p) => Instrumental::Sir {
                        lambda: self.instr_lambda.unwrap_or(p.lambda),
                        gamma: self.instr_gamma.unwrap_or(p.gamma),
                    },
                    ModelParams::ReedFrost(p) => Instrumental::ReedFrost {
                        q: self.instr_q.unwrap_or(p.q),
                    },
                    ModelParams::Hiv(_) => {
                        return Err(Error::Config(
                            "importance sampling is not available for the hiv model".into(),
                        ))
                    }
                };
                instrumental.validate()?;
                Method::Is { n, instrumental }
            }
            "ce" => Method::Ce {
                n,
                iterations: self.iterations.unwrap_or(DEFAULT_CE_ITERATIONS),
            },
            "ibps" => {
                let schedule = match (&self.levels, self.keep_fraction) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either `levels` or `keep_fraction`".into(),
                        ))
                    }
                    (Some(l), None) => Schedule::Fixed(l.clone()),
                    (None, Some(k)) => {
                        if !(k > 0.0 && k < 1.0) {
                            return Err(Error::Config(format!("keep_fraction {k} not in (0, 1)")));
                        }
                        Schedule::Adaptive { keep: k }
                    }
                    (None, None) => {
                        return Err(Error::Config(
                            "ibps needs `levels` or `keep_fraction`".into(),
                        ))
                    }
                };
                let variant = match self.variant.as_deref().unwrap_or("multinomial") {
                    "multinomial" => Variant::Multinomial,
                    "keep_all" => Variant::KeepAll,
                    other => return Err(Error::Config(format!("unknown variant `{other}`"))),
                };
                let default_weight = if self.alpha.is_some() {
                    "potential_v"
                } else {
                    "indicator"
                };
                let alpha = || need(self.alpha, "alpha");
                let weight = match self.weight.as_deref().unwrap_or(default_weight) {
                    "indicator" => WeightRule::Indicator,
                    "potential_v" => WeightRule::PotentialV(alpha()?),
                    "potential_delta_v" => WeightRule::PotentialDeltaV(alpha()?),
                    other => return Err(Error::Config(format!("unknown weight rule `{other}`"))),
                };
                Method::Ibps(IbpsOptions {
                    n,
                    schedule,
                    variant,
                    weight,
                    restart_on_extinction: self.restart_on_extinction,
                })
            }
            "temporal" => {
                if !matches!(event, EventSpec::Duration { .. }) {
                    return Err(Error::Config(
                        "temporal splitting estimates duration events".into(),
                    ));
                }
                let grid = match (&self.grid, self.keep_count) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config("give either `grid` or `keep_count`".into()))
                    }
                    (Some(g), None) => TimeGrid::Fixed(g.clone()),
                    (None, Some(k)) => TimeGrid::Adaptive { keep_count: k },
                    (None, None) => TimeGrid::Fixed(Vec::new()),
                };
                Method::Temporal(TemporalOptions {
                    n,
                    grid,
                    restart_on_extinction: self.restart_on_extinction,
                })
            }
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }

    fn build(&self, name: &str) -> Result<ExperimentConfig> {
        let model = self.model()?;
        let event = self.event()?;
        let method = self.method(&model, &event)?;
        let replications = self.replications.unwrap_or(DEFAULT_REPLICATIONS);
        if replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        Ok(ExperimentConfig {
            name: name.to_string(),
            model,
            event,
            method,
            replications,
            master_seed: self.seed.unwrap_or(0),
        })
    }
}

/// Parses every section of a config document, in file order.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<Vec<ExperimentConfig>> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let (sections, defaults): (Vec<_>, Vec<_>) = doc.into_iter().partition(|(_, v)| v.is_table());
    let mut out = Vec::new();
    let single = sections.is_empty();
    let sections = if single {
        vec![(
            "default".to_string(),
            toml::Value::Table(toml::Table::new()),
        )]
    } else {
        sections
    };
    for (name, value) in sections {
        let toml::Value::Table(own) = value else {
            unreachable!()
        };
        let mut table: toml::Table = defaults.iter().cloned().collect();
        table.extend(own);
        overrides.apply(&mut table)?;
        let raw: RawSection = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[{name}]: {e}")))?;
        out.push(
            raw.build(&name)
                .map_err(|e| Error::Config(format!("[{name}]: {}", strip_prefix(e))))?,
        );
    }
    Ok(out)
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

pub fn load_config(path: &std::path::Path, overrides: &Overrides) -> Result<Vec<ExperimentConfig>> {
    parse_config(&std::fs::read_to_string(path)?, overrides)
}
