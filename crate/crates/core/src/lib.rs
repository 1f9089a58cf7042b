//! Rare-event probability estimation for stochastic epidemic models.
//!
//! Samplers for the Reed-Frost chain, the Markovian SIR process and a
//! contact-tracing model, an exact final-size oracle, and estimators built
//! on crude Monte-Carlo, importance sampling, cross-entropy adaptation and
//! interacting particle splitting.

pub mod error;
pub mod estimators;
pub mod events;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod params;
pub mod path;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use events::{Axis, EventSpec, LevelSchedule};
pub use params::{HivParams, ModelParams, ReedFrostParams, Scaling, SirParams};
pub use path::{
    CompartmentState, EpidemicPath, EventKind, GenerationPath, JumpEvent, StoppingTime,
};
pub use rng::SeedSpec;
