//! Model parameter sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::CompartmentState;

/// Scaling of the infection rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `λ S I / n`
    MassAction,
    /// `λ S I`
    Unscaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReedFrostParams {
    /// Probability that a susceptible escapes infection by one given infective.
    pub q: f64,
    pub s0: u64,
    pub i0: u64,
}

impl ReedFrostParams {
    pub fn new(q: f64, s0: u64, i0: u64) -> Result<Self> {
        let p = ReedFrostParams { q, s0, i0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::param(format!(
                "escape probability q = {} not in (0, 1]",
                self.q
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirParams {
    pub lambda: f64,
    pub gamma: f64,
    pub scaling: Scaling,
    /// Population size dividing the contact rate under mass action.
    pub n: f64,
    pub s0: u64,
    pub i0: u64,
}

impl SirParams {
    /// Mass-action model with `n = s0 + i0`.
    pub fn mass_action(lambda: f64, gamma: f64, s0: u64, i0: u64) -> Self {
        SirParams {
            lambda,
            gamma,
            scaling: Scaling::MassAction,
            n: (s0 + i0) as f64,
            s0,
            i0,
        }
    }

    pub fn unscaled(lambda: f64, gamma: f64, s0: u64, i0: u64) -> Self {
        SirParams {
            lambda,
            gamma,
            scaling: Scaling::Unscaled,
            n: (s0 + i0) as f64,
            s0,
            i0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!(
                "lambda = {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!(
                "gamma = {} must be finite and > 0",
                self.gamma
            )));
        }
        if self.scaling == Scaling::MassAction && !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::param(format!(
                "population size n = {} must be > 0",
                self.n
            )));
        }
        Ok(())
    }

    /// Infection rate per susceptible-infective pair: `λ/n` or `λ`.
    pub fn contact(&self) -> f64 {
        match self.scaling {
            Scaling::MassAction => self.lambda / self.n,
            Scaling::Unscaled => self.lambda,
        }
    }

    /// Same model with other rates.
    pub fn with_rates(&self, lambda: f64, gamma: f64) -> Self {
        SirParams {
            lambda,
            gamma,
            ..*self
        }
    }

    pub fn initial(&self) -> CompartmentState {
        CompartmentState::new(self.s0, self.i0, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HivParams {
    pub lambda: f64,
    /// Spontaneous detection rate per infective.
    pub gamma1: f64,
    /// Contact-tracing detection coefficient.
    pub gamma2: f64,
    /// Decay rate of the contact-tracing effect with detection age.
    pub c: f64,
    pub s0: u64,
    pub i0: u64,
    /// Ages (>= 0) of detections made before `t = 0`.
    pub initial_detection_ages: Vec<f64>,
}

impl HivParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("c", self.c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        if self
            .initial_detection_ages
            .iter()
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return Err(Error::param(
                "initial detection ages must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn initial(&self) -> CompartmentState {
        CompartmentState::new(self.s0, self.i0, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    ReedFrost(ReedFrostParams),
    Sir(SirParams),
    Hiv(HivParams),
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::ReedFrost(p) => p.validate(),
            ModelParams::Sir(p) => p.validate(),
            ModelParams::Hiv(p) => p.validate(),
        }
    }

    pub fn s0(&self) -> u64 {
        match self {
            ModelParams::ReedFrost(p) => p.s0,
            ModelParams::Sir(p) => p.s0,
            ModelParams::Hiv(p) => p.s0,
        }
    }

    pub fn i0(&self) -> u64 {
        match self {
            ModelParams::ReedFrost(p) => p.i0,
            ModelParams::Sir(p) => p.i0,
            ModelParams::Hiv(p) => p.i0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::ReedFrost(_) => "reed_frost",
            ModelParams::Sir(_) => "sir",
            ModelParams::Hiv(_) => "hiv",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ReedFrostParams::new(0.0, 5, 1).is_err());
        assert!(ReedFrostParams::new(1.5, 5, 1).is_err());
        assert!(ReedFrostParams::new(1.0, 5, 1).is_ok());
        assert!(SirParams::unscaled(0.1, 0.0, 5, 1).validate().is_err());
        assert!(SirParams::unscaled(-0.1, 1.0, 5, 1).validate().is_err());
        assert!(SirParams::unscaled(0.0, 1.0, 5, 1).validate().is_ok());
    }

    #[test]
    fn contact_rate_scaling() {
        let p = SirParams::mass_action(1.0, 1.0, 40, 1);
        assert_eq!(p.contact(), 1.0 / 41.0);
        assert_eq!(SirParams::unscaled(0.12, 1.0, 9, 1).contact(), 0.12);
    }
}
