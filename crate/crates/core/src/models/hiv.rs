//! Contact-tracing model with detection-age structure.
//!
//! Between jumps the detection rate `γ₁ I + γ₂ I Σ_d exp(-c (t - d))` only
//! decays, so the total rate at the last jump bounds it until the next one
//! and the process is sampled by thinning against that bound.

use super::{StopRule, EVENT_CAP};
use crate::error::{Error, Result};
use crate::params::HivParams;
use crate::path::{CompartmentState, EpidemicPath, EventKind};
use crate::rng::SeedSpec;

/// `(infection_rate, detection_rate)` at time `t_now`, given the absolute
/// times of all detections so far.
pub fn hiv_rates(
    state: CompartmentState,
    detections: &[f64],
    t_now: f64,
    params: &HivParams,
) -> (f64, f64) {
    let i = state.i as f64;
    let w = tracing_sum(detections.iter().copied(), t_now, params.c);
    (
        params.lambda * state.s as f64 * i,
        params.gamma1 * i + params.gamma2 * i * w,
    )
}

fn tracing_sum(detections: impl Iterator<Item = f64>, t_now: f64, c: f64) -> f64 {
    detections.map(|d| (-c * (t_now - d)).exp()).sum()
}

pub fn hiv_simulate(params: &HivParams, stop: StopRule, seed: &SeedSpec) -> Result<EpidemicPath> {
    let detections = params.initial_detection_ages.iter().map(|a| -a).collect();
    let mut path = EpidemicPath::with_detections(params.initial(), detections)?;
    hiv_extend(params, &mut path, stop, seed)?;
    Ok(path)
}

/// Continues `path` from its horizon until the stop rule or extinction.
pub fn hiv_extend(
    params: &HivParams,
    path: &mut EpidemicPath,
    stop: StopRule,
    seed: &SeedSpec,
) -> Result<()> {
    params.validate()?;
    stop.validate()?;
    let horizon = stop.horizon();
    let mut t = path.horizon();
    if path.is_absorbed() || t >= horizon || stop.reached(path)? {
        return Ok(());
    }
    let mut rng = seed.rng();
    let st = path.current_state();
    let (mut s, mut i) = (st.s as f64, st.i as f64);
    let mut w = tracing_sum(path.detection_times(), t, params.c);

    loop {
        let infection = params.lambda * s * i;
        let bound = infection + params.gamma1 * i + params.gamma2 * i * w;
        let dt = rng.exponential(bound);
        if bound == 0.0 || t + dt > horizon {
            path.extend_horizon(horizon);
            return Ok(());
        }
        t += dt;
        w *= (-params.c * dt).exp();
        let rate = infection + params.gamma1 * i + params.gamma2 * i * w;
        if rate > bound * (1.0 + 1e-12) {
            return Err(Error::ThinningBound {
                time: t,
                rate,
                bound,
            });
        }
        let u = rng.unit() * bound;
        if u >= rate {
            continue;
        }
        if u < infection {
            path.push(t, EventKind::Infection)?;
            s -= 1.0;
            i += 1.0;
        } else {
            path.push(t, EventKind::Detection)?;
            i -= 1.0;
            w += 1.0;
        }
        if i == 0.0 {
            return Ok(());
        }
        if path.events().len() as u64 >= EVENT_CAP {
            return Err(Error::EventCapExceeded { cap: EVENT_CAP });
        }
        if stop.reached(path)? {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hiv(gamma2: f64, c: f64) -> HivParams {
        HivParams {
            lambda: 0.02,
            gamma1: 0.5,
            gamma2,
            c,
            s0: 40,
            i0: 2,
            initial_detection_ages: vec![],
        }
    }

    #[test]
    fn rate_examples() {
        let mut p = hiv(0.19, 1.0);
        p.gamma1 = 0.13;
        let (_, d) = hiv_rates(CompartmentState::new(0, 10, 0), &[], 0.0, &p);
        assert!((d - 1.3).abs() < 1e-12);
        p.gamma1 = 0.0;
        let (_, d) = hiv_rates(CompartmentState::new(0, 1, 0), &[2.0], 2.0, &p);
        assert!((d - 0.19).abs() < 1e-12);
        let (_, d) = hiv_rates(CompartmentState::new(0, 1, 0), &[0.0], 2f64.ln(), &p);
        assert!((d - 0.095).abs() < 1e-12);
        let (inf, _) = hiv_rates(CompartmentState::new(7, 3, 0), &[], 0.0, &p);
        assert!((inf - 0.02 * 21.0).abs() < 1e-12);
    }

    #[test]
    fn no_infective_gives_empty_path() {
        let mut p = hiv(0.19, 1.0);
        p.i0 = 0;
        let path = hiv_simulate(&p, StopRule::Extinction, &SeedSpec::new(1)).unwrap();
        assert!(path.events().is_empty());
    }

    #[test]
    fn detections_are_recorded_with_prior_ones() {
        let mut p = hiv(0.19, 1.0);
        p.initial_detection_ages = vec![0.5, 2.0];
        let path = hiv_simulate(&p, StopRule::Extinction, &SeedSpec::new(2)).unwrap();
        let d: Vec<f64> = path.detection_times().collect();
        assert_eq!(&d[..2], &[-0.5, -2.0]);
        assert_eq!(d.len(), 2 + path.current_state().r as usize);
        assert_eq!(path.current_state().i, 0);
    }
}
