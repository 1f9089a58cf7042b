//! Cross-entropy adaptation of the instrumental parameters.

use super::importance::{draw, Instrumental, SampleStats};
use super::{particle_index, Diagnostics, Estimate, LOG_RATIO_LIMIT};
use crate::error::{Error, Result};
use crate::events::EventSpec;
use crate::params::ModelParams;
use crate::rng::SeedSpec;

const Q_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CeOutput {
    pub estimate: Estimate,
    /// `v⁽⁰⁾ = φ, v⁽¹⁾, …, v⁽ᴷ⁾`.
    pub trace: Vec<Instrumental>,
}

/// `K` cross-entropy iterations of `n` paths each. Iteration `k` samples
/// under `v⁽ᵏ⁻¹⁾` (stage `k` streams), and the output is the importance
/// sampling estimate of the last iteration.
pub fn ce_estimate(
    model: &ModelParams,
    spec: &EventSpec,
    n: usize,
    iterations: usize,
    seed: &SeedSpec,
) -> Result<CeOutput> {
    model.validate()?;
    spec.validate()?;
    if n == 0 || iterations == 0 {
        return Err(Error::param(
            "cross-entropy needs n >= 1 and at least one iteration",
        ));
    }
    let mut v = Instrumental::of(model)?;
    let mut trace = vec![v];
    let mut diagnostics = Diagnostics::default();
    let mut theta = 0.0;
    for k in 1..=iterations {
        let stage = seed.with_stage(k as u32);
        let samples = (0..n)
            .map(|i| draw(model, spec, &v, &stage.with_particle(particle_index(i))))
            .collect::<Result<Vec<_>>>()?;
        if samples
            .iter()
            .any(|s| s.log_ratio.is_finite() && s.log_ratio.abs() > LOG_RATIO_LIMIT)
        {
            diagnostics.likelihood_overflow = 1;
        }
        theta = samples
            .iter()
            .filter(|s| s.hit)
            .map(|s| s.log_ratio.exp())
            .sum::<f64>()
            / n as f64;

        // Weights of the hits, rescaled by the largest for the update; the
        // maximiser does not depend on the scale.
        let max_log = samples
            .iter()
            .filter(|s| s.hit && s.log_ratio > f64::NEG_INFINITY)
            .map(|s| s.log_ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_log == f64::NEG_INFINITY {
            diagnostics.zero_weight_iterations += 1;
            trace.push(v);
            continue;
        }
        let weighted = samples
            .iter()
            .filter(|s| s.hit)
            .map(|s| ((s.log_ratio - max_log).exp(), &s.stats));
        v = update(v, weighted);
        trace.push(v);
    }
    Ok(CeOutput {
        estimate: Estimate::single(theta, Vec::new(), diagnostics),
        trace,
    })
}

/// Maximiser of the weighted log likelihood; parameters without
/// information keep their previous value.
fn update<'a>(
    v: Instrumental,
    weighted: impl Iterator<Item = (f64, &'a SampleStats)>,
) -> Instrumental {
    match v {
        Instrumental::Sir { lambda, gamma } => {
            let (mut ni, mut di, mut nr, mut dr) = (0.0, 0.0, 0.0, 0.0);
            for (w, st) in weighted {
                let SampleStats::Sir(st) = st else {
                    unreachable!()
                };
                ni += w * st.infections as f64;
                di += w * st.contact_integral;
                nr += w * st.removals as f64;
                dr += w * st.infective_integral;
            }
            let pick = |num: f64, den: f64, old: f64| {
                let x = num / den;
                if x > 0.0 && x.is_finite() {
                    x
                } else {
                    old
                }
            };
            Instrumental::Sir {
                lambda: pick(ni, di, lambda),
                gamma: pick(nr, dr, gamma),
            }
        }
        Instrumental::ReedFrost { .. } => {
            let mut terms: Vec<(f64, f64)> = Vec::new();
            let mut escapes = 0.0;
            for (w, st) in weighted {
                let SampleStats::ReedFrost(st) = st else {
                    unreachable!()
                };
                terms.extend(
                    st.infections
                        .iter()
                        .map(|&(i, new)| (i as f64, w * new as f64)),
                );
                escapes += w * st.escapes;
            }
            let objective = |q: f64| {
                let lq = q.ln();
                terms
                    .iter()
                    .filter(|t| t.1 > 0.0)
                    .map(|&(i, a)| a * (-(i * lq).exp_m1()).ln())
                    .sum::<f64>()
                    + escapes * lq
            };
            Instrumental::ReedFrost {
                q: golden_max(objective, Q_EPS, 1.0 - Q_EPS),
            }
        }
    }
}

/// Golden-section search for the maximum of a unimodal function.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    (a + b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ReedFrostParams, SirParams};

    #[test]
    fn golden_section_finds_maximum() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn degenerate_event_keeps_parameters() {
        let m = ModelParams::Sir(SirParams::unscaled(0.12, 1.0, 9, 1));
        let out = ce_estimate(
            &m,
            &EventSpec::FinalSize { n_c: 1 },
            100,
            3,
            &SeedSpec::new(1),
        )
        .unwrap();
        assert_eq!(out.estimate.value, 1.0);
        assert!(out.trace.iter().all(|v| *v
            == Instrumental::Sir {
                lambda: 0.12,
                gamma: 1.0
            }));
    }

    #[test]
    fn rare_event_tilts_towards_more_infection() {
        let m = ModelParams::Sir(SirParams::unscaled(0.12, 1.0, 9, 1));
        let out = ce_estimate(
            &m,
            &EventSpec::FinalSize { n_c: 10 },
            2000,
            3,
            &SeedSpec::new(2),
        )
        .unwrap();
        let Instrumental::Sir { lambda, gamma } = *out.trace.last().unwrap() else {
            unreachable!()
        };
        assert!(lambda > 0.12 && gamma < 1.0, "{lambda} {gamma}");
    }

    #[test]
    fn reed_frost_update_moves_q_down() {
        let m = ModelParams::ReedFrost(ReedFrostParams::new(0.98, 30, 1).unwrap());
        let spec = EventSpec::CumulativeInfections { t: 6, n_c: 15 };
        let out = ce_estimate(&m, &spec, 2000, 2, &SeedSpec::new(3)).unwrap();
        let Instrumental::ReedFrost { q } = out.trace[1] else {
            unreachable!()
        };
        assert!(q < 0.98, "{q}");
    }
}
