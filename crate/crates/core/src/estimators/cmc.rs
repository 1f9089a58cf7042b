use super::{occurred, particle_index, stop_for, Diagnostics, Estimate};
use crate::error::{Error, Result};
use crate::events::{indicator_generations, EventSpec};
use crate::models::{rf_simulate, simulate};
use crate::params::ModelParams;
use crate::rng::SeedSpec;

/// Crude Monte-Carlo: the fraction of `n` independent paths on which the
/// event occurs. Path `i` uses particle stream `i` at stage 0.
pub fn cmc(model: &ModelParams, spec: &EventSpec, n: usize, seed: &SeedSpec) -> Result<Estimate> {
    model.validate()?;
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("cmc needs at least one path"));
    }
    let mut hits = 0u64;
    for i in 0..n {
        let s = seed.with_particle(particle_index(i)).with_stage(0);
        let hit = match (model, spec) {
            (ModelParams::ReedFrost(p), EventSpec::CumulativeInfections { t, .. }) => {
                indicator_generations(&rf_simulate(p, t - 1, &s)?, spec)?
            }
            (ModelParams::ReedFrost(_), _) | (_, EventSpec::CumulativeInfections { .. }) => {
                return Err(Error::Unsupported(format!(
                    "{spec:?} for the {} model",
                    model.name()
                )))
            }
            _ => occurred(&simulate(model, stop_for(spec), &s)?, spec)?,
        };
        hits += u64::from(hit);
    }
    Ok(Estimate::single(
        hits as f64 / n as f64,
        Vec::new(),
        Diagnostics::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_final_size, tail_pf};
    use crate::params::SirParams;

    #[test]
    fn certain_event() {
        let m = ModelParams::Sir(SirParams::unscaled(0.12, 1.0, 9, 1));
        let e = cmc(&m, &EventSpec::FinalSize { n_c: 1 }, 50, &SeedSpec::new(1)).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn small_model_matches_oracle() {
        let p = SirParams::unscaled(1.0, 1.0, 3, 1);
        let exact = tail_pf(&exact_final_size(&p).unwrap(), 1, 3);
        let n = 200_000;
        let e = cmc(
            &ModelParams::Sir(p),
            &EventSpec::FinalSize { n_c: 3 },
            n,
            &SeedSpec::new(2),
        )
        .unwrap();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((e.value - exact).abs() < 3.0 * se, "{} vs {exact}", e.value);
    }
}
