//! Reed-Frost chain binomial.

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::params::ReedFrostParams;
use crate::path::GenerationPath;
use crate::rng::{SeedSpec, SimRng};

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "escape probability q = {q} not in (0, 1]"
        )))
    }
}

/// One generation: `i' ~ Binomial(s, 1 - q^i)`, `s' = s - i'`.
pub fn rf_step(s: u64, i: u64, q: f64, rng: &mut SimRng) -> Result<(u64, u64)> {
    check_q(q)?;
    if i == 0 || s == 0 {
        return Ok((s, 0));
    }
    let p = -(i as f64 * q.ln()).exp_m1();
    if p <= 0.0 {
        return Ok((s, 0));
    }
    let new = Binomial::new(s, p)
        .map_err(|e| Error::param(format!("binomial({s}, {p}): {e}")))?
        .sample(rng);
    Ok((s - new, new))
}

/// `P{i' = k}` for one generation from `(s, i)`.
pub fn rf_step_pmf(s: u64, i: u64, q: f64, k: u64) -> f64 {
    if k > s {
        return 0.0;
    }
    let log_escape = i as f64 * q.ln();
    let term = |count: u64, log_p: f64| {
        if count == 0 {
            0.0
        } else {
            count as f64 * log_p
        }
    };
    (ln_choose(s, k) + term(k, (-log_escape.exp_m1()).ln()) + term(s - k, log_escape)).exp()
}

pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|j| ((n - j) as f64 / (j + 1) as f64).ln()).sum()
}

/// Trajectory `(S_t, I_t)` for `t = 0..=t_max`, padded with the absorbed
/// state once `I = 0`.
pub fn rf_simulate(
    params: &ReedFrostParams,
    t_max: usize,
    seed: &SeedSpec,
) -> Result<GenerationPath> {
    params.validate()?;
    let mut path = GenerationPath::start(params.s0, params.i0);
    rf_extend(params, &mut path, t_max, seed)?;
    Ok(path)
}

/// Extends `path` to generation `t_max` with draws from `seed`.
pub fn rf_extend(
    params: &ReedFrostParams,
    path: &mut GenerationPath,
    t_max: usize,
    seed: &SeedSpec,
) -> Result<()> {
    let mut rng = seed.rng();
    while path.len() <= t_max {
        let (s, i) = path.last();
        let (s, i) = rf_step(s, i, params.q, &mut rng)?;
        path.push(s, i);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_and_certain_escape() {
        let mut rng = SeedSpec::new(1).rng();
        for _ in 0..100 {
            assert_eq!(rf_step(5, 0, 0.3, &mut rng).unwrap(), (5, 0));
            assert_eq!(rf_step(4, 3, 1.0, &mut rng).unwrap(), (4, 0));
        }
        assert!(rf_step(4, 3, 0.0, &mut rng).is_err());
        assert!(rf_step(4, 3, 1.2, &mut rng).is_err());
    }

    #[test]
    fn step_pmf_example() {
        let p: Vec<f64> = (0..=2).map(|k| rf_step_pmf(2, 1, 0.5, k)).collect();
        for (got, want) in p.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn step_frequencies_match_pmf() {
        let mut rng = SeedSpec::new(2).rng();
        let m = 100_000;
        let mut counts = [0u64; 3];
        for _ in 0..m {
            counts[rf_step(2, 1, 0.5, &mut rng).unwrap().1 as usize] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let p = rf_step_pmf(2, 1, 0.5, k as u64);
            let f = *c as f64 / m as f64;
            assert!(
                (f - p).abs() < 3.0 * (p * (1.0 - p) / m as f64).sqrt(),
                "k={k} f={f}"
            );
        }
    }

    #[test]
    fn trivial_trajectories() {
        let p = rf_simulate(
            &ReedFrostParams::new(1.0, 10, 1).unwrap(),
            5,
            &SeedSpec::new(3),
        )
        .unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.i[1..].iter().all(|&i| i == 0));
        let p = rf_simulate(
            &ReedFrostParams::new(0.5, 0, 3).unwrap(),
            5,
            &SeedSpec::new(3),
        )
        .unwrap();
        assert_eq!(p.i[1], 0);
        assert!(p.s.iter().all(|&s| s == 0));
    }

    #[test]
    fn first_generation_mean() {
        let params = ReedFrostParams::new(0.9, 10, 1).unwrap();
        let m = 100_000u64;
        let sum: u64 = (0..m)
            .map(|r| {
                rf_simulate(&params, 1, &SeedSpec::new(4).with_replication(r))
                    .unwrap()
                    .i[1]
            })
            .sum();
        let mean = sum as f64 / m as f64;
        let sd = (10.0f64 * 0.1 * 0.9).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / (m as f64).sqrt(), "{mean}");
    }
}
