//! Exact final-size distribution of the Markovian SIR model.
//!
//! The triangular system is solved by forward substitution in binary fixed
//! point over big integers. Its terms cancel catastrophically (roughly one
//! bit per susceptible), so the working precision grows with `s0` and every
//! solve is repeated at a higher precision to confirm the result.

use num_bigint::{BigInt, BigUint};
use num_traits::{Float, One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::params::{Scaling, SirParams};

/// Largest `s0` accepted by [`brute_force_final_size`].
pub const BRUTE_FORCE_LIMIT: u64 = 30;

/// `x = mantissa · 2^exponent`, exactly.
fn dyadic(x: f64) -> (BigInt, i64) {
    let (m, e, sign) = Float::integer_decode(x);
    (BigInt::from(m) * i64::from(sign), i64::from(e))
}

fn aligned(a: (BigInt, i64), b: (BigInt, i64)) -> (BigInt, BigInt) {
    let e = a.1.min(b.1);
    (a.0 << (a.1 - e) as usize, b.0 << (b.1 - e) as usize)
}

fn binomials(n: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for k in 0..n {
        let next = &row[k as usize] * (n - k) / (k + 1);
        row.push(next);
    }
    row
}

/// Forward substitution with `bits` fractional bits. Returns `p_k · 2^bits`.
fn solve_fixed(params: &SirParams, bits: usize) -> Vec<BigInt> {
    let s0 = params.s0;
    let i0 = params.i0 as usize;
    // φ_l = a / (a + b (s0 - l)) with a, b exact integers.
    let gamma = dyadic(params.gamma);
    let a = match params.scaling {
        Scaling::MassAction => {
            let n = dyadic(params.n);
            (gamma.0 * n.0, gamma.1 + n.1)
        }
        Scaling::Unscaled => gamma,
    };
    let (a, b) = aligned(a, dyadic(params.lambda));
    let one = BigInt::one() << bits;
    let mul = |x: &BigInt, y: &BigInt| (x * y) >> bits;

    let rows: Vec<Vec<BigUint>> = (0..=s0).map(binomials).collect();
    let choose = |n: u64, k: u64| BigInt::from(rows[n as usize][k as usize].clone());

    let mut p: Vec<BigInt> = Vec::with_capacity(s0 as usize + 1);
    for l in 0..=s0 {
        let den = &a + &b * BigInt::from(s0 - l);
        let phi = (&a << bits) / den;
        let top = i0 + l as usize;
        let mut pw = Vec::with_capacity(top + 1);
        pw.push(one.clone());
        for j in 1..=top {
            let next = mul(&pw[j - 1], &phi);
            pw.push(next);
        }
        let mut acc = choose(s0, l) * &pw[top];
        for (k, pk) in p.iter().enumerate() {
            let k = k as u64;
            acc -= mul(&(choose(s0 - k, l - k) * pk), &pw[(l - k) as usize]);
        }
        p.push(acc);
    }
    p
}

fn to_f64(x: &BigInt, bits: usize) -> f64 {
    let keep = 96usize;
    if bits > keep {
        (x >> (bits - keep)).to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(keep as i32))
    } else {
        x.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(bits as i32))
    }
}

fn unstable(s0: u64, detail: String) -> Error {
    Error::NumericallyUnstable { s0, detail }
}

/// Distribution of the number `k ∈ 0..=s0` of initial susceptibles ever
/// infected.
pub fn exact_final_size(params: &SirParams) -> Result<Vec<f64>> {
    params.validate()?;
    let s0 = params.s0;
    if params.i0 == 0 || params.lambda == 0.0 {
        let mut p = vec![0.0; s0 as usize + 1];
        p[0] = 1.0;
        return Ok(p);
    }
    let bits = 128 + 3 * s0 as usize;
    let fine_bits = bits + 64 + s0 as usize;
    let coarse = solve_fixed(params, bits);
    let fine = solve_fixed(params, fine_bits);

    let mut out = Vec::with_capacity(coarse.len());
    for (k, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        let pc = to_f64(c, bits);
        let pf = to_f64(f, fine_bits);
        if !pc.is_finite() || (pc - pf).abs() > 1e-14 {
            return Err(unstable(
                s0,
                format!("p_{k} = {pc} does not agree with {pf} at higher precision"),
            ));
        }
        if pf < -1e-6 {
            return Err(unstable(s0, format!("p_{k} = {pf} is negative")));
        }
        out.push(if f.is_negative() { 0.0 } else { pf });
    }
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(unstable(s0, format!("probabilities sum to {total}")));
    }
    Ok(out)
}

/// Final-size distribution by dynamic programming over the embedded jump
/// chain. Independent of [`exact_final_size`]; all terms are non-negative.
pub fn brute_force_final_size(params: &SirParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (s0, i0) = (params.s0, params.i0);
    if s0 > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            s0,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let (s0, i0) = (s0 as usize, i0 as usize);
    let width = s0 + i0 + 1;
    let mut mass = vec![vec![0.0f64; width]; s0 + 1];
    mass[s0][i0] = 1.0;
    let mut out = vec![0.0; s0 + 1];
    // Every jump lowers 2s + i by one.
    for level in (0..=2 * s0 + i0).rev() {
        for s in (0..=s0).rev() {
            if 2 * s > level || level - 2 * s >= width {
                continue;
            }
            let i = level - 2 * s;
            let m = mass[s][i];
            if m == 0.0 {
                continue;
            }
            if i == 0 {
                out[s0 - s] += m;
                continue;
            }
            let inf = params.contact() * s as f64;
            let p_inf = inf / (inf + params.gamma);
            if s > 0 {
                mass[s - 1][i + 1] += m * p_inf;
            }
            mass[s][i - 1] += m * (1.0 - p_inf);
        }
    }
    Ok(out)
}

/// `P{i0 + k >= n_c}` under the final-size distribution `dist`.
pub fn tail_pf(dist: &[f64], i0: u64, n_c: u64) -> f64 {
    if n_c <= i0 {
        return 1.0;
    }
    let from = (n_c - i0) as usize;
    if from >= dist.len() {
        return 0.0;
    }
    dist[from..].iter().rev().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_susceptible() {
        let p = SirParams::unscaled(0.12, 1.0, 1, 1);
        let e = exact_final_size(&p).unwrap();
        assert!((e[0] - 1.0 / 1.12).abs() < 1e-15);
        assert!((e[1] - 0.12 / 1.12).abs() < 1e-15);
        assert!(close(&e, &brute_force_final_size(&p).unwrap(), 1e-12));
    }

    #[test]
    fn no_infection_possible() {
        let e = exact_final_size(&SirParams::unscaled(0.0, 1.0, 7, 2)).unwrap();
        assert_eq!(e[0], 1.0);
        let b = brute_force_final_size(&SirParams::unscaled(0.3, 1.0, 7, 0)).unwrap();
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn two_susceptibles() {
        // (2,1) -> removal 1/3; infect 2/3 -> (1,2): removal 1/2 twice
        // gives k=1 with prob 2/3 * 1/2 * 1/2 = 1/6; the rest k=2.
        let p = SirParams::unscaled(1.0, 1.0, 2, 1);
        let e = exact_final_size(&p).unwrap();
        let b = brute_force_final_size(&p).unwrap();
        assert!(close(&e, &b, 1e-10));
        assert!((e[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((e[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((e[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tiny_removal_rate_infects_everyone() {
        let b = brute_force_final_size(&SirParams::unscaled(1.0, 1e-9, 3, 1)).unwrap();
        assert!(b[3] >= 1.0 - 1e-6);
    }

    #[test]
    fn brute_force_refuses_large_populations() {
        assert!(matches!(
            brute_force_final_size(&SirParams::unscaled(1.0, 1.0, 31, 1)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(exact_final_size(&SirParams::unscaled(1.0, 0.0, 3, 1)).is_err());
    }

    #[test]
    fn tail_edges() {
        let d = exact_final_size(&SirParams::mass_action(1.0, 1.0, 40, 1)).unwrap();
        assert_eq!(tail_pf(&d, 1, 1), 1.0);
        assert_eq!(tail_pf(&d, 1, 42), 0.0);
        let tails: Vec<f64> = (1..=42).map(|n| tail_pf(&d, 1, n)).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(tails[40] > 0.0);
    }

    #[test]
    fn large_population_is_stable() {
        let d = exact_final_size(&SirParams::unscaled(0.0008254, 0.087613, 119, 1)).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|&p| p >= 0.0));
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_matches_brute_force(
            s0 in 0u64..16,
            i0 in 1u64..4,
            lambda in 0.01f64..6.0,
            gamma in 0.01f64..6.0,
            mass_action in any::<bool>(),
        ) {
            let p = if mass_action {
                SirParams::mass_action(lambda, gamma, s0, i0)
            } else {
                SirParams::unscaled(lambda, gamma, s0, i0)
            };
            let e = exact_final_size(&p).unwrap();
            let b = brute_force_final_size(&p).unwrap();
            prop_assert!(close(&e, &b, 1e-10));
        }
    }
}
