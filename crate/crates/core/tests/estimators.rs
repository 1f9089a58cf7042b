use epirare::estimators::{
    ce_estimate, cmc, ibps_estimate, importance_sampling, Conditional, Estimate, IbpsOptions,
    Instrumental, Schedule, Variant, WeightRule,
};
use epirare::oracle::{brute_force_final_size, tail_pf};
use epirare::stats::ks_two_sample;
use epirare::{EventSpec, ModelParams, ReedFrostParams, SeedSpec, SirParams};

const RUNS: u64 = 500;

fn within(runs: &[Estimate], exact: f64) -> (bool, f64) {
    let e = Estimate::aggregate(runs);
    let z = (e.value - exact) / e.sem();
    (z.abs() <= 3.0, z)
}

fn grid() -> Vec<(SirParams, u64, f64)> {
    (1..=5u64)
        .map(|s0| {
            let p = SirParams::mass_action(1.2, 1.0, s0, 1);
            let n_c = s0 + 1;
            let exact = tail_pf(&brute_force_final_size(&p).unwrap(), 1, n_c);
            (p, n_c, exact)
        })
        .collect()
}

fn seed(r: u64) -> SeedSpec {
    SeedSpec::new(123).with_replication(r)
}

#[test]
fn cmc_is_unbiased_on_small_grid() {
    for (p, n_c, exact) in grid() {
        let m = ModelParams::Sir(p);
        let runs: Vec<_> = (0..RUNS)
            .map(|r| cmc(&m, &EventSpec::FinalSize { n_c }, 50, &seed(r)).unwrap())
            .collect();
        let (ok, z) = within(&runs, exact);
        assert!(ok, "s0 = {}: z = {z}", p.s0);
    }
}

#[test]
fn importance_sampling_and_ce_are_unbiased_on_small_grid() {
    for (p, n_c, exact) in grid() {
        let m = ModelParams::Sir(p);
        let spec = EventSpec::FinalSize { n_c };
        let instr = Instrumental::Sir {
            lambda: 2.0,
            gamma: 0.7,
        };
        let is: Vec<_> = (0..RUNS)
            .map(|r| importance_sampling(&m, &spec, 50, &instr, &seed(r)).unwrap())
            .collect();
        let (ok, z) = within(&is, exact);
        assert!(ok, "IS s0 = {}: z = {z}", p.s0);
        let ce: Vec<_> = (0..RUNS)
            .map(|r| ce_estimate(&m, &spec, 50, 2, &seed(r)).unwrap().estimate)
            .collect();
        let (ok, z) = within(&ce, exact);
        assert!(ok, "CE s0 = {}: z = {z}", p.s0);
    }
}

#[test]
fn splitting_is_unbiased_on_small_grid() {
    for (p, n_c, exact) in grid() {
        let m = ModelParams::Sir(p);
        let spec = EventSpec::FinalSize { n_c };
        let levels: Vec<f64> = (2..=n_c).map(|l| l as f64).collect();
        for variant in [Variant::Multinomial, Variant::KeepAll] {
            for schedule in [
                Schedule::Fixed(levels.clone()),
                Schedule::Adaptive { keep: 0.5 },
            ] {
                let opts = IbpsOptions {
                    n: 100,
                    schedule: schedule.clone(),
                    variant,
                    weight: WeightRule::Indicator,
                    restart_on_extinction: None,
                };
                let runs: Vec<_> = (0..RUNS)
                    .map(|r| ibps_estimate(&m, &spec, &opts, &seed(r)).unwrap().estimate)
                    .collect();
                let (ok, z) = within(&runs, exact);
                assert!(ok, "s0 = {}, {variant:?}, {schedule:?}: z = {z}", p.s0);
            }
        }
    }
}

#[test]
fn single_level_splitting_matches_cmc_in_law() {
    let m = ModelParams::Sir(SirParams::unscaled(0.12, 1.0, 9, 1));
    let spec = EventSpec::FinalSize { n_c: 8 };
    let opts = IbpsOptions {
        n: 200,
        schedule: Schedule::Fixed(vec![8.0]),
        variant: Variant::Multinomial,
        weight: WeightRule::Indicator,
        restart_on_extinction: None,
    };
    let split: Vec<f64> = (0..200)
        .map(|r| {
            ibps_estimate(&m, &spec, &opts, &SeedSpec::new(1).with_replication(r))
                .unwrap()
                .estimate
                .value
        })
        .collect();
    let crude: Vec<f64> = (0..200)
        .map(|r| {
            cmc(&m, &spec, 200, &SeedSpec::new(2).with_replication(r))
                .unwrap()
                .value
        })
        .collect();
    assert!(ks_two_sample(&split, &crude).p_value > 0.01);
}

#[test]
fn zero_alpha_potentials_match_indicator_in_law() {
    let m = ModelParams::ReedFrost(ReedFrostParams::new(0.95, 40, 1).unwrap());
    let spec = EventSpec::CumulativeInfections { t: 6, n_c: 15 };
    let run = |w: WeightRule, master: u64| -> Vec<f64> {
        let opts = IbpsOptions {
            n: 200,
            schedule: Schedule::Adaptive { keep: 0.8 },
            variant: Variant::Multinomial,
            weight: w,
            restart_on_extinction: None,
        };
        (0..200)
            .map(|r| {
                ibps_estimate(&m, &spec, &opts, &SeedSpec::new(master).with_replication(r))
                    .unwrap()
                    .estimate
                    .value
            })
            .collect()
    };
    let base = run(WeightRule::Indicator, 3);
    assert!(ks_two_sample(&run(WeightRule::PotentialV(0.0), 4), &base).p_value > 0.01);
    assert!(ks_two_sample(&run(WeightRule::PotentialDeltaV(0.0), 5), &base).p_value > 0.01);
}

#[test]
fn potential_weights_track_cmc_at_high_keep() {
    let m = ModelParams::ReedFrost(ReedFrostParams::new(0.95, 40, 1).unwrap());
    let spec = EventSpec::CumulativeInfections { t: 6, n_c: 20 };
    let crude = cmc(&m, &spec, 400_000, &SeedSpec::new(6)).unwrap().value;
    for w in [
        WeightRule::PotentialV(0.1),
        WeightRule::PotentialDeltaV(0.1),
    ] {
        let opts = IbpsOptions {
            n: 500,
            schedule: Schedule::Adaptive { keep: 0.99 },
            variant: Variant::Multinomial,
            weight: w,
            restart_on_extinction: None,
        };
        let runs: Vec<_> = (0..300)
            .map(|r| {
                ibps_estimate(&m, &spec, &opts, &SeedSpec::new(7).with_replication(r))
                    .unwrap()
                    .estimate
            })
            .collect();
        let e = Estimate::aggregate(&runs);
        let se = (e.sem().powi(2) + crude * (1.0 - crude) / 400_000.0).sqrt();
        assert!(
            (e.value - crude).abs() <= 4.0 * se,
            "{w:?}: {} vs {crude}",
            e.value
        );
    }
}

#[test]
fn conditional_sample_contains_only_hits() {
    let m = ModelParams::Sir(SirParams::unscaled(0.0008254, 0.087613, 119, 1));
    let spec = EventSpec::FinalSize { n_c: 60 };
    let out = ibps_estimate(
        &m,
        &spec,
        &IbpsOptions::adaptive(300, 0.1, Variant::Multinomial),
        &SeedSpec::new(8),
    )
    .unwrap();
    let Conditional::Paths(paths) = &out.conditional else {
        panic!("expected paths")
    };
    assert!(!paths.is_empty());
    assert!(paths.iter().all(|p| p.ever_infected() >= 60));
    assert_eq!(*out.levels.last().unwrap(), 60.0);
}

#[test]
fn incidence_and_diagnoses_events_split() {
    let m = ModelParams::Sir(SirParams::mass_action(2.0, 1.0, 60, 1));
    for spec in [
        EventSpec::Incidence { t: 5.0, n_i: 25 },
        EventSpec::DiagnosesIncrement {
            t: 2.0,
            u: 2.0,
            n_r: 20,
        },
    ] {
        let crude = cmc(&m, &spec, 100_000, &SeedSpec::new(9)).unwrap().value;
        let opts = IbpsOptions {
            n: 200,
            schedule: Schedule::Fixed(vec![spec.threshold() / 2.0, spec.threshold()]),
            variant: Variant::KeepAll,
            weight: WeightRule::Indicator,
            restart_on_extinction: None,
        };
        let runs: Vec<_> = (0..300)
            .map(|r| {
                ibps_estimate(&m, &spec, &opts, &SeedSpec::new(10).with_replication(r))
                    .unwrap()
                    .estimate
            })
            .collect();
        let e = Estimate::aggregate(&runs);
        let se = (e.sem().powi(2) + crude * (1.0 - crude) / 100_000.0).sqrt();
        assert!(
            (e.value - crude).abs() <= 3.0 * se,
            "{spec:?}: {} vs {crude}",
            e.value
        );
    }
}

#[test]
fn ce_flags_likelihood_overflow_on_large_population() {
    let m = ModelParams::Sir(SirParams::unscaled(0.0008254, 0.087613, 119, 1));
    let out = ce_estimate(
        &m,
        &EventSpec::FinalSize { n_c: 110 },
        300,
        4,
        &SeedSpec::new(11),
    )
    .unwrap();
    let d = out.estimate.diagnostics;
    assert!(
        d.likelihood_overflow + d.zero_weight_iterations > 0,
        "{d:?}"
    );
}
