use proptest::prelude::*;
use retrodict_core::device::{
    a_priori_distribution, build_device, classify_bias, mdo_to_pom, pdo_to_density, preparation_pom, retr_density, Role,
};
use retrodict_core::evolution::{evolve_pdo, heisenberg_pom, retrodictive_backward, retrodictive_evolved};
use retrodict_core::operator::{conjugate_by, random_unitary};
use retrodict_core::probability::{
    bayes_deviation, detection_probability, joint, marginal_meas, marginal_meas_direct, marginal_prep,
    marginal_prep_direct, predictive, retrodictive, retrodictive_unbiased,
};
use retrodict_core::random::{random_biased_device, random_device_pair, random_pom, random_unbiased_device};
use retrodict_core::scenarios::appendix_equivalence;
use retrodict_core::{DensityOperator, DeviceOperatorSet, EvolutionContext, JointDistribution};

fn max_diff(a: &JointDistribution, b: &JointDistribution) -> f64 {
    a.p.iter()
        .flatten()
        .zip(b.p.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rescaled(dev: &DeviceOperatorSet, c: f64) -> DeviceOperatorSet {
    dev.map_operators(|op| Ok(op.scaled(c))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_is_a_distribution(seed in any::<u64>()) {
        let (prep, meas) = random_device_pair(seed).unwrap();
        let jd = joint(&prep, &meas).unwrap();
        prop_assert!((jd.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(jd.p.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
        let (pi, pj) = (marginal_prep(&jd), marginal_meas(&jd));
        let (di, dj) = (marginal_prep_direct(&prep, &meas).unwrap(), marginal_meas_direct(&prep, &meas).unwrap());
        for (a, b) in pi.iter().zip(&di).chain(pj.iter().zip(&dj)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_consistency(seed in any::<u64>()) {
        let (prep, meas) = random_device_pair(seed).unwrap();
        prop_assert!(bayes_deviation(&joint(&prep, &meas).unwrap()) <= 1e-12);
    }

    #[test]
    fn gauge_invariance(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (prep, meas) = random_device_pair(seed).unwrap();
        let base = joint(&prep, &meas).unwrap();
        let scaled = joint(&rescaled(&prep, 10f64.powf(a)), &rescaled(&meas, 10f64.powf(b))).unwrap();
        prop_assert!(max_diff(&base, &scaled) <= 1e-12);
    }

    #[test]
    fn bias_classification_is_scale_invariant(seed in any::<u64>(), a in -3.0f64..3.0, unbiased in any::<bool>()) {
        let dev = if unbiased {
            random_unbiased_device(Role::Preparation, 3, 4, 0.5, seed).unwrap()
        } else {
            random_biased_device(Role::Preparation, 3, 4, seed).unwrap()
        };
        let c = 10f64.powf(a);
        let (before, after) = (classify_bias(&dev), classify_bias(&rescaled(&dev, c)));
        prop_assert_eq!(before.is_unbiased, after.is_unbiased);
        if let (Some(g0), Some(g1)) = (before.gamma, after.gamma) {
            prop_assert!((g1 / g0 - c).abs() <= 1e-9 * c);
        }
    }

    #[test]
    fn rescaling_preserves_derived_quantities(seed in any::<u64>(), a in -3.0f64..3.0) {
        let dev = random_biased_device(Role::Preparation, 3, 3, seed).unwrap();
        let other = rescaled(&dev, 10f64.powf(a));
        let (p0, p1) = (a_priori_distribution(&dev).unwrap(), a_priori_distribution(&other).unwrap());
        for (x, y) in p0.iter().zip(&p1) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for label in dev.labels() {
            let (r0, r1) = (pdo_to_density(&dev, label).unwrap(), pdo_to_density(&other, label).unwrap());
            prop_assert!(r0.op().sub(r1.op()).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn appendix_restriction_reproduces_joint(seed in any::<u64>()) {
        let (prep, meas) = random_device_pair(seed).unwrap();
        prop_assert!(appendix_equivalence(&prep, &meas).unwrap().max_deviation <= 1e-10);
    }

    #[test]
    fn collapse_time_is_arbitrary(seed in any::<u64>(), dim in 2usize..=6) {
        let (prep, meas) = retrodict_core::random::random_device_pair_in(seed, dim..=dim).unwrap();
        let ctx = EvolutionContext::new(random_unitary(dim, seed ^ 0xA5A5).unwrap(), 0.0, 1.0).unwrap();
        let forward = retrodictive_evolved(&ctx, &prep, &meas).unwrap();
        let backward = retrodictive_backward(&ctx, &prep, &meas).unwrap();
        prop_assert!(forward.max_deviation(&backward) <= 1e-10);
    }
}

#[test]
fn unbiased_measurement_reduces_to_detection_rule() {
    for seed in 0..100 {
        let prep = random_biased_device(Role::Preparation, 3, 3, seed).unwrap();
        let meas = random_unbiased_device(Role::Measurement, 3, 4, 0.7, seed + 1000).unwrap();
        let jd = joint(&prep, &meas).unwrap();
        let pred = predictive(&jd);
        let pom = mdo_to_pom(&meas).unwrap();
        for (i, label) in prep.labels().iter().enumerate() {
            let rho = pdo_to_density(&prep, label).unwrap();
            let row = pred.rows[i].as_ref().unwrap();
            for (j, meas_label) in meas.labels().iter().enumerate() {
                let expected = detection_probability(&rho, &pom, meas_label).unwrap();
                assert!((row[j] - expected).abs() <= 1e-12, "seed {seed}");
            }
        }
        let prior = a_priori_distribution(&prep).unwrap();
        for (x, y) in marginal_prep(&jd).iter().zip(&prior) {
            assert!((x - y).abs() <= 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn unbiased_preparation_reduces_to_retrodiction_rule() {
    for seed in 0..100 {
        let prep = random_unbiased_device(Role::Preparation, 3, 4, 0.2, seed).unwrap();
        let meas = random_biased_device(Role::Measurement, 3, 3, seed + 1000).unwrap();
        let retro = retrodictive(&joint(&prep, &meas).unwrap());
        let xi = preparation_pom(&prep).unwrap();
        for (j, meas_label) in meas.labels().iter().enumerate() {
            let rho = retr_density(&meas, meas_label).unwrap();
            let row = retro.rows[j].as_ref().unwrap();
            for (i, label) in prep.labels().iter().enumerate() {
                let expected = retrodictive_unbiased(&xi, &rho, label).unwrap();
                assert!((row[i] - expected).abs() <= 1e-12, "seed {seed}");
            }
        }
    }
}

#[test]
fn evolution_composes() {
    for seed in 0..30 {
        let prep = random_biased_device(Role::Preparation, 4, 3, seed).unwrap();
        let u1 = random_unitary(4, seed + 1).unwrap();
        let u2 = random_unitary(4, seed + 2).unwrap();
        let ctx = |u| EvolutionContext::new(u, 0.0, 1.0).unwrap();
        let twice = evolve_pdo(&ctx(u2.clone()), &evolve_pdo(&ctx(u1.clone()), &prep).unwrap()).unwrap();
        let once = evolve_pdo(&ctx(u2.after(&u1).unwrap()), &prep).unwrap();
        for (a, b) in twice.operators().iter().zip(once.operators()) {
            assert!(a.sub(b).unwrap().max_abs() <= 1e-12);
        }
    }
}

#[test]
fn heisenberg_picture_matches_schrodinger_picture() {
    for seed in 0..50 {
        let prep = random_biased_device(Role::Preparation, 3, 3, seed).unwrap();
        let pom = random_pom(3, 4, seed + 7).unwrap();
        let u = random_unitary(3, seed + 11).unwrap();
        let ctx = EvolutionContext::new(u.clone(), 0.0, 2.0).unwrap();
        let h = heisenberg_pom(&ctx, &pom).unwrap();
        for label in prep.labels() {
            let rho = pdo_to_density(&prep, label).unwrap();
            let evolved = DensityOperator::new(conjugate_by(&u, rho.op()).unwrap()).unwrap();
            for j in pom.labels() {
                let a = detection_probability(&rho, &h, j).unwrap();
                let b = detection_probability(&evolved, &pom, j).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn no_measurement_device_returns_the_prior() {
    for seed in 0..50 {
        let prep = random_biased_device(Role::Preparation, 3, 4, seed).unwrap();
        let identity = retrodict_core::SquareMatrix::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let meas = build_device(Role::Measurement, vec![("1", identity)]).unwrap();
        let retro = retrodictive(&joint(&prep, &meas).unwrap());
        let prior = a_priori_distribution(&prep).unwrap();
        for (x, y) in retro.rows[0].as_ref().unwrap().iter().zip(&prior) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}
