//! Acceptance criteria. Prints one `[PASS]` or `[FAIL]` line per criterion
//! and exits nonzero if any fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use retrodict_core::device::{
    a_priori_distribution, build_device, classify_bias, mdo_to_pom, pdo_to_density, preparation_pom, retr_density,
};
use retrodict_core::evolution::{retrodictive_backward, retrodictive_evolved};
use retrodict_core::operator::random_unitary;
use retrodict_core::probability::{
    detection_probability, joint, marginal_meas, marginal_prep, predictive, retrodictive, retrodictive_unbiased,
};
use retrodict_core::random::{
    random_basis, random_biased_device, random_device_pair, random_device_pair_in, random_unbiased_device,
};
use retrodict_core::scenarios::{
    appendix_equivalence, belinfante_iff_check, belinfante_retrodictive, spin_half_scenario, BelinfanteScenario,
};
use retrodict_core::sim::{run_experiment_chunked, tabulate, RngSeed};
use retrodict_core::{DensityOperator, DeviceOperatorSet, HermitianOperator, Role, SquareMatrix};

const INSTANCES: u64 = 200;

fn verdict(id: u32, title: &str, passed: bool, detail: String) -> bool {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] AC-{id} {title}: {detail}");
    passed
}

fn rescaled(dev: &DeviceOperatorSet, c: f64) -> DeviceOperatorSet {
    dev.map_operators(|op| Ok(op.scaled(c))).unwrap()
}

/// Deterministic log-uniform constant in `[1e-3, 1e3]`.
fn gauge_constant(seed: u64, salt: u64) -> f64 {
    let u = (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt).wrapping_mul(0xBF58_476D_1CE4_E5B9) >> 11;
    let frac = u as f64 / (1u64 << 53) as f64;
    10f64.powf(6.0 * frac - 3.0)
}

fn ac01_postulate_equivalence() -> bool {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let (prep, meas) = random_device_pair(seed).unwrap();
        worst = worst.max(appendix_equivalence(&prep, &meas).unwrap().max_deviation);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "postulate equivalence",
        worst <= 1e-10 && secs < 5.0,
        format!("max |Δ| = {worst:e} over {INSTANCES} pairs (≤ 1e-10), {secs:.2} s (< 5 s)"),
    )
}

fn ac02_bayes_consistency() -> bool {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..INSTANCES {
        let (prep, meas) = random_device_pair(seed).unwrap();
        let jd = joint(&prep, &meas).unwrap();
        let (pi, pj) = (marginal_prep(&jd), marginal_meas(&jd));
        let (pred, retro) = (predictive(&jd), retrodictive(&jd));
        for (i, row) in jd.p.iter().enumerate() {
            for (j, &pij) in row.iter().enumerate() {
                if let Some(r) = &pred.rows[i] {
                    worst = worst.max((pij - pi[i] * r[j]).abs());
                    checked += 1;
                }
                if let Some(c) = &retro.rows[j] {
                    worst = worst.max((pij - pj[j] * c[i]).abs());
                    checked += 1;
                }
            }
        }
    }
    verdict(
        2,
        "Bayes consistency",
        worst <= 1e-12,
        format!("max |Δ| = {worst:e} over {checked} defined entries (≤ 1e-12)"),
    )
}

fn ac03_gauge_invariance() -> bool {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let (prep, meas) = random_device_pair(seed).unwrap();
        let base = joint(&prep, &meas).unwrap();
        let scaled = joint(
            &rescaled(&prep, gauge_constant(seed, 1)),
            &rescaled(&meas, gauge_constant(seed, 2)),
        )
        .unwrap();
        for (x, y) in base.p.iter().flatten().zip(scaled.p.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
    }
    verdict(
        3,
        "gauge invariance",
        worst <= 1e-12,
        format!("max |Δ| = {worst:e} over {INSTANCES} rescaled pairs (≤ 1e-12)"),
    )
}

fn ac04_unbiased_reductions() -> bool {
    let (mut pred_worst, mut prior_worst, mut retro_worst) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100 {
        let dim = 2 + (seed % 4) as usize;

        let prep = random_biased_device(Role::Preparation, dim, 3, seed).unwrap();
        let meas = random_unbiased_device(Role::Measurement, dim, 4, 0.6, seed + 5000).unwrap();
        assert!(classify_bias(&meas).is_unbiased);
        let jd = joint(&prep, &meas).unwrap();
        let pred = predictive(&jd);
        let pom = mdo_to_pom(&meas).unwrap();
        for (i, label) in prep.labels().iter().enumerate() {
            let rho = pdo_to_density(&prep, label).unwrap();
            let row = pred.rows[i].as_ref().unwrap();
            for (j, meas_label) in meas.labels().iter().enumerate() {
                pred_worst = pred_worst.max((row[j] - detection_probability(&rho, &pom, meas_label).unwrap()).abs());
            }
        }
        for (x, y) in marginal_prep(&jd).iter().zip(a_priori_distribution(&prep).unwrap()) {
            prior_worst = prior_worst.max((x - y).abs());
        }

        let prep = random_unbiased_device(Role::Preparation, dim, 4, 0.3, seed + 9000).unwrap();
        let meas = random_biased_device(Role::Measurement, dim, 3, seed + 13000).unwrap();
        assert!(classify_bias(&prep).is_unbiased);
        let retro = retrodictive(&joint(&prep, &meas).unwrap());
        let xi = preparation_pom(&prep).unwrap();
        for (j, meas_label) in meas.labels().iter().enumerate() {
            let rho = retr_density(&meas, meas_label).unwrap();
            let row = retro.rows[j].as_ref().unwrap();
            for (i, label) in prep.labels().iter().enumerate() {
                retro_worst = retro_worst.max((row[i] - retrodictive_unbiased(&xi, &rho, label).unwrap()).abs());
            }
        }
    }
    let worst = pred_worst.max(prior_worst).max(retro_worst);
    verdict(
        4,
        "unbiased reductions",
        worst <= 1e-12,
        format!(
            "predictive {pred_worst:e}, prior {prior_worst:e}, retrodictive {retro_worst:e} over 100 instances each (≤ 1e-12)"
        ),
    )
}

fn ac05_no_measurement_device() -> bool {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let dim = 2 + (seed % 4) as usize;
        let prep = random_biased_device(Role::Preparation, dim, 2 + (seed % 5) as usize, seed).unwrap();
        let identity = SquareMatrix::diagonal(&vec![1.0; dim]).unwrap();
        let meas = build_device(Role::Measurement, vec![("1", identity)]).unwrap();
        let retro = retrodictive(&joint(&prep, &meas).unwrap());
        let row = retro.row("1").unwrap().unwrap();
        for (x, y) in row.iter().zip(a_priori_distribution(&prep).unwrap()) {
            worst = worst.max((x - y).abs());
        }
    }
    verdict(
        5,
        "no-measurement device",
        worst <= 1e-12,
        format!("max |P(i|1) - P(i)| = {worst:e} over 100 biased preparations (≤ 1e-12)"),
    )
}

fn ac06_spin_half() -> bool {
    let scenario = spin_half_scenario();
    let plus = HermitianOperator::projector(&[Complex64::new(0.5f64.sqrt(), 0.0); 2]).unwrap();
    let meas = build_device(Role::Measurement, vec![("1", plus.matrix().clone())]).unwrap();
    let p_up = retrodictive(&joint(&scenario.prep, &meas).unwrap())
        .get("1", "up")
        .unwrap()
        .unwrap();
    let bias = classify_bias(&scenario.prep);
    let gamma = bias.gamma.unwrap_or(f64::NAN);
    let passed = (p_up - 0.5).abs() <= 1e-12 && bias.is_unbiased && (gamma - 0.5).abs() <= 1e-12;
    verdict(
        6,
        "spin-half",
        passed,
        format!("P(up|+) = {p_up}, unbiased = {}, γ = {gamma}", bias.is_unbiased),
    )
}

fn ac07_belinfante_iff() -> bool {
    let mut uniform_worst = 0.0f64;
    for dim in [2usize, 3] {
        for seed in 0..50 {
            let rho = DensityOperator::maximally_mixed(dim).unwrap();
            let a = random_basis(dim, 2 * seed + 1).unwrap();
            let b = random_basis(dim, 2 * seed + 2).unwrap();
            let s = BelinfanteScenario::new(rho, a, b).unwrap();
            let overlaps = s.overlaps();
            let table = belinfante_retrodictive(&s).unwrap().pipeline;
            for (j, row) in table.rows.iter().enumerate() {
                for (i, p) in row.as_ref().unwrap().iter().enumerate() {
                    uniform_worst = uniform_worst.max((p - overlaps[i][j]).abs());
                }
            }
        }
    }

    let h = 0.5f64.sqrt();
    let c = |x: f64| Complex64::new(x, 0.0);
    let rho = DensityOperator::new(HermitianOperator::diagonal(&[0.75, 0.25]).unwrap()).unwrap();
    let s = BelinfanteScenario::new(
        rho,
        BelinfanteScenario::computational_basis(2),
        vec![vec![c(h), c(h)], vec![c(h), c(-h)]],
    )
    .unwrap();
    let p = belinfante_retrodictive(&s)
        .unwrap()
        .pipeline
        .get("1", "1")
        .unwrap()
        .unwrap();
    let report = belinfante_iff_check(&s).unwrap();

    let passed = uniform_worst <= 1e-12 && (p - 0.75).abs() <= 1e-12 && report.max_deviation > 0.2;
    verdict(
        7,
        "Belinfante iff",
        passed,
        format!(
            "uniform max |Δ| = {uniform_worst:e} over 100 basis pairs; biased P(1|+) = {p}, deviation {}",
            report.max_deviation
        ),
    )
}

fn ac08_collapse_time() -> bool {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let (prep, meas) = random_device_pair_in(seed, 2..=6).unwrap();
        let u = random_unitary(prep.dim(), seed.wrapping_add(0xC0FFEE)).unwrap();
        let ctx = retrodict_core::EvolutionContext::new(u, 0.0, 1.0).unwrap();
        let forward = retrodictive_evolved(&ctx, &prep, &meas).unwrap();
        let backward = retrodictive_backward(&ctx, &prep, &meas).unwrap();
        worst = worst.max(forward.max_deviation(&backward));
    }
    verdict(
        8,
        "collapse-time arbitrariness",
        worst <= 1e-10,
        format!("max |Δ| = {worst:e} over {INSTANCES} (U, pair) instances, d ≤ 6 (≤ 1e-10)"),
    )
}

fn ac09_monte_carlo() -> bool {
    let prep = build_device(
        Role::Preparation,
        vec![
            ("1", SquareMatrix::diagonal(&[0.6, 0.0]).unwrap()),
            ("2", SquareMatrix::diagonal(&[0.0, 0.4]).unwrap()),
        ],
    )
    .unwrap();
    let h = 0.5f64.sqrt();
    let plus = HermitianOperator::projector(&[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]).unwrap();
    let minus = HermitianOperator::projector(&[Complex64::new(h, 0.0), Complex64::new(-h, 0.0)]).unwrap();
    let meas = build_device(
        Role::Measurement,
        vec![("1", plus.matrix().clone()), ("2", minus.matrix().clone())],
    )
    .unwrap();

    let n = 100_000;
    let start = Instant::now();
    let log = run_experiment_chunked(&prep, &meas, n, RngSeed(1), 1).unwrap();
    let table = tabulate(&log, &prep, &meas).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let identical = [4, 16].iter().all(|&chunks| {
        let other = run_experiment_chunked(&prep, &meas, n, RngSeed(1), chunks).unwrap();
        tabulate(&other, &prep, &meas).unwrap().counts == table.counts
    });

    let passed = table.max_abs_z <= 5.0 && table.max_abs_diff <= 0.01 && identical && secs < 3.0;
    verdict(
        9,
        "Monte Carlo convergence",
        passed,
        format!(
            "max |z| = {:.3}, max |p̂ - p| = {:.5}, chunks 1/4/16 identical = {identical}, {secs:.2} s",
            table.max_abs_z, table.max_abs_diff
        ),
    )
}

fn ac10_cli_determinism() -> bool {
    let docs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/devices");
    let run = |file: &PathBuf, extra: &[&str], threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_retrodict"))
            .arg("report")
            .arg(file)
            .args(extra)
            .env("RETRODICT_THREADS", threads)
            .output()
            .unwrap();
        (out.status.code(), out.stdout)
    };
    let mut failures = Vec::new();
    let mut runs = 0;
    for name in ["spin-half.json", "biased-pair-d2.json", "belinfante-d3.json"] {
        let file = docs.join(name);
        for (extra, threads) in [
            (&[][..], ("1", "1")),
            (&["--trials", "20000", "--seed", "7"][..], ("1", "8")),
        ] {
            let (code_a, out_a) = run(&file, extra, threads.0);
            let (code_b, out_b) = run(&file, extra, threads.1);
            runs += 2;
            if code_a != Some(0) || code_b != Some(0) {
                failures.push(format!("{name}: exit {code_a:?}/{code_b:?}"));
            } else if out_a != out_b || out_a.is_empty() {
                failures.push(format!("{name}: output differs"));
            }
        }
    }
    verdict(
        10,
        "CLI determinism",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} report runs over 3 shipped files, byte-identical, exit 0")
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> bool; 10] = [
        ac01_postulate_equivalence,
        ac02_bayes_consistency,
        ac03_gauge_invariance,
        ac04_unbiased_reductions,
        ac05_no_measurement_device,
        ac06_spin_half,
        ac07_belinfante_iff,
        ac08_collapse_time,
        ac09_monte_carlo,
        ac10_cli_determinism,
    ];
    let failed = criteria.iter().filter(|run| !run()).count();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
