//! Monte Carlo simulation of the prepare-and-measure experiment.
//!
//! Each trial draws a preparation event `i` from the a priori distribution,
//! then a measurement outcome `k` from `Tr(ρ_i Π_k)` over the extended POM
//! (measurement operators plus the null element `1 - Γ`). Null outcomes are
//! logged and later discarded when tabulating.
//!
//! Trials are grouped into fixed-size blocks; block `b` draws from its own
//! ChaCha8 stream seeded with `seed ^ (b · 0x9E3779B97F4A7C15)`. Workers own
//! contiguous runs of blocks, so the log is identical for any worker count.

use std::num::NonZeroUsize;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceOperatorSet, Role, NULL_LABEL};
use crate::error::{Error, Result};
use crate::operator::{trace, trace_pair};
use crate::probability::joint;
use crate::scenarios::{appendix_extend, expected_null_fraction};

/// Trials per RNG sub-stream.
pub const BLOCK_SIZE: u64 = 4096;

pub const SUBSTREAM_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

/// Lower bound on `p(1-p)` in the z-score denominator.
pub const Z_VARIANCE_FLOOR: f64 = 1e-12;

/// Environment variable capping simulation threads.
pub const THREADS_ENV: &str = "RETRODICT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn substream(self, block: u64) -> u64 {
        self.0 ^ block.wrapping_mul(SUBSTREAM_MULTIPLIER)
    }
}

/// One trial: preparation index and measurement index (`None` = null outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub trial: u64,
    pub prep: usize,
    pub outcome: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub seed: RngSeed,
    pub n_trials: u64,
    pub prep_labels: Vec<String>,
    pub meas_labels: Vec<String>,
    pub records: Vec<EventRecord>,
    pub n_discarded: u64,
}

impl ExperimentLog {
    pub fn outcome_label(&self, outcome: Option<usize>) -> &str {
        match outcome {
            Some(k) => &self.meas_labels[k],
            None => NULL_LABEL,
        }
    }
}

/// Cumulative sums with Neumaier compensation, normalized so the last entry
/// is exactly 1.
fn cdf(weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(weights.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &w in weights {
        let t = sum + w;
        if sum.abs() >= w.abs() {
            comp += (sum - t) + w;
        } else {
            comp += (w - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    let total = *out.last().unwrap_or(&0.0);
    for x in &mut out {
        *x /= total;
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Smallest index with `u < cdf[idx]`; zero-width entries are never chosen.
fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    match cdf.iter().position(|&c| u < c) {
        Some(idx) => idx,
        None => cdf.len() - 1,
    }
}

struct Sampler {
    prior_cdf: Vec<f64>,
    /// Per preparation event, CDF over measurement labels then null.
    outcome_cdfs: Vec<Vec<f64>>,
    n_meas: usize,
}

impl Sampler {
    fn new(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<Self> {
        let ext = appendix_extend(meas)?;
        let prep_total = trace(prep.total());
        let prior: Vec<f64> = prep
            .operators()
            .iter()
            .map(|op| trace(op).max(0.0) / prep_total)
            .collect();
        let outcome_cdfs = prep
            .operators()
            .iter()
            .map(|op| {
                let tr = trace(op);
                if tr <= 0.0 {
                    // never sampled
                    return Ok(vec![1.0; ext.pom.elements().len()]);
                }
                let rho = op.scaled(1.0 / tr);
                let probs = ext
                    .pom
                    .elements()
                    .iter()
                    .map(|pi| Ok(trace_pair(&rho, pi)?.max(0.0)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(cdf(&probs))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler {
            prior_cdf: cdf(&prior),
            outcome_cdfs,
            n_meas: meas.len(),
        })
    }

    fn run_block(&self, seed: RngSeed, block: u64, n_trials: u64, out: &mut Vec<EventRecord>) {
        let start = block * BLOCK_SIZE;
        let end = (start + BLOCK_SIZE).min(n_trials);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.substream(block));
        for trial in start..end {
            let i = inverse_cdf(&self.prior_cdf, rng.random::<f64>());
            let k = inverse_cdf(&self.outcome_cdfs[i], rng.random::<f64>());
            let outcome = (k < self.n_meas).then_some(k);
            out.push(EventRecord {
                trial,
                prep: i,
                outcome,
            });
        }
    }
}

/// Worker count: available parallelism, capped by `RETRODICT_THREADS`.
pub fn worker_count() -> usize {
    let available = thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1);
    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => cap.min(available),
        _ => available,
    }
}

pub fn run_experiment(
    prep: &DeviceOperatorSet,
    meas: &DeviceOperatorSet,
    n_trials: u64,
    seed: RngSeed,
) -> Result<ExperimentLog> {
    run_experiment_chunked(prep, meas, n_trials, seed, 1)
}

/// Runs the experiment split across `chunks` workers. The log does not depend
/// on `chunks`.
pub fn run_experiment_chunked(
    prep: &DeviceOperatorSet,
    meas: &DeviceOperatorSet,
    n_trials: u64,
    seed: RngSeed,
    chunks: usize,
) -> Result<ExperimentLog> {
    if prep.role() != Role::Preparation {
        return Err(Error::WrongRole {
            expected: "preparation",
        });
    }
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    // rejects dimension mismatches and pairs that never record an event
    joint(prep, meas)?;
    let sampler = Sampler::new(prep, meas)?;

    let n_blocks = n_trials.div_ceil(BLOCK_SIZE);
    let chunks = (chunks.max(1) as u64).min(n_blocks);
    let per_chunk = n_blocks.div_ceil(chunks);
    let parts: Vec<Vec<EventRecord>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..chunks)
            .map(|c| {
                let sampler = &sampler;
                scope.spawn(move || {
                    let first = c * per_chunk;
                    let last = ((c + 1) * per_chunk).min(n_blocks);
                    let mut out = Vec::with_capacity(((last.saturating_sub(first)) * BLOCK_SIZE) as usize);
                    for block in first..last {
                        sampler.run_block(seed, block, n_trials, &mut out);
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    let records: Vec<EventRecord> = parts.into_iter().flatten().collect();
    let n_discarded = records.iter().filter(|r| r.outcome.is_none()).count() as u64;
    Ok(ExperimentLog {
        seed,
        n_trials,
        prep_labels: prep.labels().to_vec(),
        meas_labels: meas.labels().to_vec(),
        records,
        n_discarded,
    })
}

/// Observed combined-event frequencies against the symmetric-rule joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub prep_labels: Vec<String>,
    pub meas_labels: Vec<String>,
    pub n_trials: u64,
    pub n_discarded: u64,
    pub kept_total: u64,
    pub counts: Vec<Vec<u64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub max_abs_z: f64,
    pub max_abs_diff: f64,
    /// Predicted long-run null fraction `1 - Tr(ρΓ)`.
    pub expected_null_fraction: f64,
    /// z-score of the observed null fraction.
    pub null_z: f64,
}

fn z_score(observed: f64, expected: f64, n: u64) -> f64 {
    let var = (expected * (1.0 - expected)).max(Z_VARIANCE_FLOOR);
    (observed - expected) * (n as f64 / var).sqrt()
}

pub fn tabulate(log: &ExperimentLog, prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<FrequencyTable> {
    if log.prep_labels != prep.labels() {
        return Err(Error::Schema {
            field: "log.prep_labels".into(),
            message: "do not match the preparation device".into(),
        });
    }
    if log.meas_labels != meas.labels() {
        return Err(Error::Schema {
            field: "log.meas_labels".into(),
            message: "do not match the measurement device".into(),
        });
    }
    let (n_i, n_j) = (prep.len(), meas.len());
    let mut counts = vec![vec![0u64; n_j]; n_i];
    for r in &log.records {
        if let Some(k) = r.outcome {
            counts[r.prep][k] += 1;
        }
    }
    let kept_total: u64 = counts.iter().flatten().sum();
    if kept_total == 0 {
        return Err(Error::EmptyKeptSet);
    }
    let jd = joint(prep, meas)?;
    let p_hat: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / kept_total as f64).collect())
        .collect();
    let mut z = vec![vec![0.0; n_j]; n_i];
    let (mut max_abs_z, mut max_abs_diff) = (0.0f64, 0.0f64);
    for i in 0..n_i {
        for j in 0..n_j {
            z[i][j] = z_score(p_hat[i][j], jd.p[i][j], kept_total);
            max_abs_z = max_abs_z.max(z[i][j].abs());
            max_abs_diff = max_abs_diff.max((p_hat[i][j] - jd.p[i][j]).abs());
        }
    }
    let expected_null = expected_null_fraction(prep, meas)?.clamp(0.0, 1.0);
    let null_z = z_score(
        log.n_discarded as f64 / log.n_trials as f64,
        expected_null,
        log.n_trials,
    );
    Ok(FrequencyTable {
        prep_labels: prep.labels().to_vec(),
        meas_labels: meas.labels().to_vec(),
        n_trials: log.n_trials,
        n_discarded: log.n_discarded,
        kept_total,
        counts,
        p_hat,
        p: jd.p,
        z,
        max_abs_z,
        max_abs_diff,
        expected_null_fraction: expected_null,
        null_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::build_device;
    use crate::operator::SquareMatrix;

    fn diag(d: &[f64]) -> SquareMatrix {
        SquareMatrix::diagonal(d).unwrap()
    }

    #[test]
    fn cdf_and_inverse() {
        let c = cdf(&[0.25, 0.0, 0.75]);
        assert_eq!(c, vec![0.25, 0.25, 1.0]);
        assert_eq!(inverse_cdf(&c, 0.0), 0);
        assert_eq!(inverse_cdf(&c, 0.25), 2);
        assert_eq!(inverse_cdf(&c, 0.2499), 0);
        assert_eq!(inverse_cdf(&c, 0.999_999), 2);
        let z = cdf(&[0.0, 1.0]);
        assert_eq!(inverse_cdf(&z, 0.0), 1);
    }

    #[test]
    fn substream_derivation() {
        assert_eq!(RngSeed(5).substream(0), 5);
        assert_eq!(RngSeed(0).substream(1), SUBSTREAM_MULTIPLIER);
        assert_eq!(RngSeed(1).substream(2), 1 ^ SUBSTREAM_MULTIPLIER.wrapping_mul(2));
    }

    #[test]
    fn deterministic_chain() {
        let prep = build_device(Role::Preparation, vec![("1", diag(&[1.0, 0.0]))]).unwrap();
        let meas = build_device(Role::Measurement, vec![("1", diag(&[1.0, 0.0]))]).unwrap();
        let log = run_experiment(&prep, &meas, 1000, RngSeed(3)).unwrap();
        assert!(log.records.iter().all(|r| r.prep == 0 && r.outcome == Some(0)));
        let t = tabulate(&log, &prep, &meas).unwrap();
        assert_eq!(t.p_hat, vec![vec![1.0]]);
        assert_eq!(t.max_abs_z, 0.0);
    }

    #[test]
    fn no_measurement_never_discards() {
        let prep = build_device(
            Role::Preparation,
            vec![("a", diag(&[0.7, 0.0])), ("b", diag(&[0.0, 0.3]))],
        )
        .unwrap();
        let meas = build_device(Role::Measurement, vec![("1", diag(&[1.0, 1.0]))]).unwrap();
        let log = run_experiment(&prep, &meas, 20_000, RngSeed(11)).unwrap();
        assert_eq!(log.n_discarded, 0);
        let t = tabulate(&log, &prep, &meas).unwrap();
        assert!(t.max_abs_z <= 5.0);
        assert!((t.p_hat[0][0] - 0.7).abs() < 0.02);
    }

    #[test]
    fn same_seed_same_log() {
        let prep = build_device(
            Role::Preparation,
            vec![("a", diag(&[0.7, 0.1])), ("b", diag(&[0.2, 0.3]))],
        )
        .unwrap();
        let meas = build_device(Role::Measurement, vec![("x", diag(&[0.5, 0.1]))]).unwrap();
        let a = run_experiment(&prep, &meas, 10_000, RngSeed(9)).unwrap();
        let b = run_experiment(&prep, &meas, 10_000, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&prep, &meas, 10_000, RngSeed(10)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn chunking_does_not_change_the_log() {
        let prep = build_device(
            Role::Preparation,
            vec![("a", diag(&[0.7, 0.1])), ("b", diag(&[0.2, 0.3]))],
        )
        .unwrap();
        let meas = build_device(
            Role::Measurement,
            vec![("x", diag(&[0.5, 0.1])), ("y", diag(&[0.1, 0.4]))],
        )
        .unwrap();
        let one = run_experiment_chunked(&prep, &meas, 50_001, RngSeed(2), 1).unwrap();
        for chunks in [2, 3, 4, 16, 100] {
            let many = run_experiment_chunked(&prep, &meas, 50_001, RngSeed(2), chunks).unwrap();
            assert_eq!(one, many, "chunks = {chunks}");
        }
    }

    #[test]
    fn errors() {
        let prep = build_device(Role::Preparation, vec![("a", diag(&[1.0, 0.0]))]).unwrap();
        let orth = build_device(Role::Measurement, vec![("x", diag(&[0.0, 1.0]))]).unwrap();
        assert!(matches!(
            run_experiment(&prep, &orth, 10, RngSeed(0)),
            Err(Error::DegeneratePair(_))
        ));
        let meas = build_device(Role::Measurement, vec![("x", diag(&[1.0, 0.0]))]).unwrap();
        assert_eq!(run_experiment(&prep, &meas, 0, RngSeed(0)), Err(Error::NoTrials));
    }

    #[test]
    fn empty_kept_set() {
        let prep = build_device(Role::Preparation, vec![("a", diag(&[1.0, 0.0]))]).unwrap();
        let meas = build_device(Role::Measurement, vec![("x", diag(&[1.0, 0.0]))]).unwrap();
        let mut log = run_experiment(&prep, &meas, 10, RngSeed(0)).unwrap();
        for r in &mut log.records {
            r.outcome = None;
        }
        log.n_discarded = 10;
        assert_eq!(tabulate(&log, &prep, &meas), Err(Error::EmptyKeptSet));
    }
}
