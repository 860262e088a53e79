//! Seeded random devices, POMs and bases for property checks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::device::{build_device, DeviceOperatorSet, Pom, Role};
use crate::error::Result;
use crate::operator::{inverse_sqrt, random_psd, random_unitary, HermitianOperator, Tolerances};

fn child_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.random()
}

/// Random POM with `n` elements: `Π_k = S^{-1/2} A_k S^{-1/2}` with
/// `S = Σ A_k` for random PSD `A_k`.
pub fn random_pom(dim: usize, n: usize, seed: u64) -> Result<Pom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = (0..n)
        .map(|_| random_psd(dim, child_seed(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let s = HermitianOperator::sum(dim, &raw)?;
    let s_inv_half = inverse_sqrt(&s)?;
    let elements = raw
        .iter()
        .map(|a| HermitianOperator::from_exact(s_inv_half.raw() * a.raw() * s_inv_half.raw()))
        .collect();
    let labels = (1..=n).map(|k| k.to_string()).collect();
    Pom::new(labels, elements, Tolerances::default().psd)
}

/// Device whose operators are `γ·Π_k` for a random POM, hence unbiased.
pub fn random_unbiased_device(role: Role, dim: usize, n: usize, gamma: f64, seed: u64) -> Result<DeviceOperatorSet> {
    let pom = random_pom(dim, n, seed)?;
    let items = pom
        .iter()
        .map(|(l, e)| (l.to_string(), e.scaled(gamma).matrix().clone()))
        .collect();
    build_device(role, items)
}

/// Device with `n` random operators of random weight in `[0.05, 1)`.
/// Roughly a third of the operators are rank one.
pub fn random_biased_device(role: Role, dim: usize, n: usize, seed: u64) -> Result<DeviceOperatorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (1..=n)
        .map(|k| {
            let weight = rng.random_range(0.05..1.0);
            let op = if rng.random_range(0..3) == 0 {
                let v = random_unitary(dim, child_seed(&mut rng))?.column(0);
                HermitianOperator::projector(&v)?
            } else {
                random_psd(dim, child_seed(&mut rng))?
            };
            Ok((k.to_string(), op.scaled(weight).matrix().clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    build_device(role, items)
}

/// Random orthonormal basis (columns of a Haar unitary).
pub fn random_basis(dim: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    let u = random_unitary(dim, seed)?;
    Ok((0..dim).map(|k| u.column(k)).collect())
}

/// A mixed instance family: `d ∈ {2..5}`, 2–6 operators per device, each
/// device unbiased with probability 1/4.
pub fn random_device_pair(seed: u64) -> Result<(DeviceOperatorSet, DeviceOperatorSet)> {
    random_device_pair_in(seed, 2..=5)
}

pub fn random_device_pair_in(
    seed: u64,
    dims: std::ops::RangeInclusive<usize>,
) -> Result<(DeviceOperatorSet, DeviceOperatorSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(dims);
    let device = |role: Role, rng: &mut ChaCha8Rng| -> Result<DeviceOperatorSet> {
        let n = rng.random_range(2..=6);
        if rng.random_range(0..4) == 0 {
            let gamma = rng.random_range(0.1..1.0);
            random_unbiased_device(role, dim, n, gamma, child_seed(rng))
        } else {
            random_biased_device(role, dim, n, child_seed(rng))
        }
    };
    let prep = device(Role::Preparation, &mut rng)?;
    let meas = device(Role::Measurement, &mut rng)?;
    Ok((prep, meas))
}
