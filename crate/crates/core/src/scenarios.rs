//! Worked scenarios: the spin-half preparation device, the garbled-state
//! von Neumann chain, and the extended measurement device whose null outcome
//! turns any measurement device into a POM.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{build_device_with, DensityOperator, DeviceOperatorSet, Pom, Role, NULL_LABEL};
use crate::error::{Error, Result};
use crate::operator::{
    proportionality_to_identity, same_dim, trace, trace_pair, HermitianOperator, SquareMatrix, Tolerances,
};
use crate::probability::{joint, retrodictive, ConditionalTable, GivenAxis};

/// Orthonormality tolerance for user-supplied basis vectors.
pub const BASIS_TOL: f64 = 1e-8;

/// Verdict threshold separating "agrees with overlap-squared retrodiction"
/// from "does not".
pub const IFF_DEVIATION_TOL: f64 = 1e-9;

/// Spin-half preparation device `{½|up⟩⟨up|, ½|down⟩⟨down|}` with
/// `|up⟩ = (1, 0)` and `|down⟩ = (0, 1)`.
#[derive(Debug, Clone)]
pub struct SpinHalfScenario {
    pub prep: DeviceOperatorSet,
}

pub fn spin_half_scenario() -> SpinHalfScenario {
    let up = SquareMatrix::diagonal(&[0.5, 0.0]).expect("2x2");
    let down = SquareMatrix::diagonal(&[0.0, 0.5]).expect("2x2");
    let prep = build_device_with(
        Role::Preparation,
        vec![("up", up), ("down", down)],
        &Tolerances::default(),
    )
    .expect("spin-half device is valid");
    SpinHalfScenario { prep }
}

impl SpinHalfScenario {
    /// `P(up|j) = ⟨up|ρ_j^retr|up⟩` for a measurement operator `Γ_j`.
    pub fn closed_form_up(&self, gamma_j: &HermitianOperator) -> Result<f64> {
        same_dim(2, gamma_j.dim())?;
        let rho = DensityOperator::normalized(gamma_j, "gamma_j")?;
        Ok(rho.op().get(0, 0).re)
    }
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(x, y)| x.conj() * y).sum()
}

fn validate_basis(vectors: &[Vec<Complex64>], dim: usize) -> Result<()> {
    if vectors.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: vectors.len(),
        });
    }
    for v in vectors {
        same_dim(dim, v.len())?;
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotOrthonormal(f64::INFINITY));
        }
    }
    let mut defect = 0.0f64;
    for (k, u) in vectors.iter().enumerate() {
        for (l, v) in vectors.iter().enumerate() {
            let target = if k == l { 1.0 } else { 0.0 };
            defect = defect.max((inner(u, v) - Complex64::new(target, 0.0)).norm());
        }
    }
    if defect > BASIS_TOL {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(())
}

/// A garbled state `ρ_g` measured in the `a` basis (the preparation) and
/// later in the `b` basis (the measurement).
#[derive(Debug, Clone)]
pub struct BelinfanteScenario {
    rho_g: DensityOperator,
    a_basis: Vec<Vec<Complex64>>,
    b_basis: Vec<Vec<Complex64>>,
}

impl BelinfanteScenario {
    pub fn new(rho_g: DensityOperator, a_basis: Vec<Vec<Complex64>>, b_basis: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rho_g.dim();
        validate_basis(&a_basis, dim)?;
        validate_basis(&b_basis, dim)?;
        Ok(BelinfanteScenario {
            rho_g,
            a_basis,
            b_basis,
        })
    }

    /// The computational basis of dimension `dim`.
    pub fn computational_basis(dim: usize) -> Vec<Vec<Complex64>> {
        (0..dim)
            .map(|k| {
                (0..dim)
                    .map(|r| Complex64::new(if r == k { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.rho_g.dim()
    }

    pub fn rho_g(&self) -> &DensityOperator {
        &self.rho_g
    }

    pub fn a_basis(&self) -> &[Vec<Complex64>] {
        &self.a_basis
    }

    pub fn b_basis(&self) -> &[Vec<Complex64>] {
        &self.b_basis
    }

    /// Event labels `"1"..="d"`, shared by both bases.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.dim()).map(|k| k.to_string()).collect()
    }

    /// `|⟨a_i|b_j⟩|²`, indexed `[i][j]`.
    pub fn overlaps(&self) -> Vec<Vec<f64>> {
        self.a_basis
            .iter()
            .map(|a| self.b_basis.iter().map(|b| inner(a, b).norm_sqr()).collect())
            .collect()
    }

    /// `⟨a_i|ρ_g|a_i⟩`, from the vectors directly.
    fn weights(&self) -> Vec<f64> {
        let m = self.rho_g.op();
        self.a_basis
            .iter()
            .map(|a| {
                let d = a.len();
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..d {
                    for c in 0..d {
                        acc += a[r].conj() * m.get(r, c) * a[c];
                    }
                }
                acc.re
            })
            .collect()
    }
}

/// `Λ_i = Tr(ρ_g Π_i^a) Π_i^a` and `Γ_j = Π_j^b`.
pub fn belinfante_build(s: &BelinfanteScenario) -> Result<(DeviceOperatorSet, DeviceOperatorSet)> {
    belinfante_build_with(s, &Tolerances::default())
}

pub fn belinfante_build_with(
    s: &BelinfanteScenario,
    tol: &Tolerances,
) -> Result<(DeviceOperatorSet, DeviceOperatorSet)> {
    let labels = s.labels();
    let a_proj = s
        .a_basis
        .iter()
        .map(|v| HermitianOperator::projector(v))
        .collect::<Result<Vec<_>>>()?;
    let weights = a_proj
        .iter()
        .map(|p| trace_pair(s.rho_g.op(), p))
        .collect::<Result<Vec<_>>>()?;
    if weights.iter().all(|w| !(*w > tol.psd)) {
        return Err(Error::DegenerateScenario("every preparation weight vanishes".into()));
    }
    let prep_items = labels
        .iter()
        .zip(a_proj.iter().zip(&weights))
        .map(|(l, (p, w))| (l.clone(), p.scaled(w.max(0.0)).matrix().clone()))
        .collect();
    let meas_items = labels
        .iter()
        .zip(&s.b_basis)
        .map(|(l, v)| Ok((l.clone(), HermitianOperator::projector(v)?.matrix().clone())))
        .collect::<Result<Vec<_>>>()?;
    let prep = build_device_with(Role::Preparation, prep_items, tol)?;
    let meas = build_device_with(Role::Measurement, meas_items, tol)?;
    Ok((prep, meas))
}

/// Closed-form garbled-state retrodiction alongside the generic pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelinfanteRetrodiction {
    /// `P(i|j) = w_i |⟨a_i|b_j⟩|² / Σ_i w_i |⟨a_i|b_j⟩|²`.
    pub closed_form: ConditionalTable,
    /// The same table from `joint` + `retrodictive` on the built devices.
    pub pipeline: ConditionalTable,
    pub max_deviation: f64,
}

pub fn belinfante_retrodictive(s: &BelinfanteScenario) -> Result<BelinfanteRetrodiction> {
    let labels = s.labels();
    let weights = s.weights();
    let overlaps = s.overlaps();
    let tol_denom = Tolerances::default().denom;
    let rows = (0..s.dim())
        .map(|j| {
            let terms: Vec<f64> = (0..s.dim()).map(|i| weights[i] * overlaps[i][j]).collect();
            let denom: f64 = terms.iter().sum();
            (denom > tol_denom).then(|| terms.iter().map(|t| t / denom).collect())
        })
        .collect();
    let closed_form = ConditionalTable {
        given_axis: GivenAxis::GivenMeas,
        given_labels: labels.clone(),
        outcome_labels: labels,
        rows,
    };
    let (prep, meas) = belinfante_build(s)?;
    let pipeline = retrodictive(&joint(&prep, &meas)?);
    let max_deviation = closed_form.max_deviation(&pipeline);
    Ok(BelinfanteRetrodiction {
        closed_form,
        pipeline,
        max_deviation,
    })
}

/// Compares retrodiction against bare overlap-squared inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelinfanteIffReport {
    /// `max |P(i|j) - |⟨a_i|b_j⟩|²|` over defined entries.
    pub max_deviation: f64,
    /// Whether `ρ_g` is proportional to the identity.
    pub proportional: bool,
    /// Whether `max_deviation ≤ IFF_DEVIATION_TOL` coincides with `proportional`.
    /// Fails for bases that share vectors, where overlap inversion is exact
    /// for any `ρ_g`.
    pub verdicts_agree: bool,
}

pub fn belinfante_iff_check(s: &BelinfanteScenario) -> Result<BelinfanteIffReport> {
    let retro = belinfante_retrodictive(s)?;
    let overlaps = s.overlaps();
    let mut max_deviation = 0.0f64;
    for (j, row) in retro.pipeline.rows.iter().enumerate() {
        if let Some(row) = row {
            for (i, p) in row.iter().enumerate() {
                max_deviation = max_deviation.max((p - overlaps[i][j]).abs());
            }
        }
    }
    let proportional = proportionality_to_identity(s.rho_g.op()).is_some();
    let verdicts_agree = (max_deviation <= IFF_DEVIATION_TOL) == proportional;
    Ok(BelinfanteIffReport {
        max_deviation,
        proportional,
        verdicts_agree,
    })
}

/// A measurement device completed by the null outcome `Π_0 = 1 - Γ`.
#[derive(Debug, Clone)]
pub struct ExtendedMeasurementDevice {
    pub base: DeviceOperatorSet,
    /// `Π_j = Γ_j` in label order, then `Π_0` under [`NULL_LABEL`].
    pub pom: Pom,
}

pub fn appendix_extend(meas: &DeviceOperatorSet) -> Result<ExtendedMeasurementDevice> {
    if meas.role() != Role::Measurement {
        return Err(Error::WrongRole {
            expected: "measurement",
        });
    }
    let null = HermitianOperator::identity(meas.dim())?.sub(meas.total())?;
    let mut labels = meas.labels().to_vec();
    labels.push(NULL_LABEL.to_string());
    let mut elements = meas.operators().to_vec();
    elements.push(null);
    let pom = Pom::new(labels, elements, meas.tolerances().psd)?;
    Ok(ExtendedMeasurementDevice {
        base: meas.clone(),
        pom,
    })
}

/// The joint distribution rebuilt from the conventional detection rule on
/// the extended POM, restricted to non-null outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixCheck {
    /// `P(i,j)` from the restricted sample space, `[i][j]`.
    pub restricted: Vec<Vec<f64>>,
    /// Probability of the null outcome before restriction.
    pub null_mass: f64,
    /// Max entrywise distance from the symmetric-rule joint distribution.
    pub max_deviation: f64,
}

/// Builds `P(i,k) = Tr(ρ_i Π_k) P(i)` on the extended POM, drops `k = 0`,
/// renormalizes, and compares with [`joint`].
pub fn appendix_equivalence(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<AppendixCheck> {
    if prep.role() != Role::Preparation {
        return Err(Error::WrongRole {
            expected: "preparation",
        });
    }
    same_dim(prep.dim(), meas.dim())?;
    let ext = appendix_extend(meas)?;
    let prep_total = trace(prep.total());
    let n_meas = meas.len();

    // P(i, k) for every k of the extended POM (null last)
    let mut extended = Vec::with_capacity(prep.len());
    for op in prep.operators() {
        let tr = trace(op);
        let prior = tr / prep_total;
        let row: Vec<f64> = if tr > 0.0 {
            let rho = op.scaled(1.0 / tr);
            ext.pom
                .elements()
                .iter()
                .map(|pi| Ok(trace_pair(&rho, pi)?.max(0.0) * prior))
                .collect::<Result<_>>()?
        } else {
            vec![0.0; n_meas + 1]
        };
        extended.push(row);
    }
    let null_mass: f64 = extended.iter().map(|row| row[n_meas]).sum();
    let kept: f64 = extended.iter().map(|row| row[..n_meas].iter().sum::<f64>()).sum();
    if !(kept > prep.tolerances().denom) {
        return Err(Error::DegeneratePair(kept));
    }
    let restricted: Vec<Vec<f64>> = extended
        .iter()
        .map(|row| row[..n_meas].iter().map(|x| x / kept).collect())
        .collect();

    let jd = joint(prep, meas)?;
    let mut max_deviation = 0.0f64;
    for (a, b) in restricted.iter().zip(&jd.p) {
        for (x, y) in a.iter().zip(b) {
            max_deviation = max_deviation.max((x - y).abs());
        }
    }
    Ok(AppendixCheck {
        restricted,
        null_mass,
        max_deviation,
    })
}

/// `1 - Tr(ρ Γ)`: the long-run fraction of null outcomes.
pub fn expected_null_fraction(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<f64> {
    let rho_total = trace(prep.total());
    Ok(1.0 - trace_pair(prep.total(), meas.total())? / rho_total)
}
