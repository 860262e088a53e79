//! Joint, marginal, predictive and retrodictive probabilities.
//!
//! Everything derives from the symmetric rule
//! `P(i,j) = Tr(Λ_i Γ_j) / Tr(Λ Γ)` for a preparation device `{Λ_i}` and a
//! measurement device `{Γ_j}`.

use serde::{Deserialize, Serialize};

use crate::device::{DensityOperator, DeviceOperatorSet, Pom, Role};
use crate::error::{Error, Result};
use crate::operator::{same_dim, trace, trace_pair};

/// `P(i,j)` over all combined events, with the raw traces it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub prep_labels: Vec<String>,
    pub meas_labels: Vec<String>,
    /// `p[i][j]`
    pub p: Vec<Vec<f64>>,
    /// Clamped `Tr(Λ_i Γ_j)`.
    pub raw: Vec<Vec<f64>>,
    /// `Tr(Λ Γ)`
    pub denominator: f64,
    /// `Tr Λ · Tr Γ`, the reference magnitude for degeneracy thresholds.
    pub scale: f64,
    pub tol_denom: f64,
}

/// Which side a conditional table conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GivenAxis {
    /// Rows are `P(j|i)` for each preparation event `i`.
    GivenPrep,
    /// Rows are `P(i|j)` for each measurement event `j`.
    GivenMeas,
}

/// Conditional probabilities, one row per conditioning label. A row whose
/// conditioning event has (numerically) zero probability is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub given_axis: GivenAxis,
    pub given_labels: Vec<String>,
    pub outcome_labels: Vec<String>,
    pub rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalTable {
    pub fn row(&self, given: &str) -> Result<Option<&[f64]>> {
        let k = position(&self.given_labels, given)?;
        Ok(self.rows[k].as_deref())
    }

    /// `P(outcome | given)`, or `None` if the row is undefined.
    pub fn get(&self, given: &str, outcome: &str) -> Result<Option<f64>> {
        let o = position(&self.outcome_labels, outcome)?;
        Ok(self.row(given)?.map(|r| r[o]))
    }

    pub fn undefined_rows(&self) -> Vec<&str> {
        self.given_labels
            .iter()
            .zip(&self.rows)
            .filter(|(_, r)| r.is_none())
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Largest entrywise difference over rows defined in both tables.
    /// Rows defined in one table but not the other count as infinite.
    pub fn max_deviation(&self, other: &ConditionalTable) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            match (a, b) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max((x - y).abs());
                    }
                }
                (None, None) => {}
                _ => return f64::INFINITY,
            }
        }
        if self.rows.len() != other.rows.len() {
            return f64::INFINITY;
        }
        worst
    }
}

fn position(labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Clamping policy for raw traces of PSD products.
pub(crate) fn clamp_trace(value: f64, scale: f64, tol_denom: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -tol_denom * scale {
        Ok(0.0)
    } else {
        Err(Error::InternalNumerical { value })
    }
}

fn require_role(dev: &DeviceOperatorSet, role: Role) -> Result<()> {
    if dev.role() != role {
        let expected = match role {
            Role::Preparation => "preparation",
            Role::Measurement => "measurement",
        };
        return Err(Error::WrongRole { expected });
    }
    Ok(())
}

/// `P(i,j) = Tr(Λ_i Γ_j) / Tr(Λ Γ)`.
pub fn joint(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<JointDistribution> {
    require_role(prep, Role::Preparation)?;
    require_role(meas, Role::Measurement)?;
    joint_unchecked(prep, meas)
}

/// [`joint`] without the role check, so the two device sets can be swapped.
pub fn joint_unchecked(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<JointDistribution> {
    same_dim(prep.dim(), meas.dim())?;
    let tol_denom = prep.tolerances().denom;
    let scale = trace(prep.total()) * trace(meas.total());
    let denominator = trace_pair(prep.total(), meas.total())?;
    if !(denominator > tol_denom * scale) {
        return Err(Error::DegeneratePair(denominator));
    }
    let raw = prep
        .operators()
        .iter()
        .map(|l| {
            meas.operators()
                .iter()
                .map(|g| clamp_trace(trace_pair(l, g)?, scale, tol_denom))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let p = raw
        .iter()
        .map(|row| row.iter().map(|x| x / denominator).collect())
        .collect();
    Ok(JointDistribution {
        prep_labels: prep.labels().to_vec(),
        meas_labels: meas.labels().to_vec(),
        p,
        raw,
        denominator,
        scale,
        tol_denom,
    })
}

impl JointDistribution {
    pub fn get(&self, prep: &str, meas: &str) -> Result<f64> {
        Ok(self.p[position(&self.prep_labels, prep)?][position(&self.meas_labels, meas)?])
    }

    pub fn total_mass(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn transpose(&self) -> JointDistribution {
        let t = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..self.meas_labels.len())
                .map(|j| m.iter().map(|row| row[j]).collect())
                .collect()
        };
        JointDistribution {
            prep_labels: self.meas_labels.clone(),
            meas_labels: self.prep_labels.clone(),
            p: t(&self.p),
            raw: t(&self.raw),
            ..*self
        }
    }

    fn row_raw(&self, i: usize) -> f64 {
        self.raw[i].iter().sum()
    }

    fn col_raw(&self, j: usize) -> f64 {
        self.raw.iter().map(|row| row[j]).sum()
    }

    fn degenerate(&self, raw_mass: f64) -> bool {
        !(raw_mass > self.tol_denom * self.scale)
    }
}

/// `P(i) = Σ_j P(i,j)`.
pub fn marginal_prep(jd: &JointDistribution) -> Vec<f64> {
    jd.p.iter().map(|row| row.iter().sum()).collect()
}

/// `P(j) = Σ_i P(i,j)`.
pub fn marginal_meas(jd: &JointDistribution) -> Vec<f64> {
    (0..jd.meas_labels.len())
        .map(|j| jd.p.iter().map(|row| row[j]).sum())
        .collect()
}

/// `P(i) = Tr(Λ_i Γ) / Tr(Λ Γ)` evaluated directly from the devices.
pub fn marginal_prep_direct(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<Vec<f64>> {
    let denom = trace_pair(prep.total(), meas.total())?;
    prep.operators()
        .iter()
        .map(|l| Ok(trace_pair(l, meas.total())? / denom))
        .collect()
}

/// `P(j) = Tr(Λ Γ_j) / Tr(Λ Γ)` evaluated directly from the devices.
pub fn marginal_meas_direct(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<Vec<f64>> {
    let denom = trace_pair(prep.total(), meas.total())?;
    meas.operators()
        .iter()
        .map(|g| Ok(trace_pair(prep.total(), g)? / denom))
        .collect()
}

/// `P(j|i) = Tr(Λ_i Γ_j) / Tr(Λ_i Γ)`.
pub fn predictive(jd: &JointDistribution) -> ConditionalTable {
    let rows = (0..jd.prep_labels.len())
        .map(|i| {
            let mass = jd.row_raw(i);
            (!jd.degenerate(mass)).then(|| jd.raw[i].iter().map(|x| x / mass).collect())
        })
        .collect();
    ConditionalTable {
        given_axis: GivenAxis::GivenPrep,
        given_labels: jd.prep_labels.clone(),
        outcome_labels: jd.meas_labels.clone(),
        rows,
    }
}

/// `P(i|j) = Tr(Λ_i Γ_j) / Tr(Λ Γ_j)`.
pub fn retrodictive(jd: &JointDistribution) -> ConditionalTable {
    let rows = (0..jd.meas_labels.len())
        .map(|j| {
            let mass = jd.col_raw(j);
            (!jd.degenerate(mass)).then(|| jd.raw.iter().map(|row| row[j] / mass).collect())
        })
        .collect();
    ConditionalTable {
        given_axis: GivenAxis::GivenMeas,
        given_labels: jd.meas_labels.clone(),
        outcome_labels: jd.prep_labels.clone(),
        rows,
    }
}

/// `Tr(ρ Π_j)`, clamped to `[0, 1]`.
pub fn detection_probability(rho: &DensityOperator, pom: &Pom, label: &str) -> Result<f64> {
    same_dim(pom.dim(), rho.dim())?;
    Ok(trace_pair(rho.op(), pom.element(label)?)?.clamp(0.0, 1.0))
}

/// `P(i|j) = Tr(Ξ_i ρ_j^retr)` for an unbiased preparation device.
pub fn retrodictive_unbiased(prep_pom: &Pom, rho_retr: &DensityOperator, label: &str) -> Result<f64> {
    same_dim(prep_pom.dim(), rho_retr.dim())?;
    Ok(trace_pair(prep_pom.element(label)?, rho_retr.op())?.clamp(0.0, 1.0))
}

/// Worst violation of `P(i,j) = P(i)P(j|i) = P(j)P(i|j)` over defined entries.
pub fn bayes_deviation(jd: &JointDistribution) -> f64 {
    let (pi, pj) = (marginal_prep(jd), marginal_meas(jd));
    let (pred, retro) = (predictive(jd), retrodictive(jd));
    let mut worst = 0.0f64;
    for (i, row) in jd.p.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if let Some(r) = &pred.rows[i] {
                worst = worst.max((pij - pi[i] * r[j]).abs());
            }
            if let Some(c) = &retro.rows[j] {
                worst = worst.max((pij - pj[j] * c[i]).abs());
            }
        }
    }
    worst
}
