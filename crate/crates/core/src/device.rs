//! Preparation and measurement devices.
//!
//! A device is a labeled family of non-negative-definite operators: the
//! preparation device operators `Λ_i` or the measurement device operators
//! `Γ_j`. Their sums, bias classification, and the derived density operators
//! and POMs live here.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    self, is_psd, proportionality_to_identity_with, trace, validate_hermitian_with, HermitianOperator, SquareMatrix,
    Tolerances,
};

/// Label reserved for the null outcome of an extended measurement.
pub const NULL_LABEL: &str = "0";

/// Completeness tolerance for POMs (max-entry norm of `Σ Π - 1`).
pub const POM_COMPLETENESS_TOL: f64 = 1e-9;

/// Trace tolerance for density operators.
pub const DENSITY_TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Preparation,
    Measurement,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Preparation => f.write_str("preparation"),
            Role::Measurement => f.write_str("measurement"),
        }
    }
}

/// A validated set of device operators with their cached sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOperatorSet {
    role: Role,
    labels: Vec<String>,
    operators: Vec<HermitianOperator>,
    total: HermitianOperator,
    normalization: f64,
    tol: Tolerances,
}

impl DeviceOperatorSet {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// `Λ = Σ Λ_i` or `Γ = Σ Γ_j`.
    pub fn total(&self) -> &HermitianOperator {
        &self.total
    }

    /// Factor every input operator was divided by (1 unless a measurement
    /// device needed rescaling to keep `1 - Γ` non-negative).
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn operator(&self, label: &str) -> Result<&HermitianOperator> {
        Ok(&self.operators[self.index_of(label)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HermitianOperator)> {
        self.labels.iter().map(String::as_str).zip(&self.operators)
    }

    /// Replaces every operator through `f`, keeping labels and role, and
    /// revalidates.
    pub fn map_operators<F>(&self, mut f: F) -> Result<DeviceOperatorSet>
    where
        F: FnMut(&HermitianOperator) -> Result<HermitianOperator>,
    {
        let items = self
            .iter()
            .map(|(l, op)| Ok((l.to_string(), f(op)?.matrix().clone())))
            .collect::<Result<Vec<_>>>()?;
        build_device_with(self.role, items, &self.tol)
    }

    fn require(&self, role: Role) -> Result<()> {
        if self.role != role {
            let expected = match role {
                Role::Preparation => "preparation",
                Role::Measurement => "measurement",
            };
            return Err(Error::WrongRole { expected });
        }
        Ok(())
    }
}

/// Builds a device with the default tolerances.
pub fn build_device<L: Into<String>>(role: Role, items: Vec<(L, SquareMatrix)>) -> Result<DeviceOperatorSet> {
    build_device_with(role, items, &Tolerances::default())
}

pub fn build_device_with<L: Into<String>>(
    role: Role,
    items: Vec<(L, SquareMatrix)>,
    tol: &Tolerances,
) -> Result<DeviceOperatorSet> {
    if items.is_empty() {
        return Err(Error::EmptyDevice);
    }
    let dim = items[0].1.dim();
    let mut seen = HashSet::new();
    let mut labels = Vec::with_capacity(items.len());
    let mut operators = Vec::with_capacity(items.len());
    for (label, m) in items {
        let label: String = label.into();
        if role == Role::Measurement && label == NULL_LABEL {
            return Err(Error::ReservedLabel(label));
        }
        if !seen.insert(label.clone()) {
            return Err(Error::DuplicateLabel(label));
        }
        operator::same_dim(dim, m.dim())?;
        let op = validate_hermitian_with(&m, tol.herm)?;
        let (ok, min_eigenvalue) = is_psd(&op, tol.psd)?;
        if !ok {
            return Err(Error::NotPsd { label, min_eigenvalue });
        }
        labels.push(label);
        operators.push(op);
    }
    let mut total = HermitianOperator::sum(dim, &operators)?;
    let tr = trace(&total);
    if !(tr > tol.psd) {
        return Err(Error::ZeroTotal(tr));
    }

    let mut normalization = 1.0;
    if role == Role::Measurement {
        let lambda_max = *operator::eigenvalues(&total)?.last().expect("dim >= 1");
        if lambda_max > 1.0 {
            normalization = lambda_max;
            operators = operators.iter().map(|op| op.scaled(1.0 / lambda_max)).collect();
            total = HermitianOperator::sum(dim, &operators)?;
        }
    }

    Ok(DeviceOperatorSet {
        role,
        labels,
        operators,
        total,
        normalization,
        tol: *tol,
    })
}

/// Whether a device's operator sum is proportional to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub is_unbiased: bool,
    pub gamma: Option<f64>,
    /// Max-entry distance of the total from `(Tr total / d)·1`.
    pub defect: f64,
}

pub fn classify_bias(dev: &DeviceOperatorSet) -> BiasReport {
    let total = dev.total();
    let gamma = proportionality_to_identity_with(total, dev.tol.prop);
    let defect = total.distance_to_multiple_of_identity(trace(total) / dev.dim() as f64);
    BiasReport {
        is_unbiased: gamma.is_some(),
        gamma,
        defect,
    }
}

/// A unit-trace non-negative-definite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = trace(&op);
        if (tr - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let (ok, min) = is_psd(&op, Tolerances::default().psd)?;
        if !ok {
            return Err(Error::NotDensity(format!("min eigenvalue {min:e}")));
        }
        Ok(DensityOperator { op })
    }

    /// Normalizes a non-zero PSD operator to unit trace.
    pub fn normalized(op: &HermitianOperator, label: &str) -> Result<Self> {
        let tr = trace(op);
        if !(tr > Tolerances::default().psd) {
            return Err(Error::ZeroTraceOperator(label.to_string()));
        }
        Ok(DensityOperator {
            op: op.scaled(1.0 / tr),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Ok(DensityOperator {
            op: HermitianOperator::identity(dim)?.scaled(1.0 / dim as f64),
        })
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// A probability operator measure: labeled PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Pom {
    labels: Vec<String>,
    elements: Vec<HermitianOperator>,
}

impl Pom {
    pub fn new(labels: Vec<String>, elements: Vec<HermitianOperator>, tol_psd: f64) -> Result<Self> {
        if elements.is_empty() || labels.len() != elements.len() {
            return Err(Error::NotPom(
                "labels and elements must be non-empty and of equal length".into(),
            ));
        }
        let dim = elements[0].dim();
        let mut seen = HashSet::new();
        for (label, e) in labels.iter().zip(&elements) {
            if !seen.insert(label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
            let (ok, min_eigenvalue) = is_psd(e, tol_psd)?;
            if !ok {
                return Err(Error::NotPsd {
                    label: label.clone(),
                    min_eigenvalue,
                });
            }
        }
        let sum = HermitianOperator::sum(dim, &elements)?;
        let defect = sum.distance_to_multiple_of_identity(1.0);
        if defect > POM_COMPLETENESS_TOL {
            return Err(Error::NotPom(format!(
                "elements sum to identity only within {defect:e}"
            )));
        }
        Ok(Pom { labels, elements })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn element(&self, label: &str) -> Result<&HermitianOperator> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| &self.elements[k])
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HermitianOperator)> {
        self.labels.iter().map(String::as_str).zip(&self.elements)
    }

    /// Max-entry distance of the element sum from the identity.
    pub fn completeness_defect(&self) -> f64 {
        HermitianOperator::sum(self.dim(), &self.elements)
            .map(|s| s.distance_to_multiple_of_identity(1.0))
            .unwrap_or(f64::INFINITY)
    }
}

/// `ρ_i = Λ_i / Tr Λ_i`.
pub fn pdo_to_density(dev: &DeviceOperatorSet, label: &str) -> Result<DensityOperator> {
    dev.require(Role::Preparation)?;
    DensityOperator::normalized(dev.operator(label)?, label)
}

/// `P(i) = Tr Λ_i / Tr Λ`, in label order.
pub fn a_priori_distribution(dev: &DeviceOperatorSet) -> Result<Vec<f64>> {
    dev.require(Role::Preparation)?;
    let total = trace(dev.total());
    Ok(dev.operators().iter().map(|op| trace(op) / total).collect())
}

/// `ρ = Λ / Tr Λ`.
pub fn mixture_state(dev: &DeviceOperatorSet) -> Result<DensityOperator> {
    dev.require(Role::Preparation)?;
    DensityOperator::normalized(dev.total(), "total")
}

fn unbiased_pom(dev: &DeviceOperatorSet) -> Result<Pom> {
    let report = classify_bias(dev);
    let gamma = report.gamma.ok_or(Error::BiasedDevice(report.defect))?;
    let elements = dev.operators().iter().map(|op| op.scaled(1.0 / gamma)).collect();
    Pom::new(dev.labels().to_vec(), elements, dev.tol.psd)
}

/// `Π_j = Γ_j / γ` for an unbiased measurement device.
pub fn mdo_to_pom(dev: &DeviceOperatorSet) -> Result<Pom> {
    dev.require(Role::Measurement)?;
    unbiased_pom(dev)
}

/// `ρ_j^retr = Γ_j / Tr Γ_j`.
pub fn retr_density(dev: &DeviceOperatorSet, label: &str) -> Result<DensityOperator> {
    dev.require(Role::Measurement)?;
    DensityOperator::normalized(dev.operator(label)?, label)
}

/// `Ξ_i = Λ_i / γ` with `γ = Tr Λ / d`, for an unbiased preparation device.
pub fn preparation_pom(dev: &DeviceOperatorSet) -> Result<Pom> {
    dev.require(Role::Preparation)?;
    unbiased_pom(dev)
}
