//! Unitary evolution between preparation time `t_p` and measurement time `t_m`.
//!
//! Two independent retrodiction paths are provided: evolving the preparation
//! device operators forward to `t_m` ([`retrodictive_evolved`]) and evolving
//! the retrodictive density operators backward to `t_p`
//! ([`retrodictive_backward`]). They must agree.

use crate::device::{retr_density, DeviceOperatorSet, Pom, Role};
use crate::error::{Error, Result};
use crate::operator::{conjugate_by, conjugate_by_adjoint, same_dim, trace, trace_pair, HermitianOperator, UnitaryMap};
use crate::probability::{clamp_trace, ConditionalTable, GivenAxis};

/// The unitary `U` taking the system from `t_p` to `t_m`. The time tags are
/// metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionContext {
    u: UnitaryMap,
    t_p: f64,
    t_m: f64,
}

impl EvolutionContext {
    pub fn new(u: UnitaryMap, t_p: f64, t_m: f64) -> Result<Self> {
        if !(t_p <= t_m) {
            return Err(Error::TimeOrder { t_p, t_m });
        }
        Ok(EvolutionContext { u, t_p, t_m })
    }

    pub fn unitary(&self) -> &UnitaryMap {
        &self.u
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn t_m(&self) -> f64 {
        self.t_m
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }
}

/// `Λ_i(t_m) = U Λ_i U†` for every preparation operator.
pub fn evolve_pdo(ctx: &EvolutionContext, prep: &DeviceOperatorSet) -> Result<DeviceOperatorSet> {
    if prep.role() != Role::Preparation {
        return Err(Error::WrongRole {
            expected: "preparation",
        });
    }
    same_dim(ctx.dim(), prep.dim())?;
    prep.map_operators(|op| conjugate_by(&ctx.u, op))
}

/// Retrodictive densities `ρ_j^retr`, or `None` for zero-trace `Γ_j`.
fn retrodictive_states(meas: &DeviceOperatorSet) -> Result<Vec<Option<HermitianOperator>>> {
    meas.labels()
        .iter()
        .map(|label| match retr_density(meas, label) {
            Ok(rho) => Ok(Some(rho.op().clone())),
            Err(Error::ZeroTraceOperator(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn conditional_column(
    ops: &[HermitianOperator],
    total: &HermitianOperator,
    rho: &HermitianOperator,
    scale: f64,
    tol_denom: f64,
) -> Result<Option<Vec<f64>>> {
    let denom = trace_pair(total, rho)?;
    if !(denom > tol_denom * scale) {
        return Ok(None);
    }
    let row = ops
        .iter()
        .map(|op| Ok(clamp_trace(trace_pair(op, rho)?, scale, tol_denom)? / denom))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(row))
}

fn check_pair(ctx: &EvolutionContext, prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Result<()> {
    if prep.role() != Role::Preparation {
        return Err(Error::WrongRole {
            expected: "preparation",
        });
    }
    if meas.role() != Role::Measurement {
        return Err(Error::WrongRole {
            expected: "measurement",
        });
    }
    same_dim(ctx.dim(), prep.dim())?;
    same_dim(ctx.dim(), meas.dim())
}

fn table(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet, rows: Vec<Option<Vec<f64>>>) -> ConditionalTable {
    ConditionalTable {
        given_axis: GivenAxis::GivenMeas,
        given_labels: meas.labels().to_vec(),
        outcome_labels: prep.labels().to_vec(),
        rows,
    }
}

/// `P(i|j) = Tr(U Λ_i U† ρ_j^retr) / Tr(U Λ U† ρ_j^retr)`.
pub fn retrodictive_evolved(
    ctx: &EvolutionContext,
    prep: &DeviceOperatorSet,
    meas: &DeviceOperatorSet,
) -> Result<ConditionalTable> {
    check_pair(ctx, prep, meas)?;
    let forward = prep
        .operators()
        .iter()
        .map(|op| conjugate_by(&ctx.u, op))
        .collect::<Result<Vec<_>>>()?;
    let forward_total = conjugate_by(&ctx.u, prep.total())?;
    let tol_denom = prep.tolerances().denom;
    let scale = trace(prep.total());
    let rows = retrodictive_states(meas)?
        .iter()
        .map(|rho| match rho {
            Some(rho) => conditional_column(&forward, &forward_total, rho, scale, tol_denom),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table(prep, meas, rows))
}

/// `ρ_j^retr(t_p) = U† ρ_j^retr U`, then
/// `P(i|j) = Tr(Λ_i ρ_j^retr(t_p)) / Tr(Λ ρ_j^retr(t_p))`.
pub fn retrodictive_backward(
    ctx: &EvolutionContext,
    prep: &DeviceOperatorSet,
    meas: &DeviceOperatorSet,
) -> Result<ConditionalTable> {
    check_pair(ctx, prep, meas)?;
    let tol_denom = prep.tolerances().denom;
    let scale = trace(prep.total());
    let rows = backward_states(ctx, meas)?
        .iter()
        .map(|rho| match rho {
            Some(rho) => conditional_column(prep.operators(), prep.total(), rho, scale, tol_denom),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table(prep, meas, rows))
}

/// Retrodictive density operators evolved back to the preparation time.
pub fn backward_states(ctx: &EvolutionContext, meas: &DeviceOperatorSet) -> Result<Vec<Option<HermitianOperator>>> {
    same_dim(ctx.dim(), meas.dim())?;
    retrodictive_states(meas)?
        .into_iter()
        .map(|rho| rho.map(|r| conjugate_by_adjoint(&ctx.u, &r)).transpose())
        .collect()
}

/// Heisenberg-picture POM `{U† Π_j U}`.
pub fn heisenberg_pom(ctx: &EvolutionContext, pom: &Pom) -> Result<Pom> {
    same_dim(ctx.dim(), pom.dim())?;
    let elements = pom
        .elements()
        .iter()
        .map(|e| conjugate_by_adjoint(&ctx.u, e))
        .collect::<Result<Vec<_>>>()?;
    Pom::new(
        pom.labels().to_vec(),
        elements,
        crate::operator::Tolerances::default().psd,
    )
}
