//! Report sections assembled from a device file.

use retrodict_core::device::{a_priori_distribution, classify_bias};
use retrodict_core::evolution::{retrodictive_backward, retrodictive_evolved};
use retrodict_core::io::Setup;
use retrodict_core::operator::trace;
use retrodict_core::probability::{bayes_deviation, joint, marginal_meas, marginal_prep, predictive, retrodictive};
use retrodict_core::scenarios::{
    appendix_equivalence, belinfante_iff_check, belinfante_retrodictive, expected_null_fraction, AppendixCheck,
    BelinfanteIffReport, BelinfanteRetrodiction,
};
use retrodict_core::sim::{run_experiment_chunked, tabulate, ExperimentLog, FrequencyTable, RngSeed};
use retrodict_core::{BiasReport, ConditionalTable, DeviceOperatorSet, Error, Result, Tolerances};
use serde::Serialize;

pub const BAYES_TOL: f64 = 1e-12;
pub const APPENDIX_TOL: f64 = 1e-10;
pub const COLLAPSE_TIME_TOL: f64 = 1e-10;
pub const BELINFANTE_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Check {
            name,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DeviceSummary {
    pub labels: Vec<String>,
    pub traces: Vec<f64>,
    pub normalization: f64,
}

impl DeviceSummary {
    fn of(dev: &DeviceOperatorSet) -> Self {
        DeviceSummary {
            labels: dev.labels().to_vec(),
            traces: dev.operators().iter().map(trace).collect(),
            normalization: dev.normalization(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DevicesSection {
    pub preparation: DeviceSummary,
    pub measurement: DeviceSummary,
    pub has_evolution: bool,
    pub has_scenario: bool,
}

#[derive(Debug, Serialize)]
pub struct ClassificationSection {
    pub preparation: BiasReport,
    pub measurement: BiasReport,
    pub a_priori: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct JointSection {
    pub prep_labels: Vec<String>,
    pub meas_labels: Vec<String>,
    pub p: Vec<Vec<f64>>,
    pub marginal_prep: Vec<f64>,
    pub marginal_meas: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EvolutionSection {
    pub t_p: f64,
    pub t_m: f64,
    /// Preparation operators evolved forward to the measurement time.
    pub forward: ConditionalTable,
    /// Retrodictive states evolved back to the preparation time.
    pub backward: ConditionalTable,
    pub max_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct BelinfanteSection {
    pub retrodiction: BelinfanteRetrodiction,
    pub iff: BelinfanteIffReport,
}

#[derive(Debug, Serialize)]
pub struct AppendixSection {
    #[serde(flatten)]
    pub check: AppendixCheck,
    pub expected_null_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationSection {
    pub seed: u64,
    pub frequencies: FrequencyTable,
}

#[derive(Debug, Serialize)]
pub struct Document {
    pub command: &'static str,
    pub dimension: usize,
    pub tolerances: Tolerances,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub devices: Option<DevicesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive: Option<ConditionalTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrodictive: Option<ConditionalTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belinfante: Option<BelinfanteSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub appendix: Option<AppendixSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub struct Builder<'a> {
    setup: &'a Setup,
    doc: Document,
}

impl<'a> Builder<'a> {
    pub fn new(command: &'static str, setup: &'a Setup, tol: Tolerances, warnings: Vec<String>) -> Self {
        let doc = Document {
            command,
            dimension: setup.dimension,
            tolerances: tol,
            warnings,
            devices: None,
            classification: None,
            joint: None,
            predictive: None,
            retrodictive: None,
            evolution: None,
            belinfante: None,
            appendix: None,
            simulation: None,
            checks: Vec::new(),
            passed: true,
        };
        Builder { setup, doc }
    }

    pub fn finish(mut self) -> Document {
        self.doc.passed = self.doc.checks.iter().all(|c| c.passed);
        self.doc
    }

    pub fn devices(&mut self) {
        let s = self.setup;
        self.doc.devices = Some(DevicesSection {
            preparation: DeviceSummary::of(&s.prep),
            measurement: DeviceSummary::of(&s.meas),
            has_evolution: s.evolution.is_some(),
            has_scenario: s.scenario.is_some(),
        });
    }

    pub fn classification(&mut self) -> Result<()> {
        let s = self.setup;
        self.doc.classification = Some(ClassificationSection {
            preparation: classify_bias(&s.prep),
            measurement: classify_bias(&s.meas),
            a_priori: a_priori_distribution(&s.prep)?,
        });
        Ok(())
    }

    fn bayes_check(&mut self) -> Result<()> {
        if self.doc.checks.iter().any(|c| c.name == "bayes") {
            return Ok(());
        }
        let jd = joint(&self.setup.prep, &self.setup.meas)?;
        self.doc
            .checks
            .push(Check::new("bayes", bayes_deviation(&jd), BAYES_TOL));
        Ok(())
    }

    pub fn joint(&mut self) -> Result<()> {
        let jd = joint(&self.setup.prep, &self.setup.meas)?;
        self.doc.joint = Some(JointSection {
            marginal_prep: marginal_prep(&jd),
            marginal_meas: marginal_meas(&jd),
            prep_labels: jd.prep_labels,
            meas_labels: jd.meas_labels,
            p: jd.p,
        });
        self.bayes_check()
    }

    pub fn predictive(&mut self) -> Result<()> {
        self.doc.predictive = Some(predictive(&joint(&self.setup.prep, &self.setup.meas)?));
        self.bayes_check()
    }

    pub fn retrodictive(&mut self) -> Result<()> {
        self.doc.retrodictive = Some(retrodictive(&joint(&self.setup.prep, &self.setup.meas)?));
        self.bayes_check()
    }

    pub fn evolution(&mut self) -> Result<()> {
        let s = self.setup;
        let ctx = s.evolution.as_ref().ok_or_else(|| missing("evolution"))?;
        let forward = retrodictive_evolved(ctx, &s.prep, &s.meas)?;
        let backward = retrodictive_backward(ctx, &s.prep, &s.meas)?;
        let max_deviation = forward.max_deviation(&backward);
        self.doc
            .checks
            .push(Check::new("collapse_time", max_deviation, COLLAPSE_TIME_TOL));
        self.doc.evolution = Some(EvolutionSection {
            t_p: ctx.t_p(),
            t_m: ctx.t_m(),
            forward,
            backward,
            max_deviation,
        });
        Ok(())
    }

    pub fn belinfante(&mut self) -> Result<()> {
        let scenario = self.setup.scenario.as_ref().ok_or_else(|| missing("scenario"))?;
        let retrodiction = belinfante_retrodictive(scenario)?;
        let iff = belinfante_iff_check(scenario)?;
        self.doc.checks.push(Check::new(
            "belinfante_pipeline",
            retrodiction.max_deviation,
            BELINFANTE_TOL,
        ));
        self.doc.belinfante = Some(BelinfanteSection { retrodiction, iff });
        Ok(())
    }

    pub fn appendix(&mut self) -> Result<()> {
        let s = self.setup;
        let check = appendix_equivalence(&s.prep, &s.meas)?;
        self.doc
            .checks
            .push(Check::new("appendix", check.max_deviation, APPENDIX_TOL));
        self.doc.appendix = Some(AppendixSection {
            check,
            expected_null_fraction: expected_null_fraction(&s.prep, &s.meas)?,
        });
        Ok(())
    }

    pub fn simulation(&mut self, trials: u64, seed: u64, chunks: usize) -> Result<ExperimentLog> {
        let s = self.setup;
        let log = run_experiment_chunked(&s.prep, &s.meas, trials, RngSeed(seed), chunks)?;
        let frequencies = tabulate(&log, &s.prep, &s.meas)?;
        self.doc.simulation = Some(SimulationSection { seed, frequencies });
        Ok(log)
    }
}

fn missing(block: &str) -> Error {
    Error::Schema {
        field: block.to_string(),
        message: "this command needs the block".to_string(),
    }
}
