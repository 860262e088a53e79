//! Device definition files and tabular output.
//!
//! A device file is JSON:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "dimension": 2,
//!   "preparation": [{"label": "up", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0, 0]]]}],
//!   "measurement": [{"label": "1", "matrix": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}],
//!   "evolution": {"unitary": [[...]], "t_p": 0.0, "t_m": 1.0},
//!   "scenario": {"rho_g": [[...]], "a_basis": [[...]], "b_basis": [[...]]}
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. `evolution` and `scenario` are optional; `preparation` and
//! `measurement` may be omitted together when a `scenario` is present, in
//! which case the scenario's devices are used.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::device::{build_device_with, DensityOperator, DeviceOperatorSet, Role};
use crate::error::{Error, Result};
use crate::evolution::EvolutionContext;
use crate::operator::{validate_hermitian_with, SquareMatrix, Tolerances, UnitaryMap, MAX_DIM};
use crate::probability::{ConditionalTable, GivenAxis, JointDistribution};
use crate::scenarios::{belinfante_build_with, BelinfanteScenario};
use crate::sim::{ExperimentLog, FrequencyTable};

pub const FORMAT_VERSION: u32 = 1;

pub type ComplexRepr = [f64; 2];
pub type VectorRepr = Vec<ComplexRepr>;
pub type MatrixRepr = Vec<Vec<ComplexRepr>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    #[serde(deserialize_with = "label_from_string_or_int")]
    pub label: String,
    pub matrix: MatrixRepr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionBlock {
    pub unitary: MatrixRepr,
    pub t_p: f64,
    pub t_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBlock {
    pub rho_g: MatrixRepr,
    pub a_basis: Vec<VectorRepr>,
    pub b_basis: Vec<VectorRepr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub format_version: u32,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preparation: Vec<LabeledMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurement: Vec<LabeledMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioBlock>,
}

fn label_from_string_or_int<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Label {
        Int(u64),
        Str(String),
    }
    Ok(match Label::deserialize(d)? {
        Label::Int(n) => n.to_string(),
        Label::Str(s) => s,
    })
}

/// A parsed file plus any unknown-key warnings (lenient mode only).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDeviceFile {
    pub file: DeviceFile,
    pub warnings: Vec<String>,
}

const TOP_KEYS: &[&str] = &[
    "format_version",
    "dimension",
    "preparation",
    "measurement",
    "evolution",
    "scenario",
];
const ENTRY_KEYS: &[&str] = &["label", "matrix"];
const EVOLUTION_KEYS: &[&str] = &["unitary", "t_p", "t_m"];
const SCENARIO_KEYS: &[&str] = &["rho_g", "a_basis", "b_basis"];

fn unknown_keys(value: &Value) -> Vec<String> {
    fn check(obj: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
        if let Value::Object(map) = obj {
            for key in map.keys() {
                if !allowed.contains(&key.as_str()) {
                    out.push(if path.is_empty() {
                        key.clone()
                    } else {
                        format!("{path}.{key}")
                    });
                }
            }
        }
    }
    let mut out = Vec::new();
    check(value, TOP_KEYS, "", &mut out);
    for side in ["preparation", "measurement"] {
        if let Some(Value::Array(items)) = value.get(side) {
            for (k, item) in items.iter().enumerate() {
                check(item, ENTRY_KEYS, &format!("{side}[{k}]"), &mut out);
            }
        }
    }
    if let Some(ev) = value.get("evolution") {
        check(ev, EVOLUTION_KEYS, "evolution", &mut out);
    }
    if let Some(sc) = value.get("scenario") {
        check(sc, SCENARIO_KEYS, "scenario", &mut out);
    }
    out
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// Parses device-file text. Unknown keys are errors unless `lenient`, in
/// which case they are reported as warnings and ignored.
pub fn parse_device_str(text: &str, lenient: bool) -> Result<ParsedDeviceFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let unknown = unknown_keys(&value);
    if !unknown.is_empty() && !lenient {
        return Err(schema(unknown[0].clone(), "unknown key"));
    }
    let warnings = unknown
        .into_iter()
        .map(|k| format!("ignoring unknown key `{k}`"))
        .collect();
    let file: DeviceFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    file.check_shapes()?;
    Ok(ParsedDeviceFile { file, warnings })
}

pub fn parse_device_file(path: &Path, lenient: bool) -> Result<ParsedDeviceFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_device_str(&text, lenient)
}

fn check_matrix(m: &MatrixRepr, dim: usize, field: &str) -> Result<()> {
    if m.len() != dim {
        return Err(schema(field, format!("expected {dim} rows, found {}", m.len())));
    }
    for (r, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(schema(
                format!("{field}[{r}]"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
    }
    Ok(())
}

fn check_vectors(vs: &[VectorRepr], dim: usize, field: &str) -> Result<()> {
    if vs.len() != dim {
        return Err(schema(field, format!("expected {dim} vectors, found {}", vs.len())));
    }
    for (k, v) in vs.iter().enumerate() {
        if v.len() != dim {
            return Err(schema(
                format!("{field}[{k}]"),
                format!("expected {dim} components, found {}", v.len()),
            ));
        }
    }
    Ok(())
}

pub fn to_complex(z: &ComplexRepr) -> Complex64 {
    Complex64::new(z[0], z[1])
}

pub fn from_complex(z: Complex64) -> ComplexRepr {
    [z.re, z.im]
}

pub fn square_matrix(m: &MatrixRepr) -> Result<SquareMatrix> {
    let rows: Vec<Vec<Complex64>> = m.iter().map(|row| row.iter().map(to_complex).collect()).collect();
    SquareMatrix::from_rows(&rows)
}

pub fn matrix_repr(m: &SquareMatrix) -> MatrixRepr {
    m.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(from_complex).collect())
        .collect()
}

/// Domain objects assembled from a device file.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dimension: usize,
    pub prep: DeviceOperatorSet,
    pub meas: DeviceOperatorSet,
    pub evolution: Option<EvolutionContext>,
    pub scenario: Option<BelinfanteScenario>,
}

impl DeviceFile {
    fn check_shapes(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(schema(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        let dim = self.dimension;
        if dim == 0 || dim > MAX_DIM {
            return Err(schema("dimension", format!("must be between 1 and {MAX_DIM}")));
        }
        for (side, items) in [("preparation", &self.preparation), ("measurement", &self.measurement)] {
            for (k, item) in items.iter().enumerate() {
                check_matrix(&item.matrix, dim, &format!("{side}[{k}].matrix"))?;
            }
        }
        match (
            self.preparation.is_empty(),
            self.measurement.is_empty(),
            self.scenario.is_some(),
        ) {
            (false, false, _) | (true, true, true) => {}
            (true, _, _) => return Err(schema("preparation", "missing")),
            (_, true, _) => return Err(schema("measurement", "missing")),
        }
        if let Some(ev) = &self.evolution {
            check_matrix(&ev.unitary, dim, "evolution.unitary")?;
        }
        if let Some(sc) = &self.scenario {
            check_matrix(&sc.rho_g, dim, "scenario.rho_g")?;
            check_vectors(&sc.a_basis, dim, "scenario.a_basis")?;
            check_vectors(&sc.b_basis, dim, "scenario.b_basis")?;
        }
        Ok(())
    }

    /// Validates every block and builds the devices.
    pub fn build(&self, tol: &Tolerances) -> Result<Setup> {
        self.check_shapes()?;
        let items = |list: &[LabeledMatrix]| -> Result<Vec<(String, SquareMatrix)>> {
            list.iter()
                .map(|e| Ok((e.label.clone(), square_matrix(&e.matrix)?)))
                .collect()
        };
        let scenario = match &self.scenario {
            Some(sc) => {
                let rho = validate_hermitian_with(&square_matrix(&sc.rho_g)?, tol.herm)?;
                let rho = DensityOperator::new(rho)?;
                let basis = |vs: &[VectorRepr]| vs.iter().map(|v| v.iter().map(to_complex).collect()).collect();
                Some(BelinfanteScenario::new(rho, basis(&sc.a_basis), basis(&sc.b_basis))?)
            }
            None => None,
        };
        let (prep, meas) = if self.preparation.is_empty() {
            belinfante_build_with(scenario.as_ref().expect("checked by check_shapes"), tol)?
        } else {
            (
                build_device_with(Role::Preparation, items(&self.preparation)?, tol)?,
                build_device_with(Role::Measurement, items(&self.measurement)?, tol)?,
            )
        };
        let evolution = match &self.evolution {
            Some(ev) => {
                let u = UnitaryMap::with_tolerance(square_matrix(&ev.unitary)?, tol.unitary)?;
                Some(EvolutionContext::new(u, ev.t_p, ev.t_m)?)
            }
            None => None,
        };
        Ok(Setup {
            dimension: self.dimension,
            prep,
            meas,
            evolution,
            scenario,
        })
    }

    /// File describing a device pair (no evolution or scenario).
    pub fn from_devices(prep: &DeviceOperatorSet, meas: &DeviceOperatorSet) -> Self {
        let entries = |dev: &DeviceOperatorSet| {
            dev.iter()
                .map(|(l, op)| LabeledMatrix {
                    label: l.to_string(),
                    matrix: matrix_repr(op.matrix()),
                })
                .collect()
        };
        DeviceFile {
            format_version: FORMAT_VERSION,
            dimension: prep.dim(),
            preparation: entries(prep),
            measurement: entries(meas),
            evolution: None,
            scenario: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("device file serializes");
        s.push('\n');
        s
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:?}")
}

fn csv_string<F>(write: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Joint distribution as a labeled matrix: rows are preparation labels.
pub fn joint_csv(jd: &JointDistribution) -> Result<String> {
    csv_string(|w| {
        let mut header = vec!["prep\\meas".to_string()];
        header.extend(jd.meas_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in jd.prep_labels.iter().zip(&jd.p) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|x| fmt_num(*x)));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// Conditional table with one row per conditioning label. Undefined rows
/// carry the literal `undefined` in every cell.
pub fn conditional_csv(t: &ConditionalTable) -> Result<String> {
    csv_string(|w| {
        let corner = match t.given_axis {
            GivenAxis::GivenPrep => "given_prep\\meas",
            GivenAxis::GivenMeas => "given_meas\\prep",
        };
        let mut header = vec![corner.to_string()];
        header.extend(t.outcome_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in t.given_labels.iter().zip(&t.rows) {
            let mut rec = vec![label.clone()];
            match row {
                Some(r) => rec.extend(r.iter().map(|x| fmt_num(*x))),
                None => rec.extend(t.outcome_labels.iter().map(|_| "undefined".to_string())),
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// One row per combined event `(i, j)`.
pub fn frequency_csv(t: &FrequencyTable) -> Result<String> {
    csv_string(|w| {
        w.write_record(["i", "j", "count", "p_hat", "p", "z"])?;
        for (i, li) in t.prep_labels.iter().enumerate() {
            for (j, lj) in t.meas_labels.iter().enumerate() {
                w.write_record([
                    li.clone(),
                    lj.clone(),
                    t.counts[i][j].to_string(),
                    fmt_num(t.p_hat[i][j]),
                    fmt_num(t.p[i][j]),
                    fmt_num(t.z[i][j]),
                ])?;
            }
        }
        Ok(())
    })
}

/// `trial,i,k` with the null outcome written as `0`.
pub fn log_csv(log: &ExperimentLog) -> Result<String> {
    csv_string(|w| {
        w.write_record(["trial", "i", "k"])?;
        for r in &log.records {
            w.write_record([
                r.trial.to_string(),
                log.prep_labels[r.prep].clone(),
                log.outcome_label(r.outcome).to_string(),
            ])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::classify_bias;
    use crate::probability::{joint, retrodictive};

    const SPIN_HALF: &str = r#"{
        "format_version": 1,
        "dimension": 2,
        "preparation": [
            {"label": "up", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0, 0]]]},
            {"label": "down", "matrix": [[[0, 0], [0, 0]], [[0, 0], [0.5, 0]]]}
        ],
        "measurement": [
            {"label": 1, "matrix": [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]}
        ]
    }"#;

    #[test]
    fn parses_spin_half() {
        let parsed = parse_device_str(SPIN_HALF, false).unwrap();
        assert!(parsed.warnings.is_empty());
        let setup = parsed.file.build(&Tolerances::default()).unwrap();
        assert_eq!(setup.prep.labels(), ["up", "down"]);
        assert_eq!(setup.meas.labels(), ["1"]);
        assert_eq!(classify_bias(&setup.prep).gamma, Some(0.5));
        let retro = retrodictive(&joint(&setup.prep, &setup.meas).unwrap());
        assert_eq!(retro.get("1", "up").unwrap(), Some(0.5));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_device_str("{\n  \"format_version\": 1,\n  oops\n}", false).unwrap_err();
        match err {
            Error::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = SPIN_HALF.replacen("\"dimension\": 2,", "\"dimension\": 2, \"colour\": \"red\",", 1);
        assert_eq!(
            parse_device_str(&text, false).unwrap_err(),
            Error::Schema {
                field: "colour".into(),
                message: "unknown key".into()
            }
        );
        let parsed = parse_device_str(&text, true).unwrap();
        assert_eq!(parsed.warnings, vec!["ignoring unknown key `colour`".to_string()]);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = SPIN_HALF.replacen("\"dimension\": 2", "\"dimension\": \"two\"", 1);
        match parse_device_str(&text, false).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "dimension"),
            other => panic!("unexpected {other:?}"),
        }
        let text = SPIN_HALF.replacen("\"dimension\": 2", "\"dimension\": 3", 1);
        match parse_device_str(&text, false).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "preparation[0].matrix"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"format_version": 1, "dimension": 2, "preparation": [{"label": "a", "matrix": [[[1,0],[0,0]],[[0,0],[0,0]]]}]}"#;
        assert_eq!(
            parse_device_str(text, false).unwrap_err(),
            schema("measurement", "missing")
        );
    }

    #[test]
    fn non_psd_operator_fails_validation() {
        let text = r#"{"format_version": 1, "dimension": 2,
            "preparation": [{"label": "1", "matrix": [[[1,0],[0,0]],[[0,0],[-0.1,0]]]}],
            "measurement": [{"label": "1", "matrix": [[[1,0],[0,0]],[[0,0],[1,0]]]}]}"#;
        let parsed = parse_device_str(text, false).unwrap();
        assert!(matches!(
            parsed.file.build(&Tolerances::default()),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let parsed = parse_device_str(SPIN_HALF, false).unwrap();
        let again = parse_device_str(&parsed.file.to_json(), false).unwrap();
        assert_eq!(parsed.file, again.file);
        let setup = parsed.file.build(&Tolerances::default()).unwrap();
        let emitted = DeviceFile::from_devices(&setup.prep, &setup.meas);
        assert_eq!(emitted, parsed.file);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0), "1.0");
        assert_eq!(fmt_num(-0.0), "0.0");
        assert_eq!(fmt_num(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(fmt_num(1e-20), "1e-20");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 6.02214076e23, 5e-324] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_tables() {
        let setup = parse_device_str(SPIN_HALF, false)
            .unwrap()
            .file
            .build(&Tolerances::default())
            .unwrap();
        let jd = joint(&setup.prep, &setup.meas).unwrap();
        assert_eq!(joint_csv(&jd).unwrap(), "prep\\meas,1\nup,0.5\ndown,0.5\n");
        let retro = retrodictive(&jd);
        assert_eq!(
            conditional_csv(&retro).unwrap(),
            "given_meas\\prep,up,down\n1,0.5,0.5\n"
        );
    }
}
