//! JSON instance documents.
//!
//! Rationals are written as exact strings (`"1/3"`, `"5"`); integers are
//! also accepted on input. Unknown fields are rejected. Every error carries
//! the path of the offending field, in document order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{
    validate_instance, Aircraft, AircraftRef, BidProfile, Instance, Operator, RouteOption,
    ValidationIssue, ValuationProfile, ValueProfile, Vertiport,
};
use crate::rational::{parse_rational, render_rational, Rational};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceDocument {
    pub schema_version: String,
    pub instance: Instance,
    pub bids: Option<BidProfile>,
    pub valuations: Option<ValuationProfile>,
}

impl InstanceDocument {
    pub fn new(instance: Instance) -> Self {
        InstanceDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            instance,
            bids: None,
            valuations: None,
        }
    }

    /// Submitted bids; truthful copies of the valuations when absent, and
    /// all zeros when neither is present.
    pub fn effective_bids(&self) -> BidProfile {
        self.bids
            .clone()
            .or_else(|| self.valuations.clone())
            .unwrap_or_else(|| ValueProfile::zeros(&self.instance))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(FieldIssue),
    #[error("{}", render_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

fn render_issues(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl DocumentError {
    pub fn is_io(&self) -> bool {
        matches!(self, DocumentError::Io { .. })
    }

    /// Every field path mentioned by the error.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            DocumentError::Schema(i) => vec![i.path.as_str()],
            DocumentError::Invalid(v) => v.iter().map(|i| i.path.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> DocumentError {
    DocumentError::Schema(FieldIssue {
        path: path.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Exact(Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exact;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an exact rational string such as \"3/4\" or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exact, E> {
                parse_rational(v).map(Exact).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
                Ok(Exact(crate::rational::int(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
                Err(E::custom(format!(
                    "floating-point value {v} is not exact; write it as a string"
                )))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRepr {
    schema_version: String,
    instance: InstanceRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bids: Option<ProfileRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valuations: Option<ProfileRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    horizon: u32,
    lambda: Exact,
    vertiports: Vec<VertiportRepr>,
    operators: Vec<OperatorRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertiportRepr {
    id: String,
    arrival_cap: Vec<u32>,
    departure_cap: Vec<u32>,
    parking_cap: Vec<u32>,
    congestion_cost: Vec<Vec<Exact>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorRepr {
    id: String,
    weight: Exact,
    fleet: Vec<AircraftRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AircraftRepr {
    id: String,
    origin: String,
    menu: Vec<MenuRepr>,
}

/// A stay entry carries only its key; a transit entry has all three route
/// fields.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MenuRepr {
    key: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depart: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    destination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrive: Option<u32>,
}

/// operator id -> aircraft id -> value per menu key.
type ProfileRepr = BTreeMap<String, BTreeMap<String, Vec<Exact>>>;

pub fn parse_document(text: &str) -> Result<InstanceDocument, DocumentError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let repr: DocumentRepr = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        if inner.is_syntax() || inner.is_eof() {
            DocumentError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        } else {
            let path = e.path().to_string();
            let message = inner.to_string();
            let message = match message.rfind(" at line ") {
                Some(at) => message[..at].to_string(),
                None => message,
            };
            schema(format!("$.{path}"), message)
        }
    })?;
    de.end().map_err(|e| DocumentError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_repr(repr)
}

fn from_repr(repr: DocumentRepr) -> Result<InstanceDocument, DocumentError> {
    if repr.schema_version != SCHEMA_VERSION {
        return Err(schema(
            "$.schema_version",
            format!(
                "unsupported schema version {:?}, expected {SCHEMA_VERSION:?}",
                repr.schema_version
            ),
        ));
    }
    let ir = &repr.instance;
    let vertiports = ir
        .vertiports
        .iter()
        .map(|v| Vertiport {
            id: v.id.clone(),
            arrival_cap: v.arrival_cap.clone(),
            departure_cap: v.departure_cap.clone(),
            parking_cap: v.parking_cap.clone(),
            congestion_cost: v
                .congestion_cost
                .iter()
                .map(|row| row.iter().map(|e| e.0.clone()).collect())
                .collect(),
        })
        .collect();
    let mut operators = Vec::with_capacity(ir.operators.len());
    for (o, op) in ir.operators.iter().enumerate() {
        let mut fleet = Vec::with_capacity(op.fleet.len());
        for (a, ac) in op.fleet.iter().enumerate() {
            let mut menu = Vec::with_capacity(ac.menu.len());
            for (m, entry) in ac.menu.iter().enumerate() {
                let path = format!("$.instance.operators[{o}].fleet[{a}].menu[{m}]");
                menu.push(match (entry.depart, &entry.destination, entry.arrive) {
                    (None, None, None) => RouteOption::stay(entry.key),
                    (Some(d), Some(dest), Some(arr)) => {
                        RouteOption::transit(entry.key, d, dest.clone(), arr)
                    }
                    _ => {
                        return Err(schema(
                            path,
                            format!(
                                "aircraft {}/{}: transit entry needs depart, destination and arrive",
                                op.id, ac.id
                            ),
                        ))
                    }
                });
            }
            fleet.push(Aircraft {
                id: ac.id.clone(),
                origin: ac.origin.clone(),
                menu,
            });
        }
        operators.push(Operator {
            id: op.id.clone(),
            weight: op.weight.0.clone(),
            fleet,
        });
    }
    let instance = Instance::new(ir.horizon, ir.lambda.0.clone(), vertiports, operators);
    let report = validate_instance(&instance);
    if !report.is_valid() {
        return Err(DocumentError::Invalid(
            report
                .issues
                .iter()
                .map(|issue| FieldIssue {
                    path: issue_path(issue, ir),
                    message: issue.to_string(),
                })
                .collect(),
        ));
    }
    let bids = repr
        .bids
        .as_ref()
        .map(|p| profile_from_repr(&instance, p, "bids"))
        .transpose()?;
    let valuations = repr
        .valuations
        .as_ref()
        .map(|p| profile_from_repr(&instance, p, "valuations"))
        .transpose()?;
    Ok(InstanceDocument {
        schema_version: repr.schema_version,
        instance,
        bids,
        valuations,
    })
}

fn profile_from_repr(
    instance: &Instance,
    repr: &ProfileRepr,
    field: &str,
) -> Result<ValueProfile, DocumentError> {
    let mut issues = Vec::new();
    let mut push = |path: String, message: String| issues.push(FieldIssue { path, message });
    for (op_id, fleet) in repr {
        let Some(o) = instance.operator_index(op_id) else {
            push(format!("$.{field}.{op_id}"), format!("unknown operator {op_id:?}"));
            continue;
        };
        let op = &instance.operators()[o];
        for ac_id in fleet.keys() {
            if !op.fleet.iter().any(|a| &a.id == ac_id) {
                push(
                    format!("$.{field}.{op_id}.{ac_id}"),
                    format!("unknown aircraft {op_id}/{ac_id}"),
                );
            }
        }
    }
    let profile = ValueProfile::from_fn(instance, |at: AircraftRef, ac, opt| {
        let op_id = &instance.operators()[at.operator].id;
        let path = format!("$.{field}.{op_id}.{}", ac.id);
        let Some(row) = repr.get(op_id).and_then(|f| f.get(&ac.id)) else {
            if opt.key == 0 {
                push(path, format!("missing values for aircraft {op_id}/{}", ac.id));
            }
            return Rational::default();
        };
        if row.len() != ac.menu.len() {
            if opt.key == 0 {
                push(
                    path,
                    format!("expected {} values (one per menu key), found {}", ac.menu.len(), row.len()),
                );
            }
            return Rational::default();
        }
        let v = row[opt.key].0.clone();
        if v < Rational::default() {
            push(format!("{path}[{}]", opt.key), "value must be non-negative".into());
        }
        v
    });
    if issues.is_empty() {
        Ok(profile)
    } else {
        Err(DocumentError::Invalid(issues))
    }
}

fn issue_path(issue: &ValidationIssue, ir: &InstanceRepr) -> String {
    use ValidationIssue::*;
    let port = |id: &str| {
        ir.vertiports
            .iter()
            .position(|v| v.id == id)
            .map(|i| format!("$.instance.vertiports[{i}]"))
            .unwrap_or_else(|| "$.instance.vertiports".into())
    };
    let op = |id: &str| {
        ir.operators
            .iter()
            .position(|o| o.id == id)
            .map(|i| format!("$.instance.operators[{i}]"))
            .unwrap_or_else(|| "$.instance.operators".into())
    };
    let aircraft = |o: &str, a: &str| -> (String, Option<&AircraftRepr>) {
        let Some(oi) = ir.operators.iter().position(|x| x.id == o) else {
            return ("$.instance.operators".into(), None);
        };
        match ir.operators[oi].fleet.iter().position(|x| x.id == a) {
            Some(ai) => (
                format!("$.instance.operators[{oi}].fleet[{ai}]"),
                Some(&ir.operators[oi].fleet[ai]),
            ),
            None => (format!("$.instance.operators[{oi}].fleet"), None),
        }
    };
    let entry = |o: &str, a: &str, key: usize| {
        let (base, ac) = aircraft(o, a);
        match ac.and_then(|ac| ac.menu.iter().position(|m| m.key == key)) {
            Some(m) => format!("{base}.menu[{m}]"),
            None => format!("{base}.menu"),
        }
    };
    match issue {
        ZeroHorizon => "$.instance.horizon".into(),
        NegativeLambda => "$.instance.lambda".into(),
        DuplicateId { kind, id } => match *kind {
            "vertiport" => "$.instance.vertiports".into(),
            "operator" => "$.instance.operators".into(),
            _ => ir
                .operators
                .iter()
                .position(|o| o.fleet.iter().filter(|a| &a.id == id).count() > 1)
                .map(|i| format!("$.instance.operators[{i}].fleet"))
                .unwrap_or_else(|| "$.instance.operators".into()),
        },
        TableLength {
            vertiport, table, ..
        } => format!("{}.{table}", port(vertiport)),
        CongestionTableSize {
            vertiport, slot, ..
        } => format!("{}.congestion_cost[{}]", port(vertiport), slot - 1),
        CongestionOrigin { vertiport, slot } => {
            format!("{}.congestion_cost[{}][0]", port(vertiport), slot - 1)
        }
        CongestionNegative { vertiport, slot, q } | CongestionNotConvex { vertiport, slot, q } => {
            format!("{}.congestion_cost[{}][{q}]", port(vertiport), slot - 1)
        }
        SlackCondition {
            vertiport, slot, ..
        } => format!("{}.parking_cap[{}]", port(vertiport), slot - 1),
        NonPositiveWeight { operator } => format!("{}.weight", op(operator)),
        UnknownOrigin {
            operator, aircraft: a, ..
        } => format!("{}.origin", aircraft(operator, a).0),
        UnknownDestination {
            operator,
            aircraft: a,
            key,
            ..
        } => format!("{}.destination", entry(operator, a, *key)),
        StayCount {
            operator, aircraft: a, ..
        }
        | MenuKeys {
            operator,
            aircraft: a,
        } => format!("{}.menu", aircraft(operator, a).0),
        TransitTimes {
            operator,
            aircraft: a,
            key,
            ..
        } => entry(operator, a, *key),
    }
}

fn profile_to_repr(instance: &Instance, p: &ValueProfile) -> ProfileRepr {
    instance
        .operators()
        .iter()
        .enumerate()
        .map(|(o, op)| {
            let fleet = op
                .fleet
                .iter()
                .enumerate()
                .map(|(a, ac)| {
                    let at = AircraftRef {
                        operator: o,
                        aircraft: a,
                    };
                    (
                        ac.id.clone(),
                        p.aircraft_values(at).iter().cloned().map(Exact).collect(),
                    )
                })
                .collect();
            (op.id.clone(), fleet)
        })
        .collect()
}

/// Canonical rendering: pretty-printed, fields in fixed order, instance
/// entities sorted by id, trailing newline.
pub fn render_document(doc: &InstanceDocument) -> String {
    let inst = &doc.instance;
    let repr = DocumentRepr {
        schema_version: doc.schema_version.clone(),
        instance: InstanceRepr {
            horizon: inst.horizon(),
            lambda: Exact(inst.lambda().clone()),
            vertiports: inst
                .vertiports()
                .iter()
                .map(|v| VertiportRepr {
                    id: v.id.clone(),
                    arrival_cap: v.arrival_cap.clone(),
                    departure_cap: v.departure_cap.clone(),
                    parking_cap: v.parking_cap.clone(),
                    congestion_cost: v
                        .congestion_cost
                        .iter()
                        .map(|row| row.iter().cloned().map(Exact).collect())
                        .collect(),
                })
                .collect(),
            operators: inst
                .operators()
                .iter()
                .map(|op| OperatorRepr {
                    id: op.id.clone(),
                    weight: Exact(op.weight.clone()),
                    fleet: op
                        .fleet
                        .iter()
                        .map(|ac| AircraftRepr {
                            id: ac.id.clone(),
                            origin: ac.origin.clone(),
                            menu: ac
                                .menu
                                .iter()
                                .map(|o| match &o.route {
                                    crate::model::Route::Stay => MenuRepr {
                                        key: o.key,
                                        depart: None,
                                        destination: None,
                                        arrive: None,
                                    },
                                    crate::model::Route::Transit {
                                        depart,
                                        destination,
                                        arrive,
                                    } => MenuRepr {
                                        key: o.key,
                                        depart: Some(*depart),
                                        destination: Some(destination.clone()),
                                        arrive: Some(*arrive),
                                    },
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        },
        bids: doc.bids.as_ref().map(|p| profile_to_repr(inst, p)),
        valuations: doc.valuations.as_ref().map(|p| profile_to_repr(inst, p)),
    };
    let mut out = serde_json::to_string_pretty(&repr).expect("document serializes");
    out.push('\n');
    out
}

pub fn read_document(path: &Path) -> Result<InstanceDocument, DocumentError> {
    let text = std::fs::read_to_string(path).map_err(|source| DocumentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_document(&text)
}

pub fn write_document(path: &Path, doc: &InstanceDocument) -> Result<(), DocumentError> {
    std::fs::write(path, render_document(doc)).map_err(|source| DocumentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    const SAMPLE: &str = r#"{
  "schema_version": "1",
  "instance": {
    "horizon": 3,
    "lambda": "1/3",
    "vertiports": [
      {"id": "v2", "arrival_cap": [1, 1, 1], "departure_cap": [1, 1, 1], "parking_cap": [1, 1, 1],
       "congestion_cost": [["0", "1"], ["0", "1"], ["0", 1]]},
      {"id": "v1", "arrival_cap": [1, 1, 1], "departure_cap": [1, 1, 1], "parking_cap": [1, 1, 1],
       "congestion_cost": [["0", "1"], ["0", "1"], ["0", "0.5"]]}
    ],
    "operators": [
      {"id": "op", "weight": "2", "fleet": [
        {"id": "a", "origin": "v1", "menu": [
          {"key": 0},
          {"key": 1, "depart": 1, "destination": "v2", "arrive": 2}
        ]}
      ]}
    ]
  },
  "valuations": {"op": {"a": ["0", "7/2"]}}
}"#;

    #[test]
    fn parses_exact_rationals() {
        let doc = parse_document(SAMPLE).unwrap();
        assert_eq!(*doc.instance.lambda(), ratio(1, 3));
        assert_eq!(doc.instance.vertiports()[0].id, "v1");
        assert_eq!(doc.instance.vertiports()[0].congestion_cost[2][1], ratio(1, 2));
        let vals = doc.valuations.as_ref().unwrap();
        let at = AircraftRef {
            operator: 0,
            aircraft: 0,
        };
        assert_eq!(*vals.get(at, 1), ratio(7, 2));
        assert_eq!(doc.effective_bids(), *vals);
    }

    #[test]
    fn render_is_a_fixpoint() {
        let doc = parse_document(SAMPLE).unwrap();
        let text = render_document(&doc);
        let again = parse_document(&text).unwrap();
        assert_eq!(again, doc);
        assert_eq!(render_document(&again), text);
        assert!(text.contains("\"lambda\": \"1/3\""));
    }

    #[test]
    fn unknown_field_is_rejected_with_path() {
        let bad = SAMPLE.replace("\"weight\": \"2\"", "\"weight\": \"2\", \"colour\": 1");
        let err = parse_document(&bad).unwrap_err();
        let DocumentError::Schema(issue) = &err else {
            panic!("expected schema error, got {err}");
        };
        assert_eq!(issue.path, "$.instance.operators[0].colour");
        assert!(issue.message.contains("colour"));
    }

    #[test]
    fn floats_are_rejected() {
        let bad = SAMPLE.replace("\"lambda\": \"1/3\"", "\"lambda\": 0.3");
        let err = parse_document(&bad).unwrap_err();
        assert_eq!(err.paths(), vec!["$.instance.lambda"]);
    }

    #[test]
    fn missing_stay_names_the_aircraft() {
        let bad = SAMPLE.replace(
            "{\"key\": 0},",
            "{\"key\": 0, \"depart\": 1, \"destination\": \"v2\", \"arrive\": 3},",
        );
        let err = parse_document(&bad).unwrap_err();
        let DocumentError::Invalid(issues) = &err else {
            panic!("expected validation error, got {err}");
        };
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "$.instance.operators[0].fleet[0].menu");
        assert!(issues[0].message.contains("op/a"));
    }

    #[test]
    fn validation_paths_use_document_positions() {
        let bad = SAMPLE.replace("[\"0\", \"0.5\"]", "[\"1\", \"0.5\"]");
        let err = parse_document(&bad).unwrap_err();
        assert_eq!(err.paths(), vec!["$.instance.vertiports[1].congestion_cost[2][0]"]);
    }

    #[test]
    fn partial_transit_entry_is_a_schema_error() {
        let bad = SAMPLE.replace("\"depart\": 1, ", "");
        let err = parse_document(&bad).unwrap_err();
        assert_eq!(err.paths(), vec!["$.instance.operators[0].fleet[0].menu[1]"]);
    }

    #[test]
    fn profile_errors_have_paths() {
        let bad = SAMPLE.replace("{\"op\": {\"a\": [\"0\", \"7/2\"]}}", "{\"op\": {\"a\": [\"0\"]}, \"ghost\": {}}");
        let err = parse_document(&bad).unwrap_err();
        let mut paths = err.paths();
        paths.sort();
        assert_eq!(paths, vec!["$.valuations.ghost", "$.valuations.op.a"]);
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_document("{\"schema_version\": ").unwrap_err();
        assert!(matches!(err, DocumentError::Syntax { line: 1, .. }));
        assert!(parse_document(&format!("{SAMPLE} trailing")).is_err());
    }

    #[test]
    fn wrong_schema_version() {
        let bad = SAMPLE.replace("\"schema_version\": \"1\"", "\"schema_version\": \"9\"");
        assert_eq!(parse_document(&bad).unwrap_err().paths(), vec!["$.schema_version"]);
    }

    #[test]
    fn defaults_to_zero_bids() {
        let doc = InstanceDocument::new(Instance::new(1, int(0), vec![], vec![]));
        assert_eq!(doc.effective_bids(), ValueProfile::zeros(&doc.instance));
        let text = render_document(&doc);
        assert!(!text.contains("bids"));
        assert_eq!(parse_document(&text).unwrap(), doc);
    }
}
