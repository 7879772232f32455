//! Model files: one JSON document with `format: 1` and a `kind`
//! discriminator (`descriptor`, `rational` or `network`).
//!
//! Matrices are row-major arrays of rows; polynomials are ascending
//! coefficient arrays.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::Error;
use crate::netgen::NetworkModel;
use crate::numkit::RMatrix;
use crate::rows::{from_rows, to_rows};
use crate::sysmodel::{DescriptorPlant, RationalEntry, RationalMatrix, RationalPlant, WeightedObjective};

pub const FORMAT_VERSION: u64 = 1;

/// Failure to turn a file into a validated model.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    /// The document does not match the schema; `path` locates the field.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    /// The document parsed but the model violates a required condition.
    #[error("{0}")]
    Invariant(Error),
}

impl LoadError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema { path: path.into(), message: message.into() }
    }
}

/// A parsed model with the optional default synthesis frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub model: Model,
    pub omega0: Option<f64>,
}

/// A validated model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Descriptor(DescriptorPlant),
    Rational(RationalPlant),
    Network(NetworkModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Descriptor(_) => "descriptor",
            Model::Rational(_) => "rational",
            Model::Network(_) => "network",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorDoc {
    format: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e: Option<Vec<Vec<f64>>>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalDoc {
    format: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega0: Option<f64>,
    m: Vec<Vec<RationalEntry>>,
    n: Vec<Vec<RationalEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    format: u64,
    kind: String,
    model: NetworkModel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDoc {
    format: u64,
    q: Vec<Vec<f64>>,
}

fn typed<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        LoadError::schema(path, e.into_inner().to_string())
    })
}

fn parse_value(text: &str) -> Result<Value, LoadError> {
    if text.trim().is_empty() {
        return Err(LoadError::schema(".", "empty document"));
    }
    let v: Value = serde_json::from_str(text).map_err(|e| LoadError::schema(".", e.to_string()))?;
    if !v.is_object() {
        return Err(LoadError::schema(".", "expected a JSON object"));
    }
    match v.get("format") {
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION) => Ok(v),
        Some(other) => Err(LoadError::schema("format", format!("unsupported format {other}; expected 1"))),
        None => Err(LoadError::schema("format", "missing field `format`")),
    }
}

fn matrix(rows: &[Vec<f64>], cols_if_empty: usize, field: &str) -> Result<RMatrix, LoadError> {
    from_rows(rows, cols_if_empty).map_err(|m| LoadError::schema(field, m))
}

fn rational_matrix(rows: Vec<Vec<RationalEntry>>, field: &str) -> Result<RationalMatrix, LoadError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(LoadError::schema(format!("{field}[{i}]"), format!("row has {} entries, expected {c}", row.len())));
    }
    RationalMatrix::new(r, c, rows.into_iter().flatten().collect()).map_err(LoadError::Invariant)
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<ModelDocument, LoadError> {
    let v = parse_value(text)?;
    let kind = match v.get("kind") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(LoadError::schema("kind", "expected a string")),
        None => return Err(LoadError::schema("kind", "missing field `kind`")),
    };
    match kind.as_str() {
        "descriptor" => {
            let d: DescriptorDoc = typed(v, "")?;
            let a = matrix(&d.a, 0, "a")?;
            let n = a.nrows();
            let b = matrix(&d.b, 0, "b")?;
            let e = match &d.e {
                Some(e) => matrix(e, n, "e")?,
                None => RMatrix::identity(n, n),
            };
            let model = DescriptorPlant::new(e, a, b).map(Model::Descriptor).map_err(LoadError::Invariant)?;
            Ok(ModelDocument { model, omega0: checked_omega0(d.omega0)? })
        }
        "rational" => {
            let d: RationalDoc = typed(v, "")?;
            let m = rational_matrix(d.m, "m")?;
            let n = rational_matrix(d.n, "n")?;
            let model = RationalPlant::new(m, n).map(Model::Rational).map_err(LoadError::Invariant)?;
            Ok(ModelDocument { model, omega0: checked_omega0(d.omega0)? })
        }
        "network" => {
            let model = v.get("model").cloned();
            // Parse the inner model on its own so errors carry its field path.
            if let Some(inner) = &model {
                let _: NetworkModel = typed(inner.clone(), "model")?;
            }
            let d: NetworkDoc = typed(v, "")?;
            d.model.validate().map_err(LoadError::Invariant)?;
            Ok(ModelDocument { model: Model::Network(d.model), omega0: None })
        }
        other => Err(LoadError::schema(
            "kind",
            format!("unknown kind `{other}`; expected descriptor, rational or network"),
        )),
    }
}

fn checked_omega0(w: Option<f64>) -> Result<Option<f64>, LoadError> {
    match w {
        Some(w) if !w.is_finite() || w < 0.0 => {
            Err(LoadError::Invariant(Error::InvalidParameter(format!("omega0 = {w}; must be finite and >= 0"))))
        }
        _ => Ok(w),
    }
}

/// Reads and parses a model file.
pub fn load_model(path: &std::path::Path) -> Result<ModelDocument, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_model(&text)
}

/// Parses an output-weight document `{"format": 1, "q": [[...]]}`.
pub fn parse_weight(text: &str) -> Result<WeightedObjective, LoadError> {
    let d: WeightDoc = typed(parse_value(text)?, "")?;
    let q = matrix(&d.q, 0, "q")?;
    WeightedObjective::new(q).map_err(LoadError::Invariant)
}

/// Serializes a model to its document form.
pub fn model_to_json(doc: &ModelDocument) -> String {
    let omega0 = doc.omega0;
    let value = match &doc.model {
        Model::Descriptor(p) => serde_json::to_value(DescriptorDoc {
            format: FORMAT_VERSION,
            kind: "descriptor".into(),
            omega0,
            e: (p.e() != &RMatrix::identity(p.states(), p.states())).then(|| to_rows(p.e())),
            a: to_rows(p.a()),
            b: to_rows(p.b()),
        }),
        Model::Rational(p) => {
            let rows = |m: &RationalMatrix| -> Vec<Vec<RationalEntry>> {
                let (r, c) = m.shape();
                (0..r).map(|i| (0..c).map(|j| m.entry(i, j).clone()).collect()).collect()
            };
            serde_json::to_value(RationalDoc {
                format: FORMAT_VERSION,
                kind: "rational".into(),
                omega0,
                m: rows(p.m()),
                n: rows(p.n()),
            })
        }
        Model::Network(net) => {
            serde_json::to_value(NetworkDoc { format: FORMAT_VERSION, kind: "network".into(), model: net.clone() })
        }
    }
    .expect("model documents serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("model documents serialize");
    s.push('\n');
    s
}
