//! Argument documents: parsing, validation on load, and canonical
//! serialization.
//!
//! The JSON form is primary; YAML is accepted with the same structure. Every
//! failure carries a locus: a line/column for syntax errors, a field path for
//! schema errors, and a full [`ValidationReport`] for structural ones.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, ArgEdge, ArgNode, ArgumentGraph, Code, Locus, ValidationReport};
use crate::settings::Settings;
use crate::source::OpinionSource;

pub const FORMAT_VERSION: &str = "1";

/// Named input assignments overriding node inputs during assessment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub name: String,
    pub assignments: IndexMap<String, OpinionSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub version: String,
    pub settings: Settings,
    pub graph: ArgumentGraph,
    pub scenarios: IndexMap<String, Scenario>,
}

impl Document {
    pub fn new(graph: ArgumentGraph, settings: Settings) -> Self {
        Document { version: FORMAT_VERSION.to_string(), settings, graph, scenarios: IndexMap::new() }
    }

    pub fn with_scenario(mut self, name: &str, assignments: impl IntoIterator<Item = (String, OpinionSource)>) -> Self {
        self.scenarios.insert(
            name.to_string(),
            Scenario { name: name.to_string(), assignments: assignments.into_iter().collect() },
        );
        self
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.get(name)
    }

    /// Drops base rates equal to the document default so equivalent documents
    /// compare equal and serialize identically.
    fn canonicalize(&mut self) {
        let a = self.settings.default_base_rate;
        for n in &mut self.graph.nodes {
            n.input = n.input.take().map(|s| s.canonical(a));
        }
        for e in &mut self.graph.edges {
            e.conditionals = e.conditionals.map(|c| c.canonical(a));
        }
        for sc in self.scenarios.values_mut() {
            for src in sc.assignments.values_mut() {
                *src = src.clone().canonical(a);
            }
        }
        if let Some(c) = self.settings.default_conditionals {
            self.settings.default_conditionals = Some(c.canonical(a));
        }
    }
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("document failed validation")]
    ValidationFailed(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Yaml,
}

impl Format {
    /// JSON when the first significant character opens an object, else YAML.
    pub fn sniff(text: &str) -> Format {
        match text.trim_start_matches('\u{feff}').trim_start().chars().next() {
            Some('{') => Format::Json,
            _ => Format::Yaml,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Yaml => "yaml",
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(deserialize_with = "version_token")]
    version: String,
    #[serde(default)]
    settings: Settings,
    nodes: Vec<ArgNode>,
    #[serde(default)]
    edges: Vec<ArgEdge>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    scenarios: IndexMap<String, IndexMap<String, OpinionSource>>,
}

fn version_token<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Token {
        Text(String),
        Number(u64),
    }
    let v = match Token::deserialize(d)? {
        Token::Text(s) => s,
        Token::Number(n) => n.to_string(),
    };
    if v != FORMAT_VERSION {
        return Err(serde::de::Error::custom(format!("unsupported version {v:?}, expected {FORMAT_VERSION:?}")));
    }
    Ok(v)
}

/// Parses a document without structural validation.
pub fn parse_unchecked(text: &str) -> Result<Document, DocumentError> {
    let value: serde_json::Value = match Format::sniff(text) {
        Format::Json => serde_json::from_str(text).map_err(|e| DocumentError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?,
        Format::Yaml => {
            let yaml: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| {
                let (line, column) = e.location().map_or((0, 0), |l| (l.line(), l.column()));
                DocumentError::Syntax { line, column, message: e.to_string() }
            })?;
            serde_json::to_value(yaml)
                .map_err(|e| DocumentError::Schema { path: ".".into(), message: e.to_string() })?
        }
    };
    let raw: RawDocument = serde_path_to_error::deserialize(value).map_err(|e| DocumentError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let scenarios = raw
        .scenarios
        .into_iter()
        .map(|(name, assignments)| (name.clone(), Scenario { name, assignments }))
        .collect();
    let mut doc = Document {
        version: raw.version,
        settings: raw.settings,
        graph: ArgumentGraph::new(raw.nodes, raw.edges),
        scenarios,
    };
    doc.canonicalize();
    Ok(doc)
}

/// Parses and validates a document; structural errors fail the parse with the
/// full report attached.
pub fn parse_document(text: &str) -> Result<Document, DocumentError> {
    let doc = parse_unchecked(text)?;
    let report = validate_document(&doc);
    if report.is_clean() {
        Ok(doc)
    } else {
        Err(DocumentError::ValidationFailed(report))
    }
}

pub fn load_document(path: &Path) -> Result<Document, DocumentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DocumentError::Io { path: path.display().to_string(), source })?;
    parse_document(&text)
}

/// Graph validation plus the checks that need scenarios.
pub fn validate_document(doc: &Document) -> ValidationReport {
    let mut report = graph::validate_argument(&doc.graph, &doc.settings);
    for (name, sc) in &doc.scenarios {
        if !graph::valid_id(name) {
            report.error(
                Code::InvalidId,
                Locus::Scenario { name: name.clone(), node: String::new() },
                format!("scenario name {name:?} must match [A-Za-z0-9_.-]+"),
            );
        }
        for (id, src) in &sc.assignments {
            let locus = || Locus::Scenario { name: name.clone(), node: id.clone() };
            match doc.graph.node(id) {
                None => report.error(Code::UnknownScenarioNode, locus(), format!("no node {id}")),
                Some(n) if !n.kind.accepts_input() => {
                    report.error(Code::InputOnKind, locus(), format!("a {} cannot carry an input opinion", n.kind))
                }
                Some(_) => {
                    if let Err(e) = src.resolve(&doc.settings) {
                        report.error(Code::InvalidInput, locus(), e.to_string());
                    }
                }
            }
        }
    }
    report.finish();
    report
}

/// Rounds to 12 significant digits.
pub(crate) fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_numbers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_numbers),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn to_raw(doc: &Document) -> RawDocument {
    RawDocument {
        version: doc.version.clone(),
        settings: doc.settings.clone(),
        nodes: doc.graph.nodes.clone(),
        edges: doc.graph.edges.clone(),
        scenarios: doc.scenarios.iter().map(|(k, s)| (k.clone(), s.assignments.clone())).collect(),
    }
}

/// Canonical JSON text: fixed key order, defaults elided, numbers rounded
/// to 12 significant digits.
pub fn serialize_document(doc: &Document) -> String {
    serialize_document_as(doc, Format::Json)
}

pub fn serialize_document_as(doc: &Document, format: Format) -> String {
    let mut value = serde_json::to_value(to_raw(doc)).expect("document serializes");
    round_numbers(&mut value);
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
            s.push('\n');
            s
        }
        Format::Yaml => serde_yaml::to_string(&value).expect("value serializes"),
    }
}
