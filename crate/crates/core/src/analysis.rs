//! Scenario comparison, sensitivity sweeps and plot-data exports.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::document::Document;
use crate::engine::{AssessError, Assessment, Assessor};
use crate::exec::Execution;
use crate::format::machine;
use crate::opinion::{self, BetaShape, EvidenceCount, Opinion, OpinionError};
use crate::settings::SettingsOverrides;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("document has no scenarios")]
    NoScenarios,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error("node {node}: {source}")]
    Numeric { node: String, source: OpinionError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    /// `G1`, or `G1 | A1` for an opinion conditional on assumptions.
    pub label: String,
    pub node: String,
    pub given: Vec<String>,
    pub cells: Vec<Opinion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioTable {
    pub scenarios: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Assesses every scenario of `doc` and lines the results up per node.
///
/// In marginalize mode a node that consumed assumptions also gets a row for
/// its opinion before consumption, right after its own row.
pub fn compare_scenarios(
    doc: &Document,
    overrides: &SettingsOverrides,
    exec: Execution,
) -> Result<ScenarioTable, AnalysisError> {
    if doc.scenarios.is_empty() {
        return Err(AnalysisError::NoScenarios);
    }
    let assessor = Assessor::new(doc, overrides)?;
    let names: Vec<String> = doc.scenarios.keys().cloned().collect();
    let runs: Vec<Assessment> = exec.try_map(&names, |n| assessor.run(Some(n), &[]))?;
    let first = &runs[0];
    let mut rows = Vec::new();
    for r in first.rows() {
        let cells = |f: &dyn Fn(&Assessment) -> Opinion| runs.iter().map(f).collect::<Vec<_>>();
        let given: Vec<String> = r.context_set.iter().cloned().collect();
        rows.push(TableRow {
            label: label(&r.id, &given),
            node: r.id.clone(),
            given,
            cells: cells(&|a| a.results[&r.id].opinion),
        });
        if r.conditional.is_some() {
            let mut given: Vec<String> = r.consumed_contexts.iter().cloned().collect();
            given.retain(|g| doc.graph.contexts(&r.id).any(|e| &e.target == g));
            rows.push(TableRow {
                label: label(&r.id, &given),
                node: r.id.clone(),
                given,
                cells: cells(&|a| {
                    let res = &a.results[&r.id];
                    res.conditional.unwrap_or(res.opinion)
                }),
            });
        }
    }
    Ok(ScenarioTable { scenarios: names, rows })
}

fn label(id: &str, given: &[String]) -> String {
    if given.is_empty() {
        id.to_string()
    } else {
        format!("{id} | {}", given.join(", "))
    }
}

/// How the injected opinion depends on the sweep parameter `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SweepMode {
    /// `b = t(1 − u)`, `d = (1 − t)(1 − u)` at fixed `u`.
    BeliefTradeoff { fixed_u: f64 },
    /// `u = t`, with the committed mass split `ratio : 1 − ratio` into `b : d`.
    Uncertainty { ratio: f64 },
    /// `r = t·r_max` positive observations against a fixed `s`.
    Evidence { r_max: f64, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub target: String,
    pub mode: SweepMode,
    pub steps: usize,
    /// Nodes to record; the root when empty.
    pub observed: Vec<String>,
    pub scenario: Option<String>,
}

impl SweepSpec {
    pub fn new(target: impl Into<String>, mode: SweepMode, steps: usize) -> Self {
        SweepSpec { target: target.into(), mode, steps, observed: Vec::new(), scenario: None }
    }

    pub fn check(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::InvalidSpec(m));
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match self.mode {
            SweepMode::BeliefTradeoff { fixed_u } if !unit(fixed_u) => bad(format!("fixed u {fixed_u} outside [0, 1]")),
            SweepMode::Uncertainty { ratio } if !unit(ratio) => bad(format!("ratio {ratio} outside [0, 1]")),
            SweepMode::Evidence { r_max, s } if !(r_max.is_finite() && r_max >= 0.0 && s.is_finite() && s >= 0.0) => {
                bad(format!("evidence counts must be non-negative, got r_max={r_max} s={s}"))
            }
            _ => Ok(()),
        }
    }

    /// The opinion injected at `t`.
    pub fn input_at(&self, t: f64, weight: f64, base_rate: f64) -> Result<Opinion, OpinionError> {
        match self.mode {
            SweepMode::BeliefTradeoff { fixed_u } => {
                let c = 1.0 - fixed_u;
                Opinion::new(t * c, (1.0 - t) * c, fixed_u, base_rate)
            }
            SweepMode::Uncertainty { ratio } => {
                let c = 1.0 - t;
                Opinion::new(c * ratio, c * (1.0 - ratio), t, base_rate)
            }
            SweepMode::Evidence { r_max, s } => opinion::from_evidence(&EvidenceCount::new(t * r_max, s, weight, base_rate)?),
        }
    }

    /// Equally spaced parameter values, both ends included.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n).map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub node: String,
    pub opinion: Opinion,
    pub projection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub input: Opinion,
    pub observed: Vec<Observation>,
}

/// Re-assesses the document once per grid point with the target's opinion
/// replaced; everything else stays fixed. Rows come back in grid order.
pub fn sweep(
    doc: &Document,
    spec: &SweepSpec,
    overrides: &SettingsOverrides,
    exec: Execution,
) -> Result<Vec<SweepRow>, AnalysisError> {
    spec.check()?;
    let assessor = Assessor::new(doc, overrides)?;
    let target = doc.graph.node(&spec.target).ok_or_else(|| AnalysisError::UnknownNode(spec.target.clone()))?;
    if !target.kind.accepts_input() {
        return Err(AnalysisError::InvalidSpec(format!("a {} cannot take an injected opinion", target.kind)));
    }
    let observed: Vec<String> = if spec.observed.is_empty() {
        vec![doc.graph.root().ok_or_else(|| AnalysisError::InvalidSpec("document has no unique root".into()))?.to_string()]
    } else {
        spec.observed.clone()
    };
    let s = assessor.settings();
    let (weight, base_rate) = (s.prior_weight, s.default_base_rate);
    exec.try_map(&spec.grid(), |&t| {
        let input = spec
            .input_at(t, weight, base_rate)
            .map_err(|source| AnalysisError::Numeric { node: spec.target.clone(), source })?;
        let a = assessor.run(spec.scenario.as_deref(), &[(spec.target.clone(), input)])?;
        let observed = observed
            .iter()
            .map(|id| {
                let o = a.opinion(id).ok_or_else(|| AnalysisError::UnknownNode(id.clone()))?;
                Ok(Observation { node: id.clone(), opinion: o, projection: o.project() })
            })
            .collect::<Result<_, AnalysisError>>()?;
        Ok(SweepRow { t, input, observed })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub p: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BetaExport {
    Curve { shape: BetaShape, projection: f64, samples: Vec<CurveSample> },
    /// A dogmatic opinion has no density; all mass sits at its projection.
    PointMass { p: f64, projection: f64 },
}

/// Samples the Beta density of a node's opinion at `samples` equally spaced
/// points. Endpoints are included when the density is finite there.
pub fn export_beta_curve(a: &Assessment, id: &str, samples: usize) -> Result<BetaExport, AnalysisError> {
    let o = a.opinion(id).ok_or_else(|| AnalysisError::UnknownNode(id.to_string()))?;
    let projection = o.project();
    if o.is_dogmatic() {
        return Ok(BetaExport::PointMass { p: projection, projection });
    }
    if samples < 2 {
        return Err(AnalysisError::InvalidSpec(format!("need at least 2 samples, got {samples}")));
    }
    let numeric = |source| AnalysisError::Numeric { node: id.to_string(), source };
    let shape = opinion::to_beta(&o, a.settings.prior_weight).map_err(numeric)?;
    let n = samples;
    let grid: Vec<f64> = if shape.bounded() {
        (0..n).map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 }).collect()
    } else {
        (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect()
    };
    let samples = grid
        .into_iter()
        .map(|p| Ok(CurveSample { p, density: opinion::beta_pdf(&shape, p).map_err(numeric)? }))
        .collect::<Result<_, AnalysisError>>()?;
    Ok(BetaExport::Curve { shape, projection, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleRow {
    pub node: String,
    pub opinion: Opinion,
    pub projection: f64,
}

/// Barycentric coordinates of the given nodes, or of every node when `ids`
/// is empty.
pub fn export_triangle(a: &Assessment, ids: &[String]) -> Result<Vec<TriangleRow>, AnalysisError> {
    let pick: Vec<&str> = if ids.is_empty() {
        a.order.iter().map(String::as_str).collect()
    } else {
        ids.iter().map(String::as_str).collect()
    };
    pick.into_iter()
        .map(|id| {
            let o = a.opinion(id).ok_or_else(|| AnalysisError::UnknownNode(id.to_string()))?;
            Ok(TriangleRow { node: id.to_string(), opinion: o, projection: o.project() })
        })
        .collect()
}

/// Trapezoid rule over the emitted samples.
pub fn integrate(samples: &[CurveSample]) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[0].density + w[1].density) * (w[1].p - w[0].p)).sum()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("t,b_in,d_in,u_in,node,b,d,u,projection\n");
    for r in rows {
        for o in &r.observed {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                machine(r.t),
                machine(r.input.b()),
                machine(r.input.d()),
                machine(r.input.u()),
                o.node,
                machine(o.opinion.b()),
                machine(o.opinion.d()),
                machine(o.opinion.u()),
                machine(o.projection)
            );
        }
    }
    out
}

pub fn beta_csv(export: &BetaExport) -> String {
    let mut out = String::from("p,density\n");
    match export {
        BetaExport::Curve { samples, .. } => {
            for s in samples {
                let _ = writeln!(out, "{},{}", machine(s.p), machine(s.density));
            }
        }
        BetaExport::PointMass { p, .. } => {
            let _ = writeln!(out, "{},inf", machine(*p));
        }
    }
    out
}

pub fn triangle_csv(rows: &[TriangleRow]) -> String {
    let mut out = String::from("node,b,d,u,projection\n");
    for r in rows {
        let o = &r.opinion;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.node,
            machine(o.b()),
            machine(o.d()),
            machine(o.u()),
            machine(r.projection)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_document;
    use crate::engine::assess;

    const DOC: &str = r#"
version: "1"
nodes:
  - {id: G1, kind: goal}
  - {id: A1, kind: assumption, opinion: {b: 1, d: 0, u: 0}}
  - {id: G2, kind: goal}
  - {id: Sn1, kind: solution, opinion: {b: 0.8, d: 0, u: 0.2}}
edges:
  - {source: G1, target: G2, kind: supportedBy, conditionals: &w {pos: {b: 0.95, d: 0, u: 0.05}, neg: {b: 0, d: 1, u: 0}}}
  - {source: G1, target: A1, kind: inContextOf}
  - {source: G2, target: Sn1, kind: supportedBy, conditionals: *w}
scenarios:
  none: {Sn1: {b: 0, d: 0, u: 1}}
  sure: {Sn1: {b: 1, d: 0, u: 0}}
"#;

    fn doc() -> Document {
        parse_document(DOC).unwrap()
    }

    #[test]
    fn table_has_conditional_rows() {
        let t = compare_scenarios(&doc(), &SettingsOverrides::default(), Execution::Parallel).unwrap();
        assert_eq!(t.scenarios, ["none", "sure"]);
        let labels: Vec<&str> = t.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["G1", "G1 | A1", "A1", "G2", "Sn1"]);
        let seq = compare_scenarios(&doc(), &SettingsOverrides::default(), Execution::Sequential).unwrap();
        assert_eq!(t, seq);
        let direct = assess(&doc(), Some("sure"), &SettingsOverrides::default()).unwrap();
        assert_eq!(t.rows[3].cells[1], direct.opinion("G2").unwrap());
    }

    #[test]
    fn sweep_endpoints() {
        let spec = SweepSpec::new("A1", SweepMode::BeliefTradeoff { fixed_u: 0.0 }, 11);
        let rows = sweep(&doc(), &spec, &SettingsOverrides::default(), Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[10].t, 1.0);
        let direct = assess(&doc(), None, &SettingsOverrides::default()).unwrap();
        let g1 = direct.opinion("G1").unwrap();
        let last = rows[10].observed[0].opinion;
        assert_eq!((last.b(), last.d(), last.u()), (g1.b(), g1.d(), g1.u()));
        let first = rows[0].observed[0].opinion;
        assert_eq!((first.b(), first.d(), first.u()), (0.0, 1.0, 0.0));
        for w in rows.windows(2) {
            assert!(w[1].observed[0].projection >= w[0].observed[0].projection);
        }
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let o = SettingsOverrides::default();
        let spec = SweepSpec::new("A1", SweepMode::BeliefTradeoff { fixed_u: 0.0 }, 1);
        assert!(matches!(sweep(&doc(), &spec, &o, Execution::Sequential), Err(AnalysisError::InvalidSpec(_))));
        let spec = SweepSpec::new("Zz", SweepMode::Uncertainty { ratio: 0.5 }, 3);
        assert_eq!(sweep(&doc(), &spec, &o, Execution::Sequential), Err(AnalysisError::UnknownNode("Zz".into())));
        let spec = SweepSpec::new("A1", SweepMode::Uncertainty { ratio: 1.5 }, 3);
        assert!(sweep(&doc(), &spec, &o, Execution::Sequential).is_err());
    }

    #[test]
    fn evidence_sweep_grows_belief() {
        let spec = SweepSpec::new("Sn1", SweepMode::Evidence { r_max: 8.0, s: 0.0 }, 3);
        let rows = sweep(&doc(), &spec, &SettingsOverrides::default(), Execution::Sequential).unwrap();
        assert!(rows[0].input.is_vacuous());
        assert!((rows[2].input.b() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn beta_exports() {
        let a = assess(&doc(), None, &SettingsOverrides::default()).unwrap();
        match export_beta_curve(&a, "Sn1", 201).unwrap() {
            BetaExport::Curve { shape, samples, projection } => {
                assert!((shape.alpha - 9.0).abs() < 1e-12 && (shape.beta - 1.0).abs() < 1e-12);
                assert_eq!(samples.len(), 201);
                assert!((integrate(&samples) - 1.0).abs() < 1e-3);
                assert!((samples[200].density - 9.0).abs() < 1e-9);
                assert!((projection - 0.9).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let none = assess(&doc(), Some("none"), &SettingsOverrides::default()).unwrap();
        match export_beta_curve(&none, "Sn1", 5).unwrap() {
            BetaExport::Curve { samples, .. } => assert!(samples.iter().all(|s| (s.density - 1.0).abs() < 1e-12)),
            other => panic!("{other:?}"),
        }
        let mark = export_beta_curve(&a, "A1", 10).unwrap();
        assert_eq!(mark, BetaExport::PointMass { p: 1.0, projection: 1.0 });
        assert_eq!(beta_csv(&mark), "p,density\n1,inf\n");
    }

    #[test]
    fn triangle_rows() {
        let a = assess(&doc(), Some("none"), &SettingsOverrides::default()).unwrap();
        let rows = export_triangle(&a, &["Sn1".into()]).unwrap();
        assert_eq!(triangle_csv(&rows), "node,b,d,u,projection\nSn1,0,0,1,0.5\n");
        assert!(export_triangle(&a, &["X".into()]).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let spec = SweepSpec::new("A1", SweepMode::BeliefTradeoff { fixed_u: 0.0 }, 2);
        let rows = sweep(&doc(), &spec, &SettingsOverrides::default(), Execution::Sequential).unwrap();
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,b_in,d_in,u_in,node,b,d,u,projection"));
        assert!(lines.next().unwrap().starts_with("0,0,1,0,G1,0,1,0,"));
    }
}
