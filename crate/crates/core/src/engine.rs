//! Bottom-up propagation of opinions through an argument graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::document::Document;
use crate::format;
use crate::graph::{
    self, ArgEdge, ArgNode, ArgumentGraph, Code, Diagnostic, EdgeKind, NodeKind, PatternKind, ValidationReport,
};
use crate::opinion::{self, ConditionalPair, FusionMode, Opinion, OpinionError};
use crate::settings::{AggregateBaseRate, ContextMode, Settings, SettingsOverrides};
use crate::source::{DirectOpinion, SourceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    Input,
    DefaultVacuous,
    Multiply,
    Comultiply,
    FuseCumulative,
    FuseAveraging,
    FuseWeighted,
    Deduce,
    Marginalize,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Input => "input",
            Operator::DefaultVacuous => "default-vacuous",
            Operator::Multiply => "multiply",
            Operator::Comultiply => "comultiply",
            Operator::FuseCumulative => "fuse-cumulative",
            Operator::FuseAveraging => "fuse-averaging",
            Operator::FuseWeighted => "fuse-weighted",
            Operator::Deduce => "deduce",
            Operator::Marginalize => "marginalize",
        }
    }

    fn for_pattern(kind: PatternKind) -> Operator {
        match kind {
            PatternKind::Conjunction => Operator::Multiply,
            PatternKind::Disjunction => Operator::Comultiply,
            PatternKind::FusionCumulative => Operator::FuseCumulative,
            PatternKind::FusionAveraging => Operator::FuseAveraging,
            PatternKind::FusionWeighted => Operator::FuseWeighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    /// The result of another node in the same assessment.
    Node(String),
    Step(Box<ProvenanceStep>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StepParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Consequent base rate `a_y` of a deduction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_apex: Option<f64>,
    /// Uncertainty added by the deduction beyond interpolation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Base rate the antecedent entered deduction with, when it was reset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antecedent_base_rate: Option<f64>,
    /// Where an input came from: `scenario`, `node` or `injected`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceStep {
    pub operator: Operator,
    pub operands: Vec<Operand>,
    pub params: StepParams,
    pub result: Opinion,
}

impl ProvenanceStep {
    fn leaf(operator: Operator, result: Opinion, source: Option<&str>) -> Self {
        ProvenanceStep {
            operator,
            operands: Vec::new(),
            params: StepParams { source: source.map(str::to_string), ..Default::default() },
            result,
        }
    }

    /// Node ids referenced anywhere in this step tree, in order.
    pub fn node_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        for op in &self.operands {
            match op {
                Operand::Node(id) => out.push(id),
                Operand::Step(s) => s.collect_refs(out),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeResult {
    pub id: String,
    pub kind: NodeKind,
    pub opinion: Opinion,
    /// The opinion before any of this node's own assumptions were consumed
    /// (marginalize mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional: Option<Opinion>,
    pub context_set: BTreeSet<String>,
    pub consumed_contexts: BTreeSet<String>,
    pub provenance: ProvenanceStep,
    #[serde(skip)]
    raw_input: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub scenario: Option<String>,
    pub results: BTreeMap<String, NodeResult>,
    /// Node ids in display order.
    pub order: Vec<String>,
    pub warnings: Vec<Diagnostic>,
    pub settings: Settings,
}

impl Assessment {
    pub fn get(&self, id: &str) -> Option<&NodeResult> {
        self.results.get(id)
    }

    pub fn opinion(&self, id: &str) -> Option<Opinion> {
        self.results.get(id).map(|r| r.opinion)
    }

    /// Results in display order.
    pub fn rows(&self) -> impl Iterator<Item = &NodeResult> {
        self.order.iter().filter_map(|id| self.results.get(id))
    }

    pub fn root(&self) -> Option<&str> {
        self.order.first().map(String::as_str).filter(|id| {
            self.results.get(*id).is_some_and(|r| r.kind == NodeKind::Goal)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("document is not valid under the effective settings:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    MissingPattern(#[from] graph::GraphError),
    #[error("node {node}: deduction step has no conditionals")]
    UnresolvedConditionals { node: String },
    #[error("assumption {assumption} consumed at {node} after it was already consumed below")]
    ContextReuse { assumption: String, node: String },
    #[error("node {node}: support cycle")]
    Cycle { node: String },
    #[error("node {node}: {source}")]
    Input { node: String, source: SourceError },
    #[error("node {node}: {source}")]
    Numeric { node: String, source: OpinionError },
}

/// A document prepared for repeated assessment under one set of settings.
#[derive(Debug, Clone)]
pub struct Assessor<'d> {
    doc: &'d Document,
    settings: Settings,
    graph: ArgumentGraph,
    warnings: Vec<Diagnostic>,
    order: Vec<String>,
}

impl<'d> Assessor<'d> {
    pub fn new(doc: &'d Document, overrides: &SettingsOverrides) -> Result<Self, AssessError> {
        let settings = doc.settings.apply(overrides);
        settings.check().map_err(AssessError::Settings)?;
        let mut report = graph::validate_argument(&doc.graph, &settings);
        // Reuse surfaces as a dedicated error when it is actually hit.
        report.errors.retain(|e| e.code != Code::ContextReuse);
        if !report.errors.is_empty() {
            return Err(AssessError::Invalid(report));
        }
        let resolution = graph::resolve_patterns(&doc.graph, &settings)?;
        let mut warnings = report.warnings;
        warnings.extend(resolution.warnings);
        warnings.sort();
        warnings.dedup();
        let order = doc.graph.display_order().into_iter().map(str::to_string).collect();
        Ok(Assessor { doc, settings, graph: resolution.graph, warnings, order })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn document(&self) -> &Document {
        self.doc
    }

    /// Assesses one scenario; `injected` opinions override everything else
    /// for their nodes.
    pub fn run(&self, scenario: Option<&str>, injected: &[(String, Opinion)]) -> Result<Assessment, AssessError> {
        let sc = match scenario {
            Some(name) => Some(self.doc.scenario(name).ok_or_else(|| AssessError::UnknownScenario(name.into()))?),
            None => None,
        };
        let mut pins: HashMap<&str, (Opinion, &str)> = HashMap::new();
        if let Some(sc) = sc {
            for (id, src) in &sc.assignments {
                self.input_node(id)?;
                let o = src
                    .resolve(&self.settings)
                    .map_err(|source| AssessError::Input { node: id.clone(), source })?;
                pins.insert(id, (o, "scenario"));
            }
        }
        for (id, o) in injected {
            self.input_node(id)?;
            pins.insert(id, (*o, "injected"));
        }

        let mut eval = Eval {
            settings: &self.settings,
            nodes: self.graph.nodes.iter().map(|n| (n.id.as_str(), n)).collect(),
            supporters: HashMap::new(),
            contexts: HashMap::new(),
            pins,
            results: BTreeMap::new(),
            active: BTreeSet::new(),
        };
        for e in &self.graph.edges {
            let map = match e.kind {
                EdgeKind::SupportedBy => &mut eval.supporters,
                EdgeKind::InContextOf => &mut eval.contexts,
            };
            map.entry(e.source.as_str()).or_insert_with(Vec::new).push(e);
        }
        for id in &self.order {
            if eval.nodes.get(id.as_str()).is_some_and(|n| is_proposition(n.kind)) {
                eval.node(id)?;
            }
        }
        let order = self.order.iter().filter(|id| eval.results.contains_key(*id)).cloned().collect();
        Ok(Assessment {
            scenario: scenario.map(str::to_string),
            results: eval.results,
            order,
            warnings: self.warnings.clone(),
            settings: self.settings.clone(),
        })
    }

    fn input_node(&self, id: &str) -> Result<&ArgNode, AssessError> {
        self.graph
            .node(id)
            .filter(|n| n.kind.accepts_input())
            .ok_or_else(|| AssessError::UnknownNode(id.to_string()))
    }
}

/// Assesses `doc` under `scenario` with the given setting deltas.
pub fn assess(doc: &Document, scenario: Option<&str>, overrides: &SettingsOverrides) -> Result<Assessment, AssessError> {
    Assessor::new(doc, overrides)?.run(scenario, &[])
}

/// [`assess`] with opinions injected at input-accepting nodes.
pub fn assess_with(
    doc: &Document,
    scenario: Option<&str>,
    overrides: &SettingsOverrides,
    injected: &[(String, Opinion)],
) -> Result<Assessment, AssessError> {
    Assessor::new(doc, overrides)?.run(scenario, injected)
}

fn is_proposition(kind: NodeKind) -> bool {
    !matches!(kind, NodeKind::Context | NodeKind::Justification)
}

struct Eval<'a> {
    settings: &'a Settings,
    nodes: HashMap<&'a str, &'a ArgNode>,
    supporters: HashMap<&'a str, Vec<&'a ArgEdge>>,
    contexts: HashMap<&'a str, Vec<&'a ArgEdge>>,
    pins: HashMap<&'a str, (Opinion, &'a str)>,
    results: BTreeMap<String, NodeResult>,
    active: BTreeSet<String>,
}

/// An opinion under construction with the step that produced it.
struct Partial {
    opinion: Opinion,
    operand: Operand,
    raw: bool,
}

impl<'a> Eval<'a> {
    fn node(&mut self, id: &str) -> Result<(), AssessError> {
        if self.results.contains_key(id) {
            return Ok(());
        }
        if !self.active.insert(id.to_string()) {
            return Err(AssessError::Cycle { node: id.to_string() });
        }
        let node = *self.nodes.get(id).ok_or_else(|| AssessError::UnknownNode(id.to_string()))?;
        let fan: Vec<&ArgEdge> = self.supporters.get(id).cloned().unwrap_or_default();
        for e in &fan {
            self.node(&e.target)?;
        }
        let ctx_edges: Vec<&ArgEdge> = self
            .contexts
            .get(id)
            .map(|es| {
                es.iter()
                    .copied()
                    .filter(|e| self.nodes.get(e.target.as_str()).is_some_and(|n| n.kind == NodeKind::Assumption))
                    .collect()
            })
            .unwrap_or_default();
        for e in &ctx_edges {
            self.node(&e.target)?;
        }

        let mut context_set = BTreeSet::new();
        let mut consumed = BTreeSet::new();
        let (opinion, step, raw) = if let Some(&(o, source)) = self.pins.get(id) {
            (o, ProvenanceStep::leaf(Operator::Input, o, Some(source)), true)
        } else if fan.is_empty() {
            match &node.input {
                Some(src) if node.kind.accepts_input() => {
                    let o = src
                        .resolve(self.settings)
                        .map_err(|source| AssessError::Input { node: id.to_string(), source })?;
                    (o, ProvenanceStep::leaf(Operator::Input, o, Some("node")), true)
                }
                _ => {
                    let o = Opinion::vacuous(self.settings.default_base_rate);
                    (o, ProvenanceStep::leaf(Operator::DefaultVacuous, o, None), true)
                }
            }
        } else {
            for e in &fan {
                let child = &self.results[e.target.as_str()];
                context_set.extend(child.context_set.iter().cloned());
                consumed.extend(child.consumed_contexts.iter().cloned());
            }
            let agg = self.aggregate(node, &fan)?;
            if node.kind == NodeKind::Goal {
                let step = self.deduce(node, &fan, agg)?;
                (step.result, step, false)
            } else {
                match agg.operand {
                    Operand::Step(s) => (agg.opinion, *s, false),
                    Operand::Node(_) => unreachable!("aggregate always wraps its operands"),
                }
            }
        };

        let mut result = NodeResult {
            id: id.to_string(),
            kind: node.kind,
            opinion,
            conditional: None,
            context_set,
            consumed_contexts: consumed,
            provenance: step,
            raw_input: raw,
        };
        if !ctx_edges.is_empty() {
            match self.settings.context_mode {
                ContextMode::Conditional => {
                    result.context_set.extend(ctx_edges.iter().map(|e| e.target.clone()));
                }
                ContextMode::Marginalize => self.marginalize(&mut result, &ctx_edges)?,
            }
        }
        self.active.remove(id);
        self.results.insert(id.to_string(), result);
        Ok(())
    }

    /// Combines the supporters of `node` by its pattern. A single supporter
    /// yields a one-operand step.
    fn aggregate(&self, node: &ArgNode, fan: &[&ArgEdge]) -> Result<Partial, AssessError> {
        let pattern = node.pattern.unwrap_or(graph::Pattern::new(self.settings.implicit_pattern));
        let operator = Operator::for_pattern(pattern.kind);
        let fusion = pattern.fusion_mode(self.settings.dogmatic_gamma);
        let params = || StepParams {
            pattern: node.pattern.map(|p| p.kind),
            gamma: match fusion {
                Some(FusionMode::Cumulative { gamma } | FusionMode::Weighted { gamma }) => Some(gamma),
                _ => None,
            },
            ..Default::default()
        };
        let child = |e: &ArgEdge| &self.results[e.target.as_str()];
        let first = child(fan[0]);
        if fan.len() == 1 && node.kind == NodeKind::Goal {
            return Ok(Partial { opinion: first.opinion, operand: Operand::Node(first.id.clone()), raw: first.raw_input });
        }
        if fan.len() == 1 {
            let step = ProvenanceStep {
                operator,
                operands: vec![Operand::Node(first.id.clone())],
                params: params(),
                result: first.opinion,
            };
            return Ok(Partial { opinion: first.opinion, operand: Operand::Step(Box::new(step)), raw: first.raw_input });
        }
        let mut acc = first.opinion;
        let mut acc_operand = Operand::Node(first.id.clone());
        for e in &fan[1..] {
            let c = child(e);
            let numeric = |source| AssessError::Numeric { node: node.id.clone(), source };
            acc = match fusion {
                Some(mode) => opinion::fuse(&acc, &c.opinion, mode),
                None if pattern.kind == PatternKind::Conjunction => opinion::multiply(&acc, &c.opinion).map_err(numeric)?,
                None => opinion::comultiply(&acc, &c.opinion).map_err(numeric)?,
            };
            let step = ProvenanceStep {
                operator,
                operands: vec![acc_operand, Operand::Node(c.id.clone())],
                params: params(),
                result: acc,
            };
            acc_operand = Operand::Step(Box::new(step));
        }
        Ok(Partial { opinion: acc, operand: acc_operand, raw: false })
    }

    fn reset(&self, antecedent: &Partial) -> (Opinion, Option<f64>) {
        let a = self.settings.default_base_rate;
        if antecedent.raw || self.settings.aggregate_base_rate == AggregateBaseRate::Composed {
            return (antecedent.opinion, None);
        }
        match antecedent.opinion.with_base_rate(a) {
            Ok(o) => (o, Some(a)),
            Err(_) => (antecedent.opinion, None),
        }
    }

    fn deduce(&self, node: &ArgNode, fan: &[&ArgEdge], antecedent: Partial) -> Result<ProvenanceStep, AssessError> {
        let numeric = |source| AssessError::Numeric { node: node.id.clone(), source };
        let pair = fan[0]
            .conditionals
            .and_then(|c| c.to_pair(self.settings.default_base_rate))
            .ok_or_else(|| AssessError::UnresolvedConditionals { node: node.id.clone() })?
            .map_err(numeric)?;
        let (x, reset) = self.reset(&antecedent);
        Ok(self.deduce_step(Operator::Deduce, &x, &pair, vec![antecedent.operand], reset))
    }

    fn deduce_step(
        &self,
        operator: Operator,
        x: &Opinion,
        pair: &ConditionalPair,
        operands: Vec<Operand>,
        reset: Option<f64>,
    ) -> ProvenanceStep {
        let d = opinion::deduce_traced(x, pair, self.settings.default_base_rate);
        ProvenanceStep {
            operator,
            operands,
            params: StepParams {
                a_y: Some(d.base_rate),
                u_apex: Some(d.apex_uncertainty),
                k: Some(d.uncertainty_increase),
                antecedent_base_rate: reset,
                ..Default::default()
            },
            result: d.opinion,
        }
    }

    /// Consumes the assumptions framing `result` by one deduction whose
    /// antecedent is their conjunction.
    fn marginalize(&self, result: &mut NodeResult, edges: &[&ArgEdge]) -> Result<(), AssessError> {
        let numeric = |source| AssessError::Numeric { node: result.id.clone(), source };
        for e in edges {
            if result.consumed_contexts.contains(&e.target) {
                return Err(AssessError::ContextReuse { assumption: e.target.clone(), node: result.id.clone() });
            }
        }
        let first = &self.results[edges[0].target.as_str()];
        let mut antecedent =
            Partial { opinion: first.opinion, operand: Operand::Node(first.id.clone()), raw: first.raw_input };
        for e in &edges[1..] {
            let a = &self.results[e.target.as_str()];
            let o = opinion::multiply(&antecedent.opinion, &a.opinion).map_err(numeric)?;
            let step = ProvenanceStep {
                operator: Operator::Multiply,
                operands: vec![antecedent.operand, Operand::Node(a.id.clone())],
                params: StepParams::default(),
                result: o,
            };
            antecedent = Partial { opinion: o, operand: Operand::Step(Box::new(step)), raw: false };
        }

        let written = edges.iter().find_map(|e| e.conditionals).unwrap_or_default();
        let neg = DirectOpinion::new(0.0, 1.0, 0.0, None).expect("dogmatic disbelief");
        let pair = written
            .to_pair_with(DirectOpinion::from(result.opinion), neg, self.settings.default_base_rate)
            .map_err(numeric)?;
        let (x, reset) = self.reset(&antecedent);
        let own = std::mem::replace(&mut result.provenance, ProvenanceStep::leaf(Operator::Input, result.opinion, None));
        let step = self.deduce_step(
            Operator::Marginalize,
            &x,
            &pair,
            vec![antecedent.operand, Operand::Step(Box::new(own))],
            reset,
        );
        result.conditional = Some(result.opinion);
        result.opinion = step.result;
        result.provenance = step;
        result.raw_input = false;
        result.consumed_contexts.extend(edges.iter().map(|e| e.target.clone()));
        Ok(())
    }
}

/// Renders the provenance of `id` depth first. Nodes already expanded are
/// marked instead of repeated.
pub fn explain(a: &Assessment, id: &str) -> Result<String, AssessError> {
    if !a.results.contains_key(id) {
        return Err(AssessError::UnknownNode(id.to_string()));
    }
    let p = a.settings.display_precision;
    let mut out = String::new();
    let mut seen = BTreeSet::new();
    render_node(a, id, 0, p, &mut seen, &mut out);
    Ok(out)
}

fn render_node(a: &Assessment, id: &str, depth: usize, p: u32, seen: &mut BTreeSet<String>, out: &mut String) {
    let r = &a.results[id];
    let pad = "  ".repeat(depth);
    if !seen.insert(id.to_string()) {
        let _ = writeln!(out, "{pad}{id}: {} (shown above)", format::triple(&r.opinion, p));
        return;
    }
    let _ = write!(out, "{pad}{id}: {}", format::triple(&r.opinion, p));
    if !r.context_set.is_empty() {
        let ctx: Vec<&str> = r.context_set.iter().map(String::as_str).collect();
        let _ = write!(out, " given {}", ctx.join(", "));
    }
    out.push('\n');
    render_step(a, &r.provenance, depth + 1, p, seen, out);
}

fn operand_label(op: &Operand) -> &str {
    match op {
        Operand::Node(id) => id,
        Operand::Step(s) => s.operator.name(),
    }
}

fn render_step(a: &Assessment, s: &ProvenanceStep, depth: usize, p: u32, seen: &mut BTreeSet<String>, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = write!(out, "{pad}{}", s.operator.name());
    if !s.operands.is_empty() {
        let labels: Vec<&str> = s.operands.iter().map(operand_label).collect();
        let _ = write!(out, "({})", labels.join(", "));
    }
    let q = p.max(5);
    let sp = &s.params;
    if let Some(src) = &sp.source {
        let _ = write!(out, " from {src}");
    }
    if let Some(k) = sp.pattern {
        let _ = write!(out, " pattern={}", k.name());
    }
    if let Some(g) = sp.gamma {
        let _ = write!(out, " gamma={}", format::machine(g));
    }
    if let Some(x) = sp.antecedent_base_rate {
        let _ = write!(out, " a_x={}", format::machine(x));
    }
    if let Some(x) = sp.a_y {
        let _ = write!(out, " a_y={}", format::display(x, q));
    }
    if let Some(x) = sp.u_apex {
        let _ = write!(out, " u_apex={}", format::display(x, q));
    }
    if let Some(x) = sp.k {
        let _ = write!(out, " K={}", format::display(x, q));
    }
    let _ = writeln!(out, " -> {}", format::triple(&s.result, p));
    for op in &s.operands {
        match op {
            Operand::Node(id) => render_node(a, id, depth + 1, p, seen, out),
            Operand::Step(inner) => render_step(a, inner, depth + 1, p, seen, out),
        }
    }
}
