//! Typed assurance-argument graph, structural validation and pattern
//! resolution.
//!
//! Edges are stored parent → supporter, the way the argument is drawn;
//! evaluation walks them in reverse.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::FusionMode;
use crate::settings::{ContextMode, Settings};
use crate::source::{EdgeConditionals, OpinionSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Assumption,
    Context,
    Justification,
}

impl NodeKind {
    pub fn accepts_input(self) -> bool {
        matches!(self, NodeKind::Solution | NodeKind::Goal | NodeKind::Assumption)
    }

    pub fn accepts_pattern(self) -> bool {
        matches!(self, NodeKind::Strategy | NodeKind::Goal)
    }

    fn can_support(self) -> bool {
        matches!(self, NodeKind::Goal | NodeKind::Strategy | NodeKind::Solution)
    }

    fn is_contextual(self) -> bool {
        matches!(self, NodeKind::Assumption | NodeKind::Context | NodeKind::Justification)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Goal => "goal",
            NodeKind::Strategy => "strategy",
            NodeKind::Solution => "solution",
            NodeKind::Assumption => "assumption",
            NodeKind::Context => "context",
            NodeKind::Justification => "justification",
        };
        f.write_str(s)
    }
}

/// How a one-to-many support fan-in combines its premises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Conjunction,
    Disjunction,
    FusionCumulative,
    FusionAveraging,
    FusionWeighted,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Conjunction => "conjunction",
            PatternKind::Disjunction => "disjunction",
            PatternKind::FusionCumulative => "fusion-cumulative",
            PatternKind::FusionAveraging => "fusion-averaging",
            PatternKind::FusionWeighted => "fusion-weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPattern", into = "RawPattern")]
pub struct Pattern {
    pub kind: PatternKind,
    /// Dogmatic-limit weight for the fusion modes; the settings default applies
    /// when absent.
    pub gamma: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawPattern {
    Bare(PatternKind),
    Full {
        kind: PatternKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

impl From<RawPattern> for Pattern {
    fn from(raw: RawPattern) -> Self {
        match raw {
            RawPattern::Bare(kind) => Pattern { kind, gamma: None },
            RawPattern::Full { kind, gamma } => Pattern { kind, gamma },
        }
    }
}

impl From<Pattern> for RawPattern {
    fn from(p: Pattern) -> Self {
        match p.gamma {
            None => RawPattern::Bare(p.kind),
            Some(g) => RawPattern::Full { kind: p.kind, gamma: Some(g) },
        }
    }
}

impl Pattern {
    pub fn new(kind: PatternKind) -> Self {
        Pattern { kind, gamma: None }
    }

    /// The fusion rule for fusion patterns, `None` for logical ones.
    pub fn fusion_mode(&self, default_gamma: f64) -> Option<FusionMode> {
        let gamma = self.gamma.unwrap_or(default_gamma);
        match self.kind {
            PatternKind::FusionCumulative => Some(FusionMode::Cumulative { gamma }),
            PatternKind::FusionAveraging => Some(FusionMode::Averaging),
            PatternKind::FusionWeighted => Some(FusionMode::Weighted { gamma }),
            PatternKind::Conjunction | PatternKind::Disjunction => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub statement: String,
    #[serde(rename = "opinion", default, skip_serializing_if = "Option::is_none")]
    pub input: Option<OpinionSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
}

impl ArgNode {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        ArgNode { id: id.into(), kind, statement: String::new(), input: None, pattern: None }
    }

    pub fn statement(mut self, s: impl Into<String>) -> Self {
        self.statement = s.into();
        self
    }

    pub fn input(mut self, s: impl Into<OpinionSource>) -> Self {
        self.input = Some(s.into());
        self
    }

    pub fn pattern(mut self, p: PatternKind) -> Self {
        self.pattern = Some(Pattern::new(p));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "supportedBy")]
    SupportedBy,
    #[serde(rename = "inContextOf")]
    InContextOf,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::SupportedBy => "supportedBy",
            EdgeKind::InContextOf => "inContextOf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgEdge {
    pub source: String,
    pub target: String,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditionals: Option<EdgeConditionals>,
}

impl ArgEdge {
    pub fn supported_by(source: impl Into<String>, target: impl Into<String>) -> Self {
        ArgEdge { source: source.into(), target: target.into(), kind: EdgeKind::SupportedBy, conditionals: None }
    }

    pub fn in_context_of(source: impl Into<String>, target: impl Into<String>) -> Self {
        ArgEdge { source: source.into(), target: target.into(), kind: EdgeKind::InContextOf, conditionals: None }
    }

    pub fn with_conditionals(mut self, c: EdgeConditionals) -> Self {
        self.conditionals = Some(c);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArgumentGraph {
    pub nodes: Vec<ArgNode>,
    pub edges: Vec<ArgEdge>,
}

impl ArgumentGraph {
    pub fn new(nodes: Vec<ArgNode>, edges: Vec<ArgEdge>) -> Self {
        ArgumentGraph { nodes, edges }
    }

    pub fn node(&self, id: &str) -> Option<&ArgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Supporting edges of `id`, in declaration order.
    pub fn supporters<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a ArgEdge> + 'a {
        self.edges.iter().filter(move |e| e.kind == EdgeKind::SupportedBy && e.source == id)
    }

    /// Context edges of `id`, in declaration order.
    pub fn contexts<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a ArgEdge> + 'a {
        self.edges.iter().filter(move |e| e.kind == EdgeKind::InContextOf && e.source == id)
    }

    /// The unique goal without incoming support, if there is exactly one.
    pub fn root(&self) -> Option<&str> {
        let roots = self.root_candidates();
        match roots.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    fn root_candidates(&self) -> Vec<&str> {
        let supported: BTreeSet<&str> =
            self.edges.iter().filter(|e| e.kind == EdgeKind::SupportedBy).map(|e| e.target.as_str()).collect();
        let mut roots: Vec<&str> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Goal && !supported.contains(n.id.as_str()))
            .map(|n| n.id.as_str())
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots
    }

    /// Nodes in display order: breadth-first from the root along support edges
    /// in declaration order, each node's contexts right after it, then
    /// anything unreachable in declaration order.
    pub fn display_order(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        if let Some(root) = self.root() {
            queue.push_back(root);
        }
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            order.push(id);
            for e in self.contexts(id) {
                if self.node(&e.target).is_some() && seen.insert(e.target.as_str()) {
                    order.push(e.target.as_str());
                }
            }
            for e in self.supporters(id) {
                if self.node(&e.target).is_some() {
                    queue.push_back(e.target.as_str());
                }
            }
        }
        for n in &self.nodes {
            if seen.insert(n.id.as_str()) {
                order.push(n.id.as_str());
            }
        }
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Code {
    // errors
    Cycle,
    NoRoot,
    MultipleRoots,
    DanglingEdge,
    DuplicateId,
    InvalidId,
    EdgeKind,
    InputOnKind,
    PatternOnKind,
    PatternArity,
    InvalidGamma,
    MissingPattern,
    EmptyStrategy,
    InvalidInput,
    MissingConditionals,
    IncompleteConditionals,
    MisplacedConditionals,
    ConflictingConditionals,
    InvalidConditionals,
    ContextReuse,
    UnknownScenarioNode,
    // warnings
    DependentSupport,
    ImplicitPattern,
    InputIgnored,
    Unreachable,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Cycle => "CYCLE",
            Code::NoRoot => "NO_ROOT",
            Code::MultipleRoots => "MULTIPLE_ROOTS",
            Code::DanglingEdge => "DANGLING_EDGE",
            Code::DuplicateId => "DUPLICATE_ID",
            Code::InvalidId => "INVALID_ID",
            Code::EdgeKind => "EDGE_KIND",
            Code::InputOnKind => "INPUT_ON_KIND",
            Code::PatternOnKind => "PATTERN_ON_KIND",
            Code::PatternArity => "PATTERN_ARITY",
            Code::InvalidGamma => "INVALID_GAMMA",
            Code::MissingPattern => "MISSING_PATTERN",
            Code::EmptyStrategy => "EMPTY_STRATEGY",
            Code::InvalidInput => "INVALID_INPUT",
            Code::MissingConditionals => "MISSING_CONDITIONALS",
            Code::IncompleteConditionals => "INCOMPLETE_CONDITIONALS",
            Code::MisplacedConditionals => "MISPLACED_CONDITIONALS",
            Code::ConflictingConditionals => "CONFLICTING_CONDITIONALS",
            Code::InvalidConditionals => "INVALID_CONDITIONALS",
            Code::ContextReuse => "CONTEXT_REUSE",
            Code::UnknownScenarioNode => "UNKNOWN_SCENARIO_NODE",
            Code::DependentSupport => "DEPENDENT_SUPPORT",
            Code::ImplicitPattern => "IMPLICIT_PATTERN",
            Code::InputIgnored => "INPUT_IGNORED",
            Code::Unreachable => "UNREACHABLE",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Locus {
    Graph,
    Node { id: String },
    Edge { source: String, target: String, kind: EdgeKind },
    Scenario { name: String, node: String },
}

impl Locus {
    pub fn node(id: &str) -> Self {
        Locus::Node { id: id.to_string() }
    }

    pub fn edge(e: &ArgEdge) -> Self {
        Locus::Edge { source: e.source.clone(), target: e.target.clone(), kind: e.kind }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Graph => f.write_str("graph"),
            Locus::Node { id } => write!(f, "node {id}"),
            Locus::Edge { source, target, kind } => write!(f, "edge {source} -{kind}-> {target}"),
            Locus::Scenario { name, node } => write!(f, "scenario {name}, node {node}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub code: Code,
    pub locus: Locus,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.locus, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: Code) -> bool {
        self.errors.iter().any(|d| d.code == code)
    }

    pub fn has_warning(&self, code: Code) -> bool {
        self.warnings.iter().any(|d| d.code == code)
    }

    pub(crate) fn error(&mut self, code: Code, locus: Locus, message: impl Into<String>) {
        self.errors.push(Diagnostic { code, locus, message: message.into() });
    }

    pub(crate) fn warn(&mut self, code: Code, locus: Locus, message: impl Into<String>) {
        self.warnings.push(Diagnostic { code, locus, message: message.into() });
    }

    /// Sorts and deduplicates so the report does not depend on declaration order.
    pub(crate) fn finish(&mut self) {
        self.errors.sort();
        self.errors.dedup();
        self.warnings.sort();
        self.warnings.dedup();
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.errors {
            writeln!(f, "error: {d}")?;
        }
        for d in &self.warnings {
            writeln!(f, "warning: {d}")?;
        }
        Ok(())
    }
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

/// Checks the structural rules an argument must satisfy before assessment.
pub fn validate_argument(g: &ArgumentGraph, settings: &Settings) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();

    for n in &g.nodes {
        if !valid_id(&n.id) {
            report.error(Code::InvalidId, Locus::node(&n.id), format!("id {:?} must match [A-Za-z0-9_.-]+", n.id));
        }
        if kinds.insert(n.id.as_str(), n.kind).is_some() {
            report.error(Code::DuplicateId, Locus::node(&n.id), format!("id {} is declared more than once", n.id));
        }
        if let Some(input) = &n.input {
            if !n.kind.accepts_input() {
                report.error(Code::InputOnKind, Locus::node(&n.id), format!("a {} cannot carry an input opinion", n.kind));
            } else if let Err(e) = input.resolve(settings) {
                report.error(Code::InvalidInput, Locus::node(&n.id), e.to_string());
            }
        }
        if let Some(p) = &n.pattern {
            if !n.kind.accepts_pattern() {
                report.error(Code::PatternOnKind, Locus::node(&n.id), format!("a {} cannot carry a pattern", n.kind));
            }
            if let Some(gamma) = p.gamma {
                if !(0.0..=1.0).contains(&gamma) {
                    report.error(Code::InvalidGamma, Locus::node(&n.id), format!("gamma {gamma} outside [0, 1]"));
                }
            }
        }
    }

    // Edges whose endpoints exist.
    let mut live: Vec<&ArgEdge> = Vec::new();
    for e in &g.edges {
        let (Some(&sk), Some(&tk)) = (kinds.get(e.source.as_str()), kinds.get(e.target.as_str())) else {
            let missing = if kinds.contains_key(e.source.as_str()) { &e.target } else { &e.source };
            report.error(Code::DanglingEdge, Locus::edge(e), format!("unknown node {missing}"));
            continue;
        };
        let ok = match e.kind {
            EdgeKind::SupportedBy => matches!(sk, NodeKind::Goal | NodeKind::Strategy) && tk.can_support(),
            EdgeKind::InContextOf => matches!(sk, NodeKind::Goal | NodeKind::Strategy) && tk.is_contextual(),
        };
        if !ok {
            report.error(Code::EdgeKind, Locus::edge(e), format!("{} cannot link a {sk} to a {tk}", e.kind));
            continue;
        }
        live.push(e);
    }

    let roots = {
        let supported: BTreeSet<&str> =
            live.iter().filter(|e| e.kind == EdgeKind::SupportedBy).map(|e| e.target.as_str()).collect();
        let mut r: Vec<&str> = kinds
            .iter()
            .filter(|(id, k)| **k == NodeKind::Goal && !supported.contains(*id))
            .map(|(id, _)| *id)
            .collect();
        r.sort_unstable();
        r
    };
    match roots.len() {
        0 => report.error(Code::NoRoot, Locus::Graph, "no goal is free of incoming support"),
        1 => {}
        _ => report.error(Code::MultipleRoots, Locus::Graph, format!("several root goals: {}", roots.join(", "))),
    }

    let mut children: BTreeMap<&str, Vec<&ArgEdge>> = BTreeMap::new();
    let mut context_edges: BTreeMap<&str, Vec<&ArgEdge>> = BTreeMap::new();
    for e in &live {
        match e.kind {
            EdgeKind::SupportedBy => children.entry(e.source.as_str()).or_default().push(e),
            EdgeKind::InContextOf => context_edges.entry(e.source.as_str()).or_default().push(e),
        }
    }

    let cyclic = find_cycles(&kinds, &children);
    for scc in &cyclic {
        report.error(Code::Cycle, Locus::node(scc[0]), format!("support cycle through {}", scc.join(", ")));
    }

    check_sites(g, settings, &children, &context_edges, &mut report);

    if cyclic.is_empty() {
        if let [root] = roots.as_slice() {
            check_reachability(root, &kinds, &children, &context_edges, &mut report);
            check_dependence(root, &children, &mut report);
            if settings.context_mode == ContextMode::Marginalize {
                check_context_reuse(&children, &context_edges, &kinds, &mut report);
            }
        }
    }

    report.finish();
    report
}

fn find_cycles<'a>(kinds: &HashMap<&'a str, NodeKind>, children: &BTreeMap<&'a str, Vec<&'a ArgEdge>>) -> Vec<Vec<&'a str>> {
    // Tarjan's strongly connected components, iterated in id order.
    struct State<'a> {
        index: HashMap<&'a str, usize>,
        low: HashMap<&'a str, usize>,
        stack: Vec<&'a str>,
        on_stack: BTreeSet<&'a str>,
        next: usize,
        out: Vec<Vec<&'a str>>,
    }
    fn visit<'a>(v: &'a str, children: &BTreeMap<&'a str, Vec<&'a ArgEdge>>, st: &mut State<'a>) {
        st.index.insert(v, st.next);
        st.low.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for e in children.get(v).into_iter().flatten() {
            let w = e.target.as_str();
            if !st.index.contains_key(w) {
                visit(w, children, st);
                let lw = st.low[w];
                let lv = st.low.get_mut(v).expect("visited");
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(w) {
                let iw = st.index[w];
                let lv = st.low.get_mut(v).expect("visited");
                *lv = (*lv).min(iw);
            }
        }
        if st.low[v] == st.index[v] {
            let mut scc = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(w);
                scc.push(w);
                if w == v {
                    break;
                }
            }
            let self_loop = children.get(v).is_some_and(|es| es.iter().any(|e| e.target == v));
            if scc.len() > 1 || self_loop {
                scc.sort_unstable();
                st.out.push(scc);
            }
        }
    }
    let mut ids: Vec<&str> = kinds.keys().copied().collect();
    ids.sort_unstable();
    let mut st = State {
        index: HashMap::new(),
        low: HashMap::new(),
        stack: Vec::new(),
        on_stack: BTreeSet::new(),
        next: 0,
        out: Vec::new(),
    };
    for id in ids {
        if !st.index.contains_key(id) {
            visit(id, children, &mut st);
        }
    }
    st.out.sort();
    st.out
}

fn check_sites(
    g: &ArgumentGraph,
    settings: &Settings,
    children: &BTreeMap<&str, Vec<&ArgEdge>>,
    context_edges: &BTreeMap<&str, Vec<&ArgEdge>>,
    report: &mut ValidationReport,
) {
    let mut seen = BTreeSet::new();
    for n in &g.nodes {
        if !seen.insert(n.id.as_str()) {
            continue;
        }
        let loc = || Locus::node(&n.id);
        let fan = children.get(n.id.as_str()).map(Vec::as_slice).unwrap_or_default();
        if n.kind == NodeKind::Strategy && fan.is_empty() {
            report.error(Code::EmptyStrategy, loc(), "strategy has no supporting elements");
        }
        if n.pattern.is_some() && fan.len() < 2 {
            report.error(Code::PatternArity, loc(), format!("pattern needs at least 2 supporters, found {}", fan.len()));
        }
        if n.pattern.is_none() && fan.len() >= 2 {
            if settings.allow_implicit_pattern {
                report.warn(
                    Code::ImplicitPattern,
                    loc(),
                    format!("{} supporters without a pattern; {} applied", fan.len(), settings.implicit_pattern.name()),
                );
            } else {
                report.error(Code::MissingPattern, loc(), "fan-in needs an explicit pattern");
            }
        }
        if n.kind == NodeKind::Goal && n.input.is_some() && !fan.is_empty() {
            report.warn(Code::InputIgnored, loc(), "input opinion on a supported goal is ignored");
        }

        match n.kind {
            NodeKind::Strategy => {
                for e in fan.iter().filter(|e| e.conditionals.is_some()) {
                    report.error(
                        Code::MisplacedConditionals,
                        Locus::edge(e),
                        "strategy edges do not deduce; put the conditionals on the goal-to-strategy edge",
                    );
                }
            }
            NodeKind::Goal if !fan.is_empty() => {
                let carrying: Vec<&&ArgEdge> = fan.iter().filter(|e| e.conditionals.is_some()).collect();
                for e in &carrying {
                    let c = e.conditionals.as_ref().expect("filtered");
                    match c.to_pair(settings.default_base_rate) {
                        None => report.error(Code::IncompleteConditionals, Locus::edge(e), "support conditionals need both pos and neg"),
                        Some(Err(err)) => report.error(Code::InvalidConditionals, Locus::edge(e), err.to_string()),
                        Some(Ok(_)) => {}
                    }
                }
                if carrying.is_empty() && settings.default_conditionals.is_none() {
                    let locus = if fan.len() == 1 { Locus::edge(fan[0]) } else { loc() };
                    report.error(Code::MissingConditionals, locus, "deduction step has no conditionals and no default is configured");
                }
                if carrying.windows(2).any(|w| w[0].conditionals != w[1].conditionals) {
                    report.error(Code::ConflictingConditionals, loc(), "fan-in edges carry different conditionals");
                }
            }
            _ => {}
        }

        let ctx = context_edges.get(n.id.as_str()).map(Vec::as_slice).unwrap_or_default();
        let mut assumption_pairs = Vec::new();
        for e in ctx {
            let Some(c) = &e.conditionals else { continue };
            let target_is_assumption = g.node(&e.target).is_some_and(|t| t.kind == NodeKind::Assumption);
            if !target_is_assumption {
                report.error(Code::MisplacedConditionals, Locus::edge(e), "only assumptions are consumed by deduction");
                continue;
            }
            let fallback = crate::source::DirectOpinion { b: 0.0, d: 1.0, u: 0.0, a: None };
            if let Err(err) = c.to_pair_with(fallback, fallback, settings.default_base_rate) {
                report.error(Code::InvalidConditionals, Locus::edge(e), err.to_string());
            }
            assumption_pairs.push(c);
        }
        if assumption_pairs.windows(2).any(|w| w[0] != w[1]) {
            report.error(Code::ConflictingConditionals, loc(), "context edges carry different conditionals");
        }
    }
}

fn check_reachability(
    root: &str,
    kinds: &HashMap<&str, NodeKind>,
    children: &BTreeMap<&str, Vec<&ArgEdge>>,
    context_edges: &BTreeMap<&str, Vec<&ArgEdge>>,
    report: &mut ValidationReport,
) {
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        for e in children.get(v).into_iter().flatten().chain(context_edges.get(v).into_iter().flatten()) {
            stack.push(e.target.as_str());
        }
    }
    for id in kinds.keys() {
        if !seen.contains(id) {
            report.warn(Code::Unreachable, Locus::node(id), "not reachable from the root goal");
        }
    }
}

/// Post-order of the support DAG below `root` (children before parents).
fn post_order<'a>(root: &'a str, children: &BTreeMap<&'a str, Vec<&'a ArgEdge>>) -> Vec<&'a str> {
    fn go<'a>(v: &'a str, children: &BTreeMap<&'a str, Vec<&'a ArgEdge>>, seen: &mut BTreeSet<&'a str>, out: &mut Vec<&'a str>) {
        if !seen.insert(v) {
            return;
        }
        for e in children.get(v).into_iter().flatten() {
            go(e.target.as_str(), children, seen, out);
        }
        out.push(v);
    }
    let mut out = Vec::new();
    go(root, children, &mut BTreeSet::new(), &mut out);
    out
}

fn check_dependence(root: &str, children: &BTreeMap<&str, Vec<&ArgEdge>>, report: &mut ValidationReport) {
    // Number of distinct root paths per node, saturated at 2.
    let order = post_order(root, children);
    let mut paths: BTreeMap<&str, u8> = BTreeMap::new();
    let mut parents: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    paths.insert(root, 1);
    for v in order.iter().rev() {
        let pv = paths.get(v).copied().unwrap_or(0);
        for e in children.get(v).into_iter().flatten() {
            let t = e.target.as_str();
            let entry = paths.entry(t).or_insert(0);
            *entry = (*entry + pv).min(2);
            parents.entry(t).or_default().insert(v);
            *incoming.entry(t).or_insert(0) += 1;
        }
    }
    for (id, count) in &paths {
        if *count >= 2 && incoming.get(id).copied().unwrap_or(0) >= 2 {
            let ps: Vec<&str> = parents.get(id).into_iter().flatten().copied().collect();
            report.warn(
                Code::DependentSupport,
                Locus::node(id),
                format!("supports several elements ({}); independence of evidence is not guaranteed", ps.join(", ")),
            );
        }
    }
}

fn check_context_reuse(
    children: &BTreeMap<&str, Vec<&ArgEdge>>,
    context_edges: &BTreeMap<&str, Vec<&ArgEdge>>,
    kinds: &HashMap<&str, NodeKind>,
    report: &mut ValidationReport,
) {
    let mut framers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (src, es) in context_edges {
        for e in es {
            if kinds.get(e.target.as_str()) == Some(&NodeKind::Assumption) {
                framers.entry(e.target.as_str()).or_default().push(src);
            }
        }
    }
    for (assumption, fs) in framers {
        for upper in &fs {
            let below = post_order(upper, children);
            if let Some(lower) = fs.iter().find(|f| *f != upper && below.contains(f)) {
                report.error(
                    Code::ContextReuse,
                    Locus::node(assumption),
                    format!("consumed at {lower} and again upstream at {upper}"),
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("node {node}: fan-in of {arity} supporters has no pattern and implicit patterns are disabled")]
    MissingPattern { node: String, arity: usize },
}

/// A graph whose aggregation and deduction sites are fully annotated.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub graph: ArgumentGraph,
    pub warnings: Vec<Diagnostic>,
}

/// Assigns a pattern to every fan-in and places exactly one conditional pair
/// on each deduction site (the first support edge of a goal).
pub fn resolve_patterns(g: &ArgumentGraph, settings: &Settings) -> Result<Resolution, GraphError> {
    let mut out = g.clone();
    let mut warnings = Vec::new();
    for i in 0..out.nodes.len() {
        let id = out.nodes[i].id.clone();
        let fan: Vec<usize> = out
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EdgeKind::SupportedBy && e.source == id)
            .map(|(j, _)| j)
            .collect();
        if fan.len() >= 2 && out.nodes[i].pattern.is_none() {
            if !settings.allow_implicit_pattern {
                return Err(GraphError::MissingPattern { node: id, arity: fan.len() });
            }
            out.nodes[i].pattern = Some(Pattern::new(settings.implicit_pattern));
            warnings.push(Diagnostic {
                code: Code::ImplicitPattern,
                locus: Locus::node(&id),
                message: format!("{} applied to {} supporters", settings.implicit_pattern.name(), fan.len()),
            });
        }
        if out.nodes[i].kind != NodeKind::Goal || fan.is_empty() {
            continue;
        }
        let carried = fan.iter().find_map(|&j| out.edges[j].conditionals).or(settings.default_conditionals);
        for (k, &j) in fan.iter().enumerate() {
            out.edges[j].conditionals = if k == 0 { carried } else { None };
        }
    }
    Ok(Resolution { graph: out, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::DirectOpinion;

    fn pair() -> EdgeConditionals {
        EdgeConditionals::pair(
            DirectOpinion::new(0.95, 0.0, 0.05, None).unwrap(),
            DirectOpinion::new(0.0, 1.0, 0.0, None).unwrap(),
        )
    }

    fn sup(s: &str, t: &str) -> ArgEdge {
        ArgEdge::supported_by(s, t)
    }

    fn hazard_argument() -> ArgumentGraph {
        use NodeKind::*;
        let nodes = vec![
            ArgNode::new("G1", Goal),
            ArgNode::new("A1", Assumption),
            ArgNode::new("S1", Strategy).pattern(PatternKind::Conjunction),
            ArgNode::new("G2", Goal),
            ArgNode::new("G3", Goal),
            ArgNode::new("S2", Strategy).pattern(PatternKind::FusionCumulative),
            ArgNode::new("S3", Strategy).pattern(PatternKind::Disjunction),
            ArgNode::new("G4", Goal),
            ArgNode::new("G5", Goal),
            ArgNode::new("G6", Goal),
            ArgNode::new("G7", Goal),
            ArgNode::new("Sn1", Solution),
            ArgNode::new("Sn2", Solution),
            ArgNode::new("Sn3", Solution),
        ];
        let edges = vec![
            sup("G1", "S1").with_conditionals(pair()),
            ArgEdge::in_context_of("G1", "A1"),
            sup("S1", "G2"),
            sup("S1", "G3"),
            sup("G2", "S2").with_conditionals(pair()),
            sup("G3", "S3").with_conditionals(pair()),
            sup("S2", "G4"),
            sup("S2", "G5"),
            sup("S3", "G6"),
            sup("S3", "G7"),
            sup("G4", "Sn1").with_conditionals(pair()),
            sup("G6", "Sn2").with_conditionals(pair()),
            sup("G7", "Sn3").with_conditionals(pair()),
        ];
        ArgumentGraph::new(nodes, edges)
    }

    fn codes(r: &ValidationReport) -> Vec<Code> {
        r.errors.iter().map(|d| d.code).collect()
    }

    #[test]
    fn reference_argument_is_clean() {
        let r = validate_argument(&hazard_argument(), &Settings::default());
        assert!(r.errors.is_empty(), "{r}");
        assert!(r.warnings.is_empty(), "{r}");
        assert_eq!(hazard_argument().root(), Some("G1"));
    }

    #[test]
    fn back_edge_is_a_cycle() {
        let mut g = hazard_argument();
        g.edges.push(sup("G2", "G1").with_conditionals(pair()));
        let r = validate_argument(&g, &Settings::default());
        assert!(r.has_error(Code::Cycle), "{r}");
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut g = hazard_argument();
        g.edges.push(sup("S3", "S3"));
        assert!(validate_argument(&g, &Settings::default()).has_error(Code::Cycle));
    }

    #[test]
    fn shared_evidence_warns() {
        let mut g = hazard_argument();
        g.edges.retain(|e| e.target != "Sn2");
        g.nodes.retain(|n| n.id != "Sn2");
        g.edges.push(sup("G6", "Sn1").with_conditionals(pair()));
        let r = validate_argument(&g, &Settings::default());
        assert!(r.is_clean(), "{r}");
        let dep: Vec<_> = r.warnings.iter().filter(|d| d.code == Code::DependentSupport).collect();
        assert_eq!(dep.len(), 1, "{r}");
        assert_eq!(dep[0].locus, Locus::node("Sn1"));
    }

    #[test]
    fn structural_errors() {
        let mut g = hazard_argument();
        g.nodes.push(ArgNode::new("G4", NodeKind::Goal));
        g.edges.push(sup("G4", "Nope"));
        g.nodes.push(ArgNode::new("C1", NodeKind::Context).input(crate::opinion::Opinion::vacuous(0.5)));
        g.nodes.push(ArgNode::new("Sn9", NodeKind::Solution).pattern(PatternKind::Conjunction));
        g.nodes.push(ArgNode::new("bad id", NodeKind::Solution));
        g.nodes.push(ArgNode::new("S9", NodeKind::Strategy));
        g.edges.push(sup("G5", "S9"));
        let r = validate_argument(&g, &Settings::default());
        let c = codes(&r);
        for code in [
            Code::DuplicateId,
            Code::DanglingEdge,
            Code::InputOnKind,
            Code::PatternOnKind,
            Code::PatternArity,
            Code::InvalidId,
            Code::EmptyStrategy,
            Code::MissingConditionals,
        ] {
            assert!(c.contains(&code), "missing {code}: {r}");
        }
    }

    #[test]
    fn missing_conditionals_unless_defaulted() {
        let mut g = hazard_argument();
        g.edges[10].conditionals = None;
        let r = validate_argument(&g, &Settings::default());
        assert!(r.has_error(Code::MissingConditionals));
        let s = Settings { default_conditionals: Some(pair()), ..Settings::default() };
        assert!(validate_argument(&g, &s).is_clean());
    }

    #[test]
    fn roots_and_edge_kinds() {
        let mut g = hazard_argument();
        g.nodes.push(ArgNode::new("G9", NodeKind::Goal));
        assert!(validate_argument(&g, &Settings::default()).has_error(Code::MultipleRoots));

        let mut g = hazard_argument();
        g.edges.push(ArgEdge::in_context_of("G2", "G3"));
        g.edges.push(sup("Sn1", "G5"));
        let r = validate_argument(&g, &Settings::default());
        assert_eq!(r.errors.iter().filter(|d| d.code == Code::EdgeKind).count(), 2, "{r}");
    }

    #[test]
    fn misplaced_and_conflicting_conditionals() {
        let mut g = hazard_argument();
        g.edges[2].conditionals = Some(pair());
        let r = validate_argument(&g, &Settings::default());
        assert!(r.has_error(Code::MisplacedConditionals));

        let mut g = hazard_argument();
        g.nodes.push(ArgNode::new("Sn4", NodeKind::Solution));
        let mut other = pair();
        other.base_rate = Some(0.2);
        g.edges.push(sup("G5", "Sn4").with_conditionals(pair()));
        g.edges.push(sup("G5", "Sn1").with_conditionals(other));
        let r = validate_argument(&g, &Settings::default());
        assert!(r.has_error(Code::ConflictingConditionals), "{r}");
        assert!(r.has_warning(Code::ImplicitPattern), "{r}");

        let mut g = hazard_argument();
        g.edges[0].conditionals = Some(EdgeConditionals { neg: None, ..pair() });
        assert!(validate_argument(&g, &Settings::default()).has_error(Code::IncompleteConditionals));
    }

    #[test]
    fn context_reuse_only_in_marginalize_mode() {
        let mut g = hazard_argument();
        g.edges.push(ArgEdge::in_context_of("G3", "A1"));
        let r = validate_argument(&g, &Settings::default());
        assert!(r.has_error(Code::ContextReuse), "{r}");
        let s = Settings { context_mode: ContextMode::Conditional, ..Settings::default() };
        assert!(validate_argument(&g, &s).is_clean());
    }

    #[test]
    fn disabled_implicit_patterns() {
        let mut g = hazard_argument();
        g.nodes[2].pattern = None;
        let s = Settings { allow_implicit_pattern: false, ..Settings::default() };
        assert!(validate_argument(&g, &s).has_error(Code::MissingPattern));
        assert!(matches!(resolve_patterns(&g, &s), Err(GraphError::MissingPattern { .. })));
    }

    #[test]
    fn validation_ignores_declaration_order() {
        let mut g = hazard_argument();
        g.edges.push(sup("G2", "G1").with_conditionals(pair()));
        g.nodes.push(ArgNode::new("G4", NodeKind::Goal));
        let a = validate_argument(&g, &Settings::default());
        g.nodes.reverse();
        g.edges.reverse();
        let b = validate_argument(&g, &Settings::default());
        assert_eq!(a, b);
    }

    #[test]
    fn resolution_assigns_patterns_and_pairs() {
        let mut g = hazard_argument();
        g.nodes[2].pattern = None;
        g.edges[10].conditionals = None;
        let s = Settings { default_conditionals: Some(pair()), ..Settings::default() };
        let r = resolve_patterns(&g, &s).unwrap();
        assert_eq!(r.graph.node("S1").unwrap().pattern, Some(Pattern::new(PatternKind::Conjunction)));
        assert_eq!(r.graph.edges[10].conditionals, Some(pair()));
        assert_eq!(r.warnings.len(), 1);
        let again = resolve_patterns(&r.graph, &s).unwrap();
        assert_eq!(again.graph, r.graph);
        assert!(again.warnings.is_empty());
    }

    #[test]
    fn display_order_is_breadth_first() {
        let g = hazard_argument();
        assert_eq!(
            g.display_order(),
            ["G1", "A1", "S1", "G2", "G3", "S2", "S3", "G4", "G5", "G6", "G7", "Sn1", "Sn2", "Sn3"]
        );
    }
}
