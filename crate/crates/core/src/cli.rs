//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::{self, AnalysisError, BetaExport, SweepMode, SweepSpec};
use crate::document::{load_document, validate_document, Document, DocumentError};
use crate::engine::{self, AssessError, Assessment, NodeResult};
use crate::exec::Execution;
use crate::format;
use crate::graph::ValidationReport;
use crate::opinion::Opinion;
use crate::settings::{AggregateBaseRate, ContextMode, SettingsOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_ASSESS: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "slargue", version, about = "Subjective Logic confidence propagation for assurance arguments")]
struct Cli {
    /// Decimal places for displayed opinions.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(0..=12))]
    precision: Option<u32>,
    /// Suppress warnings on the error stream.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a document and report structural diagnostics.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Propagate opinions through the argument.
    Assess {
        file: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[command(flatten)]
        modes: Modes,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
        /// Only print these nodes.
        #[arg(long = "node", value_name = "ID")]
        nodes: Vec<String>,
        /// Print the provenance tree of a node.
        #[arg(long, value_name = "ID")]
        explain: Option<String>,
    },
    /// Compare all scenarios of a document side by side.
    Scenarios {
        file: PathBuf,
        #[command(flatten)]
        modes: Modes,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Vary one input opinion and record the effect.
    Sweep(SweepArgs),
    /// Beta density of a node's opinion.
    Beta {
        file: PathBuf,
        #[arg(long, value_name = "ID")]
        node: String,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long)]
        scenario: Option<String>,
        #[command(flatten)]
        modes: Modes,
        #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
        format: DataFormat,
    },
    /// Opinion-triangle coordinates.
    Triangle {
        file: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long = "node", value_name = "ID")]
        nodes: Vec<String>,
        #[command(flatten)]
        modes: Modes,
        #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
        format: DataFormat,
    },
}

#[derive(Args, Debug)]
struct Modes {
    #[arg(long, value_enum)]
    context_mode: Option<ContextMode>,
    #[arg(long, value_enum)]
    aggregate_base_rate: Option<BaseRatePolicy>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    file: PathBuf,
    /// Node whose opinion is varied.
    #[arg(long, value_name = "ID")]
    node: String,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 11)]
    steps: usize,
    /// Uncertainty held fixed in belief-tradeoff mode.
    #[arg(long, default_value_t = 0.0)]
    fix_u: f64,
    /// Share of committed mass given to belief in uncertainty mode.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Positive evidence at t = 1 in evidence mode.
    #[arg(long, default_value_t = 10.0)]
    r_max: f64,
    /// Negative evidence in evidence mode.
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    /// Nodes to record; defaults to the root.
    #[arg(long = "observe", value_name = "ID")]
    observe: Vec<String>,
    #[arg(long)]
    scenario: Option<String>,
    #[command(flatten)]
    modes: Modes,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DataFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    BeliefTradeoff,
    Uncertainty,
    Evidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaseRatePolicy {
    DefaultReset,
    Composed,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
    /// The message is a rendered report that already labels its lines.
    report: bool,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into(), report: false }
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::ValidationFailed(report) => {
                Failure { code: EXIT_INVALID, message: report.to_string(), report: true }
            }
            other => Failure::new(EXIT_IO, other.to_string()),
        }
    }
}

impl From<AssessError> for Failure {
    fn from(e: AssessError) -> Self {
        let code = match &e {
            AssessError::UnknownScenario(_) | AssessError::UnknownNode(_) | AssessError::Settings(_) => EXIT_USAGE,
            AssessError::Invalid(report) => {
                return Failure { code: EXIT_INVALID, message: report.to_string(), report: true };
            }
            _ => EXIT_ASSESS,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Assess(inner) => inner.into(),
            AnalysisError::Numeric { .. } => Failure::new(EXIT_ASSESS, e.to_string()),
            AnalysisError::NoScenarios | AnalysisError::UnknownNode(_) | AnalysisError::InvalidSpec(_) => {
                Failure::new(EXIT_USAGE, e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, format!("write failed: {e}"))
    }
}

/// Runs the command line in `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) if f.report => {
            let _ = write!(err, "{}", f.message);
            f.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn overrides(cli: &Cli, modes: &Modes) -> SettingsOverrides {
    SettingsOverrides {
        context_mode: modes.context_mode,
        aggregate_base_rate: modes.aggregate_base_rate.map(|p| match p {
            BaseRatePolicy::DefaultReset => AggregateBaseRate::DefaultReset,
            BaseRatePolicy::Composed => AggregateBaseRate::Composed,
        }),
        display_precision: cli.precision,
        prior_weight: None,
    }
}

fn load(path: &std::path::Path) -> Result<Document, Failure> {
    Ok(load_document(path)?)
}

fn warn(cli: &Cli, a: &Assessment, err: &mut dyn Write) {
    if cli.quiet {
        return;
    }
    for w in &a.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Validate { file, format } => validate(cli, file, *format, out, err),
        Command::Assess { file, scenario, modes, format, nodes, explain } => {
            let doc = load(file)?;
            let a = engine::assess(&doc, scenario.as_deref(), &overrides(cli, modes))?;
            warn(cli, &a, err);
            for id in nodes {
                if a.get(id).is_none() {
                    return Err(Failure::new(EXIT_USAGE, format!("unknown node {id:?}")));
                }
            }
            let tree = explain.as_deref().map(|id| engine::explain(&a, id)).transpose()?;
            match format {
                OutputFormat::Table => write_assessment_table(&a, nodes, out)?,
                OutputFormat::Csv => write_assessment_csv(&a, nodes, out)?,
                OutputFormat::Json => {
                    let mut v = assessment_json(&a, nodes);
                    if let (Some(id), Some(text)) = (explain, &tree) {
                        v["explain"] = json!({
                            "node": id,
                            "text": text,
                            "provenance": a.results[id].provenance,
                        });
                    }
                    write_json(out, &v)?;
                }
            }
            if let (Some(text), false) = (&tree, *format == OutputFormat::Json) {
                writeln!(out)?;
                write!(out, "{text}")?;
            }
            Ok(EXIT_OK)
        }
        Command::Scenarios { file, modes, format } => {
            let doc = load(file)?;
            let o = overrides(cli, modes);
            let table = analysis::compare_scenarios(&doc, &o, Execution::Parallel)?;
            let p = doc.settings.apply(&o).display_precision;
            match format {
                OutputFormat::Table => write_scenario_table(&table, p, out)?,
                OutputFormat::Csv => {
                    writeln!(out, "label,node,scenario,b,d,u,a,projection")?;
                    for r in &table.rows {
                        for (s, o) in table.scenarios.iter().zip(&r.cells) {
                            writeln!(
                                out,
                                "{},{},{},{},{},{},{},{}",
                                csv_field(&r.label),
                                r.node,
                                s,
                                format::machine(o.b()),
                                format::machine(o.d()),
                                format::machine(o.u()),
                                format::machine(o.a()),
                                format::machine(o.project())
                            )?;
                        }
                    }
                }
                OutputFormat::Json => {
                    let rows: Vec<Value> = table
                        .rows
                        .iter()
                        .map(|r| {
                            let cells: serde_json::Map<String, Value> = table
                                .scenarios
                                .iter()
                                .zip(&r.cells)
                                .map(|(s, o)| (s.clone(), opinion_json(o, p)))
                                .collect();
                            json!({"label": r.label, "node": r.node, "given": r.given, "cells": cells})
                        })
                        .collect();
                    write_json(out, &json!({"scenarios": table.scenarios, "rows": rows}))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let doc = load(&args.file)?;
            let mode = match args.mode {
                Mode::BeliefTradeoff => SweepMode::BeliefTradeoff { fixed_u: args.fix_u },
                Mode::Uncertainty => SweepMode::Uncertainty { ratio: args.ratio },
                Mode::Evidence => SweepMode::Evidence { r_max: args.r_max, s: args.s },
            };
            let spec = SweepSpec {
                target: args.node.clone(),
                mode,
                steps: args.steps,
                observed: args.observe.clone(),
                scenario: args.scenario.clone(),
            };
            let rows = analysis::sweep(&doc, &spec, &overrides(cli, &args.modes), Execution::Parallel)?;
            match args.format {
                DataFormat::Csv => write!(out, "{}", analysis::sweep_csv(&rows))?,
                DataFormat::Json => write_json(out, &json!({"spec": spec, "rows": rows}))?,
            }
            Ok(EXIT_OK)
        }
        Command::Beta { file, node, samples, scenario, modes, format } => {
            let doc = load(file)?;
            let a = engine::assess(&doc, scenario.as_deref(), &overrides(cli, modes))?;
            warn(cli, &a, err);
            let export = analysis::export_beta_curve(&a, node, *samples)?;
            match format {
                DataFormat::Csv => write!(out, "{}", analysis::beta_csv(&export))?,
                DataFormat::Json => {
                    let mut v = serde_json::to_value(&export).expect("plain data");
                    v["node"] = json!(node);
                    if let BetaExport::Curve { samples, .. } = &export {
                        v["integral"] = json!(analysis::integrate(samples));
                    }
                    write_json(out, &v)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Triangle { file, scenario, nodes, modes, format } => {
            let doc = load(file)?;
            let a = engine::assess(&doc, scenario.as_deref(), &overrides(cli, modes))?;
            warn(cli, &a, err);
            let rows = analysis::export_triangle(&a, nodes)?;
            match format {
                DataFormat::Csv => write!(out, "{}", analysis::triangle_csv(&rows))?,
                DataFormat::Json => write_json(out, &json!({"scenario": a.scenario, "rows": rows}))?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn validate(
    cli: &Cli,
    file: &std::path::Path,
    format: ReportFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", file.display())))?;
    let doc = crate::document::parse_unchecked(&text)?;
    let report: ValidationReport = validate_document(&doc);
    let code = if report.is_clean() { EXIT_OK } else { EXIT_INVALID };
    match format {
        ReportFormat::Json => write_json(out, &json!({"valid": report.is_clean(), "errors": report.errors, "warnings": report.warnings}))?,
        ReportFormat::Table => {
            for d in &report.errors {
                writeln!(out, "error: {d}")?;
            }
            if !cli.quiet {
                for d in &report.warnings {
                    writeln!(out, "warning: {d}")?;
                }
            }
            if report.is_clean() {
                writeln!(
                    out,
                    "{}: valid ({} nodes, {} edges, {} scenarios)",
                    file.display(),
                    doc.graph.nodes.len(),
                    doc.graph.edges.len(),
                    doc.scenarios.len()
                )?;
            } else {
                let _ = writeln!(err, "{}: {} error(s)", file.display(), report.errors.len());
            }
        }
    }
    Ok(code)
}

fn selected<'a>(a: &'a Assessment, nodes: &'a [String]) -> Vec<&'a NodeResult> {
    if nodes.is_empty() {
        a.rows().collect()
    } else {
        nodes.iter().filter_map(|id| a.get(id)).collect()
    }
}

fn row_label(r: &NodeResult) -> String {
    if r.context_set.is_empty() {
        r.id.clone()
    } else {
        let given: Vec<&str> = r.context_set.iter().map(String::as_str).collect();
        format!("{} | {}", r.id, given.join(", "))
    }
}

fn consumed_label(r: &NodeResult) -> String {
    let given: Vec<&str> = r.consumed_contexts.iter().map(String::as_str).collect();
    format!("{} | {}", r.id, given.join(", "))
}

fn write_assessment_table(a: &Assessment, nodes: &[String], out: &mut dyn Write) -> std::io::Result<()> {
    let p = a.settings.display_precision;
    for r in selected(a, nodes) {
        writeln!(out, "{}: {}", row_label(r), format::triple(&r.opinion, p))?;
        if let (Some(c), true) = (r.conditional, nodes.is_empty()) {
            writeln!(out, "{}: {}", consumed_label(r), format::triple(&c, p))?;
        }
    }
    Ok(())
}

fn write_assessment_csv(a: &Assessment, nodes: &[String], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "node,b,d,u,a,projection")?;
    for r in selected(a, nodes) {
        let o = &r.opinion;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.id,
            format::machine(o.b()),
            format::machine(o.d()),
            format::machine(o.u()),
            format::machine(o.a()),
            format::machine(o.project())
        )?;
    }
    Ok(())
}

fn opinion_json(o: &Opinion, p: u32) -> Value {
    json!({
        "b": o.b(),
        "d": o.d(),
        "u": o.u(),
        "a": o.a(),
        "projection": o.project(),
        "display": format::triple(o, p),
    })
}

fn assessment_json(a: &Assessment, nodes: &[String]) -> Value {
    let p = a.settings.display_precision;
    let rows: Vec<Value> = selected(a, nodes)
        .into_iter()
        .map(|r| {
            let mut v = json!({
                "id": r.id,
                "label": row_label(r),
                "kind": r.kind,
                "opinion": opinion_json(&r.opinion, p),
                "context_set": r.context_set,
                "consumed_contexts": r.consumed_contexts,
            });
            if let Some(c) = &r.conditional {
                v["conditional"] = opinion_json(c, p);
            }
            v
        })
        .collect();
    json!({
        "scenario": a.scenario,
        "settings": a.settings,
        "nodes": rows,
        "warnings": a.warnings,
    })
}

fn write_scenario_table(t: &analysis::ScenarioTable, p: u32, out: &mut dyn Write) -> std::io::Result<()> {
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("Node".to_string()).chain(t.scenarios.iter().cloned()).collect()];
    for r in &t.rows {
        grid.push(std::iter::once(r.label.clone()).chain(r.cells.iter().map(|o| format::triple(o, p))).collect());
    }
    let cols = grid[0].len();
    let widths: Vec<usize> =
        (0..cols).map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    for row in &grid {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c + 1 == cols {
                line.push_str(cell);
            } else {
                line.push_str(&format!("{cell:<w$}  ", w = widths[c]));
            }
        }
        writeln!(out, "{}", line.trim_end())?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_json(out: &mut dyn Write, v: &impl serde::Serialize) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(std::io::Error::other)?;
    writeln!(out, "{text}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/hazard-mitigation.yaml");

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("slargue").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn assess_one_node() {
        let (code, out, _) = call(&["assess", CORPUS, "--scenario", "full-confidence", "--node", "G1"]);
        assert_eq!(code, 0);
        assert_eq!(out, "G1: (0.86, 0.00, 0.14)\n");
    }

    #[test]
    fn assess_all_lists_conditional_row() {
        let (code, out, _) = call(&["assess", CORPUS, "--scenario", "partial-confidence"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("G1: "));
        assert!(lines[1].starts_with("G1 | A1: "));
        let (_, cond, _) = call(&["assess", CORPUS, "--context-mode", "conditional", "--node", "G1"]);
        assert!(cond.starts_with("G1 | A1: "), "{cond}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["assess", "/nonexistent/missing.yaml"]).0, EXIT_IO);
        assert_eq!(call(&["assess"]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["assess", CORPUS, "--scenario", "nope"]).0, EXIT_USAGE);
        assert_eq!(call(&["assess", CORPUS, "--node", "Q"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
        assert_eq!(call(&["validate", CORPUS]).0, EXIT_OK);
    }

    #[test]
    fn json_has_raw_and_display() {
        let (code, out, _) = call(&["assess", CORPUS, "--format", "json", "--node", "G4", "--explain", "G4"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        let g4 = &v["nodes"][0]["opinion"];
        assert!((g4["b"].as_f64().unwrap() - 0.855).abs() < 1e-12);
        assert_eq!(g4["display"], "(0.86, 0.00, 0.14)");
        assert_eq!(v["explain"]["provenance"]["operator"], "deduce");
    }

    #[test]
    fn sweep_rows_and_precision() {
        let (code, out, _) =
            call(&["sweep", CORPUS, "--node", "A1", "--mode", "belief-tradeoff", "--steps", "11", "--fix-u", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 12);
        let (_, p3, _) = call(&["--precision", "3", "assess", CORPUS, "--node", "G4"]);
        assert_eq!(p3, "G4: (0.855, 0.000, 0.145)\n");
    }

    #[test]
    fn scenario_table_columns() {
        let (code, out, _) = call(&["scenarios", CORPUS]);
        assert_eq!(code, 0);
        let header = out.lines().next().unwrap();
        assert!(header.starts_with("Node") && header.ends_with("partial-confidence"), "{header}");
        assert!(out.contains("G1 | A1"));
    }
}
