// SPDX-License-Identifier: Apache-2.0

//! Per-file work: load, analyze, render. Each input file is an independent
//! program, so files can be processed in parallel.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use minipta::callgraph::{self, Algo, CallGraph, GroundTruth, PrecisionRecall};
use minipta::frontend::{self, EntryConfig};
use minipta::sdk::SdkDecls;
use minipta::{AnalysisConfig, IrProgram};
use serde_json::{json, Value};

/// Output encodings shared by the CG and PAG renderers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Dot,
    Json,
    Text,
}

impl Format {
    /// Encoding implied by a file name, if its extension names one.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "dot" | "gv" => Some(Format::Dot),
            "json" => Some(Format::Json),
            "txt" => Some(Format::Text),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Dot => "dot",
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

/// Process exit status; the worst status over all files wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Diagnostics = 1,
    Fatal = 2,
}

pub struct Loaded {
    pub program: IrProgram,
    pub warnings: Vec<String>,
}

/// Reads a `.mats` source file or a JSON IR file (by extension) and adds the
/// synthetic entry method.
pub fn load(path: &Path, entries: &[String], sdk: &SdkDecls) -> Result<Loaded, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let name = path.display().to_string();
    let (mut program, warnings) = if path.extension().is_some_and(|e| e == "json") {
        let p = IrProgram::from_json(&text).map_err(|e| format!("{name}: {e}"))?;
        (p, Vec::new())
    } else {
        let (p, w) = frontend::load_sources(&[(name.clone(), text)], sdk).map_err(|e| e.to_string())?;
        (p, w.iter().map(ToString::to_string).collect())
    };
    let config = EntryConfig { explicit: entries.to_vec(), explicit_only: false };
    frontend::collect_entries(&mut program, &config).map_err(|e| format!("{name}: {e}"))?;
    Ok(Loaded { program, warnings })
}

/// High-water resident set size of this process in kB, read from procfs.
pub fn peak_mem_estimate_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

pub struct Analysis {
    pub call_graph: CallGraph,
    pub stats: Value,
    pub diagnostics: Vec<String>,
    pub pag_dot: Option<String>,
    pub pag_json: Option<Value>,
    pub pag_text: Option<String>,
}

/// Runs one algorithm over a loaded program.
pub fn run(program: &IrProgram, algo: Algo, config: &AnalysisConfig) -> Result<Analysis, String> {
    let start = std::time::Instant::now();
    match algo {
        Algo::Pta => {
            let r = minipta::analyze(program, config).map_err(|e| e.to_string())?;
            let s = &r.stats;
            let stats = json!({
                "nodes": s.nodes,
                "edges": s.edges,
                "cg_edges": r.call_graph.erase_contexts().len(),
                "iterations": s.iterations,
                "time_ms": s.time_ms,
                "peak_mem_estimate": peak_mem_estimate_kb(),
            });
            let mut text = String::new();
            for (id, _) in r.pag.nodes() {
                let pts = r.pag.pts(id);
                if !pts.is_empty() {
                    let objs: Vec<String> = pts.iter().map(|&o| r.pag.object_label(program, o)).collect();
                    let _ = writeln!(text, "{} -> {{{}}}", r.pag.node_label(program, id), objs.join(", "));
                }
            }
            Ok(Analysis {
                stats,
                diagnostics: r.diagnostics.iter().map(ToString::to_string).collect(),
                pag_dot: Some(r.pag.emit_dot(program)),
                pag_json: Some(r.pag.to_json(program)),
                pag_text: Some(text),
                call_graph: r.call_graph,
            })
        }
        Algo::Cha | Algo::Rta => {
            let cg = if algo == Algo::Cha {
                callgraph::run_cha(program, &config.sdk)
            } else {
                callgraph::run_rta(program, &config.sdk)
            };
            let stats = json!({
                "nodes": null,
                "edges": null,
                "cg_edges": cg.erase_contexts().len(),
                "iterations": null,
                "time_ms": start.elapsed().as_millis(),
                "peak_mem_estimate": peak_mem_estimate_kb(),
            });
            Ok(Analysis { call_graph: cg, stats, diagnostics: vec![], pag_dot: None, pag_json: None, pag_text: None })
        }
    }
}

/// Renders a call graph; JSON keeps contexts, DOT and text erase them.
pub fn render_cg(cg: &CallGraph, program: &IrProgram, format: Format) -> String {
    match format {
        Format::Dot => cg.to_dot(program),
        Format::Json => pretty(&cg.to_json(program)),
        Format::Text => {
            let mut out = String::new();
            for (site, target) in cg.erase_contexts() {
                let s = program.stmt(site);
                let _ = writeln!(out, "{} {} -> {}", s.loc, s.method, callgraph::target_name(program, &target));
            }
            out
        }
    }
}

pub fn render_pag(a: &Analysis, format: Format) -> Option<String> {
    match format {
        Format::Dot => a.pag_dot.clone(),
        Format::Json => a.pag_json.as_ref().map(pretty),
        Format::Text => a.pag_text.clone(),
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Where a per-file artifact goes: `target` itself for a single input,
/// otherwise `target/<stem>.<suffix>`.
pub fn artifact_path(target: &Path, input: &Path, many: bool, suffix: &str) -> PathBuf {
    if many {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        target.join(format!("{stem}.{suffix}"))
    } else {
        target.to_path_buf()
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

/// Sidecar holding hand-labeled targets for `input`.
pub fn truth_path(input: &Path, truth_dir: Option<&Path>) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dir =
        truth_dir.map(Path::to_path_buf).unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    dir.join(format!("{stem}.truth.json"))
}

pub struct CompareRow {
    pub program: String,
    pub algo: Algo,
    pub score: PrecisionRecall,
    pub edges: usize,
}

/// Scores all three algorithms on one program against its sidecar.
pub fn compare_program(
    name: &str,
    program: &IrProgram,
    truth_text: &str,
    config: &AnalysisConfig,
) -> Result<Vec<CompareRow>, String> {
    let truth = GroundTruth::parse(truth_text, program).map_err(|e| format!("{name}: {e}"))?;
    let mut rows = Vec::new();
    for algo in [Algo::Pta, Algo::Cha, Algo::Rta] {
        let a = run(program, algo, config).map_err(|e| format!("{name}: {e}"))?;
        rows.push(CompareRow {
            program: name.to_string(),
            algo,
            score: callgraph::compare(&a.call_graph, &truth),
            edges: a.call_graph.erase_contexts().len(),
        });
    }
    Ok(rows)
}
