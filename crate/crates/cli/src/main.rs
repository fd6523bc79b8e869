// SPDX-License-Identifier: Apache-2.0

//! `minipta`: pointer analysis and call-graph construction for mini-ArkTS.
//!
//! Exit status: 0 on success, 1 when a result came with diagnostics (or a
//! compare input lacked its ground-truth sidecar), 2 on a fatal error.

mod pipeline;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minipta::callgraph::{Algo, EdgeCountTable};
use minipta::config::MAX_K;
use minipta::sdk::SdkDecls;
use minipta::{AnalysisConfig, SelectorKind};
use pipeline::{Format, Status};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "minipta", version, about = "Context-sensitive pointer analysis for mini-ArkTS programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the call graph of each input file and report statistics.
    Analyze(AnalyzeArgs),
    /// Inspect the intermediate representation.
    Ir {
        #[command(subcommand)]
        command: IrCommand,
    },
    /// Score PTA, CHA and RTA against hand-labeled ground truth.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum IrCommand {
    /// Print the desugared program.
    Dump(IrDumpArgs),
}

#[derive(Args)]
struct InputArgs {
    /// `.mats` sources or JSON IR files; each file is analyzed as its own program.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Extra entry methods (free functions or `Class.method`), comma separated.
    #[arg(long, value_delimiter = ',')]
    entries: Vec<String>,
    /// Declarations of opaque SDK APIs.
    #[arg(long)]
    sdk_decls: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContextArg {
    Insensitive,
    Callsite,
    Function,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Pta,
    Cha,
    Rta,
}

#[derive(Args)]
struct SolverArgs {
    /// Context abstraction for method calls.
    #[arg(long, value_enum, default_value = "callsite")]
    context: ContextArg,
    /// Context depth.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=MAX_K as i64))]
    k: u8,
    /// Qualify allocation sites with the allocating method's context.
    #[arg(long)]
    heap_context: bool,
    /// Turn off a plugin (`storage`, `function`, `sdk`); repeatable.
    #[arg(long = "disable-plugin")]
    disable_plugin: Vec<String>,
    /// Class analyzed in the empty context when used as a receiver; repeatable.
    #[arg(long)]
    singleton: Vec<String>,
    /// Per-program time limit in seconds.
    #[arg(long, default_value_t = 1200, value_parser = clap::value_parser!(u64).range(1..))]
    timeout: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value = "pta")]
    algo: AlgoArg,
    /// Encoding of the call graph and dumps.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the call graph here (a directory when there are several inputs).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the call graph to this path (or directory); a `.dot`,
    /// `.json` or `.txt` file name overrides `--format`.
    #[arg(long)]
    dump_cg: Option<PathBuf>,
    /// Write the pointer assignment graph to this path (or directory); PTA
    /// only. The file extension picks the encoding as for `--dump-cg`.
    #[arg(long)]
    dump_pag: Option<PathBuf>,
    /// Files analyzed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum IrFormat {
    Json,
    Text,
}

#[derive(Args)]
struct IrDumpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: IrFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Json,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Directory holding `<stem>.truth.json` sidecars; defaults to each input's directory.
    #[arg(long)]
    truth_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: TableFormat,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MINIPTA_LOG", "warn")).init();
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Ir { command: IrCommand::Dump(a) } => cmd_ir_dump(a),
        Command::Compare(a) => cmd_compare(a),
    };
    ExitCode::from(status as u8)
}

fn load_sdk(path: Option<&Path>) -> Result<SdkDecls, String> {
    match path {
        Some(p) => SdkDecls::load(p).map_err(|e| e.to_string()),
        None => Ok(SdkDecls::default()),
    }
}

fn build_config(s: &SolverArgs, sdk: SdkDecls) -> AnalysisConfig {
    AnalysisConfig {
        selector: match s.context {
            ContextArg::Insensitive => SelectorKind::Insensitive,
            ContextArg::Callsite => SelectorKind::Callsite,
            ContextArg::Function => SelectorKind::Function,
        },
        k: s.k as usize,
        heap_context: s.heap_context,
        disabled_plugins: s.disable_plugin.iter().cloned().collect(),
        timeout: Duration::from_secs(s.timeout),
        singletons: s.singleton.iter().cloned().collect::<BTreeSet<_>>(),
        trace: log::log_enabled!(log::Level::Trace),
        sdk,
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("cannot start {jobs} worker threads ({e}); running sequentially");
            f()
        }
    }
}

/// Everything one analyzed file prints or writes, gathered so that parallel
/// runs still emit output in input order.
struct FileReport {
    stdout: String,
    stderr: Vec<String>,
    status: Status,
}

fn cmd_analyze(args: AnalyzeArgs) -> Status {
    let sdk = match load_sdk(args.input.sdk_decls.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::Fatal;
        }
    };
    let config = build_config(&args.solver, sdk);
    let algo = match args.algo {
        AlgoArg::Pta => Algo::Pta,
        AlgoArg::Cha => Algo::Cha,
        AlgoArg::Rta => Algo::Rta,
    };
    let many = args.input.inputs.len() > 1;
    let reports: Vec<FileReport> = with_pool(args.jobs, || {
        args.input.inputs.par_iter().map(|input| analyze_file(input, &args, algo, &config, many)).collect()
    });
    let mut status = Status::Ok;
    for r in reports {
        for line in &r.stderr {
            eprintln!("{line}");
        }
        emit(&r.stdout);
        status = status.max(r.status);
    }
    status
}

fn analyze_file(input: &Path, args: &AnalyzeArgs, algo: Algo, config: &AnalysisConfig, many: bool) -> FileReport {
    let mut report = FileReport { stdout: String::new(), stderr: Vec::new(), status: Status::Ok };
    let fatal = |mut r: FileReport, msg: String| {
        r.stderr.push(format!("error: {msg}"));
        r.status = Status::Fatal;
        r
    };
    let loaded = match pipeline::load(input, &args.input.entries, &config.sdk) {
        Ok(l) => l,
        Err(e) => return fatal(report, e),
    };
    let program = &loaded.program;
    let analysis = match pipeline::run(program, algo, config) {
        Ok(a) => a,
        Err(e) => return fatal(report, format!("{}: {e}", input.display())),
    };
    report.stderr.extend(loaded.warnings.iter().cloned());
    report.stderr.extend(analysis.diagnostics.iter().cloned());
    let diagnostics = loaded.warnings.len() + analysis.diagnostics.len();
    if diagnostics > 0 {
        report.status = Status::Diagnostics;
    }

    let cg_text = pipeline::render_cg(&analysis.call_graph, program, args.format);
    let mut writes = Vec::new();
    if let Some(out) = &args.output {
        writes.push((pipeline::artifact_path(out, input, many, args.format.extension()), cg_text.clone()));
    }
    // A single-file dump path with a known extension picks its own encoding.
    let dump_format = |out: &Path| if many { args.format } else { Format::from_path(out).unwrap_or(args.format) };
    if let Some(out) = &args.dump_cg {
        let format = dump_format(out);
        let suffix = format!("cg.{}", format.extension());
        let text = pipeline::render_cg(&analysis.call_graph, program, format);
        writes.push((pipeline::artifact_path(out, input, many, &suffix), text));
    }
    if let Some(out) = &args.dump_pag {
        let format = dump_format(out);
        match pipeline::render_pag(&analysis, format) {
            Some(text) => {
                let suffix = format!("pag.{}", format.extension());
                writes.push((pipeline::artifact_path(out, input, many, &suffix), text));
            }
            None => report.stderr.push(format!("warning: {}: no PAG for --algo {algo}", input.display())),
        }
    }
    for (path, text) in writes {
        if let Err(e) = pipeline::write_file(&path, &text) {
            return fatal(report, e);
        }
    }

    let mut record = json!({
        "file": input.display().to_string(),
        "algo": algo.to_string(),
        "diagnostics": diagnostics,
    });
    let obj = record.as_object_mut().expect("record is an object");
    if let Some(stats) = analysis.stats.as_object() {
        obj.extend(stats.clone());
    }
    if args.format == Format::Json {
        obj.insert("call_graph".into(), analysis.call_graph.to_json(program));
    }
    report.stdout.push_str(&record.to_string());
    report.stdout.push('\n');
    if args.output.is_none() && args.format != Format::Json {
        report.stdout.push_str(&cg_text);
    }
    report
}

fn cmd_ir_dump(args: IrDumpArgs) -> Status {
    let sdk = match load_sdk(args.input.sdk_decls.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::Fatal;
        }
    };
    let many = args.input.inputs.len() > 1;
    let mut status = Status::Ok;
    for input in &args.input.inputs {
        let loaded = match pipeline::load(input, &args.input.entries, &sdk) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: {e}");
                status = Status::Fatal;
                continue;
            }
        };
        for w in &loaded.warnings {
            eprintln!("{w}");
            status = status.max(Status::Diagnostics);
        }
        let (text, ext) = match args.format {
            IrFormat::Json => (loaded.program.to_json(), "ir.json"),
            IrFormat::Text => (minipta::frontend::pretty::print_program(&loaded.program), "ir.txt"),
        };
        match &args.output {
            Some(out) => {
                if let Err(e) = pipeline::write_file(&pipeline::artifact_path(out, input, many, ext), &text) {
                    eprintln!("error: {e}");
                    status = Status::Fatal;
                }
            }
            None => emit(&format!("{text}\n")),
        }
    }
    status
}

fn cmd_compare(args: CompareArgs) -> Status {
    let sdk = match load_sdk(args.input.sdk_decls.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::Fatal;
        }
    };
    let config = build_config(&args.solver, sdk);
    let results: Vec<Result<Vec<pipeline::CompareRow>, (Status, String)>> = with_pool(args.jobs, || {
        args.input
            .inputs
            .par_iter()
            .map(|input| {
                let truth = pipeline::truth_path(input, args.truth_dir.as_deref());
                let Ok(truth_text) = std::fs::read_to_string(&truth) else {
                    return Err((
                        Status::Diagnostics,
                        format!("warning: {}: no ground truth at {}; skipped", input.display(), truth.display()),
                    ));
                };
                let loaded = pipeline::load(input, &args.input.entries, &config.sdk)
                    .map_err(|e| (Status::Fatal, format!("error: {e}")))?;
                let name = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                pipeline::compare_program(&name, &loaded.program, &truth_text, &config)
                    .map_err(|e| (Status::Fatal, format!("error: {e}")))
            })
            .collect()
    });

    let mut status = Status::Ok;
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(mut rs) => rows.append(&mut rs),
            Err((s, msg)) => {
                eprintln!("{msg}");
                status = status.max(s);
            }
        }
    }
    let mut totals = EdgeCountTable::default();
    for r in &rows {
        *totals.counts.entry(r.algo).or_insert(0) += r.edges;
    }
    match args.format {
        TableFormat::Text => emit(&compare_table(&rows, &totals)),
        TableFormat::Json => {
            let json_rows: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "program": r.program,
                        "algo": r.algo.to_string(),
                        "precision": r.score.precision_pct(),
                        "recall": r.score.recall_pct(),
                        "true_positives": r.score.true_positives,
                        "reported": r.score.reported,
                        "truth": r.score.truth,
                        "edges": r.edges,
                    })
                })
                .collect();
            let out = json!({
                "rows": json_rows,
                "edge_counts": totals.counts.iter().map(|(a, n)| (a.to_string(), json!(*n))).collect::<serde_json::Map<_, _>>(),
                "pta_vs_cha_pct": totals.delta_pct(Algo::Pta, Algo::Cha),
                "pta_vs_rta_pct": totals.delta_pct(Algo::Pta, Algo::Rta),
            });
            emit(&pipeline::pretty(&out));
        }
    }
    status
}

fn compare_table(rows: &[pipeline::CompareRow], totals: &EdgeCountTable) -> String {
    use std::fmt::Write as _;
    let width = rows.iter().map(|r| r.program.len()).max().unwrap_or(7).max(7);
    let mut out = format!("{:<width$}  algo  precision  recall   edges\n", "program");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:<4}  {:>8.1}%  {:>5.1}%  {:>6}",
            r.program,
            r.algo.to_string(),
            r.score.precision_pct(),
            r.score.recall_pct(),
            r.edges
        );
    }
    out.push('\n');
    let _ = write!(out, "{totals}");
    out
}

/// Writes to stdout; a closed pipe (`| head`) ends the process quietly.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(2);
    }
}
