// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures: corpus loading and configurations.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use minipta::frontend::{collect_entries, load_sources, EntryConfig};
use minipta::sdk::SdkDecls;
use minipta::{AnalysisConfig, IrProgram};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn sdk() -> SdkDecls {
    SdkDecls::load(&corpus_dir().join("sdk.decls")).expect("corpus SDK declarations parse")
}

/// Every `.mats` program of the corpus, sorted by name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "mats"))
        .collect();
    files.sort();
    files
}

pub fn stem(path: &Path) -> String {
    path.file_stem().expect("file name").to_string_lossy().into_owned()
}

pub fn corpus_path(name: &str) -> PathBuf {
    corpus_dir().join(format!("{name}.mats"))
}

/// Parses, desugars and adds the synthetic entry method.
pub fn load_str(name: &str, src: &str, entries: &[&str]) -> IrProgram {
    let (mut p, _) = load_sources(&[(name.to_string(), src.to_string())], &sdk())
        .unwrap_or_else(|e| panic!("{name} failed to load: {e}"));
    let config = EntryConfig { explicit: entries.iter().map(|s| s.to_string()).collect(), explicit_only: false };
    collect_entries(&mut p, &config).unwrap_or_else(|e| panic!("{name}: {e}"));
    p
}

pub fn load_path(path: &Path) -> IrProgram {
    let src = std::fs::read_to_string(path).expect("corpus file readable");
    load_str(&path.display().to_string(), &src, &[])
}

pub fn load_corpus(name: &str) -> IrProgram {
    load_path(&corpus_path(name))
}

pub fn config(k: usize) -> AnalysisConfig {
    AnalysisConfig { k, sdk: sdk(), ..AnalysisConfig::default() }
}

use std::collections::BTreeSet;

use minipta::callgraph::target_name;
use minipta::ir::StmtKind;
use minipta::pag::{AllocSite, ObjId};
use minipta::AnalysisResult;

/// Readable object name: `Class@line`, `fn@line`, `stub@line`, or
/// `clone@line(<source>)`.
pub fn describe(program: &IrProgram, r: &AnalysisResult, o: ObjId) -> String {
    match r.pag.object(o).site {
        AllocSite::Stmt(s) => {
            let stmt = program.stmt(s);
            match &stmt.kind {
                StmtKind::AllocObject { class, .. } => format!("{class}@{}", stmt.loc.line),
                _ => format!("fn@{}", stmt.loc.line),
            }
        }
        AllocSite::Stub(s) => format!("stub@{}", program.stmt(s).loc.line),
        AllocSite::Clone { callsite, source } => {
            format!("clone@{}({})", program.stmt(callsite).loc.line, describe(program, r, source))
        }
    }
}

/// Objects of `local` in `method`, over all contexts.
pub fn labels(program: &IrProgram, r: &AnalysisResult, method: &str, local: &str) -> BTreeSet<String> {
    r.pts_of_local(method, local, program).into_iter().map(|o| describe(program, r, o)).collect()
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Call targets of every call site on `line`.
pub fn targets_at(program: &IrProgram, r: &AnalysisResult, line: u32) -> BTreeSet<String> {
    r.call_graph
        .erase_contexts()
        .into_iter()
        .filter(|(s, _)| program.stmt(*s).loc.line == line && program.stmt(*s).method != "@dummyMain")
        .map(|(_, t)| target_name(program, &t))
        .collect()
}

/// Name of the lambda declared on `line`.
pub fn lambda_at(program: &IrProgram, line: u32) -> String {
    program
        .methods
        .iter()
        .find(|m| m.kind == minipta::ir::MethodKind::Lambda && m.loc.line == line)
        .unwrap_or_else(|| panic!("no lambda on line {line}"))
        .name
        .clone()
}

/// Functions that each allocate, link their arguments, and call the next
/// one four times; with deep call and heap contexts the number of distinct
/// contexts grows exponentially along the chain.
pub fn blowup_program(depth: usize) -> String {
    let mut src = String::from("class Obj {\n  next: Obj\n}\n\n");
    for i in 0..depth {
        src.push_str(&format!(
            "function f{i}(a: Obj, b: Obj): Obj {{\n  let o = new Obj()\n  o.next = a\n  b.next = o\n"
        ));
        if i + 1 < depth {
            for j in 0..4 {
                src.push_str(&format!("  let r{j} = f{}(o, b)\n  r{j}.next = a\n", i + 1));
            }
        }
        src.push_str("  return o\n}\n\n");
    }
    src.push_str("f0(new Obj(), new Obj())\n");
    src
}
