// SPDX-License-Identifier: Apache-2.0

//! Call graphs, the CHA/RTA baselines and the precision/recall harness.

mod baseline;
mod compare;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::ir::{IrProgram, MethodId, StmtId, StmtKind};

pub use baseline::{run_cha, run_rta};
pub use compare::{compare, edge_counts, CompareError, EdgeCountTable, GroundTruth, PrecisionRecall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Pta,
    Cha,
    Rta,
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pta" => Ok(Algo::Pta),
            "cha" => Ok(Algo::Cha),
            "rta" => Ok(Algo::Rta),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Pta => "pta",
            Algo::Cha => "cha",
            Algo::Rta => "rta",
        })
    }
}

/// A callee: a program method or an opaque SDK API.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CgTarget {
    Method(MethodId),
    Sdk(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CgEdge {
    pub callsite: StmtId,
    /// Caller context, most recent call site first; `None` for
    /// context-free graphs.
    pub ctx: Option<Vec<u32>>,
    pub target: CgTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    pub algo: Algo,
    edges: BTreeSet<CgEdge>,
}

impl CallGraph {
    pub fn new(algo: Algo) -> Self {
        CallGraph { algo, edges: BTreeSet::new() }
    }

    /// True when the edge was not present yet.
    pub fn add_edge(&mut self, edge: CgEdge) -> bool {
        self.edges.insert(edge)
    }

    pub fn edges(&self) -> impl Iterator<Item = &CgEdge> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Unique `(callsite, target)` pairs.
    pub fn erase_contexts(&self) -> BTreeSet<(StmtId, CgTarget)> {
        self.edges.iter().map(|e| (e.callsite, e.target.clone())).collect()
    }

    pub fn targets_of(&self, callsite: StmtId) -> BTreeSet<CgTarget> {
        self.edges.iter().filter(|e| e.callsite == callsite).map(|e| e.target.clone()).collect()
    }

    /// Call sites with at least one target.
    pub fn resolved_sites(&self) -> BTreeSet<StmtId> {
        self.edges.iter().map(|e| e.callsite).collect()
    }

    /// Graphviz rendering, one edge per `(caller, callee, call site)`.
    pub fn to_dot(&self, program: &IrProgram) -> String {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (site, target) in self.erase_contexts() {
            let stmt = program.stmt(site);
            let tname = target_name(program, &target);
            nodes.insert(stmt.method.clone());
            nodes.insert(tname.clone());
            edges.insert((stmt.method.clone(), tname, format!("{}:{}", stmt.loc.line, stmt.loc.col)));
        }
        let mut out = format!("digraph callgraph {{\n  label=\"{}\";\n  node [shape=box];\n", self.algo);
        for n in &nodes {
            let shape = if n.starts_with("sdk:") { " [style=dashed]" } else { "" };
            let _ = writeln!(out, "  \"{}\"{shape};", escape(n));
        }
        for (from, to, label) in &edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", escape(from), escape(to), label);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self, program: &IrProgram) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                let s = program.stmt(e.callsite);
                serde_json::json!({
                    "callsite": e.callsite,
                    "caller": s.method,
                    "line": s.loc.line,
                    "col": s.loc.col,
                    "ctx": e.ctx,
                    "target": target_name(program, &e.target),
                })
            })
            .collect();
        serde_json::json!({ "algo": self.algo, "edges": edges })
    }

    /// Context-erased adjacency by method name, for reachability questions.
    pub fn method_edges(&self, program: &IrProgram) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (site, t) in self.erase_contexts() {
            out.entry(program.stmt(site).method.clone()).or_default().insert(target_name(program, &t));
        }
        out
    }
}

pub fn target_name(program: &IrProgram, t: &CgTarget) -> String {
    match t {
        CgTarget::Method(m) => program.method(*m).name.clone(),
        CgTarget::Sdk(name) => format!("sdk:{name}"),
    }
}

/// Short label for a call site: the invoked name, or for a call through a
/// local loaded from a field, that field's name.
pub fn call_site_label(program: &IrProgram, site: StmtId) -> Option<String> {
    let stmt = program.stmt(site);
    match &stmt.kind {
        StmtKind::FunctionPointerCall { callee, .. } => {
            let method = program.method_by_name(&stmt.method)?;
            let from_field = method.body.iter().rev().find_map(|&sid| match &program.stmt(sid).kind {
                StmtKind::FieldLoad { lhs, field, .. } if lhs == callee && sid < site => Some(field.clone()),
                _ => None,
            });
            Some(from_field.unwrap_or_else(|| strip_rename(callee).to_string()))
        }
        _ => stmt.callee_name().map(str::to_string),
    }
}

fn strip_rename(local: &str) -> &str {
    match local.rsplit_once('$') {
        Some((base, n)) if !base.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => base,
        _ => local,
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
