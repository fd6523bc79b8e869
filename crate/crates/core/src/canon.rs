// SPDX-License-Identifier: Apache-2.0

//! Run-independent keys for analysis results.
//!
//! Node and object ids depend on processing order. These keys depend only
//! on the program: objects by allocation site and heap context, variables
//! by method name, local and context elements. Two solvers agree exactly
//! when their canonical results are equal.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::callgraph::target_name;
use crate::ir::{IrProgram, StmtId};
use crate::pag::{AllocSite, NodeKind, ObjId, Pag, VarOwner};
use crate::solver::AnalysisResult;

/// Method name used for program globals.
pub const GLOBAL_SCOPE: &str = "@global";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ObjKey {
    Site { stmt: StmtId, hctx: Vec<u32> },
    Clone { callsite: StmtId, source: Box<ObjKey> },
    Stub { callsite: StmtId, hctx: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NodeKey {
    Var { method: String, local: String, ctx: Vec<u32> },
    Field { obj: ObjKey, field: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CanonResult {
    /// Non-empty points-to sets only.
    pub pts: BTreeMap<NodeKey, BTreeSet<ObjKey>>,
    /// `(call site, caller context, target name)`.
    pub call_edges: BTreeSet<(StmtId, Vec<u32>, String)>,
}

pub fn obj_key(pag: &Pag, id: ObjId) -> ObjKey {
    let o = pag.object(id);
    let hctx = || pag.contexts.get(o.heap_ctx).to_vec();
    match o.site {
        AllocSite::Stmt(stmt) => ObjKey::Site { stmt, hctx: hctx() },
        AllocSite::Stub(callsite) => ObjKey::Stub { callsite, hctx: hctx() },
        AllocSite::Clone { callsite, source } => ObjKey::Clone { callsite, source: Box::new(obj_key(pag, source)) },
    }
}

pub fn node_key(pag: &Pag, program: &IrProgram, kind: &NodeKind) -> NodeKey {
    match kind {
        NodeKind::Var { owner, local, ctx } => NodeKey::Var {
            method: match owner {
                VarOwner::Global => GLOBAL_SCOPE.to_string(),
                VarOwner::Method(m) => program.method(*m).name.clone(),
            },
            local: local.clone(),
            ctx: pag.contexts.get(*ctx).to_vec(),
        },
        NodeKind::Field { obj, field } => NodeKey::Field { obj: obj_key(pag, *obj), field: field.clone() },
    }
}

pub fn canonicalize(result: &AnalysisResult, program: &IrProgram) -> CanonResult {
    let pag = &result.pag;
    let mut pts = BTreeMap::new();
    for (id, kind) in pag.nodes() {
        let set = pag.pts(id);
        if !set.is_empty() {
            pts.insert(node_key(pag, program, kind), set.iter().map(|&o| obj_key(pag, o)).collect());
        }
    }
    let call_edges = result
        .call_graph
        .edges()
        .map(|e| (e.callsite, e.ctx.clone().unwrap_or_default(), target_name(program, &e.target)))
        .collect();
    CanonResult { pts, call_edges }
}

/// Union of variable points-to sets over contexts, keyed by (method, local).
pub fn erase_var_contexts(c: &CanonResult) -> BTreeMap<(String, String), BTreeSet<ObjKey>> {
    let mut out: BTreeMap<(String, String), BTreeSet<ObjKey>> = BTreeMap::new();
    for (k, v) in &c.pts {
        if let NodeKey::Var { method, local, .. } = k {
            out.entry((method.clone(), local.clone())).or_default().extend(v.iter().cloned());
        }
    }
    out
}
