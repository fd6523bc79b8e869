// SPDX-License-Identifier: Apache-2.0

//! Method-granular worklist solver with on-the-fly call-graph construction.
//!
//! Each outer iteration runs four phases:
//!
//! 1. initialize newly reached `(method, context)` pairs: seed allocations,
//!    add copy edges, register field and call constraints, and bind static
//!    calls right away (their callees are initialized in the same phase);
//! 2. propagate points-to deltas to a fixpoint, materializing field edges
//!    as bases gain objects;
//! 3. resolve dynamic calls whose receivers gained objects, through the
//!    plugins or virtual dispatch;
//! 4. resolve function-pointer calls likewise.
//!
//! The loop stops when no phase has work left.

mod engine;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::callgraph::{Algo, CallGraph};
use crate::config::AnalysisConfig;
use crate::context::{ContextError, ContextSelector, CtxId};
use crate::ir::{IrProgram, MethodId};
use crate::pag::Pag;
use crate::plugins::PluginManager;
use crate::Diagnostic;

pub use engine::{ArgSpec, CallInfo, SolverCore};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("analysis exceeded the {limit:?} time limit after {iterations} iterations")]
    Timeout { limit: Duration, iterations: usize },
    #[error("program has no `@dummyMain`; collect entries first")]
    NoEntry,
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub nodes: usize,
    pub edges: usize,
    pub objects: usize,
    pub cg_edges: usize,
    pub iterations: usize,
    pub time_ms: u128,
    pub peak_pts: usize,
    pub reachable: usize,
    pub unresolved_calls: usize,
}

#[derive(Debug)]
pub struct AnalysisResult {
    pub pag: Pag,
    pub call_graph: CallGraph,
    pub stats: Stats,
    pub diagnostics: Vec<Diagnostic>,
    /// Every `(method, context)` pair that was initialized.
    pub reachable: BTreeSet<(MethodId, CtxId)>,
}

impl AnalysisResult {
    /// Union of `pts` over every context of `local` in `method`.
    pub fn pts_of_local(&self, method: &str, local: &str, program: &IrProgram) -> BTreeSet<crate::pag::ObjId> {
        let Some(mid) = program.method_id(method) else { return BTreeSet::new() };
        self.pag
            .nodes()
            .filter(|(_, n)| {
                matches!(n, crate::pag::NodeKind::Var { owner: crate::pag::VarOwner::Method(m), local: l, .. }
                    if *m == mid && l == local)
            })
            .flat_map(|(id, _)| self.pag.pts(id).iter().copied())
            .collect()
    }
}

/// Runs the analysis from `@dummyMain`.
pub fn analyze(program: &IrProgram, config: &AnalysisConfig) -> Result<AnalysisResult, AnalysisError> {
    let mut plugins = PluginManager::builtin(config);
    analyze_with(program, config, &mut plugins)
}

/// Like [`analyze`] with a caller-supplied plugin set.
pub fn analyze_with(
    program: &IrProgram,
    config: &AnalysisConfig,
    plugins: &mut PluginManager,
) -> Result<AnalysisResult, AnalysisError> {
    let start = Instant::now();
    let selector = ContextSelector::new(config.selector, config.k)?;
    let main = program.dummy_main().ok_or(AnalysisError::NoEntry)?;
    let deadline = start + config.timeout;
    let mut core = SolverCore::new(program, config, selector, deadline);
    core.reach(main, crate::context::EMPTY_CTX);
    let mut iterations = 0;
    while core.has_work() {
        iterations += 1;
        if core.past_deadline() {
            return Err(AnalysisError::Timeout { limit: config.timeout, iterations });
        }
        let timeout = |_| AnalysisError::Timeout { limit: config.timeout, iterations };
        core.init_work_items(plugins).map_err(timeout)?;
        core.solve_constraints().map_err(timeout)?;
        core.solve_dynamic_calls(plugins);
        core.solve_function_pointer_calls();
        log::debug!(
            "iteration {iterations}: {} nodes, {} edges, {} objects, {:?} elapsed",
            core.pag().node_count(),
            core.pag().edge_count(),
            core.pag().objects().len(),
            start.elapsed()
        );
    }
    let (pag, cg, diagnostics, reachable, unresolved) = core.finish();
    let stats = Stats {
        nodes: pag.node_count(),
        edges: pag.edge_count(),
        objects: pag.objects().len(),
        cg_edges: cg.len(),
        iterations,
        time_ms: start.elapsed().as_millis(),
        peak_pts: pag.peak_pts(),
        reachable: reachable.len(),
        unresolved_calls: unresolved,
    };
    debug_assert!(cg.algo == Algo::Pta);
    Ok(AnalysisResult { pag, call_graph: cg, stats, diagnostics, reachable })
}
