// SPDX-License-Identifier: Apache-2.0

//! Type-based baselines. Both walk from `@dummyMain` and only resolve calls
//! in methods they have already reached.

use std::collections::BTreeSet;

use super::{Algo, CallGraph, CgEdge, CgTarget};
use crate::frontend::types::TypeExpr;
use crate::ir::{IrProgram, MethodId, MethodKind, StmtKind};
use crate::sdk::SdkDecls;

struct Universe {
    /// Classes allowed as receivers; `None` means every class.
    classes: Option<BTreeSet<String>>,
    /// Methods allowed as function-pointer targets.
    functions: BTreeSet<MethodId>,
}

/// Class hierarchy analysis.
///
/// Dynamic calls go to every override in the cone of the receiver's static
/// type (each member of a union; name-based over all classes when the type
/// is unknown). Function-pointer calls go to every lambda, free function or
/// method-used-as-value with the same arity.
pub fn run_cha(program: &IrProgram, sdk: &SdkDecls) -> CallGraph {
    let functions = program
        .methods
        .iter()
        .enumerate()
        .filter(|(_, m)| matches!(m.kind, MethodKind::Lambda | MethodKind::Function))
        .map(|(i, _)| i as MethodId)
        .chain(program.function_value_targets())
        .collect();
    let universe = Universe { classes: None, functions };
    let (cg, _) = pass(program, sdk, &universe, Algo::Cha);
    cg
}

/// Rapid type analysis: CHA restricted to classes allocated in reachable
/// code and to function values created in reachable code, iterated until
/// the reachable set stops growing.
pub fn run_rta(program: &IrProgram, sdk: &SdkDecls) -> CallGraph {
    let mut universe = Universe { classes: Some(BTreeSet::new()), functions: BTreeSet::new() };
    loop {
        let (cg, reached) = pass(program, sdk, &universe, Algo::Rta);
        let mut classes = BTreeSet::new();
        let mut functions = BTreeSet::new();
        for &m in &reached {
            for &sid in &program.method(m).body {
                match &program.stmt(sid).kind {
                    StmtKind::AllocObject { class, .. } => {
                        classes.insert(class.clone());
                    }
                    StmtKind::AllocFunction { method, .. } => {
                        if let Some(id) = program.method_id(method) {
                            functions.insert(id);
                        }
                    }
                    _ => {}
                }
            }
        }
        if Some(&classes) == universe.classes.as_ref() && functions == universe.functions {
            return cg;
        }
        universe = Universe { classes: Some(classes), functions };
    }
}

fn pass(program: &IrProgram, sdk: &SdkDecls, u: &Universe, algo: Algo) -> (CallGraph, BTreeSet<MethodId>) {
    let mut cg = CallGraph::new(algo);
    let Some(main) = program.dummy_main() else { return (cg, BTreeSet::new()) };
    let mut reached = BTreeSet::from([main]);
    let mut work = vec![main];
    let allowed = |c: &str| u.classes.as_ref().is_none_or(|s| s.contains(c));
    let fp_targets = |arity: Option<usize>| -> Vec<MethodId> {
        u.functions.iter().copied().filter(|&f| arity.is_none_or(|a| program.method(f).arity() == a)).collect()
    };
    while let Some(m) = work.pop() {
        for &sid in &program.method(m).body {
            let stmt = program.stmt(sid);
            let targets: Vec<CgTarget> = match &stmt.kind {
                StmtKind::AllocObject { class, .. } => {
                    program.constructor_of(class).map(CgTarget::Method).into_iter().collect()
                }
                StmtKind::StaticCall { callee, .. } => {
                    program.method_id(callee).map(CgTarget::Method).into_iter().collect()
                }
                StmtKind::DynamicCall { method, receiver_type, args, .. } => {
                    let sdk_decl = receiver_type.signature_name().and_then(|r| sdk.lookup(&r, method));
                    if let Some(d) = sdk_decl {
                        vec![CgTarget::Sdk(d.name.clone())]
                    } else if receiver_type.is_function() {
                        let arity = match method.as_str() {
                            "call" => Some(Some(args.len().saturating_sub(1))),
                            "apply" => Some(None),
                            _ => None,
                        };
                        arity.map(|a| fp_targets(a).into_iter().map(CgTarget::Method).collect()).unwrap_or_default()
                    } else {
                        let classes: Vec<String> = match receiver_type {
                            TypeExpr::Named(_) | TypeExpr::Union(_) => {
                                receiver_type.class_names().iter().flat_map(|c| program.cone(c)).collect()
                            }
                            TypeExpr::Unknown => program.classes.iter().map(|c| c.name.clone()).collect(),
                            _ => vec![],
                        };
                        let mut out = BTreeSet::new();
                        for c in classes.iter().filter(|c| allowed(c)) {
                            if let Ok(t) = program.dispatch(c, method) {
                                out.insert(CgTarget::Method(t));
                            }
                        }
                        out.into_iter().collect()
                    }
                }
                StmtKind::FunctionPointerCall { args, .. } => {
                    fp_targets(Some(args.len())).into_iter().map(CgTarget::Method).collect()
                }
                _ => vec![],
            };
            for t in targets {
                if let CgTarget::Method(tm) = t {
                    if reached.insert(tm) {
                        work.push(tm);
                    }
                }
                cg.add_edge(CgEdge { callsite: sid, ctx: None, target: t });
            }
        }
    }
    (cg, reached)
}
