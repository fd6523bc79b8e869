// SPDX-License-Identifier: Apache-2.0

//! `bind`, `call` and `apply` on function values.
//!
//! Every function object reaching the receiver is cloned once per call
//! site. The clone executes the same method, keeps the original as the
//! origin of its captures, and stores the bound receiver and arguments in
//! its own `$this` / `$arg<i>` fields. Binding an already bound function
//! copies the earlier arguments first and keeps the earlier receiver.
//! `bind` yields the clone; `call` and `apply` invoke it on the spot.

use std::collections::HashMap;

use super::{CallSignature, Plugin, PluginError, FUNCTION};
use crate::context::CtxId;
use crate::ir::{IrProgram, StmtId, StmtKind, ELEM_FIELD};
use crate::pag::{bound_arg_field, EdgeLabel, NodeId, ObjId, BOUND_THIS_FIELD};
use crate::solver::{ArgSpec, CallInfo, SolverCore};

const METHODS: &[&str] = &["bind", "call", "apply"];

#[derive(Debug, Default)]
pub struct FunctionPlugin {
    /// Node standing for the elements of the array passed to `apply`.
    spread: HashMap<(StmtId, CtxId), NodeId>,
}

fn method_of<'a>(cx: &SolverCore<'a>, stmt: StmtId) -> &'a str {
    match &cx.program().stmt(stmt).kind {
        StmtKind::DynamicCall { method, .. } => method,
        _ => "",
    }
}

impl Plugin for FunctionPlugin {
    fn name(&self) -> &'static str {
        FUNCTION
    }

    fn priority(&self) -> i32 {
        20
    }

    fn matches(&self, sig: &CallSignature, _program: &IrProgram) -> bool {
        sig.receiver_type == "Function" && METHODS.contains(&sig.method.as_str())
    }

    fn on_call(&mut self, cx: &mut SolverCore<'_>, call: &CallInfo) -> Result<(), PluginError> {
        if method_of(cx, call.stmt) == "apply" {
            let node = cx.synthetic_var(call.caller, call.ctx, &format!("$spread@{}", call.stmt));
            if let Some(Some(arr)) = call.args.get(1) {
                cx.add_load(*arr, ELEM_FIELD, node);
            }
            self.spread.insert((call.stmt, call.ctx), node);
        }
        Ok(())
    }

    fn on_receivers(&mut self, cx: &mut SolverCore<'_>, call: &CallInfo, objs: &[ObjId]) -> Result<(), PluginError> {
        let method = method_of(cx, call.stmt);
        let this_arg = call.args.first().copied().flatten();
        let bound: &[Option<NodeId>] = match method {
            "apply" => &[],
            _ => call.args.get(1..).unwrap_or(&[]),
        };
        for &o in objs {
            let Some(src) = cx.pag().object(o).func.clone() else {
                cx.diagnostic(call.stmt, format!("`{method}` on non-function o{o}"));
                continue;
            };
            let clone = cx.alloc_clone(call.stmt, o, true, bound.len());
            if src.bound_this {
                let from = cx.field(o, BOUND_THIS_FIELD);
                let to = cx.field(clone, BOUND_THIS_FIELD);
                cx.add_edge(from, to, EdgeLabel::Copy);
            } else if let Some(t) = this_arg {
                let to = cx.field(clone, BOUND_THIS_FIELD);
                cx.add_edge(t, to, EdgeLabel::Copy);
            }
            for i in 0..src.bound_args {
                let from = cx.field(o, &bound_arg_field(i));
                let to = cx.field(clone, &bound_arg_field(i));
                cx.add_edge(from, to, EdgeLabel::Copy);
            }
            for (j, a) in bound.iter().enumerate() {
                if let Some(a) = a {
                    let to = cx.field(clone, &bound_arg_field(src.bound_args + j));
                    cx.add_edge(*a, to, EdgeLabel::Copy);
                }
            }
            match method {
                "bind" => {
                    if let Some(lhs) = call.lhs {
                        cx.add_pts(lhs, clone);
                    }
                }
                "call" => cx.invoke_function(call, clone, &ArgSpec::Positional(vec![])),
                _ => match self.spread.get(&(call.stmt, call.ctx)) {
                    Some(&n) => cx.invoke_function(call, clone, &ArgSpec::Spread(n)),
                    None => cx.invoke_function(call, clone, &ArgSpec::Positional(vec![])),
                },
            }
        }
        Ok(())
    }
}
