// SPDX-License-Identifier: Apache-2.0

//! Opaque framework APIs known only by their declarations.
//!
//! A call whose signature is declared gets a call edge to `sdk:<name>`. If
//! the declared return type can carry references, one stub object per call
//! site stands in for the result, and pointer arguments are stored into the
//! stub's `captured` field so flows into the API are not lost.

use std::collections::BTreeSet;

use super::{CallSignature, Plugin, PluginError, SDK};
use crate::callgraph::CgTarget;
use crate::ir::IrProgram;
use crate::pag::{AllocSite, EdgeLabel, HeapKind};
use crate::sdk::SdkDecls;
use crate::solver::{CallInfo, SolverCore};

pub const CAPTURED_FIELD: &str = "captured";

#[derive(Debug)]
pub struct SdkPlugin {
    decls: SdkDecls,
    roots: BTreeSet<String>,
}

impl SdkPlugin {
    pub fn new(decls: SdkDecls) -> Self {
        let roots = decls.roots().into_iter().map(str::to_string).collect();
        SdkPlugin { decls, roots }
    }
}

impl Plugin for SdkPlugin {
    fn name(&self) -> &'static str {
        SDK
    }

    fn priority(&self) -> i32 {
        30
    }

    fn matches(&self, sig: &CallSignature, _program: &IrProgram) -> bool {
        self.roots.contains(&sig.receiver_type) && self.decls.lookup(&sig.receiver_type, &sig.method).is_some()
    }

    fn on_call(&mut self, cx: &mut SolverCore<'_>, call: &CallInfo) -> Result<(), PluginError> {
        let Some(sig) = CallSignature::of(cx.program().stmt(call.stmt)) else { return Ok(()) };
        let Some(decl) = self.decls.lookup(&sig.receiver_type, &sig.method) else { return Ok(()) };
        cx.add_cg_edge(call, CgTarget::Sdk(decl.name.clone()));
        if !decl.ret.is_pointer() {
            return Ok(());
        }
        let stub = cx.alloc(AllocSite::Stub(call.stmt), HeapKind::SdkStub, &decl.ret.to_string(), call.ctx);
        if let Some(lhs) = call.lhs {
            cx.add_pts(lhs, stub);
        }
        let captured = cx.field(stub, CAPTURED_FIELD);
        for arg in call.args.iter().flatten() {
            cx.add_edge(*arg, captured, EdgeLabel::Copy);
        }
        Ok(())
    }
}
