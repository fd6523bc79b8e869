// SPDX-License-Identifier: Apache-2.0

//! `AppStorage` / `LocalStorage` key-value stores.
//!
//! Each store instance is an abstract object; key `k` is its field `k`, so
//! cells are isolated per instance and per key. `AppStorage` is allocated
//! once as a global, which makes its cells shared by every context.
//!
//! - `setOrCreate(k, v)`, `set(k, v)`: `v -> cell`
//! - `get(k)`: `cell -> lhs`
//! - `Link(k)`: `cell -> lhs` and the backflow `lhs -> cell`
//! - `Prop(k)`: `cell -> lhs` only
//! - `setAndLink` / `setAndProp`: a set followed by the binding
//!
//! The returned link or prop is a reference object in the source language;
//! here the variable holding it stands for its value, so `ref.set(v)` is
//! `v -> ref` and `ref.get()` is `ref -> lhs`.

use super::{storage_key, CallSignature, Plugin, PluginError, STORAGE};
use crate::ir::{IrProgram, StmtKind};
use crate::pag::{EdgeLabel, ObjId};
use crate::solver::{CallInfo, SolverCore};

pub const STORE_TYPES: &[&str] = &["AppStorage", "LocalStorage"];
pub const REF_TYPES: &[&str] = &["StorageLinkRef", "StoragePropRef"];

const STORE_METHODS: &[&str] =
    &["setOrCreate", "set", "get", "Link", "link", "Prop", "prop", "setAndLink", "setAndProp"];
const REF_METHODS: &[&str] = &["set", "get"];

#[derive(Debug, Default)]
pub struct StoragePlugin;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Binding {
    None,
    Read,
    Link,
    Prop,
}

fn method_of<'a>(cx: &SolverCore<'a>, call: &CallInfo) -> &'a str {
    match &cx.program().stmt(call.stmt).kind {
        StmtKind::DynamicCall { method, .. } => method,
        _ => "",
    }
}

fn is_ref_call(cx: &SolverCore<'_>, call: &CallInfo) -> bool {
    match &cx.program().stmt(call.stmt).kind {
        StmtKind::DynamicCall { receiver_type, .. } => {
            receiver_type.class_names().iter().any(|c| REF_TYPES.contains(c))
        }
        _ => false,
    }
}

fn malformed(message: String) -> PluginError {
    PluginError::Malformed { plugin: STORAGE, message }
}

impl Plugin for StoragePlugin {
    fn name(&self) -> &'static str {
        STORAGE
    }

    fn priority(&self) -> i32 {
        10
    }

    fn matches(&self, sig: &CallSignature, _program: &IrProgram) -> bool {
        let store = STORE_TYPES.contains(&sig.receiver_type.as_str()) && STORE_METHODS.contains(&sig.method.as_str());
        let reference = REF_TYPES.contains(&sig.receiver_type.as_str()) && REF_METHODS.contains(&sig.method.as_str());
        store || reference
    }

    fn on_call(&mut self, cx: &mut SolverCore<'_>, call: &CallInfo) -> Result<(), PluginError> {
        if !is_ref_call(cx, call) {
            return Ok(());
        }
        let Some(r) = call.receiver else { return Ok(()) };
        match method_of(cx, call) {
            "set" => {
                if let Some(Some(v)) = call.args.first() {
                    cx.add_edge(*v, r, EdgeLabel::Copy);
                }
            }
            _ => {
                if let Some(lhs) = call.lhs {
                    cx.add_edge(r, lhs, EdgeLabel::Copy);
                }
            }
        }
        Ok(())
    }

    fn on_receivers(&mut self, cx: &mut SolverCore<'_>, call: &CallInfo, objs: &[ObjId]) -> Result<(), PluginError> {
        if is_ref_call(cx, call) {
            return Ok(());
        }
        let method = method_of(cx, call);
        let key = storage_key(cx.program().stmt(call.stmt))
            .ok_or_else(|| malformed(format!("`{method}` needs a key argument")))?;
        let (writes, binding) = match method {
            "setOrCreate" | "set" => (true, Binding::None),
            "get" => (false, Binding::Read),
            "Link" | "link" => (false, Binding::Link),
            "Prop" | "prop" => (false, Binding::Prop),
            "setAndLink" => (true, Binding::Link),
            "setAndProp" => (true, Binding::Prop),
            other => return Err(malformed(format!("unsupported storage method `{other}`"))),
        };
        let value = if writes {
            match call.args.get(1) {
                Some(v) => *v,
                None => return Err(malformed(format!("`{method}` needs a value argument"))),
            }
        } else {
            None
        };
        for &store in objs {
            let cell = cx.field(store, &key);
            if let Some(v) = value {
                cx.add_edge(v, cell, EdgeLabel::Copy);
            }
            let Some(lhs) = call.lhs else { continue };
            match binding {
                Binding::None => {}
                Binding::Read | Binding::Prop => cx.add_edge(cell, lhs, EdgeLabel::Copy),
                Binding::Link => {
                    cx.add_edge(cell, lhs, EdgeLabel::Copy);
                    cx.add_edge(lhs, cell, EdgeLabel::StorageBackflow);
                }
            }
        }
        Ok(())
    }
}
