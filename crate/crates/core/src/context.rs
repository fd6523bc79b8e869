// SPDX-License-Identifier: Apache-2.0

//! Context strings and the policies that extend them at call edges.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::config::{SelectorKind, MAX_K};
use crate::ir::{IrProgram, IrStatement, MethodDecl, MethodId, StmtId, StmtKind};

pub type CtxId = u32;

/// The empty context; always interned first.
pub const EMPTY_CTX: CtxId = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("context depth {0} exceeds the maximum of {MAX_K}")]
    DepthTooLarge(usize),
}

/// Hash-consing table for context strings: equal strings share one id.
#[derive(Debug, Clone)]
pub struct ContextInterner {
    strings: Vec<Vec<u32>>,
    ids: HashMap<Vec<u32>, CtxId>,
}

impl Default for ContextInterner {
    fn default() -> Self {
        let mut i = ContextInterner { strings: Vec::new(), ids: HashMap::new() };
        i.intern(Vec::new());
        i
    }
}

impl ContextInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, elems: Vec<u32>) -> CtxId {
        if let Some(&id) = self.ids.get(&elems) {
            return id;
        }
        let id = self.strings.len() as CtxId;
        self.strings.push(elems.clone());
        self.ids.insert(elems, id);
        id
    }

    /// Elements, most recent first.
    pub fn get(&self, id: CtxId) -> &[u32] {
        &self.strings[id as usize]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextSelector {
    pub kind: SelectorKind,
    pub k: usize,
}

impl ContextSelector {
    pub fn new(kind: SelectorKind, k: usize) -> Result<Self, ContextError> {
        if k > MAX_K {
            return Err(ContextError::DepthTooLarge(k));
        }
        Ok(ContextSelector { kind, k })
    }

    /// Context for `callee` when called from `caller` at `callsite` under `caller_ctx`.
    ///
    /// Call-site selectors push the statement id, function selectors push the
    /// caller's method id; both keep the `k` most recent elements.
    pub fn select_callee_context(
        &self,
        interner: &mut ContextInterner,
        callsite: StmtId,
        caller_ctx: CtxId,
        caller: MethodId,
        _callee: MethodId,
    ) -> CtxId {
        let head = match self.kind {
            SelectorKind::Insensitive => return EMPTY_CTX,
            SelectorKind::Callsite => callsite,
            SelectorKind::Function => caller,
        };
        if self.k == 0 {
            return EMPTY_CTX;
        }
        let mut elems = Vec::with_capacity(self.k);
        elems.push(head);
        elems.extend(interner.get(caller_ctx).iter().take(self.k - 1));
        interner.intern(elems)
    }
}

/// Does the access in `stmt` go through global state?
///
/// True when the base or receiver is a program global (`globalThis`,
/// `AppStorage`, module-level variables, SDK roots) or is statically typed
/// as a registered singleton class. Globals have a single context-free node;
/// calls through them use the empty callee context.
pub fn should_suppress_context(
    program: &IrProgram,
    method: &MethodDecl,
    stmt: &IrStatement,
    singletons: &BTreeSet<String>,
) -> bool {
    let base = match &stmt.kind {
        StmtKind::FieldStore { base, .. } | StmtKind::FieldLoad { base, .. } => base,
        StmtKind::DynamicCall { receiver, .. } => receiver,
        StmtKind::StaticCall { receiver: Some(r), .. } => r,
        _ => return false,
    };
    if program.resolves_to_global(method, base) {
        return true;
    }
    let ty = method.locals.get(base);
    ty.map(|t| t.class_names().iter().any(|c| singletons.contains(*c))).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_limiting_and_interning() {
        let mut i = ContextInterner::new();
        let sel = ContextSelector::new(SelectorKind::Callsite, 2).unwrap();
        let c7 = i.intern(vec![7]);
        let c47 = sel.select_callee_context(&mut i, 4, c7, 0, 0);
        assert_eq!(i.get(c47), &[4, 7]);
        let c94 = sel.select_callee_context(&mut i, 9, c47, 0, 0);
        assert_eq!(i.get(c94), &[9, 4]);
        assert_eq!(i.intern(vec![9, 4]), c94);
    }

    #[test]
    fn k_zero_and_insensitive_give_empty() {
        let mut i = ContextInterner::new();
        let c = i.intern(vec![3]);
        for sel in [
            ContextSelector::new(SelectorKind::Callsite, 0).unwrap(),
            ContextSelector::new(SelectorKind::Insensitive, 3).unwrap(),
        ] {
            assert_eq!(sel.select_callee_context(&mut i, 5, c, 1, 2), EMPTY_CTX);
        }
    }

    #[test]
    fn function_selector_uses_caller_method() {
        let mut i = ContextInterner::new();
        let sel = ContextSelector::new(SelectorKind::Function, 1).unwrap();
        let c = sel.select_callee_context(&mut i, 99, EMPTY_CTX, 12, 3);
        assert_eq!(i.get(c), &[12]);
    }

    #[test]
    fn depth_limit() {
        assert!(ContextSelector::new(SelectorKind::Callsite, 5).is_ok());
        assert_eq!(ContextSelector::new(SelectorKind::Callsite, 6), Err(ContextError::DepthTooLarge(6)));
    }
}
