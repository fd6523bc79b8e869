// SPDX-License-Identifier: Apache-2.0

//! Reference solver for cross-checking the worklist engine.
//!
//! No worklist, no deltas, no node ids: every round rescans every statement
//! of every reachable `(method, context)` pair and applies each rule against
//! full points-to sets, until a round changes nothing. Facts are stored
//! under the canonical keys of [`minipta::canon`], so results compare
//! directly with the engine's.

use std::collections::{BTreeMap, BTreeSet};

use minipta::canon::{CanonResult, NodeKey, ObjKey, GLOBAL_SCOPE};
use minipta::config::{AnalysisConfig, SelectorKind};
use minipta::frontend::types::TypeExpr;
use minipta::ir::{IrProgram, IrStatement, MethodDecl, Operand, StmtId, StmtKind, ELEM_FIELD};

type Ctx = Vec<u32>;
type Set = BTreeSet<ObjKey>;

#[derive(Debug, Clone)]
struct Func {
    method: String,
    origin: ObjKey,
    bound_this: bool,
    bound_args: usize,
}

#[derive(Debug, Clone)]
struct Obj {
    type_name: String,
    func: Option<Func>,
}

enum Args<'a> {
    List(Vec<Option<NodeKey>>),
    Spread(&'a NodeKey),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Handler {
    Storage,
    Function,
    Sdk,
}

struct Oracle<'p> {
    program: &'p IrProgram,
    config: &'p AnalysisConfig,
    pts: BTreeMap<NodeKey, Set>,
    objs: BTreeMap<ObjKey, Obj>,
    reachable: BTreeSet<(String, Ctx)>,
    edges: BTreeSet<(StmtId, Ctx, String)>,
    changed: bool,
}

/// Solves `program` exhaustively under `config`.
pub fn solve(program: &IrProgram, config: &AnalysisConfig) -> CanonResult {
    let mut o = Oracle {
        program,
        config,
        pts: BTreeMap::new(),
        objs: BTreeMap::new(),
        reachable: BTreeSet::new(),
        edges: BTreeSet::new(),
        changed: true,
    };
    let Some(main) = program.dummy_main() else { return CanonResult::default() };
    o.reachable.insert((program.method(main).name.clone(), vec![]));
    while o.changed {
        o.changed = false;
        let items: Vec<(String, Ctx)> = o.reachable.iter().cloned().collect();
        for (m, c) in items {
            let decl = program.method_by_name(&m).expect("reachable method exists");
            for &sid in &decl.body {
                o.apply(decl, &c, program.stmt(sid));
            }
        }
    }
    let pts = o.pts.into_iter().filter(|(_, v)| !v.is_empty()).collect();
    CanonResult { pts, call_edges: o.edges }
}

impl<'p> Oracle<'p> {
    fn get(&self, n: &NodeKey) -> Set {
        self.pts.get(n).cloned().unwrap_or_default()
    }

    fn add(&mut self, n: &NodeKey, objs: &Set) {
        if objs.is_empty() {
            return;
        }
        let set = self.pts.entry(n.clone()).or_default();
        let before = set.len();
        set.extend(objs.iter().cloned());
        if set.len() != before {
            self.changed = true;
        }
    }

    fn flow(&mut self, src: &NodeKey, dst: &NodeKey) {
        let s = self.get(src);
        self.add(dst, &s);
    }

    fn new_obj(&mut self, key: ObjKey, obj: Obj) -> ObjKey {
        self.objs.entry(key.clone()).or_insert(obj);
        key
    }

    fn reach(&mut self, method: &str, ctx: &Ctx) {
        if self.reachable.insert((method.to_string(), ctx.clone())) {
            self.changed = true;
        }
    }

    fn edge(&mut self, site: StmtId, ctx: &Ctx, target: String) {
        if self.edges.insert((site, ctx.clone(), target)) {
            self.changed = true;
        }
    }

    fn var(&self, m: &MethodDecl, ctx: &Ctx, local: &str) -> Option<NodeKey> {
        if let Some(ty) = m.locals.get(local) {
            return ty.is_pointer().then(|| NodeKey::Var {
                method: m.name.clone(),
                local: local.into(),
                ctx: ctx.clone(),
            });
        }
        let g = self.program.globals.iter().find(|g| g.name == local)?;
        g.ty.is_pointer().then(|| NodeKey::Var { method: GLOBAL_SCOPE.into(), local: local.into(), ctx: vec![] })
    }

    fn operand(&self, m: &MethodDecl, ctx: &Ctx, op: &Operand) -> Option<NodeKey> {
        match op {
            Operand::Local(l) => self.var(m, ctx, l),
            _ => None,
        }
    }

    fn field(obj: &ObjKey, f: &str) -> NodeKey {
        NodeKey::Field { obj: obj.clone(), field: f.to_string() }
    }

    fn hctx(&self, ctx: &Ctx) -> Ctx {
        if self.config.heap_context {
            ctx.clone()
        } else {
            vec![]
        }
    }

    fn callee_ctx(&self, site: StmtId, ctx: &Ctx, caller: &MethodDecl) -> Ctx {
        let head = match self.config.selector {
            SelectorKind::Insensitive => return vec![],
            SelectorKind::Callsite => site,
            SelectorKind::Function => self.program.method_id(&caller.name).expect("caller is declared"),
        };
        let mut out = vec![head];
        out.extend(ctx.iter().copied());
        out.truncate(self.config.k);
        out
    }

    /// Calls through globals or singleton-typed receivers run in the empty context.
    fn global_receiver(&self, m: &MethodDecl, receiver: &str) -> bool {
        match m.locals.get(receiver) {
            Some(ty) => ty.class_names().iter().any(|c| self.config.singletons.contains(*c)),
            None => self.program.globals.iter().any(|g| g.name == receiver),
        }
    }

    fn bind_params(&mut self, callee: &MethodDecl, ctx: &Ctx, args: &[Option<NodeKey>]) {
        for (i, p) in callee.params.iter().enumerate() {
            if let (Some(Some(a)), Some(f)) = (args.get(i), self.var(callee, ctx, &p.name)) {
                self.flow(a, &f);
            }
        }
    }

    fn bind_ret(&mut self, callee: &MethodDecl, ctx: &Ctx, lhs: Option<&NodeKey>) {
        if let (Some(l), Some(r)) = (lhs, self.var(callee, ctx, "$ret")) {
            self.flow(&r, l);
        }
    }

    fn apply(&mut self, m: &'p MethodDecl, c: &Ctx, s: &'p IrStatement) {
        match &s.kind {
            StmtKind::AllocObject { lhs, class, args } => {
                let key = ObjKey::Site { stmt: s.id, hctx: self.hctx(c) };
                let o = self.new_obj(key, Obj { type_name: class.clone(), func: None });
                if let Some(l) = self.var(m, c, lhs) {
                    self.add(&l, &Set::from([o.clone()]));
                }
                if let Ok(ctor) = self.program.dispatch(class, "constructor") {
                    let callee = self.program.method(ctor);
                    let c2 = self.callee_ctx(s.id, c, m);
                    self.enter(s.id, c, callee, &c2);
                    if !callee.lexical_this {
                        if let Some(t) = self.var(callee, &c2, "this") {
                            self.add(&t, &Set::from([o]));
                        }
                    }
                    let a: Vec<_> = args.iter().map(|a| self.operand(m, c, a)).collect();
                    self.bind_params(callee, &c2, &a);
                }
            }
            StmtKind::AllocFunction { lhs, method } => {
                let key = ObjKey::Site { stmt: s.id, hctx: self.hctx(c) };
                let func = Func { method: method.clone(), origin: key.clone(), bound_this: false, bound_args: 0 };
                let o = self.new_obj(key, Obj { type_name: "Function".into(), func: Some(func) });
                if let Some(l) = self.var(m, c, lhs) {
                    self.add(&l, &Set::from([o]));
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                if let (Some(r), Some(l)) = (self.var(m, c, rhs), self.var(m, c, lhs)) {
                    self.flow(&r, &l);
                }
            }
            StmtKind::FieldStore { base, field, rhs } => {
                if let (Some(b), Some(r)) = (self.var(m, c, base), self.var(m, c, rhs)) {
                    for o in self.get(&b) {
                        self.flow(&r, &Self::field(&o, field));
                    }
                }
            }
            StmtKind::FieldLoad { lhs, base, field } => {
                if let (Some(b), Some(l)) = (self.var(m, c, base), self.var(m, c, lhs)) {
                    for o in self.get(&b) {
                        self.flow(&Self::field(&o, field), &l);
                    }
                }
            }
            StmtKind::Return { value } => {
                if let (Some(v), Some(r)) = (self.var(m, c, value), self.var(m, c, "$ret")) {
                    self.flow(&v, &r);
                }
            }
            StmtKind::StaticCall { lhs, callee, receiver, args } => {
                let Some(id) = self.program.method_id(callee) else { return };
                let target = self.program.method(id);
                let c2 = match receiver {
                    Some(r) if self.global_receiver(m, r) => vec![],
                    _ => self.callee_ctx(s.id, c, m),
                };
                self.enter(s.id, c, target, &c2);
                if let (false, Some(r)) = (target.lexical_this, receiver) {
                    if let (Some(rn), Some(t)) = (self.var(m, c, r), self.var(target, &c2, "this")) {
                        self.flow(&rn, &t);
                    }
                }
                let a: Vec<_> = args.iter().map(|a| self.operand(m, c, a)).collect();
                self.bind_params(target, &c2, &a);
                let l = lhs.as_ref().and_then(|l| self.var(m, c, l));
                self.bind_ret(target, &c2, l.as_ref());
            }
            StmtKind::DynamicCall { lhs, receiver, method, args, receiver_type } => {
                let a: Vec<_> = args.iter().map(|a| self.operand(m, c, a)).collect();
                let l = lhs.as_ref().and_then(|l| self.var(m, c, l));
                let r = self.var(m, c, receiver);
                let handled = match self.handler(receiver_type, method) {
                    Some(Handler::Storage) => {
                        self.storage(s, c, receiver_type, method, args, &a, r.as_ref(), l.as_ref())
                    }
                    Some(Handler::Function) => {
                        self.function(m, s, c, method, &a, r.as_ref(), l.as_ref());
                        true
                    }
                    Some(Handler::Sdk) => {
                        self.sdk(s, c, receiver_type, method, &a, l.as_ref());
                        true
                    }
                    None => false,
                };
                if handled {
                    return;
                }
                let Some(r) = r else { return };
                for o in self.get(&r) {
                    let ty = self.objs[&o].type_name.clone();
                    let Ok(id) = self.program.dispatch(&ty, method) else { continue };
                    let target = self.program.method(id);
                    let c2 = if self.global_receiver(m, receiver) { vec![] } else { self.callee_ctx(s.id, c, m) };
                    self.enter(s.id, c, target, &c2);
                    if !target.lexical_this {
                        if let Some(t) = self.var(target, &c2, "this") {
                            self.add(&t, &Set::from([o.clone()]));
                        }
                    }
                    self.bind_params(target, &c2, &a);
                    self.bind_ret(target, &c2, l.as_ref());
                }
            }
            StmtKind::FunctionPointerCall { lhs, callee, args } => {
                let Some(f) = self.var(m, c, callee) else { return };
                let a: Vec<_> = args.iter().map(|a| self.operand(m, c, a)).collect();
                let l = lhs.as_ref().and_then(|l| self.var(m, c, l));
                for o in self.get(&f) {
                    self.invoke(m, s.id, c, &o, &Args::List(a.clone()), l.as_ref());
                }
            }
        }
    }

    fn enter(&mut self, site: StmtId, ctx: &Ctx, target: &MethodDecl, c2: &Ctx) {
        self.reach(&target.name, c2);
        self.edge(site, ctx, target.name.clone());
    }

    fn invoke(&mut self, m: &MethodDecl, site: StmtId, c: &Ctx, obj: &ObjKey, args: &Args, lhs: Option<&NodeKey>) {
        let Some(f) = self.objs[obj].func.clone() else { return };
        let target = self.program.method_by_name(&f.method).expect("function object targets a method");
        let c2 = self.callee_ctx(site, c, m);
        self.enter(site, c, target, &c2);
        if let Some(fnode) = self.var(target, &c2, "$fn") {
            self.add(&fnode, &Set::from([f.origin.clone()]));
        }
        if f.bound_this && !target.lexical_this {
            if let Some(t) = self.var(target, &c2, "this") {
                self.flow(&Self::field(obj, "$this"), &t);
            }
        }
        for (i, p) in target.params.iter().enumerate() {
            let Some(formal) = self.var(target, &c2, &p.name) else { continue };
            let src = if i < f.bound_args {
                Some(Self::field(obj, &format!("$arg{i}")))
            } else {
                match args {
                    Args::List(v) => v.get(i - f.bound_args).cloned().flatten(),
                    Args::Spread(n) => Some((*n).clone()),
                }
            };
            if let Some(src) = src {
                self.flow(&src, &formal);
            }
        }
        self.bind_ret(target, &c2, lhs);
    }

    fn handler(&self, ty: &TypeExpr, method: &str) -> Option<Handler> {
        let recv = match ty {
            TypeExpr::Named(n) => n.clone(),
            TypeExpr::Function { .. } => "Function".into(),
            TypeExpr::Array(_) => "Array".into(),
            _ => return None,
        };
        let on = |name: &str| !self.config.disabled_plugins.contains(name);
        let store = matches!(recv.as_str(), "AppStorage" | "LocalStorage")
            && matches!(
                method,
                "setOrCreate" | "set" | "get" | "Link" | "link" | "Prop" | "prop" | "setAndLink" | "setAndProp"
            );
        let reference = matches!(recv.as_str(), "StorageLinkRef" | "StoragePropRef") && matches!(method, "set" | "get");
        if (store || reference) && on("storage") {
            return Some(Handler::Storage);
        }
        if recv == "Function" && matches!(method, "bind" | "call" | "apply") && on("function") {
            return Some(Handler::Function);
        }
        if self.config.sdk.lookup(&recv, method).is_some() && on("sdk") {
            return Some(Handler::Sdk);
        }
        None
    }

    /// Returns false when the call is malformed and must fall back to dispatch.
    #[allow(clippy::too_many_arguments)]
    fn storage(
        &mut self,
        _s: &IrStatement,
        _c: &Ctx,
        ty: &TypeExpr,
        method: &str,
        ops: &[Operand],
        args: &[Option<NodeKey>],
        recv: Option<&NodeKey>,
        lhs: Option<&NodeKey>,
    ) -> bool {
        if matches!(ty, TypeExpr::Named(n) if n == "StorageLinkRef" || n == "StoragePropRef") {
            let Some(r) = recv else { return true };
            if method == "set" {
                if let Some(Some(v)) = args.first() {
                    self.flow(v, r);
                }
            } else if let Some(l) = lhs {
                self.flow(r, l);
            }
            return true;
        }
        let key = match ops.first() {
            Some(Operand::Str(k)) => k.clone(),
            Some(_) => "*".to_string(),
            None => return false,
        };
        let writes = matches!(method, "setOrCreate" | "set" | "setAndLink" | "setAndProp");
        if writes && args.len() < 2 {
            return false;
        }
        let Some(r) = recv else { return true };
        for store in self.get(r) {
            let cell = Self::field(&store, &key);
            if writes {
                if let Some(Some(v)) = args.get(1) {
                    self.flow(v, &cell);
                }
            }
            let Some(l) = lhs else { continue };
            match method {
                "get" | "Prop" | "prop" | "setAndProp" => self.flow(&cell, l),
                "Link" | "link" | "setAndLink" => {
                    self.flow(&cell, l);
                    self.flow(l, &cell);
                }
                _ => {}
            }
        }
        true
    }

    fn sdk(
        &mut self,
        s: &IrStatement,
        c: &Ctx,
        ty: &TypeExpr,
        method: &str,
        args: &[Option<NodeKey>],
        lhs: Option<&NodeKey>,
    ) {
        let recv = match ty {
            TypeExpr::Named(n) => n.clone(),
            _ => return,
        };
        let decl = self.config.sdk.lookup(&recv, method).expect("handler checked the declaration").clone();
        self.edge(s.id, c, format!("sdk:{}", decl.name));
        if !decl.ret.is_pointer() {
            return;
        }
        let key = ObjKey::Stub { callsite: s.id, hctx: self.hctx(c) };
        let stub = self.new_obj(key, Obj { type_name: decl.ret.to_string(), func: None });
        if let Some(l) = lhs {
            self.add(l, &Set::from([stub.clone()]));
        }
        let captured = Self::field(&stub, "captured");
        for a in args.iter().flatten() {
            self.flow(a, &captured);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn function(
        &mut self,
        m: &MethodDecl,
        s: &IrStatement,
        c: &Ctx,
        method: &str,
        args: &[Option<NodeKey>],
        recv: Option<&NodeKey>,
        lhs: Option<&NodeKey>,
    ) {
        let spread = NodeKey::Var { method: m.name.clone(), local: format!("$spread@{}", s.id), ctx: c.clone() };
        if method == "apply" {
            if let Some(Some(arr)) = args.get(1) {
                for a in self.get(arr) {
                    self.flow(&Self::field(&a, ELEM_FIELD), &spread);
                }
            }
        }
        let Some(r) = recv else { return };
        let extra: &[Option<NodeKey>] = if method == "apply" { &[] } else { args.get(1..).unwrap_or(&[]) };
        for o in self.get(r) {
            let Some(src) = self.objs[&o].func.clone() else { continue };
            let mut folded = None;
            let mut cur = &o;
            while let ObjKey::Clone { callsite, source } = cur {
                if *callsite == s.id {
                    folded = Some(cur.clone());
                    break;
                }
                cur = source;
            }
            let key = folded.unwrap_or_else(|| ObjKey::Clone { callsite: s.id, source: Box::new(o.clone()) });
            let func = Func {
                method: src.method.clone(),
                origin: src.origin.clone(),
                bound_this: true,
                bound_args: src.bound_args + extra.len(),
            };
            let clone = self.new_obj(key, Obj { type_name: "Function".into(), func: Some(func) });
            if src.bound_this {
                self.flow(&Self::field(&o, "$this"), &Self::field(&clone, "$this"));
            } else if let Some(Some(t)) = args.first() {
                self.flow(t, &Self::field(&clone, "$this"));
            }
            for i in 0..src.bound_args {
                let f = format!("$arg{i}");
                self.flow(&Self::field(&o, &f), &Self::field(&clone, &f));
            }
            for (j, a) in extra.iter().enumerate() {
                if let Some(a) = a {
                    self.flow(a, &Self::field(&clone, &format!("$arg{}", src.bound_args + j)));
                }
            }
            match method {
                "bind" => {
                    if let Some(l) = lhs {
                        self.add(l, &Set::from([clone]));
                    }
                }
                "call" => self.invoke(m, s.id, c, &clone, &Args::List(vec![]), lhs),
                _ => self.invoke(m, s.id, c, &clone, &Args::Spread(&spread), lhs),
            }
        }
    }
}
