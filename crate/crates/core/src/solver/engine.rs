// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Instant;

use crate::callgraph::{Algo, CallGraph, CgEdge, CgTarget};
use crate::config::AnalysisConfig;
use crate::context::{should_suppress_context, ContextSelector, CtxId, EMPTY_CTX};
use crate::frontend::types::TypeExpr;
use crate::ir::{IrProgram, IrStatement, MethodId, Operand, StmtId, StmtKind, FN_LOCAL, RET_LOCAL, THIS_LOCAL};
use crate::pag::{
    bound_arg_field, AllocSite, EdgeLabel, HeapKind, NodeId, ObjId, Pag, PtsSet, VarOwner, BOUND_THIS_FIELD,
};
use crate::plugins::PluginManager;
use crate::{Diagnostic, Severity};

/// Node-level facts about one call site under one caller context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallInfo {
    pub stmt: StmtId,
    pub caller: MethodId,
    pub ctx: CtxId,
    pub receiver: Option<NodeId>,
    /// One slot per syntactic argument; `None` for non-pointer values.
    pub args: Vec<Option<NodeId>>,
    pub lhs: Option<NodeId>,
}

/// How call-site arguments feed the formals left after bound arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgSpec {
    Positional(Vec<Option<NodeId>>),
    /// One node feeds every remaining formal (`apply` over an array).
    Spread(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PendingKind {
    Dynamic,
    FunctionPointer,
}

#[derive(Debug)]
struct PendingCall {
    info: CallInfo,
    kind: PendingKind,
    plugin: Option<usize>,
    started: bool,
    handled: PtsSet,
    queued: PtsSet,
}

#[derive(Debug, Clone)]
enum Watcher {
    Store { field: String, rhs: NodeId },
    Load { field: String, lhs: NodeId },
    Call(usize),
}

/// Mutable solver state. Plugins receive it to add nodes, edges, objects
/// and call edges through the same paths the core rules use.
pub struct SolverCore<'p> {
    program: &'p IrProgram,
    config: &'p AnalysisConfig,
    selector: ContextSelector,
    deadline: Instant,
    pag: Pag,
    cg: CallGraph,
    global_types: HashMap<&'p str, &'p TypeExpr>,
    delta: HashMap<NodeId, PtsSet>,
    queue: VecDeque<NodeId>,
    watchers: HashMap<NodeId, Vec<Watcher>>,
    methods: VecDeque<(MethodId, CtxId)>,
    reached: BTreeSet<(MethodId, CtxId)>,
    calls: Vec<PendingCall>,
    dirty: BTreeSet<usize>,
    diagnostics: BTreeSet<Diagnostic>,
    unresolved: HashSet<StmtId>,
}

pub(crate) struct Deadline;

impl<'p> SolverCore<'p> {
    pub(crate) fn new(
        program: &'p IrProgram,
        config: &'p AnalysisConfig,
        selector: ContextSelector,
        deadline: Instant,
    ) -> Self {
        let mut pag = Pag::new();
        if config.trace {
            pag.enable_trace();
        }
        SolverCore {
            program,
            config,
            selector,
            deadline,
            pag,
            cg: CallGraph::new(Algo::Pta),
            global_types: program.globals.iter().map(|g| (g.name.as_str(), &g.ty)).collect(),
            delta: HashMap::new(),
            queue: VecDeque::new(),
            watchers: HashMap::new(),
            methods: VecDeque::new(),
            reached: BTreeSet::new(),
            calls: Vec::new(),
            dirty: BTreeSet::new(),
            diagnostics: BTreeSet::new(),
            unresolved: HashSet::new(),
        }
    }

    pub fn program(&self) -> &'p IrProgram {
        self.program
    }

    pub fn pag(&self) -> &Pag {
        &self.pag
    }

    pub(crate) fn has_work(&self) -> bool {
        !self.methods.is_empty() || !self.queue.is_empty() || !self.dirty.is_empty()
    }

    pub(crate) fn past_deadline(&self) -> bool {
        Instant::now() >= self.deadline
    }

    pub(crate) fn finish(self) -> (Pag, CallGraph, Vec<Diagnostic>, BTreeSet<(MethodId, CtxId)>, usize) {
        (self.pag, self.cg, self.diagnostics.into_iter().collect(), self.reached, self.unresolved.len())
    }

    /// Marks `(method, ctx)` reachable; queued for initialization once.
    pub(crate) fn reach(&mut self, method: MethodId, ctx: CtxId) {
        if self.reached.insert((method, ctx)) {
            self.methods.push_back((method, ctx));
        }
    }

    // ---- node helpers ----------------------------------------------------

    /// Node for `local` as seen from `method` under `ctx`. Globals map to
    /// their single context-free node; non-pointer locals have no node.
    pub fn var(&mut self, method: MethodId, ctx: CtxId, local: &str) -> Option<NodeId> {
        let decl = self.program.method(method);
        if let Some(ty) = decl.locals.get(local) {
            return ty.is_pointer().then(|| self.pag.node_for_var(local, VarOwner::Method(method), ctx));
        }
        let ty = self.global_types.get(local)?;
        ty.is_pointer().then(|| self.pag.node_for_var(local, VarOwner::Global, EMPTY_CTX))
    }

    /// A solver-introduced local with no declaration (always pointer-typed).
    pub fn synthetic_var(&mut self, method: MethodId, ctx: CtxId, name: &str) -> NodeId {
        self.pag.node_for_var(name, VarOwner::Method(method), ctx)
    }

    pub fn field(&mut self, obj: ObjId, field: &str) -> NodeId {
        self.pag.node_for_field(obj, field)
    }

    fn operand(&mut self, method: MethodId, ctx: CtxId, op: &Operand) -> Option<NodeId> {
        op.local().and_then(|l| self.var(method, ctx, l))
    }

    pub fn heap_ctx(&self, ctx: CtxId) -> CtxId {
        if self.config.heap_context {
            ctx
        } else {
            EMPTY_CTX
        }
    }

    // ---- constraint primitives ------------------------------------------

    fn enqueue(&mut self, node: NodeId, fresh: PtsSet) {
        if fresh.is_empty() {
            return;
        }
        match self.delta.get_mut(&node) {
            Some(d) => d.extend(fresh),
            None => {
                self.delta.insert(node, fresh);
                self.queue.push_back(node);
            }
        }
    }

    pub fn add_pts(&mut self, node: NodeId, obj: ObjId) {
        let fresh = self.pag.insert_pts(node, &PtsSet::from([obj]));
        self.enqueue(node, fresh);
    }

    /// Adds the edge and flows the current `pts(src)` along it.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, label: EdgeLabel) {
        if src != dst && self.pag.add_edge(src, dst, label) {
            let current = self.pag.pts(src).clone();
            if !current.is_empty() {
                let fresh = self.pag.insert_pts(dst, &current);
                self.enqueue(dst, fresh);
            }
        }
    }

    fn watch(&mut self, node: NodeId, w: Watcher) {
        let current: Vec<ObjId> = self.pag.pts(node).iter().copied().collect();
        self.fire(&w, &current);
        self.watchers.entry(node).or_default().push(w);
    }

    fn fire(&mut self, w: &Watcher, objs: &[ObjId]) {
        match w {
            Watcher::Store { field, rhs } => {
                for &o in objs {
                    let f = self.pag.node_for_field(o, field);
                    self.add_edge(*rhs, f, EdgeLabel::Copy);
                }
            }
            Watcher::Load { field, lhs } => {
                for &o in objs {
                    let f = self.pag.node_for_field(o, field);
                    self.add_edge(f, *lhs, EdgeLabel::Copy);
                }
            }
            Watcher::Call(i) => {
                let call = &mut self.calls[*i];
                let before = call.queued.len();
                call.queued.extend(objs.iter().copied().filter(|o| !call.handled.contains(o)));
                if call.queued.len() != before {
                    self.dirty.insert(*i);
                }
            }
        }
    }

    /// `lhs = base.field` for every object `base` may hold, now and later.
    pub fn add_load(&mut self, base: NodeId, field: &str, lhs: NodeId) {
        self.watch(base, Watcher::Load { field: field.to_string(), lhs });
    }

    /// `base.field = rhs` for every object `base` may hold, now and later.
    pub fn add_store(&mut self, base: NodeId, field: &str, rhs: NodeId) {
        self.watch(base, Watcher::Store { field: field.to_string(), rhs });
    }

    pub fn alloc(&mut self, site: AllocSite, kind: HeapKind, type_name: &str, ctx: CtxId) -> ObjId {
        let hctx = self.heap_ctx(ctx);
        self.pag.alloc_heap_object(site, kind, type_name, hctx, None)
    }

    /// Registers a clone of a function object; clones are context-free.
    /// Clones `source` at `callsite`. A source whose clone chain already
    /// passes through `callsite` folds into that earlier clone, which keeps
    /// self-rebinding such as `f = f.bind(x)` finite.
    pub fn alloc_clone(&mut self, callsite: StmtId, source: ObjId, bind_this: bool, extra_args: usize) -> ObjId {
        let mut cur = source;
        while let AllocSite::Clone { callsite: c, source: s } = self.pag.object(cur).site {
            if c == callsite {
                return cur;
            }
            cur = s;
        }
        let src = self.pag.object(source).func.clone().expect("clone source is a function object");
        let func = crate::pag::FuncRef {
            method: src.method,
            origin: src.origin,
            bound_this: src.bound_this || bind_this,
            bound_args: src.bound_args + extra_args,
        };
        self.pag.alloc_heap_object(
            AllocSite::Clone { callsite, source },
            HeapKind::FunctionObject,
            "Function",
            EMPTY_CTX,
            Some(func),
        )
    }

    pub fn add_cg_edge(&mut self, call: &CallInfo, target: CgTarget) {
        let ctx = match (self.selector.kind, self.selector.k) {
            (crate::config::SelectorKind::Insensitive, _) | (_, 0) => None,
            _ => Some(self.pag.contexts.get(call.ctx).to_vec()),
        };
        self.cg.add_edge(CgEdge { callsite: call.stmt, ctx, target });
    }

    pub fn diagnostic(&mut self, stmt: StmtId, message: impl Into<String>) {
        let loc = &self.program.stmt(stmt).loc;
        self.diagnostics.insert(Diagnostic {
            severity: Severity::Warning,
            file: loc.file.clone(),
            line: loc.line,
            col: loc.col,
            message: message.into(),
        });
    }

    pub fn mark_unresolved(&mut self, stmt: StmtId) {
        self.unresolved.insert(stmt);
    }

    // ---- call binding -----------------------------------------------------

    fn callee_context(&mut self, call: &CallInfo, callee: MethodId, suppressed: bool) -> CtxId {
        if suppressed {
            return EMPTY_CTX;
        }
        self.selector.select_callee_context(&mut self.pag.contexts, call.stmt, call.ctx, call.caller, callee)
    }

    fn suppressed(&self, call: &CallInfo) -> bool {
        let stmt = self.program.stmt(call.stmt);
        should_suppress_context(self.program, self.program.method(call.caller), stmt, &self.config.singletons)
    }

    /// Binds a resolved method call: receiver object or node into `this`,
    /// arguments into formals, `$ret` into the call's result.
    fn bind_method_call(&mut self, call: &CallInfo, target: MethodId, this_obj: Option<ObjId>) {
        let c2 = self.callee_context(call, target, self.suppressed(call));
        self.add_cg_edge(call, CgTarget::Method(target));
        self.reach(target, c2);
        let callee = self.program.method(target);
        if !callee.lexical_this {
            if let Some(this) = self.var(target, c2, THIS_LOCAL) {
                match (this_obj, call.receiver) {
                    (Some(o), _) => self.add_pts(this, o),
                    (None, Some(r)) => self.add_edge(r, this, EdgeLabel::ThisBinding),
                    (None, None) => {}
                }
            }
        }
        for (i, p) in callee.params.iter().enumerate() {
            let Some(Some(arg)) = call.args.get(i).copied() else { continue };
            if let Some(formal) = self.var(target, c2, &p.name) {
                self.add_edge(arg, formal, EdgeLabel::ParamBinding);
            }
        }
        if let Some(lhs) = call.lhs {
            if let Some(ret) = self.var(target, c2, RET_LOCAL) {
                self.add_edge(ret, lhs, EdgeLabel::ReturnBinding);
            }
        }
    }

    /// Invokes a function object: seeds `$fn` with its origin, binds the
    /// clone's receiver and bound arguments first, then `args`.
    pub fn invoke_function(&mut self, call: &CallInfo, obj: ObjId, args: &ArgSpec) {
        let Some(f) = self.pag.object(obj).func.clone() else {
            self.diagnostic(call.stmt, format!("called non-function o{obj}"));
            return;
        };
        let target = f.method;
        let c2 = self.callee_context(call, target, false);
        self.add_cg_edge(call, CgTarget::Method(target));
        self.reach(target, c2);
        let callee = self.program.method(target);
        if let Some(fnode) = self.var(target, c2, FN_LOCAL) {
            self.add_pts(fnode, f.origin);
        }
        if f.bound_this && !callee.lexical_this {
            if let Some(this) = self.var(target, c2, THIS_LOCAL) {
                let src = self.pag.node_for_field(obj, BOUND_THIS_FIELD);
                self.add_edge(src, this, EdgeLabel::ThisBinding);
            }
        }
        for (i, p) in callee.params.iter().enumerate() {
            let src = if i < f.bound_args {
                Some(self.pag.node_for_field(obj, &bound_arg_field(i)))
            } else {
                match args {
                    ArgSpec::Positional(v) => v.get(i - f.bound_args).copied().flatten(),
                    ArgSpec::Spread(n) => Some(*n),
                }
            };
            let Some(src) = src else { continue };
            if let Some(formal) = self.var(target, c2, &p.name) {
                self.add_edge(src, formal, EdgeLabel::ParamBinding);
            }
        }
        if let Some(lhs) = call.lhs {
            if let Some(ret) = self.var(target, c2, RET_LOCAL) {
                self.add_edge(ret, lhs, EdgeLabel::ReturnBinding);
            }
        }
    }

    // ---- phases -------------------------------------------------------------

    pub(crate) fn init_work_items(&mut self, plugins: &PluginManager) -> Result<(), Deadline> {
        let mut steps = 0usize;
        while let Some((m, ctx)) = self.methods.pop_front() {
            steps += 1;
            if steps.is_multiple_of(64) && self.past_deadline() {
                return Err(Deadline);
            }
            let body = &self.program.method(m).body;
            for &sid in body {
                self.init_statement(plugins, m, ctx, self.program.stmt(sid));
            }
        }
        Ok(())
    }

    fn call_info(&mut self, m: MethodId, ctx: CtxId, stmt: &IrStatement) -> CallInfo {
        let (receiver, args, lhs) = match &stmt.kind {
            StmtKind::StaticCall { lhs, receiver, args, .. } => (receiver.as_deref(), args, lhs.as_deref()),
            StmtKind::DynamicCall { lhs, receiver, args, .. } => (Some(receiver.as_str()), args, lhs.as_deref()),
            StmtKind::FunctionPointerCall { lhs, callee, args } => (Some(callee.as_str()), args, lhs.as_deref()),
            StmtKind::AllocObject { lhs, args, .. } => (Some(lhs.as_str()), args, None),
            _ => unreachable!("call_info on a non-call statement"),
        };
        let receiver = receiver.and_then(|r| self.var(m, ctx, r));
        let args = args.iter().map(|a| self.operand(m, ctx, a)).collect();
        let lhs = lhs.and_then(|l| self.var(m, ctx, l));
        CallInfo { stmt: stmt.id, caller: m, ctx, receiver, args, lhs }
    }

    fn init_statement(&mut self, plugins: &PluginManager, m: MethodId, ctx: CtxId, stmt: &'p IrStatement) {
        match &stmt.kind {
            StmtKind::AllocObject { lhs, class, .. } => {
                let kind = match self.program.class(class) {
                    Some(c) if c.is_struct => HeapKind::StructInstance,
                    _ if class == "AppStorage" || class == "LocalStorage" => HeapKind::StorageCell,
                    _ => HeapKind::ClassInstance,
                };
                let o = self.alloc(AllocSite::Stmt(stmt.id), kind, class, ctx);
                if let Some(v) = self.var(m, ctx, lhs) {
                    self.add_pts(v, o);
                }
                if let Some(ctor) = self.program.constructor_of(class) {
                    let mut info = self.call_info(m, ctx, stmt);
                    info.receiver = None;
                    self.bind_method_call(&info, ctor, Some(o));
                }
            }
            StmtKind::AllocFunction { lhs, method } => {
                let Some(target) = self.program.method_id(method) else { return };
                let hctx = self.heap_ctx(ctx);
                let o = self.pag.alloc_function(AllocSite::Stmt(stmt.id), hctx, target);
                if let Some(v) = self.var(m, ctx, lhs) {
                    self.add_pts(v, o);
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                if let (Some(r), Some(l)) = (self.var(m, ctx, rhs), self.var(m, ctx, lhs)) {
                    self.add_edge(r, l, EdgeLabel::Copy);
                }
            }
            StmtKind::FieldStore { base, field, rhs } => {
                if let (Some(b), Some(r)) = (self.var(m, ctx, base), self.var(m, ctx, rhs)) {
                    self.add_store(b, field, r);
                }
            }
            StmtKind::FieldLoad { lhs, base, field } => {
                if let (Some(b), Some(l)) = (self.var(m, ctx, base), self.var(m, ctx, lhs)) {
                    self.add_load(b, field, l);
                }
            }
            StmtKind::Return { value } => {
                if let (Some(v), Some(r)) = (self.var(m, ctx, value), self.var(m, ctx, RET_LOCAL)) {
                    self.add_edge(v, r, EdgeLabel::Copy);
                }
            }
            StmtKind::StaticCall { callee, .. } => {
                let info = self.call_info(m, ctx, stmt);
                match self.program.method_id(callee) {
                    Some(target) => self.bind_method_call(&info, target, None),
                    None => {
                        self.mark_unresolved(stmt.id);
                        self.diagnostic(stmt.id, format!("unresolved static call to `{callee}`"));
                    }
                }
            }
            StmtKind::DynamicCall { .. } | StmtKind::FunctionPointerCall { .. } => {
                let info = self.call_info(m, ctx, stmt);
                let (kind, plugin) = match stmt.kind {
                    StmtKind::DynamicCall { .. } => (PendingKind::Dynamic, plugins.select(self.program, stmt)),
                    _ => (PendingKind::FunctionPointer, None),
                };
                let receiver = info.receiver;
                let idx = self.calls.len();
                self.calls.push(PendingCall {
                    info,
                    kind,
                    plugin,
                    started: false,
                    handled: PtsSet::new(),
                    queued: PtsSet::new(),
                });
                self.dirty.insert(idx);
                if let Some(r) = receiver {
                    self.watch(r, Watcher::Call(idx));
                }
            }
        }
    }

    /// Difference propagation to a fixpoint.
    pub(crate) fn solve_constraints(&mut self) -> Result<(), Deadline> {
        let mut steps = 0u32;
        while let Some(node) = self.queue.pop_front() {
            steps = steps.wrapping_add(1);
            if steps.is_multiple_of(1024) && self.past_deadline() {
                return Err(Deadline);
            }
            let Some(delta) = self.delta.remove(&node) else { continue };
            if let Some(ws) = self.watchers.get(&node).cloned() {
                let objs: Vec<ObjId> = delta.iter().copied().collect();
                for w in &ws {
                    self.fire(w, &objs);
                }
            }
            let out: BTreeMap<NodeId, PtsSet> = self.pag.propagate(node, &delta);
            for (d, fresh) in out {
                self.enqueue(d, fresh);
            }
        }
        Ok(())
    }

    fn take_dirty(&mut self, kind: PendingKind) -> Vec<usize> {
        let picked: Vec<usize> = self.dirty.iter().copied().filter(|&i| self.calls[i].kind == kind).collect();
        for i in &picked {
            self.dirty.remove(i);
        }
        picked
    }

    fn take_new_receivers(&mut self, i: usize) -> Vec<ObjId> {
        let call = &mut self.calls[i];
        let fresh: Vec<ObjId> = std::mem::take(&mut call.queued).into_iter().collect();
        call.handled.extend(fresh.iter().copied());
        fresh
    }

    pub(crate) fn solve_dynamic_calls(&mut self, plugins: &mut PluginManager) {
        for i in self.take_dirty(PendingKind::Dynamic) {
            let objs = self.take_new_receivers(i);
            let info = self.calls[i].info.clone();
            if let Some(p) = self.calls[i].plugin {
                let first = !self.calls[i].started;
                self.calls[i].started = true;
                let plugin = plugins.get_mut(p);
                let mut result = if first { plugin.on_call(self, &info) } else { Ok(()) };
                if result.is_ok() && !objs.is_empty() {
                    result = plugin.on_receivers(self, &info, &objs);
                }
                match result {
                    Ok(()) => continue,
                    Err(e) => {
                        self.diagnostic(info.stmt, format!("{e}; falling back to virtual dispatch"));
                        self.calls[i].plugin = None;
                        let all: Vec<ObjId> = self.calls[i].handled.iter().copied().collect();
                        self.dispatch_receivers(&info, &all);
                    }
                }
            } else {
                self.calls[i].started = true;
                self.dispatch_receivers(&info, &objs);
            }
        }
    }

    fn dispatch_receivers(&mut self, info: &CallInfo, objs: &[ObjId]) {
        let StmtKind::DynamicCall { method, .. } = &self.program.stmt(info.stmt).kind else { return };
        for &o in objs {
            let class = self.pag.object(o).type_name.clone();
            match self.program.dispatch(&class, method) {
                Ok(target) => self.bind_method_call(info, target, Some(o)),
                Err(e) => {
                    self.mark_unresolved(info.stmt);
                    self.diagnostic(info.stmt, format!("cannot dispatch `{method}` on o{o}: {e}"));
                }
            }
        }
    }

    pub(crate) fn solve_function_pointer_calls(&mut self) {
        for i in self.take_dirty(PendingKind::FunctionPointer) {
            self.calls[i].started = true;
            let objs = self.take_new_receivers(i);
            let info = self.calls[i].info.clone();
            let args = ArgSpec::Positional(info.args.clone());
            for o in objs {
                if self.pag.object(o).func.is_none() {
                    self.mark_unresolved(info.stmt);
                    self.diagnostic(info.stmt, format!("called non-function o{o}"));
                    continue;
                }
                self.invoke_function(&info, o, &args);
            }
        }
    }
}
