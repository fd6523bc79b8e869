// SPDX-License-Identifier: Apache-2.0

//! Pointer assignment graph: pointer nodes, abstract objects, inclusion
//! edges and points-to sets.
//!
//! A node is either a context-qualified variable or a field of an abstract
//! object. Field nodes carry no context; the object they belong to already
//! has an identity. Objects are keyed by `(site, heap context)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::context::{ContextInterner, CtxId};
use crate::ir::{IrProgram, MethodId, StmtId};

pub type NodeId = u32;
pub type ObjId = u32;
pub type PtsSet = BTreeSet<ObjId>;

/// Owner of a variable node. Globals live outside every method and context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarOwner {
    Global,
    Method(MethodId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    Var { owner: VarOwner, local: String, ctx: CtxId },
    Field { obj: ObjId, field: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AllocSite {
    /// An `AllocObject` or `AllocFunction` statement.
    Stmt(StmtId),
    /// A function object cloned by `bind`/`call`/`apply` at `callsite`.
    Clone { callsite: StmtId, source: ObjId },
    /// Return value of an opaque SDK call.
    Stub(StmtId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HeapKind {
    ClassInstance,
    StructInstance,
    FunctionObject,
    SdkStub,
    /// An `AppStorage` or `LocalStorage` instance; its fields are the storage cells.
    StorageCell,
}

/// What a function object executes when invoked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FuncRef {
    pub method: MethodId,
    /// The object created by the original `AllocFunction`; its fields hold the captures.
    pub origin: ObjId,
    /// Bound receiver lives in this object's `$this` field.
    pub bound_this: bool,
    /// Bound arguments live in fields `$arg0..$arg<n-1>`.
    pub bound_args: usize,
}

pub const BOUND_THIS_FIELD: &str = "$this";

pub fn bound_arg_field(i: usize) -> String {
    format!("$arg{i}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeapObject {
    pub id: ObjId,
    pub site: AllocSite,
    pub heap_ctx: CtxId,
    pub kind: HeapKind,
    pub type_name: String,
    pub func: Option<FuncRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeLabel {
    Copy,
    /// Reverse edge from a linked variable back into its storage cell.
    StorageBackflow,
    ThisBinding,
    ParamBinding,
    ReturnBinding,
}

#[derive(Debug, Clone, Default)]
pub struct Pag {
    pub contexts: ContextInterner,
    nodes: Vec<NodeKind>,
    pts: Vec<PtsSet>,
    succs: Vec<Vec<NodeId>>,
    edges: BTreeMap<(NodeId, NodeId), EdgeLabel>,
    var_index: HashMap<(VarOwner, String, CtxId), NodeId>,
    field_index: HashMap<(ObjId, String), NodeId>,
    objects: Vec<HeapObject>,
    obj_index: HashMap<(AllocSite, CtxId), ObjId>,
    trace: Option<Vec<(NodeId, ObjId)>>,
}

impl Pag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records every points-to insertion from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[(NodeId, ObjId)]> {
        self.trace.as_deref()
    }

    /// Returns the existing object for `(site, heap_ctx)` or registers a new one.
    pub fn alloc_heap_object(
        &mut self,
        site: AllocSite,
        kind: HeapKind,
        type_name: &str,
        heap_ctx: CtxId,
        func: Option<FuncRef>,
    ) -> ObjId {
        if let Some(&id) = self.obj_index.get(&(site, heap_ctx)) {
            return id;
        }
        debug_assert!(func.is_some() == (kind == HeapKind::FunctionObject));
        let id = self.objects.len() as ObjId;
        self.objects.push(HeapObject { id, site, heap_ctx, kind, type_name: type_name.to_string(), func });
        self.obj_index.insert((site, heap_ctx), id);
        id
    }

    /// Registers the function object created at `site`; it is its own origin.
    pub fn alloc_function(&mut self, site: AllocSite, heap_ctx: CtxId, method: MethodId) -> ObjId {
        if let Some(&id) = self.obj_index.get(&(site, heap_ctx)) {
            return id;
        }
        let id = self.objects.len() as ObjId;
        let func = FuncRef { method, origin: id, bound_this: false, bound_args: 0 };
        self.alloc_heap_object(site, HeapKind::FunctionObject, "Function", heap_ctx, Some(func))
    }

    pub fn find_object(&self, site: AllocSite, heap_ctx: CtxId) -> Option<ObjId> {
        self.obj_index.get(&(site, heap_ctx)).copied()
    }

    fn new_node(&mut self, kind: NodeKind) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(kind);
        self.pts.push(PtsSet::new());
        self.succs.push(Vec::new());
        id
    }

    pub fn node_for_var(&mut self, local: &str, owner: VarOwner, ctx: CtxId) -> NodeId {
        let key = (owner, local.to_string(), ctx);
        if let Some(&id) = self.var_index.get(&key) {
            return id;
        }
        let id = self.new_node(NodeKind::Var { owner, local: local.to_string(), ctx });
        self.var_index.insert(key, id);
        id
    }

    pub fn node_for_field(&mut self, obj: ObjId, field: &str) -> NodeId {
        let key = (obj, field.to_string());
        if let Some(&id) = self.field_index.get(&key) {
            return id;
        }
        let id = self.new_node(NodeKind::Field { obj, field: field.to_string() });
        self.field_index.insert(key, id);
        id
    }

    pub fn find_var(&self, local: &str, owner: VarOwner, ctx: CtxId) -> Option<NodeId> {
        self.var_index.get(&(owner, local.to_string(), ctx)).copied()
    }

    pub fn find_field(&self, obj: ObjId, field: &str) -> Option<NodeId> {
        self.field_index.get(&(obj, field.to_string())).copied()
    }

    /// Inserts `src -> dst`; false when the pair was already present.
    /// The caller is responsible for flowing the current `pts(src)` along it.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, label: EdgeLabel) -> bool {
        if self.edges.contains_key(&(src, dst)) {
            return false;
        }
        self.edges.insert((src, dst), label);
        self.succs[src as usize].push(dst);
        true
    }

    /// Adds `objs` to `pts(node)`; returns the strictly new part.
    pub fn insert_pts(&mut self, node: NodeId, objs: &PtsSet) -> PtsSet {
        let set = &mut self.pts[node as usize];
        let mut fresh = PtsSet::new();
        for &o in objs {
            if set.insert(o) {
                fresh.insert(o);
            }
        }
        if let Some(t) = &mut self.trace {
            t.extend(fresh.iter().map(|&o| (node, o)));
        }
        fresh
    }

    /// Pushes `delta` along every outgoing edge of `src`. Returns, per
    /// successor, the objects it did not already hold.
    pub fn propagate(&mut self, src: NodeId, delta: &PtsSet) -> BTreeMap<NodeId, PtsSet> {
        let mut out = BTreeMap::new();
        let succs = self.succs[src as usize].clone();
        for d in succs {
            let fresh = self.insert_pts(d, delta);
            if !fresh.is_empty() {
                out.entry(d).or_insert_with(PtsSet::new).extend(fresh);
            }
        }
        out
    }

    pub fn pts(&self, node: NodeId) -> &PtsSet {
        &self.pts[node as usize]
    }

    pub fn node(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id as usize]
    }

    pub fn object(&self, id: ObjId) -> &HeapObject {
        &self.objects[id as usize]
    }

    pub fn objects(&self) -> &[HeapObject] {
        &self.objects
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        &self.succs[id as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, EdgeLabel)> + '_ {
        self.edges.iter().map(|(&(s, d), &l)| (s, d, l))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeKind)> {
        self.nodes.iter().enumerate().map(|(i, n)| (i as NodeId, n))
    }

    pub fn peak_pts(&self) -> usize {
        self.pts.iter().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Edges whose source holds an object the destination lacks.
    pub fn subset_violations(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.keys().filter(|&&(s, d)| !self.pts(s).is_subset(self.pts(d))).copied().collect()
    }

    /// Strongly connected components of the edge relation (Tarjan), each
    /// sorted, listed in order of their smallest member.
    pub fn strongly_connected_components(&self) -> Vec<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut index = vec![u32::MAX; n];
        let mut low = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut next = 0u32;
        let mut out = Vec::new();
        for root in 0..n {
            if index[root] != u32::MAX {
                continue;
            }
            // explicit call stack of (node, next successor position)
            let mut calls: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
                if let Some(&w) = self.succs[v].get(*pos) {
                    *pos += 1;
                    let w = w as usize;
                    if index[w] == u32::MAX {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        calls.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                calls.pop();
                if let Some(&(parent, _)) = calls.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w as NodeId);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
        out.sort();
        out
    }

    /// Human-readable label for an object, e.g. `o3:Func@app.mats:33:24`.
    pub fn object_label(&self, program: &IrProgram, id: ObjId) -> String {
        let o = self.object(id);
        let site = match o.site {
            AllocSite::Stmt(s) | AllocSite::Stub(s) => program.stmt(s).loc.to_string(),
            AllocSite::Clone { callsite, source } => format!("{} from o{source}", program.stmt(callsite).loc),
        };
        let ty = match &o.func {
            Some(f) => program.method(f.method).name.clone(),
            None => o.type_name.clone(),
        };
        let mut label = format!("o{id}:{ty}@{site}");
        if o.heap_ctx != 0 {
            let _ = write!(label, " {}", self.ctx_label(o.heap_ctx));
        }
        label
    }

    pub fn ctx_label(&self, ctx: CtxId) -> String {
        let elems: Vec<String> = self.contexts.get(ctx).iter().map(|e| e.to_string()).collect();
        format!("[{}]", elems.join(","))
    }

    pub fn node_label(&self, program: &IrProgram, id: NodeId) -> String {
        match self.node(id) {
            NodeKind::Var { owner: VarOwner::Global, local, .. } => local.clone(),
            NodeKind::Var { owner: VarOwner::Method(m), local, ctx } => {
                format!("{}::{} {}", program.method(*m).name, local, self.ctx_label(*ctx))
            }
            NodeKind::Field { obj, field } => {
                let o = self.object(*obj);
                if o.kind == HeapKind::StorageCell && o.type_name == "AppStorage" {
                    format!("AppStorage.{field}")
                } else {
                    format!("o{obj}.{field}")
                }
            }
        }
    }

    /// Graphviz rendering: pointer nodes as boxes, objects double-circled,
    /// points-to relations dotted. Output depends only on ids.
    pub fn emit_dot(&self, program: &IrProgram) -> String {
        let mut out = String::from("digraph pag {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n");
        for o in &self.objects {
            let _ = writeln!(
                out,
                "  o{} [shape=doublecircle, label=\"{}\"];",
                o.id,
                escape(&self.object_label(program, o.id))
            );
        }
        for (id, _) in self.nodes() {
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(&self.node_label(program, id)));
        }
        for (s, d, l) in self.edges() {
            let attrs = match l {
                EdgeLabel::Copy => String::new(),
                EdgeLabel::StorageBackflow => " [label=\"backflow\", style=dashed]".to_string(),
                other => format!(" [label=\"{}\"]", edge_label_name(other)),
            };
            let _ = writeln!(out, "  n{s} -> n{d}{attrs};");
        }
        for (id, _) in self.nodes() {
            for o in self.pts(id) {
                let _ = writeln!(out, "  n{id} -> o{o} [style=dotted, arrowhead=none];");
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self, program: &IrProgram) -> serde_json::Value {
        use serde_json::json;
        let nodes: Vec<_> = self
            .nodes()
            .map(|(id, n)| {
                let pts: Vec<_> = self.pts(id).iter().collect();
                match n {
                    NodeKind::Var { owner, local, ctx } => json!({
                        "id": id,
                        "kind": "var",
                        "method": match owner {
                            VarOwner::Global => serde_json::Value::Null,
                            VarOwner::Method(m) => json!(program.method(*m).name),
                        },
                        "local": local,
                        "ctx": self.contexts.get(*ctx),
                        "pts": pts,
                    }),
                    NodeKind::Field { obj, field } => json!({
                        "id": id,
                        "kind": "field",
                        "obj": obj,
                        "field": field,
                        "pts": pts,
                    }),
                }
            })
            .collect();
        let objects: Vec<_> = self
            .objects
            .iter()
            .map(|o| {
                json!({
                    "id": o.id,
                    "kind": o.kind,
                    "type": o.type_name,
                    "site": o.site,
                    "heap_ctx": self.contexts.get(o.heap_ctx),
                    "method": o.func.as_ref().map(|f| program.method(f.method).name.clone()),
                    "label": self.object_label(program, o.id),
                })
            })
            .collect();
        let edges: Vec<_> =
            self.edges().map(|(s, d, l)| json!({"src": s, "dst": d, "label": edge_label_name(l)})).collect();
        json!({ "nodes": nodes, "objects": objects, "edges": edges })
    }
}

pub fn edge_label_name(l: EdgeLabel) -> &'static str {
    match l {
        EdgeLabel::Copy => "copy",
        EdgeLabel::StorageBackflow => "backflow",
        EdgeLabel::ThisBinding => "this",
        EdgeLabel::ParamBinding => "param",
        EdgeLabel::ReturnBinding => "return",
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
