// SPDX-License-Identifier: Apache-2.0

//! Lowering of parsed modules into three-address IR.
//!
//! Lambdas become methods named `anonymous_method_<n>`, numbered in source
//! order across all files. Captured variables travel through `$cap_<x>`
//! fields of the function object: the creating method stores them after the
//! `AllocFunction`, the lambda loads them from `$fn` on entry, and variables
//! the lambda writes are loaded back by the creator. Arrow lambdas capture
//! `this` the same way.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::types::TypeExpr;
use super::FrontendError;
use crate::ir::*;
use crate::sdk::SdkDecls;
use crate::Diagnostic;

/// Builtin classes that the runtime provides.
const BUILTIN_CLASSES: &[&str] = &["Array", "Object", "LocalStorage", "AppStorage", "@Global", "UIAbility"];
pub(crate) const GLOBAL_OBJECT_CLASS: &str = "@Global";
pub(crate) const LINK_REF_TYPE: &str = "StorageLinkRef";
pub(crate) const PROP_REF_TYPE: &str = "StoragePropRef";

/// Receivers whose methods carry no pointer semantics.
const IGNORED_ROOTS: &[&str] =
    &["console", "Math", "JSON", "Date", "Object", "Number", "String", "Boolean", "hilog", "Promise", "Reflect"];
const IGNORED_FUNCTIONS: &[&str] =
    &["parseInt", "parseFloat", "isNaN", "isFinite", "print", "String", "Number", "Boolean", "$r", "$rawfile"];
const CALLBACK_RUNNERS: &[&str] = &["setTimeout", "setInterval", "queueMicrotask", "requestAnimationFrame"];
const COMPONENT_LIFECYCLE: &[&str] = &["aboutToAppear", "build"];

#[derive(Debug, Clone)]
struct Sig {
    params: Vec<TypeExpr>,
    ret: TypeExpr,
    is_static: bool,
}

#[derive(Debug, Clone)]
struct ClassInfo {
    name: String,
    superclass: Option<String>,
    fields: Vec<(String, TypeExpr, bool)>,
    methods: HashMap<String, Sig>,
    is_struct: bool,
    builtin: bool,
}

#[derive(Debug, Clone)]
enum Val {
    Local(String, TypeExpr),
    Str(String),
    Prim,
    /// Result of a UI builtin; attribute calls chain on it.
    Ui,
}

impl Val {
    fn local(&self) -> Option<&str> {
        match self {
            Val::Local(l, _) => Some(l),
            _ => None,
        }
    }

    fn ty(&self) -> TypeExpr {
        match self {
            Val::Local(_, t) => t.clone(),
            Val::Str(_) => TypeExpr::prim("string"),
            _ => TypeExpr::prim("void"),
        }
    }

    fn operand(&self) -> Operand {
        match self {
            Val::Local(l, _) => Operand::Local(l.clone()),
            Val::Str(s) => Operand::Str(s.clone()),
            _ => Operand::Prim,
        }
    }
}

#[derive(Debug, Clone)]
struct Capture {
    outer: String,
    inner: String,
    written: bool,
}

struct FnCtx {
    decl: MethodDecl,
    scopes: Vec<HashMap<String, String>>,
    stmts: Vec<(Loc, StmtKind)>,
    temps: u32,
    captures: Vec<Capture>,
    is_lambda: bool,
    class: Option<String>,
    /// Top-level `let` of this context declare program globals.
    declares_globals: bool,
}

enum Resolved {
    Var(String, TypeExpr),
    Function(String),
    Class(String),
    Namespace(String),
    Enum,
}

struct Desugarer<'a> {
    sdk: &'a SdkDecls,
    classes: BTreeMap<String, ClassInfo>,
    functions: HashMap<String, Sig>,
    namespaces: HashSet<String>,
    enums: HashSet<String>,
    globals: BTreeMap<String, TypeExpr>,
    methods: Vec<MethodDecl>,
    statements: Vec<IrStatement>,
    stack: Vec<FnCtx>,
    ns: Vec<String>,
    file: String,
    lambda_offset: u32,
    warnings: Vec<Diagnostic>,
}

type DResult<T> = Result<T, FrontendError>;

pub fn desugar(module: &SourceModule) -> Result<IrProgram, FrontendError> {
    desugar_modules(std::slice::from_ref(module), &SdkDecls::default()).map(|(p, _)| p)
}

/// Lowers several modules into one program sharing a flat namespace.
pub fn desugar_modules(modules: &[SourceModule], sdk: &SdkDecls) -> DResult<(IrProgram, Vec<Diagnostic>)> {
    let mut d = Desugarer {
        sdk,
        classes: BTreeMap::new(),
        functions: HashMap::new(),
        namespaces: HashSet::new(),
        enums: HashSet::new(),
        globals: BTreeMap::new(),
        methods: Vec::new(),
        statements: Vec::new(),
        stack: Vec::new(),
        ns: Vec::new(),
        file: String::new(),
        lambda_offset: 0,
        warnings: Vec::new(),
    };
    for b in BUILTIN_CLASSES {
        d.classes.insert(
            b.to_string(),
            ClassInfo {
                name: b.to_string(),
                superclass: None,
                fields: vec![],
                methods: HashMap::new(),
                is_struct: false,
                builtin: true,
            },
        );
    }
    d.globals.insert("globalThis".into(), TypeExpr::Named(GLOBAL_OBJECT_CLASS.into()));
    d.globals.insert("AppStorage".into(), TypeExpr::Named("AppStorage".into()));

    for m in modules {
        d.file = m.path.clone();
        d.collect(&m.items, "")?;
    }
    d.resolve_hierarchy()?;

    let mut class_decls = Vec::new();
    for m in modules {
        d.file = m.path.clone();
        d.lower_module(m, &mut class_decls)?;
        d.lambda_offset += m.lambda_count;
    }
    let mut classes: Vec<ClassDecl> = d
        .classes
        .values()
        .filter(|c| c.builtin)
        .map(|c| ClassDecl {
            name: c.name.clone(),
            superclass: None,
            fields: vec![],
            methods: vec![],
            decorators: vec![],
            is_struct: false,
            builtin: true,
            loc: Loc::default(),
        })
        .collect();
    classes.extend(class_decls);

    let mut program = IrProgram::default();
    program.version = IR_VERSION;
    program.files = modules.iter().map(|m| m.path.clone()).collect();
    program.classes = classes;
    program.methods = d.methods;
    program.statements = d.statements;
    program.globals = d.globals.into_iter().map(|(name, ty)| GlobalDecl { name, ty }).collect();
    program.reindex();
    program.check().map_err(|e| FrontendError::Invalid {
        file: String::new(),
        line: 0,
        col: 0,
        message: e.to_string(),
    })?;
    Ok((program, d.warnings))
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn is_ui_event(name: &str) -> bool {
    name.len() > 2 && name.starts_with("on") && name[2..].starts_with(|c: char| c.is_ascii_uppercase())
}

impl<'a> Desugarer<'a> {
    // ------------------------------------------------------------------ declarations

    fn collect(&mut self, items: &[Item], prefix: &str) -> DResult<()> {
        for it in items {
            match it {
                Item::Namespace(ns) => {
                    let q = join(prefix, &ns.name);
                    self.namespaces.insert(q.clone());
                    self.collect(&ns.items, &q)?;
                }
                Item::Class(c) => {
                    let q = join(prefix, &c.name);
                    if self.classes.contains_key(&q) || self.functions.contains_key(&q) {
                        return Err(self.dup(&q, c.pos));
                    }
                    let mut methods = HashMap::new();
                    for m in &c.methods {
                        methods.insert(
                            m.name.clone(),
                            Sig {
                                params: m.params.iter().map(|p| p.ty.clone().unwrap_or(TypeExpr::Unknown)).collect(),
                                ret: m.ret.clone().unwrap_or(TypeExpr::Unknown),
                                is_static: m.is_static,
                            },
                        );
                    }
                    let mut fields = Vec::new();
                    for f in &c.fields {
                        let ty = f.ty.clone().unwrap_or_else(|| infer_literal_type(f.init.as_ref()));
                        fields.push((f.name.clone(), ty.clone(), f.is_static));
                        if f.is_static {
                            self.globals.insert(format!("{q}.{}", f.name), ty);
                        }
                    }
                    self.classes.insert(
                        q.clone(),
                        ClassInfo {
                            name: q,
                            superclass: c.superclass.clone(),
                            fields,
                            methods,
                            is_struct: c.is_struct,
                            builtin: false,
                        },
                    );
                }
                Item::Function(f) => {
                    let q = join(prefix, &f.name);
                    if self.functions.contains_key(&q) || self.classes.contains_key(&q) {
                        return Err(self.dup(&q, f.pos));
                    }
                    self.functions.insert(
                        q,
                        Sig {
                            params: f.params.iter().map(|p| p.ty.clone().unwrap_or(TypeExpr::Unknown)).collect(),
                            ret: f.ret.clone().unwrap_or(TypeExpr::Unknown),
                            is_static: true,
                        },
                    );
                }
                Item::Stmt(Stmt::Let { name, ty, init, pos }) => {
                    let q = join(prefix, name);
                    if self.globals.contains_key(&q) {
                        return Err(self.dup(&q, *pos));
                    }
                    if ty.as_ref().is_some_and(|t| *t == TypeExpr::prim("number")) && init.is_none() {
                        // enums are lowered to primitive lets by the parser
                        self.enums.insert(q.clone());
                    }
                    let t = ty.clone().unwrap_or_else(|| infer_literal_type(init.as_ref()));
                    self.globals.insert(q, t);
                }
                Item::Stmt(_) => {}
            }
        }
        Ok(())
    }

    fn dup(&self, name: &str, pos: Pos) -> FrontendError {
        FrontendError::Duplicate { file: self.file.clone(), line: pos.line, col: pos.col, name: name.to_string() }
    }

    fn resolve_hierarchy(&mut self) -> DResult<()> {
        let names: Vec<String> = self.classes.keys().cloned().collect();
        for n in &names {
            let Some(sup) = self.classes[n].superclass.clone() else { continue };
            let prefix = n.rsplit_once('.').map(|(p, _)| p).unwrap_or("");
            let q = self.qualify_in(prefix, &sup, |d, q| d.classes.contains_key(q)).ok_or_else(|| {
                FrontendError::Unresolved { file: self.file.clone(), line: 0, col: 0, name: sup.clone() }
            })?;
            self.classes.get_mut(n).unwrap().superclass = Some(q);
        }
        for n in &names {
            let mut cur = self.classes[n].superclass.clone();
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                if steps > names.len() {
                    return Err(FrontendError::InheritanceCycle(n.clone()));
                }
                cur = self.classes.get(&c).and_then(|i| i.superclass.clone());
            }
        }
        // resolve declared field types now that all classes are known
        for n in &names {
            let prefix = n.rsplit_once('.').map(|(p, _)| p.to_string()).unwrap_or_default();
            let fields = self.classes[n].fields.clone();
            let resolved = fields.into_iter().map(|(f, t, s)| (f, self.resolve_type_in(&prefix, &t), s)).collect();
            self.classes.get_mut(n).unwrap().fields = resolved;
            let methods = self.classes[n].methods.clone();
            let resolved = methods
                .into_iter()
                .map(|(m, s)| {
                    let sig = Sig {
                        params: s.params.iter().map(|t| self.resolve_type_in(&prefix, t)).collect(),
                        ret: self.resolve_type_in(&prefix, &s.ret),
                        is_static: s.is_static,
                    };
                    (m, sig)
                })
                .collect();
            self.classes.get_mut(n).unwrap().methods = resolved;
        }
        let fnames: Vec<String> = self.functions.keys().cloned().collect();
        for f in fnames {
            let prefix = f.rsplit_once('.').map(|(p, _)| p.to_string()).unwrap_or_default();
            let s = self.functions[&f].clone();
            let sig = Sig {
                params: s.params.iter().map(|t| self.resolve_type_in(&prefix, t)).collect(),
                ret: self.resolve_type_in(&prefix, &s.ret),
                is_static: true,
            };
            self.functions.insert(f, sig);
        }
        let gnames: Vec<String> = self.globals.keys().cloned().collect();
        for g in gnames {
            let prefix = g.rsplit_once('.').map(|(p, _)| p.to_string()).unwrap_or_default();
            let t = self.resolve_type_in(&prefix, &self.globals[&g].clone());
            self.globals.insert(g, t);
        }
        Ok(())
    }

    fn qualify_in(&self, prefix: &str, name: &str, exists: impl Fn(&Self, &str) -> bool) -> Option<String> {
        let mut p = prefix.to_string();
        loop {
            let q = join(&p, name);
            if exists(self, &q) {
                return Some(q);
            }
            if p.is_empty() {
                return None;
            }
            p = p.rsplit_once('.').map(|(a, _)| a.to_string()).unwrap_or_default();
        }
    }

    fn current_ns(&self) -> String {
        self.ns.join(".")
    }

    fn resolve_type_in(&self, prefix: &str, t: &TypeExpr) -> TypeExpr {
        match t {
            TypeExpr::Named(n) => match self.qualify_in(prefix, n, |d, q| d.classes.contains_key(q)) {
                Some(q) => TypeExpr::Named(q),
                None => t.clone(),
            },
            TypeExpr::Function { params, ret } => TypeExpr::Function {
                params: params.iter().map(|p| self.resolve_type_in(prefix, p)).collect(),
                ret: Box::new(self.resolve_type_in(prefix, ret)),
            },
            TypeExpr::Union(ms) => TypeExpr::Union(ms.iter().map(|m| self.resolve_type_in(prefix, m)).collect()),
            TypeExpr::Array(e) => TypeExpr::Array(Box::new(self.resolve_type_in(prefix, e))),
            _ => t.clone(),
        }
    }

    fn resolve_type(&self, t: &TypeExpr) -> TypeExpr {
        self.resolve_type_in(&self.current_ns(), t)
    }

    fn user_class(&self, t: &TypeExpr) -> Option<&ClassInfo> {
        match t {
            TypeExpr::Named(n) => self.classes.get(n),
            _ => None,
        }
    }

    fn class_field(&self, class: &str, field: &str) -> Option<TypeExpr> {
        let mut cur = Some(class.to_string());
        while let Some(c) = cur {
            let info = self.classes.get(&c)?;
            if let Some((_, t, _)) = info.fields.iter().find(|(n, _, s)| n == field && !s) {
                return Some(t.clone());
            }
            cur = info.superclass.clone();
        }
        None
    }

    fn class_method(&self, class: &str, method: &str) -> Option<(String, Sig)> {
        let mut cur = Some(class.to_string());
        while let Some(c) = cur {
            let info = self.classes.get(&c)?;
            if let Some(s) = info.methods.get(method) {
                return Some((format!("{c}.{method}"), s.clone()));
            }
            cur = info.superclass.clone();
        }
        None
    }

    /// Parameter types of the constructor `new class(...)` would run.
    fn ctor_params(&self, class: &str) -> Vec<TypeExpr> {
        self.class_method(class, "constructor").map(|(_, s)| s.params).unwrap_or_default()
    }

    // ------------------------------------------------------------------ method contexts

    fn loc(&self, pos: Pos) -> Loc {
        Loc { file: self.file.clone(), line: pos.line, col: pos.col }
    }

    fn cx(&mut self) -> &mut FnCtx {
        self.stack.last_mut().expect("inside a method")
    }

    fn begin(&mut self, decl: MethodDecl, class: Option<String>, is_lambda: bool) {
        let mut decl = decl;
        decl.locals.insert(RET_LOCAL.to_string(), decl.ret.clone());
        self.stack.push(FnCtx {
            decl,
            scopes: vec![HashMap::new()],
            stmts: Vec::new(),
            temps: 0,
            captures: Vec::new(),
            is_lambda,
            class,
            declares_globals: false,
        });
    }

    /// Closes the innermost method, assigning statement ids, and returns its captures.
    fn finish(&mut self) -> (String, Vec<Capture>) {
        let mut cx = self.stack.pop().expect("method context");
        let mut prologue = Vec::new();
        for c in &cx.captures {
            let field = format!("{CAPTURE_PREFIX}{}", c.inner);
            prologue.push((
                cx.decl.loc.clone(),
                StmtKind::FieldLoad { lhs: c.inner.clone(), base: FN_LOCAL.into(), field: field.clone() },
            ));
            if c.written {
                prologue.push((
                    cx.decl.loc.clone(),
                    StmtKind::FieldStore { base: FN_LOCAL.into(), field, rhs: c.inner.clone() },
                ));
            }
        }
        prologue.append(&mut cx.stmts);
        for (loc, kind) in prologue {
            let id = self.statements.len() as StmtId;
            self.statements.push(IrStatement { id, method: cx.decl.name.clone(), loc, kind });
            cx.decl.body.push(id);
        }
        let name = cx.decl.name.clone();
        self.methods.push(cx.decl);
        (name, cx.captures)
    }

    fn emit(&mut self, pos: Pos, kind: StmtKind) {
        let loc = self.loc(pos);
        self.cx().stmts.push((loc, kind));
    }

    fn temp(&mut self, ty: TypeExpr) -> String {
        let cx = self.cx();
        loop {
            cx.temps += 1;
            let name = format!("$t{}", cx.temps);
            if !cx.decl.locals.contains_key(&name) {
                cx.decl.locals.insert(name.clone(), ty);
                return name;
            }
        }
    }

    /// Declares a source-level local in the innermost scope, renaming on clashes.
    fn declare(&mut self, name: &str, ty: TypeExpr) -> String {
        let clash_global = self.globals.contains_key(name);
        let cx = self.cx();
        let mut ir = name.to_string();
        let mut n = 0;
        while cx.decl.locals.contains_key(&ir) || clash_global && ir == name {
            n += 1;
            ir = format!("{name}${n}");
        }
        cx.decl.locals.insert(ir.clone(), ty);
        cx.scopes.last_mut().unwrap().insert(name.to_string(), ir.clone());
        ir
    }

    fn set_local_type(&mut self, ir: &str, ty: TypeExpr) {
        self.cx().decl.locals.insert(ir.to_string(), ty);
    }

    fn push_scope(&mut self) {
        self.cx().scopes.push(HashMap::new());
    }

    fn pop_scope(&mut self) {
        self.cx().scopes.pop();
    }

    /// Finds `name` in method scopes, capturing through lambda boundaries.
    fn lookup_local(&mut self, level: usize, name: &str) -> Option<(String, TypeExpr)> {
        let cx = &self.stack[level];
        for scope in cx.scopes.iter().rev() {
            if let Some(ir) = scope.get(name) {
                return Some((ir.clone(), cx.decl.locals[ir].clone()));
            }
        }
        if name == THIS_LOCAL && !cx.decl.lexical_this {
            return cx.decl.locals.get(THIS_LOCAL).map(|t| (THIS_LOCAL.to_string(), t.clone()));
        }
        if !cx.is_lambda || level == 0 {
            return None;
        }
        let (outer, ty) = self.lookup_local(level - 1, name)?;
        if !ty.is_pointer() {
            return Some((outer, ty));
        }
        let cx = &mut self.stack[level];
        let mut inner = name.to_string();
        let mut n = 0;
        while cx.decl.locals.contains_key(&inner) {
            n += 1;
            inner = format!("{name}${n}");
        }
        cx.decl.locals.insert(inner.clone(), ty.clone());
        cx.scopes[0].insert(name.to_string(), inner.clone());
        cx.captures.push(Capture { outer, inner: inner.clone(), written: false });
        Some((inner, ty))
    }

    fn mark_written(&mut self, level: usize, inner: &str) {
        let cx = &mut self.stack[level];
        let Some(cap) = cx.captures.iter_mut().find(|c| c.inner == inner) else { return };
        if cap.written {
            return;
        }
        cap.written = true;
        let outer = cap.outer.clone();
        if level > 0 {
            self.mark_written(level - 1, &outer);
        }
    }

    fn resolve(&mut self, name: &str) -> Option<Resolved> {
        let top = self.stack.len() - 1;
        if let Some((ir, ty)) = self.lookup_local(top, name) {
            return Some(Resolved::Var(ir, ty));
        }
        let ns_scope = self.current_ns();
        if self.qualify_in(&ns_scope, name, |d, q| d.enums.contains(q)).is_some() {
            return Some(Resolved::Enum);
        }
        if let Some(q) = self.qualify_in(&ns_scope, name, |d, q| d.globals.contains_key(q)) {
            let ty = self.globals[&q].clone();
            return Some(Resolved::Var(q, ty));
        }
        if let Some(q) = self.qualify_in(&ns_scope, name, |d, q| d.functions.contains_key(q)) {
            return Some(Resolved::Function(q));
        }
        if let Some(q) = self.qualify_in(&ns_scope, name, |d, q| d.classes.contains_key(q)) {
            return Some(Resolved::Class(q));
        }
        if let Some(q) = self.qualify_in(&ns_scope, name, |d, q| d.namespaces.contains(q)) {
            return Some(Resolved::Namespace(q));
        }
        if self.sdk.roots().contains(name) {
            let ty = TypeExpr::Named(name.to_string());
            self.globals.insert(name.to_string(), ty.clone());
            return Some(Resolved::Var(name.to_string(), ty));
        }
        None
    }

    /// Resolves `a.b.c` when `a` is not a variable: namespaces, classes, statics.
    fn resolve_path(&mut self, e: &Expr) -> Option<Resolved> {
        match &e.kind {
            ExprKind::Ident(n) => match self.resolve(n)? {
                Resolved::Var(..) => None,
                r => Some(r),
            },
            ExprKind::Member { obj, name } => match self.resolve_path(obj)? {
                Resolved::Namespace(ns) => {
                    let q = join(&ns, name);
                    if self.namespaces.contains(&q) {
                        Some(Resolved::Namespace(q))
                    } else if self.classes.contains_key(&q) {
                        Some(Resolved::Class(q))
                    } else if self.functions.contains_key(&q) {
                        Some(Resolved::Function(q))
                    } else if self.enums.contains(&q) {
                        Some(Resolved::Enum)
                    } else {
                        self.globals.get(&q).cloned().map(|t| Resolved::Var(q, t))
                    }
                }
                Resolved::Class(c) => {
                    let q = format!("{c}.{name}");
                    if let Some(t) = self.globals.get(&q) {
                        return Some(Resolved::Var(q.clone(), t.clone()));
                    }
                    match self.classes[&c].methods.get(name) {
                        Some(s) if s.is_static => Some(Resolved::Function(q)),
                        _ => None,
                    }
                }
                Resolved::Enum => Some(Resolved::Enum),
                _ => None,
            },
            _ => None,
        }
    }

    fn fn_sig(&self, qualified: &str) -> Option<Sig> {
        if let Some(s) = self.functions.get(qualified) {
            return Some(s.clone());
        }
        let (c, m) = qualified.rsplit_once('.')?;
        self.classes.get(c)?.methods.get(m).cloned()
    }

    fn unresolved(&self, name: &str, pos: Pos) -> FrontendError {
        FrontendError::Unresolved { file: self.file.clone(), line: pos.line, col: pos.col, name: name.to_string() }
    }

    fn invalid(&self, pos: Pos, message: impl Into<String>) -> FrontendError {
        FrontendError::Invalid { file: self.file.clone(), line: pos.line, col: pos.col, message: message.into() }
    }

    fn warn(&mut self, pos: Pos, message: impl Into<String>) {
        let d = Diagnostic::warning(&self.file, pos.line, pos.col, message);
        self.warnings.push(d);
    }

    // ------------------------------------------------------------------ modules and classes

    fn lower_module(&mut self, m: &SourceModule, classes: &mut Vec<ClassDecl>) -> DResult<()> {
        let init_name = format!("@init:{}", m.path);
        let mut init = MethodDecl::new(&init_name, "@init", MethodKind::Init, self.loc(Pos { line: 1, col: 1 }));
        init.ret = TypeExpr::prim("void");
        self.begin(init, None, false);
        self.cx().declares_globals = true;
        self.lower_items(&m.items, classes)?;
        self.finish();
        Ok(())
    }

    fn lower_items(&mut self, items: &[Item], classes: &mut Vec<ClassDecl>) -> DResult<()> {
        for it in items {
            match it {
                Item::Namespace(ns) => {
                    self.ns.push(ns.name.clone());
                    self.lower_items(&ns.items, classes)?;
                    self.ns.pop();
                }
                Item::Class(c) => {
                    let decl = self.lower_class(c)?;
                    classes.push(decl);
                }
                Item::Function(f) => {
                    let q = join(&self.current_ns(), &f.name);
                    self.lower_function(f, &q, MethodKind::Function, None, &[])?;
                }
                Item::Stmt(s) => self.stmt(s)?,
            }
        }
        Ok(())
    }

    fn lower_class(&mut self, c: &ClassAst) -> DResult<ClassDecl> {
        let q = join(&self.current_ns(), &c.name);
        let info = self.classes[&q].clone();
        let mut methods = Vec::new();
        let needs_ctor = c.fields.iter().any(|f| !f.is_static && (f.init.is_some() || storage_decorator(f).is_some()));
        let mut has_ctor = false;
        for m in &c.methods {
            let kind = if m.name == "constructor" { MethodKind::Constructor } else { MethodKind::Method };
            has_ctor |= kind == MethodKind::Constructor;
            let prologue: Vec<&FieldAst> = if kind == MethodKind::Constructor {
                c.fields.iter().filter(|f| !f.is_static).collect()
            } else {
                vec![]
            };
            let name = format!("{q}.{}", m.name);
            self.lower_function(m, &name, kind, Some(&q), &prologue)?;
            methods.push(name);
        }
        if needs_ctor && !has_ctor {
            // synthetic constructor: field initializers, then forward to the inherited constructor
            let sup_params = info.superclass.as_ref().map(|s| self.ctor_params(s)).unwrap_or_default();
            let params: Vec<Param> = sup_params
                .iter()
                .enumerate()
                .map(|(i, t)| Param { name: format!("a{i}"), ty: Some(t.clone()), pos: c.pos })
                .collect();
            let mut body = Vec::new();
            if info.superclass.as_ref().is_some_and(|s| self.class_method(s, "constructor").is_some()) {
                body.push(Stmt::Expr(Expr {
                    kind: ExprKind::Call {
                        callee: Box::new(Expr { kind: ExprKind::Super, pos: c.pos }),
                        args: params
                            .iter()
                            .map(|p| Expr { kind: ExprKind::Ident(p.name.clone()), pos: c.pos })
                            .collect(),
                        trailing: None,
                    },
                    pos: c.pos,
                }));
            }
            let f = FunctionAst {
                name: "constructor".into(),
                params,
                ret: None,
                body,
                is_static: false,
                decorators: vec![],
                pos: c.pos,
            };
            let prologue: Vec<&FieldAst> = c.fields.iter().filter(|f| !f.is_static).collect();
            let name = format!("{q}.constructor");
            self.classes.get_mut(&q).unwrap().methods.insert(
                "constructor".into(),
                Sig { params: sup_params, ret: TypeExpr::prim("void"), is_static: false },
            );
            self.lower_function(&f, &name, MethodKind::Constructor, Some(&q), &prologue)?;
            methods.push(name);
        }
        // static field initializers run with the file's top-level code
        for f in c.fields.iter().filter(|f| f.is_static) {
            if let Some(init) = &f.init {
                let g = format!("{q}.{}", f.name);
                let ty = self.globals[&g].clone();
                if ty.is_pointer() {
                    self.expr_into(init, &g)?;
                } else {
                    self.expr(init, None)?;
                }
            }
        }
        Ok(ClassDecl {
            name: q.clone(),
            superclass: info.superclass.clone(),
            fields: info
                .fields
                .iter()
                .filter(|(_, _, s)| !s)
                .map(|(n, t, _)| FieldDecl { name: n.clone(), ty: t.clone(), is_static: false })
                .collect(),
            methods,
            decorators: c
                .decorators
                .iter()
                .map(|d| DecoratorDecl {
                    name: d.name.clone(),
                    args: d
                        .args
                        .iter()
                        .filter_map(|a| if let ExprKind::Str(s) = &a.kind { Some(s.clone()) } else { None })
                        .collect(),
                })
                .collect(),
            is_struct: c.is_struct,
            builtin: false,
            loc: self.loc(c.pos),
        })
    }

    fn lower_function(
        &mut self,
        f: &FunctionAst,
        qualified: &str,
        kind: MethodKind,
        owner: Option<&str>,
        field_prologue: &[&FieldAst],
    ) -> DResult<()> {
        let mut decl = MethodDecl::new(qualified, &f.name, kind, self.loc(f.pos));
        decl.owner = owner.map(str::to_string);
        decl.is_static = f.is_static || owner.is_none();
        decl.ret = match kind {
            MethodKind::Constructor => TypeExpr::prim("void"),
            _ => self.resolve_type(&f.ret.clone().unwrap_or(TypeExpr::Unknown)),
        };
        if let (Some(o), false) = (owner, f.is_static) {
            decl.locals.insert(THIS_LOCAL.into(), TypeExpr::Named(o.to_string()));
        }
        self.begin(decl, owner.map(str::to_string), false);
        self.bind_params(&f.params)?;
        for field in field_prologue {
            self.field_init(field)?;
        }
        for s in &f.body {
            self.stmt(s)?;
        }
        self.finish();
        Ok(())
    }

    fn bind_params(&mut self, params: &[Param]) -> DResult<()> {
        let mut seen = HashSet::new();
        for p in params {
            if !seen.insert(p.name.as_str()) {
                return Err(self.dup(&p.name, p.pos));
            }
            let ty = self.resolve_type(&p.ty.clone().unwrap_or(TypeExpr::Unknown));
            let ir = self.declare(&p.name, ty.clone());
            self.cx().decl.params.push(ParamDecl { name: ir, ty });
        }
        Ok(())
    }

    /// Field initializer and storage-decorator wiring inside a constructor.
    fn field_init(&mut self, f: &FieldAst) -> DResult<()> {
        if let Some(init) = &f.init {
            let v = self.expr(init, None)?;
            if let Some(l) = v.local() {
                self.emit(
                    f.pos,
                    StmtKind::FieldStore { base: THIS_LOCAL.into(), field: f.name.clone(), rhs: l.into() },
                );
            }
        }
        let Some((deco, key)) = storage_decorator(f) else { return Ok(()) };
        let ty = f.ty.clone().unwrap_or(TypeExpr::Unknown);
        if !ty.is_pointer() {
            return Ok(());
        }
        let link = deco.name == "StorageLink";
        let (method, ref_ty) = if link { ("Link", LINK_REF_TYPE) } else { ("Prop", PROP_REF_TYPE) };
        let r = self.temp(TypeExpr::Named(ref_ty.into()));
        self.emit(
            deco.pos,
            StmtKind::DynamicCall {
                lhs: Some(r.clone()),
                receiver: "AppStorage".into(),
                method: method.into(),
                args: vec![key.map(Operand::Str).unwrap_or(Operand::Prim)],
                receiver_type: TypeExpr::Named("AppStorage".into()),
            },
        );
        self.emit(deco.pos, StmtKind::FieldStore { base: THIS_LOCAL.into(), field: f.name.clone(), rhs: r.clone() });
        if link {
            let back = self.temp(self.resolve_type(&ty));
            self.emit(
                deco.pos,
                StmtKind::FieldLoad { lhs: back.clone(), base: THIS_LOCAL.into(), field: f.name.clone() },
            );
            self.emit(
                deco.pos,
                StmtKind::DynamicCall {
                    lhs: None,
                    receiver: r,
                    method: "set".into(),
                    args: vec![Operand::Local(back)],
                    receiver_type: TypeExpr::Named(LINK_REF_TYPE.into()),
                },
            );
        }
        Ok(())
    }

    // ------------------------------------------------------------------ statements

    fn block(&mut self, stmts: &[Stmt]) -> DResult<()> {
        self.push_scope();
        for s in stmts {
            self.stmt(s)?;
        }
        self.pop_scope();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> DResult<()> {
        match s {
            Stmt::Let { name, ty, init, pos } => {
                let at_top = {
                    let cx = self.stack.last().unwrap();
                    cx.declares_globals && cx.scopes.len() == 1
                };
                if at_top {
                    let g = join(&self.current_ns(), name);
                    let gty = self.globals.get(&g).cloned().unwrap_or(TypeExpr::Unknown);
                    if let Some(init) = init {
                        if gty.is_pointer() {
                            self.expr_into(init, &g)?;
                        } else {
                            self.expr(init, None)?;
                        }
                    }
                    return Ok(());
                }
                let declared = ty.as_ref().map(|t| self.resolve_type(t));
                let ir = self.declare(name, declared.clone().unwrap_or(TypeExpr::Unknown));
                let _ = pos;
                if let Some(init) = init {
                    if declared.as_ref().is_some_and(|t| !t.is_pointer()) {
                        self.expr(init, None)?;
                    } else {
                        let v = self.expr(init, Some(&ir))?;
                        if declared.is_none() {
                            let inferred = match &v {
                                Val::Local(_, t) => t.clone(),
                                Val::Str(_) => TypeExpr::prim("string"),
                                Val::Prim => TypeExpr::prim("number"),
                                Val::Ui => TypeExpr::prim("void"),
                            };
                            self.set_local_type(&ir, inferred);
                        }
                    }
                }
                Ok(())
            }
            Stmt::Expr(e) => self.expr(e, None).map(|_| ()),
            Stmt::Assign { target, value, pos } => self.assign(target, value, *pos),
            Stmt::Return { value, pos } => {
                if let Some(v) = value {
                    let v = self.expr(v, None)?;
                    if let Some(l) = v.local() {
                        self.emit(*pos, StmtKind::Return { value: l.to_string() });
                    }
                }
                Ok(())
            }
            Stmt::If { cond, then, otherwise } => {
                self.expr(cond, None)?;
                self.block(then)?;
                self.block(otherwise)
            }
            Stmt::While { cond, body } => {
                self.expr(cond, None)?;
                self.block(body)
            }
            Stmt::For { init, cond, step, body } => {
                self.push_scope();
                for s in init {
                    self.stmt(s)?;
                }
                if let Some(c) = cond {
                    self.expr(c, None)?;
                }
                for s in step {
                    self.stmt(s)?;
                }
                self.block(body)?;
                self.pop_scope();
                Ok(())
            }
            Stmt::ForOf { name, ty, iter, body, pos } => {
                let it = self.expr(iter, None)?;
                self.push_scope();
                let elem_ty = match (ty, it.ty()) {
                    (Some(t), _) => self.resolve_type(t),
                    (None, TypeExpr::Array(e)) => *e,
                    _ => TypeExpr::Unknown,
                };
                let ir = self.declare(name, elem_ty.clone());
                if let (Some(base), true) = (it.local(), elem_ty.is_pointer()) {
                    let base = base.to_string();
                    self.emit(*pos, StmtKind::FieldLoad { lhs: ir, base, field: ELEM_FIELD.into() });
                }
                for s in body {
                    self.stmt(s)?;
                }
                self.pop_scope();
                Ok(())
            }
            Stmt::Block(b) => self.block(b),
            Stmt::Nop => Ok(()),
        }
    }

    fn assign(&mut self, target: &Expr, value: &Expr, pos: Pos) -> DResult<()> {
        match &target.kind {
            ExprKind::Ident(name) => match self.resolve(name) {
                Some(Resolved::Var(ir, ty)) => {
                    if ty.is_pointer() {
                        let level = self.stack.len() - 1;
                        self.mark_written(level, &ir);
                        self.expr_into(value, &ir)?;
                    } else {
                        self.expr(value, None)?;
                    }
                    Ok(())
                }
                Some(Resolved::Enum) => self.expr(value, None).map(|_| ()),
                _ => Err(self.unresolved(name, target.pos)),
            },
            ExprKind::Member { obj, name } => {
                if let Some(r) = self.resolve_path(target) {
                    return match r {
                        Resolved::Var(g, ty) if ty.is_pointer() => self.expr_into(value, &g),
                        Resolved::Var(..) | Resolved::Enum => self.expr(value, None).map(|_| ()),
                        _ => Err(self.invalid(pos, "cannot assign to a declaration")),
                    };
                }
                let base = self.expr(obj, None)?;
                let v = self.expr(value, None)?;
                if let (Some(b), Some(r)) = (base.local(), v.local()) {
                    let (b, r) = (b.to_string(), r.to_string());
                    self.emit(target.pos, StmtKind::FieldStore { base: b, field: name.clone(), rhs: r });
                }
                Ok(())
            }
            ExprKind::Index { obj, index } => {
                let base = self.expr(obj, None)?;
                self.expr(index, None)?;
                let v = self.expr(value, None)?;
                if let (Some(b), Some(r)) = (base.local(), v.local()) {
                    let (b, r) = (b.to_string(), r.to_string());
                    self.emit(target.pos, StmtKind::FieldStore { base: b, field: ELEM_FIELD.into(), rhs: r });
                }
                Ok(())
            }
            ExprKind::This => Err(self.invalid(pos, "cannot assign to `this`")),
            _ => Err(self.invalid(pos, "invalid assignment target")),
        }
    }

    // ------------------------------------------------------------------ expressions

    fn expr_into(&mut self, e: &Expr, dest: &str) -> DResult<()> {
        self.expr(e, Some(dest)).map(|_| ())
    }

    /// Lowers `e`; with `dest`, the value ends up in that local.
    fn expr(&mut self, e: &Expr, dest: Option<&str>) -> DResult<Val> {
        let v = self.expr_inner(e, dest)?;
        if let (Some(d), Val::Local(l, t)) = (dest, &v) {
            if l != d {
                self.emit(e.pos, StmtKind::Assign { lhs: d.to_string(), rhs: l.clone() });
                return Ok(Val::Local(d.to_string(), t.clone()));
            }
        }
        Ok(v)
    }

    fn target(&mut self, dest: Option<&str>, ty: TypeExpr) -> String {
        match dest {
            Some(d) => d.to_string(),
            None => self.temp(ty),
        }
    }

    fn dest_type(&self, dest: Option<&str>, fallback: TypeExpr) -> TypeExpr {
        let Some(d) = dest else { return fallback };
        let cx = self.stack.last().unwrap();
        match cx.decl.locals.get(d).or_else(|| self.globals.get(d)) {
            Some(TypeExpr::Unknown) | None => fallback,
            Some(t) => t.clone(),
        }
    }

    fn expr_inner(&mut self, e: &Expr, dest: Option<&str>) -> DResult<Val> {
        match &e.kind {
            ExprKind::Num(_) | ExprKind::Bool(_) | ExprKind::Null => Ok(Val::Prim),
            ExprKind::Str(s) => Ok(Val::Str(s.clone())),
            ExprKind::This | ExprKind::Super => match self.resolve(THIS_LOCAL) {
                Some(Resolved::Var(ir, ty)) => Ok(Val::Local(ir, ty)),
                _ => Ok(Val::Prim),
            },
            ExprKind::Ident(name) => self.ident(name, e.pos, dest),
            ExprKind::New { class, args } => {
                let q = self
                    .qualify_in(&self.current_ns(), class, |d, q| d.classes.contains_key(q))
                    .ok_or_else(|| self.unresolved(class, e.pos))?;
                let ops = self.args(args)?;
                let ty = TypeExpr::Named(q.clone());
                let lhs = self.target(dest, ty.clone());
                self.emit(e.pos, StmtKind::AllocObject { lhs: lhs.clone(), class: q, args: ops });
                Ok(Val::Local(lhs, self.dest_type(dest, ty)))
            }
            ExprKind::Lambda { id, kind, params, ret, body } => {
                let name = format!("anonymous_method_{}", self.lambda_offset + id + 1);
                let (ty, captures) = self.lambda(&name, *kind, params, ret.as_ref(), body, e.pos)?;
                let lhs = self.target(dest, ty.clone());
                self.alloc_function(e.pos, &lhs, &name);
                for c in captures {
                    let field = format!("{CAPTURE_PREFIX}{}", c.inner);
                    self.emit(
                        e.pos,
                        StmtKind::FieldStore { base: lhs.clone(), field: field.clone(), rhs: c.outer.clone() },
                    );
                    if c.written {
                        self.emit(e.pos, StmtKind::FieldLoad { lhs: c.outer, base: lhs.clone(), field });
                    }
                }
                Ok(Val::Local(lhs, ty))
            }
            ExprKind::Member { obj, name } => {
                if let Some(r) = self.resolve_path(e) {
                    return self.resolved_value(r, e.pos, dest);
                }
                let base = self.expr(obj, None)?;
                match base {
                    Val::Prim | Val::Str(_) => Ok(Val::Prim),
                    Val::Ui => Ok(Val::Ui),
                    Val::Local(b, bty) => {
                        if matches!(bty, TypeExpr::Array(_)) && name == "length" {
                            return Ok(Val::Prim);
                        }
                        let mut fty = TypeExpr::Unknown;
                        if let Some(c) = self.user_class(&bty).map(|c| c.name.clone()) {
                            match self.class_field(&c, name) {
                                Some(t) => fty = t,
                                None => {
                                    if let Some((m, sig)) = self.class_method(&c, name) {
                                        // method used as a value
                                        let ty = TypeExpr::Function { params: sig.params, ret: Box::new(sig.ret) };
                                        let lhs = self.target(dest, ty.clone());
                                        self.emit(e.pos, StmtKind::AllocFunction { lhs: lhs.clone(), method: m });
                                        return Ok(Val::Local(lhs, ty));
                                    }
                                }
                            }
                        }
                        if !fty.is_pointer() {
                            return Ok(Val::Prim);
                        }
                        let lhs = self.target(dest, fty.clone());
                        self.emit(e.pos, StmtKind::FieldLoad { lhs: lhs.clone(), base: b, field: name.clone() });
                        Ok(Val::Local(lhs, self.dest_type(dest, fty)))
                    }
                }
            }
            ExprKind::Index { obj, index } => {
                let base = self.expr(obj, None)?;
                self.expr(index, None)?;
                match base {
                    Val::Local(b, bty) => {
                        let ety = match bty {
                            TypeExpr::Array(t) => *t,
                            _ => TypeExpr::Unknown,
                        };
                        if !ety.is_pointer() {
                            return Ok(Val::Prim);
                        }
                        let lhs = self.target(dest, ety.clone());
                        self.emit(e.pos, StmtKind::FieldLoad { lhs: lhs.clone(), base: b, field: ELEM_FIELD.into() });
                        Ok(Val::Local(lhs, ety))
                    }
                    _ => Ok(Val::Prim),
                }
            }
            ExprKind::Call { callee, args, trailing } => self.call(callee, args, trailing.as_deref(), e.pos, dest),
            ExprKind::Array(elems) => {
                let mut vals = Vec::new();
                for el in elems {
                    vals.push(self.expr(el, None)?);
                }
                let ety = vals.iter().find_map(|v| v.local().map(|_| v.ty())).unwrap_or_else(|| {
                    if vals.is_empty() {
                        TypeExpr::Unknown
                    } else {
                        TypeExpr::prim("number")
                    }
                });
                let ty = TypeExpr::Array(Box::new(ety));
                let lhs = self.target(dest, ty.clone());
                self.emit(e.pos, StmtKind::AllocObject { lhs: lhs.clone(), class: "Array".into(), args: vec![] });
                for v in vals {
                    if let Some(l) = v.local() {
                        let l = l.to_string();
                        self.emit(e.pos, StmtKind::FieldStore { base: lhs.clone(), field: ELEM_FIELD.into(), rhs: l });
                    }
                }
                Ok(Val::Local(lhs.clone(), self.dest_type(dest, ty)))
            }
            ExprKind::Object(props) => {
                let mut vals = Vec::new();
                for (k, v) in props {
                    vals.push((k.clone(), self.expr(v, None)?));
                }
                let lhs = self.target(dest, TypeExpr::Unknown);
                self.emit(e.pos, StmtKind::AllocObject { lhs: lhs.clone(), class: "Object".into(), args: vec![] });
                for (k, v) in vals {
                    if let Some(l) = v.local() {
                        let l = l.to_string();
                        self.emit(e.pos, StmtKind::FieldStore { base: lhs.clone(), field: k, rhs: l });
                    }
                }
                Ok(Val::Local(lhs.clone(), self.dest_type(dest, TypeExpr::Unknown)))
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs, None)?;
                self.expr(rhs, None)?;
                Ok(Val::Prim)
            }
            ExprKind::Unary { expr, .. } => {
                self.expr(expr, None)?;
                Ok(Val::Prim)
            }
            ExprKind::Update { .. } => Ok(Val::Prim),
            ExprKind::Logical { lhs, rhs, .. } => self.join_values(None, lhs, rhs, dest),
            ExprKind::Cond { cond, then, otherwise } => self.join_values(Some(cond), then, otherwise, dest),
            ExprKind::As { expr, ty } => {
                let ty = self.resolve_type(ty);
                let v = self.expr(expr, dest)?;
                Ok(match v {
                    Val::Local(l, _) if ty.is_pointer() => Val::Local(l, ty),
                    Val::Local(..) => Val::Prim,
                    other => other,
                })
            }
        }
    }

    fn join_values(&mut self, cond: Option<&Expr>, a: &Expr, b: &Expr, dest: Option<&str>) -> DResult<Val> {
        if let Some(c) = cond {
            self.expr(c, None)?;
        }
        if let Some(d) = dest {
            let va = self.expr(a, Some(d))?;
            let vb = self.expr(b, Some(d))?;
            return Ok(match (&va, &vb) {
                (Val::Local(..), _) => va,
                (_, Val::Local(..)) => vb,
                (Val::Str(_), _) => va,
                _ => Val::Prim,
            });
        }
        let va = self.expr(a, None)?;
        let vb = self.expr(b, None)?;
        match (&va, &vb) {
            (Val::Local(la, ta), Val::Local(lb, tb)) => {
                let ty = if *ta == TypeExpr::Unknown { tb.clone() } else { ta.clone() };
                let t = self.temp(ty.clone());
                self.emit(a.pos, StmtKind::Assign { lhs: t.clone(), rhs: la.clone() });
                self.emit(b.pos, StmtKind::Assign { lhs: t.clone(), rhs: lb.clone() });
                Ok(Val::Local(t, ty))
            }
            (Val::Local(..), _) => Ok(va),
            (_, Val::Local(..)) => Ok(vb),
            (Val::Str(_), _) => Ok(va),
            _ => Ok(Val::Prim),
        }
    }

    fn ident(&mut self, name: &str, pos: Pos, dest: Option<&str>) -> DResult<Val> {
        if matches!(name, "undefined" | "NaN" | "Infinity") {
            return Ok(Val::Prim);
        }
        match self.resolve(name) {
            Some(r) => self.resolved_value(r, pos, dest),
            None => Err(self.unresolved(name, pos)),
        }
    }

    fn resolved_value(&mut self, r: Resolved, pos: Pos, dest: Option<&str>) -> DResult<Val> {
        match r {
            Resolved::Var(ir, ty) => Ok(if ty.is_pointer() { Val::Local(ir, ty) } else { Val::Prim }),
            Resolved::Function(q) => {
                let sig = self.fn_sig(&q).expect("resolved function has a signature");
                let ty = TypeExpr::Function { params: sig.params, ret: Box::new(sig.ret) };
                let lhs = self.target(dest, ty.clone());
                self.emit(pos, StmtKind::AllocFunction { lhs: lhs.clone(), method: q });
                Ok(Val::Local(lhs, ty))
            }
            Resolved::Enum => Ok(Val::Prim),
            Resolved::Class(c) | Resolved::Namespace(c) => {
                self.warn(pos, format!("`{c}` used as a value is not modeled"));
                Ok(Val::Prim)
            }
        }
    }

    fn args(&mut self, args: &[Expr]) -> DResult<Vec<Operand>> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            out.push(self.expr(a, None)?.operand());
        }
        Ok(out)
    }

    fn alloc_function(&mut self, pos: Pos, lhs: &str, method: &str) {
        self.emit(pos, StmtKind::AllocFunction { lhs: lhs.to_string(), method: method.to_string() });
    }

    /// Lowers a lambda body into its own method; returns the function type.
    fn lambda(
        &mut self,
        name: &str,
        kind: LambdaKind,
        params: &[Param],
        ret: Option<&TypeExpr>,
        body: &LambdaBody,
        pos: Pos,
    ) -> DResult<(TypeExpr, Vec<Capture>)> {
        let mut decl = MethodDecl::new(name, name, MethodKind::Lambda, self.loc(pos));
        decl.is_static = true;
        decl.lexical_this = kind == LambdaKind::Arrow;
        decl.ret = ret.map(|t| self.resolve_type(t)).unwrap_or(TypeExpr::Unknown);
        decl.locals.insert(FN_LOCAL.into(), TypeExpr::named("Function"));
        if kind == LambdaKind::FunctionExpr {
            decl.locals.insert(THIS_LOCAL.into(), TypeExpr::Unknown);
        }
        let class = self.stack.last().and_then(|c| c.class.clone());
        self.begin(decl, class, true);
        self.bind_params(params)?;
        match body {
            LambdaBody::Expr(e) => {
                let v = self.expr(e, None)?;
                if let Some(l) = v.local() {
                    let l = l.to_string();
                    self.emit(e.pos, StmtKind::Return { value: l });
                }
            }
            LambdaBody::Block(stmts) => {
                for s in stmts {
                    self.stmt(s)?;
                }
            }
        }
        let param_types: Vec<TypeExpr> = self.cx().decl.params.iter().map(|p| p.ty.clone()).collect();
        let ret_ty = self.cx().decl.ret.clone();
        let (_, captures) = self.finish();
        Ok((TypeExpr::Function { params: param_types, ret: Box::new(ret_ty) }, captures))
    }

    // ------------------------------------------------------------------ calls

    fn call(
        &mut self,
        callee: &Expr,
        args: &[Expr],
        trailing: Option<&[Stmt]>,
        pos: Pos,
        dest: Option<&str>,
    ) -> DResult<Val> {
        let v = self.call_inner(callee, args, pos, dest)?;
        if let Some(block) = trailing {
            self.block(block)?;
        }
        Ok(v)
    }

    fn eval_all(&mut self, args: &[Expr]) -> DResult<()> {
        for a in args {
            self.expr(a, None)?;
        }
        Ok(())
    }

    fn call_inner(&mut self, callee: &Expr, args: &[Expr], pos: Pos, dest: Option<&str>) -> DResult<Val> {
        match &callee.kind {
            ExprKind::Ident(name) => match self.resolve(name) {
                Some(Resolved::Var(ir, ty)) => {
                    if !ty.is_pointer() {
                        self.eval_all(args)?;
                        return Ok(Val::Prim);
                    }
                    self.fp_call(&ir, &ty, args, pos, dest)
                }
                Some(Resolved::Function(q)) => self.static_call(&q, None, args, pos, dest),
                Some(Resolved::Class(c)) if self.classes[&c].is_struct => self.component(&c, args, pos),
                Some(Resolved::Class(c)) => Err(self.invalid(pos, format!("class `{c}` called without `new`"))),
                Some(Resolved::Enum) | Some(Resolved::Namespace(_)) => {
                    Err(self.invalid(pos, format!("`{name}` is not callable")))
                }
                None => self.builtin_call(name, args, pos),
            },
            ExprKind::Super => {
                let sup = self.enclosing_superclass();
                match sup.and_then(|s| self.class_method(&s, "constructor")) {
                    Some((q, _)) => self.static_call(&q, Some(THIS_LOCAL.to_string()), args, pos, None),
                    None => {
                        self.eval_all(args)?;
                        Ok(Val::Prim)
                    }
                }
            }
            ExprKind::Member { obj, name } => {
                if matches!(obj.kind, ExprKind::Super) {
                    let sup = self.enclosing_superclass();
                    return match sup.and_then(|s| self.class_method(&s, name)) {
                        Some((q, _)) => self.static_call(&q, Some(THIS_LOCAL.to_string()), args, pos, dest),
                        None => Err(self.unresolved(&format!("super.{name}"), pos)),
                    };
                }
                if let Some(r) = self.resolve_path(callee) {
                    return match r {
                        Resolved::Function(q) => self.static_call(&q, None, args, pos, dest),
                        Resolved::Var(g, ty) if ty.is_pointer() => self.fp_call(&g, &ty, args, pos, dest),
                        _ => Err(self.invalid(pos, "not callable")),
                    };
                }
                if let ExprKind::Ident(root) = &obj.kind {
                    if IGNORED_ROOTS.contains(&root.as_str()) && self.resolve(root).is_none() {
                        self.eval_all(args)?;
                        return Ok(Val::Prim);
                    }
                }
                match self.expr(obj, None)? {
                    Val::Ui => {
                        for a in args {
                            let v = self.expr(a, None)?;
                            if let (true, Some(l)) = (is_ui_event(name), v.local()) {
                                let l = l.to_string();
                                self.emit(pos, StmtKind::FunctionPointerCall { lhs: None, callee: l, args: vec![] });
                            }
                        }
                        Ok(Val::Ui)
                    }
                    Val::Prim | Val::Str(_) => {
                        self.eval_all(args)?;
                        Ok(Val::Prim)
                    }
                    Val::Local(r, ty) => self.method_call(&r, ty, name, args, pos, dest),
                }
            }
            _ => match self.expr(callee, None)? {
                Val::Local(l, ty) => self.fp_call(&l, &ty, args, pos, dest),
                _ => {
                    self.eval_all(args)?;
                    Ok(Val::Prim)
                }
            },
        }
    }

    fn enclosing_superclass(&self) -> Option<String> {
        let c = self.stack.iter().rev().find_map(|cx| cx.class.clone())?;
        self.classes.get(&c)?.superclass.clone()
    }

    fn builtin_call(&mut self, name: &str, args: &[Expr], pos: Pos) -> DResult<Val> {
        if name == "ForEach" || name == "LazyForEach" {
            let Some((first, rest)) = args.split_first() else { return Ok(Val::Ui) };
            let arr = self.expr(first, None)?;
            let item = match &arr {
                Val::Local(a, ty) => {
                    let ety = match ty {
                        TypeExpr::Array(t) => (**t).clone(),
                        _ => TypeExpr::Unknown,
                    };
                    if ety.is_pointer() {
                        let t = self.temp(ety);
                        self.emit(
                            pos,
                            StmtKind::FieldLoad { lhs: t.clone(), base: a.clone(), field: ELEM_FIELD.into() },
                        );
                        Operand::Local(t)
                    } else {
                        Operand::Prim
                    }
                }
                _ => Operand::Prim,
            };
            for g in rest {
                if let Some(l) = self.expr(g, None)?.local() {
                    let l = l.to_string();
                    self.emit(pos, StmtKind::FunctionPointerCall { lhs: None, callee: l, args: vec![item.clone()] });
                }
            }
            return Ok(Val::Ui);
        }
        if CALLBACK_RUNNERS.contains(&name) {
            let mut first = true;
            for a in args {
                let v = self.expr(a, None)?;
                if let (true, Some(l)) = (first, v.local()) {
                    let l = l.to_string();
                    self.emit(pos, StmtKind::FunctionPointerCall { lhs: None, callee: l, args: vec![] });
                }
                first = false;
            }
            return Ok(Val::Prim);
        }
        if IGNORED_FUNCTIONS.contains(&name) {
            self.eval_all(args)?;
            return Ok(Val::Prim);
        }
        if name.starts_with(|c: char| c.is_ascii_uppercase()) {
            // declarative UI builtin (Column, Text, Button, ...)
            self.eval_all(args)?;
            return Ok(Val::Ui);
        }
        Err(self.unresolved(name, pos))
    }

    /// `Child({ a: x })` inside a build method: instantiate, initialize, render.
    fn component(&mut self, class: &str, args: &[Expr], pos: Pos) -> DResult<Val> {
        let t = self.temp(TypeExpr::Named(class.to_string()));
        self.emit(pos, StmtKind::AllocObject { lhs: t.clone(), class: class.to_string(), args: vec![] });
        for a in args {
            if let ExprKind::Object(props) = &a.kind {
                for (k, v) in props {
                    let v = self.expr(v, None)?;
                    if let Some(l) = v.local() {
                        let l = l.to_string();
                        self.emit(pos, StmtKind::FieldStore { base: t.clone(), field: k.clone(), rhs: l });
                    }
                }
            } else {
                self.expr(a, None)?;
            }
        }
        for lc in COMPONENT_LIFECYCLE {
            if let Some((q, _)) = self.class_method(class, lc) {
                self.emit(pos, StmtKind::StaticCall { lhs: None, callee: q, receiver: Some(t.clone()), args: vec![] });
            }
        }
        Ok(Val::Ui)
    }

    fn fp_call(&mut self, callee: &str, ty: &TypeExpr, args: &[Expr], pos: Pos, dest: Option<&str>) -> DResult<Val> {
        let ops = self.args(args)?;
        let ret = ty.return_type();
        let lhs = if ret.is_pointer() { Some(self.target(dest, ret.clone())) } else { None };
        self.emit(pos, StmtKind::FunctionPointerCall { lhs: lhs.clone(), callee: callee.to_string(), args: ops });
        Ok(lhs.map(|l| Val::Local(l, ret)).unwrap_or(Val::Prim))
    }

    fn static_call(
        &mut self,
        callee: &str,
        receiver: Option<String>,
        args: &[Expr],
        pos: Pos,
        dest: Option<&str>,
    ) -> DResult<Val> {
        let ops = self.args(args)?;
        let ret = self.fn_sig(callee).map(|s| s.ret).unwrap_or(TypeExpr::Unknown);
        let lhs = if ret.is_pointer() { Some(self.target(dest, ret.clone())) } else { None };
        self.emit(pos, StmtKind::StaticCall { lhs: lhs.clone(), callee: callee.to_string(), receiver, args: ops });
        Ok(lhs.map(|l| Val::Local(l, ret)).unwrap_or(Val::Prim))
    }

    fn method_call(
        &mut self,
        recv: &str,
        ty: TypeExpr,
        name: &str,
        args: &[Expr],
        pos: Pos,
        dest: Option<&str>,
    ) -> DResult<Val> {
        if let TypeExpr::Array(et) = &ty {
            if let Some(v) = self.array_call(recv, et, name, args, pos, dest)? {
                return Ok(v);
            }
        }
        if let Some(c) = self.user_class(&ty).map(|c| c.name.clone()) {
            if self.class_method(&c, name).is_none() {
                if let Some(ft) = self.class_field(&c, name) {
                    // a function stored in a field: load it, then call through the pointer
                    let t = self.temp(ft.clone());
                    self.emit(
                        pos,
                        StmtKind::FieldLoad { lhs: t.clone(), base: recv.to_string(), field: name.to_string() },
                    );
                    return self.fp_call(&t, &ft, args, pos, dest);
                }
            }
        }
        let ops = self.args(args)?;
        let ret = self.dynamic_ret(&ty, name);
        let lhs = if ret.is_pointer() { Some(self.target(dest, ret.clone())) } else { None };
        self.emit(
            pos,
            StmtKind::DynamicCall {
                lhs: lhs.clone(),
                receiver: recv.to_string(),
                method: name.to_string(),
                args: ops,
                receiver_type: ty,
            },
        );
        Ok(lhs.map(|l| Val::Local(l, ret)).unwrap_or(Val::Prim))
    }

    fn dynamic_ret(&self, ty: &TypeExpr, name: &str) -> TypeExpr {
        match ty {
            TypeExpr::Named(n) if n == "AppStorage" || n == "LocalStorage" => match name {
                "Link" | "link" | "setAndLink" => TypeExpr::Named(LINK_REF_TYPE.into()),
                "Prop" | "prop" | "setAndProp" => TypeExpr::Named(PROP_REF_TYPE.into()),
                "get" => TypeExpr::Unknown,
                _ => TypeExpr::prim("void"),
            },
            TypeExpr::Named(n) if n == LINK_REF_TYPE || n == PROP_REF_TYPE => match name {
                "get" => TypeExpr::Unknown,
                _ => TypeExpr::prim("void"),
            },
            TypeExpr::Named(n) => {
                if let Some((_, sig)) = self.class_method(n, name) {
                    return sig.ret;
                }
                if let Some(d) = self.sdk.lookup(n, name) {
                    return self.resolve_type(&d.ret);
                }
                TypeExpr::Unknown
            }
            TypeExpr::Function { ret, .. } => match name {
                "bind" => ty.clone(),
                "call" | "apply" => (**ret).clone(),
                _ => TypeExpr::Unknown,
            },
            _ => TypeExpr::Unknown,
        }
    }

    /// Array builtins over the single `elem` field; `None` falls back to dynamic dispatch.
    fn array_call(
        &mut self,
        recv: &str,
        elem: &TypeExpr,
        name: &str,
        args: &[Expr],
        pos: Pos,
        dest: Option<&str>,
    ) -> DResult<Option<Val>> {
        let load = |d: &mut Self, dest: Option<&str>| -> Option<String> {
            if !elem.is_pointer() {
                return None;
            }
            let t = d.target(dest, elem.clone());
            d.emit(pos, StmtKind::FieldLoad { lhs: t.clone(), base: recv.to_string(), field: ELEM_FIELD.into() });
            Some(t)
        };
        match name {
            "push" | "unshift" => {
                for a in args {
                    if let Some(l) = self.expr(a, None)?.local() {
                        let l = l.to_string();
                        self.emit(
                            pos,
                            StmtKind::FieldStore { base: recv.to_string(), field: ELEM_FIELD.into(), rhs: l },
                        );
                    }
                }
                Ok(Some(Val::Prim))
            }
            "pop" | "shift" | "at" => {
                self.eval_all(args)?;
                Ok(Some(match load(self, dest) {
                    Some(t) => Val::Local(t, elem.clone()),
                    None => Val::Prim,
                }))
            }
            "forEach" | "map" | "filter" | "find" | "some" | "every" | "findIndex" | "sort" => {
                let item = load(self, None);
                let mut mapped = None;
                for a in args {
                    if let Some(cb) = self.expr(a, None)?.local() {
                        let cb = cb.to_string();
                        let out = if name == "map" { Some(self.temp(TypeExpr::Unknown)) } else { None };
                        let ops = vec![item.clone().map(Operand::Local).unwrap_or(Operand::Prim)];
                        self.emit(pos, StmtKind::FunctionPointerCall { lhs: out.clone(), callee: cb, args: ops });
                        mapped = out.or(mapped);
                    }
                }
                Ok(Some(match name {
                    "forEach" | "some" | "every" | "findIndex" => Val::Prim,
                    "find" => item.map(|t| Val::Local(t, elem.clone())).unwrap_or(Val::Prim),
                    _ => {
                        if let Some(m) = mapped {
                            self.emit(
                                pos,
                                StmtKind::FieldStore { base: recv.to_string(), field: ELEM_FIELD.into(), rhs: m },
                            );
                        }
                        Val::Local(
                            recv.to_string(),
                            TypeExpr::Array(Box::new(if name == "map" { TypeExpr::Unknown } else { elem.clone() })),
                        )
                    }
                }))
            }
            "slice" | "concat" | "reverse" => {
                self.eval_all(args)?;
                Ok(Some(Val::Local(recv.to_string(), TypeExpr::Array(Box::new(elem.clone())))))
            }
            "indexOf" | "includes" | "join" | "lastIndexOf" | "splice" | "fill" => {
                self.eval_all(args)?;
                Ok(Some(Val::Prim))
            }
            _ => Ok(None),
        }
    }
}

fn storage_decorator(f: &FieldAst) -> Option<(&Decorator, Option<String>)> {
    f.decorators
        .iter()
        .find(|d| d.name == "StorageProp" || d.name == "StorageLink")
        .map(|d| (d, d.string_arg().map(str::to_string)))
}

fn infer_literal_type(init: Option<&Expr>) -> TypeExpr {
    match init.map(|e| &e.kind) {
        Some(ExprKind::Num(_)) => TypeExpr::prim("number"),
        Some(ExprKind::Str(_)) => TypeExpr::prim("string"),
        Some(ExprKind::Bool(_)) => TypeExpr::prim("boolean"),
        Some(ExprKind::New { class, .. }) => TypeExpr::Named(class.clone()),
        Some(ExprKind::Lambda { .. }) => TypeExpr::named("Function"),
        Some(ExprKind::Array(_)) => TypeExpr::Array(Box::new(TypeExpr::Unknown)),
        _ => TypeExpr::Unknown,
    }
}
