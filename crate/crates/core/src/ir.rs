// SPDX-License-Identifier: Apache-2.0

//! Three-address IR shared by the solver, the baselines and the oracle.
//!
//! Statements live in one program-wide table indexed by [`StmtId`]; methods
//! list the ids of their body. Every operand is a local name that the owning
//! method declares, or a program global. The JSON form produced by
//! [`IrProgram::to_json`] is the documented wire format accepted by
//! `minipta analyze --ir`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::types::TypeExpr;

pub type StmtId = u32;
pub type MethodId = u32;

pub const IR_VERSION: u32 = 1;

/// Name of the synthetic entry method.
pub const DUMMY_MAIN: &str = "@dummyMain";
/// Local receiving every returned value of a method.
pub const RET_LOCAL: &str = "$ret";
/// Local bound to the function object a lambda was invoked through.
pub const FN_LOCAL: &str = "$fn";
pub const THIS_LOCAL: &str = "this";
/// Field holding array elements; arrays are field-insensitive.
pub const ELEM_FIELD: &str = "elem";
/// Prefix of function-object fields holding captured variables.
pub const CAPTURE_PREFIX: &str = "$cap_";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct Loc {
    pub file: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    Local(String),
    /// String literal; storage keys are read from these.
    Str(String),
    /// Any value without pointer content.
    Prim,
}

impl Operand {
    pub fn local(&self) -> Option<&str> {
        match self {
            Operand::Local(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "operands")]
pub enum StmtKind {
    AllocObject { lhs: String, class: String, args: Vec<Operand> },
    AllocFunction { lhs: String, method: String },
    Assign { lhs: String, rhs: String },
    FieldStore { base: String, field: String, rhs: String },
    FieldLoad { lhs: String, base: String, field: String },
    StaticCall { lhs: Option<String>, callee: String, receiver: Option<String>, args: Vec<Operand> },
    DynamicCall { lhs: Option<String>, receiver: String, method: String, args: Vec<Operand>, receiver_type: TypeExpr },
    FunctionPointerCall { lhs: Option<String>, callee: String, args: Vec<Operand> },
    Return { value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IrStatement {
    pub id: StmtId,
    /// Qualified name of the owning method.
    pub method: String,
    pub loc: Loc,
    #[serde(flatten)]
    pub kind: StmtKind,
}

impl IrStatement {
    pub fn is_call(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::StaticCall { .. } | StmtKind::DynamicCall { .. } | StmtKind::FunctionPointerCall { .. }
        )
    }

    /// Locals read or written by the statement.
    pub fn locals(&self) -> Vec<&str> {
        fn args(a: &[Operand]) -> impl Iterator<Item = &str> {
            a.iter().filter_map(Operand::local)
        }
        match &self.kind {
            StmtKind::AllocObject { lhs, args: a, .. } => std::iter::once(lhs.as_str()).chain(args(a)).collect(),
            StmtKind::AllocFunction { lhs, .. } => vec![lhs],
            StmtKind::Assign { lhs, rhs } => vec![lhs, rhs],
            StmtKind::FieldStore { base, rhs, .. } => vec![base, rhs],
            StmtKind::FieldLoad { lhs, base, .. } => vec![lhs, base],
            StmtKind::StaticCall { lhs, receiver, args: a, .. } => {
                lhs.iter().chain(receiver.iter()).map(String::as_str).chain(args(a)).collect()
            }
            StmtKind::DynamicCall { lhs, receiver, args: a, .. } => {
                lhs.iter().map(String::as_str).chain(std::iter::once(receiver.as_str())).chain(args(a)).collect()
            }
            StmtKind::FunctionPointerCall { lhs, callee, args: a } => {
                lhs.iter().map(String::as_str).chain(std::iter::once(callee.as_str())).chain(args(a)).collect()
            }
            StmtKind::Return { value } => vec![value],
        }
    }

    /// Name a human would use for the callee of a call statement.
    pub fn callee_name(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::StaticCall { callee, .. } => Some(callee.rsplit('.').next().unwrap_or(callee)),
            StmtKind::DynamicCall { method, .. } => Some(method),
            StmtKind::FunctionPointerCall { callee, .. } => Some(callee),
            StmtKind::AllocObject { class, .. } => Some(class.rsplit('.').next().unwrap_or(class)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AllocPattern {
    CreateObject,
    CreateFunctionPointer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CallPattern {
    Static,
    Dynamic,
    FunctionPointer,
}

/// The propagation-rule family a statement belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OperationPattern {
    Alloc(AllocPattern),
    Assign,
    Store,
    Load,
    Call(CallPattern),
    /// Feeds the callee's return node, which the call rule propagates to the caller.
    ReturnValue,
}

pub fn classify_statement(stmt: &IrStatement) -> OperationPattern {
    match stmt.kind {
        StmtKind::AllocObject { .. } => OperationPattern::Alloc(AllocPattern::CreateObject),
        StmtKind::AllocFunction { .. } => OperationPattern::Alloc(AllocPattern::CreateFunctionPointer),
        StmtKind::Assign { .. } => OperationPattern::Assign,
        StmtKind::FieldStore { .. } => OperationPattern::Store,
        StmtKind::FieldLoad { .. } => OperationPattern::Load,
        StmtKind::StaticCall { .. } => OperationPattern::Call(CallPattern::Static),
        StmtKind::DynamicCall { .. } => OperationPattern::Call(CallPattern::Dynamic),
        StmtKind::FunctionPointerCall { .. } => OperationPattern::Call(CallPattern::FunctionPointer),
        StmtKind::Return { .. } => OperationPattern::ReturnValue,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Method,
    Constructor,
    Function,
    Lambda,
    /// Top-level statements of one source file.
    Init,
    DummyMain,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub ty: TypeExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub name: String,
    pub short_name: String,
    pub owner: Option<String>,
    pub kind: MethodKind,
    pub is_static: bool,
    /// Arrow lambdas read `this` from their captures; callers never bind it.
    pub lexical_this: bool,
    pub params: Vec<ParamDecl>,
    pub ret: TypeExpr,
    /// Every local the body may mention: params, `this`, temps, `$ret`, `$fn`.
    pub locals: BTreeMap<String, TypeExpr>,
    pub body: Vec<StmtId>,
    pub loc: Loc,
}

impl MethodDecl {
    pub fn new(name: &str, short_name: &str, kind: MethodKind, loc: Loc) -> Self {
        MethodDecl {
            name: name.to_string(),
            short_name: short_name.to_string(),
            owner: None,
            kind,
            is_static: false,
            lexical_this: false,
            params: vec![],
            ret: TypeExpr::Unknown,
            locals: BTreeMap::new(),
            body: vec![],
            loc,
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn has_this(&self) -> bool {
        self.locals.contains_key(THIS_LOCAL)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoratorDecl {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub superclass: Option<String>,
    pub fields: Vec<FieldDecl>,
    /// Qualified names of the declared methods (constructor included).
    pub methods: Vec<String>,
    pub decorators: Vec<DecoratorDecl>,
    pub is_struct: bool,
    /// Runtime-provided classes (`Array`, `LocalStorage`, ...).
    pub builtin: bool,
    pub loc: Loc,
}

impl ClassDecl {
    pub fn has_decorator(&self, name: &str) -> bool {
        self.decorators.iter().any(|d| d.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: TypeExpr,
}

#[derive(Debug, Clone, Default)]
struct ProgramIndex {
    methods: HashMap<String, MethodId>,
    classes: HashMap<String, usize>,
    globals: HashSet<String>,
    subclasses: HashMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IrProgram {
    pub version: u32,
    pub files: Vec<String>,
    pub classes: Vec<ClassDecl>,
    pub methods: Vec<MethodDecl>,
    pub statements: Vec<IrStatement>,
    pub globals: Vec<GlobalDecl>,
    /// Entry methods invoked by `@dummyMain`, filled by entry collection.
    #[serde(default)]
    pub entries: Vec<String>,
    #[serde(skip)]
    index: ProgramIndex,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IrError {
    #[error("unsupported IR version {0}")]
    Version(u32),
    #[error("statement {id}: expected id {expected}")]
    StatementOrder { id: StmtId, expected: StmtId },
    #[error("statement {id}: unknown method `{method}`")]
    UnknownMethod { id: StmtId, method: String },
    #[error("statement {id} at {loc}: `{local}` is not declared in `{method}`")]
    UndeclaredLocal { id: StmtId, loc: Loc, local: String, method: String },
    #[error("statement {id}: unknown class `{class}`")]
    UnknownClass { id: StmtId, class: String },
    #[error("method `{method}`: body lists statement {id} owned elsewhere")]
    ForeignStatement { method: String, id: StmtId },
    #[error("method `{0}` declared twice")]
    DuplicateMethod(String),
    #[error("method `{0}`: duplicate parameter `{1}`")]
    DuplicateParam(String, String),
    #[error("class `{0}`: superclass chain is cyclic or names an unknown class")]
    BadHierarchy(String),
    #[error("malformed IR: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DispatchError {
    #[error("class `{0}` is not declared")]
    UnknownClass(String),
    #[error("no method `{method}` in `{class}` or its superclasses")]
    NotFound { class: String, method: String },
}

impl IrProgram {
    /// Rebuilds lookup tables; call after any structural mutation.
    pub fn reindex(&mut self) {
        let mut ix = ProgramIndex::default();
        for (i, m) in self.methods.iter().enumerate() {
            ix.methods.insert(m.name.clone(), i as MethodId);
        }
        for (i, c) in self.classes.iter().enumerate() {
            ix.classes.insert(c.name.clone(), i);
            if let Some(s) = &c.superclass {
                ix.subclasses.entry(s.clone()).or_default().push(c.name.clone());
            }
        }
        ix.globals = self.globals.iter().map(|g| g.name.clone()).collect();
        self.index = ix;
    }

    pub fn method_id(&self, name: &str) -> Option<MethodId> {
        self.index.methods.get(name).copied()
    }

    pub fn method(&self, id: MethodId) -> &MethodDecl {
        &self.methods[id as usize]
    }

    pub fn method_by_name(&self, name: &str) -> Option<&MethodDecl> {
        self.method_id(name).map(|i| self.method(i))
    }

    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.index.classes.get(name).map(|&i| &self.classes[i])
    }

    pub fn stmt(&self, id: StmtId) -> &IrStatement {
        &self.statements[id as usize]
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.index.globals.contains(name)
    }

    /// Does `local` inside `method` denote a program global?
    pub fn resolves_to_global(&self, method: &MethodDecl, local: &str) -> bool {
        !method.locals.contains_key(local) && self.is_global(local)
    }

    pub fn dummy_main(&self) -> Option<MethodId> {
        self.method_id(DUMMY_MAIN)
    }

    /// Virtual dispatch: first declaration of `method` walking up from `class`.
    pub fn dispatch(&self, class: &str, method: &str) -> Result<MethodId, DispatchError> {
        let mut cur = Some(class.to_string());
        let mut seen = HashSet::new();
        if self.class(class).is_none() {
            return Err(DispatchError::UnknownClass(class.to_string()));
        }
        while let Some(c) = cur {
            if !seen.insert(c.clone()) {
                break;
            }
            let Some(decl) = self.class(&c) else { break };
            let qualified = format!("{c}.{method}");
            if decl.methods.contains(&qualified) {
                if let Some(id) = self.method_id(&qualified) {
                    return Ok(id);
                }
            }
            cur = decl.superclass.clone();
        }
        Err(DispatchError::NotFound { class: class.to_string(), method: method.to_string() })
    }

    pub fn constructor_of(&self, class: &str) -> Option<MethodId> {
        self.dispatch(class, "constructor").ok()
    }

    /// `class` followed by every transitive subclass, in declaration order.
    pub fn cone(&self, class: &str) -> Vec<String> {
        let mut out = vec![class.to_string()];
        let mut i = 0;
        while i < out.len() {
            if let Some(subs) = self.index.subclasses.get(&out[i]) {
                for s in subs {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
            }
            i += 1;
        }
        out
    }

    pub fn is_subclass_of(&self, class: &str, ancestor: &str) -> bool {
        let mut cur = Some(class.to_string());
        let mut steps = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.classes.len() + 1 {
                return false;
            }
            cur = self.class(&c).and_then(|d| d.superclass.clone());
        }
        false
    }

    pub fn field_type(&self, class: &str, field: &str) -> Option<&TypeExpr> {
        let mut cur = Some(class.to_string());
        let mut steps = 0;
        while let Some(c) = cur {
            let decl = self.class(&c)?;
            if let Some(f) = decl.fields.iter().find(|f| f.name == field && !f.is_static) {
                return Some(&f.ty);
            }
            steps += 1;
            if steps > self.classes.len() {
                return None;
            }
            cur = decl.superclass.clone();
        }
        None
    }

    /// Statement-kind multiset, used by the pretty-printer round trip.
    pub fn classification_counts(&self) -> BTreeMap<OperationPattern, usize> {
        let mut out = BTreeMap::new();
        for s in &self.statements {
            *out.entry(classify_statement(s)).or_insert(0) += 1;
        }
        out
    }

    pub fn call_sites(&self) -> impl Iterator<Item = &IrStatement> {
        self.statements.iter().filter(|s| s.is_call())
    }

    /// Validates structural well-formedness: dense ids, declared operands,
    /// known callees and classes, acyclic hierarchy.
    pub fn check(&self) -> Result<(), IrError> {
        if self.version != IR_VERSION {
            return Err(IrError::Version(self.version));
        }
        let mut seen_methods = HashSet::new();
        for m in &self.methods {
            if !seen_methods.insert(m.name.as_str()) {
                return Err(IrError::DuplicateMethod(m.name.clone()));
            }
            let mut params = HashSet::new();
            for p in &m.params {
                if !params.insert(p.name.as_str()) {
                    return Err(IrError::DuplicateParam(m.name.clone(), p.name.clone()));
                }
            }
            for &sid in &m.body {
                match self.statements.get(sid as usize) {
                    Some(s) if s.method == m.name => {}
                    _ => return Err(IrError::ForeignStatement { method: m.name.clone(), id: sid }),
                }
            }
        }
        for c in &self.classes {
            let mut cur = c.superclass.clone();
            let mut steps = 0;
            while let Some(s) = cur {
                steps += 1;
                let Some(sup) = self.class(&s) else { return Err(IrError::BadHierarchy(c.name.clone())) };
                if steps > self.classes.len() {
                    return Err(IrError::BadHierarchy(c.name.clone()));
                }
                cur = sup.superclass.clone();
            }
        }
        for (i, s) in self.statements.iter().enumerate() {
            if s.id as usize != i {
                return Err(IrError::StatementOrder { id: s.id, expected: i as StmtId });
            }
            let Some(m) = self.method_by_name(&s.method) else {
                return Err(IrError::UnknownMethod { id: s.id, method: s.method.clone() });
            };
            for l in s.locals() {
                if !m.locals.contains_key(l) && !self.is_global(l) {
                    return Err(IrError::UndeclaredLocal {
                        id: s.id,
                        loc: s.loc.clone(),
                        local: l.to_string(),
                        method: m.name.clone(),
                    });
                }
            }
            match &s.kind {
                StmtKind::AllocObject { class, .. } if self.class(class).is_none() => {
                    return Err(IrError::UnknownClass { id: s.id, class: class.clone() })
                }
                StmtKind::AllocFunction { method, .. } if self.method_id(method).is_none() => {
                    return Err(IrError::UnknownMethod { id: s.id, method: method.clone() })
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR serializes")
    }

    pub fn from_json(text: &str) -> Result<IrProgram, IrError> {
        let mut p: IrProgram = serde_json::from_str(text).map_err(|e| IrError::Json(e.to_string()))?;
        p.reindex();
        p.check()?;
        Ok(p)
    }

    /// Methods that some `AllocFunction` turns into a value.
    pub fn function_value_targets(&self) -> BTreeSet<MethodId> {
        self.statements
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::AllocFunction { method, .. } => self.method_id(method),
                _ => None,
            })
            .collect()
    }
}
