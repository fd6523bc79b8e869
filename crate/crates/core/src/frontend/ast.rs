// SPDX-License-Identifier: Apache-2.0

//! Surface syntax tree produced by the parser.

use super::types::TypeExpr;
use super::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SourceModule {
    pub path: String,
    pub items: Vec<Item>,
    pub warnings: Vec<Diagnostic>,
    /// Lambdas are numbered in source order; this is how many were seen.
    pub lambda_count: u32,
}

impl SourceModule {
    /// Number of namespace/class/struct/function declarations, recursively.
    pub fn declaration_count(&self) -> usize {
        fn count(items: &[Item]) -> usize {
            items
                .iter()
                .map(|it| match it {
                    Item::Namespace(ns) => 1 + count(&ns.items),
                    Item::Class(_) | Item::Function(_) => 1,
                    Item::Stmt(_) => 0,
                })
                .sum()
        }
        count(&self.items)
    }

    pub fn classes(&self) -> Vec<&ClassAst> {
        fn walk<'a>(items: &'a [Item], out: &mut Vec<&'a ClassAst>) {
            for it in items {
                match it {
                    Item::Namespace(ns) => walk(&ns.items, out),
                    Item::Class(c) => out.push(c),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.items, &mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub enum Item {
    Namespace(NamespaceAst),
    Class(ClassAst),
    Function(FunctionAst),
    Stmt(Stmt),
}

#[derive(Debug, Clone)]
pub struct NamespaceAst {
    pub name: String,
    pub items: Vec<Item>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct Decorator {
    pub name: String,
    pub args: Vec<Expr>,
    pub pos: Pos,
}

impl Decorator {
    /// First argument when it is a string literal, e.g. the key of `@StorageLink('k')`.
    pub fn string_arg(&self) -> Option<&str> {
        match self.args.first().map(|a| &a.kind) {
            Some(ExprKind::Str(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassAst {
    pub name: String,
    pub superclass: Option<String>,
    pub decorators: Vec<Decorator>,
    pub is_struct: bool,
    pub fields: Vec<FieldAst>,
    pub methods: Vec<FunctionAst>,
    pub pos: Pos,
}

impl ClassAst {
    pub fn has_decorator(&self, name: &str) -> bool {
        self.decorators.iter().any(|d| d.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct FieldAst {
    pub name: String,
    pub ty: Option<TypeExpr>,
    pub init: Option<Expr>,
    pub decorators: Vec<Decorator>,
    pub is_static: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub ty: Option<TypeExpr>,
    pub pos: Pos,
}

/// Free function, method or constructor.
#[derive(Debug, Clone)]
pub struct FunctionAst {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<TypeExpr>,
    pub body: Vec<Stmt>,
    pub is_static: bool,
    pub decorators: Vec<Decorator>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Let { name: String, ty: Option<TypeExpr>, init: Option<Expr>, pos: Pos },
    Expr(Expr),
    Assign { target: Expr, value: Expr, pos: Pos },
    Return { value: Option<Expr>, pos: Pos },
    If { cond: Expr, then: Vec<Stmt>, otherwise: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    For { init: Vec<Stmt>, cond: Option<Expr>, step: Vec<Stmt>, body: Vec<Stmt> },
    ForOf { name: String, ty: Option<TypeExpr>, iter: Expr, body: Vec<Stmt>, pos: Pos },
    Block(Vec<Stmt>),
    Nop,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaKind {
    /// `(...) => ...`: `this` is lexically captured.
    Arrow,
    /// `function (...) {...}`: `this` is supplied by the caller.
    FunctionExpr,
}

#[derive(Debug, Clone)]
pub enum LambdaBody {
    Expr(Box<Expr>),
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Ident(String),
    This,
    Super,
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
    New {
        class: String,
        args: Vec<Expr>,
    },
    Lambda {
        id: u32,
        kind: LambdaKind,
        params: Vec<Param>,
        ret: Option<TypeExpr>,
        body: LambdaBody,
    },
    Member {
        obj: Box<Expr>,
        name: String,
    },
    Index {
        obj: Box<Expr>,
        index: Box<Expr>,
    },
    /// `pos` of a call is the position of the callee name.
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
        trailing: Option<Vec<Stmt>>,
    },
    Array(Vec<Expr>),
    Object(Vec<(String, Expr)>),
    /// Arithmetic, comparison and other operators producing primitives.
    Binary {
        op: &'static str,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `||`, `&&`, `??`: the result may be either operand.
    Logical {
        op: &'static str,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: &'static str,
        expr: Box<Expr>,
    },
    Cond {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    As {
        expr: Box<Expr>,
        ty: TypeExpr,
    },
    /// `x++`, `--x`, `x += 1`: numeric updates without pointer effect.
    Update {
        target: Box<Expr>,
    },
}
