// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for mini-ArkTS.
//!
//! Semicolons are optional. A `(` or `[` only continues an expression when
//! it sits on the same line as the previous token; `.` chains may span
//! lines, which is how ArkUI attribute chains are usually written.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::types::TypeExpr;
use super::FrontendError;
use crate::{Diagnostic, Severity};

const KNOWN_DECORATORS: &[&str] = &[
    "Entry",
    "Component",
    "State",
    "Prop",
    "Link",
    "Provide",
    "Consume",
    "ObjectLink",
    "Observed",
    "Watch",
    "Builder",
    "BuilderParam",
    "Styles",
    "Extend",
    "Reusable",
    "Preview",
    "CustomDialog",
    "StorageProp",
    "StorageLink",
    "Track",
    "Sendable",
    "Concurrent",
    "Local",
    "Param",
    "Once",
    "Event",
    "ComponentV2",
    "ObservedV2",
    "Trace",
    "Computed",
    "Monitor",
];

const MODIFIERS: &[&str] =
    &["private", "public", "protected", "readonly", "static", "async", "abstract", "declare", "override"];

pub fn parse_module(source: &str, path: &str) -> Result<SourceModule, FrontendError> {
    let tokens = tokenize(source, path)?;
    let mut p = Parser { toks: tokens, pos: 0, file: path.to_string(), lambdas: 0, warnings: Vec::new() };
    let items = p.items_until_eof()?;
    check_unique_declarations(&items, path)?;
    Ok(SourceModule { path: path.to_string(), items, warnings: p.warnings, lambda_count: p.lambdas })
}

fn check_unique_declarations(items: &[Item], file: &str) -> Result<(), FrontendError> {
    let mut seen = HashSet::new();
    for it in items {
        let (name, pos) = match it {
            Item::Namespace(ns) => {
                check_unique_declarations(&ns.items, file)?;
                // namespaces may be reopened
                continue;
            }
            Item::Class(c) => {
                let mut methods = HashSet::new();
                for m in &c.methods {
                    if !methods.insert(m.name.as_str()) {
                        return Err(FrontendError::Duplicate {
                            file: file.to_string(),
                            line: m.pos.line,
                            col: m.pos.col,
                            name: format!("{}.{}", c.name, m.name),
                        });
                    }
                }
                (c.name.as_str(), c.pos)
            }
            Item::Function(f) => (f.name.as_str(), f.pos),
            Item::Stmt(_) => continue,
        };
        if !seen.insert(name) {
            return Err(FrontendError::Duplicate {
                file: file.to_string(),
                line: pos.line,
                col: pos.col,
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: String,
    lambdas: u32,
    warnings: Vec<Diagnostic>,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn here(&self) -> Pos {
        let t = self.token();
        Pos { line: t.line, col: t.col }
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.token();
        Err(FrontendError::Syntax {
            file: self.file.clone(),
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(&[&format!("`{p}`")])
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn skip_semis(&mut self) {
        while self.eat_punct(";") {}
    }

    /// Skips a balanced `{...}`, `(...)` or `<...>` group starting at the current token.
    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect_punct(match open {
            "{" => "{",
            "(" => "(",
            "<" => "<",
            _ => "[",
        })?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                Tok::Eof => return self.error(&[&format!("`{close}`")]),
                Tok::Punct(p) if *p == open => depth += 1,
                Tok::Punct(p) if *p == close => depth -= 1,
                Tok::Punct("=>") if open == "<" => {}
                _ => {}
            }
            self.advance();
        }
        Ok(())
    }

    // ---------------------------------------------------------------- items

    fn items_until_eof(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        loop {
            self.skip_semis();
            if matches!(self.peek(), Tok::Eof) {
                return Ok(items);
            }
            if let Some(it) = self.item()? {
                items.push(it);
            }
        }
    }

    fn items_until_brace(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                return Ok(items);
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.error(&["`}`"]);
            }
            if let Some(it) = self.item()? {
                items.push(it);
            }
        }
    }

    fn decorators(&mut self) -> PResult<Vec<Decorator>> {
        let mut out = Vec::new();
        while self.is_punct("@") {
            let pos = self.here();
            self.advance();
            let name = self.expect_ident()?;
            let mut args = Vec::new();
            if self.is_punct("(") && !self.token().newline_before {
                args = self.call_args()?;
            }
            if !KNOWN_DECORATORS.contains(&name.as_str()) {
                self.warnings.push(Diagnostic {
                    severity: Severity::Warning,
                    file: self.file.clone(),
                    line: pos.line,
                    col: pos.col,
                    message: format!("unknown decorator @{name}"),
                });
            }
            out.push(Decorator { name, args, pos });
        }
        Ok(out)
    }

    fn item(&mut self) -> PResult<Option<Item>> {
        let decorators = self.decorators()?;
        while self.eat_kw("export") || self.eat_kw("default") || self.eat_kw("declare") {}
        if self.is_kw("import") {
            // flat namespace: imports carry no meaning
            while !self.is_punct(";") && !matches!(self.peek(), Tok::Eof) {
                let before = self.token().line;
                self.advance();
                if self.token().line != before && !self.is_punct(";") {
                    break;
                }
            }
            self.skip_semis();
            return Ok(None);
        }
        if self.eat_kw("interface") {
            self.expect_ident()?;
            while !self.is_punct("{") {
                if matches!(self.peek(), Tok::Eof) {
                    return self.error(&["`{`"]);
                }
                self.advance();
            }
            self.skip_balanced("{", "}")?;
            return Ok(None);
        }
        if self.is_kw("type") && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Punct("="))
        {
            self.advance();
            self.advance();
            self.advance();
            self.type_expr()?;
            self.skip_semis();
            return Ok(None);
        }
        if self.is_kw("enum") {
            self.advance();
            let pos = self.here();
            let name = self.expect_ident()?;
            self.skip_balanced("{", "}")?;
            // enum members are primitive constants
            return Ok(Some(Item::Stmt(Stmt::Let { name, ty: Some(TypeExpr::prim("number")), init: None, pos })));
        }
        if self.is_kw("namespace") || self.is_kw("module") {
            self.advance();
            let pos = self.here();
            let name = self.expect_ident()?;
            self.expect_punct("{")?;
            let items = self.items_until_brace()?;
            return Ok(Some(Item::Namespace(NamespaceAst { name, items, pos })));
        }
        if self.eat_kw("abstract") && !self.is_kw("class") {
            return self.error(&["`class`"]);
        }
        if self.is_kw("class") || self.is_kw("struct") {
            let is_struct = self.is_kw("struct");
            self.advance();
            return Ok(Some(Item::Class(self.class_body(decorators, is_struct)?)));
        }
        if self.is_kw("function") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.advance();
            let f = self.function_rest(decorators, false)?;
            return Ok(Some(Item::Function(f)));
        }
        if !decorators.is_empty() {
            return self.error(&["`class`", "`struct`", "`function`"]);
        }
        Ok(Some(Item::Stmt(self.statement()?)))
    }

    fn class_body(&mut self, decorators: Vec<Decorator>, is_struct: bool) -> PResult<ClassAst> {
        let pos = self.here();
        let name = self.expect_ident()?;
        if self.is_punct("<") {
            self.skip_balanced("<", ">")?;
        }
        let mut superclass = None;
        if self.eat_kw("extends") {
            superclass = Some(self.qualified_name()?);
            if self.is_punct("<") {
                self.skip_balanced("<", ">")?;
            }
        }
        if self.eat_kw("implements") {
            loop {
                self.qualified_name()?;
                if self.is_punct("<") {
                    self.skip_balanced("<", ">")?;
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                break;
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.error(&["`}`"]);
            }
            let decos = self.decorators()?;
            let mut is_static = false;
            while let Tok::Ident(s) = self.peek() {
                // a modifier keyword directly followed by `(`, `:` or `=` is a member name
                if MODIFIERS.contains(&s.as_str())
                    && !matches!(self.peek_at(1), Tok::Punct("(") | Tok::Punct(":") | Tok::Punct("=") | Tok::Punct("?"))
                {
                    if s == "static" {
                        is_static = true;
                    }
                    self.advance();
                } else {
                    break;
                }
            }
            let mpos = self.here();
            let mname = match self.peek().clone() {
                Tok::Ident(s) => {
                    self.advance();
                    s
                }
                Tok::Str(s) => {
                    self.advance();
                    s
                }
                _ => return self.error(&["member name"]),
            };
            let _optional = self.eat_punct("?") || self.eat_punct("!");
            if self.is_punct("(") || self.is_punct("<") {
                if self.is_punct("<") {
                    self.skip_balanced("<", ">")?;
                }
                let params = self.params()?;
                let ret = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
                self.expect_punct("{")?;
                let body = self.block_rest()?;
                methods.push(FunctionAst { name: mname, params, ret, body, is_static, decorators: decos, pos: mpos });
            } else {
                let ty = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                self.skip_semis();
                fields.push(FieldAst { name: mname, ty, init, decorators: decos, is_static, pos: mpos });
            }
        }
        Ok(ClassAst { name, superclass, decorators, is_struct, fields, methods, pos })
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let mut name = self.expect_ident()?;
        while self.is_punct(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.advance();
            name.push('.');
            name.push_str(&self.expect_ident()?);
        }
        Ok(name)
    }

    /// After the `function` keyword.
    fn function_rest(&mut self, decorators: Vec<Decorator>, is_static: bool) -> PResult<FunctionAst> {
        let pos = self.here();
        let name = self.expect_ident()?;
        if self.is_punct("<") {
            self.skip_balanced("<", ">")?;
        }
        let params = self.params()?;
        let ret = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
        self.expect_punct("{")?;
        let body = self.block_rest()?;
        Ok(FunctionAst { name, params, ret, body, is_static, decorators, pos })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            while let Tok::Ident(s) = self.peek() {
                if MODIFIERS.contains(&s.as_str()) && matches!(self.peek_at(1), Tok::Ident(_)) {
                    self.advance();
                } else {
                    break;
                }
            }
            self.eat_punct("...");
            let pos = self.here();
            let name = self.expect_ident()?;
            self.eat_punct("?");
            let ty = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
            if self.eat_punct("=") {
                // default values are ignored
                self.expr()?;
            }
            out.push(Param { name, ty, pos });
            if self.eat_punct(")") {
                return Ok(out);
            }
            if !self.eat_punct(",") {
                return self.error(&["`,`", "`)`"]);
            }
            if self.eat_punct(")") {
                return Ok(out);
            }
        }
    }

    // ---------------------------------------------------------------- types

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        self.eat_punct("|");
        let first = self.type_postfix()?;
        if !self.is_punct("|") {
            return Ok(first);
        }
        let mut members = vec![first];
        while self.eat_punct("|") {
            members.push(self.type_postfix()?);
        }
        Ok(TypeExpr::Union(members))
    }

    fn type_postfix(&mut self) -> PResult<TypeExpr> {
        let mut t = self.type_primary()?;
        while self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.advance();
            self.advance();
            t = TypeExpr::Array(Box::new(t));
        }
        Ok(t)
    }

    fn type_primary(&mut self) -> PResult<TypeExpr> {
        match self.peek().clone() {
            Tok::Punct("(") => {
                if self.paren_followed_by_arrow() {
                    let params = self.params()?;
                    self.expect_punct("=>")?;
                    let ret = self.type_expr()?;
                    Ok(TypeExpr::Function {
                        params: params.into_iter().map(|p| p.ty.unwrap_or(TypeExpr::Unknown)).collect(),
                        ret: Box::new(ret),
                    })
                } else {
                    self.advance();
                    let t = self.type_expr()?;
                    self.expect_punct(")")?;
                    Ok(t)
                }
            }
            Tok::Punct("{") => {
                self.skip_balanced("{", "}")?;
                Ok(TypeExpr::Unknown)
            }
            Tok::Str(_) => {
                self.advance();
                Ok(TypeExpr::prim("string"))
            }
            Tok::Num(_) => {
                self.advance();
                Ok(TypeExpr::prim("number"))
            }
            Tok::Ident(_) => {
                let name = self.qualified_name()?;
                if self.is_punct("<") {
                    if name == "Array" {
                        self.advance();
                        let inner = self.type_expr()?;
                        self.expect_punct(">")?;
                        return Ok(TypeExpr::Array(Box::new(inner)));
                    }
                    self.skip_balanced("<", ">")?;
                }
                Ok(match name.as_str() {
                    "true" | "false" => TypeExpr::prim("boolean"),
                    _ => TypeExpr::named(&name),
                })
            }
            _ => self.error(&["type"]),
        }
    }

    /// At `(`: is the matching `)` followed by `=>` (or `:` type `=>`)?
    fn paren_followed_by_arrow(&self) -> bool {
        let mut depth = 0usize;
        let mut i = self.pos;
        while i < self.toks.len() {
            match &self.toks[i].tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                Tok::Eof => return false,
                _ => {}
            }
            i += 1;
        }
        matches!(self.toks.get(i + 1).map(|t| &t.tok), Some(Tok::Punct("=>")))
    }

    // ---------------------------------------------------------------- statements

    /// After an opening `{`.
    fn block_rest(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                return Ok(out);
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.error(&["`}`"]);
            }
            out.push(self.statement()?);
        }
    }

    fn body_stmt(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_punct("{") {
            self.block_rest()
        } else {
            Ok(vec![self.statement()?])
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let pos = self.here();
        if self.is_kw("let") || self.is_kw("const") || self.is_kw("var") {
            self.advance();
            let name = self.expect_ident()?;
            let ty = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            self.skip_semis();
            return Ok(Stmt::Let { name, ty, init, pos });
        }
        if self.is_kw("function") && matches!(self.peek_at(1), Tok::Ident(_)) {
            // nested function declaration: a local bound to a function-expression lambda
            self.advance();
            let f = self.function_rest(vec![], false)?;
            let id = self.next_lambda();
            let lambda = Expr {
                kind: ExprKind::Lambda {
                    id,
                    kind: LambdaKind::FunctionExpr,
                    params: f.params,
                    ret: f.ret,
                    body: LambdaBody::Block(f.body),
                },
                pos,
            };
            return Ok(Stmt::Let { name: f.name, ty: None, init: Some(lambda), pos });
        }
        if self.eat_kw("return") {
            let value = if self.is_punct(";") || self.is_punct("}") || self.token().newline_before {
                None
            } else {
                Some(self.expr()?)
            };
            self.skip_semis();
            return Ok(Stmt::Return { value, pos });
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = self.body_stmt()?;
            let otherwise = if self.eat_kw("else") { self.body_stmt()? } else { vec![] };
            return Ok(Stmt::If { cond, then, otherwise });
        }
        if self.eat_kw("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.body_stmt()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw("do") {
            let body = self.body_stmt()?;
            if !self.eat_kw("while") {
                return self.error(&["`while`"]);
            }
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            self.skip_semis();
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw("for") {
            return self.for_rest();
        }
        if self.is_kw("break") || self.is_kw("continue") {
            self.advance();
            self.skip_semis();
            return Ok(Stmt::Nop);
        }
        if self.eat_punct("{") {
            return Ok(Stmt::Block(self.block_rest()?));
        }
        if self.eat_punct(";") {
            return Ok(Stmt::Nop);
        }

        let target = self.expr()?;
        for op in ["=", "+=", "-=", "*=", "/=", "%=", "**=", "&&=", "||=", "??="] {
            if self.is_punct(op) {
                let apos = self.here();
                self.advance();
                let value = self.expr()?;
                self.skip_semis();
                return Ok(match op {
                    "=" => Stmt::Assign { target, value, pos: apos },
                    "&&=" | "||=" | "??=" => {
                        // `x ||= v` may leave x alone or store v
                        Stmt::Assign { target, value, pos: apos }
                    }
                    _ => Stmt::Expr(Expr { kind: ExprKind::Update { target: Box::new(target) }, pos: apos }),
                });
            }
        }
        self.end_of_statement()?;
        Ok(Stmt::Expr(target))
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        if self.eat_punct(";") || self.is_punct("}") || matches!(self.peek(), Tok::Eof) || self.token().newline_before {
            self.skip_semis();
            Ok(())
        } else {
            self.error(&["`;`", "end of line"])
        }
    }

    /// After `for`.
    fn for_rest(&mut self) -> PResult<Stmt> {
        self.expect_punct("(")?;
        let is_decl = self.is_kw("let") || self.is_kw("const") || self.is_kw("var");
        if is_decl && matches!(self.peek_at(1), Tok::Ident(_)) {
            let is_of = matches!(self.peek_at(2), Tok::Ident(s) if s == "of" || s == "in")
                || (matches!(self.peek_at(2), Tok::Punct(":")) && self.for_of_after_type());
            if is_of {
                self.advance();
                let pos = self.here();
                let name = self.expect_ident()?;
                let ty = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
                let keyed = self.is_kw("in");
                self.advance(); // of / in
                let iter = self.expr()?;
                self.expect_punct(")")?;
                let body = self.body_stmt()?;
                if keyed {
                    // `for (k in obj)` iterates primitive keys
                    let mut stmts = vec![Stmt::Let { name, ty: Some(TypeExpr::prim("string")), init: None, pos }];
                    stmts.push(Stmt::Expr(iter));
                    stmts.extend(body);
                    return Ok(Stmt::Block(stmts));
                }
                return Ok(Stmt::ForOf { name, ty, iter, body, pos });
            }
        }
        let mut init = Vec::new();
        if !self.eat_punct(";") {
            init.push(self.statement()?);
        }
        let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
        self.expect_punct(";")?;
        let mut step = Vec::new();
        if !self.is_punct(")") {
            let e = self.expr()?;
            if self.eat_punct("=") {
                let value = self.expr()?;
                step.push(Stmt::Assign { pos: e.pos, target: e, value });
            } else {
                step.push(Stmt::Expr(e));
            }
        }
        self.expect_punct(")")?;
        let body = self.body_stmt()?;
        Ok(Stmt::For { init, cond, step, body })
    }

    fn for_of_after_type(&self) -> bool {
        // `for (const x: T of e)`: scan to the `of` before the closing paren
        let mut i = self.pos + 3;
        let mut depth = 0i32;
        while i < self.toks.len() {
            match &self.toks[i].tok {
                Tok::Punct("(") | Tok::Punct("<") | Tok::Punct("[") => depth += 1,
                Tok::Punct(")") | Tok::Punct(">") | Tok::Punct("]") => {
                    if depth == 0 {
                        return false;
                    }
                    depth -= 1
                }
                Tok::Punct("=") | Tok::Punct(";") | Tok::Eof => return false,
                Tok::Ident(s) if depth == 0 && s == "of" => return true,
                _ => {}
            }
            i += 1;
        }
        false
    }

    // ---------------------------------------------------------------- expressions

    fn next_lambda(&mut self) -> u32 {
        let id = self.lambdas;
        self.lambdas += 1;
        id
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.conditional()
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.is_punct("?") {
            let pos = self.here();
            self.advance();
            let then = self.conditional()?;
            self.expect_punct(":")?;
            let otherwise = self.conditional()?;
            return Ok(Expr {
                kind: ExprKind::Cond { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) },
                pos,
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec): (&'static str, u8) = match self.peek() {
                Tok::Punct(p) => match *p {
                    "??" => ("??", 1),
                    "||" => ("||", 2),
                    "&&" => ("&&", 3),
                    "|" => ("|", 4),
                    "^" => ("^", 5),
                    "&" => ("&", 6),
                    "==" | "!=" | "===" | "!==" => (p, 7),
                    "<" | ">" | "<=" | ">=" => (p, 8),
                    "+" | "-" => (p, 9),
                    "*" | "/" | "%" => (p, 10),
                    "**" => ("**", 11),
                    _ => break,
                },
                Tok::Ident(s) if s == "instanceof" || s == "in" => ("instanceof", 8),
                Tok::Ident(s) if s == "as" => ("as", 8),
                _ => break,
            };
            if prec < min_prec || (prec == min_prec && min_prec > 0) {
                break;
            }
            let pos = self.here();
            self.advance();
            if op == "as" {
                let ty = if self.eat_kw("const") { TypeExpr::Unknown } else { self.type_expr()? };
                lhs = Expr { kind: ExprKind::As { expr: Box::new(lhs), ty }, pos };
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = if matches!(op, "||" | "&&" | "??") {
                Expr { kind: ExprKind::Logical { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos }
            } else {
                Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos }
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let op: Option<&'static str> = match self.peek() {
            Tok::Punct("!") => Some("!"),
            Tok::Punct("-") => Some("-"),
            Tok::Punct("+") => Some("+"),
            Tok::Punct("~") => Some("~"),
            Tok::Ident(s) if s == "typeof" || s == "void" || s == "delete" => Some("typeof"),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary { op, expr: Box::new(e) }, pos });
        }
        if self.is_kw("await") {
            self.advance();
            return self.unary();
        }
        if self.is_punct("++") || self.is_punct("--") {
            self.advance();
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Update { target: Box::new(e) }, pos });
        }
        let e = self.postfix()?;
        if (self.is_punct("++") || self.is_punct("--")) && !self.token().newline_before {
            self.advance();
            return Ok(Expr { kind: ExprKind::Update { target: Box::new(e) }, pos });
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            self.eat_punct("...");
            args.push(self.expr()?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            if !self.eat_punct(",") {
                return self.error(&["`,`", "`)`"]);
            }
            if self.eat_punct(")") {
                return Ok(args);
            }
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct(".") || self.is_punct("?.") {
                self.advance();
                let pos = self.here();
                let name = match self.peek().clone() {
                    Tok::Ident(s) => {
                        self.advance();
                        s
                    }
                    _ => return self.error(&["property name"]),
                };
                e = Expr { kind: ExprKind::Member { obj: Box::new(e), name }, pos };
                continue;
            }
            if self.is_punct("!") && !self.token().newline_before && !matches!(self.peek_at(1), Tok::Punct("=")) {
                // non-null assertion
                if !matches!(self.peek_at(1), Tok::Ident(_) | Tok::Num(_) | Tok::Str(_) | Tok::Punct("(")) {
                    self.advance();
                    continue;
                }
            }
            if self.is_punct("(") && !self.token().newline_before {
                let pos = e.pos;
                let args = self.call_args()?;
                let ui_container =
                    matches!(&e.kind, ExprKind::Ident(n) if n.starts_with(|c: char| c.is_ascii_uppercase()));
                let mut trailing = None;
                if ui_container && self.is_punct("{") && !self.token().newline_before {
                    self.advance();
                    trailing = Some(self.block_rest()?);
                }
                e = Expr { kind: ExprKind::Call { callee: Box::new(e), args, trailing }, pos };
                continue;
            }
            if self.is_punct("[") && !self.token().newline_before {
                let pos = self.here();
                self.advance();
                let index = self.expr()?;
                self.expect_punct("]")?;
                e = Expr { kind: ExprKind::Index { obj: Box::new(e), index: Box::new(index) }, pos };
                continue;
            }
            return Ok(e);
        }
    }

    fn lambda_rest(&mut self, pos: Pos, kind: LambdaKind, params: Vec<Param>, id: u32) -> PResult<Expr> {
        let ret = if self.eat_punct(":") { Some(self.type_expr()?) } else { None };
        if kind == LambdaKind::Arrow {
            self.expect_punct("=>")?;
        }
        let body = if self.eat_punct("{") {
            LambdaBody::Block(self.block_rest()?)
        } else if kind == LambdaKind::Arrow {
            LambdaBody::Expr(Box::new(self.conditional()?))
        } else {
            return self.error(&["`{`"]);
        };
        Ok(Expr { kind: ExprKind::Lambda { id, kind, params, ret, body }, pos })
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Num(n), pos })
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Str(s), pos })
            }
            Tok::Punct("(") => {
                if self.arrow_ahead() {
                    let id = self.next_lambda();
                    let params = self.params()?;
                    return self.lambda_rest(pos, LambdaKind::Arrow, params, id);
                }
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => {
                self.advance();
                let mut elems = Vec::new();
                while !self.eat_punct("]") {
                    self.eat_punct("...");
                    elems.push(self.expr()?);
                    if !self.eat_punct(",") {
                        self.expect_punct("]")?;
                        break;
                    }
                }
                Ok(Expr { kind: ExprKind::Array(elems), pos })
            }
            Tok::Punct("{") => {
                self.advance();
                let mut props = Vec::new();
                while !self.eat_punct("}") {
                    let kpos = self.here();
                    let key = match self.peek().clone() {
                        Tok::Ident(s) | Tok::Str(s) => {
                            self.advance();
                            s
                        }
                        Tok::Num(n) => {
                            self.advance();
                            n.to_string()
                        }
                        _ => return self.error(&["property name", "`}`"]),
                    };
                    let value = if self.eat_punct(":") {
                        self.expr()?
                    } else {
                        Expr { kind: ExprKind::Ident(key.clone()), pos: kpos }
                    };
                    props.push((key, value));
                    if !self.eat_punct(",") {
                        self.expect_punct("}")?;
                        break;
                    }
                }
                Ok(Expr { kind: ExprKind::Object(props), pos })
            }
            Tok::Ident(name) => {
                match name.as_str() {
                    "this" => {
                        self.advance();
                        return Ok(Expr { kind: ExprKind::This, pos });
                    }
                    "super" => {
                        self.advance();
                        return Ok(Expr { kind: ExprKind::Super, pos });
                    }
                    "true" | "false" => {
                        self.advance();
                        return Ok(Expr { kind: ExprKind::Bool(name == "true"), pos });
                    }
                    "null" | "undefined" => {
                        self.advance();
                        return Ok(Expr { kind: ExprKind::Null, pos });
                    }
                    "new" => {
                        self.advance();
                        let class = self.qualified_name()?;
                        if self.is_punct("<") {
                            self.skip_balanced("<", ">")?;
                        }
                        let args = if self.is_punct("(") { self.call_args()? } else { vec![] };
                        return Ok(Expr { kind: ExprKind::New { class, args }, pos });
                    }
                    "function" => {
                        self.advance();
                        let id = self.next_lambda();
                        if matches!(self.peek(), Tok::Ident(_)) {
                            self.advance();
                        }
                        let params = self.params()?;
                        return self.lambda_rest(pos, LambdaKind::FunctionExpr, params, id);
                    }
                    _ => {}
                }
                if matches!(self.peek_at(1), Tok::Punct("=>")) {
                    let id = self.next_lambda();
                    self.advance();
                    let params = vec![Param { name, ty: None, pos }];
                    return self.lambda_rest(pos, LambdaKind::Arrow, params, id);
                }
                self.advance();
                Ok(Expr { kind: ExprKind::Ident(name), pos })
            }
            _ => self.error(&["expression"]),
        }
    }

    /// At `(`: does an arrow function start here?
    fn arrow_ahead(&mut self) -> bool {
        if self.paren_followed_by_arrow() {
            return true;
        }
        // `(a: T): R => ...`
        let save = self.pos;
        let saved_warnings = self.warnings.len();
        let ok = self.params().is_ok() && self.eat_punct(":") && self.type_expr().is_ok() && self.is_punct("=>");
        self.pos = save;
        self.warnings.truncate(saved_warnings);
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source_has_no_declarations() {
        let m = parse_module("", "e.mats").unwrap();
        assert_eq!(m.declaration_count(), 0);
        assert!(m.items.is_empty());
    }

    #[test]
    fn let_new_is_single_statement() {
        let m = parse_module("let v = new T()", "a.mats").unwrap();
        assert_eq!(m.items.len(), 1);
        match &m.items[0] {
            Item::Stmt(Stmt::Let { name, init: Some(Expr { kind: ExprKind::New { class, .. }, .. }), .. }) => {
                assert_eq!(name, "v");
                assert_eq!(class, "T");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn struct_with_decorators_and_ui_blocks() {
        let src = r#"
@Entry
@Component
struct Page {
  @StorageProp('func') sharedFunc: Func = new Func(() => 'x');
  build() {
    Column() {
      Button('go')
        .width(100)
        .onClick(() => { this.go() })
    }.height('100%')
  }
  go(): void {}
}
"#;
        let m = parse_module(src, "p.mats").unwrap();
        let c = &m.classes()[0];
        assert!(c.is_struct);
        assert!(c.has_decorator("Entry") && c.has_decorator("Component"));
        assert_eq!(c.fields[0].decorators[0].string_arg(), Some("func"));
        assert_eq!(c.methods.len(), 2);
        assert_eq!(m.lambda_count, 2);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn unknown_decorator_warns() {
        let m = parse_module("@Fancy class A {}", "w.mats").unwrap();
        assert_eq!(m.warnings.len(), 1);
        assert!(m.warnings[0].message.contains("@Fancy"));
    }

    #[test]
    fn syntax_error_carries_position_and_expected() {
        let err = parse_module("class A {\n  m( {}\n}", "bad.mats").unwrap_err();
        match err {
            FrontendError::Syntax { line, expected, .. } => {
                assert_eq!(line, 2);
                assert!(!expected.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typed_arrow_and_ternary_are_distinguished() {
        let m = parse_module("let f = (a: A): B => a\nlet g = c ? (d) : e", "t.mats").unwrap();
        assert_eq!(m.lambda_count, 1);
        assert!(matches!(
            &m.items[1],
            Item::Stmt(Stmt::Let { init: Some(Expr { kind: ExprKind::Cond { .. }, .. }), .. })
        ));
    }

    #[test]
    fn duplicate_declarations_rejected() {
        assert!(matches!(parse_module("class A {}\nclass A {}", "d.mats"), Err(FrontendError::Duplicate { .. })));
        assert!(matches!(parse_module("class A { m() {} m() {} }", "d.mats"), Err(FrontendError::Duplicate { .. })));
    }

    #[test]
    fn control_flow_is_accepted() {
        let src = "function f(a: A) { if (a) { g() } else g(); while (x < 3) { x++ } for (let i = 0; i < 3; i++) {} for (const y of ys) { h(y) } }";
        let m = parse_module(src, "c.mats").unwrap();
        assert_eq!(m.declaration_count(), 1);
    }
}
