// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::*;
use minipta::frontend::ast::{Expr, ExprKind, Item, LambdaBody, SourceModule, Stmt};
use minipta::frontend::{collect_entries, load_sources, parse_module, pretty, EntryConfig, FrontendError};
use minipta::ir::{classify_statement, AllocPattern, CallPattern, OperationPattern, StmtKind};
use minipta::IrProgram;

fn desugar(src: &str) -> IrProgram {
    load_sources(&[("t.mats".to_string(), src.to_string())], &sdk()).expect("loads").0
}

fn patterns(p: &IrProgram, method: &str) -> Vec<OperationPattern> {
    let m = p.method_by_name(method).unwrap_or_else(|| panic!("no method {method}"));
    m.body.iter().map(|&s| classify_statement(p.stmt(s))).collect()
}

#[test]
fn empty_input_has_no_declarations() {
    let m = parse_module("", "empty.mats").expect("empty input parses");
    assert_eq!(m.declaration_count(), 0);
}

#[test]
fn appstorage_example_has_three_declarations() {
    let src = std::fs::read_to_string(corpus_path("shared_function")).unwrap();
    let m = parse_module(&src, "shared_function.mats").expect("parses");
    assert_eq!(m.declaration_count(), 3);
}

#[test]
fn new_expression_becomes_object_allocation() {
    let p = desugar("class T {}\nfunction f() {\n  let v = new T()\n}\n");
    let pats = patterns(&p, "f");
    assert!(pats.contains(&OperationPattern::Alloc(AllocPattern::CreateObject)), "{pats:?}");
    assert!(p.method_by_name("f").unwrap().body.iter().any(|&s| matches!(
        &p.stmt(s).kind,
        StmtKind::AllocObject { lhs, class, .. } if lhs == "v" && class == "T"
    )));
}

#[test]
fn member_call_through_field_is_load_then_dynamic_call() {
    let src = "class H {\n  getMessage(): string {\n    return 'x'\n  }\n}\n\
               class S {\n  sharedFunc: H = new H()\n  run() {\n    this.sharedFunc.getMessage()\n  }\n}\n";
    let p = desugar(src);
    let m = p.method_by_name("S.run").unwrap();
    let kinds: Vec<_> = m.body.iter().map(|&s| classify_statement(p.stmt(s))).collect();
    assert_eq!(kinds, vec![OperationPattern::Load, OperationPattern::Call(CallPattern::Dynamic)]);
}

#[test]
fn statement_classification() {
    let src = "class T {\n  f: T\n  m(): T {\n    return this\n  }\n}\n\
               function g(a: T): T {\n  return a\n}\n\
               function run(x: T) {\n  let a = x\n  a.f = x\n  let b = a.f\n  let c = g(b)\n  let d = c.m()\n  let h = (y: T): T => y\n  let e = h(d)\n}\n";
    let p = desugar(src);
    let pats: BTreeSet<_> = patterns(&p, "run").into_iter().collect();
    for expected in [
        OperationPattern::Assign,
        OperationPattern::Store,
        OperationPattern::Load,
        OperationPattern::Call(CallPattern::Static),
        OperationPattern::Call(CallPattern::Dynamic),
        OperationPattern::Call(CallPattern::FunctionPointer),
        OperationPattern::Alloc(AllocPattern::CreateFunctionPointer),
    ] {
        assert!(pats.contains(&expected), "missing {expected:?} in {pats:?}");
    }
    assert!(patterns(&p, "g").contains(&OperationPattern::ReturnValue));
}

#[test]
fn unresolved_identifier_is_rejected() {
    let err = load_sources(&[("u.mats".into(), "function f() {\n  let a = missing\n}\n".into())], &sdk()).unwrap_err();
    match err {
        FrontendError::Unresolved { name, line, .. } => {
            assert_eq!(name, "missing");
            assert_eq!(line, 2);
        }
        other => panic!("expected unresolved symbol, got {other}"),
    }
}

#[test]
fn syntax_error_reports_position() {
    let err = parse_module("class A {\n  m( {\n}\n", "bad.mats").unwrap_err();
    match err {
        FrontendError::Syntax { file, line, .. } => {
            assert_eq!(file, "bad.mats");
            assert_eq!(line, 2);
        }
        other => panic!("expected syntax error, got {other}"),
    }
}

#[test]
fn duplicate_declaration_is_rejected() {
    let err = parse_module("class A {}\nclass A {}\n", "d.mats")
        .and_then(|m| minipta::frontend::desugar_modules(&[m], &sdk()).map(|_| ()))
        .unwrap_err();
    assert!(matches!(err, FrontendError::Duplicate { .. }), "{err}");
}

#[test]
fn top_level_code_and_lifecycles_become_entries() {
    let p = load_corpus("shared_function");
    assert!(p.dummy_main().is_some());
    assert!(!p.entries.is_empty());

    let mut p = desugar("function main() {}\n");
    let entries =
        collect_entries(&mut p, &EntryConfig { explicit: vec!["main".into()], explicit_only: false }).unwrap();
    assert_eq!(entries, vec!["main".to_string()]);

    let src = "@Entry\n@Component\nstruct A {\n  build() {}\n}\n@Entry\n@Component\nstruct B {\n  build() {}\n}\n";
    let mut p = desugar(src);
    let entries = collect_entries(&mut p, &EntryConfig::default()).unwrap();
    assert!(entries.iter().any(|e| e.starts_with("A.")), "{entries:?}");
    assert!(entries.iter().any(|e| e.starts_with("B.")), "{entries:?}");
}

#[test]
fn no_entries_is_an_error() {
    let mut p = desugar("function lonely() {}\n");
    assert_eq!(collect_entries(&mut p, &EntryConfig::default()).unwrap_err(), FrontendError::NoEntries);
    let mut p = desugar("function lonely() {}\n");
    let unknown = EntryConfig { explicit: vec!["nope".into()], explicit_only: true };
    assert!(matches!(collect_entries(&mut p, &unknown), Err(FrontendError::UnknownEntry(_))));
}

#[test]
fn corpus_ir_is_well_formed_and_survives_json() {
    for path in corpus_files() {
        let p = load_path(&path);
        p.check().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = IrProgram::from_json(&p.to_json()).expect("IR JSON reads back");
        assert_eq!(back.to_json(), p.to_json(), "{}", path.display());
        assert_eq!(back.classification_counts(), p.classification_counts());
    }
}

#[test]
fn printed_ir_desugars_to_the_same_statement_kinds() {
    for path in corpus_files() {
        let src = std::fs::read_to_string(&path).unwrap();
        let (p, _) = load_sources(&[(path.display().to_string(), src)], &sdk()).unwrap();
        let printed = pretty::print_program(&p);
        let (again, _) = load_sources(&[("printed.mats".into(), printed.clone())], &sdk())
            .unwrap_or_else(|e| panic!("{}: printed form does not load: {e}\n{printed}", path.display()));
        assert_eq!(again.classification_counts(), p.classification_counts(), "{}", path.display());
    }
}

/// Allocation expressions as written: `new`, lambdas, array and object
/// literals, and component instantiations.
struct AllocCounter<'a> {
    structs: BTreeSet<&'a str>,
    count: usize,
}

impl AllocCounter<'_> {
    fn stmts(&mut self, ss: &[Stmt]) {
        ss.iter().for_each(|s| self.stmt(s));
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Let { init, .. } => init.iter().for_each(|e| self.expr(e)),
            Stmt::Expr(e) => self.expr(e),
            Stmt::Assign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            Stmt::Return { value, .. } => value.iter().for_each(|e| self.expr(e)),
            Stmt::If { cond, then, otherwise } => {
                self.expr(cond);
                self.stmts(then);
                self.stmts(otherwise);
            }
            Stmt::While { cond, body } => {
                self.expr(cond);
                self.stmts(body);
            }
            Stmt::For { init, cond, step, body } => {
                self.stmts(init);
                cond.iter().for_each(|e| self.expr(e));
                self.stmts(step);
                self.stmts(body);
            }
            Stmt::ForOf { iter, body, .. } => {
                self.expr(iter);
                self.stmts(body);
            }
            Stmt::Block(b) => self.stmts(b),
            Stmt::Nop => {}
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::New { args, .. } => {
                self.count += 1;
                args.iter().for_each(|a| self.expr(a));
            }
            ExprKind::Lambda { body, .. } => {
                self.count += 1;
                match body {
                    LambdaBody::Expr(x) => self.expr(x),
                    LambdaBody::Block(b) => self.stmts(b),
                }
            }
            ExprKind::Array(xs) => {
                self.count += 1;
                xs.iter().for_each(|x| self.expr(x));
            }
            ExprKind::Object(props) => {
                self.count += 1;
                props.iter().for_each(|(_, v)| self.expr(v));
            }
            ExprKind::Call { callee, args, trailing } => {
                let component = matches!(&callee.kind, ExprKind::Ident(n) if self.structs.contains(n.as_str()));
                if component {
                    self.count += 1;
                    for a in args {
                        match &a.kind {
                            ExprKind::Object(props) => props.iter().for_each(|(_, v)| self.expr(v)),
                            _ => self.expr(a),
                        }
                    }
                } else {
                    self.expr(callee);
                    args.iter().for_each(|a| self.expr(a));
                }
                trailing.iter().for_each(|t| self.stmts(t));
            }
            ExprKind::Member { obj, .. } => self.expr(obj),
            ExprKind::Index { obj, index } => {
                self.expr(obj);
                self.expr(index);
            }
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Logical { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            ExprKind::Unary { expr, .. } | ExprKind::As { expr, .. } => self.expr(expr),
            ExprKind::Update { target } => self.expr(target),
            ExprKind::Cond { cond, then, otherwise } => {
                self.expr(cond);
                self.expr(then);
                self.expr(otherwise);
            }
            ExprKind::Ident(_)
            | ExprKind::This
            | ExprKind::Super
            | ExprKind::Num(_)
            | ExprKind::Str(_)
            | ExprKind::Bool(_)
            | ExprKind::Null => {}
        }
    }

    fn items(&mut self, items: &[Item]) {
        for item in items {
            match item {
                Item::Namespace(n) => self.items(&n.items),
                Item::Class(c) => {
                    for f in &c.fields {
                        f.init.iter().for_each(|e| self.expr(e));
                    }
                    c.methods.iter().for_each(|m| self.stmts(&m.body));
                }
                Item::Function(f) => self.stmts(&f.body),
                Item::Stmt(s) => self.stmt(s),
            }
        }
    }
}

fn struct_names(items: &[Item], out: &mut BTreeSet<String>) {
    for item in items {
        match item {
            Item::Namespace(n) => struct_names(&n.items, out),
            Item::Class(c) if c.is_struct => {
                out.insert(c.name.clone());
            }
            _ => {}
        }
    }
}

fn source_allocations(m: &SourceModule) -> usize {
    let mut names = BTreeSet::new();
    struct_names(&m.items, &mut names);
    let mut counter = AllocCounter { structs: names.iter().map(String::as_str).collect(), count: 0 };
    counter.items(&m.items);
    counter.count
}

#[test]
fn every_allocation_expression_yields_one_allocation_statement() {
    for path in corpus_files() {
        let src = std::fs::read_to_string(&path).unwrap();
        let module = parse_module(&src, &path.display().to_string()).unwrap();
        let (p, _) = load_sources(&[(path.display().to_string(), src)], &sdk()).unwrap();
        let allocs =
            p.statements.iter().filter(|s| matches!(classify_statement(s), OperationPattern::Alloc(_))).count();
        assert_eq!(allocs, source_allocations(&module), "{}", path.display());
    }
}
