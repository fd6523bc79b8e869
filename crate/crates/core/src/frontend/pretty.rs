// SPDX-License-Identifier: Apache-2.0

//! Prints an IR program back as mini-ArkTS source.
//!
//! Every method becomes a free function with a mangled name and every local
//! is declared `any`, so re-desugaring the output reproduces the same
//! statement kinds one-for-one.

use std::fmt::Write;

use crate::ir::*;

pub fn mangle(name: &str) -> String {
    if name == THIS_LOCAL {
        return "$this".into();
    }
    name.chars().map(|c| if c.is_alphanumeric() || c == '_' || c == '$' { c } else { '$' }).collect()
}

fn quote(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

pub fn print_program(p: &IrProgram) -> String {
    let mut out = String::new();
    for g in &p.globals {
        if g.name != "globalThis" && g.name != "AppStorage" {
            let _ = writeln!(out, "let {}: any", mangle(&g.name));
        }
    }
    for c in &p.classes {
        let builtin_name = matches!(c.name.as_str(), "Array" | "Object" | "LocalStorage" | "AppStorage" | "UIAbility");
        if !(c.builtin && builtin_name) {
            let _ = writeln!(out, "class {} {{}}", mangle(&c.name));
        }
    }
    for m in &p.methods {
        if m.kind == MethodKind::DummyMain {
            continue;
        }
        print_method(p, m, &mut out);
    }
    out
}

fn print_method(p: &IrProgram, m: &MethodDecl, out: &mut String) {
    let params: Vec<String> = m.params.iter().map(|pd| format!("{}: any", mangle(&pd.name))).collect();
    let _ = writeln!(out, "function {}({}) {{", mangle(&m.name), params.join(", "));
    for local in m.locals.keys() {
        if !m.params.iter().any(|pd| &pd.name == local) {
            let _ = writeln!(out, "  let {}: any", mangle(local));
        }
    }
    let name = |l: &str| -> String {
        if m.locals.contains_key(l) || !p.is_global(l) {
            mangle(l)
        } else if l == "globalThis" || l == "AppStorage" {
            l.to_string()
        } else {
            mangle(l)
        }
    };
    let args = |a: &[Operand]| -> String {
        a.iter()
            .map(|o| match o {
                Operand::Local(l) => name(l),
                Operand::Str(s) => quote(s),
                Operand::Prim => "0".to_string(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let assign = |lhs: &Option<String>| lhs.as_ref().map(|l| format!("{} = ", name(l))).unwrap_or_default();
    for &sid in &m.body {
        let line = match &p.stmt(sid).kind {
            StmtKind::AllocObject { lhs, class, args: a } => {
                format!("{} = new {}({})", name(lhs), mangle(class), args(a))
            }
            StmtKind::AllocFunction { lhs, method } => format!("{} = {}", name(lhs), mangle(method)),
            StmtKind::Assign { lhs, rhs } => format!("{} = {}", name(lhs), name(rhs)),
            StmtKind::FieldStore { base, field, rhs } => format!("{}.{} = {}", name(base), field, name(rhs)),
            StmtKind::FieldLoad { lhs, base, field } => format!("{} = {}.{}", name(lhs), name(base), field),
            StmtKind::StaticCall { lhs, callee, receiver, args: a } => {
                let mut all = receiver.iter().map(|r| Operand::Local(r.clone())).collect::<Vec<_>>();
                all.extend(a.iter().cloned());
                format!("{}{}({})", assign(lhs), mangle(callee), args(&all))
            }
            StmtKind::DynamicCall { lhs, receiver, method, args: a, .. } => {
                format!("{}{}.{}({})", assign(lhs), name(receiver), method, args(a))
            }
            StmtKind::FunctionPointerCall { lhs, callee, args: a } => {
                format!("{}{}({})", assign(lhs), name(callee), args(a))
            }
            StmtKind::Return { value } => format!("return {}", name(value)),
        };
        let _ = writeln!(out, "  {line}");
    }
    out.push_str("}\n");
}
