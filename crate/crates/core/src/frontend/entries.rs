// SPDX-License-Identifier: Apache-2.0

//! Entry-point collection and the synthetic `@dummyMain`.

use std::collections::BTreeSet;

use super::desugar::GLOBAL_OBJECT_CLASS;
use super::types::TypeExpr;
use super::FrontendError;
use crate::ir::*;

const COMPONENT_LIFECYCLE: &[&str] =
    &["aboutToAppear", "build", "onPageShow", "onPageHide", "onBackPress", "aboutToDisappear"];
const ABILITY_LIFECYCLE: &[&str] =
    &["onCreate", "onWindowStageCreate", "onForeground", "onBackground", "onWindowStageDestroy", "onDestroy"];
const ABILITY_BASE: &str = "UIAbility";

#[derive(Debug, Clone, Default)]
pub struct EntryConfig {
    /// Free function names or `Class.method` names invoked in addition to lifecycle methods.
    pub explicit: Vec<String>,
    /// Skip lifecycle discovery and use only the explicit list.
    pub explicit_only: bool,
}

struct Builder<'p> {
    program: &'p mut IrProgram,
    decl: MethodDecl,
    temps: u32,
}

impl Builder<'_> {
    fn emit(&mut self, kind: StmtKind) {
        let id = self.program.statements.len() as StmtId;
        let loc = Loc { file: DUMMY_MAIN.into(), line: 0, col: id };
        self.program.statements.push(IrStatement { id, method: DUMMY_MAIN.into(), loc, kind });
        self.decl.body.push(id);
    }

    fn instance(&mut self, class: &str) -> String {
        self.temps += 1;
        let name = format!("$c{}", self.temps);
        self.decl.locals.insert(name.clone(), TypeExpr::Named(class.to_string()));
        self.emit(StmtKind::AllocObject { lhs: name.clone(), class: class.to_string(), args: vec![] });
        name
    }

    fn call(&mut self, callee: &str, receiver: Option<String>) {
        let arity = self.program.method_by_name(callee).map(MethodDecl::arity).unwrap_or(0);
        self.emit(StmtKind::StaticCall {
            lhs: None,
            callee: callee.to_string(),
            receiver,
            args: vec![Operand::Prim; arity],
        });
    }
}

/// Appends `@dummyMain` to `program` and returns the entry methods it invokes.
///
/// Entries are non-empty module initializers (top-level code), the lifecycle
/// methods of `@Entry` structs, of `@Component` structs that no other code
/// instantiates, and of `UIAbility` subclasses, plus whatever
/// `config.explicit` names.
pub fn collect_entries(program: &mut IrProgram, config: &EntryConfig) -> Result<Vec<String>, FrontendError> {
    if program.method_id(DUMMY_MAIN).is_some() {
        return Ok(program.entries.clone());
    }
    let instantiated: BTreeSet<String> = program
        .statements
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::AllocObject { class, .. } => Some(class.clone()),
            _ => None,
        })
        .collect();
    let uses_global = |p: &IrProgram, g: &str| {
        p.statements
            .iter()
            .any(|s| s.locals().contains(&g) && p.method_by_name(&s.method).is_some_and(|m| p.resolves_to_global(m, g)))
    };
    let needs_global_object = uses_global(program, "globalThis");
    let needs_app_storage = uses_global(program, "AppStorage");

    let mut roots: Vec<(String, &[&str])> = Vec::new();
    if !config.explicit_only {
        for c in &program.classes {
            if c.builtin {
                continue;
            }
            let component = c.is_struct
                && (c.has_decorator("Entry") || (c.has_decorator("Component") && !instantiated.contains(&c.name)));
            if component {
                roots.push((c.name.clone(), COMPONENT_LIFECYCLE));
            } else if c.name != ABILITY_BASE && program.is_subclass_of(&c.name, ABILITY_BASE) {
                roots.push((c.name.clone(), ABILITY_LIFECYCLE));
            }
        }
    }

    let mut explicit = Vec::new();
    for e in &config.explicit {
        match program.method_by_name(e) {
            Some(m) if m.kind == MethodKind::Function => explicit.push((e.clone(), None)),
            Some(m) if m.owner.is_some() => explicit.push((e.clone(), m.owner.clone().filter(|_| !m.is_static))),
            _ => return Err(FrontendError::UnknownEntry(e.clone())),
        }
    }

    let mut decl = MethodDecl::new(
        DUMMY_MAIN,
        DUMMY_MAIN,
        MethodKind::DummyMain,
        Loc { file: DUMMY_MAIN.into(), line: 0, col: 0 },
    );
    decl.is_static = true;
    decl.ret = TypeExpr::prim("void");
    let inits: Vec<String> = program
        .methods
        .iter()
        .filter(|m| m.kind == MethodKind::Init && !m.body.is_empty())
        .map(|m| m.name.clone())
        .collect();
    let mut b = Builder { program, decl, temps: 0 };
    if needs_global_object {
        b.emit(StmtKind::AllocObject { lhs: "globalThis".into(), class: GLOBAL_OBJECT_CLASS.into(), args: vec![] });
    }
    if needs_app_storage {
        b.emit(StmtKind::AllocObject { lhs: "AppStorage".into(), class: "AppStorage".into(), args: vec![] });
    }
    let mut entries = Vec::new();
    for init in &inits {
        b.call(init, None);
        entries.push(init.clone());
    }
    for (class, lifecycle) in &roots {
        let recv = b.instance(class);
        for lc in lifecycle.iter() {
            if let Ok(id) = b.program.dispatch(class, lc) {
                let name = b.program.method(id).name.clone();
                b.call(&name, Some(recv.clone()));
                entries.push(name);
            }
        }
    }
    for (name, owner) in explicit {
        let recv = owner.map(|o| b.instance(&o));
        b.call(&name, recv);
        entries.push(name);
    }
    let Builder { program, decl, .. } = b;
    if entries.is_empty() {
        // roll back the statements we appended
        let first = decl.body.first().copied();
        if let Some(f) = first {
            program.statements.truncate(f as usize);
        }
        return Err(FrontendError::NoEntries);
    }
    program.methods.push(decl);
    program.entries = entries.clone();
    program.reindex();
    Ok(entries)
}
