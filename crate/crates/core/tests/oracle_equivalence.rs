// SPDX-License-Identifier: Apache-2.0

//! The worklist engine against the naive exhaustive solver.

mod common;

use common::*;
use minipta::canon::canonicalize;
use minipta::{analyze, AnalysisConfig, SelectorKind};
use proptest::prelude::*;

fn assert_agrees(name: &str, program: &minipta::IrProgram, config: &AnalysisConfig) {
    let engine = canonicalize(&analyze(program, config).expect("analysis finishes"), program);
    let oracle = minipta_oracle::solve(program, config);
    if engine == oracle {
        return;
    }
    let only_engine: Vec<_> = engine.pts.iter().filter(|(k, v)| oracle.pts.get(*k) != Some(*v)).take(5).collect();
    let only_oracle: Vec<_> = oracle.pts.iter().filter(|(k, v)| engine.pts.get(*k) != Some(*v)).take(5).collect();
    let cg_engine: Vec<_> = engine.call_edges.difference(&oracle.call_edges).take(5).collect();
    let cg_oracle: Vec<_> = oracle.call_edges.difference(&engine.call_edges).take(5).collect();
    panic!(
        "{name} ({} k={} heap={}): engine and oracle differ\n engine pts: {only_engine:#?}\n oracle pts: {only_oracle:#?}\n engine-only edges: {cg_engine:?}\n oracle-only edges: {cg_oracle:?}",
        config.selector, config.k, config.heap_context
    );
}

#[test]
fn corpus_matches_oracle_for_k_up_to_two() {
    for path in corpus_files() {
        let program = load_path(&path);
        for k in 0..=2 {
            assert_agrees(&stem(&path), &program, &config(k));
        }
    }
}

#[test]
fn corpus_matches_oracle_under_other_configurations() {
    for path in corpus_files() {
        let program = load_path(&path);
        let variants = [
            AnalysisConfig { heap_context: true, ..config(2) },
            AnalysisConfig { selector: SelectorKind::Function, ..config(2) },
            AnalysisConfig { selector: SelectorKind::Insensitive, ..config(2) },
            AnalysisConfig { disabled_plugins: ["storage".to_string()].into(), ..config(1) },
            AnalysisConfig { disabled_plugins: ["function".to_string(), "sdk".to_string()].into(), ..config(1) },
            AnalysisConfig { singletons: ["Store".to_string(), "Theme".to_string()].into(), ..config(3) },
        ];
        for c in &variants {
            assert_agrees(&stem(&path), &program, c);
        }
    }
}

/// Random straight-line programs over a small class hierarchy, free
/// functions, lambdas, storage and bind/call.
fn stmt_source(op: u8, a: u8, b: u8, c: u8, in_method: bool) -> String {
    let v = |x: u8| format!("v{}", x % 3);
    match op % 15 {
        0 => format!("{} = {}", v(a), v(b)),
        1 => format!("{} = new {}()", v(a), ["A", "B", "C"][(b % 3) as usize]),
        2 => format!("{}.f = {}", v(a), v(b)),
        3 => format!("{} = {}.f", v(a), v(b)),
        4 => format!("{} = {}.m({})", v(a), v(b), v(c)),
        5 => format!("{} = g{}({}, {})", v(a), c % 3, v(b), v(c)),
        6 => format!("{} = fn0({})", v(a), v(b)),
        7 => format!("fn0 = (x: A): A => {{\n    x.f = {}\n    return {}\n  }}", v(b), v(c)),
        8 => format!("AppStorage.setOrCreate('k{}', {})", c % 2, v(b)),
        9 => format!("{} = AppStorage.Link('k{}')", v(a), c % 2),
        10 => format!("fn0 = fn0.bind({}, {})", v(b), v(c)),
        11 => format!("{} = fn0.call({}, {})", v(a), v(b), v(c)),
        12 => format!("globalThis.slot = {}", v(b)),
        13 => format!("{} = globalThis.slot", v(a)),
        _ if in_method => format!("{} = this", v(a)),
        _ => format!("{} = AppStorage.Prop('k{}')", v(a), c % 2),
    }
}

fn body_source(stmts: &[(u8, u8, u8, u8)], in_method: bool, ret: u8) -> String {
    let mut out = String::from(
        "  let v0: A = new A()\n  let v1: A = p\n  let v2: A = q\n  let fn0: (x: A) => A = (x: A): A => {\n    return x\n  }\n",
    );
    for &(op, a, b, c) in stmts {
        out.push_str("  ");
        out.push_str(&stmt_source(op, a, b, c, in_method));
        out.push('\n');
    }
    out.push_str(&format!("  return v{}\n", ret % 3));
    out
}

type Body = (Vec<(u8, u8, u8, u8)>, u8);

fn program_source(methods: &[Body; 3], functions: &[Body; 3]) -> String {
    let mut src = String::new();
    let classes = [("A", None), ("B", Some("A")), ("C", Some("A"))];
    for (i, (name, sup)) in classes.iter().enumerate() {
        let ext = sup.map(|s| format!(" extends {s}")).unwrap_or_default();
        let field = if sup.is_none() { "  f: A\n" } else { "" };
        let (stmts, ret) = &methods[i];
        src.push_str(&format!(
            "class {name}{ext} {{\n{field}  m(p: A): A {{\n    let q: A = p\n{}  }}\n}}\n\n",
            body_source(stmts, true, *ret).replace("\n  ", "\n    ").replacen("  let v0", "    let v0", 1)
        ));
    }
    for (i, (stmts, ret)) in functions.iter().enumerate() {
        src.push_str(&format!("function g{i}(p: A, q: A): A {{\n{}}}\n\n", body_source(stmts, false, *ret)));
    }
    src.push_str("g0(new A(), new B())\ng1(new C(), new A())\n");
    src
}

fn body() -> impl Strategy<Value = Body> {
    (prop::collection::vec((0u8..15, 0u8..3, 0u8..3, 0u8..3), 0..7), 0u8..3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn random_programs_match_oracle(
        m0 in body(), m1 in body(), m2 in body(),
        f0 in body(), f1 in body(), f2 in body(),
        k in 0usize..=3,
        heap in any::<bool>(),
        selector in prop_oneof![Just(SelectorKind::Callsite), Just(SelectorKind::Function), Just(SelectorKind::Insensitive)],
    ) {
        let src = program_source(&[m0, m1, m2], &[f0, f1, f2]);
        let program = load_str("random.mats", &src, &[]);
        let config = AnalysisConfig { k, heap_context: heap, selector, ..config(k) };
        let engine = canonicalize(&analyze(&program, &config).expect("analysis finishes"), &program);
        let oracle = minipta_oracle::solve(&program, &config);
        prop_assert_eq!(&engine.call_edges, &oracle.call_edges, "call graphs differ for\n{}", src);
        prop_assert_eq!(&engine.pts, &oracle.pts, "points-to sets differ for\n{}", src);
    }
}
