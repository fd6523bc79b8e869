// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use minipta::canon::{canonicalize, erase_var_contexts};
use minipta::context::{ContextInterner, ContextSelector, EMPTY_CTX};
use minipta::{analyze, AnalysisConfig, SelectorKind};
use proptest::prelude::*;

#[test]
fn empty_context_is_interned_first() {
    let mut i = ContextInterner::new();
    assert_eq!(i.intern(vec![]), EMPTY_CTX);
    assert_eq!(i.len(), 1);
    let a = i.intern(vec![3, 1]);
    assert_eq!(i.intern(vec![3, 1]), a);
    assert_ne!(i.intern(vec![1, 3]), a);
    assert_eq!(i.get(a), &[3, 1]);
}

#[test]
fn call_string_keeps_the_k_most_recent_sites() {
    let mut i = ContextInterner::new();
    let sel = ContextSelector::new(SelectorKind::Callsite, 2).unwrap();
    let c1 = sel.select_callee_context(&mut i, 10, EMPTY_CTX, 0, 1);
    assert_eq!(i.get(c1), &[10]);
    let c2 = sel.select_callee_context(&mut i, 20, c1, 1, 2);
    assert_eq!(i.get(c2), &[20, 10]);
    let c3 = sel.select_callee_context(&mut i, 30, c2, 2, 3);
    assert_eq!(i.get(c3), &[30, 20]);
}

#[test]
fn function_selector_pushes_the_caller() {
    let mut i = ContextInterner::new();
    let sel = ContextSelector::new(SelectorKind::Function, 1).unwrap();
    let c = sel.select_callee_context(&mut i, 10, EMPTY_CTX, 4, 9);
    assert_eq!(i.get(c), &[4]);
}

#[test]
fn depth_zero_and_insensitive_use_the_empty_context() {
    let mut i = ContextInterner::new();
    for sel in [
        ContextSelector::new(SelectorKind::Callsite, 0).unwrap(),
        ContextSelector::new(SelectorKind::Insensitive, 3).unwrap(),
    ] {
        assert_eq!(sel.select_callee_context(&mut i, 10, EMPTY_CTX, 0, 1), EMPTY_CTX);
    }
    assert!(ContextSelector::new(SelectorKind::Callsite, 6).is_err());
}

#[test]
fn deeper_contexts_refine_the_insensitive_result() {
    for path in corpus_files() {
        let program = load_path(&path);
        let run = |c: AnalysisConfig| {
            let r = analyze(&program, &c).expect("analysis finishes");
            let canon = canonicalize(&r, &program);
            (erase_var_contexts(&canon), r.call_graph.erase_contexts())
        };
        let (flat, flat_cg) = run(config(0));
        let (insens, insens_cg) = run(AnalysisConfig { selector: SelectorKind::Insensitive, ..config(2) });
        assert_eq!(flat, insens, "{}", path.display());
        assert_eq!(flat_cg, insens_cg, "{}", path.display());
        for k in 1..=3 {
            let (deep, deep_cg) = run(config(k));
            for (var, objs) in &deep {
                let coarse = flat.get(var).cloned().unwrap_or_default();
                assert!(
                    objs.is_subset(&coarse),
                    "{} k={k}: {var:?} gained {:?}",
                    path.display(),
                    objs.difference(&coarse)
                );
            }
            assert!(deep_cg.is_subset(&flat_cg), "{} k={k}: call graph grew", path.display());
        }
    }
}

proptest! {
    #[test]
    fn selected_contexts_respect_k(
        k in 0usize..=5,
        sites in prop::collection::vec(0u32..50, 1..12),
        function in any::<bool>(),
    ) {
        let kind = if function { SelectorKind::Function } else { SelectorKind::Callsite };
        let sel = ContextSelector::new(kind, k).unwrap();
        let mut i = ContextInterner::new();
        let mut ctx = EMPTY_CTX;
        let mut history: Vec<u32> = Vec::new();
        for &s in &sites {
            ctx = sel.select_callee_context(&mut i, s, ctx, s, s + 1);
            history.insert(0, s);
            let expected: Vec<u32> = history.iter().take(k).copied().collect();
            prop_assert_eq!(i.get(ctx), expected.as_slice());
            prop_assert_eq!(i.intern(expected.clone()), ctx);
        }
    }
}
