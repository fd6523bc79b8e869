// SPDX-License-Identifier: Apache-2.0

mod common;

use std::time::{Duration, Instant};

use common::*;
use minipta::canon::canonicalize;
use minipta::frontend::load_sources;
use minipta::{analyze, AnalysisConfig, AnalysisError};

#[test]
fn empty_entry_reaches_a_fixpoint_in_one_iteration() {
    let p = load_str("e.mats", "function main() {}\n", &["main"]);
    let r = analyze(&p, &config(2)).unwrap();
    assert_eq!(r.stats.objects, 0);
    assert_eq!(r.call_graph.erase_contexts().len(), 1);
    assert_eq!(r.stats.iterations, 1);
    assert!(r.diagnostics.is_empty());
}

#[test]
fn program_without_entry_method_is_rejected() {
    let (p, _) = load_sources(&[("n.mats".into(), "function main() {}\n".into())], &sdk()).unwrap();
    assert!(matches!(analyze(&p, &config(2)), Err(AnalysisError::NoEntry)));
}

#[test]
fn shared_function_resolves_to_both_published_lambdas() {
    let p = load_corpus("shared_function");
    let r = analyze(&p, &config(2)).unwrap();
    assert_eq!(targets_at(&p, &r, 9), set(&[&lambda_at(&p, 33), &lambda_at(&p, 40)]));
    assert_eq!(labels(&p, &r, "Func.constructor", "f"), set(&["fn@33", "fn@40"]));
    assert_eq!(labels(&p, &r, "FunctionWriter.updateSharedFunction", "newFunc"), set(&["Func@33", "Func@40"]));
}

#[test]
fn store_then_load_through_the_same_object() {
    let src = "class A {\n  f: B\n}\nclass B {}\n\
               function main() {\n  let a = new A()\n  let b = new B()\n  a.f = b\n  let c = a.f\n  let d = new A()\n  let e = d.f\n}\nmain()\n";
    let p = load_str("s.mats", src, &[]);
    let r = analyze(&p, &config(2)).unwrap();
    assert_eq!(labels(&p, &r, "main", "c"), set(&["B@7"]));
    assert!(labels(&p, &r, "main", "e").is_empty(), "field of a different object");
}

#[test]
fn arguments_bind_positionally_and_returns_flow_back() {
    let src = "class A {}\nclass B {}\n\
               function pick(p: A, q: B): B {\n  return q\n}\n\
               function main() {\n  let x = new A()\n  let y = new B()\n  let z = pick(x, y)\n}\nmain()\n";
    let p = load_str("a.mats", src, &[]);
    let r = analyze(&p, &config(2)).unwrap();
    assert_eq!(labels(&p, &r, "pick", "p"), set(&["A@7"]));
    assert_eq!(labels(&p, &r, "pick", "q"), set(&["B@8"]));
    assert_eq!(labels(&p, &r, "main", "z"), set(&["B@8"]));
}

#[test]
fn virtual_calls_dispatch_on_the_receiver_objects() {
    let p = load_corpus("inheritance_override");
    let r = analyze(&p, &config(2)).unwrap();
    assert_eq!(targets_at(&p, &r, 29), set(&["Circle.area"]));
    assert_eq!(targets_at(&p, &r, 36), set(&["Square.describe"]));
    assert_eq!(targets_at(&p, &r, 37), set(&["Shape.describe"]));
}

#[test]
fn call_strings_separate_the_two_callers_of_identity() {
    let p = load_corpus("identity_two_callers");
    let sensitive = canonicalize(&analyze(&p, &config(1)).unwrap(), &p);
    let flat = canonicalize(&analyze(&p, &config(0)).unwrap(), &p);
    let edges = |c: &minipta::canon::CanonResult| {
        c.call_edges.iter().map(|(s, _, t)| (*s, t.clone())).collect::<std::collections::BTreeSet<_>>()
    };
    assert!(edges(&sensitive).is_subset(&edges(&flat)));
    assert!(edges(&sensitive).len() < edges(&flat).len(), "k=1 should drop the cross-caller edges");
}

#[test]
fn deadline_aborts_the_analysis() {
    let p = load_str("blowup.mats", &blowup_program(60), &[]);
    let c = AnalysisConfig { k: 5, heap_context: true, timeout: Duration::from_millis(200), ..config(5) };
    let start = Instant::now();
    let err = analyze(&p, &c).unwrap_err();
    assert!(matches!(err, AnalysisError::Timeout { .. }), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5), "took {:?}", start.elapsed());
}

#[test]
fn results_are_deterministic() {
    for path in corpus_files() {
        let p = load_path(&path);
        let a = analyze(&p, &config(2)).unwrap();
        let b = analyze(&p, &config(2)).unwrap();
        assert_eq!(canonicalize(&a, &p), canonicalize(&b, &p), "{}", path.display());
        assert_eq!(a.pag.emit_dot(&p), b.pag.emit_dot(&p), "{}", path.display());
        assert_eq!(a.call_graph.to_dot(&p), b.call_graph.to_dot(&p), "{}", path.display());
    }
}

#[test]
fn every_edge_satisfies_the_subset_constraint() {
    for path in corpus_files() {
        let p = load_path(&path);
        for k in [0, 2] {
            let r = analyze(&p, &AnalysisConfig { heap_context: k > 0, ..config(k) }).unwrap();
            assert!(r.pag.subset_violations().is_empty(), "{} k={k}", path.display());
        }
    }
}
