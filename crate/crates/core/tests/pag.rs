// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use minipta::context::EMPTY_CTX;
use minipta::pag::{AllocSite, EdgeLabel, HeapKind, NodeKind, Pag, PtsSet, VarOwner};
use minipta::IrProgram;
use proptest::prelude::*;

fn object(pag: &mut Pag, site: u32) -> u32 {
    pag.alloc_heap_object(AllocSite::Stmt(site), HeapKind::ClassInstance, "T", EMPTY_CTX, None)
}

#[test]
fn nodes_and_objects_are_hash_consed() {
    let mut pag = Pag::new();
    let a = pag.node_for_var("a", VarOwner::Method(0), EMPTY_CTX);
    assert_eq!(pag.node_for_var("a", VarOwner::Method(0), EMPTY_CTX), a);
    assert_ne!(pag.node_for_var("a", VarOwner::Method(1), EMPTY_CTX), a);
    assert_ne!(pag.node_for_var("a", VarOwner::Global, EMPTY_CTX), a);
    let o = object(&mut pag, 7);
    assert_eq!(object(&mut pag, 7), o);
    assert_eq!(pag.find_object(AllocSite::Stmt(7), EMPTY_CTX), Some(o));
    let f = pag.node_for_field(o, "f");
    assert_eq!(pag.node_for_field(o, "f"), f);
    assert!(matches!(pag.node(f), NodeKind::Field { obj, field } if *obj == o && field == "f"));
    assert_eq!(pag.objects().len(), 1);
}

#[test]
fn function_object_is_its_own_origin() {
    let mut pag = Pag::new();
    let _ = object(&mut pag, 1);
    let f = pag.alloc_function(AllocSite::Stmt(2), EMPTY_CTX, 5);
    let func = pag.object(f).func.clone().expect("function object");
    assert_eq!(func.origin, f);
    assert_eq!(func.method, 5);
    assert_eq!(pag.object(f).kind, HeapKind::FunctionObject);
}

#[test]
fn duplicate_edge_is_rejected_and_propagation_reports_new_objects() {
    let mut pag = Pag::new();
    let a = pag.node_for_var("a", VarOwner::Method(0), EMPTY_CTX);
    let b = pag.node_for_var("b", VarOwner::Method(0), EMPTY_CTX);
    let o1 = object(&mut pag, 1);
    let o2 = object(&mut pag, 2);
    assert!(pag.add_edge(a, b, EdgeLabel::Copy));
    assert!(!pag.add_edge(a, b, EdgeLabel::Copy));
    assert_eq!(pag.edge_count(), 1);

    let fresh = pag.insert_pts(a, &PtsSet::from([o1]));
    assert_eq!(fresh, PtsSet::from([o1]));
    assert!(pag.insert_pts(a, &PtsSet::from([o1])).is_empty());
    let out = pag.propagate(a, &fresh);
    assert_eq!(out, BTreeMap::from([(b, PtsSet::from([o1]))]));

    pag.insert_pts(b, &PtsSet::from([o2]));
    let fresh = pag.insert_pts(a, &PtsSet::from([o2]));
    assert!(pag.propagate(a, &fresh).is_empty(), "b already holds o2");
    assert!(pag.subset_violations().is_empty());
}

#[test]
fn cycle_forms_one_component() {
    let mut pag = Pag::new();
    let n: Vec<_> = ["a", "b", "c", "d"].iter().map(|v| pag.node_for_var(v, VarOwner::Method(0), EMPTY_CTX)).collect();
    pag.add_edge(n[0], n[1], EdgeLabel::Copy);
    pag.add_edge(n[1], n[0], EdgeLabel::StorageBackflow);
    pag.add_edge(n[1], n[2], EdgeLabel::Copy);
    pag.add_edge(n[2], n[3], EdgeLabel::Copy);
    let sccs = pag.strongly_connected_components();
    assert_eq!(sccs, vec![vec![n[0], n[1]], vec![n[2]], vec![n[3]]]);
}

#[test]
fn renderers_are_deterministic() {
    let build = || {
        let mut pag = Pag::new();
        let a = pag.node_for_var("a", VarOwner::Global, EMPTY_CTX);
        let o = object(&mut pag, 0);
        let f = pag.node_for_field(o, "f");
        pag.add_edge(a, f, EdgeLabel::Copy);
        pag.insert_pts(a, &PtsSet::from([o]));
        pag
    };
    let mut program = IrProgram::default();
    program.statements.push(minipta::ir::IrStatement {
        id: 0,
        method: "m".into(),
        loc: minipta::ir::Loc { file: "x.mats".into(), line: 1, col: 1 },
        kind: minipta::ir::StmtKind::AllocObject { lhs: "a".into(), class: "T".into(), args: vec![] },
    });
    let (p1, p2) = (build(), build());
    assert_eq!(p1.emit_dot(&program), p2.emit_dot(&program));
    assert_eq!(p1.to_json(&program), p2.to_json(&program));
    assert!(p1.emit_dot(&program).starts_with("digraph"));
}

/// Node count, edges, and seed objects as (node, object) pairs.
type Graph = (usize, Vec<(usize, usize)>, Vec<(usize, u32)>);

fn graph() -> impl Strategy<Value = Graph> {
    (1usize..12).prop_flat_map(|n| {
        (Just(n), prop::collection::vec((0..n, 0..n), 0..30), prop::collection::vec((0..n, 0u32..6), 0..12))
    })
}

fn build(n: usize, edges: &[(usize, usize)]) -> (Pag, Vec<u32>, Vec<u32>) {
    let mut pag = Pag::new();
    let nodes: Vec<u32> = (0..n).map(|i| pag.node_for_var(&format!("v{i}"), VarOwner::Method(0), EMPTY_CTX)).collect();
    let objs: Vec<u32> = (0..6).map(|s| object(&mut pag, s)).collect();
    for &(s, d) in edges {
        pag.add_edge(nodes[s], nodes[d], EdgeLabel::Copy);
    }
    (pag, nodes, objs)
}

fn reachability(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(s, d) in edges {
        r[s][d] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

proptest! {
    #[test]
    fn difference_propagation_reaches_the_transitive_closure((n, edges, seeds) in graph()) {
        let (mut pag, nodes, objs) = build(n, &edges);
        let mut work = VecDeque::new();
        for &(v, o) in &seeds {
            let fresh = pag.insert_pts(nodes[v], &PtsSet::from([objs[o as usize]]));
            if !fresh.is_empty() {
                work.push_back((nodes[v], fresh));
            }
        }
        while let Some((v, delta)) = work.pop_front() {
            for (d, fresh) in pag.propagate(v, &delta) {
                work.push_back((d, fresh));
            }
        }
        let reach = reachability(n, &edges);
        for j in 0..n {
            let expected: PtsSet = seeds
                .iter()
                .filter(|&&(v, _)| reach[v][j])
                .map(|&(_, o)| objs[o as usize])
                .collect();
            prop_assert_eq!(pag.pts(nodes[j]), &expected);
        }
        prop_assert!(pag.subset_violations().is_empty());
    }

    #[test]
    fn components_are_mutual_reachability_classes((n, edges, _seeds) in graph()) {
        let (pag, nodes, _) = build(n, &edges);
        let reach = reachability(n, &edges);
        let sccs = pag.strongly_connected_components();
        let mut seen = BTreeSet::new();
        for comp in &sccs {
            for &a in comp {
                prop_assert!(seen.insert(a), "node in two components");
                for &b in comp {
                    let (i, j) = (nodes.iter().position(|&x| x == a).unwrap(), nodes.iter().position(|&x| x == b).unwrap());
                    prop_assert!(reach[i][j] && reach[j][i]);
                }
            }
        }
        prop_assert_eq!(seen.len(), n);
        for i in 0..n {
            for j in 0..n {
                if reach[i][j] && reach[j][i] {
                    let same = sccs.iter().any(|c| c.contains(&nodes[i]) && c.contains(&nodes[j]));
                    prop_assert!(same);
                }
            }
        }
    }
}
