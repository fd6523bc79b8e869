// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{call_site_label, Algo, CallGraph, CgTarget};
use crate::ir::{IrProgram, MethodKind, StmtId, StmtKind, DUMMY_MAIN};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("ground truth is not a JSON object of string arrays: {0}")]
    Format(String),
    #[error("ground-truth call site `{0}` does not match any call in the program")]
    UnknownCallsite(String),
    #[error("ground-truth call site `{0}` matches several calls; use a statement id")]
    AmbiguousCallsite(String),
    #[error("ground-truth target `{0}` does not name a method")]
    UnknownTarget(String),
    #[error("ground-truth call site `{0}` has an empty target set")]
    EmptyTargets(String),
}

/// Hand-labeled call edges: call site to the set of true callees.
///
/// Sidecar format: a JSON object mapping either a statement id (`"17"`) or
/// `"<line>:<callee>"` to target names. Targets are qualified method names,
/// `lambda@<line>` for the lambda declared on that line, or `sdk:<api>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub labels: BTreeMap<StmtId, BTreeSet<CgTarget>>,
}

impl GroundTruth {
    pub fn parse(text: &str, program: &IrProgram) -> Result<GroundTruth, CompareError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| CompareError::Format(e.to_string()))?;
        let mut labels = BTreeMap::new();
        for (key, targets) in raw {
            let site = resolve_site(program, &key)?;
            if targets.is_empty() {
                return Err(CompareError::EmptyTargets(key));
            }
            let set = targets.iter().map(|t| resolve_target(program, t)).collect::<Result<BTreeSet<_>, _>>()?;
            labels.entry(site).or_insert_with(BTreeSet::new).extend(set);
        }
        Ok(GroundTruth { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn is_call_like(kind: &StmtKind) -> bool {
    matches!(
        kind,
        StmtKind::StaticCall { .. }
            | StmtKind::DynamicCall { .. }
            | StmtKind::FunctionPointerCall { .. }
            | StmtKind::AllocObject { .. }
    )
}

fn resolve_site(program: &IrProgram, key: &str) -> Result<StmtId, CompareError> {
    if let Ok(id) = key.parse::<StmtId>() {
        return match program.statements.get(id as usize) {
            Some(s) if is_call_like(&s.kind) => Ok(id),
            _ => Err(CompareError::UnknownCallsite(key.to_string())),
        };
    }
    let bad = || CompareError::UnknownCallsite(key.to_string());
    let (line, name) = key.split_once(':').ok_or_else(bad)?;
    let line: u32 = line.trim().parse().map_err(|_| bad())?;
    let hits: Vec<StmtId> = program
        .statements
        .iter()
        .filter(|s| s.method != DUMMY_MAIN && s.loc.line == line && is_call_like(&s.kind))
        .filter(|s| call_site_label(program, s.id).as_deref() == Some(name.trim()))
        .map(|s| s.id)
        .collect();
    match hits.as_slice() {
        [] => Err(bad()),
        [one] => Ok(*one),
        _ => Err(CompareError::AmbiguousCallsite(key.to_string())),
    }
}

fn resolve_target(program: &IrProgram, name: &str) -> Result<CgTarget, CompareError> {
    if let Some(api) = name.strip_prefix("sdk:") {
        return Ok(CgTarget::Sdk(api.to_string()));
    }
    if let Some(line) = name.strip_prefix("lambda@") {
        let line: u32 = line.parse().map_err(|_| CompareError::UnknownTarget(name.to_string()))?;
        let hits: Vec<usize> = program
            .methods
            .iter()
            .enumerate()
            .filter(|(_, m)| m.kind == MethodKind::Lambda && m.loc.line == line)
            .map(|(i, _)| i)
            .collect();
        return match hits.as_slice() {
            [one] => Ok(CgTarget::Method(*one as u32)),
            _ => Err(CompareError::UnknownTarget(name.to_string())),
        };
    }
    program.method_id(name).map(CgTarget::Method).ok_or_else(|| CompareError::UnknownTarget(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub true_positives: usize,
    /// Edges reported at labeled call sites.
    pub reported: usize,
    pub truth: usize,
}

impl PrecisionRecall {
    /// Fraction in `[0, 1]`; no reported edges counts as fully precise.
    pub fn precision(&self) -> f64 {
        if self.reported == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.reported as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.truth as f64
        }
    }

    /// Percentage rounded to one decimal.
    pub fn precision_pct(&self) -> f64 {
        round1(self.precision() * 100.0)
    }

    pub fn recall_pct(&self) -> f64 {
        round1(self.recall() * 100.0)
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Scores the context-erased edges of `cg` at labeled call sites.
pub fn compare(cg: &CallGraph, truth: &GroundTruth) -> PrecisionRecall {
    let mut tp = 0;
    let mut reported = 0;
    for (site, targets) in &truth.labels {
        let found = cg.targets_of(*site);
        reported += found.len();
        tp += found.intersection(targets).count();
    }
    PrecisionRecall { true_positives: tp, reported, truth: truth.len() }
}

/// Context-erased edge totals per algorithm.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EdgeCountTable {
    pub counts: BTreeMap<Algo, usize>,
}

impl EdgeCountTable {
    pub fn merge(&mut self, other: &EdgeCountTable) {
        for (a, n) in &other.counts {
            *self.counts.entry(*a).or_insert(0) += n;
        }
    }

    pub fn get(&self, algo: Algo) -> usize {
        self.counts.get(&algo).copied().unwrap_or(0)
    }

    /// `(a - b) / b` in percent, one decimal; `None` when `b` has no edges.
    pub fn delta_pct(&self, a: Algo, b: Algo) -> Option<f64> {
        let (na, nb) = (self.get(a) as f64, self.get(b) as f64);
        (nb > 0.0).then(|| round1((na - nb) / nb * 100.0))
    }
}

impl fmt::Display for EdgeCountTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, n) in &self.counts {
            writeln!(f, "{a:<4} {n:>6} edges")?;
        }
        for (a, b) in [(Algo::Pta, Algo::Cha), (Algo::Pta, Algo::Rta)] {
            if let Some(d) = self.delta_pct(a, b) {
                writeln!(f, "{a} vs {b}: {d:+.1}%")?;
            }
        }
        Ok(())
    }
}

pub fn edge_counts(cgs: &[&CallGraph]) -> EdgeCountTable {
    let mut t = EdgeCountTable::default();
    for cg in cgs {
        *t.counts.entry(cg.algo).or_insert(0) += cg.erase_contexts().len();
    }
    t
}
