// SPDX-License-Identifier: Apache-2.0

//! Context-sensitive, inclusion-based pointer analysis and call-graph
//! construction for mini-ArkTS, a small typed language modeled on ArkTS.
//!
//! Pipeline: [`frontend`] parses and desugars sources into an [`ir::IrProgram`],
//! [`frontend::collect_entries`] adds the synthetic `@dummyMain`, and
//! [`solver::analyze`] runs the worklist engine over a [`pag::Pag`] with the
//! [`plugins`] attached. [`callgraph`] holds the CHA/RTA baselines and the
//! precision/recall harness.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod callgraph;
pub mod canon;
pub mod config;
pub mod context;
pub mod frontend;
pub mod ir;
pub mod pag;
pub mod plugins;
pub mod sdk;
pub mod solver;

pub use config::{AnalysisConfig, SelectorKind};
pub use ir::IrProgram;
pub use solver::{analyze, AnalysisError, AnalysisResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A located message that does not abort the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(file: &str, line: u32, col: u32, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, file: file.to_string(), line, col, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}:{}:{}: {sev}: {}", self.file, self.line, self.col, self.message)
    }
}
