// SPDX-License-Identifier: Apache-2.0

//! Source-level pipeline: lexing, parsing, desugaring into three-address
//! IR, and entry-point collection.

pub mod ast;
mod desugar;
mod entries;
pub mod lexer;
mod parser;
pub mod pretty;
pub mod types;

use thiserror::Error;

pub use crate::Diagnostic;
pub use desugar::{desugar, desugar_modules};
pub use entries::{collect_entries, EntryConfig};
pub use parser::parse_module;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("{file}:{line}:{col}: syntax error: expected {}, found {found}", .expected.join(" or "))]
    Syntax { file: String, line: u32, col: u32, expected: Vec<String>, found: String },
    #[error("{file}:{line}:{col}: duplicate declaration of `{name}`")]
    Duplicate { file: String, line: u32, col: u32, name: String },
    #[error("{file}:{line}:{col}: unresolved symbol `{name}`")]
    Unresolved { file: String, line: u32, col: u32, name: String },
    #[error("{file}:{line}:{col}: {message}")]
    Invalid { file: String, line: u32, col: u32, message: String },
    #[error("inheritance cycle through class `{0}`")]
    InheritanceCycle(String),
    #[error("no analysis entries found; pass explicit entries (e.g. `--entries main`)")]
    NoEntries,
    #[error("entry `{0}` does not name a free function or Class.method")]
    UnknownEntry(String),
}

/// Parses and desugars a set of source files as one program (flat namespace).
pub fn load_sources(
    sources: &[(String, String)],
    sdk: &crate::sdk::SdkDecls,
) -> Result<(crate::ir::IrProgram, Vec<Diagnostic>), FrontendError> {
    let mut modules = Vec::with_capacity(sources.len());
    for (path, text) in sources {
        modules.push(parse_module(text, path)?);
    }
    let mut warnings: Vec<Diagnostic> = modules.iter().flat_map(|m| m.warnings.iter().cloned()).collect();
    let (program, more) = desugar_modules(&modules, sdk)?;
    warnings.extend(more);
    Ok((program, warnings))
}
