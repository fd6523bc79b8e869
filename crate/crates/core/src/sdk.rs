// SPDX-License-Identifier: Apache-2.0

//! Declarations of opaque framework APIs.
//!
//! One declaration per line: `qualified.name(ParamType, ...) -> ReturnType`.
//! Blank lines and lines starting with `#` or `//` are ignored. The part
//! before the last dot is the receiver: either a global root such as
//! `userFileManager` or a type returned by another declaration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::frontend::types::TypeExpr;

#[derive(Debug, Clone, PartialEq)]
pub struct SdkDecl {
    pub name: String,
    pub params: Vec<TypeExpr>,
    pub ret: TypeExpr,
}

impl SdkDecl {
    pub fn receiver(&self) -> &str {
        self.name.rsplit_once('.').map(|(r, _)| r).unwrap_or("")
    }

    pub fn method(&self) -> &str {
        self.name.rsplit_once('.').map(|(_, m)| m).unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdkDecls {
    decls: BTreeMap<String, SdkDecl>,
}

#[derive(Debug, Error)]
pub enum SdkError {
    #[error("{path}:{line}: malformed SDK declaration `{text}`")]
    Malformed { path: String, line: usize, text: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_type(s: &str) -> TypeExpr {
    let s = s.trim();
    if let Some(inner) = s.strip_suffix("[]") {
        return TypeExpr::Array(Box::new(parse_type(inner)));
    }
    if s.contains('|') {
        return TypeExpr::Union(s.split('|').map(parse_type).collect());
    }
    if s.is_empty() {
        return TypeExpr::Unknown;
    }
    TypeExpr::named(s)
}

impl SdkDecls {
    pub fn parse(text: &str, path: &str) -> Result<SdkDecls, SdkError> {
        let mut decls = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
                continue;
            }
            let bad = || SdkError::Malformed { path: path.to_string(), line: i + 1, text: line.to_string() };
            let (sig, ret) = line.split_once("->").ok_or_else(bad)?;
            let (name, rest) = sig.split_once('(').ok_or_else(bad)?;
            let params_text = rest.trim().strip_suffix(')').ok_or_else(bad)?;
            let name = name.trim();
            if name.is_empty() || !name.contains('.') {
                return Err(bad());
            }
            let params =
                if params_text.trim().is_empty() { vec![] } else { params_text.split(',').map(parse_type).collect() };
            decls.insert(name.to_string(), SdkDecl { name: name.to_string(), params, ret: parse_type(ret) });
        }
        Ok(SdkDecls { decls })
    }

    /// A missing file yields an empty table, which leaves the SDK plugin inert.
    pub fn load(path: &Path) -> Result<SdkDecls, SdkError> {
        match std::fs::read_to_string(path) {
            Ok(text) => SdkDecls::parse(&text, &path.display().to_string()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                log::warn!("SDK declaration file {} not found; SDK plugin inert", path.display());
                Ok(SdkDecls::default())
            }
            Err(source) => Err(SdkError::Io { path: path.display().to_string(), source }),
        }
    }

    pub fn get(&self, name: &str) -> Option<&SdkDecl> {
        self.decls.get(name)
    }

    pub fn lookup(&self, receiver: &str, method: &str) -> Option<&SdkDecl> {
        self.decls.get(&format!("{receiver}.{method}"))
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    /// Receiver names that appear in declarations.
    pub fn roots(&self) -> BTreeSet<&str> {
        self.decls.values().map(SdkDecl::receiver).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SdkDecl> {
        self.decls.values()
    }
}
