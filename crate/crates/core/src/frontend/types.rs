// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// A declared or inferred static type. Used for diagnostics, plugin
/// signature matching, SDK stub creation and the CHA/RTA baselines; the
/// pointer analysis itself never filters on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeExpr {
    Prim(String),
    Named(String),
    Function { params: Vec<TypeExpr>, ret: Box<TypeExpr> },
    Union(Vec<TypeExpr>),
    Array(Box<TypeExpr>),
    Unknown,
}

pub const PRIMITIVES: &[&str] =
    &["number", "string", "boolean", "void", "undefined", "null", "bigint", "never", "symbol"];

impl TypeExpr {
    pub fn named(s: &str) -> TypeExpr {
        match s {
            "any" | "unknown" | "object" | "Object" => TypeExpr::Unknown,
            "Function" => TypeExpr::Function { params: vec![], ret: Box::new(TypeExpr::Unknown) },
            p if PRIMITIVES.contains(&p) => TypeExpr::Prim(p.to_string()),
            other => TypeExpr::Named(other.to_string()),
        }
    }

    pub fn prim(s: &str) -> TypeExpr {
        TypeExpr::Prim(s.to_string())
    }

    /// Values of this type may carry heap references.
    pub fn is_pointer(&self) -> bool {
        match self {
            TypeExpr::Prim(_) => false,
            TypeExpr::Union(ms) => ms.iter().any(TypeExpr::is_pointer),
            _ => true,
        }
    }

    pub fn is_function(&self) -> bool {
        match self {
            TypeExpr::Function { .. } => true,
            TypeExpr::Union(ms) => !ms.is_empty() && ms.iter().filter(|m| m.is_pointer()).all(TypeExpr::is_function),
            _ => false,
        }
    }

    /// Class names mentioned at the top level (union members included).
    pub fn class_names(&self) -> Vec<&str> {
        match self {
            TypeExpr::Named(n) => vec![n.as_str()],
            TypeExpr::Union(ms) => ms.iter().flat_map(|m| m.class_names()).collect(),
            _ => vec![],
        }
    }

    /// Name used to build plugin call signatures (`Recv.method`).
    pub fn signature_name(&self) -> Option<String> {
        match self {
            TypeExpr::Named(n) => Some(n.clone()),
            TypeExpr::Function { .. } => Some("Function".to_string()),
            TypeExpr::Array(_) => Some("Array".to_string()),
            _ => None,
        }
    }

    pub fn return_type(&self) -> TypeExpr {
        match self {
            TypeExpr::Function { ret, .. } => (**ret).clone(),
            _ => TypeExpr::Unknown,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Prim(p) => write!(f, "{p}"),
            TypeExpr::Named(n) => write!(f, "{n}"),
            TypeExpr::Unknown => write!(f, "any"),
            TypeExpr::Array(e) => match **e {
                TypeExpr::Function { .. } | TypeExpr::Union(_) => write!(f, "({e})[]"),
                _ => write!(f, "{e}[]"),
            },
            TypeExpr::Union(ms) => {
                write!(f, "(")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ")")
            }
            TypeExpr::Function { params, ret } => {
                write!(f, "(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "a{i}: {p}")?;
                }
                write!(f, ") => {ret}")
            }
        }
    }
}
