// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::sdk::SdkDecls;

/// Upper bound on context length.
pub const MAX_K: usize = 5;
/// Default context length.
pub const DEFAULT_K: usize = 2;
/// Default wall-clock budget for one analysis.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Insensitive,
    #[default]
    Callsite,
    Function,
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "insensitive" => Ok(SelectorKind::Insensitive),
            "callsite" => Ok(SelectorKind::Callsite),
            "function" => Ok(SelectorKind::Function),
            other => Err(format!("unknown context selector `{other}`")),
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectorKind::Insensitive => "insensitive",
            SelectorKind::Callsite => "callsite",
            SelectorKind::Function => "function",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub selector: SelectorKind,
    pub k: usize,
    /// Clone allocation sites per caller context.
    pub heap_context: bool,
    /// Plugin names (`storage`, `function`, `sdk`) to leave out.
    pub disabled_plugins: BTreeSet<String>,
    pub timeout: Duration,
    /// Classes whose instances are treated as global: calls on them use the empty context.
    pub singletons: BTreeSet<String>,
    /// Record every points-to insertion in order.
    pub trace: bool,
    /// Opaque API declarations consulted by the SDK plugin.
    pub sdk: SdkDecls,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            selector: SelectorKind::Callsite,
            k: DEFAULT_K,
            heap_context: false,
            disabled_plugins: BTreeSet::new(),
            timeout: DEFAULT_TIMEOUT,
            singletons: BTreeSet::new(),
            trace: false,
            sdk: SdkDecls::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn with_k(k: usize) -> Self {
        AnalysisConfig { k, ..Default::default() }
    }

    pub fn plugin_enabled(&self, name: &str) -> bool {
        !self.disabled_plugins.contains(name)
    }
}
