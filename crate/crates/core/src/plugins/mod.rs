// SPDX-License-Identifier: Apache-2.0

//! Signature-matched handlers for framework and built-in APIs.
//!
//! When a dynamic call is resolved, the manager builds its static signature
//! (`ReceiverType.method`) and hands the call to the first enabled plugin
//! whose matcher accepts it. A handled call never reaches virtual dispatch.
//! If the plugin reports an error the call falls back to normal dispatch.

mod function;
mod sdk;
mod storage;

use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::ir::{IrProgram, IrStatement, StmtKind};
use crate::pag::ObjId;
use crate::solver::{CallInfo, SolverCore};

pub use function::FunctionPlugin;
pub use sdk::SdkPlugin;
pub use storage::StoragePlugin;

pub const STORAGE: &str = "storage";
pub const FUNCTION: &str = "function";
pub const SDK: &str = "sdk";

/// Static signature of a dynamic call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSignature {
    pub receiver_type: String,
    pub method: String,
}

impl CallSignature {
    pub fn of(stmt: &IrStatement) -> Option<CallSignature> {
        match &stmt.kind {
            StmtKind::DynamicCall { method, receiver_type, .. } => {
                Some(CallSignature { receiver_type: receiver_type.signature_name()?, method: method.clone() })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PluginError {
    #[error("{plugin}: {message}")]
    Malformed { plugin: &'static str, message: String },
}

pub trait Plugin {
    fn name(&self) -> &'static str;

    /// Lower runs first.
    fn priority(&self) -> i32;

    fn matches(&self, sig: &CallSignature, program: &IrProgram) -> bool;

    /// Runs once per `(call site, context)`, before any receiver is seen.
    fn on_call(&mut self, _cx: &mut SolverCore<'_>, _call: &CallInfo) -> Result<(), PluginError> {
        Ok(())
    }

    /// Runs for receiver objects not handed to this call before.
    fn on_receivers(&mut self, _cx: &mut SolverCore<'_>, _call: &CallInfo, _objs: &[ObjId]) -> Result<(), PluginError> {
        Ok(())
    }
}

#[derive(Default)]
pub struct PluginManager {
    plugins: Vec<Box<dyn Plugin>>,
}

impl PluginManager {
    /// The built-in plugins minus those disabled in `config`.
    pub fn builtin(config: &AnalysisConfig) -> Self {
        let mut m = PluginManager::default();
        m.register(Box::new(StoragePlugin));
        m.register(Box::new(FunctionPlugin::default()));
        m.register(Box::new(SdkPlugin::new(config.sdk.clone())));
        m.plugins.retain(|p| config.plugin_enabled(p.name()));
        m
    }

    pub fn register(&mut self, plugin: Box<dyn Plugin>) {
        self.plugins.push(plugin);
        self.plugins.sort_by_key(|p| p.priority());
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.plugins.iter().map(|p| p.name()).collect()
    }

    /// Index of the plugin that handles `stmt`, if any.
    pub fn select(&self, program: &IrProgram, stmt: &IrStatement) -> Option<usize> {
        let sig = CallSignature::of(stmt)?;
        self.plugins.iter().position(|p| p.matches(&sig, program))
    }

    pub fn get_mut(&mut self, index: usize) -> &mut dyn Plugin {
        self.plugins[index].as_mut()
    }

    pub fn name_of(&self, index: usize) -> &'static str {
        self.plugins[index].name()
    }
}

/// Storage key named by a call's first argument; variable keys share `*`.
pub(crate) fn storage_key(stmt: &IrStatement) -> Option<String> {
    let args = match &stmt.kind {
        StmtKind::DynamicCall { args, .. } => args,
        _ => return None,
    };
    match args.first()? {
        crate::ir::Operand::Str(k) => Some(k.clone()),
        _ => Some(WILDCARD_KEY.to_string()),
    }
}

pub const WILDCARD_KEY: &str = "*";
