//! The surface language: syntax, elaboration, typing and interchange formats.

pub mod elab;
pub mod ir;
pub mod pretty;
pub mod qasm;
pub mod syntax;
pub mod types;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::ParseError;
pub use elab::{elaborate, Params};
pub use ir::{unitary_inverse, BExp, Gate, MixedGate, Oracle, Program, Stmt};
pub use types::{typecheck, ProgType, TypeError, TypedProg};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LangError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("type error: {0}")]
    Type(#[from] TypeError),
}

/// Parses, elaborates and typechecks native source.
pub fn compile(src: &str, params: &Params, oracles: &BTreeMap<String, Arc<Oracle>>) -> Result<TypedProg, LangError> {
    let ast = syntax::parse(src)?;
    let prog = elaborate(&ast, params, oracles)?;
    Ok(typecheck(prog)?)
}

/// `compile` with no external parameters or oracles.
pub fn compile_str(src: &str) -> Result<TypedProg, LangError> {
    compile(src, &Params::new(), &BTreeMap::new())
}
