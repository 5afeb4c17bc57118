//! Well-formedness and the `Prog` / `QProg` typing discipline.

use std::collections::BTreeSet;

use super::ir::{Program, Stmt};
use crate::memory::Addr;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("quantum-controlled branch is not unitary: {0}")]
    NotUnitaryBranch(String),
    #[error("quantum control {0} is also a target of the branch")]
    ControlTargetOverlap(Addr),
    #[error("gate target {0} is not allocated")]
    UnallocatedGateTarget(Addr),
    #[error("register cell {0} is already allocated")]
    ReInit(Addr),
    #[error("branches of a classical if allocate differently: {0}")]
    AllocationProfileMismatch(String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("unbound parameter {0}")]
    UnboundParameter(String),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("unknown oracle {0}")]
    UnknownOracle(String),
    #[error("unknown gate or macro {0}")]
    UnknownGate(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("condition mixes quantum and classical cells: {0}")]
    MixedCondition(String),
    #[error("weights do not form a distribution: {0}")]
    WeightSumNotOne(String),
    #[error("not an integer: {0}")]
    NotAnInteger(String),
    #[error("duplicate declaration: {0}")]
    Duplicate(String),
    #[error("macro expansion too deep: {0}")]
    MacroDepth(String),
    #[error("wrong kind of operand: {0}")]
    KindMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgType {
    QProg,
    Prog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedProg {
    pub program: Program,
    pub ty: ProgType,
    /// Quantum cells allocated at the end.
    pub live: BTreeSet<Addr>,
}

/// How an `If` is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IfKind {
    Classical,
    Quantum,
}

pub fn if_kind(p: &Program, cond_addrs: &BTreeSet<Addr>) -> Result<IfKind, TypeError> {
    let q = cond_addrs.iter().filter(|a| p.is_quantum(a)).count();
    if q == 0 {
        Ok(IfKind::Classical)
    } else if q == cond_addrs.len() {
        Ok(IfKind::Quantum)
    } else {
        Err(TypeError::MixedCondition(cond_addrs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")))
    }
}

pub fn typecheck(program: Program) -> Result<TypedProg, TypeError> {
    typecheck_from(program, BTreeSet::new())
}

/// Typechecks with some quantum cells already allocated.
pub fn typecheck_from(program: Program, mut live: BTreeSet<Addr>) -> Result<TypedProg, TypeError> {
    let mut unitary = true;
    for s in &program.body {
        unitary &= check(&program, s, &mut live)?;
    }
    let ty = if unitary { ProgType::QProg } else { ProgType::Prog };
    Ok(TypedProg { program, ty, live })
}

fn need_live(live: &BTreeSet<Addr>, a: &Addr) -> Result<(), TypeError> {
    if live.contains(a) {
        Ok(())
    } else {
        Err(TypeError::UnallocatedGateTarget(a.clone()))
    }
}

/// Checks `s`, updating the live set; returns whether `s` is unitary.
fn check(p: &Program, s: &Stmt, live: &mut BTreeSet<Addr>) -> Result<bool, TypeError> {
    match s {
        Stmt::Skip => Ok(true),
        Stmt::Init(v) | Stmt::Input(v) => {
            let mut seen = BTreeSet::new();
            for a in v {
                if live.contains(a) || !seen.insert(a) {
                    return Err(TypeError::ReInit(a.clone()));
                }
            }
            live.extend(v.iter().cloned());
            Ok(false)
        }
        Stmt::Gate(_, a) => {
            need_live(live, a)?;
            Ok(true)
        }
        Stmt::Reset(a) => {
            need_live(live, a)?;
            Ok(false)
        }
        Stmt::Measure { q, .. } => {
            for a in q {
                need_live(live, a)?;
            }
            Ok(false)
        }
        Stmt::Assign { .. } => Ok(false),
        Stmt::Mixed { gate, qubits } => {
            let distinct: BTreeSet<&Addr> = qubits.iter().collect();
            if distinct.len() != qubits.len() {
                return Err(TypeError::WidthMismatch(format!("repeated operand of mixed gate `{}`", gate.name)));
            }
            for a in qubits {
                need_live(live, a)?;
            }
            for w in 0..(1usize << gate.width()) {
                let mut l = live.clone();
                for b in gate.body(w, qubits) {
                    if !check(p, &b, &mut l)? {
                        return Err(TypeError::NotUnitaryBranch(format!("body {w} of mixed gate `{}`", gate.name)));
                    }
                }
            }
            Ok(false)
        }
        Stmt::If { cond, then, els } => {
            let ca = cond.addrs();
            match if_kind(p, &ca)? {
                IfKind::Quantum => {
                    for a in &ca {
                        need_live(live, a)?;
                    }
                    for b in then.iter().chain(els) {
                        let mut l = live.clone();
                        if !check(p, b, &mut l)? {
                            return Err(TypeError::NotUnitaryBranch(describe(b)));
                        }
                        let mut w = BTreeSet::new();
                        b.qwrites(&mut w);
                        if let Some(a) = w.intersection(&ca).next() {
                            return Err(TypeError::ControlTargetOverlap(a.clone()));
                        }
                    }
                    Ok(true)
                }
                IfKind::Classical => {
                    let mut lt = live.clone();
                    let mut le = live.clone();
                    for b in then {
                        check(p, b, &mut lt)?;
                    }
                    for b in els {
                        check(p, b, &mut le)?;
                    }
                    if lt != le {
                        let d: Vec<String> = lt.symmetric_difference(&le).map(|a| a.to_string()).collect();
                        return Err(TypeError::AllocationProfileMismatch(d.join(", ")));
                    }
                    *live = lt;
                    Ok(false)
                }
            }
        }
    }
}

fn describe(s: &Stmt) -> String {
    match s {
        Stmt::Init(v) => format!("init of {}", v.first().map(|a| a.to_string()).unwrap_or_default()),
        Stmt::Input(_) => "input declaration".into(),
        Stmt::Measure { q, .. } => format!("measurement of {}", q.first().map(|a| a.to_string()).unwrap_or_default()),
        Stmt::Assign { oracle, .. } => format!("classical assignment via `{}`", oracle.name),
        Stmt::Mixed { gate, .. } => format!("mixed gate `{}`", gate.name),
        Stmt::Reset(a) => format!("reset of {a}"),
        Stmt::If { .. } => "classical conditional".into(),
        _ => "statement".into(),
    }
}
