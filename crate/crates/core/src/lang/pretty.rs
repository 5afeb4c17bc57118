//! Renders elaborated programs back to native syntax.

use num_rational::BigRational;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use super::ir::{BExp, MixedGate, Oracle, Program, Stmt, FORMAL};
use crate::boolexpr::BoolExpr;
use crate::memory::Addr;

/// Native source for `p`; parsing and elaborating it yields `p` again.
pub fn to_hqb(p: &Program) -> String {
    let mut out = String::new();
    for (n, w) in &p.qregs {
        let _ = writeln!(out, "qreg {n}[{w}];");
    }
    for (n, w) in &p.cregs {
        let _ = writeln!(out, "creg {n}[{w}];");
    }
    let mut mixed = BTreeMap::new();
    let mut oracles = BTreeMap::new();
    collect_decls(&p.body, &mut mixed, &mut oracles);
    for o in oracles.values() {
        let outs: Vec<String> = o.outputs.iter().map(|e| anf_text(e, "a")).collect();
        let _ = writeln!(out, "oracle {}(a[{}]) = [{}];", o.name, o.inputs, outs.join(", "));
    }
    for g in mixed.values() {
        let _ = writeln!(out, "mixed {}(q[{}]) {{", g.name, g.arity);
        for (w, body) in g.weights.iter().zip(&g.bodies) {
            let mut b = String::new();
            for s in body {
                stmt(&mut b, p, s, 2);
            }
            let _ = write!(out, "  {} : {{\n{b}  }}\n", rational(w));
        }
        out.push_str("}\n");
    }
    for s in &p.body {
        stmt(&mut out, p, s, 0);
    }
    out
}

fn collect_decls(body: &[Stmt], mixed: &mut BTreeMap<String, Arc<MixedGate>>, oracles: &mut BTreeMap<String, Arc<Oracle>>) {
    for s in body {
        match s {
            Stmt::Mixed { gate, .. } => {
                mixed.insert(gate.name.clone(), gate.clone());
            }
            Stmt::Assign { oracle, .. } => {
                oracles.insert(oracle.name.clone(), oracle.clone());
            }
            Stmt::If { then, els, .. } => {
                collect_decls(then, mixed, oracles);
                collect_decls(els, mixed, oracles);
            }
            _ => {}
        }
    }
}

fn rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn anf_text(e: &BoolExpr, formal: &str) -> String {
    if e.is_zero() {
        return "false".into();
    }
    e.monomials()
        .iter()
        .map(|m| {
            if m.is_one() {
                "true".to_string()
            } else {
                let v: Vec<String> = m.vars().iter().map(|v| format!("{formal}[{}]", v.id)).collect();
                if v.len() > 1 {
                    format!("({})", v.join(" & "))
                } else {
                    v[0].clone()
                }
            }
        })
        .collect::<Vec<_>>()
        .join(" ^ ")
}

fn addr_text(a: &Addr) -> String {
    if &*a.reg == FORMAL {
        format!("q[{}]", a.idx)
    } else {
        a.to_string()
    }
}

/// Register reference text when `v` is a contiguous ascending run of one register.
pub fn regref_text(p: &Program, v: &[Addr]) -> Option<String> {
    let first = v.first()?;
    let contiguous = v.iter().enumerate().all(|(i, a)| a.reg == first.reg && a.idx == first.idx + i as u32);
    if !contiguous {
        return None;
    }
    let name = if &*first.reg == FORMAL { "q" } else { &first.reg };
    if v.len() == 1 {
        return Some(addr_text(first));
    }
    if first.idx == 0 && p.width(&first.reg) == Some(v.len() as u32) {
        return Some(name.to_string());
    }
    Some(format!("{name}[{}..{}]", first.idx, first.idx + v.len() as u32 - 1))
}

pub fn cond_text(c: &BExp) -> String {
    match c {
        BExp::Const(b) => b.to_string(),
        BExp::Bit(a) => addr_text(a),
        BExp::Not(e) => format!("!{}", cond_atom(e)),
        BExp::And(a, b) => format!("{} & {}", cond_atom(a), cond_atom(b)),
        BExp::Xor(a, b) => format!("{} ^ {}", cond_atom(a), cond_atom(b)),
        BExp::Or(a, b) => format!("{} | {}", cond_atom(a), cond_atom(b)),
    }
}

fn cond_atom(c: &BExp) -> String {
    match c {
        BExp::Const(_) | BExp::Bit(_) | BExp::Not(_) => cond_text(c),
        _ => format!("({})", cond_text(c)),
    }
}

fn stmt(out: &mut String, p: &Program, s: &Stmt, ind: usize) {
    let pad = " ".repeat(ind);
    let refs = |v: &[Addr]| -> Vec<String> {
        match regref_text(p, v) {
            Some(t) => vec![t],
            None => v.iter().map(addr_text).collect(),
        }
    };
    match s {
        Stmt::Skip => {
            let _ = writeln!(out, "{pad}skip;");
        }
        Stmt::Init(v) => {
            for r in refs(v) {
                let _ = writeln!(out, "{pad}init {r};");
            }
        }
        Stmt::Input(v) => {
            for r in refs(v) {
                let _ = writeln!(out, "{pad}input {r};");
            }
        }
        Stmt::Gate(g, a) => {
            let _ = writeln!(out, "{pad}{g}({});", addr_text(a));
        }
        Stmt::Reset(a) => {
            let _ = writeln!(out, "{pad}reset {};", addr_text(a));
        }
        Stmt::Measure { q, c } => match (regref_text(p, q), regref_text(p, c)) {
            (Some(a), Some(b)) => {
                let _ = writeln!(out, "{pad}measure({a}, {b});");
            }
            _ => {
                for (a, b) in q.iter().zip(c) {
                    let _ = writeln!(out, "{pad}measure({}, {});", addr_text(a), addr_text(b));
                }
            }
        },
        Stmt::Assign { target, oracle, args } => {
            let t = regref_text(p, target).unwrap_or_else(|| "?".into());
            let a = regref_text(p, args).unwrap_or_else(|| "?".into());
            let _ = writeln!(out, "{pad}{t} := {}({a});", oracle.name);
        }
        Stmt::Mixed { gate, qubits } => {
            let r = regref_text(p, qubits).unwrap_or_else(|| "?".into());
            let _ = writeln!(out, "{pad}{}({r});", gate.name);
        }
        Stmt::If { cond, then, els } => {
            let _ = writeln!(out, "{pad}if {} {{", cond_text(cond));
            for b in then {
                stmt(out, p, b, ind + 2);
            }
            if els.iter().all(|s| *s == Stmt::Skip) {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                for b in els {
                    stmt(out, p, b, ind + 2);
                }
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}
