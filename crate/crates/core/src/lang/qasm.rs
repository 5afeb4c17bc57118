//! OpenQASM 2.0 subset: import, export, and α-equivalence of programs.
//!
//! Beyond plain QASM, comment pragmas carry what QASM cannot express:
//! `// @init r`, `// @input r` for allocation points, and
//! `// @mixed NAME ARITY` followed by `// @branch WEIGHT stmts` lines.
//! Conditions may also test a single bit, as in `if(c[1]==1)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;

use super::ir::{BExp, Gate, MixedGate, Program, Stmt, FORMAL};
use crate::boolexpr::{BoolExpr, Var};
use crate::memory::Addr;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QasmError {
    #[error("unsupported OpenQASM construct: {0}")]
    UnsupportedQasmConstruct(String),
    #[error("malformed OpenQASM at statement {index}: {message}")]
    Syntax { index: usize, message: String },
}

fn unsupported<T>(s: impl Into<String>) -> Result<T, QasmError> {
    Err(QasmError::UnsupportedQasmConstruct(s.into()))
}

// ---------- export ----------

pub fn export(p: &Program) -> Result<String, QasmError> {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    for (n, w) in &p.qregs {
        let _ = writeln!(out, "qreg {n}[{w}];");
    }
    for (n, w) in &p.cregs {
        let _ = writeln!(out, "creg {n}[{w}];");
    }
    let mut mixed: BTreeMap<String, Arc<MixedGate>> = BTreeMap::new();
    collect_mixed(&p.body, &mut mixed);
    for g in mixed.values() {
        let _ = writeln!(out, "// @mixed {} {}", g.name, g.arity);
        for (w, body) in g.weights.iter().zip(&g.bodies) {
            let mut b = String::new();
            for s in body {
                export_stmt(&mut b, p, s, "")?;
            }
            let _ = writeln!(out, "// @branch {} {}", weight_text(w), b.replace('\n', " ").trim());
        }
        let args: Vec<String> = (0..g.arity).map(|i| format!("a{i}")).collect();
        let _ = writeln!(out, "opaque {} {};", g.name, args.join(","));
    }
    for s in &p.body {
        export_stmt(&mut out, p, s, "")?;
    }
    Ok(out)
}

fn collect_mixed(body: &[Stmt], m: &mut BTreeMap<String, Arc<MixedGate>>) {
    for s in body {
        match s {
            Stmt::Mixed { gate, .. } => {
                m.insert(gate.name.clone(), gate.clone());
            }
            Stmt::If { then, els, .. } => {
                collect_mixed(then, m);
                collect_mixed(els, m);
            }
            _ => {}
        }
    }
}

fn weight_text(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn qa(a: &Addr) -> String {
    if &*a.reg == FORMAL {
        format!("f[{}]", a.idx)
    } else {
        a.to_string()
    }
}

fn whole(p: &Program, v: &[Addr]) -> Option<String> {
    let f = v.first()?;
    let ok = v.iter().enumerate().all(|(i, a)| a.reg == f.reg && a.idx == i as u32) && p.width(&f.reg) == Some(v.len() as u32);
    ok.then(|| f.reg.to_string())
}

fn phase_gate(g: Gate) -> String {
    match g {
        Gate::Z(1) | Gate::Zdg(1) => "z".into(),
        Gate::Z(2) => "s".into(),
        Gate::Zdg(2) => "sdg".into(),
        Gate::Z(3) => "t".into(),
        Gate::Zdg(3) => "tdg".into(),
        Gate::Z(k) => format!("u1(pi/{})", 1u128 << (k - 1)),
        Gate::Zdg(k) => format!("u1(-pi/{})", 1u128 << (k - 1)),
        Gate::H => "h".into(),
        Gate::X => "x".into(),
    }
}

fn export_stmt(out: &mut String, p: &Program, s: &Stmt, prefix: &str) -> Result<(), QasmError> {
    match s {
        Stmt::Skip => {}
        Stmt::Init(v) | Stmt::Input(v) => {
            if !prefix.is_empty() {
                return unsupported("conditional allocation");
            }
            let kw = if matches!(s, Stmt::Init(_)) { "init" } else { "input" };
            match whole(p, v) {
                Some(r) => {
                    let _ = writeln!(out, "// @{kw} {r}");
                }
                None => {
                    for a in v {
                        let _ = writeln!(out, "// @{kw} {a}");
                    }
                }
            }
        }
        Stmt::Gate(g, a) => {
            let _ = writeln!(out, "{prefix}{} {};", phase_gate(*g), qa(a));
        }
        Stmt::Reset(a) => {
            let _ = writeln!(out, "{prefix}reset {};", qa(a));
        }
        Stmt::Measure { q, c } => match (whole(p, q), whole(p, c)) {
            (Some(a), Some(b)) => {
                let _ = writeln!(out, "{prefix}measure {a} -> {b};");
            }
            _ => {
                for (a, b) in q.iter().zip(c) {
                    let _ = writeln!(out, "{prefix}measure {} -> {};", qa(a), qa(b));
                }
            }
        },
        Stmt::Assign { oracle, .. } => return unsupported(format!("classical assignment via oracle `{}`", oracle.name)),
        Stmt::Mixed { gate, qubits } => {
            let a: Vec<String> = qubits.iter().map(qa).collect();
            let _ = writeln!(out, "{prefix}{} {};", gate.name, a.join(","));
        }
        Stmt::If { cond, then, els } => {
            let ca = cond.addrs();
            let quantum = ca.iter().any(|a| p.is_quantum(a) || &*a.reg == FORMAL);
            if quantum {
                return export_qif(out, cond, then, els, prefix);
            }
            if !prefix.is_empty() {
                return unsupported("nested classical conditional");
            }
            let (cond, body) = if els.iter().all(|s| *s == Stmt::Skip) {
                (cond.clone(), then)
            } else if then.iter().all(|s| *s == Stmt::Skip) {
                (cond.clone().not(), els)
            } else {
                return unsupported("classical conditional with two branches");
            };
            let pre = classical_condition(p, &cond)?;
            let mut written = BTreeSet::new();
            let body: Vec<&Stmt> = body.iter().filter(|s| **s != Stmt::Skip).collect();
            for (i, b) in body.iter().enumerate() {
                if i > 0 && written.intersection(&ca).next().is_some() {
                    return unsupported("conditional body overwrites its own condition");
                }
                b.cwrites(&mut written);
                let mut line = String::new();
                export_stmt(&mut line, p, b, &pre)?;
                if line.lines().count() > 1 && line.lines().skip(1).any(|_| written.intersection(&ca).next().is_some()) {
                    return unsupported("conditional body overwrites its own condition");
                }
                out.push_str(&line);
            }
        }
    }
    Ok(())
}

fn export_qif(out: &mut String, cond: &BExp, then: &[Stmt], els: &[Stmt], prefix: &str) -> Result<(), QasmError> {
    let body: Vec<&Stmt> = then.iter().filter(|s| **s != Stmt::Skip).collect();
    if els.iter().any(|s| *s != Stmt::Skip) {
        return unsupported("quantum conditional with an else branch");
    }
    let ctrls: Vec<&Addr> = match cond {
        BExp::Bit(a) => vec![a],
        BExp::And(a, b) => match (&**a, &**b) {
            (BExp::Bit(x), BExp::Bit(y)) => vec![x, y],
            _ => return unsupported("quantum condition beyond one or two controls"),
        },
        _ => return unsupported("quantum condition beyond one or two controls"),
    };
    for s in body {
        let Stmt::Gate(g, t) = s else {
            return unsupported("quantum-controlled block");
        };
        let line = match (ctrls.len(), g) {
            (1, Gate::X) => format!("cx {},{};", qa(ctrls[0]), qa(t)),
            (2, Gate::X) => format!("ccx {},{},{};", qa(ctrls[0]), qa(ctrls[1]), qa(t)),
            (1, Gate::Z(1) | Gate::Zdg(1)) => format!("cz {},{};", qa(ctrls[0]), qa(t)),
            (1, Gate::Z(k)) => format!("cu1(pi/{}) {},{};", 1u128 << (k - 1), qa(ctrls[0]), qa(t)),
            (1, Gate::Zdg(k)) => format!("cu1(-pi/{}) {},{};", 1u128 << (k - 1), qa(ctrls[0]), qa(t)),
            _ => return unsupported(format!("controlled {g}")),
        };
        let _ = writeln!(out, "{prefix}{line}");
    }
    Ok(())
}

/// `if(r==n) ` for a whole-register test, `if(r[i]==b) ` for one bit.
fn classical_condition(p: &Program, cond: &BExp) -> Result<String, QasmError> {
    let addrs = cond.addrs();
    let index: BTreeMap<Addr, u32> = addrs.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
    let anf = cond.anf(&index);
    if addrs.len() == 1 {
        let a = addrs.iter().next().unwrap();
        let bit = BoolExpr::var(Var::input(0));
        if anf == bit {
            return Ok(format!("if({a}==1) "));
        }
        if anf == bit.not() {
            return Ok(format!("if({a}==0) "));
        }
    }
    for (name, w) in &p.cregs {
        let regs: BTreeSet<Addr> = (0..*w).map(|i| Addr::new(name, i)).collect();
        if regs != addrs || *w > 16 {
            continue;
        }
        let v: Vec<Addr> = (0..*w).map(|i| Addr::new(name, i)).collect();
        for n in 0..(1u64 << w) {
            if BExp::equals(&v, n).anf(&index) == anf {
                return Ok(format!("if({name}=={n}) "));
            }
        }
    }
    unsupported(format!("condition `{cond}`"))
}

// ---------- import ----------

enum Raw {
    Pragma(String),
    Stmt(String),
}

fn split(text: &str) -> Vec<Raw> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        let (code, comment) = match line.find("//") {
            Some(k) => (&line[..k], Some(&line[k + 2..])),
            None => (line, None),
        };
        for ch in code.chars() {
            if ch == ';' {
                if !cur.trim().is_empty() {
                    out.push(Raw::Stmt(cur.trim().to_string()));
                }
                cur.clear();
            } else {
                cur.push(ch);
            }
        }
        cur.push(' ');
        if let Some(c) = comment {
            let c = c.trim();
            if let Some(rest) = c.strip_prefix('@') {
                out.push(Raw::Pragma(rest.to_string()));
            }
        }
    }
    if !cur.trim().is_empty() {
        out.push(Raw::Stmt(cur.trim().to_string()));
    }
    out
}

struct Importer {
    qregs: Vec<(String, u32)>,
    cregs: Vec<(String, u32)>,
    mixed: BTreeMap<String, Arc<MixedGate>>,
    managed: BTreeSet<String>,
    index: usize,
}

pub fn import(text: &str) -> Result<Program, QasmError> {
    let raws = split(text);
    let mut managed = BTreeSet::new();
    for r in &raws {
        if let Raw::Pragma(p) = r {
            let mut it = p.split_whitespace();
            if let (Some("init" | "input"), Some(arg)) = (it.next(), it.next()) {
                managed.insert(arg.split('[').next().unwrap_or(arg).to_string());
            }
        }
    }
    let mut im = Importer { qregs: Vec::new(), cregs: Vec::new(), mixed: BTreeMap::new(), managed, index: 0 };
    let mut body = Vec::new();
    let mut pending: Option<(String, u32, Vec<BigRational>, Vec<Vec<Stmt>>)> = None;
    for r in raws {
        im.index += 1;
        match r {
            Raw::Pragma(p) => {
                let mut it = p.splitn(3, ' ');
                let kw = it.next().unwrap_or("");
                match kw {
                    "init" | "input" => {
                        let arg = it.next().ok_or_else(|| im.err("pragma without register"))?;
                        let v = im.operand(arg.trim())?;
                        body.push(if kw == "init" { Stmt::Init(v) } else { Stmt::Input(v) });
                    }
                    "mixed" => {
                        im.flush_mixed(&mut pending);
                        let name = it.next().ok_or_else(|| im.err("mixed pragma without name"))?.to_string();
                        let arity: u32 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| im.err("mixed pragma without arity"))?;
                        pending = Some((name, arity, Vec::new(), Vec::new()));
                    }
                    "branch" => {
                        let Some((_, arity, ws, bs)) = pending.as_mut() else {
                            return Err(im.err("branch pragma outside a mixed declaration"));
                        };
                        let arity = *arity;
                        let w = it.next().ok_or_else(|| im.err("branch without weight"))?;
                        ws.push(parse_weight(w).ok_or_else(|| im.err("bad weight"))?);
                        let mut b = Vec::new();
                        for part in it.next().unwrap_or("").split(';') {
                            if !part.trim().is_empty() {
                                im.stmt(part.trim(), &mut b, Some(arity))?;
                            }
                        }
                        bs.push(b);
                    }
                    _ => {}
                }
            }
            Raw::Stmt(s) => {
                im.flush_mixed(&mut pending);
                im.stmt(&s, &mut body, None)?;
            }
        }
    }
    Ok(Program { qregs: im.qregs, cregs: im.cregs, body })
}

fn parse_weight(s: &str) -> Option<BigRational> {
    let (a, b) = s.split_once('/').unwrap_or((s, "1"));
    let a: BigInt = a.trim().parse().ok()?;
    let b: BigInt = b.trim().parse().ok()?;
    (b != BigInt::from(0)).then(|| BigRational::new(a, b))
}

fn head(s: &str) -> (&str, &str) {
    let s = s.trim();
    let end = s.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(s.len());
    (&s[..end], s[end..].trim())
}

impl Importer {
    fn err(&self, m: &str) -> QasmError {
        QasmError::Syntax { index: self.index, message: m.to_string() }
    }

    fn flush_mixed(&mut self, pending: &mut Option<(String, u32, Vec<BigRational>, Vec<Vec<Stmt>>)>) {
        if let Some((name, arity, weights, bodies)) = pending.take() {
            self.mixed.insert(name.clone(), Arc::new(MixedGate { name, arity, weights, bodies }));
        }
    }

    fn width(&self, n: &str) -> Option<u32> {
        self.qregs.iter().chain(&self.cregs).find(|(m, _)| m == n).map(|(_, w)| *w)
    }

    fn operand(&self, s: &str) -> Result<Vec<Addr>, QasmError> {
        let s = s.trim();
        if let Some(open) = s.find('[') {
            let name = s[..open].trim();
            let inner = s[open + 1..].trim_end().strip_suffix(']').ok_or_else(|| self.err("unclosed index"))?;
            if name == "f" && self.width("f").is_none() {
                let i: u32 = inner.trim().parse().map_err(|_| self.err("bad index"))?;
                return Ok(vec![Addr::new(FORMAL, i)]);
            }
            let w = self.width(name).ok_or_else(|| self.err(&format!("unknown register `{name}`")))?;
            let (lo, hi) = match inner.split_once("..") {
                Some((a, b)) => (a.trim().parse::<u32>(), b.trim().parse::<u32>()),
                None => (inner.trim().parse::<u32>(), inner.trim().parse::<u32>()),
            };
            let (lo, hi) = (lo.map_err(|_| self.err("bad index"))?, hi.map_err(|_| self.err("bad index"))?);
            if hi >= w {
                return Err(self.err(&format!("index out of range for `{name}`")));
            }
            return Ok((lo..=hi).map(|i| Addr::new(name, i)).collect());
        }
        let w = self.width(s).ok_or_else(|| self.err(&format!("unknown register `{s}`")))?;
        Ok((0..w).map(|i| Addr::new(s, i)).collect())
    }

    fn is_q(&self, a: &Addr) -> bool {
        &*a.reg == FORMAL || self.qregs.iter().any(|(n, _)| **n == *a.reg)
    }

    fn stmt(&mut self, s: &str, out: &mut Vec<Stmt>, formal: Option<u32>) -> Result<(), QasmError> {
        let (kw, rest) = head(s);
        match kw {
            "OPENQASM" | "include" | "barrier" | "opaque" | "id" => Ok(()),
            "qreg" | "creg" => {
                let v = rest.trim();
                let open = v.find('[').ok_or_else(|| self.err("register without width"))?;
                let name = v[..open].trim().to_string();
                let w: u32 = v[open + 1..].trim_end_matches(']').trim().parse().map_err(|_| self.err("bad width"))?;
                if kw == "qreg" {
                    self.qregs.push((name.clone(), w));
                    if !self.managed.contains(&name) {
                        out.push(Stmt::Init((0..w).map(|i| Addr::new(&name, i)).collect()));
                    }
                } else {
                    self.cregs.push((name, w));
                }
                Ok(())
            }
            "gate" => unsupported("gate definition"),
            "measure" => {
                let (a, b) = rest.split_once("->").ok_or_else(|| self.err("measure without `->`"))?;
                let (q, c) = (self.operand(a)?, self.operand(b)?);
                if q.len() != c.len() {
                    return Err(self.err("measure width mismatch"));
                }
                out.push(Stmt::Measure { q, c });
                Ok(())
            }
            "reset" => {
                for a in self.operand(rest)? {
                    out.push(Stmt::Reset(a));
                }
                Ok(())
            }
            "if" => {
                let inner = rest.strip_prefix('(').ok_or_else(|| self.err("if without `(`"))?;
                let close = inner.find(')').ok_or_else(|| self.err("if without `)`"))?;
                let (lhs, rhs) = inner[..close].split_once("==").ok_or_else(|| self.err("if without `==`"))?;
                let v = self.operand(lhs)?;
                let n: u64 = rhs.trim().parse().map_err(|_| self.err("bad comparison value"))?;
                let cond = BExp::equals(&v, n);
                let mut then = Vec::new();
                self.stmt(&inner[close + 1..], &mut then, formal)?;
                for t in then {
                    out.push(Stmt::If { cond: cond.clone(), then: vec![t], els: vec![Stmt::Skip] });
                }
                Ok(())
            }
            _ => self.gate(kw, rest, out),
        }
    }

    fn gate(&mut self, kw: &str, rest: &str, out: &mut Vec<Stmt>) -> Result<(), QasmError> {
        let (angle, args) = if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| self.err("unclosed parameter list"))?;
            (Some(&r[..close]), &r[close + 1..])
        } else {
            (None, rest)
        };
        let ops: Vec<Vec<Addr>> = args.split(',').filter(|a| !a.trim().is_empty()).map(|a| self.operand(a)).collect::<Result<_, _>>()?;
        let phase = |this: &Self| -> Result<Gate, QasmError> {
            let a = angle.ok_or_else(|| this.err("missing angle"))?;
            angle_gate(a).ok_or_else(|| QasmError::UnsupportedQasmConstruct(format!("{kw}({a})")))
        };
        let single = match kw {
            "h" => Some(Gate::H),
            "x" => Some(Gate::X),
            "z" => Some(Gate::Z(1)),
            "s" => Some(Gate::Z(2)),
            "sdg" => Some(Gate::Zdg(2)),
            "t" => Some(Gate::Z(3)),
            "tdg" => Some(Gate::Zdg(3)),
            "u1" | "p" => Some(phase(self)?),
            _ => None,
        };
        if let Some(g) = single {
            if ops.len() != 1 {
                return Err(self.err("single-qubit gate with several operands"));
            }
            for a in &ops[0] {
                out.push(Stmt::Gate(g, a.clone()));
            }
            return Ok(());
        }
        let controlled = match kw {
            "cx" | "CX" => Some((Gate::X, 1)),
            "cz" => Some((Gate::Z(1), 1)),
            "cu1" | "cp" => Some((phase(self)?, 1)),
            "ccx" => Some((Gate::X, 2)),
            _ => None,
        };
        if let Some((g, nc)) = controlled {
            if ops.len() != nc + 1 {
                return Err(self.err("wrong operand count"));
            }
            let t = &ops[nc];
            for (i, tq) in t.iter().enumerate() {
                let mut cond: Option<BExp> = None;
                for c in &ops[..nc] {
                    let ci = if c.len() == 1 { &c[0] } else { c.get(i).ok_or_else(|| self.err("operand widths differ"))? };
                    let b = BExp::Bit(ci.clone());
                    cond = Some(match cond {
                        None => b,
                        Some(x) => x.and(b),
                    });
                }
                out.push(Stmt::If { cond: cond.unwrap(), then: vec![Stmt::Gate(g, tq.clone())], els: vec![Stmt::Skip] });
            }
            return Ok(());
        }
        if let Some(g) = self.mixed.get(kw).cloned() {
            let qubits: Vec<Addr> = ops.into_iter().flatten().collect();
            if qubits.len() != g.arity as usize || !qubits.iter().all(|a| self.is_q(a)) {
                return Err(self.err("mixed gate operand count"));
            }
            out.push(Stmt::Mixed { gate: g, qubits });
            return Ok(());
        }
        unsupported(if angle.is_some() { format!("{kw}(...)") } else { kw.to_string() })
    }
}

/// `Z(k)` / `Zdg(k)` for angles `±π/2^(k-1)`.
fn angle_gate(a: &str) -> Option<Gate> {
    let v = eval_angle(a)? / std::f64::consts::PI;
    let (neg, v) = if v < 0.0 { (true, -v) } else { (false, v) };
    for k in 1..=60u32 {
        let t = 2f64.powi(-(k as i32 - 1));
        if (v - t).abs() < 1e-12 * t.max(1e-300) + 1e-15 {
            return Some(if neg { Gate::Zdg(k) } else { Gate::Z(k) });
        }
        if (v - (2.0 - t)).abs() < 1e-12 && k > 1 {
            return Some(if neg { Gate::Z(k) } else { Gate::Zdg(k) });
        }
    }
    None
}

/// Arithmetic over numbers and `pi`.
fn eval_angle(s: &str) -> Option<f64> {
    fn expr(t: &[char], i: &mut usize) -> Option<f64> {
        let mut v = term(t, i)?;
        while *i < t.len() && (t[*i] == '+' || t[*i] == '-') {
            let op = t[*i];
            *i += 1;
            let r = term(t, i)?;
            v = if op == '+' { v + r } else { v - r };
        }
        Some(v)
    }
    fn term(t: &[char], i: &mut usize) -> Option<f64> {
        let mut v = unary(t, i)?;
        while *i < t.len() && (t[*i] == '*' || t[*i] == '/') {
            let op = t[*i];
            *i += 1;
            let r = unary(t, i)?;
            v = if op == '*' { v * r } else { v / r };
        }
        Some(v)
    }
    fn unary(t: &[char], i: &mut usize) -> Option<f64> {
        if *i < t.len() && t[*i] == '-' {
            *i += 1;
            return unary(t, i).map(|v| -v);
        }
        if *i < t.len() && t[*i] == '(' {
            *i += 1;
            let v = expr(t, i)?;
            if *i < t.len() && t[*i] == ')' {
                *i += 1;
                return Some(v);
            }
            return None;
        }
        let s = *i;
        while *i < t.len() && (t[*i].is_ascii_alphanumeric() || t[*i] == '.') {
            *i += 1;
        }
        let w: String = t[s..*i].iter().collect();
        if w == "pi" {
            Some(std::f64::consts::PI)
        } else {
            w.parse().ok()
        }
    }
    let t: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut i = 0;
    let v = expr(&t, &mut i)?;
    (i == t.len()).then_some(v)
}

// ---------- α-equivalence ----------

/// Canonical form: registers renamed by declaration order, statements split
/// per cell, skips dropped, conditions in ANF, classical ifs distributed.
pub fn canonical(p: &Program) -> Program {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (i, (n, _)) in p.qregs.iter().enumerate() {
        map.insert(n.clone(), format!("q{i}"));
    }
    for (i, (n, _)) in p.cregs.iter().enumerate() {
        map.insert(n.clone(), format!("c{i}"));
    }
    let ren = |a: &Addr| match map.get(&*a.reg) {
        Some(n) => Addr::new(n, a.idx),
        None => a.clone(),
    };
    let q = Program {
        qregs: p.qregs.iter().map(|(n, w)| (map[n].clone(), *w)).collect(),
        cregs: p.cregs.iter().map(|(n, w)| (map[n].clone(), *w)).collect(),
        body: Vec::new(),
    };
    let mut body = Vec::new();
    for s in &p.body {
        canon_stmt(&q, &s.map_addrs(&ren), &mut body);
    }
    Program { body, ..q }
}

fn canon_cond(c: &BExp) -> BExp {
    let addrs: Vec<Addr> = c.addrs().into_iter().collect();
    let index: BTreeMap<Addr, u32> = addrs.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
    let anf = c.anf(&index);
    let mut acc: Option<BExp> = None;
    for m in anf.monomials() {
        let t = m.vars().iter().map(|v| BExp::Bit(addrs[v.id as usize].clone())).reduce(BExp::and).unwrap_or(BExp::Const(true));
        acc = Some(match acc {
            None => t,
            Some(a) => a.xor(t),
        });
    }
    acc.unwrap_or(BExp::Const(false))
}

fn canon_block(p: &Program, b: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in b {
        canon_stmt(p, s, &mut out);
    }
    out
}

fn canon_stmt(p: &Program, s: &Stmt, out: &mut Vec<Stmt>) {
    match s {
        Stmt::Skip => {}
        Stmt::Gate(Gate::Zdg(1), a) => out.push(Stmt::Gate(Gate::Z(1), a.clone())),
        Stmt::Init(v) => out.extend(v.iter().map(|a| Stmt::Init(vec![a.clone()]))),
        Stmt::Input(v) => out.extend(v.iter().map(|a| Stmt::Input(vec![a.clone()]))),
        Stmt::Measure { q, c } => out.extend(q.iter().zip(c).map(|(a, b)| Stmt::Measure { q: vec![a.clone()], c: vec![b.clone()] })),
        Stmt::Mixed { gate, qubits } => {
            let g = MixedGate { bodies: gate.bodies.iter().map(|b| canon_block(p, b)).collect(), ..(**gate).clone() };
            out.push(Stmt::Mixed { gate: Arc::new(g), qubits: qubits.clone() });
        }
        Stmt::If { cond, then, els } => {
            let (mut cond, mut then, mut els) = (canon_cond(cond), canon_block(p, then), canon_block(p, els));
            if then.is_empty() && !els.is_empty() {
                cond = canon_cond(&cond.not());
                std::mem::swap(&mut then, &mut els);
            }
            if then.is_empty() {
                return;
            }
            let classical = cond.addrs().iter().all(|a| !p.is_quantum(a));
            if els.is_empty() && (classical || then.len() > 1) {
                for t in then {
                    out.push(Stmt::If { cond: cond.clone(), then: vec![t], els: Vec::new() });
                }
            } else {
                out.push(Stmt::If { cond, then, els });
            }
        }
        o => out.push(o.clone()),
    }
}

pub fn alpha_equivalent(a: &Program, b: &Program) -> bool {
    canonical(a) == canonical(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::compile_str;

    #[test]
    fn bell_import() {
        let p = import("OPENQASM 2.0; include \"qelib1.inc\"; qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q[0] -> c[0];").unwrap();
        assert_eq!(p.body.len(), 4);
        assert!(matches!(&p.body[2], Stmt::If { .. }));
        assert!(matches!(import("qreg q[1]; u3(0.1,0.2,0.3) q[0];"), Err(QasmError::UnsupportedQasmConstruct(_))));
    }

    #[test]
    fn angles() {
        assert_eq!(angle_gate("pi"), Some(Gate::Z(1)));
        assert_eq!(angle_gate("pi/4"), Some(Gate::Z(3)));
        assert_eq!(angle_gate("-pi/8"), Some(Gate::Zdg(4)));
        assert_eq!(angle_gate("0.3"), None);
    }

    #[test]
    fn round_trip() {
        let src = "qreg psi[1]; qreg a[1]; qreg b[1]; creg pc[1]; creg ac[1];
            input psi; init a; init b;
            H(a); CNOT(a, b); CNOT(psi, a); H(psi);
            measure(psi, pc); measure(a, ac);
            ac => X(b); pc => Z(b);";
        let p = compile_str(src).unwrap().program;
        let q = export(&p).unwrap();
        let back = import(&q).unwrap();
        assert!(alpha_equivalent(&p, &back), "{q}");
    }
}
