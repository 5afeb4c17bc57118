//! Parameter instantiation, macro expansion, loop unrolling and desugaring.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

use super::ir::{BExp, Gate, MixedGate, Oracle, Program, Stmt, FORMAL};
use super::syntax::{Arg, Ast, IExpr, Item, MacroDecl, Pos, RegRef, SCond, SStmt, Sel};
use super::types::TypeError;
use crate::boolexpr::{BoolExpr, Var};
use crate::memory::Addr;

const MAX_DEPTH: usize = 64;
const ORACLE_FORMAL: &str = "%o";

/// Parameter values supplied from outside the program text.
pub type Params = BTreeMap<String, BigRational>;

pub fn elaborate(ast: &Ast, params: &Params, oracles: &BTreeMap<String, Arc<Oracle>>) -> Result<Program, TypeError> {
    let mut e = Elab { params: params.clone(), oracles: oracles.clone(), ..Elab::default() };
    let mut body = Vec::new();
    for item in &ast.items {
        e.item(item, &mut body)?;
    }
    Ok(Program { qregs: e.qregs, cregs: e.cregs, body })
}

#[derive(Default)]
struct Elab {
    params: Params,
    qregs: Vec<(String, u32)>,
    cregs: Vec<(String, u32)>,
    aliases: Vec<BTreeMap<String, Vec<Addr>>>,
    ints: Vec<BTreeMap<String, BigRational>>,
    macros: BTreeMap<String, Arc<MacroDecl>>,
    oracles: BTreeMap<String, Arc<Oracle>>,
    mixed: BTreeMap<String, Arc<MixedGate>>,
    depth: usize,
}

fn at(p: Pos) -> String {
    format!("{}:{}", p.line, p.col)
}

impl Elab {
    fn item(&mut self, item: &Item, out: &mut Vec<Stmt>) -> Result<(), TypeError> {
        match item {
            Item::QReg(n, w, p) | Item::CReg(n, w, p) => {
                if self.declared(n) {
                    return Err(TypeError::Duplicate(format!("register `{n}` at {}", at(*p))));
                }
                let w = self.index(w)?;
                if matches!(item, Item::QReg(..)) {
                    self.qregs.push((n.clone(), w));
                } else {
                    self.cregs.push((n.clone(), w));
                }
            }
            Item::Param(n, d, p) => {
                if !self.params.contains_key(n) {
                    match d {
                        Some(d) => {
                            let v = self.rational(d)?;
                            self.params.insert(n.clone(), v);
                        }
                        None => return Err(TypeError::UnboundParameter(format!("`{n}` at {}", at(*p)))),
                    }
                }
            }
            Item::Oracle(o) => {
                let n = self.index(&o.inputs)? as usize;
                let formal: Vec<Addr> = (0..n as u32).map(|i| Addr::new(ORACLE_FORMAL, i)).collect();
                self.aliases.push([(o.formal.clone(), formal)].into_iter().collect());
                let outs: Result<Vec<BExp>, TypeError> = o.outputs.iter().map(|c| self.cond(c)).collect();
                self.aliases.pop();
                let outputs = outs?
                    .iter()
                    .map(|b| {
                        b.to_boolexpr::<TypeError>(&mut |a| {
                            if &*a.reg == ORACLE_FORMAL {
                                Ok(BoolExpr::var(Var::input(a.idx)))
                            } else {
                                Err(TypeError::UnboundVariable(format!("oracle `{}` reads `{a}`", o.name)))
                            }
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.oracles.insert(o.name.clone(), Arc::new(Oracle { name: o.name.clone(), inputs: n, outputs }));
            }
            Item::Mixed(m) => {
                let arity = self.index(&m.arity)?;
                let formal: Vec<Addr> = (0..arity).map(|i| Addr::new(FORMAL, i)).collect();
                let mut weights = Vec::new();
                let mut bodies = Vec::new();
                self.aliases.push([(m.formal.clone(), formal)].into_iter().collect());
                let res = (|| {
                    for (w, b) in &m.branches {
                        weights.push(self.rational(w)?);
                        let mut body = Vec::new();
                        self.block(b, &mut body)?;
                        bodies.push(body);
                    }
                    Ok::<(), TypeError>(())
                })();
                self.aliases.pop();
                res?;
                let g = MixedGate { name: m.name.clone(), arity, weights, bodies };
                if !g.weights_valid() {
                    return Err(TypeError::WeightSumNotOne(format!("mixed gate `{}` at {}", m.name, at(m.pos))));
                }
                self.mixed.insert(m.name.clone(), Arc::new(g));
            }
            Item::Def(d) => {
                self.macros.insert(d.name.clone(), Arc::new(d.clone()));
            }
            Item::Stmt(s) => self.stmt(s, out)?,
        }
        Ok(())
    }

    fn declared(&self, n: &str) -> bool {
        self.qregs.iter().chain(&self.cregs).any(|(m, _)| m == n)
    }

    fn is_quantum(&self, a: &Addr) -> bool {
        &*a.reg == FORMAL || self.qregs.iter().any(|(n, _)| **n == *a.reg)
    }

    fn lookup_int(&self, n: &str) -> Option<BigRational> {
        self.ints.iter().rev().find_map(|s| s.get(n).cloned()).or_else(|| self.params.get(n).cloned())
    }

    fn lookup_reg(&self, n: &str) -> Option<Vec<Addr>> {
        if let Some(v) = self.aliases.iter().rev().find_map(|s| s.get(n)) {
            return Some(v.clone());
        }
        self.qregs.iter().chain(&self.cregs).find(|(m, _)| m == n).map(|(m, w)| (0..*w).map(|i| Addr::new(m, i)).collect())
    }

    fn rational(&self, e: &IExpr) -> Result<BigRational, TypeError> {
        Ok(match e {
            IExpr::Lit(n) => BigRational::from_integer(BigInt::from(*n)),
            IExpr::Name(n, p) => self.lookup_int(n).ok_or_else(|| TypeError::UnboundVariable(format!("`{n}` at {}", at(*p))))?,
            IExpr::Width(n, p) => {
                let r = self.lookup_reg(n).ok_or_else(|| TypeError::UnboundVariable(format!("register `{n}` at {}", at(*p))))?;
                BigRational::from_integer(BigInt::from(r.len()))
            }
            IExpr::Neg(a) => -self.rational(a)?,
            IExpr::Bin(op, a, b) => {
                let (x, y) = (self.rational(a)?, self.rational(b)?);
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => {
                        if y.is_zero() {
                            return Err(TypeError::NotAnInteger("division by zero".into()));
                        }
                        x / y
                    }
                    _ => {
                        if !y.is_integer() || y.is_negative() || y > BigRational::from_integer(4096.into()) {
                            return Err(TypeError::NotAnInteger(format!("exponent {y}")));
                        }
                        let k = y.to_integer().to_u32().unwrap();
                        num_traits::pow(x, k as usize)
                    }
                }
            }
        })
    }

    fn int(&self, e: &IExpr) -> Result<i64, TypeError> {
        let v = self.rational(e)?;
        if !v.is_integer() {
            return Err(TypeError::NotAnInteger(format!("{v}")));
        }
        v.to_integer().to_i64().ok_or_else(|| TypeError::NotAnInteger(format!("{v}")))
    }

    fn index(&self, e: &IExpr) -> Result<u32, TypeError> {
        let v = self.int(e)?;
        u32::try_from(v).map_err(|_| TypeError::IndexOutOfRange(format!("{v}")))
    }

    fn regref(&self, r: &RegRef) -> Result<Vec<Addr>, TypeError> {
        let base = self
            .lookup_reg(&r.name)
            .ok_or_else(|| TypeError::UnboundVariable(format!("register `{}` at {}", r.name, at(r.pos))))?;
        let oob = |i: i64| TypeError::IndexOutOfRange(format!("`{}[{i}]` at {} (width {})", r.name, at(r.pos), base.len()));
        match &r.sel {
            Sel::All => Ok(base),
            Sel::Index(i) => {
                let i = self.int(i)?;
                base.get(usize::try_from(i).map_err(|_| oob(i))?).cloned().map(|a| vec![a]).ok_or_else(|| oob(i))
            }
            Sel::Slice(i, j) => {
                let (i, j) = (self.int(i)?, self.int(j)?);
                if i < 0 || j >= base.len() as i64 {
                    return Err(oob(if i < 0 { i } else { j }));
                }
                if j < i {
                    return Ok(Vec::new());
                }
                Ok(base[i as usize..=j as usize].to_vec())
            }
        }
    }

    fn qref(&self, r: &RegRef) -> Result<Vec<Addr>, TypeError> {
        let v = self.regref(r)?;
        if let Some(a) = v.iter().find(|a| !self.is_quantum(a)) {
            return Err(TypeError::KindMismatch(format!("`{a}` at {} is not a quantum cell", at(r.pos))));
        }
        Ok(v)
    }

    fn cref(&self, r: &RegRef) -> Result<Vec<Addr>, TypeError> {
        let v = self.regref(r)?;
        if let Some(a) = v.iter().find(|a| self.is_quantum(a)) {
            return Err(TypeError::KindMismatch(format!("`{a}` at {} is not a classical cell", at(r.pos))));
        }
        Ok(v)
    }

    fn cond(&self, c: &SCond) -> Result<BExp, TypeError> {
        Ok(match c {
            SCond::Const(b) => BExp::Const(*b),
            SCond::Reg(r) => BExp::all(&self.regref(r)?),
            SCond::Eq(r, n) => {
                let a = self.regref(r)?;
                let n = self.int(n)?;
                if n < 0 || (a.len() < 63 && n >= 1i64 << a.len()) {
                    return Err(TypeError::WidthMismatch(format!("value {n} does not fit `{}` at {}", r.name, at(r.pos))));
                }
                BExp::equals(&a, n as u64)
            }
            SCond::Not(a) => self.cond(a)?.not(),
            SCond::And(a, b) => self.cond(a)?.and(self.cond(b)?),
            SCond::Xor(a, b) => self.cond(a)?.xor(self.cond(b)?),
            SCond::Or(a, b) => self.cond(a)?.or(self.cond(b)?),
        })
    }

    fn block(&mut self, b: &[SStmt], out: &mut Vec<Stmt>) -> Result<(), TypeError> {
        for s in b {
            self.stmt(s, out)?;
        }
        Ok(())
    }

    fn sub_block(&mut self, b: &[SStmt]) -> Result<Vec<Stmt>, TypeError> {
        let mut v = Vec::new();
        self.block(b, &mut v)?;
        if v.is_empty() {
            v.push(Stmt::Skip);
        }
        Ok(v)
    }

    fn stmt(&mut self, s: &SStmt, out: &mut Vec<Stmt>) -> Result<(), TypeError> {
        match s {
            SStmt::Skip => out.push(Stmt::Skip),
            SStmt::Init(r) => out.push(Stmt::Init(self.qref(r)?)),
            SStmt::Input(r) => out.push(Stmt::Input(self.qref(r)?)),
            SStmt::Reset(r) => out.extend(self.qref(r)?.into_iter().map(Stmt::Reset)),
            SStmt::Measure(q, c) => {
                let (q, c) = (self.qref(q)?, self.cref(c)?);
                if q.len() != c.len() {
                    return Err(TypeError::WidthMismatch(format!("measure of {} qubits into {} bits", q.len(), c.len())));
                }
                out.push(Stmt::Measure { q, c });
            }
            SStmt::Assign { target, oracle, arg, pos } => {
                let f = self
                    .oracles
                    .get(oracle)
                    .cloned()
                    .ok_or_else(|| TypeError::UnknownOracle(format!("`{oracle}` at {}", at(*pos))))?;
                let (t, a) = (self.cref(target)?, self.cref(arg)?);
                if a.len() != f.inputs || t.len() != f.outputs.len() {
                    return Err(TypeError::ArityMismatch(format!(
                        "oracle `{oracle}` maps {} to {} bits, used {} to {} at {}",
                        f.inputs,
                        f.outputs.len(),
                        a.len(),
                        t.len(),
                        at(*pos)
                    )));
                }
                out.push(Stmt::Assign { target: t, oracle: f, args: a });
            }
            SStmt::If(c, t, e) => {
                let cond = self.cond(c)?;
                let then = self.sub_block(t)?;
                let els = self.sub_block(e)?;
                out.push(Stmt::If { cond, then, els });
            }
            SStmt::For(v, lo, hi, body) => {
                let (lo, hi) = (self.int(lo)?, self.int(hi)?);
                for i in lo..=hi {
                    self.ints.push([(v.clone(), BigRational::from_integer(i.into()))].into_iter().collect());
                    let r = self.block(body, out);
                    self.ints.pop();
                    r?;
                }
            }
            SStmt::Let(v, e, body) => {
                let x = self.rational(e)?;
                self.ints.push([(v.clone(), x)].into_iter().collect());
                let r = self.block(body, out);
                self.ints.pop();
                r?;
            }
            SStmt::Iterate(r, f, pos) => {
                let n = self.regref(r)?.len();
                for k in 0..n {
                    let arg = Arg::Int(IExpr::Lit(k as u64));
                    self.call(f, &None, &[arg], *pos, out)?;
                }
            }
            SStmt::Call { name, index, args, pos } => self.call(name, index, args, *pos, out)?,
        }
        Ok(())
    }

    fn arg_reg(&self, a: &Arg, pos: Pos) -> Result<Vec<Addr>, TypeError> {
        match a {
            Arg::Reg(r) => self.qref(r),
            Arg::Name(n, p) => self.qref(&RegRef { name: n.clone(), sel: Sel::All, pos: *p }),
            Arg::Int(_) => Err(TypeError::KindMismatch(format!("expected a register argument at {}", at(pos)))),
        }
    }

    fn call(&mut self, name: &str, index: &Option<IExpr>, args: &[Arg], pos: Pos, out: &mut Vec<Stmt>) -> Result<(), TypeError> {
        let k = index.as_ref().map(|e| self.index(e)).transpose()?;
        let need = |n: usize| -> Result<(), TypeError> {
            if args.len() != n {
                return Err(TypeError::ArityMismatch(format!("`{name}` takes {n} arguments, given {} at {}", args.len(), at(pos))));
            }
            Ok(())
        };
        let no_index = || -> Result<(), TypeError> {
            if k.is_some() {
                return Err(TypeError::UnknownGate(format!("`{name}` takes no index at {}", at(pos))));
            }
            Ok(())
        };
        let single = match name {
            "H" => Some(Gate::H),
            "X" => Some(Gate::X),
            "Z" => Some(Gate::Z(k.unwrap_or(1))),
            "Zdg" => Some(Gate::Zdg(k.unwrap_or(1))),
            "S" => Some(Gate::Z(2)),
            "T" => Some(Gate::Z(3)),
            "Sdg" => Some(Gate::Zdg(2)),
            "Tdg" => Some(Gate::Zdg(3)),
            _ => None,
        };
        if let Some(g) = single {
            if matches!(name, "H" | "X" | "S" | "T" | "Sdg" | "Tdg") {
                no_index()?;
            }
            if let Gate::Z(0) | Gate::Zdg(0) = g {
                return Err(TypeError::UnknownGate(format!("`{name}[0]` at {}", at(pos))));
            }
            need(1)?;
            for a in self.arg_reg(&args[0], pos)? {
                out.push(Stmt::Gate(g, a));
            }
            return Ok(());
        }
        let controlled = |g: Gate, n_ctrl: usize, this: &Self, out: &mut Vec<Stmt>| -> Result<(), TypeError> {
            need(n_ctrl + 1)?;
            let regs: Vec<Vec<Addr>> = args.iter().map(|a| this.arg_reg(a, pos)).collect::<Result<_, _>>()?;
            let t = &regs[n_ctrl];
            for (i, tq) in t.iter().enumerate() {
                let mut cond = BExp::Const(true);
                for c in &regs[..n_ctrl] {
                    let ci = if c.len() == 1 {
                        &c[0]
                    } else if c.len() == t.len() {
                        &c[i]
                    } else {
                        return Err(TypeError::WidthMismatch(format!("`{name}` operand widths at {}", at(pos))));
                    };
                    cond = if cond == BExp::Const(true) { BExp::Bit(ci.clone()) } else { cond.and(BExp::Bit(ci.clone())) };
                }
                out.push(Stmt::If { cond, then: vec![Stmt::Gate(g, tq.clone())], els: vec![Stmt::Skip] });
            }
            Ok(())
        };
        match name {
            "CNOT" | "CX" => {
                no_index()?;
                return controlled(Gate::X, 1, self, out);
            }
            "CZ" => return controlled(Gate::Z(k.unwrap_or(1)), 1, self, out),
            "CZdg" => return controlled(Gate::Zdg(k.unwrap_or(1)), 1, self, out),
            "CCX" | "Toffoli" => {
                no_index()?;
                return controlled(Gate::X, 2, self, out);
            }
            "SWAP" => {
                no_index()?;
                need(2)?;
                let (a, b) = (self.arg_reg(&args[0], pos)?, self.arg_reg(&args[1], pos)?);
                if a.len() != b.len() {
                    return Err(TypeError::WidthMismatch(format!("SWAP operand widths at {}", at(pos))));
                }
                for (x, y) in a.iter().zip(&b) {
                    for (c, t) in [(x, y), (y, x), (x, y)] {
                        out.push(Stmt::If { cond: BExp::Bit(c.clone()), then: vec![Stmt::Gate(Gate::X, t.clone())], els: vec![Stmt::Skip] });
                    }
                }
                return Ok(());
            }
            _ => {}
        }
        if let Some(g) = self.mixed.get(name).cloned() {
            no_index()?;
            need(1)?;
            let q = self.arg_reg(&args[0], pos)?;
            let n = g.arity as usize;
            if n == 0 || q.len() % n != 0 {
                return Err(TypeError::ArityMismatch(format!("mixed gate `{name}` of arity {n} on {} qubits at {}", q.len(), at(pos))));
            }
            for chunk in q.chunks(n) {
                out.push(Stmt::Mixed { gate: g.clone(), qubits: chunk.to_vec() });
            }
            return Ok(());
        }
        let Some(m) = self.macros.get(name).cloned() else {
            return Err(TypeError::UnknownGate(format!("`{name}` at {}", at(pos))));
        };
        no_index()?;
        need(m.params.len())?;
        if self.depth >= MAX_DEPTH {
            return Err(TypeError::MacroDepth(format!("`{name}` at {}", at(pos))));
        }
        let mut regs = BTreeMap::new();
        let mut ints = BTreeMap::new();
        for (p, a) in m.params.iter().zip(args) {
            match a {
                Arg::Reg(r) => {
                    regs.insert(p.clone(), self.regref(r)?);
                }
                Arg::Name(n, np) => {
                    if let Some(r) = self.lookup_reg(n) {
                        regs.insert(p.clone(), r);
                    } else {
                        ints.insert(p.clone(), self.rational(&IExpr::Name(n.clone(), *np))?);
                    }
                }
                Arg::Int(e) => {
                    ints.insert(p.clone(), self.rational(e)?);
                }
            }
        }
        self.aliases.push(regs);
        self.ints.push(ints);
        self.depth += 1;
        let r = self.block(&m.body, out);
        self.depth -= 1;
        self.ints.pop();
        self.aliases.pop();
        r
    }
}

/// Oracles from a JSON sidecar: `[{"name", "inputs", "outputs": [[[i, ...], ...], ...]}]`,
/// each output an XOR of monomials given as lists of input indices.
pub fn oracles_from_json(v: &serde_json::Value) -> Result<BTreeMap<String, Arc<Oracle>>, String> {
    let arr = v.as_array().ok_or("oracle file must hold a JSON array")?;
    let mut out = BTreeMap::new();
    for o in arr {
        let name = o["name"].as_str().ok_or("oracle without name")?.to_string();
        let inputs = o["inputs"].as_u64().ok_or("oracle without inputs")? as usize;
        let outs = o["outputs"].as_array().ok_or("oracle without outputs")?;
        let mut outputs = Vec::new();
        for e in outs {
            let mut acc = BoolExpr::zero();
            for m in e.as_array().ok_or("output must be a list of monomials")? {
                let mut t = BoolExpr::one();
                for i in m.as_array().ok_or("monomial must be a list of indices")? {
                    let i = i.as_u64().ok_or("bad index")?;
                    if i as usize >= inputs {
                        return Err(format!("oracle `{name}` index {i} out of range"));
                    }
                    t = t.and(&BoolExpr::var(Var::input(i as u32)));
                }
                acc = acc.xor(&t);
            }
            outputs.push(acc);
        }
        out.insert(name.clone(), Arc::new(Oracle { name, inputs, outputs }));
    }
    Ok(out)
}

/// Parses `name=value` pairs with rational values such as `p=1/10`.
pub fn parse_param(s: &str) -> Result<(String, BigRational), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v = v.trim();
    let q = match v.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| format!("bad number `{v}`"))?;
            let b: BigInt = b.trim().parse().map_err(|_| format!("bad number `{v}`"))?;
            if b.is_zero() {
                return Err("zero denominator".into());
            }
            BigRational::new(a, b)
        }
        None => BigRational::from_integer(v.parse::<BigInt>().map_err(|_| format!("bad number `{v}`"))?),
    };
    Ok((k.trim().to_string(), q))
}
