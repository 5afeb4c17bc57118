//! Assertions on execution results: `≡ᵣ`, `≼ᵣ` and `Pr(cond) ~ r`.

use serde_json::json;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::boolexpr::{BoolExpr, Var};
use crate::exact::ExactReal;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use crate::hps::{Hps, HpsError};
use crate::interval::Interval;
use crate::lang::TypedProg;
use crate::memory::Addr;
use crate::prob::{norm_sqr, NormError, Probability};
use crate::rewrite::{check_refine, equivalent, history_values, normalize, Equivalence, Refinement, RewriteTrace, Strategy};
use crate::semantics::{exec, ExecContext, ExecError};

/// Default interval precision in bits.
pub const DEFAULT_PRECISION: u32 = 96;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Holds,
    Fails(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails(_) => "fails",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Holds => write!(f, "holds"),
            Verdict::Fails(s) => write!(f, "fails: {s}"),
            Verdict::Inconclusive(s) => write!(f, "inconclusive: {s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn parse(s: &str) -> Option<Rel> {
        Some(match s {
            "<=" | "≤" => Rel::Le,
            "<" => Rel::Lt,
            "=" | "==" => Rel::Eq,
            ">=" | "≥" => Rel::Ge,
            ">" => Rel::Gt,
            _ => return None,
        })
    }

    fn accepts(self, o: Ordering) -> bool {
        match self {
            Rel::Le => o != Ordering::Greater,
            Rel::Lt => o == Ordering::Less,
            Rel::Eq => o == Ordering::Equal,
            Rel::Ge => o != Ordering::Less,
            Rel::Gt => o == Ordering::Greater,
        }
    }
}

/// Probability bound: an exact value or an enclosure of a real.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Exact(ExactReal),
    Enclosure(Interval),
}

impl Bound {
    pub fn rational(n: i64, d: i64) -> Bound {
        Bound::Exact(ExactReal::from_ratio(n, d))
    }

    /// `4/π²`.
    pub fn four_over_pi_sq(prec: u32) -> Bound {
        let pi = crate::interval::pi(prec + 8);
        Bound::Enclosure(Interval::from_int(4, prec + 8).div(&pi.square()).expect("π² is positive"))
    }

    pub fn to_interval(&self, prec: u32) -> Interval {
        match self {
            Bound::Exact(e) => e.to_interval(prec),
            Bound::Enclosure(i) => i.clone(),
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Exact(e) => write!(f, "{e}"),
            Bound::Enclosure(i) => write!(f, "{i}"),
        }
    }
}

/// Boolean formula over register value atoms `⌈cells⌉ = value`; an atom on
/// quantum cells holds in a history whose residual state is `|value⟩` there.
#[derive(Clone, Debug, PartialEq)]
pub enum Pred {
    Const(bool),
    Atom { cells: Vec<Addr>, value: Vec<BoolExpr> },
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

impl Pred {
    /// `⌈cells⌉ = n`, cell 0 least significant.
    pub fn eq_int(cells: &[Addr], n: u64) -> Pred {
        Pred::Atom { cells: cells.to_vec(), value: (0..cells.len()).map(|i| BoolExpr::constant(n >> i & 1 == 1)).collect() }
    }

    pub fn eq_exprs(cells: &[Addr], value: Vec<BoolExpr>) -> Pred {
        Pred::Atom { cells: cells.to_vec(), value }
    }

    pub fn not(self) -> Pred {
        Pred::Not(Box::new(self))
    }

    pub fn and(self, o: Pred) -> Pred {
        Pred::And(Box::new(self), Box::new(o))
    }

    pub fn or(self, o: Pred) -> Pred {
        Pred::Or(Box::new(self), Box::new(o))
    }

    fn atoms<'a>(&'a self, out: &mut Vec<(&'a [Addr], &'a [BoolExpr])>) {
        match self {
            Pred::Const(_) => {}
            Pred::Atom { cells, value } => out.push((cells, value)),
            Pred::Not(p) => p.atoms(out),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }

    /// The predicate as a guard on paths, when every quantum atom is fixed
    /// by the history.
    pub fn guard(&self, h: &Hps) -> Option<BoolExpr> {
        Some(match self {
            Pred::Const(b) => BoolExpr::constant(*b),
            Pred::Atom { cells, value } => {
                let mut g = BoolExpr::one();
                let det = history_determined(h);
                for (a, v) in cells.iter().zip(value) {
                    let cur = match h.mem.qu.get(a) {
                        Some(e) => {
                            if !e.vars().iter().all(|x| x.is_input() || det.contains(x)) {
                                return None;
                            }
                            e.clone()
                        }
                        None => h.mem.cl.present_or_zero(a),
                    };
                    g = g.and(&cur.xor(v).not());
                }
                g
            }
            Pred::Not(p) => p.guard(h)?.not(),
            Pred::And(a, b) => a.guard(h)?.and(&b.guard(h)?),
            Pred::Or(a, b) => a.guard(h)?.or(&b.guard(h)?),
        })
    }

    /// Truth in one history given present values and the history's state.
    fn eval_world(&self, present: &BTreeMap<Addr, bool>, q: &dyn Fn(&[Addr], &[bool]) -> bool, rho: &BTreeMap<Var, bool>) -> bool {
        match self {
            Pred::Const(b) => *b,
            Pred::Atom { cells, value } => {
                let want: Vec<bool> = value.iter().map(|e| e.evaluate(|v| rho.get(&v).copied()).unwrap_or(false)).collect();
                if cells.iter().all(|a| present.contains_key(a)) {
                    cells.iter().zip(&want).all(|(a, w)| present[a] == *w)
                } else {
                    q(cells, &want)
                }
            }
            Pred::Not(p) => !p.eval_world(present, q, rho),
            Pred::And(a, b) => a.eval_world(present, q, rho) && b.eval_world(present, q, rho),
            Pred::Or(a, b) => a.eval_world(present, q, rho) || b.eval_world(present, q, rho),
        }
    }
}

/// Path variables whose value is fixed by the full history and the inputs.
fn history_determined(h: &Hps) -> BTreeSet<Var> {
    let vals = history_values(&h.mem.cl);
    let mut det: BTreeSet<Var> = h.input_vars();
    loop {
        let mut changed = false;
        for e in &vals {
            let free: Vec<Var> = e.vars().into_iter().filter(|v| !det.contains(v)).collect();
            if free.len() == 1 && e.is_linear_in(free[0]) {
                det.insert(free[0]);
                changed = true;
            }
        }
        if !changed {
            return det;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AssertError {
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Hps(#[from] HpsError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// How a probability was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Symbolic,
    Enumeration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbValue {
    pub value: Probability,
    pub method: Method,
}

/// `Pr(cond)` in `h`: guarded norm when possible, else enumeration of ξ
/// (hull over input assignments).
pub fn probability(h: &Hps, cond: &Pred, prec: u32) -> Result<ProbValue, AssertError> {
    if let Some(g) = cond.guard(h) {
        let guarded = if g.is_one() { h.clone() } else { h.guard_mul(&g) };
        let st = Strategy { allow_pe: true, ..Strategy::default() };
        let (n, _) = normalize(&guarded, &st);
        match norm_sqr(&n, prec) {
            Ok(p) => return Ok(ProbValue { value: p, method: Method::Symbolic }),
            Err(NormError::TooLarge(_)) | Err(NormError::InputDependent) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (lo, hi) = enumerate_probability(h, cond)?;
    let slack = 1e-9;
    let iv = Interval::hull(&f64_interval((lo - slack).max(0.0), prec), &f64_interval(hi + slack, prec));
    Ok(ProbValue { value: Probability::Approx(iv), method: Method::Enumeration })
}

fn f64_interval(x: f64, prec: u32) -> Interval {
    let q = BigRational::from_float(x).unwrap_or_default();
    Interval::from_rational(&q, prec)
}

/// Minimum and maximum of `Pr(cond)` over input assignments, by ξ.
pub fn enumerate_probability(h: &Hps, cond: &Pred) -> Result<(f64, f64), AssertError> {
    let mut atoms = Vec::new();
    cond.atoms(&mut atoms);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (rho, w) in h.xi_all_inputs()? {
        let mut p = 0.0;
        for (key, v) in &w.worlds {
            let present = w.present_of(key);
            let norm = crate::hps::WorldVector::world_norm_sqr(v);
            if norm == 0.0 {
                continue;
            }
            let q = |cells: &[Addr], want: &[bool]| {
                let bits: Vec<Option<usize>> = cells.iter().map(|a| w.qaddrs.iter().position(|x| x == a)).collect();
                let off: f64 = v
                    .iter()
                    .filter(|(b, _)| bits.iter().zip(want).any(|(i, t)| i.is_some_and(|i| (*b >> i & 1 == 1) != *t)))
                    .map(|(_, z)| z.norm_sqr())
                    .sum();
                off <= 1e-12 * norm.max(1e-300)
            };
            if cond.eval_world(&present, &q, &rho) {
                p += norm;
            }
        }
        lo = lo.min(p);
        hi = hi.max(p);
    }
    Ok((lo, hi))
}

/// Compares a probability to a bound; `Inconclusive` when the enclosures overlap.
pub fn compare(p: &Probability, rel: Rel, bound: &Bound, prec: u32) -> Verdict {
    if let (Probability::Exact(a), Bound::Exact(b)) = (p, bound) {
        if let Ok(o) = a.cmp_exact(b) {
            return if rel.accepts(o) { Verdict::Holds } else { Verdict::Fails(format!("Pr = {a}, not {} {b}", rel.symbol())) };
        }
    }
    let (pi, bi) = (p.to_interval(prec), bound.to_interval(prec));
    let order = if pi.lt(&bi) {
        Some(Ordering::Less)
    } else if bi.lt(&pi) {
        Some(Ordering::Greater)
    } else {
        None
    };
    match (order, rel) {
        (Some(o), r) => {
            if r.accepts(o) {
                Verdict::Holds
            } else {
                Verdict::Fails(format!("Pr ∈ {pi}, not {} {bi}", rel.symbol()))
            }
        }
        (None, Rel::Ge) if bi.le_certain(&pi) => Verdict::Holds,
        (None, Rel::Le) if pi.le_certain(&bi) => Verdict::Holds,
        _ => Verdict::Inconclusive(format!("Pr ∈ {pi} overlaps {bi}")),
    }
}

#[derive(Clone, Debug)]
pub struct ProbCheck {
    pub verdict: Verdict,
    pub probability: ProbValue,
}

pub fn check_prob(h: &Hps, cond: &Pred, rel: Rel, bound: &Bound, prec: u32) -> Result<ProbCheck, AssertError> {
    let probability = probability(h, cond, prec)?;
    let verdict = compare(&probability.value, rel, bound, prec);
    Ok(ProbCheck { verdict, probability })
}

/// `h ≡ target` after normalizing both.
pub fn check_equiv(h: &Hps, target: &Hps, st: &Strategy) -> (Verdict, RewriteTrace) {
    let (a, mut trace) = normalize(h, st);
    let (b, tb) = normalize(target, st);
    trace.extend(tb);
    let v = match equivalent(&a, &b) {
        Equivalence::Holds(_) => Verdict::Holds,
        Equivalence::Fails(c) => {
            let inputs: Vec<String> = c.inputs.iter().map(|(v, b)| format!("{v}={}", *b as u8)).collect();
            Verdict::Fails(format!("{} at {{{}}}", c.detail, inputs.join(", ")))
        }
        Equivalence::Inconclusive(s) => Verdict::Inconclusive(s),
    };
    (v, trace)
}

/// `h ≼ target`, with the discarded factor on success.
pub fn check_sat(h: &Hps, target: &Hps, st: &Strategy) -> (Verdict, Option<Hps>, RewriteTrace) {
    let (r, trace) = check_refine(h, target, st);
    match r {
        Refinement::Holds(w) => (Verdict::Holds, Some(*w), trace),
        Refinement::Fails(s) => (Verdict::Fails(s), None, trace),
        Refinement::Inconclusive(s) => (Verdict::Inconclusive(s), None, trace),
    }
}

#[derive(Clone, Debug)]
pub enum Assertion {
    EquivR(Hps),
    SatR(Hps),
    Prob { cond: Pred, rel: Rel, bound: Bound },
    /// Conjunction.
    All(Vec<Assertion>),
}

/// Outcome of one assertion on an execution result.
#[derive(Clone, Debug)]
pub struct Checked {
    pub verdict: Verdict,
    pub probability: Option<ProbValue>,
    pub witness: Option<Hps>,
    pub trace: RewriteTrace,
    pub parts: Vec<Checked>,
}

impl Checked {
    pub fn leaf(verdict: Verdict, trace: RewriteTrace) -> Checked {
        Checked { verdict, probability: None, witness: None, trace, parts: Vec::new() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "verdict": self.verdict.name(),
            "detail": self.verdict.to_string(),
        });
        if let Some(p) = &self.probability {
            v["probability"] = json!(p.value.to_string());
            v["probability_f64"] = json!(p.value.to_f64());
            v["method"] = json!(match p.method {
                Method::Symbolic => "symbolic",
                Method::Enumeration => "enumeration",
            });
        }
        if let Some(w) = &self.witness {
            v["witness"] = w.to_json();
        }
        if !self.parts.is_empty() {
            v["parts"] = self.parts.iter().map(Checked::to_json).collect();
        }
        v
    }
}

/// Conjunction of verdicts: any failure fails, else any doubt is inconclusive.
pub fn conjoin<'a>(vs: impl IntoIterator<Item = &'a Verdict>) -> Verdict {
    let mut out = Verdict::Holds;
    for v in vs {
        match v {
            Verdict::Fails(_) => return v.clone(),
            Verdict::Inconclusive(_) if out.holds() => out = v.clone(),
            _ => {}
        }
    }
    out
}

pub fn check_assertion(h: &Hps, a: &Assertion, st: &Strategy, prec: u32) -> Result<Checked, AssertError> {
    Ok(match a {
        Assertion::EquivR(target) => {
            let (v, tr) = check_equiv(h, target, st);
            Checked::leaf(v, tr)
        }
        Assertion::SatR(target) => {
            let (v, w, tr) = check_sat(h, target, st);
            Checked { witness: w, ..Checked::leaf(v, tr) }
        }
        Assertion::Prob { cond, rel, bound } => {
            let c = check_prob(h, cond, *rel, bound, prec)?;
            Checked { probability: Some(c.probability), ..Checked::leaf(c.verdict, RewriteTrace::default()) }
        }
        Assertion::All(parts) => {
            let parts = parts.iter().map(|p| check_assertion(h, p, st, prec)).collect::<Result<Vec<_>, _>>()?;
            let mut trace = RewriteTrace::default();
            for p in &parts {
                trace.extend(p.trace.clone());
            }
            let verdict = conjoin(parts.iter().map(|p| &p.verdict));
            Checked { parts, ..Checked::leaf(verdict, trace) }
        }
    })
}

#[derive(Clone, Debug)]
pub struct HoareTriple {
    pub pre: Hps,
    pub prog: TypedProg,
    pub post: Assertion,
}

#[derive(Clone, Debug)]
pub struct TripleReport {
    pub check: Checked,
    pub result: Hps,
    pub exec_trace: RewriteTrace,
    pub exec_seconds: f64,
    pub check_seconds: f64,
}

impl TripleReport {
    pub fn verdict(&self) -> &Verdict {
        &self.check.verdict
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "check": self.check.to_json(),
            "rewrites": self.exec_trace.to_json(),
            "check_rewrites": self.check.trace.to_json(),
            "exec_seconds": self.exec_seconds,
            "check_seconds": self.check_seconds,
        })
    }
}

/// Executes the program on the precondition and checks the postcondition.
pub fn check_triple(t: &HoareTriple, ctx: &mut ExecContext, prec: u32) -> Result<TripleReport, AssertError> {
    let start = Instant::now();
    let result = exec(&t.prog, &t.pre, ctx)?;
    let exec_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let check = check_assertion(&result, &t.post, &ctx.strategy(), prec)?;
    Ok(TripleReport {
        check,
        result,
        exec_trace: std::mem::take(&mut ctx.trace),
        exec_seconds,
        check_seconds: start.elapsed().as_secs_f64(),
    })
}

// ---- bound expressions -------------------------------------------------

#[derive(Clone, Debug)]
enum Num {
    Q(BigRational),
    I(Interval),
}

impl Num {
    fn iv(&self, prec: u32) -> Interval {
        match self {
            Num::Q(q) => Interval::from_rational(q, prec),
            Num::I(i) => i.clone(),
        }
    }
}

/// Parses a bound such as `15/16`, `4/pi^2` or `1 - (1 - 4/pi^2)^3`.
pub fn parse_bound(src: &str, prec: u32) -> Result<Bound, String> {
    let toks: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = BoundParser { t: &toks, i: 0, prec: prec + 16 };
    let v = p.sum()?;
    if p.i != toks.len() {
        return Err(format!("unexpected `{}` in bound", toks[p.i..].iter().collect::<String>()));
    }
    Ok(match v {
        Num::Q(q) => Bound::Exact(ExactReal::from_rational(q)),
        Num::I(i) => Bound::Enclosure(i),
    })
}

struct BoundParser<'a> {
    t: &'a [char],
    i: usize,
    prec: u32,
}

impl BoundParser<'_> {
    fn peek(&self) -> Option<char> {
        self.t.get(self.i).copied()
    }

    fn bin(&self, op: char, a: Num, b: Num) -> Result<Num, String> {
        if let (Num::Q(x), Num::Q(y)) = (&a, &b) {
            return Ok(Num::Q(match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                _ if y.is_zero() => return Err("division by zero in bound".into()),
                _ => x / y,
            }));
        }
        let (x, y) = (a.iv(self.prec), b.iv(self.prec));
        Ok(Num::I(match op {
            '+' => x.add(&y),
            '-' => x.sub(&y),
            '*' => x.mul(&y),
            _ => x.div(&y).ok_or("division by an interval containing zero")?,
        }))
    }

    fn sum(&mut self) -> Result<Num, String> {
        let mut v = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = self.bin(op, v, r)?;
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<Num, String> {
        let mut v = self.power()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.i += 1;
            let r = self.power()?;
            v = self.bin(op, v, r)?;
        }
        Ok(v)
    }

    fn power(&mut self) -> Result<Num, String> {
        let b = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(b);
        }
        self.i += 1;
        let Num::Q(e) = self.atom()? else {
            return Err("exponent must be a natural number".into());
        };
        let Some(k) = e.is_integer().then(|| e.to_integer()).and_then(|n| u32::try_from(n).ok()) else {
            return Err("exponent must be a natural number".into());
        };
        let mut acc = Num::Q(BigRational::one());
        for _ in 0..k {
            acc = self.bin('*', acc, b.clone())?;
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Num, String> {
        match self.peek() {
            Some('(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("expected `)` in bound".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some('-') => {
                self.i += 1;
                let v = self.power()?;
                self.bin('-', Num::Q(BigRational::zero()), v)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.i += 1;
                }
                let n: String = self.t[start..self.i].iter().collect();
                Ok(Num::Q(BigRational::from_integer(n.parse::<BigInt>().map_err(|e| e.to_string())?)))
            }
            _ if self.t[self.i..].starts_with(&['p', 'i']) => {
                self.i += 2;
                Ok(Num::I(crate::interval::pi(self.prec)))
            }
            _ if self.t[self.i..].starts_with(&['π']) => {
                self.i += 1;
                Ok(Num::I(crate::interval::pi(self.prec)))
            }
            _ => Err(format!("unexpected end or symbol at position {} of bound", self.i)),
        }
    }
}

// ---- JSON sidecar ------------------------------------------------------

pub fn bound_to_json(b: &Bound) -> serde_json::Value {
    match b {
        Bound::Exact(e) => match e.as_rational() {
            Some(q) => json!(q.to_string()),
            None => json!({ "exact": e }),
        },
        Bound::Enclosure(i) => json!({ "lo": i.lo_rational().to_string(), "hi": i.hi_rational().to_string() }),
    }
}

pub fn bound_from_json(v: &serde_json::Value, prec: u32) -> Result<Bound, String> {
    if let Some(s) = v.as_str() {
        return parse_bound(s, prec);
    }
    if let Some(n) = v.as_i64() {
        return Ok(Bound::Exact(ExactReal::from_int(n)));
    }
    if let Some(e) = v.get("exact") {
        return serde_json::from_value(e.clone()).map(Bound::Exact).map_err(|e| e.to_string());
    }
    let rat = |k: &str| -> Result<BigRational, String> {
        v.get(k).and_then(|x| x.as_str()).ok_or(format!("bound needs `{k}`"))?.parse::<BigRational>().map_err(|e| e.to_string())
    };
    let (lo, hi) = (rat("lo")?, rat("hi")?);
    Ok(Bound::Enclosure(Interval::hull(&Interval::from_rational(&lo, prec), &Interval::from_rational(&hi, prec))))
}

pub fn pred_to_json(p: &Pred) -> serde_json::Value {
    match p {
        Pred::Const(b) => json!(b),
        Pred::Atom { cells, value } => json!({
            "eq": {
                "cells": cells.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "value": value.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            }
        }),
        Pred::Not(a) => json!({ "not": pred_to_json(a) }),
        Pred::And(a, b) => json!({ "and": [pred_to_json(a), pred_to_json(b)] }),
        Pred::Or(a, b) => json!({ "or": [pred_to_json(a), pred_to_json(b)] }),
    }
}

pub fn pred_from_json(v: &serde_json::Value) -> Result<Pred, String> {
    if let Some(b) = v.as_bool() {
        return Ok(Pred::Const(b));
    }
    let pair = |k: &str| -> Result<Option<(Pred, Pred)>, String> {
        match v.get(k).and_then(|x| x.as_array()) {
            Some(a) if a.len() == 2 => Ok(Some((pred_from_json(&a[0])?, pred_from_json(&a[1])?))),
            Some(_) => Err(format!("`{k}` takes two operands")),
            None => Ok(None),
        }
    };
    if let Some(x) = v.get("not") {
        return Ok(pred_from_json(x)?.not());
    }
    if let Some((a, b)) = pair("and")? {
        return Ok(a.and(b));
    }
    if let Some((a, b)) = pair("or")? {
        return Ok(a.or(b));
    }
    let eq = v.get("eq").ok_or("predicate must be a boolean, `eq`, `not`, `and` or `or`")?;
    let cells: Vec<Addr> = eq
        .get("cells")
        .and_then(|c| c.as_array())
        .ok_or("`eq` needs `cells`")?
        .iter()
        .map(|c| c.as_str().ok_or("cell must be a string".to_string())?.parse::<Addr>().map_err(|e| format!("{e:?}")))
        .collect::<Result<_, _>>()?;
    match eq.get("value") {
        Some(serde_json::Value::Number(n)) => Ok(Pred::eq_int(&cells, n.as_u64().ok_or("value must be a natural number")?)),
        Some(serde_json::Value::Array(vs)) => {
            if vs.len() != cells.len() {
                return Err("`eq` value width differs from cells".into());
            }
            let value = vs
                .iter()
                .map(|e| match e {
                    serde_json::Value::String(s) => s.parse::<BoolExpr>().map_err(|e| format!("{e:?}")),
                    serde_json::Value::Bool(b) => Ok(BoolExpr::constant(*b)),
                    serde_json::Value::Number(n) => Ok(BoolExpr::constant(n.as_u64() == Some(1))),
                    _ => Err("bad bit value".into()),
                })
                .collect::<Result<_, _>>()?;
            Ok(Pred::eq_exprs(&cells, value))
        }
        _ => Err("`eq` needs `value`".into()),
    }
}

pub fn assertion_to_json(a: &Assertion) -> serde_json::Value {
    match a {
        Assertion::EquivR(h) => json!({ "kind": "equiv", "target": h }),
        Assertion::SatR(h) => json!({ "kind": "sat", "target": h }),
        Assertion::Prob { cond, rel, bound } => json!({
            "kind": "prob",
            "cond": pred_to_json(cond),
            "rel": rel.symbol(),
            "bound": bound_to_json(bound),
        }),
        Assertion::All(parts) => json!({ "kind": "all", "parts": parts.iter().map(assertion_to_json).collect::<Vec<_>>() }),
    }
}

pub fn assertion_from_json(v: &serde_json::Value, prec: u32) -> Result<Assertion, String> {
    let kind = v.get("kind").and_then(|k| k.as_str()).ok_or("assertion needs `kind`")?;
    let target = || -> Result<Hps, String> { serde_json::from_value(v.get("target").cloned().ok_or("assertion needs `target`")?).map_err(|e| e.to_string()) };
    match kind {
        "equiv" => Ok(Assertion::EquivR(target()?)),
        "sat" => Ok(Assertion::SatR(target()?)),
        "prob" => {
            let cond = pred_from_json(v.get("cond").ok_or("assertion needs `cond`")?)?;
            let rel = v.get("rel").and_then(|r| r.as_str()).and_then(Rel::parse).ok_or("assertion needs a relation `rel`")?;
            let bound = bound_from_json(v.get("bound").ok_or("assertion needs `bound`")?, prec)?;
            Ok(Assertion::Prob { cond, rel, bound })
        }
        "all" => Ok(Assertion::All(
            v.get("parts").and_then(|p| p.as_array()).ok_or("`all` needs `parts`")?.iter().map(|p| assertion_from_json(p, prec)).collect::<Result<_, _>>()?,
        )),
        k => Err(format!("unknown assertion kind `{k}`")),
    }
}

/// Assertion file: `{pre, program, post}`; `pre` defaults to the empty state.
#[derive(Clone, Debug)]
pub struct Sidecar {
    pub pre: Hps,
    pub program: Option<String>,
    pub post: Assertion,
}

impl Sidecar {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "pre": self.pre, "program": self.program, "post": assertion_to_json(&self.post) })
    }

    pub fn from_json(v: &serde_json::Value, prec: u32) -> Result<Sidecar, String> {
        let pre = match v.get("pre") {
            None | Some(serde_json::Value::Null) => Hps::empty(),
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| format!("pre: {e}"))?,
        };
        let program = v.get("program").and_then(|p| p.as_str()).map(str::to_string);
        let post = assertion_from_json(v.get("post").ok_or("sidecar needs `post`")?, prec)?;
        Ok(Sidecar { pre, program, post })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::compile_str;
    use crate::semantics::run;

    fn exec_src(src: &str) -> Hps {
        run(&compile_str(src).unwrap(), &mut ExecContext::new()).unwrap()
    }

    fn a(r: &str, i: u32) -> Addr {
        Addr::new(r, i)
    }

    #[test]
    fn bell_probabilities_exact() {
        let h = exec_src("qreg q[2]; creg c[2]; init q; H(q[0]); CNOT(q[0], q[1]); measure(q, c);");
        let c = [a("c", 0), a("c", 1)];
        for (n, want) in [(0, (1, 2)), (3, (1, 2)), (1, (0, 1)), (2, (0, 1))] {
            let r = check_prob(&h, &Pred::eq_int(&c, n), Rel::Eq, &Bound::rational(want.0, want.1), 64).unwrap();
            assert!(r.verdict.holds(), "{n}: {:?}", r);
        }
    }

    #[test]
    fn self_equivalence_and_basis_mismatch() {
        let h = exec_src("qreg q[2]; input q; H(q[0]); CNOT(q[0], q[1]);");
        assert!(check_equiv(&h, &h, &Strategy::default()).0.holds());
        let z = Hps::basis([(a("q", 0), BoolExpr::zero())]);
        let o = Hps::basis([(a("q", 0), BoolExpr::one())]);
        assert!(matches!(check_equiv(&z, &o, &Strategy::default()).0, Verdict::Fails(_)));
    }

    #[test]
    fn bell_does_not_refine_a_basis_state() {
        let h = exec_src("qreg q[2]; init q; H(q[0]); CNOT(q[0], q[1]);");
        let t = Hps::basis([(a("q", 0), BoolExpr::zero())]);
        assert!(matches!(check_sat(&h, &t, &Strategy::default()).0, Verdict::Fails(_)));
        assert!(check_sat(&h, &h, &Strategy::default()).0.holds());
    }

    #[test]
    fn quantum_atom_uses_residual_state() {
        // q[1] is |0⟩ in every history; q[0] is in superposition.
        let h = exec_src("qreg q[2]; init q; H(q[0]);");
        let p = probability(&h, &Pred::eq_int(&[a("q", 1)], 0), 64).unwrap();
        assert!((p.value.to_f64() - 1.0).abs() < 1e-9);
        let p = probability(&h, &Pred::eq_int(&[a("q", 0)], 0), 64).unwrap();
        assert!(p.value.to_f64().abs() < 1e-9, "{:?}", p);
    }

    #[test]
    fn bound_expressions() {
        assert_eq!(parse_bound("1 - (1/2)^4", 64).unwrap(), Bound::rational(15, 16));
        let Bound::Enclosure(i) = parse_bound("1 - (1 - 4/pi^2)^3", 64).unwrap() else { panic!() };
        let d = 4.0 / std::f64::consts::PI.powi(2);
        assert!((i.mid_f64() - (1.0 - (1.0 - d).powi(3))).abs() < 1e-12 && i.width_f64() < 1e-15);
        assert!(parse_bound("2^x", 64).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let post = Assertion::All(vec![
            Assertion::SatR(Hps::basis([(a("b", 0), BoolExpr::var(Var::input(0)))])),
            Assertion::Prob { cond: Pred::eq_int(&[a("c", 0), a("c", 1)], 2).not(), rel: Rel::Ge, bound: Bound::four_over_pi_sq(64) },
        ]);
        let s = Sidecar { pre: Hps::empty(), program: Some("t.hqb".into()), post };
        let j = s.to_json();
        let back = Sidecar::from_json(&j, 64).unwrap().to_json();
        assert_eq!(back["post"]["parts"][0], j["post"]["parts"][0]);
        assert_eq!(back["post"]["parts"][1]["cond"], j["post"]["parts"][1]["cond"]);
        assert_eq!(Sidecar::from_json(&back, 64).unwrap().to_json(), back);
    }

    #[test]
    fn interval_bound_comparison() {
        let b = Bound::four_over_pi_sq(64);
        let p = Probability::Exact(ExactReal::from_ratio(1, 2));
        assert!(compare(&p, Rel::Ge, &b, 64).holds());
        assert!(matches!(compare(&p, Rel::Le, &b, 64), Verdict::Fails(_)));
    }
}
