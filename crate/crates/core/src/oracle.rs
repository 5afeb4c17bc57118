//! Dense reference semantics on cq-states, for cross-checking the symbolic engine.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use std::collections::{BTreeMap, BTreeSet};

use crate::boolexpr::Var;
use crate::hps::{CqStateView, Hps, HpsError};
use crate::lang::ir::{BExp, Gate, Program, Stmt};
use crate::lang::types::{if_kind, IfKind};
use crate::lang::TypedProg;
use crate::memory::Addr;
use crate::semantics::{exec, ExecContext, ExecError};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 10;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{0} qubits exceed the dense simulation limit")]
    TooManyQubits(usize),
    #[error(transparent)]
    Hps(#[from] HpsError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("quantum registers differ: {0}")]
    Shape(String),
}

type Key = BTreeMap<Addr, bool>;

/// Classical assignment ↦ partial density operator over `qaddrs`.
#[derive(Clone, Debug)]
pub struct CqState {
    pub qaddrs: Vec<Addr>,
    pub dim: usize,
    pub parts: BTreeMap<Key, Vec<Complex64>>,
}

impl CqState {
    pub fn trace(&self) -> f64 {
        self.parts.values().map(|m| (0..self.dim).map(|i| m[i * self.dim + i].re).sum::<f64>()).sum()
    }

    fn bit(&self, a: &Addr) -> usize {
        self.qaddrs.iter().position(|q| q == a).expect("qubit simulated")
    }

    fn add(&mut self, k: Key, m: Vec<Complex64>) {
        match self.parts.get_mut(&k) {
            Some(acc) => acc.iter_mut().zip(m).for_each(|(a, b)| *a += b),
            None => {
                self.parts.insert(k, m);
            }
        }
    }
}

struct Sim<'a> {
    prog: &'a Program,
    inputs: &'a BTreeMap<Var, bool>,
    next_input: u32,
    qalloc: BTreeSet<Addr>,
    calloc: BTreeSet<Addr>,
}

fn zero(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

fn gate_on_vec(g: Gate, bit: usize, v: &mut [Complex64]) {
    let m = 1usize << bit;
    match g {
        Gate::X => {
            for i in 0..v.len() {
                if i & m == 0 {
                    v.swap(i, i | m);
                }
            }
        }
        Gate::Z(k) | Gate::Zdg(k) => {
            let s = if matches!(g, Gate::Z(_)) { 1.0 } else { -1.0 };
            let ph = Complex64::from_polar(1.0, s * std::f64::consts::TAU / 2f64.powi(k as i32));
            for (i, x) in v.iter_mut().enumerate() {
                if i & m != 0 {
                    *x *= ph;
                }
            }
        }
        Gate::H => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..v.len() {
                if i & m == 0 {
                    let (a, b) = (v[i], v[i | m]);
                    v[i] = (a + b) * r;
                    v[i | m] = (a - b) * r;
                }
            }
        }
    }
}

impl<'a> Sim<'a> {
    fn qbit_of(&self, s: &CqState, a: &Addr) -> usize {
        s.bit(a)
    }

    /// Applies a unitary block to one state vector.
    fn unitary_vec(&self, s: &CqState, body: &[Stmt], v: &mut Vec<Complex64>) {
        for st in body {
            match st {
                Stmt::Skip => {}
                Stmt::Gate(g, a) => gate_on_vec(*g, self.qbit_of(s, a), v),
                Stmt::If { cond, then, els } => {
                    let mut vt = v.clone();
                    self.unitary_vec(s, then, &mut vt);
                    let mut ve = v.clone();
                    self.unitary_vec(s, els, &mut ve);
                    for i in 0..v.len() {
                        let c = cond.eval(&|a| i >> s.bit(a) & 1 == 1);
                        v[i] = if c { vt[i] } else { ve[i] };
                    }
                }
                other => unreachable!("non-unitary statement {other:?} in unitary block"),
            }
        }
    }

    /// `ρ ↦ U ρ U†` for the unitary block.
    fn conjugate(&self, s: &CqState, body: &[Stmt], m: &[Complex64]) -> Vec<Complex64> {
        let d = s.dim;
        // columns of U ρ
        let mut t = zero(d * d);
        for j in 0..d {
            let mut col: Vec<Complex64> = (0..d).map(|i| m[i * d + j]).collect();
            self.unitary_vec(s, body, &mut col);
            for i in 0..d {
                t[i * d + j] = col[i];
            }
        }
        // (U (Uρ)†)†
        let mut out = zero(d * d);
        for i in 0..d {
            let mut col: Vec<Complex64> = (0..d).map(|j| t[i * d + j].conj()).collect();
            self.unitary_vec(s, body, &mut col);
            for j in 0..d {
                out[i * d + j] = col[j].conj();
            }
        }
        out
    }

    fn block(&mut self, body: &[Stmt], mut s: CqState) -> CqState {
        for st in body {
            s = self.stmt(st, s);
        }
        s
    }

    fn fresh_input(&mut self) -> bool {
        let x = Var::input(self.next_input);
        self.next_input += 1;
        self.inputs.get(&x).copied().unwrap_or(false)
    }

    fn stmt(&mut self, st: &Stmt, mut s: CqState) -> CqState {
        match st {
            Stmt::Skip => s,
            Stmt::Init(v) | Stmt::Input(v) => {
                let input = matches!(st, Stmt::Input(_));
                for a in v {
                    if self.prog.is_quantum(a) {
                        if self.qalloc.contains(a) && input {
                            continue;
                        }
                        self.qalloc.insert(a.clone());
                        if input && self.fresh_input() {
                            let b = s.bit(a);
                            s = self.map_parts(s, |this, s, m| this.conjugate(s, &[Stmt::Gate(Gate::X, s.qaddrs[b].clone())], m));
                        }
                    } else {
                        self.calloc.insert(a.clone());
                        let val = input && self.fresh_input();
                        s = rekey(s, |k| {
                            k.insert(a.clone(), val);
                        });
                    }
                }
                s
            }
            Stmt::Gate(..) => self.map_parts(s, |this, s, m| this.conjugate(s, std::slice::from_ref(st), m)),
            Stmt::Measure { q, c } => {
                for (a, b) in q.iter().zip(c) {
                    self.calloc.insert(b.clone());
                    s = measure(s, a, Some(b));
                }
                s
            }
            Stmt::Reset(a) => {
                let bit = s.bit(a);
                let d = s.dim;
                let mut out = CqState { qaddrs: s.qaddrs.clone(), dim: d, parts: BTreeMap::new() };
                for (k, m) in s.parts {
                    let mut r = zero(d * d);
                    for i in 0..d {
                        for j in 0..d {
                            if (i >> bit & 1) == (j >> bit & 1) {
                                r[(i & !(1 << bit)) * d + (j & !(1 << bit))] += m[i * d + j];
                            }
                        }
                    }
                    out.add(k, r);
                }
                out
            }
            Stmt::Assign { target, oracle, args } => {
                for t in target {
                    self.calloc.insert(t.clone());
                }
                rekey(s, |k| {
                    let vals: BTreeMap<Var, bool> = args.iter().enumerate().map(|(i, a)| (Var::input(i as u32), k.get(a).copied().unwrap_or(false))).collect();
                    let outs: Vec<bool> = oracle.outputs.iter().map(|o| o.evaluate(|v| vals.get(&v).copied()).unwrap_or(false)).collect();
                    for (t, v) in target.iter().zip(outs) {
                        k.insert(t.clone(), v);
                    }
                })
            }
            Stmt::If { cond, then, els } => match if_kind(self.prog, &cond.addrs()).unwrap_or(IfKind::Classical) {
                IfKind::Quantum => self.map_parts(s, |this, s, m| this.conjugate(s, std::slice::from_ref(st), m)),
                IfKind::Classical => {
                    let (mut yes, mut no) = (s.clone(), s);
                    yes.parts.retain(|k, _| eval_key(cond, k));
                    no.parts.retain(|k, _| !eval_key(cond, k));
                    let base = self.next_input;
                    let yes = self.block(then, yes);
                    self.next_input = base + count_inputs(then);
                    let mut no = self.block(els, no);
                    self.next_input = base + count_inputs(then) + count_inputs(els);
                    for (k, m) in yes.parts {
                        no.add(k, m);
                    }
                    no
                }
            },
            Stmt::Mixed { gate, qubits } => {
                let d = s.dim;
                let mut out = CqState { qaddrs: s.qaddrs.clone(), dim: d, parts: BTreeMap::new() };
                for w in 0..gate.bodies.len() {
                    let f = gate.weight(w).to_f64().unwrap_or(0.0);
                    if f == 0.0 {
                        continue;
                    }
                    let body = gate.body(w, qubits);
                    for (k, m) in &s.parts {
                        let r: Vec<Complex64> = self.conjugate(&s, &body, m).into_iter().map(|z| z * f).collect();
                        out.add(k.clone(), r);
                    }
                }
                out
            }
        }
    }

    fn map_parts(&self, s: CqState, f: impl Fn(&Self, &CqState, &[Complex64]) -> Vec<Complex64>) -> CqState {
        let parts = s.parts.iter().map(|(k, m)| (k.clone(), f(self, &s, m))).collect();
        CqState { parts, ..s }
    }
}

fn eval_key(c: &BExp, k: &Key) -> bool {
    c.eval(&|a| k.get(a).copied().unwrap_or(false))
}

fn rekey(s: CqState, f: impl Fn(&mut Key)) -> CqState {
    let mut out = CqState { qaddrs: s.qaddrs.clone(), dim: s.dim, parts: BTreeMap::new() };
    for (mut k, m) in s.parts {
        f(&mut k);
        out.add(k, m);
    }
    out
}

fn count_inputs(body: &[Stmt]) -> u32 {
    body.iter()
        .map(|s| match s {
            Stmt::Input(v) => v.len() as u32,
            Stmt::If { then, els, .. } => count_inputs(then) + count_inputs(els),
            _ => 0,
        })
        .sum()
}

/// Projective measurement of qubit `a`, recording the outcome in `c`.
fn measure(s: CqState, a: &Addr, c: Option<&Addr>) -> CqState {
    let bit = s.bit(a);
    let d = s.dim;
    let mut out = CqState { qaddrs: s.qaddrs.clone(), dim: d, parts: BTreeMap::new() };
    for (k, m) in s.parts {
        for outcome in [false, true] {
            let mut r = zero(d * d);
            for i in 0..d {
                if (i >> bit & 1 == 1) != outcome {
                    continue;
                }
                for j in 0..d {
                    if (j >> bit & 1 == 1) == outcome {
                        r[i * d + j] = m[i * d + j];
                    }
                }
            }
            let mut k2 = k.clone();
            if let Some(c) = c {
                k2.insert(c.clone(), outcome);
            }
            out.add(k2, r);
        }
    }
    out
}

/// Runs `p` densely from `init`, with input variables fixed by `inputs`.
/// Input statements draw variable ids from `first_input` upwards.
pub fn simulate(p: &TypedProg, init: &CqStateView, inputs: &BTreeMap<Var, bool>, first_input: u32) -> Result<CqStateView, OracleError> {
    let prog = &p.program;
    let mut qs: BTreeSet<Addr> = init.qaddrs.iter().cloned().collect();
    qs.extend(prog.qaddrs());
    if qs.len() > MAX_QUBITS {
        return Err(OracleError::TooManyQubits(qs.len()));
    }
    let qaddrs: Vec<Addr> = qs.into_iter().collect();
    let dim = 1usize << qaddrs.len();
    // embed: simulator index from the initial basis index, others |0⟩
    let pos: Vec<usize> = init.qaddrs.iter().map(|a| qaddrs.iter().position(|q| q == a).unwrap()).collect();
    let lift = |i: usize| pos.iter().enumerate().fold(0usize, |acc, (b, p)| acc | ((i >> b & 1) << p));
    let mut parts = BTreeMap::new();
    for (kv, m) in &init.mats {
        let key: Key = init.keys.iter().cloned().zip(kv.iter().copied()).collect();
        let mut r = zero(dim * dim);
        for i in 0..init.dim {
            for j in 0..init.dim {
                r[lift(i) * dim + lift(j)] = m[i * init.dim + j];
            }
        }
        parts.insert(key, r);
    }
    let state = CqState { qaddrs: qaddrs.clone(), dim, parts };
    let mut sim = Sim {
        prog,
        inputs,
        next_input: first_input,
        qalloc: init.qaddrs.iter().cloned().collect(),
        calloc: init.keys.iter().cloned().collect(),
    };
    let end = sim.block(&prog.body, state);
    // restrict to allocated qubits; the others are still |0⟩
    let kept: Vec<Addr> = qaddrs.iter().filter(|a| sim.qalloc.contains(*a)).cloned().collect();
    let kpos: Vec<usize> = kept.iter().map(|a| qaddrs.iter().position(|q| q == a).unwrap()).collect();
    let kd = 1usize << kept.len();
    let up = |i: usize| kpos.iter().enumerate().fold(0usize, |acc, (b, p)| acc | ((i >> b & 1) << p));
    let keys: Vec<Addr> = sim.calloc.iter().filter(|a| !a.reg.starts_with('%')).cloned().collect();
    let mut mats: BTreeMap<Vec<bool>, Vec<Complex64>> = BTreeMap::new();
    for (k, m) in end.parts {
        let kv: Vec<bool> = keys.iter().map(|a| k.get(a).copied().unwrap_or(false)).collect();
        let r = mats.entry(kv).or_insert_with(|| zero(kd * kd));
        for i in 0..kd {
            for j in 0..kd {
                r[i * kd + j] += m[up(i) * dim + up(j)];
            }
        }
    }
    Ok(CqStateView { qaddrs: kept, keys, dim: kd, mats })
}

/// Largest per-key Frobenius distance after aligning classical keys;
/// keys missing from one side read as `0`.
pub fn distance(a: &CqStateView, b: &CqStateView) -> Result<f64, OracleError> {
    if a.qaddrs != b.qaddrs {
        return Err(OracleError::Shape(format!("{:?} vs {:?}", a.qaddrs, b.qaddrs)));
    }
    let keys: BTreeSet<Addr> = a.keys.iter().chain(&b.keys).cloned().collect();
    let align = |v: &CqStateView| {
        let mut out: BTreeMap<Vec<bool>, Vec<Complex64>> = BTreeMap::new();
        for (kv, m) in &v.mats {
            let map: Key = v.keys.iter().cloned().zip(kv.iter().copied()).collect();
            let k: Vec<bool> = keys.iter().map(|a| map.get(a).copied().unwrap_or(false)).collect();
            let acc = out.entry(k).or_insert_with(|| zero(v.dim * v.dim));
            acc.iter_mut().zip(m).for_each(|(x, y)| *x += y);
        }
        out
    };
    let (ma, mb) = (align(a), align(b));
    let z = zero(a.dim * a.dim);
    let all: BTreeSet<&Vec<bool>> = ma.keys().chain(mb.keys()).collect();
    Ok(all
        .into_iter()
        .map(|k| {
            let x = ma.get(k).unwrap_or(&z);
            let y = mb.get(k).unwrap_or(&z);
            x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct CrossCheckReport {
    /// Assignments of the input variables tried.
    pub assignments: usize,
    pub max_distance: f64,
    pub trace_before: f64,
    pub trace_after: f64,
    /// `Σ|ξ|²` of the symbolic result, minimum and maximum over assignments.
    pub norm_after: (f64, f64),
}

/// Executes `p` symbolically on `h` and compares against dense simulation
/// for every assignment of the input variables.
pub fn cross_check(p: &TypedProg, h: &Hps, ctx: &mut ExecContext) -> Result<CrossCheckReport, OracleError> {
    let out = exec(p, h, ctx)?;
    let first_input = h.input_vars().iter().map(|v| v.id + 1).max().unwrap_or(0);
    let mut vars: BTreeSet<Var> = h.input_vars();
    vars.extend(out.input_vars());
    let vars: Vec<Var> = vars.into_iter().collect();
    if vars.len() > 12 {
        return Err(OracleError::Hps(HpsError::SupportTooLarge(vars.len())));
    }
    let mut rep = CrossCheckReport { assignments: 0, max_distance: 0.0, trace_before: 0.0, trace_after: 0.0, norm_after: (f64::INFINITY, 0.0) };
    for a in 0..(1u64 << vars.len()) {
        let rho: BTreeMap<Var, bool> = vars.iter().enumerate().map(|(i, v)| (*v, a >> i & 1 == 1)).collect();
        let before: BTreeMap<Var, bool> = rho.iter().filter(|(v, _)| h.input_vars().contains(v)).map(|(v, b)| (*v, *b)).collect();
        let init = h.density_map(&before)?;
        let after: BTreeMap<Var, bool> = rho.iter().filter(|(v, _)| out.input_vars().contains(v)).map(|(v, b)| (*v, *b)).collect();
        let xi = out.xi(&after)?;
        let n = xi.norm_sqr();
        let symbolic = xi.density_map();
        let reference = simulate(p, &init, &rho, first_input)?;
        rep.max_distance = rep.max_distance.max(distance(&symbolic, &reference)?);
        rep.trace_before = rep.trace_before.max(init.trace());
        rep.trace_after = rep.trace_after.max(reference.trace());
        rep.norm_after = (rep.norm_after.0.min(n), rep.norm_after.1.max(n));
        rep.assignments += 1;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::compile_str;

    fn check(src: &str) -> CrossCheckReport {
        let t = compile_str(src).unwrap();
        cross_check(&t, &Hps::empty(), &mut ExecContext::new()).unwrap()
    }

    #[test]
    fn skip_is_identity() {
        let r = check("qreg q[1]; input q; skip;");
        assert_eq!(r.assignments, 2);
        assert!(r.max_distance < 1e-12);
    }

    #[test]
    fn measurement_splits_trace() {
        let t = compile_str("qreg q[1]; creg c[1]; init q; H(q); measure(q, c);").unwrap();
        let v = simulate(&t, &Hps::empty().density_map(&BTreeMap::new()).unwrap(), &BTreeMap::new(), 0).unwrap();
        assert_eq!(v.mats.len(), 2);
        for m in v.mats.values() {
            let tr: f64 = (0..v.dim).map(|i| m[i * v.dim + i].re).sum();
            assert!((tr - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gates_match_symbolic() {
        for g in ["H", "X", "Z", "S", "T", "Zdg[4]", "Z[5]"] {
            let r = check(&format!("qreg q[2]; input q; {g}(q[1]); CNOT(q[1], q[0]); H(q[0]);"));
            assert!(r.max_distance < 1e-9, "{g}: {}", r.max_distance);
        }
    }

    #[test]
    fn teleportation_matches() {
        let r = check(
            "qreg psi[1]; qreg a[1]; qreg b[1]; creg pc[1]; creg ac[1];
             input psi; init a; init b;
             H(a); CNOT(a, b); CNOT(psi, a); H(psi);
             measure(psi, pc); measure(a, ac);
             ac => X(b); pc => Z(b);",
        );
        assert!(r.max_distance < 1e-9);
        assert!((r.trace_after - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_and_reset_programs_match() {
        let r = check(
            "qreg q[2]; creg c[2];
             mixed flip(a[1]) { 9/10 : skip; 1/10 : X(a[0]); }
             init q; H(q[0]); CNOT(q[0], q[1]); flip(q[1]); measure(q[1], c[1]);
             if c[1] { H(q[1]); reset q[0]; } else { Z(q[0]); H(q[1]); }
             q[1] => H(q[0]);
             measure(q[0], c[0]);",
        );
        assert!(r.max_distance < 1e-9, "{}", r.max_distance);
    }
}
