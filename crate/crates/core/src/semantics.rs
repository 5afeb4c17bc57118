//! Forward symbolic execution of programs over hybrid path-sums.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::boolexpr::{BoolExpr, Monomial, Var};
use crate::exact::ExactReal;
use crate::hps::{Hps, HpsError, ENUM_LIMIT};
use crate::lang::ir::{BExp, Gate, MixedGate, Program, Stmt};
use crate::lang::types::{if_kind, IfKind, TypeError};
use crate::lang::TypedProg;
use crate::memory::{Addr, HybridMemory, MemoryError};
use crate::phase::{Dyadic, PhasePoly};
use crate::rewrite::{normalize_into, RewriteTrace, Strategy};
use crate::scalar::{inv_sqrt2, Scalar, ScalarError};

/// Hidden register receiving one column per mixed-gate selector bit.
pub const DUMP: &str = "%dump";
/// Hidden register receiving the outcomes discarded by `reset`.
pub const SCRATCH: &str = "%scratch";

/// When the executor normalizes the running state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizePolicy {
    Off,
    /// After every statement at any nesting depth.
    #[serde(rename = "gate")]
    AfterGate,
    /// After every top-level statement.
    #[default]
    #[serde(rename = "stmt")]
    AfterStatement,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Hps(#[from] HpsError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("cell {0} is already allocated")]
    Realloc(Addr),
    #[error("weights of mixed gate `{0}` are not a distribution")]
    WeightSumNotOne(String),
    #[error("weight {0} has no exact square root")]
    WeightNotRepresentable(String),
}

/// Execution settings and the state threaded through one run.
#[derive(Clone, Debug)]
pub struct ExecContext {
    next_path: u32,
    next_input: u32,
    dumps: u32,
    scratches: u32,
    pub fuel: usize,
    pub policy: NormalizePolicy,
    pub enum_limit: usize,
    /// Drop quantum cells once measured.
    pub clear_measured: bool,
    pub trace: RewriteTrace,
    protected: BTreeSet<Var>,
    in_quantum: bool,
    depth: usize,
}

impl Default for ExecContext {
    fn default() -> ExecContext {
        ExecContext {
            next_path: 0,
            next_input: 0,
            dumps: 0,
            scratches: 0,
            fuel: Strategy::default().fuel,
            policy: NormalizePolicy::default(),
            enum_limit: ENUM_LIMIT,
            clear_measured: false,
            trace: RewriteTrace::default(),
            protected: BTreeSet::new(),
            in_quantum: false,
            depth: 0,
        }
    }
}

/// Runs `p` on `h`.
pub fn exec(p: &TypedProg, h: &Hps, ctx: &mut ExecContext) -> Result<Hps, ExecError> {
    ctx.sync(h);
    ctx.exec_block(&p.program, &p.program.body, h.clone())
}

/// Runs `p` from the empty state.
pub fn run(p: &TypedProg, ctx: &mut ExecContext) -> Result<Hps, ExecError> {
    exec(p, &Hps::empty(), ctx)
}

fn mono(vs: impl IntoIterator<Item = Var>) -> BoolExpr {
    BoolExpr::monomial(Monomial::from_vars(vs))
}

/// `[W = w]` over selector bits, bit 0 least significant.
fn select_eq(ws: &[Var], w: usize) -> BoolExpr {
    ws.iter().enumerate().fold(BoolExpr::one(), |acc, (i, v)| {
        let b = BoolExpr::var(*v);
        acc.and(&if w >> i & 1 == 1 { b } else { b.not() })
    })
}

/// Whether a block only flips and phases cells, possibly under control.
fn is_permutation_phase(body: &[Stmt]) -> bool {
    body.iter().all(|s| match s {
        Stmt::Skip => true,
        Stmt::Gate(g, _) => !matches!(g, Gate::H),
        Stmt::If { then, els, .. } => is_permutation_phase(then) && is_permutation_phase(els),
        _ => false,
    })
}

impl ExecContext {
    pub fn new() -> ExecContext {
        ExecContext::default()
    }

    pub fn with_policy(policy: NormalizePolicy) -> ExecContext {
        ExecContext { policy, ..ExecContext::default() }
    }

    fn sync(&mut self, h: &Hps) {
        self.next_path = self.next_path.max(h.fresh_id());
        let vars = h.vars();
        let ni = vars.iter().filter(|v| v.is_input()).map(|v| v.id + 1).max().unwrap_or(0);
        self.next_input = self.next_input.max(ni);
        for a in h.mem.cl.addrs() {
            if &*a.reg == DUMP {
                self.dumps = self.dumps.max(a.idx + 1);
            } else if &*a.reg == SCRATCH {
                self.scratches = self.scratches.max(a.idx + 1);
            }
        }
    }

    pub fn fresh_path(&mut self) -> Var {
        let v = Var::path(self.next_path);
        self.next_path += 1;
        v
    }

    pub fn fresh_input(&mut self) -> Var {
        let v = Var::input(self.next_input);
        self.next_input += 1;
        v
    }

    pub fn strategy(&self) -> Strategy {
        Strategy { fuel: self.fuel, allow_pe: !self.in_quantum, cos_pb: false, protected: self.protected.clone(), ..Strategy::default() }
    }

    fn normalize(&mut self, h: Hps) -> Hps {
        let st = self.strategy();
        normalize_into(h, &st, &mut self.trace)
    }

    fn exec_block(&mut self, p: &Program, body: &[Stmt], mut h: Hps) -> Result<Hps, ExecError> {
        for s in body {
            h = self.stmt(p, s, h)?;
            let norm = match self.policy {
                NormalizePolicy::Off => false,
                NormalizePolicy::AfterGate => true,
                NormalizePolicy::AfterStatement => self.depth == 0,
            };
            if norm && *s != Stmt::Skip {
                h = self.normalize(h);
            }
        }
        Ok(h)
    }

    fn stmt(&mut self, p: &Program, s: &Stmt, mut h: Hps) -> Result<Hps, ExecError> {
        match s {
            Stmt::Skip => Ok(h),
            Stmt::Init(v) => {
                let mut writes = Vec::new();
                for a in v {
                    if p.is_quantum(a) {
                        if h.mem.qu.contains_key(a) {
                            return Err(ExecError::Realloc(a.clone()));
                        }
                        h.mem.alloc_quantum(a.clone(), BoolExpr::zero());
                    } else {
                        h.mem.cl.alloc(a.clone());
                        writes.push((a.clone(), BoolExpr::zero()));
                    }
                }
                if !writes.is_empty() {
                    h.mem.push_classical(&writes)?;
                }
                Ok(h)
            }
            Stmt::Input(v) => {
                let mut writes = Vec::new();
                for a in v {
                    if p.is_quantum(a) {
                        if !h.mem.qu.contains_key(a) {
                            let x = self.fresh_input();
                            h.mem.alloc_quantum(a.clone(), BoolExpr::var(x));
                        }
                    } else {
                        h.mem.cl.alloc(a.clone());
                        writes.push((a.clone(), BoolExpr::var(self.fresh_input())));
                    }
                }
                if !writes.is_empty() {
                    h.mem.push_classical(&writes)?;
                }
                Ok(h)
            }
            Stmt::Gate(g, a) => self.gate(*g, a, h),
            Stmt::Measure { q, c } => {
                if q.len() != c.len() {
                    return Err(TypeError::WidthMismatch(format!("measuring {} qubits into {} bits", q.len(), c.len())).into());
                }
                let mut writes = Vec::with_capacity(q.len());
                for (a, b) in q.iter().zip(c) {
                    writes.push((b.clone(), h.mem.read_quantum(a)?.clone()));
                    h.mem.cl.alloc(b.clone());
                }
                h.mem.push_classical(&writes)?;
                if self.clear_measured {
                    for a in q {
                        h.mem.qu.remove(a);
                    }
                }
                Ok(h)
            }
            Stmt::Assign { target, oracle, args } => {
                if args.len() != oracle.inputs || target.len() != oracle.outputs.len() {
                    return Err(TypeError::ArityMismatch(format!("oracle `{}`", oracle.name)).into());
                }
                let vals: Vec<BoolExpr> = args.iter().map(|a| h.mem.cl.present_or_zero(a)).collect();
                let out = oracle.apply(&vals);
                for a in target {
                    h.mem.cl.alloc(a.clone());
                }
                let writes: Vec<(Addr, BoolExpr)> = target.iter().cloned().zip(out).collect();
                h.mem.push_classical(&writes)?;
                Ok(h)
            }
            Stmt::Reset(a) => {
                let v = h.mem.read_quantum(a)?.clone();
                let col = Addr::new(SCRATCH, self.scratches);
                self.scratches += 1;
                h.mem.cl.alloc(col.clone());
                h.mem.cl.hide(SCRATCH);
                h.mem.push_classical(&[(col, v)])?;
                h.mem.write_quantum(a, BoolExpr::zero())?;
                Ok(h)
            }
            Stmt::If { cond, then, els } => {
                let kind = if_kind(p, &cond.addrs())?;
                let b = self.cond(&h, cond, kind)?;
                self.branch(p, h, &b, then, els, kind == IfKind::Quantum)
            }
            Stmt::Mixed { gate, qubits } => self.mixed(p, gate, qubits, h),
        }
    }

    fn cond(&self, h: &Hps, c: &BExp, kind: IfKind) -> Result<BoolExpr, ExecError> {
        match kind {
            IfKind::Quantum => Ok(c.to_boolexpr::<MemoryError>(&mut |a| h.mem.read_quantum(a).cloned())?),
            IfKind::Classical => Ok(c.to_boolexpr::<MemoryError>(&mut |a| Ok(h.mem.cl.present_or_zero(a)))?),
        }
    }

    fn gate(&mut self, g: Gate, a: &Addr, mut h: Hps) -> Result<Hps, ExecError> {
        let cell = h.mem.read_quantum(a)?.clone();
        match g {
            Gate::X => h.mem.write_quantum(a, cell.not())?,
            Gate::Z(k) => h.phase = h.phase.add(&PhasePoly::lifted(&cell, Dyadic::new(1, k))),
            Gate::Zdg(k) => h.phase = h.phase.add(&PhasePoly::lifted(&cell, Dyadic::new(-1, k))),
            Gate::H => {
                let y = self.fresh_path();
                h.support.insert(y);
                h.phase.add_lifted(Dyadic::new(1, 1), &cell, &Monomial::var(y));
                h.scalar = h.scalar.mul(&inv_sqrt2());
                h.mem.write_quantum(a, BoolExpr::var(y))?;
            }
        }
        Ok(h)
    }

    /// Applies a flip/phase block under `guard` directly to the cells.
    fn controlled(&self, h: &mut Hps, guard: &BoolExpr, body: &[Stmt]) -> Result<(), ExecError> {
        for s in body {
            match s {
                Stmt::Skip => {}
                Stmt::Gate(g, a) => {
                    let cell = h.mem.read_quantum(a)?.clone();
                    match g {
                        Gate::X => h.mem.write_quantum(a, cell.xor(guard))?,
                        Gate::Z(k) => h.phase = h.phase.add(&PhasePoly::lifted(&cell.and(guard), Dyadic::new(1, *k))),
                        Gate::Zdg(k) => h.phase = h.phase.add(&PhasePoly::lifted(&cell.and(guard), Dyadic::new(-1, *k))),
                        Gate::H => unreachable!("H is not a flip or phase"),
                    }
                }
                Stmt::If { cond, then, els } => {
                    let addrs = cond.addrs();
                    let kind = if addrs.iter().all(|a| h.mem.qu.contains_key(a)) && !addrs.is_empty() { IfKind::Quantum } else { IfKind::Classical };
                    let c = self.cond(h, cond, kind)?;
                    self.controlled(h, &guard.and(&c), then)?;
                    self.controlled(h, &guard.and(&c.not()), els)?;
                }
                _ => unreachable!("checked by is_permutation_phase"),
            }
        }
        Ok(())
    }

    /// `exec(then, [b]·h) ⊞ exec(els, [¬b]·h)` merged on the condition.
    fn branch(&mut self, p: &Program, mut h: Hps, b: &BoolExpr, then: &[Stmt], els: &[Stmt], quantum: bool) -> Result<Hps, ExecError> {
        if b.is_one() {
            return self.nested(p, then, h, quantum, b);
        }
        if b.is_zero() {
            return self.nested(p, els, h, quantum, b);
        }
        if is_permutation_phase(then) && is_permutation_phase(els) {
            self.controlled(&mut h, b, then)?;
            self.controlled(&mut h, &b.not(), els)?;
            return Ok(h);
        }
        let t = self.nested(p, then, h.guard_mul(b), quantum, b)?;
        let e = self.nested(p, els, h.guard_mul(&b.not()), quantum, b)?;
        merge(b, t, e)
    }

    fn nested(&mut self, p: &Program, body: &[Stmt], h: Hps, quantum: bool, b: &BoolExpr) -> Result<Hps, ExecError> {
        let saved = (self.protected.clone(), self.in_quantum);
        self.protected.extend(b.vars());
        self.in_quantum |= quantum;
        self.depth += 1;
        let r = self.exec_block(p, body, h);
        self.depth -= 1;
        (self.protected, self.in_quantum) = saved;
        r
    }

    fn mixed(&mut self, p: &Program, g: &MixedGate, qubits: &[Addr], mut h: Hps) -> Result<Hps, ExecError> {
        if !g.weights_valid() {
            return Err(ExecError::WeightSumNotOne(g.name.clone()));
        }
        let m = g.width() as usize;
        if m == 0 {
            let body = g.body(0, qubits);
            return self.nested(p, &body, h, true, &BoolExpr::one());
        }
        let ws: Vec<Var> = (0..m).map(|_| self.fresh_path()).collect();
        let mut sel = Scalar::zero();
        for w in 0..(1usize << m) {
            let f = g.weight(w);
            if f.is_zero() {
                continue;
            }
            let r = ExactReal::sqrt_rational(&f).ok_or_else(|| ExecError::WeightNotRepresentable(f.to_string()))?;
            sel = sel.add(&Scalar::exact(r).guard(&select_eq(&ws, w)));
        }
        h.scalar = h.scalar.mul(&sel);
        h.support.extend(ws.iter().copied());
        let mut writes = Vec::with_capacity(m);
        for (j, v) in ws.iter().enumerate() {
            let col = Addr::new(DUMP, self.dumps + j as u32);
            h.mem.cl.alloc(col.clone());
            writes.push((col, BoolExpr::var(*v)));
        }
        self.dumps += m as u32;
        h.mem.cl.hide(DUMP);
        h.mem.push_classical(&writes)?;
        for w in 0..(1usize << m) {
            if g.weight(w).is_zero() {
                continue;
            }
            let body = g.body(w, qubits);
            h = self.branch(p, h, &select_eq(&ws, w), &body, &[], true)?;
        }
        Ok(h)
    }
}

/// Sum of two complementary-guarded branches into one path-sum.
fn merge(b: &BoolExpr, mut t: Hps, mut e: Hps) -> Result<Hps, ExecError> {
    t.mem.cl.conform(&e.mem.cl);
    e.mem.cl.conform(&t.mem.cl);
    let only_t: Vec<Var> = t.support.difference(&e.support).copied().collect();
    let only_e: Vec<Var> = e.support.difference(&t.support).copied().collect();
    let st = t.scalar.guard(&b.and(&mono(only_e)));
    let se = e.scalar.guard(&b.not().and(&mono(only_t)));
    let mut support = t.support.clone();
    support.extend(e.support.iter().copied());
    Ok(Hps {
        phase: PhasePoly::select(b, &e.phase, &t.phase),
        mem: HybridMemory::select(b, &e.mem, &t.mem)?,
        scalar: st.add(&se),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::compile_str;
    use std::collections::BTreeMap;

    fn exec_src(src: &str) -> Hps {
        let t = compile_str(src).unwrap();
        run(&t, &mut ExecContext::with_policy(NormalizePolicy::Off)).unwrap()
    }

    #[test]
    fn hadamard_on_basis() {
        let h = exec_src("qreg q[1]; input q; H(q);");
        assert_eq!(h.support.len(), 1);
        let xy = Monomial::from_vars([Var::input(0), Var::path(0)]);
        assert_eq!(h.phase, PhasePoly::term(xy, Dyadic::new(1, 1)));
        assert_eq!(h.mem.qu[&Addr::new("q", 0)], BoolExpr::var(Var::path(0)));
    }

    #[test]
    fn cnot_copies_basis_value() {
        let h = exec_src("qreg q[2]; input q[0]; init q[1]; CNOT(q[0], q[1]);");
        assert_eq!(h.mem.qu[&Addr::new("q", 1)], BoolExpr::var(Var::input(0)));
        assert!(h.support.is_empty());
    }

    #[test]
    fn bell_measurement_is_correlated() {
        let h = exec_src("qreg q[2]; creg c[2]; init q; H(q[0]); CNOT(q[0], q[1]); measure(q, c);");
        let w = h.xi(&BTreeMap::new()).unwrap();
        let pr = |a: bool, b: bool| w.proba(&|m: &BTreeMap<Addr, bool>| m[&Addr::new("c", 0)] == a && m[&Addr::new("c", 1)] == b);
        assert!((pr(false, false) - 0.5).abs() < 1e-12);
        assert!((pr(true, true) - 0.5).abs() < 1e-12);
        assert!(pr(false, true).abs() < 1e-12);
    }

    #[test]
    fn classical_branch_with_measurement() {
        let h = exec_src("qreg q[2]; creg c[1]; creg d[1]; init q; H(q[0]); q[0] -o c; if c { H(q[1]); q[1] -o d; }");
        let w = h.xi(&BTreeMap::new()).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        let p = w.proba(&|m: &BTreeMap<Addr, bool>| m[&Addr::new("c", 0)] && m[&Addr::new("d", 0)]);
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mixed_gate_weights() {
        let h = exec_src("qreg q[1]; creg c[1]; mixed flip(a[1]) { 3/4 : skip; 1/4 : X(a[0]); } init q; flip(q); q -o c;");
        let w = h.xi(&BTreeMap::new()).unwrap();
        let p = w.proba(&|m: &BTreeMap<Addr, bool>| m[&Addr::new("c", 0)]);
        assert!((p - 0.25).abs() < 1e-12);
        assert!(w.caddrs.iter().any(|a| &*a.reg == DUMP));
    }

    #[test]
    fn reset_returns_to_zero() {
        let h = exec_src("qreg q[1]; init q; H(q); reset q[0];");
        assert!(h.mem.qu[&Addr::new("q", 0)].is_zero());
        let w = h.xi(&BTreeMap::new()).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn controlled_hadamard_uses_guarded_merge() {
        let h = exec_src("qreg q[2]; init q; H(q[0]); q[0] => H(q[1]);");
        let w = h.xi(&BTreeMap::new()).unwrap();
        let amps = &w.worlds[&Vec::new()];
        let a = |i: u64| amps.get(&i).copied().unwrap_or_default();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a(0).re - r).abs() < 1e-12);
        assert!((a(1).re - 0.5).abs() < 1e-12);
        assert!((a(3).re - 0.5).abs() < 1e-12);
        assert!(a(2).norm() < 1e-12);
    }
}
