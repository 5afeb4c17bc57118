#![allow(dead_code)]

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use hqb::boolexpr::{BoolExpr, Monomial, Var};
use hqb::hps::{Hps, WorldVector};
use hqb::memory::Addr;
use hqb::phase::{Dyadic, PhasePoly};
use hqb::scalar::Scalar;

pub fn rand_expr<R: Rng>(rng: &mut R, vars: &[Var]) -> BoolExpr {
    if vars.is_empty() || rng.gen_bool(0.1) {
        return BoolExpr::constant(rng.gen_bool(0.5));
    }
    if rng.gen_bool(0.5) {
        return BoolExpr::var(*vars.choose(rng).unwrap());
    }
    let mut e = BoolExpr::constant(rng.gen_bool(0.3));
    for _ in 0..rng.gen_range(1..=3) {
        let d = rng.gen_range(1..=2).min(vars.len());
        let m = Monomial::from_vars(vars.choose_multiple(rng, d).copied());
        e = e.xor(&BoolExpr::monomial(m));
    }
    e
}

/// Random HPS with `≤ 6` path variables and `≤ 4` memory cells.
pub fn random_hps<R: Rng>(rng: &mut R) -> Hps {
    let k = rng.gen_range(1..=6u32);
    let ni = rng.gen_range(0..=2u32);
    let ys: Vec<Var> = (0..k).map(Var::path).collect();
    let xs: Vec<Var> = (0..ni).map(Var::input).collect();
    let all: Vec<Var> = ys.iter().chain(&xs).copied().collect();
    let nq = rng.gen_range(1..=3u32);
    let nc = rng.gen_range(0..=(4 - nq).min(2));
    let mut h = Hps::empty();
    // quantum cells mostly hold a single path variable so that HH and FD fire
    let mut spare: Vec<Var> = ys.clone();
    spare.shuffle(rng);
    for i in 0..nq {
        let e = match spare.pop() {
            Some(y) if rng.gen_bool(0.6) => BoolExpr::var(y),
            _ => rand_expr(rng, &all),
        };
        h.mem.alloc_quantum(Addr::new("q", i), e);
    }
    if nc > 0 {
        let cells: Vec<Addr> = (0..nc).map(|j| Addr::new("c", j)).collect();
        for c in &cells {
            h.mem.cl.alloc(c.clone());
        }
        for _ in 0..rng.gen_range(1..=2) {
            let mut writes: Vec<(Addr, BoolExpr)> = Vec::new();
            for c in &cells {
                if rng.gen_bool(0.7) {
                    writes.push((c.clone(), rand_expr(rng, &all)));
                }
            }
            if !writes.is_empty() {
                h.mem.cl.push(&writes).unwrap();
            }
        }
    }
    let mut phase = PhasePoly::zero();
    for _ in 0..rng.gen_range(0..=4) {
        let d = rng.gen_range(1..=2).min(all.len());
        let m = Monomial::from_vars(all.choose_multiple(rng, d).copied());
        phase.add_term(m, Dyadic::new(rng.gen_range(1..8), rng.gen_range(1..=3)));
    }
    if rng.gen_bool(0.5) {
        // y·e/2 with y absent from memory: an HH or PB redex
        if let Some(y) = spare.pop() {
            let e = rand_expr(rng, &all);
            phase.add_lifted(Dyadic::new(1, 1), &e, &Monomial::var(y));
        }
    }
    if rng.gen_bool(0.2) {
        phase.add_term(Monomial::one(), Dyadic::HALF);
    }
    h.phase = phase;
    let mut s = Scalar::half_power(k as i64);
    if rng.gen_bool(0.3) {
        s = s.guard(&rand_expr(rng, &all));
    }
    h.scalar = s;
    h.support = ys.into_iter().collect();
    h
}

/// History columns → basis cell values → amplitude.
pub type Worlds = BTreeMap<Vec<(Addr, Vec<u8>)>, BTreeMap<Vec<(Addr, bool)>, Complex64>>;

pub fn worlds(w: &WorldVector) -> Worlds {
    let mut out: Worlds = BTreeMap::new();
    for (key, v) in &w.worlds {
        let hist: Vec<(Addr, Vec<u8>)> = w.caddrs.iter().enumerate().map(|(c, a)| (a.clone(), key[c * w.age..(c + 1) * w.age].to_vec())).collect();
        let slot = out.entry(hist).or_default();
        for (b, z) in v {
            let cells: Vec<(Addr, bool)> = w.qaddrs.iter().enumerate().map(|(i, a)| (a.clone(), b >> i & 1 == 1)).collect();
            *slot.entry(cells).or_insert(Complex64::new(0.0, 0.0)) += z;
        }
    }
    out
}

pub fn add_worlds(a: &Worlds, b: &Worlds) -> Worlds {
    let mut out = a.clone();
    for (k, v) in b {
        let slot = out.entry(k.clone()).or_default();
        for (c, z) in v {
            *slot.entry(c.clone()).or_insert(Complex64::new(0.0, 0.0)) += z;
        }
    }
    out
}

pub fn scale_worlds(a: &Worlds, s: Complex64) -> Worlds {
    a.iter().map(|(k, v)| (k.clone(), v.iter().map(|(c, z)| (c.clone(), z * s)).collect())).collect()
}

/// Largest pointwise difference; `modulus` compares `|ξ|` instead of `ξ`.
pub fn worlds_distance(a: &Worlds, b: &Worlds, modulus: bool) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    let empty = BTreeMap::new();
    let keys: BTreeSet<_> = a.keys().chain(b.keys()).collect();
    let mut d: f64 = 0.0;
    for k in keys {
        let (va, vb) = (a.get(k).unwrap_or(&empty), b.get(k).unwrap_or(&empty));
        let cells: BTreeSet<_> = va.keys().chain(vb.keys()).collect();
        for c in cells {
            let (x, y) = (*va.get(c).unwrap_or(&zero), *vb.get(c).unwrap_or(&zero));
            d = d.max(if modulus { (x.norm() - y.norm()).abs() } else { (x - y).norm() });
        }
    }
    d
}

/// Input assignments over the inputs of all given HPS.
pub fn assignments(hs: &[&Hps]) -> Vec<BTreeMap<Var, bool>> {
    let vars: BTreeSet<Var> = hs.iter().flat_map(|h| h.input_vars()).collect();
    let vars: Vec<Var> = vars.into_iter().collect();
    (0..1u64 << vars.len()).map(|a| vars.iter().enumerate().map(|(i, v)| (*v, a >> i & 1 == 1)).collect()).collect()
}

pub fn xi(h: &Hps, rho: &BTreeMap<Var, bool>) -> Worlds {
    let own: BTreeMap<Var, bool> = rho.iter().filter(|(v, _)| h.input_vars().contains(v)).map(|(v, b)| (*v, *b)).collect();
    worlds(&h.xi(&own).expect("enumerable"))
}

/// Random well-typed source over `≤ 5` qubits and `≤ 3` classical registers.
pub struct ProgramGen {
    pub nq: u32,
    pub stmts: usize,
    /// Allow `input` qubits.
    pub inputs: bool,
}

impl ProgramGen {
    pub fn source<R: Rng>(&self, rng: &mut R) -> String {
        let nq = self.nq;
        let mut s = String::new();
        let _ = writeln!(s, "qreg q[{nq}];\ncreg c[2];\ncreg d[1];\ncreg e[1];");
        s.push_str("oracle par(a[2]) = [a[0] ^ a[1]];\n");
        s.push_str("mixed flip(r[1]) {\n  3/4 : skip;\n  1/4 : X(r[0]);\n}\n");
        s.push_str("mixed dephase(r[1]) {\n  1/2 : skip;\n  1/2 : Z(r[0]);\n}\n");
        if nq >= 2 {
            s.push_str("mixed pair(r[2]) {\n  1/2 : skip;\n  1/4 : { X(r[0]); X(r[1]); }\n  1/8 : H(r[1]);\n  1/8 : { H(r[0]); r[0] => X(r[1]); }\n}\n");
        }
        for i in 0..nq {
            let _ = writeln!(s, "{} q[{i}];", if self.inputs && rng.gen_bool(0.4) { "input" } else { "init" });
        }
        for _ in 0..self.stmts {
            self.stmt(rng, &mut s, 2, "");
        }
        s
    }

    fn qubit<R: Rng>(&self, rng: &mut R, avoid: &[u32]) -> Option<u32> {
        let free: Vec<u32> = (0..self.nq).filter(|q| !avoid.contains(q)).collect();
        free.choose(rng).copied()
    }

    /// Unitary statement avoiding `avoid`.
    fn unitary<R: Rng>(&self, rng: &mut R, s: &mut String, depth: u32, avoid: &[u32], pad: &str) {
        let Some(t) = self.qubit(rng, avoid) else {
            let _ = writeln!(s, "{pad}skip;");
            return;
        };
        match rng.gen_range(0..10) {
            0..=2 => {
                let _ = writeln!(s, "{pad}H(q[{t}]);");
            }
            3 => {
                let _ = writeln!(s, "{pad}X(q[{t}]);");
            }
            4 => {
                let _ = writeln!(s, "{pad}Z[{}](q[{t}]);", rng.gen_range(1..=3));
            }
            5 => {
                let _ = writeln!(s, "{pad}Zdg[{}](q[{t}]);", rng.gen_range(1..=3));
            }
            6 | 7 => {
                let mut av = avoid.to_vec();
                av.push(t);
                if let Some(c) = self.qubit(rng, &av) {
                    let g = if rng.gen_bool(0.5) { "CNOT".to_string() } else { format!("CZ[{}]", rng.gen_range(1..=3)) };
                    let _ = writeln!(s, "{pad}{g}(q[{c}], q[{t}]);");
                } else {
                    let _ = writeln!(s, "{pad}H(q[{t}]);");
                }
            }
            _ if depth > 0 => {
                // controlled block
                let mut av = avoid.to_vec();
                av.push(t);
                let neg = if rng.gen_bool(0.3) { "!" } else { "" };
                let _ = writeln!(s, "{pad}if {neg}q[{t}] {{");
                let inner = format!("{pad}  ");
                for _ in 0..rng.gen_range(1..=2) {
                    self.unitary(rng, s, depth - 1, &av, &inner);
                }
                let _ = writeln!(s, "{pad}}}");
            }
            _ => {
                let _ = writeln!(s, "{pad}skip;");
            }
        }
    }

    fn stmt<R: Rng>(&self, rng: &mut R, s: &mut String, depth: u32, pad: &str) {
        let q = rng.gen_range(0..self.nq);
        match rng.gen_range(0..16) {
            0..=5 => self.unitary(rng, s, depth, &[], pad),
            6 | 7 => {
                let c = ["c[0]", "c[1]", "e[0]"].choose(rng).unwrap();
                let _ = writeln!(s, "{pad}measure(q[{q}], {c});");
            }
            8 => {
                let _ = writeln!(s, "{pad}reset q[{q}];");
            }
            9 => {
                let _ = writeln!(s, "{pad}d := par(c);");
            }
            10 => {
                let g = ["flip", "dephase"].choose(rng).unwrap();
                let _ = writeln!(s, "{pad}{g}(q[{q}]);");
            }
            11 if self.nq >= 2 => {
                let a = rng.gen_range(0..self.nq - 1);
                let _ = writeln!(s, "{pad}pair(q[{a}..{}]);", a + 1);
            }
            12 | 13 if depth > 0 => {
                let conds = ["c[0]", "c[1]", "d[0]", "e[0]", "c[0] ^ c[1]", "!c[1] & d[0]"];
                let _ = writeln!(s, "{pad}if {} {{", conds.choose(rng).unwrap());
                let inner = format!("{pad}  ");
                for _ in 0..rng.gen_range(1..=2) {
                    self.stmt(rng, s, depth - 1, &inner);
                }
                if rng.gen_bool(0.5) {
                    let _ = writeln!(s, "{pad}}} else {{");
                    self.stmt(rng, s, depth - 1, &inner);
                }
                let _ = writeln!(s, "{pad}}}");
            }
            14 => {
                let _ = writeln!(s, "{pad}skip;");
            }
            _ => self.unitary(rng, s, depth, &[], pad),
        }
    }
}
