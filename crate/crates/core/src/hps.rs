//! Hybrid path-sums `⟨P, o, s⟩_su` and their concretizations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::boolexpr::{BoolExpr, Monomial, Var};
use crate::compiled::{CBool, CPhase, CScalar, VarIndex};
use crate::memory::{Addr, HybridMemory, MemoryError};
use crate::phase::PhasePoly;
use crate::scalar::{Scalar, ScalarError};

/// Default cap on enumerated path variables.
pub const ENUM_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HpsError {
    #[error("variable {0} is not fresh")]
    NonFreshVariable(Var),
    #[error("supports share variable {0}")]
    SupportClash(Var),
    #[error("support of {0} variables exceeds the enumeration limit")]
    SupportTooLarge(usize),
    #[error("variable {0} is not in the support")]
    VariableNotInSupport(Var),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hps {
    pub phase: PhasePoly,
    pub mem: HybridMemory,
    pub scalar: Scalar,
    pub support: BTreeSet<Var>,
}

impl Default for Hps {
    fn default() -> Hps {
        Hps::new(HybridMemory::new())
    }
}

impl Hps {
    /// `⟨0, mem, 1⟩_∅`.
    pub fn new(mem: HybridMemory) -> Hps {
        Hps { phase: PhasePoly::zero(), mem, scalar: Scalar::one(), support: BTreeSet::new() }
    }

    /// The empty path-sum, neutral for `⊗`.
    pub fn empty() -> Hps {
        Hps::new(HybridMemory::new())
    }

    /// Basis state `|inputs⟩` on the given addresses.
    pub fn basis(cells: impl IntoIterator<Item = (Addr, BoolExpr)>) -> Hps {
        let mut m = HybridMemory::new();
        for (a, b) in cells {
            m.alloc_quantum(a, b);
        }
        Hps::new(m)
    }

    pub fn scalar_mul(&self, a: &Scalar) -> Hps {
        Hps { scalar: self.scalar.mul(a), ..self.clone() }
    }

    pub fn guard_mul(&self, b: &BoolExpr) -> Hps {
        Hps { scalar: self.scalar.guard(b), ..self.clone() }
    }

    pub fn phase_add(&self, p: &PhasePoly) -> Hps {
        Hps { phase: self.phase.add(p), ..self.clone() }
    }

    pub fn support_extend(&self, y: Var) -> Result<Hps, HpsError> {
        if !y.is_path() || self.support.contains(&y) || self.vars().contains(&y) {
            return Err(HpsError::NonFreshVariable(y));
        }
        let mut h = self.clone();
        h.support.insert(y);
        Ok(h)
    }

    /// Smallest path id above every path variable in use.
    pub fn fresh_id(&self) -> u32 {
        self.vars()
            .into_iter()
            .chain(self.support.iter().copied())
            .filter(|v| v.is_path())
            .map(|v| v.id + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.phase.collect_vars(&mut s);
        self.mem.collect_vars(&mut s);
        self.scalar.collect_vars(&mut s);
        s
    }

    pub fn input_vars(&self) -> BTreeSet<Var> {
        self.vars().into_iter().filter(|v| v.is_input()).collect()
    }

    /// Path variables used but missing from the support, if any.
    pub fn check_hygiene(&self) -> Result<(), Var> {
        for v in self.vars() {
            if v.is_path() && !self.support.contains(&v) {
                return Err(v);
            }
        }
        Ok(())
    }

    pub fn substitute(&self, sigma: &BTreeMap<Var, BoolExpr>) -> Hps {
        Hps {
            phase: self.phase.substitute(sigma),
            mem: self.mem.substitute(sigma),
            scalar: self.scalar.substitute(sigma),
            support: self.support.clone(),
        }
    }

    pub fn substitute_var(&self, v: Var, e: &BoolExpr) -> Hps {
        let mut s = BTreeMap::new();
        s.insert(v, e.clone());
        self.substitute(&s)
    }

    pub fn substitute_bits(&self, rho: &BTreeMap<Var, bool>) -> Hps {
        Hps {
            phase: self.phase.substitute_bits(rho),
            mem: self.mem.substitute_bits(rho),
            scalar: self.scalar.substitute_bits(rho),
            support: self.support.iter().filter(|v| !rho.contains_key(v)).copied().collect(),
        }
    }

    /// Consistent renaming of path variables (must be injective).
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Hps {
        let sigma: BTreeMap<Var, BoolExpr> = map.iter().map(|(a, b)| (*a, BoolExpr::var(*b))).collect();
        let mut h = self.substitute(&sigma);
        h.support = self.support.iter().map(|v| *map.get(v).unwrap_or(v)).collect();
        h
    }

    /// `r·h1 ⊞ h2` with selector `yf` (`yf = 0` selects `h1`).
    pub fn psadd(r: &Scalar, h1: &Hps, h2: &Hps, yf: Var) -> Result<Hps, HpsError> {
        if h1.vars().contains(&yf) || h2.vars().contains(&yf) || h1.support.contains(&yf) || h2.support.contains(&yf) {
            return Err(HpsError::NonFreshVariable(yf));
        }
        let c = BoolExpr::var(yf);
        let only2 = Monomial::from_vars(h2.support.difference(&h1.support).copied());
        let only1 = Monomial::from_vars(h1.support.difference(&h2.support).copied());
        let s1 = h1.scalar.mul(r).guard(&BoolExpr::monomial(only2)).guard(&c.not());
        let s2 = h2.scalar.guard(&BoolExpr::monomial(only1)).guard(&c);
        let mut support: BTreeSet<Var> = h1.support.union(&h2.support).copied().collect();
        support.insert(yf);
        Ok(Hps {
            phase: PhasePoly::select(&c, &h1.phase, &h2.phase),
            mem: HybridMemory::select(&c, &h1.mem, &h2.mem)?,
            scalar: s1.add(&s2),
            support,
        })
    }

    pub fn tensor(&self, o: &Hps) -> Result<Hps, HpsError> {
        if let Some(v) = self.support.intersection(&o.support).next() {
            return Err(HpsError::SupportClash(*v));
        }
        Ok(Hps {
            phase: self.phase.add(&o.phase),
            mem: self.mem.disjoint_union(&o.mem)?,
            scalar: self.scalar.mul(&o.scalar),
            support: self.support.union(&o.support).copied().collect(),
        })
    }

    /// Size measure used by rewriting heuristics.
    pub fn size(&self) -> usize {
        let mem: usize = self.mem.qu.values().map(|b| b.len()).sum::<usize>()
            + self.mem.cl.columns().flat_map(|(_, c)| c.iter()).map(|(_, e)| e.val.len() + e.def.len()).sum::<usize>();
        self.phase.len() + mem + self.scalar.size()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "phase": self.phase.to_string(),
            "memory": self.mem.to_json(),
            "scalar": self.scalar.to_string(),
            "support": self.support.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        })
    }

    /// Quantum addresses in basis-index order.
    pub fn qaddrs(&self) -> Vec<Addr> {
        self.mem.qu.keys().cloned().collect()
    }

    /// ξ at a concrete input assignment.
    pub fn xi(&self, inputs: &BTreeMap<Var, bool>) -> Result<WorldVector, HpsError> {
        self.xi_limited(inputs, ENUM_LIMIT)
    }

    pub fn xi_limited(&self, inputs: &BTreeMap<Var, bool>, limit: usize) -> Result<WorldVector, HpsError> {
        let n = self.support.len();
        if n > limit {
            return Err(HpsError::SupportTooLarge(n));
        }
        let free_inputs: Vec<Var> = self.input_vars().into_iter().filter(|v| !inputs.contains_key(v)).collect();
        if let Some(v) = free_inputs.first() {
            return Err(HpsError::Memory(MemoryError::Missing(crate::boolexpr::MissingVar(*v))));
        }
        let ix = VarIndex::new(self.support.iter().copied().chain(inputs.keys().copied()))
            .ok_or(HpsError::SupportTooLarge(n + inputs.len()))?;
        let mut base = 0u64;
        for (v, b) in inputs {
            if *b {
                base |= 1 << ix.position(*v).unwrap();
            }
        }
        let support_pos: Vec<u32> = self.support.iter().map(|v| ix.position(*v).unwrap()).collect();
        let phase = CPhase::new(&self.phase, &ix);
        let scalar = CScalar::new(&self.scalar, &ix);
        let qaddrs = self.qaddrs();
        let qcells: Vec<CBool> = self.mem.qu.values().map(|b| CBool::new(b, &ix)).collect();
        let caddrs: Vec<Addr> = self.mem.cl.addrs().cloned().collect();
        let age = self.mem.cl.age();
        let centries: Vec<Vec<(usize, CBool, CBool)>> = self
            .mem
            .cl
            .columns()
            .map(|(_, col)| col.iter().map(|(r, e)| (*r, CBool::new(&e.def, &ix), CBool::new(&e.val, &ix))).collect())
            .collect();
        let mut acc: HashMap<Vec<u8>, HashMap<u64, Complex64>> = HashMap::new();
        let mut key = vec![0u8; caddrs.len() * age];
        for a in 0..(1u64 << n) {
            let mut bits = base;
            for (i, p) in support_pos.iter().enumerate() {
                if a >> i & 1 == 1 {
                    bits |= 1 << p;
                }
            }
            let s = scalar.eval(bits, &ix);
            if s == 0.0 {
                continue;
            }
            let amp = Complex64::from_polar(s, std::f64::consts::TAU * phase.eval_f64(bits));
            key.fill(0);
            for (c, col) in centries.iter().enumerate() {
                for (r, d, v) in col {
                    if d.eval(bits) {
                        key[c * age + r] = 1 + v.eval(bits) as u8;
                    }
                }
            }
            let mut basis = 0u64;
            for (i, q) in qcells.iter().enumerate() {
                if q.eval(bits) {
                    basis |= 1 << i;
                }
            }
            let slot = match acc.get_mut(&key) {
                Some(v) => v,
                None => acc.entry(key.clone()).or_default(),
            };
            *slot.entry(basis).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let worlds: BTreeMap<Vec<u8>, BTreeMap<u64, Complex64>> = acc.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
        let hidden: Vec<bool> = caddrs.iter().map(|a| self.mem.cl.is_hidden(a)).collect();
        Ok(WorldVector { qaddrs, caddrs, hidden, age, worlds })
    }

    /// ξ for every assignment of the input variables.
    pub fn xi_all_inputs(&self) -> Result<Vec<(BTreeMap<Var, bool>, WorldVector)>, HpsError> {
        let inputs: Vec<Var> = self.input_vars().into_iter().collect();
        if inputs.len() > 16 {
            return Err(HpsError::SupportTooLarge(inputs.len()));
        }
        let mut out = Vec::new();
        for a in 0..(1u64 << inputs.len()) {
            let rho: BTreeMap<Var, bool> = inputs.iter().enumerate().map(|(i, v)| (*v, a >> i & 1 == 1)).collect();
            let w = self.xi(&rho)?;
            out.push((rho, w));
        }
        Ok(out)
    }

    pub fn density_map(&self, inputs: &BTreeMap<Var, bool>) -> Result<CqStateView, HpsError> {
        Ok(self.xi(inputs)?.density_map())
    }

    /// Probability of a predicate over present classical values, by enumeration.
    pub fn proba(&self, inputs: &BTreeMap<Var, bool>, cond: &dyn Fn(&BTreeMap<Addr, bool>) -> bool) -> Result<f64, HpsError> {
        let w = self.xi(inputs)?;
        Ok(w.proba(cond))
    }

    pub fn norm(&self, inputs: &BTreeMap<Var, bool>) -> Result<f64, HpsError> {
        Ok(self.xi(inputs)?.norm_sqr().sqrt())
    }
}

impl fmt::Display for Hps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let su: Vec<String> = self.support.iter().map(|v| v.to_string()).collect();
        write!(f, "<{}, {}, {}>_{{{}}}", self.phase, self.mem, self.scalar, su.join(","))
    }
}

/// Per-history state vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldVector {
    pub qaddrs: Vec<Addr>,
    pub caddrs: Vec<Addr>,
    pub hidden: Vec<bool>,
    pub age: usize,
    /// History (column-major, 0 hole / 1 false / 2 true) → basis index → amplitude.
    pub worlds: BTreeMap<Vec<u8>, BTreeMap<u64, Complex64>>,
}

impl WorldVector {
    /// Present value per column; holes read as 0.
    pub fn present_of(&self, key: &[u8]) -> BTreeMap<Addr, bool> {
        let mut out = BTreeMap::new();
        for (c, a) in self.caddrs.iter().enumerate() {
            let col = &key[c * self.age..(c + 1) * self.age];
            let v = col.iter().rev().find(|x| **x != 0).is_some_and(|x| *x == 2);
            out.insert(a.clone(), v);
        }
        out
    }

    pub fn world_norm_sqr(v: &BTreeMap<u64, Complex64>) -> f64 {
        v.values().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.worlds.values().map(WorldVector::world_norm_sqr).sum()
    }

    /// Histories with non-negligible weight.
    pub fn nonzero_worlds(&self, eps: f64) -> usize {
        self.worlds.values().filter(|v| WorldVector::world_norm_sqr(v) > eps).count()
    }

    pub fn proba(&self, cond: &dyn Fn(&BTreeMap<Addr, bool>) -> bool) -> f64 {
        self.worlds
            .iter()
            .filter(|(k, _)| cond(&self.present_of(k)))
            .map(|(_, v)| WorldVector::world_norm_sqr(v))
            .sum()
    }

    /// Density operators keyed by readable present values.
    pub fn density_map(&self) -> CqStateView {
        let dim = 1usize << self.qaddrs.len();
        let keys: Vec<Addr> = self
            .caddrs
            .iter()
            .zip(&self.hidden)
            .filter(|(_, h)| !**h)
            .map(|(a, _)| a.clone())
            .collect();
        let mut mats: BTreeMap<Vec<bool>, Vec<Complex64>> = BTreeMap::new();
        for (k, v) in &self.worlds {
            let present = self.present_of(k);
            let key: Vec<bool> = keys.iter().map(|a| present[a]).collect();
            let m = mats.entry(key).or_insert_with(|| vec![Complex64::new(0.0, 0.0); dim * dim]);
            for (i, a) in v {
                for (j, b) in v {
                    m[*i as usize * dim + *j as usize] += a * b.conj();
                }
            }
        }
        CqStateView { qaddrs: self.qaddrs.clone(), keys, dim, mats }
    }
}

/// Present-value-keyed partial density operators.
#[derive(Clone, Debug, PartialEq)]
pub struct CqStateView {
    pub qaddrs: Vec<Addr>,
    pub keys: Vec<Addr>,
    pub dim: usize,
    pub mats: BTreeMap<Vec<bool>, Vec<Complex64>>,
}

impl CqStateView {
    pub fn trace(&self) -> f64 {
        self.mats.values().map(|m| (0..self.dim).map(|i| m[i * self.dim + i].re).sum::<f64>()).sum()
    }

    /// Frobenius distance per key (missing keys count as zero), maximised.
    pub fn max_distance(&self, o: &CqStateView) -> f64 {
        let zero = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        let keys: BTreeSet<&Vec<bool>> = self.mats.keys().chain(o.mats.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let a = self.mats.get(k).unwrap_or(&zero);
                let b = o.mats.get(k).unwrap_or(&zero);
                a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}
