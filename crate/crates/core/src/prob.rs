//! Exact and interval norms of path-sums.
//!
//! The support is split into independent components (variables linked by a
//! shared phase monomial, output cell or scalar); the squared norm is the
//! product of the per-component sums `Σ_key |Σ_{y→key} s(y)·e^{2πiP(y)}|²`.

use std::collections::{BTreeMap, BTreeSet};

use crate::boolexpr::{BoolExpr, Var};
use crate::compiled::{CBool, CPhase, VarIndex};
use crate::exact::ExactReal;
use crate::hps::Hps;
use crate::interval::{ComplexInterval, Interval};
use crate::phase::{Dyadic, PhasePoly};
use crate::scalar::Scalar;

/// Largest component enumerated.
pub const COMPONENT_LIMIT: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NormError {
    #[error("component with {0} path variables is too large to enumerate")]
    TooLarge(usize),
    #[error("norm depends on the input variables")]
    InputDependent,
    #[error("scalar has no exact value")]
    Inexact,
}

struct Component {
    vars: Vec<Var>,
    inputs: Vec<Var>,
    phase: PhasePoly,
    cells: Vec<BoolExpr>,
    scalar: Option<Scalar>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.parent[a.max(b)] = a.min(b);
        }
    }
}

/// Output coordinates: quantum cells and `def`/`val` pairs of history entries.
fn output_cells(h: &Hps) -> Vec<Vec<BoolExpr>> {
    let mut out: Vec<Vec<BoolExpr>> = h.mem.qu.values().map(|b| vec![b.clone()]).collect();
    for (_, col) in h.mem.cl.columns() {
        for (_, e) in col {
            out.push(vec![e.def.clone(), e.val.clone()]);
        }
    }
    out
}

fn components(h: &Hps) -> Vec<Component> {
    let su: Vec<Var> = h.support.iter().copied().collect();
    let pos: BTreeMap<Var, usize> = su.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut uf = UnionFind::new(su.len());
    let link = |uf: &mut UnionFind, vs: &BTreeSet<Var>| {
        let ids: Vec<usize> = vs.iter().filter_map(|v| pos.get(v).copied()).collect();
        for w in ids.windows(2) {
            uf.union(w[0], w[1]);
        }
    };
    for m in h.phase.terms().keys() {
        link(&mut uf, &m.vars().iter().copied().collect());
    }
    let cells = output_cells(h);
    for c in &cells {
        let mut vs = BTreeSet::new();
        for e in c {
            e.collect_vars(&mut vs);
        }
        link(&mut uf, &vs);
    }
    let svars = h.scalar.vars();
    link(&mut uf, &svars);

    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for (i, v) in su.iter().enumerate() {
        let r = uf.find(i);
        groups
            .entry(r)
            .or_insert_with(|| Component { vars: Vec::new(), inputs: Vec::new(), phase: PhasePoly::zero(), cells: Vec::new(), scalar: None })
            .vars
            .push(*v);
    }
    let root_of = |uf: &mut UnionFind, vs: &BTreeSet<Var>| vs.iter().find_map(|v| pos.get(v).map(|i| uf.find(*i)));
    for (m, d) in h.phase.terms() {
        let vs: BTreeSet<Var> = m.vars().iter().copied().collect();
        if let Some(r) = root_of(&mut uf, &vs) {
            groups.get_mut(&r).unwrap().phase.add_term(m.clone(), *d);
        }
    }
    for c in &cells {
        let mut vs = BTreeSet::new();
        for e in c {
            e.collect_vars(&mut vs);
        }
        if let Some(r) = root_of(&mut uf, &vs) {
            groups.get_mut(&r).unwrap().cells.extend(c.iter().cloned());
        }
    }
    let mut out: Vec<Component> = Vec::new();
    let scalar_root = root_of(&mut uf, &svars);
    if let Some(r) = scalar_root {
        groups.get_mut(&r).unwrap().scalar = Some(h.scalar.clone());
    }
    out.extend(groups.into_values());
    if scalar_root.is_none() {
        out.push(Component { vars: Vec::new(), inputs: Vec::new(), phase: PhasePoly::zero(), cells: Vec::new(), scalar: Some(h.scalar.clone()) });
    }
    for c in &mut out {
        let mut vs = c.phase.vars();
        for e in &c.cells {
            e.collect_vars(&mut vs);
        }
        if let Some(s) = &c.scalar {
            s.collect_vars(&mut vs);
        }
        c.inputs = vs.into_iter().filter(|v| v.is_input()).collect();
    }
    out
}

/// Per-key lists of (amplitude value, phase) for one input assignment.
fn groups(c: &Component, rho_in: &BTreeMap<Var, bool>) -> Result<BTreeMap<Vec<bool>, Vec<(Scalar, Dyadic)>>, NormError> {
    let ix = VarIndex::new(c.vars.iter().copied().chain(rho_in.keys().copied())).ok_or(NormError::TooLarge(c.vars.len()))?;
    let mut base = 0u64;
    for (v, b) in rho_in {
        if *b {
            base |= 1 << ix.position(*v).unwrap();
        }
    }
    let phase = CPhase::new(&c.phase, &ix);
    let cells: Vec<CBool> = c.cells.iter().map(|e| CBool::new(e, &ix)).collect();
    let scalar = c.scalar.as_ref().map(|s| s.substitute_bits(rho_in));
    let mut out: BTreeMap<Vec<bool>, Vec<(Scalar, Dyadic)>> = BTreeMap::new();
    for a in 0..(1u64 << c.vars.len()) {
        let mut rho: BTreeMap<Var, bool> = BTreeMap::new();
        for (i, v) in c.vars.iter().enumerate() {
            rho.insert(*v, a >> i & 1 == 1);
        }
        let full = (0..c.vars.len()).fold(base, |acc, i| if a >> i & 1 == 1 { acc | 1 << ix.position(c.vars[i]).unwrap() } else { acc });
        let s = match &scalar {
            None => Scalar::one(),
            Some(s) => s.substitute_bits(&rho),
        };
        if s.is_zero_syntactic() {
            continue;
        }
        let key: Vec<bool> = cells.iter().map(|e| e.eval(full)).collect();
        out.entry(key).or_default().push((s, phase.eval(full)));
    }
    Ok(out)
}

fn input_assignments(inputs: &[Var]) -> Result<Vec<BTreeMap<Var, bool>>, NormError> {
    if inputs.len() > 16 {
        return Err(NormError::TooLarge(inputs.len()));
    }
    Ok((0..(1u64 << inputs.len()))
        .map(|a| inputs.iter().enumerate().map(|(i, v)| (*v, a >> i & 1 == 1)).collect())
        .collect())
}

fn component_exact(c: &Component) -> Result<ExactReal, NormError> {
    if c.vars.len() > COMPONENT_LIMIT {
        return Err(NormError::TooLarge(c.vars.len()));
    }
    let mut result: Option<ExactReal> = None;
    for rho in input_assignments(&c.inputs)? {
        let mut total = ExactReal::zero();
        for (_, paths) in groups(c, &rho)? {
            // merge equal phases, then Σ_{j,l} s_j s_l c(p_j − p_l)/2
            let mut by_phase: BTreeMap<Dyadic, ExactReal> = BTreeMap::new();
            for (s, p) in paths {
                let v = s.as_exact().ok_or(NormError::Inexact)?;
                let e = by_phase.entry(p).or_default();
                *e = e.add(&v);
            }
            let items: Vec<(Dyadic, ExactReal)> = by_phase.into_iter().filter(|(_, v)| !v.is_zero()).collect();
            for (j, (pj, sj)) in items.iter().enumerate() {
                total = total.add(&sj.square());
                for (pl, sl) in &items[j + 1..] {
                    total = total.add(&sj.mul(sl).mul(&ExactReal::cos2_turns(pj.sub(*pl))));
                }
            }
        }
        match &result {
            None => result = Some(total),
            Some(r) if *r == total => {}
            Some(r) => {
                if !r.sub(&total).is_zero() {
                    return Err(NormError::InputDependent);
                }
            }
        }
    }
    Ok(result.unwrap_or_else(ExactReal::zero))
}

fn component_interval(c: &Component, prec: u32) -> Result<Interval, NormError> {
    if c.vars.len() > COMPONENT_LIMIT {
        return Err(NormError::TooLarge(c.vars.len()));
    }
    let mut result: Option<Interval> = None;
    for rho in input_assignments(&c.inputs)? {
        let mut total = Interval::zero(prec);
        for (_, paths) in groups(c, &rho)? {
            let mut acc = ComplexInterval::zero(prec);
            for (s, p) in paths {
                let z = s.to_complex_interval(p, prec).map_err(|_| NormError::Inexact)?;
                acc = acc.add(&z);
            }
            total = total.add(&acc.norm_sqr());
        }
        match &result {
            None => result = Some(total),
            Some(r) => {
                if r.hi_rational() < total.lo_rational() || total.hi_rational() < r.lo_rational() {
                    return Err(NormError::InputDependent);
                }
                result = Some(Interval::hull(r, &total));
            }
        }
    }
    Ok(result.unwrap_or_else(|| Interval::zero(prec)))
}

/// Exact `‖h‖²`, valid for every input assignment.
pub fn exact_norm_sqr(h: &Hps) -> Result<ExactReal, NormError> {
    let mut acc = ExactReal::one();
    for c in components(h) {
        if c.vars.is_empty() && c.inputs.is_empty() {
            if let Some(s) = &c.scalar {
                acc = acc.mul(&s.as_exact().ok_or(NormError::Inexact)?.square());
            }
            continue;
        }
        let v = component_exact(&c)?;
        if v.is_zero() {
            return Ok(ExactReal::zero());
        }
        acc = acc.mul(&v);
    }
    Ok(acc)
}

/// Enclosure of `‖h‖²`.
pub fn interval_norm_sqr(h: &Hps, prec: u32) -> Result<Interval, NormError> {
    let mut acc = Interval::from_int(1, prec);
    for c in components(h) {
        let v = if c.vars.is_empty() && c.inputs.is_empty() {
            match &c.scalar {
                Some(s) => s.to_interval(prec).map_err(|_| NormError::Inexact)?.square(),
                None => continue,
            }
        } else {
            component_interval(&c, prec)?
        };
        acc = acc.mul(&v);
    }
    Ok(acc)
}

/// Exact norm when available, otherwise an enclosure.
#[derive(Clone, Debug, PartialEq)]
pub enum Probability {
    Exact(ExactReal),
    Approx(Interval),
}

impl Probability {
    pub fn to_interval(&self, prec: u32) -> Interval {
        match self {
            Probability::Exact(e) => e.to_interval(prec),
            Probability::Approx(i) => i.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(e) => e.to_f64(),
            Probability::Approx(i) => i.mid_f64(),
        }
    }

    pub fn as_exact(&self) -> Option<&ExactReal> {
        match self {
            Probability::Exact(e) => Some(e),
            Probability::Approx(_) => None,
        }
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Probability::Exact(e) => write!(f, "{e}"),
            Probability::Approx(i) => write!(f, "{i}"),
        }
    }
}

pub fn norm_sqr(h: &Hps, prec: u32) -> Result<Probability, NormError> {
    match exact_norm_sqr(h) {
        Ok(e) => Ok(Probability::Exact(e)),
        Err(NormError::Inexact) => Ok(Probability::Approx(interval_norm_sqr(h, prec)?)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{Addr, HybridMemory};
    use crate::scalar::inv_sqrt2;

    fn y(i: u32) -> BoolExpr {
        BoolExpr::var(Var::path(i))
    }

    #[test]
    fn teleport_residue_has_unit_norm() {
        let mut mem = HybridMemory::new();
        mem.cl.alloc(Addr::new("p", 0));
        mem.cl.alloc(Addr::new("a", 0));
        mem.push_classical(&[(Addr::new("p", 0), y(1))]).unwrap();
        mem.push_classical(&[(Addr::new("a", 0), y(0))]).unwrap();
        let h = Hps { phase: PhasePoly::zero(), mem, scalar: Scalar::ratio(1, 2), support: [Var::path(0), Var::path(1)].into_iter().collect() };
        assert!(exact_norm_sqr(&h).unwrap().is_one());
    }

    #[test]
    fn interference_and_free_vars() {
        // Σ_y |0⟩ / √2 : both paths land on the same output
        let h = Hps { scalar: inv_sqrt2(), support: [Var::path(0)].into_iter().collect(), ..Hps::basis([(Addr::new("q", 0), BoolExpr::zero())]) };
        assert_eq!(exact_norm_sqr(&h).unwrap(), ExactReal::from_int(2));
        let p = h.phase_add(&PhasePoly::lifted(&y(0), Dyadic::HALF));
        assert!(exact_norm_sqr(&p).unwrap().is_zero());
        let q = h.phase_add(&PhasePoly::lifted(&y(0), Dyadic::new(1, 2)));
        assert_eq!(exact_norm_sqr(&q).unwrap(), ExactReal::one());
        let i = interval_norm_sqr(&q, 80).unwrap();
        assert!((i.mid_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn input_dependence_detected() {
        let x = BoolExpr::var(Var::input(0));
        let h = Hps { phase: PhasePoly::lifted(&y(0).and(&x), Dyadic::HALF), scalar: Scalar::ratio(1, 2), support: [Var::path(0)].into_iter().collect(), ..Hps::basis([(Addr::new("q", 0), BoolExpr::zero())]) };
        assert_eq!(exact_norm_sqr(&h), Err(NormError::InputDependent));
    }
}
