//! Rewrite rules on path-sums, a normalization strategy, and refinement.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::boolexpr::{BoolExpr, Monomial, Var};
use crate::exact::ExactReal;
use crate::hps::{Hps, WorldVector, ENUM_LIMIT};
use crate::memory::{Addr, ClassicalMemory};
use crate::phase::{determined_vars, Dyadic, PhasePoly};
use crate::prob::{exact_norm_sqr, NormError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    HH,
    PB,
    Filter,
    CV,
    PE,
    Split,
    SplitMany,
    FdFactor,
    FdDistribute,
    Discard,
    Scalar,
    Phase,
    NeutralAdd,
    PlusCompat,
    TimesCompat,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::HH => "HH",
            Rule::PB => "PB",
            Rule::Filter => "Filter",
            Rule::CV => "CV",
            Rule::PE => "PE",
            Rule::Split => "Split",
            Rule::SplitMany => "SplitMany",
            Rule::FdFactor => "FD-factor",
            Rule::FdDistribute => "FD-distribute",
            Rule::Discard => "Discard",
            Rule::Scalar => "Scalar",
            Rule::Phase => "Phase",
            Rule::NeutralAdd => "NeutralAdd",
            Rule::PlusCompat => "PlusCompat",
            Rule::TimesCompat => "TimesCompat",
        };
        f.write_str(s)
    }
}

/// Which relation links the two sides of a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// Equal concretizations.
    PhaseExact,
    /// Equal up to a per-world phase.
    ModuloPhase,
    /// Refinement: a unit-norm factor was dropped.
    Refinement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleApplication {
    pub rule: Rule,
    pub location: String,
    pub relation: Relation,
    pub support_before: usize,
    pub support_after: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub before: Option<Box<Hps>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<Box<Hps>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewriteTrace {
    pub steps: Vec<RuleApplication>,
    pub counters: BTreeMap<Rule, usize>,
    pub fuel_exhausted: bool,
}

impl RewriteTrace {
    pub fn push(&mut self, a: RuleApplication) {
        *self.counters.entry(a.rule).or_insert(0) += 1;
        self.steps.push(a);
    }

    pub fn extend(&mut self, o: RewriteTrace) {
        for s in o.steps {
            self.push(s);
        }
        self.fuel_exhausted |= o.fuel_exhausted;
    }

    pub fn total(&self) -> usize {
        self.steps.len()
    }

    pub fn count(&self, r: Rule) -> usize {
        self.counters.get(&r).copied().unwrap_or(0)
    }

    /// Whether every step is phase-exact.
    pub fn phase_exact(&self) -> bool {
        self.steps.iter().all(|s| s.relation == Relation::PhaseExact)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "counters": self.counters.iter().map(|(r, c)| (r.to_string(), *c)).collect::<BTreeMap<_, _>>(),
            "steps": self.steps.iter().map(|s| serde_json::json!({
                "rule": s.rule.to_string(),
                "location": s.location,
                "support": [s.support_before, s.support_after],
            })).collect::<Vec<_>>(),
            "fuel_exhausted": self.fuel_exhausted,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("variable {0} is not in the support")]
    VariableNotInSupport(Var),
    #[error("substitution is not a bijection")]
    NonBijective,
    #[error("discarded factor does not have unit norm")]
    NormNotUnit,
    #[error("discarded factor mentions input variables")]
    InputVarPresent,
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

/// Normalization settings.
#[derive(Clone, Debug)]
pub struct Strategy {
    pub fuel: usize,
    pub allow_pe: bool,
    pub cv: bool,
    /// Allow PB to bind a variable with non-half coefficients into `2cos`.
    pub cos_pb: bool,
    /// Variables that must survive unchanged.
    pub protected: BTreeSet<Var>,
    /// Record before/after snapshots in the trace.
    pub snapshots: bool,
}

impl Default for Strategy {
    fn default() -> Strategy {
        Strategy { fuel: 10_000, allow_pe: true, cv: true, cos_pb: true, protected: BTreeSet::new(), snapshots: false }
    }
}

impl Strategy {
    pub fn with_fuel(fuel: usize) -> Strategy {
        Strategy { fuel, ..Strategy::default() }
    }
}

/// Where each variable occurs.
#[derive(Default)]
struct Occ {
    mem: BTreeSet<Var>,
    cl: BTreeSet<Var>,
    scalar: BTreeSet<Var>,
    guards: BTreeSet<Var>,
}

impl Occ {
    fn build(h: &Hps) -> Occ {
        let mut o = Occ::default();
        for b in h.mem.qu.values() {
            b.collect_vars(&mut o.mem);
        }
        h.mem.cl.collect_vars(&mut o.cl);
        o.mem.extend(o.cl.iter().copied());
        h.scalar.collect_vars(&mut o.scalar);
        for t in h.scalar.terms() {
            t.guard.collect_vars(&mut o.guards);
        }
        o
    }
}

fn step(rule: Rule, location: String, relation: Relation, before: &Hps, after: &Hps, st: &Strategy) -> RuleApplication {
    RuleApplication {
        rule,
        location,
        relation,
        support_before: before.support.len(),
        support_after: after.support.len(),
        before: st.snapshots.then(|| Box::new(before.clone())),
        after: st.snapshots.then(|| Box::new(after.clone())),
    }
}

fn eliminate(h: &Hps, y: Var, f: &BoolExpr) -> Hps {
    let mut r = h.substitute_var(y, f);
    r.support.remove(&y);
    r
}

/// Whether `y := f` is forced on every path with a nonzero scalar term.
fn filter_valid(s: &Scalar, y: Var, f: &BoolExpr) -> bool {
    let nf = f.not();
    let mut r1 = BTreeMap::new();
    r1.insert(y, true);
    let mut r0 = BTreeMap::new();
    r0.insert(y, false);
    s.terms().iter().all(|t| {
        let g1 = t.guard.substitute_bits(&r1);
        let g0 = t.guard.substitute_bits(&r0);
        g1.and(&nf).is_zero() && g0.and(f).is_zero()
    })
}

fn try_filter(h: &Hps, st: &Strategy, occ: &Occ) -> Option<(Hps, RuleApplication)> {
    if h.scalar.is_zero_syntactic() {
        if h.support.is_empty() && h.phase.is_zero() {
            return None;
        }
        let rho: BTreeMap<Var, bool> =
            h.support.iter().filter(|v| !st.protected.contains(v)).map(|v| (*v, false)).collect();
        let mut r = h.substitute_bits(&rho);
        r.phase = PhasePoly::zero();
        if r == *h {
            return None;
        }
        let a = step(Rule::Filter, "zero amplitude".into(), Relation::PhaseExact, h, &r, st);
        return Some((r, a));
    }
    for &y in &occ.guards {
        if !y.is_path() || !h.support.contains(&y) || st.protected.contains(&y) {
            continue;
        }
        let mut cands: Vec<BoolExpr> = vec![BoolExpr::one(), BoolExpr::zero()];
        let mut r1 = BTreeMap::new();
        r1.insert(y, true);
        for t in h.scalar.terms() {
            if !t.guard.contains_var(y) {
                continue;
            }
            if t.guard.is_linear_in(y) {
                cands.push(t.guard.xor(&BoolExpr::var(y)).not());
            }
            cands.push(t.guard.substitute_bits(&r1));
        }
        for f in cands {
            if f.contains_var(y) || !filter_valid(&h.scalar, y, &f) {
                continue;
            }
            let r = eliminate(h, y, &f);
            let a = step(Rule::Filter, format!("{y} := {f}"), Relation::PhaseExact, h, &r, st);
            return Some((r, a));
        }
    }
    None
}

fn try_hh(h: &Hps, st: &Strategy, occ: &Occ) -> Option<(Hps, RuleApplication)> {
    let pat = h.phase.find_hh_pattern_with(
        &h.support,
        |v| !occ.mem.contains(&v) && !occ.scalar.contains(&v) && !st.protected.contains(&v),
        |v| !occ.cl.contains(&v) && !st.protected.contains(&v),
    )?;
    let mut sigma = BTreeMap::new();
    sigma.insert(pat.y1, pat.f.clone());
    let mut support = h.support.clone();
    support.remove(&pat.y0);
    support.remove(&pat.y1);
    let r = Hps {
        phase: pat.remainder.substitute(&sigma),
        mem: h.mem.substitute(&sigma),
        scalar: h.scalar.substitute(&sigma).scale(&ExactReal::from_int(2)),
        support,
    };
    let a = step(Rule::HH, format!("{}, {} := {}", pat.y0, pat.y1, pat.f), Relation::PhaseExact, h, &r, st);
    Some((r, a))
}

/// Expressions fully written in the history (every row, not only the present).
pub fn history_values(cl: &ClassicalMemory) -> Vec<BoolExpr> {
    let mut out = Vec::new();
    for (_, col) in cl.columns() {
        for (_, e) in col {
            if e.def.is_one() {
                out.push(e.val.clone());
            }
        }
    }
    out
}

/// Whether a phase is a function of the classical history only.
pub fn phase_is_classical(p: &PhasePoly, values: &[BoolExpr]) -> bool {
    if p.vars().iter().any(|v| v.is_input()) {
        return false;
    }
    let det = determined_vars(values);
    if p.vars().iter().all(|v| det.contains(v)) {
        return true;
    }
    p.classical_only(values)
}

fn try_pe(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    if !st.allow_pe || h.phase.is_zero() {
        return None;
    }
    let values = history_values(&h.mem.cl);
    let det = determined_vars(&values);
    let mut drop = PhasePoly::zero();
    let mut rest = PhasePoly::zero();
    for (m, d) in h.phase.terms() {
        let vs = m.vars();
        if vs.iter().any(|v| v.is_input()) {
            rest.add_term(m.clone(), *d);
        } else if vs.iter().all(|v| det.contains(v)) || (!values.is_empty() && PhasePoly::term(m.clone(), *d).classical_only(&values)) {
            drop.add_term(m.clone(), *d);
        } else {
            rest.add_term(m.clone(), *d);
        }
    }
    if drop.is_zero() {
        let mut joint = PhasePoly::zero();
        for (m, d) in rest.terms() {
            if !m.vars().iter().any(|v| v.is_input()) {
                joint.add_term(m.clone(), *d);
            }
        }
        if joint.len() > 1 && !values.is_empty() && joint.classical_only(&values) {
            drop = joint;
        } else {
            return None;
        }
    }
    let r = Hps { phase: h.phase.sub(&drop), ..h.clone() };
    let a = step(Rule::PE, format!("drop {drop}"), Relation::ModuloPhase, h, &r, st);
    Some((r, a))
}

fn try_pb(h: &Hps, st: &Strategy, occ: &Occ) -> Option<(Hps, RuleApplication)> {
    let mut skip: BTreeSet<Var> = BTreeSet::new();
    let (y, p2, p1, half) = loop {
        let (y, p2, p1) = h.phase.find_linear_phase_var(&h.support, |v| {
            !occ.mem.contains(&v) && !occ.scalar.contains(&v) && !st.protected.contains(&v) && !skip.contains(&v)
        })?;
        let half = p2.terms().values().all(|d| *d == Dyadic::HALF);
        if half || st.cos_pb {
            break (y, p2, p1, half);
        }
        skip.insert(y);
    };
    let mut support = h.support.clone();
    support.remove(&y);
    let (phase, factor, loc) = if half {
        let g = BoolExpr::from_monomials(p2.terms().keys().cloned().collect());
        (p1, Scalar::indicator(&g.not()).scale(&ExactReal::from_int(2)), format!("{y}: 2[{}]", g.not()))
    } else {
        let phi = p2.half();
        (p1.add(&phi), Scalar::cos2_turns(&phi), format!("{y}: 2cos(2pi*({phi}))"))
    };
    let r = Hps { phase, mem: h.mem.clone(), scalar: h.scalar.mul(&factor), support };
    let a = step(Rule::PB, loc, Relation::PhaseExact, h, &r, st);
    Some((r, a))
}

/// Output expressions in traversal order.
fn output_exprs(h: &Hps) -> Vec<&BoolExpr> {
    let mut out: Vec<&BoolExpr> = h.mem.qu.values().collect();
    for (_, col) in h.mem.cl.columns() {
        for (_, e) in col {
            if e.def.is_one() {
                out.push(&e.val);
            }
        }
    }
    out
}

fn try_cv(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    if !st.cv {
        return None;
    }
    let mut tried: BTreeSet<(Var, BoolExpr)> = BTreeSet::new();
    for e in output_exprs(h) {
        if e.len() <= 1 {
            continue;
        }
        for y in e.vars() {
            if !y.is_path() || !h.support.contains(&y) || st.protected.contains(&y) || !e.is_linear_in(y) {
                continue;
            }
            let f = e.xor(&BoolExpr::var(y));
            if !tried.insert((y, f.clone())) {
                continue;
            }
            let img = BoolExpr::var(y).xor(&f);
            if local_size_delta(h, y, &img) >= 0 {
                continue;
            }
            let r = h.substitute_var(y, &img);
            let a = step(Rule::CV, format!("{y} := {img}"), Relation::PhaseExact, h, &r, st);
            return Some((r, a));
        }
    }
    None
}

fn local_size_delta(h: &Hps, y: Var, img: &BoolExpr) -> isize {
    let mut d: isize = 0;
    let mut count = |old: &BoolExpr| {
        if old.contains_var(y) {
            d += old.substitute_var(y, img).len() as isize - old.len() as isize;
        }
    };
    for b in h.mem.qu.values() {
        count(b);
    }
    for (_, col) in h.mem.cl.columns() {
        for (_, e) in col {
            count(&e.val);
            count(&e.def);
        }
    }
    if h.phase.contains_var(y) {
        d += h.phase.substitute_var(y, img).len() as isize - h.phase.len() as isize;
    }
    if h.scalar.contains_var(y) {
        d += h.scalar.substitute_var(y, img).size() as isize - h.scalar.size() as isize;
    }
    d
}

pub fn apply_filter(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    try_filter(h, st, &Occ::build(h))
}

pub fn apply_hh(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    try_hh(h, st, &Occ::build(h))
}

pub fn apply_pe(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    try_pe(h, st)
}

pub fn apply_pb(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    try_pb(h, st, &Occ::build(h))
}

pub fn apply_cv_heuristic(h: &Hps, st: &Strategy) -> Option<(Hps, RuleApplication)> {
    try_cv(h, st)
}

/// Change of variables by affine shifts `y ↦ y ⊕ f` and permutations.
pub fn apply_cv(h: &Hps, sigma: &BTreeMap<Var, BoolExpr>) -> Result<Hps, RewriteError> {
    let dom: BTreeSet<Var> = sigma.keys().copied().collect();
    let mut perm_images = BTreeSet::new();
    let mut perm_dom = BTreeSet::new();
    for (y, e) in sigma {
        if !h.support.contains(y) {
            return Err(RewriteError::VariableNotInSupport(*y));
        }
        if let Some(v) = e.as_var() {
            if !dom.contains(&v) || !perm_images.insert(v) {
                return Err(RewriteError::NonBijective);
            }
            perm_dom.insert(*y);
            continue;
        }
        if !e.is_linear_in(*y) {
            return Err(RewriteError::NonBijective);
        }
        let f = e.xor(&BoolExpr::var(*y));
        if f.vars().iter().any(|v| dom.contains(v)) {
            return Err(RewriteError::NonBijective);
        }
    }
    if perm_images != perm_dom {
        return Err(RewriteError::NonBijective);
    }
    Ok(h.substitute(sigma))
}

/// `h ≡ h[y:=0] ⊞ h[y:=1]`.
pub fn apply_split(h: &Hps, y: Var) -> Result<(Hps, Hps), RewriteError> {
    if !h.support.contains(&y) {
        return Err(RewriteError::VariableNotInSupport(y));
    }
    let mut r0 = BTreeMap::new();
    r0.insert(y, false);
    let mut r1 = BTreeMap::new();
    r1.insert(y, true);
    Ok((h.substitute_bits(&r0), h.substitute_bits(&r1)))
}

/// Split on several variables at once.
pub fn apply_split_many(h: &Hps, ys: &[Var]) -> Result<Vec<(BTreeMap<Var, bool>, Hps)>, RewriteError> {
    for y in ys {
        if !h.support.contains(y) {
            return Err(RewriteError::VariableNotInSupport(*y));
        }
    }
    Ok((0..(1u64 << ys.len()))
        .map(|a| {
            let rho: BTreeMap<Var, bool> = ys.iter().enumerate().map(|(i, v)| (*v, a >> i & 1 == 1)).collect();
            let hh = h.substitute_bits(&rho);
            (rho, hh)
        })
        .collect())
}

/// `h ⊞ 0` with selector `yf`; the zero summand shares the memory shape of `h`.
pub fn neutral_add(h: &Hps, yf: Var) -> Hps {
    let rho: BTreeMap<Var, bool> = h.support.iter().map(|v| (*v, false)).collect();
    let mut zero = h.substitute_bits(&rho);
    zero.scalar = Scalar::zero();
    zero.phase = PhasePoly::zero();
    Hps::psadd(&Scalar::one(), h, &zero, yf).expect("same memory shape")
}

/// Moves a constant phase of `1/2` into the scalar sign.
pub fn apply_phase(h: &Hps) -> Option<Hps> {
    if h.phase.constant_term() != Dyadic::HALF {
        return None;
    }
    Some(Hps {
        phase: h.phase.sub(&PhasePoly::constant(Dyadic::HALF)),
        scalar: h.scalar.neg(),
        ..h.clone()
    })
}

/// Multiplies the scalar.
pub fn apply_scalar(a: &Scalar, h: &Hps) -> Hps {
    h.scalar_mul(a)
}

/// Normalizes with the priority loop Filter → HH → PE → PB → CV.
pub fn normalize(h: &Hps, st: &Strategy) -> (Hps, RewriteTrace) {
    let mut trace = RewriteTrace::default();
    let r = normalize_into(h.clone(), st, &mut trace);
    (r, trace)
}

pub fn normalize_into(mut h: Hps, st: &Strategy, trace: &mut RewriteTrace) -> Hps {
    let mut fuel = st.fuel;
    loop {
        let occ = Occ::build(&h);
        let next = try_filter(&h, st, &occ)
            .or_else(|| try_hh(&h, st, &occ))
            .or_else(|| try_pe(&h, st))
            .or_else(|| try_pb(&h, st, &occ))
            .or_else(|| try_cv(&h, st));
        match next {
            None => return h,
            Some((r, a)) => {
                if fuel == 0 {
                    trace.fuel_exhausted = true;
                    return h;
                }
                fuel -= 1;
                trace.push(a);
                h = r;
            }
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Splits `h` into a factor owning the given addresses and the rest, with
/// `tensor(h1, h2) ≡ h`; `None` when not separable. Constant scalars and
/// input-only phase terms go to the rest and the kept side respectively.
pub fn apply_fd(h: &Hps, qkeep: &BTreeSet<Addr>, ckeep: &BTreeSet<Addr>) -> Option<(Hps, Hps)> {
    let su: Vec<Var> = h.support.iter().copied().collect();
    let pos: BTreeMap<Var, usize> = su.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    // nodes: support vars, then one node per side
    let kept_node = su.len();
    let rest_node = su.len() + 1;
    let mut uf = UnionFind((0..su.len() + 2).collect());
    let link_all = |uf: &mut UnionFind, vs: &BTreeSet<Var>, extra: Option<usize>| {
        let mut ids: Vec<usize> = vs.iter().filter_map(|v| pos.get(v).copied()).collect();
        ids.extend(extra);
        for w in ids.windows(2) {
            uf.union(w[0], w[1]);
        }
    };
    for m in h.phase.terms().keys() {
        link_all(&mut uf, &m.vars().iter().copied().collect(), None);
    }
    for (a, b) in &h.mem.qu {
        link_all(&mut uf, &b.vars(), Some(if qkeep.contains(a) { kept_node } else { rest_node }));
    }
    for (a, col) in h.mem.cl.columns() {
        let node = if ckeep.contains(a) { kept_node } else { rest_node };
        for (_, e) in col {
            let mut vs = e.val.vars();
            e.def.collect_vars(&mut vs);
            link_all(&mut uf, &vs, Some(node));
        }
    }
    link_all(&mut uf, &h.scalar.vars(), None);
    if uf.find(kept_node) == uf.find(rest_node) {
        return None;
    }
    let kept_root = uf.find(kept_node);
    let in_kept = |uf: &mut UnionFind, v: &Var| pos.get(v).is_some_and(|i| uf.find(*i) == kept_root);

    let mut p1 = PhasePoly::zero();
    let mut p2 = PhasePoly::zero();
    for (m, d) in h.phase.terms() {
        let path: Vec<&Var> = m.vars().iter().filter(|v| v.is_path()).collect();
        let to_kept = match path.first() {
            Some(v) => in_kept(&mut uf, v),
            None => true,
        };
        if to_kept {
            p1.add_term(m.clone(), *d);
        } else {
            p2.add_term(m.clone(), *d);
        }
    }
    let svars: Vec<Var> = h.scalar.vars().into_iter().filter(|v| v.is_path()).collect();
    let scalar_kept = match svars.first() {
        Some(v) => in_kept(&mut uf, v),
        None => h.scalar.vars().iter().any(|v| v.is_input()),
    };
    let (s1, s2) = if scalar_kept { (h.scalar.clone(), Scalar::one()) } else { (Scalar::one(), h.scalar.clone()) };
    let su1: BTreeSet<Var> = su.iter().filter(|v| in_kept(&mut uf, v)).copied().collect();
    let su2: BTreeSet<Var> = h.support.difference(&su1).copied().collect();
    let (m1, m2) = h.mem.partition(qkeep, ckeep);
    Some((Hps { phase: p1, mem: m1, scalar: s1, support: su1 }, Hps { phase: p2, mem: m2, scalar: s2, support: su2 }))
}

/// Drops `h1` from `h1 ⊗ h2` after checking it is a unit-norm, input-free factor.
pub fn apply_discard(h1: &Hps, h2: &Hps) -> Result<Hps, RewriteError> {
    if !h1.input_vars().is_empty() {
        return Err(RewriteError::InputVarPresent);
    }
    match exact_norm_sqr(h1) {
        Ok(n) if n.is_one() => Ok(h2.clone()),
        Ok(_) => Err(RewriteError::NormNotUnit),
        Err(e) => Err(RewriteError::Inconclusive(e.to_string())),
    }
}

/// Removes rows that hold no entry in any column.
pub fn compact_history(h: &Hps) -> Hps {
    let used: BTreeSet<usize> = h.mem.cl.columns().flat_map(|(_, c)| c.iter().map(|(r, _)| *r)).collect();
    if used.len() == h.mem.cl.age() {
        return h.clone();
    }
    let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let mut r = h.clone();
    let mut cols: BTreeMap<Addr, Vec<(usize, crate::memory::Entry)>> = BTreeMap::new();
    for (a, col) in h.mem.cl.columns() {
        cols.insert(a.clone(), col.iter().map(|(row, e)| (remap[row], e.clone())).collect());
    }
    r.mem.cl = ClassicalMemory::from_parts(cols, used.len(), h.mem.cl.hidden().clone());
    r
}

/// Outcome of comparing two path-sums.
#[derive(Clone, Debug, PartialEq)]
pub enum Equivalence {
    Holds(Relation),
    Fails(Counterexample),
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub inputs: BTreeMap<Var, bool>,
    pub detail: String,
}

/// Canonical renaming of path variables by first occurrence.
pub fn canonical_rename(h: &Hps, base: u32) -> Hps {
    let mut order: Vec<Var> = Vec::new();
    let mut seen: BTreeSet<Var> = BTreeSet::new();
    let mut visit = |e: &BoolExpr, order: &mut Vec<Var>| {
        let mut ms: Vec<&Monomial> = e.monomials().iter().collect();
        ms.sort_by_key(|m| m.degree());
        for m in ms {
            for v in m.vars() {
                if v.is_path() && h.support.contains(v) && seen.insert(*v) {
                    order.push(*v);
                }
            }
        }
    };
    for b in h.mem.qu.values() {
        visit(b, &mut order);
    }
    for (_, col) in h.mem.cl.columns() {
        for (_, e) in col {
            visit(&e.val, &mut order);
            visit(&e.def, &mut order);
        }
    }
    let mut terms: Vec<(&Monomial, &Dyadic)> = h.phase.terms().iter().collect();
    terms.sort_by_key(|(m, d)| (m.degree(), **d));
    for (m, _) in terms {
        visit(&BoolExpr::monomial(m.clone()), &mut order);
    }
    for v in h.scalar.vars() {
        visit(&BoolExpr::var(v), &mut order);
    }
    for v in &h.support {
        visit(&BoolExpr::var(*v), &mut order);
    }
    let map: BTreeMap<Var, Var> = order.iter().enumerate().map(|(i, v)| (*v, Var::path(base + i as u32))).collect();
    h.rename(&map)
}

fn min_degree_witness(e_monos: &[Monomial], constant: bool) -> BTreeMap<Var, bool> {
    if constant {
        return BTreeMap::new();
    }
    let m = e_monos.iter().filter(|m| !m.is_one()).min_by_key(|m| m.degree());
    m.map(|m| m.vars().iter().map(|v| (*v, true)).collect()).unwrap_or_default()
}

fn complete_inputs(mut w: BTreeMap<Var, bool>, a: &Hps, b: &Hps) -> BTreeMap<Var, bool> {
    for v in a.input_vars().into_iter().chain(b.input_vars()) {
        w.entry(v).or_insert(false);
    }
    w
}

/// Decides `a ≡ b` (up to per-world phase), structurally first.
pub fn equivalent(a: &Hps, b: &Hps) -> Equivalence {
    let a = compact_history(a);
    let b = compact_history(b);
    if a.mem.addresses() != b.mem.addresses() {
        return Equivalence::Fails(Counterexample {
            inputs: BTreeMap::new(),
            detail: "memories have different address sets".into(),
        });
    }
    let ca = canonical_rename(&a, 1 << 30);
    let cb = canonical_rename(&b, 1 << 30);
    if ca.mem == cb.mem && ca.scalar == cb.scalar && ca.support == cb.support {
        let d = ca.phase.sub(&cb.phase);
        if d.is_zero() {
            return Equivalence::Holds(Relation::PhaseExact);
        }
        if d.vars().is_empty() || phase_is_classical(&d, &history_values(&ca.mem.cl)) {
            return Equivalence::Holds(Relation::ModuloPhase);
        }
        if ca.support.is_empty() {
            let monos: Vec<Monomial> = d.terms().keys().filter(|m| !m.is_one()).cloned().collect();
            let w = complete_inputs(min_degree_witness(&monos, false), &a, &b);
            return Equivalence::Fails(Counterexample {
                inputs: w,
                detail: format!("residual phase {d}"),
            });
        }
    }
    if ca.support.is_empty() && cb.support.is_empty() {
        for (addr, ea) in &ca.mem.qu {
            let eb = &cb.mem.qu[addr];
            let x = ea.xor(eb);
            if !x.is_zero() {
                let w = complete_inputs(min_degree_witness(x.monomials(), x.monomials().iter().any(|m| m.is_one())), &a, &b);
                return Equivalence::Fails(Counterexample { inputs: w, detail: format!("cell {addr} differs: {ea} vs {eb}") });
            }
        }
    }
    enumerate_equivalence(&a, &b)
}

/// Compares ξ for every input assignment, modulo a per-history phase.
pub fn enumerate_equivalence(a: &Hps, b: &Hps) -> Equivalence {
    let inputs: BTreeSet<Var> = a.input_vars().union(&b.input_vars()).copied().collect();
    if inputs.len() > 10 || a.support.len() > ENUM_LIMIT || b.support.len() > ENUM_LIMIT {
        return Equivalence::Inconclusive("normal forms differ and enumeration is infeasible".into());
    }
    let inputs: Vec<Var> = inputs.into_iter().collect();
    let mut world_phase: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    for k in 0..(1u64 << inputs.len()) {
        let rho: BTreeMap<Var, bool> = inputs.iter().enumerate().map(|(i, v)| (*v, k >> i & 1 == 1)).collect();
        let (wa, wb) = match (a.xi(&rho), b.xi(&rho)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => return Equivalence::Inconclusive("enumeration failed".into()),
        };
        if wa.qaddrs != wb.qaddrs || wa.caddrs != wb.caddrs {
            return Equivalence::Fails(Counterexample { inputs: rho, detail: "memory layouts differ".into() });
        }
        if let Some(detail) = compare_worlds(&wa, &wb, &mut world_phase) {
            return Equivalence::Fails(Counterexample { inputs: rho, detail });
        }
    }
    Equivalence::Holds(Relation::ModuloPhase)
}

const TOL: f64 = 1e-9;

fn compare_worlds(wa: &WorldVector, wb: &WorldVector, world_phase: &mut BTreeMap<Vec<u8>, Complex64>) -> Option<String> {
    let keys: BTreeSet<&Vec<u8>> = wa.worlds.keys().chain(wb.worlds.keys()).collect();
    let empty = BTreeMap::new();
    for k in keys {
        let va = wa.worlds.get(k).unwrap_or(&empty);
        let vb = wb.worlds.get(k).unwrap_or(&empty);
        let na = WorldVector::world_norm_sqr(va);
        let nb = WorldVector::world_norm_sqr(vb);
        if na < TOL && nb < TOL {
            continue;
        }
        if (na - nb).abs() > TOL {
            return Some(format!("history {k:?}: weights {na} vs {nb}"));
        }
        let (i, za) = va.iter().max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr())).unwrap();
        let zb = vb.get(i).copied().unwrap_or_default();
        if zb.norm() < TOL {
            return Some(format!("history {k:?}: supports differ"));
        }
        let ratio = za / zb;
        let ratio = ratio / ratio.norm();
        if let Some(prev) = world_phase.get(k) {
            if (prev - ratio).norm() > 1e-7 {
                return Some(format!("history {k:?}: relative phase depends on the input"));
            }
        } else {
            world_phase.insert(k.clone(), ratio);
        }
        let idx: BTreeSet<&u64> = va.keys().chain(vb.keys()).collect();
        for j in idx {
            let x = va.get(j).copied().unwrap_or_default();
            let y = vb.get(j).copied().unwrap_or_default() * ratio;
            if (x - y).norm() > 1e-7 {
                return Some(format!("history {k:?}: amplitude of basis {j} differs"));
            }
        }
    }
    None
}

/// Result of a refinement search.
#[derive(Clone, Debug, PartialEq)]
pub enum Refinement {
    /// `h ≡ target' ⊗ witness` with a unit-norm, input-free witness.
    Holds(Box<Hps>),
    Fails(String),
    Inconclusive(String),
}

/// Decides `h ⇛ target`: factor off the target's addresses and discard the rest.
pub fn check_refine(h: &Hps, target: &Hps, st: &Strategy) -> (Refinement, RewriteTrace) {
    let mut trace = RewriteTrace::default();
    let hn = normalize_into(h.clone(), st, &mut trace);
    let tn = normalize(target, st).0;
    let qkeep: BTreeSet<Addr> = tn.mem.qu.keys().cloned().collect();
    let ckeep: BTreeSet<Addr> = tn.mem.cl.addrs().cloned().collect();
    for a in qkeep.iter() {
        if !hn.mem.qu.contains_key(a) {
            return (Refinement::Fails(format!("address {a} missing")), trace);
        }
    }
    for a in ckeep.iter() {
        if !hn.mem.cl.contains(a) {
            return (Refinement::Fails(format!("address {a} missing")), trace);
        }
    }
    let Some((kept, residue)) = apply_fd(&hn, &qkeep, &ckeep) else {
        return (numeric_refine(&hn, &tn, &qkeep), trace);
    };
    trace.push(step(Rule::FdFactor, "target addresses".into(), Relation::PhaseExact, &hn, &kept, st));
    if !residue.input_vars().is_empty() {
        return (numeric_refine(&hn, &tn, &qkeep), trace);
    }
    let n = match exact_norm_sqr(&residue) {
        Ok(n) => n,
        Err(NormError::TooLarge(k)) => return (Refinement::Inconclusive(format!("residue component of {k} variables")), trace),
        Err(e) => return (Refinement::Inconclusive(e.to_string()), trace),
    };
    if n.is_zero() {
        return (Refinement::Fails("state is zero".into()), trace);
    }
    let Some(root) = n.as_rational().and_then(|q| ExactReal::sqrt_rational(&q)) else {
        return (Refinement::Inconclusive(format!("residue norm {n} has no exact square root")), trace);
    };
    let inv = root.inv().expect("nonzero");
    let residue = residue.scalar_mul(&Scalar::exact(inv));
    let kept = kept.scalar_mul(&Scalar::exact(root));
    match apply_discard(&residue, &kept) {
        Ok(_) => {}
        Err(e) => return (Refinement::Inconclusive(e.to_string()), trace),
    }
    trace.push(step(Rule::Discard, "unit residue".into(), Relation::Refinement, &hn, &kept, st));
    let kept = normalize_into(kept, st, &mut trace);
    match equivalent(&kept, &tn) {
        Equivalence::Holds(_) => (Refinement::Holds(Box::new(residue)), trace),
        Equivalence::Fails(c) => (Refinement::Fails(c.detail), trace),
        Equivalence::Inconclusive(r) => (Refinement::Inconclusive(r), trace),
    }
}

/// Per-input, per-history rank-one test of the amplitude matrix
/// (kept basis × rest basis) and comparison of the kept factor.
fn numeric_refine(h: &Hps, target: &Hps, qkeep: &BTreeSet<Addr>) -> Refinement {
    let inputs: Vec<Var> = h.input_vars().union(&target.input_vars()).copied().collect();
    if inputs.len() > 10 || h.support.len() > ENUM_LIMIT || target.support.len() > ENUM_LIMIT {
        return Refinement::Inconclusive("no factorization found and enumeration is infeasible".into());
    }
    for k in 0..(1u64 << inputs.len()) {
        let rho: BTreeMap<Var, bool> = inputs.iter().enumerate().map(|(i, v)| (*v, k >> i & 1 == 1)).collect();
        let (Ok(w), Ok(t)) = (h.xi(&rho), target.xi(&rho)) else {
            return Refinement::Inconclusive("enumeration failed".into());
        };
        let kept_bits: Vec<usize> = w.qaddrs.iter().enumerate().filter(|(_, a)| qkeep.contains(a)).map(|(i, _)| i).collect();
        let tv: Vec<Complex64> = {
            let mut acc = BTreeMap::new();
            for v in t.worlds.values() {
                for (b, z) in v {
                    *acc.entry(*b).or_insert(Complex64::default()) += z;
                }
            }
            (0..(1u64 << t.qaddrs.len())).map(|b| acc.get(&b).copied().unwrap_or_default()).collect()
        };
        for (key, v) in &w.worlds {
            if WorldVector::world_norm_sqr(v) < TOL {
                continue;
            }
            // matrix rows: kept index, cols: rest index
            let mut m: BTreeMap<(u64, u64), Complex64> = BTreeMap::new();
            for (b, z) in v {
                let (mut ki, mut ri, mut kc, mut rc) = (0u64, 0u64, 0, 0);
                for i in 0..w.qaddrs.len() {
                    let bit = b >> i & 1;
                    if kept_bits.contains(&i) {
                        ki |= bit << kc;
                        kc += 1;
                    } else {
                        ri |= bit << rc;
                        rc += 1;
                    }
                }
                m.insert((ki, ri), *z);
            }
            let (&(pk, pr), &pz) = m.iter().max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr())).unwrap();
            let col: BTreeMap<u64, Complex64> = m.iter().filter(|((_, r), _)| *r == pr).map(|((k, _), z)| (*k, *z)).collect();
            let row: BTreeMap<u64, Complex64> = m.iter().filter(|((k, _), _)| *k == pk).map(|((_, r), z)| (*r, *z)).collect();
            for ((ki, ri), z) in &m {
                let pred = col.get(ki).copied().unwrap_or_default() * row.get(ri).copied().unwrap_or_default() / pz;
                if (pred - z).norm() > 1e-7 {
                    return Refinement::Fails(format!("history {key:?} is entangled with the discarded part"));
                }
            }
            // the kept factor must be proportional to the target state
            let nc: f64 = col.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nt: f64 = tv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nt < TOL {
                return Refinement::Fails("target is zero".into());
            }
            let overlap: Complex64 = col.iter().map(|(k, z)| tv.get(*k as usize).copied().unwrap_or_default().conj() * z).sum();
            if (overlap.norm() - nc * nt).abs() > 1e-7 {
                return Refinement::Fails(format!("history {key:?}: kept state differs from the target"));
            }
        }
    }
    Refinement::Inconclusive("no symbolic factorization found".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::inv_sqrt2;

    fn y(i: u32) -> BoolExpr {
        BoolExpr::var(Var::path(i))
    }

    fn x(i: u32) -> BoolExpr {
        BoolExpr::var(Var::input(i))
    }

    fn su(ids: &[u32]) -> BTreeSet<Var> {
        ids.iter().map(|i| Var::path(*i)).collect()
    }

    #[test]
    fn hh_on_double_hadamard() {
        // H;H on |x⟩: ⟨x·y0/2 + y0·y1/2, |y1⟩, 1/2⟩
        let phase = PhasePoly::lifted(&x(0).and(&y(0)), Dyadic::HALF).add(&PhasePoly::lifted(&y(0).and(&y(1)), Dyadic::HALF));
        let h = Hps { phase, scalar: Scalar::ratio(1, 2), support: su(&[0, 1]), ..Hps::basis([(Addr::new("q", 0), y(1))]) };
        let (n, t) = normalize(&h, &Strategy::default());
        assert_eq!(n, Hps::basis([(Addr::new("q", 0), x(0))]));
        assert_eq!(t.count(Rule::HH), 1);
    }

    #[test]
    fn pb_quarter_phase() {
        let h = Hps { phase: PhasePoly::lifted(&y(0), Dyadic::new(1, 2)), support: su(&[0]), ..Hps::basis([(Addr::new("q", 0), BoolExpr::zero())]) };
        let (r, _) = apply_pb(&h, &Strategy::default()).unwrap();
        assert_eq!(r.phase, PhasePoly::constant(Dyadic::new(1, 3)));
        assert_eq!(r.scalar, Scalar::half_power(1));
        let h2 = Hps { phase: PhasePoly::lifted(&y(0), Dyadic::HALF), ..h };
        let (r2, _) = apply_pb(&h2, &Strategy::default()).unwrap();
        assert!(r2.scalar.is_zero_syntactic());
    }

    #[test]
    fn filter_guard() {
        let h = Hps { scalar: Scalar::ratio(1, 2).guard(&y(0)), support: su(&[0]), ..Hps::basis([(Addr::new("q", 0), y(0))]) };
        let (r, _) = apply_filter(&h, &Strategy::default()).unwrap();
        assert_eq!(r.mem.qu[&Addr::new("q", 0)], BoolExpr::one());
        assert!(r.support.is_empty());
        let g = Hps { scalar: Scalar::one().guard(&x(0)), ..Hps::basis([(Addr::new("q", 0), x(0))]) };
        assert!(apply_filter(&g, &Strategy::default()).is_none());
    }

    #[test]
    fn neutral_add_collapses() {
        let h = Hps { scalar: inv_sqrt2(), support: su(&[0]), ..Hps::basis([(Addr::new("q", 0), y(0))]) };
        let s = neutral_add(&h, Var::path(9));
        let (n, _) = normalize(&s, &Strategy::default());
        assert_eq!(n, h);
    }

    #[test]
    fn fd_and_discard() {
        let mut mem = Hps::basis([(Addr::new("b", 0), x(0)), (Addr::new("a", 0), y(0))]).mem;
        mem.cl.alloc(Addr::new("c", 0));
        mem.push_classical(&[(Addr::new("c", 0), y(0))]).unwrap();
        let h = Hps { phase: PhasePoly::zero(), mem, scalar: inv_sqrt2(), support: su(&[0]) };
        let keep: BTreeSet<Addr> = [Addr::new("b", 0)].into_iter().collect();
        let (k, r) = apply_fd(&h, &keep, &BTreeSet::new()).unwrap();
        assert_eq!(k, Hps::basis([(Addr::new("b", 0), x(0))]));
        assert_eq!(apply_discard(&r, &k).unwrap(), k);
        assert_eq!(apply_discard(&r.scalar_mul(&inv_sqrt2()), &k), Err(RewriteError::NormNotUnit));
        let bell = Hps { phase: PhasePoly::zero(), mem: Hps::basis([(Addr::new("a", 0), y(0)), (Addr::new("b", 0), y(0))]).mem, scalar: inv_sqrt2(), support: su(&[0]) };
        assert!(apply_fd(&bell, &[Addr::new("a", 0)].into_iter().collect(), &BTreeSet::new()).is_none());
    }

    #[test]
    fn refine_and_equiv() {
        let t = Hps::basis([(Addr::new("b", 0), x(0))]);
        let (r, _) = check_refine(&t, &t, &Strategy::default());
        assert!(matches!(r, Refinement::Holds(_)));
        let zero = Hps::basis([(Addr::new("b", 0), BoolExpr::zero())]);
        let (r, _) = check_refine(&t, &zero, &Strategy::default());
        assert!(matches!(r, Refinement::Fails(_)));
        let bell = Hps { phase: PhasePoly::zero(), mem: Hps::basis([(Addr::new("a", 0), y(0)), (Addr::new("b", 0), y(0))]).mem, scalar: inv_sqrt2(), support: su(&[0]) };
        let (r, _) = check_refine(&bell, &Hps::basis([(Addr::new("a", 0), BoolExpr::zero())]), &Strategy::default());
        assert!(matches!(r, Refinement::Fails(_)), "{r:?}");
        let one = Hps::basis([(Addr::new("b", 0), BoolExpr::one())]);
        assert!(matches!(equivalent(&zero, &one), Equivalence::Fails(_)));
        let zx = t.phase_add(&PhasePoly::lifted(&x(0), Dyadic::new(1, 2)));
        match equivalent(&zx, &t) {
            Equivalence::Fails(c) => assert_eq!(c.inputs[&Var::input(0)], true),
            o => panic!("{o:?}"),
        }
        let g = t.phase_add(&PhasePoly::constant(Dyadic::HALF));
        assert_eq!(equivalent(&g, &t), Equivalence::Holds(Relation::ModuloPhase));
    }

    #[test]
    fn cv_validation() {
        let h = Hps { scalar: Scalar::ratio(1, 2), support: su(&[0, 1]), ..Hps::basis([(Addr::new("q", 0), y(0).xor(&x(0))), (Addr::new("r", 0), y(1))]) };
        let mut s = BTreeMap::new();
        s.insert(Var::path(0), y(0).xor(&x(0)));
        let r = apply_cv(&h, &s).unwrap();
        assert_eq!(r.mem.qu[&Addr::new("q", 0)], y(0));
        let mut bad = BTreeMap::new();
        bad.insert(Var::path(0), y(1));
        assert_eq!(apply_cv(&h, &bad), Err(RewriteError::NonBijective));
        let (n, t) = normalize(&h, &Strategy::default());
        assert_eq!(t.count(Rule::CV), 1);
        assert_eq!(n.mem.qu[&Addr::new("q", 0)], y(0));
    }
}
