//! Dyadic phase polynomials modulo 1.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::boolexpr::{BoolExpr, MissingVar, Monomial, Var};
use crate::error::ParseError;

/// Largest supported denominator exponent.
pub const MAX_EXP: u32 = 120;

/// A dyadic rational `num / 2^exp` reduced into `[0, 1)`.
///
/// After normalization `num` is odd, or the value is `0/2^0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Dyadic {
    num: u128,
    exp: u32,
}

fn mask(exp: u32) -> u128 {
    if exp >= 128 {
        u128::MAX
    } else {
        (1u128 << exp) - 1
    }
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const HALF: Dyadic = Dyadic { num: 1, exp: 1 };

    fn normalized(mut num: u128, mut exp: u32) -> Dyadic {
        num &= mask(exp);
        if num == 0 {
            return Dyadic::ZERO;
        }
        let tz = num.trailing_zeros().min(exp);
        num >>= tz;
        exp -= tz;
        Dyadic { num, exp }
    }

    /// `n / 2^k` reduced mod 1.
    pub fn new(n: i128, k: u32) -> Dyadic {
        assert!(k <= MAX_EXP, "dyadic exponent {k} exceeds {MAX_EXP}");
        Dyadic::normalized(n as u128, k)
    }

    pub fn numerator(self) -> u128 {
        self.num
    }

    pub fn exponent(self) -> u32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn add(self, o: Dyadic) -> Dyadic {
        let e = self.exp.max(o.exp);
        let a = self.num << (e - self.exp);
        let b = o.num << (e - o.exp);
        Dyadic::normalized(a.wrapping_add(b), e)
    }

    pub fn neg(self) -> Dyadic {
        Dyadic::normalized(self.num.wrapping_neg(), self.exp)
    }

    pub fn sub(self, o: Dyadic) -> Dyadic {
        self.add(o.neg())
    }

    /// Multiplication by an integer, mod 1.
    pub fn mul_int(self, k: i128) -> Dyadic {
        Dyadic::normalized(self.num.wrapping_mul(k as u128), self.exp)
    }

    pub fn mul_u128(self, k: u128) -> Dyadic {
        Dyadic::normalized(self.num.wrapping_mul(k), self.exp)
    }

    /// Half of the representative in `[0, 1)`, giving a value in `[0, 1/2)`.
    pub fn half(self) -> Dyadic {
        if self.num == 0 {
            return self;
        }
        assert!(self.exp < MAX_EXP, "dyadic exponent exceeds {MAX_EXP}");
        Dyadic { num: self.num, exp: self.exp + 1 }
    }

    pub fn to_f64(self) -> f64 {
        (self.num as f64) / 2f64.powi(self.exp as i32)
    }

    /// Signed representative in `(-1/2, 1/2]` as an f64.
    pub fn to_signed_f64(self) -> f64 {
        let v = self.to_f64();
        if v > 0.5 {
            v - 1.0
        } else {
            v
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, 1u128 << self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Dyadic, ParseError> {
        let s = s.trim();
        let bad = || ParseError::msg(format!("bad dyadic `{s}`"));
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r.trim()),
            None => (false, s),
        };
        let (n, d) = match body.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<u128>().map_err(|_| bad())?,
                d.trim().parse::<u128>().map_err(|_| bad())?,
            ),
            None => (body.parse::<u128>().map_err(|_| bad())?, 1),
        };
        if d == 0 || !d.is_power_of_two() {
            return Err(bad());
        }
        let k = d.trailing_zeros();
        if k > MAX_EXP {
            return Err(bad());
        }
        let v = Dyadic::normalized(n, k);
        Ok(if neg { v.neg() } else { v })
    }
}

/// Multilinear polynomial with dyadic coefficients mod 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PhasePoly {
    terms: BTreeMap<Monomial, Dyadic>,
}

/// Decomposition `p = remainder + y0·(y1 ⊕ f)/2` found by [`PhasePoly::find_hh_pattern`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HhPattern {
    pub y0: Var,
    pub y1: Var,
    pub f: BoolExpr,
    pub remainder: PhasePoly,
}

fn lift_product(a: &BTreeMap<Monomial, u128>, b: &BTreeMap<Monomial, u128>, bits: u32) -> BTreeMap<Monomial, u128> {
    let m = mask(bits);
    let mut out: BTreeMap<Monomial, u128> = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let e = out.entry(ma.mul(mb)).or_insert(0);
            *e = e.wrapping_add(ca.wrapping_mul(*cb)) & m;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

impl PhasePoly {
    pub fn zero() -> PhasePoly {
        PhasePoly::default()
    }

    pub fn constant(d: Dyadic) -> PhasePoly {
        let mut p = PhasePoly::zero();
        p.add_term(Monomial::one(), d);
        p
    }

    pub fn term(m: Monomial, d: Dyadic) -> PhasePoly {
        let mut p = PhasePoly::zero();
        p.add_term(m, d);
        p
    }

    /// `d·⌈e⌉`.
    pub fn lifted(e: &BoolExpr, d: Dyadic) -> PhasePoly {
        let mut p = PhasePoly::zero();
        p.add_lifted(d, e, &Monomial::one());
        p
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Dyadic> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Dyadic {
        self.terms.get(&Monomial::one()).copied().unwrap_or(Dyadic::ZERO)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    pub fn add_term(&mut self, m: Monomial, d: Dyadic) {
        if d.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(d);
            }
            Entry::Occupied(mut o) => {
                let s = o.get().add(d);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Adds `coef·⌈e⌉·extra`.
    pub fn add_lifted(&mut self, coef: Dyadic, e: &BoolExpr, extra: &Monomial) {
        if coef.is_zero() {
            return;
        }
        for (m, c) in e.lift_mod(coef.exponent()) {
            self.add_term(m.mul(extra), coef.mul_u128(c));
        }
    }

    pub fn add(&self, o: &PhasePoly) -> PhasePoly {
        let mut r = self.clone();
        for (m, d) in &o.terms {
            r.add_term(m.clone(), *d);
        }
        r
    }

    pub fn neg(&self) -> PhasePoly {
        PhasePoly {
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d.neg())).collect(),
        }
    }

    pub fn sub(&self, o: &PhasePoly) -> PhasePoly {
        self.add(&o.neg())
    }

    pub fn mul_int(&self, k: i128) -> PhasePoly {
        let mut r = PhasePoly::zero();
        for (m, d) in &self.terms {
            r.add_term(m.clone(), d.mul_int(k));
        }
        r
    }

    /// Halves every stored coefficient representative.
    pub fn half(&self) -> PhasePoly {
        PhasePoly {
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d.half())).collect(),
        }
    }

    /// `⌈c⌉·self`.
    pub fn mul_bool(&self, c: &BoolExpr) -> PhasePoly {
        if c.is_one() {
            return self.clone();
        }
        let mut r = PhasePoly::zero();
        for (m, d) in &self.terms {
            r.add_lifted(*d, c, m);
        }
        r
    }

    /// `p_false + ⌈c⌉(p_true − p_false)`.
    pub fn select(c: &BoolExpr, p_false: &PhasePoly, p_true: &PhasePoly) -> PhasePoly {
        let diff = p_true.sub(p_false);
        p_false.add(&diff.mul_bool(c))
    }

    /// Simultaneous substitution through the integer lift.
    pub fn substitute(&self, sigma: &BTreeMap<Var, BoolExpr>) -> PhasePoly {
        if sigma.is_empty() {
            return self.clone();
        }
        let mut r = PhasePoly::zero();
        let mut cache: HashMap<(Var, u32), BTreeMap<Monomial, u128>> = HashMap::new();
        for (m, d) in &self.terms {
            if !m.vars().iter().any(|v| sigma.contains_key(v)) {
                r.add_term(m.clone(), *d);
                continue;
            }
            let bits = d.exponent();
            let mut kept = Vec::new();
            let mut acc: BTreeMap<Monomial, u128> = BTreeMap::new();
            acc.insert(Monomial::one(), 1);
            for &v in m.vars() {
                match sigma.get(&v) {
                    Some(e) => {
                        let l = cache.entry((v, bits)).or_insert_with(|| e.lift_mod(bits));
                        acc = lift_product(&acc, l, bits);
                        if acc.is_empty() {
                            break;
                        }
                    }
                    None => kept.push(v),
                }
            }
            let kept = Monomial::from_vars(kept);
            for (am, c) in acc {
                r.add_term(am.mul(&kept), d.mul_u128(c));
            }
        }
        r
    }

    pub fn substitute_var(&self, v: Var, e: &BoolExpr) -> PhasePoly {
        if !self.contains_var(v) {
            return self.clone();
        }
        let mut s = BTreeMap::new();
        s.insert(v, e.clone());
        self.substitute(&s)
    }

    pub fn substitute_bits(&self, rho: &BTreeMap<Var, bool>) -> PhasePoly {
        let mut r = PhasePoly::zero();
        'outer: for (m, d) in &self.terms {
            let mut kept = Vec::new();
            for &v in m.vars() {
                match rho.get(&v) {
                    Some(true) => {}
                    Some(false) => continue 'outer,
                    None => kept.push(v),
                }
            }
            r.add_term(Monomial::from_vars(kept), *d);
        }
        r
    }

    pub fn evaluate<F: Fn(Var) -> Option<bool>>(&self, rho: F) -> Result<Dyadic, MissingVar> {
        let mut acc = Dyadic::ZERO;
        for (m, d) in &self.terms {
            if m.eval(&rho).map_err(MissingVar)? {
                acc = acc.add(*d);
            }
        }
        Ok(acc)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        for m in self.terms.keys() {
            s.extend(m.vars().iter().copied());
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.contains(v))
    }

    /// Splits `p = p1 + v·p2` with `v` absent from `p1` and `p2`.
    pub fn split_on(&self, v: Var) -> (PhasePoly, PhasePoly) {
        let mut p1 = PhasePoly::zero();
        let mut p2 = PhasePoly::zero();
        for (m, d) in &self.terms {
            if m.contains(v) {
                p2.terms.insert(m.without(v), *d);
            } else {
                p1.terms.insert(m.clone(), *d);
            }
        }
        (p1, p2)
    }

    /// First HH decomposition with `y0, y1 ∈ su`, in variable-id order.
    pub fn find_hh_pattern(&self, su: &BTreeSet<Var>) -> Option<HhPattern> {
        self.find_hh_pattern_with(su, |_| true, |_| true)
    }

    /// Like [`find_hh_pattern`](Self::find_hh_pattern) with extra admissibility
    /// filters on the eliminated variable `y0` and the substituted variable `y1`.
    pub fn find_hh_pattern_with<A, B>(&self, su: &BTreeSet<Var>, ok_y0: A, ok_y1: B) -> Option<HhPattern>
    where
        A: Fn(Var) -> bool,
        B: Fn(Var) -> bool,
    {
        let mut occ: BTreeMap<Var, Vec<(&Monomial, Dyadic)>> = BTreeMap::new();
        for (m, d) in &self.terms {
            for &v in m.vars() {
                if v.is_path() && su.contains(&v) {
                    occ.entry(v).or_default().push((m, *d));
                }
            }
        }
        for (&y0, ts) in &occ {
            if !ok_y0(y0) || ts.iter().any(|(_, d)| *d != Dyadic::HALF) {
                continue;
            }
            let g = BoolExpr::from_monomials(ts.iter().map(|(m, _)| m.without(y0)).collect());
            let mut y1s: Vec<Var> = g
                .monomials()
                .iter()
                .filter(|m| m.degree() == 1)
                .map(|m| m.vars()[0])
                .filter(|&v| v.is_path() && v != y0 && su.contains(&v) && g.is_linear_in(v))
                .collect();
            y1s.sort();
            for y1 in y1s {
                if !ok_y1(y1) {
                    continue;
                }
                let f = g.xor(&BoolExpr::var(y1));
                let mut remainder = self.clone();
                for (m, _) in ts {
                    remainder.terms.remove(*m);
                }
                return Some(HhPattern { y0, y1, f, remainder });
            }
        }
        None
    }

    /// Lowest-id `y ∈ su` accepted by `ok`, with the split `p = p1 + y·p2`.
    pub fn find_linear_phase_var<F: Fn(Var) -> bool>(
        &self,
        su: &BTreeSet<Var>,
        ok: F,
    ) -> Option<(Var, PhasePoly, PhasePoly)> {
        su.iter().copied().find(|&y| ok(y)).map(|y| {
            let (p1, p2) = self.split_on(y);
            (y, p2, p1)
        })
    }

    /// Whether `self` is a function of the given present classical values.
    ///
    /// Decided exhaustively when at most 16 variables are involved,
    /// otherwise by a conservative determinacy argument.
    pub fn classical_only(&self, present: &[BoolExpr]) -> bool {
        if self.is_zero() || self.is_constant() {
            return true;
        }
        let mut vars = self.vars();
        let mut rel: Vec<&BoolExpr> = Vec::new();
        let mut used = vec![false; present.len()];
        loop {
            let mut changed = false;
            for (i, e) in present.iter().enumerate() {
                if !used[i] && e.vars().iter().any(|v| vars.contains(v)) {
                    used[i] = true;
                    rel.push(e);
                    e.collect_vars(&mut vars);
                    changed = true;
                }
            }
            if !changed || vars.len() > 16 {
                break;
            }
        }
        if vars.len() <= 16 {
            let vs: Vec<Var> = vars.into_iter().collect();
            let mut seen: HashMap<Vec<bool>, Dyadic> = HashMap::new();
            for a in 0u32..(1u32 << vs.len()) {
                let rho = |v: Var| vs.iter().position(|w| *w == v).map(|i| a >> i & 1 == 1);
                let key: Vec<bool> = rel.iter().map(|e| e.evaluate(rho).unwrap_or(false)).collect();
                let val = self.evaluate(rho).unwrap_or(Dyadic::ZERO);
                match seen.get(&key) {
                    Some(d) if *d != val => return false,
                    Some(_) => {}
                    None => {
                        seen.insert(key, val);
                    }
                }
            }
            return true;
        }
        let det = determined_vars(present);
        self.vars().iter().all(|v| det.contains(v))
    }
}

/// Variables whose value is fixed by present classical values: fixpoint over
/// entries of the shape `y ⊕ g` with `g` already determined.
pub fn determined_vars(present: &[BoolExpr]) -> BTreeSet<Var> {
    let mut det: BTreeSet<Var> = BTreeSet::new();
    loop {
        let mut changed = false;
        for e in present {
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

impl fmt::Display for PhasePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, d)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{d}")?;
            } else {
                write!(f, "{d}")?;
                for v in m.vars() {
                    write!(f, "*{v}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for PhasePoly {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<PhasePoly, ParseError> {
        let mut p = PhasePoly::zero();
        let s = s.trim();
        if s.is_empty() || s == "0" {
            return Ok(p);
        }
        for term in s.split('+') {
            let mut coef = Dyadic::new(1, 0);
            let mut has_coef = false;
            let mut vars = Vec::new();
            for factor in term.split('*') {
                let factor = factor.trim();
                if factor.starts_with('x') || factor.starts_with('y') {
                    vars.push(factor.parse::<Var>()?);
                } else {
                    coef = factor.parse::<Dyadic>()?;
                    has_coef = true;
                }
            }
            if !has_coef && vars.is_empty() {
                return Err(ParseError::msg(format!("bad phase term `{term}`")));
            }
            if !has_coef {
                return Err(ParseError::msg(format!("phase term `{term}` lacks a coefficient")));
            }
            p.add_term(Monomial::from_vars(vars), coef);
        }
        Ok(p)
    }
}

impl Serialize for PhasePoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhasePoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<PhasePoly, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Dyadic, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(i: u32) -> Var {
        Var::path(i)
    }
    fn x(i: u32) -> Var {
        Var::input(i)
    }
    fn mono(vs: &[Var]) -> Monomial {
        Monomial::from_vars(vs.iter().copied())
    }

    #[test]
    fn dyadic_arith() {
        assert_eq!(Dyadic::HALF.add(Dyadic::HALF), Dyadic::ZERO);
        assert_eq!(Dyadic::new(3, 2).add(Dyadic::new(1, 2)), Dyadic::ZERO);
        assert_eq!(Dyadic::new(-1, 2), Dyadic::new(3, 2));
        assert_eq!(Dyadic::new(6, 3), Dyadic::new(3, 2));
        assert_eq!(Dyadic::new(1, 2).half(), Dyadic::new(1, 3));
        assert_eq!("3/8".parse::<Dyadic>().unwrap(), Dyadic::new(3, 3));
        assert_eq!(Dyadic::new(5, 3).to_string(), "5/8");
    }

    #[test]
    fn add_phase_cancels() {
        let p = PhasePoly::term(mono(&[y(0)]), Dyadic::HALF);
        assert!(p.add(&p).is_zero());
    }

    #[test]
    fn substitute_phase_constants() {
        let p = PhasePoly::term(mono(&[y(0), x(0)]), Dyadic::HALF);
        assert_eq!(p.substitute_var(y(0), &BoolExpr::one()), PhasePoly::term(mono(&[x(0)]), Dyadic::HALF));
        assert!(p.substitute_var(y(0), &BoolExpr::zero()).is_zero());
    }

    #[test]
    fn substitute_phase_xor_lift() {
        let p = PhasePoly::term(mono(&[y(0)]), Dyadic::HALF);
        let f = BoolExpr::var(x(0)).xor(&BoolExpr::var(x(1)));
        let q = p.substitute_var(y(0), &f);
        let mut expect = PhasePoly::term(mono(&[x(0)]), Dyadic::HALF);
        expect.add_term(mono(&[x(1)]), Dyadic::HALF);
        assert_eq!(q, expect);
    }

    #[test]
    fn hh_pattern_examples() {
        let mut p = PhasePoly::term(mono(&[y(0), y(1)]), Dyadic::HALF);
        p.add_term(mono(&[y(0), x(0)]), Dyadic::HALF);
        let su: BTreeSet<Var> = [y(0), y(1)].into_iter().collect();
        let hh = p.find_hh_pattern(&su).unwrap();
        assert_eq!((hh.y0, hh.y1), (y(0), y(1)));
        assert_eq!(hh.f, BoolExpr::var(x(0)));
        assert!(hh.remainder.is_zero());

        let q = PhasePoly::term(mono(&[x(0)]), Dyadic::HALF);
        assert!(q.find_hh_pattern(&su).is_none());

        let mut r = p.clone();
        r.add_term(mono(&[y(2)]), Dyadic::new(1, 2));
        let su3: BTreeSet<Var> = [y(0), y(1), y(2)].into_iter().collect();
        let hh = r.find_hh_pattern(&su3).unwrap();
        assert_eq!(hh.remainder, PhasePoly::term(mono(&[y(2)]), Dyadic::new(1, 2)));
        let mut back = hh.remainder.clone();
        back.add_lifted(Dyadic::HALF, &BoolExpr::var(hh.y1).xor(&hh.f), &Monomial::var(hh.y0));
        assert_eq!(back, r);
    }

    #[test]
    fn linear_phase_var_split() {
        let mut p = PhasePoly::term(mono(&[y(0)]), Dyadic::new(1, 2));
        p.add_term(mono(&[x(0)]), Dyadic::HALF);
        let su: BTreeSet<Var> = [y(0)].into_iter().collect();
        let (v, p2, p1) = p.find_linear_phase_var(&su, |_| true).unwrap();
        assert_eq!(v, y(0));
        assert_eq!(p2, PhasePoly::constant(Dyadic::new(1, 2)));
        assert_eq!(p1, PhasePoly::term(mono(&[x(0)]), Dyadic::HALF));
        assert!(p.find_linear_phase_var(&su, |_| false).is_none());
    }

    #[test]
    fn classical_only_examples() {
        let present = vec![BoolExpr::var(y(1)), BoolExpr::var(y(0)).xor(&BoolExpr::var(x(0)))];
        assert!(PhasePoly::zero().classical_only(&present));
        assert!(!PhasePoly::term(mono(&[y(2)]), Dyadic::HALF).classical_only(&present));
        assert!(PhasePoly::term(mono(&[y(1)]), Dyadic::new(1, 2)).classical_only(&present));
        let mut both = PhasePoly::term(mono(&[y(0)]), Dyadic::HALF);
        both.add_term(mono(&[x(0)]), Dyadic::HALF);
        assert!(both.classical_only(&present));
        assert!(!PhasePoly::term(mono(&[y(1), x(0)]), Dyadic::HALF).classical_only(&present));
    }

    #[test]
    fn text_round_trip() {
        let p: PhasePoly = "1/2*y0*y1 + 1/4*x0".parse().unwrap();
        assert_eq!(p.to_string(), "1/4*x0 + 1/2*y0*y1");
        assert_eq!(p.to_string().parse::<PhasePoly>().unwrap(), p);
    }
}
