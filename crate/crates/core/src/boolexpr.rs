//! Boolean polynomials over GF(2) in algebraic normal form (ANF).
//!
//! Values are XORs of AND-monomials over input variables `x_i` and path
//! variables `y_j`. The representation is canonical, so two expressions denote
//! the same boolean function iff they are structurally equal.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;

/// Kind of a boolean variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Input,
    Path,
}

/// A boolean variable, printed `x<id>` (input) or `y<id>` (path).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub id: u32,
}

impl Var {
    pub const fn input(id: u32) -> Var {
        Var { kind: VarKind::Input, id }
    }

    pub const fn path(id: u32) -> Var {
        Var { kind: VarKind::Path, id }
    }

    pub fn is_path(self) -> bool {
        self.kind == VarKind::Path
    }

    pub fn is_input(self) -> bool {
        self.kind == VarKind::Input
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Input => write!(f, "x{}", self.id),
            VarKind::Path => write!(f, "y{}", self.id),
        }
    }
}

impl FromStr for Var {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Var, ParseError> {
        let s = s.trim();
        let (kind, rest) = match s.as_bytes().first() {
            Some(b'x') => (VarKind::Input, &s[1..]),
            Some(b'y') => (VarKind::Path, &s[1..]),
            _ => return Err(ParseError::msg(format!("bad variable `{s}`"))),
        };
        let id = rest
            .parse::<u32>()
            .map_err(|_| ParseError::msg(format!("bad variable `{s}`")))?;
        Ok(Var { kind, id })
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Var, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A product of distinct variables, kept sorted. The empty product is 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[Var; 4]>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(SmallVec::new())
    }

    pub fn var(v: Var) -> Monomial {
        let mut s = SmallVec::new();
        s.push(v);
        Monomial(s)
    }

    pub fn from_vars<I: IntoIterator<Item = Var>>(vars: I) -> Monomial {
        let mut s: SmallVec<[Var; 4]> = vars.into_iter().collect();
        s.sort_unstable();
        s.dedup();
        Monomial(s)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Removes `v`, returning whether it was present.
    pub fn without(&self, v: Var) -> Monomial {
        Monomial(self.0.iter().copied().filter(|&w| w != v).collect())
    }

    /// Multilinear product (x·x = x).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        if self.0.is_empty() {
            return other.clone();
        }
        if other.0.is_empty() {
            return self.clone();
        }
        let (a, b) = (&self.0, &other.0);
        let mut out: SmallVec<[Var; 4]> = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn is_subset_of(&self, other: &Monomial) -> bool {
        self.0.iter().all(|v| other.contains(*v))
    }

    pub fn eval<F: Fn(Var) -> Option<bool>>(&self, rho: &F) -> Result<bool, Var> {
        for &v in &self.0 {
            match rho(v) {
                Some(true) => {}
                Some(false) => return Ok(false),
                None => return Err(v),
            }
        }
        Ok(true)
    }

    pub fn has_path_var(&self) -> bool {
        self.0.iter().any(|v| v.is_path())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Canonical ANF: a strictly sorted list of distinct monomials.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BoolExpr {
    monos: Vec<Monomial>,
}

/// Error raised when evaluation meets an unassigned variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("variable {0} is not assigned")]
pub struct MissingVar(pub Var);

impl BoolExpr {
    pub fn zero() -> BoolExpr {
        BoolExpr { monos: Vec::new() }
    }

    pub fn one() -> BoolExpr {
        BoolExpr {
            monos: vec![Monomial::one()],
        }
    }

    pub fn constant(b: bool) -> BoolExpr {
        if b {
            Self::one()
        } else {
            Self::zero()
        }
    }

    pub fn var(v: Var) -> BoolExpr {
        BoolExpr {
            monos: vec![Monomial::var(v)],
        }
    }

    pub fn monomial(m: Monomial) -> BoolExpr {
        BoolExpr { monos: vec![m] }
    }

    /// Builds an expression from a multiset of monomials, cancelling pairs.
    pub fn from_monomials(mut ms: Vec<Monomial>) -> BoolExpr {
        ms.sort_unstable();
        let mut out: Vec<Monomial> = Vec::with_capacity(ms.len());
        for m in ms {
            if out.last() == Some(&m) {
                out.pop();
            } else {
                out.push(m);
            }
        }
        BoolExpr { monos: out }
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monos
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.monos.len() == 1 && self.monos[0].is_one()
    }

    pub fn as_const(&self) -> Option<bool> {
        if self.is_zero() {
            Some(false)
        } else if self.is_one() {
            Some(true)
        } else {
            None
        }
    }

    /// Returns `v` if the expression is exactly the variable `v`.
    pub fn as_var(&self) -> Option<Var> {
        if self.monos.len() == 1 && self.monos[0].degree() == 1 {
            Some(self.monos[0].vars()[0])
        } else {
            None
        }
    }

    pub fn degree(&self) -> usize {
        self.monos.iter().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn xor(&self, other: &BoolExpr) -> BoolExpr {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let (a, b) = (&self.monos, &other.monos);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        BoolExpr { monos: out }
    }

    pub fn and(&self, other: &BoolExpr) -> BoolExpr {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        let mut ms = Vec::with_capacity(self.monos.len() * other.monos.len());
        for a in &self.monos {
            for b in &other.monos {
                ms.push(a.mul(b));
            }
        }
        Self::from_monomials(ms)
    }

    pub fn not(&self) -> BoolExpr {
        self.xor(&Self::one())
    }

    pub fn or(&self, other: &BoolExpr) -> BoolExpr {
        self.xor(other).xor(&self.and(other))
    }

    /// `((c ⊕ 1) ∧ if_false) ⊕ (c ∧ if_true)`: `if_true` when `c = 1`.
    pub fn select(c: &BoolExpr, if_false: &BoolExpr, if_true: &BoolExpr) -> BoolExpr {
        if if_false == if_true {
            return if_false.clone();
        }
        match c.as_const() {
            Some(true) => return if_true.clone(),
            Some(false) => return if_false.clone(),
            None => {}
        }
        if_false.xor(&c.and(&if_false.xor(if_true)))
    }

    /// Simultaneous substitution.
    pub fn substitute(&self, sigma: &BTreeMap<Var, BoolExpr>) -> BoolExpr {
        if sigma.is_empty() || !self.monos.iter().any(|m| m.vars().iter().any(|v| sigma.contains_key(v))) {
            return self.clone();
        }
        let mut ms: Vec<Monomial> = Vec::new();
        for m in &self.monos {
            if !m.vars().iter().any(|v| sigma.contains_key(v)) {
                ms.push(m.clone());
                continue;
            }
            let mut kept = Monomial::one();
            let mut prod = BoolExpr::one();
            for &v in m.vars() {
                match sigma.get(&v) {
                    Some(e) => {
                        prod = prod.and(e);
                        if prod.is_zero() {
                            break;
                        }
                    }
                    None => kept = kept.mul(&Monomial::var(v)),
                }
            }
            for pm in prod.monos {
                ms.push(pm.mul(&kept));
            }
        }
        Self::from_monomials(ms)
    }

    pub fn substitute_var(&self, v: Var, e: &BoolExpr) -> BoolExpr {
        if !self.contains_var(v) {
            return self.clone();
        }
        let mut sigma = BTreeMap::new();
        sigma.insert(v, e.clone());
        self.substitute(&sigma)
    }

    /// Partial evaluation: assigned variables are replaced by constants.
    pub fn substitute_bits(&self, rho: &BTreeMap<Var, bool>) -> BoolExpr {
        if rho.is_empty() {
            return self.clone();
        }
        let mut ms = Vec::with_capacity(self.monos.len());
        'outer: for m in &self.monos {
            let mut kept: SmallVec<[Var; 4]> = SmallVec::new();
            for &v in m.vars() {
                match rho.get(&v) {
                    Some(true) => {}
                    Some(false) => continue 'outer,
                    None => kept.push(v),
                }
            }
            ms.push(Monomial(kept));
        }
        Self::from_monomials(ms)
    }

    pub fn evaluate<F: Fn(Var) -> Option<bool>>(&self, rho: F) -> Result<bool, MissingVar> {
        let mut acc = false;
        for m in &self.monos {
            acc ^= m.eval(&rho).map_err(MissingVar)?;
        }
        Ok(acc)
    }

    pub fn eval_map(&self, rho: &BTreeMap<Var, bool>) -> Result<bool, MissingVar> {
        self.evaluate(|v| rho.get(&v).copied())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        for m in &self.monos {
            s.extend(m.vars().iter().copied());
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.monos.iter().any(|m| m.contains(v))
    }

    pub fn has_path_vars(&self) -> bool {
        self.monos.iter().any(|m| m.has_path_var())
    }

    pub fn has_input_vars(&self) -> bool {
        self.monos.iter().any(|m| m.vars().iter().any(|v| v.is_input()))
    }

    /// True when `v` occurs only as the lone monomial `v`.
    pub fn is_linear_in(&self, v: Var) -> bool {
        let mut lone = false;
        for m in &self.monos {
            if m.contains(v) {
                if m.degree() == 1 {
                    lone = true;
                } else {
                    return false;
                }
            }
        }
        lone
    }

    /// Integer lift ⌈e⌉ agreeing with `e` on every boolean assignment.
    pub fn lift(&self) -> IntLift {
        let mut acc: BTreeMap<Monomial, i64> = BTreeMap::new();
        for m in &self.monos {
            // acc := acc + m - 2 acc m
            let prod: Vec<(Monomial, i64)> = acc.iter().map(|(k, c)| (k.mul(m), *c)).collect();
            *acc.entry(m.clone()).or_insert(0) += 1;
            for (k, c) in prod {
                *acc.entry(k).or_insert(0) -= 2 * c;
            }
            acc.retain(|_, c| *c != 0);
        }
        IntLift { terms: acc }
    }

    /// Lift with coefficients reduced modulo `2^bits`.
    pub fn lift_mod(&self, bits: u32) -> BTreeMap<Monomial, u128> {
        let mask: u128 = if bits >= 128 { u128::MAX } else { (1u128 << bits) - 1 };
        let mut acc: BTreeMap<Monomial, u128> = BTreeMap::new();
        for m in &self.monos {
            let prod: Vec<(Monomial, u128)> = acc.iter().map(|(k, c)| (k.mul(m), *c)).collect();
            let e = acc.entry(m.clone()).or_insert(0);
            *e = e.wrapping_add(1) & mask;
            for (k, c) in prod {
                let e = acc.entry(k).or_insert(0);
                *e = e.wrapping_sub(c.wrapping_mul(2)) & mask;
            }
            acc.retain(|_, c| *c != 0);
        }
        acc
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monos.is_empty() {
            return write!(f, "0");
        }
        let many = self.monos.len() > 1;
        for (i, m) in self.monos.iter().enumerate() {
            if i > 0 {
                write!(f, " ^ ")?;
            }
            if many && m.degree() > 1 {
                write!(f, "({m})")?;
            } else {
                write!(f, "{m}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for BoolExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<BoolExpr, ParseError> {
        let mut p = ExprParser { src: s.as_bytes(), pos: 0 };
        let e = p.xor_level()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ParseError::msg(format!("trailing input in boolean expression `{s}`")));
        }
        Ok(e)
    }
}

impl Serialize for BoolExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BoolExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<BoolExpr, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn xor_level(&mut self) -> Result<BoolExpr, ParseError> {
        let mut e = self.or_level()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            e = e.xor(&self.or_level()?);
        }
        Ok(e)
    }

    fn or_level(&mut self) -> Result<BoolExpr, ParseError> {
        let mut e = self.and_level()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            e = e.or(&self.and_level()?);
        }
        Ok(e)
    }

    fn and_level(&mut self) -> Result<BoolExpr, ParseError> {
        let mut e = self.unary()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            e = e.and(&self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<BoolExpr, ParseError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(self.unary()?.not())
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.xor_level()?;
                if self.peek() != Some(b')') {
                    return Err(ParseError::msg("expected `)` in boolean expression"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'0') => {
                self.pos += 1;
                Ok(BoolExpr::zero())
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(BoolExpr::one())
            }
            Some(b'x') | Some(b'y') => {
                let start = self.pos;
                self.pos += 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let tok = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                Ok(BoolExpr::var(tok.parse()?))
            }
            _ => Err(ParseError::msg(format!(
                "unexpected character in boolean expression at offset {}",
                self.pos
            ))),
        }
    }
}

/// Integer polynomial produced by [`BoolExpr::lift`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntLift {
    pub terms: BTreeMap<Monomial, i64>,
}

impl IntLift {
    pub fn evaluate<F: Fn(Var) -> Option<bool>>(&self, rho: F) -> Result<i64, MissingVar> {
        let mut acc = 0i64;
        for (m, c) in &self.terms {
            if m.eval(&rho).map_err(MissingVar)? {
                acc += c;
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for IntLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if *c < 0 { ("-", -c) } else { ("+", *c) };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            match (mag, m.is_one()) {
                (_, true) => write!(f, "{mag}")?,
                (1, false) => write!(f, "{}", m.vars().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("*"))?,
                _ => write!(f, "{mag}*{}", m.vars().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("*"))?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> BoolExpr {
        BoolExpr::var(Var::input(i))
    }
    fn y(i: u32) -> BoolExpr {
        BoolExpr::var(Var::path(i))
    }

    #[test]
    fn xor_and_not_basics() {
        assert!(x(0).xor(&x(0)).is_zero());
        assert!(x(0).and(&x(0).xor(&BoolExpr::one())).is_zero());
        let a = y(0).and(&y(1));
        assert_eq!(a.xor(&a).xor(&y(0)), y(0));
        assert_eq!(x(0).not().not(), x(0));
    }

    #[test]
    fn select_orientation() {
        let (b, c) = (x(1), x(2));
        assert_eq!(BoolExpr::select(&BoolExpr::one(), &b, &c), c);
        assert_eq!(BoolExpr::select(&BoolExpr::zero(), &b, &c), b);
        assert_eq!(BoolExpr::select(&y(0), &x(0), &x(0)), x(0));
    }

    #[test]
    fn substitution_examples() {
        let mut s = BTreeMap::new();
        s.insert(Var::path(0), x(0));
        assert!(y(0).xor(&x(0)).substitute(&s).is_zero());
        let mut s = BTreeMap::new();
        s.insert(Var::path(1), BoolExpr::one());
        assert_eq!(y(0).and(&y(1)).substitute(&s), y(0));
        let mut s = BTreeMap::new();
        s.insert(Var::path(1), y(0).xor(&x(0)));
        assert_eq!(y(1).substitute(&s), y(0).xor(&x(0)));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut s = BTreeMap::new();
        s.insert(Var::path(0), y(1));
        s.insert(Var::path(1), y(0));
        assert_eq!(y(0).xor(&y(1).and(&x(0))).substitute(&s), y(1).xor(&y(0).and(&x(0))));
    }

    #[test]
    fn evaluation() {
        let e = x(0).xor(&y(0));
        let rho = |v: Var| Some(v == Var::input(0) || v == Var::path(0));
        assert_eq!(e.evaluate(rho), Ok(false));
        assert_eq!(x(0).and(&y(0)).evaluate(rho), Ok(true));
        assert_eq!(BoolExpr::one().evaluate(|_| None), Ok(true));
        assert_eq!(x(3).evaluate(|_| None), Err(MissingVar(Var::input(3))));
    }

    #[test]
    fn lift_identity() {
        let l = x(0).xor(&x(1)).lift();
        assert_eq!(l.to_string(), "x0 + x1 - 2*x0*x1");
        assert_eq!(x(0).and(&x(1)).lift().to_string(), "x0*x1");
        let e = x(0).xor(&x(1)).xor(&x(2));
        let l = e.lift();
        for a in 0..8u32 {
            let rho = |v: Var| Some(a >> v.id & 1 == 1);
            assert_eq!(l.evaluate(rho).unwrap(), e.evaluate(rho).unwrap() as i64);
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        let e: BoolExpr = "x0 ^ (y1 & y2)".parse().unwrap();
        assert_eq!(e, x(0).xor(&y(1).and(&y(2))));
        assert_eq!(e.to_string(), "x0 ^ (y1 & y2)");
        let n: BoolExpr = "!x0".parse().unwrap();
        assert_eq!(n.to_string(), "1 ^ x0");
        assert_eq!("y3 | y4".parse::<BoolExpr>().unwrap(), y(3).or(&y(4)));
    }
}
