//! Bitmask evaluators for fast enumeration over assignments.

use std::collections::{BTreeMap, BTreeSet};

use crate::boolexpr::{BoolExpr, Monomial, Var};
use crate::phase::{Dyadic, PhasePoly};
use crate::scalar::{Atom, Scalar};

/// Variable → bit position.
#[derive(Clone, Debug, Default)]
pub struct VarIndex {
    pos: BTreeMap<Var, u32>,
    vars: Vec<Var>,
}

impl VarIndex {
    pub fn new(vars: impl IntoIterator<Item = Var>) -> Option<VarIndex> {
        let mut ix = VarIndex::default();
        for v in vars {
            if ix.pos.contains_key(&v) {
                continue;
            }
            if ix.vars.len() >= 64 {
                return None;
            }
            ix.pos.insert(v, ix.vars.len() as u32);
            ix.vars.push(v);
        }
        Some(ix)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn position(&self, v: Var) -> Option<u32> {
        self.pos.get(&v).copied()
    }

    fn mask(&self, m: &Monomial) -> u64 {
        m.vars().iter().fold(0u64, |acc, v| acc | (1u64 << self.pos[v]))
    }

    pub fn lookup(&self, bits: u64) -> impl Fn(Var) -> bool + '_ {
        move |v| self.pos.get(&v).is_some_and(|p| bits >> p & 1 == 1)
    }
}

#[derive(Clone, Debug)]
pub struct CBool {
    monos: Vec<u64>,
}

impl CBool {
    pub fn new(e: &BoolExpr, ix: &VarIndex) -> CBool {
        CBool { monos: e.monomials().iter().map(|m| ix.mask(m)).collect() }
    }

    #[inline]
    pub fn eval(&self, bits: u64) -> bool {
        let mut r = false;
        for &m in &self.monos {
            r ^= bits & m == m;
        }
        r
    }
}

/// Phase polynomial with coefficients over a common denominator `2^exp`.
#[derive(Clone, Debug)]
pub struct CPhase {
    terms: Vec<(u64, u128)>,
    exp: u32,
}

impl CPhase {
    pub fn new(p: &PhasePoly, ix: &VarIndex) -> CPhase {
        let exp = p.terms().values().map(|d| d.exponent()).max().unwrap_or(0);
        let terms = p
            .terms()
            .iter()
            .map(|(m, d)| (ix.mask(m), d.numerator() << (exp - d.exponent())))
            .collect();
        CPhase { terms, exp }
    }

    #[inline]
    pub fn eval(&self, bits: u64) -> Dyadic {
        let mut acc: u128 = 0;
        for &(m, c) in &self.terms {
            if bits & m == m {
                acc = acc.wrapping_add(c);
            }
        }
        Dyadic::new((acc & mask_bits(self.exp)) as i128, self.exp)
    }

    /// Value in turns in `[0, 1)`.
    #[inline]
    pub fn eval_f64(&self, bits: u64) -> f64 {
        self.eval(bits).to_f64()
    }
}

fn mask_bits(exp: u32) -> u128 {
    if exp >= 128 {
        u128::MAX
    } else {
        (1u128 << exp) - 1
    }
}

enum CAtom {
    Const(f64),
    Cos(CPhase),
    Other(Atom),
}

/// Scalar evaluator; constant scalars are folded once.
pub struct CScalar {
    constant: Option<f64>,
    terms: Vec<(CBool, f64, Vec<CAtom>)>,
}

impl CScalar {
    pub fn new(s: &Scalar, ix: &VarIndex) -> CScalar {
        if let Some(c) = s.as_exact() {
            return CScalar { constant: Some(c.to_f64()), terms: Vec::new() };
        }
        let terms = s
            .terms()
            .iter()
            .map(|t| {
                let atoms = t
                    .atoms
                    .iter()
                    .map(|a| match a {
                        Atom::Cos(p) => CAtom::Cos(CPhase::new(p, ix)),
                        o => {
                            let mut vs = BTreeSet::new();
                            o.collect_vars(&mut vs);
                            if vs.is_empty() {
                                CAtom::Const(o.eval_f64(&|_| false))
                            } else {
                                CAtom::Other(o.clone())
                            }
                        }
                    })
                    .collect();
                (CBool::new(&t.guard, ix), t.coef.to_f64(), atoms)
            })
            .collect();
        CScalar { constant: None, terms }
    }

    pub fn eval(&self, bits: u64, ix: &VarIndex) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        let mut acc = 0.0;
        for (g, c, atoms) in &self.terms {
            if !g.eval(bits) {
                continue;
            }
            let mut x = *c;
            for a in atoms {
                x *= match a {
                    CAtom::Cos(p) => 2.0 * (std::f64::consts::TAU * p.eval_f64(bits)).cos(),
                    CAtom::Const(c) => *c,
                    CAtom::Other(o) => o.eval_f64(&ix.lookup(bits)),
                };
            }
            acc += x;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compiled_matches_direct() {
        let e: BoolExpr = "x0 ^ (y1 & y2) ^ 1".parse().unwrap();
        let p: PhasePoly = "1/4*x0 + 3/8*y1*y2 + 1/2".parse().unwrap();
        let ix = VarIndex::new(e.vars().into_iter().chain(p.vars())).unwrap();
        let ce = CBool::new(&e, &ix);
        let cp = CPhase::new(&p, &ix);
        for bits in 0..8u64 {
            let f = ix.lookup(bits);
            assert_eq!(ce.eval(bits), e.evaluate(|v| Some(f(v))).unwrap());
            assert_eq!(cp.eval(bits), p.evaluate(|v| Some(f(v))).unwrap());
        }
    }
}
