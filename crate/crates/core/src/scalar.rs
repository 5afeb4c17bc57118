//! Guarded constructible scalars.
//!
//! A [`Scalar`] is a finite sum of terms `[g]·c·Πatoms` where `g` is a boolean
//! guard, `c` an [`ExactReal`] and the atoms are factors that still depend on
//! variables (`2cos(2πφ)` with a non-constant phase polynomial) or residual
//! nodes (`1/s`, `√s`, trigonometry of non-dyadic angles).

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::boolexpr::{BoolExpr, Var};
use crate::exact::ExactReal;
use crate::interval::{self, ComplexInterval, Interval};
use crate::phase::{Dyadic, PhasePoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative scalar")]
    NegativeSqrt,
    #[error("scalar comparison inconclusive at maximum precision")]
    Inconclusive,
    #[error("scalar still depends on variables")]
    NotConstant,
}

/// Angles, in radians when evaluated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Angle {
    /// `2π·p` for a phase polynomial `p` (turns).
    Turns(PhasePoly),
    ArcCos(Box<Scalar>),
    ArcSin(Box<Scalar>),
    Scale(i64, Box<Angle>),
    Guard(BoolExpr, Box<Angle>),
    Add(Box<Angle>, Box<Angle>),
    Neg(Box<Angle>),
}

impl Angle {
    /// `2π·n/2^k`.
    pub fn dyadic_turn(n: i128, k: u32) -> Angle {
        Angle::Turns(PhasePoly::constant(Dyadic::new(n, k)))
    }

    /// Folds pure-turn subtrees into a single phase polynomial.
    pub fn simplify(&self) -> Angle {
        match self {
            Angle::Turns(_) | Angle::ArcCos(_) | Angle::ArcSin(_) => self.clone(),
            Angle::Scale(k, a) => match a.simplify() {
                Angle::Turns(p) => Angle::Turns(p.mul_int(*k as i128)),
                o => Angle::Scale(*k, Box::new(o)),
            },
            Angle::Guard(b, a) => match (b.as_const(), a.simplify()) {
                (Some(false), _) => Angle::Turns(PhasePoly::zero()),
                (Some(true), o) => o,
                (None, Angle::Turns(p)) => Angle::Turns(p.mul_bool(b)),
                (None, o) => Angle::Guard(b.clone(), Box::new(o)),
            },
            Angle::Add(a, b) => match (a.simplify(), b.simplify()) {
                (Angle::Turns(p), Angle::Turns(q)) => Angle::Turns(p.add(&q)),
                (x, y) => Angle::Add(Box::new(x), Box::new(y)),
            },
            Angle::Neg(a) => match a.simplify() {
                Angle::Turns(p) => Angle::Turns(p.neg()),
                Angle::Neg(b) => *b,
                o => Angle::Neg(Box::new(o)),
            },
        }
    }

    fn map_vars(&self, sb: &dyn Fn(&BoolExpr) -> BoolExpr, sp: &dyn Fn(&PhasePoly) -> PhasePoly, ss: &dyn Fn(&Scalar) -> Scalar) -> Angle {
        match self {
            Angle::Turns(p) => Angle::Turns(sp(p)),
            Angle::ArcCos(s) => Angle::ArcCos(Box::new(ss(s))),
            Angle::ArcSin(s) => Angle::ArcSin(Box::new(ss(s))),
            Angle::Scale(k, a) => Angle::Scale(*k, Box::new(a.map_vars(sb, sp, ss))),
            Angle::Guard(b, a) => Angle::Guard(sb(b), Box::new(a.map_vars(sb, sp, ss))),
            Angle::Add(a, b) => Angle::Add(Box::new(a.map_vars(sb, sp, ss)), Box::new(b.map_vars(sb, sp, ss))),
            Angle::Neg(a) => Angle::Neg(Box::new(a.map_vars(sb, sp, ss))),
        }
    }

    fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        match self {
            Angle::Turns(p) => p.collect_vars(s),
            Angle::ArcCos(x) | Angle::ArcSin(x) => x.collect_vars(s),
            Angle::Scale(_, a) | Angle::Neg(a) => a.collect_vars(s),
            Angle::Guard(b, a) => {
                b.collect_vars(s);
                a.collect_vars(s);
            }
            Angle::Add(a, b) => {
                a.collect_vars(s);
                b.collect_vars(s);
            }
        }
    }

    pub fn eval_f64(&self, rho: &dyn Fn(Var) -> bool) -> f64 {
        match self {
            Angle::Turns(p) => 2.0 * std::f64::consts::PI * p.evaluate(|v| Some(rho(v))).map(|d| d.to_f64()).unwrap_or(0.0),
            Angle::ArcCos(s) => s.eval_f64(rho).clamp(-1.0, 1.0).acos(),
            Angle::ArcSin(s) => s.eval_f64(rho).clamp(-1.0, 1.0).asin(),
            Angle::Scale(k, a) => *k as f64 * a.eval_f64(rho),
            Angle::Guard(b, a) => {
                if b.evaluate(|v| Some(rho(v))).unwrap_or(false) {
                    a.eval_f64(rho)
                } else {
                    0.0
                }
            }
            Angle::Add(a, b) => a.eval_f64(rho) + b.eval_f64(rho),
            Angle::Neg(a) => -a.eval_f64(rho),
        }
    }

    pub fn to_interval(&self, prec: u32) -> Result<Interval, ScalarError> {
        Ok(match self {
            Angle::Turns(p) => {
                if !p.is_constant() {
                    return Err(ScalarError::NotConstant);
                }
                interval::pi(prec).mul(&Interval::from_dyadic(p.constant_term(), prec)).mul_int(2)
            }
            Angle::ArcCos(s) => interval::acos(&s.to_interval(prec)?).ok_or(ScalarError::Inconclusive)?,
            Angle::ArcSin(s) => interval::asin(&s.to_interval(prec)?).ok_or(ScalarError::Inconclusive)?,
            Angle::Scale(k, a) => a.to_interval(prec)?.mul_int(*k),
            Angle::Guard(b, a) => match b.as_const() {
                Some(true) => a.to_interval(prec)?,
                Some(false) => Interval::zero(prec),
                None => return Err(ScalarError::NotConstant),
            },
            Angle::Add(a, b) => a.to_interval(prec)?.add(&b.to_interval(prec)?),
            Angle::Neg(a) => a.to_interval(prec)?.neg(),
        })
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Turns(p) => write!(f, "2pi*({p})"),
            Angle::ArcCos(s) => write!(f, "arccos({s})"),
            Angle::ArcSin(s) => write!(f, "arcsin({s})"),
            Angle::Scale(k, a) => write!(f, "{k}*({a})"),
            Angle::Guard(b, a) => write!(f, "[{b}]*({a})"),
            Angle::Add(a, b) => write!(f, "({a}) + ({b})"),
            Angle::Neg(a) => write!(f, "-({a})"),
        }
    }
}

/// A variable-dependent or residual factor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    /// `2cos(2πφ)` for non-constant `φ`.
    Cos(PhasePoly),
    /// `cos(a)` or `sin(a)` for an angle with arc components.
    Trig { sine: bool, angle: Angle },
    Inv(Box<Scalar>),
    Sqrt(Box<Scalar>),
}

impl Atom {
    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        match self {
            Atom::Cos(p) => p.collect_vars(s),
            Atom::Trig { angle, .. } => angle.collect_vars(s),
            Atom::Inv(x) | Atom::Sqrt(x) => x.collect_vars(s),
        }
    }

    pub fn eval_f64(&self, rho: &dyn Fn(Var) -> bool) -> f64 {
        match self {
            Atom::Cos(p) => {
                let t = p.evaluate(|v| Some(rho(v))).map(|d| d.to_f64()).unwrap_or(0.0);
                2.0 * (2.0 * std::f64::consts::PI * t).cos()
            }
            Atom::Trig { sine, angle } => {
                let a = angle.eval_f64(rho);
                if *sine {
                    a.sin()
                } else {
                    a.cos()
                }
            }
            Atom::Inv(s) => 1.0 / s.eval_f64(rho),
            Atom::Sqrt(s) => s.eval_f64(rho).max(0.0).sqrt(),
        }
    }

    fn to_interval(&self, prec: u32) -> Result<Interval, ScalarError> {
        match self {
            Atom::Cos(_) => Err(ScalarError::NotConstant),
            Atom::Trig { sine, angle } => {
                let a = angle.to_interval(prec)?;
                Ok(if *sine { interval::sin(&a) } else { interval::cos(&a) })
            }
            Atom::Inv(s) => s.to_interval(prec)?.recip().ok_or(ScalarError::Inconclusive),
            Atom::Sqrt(s) => s.to_interval(prec)?.sqrt().ok_or(ScalarError::NegativeSqrt),
        }
    }

    /// Rebuilds the atom as a scalar, folding it if it became constant.
    fn rebuild(self) -> Scalar {
        match self {
            Atom::Cos(p) => Scalar::cos2_turns(&p),
            Atom::Trig { sine: false, angle } => Scalar::cos_of(&angle),
            Atom::Trig { sine: true, angle } => Scalar::sin_of(&angle),
            Atom::Inv(s) => s.inv().unwrap_or_else(|_| Scalar::atom(Atom::Inv(s))),
            Atom::Sqrt(s) => s.sqrt().unwrap_or_else(|_| Scalar::atom(Atom::Sqrt(s))),
        }
    }

    fn map(&self, sb: &dyn Fn(&BoolExpr) -> BoolExpr, sp: &dyn Fn(&PhasePoly) -> PhasePoly, ss: &dyn Fn(&Scalar) -> Scalar) -> Atom {
        match self {
            Atom::Cos(p) => Atom::Cos(sp(p)),
            Atom::Trig { sine, angle } => Atom::Trig { sine: *sine, angle: angle.map_vars(sb, sp, ss) },
            Atom::Inv(s) => Atom::Inv(Box::new(ss(s))),
            Atom::Sqrt(s) => Atom::Sqrt(Box::new(ss(s))),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Cos(p) => write!(f, "2cos(2pi*({p}))"),
            Atom::Trig { sine: false, angle } => write!(f, "cos({angle})"),
            Atom::Trig { sine: true, angle } => write!(f, "sin({angle})"),
            Atom::Inv(s) => write!(f, "1/({s})"),
            Atom::Sqrt(s) => write!(f, "sqrt({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub guard: BoolExpr,
    pub coef: ExactReal,
    pub atoms: Vec<Atom>,
}

impl Term {
    fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        self.guard.collect_vars(s);
        for a in &self.atoms {
            a.collect_vars(s);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Scalar {
    terms: Vec<Term>,
}

/// Canonical representative of `2cos(2πφ)` up to sign.
fn cos_atom_canonical(phi: &PhasePoly) -> (bool, PhasePoly) {
    let shift = |p: &PhasePoly| -> (bool, PhasePoly) {
        let c = p.constant_term();
        if c.value_cmp(Dyadic::HALF) != Ordering::Less {
            (true, p.add(&PhasePoly::constant(Dyadic::HALF)))
        } else {
            (false, p.clone())
        }
    };
    let (na, a) = shift(phi);
    let (nb, b) = shift(&phi.neg());
    if a <= b {
        (na, a)
    } else {
        (nb, b)
    }
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar::default()
    }

    pub fn one() -> Scalar {
        Scalar::exact(ExactReal::one())
    }

    pub fn exact(c: ExactReal) -> Scalar {
        if c.is_zero() {
            return Scalar::zero();
        }
        Scalar {
            terms: vec![Term { guard: BoolExpr::one(), coef: c, atoms: Vec::new() }],
        }
    }

    pub fn rational(q: BigRational) -> Scalar {
        Scalar::exact(ExactReal::from_rational(q))
    }

    pub fn ratio(n: i64, d: i64) -> Scalar {
        Scalar::exact(ExactReal::from_ratio(n, d))
    }

    pub fn int(n: i64) -> Scalar {
        Scalar::exact(ExactReal::from_int(n))
    }

    /// `2^(m/2)`.
    pub fn half_power(m: i64) -> Scalar {
        Scalar::exact(ExactReal::half_power(m))
    }

    /// The 0/1 scalar `[b]`.
    pub fn indicator(b: &BoolExpr) -> Scalar {
        Scalar::one().guard(b)
    }

    fn atom(a: Atom) -> Scalar {
        Scalar {
            terms: vec![Term { guard: BoolExpr::one(), coef: ExactReal::one(), atoms: vec![a] }],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn from_terms(terms: Vec<Term>) -> Scalar {
        Scalar::canonical(terms)
    }

    /// Whether the scalar is syntactically zero.
    pub fn is_zero_syntactic(&self) -> bool {
        self.terms.is_empty()
    }

    fn canonical(terms: Vec<Term>) -> Scalar {
        let mut terms: Vec<Term> = terms
            .into_iter()
            .filter(|t| !t.coef.is_zero() && !t.guard.is_zero())
            .map(|mut t| {
                t.atoms.sort();
                t
            })
            .collect();
        for _ in 0..8 {
            // sum coefficients of identical (guard, atoms)
            let mut by_shape: BTreeMap<(BoolExpr, Vec<Atom>), ExactReal> = BTreeMap::new();
            for t in terms.drain(..) {
                let e = by_shape.entry((t.guard, t.atoms)).or_default();
                *e = e.add(&t.coef);
            }
            let summed: Vec<Term> = by_shape
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|((guard, atoms), coef)| Term { guard, coef, atoms })
                .collect();
            // merge disjoint guards sharing (coef, atoms)
            let mut by_value: BTreeMap<(ExactReal, Vec<Atom>), Vec<BoolExpr>> = BTreeMap::new();
            for t in &summed {
                by_value.entry((t.coef.clone(), t.atoms.clone())).or_default().push(t.guard.clone());
            }
            let mut merged_any = false;
            let mut out = Vec::with_capacity(summed.len());
            for ((coef, atoms), guards) in by_value {
                let mut groups: Vec<BoolExpr> = Vec::new();
                for g in guards {
                    match groups.iter_mut().find(|acc| acc.and(&g).is_zero()) {
                        Some(acc) => {
                            *acc = acc.xor(&g);
                            merged_any = true;
                        }
                        None => groups.push(g),
                    }
                }
                for guard in groups {
                    if !guard.is_zero() {
                        out.push(Term { guard, coef: coef.clone(), atoms: atoms.clone() });
                    }
                }
            }
            terms = out;
            if !merged_any {
                break;
            }
        }
        terms.sort();
        Scalar { terms }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        if o.terms.is_empty() {
            return self.clone();
        }
        if self.terms.is_empty() {
            return o.clone();
        }
        let mut t = self.terms.clone();
        t.extend(o.terms.iter().cloned());
        Scalar::canonical(t)
    }

    pub fn neg(&self) -> Scalar {
        Scalar {
            terms: self
                .terms
                .iter()
                .map(|t| Term { guard: t.guard.clone(), coef: t.coef.neg(), atoms: t.atoms.clone() })
                .collect(),
        }
    }

    pub fn sub(&self, o: &Scalar) -> Scalar {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &ExactReal) -> Scalar {
        if c.is_zero() {
            return Scalar::zero();
        }
        Scalar::canonical(
            self.terms
                .iter()
                .map(|t| Term { guard: t.guard.clone(), coef: t.coef.mul(c), atoms: t.atoms.clone() })
                .collect(),
        )
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        if let Some(c) = o.as_exact() {
            return self.scale(&c);
        }
        if let Some(c) = self.as_exact() {
            return o.scale(&c);
        }
        let mut out = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                let guard = a.guard.and(&b.guard);
                if guard.is_zero() {
                    continue;
                }
                let mut atoms = a.atoms.clone();
                atoms.extend(b.atoms.iter().cloned());
                out.push(Term { guard, coef: a.coef.mul(&b.coef), atoms });
            }
        }
        Scalar::canonical(out)
    }

    /// `[b]·self`.
    pub fn guard(&self, b: &BoolExpr) -> Scalar {
        if b.is_one() {
            return self.clone();
        }
        Scalar::canonical(
            self.terms
                .iter()
                .map(|t| Term { guard: t.guard.and(b), coef: t.coef.clone(), atoms: t.atoms.clone() })
                .collect(),
        )
    }

    /// The value as an exact constant when there are no guards or atoms.
    pub fn as_exact(&self) -> Option<ExactReal> {
        match self.terms.as_slice() {
            [] => Some(ExactReal::zero()),
            [t] if t.guard.is_one() && t.atoms.is_empty() => Some(t.coef.clone()),
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_exact().is_some_and(|c| c.is_one())
    }

    /// `2cos(2πφ)`.
    pub fn cos2_turns(phi: &PhasePoly) -> Scalar {
        if phi.is_constant() {
            return Scalar::exact(ExactReal::cos2_turns(phi.constant_term()));
        }
        let (neg, p) = cos_atom_canonical(phi);
        let s = Scalar::atom(Atom::Cos(p));
        if neg {
            s.neg()
        } else {
            s
        }
    }

    pub fn cos_of(angle: &Angle) -> Scalar {
        match angle.simplify() {
            Angle::Turns(p) => Scalar::cos2_turns(&p).scale(&ExactReal::from_ratio(1, 2)),
            Angle::ArcCos(s) => *s,
            Angle::ArcSin(s) => Scalar::one().sub(&s.mul(&s)).sqrt().unwrap_or_else(|_| {
                Scalar::atom(Atom::Trig { sine: false, angle: Angle::ArcSin(s) })
            }),
            Angle::Neg(a) => Scalar::cos_of(&a),
            other => Scalar::atom(Atom::Trig { sine: false, angle: other }),
        }
    }

    pub fn sin_of(angle: &Angle) -> Scalar {
        match angle.simplify() {
            Angle::Turns(p) => Scalar::cos_of(&Angle::Turns(p.sub(&PhasePoly::constant(Dyadic::new(1, 2))))),
            Angle::ArcSin(s) => *s,
            Angle::ArcCos(s) => Scalar::one().sub(&s.mul(&s)).sqrt().unwrap_or_else(|_| {
                Scalar::atom(Atom::Trig { sine: true, angle: Angle::ArcCos(s) })
            }),
            Angle::Neg(a) => Scalar::sin_of(&a).neg(),
            other => Scalar::atom(Atom::Trig { sine: true, angle: other }),
        }
    }

    pub fn inv(&self) -> Result<Scalar, ScalarError> {
        if self.terms.is_empty() {
            return Err(ScalarError::DivisionByZero);
        }
        if let Some(c) = self.as_exact() {
            if let Some(i) = c.inv() {
                return Ok(Scalar::exact(i));
            }
        }
        if !self.vars().is_empty() {
            return Err(ScalarError::Inconclusive);
        }
        if self.is_zero()? {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(Scalar::atom(Atom::Inv(Box::new(self.clone()))))
    }

    pub fn sqrt(&self) -> Result<Scalar, ScalarError> {
        if self.terms.is_empty() {
            return Ok(Scalar::zero());
        }
        if let Some(c) = self.as_exact() {
            if let Some(q) = c.as_rational() {
                if q.is_negative() {
                    return Err(ScalarError::NegativeSqrt);
                }
                if let Some(r) = ExactReal::sqrt_rational(&q) {
                    return Ok(Scalar::exact(r));
                }
            }
        }
        if !self.vars().is_empty() {
            return Err(ScalarError::Inconclusive);
        }
        match self.signum()? {
            Ordering::Less => Err(ScalarError::NegativeSqrt),
            Ordering::Equal => Ok(Scalar::zero()),
            Ordering::Greater => Ok(Scalar::atom(Atom::Sqrt(Box::new(self.clone())))),
        }
    }

    fn map_terms(&self, sb: &dyn Fn(&BoolExpr) -> BoolExpr, sp: &dyn Fn(&PhasePoly) -> PhasePoly, ss: &dyn Fn(&Scalar) -> Scalar) -> Scalar {
        let mut acc = Scalar::zero();
        let mut plain = Vec::new();
        for t in &self.terms {
            let guard = sb(&t.guard);
            if guard.is_zero() {
                continue;
            }
            if t.atoms.is_empty() {
                plain.push(Term { guard, coef: t.coef.clone(), atoms: Vec::new() });
                continue;
            }
            let mut s = Scalar::exact(t.coef.clone()).guard(&guard);
            for a in &t.atoms {
                s = s.mul(&a.map(sb, sp, ss).rebuild());
            }
            acc = acc.add(&s);
        }
        acc.add(&Scalar::canonical(plain))
    }

    /// Simultaneous substitution of boolean expressions for variables.
    pub fn substitute(&self, sigma: &BTreeMap<Var, BoolExpr>) -> Scalar {
        if sigma.is_empty() || !sigma.keys().any(|v| self.contains_var(*v)) {
            return self.clone();
        }
        self.map_terms(&|b| b.substitute(sigma), &|p| p.substitute(sigma), &|s| s.substitute(sigma))
    }

    pub fn substitute_var(&self, v: Var, e: &BoolExpr) -> Scalar {
        let mut s = BTreeMap::new();
        s.insert(v, e.clone());
        self.substitute(&s)
    }

    pub fn substitute_bits(&self, rho: &BTreeMap<Var, bool>) -> Scalar {
        if rho.is_empty() {
            return self.clone();
        }
        self.map_terms(&|b| b.substitute_bits(rho), &|p| p.substitute_bits(rho), &|s| s.substitute_bits(rho))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        for t in &self.terms {
            t.collect_vars(s);
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s.contains(&v)
    }

    pub fn eval_f64(&self, rho: &dyn Fn(Var) -> bool) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            if !t.guard.evaluate(|v| Some(rho(v))).unwrap_or(false) {
                continue;
            }
            let mut x = t.coef.to_f64();
            for a in &t.atoms {
                x *= a.eval_f64(rho);
            }
            acc += x;
        }
        acc
    }

    /// Enclosure of a variable-free scalar.
    pub fn to_interval(&self, prec: u32) -> Result<Interval, ScalarError> {
        let mut acc = Interval::zero(prec);
        for t in &self.terms {
            match t.guard.as_const() {
                Some(true) => {}
                Some(false) => continue,
                None => return Err(ScalarError::NotConstant),
            }
            let mut x = t.coef.to_interval(prec);
            for a in &t.atoms {
                x = x.mul(&a.to_interval(prec)?);
            }
            acc = acc.add(&x);
        }
        Ok(acc)
    }

    /// Enclosure of `self·e^{2πi·phase}`.
    pub fn to_complex_interval(&self, phase: Dyadic, prec: u32) -> Result<ComplexInterval, ScalarError> {
        let r = self.to_interval(prec)?;
        Ok(ComplexInterval::expi_turns(phase, prec).scale(&r))
    }

    /// Sign of a variable-free scalar.
    pub fn signum(&self) -> Result<Ordering, ScalarError> {
        if let Some(c) = self.as_exact() {
            return c.signum().map_err(|_| ScalarError::Inconclusive);
        }
        if !self.vars().is_empty() {
            return Err(ScalarError::NotConstant);
        }
        for prec in [64u32, 128, 256] {
            let i = self.to_interval(prec)?;
            if i.is_positive() {
                return Ok(Ordering::Greater);
            }
            if i.is_negative() {
                return Ok(Ordering::Less);
            }
        }
        Err(ScalarError::Inconclusive)
    }

    /// Zero test for guard-free scalars: exact when the canonical form is a
    /// pure constant, otherwise by interval refinement.
    pub fn is_zero(&self) -> Result<bool, ScalarError> {
        if self.terms.is_empty() {
            return Ok(true);
        }
        if let Some(c) = self.as_exact() {
            return Ok(c.is_zero());
        }
        if !self.vars().is_empty() {
            return Err(ScalarError::NotConstant);
        }
        for prec in [64u32, 128, 256] {
            if !self.to_interval(prec)?.contains_zero() {
                return Ok(false);
            }
        }
        Err(ScalarError::Inconclusive)
    }

    pub fn equals(&self, o: &Scalar) -> Result<bool, ScalarError> {
        if self == o {
            return Ok(true);
        }
        self.sub(o).is_zero()
    }

    /// Number of monomials in guards and atom phases, a size measure.
    pub fn size(&self) -> usize {
        self.terms
            .iter()
            .map(|t| {
                t.guard.len()
                    + t.atoms
                        .iter()
                        .map(|a| match a {
                            Atom::Cos(p) => p.len(),
                            _ => 1,
                        })
                        .sum::<usize>()
            })
            .sum()
    }

    /// Rational value, if the scalar is a plain rational constant.
    pub fn as_rational(&self) -> Option<BigRational> {
        self.as_exact()?.as_rational()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if !t.guard.is_one() {
                parts.push(format!("[{}]", t.guard));
            }
            let c = t.coef.to_string();
            if !(t.coef.is_one() && (!t.atoms.is_empty() || !parts.is_empty())) {
                if t.coef.terms().len() > 1 {
                    parts.push(format!("({c})"));
                } else {
                    parts.push(c);
                }
            }
            for a in &t.atoms {
                parts.push(a.to_string());
            }
            write!(f, "{}", parts.join(" * "))?;
        }
        Ok(())
    }
}

impl From<ExactReal> for Scalar {
    fn from(c: ExactReal) -> Scalar {
        Scalar::exact(c)
    }
}

/// `1/√2`.
pub fn inv_sqrt2() -> Scalar {
    Scalar::half_power(-1)
}

/// Sum of rationals as a scalar; convenience for tests and weights.
pub fn rational_sum(qs: &[BigRational]) -> Scalar {
    let mut s = BigRational::zero();
    for q in qs {
        s += q;
    }
    Scalar::rational(s)
}

impl Scalar {
    /// Whether the value is `1` exactly.
    pub fn is_exact_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(i: u32) -> BoolExpr {
        BoolExpr::var(Var::path(i))
    }

    #[test]
    fn half_power_bookkeeping() {
        assert_eq!(inv_sqrt2().mul(&inv_sqrt2()), Scalar::ratio(1, 2));
    }

    #[test]
    fn cosine_zero_absorbs() {
        let c = Scalar::cos_of(&Angle::dyadic_turn(1, 2));
        assert!(c.is_zero().unwrap());
        let s = Scalar::int(3);
        assert!(Scalar::cos2_turns(&PhasePoly::constant(Dyadic::new(1, 2))).mul(&s).is_zero_syntactic());
    }

    #[test]
    fn cos_quarter_pi_identity() {
        let c = Scalar::cos2_turns(&PhasePoly::constant(Dyadic::new(1, 3)));
        assert_eq!(c.scale(&ExactReal::from_ratio(1, 2)), inv_sqrt2());
        assert!(c.mul(&c).equals(&Scalar::int(2)).unwrap());
        let i = c.scale(&ExactReal::from_ratio(1, 2)).to_interval(128).unwrap();
        assert!(i.width_f64() < 1e-30);
    }

    #[test]
    fn guard_laws() {
        let s = Scalar::ratio(1, 2);
        assert_eq!(s.guard(&BoolExpr::one()), s);
        assert_eq!(s.guard(&y(0)).guard(&y(0)), s.guard(&y(0)));
        let mut rho = BTreeMap::new();
        rho.insert(Var::path(0), false);
        assert!(s.guard(&y(0)).substitute_bits(&rho).is_zero_syntactic());
        rho.insert(Var::path(0), true);
        assert_eq!(s.guard(&y(0)).substitute_bits(&rho), s);
        let mut r1 = BTreeMap::new();
        r1.insert(Var::path(0), true);
        assert_eq!(s.guard(&y(0).and(&y(1))).substitute_bits(&r1), s.guard(&y(1)));
    }

    #[test]
    fn disjoint_guards_merge() {
        let s = Scalar::ratio(1, 3);
        let sum = s.guard(&y(0)).add(&s.guard(&y(0).not()));
        assert_eq!(sum, s);
    }

    #[test]
    fn symbolic_cos_atom() {
        let phi = PhasePoly::term(crate::boolexpr::Monomial::var(Var::path(1)), Dyadic::new(1, 3));
        let c = Scalar::cos2_turns(&phi);
        assert_eq!(c.vars().len(), 1);
        let mut rho = BTreeMap::new();
        rho.insert(Var::path(1), true);
        assert_eq!(c.substitute_bits(&rho), Scalar::half_power(1));
        rho.insert(Var::path(1), false);
        assert_eq!(c.substitute_bits(&rho), Scalar::int(2));
        let neg = Scalar::cos2_turns(&phi.neg());
        assert_eq!(neg, c);
    }

    #[test]
    fn complex_enclosures() {
        let z = Scalar::one().to_complex_interval(Dyadic::HALF, 80).unwrap();
        assert!((z.re.mid_f64() + 1.0).abs() < 1e-15 && z.im.mid_f64().abs() < 1e-15);
        let w = Scalar::ratio(1, 2).to_complex_interval(Dyadic::new(1, 2), 80).unwrap();
        assert!(w.re.mid_f64().abs() < 1e-15 && (w.im.mid_f64() - 0.5).abs() < 1e-15);
        let v = inv_sqrt2().to_complex_interval(Dyadic::ZERO, 80).unwrap();
        assert!((v.re.mid_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn arc_angles() {
        let s = Scalar::ratio(1, 3);
        assert_eq!(Scalar::cos_of(&Angle::ArcCos(Box::new(s.clone()))), s);
        let sin = Scalar::sin_of(&Angle::ArcCos(Box::new(Scalar::ratio(3, 5))));
        assert_eq!(sin, Scalar::ratio(4, 5));
        let mixed = Angle::Add(Box::new(Angle::ArcCos(Box::new(s))), Box::new(Angle::dyadic_turn(1, 3)));
        let c = Scalar::cos_of(&mixed);
        let expect = ((1.0f64 / 3.0).acos() + std::f64::consts::FRAC_PI_4).cos();
        let i = c.to_interval(96).unwrap();
        assert!((i.mid_f64() - expect).abs() < 1e-14 && i.width_f64() < 1e-12);
    }

    #[test]
    fn inverse_and_sqrt() {
        assert_eq!(Scalar::ratio(2, 3).inv().unwrap(), Scalar::ratio(3, 2));
        assert_eq!(Scalar::zero().inv(), Err(ScalarError::DivisionByZero));
        assert_eq!(Scalar::int(-1).sqrt(), Err(ScalarError::NegativeSqrt));
        assert_eq!(Scalar::ratio(1, 2).sqrt().unwrap(), inv_sqrt2());
    }
}
