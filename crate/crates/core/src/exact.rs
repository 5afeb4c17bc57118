//! Exact real numbers of the form `Σ q·√d·c(t)`.
//!
//! `q` is rational, `d` an odd squarefree integer and `c(t) = 2cos(2πt)` for a
//! dyadic `t ∈ (0, 1/4)`, with `c(0) = 1`. These elements form a basis of the
//! compositum of a real 2-power cyclotomic field with a multiquadratic field,
//! so the representation is canonical and zero-testing is exact. `√2` is
//! `c(1/8)`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::interval::{cos_turns, Interval};
use crate::phase::Dyadic;

/// Basis element `√d·c(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Basis {
    pub d: u64,
    pub t: Dyadic,
}

impl Basis {
    pub const ONE: Basis = Basis { d: 1, t: Dyadic::ZERO };
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactReal {
    terms: BTreeMap<Basis, BigRational>,
}

/// Returned when a sign cannot be separated from zero at the precision cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("sign undecided at maximum precision")]
pub struct Undecided;

fn quarter() -> Dyadic {
    Dyadic::new(1, 2)
}

/// Canonical form of `2cos(2πt)`: `(sign, coefficient 1 or 2, key)`, or `None` for zero.
fn cos2_canonical(t: Dyadic) -> Option<(i32, i64, Dyadic)> {
    let mut u = t;
    let half = Dyadic::HALF;
    if u.value_cmp(half) == Ordering::Greater {
        u = u.neg();
    }
    let mut sign = 1;
    if u.value_cmp(quarter()) == Ordering::Greater {
        sign = -1;
        u = half.sub(u);
    }
    if u == quarter() {
        return None;
    }
    if u.is_zero() {
        return Some((sign, 2, Dyadic::ZERO));
    }
    Some((sign, 1, u))
}

/// Splits `n = s²·r` with `r` squarefree; `None` if factoring is out of reach.
pub fn squarefree_split(n: &BigUint) -> Option<(BigUint, BigUint)> {
    if n.is_zero() {
        return Some((BigUint::zero(), BigUint::one()));
    }
    let mut rest = n.clone();
    let mut s = BigUint::one();
    let mut r = BigUint::one();
    let limit: u64 = match n.to_u64() {
        Some(v) => (v as f64).cbrt() as u64 + 2,
        None => 1_000_000,
    };
    let mut p: u64 = 2;
    while p <= limit {
        let pb = BigUint::from(p);
        if (&rest % &pb).is_zero() {
            let mut e = 0;
            while (&rest % &pb).is_zero() {
                rest /= &pb;
                e += 1;
            }
            for _ in 0..e / 2 {
                s *= &pb;
            }
            if e % 2 == 1 {
                r *= &pb;
            }
        }
        if rest.is_one() {
            break;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest.is_one() {
        return Some((s, r));
    }
    let root = rest.sqrt();
    if &root * &root == rest {
        return Some((s * root, r));
    }
    // leftover has no prime factor ≤ limit: it is squarefree when below limit³
    let cube = BigUint::from(limit) * BigUint::from(limit) * BigUint::from(limit);
    if rest < cube {
        Some((s, r * rest))
    } else {
        None
    }
}

impl ExactReal {
    pub fn zero() -> ExactReal {
        ExactReal::default()
    }

    pub fn one() -> ExactReal {
        ExactReal::from_rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> ExactReal {
        ExactReal::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_ratio(n: i64, d: i64) -> ExactReal {
        ExactReal::from_rational(BigRational::new(n.into(), d.into()))
    }

    pub fn from_rational(q: BigRational) -> ExactReal {
        let mut r = ExactReal::zero();
        r.add_term(Basis::ONE, q);
        r
    }

    pub fn basis(b: Basis, q: BigRational) -> ExactReal {
        let mut r = ExactReal::zero();
        r.add_term(b, q);
        r
    }

    pub fn terms(&self) -> &BTreeMap<Basis, BigRational> {
        &self.terms
    }

    fn add_term(&mut self, b: Basis, q: BigRational) {
        if q.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(b) {
            Entry::Vacant(v) => {
                v.insert(q);
            }
            Entry::Occupied(mut o) => {
                let s = o.get() + q;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// `2cos(2πt)`.
    pub fn cos2_turns(t: Dyadic) -> ExactReal {
        match cos2_canonical(t) {
            None => ExactReal::zero(),
            Some((sign, k, key)) => ExactReal::basis(
                Basis { d: 1, t: key },
                BigRational::from_integer((sign as i64 * k).into()),
            ),
        }
    }

    /// `2^(m/2)`.
    pub fn half_power(m: i64) -> ExactReal {
        let e = m.div_euclid(2);
        let q = if e >= 0 {
            BigRational::from_integer(BigInt::one() << e as usize)
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
        };
        if m.rem_euclid(2) == 0 {
            ExactReal::from_rational(q)
        } else {
            ExactReal::basis(Basis { d: 1, t: Dyadic::new(1, 3) }, q)
        }
    }

    /// `√q` for a non-negative rational; `None` if negative or not factorable.
    pub fn sqrt_rational(q: &BigRational) -> Option<ExactReal> {
        if q.is_negative() {
            return None;
        }
        if q.is_zero() {
            return Some(ExactReal::zero());
        }
        let prod = (q.numer() * q.denom()).to_biguint()?;
        let (s, r) = squarefree_split(&prod)?;
        let coef = BigRational::new(BigInt::from(s), q.denom().clone());
        let (two, odd) = if (&r % 2u32).is_zero() { (true, &r / 2u32) } else { (false, r) };
        let d = odd.to_u64()?;
        let t = if two { Dyadic::new(1, 3) } else { Dyadic::ZERO };
        Some(ExactReal::basis(Basis { d, t }, coef))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Basis::ONE).cloned(),
            _ => None,
        }
    }

    pub fn add(&self, o: &ExactReal) -> ExactReal {
        let mut r = self.clone();
        for (b, q) in &o.terms {
            r.add_term(*b, q.clone());
        }
        r
    }

    pub fn neg(&self) -> ExactReal {
        ExactReal {
            terms: self.terms.iter().map(|(b, q)| (*b, -q)).collect(),
        }
    }

    pub fn sub(&self, o: &ExactReal) -> ExactReal {
        self.add(&o.neg())
    }

    pub fn scale(&self, q: &BigRational) -> ExactReal {
        if q.is_zero() {
            return ExactReal::zero();
        }
        ExactReal {
            terms: self.terms.iter().map(|(b, c)| (*b, c * q)).collect(),
        }
    }

    fn mul_basis(a: Basis, b: Basis) -> ExactReal {
        let g = num_integer::gcd(a.d, b.d);
        let d = (a.d / g) * (b.d / g);
        let q = BigRational::from_integer(BigInt::from(g));
        let mut r = ExactReal::zero();
        let cosines = if a.t.is_zero() {
            ExactReal::basis(Basis { d: 1, t: b.t }, BigRational::one())
        } else if b.t.is_zero() {
            ExactReal::basis(Basis { d: 1, t: a.t }, BigRational::one())
        } else {
            ExactReal::cos2_turns(a.t.add(b.t)).add(&ExactReal::cos2_turns(a.t.sub(b.t)))
        };
        for (cb, cq) in cosines.terms {
            r.add_term(Basis { d, t: cb.t }, cq * &q);
        }
        r
    }

    pub fn mul(&self, o: &ExactReal) -> ExactReal {
        if let Some(q) = self.as_rational() {
            return o.scale(&q);
        }
        if let Some(q) = o.as_rational() {
            return self.scale(&q);
        }
        let mut r = ExactReal::zero();
        for (ba, qa) in &self.terms {
            for (bb, qb) in &o.terms {
                let qq = qa * qb;
                for (b, c) in ExactReal::mul_basis(*ba, *bb).terms {
                    r.add_term(b, c * &qq);
                }
            }
        }
        r
    }

    pub fn square(&self) -> ExactReal {
        self.mul(self)
    }

    /// Exact inverse for single-term values without a cosine factor.
    pub fn inv(&self) -> Option<ExactReal> {
        if self.terms.len() != 1 {
            return None;
        }
        let (b, q) = self.terms.iter().next()?;
        if !b.t.is_zero() && b.t != Dyadic::new(1, 3) {
            return None;
        }
        // 1/(q√d) = √d/(q d); 1/(q√(2d)) = √(2d)/(2 q d)
        let scale = if b.t.is_zero() { b.d as i64 } else { 2 * b.d as i64 };
        Some(ExactReal::basis(*b, q.recip() / BigRational::from_integer(scale.into())))
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(b, q)| {
                let c = if b.t.is_zero() {
                    1.0
                } else {
                    2.0 * (2.0 * std::f64::consts::PI * b.t.to_f64()).cos()
                };
                q.to_f64().unwrap_or(f64::NAN) * (b.d as f64).sqrt() * c
            })
            .sum()
    }

    pub fn to_interval(&self, prec: u32) -> Interval {
        let wp = prec + 8;
        let mut acc = Interval::zero(wp);
        for (b, q) in &self.terms {
            let mut v = Interval::from_rational(q, wp);
            if b.d != 1 {
                v = v.mul(&Interval::from_int(b.d as i64, wp).sqrt().unwrap_or_else(|| Interval::zero(wp)));
            }
            if !b.t.is_zero() {
                v = v.mul(&cos_turns(b.t, wp).mul_int(2));
            }
            acc = acc.add(&v);
        }
        acc
    }

    /// Exact sign, refined until the enclosure excludes zero.
    pub fn signum(&self) -> Result<Ordering, Undecided> {
        if self.is_zero() {
            return Ok(Ordering::Equal);
        }
        if let Some(q) = self.as_rational() {
            return Ok(q.cmp(&BigRational::zero()));
        }
        let mut prec = 64;
        while prec <= 4096 {
            let i = self.to_interval(prec);
            if i.is_positive() {
                return Ok(Ordering::Greater);
            }
            if i.is_negative() {
                return Ok(Ordering::Less);
            }
            prec *= 2;
        }
        Err(Undecided)
    }

    pub fn cmp_exact(&self, o: &ExactReal) -> Result<Ordering, Undecided> {
        self.sub(o).signum()
    }
}

impl Dyadic {
    /// Comparison by numeric value.
    pub fn value_cmp(self, o: Dyadic) -> Ordering {
        let e = self.exponent().max(o.exponent());
        (self.numerator() << (e - self.exponent())).cmp(&(o.numerator() << (e - o.exponent())))
    }
}

fn fmt_basis(f: &mut fmt::Formatter<'_>, b: &Basis) -> fmt::Result {
    if b.d != 1 {
        write!(f, " * sqrt({})", b.d)?;
    }
    if b.t == Dyadic::new(1, 3) {
        write!(f, " * sqrt(2)")?;
    } else if !b.t.is_zero() {
        write!(f, " * 2cos(pi*{})", b.t.add(b.t))?;
    }
    Ok(())
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (b, q)) in self.terms.iter().enumerate() {
            if i == 0 {
                write!(f, "{q}")?;
            } else if q.is_negative() {
                write!(f, " - {}", -q)?;
            } else {
                write!(f, " + {q}")?;
            }
            fmt_basis(f, b)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    q: String,
    d: u64,
    t: Dyadic,
}

impl Serialize for ExactReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(b, q)| TermJson { q: q.to_string(), d: b.d, t: b.t })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<ExactReal, D::Error> {
        let v = Vec::<TermJson>::deserialize(d)?;
        let mut r = ExactReal::zero();
        for t in v {
            let q: BigRational = t.q.parse().map_err(serde::de::Error::custom)?;
            r = r.add(&ExactReal::basis(Basis { d: t.d, t: t.t }, q));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn half_powers() {
        let h = ExactReal::half_power(-1);
        assert_eq!(h.mul(&h), ExactReal::from_ratio(1, 2));
        assert_eq!(ExactReal::half_power(2), ExactReal::from_int(2));
    }

    #[test]
    fn cosine_table() {
        assert_eq!(ExactReal::cos2_turns(Dyadic::new(1, 2)), ExactReal::zero());
        assert_eq!(ExactReal::cos2_turns(Dyadic::HALF), ExactReal::from_int(-2));
        assert_eq!(ExactReal::cos2_turns(Dyadic::ZERO), ExactReal::from_int(2));
        assert_eq!(ExactReal::cos2_turns(Dyadic::new(1, 3)), ExactReal::sqrt_rational(&q(2, 1)).unwrap());
        assert_eq!(ExactReal::cos2_turns(Dyadic::new(5, 3)), ExactReal::sqrt_rational(&q(2, 1)).unwrap().neg());
        let c = ExactReal::cos2_turns(Dyadic::new(1, 3));
        assert_eq!(c.mul(&c), ExactReal::from_int(2));
    }

    #[test]
    fn double_angle_identity() {
        // (2cos(π/8))² = 2 + √2
        let c = ExactReal::cos2_turns(Dyadic::new(1, 4));
        let rhs = ExactReal::from_int(2).add(&ExactReal::sqrt_rational(&q(2, 1)).unwrap());
        assert_eq!(c.square(), rhs);
    }

    #[test]
    fn radicals() {
        let r = ExactReal::sqrt_rational(&q(729, 1000)).unwrap();
        assert!((r.to_f64() - 0.729f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.square(), ExactReal::from_ratio(729, 1000));
        let s3 = ExactReal::sqrt_rational(&q(3, 1)).unwrap();
        let s6 = ExactReal::sqrt_rational(&q(6, 1)).unwrap();
        let s2 = ExactReal::sqrt_rational(&q(2, 1)).unwrap();
        assert_eq!(s3.mul(&s2), s6);
        assert_eq!(s6.mul(&s6), ExactReal::from_int(6));
        assert_eq!(s6.inv().unwrap().mul(&s6), ExactReal::one());
    }

    #[test]
    fn signs() {
        let c = ExactReal::cos2_turns(Dyadic::new(1, 4));
        assert_eq!(c.signum(), Ok(Ordering::Greater));
        let d = c.sub(&ExactReal::from_ratio(18477, 10000));
        assert_eq!(d.signum(), Ok(Ordering::Greater));
        assert_eq!(ExactReal::cos2_turns(Dyadic::new(3, 4)).signum(), Ok(Ordering::Greater));
        assert_eq!(ExactReal::cos2_turns(Dyadic::new(5, 4)).signum(), Ok(Ordering::Less));
    }

    #[test]
    fn squarefree() {
        let (s, r) = squarefree_split(&BigUint::from(729_000u32)).unwrap();
        assert_eq!((s, r), (BigUint::from(270u32), BigUint::from(10u32)));
    }
}
