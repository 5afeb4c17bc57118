//! Rigorous real and complex interval arithmetic on scaled big integers.
//!
//! An [`Interval`] `[lo, hi]·2^-prec` always encloses the exact value; every
//! operation rounds its endpoints outward.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

use crate::phase::Dyadic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: BigInt,
    hi: BigInt,
    prec: u32,
}

fn shr_floor(x: &BigInt, n: u32) -> BigInt {
    x >> n as usize
}

fn shr_ceil(x: &BigInt, n: u32) -> BigInt {
    -((-x) >> n as usize)
}

fn isqrt_floor(x: &BigInt) -> BigInt {
    if x.sign() != Sign::Plus {
        return BigInt::zero();
    }
    x.sqrt()
}

fn isqrt_ceil(x: &BigInt) -> BigInt {
    let s = isqrt_floor(x);
    if &(&s * &s) < x {
        s + 1
    } else {
        s
    }
}

impl Interval {
    fn raw(lo: BigInt, hi: BigInt, prec: u32) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo, hi, prec }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn zero(prec: u32) -> Interval {
        Interval::raw(BigInt::zero(), BigInt::zero(), prec)
    }

    pub fn from_int(n: i64, prec: u32) -> Interval {
        let v = BigInt::from(n) << prec as usize;
        Interval::raw(v.clone(), v, prec)
    }

    pub fn from_bigint(n: &BigInt, prec: u32) -> Interval {
        let v = n << prec as usize;
        Interval::raw(v.clone(), v, prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Interval {
        let scaled = r.numer() << prec as usize;
        let lo = scaled.div_floor(r.denom());
        let hi = Integer::div_ceil(&scaled, r.denom());
        Interval::raw(lo, hi, prec)
    }

    pub fn from_dyadic(d: Dyadic, prec: u32) -> Interval {
        let r = BigRational::new(BigInt::from(d.numerator()), BigInt::one() << d.exponent() as usize);
        Interval::from_rational(&r, prec)
    }

    /// Interval with the given endpoints, each rounded outward.
    pub fn hull(a: &Interval, b: &Interval) -> Interval {
        let (a, b) = Interval::align(a, b);
        Interval::raw(a.lo.clone().min(b.lo.clone()), a.hi.clone().max(b.hi.clone()), a.prec)
    }

    pub fn with_prec(&self, prec: u32) -> Interval {
        if prec == self.prec {
            self.clone()
        } else if prec > self.prec {
            let s = (prec - self.prec) as usize;
            Interval::raw(&self.lo << s, &self.hi << s, prec)
        } else {
            let s = self.prec - prec;
            Interval::raw(shr_floor(&self.lo, s), shr_ceil(&self.hi, s), prec)
        }
    }

    fn align(a: &Interval, b: &Interval) -> (Interval, Interval) {
        let p = a.prec.max(b.prec);
        (a.with_prec(p), b.with_prec(p))
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let (a, b) = Interval::align(self, o);
        Interval::raw(&a.lo + &b.lo, &a.hi + &b.hi, a.prec)
    }

    pub fn neg(&self) -> Interval {
        Interval::raw(-&self.hi, -&self.lo, self.prec)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let (a, b) = Interval::align(self, o);
        let c = [&a.lo * &b.lo, &a.lo * &b.hi, &a.hi * &b.lo, &a.hi * &b.hi];
        let mn = c.iter().min().cloned().unwrap_or_default();
        let mx = c.iter().max().cloned().unwrap_or_default();
        Interval::raw(shr_floor(&mn, a.prec), shr_ceil(&mx, a.prec), a.prec)
    }

    pub fn square(&self) -> Interval {
        let m = self.mul(self);
        if self.contains_zero() {
            Interval::raw(BigInt::zero(), m.hi, m.prec)
        } else {
            m
        }
    }

    pub fn mul_int(&self, k: i64) -> Interval {
        let k = BigInt::from(k);
        let (a, b) = (&self.lo * &k, &self.hi * &k);
        Interval::raw(a.clone().min(b.clone()), a.max(b), self.prec)
    }

    /// Exact multiplication by `2^-k`, rounded outward.
    pub fn shr(&self, k: u32) -> Interval {
        Interval::raw(shr_floor(&self.lo, k), shr_ceil(&self.hi, k), self.prec)
    }

    /// Reciprocal; `None` when the interval contains zero.
    pub fn recip(&self) -> Option<Interval> {
        if self.contains_zero() {
            return None;
        }
        let one = BigInt::one() << (2 * self.prec) as usize;
        let lo = one.div_floor(&self.hi);
        let hi = Integer::div_ceil(&one, &self.lo);
        Some(Interval::raw(lo, hi, self.prec))
    }

    pub fn div(&self, o: &Interval) -> Option<Interval> {
        Some(self.mul(&o.recip()?))
    }

    /// Square root of the non-negative part; `None` if entirely negative.
    pub fn sqrt(&self) -> Option<Interval> {
        if self.hi.sign() == Sign::Minus {
            return None;
        }
        let s = self.prec as usize;
        let lo = isqrt_floor(&(&self.lo << s));
        let hi = isqrt_ceil(&(&self.hi << s));
        Some(Interval::raw(lo, hi, self.prec))
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.sign() != Sign::Plus && self.hi.sign() != Sign::Minus
    }

    pub fn is_positive(&self) -> bool {
        self.lo.sign() == Sign::Plus
    }

    pub fn is_negative(&self) -> bool {
        self.hi.sign() == Sign::Minus
    }

    /// Strictly below `o` everywhere.
    pub fn lt(&self, o: &Interval) -> bool {
        let (a, b) = Interval::align(self, o);
        a.hi < b.lo
    }

    pub fn le_certain(&self, o: &Interval) -> bool {
        let (a, b) = Interval::align(self, o);
        a.hi <= b.lo
    }

    fn scale_f64(x: &BigInt, prec: u32) -> f64 {
        let bits = x.bits() as i64;
        if bits > 1000 {
            let shift = (bits - 60) as u32;
            let top = (x >> shift as usize).to_f64().unwrap_or(0.0);
            top * 2f64.powi(shift as i32 - prec as i32)
        } else {
            x.to_f64().unwrap_or(0.0) / 2f64.powi(prec as i32)
        }
    }

    pub fn lo_f64(&self) -> f64 {
        Interval::scale_f64(&self.lo, self.prec)
    }

    pub fn hi_f64(&self) -> f64 {
        Interval::scale_f64(&self.hi, self.prec)
    }

    pub fn mid_f64(&self) -> f64 {
        Interval::scale_f64(&(&self.lo + &self.hi), self.prec + 1)
    }

    pub fn width_f64(&self) -> f64 {
        Interval::scale_f64(&(&self.hi - &self.lo), self.prec)
    }

    pub fn lo_rational(&self) -> BigRational {
        BigRational::new(self.lo.clone(), BigInt::one() << self.prec as usize)
    }

    pub fn hi_rational(&self) -> BigRational {
        BigRational::new(self.hi.clone(), BigInt::one() << self.prec as usize)
    }

    /// `[−r, r]` for a non-negative rational bound `r`.
    pub fn symmetric(r: &BigRational, prec: u32) -> Interval {
        let b = Interval::from_rational(r, prec);
        Interval::raw(-&b.hi, b.hi, prec)
    }

    pub fn max_abs(&self) -> BigRational {
        let m = self.lo.abs().max(self.hi.abs());
        BigRational::new(m, BigInt::one() << self.prec as usize)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}]", self.lo_f64(), self.hi_f64())
    }
}

/// Guard bits used internally by transcendental functions.
const GUARD: u32 = 24;

/// Enclosure of `arctan(1/k)` for integer `k ≥ 2`.
fn atan_inv(k: u64, prec: u32) -> Interval {
    let p = prec as usize;
    let kk = BigInt::from(k) * BigInt::from(k);
    let mut power = (BigInt::one() << p).div_floor(&BigInt::from(k));
    let mut sum = BigInt::zero();
    let mut n: u64 = 0;
    let mut terms: i64 = 0;
    while !power.is_zero() {
        let t = power.div_floor(&BigInt::from(2 * n + 1));
        if n % 2 == 0 {
            sum += &t;
        } else {
            sum -= &t;
        }
        power = power.div_floor(&kk);
        n += 1;
        terms += 1;
    }
    // each term is off by at most 2 ulps; the tail is below one ulp
    let err = BigInt::from(2 * terms + 2);
    Interval::raw(&sum - &err, &sum + &err, prec)
}

/// Enclosure of π by Machin's formula.
pub fn pi(prec: u32) -> Interval {
    let wp = prec + GUARD;
    let a = atan_inv(5, wp).mul_int(16);
    let b = atan_inv(239, wp).mul_int(4);
    a.sub(&b).with_prec(prec)
}

fn taylor(x: &Interval, odd: bool, prec: u32) -> Interval {
    // Σ (−1)^k x^(2k+o)/(2k+o)!, remainder bounded by the first omitted term.
    let x2 = x.square();
    let mut term = if odd { x.clone() } else { Interval::from_int(1, prec) };
    let mut sum = Interval::zero(prec);
    let mut k: i64 = 0;
    let eps = BigRational::new(BigInt::from(4), BigInt::one() << (prec as usize));
    loop {
        let bound = term.max_abs();
        if bound <= eps && k > 0 {
            let r = Interval::symmetric(&bound, prec);
            return sum.add(&r);
        }
        if k % 2 == 0 {
            sum = sum.add(&term);
        } else {
            sum = sum.sub(&term);
        }
        let a = if odd { 2 * k + 2 } else { 2 * k + 1 };
        let denom = Interval::from_int(a * (a + 1), prec);
        term = term.mul(&x2).div(&denom).unwrap_or_else(|| Interval::zero(prec));
        k += 1;
        if k > 10_000 {
            return sum.add(&Interval::symmetric(&term.max_abs(), prec));
        }
    }
}

/// Cosine of an interval argument.
pub fn cos(x: &Interval) -> Interval {
    trig(x, false)
}

/// Sine of an interval argument.
pub fn sin(x: &Interval) -> Interval {
    trig(x, true)
}

fn trig(x: &Interval, sine: bool) -> Interval {
    let prec = x.prec();
    let wp = prec + GUARD;
    let xw = x.with_prec(wp);
    let half_pi = pi(wp).shr(1);
    let q = (xw.mid_f64() / (std::f64::consts::PI / 2.0)).round() as i64;
    let y = xw.sub(&half_pi.mul_int(q));
    if y.width_f64() > 0.5 {
        return Interval::hull(&Interval::from_int(-1, prec), &Interval::from_int(1, prec));
    }
    let c = taylor(&y, false, wp);
    let s = taylor(&y, true, wp);
    let qm = q.rem_euclid(4);
    let r = match (sine, qm) {
        (false, 0) => c,
        (false, 1) => s.neg(),
        (false, 2) => c.neg(),
        (false, _) => s,
        (true, 0) => s,
        (true, 1) => c,
        (true, 2) => s.neg(),
        (true, _) => c.neg(),
    };
    clamp_unit(r).with_prec(prec)
}

fn clamp_unit(r: Interval) -> Interval {
    let one = BigInt::one() << r.prec as usize;
    let lo = r.lo.clone().max(-&one);
    let hi = r.hi.clone().min(one.clone());
    if lo > hi {
        return r;
    }
    Interval::raw(lo, hi, r.prec)
}

/// `cos(2π·t)` for a dyadic number of turns.
pub fn cos_turns(t: Dyadic, prec: u32) -> Interval {
    let wp = prec + GUARD;
    let x = pi(wp).mul(&Interval::from_dyadic(t, wp)).mul_int(2);
    cos(&x).with_prec(prec)
}

/// `sin(2π·t)` for a dyadic number of turns.
pub fn sin_turns(t: Dyadic, prec: u32) -> Interval {
    let wp = prec + GUARD;
    let x = pi(wp).mul(&Interval::from_dyadic(t, wp)).mul_int(2);
    sin(&x).with_prec(prec)
}

fn atan_point(x: &BigRational, prec: u32) -> Interval {
    let wp = prec + GUARD;
    let mut v = Interval::from_rational(x, wp);
    let mut doublings = 0u32;
    let small = BigRational::new(BigInt::one(), BigInt::from(8));
    while v.max_abs() > small && doublings < 64 {
        let one = Interval::from_int(1, wp);
        let d = one.add(&one.add(&v.square()).sqrt().unwrap_or_else(|| one.clone()));
        v = v.div(&d).unwrap_or(v);
        doublings += 1;
    }
    // arctan(v) = Σ (−1)^n v^(2n+1)/(2n+1)
    let v2 = v.square();
    let mut power = v.clone();
    let mut sum = Interval::zero(wp);
    let eps = BigRational::new(BigInt::from(4), BigInt::one() << (wp as usize));
    let mut n: i64 = 0;
    loop {
        let term = power.div(&Interval::from_int(2 * n + 1, wp)).unwrap_or_else(|| Interval::zero(wp));
        if term.max_abs() <= eps {
            sum = sum.add(&Interval::symmetric(&term.max_abs(), wp));
            break;
        }
        sum = if n % 2 == 0 { sum.add(&term) } else { sum.sub(&term) };
        power = power.mul(&v2);
        n += 1;
    }
    sum.mul_int(1i64 << doublings).with_prec(prec)
}

/// Arctangent, monotone, evaluated at both endpoints.
pub fn atan(x: &Interval) -> Interval {
    let lo = atan_point(&x.lo_rational(), x.prec());
    let hi = atan_point(&x.hi_rational(), x.prec());
    Interval::raw(lo.lo, hi.hi, x.prec())
}

/// Arcsine on `[-1, 1]`; `None` outside the domain.
pub fn asin(x: &Interval) -> Option<Interval> {
    let prec = x.prec();
    let one = BigRational::one();
    let point = |r: BigRational| -> Option<Interval> {
        if r > one || r < -one.clone() {
            return None;
        }
        if r == one || r == -one.clone() {
            let hp = pi(prec).shr(1);
            return Some(if r.is_positive() { hp } else { hp.neg() });
        }
        let wp = prec + GUARD;
        let v = Interval::from_rational(&r, wp);
        let d = Interval::from_int(1, wp).sub(&v.square()).sqrt()?;
        let q = v.div(&d)?;
        let lo = atan_point(&q.lo_rational(), prec);
        let hi = atan_point(&q.hi_rational(), prec);
        Some(Interval::raw(lo.lo, hi.hi, prec))
    };
    let a = point(x.lo_rational())?;
    let b = point(x.hi_rational())?;
    Some(Interval::raw(a.lo, b.hi, prec))
}

/// Arccosine on `[-1, 1]`.
pub fn acos(x: &Interval) -> Option<Interval> {
    Some(pi(x.prec()).shr(1).sub(&asin(x)?))
}

/// Rectangular complex interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexInterval {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexInterval {
    pub fn zero(prec: u32) -> ComplexInterval {
        ComplexInterval { re: Interval::zero(prec), im: Interval::zero(prec) }
    }

    pub fn real(re: Interval) -> ComplexInterval {
        let p = re.prec();
        ComplexInterval { re, im: Interval::zero(p) }
    }

    /// `e^{2πi t}`.
    pub fn expi_turns(t: Dyadic, prec: u32) -> ComplexInterval {
        ComplexInterval { re: cos_turns(t, prec), im: sin_turns(t, prec) }
    }

    pub fn add(&self, o: &ComplexInterval) -> ComplexInterval {
        ComplexInterval { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn mul(&self, o: &ComplexInterval) -> ComplexInterval {
        ComplexInterval {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn scale(&self, r: &Interval) -> ComplexInterval {
        ComplexInterval { re: self.re.mul(r), im: self.im.mul(r) }
    }

    pub fn norm_sqr(&self) -> Interval {
        self.re.square().add(&self.im.square())
    }
}

impl fmt::Display for ComplexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i", self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(i: &Interval, v: f64, tol: f64) -> bool {
        i.lo_f64() <= v + tol && i.hi_f64() >= v - tol && i.width_f64() < tol
    }

    #[test]
    fn pi_encloses() {
        let p = pi(128);
        assert!(close(&p, std::f64::consts::PI, 1e-15));
        let r = BigRational::new(BigInt::from(355), BigInt::from(113));
        assert!(p.lt(&Interval::from_rational(&r, 128)));
    }

    #[test]
    fn trig_values() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&cos_turns(Dyadic::new(1, 3), 96), h, 1e-15));
        assert!(close(&sin_turns(Dyadic::new(1, 1), 96), 0.0, 1e-15));
        assert!(close(&cos_turns(Dyadic::new(1, 1), 96), -1.0, 1e-15));
        assert!(close(&sin_turns(Dyadic::new(1, 2), 96), 1.0, 1e-15));
        assert!(close(&cos_turns(Dyadic::new(3, 5), 96), (2.0 * std::f64::consts::PI * 3.0 / 32.0).cos(), 1e-14));
        assert!(close(&sin(&Interval::from_int(5, 96)), 5f64.sin(), 1e-14));
    }

    #[test]
    fn sqrt_and_recip() {
        let two = Interval::from_int(2, 100);
        assert!(close(&two.sqrt().unwrap(), 2f64.sqrt(), 1e-15));
        assert!(close(&two.recip().unwrap(), 0.5, 1e-15));
        assert!(Interval::zero(64).recip().is_none());
    }

    #[test]
    fn inverse_trig() {
        let half = Interval::from_rational(&BigRational::new(1.into(), 2.into()), 100);
        assert!(close(&atan(&Interval::from_int(1, 100)), std::f64::consts::FRAC_PI_4, 1e-15));
        assert!(close(&asin(&half).unwrap(), std::f64::consts::FRAC_PI_6, 1e-15));
        assert!(close(&acos(&half).unwrap(), std::f64::consts::FRAC_PI_3, 1e-15));
    }

    #[test]
    fn complex_phase() {
        let z = ComplexInterval::expi_turns(Dyadic::new(1, 1), 80);
        assert!(close(&z.re, -1.0, 1e-15) && close(&z.im, 0.0, 1e-15));
        let w = ComplexInterval::expi_turns(Dyadic::new(1, 2), 80).scale(&Interval::from_rational(
            &BigRational::new(1.into(), 2.into()),
            80,
        ));
        assert!(close(&w.norm_sqr(), 0.25, 1e-15));
    }
}
