//! Binary floating point numbers with a configurable mantissa width.
//!
//! A [`Real`] is `mant * 2^exp` with `|mant| < 2^prec`. Every arithmetic
//! result is rounded to the larger precision of its operands with
//! round-half-even, so a computation started from values built at `p` bits
//! stays at `p` bits throughout.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Extra mantissa bits carried on top of the requested decimal digits.
pub const GUARD_BITS: u32 = 16;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Mantissa width (in bits) for `digits` significant decimal digits plus guard bits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + GUARD_BITS
}

#[derive(Clone, Debug)]
pub struct Real {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

impl Real {
    pub fn zero(prec: u32) -> Self {
        Real {
            mant: BigInt::zero(),
            exp: 0,
            prec,
        }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_i64(1, prec)
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Self::from_parts(BigInt::from(v), 0, prec)
    }

    pub fn from_bigint(v: &BigInt, prec: u32) -> Self {
        Self::from_parts(v.clone(), 0, prec)
    }

    /// Exact conversion of a finite double, then rounded to `prec` bits.
    pub fn from_f64(v: f64, prec: u32) -> Self {
        assert!(v.is_finite(), "non-finite value {v}");
        if v == 0.0 {
            return Self::zero(prec);
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Self::from_parts(BigInt::from(m) * sign, e, prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        if r.is_zero() {
            return Self::zero(prec);
        }
        let num = r.numer();
        let den = r.denom();
        // quotient with at least prec + 2 significant bits, plus a sticky bit
        let shift = (prec as i64 + 2 + den.bits() as i64 - num.bits() as i64).max(0);
        let scaled = num.magnitude() << (shift as usize + 1);
        let (q, rem) = scaled.div_rem(den.magnitude());
        let q = if rem.is_zero() { q } else { q | BigUint::one() };
        let sign = if num.is_negative() != den.is_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        };
        Self::from_parts(BigInt::from_biguint(sign, q), -shift - 1, prec)
    }

    /// Parse a decimal (`-1.25e-3`), an integer, or a fraction (`-7/12`).
    pub fn parse(s: &str, prec: u32) -> Result<Self> {
        Ok(Self::from_rational(&parse_rational(s)?, prec))
    }

    fn from_parts(mant: BigInt, exp: i64, prec: u32) -> Self {
        let mut r = Real { mant, exp, prec };
        r.normalize();
        r
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        let bits = self.mant.bits();
        if bits <= self.prec as u64 {
            return;
        }
        let shift = (bits - self.prec as u64) as usize;
        let neg = self.mant.is_negative();
        let mag = self.mant.magnitude();
        let mut q: BigUint = mag >> shift;
        let rem = mag - (&q << shift);
        let half = BigUint::one() << (shift - 1);
        let round_up = match rem.cmp(&half) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => q.is_odd(),
        };
        if round_up {
            q += 1u32;
        }
        let mut exp = self.exp + shift as i64;
        if q.bits() > self.prec as u64 {
            q >>= 1;
            exp += 1;
        }
        self.mant = BigInt::from_biguint(if neg { Sign::Minus } else { Sign::Plus }, q);
        self.exp = exp;
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// Round (or widen) to a different mantissa width.
    pub fn with_precision(&self, prec: u32) -> Self {
        Self::from_parts(self.mant.clone(), self.exp, prec)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.mant.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Real {
            mant: self.mant.abs(),
            exp: self.exp,
            prec: self.prec,
        }
    }

    /// Position of the leading bit: `2^(top-1) <= |x| < 2^top`.
    fn top(&self) -> i64 {
        self.exp + self.mant.bits() as i64
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as usize)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as usize)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits();
        let (m, e) = if bits > 64 {
            let shift = bits - 64;
            ((&self.mant >> shift as usize), self.exp + shift as i64)
        } else {
            (self.mant.clone(), self.exp)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        m * 2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
    }

    /// Base-2 logarithm of `|x|`, accurate to double precision. `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mant.bits();
        let shift = bits.saturating_sub(60);
        let head = (self.mant.magnitude() >> shift as usize).to_f64().unwrap();
        head.log2() + (self.exp + shift as i64) as f64
    }

    pub fn ln_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Real::one(self.prec);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.is_negative(), "square root of a negative value");
        if self.is_zero() {
            return self.clone();
        }
        // make the exponent even and give the radicand 2*prec+4 bits
        let want = 2 * self.prec as i64 + 4;
        let mut shift = (want - self.mant.bits() as i64).max(0);
        if (self.exp - shift).rem_euclid(2) != 0 {
            shift += 1;
        }
        let rad: BigUint = self.mant.magnitude() << shift as usize;
        let root = rad.sqrt();
        let sticky = &root * &root != rad;
        let root = (root << 1usize) | if sticky { BigUint::one() } else { BigUint::zero() };
        Self::from_parts(
            BigInt::from_biguint(Sign::Plus, root),
            (self.exp - shift) / 2 - 1,
            self.prec,
        )
    }

    pub fn max_abs<'a, I: IntoIterator<Item = &'a Real>>(values: I, prec: u32) -> Real {
        values
            .into_iter()
            .map(Real::abs)
            .fold(Real::zero(prec), |m, v| if v > m { v } else { m })
    }

    /// Scientific notation with `digits` significant digits, e.g. `-1.2500e-3`.
    pub fn to_decimal(&self, digits: usize) -> String {
        let digits = digits.max(1);
        if self.is_zero() {
            return "0".to_string();
        }
        let r = self.to_rational().abs();
        let mut e10 = (self.log2_abs() / LOG2_10).floor() as i64;
        // scaled = round(r * 10^(digits-1-e10)); fix e10 if the estimate was off by one
        let scaled = loop {
            let s = round_scaled(&r, digits as i64 - 1 - e10);
            let len = s.to_string().len();
            if len > digits {
                e10 += 1;
            } else if len < digits {
                e10 -= 1;
            } else {
                break s;
            }
        };
        let text = scaled.to_string();
        let (head, tail) = text.split_at(1);
        let sign = if self.is_negative() { "-" } else { "" };
        if tail.is_empty() {
            format!("{sign}{head}e{e10}")
        } else {
            format!("{sign}{head}.{tail}e{e10}")
        }
    }

    /// Significant decimal digits the mantissa can actually resolve.
    pub fn decimal_digits(&self) -> usize {
        (((self.prec - GUARD_BITS.min(self.prec - 1)) as f64) / LOG2_10).floor() as usize
    }
}

fn round_scaled(r: &BigRational, pow10: i64) -> BigInt {
    let ten = BigInt::from(10);
    let scaled = if pow10 >= 0 {
        r * BigRational::from_integer(num_traits::pow(ten, pow10 as usize))
    } else {
        r / BigRational::from_integer(num_traits::pow(ten, (-pow10) as usize))
    };
    scaled.round().to_integer()
}

/// Exact parse of a decimal literal, integer or fraction.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational or decimal number: {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigInt::from_str(&digits).map_err(|_| bad())?;
    if neg {
        value = -value;
    }
    let e = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    Ok(if e >= 0 {
        BigRational::from_integer(value * num_traits::pow(ten, e as usize))
    } else {
        BigRational::new(value, num_traits::pow(ten, (-e) as usize))
    })
}

fn add_impl(a: &Real, b: &Real, negate_b: bool) -> Real {
    let prec = a.prec.max(b.prec);
    let b_mant = if negate_b { -&b.mant } else { b.mant.clone() };
    if a.is_zero() {
        return Real::from_parts(b_mant, b.exp, prec);
    }
    if b.is_zero() {
        return Real::from_parts(a.mant.clone(), a.exp, prec);
    }
    // an operand entirely below the rounding position of the other is dropped
    let gap = prec as i64 + 3;
    if a.top() - b.top() > gap {
        return Real::from_parts(a.mant.clone(), a.exp, prec);
    }
    if b.top() - a.top() > gap {
        return Real::from_parts(b_mant, b.exp, prec);
    }
    let (mant, exp) = if a.exp >= b.exp {
        ((&a.mant << (a.exp - b.exp) as usize) + b_mant, b.exp)
    } else {
        (&a.mant + (b_mant << (b.exp - a.exp) as usize), a.exp)
    };
    Real::from_parts(mant, exp, prec)
}

fn mul_impl(a: &Real, b: &Real) -> Real {
    Real::from_parts(&a.mant * &b.mant, a.exp + b.exp, a.prec.max(b.prec))
}

fn div_impl(a: &Real, b: &Real) -> Real {
    assert!(!b.is_zero(), "division by zero");
    let prec = a.prec.max(b.prec);
    if a.is_zero() {
        return Real::zero(prec);
    }
    let shift =
        (prec as i64 + 2 + b.mant.bits() as i64 - a.mant.bits() as i64).max(0) as usize + 1;
    let (q, rem) = (a.mant.magnitude() << shift).div_rem(b.mant.magnitude());
    let q = if rem.is_zero() { q } else { q | BigUint::one() };
    let sign = if a.is_negative() != b.is_negative() {
        Sign::Minus
    } else {
        Sign::Plus
    };
    Real::from_parts(
        BigInt::from_biguint(sign, q),
        a.exp - b.exp - shift as i64,
        prec,
    )
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                $body(self, rhs)
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                $body(&self, &rhs)
            }
        }
        impl $tr<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                $body(&self, rhs)
            }
        }
        impl $tr<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                $body(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| add_impl(a, b, false));
binop!(Sub, sub, |a, b| add_impl(a, b, true));
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl AddAssign<&Real> for Real {
    fn add_assign(&mut self, rhs: &Real) {
        *self = add_impl(self, rhs, false);
    }
}

impl SubAssign<&Real> for Real {
    fn sub_assign(&mut self, rhs: &Real) {
        *self = add_impl(self, rhs, true);
    }
}

impl MulAssign<&Real> for Real {
    fn mul_assign(&mut self, rhs: &Real) {
        *self = mul_impl(self, rhs);
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real {
            mant: -self.mant,
            exp: self.exp,
            prec: self.prec,
        }
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        -(self.clone())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let mag = match self.top().cmp(&other.top()) {
            Ordering::Equal => {
                let e = self.exp.min(other.exp);
                let a = self.mant.magnitude() << (self.exp - e) as usize;
                let b = other.mant.magnitude() << (other.exp - e) as usize;
                a.cmp(&b)
            }
            ord => ord,
        };
        if sa < 0 {
            mag.reverse()
        } else {
            mag
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| self.decimal_digits());
        f.write_str(&self.to_decimal(digits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 200;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exact_small_arithmetic() {
        let a = Real::from_i64(3, P);
        let b = Real::from_i64(-5, P);
        assert_eq!((&a + &b).to_rational(), q(-2, 1));
        assert_eq!((&a * &b).to_rational(), q(-15, 1));
        assert_eq!((&a - &b).to_rational(), q(8, 1));
        assert_eq!(Real::from_f64(0.375, P).to_rational(), q(3, 8));
    }

    #[test]
    fn division_rounds_to_precision() {
        let third = Real::from_i64(1, P) / Real::from_i64(3, P);
        let err = (third.to_rational() - q(1, 3)).abs();
        let bound = BigRational::new(1.into(), BigInt::one() << (P as usize + 1));
        assert!(err <= bound);
        assert_eq!(third.precision(), P);
    }

    #[test]
    fn sqrt_of_two_squares_back() {
        let two = Real::from_i64(2, P);
        let r = two.sqrt();
        let err = (&r * &r - &two).abs();
        assert!(err.log2_abs() < -(P as f64) + 4.0);
        assert_eq!(Real::from_i64(49, P).sqrt().to_rational(), q(7, 1));
    }

    #[test]
    fn absorbs_negligible_addend() {
        let big = Real::from_i64(1, 64);
        let tiny = Real::from_rational(&(q(1, 1) / BigRational::from_integer(BigInt::one() << 300)), 64);
        assert_eq!(&big + &tiny, big);
        assert_eq!(&tiny - &big, -big.clone());
    }

    #[test]
    fn ordering_and_equality() {
        let a = Real::parse("-0.5", P).unwrap();
        let b = Real::parse("1/3", P).unwrap();
        assert!(a < b);
        assert!(b.abs() < a.abs());
        assert_eq!(Real::parse("2.5e1", P).unwrap(), Real::from_i64(25, P));
        assert_eq!(Real::zero(P), Real::zero(10));
    }

    #[test]
    fn decimal_output() {
        let x = Real::parse("-1.25e-3", P).unwrap();
        assert_eq!(x.to_decimal(3), "-1.25e-3");
        assert_eq!(Real::from_i64(1000, P).to_decimal(1), "1e3");
        assert_eq!(Real::parse("0.999999", P).unwrap().to_decimal(3), "1.00e0");
        assert_eq!(Real::zero(P).to_decimal(5), "0");
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("-7/12").unwrap(), q(-7, 12));
        assert_eq!(parse_rational("5e9").unwrap(), q(5_000_000_000, 1));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn to_f64_matches() {
        let x = Real::parse("0.1", P).unwrap();
        assert_eq!(x.to_f64(), 0.1);
        assert_eq!(Real::from_f64(-3.75e-200, P).to_f64(), -3.75e-200);
    }

    proptest::proptest! {
        #[test]
        fn decimal_round_trip(n in -1_000_000_000i64..1_000_000_000, d in 1i64..1_000_000, prec in 80u32..300) {
            let x = Real::from_rational(&q(n, d), prec);
            let digits = (prec as f64 / LOG2_10).ceil() as usize + 2;
            let back = Real::parse(&x.to_decimal(digits), prec).unwrap();
            let diff = (&back - &x).abs();
            proptest::prop_assert!(diff.is_zero() || diff.log2_abs() <= x.log2_abs() - prec as f64 + 2.0);
        }

        #[test]
        fn field_ops_track_rationals(a in -10_000i64..10_000, b in 1i64..10_000, c in -10_000i64..10_000, d in 1i64..10_000) {
            let (x, y) = (q(a, b), q(c, d));
            let (rx, ry) = (Real::from_rational(&x, P), Real::from_rational(&y, P));
            // inputs carry one rounding each, so measure against the operand scale
            let scale = x.to_f64().unwrap().abs().max(y.to_f64().unwrap().abs());
            let tol = |v: &BigRational| -> f64 { v.to_f64().unwrap().abs().max(scale * scale).max(scale).max(1e-300).log2() - P as f64 + 3.0 };
            for (got, want) in [(&rx + &ry, &x + &y), (&rx * &ry, &x * &y), (&rx - &ry, &x - &y)] {
                let e = (&got - Real::from_rational(&want, P)).abs();
                proptest::prop_assert!(e.is_zero() || e.log2_abs() <= tol(&want));
            }
        }
    }
}
