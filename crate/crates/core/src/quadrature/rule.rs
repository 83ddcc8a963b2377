use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::families::node_polynomial;
use super::unipoly::{count_roots, sturm_sequence, UniPoly};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::{bits_for_digits, parse_rational, Real};

/// Where the abscissae are allowed to lie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NodeDomain {
    /// All nodes in `[0, 1]`; anything else is rejected.
    #[default]
    UnitInterval,
    /// Any real nodes, as long as there are `s` distinct ones.
    RealLine,
}

/// Interpolatory quadrature rule on the zeros of `P_s - ζ P_{s-1}`.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub s: usize,
    pub zeta: BigRational,
    pub c: Vec<Real>,
    pub b: Vec<Real>,
    pub order: usize,
    pub precision_digits: u32,
}

/// Width (as a power of two) to which Sturm bisection isolates each root
/// before Newton takes over.
const ISOLATION_BITS: u64 = 64;

/// Build the rule with nodes restricted to `[0, 1]`.
pub fn quad_rule(s: usize, zeta: &BigRational, precision_digits: u32) -> Result<QuadRule> {
    quad_rule_in(s, zeta, precision_digits, NodeDomain::UnitInterval)
}

pub fn quad_rule_in(
    s: usize,
    zeta: &BigRational,
    precision_digits: u32,
    domain: NodeDomain,
) -> Result<QuadRule> {
    if s == 0 {
        return Err(Error::InvalidInput("stage count s must be at least 1".into()));
    }
    if precision_digits < 10 {
        return Err(Error::InvalidInput(format!(
            "precision of {precision_digits} digits is too small (need at least 10)"
        )));
    }
    let prec = bits_for_digits(precision_digits);
    let poly = node_polynomial(s, zeta);
    if poly.degree() != Some(s) {
        return Err(Error::RootLocation(format!(
            "P_{s} - ζ P_{} does not have degree {s}",
            s - 1
        )));
    }
    let g = poly.gcd(&poly.derivative());
    if g.degree() != Some(0) {
        return Err(Error::RootLocation(format!(
            "P_{s} - ζ P_{} has a repeated root for ζ = {zeta}",
            s - 1
        )));
    }
    let seq = sturm_sequence(&poly);
    let bound = poly.root_bound();
    let real_roots = count_roots(&seq, &-&bound, &bound);
    if real_roots != s {
        return Err(Error::RootLocation(format!(
            "P_{s} - ζ P_{} has only {real_roots} real roots of {s} for ζ = {zeta}",
            s - 1
        )));
    }
    let zero = BigRational::zero();
    let one = BigRational::one();
    let (lo, hi) = match domain {
        NodeDomain::UnitInterval => {
            let at_zero = usize::from(poly.eval(&zero).is_zero());
            let inside = count_roots(&seq, &zero, &one) + at_zero;
            if inside != s {
                return Err(Error::RootLocation(format!(
                    "{} of the {s} nodes for ζ = {zeta} lie outside [0, 1]",
                    s - inside
                )));
            }
            // (lo, hi] with lo just below 0 so a root at 0 is captured
            (-BigRational::new(BigInt::one(), BigInt::from(1u64) << 20), one)
        }
        NodeDomain::RealLine => (-bound.clone(), bound),
    };

    let mut intervals = Vec::new();
    isolate(&seq, lo, hi, &mut intervals);
    intervals.sort();
    let dpoly = poly.derivative();
    let c = intervals
        .into_iter()
        .map(|(a, b)| refine(&poly, &dpoly, &seq, a, b, prec))
        .collect::<Result<Vec<_>>>()?;

    let b = vandermonde_weights(&c, prec)?;
    let mut rule = QuadRule {
        s,
        zeta: zeta.clone(),
        c,
        b,
        order: 0,
        precision_digits,
    };
    rule.order = rule.measured_order();
    let required = if zeta.is_zero() { 2 * s } else { 2 * s - 1 };
    if rule.order < required {
        return Err(Error::PrecisionInsufficient(format!(
            "quadrature order {} below the expected {required} at {precision_digits} digits",
            rule.order
        )));
    }
    Ok(rule)
}

/// Split `(a, b]` until each piece holds exactly one root.
fn isolate(
    seq: &[UniPoly],
    a: BigRational,
    b: BigRational,
    out: &mut Vec<(BigRational, BigRational)>,
) {
    match count_roots(seq, &a, &b) {
        0 => {}
        1 => out.push((a, b)),
        _ => {
            let mid = (&a + &b) / BigRational::from_integer(2.into());
            isolate(seq, a, mid.clone(), out);
            isolate(seq, mid, b, out);
        }
    }
}

fn refine(
    poly: &UniPoly,
    dpoly: &UniPoly,
    seq: &[UniPoly],
    mut a: BigRational,
    mut b: BigRational,
    prec: u32,
) -> Result<Real> {
    let two = BigRational::from_integer(2.into());
    let width_target = BigRational::new(BigInt::one(), BigInt::one() << ISOLATION_BITS);
    if poly.eval(&b).is_zero() {
        return Ok(Real::from_rational(&b, prec));
    }
    while &b - &a > width_target {
        let mid = (&a + &b) / &two;
        if poly.eval(&mid).is_zero() {
            return Ok(Real::from_rational(&mid, prec));
        }
        if count_roots(seq, &a, &mid) == 1 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let (ra, rb) = (Real::from_rational(&a, prec), Real::from_rational(&b, prec));
    let mut x = Real::from_rational(&((&a + &b) / &two), prec);
    let tiny = -(prec as f64) + 2.0;
    for _ in 0..64 {
        let fx = poly.eval_real(&x);
        if fx.is_zero() {
            break;
        }
        let dx = &fx / &dpoly.eval_real(&x);
        x = &x - &dx;
        if x < ra || x > rb {
            return Err(Error::RootLocation(
                "Newton iteration left the isolating interval".into(),
            ));
        }
        if dx.is_zero() || dx.log2_abs() < tiny + x.log2_abs().max(0.0) {
            break;
        }
    }
    Ok(x)
}

fn vandermonde_weights(c: &[Real], prec: u32) -> Result<Vec<Real>> {
    let s = c.len();
    let v = Matrix::from_fn(s, s, |k, i| c[i].powi(k as u32));
    let rhs: Vec<Real> = (0..s)
        .map(|k| Real::one(prec) / Real::from_i64(k as i64 + 1, prec))
        .collect();
    v.solve(&rhs).map_err(|e| match e {
        Error::Singular(msg) => Error::PrecisionInsufficient(format!(
            "Vandermonde system for the weights is numerically singular ({msg})"
        )),
        other => other,
    })
}

impl QuadRule {
    pub fn precision_bits(&self) -> u32 {
        self.c[0].precision()
    }

    /// Absolute tolerance `10^(-digits + 5)` used for exactness checks.
    pub fn tolerance(&self) -> Real {
        Real::parse(&format!("1e{}", 5 - self.precision_digits as i64), self.precision_bits())
            .expect("well-formed literal")
    }

    pub fn zeta_real(&self) -> Real {
        Real::from_rational(&self.zeta, self.precision_bits())
    }

    /// `Σ b_i c_i^(k-1) - 1/k`.
    pub fn condition_residual(&self, k: usize) -> Real {
        let prec = self.precision_bits();
        let mut acc = Real::zero(prec);
        for (bi, ci) in self.b.iter().zip(&self.c) {
            acc += &(bi * &ci.powi(k as u32 - 1));
        }
        acc - Real::one(prec) / Real::from_i64(k as i64, prec)
    }

    fn measured_order(&self) -> usize {
        let tol = self.tolerance();
        (1..=2 * self.s + 1)
            .take_while(|&k| self.condition_residual(k).abs() <= tol)
            .count()
    }

    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(Real::to_f64).collect()
    }

    pub fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(Real::to_f64).collect()
    }

    pub fn to_json(&self, digits: usize) -> QuadRuleJson {
        QuadRuleJson {
            s: self.s,
            zeta: rational_to_decimal(&self.zeta, digits),
            c: self.c.iter().map(|x| x.to_decimal(digits)).collect(),
            b: self.b.iter().map(|x| x.to_decimal(digits)).collect(),
            order: self.order,
        }
    }
}

/// Serialized rule: decimals as strings so no digits are lost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadRuleJson {
    pub s: usize,
    pub zeta: String,
    pub c: Vec<String>,
    pub b: Vec<String>,
    pub order: usize,
}

impl QuadRuleJson {
    /// Rebuild a rule from its serialized form at the given precision.
    pub fn to_rule(&self, precision_digits: u32) -> Result<QuadRule> {
        let prec = bits_for_digits(precision_digits);
        if self.c.len() != self.s || self.b.len() != self.s {
            return Err(Error::DimensionMismatch {
                expected: self.s,
                got: self.c.len().min(self.b.len()),
            });
        }
        let parse = |v: &[String]| v.iter().map(|x| Real::parse(x, prec)).collect::<Result<Vec<_>>>();
        Ok(QuadRule {
            s: self.s,
            zeta: parse_rational(&self.zeta)?,
            c: parse(&self.c)?,
            b: parse(&self.b)?,
            order: self.order,
            precision_digits,
        })
    }
}

/// Exact decimal when the expansion terminates, otherwise `digits` significant digits.
pub fn rational_to_decimal(r: &BigRational, digits: usize) -> String {
    let mut den = r.denom().clone();
    let mut shift = 0usize;
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    for p in [&two, &five] {
        while (&den % p).is_zero() {
            den /= p;
            shift += 1;
        }
    }
    if !den.is_one() || shift > digits {
        return Real::from_rational(r, (digits as f64 * 3.33) as u32 + 16).to_decimal(digits);
    }
    let scaled = r * BigRational::from_integer(num_traits::pow(BigInt::from(10), shift));
    let n = scaled.to_integer();
    if shift == 0 {
        return n.to_string();
    }
    let neg = n.is_negative();
    let text = format!("{:0>width$}", n.abs(), width = shift + 1);
    let (int, frac) = text.split_at(text.len() - shift);
    let frac = frac.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Convenience for f64 diagnostics.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn close(a: &Real, b: &Real, log2_tol: f64) -> bool {
        let d = (a - b).abs();
        d.is_zero() || d.log2_abs() < log2_tol
    }

    #[test]
    fn midpoint_rule() {
        let r = quad_rule(1, &q(0, 1), 40).unwrap();
        assert_eq!(r.c[0].to_rational(), q(1, 2));
        assert_eq!(r.b[0].to_rational(), q(1, 1));
        assert_eq!(r.order, 2);
    }

    #[test]
    fn two_stage_gauss() {
        let r = quad_rule(2, &q(0, 1), 50).unwrap();
        let p = r.precision_bits();
        let root3_6 = Real::from_i64(3, p).sqrt() / Real::from_i64(6, p);
        let half = Real::parse("0.5", p).unwrap();
        assert!(close(&r.c[0], &(&half - &root3_6), -160.0));
        assert!(close(&r.c[1], &(&half + &root3_6), -160.0));
        assert!(close(&r.b[0], &half, -160.0));
        assert_eq!(r.order, 4);
    }

    #[test]
    fn radau_endpoints_exact() {
        let left = quad_rule(3, &q(-1, 1), 50).unwrap();
        assert!(left.c[0].is_zero());
        assert_eq!(left.order, 5);
        let right = quad_rule(3, &q(1, 1), 50).unwrap();
        assert_eq!(right.c[2].to_rational(), q(1, 1));
        let r2 = quad_rule(2, &q(-1, 1), 50).unwrap();
        assert!(close(&r2.c[1], &Real::parse("2/3", r2.precision_bits()).unwrap(), -160.0));
    }

    #[test]
    fn exterior_nodes_need_opt_in() {
        assert!(matches!(quad_rule(3, &q(2, 1), 50), Err(Error::RootLocation(_))));
        let r = quad_rule_in(3, &q(2, 1), 50, NodeDomain::RealLine).unwrap();
        assert!(r.c[2] > Real::one(r.precision_bits()));
        assert_eq!(r.order, 5);
        assert!(quad_rule(2, &q(5_000_000_000, 1), 50).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = quad_rule(3, &q(1, 2), 50).unwrap();
        let js = serde_json::to_string(&r.to_json(45)).unwrap();
        let back: QuadRuleJson = serde_json::from_str(&js).unwrap();
        let rr = back.to_rule(50).unwrap();
        assert_eq!(rr.zeta, q(1, 2));
        for (a, b) in rr.c.iter().zip(&r.c) {
            assert!(close(a, b, -140.0));
        }
    }

    #[test]
    fn decimal_forms_of_zeta() {
        assert_eq!(rational_to_decimal(&q(-1, 2), 10), "-0.5");
        assert_eq!(rational_to_decimal(&q(2, 1), 10), "2");
        assert_eq!(rational_to_decimal(&q(3, 40), 10), "0.075");
        assert_eq!(rational_to_decimal(&q(1, 3), 5), "3.3333e-1");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn rules_integrate_to_their_order(s in 1usize..5, num in -8i64..=8) {
            let zeta = q(num, 8);
            let r = quad_rule(s, &zeta, 40).unwrap();
            proptest::prop_assert!(r.order >= 2 * s - 1);
            proptest::prop_assert!(r.c.windows(2).all(|w| w[0] < w[1]));
            let tol = r.tolerance();
            for k in 1..=r.order {
                proptest::prop_assert!(r.condition_residual(k).abs() <= tol);
            }
        }
    }
}
