//! Double, triple and asymmetric bush residuals on a tableau `(A, b, c)`.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::quadrature::{QuadRule, UniPoly};
use crate::real::Real;

/// `p(c_i)` for every node.
pub fn on_nodes(p: &UniPoly, c: &[Real]) -> Vec<Real> {
    c.iter().map(|x| p.eval_real(x)).collect()
}

pub(crate) fn hadamard(x: &[Real], y: &[Real]) -> Vec<Real> {
    x.iter().zip(y).map(|(a, b)| a * b).collect()
}

fn check_square(a: &Matrix, rule: &QuadRule) -> Result<()> {
    if a.nrows() != rule.s || a.ncols() != rule.s {
        return Err(Error::DimensionMismatch {
            expected: rule.s,
            got: a.nrows(),
        });
    }
    Ok(())
}

fn rat(prec: u32, r: &BigRational) -> Real {
    Real::from_rational(r, prec)
}

/// `p b^T C^{p-1} A c^q - q b^T C^{q-1} A c^p - (1/(q+1) - 1/(p+1))`.
pub fn double_bush_residual(a: &Matrix, rule: &QuadRule, p: usize, q: usize) -> Result<Real> {
    if p < 1 || p >= q || q + 1 > rule.order {
        return Err(Error::InvalidInput(format!(
            "double bush indices need 1 <= p < q <= {} (got p = {p}, q = {q})",
            rule.order.saturating_sub(1)
        )));
    }
    double_bush_poly_residual(a, rule, &UniPoly::monomial(p), &UniPoly::monomial(q))
}

/// `b^T P'(C) A Q(c) - b^T Q'(C) A P(c) - (P(1) ∫Q - Q(1) ∫P)` for `P(0) = Q(0) = 0`.
pub fn double_bush_poly_residual(
    a: &Matrix,
    rule: &QuadRule,
    p: &UniPoly,
    q: &UniPoly,
) -> Result<Real> {
    check_square(a, rule)?;
    let zero = BigRational::zero();
    if !p.eval(&zero).is_zero() || !q.eval(&zero).is_zero() {
        return Err(Error::InvalidInput("P and Q must vanish at 0".into()));
    }
    let bound = rule.order.saturating_sub(1);
    if p.degree().unwrap_or(0) > bound || q.degree().unwrap_or(0) > bound {
        return Err(Error::InvalidInput(format!(
            "P and Q must have degree at most {bound}"
        )));
    }
    let prec = rule.precision_bits();
    let c = &rule.c;
    let ap = a.mul_vec(&on_nodes(p, c));
    let aq = a.mul_vec(&on_nodes(q, c));
    let lhs = dot(&hadamard(&rule.b, &on_nodes(&p.derivative(), c)), &aq)
        - dot(&hadamard(&rule.b, &on_nodes(&q.derivative(), c)), &ap);
    let one = BigRational::from_integer(1.into());
    let w = p.eval(&one) * q.integrate_unit() - q.eval(&one) * p.integrate_unit();
    Ok(lhs - rat(prec, &w))
}

/// Triple bush residual
/// `b^T P'(C) A R(C) A Q(c) + b^T Q'(C) A R(C) A P(c) - P(1) b^T R(C) A Q(c)
///  - Q(1) b^T R(C) A P(c) - b^T R'(C) (A Q(c) ⊙ A P(c)) + R(1) ∫P ∫Q`.
pub fn triple_bush_residual(
    a: &Matrix,
    rule: &QuadRule,
    p: &UniPoly,
    q: &UniPoly,
    r: &UniPoly,
) -> Result<Real> {
    check_square(a, rule)?;
    let zero = BigRational::zero();
    if !p.eval(&zero).is_zero() || !q.eval(&zero).is_zero() {
        return Err(Error::InvalidInput("P and Q must vanish at 0".into()));
    }
    let bound = rule.order.saturating_sub(1);
    let deg = |x: &UniPoly| x.degree().unwrap_or(0);
    if deg(p) > bound || deg(q) > bound || deg(r) + 1 > bound {
        return Err(Error::InvalidInput(format!(
            "need deg P, deg Q <= {bound} and deg R <= {}",
            bound.saturating_sub(1)
        )));
    }
    let prec = rule.precision_bits();
    let c = &rule.c;
    let b = &rule.b;
    let one = BigRational::from_integer(1.into());
    let rc = on_nodes(r, c);
    let ap = a.mul_vec(&on_nodes(p, c));
    let aq = a.mul_vec(&on_nodes(q, c));
    let arq = a.mul_vec(&hadamard(&rc, &aq));
    let arp = a.mul_vec(&hadamard(&rc, &ap));
    let bp = hadamard(b, &on_nodes(&p.derivative(), c));
    let bq = hadamard(b, &on_nodes(&q.derivative(), c));
    let br = hadamard(b, &rc);
    let brp = hadamard(b, &on_nodes(&r.derivative(), c));
    let mut acc = dot(&bp, &arq) + dot(&bq, &arp);
    acc -= &(rat(prec, &p.eval(&one)) * dot(&br, &aq));
    acc -= &(rat(prec, &q.eval(&one)) * dot(&br, &ap));
    acc -= &dot(&brp, &hadamard(&aq, &ap));
    let tail = r.eval(&one) * p.integrate_unit() * q.integrate_unit();
    Ok(acc + rat(prec, &tail))
}

/// Asymmetric bush residual
/// `b^T (Ac)^q - q b^T A C (Ac)^{q-1} + q b^T C (Ac)^{q-1} - (1/2)^q`.
pub fn asym_bush_residual(a: &Matrix, rule: &QuadRule, q: usize) -> Result<Real> {
    check_square(a, rule)?;
    if q < 1 || q + 1 > rule.order {
        return Err(Error::InvalidInput(format!(
            "asymmetric bush index must satisfy 1 <= q <= {}",
            rule.order.saturating_sub(1)
        )));
    }
    let prec = rule.precision_bits();
    let c = &rule.c;
    let b = &rule.b;
    let ac = a.mul_vec(c);
    let pow = |k: usize| -> Vec<Real> { ac.iter().map(|x| x.powi(k as u32)).collect() };
    let acq1 = pow(q - 1);
    let qr = Real::from_i64(q as i64, prec);
    let mut acc = dot(b, &pow(q));
    acc -= &(&qr * &dot(b, &a.mul_vec(&hadamard(c, &acq1))));
    acc += &(&qr * &dot(&hadamard(b, c), &acq1));
    let half_q = Real::one(prec) / Real::from_i64(1i64 << q, prec);
    Ok(acc - half_q)
}
