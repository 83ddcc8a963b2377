use num_rational::BigRational;

use super::families::node_polynomial;
use super::rule::QuadRule;
use super::unipoly::UniPoly;
use crate::error::{Error, Result};
use crate::real::Real;

/// `⟨u, v⟩_D = Σ b_i u(c_i) v(c_i)`.
pub fn discrete_ip(u: &UniPoly, v: &UniPoly, rule: &QuadRule) -> Real {
    let mut acc = Real::zero(rule.precision_bits());
    for (b, c) in rule.b.iter().zip(&rule.c) {
        acc += &(b * &(u.eval_real(c) * v.eval_real(c)));
    }
    acc
}

/// Exact value of the discrete inner product for the rule on the zeros of
/// `P_s - ζ P_{s-1}`.
///
/// Writing `uv = q (P_s - ζ P_{s-1}) + r` with `deg r < s`, the first term
/// vanishes at every node and the rule integrates `r` exactly, so
/// `⟨u, v⟩_D = ∫_0^1 r`.
pub fn discrete_ip_exact(u: &UniPoly, v: &UniPoly, s: usize, zeta: &BigRational) -> BigRational {
    (u * v).rem(&node_polynomial(s, zeta)).integrate_unit()
}

/// `∫_0^1 u v`.
pub fn continuous_ip(u: &UniPoly, v: &UniPoly) -> BigRational {
    (u * v).integrate_unit()
}

/// Coefficients of the node polynomial `ρ_s = Π (x - c_i)`, lowest first.
pub fn rho(rule: &QuadRule) -> Vec<Real> {
    let prec = rule.precision_bits();
    let mut coeffs = vec![Real::one(prec)];
    for c in &rule.c {
        let mut next = vec![Real::zero(prec); coeffs.len() + 1];
        for (k, a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= &(a * c);
        }
        coeffs = next;
    }
    coeffs
}

/// Residual of `⟨π_m, 1⟩_D = ⟨π_m, 1⟩ - ⟨ρ_s, θ⟩` for monic `π_m` of degree
/// equal to the rule's order and monic `θ` of degree `order - s`.
pub fn check_discip_lemma(rule: &QuadRule, pi_m: &UniPoly, theta: &UniPoly) -> Result<Real> {
    if !pi_m.is_monic() || !theta.is_monic() {
        return Err(Error::InvalidInput("π_m and θ must be monic".into()));
    }
    if pi_m.degree() != Some(rule.order) || theta.degree() != Some(rule.order - rule.s) {
        return Err(Error::InvalidInput(format!(
            "expected deg π_m = {} and deg θ = {}",
            rule.order,
            rule.order - rule.s
        )));
    }
    let prec = rule.precision_bits();
    let lhs = discrete_ip(pi_m, &UniPoly::one(), rule);
    let r = rho(rule);
    let mut rho_theta = Real::zero(prec);
    for (i, ri) in r.iter().enumerate() {
        for (j, tj) in theta.coeffs().iter().enumerate() {
            let t = ri * &Real::from_rational(tj, prec);
            rho_theta += &(t / Real::from_i64((i + j + 1) as i64, prec));
        }
    }
    let rhs = Real::from_rational(&pi_m.integrate_unit(), prec) - rho_theta;
    Ok((lhs - rhs).abs())
}
