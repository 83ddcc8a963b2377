//! Shifted Legendre polynomials on [0, 1] and the families built from them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::unipoly::UniPoly;

fn factorial(n: usize) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// Shifted Legendre polynomial `P_q` by Rodrigues' formula, `P_q(1) = 1`.
pub fn legendre(q: usize) -> UniPoly {
    let base = UniPoly::from_i64(&[0, -1, 1]); // x^2 - x = x(x - 1)
    let mut p = UniPoly::one();
    for _ in 0..q {
        p = &p * &base;
    }
    for _ in 0..q {
        p = p.derivative();
    }
    p.scale(&BigRational::new(BigInt::one(), factorial(q)))
}

/// Leading coefficient of `P_q`: `(2q)! / (q!)^2`.
pub fn gamma(q: usize) -> BigInt {
    let f = factorial(q);
    factorial(2 * q) / (&f * &f)
}

pub fn gamma_rational(q: usize) -> BigRational {
    BigRational::from_integer(gamma(q))
}

/// `G_q(x) = ∫_0^x P_{q-1}`.
pub fn g_poly(q: usize) -> UniPoly {
    assert!(q >= 1, "G_q is defined for q >= 1");
    legendre(q - 1).integral()
}

/// `R_l`: `P_l` below `s`, `P_s - ζ P_{s-1}` at `s`, and `R_s P_{l-s}` above.
pub fn r_poly(l: usize, s: usize, zeta: &BigRational) -> UniPoly {
    assert!(s >= 1, "stage count must be positive");
    if l < s {
        return legendre(l);
    }
    let rs = node_polynomial(s, zeta);
    if l == s {
        rs
    } else {
        &rs * &legendre(l - s)
    }
}

/// `F_q(x) = ∫_0^x R_{q-1}`.
pub fn f_poly(q: usize, s: usize, zeta: &BigRational) -> UniPoly {
    assert!(q >= 1, "F_q is defined for q >= 1");
    r_poly(q - 1, s, zeta).integral()
}

/// `P_s - ζ P_{s-1}`, whose zeros are the abscissae.
pub fn node_polynomial(s: usize, zeta: &BigRational) -> UniPoly {
    &legendre(s) - &legendre(s - 1).scale(zeta)
}

/// `ν_p = ∫_0^1 G_p`.
pub fn nu(p: usize) -> BigRational {
    g_poly(p).integrate_unit()
}
