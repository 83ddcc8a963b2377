//! Shifted Legendre machinery on `[0, 1]` and quadrature rules whose
//! abscissae are the zeros of `P_s - ζ P_{s-1}` (ζ = 0 Gauss, ζ = ±1 Radau).

mod families;
mod inner;
mod rule;
mod unipoly;

pub use families::{f_poly, g_poly, gamma, gamma_rational, legendre, node_polynomial, nu, r_poly};
pub use inner::{check_discip_lemma, continuous_ip, discrete_ip, discrete_ip_exact, rho};
pub use rule::{
    quad_rule, quad_rule_in, rational_to_decimal, rational_to_f64, NodeDomain, QuadRule,
    QuadRuleJson,
};
pub use unipoly::{count_roots, sturm_sequence, UniPoly};
