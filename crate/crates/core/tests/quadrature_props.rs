use avf_core::quadrature::{
    continuous_ip, discrete_ip, discrete_ip_exact, g_poly, gamma, gamma_rational, legendre, nu,
    quad_rule, QuadRule, UniPoly,
};
use avf_core::Real;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn close(a: &Real, b: &BigRational, rule: &QuadRule) -> bool {
    (a - &Real::from_rational(b, rule.precision_bits())).abs() <= rule.tolerance()
}

#[test]
fn gamma_values() {
    let g: Vec<i64> = (1..=3).map(|l| gamma(l).try_into().unwrap()).collect();
    assert_eq!(g, vec![2, 6, 20]);
    assert_eq!(legendre(3).leading(), gamma_rational(3));
}

#[test]
fn nu_constants() {
    assert_eq!(nu(1), rat(1, 2));
    assert_eq!(nu(2), rat(-1, 6));
    for p in 3..8 {
        assert_eq!(nu(p), rat(0, 1));
    }
}

#[test]
fn discrete_identities_near_the_middle() {
    // ⟨P_{s+r-1}, P_{s-r}⟩_D and ⟨G_{s+r}, P_{s-r}'⟩_D
    let g = gamma_rational;
    for s in 2..=5usize {
        for zeta in [rat(-1, 1), rat(-1, 2), rat(0, 1), rat(1, 2), rat(1, 1)] {
            let rule = quad_rule(s, &zeta, 40).unwrap();
            for r in 0..s {
                let want = g(s + r - 1) * g(s - r) / (g(s) * g(s - 1)) * &zeta / rat(2 * s as i64 - 1, 1);
                let got = discrete_ip(&legendre(s + r - 1), &legendre(s - r), &rule);
                assert!(close(&got, &want, &rule), "s={s} ζ={zeta} r={r}");
                assert_eq!(discrete_ip_exact(&legendre(s + r - 1), &legendre(s - r), s, &zeta), want);
                let want2 = rat((s - r) as i64, (s + r) as i64) * &want;
                let got2 = discrete_ip(&g_poly(s + r), &legendre(s - r).derivative(), &rule);
                assert!(close(&got2, &want2, &rule), "s={s} ζ={zeta} r={r}");
            }
        }
    }
}

#[test]
fn gauss_biorthogonality() {
    for s in 2..=5usize {
        let rule = quad_rule(s, &rat(0, 1), 40).unwrap();
        for r in 1..s {
            let base = discrete_ip_exact(&legendre(2 * s - r), &legendre(r), s, &rat(0, 1));
            let lhs = discrete_ip(&g_poly(2 * s - r + 1), &legendre(r).derivative(), &rule);
            assert!(close(&lhs, &(rat(r as i64, (2 * s - r + 1) as i64) * base), &rule));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rules_are_exact_below_their_order(
        s in 1usize..=4,
        zeta in prop::sample::select(vec![(-1i64, 1i64), (-1, 2), (0, 1), (1, 3), (1, 1)]),
        coeffs in proptest::collection::vec(-30i64..=30, 1..9),
    ) {
        let zeta = rat(zeta.0, zeta.1);
        let rule = quad_rule(s, &zeta, 40).unwrap();
        let mut c = coeffs;
        c.truncate(rule.order);
        let u = UniPoly::from_i64(&c);
        let got = discrete_ip(&u, &UniPoly::one(), &rule);
        prop_assert!(close(&got, &continuous_ip(&u, &UniPoly::one()), &rule));
        prop_assert_eq!(discrete_ip_exact(&u, &UniPoly::one(), s, &zeta), u.integrate_unit());
    }

    #[test]
    fn exact_and_numeric_inner_products_agree(
        s in 2usize..=4,
        a in proptest::collection::vec(-9i64..=9, 1..10),
        b in proptest::collection::vec(-9i64..=9, 1..10),
        num in -4i64..=4,
    ) {
        let zeta = rat(num, 4);
        if let Ok(rule) = quad_rule(s, &zeta, 40) {
            let (u, v) = (UniPoly::from_i64(&a), UniPoly::from_i64(&b));
            let exact = discrete_ip_exact(&u, &v, s, &zeta);
            let num = discrete_ip(&u, &v, &rule);
            let scale = Real::from_i64(1 + a.iter().chain(&b).map(|x| x.abs()).sum::<i64>().pow(2), rule.precision_bits());
            prop_assert!((num - Real::from_rational(&exact, rule.precision_bits())).abs() <= rule.tolerance() * scale);
        }
    }
}
