use avf_core::conditions::{
    build_m, build_p_tilde, default_betas, default_rank_tolerance, double_bush_poly_residual,
    expected_rank, kernel_rowsum, plain_matrix, proportionality, rank_kernel, rank_of_block,
    triple_bush_residual, uniqueness_sweep, RowsumKernel,
};
use avf_core::linalg::{rank_exact, Matrix};
use avf_core::quadrature::{
    continuous_ip, discrete_ip_exact, f_poly, g_poly, quad_rule, quad_rule_in, NodeDomain,
    QuadRule, UniPoly,
};
use avf_core::Real;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rule(s: usize, zeta: &BigRational) -> QuadRule {
    quad_rule(s, zeta, 50)
        .or_else(|_| quad_rule_in(s, zeta, 50, NodeDomain::RealLine))
        .unwrap()
}

fn random_matrix(s: usize, prec: u32, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(s, s, |_, _| Real::from_f64(rng.gen_range(-1.0..1.0), prec))
}

/// Polynomial vanishing at 0 with degree below `bound`.
fn poly_at_zero(coeffs: &[i64], bound: usize) -> UniPoly {
    let mut c = vec![0];
    c.extend(coeffs.iter().take(bound.saturating_sub(1)));
    UniPoly::from_i64(&c)
}

#[test]
fn ranks_agree_with_exact_arithmetic() {
    for (s, zeta, m) in [
        (2, rat(0, 1), 4),
        (3, rat(0, 1), 6),
        (4, rat(0, 1), 8),
        (3, rat(1, 2), 5),
        (4, rat(1, 1), 7),
        (3, rat(-1, 1), 5),
        (4, rat(-1, 1), 7),
        (3, rat(0, 1), 5),
        (4, rat(2, 1), 7),
    ] {
        let op = build_m(&rule(s, &zeta), m).unwrap();
        let want = expected_rank(s, &zeta, m).unwrap();
        assert_eq!(rank_exact(&op.exact_matrix()), want, "s={s} ζ={zeta}");
        let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
        assert_eq!(ra.rank, want);
        assert!(ra.kernel.all_checks_pass(), "{:?}", ra.kernel.checks);
    }
}

#[test]
fn odd_rows_beyond_s_vanish() {
    for s in 3..=5 {
        for zeta in [rat(-1, 1), rat(1, 2), rat(1, 1)] {
            let op = build_m(&rule(s, &zeta), 2 * s - 1).unwrap();
            for (row, &(p, q)) in op.exact_matrix().iter().zip(&op.pairs) {
                if p >= s + 1 {
                    assert!(row.iter().all(Zero::is_zero), "row ({p},{q}) nonzero");
                }
            }
        }
    }
}

#[test]
fn p_tilde_orthogonality() {
    for s in 3..=5usize {
        for zeta in [rat(-1, 2), rat(0, 1), rat(1, 2), rat(1, 1), rat(2, 1)] {
            let pt = build_p_tilde(&rule(s, &zeta)).unwrap().derivative();
            for r in 1..=s - 2 {
                assert!(discrete_ip_exact(&pt, &f_poly(s + r, s, &zeta), s, &zeta).is_zero());
            }
            assert!(continuous_ip(&pt, &g_poly(1)).is_zero());
            assert!(!continuous_ip(&pt, &g_poly(2)).is_zero());
        }
    }
}

#[test]
fn gauss_odd_kernel_contains_legendre_elements() {
    for s in 3..=5 {
        let op = build_m(&rule(s, &rat(0, 1)), 2 * s - 1).unwrap();
        let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
        let gl: Vec<_> = ra.kernel.checks.iter().filter(|c| c.name.starts_with("GL")).collect();
        assert_eq!(gl.len(), 2);
        assert!(gl.iter().all(|c| c.passed));
    }
}

#[test]
fn rowsum_direction_matches_printed_forms() {
    // s = 2: ((ζ-1)1 - 2ζc) b^T (I - 2C)
    for zeta in [rat(-1, 1), rat(-1, 2), rat(1, 2), rat(1, 1)] {
        let r = rule(2, &zeta);
        let op = build_m(&r, 3).unwrap();
        let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
        let RowsumKernel::Element { matrix, .. } = kernel_rowsum(&op, &ra.kernel).unwrap() else {
            panic!("expected a direction");
        };
        let prec = r.precision_bits();
        let z = Real::from_rational(&zeta, prec);
        let one = Real::one(prec);
        let two = Real::from_i64(2, prec);
        // (I - 2C) is diagonal, so the row factor is b_j (1 - 2 c_j)
        let n = Matrix::from_fn(2, 2, |i, j| {
            let u = &(&z - &one) - &(&(&two * &z) * &r.c[i]);
            &u * &(&r.b[j] * &(&one - &(&two * &r.c[j])))
        });
        let (mismatch, _) = proportionality(matrix.as_slice(), n.as_slice());
        assert!(mismatch.to_f64() < 1e-40, "ζ = {zeta}: {mismatch}");
    }
    // ζ = 0, s = 3: (P_0 - P_2)(c) b^T P_2'(C), in plain coordinates
    let r = rule(3, &rat(0, 1));
    let op = build_m(&r, 5).unwrap();
    let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
    let RowsumKernel::Element { alpha, .. } = kernel_rowsum(&op, &ra.kernel).unwrap() else {
        panic!("expected a direction");
    };
    let prec = r.precision_bits();
    let mut want = vec![Real::zero(prec); 9];
    want[1] = Real::one(prec);
    want[7] = -Real::one(prec);
    let (mismatch, _) = proportionality(&alpha, &want);
    assert!(mismatch.to_f64() < 1e-40);
    assert_eq!(rank_of_block(&alpha, 3, 50).unwrap(), 1);
    let _ = plain_matrix(&op, &alpha);
}

#[test]
fn residuals_scale_quadratically_for_two_stages() {
    for zeta in [rat(-1, 2), rat(1, 2), rat(1, 1)] {
        let rep = uniqueness_sweep(&rule(2, &zeta), 3, &default_betas()).unwrap();
        for f in &rep.fits {
            if f.expected_coeff != 0.0 {
                assert!(f.scaling_spread <= 1e-10, "{f:?}");
            }
        }
    }
}

#[test]
fn avf_is_a_fixed_point_of_every_sweep() {
    let r = rule(3, &rat(1, 2));
    let a = Matrix::outer(&r.c, &r.b);
    let g2 = g_poly(2);
    let res = triple_bush_residual(&a, &r, &g2, &g2, &UniPoly::x()).unwrap();
    assert!(res.abs() <= r.tolerance());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn double_bush_is_bilinear_and_antisymmetric(
        seed in any::<u64>(),
        p1 in proptest::collection::vec(-5i64..=5, 1..5),
        p2 in proptest::collection::vec(-5i64..=5, 1..5),
        q1 in proptest::collection::vec(-5i64..=5, 1..5),
        k in -4i64..=4,
    ) {
        let r = rule(3, &rat(0, 1));
        let prec = r.precision_bits();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(3, prec, &mut rng);
        let (pa, pb, qq) = (poly_at_zero(&p1, r.order), poly_at_zero(&p2, r.order), poly_at_zero(&q1, r.order));
        let hom = |p: &UniPoly, q: &UniPoly| double_bush_poly_residual(&a, &r, p, q).unwrap();
        let kr = BigRational::from_integer(k.into());
        let combo = &pa + &pb.scale(&kr);
        let lhs = hom(&combo, &qq);
        let rhs = hom(&pa, &qq) + Real::from_i64(k, prec) * hom(&pb, &qq);
        let tol = r.tolerance() * Real::from_i64(1000, prec);
        prop_assert!((lhs - rhs).abs() <= tol);
        prop_assert!((hom(&pa, &qq) + hom(&qq, &pa)).abs() <= tol);
        prop_assert!(hom(&pa, &pa).is_zero());
    }
}
