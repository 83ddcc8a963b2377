//! Rank and null space of the double-bush operator, with the null space
//! rewritten in the rank-one factor form `U(c) b^T V'(C)` where possible.
//!
//! Kernel elements are stored as plain coordinates: an `s × s` block
//! `α_{kℓ}` against `P_{k-1}(c) b^T P_ℓ'(C)`.

use num_traits::Zero;
use serde::Serialize;

use super::operator::{build_m_with_basis, BasisKind, MOperator, Parity};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormalize, project_residual, rank_reveal, Matrix};
use crate::quadrature::{discrete_ip, legendre, UniPoly};
use crate::real::Real;

/// Rank threshold `10^(-digits/2)` on pivot ratios.
pub fn default_rank_tolerance(digits: u32) -> f64 {
    10f64.powf(-(digits as f64) / 2.0)
}

/// Absolute bound used for "maps to zero" and "lies in the span" checks:
/// `10^(-0.7 digits)`, i.e. `1e-35` at 50 digits.
pub fn residual_tolerance(digits: u32, prec: u32) -> Real {
    let e = (0.7 * digits as f64).floor() as i64;
    Real::parse(&format!("1e-{e}"), prec).expect("well-formed literal")
}

/// `U = Σ u_k P_{k-1}`, `V' = Σ v_ℓ P_ℓ'`, with `v_0 = -Σ v_ℓ`.
#[derive(Clone, Debug)]
pub struct RankOneFactors {
    pub u: Vec<Real>,
    pub v: Vec<Real>,
}

impl RankOneFactors {
    pub fn v0(&self) -> Real {
        let prec = self.v[0].precision();
        self.v.iter().fold(Real::zero(prec), |acc, x| acc - x)
    }

    pub fn alpha(&self) -> Vec<Real> {
        self.u
            .iter()
            .flat_map(|uk| self.v.iter().map(move |vl| uk * vl))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct KernelElement {
    pub label: String,
    /// Plain coordinates, row-major `s × s`.
    pub alpha: Vec<Real>,
    pub factors: Option<RankOneFactors>,
}

/// One named structural check and whether it held.
#[derive(Clone, Debug, Serialize)]
pub struct StructureCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub s: usize,
    /// Orthonormal kernel in plain coordinates.
    pub raw: Vec<Vec<Real>>,
    /// Structured elements; equal to `raw` when no ansatz applies.
    pub elements: Vec<KernelElement>,
    pub structured: bool,
    pub checks: Vec<StructureCheck>,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.raw.len()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct RankAnalysis {
    pub rank: usize,
    pub pivot_gap: (f64, f64),
    pub tol: f64,
    pub kernel: KernelBasis,
}

/// Rank of `M` by pivoted QR and its null space, post-processed into the
/// structured rank-one elements for the Gauss, Radau and generic odd cases.
pub fn rank_kernel(op: &MOperator, tol: f64) -> Result<RankAnalysis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("rank tolerance must be positive".into()));
    }
    let rr = rank_reveal(&op.matrix, tol)?;
    let raw: Vec<Vec<Real>> = orthonormalize(
        &rr.kernel.iter().map(|k| op.alpha_to_plain(k)).collect::<Vec<_>>(),
    );
    let plain = match op.basis {
        BasisKind::Plain => op.clone(),
        BasisKind::Modified => build_m_with_basis(&op.rule, op.m, BasisKind::Plain)?,
    };
    let kernel = structure_kernel(&plain, raw)?;
    Ok(RankAnalysis {
        rank: rr.rank,
        pivot_gap: rr.gap(),
        tol,
        kernel,
    })
}

fn check(name: impl Into<String>, value: &Real, bound: &Real) -> StructureCheck {
    StructureCheck {
        name: name.into(),
        value: value.to_f64(),
        passed: value.abs() <= *bound,
    }
}

fn unit(s: usize, i: usize, prec: u32) -> Vec<Real> {
    (0..s)
        .map(|k| if k == i { Real::one(prec) } else { Real::zero(prec) })
        .collect()
}

fn from_i64s(v: &[i64], s: usize, prec: u32) -> Vec<Real> {
    (0..s)
        .map(|k| Real::from_i64(v.get(k).copied().unwrap_or(0), prec))
        .collect()
}

fn n1_factors(s: usize, prec: u32) -> RankOneFactors {
    RankOneFactors {
        u: from_i64s(&[1, -1], s, prec),
        v: from_i64s(&[1], s, prec),
    }
}

/// `‖M α‖` for plain coordinates.
fn image_norm(plain: &MOperator, alpha: &[Real]) -> Real {
    norm(&plain.apply(alpha))
}

fn structure_kernel(plain: &MOperator, raw: Vec<Vec<Real>>) -> Result<KernelBasis> {
    let s = plain.s();
    let prec = plain.precision_bits();
    let digits = plain.rule.precision_digits;
    let eps = residual_tolerance(digits, prec);
    let zeta = &plain.rule.zeta;
    let minus_one = -num_rational::BigRational::from_integer(1.into());
    let mut checks = Vec::new();

    let elements: Option<Vec<KernelElement>> = match plain.parity {
        Parity::Even => Some(vec![KernelElement {
            label: "4N1".into(),
            alpha: n1_factors(s, prec).alpha(),
            factors: Some(n1_factors(s, prec)),
        }]),
        Parity::Odd if s >= 3 && *zeta == minus_one => {
            let mut els = vec![KernelElement {
                label: "4N1".into(),
                alpha: n1_factors(s, prec).alpha(),
                factors: Some(n1_factors(s, prec)),
            }];
            for i in 0..s {
                let mut v = vec![Real::zero(prec); s];
                v[s - 1] = Real::one(prec);
                v[s - 2] = -Real::one(prec);
                let f = RankOneFactors { u: unit(s, i, prec), v };
                els.push(KernelElement {
                    label: format!("P{}(c)b^T(P{s}'-P{}')", i, s - 1),
                    alpha: f.alpha(),
                    factors: Some(f),
                });
            }
            Some(els)
        }
        Parity::Odd if s >= 3 && raw.len() == 3 => {
            let gauss = zeta.is_zero();
            let at = |k: usize, l: usize| k * s + l;
            // type 2: U has u_2 = 0, V has v_1 = 0, normalized α_{1,s} = 1 (α_{1,2} at ζ = 0)
            let mut eq2: Vec<(Vec<(usize, i64)>, i64)> = Vec::new();
            for l in 0..s {
                eq2.push((vec![(at(1, l), 1)], 0));
            }
            for k in 0..s {
                eq2.push((vec![(at(k, 0), 1)], 0));
            }
            let n2 = if gauss { at(0, 1) } else { at(0, s - 1) };
            eq2.push((vec![(n2, 1)], 1));
            // type 3: u_1 = 0, every row sums to zero (v_0 = 0), α_{2,s} = 1 (α_{2,1} at ζ = 0)
            let mut eq3: Vec<(Vec<(usize, i64)>, i64)> = Vec::new();
            for l in 0..s {
                eq3.push((vec![(at(0, l), 1)], 0));
            }
            for k in 0..s {
                eq3.push(((0..s).map(|l| (at(k, l), 1)).collect(), 0));
            }
            let n3 = if gauss { at(1, 0) } else { at(1, s - 1) };
            eq3.push((vec![(n3, 1)], 1));

            let (a2, r2) = constrained_combination(&raw, &eq2, prec)?;
            let (a3, r3) = constrained_combination(&raw, &eq3, prec)?;
            checks.push(check("type-2 constraints", &r2, &eps));
            checks.push(check("type-3 constraints", &r3, &eps));
            let col2 = if gauss { 1 } else { s - 1 };
            let col3 = if gauss { 0 } else { s - 1 };
            let f2 = factor_at(&a2, s, 0, col2);
            let f3 = factor_at(&a3, s, 1, col3);
            let f1 = n1_factors(s, prec);
            // rank-one: α - u v^T
            for (name, a, f) in [("type-2 rank one", &a2, &f2), ("type-3 rank one", &a3, &f3)] {
                let diff: Vec<Real> = a.iter().zip(f.alpha()).map(|(x, y)| x - &y).collect();
                checks.push(check(name, &norm(&diff), &eps));
            }
            checks.push(check("u1(2) = 1", &(&f2.u[0] - &Real::one(prec)), &eps));
            checks.push(check("u2(2) = 0", &f2.u[1], &eps));
            checks.push(check("v1(2) = 0", &f2.v[0], &eps));
            checks.push(check("u1(3) = 0", &f3.u[0], &eps));
            checks.push(check("v0(3) = 0", &f3.v0(), &eps));
            // U3 = U2 - U1
            let du: Vec<Real> = (0..s).map(|k| &f3.u[k] - &(&f2.u[k] - &f1.u[k])).collect();
            checks.push(check("U3 = U2 - U1", &norm(&du), &eps));
            if !gauss {
                let dv: Vec<Real> = (0..s)
                    .map(|l| &f3.v[l] - &(&f2.v[l] + &(&f3.v[0] * &f1.v[l])))
                    .collect();
                checks.push(check("V3 = V2 + v1(3) V1", &norm(&dv), &eps));
            } else {
                let gl = [
                    ("GL u2 v2", from_i64s(&[1, 0, -1], s, prec), from_i64s(&[0, 1], s, prec)),
                    ("GL u3 v3", from_i64s(&[0, 1, -1], s, prec), from_i64s(&[1, -1], s, prec)),
                ];
                for (name, u, v) in gl {
                    let a = RankOneFactors { u, v }.alpha();
                    let r = project_residual(&raw, &a) / norm(&a);
                    checks.push(check(format!("{name} in kernel"), &r, &eps));
                }
            }
            Some(vec![
                KernelElement { label: "4N1".into(), alpha: f1.alpha(), factors: Some(f1) },
                KernelElement { label: "N2".into(), alpha: a2, factors: Some(f2) },
                KernelElement { label: "N3".into(), alpha: a3, factors: Some(f3) },
            ])
        }
        _ => None,
    };

    let structured = elements.is_some();
    let elements = match elements {
        Some(els) => {
            if els.len() != raw.len() {
                checks.push(StructureCheck {
                    name: format!("structured count {} = kernel dim {}", els.len(), raw.len()),
                    value: els.len() as f64 - raw.len() as f64,
                    passed: false,
                });
            }
            for el in &els {
                let scale = norm(&el.alpha);
                checks.push(check(
                    format!("M({}) = 0", el.label),
                    &(image_norm(plain, &el.alpha) / &scale),
                    &eps,
                ));
                checks.push(check(
                    format!("{} in computed kernel", el.label),
                    &(project_residual(&raw, &el.alpha) / &scale),
                    &eps,
                ));
            }
            let vecs: Vec<Vec<Real>> = els.iter().map(|e| e.alpha.clone()).collect();
            let indep = independent(&vecs, digits)?;
            checks.push(StructureCheck {
                name: "elements linearly independent".into(),
                value: indep as u8 as f64,
                passed: indep,
            });
            els
        }
        None => raw
            .iter()
            .enumerate()
            .map(|(i, a)| KernelElement {
                label: format!("K{}", i + 1),
                alpha: a.clone(),
                factors: None,
            })
            .collect(),
    };

    if plain.parity == Parity::Odd && *zeta != minus_one && !raw.is_empty() {
        for (i, a) in sample_combinations(&raw, prec).iter().enumerate() {
            let r = rank_of_block(a, s, digits)?;
            checks.push(StructureCheck {
                name: format!("rank(random kernel element {}) <= 2", i + 1),
                value: r as f64,
                passed: r <= 2,
            });
        }
    }

    Ok(KernelBasis { s, raw, elements, structured, checks })
}

fn independent(vecs: &[Vec<Real>], digits: u32) -> Result<bool> {
    if vecs.is_empty() {
        return Ok(true);
    }
    let n = vecs.len();
    let m = Matrix::from_fn(vecs[0].len(), n, |i, j| vecs[j][i].clone());
    Ok(rank_reveal(&m, default_rank_tolerance(digits))?.rank == n)
}

/// Matrix rank of an `s × s` coordinate block. `A = U α W^T` with invertible
/// `U`, `W`, so this is the rank of the tableau matrix itself.
pub fn rank_of_block(alpha: &[Real], s: usize, digits: u32) -> Result<usize> {
    let m = Matrix::from_fn(s, s, |i, j| alpha[i * s + j].clone());
    Ok(rank_reveal(&m, default_rank_tolerance(digits))?.rank)
}

/// A few fixed pseudo-random combinations of the kernel basis.
fn sample_combinations(raw: &[Vec<Real>], prec: u32) -> Vec<Vec<Real>> {
    let weights: [[i64; 4]; 3] = [[3, -7, 5, 2], [-11, 4, 9, -1], [6, 13, -8, 5]];
    weights
        .iter()
        .map(|w| {
            let mut acc = vec![Real::zero(prec); raw[0].len()];
            for (k, v) in raw.iter().enumerate() {
                let c = Real::from_i64(w[k % 4] + k as i64, prec);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += &(&c * x);
                }
            }
            acc
        })
        .collect()
}

/// Least-squares combination `Σ x_i K_i` of the kernel basis satisfying the
/// sparse linear constraints `Σ coef · α[idx] = rhs`; returns the element and
/// the constraint residual norm.
fn constrained_combination(
    raw: &[Vec<Real>],
    eqs: &[(Vec<(usize, i64)>, i64)],
    prec: u32,
) -> Result<(Vec<Real>, Real)> {
    let n = raw.len();
    let c = Matrix::from_fn(eqs.len(), n, |r, i| {
        eqs[r].0.iter().fold(Real::zero(prec), |acc, &(idx, coef)| {
            acc + &raw[i][idx] * &Real::from_i64(coef, prec)
        })
    });
    let d: Vec<Real> = eqs.iter().map(|e| Real::from_i64(e.1, prec)).collect();
    let ct = c.transpose();
    let x = (&ct * &c).solve(&ct.mul_vec(&d))?;
    let fit = c.mul_vec(&x);
    let res: Vec<Real> = fit.iter().zip(&d).map(|(a, b)| a - b).collect();
    let mut alpha = vec![Real::zero(prec); raw[0].len()];
    for (xi, v) in x.iter().zip(raw) {
        for (a, y) in alpha.iter_mut().zip(v) {
            *a += &(xi * y);
        }
    }
    Ok((alpha, norm(&res)))
}

/// Rank-one factors with `U` normalised at `u_row = 1`: `v` is row `row` and
/// `u` is column `col` divided by `α[row, col]`.
fn factor_at(alpha: &[Real], s: usize, row: usize, col: usize) -> RankOneFactors {
    let pivot = alpha[row * s + col].clone();
    let v: Vec<Real> = (0..s).map(|l| alpha[row * s + l].clone()).collect();
    let u: Vec<Real> = (0..s).map(|k| &alpha[k * s + col] / &pivot).collect();
    RankOneFactors { u, v }
}

/// Rank-one factors normalised on the largest entry.
pub fn rank_one_factors(alpha: &[Real], s: usize) -> RankOneFactors {
    let (idx, _) = alpha
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().cmp(&b.1.abs()))
        .expect("non-empty block");
    factor_at(alpha, s, idx / s, idx % s)
}

/// Kernel element with zero row sums, if the intersection is nontrivial.
#[derive(Clone, Debug)]
pub enum RowsumKernel {
    /// Only the zero matrix: uniqueness already follows from the linear conditions.
    Trivial,
    /// Plain coordinates scaled so the largest entry is 1, and the tableau matrix.
    Element { alpha: Vec<Real>, matrix: Matrix },
}

/// Intersect `ker M` with `{N : N 1 = 0}`.
///
/// `N 1 = U α W^T 1` and `(W^T 1)_ℓ = ⟨P_ℓ', 1⟩_D`, so the constraint is
/// `α w = 0` on plain coordinates.
pub fn kernel_rowsum(plain: &MOperator, kernel: &KernelBasis) -> Result<RowsumKernel> {
    let s = plain.s();
    let prec = plain.precision_bits();
    let digits = plain.rule.precision_digits;
    if kernel.raw.is_empty() {
        return Ok(RowsumKernel::Trivial);
    }
    let w: Vec<Real> = (1..=s)
        .map(|l| discrete_ip(&legendre(l).derivative(), &UniPoly::one(), &plain.rule))
        .collect();
    let c = Matrix::from_fn(s, kernel.raw.len(), |k, i| {
        dot(&kernel.raw[i][k * s..(k + 1) * s], &w)
    });
    let rr = rank_reveal(&c, default_rank_tolerance(digits))?;
    match rr.kernel.len() {
        0 => Ok(RowsumKernel::Trivial),
        1 => {
            let x = &rr.kernel[0];
            let mut alpha = vec![Real::zero(prec); s * s];
            for (xi, v) in x.iter().zip(&kernel.raw) {
                for (a, y) in alpha.iter_mut().zip(v) {
                    *a += &(xi * y);
                }
            }
            let big = alpha
                .iter()
                .max_by(|a, b| a.abs().cmp(&b.abs()))
                .cloned()
                .filter(|x| !x.is_zero())
                .ok_or_else(|| Error::Structure("zero row-sum element vanished".into()))?;
            let alpha: Vec<Real> = alpha.iter().map(|a| a / &big).collect();
            let matrix = plain_matrix(plain, &alpha);
            Ok(RowsumKernel::Element { alpha, matrix })
        }
        d => Err(Error::Structure(format!(
            "zero row-sum part of the kernel has dimension {d}, expected at most 1"
        ))),
    }
}

/// `Σ α_{kℓ} P_{k-1}(c) b^T P_ℓ'(C)` regardless of the operator's own basis.
pub fn plain_matrix(op: &MOperator, alpha: &[Real]) -> Matrix {
    let s = op.s();
    let c = &op.rule.c;
    let u = Matrix::from_fn(s, s, |i, k| legendre(k).eval_real(&c[i]));
    let w = Matrix::from_fn(s, s, |j, l| {
        &op.rule.b[j] * &legendre(l + 1).derivative().eval_real(&c[j])
    });
    let a = Matrix::from_fn(s, s, |k, l| alpha[k * s + l].clone());
    &(&u * &a) * &w.transpose()
}

/// `‖x - λ y‖ / ‖x‖` for the best `λ`, together with `λ`.
pub fn proportionality(x: &[Real], y: &[Real]) -> (Real, Real) {
    let lambda = dot(x, y) / dot(y, y);
    let diff: Vec<Real> = x.iter().zip(y).map(|(a, b)| a - &(&lambda * b)).collect();
    (norm(&diff) / norm(x), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::operator::build_m;
    use crate::quadrature::quad_rule;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn gauss_even_kernel_is_n1() {
        let rule = quad_rule(3, &q(0, 1), 50).unwrap();
        let op = build_m(&rule, 6).unwrap();
        let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
        assert_eq!(ra.rank, 8);
        assert_eq!(ra.kernel.dim(), 1);
        assert!(ra.kernel.all_checks_pass(), "{:?}", ra.kernel.checks);
        assert!(matches!(kernel_rowsum(&op, &ra.kernel).unwrap(), RowsumKernel::Trivial));
    }

    #[test]
    fn odd_generic_structure() {
        let rule = quad_rule(3, &q(1, 2), 50).unwrap();
        let op = build_m(&rule, 5).unwrap();
        let ra = rank_kernel(&op, default_rank_tolerance(50)).unwrap();
        assert_eq!(ra.rank, 6);
        assert!(ra.kernel.structured);
        assert!(ra.kernel.all_checks_pass(), "{:?}", ra.kernel.checks);
    }
}
