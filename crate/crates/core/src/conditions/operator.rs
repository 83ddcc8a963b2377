//! The double-bush conditions as a linear map on tableau coordinates.
//!
//! A Butcher matrix is written `A = Σ α_{kℓ} U_k(c) b^T V_ℓ'(C)` with
//! `U_k = P_{k-1}` and `V_ℓ` either `P_ℓ` or, in the odd case, the modified
//! family where `P_s` is replaced by `P̃_s` (and `P_2` by `P_s` when ζ = 0).
//! Each condition pair `(p, q)` becomes the row
//! `⟨P', U_k⟩_D ⟨V_ℓ', Q⟩_D - ⟨Q', U_k⟩_D ⟨V_ℓ', P⟩_D` against the right side
//! `P(1) ∫Q - Q(1) ∫P`, with `P, Q` the `G` family (even) or `F` family (odd).

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::bush::{double_bush_poly_residual, on_nodes};
use crate::error::{Error, Result};
use crate::linalg::{solve_exact, Matrix};
use crate::quadrature::{
    discrete_ip, discrete_ip_exact, f_poly, g_poly, legendre, QuadRule, UniPoly,
};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `m = 2s`, Gauss nodes.
    Even,
    /// `m = 2s - 1`.
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Plain,
    Modified,
}

#[derive(Clone, Debug)]
pub struct MOperator {
    pub rule: QuadRule,
    pub m: usize,
    pub parity: Parity,
    pub basis: BasisKind,
    /// Condition polynomials, index `p - 1` holds `G_p` or `F_p`.
    pub cond_polys: Vec<UniPoly>,
    /// Row labels `(p, q)`, `1 <= p < q <= m - 1`.
    pub pairs: Vec<(usize, usize)>,
    /// `U_k`, `k = 1..s`.
    pub u_basis: Vec<UniPoly>,
    /// `V_ℓ'`, `ℓ = 1..s`.
    pub v_basis: Vec<UniPoly>,
    /// Coefficients of each `V_ℓ'` over `P_1', ..., P_s'`.
    pub v_transform: Vec<Vec<BigRational>>,
    /// Rows by condition pair, columns `k * s + ℓ` (zero based).
    pub matrix: Matrix,
    pub rhs: Vec<Real>,
}

/// Assemble `M` for `m = 2s` (requires ζ = 0) or `m = 2s - 1`.
///
/// The odd case uses the modified basis for `s >= 3` and the plain Legendre
/// basis for `s = 2`, where the replacement indices collide.
pub fn build_m(rule: &QuadRule, m: usize) -> Result<MOperator> {
    let s = rule.s;
    let parity = if m == 2 * s {
        Parity::Even
    } else if m + 1 == 2 * s {
        Parity::Odd
    } else {
        return Err(Error::InvalidInput(format!(
            "m must be 2s = {} or 2s - 1 = {} (got {m})",
            2 * s,
            2 * s - 1
        )));
    };
    let basis = if parity == Parity::Odd && s >= 3 {
        BasisKind::Modified
    } else {
        BasisKind::Plain
    };
    build_m_with_basis(rule, m, basis)
}

pub fn build_m_with_basis(rule: &QuadRule, m: usize, basis: BasisKind) -> Result<MOperator> {
    let s = rule.s;
    if s < 2 {
        return Err(Error::InvalidInput("the double bush operator needs s >= 2".into()));
    }
    let parity = match m {
        _ if m == 2 * s => Parity::Even,
        _ if m + 1 == 2 * s => Parity::Odd,
        _ => {
            return Err(Error::InvalidInput(format!(
                "m must be 2s or 2s - 1 (got m = {m}, s = {s})"
            )))
        }
    };
    if parity == Parity::Even && !rule.zeta.is_zero() {
        return Err(Error::InvalidInput(
            "the even case m = 2s requires Gauss nodes (ζ = 0)".into(),
        ));
    }
    if rule.order < m {
        return Err(Error::InvalidInput(format!(
            "rule order {} is below m = {m}",
            rule.order
        )));
    }
    let cond_polys: Vec<UniPoly> = (1..m)
        .map(|p| match parity {
            Parity::Even => g_poly(p),
            Parity::Odd => f_poly(p, s, &rule.zeta),
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (1..m)
        .flat_map(|p| (p + 1..m).map(move |q| (p, q)))
        .collect();
    let u_basis: Vec<UniPoly> = (0..s).map(legendre).collect();
    let v_transform = match basis {
        BasisKind::Plain => identity_transform(s),
        BasisKind::Modified => modified_transform(rule)?,
    };
    let v_basis: Vec<UniPoly> = v_transform
        .iter()
        .map(|row| {
            row.iter().enumerate().fold(UniPoly::zero(), |acc, (j, coef)| {
                &acc + &legendre(j + 1).derivative().scale(coef)
            })
        })
        .collect();

    let prec = rule.precision_bits();
    let derivs: Vec<UniPoly> = cond_polys.iter().map(UniPoly::derivative).collect();
    // ⟨P_p', U_k⟩_D and ⟨V_ℓ', P_p⟩_D for all p
    let du: Vec<Vec<Real>> = derivs
        .iter()
        .map(|d| u_basis.iter().map(|u| discrete_ip(d, u, rule)).collect())
        .collect();
    let vp: Vec<Vec<Real>> = cond_polys
        .iter()
        .map(|p| v_basis.iter().map(|v| discrete_ip(v, p, rule)).collect())
        .collect();
    let mut matrix = Matrix::zeros(pairs.len(), s * s, prec);
    let mut rhs = Vec::with_capacity(pairs.len());
    let one = BigRational::one();
    for (row, &(p, q)) in pairs.iter().enumerate() {
        let (ip, iq) = (p - 1, q - 1);
        for k in 0..s {
            for l in 0..s {
                matrix[(row, k * s + l)] = &du[ip][k] * &vp[iq][l] - &du[iq][k] * &vp[ip][l];
            }
        }
        let (pp, qq) = (&cond_polys[ip], &cond_polys[iq]);
        let w = pp.eval(&one) * qq.integrate_unit() - qq.eval(&one) * pp.integrate_unit();
        rhs.push(Real::from_rational(&w, prec));
    }
    Ok(MOperator {
        rule: rule.clone(),
        m,
        parity,
        basis,
        cond_polys,
        pairs,
        u_basis,
        v_basis,
        v_transform,
        matrix,
        rhs,
    })
}

fn identity_transform(s: usize) -> Vec<Vec<BigRational>> {
    (0..s)
        .map(|i| {
            (0..s)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect()
}

fn modified_transform(rule: &QuadRule) -> Result<Vec<Vec<BigRational>>> {
    let s = rule.s;
    let mut t = identity_transform(s);
    t[s - 1] = p_tilde_coefficients(rule)?;
    if rule.zeta.is_zero() {
        t[1] = (0..s)
            .map(|j| if j == s - 1 { BigRational::one() } else { BigRational::zero() })
            .collect();
    }
    Ok(t)
}

/// Coefficients `v_ℓ` of `P̃_s = Σ v_ℓ P_ℓ`, normalised to `v_1 = 1`.
///
/// Solves `Γ v = 0` where row `i <= s-2` is `⟨F_{s+i}, P_j'⟩_D` and the last
/// row is `⟨G_1, P_j'⟩_D`. For ζ = -1 that system degenerates and
/// `P_s - P_{s-1}` is used instead.
pub fn p_tilde_coefficients(rule: &QuadRule) -> Result<Vec<BigRational>> {
    let s = rule.s;
    let zeta = &rule.zeta;
    if s < 2 {
        return Err(Error::InvalidInput("P̃_s needs s >= 2".into()));
    }
    if *zeta == -BigRational::one() {
        let mut v = vec![BigRational::zero(); s];
        v[s - 1] = BigRational::one();
        v[s - 2] = -BigRational::one();
        return Ok(v);
    }
    let dp: Vec<UniPoly> = (1..=s).map(|j| legendre(j).derivative()).collect();
    let mut gamma: Vec<Vec<BigRational>> = (1..=s - 2)
        .map(|i| {
            let f = f_poly(s + i, s, zeta);
            dp.iter().map(|d| discrete_ip_exact(&f, d, s, zeta)).collect()
        })
        .collect();
    gamma.push(dp.iter().map(|d| discrete_ip_exact(&g_poly(1), d, s, zeta)).collect());
    // move the v_1 column to the right-hand side
    let bar: Vec<Vec<BigRational>> = gamma.iter().map(|r| r[1..].to_vec()).collect();
    let rhs: Vec<BigRational> = gamma.iter().map(|r| -r[0].clone()).collect();
    let rest = solve_exact(&bar, &rhs).ok_or_else(|| {
        Error::Singular(format!(
            "reduced Γ matrix is singular for s = {s}, ζ = {zeta}; P̃_s undefined"
        ))
    })?;
    let mut v = vec![BigRational::one()];
    v.extend(rest);
    let dpt = v
        .iter()
        .zip(&dp)
        .fold(UniPoly::zero(), |acc, (c, d)| &acc + &d.scale(c));
    let ip = |u: &UniPoly| discrete_ip_exact(&dpt, u, s, zeta);
    let orthogonal = (1..=s - 2).all(|r| ip(&f_poly(s + r, s, zeta)).is_zero())
        && ip(&g_poly(1)).is_zero();
    if !orthogonal || ip(&g_poly(2)).is_zero() {
        return Err(Error::Structure(format!(
            "P̃_s for s = {s}, ζ = {zeta} fails its orthogonality properties (coefficients {v:?})"
        )));
    }
    Ok(v)
}

/// `P̃_s` as a polynomial.
pub fn build_p_tilde(rule: &QuadRule) -> Result<UniPoly> {
    let v = p_tilde_coefficients(rule)?;
    Ok(v.iter()
        .enumerate()
        .fold(UniPoly::zero(), |acc, (j, c)| &acc + &legendre(j + 1).scale(c)))
}

impl MOperator {
    pub fn s(&self) -> usize {
        self.rule.s
    }

    pub fn precision_bits(&self) -> u32 {
        self.rule.precision_bits()
    }

    /// Same matrix assembled in exact arithmetic from the remainder formula
    /// for discrete inner products.
    pub fn exact_matrix(&self) -> Vec<Vec<BigRational>> {
        let s = self.s();
        let zeta = &self.rule.zeta;
        let ip = |u: &UniPoly, v: &UniPoly| discrete_ip_exact(u, v, s, zeta);
        self.pairs
            .iter()
            .map(|&(p, q)| {
                let (pp, qq) = (&self.cond_polys[p - 1], &self.cond_polys[q - 1]);
                let (dp, dq) = (pp.derivative(), qq.derivative());
                let mut row = Vec::with_capacity(s * s);
                for u in &self.u_basis {
                    for v in &self.v_basis {
                        row.push(ip(&dp, u) * ip(v, qq) - ip(&dq, u) * ip(v, pp));
                    }
                }
                row
            })
            .collect()
    }

    /// `U_k(c_i)` as an `s × s` matrix.
    pub fn u_matrix(&self) -> Matrix {
        let c = &self.rule.c;
        let cols: Vec<Vec<Real>> = self.u_basis.iter().map(|u| on_nodes(u, c)).collect();
        Matrix::from_fn(self.s(), self.s(), |i, k| cols[k][i].clone())
    }

    /// `b_j V_ℓ'(c_j)` as an `s × s` matrix (rows `j`, columns `ℓ`).
    pub fn w_matrix(&self) -> Matrix {
        let c = &self.rule.c;
        let cols: Vec<Vec<Real>> = self.v_basis.iter().map(|v| on_nodes(v, c)).collect();
        Matrix::from_fn(self.s(), self.s(), |j, l| &self.rule.b[j] * &cols[l][j])
    }

    /// `A = U α W^T` for coordinates in this operator's basis.
    pub fn matrix_from_alpha(&self, alpha: &[Real]) -> Matrix {
        let s = self.s();
        let a = Matrix::from_fn(s, s, |k, l| alpha[k * s + l].clone());
        &(&self.u_matrix() * &a) * &self.w_matrix().transpose()
    }

    /// Coordinates of `A` in this operator's basis.
    pub fn alpha_from_matrix(&self, a: &Matrix) -> Result<Vec<Real>> {
        let s = self.s();
        let u = self.u_matrix();
        let wt = self.w_matrix().transpose();
        // X = U^{-1} A, then α = X W^{-T}, i.e. α^T = W^{-1} X^T
        let cols: Vec<Vec<Real>> = (0..s).map(|j| u.solve(&a.column(j))).collect::<Result<_>>()?;
        let x = Matrix::from_fn(s, s, |i, j| cols[j][i].clone());
        let w = wt.transpose();
        let rows: Vec<Vec<Real>> = (0..s).map(|i| w.solve(x.row(i))).collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    }

    /// Convert coordinates in this operator's basis to the plain basis
    /// `V_ℓ' = P_ℓ'`, as an `s × s` row-major block.
    pub fn alpha_to_plain(&self, alpha: &[Real]) -> Vec<Real> {
        let s = self.s();
        let prec = self.precision_bits();
        let t: Vec<Vec<Real>> = self
            .v_transform
            .iter()
            .map(|r| r.iter().map(|x| Real::from_rational(x, prec)).collect())
            .collect();
        let mut out = vec![Real::zero(prec); s * s];
        for k in 0..s {
            for l in 0..s {
                for j in 0..s {
                    let term = &alpha[k * s + l] * &t[l][j];
                    out[k * s + j] += &term;
                }
            }
        }
        out
    }

    /// `M α`.
    pub fn apply(&self, alpha: &[Real]) -> Vec<Real> {
        self.matrix.mul_vec(alpha)
    }

    /// Each row's condition evaluated directly on `A`, minus its right side.
    pub fn residuals_of(&self, a: &Matrix) -> Result<Vec<Real>> {
        self.pairs
            .iter()
            .map(|&(p, q)| {
                double_bush_poly_residual(a, &self.rule, &self.cond_polys[p - 1], &self.cond_polys[q - 1])
            })
            .collect()
    }

    pub fn avf_matrix(&self) -> Matrix {
        Matrix::outer(&self.rule.c, &self.rule.b)
    }

    /// `(1 - c) b^T`.
    pub fn n1_matrix(&self) -> Matrix {
        let prec = self.precision_bits();
        let u: Vec<Real> = self.rule.c.iter().map(|x| Real::one(prec) - x).collect();
        Matrix::outer(&u, &self.rule.b)
    }
}
