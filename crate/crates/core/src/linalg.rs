//! Dense linear algebra over [`Real`] and exact rationals.
//!
//! Sizes here are tiny (at most a few dozen rows and columns), so everything
//! is a straightforward textbook algorithm on a row-major `Vec`.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Real>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, prec: u32) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Real::zero(prec); rows * cols],
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Self::zeros(n, n, prec);
        for i in 0..n {
            m[(i, i)] = Real::one(prec);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Real) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// `u v^T`.
    pub fn outer(u: &[Real], v: &[Real]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| &u[i] * &v[j])
    }

    pub fn from_rationals(rows: &[Vec<BigRational>], prec: u32) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self::from_fn(rows.len(), cols, |i, j| Real::from_rational(&rows[i][j], prec))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Real> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul_vec(&self, v: &[Real]) -> Vec<Real> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `v^T M`.
    pub fn vec_mul(&self, v: &[Real]) -> Vec<Real> {
        assert_eq!(v.len(), self.rows, "vector-matrix dimension mismatch");
        let prec = v.first().map_or(64, Real::precision);
        let mut out = vec![Real::zero(prec); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += &(vi * a);
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, k: &Real) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * k).collect(),
        }
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[Real] {
        &self.data
    }

    pub fn max_abs(&self) -> Real {
        let prec = self.data.first().map_or(64, Real::precision);
        Real::max_abs(&self.data, prec)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(Real::to_f64).collect())
            .collect()
    }

    /// Solve `self * x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &[Real]) -> Result<Vec<Real>> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.cols,
            });
        }
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let scale = a.max_abs();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().cmp(&a[(j, k)].abs()))
                .unwrap();
            if a[(piv, k)].is_zero()
                || (!scale.is_zero()
                    && (a[(piv, k)].log2_abs() - scale.log2_abs())
                        < -(a[(piv, k)].precision() as f64) + 8.0)
            {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if piv != k {
                a.swap_rows(piv, k);
                b.swap(piv, k);
            }
            for i in k + 1..n {
                let f = &a[(i, k)] / &a[(k, k)];
                if f.is_zero() {
                    continue;
                }
                for j in k..n {
                    let t = &f * &a[(k, j)];
                    a[(i, j)] -= &t;
                }
                let t = &f * &b[k];
                b[i] -= &t;
            }
        }
        let mut x = b;
        for k in (0..n).rev() {
            let mut acc = x[k].clone();
            for j in k + 1..n {
                acc -= &(&a[(k, j)] * &x[j]);
            }
            x[k] = &acc / &a[(k, k)];
        }
        Ok(x)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for r in 0..self.rows {
            self.data.swap(r * self.cols + i, r * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Real;
    fn index(&self, (i, j): (usize, usize)) -> &Real {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Real {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        Matrix::from_fn(self.rows, rhs.cols, |i, j| {
            let prec = self[(i, 0)].precision();
            let mut acc = Real::zero(prec);
            for k in 0..self.cols {
                acc += &(&self[(i, k)] * &rhs[(k, j)]);
            }
            acc
        })
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_decimal(8)).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[Real], b: &[Real]) -> Real {
    assert_eq!(a.len(), b.len(), "dot product length mismatch");
    let prec = a.first().map_or(64, Real::precision);
    let mut acc = Real::zero(prec);
    for (x, y) in a.iter().zip(b) {
        acc += &(x * y);
    }
    acc
}

pub fn norm(v: &[Real]) -> Real {
    dot(v, v).sqrt()
}

/// Result of a column-pivoted QR factorization used for rank decisions.
#[derive(Clone, Debug)]
pub struct RankReveal {
    pub rank: usize,
    /// `|R_kk| / |R_00|` along the diagonal, in pivot order.
    pub pivot_ratios: Vec<f64>,
    /// Orthonormal basis of the null space, as column vectors.
    pub kernel: Vec<Vec<Real>>,
    pub tol: f64,
}

impl RankReveal {
    /// The smallest ratio above the tolerance and the largest below it.
    pub fn gap(&self) -> (f64, f64) {
        let above = self.pivot_ratios[..self.rank]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let below = self.pivot_ratios[self.rank..]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        (above, below)
    }
}

/// Numerical rank and null space by Householder QR with column pivoting.
///
/// Pivots with `|R_kk| / |R_00| > tol` count towards the rank. A pivot
/// ratio within a factor 100 of `tol` on either side makes the decision
/// ambiguous and is reported as an error so the caller can raise precision.
pub fn rank_reveal(a: &Matrix, tol: f64) -> Result<RankReveal> {
    let (m, n) = (a.nrows(), a.ncols());
    let prec = a.data.first().map_or(64, Real::precision);
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut ratios = Vec::new();
    let mut lead: Option<Real> = None;
    let steps = m.min(n);
    for k in 0..steps {
        let norms: Vec<Real> = (k..n)
            .map(|j| {
                let col: Vec<Real> = (k..m).map(|i| r[(i, j)].clone()).collect();
                dot(&col, &col)
            })
            .collect();
        let (off, _) = norms
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.cmp(y.1))
            .unwrap();
        let p = k + off;
        if p != k {
            r.swap_cols(p, k);
            perm.swap(p, k);
        }
        let x: Vec<Real> = (k..m).map(|i| r[(i, k)].clone()).collect();
        let alpha = norm(&x);
        let lead_val = lead.get_or_insert_with(|| alpha.clone()).clone();
        ratios.push(if lead_val.is_zero() {
            0.0
        } else {
            (alpha.log2_abs() - lead_val.log2_abs()).exp2()
        });
        if alpha.is_zero() {
            continue;
        }
        // Householder vector v = x + sign(x0) |x| e1
        let mut v = x;
        let alpha = if v[0].is_negative() { -alpha } else { alpha };
        v[0] = &v[0] + &alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2.is_zero() {
            continue;
        }
        for j in k..n {
            let col: Vec<Real> = (k..m).map(|i| r[(i, j)].clone()).collect();
            let f = (dot(&v, &col) * Real::from_i64(2, prec)) / &vnorm2;
            for (t, i) in (k..m).enumerate() {
                let d = &f * &v[t];
                r[(i, j)] -= &d;
            }
        }
    }
    ratios.resize(n, 0.0);
    for &ratio in ratios.iter().take(steps) {
        if ratio >= tol / 100.0 && ratio <= tol * 100.0 {
            return Err(Error::AmbiguousRank { ratio, tol });
        }
    }
    let rank = ratios.iter().take_while(|&&x| x > tol).count();

    // kernel: for each free column j, solve R11 x = -R12 e_j
    let mut kernel = Vec::new();
    for j in rank..n {
        let mut z = vec![Real::zero(prec); n];
        z[j] = Real::one(prec);
        for i in (0..rank).rev() {
            let mut acc = -r[(i, j)].clone();
            for t in i + 1..rank {
                acc -= &(&r[(i, t)] * &z[t]);
            }
            z[i] = &acc / &r[(i, i)];
        }
        let mut out = vec![Real::zero(prec); n];
        for (pos, &orig) in perm.iter().enumerate() {
            out[orig] = z[pos].clone();
        }
        kernel.push(out);
    }
    Ok(RankReveal {
        rank,
        pivot_ratios: ratios,
        kernel: orthonormalize(&kernel),
        tol,
    })
}

/// Modified Gram-Schmidt, applied twice for stability; drops nothing.
pub fn orthonormalize(vectors: &[Vec<Real>]) -> Vec<Vec<Real>> {
    let mut out: Vec<Vec<Real>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let d = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= &(&d * qi);
                }
            }
        }
        let nrm = norm(&w);
        out.push(w.iter().map(|x| x / &nrm).collect());
    }
    out
}

/// Least-squares coefficients of `target` in the span of orthonormal `basis`
/// and the norm of what is left over.
pub fn project_residual(basis: &[Vec<Real>], target: &[Real]) -> Real {
    let mut w = target.to_vec();
    for _ in 0..2 {
        for q in basis {
            let d = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= &(&d * qi);
            }
        }
    }
    norm(&w)
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref_exact(rows: &mut [Vec<BigRational>]) -> Vec<usize> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = BigRational::one() / &rows[r][c];
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                let (src, dst) = if i < r {
                    let (a, b) = rows.split_at_mut(r);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = rows.split_at_mut(i);
                    (&a[r], &mut b[0])
                };
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= &f * s;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank_exact(rows: &[Vec<BigRational>]) -> usize {
    let mut m = rows.to_vec();
    rref_exact(&mut m).len()
}

/// Null space basis of an exact matrix (one vector per free column).
pub fn nullspace_exact(rows: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut m = rows.to_vec();
    let pivots = rref_exact(&mut m);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); ncols];
            v[f] = BigRational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

/// Solve a square exact system; `None` if singular.
pub fn solve_exact(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.len();
    let mut aug: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref_exact(&mut aug);
    if pivots.len() != n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n].clone()).collect())
}

pub fn max_abs_rational(v: &[BigRational]) -> BigRational {
    v.iter()
        .map(|x| x.abs())
        .max()
        .unwrap_or_else(BigRational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    const P: u32 = 200;

    fn r(n: i64) -> Real {
        Real::from_i64(n, P)
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_fn(3, 3, |i, j| r([[2, 1, 1], [1, 3, 2], [1, 0, 0]][i][j]));
        let x = a.solve(&[r(4), r(5), r(6)]).unwrap();
        let back = a.mul_vec(&x);
        for (got, want) in back.iter().zip([4, 5, 6]) {
            assert!((got - r(want)).abs().log2_abs() < -190.0);
        }
    }

    #[test]
    fn singular_system_rejected() {
        let a = Matrix::from_fn(2, 2, |i, j| r([[1, 2], [2, 4]][i][j]));
        assert!(matches!(a.solve(&[r(1), r(1)]), Err(Error::Singular(_))));
    }

    #[test]
    fn rank_of_outer_product_sum() {
        let u1 = [r(1), r(2), r(3), r(4)];
        let v1 = [r(1), r(0), r(-1)];
        let u2 = [r(0), r(1), r(1), r(5)];
        let v2 = [r(2), r(1), r(0)];
        let m = Matrix::outer(&u1, &v1).add(&Matrix::outer(&u2, &v2));
        let rr = rank_reveal(&m, 1e-30).unwrap();
        assert_eq!(rr.rank, 2);
        assert_eq!(rr.kernel.len(), 1);
        let img = m.mul_vec(&rr.kernel[0]);
        assert!(Real::max_abs(&img, P).log2_abs() < -180.0);
    }

    #[test]
    fn ambiguous_pivot_flagged() {
        let eps = Real::parse("1e-30", P).unwrap();
        let m = Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => r(1),
            (1, 1) => eps.clone(),
            _ => r(0),
        });
        assert!(matches!(rank_reveal(&m, 1e-30), Err(Error::AmbiguousRank { .. })));
        assert_eq!(rank_reveal(&m, 1e-50).unwrap().rank, 2);
        assert_eq!(rank_reveal(&m, 1e-10).unwrap().rank, 1);
    }

    #[test]
    fn exact_nullspace_and_solve() {
        let a = vec![vec![q(1, 1), q(2, 1), q(3, 1)], vec![q(2, 1), q(4, 1), q(6, 1)]];
        assert_eq!(rank_exact(&a), 1);
        let ns = nullspace_exact(&a);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let s: BigRational = a[0].iter().zip(v).map(|(x, y)| x * y).sum();
            assert!(s.is_zero());
        }
        let b = vec![vec![q(1, 2), q(1, 3)], vec![q(1, 1), q(-1, 1)]];
        let x = solve_exact(&b, &[q(1, 1), q(0, 1)]).unwrap();
        assert_eq!(x, vec![q(6, 5), q(6, 5)]);
        let sing = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert!(solve_exact(&sing, &[q(1, 1), q(1, 1)]).is_none());
    }

    proptest::proptest! {
        #[test]
        fn kernel_vectors_are_orthonormal_and_annihilated(seed in proptest::collection::vec(-9i64..10, 12)) {
            // 3x4 matrix of rank <= 3 built from integers
            let m = Matrix::from_fn(3, 4, |i, j| r(seed[i * 4 + j]));
            let rr = rank_reveal(&m, 1e-40).unwrap();
            let exact = rank_exact(&(0..3).map(|i| (0..4).map(|j| q(seed[i * 4 + j], 1)).collect()).collect::<Vec<_>>());
            proptest::prop_assert_eq!(rr.rank, exact);
            for (i, v) in rr.kernel.iter().enumerate() {
                let img = m.mul_vec(v);
                proptest::prop_assert!(Real::max_abs(&img, P).log2_abs() < -150.0);
                for (j, w) in rr.kernel.iter().enumerate() {
                    let d = dot(v, w);
                    let want = if i == j { r(1) } else { r(0) };
                    proptest::prop_assert!((d - want).abs().log2_abs() < -150.0);
                }
            }
        }
    }
}
