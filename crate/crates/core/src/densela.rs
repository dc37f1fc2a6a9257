//! Small dense linear algebra: row-major matrices, cyclic Jacobi
//! eigendecomposition, singular-value extremes, Gram-Schmidt range bases and
//! square solves.
//!
//! Everything here is sized for matrices with a couple of dozen rows at most.
//! Singular values are obtained from the smaller Gram matrix and then refined
//! through the factor itself (`sigma_i = |A v_i|`), which keeps the smallest
//! singular value relatively accurate to roughly `eps * cond(A)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidMatrix("no rows".into()));
        }
        let n = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "ragged rows: row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(m, n, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Column vector with the given entries.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// `A^T A` (cols x cols).
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                if row[i] == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.data[i * n + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    /// `A A^T` (rows x rows).
    pub fn outer_gram(&self) -> Matrix {
        let m = self.rows;
        let mut g = Matrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = dot(self.row(i), self.row(j));
                g.data[i * m + j] = v;
                g.data[j * m + i] = v;
            }
        }
        g
    }

    /// Submatrix made of the listed rows, in the listed order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Principal submatrix on `idx` (rows and columns).
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        let k = idx.len();
        let mut out = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * k + b] = self[(i, j)];
            }
        }
        out
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Matrix {
        debug_assert_eq!(factors.len(), self.rows);
        let mut out = self.clone();
        for (i, &f) in factors.iter().enumerate() {
            for x in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *x *= f;
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                what: "vstack",
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        norm(self.row(i))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    // Scaled to avoid overflow on very large entries.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// Enumeration caps shared by the combinatorial routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest number of row subsets `C(m, n)` a measure may enumerate.
    pub subsets: u64,
    /// Largest Gram dimension handed to the cone enumerator (2^m supports).
    pub cone_dim: usize,
    /// Largest row count for a full signature scan (2^m signatures).
    pub signature_rows: usize,
    /// Largest number of inequality rows for active-set projection.
    pub constraint_rows: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            subsets: 100_000,
            cone_dim: 20,
            signature_rows: 16,
            constraint_rows: 16,
        }
    }
}

impl Caps {
    /// Raised caps used by `--force`.
    pub fn forced() -> Self {
        Self {
            subsets: 50_000_000,
            cone_dim: 26,
            signature_rows: 24,
            constraint_rows: 24,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singularity threshold against a global scale reference.
    pub rank_rtol: f64,
    /// Slack for entrywise nonnegativity of unit eigenvectors.
    pub nonneg_atol: f64,
    /// `cone_min(A A^T) <= feas_tol` means "not strictly feasible".
    pub feas_tol: f64,
    /// Relative tolerance for identity checks and argmax ties.
    pub verify_rtol: f64,
    pub caps: Caps,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-10,
            nonneg_atol: 1e-9,
            feas_tol: 1e-8,
            verify_rtol: 1e-7,
            caps: Caps::default(),
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rank_rtol", self.rank_rtol),
            ("nonneg_atol", self.nonneg_atol),
            ("feas_tol", self.feas_tol),
            ("verify_rtol", self.verify_rtol),
        ] {
            if !(value > 0.0 && value < 1e-2) {
                return Err(Error::InvalidTolerance { name, value });
            }
        }
        Ok(())
    }
}

/// One eigenpair of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Cyclic Jacobi on a row-major symmetric buffer. Returns eigenvalues in
/// descending order (stable on ties) and the matching unit eigenvectors.
pub(crate) fn jacobi_eigen(buf: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = buf.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let nrp = arp - s * (arq + tau * arp);
                    let nrq = arq + s * (arp - tau * arq);
                    a[r * n + p] = nrp;
                    a[p * n + r] = nrp;
                    a[r * n + q] = nrq;
                    a[q * n + r] = nrq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|r| v[r * n + k]).collect();
            let nrm = norm(&col);
            col.iter_mut().for_each(|x| *x /= nrm);
            col
        })
        .collect();
    (values, vectors)
}

/// Full spectral decomposition of a symmetric matrix by cyclic Jacobi
/// rotations, eigenvalues descending.
pub fn sym_eig(g: &Matrix) -> Result<Vec<EigenPair>> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch {
            what: "sym_eig (square)",
            expected: g.rows(),
            found: g.cols(),
        });
    }
    let scale = g.max_abs();
    let n = g.rows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    if scale > 0.0 && asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    let (values, vectors) = jacobi_eigen(g.as_slice(), n);
    Ok(values
        .into_iter()
        .zip(vectors)
        .map(|(value, vector)| EigenPair { value, vector })
        .collect())
}

/// Singular values of `a` in descending order (`min(m, n)` of them), with
/// the right singular vectors when `m >= n` and left ones otherwise.
pub(crate) fn singular_pairs(a: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (m, n) = a.shape();
    let tall = m >= n;
    let g = if tall { a.gram() } else { a.outer_gram() };
    let (_, vectors) = jacobi_eigen(g.as_slice(), g.rows());
    let mut pairs: Vec<(f64, Vec<f64>)> = vectors
        .into_iter()
        .map(|v| {
            let image = if tall { a.mul_vec(&v) } else { a.tr_mul_vec(&v) };
            (norm(&image), v)
        })
        .collect();
    // Refinement can reorder nearly equal values.
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs.into_iter().unzip()
}

/// Smallest and largest singular values.
pub fn sigma_extremes(a: &Matrix) -> (f64, f64) {
    let (values, _) = singular_pairs(a);
    (*values.last().unwrap(), values[0])
}

/// The l2 operator norm, i.e. the largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    sigma_extremes(a).1
}

pub fn rank_of(a: &Matrix, tol: &Tolerances) -> usize {
    let (values, _) = singular_pairs(a);
    let top = values[0];
    if top == 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > tol.rank_rtol * top).count()
}

/// Orthonormal basis of `range(a)` by Gram-Schmidt with reorthogonalization.
/// Columns whose residual falls below `rank_rtol * |a|` are dropped, so the
/// result has `rank(a)` columns.
pub fn qr_orthonormal(a: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let m = a.rows();
    let threshold = tol.rank_rtol * operator_norm(a);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.column(j);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let nv = norm(&v);
        if nv > threshold {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    let r = basis.len();
    let mut q = Matrix::zeros(m, r);
    for (j, col) in basis.iter().enumerate() {
        for i in 0..m {
            q[(i, j)] = col[i];
        }
    }
    Ok(q)
}

/// Thin QR (`a = q r`, `q` is m x n, `r` upper triangular n x n) by
/// reorthogonalized Gram-Schmidt. Fails when a column is dependent on the
/// previous ones relative to `rank_rtol * |a|`.
pub(crate) fn thin_qr(a: &Matrix, tol: &Tolerances) -> Result<(Matrix, Matrix)> {
    let (m, n) = a.shape();
    let threshold = tol.rank_rtol * operator_norm(a);
    let mut q = Matrix::zeros(m, n);
    let mut r = Matrix::zeros(n, n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (k, qk) in basis.iter().enumerate() {
                let c = dot(qk, &v);
                r[(k, j)] += c;
                v.iter_mut().zip(qk).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let nv = norm(&v);
        if nv.is_nan() || nv <= threshold {
            return Err(Error::RankDeficient { rank: j, cols: n });
        }
        r[(j, j)] = nv;
        v.iter_mut().for_each(|x| *x /= nv);
        for i in 0..m {
            q[(i, j)] = v[i];
        }
        basis.push(v);
    }
    Ok((q, r))
}

/// LU with partial pivoting, refusing matrices whose smallest singular value
/// is below `rank_rtol * sigma_max`.
pub fn solve_square(a: &Matrix, b: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            what: "solve_square (square)",
            expected: n,
            found: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "solve_square rhs",
            expected: n,
            found: b.len(),
        });
    }
    let (smin, smax) = sigma_extremes(a);
    let threshold = tol.rank_rtol * smax;
    if smin.is_nan() || smin <= threshold {
        return Err(Error::Singular {
            sigma_min: smin,
            threshold,
        });
    }
    let mut x = lu_solve(a, b);
    // One step of iterative refinement.
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let dx = lu_solve(a, &r);
    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    Ok(x)
}

fn lu_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut lu = a.as_slice().to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
            .unwrap();
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let piv = lu[k * n + k];
        for i in k + 1..n {
            let f = lu[i * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                lu[i * n + j] -= f * lu[k * n + j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| lu[k * n + j] * x[j]).sum();
        x[k] = (x[k] - s) / lu[k * n + k];
    }
    x
}

/// Cholesky factor (row-major lower triangle) of a symmetric positive
/// definite buffer; `None` when a pivot drops below `rel_tol * max_diag`.
pub(crate) fn cholesky(g: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(g[i * n + i]));
    if max_diag.is_nan() || max_diag <= 0.0 {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d.is_nan() || d <= rel_tol * max_diag {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` in place.
pub(crate) fn cholesky_solve(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        let data = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::new(r, c, data).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn sigma_examples() {
        let (lo, hi) = sigma_extremes(&Matrix::identity(2));
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-15);

        let (lo, hi) = sigma_extremes(&m(&[&[1.0, 0.0], &[1.0, 1.0]]));
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(lo, ((3.0 - s5) / 2.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(hi, ((3.0 + s5) / 2.0).sqrt(), epsilon = 1e-14);

        let (lo, hi) = sigma_extremes(&m(&[&[3.0, 0.0], &[0.0, 0.0]]));
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&Matrix::identity(3)), 1.0, epsilon = 1e-15);
        let a = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_abs_diff_eq!(operator_norm(&a), 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(operator_norm(&m(&[&[3.0], &[4.0]])), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn sym_eig_examples() {
        let d = m(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let e = sym_eig(&d).unwrap();
        assert_eq!(e[0].value, 2.0);
        assert_eq!(e[1].value, 1.0);
        assert_abs_diff_eq!(e[0].vector[0].abs(), 1.0);
        assert_abs_diff_eq!(e[1].vector[1].abs(), 1.0);

        let g = m(&[&[1.0, 1.0], &[1.0, 2.0]]);
        let e = sym_eig(&g).unwrap();
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(e[0].value, (3.0 + s5) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1].value, (3.0 - s5) / 2.0, epsilon = 1e-14);

        assert!(matches!(
            sym_eig(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn sym_eig_matches_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let b = random(&mut rng, 6, 4);
            let e = sym_eig(&b.gram()).unwrap();
            let (s, _) = singular_pairs(&b);
            for (pair, sv) in e.iter().zip(&s) {
                assert_abs_diff_eq!(pair.value.max(0.0).sqrt(), *sv, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sym_eig_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let n = 1 + trial % 8;
            let b = random(&mut rng, n, n);
            let g = b.matmul(&b.transpose()).unwrap().sub(&b.gram()); // symmetric, indefinite
            let e = sym_eig(&g).unwrap();
            let mut rec = Matrix::zeros(n, n);
            for p in &e {
                assert_abs_diff_eq!(norm(&p.vector), 1.0, epsilon = 1e-14);
                for i in 0..n {
                    for j in 0..n {
                        rec[(i, j)] += p.value * p.vector[i] * p.vector[j];
                    }
                }
            }
            let scale = sigma_extremes(&g).1.max(f64::MIN_POSITIVE);
            assert!(sigma_extremes(&g.sub(&rec)).1 <= 1e-12 * scale.max(1e-300) + 1e-300);
            assert!(e.windows(2).all(|w| w[0].value >= w[1].value));
        }
    }

    #[test]
    fn qr_examples() {
        let tol = Tolerances::default();
        let q = qr_orthonormal(&Matrix::identity(3), &tol).unwrap();
        assert_eq!(q, Matrix::identity(3));

        let q = qr_orthonormal(&m(&[&[2.0, 0.0], &[0.0, 0.0], &[0.0, 3.0]]), &tol).unwrap();
        assert_eq!(q.column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(q.column(1), vec![0.0, 0.0, 1.0]);

        let a = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let q = qr_orthonormal(&a, &tol).unwrap();
        assert!(sigma_extremes(&q.gram().sub(&Matrix::identity(2))).1 <= 1e-12);
        for j in 0..2 {
            let c = a.column(j);
            let back = q.mul_vec(&q.tr_mul_vec(&c));
            for (x, y) in back.iter().zip(&c) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }

        assert_eq!(qr_orthonormal(&Matrix::zeros(2, 2), &tol), Err(Error::ZeroMatrix));
    }

    #[test]
    fn qr_drops_dependent_columns() {
        let tol = Tolerances::default();
        let a = m(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 0.0, 1.0]]);
        let q = qr_orthonormal(&a, &tol).unwrap();
        assert_eq!(q.cols(), 2);
        assert_eq!(rank_of(&a, &tol), 2);
    }

    #[test]
    fn solve_examples() {
        let tol = Tolerances::default();
        let x = solve_square(&Matrix::identity(3), &[1.0, 2.0, 3.0], &tol).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let x = solve_square(&m(&[&[1.0, 0.0], &[1.0, 1.0]]), &[1.0, 2.0], &tol).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
        assert!(matches!(
            solve_square(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), &[1.0, 2.0], &tol),
            Err(Error::Singular { .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random(&mut rng, 4, 4);
            let b: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let Ok(x) = solve_square(&a, &b, &tol) else { continue };
            let ax = a.mul_vec(&x);
            let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm(&res) <= 1e-10 * (operator_norm(&a) * norm(&x) + norm(&b)));
        }
    }

    #[test]
    fn rank_examples() {
        let tol = Tolerances::default();
        assert_eq!(rank_of(&Matrix::identity(3), &tol), 3);
        assert_eq!(rank_of(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), &tol), 1);
        assert_eq!(rank_of(&m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), &tol), 2);
        assert_eq!(rank_of(&Matrix::zeros(2, 3), &tol), 0);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances {
            feas_tol: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidTolerance { name: "feas_tol", .. })
        ));
        let zero = Tolerances {
            verify_rtol: 0.0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn cholesky_roundtrip() {
        let g = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&g, 2, 1e-12).unwrap();
        let mut x = [2.0, 1.0];
        cholesky_solve(&l, 2, &mut x);
        assert_abs_diff_eq!(4.0 * x[0] + 2.0 * x[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(2.0 * x[0] + 3.0 * x[1], 1.0, epsilon = 1e-14);
        assert!(cholesky(&[1.0, 1.0, 1.0, 1.0], 2, 1e-12).is_none());
    }
}
