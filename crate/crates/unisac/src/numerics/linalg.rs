//! Small dense complex matrices with exactly the operations the bound and
//! sensing pipelines need: products, Hermitian Gram forms, the dominant
//! eigenvalue by power iteration, Cholesky log-determinants, and Hermitian
//! linear solves for least squares on a few columns.

use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the linear-algebra kernels.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    /// A matrix required to be Hermitian positive definite is not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// Power iteration failed to reach the requested tolerance.
    #[error("power iteration did not converge within the iteration cap")]
    NoConvergence,
}

/// Dense complex matrix in column-major storage: entry `(r, c)` lives at
/// `data[r + c * rows]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    /// Builds a matrix from an entry function of `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[r + c * rows] = f(r, c);
            }
        }
        m
    }

    /// Stacks columns given as slices; all must share a length.
    pub fn from_cols(cols: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(LinalgError::Dimension("columns of unequal length"));
        }
        let mut data = Vec::with_capacity(rows * cols.len());
        for col in cols {
            data.extend_from_slice(col);
        }
        Ok(CMat { rows, cols: cols.len(), data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r + c * self.rows]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r + c * self.rows] = v;
    }

    /// Borrow of one column.
    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &CMat) -> Result<CMat, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::Dimension("product inner dimensions differ"));
        }
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            for k in 0..self.cols {
                let w = rhs.get(k, c);
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let lhs_col = self.col(k);
                let out_col = &mut out.data[c * self.rows..(c + 1) * self.rows];
                for r in 0..self.rows {
                    out_col[r] += lhs_col[r] * w;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn conj_transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Gram matrix `A^H A` (Hermitian positive semidefinite by construction).
    pub fn gram(&self) -> CMat {
        let n = self.cols;
        let mut g = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in self.col(i).iter().zip(self.col(j)) {
                    acc += a.conj() * b;
                }
                g.set(i, j, acc);
                g.set(j, i, acc.conj());
            }
        }
        g
    }

    /// Outer Gram matrix `A A^H`, sharing its nonzero spectrum with `A^H A`.
    pub fn outer_gram(&self) -> CMat {
        let n = self.rows;
        let mut g = CMat::zeros(n, n);
        for c in 0..self.cols {
            let col = self.col(c);
            for i in 0..n {
                for j in i..n {
                    let v = col[i] * col[j].conj();
                    g.data[i + j * n] += v;
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let v = g.get(i, j);
                g.set(j, i, v.conj());
            }
        }
        g
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Dimension("matrix-vector length mismatch"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            let w = v[c];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.col(c)) {
                *o += a * w;
            }
        }
        Ok(out)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian check within an absolute entrywise tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Hermitian inner product `sum conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Kronecker product of two vectors: `out[i * b.len() + j] = a[i] * b[j]`.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Column-major vectorization of a matrix: `out[r + c * rows] = m[r][c]`.
pub fn vec_mat(m: &CMat) -> Vec<Complex64> {
    m.data.clone()
}

/// Dominant eigenvalue of a Hermitian positive-semidefinite matrix by power
/// iteration with the default tolerance (1e-10 relative residual) and cap.
pub fn largest_eigenvalue(a: &CMat) -> Result<f64, LinalgError> {
    largest_eigenvalue_with(a, 1e-10, 200_000)
}

/// Power iteration with explicit relative residual tolerance and iteration
/// cap. The start vector is a fixed pseudo-random unit vector, so results are
/// reproducible. For a Hermitian matrix the Rayleigh quotient error is
/// bounded by the residual norm, so `rtol` bounds the relative eigenvalue
/// error directly.
pub fn largest_eigenvalue_with(a: &CMat, rtol: f64, cap: usize) -> Result<f64, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::Dimension("eigenvalue of a non-square matrix"));
    }
    if a.rows == 0 {
        return Err(LinalgError::Dimension("eigenvalue of an empty matrix"));
    }
    let n = a.rows;
    // Deterministic start with no libm dependence: a small integer LCG mapped
    // into [-0.5, 0.5] on both components keeps every platform bit-identical.
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let mut next = || {
                state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            Complex64::new(1.0 + next(), next())
        })
        .collect();
    let nv = norm_sqr(&v).sqrt();
    for z in &mut v {
        *z /= nv;
    }
    for _ in 0..cap {
        let av = a.mul_vec(&v)?;
        // Rayleigh quotient; the imaginary part vanishes for Hermitian input.
        let lambda = inner(&v, &av).re;
        let mut res = 0.0f64;
        for (x, y) in av.iter().zip(&v) {
            res += (x - y * lambda).norm_sqr();
        }
        let res = res.sqrt();
        let scale = lambda.abs().max(f64::MIN_POSITIVE);
        if res <= rtol * scale {
            return Ok(lambda);
        }
        let na = norm_sqr(&av).sqrt();
        if na == 0.0 {
            // The zero matrix: every vector is an eigenvector of 0.
            return Ok(0.0);
        }
        v = av;
        for z in &mut v {
            *z /= na;
        }
    }
    Err(LinalgError::NoConvergence)
}

/// Cholesky factor (lower triangular) of a Hermitian positive-definite
/// matrix.
fn cholesky(a: &CMat) -> Result<CMat, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::Dimension("cholesky of a non-square matrix"));
    }
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j).re;
        for k in 0..j {
            diag -= l.get(j, k).norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let d = diag.sqrt();
        l.set(j, j, Complex64::new(d, 0.0));
        for i in (j + 1)..n {
            let mut acc = a.get(i, j);
            for k in 0..j {
                acc -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, acc / d);
        }
    }
    Ok(l)
}

/// Log-determinant of a Hermitian positive-definite matrix via Cholesky;
/// fails with [`LinalgError::NotPositiveDefinite`] when the factorization
/// breaks down.
pub fn cholesky_logdet(a: &CMat) -> Result<f64, LinalgError> {
    let l = cholesky(a)?;
    let mut acc = 0.0;
    for i in 0..l.rows {
        acc += l.get(i, i).re.ln();
    }
    Ok(2.0 * acc)
}

/// Solves `A x = b` for Hermitian positive-definite `A` via Cholesky.
pub fn solve_hermitian(a: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Dimension("solve right-hand side length mismatch"));
    }
    let l = cholesky(a)?;
    let n = a.rows;
    // Forward substitution L y = b.
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l.get(i, k);
            y[i] = y[i] - lik * y[k];
        }
        y[i] /= l.get(i, i);
    }
    // Back substitution L^H x = y.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l.get(k, i).conj();
            y[i] = y[i] - lki * y[k];
        }
        y[i] /= l.get(i, i);
    }
    Ok(y)
}

/// Least-squares coefficients for `min || v - sum_i x_i cols[i] ||` via the
/// normal equations; intended for a handful of well-separated columns.
pub fn least_squares(cols: &[&[Complex64]], v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    let k = cols.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if cols.iter().any(|c| c.len() != v.len()) {
        return Err(LinalgError::Dimension("least-squares column length mismatch"));
    }
    let mut gram = CMat::zeros(k, k);
    let mut rhs = vec![Complex64::new(0.0, 0.0); k];
    for i in 0..k {
        for j in i..k {
            let g = inner(cols[i], cols[j]);
            gram.set(i, j, g);
            gram.set(j, i, g.conj());
        }
        rhs[i] = inner(cols[i], v);
    }
    solve_hermitian(&gram, &rhs)
}
