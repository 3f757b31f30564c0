//! Dense complex matrices and rank-3 site tensors.

use std::fmt;

use matrixmultiply::CGemmOption;

use super::{NumericsError, C64};

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Wraps row-major entries; fails if the length does not match the shape.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::Shape {
                op: "from_vec",
                detail: format!("{} entries for a {rows}x{cols} matrix", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, NumericsError> {
        Self::from_vec(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Returns the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        Self::from_fn(self.rows, k, |r, c| self[(r, c)])
    }

    /// Returns the first `k` rows.
    pub fn leading_rows(&self, k: usize) -> Self {
        Self { rows: k, cols: self.cols, data: self.data[..k * self.cols].to_vec() }
    }

    /// Reinterprets the row-major buffer with a new shape of equal size.
    pub fn reshape(self, rows: usize, cols: usize) -> Result<Self, NumericsError> {
        Self::from_vec(rows, cols, self.data)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (ra, ca) = self.shape();
        let (rb, cb) = other.shape();
        Self::from_fn(ra * rb, ca * cb, |r, c| self[(r / rb, c / cb)] * other[(r % rb, c % cb)])
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Standard complex matrix product `a · b`.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::DimensionMismatch { op: "matmul", left: a.shape(), right: b.shape() });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    gemm_into(&a.data, &b.data, &mut out.data, a.rows, a.cols, b.cols, false);
    Ok(out)
}

/// `c (+)= a · b` on raw row-major buffers of shapes m×k, k×n, m×n.
///
/// Accumulates into `c` when `accumulate` is set, otherwise overwrites it.
pub(crate) fn gemm_into(a: &[C64], b: &[C64], c: &mut [C64], m: usize, k: usize, n: usize, accumulate: bool) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
        return;
    }
    let beta = if accumulate { [1.0, 0.0] } else { [0.0, 0.0] };
    // SAFETY: Complex<f64> is repr(C) with layout identical to [f64; 2]; the bounds
    // above guarantee every strided access stays inside the three buffers.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            beta,
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Rank-3 tensor with dims (left bond, physical, right bond), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    left: usize,
    phys: usize,
    right: usize,
    data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self { left, phys, right, data: vec![C64::new(0.0, 0.0); left * phys * right] }
    }

    pub fn from_vec(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self, NumericsError> {
        if data.len() != left * phys * right {
            return Err(NumericsError::Shape {
                op: "tensor3",
                detail: format!("{} entries for dims ({left},{phys},{right})", data.len()),
            });
        }
        Ok(Self { left, phys, right, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.left, self.phys, self.right)
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn phys(&self) -> usize {
        self.phys
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, s: usize, b: usize) -> C64 {
        self.data[(a * self.phys + s) * self.right + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, s: usize, b: usize, z: C64) {
        self.data[(a * self.phys + s) * self.right + b] = z;
    }

    /// The left×right matrix selected by physical index `s`.
    pub fn slice(&self, s: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.left, self.right, |a, b| self.get(a, s, b))
    }

    /// Groups (left, phys) as rows: a (left·phys)×right matrix.
    pub fn to_left_matrix(&self) -> ComplexMatrix {
        ComplexMatrix { rows: self.left * self.phys, cols: self.right, data: self.data.clone() }
    }

    /// Groups (phys, right) as columns: a left×(phys·right) matrix.
    pub fn to_right_matrix(&self) -> ComplexMatrix {
        ComplexMatrix { rows: self.left, cols: self.phys * self.right, data: self.data.clone() }
    }

    pub fn from_left_matrix(m: ComplexMatrix, phys: usize) -> Result<Self, NumericsError> {
        let (rows, right) = m.shape();
        if rows % phys != 0 {
            return Err(NumericsError::Shape { op: "from_left_matrix", detail: format!("{rows} rows, phys {phys}") });
        }
        Self::from_vec(rows / phys, phys, right, m.into_vec())
    }

    pub fn from_right_matrix(m: ComplexMatrix, phys: usize) -> Result<Self, NumericsError> {
        let (left, cols) = m.shape();
        if cols % phys != 0 {
            return Err(NumericsError::Shape { op: "from_right_matrix", detail: format!("{cols} cols, phys {phys}") });
        }
        Self::from_vec(left, phys, cols / phys, m.into_vec())
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Row-major real GEMM `C = A·B` with explicit (row, column) strides for A and B.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    // SAFETY: callers pass buffers that cover the strided m×k, k×n and m×n
    // extents; `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}

pub(crate) fn row_major(cols: usize) -> (isize, isize) {
    (cols as isize, 1)
}

/// Transposed view of a row-major `rows × cols` matrix.
pub(crate) fn transposed(cols: usize) -> (isize, isize) {
    (1, cols as isize)
}
