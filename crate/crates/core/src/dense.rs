//! Dense row-major matrices and the small set of numeric primitives the rest
//! of the crate is built from.
//!
//! All entries are expected to stay finite; debug builds check this after
//! every producing operation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Dense row-major matrix. Column vectors are `n x 1`, scalars `1 x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        let m = Self { rows, cols, data };
        m.debug_check_finite();
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    /// Scalar wrapped as a 1x1 matrix.
    pub fn scalar(v: F) -> Self {
        Self::from_vec(1, 1, vec![v])
    }

    /// Xavier/Glorot uniform init in +-sqrt(6 / (fan_in + fan_out)).
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| F::cast(rng.random_range(-bound..bound)))
            .collect();
        Self::from_vec(rows, cols, data)
    }

    /// I.i.d. zero-mean Gaussian entries with the given standard deviation.
    pub fn gaussian<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| F::cast(std * gauss_sample(rng)))
            .collect();
        Self::from_vec(rows, cols, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Value of a 1x1 matrix.
    pub fn scalar_value(&self) -> F {
        assert_eq!(self.shape(), (1, 1), "not a scalar node");
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::from_vec(self.rows, self.cols, data)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(F, F) -> F) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec(self.rows, self.cols, data)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: F) -> Self {
        self.map(|v| c * v)
    }

    /// `self += c * other`, in place.
    pub fn add_scaled(&mut self, c: F, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + c * b;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn sum(&self) -> F {
        self.data.iter().copied().sum()
    }

    /// Squared Frobenius norm.
    pub fn sum_sq(&self) -> F {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub(crate) fn debug_check_finite(&self) {
        debug_assert!(self.is_finite(), "non-finite matrix entry");
    }
}

/// Standard normal sample via Box-Muller; avoids an extra distribution crate.
fn gauss_sample<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

/// Matrix product `a * b`.
pub fn matmul<F: Scalar>(a: &DenseMatrix<F>, b: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
    if a.cols != b.rows {
        return Err(Error::Dim(format!(
            "matmul: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = vec![F::zero(); n * m];
    // i-k-j order: the inner j loop runs over contiguous rows of `b` and
    // `out`, which vectorizes and keeps accumulation order fixed.
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (kk, &aik) in arow.iter().enumerate() {
            let brow = &b.data[kk * m..(kk + 1) * m];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o = *o + aik * bkj;
            }
        }
    }
    let out = DenseMatrix {
        rows: n,
        cols: m,
        data: out,
    };
    out.debug_check_finite();
    Ok(out)
}

pub fn relu<F: Scalar>(x: &DenseMatrix<F>) -> DenseMatrix<F> {
    x.map(|v| v.max(F::zero()))
}

/// Numerically stable logistic function, elementwise.
pub fn sigmoid<F: Scalar>(x: &DenseMatrix<F>) -> DenseMatrix<F> {
    x.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<F: Scalar>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}

/// Stable `ln(1 + e^x)`.
#[inline]
pub fn softplus_scalar<F: Scalar>(v: F) -> F {
    v.max(F::zero()) + (-(v.abs())).exp().ln_1p()
}

pub fn softplus<F: Scalar>(x: &DenseMatrix<F>) -> DenseMatrix<F> {
    x.map(softplus_scalar)
}

/// Per-row index pattern: entry `k` of row `i` lives at
/// `cols[row_ptr[i]..row_ptr[i+1]]`. Used as the softmax/attention support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl Support {
    pub fn new(row_ptr: Vec<usize>, cols: Vec<usize>) -> Self {
        assert!(!row_ptr.is_empty() && *row_ptr.last().unwrap() == cols.len());
        Self { row_ptr, cols }
    }

    /// Build from per-row column lists.
    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in rows {
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.cols[self.row_range(i)]
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Row index of every entry, in entry order.
    pub fn entry_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_rows()).flat_map(move |i| self.row_range(i).map(move |_| i))
    }

    /// Entry index of `(i, j)` if present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        self.row_range(i).find(|&k| self.cols[k] == j)
    }
}

/// Row-wise softmax restricted to a support mask.
///
/// Each row of the output sums to 1 over its support columns and is exactly 0
/// elsewhere; rows with empty support are all zero. Uses max subtraction.
pub fn row_softmax<F: Scalar>(x: &DenseMatrix<F>, support: &Support) -> Result<DenseMatrix<F>> {
    if support.n_rows() != x.rows {
        return Err(Error::Dim(format!(
            "row_softmax: support has {} rows, matrix {}",
            support.n_rows(),
            x.rows
        )));
    }
    if let Some(&c) = support.cols.iter().max() {
        if c >= x.cols {
            return Err(Error::Dim(format!(
                "row_softmax: support column {c} out of range for {} columns",
                x.cols
            )));
        }
    }
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let cols = support.row_cols(i);
        if cols.is_empty() {
            continue;
        }
        let m = cols
            .iter()
            .map(|&j| x.get(i, j))
            .fold(F::neg_infinity(), F::max);
        let mut z = F::zero();
        for &j in cols {
            let e = (x.get(i, j) - m).exp();
            out.set(i, j, e);
            z = z + e;
        }
        for &j in cols {
            out.set(i, j, out.get(i, j) / z);
        }
    }
    Ok(out)
}

/// Column-wise concatenation of matrices with equal row counts.
pub fn concat_cols<F: Scalar>(parts: &[&DenseMatrix<F>]) -> Result<DenseMatrix<F>> {
    let rows = parts
        .first()
        .ok_or_else(|| Error::Dim("concat_cols: empty input".into()))?
        .rows;
    if parts.iter().any(|p| p.rows != rows) {
        return Err(Error::Dim("concat_cols: row counts differ".into()));
    }
    let cols: usize = parts.iter().map(|p| p.cols).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        let orow = out.row_mut(i);
        let mut off = 0;
        for p in parts {
            orow[off..off + p.cols].copy_from_slice(p.row(i));
            off += p.cols;
        }
    }
    Ok(out)
}

/// Sum of squared differences over the listed index pairs.
pub fn masked_sq_error<F: Scalar>(
    a: &DenseMatrix<F>,
    b: &DenseMatrix<F>,
    mask: &[(usize, usize)],
) -> Result<F> {
    if a.shape() != b.shape() {
        return Err(Error::Dim("masked_sq_error: shape mismatch".into()));
    }
    for &(i, j) in mask {
        if i >= a.rows || j >= a.cols {
            return Err(Error::Dim(format!(
                "masked_sq_error: index ({i},{j}) out of range"
            )));
        }
    }
    Ok(mask
        .iter()
        .map(|&(i, j)| {
            let d = a.get(i, j) - b.get(i, j);
            d * d
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn matmul_small() {
        let a = M::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = M::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c, M::from_rows(&[vec![19.0, 22.0], vec![43.0, 50.0]]));
    }

    #[test]
    fn matmul_dim_mismatch_errors() {
        let a = M::zeros(2, 3);
        let b = M::zeros(2, 3);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        // ln 9 maps to 0.9
        let y = sigmoid_scalar((9.0f64).ln());
        assert!((y - 0.9).abs() < 1e-9);
        // large inputs stay finite and inside (0, 1); the naive form
        // overflows e^x here
        assert!(sigmoid_scalar(710.0f64).is_finite());
        assert!(sigmoid_scalar(-30.0f64) > 0.0);
        assert!(sigmoid_scalar(30.0f64) < 1.0);
    }

    #[test]
    fn relu_nonnegative() {
        let x = M::from_rows(&[vec![-1.0, 0.0, 2.5]]);
        assert_eq!(relu(&x), M::from_rows(&[vec![0.0, 0.0, 2.5]]));
    }

    #[test]
    fn row_softmax_equal_logits_uniform() {
        let x = M::from_rows(&[vec![2.0, 2.0, 2.0, 9.0]]);
        let s = Support::from_rows(&[vec![0, 1, 2]]);
        let y = row_softmax(&x, &s).unwrap();
        for j in 0..3 {
            assert!((y.get(0, j) - 1.0 / 3.0).abs() < 1e-15);
        }
        // off-support entries are exactly zero
        assert_eq!(y.get(0, 3), 0.0);
    }

    #[test]
    fn row_softmax_two_logits() {
        // softmax(1, 0) = (0.731058578..., 0.268941421...)
        let x = M::from_rows(&[vec![1.0, 0.0]]);
        let s = Support::from_rows(&[vec![0, 1]]);
        let y = row_softmax(&x, &s).unwrap();
        assert!((y.get(0, 0) - 0.7310585786300049).abs() < 1e-12);
        assert!((y.get(0, 1) - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn concat_and_transpose() {
        let a = M::from_rows(&[vec![1.0], vec![2.0]]);
        let b = M::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]);
        let c = concat_cols(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(c.transpose().get(2, 1), 6.0);
    }

    #[test]
    fn masked_sq_error_counts_only_mask() {
        let a = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = M::zeros(2, 2);
        let e = masked_sq_error(&a, &b, &[(0, 0), (1, 0)]).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn generic_scalar_f32() {
        let a = DenseMatrix::<f32>::from_rows(&[vec![1.0, 2.0]]);
        let b = DenseMatrix::<f32>::from_rows(&[vec![3.0], vec![4.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.scalar_value(), 11.0f32);
    }
}
