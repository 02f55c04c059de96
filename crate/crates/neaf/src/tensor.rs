//! Dense 2-D matrices of `f64` in row-major order: the carrier for input batches,
//! weights, biases and gradients.
//!
//! Every operation is a pure function over immutable inputs with a fixed,
//! documented summation order, so identical inputs produce bitwise-identical
//! outputs across runs and thread counts.

use crate::error::{Error, Result};

/// Reduction axis for [`Matrix::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Sum along each row (collapse columns); result is `rows x 1`.
    Rows,
    /// Sum along each column (collapse rows); result is `1 x cols`.
    Cols,
    /// Sum every entry; result is `1 x 1`.
    All,
}

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Errors if the length is not `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::shape("from_rows", "ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// True if any entry is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }

    /// Matrix product. For each output element the products are accumulated
    /// over the inner index in ascending order, so the result is bitwise
    /// reproducible.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} * {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            ));
        }
        let n = rhs.cols;
        let mut out = vec![0.0; self.rows * n];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * n..(i + 1) * n];
            for (p, &a_ip) in a_row.iter().enumerate() {
                let b_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_ip * b;
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: n,
            data: out,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// Adds a `1 x cols` row vector to every row.
    pub fn add_row_vector(&self, v: &Matrix) -> Result<Matrix> {
        if v.rows != 1 || v.cols != self.cols {
            return Err(Error::shape(
                "add_row_vector",
                format!(
                    "{}x{} + {}x{}",
                    self.rows, self.cols, v.rows, v.cols
                ),
            ));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = &mut out.data[i * self.cols..(i + 1) * self.cols];
            for (o, &b) in row.iter_mut().zip(&v.data) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Sums along the requested axis; entries are accumulated in ascending
    /// flat-index order.
    pub fn reduce(&self, axis: Axis) -> Matrix {
        match axis {
            Axis::Rows => {
                let mut out = Matrix::zeros(self.rows, 1);
                for i in 0..self.rows {
                    let mut s = 0.0;
                    for &v in self.row(i) {
                        s += v;
                    }
                    out.data[i] = s;
                }
                out
            }
            Axis::Cols => {
                let mut out = Matrix::zeros(1, self.cols);
                for i in 0..self.rows {
                    for (o, &v) in out.data.iter_mut().zip(self.row(i)) {
                        *o += v;
                    }
                }
                out
            }
            Axis::All => {
                let mut out = Matrix::zeros(1, 1);
                out.data[0] = self.sum_all();
                out
            }
        }
    }

    /// Sum of every entry in ascending flat-index order.
    pub fn sum_all(&self) -> f64 {
        let mut s = 0.0;
        for &v in &self.data {
            s += v;
        }
        s
    }

    /// Per-row index of the maximum entry; ties break to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Elementwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shape matrices.
    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                "zip_map",
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Copies the given rows (in the given order) into a new matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the half-open row range `[start, end)` into a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_is_exact() {
        let a = m(&[vec![3.0, 4.0], vec![5.0, 6.0]]);
        let i2 = Matrix::identity(2);
        assert_eq!(i2.matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&i2).unwrap(), a);
    }

    #[test]
    fn matmul_hand_example() {
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = m(&[vec![5.0], vec![6.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, m(&[vec![17.0], vec![39.0]]));
    }

    #[test]
    fn matmul_rejects_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        assert!(matches!(a.matmul(&b), Err(Error::Shape { .. })));
    }

    #[test]
    fn transpose_examples() {
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(a.transpose(), m(&[vec![1.0, 3.0], vec![2.0, 4.0]]));
        assert_eq!(a.transpose().transpose(), a);

        let row = m(&[vec![1.0, 2.0, 3.0]]);
        let col = row.transpose();
        assert_eq!((col.rows(), col.cols()), (3, 1));
        assert_eq!(col.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn product_transpose_identity_is_bitwise() {
        // (A*B)^T and B^T*A^T accumulate the same products in the same inner
        // order, so they must agree bit for bit.
        let a = m(&[
            vec![0.1, -2.3, 3.7],
            vec![1.5, 0.02, -9.1],
        ]);
        let b = m(&[
            vec![4.2, -0.5],
            vec![2.9, 8.8],
            vec![-1.1, 0.3],
        ]);
        let lhs = a.matmul(&b).unwrap().transpose();
        let rhs = b.transpose().matmul(&a.transpose()).unwrap();
        let lhs_bits: Vec<u64> = lhs.data().iter().map(|v| v.to_bits()).collect();
        let rhs_bits: Vec<u64> = rhs.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(lhs_bits, rhs_bits);
    }

    #[test]
    fn add_row_vector_examples() {
        let a = m(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let zero = m(&[vec![0.0, 0.0]]);
        assert_eq!(a.add_row_vector(&zero).unwrap(), a);

        let b = m(&[vec![1.0, 1.0]]);
        let v = m(&[vec![1.0, 2.0]]);
        assert_eq!(b.add_row_vector(&v).unwrap(), m(&[vec![2.0, 3.0]]));

        let bad = m(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            a.add_row_vector(&bad),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn reduce_examples() {
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(a.sum_all(), 10.0);
        assert_eq!(a.reduce(Axis::All).data(), &[10.0]);

        let z = Matrix::zeros(3, 2);
        assert_eq!(z.reduce(Axis::Rows), Matrix::zeros(3, 1));

        let row = m(&[vec![5.0, 6.0, 7.0]]);
        assert_eq!(row.reduce(Axis::Cols), row);
        assert_eq!(row.reduce(Axis::Rows).data(), &[18.0]);
    }

    #[test]
    fn argmax_rows_examples() {
        assert_eq!(m(&[vec![1.0, 3.0, 2.0]]).argmax_rows(), vec![1]);
        // ties break to the lowest index
        assert_eq!(m(&[vec![2.0, 2.0]]).argmax_rows(), vec![0]);
        assert_eq!(
            m(&[vec![0.0, 0.0, 5.0], vec![7.0, 1.0, 1.0]]).argmax_rows(),
            vec![2, 0]
        );
    }

    #[test]
    fn matmul_is_deterministic_across_threads() {
        let a = Matrix::from_vec(16, 24, (0..16 * 24).map(|i| (i as f64).sin()).collect())
            .unwrap();
        let b = Matrix::from_vec(24, 8, (0..24 * 8).map(|i| (i as f64).cos()).collect())
            .unwrap();
        let reference: Vec<u64> = a
            .matmul(&b)
            .unwrap()
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    let bits: Vec<u64> = a
                        .matmul(&b)
                        .unwrap()
                        .data()
                        .iter()
                        .map(|v| v.to_bits())
                        .collect();
                    assert_eq!(bits, reference);
                });
            }
        });
    }
}
