//! Row-major dense matrices and the handful of products the MLP code needs.

/// Row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Wraps `data` (length must be `rows * cols`).
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Stacks equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    /// Horizontal concatenation of blocks with the same row count.
    pub fn hstack(blocks: &[&Matrix]) -> Self {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                assert_eq!(b.rows, rows, "hstack row mismatch");
                data.extend_from_slice(b.row(r));
            }
        }
        Self { rows, cols, data }
    }

    /// Copy of columns `start..start + width`.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        assert!(start + width <= self.cols);
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Matrix { rows: self.rows, cols: width, data }
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
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// `C = A · Bᵀ` where `a` is `n × k` and `b` is `m × k` (both row-major); `c` becomes `n × m`.
pub(crate) fn matmul_a_bt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    debug_assert_eq!(c.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    // SAFETY: slice lengths checked above; strides describe the declared shapes.
    unsafe {
        matrixmultiply::dgemm(
            n, k, m, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), m as isize, 1,
        );
    }
}

/// `C = Aᵀ · B` where `a` is `n × m` and `b` is `n × k`; `c` becomes `m × k`.
pub(crate) fn matmul_at_b(a: &[f64], b: &[f64], n: usize, m: usize, k: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * k);
    if m == 0 || k == 0 {
        return;
    }
    if n == 0 {
        c.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m, n, k, 1.0,
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), k as isize, 1,
            0.0,
            c.as_mut_ptr(), k as isize, 1,
        );
    }
}

/// `C = A · B` where `a` is `n × k` and `b` is `k × m`; `c` becomes `n × m`.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(c.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            n, k, m, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), m as isize, 1,
            0.0,
            c.as_mut_ptr(), m as isize, 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                for p in 0..k {
                    c[i * m + j] += a[i * k + p] * b[p * m + j];
                }
            }
        }
        c
    }

    fn transpose(x: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = x[i * c + j];
            }
        }
        t
    }

    #[test]
    fn products_agree_with_triple_loop() {
        let (n, k, m) = (5, 3, 4);
        let a: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * m).map(|i| (i as f64 * 0.91).cos()).collect();
        let expect = naive(&a, &b, n, k, m);

        let mut c = vec![0.0; n * m];
        matmul(&a, &b, n, k, m, &mut c);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }

        let bt = transpose(&b, k, m);
        matmul_a_bt(&a, &bt, n, k, m, &mut c);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }

        let at = transpose(&a, n, k);
        matmul_at_b(&at, &b, k, n, m, &mut c);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hstack_and_columns_invert() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[5.0], [6.0]]);
        let s = Matrix::hstack(&[&a, &b]);
        assert_eq!(s.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(s.columns(0, 2), a);
        assert_eq!(s.columns(2, 1), b);
    }
}
