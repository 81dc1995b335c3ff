//! Minimal row-major matrix with the three product kernels backprop needs.

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
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
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// out[i][o] = sum_k a[i][k] w[o][k]; both inner loops run over contiguous rows.
pub fn a_mul_wt(a: &Matrix, w: &Matrix) -> Matrix {
    assert_eq!(a.cols, w.cols, "inner dimensions differ");
    let mut out = Matrix::zeros(a.rows, w.rows);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (o, out_v) in out_row.iter_mut().enumerate() {
            let w_row = w.row(o);
            let mut acc = 0.0;
            for k in 0..a_row.len() {
                acc += a_row[k] * w_row[k];
            }
            *out_v = acc;
        }
    }
    out
}

/// out[o][k] = sum_i d[i][o] a[i][k]; accumulates one scaled `a` row at a time.
pub fn dt_mul_a(d: &Matrix, a: &Matrix) -> Matrix {
    assert_eq!(d.rows, a.rows, "batch sizes differ");
    let mut out = Matrix::zeros(d.cols, a.cols);
    for i in 0..d.rows {
        let d_row = d.row(i);
        let a_row = a.row(i);
        for (o, &scale) in d_row.iter().enumerate() {
            if scale == 0.0 {
                continue;
            }
            let out_row = out.row_mut(o);
            for k in 0..a_row.len() {
                out_row[k] += scale * a_row[k];
            }
        }
    }
    out
}

/// out[i][k] = sum_o d[i][o] w[o][k]; accumulates one scaled `w` row at a time.
pub fn d_mul_w(d: &Matrix, w: &Matrix) -> Matrix {
    assert_eq!(d.cols, w.rows, "inner dimensions differ");
    let mut out = Matrix::zeros(d.rows, w.cols);
    for i in 0..d.rows {
        let d_row = d.row(i);
        let out_row = out.row_mut(i);
        for (o, &scale) in d_row.iter().enumerate() {
            if scale == 0.0 {
                continue;
            }
            let w_row = w.row(o);
            for k in 0..w_row.len() {
                out_row[k] += scale * w_row[k];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn naive_a_mul_wt(a: &Matrix, w: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows, w.rows);
        for i in 0..a.rows {
            for o in 0..w.rows {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.get(i, k) * w.get(o, k);
                }
                out.set(i, o, s);
            }
        }
        out
    }

    #[test]
    fn kernels_agree_with_naive_loops() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-0.5, 0.25, 4.0]]);
        let w = Matrix::from_rows(&[
            vec![0.1, -0.2, 0.3],
            vec![1.0, 0.5, -1.5],
            vec![2.0, 0.0, 0.7],
            vec![-0.3, 0.9, 0.2],
        ]);
        let z = a_mul_wt(&a, &w);
        let z_naive = naive_a_mul_wt(&a, &w);
        for (x, y) in z.data.iter().zip(&z_naive.data) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }

        // (d^T a)[o][k] equals transposing d and multiplying rows by rows.
        let d = Matrix::from_rows(&[vec![0.5, -1.0, 2.0, 0.0], vec![1.5, 0.0, -0.5, 1.0]]);
        let g = dt_mul_a(&d, &a);
        for o in 0..4 {
            for k in 0..3 {
                let expect: f64 = (0..2).map(|i| d.get(i, o) * a.get(i, k)).sum();
                assert_abs_diff_eq!(g.get(o, k), expect, epsilon = 1e-15);
            }
        }

        let b = d_mul_w(&d, &w);
        for i in 0..2 {
            for k in 0..3 {
                let expect: f64 = (0..4).map(|o| d.get(i, o) * w.get(o, k)).sum();
                assert_abs_diff_eq!(b.get(i, k), expect, epsilon = 1e-15);
            }
        }
    }
}
