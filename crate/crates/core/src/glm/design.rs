use crate::error::{Error, Result};

/// Dense column-major `n x p` covariate matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps column-major `data` (`data[j * n + i]` is row `i`, column `j`).
    pub fn from_column_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::invalid(format!(
                "design buffer has {} entries, expected {n} x {p}",
                data.len()
            )));
        }
        Self::validated(n, p, data)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {p}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Self::validated(n, p, data)
    }

    pub fn from_fn(n: usize, p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            for i in 0..n {
                data.push(f(i, j));
            }
        }
        Self::validated(n, p, data)
    }

    fn validated(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("design needs at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::invalid("design needs at least 1 column"));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite design entry at row {}, column {}",
                k % n,
                k / n
            )));
        }
        Ok(DesignMatrix { n, p, data })
    }

    /// Skips validation; callers guarantee shape and finiteness.
    pub(crate) fn from_parts_unchecked(n: usize, p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * p);
        DesignMatrix { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            let c = self.col(j);
            data.extend(rows.iter().map(|&i| c[i]));
        }
        DesignMatrix::from_parts_unchecked(m, self.p, data)
    }

    /// `X b`.
    pub fn mul_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.p {
            return Err(Error::invalid(format!(
                "vector has length {}, design has {} columns",
                b.len(),
                self.p
            )));
        }
        let mut out = vec![0.0; self.n];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                axpy(bj, self.col(j), &mut out);
            }
        }
        Ok(out)
    }
}

/// Dot product with four accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `sum_i a_i b_i c_i`.
#[inline]
pub(crate) fn dot3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    let mut acc = [0.0f64; 4];
    let n4 = a.len() / 4 * 4;
    let mut i = 0;
    while i < n4 {
        acc[0] += a[i] * b[i] * c[i];
        acc[1] += a[i + 1] * b[i + 1] * c[i + 1];
        acc[2] += a[i + 2] * b[i + 2] * c[i + 2];
        acc[3] += a[i + 3] * b[i + 3] * c[i + 3];
        i += 4;
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in n4..a.len() {
        s += a[k] * b[k] * c[k];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
