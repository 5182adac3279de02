//! Row-space rotation for quadratic penalties.
//!
//! With `X'X/n = V diag(d) V'` on the retained spectrum, `R = X V` has
//! orthogonal columns, so coordinate descent on `R` converges in one sweep
//! for the linear family and the solution maps back through `b = V theta`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::design::DesignMatrix;

const RELATIVE_CUTOFF: f64 = 1e-10;

pub(crate) struct Rotation {
    pub r: DesignMatrix,
    v: DMatrix<f64>,
}

impl Rotation {
    pub fn new(x: &DesignMatrix) -> Self {
        let (n, p) = (x.n(), x.p());
        let xm = DMatrix::from_column_slice(n, p, x.as_column_major());
        let nf = n as f64;
        let (r, v) = if p <= n {
            let g = xm.tr_mul(&xm) / nf;
            let eig = SymmetricEigen::new(g);
            let keep = retained(&eig.eigenvalues);
            let v = eig.eigenvectors.select_columns(&keep);
            let r = &xm * &v;
            (r, v)
        } else {
            let g = &xm * xm.transpose() / nf;
            let eig = SymmetricEigen::new(g);
            let keep = retained(&eig.eigenvalues);
            let u = eig.eigenvectors.select_columns(&keep);
            let mut r = u.clone();
            let mut v = xm.tr_mul(&u);
            for (k, &idx) in keep.iter().enumerate() {
                let sd = eig.eigenvalues[idx].sqrt();
                r.column_mut(k).scale_mut(nf.sqrt() * sd);
                v.column_mut(k).scale_mut(1.0 / (nf.sqrt() * sd));
            }
            (r, v)
        };
        let k = r.ncols();
        Rotation {
            r: DesignMatrix::from_parts_unchecked(n, k, r.as_slice().to_vec()),
            v,
        }
    }

    pub fn back(&self, theta: &[f64]) -> Vec<f64> {
        let t = DMatrix::from_column_slice(theta.len(), 1, theta);
        (&self.v * t).as_slice().to_vec()
    }
}

fn retained(values: &nalgebra::DVector<f64>) -> Vec<usize> {
    let top = values.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > RELATIVE_CUTOFF * top && values[k] > 0.0)
        .collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}
