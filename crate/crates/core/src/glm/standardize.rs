use super::design::DesignMatrix;

/// Column centering and scaling to unit (population) variance.
///
/// Constant columns keep scale 1 and are flagged so solvers pin their
/// coefficient at zero.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &DesignMatrix) -> Self {
        let n = x.n() as f64;
        let mut means = Vec::with_capacity(x.p());
        let mut scales = Vec::with_capacity(x.p());
        let mut constant = Vec::with_capacity(x.p());
        for j in 0..x.p() {
            let c = x.col(j);
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            let is_const = !(sd > 1e-12 * (1.0 + mean.abs()));
            means.push(mean);
            scales.push(if is_const { 1.0 } else { sd });
            constant.push(is_const);
        }
        Standardizer {
            means,
            scales,
            constant,
        }
    }

    pub fn transform(&self, x: &DesignMatrix) -> DesignMatrix {
        let mut out = x.clone();
        for j in 0..x.p() {
            let (m, s, k) = (self.means[j], self.scales[j], self.constant[j]);
            for v in out.col_mut(j) {
                *v = if k { 0.0 } else { (*v - m) / s };
            }
        }
        out
    }

    /// Maps standardized-scale `(b0, b)` back to the original covariates.
    pub fn to_original(&self, intercept: f64, coef: &[f64]) -> (f64, Vec<f64>) {
        let mut b0 = intercept;
        let b: Vec<f64> = coef
            .iter()
            .enumerate()
            .map(|(j, &bj)| {
                if self.constant[j] {
                    0.0
                } else {
                    let orig = bj / self.scales[j];
                    b0 -= orig * self.means[j];
                    orig
                }
            })
            .collect();
        (b0, b)
    }
}
