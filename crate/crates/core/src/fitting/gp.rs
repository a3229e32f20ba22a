//! Exact Gaussian-process regression with a Matern 5/2 kernel, used as the
//! surrogate over parameter space. Inputs are expected in the unit box;
//! outputs are standardized internally. Hyperparameters (lengthscale, noise)
//! are picked from a small grid by marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Matern 5/2 correlation for a Euclidean distance `r` and lengthscale `l`.
fn matern52(r: f64, l: f64) -> f64 {
    let z = (5.0_f64).sqrt() * r / l;
    (1.0 + z + z * z / 3.0) * (-z).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const LENGTHSCALES: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 2.0];
const NOISES: [f64; 4] = [1e-6, 1e-4, 1e-2, 1e-1];

pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    lengthscale: f64,
    y_mean: f64,
    y_scale: f64,
}

impl GaussianProcess {
    /// Fits the surrogate to observations. Fails (so callers can fall back)
    /// when no hyperparameter choice yields a positive-definite kernel
    /// matrix.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<GaussianProcess> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::fit("gp: empty or mismatched training data"));
        }
        let n = x.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));

        let mut best: Option<(f64, f64, f64, Cholesky<f64, Dyn>, DVector<f64>)> = None;
        for &l in &LENGTHSCALES {
            let mut k = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = matern52(distance(&x[i], &x[j]), l);
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            for &noise in &NOISES {
                let mut kn = k.clone();
                for i in 0..n {
                    kn[(i, i)] += noise;
                }
                let Some(chol) = Cholesky::new(kn) else {
                    continue;
                };
                let alpha = chol.solve(&ys);
                let log_det: f64 = chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.ln())
                    .sum::<f64>()
                    * 2.0;
                let lml = -0.5 * ys.dot(&alpha) - 0.5 * log_det;
                if !lml.is_finite() {
                    continue;
                }
                match &best {
                    Some((b, ..)) if lml <= *b => {}
                    _ => best = Some((lml, l, noise, chol, alpha)),
                }
            }
        }
        let (_, lengthscale, _, chol, alpha) =
            best.ok_or_else(|| Error::fit("gp: no hyperparameter choice was positive definite"))?;
        Ok(GaussianProcess {
            x: x.to_vec(),
            chol,
            alpha,
            lengthscale,
            y_mean,
            y_scale,
        })
    }

    /// Posterior mean and variance (on the original output scale).
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let k_star = DVector::from_iterator(
            n,
            self.x.iter().map(|xi| matern52(distance(xi, q), self.lengthscale)),
        );
        let mean_std = k_star.dot(&self.alpha);
        let v = self.chol.solve(&k_star);
        let var_std = (1.0 - k_star.dot(&v)).max(0.0);
        (
            self.y_mean + self.y_scale * mean_std,
            self.y_scale * self.y_scale * var_std,
        )
    }

    /// Lower confidence bound, the quantity the acquisition step minimizes.
    pub fn lcb(&self, q: &[f64], kappa: f64) -> f64 {
        let (m, v) = self.predict(q);
        m - kappa * v.sqrt()
    }
}
