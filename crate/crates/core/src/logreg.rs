//! L2-penalized binary logistic regression fitted by Newton/IRLS.
//! The intercept is never penalized.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const GRADIENT_TOL: f64 = 1e-8;
pub const MAX_NEWTON_STEPS: usize = 100;
const MAX_HALVINGS: usize = 60;
const RESOLUTION: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `Σ [y log σ(z) + (1−y) log(1−σ(z))] − (l2/2)‖w‖²` with `z = w·x + b`.
pub fn penalized_log_likelihood(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> f64 {
    let ll: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            if yi {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum();
    ll - 0.5 * l2 * w.iter().map(|c| c * c).sum::<f64>()
}

/// Gradient of [`penalized_log_likelihood`]: `(∂/∂w, ∂/∂b)`.
pub fn gradient(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = w.iter().map(|c| -l2 * c).collect();
    let mut gb = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let r = f64::from(u8::from(yi)) - sigmoid(z);
        for (g, a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
        gb += r;
    }
    (gw, gb)
}

/// Fits the penalized logistic regression; rows of `x` are observations.
pub fn fit_logreg(x: &[Vec<f64>], y: &[bool], l2_strength: f64) -> Result<LogisticFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch { expected: n, actual: y.len() });
    }
    if n < 2 {
        return Err(Error::validation("logistic regression needs at least 2 rows"));
    }
    if !(l2_strength >= 0.0) {
        return Err(Error::validation("l2_strength must be >= 0"));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass);
    }
    let p = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch { expected: p, actual: r.len() });
    }

    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut value = penalized_log_likelihood(x, y, &w, b, l2_strength);
    let mut grad_norm = f64::INFINITY;

    for iter in 0..=MAX_NEWTON_STEPS {
        let (gw, gb) = gradient(x, y, &w, b, l2_strength);
        grad_norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if grad_norm < GRADIENT_TOL {
            return Ok(LogisticFit {
                coefficients: w,
                intercept: b,
                iterations: iter,
            });
        }
        if iter == MAX_NEWTON_STEPS {
            break;
        }

        // Negative Hessian: X̃ᵀ S X̃ + diag(l2, …, l2, 0), intercept in the last slot.
        let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
        for row in x {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let mu = sigmoid(z);
            let s = mu * (1.0 - mu);
            for i in 0..p {
                if row[i] == 0.0 {
                    continue;
                }
                let si = s * row[i];
                for j in 0..p {
                    h[(i, j)] += si * row[j];
                }
                h[(i, p)] += si;
            }
            h[(p, p)] += s;
        }
        for i in 0..p {
            h[(p, i)] = h[(i, p)];
            h[(i, i)] += l2_strength;
        }
        let g = DVector::from_iterator(p + 1, gw.iter().copied().chain(std::iter::once(gb)));
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => h
                .svd(true, true)
                .solve(&g, 1e-12)
                .map_err(|e| Error::validation(format!("newton solve failed: {e}")))?,
        };

        // Below this the predicted gain is smaller than the objective can resolve.
        let decrement: f64 = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
        if decrement <= RESOLUTION * value.abs().max(1.0) {
            return Ok(LogisticFit {
                coefficients: w,
                intercept: b,
                iterations: iter,
            });
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let w_new: Vec<f64> = w.iter().enumerate().map(|(i, c)| c + scale * step[i]).collect();
            let b_new = b + scale * step[p];
            let v_new = penalized_log_likelihood(x, y, &w_new, b_new, l2_strength);
            if v_new >= value {
                w = w_new;
                b = b_new;
                value = v_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_NEWTON_STEPS,
        grad_norm,
    })
}
