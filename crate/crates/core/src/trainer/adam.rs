use crate::numerics::Matrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Matrix,
    pub v: Matrix,
}

impl Moments {
    pub fn zeros_like(p: &Matrix) -> Self {
        Self {
            m: Matrix::zeros(p.rows(), p.cols()),
            v: Matrix::zeros(p.rows(), p.cols()),
        }
    }
}

/// One bias-corrected Adam update; `step` counts from 1.
///
/// ```text
/// m ← β1 m + (1 − β1) g
/// v ← β2 v + (1 − β2) g²
/// p ← p − lr · (m / (1 − β1^t)) / (sqrt(v / (1 − β2^t)) + ε)
/// ```
pub fn adam_step(param: &mut Matrix, grad: &Matrix, moments: &mut Moments, lr: f64, step: u64) {
    assert!(step >= 1, "Adam steps count from 1");
    assert_eq!(param.shape(), grad.shape());
    assert_eq!(param.shape(), moments.m.shape());
    let bc1 = 1.0 - BETA1.powf(step as f64);
    let bc2 = 1.0 - BETA2.powf(step as f64);
    let p = param.as_mut_slice();
    let m = moments.m.as_mut_slice();
    let v = moments.v.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}
