//! Softmax-weighted fusion of the spectral and texture node embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionGranularity {
    /// Separate softmax for every node and coordinate.
    #[default]
    Coordinate,
    /// One weight per node, from the softmax of each family's mean logit.
    Node,
}

#[derive(Clone, Debug)]
pub struct FusionOutput {
    /// Weight of the spectral family; the texture weight is `1 - m_spec`.
    /// `N × d` for coordinate granularity, `N × 1` for node granularity.
    pub m_spec: Matrix,
    pub fused: Matrix,
    granularity: FusionGranularity,
}

impl FusionOutput {
    pub fn m_tex(&self) -> Matrix {
        self.m_spec.map(|m| 1.0 - m)
    }
}

/// `σ(a - b)`, evaluated without overflow.
fn sigmoid_diff(a: f64, b: f64) -> f64 {
    let t = a - b;
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn fuse(z_spec: &Matrix, z_tex: &Matrix, granularity: FusionGranularity) -> Result<FusionOutput> {
    ensure!(
        z_spec.shape() == z_tex.shape(),
        "fusion inputs differ in shape: {:?} vs {:?}",
        z_spec.shape(),
        z_tex.shape()
    );
    let (n, d) = z_spec.shape();
    let m_spec = match granularity {
        FusionGranularity::Coordinate => z_spec.zip_map(z_tex, sigmoid_diff),
        FusionGranularity::Node => Matrix::from_fn(n, 1, |i, _| {
            let ms = z_spec.row(i).iter().sum::<f64>() / d as f64;
            let mt = z_tex.row(i).iter().sum::<f64>() / d as f64;
            sigmoid_diff(ms, mt)
        }),
    };
    let fused = Matrix::from_fn(n, d, |i, c| {
        let m = match granularity {
            FusionGranularity::Coordinate => m_spec[(i, c)],
            FusionGranularity::Node => m_spec[(i, 0)],
        };
        m * z_spec[(i, c)] + (1.0 - m) * z_tex[(i, c)]
    });
    Ok(FusionOutput {
        m_spec,
        fused,
        granularity,
    })
}

/// Returns `(d z_spec, d z_tex)`.
pub fn fuse_backward(grad: &Matrix, z_spec: &Matrix, z_tex: &Matrix, out: &FusionOutput) -> Result<(Matrix, Matrix)> {
    ensure!(
        grad.shape() == out.fused.shape() && z_spec.shape() == grad.shape() && z_tex.shape() == grad.shape(),
        "fusion gradient shape mismatch"
    );
    let (n, d) = grad.shape();
    match out.granularity {
        FusionGranularity::Coordinate => {
            // dF/dz_k = m_k (1 + z_k - F)
            let mut gs = Matrix::zeros(n, d);
            let mut gt = Matrix::zeros(n, d);
            for i in 0..n {
                for c in 0..d {
                    let (m, f, g) = (out.m_spec[(i, c)], out.fused[(i, c)], grad[(i, c)]);
                    gs[(i, c)] = g * m * (1.0 + z_spec[(i, c)] - f);
                    gt[(i, c)] = g * (1.0 - m) * (1.0 + z_tex[(i, c)] - f);
                }
            }
            Ok((gs, gt))
        }
        FusionGranularity::Node => {
            let mut gs = Matrix::zeros(n, d);
            let mut gt = Matrix::zeros(n, d);
            for i in 0..n {
                let m = out.m_spec[(i, 0)];
                let through_weight: f64 = (0..d)
                    .map(|c| grad[(i, c)] * (z_spec[(i, c)] - z_tex[(i, c)]))
                    .sum::<f64>()
                    * m
                    * (1.0 - m)
                    / d as f64;
                for c in 0..d {
                    gs[(i, c)] = grad[(i, c)] * m + through_weight;
                    gt[(i, c)] = grad[(i, c)] * (1.0 - m) - through_weight;
                }
            }
            Ok((gs, gt))
        }
    }
}
