//! Differentiable core and the clip regressor: a small convolutional encoder
//! applied per frame, an LSTM over the five frames and an affine head that
//! emits a hardness estimate at every step.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod model;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use layers::{huber_grad, huber_loss};
pub use lstm::{LstmParams, LstmState};
pub use model::{predict_hardness, Architecture, Model};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint version {found} is newer than supported version {supported}")]
    FutureVersion { found: u32, supported: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NetError> {
        let n: usize = shape.iter().product();
        if n != data.len() || shape.iter().any(|d| *d == 0) {
            return Err(NetError::Shape(format!("{:?} does not hold {} values", shape, data.len())));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub(crate) fn expect_shape(&self, shape: &[usize], what: &str) -> Result<(), NetError> {
        if self.shape != shape {
            return Err(NetError::Shape(format!("{what}: expected {:?}, got {:?}", shape, self.shape)));
        }
        Ok(())
    }
}

/// `C = alpha * op(A) * op(B) + beta * C` for row-major operands, where
/// `op(A)` is `m x k` and `op(B)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly the extents described by the strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_loops_for_every_transpose() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let at: Vec<f64> = (0..k * m).map(|i| a[(i % m) * k + i / m]).collect();
        let bt: Vec<f64> = (0..n * k).map(|i| b[(i % k) * n + i / k]).collect();
        let mut expect = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    expect[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut c = vec![0.0; m * n];
            let aa = if ta { &at } else { &a };
            let bb = if tb { &bt } else { &b };
            gemm(m, k, n, 1.0, aa, ta, bb, tb, 0.0, &mut c);
            for (x, y) in c.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_rejects_wrong_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert_eq!(Tensor::zeros(&[2, 3]).len(), 6);
    }
}
