//! Stateless layer kernels with explicit backward passes. Images are single
//! samples laid out `[channels, height, width]`; dense layers take a batch of
//! row vectors.

use super::{gemm, NetError, Tensor};

/// Output extent of a convolution or pooling window.
pub fn out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    (padded >= kernel && stride > 0).then(|| (padded - kernel) / stride + 1)
}

/// Geometry of one convolution call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn new(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Self, NetError> {
        let [c, h, wd] = x.shape[..] else {
            return Err(NetError::Shape(format!("conv input must be CHW, got {:?}", x.shape)));
        };
        let [_, wc, kh, kw] = w.shape[..] else {
            return Err(NetError::Shape(format!("conv weights must be OCKK, got {:?}", w.shape)));
        };
        if wc != c || kh != kw {
            return Err(NetError::Shape(format!(
                "weights {:?} do not fit input {:?}",
                w.shape, x.shape
            )));
        }
        let oh = out_extent(h, kh, stride, pad);
        let ow = out_extent(wd, kw, stride, pad);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(ConvGeometry {
                channels: c,
                height: h,
                width: wd,
                kernel: kh,
                stride,
                pad,
                out_height: oh,
                out_width: ow,
            }),
            _ => Err(NetError::Shape(format!("kernel {kh} does not fit input {:?}", x.shape))),
        }
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_height * self.out_width
    }
}

/// Unfolds every receptive field into a column: `[C*K*K, OH*OW]`.
pub fn im2col(x: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (k, npos) = (g.kernel, g.positions());
    let mut cols = vec![0.0; g.patch_len() * npos];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * npos..(row + 1) * npos];
                for oy in 0..g.out_height {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    let src = &x[(c * g.height + iy as usize) * g.width..];
                    for ox in 0..g.out_width {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            dst[oy * g.out_width + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates columns back onto the image.
pub fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (k, npos) = (g.kernel, g.positions());
    let mut x = vec![0.0; g.channels * g.height * g.width];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * npos..(row + 1) * npos];
                for oy in 0..g.out_height {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    let base = (c * g.height + iy as usize) * g.width;
                    for ox in 0..g.out_width {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            x[base + ix as usize] += src[oy * g.out_width + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Cross-correlation of a CHW image with `[O, C, K, K]` weights. Returns the
/// output and the unfolded input needed by [`conv_backward`].
pub fn conv_forward(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Vec<f64>), NetError> {
    let g = ConvGeometry::new(x, w, stride, pad)?;
    let o = w.shape[0];
    if let Some(b) = b {
        b.expect_shape(&[o], "conv bias")?;
    }
    let cols = im2col(&x.data, &g);
    let npos = g.positions();
    let mut y = vec![0.0; o * npos];
    if let Some(b) = b {
        for (row, bias) in y.chunks_mut(npos).zip(&b.data) {
            row.fill(*bias);
        }
    }
    gemm(o, g.patch_len(), npos, 1.0, &w.data, false, &cols, false, 1.0, &mut y);
    Ok((
        Tensor {
            shape: vec![o, g.out_height, g.out_width],
            data: y,
        },
        cols,
    ))
}

/// Gradients of a convolution with respect to input, weights and bias.
pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn conv_backward(
    x_shape: &[usize],
    cols: &[f64],
    w: &Tensor,
    dy: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads, NetError> {
    let probe = Tensor {
        shape: x_shape.to_vec(),
        data: Vec::new(),
    };
    let g = ConvGeometry::new(&probe, w, stride, pad)?;
    let o = w.shape[0];
    dy.expect_shape(&[o, g.out_height, g.out_width], "conv output gradient")?;
    let npos = g.positions();
    let mut dw = Tensor::zeros(&w.shape);
    gemm(o, npos, g.patch_len(), 1.0, &dy.data, false, cols, true, 0.0, &mut dw.data);
    let db = Tensor {
        shape: vec![o],
        data: dy.data.chunks(npos).map(|r| r.iter().sum()).collect(),
    };
    let mut dcols = vec![0.0; g.patch_len() * npos];
    gemm(g.patch_len(), o, npos, 1.0, &w.data, true, &dy.data, false, 0.0, &mut dcols);
    Ok(ConvGrads {
        dx: Tensor {
            shape: x_shape.to_vec(),
            data: col2im(&dcols, &g),
        },
        dw,
        db,
    })
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Backward through ReLU given its output.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    Tensor {
        shape: y.shape.clone(),
        data: y.data.iter().zip(&dy.data).map(|(y, d)| if *y > 0.0 { *d } else { 0.0 }).collect(),
    }
}

fn pool_shape(x: &Tensor, k: usize) -> Result<(usize, usize, usize, usize, usize), NetError> {
    let [c, h, w] = x.shape[..] else {
        return Err(NetError::Shape(format!("pool input must be CHW, got {:?}", x.shape)));
    };
    if k == 0 || h < k || w < k {
        return Err(NetError::Shape(format!("pool window {k} larger than {:?}", x.shape)));
    }
    Ok((c, h, w, h / k, w / k))
}

/// Non-overlapping `k x k` max pooling (trailing rows and columns dropped).
/// Also returns the flat input index of each maximum.
pub fn maxpool_forward(x: &Tensor, k: usize) -> Result<(Tensor, Vec<usize>), NetError> {
    let (c, h, w, oh, ow) = pool_shape(x, k)?;
    let mut y = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for dy in 0..k {
                    for dx in 0..k {
                        let i = (ch * h + oy * k + dy) * w + ox * k + dx;
                        if x.data[i] > best.1 {
                            best = (i, x.data[i]);
                        }
                    }
                }
                y.push(best.1);
                arg.push(best.0);
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![c, oh, ow],
            data: y,
        },
        arg,
    ))
}

pub fn maxpool_backward(x_shape: &[usize], argmax: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(x_shape);
    for (i, d) in argmax.iter().zip(&dy.data) {
        dx.data[*i] += d;
    }
    dx
}

/// Non-overlapping `k x k` average pooling.
pub fn avgpool_forward(x: &Tensor, k: usize) -> Result<Tensor, NetError> {
    let (c, h, w, oh, ow) = pool_shape(x, k)?;
    let norm = 1.0 / (k * k) as f64;
    let mut y = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for dy in 0..k {
                let row = &x.data[(ch * h + oy * k + dy) * w..];
                let out = &mut y[(ch * oh + oy) * ow..(ch * oh + oy + 1) * ow];
                for (ox, o) in out.iter_mut().enumerate() {
                    for dx in 0..k {
                        *o += row[ox * k + dx] * norm;
                    }
                }
            }
        }
    }
    Ok(Tensor {
        shape: vec![c, oh, ow],
        data: y,
    })
}

pub fn avgpool_backward(x_shape: &[usize], k: usize, dy: &Tensor) -> Tensor {
    let (c, h, w) = (x_shape[0], x_shape[1], x_shape[2]);
    let (oh, ow) = (h / k, w / k);
    let norm = 1.0 / (k * k) as f64;
    let mut dx = Tensor::zeros(x_shape);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let d = dy.data[(ch * oh + oy) * ow + ox] * norm;
                for dy_ in 0..k {
                    for dx_ in 0..k {
                        dx.data[(ch * h + oy * k + dy_) * w + ox * k + dx_] += d;
                    }
                }
            }
        }
    }
    dx
}

/// Mean over the spatial extent: `[C, H, W] -> [C]`.
pub fn gap_forward(x: &Tensor) -> Tensor {
    let c = x.shape[0];
    let n = x.len() / c;
    Tensor {
        shape: vec![c],
        data: x.data.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect(),
    }
}

pub fn gap_backward(x_shape: &[usize], dy: &Tensor) -> Tensor {
    let n: usize = x_shape[1..].iter().product();
    Tensor {
        shape: x_shape.to_vec(),
        data: dy.data.iter().flat_map(|d| std::iter::repeat(d / n as f64).take(n)).collect(),
    }
}

/// `Y = X W^T + b` for a batch `X: [N, I]`, `W: [O, I]`, `b: [O]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, NetError> {
    let [n, i] = x.shape[..] else {
        return Err(NetError::Shape(format!("dense input must be [N, I], got {:?}", x.shape)));
    };
    let o = w.shape[0];
    w.expect_shape(&[o, i], "dense weights")?;
    b.expect_shape(&[o], "dense bias")?;
    let mut y = Vec::with_capacity(n * o);
    for _ in 0..n {
        y.extend_from_slice(&b.data);
    }
    gemm(n, i, o, 1.0, &x.data, false, &w.data, true, 1.0, &mut y);
    Ok(Tensor { shape: vec![n, o], data: y })
}

pub struct DenseGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> DenseGrads {
    let (n, i, o) = (x.shape[0], x.shape[1], w.shape[0]);
    let mut dx = Tensor::zeros(&[n, i]);
    gemm(n, o, i, 1.0, &dy.data, false, &w.data, false, 0.0, &mut dx.data);
    let mut dw = Tensor::zeros(&[o, i]);
    gemm(o, n, i, 1.0, &dy.data, true, &x.data, false, 0.0, &mut dw.data);
    let mut db = Tensor::zeros(&[o]);
    for row in dy.data.chunks(o) {
        for (acc, d) in db.data.iter_mut().zip(row) {
            *acc += d;
        }
    }
    DenseGrads { dx, dw, db }
}

/// Huber loss of a residual `e`: quadratic inside `kappa`, linear outside.
pub fn huber_loss(pred: f64, target: f64, kappa: f64) -> f64 {
    let e = pred - target;
    if e.abs() <= kappa {
        0.5 * e * e
    } else {
        kappa * (e.abs() - 0.5 * kappa)
    }
}

/// Derivative of [`huber_loss`] with respect to `pred`.
pub fn huber_grad(pred: f64, target: f64, kappa: f64) -> f64 {
    (pred - target).clamp(-kappa, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct quadruple loop, independent of the im2col path.
    fn conv_reference(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (c, h, wd) = (x.shape[0], x.shape[1], x.shape[2]);
        let (o, k) = (w.shape[0], w.shape[2]);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut y = Tensor::zeros(&[o, oh, ow]);
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.data[(ic * h + iy as usize) * wd + ix as usize]
                                        * w.data[((oc * c + ic) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    y.data[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[3, 4, 5], &mut rng);
        let mut w = Tensor::zeros(&[3, 3, 1, 1]);
        for c in 0..3 {
            w.data[c * 3 + c] = 1.0;
        }
        assert_eq!(conv_forward(&x, &w, None, 1, 0).unwrap().0, x);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random(&[4, 2, 3, 3], &mut rng);
        let (y, _) = conv_forward(&Tensor::zeros(&[2, 6, 6]), &w, None, 1, 1).unwrap();
        assert!(y.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
            let x = random(&[2, 6, 6], &mut rng);
            let w = random(&[3, 2, 3, 3], &mut rng);
            let (y, _) = conv_forward(&x, &w, None, stride, pad).unwrap();
            let r = conv_reference(&x, &w, stride, pad);
            assert_eq!(y.shape, r.shape);
            for (a, b) in y.data.iter().zip(&r.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_mismatched_channels() {
        let x = Tensor::zeros(&[2, 5, 5]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv_forward(&x, &w, None, 1, 1), Err(NetError::Shape(_))));
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss(0.0, 0.0, 1.0), 0.0);
        let k = 0.7;
        let inner = 0.5 * k * k;
        assert!((huber_loss(k, 0.0, k) - inner).abs() < 1e-15);
        assert!((huber_loss(k + 1e-12, 0.0, k) - inner).abs() < 1e-11);
        assert_eq!(huber_grad(5.0, 0.0, k), k);
        assert_eq!(huber_grad(-5.0, 0.0, k), -k);
    }

    #[test]
    fn pooling_shapes() {
        let x = Tensor::zeros(&[2, 5, 7]);
        assert_eq!(maxpool_forward(&x, 2).unwrap().0.shape, vec![2, 2, 3]);
        assert_eq!(avgpool_forward(&x, 2).unwrap().shape, vec![2, 2, 3]);
        assert!(maxpool_forward(&Tensor::zeros(&[1, 1, 4]), 2).is_err());
    }
}
