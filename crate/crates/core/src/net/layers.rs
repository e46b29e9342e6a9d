//! Forward kernels for the layer kinds a network spec can name.

use crate::error::{Error, Result};
use crate::tensor::{gemm_slices, Tensor};

/// Output extent of a sliding window, or `None` when the window does not fit.
pub fn window_extent(len: usize, pad: usize, kernel: usize, stride: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if kernel == 0 || stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Grouped 2-D convolution with zero padding, computed as im2col + gemm.
///
/// `weights` is `[C_out, C_in / groups, kh, kw]`; output channel block `g`
/// only reads input channel block `g`.
pub fn conv_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
    groups: usize,
) -> Result<Tensor> {
    let (c_in, h, w) = input.chw()?;
    let (c_out, c_per_group, kh, kw) = match weights.shape() {
        [a, b, c, d] => (*a, *b, *c, *d),
        s => {
            return Err(Error::shape(format!(
                "convolution weights must be 4-D, got {s:?}"
            )))
        }
    };
    if stride == 0 {
        return Err(Error::invalid("convolution stride must be at least 1"));
    }
    if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
        return Err(Error::invalid(format!(
            "groups={groups} must divide input channels {c_in} and output channels {c_out}"
        )));
    }
    if c_per_group != c_in / groups {
        return Err(Error::shape(format!(
            "weights expect {c_per_group} channels per group, input provides {}",
            c_in / groups
        )));
    }
    if bias.len() != c_out {
        return Err(Error::shape(format!(
            "bias has {} entries for {c_out} output channels",
            bias.len()
        )));
    }
    let (oh, ow) = match (
        window_extent(h, pad, kh, stride),
        window_extent(w, pad, kw, stride),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::shape(format!(
                "{kh}x{kw} kernel with pad {pad} does not fit a {h}x{w} input"
            )))
        }
    };

    let out_per_group = c_out / groups;
    let k = c_per_group * kh * kw;
    let n = oh * ow;
    let mut out = vec![0.0f32; c_out * n];
    let mut cols = vec![0.0f32; k * n];
    let src = input.data();
    let wdata = weights.data();
    for g in 0..groups {
        let in_block = &src[g * c_per_group * h * w..(g + 1) * c_per_group * h * w];
        im2col(in_block, c_per_group, h, w, kh, kw, stride, pad, oh, ow, &mut cols);
        let wg = &wdata[g * out_per_group * k..(g + 1) * out_per_group * k];
        let og = &mut out[g * out_per_group * n..(g + 1) * out_per_group * n];
        gemm_slices(out_per_group, k, n, wg, &cols, og);
    }
    for (plane, &b) in out.chunks_exact_mut(n).zip(bias.data()) {
        for v in plane {
            *v += b;
        }
    }
    Tensor::new(vec![c_out, oh, ow], out)
}

/// Unrolls windows into a `[C * kh * kw, oh * ow]` matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    input: &[f32],
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [f32],
) {
    let n = oh * ow;
    for c in 0..channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub(crate) fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Cross-channel local response normalization:
/// `b_c = a_c / (k + alpha * sum_{j in window(c)} a_j^2)^beta`, where the
/// window holds the `size` channels centered on `c`, clipped to the tensor.
pub fn lrn(input: &Tensor, size: usize, k: f32, alpha: f32, beta: f32) -> Result<Tensor> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("LRN size must be odd, got {size}")));
    }
    let (c, h, w) = input.chw()?;
    let plane = h * w;
    let half = size / 2;
    let a = input.data();
    let sq: Vec<f32> = a.iter().map(|v| v * v).collect();
    let mut out = vec![0.0f32; a.len()];
    for ch in 0..c {
        let lo = ch.saturating_sub(half);
        let hi = (ch + half).min(c - 1);
        for i in 0..plane {
            let mut s = 0.0f32;
            for j in lo..=hi {
                s += sq[j * plane + i];
            }
            out[ch * plane + i] = a[ch * plane + i] / (k + alpha * s).powf(beta);
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Per-channel max over `window x window` regions, no padding.
pub fn max_pool(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let (c, h, w) = input.chw()?;
    if stride == 0 {
        return Err(Error::invalid("pooling stride must be at least 1"));
    }
    let (oh, ow) = match (
        window_extent(h, 0, window, stride),
        window_extent(w, 0, window, stride),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::shape(format!(
                "pooling window {window} exceeds {h}x{w} input"
            )))
        }
    };
    let a = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &a[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for y in oy * stride..oy * stride + window {
                    for &v in &plane[y * w + ox * stride..y * w + ox * stride + window] {
                        m = m.max(v);
                    }
                }
                out.push(m);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// `y = W x + b` with `W` of shape `[out, in]`; the input is flattened.
/// Dot products accumulate in f64.
pub fn fc_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n_out, n_in) = match weights.shape() {
        [o, i] => (*o, *i),
        s => {
            return Err(Error::shape(format!(
                "fully connected weights must be 2-D, got {s:?}"
            )))
        }
    };
    if input.len() != n_in {
        return Err(Error::shape(format!(
            "fully connected layer expects {n_in} inputs, got {}",
            input.len()
        )));
    }
    if bias.len() != n_out {
        return Err(Error::shape(format!(
            "bias has {} entries for {n_out} outputs",
            bias.len()
        )));
    }
    const ROWS: usize = 8;
    let x: Vec<f64> = input.data().iter().map(|&v| f64::from(v)).collect();
    let w = weights.data();
    let mut out = vec![0.0f32; n_out];
    for (r0, chunk) in out.chunks_mut(ROWS).enumerate().map(|(i, c)| (i * ROWS, c)) {
        let rows = chunk.len();
        let mut acc = [0.0f64; ROWS];
        if rows == ROWS {
            let wr: [&[f32]; ROWS] =
                std::array::from_fn(|r| &w[(r0 + r) * n_in..(r0 + r + 1) * n_in]);
            for (p, &xv) in x.iter().enumerate() {
                for r in 0..ROWS {
                    acc[r] += f64::from(wr[r][p]) * xv;
                }
            }
        } else {
            for (r, a) in acc.iter_mut().enumerate().take(rows) {
                let wr = &w[(r0 + r) * n_in..(r0 + r + 1) * n_in];
                for (&wv, &xv) in wr.iter().zip(&x) {
                    *a += f64::from(wv) * xv;
                }
            }
        }
        for (r, o) in chunk.iter_mut().enumerate() {
            *o = (acc[r] + f64::from(bias.data()[r0 + r])) as f32;
        }
    }
    Tensor::new(vec![n_out], out)
}

/// Numerically stable softmax over a vector.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    let x = input.data();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input contains non-finite values"));
    }
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = x.iter().map(|&v| f64::from(v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let out = exps.iter().map(|&e| (e / total) as f32).collect();
    Tensor::new(input.shape().to_vec(), out)
}
