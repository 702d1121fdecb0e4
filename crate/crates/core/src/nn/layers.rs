//! Forward and backward passes for the fixed layer set.

use super::tensor::{axpy, dot, sum, Scalar, Shape, Tensor};
use crate::{Error, Result};

const TAPS: usize = 9;

/// Gradients of a convolution-like layer.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

fn check_conv(xs: Shape, ws: Shape, b: usize) -> Result<()> {
    if ws.h != 3 || ws.w != 3 {
        return Err(Error::Shape(format!(
            "conv2d kernel must be 3x3, got {}x{}",
            ws.h, ws.w
        )));
    }
    if ws.c != xs.c {
        return Err(Error::Shape(format!(
            "conv2d expects {} input channels, got {}",
            ws.c, xs.c
        )));
    }
    if b != ws.n {
        return Err(Error::Shape(format!(
            "conv2d bias has {b} entries for {} output channels",
            ws.n
        )));
    }
    Ok(())
}

/// Unfolds one sample into `cin * 9` shifted copies of each input plane
/// (zero padding 1).
fn im2col<T: Scalar>(x: &[T], cin: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ci in 0..cin {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * TAPS + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates the column gradients back into `dx`.
fn col2im<T: Scalar>(cols: &[T], cin: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for ci in 0..cin {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * TAPS + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    let (d, s) = match kx {
                        0 => (&mut dst[..w - 1], &src[1..]),
                        1 => (&mut dst[..], src),
                        _ => (&mut dst[1..], &src[..w - 1]),
                    };
                    for (a, &b) in d.iter_mut().zip(s) {
                        *a = *a + b;
                    }
                }
            }
        }
    }
}

/// 3x3 convolution, stride 1, zero padding 1.
///
/// `w` has shape `(cout, cin, 3, 3)` and `b` holds `cout` biases.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let xs = x.shape();
    let ws = w.shape();
    check_conv(xs, ws, b.len())?;
    let (cout, hw, kk) = (ws.n, xs.plane(), xs.c * TAPS);
    let mut out = Tensor::zeros(Shape::new(xs.n, cout, xs.h, xs.w)?);
    let mut cols = vec![T::zero(); kk * hw];
    let wd = w.data();
    for n in 0..xs.n {
        im2col(x.sample(n), xs.c, xs.h, xs.w, &mut cols);
        let os = out.sample_mut(n);
        let mut co = 0;
        // four output channels per pass share each column load
        while co + 4 <= cout {
            let (r0, rest) = os[co * hw..(co + 4) * hw].split_at_mut(hw);
            let (r1, rest) = rest.split_at_mut(hw);
            let (r2, r3) = rest.split_at_mut(hw);
            r0.fill(b.data()[co]);
            r1.fill(b.data()[co + 1]);
            r2.fill(b.data()[co + 2]);
            r3.fill(b.data()[co + 3]);
            for k in 0..kk {
                let col = &cols[k * hw..(k + 1) * hw];
                let a0 = wd[co * kk + k];
                let a1 = wd[(co + 1) * kk + k];
                let a2 = wd[(co + 2) * kk + k];
                let a3 = wd[(co + 3) * kk + k];
                for ((((o0, o1), o2), o3), &c) in r0
                    .iter_mut()
                    .zip(r1.iter_mut())
                    .zip(r2.iter_mut())
                    .zip(r3.iter_mut())
                    .zip(col)
                {
                    *o0 = *o0 + a0 * c;
                    *o1 = *o1 + a1 * c;
                    *o2 = *o2 + a2 * c;
                    *o3 = *o3 + a3 * c;
                }
            }
            co += 4;
        }
        while co < cout {
            let row = &mut os[co * hw..(co + 1) * hw];
            row.fill(b.data()[co]);
            for k in 0..kk {
                axpy(row, wd[co * kk + k], &cols[k * hw..(k + 1) * hw]);
            }
            co += 1;
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let xs = x.shape();
    let ws = w.shape();
    check_conv(xs, ws, ws.n)?;
    let expected = Shape::new(xs.n, ws.n, xs.h, xs.w)?;
    if dout.shape() != expected {
        return Err(Error::Shape(format!(
            "conv2d upstream gradient {} does not match output {expected}",
            dout.shape()
        )));
    }
    let (cout, hw, kk) = (ws.n, xs.plane(), xs.c * TAPS);
    let mut dx = Tensor::zeros(xs);
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(cout, 1, 1, 1)?);
    let mut cols = vec![T::zero(); kk * hw];
    let mut dcols = vec![T::zero(); kk * hw];
    let wd = w.data();
    for n in 0..xs.n {
        im2col(x.sample(n), xs.c, xs.h, xs.w, &mut cols);
        for co in 0..cout {
            let g = dout.plane(n, co);
            db.data_mut()[co] = db.data()[co] + sum(g);
            let dwd = &mut dw.data_mut()[co * kk..(co + 1) * kk];
            for (k, d) in dwd.iter_mut().enumerate() {
                *d = *d + dot(g, &cols[k * hw..(k + 1) * hw]);
            }
        }
        for k in 0..kk {
            let row = &mut dcols[k * hw..(k + 1) * hw];
            row.fill(T::zero());
            for co in 0..cout {
                axpy(row, wd[co * kk + k], dout.plane(n, co));
            }
        }
        col2im(&dcols, xs.c, xs.h, xs.w, dx.sample_mut(n));
    }
    Ok(ConvGrads { dx, dw, db })
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes the gradient where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, dout: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != dout.shape() {
        return Err(Error::Shape(format!(
            "relu gradient {} vs input {}",
            dout.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(dout.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Argmax positions recorded by [`maxpool2`], one per output element, as an
/// offset into the corresponding input plane.
#[derive(Clone, Debug)]
pub struct PoolIndices {
    input: Shape,
    argmax: Vec<u32>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> Shape {
        self.input
    }
}

/// 2x2 max pooling with stride 2. Ties go to the first element in scan order.
pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let s = x.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool2 needs even spatial dims, got {}x{}",
            s.h, s.w
        )));
    }
    let (oh, ow) = (s.h / 2, s.w / 2);
    let os = Shape::new(s.n, s.c, oh, ow)?;
    let mut out = Tensor::zeros(os);
    let mut argmax = vec![0u32; os.numel()];
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            let base = (n * s.c + c) * oh * ow;
            let dst = out.plane_mut(n, c);
            for y in 0..oh {
                for xo in 0..ow {
                    let mut best = (2 * y) * s.w + 2 * xo;
                    for idx in [
                        (2 * y) * s.w + 2 * xo + 1,
                        (2 * y + 1) * s.w + 2 * xo,
                        (2 * y + 1) * s.w + 2 * xo + 1,
                    ] {
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    dst[y * ow + xo] = src[best];
                    argmax[base + y * ow + xo] = best as u32;
                }
            }
        }
    }
    Ok((out, PoolIndices { input: s, argmax }))
}

pub fn maxpool2_backward<T: Scalar>(dout: &Tensor<T>, indices: &PoolIndices) -> Result<Tensor<T>> {
    let s = indices.input;
    let expected = Shape::new(s.n, s.c, s.h / 2, s.w / 2)?;
    if dout.shape() != expected {
        return Err(Error::Shape(format!(
            "maxpool2 upstream gradient {} does not match output {expected}",
            dout.shape()
        )));
    }
    let mut dx = Tensor::zeros(s);
    let op = expected.plane();
    for n in 0..s.n {
        for c in 0..s.c {
            let g = dout.plane(n, c);
            let base = (n * s.c + c) * op;
            let dst = dx.plane_mut(n, c);
            for (i, &gv) in g.iter().enumerate() {
                let idx = indices.argmax[base + i] as usize;
                dst[idx] = dst[idx] + gv;
            }
        }
    }
    Ok(dx)
}

fn check_deconv(xs: Shape, ws: Shape, b: usize) -> Result<()> {
    if ws.h != 2 || ws.w != 2 {
        return Err(Error::Shape(format!(
            "deconv2 kernel must be 2x2, got {}x{}",
            ws.h, ws.w
        )));
    }
    if ws.n != xs.c {
        return Err(Error::Shape(format!(
            "deconv2 expects {} input channels, got {}",
            ws.n, xs.c
        )));
    }
    if b != ws.c {
        return Err(Error::Shape(format!(
            "deconv2 bias has {b} entries for {} output channels",
            ws.c
        )));
    }
    Ok(())
}

/// Transposed convolution with a 2x2 kernel and stride 2. Each input pixel
/// paints its own 2x2 output block, so the output is exactly twice the size.
///
/// `w` has shape `(cin, cout, 2, 2)`.
pub fn deconv2<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let xs = x.shape();
    let ws = w.shape();
    check_deconv(xs, ws, b.len())?;
    let cout = ws.c;
    let (h, wd) = (xs.h, xs.w);
    let mut out = Tensor::zeros(Shape::new(xs.n, cout, 2 * h, 2 * wd)?);
    let mut tmp = vec![T::zero(); h * wd];
    for n in 0..xs.n {
        for co in 0..cout {
            let bias = b.data()[co];
            for dy in 0..2 {
                for dx in 0..2 {
                    tmp.fill(T::zero());
                    for ci in 0..xs.c {
                        let k = w.data()[((ci * cout + co) * 2 + dy) * 2 + dx];
                        axpy(&mut tmp, k, x.plane(n, ci));
                    }
                    let dst = out.plane_mut(n, co);
                    for y in 0..h {
                        let row = &mut dst[(2 * y + dy) * 2 * wd..(2 * y + dy + 1) * 2 * wd];
                        for xi in 0..wd {
                            row[2 * xi + dx] = tmp[y * wd + xi] + bias;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn deconv2_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let xs = x.shape();
    let ws = w.shape();
    check_deconv(xs, ws, ws.c)?;
    let cout = ws.c;
    let (h, wd) = (xs.h, xs.w);
    let expected = Shape::new(xs.n, cout, 2 * h, 2 * wd)?;
    if dout.shape() != expected {
        return Err(Error::Shape(format!(
            "deconv2 upstream gradient {} does not match output {expected}",
            dout.shape()
        )));
    }
    let mut dx = Tensor::zeros(xs);
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(cout, 1, 1, 1)?);
    let mut g = vec![T::zero(); h * wd];
    for n in 0..xs.n {
        for co in 0..cout {
            let src = dout.plane(n, co);
            db.data_mut()[co] = db.data()[co] + sum(src);
            for dy in 0..2 {
                for ddx in 0..2 {
                    for y in 0..h {
                        let row = &src[(2 * y + dy) * 2 * wd..(2 * y + dy + 1) * 2 * wd];
                        for xi in 0..wd {
                            g[y * wd + xi] = row[2 * xi + ddx];
                        }
                    }
                    for ci in 0..xs.c {
                        let widx = ((ci * cout + co) * 2 + dy) * 2 + ddx;
                        let xin = x.plane(n, ci);
                        dw.data_mut()[widx] = dw.data()[widx] + dot(xin, &g);
                        axpy(dx.plane_mut(n, ci), w.data()[widx], &g);
                    }
                }
            }
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

/// Channel-wise concatenation, `a`'s channels first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
        return Err(Error::Shape(format!("concat_channels: {sa} vs {sb}")));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for n in 0..sa.n {
        data.extend_from_slice(a.sample(n));
        data.extend_from_slice(b.sample(n));
    }
    Tensor::from_vec(Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w)?, data)
}

/// Inverse of [`concat_channels`]: the first `channels` go to the left half.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, channels: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = t.shape();
    if channels == 0 || channels >= s.c {
        return Err(Error::Shape(format!(
            "cannot split {} channels at {channels}",
            s.c
        )));
    }
    let cut = channels * s.plane();
    let mut left = Vec::with_capacity(s.n * cut);
    let mut right = Vec::with_capacity(t.len() - s.n * cut);
    for n in 0..s.n {
        let sample = t.sample(n);
        left.extend_from_slice(&sample[..cut]);
        right.extend_from_slice(&sample[cut..]);
    }
    Ok((
        Tensor::from_vec(Shape::new(s.n, channels, s.h, s.w)?, left)?,
        Tensor::from_vec(Shape::new(s.n, s.c - channels, s.h, s.w)?, right)?,
    ))
}

fn check_two_channels(s: Shape) -> Result<()> {
    if s.c != 2 {
        return Err(Error::Shape(format!(
            "softmax_channels expects 2 channels, got {}",
            s.c
        )));
    }
    Ok(())
}

/// Per-pixel softmax over the two class channels (0 = background,
/// 1 = foreground), with max subtraction.
pub fn softmax_channels<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    check_two_channels(s)?;
    let mut out = Tensor::zeros(s);
    let hw = s.plane();
    for n in 0..s.n {
        let src = x.sample(n);
        let dst = out.sample_mut(n);
        for p in 0..hw {
            let (z0, z1) = (src[p], src[hw + p]);
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            let total = e0 + e1;
            dst[p] = e0 / total;
            dst[hw + p] = e1 / total;
        }
    }
    Ok(out)
}

/// Gradient with respect to the logits given the softmax output and the
/// gradient with respect to the probabilities.
pub fn softmax_channels_backward<T: Scalar>(prob: &Tensor<T>, dprob: &Tensor<T>) -> Result<Tensor<T>> {
    let s = prob.shape();
    check_two_channels(s)?;
    if dprob.shape() != s {
        return Err(Error::Shape(format!(
            "softmax gradient {} vs output {s}",
            dprob.shape()
        )));
    }
    let mut dz = Tensor::zeros(s);
    let hw = s.plane();
    for n in 0..s.n {
        let p = prob.sample(n);
        let g = dprob.sample(n);
        let dst = dz.sample_mut(n);
        for i in 0..hw {
            let inner = p[i] * g[i] + p[hw + i] * g[hw + i];
            dst[i] = p[i] * (g[i] - inner);
            dst[hw + i] = p[hw + i] * (g[hw + i] - inner);
        }
    }
    Ok(dz)
}
