//! 2-D convolution, stride 1, zero "same" padding.
//!
//! Implemented as im2col + matmul; the direct six-loop form is kept in the
//! tests as an independent oracle.

use crate::error::{Error, Result};
use crate::tensor::{matmul_at_into, matmul_bt_into, matmul_into, Element, Tensor};

/// Convolution layer. Weights are `[Cout, Cin, K, K]`, bias `[Cout]`.
/// Stride is fixed at 1 and padding is "same", so spatial extents are
/// preserved.
#[derive(Debug, Clone)]
pub struct Conv2d<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Forward-pass state needed by [`Conv2d::backward`].
#[derive(Debug, Clone)]
pub struct ConvCache<T = f32> {
    pub x: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T = f32> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Element> Conv2d<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [cout, _cin, kh, kw] = match weights.shape() {
            &[a, b, c, d] => [a, b, c, d],
            s => {
                return Err(Error::Shape(format!(
                    "conv weights must be rank 4 [Cout,Cin,Kh,Kw], got {s:?}"
                )))
            }
        };
        if kh != kw || !matches!(kh, 1 | 3 | 5) {
            return Err(Error::Shape(format!(
                "conv kernel must be square with odd extent ≤ 5, got {kh}x{kw}"
            )));
        }
        if bias.shape() != [cout] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {cout} output channels",
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    /// y[n,o,i,j] = bias[o] + Σ_{c,u,v} w[o,c,u,v]·xpad[n,c,i+u,j+v]
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        let (n, cin, h, w) = dims4(x, "conv input")?;
        if cin != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv: input has {cin} channels, layer expects {}",
                self.in_channels()
            )));
        }
        let k = self.kernel();
        let cout = self.out_channels();
        let ck = cin * k * k;
        let hw = h * w;

        let mut y = vec![T::zero(); n * cout * hw];
        // Padding columns are identical for every sample, so the buffer is
        // zeroed once; im2col rewrites only the in-bounds spans.
        let mut cols = vec![T::zero(); ck * hw];
        for s in 0..n {
            let xs = &x.data()[s * cin * hw..(s + 1) * cin * hw];
            im2col(xs, cin, h, w, k, &mut cols);
            let ys = &mut y[s * cout * hw..(s + 1) * cout * hw];
            matmul_into(self.weights.data(), &cols, ys, cout, ck, hw);
            for o in 0..cout {
                let b = self.bias.data()[o];
                for v in &mut ys[o * hw..(o + 1) * hw] {
                    *v = *v + b;
                }
            }
        }
        let y = Tensor::from_vec(&[n, cout, h, w], y)?;
        Ok((y, ConvCache { x: x.clone() }))
    }

    /// Exact gradients of the forward map.
    pub fn backward(&self, cache: &ConvCache<T>, dy: &Tensor<T>) -> Result<ConvGrads<T>> {
        let (n, cin, h, w) = dims4(&cache.x, "conv cache")?;
        let cout = self.out_channels();
        if dy.shape() != [n, cout, h, w] {
            return Err(Error::Shape(format!(
                "conv backward: dy shape {:?} does not match forward output [{n}, {cout}, {h}, {w}]",
                dy.shape()
            )));
        }
        if cin != self.in_channels() {
            return Err(Error::Shape("conv backward: cache from a different layer".into()));
        }
        let k = self.kernel();
        let ck = cin * k * k;
        let hw = h * w;

        let mut dw = vec![T::zero(); cout * ck];
        let mut db = vec![T::zero(); cout];
        let mut dx = vec![T::zero(); n * cin * hw];
        let mut cols = vec![T::zero(); ck * hw];
        let mut dcols = vec![T::zero(); ck * hw];

        for s in 0..n {
            let xs = &cache.x.data()[s * cin * hw..(s + 1) * cin * hw];
            let dys = &dy.data()[s * cout * hw..(s + 1) * cout * hw];

            im2col(xs, cin, h, w, k, &mut cols);
            // dw += dy_s · colsᵀ
            matmul_bt_into(dys, &cols, &mut dw, cout, hw, ck);
            // dcols = wᵀ · dy_s, scattered back through the padding map
            for v in &mut dcols {
                *v = T::zero();
            }
            matmul_at_into(self.weights.data(), dys, &mut dcols, cout, ck, hw);
            col2im(&dcols, cin, h, w, k, &mut dx[s * cin * hw..(s + 1) * cin * hw]);

            for o in 0..cout {
                let mut acc = T::zero();
                for &v in &dys[o * hw..(o + 1) * hw] {
                    acc = acc + v;
                }
                db[o] = db[o] + acc;
            }
        }

        Ok(ConvGrads {
            dx: Tensor::from_vec(&[n, cin, h, w], dx)?,
            dw: Tensor::from_vec(self.weights.shape(), dw)?,
            db: Tensor::from_vec(&[cout], db)?,
        })
    }
}

pub(crate) fn dims4<T: Element>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        &[n, c, h, w] => Ok((n, c, h, w)),
        s => Err(Error::Shape(format!("{what}: expected rank 4, got {s:?}"))),
    }
}

/// Unfold one sample `[Cin,H,W]` into `[Cin·K·K, H·W]` columns for a
/// stride-1 "same" convolution. Out-of-bounds taps stay zero; callers must
/// pass a buffer whose padding positions are already zero.
fn im2col<T: Element>(x: &[T], cin: usize, h: usize, w: usize, k: usize, out: &mut [T]) {
    let pad = (k - 1) / 2;
    let hw = h * w;
    for c in 0..cin {
        for u in 0..k {
            for v in 0..k {
                let row = ((c * k + u) * k + v) * hw;
                // source row index si = i + u - pad, column sj = j + v - pad
                for i in 0..h {
                    let si = i as isize + u as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let j0 = (pad as isize - v as isize).max(0) as usize;
                    let j1 = (w as isize + pad as isize - v as isize).min(w as isize) as usize;
                    if j0 >= j1 {
                        continue;
                    }
                    let src = c * hw + si as usize * w + (j0 + v - pad);
                    let dst = row + i * w + j0;
                    out[dst..dst + (j1 - j0)].copy_from_slice(&x[src..src + (j1 - j0)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add column gradients back to `[Cin,H,W]`.
fn col2im<T: Element>(cols: &[T], cin: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let pad = (k - 1) / 2;
    let hw = h * w;
    for c in 0..cin {
        for u in 0..k {
            for v in 0..k {
                let row = ((c * k + u) * k + v) * hw;
                for i in 0..h {
                    let si = i as isize + u as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let j0 = (pad as isize - v as isize).max(0) as usize;
                    let j1 = (w as isize + pad as isize - v as isize).min(w as isize) as usize;
                    if j0 >= j1 {
                        continue;
                    }
                    let dst = c * hw + si as usize * w + (j0 + v - pad);
                    let src = row + i * w + j0;
                    for t in 0..j1 - j0 {
                        dx[dst + t] = dx[dst + t] + cols[src + t];
                    }
                }
            }
        }
    }
}
