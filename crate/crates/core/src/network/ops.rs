//! Stride-2 3D convolution and transposed convolution with their
//! backward passes. Weights are laid out `[out][in][kz][ky][kx]` for both.

use super::volume::Volume;
use crate::scalar::Scalar;

/// Negative-side slope of the rectifier.
pub const LEAK: f64 = 0.01;

pub const DECONV_KERNEL: usize = 4;
const STRIDE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvOp {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub transposed: bool,
}

impl ConvOp {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            transposed: false,
        }
    }

    pub fn deconv(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel: DECONV_KERNEL,
            transposed: true,
        }
    }

    pub fn padding(&self) -> usize {
        if self.transposed {
            1
        } else {
            self.kernel / 2
        }
    }

    pub fn out_side(&self, in_side: usize) -> usize {
        let (k, p) = (self.kernel, self.padding());
        if self.transposed {
            (in_side - 1) * STRIDE + k - 2 * p
        } else {
            (in_side + 2 * p - k) / STRIDE + 1
        }
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.pow(3)
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel_volume()
    }

    /// Inputs feeding one output cell, for fan-in scaled initialization.
    pub fn fan_in(&self) -> usize {
        if self.transposed {
            self.in_ch * (self.kernel / STRIDE).pow(3)
        } else {
            self.in_ch * self.kernel_volume()
        }
    }

    /// Index range along one axis touched by kernel offset `k`.
    fn span(&self, k: usize, n_in: usize, n_out: usize) -> Span {
        let p = self.padding() as isize;
        let k = k as isize;
        let s = STRIDE as isize;
        // conv: i = s*o + k - p; transposed: o = s*i + k - p
        let (n_free, n_bound) = if self.transposed {
            (n_in as isize, n_out as isize)
        } else {
            (n_out as isize, n_in as isize)
        };
        let lo = (p - k).max(0);
        let lo = (lo + s - 1) / s;
        let hi = (n_bound - 1 + p - k).div_euclid(s).min(n_free - 1);
        if hi < lo {
            return Span::EMPTY;
        }
        let len = (hi - lo + 1) as usize;
        let bound0 = (s * lo + k - p) as usize;
        if self.transposed {
            Span {
                i0: lo as usize,
                o0: bound0,
                len,
            }
        } else {
            Span {
                i0: bound0,
                o0: lo as usize,
                len,
            }
        }
    }

    fn steps(&self) -> (usize, usize) {
        if self.transposed {
            (1, STRIDE)
        } else {
            (STRIDE, 1)
        }
    }

    fn spans(&self, n_in: usize, n_out: usize) -> Vec<Span> {
        (0..self.kernel).map(|k| self.span(k, n_in, n_out)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Span {
    i0: usize,
    o0: usize,
    len: usize,
}

impl Span {
    const EMPTY: Span = Span { i0: 0, o0: 0, len: 0 };
}

/// Visits every (input index, output index) pair for one kernel offset.
#[inline(always)]
fn walk(
    sx: Span,
    sy: Span,
    sz: Span,
    n_in: usize,
    n_out: usize,
    (si, so): (usize, usize),
    mut row: impl FnMut(usize, usize, usize),
) {
    if sx.len == 0 || sy.len == 0 || sz.len == 0 {
        return;
    }
    for tz in 0..sz.len {
        let iz = sz.i0 + si * tz;
        let oz = sz.o0 + so * tz;
        for ty in 0..sy.len {
            let iy = sy.i0 + si * ty;
            let oy = sy.o0 + so * ty;
            let bi = sx.i0 + n_in * (iy + n_in * iz);
            let bo = sx.o0 + n_out * (oy + n_out * oz);
            row(bi, bo, sx.len);
        }
    }
}

pub fn conv_forward<T: Scalar>(op: &ConvOp, weight: &[T], bias: &[T], input: &Volume<T>) -> Volume<T> {
    debug_assert_eq!(input.channels(), op.in_ch);
    debug_assert_eq!(weight.len(), op.weight_len());
    let n_in = input.side();
    let n_out = op.out_side(n_in);
    let spans = op.spans(n_in, n_out);
    let (si, so) = op.steps();
    let kv = op.kernel_volume();
    let k = op.kernel;
    let mut out = Volume::zeros(op.out_ch, n_out);
    for oc in 0..op.out_ch {
        let dst = out.channel_mut(oc);
        dst.fill(bias[oc]);
        for ic in 0..op.in_ch {
            let src = input.channel(ic);
            let w = &weight[(oc * op.in_ch + ic) * kv..][..kv];
            for (ki, &wk) in w.iter().enumerate() {
                let (kx, ky, kz) = (ki % k, (ki / k) % k, ki / (k * k));
                walk(spans[kx], spans[ky], spans[kz], n_in, n_out, (si, so), |bi, bo, len| {
                    for t in 0..len {
                        dst[bo + so * t] += wk * src[bi + si * t];
                    }
                });
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
pub fn conv_backward<T: Scalar>(
    op: &ConvOp,
    weight: &[T],
    input: &Volume<T>,
    grad_out: &Volume<T>,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
    want_input_grad: bool,
) -> Option<Volume<T>> {
    let n_in = input.side();
    let n_out = grad_out.side();
    let spans = op.spans(n_in, n_out);
    let (si, so) = op.steps();
    let kv = op.kernel_volume();
    let k = op.kernel;
    let mut grad_in = want_input_grad.then(|| Volume::zeros(op.in_ch, n_in));
    for oc in 0..op.out_ch {
        let g = grad_out.channel(oc);
        grad_bias[oc] += g.iter().copied().sum::<T>();
        for ic in 0..op.in_ch {
            let src = input.channel(ic);
            let base = (oc * op.in_ch + ic) * kv;
            for ki in 0..kv {
                let (kx, ky, kz) = (ki % k, (ki / k) % k, ki / (k * k));
                let mut acc = T::zero();
                walk(spans[kx], spans[ky], spans[kz], n_in, n_out, (si, so), |bi, bo, len| {
                    for t in 0..len {
                        acc += src[bi + si * t] * g[bo + so * t];
                    }
                });
                grad_weight[base + ki] += acc;
            }
            if let Some(gin) = grad_in.as_mut() {
                let dst = gin.channel_mut(ic);
                for ki in 0..kv {
                    let wk = weight[base + ki];
                    let (kx, ky, kz) = (ki % k, (ki / k) % k, ki / (k * k));
                    walk(spans[kx], spans[ky], spans[kz], n_in, n_out, (si, so), |bi, bo, len| {
                        for t in 0..len {
                            dst[bi + si * t] += wk * g[bo + so * t];
                        }
                    });
                }
            }
        }
    }
    grad_in
}

pub fn leaky_relu_in_place<T: Scalar>(v: &mut Volume<T>) {
    let leak = T::of(LEAK);
    for x in v.data_mut() {
        if *x < T::zero() {
            *x *= leak;
        }
    }
}

/// Multiplies `grad` by the rectifier derivative, read off the activated output.
pub fn leaky_relu_backward<T: Scalar>(activated: &Volume<T>, grad: &mut Volume<T>) {
    let leak = T::of(LEAK);
    for (g, &a) in grad.data_mut().iter_mut().zip(activated.data()) {
        if a <= T::zero() {
            *g *= leak;
        }
    }
}
