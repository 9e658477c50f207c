//! Per-sample layer kernels, generic over the scalar type so the same code
//! runs in `f32` for training and in `f64` for gradient checks.
//!
//! Feature maps are `height × width × channels`, channel fastest.
//! Convolution weights are `[ky][kx][in][out]`, dense weights `[in][out]`.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f32(v: f32) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f32(v: f32) -> Self {
        f64::from(v)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

pub const KERNEL: usize = 3;

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Valid kernel offsets `(k, input_index)` along one axis for output `pos`.
#[inline]
fn taps(pos: usize, len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..KERNEL).filter_map(move |k| {
        let i = (pos + k).checked_sub(1)?;
        (i < len).then_some((k, i))
    })
}

/// 3×3 cross-correlation, stride 1, zero padding 1.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward<T: Scalar>(
    input: &[T],
    h: usize,
    w: usize,
    cin: usize,
    weight: &[T],
    bias: &[T],
    cout: usize,
    out: &mut [T],
) {
    debug_assert_eq!(input.len(), h * w * cin);
    debug_assert_eq!(weight.len(), KERNEL * KERNEL * cin * cout);
    debug_assert_eq!(out.len(), h * w * cout);
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * cout..][..cout];
            o.copy_from_slice(bias);
            for (ky, iy) in taps(y, h) {
                for (kx, ix) in taps(x, w) {
                    let inp = &input[(iy * w + ix) * cin..][..cin];
                    let wk = &weight[(ky * KERNEL + kx) * cin * cout..][..cin * cout];
                    for (ci, &v) in inp.iter().enumerate() {
                        axpy(o, v, &wk[ci * cout..][..cout]);
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients; writes the input gradient when
/// `din` is given.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    input: &[T],
    h: usize,
    w: usize,
    cin: usize,
    weight: &[T],
    cout: usize,
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    mut din: Option<&mut [T]>,
) {
    if let Some(d) = din.as_deref_mut() {
        d.iter_mut().for_each(|v| *v = T::zero());
    }
    for y in 0..h {
        for x in 0..w {
            let g = &dout[(y * w + x) * cout..][..cout];
            for (b, &gv) in dbias.iter_mut().zip(g) {
                *b += gv;
            }
            for (ky, iy) in taps(y, h) {
                for (kx, ix) in taps(x, w) {
                    let base = (ky * KERNEL + kx) * cin * cout;
                    let in_off = (iy * w + ix) * cin;
                    for ci in 0..cin {
                        let v = input[in_off + ci];
                        let row = base + ci * cout;
                        axpy(&mut dweight[row..row + cout], v, g);
                        if let Some(d) = din.as_deref_mut() {
                            d[in_off + ci] += dot(&weight[row..row + cout], g);
                        }
                    }
                }
            }
        }
    }
}

pub fn relu_forward<T: Scalar>(input: &[T], out: &mut [T]) {
    for (o, &v) in out.iter_mut().zip(input) {
        *o = if v > T::zero() { v } else { T::zero() };
    }
}

/// Subgradient 0 at the kink.
pub fn relu_backward<T: Scalar>(input: &[T], dout: &[T], din: &mut [T]) {
    for ((d, &v), &g) in din.iter_mut().zip(input).zip(dout) {
        *d = if v > T::zero() { g } else { T::zero() };
    }
}

/// 2×2 max pooling with stride 2 (trailing odd row/column dropped).
/// `argmax` receives the flat input index of each selected element: the
/// first maximum in row-major window order.
pub fn maxpool_forward<T: Scalar>(
    input: &[T],
    h: usize,
    w: usize,
    c: usize,
    out: &mut [T],
    argmax: &mut [u32],
) {
    let (oh, ow) = (h / 2, w / 2);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best_i = ((2 * oy) * w + 2 * ox) * c + ch;
                let mut best = input[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    if input[i] > best {
                        best = input[i];
                        best_i = i;
                    }
                }
                let o = (oy * ow + ox) * c + ch;
                out[o] = best;
                argmax[o] = best_i as u32;
            }
        }
    }
}

pub fn maxpool_backward<T: Scalar>(dout: &[T], argmax: &[u32], din: &mut [T]) {
    din.iter_mut().for_each(|v| *v = T::zero());
    for (&g, &i) in dout.iter().zip(argmax) {
        din[i as usize] += g;
    }
}

pub fn dense_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n_out = bias.len();
    out.copy_from_slice(bias);
    for (i, &v) in input.iter().enumerate() {
        axpy(out, v, &weight[i * n_out..][..n_out]);
    }
}

pub fn dense_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    din: Option<&mut [T]>,
) {
    let n_out = dout.len();
    for (b, &g) in dbias.iter_mut().zip(dout) {
        *b += g;
    }
    for (i, &v) in input.iter().enumerate() {
        axpy(&mut dweight[i * n_out..][..n_out], v, dout);
    }
    if let Some(d) = din {
        for (i, di) in d.iter_mut().enumerate() {
            *di = dot(&weight[i * n_out..][..n_out], dout);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_identity() {
        let input: Vec<f32> = (0..20).map(|v| v as f32 * 0.5 - 3.0).collect();
        let mut weight = vec![0.0f32; 9];
        weight[4] = 1.0;
        let mut out = vec![0.0; 20];
        conv2d_forward(&input, 4, 5, 1, &weight, &[0.0], 1, &mut out);
        assert_eq!(out, input);
    }

    #[test]
    fn conv_matches_direct_sum() {
        // 3x3 input, 1 -> 1 channel, all-ones kernel: each output is the sum
        // of its zero-padded neighbourhood.
        let input: Vec<f64> = (1..=9).map(f64::from).collect();
        let mut out = vec![0.0; 9];
        conv2d_forward(&input, 3, 3, 1, &[1.0; 9], &[0.5], 1, &mut out);
        let expected = [12.0, 21.0, 16.0, 27.0, 45.0, 33.0, 24.0, 39.0, 28.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - (e + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_window() {
        let mut out = [0.0f32];
        let mut arg = [0u32];
        maxpool_forward(&[1.0, 2.0, 3.0, 4.0], 2, 2, 1, &mut out, &mut arg);
        assert_eq!(out[0], 4.0);
        assert_eq!(arg[0], 3);
    }

    #[test]
    fn maxpool_ties_route_to_first() {
        let mut out = [0.0f32];
        let mut arg = [0u32];
        maxpool_forward(&[1.0, 5.0, 5.0, 5.0], 2, 2, 1, &mut out, &mut arg);
        assert_eq!(arg[0], 1);
        let mut din = [9.0f32; 4];
        maxpool_backward(&[2.0], &arg, &mut din);
        assert_eq!(din, [0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_of_equal_logits() {
        let mut p = [0.0f32; 2];
        softmax(&[0.0, 0.0], &mut p);
        assert_eq!(p, [0.5, 0.5]);
        softmax(&[1000.0, -1000.0], &mut p);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn relu_kink_has_zero_gradient() {
        let mut d = [1.0f32; 3];
        relu_backward(&[-1.0, 0.0, 2.0], &[5.0, 5.0, 5.0], &mut d);
        assert_eq!(d, [0.0, 0.0, 5.0]);
    }
}
