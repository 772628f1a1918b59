//! Full cross-channel 3×3 convolution and ×2 deconvolution, used by the
//! standard (non-separable) network variant.

use rayon::prelude::*;

use super::lane::{dispatch_exact, KernelBody, Lane};
use super::{check_channels, check_stride, strided_len, ConvKernel};
use crate::error::Result;
use crate::tensor::Tensor;

struct Conv {
    height: usize,
    width: usize,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
}

impl KernelBody for Conv {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E> {
        let (h, w, ci, co, s) = (
            self.height,
            self.width,
            self.in_channels,
            self.out_channels,
            self.stride,
        );
        let (oh, ow) = (strided_len(h, s), strided_len(w, s));
        let mut out = vec![L::E::default(); oh * ow * co];
        out.par_chunks_mut(ow * co).enumerate().for_each(|(oy, row)| {
            let mut acc = vec![lane.zero(); co];
            for ox in 0..ow {
                acc.fill(lane.zero());
                for ky in 0..3 {
                    let iy = (oy * s + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * s + kx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * ci;
                        for (i, &v) in x[base..base + ci].iter().enumerate() {
                            let k = &taps[((ky * 3 + kx) * ci + i) * co..][..co];
                            for (a, &t) in acc.iter_mut().zip(k) {
                                *a = lane.mac(*a, v, t);
                            }
                        }
                    }
                }
                for (o, a) in acc.iter().enumerate() {
                    row[ox * co + o] = lane.finish(*a, bias[o]);
                }
            }
        });
        out
    }
}

/// Same-padded 3×3 convolution across channels.
pub fn conv3x3(x: &Tensor, k: &ConvKernel, stride: usize) -> Result<Tensor> {
    check_stride(stride)?;
    check_channels("conv3x3", x.channels(), k.in_channels())?;
    let (h, w, ci) = x.shape();
    let body = Conv {
        height: h,
        width: w,
        in_channels: ci,
        out_channels: k.out_channels(),
        stride,
    };
    let data = dispatch_exact(&body, x, k.taps(), k.bias(), None);
    Ok(Tensor::new_unchecked(
        strided_len(h, stride),
        strided_len(w, stride),
        k.out_channels(),
        data,
    ))
}

struct Deconv {
    height: usize,
    width: usize,
    in_channels: usize,
    out_channels: usize,
}

impl KernelBody for Deconv {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E> {
        let (h, w, ci, co) = (self.height, self.width, self.in_channels, self.out_channels);
        let ow = 2 * w;
        let zero = L::E::default();
        let mut out = vec![zero; 2 * h * ow * co];
        out.par_chunks_mut(2 * ow * co)
            .enumerate()
            .for_each(|(i, rows)| {
                let (top, bottom) = rows.split_at_mut(ow * co);
                let mut patch = vec![lane.zero(); 4 * co];
                for j in 0..w {
                    patch.fill(lane.zero());
                    let (p11, rest) = patch.split_at_mut(co);
                    let (p12, rest) = rest.split_at_mut(co);
                    let (p21, p22) = rest.split_at_mut(co);
                    for c in 0..ci {
                        let at = |y: usize, x_: usize| x[(y * w + x_) * ci + c];
                        let a = if i > 0 && j > 0 { at(i - 1, j - 1) } else { zero };
                        let b = if i > 0 { at(i - 1, j) } else { zero };
                        let cc = if j > 0 { at(i, j - 1) } else { zero };
                        let d = at(i, j);
                        let k = |t: usize, o: usize| taps[(t * ci + c) * co + o];
                        for o in 0..co {
                            p11[o] = lane.mac(
                                lane.mac(lane.mac(lane.mac(p11[o], a, k(0, o)), b, k(2, o)), cc, k(6, o)),
                                d,
                                k(8, o),
                            );
                            p12[o] = lane.mac(lane.mac(p12[o], b, k(1, o)), d, k(7, o));
                            p21[o] = lane.mac(lane.mac(p21[o], cc, k(3, o)), d, k(5, o));
                            p22[o] = lane.mac(p22[o], d, k(4, o));
                        }
                    }
                    for o in 0..co {
                        top[2 * j * co + o] = lane.finish(p11[o], bias[o]);
                        top[(2 * j + 1) * co + o] = lane.finish(p12[o], bias[o]);
                        bottom[2 * j * co + o] = lane.finish(p21[o], bias[o]);
                        bottom[(2 * j + 1) * co + o] = lane.finish(p22[o], bias[o]);
                    }
                }
            });
        out
    }
}

/// ×2 deconvolution across channels, zero-skipping. Output `2H × 2W × Co`.
pub fn deconv3x3(x: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    check_channels("deconv3x3", x.channels(), k.in_channels())?;
    let (h, w, ci) = x.shape();
    let body = Deconv {
        height: h,
        width: w,
        in_channels: ci,
        out_channels: k.out_channels(),
    };
    let data = dispatch_exact(&body, x, k.taps(), k.bias(), None);
    Ok(Tensor::new_unchecked(2 * h, 2 * w, k.out_channels(), data))
}
