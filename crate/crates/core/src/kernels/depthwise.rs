use rayon::prelude::*;

use super::lane::{dispatch_exact, KernelBody, Lane};
use super::{check_channels, check_stride, strided_len, DwKernel, MulCounter};
use crate::error::Result;
use crate::tensor::Tensor;

struct DwConv {
    height: usize,
    width: usize,
    channels: usize,
    stride: usize,
}

impl KernelBody for DwConv {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E> {
        let (h, w, c, s) = (self.height, self.width, self.channels, self.stride);
        let (oh, ow) = (strided_len(h, s), strided_len(w, s));
        let mut out = vec![L::E::default(); oh * ow * c];
        out.par_chunks_mut(ow * c).enumerate().for_each(|(oy, row)| {
            for ox in 0..ow {
                for ch in 0..c {
                    let k = &taps[ch * 9..ch * 9 + 9];
                    let mut acc = lane.zero();
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
                            let v = x[(iy as usize * w + ix as usize) * c + ch];
                            acc = lane.mac(acc, v, k[ky * 3 + kx]);
                        }
                    }
                    row[ox * c + ch] = lane.finish(acc, bias[ch]);
                }
            }
        });
        out
    }
}

/// Same-padded per-channel 3×3 convolution with stride 1 or 2.
pub fn dw_conv3x3(x: &Tensor, k: &DwKernel, stride: usize) -> Result<Tensor> {
    check_stride(stride)?;
    check_channels("dw_conv3x3", x.channels(), k.channels())?;
    let (h, w, c) = x.shape();
    let body = DwConv {
        height: h,
        width: w,
        channels: c,
        stride,
    };
    let data = dispatch_exact(&body, x, k.taps(), k.bias(), None);
    Ok(Tensor::new_unchecked(
        strided_len(h, stride),
        strided_len(w, stride),
        c,
        data,
    ))
}

/// Zero-skipping deconvolution: one zero row on top and one zero column on
/// the left, then a 2×2 window per input pixel emitting a 2×2 output patch
/// with 4 + 2 + 2 + 1 multiplications.
struct DeconvFast {
    height: usize,
    width: usize,
    channels: usize,
}

impl KernelBody for DeconvFast {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E> {
        let (h, w, c) = (self.height, self.width, self.channels);
        let ow = 2 * w;
        let zero = L::E::default();
        let mut out = vec![zero; 2 * h * ow * c];
        // Window row i spans padded rows i and i + 1, i.e. input rows i - 1 and i.
        out.par_chunks_mut(2 * ow * c)
            .enumerate()
            .for_each(|(i, rows)| {
                let (top, bottom) = rows.split_at_mut(ow * c);
                for j in 0..w {
                    for ch in 0..c {
                        let at = |y: usize, x_: usize| x[(y * w + x_) * c + ch];
                        let a = if i > 0 && j > 0 { at(i - 1, j - 1) } else { zero };
                        let b = if i > 0 { at(i - 1, j) } else { zero };
                        let cc = if j > 0 { at(i, j - 1) } else { zero };
                        let d = at(i, j);
                        let k = &taps[ch * 9..ch * 9 + 9];
                        let z = lane.zero();

                        let p11 = lane.mac(
                            lane.mac(lane.mac(lane.mac(z, a, k[0]), b, k[2]), cc, k[6]),
                            d,
                            k[8],
                        );
                        let p12 = lane.mac(lane.mac(z, b, k[1]), d, k[7]);
                        let p21 = lane.mac(lane.mac(z, cc, k[3]), d, k[5]);
                        let p22 = lane.mac(z, d, k[4]);

                        top[2 * j * c + ch] = lane.finish(p11, bias[ch]);
                        top[(2 * j + 1) * c + ch] = lane.finish(p12, bias[ch]);
                        bottom[2 * j * c + ch] = lane.finish(p21, bias[ch]);
                        bottom[(2 * j + 1) * c + ch] = lane.finish(p22, bias[ch]);
                    }
                }
            });
        out
    }
}

/// Reference deconvolution: interleave the input with zeros, pad, and run a
/// plain 3×3 correlation over every position.
struct DeconvNaive {
    height: usize,
    width: usize,
    channels: usize,
}

impl KernelBody for DeconvNaive {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E> {
        let (h, w, c) = (self.height, self.width, self.channels);
        // Input pixel (i, j) lands at (2i + 2, 2j + 2) of a (2H + 2) × (2W + 2) grid.
        let (gh, gw) = (2 * h + 2, 2 * w + 2);
        let mut grid = vec![L::E::default(); gh * gw * c];
        for i in 0..h {
            for j in 0..w {
                let src = (i * w + j) * c;
                let dst = ((2 * i + 2) * gw + 2 * j + 2) * c;
                grid[dst..dst + c].copy_from_slice(&x[src..src + c]);
            }
        }
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = vec![L::E::default(); oh * ow * c];
        out.par_chunks_mut(ow * c).enumerate().for_each(|(r, row)| {
            for s in 0..ow {
                for ch in 0..c {
                    let k = &taps[ch * 9..ch * 9 + 9];
                    let mut acc = lane.zero();
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let v = grid[((r + ky) * gw + s + kx) * c + ch];
                            acc = lane.mac(acc, v, k[ky * 3 + kx]);
                        }
                    }
                    row[s * c + ch] = lane.finish(acc, bias[ch]);
                }
            }
        });
        out
    }
}

fn deconv<B: KernelBody>(
    name: &str,
    x: &Tensor,
    k: &DwKernel,
    body: B,
    counter: Option<&MulCounter>,
) -> Result<Tensor> {
    check_channels(name, x.channels(), k.channels())?;
    let (h, w, c) = x.shape();
    let data = dispatch_exact(&body, x, k.taps(), k.bias(), counter);
    Ok(Tensor::new_unchecked(2 * h, 2 * w, c, data))
}

/// ×2 depthwise deconvolution, zero-skipping route. Output is `2H × 2W × C`.
pub fn dw_deconv3x3_fast(x: &Tensor, k: &DwKernel) -> Result<Tensor> {
    dw_deconv3x3_fast_impl(x, k, None)
}

/// As [`dw_deconv3x3_fast`], counting multiplications into `counter`.
pub fn dw_deconv3x3_fast_counted(x: &Tensor, k: &DwKernel, counter: &MulCounter) -> Result<Tensor> {
    dw_deconv3x3_fast_impl(x, k, Some(counter))
}

fn dw_deconv3x3_fast_impl(x: &Tensor, k: &DwKernel, counter: Option<&MulCounter>) -> Result<Tensor> {
    let (height, width, channels) = x.shape();
    let body = DeconvFast {
        height,
        width,
        channels,
    };
    deconv("dw_deconv3x3_fast", x, k, body, counter)
}

/// ×2 depthwise deconvolution through the zero-interleaved grid.
pub fn dw_deconv3x3_naive(x: &Tensor, k: &DwKernel) -> Result<Tensor> {
    dw_deconv3x3_naive_impl(x, k, None)
}

pub fn dw_deconv3x3_naive_counted(
    x: &Tensor,
    k: &DwKernel,
    counter: &MulCounter,
) -> Result<Tensor> {
    dw_deconv3x3_naive_impl(x, k, Some(counter))
}

fn dw_deconv3x3_naive_impl(
    x: &Tensor,
    k: &DwKernel,
    counter: Option<&MulCounter>,
) -> Result<Tensor> {
    let (height, width, channels) = x.shape();
    let body = DeconvNaive {
        height,
        width,
        channels,
    };
    deconv("dw_deconv3x3_naive", x, k, body, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{quantize, QFormat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
        let data = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_real(h, w, c, data).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, c: usize) -> DwKernel {
        let taps = (0..c * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias = (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect();
        DwKernel::new(c, taps, bias).unwrap()
    }

    /// Direct evaluation of out[c,y,x] = b + Σ in[c, y·s+ky−1, x·s+kx−1]·K[c,ky,kx].
    fn dw_conv_oracle(x: &Tensor, k: &DwKernel, s: usize) -> Vec<f64> {
        let (h, w, c) = x.shape();
        let (oh, ow) = (h.div_ceil(s), w.div_ceil(s));
        let mut out = vec![0.0; oh * ow * c];
        for ch in 0..c {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut sum = 0.0;
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = (y * s + ky) as isize - 1;
                            let ix = (xx * s + kx) as isize - 1;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                sum += x.get(iy as usize, ix as usize, ch) * k.tap(ch, ky, kx);
                            }
                        }
                    }
                    out[(y * ow + xx) * c + ch] = sum + k.bias()[ch];
                }
            }
        }
        out
    }

    #[test]
    fn zero_input_gives_bias() {
        let k = DwKernel::new(1, (1..=9).map(f64::from).collect(), vec![0.75]).unwrap();
        let out = dw_conv3x3(&Tensor::zeros(4, 4, 1), &k, 1).unwrap();
        assert!(out.as_real().unwrap().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn identity_tap_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 5, 7, 3);
        let mut taps = vec![0.0; 27];
        for c in 0..3 {
            taps[c * 9 + 4] = 1.0;
        }
        let k = DwKernel::new(3, taps, vec![0.0; 3]).unwrap();
        assert_eq!(dw_conv3x3(&x, &k, 1).unwrap(), x);
    }

    #[test]
    fn strided_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(h, w) in &[(8, 8), (7, 5), (1, 1), (3, 10)] {
            let x = random_tensor(&mut rng, h, w, 3);
            let k = random_kernel(&mut rng, 3);
            for s in [1, 2] {
                let out = dw_conv3x3(&x, &k, s).unwrap();
                assert_eq!(out.shape(), (h.div_ceil(s), w.div_ceil(s), 3));
                let want = dw_conv_oracle(&x, &k, s);
                for (a, b) in out.as_real().unwrap().iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stride_two_is_subsampled_stride_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, 9, 6, 2);
        let k = random_kernel(&mut rng, 2);
        let full = dw_conv3x3(&x, &k, 1).unwrap();
        let half = dw_conv3x3(&x, &k, 2).unwrap();
        for y in 0..half.height() {
            for xx in 0..half.width() {
                for c in 0..2 {
                    assert_eq!(half.get(y, xx, c), full.get(2 * y, 2 * xx, c));
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_is_error() {
        let k = DwKernel::new(2, vec![0.0; 18], vec![0.0; 2]).unwrap();
        assert!(dw_conv3x3(&Tensor::zeros(3, 3, 3), &k, 1).is_err());
        assert!(dw_deconv3x3_fast(&Tensor::zeros(3, 3, 3), &k).is_err());
        assert!(dw_deconv3x3_naive(&Tensor::zeros(3, 3, 3), &k).is_err());
        assert!(dw_conv3x3(&Tensor::zeros(3, 3, 2), &k, 3).is_err());
    }

    #[test]
    fn deconv_single_pixel_all_ones() {
        let x = Tensor::from_real(1, 1, 1, vec![2.5]).unwrap();
        let k = DwKernel::new(1, vec![1.0; 9], vec![0.0]).unwrap();
        for out in [dw_deconv3x3_naive(&x, &k).unwrap(), dw_deconv3x3_fast(&x, &k).unwrap()] {
            assert_eq!(out.shape(), (2, 2, 1));
            assert_eq!(out.as_real().unwrap(), &[2.5; 4]);
        }
    }

    #[test]
    fn deconv_window_equation_example() {
        // Window [a b; c d] = [1 2; 3 4] is the last window of a 2×2 input.
        let x = Tensor::from_real(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = DwKernel::new(1, (1..=9).map(f64::from).collect(), vec![0.0]).unwrap();
        let fast = dw_deconv3x3_fast(&x, &k).unwrap();
        let naive = dw_deconv3x3_naive(&x, &k).unwrap();
        assert_eq!(fast.get(2, 2, 0), 64.0);
        assert_eq!(fast.get(2, 3, 0), 2.0 * 2.0 + 4.0 * 8.0);
        assert_eq!(fast.get(3, 2, 0), 3.0 * 4.0 + 4.0 * 6.0);
        assert_eq!(fast.get(3, 3, 0), 4.0 * 5.0);
        assert_eq!(fast, naive);
    }

    #[test]
    fn deconv_zero_taps_and_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(&mut rng, 3, 4, 2);
        let k = DwKernel::new(2, vec![0.0; 18], vec![0.5, -0.5]).unwrap();
        let out = dw_deconv3x3_naive(&x, &k).unwrap();
        for y in 0..6 {
            for xx in 0..8 {
                assert_eq!(out.get(y, xx, 0), 0.5);
                assert_eq!(out.get(y, xx, 1), -0.5);
            }
        }
        let k = random_kernel(&mut rng, 2);
        let k = DwKernel::new(2, k.taps().to_vec(), vec![0.0; 2]).unwrap();
        let zero = dw_deconv3x3_fast(&Tensor::zeros(3, 4, 2), &k).unwrap();
        assert!(zero.as_real().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deconv_fast_equals_naive_real_and_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (h, w, c) = (rng.gen_range(1..12), rng.gen_range(1..12), rng.gen_range(1..4));
            let x = random_tensor(&mut rng, h, w, c);
            let k = random_kernel(&mut rng, c);
            assert_eq!(dw_deconv3x3_fast(&x, &k).unwrap(), dw_deconv3x3_naive(&x, &k).unwrap());
            let xq = quantize(&x, QFormat::FEATURE);
            assert_eq!(
                dw_deconv3x3_fast(&xq, &k).unwrap(),
                dw_deconv3x3_naive(&xq, &k).unwrap()
            );
        }
    }

    #[test]
    fn multiplication_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tensor(&mut rng, 6, 5, 3);
        let k = random_kernel(&mut rng, 3);
        let fast = MulCounter::new();
        let naive = MulCounter::new();
        dw_deconv3x3_fast_counted(&x, &k, &fast).unwrap();
        dw_deconv3x3_naive_counted(&x, &k, &naive).unwrap();
        let patches = 6 * 5 * 3;
        assert_eq!(fast.get(), 9 * patches);
        assert_eq!(naive.get(), 36 * patches);
    }

    #[test]
    fn rotation_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = random_kernel(&mut rng, 2);
        assert_eq!(k.rotated_180().rotated_180(), k);
        assert_eq!(k.rotated_180().tap(1, 0, 0), k.tap(1, 2, 2));
    }
}
