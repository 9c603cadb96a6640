//! Convolution over three spatial axes via an im2col index table. A 2D
//! convolution is the special case with a unit leading axis and kernel 1 on it.

use crate::ops::{axpy, dot};
use crate::scalar::Real;

const PAD: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Spatial input extent (d, h, w).
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub output: [usize; 3],
    /// `cols[ck * P + p]`: offset into one input sample, or `PAD`.
    table: Vec<u32>,
}

/// Output extent along one axis, `None` if the kernel does not fit.
pub fn out_extent(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    if s == 0 || k == 0 || n + 2 * p < k {
        return None;
    }
    Some((n + 2 * p - k) / s + 1)
}

impl ConvGeom {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        input: [usize; 3],
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Option<Self> {
        let mut output = [0; 3];
        for a in 0..3 {
            output[a] = out_extent(input[a], kernel[a], stride[a], padding[a])?;
        }
        let mut g = Self {
            in_channels,
            out_channels,
            input,
            kernel,
            stride,
            padding,
            output,
            table: Vec::new(),
        };
        g.build_table();
        Some(g)
    }

    fn build_table(&mut self) {
        let p_len = self.positions();
        let [kd, kh, kw] = self.kernel;
        let [id, ih, iw] = self.input;
        let [od, oh, ow] = self.output;
        let mut t = vec![PAD; self.col_rows() * p_len];
        for ci in 0..self.in_channels {
            for a in 0..kd {
                for b in 0..kh {
                    for c in 0..kw {
                        let ck = ((ci * kd + a) * kh + b) * kw + c;
                        for z in 0..od {
                            let zi = (z * self.stride[0] + a) as isize - self.padding[0] as isize;
                            for y in 0..oh {
                                let yi = (y * self.stride[1] + b) as isize - self.padding[1] as isize;
                                for x in 0..ow {
                                    let xi = (x * self.stride[2] + c) as isize - self.padding[2] as isize;
                                    let inside = (0..id as isize).contains(&zi)
                                        && (0..ih as isize).contains(&yi)
                                        && (0..iw as isize).contains(&xi);
                                    if inside {
                                        let off = ((ci * id + zi as usize) * ih + yi as usize) * iw + xi as usize;
                                        t[ck * p_len + (z * oh + y) * ow + x] = off as u32;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        self.table = t;
    }

    pub fn positions(&self) -> usize {
        self.output.iter().product()
    }

    fn col_rows(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    pub fn in_len(&self) -> usize {
        self.in_channels * self.input.iter().product::<usize>()
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.positions()
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.col_rows()
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    /// Receptive-field size per output unit, for initialization.
    pub fn fan_in(&self) -> usize {
        self.col_rows()
    }

    fn im2col<F: Real>(&self, x: &[F], cols: &mut [F]) {
        for (c, &i) in cols.iter_mut().zip(&self.table) {
            *c = if i == PAD { F::zero() } else { x[i as usize] };
        }
    }

    pub fn forward<F: Real>(&self, params: &[F], x: &[F], n: usize) -> Vec<F> {
        let (w, bias) = params.split_at(self.weight_len());
        let (ck, p) = (self.col_rows(), self.positions());
        let mut cols = vec![F::zero(); ck * p];
        let mut y = vec![F::zero(); n * self.out_len()];
        for s in 0..n {
            self.im2col(&x[s * self.in_len()..(s + 1) * self.in_len()], &mut cols);
            let ys = &mut y[s * self.out_len()..(s + 1) * self.out_len()];
            for co in 0..self.out_channels {
                let row = &mut ys[co * p..(co + 1) * p];
                row.fill(bias[co]);
                let wr = &w[co * ck..(co + 1) * ck];
                for (k, &wv) in wr.iter().enumerate() {
                    if wv != F::zero() {
                        axpy(wv, &cols[k * p..(k + 1) * p], row);
                    }
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grads`, returns the input gradient.
    pub fn backward<F: Real>(&self, params: &[F], x: &[F], gy: &[F], n: usize, grads: &mut [F]) -> Vec<F> {
        let (w, _) = params.split_at(self.weight_len());
        let (gw, gb) = grads.split_at_mut(self.weight_len());
        let (ck, p) = (self.col_rows(), self.positions());
        let mut cols = vec![F::zero(); ck * p];
        let mut gcols = vec![F::zero(); ck * p];
        let mut gx = vec![F::zero(); n * self.in_len()];
        for s in 0..n {
            self.im2col(&x[s * self.in_len()..(s + 1) * self.in_len()], &mut cols);
            gcols.fill(F::zero());
            let gys = &gy[s * self.out_len()..(s + 1) * self.out_len()];
            for co in 0..self.out_channels {
                let g = &gys[co * p..(co + 1) * p];
                gb[co] += g.iter().copied().sum::<F>();
                for k in 0..ck {
                    gw[co * ck + k] += dot(g, &cols[k * p..(k + 1) * p]);
                    axpy(w[co * ck + k], g, &mut gcols[k * p..(k + 1) * p]);
                }
            }
            let gxs = &mut gx[s * self.in_len()..(s + 1) * self.in_len()];
            for (g, &i) in gcols.iter().zip(&self.table) {
                if i != PAD {
                    gxs[i as usize] += *g;
                }
            }
        }
        gx
    }
}
