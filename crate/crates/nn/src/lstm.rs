//! Single-layer LSTM over time-major batches (`index = t * B + b`).
//!
//! Each step carries a mask value in `{0, 1}`; a masked step leaves the
//! state untouched and emits the carried hidden vector. Front-padded windows
//! therefore start their valid part from the initial state.

use rand::Rng;

use crate::init;
use crate::ops::{axpy, matmul_nt, sigmoid};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Hidden<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Real> Hidden<F> {
    pub fn zeros(batch: usize, size: usize) -> Self {
        Self {
            h: vec![F::zero(); batch * size],
            c: vec![F::zero(); batch * size],
        }
    }

    /// Hidden state of one batch row.
    pub fn row(&self, b: usize, size: usize) -> Hidden<F> {
        Hidden {
            h: self.h[b * size..(b + 1) * size].to_vec(),
            c: self.c[b * size..(b + 1) * size].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache<F> {
    t: usize,
    b: usize,
    xs: Vec<F>,
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    /// Activated gates `i, f, g, o`, `4H` per step.
    gates: Vec<F>,
    tanh_c: Vec<F>,
    mask: Vec<F>,
}

impl Lstm {
    pub fn param_len(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    fn split<'a, F>(&self, p: &'a [F]) -> (&'a [F], &'a [F], &'a [F]) {
        let h4 = 4 * self.hidden;
        let (wih, rest) = p.split_at(h4 * self.input);
        let (whh, b) = rest.split_at(h4 * self.hidden);
        (wih, whh, b)
    }

    pub fn init<F: Real, R: Rng + ?Sized>(&self, params: &mut [F], rng: &mut R) {
        let h4 = 4 * self.hidden;
        let (wih, rest) = params.split_at_mut(h4 * self.input);
        let (whh, b) = rest.split_at_mut(h4 * self.hidden);
        init::orthogonal(wih, h4, self.input, 1.0, rng);
        init::orthogonal(whh, h4, self.hidden, 1.0, rng);
        b.fill(F::zero());
    }

    /// Runs `t` steps over a batch of `b` sequences; returns the per-step
    /// outputs, the final state and the cache for [`Lstm::backward`].
    pub fn forward<F: Real>(
        &self,
        params: &[F],
        xs: &[F],
        t: usize,
        b: usize,
        mask: &[F],
        h0: &Hidden<F>,
    ) -> (Vec<F>, Hidden<F>, LstmCache<F>) {
        let (i_n, h_n) = (self.input, self.hidden);
        assert_eq!(xs.len(), t * b * i_n, "lstm input length");
        assert_eq!(mask.len(), t * b, "lstm mask length");
        assert_eq!(h0.h.len(), b * h_n, "lstm hidden length");
        let (wih, whh, bias) = self.split(params);
        let mut state = h0.clone();
        let mut cache = LstmCache {
            t,
            b,
            xs: xs.to_vec(),
            h_prev: Vec::with_capacity(t * b * h_n),
            c_prev: Vec::with_capacity(t * b * h_n),
            gates: vec![F::zero(); t * b * 4 * h_n],
            tanh_c: vec![F::zero(); t * b * h_n],
            mask: mask.to_vec(),
        };
        let h4 = 4 * h_n;
        let mut ys = vec![F::zero(); t * b * h_n];
        // input projections for every step at once
        let mut zx = Vec::with_capacity(t * b * h4);
        for _ in 0..t * b {
            zx.extend_from_slice(bias);
        }
        matmul_nt(xs, wih, t * b, h4, i_n, &mut zx);
        for s in 0..t {
            cache.h_prev.extend_from_slice(&state.h);
            cache.c_prev.extend_from_slice(&state.c);
            let zs = &mut zx[s * b * h4..(s + 1) * b * h4];
            matmul_nt(&state.h, whh, b, h4, h_n, zs);
            for r in 0..b {
                let n = s * b + r;
                let z = &zs[r * h4..(r + 1) * h4];
                let gates = &mut cache.gates[n * 4 * h_n..(n + 1) * 4 * h_n];
                for j in 0..h_n {
                    gates[j] = sigmoid(z[j]);
                    gates[h_n + j] = sigmoid(z[h_n + j]);
                    gates[2 * h_n + j] = z[2 * h_n + j].tanh();
                    gates[3 * h_n + j] = sigmoid(z[3 * h_n + j]);
                }
                let m = mask[n];
                for j in 0..h_n {
                    let cp = state.c[r * h_n + j];
                    let c_new = gates[h_n + j] * cp + gates[j] * gates[2 * h_n + j];
                    let tc = c_new.tanh();
                    cache.tanh_c[n * h_n + j] = tc;
                    let h_new = gates[3 * h_n + j] * tc;
                    let hp = state.h[r * h_n + j];
                    state.c[r * h_n + j] = m * c_new + (F::one() - m) * cp;
                    state.h[r * h_n + j] = m * h_new + (F::one() - m) * hp;
                    ys[n * h_n + j] = state.h[r * h_n + j];
                }
            }
        }
        (ys, state, cache)
    }

    /// Backpropagation through time. `g_final` is the gradient with respect
    /// to the final state. Accumulates into `grads`; returns the input
    /// gradient and the gradient with respect to the initial state.
    pub fn backward<F: Real>(
        &self,
        params: &[F],
        cache: &LstmCache<F>,
        gys: &[F],
        g_final: &Hidden<F>,
        grads: &mut [F],
    ) -> (Vec<F>, Hidden<F>) {
        let (i_n, h_n) = (self.input, self.hidden);
        let (t, b) = (cache.t, cache.b);
        assert_eq!(gys.len(), t * b * h_n, "lstm output gradient length");
        let (wih, whh, _) = self.split(params);
        let h4 = 4 * h_n;
        let (gwih, rest) = grads.split_at_mut(h4 * i_n);
        let (gwhh, gb) = rest.split_at_mut(h4 * h_n);
        let mut gh_next = g_final.h.clone();
        let mut gc_next = g_final.c.clone();
        let mut gxs = vec![F::zero(); t * b * i_n];
        let mut dz = vec![F::zero(); h4];
        let one = F::one();
        for s in (0..t).rev() {
            for r in 0..b {
                let n = s * b + r;
                let m = cache.mask[n];
                let gates = &cache.gates[n * h4..(n + 1) * h4];
                let hp = &cache.h_prev[n * h_n..(n + 1) * h_n];
                let cp = &cache.c_prev[n * h_n..(n + 1) * h_n];
                let mut gh_carry = vec![F::zero(); h_n];
                let mut gc_prev = vec![F::zero(); h_n];
                for j in 0..h_n {
                    let gh = gys[n * h_n + j] + gh_next[r * h_n + j];
                    let gc = gc_next[r * h_n + j];
                    let (ig, fg, gg, og) = (gates[j], gates[h_n + j], gates[2 * h_n + j], gates[3 * h_n + j]);
                    let tc = cache.tanh_c[n * h_n + j];
                    let gh_new = m * gh;
                    let go = gh_new * tc;
                    let gcn = m * gc + gh_new * og * (one - tc * tc);
                    dz[j] = gcn * gg * ig * (one - ig);
                    dz[h_n + j] = gcn * cp[j] * fg * (one - fg);
                    dz[2 * h_n + j] = gcn * ig * (one - gg * gg);
                    dz[3 * h_n + j] = go * og * (one - og);
                    gc_prev[j] = gcn * fg + (one - m) * gc;
                    gh_carry[j] = (one - m) * gh;
                }
                let x = &cache.xs[n * i_n..(n + 1) * i_n];
                let gx = &mut gxs[n * i_n..(n + 1) * i_n];
                for k in 0..h4 {
                    let d = dz[k];
                    if d == F::zero() {
                        continue;
                    }
                    gb[k] += d;
                    axpy(d, x, &mut gwih[k * i_n..(k + 1) * i_n]);
                    axpy(d, hp, &mut gwhh[k * h_n..(k + 1) * h_n]);
                    axpy(d, &wih[k * i_n..(k + 1) * i_n], gx);
                    axpy(d, &whh[k * h_n..(k + 1) * h_n], &mut gh_carry);
                }
                gh_next[r * h_n..(r + 1) * h_n].copy_from_slice(&gh_carry);
                gc_next[r * h_n..(r + 1) * h_n].copy_from_slice(&gc_prev);
            }
        }
        (gxs, Hidden { h: gh_next, c: gc_next })
    }
}
