use crate::scalar::Real;

const LANES: usize = 8;

/// Eight interleaved partial sums so the loop vectorizes.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [F::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `out[r * o + k] += dot(x[r], w[k])` for `n` rows `x` and `o` rows `w`,
/// all of width `i`. Rows of `x` go four at a time so each weight row is
/// read once per block.
pub fn matmul_nt<F: Real>(x: &[F], w: &[F], n: usize, o: usize, i: usize, out: &mut [F]) {
    assert!(x.len() >= n * i && w.len() >= o * i && out.len() >= n * o);
    let mut r = 0;
    while r + 4 <= n {
        let xs = [
            &x[r * i..(r + 1) * i],
            &x[(r + 1) * i..(r + 2) * i],
            &x[(r + 2) * i..(r + 3) * i],
            &x[(r + 3) * i..(r + 4) * i],
        ];
        for k in 0..o {
            let d = dot4(&w[k * i..(k + 1) * i], xs);
            for (q, v) in d.into_iter().enumerate() {
                out[(r + q) * o + k] += v;
            }
        }
        r += 4;
    }
    for r in r..n {
        let xr = &x[r * i..(r + 1) * i];
        for k in 0..o {
            out[r * o + k] += dot(&w[k * i..(k + 1) * i], xr);
        }
    }
}

#[inline]
fn dot4<F: Real>(w: &[F], xs: [&[F]; 4]) -> [F; 4] {
    const L: usize = 4;
    let n = w.len();
    let mut acc = [[F::zero(); L]; 4];
    let full = n - n % L;
    let mut j = 0;
    while j < full {
        let wc = &w[j..j + L];
        for q in 0..4 {
            let xc = &xs[q][j..j + L];
            for l in 0..L {
                acc[q][l] += wc[l] * xc[l];
            }
        }
        j += L;
    }
    let mut out = [F::zero(); 4];
    for q in 0..4 {
        let mut s = (acc[q][0] + acc[q][2]) + (acc[q][1] + acc[q][3]);
        for j in full..n {
            s += w[j] * xs[q][j];
        }
        out[q] = s;
    }
    out
}

/// `y += a * x`
#[inline]
pub fn axpy<F: Real>(a: F, x: &[F], y: &mut [F]) {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &mut y[..n]);
    let mut cy = y.chunks_exact_mut(LANES);
    let mut cx = x.chunks_exact(LANES);
    for (yc, xc) in (&mut cy).zip(&mut cx) {
        for i in 0..LANES {
            yc[i] += a * xc[i];
        }
    }
    for (yi, xi) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
        *yi += a * *xi;
    }
}

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
