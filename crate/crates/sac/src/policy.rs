//! Tanh-squashed diagonal Gaussian.

use navgym_nn::Real;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sample,
    Mean,
}

/// One draw from the policy for a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Squashed<F> {
    pub u: Vec<F>,
    pub action: Vec<F>,
    pub std: Vec<F>,
    pub eps: Vec<F>,
    /// Raw log-std was outside the clamp range.
    pub clamped: Vec<bool>,
    pub log_prob: F,
}

pub fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(u)^2)`, stable for large `|u|`.
pub fn log_one_minus_tanh2<F: Real>(u: F) -> F {
    F::of(2.0) * (F::of(std::f64::consts::LN_2) - u - softplus(F::of(-2.0) * u))
}

/// `head` holds the means followed by the raw log-stds; `eps` is standard
/// normal noise (ignored values in mean mode should be zero).
pub fn squash<F: Real>(head: &[F], eps: &[F]) -> Squashed<F> {
    let a = head.len() / 2;
    let half_log_2pi = F::of(0.5 * (2.0 * std::f64::consts::PI).ln());
    let mut out = Squashed {
        u: Vec::with_capacity(a),
        action: Vec::with_capacity(a),
        std: Vec::with_capacity(a),
        eps: eps[..a].to_vec(),
        clamped: Vec::with_capacity(a),
        log_prob: F::zero(),
    };
    for i in 0..a {
        let raw = head[a + i];
        let ls = raw.max(F::of(LOG_STD_MIN)).min(F::of(LOG_STD_MAX));
        let s = ls.exp();
        let e = eps[i];
        let u = head[i] + s * e;
        out.log_prob += -F::of(0.5) * e * e - ls - half_log_2pi - log_one_minus_tanh2(u);
        out.u.push(u);
        out.action.push(u.tanh());
        out.std.push(s);
        out.clamped.push(raw < F::of(LOG_STD_MIN) || raw > F::of(LOG_STD_MAX));
    }
    out
}

/// Density of the squashed distribution at `action`, per dimension product.
pub fn log_prob_of<F: Real>(head: &[F], action: &[F]) -> F {
    let a = head.len() / 2;
    let mut eps = vec![F::zero(); a];
    for i in 0..a {
        let ls = head[a + i].max(F::of(LOG_STD_MIN)).min(F::of(LOG_STD_MAX));
        eps[i] = (action[i].atanh() - head[i]) / ls.exp();
    }
    squash(head, &eps).log_prob
}
