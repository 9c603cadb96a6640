//! Recurrent SAC: a shared observation encoder feeding a policy head and
//! one or two Q heads, target copies of the encoder and Q heads, and a
//! learned entropy temperature.
//!
//! The encoder is trained through the critic loss only; the policy sees the
//! embedding as a constant.

use navgym_core::sim::Action;
use navgym_nn::{Adam, Encoder, Hidden, NetworkSpec, NnError, ObsBatch, Real, Sequential};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SacConfig;
use crate::policy::{squash, Mode};
use crate::replay::Batch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Shape(#[from] NnError),
}

#[derive(Debug, Clone)]
pub struct Networks {
    pub spec: NetworkSpec,
    pub encoder: Encoder,
    pub policy: Sequential,
    pub q: Sequential,
}

impl Networks {
    pub fn new(spec: NetworkSpec) -> Result<Self, NnError> {
        Ok(Self {
            encoder: Encoder::new(spec.clone())?,
            policy: spec.policy_head()?,
            q: spec.q_head()?,
            spec,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.spec.action_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.embedding_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacState<F> {
    pub encoder: Vec<F>,
    pub policy: Vec<F>,
    pub q: Vec<Vec<F>>,
    pub target_encoder: Vec<F>,
    pub target_q: Vec<Vec<F>>,
    pub log_alpha: F,
    pub opt_encoder: Adam<F>,
    pub opt_policy: Adam<F>,
    pub opt_q: Vec<Adam<F>>,
    pub opt_alpha: Adam<F>,
    pub updates: u64,
}

impl<F: Real> SacState<F> {
    pub fn new<R: Rng + ?Sized>(nets: &Networks, cfg: &SacConfig, rng: &mut R) -> Self {
        let mut encoder = vec![F::zero(); nets.encoder.param_len()];
        nets.encoder.init(&mut encoder, rng);
        let mut policy = vec![F::zero(); nets.policy.param_len()];
        nets.policy.init(&mut policy, rng);
        let heads = if cfg.twin_critics { 2 } else { 1 };
        let q: Vec<Vec<F>> = (0..heads)
            .map(|_| {
                let mut p = vec![F::zero(); nets.q.param_len()];
                nets.q.init(&mut p, rng);
                p
            })
            .collect();
        Self {
            target_encoder: encoder.clone(),
            target_q: q.clone(),
            opt_encoder: Adam::new(encoder.len(), cfg.adam),
            opt_policy: Adam::new(policy.len(), cfg.adam),
            opt_q: q.iter().map(|p| Adam::new(p.len(), cfg.adam)).collect(),
            opt_alpha: Adam::new(1, cfg.adam),
            log_alpha: F::of(cfg.initial_alpha.ln()),
            encoder,
            policy,
            q,
            updates: 0,
        }
    }

    pub fn alpha(&self) -> F {
        self.log_alpha.exp()
    }
}

/// Policy outputs for a batch of `n` rows, each `action_dim` wide.
pub fn act<F: Real, R: Rng + ?Sized>(
    nets: &Networks,
    encoder: &[F],
    policy: &[F],
    obs: &ObsBatch<F>,
    hidden: &Hidden<F>,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<Action>, Hidden<F>), NnError> {
    let n = obs.n;
    let mask = vec![F::one(); n];
    let (emb, next) = nets.encoder.infer(encoder, obs, 1, n, &mask, hidden)?;
    let out = nets.policy.infer(policy, &emb, n);
    let a = nets.action_dim();
    let mut actions = Vec::with_capacity(n);
    for r in 0..n {
        let eps: Vec<F> = match mode {
            Mode::Mean => vec![F::zero(); a],
            Mode::Sample => (0..a).map(|_| F::of(rng.sample::<f64, _>(StandardNormal))).collect(),
        };
        let s = squash(&out[r * 2 * a..(r + 1) * 2 * a], &eps);
        let v: Vec<f64> = s.action.iter().map(|x| x.f64()).collect();
        actions.push(Action::from_slice(&v));
    }
    Ok((actions, next))
}

/// Hidden state at the start of the training slice: the encoder unrolled
/// from zero over the burn-in prefix.
pub fn burn_in_hidden<F: Real>(nets: &Networks, encoder: &[F], batch: &Batch<F>) -> Result<Hidden<F>, NnError> {
    let zero = nets.encoder.zero_hidden(batch.b);
    if batch.burn_in == 0 {
        return Ok(zero);
    }
    let prefix = batch.obs_rows(0, batch.burn_in);
    let mask = &batch.mask[..batch.burn_in * batch.b];
    Ok(nets.encoder.infer(encoder, &prefix, batch.burn_in, batch.b, mask, &zero)?.1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub encoder: Vec<F>,
    pub policy: Vec<F>,
    pub q: Vec<Vec<F>>,
    pub log_alpha: F,
}

/// Losses and gradients for one batch, all taken at the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Computed<F> {
    pub stats: UpdateStats,
    pub grads: Gradients<F>,
    /// Bellman targets per training-slice step (`len * b`).
    pub targets: Vec<F>,
}

fn concat_rows<F: Real>(a: &[F], aw: usize, b: &[F], bw: usize, n: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(n * (aw + bw));
    for r in 0..n {
        out.extend_from_slice(&a[r * aw..(r + 1) * aw]);
        out.extend_from_slice(&b[r * bw..(r + 1) * bw]);
    }
    out
}

fn finite<F: Real>(xs: &[F]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// `noise` is standard normal, `(len + 1) * b * action_dim` values, one row
/// per training-slice observation.
pub fn compute<F: Real>(
    nets: &Networks,
    st: &SacState<F>,
    cfg: &SacConfig,
    batch: &Batch<F>,
    noise: &[F],
) -> Result<Computed<F>, UpdateError> {
    let (b, bi, l) = (batch.b, batch.burn_in, batch.len);
    let a_dim = nets.action_dim();
    let e_dim = nets.embedding_dim();
    let n = l * b;
    let n_all = (l + 1) * b;
    assert_eq!(noise.len(), n_all * a_dim, "noise length");
    let enc = &nets.encoder;

    let train_obs = batch.obs_rows(bi, bi + l + 1);
    let mut train_mask = batch.mask[bi * b..].to_vec();
    train_mask.extend(std::iter::repeat_n(F::one(), b));
    let h_on = burn_in_hidden(nets, &st.encoder, batch)?;
    let h_tg = burn_in_hidden(nets, &st.target_encoder, batch)?;
    let (emb, _, ecache) = enc.forward(&st.encoder, &train_obs, l + 1, b, &train_mask, &h_on)?;
    let (temb, _) = enc.infer(&st.target_encoder, &train_obs, l + 1, b, &train_mask, &h_tg)?;

    let pcache = nets.policy.forward(&st.policy, &emb, n_all)?;
    let pout = pcache.output();
    let draws: Vec<_> = (0..n_all)
        .map(|r| squash(&pout[r * 2 * a_dim..(r + 1) * 2 * a_dim], &noise[r * a_dim..(r + 1) * a_dim]))
        .collect();
    let alpha = st.alpha();
    let gamma = F::of(cfg.gamma);

    let mask = &batch.mask[bi * b..];
    let count = mask.iter().copied().sum::<F>();
    let inv = F::one() / count.max(F::one());

    // Bellman targets from the next observation of each step.
    let next_actions: Vec<F> = draws[b..].iter().flat_map(|d| d.action.iter().copied()).collect();
    let x_next = concat_rows(&temb[b * e_dim..], e_dim, &next_actions, a_dim, n);
    let tq: Vec<Vec<F>> = st.target_q.iter().map(|p| nets.q.infer(p, &x_next, n)).collect();
    let mut targets = vec![F::zero(); n];
    for r in 0..n {
        let min_q = tq.iter().map(|q| q[r]).fold(F::infinity(), F::min);
        let soft = min_q - alpha * draws[b + r].log_prob;
        let s = bi * b + r;
        targets[r] = batch.rewards[s] + gamma * (F::one() - batch.dones[s]) * soft;
    }

    // Critic loss.
    let x_cur = concat_rows(&emb, e_dim, &batch.actions[bi * b * a_dim..], a_dim, n);
    let mut g_emb = vec![F::zero(); n_all * e_dim];
    let mut q_grads = Vec::with_capacity(st.q.len());
    let mut critic_loss = F::zero();
    let mut q_sum = F::zero();
    for p in &st.q {
        let cache = nets.q.forward(p, &x_cur, n)?;
        let qv = cache.output();
        let mut gy = vec![F::zero(); n];
        for r in 0..n {
            let diff = qv[r] - targets[r];
            critic_loss += mask[r] * diff * diff * inv;
            q_sum += mask[r] * qv[r] * inv;
            gy[r] = F::of(2.0) * mask[r] * diff * inv;
        }
        let mut g = vec![F::zero(); p.len()];
        let gx = nets.q.backward(p, &cache, &gy, &mut g);
        for r in 0..n {
            for k in 0..e_dim {
                g_emb[r * e_dim + k] += gx[r * (e_dim + a_dim) + k];
            }
        }
        q_grads.push(g);
    }
    let (g_encoder, _) = enc.backward(&st.encoder, &ecache, &g_emb, None);

    // Policy loss on the detached embedding.
    let pi_actions: Vec<F> = draws[..n].iter().flat_map(|d| d.action.iter().copied()).collect();
    let x_pi = concat_rows(&emb, e_dim, &pi_actions, a_dim, n);
    let mut q_pi = Vec::with_capacity(st.q.len());
    let mut dq_da = Vec::with_capacity(st.q.len());
    for p in &st.q {
        let cache = nets.q.forward(p, &x_pi, n)?;
        let mut scratch = vec![F::zero(); p.len()];
        let gx = nets.q.backward(p, &cache, &vec![F::one(); n], &mut scratch);
        q_pi.push(cache.output().to_vec());
        dq_da.push(gx);
    }
    let mut gy_pol = vec![F::zero(); n_all * 2 * a_dim];
    let mut policy_loss = F::zero();
    let mut logp_mean = F::zero();
    let two = F::of(2.0);
    for r in 0..n {
        let m = mask[r];
        if m == F::zero() {
            continue;
        }
        let j = (0..q_pi.len()).fold(0, |best, j| if q_pi[j][r] < q_pi[best][r] { j } else { best });
        let d = &draws[r];
        policy_loss += m * (alpha * d.log_prob - q_pi[j][r]) * inv;
        logp_mean += m * d.log_prob * inv;
        let c = m * inv;
        for i in 0..a_dim {
            let a = d.action[i];
            let dq = dq_da[j][r * (e_dim + a_dim) + e_dim + i];
            let dl_du = alpha * two * d.u[i].tanh() - dq * (F::one() - a * a);
            gy_pol[r * 2 * a_dim + i] = c * dl_du;
            if !d.clamped[i] {
                gy_pol[r * 2 * a_dim + a_dim + i] = c * (-alpha + dl_du * d.std[i] * d.eps[i]);
            }
        }
    }
    let mut g_policy = vec![F::zero(); st.policy.len()];
    nets.policy.backward(&st.policy, &pcache, &gy_pol, &mut g_policy);

    // Temperature.
    let ent = F::of(cfg.target_entropy(a_dim));
    let alpha_loss = -st.log_alpha * (logp_mean + ent);
    let g_alpha = -(logp_mean + ent);

    for (v, term) in [
        (critic_loss, "critic loss"),
        (policy_loss, "policy loss"),
        (alpha_loss, "alpha loss"),
    ] {
        if !v.is_finite() {
            return Err(UpdateError::NonFinite(term));
        }
    }
    if !finite(&g_encoder) || q_grads.iter().any(|g| !finite(g)) {
        return Err(UpdateError::NonFinite("critic gradient"));
    }
    if !finite(&g_policy) {
        return Err(UpdateError::NonFinite("policy gradient"));
    }
    Ok(Computed {
        stats: UpdateStats {
            critic_loss: critic_loss.f64(),
            policy_loss: policy_loss.f64(),
            alpha_loss: alpha_loss.f64(),
            alpha: alpha.f64(),
            mean_q: q_sum.f64() / st.q.len() as f64,
        },
        grads: Gradients {
            encoder: g_encoder,
            policy: g_policy,
            q: q_grads,
            log_alpha: g_alpha,
        },
        targets,
    })
}

/// `target <- (1 - tau) * target + tau * online`
pub fn polyak<F: Real>(target: &mut [F], online: &[F], tau: f64) {
    let t = F::of(tau);
    let keep = F::one() - t;
    for (x, &o) in target.iter_mut().zip(online) {
        *x = keep * *x + t * o;
    }
}

/// Applies the gradients with Adam, then moves the targets.
pub fn apply<F: Real>(st: &mut SacState<F>, grads: &Gradients<F>, cfg: &SacConfig) {
    st.opt_encoder.step(&mut st.encoder, &grads.encoder);
    for ((p, o), g) in st.q.iter_mut().zip(&mut st.opt_q).zip(&grads.q) {
        o.step(p, g);
    }
    st.opt_policy.step(&mut st.policy, &grads.policy);
    let mut la = [st.log_alpha];
    st.opt_alpha.step(&mut la, &[grads.log_alpha]);
    st.log_alpha = la[0];
    polyak(&mut st.target_encoder, &st.encoder, cfg.tau);
    for (t, p) in st.target_q.iter_mut().zip(&st.q) {
        polyak(t, p, cfg.tau);
    }
    st.updates += 1;
}

pub fn sample_noise<F: Real, R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<F> {
    (0..len).map(|_| F::of(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// One full update: fresh noise, gradients at the current parameters, Adam
/// steps, Polyak averaging. On error the state is left untouched.
pub fn update<F: Real, R: Rng + ?Sized>(
    nets: &Networks,
    st: &mut SacState<F>,
    cfg: &SacConfig,
    batch: &Batch<F>,
    rng: &mut R,
) -> Result<UpdateStats, UpdateError> {
    let noise = sample_noise((batch.len + 1) * batch.b * nets.action_dim(), rng);
    let c = compute(nets, st, cfg, batch, &noise)?;
    apply(st, &c.grads, cfg);
    Ok(c.stats)
}
