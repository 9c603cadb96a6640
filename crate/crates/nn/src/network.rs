//! Observation encoder: 3D convolutions over the occupancy crop, 2D
//! convolutions over the depth image, a linear layer over the vector
//! features, a fully connected trunk on the concatenation, then an LSTM.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layer::{LayerSpec, SeqCache, Sequential, SequentialSpec, Shape};
use crate::lstm::{Hidden, Lstm, LstmCache};
use crate::scalar::Real;
use crate::NnError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvSpec {
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self {
            channels: vec![8, 16],
            kernel: 3,
            stride: 2,
            padding: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Occupancy crop (x, y, z).
    pub occ_dims: [usize; 3],
    /// Depth image (horizontal, vertical).
    pub depth_dims: [usize; 2],
    /// Motion scalars, relative goal and absolute positions.
    pub vec_dim: usize,
    pub action_dim: usize,
    pub conv3d: ConvSpec,
    pub conv2d: ConvSpec,
    pub vec_width: usize,
    pub trunk_width: usize,
    pub trunk_depth: usize,
    /// `None` drops the recurrent layer.
    pub lstm_hidden: Option<usize>,
    pub head_width: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            occ_dims: [16, 8, 16],
            depth_dims: [12, 4],
            vec_dim: 19,
            action_dim: 4,
            conv3d: ConvSpec::default(),
            conv2d: ConvSpec::default(),
            vec_width: 64,
            trunk_width: 128,
            trunk_depth: 2,
            lstm_hidden: Some(128),
            head_width: 128,
        }
    }
}

impl NetworkSpec {
    /// Layer widths of the original full-scale agent.
    pub fn full_scale() -> Self {
        Self {
            trunk_width: 1024,
            lstm_hidden: Some(1024),
            head_width: 1024,
            vec_width: 256,
            ..Self::default()
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.lstm_hidden.unwrap_or(self.trunk_width)
    }

    fn conv_stack(input: Shape, conv: &ConvSpec, three_d: bool) -> SequentialSpec {
        let mut layers = Vec::new();
        let mut c = input.0[0];
        for &out in &conv.channels {
            let (kernel, stride, padding) = (conv.kernel, conv.stride, conv.padding);
            layers.push(if three_d {
                LayerSpec::Conv3d {
                    in_channels: c,
                    out_channels: out,
                    kernel,
                    stride,
                    padding,
                }
            } else {
                LayerSpec::Conv2d {
                    in_channels: c,
                    out_channels: out,
                    kernel,
                    stride,
                    padding,
                }
            });
            layers.push(LayerSpec::Relu);
            c = out;
        }
        SequentialSpec { input, layers }
    }

    pub fn occupancy_spec(&self) -> SequentialSpec {
        let [x, y, z] = self.occ_dims;
        Self::conv_stack(Shape([1, x, y, z]), &self.conv3d, true)
    }

    pub fn depth_spec(&self) -> SequentialSpec {
        let [h, v] = self.depth_dims;
        Self::conv_stack(Shape([1, 1, h, v]), &self.conv2d, false)
    }

    pub fn vector_spec(&self) -> SequentialSpec {
        SequentialSpec {
            input: Shape::vector(self.vec_dim),
            layers: vec![
                LayerSpec::Linear {
                    inputs: self.vec_dim,
                    outputs: self.vec_width,
                },
                LayerSpec::Relu,
            ],
        }
    }

    fn trunk_spec(&self, inputs: usize) -> SequentialSpec {
        let mut layers = Vec::new();
        let mut n = inputs;
        for _ in 0..self.trunk_depth {
            layers.push(LayerSpec::Linear {
                inputs: n,
                outputs: self.trunk_width,
            });
            layers.push(LayerSpec::Relu);
            n = self.trunk_width;
        }
        SequentialSpec {
            input: Shape::vector(inputs),
            layers,
        }
    }

    /// Builds every part, reporting the first layer that does not compose.
    pub fn validate(&self) -> Result<(), NnError> {
        Encoder::new(self.clone()).map(|_| ())?;
        self.policy_head()?;
        self.q_head()?;
        Ok(())
    }

    /// Mean and log-std per action dimension.
    pub fn policy_head(&self) -> Result<Sequential, NnError> {
        Sequential::mlp(&[self.embedding_dim(), self.head_width, 2 * self.action_dim], "policy head")
    }

    /// Q value of an (embedding, action) pair.
    pub fn q_head(&self) -> Result<Sequential, NnError> {
        Sequential::mlp(
            &[self.embedding_dim() + self.action_dim, self.head_width, self.head_width, 1],
            "q head",
        )
    }
}

/// Flattened observations for `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsBatch<F> {
    pub n: usize,
    pub occ: Vec<F>,
    pub depth: Vec<F>,
    pub vec: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<F> {
    t: usize,
    b: usize,
    occ: SeqCache<F>,
    depth: SeqCache<F>,
    vec: SeqCache<F>,
    trunk: SeqCache<F>,
    lstm: Option<LstmCache<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub spec: NetworkSpec,
    pub occ: Sequential,
    pub depth: Sequential,
    pub vec: Sequential,
    pub trunk: Sequential,
    pub lstm: Option<Lstm>,
    offsets: [usize; 5],
    param_len: usize,
}

impl Encoder {
    pub fn new(spec: NetworkSpec) -> Result<Self, NnError> {
        let occ = Sequential::new(spec.occupancy_spec(), "occupancy")?;
        let depth = Sequential::new(spec.depth_spec(), "depth")?;
        let vec = Sequential::new(spec.vector_spec(), "vector")?;
        let concat = occ.out_len() + depth.out_len() + vec.out_len();
        if spec.trunk_depth == 0 || spec.trunk_width == 0 {
            return Err(NnError::Spec {
                part: "trunk".into(),
                index: 0,
                message: "trunk needs at least one layer of nonzero width".into(),
            });
        }
        let trunk = Sequential::new(spec.trunk_spec(concat), "trunk")?;
        let lstm = match spec.lstm_hidden {
            Some(0) => {
                return Err(NnError::Spec {
                    part: "lstm".into(),
                    index: 0,
                    message: "hidden size must be positive".into(),
                })
            }
            Some(h) => Some(Lstm {
                input: spec.trunk_width,
                hidden: h,
            }),
            None => None,
        };
        let sizes = [
            occ.param_len(),
            depth.param_len(),
            vec.param_len(),
            trunk.param_len(),
            lstm.map_or(0, |l| l.param_len()),
        ];
        let mut offsets = [0; 5];
        let mut total = 0;
        for (o, s) in offsets.iter_mut().zip(sizes) {
            *o = total;
            total += s;
        }
        Ok(Self {
            spec,
            occ,
            depth,
            vec,
            trunk,
            lstm,
            offsets,
            param_len: total,
        })
    }

    pub fn param_len(&self) -> usize {
        self.param_len
    }

    pub fn embedding_dim(&self) -> usize {
        self.spec.embedding_dim()
    }

    /// Hidden size carried between steps (0 without an LSTM).
    pub fn hidden_size(&self) -> usize {
        self.lstm.map_or(0, |l| l.hidden)
    }

    pub fn zero_hidden<F: Real>(&self, batch: usize) -> Hidden<F> {
        Hidden::zeros(batch, self.hidden_size())
    }

    fn part<'a, F>(&self, p: &'a [F], i: usize) -> &'a [F] {
        let end = if i + 1 < 5 { self.offsets[i + 1] } else { self.param_len };
        &p[self.offsets[i]..end]
    }

    pub fn init<F: Real, R: Rng + ?Sized>(&self, params: &mut [F], rng: &mut R) {
        let o = self.offsets;
        self.occ.init(&mut params[o[0]..o[1]], rng);
        self.depth.init(&mut params[o[1]..o[2]], rng);
        self.vec.init(&mut params[o[2]..o[3]], rng);
        self.trunk.init(&mut params[o[3]..o[4]], rng);
        if let Some(l) = self.lstm {
            l.init(&mut params[o[4]..], rng);
        }
    }

    fn check(&self, obs: &ObsBatch<impl Real>) -> Result<(), NnError> {
        for (part, seq, got) in [
            ("occupancy", &self.occ, obs.occ.len()),
            ("depth", &self.depth, obs.depth.len()),
            ("vector", &self.vec, obs.vec.len()),
        ] {
            if got != obs.n * seq.in_len() {
                return Err(NnError::Shape {
                    part: part.into(),
                    expected: obs.n * seq.in_len(),
                    got,
                });
            }
        }
        Ok(())
    }

    /// Encodes `t` steps of `b` sequences (time-major). `mask` marks valid
    /// steps for the recurrent layer.
    pub fn forward<F: Real>(
        &self,
        params: &[F],
        obs: &ObsBatch<F>,
        t: usize,
        b: usize,
        mask: &[F],
        h0: &Hidden<F>,
    ) -> Result<(Vec<F>, Hidden<F>, EncoderCache<F>), NnError> {
        if params.len() != self.param_len {
            return Err(NnError::Shape {
                part: "encoder parameters".into(),
                expected: self.param_len,
                got: params.len(),
            });
        }
        if obs.n != t * b {
            return Err(NnError::Shape {
                part: "batch".into(),
                expected: t * b,
                got: obs.n,
            });
        }
        self.check(obs)?;
        let n = obs.n;
        let occ = self.occ.forward(self.part(params, 0), &obs.occ, n)?;
        let depth = self.depth.forward(self.part(params, 1), &obs.depth, n)?;
        let vec = self.vec.forward(self.part(params, 2), &obs.vec, n)?;
        let concat = self.concat(&occ, &depth, &vec, n);
        let trunk = self.trunk.forward(self.part(params, 3), &concat, n)?;
        let (emb, hidden, lstm) = match &self.lstm {
            Some(l) => {
                let (ys, hid, c) = l.forward(self.part(params, 4), trunk.output(), t, b, mask, h0);
                (ys, hid, Some(c))
            }
            None => (trunk.output().to_vec(), Hidden::zeros(b, 0), None),
        };
        Ok((
            emb,
            hidden,
            EncoderCache {
                t,
                b,
                occ,
                depth,
                vec,
                trunk,
                lstm,
            },
        ))
    }

    fn concat<F: Real>(&self, occ: &SeqCache<F>, depth: &SeqCache<F>, vec: &SeqCache<F>, n: usize) -> Vec<F> {
        let (a, b, c) = (self.occ.out_len(), self.depth.out_len(), self.vec.out_len());
        let mut out = Vec::with_capacity(n * (a + b + c));
        for s in 0..n {
            out.extend_from_slice(&occ.output()[s * a..(s + 1) * a]);
            out.extend_from_slice(&depth.output()[s * b..(s + 1) * b]);
            out.extend_from_slice(&vec.output()[s * c..(s + 1) * c]);
        }
        out
    }

    /// Inference-only forward.
    pub fn infer<F: Real>(
        &self,
        params: &[F],
        obs: &ObsBatch<F>,
        t: usize,
        b: usize,
        mask: &[F],
        h0: &Hidden<F>,
    ) -> Result<(Vec<F>, Hidden<F>), NnError> {
        self.forward(params, obs, t, b, mask, h0).map(|(e, h, _)| (e, h))
    }

    /// Gradient of the encoder parameters given the embedding gradient and
    /// optionally the gradient of the final recurrent state. Returns the
    /// parameter gradient and the gradient with respect to the initial state.
    pub fn backward<F: Real>(
        &self,
        params: &[F],
        cache: &EncoderCache<F>,
        g_emb: &[F],
        g_final: Option<&Hidden<F>>,
    ) -> (Vec<F>, Hidden<F>) {
        let mut grads = vec![F::zero(); self.param_len];
        let o = self.offsets;
        let n = cache.t * cache.b;
        let (g_trunk, g_h0) = match (&self.lstm, &cache.lstm) {
            (Some(l), Some(c)) => {
                let zero = Hidden::zeros(cache.b, l.hidden);
                let gf = g_final.unwrap_or(&zero);
                let (lp, lg) = (&params[o[4]..], &mut grads[o[4]..]);
                l.backward(lp, c, g_emb, gf, lg)
            }
            _ => (g_emb.to_vec(), Hidden::zeros(cache.b, 0)),
        };
        let g_concat = self.trunk.backward(self.part(params, 3), &cache.trunk, &g_trunk, &mut grads[o[3]..o[4]]);
        let (a, b, c) = (self.occ.out_len(), self.depth.out_len(), self.vec.out_len());
        let w = a + b + c;
        let mut ga = Vec::with_capacity(n * a);
        let mut gb = Vec::with_capacity(n * b);
        let mut gc = Vec::with_capacity(n * c);
        for s in 0..n {
            let row = &g_concat[s * w..(s + 1) * w];
            ga.extend_from_slice(&row[..a]);
            gb.extend_from_slice(&row[a..a + b]);
            gc.extend_from_slice(&row[a + b..]);
        }
        self.occ.backward(self.part(params, 0), &cache.occ, &ga, &mut grads[o[0]..o[1]]);
        self.depth.backward(self.part(params, 1), &cache.depth, &gb, &mut grads[o[1]..o[2]]);
        self.vec.backward(self.part(params, 2), &cache.vec, &gc, &mut grads[o[2]..o[3]]);
        (grads, g_h0)
    }
}
