//! Feed-forward layers and their sequential composition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conv::ConvGeom;
use crate::init;
use crate::ops::{axpy, matmul_nt};
use crate::scalar::Real;
use crate::NnError;

/// Activation shape `(channels, depth, height, width)`. Vectors are `(n, 1, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub fn vector(n: usize) -> Self {
        Shape([n, 1, 1, 1])
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear {
        inputs: usize,
        outputs: usize,
    },
    Conv3d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Linear { inputs: usize, outputs: usize },
    Conv(ConvGeom),
    Relu(usize),
    Tanh(usize),
}

impl Layer {
    pub fn param_len(&self) -> usize {
        match self {
            Layer::Linear { inputs, outputs } => inputs * outputs + outputs,
            Layer::Conv(g) => g.param_len(),
            Layer::Relu(_) | Layer::Tanh(_) => 0,
        }
    }

    pub fn in_len(&self) -> usize {
        match self {
            Layer::Linear { inputs, .. } => *inputs,
            Layer::Conv(g) => g.in_len(),
            Layer::Relu(n) | Layer::Tanh(n) => *n,
        }
    }

    pub fn out_len(&self) -> usize {
        match self {
            Layer::Linear { outputs, .. } => *outputs,
            Layer::Conv(g) => g.out_len(),
            Layer::Relu(n) | Layer::Tanh(n) => *n,
        }
    }

    pub fn forward<F: Real>(&self, params: &[F], x: &[F], n: usize) -> Vec<F> {
        match self {
            &Layer::Linear { inputs, outputs } => {
                let (w, b) = params.split_at(inputs * outputs);
                let mut y = Vec::with_capacity(n * outputs);
                for _ in 0..n {
                    y.extend_from_slice(b);
                }
                matmul_nt(x, w, n, outputs, inputs, &mut y);
                y
            }
            Layer::Conv(g) => g.forward(params, x, n),
            Layer::Relu(_) => x.iter().map(|&v| v.max(F::zero())).collect(),
            Layer::Tanh(_) => x.iter().map(|&v| v.tanh()).collect(),
        }
    }

    /// `x` and `y` are this layer's input and output from the forward pass.
    pub fn backward<F: Real>(&self, params: &[F], x: &[F], y: &[F], gy: &[F], n: usize, grads: &mut [F]) -> Vec<F> {
        match self {
            &Layer::Linear { inputs, outputs } => {
                let (w, _) = params.split_at(inputs * outputs);
                let (gw, gb) = grads.split_at_mut(inputs * outputs);
                let mut gx = vec![F::zero(); n * inputs];
                for s in 0..n {
                    let xs = &x[s * inputs..(s + 1) * inputs];
                    let gxs = &mut gx[s * inputs..(s + 1) * inputs];
                    for o in 0..outputs {
                        let g = gy[s * outputs + o];
                        if g == F::zero() {
                            continue;
                        }
                        gb[o] += g;
                        axpy(g, xs, &mut gw[o * inputs..(o + 1) * inputs]);
                        axpy(g, &w[o * inputs..(o + 1) * inputs], gxs);
                    }
                }
                gx
            }
            Layer::Conv(g) => g.backward(params, x, gy, n, grads),
            Layer::Relu(_) => x
                .iter()
                .zip(gy)
                .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
                .collect(),
            Layer::Tanh(_) => y.iter().zip(gy).map(|(&t, &g)| g * (F::one() - t * t)).collect(),
        }
    }

    pub fn init<F: Real, R: Rng + ?Sized>(&self, params: &mut [F], rng: &mut R) {
        match self {
            &Layer::Linear { inputs, outputs } => {
                let (w, b) = params.split_at_mut(inputs * outputs);
                init::orthogonal(w, outputs, inputs, 1.0, rng);
                b.fill(F::zero());
            }
            Layer::Conv(g) => {
                let (w, b) = params.split_at_mut(g.weight_len());
                init::kaiming_uniform(w, g.fan_in(), rng);
                b.fill(F::zero());
            }
            Layer::Relu(_) | Layer::Tanh(_) => {}
        }
    }
}

impl SequentialSpec {
    /// Checks that consecutive layers compose; returns the activation shapes
    /// (input first).
    pub fn shapes(&self, part: &str) -> Result<Vec<Shape>, NnError> {
        Ok(self.build(part)?.1)
    }

    fn build(&self, part: &str) -> Result<(Vec<Layer>, Vec<Shape>), NnError> {
        let err = |index: usize, message: String| NnError::Spec {
            part: part.to_string(),
            index,
            message,
        };
        if self.input.is_empty() {
            return Err(err(0, "input shape has a zero extent".into()));
        }
        let mut shape = self.input;
        let mut shapes = vec![shape];
        let mut layers = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let layer = match *l {
                LayerSpec::Linear { inputs, outputs } => {
                    if inputs != shape.len() {
                        return Err(err(i, format!("linear expects {inputs} inputs but receives {}", shape.len())));
                    }
                    if outputs == 0 {
                        return Err(err(i, "linear has zero outputs".into()));
                    }
                    Layer::Linear { inputs, outputs }
                }
                LayerSpec::Conv3d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                }
                | LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let two_d = matches!(l, LayerSpec::Conv2d { .. });
                    let [c, d, h, w] = shape.0;
                    if in_channels != c {
                        return Err(err(i, format!("conv expects {in_channels} channels but receives {c}")));
                    }
                    if two_d && d != 1 {
                        return Err(err(i, format!("conv2d receives depth {d}, expected 1")));
                    }
                    if out_channels == 0 {
                        return Err(err(i, "conv has zero output channels".into()));
                    }
                    let (k, s, p) = if two_d {
                        ([1, kernel, kernel], [1, stride, stride], [0, padding, padding])
                    } else {
                        ([kernel; 3], [stride; 3], [padding; 3])
                    };
                    let g = ConvGeom::new(in_channels, out_channels, [d, h, w], k, s, p).ok_or_else(|| {
                        err(i, format!("kernel {kernel} stride {stride} padding {padding} does not fit input {d}x{h}x{w}"))
                    })?;
                    Layer::Conv(g)
                }
                LayerSpec::Relu => Layer::Relu(shape.len()),
                LayerSpec::Tanh => Layer::Tanh(shape.len()),
            };
            shape = match &layer {
                Layer::Linear { outputs, .. } => Shape::vector(*outputs),
                Layer::Conv(g) => Shape([g.out_channels, g.output[0], g.output[1], g.output[2]]),
                _ => shape,
            };
            shapes.push(shape);
            layers.push(layer);
        }
        Ok((layers, shapes))
    }
}

/// Inputs of every layer plus the final output, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SeqCache<F> {
    pub n: usize,
    acts: Vec<Vec<F>>,
}

impl<F: Real> SeqCache<F> {
    pub fn output(&self) -> &[F] {
        self.acts.last().expect("cache holds the input")
    }
}

/// Layers applied in order to a batch of flattened samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    pub spec: SequentialSpec,
    pub layers: Vec<Layer>,
    offsets: Vec<usize>,
    param_len: usize,
    in_len: usize,
    out_len: usize,
}

impl Sequential {
    pub fn new(spec: SequentialSpec, part: &str) -> Result<Self, NnError> {
        let (layers, shapes) = spec.build(part)?;
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_len();
        }
        Ok(Self {
            in_len: shapes[0].len(),
            out_len: shapes.last().unwrap().len(),
            spec,
            layers,
            offsets,
            param_len: total,
        })
    }

    /// Stack of `Linear` layers with ReLU between them (none after the last).
    pub fn mlp(sizes: &[usize], part: &str) -> Result<Self, NnError> {
        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            layers.push(LayerSpec::Linear {
                inputs: w[0],
                outputs: w[1],
            });
            if i + 2 < sizes.len() {
                layers.push(LayerSpec::Relu);
            }
        }
        Self::new(
            SequentialSpec {
                input: Shape::vector(sizes[0]),
                layers,
            },
            part,
        )
    }

    pub fn param_len(&self) -> usize {
        self.param_len
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    fn slice<'a, F>(&self, params: &'a [F], i: usize) -> &'a [F] {
        &params[self.offsets[i]..self.offsets[i] + self.layers[i].param_len()]
    }

    pub fn init<F: Real, R: Rng + ?Sized>(&self, params: &mut [F], rng: &mut R) {
        for (i, l) in self.layers.iter().enumerate() {
            l.init(&mut params[self.offsets[i]..self.offsets[i] + l.param_len()], rng);
        }
    }


    /// Forward pass keeping activations.
    pub fn forward<F: Real>(&self, params: &[F], x: &[F], n: usize) -> Result<SeqCache<F>, NnError> {
        if x.len() != n * self.in_len || params.len() != self.param_len {
            let (expected, got) = if params.len() != self.param_len {
                (self.param_len, params.len())
            } else {
                (n * self.in_len, x.len())
            };
            return Err(NnError::Shape {
                part: "sequential".into(),
                expected,
                got,
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let y = l.forward(self.slice(params, i), acts.last().unwrap(), n);
            acts.push(y);
        }
        Ok(SeqCache { n, acts })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn infer<F: Real>(&self, params: &[F], x: &[F], n: usize) -> Vec<F> {
        assert_eq!(x.len(), n * self.in_len, "input length");
        let mut cur = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            cur = l.forward(self.slice(params, i), &cur, n);
        }
        cur
    }

    /// Accumulates into `grads` (length [`Self::param_len`]); returns the input gradient.
    pub fn backward<F: Real>(&self, params: &[F], cache: &SeqCache<F>, gy: &[F], grads: &mut [F]) -> Vec<F> {
        assert_eq!(gy.len(), cache.output().len(), "output gradient length");
        let mut g = gy.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let gp = &mut grads[self.offsets[i]..self.offsets[i] + l.param_len()];
            g = l.backward(self.slice(params, i), &cache.acts[i], &cache.acts[i + 1], &g, cache.n, gp);
        }
        g
    }
}
