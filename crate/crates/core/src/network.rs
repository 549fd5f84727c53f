//! The 1-D convolutional timing classifier and the fully connected
//! baseline: shape derivation, forward pass, analytic backward pass,
//! initialization, and the model container format.
//!
//! Container layout (all little-endian):
//!
//! ```text
//! magic "OSLM" | u32 version=1 | u8 kind (0=cnn, 1=fcnn)
//! u32 n | u32 cp_len | u32 zc_root | u32 tau_p | u32 delta_tau | u32 tau_relax | f64 sigma_d2
//! u32 tensor_count
//! per tensor: u8 name_len | name | u32 ndim | u32 dims... | f32 data...
//! ```

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};
use rand::Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"OSLM";
const VERSION: u32 = 1;

/// Real feature array of `len` positions by `channels` filters, stored
/// position-major (`data[pos * channels + ch]`), so flattening is the raw
/// buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Vec<f64>,
    pub len: usize,
    pub channels: usize,
}

impl FeatureMap {
    pub fn zeros(len: usize, channels: usize) -> Self {
        FeatureMap { data: vec![0.0; len * channels], len, channels }
    }
}

/// 1-D convolution layer. Weights are `[out_ch][tap][in_ch]`, matching the
/// position-major feature layout so inner products run over contiguous
/// slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Symmetric zero padding keeping the length fixed (stride must be 1);
    /// otherwise valid padding.
    pub same_pad: bool,
}

impl Conv1d {
    fn zeros(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, same_pad: bool) -> Self {
        Conv1d {
            weights: vec![0.0; out_ch * kernel * in_ch],
            bias: vec![0.0; out_ch],
            in_ch,
            out_ch,
            kernel,
            stride,
            same_pad,
        }
    }

    fn left_pad(&self) -> usize {
        if self.same_pad {
            (self.kernel - 1) / 2
        } else {
            0
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        if self.same_pad {
            in_len
        } else {
            (in_len - self.kernel) / self.stride + 1
        }
    }

    /// Pre-activation outputs.
    fn forward(&self, input: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(input.channels, self.in_ch);
        let out_len = self.out_len(input.len);
        let ic = self.in_ch;
        let row = self.kernel * ic;
        let mut out = FeatureMap::zeros(out_len, self.out_ch);
        for j in 0..out_len {
            let start = (j * self.stride) as isize - self.left_pad() as isize;
            let t0 = (-start).max(0) as usize;
            let t1 = self.kernel.min((input.len as isize - start).max(0) as usize);
            let base = (start + t0 as isize) as usize * ic;
            let x = &input.data[base..base + (t1 - t0) * ic];
            for c in 0..self.out_ch {
                let w = &self.weights[c * row + t0 * ic..c * row + t1 * ic];
                let mut acc = self.bias[c];
                for (wv, xv) in w.iter().zip(x) {
                    acc += wv * xv;
                }
                out.data[j * self.out_ch + c] = acc;
            }
        }
        out
    }

    /// Accumulates weight/bias gradients and, when requested, the gradient
    /// with respect to the input map.
    fn backward(
        &self,
        input: &FeatureMap,
        dz: &FeatureMap,
        dweights: &mut [f64],
        dbias: &mut [f64],
        mut dinput: Option<&mut FeatureMap>,
    ) {
        let ic = self.in_ch;
        let row = self.kernel * ic;
        for j in 0..dz.len {
            let start = (j * self.stride) as isize - self.left_pad() as isize;
            let t0 = (-start).max(0) as usize;
            let t1 = self.kernel.min((input.len as isize - start).max(0) as usize);
            let base = (start + t0 as isize) as usize * ic;
            let span = (t1 - t0) * ic;
            let x = &input.data[base..base + span];
            for c in 0..self.out_ch {
                let g = dz.data[j * self.out_ch + c];
                if g == 0.0 {
                    continue;
                }
                dbias[c] += g;
                let dw = &mut dweights[c * row + t0 * ic..c * row + t1 * ic];
                for (dwv, xv) in dw.iter_mut().zip(x) {
                    *dwv += g * xv;
                }
                if let Some(di) = dinput.as_deref_mut() {
                    let w = &self.weights[c * row + t0 * ic..c * row + t1 * ic];
                    let dx = &mut di.data[base..base + span];
                    for (dxv, wv) in dx.iter_mut().zip(w) {
                        *dxv += g * wv;
                    }
                }
            }
        }
    }
}

/// Fully connected layer; weights are `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim)
            .map(|i| {
                let w = &self.weights[i * self.in_dim..(i + 1) * self.in_dim];
                let mut acc = self.bias[i];
                for (wv, xv) in w.iter().zip(x) {
                    acc += wv * xv;
                }
                acc
            })
            .collect()
    }

    fn backward(
        &self,
        x: &[f64],
        dz: &[f64],
        dweights: &mut [f64],
        dbias: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        for (i, &g) in dz.iter().enumerate() {
            dbias[i] += g;
            let dw = &mut dweights[i * self.in_dim..(i + 1) * self.in_dim];
            for (dwv, xv) in dw.iter_mut().zip(x) {
                *dwv += g * xv;
            }
        }
        if let Some(dx) = dx {
            for (i, &g) in dz.iter().enumerate() {
                let w = &self.weights[i * self.in_dim..(i + 1) * self.in_dim];
                for (dxv, wv) in dx.iter_mut().zip(w) {
                    *dxv += g * wv;
                }
            }
        }
    }
}

fn relu(map: &FeatureMap) -> FeatureMap {
    FeatureMap {
        data: map.data.iter().map(|&v| v.max(0.0)).collect(),
        len: map.len,
        channels: map.channels,
    }
}

/// dz = da * 1[z > 0]
fn relu_backward(z: &FeatureMap, da: &FeatureMap) -> FeatureMap {
    FeatureMap {
        data: z
            .data
            .iter()
            .zip(&da.data)
            .map(|(&zv, &dv)| if zv > 0.0 { dv } else { 0.0 })
            .collect(),
        len: z.len,
        channels: z.channels,
    }
}

/// Average pooling, size 2, stride 2, no padding.
fn avg_pool2(input: &FeatureMap) -> FeatureMap {
    let out_len = input.len / 2;
    let c = input.channels;
    let mut out = FeatureMap::zeros(out_len, c);
    for j in 0..out_len {
        for ch in 0..c {
            out.data[j * c + ch] =
                0.5 * (input.data[2 * j * c + ch] + input.data[(2 * j + 1) * c + ch]);
        }
    }
    out
}

fn avg_pool2_backward(dout: &FeatureMap, in_len: usize) -> FeatureMap {
    let c = dout.channels;
    let mut din = FeatureMap::zeros(in_len, c);
    for j in 0..dout.len {
        for ch in 0..c {
            let g = 0.5 * dout.data[j * c + ch];
            din.data[2 * j * c + ch] += g;
            din.data[(2 * j + 1) * c + ch] += g;
        }
    }
    din
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Layer dimensions derived from the frame config alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnDims {
    pub input: usize,
    pub k1: usize,
    pub k23: usize,
    pub conv_len: usize,
    pub pooled_len: usize,
    pub flatten: usize,
    pub classes: usize,
}

pub fn cnn_dims(cfg: &OfdmConfig) -> CnnDims {
    let input = 2 * cfg.m();
    let k1 = 2 * cfg.n + 1;
    let conv_len = (input - k1) / 2 + 1;
    let pooled_len = conv_len / 2;
    CnnDims {
        input,
        k1,
        k23: cfg.cp_len.div_ceil(2) + 1,
        conv_len,
        pooled_len,
        flatten: 2 * pooled_len,
        classes: cfg.n_u(),
    }
}

/// Parameters of the three-convolution timing classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub conv3: Conv1d,
    pub hidden: Dense,
    pub out: Dense,
}

/// Parameters of the fully connected baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnnParams {
    pub hidden: Vec<Dense>,
    pub out: Dense,
}

/// Default hidden widths for the baseline, chosen to land near the
/// classifier's multiply count.
pub const FCNN_DEFAULT_HIDDEN: [usize; 4] = [256, 192, 160, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Cnn,
    Fcnn,
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Cnn => "cnn",
            GraphKind::Fcnn => "fcnn",
        }
    }
}

/// A full parameter set of either graph. Gradients reuse the same shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Cnn(CnnParams),
    Fcnn(FcnnParams),
}

/// Shape-congruent gradient holder.
pub type Gradients = Network;

/// Cached activations from one forward pass.
pub enum Cache {
    Cnn {
        input: FeatureMap,
        z1: FeatureMap,
        a1: FeatureMap,
        z2: FeatureMap,
        a2: FeatureMap,
        z3: FeatureMap,
        a3: FeatureMap,
        pooled: FeatureMap,
        hidden_act: Vec<f64>,
        probs: Vec<f64>,
    },
    Fcnn {
        input: Vec<f64>,
        hidden_acts: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
}

impl Cache {
    pub fn probs(&self) -> &[f64] {
        match self {
            Cache::Cnn { probs, .. } => probs,
            Cache::Fcnn { probs, .. } => probs,
        }
    }
}

/// Cross-entropy of the target class; a non-finite probability yields NaN
/// so the trainer's divergence check can fire (`f64::max` would silently
/// swallow it).
fn sample_loss(probs: &[f64], target: usize) -> f64 {
    let p = probs[target];
    if p.is_finite() {
        -(p.max(1e-300)).ln()
    } else {
        f64::NAN
    }
}

fn glorot_uniform<R: Rng>(data: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in data.iter_mut() {
        *v = (rng.random::<f64>() * 2.0 - 1.0) * limit;
    }
}

impl Network {
    /// Fresh classifier parameters: fan-scaled symmetric uniform weights,
    /// zero biases, deterministic per seed.
    pub fn new_cnn(cfg: &OfdmConfig, seed: u64) -> Result<Network> {
        cfg.validate()?;
        let d = cnn_dims(cfg);
        let mut conv1 = Conv1d::zeros(1, 4, d.k1, 2, false);
        let mut conv2 = Conv1d::zeros(4, 4, d.k23, 1, true);
        let mut conv3 = Conv1d::zeros(4, 2, d.k23, 1, true);
        let mut hidden = Dense::zeros(d.flatten, d.classes);
        let mut out = Dense::zeros(d.classes, d.classes);
        let mut rng = derive_rng(seed, stream::INIT, 0);
        glorot_uniform(&mut conv1.weights, d.k1, 4 * d.k1, &mut rng);
        glorot_uniform(&mut conv2.weights, 4 * d.k23, 4 * d.k23, &mut rng);
        glorot_uniform(&mut conv3.weights, 4 * d.k23, 2 * d.k23, &mut rng);
        glorot_uniform(&mut hidden.weights, d.flatten, d.classes, &mut rng);
        glorot_uniform(&mut out.weights, d.classes, d.classes, &mut rng);
        Ok(Network::Cnn(CnnParams { conv1, conv2, conv3, hidden, out }))
    }

    /// Fresh baseline parameters: `2m -> hidden... -> n_u`, tanh hidden
    /// activations, softmax output.
    pub fn new_fcnn(cfg: &OfdmConfig, hidden_sizes: &[usize], seed: u64) -> Result<Network> {
        cfg.validate()?;
        if hidden_sizes.is_empty() {
            return Err(Error::config("baseline needs at least one hidden layer"));
        }
        let mut rng = derive_rng(seed, stream::INIT, 1);
        let mut dims = vec![2 * cfg.m()];
        dims.extend_from_slice(hidden_sizes);
        dims.push(cfg.n_u());
        let mut layers: Vec<Dense> = dims
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        for layer in &mut layers {
            glorot_uniform(&mut layer.weights, layer.in_dim, layer.out_dim, &mut rng);
        }
        let out = layers.pop().expect("at least two layers");
        Ok(Network::Fcnn(FcnnParams { hidden: layers, out }))
    }

    pub fn kind(&self) -> GraphKind {
        match self {
            Network::Cnn(_) => GraphKind::Cnn,
            Network::Fcnn(_) => GraphKind::Fcnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            // 2m = 2(n_u + n) with kernel = 2n + 1 and n_u classes.
            Network::Cnn(p) => 2 * p.out.out_dim + p.conv1.kernel - 1,
            Network::Fcnn(p) => p.hidden[0].in_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::Cnn(p) => p.out.out_dim,
            Network::Fcnn(p) => p.out.out_dim,
        }
    }

    /// Class probabilities for one observation vector.
    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(y)?.1.probs().to_vec())
    }

    /// Forward pass retaining every activation needed by [`Network::backward`].
    pub fn forward_cached(&self, y: &[f64]) -> Result<(Vec<f64>, Cache)> {
        if y.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: y.len() });
        }
        match self {
            Network::Cnn(p) => {
                let input = FeatureMap { data: y.to_vec(), len: y.len(), channels: 1 };
                let z1 = p.conv1.forward(&input);
                let a1 = relu(&z1);
                let z2 = p.conv2.forward(&a1);
                let a2 = relu(&z2);
                let z3 = p.conv3.forward(&a2);
                let a3 = relu(&z3);
                let pooled = avg_pool2(&a3);
                let hidden_z = p.hidden.forward(&pooled.data);
                let hidden_act: Vec<f64> = hidden_z.iter().map(|v| v.tanh()).collect();
                let logits = p.out.forward(&hidden_act);
                let probs = softmax(&logits);
                Ok((
                    probs.clone(),
                    Cache::Cnn { input, z1, a1, z2, a2, z3, a3, pooled, hidden_act, probs },
                ))
            }
            Network::Fcnn(p) => {
                let mut acts: Vec<Vec<f64>> = Vec::with_capacity(p.hidden.len());
                let mut x = y.to_vec();
                for layer in &p.hidden {
                    x = layer.forward(&x).iter().map(|v| v.tanh()).collect();
                    acts.push(x.clone());
                }
                let logits = p.out.forward(&x);
                let probs = softmax(&logits);
                Ok((probs.clone(), Cache::Fcnn { input: y.to_vec(), hidden_acts: acts, probs }))
            }
        }
    }

    /// Cross-entropy loss and exact gradients for one sample.
    ///
    /// The returned holder is shape-congruent with `self`; the output-layer
    /// pre-activation gradient is the softmax identity `p - t`.
    pub fn backward(&self, cache: &Cache, target: usize) -> Result<(Gradients, f64)> {
        if target >= self.output_dim() {
            return Err(Error::usage(format!("target {target} outside the class range")));
        }
        match (self, cache) {
            (Network::Cnn(p), Cache::Cnn { input, z1, a1, z2, a2, z3, a3, pooled, hidden_act, probs }) => {
                let mut g = p.zeros_like();
                let loss = sample_loss(probs, target);

                let mut dlogits = probs.clone();
                dlogits[target] -= 1.0;

                let mut dhidden_act = vec![0.0; p.out.in_dim];
                p.out.backward(
                    hidden_act,
                    &dlogits,
                    &mut g.out.weights,
                    &mut g.out.bias,
                    Some(&mut dhidden_act),
                );

                let dhidden_z: Vec<f64> = dhidden_act
                    .iter()
                    .zip(hidden_act)
                    .map(|(&d, &a)| d * (1.0 - a * a))
                    .collect();
                let mut dflat = vec![0.0; p.hidden.in_dim];
                p.hidden.backward(
                    &pooled.data,
                    &dhidden_z,
                    &mut g.hidden.weights,
                    &mut g.hidden.bias,
                    Some(&mut dflat),
                );

                let dpooled =
                    FeatureMap { data: dflat, len: pooled.len, channels: pooled.channels };
                let da3 = avg_pool2_backward(&dpooled, a3.len);
                let dz3 = relu_backward(z3, &da3);
                let mut da2 = FeatureMap::zeros(a2.len, a2.channels);
                p.conv3.backward(a2, &dz3, &mut g.conv3.weights, &mut g.conv3.bias, Some(&mut da2));

                let dz2 = relu_backward(z2, &da2);
                let mut da1 = FeatureMap::zeros(a1.len, a1.channels);
                p.conv2.backward(a1, &dz2, &mut g.conv2.weights, &mut g.conv2.bias, Some(&mut da1));

                let dz1 = relu_backward(z1, &da1);
                p.conv1.backward(input, &dz1, &mut g.conv1.weights, &mut g.conv1.bias, None);

                Ok((Network::Cnn(g), loss))
            }
            (Network::Fcnn(p), Cache::Fcnn { input, hidden_acts, probs }) => {
                let mut g = p.zeros_like();
                let loss = sample_loss(probs, target);

                let mut dlogits = probs.clone();
                dlogits[target] -= 1.0;

                let last_act = hidden_acts.last().expect("at least one hidden layer");
                let mut dact = vec![0.0; p.out.in_dim];
                p.out.backward(last_act, &dlogits, &mut g.out.weights, &mut g.out.bias, Some(&mut dact));

                for i in (0..p.hidden.len()).rev() {
                    let act = &hidden_acts[i];
                    let dz: Vec<f64> =
                        dact.iter().zip(act).map(|(&d, &a)| d * (1.0 - a * a)).collect();
                    let below: &[f64] = if i == 0 { input } else { &hidden_acts[i - 1] };
                    let mut dbelow = vec![0.0; p.hidden[i].in_dim];
                    let g_layer = &mut g.hidden[i];
                    p.hidden[i].backward(
                        below,
                        &dz,
                        &mut g_layer.weights,
                        &mut g_layer.bias,
                        if i == 0 { None } else { Some(&mut dbelow) },
                    );
                    dact = dbelow;
                }
                Ok((Network::Fcnn(g), loss))
            }
            _ => Err(Error::usage("cache does not belong to this graph")),
        }
    }

    /// A same-shape holder with every value zero.
    pub fn zeros_like(&self) -> Network {
        match self {
            Network::Cnn(p) => Network::Cnn(p.zeros_like()),
            Network::Fcnn(p) => Network::Fcnn(p.zeros_like()),
        }
    }

    /// Every parameter tensor with its name and shape, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &Vec<f64>)> {
        match self {
            Network::Cnn(p) => vec![
                ("conv1.weight".into(), vec![4, p.conv1.kernel, 1], &p.conv1.weights),
                ("conv1.bias".into(), vec![4], &p.conv1.bias),
                ("conv2.weight".into(), vec![4, p.conv2.kernel, 4], &p.conv2.weights),
                ("conv2.bias".into(), vec![4], &p.conv2.bias),
                ("conv3.weight".into(), vec![2, p.conv3.kernel, 4], &p.conv3.weights),
                ("conv3.bias".into(), vec![2], &p.conv3.bias),
                ("hidden.weight".into(), vec![p.hidden.out_dim, p.hidden.in_dim], &p.hidden.weights),
                ("hidden.bias".into(), vec![p.hidden.out_dim], &p.hidden.bias),
                ("out.weight".into(), vec![p.out.out_dim, p.out.in_dim], &p.out.weights),
                ("out.bias".into(), vec![p.out.out_dim], &p.out.bias),
            ],
            Network::Fcnn(p) => {
                let mut v = Vec::with_capacity(2 * p.hidden.len() + 2);
                for (i, l) in p.hidden.iter().enumerate() {
                    v.push((format!("hidden{i}.weight"), vec![l.out_dim, l.in_dim], &l.weights));
                    v.push((format!("hidden{i}.bias"), vec![l.out_dim], &l.bias));
                }
                v.push(("out.weight".into(), vec![p.out.out_dim, p.out.in_dim], &p.out.weights));
                v.push(("out.bias".into(), vec![p.out.out_dim], &p.out.bias));
                v
            }
        }
    }

    /// Mutable view of every parameter tensor in the same fixed order as
    /// [`Network::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Network::Cnn(p) => vec![
                &mut p.conv1.weights,
                &mut p.conv1.bias,
                &mut p.conv2.weights,
                &mut p.conv2.bias,
                &mut p.conv3.weights,
                &mut p.conv3.bias,
                &mut p.hidden.weights,
                &mut p.hidden.bias,
                &mut p.out.weights,
                &mut p.out.bias,
            ],
            Network::Fcnn(p) => {
                let mut v = Vec::with_capacity(2 * p.hidden.len() + 2);
                for l in &mut p.hidden {
                    v.push(&mut l.weights);
                    v.push(&mut l.bias);
                }
                v.push(&mut p.out.weights);
                v.push(&mut p.out.bias);
                v
            }
        }
    }

    /// Writes the container format.
    pub fn save(&self, cfg: &OfdmConfig, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[match self.kind() {
            GraphKind::Cnn => 0u8,
            GraphKind::Fcnn => 1u8,
        }])?;
        for v in [cfg.n, cfg.cp_len, cfg.zc_root, cfg.tau_p, cfg.delta_tau, cfg.tau_relax] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        w.write_all(&cfg.sigma_d2.to_le_bytes())?;
        let tensors = self.tensors();
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (name, shape, data) in tensors {
            let bytes = name.as_bytes();
            w.write_all(&[bytes.len() as u8])?;
            w.write_all(bytes)?;
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for d in &shape {
                w.write_all(&(*d as u32).to_le_bytes())?;
            }
            debug_assert_eq!(shape.iter().product::<usize>(), data.len());
            for v in data {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a container and rebuilds the graph, validating every tensor
    /// name and shape against the stored config.
    pub fn load(path: &Path) -> Result<(Network, OfdmConfig)> {
        let file = std::fs::File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        read_checked(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(format!("bad magic {magic:02x?}")));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported version {version}")));
        }
        let mut kind_byte = [0u8; 1];
        read_checked(&mut r, &mut kind_byte)?;
        let kind = match kind_byte[0] {
            0 => GraphKind::Cnn,
            1 => GraphKind::Fcnn,
            other => return Err(Error::format(format!("unknown graph kind {other}"))),
        };
        let n = read_u32(&mut r)? as usize;
        let cp_len = read_u32(&mut r)? as usize;
        let zc_root = read_u32(&mut r)? as usize;
        let tau_p = read_u32(&mut r)? as usize;
        let delta_tau = read_u32(&mut r)? as usize;
        let tau_relax = read_u32(&mut r)? as usize;
        let mut f8 = [0u8; 8];
        read_checked(&mut r, &mut f8)?;
        let sigma_d2 = f64::from_le_bytes(f8);
        let cfg = OfdmConfig { n, cp_len, zc_root, tau_p, delta_tau, tau_relax, sigma_d2 };
        cfg.validate()
            .map_err(|e| Error::format(format!("stored config invalid: {e}")))?;

        let count = read_u32(&mut r)? as usize;
        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            let mut len = [0u8; 1];
            read_checked(&mut r, &mut len)?;
            let mut name = vec![0u8; len[0] as usize];
            read_checked(&mut r, &mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::format("tensor name is not utf-8"))?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u32(&mut r)? as usize);
            }
            let total: usize = shape.iter().product();
            let mut payload = vec![0u8; 4 * total];
            read_checked(&mut r, &mut payload)?;
            let data: Vec<f64> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            table.push((name, shape, data));
        }

        let mut skeleton = match kind {
            GraphKind::Cnn => Network::new_cnn(&cfg, 0)?,
            GraphKind::Fcnn => {
                let hidden: Vec<usize> = table
                    .iter()
                    .filter(|(name, _, _)| name.starts_with("hidden") && name.ends_with(".weight"))
                    .map(|(_, shape, _)| shape[0])
                    .collect();
                Network::new_fcnn(&cfg, &hidden, 0)?
            }
        };
        let expected = skeleton.tensors();
        if expected.len() != table.len() {
            return Err(Error::format(format!(
                "tensor count {} does not match the {} graph",
                table.len(),
                kind.name()
            )));
        }
        for ((name, shape, _), (got_name, got_shape, _)) in expected.iter().zip(&table) {
            if name != got_name || shape != got_shape {
                return Err(Error::format(format!(
                    "tensor {got_name} {got_shape:?} does not match expected {name} {shape:?}"
                )));
            }
        }
        for (slot, (_, _, data)) in skeleton.tensors_mut().into_iter().zip(table) {
            *slot = data;
        }
        Ok((skeleton, cfg))
    }
}

/// Raises a format error when a stored config disagrees with the runtime
/// one.
pub fn ensure_cfg_matches(stored: &OfdmConfig, runtime: &OfdmConfig) -> Result<()> {
    if stored != runtime {
        return Err(Error::format(format!(
            "model config {stored:?} does not match runtime config {runtime:?}"
        )));
    }
    Ok(())
}

impl CnnParams {
    fn zeros_like(&self) -> CnnParams {
        CnnParams {
            conv1: Conv1d::zeros(1, 4, self.conv1.kernel, 2, false),
            conv2: Conv1d::zeros(4, 4, self.conv2.kernel, 1, true),
            conv3: Conv1d::zeros(4, 2, self.conv3.kernel, 1, true),
            hidden: Dense::zeros(self.hidden.in_dim, self.hidden.out_dim),
            out: Dense::zeros(self.out.in_dim, self.out.out_dim),
        }
    }
}

impl FcnnParams {
    fn zeros_like(&self) -> FcnnParams {
        FcnnParams {
            hidden: self
                .hidden
                .iter()
                .map(|l| Dense::zeros(l.in_dim, l.out_dim))
                .collect(),
            out: Dense::zeros(self.out.in_dim, self.out.out_dim),
        }
    }
}

fn read_checked(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("model file truncated")
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_checked(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
