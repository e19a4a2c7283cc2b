use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{BackwardMode, Layer, LayerCache, LayerKind};
use super::{NnError, Scalar, Tensor};

/// Outputs of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T: Scalar = f32> {
    /// Sigmoid outputs, shape `[N]`.
    pub probabilities: Tensor<T>,
    /// Pre-sigmoid scores, shape `[N]`.
    pub logits: Tensor<T>,
}

/// Everything a backward pass needs from the forward pass it follows.
///
/// `acts[0]` is the input of layer `start`; `acts[i + 1]` is the output of layer
/// `start + i`.
#[derive(Debug, Clone)]
pub struct ActivationRecord<T: Scalar = f32> {
    version: u64,
    start: usize,
    acts: Vec<Tensor<T>>,
    caches: Vec<LayerCache>,
}

impl<T: Scalar> ActivationRecord<T> {
    pub fn start(&self) -> usize {
        self.start
    }

    /// Input of layer `layer`, or the final output when `layer == model.len()`.
    pub fn activation(&self, layer: usize) -> Option<&Tensor<T>> {
        layer.checked_sub(self.start).and_then(|i| self.acts.get(i))
    }
}

/// Parameter gradients per layer (empty where not computed) and the gradient at
/// the bottom of the traversed span.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar = f32> {
    pub params: Vec<Vec<Tensor<T>>>,
    pub input: Option<Tensor<T>>,
}

/// A span of layers `[bottom, top)` to differentiate through.
#[derive(Debug, Clone, Copy)]
pub struct Span {
    pub bottom: usize,
    pub top: usize,
    pub mode: BackwardMode,
    pub param_grads: bool,
    pub input_grad: bool,
}

/// Sequential binary classifier over `[N, C, H, W]` inputs ending in one sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar = f32> {
    input_shape: [usize; 3],
    layers: Vec<Layer<T>>,
    version: u64,
}

impl<T: Scalar> Model<T> {
    pub fn new(input_shape: [usize; 3], layers: Vec<Layer<T>>) -> Result<Self, NnError> {
        let out = chain_shapes(&input_shape, &layers)?;
        match layers.last().map(Layer::kind) {
            Some(LayerKind::Sigmoid) if out.last().map(Vec::as_slice) == Some(&[1][..]) => {}
            _ => {
                return Err(NnError::InvalidArchitecture(
                    "a model must end in a single-output sigmoid".into(),
                ))
            }
        }
        if layers[..layers.len() - 1].iter().any(|l| l.kind() == LayerKind::Sigmoid) {
            return Err(NnError::InvalidArchitecture("only the final layer may be a sigmoid".into()));
        }
        Ok(Self {
            input_shape,
            layers,
            version: 0,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Counter bumped on every parameter change; records from older versions are stale.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access to one layer. Invalidates outstanding activation records.
    pub fn layer_mut(&mut self, i: usize) -> &mut Layer<T> {
        self.version += 1;
        &mut self.layers[i]
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.version += 1;
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers.iter().filter(|l| !l.frozen).map(Layer::param_count).sum()
    }

    /// Index of the first layer with trainable parameters.
    pub fn first_trainable(&self) -> Option<usize> {
        self.layers.iter().position(|l| !l.frozen && !l.params().is_empty())
    }

    /// Index of the last convolution layer.
    pub fn last_conv(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| matches!(l.kind(), LayerKind::Conv2d { .. }))
    }

    /// Per-sample output shape of every layer.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        chain_shapes(&self.input_shape, &self.layers).expect("validated at construction")
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            input_shape: self.input_shape,
            layers: self.layers.iter().map(Layer::cast).collect(),
            version: self.version,
        }
    }

    pub fn snapshot(&self) -> Vec<Vec<Tensor<T>>> {
        self.layers.iter().map(|l| l.params().to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: Vec<Vec<Tensor<T>>>) -> Result<(), NnError> {
        if snapshot.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch("snapshot layer count differs".into()));
        }
        for (l, p) in self.layers.iter_mut().zip(snapshot) {
            l.set_params(p)?;
        }
        self.version += 1;
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<(), NnError> {
        let s = batch.shape();
        if s.len() != 4 || s[0] == 0 || s[1..] != self.input_shape {
            return Err(NnError::ShapeMismatch(format!(
                "batch {s:?} does not match model input [N, {}, {}, {}]",
                self.input_shape[0], self.input_shape[1], self.input_shape[2]
            )));
        }
        Ok(())
    }

    /// Runs layers `[from, to)` without keeping intermediates.
    pub fn run_span(&self, input: &Tensor<T>, from: usize, to: usize) -> Result<Tensor<T>, NnError> {
        if from == 0 {
            self.check_batch(input)?;
        }
        let mut x = input.clone();
        for layer in &self.layers[from..to] {
            x = layer.forward(&x)?.0;
        }
        Ok(x)
    }

    fn finish(&self, logits_in: &Tensor<T>, probs: &Tensor<T>) -> Forward<T> {
        let n = probs.shape()[0];
        Forward {
            probabilities: probs.clone().reshape(vec![n]).expect("single output"),
            logits: logits_in.clone().reshape(vec![n]).expect("single output"),
        }
    }

    /// Inference only.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Forward<T>, NnError> {
        let last = self.layers.len() - 1;
        let logits = self.run_span(batch, 0, last)?;
        let probs = self.layers[last].forward(&logits)?.0;
        Ok(self.finish(&logits, &probs))
    }

    /// Full forward pass, recording every activation.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<(Forward<T>, ActivationRecord<T>), NnError> {
        self.check_batch(batch)?;
        self.forward_from(0, batch.clone())
    }

    /// Forward pass recording layers `start..`, where `input` feeds layer `start`.
    pub fn forward_from(&self, start: usize, input: Tensor<T>) -> Result<(Forward<T>, ActivationRecord<T>), NnError> {
        if start >= self.layers.len() {
            return Err(NnError::InvalidArchitecture(format!("no layer {start}")));
        }
        let mut acts = Vec::with_capacity(self.layers.len() - start + 1);
        let mut caches = Vec::with_capacity(self.layers.len() - start);
        acts.push(input);
        for layer in &self.layers[start..] {
            let (y, cache) = layer.forward(acts.last().unwrap())?;
            acts.push(y);
            caches.push(cache);
        }
        let n = acts.len();
        let fwd = self.finish(&acts[n - 2], &acts[n - 1]);
        Ok((
            fwd,
            ActivationRecord {
                version: self.version,
                start,
                acts,
                caches,
            },
        ))
    }

    /// Backpropagates `grad` (the gradient at the input of layer `span.top`) down to
    /// the input of layer `span.bottom`.
    pub fn backward_span(&self, record: &ActivationRecord<T>, grad: Tensor<T>, span: Span) -> Result<Gradients<T>, NnError> {
        if record.version != self.version || record.acts.len() != self.layers.len() - record.start + 1 {
            return Err(NnError::StaleRecord);
        }
        if span.bottom < record.start || span.bottom > span.top || span.top > self.layers.len() {
            return Err(NnError::InvalidArchitecture(format!(
                "span {}..{} outside recorded layers {}..{}",
                span.bottom,
                span.top,
                record.start,
                self.layers.len()
            )));
        }
        let mut params = vec![Vec::new(); self.layers.len()];
        let mut g = grad;
        for i in (span.bottom..span.top).rev() {
            let r = i - record.start;
            let need_input = i > span.bottom || span.input_grad;
            let (gx, gp) = self.layers[i].backward(
                &record.acts[r],
                &record.acts[r + 1],
                &record.caches[r],
                &g,
                span.mode,
                need_input,
                span.param_grads,
            )?;
            params[i] = gp;
            match gx {
                Some(gx) => g = gx,
                None => {
                    return Ok(Gradients { params, input: None });
                }
            }
        }
        Ok(Gradients { params, input: Some(g) })
    }

    /// Exact gradients of a loss given `dL/dp` per sample (shape `[N]`).
    pub fn backward(&self, record: &ActivationRecord<T>, grad_prob: &Tensor<T>) -> Result<Gradients<T>, NnError> {
        let n = grad_prob.len();
        let g = grad_prob.clone().reshape(vec![n, 1])?;
        self.backward_span(
            record,
            g,
            Span {
                bottom: record.start,
                top: self.layers.len(),
                mode: BackwardMode::Standard,
                param_grads: true,
                input_grad: true,
            },
        )
    }

    /// Gradient of the logits (scaled per sample by `grad_logit`) at the input of
    /// layer `bottom`, without parameter gradients.
    pub fn backward_logit(
        &self,
        record: &ActivationRecord<T>,
        grad_logit: &Tensor<T>,
        bottom: usize,
        mode: BackwardMode,
    ) -> Result<Tensor<T>, NnError> {
        let n = grad_logit.len();
        let g = grad_logit.clone().reshape(vec![n, 1])?;
        let out = self.backward_span(
            record,
            g,
            Span {
                bottom,
                top: self.layers.len() - 1,
                mode,
                param_grads: false,
                input_grad: true,
            },
        )?;
        Ok(out.input.expect("input gradient requested"))
    }
}

fn chain_shapes<T: Scalar>(input: &[usize; 3], layers: &[Layer<T>]) -> Result<Vec<Vec<usize>>, NnError> {
    let mut shape = input.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate() {
        shape = l
            .kind()
            .output_shape(&shape)
            .map_err(|e| NnError::ShapeMismatch(format!("layer {i}: {e}")))?;
        out.push(shape.clone());
    }
    Ok(out)
}

/// Smallest input side for which [`Backbone::tinynet`] produces a feature map.
pub const TINYNET_MIN_SIDE: usize = 38;

/// Factor applied to the He-uniform kernel of TinyNet's last convolution.
pub const TINYNET_FEATURE_GAIN: f64 = 10.0;

/// Convolutional feature extractor to which a classification head is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone<T: Scalar = f32> {
    pub input_shape: [usize; 3],
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Backbone<T> {
    /// Three `conv(16, 3x3) / relu / maxpool(2)` blocks, then `conv(32, 3x3) / relu`.
    ///
    /// Convolutions are unpadded with stride 1, so a 224 input yields a 32x24x24
    /// feature map and sides below [`TINYNET_MIN_SIDE`] yield none. Kernels are
    /// He-uniform from `seed`, the last one multiplied by [`TINYNET_FEATURE_GAIN`];
    /// biases are zero.
    pub fn tinynet(input_shape: [usize; 3], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "tinynet", 0));
        let mut layers = Vec::new();
        let mut in_c = input_shape[0];
        for out_c in [16, 16, 16] {
            layers.push(he_conv(in_c, out_c, 1.0, &mut rng));
            layers.push(Layer::relu());
            layers.push(Layer::max_pool(2, 2));
            in_c = out_c;
        }
        layers.push(he_conv(in_c, 32, TINYNET_FEATURE_GAIN, &mut rng));
        layers.push(Layer::relu());
        Self { input_shape, layers }
    }

    /// Output shape `[C, H, W]` of the feature map.
    pub fn feature_shape(&self) -> Result<Vec<usize>, NnError> {
        let shapes = chain_shapes(&self.input_shape, &self.layers)?;
        match shapes.last() {
            Some(s) if s.len() == 3 && self.layers.iter().any(|l| matches!(l.kind(), LayerKind::Conv2d { .. })) => {
                Ok(s.clone())
            }
            _ => Err(NnError::NoConvOutput),
        }
    }
}

fn he_conv<T: Scalar>(in_c: usize, out_c: usize, gain: f64, rng: &mut ChaCha8Rng) -> Layer<T> {
    let fan_in = in_c * 9;
    let bound = (6.0 / fan_in as f64).sqrt();
    let w = (0..out_c * fan_in)
        .map(|_| T::from_f64_lossy(gain * rng.gen_range(-bound..bound)))
        .collect();
    Layer::conv2d(in_c, out_c, 3, 1, 0)
        .with_params(vec![Tensor::new(vec![out_c, in_c, 3, 3], w).unwrap(), Tensor::zeros(vec![out_c])])
        .unwrap()
}

/// Width of the hidden dense layer of the classification head.
pub const HEAD_WIDTH: usize = 512;

/// Attaches `global_avg_pool -> dense(512) -> relu -> dense(1) -> sigmoid` to a backbone.
///
/// Backbone layers are frozen when `freeze` is set. Head weights are Glorot-uniform
/// (`±sqrt(6 / (fan_in + fan_out))`) from `seed`, head biases zero.
pub fn build_transfer_model<T: Scalar>(backbone: Backbone<T>, freeze: bool, seed: u64) -> Result<Model<T>, NnError> {
    let feat = backbone.feature_shape()?;
    let channels = feat[0];
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "head", 0));
    let mut layers = backbone.layers;
    for l in &mut layers {
        l.frozen = freeze;
    }
    layers.push(Layer::global_avg_pool());
    layers.push(glorot_dense(channels, HEAD_WIDTH, &mut rng));
    layers.push(Layer::relu());
    layers.push(glorot_dense(HEAD_WIDTH, 1, &mut rng));
    layers.push(Layer::sigmoid());
    Model::new(backbone.input_shape, layers)
}

fn glorot_dense<T: Scalar>(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Layer<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w = (0..fan_in * fan_out)
        .map(|_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
        .collect();
    Layer::dense(fan_in, fan_out)
        .with_params(vec![Tensor::new(vec![fan_out, fan_in], w).unwrap(), Tensor::zeros(vec![fan_out])])
        .unwrap()
}
