//! Small fully-convolutional encoder mapping an image to a grid-shaped map in
//! `(0, 1)`: conv + ReLU blocks with kernel equal to stride, whose strides
//! multiply to the tile size, so every grid cell sees exactly its own tile;
//! then optional 3x3 blocks mixing neighbouring cells; then a 1x1 conv to one
//! channel and a sigmoid.

use super::activation::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
use super::conv::{conv2d_backward, conv2d_forward, ConvLayer};
use super::{NnError, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shrinks the initial weights of the 1x1 output layer so every seed starts
/// with outputs near the middle of the sigmoid instead of a random,
/// possibly saturated, offset.
pub const HEAD_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub in_channels: usize,
    /// Output channels of the hidden blocks. Shorter than the number of
    /// downsampling blocks means the last width repeats.
    pub widths: Vec<usize>,
    /// Pixels per grid cell along each axis; the total downsampling factor.
    pub tile: usize,
    /// 3x3 stride-1 blocks at grid resolution after downsampling.
    #[serde(default)]
    pub context: usize,
}

impl EncoderConfig {
    pub fn new(in_channels: usize, tile: usize) -> Self {
        EncoderConfig { in_channels, widths: vec![8, 16, 16], tile, context: 0 }
    }

    /// Strides of the hidden blocks: factors of two first, then the odd rest.
    pub fn strides(&self) -> Vec<usize> {
        let mut rest = self.tile.max(1);
        let mut strides = Vec::new();
        while rest % 2 == 0 {
            strides.push(2);
            rest /= 2;
        }
        if rest > 1 {
            strides.push(rest);
        }
        if strides.is_empty() {
            strides.push(1);
        }
        strides
    }

    fn width(&self, block: usize) -> usize {
        let w = self.widths.get(block).or(self.widths.last()).copied().unwrap_or(8);
        w.max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    layers: Vec<ConvLayer>,
}

/// Intermediate values kept from a forward pass.
pub struct EncoderTape {
    /// Input of every conv layer.
    inputs: Vec<Tensor>,
    /// Output of every hidden conv, before ReLU.
    pre_relu: Vec<Tensor>,
    /// Final sigmoid output, `[1, gh, gw]`.
    output: Tensor,
}

impl Encoder {
    pub fn new<R: Rng>(config: EncoderConfig, rng: &mut R) -> Result<Self, NnError> {
        if config.tile == 0 || config.in_channels == 0 {
            return Err(NnError::Invalid("tile and in_channels must be positive".into()));
        }
        let mut layers = Vec::new();
        let mut ch = config.in_channels;
        let strides = config.strides();
        for (b, &s) in strides.iter().enumerate() {
            let out = config.width(b);
            layers.push(ConvLayer::kaiming(rng, ch, out, s, s, 0)?);
            ch = out;
        }
        for b in 0..config.context {
            let out = config.width(strides.len() + b);
            layers.push(ConvLayer::kaiming(rng, ch, out, 3, 1, 1)?);
            ch = out;
        }
        let mut head = ConvLayer::kaiming(rng, ch, 1, 1, 1, 0)?;
        for v in head.kernel.values_mut() {
            *v *= HEAD_INIT_SCALE;
        }
        layers.push(head);
        Ok(Encoder { config, layers })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(ConvLayer::num_params).sum()
    }

    /// Parameter tensors in checkpoint order: per layer, kernel then bias.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.kernel, &mut l.bias])
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.kernel.values());
            out.extend_from_slice(l.bias.values());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.num_params() {
            return Err(NnError::Shape(format!("expected {} parameters, found {}", self.num_params(), flat.len())));
        }
        let mut at = 0;
        for t in self.params_mut() {
            let n = t.len();
            t.values_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    /// Adds a flat gradient (checkpoint order) into the parameter tensors.
    pub fn accumulate_flat_grad(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut at = 0;
        for t in self.params_mut() {
            let n = t.len();
            t.accumulate_grad(&flat[at..at + n]);
            at += n;
        }
    }

    pub fn zero_grad(&mut self) {
        for t in self.params_mut() {
            t.zero_grad();
        }
    }

    pub fn grid_shape(&self, image: &Tensor) -> Result<(usize, usize), NnError> {
        let [c, h, w] = *image.shape() else {
            return Err(NnError::Shape(format!("image must be [C,H,W], found {:?}", image.shape())));
        };
        if c != self.config.in_channels {
            return Err(NnError::Shape(format!("encoder expects {} channels, found {c}", self.config.in_channels)));
        }
        let tile = self.config.tile;
        if h % tile != 0 || w % tile != 0 {
            return Err(NnError::Resolution { height: h, width: w, tile });
        }
        Ok((h / tile, w / tile))
    }

    /// Returns a `[gh, gw]` map with values in `(0, 1)`.
    pub fn forward(&self, image: &Tensor) -> Result<(Tensor, EncoderTape), NnError> {
        let (gh, gw) = self.grid_shape(image)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_relu = Vec::with_capacity(self.layers.len() - 1);
        let mut x = image.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let y = conv2d_forward(&x, layer)?;
            inputs.push(x);
            if i < last {
                x = relu_forward(&y);
                pre_relu.push(y);
            } else {
                x = y;
            }
        }
        let output = sigmoid_forward(&x);
        debug_assert_eq!(output.shape(), &[1, gh, gw]);
        let out = output.clone().reshape(vec![gh, gw])?;
        Ok((out, EncoderTape { inputs, pre_relu, output }))
    }

    /// Gradient with respect to the input image and the flat parameter
    /// gradient, given `dL/d output` shaped `[gh, gw]`.
    pub fn backward(&self, tape: &EncoderTape, grad_out: &Tensor) -> Result<(Tensor, Vec<f64>), NnError> {
        let shape = tape.output.shape().to_vec();
        let g = grad_out.clone().reshape(shape)?;
        let mut g = sigmoid_backward(&tape.output, &g)?;
        let mut per_layer: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < self.layers.len() - 1 {
                g = relu_backward(&tape.pre_relu[i], &g)?;
            }
            let grads = conv2d_backward(&tape.inputs[i], layer, &g)?;
            per_layer.push((grads.kernel, grads.bias));
            g = grads.input;
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (k, b) in per_layer.into_iter().rev() {
            flat.extend(k);
            flat.extend(b);
        }
        Ok((g, flat))
    }
}
