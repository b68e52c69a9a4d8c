//! Feed-forward network descriptors laid out over one flat parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, NodeId, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense { inputs: usize, outputs: usize, bias: bool, activation: Activation },
    TemporalConv { in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation },
}

/// Architecture header: per-sample input shape, a sequential trunk, parallel
/// output heads whose outputs are concatenated, and an optional block of
/// state-independent log standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub input: Vec<usize>,
    pub trunk: Vec<Layer>,
    pub heads: Vec<Layer>,
    #[serde(default)]
    pub log_std: usize,
}

impl Arch {
    /// Multilayer perceptron with tanh hidden layers and one linear head.
    pub fn mlp(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut prev = input;
        for &h in hidden {
            trunk.push(Layer::Dense { inputs: prev, outputs: h, bias: true, activation: Activation::Tanh });
            prev = h;
        }
        Self {
            input: vec![input],
            trunk,
            heads: vec![Layer::Dense { inputs: prev, outputs: output, bias: true, activation: Activation::Identity }],
            log_std: 0,
        }
    }

    /// Temporal convolution stack over a `[time, channels]` window followed by
    /// `heads` parallel linear heads of `head_outputs` each.
    pub fn temporal_conv(
        time: usize,
        channels: usize,
        conv_channels: &[usize],
        kernel_size: usize,
        heads: usize,
        head_outputs: usize,
    ) -> Self {
        let mut trunk = Vec::new();
        let mut cin = channels;
        let mut t = time;
        for &c in conv_channels {
            trunk.push(Layer::TemporalConv { in_channels: cin, out_channels: c, kernel_size, activation: Activation::Tanh });
            cin = c;
            t = t.saturating_sub(kernel_size - 1);
        }
        let flat = t * cin;
        Self {
            input: vec![time, channels],
            trunk,
            heads: (0..heads)
                .map(|_| Layer::Dense { inputs: flat, outputs: head_outputs, bias: true, activation: Activation::Identity })
                .collect(),
            log_std: 0,
        }
    }

    pub fn with_log_std(mut self, n: usize) -> Self {
        self.log_std = n;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamView {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
    /// Fan-in used by the initializer; zero for biases and log-std entries.
    fan_in: usize,
    head: bool,
}

impl ParamView {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An [`Arch`] with its validated flat-parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Arch", into = "Arch")]
pub struct Network {
    arch: Arch,
    views: Vec<ParamView>,
    layer_views: Vec<(usize, Option<usize>)>,
    output_width: usize,
    param_count: usize,
}

impl From<Network> for Arch {
    fn from(n: Network) -> Arch {
        n.arch
    }
}

impl TryFrom<Arch> for Network {
    type Error = Error;

    fn try_from(arch: Arch) -> Result<Self> {
        Network::new(arch)
    }
}

impl Network {
    pub fn new(arch: Arch) -> Result<Self> {
        if arch.heads.is_empty() {
            return Err(Error::config("network needs at least one output head"));
        }
        let mut views = Vec::new();
        let mut layer_views = Vec::new();
        let mut offset = 0;
        let mut push = |views: &mut Vec<ParamView>, name: String, shape: Vec<usize>, fan_in: usize, head: bool| {
            let len: usize = shape.iter().product();
            views.push(ParamView { name, offset, shape, fan_in, head });
            offset += len;
            views.len() - 1
        };

        // per-sample shape flowing through the trunk
        let mut shape = arch.input.clone();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::config(format!("invalid input shape {shape:?}")));
        }
        for (i, layer) in arch.trunk.iter().chain(&arch.heads).enumerate() {
            let is_head = i >= arch.trunk.len();
            if is_head {
                // heads all consume the trunk output
                shape = trunk_shape(&arch)?;
            }
            match *layer {
                Layer::Dense { inputs, outputs, bias, .. } => {
                    let flat: usize = shape.iter().product();
                    if flat != inputs {
                        return Err(Error::config(format!("layer {i} expects {inputs} inputs but receives shape {shape:?}")));
                    }
                    let w = push(&mut views, format!("layer{i}.weight"), vec![inputs, outputs], inputs, is_head);
                    let b = bias.then(|| push(&mut views, format!("layer{i}.bias"), vec![outputs], 0, is_head));
                    layer_views.push((w, b));
                    shape = vec![outputs];
                }
                Layer::TemporalConv { in_channels, out_channels, kernel_size, .. } => {
                    let [time, ch] = shape[..] else {
                        return Err(Error::config(format!("layer {i} needs a [time, channels] input, got {shape:?}")));
                    };
                    if ch != in_channels || kernel_size == 0 || time < kernel_size {
                        return Err(Error::config(format!("conv layer {i} (k={kernel_size}, in={in_channels}) cannot consume {shape:?}")));
                    }
                    let w = push(
                        &mut views,
                        format!("layer{i}.kernel"),
                        vec![kernel_size, in_channels, out_channels],
                        kernel_size * in_channels,
                        is_head,
                    );
                    let b = push(&mut views, format!("layer{i}.bias"), vec![out_channels], 0, is_head);
                    layer_views.push((w, Some(b)));
                    shape = vec![time - kernel_size + 1, out_channels];
                }
            }
        }
        let mut output_width = 0;
        for head in &arch.heads {
            match head {
                Layer::Dense { outputs, .. } => output_width += outputs,
                Layer::TemporalConv { .. } => return Err(Error::config("output heads must be dense layers")),
            }
        }
        if arch.log_std > 0 {
            push(&mut views, "log_std".to_string(), vec![arch.log_std], 0, false);
        }
        let param_count = views.iter().map(ParamView::len).sum();
        Ok(Self { arch, views, layer_views, output_width, param_count })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn views(&self) -> &[ParamView] {
        &self.views
    }

    pub fn input_len(&self) -> usize {
        self.arch.input.iter().product()
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    /// Uniform fan-in scaled weights, zero biases. Head weights are further
    /// multiplied by `head_scale`; log-std entries start at `init_log_std`.
    pub fn init_params(&self, rng: &mut impl Rng, head_scale: f64, init_log_std: f64) -> Vec<f64> {
        let mut theta = vec![0.0; self.param_count];
        for view in &self.views {
            let slot = &mut theta[view.offset..view.offset + view.len()];
            if view.name == "log_std" {
                slot.fill(init_log_std);
            } else if view.fan_in > 0 {
                let bound = 1.0 / (view.fan_in as f64).sqrt();
                let scale = if view.head { head_scale } else { 1.0 };
                for v in slot.iter_mut() {
                    *v = scale * rng.random_range(-bound..bound);
                }
            }
        }
        theta
    }

    /// Records the forward pass for a batch of flattened observations.
    /// Returns the concatenated head outputs `[batch, output_width]` and the
    /// log-std node when the architecture has one.
    pub fn forward(&self, g: &mut Graph, theta: &[f64], inputs: &[&[f64]]) -> Result<(NodeId, Option<NodeId>)> {
        if theta.len() != self.param_count {
            return Err(Error::config(format!("parameter vector has {} entries, architecture needs {}", theta.len(), self.param_count)));
        }
        let per = self.input_len();
        let mut data = Vec::with_capacity(per * inputs.len());
        for row in inputs {
            if row.len() != per {
                return Err(Error::usage(format!("observation has {} entries, network expects {per}", row.len())));
            }
            data.extend_from_slice(row);
        }
        if inputs.is_empty() {
            return Err(Error::usage("forward on an empty batch"));
        }
        let mut shape = vec![inputs.len()];
        shape.extend_from_slice(&self.arch.input);
        let mut x = g.input(Tensor::from_parts(shape, data));

        let n_trunk = self.arch.trunk.len();
        for (layer, &(w, b)) in self.arch.trunk.iter().zip(&self.layer_views) {
            x = self.apply(g, theta, layer, w, b, x)?;
        }
        let mut outs = Vec::with_capacity(self.arch.heads.len());
        for (layer, &(w, b)) in self.arch.heads.iter().zip(&self.layer_views[n_trunk..]) {
            outs.push(self.apply(g, theta, layer, w, b, x)?);
        }
        let out = if outs.len() == 1 { outs[0] } else { g.concat(&outs)? };
        let log_std = if self.arch.log_std > 0 {
            let v = self.views.last().expect("log_std view");
            Some(g.param(theta, v.offset, v.shape.clone())?)
        } else {
            None
        };
        Ok((out, log_std))
    }

    fn apply(&self, g: &mut Graph, theta: &[f64], layer: &Layer, w: usize, b: Option<usize>, x: NodeId) -> Result<NodeId> {
        let wv = &self.views[w];
        let wn = g.param(theta, wv.offset, wv.shape.clone())?;
        let bn = match b {
            Some(b) => Some(g.param(theta, self.views[b].offset, self.views[b].shape.clone())?),
            None => None,
        };
        match *layer {
            Layer::Dense { activation, .. } => {
                let y = g.affine(x, wn, bn)?;
                Ok(g.activate(y, activation))
            }
            Layer::TemporalConv { kernel_size, activation, .. } => {
                let y = g.temporal_conv(x, wn, bn, kernel_size)?;
                Ok(g.activate(y, activation))
            }
        }
    }

    /// Forward pass without keeping the graph; returns `[batch * output_width]`.
    pub fn evaluate(&self, theta: &[f64], inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let mut g = Graph::new(self.param_count);
        let (out, _) = self.forward(&mut g, theta, inputs)?;
        Ok(g.value(out).data().to_vec())
    }
}

fn trunk_shape(arch: &Arch) -> Result<Vec<usize>> {
    let mut shape = arch.input.clone();
    for layer in &arch.trunk {
        shape = match *layer {
            Layer::Dense { outputs, .. } => vec![outputs],
            Layer::TemporalConv { out_channels, kernel_size, .. } => {
                let time = shape.first().copied().unwrap_or(0);
                if time < kernel_size {
                    return Err(Error::config("temporal window shorter than conv kernel"));
                }
                vec![time - kernel_size + 1, out_channels]
            }
        };
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_layout_counts() {
        let net = Network::new(Arch::mlp(3, &[8, 8], 3)).unwrap();
        assert_eq!(net.param_count(), 3 * 8 + 8 + 8 * 8 + 8 + 8 * 3 + 3);
        assert_eq!(net.output_width(), 3);
    }

    #[test]
    fn conv_layout_with_parallel_heads() {
        let net = Network::new(Arch::temporal_conv(5, 13, &[32, 64], 3, 3, 21)).unwrap();
        let expected = 3 * 13 * 32 + 32 + 3 * 32 * 64 + 64 + 3 * (64 * 21 + 21);
        assert_eq!(net.param_count(), expected);
        assert_eq!(net.output_width(), 63);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let mut arch = Arch::mlp(3, &[8], 2);
        arch.heads[0] = Layer::Dense { inputs: 7, outputs: 2, bias: true, activation: Activation::Identity };
        assert!(matches!(Network::new(arch), Err(Error::Config(_))));
        assert!(Network::new(Arch::temporal_conv(2, 4, &[8], 3, 1, 3)).is_err());
    }

    #[test]
    fn arch_round_trips_through_json() {
        let net = Network::new(Arch::temporal_conv(3, 5, &[64], 3, 1, 21).with_log_std(0)).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: Network = serde_json::from_str(&json).unwrap();
        assert_eq!(back.param_count(), net.param_count());
        assert_eq!(back.arch(), net.arch());
    }

    #[test]
    fn batched_forward_matches_single_rows() {
        let net = Network::new(Arch::mlp(2, &[4], 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = net.init_params(&mut rng, 1.0, 0.0);
        let a = [0.2, -0.7];
        let b = [1.5, 0.1];
        let both = net.evaluate(&theta, &[&a, &b]).unwrap();
        assert_eq!(&both[..3], &net.evaluate(&theta, &[&a]).unwrap()[..]);
        assert_eq!(&both[3..], &net.evaluate(&theta, &[&b]).unwrap()[..]);
    }
}
