//! The four architectures: feedforward stacks (MLP and the deeper ANN), the
//! stacked LSTM, and the dilated-causal TCN, each with a hand-derived
//! backward pass and a 5-way softmax head.

pub mod dense;
pub mod lstm;
mod serial;
pub mod tcn;

pub use serial::{model_from_json, model_to_json};

use serde::{Deserialize, Serialize};

use crate::data::NormalizerStats;
use crate::error::{Error, Result};
use crate::math::{ActivationKind, Matrix};
use crate::rng::Rng;

pub const NUM_CLASSES: usize = 5;
pub const NUM_FEATURES: usize = 12;

/// Architecture selector, also used for CLI `--models` lists and file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Mlp,
    Lstm,
    Tcn,
    Ann,
}

impl ArchKind {
    pub const ALL: [ArchKind; 4] = [ArchKind::Mlp, ArchKind::Lstm, ArchKind::Tcn, ArchKind::Ann];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Mlp => "mlp",
            ArchKind::Lstm => "lstm",
            ArchKind::Tcn => "tcn",
            ArchKind::Ann => "ann",
        }
    }

    /// Uppercase name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ArchKind::Mlp => "MLP",
            ArchKind::Lstm => "LSTM",
            ArchKind::Tcn => "TCN",
            ArchKind::Ann => "ANN",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlp" => Ok(ArchKind::Mlp),
            "lstm" => Ok(ArchKind::Lstm),
            "tcn" => Ok(ArchKind::Tcn),
            "ann" => Ok(ArchKind::Ann),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected mlp, lstm, tcn or ann)"
            ))),
        }
    }
}

/// Per-architecture hyperparameters. Defaults are the tuned values the
/// toolkit ships with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ArchSpec {
    Mlp {
        hidden: (usize, usize),
        activation: ActivationKind,
        alpha: f64,
    },
    Lstm {
        layers: usize,
        units: usize,
        activation: ActivationKind,
        learning_rate: f64,
    },
    Tcn {
        layers: usize,
        filters: usize,
        kernel_size: usize,
        dropout: f64,
    },
    Ann {
        layers: usize,
        neurons: (usize, usize, usize),
        activation: ActivationKind,
        learning_rate: f64,
        alpha: f64,
    },
}

impl ArchSpec {
    pub fn kind(&self) -> ArchKind {
        match self {
            ArchSpec::Mlp { .. } => ArchKind::Mlp,
            ArchSpec::Lstm { .. } => ArchKind::Lstm,
            ArchSpec::Tcn { .. } => ArchKind::Tcn,
            ArchSpec::Ann { .. } => ArchKind::Ann,
        }
    }
}

fn default_input_dim() -> usize {
    NUM_FEATURES
}

fn default_classes() -> usize {
    NUM_CLASSES
}

/// A fully specified model: architecture hyperparameters plus the input
/// width and the fixed 5-way output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub arch: ArchSpec,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
}

impl ModelSpec {
    /// Default (tuned) configuration for one architecture.
    pub fn default_for(kind: ArchKind) -> ModelSpec {
        let arch = match kind {
            ArchKind::Mlp => ArchSpec::Mlp {
                hidden: (100, 100),
                activation: ActivationKind::ReLU,
                alpha: 0.001,
            },
            ArchKind::Lstm => ArchSpec::Lstm {
                layers: 2,
                units: 128,
                activation: ActivationKind::Tanh,
                learning_rate: 0.001,
            },
            ArchKind::Tcn => ArchSpec::Tcn {
                layers: 3,
                filters: 64,
                kernel_size: 3,
                dropout: 0.2,
            },
            ArchKind::Ann => ArchSpec::Ann {
                layers: 3,
                neurons: (100, 100, 50),
                activation: ActivationKind::ReLU,
                learning_rate: 0.001,
                alpha: 0.001,
            },
        };
        ModelSpec {
            arch,
            input_dim: NUM_FEATURES,
            classes: NUM_CLASSES,
        }
    }

    pub fn kind(&self) -> ArchKind {
        self.arch.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes != NUM_CLASSES {
            return Err(Error::Config(format!(
                "classes is fixed at {NUM_CLASSES}, got {}",
                self.classes
            )));
        }
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        // Softmax is reserved for the output head; hidden layers get an
        // elementwise activation.
        let hidden_activation = match &self.arch {
            ArchSpec::Mlp { activation, .. }
            | ArchSpec::Lstm { activation, .. }
            | ArchSpec::Ann { activation, .. } => Some(*activation),
            ArchSpec::Tcn { .. } => None,
        };
        if hidden_activation == Some(ActivationKind::Softmax) {
            return Err(Error::Config(
                "softmax is only legal as the output-layer activation".into(),
            ));
        }
        match &self.arch {
            ArchSpec::Mlp { hidden, .. } => {
                if hidden.0 == 0 || hidden.1 == 0 {
                    return Err(Error::Config("mlp hidden sizes must be at least 1".into()));
                }
            }
            ArchSpec::Lstm { layers, units, .. } => {
                if *layers == 0 || *units == 0 {
                    return Err(Error::Config(
                        "lstm layers and units must be at least 1".into(),
                    ));
                }
            }
            ArchSpec::Tcn {
                layers,
                filters,
                kernel_size,
                dropout,
            } => {
                if *layers == 0 || *filters == 0 || *kernel_size == 0 {
                    return Err(Error::Config(
                        "tcn layers, filters and kernel size must be at least 1".into(),
                    ));
                }
                if !(0.0..1.0).contains(dropout) {
                    return Err(Error::Config(format!(
                        "tcn dropout must be in [0,1), got {dropout}"
                    )));
                }
            }
            ArchSpec::Ann {
                layers, neurons, ..
            } => {
                if *layers != 3 {
                    return Err(Error::Config("ann is a 3-hidden-layer stack".into()));
                }
                if neurons.0 == 0 || neurons.1 == 0 || neurons.2 == 0 {
                    return Err(Error::Config("ann layer widths must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Hidden-layer widths for the feedforward variants.
    pub fn dense_hidden(&self) -> Option<Vec<usize>> {
        match &self.arch {
            ArchSpec::Mlp { hidden, .. } => Some(vec![hidden.0, hidden.1]),
            ArchSpec::Ann { neurons, .. } => Some(vec![neurons.0, neurons.1, neurons.2]),
            _ => None,
        }
    }

    /// Whether L2 regularization applies to this architecture.
    pub fn uses_l2(&self) -> bool {
        matches!(self.arch, ArchSpec::Mlp { .. } | ArchSpec::Ann { .. })
    }

    /// Learning rate carried by the spec itself, where the architecture
    /// defines one.
    pub fn spec_learning_rate(&self) -> Option<f64> {
        match &self.arch {
            ArchSpec::Lstm { learning_rate, .. } | ArchSpec::Ann { learning_rate, .. } => {
                Some(*learning_rate)
            }
            _ => None,
        }
    }
}

/// Learned parameters for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Dense(dense::DenseStack),
    Lstm(lstm::LstmNet),
    Tcn(tcn::TcnNet),
}

/// Named view of one parameter tensor, used for flattening, optimizer
/// bookkeeping and serialization. Bias vectors appear as 1-row matrices.
pub struct TensorRef<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

impl ModelParams {
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        match self {
            ModelParams::Dense(net) => net.tensors(),
            ModelParams::Lstm(net) => net.tensors(),
            ModelParams::Tcn(net) => net.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        match self {
            ModelParams::Dense(net) => net.tensors_mut(),
            ModelParams::Lstm(net) => net.tensors_mut(),
            ModelParams::Tcn(net) => net.tensors_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            out.extend_from_slice(t.data);
        }
        out
    }

    pub fn unflatten_from(&mut self, src: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if src.len() != expected {
            return Err(Error::Dimension(format!(
                "parameter vector length {} does not match model ({expected})",
                src.len()
            )));
        }
        let mut cursor = 0;
        for t in self.tensors_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&src[cursor..cursor + n]);
            cursor += n;
        }
        Ok(())
    }

    /// self += scale * other, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        let other_flat = other.flatten();
        let mut cursor = 0;
        if other_flat.len() != self.param_count() {
            return Err(Error::Dimension("gradient/parameter shape mismatch".into()));
        }
        for t in self.tensors_mut() {
            for (dst, src) in t.data.iter_mut().zip(&other_flat[cursor..]) {
                *dst += scale * src;
            }
            cursor += t.data.len();
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.data.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Same shapes, all values zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> ModelParams {
        let mut copy = self.clone();
        for t in copy.tensors_mut() {
            t.data.fill(0.0);
        }
        copy
    }
}

/// Forward-pass mode: training enables dropout (TCN blocks only) and draws
/// masks from the provided stream.
pub enum RunMode<'a> {
    Train { dropout_rng: &'a mut Rng },
    Eval,
}

/// Everything the matching backward pass needs, retained by forward.
#[derive(Debug, Clone)]
pub enum Trace {
    Dense(dense::DenseTrace),
    Lstm(lstm::LstmTrace),
    Tcn(tcn::TcnTrace),
}

/// Initializes parameters for `spec`: uniform in ±1/√fan_in, with the LSTM
/// forget-gate bias set to 1.
pub fn init_params(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelParams> {
    spec.validate()?;
    Ok(match &spec.arch {
        ArchSpec::Mlp { activation, .. } | ArchSpec::Ann { activation, .. } => {
            let hidden = spec.dense_hidden().unwrap();
            ModelParams::Dense(dense::DenseStack::new_classifier(
                spec.input_dim,
                &hidden,
                *activation,
                spec.classes,
                rng,
            ))
        }
        ArchSpec::Lstm { layers, units, .. } => {
            ModelParams::Lstm(lstm::LstmNet::new(1, *layers, *units, spec.classes, rng))
        }
        ArchSpec::Tcn {
            layers,
            filters,
            kernel_size,
            dropout,
        } => ModelParams::Tcn(tcn::TcnNet::new(
            1,
            *layers,
            *filters,
            *kernel_size,
            *dropout,
            spec.classes,
            rng,
        )),
    })
}

/// Zero-valued parameters with the shapes `spec` dictates; used when loading
/// serialized models.
pub fn zero_params(spec: &ModelSpec) -> Result<ModelParams> {
    let mut params = init_params(spec, &mut Rng::seed_from_u64(0))?;
    for t in params.tensors_mut() {
        t.data.fill(0.0);
    }
    Ok(params)
}

/// A trained model: spec, learned parameters and the normalizer fitted on
/// its training split.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub normalizer: NormalizerStats,
}

impl TrainedModel {
    /// Forward pass on an already-normalized feature vector. Sequence
    /// architectures read the features as a `input_dim`-step, 1-channel
    /// sequence in canonical feature order.
    pub fn forward(&self, features: &[f64], mode: RunMode) -> Result<(Vec<f64>, Trace)> {
        if features.len() != self.spec.input_dim {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.spec.input_dim,
                features.len()
            )));
        }
        match &self.params {
            ModelParams::Dense(net) => {
                let (probs, trace) = net.forward(features)?;
                Ok((probs, Trace::Dense(trace)))
            }
            ModelParams::Lstm(net) => {
                let seq = Matrix::from_vec(features.len(), 1, features.to_vec())?;
                let (probs, trace) = net.forward(&seq)?;
                Ok((probs, Trace::Lstm(trace)))
            }
            ModelParams::Tcn(net) => {
                let seq = Matrix::from_vec(features.len(), 1, features.to_vec())?;
                let (probs, trace) = net.forward(&seq, mode)?;
                Ok((probs, Trace::Tcn(trace)))
            }
        }
    }

    /// Inference on raw (unnormalized) features.
    pub fn predict_proba(&self, raw_features: &[f64]) -> Result<Vec<f64>> {
        let normalized = self.normalizer.apply_row(raw_features)?;
        let (probs, _) = self.forward(&normalized, RunMode::Eval)?;
        Ok(probs)
    }
}

/// Forward pass of a feedforward model (MLP or ANN) on a normalized feature
/// vector, returning class probabilities and the activation trace.
pub fn mlp_forward(model: &TrainedModel, features: &[f64]) -> Result<(Vec<f64>, Trace)> {
    match model.params {
        ModelParams::Dense(_) => model.forward(features, RunMode::Eval),
        _ => Err(Error::Consistency(
            "mlp_forward requires an MLP or ANN model".into(),
        )),
    }
}

/// Forward pass of an LSTM model over an explicit (T x channels) sequence.
pub fn lstm_forward(model: &TrainedModel, sequence: &Matrix) -> Result<(Vec<f64>, Trace)> {
    match &model.params {
        ModelParams::Lstm(net) => {
            let (probs, trace) = net.forward(sequence)?;
            Ok((probs, Trace::Lstm(trace)))
        }
        _ => Err(Error::Consistency(
            "lstm_forward requires an LSTM model".into(),
        )),
    }
}

/// Forward pass of a TCN model over an explicit (T x channels) sequence.
pub fn tcn_forward(
    model: &TrainedModel,
    sequence: &Matrix,
    mode: RunMode,
) -> Result<(Vec<f64>, Trace)> {
    match &model.params {
        ModelParams::Tcn(net) => {
            let (probs, trace) = net.forward(sequence, mode)?;
            Ok((probs, Trace::Tcn(trace)))
        }
        _ => Err(Error::Consistency(
            "tcn_forward requires a TCN model".into(),
        )),
    }
}

/// Backward pass: gradients of the loss with respect to every parameter,
/// given the forward trace and the loss gradient at the output layer's
/// pre-activation (softmax fused with cross-entropy).
///
/// The returned `ModelParams` has the same shapes as `params` and holds
/// gradient values.
pub fn model_backward(
    params: &ModelParams,
    trace: &Trace,
    output_grad: &[f64],
) -> Result<ModelParams> {
    match (params, trace) {
        (ModelParams::Dense(net), Trace::Dense(tr)) => {
            let (grads, _) = net.backward(tr, output_grad)?;
            Ok(ModelParams::Dense(grads))
        }
        (ModelParams::Lstm(net), Trace::Lstm(tr)) => {
            Ok(ModelParams::Lstm(net.backward(tr, output_grad)?))
        }
        (ModelParams::Tcn(net), Trace::Tcn(tr)) => {
            Ok(ModelParams::Tcn(net.backward(tr, output_grad)?))
        }
        _ => Err(Error::Consistency(
            "trace does not belong to this model architecture".into(),
        )),
    }
}
