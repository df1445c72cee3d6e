//! Fully connected layers and stacks. Both feedforward architectures are
//! stacks of these, and the sequence models reuse a one-layer stack as their
//! softmax head.

use crate::error::{Error, Result};
use crate::math::{self, ActivationKind, Matrix};
use crate::models::{TensorMut, TensorRef};
use crate::rng::Rng;

/// One dense layer: `out_dim x in_dim` weights, a bias per output and an
/// elementwise activation (softmax on the output layer).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: ActivationKind, rng: &mut Rng) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| rng.range_f64(-scale, scale))
            .collect();
        DenseLayer {
            weights: Matrix::from_vec(out_dim, in_dim, data).expect("sized above"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation z = Wx + b and post-activation a.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut pre = self.weights.mul_vec(x)?;
        for (z, b) in pre.iter_mut().zip(&self.bias) {
            *z += b;
        }
        let post = match self.activation {
            ActivationKind::Softmax => {
                let mut p = pre.clone();
                math::softmax_in_place(&mut p);
                p
            }
            kind => {
                let m = Matrix::from_vec(1, pre.len(), pre.clone())?;
                math::apply_activation(kind, &m).data().to_vec()
            }
        };
        Ok((pre, post))
    }
}

/// A stack of dense layers ending in the softmax classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStack {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub input: Vec<f64>,
    /// Pre-activation of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation of each layer; the last entry is the probability
    /// vector.
    pub post: Vec<Vec<f64>>,
}

impl DenseStack {
    /// Hidden stack plus a softmax head over `classes` outputs.
    pub fn new_classifier(
        input_dim: usize,
        hidden: &[usize],
        activation: ActivationKind,
        classes: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut in_dim = input_dim;
        for &width in hidden {
            layers.push(DenseLayer::new(in_dim, width, activation, rng));
            in_dim = width;
        }
        layers.push(DenseLayer::new(
            in_dim,
            classes,
            ActivationKind::Softmax,
            rng,
        ));
        DenseStack { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, DenseTrace)> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "dense stack expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let (z, a) = layer.forward(&current)?;
            current = a.clone();
            pre.push(z);
            post.push(a);
        }
        let trace = DenseTrace {
            input: x.to_vec(),
            pre,
            post,
        };
        Ok((current, trace))
    }

    /// Backward pass. `output_grad` is dL/dz of the final layer (softmax and
    /// cross-entropy fused). Returns gradients shaped like the stack and the
    /// gradient with respect to the stack input.
    pub fn backward(
        &self,
        trace: &DenseTrace,
        output_grad: &[f64],
    ) -> Result<(DenseStack, Vec<f64>)> {
        if trace.pre.len() != self.layers.len() || trace.post.len() != self.layers.len() {
            return Err(Error::Consistency(
                "dense trace layer count does not match the stack".into(),
            ));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Consistency(format!(
                "output gradient length {} does not match head width {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if trace.pre[l].len() != layer.out_dim() {
                return Err(Error::Consistency(format!(
                    "dense trace layer {l} width does not match the stack"
                )));
            }
        }
        if trace.input.len() != self.input_dim() {
            return Err(Error::Consistency(
                "dense trace input width mismatch".into(),
            ));
        }

        let mut grads = self.clone();
        for t in grads.tensors_mut() {
            t.data.fill(0.0);
        }

        let mut delta = output_grad.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            // Hidden layers receive dL/da and convert via the activation
            // derivative; the head's delta is already dL/dz.
            if l != self.layers.len() - 1 {
                let pre = Matrix::from_vec(1, trace.pre[l].len(), trace.pre[l].clone())?;
                let deriv = math::activation_derivative(layer.activation, &pre)?;
                for (d, dz) in delta.iter_mut().zip(deriv.data()) {
                    *d *= dz;
                }
            }
            let upstream: &[f64] = if l == 0 {
                &trace.input
            } else {
                &trace.post[l - 1]
            };
            {
                let glayer = &mut grads.layers[l];
                for (r, &d) in delta.iter().enumerate() {
                    glayer.bias[r] += d;
                    for (gw, &a) in glayer.weights.row_mut(r).iter_mut().zip(upstream) {
                        *gw += d * a;
                    }
                }
            }
            if l > 0 {
                let mut dprev = vec![0.0; layer.in_dim()];
                for (r, &d) in delta.iter().enumerate() {
                    for (dp, &w) in dprev.iter_mut().zip(layer.weights.row(r)) {
                        *dp += d * w;
                    }
                }
                delta = dprev;
            } else {
                let mut dinput = vec![0.0; layer.in_dim()];
                for (r, &d) in delta.iter().enumerate() {
                    for (dp, &w) in dinput.iter_mut().zip(layer.weights.row(r)) {
                        *dp += d * w;
                    }
                }
                return Ok((grads, dinput));
            }
        }
        unreachable!("stack has at least one layer");
    }

    pub(crate) fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(TensorRef {
                name: format!("dense{l}.weights"),
                rows: layer.weights.rows(),
                cols: layer.weights.cols(),
                data: layer.weights.data(),
            });
            out.push(TensorRef {
                name: format!("dense{l}.bias"),
                rows: 1,
                cols: layer.bias.len(),
                data: &layer.bias,
            });
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let rows = layer.weights.rows();
            let cols = layer.weights.cols();
            out.push(TensorMut {
                name: format!("dense{l}.weights"),
                rows,
                cols,
                data: layer.weights.data_mut(),
            });
            out.push(TensorMut {
                name: format!("dense{l}.bias"),
                rows: 1,
                cols: layer.bias.len(),
                data: &mut layer.bias,
            });
        }
        out
    }
}
