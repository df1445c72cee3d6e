//! Temporal convolutional network: dilated causal convolutions, residual
//! blocks with an optional learned 1x1 projection, temporal pooling and a
//! softmax head.
//!
//! A block applies one dilated causal convolution, ReLU, dropout (training
//! only, inverted scaling), then adds the block input back, projecting it
//! with the 1x1 kernel when channel counts differ. Dilations double per
//! block (1, 2, 4, ...), so three blocks with kernel 3 see 15 steps of
//! history, enough to cover the 12-step feature sequence.

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::models::dense::{DenseStack, DenseTrace};
use crate::models::{RunMode, TensorMut, TensorRef};
use crate::rng::Rng;

/// One dilated causal convolution layer with `filters` output channels.
///
/// `kernels` is `filters x (kernel_size * in_channels)`; within a row, tap j
/// occupies the contiguous block `[j*C .. (j+1)*C]`, oldest tap first.
#[derive(Debug, Clone, PartialEq)]
pub struct TcnLayer {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub dropout_rate: f64,
    pub kernels: Matrix,
    pub biases: Vec<f64>,
    /// 1x1 kernel (`filters x in_channels`) mapping the residual input when
    /// channel counts differ.
    pub projection: Option<Matrix>,
}

impl TcnLayer {
    pub fn new(
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        dilation: usize,
        dropout_rate: f64,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_channels * kernel_size;
        let scale = 1.0 / (fan_in as f64).sqrt();
        let kernels = Matrix::from_vec(
            filters,
            kernel_size * in_channels,
            (0..filters * kernel_size * in_channels)
                .map(|_| rng.range_f64(-scale, scale))
                .collect(),
        )
        .expect("sized above");
        let projection = if in_channels != filters {
            let pscale = 1.0 / (in_channels as f64).sqrt();
            Some(
                Matrix::from_vec(
                    filters,
                    in_channels,
                    (0..filters * in_channels)
                        .map(|_| rng.range_f64(-pscale, pscale))
                        .collect(),
                )
                .expect("sized above"),
            )
        } else {
            None
        };
        TcnLayer {
            in_channels,
            filters,
            kernel_size,
            dilation,
            dropout_rate,
            kernels,
            biases: vec![0.0; filters],
            projection,
        }
    }

    /// Flat column index of kernel element (channel c, tap j).
    pub fn kernel_index(&self, c: usize, j: usize) -> usize {
        j * self.in_channels + c
    }

    pub fn set_kernel(&mut self, f: usize, c: usize, j: usize, v: f64) {
        let idx = self.kernel_index(c, j);
        self.kernels.row_mut(f)[idx] = v;
    }
}

/// Causal convolution of a (T x C) input: the output at time t reads inputs
/// at t, t-d, ..., t-(k-1)d, with implicit zero padding of length (k-1)*d on
/// the left, so the output keeps length T.
pub fn dilated_causal_conv(layer: &TcnLayer, input: &Matrix) -> Result<Matrix> {
    if input.cols() != layer.in_channels {
        return Err(Error::Dimension(format!(
            "conv expects {} channels, got {}",
            layer.in_channels,
            input.cols()
        )));
    }
    let t_len = input.rows();
    let k = layer.kernel_size;
    let d = layer.dilation;
    let c_in = layer.in_channels;
    let mut out = Matrix::zeros(t_len, layer.filters);
    for t in 0..t_len {
        let orow = out.row_mut(t);
        orow.copy_from_slice(&layer.biases);
        for j in 0..k {
            // Tap j reads (k-1-j)*d steps into the past.
            let offset = (k - 1 - j) * d;
            if offset > t {
                continue;
            }
            let xrow = input.row(t - offset);
            for (f, o) in orow.iter_mut().enumerate() {
                let taps = &layer.kernels.row(f)[j * c_in..(j + 1) * c_in];
                *o += crate::math::dot(taps, xrow);
            }
        }
    }
    Ok(out)
}

/// Residual combination y = x + z, with x passed through the 1x1 projection
/// when its channel count differs from z.
pub fn residual_add(x: &Matrix, z: &Matrix, projection: Option<&Matrix>) -> Result<Matrix> {
    if x.rows() != z.rows() {
        return Err(Error::Dimension(format!(
            "residual_add: {} vs {} time steps",
            x.rows(),
            z.rows()
        )));
    }
    match projection {
        None => {
            if x.cols() != z.cols() {
                return Err(Error::Dimension(format!(
                    "residual_add: {} vs {} channels with no projection",
                    x.cols(),
                    z.cols()
                )));
            }
            let mut y = z.clone();
            for (o, v) in y.data_mut().iter_mut().zip(x.data()) {
                *o += v;
            }
            Ok(y)
        }
        Some(p) => {
            if p.cols() != x.cols() || p.rows() != z.cols() {
                return Err(Error::Dimension(format!(
                    "projection {}x{} cannot map {} channels onto {}",
                    p.rows(),
                    p.cols(),
                    x.cols(),
                    z.cols()
                )));
            }
            let mut y = z.clone();
            for t in 0..x.rows() {
                let xrow = x.row(t);
                for (f, o) in y.row_mut(t).iter_mut().enumerate() {
                    *o += crate::math::dot(p.row(f), xrow);
                }
            }
            Ok(y)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Avg,
}

/// Per-channel pooling over the time axis.
pub fn temporal_pool(seq: &Matrix, mode: PoolMode) -> Result<Vec<f64>> {
    if seq.rows() == 0 {
        return Err(Error::EmptyInput(
            "temporal_pool on an empty sequence".into(),
        ));
    }
    let mut out = seq.row(0).to_vec();
    for t in 1..seq.rows() {
        for (o, &v) in out.iter_mut().zip(seq.row(t)) {
            match mode {
                PoolMode::Max => {
                    if v > *o {
                        *o = v;
                    }
                }
                PoolMode::Avg => *o += v,
            }
        }
    }
    if mode == PoolMode::Avg {
        let inv = 1.0 / seq.rows() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
    }
    Ok(out)
}

/// The full network: residual blocks, average temporal pooling, softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct TcnNet {
    pub blocks: Vec<TcnLayer>,
    pub head: DenseStack,
}

#[derive(Debug, Clone)]
pub struct TcnBlockTrace {
    pub input: Matrix,
    /// Convolution output before ReLU.
    pub conv_pre: Matrix,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)); None in eval mode or
    /// when the rate is 0.
    pub dropout_mask: Option<Matrix>,
    pub output: Matrix,
}

#[derive(Debug, Clone)]
pub struct TcnTrace {
    pub blocks: Vec<TcnBlockTrace>,
    pub pooled: Vec<f64>,
    pub head: DenseTrace,
}

impl TcnNet {
    /// `layers` blocks with doubling dilations 1, 2, 4, ...
    pub fn new(
        input_channels: usize,
        layers: usize,
        filters: usize,
        kernel_size: usize,
        dropout_rate: f64,
        classes: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut blocks = Vec::with_capacity(layers);
        let mut c_in = input_channels;
        for l in 0..layers {
            let dilation = 1usize << l;
            blocks.push(TcnLayer::new(
                c_in,
                filters,
                kernel_size,
                dilation,
                dropout_rate,
                rng,
            ));
            c_in = filters;
        }
        let head = DenseStack::new_classifier(
            filters,
            &[],
            crate::math::ActivationKind::Linear,
            classes,
            rng,
        );
        TcnNet { blocks, head }
    }

    /// Receptive field of the block stack: 1 + (k-1) * sum of dilations.
    pub fn receptive_field(&self) -> usize {
        1 + self
            .blocks
            .iter()
            .map(|b| (b.kernel_size - 1) * b.dilation)
            .sum::<usize>()
    }

    pub fn forward(&self, sequence: &Matrix, mode: RunMode) -> Result<(Vec<f64>, TcnTrace)> {
        if sequence.rows() == 0 {
            return Err(Error::EmptyInput("tcn forward on an empty sequence".into()));
        }
        let mut dropout_rng = match mode {
            RunMode::Train { dropout_rng } => Some(dropout_rng),
            RunMode::Eval => None,
        };
        let mut block_traces = Vec::with_capacity(self.blocks.len());
        let mut current = sequence.clone();
        for block in &self.blocks {
            let conv_pre = dilated_causal_conv(block, &current)?;
            let mut branch = conv_pre.map(|v| if v > 0.0 { v } else { 0.0 });
            let mask = match (&mut dropout_rng, block.dropout_rate > 0.0) {
                (Some(rng), true) => {
                    let keep_scale = 1.0 / (1.0 - block.dropout_rate);
                    let mut mask = Matrix::zeros(branch.rows(), branch.cols());
                    for (m, v) in mask.data_mut().iter_mut().zip(branch.data_mut()) {
                        if rng.next_f64() < block.dropout_rate {
                            *m = 0.0;
                            *v = 0.0;
                        } else {
                            *m = keep_scale;
                            *v *= keep_scale;
                        }
                    }
                    Some(mask)
                }
                _ => None,
            };
            let output = residual_add(&current, &branch, block.projection.as_ref())?;
            block_traces.push(TcnBlockTrace {
                input: current,
                conv_pre,
                dropout_mask: mask,
                output: output.clone(),
            });
            current = output;
        }
        let pooled = temporal_pool(&current, PoolMode::Avg)?;
        let (probs, head_trace) = self.head.forward(&pooled)?;
        Ok((
            probs,
            TcnTrace {
                blocks: block_traces,
                pooled,
                head: head_trace,
            },
        ))
    }

    /// Backward through head, pooling, residual paths and convolutions.
    pub fn backward(&self, trace: &TcnTrace, output_grad: &[f64]) -> Result<TcnNet> {
        if trace.blocks.len() != self.blocks.len() {
            return Err(Error::Consistency("tcn trace block count mismatch".into()));
        }
        for (block, tr) in self.blocks.iter().zip(&trace.blocks) {
            if tr.input.cols() != block.in_channels || tr.conv_pre.cols() != block.filters {
                return Err(Error::Consistency("tcn trace channel mismatch".into()));
            }
        }
        let mut grads = self.clone();
        for t in grads.tensors_mut() {
            t.data.fill(0.0);
        }

        let (head_grads, dpooled) = self.head.backward(&trace.head, output_grad)?;
        grads.head = head_grads;

        let t_len = trace.blocks[0].input.rows();
        // Average pooling spreads the gradient uniformly over time.
        let mut dy = Matrix::zeros(t_len, self.blocks.last().expect("non-empty").filters);
        let inv_t = 1.0 / t_len as f64;
        for t in 0..t_len {
            for (o, &g) in dy.row_mut(t).iter_mut().zip(&dpooled) {
                *o = g * inv_t;
            }
        }

        for (b_idx, block) in self.blocks.iter().enumerate().rev() {
            let tr = &trace.blocks[b_idx];
            let gblock = &mut grads.blocks[b_idx];
            let k = block.kernel_size;
            let d = block.dilation;
            let c_in = block.in_channels;

            // Skip path: y = proj(x) + branch, so dL/dbranch = dy and the
            // skip contributes to dx (and to the projection gradient).
            let mut dx = Matrix::zeros(t_len, c_in);
            match (&block.projection, &mut gblock.projection) {
                (Some(p), Some(gp)) => {
                    for t in 0..t_len {
                        let dyrow = dy.row(t);
                        let xrow = tr.input.row(t);
                        for (f, &g) in dyrow.iter().enumerate() {
                            for (gpv, &xv) in gp.row_mut(f).iter_mut().zip(xrow) {
                                *gpv += g * xv;
                            }
                        }
                        let dxrow = dx.row_mut(t);
                        for (f, &g) in dyrow.iter().enumerate() {
                            for (dxv, &pv) in dxrow.iter_mut().zip(p.row(f)) {
                                *dxv += g * pv;
                            }
                        }
                    }
                }
                (None, None) => {
                    for (dxv, &g) in dx.data_mut().iter_mut().zip(dy.data()) {
                        *dxv += g;
                    }
                }
                _ => return Err(Error::Consistency("projection/gradient mismatch".into())),
            }

            // Branch path: dropout mask, then ReLU, then the convolution.
            let mut dz = dy.clone();
            if let Some(mask) = &tr.dropout_mask {
                for (g, &m) in dz.data_mut().iter_mut().zip(mask.data()) {
                    *g *= m;
                }
            }
            for (g, &pre) in dz.data_mut().iter_mut().zip(tr.conv_pre.data()) {
                if pre <= 0.0 {
                    *g = 0.0;
                }
            }

            for t in 0..t_len {
                let dzrow = dz.row(t);
                for (f, &g) in dzrow.iter().enumerate() {
                    gblock.biases[f] += g;
                }
                for j in 0..k {
                    let offset = (k - 1 - j) * d;
                    if offset > t {
                        continue;
                    }
                    let s = t - offset;
                    let xrow = tr.input.row(s);
                    for (f, &g) in dzrow.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let gk = &mut gblock.kernels.row_mut(f)[j * c_in..(j + 1) * c_in];
                        for (gkv, &xv) in gk.iter_mut().zip(xrow) {
                            *gkv += g * xv;
                        }
                        let kern = &block.kernels.row(f)[j * c_in..(j + 1) * c_in];
                        let dxrow = dx.row_mut(s);
                        for (dxv, &kv) in dxrow.iter_mut().zip(kern) {
                            *dxv += g * kv;
                        }
                    }
                }
            }
            dy = dx;
        }
        Ok(grads)
    }

    pub(crate) fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (l, block) in self.blocks.iter().enumerate() {
            out.push(TensorRef {
                name: format!("tcn{l}.kernels"),
                rows: block.kernels.rows(),
                cols: block.kernels.cols(),
                data: block.kernels.data(),
            });
            out.push(TensorRef {
                name: format!("tcn{l}.biases"),
                rows: 1,
                cols: block.biases.len(),
                data: &block.biases,
            });
            if let Some(p) = &block.projection {
                out.push(TensorRef {
                    name: format!("tcn{l}.projection"),
                    rows: p.rows(),
                    cols: p.cols(),
                    data: p.data(),
                });
            }
        }
        let mut head = self.head.tensors();
        for t in &mut head {
            t.name = format!("head.{}", t.name);
        }
        out.extend(head);
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (l, block) in self.blocks.iter_mut().enumerate() {
            let rows = block.kernels.rows();
            let cols = block.kernels.cols();
            out.push(TensorMut {
                name: format!("tcn{l}.kernels"),
                rows,
                cols,
                data: block.kernels.data_mut(),
            });
            let blen = block.biases.len();
            out.push(TensorMut {
                name: format!("tcn{l}.biases"),
                rows: 1,
                cols: blen,
                data: &mut block.biases,
            });
            if let Some(p) = &mut block.projection {
                let (pr, pc) = (p.rows(), p.cols());
                out.push(TensorMut {
                    name: format!("tcn{l}.projection"),
                    rows: pr,
                    cols: pc,
                    data: p.data_mut(),
                });
            }
        }
        let mut head = self.head.tensors_mut();
        for t in &mut head {
            t.name = format!("head.{}", t.name);
        }
        out.extend(head);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_layer(c_in: usize, filters: usize, k: usize, d: usize) -> TcnLayer {
        let mut layer = TcnLayer::new(c_in, filters, k, d, 0.0, &mut Rng::seed_from_u64(0));
        layer.kernels.data_mut().fill(0.0);
        layer.biases.fill(0.0);
        if let Some(p) = &mut layer.projection {
            p.data_mut().fill(0.0);
        }
        layer
    }

    #[test]
    fn kernel_size_one_identity() {
        let mut layer = plain_layer(1, 1, 1, 1);
        layer.set_kernel(0, 0, 0, 1.0);
        let input = Matrix::from_vec(4, 1, vec![3.0, -1.0, 2.0, 0.5]).unwrap();
        let out = dilated_causal_conv(&layer, &input).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn moving_sum_with_unit_taps() {
        let mut layer = plain_layer(1, 1, 2, 1);
        layer.set_kernel(0, 0, 0, 1.0);
        layer.set_kernel(0, 0, 1, 1.0);
        let input = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let out = dilated_causal_conv(&layer, &input).unwrap();
        assert_eq!(out.data(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn dilation_two_skips_one_step() {
        let mut layer = plain_layer(1, 1, 2, 2);
        layer.set_kernel(0, 0, 0, 1.0);
        layer.set_kernel(0, 0, 1, 1.0);
        let input = Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = dilated_causal_conv(&layer, &input).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let layer = plain_layer(2, 1, 2, 1);
        let input = Matrix::zeros(3, 1);
        assert!(matches!(
            dilated_causal_conv(&layer, &input),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn residual_add_examples() {
        let x = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let zero = Matrix::zeros(2, 2);
        assert_eq!(residual_add(&x, &zero, None).unwrap(), x);
        assert_eq!(residual_add(&zero, &x, None).unwrap(), x);

        let x1 = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        let z2 = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let proj = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let y = residual_add(&x1, &z2, Some(&proj)).unwrap();
        assert_eq!(y.data(), &[4.0, 5.0]);

        assert!(matches!(
            residual_add(&x1, &z2, None),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn pooling_examples() {
        let seq = Matrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
        assert_eq!(temporal_pool(&seq, PoolMode::Avg).unwrap(), vec![2.0]);
        assert_eq!(temporal_pool(&seq, PoolMode::Max).unwrap(), vec![3.0]);
        let single = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(
            temporal_pool(&single, PoolMode::Avg).unwrap(),
            vec![0.5, -1.0, 2.0]
        );
    }

    #[test]
    fn zero_net_is_uniform() {
        let mut net = TcnNet::new(1, 3, 4, 3, 0.0, 5, &mut Rng::seed_from_u64(0));
        for t in net.tensors_mut() {
            t.data.fill(0.0);
        }
        let seq = Matrix::from_vec(6, 1, vec![1.0, -2.0, 0.0, 3.0, 0.5, -0.5]).unwrap();
        let (probs, _) = net.forward(&seq, RunMode::Eval).unwrap();
        for p in probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn output_length_matches_input_length() {
        let mut rng = Rng::seed_from_u64(3);
        let net = TcnNet::new(1, 3, 4, 3, 0.0, 5, &mut rng);
        for t_len in [1usize, 2, 7, 12, 31] {
            let seq =
                Matrix::from_vec(t_len, 1, (0..t_len).map(|i| i as f64 * 0.1).collect()).unwrap();
            let (_, trace) = net.forward(&seq, RunMode::Eval).unwrap();
            for block in &trace.blocks {
                assert_eq!(block.output.rows(), t_len);
            }
        }
    }

    #[test]
    fn receptive_field_matches_impulse_tracing() {
        // Independent oracle: feed an impulse at every position of a long
        // zero sequence and observe which outputs at the last block change.
        // All weights are made positive so ReLU gates pass every path and
        // the trace measures pure connectivity.
        let mut rng = Rng::seed_from_u64(4);
        let mut net = TcnNet::new(1, 3, 2, 3, 0.0, 5, &mut rng);
        for t in net.tensors_mut() {
            for v in t.data.iter_mut() {
                *v = v.abs() + 0.01;
            }
        }
        let t_len = 40;
        let zeros = Matrix::zeros(t_len, 1);
        let (_, base) = net.forward(&zeros, RunMode::Eval).unwrap();
        let base_out = &base.blocks.last().unwrap().output;
        let last_t = t_len - 1;
        let mut span = 0;
        for pos in 0..t_len {
            let mut seq = Matrix::zeros(t_len, 1);
            seq.set(pos, 0, 1.0);
            let (_, tr) = net.forward(&seq, RunMode::Eval).unwrap();
            let changed = tr.blocks.last().unwrap().output.row(last_t) != base_out.row(last_t);
            if changed {
                span = span.max(last_t - pos + 1);
            }
        }
        assert_eq!(span, net.receptive_field());
        // Three blocks, kernel 3, dilations 1+2+4 reach 15 steps.
        let default_net = TcnNet::new(1, 3, 1, 3, 0.0, 5, &mut rng);
        assert_eq!(default_net.receptive_field(), 15);
    }

    #[test]
    fn causality_perturbation() {
        let mut rng = Rng::seed_from_u64(5);
        let net = TcnNet::new(1, 3, 4, 3, 0.0, 5, &mut rng);
        let t_len = 12;
        let base_vals: Vec<f64> = (0..t_len).map(|_| rng.range_f64(-1.0, 1.0)).collect();
        let base = Matrix::from_vec(t_len, 1, base_vals.clone()).unwrap();
        let (_, base_trace) = net.forward(&base, RunMode::Eval).unwrap();
        for perturb_at in [0usize, 3, 6, 11] {
            let mut vals = base_vals.clone();
            vals[perturb_at] += 0.5;
            let seq = Matrix::from_vec(t_len, 1, vals).unwrap();
            let (_, trace) = net.forward(&seq, RunMode::Eval).unwrap();
            for (b, (tb, tp)) in base_trace.blocks.iter().zip(&trace.blocks).enumerate() {
                for t in 0..perturb_at {
                    assert_eq!(
                        tb.output.row(t),
                        tp.output.row(t),
                        "block {b} changed at time {t} < {perturb_at}"
                    );
                }
            }
        }
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let mut rng = Rng::seed_from_u64(6);
        let net = TcnNet::new(1, 1, 2, 2, 0.0, 5, &mut rng);
        assert!(matches!(
            net.forward(&Matrix::zeros(0, 1), RunMode::Eval),
            Err(Error::EmptyInput(_))
        ));
    }
}
