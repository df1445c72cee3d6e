//! LSTM cell, stacked recurrent network and backpropagation through time.
//!
//! Gate layout follows the usual formulation: each gate reads the
//! concatenation [h_{t-1}, x_t] (hidden state first), the forget/input/output
//! gates are sigmoids, the candidate is a tanh, and
//! c_t = f_t*c_{t-1} + i_t*c~_t, h_t = o_t*tanh(c_t).

use crate::error::{Error, Result};
use crate::math::{sigmoid, Matrix};
use crate::models::dense::{DenseStack, DenseTrace};
use crate::models::{TensorMut, TensorRef};
use crate::rng::Rng;

/// One recurrent cell. Every weight matrix is `hidden_dim x (hidden_dim +
/// input_dim)` and multiplies the concatenation [h_{t-1}, x_t].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCell {
    /// Uniform +-1/sqrt(H+D) init; the forget bias starts at 1 so early
    /// training retains cell state.
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let fan_in = hidden_dim + input_dim;
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut mat = || {
            let data = (0..hidden_dim * fan_in)
                .map(|_| rng.range_f64(-scale, scale))
                .collect();
            Matrix::from_vec(hidden_dim, fan_in, data).expect("sized above")
        };
        LstmCell {
            input_dim,
            hidden_dim,
            w_f: mat(),
            w_i: mat(),
            w_c: mat(),
            w_o: mat(),
            b_f: vec![1.0; hidden_dim],
            b_i: vec![0.0; hidden_dim],
            b_c: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
        }
    }

    pub fn zeroed(input_dim: usize, hidden_dim: usize) -> Self {
        let mut cell = LstmCell::new(input_dim, hidden_dim, &mut Rng::seed_from_u64(0));
        for m in [&mut cell.w_f, &mut cell.w_i, &mut cell.w_c, &mut cell.w_o] {
            m.data_mut().fill(0.0);
        }
        for b in [&mut cell.b_f, &mut cell.b_i, &mut cell.b_c, &mut cell.b_o] {
            b.fill(0.0);
        }
        cell
    }
}

/// Gate values and state retained from one step for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepTrace {
    /// [h_{t-1}, x_t]
    pub concat: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
}

/// One LSTM step. Returns (h_t, c_t) and the gate trace.
pub fn lstm_step(
    cell: &LstmCell,
    h_prev: &[f64],
    c_prev: &[f64],
    x_t: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, LstmStepTrace)> {
    let h = cell.hidden_dim;
    if h_prev.len() != h || c_prev.len() != h || x_t.len() != cell.input_dim {
        return Err(Error::Dimension(format!(
            "lstm_step: cell is H={h}, D={}; got h_prev={}, c_prev={}, x_t={}",
            cell.input_dim,
            h_prev.len(),
            c_prev.len(),
            x_t.len()
        )));
    }
    let mut concat = Vec::with_capacity(h + cell.input_dim);
    concat.extend_from_slice(h_prev);
    concat.extend_from_slice(x_t);

    let gate = |w: &Matrix, b: &[f64]| -> Vec<f64> {
        let mut z = w.mul_vec(&concat).expect("dims checked");
        for (v, b) in z.iter_mut().zip(b) {
            *v += b;
        }
        z
    };
    let forget: Vec<f64> = gate(&cell.w_f, &cell.b_f)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let input: Vec<f64> = gate(&cell.w_i, &cell.b_i)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let candidate: Vec<f64> = gate(&cell.w_c, &cell.b_c)
        .iter()
        .map(|&z| z.tanh())
        .collect();
    let output: Vec<f64> = gate(&cell.w_o, &cell.b_o)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();

    let mut cell_state = vec![0.0; h];
    for j in 0..h {
        cell_state[j] = forget[j] * c_prev[j] + input[j] * candidate[j];
    }
    let tanh_cell: Vec<f64> = cell_state.iter().map(|&c| c.tanh()).collect();
    let h_t: Vec<f64> = output.iter().zip(&tanh_cell).map(|(o, t)| o * t).collect();

    let trace = LstmStepTrace {
        concat,
        c_prev: c_prev.to_vec(),
        forget,
        input,
        candidate,
        output,
        cell: cell_state.clone(),
        tanh_cell,
    };
    Ok((h_t, cell_state, trace))
}

/// Stacked LSTM: each layer consumes the hidden sequence of the layer below,
/// and the final hidden state of the top layer feeds the softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub cells: Vec<LstmCell>,
    pub head: DenseStack,
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// steps[layer][t]
    pub steps: Vec<Vec<LstmStepTrace>>,
    pub head: DenseTrace,
}

impl LstmNet {
    pub fn new(
        input_channels: usize,
        layers: usize,
        units: usize,
        classes: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut cells = Vec::with_capacity(layers);
        let mut in_dim = input_channels;
        for _ in 0..layers {
            cells.push(LstmCell::new(in_dim, units, rng));
            in_dim = units;
        }
        let head = DenseStack::new_classifier(
            units,
            &[],
            crate::math::ActivationKind::Linear,
            classes,
            rng,
        );
        LstmNet { cells, head }
    }

    /// Forward over a (T x channels) sequence with h_0 = c_0 = 0.
    pub fn forward(&self, sequence: &Matrix) -> Result<(Vec<f64>, LstmTrace)> {
        if sequence.rows() == 0 {
            return Err(Error::EmptyInput(
                "lstm forward on an empty sequence".into(),
            ));
        }
        if sequence.cols() != self.cells[0].input_dim {
            return Err(Error::Dimension(format!(
                "sequence has {} channels, first cell expects {}",
                sequence.cols(),
                self.cells[0].input_dim
            )));
        }
        let t_len = sequence.rows();
        let mut steps = Vec::with_capacity(self.cells.len());
        let mut layer_input: Vec<Vec<f64>> = (0..t_len).map(|t| sequence.row(t).to_vec()).collect();
        for cell in &self.cells {
            let mut h = vec![0.0; cell.hidden_dim];
            let mut c = vec![0.0; cell.hidden_dim];
            let mut traces = Vec::with_capacity(t_len);
            let mut hidden_seq = Vec::with_capacity(t_len);
            for x_t in &layer_input {
                let (h_t, c_t, trace) = lstm_step(cell, &h, &c, x_t)?;
                h = h_t;
                c = c_t;
                hidden_seq.push(h.clone());
                traces.push(trace);
            }
            steps.push(traces);
            layer_input = hidden_seq;
        }
        let final_hidden = layer_input.last().expect("non-empty sequence");
        let (probs, head_trace) = self.head.forward(final_hidden)?;
        Ok((
            probs,
            LstmTrace {
                steps,
                head: head_trace,
            },
        ))
    }

    /// Backpropagation through time. `output_grad` is dL/dz at the head
    /// (softmax fused with cross-entropy).
    pub fn backward(&self, trace: &LstmTrace, output_grad: &[f64]) -> Result<LstmNet> {
        if trace.steps.len() != self.cells.len() {
            return Err(Error::Consistency("lstm trace layer count mismatch".into()));
        }
        let t_len = trace.steps[0].len();
        if t_len == 0 {
            return Err(Error::Consistency("lstm trace has no steps".into()));
        }
        for (cell, layer_steps) in self.cells.iter().zip(&trace.steps) {
            if layer_steps.len() != t_len {
                return Err(Error::Consistency("lstm trace ragged step counts".into()));
            }
            if layer_steps[0].concat.len() != cell.hidden_dim + cell.input_dim {
                return Err(Error::Consistency("lstm trace width mismatch".into()));
            }
        }

        let mut grads = self.clone();
        for t in grads.tensors_mut() {
            t.data.fill(0.0);
        }

        let (head_grads, dh_final) = self.head.backward(&trace.head, output_grad)?;
        grads.head = head_grads;

        // dL/dh_t per step for the layer currently being processed; the top
        // layer only receives gradient at the final step.
        let top = self.cells.len() - 1;
        let mut dh_seq: Vec<Vec<f64>> = (0..t_len)
            .map(|t| {
                if t == t_len - 1 {
                    dh_final.clone()
                } else {
                    vec![0.0; self.cells[top].hidden_dim]
                }
            })
            .collect();

        for layer in (0..self.cells.len()).rev() {
            let cell = &self.cells[layer];
            let h = cell.hidden_dim;
            let d = cell.input_dim;
            let mut dx_seq: Vec<Vec<f64>> = (0..t_len).map(|_| vec![0.0; d]).collect();
            let mut dh_carry = vec![0.0; h];
            let mut dc_carry = vec![0.0; h];

            for t in (0..t_len).rev() {
                let st = &trace.steps[layer][t];
                let mut da_f = vec![0.0; h];
                let mut da_i = vec![0.0; h];
                let mut da_c = vec![0.0; h];
                let mut da_o = vec![0.0; h];
                let mut dc_next = vec![0.0; h];
                for j in 0..h {
                    let dh = dh_seq[t][j] + dh_carry[j];
                    let o = st.output[j];
                    let tc = st.tanh_cell[j];
                    let f = st.forget[j];
                    let i = st.input[j];
                    let cand = st.candidate[j];
                    let d_o = dh * tc;
                    da_o[j] = d_o * o * (1.0 - o);
                    let dc = dh * o * (1.0 - tc * tc) + dc_carry[j];
                    da_f[j] = dc * st.c_prev[j] * f * (1.0 - f);
                    da_i[j] = dc * cand * i * (1.0 - i);
                    da_c[j] = dc * i * (1.0 - cand * cand);
                    dc_next[j] = dc * f;
                }
                let glayer = &mut grads.cells[layer];
                let mut dconcat = vec![0.0; h + d];
                for (w, gw, gb, da) in [
                    (&cell.w_f, &mut glayer.w_f, &mut glayer.b_f, &da_f),
                    (&cell.w_i, &mut glayer.w_i, &mut glayer.b_i, &da_i),
                    (&cell.w_c, &mut glayer.w_c, &mut glayer.b_c, &da_c),
                    (&cell.w_o, &mut glayer.w_o, &mut glayer.b_o, &da_o),
                ] {
                    for (r, &da_r) in da.iter().enumerate() {
                        gb[r] += da_r;
                        for (g, &a) in gw.row_mut(r).iter_mut().zip(&st.concat) {
                            *g += da_r * a;
                        }
                        for (dcn, &w_rj) in dconcat.iter_mut().zip(w.row(r)) {
                            *dcn += da_r * w_rj;
                        }
                    }
                }
                dh_carry.copy_from_slice(&dconcat[..h]);
                dx_seq[t].copy_from_slice(&dconcat[h..]);
                dc_carry = dc_next;
            }
            dh_seq = dx_seq;
        }
        Ok(grads)
    }

    pub(crate) fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (l, cell) in self.cells.iter().enumerate() {
            for (suffix, m) in [
                ("w_f", &cell.w_f),
                ("w_i", &cell.w_i),
                ("w_c", &cell.w_c),
                ("w_o", &cell.w_o),
            ] {
                out.push(TensorRef {
                    name: format!("lstm{l}.{suffix}"),
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.data(),
                });
            }
            for (suffix, b) in [
                ("b_f", &cell.b_f),
                ("b_i", &cell.b_i),
                ("b_c", &cell.b_c),
                ("b_o", &cell.b_o),
            ] {
                out.push(TensorRef {
                    name: format!("lstm{l}.{suffix}"),
                    rows: 1,
                    cols: b.len(),
                    data: b,
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
        for (l, cell) in self.cells.iter_mut().enumerate() {
            for (suffix, m) in [
                ("w_f", &mut cell.w_f),
                ("w_i", &mut cell.w_i),
                ("w_c", &mut cell.w_c),
                ("w_o", &mut cell.w_o),
            ] {
                let rows = m.rows();
                let cols = m.cols();
                out.push(TensorMut {
                    name: format!("lstm{l}.{suffix}"),
                    rows,
                    cols,
                    data: m.data_mut(),
                });
            }
            for (suffix, b) in [
                ("b_f", &mut cell.b_f),
                ("b_i", &mut cell.b_i),
                ("b_c", &mut cell.b_c),
                ("b_o", &mut cell.b_o),
            ] {
                let cols = b.len();
                out.push(TensorMut {
                    name: format!("lstm{l}.{suffix}"),
                    rows: 1,
                    cols,
                    data: b,
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
