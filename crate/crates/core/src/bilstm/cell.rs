use crate::error::{Error, Result};
use crate::rng::StageRng;
use crate::tensor::{axpy, dot, sigmoid, Matrix};

use super::matrix_xavier;

/// Gate blocks in the stacked `4H` layout, in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    fn block(self) -> usize {
        self as usize
    }
}

/// One direction: `w` is `4H × D`, `u` is `4H × H`, `b` has `4H` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirectionParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl LstmDirectionParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmDirectionParams {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    /// Row range of one gate inside the stacked tensors.
    pub fn gate_rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden();
        gate.block() * h..(gate.block() + 1) * h
    }

    /// Xavier-uniform per gate block, biases zero except the forget gate (1.0).
    pub(crate) fn init_xavier(&mut self, rng: &mut StageRng) {
        let (h, d) = (self.hidden(), self.input());
        matrix_xavier(rng, &mut self.w, d, h);
        matrix_xavier(rng, &mut self.u, h, h);
        self.b.iter_mut().for_each(|v| *v = 0.0);
        let forget = self.gate_rows(Gate::Forget);
        self.b[forget].iter_mut().for_each(|v| *v = 1.0);
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), self.u.as_slice(), &self.b]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), self.u.as_mut_slice(), &mut self.b]
    }
}

/// Activated gates (`i, f, o, g` stacked), cell state and hidden state after
/// one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Inputs and intermediates of a single cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub state: StepState,
}

/// `b + W x_t` for every row; columns below `shared_prefix` are identical in
/// all rows, so their contribution is computed once.
fn project_inputs(params: &LstmDirectionParams, rows: &[&[f64]], shared_prefix: usize) -> Vec<f64> {
    let g = params.b.len();
    let mut zx = vec![0.0; rows.len() * g];
    for r in 0..g {
        let w = params.w.row(r);
        let base = params.b[r] + dot(&w[..shared_prefix], &rows[0][..shared_prefix]);
        for (t, x) in rows.iter().enumerate() {
            zx[t * g + r] = base + dot(&w[shared_prefix..], &x[shared_prefix..]);
        }
    }
    zx
}

/// One step given the input projection `zx = b + W x`.
fn step(params: &LstmDirectionParams, zx: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepState {
    let h = params.hidden();
    let mut z = zx.to_vec();
    params.u.matvec_acc(h_prev, &mut z);
    for v in &mut z[..3 * h] {
        *v = sigmoid(*v);
    }
    for v in &mut z[3 * h..] {
        *v = v.tanh();
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut out = vec![0.0; h];
    for k in 0..h {
        let (i, f, o, g) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = c[k].tanh();
        out[k] = o * tanh_c[k];
    }
    StepState {
        gates: z,
        c,
        tanh_c,
        h: out,
    }
}

/// Gradient at the gate pre-activations of one step. Replaces `dc` with the
/// gradient flowing to `c_prev`; `dh` is read only.
fn step_backward(c_prev: &[f64], state: &StepState, dh: &[f64], dc: &mut [f64], dz: &mut [f64]) {
    let h = dh.len();
    let z = &state.gates;
    for k in 0..h {
        let (i, f, o, g) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
        let tc = state.tanh_c[k];
        let d_o = dh[k] * tc;
        dc[k] += dh[k] * o * (1.0 - tc * tc);
        let d_i = dc[k] * g;
        let d_g = dc[k] * i;
        let d_f = dc[k] * c_prev[k];
        dz[k] = d_i * i * (1.0 - i);
        dz[h + k] = d_f * f * (1.0 - f);
        dz[2 * h + k] = d_o * o * (1.0 - o);
        dz[3 * h + k] = d_g * (1.0 - g * g);
        dc[k] *= f;
    }
}

/// One LSTM step from explicit previous state; returns `(h, c, cache)`.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmDirectionParams,
) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
    let h = params.hidden();
    if x.len() != params.input() || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Shape(format!(
            "cell expects x[{}], h[{h}], c[{h}]; got x[{}], h[{}], c[{}]",
            params.input(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let zx = project_inputs(params, &[x], 0);
    let state = step(params, &zx, h_prev, c_prev);
    Ok((
        state.h.clone(),
        state.c.clone(),
        CellCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            state,
        },
    ))
}

/// Runs a direction over `rows` (already in processing order) from zero
/// state.
pub(crate) fn direction_forward(params: &LstmDirectionParams, rows: &[&[f64]], shared_prefix: usize) -> Vec<StepState> {
    let h = params.hidden();
    let g = 4 * h;
    let zx = project_inputs(params, rows, shared_prefix);
    let zeros = vec![0.0; h];
    let mut states: Vec<StepState> = Vec::with_capacity(rows.len());
    for t in 0..rows.len() {
        let (h_prev, c_prev) = match states.last() {
            Some(s) => (s.h.as_slice(), s.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let next = step(params, &zx[t * g..(t + 1) * g], h_prev, c_prev);
        states.push(next);
    }
    states
}

/// BPTT for a direction whose only loss path is its final hidden state.
/// `rows` and `shared_prefix` must match the forward call.
pub(crate) fn direction_backward(
    params: &LstmDirectionParams,
    states: &[StepState],
    rows: &[&[f64]],
    shared_prefix: usize,
    dh_final: &[f64],
    grads: &mut LstmDirectionParams,
) {
    let h = params.hidden();
    let g = 4 * h;
    let n = rows.len();
    if dh_final.iter().all(|&v| v == 0.0) {
        return;
    }
    let zeros = vec![0.0; h];
    let mut dzs = vec![0.0; n * g];
    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0; h];
    for t in (0..n).rev() {
        let c_prev = if t == 0 {
            zeros.as_slice()
        } else {
            states[t - 1].c.as_slice()
        };
        let dz = &mut dzs[t * g..(t + 1) * g];
        step_backward(c_prev, &states[t], &dh, &mut dc, dz);
        if t > 0 {
            dh.iter_mut().for_each(|v| *v = 0.0);
            params.u.matvec_t_acc(dz, &mut dh);
        }
    }

    // Parameter gradients, one gate row at a time so the row stays in cache.
    for r in 0..g {
        let w_row = grads.w.row_mut(r);
        let mut total = 0.0;
        for (t, x) in rows.iter().enumerate() {
            let d = dzs[t * g + r];
            if d != 0.0 {
                total += d;
                axpy(d, &x[shared_prefix..], &mut w_row[shared_prefix..]);
            }
        }
        axpy(total, &rows[0][..shared_prefix], &mut w_row[..shared_prefix]);
        grads.b[r] += total;

        let u_row = grads.u.row_mut(r);
        for t in 1..n {
            let d = dzs[t * g + r];
            if d != 0.0 {
                axpy(d, &states[t - 1].h, u_row);
            }
        }
    }
}
