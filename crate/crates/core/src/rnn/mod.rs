//! Stacked LSTM forecaster: two recurrent layers, two rectified dense layers
//! and a `K`-wide output head, with exact backpropagation through time.
//!
//! Cell equations, per step `t` with input `x` and previous state `(c', s')`:
//!
//! ```text
//! i = σ(W_ix·x + W_is·s' + b_i)
//! o = σ(W_ox·x + W_os·s' + b_o)
//! f = σ(W_fx·x + W_fs·s' + b_f)
//! m = tanh(W_mx·x + W_ms·s' + b_m)
//! c = f ⊙ c' + i ⊙ m
//! s = o ⊙ tanh(c)
//! ```
//!
//! [`CandidateTiming::Lagged`] swaps `m` in the cell update for the candidate
//! of the previous step (zero before the first step).

mod fused;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, Vector};
use fused::{FusedCell, FusedTrace};

/// Which candidate vector enters the cell-memory update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateTiming {
    /// `c = f ⊙ c' + i ⊙ m(t)`.
    #[default]
    Current,
    /// `c = f ⊙ c' + i ⊙ m(t-1)`.
    Lagged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Rectifier,
    Identity,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rectifier => x.max(0.0),
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid_scalar(x),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    #[inline]
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => out * (1.0 - out),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Zeros,
    ScaledUniform,
}

/// Layer widths of the stacked network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub lstm: [usize; 2],
    pub dense: [usize; 2],
    pub horizon: usize,
    pub output: Activation,
}

impl Architecture {
    /// LSTM 50 → LSTM 30 → FC 300 → FC 100 → FC `horizon`.
    pub fn standard(input_dim: usize, horizon: usize) -> Self {
        Architecture {
            input_dim,
            lstm: [50, 30],
            dense: [300, 100],
            horizon,
            output: Activation::Identity,
        }
    }

    pub fn with_output(mut self, output: Activation) -> Self {
        self.output = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.input_dim,
            self.lstm[0],
            self.lstm[1],
            self.dense[0],
            self.dense[1],
            self.horizon,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in architecture {dims:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_ix: Matrix,
    pub w_is: Matrix,
    pub w_ox: Matrix,
    pub w_os: Matrix,
    pub w_fx: Matrix,
    pub w_fs: Matrix,
    pub w_mx: Matrix,
    pub w_ms: Matrix,
    pub b_i: Vector,
    pub b_o: Vector,
    pub b_f: Vector,
    pub b_m: Vector,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let wx = || Matrix::zeros(hidden, input_dim);
        let ws = || Matrix::zeros(hidden, hidden);
        LstmCellParams {
            w_ix: wx(),
            w_is: ws(),
            w_ox: wx(),
            w_os: ws(),
            w_fx: wx(),
            w_fs: ws(),
            w_mx: wx(),
            w_ms: ws(),
            b_i: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_m: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ix.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input_dim());
        for m in [&self.w_ix, &self.w_ox, &self.w_fx, &self.w_mx] {
            check_shape("LSTM input weights", m, h, i)?;
        }
        for m in [&self.w_is, &self.w_os, &self.w_fs, &self.w_ms] {
            check_shape("LSTM state weights", m, h, h)?;
        }
        for b in [&self.b_o, &self.b_f, &self.b_m] {
            check_len("LSTM bias", b, h)?;
        }
        Ok(())
    }

    /// Tensors in canonical order: per gate (i, o, f, m) the input weights,
    /// state weights, then bias.
    pub fn tensors(&self) -> [&[f64]; 12] {
        [
            self.w_ix.as_slice(),
            self.w_is.as_slice(),
            &self.b_i,
            self.w_ox.as_slice(),
            self.w_os.as_slice(),
            &self.b_o,
            self.w_fx.as_slice(),
            self.w_fs.as_slice(),
            &self.b_f,
            self.w_mx.as_slice(),
            self.w_ms.as_slice(),
            &self.b_m,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 12] {
        let LstmCellParams {
            w_ix,
            w_is,
            w_ox,
            w_os,
            w_fx,
            w_fs,
            w_mx,
            w_ms,
            b_i,
            b_o,
            b_f,
            b_m,
        } = self;
        [
            w_ix.as_mut_slice(),
            w_is.as_mut_slice(),
            b_i,
            w_ox.as_mut_slice(),
            w_os.as_mut_slice(),
            b_o,
            w_fx.as_mut_slice(),
            w_fs.as_mut_slice(),
            b_f,
            w_mx.as_mut_slice(),
            w_ms.as_mut_slice(),
            b_m,
        ]
    }
}

/// Recurrent state carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    /// Cell memory.
    pub c: Vector,
    /// Node output.
    pub s: Vector,
    /// Candidate produced at this step; only read by [`CandidateTiming::Lagged`].
    pub m: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            c: vec![0.0; hidden],
            s: vec![0.0; hidden],
            m: vec![0.0; hidden],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateActivations {
    pub i: Vector,
    pub o: Vector,
    pub f: Vector,
    pub m: Vector,
}

/// One cell evaluation.
pub fn lstm_cell_step(
    p: &LstmCellParams,
    x: &[f64],
    prev: &LstmState,
    timing: CandidateTiming,
) -> Result<(LstmState, GateActivations)> {
    p.validate()?;
    check_len("LSTM step input", x, p.input_dim())?;
    let h = p.hidden();
    check_len("LSTM previous cell", &prev.c, h)?;
    check_len("LSTM previous state", &prev.s, h)?;
    check_len("LSTM previous candidate", &prev.m, h)?;
    Ok(cell_step(p, x, prev, timing))
}

fn gate_preactivation(wx: &Matrix, ws: &Matrix, b: &[f64], x: &[f64], s: &[f64]) -> Vector {
    let mut a = b.to_vec();
    wx.matvec_acc(x, &mut a);
    ws.matvec_acc(s, &mut a);
    a
}

fn cell_step(p: &LstmCellParams, x: &[f64], prev: &LstmState, timing: CandidateTiming) -> (LstmState, GateActivations) {
    let mut i = gate_preactivation(&p.w_ix, &p.w_is, &p.b_i, x, &prev.s);
    let mut o = gate_preactivation(&p.w_ox, &p.w_os, &p.b_o, x, &prev.s);
    let mut f = gate_preactivation(&p.w_fx, &p.w_fs, &p.b_f, x, &prev.s);
    let mut m = gate_preactivation(&p.w_mx, &p.w_ms, &p.b_m, x, &prev.s);
    i.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    o.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    f.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    m.iter_mut().for_each(|v| *v = v.tanh());

    let used = match timing {
        CandidateTiming::Current => &m,
        CandidateTiming::Lagged => &prev.m,
    };
    let h = i.len();
    let mut c = Vec::with_capacity(h);
    let mut s = Vec::with_capacity(h);
    for j in 0..h {
        let cj = f[j] * prev.c[j] + i[j] * used[j];
        c.push(cj);
        s.push(o[j] * cj.tanh());
    }
    (LstmState { c, s, m: m.clone() }, GateActivations { i, o, f, m })
}

/// Per-step states and gate activations of one layer over a sequence.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub init: LstmState,
    pub states: Vec<LstmState>,
    pub gates: Vec<GateActivations>,
}

impl LayerTrace {
    pub fn outputs(&self) -> Vec<Vector> {
        self.states.iter().map(|st| st.s.clone()).collect()
    }

    pub fn last(&self) -> &LstmState {
        self.states.last().expect("non-empty trace")
    }
}

/// Runs the cell left to right over `sequence`, threading state from `init`.
pub fn lstm_layer_forward(
    p: &LstmCellParams,
    sequence: &[Vector],
    init: &LstmState,
    timing: CandidateTiming,
) -> Result<LayerTrace> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    p.validate()?;
    for x in sequence {
        check_len("LSTM layer input", x, p.input_dim())?;
    }
    for v in [&init.c, &init.s, &init.m] {
        check_len("LSTM initial state", v, p.hidden())?;
    }
    Ok(layer_forward(p, sequence, init.clone(), timing))
}

fn layer_forward(p: &LstmCellParams, sequence: &[Vector], init: LstmState, timing: CandidateTiming) -> LayerTrace {
    let mut states = Vec::with_capacity(sequence.len());
    let mut gates = Vec::with_capacity(sequence.len());
    for x in sequence {
        let prev = states.last().unwrap_or(&init);
        let (st, g) = cell_step(p, x, prev, timing);
        states.push(st);
        gates.push(g);
    }
    LayerTrace { init, states, gates }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayerParams {
    pub w: Matrix,
    pub b: Vector,
    pub activation: Activation,
}

impl DenseLayerParams {
    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        DenseLayerParams {
            w: Matrix::zeros(output_dim, input_dim),
            b: vec![0.0; output_dim],
            activation,
        }
    }

    pub fn forward(&self, x: &[f64]) -> DenseTrace {
        let mut pre = self.b.clone();
        self.w.matvec_acc(x, &mut pre);
        let out = pre.iter().map(|&v| self.activation.apply(v)).collect();
        DenseTrace {
            input: x.to_vec(),
            pre,
            out,
        }
    }

    fn backward(&self, trace: &DenseTrace, dout: &[f64], grads: &mut DenseLayerParams) -> Vector {
        let dpre: Vector = dout
            .iter()
            .zip(trace.pre.iter().zip(&trace.out))
            .map(|(d, (&pre, &out))| d * self.activation.derivative(pre, out))
            .collect();
        grads.w.outer_acc(&dpre, &trace.input);
        grads.b.iter_mut().zip(&dpre).for_each(|(b, d)| *b += d);
        let mut dx = vec![0.0; self.w.cols()];
        self.w.matvec_t_acc(&dpre, &mut dx);
        dx
    }
}

#[derive(Clone, Debug)]
pub struct DenseTrace {
    pub input: Vector,
    pub pre: Vector,
    pub out: Vector,
}

/// The full stacked network. The same type doubles as its gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastModel {
    pub arch: Architecture,
    pub timing: CandidateTiming,
    pub lstm1: LstmCellParams,
    pub lstm2: LstmCellParams,
    pub fc1: DenseLayerParams,
    pub fc2: DenseLayerParams,
    pub head: DenseLayerParams,
}

/// Cached intermediates of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    lstm1: FusedTrace,
    lstm2: FusedTrace,
    fc1: DenseTrace,
    fc2: DenseTrace,
    head: DenseTrace,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        &self.head.out
    }

    pub fn lstm1(&self) -> LayerTrace {
        self.lstm1.to_layer_trace()
    }

    pub fn lstm2(&self) -> LayerTrace {
        self.lstm2.to_layer_trace()
    }
}

/// Both recurrent layers in gate-stacked form, shared by every window of a
/// batch.
#[derive(Clone, Debug)]
pub(crate) struct FusedCells {
    pub lstm1: FusedCell,
    pub lstm2: FusedCell,
}

impl FusedCells {
    pub fn zeros_like(&self) -> Self {
        FusedCells {
            lstm1: self.lstm1.zeros_like(),
            lstm2: self.lstm2.zeros_like(),
        }
    }

    pub fn clear(&mut self) {
        self.lstm1.clear();
        self.lstm2.clear();
    }

    pub fn add_into(&self, g: &mut ForecastModel) {
        self.lstm1.add_into(&mut g.lstm1);
        self.lstm2.add_into(&mut g.lstm2);
    }
}

impl ForecastModel {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let [h1, h2] = arch.lstm;
        let [d1, d2] = arch.dense;
        Ok(ForecastModel {
            arch,
            timing: CandidateTiming::Current,
            lstm1: LstmCellParams::zeros(arch.input_dim, h1),
            lstm2: LstmCellParams::zeros(h1, h2),
            fc1: DenseLayerParams::zeros(h2, d1, Activation::Rectifier),
            fc2: DenseLayerParams::zeros(d1, d2, Activation::Rectifier),
            head: DenseLayerParams::zeros(d2, arch.horizon, arch.output),
        })
    }

    pub fn with_timing(mut self, timing: CandidateTiming) -> Self {
        self.timing = timing;
        self
    }

    /// Same shape, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn horizon(&self) -> usize {
        self.arch.horizon
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(30);
        out.extend(self.lstm1.tensors());
        out.extend(self.lstm2.tensors());
        for d in [&self.fc1, &self.fc2, &self.head] {
            out.push(d.w.as_slice());
            out.push(&d.b);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(30);
        out.extend(self.lstm1.tensors_mut());
        out.extend(self.lstm2.tensors_mut());
        for d in [&mut self.fc1, &mut self.fc2, &mut self.head] {
            out.push(d.w.as_mut_slice());
            out.push(&mut d.b);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vector {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(Error::Dimension {
                context: "ForecastModel::set_flat",
                expected: n,
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let a = &self.arch;
        self.lstm1.validate()?;
        self.lstm2.validate()?;
        check_dim("lstm1 input", self.lstm1.input_dim(), a.input_dim)?;
        check_dim("lstm1 width", self.lstm1.hidden(), a.lstm[0])?;
        check_dim("lstm2 input", self.lstm2.input_dim(), a.lstm[0])?;
        check_dim("lstm2 width", self.lstm2.hidden(), a.lstm[1])?;
        for (name, d, rows, cols) in [
            ("fc1", &self.fc1, a.dense[0], a.lstm[1]),
            ("fc2", &self.fc2, a.dense[1], a.dense[0]),
            ("head", &self.head, a.horizon, a.dense[1]),
        ] {
            check_shape(name, &d.w, rows, cols)?;
            check_len(name, &d.b, rows)?;
        }
        Ok(())
    }

    fn check_window(&self, window: &[Vector]) -> Result<()> {
        if window.is_empty() {
            return Err(Error::InvalidInput("empty input window".into()));
        }
        for x in window {
            check_len("network input", x, self.arch.input_dim)?;
        }
        Ok(())
    }

    pub(crate) fn fuse(&self) -> FusedCells {
        FusedCells {
            lstm1: FusedCell::pack(&self.lstm1),
            lstm2: FusedCell::pack(&self.lstm2),
        }
    }

    /// Runs the network on one lookback window (zero initial state).
    pub fn forward(&self, window: &[Vector]) -> Result<ForwardPass> {
        self.forward_fused(&self.fuse(), window)
    }

    pub(crate) fn forward_fused(&self, cells: &FusedCells, window: &[Vector]) -> Result<ForwardPass> {
        self.check_window(window)?;
        let xs = window.concat();
        let lstm1 = fused::forward(&cells.lstm1, &xs, self.timing);
        let lstm2 = fused::forward(&cells.lstm2, &lstm1.s, self.timing);
        let fc1 = self.fc1.forward(lstm2.last_s());
        let fc2 = self.fc2.forward(&fc1.out);
        let head = self.head.forward(&fc2.out);
        Ok(ForwardPass {
            lstm1,
            lstm2,
            fc1,
            fc2,
            head,
        })
    }

    pub fn predict(&self, window: &[Vector]) -> Result<Vector> {
        Ok(self.forward(window)?.head.out)
    }

    /// [`ForecastModel::predict`] over many windows.
    pub fn predict_many<W: AsRef<[Vector]>>(&self, windows: &[W]) -> Result<Vec<Vector>> {
        let cells = self.fuse();
        windows
            .iter()
            .map(|w| Ok(self.forward_fused(&cells, w.as_ref())?.head.out))
            .collect()
    }

    /// Gradients of a scalar loss given `∂L/∂output`, by backpropagation
    /// through both recurrent layers.
    pub fn backward(&self, pass: &ForwardPass, output_grad: &[f64]) -> Result<ForecastModel> {
        let mut g = self.zeros_like();
        self.backward_into(pass, output_grad, &mut g)?;
        Ok(g)
    }

    /// As [`ForecastModel::backward`], adding into an existing gradient.
    pub fn backward_into(&self, pass: &ForwardPass, output_grad: &[f64], g: &mut ForecastModel) -> Result<()> {
        let cells = self.fuse();
        let mut gc = cells.zeros_like();
        self.backward_fused(&cells, pass, output_grad, g, &mut gc)?;
        gc.add_into(g);
        Ok(())
    }

    /// Dense gradients go to `g`, recurrent ones to `gc` in stacked form.
    pub(crate) fn backward_fused(
        &self,
        cells: &FusedCells,
        pass: &ForwardPass,
        output_grad: &[f64],
        g: &mut ForecastModel,
        gc: &mut FusedCells,
    ) -> Result<()> {
        check_len("output gradient", output_grad, self.arch.horizon)?;
        let [h1, h2] = self.arch.lstm;
        if pass.head.out.len() != self.arch.horizon
            || pass.lstm1.hidden != h1
            || pass.lstm2.hidden != h2
            || pass.lstm1.input != self.arch.input_dim
        {
            return Err(Error::InvalidInput("forward pass does not belong to this model".into()));
        }
        if g.arch != self.arch {
            return Err(Error::InvalidInput("gradient buffer shape differs from model".into()));
        }
        let d_fc2 = self.head.backward(&pass.head, output_grad, &mut g.head);
        let d_fc1 = self.fc2.backward(&pass.fc2, &d_fc2, &mut g.fc2);
        let d_last = self.fc1.backward(&pass.fc1, &d_fc1, &mut g.fc1);

        let steps = pass.lstm1.steps;
        let mut ds2 = vec![0.0; steps * h2];
        ds2[(steps - 1) * h2..].copy_from_slice(&d_last);
        let mut ds1 = vec![0.0; steps * h1];
        fused::backward(
            &cells.lstm2,
            &pass.lstm2,
            &ds2,
            self.timing,
            &mut gc.lstm2,
            Some(&mut ds1),
        );
        fused::backward(&cells.lstm1, &pass.lstm1, &ds1, self.timing, &mut gc.lstm1, None);
        Ok(())
    }
}

/// Builds a model with every weight drawn by `scheme`; biases start at zero.
///
/// `ScaledUniform` draws each weight uniformly in `±√(6 / (fan_in + fan_out))`.
pub fn init_params(arch: Architecture, scheme: InitScheme, seed: u64) -> Result<ForecastModel> {
    let mut model = ForecastModel::zeros(arch)?;
    if scheme == InitScheme::Zeros {
        return Ok(model);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |m: &mut Matrix| {
        let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
        for v in m.as_mut_slice() {
            *v = rng.gen_range(-bound..=bound);
        }
    };
    for cell in [&mut model.lstm1, &mut model.lstm2] {
        for m in [
            &mut cell.w_ix,
            &mut cell.w_is,
            &mut cell.w_ox,
            &mut cell.w_os,
            &mut cell.w_fx,
            &mut cell.w_fs,
            &mut cell.w_mx,
            &mut cell.w_ms,
        ] {
            fill(m);
        }
    }
    for d in [&mut model.fc1, &mut model.fc2, &mut model.head] {
        fill(&mut d.w);
    }
    Ok(model)
}

fn check_len(context: &'static str, v: &[f64], expected: usize) -> Result<()> {
    check_dim(context, v.len(), expected)
}

fn check_dim(context: &'static str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

fn check_shape(context: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    check_dim(context, m.rows(), rows)?;
    check_dim(context, m.cols(), cols)
}
