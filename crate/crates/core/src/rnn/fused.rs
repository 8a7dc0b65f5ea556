//! Gate-stacked storage used by the network's forward and backward passes.
//!
//! The four gates of a cell share one `4H × (I + H)` matrix acting on the
//! concatenation `z = [x; s']`. Rows are ordered `i, o, f, m`.

use super::{CandidateTiming, GateActivations, LayerTrace, LstmCellParams, LstmState};
use crate::numerics::{sigmoid_scalar, Matrix};

#[derive(Clone, Debug)]
pub(crate) struct FusedCell {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub input: usize,
    pub hidden: usize,
}

impl FusedCell {
    pub fn pack(p: &LstmCellParams) -> Self {
        let (input, hidden) = (p.input_dim(), p.hidden());
        let width = input + hidden;
        let mut w = Matrix::zeros(4 * hidden, width);
        let mut b = Vec::with_capacity(4 * hidden);
        let data = w.as_mut_slice();
        for (g, (wx, ws, bg)) in gate_blocks(p).into_iter().enumerate() {
            for j in 0..hidden {
                let row = &mut data[(g * hidden + j) * width..(g * hidden + j + 1) * width];
                row[..input].copy_from_slice(wx.row(j));
                row[input..].copy_from_slice(ws.row(j));
            }
            b.extend_from_slice(bg);
        }
        FusedCell { w, b, input, hidden }
    }

    pub fn zeros_like(&self) -> Self {
        FusedCell {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
            input: self.input,
            hidden: self.hidden,
        }
    }

    pub fn clear(&mut self) {
        self.w.as_mut_slice().fill(0.0);
        self.b.fill(0.0);
    }

    /// Adds this (gradient) cell into the per-gate layout of `p`.
    pub fn add_into(&self, p: &mut LstmCellParams) {
        let (input, hidden) = (self.input, self.hidden);
        let width = input + hidden;
        let data = self.w.as_slice();
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
        } = p;
        let blocks = [
            (w_ix, w_is, b_i),
            (w_ox, w_os, b_o),
            (w_fx, w_fs, b_f),
            (w_mx, w_ms, b_m),
        ];
        for (g, (wx, ws, bg)) in blocks.into_iter().enumerate() {
            let (wx, ws) = (wx.as_mut_slice(), ws.as_mut_slice());
            for j in 0..hidden {
                let row = &data[(g * hidden + j) * width..(g * hidden + j + 1) * width];
                add(&mut wx[j * input..(j + 1) * input], &row[..input]);
                add(&mut ws[j * hidden..(j + 1) * hidden], &row[input..]);
            }
            add(bg, &self.b[g * hidden..(g + 1) * hidden]);
        }
    }
}

fn gate_blocks(p: &LstmCellParams) -> [(&Matrix, &Matrix, &[f64]); 4] {
    [
        (&p.w_ix, &p.w_is, &p.b_i),
        (&p.w_ox, &p.w_os, &p.b_o),
        (&p.w_fx, &p.w_fs, &p.b_f),
        (&p.w_mx, &p.w_ms, &p.b_m),
    ]
}

fn add(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Flat per-step intermediates of one layer, starting from the zero state.
#[derive(Clone, Debug)]
pub(crate) struct FusedTrace {
    pub steps: usize,
    pub input: usize,
    pub hidden: usize,
    /// `[x(t); s(t-1)]` per step.
    pub z: Vec<f64>,
    /// Activated `i, o, f, m` per step.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tc: Vec<f64>,
    pub s: Vec<f64>,
}

impl FusedTrace {
    pub fn last_s(&self) -> &[f64] {
        &self.s[(self.steps - 1) * self.hidden..]
    }

    pub fn to_layer_trace(&self) -> LayerTrace {
        let h = self.hidden;
        let mut states = Vec::with_capacity(self.steps);
        let mut gates = Vec::with_capacity(self.steps);
        for t in 0..self.steps {
            let g = &self.gates[t * 4 * h..(t + 1) * 4 * h];
            let m = g[3 * h..].to_vec();
            states.push(LstmState {
                c: self.c[t * h..(t + 1) * h].to_vec(),
                s: self.s[t * h..(t + 1) * h].to_vec(),
                m: m.clone(),
            });
            gates.push(GateActivations {
                i: g[..h].to_vec(),
                o: g[h..2 * h].to_vec(),
                f: g[2 * h..3 * h].to_vec(),
                m,
            });
        }
        LayerTrace {
            init: LstmState::zeros(h),
            states,
            gates,
        }
    }
}

/// `xs` holds `steps` rows of width `cell.input`, back to back.
pub(crate) fn forward(cell: &FusedCell, xs: &[f64], timing: CandidateTiming) -> FusedTrace {
    let (ni, h) = (cell.input, cell.hidden);
    let width = ni + h;
    let steps = xs.len() / ni;
    let mut z = vec![0.0; steps * width];
    let mut gates = vec![0.0; steps * 4 * h];
    let mut c = vec![0.0; steps * h];
    let mut tc = vec![0.0; steps * h];
    let mut s = vec![0.0; steps * h];
    for t in 0..steps {
        let zt = &mut z[t * width..(t + 1) * width];
        zt[..ni].copy_from_slice(&xs[t * ni..(t + 1) * ni]);
        if t > 0 {
            zt[ni..].copy_from_slice(&s[(t - 1) * h..t * h]);
        }
        let (done, rest) = gates.split_at_mut(t * 4 * h);
        let a = &mut rest[..4 * h];
        a.copy_from_slice(&cell.b);
        cell.w.matvec_acc(zt, a);
        a[..3 * h].iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
        a[3 * h..].iter_mut().for_each(|v| *v = v.tanh());

        let prev_m = (t > 0).then(|| &done[(t - 1) * 4 * h + 3 * h..]);
        for j in 0..h {
            let c_prev = if t > 0 { c[(t - 1) * h + j] } else { 0.0 };
            let used = match timing {
                CandidateTiming::Current => a[3 * h + j],
                CandidateTiming::Lagged => prev_m.map_or(0.0, |m| m[j]),
            };
            let cj = a[2 * h + j] * c_prev + a[j] * used;
            let tcj = cj.tanh();
            c[t * h + j] = cj;
            tc[t * h + j] = tcj;
            s[t * h + j] = a[h + j] * tcj;
        }
    }
    FusedTrace {
        steps,
        input: ni,
        hidden: h,
        z,
        gates,
        c,
        tc,
        s,
    }
}

/// Accumulates gradients into `grads`; `ds_above` holds `∂L/∂s(t)` from
/// outside the layer (`steps × H`). When given, `dx` receives `∂L/∂x(t)`.
pub(crate) fn backward(
    cell: &FusedCell,
    tr: &FusedTrace,
    ds_above: &[f64],
    timing: CandidateTiming,
    grads: &mut FusedCell,
    mut dx: Option<&mut [f64]>,
) {
    let (ni, h) = (cell.input, cell.hidden);
    let width = ni + h;
    let mut ds_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    // ∂L/∂m(t) contributed by step t+1 under the lagged candidate.
    let mut dm_next = vec![0.0; h];
    let mut dm_prev = vec![0.0; h];
    // Pre-activation gradients of every step, folded into the weight
    // gradient in one pass once the recursion finishes.
    let mut da_all = vec![0.0; tr.steps * 4 * h];
    let mut dz = vec![0.0; width];

    for t in (0..tr.steps).rev() {
        let g = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
        let prev_m = (t > 0).then(|| &tr.gates[(t - 1) * 4 * h + 3 * h..t * 4 * h]);
        let da = &mut da_all[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (gi, go, gf, gm) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let ds = ds_above[t * h + j] + ds_next[j];
            let tcj = tr.tc[t * h + j];
            let d_o = ds * tcj;
            let dc = dc_next[j] + ds * go * (1.0 - tcj * tcj);
            let c_prev = if t > 0 { tr.c[(t - 1) * h + j] } else { 0.0 };
            let (used, dm) = match timing {
                CandidateTiming::Current => (gm, dc * gi),
                CandidateTiming::Lagged => {
                    dm_prev[j] = dc * gi;
                    (prev_m.map_or(0.0, |m| m[j]), dm_next[j])
                }
            };
            dc_next[j] = dc * gf;
            da[j] = dc * used * gi * (1.0 - gi);
            da[h + j] = d_o * go * (1.0 - go);
            da[2 * h + j] = dc * c_prev * gf * (1.0 - gf);
            da[3 * h + j] = dm * (1.0 - gm * gm);
        }
        std::mem::swap(&mut dm_next, &mut dm_prev);

        add(&mut grads.b, da);
        dz.fill(0.0);
        cell.w.matvec_t_acc(da, &mut dz);
        if let Some(dx) = dx.as_deref_mut() {
            dx[t * ni..(t + 1) * ni].copy_from_slice(&dz[..ni]);
        }
        ds_next.copy_from_slice(&dz[ni..]);
    }

    let gw = grads.w.as_mut_slice();
    for (r, row) in gw.chunks_exact_mut(width).enumerate() {
        for t in 0..tr.steps {
            let d = da_all[t * 4 * h + r];
            if d != 0.0 {
                let zt = &tr.z[t * width..(t + 1) * width];
                row.iter_mut().zip(zt).for_each(|(g, z)| *g += d * z);
            }
        }
    }
}
