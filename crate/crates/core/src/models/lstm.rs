use super::linalg::{add_into, matvec_add, matvec_t_add, outer_add, sigmoid};
use super::{shape, Layout, PredictorParams, TensorShape};

// (input, recurrent, bias) tensor indices per gate
const GATE_I: [usize; 3] = [0, 1, 2];
const GATE_F: [usize; 3] = [3, 4, 5];
const GATE_G: [usize; 3] = [6, 7, 8];
const GATE_O: [usize; 3] = [9, 10, 11];

pub(super) fn shapes(f: usize, h: usize) -> Vec<TensorShape> {
    let mut v = Vec::with_capacity(12);
    for (w, u, b) in [("wi", "ui", "bi"), ("wf", "uf", "bf"), ("wg", "ug", "bg"), ("wo", "uo", "bo")] {
        v.push(shape(w, h, f));
        v.push(shape(u, h, h));
        v.push(shape(b, h, 1));
    }
    v
}

struct Step {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub(super) struct Cache {
    steps: Vec<Step>,
}

fn gate(p: &PredictorParams, layout: &Layout, idx: [usize; 3], x: &[f64], h: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    let (f, hd) = (p.input_dim, p.hidden_dim);
    let mut a = p.weights[layout.range(idx[2])].to_vec();
    matvec_add(&mut a, &p.weights[layout.range(idx[0])], hd, f, x);
    matvec_add(&mut a, &p.weights[layout.range(idx[1])], hd, hd, h);
    a.into_iter().map(act).collect()
}

pub(super) fn forward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>]) -> (Vec<f64>, Cache) {
    let hd = p.hidden_dim;
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut steps = Vec::with_capacity(rows.len());
    for x in rows {
        let i = gate(p, layout, GATE_I, x, &h, sigmoid);
        let f = gate(p, layout, GATE_F, x, &h, sigmoid);
        let g = gate(p, layout, GATE_G, x, &h, f64::tanh);
        let o = gate(p, layout, GATE_O, x, &h, sigmoid);
        let c_next: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c_next.iter().map(|v| v.tanh()).collect();
        let h_next: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        steps.push(Step {
            h_prev: std::mem::replace(&mut h, h_next),
            c_prev: std::mem::replace(&mut c, c_next),
            i,
            f,
            g,
            o,
            tanh_c,
        });
    }
    (h, Cache { steps })
}

pub(super) fn backward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], cache: &Cache, d_rep: &[f64], grad: &mut [f64]) {
    let (fd, hd) = (p.input_dim, p.hidden_dim);
    let w = &p.weights;
    let mut dh = d_rep.to_vec();
    let mut dc = vec![0.0; hd];
    for (t, s) in cache.steps.iter().enumerate().rev() {
        let x = &rows[t];
        let mut da_i = vec![0.0; hd];
        let mut da_f = vec![0.0; hd];
        let mut da_g = vec![0.0; hd];
        let mut da_o = vec![0.0; hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let d_o = dh[k] * s.tanh_c[k];
            let dck = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            da_i[k] = dck * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            da_f[k] = dck * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            da_g[k] = dck * s.i[k] * (1.0 - s.g[k] * s.g[k]);
            da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dc_prev[k] = dck * s.f[k];
        }
        let mut dh_prev = vec![0.0; hd];
        for (idx, da) in [(GATE_I, &da_i), (GATE_F, &da_f), (GATE_G, &da_g), (GATE_O, &da_o)] {
            outer_add(&mut grad[layout.range(idx[0])], hd, fd, da, x);
            outer_add(&mut grad[layout.range(idx[1])], hd, hd, da, &s.h_prev);
            add_into(&mut grad[layout.range(idx[2])], da);
            matvec_t_add(&mut dh_prev, &w[layout.range(idx[1])], hd, hd, da);
        }
        dh = dh_prev;
        dc = dc_prev;
    }
}
