//! Single encoder block: learned positions, two-head softmax self-attention
//! and a tanh feed-forward layer, both with residual connections, followed by
//! mean pooling over time.

use super::linalg::{add_into, matvec_add, matvec_t_add, outer_add, softmax};
use super::{shape, Dropout, Layout, PredictorParams, TensorShape};

pub(super) const HEADS: usize = 2;
const FF_MULT: usize = 2;

const W_IN: usize = 0;
const B_IN: usize = 1;
const POS: usize = 2;
const WQ: usize = 3;
const WK: usize = 4;
const WV: usize = 5;
const WO: usize = 6;
const BO: usize = 7;
const W1: usize = 8;
const B1: usize = 9;
const W2: usize = 10;
const B2: usize = 11;

pub(super) fn shapes(f: usize, d: usize, l: usize) -> Vec<TensorShape> {
    vec![
        shape("w_in", d, f),
        shape("b_in", d, 1),
        shape("pos", l, d),
        shape("wq", d, d),
        shape("wk", d, d),
        shape("wv", d, d),
        shape("wo", d, d),
        shape("bo", d, 1),
        shape("w1", FF_MULT * d, d),
        shape("b1", FF_MULT * d, 1),
        shape("w2", d, FF_MULT * d),
        shape("b2", d, 1),
    ]
}

pub(super) struct Cache {
    e: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// attn[head][query][key]
    attn: Vec<Vec<Vec<f64>>>,
    c: Vec<Vec<f64>>,
    att_mask: Vec<Option<Vec<f64>>>,
    y: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

impl Cache {
    pub(super) fn attention(self) -> Vec<Vec<Vec<f64>>> {
        self.attn
    }
}

fn project(w: &[f64], d: usize, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| {
            let mut out = vec![0.0; d];
            matvec_add(&mut out, w, d, d, x);
            out
        })
        .collect()
}

pub(super) fn forward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], dropout: &mut Dropout) -> (Vec<f64>, Cache) {
    let (f, d) = (p.input_dim, p.hidden_dim);
    let l = rows.len();
    let dh = d / HEADS;
    let scale = 1.0 / (dh as f64).sqrt();
    let w = &p.weights;
    let pos = &w[layout.range(POS)];

    let e: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let mut out = w[layout.range(B_IN)].to_vec();
            matvec_add(&mut out, &w[layout.range(W_IN)], d, f, x);
            add_into(&mut out, &pos[t * d..(t + 1) * d]);
            out
        })
        .collect();
    let q = project(&w[layout.range(WQ)], d, &e);
    let k = project(&w[layout.range(WK)], d, &e);
    let v = project(&w[layout.range(WV)], d, &e);

    let mut attn: Vec<Vec<Vec<f64>>> = (0..HEADS).map(|_| Vec::with_capacity(l)).collect();
    let mut c = vec![vec![0.0; d]; l];
    for (h, head_attn) in attn.iter_mut().enumerate() {
        let span = h * dh..(h + 1) * dh;
        for t in 0..l {
            let scores: Vec<f64> = (0..l)
                .map(|u| q[t][span.clone()].iter().zip(&k[u][span.clone()]).map(|(a, b)| a * b).sum::<f64>() * scale)
                .collect();
            let a = softmax(&scores);
            for (u, au) in a.iter().enumerate() {
                for j in span.clone() {
                    c[t][j] += au * v[u][j];
                }
            }
            head_attn.push(a);
        }
    }

    let mut att_mask = Vec::with_capacity(l);
    let mut y = Vec::with_capacity(l);
    let mut g = Vec::with_capacity(l);
    let mut pooled = vec![0.0; d];
    for t in 0..l {
        let mut att = w[layout.range(BO)].to_vec();
        matvec_add(&mut att, &w[layout.range(WO)], d, d, &c[t]);
        let mask = dropout.mask(d);
        if let Some(m) = &mask {
            for (a, mv) in att.iter_mut().zip(m) {
                *a *= mv;
            }
        }
        let yt: Vec<f64> = e[t].iter().zip(&att).map(|(a, b)| a + b).collect();
        let mut u = w[layout.range(B1)].to_vec();
        matvec_add(&mut u, &w[layout.range(W1)], FF_MULT * d, d, &yt);
        let gt: Vec<f64> = u.into_iter().map(f64::tanh).collect();
        let mut ff = w[layout.range(B2)].to_vec();
        matvec_add(&mut ff, &w[layout.range(W2)], d, FF_MULT * d, &gt);
        for j in 0..d {
            pooled[j] += (yt[j] + ff[j]) / l as f64;
        }
        att_mask.push(mask);
        y.push(yt);
        g.push(gt);
    }
    (pooled, Cache { e, q, k, v, attn, c, att_mask, y, g })
}

pub(super) fn backward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], cache: &Cache, d_rep: &[f64], grad: &mut [f64]) {
    let (f, d) = (p.input_dim, p.hidden_dim);
    let l = rows.len();
    let dh = d / HEADS;
    let scale = 1.0 / (dh as f64).sqrt();
    let w = &p.weights;
    let dz: Vec<f64> = d_rep.iter().map(|v| v / l as f64).collect();

    let mut de = vec![vec![0.0; d]; l];
    let mut dc = vec![vec![0.0; d]; l];
    for t in 0..l {
        // feed-forward branch
        outer_add(&mut grad[layout.range(W2)], d, FF_MULT * d, &dz, &cache.g[t]);
        add_into(&mut grad[layout.range(B2)], &dz);
        let mut dg = vec![0.0; FF_MULT * d];
        matvec_t_add(&mut dg, &w[layout.range(W2)], d, FF_MULT * d, &dz);
        let du: Vec<f64> = dg.iter().zip(&cache.g[t]).map(|(a, g)| a * (1.0 - g * g)).collect();
        outer_add(&mut grad[layout.range(W1)], FF_MULT * d, d, &du, &cache.y[t]);
        add_into(&mut grad[layout.range(B1)], &du);
        let mut dy = dz.clone();
        matvec_t_add(&mut dy, &w[layout.range(W1)], FF_MULT * d, d, &du);

        // attention output branch
        de[t].copy_from_slice(&dy);
        let datt: Vec<f64> = match &cache.att_mask[t] {
            Some(m) => dy.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => dy,
        };
        outer_add(&mut grad[layout.range(WO)], d, d, &datt, &cache.c[t]);
        add_into(&mut grad[layout.range(BO)], &datt);
        matvec_t_add(&mut dc[t], &w[layout.range(WO)], d, d, &datt);
    }

    let mut dq = vec![vec![0.0; d]; l];
    let mut dk = vec![vec![0.0; d]; l];
    let mut dv = vec![vec![0.0; d]; l];
    for h in 0..HEADS {
        let span = h * dh..(h + 1) * dh;
        for t in 0..l {
            let a = &cache.attn[h][t];
            let da: Vec<f64> = (0..l)
                .map(|u| dc[t][span.clone()].iter().zip(&cache.v[u][span.clone()]).map(|(x, y)| x * y).sum())
                .collect();
            let dot: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
            for u in 0..l {
                for j in span.clone() {
                    dv[u][j] += a[u] * dc[t][j];
                }
                let ds = a[u] * (da[u] - dot) * scale;
                for j in span.clone() {
                    dq[t][j] += ds * cache.k[u][j];
                    dk[u][j] += ds * cache.q[t][j];
                }
            }
        }
    }

    for t in 0..l {
        for (idx, dproj) in [(WQ, &dq[t]), (WK, &dk[t]), (WV, &dv[t])] {
            outer_add(&mut grad[layout.range(idx)], d, d, dproj, &cache.e[t]);
            matvec_t_add(&mut de[t], &w[layout.range(idx)], d, d, dproj);
        }
        outer_add(&mut grad[layout.range(W_IN)], d, f, &de[t], &rows[t]);
        add_into(&mut grad[layout.range(B_IN)], &de[t]);
        let pos = layout.range(POS);
        add_into(&mut grad[pos.start + t * d..pos.start + (t + 1) * d], &de[t]);
    }
}
