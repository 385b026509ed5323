use super::linalg::{add_into, matvec_add, matvec_t_add, outer_add, sigmoid};
use super::{shape, Layout, PredictorParams, TensorShape};

const WZ: usize = 0;
const UZ: usize = 1;
const BZ: usize = 2;
const WR: usize = 3;
const UR: usize = 4;
const BR: usize = 5;
const WH: usize = 6;
const UH: usize = 7;
const BH: usize = 8;

pub(super) fn shapes(f: usize, h: usize) -> Vec<TensorShape> {
    vec![
        shape("wz", h, f),
        shape("uz", h, h),
        shape("bz", h, 1),
        shape("wr", h, f),
        shape("ur", h, h),
        shape("br", h, 1),
        shape("wh", h, f),
        shape("uh", h, h),
        shape("bh", h, 1),
    ]
}

struct Step {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
    rh: Vec<f64>,
}

pub(super) struct Cache {
    steps: Vec<Step>,
}

/// Gate pre-activation `W x + U h + b`.
fn affine(p: &PredictorParams, layout: &Layout, w: usize, u: usize, b: usize, x: &[f64], h: &[f64]) -> Vec<f64> {
    let (f, hd) = (p.input_dim, p.hidden_dim);
    let mut a = p.weights[layout.range(b)].to_vec();
    matvec_add(&mut a, &p.weights[layout.range(w)], hd, f, x);
    matvec_add(&mut a, &p.weights[layout.range(u)], hd, hd, h);
    a
}

pub(super) fn forward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>]) -> (Vec<f64>, Cache) {
    let hd = p.hidden_dim;
    let mut h = vec![0.0; hd];
    let mut steps = Vec::with_capacity(rows.len());
    for x in rows {
        let z: Vec<f64> = affine(p, layout, WZ, UZ, BZ, x, &h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = affine(p, layout, WR, UR, BR, x, &h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = affine(p, layout, WH, UH, BH, x, &rh).into_iter().map(f64::tanh).collect();
        let next: Vec<f64> = (0..hd).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
        steps.push(Step { h_prev: std::mem::replace(&mut h, next), z, r, cand, rh });
    }
    (h, Cache { steps })
}

pub(super) fn backward(p: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], cache: &Cache, d_rep: &[f64], grad: &mut [f64]) {
    let (f, hd) = (p.input_dim, p.hidden_dim);
    let w = &p.weights;
    let mut dh = d_rep.to_vec();
    for (t, s) in cache.steps.iter().enumerate().rev() {
        let x = &rows[t];
        let mut dh_prev: Vec<f64> = (0..hd).map(|i| dh[i] * (1.0 - s.z[i])).collect();
        let dz_a: Vec<f64> = (0..hd)
            .map(|i| dh[i] * (s.cand[i] - s.h_prev[i]) * s.z[i] * (1.0 - s.z[i]))
            .collect();
        let dcand_a: Vec<f64> = (0..hd).map(|i| dh[i] * s.z[i] * (1.0 - s.cand[i] * s.cand[i])).collect();

        outer_add(&mut grad[layout.range(WH)], hd, f, &dcand_a, x);
        outer_add(&mut grad[layout.range(UH)], hd, hd, &dcand_a, &s.rh);
        add_into(&mut grad[layout.range(BH)], &dcand_a);
        let mut d_rh = vec![0.0; hd];
        matvec_t_add(&mut d_rh, &w[layout.range(UH)], hd, hd, &dcand_a);
        let dr_a: Vec<f64> = (0..hd).map(|i| d_rh[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i])).collect();
        for i in 0..hd {
            dh_prev[i] += d_rh[i] * s.r[i];
        }

        outer_add(&mut grad[layout.range(WZ)], hd, f, &dz_a, x);
        outer_add(&mut grad[layout.range(UZ)], hd, hd, &dz_a, &s.h_prev);
        add_into(&mut grad[layout.range(BZ)], &dz_a);
        matvec_t_add(&mut dh_prev, &w[layout.range(UZ)], hd, hd, &dz_a);

        outer_add(&mut grad[layout.range(WR)], hd, f, &dr_a, x);
        outer_add(&mut grad[layout.range(UR)], hd, hd, &dr_a, &s.h_prev);
        add_into(&mut grad[layout.range(BR)], &dr_a);
        matvec_t_add(&mut dh_prev, &w[layout.range(UR)], hd, hd, &dr_a);

        dh = dh_prev;
    }
}
