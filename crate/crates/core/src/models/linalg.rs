//! Dense row-major helpers over flat `f64` slices.

/// `out += W x` for a `rows x cols` matrix.
#[inline]
pub fn matvec_add(out: &mut [f64], w: &[f64], rows: usize, cols: usize, x: &[f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += W^T y`.
#[inline]
pub fn matvec_t_add(out: &mut [f64], w: &[f64], rows: usize, cols: usize, y: &[f64]) {
    debug_assert_eq!(y.len(), rows);
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `G += y x^T`.
#[inline]
pub fn outer_add(g: &mut [f64], rows: usize, cols: usize, y: &[f64], x: &[f64]) {
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += yr * xv;
        }
    }
}

#[inline]
pub fn add_into(out: &mut [f64], x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let mut out = vec![0.0; 2];
        matvec_add(&mut out, &w, 2, 3, &[1.0, 0.0, -1.0]);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut back = vec![0.0; 3];
        matvec_t_add(&mut back, &w, 2, 3, &[1.0, 1.0]);
        assert_eq!(back, vec![5.0, 7.0, 9.0]);
        let mut g = vec![0.0; 6];
        outer_add(&mut g, 2, 3, &[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(g, vec![1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }

    #[test]
    fn stable_scalars() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        let s = softmax(&[1.0, 1.0, 1.0, 1.0]);
        assert!(s.iter().all(|v| (*v - 0.25).abs() < 1e-15));
    }
}
