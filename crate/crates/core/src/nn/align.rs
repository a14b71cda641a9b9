//! Fused soft alignment of two token sequences with mean/max pooling.
//!
//! For `H_i` (`m x D`) and `H_j` (`n x D`), each token attends over the other
//! sequence, is enhanced as `[h; h~; h - h~; h * h~]`, and both sides are pooled
//! by column mean and column max. Output is `1 x 16D`:
//! `[mean_i, max_i, mean_j, max_j]`.

use super::tape::softmax_in_place;
use super::tensor::{gemm_acc, Tensor};

#[derive(Debug, Clone)]
pub(crate) struct AlignCache {
    /// Row softmax of `H_i H_jᵀ`, `m x n`.
    a: Tensor,
    /// Row softmax of `H_j H_iᵀ`, `n x m`.
    b: Tensor,
    att_i: Tensor,
    att_j: Tensor,
    argmax_i: Vec<usize>,
    argmax_j: Vec<usize>,
}

fn softmax_rows(mut t: Tensor) -> Tensor {
    let cols = t.cols();
    if cols > 0 {
        for row in t.data_mut().chunks_mut(cols) {
            softmax_in_place(row);
        }
    }
    t
}

/// Writes `[mean(e); max(e)]` for `e = [h, att, h - att, h * att]` into `out`
/// (length `8D`) and returns the argmax row of each max column.
fn pool_side(h: &Tensor, att: &Tensor, out: &mut [f64]) -> Vec<usize> {
    let (m, d) = (h.rows(), h.cols());
    let inv = 1.0 / m as f64;
    let (mean, max) = out.split_at_mut(4 * d);
    let mut argmax = vec![0usize; 4 * d];
    let mut e = vec![0.0; 4 * d];
    for r in 0..m {
        let (hr, ar) = (h.row(r), att.row(r));
        let (e0, rest) = e.split_at_mut(d);
        let (e1, rest) = rest.split_at_mut(d);
        let (e2, e3) = rest.split_at_mut(d);
        e0.copy_from_slice(hr);
        e1.copy_from_slice(ar);
        for (((x2, x3), &x), &y) in e2.iter_mut().zip(e3.iter_mut()).zip(hr).zip(ar) {
            *x2 = x - y;
            *x3 = x * y;
        }
        for (mu, &v) in mean.iter_mut().zip(&e) {
            *mu += v * inv;
        }
        if r == 0 {
            max.copy_from_slice(&e);
        } else {
            for ((mx, am), &v) in max.iter_mut().zip(argmax.iter_mut()).zip(&e) {
                if v > *mx {
                    *mx = v;
                    *am = r;
                }
            }
        }
    }
    argmax
}

pub fn soft_align(h_i: &Tensor, h_j: &Tensor) -> Tensor {
    soft_align_forward(h_i, h_j).0
}

pub(crate) fn soft_align_forward(h_i: &Tensor, h_j: &Tensor) -> (Tensor, AlignCache) {
    assert_eq!(h_i.cols(), h_j.cols(), "aligned sequences differ in width");
    assert!(h_i.rows() > 0 && h_j.rows() > 0, "alignment of an empty sequence");
    let d = h_i.cols();
    let s = h_i.matmul_t(false, h_j, true);
    let a = softmax_rows(s.clone());
    let b = softmax_rows(s.transpose());
    let att_i = a.matmul(h_j);
    let att_j = b.matmul(h_i);
    let mut out = Tensor::zeros(1, 16 * d);
    let (left, right) = out.data_mut().split_at_mut(8 * d);
    let argmax_i = pool_side(h_i, &att_i, left);
    let argmax_j = pool_side(h_j, &att_j, right);
    (
        out,
        AlignCache {
            a,
            b,
            att_i,
            att_j,
            argmax_i,
            argmax_j,
        },
    )
}

/// Gradients of one pooled side with respect to `h` and its attended vectors.
fn pool_side_backward(h: &Tensor, att: &Tensor, argmax: &[usize], g: &[f64]) -> (Tensor, Tensor) {
    let (m, d) = (h.rows(), h.cols());
    let inv = 1.0 / m as f64;
    let (g_mean, g_max) = g.split_at(4 * d);
    // mean part: identical upstream gradient for every row
    let c_h: Vec<f64> = (0..d).map(|c| (g_mean[c] + g_mean[2 * d + c]) * inv).collect();
    let c_a: Vec<f64> = (0..d).map(|c| (g_mean[d + c] - g_mean[2 * d + c]) * inv).collect();
    let c_p: Vec<f64> = g_mean[3 * d..].iter().map(|x| x * inv).collect();
    let mut dh = Tensor::zeros(m, d);
    let mut datt = Tensor::zeros(m, d);
    for r in 0..m {
        let (hr, ar) = (h.row(r), att.row(r));
        for (((o, &ch), &cp), &y) in dh.row_mut(r).iter_mut().zip(&c_h).zip(&c_p).zip(ar) {
            *o = ch + cp * y;
        }
        for (((o, &ca), &cp), &x) in datt.row_mut(r).iter_mut().zip(&c_a).zip(&c_p).zip(hr) {
            *o = ca + cp * x;
        }
    }
    // max part: one row per column
    for c in 0..d {
        let r = argmax[c];
        dh.row_mut(r)[c] += g_max[c];
        let r = argmax[d + c];
        datt.row_mut(r)[c] += g_max[d + c];
        let r = argmax[2 * d + c];
        dh.row_mut(r)[c] += g_max[2 * d + c];
        datt.row_mut(r)[c] -= g_max[2 * d + c];
        let r = argmax[3 * d + c];
        let gx = g_max[3 * d + c];
        let (x, y) = (h.row(r)[c], att.row(r)[c]);
        dh.row_mut(r)[c] += gx * y;
        datt.row_mut(r)[c] += gx * x;
    }
    (dh, datt)
}

/// `y ⊙ (dy - rowsum(dy ⊙ y))` for a row softmax `y`.
fn softmax_rows_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, gr) = (y.row(r), dy.row(r));
        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
        for ((o, yi), gi) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
            *o = yi * (gi - dot);
        }
    }
    out
}

pub(crate) fn soft_align_backward(h_i: &Tensor, h_j: &Tensor, cache: &AlignCache, g: &Tensor) -> (Tensor, Tensor) {
    let d = h_i.cols();
    let (g_i, g_j) = g.data().split_at(8 * d);
    let (mut dh_i, datt_i) = pool_side_backward(h_i, &cache.att_i, &cache.argmax_i, g_i);
    let (mut dh_j, datt_j) = pool_side_backward(h_j, &cache.att_j, &cache.argmax_j, g_j);

    // att_i = A H_j, att_j = B H_i
    let da = datt_i.matmul_t(false, h_j, true);
    gemm_acc(&cache.a, true, &datt_i, false, &mut dh_j);
    let db = datt_j.matmul_t(false, h_i, true);
    gemm_acc(&cache.b, true, &datt_j, false, &mut dh_i);

    // A = softmax(S), B = softmax(Sᵀ), S = H_i H_jᵀ
    let mut ds = softmax_rows_backward(&cache.a, &da);
    ds.add_assign(&softmax_rows_backward(&cache.b, &db).transpose());
    gemm_acc(&ds, false, h_j, false, &mut dh_i);
    gemm_acc(&ds, true, h_i, false, &mut dh_j);
    (dh_i, dh_j)
}
