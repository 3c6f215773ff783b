use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::{Error, Result};

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in v.iter_mut() {
        *x /= z;
    }
}

/// `l = sum_k softmax(<w_L, e_k>)_k e_k` over the rows of `e`. Returns `l` and the weights.
pub fn layer_attention(e: ArrayView2<f64>, w_l: ArrayView1<f64>) -> (Array1<f64>, Vec<f64>) {
    let mut a: Vec<f64> = e.rows().into_iter().map(|row| row.dot(&w_l)).collect();
    softmax_in_place(&mut a);
    let l = e.t().dot(&ArrayView1::from(&a));
    (l, a)
}

/// Gradient with respect to `w_L` given `dl`; the embeddings are frozen.
pub fn layer_attention_backward(e: ArrayView2<f64>, a: &[f64], dl: ArrayView1<f64>) -> Array1<f64> {
    let da: Vec<f64> = e.rows().into_iter().map(|row| row.dot(&dl)).collect();
    let mean: f64 = a.iter().zip(&da).map(|(a, d)| a * d).sum();
    let mut dw = Array1::zeros(e.ncols());
    for (k, row) in e.rows().into_iter().enumerate() {
        dw.scaled_add(a[k] * (da[k] - mean), &row);
    }
    dw
}

/// Attention-weighted mean of word vectors; `w_w = None` gives the plain mean.
pub fn word_attention(ls: &[Array1<f64>], w_w: Option<ArrayView1<f64>>) -> Result<(Array1<f64>, Vec<f64>)> {
    let Some(first) = ls.first() else {
        return Err(Error::InvalidInput("word attention over an utterance with no tokens".into()));
    };
    let mut alpha: Vec<f64> = match w_w {
        Some(w) => ls.iter().map(|l| l.dot(&w)).collect(),
        None => vec![0.0; ls.len()],
    };
    softmax_in_place(&mut alpha);
    let mut u = Array1::zeros(first.len());
    for (a, l) in alpha.iter().zip(ls) {
        u.scaled_add(*a, l);
    }
    Ok((u, alpha))
}

/// Returns `dl_j` for each word and, when attention is trainable, `dw_w`.
pub fn word_attention_backward(
    ls: &[Array1<f64>],
    alpha: &[f64],
    u: &Array1<f64>,
    w_w: Option<ArrayView1<f64>>,
    du: ArrayView1<f64>,
) -> (Vec<Array1<f64>>, Option<Array1<f64>>) {
    let du_u = du.dot(u);
    let mut dls: Vec<Array1<f64>> = alpha.iter().map(|a| du.to_owned() * *a).collect();
    let dw = w_w.map(|w| {
        let mut dw = Array1::zeros(w.len());
        for (j, l) in ls.iter().enumerate() {
            let ds = alpha[j] * (du.dot(l) - du_u);
            dw.scaled_add(ds, l);
            dls[j].scaled_add(ds, &w);
        }
        dw
    });
    (dls, dw)
}
