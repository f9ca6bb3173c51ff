//! Straight-line scalar reference implementations used by the acceptance
//! suite.
//!
//! Everything here is written with plain nested loops over `Vec<Vec<f64>>`
//! so that it shares no code with the library's tensor or tape machinery.
//! When a library result agrees with these functions, the agreement is
//! between two independently derived computations, not between a function
//! and itself.

#![allow(dead_code)]

/// Row-major matrix as a vector of equally sized rows.
pub type Mat = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step computed coordinate by coordinate.
///
/// `w` has `input + hidden` rows and `4 * hidden` columns holding the
/// input, forget, output, and candidate blocks in that column order;
/// `b` has `4 * hidden` entries.
pub fn lstm_step(
    w: &Mat,
    b: &[f64],
    hidden: usize,
    e: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(e.len() + h_prev.len());
    x.extend_from_slice(e);
    x.extend_from_slice(h_prev);
    assert_eq!(w.len(), x.len(), "weight rows must match input plus state");
    assert_eq!(b.len(), 4 * hidden, "bias must cover all four gates");

    let mut z = vec![0.0; 4 * hidden];
    for (k, zk) in z.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate() {
            acc += xi * w[i][k];
        }
        *zk = acc + b[k];
    }

    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for j in 0..hidden {
        let gate_in = sigmoid(z[j]);
        let gate_forget = sigmoid(z[hidden + j]);
        let gate_out = sigmoid(z[2 * hidden + j]);
        let candidate = z[3 * hidden + j].tanh();
        c[j] = gate_forget * c_prev[j] + gate_in * candidate;
        h[j] = gate_out * c[j].tanh();
    }
    (h, c)
}

/// Bidirectional LSTM over a sequence of embedding rows; output row `t` is
/// the forward state at `t` followed by the backward state at `t`.
pub fn bilstm(
    w_fwd: &Mat,
    b_fwd: &[f64],
    w_bwd: &Mat,
    b_bwd: &[f64],
    hidden: usize,
    seq: &Mat,
) -> Mat {
    let mut forward = Vec::with_capacity(seq.len());
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for row in seq {
        let (nh, nc) = lstm_step(w_fwd, b_fwd, hidden, row, &h, &c);
        forward.push(nh.clone());
        h = nh;
        c = nc;
    }

    let mut backward = vec![vec![0.0; hidden]; seq.len()];
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for t in (0..seq.len()).rev() {
        let (nh, nc) = lstm_step(w_bwd, b_bwd, hidden, &seq[t], &h, &c);
        backward[t] = nh.clone();
        h = nh;
        c = nc;
    }

    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| {
            let mut row = f;
            row.extend(b);
            row
        })
        .collect()
}

/// Relevance scores between auxiliary positions (rows) and character
/// positions (columns): `re[i][j] = <y_aux[i], y_c[j]>`.
pub fn relevance(y_aux: &Mat, y_c: &Mat) -> Mat {
    y_aux
        .iter()
        .map(|a| {
            y_c.iter()
                .map(|c| a.iter().zip(c).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

/// Column-wise softmax in its literal form `exp(v) / sum(exp(v))`.
pub fn column_softmax(re: &Mat) -> Mat {
    let rows = re.len();
    let cols = re[0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for j in 0..cols {
        let mut denom = 0.0;
        for row in re {
            denom += row[j].exp();
        }
        for i in 0..rows {
            out[i][j] = re[i][j].exp() / denom;
        }
    }
    out
}

/// Attention pooling: context row `j` is the alpha-weighted sum of
/// auxiliary rows, `att[j] = sum_i alpha[i][j] * y_aux[i]`.
pub fn attend(alpha: &Mat, y_aux: &Mat) -> Mat {
    let cols = alpha[0].len();
    let dim = y_aux[0].len();
    let mut out = vec![vec![0.0; dim]; cols];
    for (i, aux) in y_aux.iter().enumerate() {
        for j in 0..cols {
            for d in 0..dim {
                out[j][d] += alpha[i][j] * aux[d];
            }
        }
    }
    out
}

/// Fusion projection: each row is `[att[j] ++ e_c[j]] * w + b`.
pub fn fuse(att: &Mat, e_c: &Mat, w: &Mat, b: &[f64]) -> Mat {
    assert_eq!(att.len(), e_c.len(), "one attended row per character row");
    let out_dim = b.len();
    att.iter()
        .zip(e_c)
        .map(|(a, e)| {
            let mut x = a.clone();
            x.extend_from_slice(e);
            assert_eq!(x.len(), w.len());
            (0..out_dim)
                .map(|k| {
                    let mut acc = 0.0;
                    for (i, xi) in x.iter().enumerate() {
                        acc += xi * w[i][k];
                    }
                    acc + b[k]
                })
                .collect()
        })
        .collect()
}

/// Literal softmax of a vector, `exp(v) / sum(exp(v))`.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let denom: f64 = v.iter().map(|x| x.exp()).sum();
    v.iter().map(|x| x.exp() / denom).collect()
}

/// Largest absolute difference between two matrices of equal shape.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.len(), b.len(), "row counts differ");
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len(), "column counts differ");
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}
