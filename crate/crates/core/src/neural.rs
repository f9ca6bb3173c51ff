//! Neural building blocks: embeddings, the LSTM cell and bidirectional
//! encoder, dropout, and the convolutional sequence downsampler.
//!
//! Parameters live outside any tape as plain tensors. Each forward pass
//! places them on a fresh tape as leaves (`*_nodes` structs hold the ids),
//! so one parameter set can drive any number of passes and gradients come
//! back per-tape.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::vocab::Vocab;

/// Uniform Xavier/Glorot initialization for a `[rows×cols]` matrix.
pub fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::from_vec(vec![rows, cols], data)
}

// ---------------------------------------------------------------------------
// Embeddings

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// `[vocab_size × dim]`, one row per token id.
    pub weights: Tensor,
}

/// Outcome of overlaying pretrained vectors onto an embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PretrainedReport {
    /// Vocabulary tokens found in the vector file.
    pub hits: usize,
    /// Vocabulary tokens that kept their random initialization.
    pub misses: usize,
}

impl EmbeddingTable {
    pub fn init(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        EmbeddingTable {
            weights: xavier(vocab_size, dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    /// Overlays vectors from a text file: a `count dim` header line, then
    /// one `token v1 .. vDim` line per vector, whitespace-separated. Tokens
    /// outside `vocab` are ignored; vocabulary tokens absent from the file
    /// keep their current rows. Reserved ids (padding, unknown) are never
    /// overwritten and are not counted.
    pub fn load_pretrained(&mut self, path: &Path, vocab: &Vocab) -> Result<PretrainedReport> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = raw.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty vector file"))?;
        let mut head = header.split_whitespace();
        let (_count, dim): (usize, usize) = match (
            head.next().and_then(|t| t.parse().ok()),
            head.next().and_then(|t| t.parse().ok()),
        ) {
            (Some(c), Some(d)) => (c, d),
            _ => return Err(Error::parse(path, 1, "expected `count dim` header")),
        };
        if dim != self.dim() {
            return Err(Error::Incompatible(format!(
                "pretrained vectors have {dim} dimensions, embedding table has {}",
                self.dim()
            )));
        }
        let mut seen = vec![false; vocab.len()];
        let mut hits = 0usize;
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap();
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(path, lineno, format!("bad float {f:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            let Some(id) = vocab.id(token) else { continue };
            if id < 2 || seen[id] {
                continue;
            }
            seen[id] = true;
            hits += 1;
            let dstart = id * dim;
            for (k, v) in values.into_iter().enumerate() {
                assert!(v.is_finite(), "non-finite pretrained value for {token:?}");
                self.weights.data_mut()[dstart + k] = v;
            }
        }
        Ok(PretrainedReport {
            hits,
            misses: vocab.len() - 2 - hits,
        })
    }
}

/// Places the table on a tape and gathers rows for an id sequence,
/// producing `[ids.len() × dim]`.
pub fn embed_sequence(tape: &mut Tape, table: NodeId, ids: &[usize]) -> NodeId {
    tape.embed(table, ids)
}

// ---------------------------------------------------------------------------
// LSTM

/// One direction of an LSTM: a single fused weight matrix over the
/// concatenated `[input; hidden]` vector, producing all four gate
/// preactivations side by side in the order input, forget, output, cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[(input_dim + hidden) × 4·hidden]`.
    pub w: Tensor,
    /// `[4·hidden]`.
    pub b: Tensor,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        LstmParams {
            w: xavier(input_dim + hidden, 4 * hidden, rng),
            b: Tensor::zeros(vec![4 * hidden]),
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows() - self.hidden
    }

    pub fn place(&self, tape: &mut Tape) -> LstmNodes {
        LstmNodes {
            w: tape.leaf(self.w.clone()),
            b: tape.leaf(self.b.clone()),
            hidden: self.hidden,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub w: NodeId,
    pub b: NodeId,
    hidden: usize,
}

/// One LSTM step. Gate preactivations come from a single affine map of
/// `[e_t; h_prev]`; the input, forget, and output gates are sigmoids, the
/// candidate cell is a tanh; then `c = f∘c_prev + i∘cand` and
/// `h = o∘tanh(c)`.
pub fn lstm_step(
    tape: &mut Tape,
    p: LstmNodes,
    e_t: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> (NodeId, NodeId) {
    let h = p.hidden;
    let x = tape.concat(&[e_t, h_prev], 0);
    let z = tape.linear(x, p.w, Some(p.b));
    let zi = tape.slice(z, 0, h);
    let zf = tape.slice(z, h, h);
    let zo = tape.slice(z, 2 * h, h);
    let zc = tape.slice(z, 3 * h, h);
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let cand = tape.tanh(zc);
    let fc = tape.mul(f, c_prev);
    let ic = tape.mul(i, cand);
    let c = tape.add(fc, ic);
    let tc = tape.tanh(c);
    let h_t = tape.mul(o, tc);
    (h_t, c)
}

/// A bidirectional LSTM: independent forward and backward directions whose
/// hidden states are concatenated per position.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        BiLstmParams {
            fwd: LstmParams::init(input_dim, hidden, rng),
            bwd: LstmParams::init(input_dim, hidden, rng),
        }
    }

    pub fn place(&self, tape: &mut Tape) -> BiLstmNodes {
        BiLstmNodes {
            fwd: self.fwd.place(tape),
            bwd: self.bwd.place(tape),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BiLstmNodes {
    pub fwd: LstmNodes,
    pub bwd: LstmNodes,
}

/// Runs both LSTM directions over a `[L×input_dim]` sequence; both start
/// from zero states. Output row `t` is `[h_fwd(t) ; h_bwd(t)]`, shape
/// `[L × 2·hidden]`.
pub fn bilstm(tape: &mut Tape, p: BiLstmNodes, e: NodeId) -> NodeId {
    let l = tape.value(e).rows();
    assert!(l >= 1, "bilstm: empty sequence");
    let h = p.fwd.hidden;
    assert_eq!(p.bwd.hidden, h, "bilstm: direction widths differ");

    let rows: Vec<NodeId> = (0..l).map(|t| tape.row(e, t)).collect();

    let mut fwd_h = Vec::with_capacity(l);
    let mut state_h = tape.leaf(Tensor::zeros(vec![h]));
    let mut state_c = tape.leaf(Tensor::zeros(vec![h]));
    for &e_t in &rows {
        let (nh, nc) = lstm_step(tape, p.fwd, e_t, state_h, state_c);
        fwd_h.push(nh);
        state_h = nh;
        state_c = nc;
    }

    let mut bwd_h = Vec::with_capacity(l);
    let mut state_h = tape.leaf(Tensor::zeros(vec![h]));
    let mut state_c = tape.leaf(Tensor::zeros(vec![h]));
    for t in (0..l).rev() {
        let (nh, nc) = lstm_step(tape, p.bwd, rows[t], state_h, state_c);
        bwd_h.push(nh);
        state_h = nh;
        state_c = nc;
    }
    bwd_h.reverse();

    let joined: Vec<NodeId> = (0..l)
        .map(|t| tape.concat(&[fwd_h[t], bwd_h[t]], 0))
        .collect();
    tape.stack_rows(&joined)
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted-dropout mask: each element survives with probability `1-rate`
/// and is scaled by `1/(1-rate)`, so the expected value is unchanged and
/// evaluation needs no rescaling.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| {
            if rng.random_range(0.0..1.0) < rate {
                0.0
            } else {
                1.0 / keep
            }
        })
        .collect()
}

/// Applies dropout to a node. A rate of zero is an exact no-op: the node is
/// returned unchanged, so evaluation paths are bit-identical to never having
/// had dropout at all.
pub fn dropout(tape: &mut Tape, x: NodeId, rate: f64, rng: &mut impl Rng) -> NodeId {
    if rate == 0.0 {
        return x;
    }
    let mask = dropout_mask(tape.value(x).len(), rate, rng);
    tape.apply_mask(x, mask)
}

// ---------------------------------------------------------------------------
// Convolutional downsampler

/// Parameters of the non-overlapping 1-D convolution that shortens long
/// streams to a fixed number of positions. The kernel width is tied to the
/// input length it was built for: `width = ceil(input_len / target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    /// `[width × dim × dim]`.
    pub weight: Tensor,
    /// `[dim]`.
    pub bias: Tensor,
    /// Learned row used for positions past the end of the input, `[dim]`.
    pub pad: Tensor,
}

impl Conv1dParams {
    pub fn init(input_len: usize, target: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let width = input_len.div_ceil(target);
        let w2 = xavier(width * dim, dim, rng);
        Conv1dParams {
            weight: Tensor::from_vec(vec![width, dim, dim], w2.data().to_vec()),
            bias: Tensor::zeros(vec![dim]),
            pad: Tensor::zeros(vec![dim]),
        }
    }

    pub fn width(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn place(&self, tape: &mut Tape) -> Conv1dNodes {
        Conv1dNodes {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
            pad: tape.leaf(self.pad.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conv1dNodes {
    pub weight: NodeId,
    pub bias: NodeId,
    pub pad: NodeId,
}

/// Shortens `x` `[L×dim]` to `[target×dim]` with the non-overlapping
/// convolution recorded on the tape.
pub fn conv1d_downsample(tape: &mut Tape, p: Conv1dNodes, x: NodeId, target: usize) -> NodeId {
    tape.conv1d_downsample(x, p.weight, p.bias, p.pad, target)
}
