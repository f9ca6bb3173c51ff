//! Cross-granularity attention fusion.
//!
//! Each auxiliary view (radicals, Wubi, Pinyin) is encoded with the shared
//! bidirectional LSTM and softly aligned against the encoded character
//! view: a relevance matrix of dot products is normalized per character
//! position, the auxiliary encodings are averaged under those weights, and
//! the result is projected together with the character embeddings into a
//! fused sequence that is encoded once more.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::neural::{bilstm, dropout, BiLstmNodes};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Projection applied to `[attended ; character embedding]` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// `[2·dim × dim]`.
    pub w: Tensor,
    /// `[dim]`.
    pub b: Tensor,
}

impl FusionParams {
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        FusionParams {
            w: crate::neural::xavier(2 * dim, dim, rng),
            b: Tensor::zeros(vec![dim]),
        }
    }

    pub fn place(&self, tape: &mut Tape) -> FusionNodes {
        FusionNodes {
            w: tape.leaf(self.w.clone()),
            b: tape.leaf(self.b.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FusionNodes {
    pub w: NodeId,
    pub b: NodeId,
}

/// Dot-product relevance of every auxiliary position against every
/// character position: `[l_aux × d] × [l_c × d] → [l_aux × l_c]`, entry
/// `(i, j)` being `y_aux[i] · y_c[j]`.
pub fn relevance(tape: &mut Tape, y_aux: NodeId, y_c: NodeId) -> NodeId {
    let y_c_t = tape.transpose(y_c);
    tape.matmul(y_aux, y_c_t)
}

/// Normalizes relevance scores into attention weights: each character
/// position's column becomes a distribution over auxiliary positions.
pub fn attention_weights(tape: &mut Tape, re: NodeId) -> NodeId {
    tape.softmax_columns(re)
}

/// Weighted average of auxiliary encodings for every character position:
/// `[l_aux × l_c]ᵀ × [l_aux × d] → [l_c × d]`.
pub fn attended_context(tape: &mut Tape, alpha: NodeId, y_aux: NodeId) -> NodeId {
    let alpha_t = tape.transpose(alpha);
    tape.matmul(alpha_t, y_aux)
}

/// Projects `[attended ; e_c]` rows back to the embedding width.
pub fn fuse_embeddings(tape: &mut Tape, att: NodeId, e_c: NodeId, f: FusionNodes) -> NodeId {
    let joined = tape.concat(&[att, e_c], 1);
    let projected = tape.matmul(joined, f.w);
    tape.add_row_bias(projected, f.b)
}

/// Training-time dropout configuration threaded through stream assembly.
pub struct DropoutCtx<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

fn maybe_drop(tape: &mut Tape, x: NodeId, ctx: &mut Option<&mut DropoutCtx>) -> NodeId {
    match ctx {
        Some(c) => dropout(tape, x, c.rate, c.rng),
        None => x,
    }
}

/// One auxiliary stream's outputs.
#[derive(Debug, Clone, Copy)]
pub struct StreamOutput {
    /// Encoded fused sequence, `[l_c × 2·hidden]`.
    pub encoded: NodeId,
    /// Attention weights, `[l_aux × l_c]`, columns normalized.
    pub weights: NodeId,
}

/// Full pipeline for one auxiliary granularity: encode both views, attend,
/// fuse, re-encode. `enc` is the shared sequence encoder used for all three
/// passes. Pass a dropout context only when training.
pub fn attention_stream(
    tape: &mut Tape,
    enc: BiLstmNodes,
    fus: FusionNodes,
    e_c: NodeId,
    e_aux: NodeId,
    mut drop: Option<&mut DropoutCtx>,
) -> StreamOutput {
    let y_c = bilstm(tape, enc, e_c);
    let y_c = maybe_drop(tape, y_c, &mut drop);
    attention_stream_with_queries(tape, enc, fus, e_c, y_c, e_aux, drop)
}

/// Same as [`attention_stream`] but takes the encoded character view as an
/// input, so a forward pass over several streams encodes it exactly once.
pub fn attention_stream_with_queries(
    tape: &mut Tape,
    enc: BiLstmNodes,
    fus: FusionNodes,
    e_c: NodeId,
    y_c: NodeId,
    e_aux: NodeId,
    mut drop: Option<&mut DropoutCtx>,
) -> StreamOutput {
    let y_aux = bilstm(tape, enc, e_aux);
    let y_aux = maybe_drop(tape, y_aux, &mut drop);
    let re = relevance(tape, y_aux, y_c);
    let alpha = attention_weights(tape, re);
    let att = attended_context(tape, alpha, y_aux);
    let fused = fuse_embeddings(tape, att, e_c, fus);
    let y = bilstm(tape, enc, fused);
    let y = maybe_drop(tape, y, &mut drop);
    StreamOutput {
        encoded: y,
        weights: alpha,
    }
}
