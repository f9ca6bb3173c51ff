//! The complete classifier: embeddings per granularity, optional stream
//! downsampling, the shared sequence encoder, attention fusion of each
//! auxiliary view into the character view, and the softmax head.
//!
//! One `ModelParams` value owns every trainable tensor. A forward pass
//! places them on a caller-supplied tape (so a batch can share one tape)
//! and returns node ids for the probabilities and attention maps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encode::Granularity;
use crate::fusion::{attention_stream_with_queries, DropoutCtx, FusionNodes, FusionParams};
use crate::neural::{
    bilstm, conv1d_downsample, dropout, BiLstmNodes, BiLstmParams, Conv1dNodes, Conv1dParams,
    EmbeddingTable,
};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Which auxiliary views feed the classifier. The character view is always
/// on; with every flag off the model degrades to a plain character BiLSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFlags {
    pub radical: bool,
    pub wubi: bool,
    pub pinyin: bool,
}

impl StreamFlags {
    pub fn all() -> Self {
        StreamFlags {
            radical: true,
            wubi: true,
            pinyin: true,
        }
    }

    pub fn none() -> Self {
        StreamFlags {
            radical: false,
            wubi: false,
            pinyin: false,
        }
    }

    /// Enabled auxiliary granularities in their fixed order.
    pub fn aux(&self) -> Vec<Granularity> {
        let mut v = Vec::new();
        if self.radical {
            v.push(Granularity::Radical);
        }
        if self.wubi {
            v.push(Granularity::Wubi);
        }
        if self.pinyin {
            v.push(Granularity::Pinyin);
        }
        v
    }

    /// All granularities the model consumes, character first.
    pub fn enabled(&self) -> Vec<Granularity> {
        let mut v = vec![Granularity::Char];
        v.extend(self.aux());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding width; the encoder hidden size is half of it, so the
    /// encoded width equals the embedding width again. Must be even.
    pub dim: usize,
    pub classes: usize,
    pub streams: StreamFlags,
    /// Training-time dropout rate on encoder outputs and the feature vector.
    pub dropout: f64,
    /// Squash classifier scores through a sigmoid before the softmax.
    pub sigmoid_scores: bool,
    /// Streams longer than `downsample_threshold` ids are convolved down to
    /// `downsample_target` positions.
    pub downsample_target: usize,
    pub downsample_threshold: usize,
}

impl ModelConfig {
    pub fn hidden(&self) -> usize {
        self.dim / 2
    }

    /// Width of the concatenated feature vector feeding the classifier.
    pub fn feature_width(&self) -> usize {
        let aux = self.streams.aux().len();
        if aux == 0 {
            self.dim
        } else {
            aux * self.dim
        }
    }

    fn validate(&self) {
        assert!(
            self.dim >= 2 && self.dim.is_multiple_of(2),
            "embedding width must be even and at least 2, got {}",
            self.dim
        );
        assert!(self.classes >= 2, "need at least 2 classes");
        assert!(
            (0.0..1.0).contains(&self.dropout),
            "dropout must be in [0, 1)"
        );
        assert!(
            self.downsample_target >= 1,
            "downsample target must be >= 1"
        );
    }
}

/// Every trainable tensor, plus the stream geometry they were built for.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Ids-per-sample each granularity's stream carries, before any
    /// downsampling. Indexed by `Granularity::index()`.
    pub stream_lens: [usize; 4],
    pub embeddings: [Option<EmbeddingTable>; 4],
    pub encoder: BiLstmParams,
    pub fusion: Option<FusionParams>,
    pub downsamplers: [Option<Conv1dParams>; 4],
    /// `[feature_width × classes]`, no bias.
    pub classifier: Tensor,
}

impl ModelParams {
    /// Initializes all parameters from one seed. The creation order is
    /// fixed, so the same seed and geometry always produce the same model.
    pub fn init(
        config: ModelConfig,
        vocab_sizes: [usize; 4],
        stream_lens: [usize; 4],
        seed: u64,
    ) -> Self {
        config.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut embeddings: [Option<EmbeddingTable>; 4] = [None, None, None, None];
        for g in config.streams.enabled() {
            let gi = g.index();
            assert!(
                vocab_sizes[gi] >= 2,
                "vocabulary too small for {}",
                g.name()
            );
            embeddings[gi] = Some(EmbeddingTable::init(vocab_sizes[gi], config.dim, &mut rng));
        }
        let encoder = BiLstmParams::init(config.dim, config.hidden(), &mut rng);
        let fusion = if config.streams.aux().is_empty() {
            None
        } else {
            Some(FusionParams::init(config.dim, &mut rng))
        };
        let mut downsamplers: [Option<Conv1dParams>; 4] = [None, None, None, None];
        for g in config.streams.enabled() {
            let gi = g.index();
            assert!(stream_lens[gi] >= 1, "empty stream for {}", g.name());
            if stream_lens[gi] > config.downsample_threshold {
                downsamplers[gi] = Some(Conv1dParams::init(
                    stream_lens[gi],
                    config.downsample_target,
                    config.dim,
                    &mut rng,
                ));
            }
        }
        let classifier = crate::neural::xavier(config.feature_width(), config.classes, &mut rng);
        ModelParams {
            config,
            stream_lens,
            embeddings,
            encoder,
            fusion,
            downsamplers,
            classifier,
        }
    }

    /// Positions a granularity's stream actually occupies after optional
    /// downsampling.
    pub fn effective_len(&self, g: Granularity) -> usize {
        if self.downsamplers[g.index()].is_some() {
            self.config.downsample_target
        } else {
            self.stream_lens[g.index()]
        }
    }

    /// Named views of every tensor in a fixed, stable order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for g in self.config.streams.enabled() {
            let e = self.embeddings[g.index()].as_ref().unwrap();
            out.push((format!("embed.{}", g.name()), &e.weights));
        }
        out.push(("encoder.fwd.w".to_string(), &self.encoder.fwd.w));
        out.push(("encoder.fwd.b".to_string(), &self.encoder.fwd.b));
        out.push(("encoder.bwd.w".to_string(), &self.encoder.bwd.w));
        out.push(("encoder.bwd.b".to_string(), &self.encoder.bwd.b));
        if let Some(f) = &self.fusion {
            out.push(("fusion.w".to_string(), &f.w));
            out.push(("fusion.b".to_string(), &f.b));
        }
        for g in self.config.streams.enabled() {
            if let Some(c) = &self.downsamplers[g.index()] {
                out.push((format!("downsample.{}.weight", g.name()), &c.weight));
                out.push((format!("downsample.{}.bias", g.name()), &c.bias));
                out.push((format!("downsample.{}.pad", g.name()), &c.pad));
            }
        }
        out.push(("classifier.w".to_string(), &self.classifier));
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        // Enabled granularities ascend in index order, so iterating the
        // slots directly preserves the order `tensors()` uses.
        for (gi, slot) in self.embeddings.iter_mut().enumerate() {
            if let Some(e) = slot.as_mut() {
                let name = Granularity::ALL[gi].name();
                out.push((format!("embed.{name}"), &mut e.weights));
            }
        }
        out.push(("encoder.fwd.w".to_string(), &mut self.encoder.fwd.w));
        out.push(("encoder.fwd.b".to_string(), &mut self.encoder.fwd.b));
        out.push(("encoder.bwd.w".to_string(), &mut self.encoder.bwd.w));
        out.push(("encoder.bwd.b".to_string(), &mut self.encoder.bwd.b));
        if let Some(f) = self.fusion.as_mut() {
            out.push(("fusion.w".to_string(), &mut f.w));
            out.push(("fusion.b".to_string(), &mut f.b));
        }
        for (gi, slot) in self.downsamplers.iter_mut().enumerate() {
            if let Some(c) = slot.as_mut() {
                let name = Granularity::ALL[gi].name();
                out.push((format!("downsample.{name}.weight"), &mut c.weight));
                out.push((format!("downsample.{name}.bias"), &mut c.bias));
                out.push((format!("downsample.{name}.pad"), &mut c.pad));
            }
        }
        out.push(("classifier.w".to_string(), &mut self.classifier));
        out
    }

    /// Puts every parameter on the tape as a leaf.
    pub fn place(&self, tape: &mut Tape) -> PlacedModel {
        let mut order = Vec::new();
        let mut embeddings: [Option<NodeId>; 4] = [None; 4];
        for g in self.config.streams.enabled() {
            let gi = g.index();
            let id = tape.leaf(self.embeddings[gi].as_ref().unwrap().weights.clone());
            embeddings[gi] = Some(id);
            order.push((format!("embed.{}", g.name()), id));
        }
        let encoder = self.encoder.place(tape);
        order.push(("encoder.fwd.w".to_string(), encoder.fwd.w));
        order.push(("encoder.fwd.b".to_string(), encoder.fwd.b));
        order.push(("encoder.bwd.w".to_string(), encoder.bwd.w));
        order.push(("encoder.bwd.b".to_string(), encoder.bwd.b));
        let fusion = self.fusion.as_ref().map(|f| {
            let nodes = f.place(tape);
            order.push(("fusion.w".to_string(), nodes.w));
            order.push(("fusion.b".to_string(), nodes.b));
            nodes
        });
        let mut downsamplers: [Option<Conv1dNodes>; 4] = [None; 4];
        for g in self.config.streams.enabled() {
            let gi = g.index();
            if let Some(c) = &self.downsamplers[gi] {
                let nodes = c.place(tape);
                downsamplers[gi] = Some(nodes);
                order.push((format!("downsample.{}.weight", g.name()), nodes.weight));
                order.push((format!("downsample.{}.bias", g.name()), nodes.bias));
                order.push((format!("downsample.{}.pad", g.name()), nodes.pad));
            }
        }
        let classifier = tape.leaf(self.classifier.clone());
        order.push(("classifier.w".to_string(), classifier));
        PlacedModel {
            embeddings,
            encoder,
            fusion,
            downsamplers,
            classifier,
            order,
        }
    }

    /// Runs one sample through the placed model.
    pub fn forward(
        &self,
        tape: &mut Tape,
        placed: &PlacedModel,
        streams: &[Vec<usize>; 4],
        mode: Mode,
    ) -> Forward {
        let mut drop_ctx = match mode {
            Mode::Eval => None,
            Mode::Train(rng) => Some(DropoutCtx {
                rate: self.config.dropout,
                rng,
            }),
        };

        let mut views: [Option<NodeId>; 4] = [None; 4];
        for g in self.config.streams.enabled() {
            let gi = g.index();
            let ids = &streams[gi];
            assert_eq!(
                ids.len(),
                self.stream_lens[gi],
                "{} stream carries {} ids, model expects {}",
                g.name(),
                ids.len(),
                self.stream_lens[gi]
            );
            let mut e = tape.embed(placed.embeddings[gi].unwrap(), ids);
            if let Some(conv) = placed.downsamplers[gi] {
                e = conv1d_downsample(tape, conv, e, self.config.downsample_target);
            }
            views[gi] = Some(e);
        }

        let e_c = views[Granularity::Char.index()].unwrap();
        let y_c = bilstm(tape, placed.encoder, e_c);
        let y_c = match drop_ctx.as_mut() {
            Some(c) => dropout(tape, y_c, c.rate, c.rng),
            None => y_c,
        };

        let aux = self.config.streams.aux();
        let mut attention = Vec::with_capacity(aux.len());
        let mut stream_nodes = Vec::with_capacity(aux.len());
        let mut finals = Vec::with_capacity(aux.len());
        let last_c = self.effective_len(Granularity::Char) - 1;
        for g in aux {
            let out = attention_stream_with_queries(
                tape,
                placed.encoder,
                placed.fusion.unwrap(),
                e_c,
                y_c,
                views[g.index()].unwrap(),
                drop_ctx.as_mut(),
            );
            attention.push((g, out.weights));
            stream_nodes.push((g, out.encoded));
            finals.push(tape.row(out.encoded, last_c));
        }

        let features = if finals.is_empty() {
            tape.row(y_c, last_c)
        } else {
            tape.concat(&finals, 0)
        };
        let features = match drop_ctx.as_mut() {
            Some(c) => dropout(tape, features, c.rate, c.rng),
            None => features,
        };

        let raw = tape.linear(features, placed.classifier, None);
        let scores = if self.config.sigmoid_scores {
            tape.sigmoid(raw)
        } else {
            raw
        };
        let probs = tape.softmax(scores);
        Forward {
            probs,
            scores,
            attention,
            streams: stream_nodes,
        }
    }

    /// Classifies one encoded sample on a private tape.
    pub fn predict(&self, streams: &[Vec<usize>; 4]) -> Prediction {
        let mut tape = Tape::new();
        let placed = self.place(&mut tape);
        let fwd = self.forward(&mut tape, &placed, streams, Mode::Eval);
        let probs = tape.value(fwd.probs).data().to_vec();
        let class = argmax(&probs);
        let attention = fwd
            .attention
            .iter()
            .map(|&(g, id)| (g, tape.value(id).clone()))
            .collect();
        Prediction {
            class,
            probs,
            attention,
        }
    }
}

/// Highest-probability index; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Forward-pass behavior: evaluation is deterministic; training draws
/// dropout masks from the supplied generator.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Node ids of the placed parameters, in [`ModelParams::tensors`] order.
pub struct PlacedModel {
    pub embeddings: [Option<NodeId>; 4],
    pub encoder: BiLstmNodes,
    pub fusion: Option<FusionNodes>,
    pub downsamplers: [Option<Conv1dNodes>; 4],
    pub classifier: NodeId,
    pub order: Vec<(String, NodeId)>,
}

/// Node ids produced by one forward pass.
pub struct Forward {
    /// Class probabilities, `[classes]`.
    pub probs: NodeId,
    /// Classifier scores before the softmax.
    pub scores: NodeId,
    /// Attention weights per auxiliary stream, `[l_aux × l_c]` each.
    pub attention: Vec<(Granularity, NodeId)>,
    /// Re-encoded output sequence per auxiliary stream, `[l_c × dim]` each.
    pub streams: Vec<(Granularity, NodeId)>,
}

/// Evaluation result for one sample.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
    pub attention: Vec<(Granularity, Tensor)>,
}
