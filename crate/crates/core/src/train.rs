//! The training loop: shuffled mini-batches, averaged batch gradients, Adam
//! updates, and per-epoch metrics.
//!
//! Determinism contract: one seed drives initialization-independent parts of
//! a run — the epoch shuffles and one dropout seed per sample, drawn in a
//! fixed order. Worker threads only parallelize gradient computation inside
//! a batch; the batch is split into fixed-size chunks derived from the
//! configured thread count and partial results are combined in chunk order,
//! so a given configuration always produces bit-identical parameters, logs,
//! and checkpoints.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::{Adam, AdamConfig};
use crate::encode::EncodedSample;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::model::{argmax, Mode, ModelParams};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Worker threads per batch. Part of the determinism domain: changing it
    /// reorders floating-point accumulation.
    pub threads: usize,
    /// Stop after the first epoch whose training accuracy reaches this
    /// value. `None` always runs the full epoch budget.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            seed: 42,
            adam: AdamConfig::default(),
            threads: 1,
            target_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl EpochStats {
    fn from_parts(epoch: usize, loss: f64, cm: &ConfusionMatrix) -> Self {
        EpochStats {
            epoch,
            loss,
            accuracy: cm.accuracy(),
            macro_precision: cm.macro_precision(),
            macro_recall: cm.macro_recall(),
            macro_f1: cm.macro_f1(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    pub train: Vec<EpochStats>,
    pub dev: Vec<EpochStats>,
}

/// One row of the training log:
/// `epoch<TAB>split<TAB>loss<TAB>accuracy<TAB>macroP<TAB>macroR<TAB>macroF1`.
pub fn log_line(stats: &EpochStats, split: &str) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        stats.epoch,
        split,
        stats.loss,
        stats.accuracy,
        stats.macro_precision,
        stats.macro_recall,
        stats.macro_f1
    )
}

fn check_finite(loss: f64, epoch: usize, batch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "loss became non-finite in epoch {epoch}, batch {batch}; \
             lower the learning rate or check the input data"
        )))
    }
}

/// Per-worker result: gradients summed over the chunk's samples, plus each
/// sample's loss and prediction in chunk order.
struct ChunkOut {
    grads: Vec<Tensor>,
    records: Vec<(f64, usize, usize)>,
}

fn run_chunk(params: &ModelParams, work: &[(&EncodedSample, u64)]) -> ChunkOut {
    let mut tape = Tape::new();
    let placed = params.place(&mut tape);
    let mut records = Vec::with_capacity(work.len());
    let mut loss_sum: Option<NodeId> = None;
    for (sample, seed) in work {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let fwd = params.forward(&mut tape, &placed, &sample.streams, Mode::Train(&mut rng));
        let loss = tape.cross_entropy(fwd.probs, sample.label);
        records.push((
            tape.value(loss).item(),
            sample.label,
            argmax(tape.value(fwd.probs).data()),
        ));
        loss_sum = Some(match loss_sum {
            Some(acc) => tape.add(acc, loss),
            None => loss,
        });
    }
    let grads = tape.backward(loss_sum.expect("chunk cannot be empty"));
    ChunkOut {
        grads: placed
            .order
            .iter()
            .map(|&(_, id)| grads.wrt_or_zeros(&tape, id))
            .collect(),
        records,
    }
}

/// Trains in place. `on_epoch` runs after every epoch with the freshly
/// formatted log lines (train, then dev when a dev set is supplied) and the
/// current parameters, so callers can append to a log file and write
/// rolling checkpoints.
pub fn train(
    params: &mut ModelParams,
    data: &[EncodedSample],
    dev: Option<&[EncodedSample]>,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&[String], &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    assert!(config.batch_size >= 1, "batch size must be at least 1");
    assert!(config.threads >= 1, "need at least one thread");
    assert!(!data.is_empty(), "no training samples");
    for s in data {
        assert!(
            s.label < params.config.classes,
            "label {} outside the {}-class model",
            s.label,
            params.config.classes
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.adam);
    let mut outcome = TrainOutcome::default();
    let mut indices: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        let mut cm = ConfusionMatrix::new(params.config.classes);
        let mut loss_total = 0.0;

        for (batch_idx, batch) in indices.chunks(config.batch_size).enumerate() {
            // One dropout seed per sample, drawn before any parallel work so
            // the main generator advances identically for every thread count.
            let work: Vec<(&EncodedSample, u64)> = batch
                .iter()
                .map(|&i| (&data[i], rng.random::<u64>()))
                .collect();

            let chunk_size = work.len().div_ceil(config.threads);
            let chunks: Vec<&[(&EncodedSample, u64)]> = work.chunks(chunk_size).collect();
            let outs: Vec<ChunkOut> = if chunks.len() == 1 {
                vec![run_chunk(params, chunks[0])]
            } else {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = chunks
                        .iter()
                        .map(|&c| {
                            let p: &ModelParams = params;
                            scope.spawn(move || run_chunk(p, c))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("training worker panicked"))
                        .collect()
                })
            };

            let mut batch_loss = 0.0;
            for out in &outs {
                for &(loss, gold, pred) in &out.records {
                    batch_loss += loss;
                    cm.record(gold, pred);
                }
            }
            check_finite(batch_loss, epoch, batch_idx + 1)?;
            loss_total += batch_loss;

            // Combine chunk gradient sums in chunk order, then divide once:
            // the update uses the mean gradient over the batch.
            let mut outs_iter = outs.into_iter();
            let mut total = outs_iter.next().unwrap().grads;
            for out in outs_iter {
                for (acc, g) in total.iter_mut().zip(out.grads.iter()) {
                    acc.add_assign(g);
                }
            }
            let inv = 1.0 / work.len() as f64;
            for t in &mut total {
                for v in t.data_mut() {
                    *v *= inv;
                }
            }
            let mut named = params.tensors_mut();
            adam.step(&mut named, &total);
        }

        let stats = EpochStats::from_parts(epoch, loss_total / data.len() as f64, &cm);
        let mut lines = vec![log_line(&stats, "train")];
        outcome.train.push(stats);
        if let Some(dev_data) = dev {
            let (dev_loss, dev_cm) = evaluate(params, dev_data);
            let dev_stats = EpochStats::from_parts(epoch, dev_loss, &dev_cm);
            lines.push(log_line(&dev_stats, "dev"));
            outcome.dev.push(dev_stats);
        }
        on_epoch(&lines, params)?;
        if config.target_accuracy.is_some_and(|t| stats.accuracy >= t) {
            break;
        }
    }
    Ok(outcome)
}

/// Deterministic evaluation pass: mean loss and the confusion matrix.
pub fn evaluate(params: &ModelParams, data: &[EncodedSample]) -> (f64, ConfusionMatrix) {
    assert!(!data.is_empty(), "no evaluation samples");
    let mut cm = ConfusionMatrix::new(params.config.classes);
    let mut loss_sum = 0.0;
    // Fresh tape every few samples keeps memory flat on large corpora.
    for chunk in data.chunks(64) {
        let mut tape = Tape::new();
        let placed = params.place(&mut tape);
        for s in chunk {
            let fwd = params.forward(&mut tape, &placed, &s.streams, Mode::Eval);
            let loss = tape.cross_entropy(fwd.probs, s.label);
            loss_sum += tape.value(loss).item();
            cm.record(s.label, argmax(tape.value(fwd.probs).data()));
        }
    }
    (loss_sum / data.len() as f64, cm)
}
