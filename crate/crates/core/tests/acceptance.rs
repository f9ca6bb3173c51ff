//! Acceptance suite: one test per shipping criterion, each printing a
//! single `ACCEPTANCE <name>: PASS/FAIL` line (visible with
//! `cargo test -p moto-core --test acceptance -- --nocapture`).
//!
//! The reference values come from the straight-line scalar implementations
//! in `support`, from closed-form hand calculations, and from brute-force
//! recounts — never from the library code under test.

mod support;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use moto_core::adam::AdamConfig;
use moto_core::checkpoint;
use moto_core::corpus::Corpus;
use moto_core::encode::{Dicts, Featurizer, Granularity};
use moto_core::fusion::{
    attended_context, attention_stream, attention_weights, fuse_embeddings, relevance, FusionParams,
};
use moto_core::metrics::{f1_score, ConfusionMatrix};
use moto_core::model::{Mode, ModelConfig, ModelParams, StreamFlags};
use moto_core::neural::{bilstm, lstm_step, BiLstmParams, Conv1dParams, LstmParams};
use moto_core::tape::{NodeId, Tape};
use moto_core::tensor::Tensor;
use moto_core::train::{evaluate, train, TrainConfig};
use moto_core::vocab::Vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Prints the verdict line for one criterion and fails the test on FAIL.
fn report(tag: &str, outcome: Check) {
    match outcome {
        Ok(detail) => println!("ACCEPTANCE {tag}: PASS ({detail})"),
        Err(why) => {
            println!("ACCEPTANCE {tag}: FAIL ({why})");
            panic!("{tag}: {why}");
        }
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn load_toy_dicts() -> Dicts {
    let d = data_dir().join("dicts");
    Dicts::load(
        &d.join("radical.tsv"),
        &d.join("wubi.tsv"),
        &d.join("pinyin.tsv"),
    )
    .expect("bundled dictionaries load")
}

fn rand_tensor(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::from_vec(shape.to_vec(), data)
}

fn to_mat(t: &Tensor) -> support::Mat {
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

fn bits_equal(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

// ---------------------------------------------------------------------------
// Criterion: analytic gradients match central differences for every layer.

const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 20;

/// Builds the graph for one layer check: places every input tensor as a
/// leaf (returned in input order) and returns the scalar loss node.
type Builder<'a> = dyn Fn(&mut Tape, &[Tensor]) -> (Vec<NodeId>, NodeId) + 'a;

struct GradSuite {
    checked: usize,
    layers: usize,
    worst: f64,
    failures: Vec<String>,
}

impl GradSuite {
    fn new() -> Self {
        GradSuite {
            checked: 0,
            layers: 0,
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    fn loss_value(build: &Builder, inputs: &[Tensor]) -> f64 {
        let mut tape = Tape::new();
        let (_, loss) = build(&mut tape, inputs);
        tape.value(loss).item()
    }

    /// Checks every coordinate of every input of one layer instance.
    fn check(&mut self, name: &str, inputs: &[Tensor], build: &Builder) {
        let mut tape = Tape::new();
        let (leaves, loss) = build(&mut tape, inputs);
        assert_eq!(leaves.len(), inputs.len(), "{name}: builder contract");
        let grads = tape.backward(loss);
        for (k, input) in inputs.iter().enumerate() {
            let analytic = grads.wrt_or_zeros(&tape, leaves[k]);
            for j in 0..input.len() {
                let mut plus = inputs.to_vec();
                plus[k].data_mut()[j] += GRAD_H;
                let mut minus = inputs.to_vec();
                minus[k].data_mut()[j] -= GRAD_H;
                let numeric = (Self::loss_value(build, &plus) - Self::loss_value(build, &minus))
                    / (2.0 * GRAD_H);
                let a = analytic.data()[j];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                self.checked += 1;
                self.worst = self.worst.max(rel);
                if rel > GRAD_TOL {
                    self.failures.push(format!(
                        "{name}: input {k} coordinate {j}: analytic {a:e}, \
                         numeric {numeric:e}, relative error {rel:e}"
                    ));
                }
            }
        }
    }
}

/// Weights that turn a tensor output into a non-degenerate scalar probe.
fn probe(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.25..1.75)).collect()
}

#[test]
fn layer_gradients_match_numeric_derivatives() {
    let started = Instant::now();
    let mut suite = GradSuite::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d2c_5680);

    // Elementwise and shape ops. Each closure places its inputs and probes
    // the output into a scalar so all coordinates get distinct cotangents.
    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [
            rand_tensor(&[2, 3], 2.0, &mut rng),
            rand_tensor(&[2, 3], 2.0, &mut rng),
        ];
        suite.check("add", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.add(a, b);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [
            rand_tensor(&[2, 3], 2.0, &mut rng),
            rand_tensor(&[2, 3], 2.0, &mut rng),
        ];
        suite.check("mul", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.mul(a, b);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [rand_tensor(&[2, 3], 2.0, &mut rng)];
        suite.check("scale", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.scale(x, 1.75);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [rand_tensor(&[2, 3], 3.0, &mut rng)];
        suite.check("sigmoid", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.sigmoid(x);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [rand_tensor(&[2, 3], 3.0, &mut rng)];
        suite.check("tanh", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.tanh(x);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(4, &mut rng);
        let inputs = [
            rand_tensor(&[2, 3], 1.5, &mut rng),
            rand_tensor(&[3, 2], 1.5, &mut rng),
        ];
        suite.check("matmul", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.matmul(a, b);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(6, &mut rng);
        let inputs = [rand_tensor(&[3, 2], 2.0, &mut rng)];
        suite.check("transpose", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.transpose(x);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(4, &mut rng);
        let inputs = [
            rand_tensor(&[3], 1.5, &mut rng),
            rand_tensor(&[3, 4], 1.5, &mut rng),
            rand_tensor(&[4], 1.5, &mut rng),
        ];
        suite.check("linear-vector", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let w = tape.leaf(ins[1].clone());
            let b = tape.leaf(ins[2].clone());
            let y = tape.linear(x, w, Some(b));
            let m = tape.apply_mask(y, p.clone());
            (vec![x, w, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    // The affine map for matrix inputs, exactly as the fusion projection
    // computes it.
    for _ in 0..GRAD_INSTANCES {
        let p = probe(8, &mut rng);
        let inputs = [
            rand_tensor(&[2, 3], 1.5, &mut rng),
            rand_tensor(&[3, 4], 1.5, &mut rng),
            rand_tensor(&[4], 1.5, &mut rng),
        ];
        suite.check("matmul-row-bias", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let w = tape.leaf(ins[1].clone());
            let b = tape.leaf(ins[2].clone());
            let xw = tape.matmul(x, w);
            let y = tape.add_row_bias(xw, b);
            let m = tape.apply_mask(y, p.clone());
            (vec![x, w, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(12, &mut rng);
        let inputs = [
            rand_tensor(&[3, 4], 2.0, &mut rng),
            rand_tensor(&[4], 2.0, &mut rng),
        ];
        suite.check("add-row-bias", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.add_row_bias(x, b);
            let m = tape.apply_mask(y, p.clone());
            (vec![x, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(9, &mut rng);
        let inputs = [
            rand_tensor(&[2, 3], 2.0, &mut rng),
            rand_tensor(&[1, 3], 2.0, &mut rng),
        ];
        suite.check("concat-rows", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.concat(&[a, b], 0);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(10, &mut rng);
        let inputs = [
            rand_tensor(&[2, 2], 2.0, &mut rng),
            rand_tensor(&[2, 3], 2.0, &mut rng),
        ];
        suite.check("concat-columns", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let y = tape.concat(&[a, b], 1);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(3, &mut rng);
        let inputs = [rand_tensor(&[6], 2.0, &mut rng)];
        suite.check("slice", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.slice(x, 1, 3);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(4, &mut rng);
        let inputs = [rand_tensor(&[3, 4], 2.0, &mut rng)];
        suite.check("row", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.row(x, 1);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(12, &mut rng);
        let inputs = [
            rand_tensor(&[4], 2.0, &mut rng),
            rand_tensor(&[4], 2.0, &mut rng),
            rand_tensor(&[4], 2.0, &mut rng),
        ];
        suite.check("stack-rows", &inputs, &|tape, ins| {
            let a = tape.leaf(ins[0].clone());
            let b = tape.leaf(ins[1].clone());
            let c = tape.leaf(ins[2].clone());
            let y = tape.stack_rows(&[a, b, c]);
            let m = tape.apply_mask(y, p.clone());
            (vec![a, b, c], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(5, &mut rng);
        let inputs = [rand_tensor(&[5], 3.0, &mut rng)];
        suite.check("softmax", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.softmax(x);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let p = probe(12, &mut rng);
        let inputs = [rand_tensor(&[3, 4], 3.0, &mut rng)];
        suite.check("softmax-columns", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.softmax_columns(x);
            let m = tape.apply_mask(y, p.clone());
            (vec![x], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let inputs = [rand_tensor(&[2, 3], 2.0, &mut rng)];
        suite.check("sum", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            (vec![x], tape.sum(x))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let inputs = [rand_tensor(&[7], 2.0, &mut rng)];
        suite.check("mean", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            (vec![x], tape.mean(x))
        });
    }
    suite.layers += 1;

    // Lookup of repeated ids: gradients must accumulate per table row.
    for _ in 0..GRAD_INSTANCES {
        let p = probe(12, &mut rng);
        let inputs = [rand_tensor(&[5, 3], 1.5, &mut rng)];
        suite.check("embedding-lookup", &inputs, &|tape, ins| {
            let table = tape.leaf(ins[0].clone());
            let y = tape.embed(table, &[0, 2, 2, 4]);
            let m = tape.apply_mask(y, p.clone());
            (vec![table], tape.sum(m))
        });
    }
    suite.layers += 1;

    // The dropout primitive: a fixed mask with dropped and rescaled slots.
    for _ in 0..GRAD_INSTANCES {
        let mask = vec![2.0, 0.0, 2.0, 2.0, 0.0, 2.0, 2.0, 2.0];
        let inputs = [rand_tensor(&[2, 4], 2.0, &mut rng)];
        suite.check("apply-mask", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let y = tape.apply_mask(x, mask.clone());
            (vec![x], tape.sum(y))
        });
    }
    suite.layers += 1;

    // Downsampler with one padded position (L=5, target=2, kernel width 3).
    for _ in 0..GRAD_INSTANCES {
        let p = probe(4, &mut rng);
        let inputs = [
            rand_tensor(&[5, 2], 1.5, &mut rng),
            rand_tensor(&[3, 2, 2], 1.5, &mut rng),
            rand_tensor(&[2], 1.5, &mut rng),
            rand_tensor(&[2], 1.5, &mut rng),
        ];
        suite.check("downsample-conv", &inputs, &|tape, ins| {
            let x = tape.leaf(ins[0].clone());
            let w = tape.leaf(ins[1].clone());
            let b = tape.leaf(ins[2].clone());
            let pad = tape.leaf(ins[3].clone());
            let y = tape.conv1d_downsample(x, w, b, pad, 2);
            let m = tape.apply_mask(y, p.clone());
            (vec![x, w, b, pad], tape.sum(m))
        });
    }
    suite.layers += 1;

    for _ in 0..GRAD_INSTANCES {
        let inputs = [rand_tensor(&[4], 2.0, &mut rng)];
        suite.check("softmax-cross-entropy", &inputs, &|tape, ins| {
            let logits = tape.leaf(ins[0].clone());
            let probs = tape.softmax(logits);
            (vec![logits], tape.cross_entropy(probs, 2))
        });
    }
    suite.layers += 1;

    // The exact classifier head: sigmoid-squashed scores, then softmax and
    // the log loss.
    for _ in 0..GRAD_INSTANCES {
        let inputs = [rand_tensor(&[4], 2.5, &mut rng)];
        suite.check("classifier-head", &inputs, &|tape, ins| {
            let scores = tape.leaf(ins[0].clone());
            let squashed = tape.sigmoid(scores);
            let probs = tape.softmax(squashed);
            (vec![scores], tape.cross_entropy(probs, 1))
        });
    }
    suite.layers += 1;

    // One recurrent step: all gates, both states.
    for _ in 0..GRAD_INSTANCES {
        let ph = probe(2, &mut rng);
        let pc = probe(2, &mut rng);
        let inputs = [
            rand_tensor(&[5, 8], 0.8, &mut rng),
            rand_tensor(&[8], 0.8, &mut rng),
            rand_tensor(&[3], 1.5, &mut rng),
            rand_tensor(&[2], 1.0, &mut rng),
            rand_tensor(&[2], 1.0, &mut rng),
        ];
        suite.check("lstm-step", &inputs, &|tape, ins| {
            let nodes = LstmParams {
                w: ins[0].clone(),
                b: ins[1].clone(),
                hidden: 2,
            }
            .place(tape);
            let e = tape.leaf(ins[2].clone());
            let hp = tape.leaf(ins[3].clone());
            let cp = tape.leaf(ins[4].clone());
            let (h, c) = lstm_step(tape, nodes, e, hp, cp);
            let hm = tape.apply_mask(h, ph.clone());
            let cm = tape.apply_mask(c, pc.clone());
            let hs = tape.sum(hm);
            let cs = tape.sum(cm);
            let loss = tape.add(hs, cs);
            (vec![nodes.w, nodes.b, e, hp, cp], loss)
        });
    }
    suite.layers += 1;

    // Whole bidirectional encoder over a short sequence.
    for _ in 0..GRAD_INSTANCES {
        let p = probe(16, &mut rng);
        let inputs = [
            rand_tensor(&[5, 8], 0.8, &mut rng),
            rand_tensor(&[8], 0.8, &mut rng),
            rand_tensor(&[5, 8], 0.8, &mut rng),
            rand_tensor(&[8], 0.8, &mut rng),
            rand_tensor(&[4, 3], 1.5, &mut rng),
        ];
        suite.check("bilstm", &inputs, &|tape, ins| {
            let nodes = BiLstmParams {
                fwd: LstmParams {
                    w: ins[0].clone(),
                    b: ins[1].clone(),
                    hidden: 2,
                },
                bwd: LstmParams {
                    w: ins[2].clone(),
                    b: ins[3].clone(),
                    hidden: 2,
                },
            }
            .place(tape);
            let e = tape.leaf(ins[4].clone());
            let y = bilstm(tape, nodes, e);
            let m = tape.apply_mask(y, p.clone());
            (
                vec![nodes.fwd.w, nodes.fwd.b, nodes.bwd.w, nodes.bwd.b, e],
                tape.sum(m),
            )
        });
    }
    suite.layers += 1;

    // Full auxiliary stream: encode, attend, fuse, re-encode.
    for _ in 0..GRAD_INSTANCES {
        let p = probe(12, &mut rng);
        let inputs = [
            rand_tensor(&[6, 8], 0.8, &mut rng),
            rand_tensor(&[8], 0.8, &mut rng),
            rand_tensor(&[6, 8], 0.8, &mut rng),
            rand_tensor(&[8], 0.8, &mut rng),
            rand_tensor(&[8, 4], 0.8, &mut rng),
            rand_tensor(&[4], 0.8, &mut rng),
            rand_tensor(&[3, 4], 1.2, &mut rng),
            rand_tensor(&[2, 4], 1.2, &mut rng),
        ];
        suite.check("attention-stream", &inputs, &|tape, ins| {
            let enc = BiLstmParams {
                fwd: LstmParams {
                    w: ins[0].clone(),
                    b: ins[1].clone(),
                    hidden: 2,
                },
                bwd: LstmParams {
                    w: ins[2].clone(),
                    b: ins[3].clone(),
                    hidden: 2,
                },
            }
            .place(tape);
            let fus = FusionParams {
                w: ins[4].clone(),
                b: ins[5].clone(),
            }
            .place(tape);
            let e_c = tape.leaf(ins[6].clone());
            let e_aux = tape.leaf(ins[7].clone());
            let out = attention_stream(tape, enc, fus, e_c, e_aux, None);
            let m = tape.apply_mask(out.encoded, p.clone());
            (
                vec![
                    enc.fwd.w, enc.fwd.b, enc.bwd.w, enc.bwd.b, fus.w, fus.b, e_c, e_aux,
                ],
                tape.sum(m),
            )
        });
    }
    suite.layers += 1;

    // End to end: every parameter of the assembled classifier, checked on
    // a sampled subset of coordinates per tensor.
    let model_config = ModelConfig {
        dim: 4,
        classes: 3,
        streams: StreamFlags::all(),
        dropout: 0.0,
        sigmoid_scores: true,
        downsample_target: 2,
        downsample_threshold: 2,
    };
    let model_loss = |params: &ModelParams, streams: &[Vec<usize>; 4], gold: usize| -> f64 {
        let mut tape = Tape::new();
        let placed = params.place(&mut tape);
        let fwd = params.forward(&mut tape, &placed, streams, Mode::Eval);
        let loss = tape.cross_entropy(fwd.probs, gold);
        tape.value(loss).item()
    };
    for instance in 0..GRAD_INSTANCES {
        let params = ModelParams::init(
            model_config.clone(),
            [8; 4],
            [3, 4, 2, 3],
            900 + instance as u64,
        );
        let streams: [Vec<usize>; 4] = [
            (0..3).map(|_| rng.random_range(0..8)).collect(),
            (0..4).map(|_| rng.random_range(0..8)).collect(),
            (0..2).map(|_| rng.random_range(0..8)).collect(),
            (0..3).map(|_| rng.random_range(0..8)).collect(),
        ];
        let gold = instance % 3;

        let mut tape = Tape::new();
        let placed = params.place(&mut tape);
        let fwd = params.forward(&mut tape, &placed, &streams, Mode::Eval);
        let loss = tape.cross_entropy(fwd.probs, gold);
        let grads = tape.backward(loss);

        for (k, (name, tensor)) in params.tensors().iter().enumerate() {
            let analytic = grads.wrt_or_zeros(&tape, placed.order[k].1);
            let len = tensor.len();
            let coords: Vec<usize> = if len <= 10 {
                (0..len).collect()
            } else {
                (0..10).map(|_| rng.random_range(0..len)).collect()
            };
            for j in coords {
                let eval = |delta: f64| {
                    let mut moved = params.clone();
                    moved.tensors_mut()[k].1.data_mut()[j] += delta;
                    model_loss(&moved, &streams, gold)
                };
                let numeric = (eval(GRAD_H) - eval(-GRAD_H)) / (2.0 * GRAD_H);
                let a = analytic.data()[j];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                suite.checked += 1;
                suite.worst = suite.worst.max(rel);
                if rel > GRAD_TOL {
                    suite.failures.push(format!(
                        "whole-model: {name} coordinate {j}: analytic {a:e}, \
                         numeric {numeric:e}, relative error {rel:e}"
                    ));
                }
            }
        }
    }
    suite.layers += 1;

    let elapsed = started.elapsed();
    let outcome = if !suite.failures.is_empty() {
        Err(format!(
            "{} of {} coordinate checks off by more than {GRAD_TOL:e}; first: {}",
            suite.failures.len(),
            suite.checked,
            suite.failures[0]
        ))
    } else if elapsed > Duration::from_secs(120) {
        Err(format!("suite took {elapsed:.1?}, budget is 120s"))
    } else {
        Ok(format!(
            "{} coordinates across {} layer families, {GRAD_INSTANCES} instances each, \
             worst relative error {:.2e}, {elapsed:.1?}",
            suite.checked, suite.layers, suite.worst
        ))
    };
    report("layer-gradients", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: the attention chain reproduces the reference formulas.

#[test]
fn attention_chain_matches_reference_formulas() {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(0x51f1);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let outcome = (|| -> Check {
        for l_aux in 1..=3usize {
            for l_c in 1..=3usize {
                for dim in [2usize, 4] {
                    for _rep in 0..2 {
                        let y_aux = rand_tensor(&[l_aux, dim], 1.5, &mut rng);
                        let y_c = rand_tensor(&[l_c, dim], 1.5, &mut rng);
                        let e_c = rand_tensor(&[l_c, dim], 1.5, &mut rng);
                        let w = rand_tensor(&[2 * dim, dim], 1.0, &mut rng);
                        let b = rand_tensor(&[dim], 1.0, &mut rng);

                        let mut tape = Tape::new();
                        let n_aux = tape.leaf(y_aux.clone());
                        let n_c = tape.leaf(y_c.clone());
                        let n_ec = tape.leaf(e_c.clone());
                        let fus = FusionParams {
                            w: w.clone(),
                            b: b.clone(),
                        }
                        .place(&mut tape);
                        let re = relevance(&mut tape, n_aux, n_c);
                        let alpha = attention_weights(&mut tape, re);
                        let att = attended_context(&mut tape, alpha, n_aux);
                        let fused = fuse_embeddings(&mut tape, att, n_ec, fus);

                        let ref_re = support::relevance(&to_mat(&y_aux), &to_mat(&y_c));
                        let ref_alpha = support::column_softmax(&ref_re);
                        let ref_att = support::attend(&ref_alpha, &to_mat(&y_aux));
                        let ref_fused =
                            support::fuse(&ref_att, &to_mat(&e_c), &to_mat(&w), b.data());

                        for (stage, lib, reference) in [
                            ("relevance", tape.value(re), &ref_re),
                            ("weights", tape.value(alpha), &ref_alpha),
                            ("attended", tape.value(att), &ref_att),
                            ("fused", tape.value(fused), &ref_fused),
                        ] {
                            let diff = support::max_abs_diff(&to_mat(lib), reference);
                            worst = worst.max(diff);
                            if diff > TOL {
                                return Err(format!(
                                    "stage {stage} (l_aux={l_aux}, l_c={l_c}, dim={dim}) \
                                     differs from the reference by {diff:e}"
                                ));
                            }
                        }
                        cases += 1;
                    }
                }
            }
        }
        Ok(format!(
            "{cases} cases, all four stages within {TOL:e} of the scalar reference \
             (worst {worst:.2e})"
        ))
    })();
    report("attention-reference", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: attention weights are column distributions.

#[test]
fn attention_columns_are_normalized() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11a);
    let mut worst = 0.0f64;
    let outcome = (|| -> Check {
        // Raw scores across a wide magnitude range, including values that
        // would overflow a naive exponential at much larger scales.
        for case in 0..200 {
            let rows = rng.random_range(1..=8);
            let cols = rng.random_range(1..=8);
            let scale = [0.5, 3.0, 30.0][case % 3];
            let re = rand_tensor(&[rows, cols], scale, &mut rng);
            let mut tape = Tape::new();
            let n = tape.leaf(re);
            let alpha = attention_weights(&mut tape, n);
            let v = tape.value(alpha);
            for j in 0..cols {
                let sum: f64 = (0..rows).map(|i| v.at2(i, j)).sum();
                let err = (sum - 1.0).abs();
                worst = worst.max(err);
                if err > TOL {
                    return Err(format!(
                        "case {case} ({rows}x{cols}, scale {scale}): column {j} \
                         sums to {sum}, off by {err:e}"
                    ));
                }
            }
        }
        // The same invariant on weights produced inside the full stream.
        for seed in 0..20u64 {
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            let enc = BiLstmParams::init(4, 2, &mut prng);
            let fus = FusionParams::init(4, &mut prng);
            let mut tape = Tape::new();
            let enc_n = enc.place(&mut tape);
            let fus_n = fus.place(&mut tape);
            let e_c = rand_tensor(&[3, 4], 1.5, &mut prng);
            let e_aux = rand_tensor(&[5, 4], 1.5, &mut prng);
            let e_c = tape.leaf(e_c);
            let e_aux = tape.leaf(e_aux);
            let out = attention_stream(&mut tape, enc_n, fus_n, e_c, e_aux, None);
            let v = tape.value(out.weights);
            for j in 0..v.cols() {
                let sum: f64 = (0..v.rows()).map(|i| v.at2(i, j)).sum();
                let err = (sum - 1.0).abs();
                worst = worst.max(err);
                if err > TOL {
                    return Err(format!(
                        "stream seed {seed}: column {j} sums to {sum}, off by {err:e}"
                    ));
                }
            }
        }
        Ok(format!(
            "220 weight matrices, every column within {TOL:e} of 1 (worst {worst:.2e})"
        ))
    })();
    report("attention-normalization", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: the recurrent step matches a scalar reference.

#[test]
fn lstm_matches_scalar_reference() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0x757e);
    let outcome = (|| -> Check {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for input_dim in 1..=4usize {
            for hidden in 1..=3usize {
                for _rep in 0..3 {
                    let w = rand_tensor(&[input_dim + hidden, 4 * hidden], 1.2, &mut rng);
                    let b = rand_tensor(&[4 * hidden], 1.2, &mut rng);
                    let e = rand_tensor(&[input_dim], 1.5, &mut rng);
                    let h_prev = rand_tensor(&[hidden], 1.0, &mut rng);
                    let c_prev = rand_tensor(&[hidden], 1.0, &mut rng);

                    let mut tape = Tape::new();
                    let nodes = LstmParams {
                        w: w.clone(),
                        b: b.clone(),
                        hidden,
                    }
                    .place(&mut tape);
                    let ne = tape.leaf(e.clone());
                    let nh = tape.leaf(h_prev.clone());
                    let nc = tape.leaf(c_prev.clone());
                    let (h, c) = lstm_step(&mut tape, nodes, ne, nh, nc);

                    let (ref_h, ref_c) = support::lstm_step(
                        &to_mat(&w),
                        b.data(),
                        hidden,
                        e.data(),
                        h_prev.data(),
                        c_prev.data(),
                    );
                    for (lib, reference, what) in
                        [(h, &ref_h, "hidden state"), (c, &ref_c, "cell state")]
                    {
                        for (j, (&got, &want)) in tape
                            .value(lib)
                            .data()
                            .iter()
                            .zip(reference.iter())
                            .enumerate()
                        {
                            let diff = (got - want).abs();
                            worst = worst.max(diff);
                            if diff > TOL {
                                return Err(format!(
                                    "{what} coordinate {j} (input {input_dim}, hidden {hidden}): \
                                     library {got}, reference {want}, diff {diff:e}"
                                ));
                            }
                        }
                    }
                    cases += 1;
                }
            }
        }

        // Sequence level: the bidirectional encoder against the same
        // reference rolled over time.
        for seed in 0..5u64 {
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            let p = BiLstmParams::init(3, 2, &mut prng);
            let e = rand_tensor(&[4, 3], 1.5, &mut prng);
            let mut tape = Tape::new();
            let nodes = p.place(&mut tape);
            let ne = tape.leaf(e.clone());
            let y = bilstm(&mut tape, nodes, ne);
            let reference = support::bilstm(
                &to_mat(&p.fwd.w),
                p.fwd.b.data(),
                &to_mat(&p.bwd.w),
                p.bwd.b.data(),
                2,
                &to_mat(&e),
            );
            let diff = support::max_abs_diff(&to_mat(tape.value(y)), &reference);
            worst = worst.max(diff);
            if diff > TOL {
                return Err(format!(
                    "bidirectional sequence (seed {seed}) differs from the reference by {diff:e}"
                ));
            }
            cases += 1;
        }

        // Zero weights, biases, and starting state force exactly zero
        // states regardless of the input.
        let mut tape = Tape::new();
        let nodes = LstmParams {
            w: Tensor::zeros(vec![5, 8]),
            b: Tensor::zeros(vec![8]),
            hidden: 2,
        }
        .place(&mut tape);
        let e = tape.leaf(rand_tensor(&[3], 2.0, &mut rng));
        let zh = tape.leaf(Tensor::zeros(vec![2]));
        let zc = tape.leaf(Tensor::zeros(vec![2]));
        let (h, c) = lstm_step(&mut tape, nodes, e, zh, zc);
        if tape.value(h).data().iter().any(|&v| v != 0.0)
            || tape.value(c).data().iter().any(|&v| v != 0.0)
        {
            return Err("zero parameters and state did not give exactly zero outputs".into());
        }

        Ok(format!(
            "{cases} step and sequence cases within {TOL:e} (worst {worst:.2e}); \
             zero parameters give exactly zero states"
        ))
    })();
    report("lstm-reference", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: metric values match hand calculations and brute-force counts.

#[test]
fn metrics_match_reference_values_and_brute_force() {
    let outcome = (|| -> Check {
        // Hand-checked F1 values.
        for (p, r, want) in [(0.8346, 0.8287, 0.8316), (0.9671, 0.9605, 0.9638)] {
            let got = f1_score(p, r);
            if (got - want).abs() > 1e-4 {
                return Err(format!("f1({p}, {r}) = {got}, expected {want} within 1e-4"));
            }
        }

        // Brute-force recount over a skewed random stream: class 5 never
        // appears as gold (0/0 recall), class 6 is never predicted
        // (0/0 precision and an all-zero F1).
        const K: usize = 7;
        const N: usize = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(0xbf_f1);
        let mut pairs = Vec::with_capacity(N);
        let mut cm = ConfusionMatrix::new(K);
        for _ in 0..N {
            let g = match rng.random_range(0..6) {
                5 => 6,
                other => other,
            };
            let p = if rng.random_range(0..5) == 0 {
                g.min(5)
            } else {
                rng.random_range(0..6)
            };
            pairs.push((g, p));
            cm.record(g, p);
        }

        let mut correct = 0usize;
        let mut macro_p = 0.0;
        let mut macro_r = 0.0;
        let mut macro_f = 0.0;
        for c in 0..K {
            let tp = pairs.iter().filter(|&&(g, p)| g == c && p == c).count();
            let predicted = pairs.iter().filter(|&&(_, p)| p == c).count();
            let gold = pairs.iter().filter(|&&(g, _)| g == c).count();
            let precision = if predicted == 0 {
                0.0
            } else {
                tp as f64 / predicted as f64
            };
            let recall = if gold == 0 {
                0.0
            } else {
                tp as f64 / gold as f64
            };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            let m = cm.class_metrics(c);
            if m.precision != precision || m.recall != recall || m.f1 != f1 {
                return Err(format!(
                    "class {c}: library ({}, {}, {}) vs brute force \
                     ({precision}, {recall}, {f1})",
                    m.precision, m.recall, m.f1
                ));
            }
            macro_p += precision;
            macro_r += recall;
            macro_f += f1;
            correct += tp;
        }
        if cm.accuracy() != correct as f64 / N as f64 {
            return Err(format!(
                "accuracy {} differs from recount {}",
                cm.accuracy(),
                correct as f64 / N as f64
            ));
        }
        if cm.macro_precision() != macro_p / K as f64
            || cm.macro_recall() != macro_r / K as f64
            || cm.macro_f1() != macro_f / K as f64
        {
            return Err("macro averages differ from the brute-force recount".into());
        }
        Ok(format!(
            "hand-checked F1 pairs within 1e-4; per-class and macro metrics over \
             {N} samples, {K} classes equal the brute-force recount exactly"
        ))
    })();
    report("metrics-reference", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: the bundled corpus is learned quickly and stably.

#[test]
fn bundled_corpus_is_learned() {
    const SEEDS: u64 = 10;
    const MAX_EPOCHS: usize = 300;
    let outcome = (|| -> Check {
        let corpus = Corpus::load(&data_dir().join("toy/train.tsv"))
            .map_err(|e| format!("loading bundled corpus: {e}"))?;
        let feat = Featurizer::fit(&corpus, load_toy_dicts());
        let encoded = feat.encode_corpus(&corpus);
        if encoded.len() != 200 || corpus.labels.len() != 4 {
            return Err(format!(
                "bundled corpus has {} samples, {} labels; expected 200 and 4",
                encoded.len(),
                corpus.labels.len()
            ));
        }
        let vocab_sizes = Granularity::ALL.map(|g| feat.vocab(g).len());
        let config = ModelConfig {
            dim: 8,
            classes: 4,
            streams: StreamFlags::all(),
            dropout: 0.0,
            sigmoid_scores: true,
            downsample_target: 18,
            downsample_threshold: 64,
        };

        let started = Instant::now();
        let mut epochs_used = Vec::new();
        let mut monotone_runs = 0;
        for seed in 0..SEEDS {
            let mut params = ModelParams::init(config.clone(), vocab_sizes, feat.targets(), seed);
            let train_config = TrainConfig {
                epochs: MAX_EPOCHS,
                batch_size: 16,
                seed,
                adam: AdamConfig {
                    lr: 0.02,
                    ..AdamConfig::default()
                },
                threads: 1,
                target_accuracy: Some(1.0),
            };
            let outcome = train(&mut params, &encoded, None, &train_config, &mut |_, _| {
                Ok(())
            })
            .map_err(|e| format!("seed {seed}: {e}"))?;

            let last = outcome.train.last().expect("at least one epoch ran");
            if last.accuracy < 1.0 {
                return Err(format!(
                    "seed {seed}: accuracy {} after {} epochs, never reached 100%",
                    last.accuracy,
                    outcome.train.len()
                ));
            }
            if outcome.train.iter().any(|s| !s.loss.is_finite()) {
                return Err(format!("seed {seed}: non-finite epoch loss"));
            }
            let monotone = outcome.train.windows(2).all(|w| w[1].loss <= w[0].loss);
            if monotone {
                monotone_runs += 1;
            }
            epochs_used.push(outcome.train.len());
        }
        let elapsed = started.elapsed();
        if elapsed > Duration::from_secs(60) {
            return Err(format!(
                "{SEEDS} single-threaded runs took {elapsed:.1?}, budget is 60s"
            ));
        }
        if monotone_runs < 9 {
            return Err(format!(
                "loss decreased monotonically in only {monotone_runs}/{SEEDS} runs \
                 (epochs used: {epochs_used:?})"
            ));
        }
        Ok(format!(
            "{SEEDS}/{SEEDS} seeds reached 100% training accuracy \
             (epochs: {epochs_used:?}), {monotone_runs}/{SEEDS} with monotonically \
             non-increasing loss, {elapsed:.1?} total"
        ))
    })();
    report("toy-corpus-learning", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: a configuration and seed pin every bit of the run.

#[test]
fn same_seed_reproduces_logs_and_checkpoints() {
    let outcome = (|| -> Check {
        let corpus = Corpus::load(&data_dir().join("toy/train.tsv"))
            .map_err(|e| format!("loading bundled corpus: {e}"))?;
        let feat = Featurizer::fit(&corpus, load_toy_dicts());
        let encoded = feat.encode_corpus(&corpus);
        let train_set = &encoded[..60];
        let dev_set = &encoded[60..100];
        let vocabs: [Vocab; 4] = Granularity::ALL.map(|g| feat.vocab(g).clone());
        let config = ModelConfig {
            dim: 8,
            classes: 4,
            streams: StreamFlags::all(),
            dropout: 0.3,
            sigmoid_scores: true,
            downsample_target: 18,
            downsample_threshold: 64,
        };
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

        let run = |tag: &str| -> Result<(Vec<String>, Vec<u8>, ModelParams), String> {
            let mut params = ModelParams::init(
                config.clone(),
                Granularity::ALL.map(|g| feat.vocab(g).len()),
                feat.targets(),
                7,
            );
            let mut lines = Vec::new();
            let tc = TrainConfig {
                epochs: 3,
                batch_size: 8,
                seed: 7,
                adam: AdamConfig::default(),
                threads: 2,
                target_accuracy: None,
            };
            train(&mut params, train_set, Some(dev_set), &tc, &mut |ls, _| {
                lines.extend(ls.iter().cloned());
                Ok(())
            })
            .map_err(|e| format!("{tag}: {e}"))?;
            let path = dir.path().join(format!("{tag}.bin"));
            checkpoint::save(&path, &params, &vocabs, &corpus.labels, &[])
                .map_err(|e| format!("{tag}: {e}"))?;
            let bytes = std::fs::read(&path).map_err(|e| format!("{tag}: {e}"))?;
            Ok((lines, bytes, params))
        };

        let (lines_a, bytes_a, params_a) = run("first")?;
        let (lines_b, bytes_b, params_b) = run("second")?;
        if lines_a != lines_b {
            let first_diff = lines_a
                .iter()
                .zip(&lines_b)
                .position(|(a, b)| a != b)
                .unwrap_or(lines_a.len().min(lines_b.len()));
            return Err(format!("log lines diverge at line {first_diff}"));
        }
        if bytes_a != bytes_b {
            return Err("checkpoint files differ between identical runs".into());
        }
        for ((name, ta), (_, tb)) in params_a.tensors().iter().zip(params_b.tensors().iter()) {
            if !bits_equal(ta, tb) {
                return Err(format!("parameter {name} differs between identical runs"));
            }
        }
        Ok(format!(
            "two dropout-and-dev runs (2 worker threads): {} identical log lines, \
             {}-byte checkpoints byte-identical, all parameters bit-identical",
            lines_a.len(),
            bytes_a.len()
        ))
    })();
    report("seeded-reproducibility", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: auxiliary streams share one encoder and one fusion projection.

#[test]
fn auxiliary_streams_share_parameters() {
    let outcome = (|| -> Check {
        // Directly at the stream level: the same auxiliary input through
        // two separately placed leaves must give bit-identical outputs,
        // which can only happen when the stream parameters are shared.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5a5a);
        let enc = BiLstmParams::init(4, 2, &mut rng);
        let fus = FusionParams::init(4, &mut rng);
        let e_c_data = rand_tensor(&[3, 4], 1.5, &mut rng);
        let e_aux_data = rand_tensor(&[5, 4], 1.5, &mut rng);
        let mut tape = Tape::new();
        let enc_n = enc.place(&mut tape);
        let fus_n = fus.place(&mut tape);
        let e_c = tape.leaf(e_c_data);
        let aux_one = tape.leaf(e_aux_data.clone());
        let aux_two = tape.leaf(e_aux_data);
        let out_one = attention_stream(&mut tape, enc_n, fus_n, e_c, aux_one, None);
        let out_two = attention_stream(&mut tape, enc_n, fus_n, e_c, aux_two, None);
        if !bits_equal(tape.value(out_one.encoded), tape.value(out_two.encoded))
            || !bits_equal(tape.value(out_one.weights), tape.value(out_two.weights))
        {
            return Err("two streams over the same auxiliary input diverge".into());
        }

        // Through the whole model: with the three auxiliary embedding
        // tables forced equal and identical id streams, all three stream
        // outputs and attention maps must coincide bit for bit.
        let config = ModelConfig {
            dim: 4,
            classes: 3,
            streams: StreamFlags::all(),
            dropout: 0.0,
            sigmoid_scores: true,
            downsample_target: 2,
            downsample_threshold: 64,
        };
        let mut params = ModelParams::init(config, [9; 4], [3, 3, 3, 3], 17);
        let shared = params.embeddings[Granularity::Radical.index()].clone();
        params.embeddings[Granularity::Wubi.index()] = shared.clone();
        params.embeddings[Granularity::Pinyin.index()] = shared;
        let ids = vec![5usize, 2, 7];
        let streams = [vec![2, 3, 4], ids.clone(), ids.clone(), ids];

        let mut tape = Tape::new();
        let placed = params.place(&mut tape);
        let fwd = params.forward(&mut tape, &placed, &streams, Mode::Eval);
        if fwd.streams.len() != 3 || fwd.attention.len() != 3 {
            return Err(format!(
                "expected 3 auxiliary streams, found {}",
                fwd.streams.len()
            ));
        }
        let first_stream = tape.value(fwd.streams[0].1).clone();
        let first_attention = tape.value(fwd.attention[0].1).clone();
        for k in 1..3 {
            if !bits_equal(&first_stream, tape.value(fwd.streams[k].1)) {
                return Err(format!(
                    "stream output {} differs from stream output 0 on identical inputs",
                    fwd.streams[k].0.name()
                ));
            }
            if !bits_equal(&first_attention, tape.value(fwd.attention[k].1)) {
                return Err(format!(
                    "attention map {} differs from map 0 on identical inputs",
                    fwd.attention[k].0.name()
                ));
            }
        }
        Ok(
            "identical auxiliary inputs give bit-identical stream outputs and \
             attention maps, at the stream level and through the full model"
                .into(),
        )
    })();
    report("shared-stream-parameters", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: downsampler geometry and the identity kernel.

#[test]
fn downsampler_geometry_and_identity_kernel() {
    let outcome = (|| -> Check {
        // A 4058-position stream squeezed to 18 positions needs kernel
        // width 226, the smallest width whose 18 windows cover the input.
        let mut rng = ChaCha8Rng::seed_from_u64(0xd0f1);
        let params = Conv1dParams::init(4058, 18, 2, &mut rng);
        if params.width() != 226 {
            return Err(format!("kernel width {}, expected 226", params.width()));
        }
        if params.width() * 18 < 4058 || (params.width() - 1) * 18 >= 4058 {
            return Err("226 is not the minimal covering width".into());
        }
        let x = rand_tensor(&[4058, 2], 1.0, &mut rng);
        let mut tape = Tape::new();
        let nodes = params.place(&mut tape);
        let nx = tape.leaf(x);
        let y = tape.conv1d_downsample(nx, nodes.weight, nodes.bias, nodes.pad, 18);
        if tape.value(y).shape() != [18, 2] {
            return Err(format!(
                "output shape {:?}, expected [18, 2]",
                tape.value(y).shape()
            ));
        }

        // Width-1 identity kernel: with L == target the convolution must
        // reproduce its input exactly.
        let dim = 3;
        let mut eye = Tensor::zeros(vec![1, dim, dim]);
        for k in 0..dim {
            eye.data_mut()[k * dim + k] = 1.0;
        }
        let x = rand_tensor(&[6, dim], 1.5, &mut rng);
        let mut tape = Tape::new();
        let nx = tape.leaf(x.clone());
        let nw = tape.leaf(eye);
        let nb = tape.leaf(Tensor::zeros(vec![dim]));
        let np = tape.leaf(Tensor::zeros(vec![dim]));
        let y = tape.conv1d_downsample(nx, nw, nb, np, 6);
        if !bits_equal(tape.value(y), &x) {
            return Err("identity kernel does not reproduce the input".into());
        }
        Ok(
            "4058 positions at target 18 give 18 outputs through a width-226 kernel; \
             the width-1 identity kernel reproduces its input exactly"
                .into(),
        )
    })();
    report("downsampler-geometry", outcome);
}

// ---------------------------------------------------------------------------
// Criterion: checkpoints round-trip exactly.

#[test]
fn checkpoints_round_trip_exactly() {
    let outcome = (|| -> Check {
        let corpus = Corpus::load(&data_dir().join("toy/train.tsv"))
            .map_err(|e| format!("loading bundled corpus: {e}"))?;
        let feat = Featurizer::fit(&corpus, load_toy_dicts());
        let encoded = feat.encode_corpus(&corpus);
        let test_corpus =
            Corpus::load_with_labels(&data_dir().join("toy/test.tsv"), &corpus.labels)
                .map_err(|e| format!("loading bundled test split: {e}"))?;
        let test_encoded = feat.encode_corpus(&test_corpus);
        let vocabs: [Vocab; 4] = Granularity::ALL.map(|g| feat.vocab(g).clone());

        let config = ModelConfig {
            dim: 8,
            classes: 4,
            streams: StreamFlags::all(),
            dropout: 0.25,
            sigmoid_scores: true,
            downsample_target: 18,
            downsample_threshold: 64,
        };
        let mut params = ModelParams::init(
            config,
            Granularity::ALL.map(|g| feat.vocab(g).len()),
            feat.targets(),
            23,
        );
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 8,
            seed: 23,
            adam: AdamConfig::default(),
            threads: 1,
            target_accuracy: None,
        };
        train(&mut params, &encoded[..40], None, &tc, &mut |_, _| Ok(()))
            .map_err(|e| e.to_string())?;

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path_a = dir.path().join("model.bin");
        let path_b = dir.path().join("model-again.bin");
        checkpoint::save(&path_a, &params, &vocabs, &corpus.labels, &[])
            .map_err(|e| e.to_string())?;
        let loaded = checkpoint::load(&path_a).map_err(|e| e.to_string())?;
        checkpoint::save(
            &path_b,
            &loaded.params,
            &loaded.vocabs,
            &loaded.labels,
            &loaded.extras,
        )
        .map_err(|e| e.to_string())?;

        let bytes_a = std::fs::read(&path_a).map_err(|e| e.to_string())?;
        let bytes_b = std::fs::read(&path_b).map_err(|e| e.to_string())?;
        if bytes_a != bytes_b {
            return Err(format!(
                "save-load-save changed the file ({} vs {} bytes)",
                bytes_a.len(),
                bytes_b.len()
            ));
        }
        for ((name, ta), (_, tb)) in params.tensors().iter().zip(loaded.params.tensors().iter()) {
            if !bits_equal(ta, tb) {
                return Err(format!("tensor {name} changed across the round trip"));
            }
        }
        if loaded.labels != corpus.labels {
            return Err("labels changed across the round trip".into());
        }
        for g in Granularity::ALL {
            if loaded.vocabs[g.index()] != vocabs[g.index()] {
                return Err(format!(
                    "{} vocabulary changed across the round trip",
                    g.name()
                ));
            }
        }

        let (loss_orig, cm_orig) = evaluate(&params, &test_encoded);
        let (loss_back, cm_back) = evaluate(&loaded.params, &test_encoded);
        if loss_orig.to_bits() != loss_back.to_bits() || cm_orig != cm_back {
            return Err(format!(
                "evaluation differs after the round trip: loss {loss_orig} vs {loss_back}"
            ));
        }
        if cm_orig.macro_f1().to_bits() != cm_back.macro_f1().to_bits() {
            return Err("macro F1 differs after the round trip".into());
        }
        Ok(format!(
            "save-load-save is byte-identical ({} bytes); every tensor, label, and \
             vocabulary survives; test-split loss and confusion matrix are bit-identical",
            bytes_a.len()
        ))
    })();
    report("checkpoint-round-trip", outcome);
}
