//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Every operation computes its value eagerly and records a backward rule.
//! Nodes are topologically ordered by construction (inputs are recorded
//! before their consumers), so [`Tape::backward`] is a single reverse sweep
//! that visits each node at most once. A tape is single-writer; `backward`
//! takes `&self` and never mutates recorded state, so repeated calls yield
//! identical gradients.

use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

type BackwardFn = Box<dyn Fn(&Tensor, &mut dyn FnMut(NodeId, Tensor))>;

struct Node {
    value: Tensor,
    backward: Option<BackwardFn>,
}

/// Gradients of one scalar root with respect to every tape node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `id`, or `None` if the node does not
    /// influence the root.
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `id`; disconnected nodes get zeros.
    pub fn wrt_or_zeros(&self, tape: &Tape, id: NodeId) -> Tensor {
        match self.wrt(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(id).shape().to_vec()),
        }
    }
}

/// Append-only record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value computed for `id` during the forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, backward: Option<BackwardFn>) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite value recorded on tape");
        self.nodes.push(Node { value, backward });
        NodeId(self.nodes.len() - 1)
    }

    /// Records an input value. Leaves have no backward rule; their gradient
    /// is whatever accumulates from consumers.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, None)
    }

    /// Elementwise sum of two equally-shaped tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add: shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data().iter())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::from_vec(va.shape().to_vec(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, g.clone());
                sink(b, g.clone());
            })),
        )
    }

    /// Elementwise (Hadamard) product of two equally-shaped tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul: shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data().iter())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(va.shape().to_vec(), data);
        let (ca, cb) = (va.clone(), vb.clone());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, hadamard(g, &cb));
                sink(b, hadamard(g, &ca));
            })),
        )
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v * c).collect();
        let out = Tensor::from_vec(self.value(x).shape().to_vec(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let scaled = g.data().iter().map(|v| v * c).collect();
                sink(x, Tensor::from_vec(g.shape().to_vec(), scaled));
            })),
        )
    }

    /// Logistic sigmoid, computed in the overflow-free branch form.
    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| sigmoid(v)).collect();
        let out = Tensor::from_vec(self.value(x).shape().to_vec(), data);
        let s = out.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let dx = g
                    .data()
                    .iter()
                    .zip(s.data().iter())
                    .map(|(gv, sv)| gv * sv * (1.0 - sv))
                    .collect();
                sink(x, Tensor::from_vec(g.shape().to_vec(), dx));
            })),
        )
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| v.tanh()).collect();
        let out = Tensor::from_vec(self.value(x).shape().to_vec(), data);
        let y = out.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let dx = g
                    .data()
                    .iter()
                    .zip(y.data().iter())
                    .map(|(gv, yv)| gv * (1.0 - yv * yv))
                    .collect();
                sink(x, Tensor::from_vec(g.shape().to_vec(), dx));
            })),
        )
    }

    /// Matrix product of `a` `[m×k]` and `b` `[k×n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rank(), 2, "matmul: left operand must be rank 2");
        assert_eq!(vb.rank(), 2, "matmul: right operand must be rank 2");
        assert_eq!(
            va.cols(),
            vb.rows(),
            "matmul: inner dimensions {} vs {}",
            va.cols(),
            vb.rows()
        );
        let out = mat_mul(va, vb);
        let (ca, cb) = (va.clone(), vb.clone());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(a, mat_mul(g, &mat_transpose(&cb)));
                sink(b, mat_mul(&mat_transpose(&ca), g));
            })),
        )
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let out = mat_transpose(self.value(x));
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, mat_transpose(g));
            })),
        )
    }

    /// Vector-matrix product `x·W` plus an optional bias: `[n]·[n×m] (+ [m])`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let (vx, vw) = (self.value(x), self.value(w));
        assert_eq!(vx.rank(), 1, "linear: input must be rank 1");
        assert_eq!(vw.rank(), 2, "linear: weight must be rank 2");
        assert_eq!(
            vx.len(),
            vw.rows(),
            "linear: input width {} vs weight rows {}",
            vx.len(),
            vw.rows()
        );
        let (n, m) = (vw.rows(), vw.cols());
        let mut data = match b {
            Some(bid) => {
                let vb = self.value(bid);
                assert_eq!(vb.len(), m, "linear: bias width {} vs {}", vb.len(), m);
                vb.data().to_vec()
            }
            None => vec![0.0; m],
        };
        let (vx, vw) = (self.value(x), self.value(w));
        for i in 0..n {
            let xi = vx.data()[i];
            for (j, d) in data.iter_mut().enumerate() {
                *d += xi * vw.at2(i, j);
            }
        }
        let out = Tensor::from_vec(vec![m], data);
        let (cx, cw) = (vx.clone(), vw.clone());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dx = vec![0.0; n];
                let mut dw = vec![0.0; n * m];
                for i in 0..n {
                    let xi = cx.data()[i];
                    for j in 0..m {
                        dx[i] += g.data()[j] * cw.at2(i, j);
                        dw[i * m + j] = xi * g.data()[j];
                    }
                }
                sink(x, Tensor::from_vec(vec![n], dx));
                sink(w, Tensor::from_vec(vec![n, m], dw));
                if let Some(bid) = b {
                    sink(bid, g.clone());
                }
            })),
        )
    }

    /// Adds a bias vector to every row of a matrix.
    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let (vx, vb) = (self.value(x), self.value(bias));
        assert_eq!(vx.rank(), 2, "add_row_bias: input must be rank 2");
        assert_eq!(
            vx.cols(),
            vb.len(),
            "add_row_bias: {} columns vs bias width {}",
            vx.cols(),
            vb.len()
        );
        let (r, c) = (vx.rows(), vx.cols());
        let mut data = vx.data().to_vec();
        for row in 0..r {
            for col in 0..c {
                data[row * c + col] += vb.data()[col];
            }
        }
        let out = Tensor::from_vec(vec![r, c], data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, g.clone());
                let mut db = vec![0.0; c];
                for row in 0..r {
                    for (col, d) in db.iter_mut().enumerate() {
                        *d += g.data()[row * c + col];
                    }
                }
                sink(bias, Tensor::from_vec(vec![c], db));
            })),
        )
    }

    /// Concatenates tensors of equal rank along `axis`; all non-axis
    /// dimensions must match.
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> NodeId {
        assert!(!parts.is_empty(), "concat: no inputs");
        let first = self.value(parts[0]).shape().to_vec();
        assert!(
            axis < first.len(),
            "concat: axis {} out of rank {}",
            axis,
            first.len()
        );
        let mut axis_sizes = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            assert_eq!(s.len(), first.len(), "concat: rank mismatch");
            for (d, (&a, &b)) in s.iter().zip(first.iter()).enumerate() {
                assert!(
                    d == axis || a == b,
                    "concat: dimension {} mismatch ({} vs {})",
                    d,
                    a,
                    b
                );
            }
            axis_sizes.push(s[axis]);
        }
        let total: usize = axis_sizes.iter().sum();
        let mut shape = first.clone();
        shape[axis] = total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();

        let mut data = vec![0.0; shape.iter().product()];
        let mut offset = 0;
        for (&p, &asz) in parts.iter().zip(axis_sizes.iter()) {
            let src = self.value(p).data();
            for o in 0..outer {
                let dst_start = (o * total + offset) * inner;
                let src_start = o * asz * inner;
                data[dst_start..dst_start + asz * inner]
                    .copy_from_slice(&src[src_start..src_start + asz * inner]);
            }
            offset += asz;
        }
        let out = Tensor::from_vec(shape.clone(), data);

        let parts: Vec<NodeId> = parts.to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut offset = 0;
                for (&p, &asz) in parts.iter().zip(axis_sizes.iter()) {
                    let mut part_shape = g.shape().to_vec();
                    part_shape[axis] = asz;
                    let mut dp = vec![0.0; part_shape.iter().product()];
                    for o in 0..outer {
                        let src_start = (o * total + offset) * inner;
                        let dst_start = o * asz * inner;
                        dp[dst_start..dst_start + asz * inner]
                            .copy_from_slice(&g.data()[src_start..src_start + asz * inner]);
                    }
                    sink(p, Tensor::from_vec(part_shape, dp));
                    offset += asz;
                }
            })),
        )
    }

    /// Contiguous slice `[start, start+len)` of a vector.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.rank(), 1, "slice: input must be rank 1");
        let n = vx.len();
        assert!(
            start + len <= n,
            "slice: [{start}, {}) out of length {n}",
            start + len
        );
        let out = Tensor::from_vec(vec![len], vx.data()[start..start + len].to_vec());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dx = vec![0.0; n];
                dx[start..start + len].copy_from_slice(g.data());
                sink(x, Tensor::from_vec(vec![n], dx));
            })),
        )
    }

    /// Extracts row `r` of a matrix as a vector.
    pub fn row(&mut self, x: NodeId, r: usize) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.rank(), 2, "row: input must be rank 2");
        let (rows, cols) = (vx.rows(), vx.cols());
        assert!(r < rows, "row: index {r} out of {rows}");
        let out = Tensor::from_vec(vec![cols], vx.row_slice(r).to_vec());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dx = vec![0.0; rows * cols];
                dx[r * cols..(r + 1) * cols].copy_from_slice(g.data());
                sink(x, Tensor::from_vec(vec![rows, cols], dx));
            })),
        )
    }

    /// Stacks equal-width vectors into a matrix, one per row.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows: no inputs");
        let cols = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            let v = self.value(r);
            assert_eq!(v.rank(), 1, "stack_rows: inputs must be rank 1");
            assert_eq!(v.len(), cols, "stack_rows: width mismatch");
            data.extend_from_slice(v.data());
        }
        let out = Tensor::from_vec(vec![rows.len(), cols], data);
        let rows: Vec<NodeId> = rows.to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                for (i, &r) in rows.iter().enumerate() {
                    sink(
                        r,
                        Tensor::from_vec(vec![cols], g.data()[i * cols..(i + 1) * cols].to_vec()),
                    );
                }
            })),
        )
    }

    /// Softmax of a vector, computed with max-subtraction.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.rank(), 1, "softmax: input must be rank 1");
        assert!(!vx.is_empty(), "softmax: empty input");
        let out = Tensor::from_vec(vec![vx.len()], softmax_slice(vx.data()));
        let s = out.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                sink(x, softmax_backward(g.data(), s.data()));
            })),
        )
    }

    /// Column-wise softmax of a matrix: each column is normalized over the
    /// row axis.
    pub fn softmax_columns(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.rank(), 2, "softmax_columns: input must be rank 2");
        let (r, c) = (vx.rows(), vx.cols());
        assert!(r > 0, "softmax_columns: no rows");
        let mut data = vec![0.0; r * c];
        for j in 0..c {
            let col: Vec<f64> = (0..r).map(|i| vx.at2(i, j)).collect();
            for (i, v) in softmax_slice(&col).into_iter().enumerate() {
                data[i * c + j] = v;
            }
        }
        let out = Tensor::from_vec(vec![r, c], data);
        let s = out.clone();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dx = vec![0.0; r * c];
                for j in 0..c {
                    let gcol: Vec<f64> = (0..r).map(|i| g.data()[i * c + j]).collect();
                    let scol: Vec<f64> = (0..r).map(|i| s.data()[i * c + j]).collect();
                    let dcol = softmax_backward(&gcol, &scol);
                    for i in 0..r {
                        dx[i * c + j] = dcol.data()[i];
                    }
                }
                sink(x, Tensor::from_vec(vec![r, c], dx));
            })),
        )
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        let total: f64 = vx.data().iter().sum();
        let shape = vx.shape().to_vec();
        self.push(
            Tensor::scalar(total),
            Some(Box::new(move |g, sink| {
                sink(x, Tensor::filled(shape.clone(), g.item()));
            })),
        )
    }

    /// Arithmetic mean of all elements, as a scalar.
    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        assert!(!vx.is_empty(), "mean: empty input");
        let n = vx.len() as f64;
        let total: f64 = vx.data().iter().sum();
        let shape = vx.shape().to_vec();
        self.push(
            Tensor::scalar(total / n),
            Some(Box::new(move |g, sink| {
                sink(x, Tensor::filled(shape.clone(), g.item() / n));
            })),
        )
    }

    /// Gathers rows of `table` `[V×D]` by id, producing `[ids.len()×D]`.
    /// Gradients accumulate only into the gathered rows.
    pub fn embed(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let vt = self.value(table);
        assert_eq!(vt.rank(), 2, "embed: table must be rank 2");
        let (v, d) = (vt.rows(), vt.cols());
        for &id in ids {
            assert!(id < v, "embed: id {id} out of vocabulary size {v}");
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(vt.row_slice(id));
        }
        let out = Tensor::from_vec(vec![ids.len(), d], data);
        let ids: Vec<usize> = ids.to_vec();
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dt = vec![0.0; v * d];
                for (pos, &id) in ids.iter().enumerate() {
                    for k in 0..d {
                        dt[id * d + k] += g.data()[pos * d + k];
                    }
                }
                sink(table, Tensor::from_vec(vec![v, d], dt));
            })),
        )
    }

    /// Elementwise multiply by a fixed mask (used by dropout). The mask is
    /// data, not a differentiable input.
    pub fn apply_mask(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.len(), mask.len(), "apply_mask: length mismatch");
        let data = vx
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(v, m)| v * m)
            .collect();
        let out = Tensor::from_vec(vx.shape().to_vec(), data);
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let dx = g
                    .data()
                    .iter()
                    .zip(mask.iter())
                    .map(|(gv, m)| gv * m)
                    .collect();
                sink(x, Tensor::from_vec(g.shape().to_vec(), dx));
            })),
        )
    }

    /// Non-overlapping 1-D convolution that downsamples `x` `[L×D]` to
    /// exactly `[target×D]`.
    ///
    /// The kernel width must be `ceil(L/target)`; positions past `L` read
    /// the `pad` vector, whose gradient accumulates like any other input.
    pub fn conv1d_downsample(
        &mut self,
        x: NodeId,
        weight: NodeId,
        bias: NodeId,
        pad: NodeId,
        target: usize,
    ) -> NodeId {
        assert!(target >= 1, "conv1d_downsample: target must be >= 1");
        let (vx, vw, vb, vp) = (
            self.value(x),
            self.value(weight),
            self.value(bias),
            self.value(pad),
        );
        assert_eq!(vx.rank(), 2, "conv1d_downsample: input must be rank 2");
        let (l, d) = (vx.rows(), vx.cols());
        assert!(l >= 1, "conv1d_downsample: empty input");
        let w = l.div_ceil(target);
        assert_eq!(
            vw.shape(),
            &[w, d, d],
            "conv1d_downsample: weight shape {:?}, expected [{w}, {d}, {d}]",
            vw.shape()
        );
        assert_eq!(vb.len(), d, "conv1d_downsample: bias width");
        assert_eq!(vp.len(), d, "conv1d_downsample: pad width");

        let wdat = vw.data();
        let mut data = vec![0.0; target * d];
        for t in 0..target {
            data[t * d..(t + 1) * d].copy_from_slice(vb.data());
            for i in 0..w {
                let p = t * w + i;
                let row = if p < l { vx.row_slice(p) } else { vp.data() };
                for (k, &rv) in row.iter().enumerate() {
                    if rv == 0.0 {
                        continue;
                    }
                    let base = (i * d + k) * d;
                    for dd in 0..d {
                        data[t * d + dd] += rv * wdat[base + dd];
                    }
                }
            }
        }
        let out = Tensor::from_vec(vec![target, d], data);

        let (cx, cw, cp) = (vx.clone(), vw.clone(), vp.clone());
        self.push(
            out,
            Some(Box::new(move |g, sink| {
                let mut dx = vec![0.0; l * d];
                let mut dw = vec![0.0; w * d * d];
                let mut db = vec![0.0; d];
                let mut dpad = vec![0.0; d];
                for t in 0..target {
                    let gr = &g.data()[t * d..(t + 1) * d];
                    for dd in 0..d {
                        db[dd] += gr[dd];
                    }
                    for i in 0..w {
                        let p = t * w + i;
                        let row = if p < l { cx.row_slice(p) } else { cp.data() };
                        for k in 0..d {
                            let base = (i * d + k) * d;
                            let mut acc = 0.0;
                            for dd in 0..d {
                                dw[base + dd] += row[k] * gr[dd];
                                acc += cw.data()[base + dd] * gr[dd];
                            }
                            if p < l {
                                dx[p * d + k] += acc;
                            } else {
                                dpad[k] += acc;
                            }
                        }
                    }
                }
                sink(x, Tensor::from_vec(vec![l, d], dx));
                sink(weight, Tensor::from_vec(vec![w, d, d], dw));
                sink(bias, Tensor::from_vec(vec![d], db));
                sink(pad, Tensor::from_vec(vec![d], dpad));
            })),
        )
    }

    /// Negative log-likelihood of the gold class under a probability vector,
    /// with the probability clamped to at least 1e-12. A non-finite input
    /// probability yields a NaN loss so numeric blow-ups surface at the loss
    /// instead of being masked by the clamp.
    pub fn cross_entropy(&mut self, probs: NodeId, gold: usize) -> NodeId {
        const CLAMP: f64 = 1e-12;
        let vp = self.value(probs);
        assert_eq!(vp.rank(), 1, "cross_entropy: probabilities must be rank 1");
        let k = vp.len();
        assert!(gold < k, "cross_entropy: gold class {gold} out of {k}");
        let p = vp.data()[gold];
        let loss = if p.is_finite() {
            -p.max(CLAMP).ln()
        } else {
            f64::NAN
        };
        self.push(
            Tensor::scalar(loss),
            Some(Box::new(move |g, sink| {
                let mut dp = vec![0.0; k];
                if p.is_finite() && p > CLAMP {
                    dp[gold] = -g.item() / p;
                }
                sink(probs, Tensor::from_vec(vec![k], dp));
            })),
        )
    }

    /// Reverse accumulation from a scalar root. Nodes the root does not
    /// depend on are absent from the result.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(
            self.value(root).len(),
            1,
            "backward: root must be scalar, got shape {:?}",
            self.value(root).shape()
        );
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[root.0] = Some(Tensor::filled(self.value(root).shape().to_vec(), 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Some(rule) = &self.nodes[i].backward {
                rule(&g, &mut |pid: NodeId, contrib: Tensor| {
                    debug_assert!(pid.0 < i, "backward rule points forward");
                    match &mut grads[pid.0] {
                        Some(acc) => acc.add_assign(&contrib),
                        slot @ None => *slot = Some(contrib),
                    }
                });
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| x * y)
        .collect();
    Tensor::from_vec(a.shape().to_vec(), data)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn mat_mul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    debug_assert_eq!(k, b.rows());
    let mut data = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data()[p * n..(p + 1) * n];
            let drow = &mut data[i * n..(i + 1) * n];
            for (dv, bv) in drow.iter_mut().zip(brow.iter()) {
                *dv += av * bv;
            }
        }
    }
    Tensor::from_vec(vec![m, n], data)
}

fn mat_transpose(x: &Tensor) -> Tensor {
    let (r, c) = (x.rows(), x.cols());
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            data[j * r + i] = x.data()[i * c + j];
        }
    }
    Tensor::from_vec(vec![c, r], data)
}

fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn softmax_backward(g: &[f64], s: &[f64]) -> Tensor {
    let dot: f64 = g.iter().zip(s.iter()).map(|(gv, sv)| gv * sv).sum();
    let dx = g
        .iter()
        .zip(s.iter())
        .map(|(gv, sv)| sv * (gv - dot))
        .collect();
    Tensor::from_vec(vec![s.len()], dx)
}
