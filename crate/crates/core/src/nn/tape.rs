//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is
//! a valid topological order for the gradient pass. The operation set is the
//! one the reply linker needs and nothing more.

use super::align::{soft_align_backward, soft_align_forward, AlignCache};
use super::params::{Gradients, ParamId, ParameterStore};
use super::tensor::{gemm_acc, Tensor};

/// Lower/upper clamp for probabilities fed to binary cross entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Embed { param: ParamId, ids: Vec<usize> },
    MatMul { a: NodeId, b: NodeId, ta: bool, tb: bool },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, s: f64 },
    Tanh(NodeId),
    Sigmoid(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols { a: NodeId, start: usize },
    SliceRows { a: NodeId, start: usize },
    GatherRows(Vec<(NodeId, usize)>),
    MeanRows(NodeId),
    MaxRows { a: NodeId, argmax: Vec<usize> },
    Transpose(NodeId),
    SelectSum { a: NodeId, positions: Vec<(usize, usize)> },
    Sum(NodeId),
    Bce { p: NodeId, label: f64, clamped: bool },
    SoftAlign { a: NodeId, b: NodeId, cache: Box<AlignCache> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> [usize; 2] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// A value that gradients do not flow into.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable leaf whose gradient can be read back after `backward`.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> NodeId {
        self.push(store.get(id).clone(), Op::Param(id), true)
    }

    /// Rows `ids` of the embedding matrix `id`, one output row per id.
    pub fn embed(&mut self, store: &ParameterStore, id: ParamId, ids: &[usize]) -> NodeId {
        let table = store.get(id);
        let mut out = Tensor::zeros(ids.len(), table.cols());
        for (r, &tok) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(table.row(tok));
        }
        self.push(
            out,
            Op::Embed {
                param: id,
                ids: ids.to_vec(),
            },
            true,
        )
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.matmul_t(a, false, b, false)
    }

    /// `op(a) · op(b)` with optional transposes.
    pub fn matmul_t(&mut self, a: NodeId, ta: bool, b: NodeId, tb: bool) -> NodeId {
        let v = self.value(a).matmul_t(ta, self.value(b), tb);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::MatMul { a, b, ta, tb }, rg)
    }

    /// Elementwise sum. `b` may be a single row, broadcast over the rows of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = broadcast_zip(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Add { a, b }, rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = broadcast_zip(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Sub { a, b }, rg)
    }

    /// Elementwise (Hadamard) product of equal shapes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Mul { a, b }, rg)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        let rg = self.rg(&[a]);
        self.push(v, Op::Scale { a, s }, rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            softmax_in_place(v.row_mut(r));
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::SoftmaxRows(a), rg)
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            let row = v.row_mut(r);
            let lse = log_sum_exp(row);
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::LogSoftmaxRows(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat_cols row mismatch");
                out.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
                off += pv.cols();
            }
        }
        let rg = self.rg(parts);
        self.push(out, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of nothing");
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols(), cols, "concat_rows column mismatch");
            data.extend_from_slice(pv.data());
            rows += pv.rows();
        }
        let rg = self.rg(parts);
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
            rg,
        )
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        assert!(start + len <= av.cols(), "slice_cols out of range");
        let mut out = Tensor::zeros(av.rows(), len);
        for r in 0..av.rows() {
            out.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::SliceCols { a, start }, rg)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        assert!(start + len <= av.rows(), "slice_rows out of range");
        let c = av.cols();
        let out = Tensor::from_vec(len, c, av.data()[start * c..(start + len) * c].to_vec());
        let rg = self.rg(&[a]);
        self.push(out, Op::SliceRows { a, start }, rg)
    }

    /// Stacks the selected rows of (possibly different) nodes into one matrix.
    pub fn gather_rows(&mut self, picks: &[(NodeId, usize)]) -> NodeId {
        assert!(!picks.is_empty(), "gather of nothing");
        let cols = self.value(picks[0].0).cols();
        let mut out = Tensor::zeros(picks.len(), cols);
        for (k, &(n, r)) in picks.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.value(n).row(r));
        }
        let ids: Vec<NodeId> = picks.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        self.push(out, Op::GatherRows(picks.to_vec()), rg)
    }

    /// Column means, `1 x cols`.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut out = Tensor::zeros(1, av.cols());
        let inv = 1.0 / av.rows() as f64;
        for r in 0..av.rows() {
            for (o, x) in out.data_mut().iter_mut().zip(av.row(r)) {
                *o += x * inv;
            }
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::MeanRows(a), rg)
    }

    /// Column maxima, `1 x cols`. The gradient goes to the first maximal row.
    pub fn max_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        assert!(av.rows() > 0, "max over zero rows");
        let mut out = Tensor::row_vector(av.row(0).to_vec());
        let mut argmax = vec![0; av.cols()];
        for r in 1..av.rows() {
            for (c, &x) in av.row(r).iter().enumerate() {
                if x > out.data()[c] {
                    out.data_mut()[c] = x;
                    argmax[c] = r;
                }
            }
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::MaxRows { a, argmax }, rg)
    }

    /// Soft alignment of token matrices `a` and `b` pooled into `1 x 16D`.
    pub fn soft_align(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (out, cache) = soft_align_forward(self.value(a), self.value(b));
        let rg = self.rg(&[a, b]);
        self.push(
            out,
            Op::SoftAlign {
                a,
                b,
                cache: Box::new(cache),
            },
            rg,
        )
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(v, Op::Transpose(a), rg)
    }

    /// Sum of the listed `(row, col)` entries, as a `1 x 1` node.
    pub fn select_sum(&mut self, a: NodeId, positions: &[(usize, usize)]) -> NodeId {
        let av = self.value(a);
        let s = positions.iter().map(|&(r, c)| av.get(r, c)).sum();
        let rg = self.rg(&[a]);
        self.push(
            Tensor::scalar(s),
            Op::SelectSum {
                a,
                positions: positions.to_vec(),
            },
            rg,
        )
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Binary cross entropy of a `1 x 1` probability against a 0/1 label,
    /// with the probability clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn bce(&mut self, p: NodeId, label: f64) -> NodeId {
        let raw = self.value(p).item();
        let clamped = !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&raw);
        let q = raw.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let loss = -label * q.ln() - (1.0 - label) * (1.0 - q).ln();
        let rg = self.rg(&[p]);
        self.push(
            Tensor::scalar(loss),
            Op::Bce { p, label, clamped },
            rg,
        )
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: NodeId) -> Backward {
        assert_eq!(self.shape(loss), [1, 1], "backward from a non-scalar node");
        self.backward_seeded(vec![(loss, Tensor::scalar(1.0))])
    }

    /// Backpropagates externally supplied upstream gradients.
    pub fn backward_seeded(&self, seeds: Vec<(NodeId, Tensor)>) -> Backward {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut last = 0;
        for (id, g) in seeds {
            assert_eq!(g.shape(), self.shape(id), "seed gradient shape mismatch");
            last = last.max(id.0 + 1);
            match &mut grads[id.0] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        for idx in (0..last).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if self.nodes[idx].requires_grad {
                self.backprop_node(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        Backward { grads }
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Tensor>], id: NodeId) -> Option<&'g mut Tensor> {
        let node = &self.nodes[id.0];
        if !node.requires_grad {
            return None;
        }
        let [r, c] = node.value.shape();
        Some(grads[id.0].get_or_insert_with(|| Tensor::zeros(r, c)))
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Param(_) | Op::Embed { .. } => {}
            &Op::MatMul { a, b, ta, tb } => {
                let av = self.value(a);
                let bv = self.value(b);
                if let Some(da) = self.slot(grads, a) {
                    if ta {
                        gemm_acc(bv, tb, g, true, da);
                    } else {
                        gemm_acc(g, false, bv, !tb, da);
                    }
                }
                if let Some(db) = self.slot(grads, b) {
                    if tb {
                        gemm_acc(g, true, av, ta, db);
                    } else {
                        gemm_acc(av, !ta, g, false, db);
                    }
                }
            }
            &Op::Add { a, b } => {
                if let Some(da) = self.slot(grads, a) {
                    da.add_assign(g);
                }
                if let Some(db) = self.slot(grads, b) {
                    accumulate_broadcast(db, g, 1.0);
                }
            }
            &Op::Sub { a, b } => {
                if let Some(da) = self.slot(grads, a) {
                    da.add_assign(g);
                }
                if let Some(db) = self.slot(grads, b) {
                    accumulate_broadcast(db, g, -1.0);
                }
            }
            &Op::Mul { a, b } => {
                let bv = self.value(b);
                if let Some(da) = self.slot(grads, a) {
                    for ((d, gi), bi) in da.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *d += gi * bi;
                    }
                }
                let av = self.value(a);
                if let Some(db) = self.slot(grads, b) {
                    for ((d, gi), ai) in db.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gi * ai;
                    }
                }
            }
            &Op::Scale { a, s } => {
                if let Some(da) = self.slot(grads, a) {
                    for (d, gi) in da.data_mut().iter_mut().zip(g.data()) {
                        *d += gi * s;
                    }
                }
            }
            &Op::Tanh(a) => {
                let y = &node.value;
                if let Some(da) = self.slot(grads, a) {
                    for ((d, gi), yi) in da.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
            }
            &Op::Sigmoid(a) => {
                let y = &node.value;
                if let Some(da) = self.slot(grads, a) {
                    for ((d, gi), yi) in da.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
            }
            &Op::SoftmaxRows(a) => {
                let y = &node.value;
                if let Some(da) = self.slot(grads, a) {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((d, yi), gi) in da.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += yi * (gi - dot);
                        }
                    }
                }
            }
            &Op::LogSoftmaxRows(a) => {
                let y = &node.value;
                if let Some(da) = self.slot(grads, a) {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let total: f64 = gr.iter().sum();
                        for ((d, yi), gi) in da.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += gi - yi.exp() * total;
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if let Some(dp) = self.slot(grads, p) {
                        for r in 0..g.rows() {
                            for (d, gi) in dp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                                *d += gi;
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let h = self.value(p).rows();
                    if let Some(dp) = self.slot(grads, p) {
                        for r in 0..h {
                            for (d, gi) in dp.row_mut(r).iter_mut().zip(g.row(off + r)) {
                                *d += gi;
                            }
                        }
                    }
                    off += h;
                }
            }
            &Op::SliceCols { a, start } => {
                if let Some(da) = self.slot(grads, a) {
                    let w = g.cols();
                    for r in 0..g.rows() {
                        for (d, gi) in da.row_mut(r)[start..start + w].iter_mut().zip(g.row(r)) {
                            *d += gi;
                        }
                    }
                }
            }
            &Op::SliceRows { a, start } => {
                if let Some(da) = self.slot(grads, a) {
                    for r in 0..g.rows() {
                        for (d, gi) in da.row_mut(start + r).iter_mut().zip(g.row(r)) {
                            *d += gi;
                        }
                    }
                }
            }
            Op::GatherRows(picks) => {
                for (k, &(n, r)) in picks.iter().enumerate() {
                    if let Some(dn) = self.slot(grads, n) {
                        for (d, gi) in dn.row_mut(r).iter_mut().zip(g.row(k)) {
                            *d += gi;
                        }
                    }
                }
            }
            &Op::MeanRows(a) => {
                if let Some(da) = self.slot(grads, a) {
                    let inv = 1.0 / da.rows() as f64;
                    for r in 0..da.rows() {
                        for (d, gi) in da.row_mut(r).iter_mut().zip(g.data()) {
                            *d += gi * inv;
                        }
                    }
                }
            }
            Op::MaxRows { a, argmax } => {
                if let Some(da) = self.slot(grads, *a) {
                    for (c, &r) in argmax.iter().enumerate() {
                        let v = da.get(r, c) + g.data()[c];
                        da.set(r, c, v);
                    }
                }
            }
            &Op::Transpose(a) => {
                if let Some(da) = self.slot(grads, a) {
                    da.add_assign(&g.transpose());
                }
            }
            Op::SelectSum { a, positions } => {
                let gs = g.item();
                if let Some(da) = self.slot(grads, *a) {
                    for &(r, c) in positions {
                        let v = da.get(r, c) + gs;
                        da.set(r, c, v);
                    }
                }
            }
            &Op::Sum(a) => {
                let gs = g.item();
                if let Some(da) = self.slot(grads, a) {
                    for d in da.data_mut() {
                        *d += gs;
                    }
                }
            }
            &Op::Bce { p, label, clamped } => {
                let pv = self.value(p).item();
                let dp = if clamped {
                    0.0
                } else {
                    g.item() * (-label / pv + (1.0 - label) / (1.0 - pv))
                };
                if let Some(slot) = self.slot(grads, p) {
                    slot.data_mut()[0] += dp;
                }
            }
            Op::SoftAlign { a, b, cache } => {
                let (da, db) = soft_align_backward(self.value(*a), self.value(*b), cache, g);
                if let Some(slot) = self.slot(grads, *a) {
                    slot.add_assign(&da);
                }
                if let Some(slot) = self.slot(grads, *b) {
                    slot.add_assign(&db);
                }
            }
        }
    }
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Backward {
    grads: Vec<Option<Tensor>>,
}

impl Backward {
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Adds the gradients of parameter and embedding nodes into `out`.
    pub fn accumulate_params(&self, tape: &Tape, out: &mut Gradients) {
        for (node, g) in tape.nodes.iter().zip(&self.grads) {
            let Some(g) = g else { continue };
            match &node.op {
                Op::Param(id) => out.get_mut(*id).add_assign(g),
                Op::Embed { param, ids } => {
                    let table = out.get_mut(*param);
                    for (r, &tok) in ids.iter().enumerate() {
                        for (d, gi) in table.row_mut(tok).iter_mut().zip(g.row(r)) {
                            *d += gi;
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

fn broadcast_zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    assert!(
        b.rows() == 1 && b.cols() == a.cols(),
        "cannot broadcast {:?} onto {:?}",
        b.shape(),
        a.shape()
    );
    let mut out = a.clone();
    for r in 0..a.rows() {
        for (o, &y) in out.row_mut(r).iter_mut().zip(b.data()) {
            *o = f(*o, y);
        }
    }
    out
}

fn accumulate_broadcast(db: &mut Tensor, g: &Tensor, sign: f64) {
    if db.shape() == g.shape() {
        for (d, gi) in db.data_mut().iter_mut().zip(g.data()) {
            *d += sign * gi;
        }
    } else {
        for r in 0..g.rows() {
            for (d, gi) in db.data_mut().iter_mut().zip(g.row(r)) {
                *d += sign * gi;
            }
        }
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

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    softmax_in_place(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![1000.0, 0.0, -1000.0]]));
        let y = t.softmax_rows(x);
        for r in 0..2 {
            let s: f64 = t.value(y).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tanh_derivative_at_zero_is_one() {
        let mut t = Tape::new();
        let x = t.input(Tensor::scalar(0.0));
        let y = t.tanh(x);
        let g = t.backward(y);
        assert_eq!(g.grad(x).unwrap().item(), 1.0);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.input(Tensor::row_vector(vec![1.0, -2.0]));
        let z = t.scale(x, 0.0);
        let s = t.sum(z);
        let g = t.backward(s);
        assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::row_vector(vec![1.0, 2.0]));
        let x = t.input(Tensor::row_vector(vec![3.0, 4.0]));
        let m = t.mul(c, x);
        let s = t.sum(m);
        let g = t.backward(s);
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn bce_clamps_saturated_probability() {
        let mut t = Tape::new();
        let p = t.input(Tensor::scalar(1.0));
        let l = t.bce(p, 1.0);
        assert!(t.value(l).item() < 1e-6);
        let g = t.backward(l);
        assert_eq!(g.grad(p).unwrap().item(), 0.0);
    }
}
