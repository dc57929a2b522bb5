use std::sync::Arc;

use super::{Activation, ParamId, ParamStore, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    ConcatCols(Var, Var),
    GatherRows(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    SegmentSoftmax(Var, Arc<[usize]>),
    MulGroups(Var, Var),
    GroupWeightedSum(Var, Var),
    HeadDot(Var, Var),
    Activation(Var, Activation),
    MulConst(Var, Tensor),
    Mse(Var, Tensor),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn check_indices(op: &'static str, index: &[usize], bound: usize) -> Result<()> {
    match index.iter().find(|&&i| i >= bound) {
        Some(&i) => Err(TensorError::IndexOutOfRange { op, index: i, bound }),
        None => Ok(()),
    }
}

fn groups_of(op: &'static str, x: &Tensor, w: &Tensor) -> Result<usize> {
    if x.rows() != w.rows() || w.cols() == 0 || x.cols() % w.cols() != 0 {
        return Err(shape_err(op, x, w));
    }
    Ok(x.cols() / w.cols())
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// A leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn variable(&mut self, value: Tensor) -> Result<Var> {
        self.push("variable", value, Op::Leaf, true)
    }

    /// Registers a parameter on first use; later calls return the same handle.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return Ok(v);
        }
        let v = self.variable(store.get(id).clone())?;
        self.params.push((id, v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.grad(a) || self.grad(b);
        self.push("matmul", value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta, tb));
        }
        let mut value = ta.clone();
        value.add_assign(tb);
        let rg = self.grad(a) || self.grad(b);
        self.push("add", value, Op::Add(a, b), rg)
    }

    /// Adds the `1 x n` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(shape_err("add_row", tx, tb));
        }
        let mut value = tx.clone();
        for r in 0..value.rows() {
            for (v, b) in value.row_mut(r).iter_mut().zip(tb.data()) {
                *v += b;
            }
        }
        let rg = self.grad(x) || self.grad(bias);
        self.push("add_row", value, Op::AddRow(x, bias), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(shape_err("concat_cols", ta, tb));
        }
        let cols = ta.cols() + tb.cols();
        let mut data = Vec::with_capacity(ta.rows() * cols);
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let value = Tensor::new(ta.rows(), cols, data)?;
        let rg = self.grad(a) || self.grad(b);
        self.push("concat_cols", value, Op::ConcatCols(a, b), rg)
    }

    /// Row `k` of the result is row `index[k]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: &Arc<[usize]>) -> Result<Var> {
        let tx = self.value(x);
        check_indices("gather_rows", index, tx.rows())?;
        let mut data = Vec::with_capacity(index.len() * tx.cols());
        for &i in index.iter() {
            data.extend_from_slice(tx.row(i));
        }
        let value = Tensor::new(index.len(), tx.cols(), data)?;
        let rg = self.grad(x);
        self.push("gather_rows", value, Op::GatherRows(x, index.clone()), rg)
    }

    /// Row `i` of the result sums the rows `k` of `values` with `destination[k] == i`.
    pub fn segment_sum(&mut self, values: Var, destination: &Arc<[usize]>, num_segments: usize) -> Result<Var> {
        let tv = self.value(values);
        if destination.len() != tv.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "segment_sum",
                left: tv.shape(),
                right: (destination.len(), 1),
            });
        }
        check_indices("segment_sum", destination, num_segments)?;
        let mut out = Tensor::zeros(num_segments, tv.cols());
        for (k, &d) in destination.iter().enumerate() {
            for (o, v) in out.row_mut(d).iter_mut().zip(tv.row(k)) {
                *o += v;
            }
        }
        let rg = self.grad(values);
        self.push("segment_sum", out, Op::SegmentSum(values, destination.clone()), rg)
    }

    /// Column-wise softmax of `scores` within each destination segment.
    pub fn segment_softmax(&mut self, scores: Var, destination: &Arc<[usize]>, num_segments: usize) -> Result<Var> {
        let ts = self.value(scores);
        if destination.len() != ts.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "segment_softmax",
                left: ts.shape(),
                right: (destination.len(), 1),
            });
        }
        check_indices("segment_softmax", destination, num_segments)?;
        let h = ts.cols();
        let mut max = Tensor::filled(num_segments, h, f64::NEG_INFINITY);
        for (k, &d) in destination.iter().enumerate() {
            for (m, s) in max.row_mut(d).iter_mut().zip(ts.row(k)) {
                *m = m.max(*s);
            }
        }
        let mut out = Tensor::zeros(ts.rows(), h);
        let mut denom = Tensor::zeros(num_segments, h);
        for (k, &d) in destination.iter().enumerate() {
            for c in 0..h {
                let e = (ts.get(k, c) - max.get(d, c)).exp();
                out.set(k, c, e);
                denom.set(d, c, denom.get(d, c) + e);
            }
        }
        for (k, &d) in destination.iter().enumerate() {
            for c in 0..h {
                out.set(k, c, out.get(k, c) / denom.get(d, c));
            }
        }
        let rg = self.grad(scores);
        self.push("segment_softmax", out, Op::SegmentSoftmax(scores, destination.clone()), rg)
    }

    /// Scales column group `g` of each row of `x` by `weights[row, g]`.
    pub fn mul_groups(&mut self, x: Var, weights: Var) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(weights));
        let d = groups_of("mul_groups", tx, tw)?;
        let mut value = tx.clone();
        for r in 0..value.rows() {
            let w = tw.row(r);
            for (c, v) in value.row_mut(r).iter_mut().enumerate() {
                *v *= w[c / d];
            }
        }
        let rg = self.grad(x) || self.grad(weights);
        self.push("mul_groups", value, Op::MulGroups(x, weights), rg)
    }

    /// `out[r, j] = sum_g weights[r, g] * x[r, g * d + j]`.
    pub fn group_weighted_sum(&mut self, x: Var, weights: Var) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(weights));
        let d = groups_of("group_weighted_sum", tx, tw)?;
        let mut value = Tensor::zeros(tx.rows(), d);
        for r in 0..tx.rows() {
            let (xr, wr) = (tx.row(r), tw.row(r));
            let out = value.row_mut(r);
            for (g, &w) in wr.iter().enumerate() {
                for (o, xv) in out.iter_mut().zip(&xr[g * d..(g + 1) * d]) {
                    *o += w * xv;
                }
            }
        }
        let rg = self.grad(x) || self.grad(weights);
        self.push("group_weighted_sum", value, Op::GroupWeightedSum(x, weights), rg)
    }

    /// Per-group dot product with a `1 x (G * d)` row: `out[r, g] = x[r, g-block] . a[g-block]`.
    pub fn head_dot(&mut self, x: Var, a: Var, groups: usize) -> Result<Var> {
        let (tx, ta) = (self.value(x), self.value(a));
        if ta.rows() != 1 || ta.cols() != tx.cols() || groups == 0 || tx.cols() % groups != 0 {
            return Err(shape_err("head_dot", tx, ta));
        }
        let d = tx.cols() / groups;
        let mut value = Tensor::zeros(tx.rows(), groups);
        for r in 0..tx.rows() {
            let xr = tx.row(r);
            for g in 0..groups {
                let s = g * d..(g + 1) * d;
                let dot = xr[s.clone()].iter().zip(&ta.data()[s]).map(|(p, q)| p * q).sum();
                value.set(r, g, dot);
            }
        }
        let rg = self.grad(x) || self.grad(a);
        self.push("head_dot", value, Op::HeadDot(x, a), rg)
    }

    pub fn activation(&mut self, x: Var, act: Activation) -> Result<Var> {
        if act == Activation::Identity {
            return Ok(x);
        }
        let value = self.value(x).map(|v| act.apply(v));
        let rg = self.grad(x);
        self.push(act.name(), value, Op::Activation(x, act), rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        self.activation(x, Activation::LeakyRelu(slope))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Sigmoid)
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, x: Var, factor: Tensor) -> Result<Var> {
        let tx = self.value(x);
        if tx.shape() != factor.shape() {
            return Err(shape_err("mul_const", tx, &factor));
        }
        let mut value = tx.clone();
        for (v, f) in value.data_mut().iter_mut().zip(factor.data()) {
            *v *= f;
        }
        let rg = self.grad(x);
        self.push("mul_const", value, Op::MulConst(x, factor), rg)
    }

    /// Mean squared error over all entries, as a `1 x 1` value.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if tp.shape() != target.shape() || tp.data().is_empty() {
            return Err(shape_err("mse", tp, target));
        }
        let n = tp.data().len() as f64;
        let loss: f64 = tp
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let rg = self.grad(pred);
        self.push("mse", Tensor::scalar(loss), Op::Mse(pred, target.clone()), rg)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.grad(x);
        self.push("sum", value, Op::Sum(x), rg)
    }

    /// Reverse pass from a scalar. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.value(loss).shape();
        if (r, c) != (1, 1) {
            return Err(TensorError::NotScalar { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let nodes = &self.nodes;
            let mut acc = |v: Var, t: Tensor| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot => *slot = Some(t),
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[a.0].requires_grad {
                        acc(*a, g.matmul_nt(val(*b)));
                    }
                    if nodes[b.0].requires_grad {
                        acc(*b, val(*a).matmul_tn(&g));
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRow(x, b) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*b, gb);
                    acc(*x, g);
                }
                Op::ConcatCols(a, b) => {
                    let p = val(*a).cols();
                    let q = val(*b).cols();
                    let mut ga = Tensor::zeros(g.rows(), p);
                    let mut gb = Tensor::zeros(g.rows(), q);
                    for r in 0..g.rows() {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..p]);
                        gb.row_mut(r).copy_from_slice(&g.row(r)[p..]);
                    }
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::GatherRows(x, index) => {
                    let mut gx = Tensor::zeros(val(*x).rows(), g.cols());
                    for (k, &src) in index.iter().enumerate() {
                        for (o, v) in gx.row_mut(src).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    acc(*x, gx);
                }
                Op::SegmentSum(x, dest) => {
                    let mut gx = Tensor::zeros(dest.len(), g.cols());
                    for (k, &d) in dest.iter().enumerate() {
                        gx.row_mut(k).copy_from_slice(g.row(d));
                    }
                    acc(*x, gx);
                }
                Op::SegmentSoftmax(x, dest) => {
                    let y = &node.value;
                    let segments = dest.iter().max().map_or(0, |m| m + 1);
                    let mut dot = Tensor::zeros(segments, y.cols());
                    for (k, &d) in dest.iter().enumerate() {
                        for c in 0..y.cols() {
                            dot.set(d, c, dot.get(d, c) + y.get(k, c) * g.get(k, c));
                        }
                    }
                    let mut gx = Tensor::zeros(y.rows(), y.cols());
                    for (k, &d) in dest.iter().enumerate() {
                        for c in 0..y.cols() {
                            gx.set(k, c, y.get(k, c) * (g.get(k, c) - dot.get(d, c)));
                        }
                    }
                    acc(*x, gx);
                }
                Op::MulGroups(x, w) => {
                    let (tx, tw) = (val(*x), val(*w));
                    let d = tx.cols() / tw.cols();
                    let mut gx = g.clone();
                    let mut gw = Tensor::zeros(tw.rows(), tw.cols());
                    for r in 0..tx.rows() {
                        let (xr, wr, gr) = (tx.row(r), tw.row(r), g.row(r));
                        for (c, v) in gx.row_mut(r).iter_mut().enumerate() {
                            *v *= wr[c / d];
                        }
                        let gwr = gw.row_mut(r);
                        for c in 0..xr.len() {
                            gwr[c / d] += gr[c] * xr[c];
                        }
                    }
                    acc(*x, gx);
                    acc(*w, gw);
                }
                Op::GroupWeightedSum(x, w) => {
                    let (tx, tw) = (val(*x), val(*w));
                    let d = g.cols();
                    let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                    let mut gw = Tensor::zeros(tw.rows(), tw.cols());
                    for r in 0..tx.rows() {
                        let (xr, wr, gr) = (tx.row(r), tw.row(r), g.row(r));
                        let gxr = gx.row_mut(r);
                        for (gi, &wv) in wr.iter().enumerate() {
                            for j in 0..d {
                                gxr[gi * d + j] = wv * gr[j];
                            }
                        }
                        let gwr = gw.row_mut(r);
                        for (gi, o) in gwr.iter_mut().enumerate() {
                            *o = xr[gi * d..(gi + 1) * d].iter().zip(gr).map(|(a, b)| a * b).sum();
                        }
                    }
                    acc(*x, gx);
                    acc(*w, gw);
                }
                Op::HeadDot(x, a) => {
                    let (tx, ta) = (val(*x), val(*a));
                    let groups = g.cols();
                    let d = tx.cols() / groups;
                    let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                    let mut ga = Tensor::zeros(1, ta.cols());
                    for r in 0..tx.rows() {
                        let (xr, gr) = (tx.row(r), g.row(r));
                        let gxr = gx.row_mut(r);
                        for c in 0..xr.len() {
                            gxr[c] = gr[c / d] * ta.data()[c];
                        }
                        for (c, o) in ga.data_mut().iter_mut().enumerate() {
                            *o += gr[c / d] * xr[c];
                        }
                    }
                    acc(*x, gx);
                    acc(*a, ga);
                }
                Op::Activation(x, act) => {
                    let (tx, ty) = (val(*x), &node.value);
                    let mut gx = g;
                    for ((o, &xv), &yv) in gx.data_mut().iter_mut().zip(tx.data()).zip(ty.data()) {
                        *o *= act.derivative(xv, yv);
                    }
                    acc(*x, gx);
                }
                Op::MulConst(x, f) => {
                    let mut gx = g;
                    for (o, fv) in gx.data_mut().iter_mut().zip(f.data()) {
                        *o *= fv;
                    }
                    acc(*x, gx);
                }
                Op::Mse(p, target) => {
                    let tp = val(*p);
                    let scale = 2.0 * g.get(0, 0) / tp.data().len() as f64;
                    let data = tp
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(a, b)| scale * (a - b))
                        .collect();
                    acc(*p, Tensor::new(tp.rows(), tp.cols(), data)?);
                }
                Op::Sum(x) => {
                    let (r, c) = val(*x).shape();
                    acc(*x, Tensor::filled(r, c, g.get(0, 0)));
                }
            }
        }

        Ok(Gradients {
            grads,
            params: self.params,
        })
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient of a variable leaf, `None` if no path reached it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of one parameter; zeros if the loss does not depend on it.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Tensor {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.wrt(*v).cloned())
            .unwrap_or_else(|| {
                let (r, c) = store.get(id).shape();
                Tensor::zeros(r, c)
            })
    }

    /// One gradient per parameter of `store`, in id order.
    pub fn for_store(&self, store: &ParamStore) -> Vec<Tensor> {
        store.ids().map(|id| self.param(store, id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn idx(v: &[usize]) -> Arc<[usize]> {
        Arc::from(v)
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central-difference gradient of `f` at `x`.
    fn numeric_grad(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Tensor {
        let eps = 1e-6;
        let mut g = Tensor::zeros(x.rows(), x.cols());
        for i in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            g.data_mut()[i] = (f(&xp) - f(&xm)) / (2.0 * eps);
        }
        g
    }

    /// Checks d(sum(op(x)) * probe)/dx against finite differences.
    fn check_unary(x: Tensor, op: impl Fn(&mut Tape, Var) -> Result<Var>) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let probe_shape = {
            let mut t = Tape::new();
            let v = t.constant(x.clone()).unwrap();
            let y = op(&mut t, v).unwrap();
            t.value(y).shape()
        };
        let probe = random(&mut rng, probe_shape.0, probe_shape.1);
        let loss = |x: &Tensor| {
            let mut t = Tape::new();
            let v = t.constant(x.clone()).unwrap();
            let y = op(&mut t, v).unwrap();
            let y = t.mul_const(y, probe.clone()).unwrap();
            let s = t.sum(y).unwrap();
            t.value(s).get(0, 0)
        };
        let mut t = Tape::new();
        let v = t.variable(x.clone()).unwrap();
        let y = op(&mut t, v).unwrap();
        let y = t.mul_const(y, probe.clone()).unwrap();
        let s = t.sum(y).unwrap();
        let grads = t.backward(s).unwrap();
        let analytic = grads.wrt(v).unwrap();
        let numeric = numeric_grad(&x, &loss);
        assert!(analytic.max_abs_diff(&numeric) < 1e-6, "{analytic:?} vs {numeric:?}");
    }

    #[test]
    fn matmul_gradient_is_ones_times_b_transposed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 4, 2);
        let mut t = Tape::new();
        let va = t.variable(a.clone()).unwrap();
        let vb = t.constant(b.clone()).unwrap();
        let c = t.matmul(va, vb).unwrap();
        let s = t.sum(c).unwrap();
        let g = t.backward(s).unwrap();
        let expected = Tensor::filled(3, 2, 1.0).matmul(&b.transpose()).unwrap();
        assert!(g.wrt(va).unwrap().max_abs_diff(&expected) < 1e-12);
        let numeric = numeric_grad(&a, &|a: &Tensor| a.matmul(&b).unwrap().sum());
        assert!(g.wrt(va).unwrap().max_abs_diff(&numeric) < 1e-6);
    }

    #[test]
    fn op_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&mut rng, 5, 6);
        let w = random(&mut rng, 6, 3);
        let other = random(&mut rng, 5, 2);
        let weights = random(&mut rng, 5, 3);
        let row = random(&mut rng, 1, 6);
        let gather = idx(&[4, 0, 0, 2, 3, 1, 4]);
        let dest = idx(&[0, 1, 1, 2, 0]);

        check_unary(x.clone(), |t, v| {
            let w = t.constant(w.clone())?;
            t.matmul(v, w)
        });
        check_unary(x.clone(), |t, v| {
            let o = t.constant(other.clone())?;
            t.concat_cols(o, v)
        });
        check_unary(x.clone(), |t, v| t.gather_rows(v, &gather));
        check_unary(x.clone(), |t, v| t.segment_sum(v, &dest, 4));
        check_unary(x.clone(), |t, v| t.segment_softmax(v, &dest, 3));
        check_unary(x.clone(), |t, v| {
            let w = t.constant(weights.clone())?;
            t.mul_groups(v, w)
        });
        check_unary(weights.clone(), |t, w| {
            let x = t.constant(x.clone())?;
            t.mul_groups(x, w)
        });
        check_unary(x.clone(), |t, v| {
            let w = t.constant(weights.clone())?;
            t.group_weighted_sum(v, w)
        });
        check_unary(weights.clone(), |t, w| {
            let x = t.constant(x.clone())?;
            t.group_weighted_sum(x, w)
        });
        check_unary(x.clone(), |t, v| {
            let a = t.constant(row.clone())?;
            t.head_dot(v, a, 3)
        });
        check_unary(row.clone(), |t, a| {
            let x = t.constant(x.clone())?;
            t.head_dot(x, a, 2)
        });
        check_unary(x.clone(), |t, v| {
            let b = t.constant(row.clone())?;
            t.add_row(v, b)
        });
        check_unary(row.clone(), |t, b| {
            let x = t.constant(x.clone())?;
            t.add_row(x, b)
        });
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::LeakyRelu(0.2)] {
            check_unary(x.clone(), move |t, v| t.activation(v, act));
        }
        let target = random(&mut rng, 5, 6);
        check_unary(x.clone(), |t, v| t.mse(v, &target));
    }

    #[test]
    fn concat_with_empty_block_is_identity() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let mut t = Tape::new();
        let va = t.constant(a.clone()).unwrap();
        let vb = t.constant(Tensor::zeros(2, 0)).unwrap();
        let c = t.concat_cols(va, vb).unwrap();
        assert_eq!(t.value(c), &a);
        let e = t.concat_cols(va, va).unwrap();
        assert_eq!(t.value(e).shape(), (2, 4));
    }

    #[test]
    fn segment_sum_basics() {
        let mut t = Tape::new();
        let v = t.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]])).unwrap();
        let s = t.segment_sum(v, &idx(&[0, 0]), 3).unwrap();
        assert_eq!(t.value(s), &Tensor::from_rows(&[[4.0, 6.0], [0.0, 0.0], [0.0, 0.0]]));
        assert!(matches!(
            t.segment_sum(v, &idx(&[0, 3]), 3),
            Err(TensorError::IndexOutOfRange { index: 3, bound: 3, .. })
        ));
    }

    #[test]
    fn segment_softmax_basics() {
        let mut t = Tape::new();
        let single = t.constant(Tensor::from_rows(&[[3.7]])).unwrap();
        let w = t.segment_softmax(single, &idx(&[0]), 1).unwrap();
        assert_eq!(t.value(w).get(0, 0), 1.0);

        let pair = t.constant(Tensor::from_rows(&[[0.3], [0.3]])).unwrap();
        let w = t.segment_softmax(pair, &idx(&[0, 0]), 1).unwrap();
        assert_eq!(t.value(w).data(), &[0.5, 0.5]);

        // hand evaluation: e^0 / (1 + 3) and 3 / (1 + 3)
        let s = t.constant(Tensor::from_rows(&[[0.0], [3f64.ln()]])).unwrap();
        let w = t.segment_softmax(s, &idx(&[0, 0]), 1).unwrap();
        assert_abs_diff_eq!(t.value(w).get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t.value(w).get(1, 0), 0.75, epsilon = 1e-15);

        // large scores stay finite thanks to max subtraction
        let big = t.constant(Tensor::from_rows(&[[1000.0], [1001.0]])).unwrap();
        let w = t.segment_softmax(big, &idx(&[0, 0]), 1).unwrap();
        assert!(t.value(w).is_finite());
    }

    #[test]
    fn activations_and_mse_values() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[[-1.0, 0.0]])).unwrap();
        let l = t.leaky_relu(x, 0.2).unwrap();
        assert_eq!(t.value(l).data(), &[-0.2, 0.0]);
        let s = t.sigmoid(x).unwrap();
        assert_eq!(t.value(s).get(0, 1), 0.5);

        let p = t.constant(Tensor::from_rows(&[[1.0, 0.0]])).unwrap();
        let m = t.mse(p, &Tensor::from_rows(&[[0.0, 0.0]])).unwrap();
        assert_eq!(t.value(m).get(0, 0), 0.5);
        let m = t.mse(p, &Tensor::from_rows(&[[1.0, 0.0]])).unwrap();
        assert_eq!(t.value(m).get(0, 0), 0.0);
        let half = t.constant(Tensor::filled(4, 2, 0.5)).unwrap();
        let labels = Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        let m = t.mse(half, &labels).unwrap();
        assert_eq!(t.value(m).get(0, 0), 0.25);
        assert!(t.mse(half, &Tensor::zeros(2, 2)).is_err());
    }

    #[test]
    fn square_gradient_and_disconnected_parameter() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(3.0)).unwrap();
        let unused = store.add("unused", Tensor::zeros(2, 2)).unwrap();
        let mut t = Tape::new();
        let vw = t.param(&store, w).unwrap();
        let _ = t.param(&store, unused).unwrap();
        assert_eq!(t.param(&store, w).unwrap(), vw);
        let sq = t.matmul(vw, vw).unwrap();
        let g = t.backward(sq).unwrap();
        assert_eq!(g.param(&store, w).get(0, 0), 6.0);
        assert_eq!(g.param(&store, unused), Tensor::zeros(2, 2));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let v = t.variable(Tensor::zeros(2, 1)).unwrap();
        assert!(matches!(t.backward(v), Err(TensorError::NotScalar { rows: 2, cols: 1 })));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut t = Tape::new();
        let v = t.constant(Tensor::from_rows(&[[1e300]])).unwrap();
        assert!(matches!(t.matmul(v, v), Err(TensorError::NonFinite { op: "matmul" })));
        assert!(t.constant(Tensor::from_rows(&[[f64::NAN]])).is_err());
    }
}
