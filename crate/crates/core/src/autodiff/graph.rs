use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{dot_slices, stable_sigmoid, Tensor};

/// Handle to a node in a [`Graph`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Matrix (row-major, shape inferred) times vector.
    MatVec(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    ScalarMul(f64, NodeId),
    Sum(NodeId),
    Dot(NodeId, NodeId),
    L2NormSq(NodeId),
    Cosine(NodeId, NodeId),
    Ln(NodeId),
}

/// Append-only computation graph. Values are computed eagerly as nodes are
/// pushed; node ids are therefore already in topological order and
/// [`Graph::backward`] is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    ops: Vec<Op>,
    values: Vec<Tensor>,
    param_nodes: Vec<Option<NodeId>>,
    n_params: usize,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn with_capacity(nodes: usize) -> Graph {
        Graph {
            ops: Vec::with_capacity(nodes),
            values: Vec::with_capacity(nodes),
            ..Graph::default()
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.values[id.0].as_scalar()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        assert!(!value.is_empty(), "zero-length tensors are not supported");
        self.ops.push(op);
        self.values.push(value);
        NodeId(self.ops.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn scalar(&mut self, x: f64) -> NodeId {
        self.push(Op::Const, Tensor::scalar(x))
    }

    /// Leaf for a stored parameter. The value is copied in at call time; the
    /// node is cached so each parameter appears once per graph and gradient
    /// contributions from all uses accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.n_params = self.n_params.max(store.len());
        if self.param_nodes.len() < self.n_params {
            self.param_nodes.resize(self.n_params, None);
        }
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        let node = self.push(Op::Param(id), Tensor(store.value(id).to_vec()));
        self.param_nodes[id.0] = Some(node);
        node
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip_with(&self.values[a.0], &self.values[b.0], |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip_with(&self.values[a.0], &self.values[b.0], |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip_with(&self.values[a.0], &self.values[b.0], |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    /// `w` is a flattened row-major matrix whose column count is `x.len()`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let (wv, xv) = (&self.values[w.0], &self.values[x.0]);
        let n = xv.len();
        assert!(wv.len() % n == 0, "matrix of {} elements is not a multiple of input size {n}", wv.len());
        let rows = wv.len() / n;
        let mut out = Vec::with_capacity(rows);
        for row in wv.chunks_exact(n) {
            out.push(dot_slices(row, xv));
        }
        self.push(Op::MatVec(w, x), Tensor(out))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = Vec::with_capacity(self.values[a.0].len() + self.values[b.0].len());
        v.extend_from_slice(&self.values[a.0]);
        v.extend_from_slice(&self.values[b.0]);
        self.push(Op::Concat(a, b), Tensor(v))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = Tensor(self.values[x.0].iter().map(|&t| t.max(0.0)).collect());
        self.push(Op::Relu(x), v)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = Tensor(self.values[x.0].iter().map(|&t| stable_sigmoid(t)).collect());
        self.push(Op::Sigmoid(x), v)
    }

    pub fn scalar_mul(&mut self, c: f64, x: NodeId) -> NodeId {
        let v = Tensor(self.values[x.0].iter().map(|&t| c * t).collect());
        self.push(Op::ScalarMul(c, x), v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.values[x.0].iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(av.len(), bv.len());
        let s = dot_slices(av, bv);
        self.push(Op::Dot(a, b), Tensor::scalar(s))
    }

    pub fn l2_norm_sq(&mut self, x: NodeId) -> NodeId {
        let xv = &self.values[x.0];
        let s = dot_slices(xv, xv);
        self.push(Op::L2NormSq(x), Tensor::scalar(s))
    }

    /// Cosine similarity of two vectors. A zero-norm operand is a hard error:
    /// the quantity is undefined there and reaching it means the model state
    /// is broken.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(av.len(), bv.len());
        let na = dot_slices(av, av).sqrt();
        let nb = dot_slices(bv, bv).sqrt();
        assert!(
            na > 0.0 && nb > 0.0,
            "cosine of a zero-norm vector is undefined"
        );
        let s = dot_slices(av, bv) / (na * nb);
        self.push(Op::Cosine(a, b), Tensor::scalar(s))
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let v = Tensor(self.values[x.0].iter().map(|&t| t.ln()).collect());
        self.push(Op::Ln(x), v)
    }

    /// Reverse sweep from a scalar root. Returns the gradient of the root
    /// with respect to every parameter that participates in the graph.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(self.values[root.0].len(), 1, "backward root must be a scalar");
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.ops.len()];
        grads[root.0] = vec![1.0];
        let mut out = Gradients(vec![None; self.n_params]);

        for i in (0..=root.0).rev() {
            if grads[i].is_empty() {
                continue; // not on any path to the root
            }
            let g = std::mem::take(&mut grads[i]);
            match self.ops[i] {
                Op::Const => {}
                Op::Param(pid) => {
                    // node cache guarantees one node per param, so no merge
                    out.0[pid.0] = Some(g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g, |gi, _| gi);
                    accumulate(&mut grads[b.0], &g, |gi, _| gi);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], &g, |gi, _| gi);
                    accumulate(&mut grads[b.0], &g, |gi, _| -gi);
                }
                Op::Mul(a, b) => {
                    let bv = &self.values[b.0];
                    accumulate(&mut grads[a.0], &g, |gi, i| gi * bv[i]);
                    let av = &self.values[a.0];
                    accumulate(&mut grads[b.0], &g, |gi, i| gi * av[i]);
                }
                Op::MatVec(w, x) => {
                    let xv = &self.values[x.0];
                    let n = xv.len();
                    // dL/dW[r,c] = g[r] * x[c]
                    {
                        let gw = ensure(&mut grads[w.0], self.values[w.0].len());
                        for (row, &gr) in gw.chunks_exact_mut(n).zip(g.iter()) {
                            for (slot, &xc) in row.iter_mut().zip(xv.iter()) {
                                *slot += gr * xc;
                            }
                        }
                    }
                    // dL/dx = W^T g
                    let wv = &self.values[w.0];
                    let gx = ensure(&mut grads[x.0], n);
                    for (row, &gr) in wv.chunks_exact(n).zip(g.iter()) {
                        for (slot, &wc) in gx.iter_mut().zip(row.iter()) {
                            *slot += wc * gr;
                        }
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.values[a.0].len();
                    {
                        let ga = ensure(&mut grads[a.0], na);
                        for (slot, gi) in ga.iter_mut().zip(&g[..na]) {
                            *slot += gi;
                        }
                    }
                    let nb = self.values[b.0].len();
                    let gb = ensure(&mut grads[b.0], nb);
                    for (slot, gi) in gb.iter_mut().zip(&g[na..]) {
                        *slot += gi;
                    }
                }
                Op::Relu(x) => {
                    // subgradient 0 at the kink
                    let xv = &self.values[x.0];
                    accumulate(&mut grads[x.0], &g, |gi, i| if xv[i] > 0.0 { gi } else { 0.0 });
                }
                Op::Sigmoid(x) => {
                    let yv = &self.values[i];
                    accumulate(&mut grads[x.0], &g, |gi, i| gi * yv[i] * (1.0 - yv[i]));
                }
                Op::ScalarMul(c, x) => {
                    accumulate(&mut grads[x.0], &g, |gi, _| c * gi);
                }
                Op::Sum(x) => {
                    let n = self.values[x.0].len();
                    let gs = g[0];
                    let gx = ensure(&mut grads[x.0], n);
                    for slot in gx.iter_mut() {
                        *slot += gs;
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g[0];
                    let bv = &self.values[b.0];
                    let ga = ensure(&mut grads[a.0], bv.len());
                    for (slot, &bi) in ga.iter_mut().zip(bv.iter()) {
                        *slot += gs * bi;
                    }
                    let av = &self.values[a.0];
                    let gb = ensure(&mut grads[b.0], av.len());
                    for (slot, &ai) in gb.iter_mut().zip(av.iter()) {
                        *slot += gs * ai;
                    }
                }
                Op::L2NormSq(x) => {
                    let gs = g[0];
                    let xv = &self.values[x.0];
                    accumulate_len(&mut grads[x.0], xv.len(), |slot, i| {
                        *slot += 2.0 * gs * xv[i];
                    });
                }
                Op::Cosine(a, b) => {
                    let gs = g[0];
                    let y = self.values[i].as_scalar();
                    let av = &self.values[a.0];
                    let bv = &self.values[b.0];
                    let na2 = dot_slices(av, av);
                    let nb2 = dot_slices(bv, bv);
                    let denom = (na2 * nb2).sqrt();
                    {
                        let ga = ensure(&mut grads[a.0], av.len());
                        for j in 0..av.len() {
                            ga[j] += gs * (bv[j] / denom - y * av[j] / na2);
                        }
                    }
                    let gb = ensure(&mut grads[b.0], bv.len());
                    for j in 0..bv.len() {
                        gb[j] += gs * (av[j] / denom - y * bv[j] / nb2);
                    }
                }
                Op::Ln(x) => {
                    let xv = &self.values[x.0];
                    accumulate(&mut grads[x.0], &g, |gi, i| gi / xv[i]);
                }
            }
        }
        out
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Tensor {
    assert_eq!(a.len(), b.len(), "elementwise op on mismatched lengths {} vs {}", a.len(), b.len());
    Tensor(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
}

fn ensure(buf: &mut Vec<f64>, n: usize) -> &mut [f64] {
    if buf.is_empty() {
        buf.resize(n, 0.0);
    }
    debug_assert_eq!(buf.len(), n);
    buf
}

// buf[i] += f(g[i], i)
fn accumulate(buf: &mut Vec<f64>, g: &[f64], f: impl Fn(f64, usize) -> f64) {
    let slots = ensure(buf, g.len());
    for (i, (slot, &gi)) in slots.iter_mut().zip(g).enumerate() {
        *slot += f(gi, i);
    }
}

fn accumulate_len(buf: &mut Vec<f64>, n: usize, f: impl Fn(&mut f64, usize)) {
    let slots = ensure(buf, n);
    for (i, slot) in slots.iter_mut().enumerate() {
        f(slot, i);
    }
}
