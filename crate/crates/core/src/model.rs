//! Neural logic model: 26 letter embeddings, trainable AND/OR/NOT modules,
//! and the similarity head that turns an expression vector into a truth
//! probability.
//!
//! AND and OR are maps `2d -> hidden -> d`, NOT is `d -> hidden -> d`; each
//! is two affine layers with a relu between them (linear output). N-ary
//! connectives are evaluated as a left fold of the binary module; training
//! shuffles operand order per forward pass to push the modules toward
//! commutativity, evaluation keeps expression order so outputs are
//! deterministic.

use crate::autodiff::{dot_slices, stable_sigmoid, Graph, NodeId, ParamId, ParamStore};
use crate::logic::{is_nnf, to_nnf, Expr, Letter};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Sharpness of the cosine-to-probability squash.
    pub alpha: f64,
    /// Hidden width of the three logic modules.
    pub hidden: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        // d and hidden are sized so a full per-problem training run takes
        // seconds on one CPU core; hidden = 2d is load-bearing — at hidden = d
        // the modules lack the slack to satisfy the logical laws and fit the
        // data at once, and held-out accuracy degrades measurably.
        ModelConfig {
            d: 16,
            alpha: 10.0,
            hidden: 32,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d < 2 {
            return Err(ModelError::InvalidConfig(format!("d must be >= 2, got {}", self.d)));
        }
        if !(self.alpha > 0.0) {
            return Err(ModelError::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.hidden < 1 {
            return Err(ModelError::InvalidConfig("hidden must be >= 1".into()));
        }
        Ok(())
    }
}

/// Whether a forward pass is part of training (operand shuffling on) or
/// evaluation (deterministic expression order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy)]
pub struct ModuleIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// The full trainable state plus the frozen truth anchor.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    pub emb: [ParamId; 26],
    pub and: ModuleIds,
    pub or: ModuleIds,
    pub not: ModuleIds,
    /// Anchor "true" vector: drawn at init, never updated.
    pub t_anchor: ParamId,
}

/// Expression vectors produced while assembling one expression into the
/// graph. `w` lists, bottom-up and once per occurrence, every leaf embedding,
/// every NOT output, every fold intermediate, and the root — the collection
/// the logical regularizers quantify over.
#[derive(Debug, Clone)]
pub struct GraphTrace {
    pub output: NodeId,
    pub w: Vec<NodeId>,
}

/// Value-level counterpart of [`GraphTrace`] for callers that outlive the
/// graph (inspection, tests).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub output: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 * bound - bound).collect()
}

impl Model {
    /// Initialize from the config seed. Weights, biases, embeddings and the
    /// anchor all come from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) of their
    /// layer; the draw order (embeddings A..Z, then AND, OR, NOT layer by
    /// layer, then the anchor) is part of the determinism contract.
    pub fn init(cfg: &ModelConfig) -> Result<Model, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut store = ParamStore::new();
        let (d, h) = (cfg.d, cfg.hidden);
        let emb_bound = 1.0 / (d as f64).sqrt();

        let emb: Vec<ParamId> = Letter::all()
            .map(|l| {
                let vals = uniform(&mut rng, d, emb_bound);
                store.register(&format!("emb.{l}"), &[d], vals, true)
            })
            .collect();

        let mut module = |store: &mut ParamStore, name: &str, in_dim: usize| {
            let bound1 = 1.0 / (in_dim as f64).sqrt();
            let bound2 = 1.0 / (h as f64).sqrt();
            ModuleIds {
                w1: store.register(&format!("{name}.w1"), &[h, in_dim], uniform(&mut rng, h * in_dim, bound1), true),
                b1: store.register(&format!("{name}.b1"), &[h], uniform(&mut rng, h, bound1), true),
                w2: store.register(&format!("{name}.w2"), &[d, h], uniform(&mut rng, d * h, bound2), true),
                b2: store.register(&format!("{name}.b2"), &[d], uniform(&mut rng, d, bound2), true),
            }
        };
        let and = module(&mut store, "and", 2 * d);
        let or = module(&mut store, "or", 2 * d);
        let not = module(&mut store, "not", d);

        let t_vals = uniform(&mut rng, d, emb_bound);
        let t_anchor = store.register("anchor.true", &[d], t_vals, false);

        Ok(Model {
            cfg: *cfg,
            store,
            emb: emb.try_into().unwrap(),
            and,
            or,
            not,
            t_anchor,
        })
    }

    pub fn embedding_id(&self, l: Letter) -> ParamId {
        self.emb[l.index()]
    }

    /// One application of a binary module to graph nodes.
    pub fn apply_binary(&self, g: &mut Graph, m: &ModuleIds, a: NodeId, b: NodeId) -> NodeId {
        let x = g.concat(a, b);
        self.apply_layers(g, m, x)
    }

    pub fn apply_not(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let ids = self.not;
        self.apply_layers(g, &ids, x)
    }

    fn apply_layers(&self, g: &mut Graph, m: &ModuleIds, x: NodeId) -> NodeId {
        let w1 = g.param(&self.store, m.w1);
        let b1 = g.param(&self.store, m.b1);
        let w2 = g.param(&self.store, m.w2);
        let b2 = g.param(&self.store, m.b2);
        let pre = g.matvec(w1, x);
        let pre = g.add(pre, b1);
        let hid = g.relu(pre);
        let out = g.matvec(w2, hid);
        g.add(out, b2)
    }

    /// Left fold of the binary module over `operands`. Train mode shuffles
    /// the operand order first; eval mode folds in the given order. Every
    /// application's output is appended to `w`.
    pub fn fold_connective(
        &self,
        g: &mut Graph,
        module: &ModuleIds,
        operands: &[NodeId],
        mode: Mode,
        rng: &mut dyn RngCore,
        w: &mut Vec<NodeId>,
    ) -> NodeId {
        assert!(operands.len() >= 2, "connective fold needs at least two operands");
        let mut order: Vec<NodeId> = operands.to_vec();
        if mode == Mode::Train {
            // Fisher-Yates via rand, driven by the training rng
            use rand::seq::SliceRandom;
            order.shuffle(rng);
        }
        let mut acc = order[0];
        for &next in &order[1..] {
            acc = self.apply_binary(g, module, acc, next);
            w.push(acc);
        }
        acc
    }

    /// Build the graph for an NNF expression. Returns the root node and the
    /// bottom-up trace of every expression vector produced.
    pub fn assemble(
        &self,
        g: &mut Graph,
        e: &Expr,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> GraphTrace {
        debug_assert!(is_nnf(e), "assemble expects NNF input");
        let mut w = Vec::new();
        let output = self.assemble_rec(g, e, mode, rng, &mut w);
        GraphTrace { output, w }
    }

    fn assemble_rec(
        &self,
        g: &mut Graph,
        e: &Expr,
        mode: Mode,
        rng: &mut dyn RngCore,
        w: &mut Vec<NodeId>,
    ) -> NodeId {
        match e {
            Expr::Var(l) => {
                let node = g.param(&self.store, self.embedding_id(*l));
                w.push(node);
                node
            }
            Expr::Not(inner) => {
                let x = self.assemble_rec(g, inner, mode, rng, w);
                let out = self.apply_not(g, x);
                w.push(out);
                out
            }
            Expr::And(xs) | Expr::Or(xs) => {
                let operands: Vec<NodeId> = xs
                    .iter()
                    .map(|x| self.assemble_rec(g, x, mode, rng, w))
                    .collect();
                let module = if matches!(e, Expr::And(_)) { self.and } else { self.or };
                self.fold_connective(g, &module, &operands, mode, rng, w)
            }
        }
    }

    /// `sigmoid(alpha * cos(u, v))` as a graph node.
    pub fn similarity_node(&self, g: &mut Graph, u: NodeId, v: NodeId) -> NodeId {
        let c = g.cosine(u, v);
        let scaled = g.scalar_mul(self.cfg.alpha, c);
        g.sigmoid(scaled)
    }

    pub fn anchor_node(&self, g: &mut Graph) -> NodeId {
        g.param(&self.store, self.t_anchor)
    }

    /// Truth probability of an expression (normalized to NNF internally if
    /// needed), together with the materialized forward trace.
    pub fn predict_truth(
        &self,
        e: &Expr,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> (f64, ForwardTrace) {
        let nnf = if is_nnf(e) { e.clone() } else { to_nnf(e) };
        let mut g = Graph::new();
        let trace = self.assemble(&mut g, &nnf, mode, rng);
        let t = self.anchor_node(&mut g);
        let p = self.similarity_node(&mut g, trace.output, t);
        let materialized = ForwardTrace {
            output: g.value(trace.output).to_vec(),
            w: trace.w.iter().map(|&n| g.value(n).to_vec()).collect(),
        };
        (g.scalar_value(p), materialized)
    }

    /// Eval-mode truth probability computed without building a tape.
    ///
    /// Gradient-free sweeps (per-epoch accuracy, candidate scoring previews)
    /// don't need the graph's bookkeeping, which costs more than the math at
    /// these sizes. This path applies the same primitives in the same order
    /// as the graph ops (`dot_slices` rows, bias added after the matvec,
    /// `max(0.0)` relu, the stable sigmoid), so its result is bit-identical
    /// to `predict_truth` in eval mode — asserted by a test.
    pub fn eval_truth(&self, e: &Expr) -> f64 {
        debug_assert!(is_nnf(e), "eval_truth expects NNF input");
        let out = self.eval_vector(e);
        let t = self.store.value(self.t_anchor);
        assert_eq!(out.len(), t.len());
        let na = dot_slices(&out, &out).sqrt();
        let nb = dot_slices(t, t).sqrt();
        assert!(na > 0.0 && nb > 0.0, "cosine of a zero-norm vector is undefined");
        let cos = dot_slices(&out, t) / (na * nb);
        stable_sigmoid(self.cfg.alpha * cos)
    }

    fn eval_vector(&self, e: &Expr) -> Vec<f64> {
        match e {
            Expr::Var(l) => self.store.value(self.embedding_id(*l)).to_vec(),
            Expr::Not(inner) => {
                let x = self.eval_vector(inner);
                self.eval_layers(&self.not, &x)
            }
            Expr::And(xs) | Expr::Or(xs) => {
                let m = if matches!(e, Expr::And(_)) { self.and } else { self.or };
                let mut acc = self.eval_vector(&xs[0]);
                let mut cat = Vec::with_capacity(2 * acc.len());
                for x in &xs[1..] {
                    let next = self.eval_vector(x);
                    cat.clear();
                    cat.extend_from_slice(&acc);
                    cat.extend_from_slice(&next);
                    acc = self.eval_layers(&m, &cat);
                }
                acc
            }
        }
    }

    fn eval_layers(&self, m: &ModuleIds, x: &[f64]) -> Vec<f64> {
        let s = &self.store;
        let mut hid = eval_affine(s.value(m.w1), s.value(m.b1), x);
        for v in hid.iter_mut() {
            *v = v.max(0.0);
        }
        eval_affine(s.value(m.w2), s.value(m.b2), &hid)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg,
            params: self
                .store
                .entries()
                .map(|(_, e)| CheckpointParam {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    values: e.values.clone(),
                    trainable: e.trainable,
                })
                .collect(),
        }
    }

    /// Rebuild a model from a checkpoint, validating that the parameter list
    /// matches what the config implies (same names, same shapes, same order).
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Model, ModelError> {
        let mut model = Model::init(&ck.config)?;
        let expected: Vec<_> = model.store.entries().map(|(id, e)| (id, e.name.clone(), e.shape.clone(), e.trainable)).collect();
        if expected.len() != ck.params.len() {
            return Err(ModelError::BadCheckpoint(format!(
                "expected {} parameters, found {}",
                expected.len(),
                ck.params.len()
            )));
        }
        for ((id, name, shape, trainable), p) in expected.into_iter().zip(&ck.params) {
            if p.name != name || p.shape != shape || p.trainable != trainable {
                return Err(ModelError::BadCheckpoint(format!(
                    "parameter mismatch at {name}: checkpoint has {} {:?} trainable={}",
                    p.name, p.shape, p.trainable
                )));
            }
            let numel: usize = p.shape.iter().product();
            if p.values.len() != numel {
                return Err(ModelError::BadCheckpoint(format!(
                    "parameter {} has {} values for shape {:?}",
                    p.name,
                    p.values.len(),
                    p.shape
                )));
            }
            model.store.set_value(id, p.values.clone());
        }
        Ok(model)
    }
}

// Matvec (dot per row) followed by an elementwise bias add, mirroring the
// graph's MatVec + Add pair so the floats come out identical.
fn eval_affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert!(w.len() % n == 0);
    let mut out = Vec::with_capacity(w.len() / n);
    for row in w.chunks_exact(n) {
        out.push(dot_slices(row, x));
    }
    for (o, &bi) in out.iter_mut().zip(b.iter()) {
        *o += bi;
    }
    out
}

/// Serialized model: config plus every parameter (the frozen anchor
/// included) in registration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Vec<CheckpointParam>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub trainable: bool,
}

/// Plain recursive evaluator used as an oracle for the graph path: same
/// model parameters, same eval-order folds, but straight-line vector math
/// with no autodiff involvement.
pub mod reference {
    use super::*;

    fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let rows = w.len() / n;
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            let mut acc = b[r];
            for c in 0..n {
                acc += w[r * n + c] * x[c];
            }
            out[r] = acc;
        }
        out
    }

    fn layers(model: &Model, m: &ModuleIds, x: &[f64]) -> Vec<f64> {
        let s = &model.store;
        let mut hid = affine(s.value(m.w1), s.value(m.b1), x);
        for v in hid.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        affine(s.value(m.w2), s.value(m.b2), &hid)
    }

    fn binary(model: &Model, m: &ModuleIds, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(a.len() + b.len());
        x.extend_from_slice(a);
        x.extend_from_slice(b);
        layers(model, m, &x)
    }

    /// Eval-mode forward pass over an NNF expression.
    pub fn forward(model: &Model, e: &Expr) -> Vec<f64> {
        match e {
            Expr::Var(l) => model.store.value(model.embedding_id(*l)).to_vec(),
            Expr::Not(inner) => layers(model, &model.not, &forward(model, inner)),
            Expr::And(xs) | Expr::Or(xs) => {
                let m = if matches!(e, Expr::And(_)) { &model.and } else { &model.or };
                let mut acc = forward(model, &xs[0]);
                for x in &xs[1..] {
                    acc = binary(model, m, &acc, &forward(model, x));
                }
                acc
            }
        }
    }

    /// Truth probability via the reference forward pass.
    pub fn predict_truth(model: &Model, e: &Expr) -> f64 {
        let nnf = if crate::logic::is_nnf(e) { e.clone() } else { crate::logic::to_nnf(e) };
        let out = forward(model, &nnf);
        let t = model.store.value(model.t_anchor);
        let dot: f64 = out.iter().zip(t).map(|(a, b)| a * b).sum();
        let nu: f64 = out.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = t.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(nu > 0.0 && nv > 0.0, "cosine of a zero-norm vector is undefined");
        let cos = dot / (nu * nv);
        1.0 / (1.0 + (-model.cfg.alpha * cos).exp())
    }
}
