use serde::{Deserialize, Serialize};

/// Handle to a parameter registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// One named parameter with its Adam moment buffers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub trainable: bool,
    #[serde(skip)]
    m: Vec<f64>,
    #[serde(skip)]
    v: Vec<f64>,
}

/// Flat registry of model parameters. Registration order is the iteration
/// order everywhere (updates, snapshots, checkpoints), so numeric results
/// never depend on hashing.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        values: Vec<f64>,
        trainable: bool,
    ) -> ParamId {
        let numel: usize = shape.iter().product();
        assert_eq!(numel, values.len(), "shape {shape:?} does not match {} values", values.len());
        let n = values.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            values,
            trainable,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].values
    }

    pub fn set_value(&mut self, id: ParamId, values: Vec<f64>) {
        assert_eq!(values.len(), self.entries[id.0].values.len());
        self.entries[id.0].values = values;
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    /// Number of scalar components across trainable parameters.
    pub fn trainable_numel(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.values.len())
            .sum()
    }

    /// Copy of all parameter values, for best-epoch checkpointing.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.values.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        assert_eq!(snapshot.len(), self.entries.len());
        for (e, s) in self.entries.iter_mut().zip(snapshot) {
            assert_eq!(e.values.len(), s.len());
            e.values.copy_from_slice(s);
        }
    }

    /// One Adam update. Parameters without a gradient, and parameters marked
    /// non-trainable, are left untouched (moments included).
    pub fn adam_step(&mut self, cfg: &AdamConfig, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (entry, grad) in self.entries.iter_mut().zip(grads.0.iter()) {
            let Some(g) = grad else { continue };
            if !entry.trainable {
                continue;
            }
            for i in 0..entry.values.len() {
                entry.m[i] = cfg.beta1 * entry.m[i] + (1.0 - cfg.beta1) * g[i];
                entry.v[i] = cfg.beta2 * entry.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = entry.m[i] / bc1;
                let v_hat = entry.v[i] / bc2;
                entry.values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
}

/// Gradients keyed by parameter id, produced by [`super::Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<Option<Vec<f64>>>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.0.get(id.0).and_then(|g| g.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig {
            lr: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}
