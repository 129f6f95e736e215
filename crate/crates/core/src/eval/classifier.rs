//! Sequence classifier over PCA frame codes, and its metrics.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pca::{fit_pca, PcaBasis};
use crate::autodiff::{adam_step, load_checkpoint, save_checkpoint, softmax_rows, AdamConfig, AdamState, Graph, ParamStore, Tensor, Var};
use crate::data::{Expression, ExpressionSequence, NUM_EXPRESSIONS};
use crate::error::{Error, Result};
use crate::layers::{dense, init_dense};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Frames per resampled sequence (`T_c`).
    pub frames: usize,
    /// PCA coefficients per frame.
    pub components: usize,
    pub hidden: [usize; 2],
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            frames: 20,
            components: 64,
            hidden: [256, 64],
            lr: 1e-3,
            weight_decay: 5e-3,
            epochs: 13,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.components == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("classifier sizes must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "classifier lr {} / weight decay {} out of range",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ClassifierHeader {
    config: ClassifierConfig,
    config_hash: String,
}

/// Nearest-frame indices that resample `len` frames to `target`.
pub fn resample_indices(len: usize, target: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    if target == 1 {
        return vec![0];
    }
    (0..target)
        .map(|i| ((i * (len - 1)) as f64 / (target - 1) as f64).round() as usize)
        .collect()
}

/// Fully connected network `d_in -> h0 -> h1 -> classes` with ReLU between
/// layers; the output is read through a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub store: ParamStore<f64>,
    pub classes: usize,
}

impl Mlp {
    pub fn new(d_in: usize, hidden: [usize; 2], classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dims = [d_in, hidden[0], hidden[1], classes];
        for (l, w) in dims.windows(2).enumerate() {
            let (wt, b) = init_dense(&mut rng, w[0], w[1]);
            store.add(format!("fc{l}.w"), wt);
            store.add(format!("fc{l}.b"), b);
        }
        Mlp { store, classes }
    }

    pub fn input_dim(&self) -> usize {
        self.store.tensors()[0].rows()
    }

    fn logits(&self, g: &mut Graph<f64>, vars: &[Var], x: &[f64]) -> Result<Var> {
        let mut h = g.input(Tensor::from_f64(&[1, x.len()], x)?);
        for l in 0..3 {
            h = dense(g, h, vars[2 * l], vars[2 * l + 1])?;
            if l < 2 {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    /// Class probabilities of one feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("{} features, network expects {}", x.len(), self.input_dim())));
        }
        let mut g = Graph::new();
        let vars: Vec<_> = self.store.tensors().iter().map(|t| g.input(t.clone())).collect();
        let out = self.logits(&mut g, &vars, x)?;
        Ok(softmax_rows(g.value(out).data(), self.classes))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(argmax(&p))
    }

    /// Cross-entropy training, one Adam step per sample in a seeded order.
    /// Returns the mean loss of each epoch.
    pub fn train(&mut self, xs: &[Vec<f64>], ys: &[usize], cfg: &ClassifierConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InvalidArgument(format!("{} samples for {} labels", xs.len(), ys.len())));
        }
        if let Some(c) = (0..self.classes).find(|c| !ys.contains(c)) {
            return Err(Error::InvalidArgument(format!("class {c} is absent from the training set")));
        }
        if let Some(y) = ys.iter().find(|&&y| y >= self.classes) {
            return Err(Error::InvalidArgument(format!("label {y} outside {} classes", self.classes)));
        }
        let adam = AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(self.store.tensors());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x636c_6173);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for &i in &order {
                let mut g = Graph::new();
                let vars = self.store.bind(&mut g);
                let logits = self.logits(&mut g, &vars, &xs[i])?;
                let loss = g.softmax_cross_entropy(logits, Arc::new(vec![ys[i]]))?;
                let value = g.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("classifier epoch {}, sample {i}", epoch + 1)));
                }
                total += value;
                let grads = g.backward(loss)?;
                let grads = self.store.collect_grads(&grads, &vars);
                adam_step(self.store.tensors_mut(), &grads, &mut state, &adam)?;
            }
            history.push(total / xs.len() as f64);
        }
        Ok(history)
    }
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Expression classifier: frames resampled to `T_c`, each projected onto a
/// PCA basis of training frames, coefficients whitened and concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub basis: PcaBasis,
    /// Per-component divisor (standard deviation on the training frames).
    pub coeff_scale: Vec<f64>,
    pub mlp: Mlp,
}

fn resampled_displacements(seq: &ExpressionSequence, frames: usize) -> Vec<Vec<f64>> {
    resample_indices(seq.num_frames(), frames)
        .into_iter()
        .map(|t| seq.displacement(t))
        .collect()
}

impl Classifier {
    /// Fits the frame basis and trains the network. Every expression must
    /// occur in `train`.
    pub fn train(train: &[ExpressionSequence], cfg: &ClassifierConfig) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        if let Some(e) = Expression::ALL.iter().find(|e| !train.iter().any(|s| s.label.expression == **e)) {
            return Err(Error::InvalidArgument(format!("expression {e} is absent from the classifier training set")));
        }
        let frames: Vec<Vec<f64>> = train.iter().flat_map(|s| resampled_displacements(s, cfg.frames)).collect();
        let basis = fit_pca(&frames, cfg.components)?;
        let floor = basis.variances.first().map_or(1.0, |v| v.sqrt() * 1e-6).max(1e-12);
        let coeff_scale = basis.variances.iter().map(|v| v.sqrt().max(floor)).collect();
        let mut clf = Classifier {
            config: cfg.clone(),
            basis,
            coeff_scale,
            mlp: Mlp::new(cfg.frames * cfg.components, cfg.hidden, NUM_EXPRESSIONS, cfg.seed),
        };
        let xs = train.iter().map(|s| clf.features(s)).collect::<Result<Vec<_>>>()?;
        let ys: Vec<usize> = train.iter().map(|s| s.label.expression.index()).collect();
        let history = clf.mlp.train(&xs, &ys, cfg)?;
        Ok((clf, history))
    }

    /// The `T_c * k` code of a sequence.
    pub fn features(&self, seq: &ExpressionSequence) -> Result<Vec<f64>> {
        if seq.frames.is_empty() {
            return Err(Error::InvalidArgument(format!("{}: empty sequence", seq.subject)));
        }
        if 3 * seq.neutral.num_vertices() != self.basis.dim() {
            return Err(Error::Topology(format!(
                "{}: {} vertices, classifier expects {}",
                seq.subject,
                seq.neutral.num_vertices(),
                self.basis.dim() / 3
            )));
        }
        Ok(resampled_displacements(seq, self.config.frames)
            .iter()
            .flat_map(|d| {
                self.basis
                    .project(d)
                    .into_iter()
                    .zip(&self.coeff_scale)
                    .map(|(c, s)| c / s)
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    pub fn predict_proba(&self, seq: &ExpressionSequence) -> Result<Vec<f64>> {
        self.mlp.predict_proba(&self.features(seq)?)
    }

    pub fn predict(&self, seq: &ExpressionSequence) -> Result<Expression> {
        let p = self.predict_proba(seq)?;
        Ok(Expression::from_index(argmax(&p)).expect("six outputs"))
    }

    /// Saves the network and frame basis; `config_hash` goes into the header.
    pub fn save(&self, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let d = self.basis.dim();
        let k = self.basis.k();
        let mut entries = self.mlp.store.to_entries();
        let comps: Vec<f64> = self.basis.components.iter().flatten().copied().collect();
        entries.push(("pca.mean".into(), Tensor::from_f64(&[1, d], &self.basis.mean)?));
        entries.push(("pca.components".into(), Tensor::from_f64(&[k, d], &comps)?));
        entries.push(("pca.variances".into(), Tensor::from_f64(&[1, k], &self.basis.variances)?));
        entries.push(("pca.scale".into(), Tensor::from_f64(&[1, k], &self.coeff_scale)?));
        let header = serde_json::to_string(&ClassifierHeader {
            config: self.config.clone(),
            config_hash: config_hash.to_string(),
        })
        .expect("config serializes");
        save_checkpoint(path, &header, &entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, mut entries) = load_checkpoint::<f64>(path)?;
        let ClassifierHeader { config, .. } = serde_json::from_str(&header)
            .map_err(|e| Error::Format(format!("{}: bad classifier header: {e}", path.display())))?;
        if entries.len() != 10 {
            return Err(Error::Format(format!("{}: {} tensors, a classifier has 10", path.display(), entries.len())));
        }
        let mut pop = |name: &str| -> Result<Tensor<f64>> {
            let (n, t) = entries.pop().expect("length checked");
            if n == name {
                Ok(t)
            } else {
                Err(Error::Format(format!("{}: expected tensor {name}, found {n}", path.display())))
            }
        };
        let coeff_scale = pop("pca.scale")?.to_f64();
        let variances = pop("pca.variances")?.to_f64();
        let comps = pop("pca.components")?;
        let mean = pop("pca.mean")?.to_f64();
        let d = mean.len();
        let components = comps.to_f64().chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let mut store = ParamStore::new();
        for (n, t) in entries {
            store.add(n, t);
        }
        Ok(Classifier {
            config,
            basis: PcaBasis {
                mean,
                components,
                variances,
            },
            coeff_scale,
            mlp: Mlp {
                store,
                classes: NUM_EXPRESSIONS,
            },
        })
    }
}

/// Precision, recall and F1 from a confusion matrix (`confusion[truth][pred]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub confusion: [[usize; NUM_EXPRESSIONS]; NUM_EXPRESSIONS],
    pub precision: [f64; NUM_EXPRESSIONS],
    pub recall: [f64; NUM_EXPRESSIONS],
    pub f1: [f64; NUM_EXPRESSIONS],
    pub support: [usize; NUM_EXPRESSIONS],
    /// Macro averages over the expressions present in the ground truth.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Per-class metrics; a class never predicted has precision 0.
pub fn classification_metrics(truth: &[Expression], pred: &[Expression]) -> Result<ClassMetrics> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!("{} labels, {} predictions", truth.len(), pred.len())));
    }
    let mut confusion = [[0usize; NUM_EXPRESSIONS]; NUM_EXPRESSIONS];
    for (t, p) in truth.iter().zip(pred) {
        confusion[t.index()][p.index()] += 1;
    }
    let mut m = ClassMetrics {
        confusion,
        precision: [0.0; NUM_EXPRESSIONS],
        recall: [0.0; NUM_EXPRESSIONS],
        f1: [0.0; NUM_EXPRESSIONS],
        support: [0; NUM_EXPRESSIONS],
        macro_precision: 0.0,
        macro_recall: 0.0,
        macro_f1: 0.0,
        accuracy: 0.0,
    };
    let mut present = 0;
    let mut correct = 0;
    for c in 0..NUM_EXPRESSIONS {
        let tp = confusion[c][c];
        let predicted: usize = (0..NUM_EXPRESSIONS).map(|t| confusion[t][c]).sum();
        let support: usize = confusion[c].iter().sum();
        correct += tp;
        m.support[c] = support;
        m.precision[c] = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        m.recall[c] = if support > 0 { tp as f64 / support as f64 } else { 0.0 };
        let s = m.precision[c] + m.recall[c];
        m.f1[c] = if s > 0.0 { 2.0 * m.precision[c] * m.recall[c] / s } else { 0.0 };
        if support > 0 {
            present += 1;
            m.macro_precision += m.precision[c];
            m.macro_recall += m.recall[c];
            m.macro_f1 += m.f1[c];
        }
    }
    if present > 0 {
        m.macro_precision /= present as f64;
        m.macro_recall /= present as f64;
        m.macro_f1 /= present as f64;
    }
    if !truth.is_empty() {
        m.accuracy = correct as f64 / truth.len() as f64;
    }
    Ok(m)
}

/// Classifies every sequence and scores it against its label.
pub fn classify_and_report(clf: &Classifier, seqs: &[ExpressionSequence]) -> Result<ClassMetrics> {
    let pred = seqs.iter().map(|s| clf.predict(s)).collect::<Result<Vec<_>>>()?;
    let truth: Vec<Expression> = seqs.iter().map(|s| s.label.expression).collect();
    classification_metrics(&truth, &pred)
}
