use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::loss_graph;
use super::{DecoderTopology, GeneratorParams};
use crate::autodiff::{adam_step, AdamConfig, AdamState, FlushDenormals, Graph, Precision, Real, Tensor};
use crate::data::ExpressionSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 1e-3,
            lr_decay: 0.99,
            weight_decay: 5e-5,
            seed: 0,
            precision: Precision::Single,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Rate used during this epoch.
    pub lr: f64,
    /// Mean pre-update loss over the epoch's sequences.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// One `epoch lr loss` line per epoch.
    pub fn to_log(&self) -> String {
        let mut s = String::from("# epoch lr loss_mm\n");
        for r in &self.records {
            writeln!(s, "{} {:.6e} {:.9}", r.epoch, r.lr, r.loss).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }
}

struct Prepared<T> {
    target: Tensor<T>,
}

fn prepare<T: Real>(seq: &ExpressionSequence) -> Result<Prepared<T>> {
    let n = seq.neutral.num_vertices();
    let mut flat = Vec::with_capacity(seq.num_frames() * n * 3);
    for t in 0..seq.num_frames() {
        flat.extend(seq.displacement(t));
    }
    Ok(Prepared {
        target: Tensor::from_f64(&[seq.num_frames() * n, 3], &flat)?,
    })
}

/// Trains `params` in place, one Adam step per sequence, in a seeded random
/// order each epoch. Returns the per-epoch history. Subnormals are flushed to
/// zero for the duration.
pub fn train<T: Real>(
    params: &mut GeneratorParams<T>,
    data: &[ExpressionSequence],
    topo: &DecoderTopology,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if cfg.precision != T::PRECISION {
        return Err(Error::Config(format!(
            "training configured for {:?} precision on {:?} parameters",
            cfg.precision,
            T::PRECISION
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    params.check_topology(topo)?;
    if let Some(s) = data.iter().find(|s| s.neutral.num_vertices() != params.num_vertices()) {
        return Err(Error::Topology(format!(
            "{} {}: {} vertices, model generates {}",
            s.subject,
            s.label.expression,
            s.neutral.num_vertices(),
            params.num_vertices()
        )));
    }
    let prepared = data.iter().map(prepare::<T>).collect::<Result<Vec<_>>>()?;
    let _ftz = FlushDenormals::new();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(params.store.tensors());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut lr = cfg.lr;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let adam = AdamConfig {
            lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        };
        let mut total = 0.0;
        for &i in &order {
            let seq = &data[i];
            let mut g = Graph::new();
            let vars = params.store.bind(&mut g);
            let pred = params.forward_graph(&mut g, &vars, &seq.label, topo)?;
            let target = g.input(prepared[i].target.clone());
            let l = loss_graph(&mut g, pred, target, seq.num_frames())?;
            let value = g.value(l).data()[0].to_f64().unwrap_or(f64::NAN);
            let report = || format!("epoch {epoch}, sequence {} ({} {})", i, seq.subject, seq.label.expression);
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("loss {value} at {}", report())));
            }
            let grads = g.backward(l)?;
            let grads = params.store.collect_grads(&grads, &vars);
            adam_step(params.store.tensors_mut(), &grads, &mut state, &adam)
                .map_err(|e| Error::NonFinite(format!("{e} at {}", report())))?;
            total += value;
        }
        let mean = total / data.len() as f64;
        info!("epoch {epoch}: lr {lr:.3e}, loss {mean:.6} mm");
        history.records.push(EpochRecord { epoch, lr, loss: mean });
        lr *= cfg.lr_decay;
    }
    Ok(history)
}
