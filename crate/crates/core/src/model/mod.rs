//! The expression generator: an LSTM over the label signal produces one
//! latent code per frame, a mesh decoder turns each code into a vertex
//! displacement field, and the field is added to the subject's neutral.
//!
//! Two decoders share the encoder, loss and training loop: the spiral
//! convolution decoder and a frozen linear blendshape basis (the baseline).

mod io;
mod loss;
mod train;

pub use io::{load_generator, save_generator, ModelMeta};
pub use loss::{loss, loss_graph, loss_terms, LossTerms};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamStore, Real, Tensor, Var};
use crate::cache::HierarchyCache;
use crate::data::{label_signal, MotionLabel, NUM_EXPRESSIONS};
use crate::error::{Error, Result};
use crate::layers::{batched_spiral_indices, dense, init_dense, init_lstm, init_spiral_conv, lstm_step, spiral_conv, unpool, LstmVars};
use crate::mesh::{Mesh, Vec3};
use crate::sampling::SparseMatrix;
use crate::spiral::SpiralTable;

/// Latent size of the encoder.
pub const LATENT: usize = 64;

/// Decoder channels on a four-step pyramid; shorter pyramids use a prefix,
/// longer ones repeat the last entry. The output always has 3 channels.
pub const CHANNELS: [usize; 4] = [64, 32, 16, 8];

pub fn channel_chain(steps: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..steps).map(|i| CHANNELS[i.min(CHANNELS.len() - 1)]).collect();
    c.push(3);
    c
}

/// Topology data the decoder runs on, shared read-only.
#[derive(Debug, Clone)]
pub struct DecoderTopology {
    sizes: Vec<usize>,
    up: Vec<Arc<SparseMatrix>>,
    tables: Vec<SpiralTable>,
    fingerprint: String,
}

impl DecoderTopology {
    pub fn from_cache(cache: &HierarchyCache) -> Result<Self> {
        cache.validate()?;
        Ok(DecoderTopology {
            sizes: cache.hierarchy.sizes(),
            up: cache.hierarchy.up.iter().cloned().map(Arc::new).collect(),
            tables: cache.tables.clone(),
            fingerprint: cache.fingerprint(),
        })
    }

    /// Vertex counts, coarse to fine.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_vertices(&self) -> usize {
        *self.sizes.last().expect("at least one level")
    }

    /// Spiral length of every level.
    pub fn lengths(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.length).collect()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Which decoder a [`GeneratorParams`] carries.
#[derive(Debug, Clone, PartialEq)]
pub enum DecoderKind<T> {
    /// `dense -> reshape -> [unpool -> spiral conv -> ReLU]* -> unpool -> spiral conv`.
    Spiral {
        /// Input channels of each conv followed by the output channel count.
        channels: Vec<usize>,
        /// Level sizes the weights were built for, coarse to fine.
        sizes: Vec<usize>,
        lengths: Vec<usize>,
        /// Frozen per-coordinate scale (`1 x 3N`) applied to the last conv.
        output_scale: Option<Tensor<T>>,
    },
    /// `mean + z B`; `mean` is `1 x 3N`, `basis` is `k x 3N`, both frozen.
    Blendshape { mean: Tensor<T>, basis: Tensor<T> },
}

/// Trainable parameters plus the fixed decoder description.
///
/// Store order: `lstm.w_ih, lstm.w_hh, lstm.b`, then for the spiral decoder
/// `fc.w, fc.b, conv{k}.w, conv{k}.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams<T> {
    pub store: ParamStore<T>,
    pub hidden: usize,
    pub decoder: DecoderKind<T>,
}

const LSTM_PARAMS: usize = 3;

fn add_lstm<T: Real>(store: &mut ParamStore<T>, rng: &mut ChaCha8Rng, hidden: usize) {
    let (w_ih, w_hh, b) = init_lstm(rng, NUM_EXPRESSIONS, hidden);
    store.add("lstm.w_ih", w_ih);
    store.add("lstm.w_hh", w_hh);
    store.add("lstm.b", b);
}

impl<T: Real> GeneratorParams<T> {
    /// Spiral generator with the default latent size and channel chain.
    pub fn spiral(topo: &DecoderTopology, seed: u64) -> Result<Self> {
        Self::spiral_with(topo, LATENT, &channel_chain(topo.sizes.len().saturating_sub(1)), seed)
    }

    /// `channels[k]` feeds conv `k`; the last entry is the output width.
    pub fn spiral_with(topo: &DecoderTopology, hidden: usize, channels: &[usize], seed: u64) -> Result<Self> {
        let steps = topo.sizes.len().saturating_sub(1);
        if steps == 0 {
            return Err(Error::InvalidArgument("the decoder needs at least two hierarchy levels".into()));
        }
        if channels.len() != steps + 1 || channels.last() != Some(&3) || channels.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "channel chain {channels:?} does not fit {steps} up-sampling steps ending in 3"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        add_lstm(&mut store, &mut rng, hidden);
        let (w, b) = init_dense(&mut rng, hidden, topo.sizes[0] * channels[0]);
        store.add("fc.w", w);
        store.add("fc.b", b);
        let lengths = topo.lengths();
        for k in 0..steps {
            let (w, b) = init_spiral_conv(&mut rng, lengths[k + 1], channels[k], channels[k + 1]);
            store.add(format!("conv{k}.w"), w);
            store.add(format!("conv{k}.b"), b);
        }
        Ok(GeneratorParams {
            store,
            hidden,
            decoder: DecoderKind::Spiral {
                channels: channels.to_vec(),
                sizes: topo.sizes.clone(),
                lengths,
                output_scale: None,
            },
        })
    }

    /// Baseline generator: trainable LSTM in front of a frozen linear basis.
    /// `mean` has `3N` entries and `basis` holds `k` rows of `3N`.
    pub fn blendshape(mean: &[f64], basis: &[Vec<f64>], seed: u64) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 3 != 0 || basis.is_empty() || basis.iter().any(|b| b.len() != dim) {
            return Err(Error::Shape("blendshape basis rows must match the 3N mean".into()));
        }
        if basis.len() > LATENT {
            return Err(Error::InvalidArgument(format!(
                "{} blendshapes exceed the latent size {LATENT}",
                basis.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        add_lstm(&mut store, &mut rng, LATENT);
        let flat: Vec<f64> = basis.iter().flatten().copied().collect();
        Ok(GeneratorParams {
            store,
            hidden: LATENT,
            decoder: DecoderKind::Blendshape {
                mean: Tensor::from_f64(&[1, dim], mean)?,
                basis: Tensor::from_f64(&[basis.len(), dim], &flat)?,
            },
        })
    }

    /// Multiplies every spiral decoder output coordinate by a fixed factor
    /// (`3N` values, vertex-major), e.g. [`displacement_scale`] of the
    /// training set, so the network works in normalized units.
    pub fn set_output_scale(&mut self, scale: &[f64]) -> Result<()> {
        let n = self.num_vertices();
        match &mut self.decoder {
            DecoderKind::Spiral { output_scale, .. } => {
                if scale.len() != 3 * n || scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(Error::InvalidArgument(format!("output scale needs {} positive values", 3 * n)));
                }
                *output_scale = Some(Tensor::from_f64(&[1, 3 * n], scale)?);
                Ok(())
            }
            DecoderKind::Blendshape { .. } => Err(Error::InvalidArgument("blendshape decoders are not rescaled".into())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.decoder {
            DecoderKind::Spiral { .. } => "spiral",
            DecoderKind::Blendshape { .. } => "blendshape",
        }
    }

    /// Vertex count of the generated meshes.
    pub fn num_vertices(&self) -> usize {
        match &self.decoder {
            DecoderKind::Spiral { sizes, .. } => *sizes.last().unwrap(),
            DecoderKind::Blendshape { mean, .. } => mean.len() / 3,
        }
    }

    /// Fails unless the decoder was built for `topo`.
    pub fn check_topology(&self, topo: &DecoderTopology) -> Result<()> {
        let ok = match &self.decoder {
            DecoderKind::Spiral { sizes, lengths, .. } => *sizes == topo.sizes && *lengths == topo.lengths(),
            DecoderKind::Blendshape { .. } => self.num_vertices() == topo.num_vertices(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Topology(format!(
                "{} decoder built for levels {:?}, hierarchy has {:?}",
                self.kind(),
                match &self.decoder {
                    DecoderKind::Spiral { sizes, .. } => sizes.clone(),
                    DecoderKind::Blendshape { .. } => vec![self.num_vertices()],
                },
                topo.sizes
            )))
        }
    }

    /// Sets every decoder parameter to zero (the encoder is untouched).
    pub fn zero_decoder(&mut self) {
        for t in &mut self.store.tensors_mut()[LSTM_PARAMS..] {
            t.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
        if let DecoderKind::Blendshape { mean, basis } = &mut self.decoder {
            mean.data_mut().iter_mut().for_each(|x| *x = T::zero());
            basis.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// Sets every trainable parameter to zero.
    pub fn zero_all(&mut self) {
        self.zero_decoder();
        for t in &mut self.store.tensors_mut()[..LSTM_PARAMS] {
            t.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// Runs the LSTM over `signal` (one 6-vector per frame); returns the
    /// `T x hidden` stack of hidden states.
    pub fn encode_graph(&self, g: &mut Graph<T>, vars: &[Var], signal: &[[f64; NUM_EXPRESSIONS]]) -> Result<Var> {
        if signal.is_empty() {
            return Err(Error::InvalidArgument("empty label signal".into()));
        }
        let lstm = LstmVars {
            w_ih: vars[0],
            w_hh: vars[1],
            b: vars[2],
        };
        let mut h = g.input(Tensor::zeros(&[1, self.hidden]));
        let mut c = g.input(Tensor::zeros(&[1, self.hidden]));
        let mut hs = Vec::with_capacity(signal.len());
        for e in signal {
            let x = g.input(Tensor::from_f64(&[1, NUM_EXPRESSIONS], e)?);
            (h, c) = lstm_step(g, x, h, c, &lstm)?;
            hs.push(h);
        }
        g.concat_rows(&hs)
    }

    /// Decodes every row of `z` (`T x hidden`) into a displacement field;
    /// returns `(T * N) x 3`, frame-major. When `trace` is given, the
    /// per-frame `(rows, cols)` after each stage are appended to it.
    pub fn decode_graph(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        z: Var,
        topo: &DecoderTopology,
        mut trace: Option<&mut Vec<(usize, usize)>>,
    ) -> Result<Var> {
        self.check_topology(topo)?;
        let frames = g.value(z).rows();
        if g.value(z).cols() != self.hidden {
            return Err(Error::Shape(format!("latent width {} != {}", g.value(z).cols(), self.hidden)));
        }
        let mut record = |g: &Graph<T>, v: Var| {
            if let Some(tr) = trace.as_deref_mut() {
                let t = g.value(v);
                tr.push((t.rows() / frames, t.cols()));
            }
        };
        record(g, z);
        match &self.decoder {
            DecoderKind::Spiral { channels, output_scale, .. } => {
                let steps = channels.len() - 1;
                let x = dense(g, z, vars[3], vars[4])?;
                let mut x = g.reshape(x, &[frames * topo.sizes[0], channels[0]])?;
                record(g, x);
                for k in 0..steps {
                    x = unpool(g, x, &topo.up[k], frames)?;
                    record(g, x);
                    let table = &topo.tables[k + 1];
                    let idx = batched_spiral_indices(table, frames);
                    let (w, b) = (vars[LSTM_PARAMS + 2 + 2 * k], vars[LSTM_PARAMS + 3 + 2 * k]);
                    x = spiral_conv(g, x, &idx, table.length, w, b)?;
                    if k + 1 < steps {
                        x = g.relu(x);
                    }
                    record(g, x);
                }
                if let Some(scale) = output_scale {
                    let n = topo.num_vertices();
                    let tiled = scale.data().repeat(frames);
                    let s = g.input(Tensor::matrix(frames * n, 3, tiled)?);
                    x = g.mul(x, s)?;
                }
                Ok(x)
            }
            DecoderKind::Blendshape { mean, basis } => {
                let k = basis.rows();
                let coeffs = if k == self.hidden { z } else { g.slice_cols(z, 0, k)? };
                let b = g.input(basis.clone());
                let m = g.input(mean.clone());
                let y = g.matmul(coeffs, b)?;
                let y = g.add_row(y, m)?;
                let n = mean.len() / 3;
                let out = g.reshape(y, &[frames * n, 3])?;
                record(g, out);
                Ok(out)
            }
        }
    }

    /// Displacements for every frame of `label`, `(T * N) x 3` on the graph.
    pub fn forward_graph(&self, g: &mut Graph<T>, vars: &[Var], label: &MotionLabel, topo: &DecoderTopology) -> Result<Var> {
        let z = self.encode_graph(g, vars, &label_signal(label))?;
        self.decode_graph(g, vars, z, topo, None)
    }

    /// Latent codes, one row of `hidden` values per frame.
    pub fn encode(&self, signal: &[[f64; NUM_EXPRESSIONS]]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let z = self.encode_graph(&mut g, &vars, signal)?;
        Ok(rows_f64(g.value(z)))
    }

    /// Displacement fields for a stack of latent codes.
    pub fn decode(&self, z: &[Vec<f64>], topo: &DecoderTopology) -> Result<Vec<Vec<Vec3>>> {
        if z.is_empty() || z.iter().any(|r| r.len() != self.hidden) {
            return Err(Error::Shape(format!("latent codes must be nonempty rows of {}", self.hidden)));
        }
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let flat: Vec<f64> = z.iter().flatten().copied().collect();
        let zv = g.input(Tensor::from_f64(&[z.len(), self.hidden], &flat)?);
        let out = self.decode_graph(&mut g, &vars, zv, topo, None)?;
        Ok(split_frames(g.value(out), z.len()))
    }

    pub fn decode_frame(&self, z: &[f64], topo: &DecoderTopology) -> Result<Vec<Vec3>> {
        Ok(self.decode(&[z.to_vec()], topo)?.remove(0))
    }

    /// Per-stage `(vertices, channels)` of decoding one code.
    pub fn shape_trace(&self, topo: &DecoderTopology) -> Result<Vec<(usize, usize)>> {
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let z = g.input(Tensor::zeros(&[1, self.hidden]));
        let mut trace = Vec::new();
        self.decode_graph(&mut g, &vars, z, topo, Some(&mut trace))?;
        Ok(trace)
    }

    /// Per-frame displacement fields for `label`.
    pub fn displacements(&self, label: &MotionLabel, topo: &DecoderTopology) -> Result<Vec<Vec<Vec3>>> {
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let out = self.forward_graph(&mut g, &vars, label, topo)?;
        Ok(split_frames(g.value(out), label.frames))
    }

    fn bind_frozen(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.store.tensors().iter().map(|t| g.input(t.clone())).collect()
    }
}

fn rows_f64<T: Real>(t: &Tensor<T>) -> Vec<Vec<f64>> {
    let c = t.cols();
    t.to_f64().chunks(c).map(<[f64]>::to_vec).collect()
}

fn split_frames<T: Real>(t: &Tensor<T>, frames: usize) -> Vec<Vec<Vec3>> {
    let n = t.rows() / frames;
    let vals = t.to_f64();
    (0..frames)
        .map(|f| {
            (0..n)
                .map(|v| {
                    let o = (f * n + v) * 3;
                    [vals[o], vals[o + 1], vals[o + 2]]
                })
                .collect()
        })
        .collect()
}

/// Per-coordinate RMS displacement over every frame of `data` (`3N` values,
/// vertex-major), floored at `1e-3` of the overall RMS.
pub fn displacement_scale(data: &[crate::data::ExpressionSequence]) -> Result<Vec<f64>> {
    let first = data.first().ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
    let dim = 3 * first.neutral.num_vertices();
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for s in data {
        if 3 * s.neutral.num_vertices() != dim {
            return Err(Error::Topology(format!("{} has a different vertex count", s.subject)));
        }
        for t in 0..s.num_frames() {
            for (a, d) in acc.iter_mut().zip(s.displacement(t)) {
                *a += d * d;
            }
            count += 1;
        }
    }
    let rms: Vec<f64> = acc.iter().map(|a| (a / count as f64).sqrt()).collect();
    let overall = (acc.iter().sum::<f64>() / (count * dim) as f64).sqrt();
    let floor = (1e-3 * overall).max(1e-12);
    Ok(rms.into_iter().map(|r| r.max(floor)).collect())
}

/// Adds each displacement field to `neutral`.
pub fn compose(neutral: &Mesh, displacements: &[Vec<Vec3>]) -> Result<Vec<Mesh>> {
    displacements
        .iter()
        .map(|d| {
            if d.len() != neutral.num_vertices() {
                return Err(Error::Topology(format!(
                    "{} displacements for a neutral with {} vertices",
                    d.len(),
                    neutral.num_vertices()
                )));
            }
            let verts = neutral
                .vertices()
                .iter()
                .zip(d)
                .map(|(p, q)| [p[0] + q[0], p[1] + q[1], p[2] + q[2]])
                .collect();
            neutral.with_vertices(verts)
        })
        .collect()
}

/// One mesh per frame of `label`: the neutral plus the decoded displacement.
pub fn generate<T: Real>(
    neutral: &Mesh,
    label: &MotionLabel,
    params: &GeneratorParams<T>,
    topo: &DecoderTopology,
) -> Result<Vec<Mesh>> {
    if neutral.num_vertices() != params.num_vertices() {
        return Err(Error::Topology(format!(
            "neutral has {} vertices, the model generates {}",
            neutral.num_vertices(),
            params.num_vertices()
        )));
    }
    compose(neutral, &params.displacements(label, topo)?)
}
