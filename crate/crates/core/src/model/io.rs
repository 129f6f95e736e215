//! Generator checkpoints: the autodiff container with a JSON header.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecoderKind, GeneratorParams};
use crate::autodiff::{load_checkpoint, save_checkpoint, ParamStore, Real, Tensor};
use crate::error::{Error, Result};

const BLEND_MEAN: &str = "blend.mean";
const BLEND_BASIS: &str = "blend.basis";
const OUTPUT_SCALE: &str = "output.scale";

/// Header stored with every generator checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// `spiral` or `blendshape`.
    pub kind: String,
    pub hidden: usize,
    #[serde(default)]
    pub channels: Vec<usize>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub lengths: Vec<usize>,
    /// Fingerprint of the hierarchy the model was trained on.
    pub hierarchy: String,
    /// Hash of the run configuration that produced the checkpoint.
    pub config_hash: String,
}

impl ModelMeta {
    pub fn of<T: Real>(params: &GeneratorParams<T>, hierarchy: &str, config_hash: &str) -> Self {
        let (channels, sizes, lengths) = match &params.decoder {
            DecoderKind::Spiral {
                channels, sizes, lengths, ..
            } => (channels.clone(), sizes.clone(), lengths.clone()),
            DecoderKind::Blendshape { .. } => (Vec::new(), vec![params.num_vertices()], Vec::new()),
        };
        ModelMeta {
            kind: params.kind().to_string(),
            hidden: params.hidden,
            channels,
            sizes,
            lengths,
            hierarchy: hierarchy.to_string(),
            config_hash: config_hash.to_string(),
        }
    }
}

pub fn save_generator<T: Real>(path: impl AsRef<Path>, params: &GeneratorParams<T>, meta: &ModelMeta) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut entries = params.store.to_entries();
    match &params.decoder {
        DecoderKind::Blendshape { mean, basis } => {
            entries.push((BLEND_MEAN.to_string(), mean.clone()));
            entries.push((BLEND_BASIS.to_string(), basis.clone()));
        }
        DecoderKind::Spiral {
            output_scale: Some(s), ..
        } => entries.push((OUTPUT_SCALE.to_string(), s.clone())),
        DecoderKind::Spiral { .. } => {}
    }
    let header = serde_json::to_string(meta).expect("meta serializes");
    save_checkpoint(path, &header, &entries)
}

pub fn load_generator<T: Real>(path: impl AsRef<Path>) -> Result<(GeneratorParams<T>, ModelMeta)> {
    let path = path.as_ref();
    let (header, mut entries) = load_checkpoint::<T>(path)?;
    let meta: ModelMeta = serde_json::from_str(&header)
        .map_err(|e| Error::Format(format!("{}: bad model header: {e}", path.display())))?;
    let take = |entries: &mut Vec<(String, Tensor<T>)>, name: &str| -> Result<Tensor<T>> {
        match entries.last() {
            Some((n, _)) if n == name => Ok(entries.pop().unwrap().1),
            _ => Err(Error::Format(format!("{}: missing tensor {name}", path.display()))),
        }
    };
    let decoder = match meta.kind.as_str() {
        "spiral" => {
            let steps = meta.channels.len().saturating_sub(1);
            if steps == 0 || meta.sizes.len() != steps + 1 || meta.lengths.len() != steps + 1 {
                return Err(Error::Format(format!("{}: inconsistent spiral header", path.display())));
            }
            let output_scale = match entries.last() {
                Some((n, _)) if n == OUTPUT_SCALE => Some(entries.pop().unwrap().1),
                _ => None,
            };
            DecoderKind::Spiral {
                channels: meta.channels.clone(),
                sizes: meta.sizes.clone(),
                lengths: meta.lengths.clone(),
                output_scale,
            }
        }
        "blendshape" => {
            let basis = take(&mut entries, BLEND_BASIS)?;
            let mean = take(&mut entries, BLEND_MEAN)?;
            DecoderKind::Blendshape { mean, basis }
        }
        other => return Err(Error::Format(format!("{}: unknown model kind {other:?}", path.display()))),
    };
    let mut expected = vec!["lstm.w_ih".to_string(), "lstm.w_hh".into(), "lstm.b".into()];
    if let DecoderKind::Spiral { channels, .. } = &decoder {
        expected.extend(["fc.w".to_string(), "fc.b".into()]);
        for k in 0..channels.len() - 1 {
            expected.extend([format!("conv{k}.w"), format!("conv{k}.b")]);
        }
    }
    let names: Vec<&str> = entries.iter().map(|e| e.0.as_str()).collect();
    if names != expected {
        return Err(Error::Format(format!(
            "{}: tensors {names:?} do not match a {} model",
            path.display(),
            meta.kind
        )));
    }
    let mut store = ParamStore::new();
    for (name, t) in entries {
        store.add(name, t);
    }
    Ok((
        GeneratorParams {
            store,
            hidden: meta.hidden,
            decoder,
        },
        meta,
    ))
}
