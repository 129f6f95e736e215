//! Run configuration and the commands behind the CLI.
//!
//! The configuration is one flat TOML table; any key can be overridden by a
//! `key=value` pair (values parse as TOML, falling back to a bare string).
//! Every written file carries the hash of the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Precision, Real};
use crate::cache::{build_level_tables, hex, HierarchyCache};
use crate::data::{
    frame_file_name, label_signal, load_dataset, load_split, save_dataset, split_by_subject, synth_dataset,
    write_label_file, Expression, ExpressionSequence, MotionLabel, SynthConfig, Timing,
};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_params, classify_and_report, fit_deformation_basis, generate_all, interpolate_latents, score_model,
    Classifier, ClassifierConfig, EvalReport, ModelScores,
};
use crate::mesh::primitives::{face_grid, icosphere};
use crate::mesh::{load_mesh, save_mesh_with_header, Mesh, MeshFormat};
use crate::model::{
    displacement_scale, generate, load_generator, save_generator, train, DecoderTopology, GeneratorParams, ModelMeta,
    TrainConfig, TrainHistory, LATENT,
};
use crate::sampling::build_hierarchy;
use crate::spiral::ReferenceVertex;

/// Every knob of every command. Paths are relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mesh file, `icosphere:<subdivisions>` or `face_grid:<rows>x<cols>`.
    pub template: String,
    pub dataset: String,
    pub cache: String,
    pub checkpoints: String,
    pub reports: String,
    pub output: String,

    pub factors: Vec<f64>,
    pub spiral_k: usize,
    /// 0 picks the one-disk size of each level.
    pub spiral_length: usize,
    /// `max-z` or a vertex index of the template.
    pub reference: String,

    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub weight_decay: f64,
    /// `single` or `double`.
    pub precision: String,
    /// Normalize the spiral decoder output by the training displacement RMS.
    pub output_scale: bool,
    pub baseline_components: usize,

    pub subjects: usize,
    pub test_subjects: usize,
    pub frames: usize,
    /// Empty for random per-sequence timing, else four timestamps.
    pub synth_timestamps: Vec<usize>,
    pub synth_amplitude: f64,
    pub synth_noise: f64,
    pub synth_width_scale: f64,

    pub classifier_frames: usize,
    pub classifier_components: usize,
    pub classifier_epochs: usize,

    /// `spiral` or `baseline`.
    pub model: String,
    /// Empty: the template.
    pub neutral: String,
    pub expression: String,
    pub gen_frames: usize,
    pub timestamps: Vec<usize>,
    pub scale: f64,

    pub interp_from: String,
    pub interp_to: String,
    pub steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let train = TrainConfig::default();
        let clf = ClassifierConfig::default();
        RunConfig {
            template: "icosphere:4".into(),
            dataset: "data".into(),
            cache: "cache/hierarchy.bin".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
            output: "output".into(),
            factors: vec![5.0, 5.0, 5.0],
            spiral_k: 1,
            spiral_length: 0,
            reference: "max-z".into(),
            seed: 0,
            epochs: train.epochs,
            lr: train.lr,
            lr_decay: train.lr_decay,
            weight_decay: train.weight_decay,
            precision: "single".into(),
            output_scale: true,
            baseline_components: LATENT,
            subjects: 25,
            test_subjects: 5,
            frames: synth.frames,
            synth_timestamps: Vec::new(),
            synth_amplitude: synth.amplitude,
            synth_noise: synth.noise_sigma,
            synth_width_scale: synth.width_scale,
            classifier_frames: clf.frames,
            classifier_components: clf.components,
            classifier_epochs: clf.epochs,
            model: "spiral".into(),
            neutral: String::new(),
            expression: "happy".into(),
            gen_frames: 100,
            timestamps: vec![10, 30, 80, 95],
            scale: 1.0,
            interp_from: "happy".into(),
            interp_to: "surprise".into(),
            steps: 10,
        }
    }
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {raw:?} is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

impl RunConfig {
    /// Defaults, then the file (if any), then `key=value` overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(format!("{}: {}", p.display(), one_line(&e))))?
            }
            None => toml::Table::new(),
        };
        for raw in overrides {
            let (k, v) = parse_override(raw)?;
            table.insert(k, v);
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(one_line(&e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config()?.validate()?;
        self.reference_vertex()?;
        if self.factors.is_empty() || self.factors.iter().any(|f| !(*f > 1.0)) {
            return Err(Error::Config(format!("factors {:?} must be nonempty and > 1", self.factors)));
        }
        if !matches!(self.model.as_str(), "spiral" | "baseline") {
            return Err(Error::Config(format!("model {:?} is not spiral or baseline", self.model)));
        }
        if !self.synth_timestamps.is_empty() && self.synth_timestamps.len() != 4 {
            return Err(Error::Config("synth_timestamps needs 4 values or none".into()));
        }
        if self.timestamps.len() != 4 {
            return Err(Error::Config("timestamps needs 4 values".into()));
        }
        if self.test_subjects >= self.subjects {
            return Err(Error::Config(format!(
                "{} test subjects leave no training subjects out of {}",
                self.test_subjects, self.subjects
            )));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_toml`].
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes())[..8])
    }

    /// The resolved configuration, seed and hash, as printed by every command.
    pub fn echo(&self) -> String {
        format!("# resolved config\n{}# seed {}\n# config_hash {}\n", self.to_toml(), self.seed, self.hash())
    }

    fn header(&self) -> String {
        format!("config_hash {}\nseed {}", self.hash(), self.seed)
    }

    pub fn precision(&self) -> Result<Precision> {
        match self.precision.as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::Config(format!("precision {other:?} is not single or double"))),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            lr_decay: self.lr_decay,
            weight_decay: self.weight_decay,
            seed: self.seed,
            precision: self.precision()?,
        })
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            frames: self.classifier_frames,
            components: self.classifier_components,
            epochs: self.classifier_epochs,
            seed: self.seed,
            ..ClassifierConfig::default()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_subjects: self.subjects,
            frames: self.frames,
            seed: self.seed,
            amplitude: self.synth_amplitude,
            noise_sigma: self.synth_noise,
            width_scale: self.synth_width_scale,
            timing: match self.synth_timestamps[..] {
                [a, b, c, d] => Timing::Fixed([a, b, c, d]),
                _ => Timing::Random,
            },
            ..SynthConfig::default()
        }
    }

    pub fn reference_vertex(&self) -> Result<ReferenceVertex> {
        match self.reference.as_str() {
            "max-z" | "maxz" => Ok(ReferenceVertex::MaxZ),
            s => s
                .parse()
                .map(ReferenceVertex::Index)
                .map_err(|_| Error::Config(format!("reference {s:?} is not max-z or a vertex index"))),
        }
    }

    pub fn template_mesh(&self) -> Result<Mesh> {
        let bad = || Error::Config(format!("template {:?} is not a mesh path or a built-in", self.template));
        if let Some(k) = self.template.strip_prefix("icosphere:") {
            return Ok(icosphere(k.parse().map_err(|_| bad())?, 80.0));
        }
        if let Some(rc) = self.template.strip_prefix("face_grid:") {
            let (r, c) = rc.split_once('x').ok_or_else(bad)?;
            return Ok(face_grid(r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?, 160.0));
        }
        let p = Path::new(&self.template);
        load_mesh(p, MeshFormat::from_path(p)?)
    }

    /// The label `generate` uses for `expression`.
    pub fn label(&self, expression: &str) -> Result<MotionLabel> {
        let ts = [self.timestamps[0], self.timestamps[1], self.timestamps[2], self.timestamps[3]];
        MotionLabel::new(expression.parse()?, self.gen_frames, ts, self.scale)
    }

    fn checkpoint(&self, name: &str) -> PathBuf {
        Path::new(&self.checkpoints).join(format!("{name}.ckpt"))
    }
}

fn one_line(e: &impl std::fmt::Display) -> String {
    e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Precompute,
    SynthData,
    Train,
    Generate,
    Evaluate,
    Baseline,
    Classify,
    Interpolate,
}

/// Runs one command; returns the files it wrote.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Precompute => precompute(cfg),
        Command::SynthData => synth_data(cfg),
        Command::Classify => classify(cfg),
        _ => match cfg.precision()? {
            Precision::Single => run_typed::<f32>(cmd, cfg),
            Precision::Double => run_typed::<f64>(cmd, cfg),
        },
    }
}

fn run_typed<T: Real>(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Train => train_model::<T>(cfg, "spiral"),
        Command::Baseline => train_model::<T>(cfg, "baseline"),
        Command::Generate => generate_frames::<T>(cfg),
        Command::Evaluate => evaluate::<T>(cfg),
        Command::Interpolate => interpolate::<T>(cfg),
        _ => unreachable!("dispatched in run"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn precompute(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mesh = cfg.template_mesh()?;
    let h = build_hierarchy(&mesh, &cfg.factors)?;
    let length = (cfg.spiral_length > 0).then_some(cfg.spiral_length);
    let tables = build_level_tables(&h, cfg.spiral_k, length, cfg.reference_vertex()?)?;
    let cache = HierarchyCache::new(h, tables, cfg.hash())?;
    log::info!(
        "hierarchy levels {:?}, spiral lengths {:?}, fingerprint {}",
        cache.hierarchy.sizes(),
        cache.tables.iter().map(|t| t.length).collect::<Vec<_>>(),
        cache.fingerprint()
    );
    cache.save(&cfg.cache)?;
    Ok(vec![PathBuf::from(&cfg.cache)])
}

fn synth_data(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let template = cfg.template_mesh()?;
    let (seqs, _) = synth_dataset(&template, &cfg.synth_config())?;
    let mut subjects: Vec<String> = seqs.iter().map(|s| s.subject.clone()).collect();
    subjects.dedup();
    let test = subjects[subjects.len() - cfg.test_subjects..].to_vec();
    log::info!("{} sequences, test subjects {:?}", seqs.len(), test);
    save_dataset(&cfg.dataset, &seqs, &test, &cfg.header())?;
    Ok(vec![PathBuf::from(&cfg.dataset)])
}

fn load_cache(cfg: &RunConfig) -> Result<(HierarchyCache, DecoderTopology)> {
    let cache = HierarchyCache::load(&cfg.cache)?;
    let topo = DecoderTopology::from_cache(&cache)?;
    Ok((cache, topo))
}

/// `(train, test)` sequences of the configured dataset.
pub fn load_splits(cfg: &RunConfig) -> Result<(Vec<ExpressionSequence>, Vec<ExpressionSequence>)> {
    let (seqs, _) = load_dataset(&cfg.dataset)?;
    let test = load_split(&cfg.dataset)?;
    let (train, test) = split_by_subject(seqs, &test);
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no training sequences", cfg.dataset)));
    }
    Ok((train, test))
}

fn train_model<T: Real>(cfg: &RunConfig, name: &str) -> Result<Vec<PathBuf>> {
    let (cache, topo) = load_cache(cfg)?;
    let (train_set, _) = load_splits(cfg)?;
    let mut params = if name == "spiral" {
        let mut p = GeneratorParams::<T>::spiral(&topo, cfg.seed)?;
        if cfg.output_scale {
            p.set_output_scale(&displacement_scale(&train_set)?)?;
        }
        p
    } else {
        let basis = fit_deformation_basis(&train_set, cfg.baseline_components)?;
        baseline_params::<T>(&basis, cfg.seed)?
    };
    log::info!("training {name} on {} sequences", train_set.len());
    let history = train(&mut params, &train_set, &topo, &cfg.train_config()?)?;
    if let Some(last) = history.records.last() {
        log::info!("final epoch {} loss {:.6} mm", last.epoch, last.loss);
    }
    save_outputs(cfg, name, &params, &cache, &history)
}

fn save_outputs<T: Real>(
    cfg: &RunConfig,
    name: &str,
    params: &GeneratorParams<T>,
    cache: &HierarchyCache,
    history: &TrainHistory,
) -> Result<Vec<PathBuf>> {
    let ckpt = cfg.checkpoint(name);
    save_generator(&ckpt, params, &ModelMeta::of(params, &cache.fingerprint(), &cfg.hash()))?;
    let dir = Path::new(&cfg.checkpoints);
    let log_text = format!("# config_hash {}\n{}", cfg.hash(), history.to_log());
    let json = serde_json::json!({ "config_hash": cfg.hash(), "model": name, "records": history.records });
    Ok(vec![
        ckpt,
        write_text(&dir.join(format!("{name}_log.txt")), &log_text)?,
        write_text(&dir.join(format!("{name}_history.json")), &format!("{json:#}\n"))?,
    ])
}

/// Loads a trained generator, refusing checkpoints built on another hierarchy.
pub fn load_model<T: Real>(path: &Path, cache: &HierarchyCache, topo: &DecoderTopology) -> Result<GeneratorParams<T>> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("{} not found; run train or baseline first", path.display())));
    }
    let (params, meta) = load_generator::<T>(path)?;
    let fp = cache.fingerprint();
    if meta.hierarchy != fp {
        return Err(Error::Topology(format!(
            "refusing {}: trained on hierarchy {}, cache has {fp}",
            path.display(),
            meta.hierarchy
        )));
    }
    params.check_topology(topo)?;
    Ok(params)
}

fn neutral_mesh(cfg: &RunConfig) -> Result<Mesh> {
    if cfg.neutral.is_empty() {
        cfg.template_mesh()
    } else {
        let p = Path::new(&cfg.neutral);
        load_mesh(p, MeshFormat::from_path(p)?)
    }
}

/// Replaces `dir`'s frame files with `meshes`.
fn write_frames(dir: &Path, meshes: &[Mesh], header: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let stale = p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("frame_") && n.ends_with(".obj"));
        if stale {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    meshes
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let p = dir.join(frame_file_name(t));
            save_mesh_with_header(m, &p, MeshFormat::Obj, header)?;
            Ok(p)
        })
        .collect()
}

fn generate_frames<T: Real>(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (cache, topo) = load_cache(cfg)?;
    let params = load_model::<T>(&cfg.checkpoint(&cfg.model), &cache, &topo)?;
    let neutral = neutral_mesh(cfg)?;
    let label = cfg.label(&cfg.expression)?;
    let meshes = generate(&neutral, &label, &params, &topo)?;
    let dir = Path::new(&cfg.output).join("generate");
    let mut files = write_frames(&dir, &meshes, &cfg.header())?;
    let lp = dir.join("label.txt");
    write_label_file(&lp, &label, &format!("{}\nscale {}", cfg.header(), label.scale))?;
    files.push(lp);
    log::info!("wrote {} frames of {} to {}", meshes.len(), label.expression, dir.display());
    Ok(files)
}

/// Generated counterparts of `seqs` (same neutral and label).
pub fn generated_sequences<T: Real>(
    params: &GeneratorParams<T>,
    topo: &DecoderTopology,
    seqs: &[ExpressionSequence],
) -> Result<Vec<ExpressionSequence>> {
    generate_all(params, topo, seqs)?
        .into_iter()
        .zip(seqs)
        .map(|(frames, s)| ExpressionSequence::new(s.subject.clone(), s.neutral.clone(), frames, s.label))
        .collect()
}

fn available_models<T: Real>(
    cfg: &RunConfig,
    cache: &HierarchyCache,
    topo: &DecoderTopology,
) -> Result<Vec<(&'static str, GeneratorParams<T>)>> {
    let mut out = Vec::new();
    for name in ["spiral", "baseline"] {
        let path = cfg.checkpoint(name);
        if path.exists() {
            out.push((name, load_model::<T>(&path, cache, topo)?));
        }
    }
    Ok(out)
}

fn classification_sections<T: Real>(
    clf: &Classifier,
    test: &[ExpressionSequence],
    models: &[(&str, GeneratorParams<T>)],
    topo: &DecoderTopology,
) -> Result<Vec<(String, crate::eval::ClassMetrics)>> {
    let mut out = vec![("ground_truth".to_string(), classify_and_report(clf, test)?)];
    for (name, params) in models {
        let generated = generated_sequences(params, topo, test)?;
        out.push((name.to_string(), classify_and_report(clf, &generated)?));
    }
    Ok(out)
}

fn evaluate<T: Real>(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (cache, topo) = load_cache(cfg)?;
    let (_, test) = load_splits(cfg)?;
    if test.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: the split file names no test sequences", cfg.dataset)));
    }
    let models = available_models::<T>(cfg, &cache, &topo)?;
    if models.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no checkpoints in {}; run train or baseline first",
            cfg.checkpoints
        )));
    }
    let mut report = EvalReport {
        config_hash: cfg.hash(),
        hierarchy: cache.fingerprint(),
        ..EvalReport::default()
    };
    for (name, params) in &models {
        let scores = ModelScores::from_scores(*name, &score_model(params, &topo, &test)?)?;
        log::info!("{name}: held-out per-vertex error {:.4} mm", scores.total);
        report.models.push(scores);
    }
    let clf_path = Path::new(&cfg.checkpoints).join("classifier.bin");
    if clf_path.exists() {
        let clf = Classifier::load(&clf_path)?;
        report.classification = classification_sections(&clf, &test, &models, &topo)?;
        report.classifier = Some(clf.config);
    }
    report.write(&cfg.reports, "report")?;
    let dir = Path::new(&cfg.reports);
    let mut files = vec![dir.join("report.txt"), dir.join("report.tsv")];
    files.extend(report.models.iter().map(|m| dir.join(format!("curve_{}.txt", m.name))));
    Ok(files)
}

fn classify(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (train_set, test) = load_splits(cfg)?;
    let ccfg = cfg.classifier_config();
    let (clf, history) = Classifier::train(&train_set, &ccfg)?;
    log::info!("classifier final epoch loss {:.6}", history.last().copied().unwrap_or(f64::NAN));
    let path = Path::new(&cfg.checkpoints).join("classifier.bin");
    clf.save(&path, &cfg.hash())?;
    let mut files = vec![path];
    if test.is_empty() {
        return Ok(files);
    }
    // score generations too when a hierarchy and checkpoints are available
    let sections = match HierarchyCache::load(&cfg.cache) {
        Ok(cache) => {
            let topo = DecoderTopology::from_cache(&cache)?;
            match cfg.precision()? {
                Precision::Single => {
                    classification_sections(&clf, &test, &available_models::<f32>(cfg, &cache, &topo)?, &topo)?
                }
                Precision::Double => {
                    classification_sections(&clf, &test, &available_models::<f64>(cfg, &cache, &topo)?, &topo)?
                }
            }
        }
        Err(_) => vec![("ground_truth".to_string(), classify_and_report(&clf, &test)?)],
    };
    for (source, m) in &sections {
        log::info!("{source}: macro F1 {:.4}", m.macro_f1);
    }
    let report = EvalReport {
        config_hash: cfg.hash(),
        classifier: Some(ccfg),
        classification: sections,
        ..EvalReport::default()
    };
    report.write(&cfg.reports, "classification")?;
    let dir = Path::new(&cfg.reports);
    files.extend([dir.join("classification.txt"), dir.join("classification.tsv")]);
    Ok(files)
}

/// Latent of `expression`'s label at the middle of its apex interval.
fn apex_latent<T: Real>(cfg: &RunConfig, params: &GeneratorParams<T>, expression: &str) -> Result<Vec<f64>> {
    let label = cfg.label(expression)?;
    let z = params.encode(&label_signal(&label))?;
    Ok(z[(label.t_apex_start + label.t_apex_end) / 2].clone())
}

fn interpolate<T: Real>(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (cache, topo) = load_cache(cfg)?;
    let params = load_model::<T>(&cfg.checkpoint(&cfg.model), &cache, &topo)?;
    let neutral = neutral_mesh(cfg)?;
    let za = apex_latent(cfg, &params, &cfg.interp_from)?;
    let zb = apex_latent(cfg, &params, &cfg.interp_to)?;
    let meshes = interpolate_latents(&za, &zb, cfg.steps, &neutral, &params, &topo)?;
    let dir = Path::new(&cfg.output).join("interpolate");
    let mut files = write_frames(&dir, &meshes, &cfg.header())?;
    let mut alphas = format!("# {}\n# frame alpha\n", cfg.header().replace('\n', "\n# "));
    for i in 0..cfg.steps {
        alphas.push_str(&format!("{i} {}\n", i as f64 / (cfg.steps - 1) as f64));
    }
    files.push(write_text(&dir.join("alpha.txt"), &alphas)?);
    log::info!(
        "wrote {} steps {} -> {} to {}",
        cfg.steps,
        cfg.interp_from.parse::<Expression>()?,
        cfg.interp_to.parse::<Expression>()?,
        dir.display()
    );
    Ok(files)
}
