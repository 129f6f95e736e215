//! Motion labels, intensity scaling, and expression sequences.
//!
//! A sequence goes neutral → onset (linear ramp) → apex (plateau) → offset
//! (linear decay) → neutral. The label signal fed to the encoder is a
//! one-hot expression code whose amplitude follows that profile, scaled to
//! the sequence's extremeness `s`.

mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

pub use io::{
    frame_file_name, load_dataset, load_split, save_dataset, split_by_subject, write_label_file, LABEL_FILE, NEUTRAL_FILE,
    SPLIT_FILE,
};
pub use synth::{expression_field, identity_deformation, synth_dataset, FaceFrame, SynthConfig, Timing};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

/// The six basic expressions, in label-row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expression {
    Happy,
    Sad,
    Surprise,
    Angry,
    Disgust,
    Fear,
}

pub const NUM_EXPRESSIONS: usize = 6;

impl Expression {
    pub const ALL: [Expression; NUM_EXPRESSIONS] = [
        Expression::Happy,
        Expression::Sad,
        Expression::Surprise,
        Expression::Angry,
        Expression::Disgust,
        Expression::Fear,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Expression::Happy => "happy",
            Expression::Sad => "sad",
            Expression::Surprise => "surprise",
            Expression::Angry => "angry",
            Expression::Disgust => "disgust",
            Expression::Fear => "fear",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown expression {s:?}")))
    }
}

/// Expression, length and phase timestamps of one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLabel {
    pub expression: Expression,
    pub frames: usize,
    pub t_onset: usize,
    pub t_apex_start: usize,
    pub t_apex_end: usize,
    pub t_offset_end: usize,
    /// Apex amplitude in (0, 1].
    pub scale: f64,
}

impl MotionLabel {
    pub fn new(
        expression: Expression,
        frames: usize,
        [t_onset, t_apex_start, t_apex_end, t_offset_end]: [usize; 4],
        scale: f64,
    ) -> Result<Self> {
        let l = MotionLabel {
            expression,
            frames,
            t_onset,
            t_apex_start,
            t_apex_end,
            t_offset_end,
            scale,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frames >= 1
            && self.t_onset <= self.t_apex_start
            && self.t_apex_start <= self.t_apex_end
            && self.t_apex_end <= self.t_offset_end
            && self.t_offset_end < self.frames;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "timestamps must satisfy 0 <= onset <= apex_start <= apex_end <= offset_end <= T-1, got {} {} {} {} with T = {}",
                self.t_onset, self.t_apex_start, self.t_apex_end, self.t_offset_end, self.frames
            )));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidArgument(format!("scale {} outside (0, 1]", self.scale)));
        }
        Ok(())
    }

    pub fn timestamps(&self) -> [usize; 4] {
        [self.t_onset, self.t_apex_start, self.t_apex_end, self.t_offset_end]
    }

    /// Unit-height phase profile at frame `t` (no scaling).
    pub fn phase(&self, t: usize) -> f64 {
        let t = t as f64;
        let (on, a0, a1, off) = (
            self.t_onset as f64,
            self.t_apex_start as f64,
            self.t_apex_end as f64,
            self.t_offset_end as f64,
        );
        if t < on {
            0.0
        } else if t < a0 {
            (t - on) / (a0 - on)
        } else if t <= a1 {
            1.0
        } else if t < off {
            (off - t) / (off - a1)
        } else {
            0.0
        }
    }

    /// Scaled amplitude `a(t)`.
    pub fn amplitude(&self, t: usize) -> f64 {
        self.scale * self.phase(t)
    }
}

/// The `6 x T` conditioning signal, returned per frame: `signal[t][e]`.
pub fn label_signal(label: &MotionLabel) -> Vec<[f64; NUM_EXPRESSIONS]> {
    let row = label.expression.index();
    (0..label.frames)
        .map(|t| {
            let mut col = [0.0; NUM_EXPRESSIONS];
            col[row] = label.amplitude(t);
            col
        })
        .collect()
}

/// A labeled 4D sequence. Frames store positions only; they share the
/// neutral's connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionSequence {
    pub subject: String,
    pub neutral: Mesh,
    pub frames: Vec<Vec<Vec3>>,
    pub label: MotionLabel,
}

impl ExpressionSequence {
    pub fn new(subject: impl Into<String>, neutral: Mesh, frames: Vec<Vec<Vec3>>, label: MotionLabel) -> Result<Self> {
        let subject = subject.into();
        if frames.len() != label.frames {
            return Err(Error::Shape(format!(
                "{subject}: {} frames for a label of length {}",
                frames.len(),
                label.frames
            )));
        }
        if let Some(t) = frames.iter().position(|f| f.len() != neutral.num_vertices()) {
            return Err(Error::Topology(format!(
                "{subject} frame {t}: {} vertices, neutral has {}",
                frames[t].len(),
                neutral.num_vertices()
            )));
        }
        Ok(ExpressionSequence {
            subject,
            neutral,
            frames,
            label,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_mesh(&self, t: usize) -> Mesh {
        self.neutral
            .with_vertices(self.frames[t].clone())
            .expect("frames share the neutral's vertex count")
    }

    /// Per-frame displacement from the neutral, flattened `N*3`.
    pub fn displacement(&self, t: usize) -> Vec<f64> {
        self.frames[t]
            .iter()
            .zip(self.neutral.vertices())
            .flat_map(|(p, q)| [p[0] - q[0], p[1] - q[1], p[2] - q[2]])
            .collect()
    }
}

/// Mean per-vertex Euclidean displacement from the neutral, over all frames
/// and vertices (mm).
pub fn mean_abs_deformation(seq: &ExpressionSequence) -> f64 {
    let n = seq.neutral.num_vertices();
    if seq.frames.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for f in &seq.frames {
        for (p, q) in f.iter().zip(seq.neutral.vertices()) {
            total += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        }
    }
    total / (seq.frames.len() * n) as f64
}

/// Per-expression mean and standard deviation of [`mean_abs_deformation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpressionStats {
    pub mean: [f64; NUM_EXPRESSIONS],
    pub std: [f64; NUM_EXPRESSIONS],
}

/// Standard deviations are floored here so the scale stays defined for
/// expressions with a single (or constant) sample.
pub const MIN_STD: f64 = 1e-6;

impl ExpressionStats {
    /// Population statistics of `m_i` grouped by expression. Expressions
    /// without sequences get mean 0 and unit deviation.
    pub fn from_deformations(items: &[(Expression, f64)]) -> Self {
        let mut mean = [0.0; NUM_EXPRESSIONS];
        let mut std = [1.0; NUM_EXPRESSIONS];
        for e in Expression::ALL {
            let xs: Vec<f64> = items.iter().filter(|(x, _)| *x == e).map(|&(_, m)| m).collect();
            if xs.is_empty() {
                continue;
            }
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
            mean[e.index()] = mu;
            std[e.index()] = var.sqrt().max(MIN_STD);
        }
        ExpressionStats { mean, std }
    }

    pub fn from_sequences(seqs: &[ExpressionSequence]) -> Self {
        let items: Vec<_> = seqs
            .iter()
            .map(|s| (s.label.expression, mean_abs_deformation(s)))
            .collect();
        Self::from_deformations(&items)
    }
}

/// Lower bound on the extremeness scale, keeping `s` strictly positive.
pub const SCALE_FLOOR: f64 = 0.05;

/// `s = (clip((m - mu_e) / sigma_e, -1, 1) + 1) / 2`, floored at
/// [`SCALE_FLOOR`].
pub fn extremeness_scale(m: f64, stats: &ExpressionStats, expression: Expression) -> f64 {
    let e = expression.index();
    let z = ((m - stats.mean[e]) / stats.std[e]).clamp(-1.0, 1.0);
    ((z + 1.0) / 2.0).clamp(SCALE_FLOOR, 1.0)
}

/// Sets every label's scale from its sequence's deformation.
pub fn apply_scales(seqs: &mut [ExpressionSequence], stats: &ExpressionStats) {
    for s in seqs.iter_mut() {
        s.label.scale = extremeness_scale(mean_abs_deformation(s), stats, s.label.expression);
    }
}

/// Keeps frames `0, stride, 2*stride, ...`; timestamps are divided by the
/// stride, rounded, and re-clamped into order.
pub fn temporal_subsample(seq: &ExpressionSequence, stride: usize) -> Result<ExpressionSequence> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if stride == 1 {
        return Ok(seq.clone());
    }
    let frames: Vec<_> = seq.frames.iter().step_by(stride).cloned().collect();
    let t_new = frames.len();
    let mut ts = seq.label.timestamps().map(|t| ((t as f64 / stride as f64).round() as usize).min(t_new - 1));
    for k in 1..4 {
        ts[k] = ts[k].max(ts[k - 1]);
    }
    let label = MotionLabel::new(seq.label.expression, t_new, ts, seq.label.scale)?;
    ExpressionSequence::new(seq.subject.clone(), seq.neutral.clone(), frames, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::tetrahedron;

    fn paper_label(s: f64) -> MotionLabel {
        MotionLabel::new(Expression::Happy, 100, [10, 30, 80, 95], s).unwrap()
    }

    #[test]
    fn piecewise_values() {
        let l = paper_label(1.0);
        assert_eq!(l.amplitude(55), 1.0);
        assert_eq!(l.amplitude(20), 0.5);
        assert_eq!(l.amplitude(5), 0.0);
        assert_eq!(l.amplitude(10), 0.0);
        assert_eq!(l.amplitude(30), 1.0);
        assert_eq!(l.amplitude(80), 1.0);
        assert_eq!(l.amplitude(95), 0.0);
        assert_eq!(l.amplitude(99), 0.0);
        assert!((l.amplitude(90) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn half_scale_halves() {
        let (a, b) = (paper_label(1.0), paper_label(0.5));
        for t in 0..100 {
            assert_eq!(b.amplitude(t), 0.5 * a.amplitude(t));
        }
    }

    #[test]
    fn one_hot_columns() {
        let l = MotionLabel::new(Expression::Disgust, 12, [1, 3, 6, 9], 0.8).unwrap();
        for col in label_signal(&l) {
            let nz: Vec<_> = (0..6).filter(|&e| col[e] != 0.0).collect();
            assert!(nz.is_empty() || nz == vec![Expression::Disgust.index()]);
        }
    }

    #[test]
    fn monotone_phases() {
        let l = MotionLabel::new(Expression::Sad, 40, [3, 11, 20, 33], 0.7).unwrap();
        for t in l.t_onset..l.t_apex_start {
            assert!(l.amplitude(t + 1) >= l.amplitude(t));
        }
        for t in l.t_apex_end..l.t_offset_end {
            assert!(l.amplitude(t + 1) <= l.amplitude(t));
        }
    }

    #[test]
    fn degenerate_phases() {
        // Instant onset and offset: a step function on the apex.
        let l = MotionLabel::new(Expression::Fear, 10, [2, 2, 5, 5], 1.0).unwrap();
        let a: Vec<f64> = (0..10).map(|t| l.amplitude(t)).collect();
        assert_eq!(a, vec![0., 0., 1., 1., 1., 1., 0., 0., 0., 0.]);
        let l = MotionLabel::new(Expression::Fear, 5, [0, 0, 4, 4], 1.0).unwrap();
        assert!((0..5).all(|t| l.amplitude(t) == 1.0));
    }

    #[test]
    fn invalid_labels() {
        assert!(MotionLabel::new(Expression::Happy, 10, [5, 4, 6, 7], 1.0).is_err());
        assert!(MotionLabel::new(Expression::Happy, 10, [1, 2, 3, 10], 1.0).is_err());
        assert!(MotionLabel::new(Expression::Happy, 10, [1, 2, 3, 4], 0.0).is_err());
    }

    #[test]
    fn eq6_cases() {
        let mut stats = ExpressionStats::from_deformations(&[]);
        stats.mean[0] = 2.0;
        stats.std[0] = 0.5;
        assert_eq!(extremeness_scale(2.0, &stats, Expression::Happy), 0.5);
        assert_eq!(extremeness_scale(2.5, &stats, Expression::Happy), 1.0);
        assert_eq!(extremeness_scale(9.0, &stats, Expression::Happy), 1.0);
        assert_eq!(extremeness_scale(1.5, &stats, Expression::Happy), SCALE_FLOOR);
        assert_eq!(extremeness_scale(2.25, &stats, Expression::Happy), 0.75);
        let mut prev = 0.0;
        for i in 0..100 {
            let s = extremeness_scale(i as f64 * 0.05, &stats, Expression::Happy);
            assert!(s >= prev && (SCALE_FLOOR..=1.0).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn stats_population() {
        let st = ExpressionStats::from_deformations(&[(Expression::Sad, 1.0), (Expression::Sad, 3.0), (Expression::Fear, 4.0)]);
        assert_eq!(st.mean[1], 2.0);
        assert_eq!(st.std[1], 1.0);
        assert_eq!(st.std[5], MIN_STD);
        assert_eq!((st.mean[0], st.std[0]), (0.0, 1.0));
    }

    fn shifted_seq(shift: f64, t: usize) -> ExpressionSequence {
        let m = tetrahedron();
        let frames = (0..t)
            .map(|_| m.vertices().iter().map(|p| [p[0] + shift, p[1], p[2]]).collect())
            .collect();
        let label = MotionLabel::new(Expression::Angry, t, [0, 0, t - 1, t - 1], 1.0).unwrap();
        ExpressionSequence::new("a", m, frames, label).unwrap()
    }

    #[test]
    fn deformation_means() {
        assert_eq!(mean_abs_deformation(&shifted_seq(0.0, 3)), 0.0);
        assert_eq!(mean_abs_deformation(&shifted_seq(1.0, 1)), 1.0);
    }

    #[test]
    fn subsample() {
        let s = shifted_seq(0.0, 100);
        assert_eq!(temporal_subsample(&s, 1).unwrap(), s);
        let mut s2 = s.clone();
        s2.label = MotionLabel::new(Expression::Angry, 100, [10, 30, 80, 95], 1.0).unwrap();
        let d = temporal_subsample(&s2, 5).unwrap();
        assert_eq!(d.num_frames(), 20);
        assert_eq!(d.label.timestamps(), [2, 6, 16, 19]);
        assert!(temporal_subsample(&s, 0).is_err());
    }

    #[test]
    fn parse_expression() {
        assert_eq!("Surprise".parse::<Expression>().unwrap(), Expression::Surprise);
        assert!("bored".parse::<Expression>().is_err());
        for e in Expression::ALL {
            assert_eq!(Expression::from_index(e.index()), Some(e));
        }
    }
}
