//! Synthetic 4D expression data on a fixed template.
//!
//! Each subject is the template plus a smooth radial-basis identity
//! deformation. Each expression is a fixed sum of Gaussian displacement
//! bumps placed in template-normalized face coordinates (mouth corners,
//! brows, jaw, upper lip); a sequence plays
//! `x_t = x_id + phase(t) * (k * field_e + p) + noise`, where `k` is a
//! per-subject-and-expression intensity and `p` a small random bump field.
//! Labels get randomized (or fixed) phase timestamps, and `s` from the
//! extremeness statistics of the generated set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{apply_scales, Expression, ExpressionSequence, ExpressionStats, MotionLabel};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

/// Normalized face coordinates of a template: `x, y` centered on the
/// bounding box and divided by the larger half extent of the two; `z` mapped
/// to `[0, 1]` (1 = frontmost).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    center: Vec3,
    half: f64,
    zmin: f64,
    zspan: f64,
}

impl FaceFrame {
    pub fn of(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounds();
        let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        FaceFrame {
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.0],
            half: if half > 0.0 { half } else { 1.0 },
            zmin: lo[2],
            zspan: if hi[2] > lo[2] { hi[2] - lo[2] } else { 1.0 },
        }
    }

    pub fn normalize(&self, p: &Vec3) -> Vec3 {
        [
            (p[0] - self.center[0]) / self.half,
            (p[1] - self.center[1]) / self.half,
            (p[2] - self.zmin) / self.zspan,
        ]
    }

    /// Fades displacements out on the back and sides of the template.
    pub fn front_weight(&self, p: &Vec3) -> f64 {
        let z = self.normalize(p)[2];
        let t = ((z - 0.3) / 0.4).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    }
}

/// `(center x, center y, width, direction)` in normalized units.
type Bump = (f64, f64, f64, Vec3);

fn mirrored(x: f64, y: f64, w: f64, d: Vec3) -> [Bump; 2] {
    [(x, y, w, d), (-x, y, w, [-d[0], d[1], d[2]])]
}

fn bumps(e: Expression) -> Vec<Bump> {
    let mut b = Vec::new();
    match e {
        Expression::Happy => {
            b.extend(mirrored(0.32, -0.45, 0.18, [0.5, 0.8, -0.2]));
            b.extend(mirrored(0.40, -0.15, 0.20, [0.0, 0.4, 0.3]));
        }
        Expression::Sad => {
            b.extend(mirrored(0.32, -0.50, 0.18, [0.0, -0.8, -0.1]));
            b.extend(mirrored(0.12, 0.42, 0.12, [0.0, 0.5, 0.0]));
            b.push((0.0, -0.55, 0.15, [0.0, 0.0, 0.4]));
        }
        Expression::Surprise => {
            b.push((0.0, -0.70, 0.30, [0.0, -1.0, -0.2]));
            b.extend(mirrored(0.30, 0.42, 0.20, [0.0, 0.7, 0.1]));
        }
        Expression::Angry => {
            b.extend(mirrored(0.20, 0.38, 0.15, [-0.3, -0.7, 0.2]));
            b.push((0.0, -0.50, 0.15, [0.0, 0.0, -0.5]));
        }
        Expression::Disgust => {
            b.push((0.0, -0.32, 0.15, [0.0, 0.6, 0.4]));
            b.extend(mirrored(0.12, -0.05, 0.10, [0.0, 0.4, 0.2]));
            b.extend(mirrored(0.30, -0.48, 0.12, [0.0, -0.3, 0.0]));
        }
        Expression::Fear => {
            b.extend(mirrored(0.12, 0.42, 0.12, [0.0, 0.8, 0.0]));
            b.extend(mirrored(0.35, -0.48, 0.15, [0.8, -0.3, 0.0]));
            b.push((0.0, -0.70, 0.25, [0.0, -0.4, 0.0]));
        }
    }
    b
}

fn bump_field(mesh: &Mesh, frame: &FaceFrame, bumps: &[Bump], amplitude: f64, width_scale: f64) -> Vec<Vec3> {
    mesh.vertices()
        .iter()
        .map(|p| {
            let q = frame.normalize(p);
            let fw = frame.front_weight(p);
            let mut d = [0.0; 3];
            for &(cx, cy, w, dir) in bumps {
                let w = w * width_scale;
                let r2 = (q[0] - cx).powi(2) + (q[1] - cy).powi(2);
                let g = amplitude * fw * (-r2 / (2.0 * w * w)).exp();
                for k in 0..3 {
                    d[k] += g * dir[k];
                }
            }
            d
        })
        .collect()
}

/// The fixed displacement field of an expression on `template`, in mm.
/// Bump directions have norm of order one, so peaks are close to
/// `amplitude`.
pub fn expression_field(template: &Mesh, e: Expression, amplitude: f64, width_scale: f64) -> Vec<Vec3> {
    bump_field(template, &FaceFrame::of(template), &bumps(e), amplitude, width_scale)
}

/// Smooth identity offset: Gaussian radial basis functions centered on
/// random template vertices with normally distributed displacement vectors.
pub fn identity_deformation<R: Rng>(template: &Mesh, rng: &mut R, scale_mm: f64, centers: usize) -> Vec<Vec3> {
    let frame = FaceFrame::of(template);
    let normal = Normal::new(0.0, scale_mm).expect("finite scale");
    let n = template.num_vertices();
    let kernels: Vec<(Vec3, Vec3)> = (0..centers)
        .map(|_| {
            let c = frame.normalize(&template.vertices()[rng.random_range(0..n)]);
            let d = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
            (c, d)
        })
        .collect();
    let width = 0.5;
    template
        .vertices()
        .iter()
        .map(|p| {
            let q = frame.normalize(p);
            let mut out = [0.0; 3];
            for (c, d) in &kernels {
                let r2 = (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2);
                let g = (-r2 / (2.0 * width * width)).exp();
                for k in 0..3 {
                    out[k] += g * d[k];
                }
            }
            out
        })
        .collect()
}

/// How phase timestamps are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    /// Onset in `[0.05, 0.2] T`, onset ramp `[0.15, 0.3] T`, apex
    /// `[0.25, 0.45] T`, offset ramp `[0.1, 0.25] T`, clamped to `T - 1`.
    Random,
    /// The same `[onset, apex_start, apex_end, offset_end]` for every sequence.
    Fixed([usize; 4]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Index of the first subject; subjects are generated independently, so
    /// disjoint index ranges give disjoint, reproducible subject sets.
    pub first_subject: usize,
    pub expressions: Vec<Expression>,
    pub frames: usize,
    pub seed: u64,
    /// Peak size of the expression fields (mm).
    pub amplitude: f64,
    /// Per-coordinate standard deviation of the identity RBF weights (mm).
    pub identity_scale: f64,
    /// Multiplier on every bump width. The default keeps the fields smooth
    /// enough for a 5x pyramid on a ~2.5k-vertex template to represent.
    pub width_scale: f64,
    /// Relative size of the random per-sequence bump field.
    pub perturbation: f64,
    /// Range of the per-sequence intensity multiplier.
    pub intensity: (f64, f64),
    /// Per-coordinate Gaussian vertex noise (mm).
    pub noise_sigma: f64,
    pub timing: Timing,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 4,
            first_subject: 0,
            expressions: Expression::ALL.to_vec(),
            frames: 20,
            seed: 0,
            amplitude: 10.0,
            width_scale: 2.0,
            identity_scale: 3.0,
            perturbation: 0.25,
            intensity: (0.6, 1.4),
            noise_sigma: 0.01,
            timing: Timing::Random,
        }
    }
}

fn random_timing<R: Rng>(rng: &mut R, t: usize) -> [usize; 4] {
    let tf = t as f64;
    let mut draw = |lo: f64, hi: f64| (rng.random_range(lo..=hi) * tf).round() as usize;
    let on = draw(0.05, 0.2);
    let a0 = on + draw(0.15, 0.3).max(1);
    let a1 = a0 + draw(0.25, 0.45);
    let off = a1 + draw(0.1, 0.25).max(1);
    let last = t - 1;
    let mut ts = [on.min(last), a0.min(last), a1.min(last), off.min(last)];
    for k in 1..4 {
        ts[k] = ts[k].max(ts[k - 1]);
    }
    ts
}

/// Generates `n_subjects x expressions` sequences and their statistics.
///
/// Each subject draws from its own ChaCha stream `(seed, subject index)`,
/// so a subject's data does not depend on how many others are generated.
pub fn synth_dataset(template: &Mesh, cfg: &SynthConfig) -> Result<(Vec<ExpressionSequence>, ExpressionStats)> {
    if cfg.frames < 2 {
        return Err(Error::InvalidArgument("synthetic sequences need at least 2 frames".into()));
    }
    if let Timing::Fixed(ts) = cfg.timing {
        MotionLabel::new(Expression::Happy, cfg.frames, ts, 1.0)?;
    }
    let frame = FaceFrame::of(template);
    let fields: Vec<Vec<Vec3>> = cfg
        .expressions
        .iter()
        .map(|&e| expression_field(template, e, cfg.amplitude, cfg.width_scale))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let dir = Normal::new(0.0, cfg.perturbation).expect("finite perturbation");
    let mut seqs = Vec::with_capacity(cfg.n_subjects * cfg.expressions.len());

    for s in cfg.first_subject..cfg.first_subject + cfg.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let subject = format!("s{s:03}");
        let id = identity_deformation(template, &mut rng, cfg.identity_scale, 6);
        let neutral_pos: Vec<Vec3> = template
            .vertices()
            .iter()
            .zip(&id)
            .map(|(p, d)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
            .collect();
        let neutral = template.with_vertices(neutral_pos)?;

        for (ei, &e) in cfg.expressions.iter().enumerate() {
            let k = rng.random_range(cfg.intensity.0..=cfg.intensity.1);
            let extra: Vec<Bump> = (0..3)
                .map(|_| {
                    let cx = rng.random_range(-0.5..=0.5);
                    let cy = rng.random_range(-0.7..=0.5);
                    (cx, cy, 0.15, [dir.sample(&mut rng), dir.sample(&mut rng), dir.sample(&mut rng)])
                })
                .collect();
            let pert = bump_field(template, &frame, &extra, cfg.amplitude, cfg.width_scale);
            let motion: Vec<Vec3> = fields[ei]
                .iter()
                .zip(&pert)
                .map(|(f, p)| [k * f[0] + p[0], k * f[1] + p[1], k * f[2] + p[2]])
                .collect();
            let ts = match cfg.timing {
                Timing::Random => random_timing(&mut rng, cfg.frames),
                Timing::Fixed(ts) => ts,
            };
            let label = MotionLabel::new(e, cfg.frames, ts, 1.0)?;
            let frames: Vec<Vec<Vec3>> = (0..cfg.frames)
                .map(|t| {
                    let a = label.phase(t);
                    neutral
                        .vertices()
                        .iter()
                        .zip(&motion)
                        .map(|(p, m)| {
                            let mut q = [0.0; 3];
                            for c in 0..3 {
                                let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                                q[c] = p[c] + a * m[c] + n;
                            }
                            q
                        })
                        .collect()
                })
                .collect();
            seqs.push(ExpressionSequence::new(subject.clone(), neutral.clone(), frames, label)?);
        }
    }
    let stats = ExpressionStats::from_sequences(&seqs);
    apply_scales(&mut seqs, &stats);
    Ok((seqs, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mean_abs_deformation;
    use crate::mesh::primitives::{face_grid, icosphere};

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            frames: 12,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let m = icosphere(2, 80.0);
        let a = synth_dataset(&m, &small()).unwrap();
        let b = synth_dataset(&m, &small()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subjects_independent_of_count() {
        let m = icosphere(2, 80.0);
        let (two, _) = synth_dataset(&m, &small()).unwrap();
        let one_cfg = SynthConfig {
            n_subjects: 1,
            first_subject: 1,
            ..small()
        };
        let (one, _) = synth_dataset(&m, &one_cfg).unwrap();
        assert_eq!(one[0].frames, two[6].frames);
        assert_eq!(one[0].subject, "s001");
    }

    #[test]
    fn rest_frames_are_identity_up_to_noise() {
        let m = icosphere(2, 80.0);
        let cfg = SynthConfig {
            timing: Timing::Fixed([3, 5, 8, 10]),
            ..small()
        };
        let (seqs, _) = synth_dataset(&m, &cfg).unwrap();
        for s in &seqs {
            for t in [0, 1, 2, 3, 10, 11] {
                let max = s.frames[t]
                    .iter()
                    .zip(s.neutral.vertices())
                    .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
                    .fold(0.0, f64::max);
                assert!(max < 6.0 * 0.01, "frame {t}: {max}");
            }
        }
    }

    #[test]
    fn peak_deformation_inside_apex() {
        let m = face_grid(30, 24, 150.0);
        let (seqs, _) = synth_dataset(&m, &SynthConfig { frames: 25, ..small() }).unwrap();
        for s in &seqs {
            let per_frame: Vec<f64> = (0..s.num_frames())
                .map(|t| {
                    let d = s.displacement(t);
                    d.chunks(3).map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).sum::<f64>()
                })
                .collect();
            let arg = (0..per_frame.len()).max_by(|&a, &b| per_frame[a].total_cmp(&per_frame[b])).unwrap();
            assert!(
                (s.label.t_apex_start..=s.label.t_apex_end).contains(&arg),
                "{} {}: argmax {arg}, label {:?}",
                s.subject,
                s.label.expression,
                s.label.timestamps()
            );
        }
    }

    #[test]
    fn recovered_deformation_matches_field() {
        // Unit intensity, no perturbation, default noise. Each displacement is
        // phase(t) F(v) + N(0, s^2 I), whose expected norm is the mean of a
        // 3-d noncentral chi variable; m_i should match its average over t, v.
        let m = face_grid(40, 32, 150.0);
        let cfg = SynthConfig {
            n_subjects: 1,
            frames: 30,
            intensity: (1.0, 1.0),
            perturbation: 1e-12,
            ..Default::default()
        };
        let sigma = cfg.noise_sigma;
        let expected_norm = |r: f64| {
            if r < 1e-12 {
                2.0 * sigma * (2.0 / std::f64::consts::PI).sqrt()
            } else {
                sigma * (2.0 / std::f64::consts::PI).sqrt() * (-r * r / (2.0 * sigma * sigma)).exp()
                    + (r + sigma * sigma / r) * erf(r / (sigma * std::f64::consts::SQRT_2))
            }
        };
        let (seqs, _) = synth_dataset(&m, &cfg).unwrap();
        for s in &seqs {
            let f = expression_field(&m, s.label.expression, cfg.amplitude, cfg.width_scale);
            let mut want = 0.0;
            for t in 0..cfg.frames {
                let a = s.label.phase(t);
                for d in &f {
                    want += expected_norm(a * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
                }
            }
            want /= (cfg.frames * f.len()) as f64;
            let m_i = mean_abs_deformation(s);
            assert!((m_i - want).abs() < 0.02 * want, "{:?}: {m_i} vs {want}", s.label.expression);
        }
    }

    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        (1.0 - poly * (-x * x).exp()).copysign(x)
    }

    #[test]
    fn expressions_differ() {
        let m = icosphere(2, 80.0);
        let fields: Vec<_> = Expression::ALL.iter().map(|&e| expression_field(&m, e, 10.0, 1.0)).collect();
        for i in 0..6 {
            for j in 0..i {
                let d: f64 = fields[i]
                    .iter()
                    .zip(&fields[j])
                    .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>())
                    .sum();
                assert!(d > 1.0);
            }
        }
    }

    #[test]
    fn scales_in_range() {
        let m = icosphere(2, 80.0);
        let (seqs, stats) = synth_dataset(&m, &SynthConfig { n_subjects: 5, ..small() }).unwrap();
        assert!(stats.std.iter().all(|&s| s > 0.0));
        assert!(seqs.iter().all(|s| s.label.scale >= 0.05 && s.label.scale <= 1.0));
    }
}
