//! Evaluation report and its text, table and curve files.

use std::fmt::Write as _;
use std::path::Path;

use super::classifier::{ClassMetrics, ClassifierConfig};
use super::{mean_curve, SequenceScore};
use crate::data::{Expression, NUM_EXPRESSIONS};
use crate::error::{Error, Result};

/// Aggregated errors of one generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScores {
    pub name: String,
    /// `(expression, mean per-vertex error, frames)` for each expression
    /// present, in label order.
    pub per_expression: Vec<(Expression, f64, usize)>,
    /// Frame-weighted mean over all sequences.
    pub total: f64,
    /// Mean per-frame L1 curve.
    pub curve: Vec<f64>,
}

impl ModelScores {
    pub fn from_scores(name: impl Into<String>, scores: &[SequenceScore]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidArgument("no sequences to score".into()));
        }
        let mut sums = [(0.0, 0usize); NUM_EXPRESSIONS];
        for s in scores {
            let e = &mut sums[s.expression.index()];
            e.0 += s.per_vertex * s.frames as f64;
            e.1 += s.frames;
        }
        let per_expression: Vec<_> = Expression::ALL
            .iter()
            .zip(sums)
            .filter(|(_, (_, n))| *n > 0)
            .map(|(&e, (sum, n))| (e, sum / n as f64, n))
            .collect();
        let frames: usize = per_expression.iter().map(|p| p.2).sum();
        let total = per_expression.iter().map(|p| p.1 * p.2 as f64).sum::<f64>() / frames as f64;
        let curves: Vec<Vec<f64>> = scores.iter().map(|s| s.curve.clone()).collect();
        Ok(ModelScores {
            name: name.into(),
            per_expression,
            total,
            curve: mean_curve(&curves),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub config_hash: String,
    pub hierarchy: String,
    pub models: Vec<ModelScores>,
    pub classifier: Option<ClassifierConfig>,
    /// Classifier metrics per sequence source (ground truth, each model).
    pub classification: Vec<(String, ClassMetrics)>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# evaluation report");
        let _ = writeln!(s, "config_hash {}", self.config_hash);
        let _ = writeln!(s, "hierarchy {}", self.hierarchy);
        if !self.models.is_empty() {
            let _ = writeln!(s, "\n## mean per-vertex error (mm)");
            let _ = write!(s, "{:<10}", "model");
            for e in Expression::ALL {
                let _ = write!(s, " {:>9}", e.name());
            }
            let _ = writeln!(s, " {:>9}", "total");
            for m in &self.models {
                let _ = write!(s, "{:<10}", m.name);
                for e in Expression::ALL {
                    match m.per_expression.iter().find(|p| p.0 == e) {
                        Some(p) => {
                            let _ = write!(s, " {:>9.4}", p.1);
                        }
                        None => {
                            let _ = write!(s, " {:>9}", "-");
                        }
                    }
                }
                let _ = writeln!(s, " {:>9.4}", m.total);
            }
        }
        if let Some(c) = &self.classifier {
            let _ = writeln!(
                s,
                "\n## classifier\nframes {} components {} layers {}-{}-{}-{} lr {} weight_decay {} epochs {} seed {}",
                c.frames,
                c.components,
                c.frames * c.components,
                c.hidden[0],
                c.hidden[1],
                NUM_EXPRESSIONS,
                c.lr,
                c.weight_decay,
                c.epochs,
                c.seed
            );
        }
        for (source, m) in &self.classification {
            let _ = writeln!(s, "\n### {source}");
            let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>7}", "class", "precision", "recall", "f1", "support");
            for e in Expression::ALL {
                let i = e.index();
                let _ = writeln!(
                    s,
                    "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>7}",
                    e.name(),
                    m.precision[i],
                    m.recall[i],
                    m.f1[i],
                    m.support[i]
                );
            }
            let _ = writeln!(
                s,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>7}",
                "macro",
                m.macro_precision,
                m.macro_recall,
                m.macro_f1,
                m.support.iter().sum::<usize>()
            );
            let _ = writeln!(s, "accuracy {:.4}", m.accuracy);
        }
        s
    }

    /// Tab-separated `section source item metric value` rows.
    pub fn to_table(&self) -> String {
        let mut s = String::from("section\tsource\titem\tmetric\tvalue\n");
        let _ = writeln!(s, "meta\t-\t-\tconfig_hash\t{}", self.config_hash);
        let _ = writeln!(s, "meta\t-\t-\thierarchy\t{}", self.hierarchy);
        for m in &self.models {
            for (e, err, frames) in &m.per_expression {
                let _ = writeln!(s, "error\t{}\t{e}\tper_vertex_mm\t{err}", m.name);
                let _ = writeln!(s, "error\t{}\t{e}\tframes\t{frames}", m.name);
            }
            let _ = writeln!(s, "error\t{}\ttotal\tper_vertex_mm\t{}", m.name, m.total);
        }
        for (source, m) in &self.classification {
            for e in Expression::ALL {
                let i = e.index();
                let _ = writeln!(s, "classification\t{source}\t{e}\tprecision\t{}", m.precision[i]);
                let _ = writeln!(s, "classification\t{source}\t{e}\trecall\t{}", m.recall[i]);
                let _ = writeln!(s, "classification\t{source}\t{e}\tf1\t{}", m.f1[i]);
                let _ = writeln!(s, "classification\t{source}\t{e}\tsupport\t{}", m.support[i]);
            }
            let _ = writeln!(s, "classification\t{source}\ttotal\tprecision\t{}", m.macro_precision);
            let _ = writeln!(s, "classification\t{source}\ttotal\trecall\t{}", m.macro_recall);
            let _ = writeln!(s, "classification\t{source}\ttotal\tf1\t{}", m.macro_f1);
            let _ = writeln!(s, "classification\t{source}\ttotal\taccuracy\t{}", m.accuracy);
        }
        s
    }

    /// Two columns: frame index and mean L1 error (mm).
    pub fn curve_text(&self, model: &ModelScores) -> String {
        let mut s = format!("# config_hash {}\n# frame l1_mm\n", self.config_hash);
        for (t, v) in model.curve.iter().enumerate() {
            let _ = writeln!(s, "{t} {v}");
        }
        s
    }

    /// Writes `<stem>.txt`, `<stem>.tsv` and one `curve_<model>.txt` per
    /// model into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: String, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put(format!("{stem}.txt"), self.to_text())?;
        put(format!("{stem}.tsv"), self.to_table())?;
        for m in &self.models {
            put(format!("curve_{}.txt", m.name), self.curve_text(m))?;
        }
        Ok(())
    }
}
