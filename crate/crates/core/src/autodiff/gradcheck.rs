//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of [`check_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
    /// Entries left out because `x - h` and `x + h` fall on different sides
    /// of a ReLU or L1 kink, where central differences do not estimate the
    /// derivative.
    pub kinks: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    /// Entries per parameter tensor to probe; larger tensors are sampled.
    pub max_entries: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            floor: 1e-6,
            max_entries: 64,
            seed: 0,
        }
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the reverse-mode gradient of the scalar built by `f` against
/// central differences, one parameter entry at a time.
pub fn check_gradients<F>(params: &[Tensor<f64>], cfg: &GradCheckConfig, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor<f64>]| -> Result<(f64, Vec<bool>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out);
        if v.len() != 1 {
            return Err(Error::Shape("gradient check needs a scalar output".into()));
        }
        Ok((v.data()[0], g.kink_pattern()))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let pattern = g.kink_pattern();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = params.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
        kinks: 0,
    };
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[pi], p);
        let idx: Vec<usize> = if p.len() <= cfg.max_entries {
            (0..p.len()).collect()
        } else {
            let mut s = sample(&mut rng, p.len(), cfg.max_entries).into_vec();
            s.sort_unstable();
            s
        };
        for j in idx {
            let x0 = p.data()[j];
            probe[pi].data_mut()[j] = x0 + cfg.h;
            let (fp, pp) = eval(&probe)?;
            probe[pi].data_mut()[j] = x0 - cfg.h;
            let (fm, pm) = eval(&probe)?;
            probe[pi].data_mut()[j] = x0;
            if pp != pattern || pm != pattern {
                report.kinks += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * cfg.h);
            let err = relative_error(analytic.data()[j], numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = err;
                report.worst = (pi, j);
            }
        }
    }
    Ok(report)
}
