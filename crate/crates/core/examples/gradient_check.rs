//! Finite-difference check of the spiral convolution and LSTM gradients.

use spiralface::autodiff::{check_gradients, GradCheckConfig, Tensor};
use spiralface::layers::{batched_spiral_indices, init_lstm, init_spiral_conv, lstm_step, spiral_conv, uniform_tensor, LstmVars};
use spiralface::mesh::primitives::icosphere;
use spiralface::spiral::{build_spiral_table, default_length, ReferenceVertex};

fn main() -> spiralface::Result<()> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mesh = icosphere(1, 1.0);
    let len = default_length(&mesh)?;
    let table = build_spiral_table(&mesh, 1, len, ReferenceVertex::MaxZ)?;
    let idx = batched_spiral_indices(&table, 1);
    let x: Tensor<f64> = uniform_tensor(&mut rng, &[mesh.num_vertices(), 4], 1.0);
    let (w, b) = init_spiral_conv::<f64, _>(&mut rng, len, 4, 3);
    let report = check_gradients(&[x, w, b], &GradCheckConfig::default(), |g, v| {
        let y = spiral_conv(g, v[0], &idx, len, v[1], v[2])?;
        let y = g.tanh(y);
        Ok(g.mean(y))
    })?;
    println!("spiral_conv: max relative error {:.2e} over {} entries", report.max_rel_error, report.checked);

    let (w_ih, w_hh, bias) = init_lstm::<f64, _>(&mut rng, 6, 8);
    let inputs: Tensor<f64> = uniform_tensor(&mut rng, &[3, 6], 1.0);
    let report = check_gradients(&[w_ih, w_hh, bias, inputs], &GradCheckConfig::default(), |g, v| {
        let p = LstmVars { w_ih: v[0], w_hh: v[1], b: v[2] };
        let (mut h, mut c) = (g.input(Tensor::zeros(&[1, 8])), g.input(Tensor::zeros(&[1, 8])));
        for t in 0..3 {
            let x = g.slice_rows(v[3], t, 1)?;
            (h, c) = lstm_step(g, x, h, c, &p)?;
        }
        Ok(g.mean(h))
    })?;
    println!("lstm (3 steps): max relative error {:.2e}", report.max_rel_error);
    Ok(())
}
