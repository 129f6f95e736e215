//! Network building blocks recorded on an autodiff [`Graph`].
//!
//! Feature matrices hold one vertex (or one sample) per row. Layers that act
//! on meshes accept `batch` stacked copies of an `N`-row block so that all
//! frames of a sequence go through the decoder in a single pass.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::autodiff::{Graph, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::sampling::SparseMatrix;
use crate::spiral::{SpiralTable, PAD};

/// Spiral table indices repeated for `batch` stacked blocks; block `b`
/// addresses rows `b * N .. (b + 1) * N`. PAD stays PAD.
pub fn batched_spiral_indices(table: &SpiralTable, batch: usize) -> Arc<Vec<i64>> {
    let n = table.num_vertices() as i64;
    let mut out = Vec::with_capacity(table.indices.len() * batch);
    for b in 0..batch as i64 {
        out.extend(table.indices.iter().map(|&i| if i == PAD { PAD } else { i + b * n }));
    }
    Arc::new(out)
}

/// Spiral convolution: every output row is `sum_j x[S_j(v)] W_j + b`, with
/// `W` stored as `(L * d_in) x d_out` (the `W_j` stacked vertically).
///
/// `idx` comes from [`batched_spiral_indices`] and `length` is the spiral
/// length `L`.
pub fn spiral_conv<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    idx: &Arc<Vec<i64>>,
    length: usize,
    w: Var,
    b: Var,
) -> Result<Var> {
    let (rows, d_in) = (g.value(x).rows(), g.value(x).cols());
    if length == 0 || idx.len() % length != 0 || idx.len() / length != rows {
        return Err(Error::Shape(format!(
            "spiral table of {} entries (L = {length}) for {rows} feature rows",
            idx.len()
        )));
    }
    if g.value(w).rows() != length * d_in {
        return Err(Error::Shape(format!(
            "spiral weights have {} rows, expected L * d_in = {}",
            g.value(w).rows(),
            length * d_in
        )));
    }
    g.spiral_conv(x, idx.clone(), length, w, b)
}

/// Barycentric unpooling of `batch` stacked blocks.
pub fn unpool<T: Real>(g: &mut Graph<T>, x: Var, q: &Arc<SparseMatrix>, batch: usize) -> Result<Var> {
    g.sparse_matmul(x, q.clone(), batch)
}

/// Affine map `x W + b` with `W` of shape `d_in x d_out`.
pub fn dense<T: Real>(g: &mut Graph<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

/// LSTM weights on the graph. Gate blocks are ordered input, forget, cell,
/// output along the `4h` axis.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    /// `4h x d_in`
    pub w_ih: Var,
    /// `4h x h`
    pub w_hh: Var,
    /// `1 x 4h`
    pub b: Var,
}

/// One LSTM step on a batch of rows: returns `(h', c')`.
pub fn lstm_step<T: Real>(g: &mut Graph<T>, x: Var, h: Var, c: Var, p: &LstmVars) -> Result<(Var, Var)> {
    let hidden = g.value(h).cols();
    if g.value(p.w_hh).shape() != [4 * hidden, hidden] {
        return Err(Error::Shape(format!(
            "recurrent weights {:?} for hidden size {hidden}",
            g.value(p.w_hh).shape()
        )));
    }
    let xi = g.matmul_bt(x, p.w_ih)?;
    let hh = g.matmul_bt(h, p.w_hh)?;
    let pre = g.add(xi, hh)?;
    let pre = g.add_row(pre, p.b)?;
    let gate = |g: &mut Graph<T>, k: usize| g.slice_cols(pre, k * hidden, hidden);
    let (zi, zf, zg, zo) = (gate(g, 0)?, gate(g, 1)?, gate(g, 2)?, gate(g, 3)?);
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let tc = g.tanh(c_next);
    let h_next = g.mul(o, tc)?;
    Ok((h_next, c_next))
}

/// Tensor with entries uniform in `[-bound, bound]`.
pub fn uniform_tensor<T: Real, R: Rng>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor<T> {
    let n = shape.iter().product();
    if bound == 0.0 {
        return Tensor::zeros(shape);
    }
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..n).map(|_| T::lit(dist.sample(rng))).collect();
    Tensor::new(shape.to_vec(), data).expect("consistent shape")
}

/// `(W, b)` of a spiral convolution, uniform in `±1/sqrt(L * d_in)`.
pub fn init_spiral_conv<T: Real, R: Rng>(rng: &mut R, length: usize, d_in: usize, d_out: usize) -> (Tensor<T>, Tensor<T>) {
    let bound = 1.0 / ((length * d_in) as f64).sqrt();
    (
        uniform_tensor(rng, &[length * d_in, d_out], bound),
        uniform_tensor(rng, &[1, d_out], bound),
    )
}

/// `(W, b)` of a dense layer, uniform in `±1/sqrt(d_in)`.
pub fn init_dense<T: Real, R: Rng>(rng: &mut R, d_in: usize, d_out: usize) -> (Tensor<T>, Tensor<T>) {
    let bound = 1.0 / (d_in as f64).sqrt();
    (
        uniform_tensor(rng, &[d_in, d_out], bound),
        uniform_tensor(rng, &[1, d_out], bound),
    )
}

/// `(W_ih, W_hh, b)`; weights uniform in `±1/sqrt(fan_in)`, forget-gate bias
/// 1, other biases 0.
pub fn init_lstm<T: Real, R: Rng>(rng: &mut R, d_in: usize, hidden: usize) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let w_ih = uniform_tensor(rng, &[4 * hidden, d_in], 1.0 / (d_in as f64).sqrt());
    let w_hh = uniform_tensor(rng, &[4 * hidden, hidden], 1.0 / (hidden as f64).sqrt());
    let mut b = Tensor::zeros(&[1, 4 * hidden]);
    for v in &mut b.data_mut()[hidden..2 * hidden] {
        *v = T::one();
    }
    (w_ih, w_hh, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradients, GradCheckConfig};
    use crate::mesh::primitives::{fan, icosphere};
    use crate::spiral::{build_spiral_table, ReferenceVertex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn fan_table(length: usize) -> SpiralTable {
        build_spiral_table(&fan(6), 1, length, ReferenceVertex::Index(1)).unwrap()
    }

    /// Per-vertex, per-step loop.
    fn conv_oracle(x: &[f64], d_in: usize, table: &SpiralTable, w: &[f64], b: &[f64], d_out: usize) -> Vec<f64> {
        let n = table.num_vertices();
        let mut out = vec![0.0; n * d_out];
        for v in 0..n {
            for o in 0..d_out {
                let mut acc = b[o];
                for (j, &s) in table.row(v).iter().enumerate() {
                    if s == PAD {
                        continue;
                    }
                    for i in 0..d_in {
                        acc += x[s as usize * d_in + i] * w[(j * d_in + i) * d_out + o];
                    }
                }
                out[v * d_out + o] = acc;
            }
        }
        out
    }

    fn run_conv(x: &Tensor<f64>, table: &SpiralTable, w: &Tensor<f64>, b: &Tensor<f64>, batch: usize) -> Vec<f64> {
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.input(x.clone()), g.input(w.clone()), g.input(b.clone()));
        let idx = batched_spiral_indices(table, batch);
        let y = spiral_conv(&mut g, xv, &idx, table.length, wv, bv).unwrap();
        g.value(y).data().to_vec()
    }

    #[test]
    fn identity_kernel() {
        let t = fan_table(7);
        let x = uniform_tensor::<f64, _>(&mut rng(1), &[7, 2], 1.0);
        let mut w = Tensor::zeros(&[14, 2]);
        w.data_mut()[0] = 1.0;
        w.data_mut()[3] = 1.0;
        let y = run_conv(&x, &t, &w, &Tensor::zeros(&[1, 2]), 1);
        assert_eq!(y, x.data());
    }

    #[test]
    fn fan_center_sums_all_vertices() {
        let t = fan_table(7);
        let x = Tensor::from_f64(&[7, 1], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let y = run_conv(&x, &t, &Tensor::full(&[7, 1], 1.0), &Tensor::zeros(&[1, 1]), 1);
        assert_eq!(y[0], 28.0);
    }

    #[test]
    fn constant_field_scales_by_weight_sum() {
        let mesh = icosphere(1, 1.0);
        let t = build_spiral_table(&mesh, 1, 6, ReferenceVertex::MaxZ).unwrap();
        assert!(t.indices.iter().all(|&i| i != PAD));
        let x = Tensor::full(&[mesh.num_vertices(), 1], 2.0);
        let (w, _) = init_spiral_conv::<f64, _>(&mut rng(3), 6, 1, 1);
        let total: f64 = w.data().iter().sum();
        let y = run_conv(&x, &t, &w, &Tensor::zeros(&[1, 1]), 1);
        for v in y {
            assert!((v - 2.0 * total).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_loop_oracle_batched() {
        let mesh = icosphere(2, 1.0);
        let t = build_spiral_table(&mesh, 2, 12, ReferenceVertex::MaxZ).unwrap();
        let n = mesh.num_vertices();
        let mut r = rng(7);
        let (d_in, d_out, batch) = (3, 4, 2);
        let x = uniform_tensor::<f64, _>(&mut r, &[batch * n, d_in], 1.0);
        let (w, b) = init_spiral_conv::<f64, _>(&mut r, 12, d_in, d_out);
        let y = run_conv(&x, &t, &w, &b, batch);
        for k in 0..batch {
            let block = &x.data()[k * n * d_in..(k + 1) * n * d_in];
            let want = conv_oracle(block, d_in, &t, w.data(), b.data(), d_out);
            for (a, e) in y[k * n * d_out..(k + 1) * n * d_out].iter().zip(&want) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pad_contributes_nothing() {
        let t = fan_table(9);
        let x = uniform_tensor::<f64, _>(&mut rng(2), &[7, 1], 1.0);
        let mut w = uniform_tensor::<f64, _>(&mut rng(5), &[9, 1], 1.0);
        let base = run_conv(&x, &t, &w, &Tensor::zeros(&[1, 1]), 1);
        w.data_mut()[7] = 100.0;
        w.data_mut()[8] = -50.0;
        let again = run_conv(&x, &t, &w, &Tensor::zeros(&[1, 1]), 1);
        assert_eq!(base[0], again[0]);
    }

    #[test]
    fn conv_gradients() {
        let t = fan_table(8);
        let idx = batched_spiral_indices(&t, 2);
        let mut r = rng(11);
        let x = uniform_tensor::<f64, _>(&mut r, &[14, 3], 1.0);
        let (w, b) = init_spiral_conv::<f64, _>(&mut r, 8, 3, 2);
        let target = uniform_tensor::<f64, _>(&mut r, &[14, 2], 1.0);
        let res = check_gradients(&[x, w, b], &GradCheckConfig::default(), |g, v| {
            let y = spiral_conv(g, v[0], &idx, 8, v[1], v[2])?;
            let tv = g.input(target.clone());
            let d = g.sub(y, tv)?;
            let sq = g.mul(d, d)?;
            Ok(g.mean(sq))
        })
        .unwrap();
        assert!(res.max_rel_error < 1e-4, "{res:?}");
    }

    #[test]
    fn unpool_adjoint_is_column_sums() {
        let q = Arc::new(
            SparseMatrix::from_triplets(4, 2, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 0, 0.25), (2, 1, 0.75), (3, 1, 1.0)]).unwrap(),
        );
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::from_f64(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = unpool(&mut g, x, &q, 1).unwrap();
        let m = g.mean(y);
        let grads = g.backward(m).unwrap();
        let cs = q.column_sums();
        let gx = grads.get(x).unwrap().data();
        for (j, s) in cs.iter().enumerate() {
            for c in 0..3 {
                assert!((gx[j * 3 + c] * 12.0 - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_identity_and_bias() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_f64(&[1, 2], &[3.0, -4.0]).unwrap());
        let w = g.input(Tensor::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap());
        let b0 = g.input(Tensor::zeros(&[1, 2]));
        let y = dense(&mut g, x, w, b0).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, -4.0]);
        let z = g.input(Tensor::zeros(&[1, 2]));
        let b = g.input(Tensor::from_f64(&[1, 2], &[0.5, 0.25]).unwrap());
        let y = dense(&mut g, z, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.25]);
    }

    #[test]
    fn lstm_zero_params_give_zero_state() {
        let mut g = Graph::<f64>::new();
        let p = LstmVars {
            w_ih: g.input(Tensor::zeros(&[8, 3])),
            w_hh: g.input(Tensor::zeros(&[8, 2])),
            b: g.input(Tensor::zeros(&[1, 8])),
        };
        let x = g.input(Tensor::from_f64(&[1, 3], &[1.0, -2.0, 5.0]).unwrap());
        let h = g.input(Tensor::zeros(&[1, 2]));
        let c = g.input(Tensor::zeros(&[1, 2]));
        let (h1, c1) = lstm_step(&mut g, x, h, c, &p).unwrap();
        assert_eq!(g.value(h1).data(), &[0.0, 0.0]);
        assert_eq!(g.value(c1).data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_saturated_forget_retains_memory() {
        let mut g = Graph::<f64>::new();
        let mut b = Tensor::zeros(&[1, 4]);
        b.data_mut()[0] = -40.0; // input gate closed
        b.data_mut()[1] = 40.0; // forget gate open
        let p = LstmVars {
            w_ih: g.input(Tensor::zeros(&[4, 1])),
            w_hh: g.input(Tensor::zeros(&[4, 1])),
            b: g.input(b),
        };
        let x = g.input(Tensor::scalar(3.0));
        let h = g.input(Tensor::zeros(&[1, 1]));
        let c = g.input(Tensor::scalar(0.7));
        let (_, c1) = lstm_step(&mut g, x, h, c, &p).unwrap();
        assert!((g.value(c1).data()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn lstm_gradients() {
        let mut r = rng(5);
        let (w_ih, w_hh, b) = init_lstm::<f64, _>(&mut r, 3, 4);
        let x = uniform_tensor::<f64, _>(&mut r, &[2, 3], 1.0);
        let h = uniform_tensor::<f64, _>(&mut r, &[2, 4], 1.0);
        let c = uniform_tensor::<f64, _>(&mut r, &[2, 4], 1.0);
        let res = check_gradients(&[w_ih, w_hh, b, x, h, c], &GradCheckConfig::default(), |g, v| {
            let p = LstmVars { w_ih: v[0], w_hh: v[1], b: v[2] };
            let (h1, c1) = lstm_step(g, v[3], v[4], v[5], &p)?;
            let s = g.mul(h1, c1)?;
            Ok(g.mean(s))
        })
        .unwrap();
        assert!(res.max_rel_error < 1e-4, "{res:?}");
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let (_, _, b) = init_lstm::<f32, _>(&mut rng(0), 6, 3);
        assert_eq!(b.data(), &[0., 0., 0., 1., 1., 1., 0., 0., 0., 0., 0., 0.]);
    }
}
