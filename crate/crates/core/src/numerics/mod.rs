//! Dense tensors, reverse-mode autodiff, and the Adam optimizer.

mod adam;
pub mod gradcheck;
mod graph;
pub mod kernels;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use graph::{Axis, Gradients, Graph, NodeId, OpKind, ParamId};
pub(crate) use tensor::softmax_f64;
pub use tensor::{softmax, Real, Tensor};

#[cfg(test)]
mod tests {
    use super::gradcheck::check_gradients;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-3;
    const TOL: f64 = 1e-3;

    /// Random tensor whose entries keep away from zero (ReLU kink).
    fn rand_t(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
        let data = (0..r * c)
            .map(|_| {
                let x: f64 = rng.gen_range(0.1..1.0);
                if rng.gen_bool(0.5) {
                    x
                } else {
                    -x
                }
            })
            .collect();
        Tensor::new(vec![r, c], data).unwrap()
    }

    fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
        (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=8))
    }

    /// Reduces any node to a scalar through a fixed random weighting so that
    /// every output element gets a distinct upstream gradient.
    fn weighted_sum<'p>(g: &mut Graph<'p, f64>, x: NodeId, seed: u64) -> NodeId {
        let shape = g.value(x).shape().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Tensor::new(
            shape.clone(),
            (0..shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let wn = g.input(w).unwrap();
        let prod = g.mul(x, wn).unwrap();
        g.sum(prod).unwrap()
    }

    fn run_op_check(
        name: &str,
        make: impl Fn(
            &mut ChaCha8Rng,
        ) -> (
            Vec<Tensor<f64>>,
            Box<dyn Fn(&mut Graph<'_, f64>, &[NodeId]) -> crate::Result<NodeId>>,
        ),
    ) {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + 1);
            let (params, f) = make(&mut rng);
            let rep = check_gradients(&params, H, |g, ids| f(g, ids)).unwrap();
            assert!(
                rep.max_rel_error <= TOL,
                "{name} seed {seed}: max rel err {}",
                rep.max_rel_error
            );
        }
    }

    #[test]
    fn gradcheck_matmul() {
        run_op_check("matmul", |rng| {
            let (m, k, n) = dims(rng);
            (
                vec![rand_t(rng, m, k), rand_t(rng, k, n)],
                Box::new(|g, ids| {
                    let y = g.matmul(ids[0], ids[1])?;
                    Ok(weighted_sum(g, y, 1))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_add_with_broadcast() {
        run_op_check("add", |rng| {
            let (m, n, _) = dims(rng);
            (
                vec![rand_t(rng, m, n), rand_t(rng, 1, n), rand_t(rng, m, n)],
                Box::new(|g, ids| {
                    let y = g.add(ids[0], ids[1])?;
                    let y = g.add(y, ids[2])?;
                    Ok(weighted_sum(g, y, 2))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_mul_and_scale() {
        run_op_check("mul", |rng| {
            let (m, n, _) = dims(rng);
            (
                vec![rand_t(rng, m, n), rand_t(rng, m, n)],
                Box::new(|g, ids| {
                    let y = g.mul(ids[0], ids[1])?;
                    let y = g.scale(y, -1.7)?;
                    Ok(weighted_sum(g, y, 3))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_concat_and_slice() {
        run_op_check("concat/slice", |rng| {
            let (m, a, b) = dims(rng);
            (
                vec![rand_t(rng, m, a), rand_t(rng, m, b), rand_t(rng, 2, a + b)],
                Box::new(move |g, ids| {
                    let c = g.concat(&ids[..2], Axis::Cols)?;
                    let r = g.concat(&[c, ids[2]], Axis::Rows)?;
                    let s = g.slice(r, Axis::Cols, 1.min(a + b - 1), (a + b - 1).max(1))?;
                    let s = g.slice(s, Axis::Rows, 1, m + 1)?;
                    Ok(weighted_sum(g, s, 4))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_transpose_mean() {
        run_op_check("transpose/mean", |rng| {
            let (m, n, _) = dims(rng);
            (
                vec![rand_t(rng, m, n), rand_t(rng, n, m)],
                Box::new(|g, ids| {
                    let t = g.transpose(ids[0])?;
                    let p = g.mul(t, ids[1])?;
                    let p = g.mul(p, p)?;
                    g.mean(p)
                }),
            )
        });
    }

    #[test]
    fn gradcheck_activations() {
        run_op_check("tanh/sigmoid/relu", |rng| {
            let (m, n, _) = dims(rng);
            (
                vec![rand_t(rng, m, n)],
                Box::new(|g, ids| {
                    let a = g.tanh(ids[0])?;
                    let b = g.sigmoid(ids[0])?;
                    let c = g.relu(ids[0])?;
                    let ab = g.add(a, b)?;
                    let abc = g.mul(ab, c)?;
                    let y = g.add(abc, c)?;
                    Ok(weighted_sum(g, y, 5))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_softmax() {
        run_op_check("softmax", |rng| {
            let (m, n, _) = dims(rng);
            (
                vec![rand_t(rng, m, n)],
                Box::new(|g, ids| {
                    let y = g.softmax(ids[0])?;
                    Ok(weighted_sum(g, y, 6))
                }),
            )
        });
    }

    #[test]
    fn gradcheck_embedding_cross_entropy() {
        run_op_check("embedding/cross_entropy", |rng| {
            let (v, d, t) = dims(rng);
            let ids: Vec<usize> = (0..t).map(|_| rng.gen_range(0..v)).collect();
            let targets: Vec<usize> = (0..t).map(|_| rng.gen_range(0..d)).collect();
            (
                vec![rand_t(rng, v, d)],
                Box::new(move |g, p| {
                    let e = g.embedding(p[0], &ids)?;
                    g.cross_entropy(e, &targets)
                }),
            )
        });
    }

    #[test]
    fn gradcheck_three_layer_net() {
        run_op_check("mlp", |rng| {
            let (n, d, h) = dims(rng);
            let classes = rng.gen_range(2..=8);
            let targets: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
            (
                vec![
                    rand_t(rng, n, d),
                    rand_t(rng, d, h),
                    rand_t(rng, 1, h),
                    rand_t(rng, h, h),
                    rand_t(rng, 1, h),
                    rand_t(rng, h, classes),
                ],
                Box::new(move |g, p| {
                    let x = g.matmul(p[0], p[1])?;
                    let x = g.add(x, p[2])?;
                    let x = g.tanh(x)?;
                    let x = g.matmul(x, p[3])?;
                    let x = g.add(x, p[4])?;
                    let x = g.sigmoid(x)?;
                    let x = g.matmul(x, p[5])?;
                    g.cross_entropy(x, &targets)
                }),
            )
        });
    }

    #[test]
    fn backward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_t(&mut rng, 4, 5).cast::<f32>();
        let b = rand_t(&mut rng, 5, 3).cast::<f32>();
        let run = || {
            let mut g = Graph::new();
            let an = g.param(ParamId(0), &a).unwrap();
            let bn = g.param(ParamId(1), &b).unwrap();
            let y = g.matmul(an, bn).unwrap();
            let y = g.softmax(y).unwrap();
            let y = g.mean(y).unwrap();
            let grads = g.backward(y).unwrap();
            grads.get(ParamId(0)).unwrap().to_vec()
        };
        let (x, y) = (run(), run());
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
