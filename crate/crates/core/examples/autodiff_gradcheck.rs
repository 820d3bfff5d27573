//! Builds a small two-layer classifier on the autodiff graph, takes its
//! gradients, and compares them with central finite differences.
//!
//! cargo run --example autodiff_gradcheck

use msqg::numerics::gradcheck::check_gradients;
use msqg::numerics::{Graph, ParamId, Tensor};

fn main() -> msqg::Result<()> {
    let x = Tensor::new(
        vec![3, 4],
        vec![0.5, -1.0, 0.25, 2.0, 1.5, 0.0, -0.5, 1.0, -2.0, 0.75, 1.25, -0.25],
    )?;
    let w1 = Tensor::new(
        vec![4, 5],
        (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect(),
    )?;
    let w2 = Tensor::new(vec![5, 3], (0..15).map(|i| ((i * 5 % 7) as f64 - 3.0) / 6.0).collect())?;
    let targets = [0, 2, 1];
    let params = vec![x, w1, w2];

    let mut g = Graph::new();
    let ids: Vec<_> = params
        .iter()
        .enumerate()
        .map(|(i, p)| g.param(ParamId(i), p))
        .collect::<Result<_, _>>()?;
    let h = g.matmul(ids[0], ids[1])?;
    let h = g.tanh(h)?;
    let logits = g.matmul(h, ids[2])?;
    let loss = g.cross_entropy(logits, &targets)?;
    println!("loss {:.6}", g.value(loss).data()[0]);
    let grads = g.backward(loss)?;
    for (id, grad) in grads.iter() {
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("param {} gradient norm {norm:.6}", id.0);
    }

    let report = check_gradients(&params, 1e-4, |g, p| {
        let h = g.matmul(p[0], p[1])?;
        let h = g.tanh(h)?;
        let logits = g.matmul(h, p[2])?;
        g.cross_entropy(logits, &targets)
    })?;
    println!(
        "finite differences over {} elements: max relative error {:.2e}, max absolute error {:.2e}",
        report.checked, report.max_rel_error, report.max_abs_error
    );
    Ok(())
}
