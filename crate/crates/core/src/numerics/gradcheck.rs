//! Central finite-difference gradient checking.

use super::graph::{Graph, NodeId, ParamId};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Error of analytic `a` against numeric `n`, relative to the larger
/// magnitude with an absolute floor of `1e-2` for near-zero gradients.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-2)
}

/// Compares `backward` against central differences of step `h` for every
/// element of every parameter. `build` must construct a scalar loss from the
/// parameter nodes it is handed (in `params` order).
pub fn check_gradients<F>(params: &[Tensor<f64>], h: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_, f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let ids = ps
            .iter()
            .enumerate()
            .map(|(i, p)| g.param(ParamId(i), p))
            .collect::<Result<Vec<_>>>()?;
        let root = build(&mut g, &ids)?;
        Ok(g.value(root).data()[0])
    };

    let analytic = {
        let mut g = Graph::new();
        let ids = params
            .iter()
            .enumerate()
            .map(|(i, p)| g.param(ParamId(i), p))
            .collect::<Result<Vec<_>>>()?;
        let root = build(&mut g, &ids)?;
        g.backward(root)?
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    for pi in 0..params.len() {
        let grad = analytic.get(ParamId(pi)).map(|g| g.to_vec());
        for j in 0..params[pi].numel() {
            let base = params[pi].data()[j];
            let mut d = params[pi].data().to_vec();
            d[j] = base + h;
            work[pi].set_data(d.clone())?;
            let up = eval(&work)?;
            d[j] = base - h;
            work[pi].set_data(d.clone())?;
            let down = eval(&work)?;
            d[j] = base;
            work[pi].set_data(d)?;

            let numeric = (up - down) / (2.0 * h);
            let a = grad.as_ref().map_or(0.0, |g| g[j]);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}
