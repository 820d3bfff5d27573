use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    /// `U` of the first sample for Mann-Whitney, `D` for Kolmogorov-Smirnov.
    pub statistic: f64,
    /// Standardized statistic (Mann-Whitney only).
    pub z: Option<f64>,
    pub p_two_sided: f64,
    pub n1: usize,
    pub n2: usize,
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("both samples need at least one value"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    Ok(())
}

/// Midranks of the pooled sample (`a` then `b`) and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

fn u_statistic(ranks_a: impl Iterator<Item = f64>, n1: usize) -> f64 {
    ranks_a.sum::<f64>() - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Mann-Whitney U test, normal approximation with tie-corrected variance
/// and continuity correction. When every pooled value is equal the variance
/// vanishes and `p = 1`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let u = u_statistic(ranks[..n1].iter().copied(), n1);
    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let (z, p) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let dev = (u - mean).abs();
        let z = (dev - 0.5).max(0.0) / var.sqrt();
        (z.copysign(u - mean), erfc(z / std::f64::consts::SQRT_2).min(1.0))
    };
    Ok(TestResult {
        statistic: u,
        z: Some(z),
        p_two_sided: p,
        n1,
        n2,
    })
}

/// Largest pooled sample size accepted by [`mann_whitney_exact`].
pub const EXACT_MAX_N: usize = 20;

/// Exact two-sided Mann-Whitney p-value by enumerating every split of the
/// pooled midranks into groups of sizes `n1` and `n2`.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    if n1 + n2 > EXACT_MAX_N {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most {EXACT_MAX_N} pooled values"
        )));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let u_obs = u_statistic(ranks[..n1].iter().copied(), n1);
    let mean = (n1 * n2) as f64 / 2.0;
    let obs_dev = (u_obs - mean).abs();
    let n = n1 + n2;
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let u = u_statistic((0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]), n1);
        total += 1;
        if (u - mean).abs() >= obs_dev - 1e-9 {
            extreme += 1;
        }
    }
    Ok(TestResult {
        statistic: u_obs,
        z: None,
        p_two_sided: extreme as f64 / total as f64,
        n1,
        n2,
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form converges quickly for small λ.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test: `D = sup |F1 − F2|` and the
/// asymptotic p-value at `λ = √(n1·n2 / (n1 + n2)) · D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n1 && j < n2 {
        let v = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(TestResult {
        statistic: d,
        z: None,
        p_two_sided: kolmogorov_survival(ne.sqrt() * d),
        n1,
        n2,
    })
}
