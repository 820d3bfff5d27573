use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Simple linear regression `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci_95: (f64, f64),
    pub slope_p: f64,
    pub intercept_p: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn slope_ci_contains_zero(&self) -> bool {
        self.slope_ci_95.0 <= 0.0 && 0.0 <= self.slope_ci_95.1
    }
}

fn two_sided_p(t_dist: &StudentsT, estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        2.0 * (1.0 - t_dist.cdf((estimate / se).abs()))
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Closed-form least squares with a t-based 95% interval on the slope
/// (`n − 2` degrees of freedom).
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::shape(
            "ols_fit",
            format!("{n} predictors, {} responses", y.len()),
        ));
    }
    if n < 3 {
        return Err(Error::invalid("regression needs at least three points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression inputs must be finite"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateDistribution("predictor has zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = ssr / (nf - 2.0);
    let se_slope = (s2 / sxx).sqrt();
    let se_int = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    let t_dist = StudentsT::new(0.0, 1.0, nf - 2.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let t = t_dist.inverse_cdf(0.975);
    Ok(OlsFit {
        slope,
        intercept,
        slope_ci_95: (slope - t * se_slope, slope + t * se_slope),
        slope_p: two_sided_p(&t_dist, slope, se_slope),
        intercept_p: two_sided_p(&t_dist, intercept, se_int),
        n,
    })
}

/// Turns per-example attention traces into regression points: one point
/// per (example, source position), `x` = position and `y` = the weight on
/// that position averaged over decoding steps.
pub fn pool_attention(traces: &[Vec<Vec<f64>>]) -> (Vec<f64>, Vec<f64>) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for steps in traces {
        let Some(width) = steps.first().map(Vec::len) else {
            continue;
        };
        for pos in 0..width {
            let mean = steps.iter().map(|s| s[pos]).sum::<f64>() / steps.len() as f64;
            xs.push(pos as f64);
            ys.push(mean);
        }
    }
    (xs, ys)
}
