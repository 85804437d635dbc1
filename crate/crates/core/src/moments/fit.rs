use crate::numeric::linear_fit;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Least-squares line through `(log2 N, log2 value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fit `value ~ C N^slope` over a scan of at least three parameter values.
pub fn fit_growth_exponent(scan: &[(f64, f64)]) -> Result<ExponentFit> {
    if scan.len() < 3 {
        return Err(Error::Precondition(format!(
            "a growth fit needs at least 3 points, got {}",
            scan.len()
        )));
    }
    for &(n, v) in scan {
        if !(v > 0.0) {
            return Err(Error::NonPositiveMoment { n: n as u64, value: v });
        }
        if !(n > 0.0) {
            return Err(Error::Precondition(format!("scan parameter {n} is not positive")));
        }
    }
    let points: Vec<(f64, f64)> = scan.iter().map(|&(n, v)| (n.log2(), v.log2())).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ExponentFit { slope, intercept, r_squared, points })
}
