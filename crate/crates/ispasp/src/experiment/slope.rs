//! Log-log power-law slope fitting by ordinary least squares.

use crate::error::{Error, Result};

/// Fitted `ln y = slope * ln x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
    /// Points dropped because x or y was not strictly positive.
    pub n_excluded: usize,
}

/// Least-squares fit of `(ln x, ln y)` over the given points. Non-positive
/// values are excluded (with the count recorded); fewer than 3 surviving
/// points is an error.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n_excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints { have: usable.len() });
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    for &(x, y) in &usable {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
    }
    if var_x == 0.0 {
        return Err(Error::InvalidParameter(
            "all x values coincide; slope is undefined".into(),
        ));
    }
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in &usable {
        let fitted = slope * x + intercept;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_used: usable.len(),
        n_excluded,
    })
}
