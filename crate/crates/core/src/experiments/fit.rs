//! Least-squares slope of `log(distance)` against `log(epsilon)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::sweep::{RowFlag, SweepRecord, DEGENERATE_DISTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Rows left out: degenerate, diverged or non-finite.
    pub excluded: usize,
}

/// Fits `log10(distance_l2) = slope * log10(epsilon) + intercept`.
pub fn fit_loglog_slope(records: &[SweepRecord]) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.flag != RowFlag::Diverged)
        .map(|r| (r.epsilon, r.distance_l2))
        .collect();
    let diverged = records.len() - points.len();
    let mut fit = fit_loglog_points(&points)?;
    fit.excluded += diverged;
    Ok(fit)
}

/// As [`fit_loglog_slope`] on raw `(epsilon, distance)` pairs.
pub fn fit_loglog_points(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, d)| *e > 0.0 && e.is_finite() && d.is_finite() && *d >= DEGENERATE_DISTANCE)
        .map(|(e, d)| (e.log10(), d.log10()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints {
            usable: usable.len(),
            excluded,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all perturbation levels are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_points: usable.len(),
        excluded,
    })
}
