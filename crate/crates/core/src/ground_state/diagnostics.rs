use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{spectral_shift, RadialField};

use super::flow::GroundStateSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted exponential rate of the conjugated profile.
    pub rate: f64,
    pub window: (f64, f64),
    /// `rate²`, the fitted value of `mu` seen by the far field.
    pub c2_fit: f64,
    /// `√mu` for the multiplier of the solution.
    pub expected: f64,
    pub relative_error: f64,
}

/// Least-squares slope of `log(r^{(d-1)/2} u)` on the tail window.
///
/// The far field of `-u'' - ((d-1)/r) u' + mu u = 0` is
/// `r^{-(d-1)/2} e^{-√mu r}` up to `O(1/r)`, so removing the algebraic
/// factor leaves a straight line of slope `-√mu`. The window runs from
/// where `u` first drops below `1e-3 max u` to where it drops below
/// `1e-9 max u`, and stops four decay lengths short of the wall.
pub fn decay_diagnostics(sol: &GroundStateSolution) -> Result<DecayFit> {
    let mu = sol.lambda_out + spectral_shift(sol.params.d);
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "multiplier gives mu = {mu} <= 0; no exponential tail"
        )));
    }
    fit_decay(&sol.u, sol.params.d, mu.sqrt())
}

pub fn fit_decay(u: &RadialField, d: usize, expected: f64) -> Result<DecayFit> {
    let grid = u.grid;
    let vals = &u.values;
    let peak = u.max_abs();
    if peak == 0.0 {
        return Err(Error::Domain("zero profile has no tail".into()));
    }
    let start = vals.iter().position(|v| v.abs() < 1e-3 * peak);
    let wall = grid.r_max - 4.0 / expected;
    let Some(start) = start else {
        return Err(Error::Domain(
            "profile never drops below 1e-3 of its peak; box too small".into(),
        ));
    };
    let mut end = vals.iter().position(|v| v.abs() < 1e-9 * peak).unwrap_or(grid.n);
    while end > start && grid.node(end - 1) > wall {
        end -= 1;
    }
    if end < start + 10 || grid.node(end - 1) - grid.node(start) < 1.0 / expected {
        return Err(Error::Domain("tail window too short for a decay fit".into()));
    }
    let half = 0.5 * (d as f64 - 1.0);
    let pts: Vec<(f64, f64)> = (start..end)
        .filter(|&i| vals[i] > 0.0)
        .map(|i| {
            let r = grid.node(i);
            (r, vals[i].ln() + half * r.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    Ok(DecayFit {
        rate,
        window: (grid.node(start), grid.node(end - 1)),
        c2_fit: rate * rate,
        expected,
        relative_error: (rate - expected).abs() / expected,
    })
}

/// Positive at every node and nonincreasing in `r`.
pub fn is_positive_nonincreasing(values: &[f64]) -> bool {
    values.iter().all(|&v| v > 0.0) && values.windows(2).all(|w| w[1] <= w[0])
}

/// Relative L∞ distance `max|a - b| / max|b|`.
pub fn relative_linf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
