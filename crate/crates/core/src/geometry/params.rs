use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: dimension, power, soliton parameter and the derived
/// spectral shift and critical exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    pub lambda: f64,
    /// `lambda + ((d - 1) / 2)^2`, the bottom of the continuous spectrum.
    pub mu: f64,
    /// Mass-critical power `4 / d`.
    pub p_crit_mass: f64,
    /// Energy-critical power `4 / (d - 2)`, infinite for `d = 2`.
    pub p_crit_energy: f64,
    /// `(2d + 4) / d`.
    pub d_star: f64,
}

impl ModelParams {
    pub fn new(d: usize, p: f64, lambda: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("d", format!("dimension must be >= 2, got {d}")));
        }
        let df = d as f64;
        let p_crit_energy = if d == 2 { f64::INFINITY } else { 4.0 / (df - 2.0) };
        if !(p > 0.0 && p < p_crit_energy) {
            return Err(Error::invalid(
                "p",
                format!("need 0 < p < {p_crit_energy} (energy-subcritical), got {p}"),
            ));
        }
        let shift = spectral_shift(d);
        let mu = lambda + shift;
        if !(mu > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(
                "lambda",
                format!("need lambda > -{shift} so that mu > 0, got {lambda}"),
            ));
        }
        Ok(ModelParams {
            d,
            p,
            lambda,
            mu,
            p_crit_mass: 4.0 / df,
            p_crit_energy,
            d_star: (2.0 * df + 4.0) / df,
        })
    }

    /// Same dimension and power at another soliton parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        ModelParams::new(self.d, self.p, lambda)
    }

    pub fn is_mass_subcritical(&self) -> bool {
        self.p < self.p_crit_mass
    }

    /// `((d - 1) / 2)^2`.
    pub fn spectral_shift(&self) -> f64 {
        spectral_shift(self.d)
    }
}

/// `((d - 1) / 2)^2`, the gap between `-Δ` on hyperbolic space and zero.
pub fn spectral_shift(d: usize) -> f64 {
    let h = (d as f64 - 1.0) / 2.0;
    h * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let m = ModelParams::new(3, 2.0, 1.0).unwrap();
        assert_eq!(m.mu, 2.0);
        assert_eq!(m.p_crit_mass, 4.0 / 3.0);
        assert_eq!(m.p_crit_energy, 4.0);
        assert_eq!(m.d_star, 10.0 / 3.0);
        let m2 = ModelParams::new(2, 7.0, 0.0).unwrap();
        assert!(m2.p_crit_energy.is_infinite());
        assert_eq!(m2.mu, 0.25);
    }

    #[test]
    fn extended_lambda_range() {
        assert!(ModelParams::new(4, 1.0, -2.2).is_ok());
        assert!(ModelParams::new(4, 1.0, -2.25).is_err());
        assert!(ModelParams::new(4, 2.0, 1.0).is_err());
        assert!(ModelParams::new(1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1.0).is_err());
    }
}
