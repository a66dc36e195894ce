//! Nonlinear terms in conjugated coordinates.
//!
//! A hyperbolic nonlinearity `f(r, |R|) R` becomes
//! `f̃(r, s) = phi^{-1} f(r, phi s) (phi s)` for the conjugated amplitude
//! `s = |u|`, `R = phi u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ln_r_over_sinh, GeometryTables, ModelParams};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `|R|^p R`.
    Power { p: f64 },
    /// `g(r) |R|^p R` with `g = (sinh r / r)^{gamma (d-1)/2}`, `gamma < p`.
    WeightedPower { p: f64, gamma: f64 },
    /// `f(|R|) R` with `f(a) = a^p / (1 + a^{p-q})`: like `a^p` for small
    /// amplitudes and `a^q` for large ones.
    Saturated { p: f64, q: f64 },
}

fn default_coupling() -> f64 {
    1.0
}

/// A nonlinearity with a sign/strength. `coupling = 1` is focusing,
/// `-1` defocusing, `0` switches the term off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub kind: NonlinearityKind,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

impl NonlinearitySpec {
    pub fn power(p: f64) -> Self {
        NonlinearitySpec {
            kind: NonlinearityKind::Power { p },
            coupling: 1.0,
        }
    }

    pub fn weighted_power(p: f64, gamma: f64) -> Self {
        NonlinearitySpec {
            kind: NonlinearityKind::WeightedPower { p, gamma },
            coupling: 1.0,
        }
    }

    pub fn saturated(p: f64, q: f64) -> Self {
        NonlinearitySpec {
            kind: NonlinearityKind::Saturated { p, q },
            coupling: 1.0,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn zeroed(self) -> Self {
        self.with_coupling(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coupling == 0.0
    }

    /// True when `f̃(t s) = t^{p+1} f̃(s)`.
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::Saturated { .. })
    }

    /// The exponent the model parameters carry: `p` for the power kinds,
    /// the large-amplitude exponent `q` for the saturated kind.
    pub fn model_power(&self) -> f64 {
        match self.kind {
            NonlinearityKind::Power { p } | NonlinearityKind::WeightedPower { p, .. } => p,
            NonlinearityKind::Saturated { q, .. } => q,
        }
    }

    /// Model parameters matching this nonlinearity.
    pub fn model_params(&self, d: usize, lambda: f64) -> Result<ModelParams> {
        self.validate(d)?;
        ModelParams::new(d, self.model_power(), lambda)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !self.coupling.is_finite() {
            return Err(Error::invalid("coupling", "must be finite"));
        }
        let df = d as f64;
        let p_energy = if d <= 2 { f64::INFINITY } else { 4.0 / (df - 2.0) };
        match self.kind {
            NonlinearityKind::Power { p } => {
                if !(p > 0.0 && p < p_energy) {
                    return Err(Error::invalid("p", format!("need 0 < p < {p_energy}, got {p}")));
                }
            }
            NonlinearityKind::WeightedPower { p, gamma } => {
                if !(p > 0.0 && p < p_energy) {
                    return Err(Error::invalid("p", format!("need 0 < p < {p_energy}, got {p}")));
                }
                if !(gamma < p) || !gamma.is_finite() {
                    return Err(Error::invalid(
                        "gamma",
                        format!("weight must grow slower than the decay of phi^p: need gamma < p = {p}, got {gamma}"),
                    ));
                }
            }
            NonlinearityKind::Saturated { p, q } => {
                if !(p > 2.0 + 4.0 / df && p.is_finite()) {
                    return Err(Error::invalid(
                        "p",
                        format!("saturated kind needs p > 2 + 4/d, got {p}"),
                    ));
                }
                if !(q > 0.0 && q < 4.0 / df) {
                    return Err(Error::invalid(
                        "q",
                        format!("saturated kind needs 0 < q < 4/d, got {q}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Per-node coefficients on a grid.
    pub fn on_grid(&self, tables: &GeometryTables) -> NodalNonlinearity {
        let d = tables.params.d;
        let half = 0.5 * (d as f64 - 1.0);
        let coef = tables
            .r
            .iter()
            .zip(&tables.phi)
            .map(|(&r, &phi)| match self.kind {
                NonlinearityKind::Power { p } => (half * p * ln_r_over_sinh(r)).exp(),
                NonlinearityKind::WeightedPower { p, gamma } => (half * (p - gamma) * ln_r_over_sinh(r)).exp(),
                NonlinearityKind::Saturated { .. } => phi,
            })
            .collect();
        NodalNonlinearity { spec: *self, coef }
    }
}

/// Saturation profile `a^p / (1 + a^{p-q})` and its companions, evaluated
/// without overflow for large `a`.
fn sat_g(a: f64, p: f64, q: f64) -> f64 {
    if a <= 1.0 {
        a.powf(p) / (1.0 + a.powf(p - q))
    } else {
        a.powf(q) / (a.powf(q - p) + 1.0)
    }
}

/// `d/da [a g(a)]`.
fn sat_dg(a: f64, p: f64, q: f64) -> f64 {
    if a <= 1.0 {
        let b = a.powf(p - q);
        a.powf(p) * ((1.0 + p) + (1.0 + q) * b) / ((1.0 + b) * (1.0 + b))
    } else {
        let ib = a.powf(q - p);
        a.powf(q) * ((1.0 + p) * ib + (1.0 + q)) / ((1.0 + ib) * (1.0 + ib))
    }
}

/// `∫_0^a g(t) t dt`.
fn sat_antiderivative(a: f64, p: f64, q: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let (v, _) = integrate(|t| sat_g(t, p, q) * t, 0.0, a, 1e-300, 1e-14);
    v
}

/// `s^p`, exact and fast for small integer powers.
fn pow(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        s
    } else if p == 2.0 {
        s * s
    } else {
        s.powf(p)
    }
}

/// A nonlinearity resolved onto the nodes of a grid. For the power kinds
/// `coef[i]` is the full radial weight (`K̃` or `g K̃`); for the saturated
/// kind it is `phi`.
#[derive(Debug, Clone)]
pub struct NodalNonlinearity {
    pub spec: NonlinearitySpec,
    pub coef: Vec<f64>,
}

impl NodalNonlinearity {
    /// `f̃(r_i, s) / s`, the multiplier of `u` (`β(R²)` with `β(s²) = s^p`).
    pub fn beta(&self, i: usize, s: f64) -> f64 {
        let s = s.abs();
        let c = self.spec.coupling;
        match self.spec.kind {
            NonlinearityKind::Power { p } | NonlinearityKind::WeightedPower { p, .. } => c * self.coef[i] * pow(s, p),
            NonlinearityKind::Saturated { p, q } => c * sat_g(self.coef[i] * s, p, q),
        }
    }

    /// `f̃(r_i, s)`.
    pub fn f(&self, i: usize, s: f64) -> f64 {
        self.beta(i, s) * s
    }

    /// `∂_s f̃(r_i, s)`.
    pub fn df(&self, i: usize, s: f64) -> f64 {
        let a = s.abs();
        let c = self.spec.coupling;
        match self.spec.kind {
            NonlinearityKind::Power { p } | NonlinearityKind::WeightedPower { p, .. } => {
                c * (p + 1.0) * self.coef[i] * pow(a, p)
            }
            NonlinearityKind::Saturated { p, q } => c * sat_dg(self.coef[i] * a, p, q),
        }
    }

    /// `F̃(r_i, s) = ∫_0^s f̃(r_i, t) dt`.
    pub fn big_f(&self, i: usize, s: f64) -> f64 {
        let a = s.abs();
        let c = self.spec.coupling;
        if c == 0.0 {
            return 0.0;
        }
        match self.spec.kind {
            NonlinearityKind::Power { p } | NonlinearityKind::WeightedPower { p, .. } => {
                c * self.coef[i] * a.powf(p + 2.0) / (p + 2.0)
            }
            NonlinearityKind::Saturated { p, q } => {
                let phi = self.coef[i];
                c * sat_antiderivative(phi * a, p, q) / (phi * phi)
            }
        }
    }

    /// `f̃(u_i)` at every node for a real field.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &s)| self.f(i, s.abs()) * s.signum())
            .collect()
    }

    /// `Σ w_i F̃(r_i, |u_i|)`.
    pub fn potential_energy(&self, weights: &[f64], amplitudes: impl Iterator<Item = f64>) -> f64 {
        amplitudes
            .zip(weights)
            .enumerate()
            .map(|(i, (a, w))| w * self.big_f(i, a))
            .sum()
    }
}

/// Scalar evaluation of `f̃(r, s)`.
pub fn eval_f_conjugated(spec: &NonlinearitySpec, r: f64, s: f64, params: &ModelParams) -> Result<f64> {
    let nodal = scalar_nodal(spec, r, s, params)?;
    Ok(nodal.f(0, s))
}

/// Scalar evaluation of `F̃(r, s)`.
pub fn eval_big_f_conjugated(spec: &NonlinearitySpec, r: f64, s: f64, params: &ModelParams) -> Result<f64> {
    let nodal = scalar_nodal(spec, r, s, params)?;
    Ok(nodal.big_f(0, s))
}

fn scalar_nodal(spec: &NonlinearitySpec, r: f64, s: f64, params: &ModelParams) -> Result<NodalNonlinearity> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("amplitude must be nonnegative, got {s}")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    let half = 0.5 * (params.d as f64 - 1.0);
    let l = ln_r_over_sinh(r);
    let coef = match spec.kind {
        NonlinearityKind::Power { p } => (half * p * l).exp(),
        NonlinearityKind::WeightedPower { p, gamma } => (half * (p - gamma) * l).exp(),
        NonlinearityKind::Saturated { .. } => (half * l).exp(),
    };
    Ok(NodalNonlinearity {
        spec: *spec,
        coef: vec![coef],
    })
}
