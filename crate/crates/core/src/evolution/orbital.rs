use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, RadialField, RadialGrid, SpaceTag};
use crate::ground_state::{GroundStateSolution, Problem};

use super::{evolve, EvolutionState, EvolveOptions, HistoryRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitalOptions {
    pub evolve: EvolveOptions,
    /// Width of the Gaussian perturbation shape.
    pub bump_width: f64,
}

impl Default for OrbitalOptions {
    fn default() -> Self {
        OrbitalOptions {
            evolve: EvolveOptions {
                sample_every: 0.05,
                ..EvolveOptions::default()
            },
            bump_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitalMetric {
    pub epsilon: f64,
    pub lambda: f64,
    /// Phase-minimised H¹ distance of the initial data to the soliton orbit.
    pub delta_in: f64,
    pub sup_distance: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Optimal phase at each sample, in `[0, 2π)`.
    pub gamma_opt: Vec<f64>,
    /// `max |Q(t) - Q(0)| / Q(0)` over the samples.
    pub mass_drift: f64,
    /// `max |E(t) - E(0)| / |E(0)|` over the samples.
    pub energy_drift: f64,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

/// `exp(-r²/(2 w²))`, scaled to unit H¹ norm over hyperbolic space.
pub fn perturbation_bump(grid: &RadialGrid, params: &ModelParams, width: f64) -> Result<RadialField> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid("bump_width", format!("must be positive, got {width}")));
    }
    let pb = Problem::new(
        params,
        &crate::nonlinearity::NonlinearitySpec::power(params.p).zeroed(),
        grid,
    )?;
    let mut b = RadialField::from_fn(*grid, SpaceTag::Euclidean, |r| (-0.5 * (r / width).powi(2)).exp());
    let hb = pb.op.apply_h(&b.values);
    let norm = (pb.dot(&hb, &b.values) + pb.dot(&b.values, &b.values)).sqrt();
    b.values.iter_mut().for_each(|v| *v /= norm);
    Ok(b)
}

/// `inf_γ ‖u - e^{iγ} R‖_{H¹}` over hyperbolic space for real `r_profile`,
/// and the minimising `γ ∈ [0, 2π)`.
pub(crate) fn distance_with(pb: &Problem, m_r: &[f64], r_profile: &[f64], u: &[Complex64]) -> (f64, f64) {
    let w = pb.w();
    let z: Complex64 = u.iter().zip(m_r).zip(w).map(|((a, b), w)| a * (w * b)).sum();
    let gamma = if z.norm() == 0.0 {
        0.0
    } else {
        z.arg().rem_euclid(std::f64::consts::TAU)
    };
    let rot = Complex64::from_polar(1.0, gamma);
    let v: Vec<Complex64> = u.iter().zip(r_profile).map(|(a, r)| a - rot * r).collect();
    let hv = pb.op.apply_h_complex(&v);
    let sq: f64 = v
        .iter()
        .zip(&hv)
        .zip(w)
        .map(|((a, ha), w)| w * ((a.conj() * ha).re + a.norm_sqr()))
        .sum();
    (sq.max(0.0).sqrt(), gamma)
}

/// Phase-minimised H¹ distance from `u` to the orbit of the soliton `sol`.
pub fn orbital_distance(sol: &GroundStateSolution, u: &[Complex64]) -> Result<(f64, f64)> {
    let pb = Problem::new(&sol.params, &sol.spec, &sol.u.grid)?;
    let m_r = h1_operator(&pb, &sol.u.values);
    Ok(distance_with(&pb, &m_r, &sol.u.values, u))
}

fn h1_operator(pb: &Problem, r: &[f64]) -> Vec<f64> {
    pb.op.apply_h(r).iter().zip(r).map(|(a, b)| a + b).collect()
}

/// Perturbs the soliton by `epsilon` times a fixed unit-H¹ bump, evolves
/// to `t_end` and records the phase-minimised H¹ distance to the soliton
/// orbit at each sample.
pub fn orbital_experiment(
    sol: &GroundStateSolution,
    epsilon: f64,
    t_end: f64,
    opts: &OrbitalOptions,
) -> Result<OrbitalMetric> {
    let params = sol.params.with_lambda(sol.lambda_out)?;
    if !params.is_mass_subcritical() {
        return Err(Error::invalid(
            "p",
            format!(
                "the orbital experiment needs p < 4/d = {}, got {}",
                params.p_crit_mass, params.p
            ),
        ));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("must be nonnegative, got {epsilon}")));
    }
    let grid = sol.u.grid;
    let pb = Problem::new(&params, &sol.spec, &grid)?;
    let bump = perturbation_bump(&grid, &params, opts.bump_width)?;
    let values = sol
        .u
        .values
        .iter()
        .zip(&bump.values)
        .map(|(r, b)| Complex64::new(r + epsilon * b, 0.0))
        .collect();
    let u0 = RadialField::new(grid, values, SpaceTag::Euclidean)?;
    let state = EvolutionState::new(u0, &params, &sol.spec)?;
    let m_r = h1_operator(&pb, &sol.u.values);
    let mut times = Vec::new();
    let mut distances = Vec::new();
    let mut gamma_opt = Vec::new();
    let mut observer = |t: f64, u: &[Complex64]| {
        let (d, g) = distance_with(&pb, &m_r, &sol.u.values, u);
        times.push(t);
        distances.push(d);
        gamma_opt.push(g);
        d
    };
    let evolve_opts = EvolveOptions { t_end, ..opts.evolve };
    let end = evolve(state, &params, &sol.spec, &evolve_opts, Some(&mut observer))?;
    let history: Vec<HistoryRow> = end.history.into_iter().collect();
    let (q0, e0) = (history[0].q, history[0].e);
    let mass_drift = history.iter().map(|r| (r.q - q0).abs() / q0).fold(0.0, f64::max);
    let energy_drift = history.iter().map(|r| (r.e - e0).abs() / e0.abs()).fold(0.0, f64::max);
    Ok(OrbitalMetric {
        epsilon,
        lambda: params.lambda,
        delta_in: distances[0],
        sup_distance: distances.iter().copied().fold(0.0, f64::max),
        times,
        distances,
        gamma_opt,
        mass_drift,
        energy_drift,
        history,
    })
}
