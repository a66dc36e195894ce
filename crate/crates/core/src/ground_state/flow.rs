use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometryTables, ModelParams, RadialField, RadialGrid, SpaceTag};
use crate::linalg::Tridiagonal;
use crate::nonlinearity::{NodalNonlinearity, NonlinearityKind, NonlinearitySpec};

use super::diagnostics::{decay_diagnostics, DecayFit};
use super::operator::{assemble_operator, DiscreteRadialOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Target for the weighted L² norm of the stationary defect.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial pseudo-time step; `0.1 / max|c2|` when absent.
    pub tau0: Option<f64>,
    pub tau_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iters: 20_000,
            tau0: None,
            tau_max: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SolveMode {
    /// Minimise the energy on the sphere `Q = mass_target`; `lambda` is
    /// read back as the Lagrange multiplier.
    FixedMass { mass_target: f64 },
    /// Solve the stationary equation at the requested `lambda`.
    FixedLambda,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateSolution {
    pub params: ModelParams,
    pub spec: NonlinearitySpec,
    pub mode: SolveMode,
    #[serde(skip)]
    pub u: RadialField,
    pub mass: f64,
    /// `½⟨Hu, u⟩ - Σ w F̃(u)` with `H = A + (d-1)²/4 + V_d`.
    pub energy: f64,
    /// The multiplier: requested `lambda` in fixed-λ mode, the computed
    /// `(⟨f̃(u), u⟩ - ⟨Hu, u⟩) / Q` in fixed-mass mode.
    pub lambda_out: f64,
    pub residual: f64,
    pub decay: Option<DecayFit>,
    pub iterations: usize,
    pub converged: bool,
    /// Values of the monotone functional at accepted steps (energy in
    /// fixed-mass mode, action in fixed-λ mode).
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Everything a solve needs on one grid.
pub(crate) struct Problem {
    pub tables: GeometryTables,
    pub op: DiscreteRadialOperator,
    pub nl: NodalNonlinearity,
}

impl Problem {
    pub fn new(params: &ModelParams, spec: &NonlinearitySpec, grid: &RadialGrid) -> Result<Self> {
        spec.validate(params.d)?;
        let tables = GeometryTables::new(*grid, *params);
        let nl = spec.on_grid(&tables);
        Ok(Problem {
            op: assemble_operator(grid, params),
            tables,
            nl,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.tables.weights_euc
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.tables.dot(a, b)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.tables.norm(a)
    }

    pub fn potential_energy(&self, u: &[f64]) -> f64 {
        self.nl.potential_energy(self.w(), u.iter().map(|v| v.abs()))
    }

    /// `(H + lambda) u - f̃(u)`.
    pub fn defect(&self, u: &[f64], lambda: f64) -> Vec<f64> {
        let hu = self.op.apply_h(u);
        let fu = self.nl.apply(u);
        hu.iter()
            .zip(&fu)
            .zip(u)
            .map(|((h, f), x)| h + lambda * x - f)
            .collect()
    }

    /// `½⟨Hu, u⟩ - Σ w F̃(u)`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_parts(u).0
    }

    /// The energy and the magnitude of its terms, for relative tests.
    fn energy_parts(&self, u: &[f64]) -> (f64, f64) {
        let kin = 0.5 * self.dot(&self.op.apply_h(u), u);
        let pot = self.potential_energy(u);
        (kin - pot, kin.abs() + pot.abs())
    }

    /// `½⟨Lu, u⟩ - Σ w F̃(u)` with `L = H + lambda`, and its term scale.
    fn action_parts(&self, u: &[f64]) -> (f64, f64) {
        let kin = 0.5 * self.dot(&self.op.apply(u), u);
        let pot = self.potential_energy(u);
        (kin - pot, kin.abs() + pot.abs())
    }

    /// `s` with `⟨L s v, s v⟩ = ⟨f̃(s v), s v⟩`, `L = H + lambda`.
    fn nehari_scale(&self, v: &[f64], iterations: usize) -> Result<f64> {
        let a0 = self.dot(&self.op.apply(v), v);
        let vanishing = || Error::Vanishing { iterations };
        if !(a0 > 0.0) {
            return Err(vanishing());
        }
        match self.nl.spec.kind {
            NonlinearityKind::Power { p } | NonlinearityKind::WeightedPower { p, .. } => {
                let b = self.dot(&self.nl.apply(v), v);
                if !(b > 0.0) {
                    return Err(vanishing());
                }
                Ok((a0 / b).powf(1.0 / p))
            }
            NonlinearityKind::Saturated { .. } => {
                // β(s|v|) is increasing in s; bisect on log s.
                let excess = |s: f64| -> f64 {
                    let w = self.w();
                    (0..v.len())
                        .map(|i| w[i] * self.nl.beta(i, s * v[i]) * v[i] * v[i])
                        .sum::<f64>()
                        - a0
                };
                let (mut lo, mut hi) = (-60.0f64, 60.0f64);
                if excess(lo.exp()) >= 0.0 || excess(hi.exp()) <= 0.0 {
                    return Err(vanishing());
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if excess(mid.exp()) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                Ok((0.5 * (lo + hi)).exp())
            }
        }
    }

    fn default_tau(&self, opts: &SolverOptions) -> f64 {
        opts.tau0
            .unwrap_or_else(|| 0.1 / self.op.potential.iter().fold(1e-300f64, |m, c| m.max(c.abs())))
    }

    fn initial(&self, init: Option<&RadialField>) -> Result<Vec<f64>> {
        match init {
            Some(f) => {
                if f.grid != self.tables.grid {
                    return Err(Error::Misuse("initial field lives on a different grid".into()));
                }
                if f.tag != SpaceTag::Euclidean {
                    return Err(Error::Misuse(
                        "initial field must be in conjugated (Euclidean) form".into(),
                    ));
                }
                Ok(f.values.iter().map(|v| v.abs()).collect())
            }
            None => Ok(self.tables.r.iter().map(|r| (-0.5 * r * r).exp()).collect()),
        }
    }

    fn finish(
        &self,
        spec: &NonlinearitySpec,
        mode: SolveMode,
        u: Vec<f64>,
        lambda_out: f64,
        iterations: usize,
        history: Vec<f64>,
    ) -> GroundStateSolution {
        let residual = self.norm(&self.defect(&u, lambda_out));
        let field = RadialField {
            grid: self.tables.grid,
            values: u,
            tag: SpaceTag::Euclidean,
        };
        let mut sol = GroundStateSolution {
            params: self.tables.params,
            spec: *spec,
            mode,
            mass: self.dot(&field.values, &field.values),
            energy: self.energy(&field.values),
            u: field,
            lambda_out,
            residual,
            decay: None,
            iterations,
            converged: true,
            history,
        };
        sol.decay = decay_diagnostics(&sol).ok();
        sol
    }
}

/// Normalised gradient flow at fixed mass: each step solves
/// `(I + τ(H + λ_n)) ũ = u + τ (f̃(u) + λ_n u)` with the current multiplier
/// estimate `λ_n` and rescales `ũ` to the target mass. The shift makes
/// every stationary state an exact fixed point of the step. Steps
/// that raise the energy are rejected and retried with `τ/2`.
///
/// Only defined when the energy is bounded below on the mass sphere, i.e.
/// for mass-subcritical growth or a non-focusing coupling.
pub fn gradient_flow_minimize(
    params: &ModelParams,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
    mass_target: f64,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<GroundStateSolution> {
    if !(mass_target > 0.0 && mass_target.is_finite()) {
        return Err(Error::invalid(
            "mass_target",
            format!("must be positive, got {mass_target}"),
        ));
    }
    if spec.coupling > 0.0 && spec.model_power() >= params.p_crit_mass {
        return Err(Error::invalid(
            "mode",
            format!(
                "fixed-mass minimisation needs p < 4/d = {}; the energy is unbounded below on the mass sphere. Use fixed-lambda mode",
                params.p_crit_mass
            ),
        ));
    }
    let pb = Problem::new(params, spec, grid)?;
    let h = pb.op.hamiltonian();
    let mut u = pb.initial(init)?;
    rescale_mass(&pb, &mut u, mass_target, 0)?;
    let (mut e, mut scale) = pb.energy_parts(&u);
    let mut history = vec![e];
    let mut tau = pb.default_tau(opts);
    let mut watch = Stagnation::new();
    for it in 0..=opts.max_iters {
        let fu = pb.nl.apply(&u);
        let hu = pb.op.apply_h(&u);
        let q = pb.dot(&u, &u);
        let lambda = (pb.dot(&fu, &u) - pb.dot(&hu, &u)) / q;
        let defect: Vec<f64> = (0..u.len()).map(|i| hu[i] + lambda * u[i] - fu[i]).collect();
        let residual = pb.norm(&defect);
        if residual < opts.tol {
            check_localised(&u, it)?;
            // A multiplier at or below the spectral floor belongs to the
            // linear ground state of the box, not to a soliton.
            if lambda + params.spectral_shift() <= 0.0 {
                return Err(Error::Vanishing { iterations: it });
            }
            let mode = SolveMode::FixedMass { mass_target };
            return Ok(pb.finish(spec, mode, u, lambda, it, history));
        }
        watch.observe(it, residual)?;
        if it == opts.max_iters {
            break;
        }
        // Written as a correction of u; the shift is kept above the floor
        // of the continuous spectrum so the system stays definite.
        let shifted = h.shifted(lambda.max(-params.spectral_shift()));
        loop {
            let corr = shifted.scaled_plus_identity(tau).solve(&defect)?;
            let mut next: Vec<f64> = u.iter().zip(&corr).map(|(a, c)| a - tau * c).collect();
            rescale_mass(&pb, &mut next, mass_target, it)?;
            let (e_next, s_next) = pb.energy_parts(&next);
            if e_next <= e + 1e-12 * scale {
                u = next;
                e = e_next;
                scale = s_next;
                history.push(e);
                tau = (tau * 1.25).min(opts.tau_max);
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(watch.failure(opts.max_iters))
}

/// Gives up when the residual has not improved for a long stretch.
struct Stagnation {
    best: f64,
    best_it: usize,
    last: f64,
}

impl Stagnation {
    const PATIENCE: usize = 500;

    fn new() -> Self {
        Stagnation {
            best: f64::INFINITY,
            best_it: 0,
            last: f64::INFINITY,
        }
    }

    fn observe(&mut self, it: usize, residual: f64) -> Result<()> {
        self.last = residual;
        if residual < 0.9 * self.best {
            self.best = residual;
            self.best_it = it;
        } else if it - self.best_it > Self::PATIENCE {
            return Err(self.failure(it));
        }
        Ok(())
    }

    fn failure(&self, iterations: usize) -> Error {
        Error::NonConvergence {
            iterations,
            residual: self.last,
        }
    }
}

fn rescale_mass(pb: &Problem, u: &mut [f64], mass_target: f64, iterations: usize) -> Result<()> {
    let q = pb.dot(u, u);
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Vanishing { iterations });
    }
    let s = (mass_target / q).sqrt();
    u.iter_mut().for_each(|v| *v *= s);
    Ok(())
}

/// A profile whose peak has drifted to the outer half of the box is
/// spreading, not concentrating.
fn check_localised(u: &[f64], iterations: usize) -> Result<()> {
    let (imax, _) = u
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    if imax > u.len() / 2 {
        return Err(Error::Vanishing { iterations });
    }
    Ok(())
}

/// Solves `(H + lambda) u = f̃(u)` at the lambda in `params`.
///
/// Gradient flow on the action `½⟨Lu, u⟩ - Σ w F̃(u)`, `L = H + lambda`,
/// with each iterate projected onto the Nehari set
/// `⟨Lu, u⟩ = ⟨f̃(u), u⟩` along its ray. The action restricted to that set
/// is bounded below for every admissible power, so the mode also covers
/// mass-supercritical nonlinearities.
pub fn solve_fixed_lambda(
    params: &ModelParams,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<GroundStateSolution> {
    if !(spec.coupling > 0.0) {
        return Err(Error::invalid(
            "coupling",
            "fixed-lambda ground states need a focusing nonlinearity (coupling > 0)",
        ));
    }
    let pb = Problem::new(params, spec, grid)?;
    let l: Tridiagonal<f64> = pb.op.matrix();
    let mut u = pb.initial(init)?;
    let s = pb.nehari_scale(&u, 0)?;
    u.iter_mut().for_each(|v| *v *= s);
    let mut a = pb.action_parts(&u);
    let mut history = vec![a.0];
    let mut tau = pb.default_tau(opts);
    let mut watch = Stagnation::new();
    for it in 0..=opts.max_iters {
        let fu = pb.nl.apply(&u);
        let lu = pb.op.apply(&u);
        let defect: Vec<f64> = lu.iter().zip(&fu).map(|(x, f)| x - f).collect();
        let residual = pb.norm(&defect);
        if residual < opts.tol {
            check_localised(&u, it)?;
            return Ok(pb.finish(spec, SolveMode::FixedLambda, u, params.lambda, it, history));
        }
        watch.observe(it, residual)?;
        if it == opts.max_iters {
            break;
        }
        loop {
            let corr = l.scaled_plus_identity(tau).solve(&defect)?;
            let mut next: Vec<f64> = u.iter().zip(&corr).map(|(x, c)| x - tau * c).collect();
            let s = pb.nehari_scale(&next, it)?;
            next.iter_mut().for_each(|v| *v *= s);
            let a_next = pb.action_parts(&next);
            if a_next.0 <= a.0 + 1e-12 * a.1 {
                u = next;
                a = a_next;
                history.push(a.0);
                tau = (tau * 1.25).min(opts.tau_max);
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(watch.failure(opts.max_iters))
}

/// Default box for a given `mu`: `max(20, 16/√mu)`, i.e. sixteen decay
/// lengths of the conjugated profile.
pub fn default_r_max(params: &ModelParams) -> f64 {
    (16.0 / params.mu.sqrt()).max(20.0)
}

/// Solves from several initial guesses and returns the largest relative
/// L∞ difference between the resulting profiles. Values above `1e-4`
/// indicate the initialisation matters.
pub fn init_sensitivity(
    params: &ModelParams,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
    widths: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    let mut profiles = Vec::with_capacity(widths.len());
    for &w in widths {
        let init = RadialField::from_fn(*grid, SpaceTag::Euclidean, |r| (-0.5 * (r / w).powi(2)).exp());
        profiles.push(solve_fixed_lambda(params, spec, grid, Some(&init), opts)?.u.values);
    }
    let mut worst: f64 = 0.0;
    for a in &profiles {
        for b in &profiles {
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

/// Weighted L² norm of `(H + lambda_out) u - f̃(u)` for a stored solution.
pub fn residual(sol: &GroundStateSolution) -> Result<f64> {
    let pb = Problem::new(&sol.params, &sol.spec, &sol.u.grid)?;
    Ok(pb.norm(&pb.defect(&sol.u.values, sol.lambda_out)))
}
