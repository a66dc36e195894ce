//! Radial time integration of the conjugated equation
//! `i u_t = H u - f̃(u)`, `H = A + (d-1)²/4 + V_d`, by Strang splitting:
//! half a step of the local phase rotation, a Crank–Nicolson step of the
//! kinetic part `A`, and another half rotation.

mod blowup;
mod orbital;

pub use blowup::{blowup_probe, blowup_refinement, BlowupCriterion, BlowupOptions, BlowupOutcome, BlowupReport};
pub use orbital::{orbital_distance, orbital_experiment, perturbation_bump, OrbitalMetric, OrbitalOptions};

use std::collections::VecDeque;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, RadialField, RadialGrid, SpaceTag};
use crate::ground_state::Problem;
use crate::linalg::{Tridiagonal, TridiagonalFactor};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Time between history samples.
    pub sample_every: f64,
    /// The run stops with an error once `|u|` at the outer node exceeds
    /// this fraction of `max |u|`.
    pub boundary_tol: f64,
    /// Largest local phase increment `dt · max|β - c|` a step may take.
    pub max_phase_step: f64,
    /// Oldest history rows are dropped beyond this length.
    pub history_capacity: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 1e-3,
            t_end: 1.0,
            sample_every: 0.01,
            boundary_tol: 1e-8,
            max_phase_step: 1.0,
            history_capacity: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub q: f64,
    pub e: f64,
    pub grad_norm: f64,
    pub orbital_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    /// Conjugated field.
    pub u: RadialField<Complex64>,
    pub q_now: f64,
    pub e_now: f64,
    /// `‖∇R‖` over hyperbolic space, `R = phi u`.
    pub grad_norm: f64,
    pub history: VecDeque<HistoryRow>,
}

impl EvolutionState {
    /// State at `t = 0` with one history row.
    pub fn new(u: RadialField<Complex64>, params: &ModelParams, spec: &NonlinearitySpec) -> Result<Self> {
        if u.tag != SpaceTag::Euclidean {
            return Err(Error::Misuse(
                "evolution works on the conjugated (euclidean-tagged) field".into(),
            ));
        }
        let pb = Problem::new(params, spec, &u.grid)?;
        let (q, e, g) = readouts(&pb, &u.values);
        let mut state = EvolutionState {
            t: 0.0,
            u,
            q_now: q,
            e_now: e,
            grad_norm: g,
            history: VecDeque::new(),
        };
        state.record(None, usize::MAX);
        Ok(state)
    }

    fn record(&mut self, orbital_distance: Option<f64>, capacity: usize) {
        if self.history.back().is_some_and(|row| row.t >= self.t) {
            return;
        }
        if self.history.len() >= capacity.max(1) {
            self.history.pop_front();
        }
        self.history.push_back(HistoryRow {
            t: self.t,
            q: self.q_now,
            e: self.e_now,
            grad_norm: self.grad_norm,
            orbital_distance,
        });
    }

    /// Trace CSV: `t,Q,E,grad_norm,orbital_distance`.
    pub fn write_history_csv<W: Write>(&self, mut out: W, metadata: &str) -> Result<()> {
        write_trace_csv(&mut out, self.history.iter(), metadata)
    }
}

pub(crate) fn write_trace_csv<'a, W: Write>(
    out: &mut W,
    rows: impl Iterator<Item = &'a HistoryRow>,
    metadata: &str,
) -> Result<()> {
    for line in metadata.lines() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "t,Q,E,grad_norm,orbital_distance")?;
    for row in rows {
        let dist = row.orbital_distance.map_or(String::new(), |d| format!("{d:.12e}"));
        writeln!(
            out,
            "{:.12e},{:.15e},{:.15e},{:.12e},{dist}",
            row.t, row.q, row.e, row.grad_norm
        )?;
    }
    Ok(())
}

/// `Q = Σ w |u|²`, `E = Re⟨Hu, u⟩ - 2 Σ w F̃(|u|)` and `‖∇R‖ = Re⟨Hu, u⟩^{1/2}`.
fn readouts(pb: &Problem, u: &[Complex64]) -> (f64, f64, f64) {
    let w = pb.w();
    let hu = pb.op.apply_h_complex(u);
    let q: f64 = u.iter().zip(w).map(|(z, w)| w * z.norm_sqr()).sum();
    let kin: f64 = u
        .iter()
        .zip(&hu)
        .zip(w)
        .map(|((z, hz), w)| w * (z.conj() * hz).re)
        .sum();
    let pot = pb.nl.potential_energy(w, u.iter().map(|z| z.norm()));
    (q, kin - 2.0 * pot, kin.max(0.0).sqrt())
}

/// Hyperbolic mass and energy of the current field.
pub fn conserved_quantities(
    state: &EvolutionState,
    params: &ModelParams,
    spec: &NonlinearitySpec,
) -> Result<(f64, f64)> {
    let pb = Problem::new(params, spec, &state.u.grid)?;
    let (q, e, _) = readouts(&pb, &state.u.values);
    Ok((q, e))
}

/// A fixed-step Strang propagator on one grid.
pub struct Propagator {
    pb: Problem,
    dt: f64,
    lhs: TridiagonalFactor<Complex64>,
    rhs: Tridiagonal<Complex64>,
    /// `(d-1)²/4 + V_d` at the nodes.
    local: Vec<f64>,
    max_phase_step: f64,
}

impl Propagator {
    pub fn new(params: &ModelParams, spec: &NonlinearitySpec, grid: &RadialGrid, dt: f64) -> Result<Self> {
        Self::with_phase_bound(params, spec, grid, dt, EvolveOptions::default().max_phase_step)
    }

    pub fn with_phase_bound(
        params: &ModelParams,
        spec: &NonlinearitySpec,
        grid: &RadialGrid,
        dt: f64,
        max_phase_step: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let pb = Problem::new(params, spec, grid)?;
        let k = pb.op.kinetic.to_complex();
        let half = Complex64::new(0.0, 0.5 * dt);
        let one = Complex64::new(1.0, 0.0);
        let lhs = Tridiagonal::new(
            k.lower.iter().map(|a| half * a).collect(),
            k.diag.iter().map(|a| one + half * a).collect(),
            k.upper.iter().map(|a| half * a).collect(),
        )
        .factorize()?;
        let rhs = Tridiagonal::new(
            k.lower.iter().map(|a| -half * a).collect(),
            k.diag.iter().map(|a| one - half * a).collect(),
            k.upper.iter().map(|a| -half * a).collect(),
        );
        let local = pb.op.potential.iter().map(|c| c - params.lambda).collect();
        Ok(Propagator {
            pb,
            dt,
            lhs,
            rhs,
            local,
            max_phase_step,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, u: &mut [Complex64], tau: f64) {
        for (i, z) in u.iter_mut().enumerate() {
            let rate = self.pb.nl.beta(i, z.norm()) - self.local[i];
            *z *= Complex64::from_polar(1.0, rate * tau);
        }
    }

    fn phase_rate(&self, u: &[Complex64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, z)| (self.pb.nl.beta(i, z.norm()) - self.local[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Advances `u` by one step in place.
    pub fn step(&self, u: &mut [Complex64]) -> Result<()> {
        let phase = self.dt * self.phase_rate(u);
        if phase > self.max_phase_step {
            return Err(Error::invalid(
                "dt",
                format!(
                    "local phase step {phase:.3e} exceeds the bound {}; reduce dt",
                    self.max_phase_step
                ),
            ));
        }
        self.rotate(u, 0.5 * self.dt);
        let mut b = self.rhs.matvec(u);
        self.lhs.solve_in_place(&mut b)?;
        u.copy_from_slice(&b);
        self.rotate(u, 0.5 * self.dt);
        Ok(())
    }

    /// `(Q, E, ‖∇R‖)`.
    pub fn readouts(&self, u: &[Complex64]) -> (f64, f64, f64) {
        readouts(&self.pb, u)
    }

    pub(crate) fn problem(&self) -> &Problem {
        &self.pb
    }
}

/// One Strang step.
pub fn step(state: &EvolutionState, dt: f64, params: &ModelParams, spec: &NonlinearitySpec) -> Result<EvolutionState> {
    let prop = Propagator::new(params, spec, &state.u.grid, dt)?;
    let mut next = state.clone();
    prop.step(&mut next.u.values)?;
    next.t += dt;
    let (q, e, g) = prop.readouts(&next.u.values);
    next.q_now = q;
    next.e_now = e;
    next.grad_norm = g;
    next.record(None, usize::MAX);
    Ok(next)
}

fn boundary_ratio(u: &[Complex64]) -> f64 {
    let max = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        0.0
    } else {
        u[u.len() - 1].norm() / max
    }
}

/// Evolves to `opts.t_end` with fixed `opts.dt`, recording a history row
/// every `opts.sample_every`. `observer` is called with `(t, u)` at each
/// sample and supplies the orbital distance column.
pub fn evolve(
    state: EvolutionState,
    params: &ModelParams,
    spec: &NonlinearitySpec,
    opts: &EvolveOptions,
    mut observer: Option<&mut dyn FnMut(f64, &[Complex64]) -> f64>,
) -> Result<EvolutionState> {
    if !(opts.t_end >= state.t) {
        return Err(Error::invalid(
            "t_end",
            format!("must be at least the current time {}", state.t),
        ));
    }
    if opts.t_end > state.t && opts.dt > opts.t_end - state.t {
        return Err(Error::invalid(
            "dt",
            format!("step {} is longer than the run {}", opts.dt, opts.t_end - state.t),
        ));
    }
    let prop = Propagator::with_phase_bound(params, spec, &state.u.grid, opts.dt, opts.max_phase_step)?;
    let mut state = state;
    if let Some(obs) = observer.as_mut() {
        let dist = obs(state.t, &state.u.values);
        if let Some(row) = state.history.back_mut().filter(|row| row.t == state.t) {
            row.orbital_distance = Some(dist);
        }
    }
    let steps = ((opts.t_end - state.t) / opts.dt).round() as usize;
    let every = ((opts.sample_every / opts.dt).round() as usize).max(1);
    let t0 = state.t;
    for k in 1..=steps {
        match prop.step(&mut state.u.values) {
            Ok(()) => {}
            Err(Error::InvalidParameter { reason, .. }) if k > 1 => {
                return Err(Error::StepRejected { t: state.t, reason });
            }
            Err(e) => return Err(e),
        }
        state.t = t0 + k as f64 * opts.dt;
        if k % every == 0 || k == steps {
            let ratio = boundary_ratio(&state.u.values);
            if ratio > opts.boundary_tol {
                return Err(Error::BoundaryReached { t: state.t, ratio });
            }
            let (q, e, g) = prop.readouts(&state.u.values);
            state.q_now = q;
            state.e_now = e;
            state.grad_norm = g;
            let dist = observer.as_mut().map(|obs| obs(state.t, &state.u.values));
            state.record(dist, opts.history_capacity);
        }
    }
    Ok(state)
}
