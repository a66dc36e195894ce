use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, RadialField, RadialGrid, SpaceTag};
use crate::nonlinearity::NonlinearitySpec;

use super::{boundary_ratio, HistoryRow, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupOptions {
    /// Threshold constant; `(d-1)²/16` when absent.
    pub c_d: Option<f64>,
    /// Initial step. The step is halved whenever `dt (g/g0)²` exceeds it.
    pub dt0: f64,
    /// Ratio `‖∇R(t)‖ / ‖∇R(0)‖` declared numerical blow-up.
    pub growth_threshold: f64,
    /// The run gives up once the step falls below this.
    pub min_dt: f64,
    /// Relative amplitude at the outer node that ends the run.
    pub boundary_tol: f64,
    /// Largest local phase increment per step.
    pub max_phase_step: f64,
    /// Steps between trace rows (the last step is always recorded).
    pub record_every: usize,
    /// Step budget; the run ends with `StepLimit` beyond it.
    pub max_steps: usize,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions {
            c_d: None,
            dt0: 1e-3,
            growth_threshold: 1e3,
            min_dt: 1e-13,
            boundary_tol: 1e-8,
            max_phase_step: 0.2,
            record_every: 10,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCriterion {
    pub c_d: f64,
    pub energy0: f64,
    pub mass0: f64,
    /// `energy0 < c_d · mass0`.
    pub triggered_prediction: bool,
    /// Largest `‖∇R(t)‖ / ‖∇R(0)‖` seen.
    pub observed_growth: f64,
    /// `∫ |R|² dist(0, ·)²` on the grid.
    pub variance: f64,
    /// The initial data are negligible at the outer wall, so the grid
    /// variance approximates the true one.
    pub variance_finite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BlowupOutcome {
    /// The gradient norm passed the growth threshold at `t`.
    NumericalBlowup {
        t: f64,
    },
    /// `t_max` was reached without passing the threshold.
    Completed,
    BoundaryReached {
        t: f64,
    },
    StepUnderflow {
        t: f64,
    },
    StepLimit {
        t: f64,
    },
}

impl BlowupOutcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, BlowupOutcome::NumericalBlowup { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    pub criterion: BlowupCriterion,
    pub outcome: BlowupOutcome,
    pub grid: RadialGrid,
    pub t_max: f64,
    pub steps: usize,
    pub final_dt: f64,
    #[serde(skip)]
    pub trace: Vec<HistoryRow>,
}

impl BlowupReport {
    pub fn write_trace_csv<W: std::io::Write>(&self, mut out: W, metadata: &str) -> Result<()> {
        super::write_trace_csv(&mut out, self.trace.iter(), metadata)
    }
}

/// Evolves `initial` with a step that shrinks like `‖∇R‖^{-2}` and stops at
/// the first of: growth threshold, `t_max`, radiation at the wall, step
/// underflow. The outcome is data; only invalid inputs are errors.
pub fn blowup_probe(
    initial: &RadialField<Complex64>,
    params: &ModelParams,
    spec: &NonlinearitySpec,
    t_max: f64,
    opts: &BlowupOptions,
) -> Result<BlowupReport> {
    if initial.tag != SpaceTag::Euclidean {
        return Err(Error::Misuse(
            "blow-up probe takes the conjugated (euclidean-tagged) field".into(),
        ));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max", format!("must be positive, got {t_max}")));
    }
    if !(opts.growth_threshold > 1.0) {
        return Err(Error::invalid("growth_threshold", "must exceed 1"));
    }
    let c_d = opts.c_d.unwrap_or_else(|| (params.d as f64 - 1.0).powi(2) / 16.0);
    if !(c_d > 0.0 && c_d.is_finite()) {
        return Err(Error::invalid("c_d", format!("must be positive, got {c_d}")));
    }
    let grid = initial.grid;
    let build = |dt: f64| Propagator::with_phase_bound(params, spec, &grid, dt, opts.max_phase_step);
    let mut level = 0u32;
    let mut prop = build(opts.dt0)?;
    let mut u = initial.values.clone();
    let (q0, e0, g0) = prop.readouts(&u);
    if g0 == 0.0 {
        return Err(Error::invalid("initial", "zero initial data"));
    }
    let w = prop.problem().w();
    let r = grid.nodes();
    let variance: f64 = u
        .iter()
        .zip(w)
        .zip(&r)
        .map(|((z, w), r)| w * r * r * z.norm_sqr())
        .sum();
    let variance_finite = variance.is_finite() && boundary_ratio(&u) <= opts.boundary_tol;

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut growth: f64 = 1.0;
    let mut trace = vec![HistoryRow {
        t,
        q: q0,
        e: e0,
        grad_norm: g0,
        orbital_distance: None,
    }];
    let outcome = loop {
        if t >= t_max * (1.0 - 1e-12) {
            break BlowupOutcome::Completed;
        }
        let g = growth * g0;
        // Halve until dt (g/g0)² <= dt0 and the phase bound holds.
        loop {
            let dt = prop.dt();
            let phase = dt * prop.phase_rate(&u);
            if dt * (g / g0).powi(2) > opts.dt0 || phase > opts.max_phase_step {
                level += 1;
                let next = opts.dt0 / 2f64.powi(level as i32);
                if next < opts.min_dt {
                    break;
                }
                prop = build(next)?;
            } else {
                break;
            }
        }
        if steps >= opts.max_steps {
            break BlowupOutcome::StepLimit { t };
        }
        if opts.dt0 / 2f64.powi(level as i32) < opts.min_dt {
            break BlowupOutcome::StepUnderflow { t };
        }
        let dt = prop.dt().min(t_max - t);
        if dt < prop.dt() {
            prop = build(dt)?;
        }
        // A failed step leaves `u` untouched.
        if prop.step(&mut u).is_err() {
            break BlowupOutcome::StepUnderflow { t };
        }
        t += dt;
        steps += 1;
        let (q, e, g) = prop.readouts(&u);
        growth = g / g0;
        let ratio = boundary_ratio(&u);
        let done = growth >= opts.growth_threshold || ratio > opts.boundary_tol;
        if steps % opts.record_every.max(1) == 0 || done {
            trace.push(HistoryRow {
                t,
                q,
                e,
                grad_norm: g,
                orbital_distance: None,
            });
        }
        if growth >= opts.growth_threshold {
            break BlowupOutcome::NumericalBlowup { t };
        }
        if ratio > opts.boundary_tol {
            break BlowupOutcome::BoundaryReached { t };
        }
    };
    let observed_growth = trace.iter().map(|row| row.grad_norm / g0).fold(growth, f64::max);
    Ok(BlowupReport {
        criterion: BlowupCriterion {
            c_d,
            energy0: e0,
            mass0: q0,
            triggered_prediction: e0 < c_d * q0,
            observed_growth,
            variance,
            variance_finite,
        },
        outcome,
        grid,
        t_max,
        steps,
        final_dt: prop.dt(),
        trace,
    })
}

/// Runs the probe on `base` and `levels - 1` successive refinements of it,
/// sampling `initial` (a conjugated profile) on each grid.
pub fn blowup_refinement(
    initial: &(dyn Fn(f64) -> Complex64 + Sync),
    params: &ModelParams,
    spec: &NonlinearitySpec,
    base: &RadialGrid,
    levels: usize,
    t_max: f64,
    opts: &BlowupOptions,
) -> Result<Vec<BlowupReport>> {
    if levels == 0 {
        return Err(Error::invalid("levels", "need at least one grid"));
    }
    let mut grids = vec![*base];
    for _ in 1..levels {
        let next = grids[grids.len() - 1].refined();
        grids.push(next);
    }
    grids
        .iter()
        .map(|g| {
            let field = RadialField::from_fn(*g, SpaceTag::Euclidean, initial);
            blowup_probe(&field, params, spec, t_max, opts)
        })
        .collect()
}
