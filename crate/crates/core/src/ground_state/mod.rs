//! Radial ground states of `-Δ_H R + lambda R = f(R) R` computed in
//! conjugated form `u = R / phi`.

mod diagnostics;
mod flow;
mod operator;
mod shooting;

pub use diagnostics::{decay_diagnostics, fit_decay, is_positive_nonincreasing, relative_linf, DecayFit};
pub use flow::{
    default_r_max, gradient_flow_minimize, init_sensitivity, residual, solve_fixed_lambda, GroundStateSolution,
    SolveMode, SolverOptions,
};

pub(crate) use flow::Problem;
pub use operator::{assemble_operator, DiscreteRadialOperator};
pub use shooting::{shooting_self_residual, shooting_solve, shooting_solve_bracket, ShootingSolution};

use crate::error::Result;
use crate::geometry::{conjugate, Direction, GeometryTables, RadialField};

/// The hyperbolic profile `R = phi u` of a solution.
pub fn hyperbolic_profile(sol: &GroundStateSolution) -> Result<RadialField> {
    let tables = GeometryTables::new(sol.u.grid, sol.params);
    conjugate(&sol.u, Direction::ToHyperbolic, &tables)
}
