//! Shared fixtures for the benchmarks.

use hnls_core::ground_state::{default_r_max, solve_fixed_lambda, GroundStateSolution, SolverOptions};
use hnls_core::{ModelParams, NonlinearitySpec, RadialGrid};

pub fn params(d: usize, p: f64, lambda: f64) -> ModelParams {
    ModelParams::new(d, p, lambda).expect("benchmark parameters are admissible")
}

/// Grid on the default box for `params` with spacing `h`.
pub fn grid(params: &ModelParams, h: f64) -> RadialGrid {
    RadialGrid::with_spacing(default_r_max(params), h).expect("valid grid")
}

/// Converged power-law soliton.
pub fn soliton(d: usize, p: f64, lambda: f64, h: f64) -> GroundStateSolution {
    let params = params(d, p, lambda);
    let grid = grid(&params, h);
    solve_fixed_lambda(
        &params,
        &NonlinearitySpec::power(p),
        &grid,
        None,
        &SolverOptions::default(),
    )
    .expect("soliton converges")
}
