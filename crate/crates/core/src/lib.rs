//! Radial ground states of the nonlinear Schrödinger equation on hyperbolic
//! space, computed through the conjugation `u = R / phi` that turns the
//! hyperbolic Laplacian into a Euclidean radial operator with a potential.

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod ground_state;
pub mod heat_kernel;
pub mod linalg;
pub mod nonlinearity;
pub mod quadrature;
pub mod rearrangement;
pub mod stability;

pub use error::{Error, Result};
pub use geometry::{
    conjugate, effective_potential, eval_k_tilde, eval_phi, eval_potential, eval_v_tilde, norms, Direction, FieldNorms,
    GeometryTables, ModelParams, RadialField, RadialGrid, SpaceTag,
};
pub use nonlinearity::{
    eval_big_f_conjugated, eval_f_conjugated, NodalNonlinearity, NonlinearityKind, NonlinearitySpec,
};
