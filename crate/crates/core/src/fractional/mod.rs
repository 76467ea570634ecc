//! Fractional integrals and derivatives in time, Fourier-multiplier
//! derivatives in space, fractional Sobolev norms and inequality ratios.

mod inequality;
mod mesh;
mod space;
mod time;

pub use inequality::{inequality_diagnostic, InequalityCase, InequalityInput, InequalityReport};
pub use mesh::{l2_norm, sup_norm, vec_norm, GridFunction, SpatialGrid, TimeMesh, Trajectory};
pub use space::{
    apply_multiplier, first_derivative_multiplier, liouville_multiplier, sobolev_norm, spectral_derivative,
    MultiplierKind,
};
pub(crate) use space::apply_multiplier_raw;
pub use time::{
    caputo_derivative, caputo_derivative_with_velocity, cell_integral, cell_slopes, rl_derivative, rl_integral,
    NodeValue,
};
