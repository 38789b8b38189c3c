//! Taylor–Hood P2/P1 discretization of the fluid and its discrete solution maps.

pub mod solver;
pub mod space;

pub use solver::{
    assemble_stokes_forms, assemble_velocity_load, lift_trace, omega_integral, FluidBackend, StokesForms,
    StokesSolution, StokesSolver, DIRECT_NODE_LIMIT,
};
pub use space::{FluidField, NodeClass, PressureField, TaylorHoodSpace};
