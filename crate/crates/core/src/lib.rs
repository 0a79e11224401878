//! Long-range one-dimensional Ising model with `+` boundary conditions:
//! couplings `J(n) = |n|^(alpha-2)` with an enhanced nearest-neighbour bond,
//! the triangle and contour geometry of spin flips, exact enumeration,
//! leading-order cluster formulas and Monte Carlo samplers.

pub mod cluster;
pub mod contour;
pub mod error;
pub mod geometry;
pub mod intervals;
pub mod kernel;
pub mod oracle;
pub mod params;
pub mod sampler;
pub mod spins;

pub use cluster::{BoundKind, Envelope};
pub use contour::{contour_census, contour_counting_check, group_contours, verify_peierls, Contour, ContourFamily};
pub use error::{Error, Result};
pub use geometry::{
    build_triangles, droplet_stats, external_large, ground_state_of, reconstruct_spins, rho_targets, DropletReport,
    DropletTargets, Triangle, TriangleFamily,
};
pub use intervals::{interval_family_energy, Interval, IntervalEnergy};
pub use kernel::{build_kernel, Kernel};
pub use oracle::{enumerate, EventResult, EventSpec, Observables, OracleResult};
pub use params::{validate_exponents, ExponentReport, ModelParams};
pub use sampler::{
    estimate_m_beta, phase_separation_experiment, ChainState, Dynamics, EnsembleSpec, ExperimentReport, Start,
};
pub use spins::{empirical_magnetization, hamiltonian, SpinConfig};
