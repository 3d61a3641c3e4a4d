//! Cucker–Smale flocking with singular communication weights.
//!
//! The weight `ψ(s) = s^-alpha` is replaced by a bounded regularization at a
//! large level, and the resulting system is integrated piecewise between
//! collisions: clusters whose velocities match on contact are merged, other
//! encounters are passed through.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod kernels;
mod ode;
pub mod scenario;
pub mod twobody;

pub use config::{parse_config, Command, RunConfig};
pub use dynamics::{Acceleration, ClusterPartition, Normalization, ParticleSystem};
pub use error::{Error, Result};
pub use integrator::{
    classify_event, integrate_segment, solve_piecewise, CollisionEvent, EventKind,
    PiecewiseTrajectory, RawEvent, Sample, Segment, SegmentRun, SolverConfig,
};
pub use kernels::{PreparedKernel, Primitive, WeightKernel};
