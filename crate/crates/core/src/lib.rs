//! Euclidean TSP solving with a discrete edge diffusion model whose clean
//! state estimate is projected onto 2-opt local optima at every denoising
//! step.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom fix it to `f64`, which is what the CLI and benchmarks use.

pub mod bench;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod io;
pub mod local_search;
pub mod oracle;
pub mod scalar;
pub mod solver;
pub mod tsp;

pub use denoiser::{oracle_denoise, Checkpoint, Denoiser, DenoiserParams, OracleDenoiser, TrainingConfig};
pub use diffusion::{DiffusionSchedule, ScheduleConfig};
pub use error::{Error, Result};
pub use field::{EdgeField, FieldKind};
pub use io::BenchRow;
pub use local_search::{two_opt, TwoChangeMove};
pub use oracle::{brute_force, held_karp, ExactResult};
pub use scalar::Scalar;
pub use solver::{project_x0, reconstruct_hamiltonian, solve, ProjectionMode, SolveConfig, SolveResult};
pub use tsp::{generate_random_instance, optimality_gap, tour_length, Instance, Tour};

pub type Instance64 = Instance<f64>;
pub type EdgeField64 = EdgeField<f64>;
pub type Schedule64 = DiffusionSchedule<f64>;
pub type Checkpoint64 = Checkpoint<f64>;
pub type Params64 = DenoiserParams<f64>;
pub type SolveResult64 = SolveResult<f64>;
