//! Parallel-in-time solution of linear-quadratic optimal control problems
//! for the semi-discrete heat and wave equations.
//!
//! The optimality system is decoupled on `L` sub-intervals into local
//! inhomogeneous quadratures and homogeneous exponential propagations. What
//! remains is a single interface system `M Λ_L + b = 0` for the final adjoint
//! `Λ_L = λ(T)`. That system is solved matrix-free with GMRES and one of two
//! spectral preconditioners.
//!
//! ```
//! use paraexp_ocp::{Grid, InterfaceSystem, ParallelPlan, Problem, ProblemKind, QuadratureRule};
//!
//! let problem = Problem::gaussian_benchmark(ProblemKind::Heat, 20, 1.0, 1e-2).unwrap();
//! let grid = Grid::new(1.0, 4, 10).unwrap();
//! let plan = ParallelPlan::new(2, 4).unwrap();
//! let system = InterfaceSystem::new(&problem, &grid, QuadratureRule::ImplicitEuler, plan).unwrap();
//! let b = system.assemble_rhs();
//! assert_eq!(b.len(), 20);
//! ```

pub mod analysis;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod krylov;
pub mod model;
pub mod paraexp;
pub mod precond;
pub mod propagate;
pub mod scalar;

pub use analysis::{
    heat_symbol, materialize, preconditioned, spectrum_exact, spectrum_extremes, theorem1_check,
    wave_symbol_mc, SpectrumMethod, SpectrumOptions, SpectrumReport, SymbolTriple, Theorem1Check, WaveSymbol,
};
pub use dense::{DenseMatrix, Lu};
pub use error::{Error, Result};
pub use krylov::{gmres, KrylovConfig, KrylovReport, PrecondSide};
pub use model::{
    build_heat_operator, build_wave_operator, laplacian_eigenpair, sample_profile, ControlProblem,
    FnOperator, HeatOperator, LinearOperator, Profile, ProblemKind, SpectralBasis, TimeGrid,
    WaveOperator,
};
pub use paraexp::{objective, FineSample, FineTrajectory, InterfaceSolution, InterfaceSystem, ParallelPlan};
pub use precond::{
    heat_precond_apply, tridiag_solve, wave_precond_apply, HeatPreconditioner, PrecondParams,
    TridiagonalSystem, WavePreconditioner,
};
pub use propagate::{
    expm_action_arnoldi, expm_action_heat, expm_action_wave, expm_action_wave_adjoint,
    ArnoldiExpm, QuadratureRule, SubintervalOperators,
};
pub use scalar::Real;

pub type Problem = ControlProblem<f64>;
pub type Grid = TimeGrid<f64>;
pub type Basis = SpectralBasis<f64>;
pub type System = InterfaceSystem<f64>;
pub type Solution = InterfaceSolution<f64>;
pub type Matrix = DenseMatrix<f64>;

pub type ProblemF32 = ControlProblem<f32>;
pub type GridF32 = TimeGrid<f32>;
pub type SystemF32 = InterfaceSystem<f32>;
