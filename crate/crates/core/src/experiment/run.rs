use super::config::ExperimentConfig;
use super::csv::{Cell, CsvTable};
use super::record::{CommandKind, ResultRecord};
use crate::analysis::{
    materialize, preconditioned, spectrum_exact, spectrum_extremes_with, theorem1_check, SpectrumOptions,
};
use crate::error::{Error, Result};
use crate::krylov::{gmres, KrylovConfig, KrylovReport};
use crate::model::{ControlProblem, LinearOperator, ProblemKind, TimeGrid};
use crate::paraexp::{objective, InterfaceSolution, InterfaceSystem, ParallelPlan};
use crate::precond::{HeatPreconditioner, PrecondParams, WavePreconditioner};
use std::time::Instant;

pub fn build_problem(cfg: &ExperimentConfig) -> Result<ControlProblem<f64>> {
    ControlProblem::benchmark_with_target(cfg.problem, cfg.r, cfg.horizon, cfg.alpha, cfg.target)
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<InterfaceSystem<f64>> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.sub_intervals, cfg.fine_steps)?;
    let plan = ParallelPlan::new(cfg.resolved_workers(), cfg.sub_intervals)?;
    InterfaceSystem::new(&problem, &grid, cfg.quadrature, plan)
}

/// The structured preconditioner matching the problem family.
pub fn build_preconditioner(problem: &ControlProblem<f64>) -> Result<Box<dyn LinearOperator<f64>>> {
    Ok(match problem.kind() {
        ProblemKind::Heat => Box::new(HeatPreconditioner::new(problem.r(), problem.alpha())?),
        ProblemKind::Wave => {
            let params = PrecondParams::new(problem.horizon(), problem.alpha())?;
            Box::new(WavePreconditioner::new(problem.r(), params)?)
        }
    })
}

pub struct SolveOutcome {
    pub record: ResultRecord,
    pub solution: InterfaceSolution<f64>,
}

/// Solves `M Λ_L = −b`, reconstructs the trajectory and evaluates the objective.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveOutcome> {
    let start = Instant::now();
    let system = build_system(cfg)?;
    let (lambda, report) = solve_interface(&system, cfg)?;
    let solution = system.reconstruct(&lambda, true)?;
    let value = objective(&solution, system.problem())?;

    let mut record = ResultRecord::new(CommandKind::Solve, cfg);
    record.iterations = Some(report.iterations);
    record.final_residual = Some(report.final_residual);
    record.converged = Some(report.converged);
    record.residual_history = report.residuals;
    record.objective = Some(value);
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(SolveOutcome { record, solution })
}

/// GMRES on `M Λ_L = −b` with the solver settings of `cfg`.
pub fn solve_interface(system: &InterfaceSystem<f64>, cfg: &ExperimentConfig) -> Result<(Vec<f64>, KrylovReport)> {
    let pre = build_preconditioner(system.problem())?;
    let rhs: Vec<f64> = system.assemble_rhs().iter().map(|v| -v).collect();
    let kcfg = KrylovConfig::new(cfg.restart.cycle(), cfg.tol, cfg.resolved_maxit(), cfg.effective_side())?;
    gmres(system, &rhs, None, &kcfg, Some(pre.as_ref()))
}

/// Materializes `M` (and `M·M̂⁻¹` when preconditioning is on) and reports
/// extremes, cross-checked against the per-mode blocks.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let system = build_system(cfg)?;
    let symmetric = cfg.problem == ProblemKind::Heat;
    let opts = SpectrumOptions {
        seed: cfg.seed,
        ..SpectrumOptions::default()
    };
    let mut record = ResultRecord::new(CommandKind::Spectrum, cfg);
    let dense = materialize(&system)?;
    record.spectrum = Some(spectrum_extremes_with(&dense, symmetric, opts)?);
    record.spectrum_exact = Some(spectrum_exact(&system, false)?);
    if cfg.preconditioned() {
        let pre = build_preconditioner(system.problem())?;
        let product = preconditioned(&system, pre.as_ref());
        let dense = materialize(&product)?;
        record.spectrum_preconditioned = Some(spectrum_extremes_with(&dense, symmetric, opts)?);
        record.spectrum_preconditioned_exact = Some(spectrum_exact(&system, true)?);
    }
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

pub const BOUND_SWEEP: [usize; 10] = [
    100_000, 200_000, 300_000, 400_000, 500_000, 600_000, 700_000, 800_000, 900_000, 1_000_000,
];

pub const BOUND_HEADER: [&str; 10] = [
    "N", "dt", "mu_min", "mu_max", "mu_max_exact", "mu_max_matrix", "bound", "dt_total", "bound_total", "holds",
];

/// Eigenvalue bound sweep for the heat problem with implicit Euler.
///
/// `dt = T/(L·N)` is the fine step of the grid; `dt_total = T/N` reads `N`
/// as the number of steps over the whole horizon. The quadrature key of
/// `cfg` is not consulted.
pub fn run_bound(cfg: &ExperimentConfig, sweep: &[usize]) -> Result<CsvTable> {
    cfg.validate()?;
    if cfg.problem != ProblemKind::Heat {
        return Err(Error::Config("bound applies to the heat problem".into()));
    }
    let mut table = CsvTable::new(&BOUND_HEADER);
    for &n in sweep {
        let check = theorem1_check(cfg.r, cfg.sub_intervals, n, cfg.horizon, cfg.alpha)?;
        let dt = cfg.horizon / (cfg.sub_intervals * n) as f64;
        let dt_total = cfg.horizon / n as f64;
        table.push(vec![
            n.into(),
            dt.into(),
            check.mu_min.into(),
            check.mu_max.into(),
            check.mu_max_exact.into(),
            check.mu_max_matrix.map_or(Cell::Text(String::new()), Cell::Num),
            check.bound.into(),
            dt_total.into(),
            (1.0 + dt_total / cfg.alpha).into(),
            check.holds.into(),
        ]);
    }
    Ok(table)
}

/// Plot-ready samples `t, y…, λ…, ν…` of a reconstructed trajectory.
pub fn trajectory_csv(solution: &InterfaceSolution<f64>) -> Result<CsvTable> {
    let fine = solution.fine.as_ref().ok_or(Error::MissingTrajectory)?;
    let n = fine.initial.y.len();
    let mut header = vec!["t".to_string()];
    for prefix in ["y", "lambda", "nu"] {
        header.extend((0..n).map(|j| format!("{prefix}{j}")));
    }
    let mut table = CsvTable {
        header,
        rows: Vec::new(),
    };
    for s in fine.samples() {
        let mut row = vec![Cell::Num(s.time)];
        row.extend(s.y.iter().chain(&s.lambda).chain(&s.nu).map(|&v| Cell::Num(v)));
        table.push(row);
    }
    Ok(table)
}
