//! Symbols, spectra and condition numbers of the interface system.
//!
//! Two independent routes are provided. The dense route materializes an
//! operator column by column and estimates its extreme eigenvalues or
//! singular values by power and inverse iteration. The exact route reads the
//! same numbers off the per-mode blocks, because `M`, `M̂⁻¹` and the
//! propagators are all diagonalized by the sine basis.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{ControlProblem, FnOperator, LinearOperator, ProblemKind, TimeGrid};
use crate::paraexp::{InterfaceSystem, ParallelPlan};
use crate::precond::{HeatPreconditioner, PrecondParams, WavePreconditioner};
use crate::propagate::QuadratureRule;
use crate::scalar::{dot, norm2, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest dimension [`materialize`] accepts by default.
pub const MATERIALIZE_CAP: usize = 1400;

/// Heat symbols at one eigenvalue `σ < 0` of the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTriple<S> {
    pub sigma: S,
    /// `1 + (e^{2σT} − 1)/(2ασ)`, the continuous symbol of `M`.
    pub f: S,
    /// `1 + (δt/α)(1 − e^{2Tσ})/(1 − e^{2δtσ})`, the implicit-Euler symbol of `M`.
    pub f_dt: S,
    /// `f_δt / f`
    pub psi0: S,
}

pub fn heat_symbol<S: Real>(sigma: S, horizon: S, alpha: S, dt: S) -> Result<SymbolTriple<S>> {
    if !(sigma < S::zero()) {
        return Err(Error::Domain(format!("heat symbol needs sigma < 0, got {sigma}")));
    }
    if !(dt > S::zero()) || !(alpha > S::zero()) || !(horizon > S::zero()) {
        return Err(Error::InvalidParameter("T, alpha and dt must be positive".into()));
    }
    let two = S::lit(2.0);
    let f = S::one() + (two * sigma * horizon).exp_m1() / (two * alpha * sigma);
    let f_dt = S::one() + dt / alpha * (two * horizon * sigma).exp_m1() / (two * dt * sigma).exp_m1();
    Ok(SymbolTriple {
        sigma,
        f,
        f_dt,
        psi0: f_dt / f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    /// `min_k ψ₀(σ_k)`
    pub mu_min: f64,
    /// `max_k ψ₀(σ_k)`
    pub mu_max: f64,
    /// Extremes of the exact eigenvalues `f_δt(σ_k)·σ_k/(σ_k − 1/(2α))` of `M M̂⁻¹`.
    pub mu_min_exact: f64,
    pub mu_max_exact: f64,
    /// Largest eigenvalue of the materialized `M M̂⁻¹`, computed when `r ≤ 200`.
    pub mu_max_matrix: Option<f64>,
    /// `1 + δt/α` with `δt = T/(L·N)`.
    pub bound: f64,
    /// `1 < mu_min` and `mu_max < bound`.
    pub holds: bool,
}

/// Evaluates the eigenvalue bound `1 < μ < 1 + δt/α` of the preconditioned
/// heat system with implicit-Euler quadrature.
pub fn theorem1_check(r: usize, l: usize, n: usize, horizon: f64, alpha: f64) -> Result<Theorem1Check> {
    let grid = TimeGrid::<f64>::new(horizon, l, n)?;
    let dt = grid.fine_step();
    let basis = crate::model::SpectralBasis::<f64>::new(r)?;
    let pre = HeatPreconditioner::<f64>::new(r, alpha)?;
    let mut out = Theorem1Check {
        mu_min: f64::INFINITY,
        mu_max: f64::NEG_INFINITY,
        mu_min_exact: f64::INFINITY,
        mu_max_exact: f64::NEG_INFINITY,
        mu_max_matrix: None,
        bound: 1.0 + dt / alpha,
        holds: false,
    };
    for &sigma in basis.eigvals() {
        let s = heat_symbol(sigma, horizon, alpha, dt)?;
        let exact = s.f_dt * pre.mode_factor(sigma);
        out.mu_min = out.mu_min.min(s.psi0);
        out.mu_max = out.mu_max.max(s.psi0);
        out.mu_min_exact = out.mu_min_exact.min(exact);
        out.mu_max_exact = out.mu_max_exact.max(exact);
    }
    out.holds = out.mu_min > 1.0 && out.mu_max < out.bound;

    if r <= 200 {
        let problem = ControlProblem::gaussian_benchmark(ProblemKind::Heat, r, horizon, alpha)?;
        let system = InterfaceSystem::new(&problem, &grid, QuadratureRule::ImplicitEuler, ParallelPlan::serial(l)?)?;
        let product = preconditioned(&system, &pre);
        let dense = materialize(&product)?;
        out.mu_max_matrix = Some(spectrum_extremes(&dense, true)?.sigma_max);
    }
    Ok(out)
}

/// `x ↦ M(M̂⁻¹x)`
pub fn preconditioned<'a, S: Real>(
    system: &'a dyn LinearOperator<S>,
    precond: &'a dyn LinearOperator<S>,
) -> impl LinearOperator<S> + 'a {
    FnOperator::new(system.dim(), move |x: &[S], y: &mut [S]| {
        let z = precond.apply(x);
        system.apply_into(&z, y);
    })
}

/// Symbol of the continuous wave interface operator `M_c` on one eigenvalue
/// `σ > 0` of `A = −Δ_h`, and its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSymbol<S> {
    pub m11: S,
    /// Also `M₂₁`.
    pub m12: S,
    pub m22: S,
    /// `M₁₁M₂₂ − M₁₂²`
    pub h: S,
    /// `H⁻¹M₂₂`
    pub inv11: S,
    /// `−H⁻¹M₁₂`
    pub inv12: S,
    /// `H⁻¹M₁₁`
    pub inv22: S,
}

/// `M_c = I + (1/α)∫₀ᵀ e^{sL}BBᵀe^{sLᵀ} ds` restricted to one mode:
///
/// ```text
/// M₁₁ = 1 + T/(2ασ) − sin(2Tω)/(4αω³)
/// M₁₂ = (1 − cos(2Tω))/(4ασ)
/// M₂₂ = 1 + T/(2α) + sin(2Tω)/(4αω)
/// ```
/// with `ω = √σ`.
pub fn wave_symbol_mc<S: Real>(sigma: S, horizon: S, alpha: S) -> Result<WaveSymbol<S>> {
    if !(sigma > S::zero()) {
        return Err(Error::Domain(format!("wave symbol needs sigma > 0, got {sigma}")));
    }
    let one = S::one();
    let two = S::lit(2.0);
    let four = S::lit(4.0);
    let w = sigma.sqrt();
    let (s2, c2) = (two * horizon * w).sin_cos();
    let m11 = one + horizon / (two * alpha * sigma) - s2 / (four * alpha * w * sigma);
    let m12 = (one - c2) / (four * alpha * sigma);
    let m22 = one + horizon / (two * alpha) + s2 / (four * alpha * w);
    let h = m11 * m22 - m12 * m12;
    Ok(WaveSymbol {
        m11,
        m12,
        m22,
        h,
        inv11: m22 / h,
        inv12: -m12 / h,
        inv22: m11 / h,
    })
}

/// Dense matrix whose `j`-th column is `op(e_j)`.
pub fn materialize<S: Real>(op: &dyn LinearOperator<S>) -> Result<DenseMatrix<S>> {
    materialize_with_cap(op, MATERIALIZE_CAP)
}

pub fn materialize_with_cap<S: Real>(op: &dyn LinearOperator<S>, cap: usize) -> Result<DenseMatrix<S>> {
    let n = op.dim();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let columns: Vec<Vec<S>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            op.apply(&e)
        })
        .collect();
    Ok(DenseMatrix::from_columns(&columns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    ExactSymbol,
    DensePowerIteration,
}

/// Extreme eigenvalues (symmetric input) or singular values (general input).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub cond: f64,
    pub method: SpectrumMethod,
}

impl SpectrumReport {
    fn new(sigma_min: f64, sigma_max: f64, method: SpectrumMethod) -> Self {
        let cond = if sigma_min == 0.0 {
            f64::INFINITY
        } else {
            (sigma_max / sigma_min).abs()
        };
        Self {
            sigma_min,
            sigma_max,
            cond,
            method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Relative eigen-residual that ends an iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20_000,
            seed: 0,
        }
    }
}

pub fn spectrum_extremes<S: Real>(m: &DenseMatrix<S>, symmetric: bool) -> Result<SpectrumReport> {
    spectrum_extremes_with(m, symmetric, SpectrumOptions::default())
}

/// Power iteration for the dominant end and inverse iteration (dense LU) for
/// the other. A singular matrix yields `sigma_min = 0` and infinite `cond`.
pub fn spectrum_extremes_with<S: Real>(
    m: &DenseMatrix<S>,
    symmetric: bool,
    opts: SpectrumOptions,
) -> Result<SpectrumReport> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidDimension { what: "n", value: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<S> = (0..n).map(|_| S::lit(rng.random_range(-1.0..1.0))).collect();
    let method = SpectrumMethod::DensePowerIteration;

    if symmetric {
        let top = iterate(&start, opts, |v| m.matvec(v));
        let lu = match m.lu() {
            Ok(lu) => lu,
            Err(Error::Singular { .. }) => return Ok(SpectrumReport::new(0.0, top, method)),
            Err(e) => return Err(e),
        };
        // Rayleigh quotient of M⁻¹ gives 1/λ_min
        let inv = iterate(&start, opts, |v| lu.solve(v));
        Ok(SpectrumReport::new(1.0 / inv, top, method))
    } else {
        let normal = m.transpose().matmul(m);
        let top = iterate(&start, opts, |v| normal.matvec(v));
        let lu = match m.lu() {
            Ok(lu) => lu,
            Err(Error::Singular { .. }) => return Ok(SpectrumReport::new(0.0, top.sqrt(), method)),
            Err(e) => return Err(e),
        };
        let inv = iterate(&start, opts, |v| lu.solve(&lu.solve_transpose(v)));
        Ok(SpectrumReport::new(1.0 / inv.sqrt(), top.sqrt(), method))
    }
}

/// Normalized power iteration with Rayleigh-quotient estimates of a
/// symmetric map. Stops once `‖Av − ρv‖ ≤ tol·|ρ|`, which bounds the error of
/// `ρ` by the same relative amount even when the leading eigenvalues are close.
fn iterate<S: Real>(start: &[S], opts: SpectrumOptions, apply: impl Fn(&[S]) -> Vec<S>) -> f64 {
    let mut v = start.to_vec();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = f64::NAN;
    for _ in 0..opts.max_iter {
        let w = apply(&v);
        let rho = dot(&v, &w);
        est = rho.to_f64_lossy();
        let resid: Vec<S> = w.iter().zip(&v).map(|(&a, &b)| a - rho * b).collect();
        let nw = norm2(&w);
        if nw == S::zero() {
            return 0.0;
        }
        if norm2(&resid).to_f64_lossy() <= opts.tol * est.abs() {
            return est;
        }
        v = w.iter().map(|&x| x / nw).collect();
    }
    est
}

/// Extreme eigenvalues (heat) or singular values (wave) of `M` or `M M̂⁻¹`
/// read off the per-mode blocks.
pub fn spectrum_exact<S: Real>(system: &InterfaceSystem<S>, precondition: bool) -> Result<SpectrumReport> {
    let problem = system.problem();
    let eig = system.operators().basis().eigvals().to_vec();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    match problem.kind() {
        ProblemKind::Heat => {
            let pre = HeatPreconditioner::new(problem.r(), problem.alpha())?;
            for (k, &sigma) in eig.iter().enumerate() {
                let mut v = system.mode_block(k)[0][0];
                if precondition {
                    v *= pre.mode_factor(sigma);
                }
                let v = v.to_f64_lossy();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        ProblemKind::Wave => {
            let pre = WavePreconditioner::new(problem.r(), PrecondParams::new(problem.horizon(), problem.alpha())?)?;
            for (k, &sigma) in eig.iter().enumerate() {
                let mut b = system.mode_block(k);
                if precondition {
                    let (up, low) = pre.mode_factors(sigma);
                    for row in b.iter_mut() {
                        row[0] *= up;
                        row[1] *= low;
                    }
                }
                let (smin, smax) = singular_values_2x2(b);
                lo = lo.min(smin.to_f64_lossy());
                hi = hi.max(smax.to_f64_lossy());
            }
        }
    }
    Ok(SpectrumReport::new(lo, hi, SpectrumMethod::ExactSymbol))
}

/// `(σ_min, σ_max)` of a 2×2 matrix.
pub(crate) fn singular_values_2x2<S: Real>(b: [[S; 2]; 2]) -> (S, S) {
    let [[a, bb], [c, d]] = b;
    let frob = a * a + bb * bb + c * c + d * d;
    let det = (a * d - bb * c).abs();
    let two = S::lit(2.0);
    let disc = ((frob - two * det) * (frob + two * det)).max(S::zero()).sqrt();
    let smax = ((frob + disc) / two).sqrt();
    let smin = if smax == S::zero() { S::zero() } else { det / smax };
    (smin, smax)
}
