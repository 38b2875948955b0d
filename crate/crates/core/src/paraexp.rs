//! The interface system `M Λ_L + b = 0` and trajectory reconstruction.
//!
//! Sub-interval `ℓ` owns the adjoint `λ_ℓ`, the local inhomogeneous state
//! `w_ℓ` and the downstream homogeneous state `u_{ℓ+1}`. Its contribution to
//! `M Λ_L` is `e^{sL} G e^{sLᵀ} Λ_L` with `s = T_L − T_ℓ`. The `L`
//! contributions are computed concurrently and summed left to right, so the
//! result does not depend on the number of workers.

use crate::error::{Error, Result};
use crate::model::{ControlProblem, LinearOperator, ProblemKind, TimeGrid};
use crate::propagate::{QuadratureRule, SubintervalOperators};
use crate::scalar::{axpy, norm2, Real};
use rayon::prelude::*;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

/// Contiguous assignment of sub-intervals to a fixed pool of workers.
#[derive(Clone)]
pub struct ParallelPlan {
    worker_count: usize,
    sub_intervals: usize,
    chunk: usize,
    pool: Arc<rayon::ThreadPool>,
}

impl fmt::Debug for ParallelPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParallelPlan")
            .field("worker_count", &self.worker_count)
            .field("sub_intervals", &self.sub_intervals)
            .finish()
    }
}

impl ParallelPlan {
    pub fn new(worker_count: usize, sub_intervals: usize) -> Result<Self> {
        if worker_count == 0 {
            return Err(Error::InvalidDimension {
                what: "worker_count",
                value: worker_count,
            });
        }
        if sub_intervals == 0 {
            return Err(Error::InvalidDimension {
                what: "L",
                value: sub_intervals,
            });
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count)
            .thread_name(|i| format!("paraexp-worker-{i}"))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            worker_count,
            sub_intervals,
            chunk: sub_intervals.div_ceil(worker_count),
            pool: Arc::new(pool),
        })
    }

    /// One worker handling every sub-interval in order.
    pub fn serial(sub_intervals: usize) -> Result<Self> {
        Self::new(1, sub_intervals)
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    pub fn sub_intervals(&self) -> usize {
        self.sub_intervals
    }

    /// Worker index (0-based) owning sub-interval `ell` (1-based).
    pub fn worker_of(&self, ell: usize) -> usize {
        (ell - 1) / self.chunk
    }

    /// `assignment()[ℓ−1]` is the worker owning sub-interval `ℓ`.
    pub fn assignment(&self) -> Vec<usize> {
        (1..=self.sub_intervals).map(|ell| self.worker_of(ell)).collect()
    }

    fn owned(&self, worker: usize) -> Range<usize> {
        let lo = (worker * self.chunk).min(self.sub_intervals);
        let hi = ((worker + 1) * self.chunk).min(self.sub_intervals);
        lo + 1..hi + 1
    }

    /// Evaluates `f(ℓ)` for `ℓ = 1..=L` on the pool; results come back in `ℓ` order.
    pub fn map_ordered<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.worker_count == 1 {
            return (1..=self.sub_intervals).map(f).collect();
        }
        let chunks: Vec<Vec<T>> = self.pool.install(|| {
            (0..self.worker_count)
                .into_par_iter()
                .map(|w| self.owned(w).map(&f).collect())
                .collect()
        });
        chunks.into_iter().flatten().collect()
    }
}

/// State, adjoint and control at one fine time.
#[derive(Debug, Clone, PartialEq)]
pub struct FineSample<S> {
    pub time: S,
    pub y: Vec<S>,
    pub lambda: Vec<S>,
    /// `ν = Bᵀλ/α`
    pub nu: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTrajectory<S> {
    /// Sample at `t = 0`.
    pub initial: FineSample<S>,
    /// `segments[ℓ−1][n−1]` is the sample at `T_{ℓ−1} + nδt`.
    pub segments: Vec<Vec<FineSample<S>>>,
    /// `Σ δt·d_i·‖ν(t_{n,i})‖²` over every stage time.
    pub control_energy: S,
}

impl<S: Real> FineTrajectory<S> {
    pub fn samples(&self) -> impl Iterator<Item = &FineSample<S>> {
        std::iter::once(&self.initial).chain(self.segments.iter().flatten())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSolution<S> {
    /// `Λ_ℓ = λ(T_ℓ)` for `ℓ = 1..=L`.
    pub lambda: Vec<Vec<S>>,
    /// `Y_ℓ = y(T_ℓ)` for `ℓ = 1..=L`.
    pub y: Vec<Vec<S>>,
    pub fine: Option<FineTrajectory<S>>,
}

impl<S: Real> InterfaceSolution<S> {
    pub fn lambda_final(&self) -> &[S] {
        self.lambda.last().expect("at least one sub-interval")
    }

    pub fn y_final(&self) -> &[S] {
        self.y.last().expect("at least one sub-interval")
    }
}

/// `½‖y(T) − y_tg‖² + (α/2)∫‖ν‖²`, with the integral taken by the same
/// quadrature used to build the system.
pub fn objective<S: Real>(solution: &InterfaceSolution<S>, problem: &ControlProblem<S>) -> Result<S> {
    let fine = solution.fine.as_ref().ok_or(Error::MissingTrajectory)?;
    let miss: Vec<S> = solution
        .y_final()
        .iter()
        .zip(problem.y_tg())
        .map(|(&a, &b)| a - b)
        .collect();
    let half = S::lit(0.5);
    let d = norm2(&miss);
    Ok(half * d * d + half * problem.alpha() * fine.control_energy)
}

/// Matrix-free interface operator together with its problem data.
#[derive(Debug, Clone)]
pub struct InterfaceSystem<S> {
    problem: ControlProblem<S>,
    ops: SubintervalOperators<S>,
    plan: ParallelPlan,
}

impl<S: Real> InterfaceSystem<S> {
    pub fn new(
        problem: &ControlProblem<S>,
        grid: &TimeGrid<S>,
        rule: QuadratureRule,
        plan: ParallelPlan,
    ) -> Result<Self> {
        let ops = SubintervalOperators::new(problem, grid, rule)?;
        Self::from_operators(problem, ops, plan)
    }

    pub fn from_operators(
        problem: &ControlProblem<S>,
        ops: SubintervalOperators<S>,
        plan: ParallelPlan,
    ) -> Result<Self> {
        if plan.sub_intervals() != ops.grid().sub_intervals() {
            return Err(Error::DimensionMismatch {
                expected: ops.grid().sub_intervals(),
                found: plan.sub_intervals(),
            });
        }
        Ok(Self {
            problem: problem.clone(),
            ops,
            plan,
        })
    }

    /// The same system driven by a different plan.
    pub fn with_plan(&self, plan: ParallelPlan) -> Result<Self> {
        Self::from_operators(&self.problem, self.ops.clone(), plan)
    }

    pub fn problem(&self) -> &ControlProblem<S> {
        &self.problem
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        self.ops.grid()
    }

    pub fn operators(&self) -> &SubintervalOperators<S> {
        &self.ops
    }

    pub fn plan(&self) -> &ParallelPlan {
        &self.plan
    }

    pub fn dim(&self) -> usize {
        self.problem.state_dim()
    }

    /// `b = y_tg − P_1(T_L)y_in`
    pub fn assemble_rhs(&self) -> Vec<S> {
        let mut c = self.ops.to_modal(self.problem.y_in());
        self.ops.propagator().forward(self.grid().horizon(), &mut c);
        let free = self.ops.from_modal(&c);
        self.problem
            .y_tg()
            .iter()
            .zip(&free)
            .map(|(&tg, &f)| tg - f)
            .collect()
    }

    /// `M Λ_L = Λ_L + (1/α)[R_L(T_L) + Σ_{j=2}^{L} P_j(T_L)R_{j−1}(T_{j−1})]Λ_L`
    pub fn matvec(&self, lambda: &[S]) -> Result<Vec<S>> {
        if lambda.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: lambda.len(),
            });
        }
        let mut out = vec![S::zero(); self.dim()];
        self.matvec_unchecked(lambda, &mut out);
        Ok(out)
    }

    fn matvec_unchecked(&self, lambda: &[S], out: &mut [S]) {
        let modal = self.ops.to_modal(lambda);
        let terms = self.plan.map_ordered(|ell| {
            let mut x = modal.clone();
            self.ops.modal_term(ell, &mut x);
            x
        });
        let mut sum = vec![S::zero(); modal.len()];
        for term in &terms {
            axpy(S::one(), term, &mut sum);
        }
        let back = self.ops.from_modal(&sum);
        let inv_alpha = S::one() / self.problem.alpha();
        for ((o, &l), &s) in out.iter_mut().zip(lambda).zip(&back) {
            *o = l + inv_alpha * s;
        }
    }

    /// Mode-`k` block of `M` in the eigenbasis, with `k` counted from 0.
    /// Heat uses only the `[0][0]` entry.
    pub fn mode_block(&self, k: usize) -> [[S; 2]; 2] {
        let g = self.ops.gramian().block(k);
        let inv_alpha = S::one() / self.problem.alpha();
        let grid = self.grid();
        let mut m = [[S::one(), S::zero()], [S::zero(), S::one()]];
        if self.problem.kind() == ProblemKind::Heat {
            m[1][1] = S::zero();
        }
        let sigma = self.ops.basis().eigvals()[k];
        for ell in 1..=grid.sub_intervals() {
            let s = grid.horizon() - grid.interface(ell);
            let p = forward_block(self.problem.kind(), sigma, s);
            // P G Pᵀ
            let mut pg = [[S::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    pg[i][j] = p[i][0] * g[0][j] + p[i][1] * g[1][j];
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += inv_alpha * (pg[i][0] * p[j][0] + pg[i][1] * p[j][1]);
                }
            }
        }
        m
    }

    /// Interface values `Λ_ℓ`, `Y_ℓ` and, on request, the fine trajectory.
    pub fn reconstruct(&self, lambda_final: &[S], emit_fine: bool) -> Result<InterfaceSolution<S>> {
        if lambda_final.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: lambda_final.len(),
            });
        }
        let grid = self.grid();
        let horizon = grid.horizon();
        let prop = self.ops.propagator();
        let neg_inv_alpha = -S::one() / self.problem.alpha();
        let lam_hat = self.ops.to_modal(lambda_final);
        let y_in_hat = self.ops.to_modal(self.problem.y_in());

        // Λ_ℓ and the local inhomogeneous endpoints w_ℓ(T_ℓ)
        let local: Vec<(Vec<S>, Vec<S>)> = self.plan.map_ordered(|ell| {
            let mut lam = lam_hat.clone();
            prop.adjoint(horizon - grid.interface(ell), &mut lam);
            let mut w = lam.clone();
            self.ops.gramian().apply(&mut w);
            w.iter_mut().for_each(|x| *x *= neg_inv_alpha);
            (lam, w)
        });

        // Y_ℓ = u_1(T_ℓ) + Σ_{j<ℓ} u_{j+1}(T_ℓ) + w_ℓ(T_ℓ)
        let y_hat: Vec<Vec<S>> = self.plan.map_ordered(|ell| {
            let t = grid.interface(ell);
            let mut y = y_in_hat.clone();
            prop.forward(t, &mut y);
            for (j, (_, w)) in local.iter().enumerate().take(ell) {
                let mut u = w.clone();
                prop.forward(t - grid.interface(j + 1), &mut u);
                axpy(S::one(), &u, &mut y);
            }
            y
        });

        let fine = if emit_fine {
            Some(self.fine_trajectory(&lam_hat, &y_in_hat, &y_hat))
        } else {
            None
        };
        Ok(InterfaceSolution {
            lambda: local.iter().map(|(l, _)| self.ops.from_modal(l)).collect(),
            y: y_hat.iter().map(|y| self.ops.from_modal(y)).collect(),
            fine,
        })
    }

    fn sample(&self, time: S, y_hat: &[S], lam_hat: &[S]) -> FineSample<S> {
        let lambda = self.ops.from_modal(lam_hat);
        let inv_alpha = S::one() / self.problem.alpha();
        let nu = control_part(self.problem.kind(), &lambda)
            .iter()
            .map(|&l| l * inv_alpha)
            .collect();
        FineSample {
            time,
            y: self.ops.from_modal(y_hat),
            lambda,
            nu,
        }
    }

    fn fine_trajectory(&self, lam_hat: &[S], y_in_hat: &[S], y_hat: &[Vec<S>]) -> FineTrajectory<S> {
        let grid = self.grid();
        let horizon = grid.horizon();
        let dt = grid.fine_step();
        let prop = self.ops.propagator();
        let kind = self.problem.kind();
        let rule = self.ops.rule();
        let nodes: Vec<S> = rule.nodes();
        let weights: Vec<S> = rule.weights();
        let alpha = self.problem.alpha();
        let neg_inv_alpha = -S::one() / alpha;

        let adjoint_at = |t: S| {
            let mut l = lam_hat.to_vec();
            prop.adjoint(horizon - t, &mut l);
            l
        };

        let segments: Vec<(Vec<FineSample<S>>, S)> = self.plan.map_ordered(|ell| {
            let t0 = grid.interface(ell - 1);
            let mut w = if ell == 1 {
                y_in_hat.to_vec()
            } else {
                y_hat[ell - 2].clone()
            };
            let mut energy = S::zero();
            let mut out = Vec::with_capacity(grid.fine_steps());
            for n in 1..=grid.fine_steps() {
                prop.forward(dt, &mut w);
                for (&c, &d) in nodes.iter().zip(&weights) {
                    let t_stage = t0 + (S::from_count(n - 1) + c) * dt;
                    let mut src = adjoint_at(t_stage);
                    let nu = norm2(control_part(kind, &src)) / alpha;
                    energy += dt * d * nu * nu;
                    prop.forward_control((S::one() - c) * dt, &mut src);
                    axpy(neg_inv_alpha * dt * d, &src, &mut w);
                }
                let t = t0 + S::from_count(n) * dt;
                out.push(self.sample(t, &w, &adjoint_at(t)));
            }
            (out, energy)
        });

        let control_energy = segments.iter().fold(S::zero(), |acc, (_, e)| acc + *e);
        FineTrajectory {
            initial: self.sample(S::zero(), y_in_hat, &adjoint_at(S::zero())),
            segments: segments.into_iter().map(|(s, _)| s).collect(),
            control_energy,
        }
    }
}

/// `Bᵀx`: the whole vector for heat, the velocity block for wave.
fn control_part<S>(kind: ProblemKind, x: &[S]) -> &[S] {
    match kind {
        ProblemKind::Heat => x,
        ProblemKind::Wave => &x[x.len() / 2..],
    }
}

/// Mode block of `e^{sL}`.
pub(crate) fn forward_block<S: Real>(kind: ProblemKind, sigma: S, s: S) -> [[S; 2]; 2] {
    match kind {
        ProblemKind::Heat => [[(s * sigma).exp(), S::zero()], [S::zero(), S::zero()]],
        ProblemKind::Wave => {
            let w = (-sigma).sqrt();
            let (sn, cs) = (s * w).sin_cos();
            [[cs, sn / w], [-w * sn, cs]]
        }
    }
}

impl<S: Real> LinearOperator<S> for InterfaceSystem<S> {
    fn dim(&self) -> usize {
        self.problem.state_dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        assert_eq!(x.len(), self.dim(), "interface matvec dimension mismatch");
        self.matvec_unchecked(x, y);
    }
}
