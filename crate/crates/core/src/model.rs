//! Control problems, their finite-difference operators and the discrete sine
//! eigenbasis on which every propagator and preconditioner is built.
//!
//! The spatial grid is the interior of (0, 1): `x_j = j/(r+1)`, `j = 1..=r`,
//! with homogeneous Dirichlet values left out of the state vector.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat,
    Wave,
}

impl ProblemKind {
    /// Length of the state vector for `r` spatial unknowns.
    pub fn state_dim(self, r: usize) -> usize {
        match self {
            ProblemKind::Heat => r,
            ProblemKind::Wave => 2 * r,
        }
    }
}

/// Linear-quadratic control problem `min ½‖y(T) − y_tg‖² + (α/2)∫‖ν‖²`
/// subject to `y' = L y + B ν`, `y(0) = y_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem<S> {
    kind: ProblemKind,
    r: usize,
    horizon: S,
    alpha: S,
    y_in: Vec<S>,
    y_tg: Vec<S>,
}

impl<S: Real> ControlProblem<S> {
    pub fn new(
        kind: ProblemKind,
        r: usize,
        horizon: S,
        alpha: S,
        y_in: Vec<S>,
        y_tg: Vec<S>,
    ) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidDimension { what: "r", value: r });
        }
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon T must be positive, got {horizon}")));
        }
        if !(alpha > S::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let dim = kind.state_dim(r);
        for v in [&y_in, &y_tg] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            kind,
            r,
            horizon,
            alpha,
            y_in,
            y_tg,
        })
    }

    /// The benchmark setup: a centred Gaussian initial state steered toward
    /// two half-height Gaussians. Wave states carry zero initial velocity and
    /// zero target velocity.
    pub fn gaussian_benchmark(kind: ProblemKind, r: usize, horizon: S, alpha: S) -> Result<Self> {
        Self::benchmark_with_target(kind, r, horizon, alpha, Profile::GaussTarget)
    }

    pub fn benchmark_with_target(
        kind: ProblemKind,
        r: usize,
        horizon: S,
        alpha: S,
        target: Profile,
    ) -> Result<Self> {
        let init = sample_profile(Profile::GaussInit, r);
        let tg = sample_profile(target, r);
        let (y_in, y_tg) = match kind {
            ProblemKind::Heat => (init, tg),
            ProblemKind::Wave => {
                let pad = |mut v: Vec<S>| {
                    v.resize(2 * r, S::zero());
                    v
                };
                (pad(init), pad(tg))
            }
        };
        Self::new(kind, r, horizon, alpha, y_in, y_tg)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn y_in(&self) -> &[S] {
        &self.y_in
    }

    pub fn y_tg(&self) -> &[S] {
        &self.y_tg
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim(self.r)
    }
}

/// Uniform decomposition of `(0, T)` into `L` sub-intervals of `N` fine steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<S> {
    sub_intervals: usize,
    fine_steps: usize,
    horizon: S,
    coarse_step: S,
    fine_step: S,
    interfaces: Vec<S>,
}

impl<S: Real> TimeGrid<S> {
    pub fn new(horizon: S, sub_intervals: usize, fine_steps: usize) -> Result<Self> {
        if sub_intervals == 0 {
            return Err(Error::InvalidDimension {
                what: "L",
                value: sub_intervals,
            });
        }
        if fine_steps == 0 {
            return Err(Error::InvalidDimension {
                what: "N",
                value: fine_steps,
            });
        }
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon T must be positive, got {horizon}")));
        }
        let l = S::from_count(sub_intervals);
        let coarse_step = horizon / l;
        let fine_step = horizon / (l * S::from_count(fine_steps));
        let mut interfaces: Vec<S> = (0..=sub_intervals)
            .map(|k| S::from_count(k) * coarse_step)
            .collect();
        interfaces[sub_intervals] = horizon;
        Ok(Self {
            sub_intervals,
            fine_steps,
            horizon,
            coarse_step,
            fine_step,
            interfaces,
        })
    }

    /// `L`
    pub fn sub_intervals(&self) -> usize {
        self.sub_intervals
    }

    /// `N`
    pub fn fine_steps(&self) -> usize {
        self.fine_steps
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// `ΔT = T/L`
    pub fn coarse_step(&self) -> S {
        self.coarse_step
    }

    /// `δt = T/(L·N)`
    pub fn fine_step(&self) -> S {
        self.fine_step
    }

    /// `T_0 = 0, …, T_L = T`
    pub fn interfaces(&self) -> &[S] {
        &self.interfaces
    }

    /// `T_ℓ` for `ℓ = 0..=L`.
    pub fn interface(&self, ell: usize) -> S {
        self.interfaces[ell]
    }

    pub(crate) fn check_sub_interval(&self, ell: usize) -> Result<()> {
        if ell == 0 || ell > self.sub_intervals {
            Err(Error::IndexOutOfRange {
                index: ell,
                max: self.sub_intervals,
            })
        } else {
            Ok(())
        }
    }
}

/// Matrix-free linear map on `R^dim`.
pub trait LinearOperator<S: Real>: Sync {
    fn dim(&self) -> usize;

    /// `y ← A x`
    fn apply_into(&self, x: &[S], y: &mut [S]);

    fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<S: Real, T: LinearOperator<S> + ?Sized> LinearOperator<S> for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        (**self).apply_into(x, y)
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<S: Real, F: Fn(&[S], &mut [S]) + Sync> LinearOperator<S> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        (self.f)(x, y)
    }
}

/// Second-order centred Dirichlet Laplacian `Δ_h` on `r` interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatOperator<S> {
    r: usize,
    inv_h2: S,
}

impl<S: Real> HeatOperator<S> {
    pub fn r(&self) -> usize {
        self.r
    }

    /// `1/h² = (r+1)²`
    pub fn inv_h2(&self) -> S {
        self.inv_h2
    }

    pub fn diagonal(&self) -> S {
        -(S::one() + S::one()) * self.inv_h2
    }

    pub fn off_diagonal(&self) -> S {
        self.inv_h2
    }
}

impl<S: Real> LinearOperator<S> for HeatOperator<S> {
    fn dim(&self) -> usize {
        self.r
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        laplacian_apply(self.inv_h2, x, y);
    }
}

pub(crate) fn laplacian_apply<S: Real>(inv_h2: S, x: &[S], y: &mut [S]) {
    let r = x.len();
    let two = S::one() + S::one();
    for j in 0..r {
        let left = if j > 0 { x[j - 1] } else { S::zero() };
        let right = if j + 1 < r { x[j + 1] } else { S::zero() };
        y[j] = (left - two * x[j] + right) * inv_h2;
    }
}

/// First-order form of the semi-discrete wave equation:
/// `L = [[0, I], [Δ_h, 0]]` acting on `[u; v]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOperator<S> {
    laplacian: HeatOperator<S>,
}

impl<S: Real> WaveOperator<S> {
    pub fn laplacian(&self) -> &HeatOperator<S> {
        &self.laplacian
    }
}

impl<S: Real> LinearOperator<S> for WaveOperator<S> {
    fn dim(&self) -> usize {
        2 * self.laplacian.r
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        let r = self.laplacian.r;
        let (u, v) = x.split_at(r);
        let (yu, yv) = y.split_at_mut(r);
        yu.copy_from_slice(v);
        laplacian_apply(self.laplacian.inv_h2, u, yv);
    }
}

pub fn build_heat_operator<S: Real>(r: usize) -> Result<HeatOperator<S>> {
    if r == 0 {
        return Err(Error::InvalidDimension { what: "r", value: r });
    }
    let np1 = S::from_count(r + 1);
    Ok(HeatOperator {
        r,
        inv_h2: np1 * np1,
    })
}

pub fn build_wave_operator<S: Real>(r: usize) -> Result<WaveOperator<S>> {
    Ok(WaveOperator {
        laplacian: build_heat_operator(r)?,
    })
}

/// `σ_k = −4(r+1)² sin²(kπ/(2(r+1)))`
pub fn laplacian_eigenvalue<S: Real>(r: usize, k: usize) -> S {
    let np1 = S::from_count(r + 1);
    let s = (S::from_count(k) * S::PI() / (np1 + np1)).sin();
    -(S::lit(4.0)) * np1 * np1 * s * s
}

/// `sin(mπ/(r+1))` with the integer argument reduced modulo `2(r+1)` first.
fn sine_node<S: Real>(m: usize, r: usize) -> S {
    let period = 2 * (r + 1);
    let reduced = m % period;
    (S::from_count(reduced) * S::PI() / S::from_count(r + 1)).sin()
}

/// Eigenpair `(σ_k, v_k)` of `Δ_h` with `v_k` of unit Euclidean norm.
pub fn laplacian_eigenpair<S: Real>(r: usize, k: usize) -> Result<(S, Vec<S>)> {
    if r == 0 {
        return Err(Error::InvalidDimension { what: "r", value: r });
    }
    if k == 0 || k > r {
        return Err(Error::IndexOutOfRange { index: k, max: r });
    }
    let norm = (S::lit(2.0) / S::from_count(r + 1)).sqrt();
    let v = (1..=r).map(|j| norm * sine_node::<S>(j * k, r)).collect();
    Ok((laplacian_eigenvalue(r, k), v))
}

/// Eigenvalues of `Δ_h` and the orthonormal discrete sine transform that
/// diagonalizes it.
///
/// The transform matrix `S_{jk} = √(2/(r+1)) sin(jkπ/(r+1))` is symmetric
/// and orthogonal, so the same dense product serves as forward and inverse
/// transform.
#[derive(Debug, Clone)]
pub struct SpectralBasis<S> {
    r: usize,
    eigvals: Vec<S>,
    sine: Vec<S>,
}

impl<S: Real> SpectralBasis<S> {
    pub fn new(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidDimension { what: "r", value: r });
        }
        let norm = (S::lit(2.0) / S::from_count(r + 1)).sqrt();
        let mut sine = Vec::with_capacity(r * r);
        for j in 1..=r {
            for k in 1..=r {
                sine.push(norm * sine_node::<S>(j * k, r));
            }
        }
        let eigvals = (1..=r).map(|k| laplacian_eigenvalue(r, k)).collect();
        Ok(Self { r, eigvals, sine })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Mesh width `h = 1/(r+1)`.
    pub fn h(&self) -> S {
        S::one() / S::from_count(self.r + 1)
    }

    /// `σ_1 > σ_2 > … > σ_r`, all negative.
    pub fn eigvals(&self) -> &[S] {
        &self.eigvals
    }

    /// Coefficients of `v` in the eigenbasis.
    pub fn transform(&self, v: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.r];
        self.transform_into(v, &mut out);
        out
    }

    pub fn inverse_transform(&self, c: &[S]) -> Vec<S> {
        self.transform(c)
    }

    pub fn transform_into(&self, v: &[S], out: &mut [S]) {
        assert_eq!(v.len(), self.r, "transform dimension mismatch");
        for (j, o) in out.iter_mut().enumerate() {
            *o = crate::scalar::dot(&self.sine[j * self.r..(j + 1) * self.r], v);
        }
    }

    /// Transforms each length-`r` block of a stacked vector.
    pub fn transform_blocks(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len() % self.r, 0, "stacked vector is not a multiple of r");
        let mut out = vec![S::zero(); v.len()];
        for (src, dst) in v.chunks(self.r).zip(out.chunks_mut(self.r)) {
            self.transform_into(src, dst);
        }
        out
    }

    /// `g(Δ_h) v` for a scalar function `g` of the eigenvalue.
    pub fn apply_function(&self, v: &[S], g: impl Fn(S) -> S) -> Vec<S> {
        let mut c = self.transform(v);
        for (ck, &sigma) in c.iter_mut().zip(&self.eigvals) {
            *ck *= g(sigma);
        }
        self.inverse_transform(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `exp(−100(x − 1/2)²)`
    GaussInit,
    /// `½exp(−100(x − 1/4)²) + ½exp(−100(x − 3/4)²)`
    GaussTarget,
    /// `½exp(−100(x − 1/4)²) + ½(−100(x − 3/4)²)`, the target written
    /// without the second exponential.
    TargetPolynomial,
    Zero,
}

/// Samples a profile at the interior nodes `x_j = j/(r+1)`.
pub fn sample_profile<S: Real>(profile: Profile, r: usize) -> Vec<S> {
    let bump = |x: S, centre: f64| (S::lit(-100.0) * (x - S::lit(centre)).powi(2)).exp();
    let half = S::lit(0.5);
    (1..=r)
        .map(|j| {
            let x = S::from_count(j) / S::from_count(r + 1);
            match profile {
                Profile::GaussInit => bump(x, 0.5),
                Profile::GaussTarget => half * bump(x, 0.25) + half * bump(x, 0.75),
                Profile::TargetPolynomial => {
                    half * bump(x, 0.25) + half * (S::lit(-100.0) * (x - S::lit(0.75)).powi(2))
                }
                Profile::Zero => S::zero(),
            }
        })
        .collect()
}
