//! Spectral preconditioners for the heat and wave interface systems and the
//! tridiagonal solver behind them.
//!
//! Both preconditioners need one elliptic solve per application. At the
//! problem sizes handled here a direct Thomas factorization is exact and
//! cheaper than any multigrid cycle.

use crate::error::{Error, Result};
use crate::model::{laplacian_apply, LinearOperator};
use crate::scalar::Real;

/// Tridiagonal matrix with a precomputed LU (Thomas) factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem<S> {
    sub: Vec<S>,
    diag: Vec<S>,
    sup: Vec<S>,
    // modified super-diagonal and pivots of the forward sweep
    c_star: Vec<S>,
    pivots: Vec<S>,
}

impl<S: Real> TridiagonalSystem<S> {
    /// `sub` and `sup` have length `n − 1`; `sub[i]` sits at `(i+1, i)`.
    pub fn new(sub: Vec<S>, diag: Vec<S>, sup: Vec<S>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidDimension { what: "n", value: 0 });
        }
        for v in [&sub, &sup] {
            if v.len() != n - 1 {
                return Err(Error::DimensionMismatch {
                    expected: n - 1,
                    found: v.len(),
                });
            }
        }
        let scale = diag
            .iter()
            .chain(&sub)
            .chain(&sup)
            .fold(S::zero(), |m, &v| m.max(v.abs()));
        let tiny = scale * S::epsilon();
        let mut c_star = vec![S::zero(); n.saturating_sub(1)];
        let mut pivots = vec![S::zero(); n];
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i - 1] * c_star[i - 1]
            };
            if p.abs() <= tiny || !p.is_finite() {
                return Err(Error::Singular { row: i });
            }
            pivots[i] = p;
            if i + 1 < n {
                c_star[i] = sup[i] / p;
            }
        }
        Ok(Self {
            sub,
            diag,
            sup,
            c_star,
            pivots,
        })
    }

    /// Constant-coefficient system with `lower`, `main`, `upper` on the three bands.
    pub fn toeplitz(n: usize, lower: S, main: S, upper: S) -> Result<Self> {
        let m = n.saturating_sub(1);
        Self::new(vec![lower; m], vec![main; n], vec![upper; m])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn solve(&self, f: &[S]) -> Result<Vec<S>> {
        let n = self.dim();
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.len(),
            });
        }
        let mut x = vec![S::zero(); n];
        x[0] = f[0] / self.pivots[0];
        for i in 1..n {
            x[i] = (f[i] - self.sub[i - 1] * x[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.c_star[i] * next;
        }
        Ok(x)
    }

    /// `y = T x`
    pub fn multiply(&self, x: &[S]) -> Vec<S> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }
}

pub fn tridiag_solve<S: Real>(sys: &TridiagonalSystem<S>, f: &[S]) -> Result<Vec<S>> {
    sys.solve(f)
}

/// `M̂⁻¹ = L(L − I/(2α))⁻¹` for the heat interface system.
///
/// Mode `k` is scaled by `σ_k/(σ_k − 1/(2α))`, which approximates the
/// inverse of the continuous symbol `1 + (e^{2σT} − 1)/(2ασ)` for large `|σ|T`.
#[derive(Debug, Clone)]
pub struct HeatPreconditioner<S> {
    inv_h2: S,
    shifted: TridiagonalSystem<S>,
    alpha: S,
}

impl<S: Real> HeatPreconditioner<S> {
    pub fn new(r: usize, alpha: S) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidDimension { what: "r", value: r });
        }
        if !(alpha > S::zero()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let np1 = S::from_count(r + 1);
        let inv_h2 = np1 * np1;
        let two = S::lit(2.0);
        let shifted = TridiagonalSystem::toeplitz(r, inv_h2, -two * inv_h2 - S::one() / (two * alpha), inv_h2)?;
        Ok(Self {
            inv_h2,
            shifted,
            alpha,
        })
    }

    /// Eigenvalue of `M̂⁻¹` on the Laplacian eigenvector with eigenvalue `sigma`.
    pub fn mode_factor(&self, sigma: S) -> S {
        sigma / (sigma - S::one() / (S::lit(2.0) * self.alpha))
    }
}

impl<S: Real> LinearOperator<S> for HeatPreconditioner<S> {
    fn dim(&self) -> usize {
        self.shifted.dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        let solved = self
            .shifted
            .solve(x)
            .expect("heat preconditioner dimension mismatch");
        laplacian_apply(self.inv_h2, &solved, y);
    }
}

pub fn heat_precond_apply<S: Real>(v: &[S], alpha: S) -> Result<Vec<S>> {
    Ok(HeatPreconditioner::new(v.len(), alpha)?.apply(v))
}

/// Coefficients of the block-diagonal wave preconditioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondParams<S> {
    pub a: S,
    pub b: S,
    pub c: S,
}

impl<S: Real> PrecondParams<S> {
    /// `a = T`, `b = 2α`, `c = 1/(2α + T)`.
    pub fn new(horizon: S, alpha: S) -> Result<Self> {
        let two_alpha = S::lit(2.0) * alpha;
        Self::custom(horizon, two_alpha, S::one() / (two_alpha + horizon))
    }

    pub fn custom(a: S, b: S, c: S) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "preconditioner parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { a, b, c })
    }
}

/// `M̂⁻¹ = I − blkdiag((aI + bA)⁻¹, cI)` with `A = −Δ_h`.
#[derive(Debug, Clone)]
pub struct WavePreconditioner<S> {
    params: PrecondParams<S>,
    elliptic: TridiagonalSystem<S>,
}

impl<S: Real> WavePreconditioner<S> {
    pub fn new(r: usize, params: PrecondParams<S>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidDimension { what: "r", value: r });
        }
        let np1 = S::from_count(r + 1);
        let inv_h2 = np1 * np1;
        let off = -params.b * inv_h2;
        let main = params.a + S::lit(2.0) * params.b * inv_h2;
        Ok(Self {
            params,
            elliptic: TridiagonalSystem::toeplitz(r, off, main, off)?,
        })
    }

    pub fn params(&self) -> PrecondParams<S> {
        self.params
    }

    /// Eigenvalues of `M̂⁻¹` on mode `k` of each block, given `σ_k < 0`
    /// (so `A` has eigenvalue `−σ_k`).
    pub fn mode_factors(&self, sigma: S) -> (S, S) {
        let p = self.params;
        (S::one() - S::one() / (p.a - p.b * sigma), S::one() - p.c)
    }
}

impl<S: Real> LinearOperator<S> for WavePreconditioner<S> {
    fn dim(&self) -> usize {
        2 * self.elliptic.dim()
    }

    fn apply_into(&self, x: &[S], y: &mut [S]) {
        let r = self.elliptic.dim();
        let solved = self
            .elliptic
            .solve(&x[..r])
            .expect("wave preconditioner dimension mismatch");
        for i in 0..r {
            y[i] = x[i] - solved[i];
            y[r + i] = x[r + i] - self.params.c * x[r + i];
        }
    }
}

pub fn wave_precond_apply<S: Real>(v: &[S], params: PrecondParams<S>) -> Result<Vec<S>> {
    if v.is_empty() || v.len() % 2 != 0 {
        return Err(Error::InvalidDimension {
            what: "wave state",
            value: v.len(),
        });
    }
    Ok(WavePreconditioner::new(v.len() / 2, params)?.apply(v))
}
