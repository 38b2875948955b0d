//! Restarted GMRES with left, right or no preconditioning.

use crate::error::{Error, Result};
use crate::model::LinearOperator;
use crate::scalar::{axpy, dot, norm2, Real};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondSide {
    /// Solve `A M⁻¹ u = b`, `x = M⁻¹u`; stops on the true residual.
    Right,
    /// Solve `M⁻¹A x = M⁻¹b`; stops on the preconditioned residual.
    Left,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovConfig<S> {
    /// Inner steps per cycle; `None` runs full GMRES.
    pub restart: Option<usize>,
    /// Relative residual target.
    pub tol: S,
    /// Budget of inner steps summed over all cycles.
    pub maxit: usize,
    pub side: PrecondSide,
}

impl<S: Real> KrylovConfig<S> {
    pub fn new(restart: Option<usize>, tol: S, maxit: usize, side: PrecondSide) -> Result<Self> {
        let cfg = Self {
            restart,
            tol,
            maxit,
            side,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > S::zero() && self.tol < S::one()) {
            return Err(Error::InvalidParameter(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidParameter("maxit must be at least 1".into()));
        }
        if self.restart == Some(0) {
            return Err(Error::InvalidParameter("restart must be at least 1".into()));
        }
        Ok(())
    }
}

impl<S: Real> Default for KrylovConfig<S> {
    fn default() -> Self {
        Self {
            restart: None,
            tol: S::lit(1e-8),
            maxit: 500,
            side: PrecondSide::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Initial relative residual followed by one estimate per inner step.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Recomputed from the returned iterate.
    pub final_residual: f64,
    /// An Arnoldi step produced a zero vector while the residual was still above `tol`.
    pub breakdown: bool,
    pub wall_seconds: f64,
}

struct Givens<S> {
    c: S,
    s: S,
}

impl<S: Real> Givens<S> {
    fn new(a: S, b: S) -> (Self, S) {
        if b == S::zero() {
            return (Self { c: S::one(), s: S::zero() }, a);
        }
        let rho = a.hypot(b);
        (Self { c: a / rho, s: b / rho }, rho)
    }

    fn apply(&self, x: S, y: S) -> (S, S) {
        (self.c * x + self.s * y, -self.s * x + self.c * y)
    }
}

/// Solves `A x = b` starting from `x0` (zero when absent).
///
/// `precond` applies `M⁻¹` and is required unless `config.side` is
/// [`PrecondSide::None`], in which case it is ignored. Every restart cycle
/// begins from an explicitly recomputed residual, so the reported
/// `final_residual` always belongs to the returned iterate.
pub fn gmres<S: Real>(
    a: &dyn LinearOperator<S>,
    b: &[S],
    x0: Option<&[S]>,
    config: &KrylovConfig<S>,
    precond: Option<&dyn LinearOperator<S>>,
) -> Result<(Vec<S>, KrylovReport)> {
    let start = Instant::now();
    config.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let precond = match config.side {
        PrecondSide::None => None,
        _ => {
            let p = precond.ok_or_else(|| {
                Error::InvalidParameter("preconditioned GMRES needs a preconditioner".into())
            })?;
            if p.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
            Some(p)
        }
    };
    let left = config.side == PrecondSide::Left;
    let right = config.side == PrecondSide::Right;

    let mut x = match x0 {
        Some(v) if v.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            })
        }
        Some(v) => v.to_vec(),
        None => vec![S::zero(); n],
    };

    let apply_pre = |v: &[S]| -> Vec<S> {
        match precond {
            Some(p) => p.apply(v),
            None => v.to_vec(),
        }
    };
    // residual measured in the norm the stopping test uses
    let residual = |x: &[S]| -> Vec<S> {
        let ax = a.apply(x);
        let r: Vec<S> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        if left {
            apply_pre(&r)
        } else {
            r
        }
    };
    let bnorm = if left { norm2(&apply_pre(b)) } else { norm2(b) };

    let mut report = KrylovReport {
        iterations: 0,
        residuals: Vec::new(),
        converged: false,
        final_residual: 0.0,
        breakdown: false,
        wall_seconds: 0.0,
    };
    if bnorm == S::zero() {
        x.iter_mut().for_each(|v| *v = S::zero());
        report.residuals.push(0.0);
        report.converged = true;
        report.wall_seconds = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }

    let reorth_threshold = S::lit(1e-8);
    let mut final_rel;
    loop {
        let r0 = residual(&x);
        let beta = norm2(&r0);
        final_rel = beta / bnorm;
        if report.residuals.is_empty() {
            report.residuals.push(final_rel.to_f64_lossy());
        }
        if final_rel <= config.tol || report.iterations >= config.maxit || report.breakdown {
            break;
        }

        let cycle = config
            .restart
            .unwrap_or(usize::MAX)
            .min(config.maxit - report.iterations)
            .min(n);
        let mut basis: Vec<Vec<S>> = Vec::with_capacity(cycle + 1);
        basis.push(r0.iter().map(|&v| v / beta).collect());
        // columns of the triangularized Hessenberg matrix
        let mut hcols: Vec<Vec<S>> = Vec::with_capacity(cycle);
        let mut rotations: Vec<Givens<S>> = Vec::with_capacity(cycle);
        let mut g = vec![S::zero(); cycle + 1];
        g[0] = beta;
        let mut steps = 0;

        for j in 0..cycle {
            let z = if right { apply_pre(&basis[j]) } else { basis[j].clone() };
            let mut w = a.apply(&z);
            if left {
                w = apply_pre(&w);
            }
            let wnorm0 = norm2(&w);
            let mut h = vec![S::zero(); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                h[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let wnorm = norm2(&w);
            let worst = basis
                .iter()
                .map(|v| dot(v, &w).abs())
                .fold(S::zero(), S::max);
            if wnorm > S::zero() && worst / wnorm > reorth_threshold {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    h[i] += hij;
                    axpy(-hij, v, &mut w);
                }
            }
            let sub = norm2(&w);
            h[j + 1] = sub;

            for (i, rot) in rotations.iter().enumerate() {
                let (p, q) = rot.apply(h[i], h[i + 1]);
                h[i] = p;
                h[i + 1] = q;
            }
            let (rot, diag) = Givens::new(h[j], h[j + 1]);
            h[j] = diag;
            h[j + 1] = S::zero();
            let (gj, gj1) = rot.apply(g[j], g[j + 1]);
            g[j] = gj;
            g[j + 1] = gj1;
            rotations.push(rot);
            hcols.push(h);

            steps += 1;
            report.iterations += 1;
            let est = g[j + 1].abs() / bnorm;
            report.residuals.push(est.to_f64_lossy());

            let lucky = sub <= S::epsilon() * wnorm0.max(S::min_positive_value());
            if est <= config.tol || report.iterations >= config.maxit {
                break;
            }
            if lucky {
                // invariant subspace reached short of the target
                report.breakdown = true;
                break;
            }
            basis.push(w.iter().map(|&v| v / sub).collect());
        }

        // back substitution on the leading steps×steps triangle
        let mut y = vec![S::zero(); steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= hcols[k][i] * y[k];
            }
            y[i] = if hcols[i][i] != S::zero() {
                acc / hcols[i][i]
            } else {
                S::zero()
            };
        }
        let mut update = vec![S::zero(); n];
        for (v, &yi) in basis.iter().zip(&y) {
            axpy(yi, v, &mut update);
        }
        if right {
            update = apply_pre(&update);
        }
        axpy(S::one(), &update, &mut x);
    }

    report.final_residual = final_rel.to_f64_lossy();
    report.converged = final_rel <= config.tol;
    if report.converged {
        report.breakdown = false;
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}
