//! Exponential propagators and the local quadrature operator of each
//! sub-interval.
//!
//! Everything on the hot path runs in the sine eigenbasis. A heat mode
//! evolves by the scalar factor `e^{sσ_k}`. A wave mode evolves by the 2×2
//! rotation-like block
//!
//! ```text
//! e^{sL_k} = [[cos sω, sin(sω)/ω], [−ω sin sω, cos sω]],   ω = √(−σ_k)
//! ```
//!
//! and its transpose for the adjoint.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{ControlProblem, LinearOperator, ProblemKind, SpectralBasis, TimeGrid};
use crate::scalar::{norm2, Real};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Quadrature applied to the source integral inside each fine step, with
/// exact exponential transport between stage times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadratureRule {
    #[serde(rename = "euler")]
    ImplicitEuler,
    #[serde(rename = "sdirk3")]
    Sdirk3,
}

impl QuadratureRule {
    /// Stage nodes `c_i ∈ (0, 1]`.
    pub fn nodes<S: Real>(self) -> Vec<S> {
        match self {
            QuadratureRule::ImplicitEuler => vec![S::one()],
            QuadratureRule::Sdirk3 => {
                let half = S::lit(0.5);
                let off = S::lit(3.0).sqrt() / S::lit(6.0);
                vec![half + off, half - off]
            }
        }
    }

    /// Stage weights `d_i`, summing to one.
    pub fn weights<S: Real>(self) -> Vec<S> {
        match self {
            QuadratureRule::ImplicitEuler => vec![S::one()],
            QuadratureRule::Sdirk3 => vec![S::lit(0.5), S::lit(0.5)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::ImplicitEuler => "euler",
            QuadratureRule::Sdirk3 => "sdirk3",
        }
    }
}

/// `e^{tL}v` for the heat operator.
pub fn expm_action_heat<S: Real>(basis: &SpectralBasis<S>, t: S, v: &[S]) -> Result<Vec<S>> {
    if t < S::zero() {
        return Err(Error::Domain(format!("heat propagation needs t >= 0, got {t}")));
    }
    check_len(v, basis.r())?;
    Ok(basis.apply_function(v, |sigma| (t * sigma).exp()))
}

/// `e^{sL}y` for the first-order wave operator; `s` may be negative.
pub fn expm_action_wave<S: Real>(basis: &SpectralBasis<S>, s: S, y: &[S]) -> Result<Vec<S>> {
    wave_action(basis, s, y, false)
}

/// `e^{sLᵀ}y`, the propagator of the adjoint wave equation run backward.
pub fn expm_action_wave_adjoint<S: Real>(basis: &SpectralBasis<S>, s: S, y: &[S]) -> Result<Vec<S>> {
    wave_action(basis, s, y, true)
}

fn wave_action<S: Real>(basis: &SpectralBasis<S>, s: S, y: &[S], adjoint: bool) -> Result<Vec<S>> {
    check_len(y, 2 * basis.r())?;
    let prop = ModalPropagator::new(ProblemKind::Wave, basis.eigvals().to_vec());
    let mut modal = basis.transform_blocks(y);
    if adjoint {
        prop.adjoint(s, &mut modal);
    } else {
        prop.forward(s, &mut modal);
    }
    Ok(basis.transform_blocks(&modal))
}

fn check_len<S>(v: &[S], expected: usize) -> Result<()> {
    if v.len() != expected {
        Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        })
    } else {
        Ok(())
    }
}

/// Outcome of a Krylov approximation of `e^{tA}v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiExpm<S> {
    pub value: Vec<S>,
    pub converged: bool,
    /// Larger of the residual estimate and the last correction, relative to `‖v‖`.
    pub error_estimate: S,
    pub krylov_dim: usize,
}

/// Approximates `e^{t·op}v` from an Arnoldi basis of dimension at most `m`.
///
/// After every step the small Hessenberg exponential is evaluated. The
/// iteration stops once both the residual-type estimate
/// `h_{j+1,j}·|t·[φ_1(tH_j)]_{j,1}|` and the change from the previous
/// approximation drop below `tol` (relative to `‖v‖`). A vanishing
/// subdiagonal means the Krylov space is invariant and the result is exact.
pub fn expm_action_arnoldi<S: Real>(
    op: &dyn LinearOperator<S>,
    t: S,
    v: &[S],
    m: usize,
    tol: S,
) -> Result<ArnoldiExpm<S>> {
    if m == 0 {
        return Err(Error::InvalidDimension { what: "m", value: m });
    }
    if !(tol > S::zero()) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let n = op.dim();
    check_len(v, n)?;
    let beta = norm2(v);
    if beta == S::zero() || t == S::zero() {
        return Ok(ArnoldiExpm {
            value: v.to_vec(),
            converged: true,
            error_estimate: S::zero(),
            krylov_dim: 0,
        });
    }
    let m = m.min(n);
    let mut basis: Vec<Vec<S>> = vec![v.iter().map(|&x| x / beta).collect()];
    let mut h = DenseMatrix::<S>::zeros(m + 1, m);
    let mut w = vec![S::zero(); n];
    let mut last = None;
    for j in 0..m {
        op.apply_into(&basis[j], &mut w);
        // two Gram-Schmidt passes keep the basis orthogonal for stiff operators
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let hij = crate::scalar::dot(q, &w);
                h[(i, j)] += hij;
                crate::scalar::axpy(-hij, q, &mut w);
            }
        }
        let sub = norm2(&w);
        h[(j + 1, j)] = sub;

        let k = j + 1;
        // exp([[tH_k, e_1], [0, 0]]) carries e^{tH_k}e_1 and φ_1(tH_k)e_1
        let aug = DenseMatrix::from_fn(k + 1, k + 1, |a, b| {
            if a < k && b < k {
                t * h[(a, b)]
            } else if a == 0 && b == k {
                S::one()
            } else {
                S::zero()
            }
        });
        let e = aug.expm()?;
        let col: Vec<S> = (0..k).map(|a| e[(a, 0)]).collect();
        let phi_last = e[(k - 1, k)];
        let scale = (0..k).fold(S::zero(), |acc, a| acc.max(h[(a, j)].abs())).max(sub);
        let breakdown = sub <= S::epsilon() * S::lit(16.0) * scale;
        let estimate = if breakdown {
            S::zero()
        } else {
            let step = match &last {
                Some((prev, _, _)) => {
                    let prev: &Vec<S> = prev;
                    let diff: Vec<S> = (0..k)
                        .map(|a| col[a] - prev.get(a).copied().unwrap_or(S::zero()))
                        .collect();
                    norm2(&diff)
                }
                None => S::infinity(),
            };
            (sub * (t * phi_last).abs()).max(step)
        };
        last = Some((col, estimate, k));
        if breakdown || estimate <= tol {
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|&x| x / sub).collect());
        }
    }
    let (col, estimate, k) = last.expect("at least one Arnoldi step");
    let mut value = vec![S::zero(); n];
    for (q, &c) in basis.iter().zip(&col).take(k) {
        crate::scalar::axpy(beta * c, q, &mut value);
    }
    Ok(ArnoldiExpm {
        value,
        converged: estimate <= tol,
        error_estimate: estimate,
        krylov_dim: k,
    })
}

/// Mode-wise exponentials in the sine eigenbasis.
///
/// Heat vectors hold `r` coefficients; wave vectors hold `[û; v̂]`.
#[derive(Debug, Clone)]
pub(crate) struct ModalPropagator<S> {
    kind: ProblemKind,
    sigma: Vec<S>,
    omega: Vec<S>,
}

impl<S: Real> ModalPropagator<S> {
    pub(crate) fn new(kind: ProblemKind, sigma: Vec<S>) -> Self {
        let omega = sigma.iter().map(|&s| (-s).sqrt()).collect();
        Self { kind, sigma, omega }
    }

    pub(crate) fn r(&self) -> usize {
        self.sigma.len()
    }

    /// `x ← e^{sL}x`
    pub(crate) fn forward(&self, s: S, x: &mut [S]) {
        self.propagate(s, x, false)
    }

    /// `x ← e^{sLᵀ}x`
    pub(crate) fn adjoint(&self, s: S, x: &mut [S]) {
        self.propagate(s, x, true)
    }

    fn propagate(&self, s: S, x: &mut [S], transpose: bool) {
        match self.kind {
            ProblemKind::Heat => {
                for (xk, &sig) in x.iter_mut().zip(&self.sigma) {
                    *xk *= (s * sig).exp();
                }
            }
            ProblemKind::Wave => {
                let r = self.r();
                let (u, v) = x.split_at_mut(r);
                for k in 0..r {
                    let w = self.omega[k];
                    let (sn, cs) = (s * w).sin_cos();
                    let (a, b) = (u[k], v[k]);
                    if transpose {
                        u[k] = cs * a - w * sn * b;
                        v[k] = sn / w * a + cs * b;
                    } else {
                        u[k] = cs * a + sn / w * b;
                        v[k] = -w * sn * a + cs * b;
                    }
                }
            }
        }
    }

    /// `x ← e^{sL}BBᵀx`
    pub(crate) fn forward_control(&self, s: S, x: &mut [S]) {
        if self.kind == ProblemKind::Wave {
            let r = self.r();
            x[..r].iter_mut().for_each(|u| *u = S::zero());
        }
        self.forward(s, x);
    }
}

/// Local Gramian `G = Σ_n Σ_i δt·d_i·e^{τL}BBᵀe^{τLᵀ}`, `τ = (N−n+1−c_i)δt`,
/// stored per mode. Heat stores one value per mode; wave stores the
/// symmetric block as `[g11, g12, g22]`.
#[derive(Debug, Clone)]
pub(crate) struct LocalGramian<S> {
    kind: ProblemKind,
    entries: Vec<S>,
}

impl<S: Real> LocalGramian<S> {
    fn build(kind: ProblemKind, sigma: &[S], grid: &TimeGrid<S>, rule: QuadratureRule) -> Self {
        let dt = grid.fine_step();
        let n_steps = grid.fine_steps();
        let nodes: Vec<S> = rule.nodes();
        let weights: Vec<S> = rule.weights();
        let stride = match kind {
            ProblemKind::Heat => 1,
            ProblemKind::Wave => 3,
        };
        let mut entries = vec![S::zero(); stride * sigma.len()];
        for (k, &sig) in sigma.iter().enumerate() {
            let omega = (-sig).sqrt();
            let mut acc = [S::zero(); 3];
            // n = 1 carries the longest transport and the smallest heat terms
            for n in 1..=n_steps {
                for (&c, &d) in nodes.iter().zip(&weights) {
                    let tau = (S::from_count(n_steps - n + 1) - c) * dt;
                    let wgt = dt * d;
                    match kind {
                        ProblemKind::Heat => acc[0] += wgt * (S::lit(2.0) * tau * sig).exp(),
                        ProblemKind::Wave => {
                            let (sn, cs) = (tau * omega).sin_cos();
                            let p = sn / omega;
                            acc[0] += wgt * p * p;
                            acc[1] += wgt * p * cs;
                            acc[2] += wgt * cs * cs;
                        }
                    }
                }
            }
            entries[stride * k..stride * (k + 1)].copy_from_slice(&acc[..stride]);
        }
        Self { kind, entries }
    }

    /// `x ← G x` in modal coordinates.
    pub(crate) fn apply(&self, x: &mut [S]) {
        match self.kind {
            ProblemKind::Heat => {
                for (xk, &g) in x.iter_mut().zip(&self.entries) {
                    *xk *= g;
                }
            }
            ProblemKind::Wave => {
                let r = self.entries.len() / 3;
                let (u, v) = x.split_at_mut(r);
                for k in 0..r {
                    let g = &self.entries[3 * k..3 * k + 3];
                    let (a, b) = (u[k], v[k]);
                    u[k] = g[0] * a + g[1] * b;
                    v[k] = g[1] * a + g[2] * b;
                }
            }
        }
    }

    /// Mode-`k` block `[[g11, g12], [g12, g22]]`; heat fills only `[0][0]`.
    pub(crate) fn block(&self, k: usize) -> [[S; 2]; 2] {
        match self.kind {
            ProblemKind::Heat => [[self.entries[k], S::zero()], [S::zero(), S::zero()]],
            ProblemKind::Wave => {
                let g = &self.entries[3 * k..3 * k + 3];
                [[g[0], g[1]], [g[1], g[2]]]
            }
        }
    }
}

/// Appliers for `P_ℓ(t)`, `Q_ℓ(t)` and `R_ℓ(T_ℓ)` on one problem and grid.
///
/// All sub-intervals share the same length, so `R_ℓ(T_ℓ) = G·Q_ℓ(T_ℓ)`
/// with one local Gramian `G` computed at construction.
#[derive(Debug, Clone)]
pub struct SubintervalOperators<S> {
    kind: ProblemKind,
    grid: TimeGrid<S>,
    rule: QuadratureRule,
    basis: Arc<SpectralBasis<S>>,
    prop: ModalPropagator<S>,
    gramian: LocalGramian<S>,
}

impl<S: Real> SubintervalOperators<S> {
    pub fn new(problem: &ControlProblem<S>, grid: &TimeGrid<S>, rule: QuadratureRule) -> Result<Self> {
        let basis = Arc::new(SpectralBasis::new(problem.r())?);
        Self::with_basis(problem, grid, rule, basis)
    }

    pub fn with_basis(
        problem: &ControlProblem<S>,
        grid: &TimeGrid<S>,
        rule: QuadratureRule,
        basis: Arc<SpectralBasis<S>>,
    ) -> Result<Self> {
        if basis.r() != problem.r() {
            return Err(Error::DimensionMismatch {
                expected: problem.r(),
                found: basis.r(),
            });
        }
        let tol = S::lit(64.0) * S::epsilon() * problem.horizon();
        if (grid.horizon() - problem.horizon()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "grid horizon {} differs from problem horizon {}",
                grid.horizon(),
                problem.horizon()
            )));
        }
        let prop = ModalPropagator::new(problem.kind(), basis.eigvals().to_vec());
        let gramian = LocalGramian::build(problem.kind(), basis.eigvals(), grid, rule);
        Ok(Self {
            kind: problem.kind(),
            grid: grid.clone(),
            rule,
            basis,
            prop,
            gramian,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn basis(&self) -> &SpectralBasis<S> {
        &self.basis
    }

    pub(crate) fn propagator(&self) -> &ModalPropagator<S> {
        &self.prop
    }

    pub(crate) fn gramian(&self) -> &LocalGramian<S> {
        &self.gramian
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim(self.basis.r())
    }

    pub(crate) fn to_modal(&self, v: &[S]) -> Vec<S> {
        self.basis.transform_blocks(v)
    }

    pub(crate) fn from_modal(&self, c: &[S]) -> Vec<S> {
        self.basis.transform_blocks(c)
    }

    fn check_time(&self, ell: usize, t: S) -> Result<()> {
        self.grid.check_sub_interval(ell)?;
        let lo = self.grid.interface(ell - 1);
        let hi = self.grid.horizon();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!("t = {t} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// `λ_ℓ(t) = Q_ℓ(t)Λ_L = e^{(T_L−t)Lᵀ}Λ_L`
    pub fn apply_q(&self, ell: usize, t: S, lambda: &[S]) -> Result<Vec<S>> {
        self.check_time(ell, t)?;
        check_len(lambda, self.state_dim())?;
        let mut c = self.to_modal(lambda);
        self.prop.adjoint(self.grid.horizon() - t, &mut c);
        Ok(self.from_modal(&c))
    }

    /// `u_ℓ(t) = P_ℓ(t)v = e^{(t−T_{ℓ−1})L}v`
    pub fn apply_p(&self, ell: usize, t: S, v: &[S]) -> Result<Vec<S>> {
        self.check_time(ell, t)?;
        check_len(v, self.state_dim())?;
        let mut c = self.to_modal(v);
        self.prop.forward(t - self.grid.interface(ell - 1), &mut c);
        Ok(self.from_modal(&c))
    }

    /// `R_ℓ(T_ℓ)Λ_L`, so that `w_ℓ(T_ℓ) = −(1/α)R_ℓ(T_ℓ)Λ_L`.
    pub fn apply_r(&self, ell: usize, lambda: &[S]) -> Result<Vec<S>> {
        self.grid.check_sub_interval(ell)?;
        check_len(lambda, self.state_dim())?;
        let mut c = self.to_modal(lambda);
        self.modal_r(ell, &mut c);
        Ok(self.from_modal(&c))
    }

    /// Modal `x ← R_ℓ(T_ℓ)x`.
    pub(crate) fn modal_r(&self, ell: usize, x: &mut [S]) {
        self.prop.adjoint(self.grid.horizon() - self.grid.interface(ell), x);
        self.gramian.apply(x);
    }

    /// Modal `x ← P_j(T_L)R_{j−1}(T_{j−1})x` for `j = ℓ+1`, or `R_L(T_L)x`
    /// when `ℓ = L`: both are `e^{sL}·G·e^{sLᵀ}` with `s = T_L − T_ℓ`.
    pub(crate) fn modal_term(&self, ell: usize, x: &mut [S]) {
        let s = self.grid.horizon() - self.grid.interface(ell);
        self.prop.adjoint(s, x);
        self.gramian.apply(x);
        self.prop.forward(s, x);
    }
}
