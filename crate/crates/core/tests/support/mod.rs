//! Independent oracles shared by the integration tests. Nothing here calls
//! into the spectral machinery of the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use paraexp_ocp::{DenseMatrix, QuadratureRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / ‖b‖`, or the absolute gap when `b = 0`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&diff)
    } else {
        norm(&diff) / nb
    }
}

/// Second-difference matrix on `r` interior points of the unit interval.
pub fn laplacian(r: usize) -> DMatrix<f64> {
    let inv_h2 = ((r + 1) * (r + 1)) as f64;
    DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            -2.0 * inv_h2
        } else if i.abs_diff(j) == 1 {
            inv_h2
        } else {
            0.0
        }
    })
}

/// `[[0, I], [Δ_h, 0]]`
pub fn wave_block(r: usize) -> DMatrix<f64> {
    let lap = laplacian(r);
    let mut m = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        m[(i, r + i)] = 1.0;
        for j in 0..r {
            m[(r + i, j)] = lap[(i, j)];
        }
    }
    m
}

pub fn expm_apply(m: &DMatrix<f64>, t: f64, v: &[f64]) -> Vec<f64> {
    let e = (m * t).exp();
    (e * DVector::from_column_slice(v)).as_slice().to_vec()
}

pub fn to_nalgebra(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// `σ_k = (2cos(kπh) − 2)/h²`, an algebraically equivalent form of the
/// Laplacian eigenvalues.
pub fn sine_eigvals(r: usize) -> Vec<f64> {
    let h = 1.0 / (r + 1) as f64;
    (1..=r).map(|k| (2.0 * (k as f64 * PI * h).cos() - 2.0) / (h * h)).collect()
}

/// Unit-norm discrete sine vector `k`.
pub fn sine_vector(r: usize, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (1..=r).map(|j| (k as f64 * PI * j as f64 / (r + 1) as f64).sin()).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Coefficients of `v` in the unit sine basis by direct summation.
pub fn sine_coeffs(v: &[f64]) -> Vec<f64> {
    let r = v.len();
    (1..=r)
        .map(|k| {
            let s = sine_vector(r, k);
            s.iter().zip(v).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Cyclic Jacobi rotations; returns the sorted eigenvalues of a symmetric matrix.
pub fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Euler symbol of the heat interface matrix, written without `expm1`.
pub fn f_dt(sigma: f64, horizon: f64, alpha: f64, dt: f64) -> f64 {
    1.0 + dt / alpha * (1.0 - (2.0 * horizon * sigma).exp()) / (1.0 - (2.0 * dt * sigma).exp())
}

/// Scalar data of one heat mode.
#[derive(Debug, Clone, Copy)]
pub struct HeatMode {
    pub sigma: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub sub_intervals: usize,
    pub fine_steps: usize,
}

impl HeatMode {
    pub fn dt(&self) -> f64 {
        self.horizon / (self.sub_intervals * self.fine_steps) as f64
    }

    /// `λ(t) = e^{σ(T−t)}Λ_L`
    pub fn lambda_at(&self, t: f64, lambda_final: f64) -> f64 {
        (self.sigma * (self.horizon - t)).exp() * lambda_final
    }

    /// States at every interface `T_1..T_L` by stepping the controlled
    /// equation one fine step at a time: exact transport over each step and
    /// the quadrature rule for the source `−λ/α`.
    pub fn interface_states(&self, y_in: f64, lambda_final: f64, rule: QuadratureRule) -> Vec<f64> {
        let dt = self.dt();
        let nodes: Vec<f64> = rule.nodes();
        let weights: Vec<f64> = rule.weights();
        let mut y = y_in;
        let mut out = Vec::new();
        let mut t = 0.0;
        for _ in 0..self.sub_intervals {
            for _ in 0..self.fine_steps {
                let mut next = (self.sigma * dt).exp() * y;
                for (c, d) in nodes.iter().zip(&weights) {
                    let lam = self.lambda_at(t + c * dt, lambda_final);
                    next -= dt * d / self.alpha * (self.sigma * (1.0 - c) * dt).exp() * lam;
                }
                y = next;
                t += dt;
            }
            out.push(y);
        }
        out
    }

    /// `Λ_L` solving `Λ_L = y(T) − y_tg` with Euler quadrature.
    pub fn euler_lambda(&self, y_in: f64, y_tg: f64) -> f64 {
        ((self.sigma * self.horizon).exp() * y_in - y_tg) / f_dt(self.sigma, self.horizon, self.alpha, self.dt())
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
