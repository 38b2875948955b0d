mod support;

use paraexp_ocp::{
    gmres, materialize, objective, ControlProblem, HeatPreconditioner, InterfaceSystem, KrylovConfig,
    LinearOperator, ParallelPlan, PrecondSide, ProblemKind, QuadratureRule, TimeGrid,
};
use proptest::prelude::*;
use support::*;

fn system(
    kind: ProblemKind,
    r: usize,
    horizon: f64,
    alpha: f64,
    l: usize,
    n: usize,
    rule: QuadratureRule,
    workers: usize,
) -> InterfaceSystem<f64> {
    let problem = ControlProblem::gaussian_benchmark(kind, r, horizon, alpha).unwrap();
    let grid = TimeGrid::new(horizon, l, n).unwrap();
    InterfaceSystem::new(&problem, &grid, rule, ParallelPlan::new(workers, l).unwrap()).unwrap()
}

fn random_heat_system(r: usize, l: usize, n: usize, alpha: f64, horizon: f64, seed: u64) -> InterfaceSystem<f64> {
    let mut g = rng(seed);
    let y_in = random_vec(&mut g, r);
    let y_tg = random_vec(&mut g, r);
    let problem = ControlProblem::new(ProblemKind::Heat, r, horizon, alpha, y_in, y_tg).unwrap();
    let grid = TimeGrid::new(horizon, l, n).unwrap();
    InterfaceSystem::new(&problem, &grid, QuadratureRule::ImplicitEuler, ParallelPlan::new(l, l).unwrap()).unwrap()
}

fn tight_solve(sys: &InterfaceSystem<f64>) -> Vec<f64> {
    let pre = HeatPreconditioner::new(sys.problem().r(), sys.problem().alpha()).unwrap();
    let rhs: Vec<f64> = sys.assemble_rhs().iter().map(|v| -v).collect();
    let cfg = KrylovConfig::new(None, 1e-14, sys.dim() + 10, PrecondSide::Right).unwrap();
    gmres(sys, &rhs, None, &cfg, Some(&pre)).unwrap().0
}

#[test]
fn materialized_heat_m_has_f_dt_spectrum() {
    let (r, horizon, alpha, l, n) = (20, 1.0, 1e-3, 4, 16);
    let sys = system(ProblemKind::Heat, r, horizon, alpha, l, n, QuadratureRule::ImplicitEuler, 2);
    let m = materialize(&sys).unwrap();
    assert!(m.asymmetry() <= 1e-10 * m.max_abs());
    let eig = jacobi_eigenvalues(to_nalgebra(&m));
    let dt = horizon / (l * n) as f64;
    let mut want: Vec<f64> = sine_eigvals(r).iter().map(|&s| f_dt(s, horizon, alpha, dt)).collect();
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in eig.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn scalar_interface_matrix() {
    // r = 1, L = N = 1, T = 1, α = 1e-4: M = f_δt(−8) = 10001
    let sys = system(ProblemKind::Heat, 1, 1.0, 1e-4, 1, 1, QuadratureRule::ImplicitEuler, 1);
    let m = sys.matvec(&[1.0]).unwrap()[0];
    assert!((m - 10001.0).abs() <= 1e-9 * 10001.0);
    assert_eq!(sys.matvec(&[0.0]).unwrap(), vec![0.0]);
}

#[test]
fn table_one_spectrum_bracket() {
    let sys = system(ProblemKind::Heat, 100, 1.0, 1e-4, 10, 1000, QuadratureRule::ImplicitEuler, 10);
    let m = materialize(&sys).unwrap();
    let eig = jacobi_eigenvalues(to_nalgebra(&m));
    assert!((eig[0] - 2.0).abs() <= 0.05 * 2.0, "{}", eig[0]);
    assert!((eig[99] - 4.9e2).abs() <= 0.05 * 4.9e2, "{}", eig[99]);
}

#[test]
fn large_alpha_is_uncontrolled_evolution() {
    let (r, horizon, l) = (6, 1.0, 3);
    // the controlled part scales like 1/α against a free state of size e^{σ₁T} ≈ 5e-5
    let sys = system(ProblemKind::Heat, r, horizon, 1e12, l, 10, QuadratureRule::Sdirk3, 1);
    let lam = tight_solve(&sys);
    let p = sys.problem();
    let free_end = expm_apply(&laplacian(r), horizon, p.y_in());
    let want: Vec<f64> = free_end.iter().zip(p.y_tg()).map(|(a, b)| a - b).collect();
    assert!(rel_err(&lam, &want) <= 1e-7);
    let sol = sys.reconstruct(&lam, false).unwrap();
    for ell in 1..=l {
        let free = expm_apply(&laplacian(r), horizon * ell as f64 / l as f64, p.y_in());
        assert!(rel_err(&sol.y[ell - 1], &free) <= 1e-7);
    }
}

#[test]
fn optimum_beats_zero_control() {
    for kind in [ProblemKind::Heat, ProblemKind::Wave] {
        let sys = system(kind, 5, 1.0, 1e-2, 3, 20, QuadratureRule::Sdirk3, 3);
        let rhs: Vec<f64> = sys.assemble_rhs().iter().map(|v| -v).collect();
        let cfg = KrylovConfig::new(None, 1e-12, 50, PrecondSide::None).unwrap();
        let (lam, rep) = gmres(&sys, &rhs, None, &cfg, None).unwrap();
        assert!(rep.converged);
        let sol = sys.reconstruct(&lam, true).unwrap();
        let best = objective(&sol, sys.problem()).unwrap();
        let zero_control = 0.5 * norm(&sys.assemble_rhs()).powi(2);
        assert!(best < zero_control, "{kind:?}: {best} vs {zero_control}");
        // closure Λ_L = Y_L − y_tg
        let gap: Vec<f64> = sol.y_final().iter().zip(sys.problem().y_tg()).map(|(y, t)| y - t).collect();
        assert!(rel_err(&lam, &gap) <= 1e-9);
    }
}

#[test]
fn zero_control_objective() {
    let sys = system(ProblemKind::Heat, 4, 1.0, 1e-3, 2, 5, QuadratureRule::ImplicitEuler, 1);
    let sol = sys.reconstruct(&vec![0.0; 4], true).unwrap();
    let value = objective(&sol, sys.problem()).unwrap();
    assert!((value - 0.5 * norm(&sys.assemble_rhs()).powi(2)).abs() <= 1e-14);
}

#[test]
fn fine_samples_are_consistent() {
    for kind in [ProblemKind::Heat, ProblemKind::Wave] {
        let (l, n) = (3, 7);
        let sys = system(kind, 6, 1.2, 1e-3, l, n, QuadratureRule::Sdirk3, 2);
        let lam = random_vec(&mut rng(5), sys.dim());
        let sol = sys.reconstruct(&lam, true).unwrap();
        let fine = sol.fine.as_ref().unwrap();
        assert_eq!(fine.segments.len(), l);
        let alpha = sys.problem().alpha();
        for (ell, seg) in fine.segments.iter().enumerate() {
            assert_eq!(seg.len(), n);
            for s in seg {
                let control = if kind == ProblemKind::Wave { &s.lambda[6..] } else { &s.lambda[..] };
                assert_eq!(s.nu.len(), 6);
                for (nu, la) in s.nu.iter().zip(control) {
                    assert!((nu - la / alpha).abs() <= 1e-12 * (la / alpha).abs().max(1.0));
                }
                let want = sys.operators().apply_q(ell + 1, s.time, &lam).unwrap();
                assert!(rel_err(&s.lambda, &want) <= 1e-12);
            }
            let last = seg.last().unwrap();
            assert!(rel_err(&last.y, &sol.y[ell]) <= 1e-10);
            assert!(rel_err(&last.lambda, &sol.lambda[ell]) <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn euler_solution_matches_mode_closed_form(
        r in 1usize..=50,
        l in 1usize..=8,
        n in 1usize..=64,
        log_alpha in -4.0f64..0.0,
        horizon in 0.5f64..2.0,
        seed in any::<u64>(),
    ) {
        let alpha = 10f64.powf(log_alpha);
        let sys = random_heat_system(r, l, n, alpha, horizon, seed);
        let lam = tight_solve(&sys);
        let p = sys.problem();
        let (yin, ytg) = (sine_coeffs(p.y_in()), sine_coeffs(p.y_tg()));
        let modes: Vec<HeatMode> = sine_eigvals(r)
            .into_iter()
            .map(|sigma| HeatMode { sigma, horizon, alpha, sub_intervals: l, fine_steps: n })
            .collect();
        let want: Vec<f64> = modes.iter().enumerate().map(|(k, m)| m.euler_lambda(yin[k], ytg[k])).collect();
        let got = sine_coeffs(&lam);
        prop_assert!(rel_err(&got, &want) <= 1e-10, "Λ_L error {:e}", rel_err(&got, &want));

        let sol = sys.reconstruct(&lam, false).unwrap();
        let per_mode: Vec<Vec<f64>> = modes
            .iter()
            .enumerate()
            .map(|(k, m)| m.interface_states(yin[k], got[k], QuadratureRule::ImplicitEuler))
            .collect();
        for ell in 0..l {
            let oracle: Vec<f64> = per_mode.iter().map(|ys| ys[ell]).collect();
            let err = rel_err(&sine_coeffs(&sol.y[ell]), &oracle);
            prop_assert!(err <= 1e-10, "Y_{} error {:e}", ell + 1, err);
        }
    }

    #[test]
    fn matvec_is_linear_and_deterministic(
        r in 1usize..30,
        l in 1usize..6,
        wave in any::<bool>(),
        sdirk in any::<bool>(),
        seed in any::<u64>(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let kind = if wave { ProblemKind::Wave } else { ProblemKind::Heat };
        let rule = if sdirk { QuadratureRule::Sdirk3 } else { QuadratureRule::ImplicitEuler };
        let serial = system(kind, r, 1.3, 1e-3, l, 5, rule, 1);
        let mut g = rng(seed);
        let x = random_vec(&mut g, serial.dim());
        let y = random_vec(&mut g, serial.dim());
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (mx, my) = (serial.matvec(&x).unwrap(), serial.matvec(&y).unwrap());
        let lin: Vec<f64> = mx.iter().zip(&my).map(|(p, q)| a * p + b * q).collect();
        let scale = (a.abs() + b.abs()) * norm(&mx).max(norm(&my)) + 1e-300;
        let gap: Vec<f64> = serial.matvec(&combo).unwrap().iter().zip(&lin).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&gap) <= 1e-12 * scale);
        for w in [2, l] {
            let par = serial.with_plan(ParallelPlan::new(w, l).unwrap()).unwrap();
            prop_assert_eq!(par.matvec(&x).unwrap(), mx.clone());
        }
    }

    #[test]
    fn superposition_consistency(r in 1usize..20, l in 1usize..6, wave in any::<bool>(), seed in any::<u64>()) {
        let kind = if wave { ProblemKind::Wave } else { ProblemKind::Heat };
        let sys = system(kind, r, 1.1, 1e-2, l, 6, QuadratureRule::Sdirk3, l);
        let ops = sys.operators();
        let grid = sys.grid();
        let alpha = sys.problem().alpha();
        let lam = random_vec(&mut rng(seed), sys.dim());
        let sol = sys.reconstruct(&lam, false).unwrap();
        // raw pieces: w_j(T_j) = −R_jΛ/α, u_1 = P_1 y_in, u_{j+1} = P_{j+1} w_j(T_j)
        let w: Vec<Vec<f64>> = (1..=l)
            .map(|j| ops.apply_r(j, &lam).unwrap().iter().map(|v| -v / alpha).collect())
            .collect();
        for ell in 1..=l {
            let t = grid.interface(ell);
            let mut y = ops.apply_p(1, t, sys.problem().y_in()).unwrap();
            for j in 1..ell {
                let u = ops.apply_p(j + 1, t, &w[j - 1]).unwrap();
                y.iter_mut().zip(&u).for_each(|(a, b)| *a += b);
            }
            y.iter_mut().zip(&w[ell - 1]).for_each(|(a, b)| *a += b);
            prop_assert!(rel_err(&sol.y[ell - 1], &y) <= 1e-11);
            let q = ops.apply_q(ell, t, &lam).unwrap();
            prop_assert!(rel_err(&sol.lambda[ell - 1], &q) <= 1e-12);
        }
    }

    #[test]
    fn heat_m_is_symmetric(r in 1usize..25, l in 1usize..5, n in 1usize..12, sdirk in any::<bool>()) {
        let rule = if sdirk { QuadratureRule::Sdirk3 } else { QuadratureRule::ImplicitEuler };
        let sys = system(ProblemKind::Heat, r, 1.0, 1e-3, l, n, rule, 1);
        let m = materialize(&sys).unwrap();
        prop_assert!(m.asymmetry() <= 1e-10 * m.max_abs());
        prop_assert_eq!(sys.dim(), LinearOperator::dim(&sys));
    }
}
