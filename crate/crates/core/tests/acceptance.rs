//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --offline --test acceptance -- --nocapture`.

mod support;

use paraexp_ocp::experiment::{
    build_system, run_solve, run_table, Count, ExperimentConfig, TableId, TableOptions, TableOutcome,
};
use paraexp_ocp::{
    expm_action_heat, expm_action_wave, expm_action_wave_adjoint, gmres, theorem1_check, ControlProblem,
    HeatPreconditioner, InterfaceSystem, KrylovConfig, ParallelPlan, PrecondSide, ProblemKind, QuadratureRule,
    SpectralBasis, TimeGrid,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use std::time::Instant;
use support::*;

struct Verdict {
    failures: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn within(&mut self, name: &str, got: Option<f64>, want: f64, tol: f64) {
        let ok = got.is_some_and(|g| (g - want).abs() <= tol);
        self.check(ok, format!("{name} = {} (want {want} ± {tol})", show(got)));
    }

    fn within_rel(&mut self, name: &str, got: Option<f64>, want: f64, rel: f64) {
        let ok = got.is_some_and(|g| (g - want).abs() <= rel * want.abs());
        self.check(ok, format!("{name} = {} (want {want} ± {}%)", show(got), rel * 100.0));
    }

    fn report(&self, id: usize, title: &str) -> bool {
        if self.failures.is_empty() {
            println!("criterion {id:>2}: PASS  {title}");
        } else {
            println!("criterion {id:>2}: FAIL  {title}: {}", self.failures.join("; "));
        }
        self.failures.is_empty()
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or("FAILED".into(), |x| format!("{x:.6}"))
}

fn got(out: &TableOutcome, row: &str, col: &str) -> Option<f64> {
    out.lookup(row, col).and_then(|d| d.got)
}

fn trend(out: &TableOutcome, name: &str) -> bool {
    out.trends.iter().any(|(n, ok)| n == name && *ok)
}

fn table(id: TableId) -> TableOutcome {
    run_table(id, &TableOptions::default()).unwrap()
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let out = table(TableId::T1);
    let secs = start.elapsed().as_secs_f64();
    v.within("Euler iterations", got(&out, "M*Minv euler", "iterations"), 9.0, 2.0);
    v.within("SDIRK3 iterations", got(&out, "M*Minv sdirk3", "iterations"), 2.0, 1.0);
    v.check(trend(&out, "M euler stalls within budget"), "unpreconditioned Euler converged");
    v.check(trend(&out, "M sdirk3 stalls within budget"), "unpreconditioned SDIRK3 converged");
    v.within("sigma_max(M*Minv) Euler", got(&out, "M*Minv euler", "sigma_max"), 1.78, 0.05);
    v.check(secs <= 60.0, format!("runtime {secs:.1} s"));
    v
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new();
    let out = table(TableId::T2);
    v.within("Euler iterations", got(&out, "M*Minv euler", "iterations"), 44.0, 5.0);
    v.within("SDIRK3 iterations", got(&out, "M*Minv sdirk3", "iterations"), 4.0, 1.0);
    v.within_rel("sigma_max(M) Euler", got(&out, "M euler", "sigma_max"), 4.97e4, 0.05);
    v
}

fn criterion_3() -> Verdict {
    let mut v = Verdict::new();
    let out = table(TableId::T10);
    let reference = [
        (100, [9.0, 6.0, 3.0, 2.0]),
        (200, [10.0, 7.0, 3.0, 3.0]),
        (250, [11.0, 7.0, 3.0, 3.0]),
        (600, [11.0, 7.0, 3.0, 3.0]),
    ];
    let columns = ["euler_N1000", "euler_N3000", "sdirk3_N1000", "sdirk3_N3000"];
    for (r, want) in reference {
        for (col, w) in columns.iter().zip(want) {
            let name = format!("r={r} {col}");
            let g = got(&out, &format!("r={r}"), col);
            v.within(&name, g, w, 2.0);
            v.check(g.is_some_and(|x| x <= 12.0), format!("{name} = {} exceeds 12", show(g)));
        }
    }
    v
}

fn criterion_4() -> Verdict {
    let mut v = Verdict::new();
    let out = table(TableId::T3);
    for rule in ["euler", "sdirk3"] {
        v.within(&format!("{rule} iterations_M"), got(&out, rule, "iterations_M"), 84.0, 5.0);
        v.within(&format!("{rule} iterations_MP"), got(&out, rule, "iterations_MP"), 4.0, 1.0);
        v.within(&format!("{rule} cond_MP"), got(&out, rule, "cond_MP"), 2.59, 0.15);
        v.within_rel(&format!("{rule} cond_M"), got(&out, rule, "cond_M"), 3.8e4, 0.1);
    }
    v
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new();
    let out = table(TableId::T5);
    for (r, its) in [(10, 5.0), (150, 3.0), (350, 3.0)] {
        let row = format!("r={r}");
        v.within(&format!("{row} iterations_MP"), got(&out, &row, "iterations_MP"), its, 1.0);
        let cond = got(&out, &row, "cond_MP");
        v.check(
            cond.is_some_and(|c| (2.3..=3.0).contains(&c)),
            format!("{row} cond_MP = {} outside [2.3, 3.0]", show(cond)),
        );
    }
    v
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new();
    let out = table(TableId::T4);
    let rows: Vec<_> = out.diff.iter().filter(|d| d.column == "iterations_MP").collect();
    v.check(rows.len() == 4, format!("{} alpha rows", rows.len()));
    for d in rows {
        v.check(d.got.is_some_and(|i| i <= 4.0), format!("{} iterations_MP = {}", d.row, show(d.got)));
    }
    let conds: Vec<Option<f64>> = out.diff.iter().filter(|d| d.column == "cond_MP").map(|d| d.got).collect();
    let monotone = conds.iter().all(Option::is_some)
        && conds.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap())
        && conds.last().copied().flatten().is_some_and(|c| c >= 1.0 && c < 1.1);
    v.check(
        monotone,
        format!("cond_MP not approaching 1: {:?}", conds.iter().map(|c| show(*c)).collect::<Vec<_>>()),
    );
    v
}

fn criterion_7() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let (r, l, horizon, alpha) = (100, 10, 1.0, 1e-4);
    for k in 1..=10 {
        let n = 100 * k;
        let c = theorem1_check(r, l, n, horizon, alpha).unwrap();
        let mu = c.mu_max_matrix.unwrap_or(c.mu_max_exact);
        let bound = 1.0 + horizon / (l * n) as f64 / alpha;
        v.check(
            c.mu_min_exact > 1.0 && mu > 1.0 && mu < bound,
            format!("N={n}: mu_max {mu} outside (1, {bound})"),
        );
        if n == 1000 {
            let gap = (bound - mu) / bound;
            v.check(gap <= 0.25, format!("N=1000 gap {gap:.3} > 0.25"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    v.check(secs <= 120.0, format!("runtime {secs:.1} s"));
    v
}

fn criterion_8() -> Verdict {
    let mut v = Verdict::new();
    let strategy = (1usize..=50, 1usize..=8, 1usize..=64, -4.0f64..0.0, 0.5f64..2.0, any::<u64>());
    let mut runner = TestRunner::new(Config { cases: 64, failure_persistence: None, ..Config::default() });
    let result = runner.run(&strategy, |(r, l, n, log_alpha, horizon, seed)| {
        let alpha = 10f64.powf(log_alpha);
        let mut g = rng(seed);
        let y_in = random_vec(&mut g, r);
        let y_tg = random_vec(&mut g, r);
        let problem = ControlProblem::new(ProblemKind::Heat, r, horizon, alpha, y_in, y_tg).unwrap();
        let grid = TimeGrid::new(horizon, l, n).unwrap();
        let sys =
            InterfaceSystem::new(&problem, &grid, QuadratureRule::ImplicitEuler, ParallelPlan::new(l, l).unwrap())
                .unwrap();
        let pre = HeatPreconditioner::new(r, alpha).unwrap();
        let rhs: Vec<f64> = sys.assemble_rhs().iter().map(|x| -x).collect();
        let cfg = KrylovConfig::new(None, 1e-14, r + 10, PrecondSide::Right).unwrap();
        let lam = gmres(&sys, &rhs, None, &cfg, Some(&pre)).unwrap().0;

        let (yin, ytg) = (sine_coeffs(problem.y_in()), sine_coeffs(problem.y_tg()));
        let dt = horizon / (l * n) as f64;
        let want: Vec<f64> = sine_eigvals(r)
            .iter()
            .enumerate()
            .map(|(k, &s)| ((s * horizon).exp() * yin[k] - ytg[k]) / f_dt(s, horizon, alpha, dt))
            .collect();
        let coeffs = sine_coeffs(&lam);
        let err = rel_err(&coeffs, &want);
        prop_assert!(err <= 1e-10, "Λ_L error {:e} at r={}, L={}, N={}", err, r, l, n);

        let sol = sys.reconstruct(&lam, false).unwrap();
        let per_mode: Vec<Vec<f64>> = sine_eigvals(r)
            .into_iter()
            .enumerate()
            .map(|(k, sigma)| {
                let mode = HeatMode { sigma, horizon, alpha, sub_intervals: l, fine_steps: n };
                mode.interface_states(yin[k], coeffs[k], QuadratureRule::ImplicitEuler)
            })
            .collect();
        for ell in 0..l {
            let oracle: Vec<f64> = per_mode.iter().map(|ys| ys[ell]).collect();
            let err = rel_err(&sine_coeffs(&sol.y[ell]), &oracle);
            prop_assert!(err <= 1e-10, "Y_{} error {:e}", ell + 1, err);
        }
        Ok(())
    });
    if let Err(e) = result {
        v.check(false, e.to_string());
    }
    v
}

fn criterion_9() -> Verdict {
    let mut v = Verdict::new();
    for rule in [QuadratureRule::ImplicitEuler, QuadratureRule::Sdirk3] {
        let base = ExperimentConfig { quadrature: rule, ..ExperimentConfig::heat_defaults() };
        let x = random_vec(&mut rng(9), base.state_dim());
        let runs: Vec<_> = [1, 2, base.sub_intervals]
            .into_iter()
            .map(|w| {
                let cfg = ExperimentConfig { workers: Count::Fixed(w), ..base.clone() };
                let mx = build_system(&cfg).unwrap().matvec(&x).unwrap();
                let out = run_solve(&cfg).unwrap();
                (mx, out.solution, out.record.residual_history, out.record.objective)
            })
            .collect();
        let bits = |s: &[f64]| s.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        for (w, run) in [2, base.sub_intervals].iter().zip(&runs[1..]) {
            let first = &runs[0];
            let name = rule.name();
            v.check(bits(&run.0) == bits(&first.0), format!("{name} matvec differs at {w} workers"));
            v.check(
                bits(run.1.lambda_final()) == bits(first.1.lambda_final()),
                format!("{name} Λ_L differs at {w} workers"),
            );
            let states = |s: &paraexp_ocp::Solution| s.y.iter().flat_map(|y| bits(y)).collect::<Vec<_>>();
            v.check(states(&run.1) == states(&first.1), format!("{name} interface states differ at {w} workers"));
            v.check(bits(&run.2) == bits(&first.2), format!("{name} residual history differs at {w} workers"));
            v.check(
                run.3.map(f64::to_bits) == first.3.map(f64::to_bits),
                format!("{name} objective differs at {w} workers"),
            );
        }
    }
    v
}

fn criterion_10() -> Verdict {
    let mut v = Verdict::new();
    let mut runner = TestRunner::new(Config { cases: 24, failure_persistence: None, ..Config::default() });
    let result = runner.run(&(1usize..=50, any::<u64>()), |(r, seed)| {
        let basis = SpectralBasis::<f64>::new(r).unwrap();
        let lap = laplacian(r);
        let block = wave_block(r);
        let mut g = rng(seed);
        let h = random_vec(&mut g, r);
        let y = random_vec(&mut g, 2 * r);
        for t in [0.01, 0.5, 2.3] {
            let err = rel_err(&expm_action_heat(&basis, t, &h).unwrap(), &expm_apply(&lap, t, &h));
            prop_assert!(err <= 1e-10, "heat r={} t={}: {:e}", r, t, err);
            let err = rel_err(&expm_action_wave(&basis, t, &y).unwrap(), &expm_apply(&block, t, &y));
            prop_assert!(err <= 1e-10, "wave r={} t={}: {:e}", r, t, err);
            let adj = expm_apply(&block.transpose(), t, &y);
            let err = rel_err(&expm_action_wave_adjoint(&basis, t, &y).unwrap(), &adj);
            prop_assert!(err <= 1e-10, "wave adjoint r={} t={}: {:e}", r, t, err);
        }
        let energy = |z: &[f64]| {
            let u = nalgebra::DVector::from_column_slice(&z[..r]);
            -u.dot(&(&lap * &u)) + z[r..].iter().map(|x| x * x).sum::<f64>()
        };
        let e0 = energy(&y);
        let e1 = energy(&expm_action_wave(&basis, 2.3, &y).unwrap());
        prop_assert!((e1 - e0).abs() <= 1e-10 * e0, "energy drift {:e} at r={}", (e1 - e0).abs() / e0, r);
        Ok(())
    });
    if let Err(e) = result {
        v.check(false, e.to_string());
    }
    v
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("heat table 1", criterion_1),
        ("heat table 2", criterion_2),
        ("heat table 10", criterion_3),
        ("wave table 3", criterion_4),
        ("wave table 5", criterion_5),
        ("wave table 4", criterion_6),
        ("eigenvalue bound sweep", criterion_7),
        ("per-mode oracle equivalence", criterion_8),
        ("parallel determinism", criterion_9),
        ("propagator oracles", criterion_10),
    ];
    let mut failed = Vec::new();
    for (k, (title, run)) in criteria.into_iter().enumerate() {
        if !run().report(k + 1, title) {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
