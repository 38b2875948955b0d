use super::config::{Count, ExperimentConfig, Restart, Switch};
use super::csv::{format_number, Cell, CsvTable};
use super::run::{build_preconditioner, build_system, solve_interface};
use crate::analysis::{materialize, preconditioned, spectrum_exact, spectrum_extremes_with, SpectrumOptions, SpectrumReport};
use crate::error::{Error, Result};
use crate::krylov::KrylovReport;
use crate::model::ProblemKind;
use crate::propagate::QuadratureRule;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T10,
}

impl TableId {
    pub const ALL: [TableId; 6] = [TableId::T1, TableId::T2, TableId::T3, TableId::T4, TableId::T5, TableId::T10];

    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "t1",
            TableId::T2 => "t2",
            TableId::T3 => "t3",
            TableId::T4 => "t4",
            TableId::T5 => "t5",
            TableId::T10 => "t10",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown table {s:?}; expected one of t1, t2, t3, t4, t5, t10")))
    }
}

/// How the two step counts heading the last table are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepReading {
    /// Fine steps per sub-interval, with `L = 10`.
    #[default]
    N,
    /// Number of sub-intervals, with one fine step each.
    L,
}

/// Where the singular value and condition columns come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumRoute {
    /// Power and inverse iteration on the materialized matrix.
    #[default]
    Dense,
    /// Per-mode blocks.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableOptions {
    /// Horizon of the wave tables; `None` keeps the wave default.
    pub wave_horizon: Option<f64>,
    pub workers: Count,
    pub seed: u64,
    pub step_reading: StepReading,
    pub spectrum: SpectrumRoute,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            wave_horizon: None,
            workers: Count::AUTO,
            seed: 0,
            step_reading: StepReading::N,
            spectrum: SpectrumRoute::Dense,
        }
    }
}

/// Acceptance window of one reproduced cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
    Range(f64, f64),
}

impl Tolerance {
    pub fn admits(self, expected: f64, got: f64) -> bool {
        match self {
            Tolerance::Abs(d) => (got - expected).abs() <= d,
            Tolerance::Rel(d) => (got - expected).abs() <= d * expected.abs(),
            Tolerance::Range(lo, hi) => (lo..=hi).contains(&got),
        }
    }

    fn describe(self) -> String {
        match self {
            Tolerance::Abs(d) => format!("± {}", format_number(d)),
            Tolerance::Rel(d) => format!("± {}%", d * 100.0),
            Tolerance::Range(lo, hi) => format!("in [{}, {}]", format_number(lo), format_number(hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffLine {
    pub row: String,
    pub column: String,
    pub expected: f64,
    pub tolerance: Tolerance,
    /// `None` when the sub-run failed.
    pub got: Option<f64>,
}

impl DiffLine {
    pub fn ok(&self) -> bool {
        self.got.is_some_and(|g| self.tolerance.admits(self.expected, g))
    }

    pub fn render(&self) -> String {
        let got = self.got.map_or("FAILED".to_string(), format_number);
        let verdict = if self.ok() { "ok" } else { "DEVIATION" };
        format!(
            "{:<22} {:<14} got {:<12} expected {} {:<22} {}",
            self.row,
            self.column,
            got,
            format_number(self.expected),
            self.tolerance.describe(),
            verdict
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableOutcome {
    pub id: TableId,
    pub csv: CsvTable,
    pub diff: Vec<DiffLine>,
    /// Extra pass/fail checks spanning several rows.
    pub trends: Vec<(String, bool)>,
}

impl TableOutcome {
    pub fn deviations(&self) -> usize {
        self.diff.iter().filter(|d| !d.ok()).count() + self.trends.iter().filter(|t| !t.1).count()
    }

    /// Some sub-run errored.
    pub fn has_failures(&self) -> bool {
        self.csv.has_failures()
    }

    pub fn lookup(&self, row: &str, column: &str) -> Option<&DiffLine> {
        self.diff.iter().find(|d| d.row == row && d.column == column)
    }

    pub fn diff_report(&self) -> String {
        let mut out = format!("# {} diff against reference values\n", self.id);
        for line in &self.diff {
            out.push_str(&line.render());
            out.push('\n');
        }
        for (name, ok) in &self.trends {
            out.push_str(&format!("{name:<37} {}\n", if *ok { "ok" } else { "DEVIATION" }));
        }
        out.push_str(&format!("# {} deviation(s)\n", self.deviations()));
        out
    }
}

/// Runs the sweep of `id` and compares it with the embedded reference values.
pub fn run_table(id: TableId, opts: &TableOptions) -> Result<TableOutcome> {
    let mut builder = Builder::new(id, opts);
    match id {
        TableId::T1 => builder.heat_table(1e-4, &T1_REF),
        TableId::T2 => builder.heat_table(1e-6, &T2_REF),
        TableId::T3 => builder.wave_table_rules(),
        TableId::T4 => builder.wave_alpha_sweep(),
        TableId::T5 => builder.wave_r_sweep(),
        TableId::T10 => builder.step_sweep(),
    }
    Ok(builder.finish())
}

/// Reference cells of one heat table row: `σ_min, σ_max, iterations`.
struct HeatRow {
    matrix: &'static str,
    rule: QuadratureRule,
    sigma_min: f64,
    sigma_max: f64,
    iterations: f64,
    iteration_tol: Tolerance,
    sigma_max_tol: Tolerance,
}

const PLAIN: &str = "M";
const PRECOND: &str = "M*Minv";

const T1_REF: [HeatRow; 4] = [
    HeatRow {
        matrix: PLAIN,
        rule: QuadratureRule::ImplicitEuler,
        sigma_min: 2.0,
        sigma_max: 4.9e2,
        iterations: 500.0,
        iteration_tol: Tolerance::Abs(0.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
    HeatRow {
        matrix: PLAIN,
        rule: QuadratureRule::Sdirk3,
        sigma_min: 1.08,
        sigma_max: 4.9e2,
        iterations: 500.0,
        iteration_tol: Tolerance::Abs(0.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
    HeatRow {
        matrix: PRECOND,
        rule: QuadratureRule::ImplicitEuler,
        sigma_min: 1.0,
        sigma_max: 1.78,
        iterations: 9.0,
        iteration_tol: Tolerance::Abs(2.0),
        sigma_max_tol: Tolerance::Abs(0.05),
    },
    HeatRow {
        matrix: PRECOND,
        rule: QuadratureRule::Sdirk3,
        sigma_min: 0.97,
        sigma_max: 1.0,
        iterations: 2.0,
        iteration_tol: Tolerance::Abs(1.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
];

const T2_REF: [HeatRow; 4] = [
    HeatRow {
        matrix: PLAIN,
        rule: QuadratureRule::ImplicitEuler,
        sigma_min: 1e2,
        sigma_max: 4.97e4,
        iterations: 500.0,
        iteration_tol: Tolerance::Abs(0.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
    HeatRow {
        matrix: PLAIN,
        rule: QuadratureRule::Sdirk3,
        sigma_min: 9.68,
        sigma_max: 4.96e4,
        iterations: 500.0,
        iteration_tol: Tolerance::Abs(0.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
    HeatRow {
        matrix: PRECOND,
        rule: QuadratureRule::ImplicitEuler,
        sigma_min: 1.0,
        sigma_max: 7.76,
        iterations: 44.0,
        iteration_tol: Tolerance::Abs(5.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
    HeatRow {
        matrix: PRECOND,
        rule: QuadratureRule::Sdirk3,
        sigma_min: 0.74,
        sigma_max: 1.0,
        iterations: 4.0,
        iteration_tol: Tolerance::Abs(1.0),
        sigma_max_tol: Tolerance::Rel(0.05),
    },
];

/// `cond(M), iterations, cond(M·M̂⁻¹), iterations` per wave row.
const T3_REF: (f64, f64, f64, f64) = (3.8e4, 84.0, 2.59, 4.0);
const T4_REF: [(f64, [f64; 4]); 4] = [
    (1e-5, [2.26e4, 52.0, 2.41, 3.0]),
    (1e-3, [4.98e2, 20.0, 1.09, 3.0]),
    (1e-1, [6.03, 9.0, 1.01, 3.0]),
    (1e1, [1.05, 4.0, 1.0, 2.0]),
];
const T5_REF: [(usize, [f64; 4]); 3] = [
    (10, [4.83e2, 10.0, 2.47, 5.0]),
    (150, [7.75e4, 76.0, 2.81, 3.0]),
    (350, [2.48e5, 104.0, 2.49, 3.0]),
];
/// Preconditioned iterations per `r` for Euler and SDIRK3 at 10³ and 3·10³ steps.
const T10_REF: [(usize, [f64; 4]); 4] = [
    (100, [9.0, 6.0, 3.0, 2.0]),
    (200, [10.0, 7.0, 3.0, 3.0]),
    (250, [11.0, 7.0, 3.0, 3.0]),
    (600, [11.0, 7.0, 3.0, 3.0]),
];
const T10_STEPS: [usize; 2] = [1000, 3000];
const T10_CAP: f64 = 12.0;

struct Builder<'a> {
    id: TableId,
    opts: &'a TableOptions,
    csv: CsvTable,
    diff: Vec<DiffLine>,
    trends: Vec<(String, bool)>,
}

impl<'a> Builder<'a> {
    fn new(id: TableId, opts: &'a TableOptions) -> Self {
        Self {
            id,
            opts,
            csv: CsvTable::default(),
            diff: Vec::new(),
            trends: Vec::new(),
        }
    }

    fn finish(self) -> TableOutcome {
        TableOutcome {
            id: self.id,
            csv: self.csv,
            diff: self.diff,
            trends: self.trends,
        }
    }

    fn expect(&mut self, row: &str, column: &str, expected: f64, tolerance: Tolerance, got: Option<f64>) {
        self.diff.push(DiffLine {
            row: row.to_string(),
            column: column.to_string(),
            expected,
            tolerance,
            got,
        });
    }

    fn base(&self, kind: ProblemKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(kind);
        cfg.workers = self.opts.workers;
        cfg.seed = self.opts.seed;
        if kind == ProblemKind::Wave {
            if let Some(t) = self.opts.wave_horizon {
                cfg.horizon = t;
            }
        }
        cfg
    }

    fn solve(&self, cfg: &ExperimentConfig) -> Result<KrylovReport> {
        let system = build_system(cfg)?;
        Ok(solve_interface(&system, cfg)?.1)
    }

    fn spectrum(&self, cfg: &ExperimentConfig) -> Result<SpectrumReport> {
        let system = build_system(cfg)?;
        let symmetric = cfg.problem == ProblemKind::Heat;
        match self.opts.spectrum {
            SpectrumRoute::Exact => spectrum_exact(&system, cfg.preconditioned()),
            SpectrumRoute::Dense => {
                let opts = SpectrumOptions {
                    seed: cfg.seed,
                    ..SpectrumOptions::default()
                };
                let dense = if cfg.preconditioned() {
                    let pre = build_preconditioner(system.problem())?;
                    let product = preconditioned(&system, pre.as_ref());
                    materialize(&product)?
                } else {
                    materialize(&system)?
                };
                spectrum_extremes_with(&dense, symmetric, opts)
            }
        }
    }

    fn heat_table(&mut self, alpha: f64, reference: &[HeatRow; 4]) {
        self.csv = CsvTable::new(&["matrix", "quadrature", "sigma_min", "sigma_max", "iterations", "residual"]);
        for row in reference {
            let mut cfg = self.base(ProblemKind::Heat);
            cfg.alpha = alpha;
            cfg.quadrature = row.rule;
            cfg.precond = if row.matrix == PRECOND { Switch::On } else { Switch::Off };
            let label = format!("{} {}", row.matrix, row.rule.name());
            let spec = self.spectrum(&cfg).ok();
            let solve = self.solve(&cfg).ok();
            let mut cells = vec![Cell::from(row.matrix), Cell::from(row.rule.name())];
            cells.extend(spectrum_cells(spec.as_ref(), |s| [s.sigma_min, s.sigma_max]));
            cells.extend(solve_cells(solve.as_ref()));
            self.csv.push(cells);
            self.expect(&label, "sigma_min", row.sigma_min, Tolerance::Rel(0.1), spec.map(|s| s.sigma_min));
            self.expect(&label, "sigma_max", row.sigma_max, row.sigma_max_tol, spec.map(|s| s.sigma_max));
            self.expect(&label, "iterations", row.iterations, row.iteration_tol, iterations(solve.as_ref()));
            if row.matrix == PLAIN {
                let unconverged = solve.as_ref().map(|s| !s.converged);
                self.trends.push((format!("{label} stalls within budget"), unconverged == Some(true)));
            }
        }
    }

    /// Plain and preconditioned runs of one wave configuration:
    /// `[cond(M), iterations, residual, cond(M·M̂⁻¹), iterations, residual]`.
    fn wave_pair(&self, cfg: &ExperimentConfig) -> [Option<f64>; 6] {
        let mut out = [None; 6];
        for (k, switch) in [Switch::Off, Switch::On].into_iter().enumerate() {
            let mut c = cfg.clone();
            c.precond = switch;
            out[3 * k] = self.spectrum(&c).ok().map(|s| s.cond);
            if let Ok(rep) = self.solve(&c) {
                out[3 * k + 1] = Some(rep.iterations as f64);
                out[3 * k + 2] = Some(rep.final_residual);
            }
        }
        out
    }

    fn wave_table_rules(&mut self) {
        self.csv = CsvTable::new(&[
            "quadrature",
            "cond_M",
            "iterations_M",
            "residual_M",
            "cond_MP",
            "iterations_MP",
            "residual_MP",
        ]);
        for rule in [QuadratureRule::ImplicitEuler, QuadratureRule::Sdirk3] {
            let mut cfg = self.base(ProblemKind::Wave);
            cfg.quadrature = rule;
            let got = self.wave_pair(&cfg);
            let mut cells = vec![Cell::from(rule.name())];
            cells.extend([
                num(got[0]),
                count(got[1]),
                num(got[2]),
                num(got[3]),
                count(got[4]),
                num(got[5]),
            ]);
            self.csv.push(cells);
            let label = rule.name();
            let (c, i, cp, ip) = T3_REF;
            self.expect(label, "cond_M", c, Tolerance::Rel(0.1), got[0]);
            self.expect(label, "iterations_M", i, Tolerance::Abs(5.0), got[1]);
            self.expect(label, "cond_MP", cp, Tolerance::Abs(0.15), got[3]);
            self.expect(label, "iterations_MP", ip, Tolerance::Abs(1.0), got[4]);
        }
    }

    fn wave_sweep_row(&mut self, label: &str, first: Cell, cfg: &ExperimentConfig, reference: [f64; 4], tol_cp: Tolerance, tol_ip: Tolerance) -> Option<f64> {
        let got = self.wave_pair(cfg);
        self.csv.push(vec![first, num(got[0]), count(got[1]), num(got[3]), count(got[4])]);
        self.expect(label, "cond_M", reference[0], Tolerance::Rel(0.1), got[0]);
        self.expect(label, "iterations_M", reference[1], Tolerance::Abs(5.0), got[1]);
        self.expect(label, "cond_MP", reference[2], tol_cp, got[3]);
        self.expect(label, "iterations_MP", reference[3], tol_ip, got[4]);
        got[3]
    }

    fn wave_alpha_sweep(&mut self) {
        self.csv = CsvTable::new(&["alpha", "cond_M", "iterations_M", "cond_MP", "iterations_MP"]);
        let mut conds = Vec::new();
        for (alpha, reference) in T4_REF {
            let mut cfg = self.base(ProblemKind::Wave);
            cfg.alpha = alpha;
            let label = format!("alpha={}", format_number(alpha));
            let iters = Tolerance::Range(0.0, 4.0);
            conds.push(self.wave_sweep_row(&label, Cell::Num(alpha), &cfg, reference, Tolerance::Rel(0.1), iters));
        }
        let monotone = conds.iter().all(Option::is_some)
            && conds.windows(2).all(|w| (w[1].unwrap() - 1.0).abs() <= (w[0].unwrap() - 1.0).abs());
        self.trends.push(("cond_MP decreases towards 1".into(), monotone));
    }

    fn wave_r_sweep(&mut self) {
        self.csv = CsvTable::new(&["r", "cond_M", "iterations_M", "cond_MP", "iterations_MP"]);
        for (r, reference) in T5_REF {
            let mut cfg = self.base(ProblemKind::Wave);
            cfg.r = r;
            let label = format!("r={r}");
            self.wave_sweep_row(&label, Cell::from(r), &cfg, reference, Tolerance::Range(2.3, 3.0), Tolerance::Abs(1.0));
        }
    }

    fn step_sweep(&mut self) {
        let reading = self.opts.step_reading;
        let key = match reading {
            StepReading::N => "N",
            StepReading::L => "L",
        };
        let columns: Vec<String> = ["euler", "sdirk3"]
            .iter()
            .flat_map(|rule| T10_STEPS.iter().map(move |s| format!("{rule}_{key}{s}")))
            .collect();
        let mut header = vec!["r"];
        header.extend(columns.iter().map(String::as_str));
        self.csv = CsvTable::new(&header);
        for (r, reference) in T10_REF {
            let mut cells = vec![Cell::from(r)];
            let label = format!("r={r}");
            for (j, rule) in [QuadratureRule::ImplicitEuler, QuadratureRule::Sdirk3].into_iter().enumerate() {
                for (i, &steps) in T10_STEPS.iter().enumerate() {
                    let mut cfg = self.base(ProblemKind::Heat);
                    cfg.r = r;
                    cfg.quadrature = rule;
                    cfg.restart = Restart::Every(1);
                    if reading == StepReading::L {
                        cfg.sub_intervals = steps;
                        cfg.fine_steps = 1;
                        if cfg.workers == Count::AUTO {
                            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
                            cfg.workers = Count::Fixed(cores.min(steps));
                        }
                    } else {
                        cfg.fine_steps = steps;
                    }
                    let got = iterations(self.solve(&cfg).ok().as_ref());
                    cells.push(count(got));
                    let want = reference[2 * j + i];
                    let tol = Tolerance::Range(want - 2.0, (want + 2.0).min(T10_CAP));
                    self.expect(&label, &columns[2 * j + i], want, tol, got);
                }
            }
            self.csv.push(cells);
        }
    }
}

fn iterations(rep: Option<&KrylovReport>) -> Option<f64> {
    rep.map(|r| r.iterations as f64)
}

fn num(v: Option<f64>) -> Cell {
    v.map_or(Cell::Failed, Cell::Num)
}

fn count(v: Option<f64>) -> Cell {
    v.map_or(Cell::Failed, |x| Cell::Int(x as i64))
}

fn spectrum_cells(s: Option<&SpectrumReport>, pick: impl Fn(&SpectrumReport) -> [f64; 2]) -> [Cell; 2] {
    match s {
        Some(s) => pick(s).map(Cell::Num),
        None => [Cell::Failed, Cell::Failed],
    }
}

fn solve_cells(rep: Option<&KrylovReport>) -> [Cell; 2] {
    match rep {
        Some(r) => [Cell::from(r.iterations), Cell::Num(r.final_residual)],
        None => [Cell::Failed, Cell::Failed],
    }
}
