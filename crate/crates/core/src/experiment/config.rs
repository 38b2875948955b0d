use crate::error::{Error, Result};
use crate::krylov::PrecondSide;
use crate::model::{ProblemKind, Profile};
use crate::propagate::QuadratureRule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullKeyword {
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// GMRES restart length: an integer or `"full"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Restart {
    Every(usize),
    Full(FullKeyword),
}

impl Restart {
    pub const FULL: Restart = Restart::Full(FullKeyword::Full);

    pub fn cycle(self) -> Option<usize> {
        match self {
            Restart::Every(k) => Some(k),
            Restart::Full(_) => None,
        }
    }
}

/// A positive count or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Count {
    Fixed(usize),
    Auto(AutoKeyword),
}

impl Count {
    pub const AUTO: Count = Count::Auto(AutoKeyword::Auto);

    pub fn resolve(self, auto: usize) -> usize {
        match self {
            Count::Fixed(n) => n,
            Count::Auto(_) => auto,
        }
    }
}

/// Fully specified experiment. Field names follow the JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub r: usize,
    #[serde(rename = "L")]
    pub sub_intervals: usize,
    #[serde(rename = "N")]
    pub fine_steps: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha: f64,
    pub quadrature: QuadratureRule,
    pub precond: Switch,
    pub restart: Restart,
    pub tol: f64,
    pub maxit: Count,
    pub side: PrecondSide,
    pub workers: Count,
    pub seed: u64,
    pub trajectory: bool,
    pub target: Profile,
}

/// Partial configuration as read from a file or assembled from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub problem: Option<ProblemKind>,
    pub r: Option<usize>,
    #[serde(rename = "L")]
    pub sub_intervals: Option<usize>,
    #[serde(rename = "N")]
    pub fine_steps: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub alpha: Option<f64>,
    pub quadrature: Option<QuadratureRule>,
    pub precond: Option<Switch>,
    pub restart: Option<Restart>,
    pub tol: Option<f64>,
    pub maxit: Option<Count>,
    pub side: Option<PrecondSide>,
    pub workers: Option<Count>,
    pub seed: Option<u64>,
    pub trajectory: Option<bool>,
    pub target: Option<Profile>,
}

impl ConfigPatch {
    /// Keys set in `other` win.
    pub fn merged(&self, other: &ConfigPatch) -> ConfigPatch {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigPatch { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            problem, r, sub_intervals, fine_steps, horizon, alpha, quadrature, precond, restart, tol,
            maxit, side, workers, seed, trajectory, target
        )
    }
}

impl ExperimentConfig {
    /// Settings of the heat experiments: restart 1, 500 iterations, SDIRK3.
    pub fn heat_defaults() -> Self {
        Self {
            problem: ProblemKind::Heat,
            r: 100,
            sub_intervals: 10,
            fine_steps: 1000,
            horizon: 1.0,
            alpha: 1e-4,
            quadrature: QuadratureRule::Sdirk3,
            precond: Switch::On,
            restart: Restart::Every(1),
            tol: 1e-8,
            maxit: Count::AUTO,
            side: PrecondSide::Right,
            workers: Count::AUTO,
            seed: 0,
            trajectory: false,
            target: Profile::GaussTarget,
        }
    }

    /// Settings of the wave experiments: full GMRES, implicit Euler, T = 2.3.
    pub fn wave_defaults() -> Self {
        Self {
            problem: ProblemKind::Wave,
            horizon: 2.3,
            alpha: 1e-6,
            quadrature: QuadratureRule::ImplicitEuler,
            restart: Restart::FULL,
            ..Self::heat_defaults()
        }
    }

    pub fn defaults(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Heat => Self::heat_defaults(),
            ProblemKind::Wave => Self::wave_defaults(),
        }
    }

    /// Family defaults overridden by every key present in `patch`.
    pub fn from_patch(patch: &ConfigPatch) -> Result<Self> {
        let base = Self::defaults(patch.problem.unwrap_or(ProblemKind::Heat));
        let cfg = Self {
            problem: base.problem,
            r: patch.r.unwrap_or(base.r),
            sub_intervals: patch.sub_intervals.unwrap_or(base.sub_intervals),
            fine_steps: patch.fine_steps.unwrap_or(base.fine_steps),
            horizon: patch.horizon.unwrap_or(base.horizon),
            alpha: patch.alpha.unwrap_or(base.alpha),
            quadrature: patch.quadrature.unwrap_or(base.quadrature),
            precond: patch.precond.unwrap_or(base.precond),
            restart: patch.restart.unwrap_or(base.restart),
            tol: patch.tol.unwrap_or(base.tol),
            maxit: patch.maxit.unwrap_or(base.maxit),
            side: patch.side.unwrap_or(base.side),
            workers: patch.workers.unwrap_or(base.workers),
            seed: patch.seed.unwrap_or(base.seed),
            trajectory: patch.trajectory.unwrap_or(base.trajectory),
            target: patch.target.unwrap_or(base.target),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let patch: ConfigPatch = parse_patch(text)?;
        Self::from_patch(&patch)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.r == 0 || self.sub_intervals == 0 || self.fine_steps == 0 {
            return bad("r, L and N must be positive".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.restart == Restart::Every(0) {
            return bad("restart must be positive or \"full\"".into());
        }
        if self.maxit == Count::Fixed(0) || self.workers == Count::Fixed(0) {
            return bad("maxit and workers must be positive or \"auto\"".into());
        }
        if self.precond == Switch::On && self.side == PrecondSide::None {
            return bad("precond \"on\" needs side \"left\" or \"right\"".into());
        }
        if !matches!(self.target, Profile::GaussTarget | Profile::TargetPolynomial | Profile::Zero) {
            return bad("target must be gauss_target, target_polynomial or zero".into());
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.problem.state_dim(self.r)
    }

    /// `"auto"` is 500 for heat and the system size for wave.
    pub fn resolved_maxit(&self) -> usize {
        let auto = match self.problem {
            ProblemKind::Heat => 500,
            ProblemKind::Wave => self.state_dim(),
        };
        self.maxit.resolve(auto)
    }

    /// `"auto"` is one worker per sub-interval.
    pub fn resolved_workers(&self) -> usize {
        self.workers.resolve(self.sub_intervals)
    }

    pub fn preconditioned(&self) -> bool {
        self.precond == Switch::On
    }

    /// GMRES side actually used: `None` whenever preconditioning is off.
    pub fn effective_side(&self) -> PrecondSide {
        if self.preconditioned() {
            self.side
        } else {
            PrecondSide::None
        }
    }
}

pub fn parse_patch(text: &str) -> Result<ConfigPatch> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
