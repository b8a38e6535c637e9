use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::matching::{TargetMode, DEFAULT_BUDGET};
use crate::model::CtmcModel;
use crate::pathsim::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lln,
    LlnSchedule,
    Clt,
    LdpEmpirical,
    Expolaw,
    Shadow,
    NaiveReturn,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Lln,
        ExperimentKind::LlnSchedule,
        ExperimentKind::Clt,
        ExperimentKind::LdpEmpirical,
        ExperimentKind::Expolaw,
        ExperimentKind::Shadow,
        ExperimentKind::NaiveReturn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lln => "lln",
            ExperimentKind::LlnSchedule => "lln_schedule",
            ExperimentKind::Clt => "clt",
            ExperimentKind::LdpEmpirical => "ldp_empirical",
            ExperimentKind::Expolaw => "expolaw",
            ExperimentKind::Shadow => "shadow",
            ExperimentKind::NaiveReturn => "naive_return",
        }
    }

    /// Kinds that compare `X` against a second chain `Y`.
    pub fn uses_pair(self) -> bool {
        !matches!(self, ExperimentKind::Expolaw | ExperimentKind::NaiveReturn)
    }
}

/// Discretization step, fixed or shrinking with `n` as `a n^{-b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed(f64),
    Power { a: f64, b: f64 },
}

impl DeltaRule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Power { a, b } => a * (n as f64).powf(-b),
        }
    }

    pub fn fixed(&self) -> Option<f64> {
        match *self {
            DeltaRule::Fixed(d) => Some(d),
            DeltaRule::Power { .. } => None,
        }
    }

    /// For `delta_n = a n^{-b}`: `log n / (n delta_n^2) = log n * n^{2b-1} / a^2`
    /// tends to 0 exactly when `b < 1/2`; `delta_n -> 0` needs `b > 0`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaRule::Fixed(d) => {
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::InvalidPlan(format!("delta must be positive (got {d})")));
                }
            }
            DeltaRule::Power { a, b } => {
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidPlan(format!(
                        "schedule delta_n = a n^-b needs a > 0 (got a = {a})"
                    )));
                }
                if !(b > 0.0) {
                    return Err(Error::InvalidPlan(format!(
                        "schedule delta_n = a n^-b must tend to 0, so b > 0 (got b = {b})"
                    )));
                }
                if !(b < 0.5) {
                    return Err(Error::InvalidPlan(format!(
                        "schedule delta_n = a n^-{b} violates the hypothesis log n / (n delta_n^2) -> 0 \
                         of the schedule law of large numbers (requires b < 1/2)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where the shadowed path comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSource {
    /// A fresh stationary path of this chain for every replica.
    Model(CtmcModel),
    /// The same recorded path for every replica.
    Fixed(Trajectory),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    pub kind: ExperimentKind,
    pub model_x: CtmcModel,
    pub model_y: CtmcModel,
    /// `model_y` is the time reversal of `model_x`.
    pub y_is_reversed: bool,
    pub delta: DeltaRule,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub budget: u64,
    pub seed: u64,
    pub target_mode: TargetMode,
    /// `p` values for the empirical generating function.
    pub p_grid: Vec<f64>,
    /// Steps for the return-time diagnostic.
    pub deltas: Vec<f64>,
    pub gamma: Option<GammaSource>,
    /// Number of sampled patterns for the exponential-law check.
    pub patterns: usize,
    /// Tolerance for the fraction-within-epsilon statistic.
    pub epsilon: f64,
    pub kappa: (f64, f64),
}

/// Largest `|p|` accepted for the empirical generating function.
pub const LDP_P_LIMIT: f64 = 0.8;

impl ExperimentPlan {
    pub fn new(name: &str, kind: ExperimentKind, model_x: CtmcModel, model_y: CtmcModel) -> Self {
        Self {
            name: name.to_string(),
            kind,
            model_x,
            model_y,
            y_is_reversed: false,
            delta: DeltaRule::Fixed(0.1),
            n_grid: vec![200],
            replicas: 200,
            budget: DEFAULT_BUDGET,
            seed: 1,
            target_mode: TargetMode::Auto,
            p_grid: vec![-0.75, -0.5, -0.25, 0.0, 0.25],
            deltas: vec![0.2, 0.1, 0.05, 0.025],
            gamma: None,
            patterns: 10,
            epsilon: 0.1,
            kappa: (10.0, 10.0),
        }
    }

    pub fn max_n(&self) -> usize {
        self.n_grid.iter().copied().max().unwrap_or(0)
    }

    /// Rejects every plan that an experiment could not run faithfully and
    /// names the violated requirement.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(format!("plan '{}': {m}", self.name)));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n grid must be nonempty with every n >= 1".into());
        }
        self.delta
            .validate()
            .map_err(|e| Error::InvalidPlan(format!("plan '{}': {e}", self.name)))?;
        match (self.kind, self.delta) {
            (ExperimentKind::LlnSchedule, DeltaRule::Fixed(_)) => {
                return bad("lln_schedule needs a schedule delta_n = a n^-b, not a fixed delta".into())
            }
            (k, DeltaRule::Power { .. }) if k != ExperimentKind::LlnSchedule => {
                return bad(format!("{} needs a fixed delta", k.name()))
            }
            _ => {}
        }
        if self.model_x.num_states() != self.model_y.num_states() {
            return bad("model_x and model_y have different state spaces".into());
        }
        if self.kind.uses_pair() {
            exact::check_absolute_continuity(&self.model_x, &self.model_y)
                .map_err(|e| Error::InvalidPlan(format!("plan '{}': {e}", self.name)))?;
        }
        if (self.budget as u128) < (self.max_n() as u128 + 1) {
            return bad(format!(
                "budget {} is shorter than the longest pattern ({})",
                self.budget,
                self.max_n() + 1
            ));
        }
        match self.kind {
            ExperimentKind::LdpEmpirical => {
                if self.p_grid.is_empty() {
                    return bad("p grid is empty".into());
                }
                if let Some(p) = self.p_grid.iter().find(|p| !(p.abs() <= LDP_P_LIMIT)) {
                    return bad(format!(
                        "p = {p} outside [-{LDP_P_LIMIT}, {LDP_P_LIMIT}]: empirical moments are unreliable \
                         near |p| = 1 and infinite beyond"
                    ));
                }
            }
            ExperimentKind::NaiveReturn => {
                let mut d = self.deltas.clone();
                d.sort_by(f64::total_cmp);
                d.dedup();
                if d.len() < 3 {
                    return bad("naive_return needs at least 3 distinct deltas to fit a + b d + c d log d".into());
                }
                let cmax = self.model_x.escape_rates().iter().copied().fold(0.0, f64::max);
                if let Some(x) = d.iter().find(|&&x| !(x > 0.0) || x * cmax >= 1.0) {
                    return bad(format!(
                        "delta {x} must satisfy 0 < delta * max c < 1 for the expansion"
                    ));
                }
            }
            ExperimentKind::Expolaw => {
                if self.patterns == 0 {
                    return bad("expolaw needs at least one pattern".into());
                }
            }
            ExperimentKind::Shadow => match &self.gamma {
                Some(GammaSource::Fixed(t)) => {
                    let need = self.max_n() as f64 * self.delta.delta(self.max_n());
                    if t.horizon() < need * (1.0 - 1e-12) {
                        return bad(format!(
                            "shadowed path covers {} time units, n delta needs {need}",
                            t.horizon()
                        ));
                    }
                }
                Some(GammaSource::Model(q)) => {
                    if q.num_states() != self.model_x.num_states() {
                        return bad("gamma model has a different state space".into());
                    }
                    exact::shadow_flux_limit(q, &self.model_x, &self.model_y)
                        .map_err(|e| Error::InvalidPlan(format!("plan '{}': {e}", self.name)))?;
                }
                None => {}
            },
            ExperimentKind::LlnSchedule => {
                if !(self.epsilon > 0.0) {
                    return bad("epsilon must be positive".into());
                }
            }
            _ => {}
        }
        if !(self.kappa.0 > 0.0 && self.kappa.1 > 0.0) {
            return bad("kappa constants must be positive".into());
        }
        Ok(())
    }

    /// Plan parameters echoed into reports.
    pub fn params_json(&self) -> serde_json::Value {
        let delta = match self.delta {
            DeltaRule::Fixed(d) => serde_json::json!(d),
            DeltaRule::Power { a, b } => serde_json::json!({"a": a, "b": b}),
        };
        serde_json::json!({
            "name": self.name,
            "kind": self.kind.name(),
            "delta": delta,
            "n": self.n_grid,
            "replicas": self.replicas,
            "budget": self.budget,
            "seed": self.seed,
            "target_mode": self.target_mode,
            "y_is_reversed": self.y_is_reversed,
        })
    }
}
