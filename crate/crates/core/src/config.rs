//! JSON configuration files: named models and named experiment plans, plus
//! report and oracle file output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{DeltaRule, ExperimentKind, ExperimentOutput, ExperimentPlan, GammaSource};
use crate::exact;
use crate::matching::TargetMode;
use crate::model::{self, build_generator, CtmcModel, ModelSpec};
use crate::pathsim::Trajectory;
use crate::scgf::{self, ScgfCurve};

/// Name that resolves `model_y` to the time reversal of `model_x`.
pub const REVERSED: &str = "reversed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    /// Fresh stationary paths of the named model.
    Model(String),
    /// A trajectory CSV, relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub kind: ExperimentKind,
    pub model_x: String,
    /// Model name or `"reversed"`; defaults to `"reversed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mode: Option<TargetMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<[f64; 2]>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
    #[serde(default)]
    pub plans: BTreeMap<String, PlanSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the plan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
    pub budget: Option<u64>,
}

/// Outcome of validating one named item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCheck {
    /// JSON path of the item, e.g. `plans.lln_pair`.
    pub path: String,
    pub error: Option<String>,
}

impl Config {
    /// Parses a config; errors name the JSON path and position.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::InvalidInput(format!(
                "config parse error at line {} column {} (path {}): {}",
                inner.line(),
                inner.column(),
                if path.is_empty() || path == "." { "<root>".to_string() } else { path },
                inner
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn model(&self, name: &str) -> Result<CtmcModel> {
        let spec = self
            .models
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{name}'")))?;
        CtmcModel::try_from(spec.clone())
            .map_err(|e| Error::InvalidInput(format!("models.{name}: {e}")))
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve_path(&self.output_dir)
    }

    /// Builds the runnable plan `name`, applying overrides, and validates it.
    pub fn plan(&self, name: &str, ov: &Overrides) -> Result<ExperimentPlan> {
        let spec = self
            .plans
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown plan '{name}'")))?;
        let at = |e: Error| Error::InvalidPlan(format!("plans.{name}: {e}"));
        let x = self.model(&spec.model_x).map_err(at)?;
        let y_name = spec.model_y.as_deref().unwrap_or(REVERSED);
        let (y, reversed) = if y_name == REVERSED {
            (model::reversed(&x).map_err(at)?, true)
        } else {
            (self.model(y_name).map_err(at)?, false)
        };
        let mut plan = ExperimentPlan::new(name, spec.kind, x, y);
        plan.y_is_reversed = reversed;
        plan.seed = spec.seed.unwrap_or(self.seed);
        plan.delta = match (spec.delta, &spec.schedule) {
            (Some(_), Some(_)) => {
                return Err(at(Error::InvalidPlan("give either delta or schedule, not both".into())))
            }
            (Some(d), None) => DeltaRule::Fixed(d),
            (None, Some(s)) => DeltaRule::Power { a: s.a, b: s.b },
            (None, None) => plan.delta,
        };
        if let Some(n) = &spec.n {
            plan.n_grid = n.clone();
        }
        if spec.kind == ExperimentKind::LlnSchedule && spec.n.is_none() {
            plan.n_grid = vec![50, 200, 800];
        }
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = spec.$field.clone() {
                    plan.$field = v;
                }
            };
        }
        take!(replicas);
        take!(budget);
        take!(target_mode);
        take!(p_grid);
        take!(deltas);
        take!(patterns);
        take!(epsilon);
        if let Some([k1, k2]) = spec.kappa {
            plan.kappa = (k1, k2);
        }
        plan.gamma = match &spec.gamma {
            None => None,
            Some(GammaSpec::Model(m)) => Some(GammaSource::Model(self.model(m).map_err(at)?)),
            Some(GammaSpec::File(f)) => {
                let path = self.resolve_path(f);
                let file = fs::File::open(&path).map_err(|e| {
                    at(Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
                })?;
                Some(GammaSource::Fixed(
                    Trajectory::read_csv(file, plan.model_x.states()).map_err(at)?,
                ))
            }
        };
        if let Some(s) = ov.seed {
            plan.seed = s;
        }
        if let Some(r) = ov.replicas {
            plan.replicas = r;
        }
        if let Some(d) = ov.delta {
            plan.delta = DeltaRule::Fixed(d);
        }
        if let Some(n) = ov.n {
            plan.n_grid = vec![n];
        }
        if let Some(b) = ov.budget {
            plan.budget = b;
        }
        plan.validate()?;
        Ok(plan)
    }

    /// Validates every model and plan.
    pub fn check_all(&self) -> Vec<ItemCheck> {
        let mut out = Vec::new();
        for name in self.models.keys() {
            out.push(ItemCheck {
                path: format!("models.{name}"),
                error: self.model(name).err().map(|e| e.to_string()),
            });
        }
        for name in self.plans.keys() {
            out.push(ItemCheck {
                path: format!("plans.{name}"),
                error: self.plan(name, &Overrides::default()).err().map(|e| e.to_string()),
            });
        }
        out
    }
}

/// Writes `<plan>_summary.json` and one `<plan>_<table>.csv` per table.
pub fn write_output(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = &out.report.experiment;
    let mut written = Vec::new();
    let summary = dir.join(format!("{stem}_summary.json"));
    out.report.write_json(fs::File::create(&summary)?)?;
    written.push(summary);
    for t in &out.tables {
        let p = dir.join(format!("{stem}_{}.csv", t.name));
        t.write_csv(fs::File::create(&p)?)?;
        written.push(p);
    }
    Ok(written)
}

/// Exact quantities for one model, or a pair.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub states: Vec<String>,
    pub stationary: Vec<f64>,
    pub entropy_production: f64,
    /// Smallest nonzero `|Re|` of the generator spectrum of the first model.
    pub spectral_gap: f64,
    pub relative_entropy: f64,
    pub theta2: f64,
    pub continuous: ScgfCurve,
    pub discrete: Vec<ScgfCurve>,
}

impl OracleReport {
    pub fn compute(x: &CtmcModel, y: &CtmcModel, deltas: &[f64], p_grid: &[f64]) -> Result<Self> {
        let mu = model::stationary_of(x)?;
        let discrete = deltas
            .iter()
            .map(|&d| {
                let px = exact::discretized_transition_matrix(x, d)?;
                let py = exact::discretized_transition_matrix(y, d)?;
                scgf::discrete_scgf(&px, &py, &mu, d, p_grid)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            states: x.states().to_vec(),
            stationary: mu.probs().to_vec(),
            entropy_production: exact::entropy_production_rate(x)?,
            spectral_gap: exact::spectral_gap(&build_generator(x))?,
            relative_entropy: exact::relative_entropy_rate(x, y)?,
            theta2: exact::continuous_variance(x, y)?,
            continuous: scgf::continuous_scgf(x, y, p_grid)?,
            discrete,
        })
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "states": self.states,
            "stationary": self.stationary,
            "relative_entropy_rate": self.relative_entropy,
            "entropy_production_rate": self.entropy_production,
            "spectral_gap": self.spectral_gap,
            "theta2": self.theta2,
        })
    }

    /// Writes `oracle.json`, `scgf_continuous.csv`, `rate_continuous.csv`
    /// and `scgf_delta_<d>.csv` per step.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let p = dir.join("oracle.json");
        serde_json::to_writer_pretty(fs::File::create(&p)?, &self.summary_json())?;
        written.push(p);
        let p = dir.join("scgf_continuous.csv");
        self.continuous.write_csv(fs::File::create(&p)?)?;
        written.push(p);
        if let Ok(rate) = scgf::legendre_transform(&self.continuous) {
            let p = dir.join("rate_continuous.csv");
            rate.write_csv(fs::File::create(&p)?)?;
            written.push(p);
        }
        for c in &self.discrete {
            if let scgf::ScgfKind::Discrete { delta } = c.kind {
                let p = dir.join(format!("scgf_delta_{delta}.csv"));
                c.write_csv(fs::File::create(&p)?)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}
