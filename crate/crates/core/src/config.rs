//! Simulation and sweep configuration, read from JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{BehaviorParams, LearningOptions, Strategy};
use crate::semantic::PredictMode;
use crate::task::{generate_task_variant, load_task_tree, TaskError, TaskTree, VariantMode};

/// Initial fraction of each strategy in the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyMix {
    pub semantic_social: f64,
    pub semantic_individual: f64,
    pub social: f64,
    pub random: f64,
}

impl StrategyMix {
    pub fn only(strategy: Strategy) -> Self {
        let mut f = [0.0; 4];
        f[strategy.index()] = 1.0;
        Self::from_array(f)
    }

    pub fn fractions(&self) -> [f64; 4] {
        [self.semantic_social, self.semantic_individual, self.social, self.random]
    }

    fn from_array(f: [f64; 4]) -> Self {
        Self { semantic_social: f[0], semantic_individual: f[1], social: f[2], random: f[3] }
    }

    /// Splits `n` individuals by largest remainder; leftover seats go to the
    /// largest fractional parts, earlier strategies first on ties.
    pub fn counts(&self, n: usize) -> [usize; 4] {
        let f = self.fractions();
        let total: f64 = f.iter().sum();
        let exact: Vec<f64> = f.iter().map(|x| x / total * n as f64).collect();
        let mut counts = [0usize; 4];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut left = n - counts.iter().sum::<usize>();
        for i in order {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

impl Default for StrategyMix {
    fn default() -> Self {
        Self::from_array([0.25; 4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortalitySign {
    /// Gompertz hazard growing with age, capped at 1.
    #[default]
    Increasing,
    /// The hazard exactly as printed, a·e^(−b·age), shrinking with age.
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mortality {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub sign: MortalitySign,
}

impl Default for Mortality {
    fn default() -> Self {
        Self { a: 0.0001365, b: 0.2097, sign: MortalitySign::Increasing }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inheritance {
    /// Offspring inherit only the (perturbed) semantic network.
    #[default]
    KnowledgeOnly,
    /// Offspring also receive each parent item with probability `1 - loss_prob`.
    KnowledgePlusItems { loss_prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSource {
    #[default]
    Default,
    File { path: PathBuf },
    Variant {
        mode: VariantMode,
        #[serde(default)]
        level_sizes: Option<Vec<usize>>,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub population_size: usize,
    pub generations: usize,
    pub n_attempt: u32,
    pub p_sl: f64,
    pub p_s: f64,
    pub p_g: f64,
    pub semantic_cost: u32,
    pub strategy_mix: StrategyMix,
    pub mortality: Mortality,
    pub inheritance: Inheritance,
    pub transmission_noise_sd: f64,
    pub train_on_observation: bool,
    pub include_product_pairs: bool,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Passes over the buffered pairs at each end-of-generation update.
    pub train_epochs: usize,
    pub predict_mode: PredictMode,
    pub score_base: f64,
    pub task: TaskSource,
    pub seed: u64,
    pub replicates: usize,
    /// Keep every attempt event in the generation records.
    pub record_actions: bool,
    /// Export the similarity matrix of the best semantic agent at the end.
    pub export_similarity: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 150,
            n_attempt: 10,
            p_sl: 0.5,
            p_s: 0.9,
            p_g: 0.1,
            semantic_cost: 1,
            strategy_mix: StrategyMix::default(),
            mortality: Mortality::default(),
            inheritance: Inheritance::default(),
            transmission_noise_sd: 0.0,
            train_on_observation: true,
            include_product_pairs: false,
            embed_dim: 16,
            hidden_dim: 16,
            learning_rate: 0.05,
            train_epochs: 5,
            predict_mode: PredictMode::Sample,
            score_base: 2.0,
            task: TaskSource::Default,
            seed: 0,
            replicates: 1,
            record_actions: true,
            export_similarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot load task: {0}")]
    Task(#[from] TaskError),
    #[error("cannot read task file {path}: {source}")]
    TaskFile { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Invalid(v) => v.iter().map(|e| e.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn probability(errors: &mut Vec<FieldError>, field: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        errors.push(FieldError { field: field.into(), message: format!("{v} is not a probability in [0, 1]") });
    }
}

fn positive(errors: &mut Vec<FieldError>, field: &str, v: usize) {
    if v == 0 {
        errors.push(FieldError { field: field.into(), message: "must be a positive integer".into() });
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field and reports all problems together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        positive(&mut e, "population_size", self.population_size);
        positive(&mut e, "n_attempt", self.n_attempt as usize);
        positive(&mut e, "replicates", self.replicates);
        positive(&mut e, "embed_dim", self.embed_dim);
        positive(&mut e, "hidden_dim", self.hidden_dim);
        probability(&mut e, "p_sl", self.p_sl);
        probability(&mut e, "p_s", self.p_s);
        probability(&mut e, "p_g", self.p_g);
        if !(1..=3).contains(&self.semantic_cost) {
            e.push(FieldError { field: "semantic_cost".into(), message: format!("{} is not in 1..=3", self.semantic_cost) });
        }
        let fr = self.strategy_mix.fractions();
        let names = ["semantic_social", "semantic_individual", "social", "random"];
        for (name, &v) in names.iter().zip(&fr) {
            probability(&mut e, &format!("strategy_mix.{name}"), v);
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            e.push(FieldError { field: "strategy_mix".into(), message: format!("fractions sum to {sum}, not 1") });
        }
        if !(self.mortality.a.is_finite() && self.mortality.a >= 0.0) {
            e.push(FieldError { field: "mortality.a".into(), message: "must be finite and non-negative".into() });
        }
        if !self.mortality.b.is_finite() {
            e.push(FieldError { field: "mortality.b".into(), message: "must be finite".into() });
        }
        if let Inheritance::KnowledgePlusItems { loss_prob } = self.inheritance {
            probability(&mut e, "inheritance.loss_prob", loss_prob);
        }
        if !(self.transmission_noise_sd.is_finite() && self.transmission_noise_sd >= 0.0) {
            e.push(FieldError { field: "transmission_noise_sd".into(), message: "must be finite and non-negative".into() });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            e.push(FieldError { field: "learning_rate".into(), message: "must be finite and positive".into() });
        }
        if !(self.score_base.is_finite() && self.score_base > 0.0) {
            e.push(FieldError { field: "score_base".into(), message: "must be finite and positive".into() });
        }
        if let TaskSource::Variant { mode: VariantMode::Resize, level_sizes: None, .. } = self.task {
            e.push(FieldError { field: "task.level_sizes".into(), message: "required by the resize variant".into() });
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e))
        }
    }

    pub fn behavior(&self) -> BehaviorParams {
        BehaviorParams { p_sl: self.p_sl, p_s: self.p_s, p_g: self.p_g, semantic_cost: self.semantic_cost }
    }

    pub fn learning(&self) -> LearningOptions {
        LearningOptions {
            predict_mode: self.predict_mode,
            train_on_observation: self.train_on_observation,
            include_product_pairs: self.include_product_pairs,
        }
    }

    pub fn load_tree(&self) -> Result<TaskTree, ConfigError> {
        let tree = match &self.task {
            TaskSource::Default => TaskTree::default_tree(),
            TaskSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ConfigError::TaskFile { path: path.clone(), source })?;
                load_task_tree(&text)?
            }
            TaskSource::Variant { mode, level_sizes, seed } => {
                generate_task_variant(&TaskTree::default_tree(), *mode, level_sizes.as_deref(), *seed)?
            }
        };
        Ok(tree.with_score_base(self.score_base))
    }
}

/// A grid of configurations: the cross product of `axes` applied to `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SimConfig,
    /// Dotted field path → values, e.g. `"mortality.sign": ["increasing"]`.
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<Value>>,
    /// Overrides `base.replicates` when set.
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_max_runs() -> usize {
    10_000
}

/// One grid point; `assignments` lists the axis values in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub assignments: Vec<(String, Value)>,
    pub config: SimConfig,
}

impl SweepCell {
    /// `field=value;field=value`, or `base` for the empty grid.
    pub fn label(&self) -> String {
        if self.assignments.is_empty() {
            return "base".into();
        }
        self.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> bool {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let Some(obj) = cur.as_object_mut() else { return false };
        if i + 1 == parts.len() {
            if !obj.contains_key(*p) {
                return false;
            }
            obj.insert((*p).to_string(), v);
            return true;
        }
        match obj.get_mut(*p) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    false
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.cells()?;
        Ok(spec)
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(self.base.replicates)
    }

    /// Expands the grid; the last axis (in key order) varies fastest.
    pub fn cells(&self) -> Result<Vec<SweepCell>, ConfigError> {
        let mut errors = Vec::new();
        let base = serde_json::to_value(&self.base)?;
        for (field, values) in &self.axes {
            let mut probe = base.clone();
            if !set_path(&mut probe, field, Value::Null) {
                errors.push(FieldError { field: format!("axes.{field}"), message: "no such configuration field".into() });
            } else if values.is_empty() {
                errors.push(FieldError { field: format!("axes.{field}"), message: "needs at least one value".into() });
            }
        }
        let mut n_cells: usize = 1;
        for values in self.axes.values() {
            n_cells = n_cells.saturating_mul(values.len().max(1));
        }
        let runs = n_cells.saturating_mul(self.replicates());
        if runs > self.max_runs {
            errors.push(FieldError { field: "max_runs".into(), message: format!("grid needs {runs} runs, cap is {}", self.max_runs) });
        }
        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }

        let axes: Vec<(&String, &Vec<Value>)> = self.axes.iter().collect();
        let mut cells = Vec::with_capacity(n_cells);
        for index in 0..n_cells {
            let mut rem = index;
            let mut picks = vec![0; axes.len()];
            for (k, (_, values)) in axes.iter().enumerate().rev() {
                picks[k] = rem % values.len();
                rem /= values.len();
            }
            let mut value = base.clone();
            let mut assignments = Vec::new();
            for ((field, values), &pick) in axes.iter().zip(&picks) {
                set_path(&mut value, field, values[pick].clone());
                assignments.push(((*field).clone(), values[pick].clone()));
            }
            let mut config: SimConfig = serde_json::from_value(value)?;
            config.replicates = self.replicates();
            if let Err(ConfigError::Invalid(errs)) = config.validate() {
                let at = assignments.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
                errors.extend(errs.into_iter().map(|e| FieldError { message: format!("{} (cell {at})", e.message), ..e }));
                continue;
            }
            cells.push(SweepCell { index, assignments, config });
        }
        if errors.is_empty() {
            Ok(cells)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}
