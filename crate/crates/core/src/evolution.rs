//! The generational loop: attempts, model updates, mortality and
//! fitness-proportional reproduction.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{choose_individual_action, execute_attempt, social_learn, AgentState, Strategy};
use crate::config::{ConfigError, Inheritance, MortalitySign, SimConfig};
use crate::event::AttemptEvent;
use crate::semantic::{export_similarity_matrix, perturb_net, EmbeddingNet, SimilarityMatrix};
use crate::task::{Inventory, TaskTree};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("age must be non-negative, got {0}")]
    NegativeAge(f64),
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

/// Per-generation probability of death at `age`.
pub fn death_probability(age: f64, a: f64, b: f64, sign: MortalitySign) -> Result<f64, SimError> {
    if age.is_nan() || age < 0.0 {
        return Err(SimError::NegativeAge(age));
    }
    let p = match sign {
        MortalitySign::Increasing => a * (b * age).exp(),
        MortalitySign::Verbatim => a * (-b * age).exp(),
    };
    Ok(p.min(1.0))
}

/// Removes each agent independently with its age-dependent hazard. One
/// uniform draw per agent, in population order.
pub fn apply_mortality<R: Rng + ?Sized>(population: Vec<AgentState>, cfg: &SimConfig, rng: &mut R) -> Vec<AgentState> {
    let m = cfg.mortality;
    population
        .into_iter()
        .filter(|a| {
            let p = death_probability(a.age as f64, m.a, m.b, m.sign).expect("ages are non-negative");
            rng.random::<f64>() >= p
        })
        .collect()
}

/// Hands out fresh agent ids.
#[derive(Debug, Clone, Default)]
pub struct IdSource(u64);

impl IdSource {
    pub fn starting_at(next: u64) -> Self {
        Self(next)
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

fn fresh_net<R: Rng + ?Sized>(tree: &TaskTree, cfg: &SimConfig, rng: &mut R) -> EmbeddingNet {
    let mut net = EmbeddingNet::random(tree.len(), cfg.embed_dim, cfg.hidden_dim, rng).expect("validated dimensions");
    net.learning_rate = cfg.learning_rate;
    net
}

/// A naive population laid out by the initial strategy mix, in strategy
/// order.
pub fn initial_population<R: Rng + ?Sized>(tree: &TaskTree, cfg: &SimConfig, ids: &mut IdSource, rng: &mut R) -> Vec<AgentState> {
    let counts = cfg.strategy_mix.counts(cfg.population_size);
    let mut out = Vec::with_capacity(cfg.population_size);
    for (strategy, &count) in Strategy::ALL.iter().zip(&counts) {
        for _ in 0..count {
            let net = strategy.semantic.then(|| fresh_net(tree, cfg, rng));
            out.push(AgentState::new(ids.next_id(), *strategy, cfg.behavior(), tree, net).expect("net present when semantic"));
        }
    }
    out
}

/// Survivors age by one and persist; vacancies are filled by offspring of
/// survivors sampled with weight `score + 1`. Returns the new population and
/// whether the population had gone extinct (then refilled from scratch).
pub fn select_and_reproduce<R: Rng + ?Sized>(
    mut survivors: Vec<AgentState>,
    tree: &TaskTree,
    cfg: &SimConfig,
    ids: &mut IdSource,
    rng: &mut R,
) -> (Vec<AgentState>, bool) {
    if survivors.is_empty() {
        return (initial_population(tree, cfg, ids, rng), true);
    }
    for a in &mut survivors {
        a.age += 1;
    }
    let vacancies = cfg.population_size.saturating_sub(survivors.len());
    if vacancies == 0 {
        return (survivors, false);
    }
    let weights: Vec<f64> = survivors.iter().map(|a| a.score.max(0) as f64 + 1.0).collect();
    let pick = WeightedIndex::new(&weights).expect("weights are at least 1");
    let mut children = Vec::with_capacity(vacancies);
    for _ in 0..vacancies {
        let parent = &survivors[pick.sample(rng)];
        let net = parent
            .net()
            .map(|n| perturb_net(n, cfg.transmission_noise_sd, rng).expect("validated noise"));
        let mut child = AgentState::new(ids.next_id(), parent.strategy, cfg.behavior(), tree, net).expect("parent net present");
        if let Inheritance::KnowledgePlusItems { loss_prob } = cfg.inheritance {
            for &item in parent.inventory.items() {
                if !tree.is_basic(item) && rng.random::<f64>() >= loss_prob {
                    child.inventory.insert(item);
                }
            }
        }
        children.push(child);
    }
    survivors.extend(children);
    (survivors, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StrategyCounts {
    pub semantic_social: usize,
    pub semantic_individual: usize,
    pub social: usize,
    pub random: usize,
}

impl StrategyCounts {
    pub fn of(population: &[AgentState]) -> Self {
        let mut c = [0usize; 4];
        for a in population {
            c[a.strategy.index()] += 1;
        }
        Self::from_array(c)
    }

    pub fn from_array(c: [usize; 4]) -> Self {
        Self { semantic_social: c[0], semantic_individual: c[1], social: c[2], random: c[3] }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.semantic_social, self.semantic_individual, self.social, self.random]
    }

    pub fn total(&self) -> usize {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub id: u64,
    pub strategy: Strategy,
    pub age: u32,
    pub score: i64,
    pub inventory_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// The population entering the next generation.
    pub agents: Vec<AgentSummary>,
    pub repertoire_instant: usize,
    pub repertoire_cumulative: usize,
    /// Mean lifetime score at the end of the attempt phase, before deaths.
    pub mean_score: f64,
    pub strategy_counts: StrategyCounts,
    pub deaths: usize,
    pub extinction: bool,
    #[serde(default)]
    pub events: Vec<AttemptEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub replicate: usize,
    pub config: SimConfig,
    /// The initial population followed by one record per generation.
    pub records: Vec<GenerationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityMatrix>,
}

/// Mutable state of one replicate between generations.
pub struct World<'a> {
    pub tree: &'a TaskTree,
    pub cfg: &'a SimConfig,
    pub population: Vec<AgentState>,
    pub ids: IdSource,
    pub discovered: Inventory,
    pub clock: u64,
    pub rng: ChaCha8Rng,
}

/// The generator of replicate `replicate`: the master seed selects the
/// key, the replicate index the stream.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn summarize(pop: &[AgentState]) -> Vec<AgentSummary> {
    pop.iter()
        .map(|a| AgentSummary { id: a.id, strategy: a.strategy, age: a.age, score: a.score, inventory_size: a.inventory.len() })
        .collect()
}

fn mean_score(pop: &[AgentState]) -> f64 {
    if pop.is_empty() {
        return 0.0;
    }
    pop.iter().map(|a| a.score as f64).sum::<f64>() / pop.len() as f64
}

fn instant_repertoire(tree: &TaskTree, pop: &[AgentState]) -> usize {
    let mut all = Inventory::empty(tree.len());
    for a in pop {
        for &i in a.inventory.items() {
            all.insert(i);
        }
    }
    all.len()
}

impl<'a> World<'a> {
    pub fn new(tree: &'a TaskTree, cfg: &'a SimConfig, replicate: usize) -> Self {
        let mut rng = replicate_rng(cfg.seed, replicate);
        let mut ids = IdSource::default();
        let population = initial_population(tree, cfg, &mut ids, &mut rng);
        Self { tree, cfg, population, ids, discovered: Inventory::basic(tree), clock: 0, rng }
    }

    pub fn initial_record(&self) -> GenerationRecord {
        GenerationRecord {
            generation: 0,
            agents: summarize(&self.population),
            repertoire_instant: instant_repertoire(self.tree, &self.population),
            repertoire_cumulative: self.discovered.len(),
            mean_score: mean_score(&self.population),
            strategy_counts: StrategyCounts::of(&self.population),
            deaths: 0,
            extinction: false,
            events: Vec::new(),
        }
    }

    /// Runs generation `generation` (1-based) and returns its record.
    pub fn step(&mut self, generation: usize) -> GenerationRecord {
        let (tree, cfg) = (self.tree, self.cfg);
        let opts = cfg.learning();
        let mut events = Vec::new();
        for i in 0..self.population.len() {
            let mut slots = cfg.n_attempt;
            while slots > 0 {
                let social = self.rng.random::<f64>() < self.population[i].params.p_sl;
                let t = self.clock;
                self.clock += 1;
                let (ev, cost) = if social {
                    let ev = social_learn(&mut self.population, i, tree, t, &opts, &mut self.rng)
                        .expect("population has at least two members");
                    (ev, 1)
                } else {
                    let (c, route) = choose_individual_action(&self.population[i], opts.predict_mode, &mut self.rng);
                    let ev = execute_attempt(&mut self.population[i], tree, c, t, &opts).expect("chosen items are owned");
                    (ev, if route.used_net() { self.population[i].params.semantic_cost } else { 1 })
                };
                if let Some(item) = ev.outcome {
                    self.discovered.insert(item);
                }
                if cfg.record_actions {
                    events.push(ev);
                }
                slots = slots.saturating_sub(cost);
            }
        }
        for a in &mut self.population {
            a.update_model(cfg.train_epochs, cfg.learning_rate);
        }
        let mean = mean_score(&self.population);

        let before = self.population.len();
        let survivors = apply_mortality(std::mem::take(&mut self.population), cfg, &mut self.rng);
        let deaths = before - survivors.len();
        let (population, extinction) = select_and_reproduce(survivors, tree, cfg, &mut self.ids, &mut self.rng);
        self.population = population;

        GenerationRecord {
            generation,
            agents: summarize(&self.population),
            repertoire_instant: instant_repertoire(tree, &self.population),
            repertoire_cumulative: self.discovered.len(),
            mean_score: mean,
            strategy_counts: StrategyCounts::of(&self.population),
            deaths,
            extinction,
            events,
        }
    }

    /// Similarity matrix of the highest-scoring semantic agent, if any.
    pub fn best_similarity(&self) -> Option<SimilarityMatrix> {
        let best = self
            .population
            .iter()
            .filter(|a| a.net().is_some())
            .max_by(|a, b| a.score.cmp(&b.score).then(b.id.cmp(&a.id)))?;
        let labels: Vec<String> = self.tree.items().iter().map(|i| i.name.clone()).collect();
        Some(export_similarity_matrix(best.net().unwrap(), Some(&labels)))
    }
}

/// Runs one replicate to completion with an already-loaded tree.
pub fn run_replicate(tree: &TaskTree, cfg: &SimConfig, replicate: usize) -> Trajectory {
    let mut world = World::new(tree, cfg, replicate);
    let mut records = Vec::with_capacity(cfg.generations + 1);
    records.push(world.initial_record());
    for g in 1..=cfg.generations {
        records.push(world.step(g));
    }
    let similarity = if cfg.export_similarity { world.best_similarity() } else { None };
    Trajectory { replicate, config: cfg.clone(), records, similarity }
}

/// Runs replicate 0 of `cfg`.
pub fn run_simulation(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let tree = cfg.load_tree()?;
    Ok(run_replicate(&tree, cfg, 0))
}

/// Runs every replicate on a pool of `jobs` threads; results are ordered by
/// replicate index whatever the scheduling.
pub fn run_replicates(cfg: &SimConfig, jobs: usize) -> Result<Vec<Trajectory>, SimError> {
    cfg.validate()?;
    let tree = cfg.load_tree()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..cfg.replicates).into_par_iter().map(|r| run_replicate(&tree, cfg, r)).collect()))
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "replicate",
    "generation",
    "repertoire_instant",
    "repertoire_cumulative",
    "mean_score",
    "semantic_social",
    "semantic_individual",
    "social",
    "random",
];

/// Summary fields of one record, formatted for CSV.
pub fn summary_fields(replicate: usize, r: &GenerationRecord) -> Vec<String> {
    let c = r.strategy_counts.as_array();
    let mut row = vec![
        replicate.to_string(),
        r.generation.to_string(),
        r.repertoire_instant.to_string(),
        r.repertoire_cumulative.to_string(),
        format!("{:.6}", r.mean_score),
    ];
    row.extend(c.iter().map(|x| x.to_string()));
    row
}

pub fn write_summary_csv<W: Write>(w: W, trajectories: &[Trajectory]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for t in trajectories {
        for r in &t.records {
            out.write_record(summary_fields(t.replicate, r))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One JSON line per generation record.
pub fn write_trajectory_jsonl<W: Write>(mut w: W, t: &Trajectory) -> std::io::Result<()> {
    for r in &t.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
