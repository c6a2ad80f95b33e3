//! Individual behaviour: choosing and executing innovation attempts,
//! success-biased copying, and the random-bot baseline.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{AttemptEvent, EventKind};
use crate::semantic::{pairs_from_combination, predict_partner, EmbeddingNet, PredictMode, TrainingPair};
use crate::task::{resolve_attempt, sample_action, Combination, Inventory, ItemId, TaskError, TaskTree, MAX_COMBINATION};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent {agent} does not own item {item}")]
    Unowned { agent: u64, item: u32 },
    #[error("social learning needs at least two individuals")]
    SingletonPopulation,
    #[error("agent {0} has semantic capacity but no network")]
    MissingNet(u64),
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// Which capacities an individual has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strategy {
    pub semantic: bool,
    pub social: bool,
}

impl Strategy {
    pub const SEMANTIC_SOCIAL: Strategy = Strategy { semantic: true, social: true };
    pub const SEMANTIC_INDIVIDUAL: Strategy = Strategy { semantic: true, social: false };
    pub const SOCIAL: Strategy = Strategy { semantic: false, social: true };
    pub const RANDOM: Strategy = Strategy { semantic: false, social: false };
    pub const ALL: [Strategy; 4] = [Self::SEMANTIC_SOCIAL, Self::SEMANTIC_INDIVIDUAL, Self::SOCIAL, Self::RANDOM];

    pub fn label(self) -> &'static str {
        match (self.semantic, self.social) {
            (true, true) => "semantic_social",
            (true, false) => "semantic_individual",
            (false, true) => "social",
            (false, false) => "random",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }
}

/// Per-attempt branch probabilities plus the cost of consulting the net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub p_sl: f64,
    pub p_s: f64,
    pub p_g: f64,
    pub semantic_cost: u32,
}

impl BehaviorParams {
    /// Zeroes the probabilities of capacities `strategy` lacks.
    pub fn masked(self, strategy: Strategy) -> Self {
        Self {
            p_sl: if strategy.social { self.p_sl } else { 0.0 },
            p_s: if strategy.semantic { self.p_s } else { 0.0 },
            p_g: if strategy.semantic { self.p_g } else { 0.0 },
            semantic_cost: self.semantic_cost,
        }
    }
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self { p_sl: 0.5, p_s: 0.9, p_g: 0.1, semantic_cost: 1 }
    }
}

/// Knobs of the learning pipeline shared by all agents of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningOptions {
    pub predict_mode: PredictMode,
    pub train_on_observation: bool,
    pub include_product_pairs: bool,
}

impl Default for LearningOptions {
    fn default() -> Self {
        Self { predict_mode: PredictMode::Sample, train_on_observation: true, include_product_pairs: false }
    }
}

/// How an individual attempt was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionRoute {
    Random,
    Predict,
    Generalize,
}

impl ActionRoute {
    pub fn used_net(self) -> bool {
        self != ActionRoute::Random
    }
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: u64,
    pub age: u32,
    pub score: i64,
    pub inventory: Inventory,
    pub attempt_memory: HashSet<Combination>,
    pub success_memory: Vec<(Combination, ItemId)>,
    pub strategy: Strategy,
    pub params: BehaviorParams,
    net: Option<EmbeddingNet>,
    pub pending_pairs: Vec<TrainingPair>,
}

impl AgentState {
    /// A naive individual holding only the basic items. `net` is kept only
    /// when the strategy has semantic capacity.
    pub fn new(id: u64, strategy: Strategy, params: BehaviorParams, tree: &TaskTree, net: Option<EmbeddingNet>) -> Result<Self, AgentError> {
        if strategy.semantic && net.is_none() {
            return Err(AgentError::MissingNet(id));
        }
        Ok(Self {
            id,
            age: 0,
            score: 0,
            inventory: Inventory::basic(tree),
            attempt_memory: HashSet::new(),
            success_memory: Vec::new(),
            strategy,
            params: params.masked(strategy),
            net: if strategy.semantic { net } else { None },
            pending_pairs: Vec::new(),
        })
    }

    pub fn net(&self) -> Option<&EmbeddingNet> {
        self.net.as_ref()
    }

    pub fn net_mut(&mut self) -> Option<&mut EmbeddingNet> {
        self.net.as_mut()
    }

    fn event(&self, t: u64, kind: EventKind, combination: Vec<ItemId>, outcome: Option<ItemId>, state: (String, usize)) -> AttemptEvent {
        AttemptEvent {
            t,
            actor_id: self.id,
            kind,
            combination,
            outcome,
            score_after: self.score,
            state_hash: state.0,
            inventory_size: state.1,
            target: None,
            target_score: None,
        }
    }

    fn state(&self) -> (String, usize) {
        (self.inventory.state_hash(), self.inventory.len())
    }

    /// Trains the net on buffered pairs and clears the buffer.
    pub fn update_model(&mut self, epochs: usize, learning_rate: f64) {
        if self.pending_pairs.is_empty() {
            return;
        }
        if let Some(net) = self.net.as_mut() {
            net.train(&self.pending_pairs, epochs, learning_rate).expect("pairs validated on insert");
        }
        self.pending_pairs.clear();
    }
}

/// Chooses the next individual attempt. With probability `p_s` (semantic
/// agents only) the net proposes the items: the size is uniform in
/// {1,2,3}, and with probability `p_g` a remembered success is generalized
/// instead. Otherwise the action is uniform over the whole action space.
pub fn choose_individual_action<R: Rng + ?Sized>(
    agent: &AgentState,
    mode: PredictMode,
    rng: &mut R,
) -> (Combination, ActionRoute) {
    match agent.net.as_ref() {
        Some(_) if rng.random::<f64>() < agent.params.p_s => {
            let n = rng.random_range(1..=MAX_COMBINATION);
            semantic_action(agent, n, mode, rng)
        }
        _ => (sample_action(&agent.inventory, rng), ActionRoute::Random),
    }
}

/// The semantic route with the attempt size fixed to `n`. Falls back to a
/// uniform action when the agent has no net.
pub fn semantic_action<R: Rng + ?Sized>(agent: &AgentState, n: usize, mode: PredictMode, rng: &mut R) -> (Combination, ActionRoute) {
    let Some(net) = agent.net.as_ref() else {
        return (sample_action(&agent.inventory, rng), ActionRoute::Random);
    };
    if rng.random::<f64>() < agent.params.p_g {
        if let Some(c) = generalize_action(agent, rng) {
            return (c, ActionRoute::Generalize);
        }
    }
    let pool = agent.inventory.items();
    let t1 = *pool.choose(rng).expect("inventory non-empty");
    let mut ids = vec![t1];
    while ids.len() < n {
        let prev = *ids.last().unwrap();
        ids.push(predict_partner(net, prev, pool, mode, rng).expect("inventory ids are in vocabulary"));
    }
    (Combination::new(&ids).expect("1..=3 items"), ActionRoute::Predict)
}

/// Substitutes one item of a remembered success with its nearest neighbour
/// in embedding space. Only successes whose ingredients are all still owned
/// are eligible; returns `None` when there is none or the agent has no net.
pub fn generalize_action<R: Rng + ?Sized>(agent: &AgentState, rng: &mut R) -> Option<Combination> {
    let net = agent.net.as_ref()?;
    let eligible: Vec<&Combination> =
        agent.success_memory.iter().map(|(c, _)| c).filter(|c| agent.inventory.owns_all(c)).collect();
    let rule = **eligible.choose(rng)?;
    let pos = rng.random_range(0..rule.len());
    let tj = rule.items()[pos];
    let mut best: Option<(f64, ItemId)> = None;
    for &cand in agent.inventory.items() {
        if cand == tj {
            continue;
        }
        let s = net.similarity(tj, cand).expect("inventory ids are in vocabulary");
        best = match best {
            Some((bs, bid)) if bs > s || (bs == s && bid < cand) => Some((bs, bid)),
            _ => Some((s, cand)),
        };
    }
    Some(match best {
        Some((_, tk)) => rule.replace(pos, tk),
        None => rule,
    })
}

/// Tries `c`. New combinations are remembered; successes add the product
/// (scored on first acquisition) and buffer co-occurrence pairs for the net.
pub fn execute_attempt(
    agent: &mut AgentState,
    tree: &TaskTree,
    c: Combination,
    t: u64,
    opts: &LearningOptions,
) -> Result<AttemptEvent, AgentError> {
    if let Some(&bad) = c.items().iter().find(|&&i| !agent.inventory.contains(i)) {
        return Err(AgentError::Unowned { agent: agent.id, item: bad.0 });
    }
    let state = agent.state();
    let outcome = resolve_attempt(tree, &c)?;
    if agent.attempt_memory.insert(c) {
        if let Some(product) = outcome {
            if agent.inventory.insert(product) {
                agent.score += tree.score(product);
            }
            agent.success_memory.push((c, product));
            if agent.net.is_some() {
                let extra = opts.include_product_pairs.then_some(product);
                agent.pending_pairs.extend(pairs_from_combination(&c, extra));
            }
        }
    }
    Ok(agent.event(t, EventKind::Attempt, c.items().to_vec(), outcome, state))
}

/// Index of the highest-scoring individual other than `exclude` (ties go to
/// the lowest id).
pub fn best_other(population: &[AgentState], exclude: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, a) in population.iter().enumerate() {
        if j == exclude {
            continue;
        }
        best = match best {
            Some(b) if population[b].score > a.score || (population[b].score == a.score && population[b].id < a.id) => Some(b),
            _ => Some(j),
        };
    }
    best
}

/// Copies one random item that the best other individual owns and the
/// learner lacks, together with its recipe.
pub fn social_learn<R: Rng + ?Sized>(
    population: &mut [AgentState],
    learner: usize,
    tree: &TaskTree,
    t: u64,
    opts: &LearningOptions,
    rng: &mut R,
) -> Result<AttemptEvent, AgentError> {
    if population.len() < 2 {
        return Err(AgentError::SingletonPopulation);
    }
    let demo = best_other(population, learner).expect("population has another member");
    let (demo_id, demo_score) = (population[demo].id, population[demo].score);
    let novel: Vec<ItemId> = population[demo]
        .inventory
        .items()
        .iter()
        .copied()
        .filter(|&i| !population[learner].inventory.contains(i))
        .collect();
    let agent = &mut population[learner];
    let state = agent.state();
    let mut ev = match novel.choose(rng) {
        None => agent.event(t, EventKind::SocialNoop, Vec::new(), None, state),
        Some(&item) => {
            agent.inventory.insert(item);
            agent.score += tree.score(item);
            let recipe = tree.recipe_for(item).copied();
            let combination = match recipe {
                Some(r) => {
                    agent.attempt_memory.insert(r.ingredients);
                    agent.success_memory.push((r.ingredients, item));
                    if opts.train_on_observation && agent.net.is_some() {
                        let extra = opts.include_product_pairs.then_some(item);
                        agent.pending_pairs.extend(pairs_from_combination(&r.ingredients, extra));
                    }
                    r.ingredients.items().to_vec()
                }
                None => Vec::new(),
            };
            agent.event(t, EventKind::SocialCopy, combination, Some(item), state)
        }
    };
    ev.target = Some(demo_id);
    ev.target_score = Some(demo_score);
    Ok(ev)
}

/// A random bot's attempt, uniform over its action space.
pub fn bot_choose_action<R: Rng + ?Sized>(inventory: &Inventory, rng: &mut R) -> Combination {
    sample_action(inventory, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BotStep {
    Copy(ItemId),
    Attempt(Combination),
}

/// One bot step in group play: copy something new from the leader's
/// inventory if possible, otherwise explore at random.
pub fn bot_step<R: Rng + ?Sized>(own: &Inventory, leader: Option<&Inventory>, rng: &mut R) -> BotStep {
    if let Some(leader) = leader {
        let novel: Vec<ItemId> = leader.items().iter().copied().filter(|&i| !own.contains(i)).collect();
        if let Some(&item) = novel.choose(rng) {
            return BotStep::Copy(item);
        }
    }
    BotStep::Attempt(bot_choose_action(own, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::{init_net, EmbeddingNet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree() -> TaskTree {
        TaskTree::default_tree()
    }

    fn agent(tree: &TaskTree, id: u64, strategy: Strategy, params: BehaviorParams) -> AgentState {
        let net = init_net(tree.len(), 16, 16, id).unwrap();
        AgentState::new(id, strategy, params, tree, Some(net)).unwrap()
    }

    fn id(tree: &TaskTree, name: &str) -> ItemId {
        tree.find(name).unwrap()
    }

    #[test]
    fn params_masked_by_strategy() {
        let p = BehaviorParams::default().masked(Strategy::SOCIAL);
        assert_eq!((p.p_sl, p.p_s, p.p_g), (0.5, 0.0, 0.0));
        let p = BehaviorParams::default().masked(Strategy::SEMANTIC_INDIVIDUAL);
        assert_eq!((p.p_sl, p.p_s, p.p_g), (0.0, 0.9, 0.1));
        let t = tree();
        let a = agent(&t, 1, Strategy::RANDOM, BehaviorParams::default());
        assert!(a.net().is_none());
        assert!(AgentState::new(2, Strategy::SEMANTIC_SOCIAL, BehaviorParams::default(), &t, None).is_err());
    }

    #[test]
    fn first_success_then_repeat_then_failure() {
        let t = tree();
        let mut a = agent(&t, 1, Strategy::SEMANTIC_SOCIAL, BehaviorParams::default());
        let opts = LearningOptions::default();
        let blade = Combination::new(&[id(&t, "flint"), id(&t, "stone")]).unwrap();
        let ev = execute_attempt(&mut a, &t, blade, 0, &opts).unwrap();
        assert_eq!(ev.outcome, Some(id(&t, "blade")));
        assert_eq!(a.inventory.len(), 7);
        assert_eq!(a.score, 2);
        assert_eq!(ev.score_after, 2);
        assert_eq!(ev.inventory_size, 6);
        assert_eq!(a.pending_pairs.len(), 2);

        let again = execute_attempt(&mut a, &t, blade, 1, &opts).unwrap();
        assert_eq!(again.score_after, 2);
        assert_eq!(a.inventory.len(), 7);
        assert_eq!(a.success_memory.len(), 1);
        assert_eq!(a.pending_pairs.len(), 2);

        let miss = Combination::new(&[id(&t, "logs"), id(&t, "logs")]).unwrap();
        let ev = execute_attempt(&mut a, &t, miss, 2, &opts).unwrap();
        assert_eq!(ev.outcome, None);
        assert_eq!(a.attempt_memory.len(), 2);
        assert_eq!(a.score, 2);
    }

    #[test]
    fn unowned_item_rejected() {
        let t = tree();
        let mut a = agent(&t, 1, Strategy::RANDOM, BehaviorParams::default());
        let c = Combination::new(&[id(&t, "axe")]).unwrap();
        assert!(matches!(
            execute_attempt(&mut a, &t, c, 0, &LearningOptions::default()),
            Err(AgentError::Unowned { .. })
        ));
    }

    #[test]
    fn social_copy_and_noop() {
        let t = tree();
        let opts = LearningOptions::default();
        let mut pop = vec![
            agent(&t, 0, Strategy::SEMANTIC_SOCIAL, BehaviorParams::default()),
            agent(&t, 1, Strategy::SOCIAL, BehaviorParams::default()),
        ];
        let blade = Combination::new(&[id(&t, "flint"), id(&t, "stone")]).unwrap();
        execute_attempt(&mut pop[1], &t, blade, 0, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = social_learn(&mut pop, 0, &t, 1, &opts, &mut rng).unwrap();
        assert_eq!(ev.kind, EventKind::SocialCopy);
        assert_eq!(ev.outcome, Some(id(&t, "blade")));
        assert_eq!(ev.target, Some(1));
        assert_eq!(pop[0].score, 2);
        assert!(pop[0].attempt_memory.contains(&blade));
        assert_eq!(pop[0].pending_pairs.len(), 2);
        let ev = social_learn(&mut pop, 0, &t, 2, &opts, &mut rng).unwrap();
        assert_eq!(ev.kind, EventKind::SocialNoop);
        assert_eq!(pop[0].score, 2);
        assert!(social_learn(&mut pop[..1], 0, &t, 3, &opts, &mut rng).is_err());
    }

    #[test]
    fn best_copies_from_second_best() {
        let t = tree();
        let opts = LearningOptions::default();
        let mut pop: Vec<AgentState> = (0..3).map(|i| agent(&t, i, Strategy::SOCIAL, BehaviorParams::default())).collect();
        let blade = Combination::new(&[id(&t, "flint"), id(&t, "stone")]).unwrap();
        let fire = Combination::new(&[id(&t, "flint"), id(&t, "branch")]).unwrap();
        let handle = Combination::new(&[id(&t, "branch")]).unwrap();
        execute_attempt(&mut pop[0], &t, blade, 0, &opts).unwrap();
        execute_attempt(&mut pop[0], &t, fire, 0, &opts).unwrap();
        execute_attempt(&mut pop[2], &t, handle, 0, &opts).unwrap();
        assert_eq!(best_other(&pop, 0), Some(2));
        assert_eq!(best_other(&pop, 1), Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ev = social_learn(&mut pop, 0, &t, 1, &opts, &mut rng).unwrap();
        assert_eq!(ev.outcome, Some(id(&t, "handle")));
    }

    #[test]
    fn semantic_size_is_uniform() {
        let t = tree();
        let params = BehaviorParams { p_sl: 0.0, p_s: 1.0, p_g: 0.0, semantic_cost: 1 };
        let a = agent(&t, 1, Strategy::SEMANTIC_INDIVIDUAL, params);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 30_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let (c, route) = choose_individual_action(&a, PredictMode::Sample, &mut rng);
            assert_eq!(route, ActionRoute::Predict);
            counts[c.len()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for n in 1..=3 {
            assert!((counts[n] as f64 - draws as f64 * p).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn random_route_without_net() {
        let t = tree();
        let a = agent(&t, 1, Strategy::SOCIAL, BehaviorParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(choose_individual_action(&a, PredictMode::Sample, &mut rng).1, ActionRoute::Random);
        }
    }

    #[test]
    fn trained_prediction_picks_partner() {
        let t = tree();
        let params = BehaviorParams { p_sl: 0.0, p_s: 1.0, p_g: 0.0, semantic_cost: 1 };
        let mut a = agent(&t, 4, Strategy::SEMANTIC_INDIVIDUAL, params);
        let (x, y) = (id(&t, "flint"), id(&t, "stone"));
        a.net_mut().unwrap().train(&[TrainingPair { input: x, target: y }], 200, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(predict_partner(a.net().unwrap(), x, a.inventory.items(), PredictMode::Argmax, &mut rng).unwrap(), y);
        for _ in 0..200 {
            let (c, route) = semantic_action(&a, 2, PredictMode::Argmax, &mut rng);
            assert_eq!(route, ActionRoute::Predict);
            assert_eq!(c.len(), 2);
        }
    }

    #[test]
    fn generalize_substitutes_nearest() {
        let t = tree();
        let mut net = EmbeddingNet::zeros(t.len(), 2, 2).unwrap();
        let (a_, b, c) = (id(&t, "flint"), id(&t, "stone"), id(&t, "logs"));
        for i in t.basic_items() {
            net.embedding_mut(*i).copy_from_slice(&[0.0, 1.0]);
        }
        net.embedding_mut(b).copy_from_slice(&[1.0, 0.0]);
        net.embedding_mut(c).copy_from_slice(&[0.9, 0.1]);
        net.embedding_mut(a_).copy_from_slice(&[-1.0, 0.2]);
        let mut ag = AgentState::new(1, Strategy::SEMANTIC_INDIVIDUAL, BehaviorParams::default(), &t, Some(net)).unwrap();
        let rule = Combination::new(&[a_, b]).unwrap();
        ag.success_memory.push((rule, id(&t, "blade")));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut got = HashSet::new();
        for _ in 0..200 {
            got.insert(generalize_action(&ag, &mut rng).unwrap());
        }
        assert!(got.contains(&Combination::new(&[a_, c]).unwrap()));
    }

    #[test]
    fn generalize_tie_breaks_to_lowest_id() {
        let t = tree();
        let net = EmbeddingNet::zeros(t.len(), 2, 2).unwrap();
        let mut ag = AgentState::new(1, Strategy::SEMANTIC_INDIVIDUAL, BehaviorParams::default(), &t, Some(net)).unwrap();
        let rule = Combination::new(&[ItemId(3), ItemId(4)]).unwrap();
        ag.success_memory.push((rule, ItemId(99)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let c = generalize_action(&ag, &mut rng).unwrap();
            // whichever slot is replaced, the substitute is item 0
            assert!(c == Combination::new(&[ItemId(0), ItemId(4)]).unwrap() || c == Combination::new(&[ItemId(0), ItemId(3)]).unwrap());
        }
        ag.success_memory.clear();
        assert!(generalize_action(&ag, &mut rng).is_none());
    }

    #[test]
    fn bot_copies_before_exploring() {
        let t = tree();
        let own = Inventory::basic(&t);
        let mut leader = Inventory::basic(&t);
        leader.insert(id(&t, "blade"));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(bot_step(&own, Some(&leader), &mut rng), BotStep::Copy(id(&t, "blade")));
        assert!(matches!(bot_step(&own, Some(&own.clone()), &mut rng), BotStep::Attempt(_)));
        assert!(matches!(bot_step(&own, None, &mut rng), BotStep::Attempt(_)));
    }
}
