//! Live play sessions: one or more human players, optional random bots,
//! inspection-based social learning, a session clock and replayable logs.
//!
//! Every operation takes the current time `now` in milliseconds on any
//! monotonic clock; the session clock starts at the first human action.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{bot_step, BotStep};
use crate::event::{AttemptEvent, EventKind};
use crate::task::{resolve_attempt, Combination, Inventory, ItemId, TaskTree, MAX_COMBINATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Semantic,
    NonSemantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayMode {
    Individual,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerKind {
    Human,
    Bot,
}

pub const GROUP_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    pub duration_secs: u64,
    pub bot_interval_secs: u64,
    /// Humans in a group; the remaining seats go to bots.
    pub humans: usize,
    /// Currency per point.
    pub bonus_rate: f64,
    /// Deployment-wide seed of the opaque labels.
    pub label_seed: u64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { duration_secs: 600, bot_interval_secs: 8, humans: 1, bonus_rate: 0.001, label_seed: 0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("session capacity of {0} reached")]
    CapacityExceeded(usize),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown player {0}")]
    UnknownPlayer(u64),
    #[error("player {0} is a bot")]
    NotHuman(u64),
    #[error("session has expired")]
    Expired,
    #[error("item {0} is not in the player's inventory")]
    Unowned(u32),
    #[error("a combination needs 1 to {MAX_COMBINATION} items, got {0}")]
    BadSize(usize),
    #[error("inspection is only available in group mode")]
    IndividualMode,
    #[error("players cannot inspect themselves")]
    SelfInspection,
    #[error("player {target} does not own item {item}")]
    TargetLacksItem { target: u64, item: u32 },
    #[error("invalid session options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone)]
struct Player {
    id: u64,
    kind: PlayerKind,
    inventory: Inventory,
    score: i64,
    tried: HashSet<Combination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub id: ItemId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub player: u64,
    pub kind: PlayerKind,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub session: String,
    pub player: u64,
    pub condition: Condition,
    pub mode: PlayMode,
    pub inventory: Vec<ItemView>,
    pub score: i64,
    pub bonus: f64,
    pub scoreboard: Vec<ScoreEntry>,
    pub remaining_ms: u64,
    pub started: bool,
    pub expired: bool,
    /// Number of events in the session log this view reflects.
    pub log_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub event: AttemptEvent,
    pub success: bool,
    pub new_item: bool,
    pub product: Option<ItemView>,
    pub view: PlayerView,
}

fn code_is_neutral(code: &str, names: &[String]) -> bool {
    let lower = code.to_ascii_lowercase();
    !names.iter().any(|n| n.to_ascii_lowercase().contains(&lower))
}

/// Display labels: item names, or distinct random three-letter codes that
/// share no substring with any item name.
pub fn make_labels(tree: &TaskTree, condition: Condition, label_seed: u64) -> Vec<String> {
    let names: Vec<String> = tree.items().iter().map(|i| i.name.clone()).collect();
    if condition == Condition::Semantic {
        return names;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(label_seed);
    let mut used = HashSet::new();
    let mut out = Vec::with_capacity(names.len());
    while out.len() < names.len() {
        let code: String = (0..3).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect();
        if code_is_neutral(&code, &names) && used.insert(code.clone()) {
            out.push(code);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    condition: Condition,
    mode: PlayMode,
    seed: u64,
    options: SessionOptions,
    tree: Arc<TaskTree>,
    labels: Arc<Vec<String>>,
    players: Vec<Player>,
    started_at: Option<u64>,
    bot_ticks: u64,
    bot_rng: ChaCha8Rng,
    log: Vec<AttemptEvent>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        condition: Condition,
        mode: PlayMode,
        seed: u64,
        options: SessionOptions,
        tree: Arc<TaskTree>,
    ) -> Result<Self, SessionError> {
        if options.duration_secs == 0 || options.bot_interval_secs == 0 {
            return Err(SessionError::InvalidOptions("duration and bot interval must be positive".into()));
        }
        if !(options.bonus_rate.is_finite() && options.bonus_rate >= 0.0) {
            return Err(SessionError::InvalidOptions("bonus_rate must be finite and non-negative".into()));
        }
        let (humans, bots) = match mode {
            PlayMode::Individual => (1, 0),
            PlayMode::Group => {
                if options.humans == 0 || options.humans > GROUP_SIZE {
                    return Err(SessionError::InvalidOptions(format!("a group seats 1 to {GROUP_SIZE} humans")));
                }
                (options.humans, GROUP_SIZE - options.humans)
            }
        };
        let players = (0..humans + bots)
            .map(|i| Player {
                id: i as u64,
                kind: if i < humans { PlayerKind::Human } else { PlayerKind::Bot },
                inventory: Inventory::basic(&tree),
                score: 0,
                tried: HashSet::new(),
            })
            .collect();
        let labels = Arc::new(make_labels(&tree, condition, options.label_seed));
        Ok(Self {
            id: id.into(),
            condition,
            mode,
            seed,
            options,
            tree,
            labels,
            players,
            started_at: None,
            bot_ticks: 0,
            bot_rng: ChaCha8Rng::seed_from_u64(seed),
            log: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn mode(&self) -> PlayMode {
        self.mode
    }

    pub fn tree(&self) -> &TaskTree {
        &self.tree
    }

    pub fn log(&self) -> &[AttemptEvent] {
        &self.log
    }

    pub fn roster(&self) -> Vec<(u64, PlayerKind)> {
        self.players.iter().map(|p| (p.id, p.kind)).collect()
    }

    pub fn label(&self, id: ItemId) -> String {
        self.labels.get(id.index()).cloned().unwrap_or_else(|| id.to_string())
    }

    fn duration_ms(&self) -> u64 {
        self.options.duration_secs * 1000
    }

    fn elapsed(&self, now: u64) -> u64 {
        self.started_at.map_or(0, |s| now.saturating_sub(s))
    }

    pub fn remaining_ms(&self, now: u64) -> u64 {
        self.duration_ms().saturating_sub(self.elapsed(now))
    }

    pub fn is_expired(&self, now: u64) -> bool {
        self.started_at.is_some() && self.remaining_ms(now) == 0
    }

    fn player_index(&self, player: u64) -> Result<usize, SessionError> {
        self.players.iter().position(|p| p.id == player).ok_or(SessionError::UnknownPlayer(player))
    }

    fn item_views(&self, items: &[ItemId]) -> Vec<ItemView> {
        items.iter().map(|&id| ItemView { id, label: self.label(id) }).collect()
    }

    pub fn view(&self, player: u64, now: u64) -> Result<PlayerView, SessionError> {
        let p = &self.players[self.player_index(player)?];
        let scoreboard = match self.mode {
            PlayMode::Group => self.players.iter().map(|q| ScoreEntry { player: q.id, kind: q.kind, score: q.score }).collect(),
            PlayMode::Individual => vec![ScoreEntry { player: p.id, kind: p.kind, score: p.score }],
        };
        Ok(PlayerView {
            session: self.id.clone(),
            player,
            condition: self.condition,
            mode: self.mode,
            inventory: self.item_views(p.inventory.items()),
            score: p.score,
            bonus: p.score as f64 * self.options.bonus_rate,
            scoreboard,
            remaining_ms: self.remaining_ms(now),
            started: self.started_at.is_some(),
            expired: self.is_expired(now),
            log_len: self.log.len(),
        })
    }

    /// Validates a human action, starts the clock if needed and lets bots
    /// catch up. Returns the player's index and the event timestamp.
    fn begin_action(&mut self, player: u64, now: u64) -> Result<(usize, u64), SessionError> {
        let idx = self.player_index(player)?;
        if self.players[idx].kind != PlayerKind::Human {
            return Err(SessionError::NotHuman(player));
        }
        if self.is_expired(now) {
            self.advance_bots(now);
            return Err(SessionError::Expired);
        }
        if self.started_at.is_none() {
            self.started_at = Some(now);
        }
        self.advance_bots(now);
        Ok((idx, self.elapsed(now)))
    }

    fn event(&self, idx: usize, t: u64, kind: EventKind, combination: Vec<ItemId>, outcome: Option<ItemId>, state: (String, usize)) -> AttemptEvent {
        let p = &self.players[idx];
        AttemptEvent {
            t,
            actor_id: p.id,
            kind,
            combination,
            outcome,
            score_after: p.score,
            state_hash: state.0,
            inventory_size: state.1,
            target: None,
            target_score: None,
        }
    }

    fn state(&self, idx: usize) -> (String, usize) {
        let inv = &self.players[idx].inventory;
        (inv.state_hash(), inv.len())
    }

    /// Resolves and applies an attempt by player `idx`; returns the product.
    fn apply_attempt(&mut self, idx: usize, c: Combination) -> (Option<ItemId>, bool) {
        let product = resolve_attempt(&self.tree, &c).expect("owned items are in the tree");
        let p = &mut self.players[idx];
        p.tried.insert(c);
        let mut new_item = false;
        if let Some(item) = product {
            if p.inventory.insert(item) {
                p.score += self.tree.score(item);
                new_item = true;
            }
        }
        (product, new_item)
    }

    pub fn submit_attempt(&mut self, player: u64, items: &[ItemId], now: u64) -> Result<AttemptOutcome, SessionError> {
        if items.is_empty() || items.len() > MAX_COMBINATION {
            return Err(SessionError::BadSize(items.len()));
        }
        let idx = self.player_index(player)?;
        if let Some(bad) = items.iter().find(|&&i| !self.players[idx].inventory.contains(i)) {
            return Err(SessionError::Unowned(bad.0));
        }
        let (idx, t) = self.begin_action(player, now)?;
        let c = Combination::new(items).expect("size checked");
        let state = self.state(idx);
        let (product, new_item) = self.apply_attempt(idx, c);
        let event = self.event(idx, t, EventKind::Attempt, c.items().to_vec(), product, state);
        self.log.push(event.clone());
        Ok(AttemptOutcome {
            event,
            success: product.is_some(),
            new_item,
            product: product.map(|id| ItemView { id, label: self.label(id) }),
            view: self.view(player, now)?,
        })
    }

    fn inspect_target(&self, player: u64, target: u64) -> Result<usize, SessionError> {
        if self.mode == PlayMode::Individual {
            return Err(SessionError::IndividualMode);
        }
        if player == target {
            return Err(SessionError::SelfInspection);
        }
        self.player_index(target)
    }

    /// Opens another player's inventory.
    pub fn inspect_player(&mut self, player: u64, target: u64, now: u64) -> Result<Vec<ItemView>, SessionError> {
        self.player_index(player)?;
        let tidx = self.inspect_target(player, target)?;
        let (idx, t) = self.begin_action(player, now)?;
        let mut ev = self.event(idx, t, EventKind::Inspect, Vec::new(), None, self.state(idx));
        ev.target = Some(target);
        ev.target_score = Some(self.players[tidx].score);
        self.log.push(ev);
        Ok(self.item_views(self.players[tidx].inventory.items()))
    }

    /// Shows the ingredients of an item another player owns; basic items
    /// have none.
    pub fn inspect_item_recipe(&mut self, player: u64, target: u64, item: ItemId, now: u64) -> Result<Vec<ItemView>, SessionError> {
        self.player_index(player)?;
        let tidx = self.inspect_target(player, target)?;
        if !self.players[tidx].inventory.contains(item) {
            return Err(SessionError::TargetLacksItem { target, item: item.0 });
        }
        let (idx, t) = self.begin_action(player, now)?;
        let mut ev = self.event(idx, t, EventKind::InspectItem, vec![item], None, self.state(idx));
        ev.target = Some(target);
        ev.target_score = Some(self.players[tidx].score);
        self.log.push(ev);
        let ingredients = self.tree.recipe_for(item).map(|r| r.ingredients.items().to_vec()).unwrap_or_default();
        Ok(self.item_views(&ingredients))
    }

    /// Highest-scoring player other than `idx` (ties to the lowest id).
    fn leader(&self, idx: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (j, p) in self.players.iter().enumerate() {
            if j == idx {
                continue;
            }
            if best.is_none_or(|b| p.score > self.players[b].score) {
                best = Some(j);
            }
        }
        best
    }

    /// Runs every bot tick due by `now`: one action per bot every
    /// `bot_interval_secs`, bots in id order, while the clock runs.
    pub fn advance_bots(&mut self, now: u64) -> Vec<AttemptEvent> {
        let first = self.log.len();
        if self.mode != PlayMode::Group || self.started_at.is_none() {
            return Vec::new();
        }
        let interval = self.options.bot_interval_secs * 1000;
        let last_tick = (self.duration_ms() - 1) / interval;
        let due = (self.elapsed(now) / interval).min(last_tick);
        while self.bot_ticks < due {
            self.bot_ticks += 1;
            let t = self.bot_ticks * interval;
            for idx in 0..self.players.len() {
                if self.players[idx].kind == PlayerKind::Bot {
                    self.bot_act(idx, t);
                }
            }
        }
        self.log[first..].to_vec()
    }

    fn bot_act(&mut self, idx: usize, t: u64) {
        let leader = self.leader(idx);
        let state = self.state(idx);
        let step = bot_step(&self.players[idx].inventory, leader.map(|l| &self.players[l].inventory), &mut self.bot_rng);
        let ev = match step {
            BotStep::Copy(item) => {
                let l = leader.expect("copy needs a leader");
                let p = &mut self.players[idx];
                p.inventory.insert(item);
                p.score += self.tree.score(item);
                let combination = self.tree.recipe_for(item).map(|r| r.ingredients.items().to_vec()).unwrap_or_default();
                let mut ev = self.event(idx, t, EventKind::SocialCopy, combination, Some(item), state);
                ev.target = Some(self.players[l].id);
                ev.target_score = Some(self.players[l].score);
                ev
            }
            BotStep::Attempt(c) => {
                let (product, _) = self.apply_attempt(idx, c);
                self.event(idx, t, EventKind::Attempt, c.items().to_vec(), product, state)
            }
        };
        self.log.push(ev);
    }

    /// Final per-player state, in the shape [`replay_log`] reconstructs.
    pub fn snapshot(&self) -> ReplayState {
        ReplayState {
            players: self
                .players
                .iter()
                .map(|p| (p.id, ReplayedPlayer { score: p.score, inventory: p.inventory.sorted() }))
                .collect(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayedPlayer {
    pub score: i64,
    pub inventory: Vec<ItemId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReplayState {
    pub players: BTreeMap<u64, ReplayedPlayer>,
}

#[derive(Debug, Error, PartialEq)]
#[error("log diverges at event {index}: {reason}")]
pub struct IntegrityError {
    pub index: usize,
    pub reason: String,
}

/// Rebuilds every actor's inventory and score from a log, checking each
/// recorded state hash, outcome and score against the rules. Actors start
/// with the basic items; `roster` adds actors that never acted.
pub fn replay_log(tree: &TaskTree, roster: &[u64], log: &[AttemptEvent]) -> Result<ReplayState, IntegrityError> {
    let mut inv: BTreeMap<u64, (Inventory, i64)> = roster.iter().map(|&id| (id, (Inventory::basic(tree), 0))).collect();
    for (index, e) in log.iter().enumerate() {
        let fail = |reason: String| IntegrityError { index, reason };
        if let Some(target) = e.target {
            inv.entry(target).or_insert_with(|| (Inventory::basic(tree), 0));
        }
        let target_owns = |inv: &BTreeMap<u64, (Inventory, i64)>, item: ItemId| {
            e.target.is_none_or(|t| inv.get(&t).is_some_and(|(i, _)| i.contains(item)))
        };
        let copied_ok = e.kind != EventKind::SocialCopy || e.outcome.is_some_and(|item| target_owns(&inv, item));
        let (items, score) = inv.entry(e.actor_id).or_insert_with(|| (Inventory::basic(tree), 0));
        if items.state_hash() != e.state_hash {
            return Err(fail(format!("state hash {} does not match replayed {}", e.state_hash, items.state_hash())));
        }
        match e.kind {
            EventKind::Attempt => {
                let c = Combination::new(&e.combination).map_err(|err| fail(err.to_string()))?;
                if let Some(bad) = c.items().iter().find(|&&i| !items.contains(i)) {
                    return Err(fail(format!("item {bad} not owned")));
                }
                let product = resolve_attempt(tree, &c).map_err(|err| fail(err.to_string()))?;
                if product != e.outcome {
                    return Err(fail(format!("recorded outcome {:?}, rules give {:?}", e.outcome, product)));
                }
                if let Some(item) = product {
                    if items.insert(item) {
                        *score += tree.score(item);
                    }
                }
            }
            EventKind::SocialCopy => {
                let item = e.outcome.ok_or_else(|| fail("copy without an item".into()))?;
                if item.index() >= tree.len() {
                    return Err(fail(format!("unknown item {item}")));
                }
                if !copied_ok {
                    return Err(fail(format!("demonstrator does not own item {item}")));
                }
                if !items.insert(item) {
                    return Err(fail(format!("item {item} copied but already owned")));
                }
                *score += tree.score(item);
            }
            EventKind::SocialNoop | EventKind::Inspect | EventKind::InspectItem => {
                if e.outcome.is_some() {
                    return Err(fail("non-acquiring event carries an outcome".into()));
                }
            }
        }
        if *score != e.score_after {
            return Err(fail(format!("recorded score {} but replayed score is {}", e.score_after, score)));
        }
    }
    Ok(ReplayState {
        players: inv.into_iter().map(|(id, (i, score))| (id, ReplayedPlayer { score, inventory: i.sorted() })).collect(),
    })
}

/// Thread-safe registry of live sessions. Each session sits behind its own
/// lock so operations on one session are serialized while different
/// sessions proceed independently.
#[derive(Debug)]
pub struct SessionManager {
    capacity: usize,
    tree: Arc<TaskTree>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next: Mutex<u64>,
}

impl SessionManager {
    pub fn new(tree: TaskTree, capacity: usize) -> Self {
        Self { capacity, tree: Arc::new(tree), sessions: Mutex::new(HashMap::new()), next: Mutex::new(0) }
    }

    pub fn tree(&self) -> &TaskTree {
        &self.tree
    }

    pub fn create(
        &self,
        condition: Condition,
        mode: PlayMode,
        seed: u64,
        options: SessionOptions,
        now: u64,
    ) -> Result<(String, PlayerView), SessionError> {
        let mut sessions = self.sessions.lock().expect("registry lock");
        if sessions.len() >= self.capacity {
            return Err(SessionError::CapacityExceeded(self.capacity));
        }
        let id = {
            let mut next = self.next.lock().expect("counter lock");
            *next += 1;
            format!("s{:06}", *next)
        };
        let session = Session::new(id.clone(), condition, mode, seed, options, self.tree.clone())?;
        let view = session.view(0, now)?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, view))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .lock()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
