//! Behavioural features of actual attempts against sampled alternatives,
//! and similarity between consecutive attempts.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::event::{AttemptEvent, EventKind};
use crate::semantic::SimilarityMatrix;
use crate::task::{enumerate_actions, Combination, Inventory, ItemId, TaskTree};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("event {index}: item {item} is outside the similarity matrix ({size} items)")]
    OutsideMatrix { index: usize, item: u32, size: usize },
    #[error("event {index}: actor {actor} does not own item {item}")]
    Unowned { index: usize, actor: u64, item: u32 },
    #[error("event {index}: malformed combination")]
    BadCombination { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsecutiveRow {
    pub actor_id: u64,
    /// Index of the later attempt within the actor's attempts.
    pub attempt_index: usize,
    pub prior_success: bool,
    pub similarity: f64,
}

fn check_matrix(sim: &SimilarityMatrix, items: &[ItemId], index: usize) -> Result<(), FeatureError> {
    match items.iter().find(|i| i.index() >= sim.len()) {
        Some(bad) => Err(FeatureError::OutsideMatrix { index, item: bad.0, size: sim.len() }),
        None => Ok(()),
    }
}

/// Mean similarity between every item of one attempt and every item of the
/// actor's next attempt, labelled by whether the first attempt succeeded.
pub fn consecutive_similarity(log: &[AttemptEvent], sim: &SimilarityMatrix) -> Result<Vec<ConsecutiveRow>, FeatureError> {
    let mut last: HashMap<u64, (usize, &AttemptEvent)> = HashMap::new();
    let mut rows = Vec::new();
    for (index, e) in log.iter().enumerate().filter(|(_, e)| e.is_attempt()) {
        check_matrix(sim, &e.combination, index)?;
        let count = match last.get(&e.actor_id) {
            Some(&(n, prev)) => {
                let mut total = 0.0;
                for &a in &prev.combination {
                    for &b in &e.combination {
                        total += sim.at(a, b);
                    }
                }
                let pairs = (prev.combination.len() * e.combination.len()).max(1);
                rows.push(ConsecutiveRow {
                    actor_id: e.actor_id,
                    attempt_index: n,
                    prior_success: prev.outcome.is_some(),
                    similarity: total / pairs as f64,
                });
                n + 1
            }
            None => 1,
        };
        last.insert(e.actor_id, (count, e));
    }
    Ok(rows)
}

pub const FEATURE_NAMES: [&str; 10] = [
    "semantic_similarity",
    "structural_similarity",
    "color_similarity",
    "position",
    "n_items",
    "reward",
    "uncertainty",
    "recency",
    "success",
    "empowerment",
];

/// Exploration bonus of an item chosen `t_e` times out of `total` attempts.
pub fn uncertainty(total: u64, t_e: u64) -> f64 {
    ((total as f64).ln() / (t_e as f64 + 1.0)).sqrt()
}

/// Similarity inputs; an absent matrix yields NaN for its feature.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimilaritySources<'a> {
    pub semantic: Option<&'a SimilarityMatrix>,
    pub structural: Option<&'a SimilarityMatrix>,
    pub color: Option<&'a SimilarityMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub actor_id: u64,
    /// Index of the attempt within the actor's innovation attempts.
    pub attempt_index: usize,
    pub is_actual: bool,
    pub combination: Combination,
    /// In [`FEATURE_NAMES`] order.
    pub features: [f64; 10],
}

fn mean_pairwise(sim: Option<&SimilarityMatrix>, c: &Combination) -> f64 {
    let Some(sim) = sim else { return f64::NAN };
    let items = c.items();
    let mut total = 0.0;
    let mut n = 0;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            total += sim.at(items[i], items[j]);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        total / n as f64
    }
}

/// Running per-actor statistics needed by the item-level features.
struct ActorTrack {
    inventory: Inventory,
    attempts: u64,
    chosen: HashMap<ItemId, u64>,
    last_chosen: HashMap<ItemId, u64>,
    successes: HashMap<ItemId, u64>,
    successful: HashSet<Combination>,
}

struct Context<'a> {
    tree: &'a TaskTree,
    sims: SimilaritySources<'a>,
    /// For each item, the products of the recipes it takes part in.
    uses: Vec<Vec<ItemId>>,
}

impl Context<'_> {
    fn features(&self, track: &ActorTrack, c: &Combination) -> [f64; 10] {
        let total = track.attempts;
        let mut item = [0.0; 6];
        for &x in c.items() {
            let t_e = track.chosen.get(&x).copied().unwrap_or(0);
            let recency = match track.last_chosen.get(&x) {
                Some(&at) => (total - at) as f64,
                None => total as f64,
            };
            let discovered = self.uses[x.index()].iter().filter(|&&p| track.inventory.contains(p)).count();
            let vals = [
                track.inventory.position(x).unwrap_or(0) as f64,
                self.tree.score(x) as f64,
                uncertainty(total, t_e),
                recency,
                track.successes.get(&x).copied().unwrap_or(0) as f64,
                (self.uses[x.index()].len() - discovered) as f64,
            ];
            for (acc, v) in item.iter_mut().zip(vals) {
                *acc += v;
            }
        }
        let k = c.len() as f64;
        [
            mean_pairwise(self.sims.semantic, c),
            mean_pairwise(self.sims.structural, c),
            mean_pairwise(self.sims.color, c),
            item[0] / k,
            k,
            item[1] / k,
            item[2] / k,
            item[3] / k,
            item[4] / k,
            item[5] / k,
        ]
    }
}

/// Feature rows before normalization: one actual row and up to `k` sampled
/// alternatives for every attempt with at least two items. Alternatives
/// are drawn without replacement from the multi-item combinations available
/// in the actor's state, excluding the actual one.
pub fn raw_feature_table<R: Rng + ?Sized>(
    log: &[AttemptEvent],
    tree: &TaskTree,
    sims: SimilaritySources<'_>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<FeatureRow>, FeatureError> {
    for (index, e) in log.iter().enumerate() {
        for m in [sims.semantic, sims.structural, sims.color].into_iter().flatten() {
            check_matrix(m, &e.combination, index)?;
        }
    }
    let mut uses = vec![Vec::new(); tree.len()];
    for r in tree.recipes() {
        let mut seen: Vec<ItemId> = r.ingredients.items().to_vec();
        seen.dedup();
        for x in seen {
            uses[x.index()].push(r.product);
        }
    }
    let ctx = Context { tree, sims, uses };
    let mut tracks: HashMap<u64, ActorTrack> = HashMap::new();
    let mut per_actor_index: HashMap<u64, usize> = HashMap::new();
    let mut rows = Vec::new();
    for (index, e) in log.iter().enumerate() {
        let track = tracks.entry(e.actor_id).or_insert_with(|| ActorTrack {
            inventory: Inventory::basic(tree),
            attempts: 0,
            chosen: HashMap::new(),
            last_chosen: HashMap::new(),
            successes: HashMap::new(),
            successful: Default::default(),
        });
        match e.kind {
            EventKind::SocialCopy => {
                if let Some(item) = e.outcome {
                    track.inventory.insert(item);
                }
                continue;
            }
            EventKind::Attempt => {}
            _ => continue,
        }
        let c = Combination::new(&e.combination).map_err(|_| FeatureError::BadCombination { index })?;
        if let Some(bad) = c.items().iter().find(|&&i| !track.inventory.contains(i)) {
            return Err(FeatureError::Unowned { index, actor: e.actor_id, item: bad.0 });
        }
        let attempt_index = per_actor_index.entry(e.actor_id).or_insert(0);
        track.attempts += 1;
        if c.len() >= 2 {
            rows.push(FeatureRow {
                actor_id: e.actor_id,
                attempt_index: *attempt_index,
                is_actual: true,
                features: ctx.features(track, &c),
                combination: c,
            });
            let pool: Vec<Combination> = enumerate_actions(&track.inventory).into_iter().filter(|a| a.len() >= 2 && *a != c).collect();
            for i in sample(rng, pool.len(), k.min(pool.len())) {
                let alt = pool[i];
                rows.push(FeatureRow {
                    actor_id: e.actor_id,
                    attempt_index: *attempt_index,
                    is_actual: false,
                    features: ctx.features(track, &alt),
                    combination: alt,
                });
            }
        }
        *attempt_index += 1;
        let now = track.attempts;
        for &x in c.items() {
            *track.chosen.entry(x).or_insert(0) += 1;
            track.last_chosen.insert(x, now);
        }
        if let Some(product) = e.outcome {
            track.inventory.insert(product);
            if track.successful.insert(c) {
                let mut distinct = c.items().to_vec();
                distinct.dedup();
                for x in distinct {
                    *track.successes.entry(x).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// z-scores every feature within each actor, pooling actual and alternative
/// rows (population standard deviation). Constant features become 0; NaN
/// entries stay NaN and are left out of the moments.
pub fn normalize_within_actor(rows: &mut [FeatureRow]) {
    let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.actor_id).or_default().push(i);
    }
    for idx in groups.values() {
        for f in 0..FEATURE_NAMES.len() {
            let vals: Vec<f64> = idx.iter().map(|&i| rows[i].features[f]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for &i in idx {
                let v = &mut rows[i].features[f];
                if v.is_nan() {
                    continue;
                }
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
    }
}

/// [`raw_feature_table`] followed by [`normalize_within_actor`].
pub fn behavioral_feature_table<R: Rng + ?Sized>(
    log: &[AttemptEvent],
    tree: &TaskTree,
    sims: SimilaritySources<'_>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut rows = raw_feature_table(log, tree, sims, k, rng)?;
    normalize_within_actor(&mut rows);
    Ok(rows)
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.12}")
    }
}

/// Columns: actor_id, attempt_index, is_actual, combination (items joined
/// by `-`), then the features in [`FEATURE_NAMES`] order; missing values
/// are written as `NA`.
pub fn write_feature_csv<W: Write>(w: W, rows: &[FeatureRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["actor_id", "attempt_index", "is_actual", "combination"];
    header.extend(FEATURE_NAMES);
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.actor_id.to_string(),
            r.attempt_index.to_string(),
            (r.is_actual as u8).to_string(),
            r.combination.items().iter().map(|i| i.0.to_string()).collect::<Vec<_>>().join("-"),
        ];
        rec.extend(r.features.iter().map(|&v| fmt_value(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_consecutive_csv<W: Write>(w: W, rows: &[ConsecutiveRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["actor_id", "attempt_index", "prior_success", "similarity"])?;
    for r in rows {
        out.write_record([
            r.actor_id.to_string(),
            r.attempt_index.to_string(),
            (r.prior_success as u8).to_string(),
            fmt_value(r.similarity),
        ])?;
    }
    out.flush()?;
    Ok(())
}
