//! Action-space statistics per inventory state.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use serde::Serialize;

use crate::event::AttemptEvent;

/// Entropy is reported in nats.
pub const ENTROPY_BASE: f64 = std::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEntropy {
    pub state_hash: String,
    pub inventory_size: usize,
    pub attempts: usize,
    pub distinct: usize,
    pub entropy: f64,
}

/// Shannon entropy (nats) of a histogram of counts.
pub fn entropy_of_counts<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    // sorted so the sum does not depend on hash-map iteration order
    let mut counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts.iter().map(|&c| {
        let p = c as f64 / n;
        -p * p.ln()
    }).sum();
    h.max(0.0)
}

/// Groups innovation attempts by the inventory-state hash of the actor and
/// computes the entropy of the combinations tried in each state. Social and
/// inspection events are ignored. Rows are sorted by state hash.
pub fn entropy_by_state(log: &[AttemptEvent]) -> Vec<StateEntropy> {
    let mut states: BTreeMap<&str, (usize, HashMap<&[crate::task::ItemId], usize>)> = BTreeMap::new();
    for e in log.iter().filter(|e| e.is_attempt()) {
        let entry = states.entry(e.state_hash.as_str()).or_insert_with(|| (e.inventory_size, HashMap::new()));
        *entry.1.entry(e.combination.as_slice()).or_insert(0) += 1;
    }
    states
        .into_iter()
        .map(|(hash, (size, hist))| StateEntropy {
            state_hash: hash.to_string(),
            inventory_size: size,
            attempts: hist.values().sum(),
            distinct: hist.len(),
            entropy: entropy_of_counts(hist.into_values()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniqueActions {
    pub actor_id: u64,
    pub state_hash: String,
    pub inventory_size: usize,
    /// Distinct combinations the actor had tried by the end of this state,
    /// counting earlier states too.
    pub unique: usize,
    pub normalized: f64,
}

/// Cumulative count of distinct combinations per (actor, state), in order
/// of first visit of each state by each actor.
pub fn unique_actions_by_state(log: &[AttemptEvent]) -> Vec<UniqueActions> {
    let mut tried: HashMap<u64, HashSet<&[crate::task::ItemId]>> = HashMap::new();
    let mut index: HashMap<(u64, &str), usize> = HashMap::new();
    let mut rows: Vec<UniqueActions> = Vec::new();
    for e in log.iter().filter(|e| e.is_attempt()) {
        let set = tried.entry(e.actor_id).or_default();
        set.insert(e.combination.as_slice());
        let unique = set.len();
        let size = e.inventory_size.max(1);
        let row = UniqueActions {
            actor_id: e.actor_id,
            state_hash: e.state_hash.clone(),
            inventory_size: e.inventory_size,
            unique,
            normalized: unique as f64 / size as f64,
        };
        match index.get(&(e.actor_id, e.state_hash.as_str())) {
            Some(&i) => rows[i] = row,
            None => {
                index.insert((e.actor_id, e.state_hash.as_str()), rows.len());
                rows.push(row);
            }
        }
    }
    rows
}

pub fn write_entropy_csv<W: Write>(w: W, rows: &[StateEntropy]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state_hash", "inventory_size", "attempts", "distinct", "entropy"])?;
    for r in rows {
        out.write_record([
            r.state_hash.clone(),
            r.inventory_size.to_string(),
            r.attempts.to_string(),
            r.distinct.to_string(),
            format!("{:.12}", r.entropy),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_unique_actions_csv<W: Write>(w: W, rows: &[UniqueActions]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["actor_id", "state_hash", "inventory_size", "unique", "normalized"])?;
    for r in rows {
        out.write_record([
            r.actor_id.to_string(),
            r.state_hash.clone(),
            r.inventory_size.to_string(),
            r.unique.to_string(),
            format!("{:.12}", r.normalized),
        ])?;
    }
    out.flush()?;
    Ok(())
}
