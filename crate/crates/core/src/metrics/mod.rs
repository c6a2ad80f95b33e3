//! Measurement machinery over trajectories and attempt logs.

pub mod correlation;
pub mod entropy;
pub mod features;
pub mod stats;

use serde::Serialize;

use crate::agents::Strategy;
use crate::event::AttemptEvent;
use crate::evolution::Trajectory;
use crate::task::{Inventory, TaskTree};

pub use correlation::spearman_rho;
pub use entropy::{entropy_by_state, unique_actions_by_state};
pub use features::{behavioral_feature_table, consecutive_similarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RepertoirePoint {
    pub generation: usize,
    pub instant: usize,
    pub cumulative: usize,
}

pub fn repertoire_series(t: &Trajectory) -> Vec<RepertoirePoint> {
    t.records
        .iter()
        .map(|r| RepertoirePoint { generation: r.generation, instant: r.repertoire_instant, cumulative: r.repertoire_cumulative })
        .collect()
}

/// Cumulative count of distinct items held by anyone in a log, after each
/// event; everyone starts from the basic items.
pub fn repertoire_from_log(log: &[AttemptEvent], tree: &TaskTree) -> Vec<usize> {
    let mut seen = Inventory::basic(tree);
    log.iter()
        .map(|e| {
            if let Some(item) = e.outcome.filter(|i| i.index() < tree.len()) {
                seen.insert(item);
            }
            seen.len()
        })
        .collect()
}

/// Per generation, the fraction of the population of each strategy in
/// [`Strategy::ALL`] order.
pub fn strategy_proportions(t: &Trajectory) -> Vec<[f64; 4]> {
    t.records
        .iter()
        .map(|r| {
            let c = r.strategy_counts.as_array();
            let n = r.strategy_counts.total().max(1) as f64;
            let mut f = [0.0; 4];
            for s in Strategy::ALL {
                f[s.index()] = c[s.index()] as f64 / n;
            }
            f
        })
        .collect()
}
