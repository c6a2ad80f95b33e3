//! Checks shared by the oracle tests and the acceptance report. Each check
//! returns a one-line summary on success and a reason on failure.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use totem_core::agents::{bot_choose_action, Strategy};
use totem_core::config::StrategyMix;
use totem_core::event::{AttemptEvent, EventKind};
use totem_core::evolution::{write_summary_csv, World};
use totem_core::metrics::correlation::spearman_rho;
use totem_core::metrics::entropy::entropy_by_state;
use totem_core::metrics::features::uncertainty;
use totem_core::metrics::stats::median;
use totem_core::semantic::{EmbeddingNet, ParamBlock, SimilarityMatrix, TrainingPair};
use totem_core::session::{replay_log, Condition, PlayMode, Session, SessionOptions};
use totem_core::task::{action_space_size, enumerate_actions, Combination, Inventory, ItemId, DEFAULT_LEVEL_SIZES};
use totem_core::{run_replicates, SimConfig, TaskTree};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Combinatorics

/// Every multiset of size 1..=3 over `n` slots, by nested loops.
pub fn brute_force_actions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for a in 0..n {
        out.push(vec![a]);
        for b in a..n {
            out.push(vec![a, b]);
            for c in b..n {
                out.push(vec![a, b, c]);
            }
        }
    }
    out
}

pub fn combinatorics() -> Check {
    let tree = TaskTree::default_tree();
    for n in 1..=12 {
        let items: Vec<ItemId> = tree.items().iter().take(n).map(|i| i.id).collect();
        let inv = Inventory::from_items(tree.len(), &items);
        let brute: HashSet<Vec<ItemId>> =
            brute_force_actions(n).into_iter().map(|v| v.into_iter().map(|i| items[i]).collect()).collect();
        let listed: Vec<Combination> = enumerate_actions(&inv);
        let listed_set: HashSet<Vec<ItemId>> = listed.iter().map(|c| c.items().to_vec()).collect();
        let size = action_space_size(n).map_err(|e| e.to_string())?;
        ensure(listed.len() == listed_set.len(), || format!("n={n}: enumeration repeats actions"))?;
        ensure(listed_set == brute, || format!("n={n}: enumeration differs from brute force"))?;
        ensure(size as usize == brute.len(), || format!("n={n}: size {size} but brute force finds {}", brute.len()))?;
    }
    let n6 = action_space_size(6).map_err(|e| e.to_string())?;
    ensure(n6 == 83, || format!("n=6 gives {n6}"))?;
    Ok("sizes and enumerations match brute force for n=1..12; n=6 gives 83".into())
}

// Task tree

pub fn task_integrity() -> Check {
    let tree = TaskTree::default_tree();
    ensure(tree.level_sizes() == DEFAULT_LEVEL_SIZES, || format!("level sizes {:?}", tree.level_sizes()))?;
    ensure(tree.len() == 184, || format!("{} items", tree.len()))?;
    let mut owned = Inventory::basic(&tree);
    loop {
        let before = owned.len();
        for r in tree.recipes() {
            if owned.owns_all(&r.ingredients) {
                owned.insert(r.product);
            }
        }
        if owned.len() == before {
            break;
        }
    }
    ensure(owned.len() == tree.len(), || format!("only {} of {} items reachable", owned.len(), tree.len()))?;
    Ok("184 items in levels [6,4,2,2,2,3,3,7,11,48,96], all reachable from the basic items".into())
}

// Network

pub fn gradient_check() -> Check {
    let pair = TrainingPair::new(3, 17);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = EmbeddingNet::random(40, 8, 8, &mut rng).map_err(|e| e.to_string())?;
        let (_, g) = net.gradients(pair).map_err(|e| e.to_string())?;
        for p in 0..10 {
            let (block, index, analytic) = match p % 3 {
                0 => {
                    let i = rng.random_range(0..8);
                    (ParamBlock::Embedding, pair.input.index() * 8 + i, g.embedding_row[i])
                }
                1 => {
                    let i = rng.random_range(0..g.hidden.len());
                    (ParamBlock::Hidden, i, g.hidden[i])
                }
                _ => {
                    let i = rng.random_range(0..g.output.len());
                    (ParamBlock::Output, i, g.output[i])
                }
            };
            let mut plus = net.clone();
            plus.block_mut(block)[index] += h;
            let mut minus = net.clone();
            minus.block_mut(block)[index] -= h;
            let numeric = (plus.loss(pair).unwrap() - minus.loss(pair).unwrap()) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-4, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!("worst relative gradient error {worst:.2e} over 10 seeds x 10 parameters"))
}

pub fn fixed_dataset() -> Vec<TrainingPair> {
    (0..50u32).map(|i| TrainingPair::new(i, (3 * i + 7) % 184)).collect()
}

pub fn training_reduces_loss() -> Check {
    let pairs = fixed_dataset();
    let mut net = EmbeddingNet::random(184, 16, 16, &mut ChaCha8Rng::seed_from_u64(9)).map_err(|e| e.to_string())?;
    let start = net.mean_loss(&pairs).map_err(|e| e.to_string())?;
    net.train(&pairs, 200, 0.05).map_err(|e| e.to_string())?;
    let end = net.mean_loss(&pairs).map_err(|e| e.to_string())?;
    ensure(end <= 0.5 * start, || format!("loss {start:.3} -> {end:.3}"))?;
    Ok(format!("mean cross-entropy {start:.3} -> {end:.3} after 200 epochs"))
}

pub fn softmax_normalized() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = EmbeddingNet::random(184, 16, 16, &mut rng).map_err(|e| e.to_string())?;
    let pairs: Vec<TrainingPair> =
        (0..10_000).map(|_| TrainingPair::new(rng.random_range(0..184), rng.random_range(0..184))).collect();
    net.train(&pairs, 1, 0.05).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for x in 0..184 {
        let y = net.forward(ItemId(x)).map_err(|e| e.to_string())?;
        worst = worst.max((y.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-9, || format!("softmax sums off by {worst:.3e}"))?;
    Ok(format!("softmax sums within {worst:.1e} of 1 after 10^4 updates"))
}

pub fn network() -> Check {
    Ok([gradient_check()?, training_reduces_loss()?, softmax_normalized()?].join("; "))
}

// Random bot

/// Tally of 10^5 bot draws on the six basic items, in enumeration order.
pub fn bot_histogram(seed: u64, draws: usize) -> Vec<usize> {
    let tree = TaskTree::default_tree();
    let inv = Inventory::basic(&tree);
    let actions = enumerate_actions(&inv);
    let index: BTreeMap<Combination, usize> = actions.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut counts = vec![0; actions.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        counts[index[&bot_choose_action(&inv, &mut rng)]] += 1;
    }
    counts
}

pub fn plugin_entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n as f64).map(|p| -p * p.ln()).sum()
}

pub fn bot_baseline() -> Check {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let draws = 100_000;
    let counts = bot_histogram(2024, draws);
    let k = counts.len();
    ensure(k == 83, || format!("{k} actions on six items"))?;
    let expected = draws as f64 / k as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((k - 1) as f64).unwrap().inverse_cdf(0.999);
    let h = plugin_entropy(&counts);
    let target = (k as f64).ln();
    ensure(chi2 < critical, || format!("chi-square {chi2:.1} exceeds {critical:.1}"))?;
    ensure((h - target).abs() <= 0.05, || format!("entropy {h:.4} vs ln 83 = {target:.4}"))?;
    Ok(format!("chi-square {chi2:.1} < {critical:.1} (df 82); entropy {h:.4} vs ln 83 = {target:.4}"))
}

// Determinism

pub fn determinism() -> Check {
    let cfg = SimConfig { population_size: 30, generations: 12, replicates: 4, seed: 77, ..SimConfig::default() };
    let csv = |jobs: usize| -> Result<Vec<u8>, String> {
        let t = run_replicates(&cfg, jobs).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &t).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let (a, b, c) = (csv(1)?, csv(1)?, csv(4)?);
    ensure(a == b, || "two serial runs differ".into())?;
    ensure(a == c, || "serial and parallel runs differ".into())?;
    Ok(format!("{} summary bytes identical across reruns and 1 vs 4 workers", a.len()))
}

// Metrics oracles

/// A synthetic log: a few actors cycling through a handful of states.
pub fn synthetic_log(seed: u64, n: usize) -> Vec<AttemptEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|t| {
            let state = rng.random_range(0..5u32);
            let size = rng.random_range(1..=3);
            let mut combo: Vec<ItemId> = (0..size).map(|_| ItemId(rng.random_range(0..4 + state))).collect();
            combo.sort();
            let kind = if rng.random_bool(0.85) { EventKind::Attempt } else { EventKind::SocialCopy };
            AttemptEvent {
                t: t as u64,
                actor_id: rng.random_range(0..3),
                kind,
                combination: combo,
                outcome: None,
                score_after: 0,
                state_hash: format!("state{state}"),
                inventory_size: 6 + state as usize,
                target: None,
                target_score: None,
            }
        })
        .collect()
}

/// Histogram entropy per state, written independently of the library.
pub fn oracle_entropy(log: &[AttemptEvent]) -> BTreeMap<String, f64> {
    let mut hist: BTreeMap<String, BTreeMap<Vec<u32>, usize>> = BTreeMap::new();
    for e in log.iter().filter(|e| e.kind == EventKind::Attempt) {
        let key = e.combination.iter().map(|i| i.0).collect();
        *hist.entry(e.state_hash.clone()).or_default().entry(key).or_default() += 1;
    }
    hist.into_iter()
        .map(|(s, h)| {
            let mut counts: Vec<usize> = h.into_values().collect();
            counts.sort_unstable();
            let n = counts.iter().sum::<usize>() as f64;
            let e: f64 = counts.iter().map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum();
            (s, e.max(0.0))
        })
        .collect()
}

pub fn entropy_oracle() -> Check {
    let mut states = 0;
    for seed in 0..10 {
        let log = synthetic_log(seed, 400);
        let want = oracle_entropy(&log);
        let got = entropy_by_state(&log);
        ensure(got.len() == want.len(), || format!("seed {seed}: {} states vs {}", got.len(), want.len()))?;
        for row in &got {
            let w = want[&row.state_hash];
            ensure(row.entropy == w, || format!("seed {seed} {}: {} vs {}", row.state_hash, row.entropy, w))?;
        }
        states += got.len();
    }
    Ok(format!("{states} state entropies equal the histogram oracle exactly"))
}

pub const UNCERTAINTY_TABLE: [(u64, u64); 20] = [
    (1, 0),
    (2, 0),
    (2, 1),
    (3, 0),
    (3, 2),
    (5, 1),
    (7, 3),
    (10, 0),
    (10, 9),
    (12, 4),
    (20, 2),
    (25, 24),
    (40, 10),
    (50, 0),
    (64, 7),
    (100, 33),
    (150, 1),
    (256, 255),
    (500, 12),
    (1000, 100),
];

pub fn uncertainty_oracle() -> Check {
    for (total, t_e) in UNCERTAINTY_TABLE {
        let want = ((total as f64).ln() / (t_e as f64 + 1.0)).sqrt();
        let got = uncertainty(total, t_e);
        ensure((got - want).abs() <= 1e-15, || format!("T={total} t_e={t_e}: {got} vs {want}"))?;
    }
    Ok("uncertainty matches sqrt(ln T / (t_e + 1)) on 20 (T, t_e) pairs".into())
}

/// Ranks by counting (ties get the mean rank), then textbook Pearson.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = rx.len() as f64;
    let (sx, sy) = (rx.iter().sum::<f64>(), ry.iter().sum::<f64>());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn random_matrix(n: usize, rng: &mut ChaCha8Rng, levels: Option<u32>) -> SimilarityMatrix {
    let mut m = SimilarityMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = match levels {
                Some(l) => rng.random_range(0..l) as f64 / l as f64,
                None => rng.random_range(-1.0..1.0),
            };
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

pub fn spearman_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = 5 + case;
        // every other case uses coarse values so ties are common
        let levels = (case % 2 == 1).then_some(4);
        let a = random_matrix(n, &mut rng, levels);
        let b = random_matrix(n, &mut rng, levels);
        let got = spearman_rho(&a, &b).map_err(|e| e.to_string())?;
        let want = oracle_spearman(&a.upper_triangle(), &b.upper_triangle());
        worst = worst.max((got - want).abs());
    }
    ensure(worst <= 1e-12, || format!("largest deviation {worst:.3e}"))?;
    Ok(format!("spearman_rho within {worst:.1e} of the rank-then-Pearson oracle on 20 matrix pairs"))
}

/// Plays a ten-minute group session with a scripted human who inspects and
/// attempts at random, bots keeping time.
pub fn play_session(seed: u64) -> Session {
    let tree = Arc::new(TaskTree::default_tree());
    let condition = if seed.is_multiple_of(2) { Condition::Semantic } else { Condition::NonSemantic };
    let mut s = Session::new(format!("s{seed}"), condition, PlayMode::Group, seed, SessionOptions::default(), tree)
        .expect("default options");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut now = 1_000;
    while !s.is_expired(now) {
        s.advance_bots(now);
        let me = s.view(0, now).expect("human player");
        if rng.random_bool(0.2) {
            let target = rng.random_range(1..6);
            let theirs = s.inspect_player(0, target, now).expect("group inspection");
            if let Some(item) = theirs.iter().find(|i| !me.inventory.iter().any(|m| m.id == i.id)) {
                let recipe = s.inspect_item_recipe(0, target, item.id, now).expect("target owns item");
                let ids: Vec<ItemId> = recipe.iter().map(|i| i.id).collect();
                if ids.iter().all(|id| me.inventory.iter().any(|m| m.id == *id)) {
                    s.submit_attempt(0, &ids, now).expect("owned items");
                }
            }
        } else {
            let n = rng.random_range(1..=3);
            let ids: Vec<ItemId> = (0..n).map(|_| me.inventory[rng.random_range(0..me.inventory.len())].id).collect();
            s.submit_attempt(0, &ids, now).expect("owned items");
        }
        now += rng.random_range(1_000..6_000);
    }
    s.advance_bots(now);
    s
}

pub fn replay_oracle() -> Check {
    let mut events = 0;
    for seed in 0..20 {
        let s = play_session(seed);
        let roster: Vec<u64> = s.roster().into_iter().map(|(id, _)| id).collect();
        let replayed = replay_log(s.tree(), &roster, s.log()).map_err(|e| format!("seed {seed}: {e}"))?;
        let live = s.snapshot();
        ensure(replayed == live, || format!("seed {seed}: replayed state differs"))?;
        events += s.log().len();
    }
    Ok(format!("20 sessions ({events} events) replay to identical scores and inventories"))
}

pub fn metrics_oracles() -> Check {
    Ok([entropy_oracle()?, uncertainty_oracle()?, spearman_oracle()?, replay_oracle()?].join("; "))
}

pub fn correlation_fixture() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_matrix(12, &mut rng, None);
    let mut b = SimilarityMatrix::identity(12);
    for i in 0..12 {
        for j in 0..12 {
            if i != j {
                b.set(i, j, a.get(i, j).powi(3) * 2.0 + 1.0);
            }
        }
    }
    let rho = spearman_rho(&a, &b).map_err(|e| e.to_string())?;
    ensure((rho - 1.0).abs() < 1e-12, || format!("monotone transform gives rho {rho}"))?;
    Ok("effect sizes, language-model correlations and absolute magnitudes are not targets; correlation machinery verified on fixtures".into())
}

// Population-level simulations

pub const REPLICATES: usize = 16;
pub const GENERATIONS: usize = 150;
pub const ENTROPY_WINDOW: usize = 10;

#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    pub final_repertoire: usize,
    /// Mean per-state action entropy over the last generations.
    pub entropy: f64,
    pub final_counts: [usize; 4],
}

/// Runs one replicate step by step, keeping only the attempt events of the
/// last `ENTROPY_WINDOW` generations.
pub fn summarize_replicate(cfg: &SimConfig, replicate: usize) -> ReplicateSummary {
    let tree = cfg.load_tree().expect("default tree");
    let mut world = World::new(&tree, cfg, replicate);
    let mut window = Vec::new();
    let mut last = world.initial_record();
    for g in 1..=cfg.generations {
        let mut rec = world.step(g);
        if g + ENTROPY_WINDOW > cfg.generations {
            window.append(&mut rec.events);
        }
        last = rec;
    }
    let states = entropy_by_state(&window);
    let entropy = states.iter().map(|s| s.entropy).sum::<f64>() / states.len().max(1) as f64;
    ReplicateSummary { final_repertoire: last.repertoire_cumulative, entropy, final_counts: last.strategy_counts.as_array() }
}

pub fn run_condition(cfg: &SimConfig) -> Vec<ReplicateSummary> {
    (0..cfg.replicates).into_par_iter().map(|r| summarize_replicate(cfg, r)).collect()
}

pub fn homogeneous(strategy: Strategy) -> SimConfig {
    SimConfig {
        generations: GENERATIONS,
        replicates: REPLICATES,
        record_actions: true,
        strategy_mix: StrategyMix::only(strategy),
        ..SimConfig::default()
    }
}

/// Final-generation results of the four homogeneous populations, in
/// `Strategy::ALL` order.
pub struct HomogeneousRuns {
    pub runs: Vec<(Strategy, Vec<ReplicateSummary>)>,
}

impl HomogeneousRuns {
    pub fn run() -> Self {
        Self { runs: Strategy::ALL.iter().map(|&s| (s, run_condition(&homogeneous(s)))).collect() }
    }

    fn median_of(&self, s: Strategy, f: impl Fn(&ReplicateSummary) -> f64) -> f64 {
        let (_, reps) = self.runs.iter().find(|(k, _)| *k == s).expect("condition was run");
        median(&reps.iter().map(f).collect::<Vec<_>>())
    }

    pub fn repertoire(&self, s: Strategy) -> f64 {
        self.median_of(s, |r| r.final_repertoire as f64)
    }

    pub fn entropy(&self, s: Strategy) -> f64 {
        self.median_of(s, |r| r.entropy)
    }

    pub fn ordering(&self) -> Check {
        let [ss, si, so, ra] = Strategy::ALL.map(|s| self.repertoire(s));
        let ratio = ss / so;
        let text = format!(
            "median repertoire semantic+social {ss}, social {so}, semantic-individual {si}, random {ra}; ratio {ratio:.2}"
        );
        ensure(ss > so && so > si.max(ra) && ratio >= 1.5, || text.clone())?;
        Ok(text)
    }

    pub fn entropy_ordering(&self) -> Check {
        let [ss, si, so, ra] = Strategy::ALL.map(|s| self.entropy(s));
        let text = format!(
            "median entropy semantic+social {ss:.3} < social {so:.3}; semantic-individual {si:.3} < random {ra:.3}"
        );
        ensure(ss < so && si < ra, || text.clone())?;
        Ok(text)
    }
}

pub fn plurality() -> Check {
    let cfg = SimConfig { generations: GENERATIONS, replicates: REPLICATES, record_actions: false, ..SimConfig::default() };
    let runs = run_condition(&cfg);
    let wins = runs
        .iter()
        .filter(|r| {
            let c = r.final_counts;
            c[0] > c[1].max(c[2]).max(c[3])
        })
        .count();
    let need = (REPLICATES * 3).div_ceil(4);
    let text = format!("semantic+social holds a strict plurality in {wins}/{REPLICATES} replicates (need {need})");
    ensure(wins >= need, || text.clone())?;
    Ok(text)
}
