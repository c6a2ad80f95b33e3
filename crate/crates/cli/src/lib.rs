//! Implementation of the `totem` command line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use totem_core::config::{ConfigError, SimConfig, SweepCell, SweepSpec};
use totem_core::event::{AttemptEvent, LogError};
use totem_core::evolution::{run_replicate, summary_fields, write_trajectory_jsonl, GenerationRecord, SUMMARY_HEADER};
use totem_core::metrics::correlation::spearman_rho;
use totem_core::metrics::entropy::{entropy_by_state, unique_actions_by_state, write_entropy_csv, write_unique_actions_csv};
use totem_core::metrics::features::{
    behavioral_feature_table, consecutive_similarity, write_consecutive_csv, write_feature_csv, SimilaritySources,
};
use totem_core::metrics::repertoire_from_log;
use totem_core::metrics::stats::quantile;
use totem_core::semantic::SimilarityMatrix;
use totem_core::session::SessionManager;
use totem_core::task::{load_task_tree, TaskTree};

/// Failures, split by exit status: bad input is 2, filesystem trouble is 3.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::TaskFile { .. } => CliError::Io(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    replicates: usize,
    files: Vec<String>,
    config: &'a SimConfig,
}

/// Reads a run configuration; a manifest written by `run` is accepted too
/// and yields the configuration it recorded.
pub fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let cfg_value = match value.get("config_sha256").and(value.get("config")) {
        Some(inner) => inner.clone(),
        None => value,
    };
    let cfg: SimConfig = serde_json::from_value(cfg_value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| CliError::Io(e.to_string()))
}

/// Runs one replicate, writes its JSON lines and returns its summary rows.
fn replicate_task(tree: &TaskTree, cfg: &SimConfig, r: usize, dir: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let t = run_replicate(tree, cfg, r);
    let path = dir.join(format!("replicate_{r}.jsonl"));
    let mut w = create(&path)?;
    write_trajectory_jsonl(&mut w, &t).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    if let Some(sim) = &t.similarity {
        let path = dir.join(format!("similarity_{r}.csv"));
        sim.write_csv(create(&path)?).map_err(|e| io_err(&path, e))?;
    }
    Ok(t.records.iter().map(|rec| summary_fields(r, rec)).collect())
}

fn write_run_outputs(dir: &Path, cfg: &SimConfig, rows: &[Vec<String>]) -> Result<(), CliError> {
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(SUMMARY_HEADER).map_err(|e| io_err(&path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let mut files = vec!["summary.csv".to_string()];
    files.extend((0..cfg.replicates).map(|r| format!("replicate_{r}.jsonl")));
    if cfg.export_similarity {
        files.extend((0..cfg.replicates).map(|r| format!("similarity_{r}.csv")));
    }
    let manifest = Manifest {
        tool: "totem",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(cfg.to_json().as_bytes()),
        replicates: cfg.replicates,
        files,
        config: cfg,
    };
    let path = dir.join("manifest.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| io_err(&path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))
}

/// `totem run`: all replicates of one configuration.
pub fn cmd_run(config: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let tree = cfg.load_tree()?;
    ensure_dir(out)?;
    let results: Vec<Result<Vec<Vec<String>>, CliError>> =
        pool(jobs)?.install(|| (0..cfg.replicates).into_par_iter().map(|r| replicate_task(&tree, &cfg, r, out)).collect());
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    write_run_outputs(out, &cfg, &rows)
}

const CELL_METRICS: [(&str, usize); 3] = [("repertoire_cumulative", 3), ("repertoire_instant", 2), ("mean_score", 4)];

/// `totem sweep`: every cell of the grid, each in its own `cell_<i>`
/// directory with the `run` layout, plus `runs.csv` (final generation of
/// every (cell, replicate)) and `cells.csv` (per-cell, per-generation
/// medians and quartiles).
pub fn cmd_sweep(spec_path: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<(), CliError> {
    let text = read_text(spec_path)?;
    let mut spec = SweepSpec::from_json(&text)?;
    if let Some(s) = seed {
        spec.base.seed = s;
    }
    let cells: Vec<SweepCell> = spec.cells()?;
    let trees: Vec<TaskTree> = cells.iter().map(|c| c.config.load_tree()).collect::<Result<_, _>>()?;
    ensure_dir(out)?;
    for c in &cells {
        ensure_dir(&out.join(format!("cell_{}", c.index)))?;
    }
    let tasks: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|i| (0..cells[i].config.replicates).map(move |r| (i, r))).collect();
    let results: Vec<Result<Vec<Vec<String>>, CliError>> = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(i, r)| replicate_task(&trees[i], &cells[i].config, r, &out.join(format!("cell_{}", cells[i].index))))
            .collect()
    });

    let mut per_cell: Vec<Vec<Vec<String>>> = vec![Vec::new(); cells.len()];
    for (&(i, _), res) in tasks.iter().zip(results) {
        per_cell[i].extend(res?);
    }
    for (c, rows) in cells.iter().zip(&per_cell) {
        write_run_outputs(&out.join(format!("cell_{}", c.index)), &c.config, rows)?;
    }

    let path = out.join("runs.csv");
    let mut runs = csv::Writer::from_writer(create(&path)?);
    let mut header = vec!["cell", "label"];
    header.extend(SUMMARY_HEADER);
    runs.write_record(&header).map_err(|e| io_err(&path, e))?;
    let generations = |c: &SweepCell| c.config.generations.to_string();
    for (c, rows) in cells.iter().zip(&per_cell) {
        for row in rows.iter().filter(|row| row[1] == generations(c)) {
            let mut rec = vec![c.index.to_string(), c.label()];
            rec.extend(row.iter().cloned());
            runs.write_record(&rec).map_err(|e| io_err(&path, e))?;
        }
    }
    runs.flush().map_err(|e| io_err(&path, e))?;

    let path = out.join("cells.csv");
    let mut agg = csv::Writer::from_writer(create(&path)?);
    let mut header = vec!["cell".to_string(), "label".to_string(), "generation".to_string(), "replicates".to_string()];
    for (name, _) in CELL_METRICS {
        for stat in ["median", "q1", "q3"] {
            header.push(format!("{name}_{stat}"));
        }
    }
    agg.write_record(&header).map_err(|e| io_err(&path, e))?;
    for (c, rows) in cells.iter().zip(&per_cell) {
        for g in 0..=c.config.generations {
            let gs = g.to_string();
            let at: Vec<&Vec<String>> = rows.iter().filter(|row| row[1] == gs).collect();
            let mut rec = vec![c.index.to_string(), c.label(), gs, at.len().to_string()];
            for (_, col) in CELL_METRICS {
                let vals: Vec<f64> = at.iter().map(|row| row[col].parse().expect("numeric summary")).collect();
                for p in [0.5, 0.25, 0.75] {
                    rec.push(format!("{:.6}", quantile(&vals, p)));
                }
            }
            agg.write_record(&rec).map_err(|e| io_err(&path, e))?;
        }
    }
    agg.flush().map_err(|e| io_err(&path, e))?;

    let path = out.join("sweep.json");
    let mut w = create(&path)?;
    let cells_json: Vec<Value> = cells
        .iter()
        .map(|c| serde_json::json!({ "cell": c.index, "label": c.label(), "config_sha256": sha256_hex(c.config.to_json().as_bytes()) }))
        .collect();
    let doc = serde_json::json!({ "tool": "totem", "version": env!("CARGO_PKG_VERSION"), "spec": spec, "cells": cells_json });
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| io_err(&path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))
}

/// Reads attempt events from a session log, or from the generation
/// records a simulation writes (their embedded events, in order).
pub fn load_events(path: &Path) -> Result<Vec<AttemptEvent>, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |m: String| CliError::Input(format!("{}: {}", path.display(), LogError::Malformed { line: i + 1, message: m }));
        let value: Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if value.get("generation").is_some() {
            let rec: GenerationRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
            out.extend(rec.events);
        } else {
            out.push(serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?);
        }
    }
    Ok(out)
}

fn load_matrix(path: &Path) -> Result<SimilarityMatrix, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    SimilarityMatrix::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Entropy,
    Unique,
    Repertoire,
    Consecutive,
    Features,
    Spearman,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeArgs {
    pub logs: Vec<PathBuf>,
    pub metrics: Vec<Metric>,
    pub out: Option<PathBuf>,
    pub semantic: Option<PathBuf>,
    pub structural: Option<PathBuf>,
    pub color: Option<PathBuf>,
    pub matrices: Vec<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub tree: Option<PathBuf>,
}

/// `totem analyze`: writes one CSV per requested metric into `out`;
/// `spearman` prints ρ on standard output instead.
pub fn cmd_analyze(args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.metrics.is_empty() {
        return Err(CliError::Input("no metric requested".into()));
    }
    let tree = match &args.tree {
        Some(p) => load_task_tree(&read_text(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => TaskTree::default_tree(),
    };
    let needs_log = args.metrics.iter().any(|m| *m != Metric::Spearman);
    let mut events = Vec::new();
    if needs_log {
        if args.logs.is_empty() {
            return Err(CliError::Input("--log is required for this metric".into()));
        }
        for p in &args.logs {
            events.extend(load_events(p)?);
        }
    }
    let out_dir = || -> Result<&Path, CliError> {
        let dir = args.out.as_deref().ok_or_else(|| CliError::Input("--out is required for this metric".into()))?;
        ensure_dir(dir)?;
        Ok(dir)
    };
    for metric in &args.metrics {
        match metric {
            Metric::Entropy => {
                let path = out_dir()?.join("entropy.csv");
                write_entropy_csv(create(&path)?, &entropy_by_state(&events)).map_err(|e| io_err(&path, e))?;
            }
            Metric::Unique => {
                let path = out_dir()?.join("unique_actions.csv");
                write_unique_actions_csv(create(&path)?, &unique_actions_by_state(&events)).map_err(|e| io_err(&path, e))?;
            }
            Metric::Repertoire => {
                let path = out_dir()?.join("repertoire.csv");
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(["event", "t", "repertoire"]).map_err(|e| io_err(&path, e))?;
                for (i, (e, n)) in events.iter().zip(repertoire_from_log(&events, &tree)).enumerate() {
                    w.write_record([i.to_string(), e.t.to_string(), n.to_string()]).map_err(|e| io_err(&path, e))?;
                }
                w.flush().map_err(|e| io_err(&path, e))?;
            }
            Metric::Consecutive => {
                let sim = match &args.semantic {
                    Some(p) => load_matrix(p)?,
                    None => return Err(CliError::Input("--sim is required for consecutive".into())),
                };
                let rows = consecutive_similarity(&events, &sim).map_err(|e| CliError::Input(e.to_string()))?;
                let path = out_dir()?.join("consecutive.csv");
                write_consecutive_csv(create(&path)?, &rows).map_err(|e| io_err(&path, e))?;
            }
            Metric::Features => {
                let load = |p: &Option<PathBuf>| p.as_deref().map(load_matrix).transpose();
                let (sem, st, col) = (load(&args.semantic)?, load(&args.structural)?, load(&args.color)?);
                let sims = SimilaritySources { semantic: sem.as_ref(), structural: st.as_ref(), color: col.as_ref() };
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                let rows = behavioral_feature_table(&events, &tree, sims, args.k, &mut rng).map_err(|e| CliError::Input(e.to_string()))?;
                let path = out_dir()?.join("features.csv");
                write_feature_csv(create(&path)?, &rows).map_err(|e| io_err(&path, e))?;
            }
            Metric::Spearman => {
                let [a, b] = args.matrices.as_slice() else {
                    return Err(CliError::Input("spearman needs exactly two --matrix files".into()));
                };
                let rho = spearman_rho(&load_matrix(a)?, &load_matrix(b)?).map_err(|e| CliError::Input(e.to_string()))?;
                writeln!(stdout, "{rho}").map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
    }
    Ok(())
}

/// `totem serve`: runs the session service until interrupted.
pub fn cmd_serve(addr: &str, capacity: usize, tree: Option<&Path>) -> Result<(), CliError> {
    let tree = match tree {
        Some(p) => load_task_tree(&read_text(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => TaskTree::default_tree(),
    };
    let state = totem_server::AppState::new(SessionManager::new(tree, capacity), Arc::new(totem_server::SystemClock::default()));
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!("listening on {addr}");
    rt.block_on(totem_server::serve(addr, state)).map_err(|e| CliError::Io(format!("{addr}: {e}")))
}
