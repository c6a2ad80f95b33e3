//! Core of the totem innovation model: the crafting task, agents with a
//! learned semantic memory, the evolutionary simulator, measurement tools
//! and live play sessions.

pub mod agents;
pub mod config;
pub mod event;
pub mod metrics;
pub mod evolution;
pub mod semantic;
pub mod session;
pub mod task;

pub use agents::{AgentState, BehaviorParams, Strategy};
pub use config::{SimConfig, SweepSpec};
pub use event::{AttemptEvent, EventKind};
pub use evolution::{run_replicates, run_simulation, GenerationRecord, Trajectory};
pub use semantic::{EmbeddingNet, SimilarityMatrix};
pub use task::{Combination, Inventory, ItemId, TaskTree};
