//! Representation database and knowledge transfer between tasks.
//!
//! Frozen-extractor codes are stored per task together with label, sensor
//! and time. A retention pass thins each task to a budget of characteristic
//! vectors; new tasks borrow normal vectors from the most similar stored
//! tasks; whole databases travel between units as exchange files.

pub mod compose;
pub mod db;
pub mod exchange;
pub mod retention;

pub use compose::{compose_training_set, cosine, task_similarity, Composition, MixPolicy};
pub use db::{RepresentationDb, RepresentationRecord, TaskStore};
pub use exchange::{export_db, export_string, import_db, import_str, ExchangeHeader, FORMAT_VERSION};
pub use retention::{farthest_point, select_characteristic, spread};
