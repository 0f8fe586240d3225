//! Synthetic tasks, multi-method experiments, run outputs, and the
//! self-verification suites behind the CLI.

pub mod experiment;
pub mod output;
mod task;
pub mod verify;

pub use experiment::{compare_methods, desk_config, parse_methods, ExperimentResult, MethodSpec, RunOutput};
pub use task::{make_task, Task, TaskKind, TaskSpec};
