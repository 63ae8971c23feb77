//! Deterministic agent-based scenario simulation.
//!
//! A [`Scenario`] describes a population of authors, reviewers, and
//! board members with simple parametric policies; the engine walks the
//! simulated clock day by day, turning policy decisions into signed
//! ledger events. Runs are reproducible to the byte: every random
//! choice comes from a per-agent, per-day stream split from the
//! scenario seed, so adding an agent never perturbs anyone else's
//! draws.

pub mod engine;
pub mod scenario;

pub use engine::{agent_rng, run, MetricsRow, RunOutput, SimError};
pub use scenario::{parse_protocol_sections, AgentSpec, JournalSpec, Policy, Role, Scenario, Target};
