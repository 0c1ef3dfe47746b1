//! Adversarial network simulator, attack scenarios, footprint reports,
//! regression vectors and a UDP transport.

pub mod fixtures;
pub mod footprint;
pub mod scenarios;
pub mod sim;
pub mod udp;
pub mod vectors;

pub use footprint::{footprint_table, report_footprint, MessageFootprint};
pub use scenarios::{run_all, run_scenario, ScenarioVerdict, SCENARIOS, THREAT_COVERAGE};
pub use sim::{run_handshake, Action, AdversaryScript, Direction, Field, PartyResult, RunOutcome};
pub use vectors::{all_vectors_json, vectors, HandshakeVector};
