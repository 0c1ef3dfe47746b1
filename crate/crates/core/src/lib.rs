//! Ephemeral Diffie-Hellman over COSE: a compact authenticated key exchange
//! for constrained devices.
//!
//! The layers, bottom up: [`suite`] (algorithm registry and primitives),
//! [`cbor`] / [`codec`] (wire format), [`key_schedule`], [`creds`],
//! [`handshake`] (state machines) and [`harness`] (in-memory network,
//! adversary scripts and security scenarios).

pub mod cbor;
pub mod codec;
pub mod creds;
pub mod error;
pub mod handshake;
pub mod harness;
pub mod key_schedule;
pub mod suite;

pub use error::{Error, Result};
