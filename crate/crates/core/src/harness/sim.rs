//! Single-threaded in-memory network with a scripted Dolev-Yao adversary.
//!
//! Messages are numbered in the order the honest parties produce them
//! (0 = message 1, 1 = message 2, ...; error replies take the next number).
//! Script actions refer to those numbers. Injected messages have no number.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cbor::{self, Encoder};
use crate::error::{Error, Result};
use crate::handshake::{CompletedSession, Initiator, InitiatorPhase, Responder, ResponderPhase, Role, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToResponder,
    ToInitiator,
}

impl Direction {
    fn reverse(self) -> Self {
        match self {
            Direction::ToResponder => Direction::ToInitiator,
            Direction::ToInitiator => Direction::ToResponder,
        }
    }
}

/// Top-level message fields the adversary can substitute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Method,
    SuitesI,
    GX,
    CI,
    Ead1,
    GY,
    Ciphertext2,
    CR,
    /// The only item of message 3 or message 4.
    Ciphertext,
}

impl Field {
    fn position(self) -> usize {
        match self {
            Field::Method | Field::GY | Field::Ciphertext => 0,
            Field::SuitesI | Field::Ciphertext2 => 1,
            Field::GX | Field::CR => 2,
            Field::CI => 3,
            Field::Ead1 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// No-op; every message not otherwise handled is delivered.
    Deliver,
    Drop { index: usize },
    /// Delivers the message a second time right after the original.
    Replay { index: usize },
    ModifyBytes { index: usize, offset: usize, xor_mask: u8 },
    /// Queues raw bytes after message `after` is sent, or before anything
    /// else when `after` is `None`.
    Inject {
        after: Option<usize>,
        direction: Direction,
        #[serde(with = "hex::serde")]
        bytes: Vec<u8>,
    },
    /// Replaces one top-level item; `value` is its CBOR encoding.
    SubstituteField {
        index: usize,
        field: Field,
        #[serde(with = "hex::serde")]
        value: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryScript {
    pub actions: Vec<Action>,
    /// Deliveries before the run is cut off and waiting parties time out.
    pub step_budget: usize,
}

impl Default for AdversaryScript {
    fn default() -> Self {
        Self { actions: Vec::new(), step_budget: 32 }
    }
}

impl AdversaryScript {
    /// A passive network: everything is delivered once, in order.
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, ..Self::default() }
    }

    pub fn then(mut self, action: Action) -> Self {
        self.actions.push(action);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum PartyResult {
    Completed(CompletedSession),
    Aborted(Error),
    /// Waiting for a message that never came (responder only; a waiting
    /// initiator times out instead).
    Stalled(String),
}

impl PartyResult {
    pub fn session(&self) -> Option<&CompletedSession> {
        match self {
            PartyResult::Completed(s) => Some(s),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&Error> {
        match self {
            PartyResult::Aborted(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, PartyResult::Completed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    /// Production number, `None` for injected bytes.
    pub index: Option<usize>,
    pub direction: Direction,
    #[serde(with = "hex::serde")]
    pub bytes: Vec<u8>,
    pub action: String,
    pub outcome: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Footprint {
    pub per_message: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunOutcome {
    pub initiator: PartyResult,
    pub responder: PartyResult,
    /// Every rejected delivery, including ones after a party completed.
    pub rejections: Vec<(Role, Error)>,
    pub transcript: Vec<TranscriptEntry>,
    pub footprint: Footprint,
}

impl RunOutcome {
    pub fn both_completed(&self) -> bool {
        self.initiator.is_completed() && self.responder.is_completed()
    }

    /// Both completed with the same key, transcript and parameters.
    pub fn agreed(&self) -> bool {
        match (self.initiator.session(), self.responder.session()) {
            (Some(i), Some(r)) => {
                i.prk_out == r.prk_out
                    && i.th_4 == r.th_4
                    && (i.method, i.suite, &i.c_i, &i.c_r) == (r.method, r.suite, &r.c_i, &r.c_r)
            }
            _ => false,
        }
    }

    /// Whether at least one party refused to complete.
    pub fn any_aborted(&self) -> bool {
        !self.both_completed()
    }

    /// All bytes that crossed the wire, concatenated.
    pub fn wire_bytes(&self) -> Vec<u8> {
        self.transcript.iter().flat_map(|e| e.bytes.iter().copied()).collect()
    }
}

/// Drives both parties through a handshake under `script`. Adversarial
/// failures are reported in the outcome, never as an error.
pub fn run_handshake(config_i: SessionConfig, config_r: SessionConfig, script: &AdversaryScript) -> RunOutcome {
    simulate(config_i, config_r, script).outcome
}

/// Outcome plus the final state machines, for scenarios that inspect
/// what they explicitly reveal.
pub(crate) struct Simulation {
    pub outcome: RunOutcome,
    pub initiator: Option<Initiator>,
    pub responder: Option<Responder>,
}

struct Pending {
    index: Option<usize>,
    direction: Direction,
    bytes: Vec<u8>,
    action: String,
}

struct Net<'a> {
    script: &'a AdversaryScript,
    next_index: usize,
    queue: VecDeque<Pending>,
    transcript: Vec<TranscriptEntry>,
}

impl Net<'_> {
    fn emit(&mut self, produced: Vec<u8>, direction: Direction) {
        let index = self.next_index;
        self.next_index += 1;
        let mut bytes = produced;
        let mut labels = Vec::new();
        let mut dropped = false;
        let mut replays = 0;
        let mut injections = Vec::new();
        for a in &self.script.actions {
            match a {
                Action::ModifyBytes { index: i, offset, xor_mask } if *i == index => {
                    if let Some(b) = bytes.get_mut(*offset) {
                        *b ^= xor_mask;
                        labels.push(format!("modify[{offset}]^={xor_mask:#04x}"));
                    }
                }
                Action::SubstituteField { index: i, field, value } if *i == index => {
                    if let Ok(b) = substitute(&bytes, *field, value) {
                        bytes = b;
                        labels.push(format!("substitute {field:?}"));
                    }
                }
                Action::Drop { index: i } if *i == index => dropped = true,
                Action::Replay { index: i } if *i == index => replays += 1,
                Action::Inject { after: Some(i), direction, bytes } if *i == index => {
                    injections.push((*direction, bytes.clone()))
                }
                _ => {}
            }
        }
        let action = if labels.is_empty() { "deliver".to_string() } else { labels.join(", ") };
        if dropped {
            self.transcript.push(TranscriptEntry {
                index: Some(index),
                direction,
                bytes,
                action: format!("{action}, drop"),
                outcome: "not delivered".into(),
            });
        } else {
            for _ in 0..replays {
                self.queue.push_back(Pending {
                    index: Some(index),
                    direction,
                    bytes: bytes.clone(),
                    action: "replay".into(),
                });
            }
            // The original goes first.
            let at = self.queue.len() - replays;
            self.queue.insert(at, Pending { index: Some(index), direction, bytes, action });
        }
        for (direction, bytes) in injections {
            self.queue.push_back(Pending { index: None, direction, bytes, action: "inject".into() });
        }
    }
}

fn substitute(msg: &[u8], field: Field, value: &[u8]) -> Result<Vec<u8>> {
    let items = cbor::array_items(msg)?;
    let pos = field.position();
    if pos >= items.len() {
        return Err(Error::MalformedMessage("no such field"));
    }
    let mut e = Encoder::new();
    e.array(items.len());
    for (n, item) in items.iter().enumerate() {
        e.raw(if n == pos { value } else { item });
    }
    Ok(e.into_bytes())
}

pub(crate) fn simulate(config_i: SessionConfig, config_r: SessionConfig, script: &AdversaryScript) -> Simulation {
    let mut net = Net { script, next_index: 0, queue: VecDeque::new(), transcript: Vec::new() };
    let mut rejections = Vec::new();

    let mut responder = match Responder::new(config_r) {
        Ok(r) => r,
        Err(e) => return early_exit(PartyResult::Stalled("Start".into()), PartyResult::Aborted(e)),
    };
    for a in &script.actions {
        if let Action::Inject { after: None, direction, bytes } = a {
            net.queue.push_back(Pending { index: None, direction: *direction, bytes: bytes.clone(), action: "inject".into() });
        }
    }
    let mut initiator = match Initiator::start(config_i) {
        Ok((i, m1)) => {
            net.emit(m1, Direction::ToResponder);
            i
        }
        Err(e) => return early_exit(PartyResult::Aborted(e), PartyResult::Stalled("Start".into())),
    };

    let mut i_done: Option<CompletedSession> = None;
    let mut r_done: Option<CompletedSession> = None;
    let mut steps = 0;
    while let Some(p) = net.queue.pop_front() {
        if steps == script.step_budget {
            net.queue.push_front(p);
            break;
        }
        steps += 1;
        let (result, newly_aborted, reply_for_error) = match p.direction {
            Direction::ToResponder => {
                let before = responder.phase();
                let res = responder.receive(&p.bytes);
                let aborted = before != ResponderPhase::Aborted && responder.phase() == ResponderPhase::Aborted;
                if let Ok(s) = responder.session() {
                    r_done = Some(s);
                }
                (res, aborted, responder.error_reply().map(<[u8]>::to_vec))
            }
            Direction::ToInitiator => {
                let before = initiator.phase();
                let res = initiator.receive(&p.bytes);
                let aborted = before != InitiatorPhase::Aborted && initiator.phase() == InitiatorPhase::Aborted;
                if let Ok(s) = initiator.session() {
                    i_done = Some(s);
                }
                (res, aborted, initiator.error_reply().map(<[u8]>::to_vec))
            }
        };
        let outcome = match result {
            Ok(Some(reply)) => {
                net.emit(reply, p.direction.reverse());
                "accepted".to_string()
            }
            Ok(None) => "accepted".to_string(),
            Err(e) => {
                let role = match p.direction {
                    Direction::ToResponder => Role::Responder,
                    Direction::ToInitiator => Role::Initiator,
                };
                let outcome = format!("rejected: {}", e.name());
                rejections.push((role, e));
                if newly_aborted {
                    if let Some(reply) = reply_for_error {
                        net.emit(reply, p.direction.reverse());
                    }
                }
                outcome
            }
        };
        net.transcript.push(TranscriptEntry {
            index: p.index,
            direction: p.direction,
            bytes: p.bytes,
            action: p.action,
            outcome,
        });
    }
    // Anything still queued was cut off by the step budget.
    for p in net.queue.drain(..) {
        net.transcript.push(TranscriptEntry {
            index: p.index,
            direction: p.direction,
            bytes: p.bytes,
            action: p.action,
            outcome: "not delivered (step budget)".into(),
        });
    }

    let initiator_result = match i_done {
        Some(s) => PartyResult::Completed(s),
        None => match initiator.error() {
            Some(e) if initiator.phase() == InitiatorPhase::Aborted => PartyResult::Aborted(e.clone()),
            _ => PartyResult::Aborted(Error::Timeout),
        },
    };
    let responder_result = match r_done {
        Some(s) => PartyResult::Completed(s),
        None => match responder.error() {
            Some(e) if responder.phase() == ResponderPhase::Aborted => PartyResult::Aborted(e.clone()),
            _ => PartyResult::Stalled(format!("{:?}", responder.phase())),
        },
    };
    let footprint = footprint_of(&net.transcript);
    Simulation {
        outcome: RunOutcome {
            initiator: initiator_result,
            responder: responder_result,
            rejections,
            transcript: net.transcript,
            footprint,
        },
        initiator: Some(initiator),
        responder: Some(responder),
    }
}

fn early_exit(initiator: PartyResult, responder: PartyResult) -> Simulation {
    Simulation {
        outcome: RunOutcome {
            initiator,
            responder,
            rejections: Vec::new(),
            transcript: Vec::new(),
            footprint: Footprint::default(),
        },
        initiator: None,
        responder: None,
    }
}

fn footprint_of(transcript: &[TranscriptEntry]) -> Footprint {
    let per_message: Vec<usize> = transcript.iter().map(|e| e.bytes.len()).collect();
    let total = per_message.iter().sum();
    Footprint { per_message, total }
}
