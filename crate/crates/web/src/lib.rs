//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures come back as
//! `{"error": name, "message": text}` so the page has one code path.

use edhoc_core::harness::fixtures::honest_configs;
use edhoc_core::harness::{self, Action, AdversaryScript};
use edhoc_core::Error;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value, Error>) -> String {
    let v = r.unwrap_or_else(|e| json!({ "error": e.name(), "message": e.to_string() }));
    serde_json::to_string(&v).expect("json values serialize")
}

/// Runs one handshake in memory. A negative `tamper_index` leaves the
/// channel honest; otherwise byte `tamper_offset` of that message is
/// flipped in transit.
#[wasm_bindgen]
pub fn handshake(method: u8, suite: i32, seed: u64, msg4: bool, tamper_index: i32, tamper_offset: usize) -> String {
    respond((|| {
        let (ic, rc) = honest_configs(method, suite, seed)?;
        let mut script = AdversaryScript::honest();
        if tamper_index >= 0 {
            script = script.then(Action::ModifyBytes { index: tamper_index as usize, offset: tamper_offset, xor_mask: 0x01 });
        }
        let out = harness::run_handshake(ic.with_message_4(msg4), rc.with_message_4(msg4), &script);
        let mut v = serde_json::to_value(&out).expect("outcome serializes");
        v["agreed"] = out.agreed().into();
        Ok(v)
    })())
}

/// Runs one attack scenario, or all of them for `"all"`.
#[wasm_bindgen]
pub fn attack(name: &str) -> String {
    respond((|| {
        let verdicts = if name == "all" { harness::run_all() } else { vec![harness::run_scenario(name)?] };
        Ok(serde_json::to_value(verdicts).expect("verdicts serialize"))
    })())
}

/// Wire sizes for every method and functional suite.
#[wasm_bindgen]
pub fn footprint() -> String {
    respond(harness::footprint_table().map(|rows| serde_json::to_value(rows).expect("rows serialize")))
}

/// Names of the attack scenarios, as a JSON array.
#[wasm_bindgen]
pub fn scenarios() -> String {
    serde_json::to_string(&harness::SCENARIOS).expect("names serialize")
}
