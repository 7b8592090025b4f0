//! Per-run summary record, serialized as one JSON object.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::engine::Machine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mitigation: String,
    pub forwarding_policy: String,
    pub tlb_enforcement: String,
    pub config_digest: String,
    /// Core-stepped cycles; receiver time is not counted.
    pub cycles: u64,
    pub retired_instructions: u64,
    pub ipc: f64,
    pub squash_count: u64,
    pub forward_count: u64,
    pub mshr_peak: usize,
    pub secret: Option<u8>,
    pub inferred_secret: Option<u8>,
    pub attack_success: Option<bool>,
    pub expected_success: Option<bool>,
    /// Committed state matched the in-order reference after every call.
    pub arch_clean: Option<bool>,
    pub fault: Option<String>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(scenario: &str, mitigation: &str, cfg: &SimConfig) -> RunReport {
        RunReport {
            scenario: scenario.to_string(),
            mitigation: mitigation.to_string(),
            forwarding_policy: cfg.forwarding_policy.name().to_string(),
            tlb_enforcement: cfg.tlb_enforcement.name().to_string(),
            config_digest: cfg.digest(),
            cycles: 0,
            retired_instructions: 0,
            ipc: 0.0,
            squash_count: 0,
            forward_count: 0,
            mshr_peak: 0,
            secret: None,
            inferred_secret: None,
            attack_success: None,
            expected_success: None,
            arch_clean: None,
            fault: None,
            error: None,
        }
    }

    /// Copies the counters of `m`.
    pub fn record(&mut self, m: &Machine) {
        let s = m.stats();
        self.cycles = s.core_cycles;
        self.retired_instructions = s.retired_instructions;
        self.ipc = if s.core_cycles == 0 {
            0.0
        } else {
            s.retired_instructions as f64 / s.core_cycles as f64
        };
        self.squash_count = s.squash_count;
        self.forward_count = s.forward_count;
        self.mshr_peak = m.mem.mshr_peak();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// Matches the expectation, or there is none.
    pub fn as_expected(&self) -> bool {
        self.expected_success.is_none() || self.expected_success == self.attack_success
    }

    /// One aligned line for the matrix listing.
    pub fn row(&self) -> String {
        let outcome = match (self.attack_success, &self.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(true), _) => "LEAKED".into(),
            (Some(false), _) => "blocked".into(),
            (None, _) => format!("{} cycles", self.cycles),
        };
        let mark = if self.as_expected() {
            ""
        } else {
            "  (unexpected)"
        };
        format!(
            "{:<20} {:<17} {:<12} {:<13} {:>9} {outcome}{mark}",
            self.scenario,
            self.forwarding_policy,
            self.mitigation,
            self.tlb_enforcement,
            self.cycles
        )
    }
}
