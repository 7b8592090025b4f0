//! Attack scenarios: a victim program, the attacker's action script, the
//! flush+reload receiver, and the runner that scores a leak.

mod benign;
mod file;
pub mod gadgets;
mod matrix;
pub mod probe;
pub mod transforms;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::ArchState;
use crate::config::SimConfig;
use crate::engine::{Completion, Machine};
use crate::isa::{Program, Reg};
use crate::lsu::ArcticWhitelist;
use crate::reference::{Interpreter, Stop};
use crate::report::RunReport;
use crate::trace::TraceEvent;

pub use benign::{benign_program, learn_whitelist, run_benign, BENIGN};
pub use file::{load_scenario_file, parse_scenario, ScenarioFileError};
pub use gadgets::{build, bundled, expected_success, GadgetOptions, BUNDLED, ROP_VARIANT};
pub use matrix::{run_matrix, MatrixSpec};
pub use probe::{ProbeReading, ProbeSpec};

/// Initial stack pointer for every call.
pub const STACK_TOP: u64 = 0x9000;
/// Scratch register used by the exact-mask transform.
pub const MASK_SCRATCH: u8 = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    None,
    Fence,
    CoarseMask,
    ExactMask,
}

impl Mitigation {
    pub const ALL: [Mitigation; 4] = [
        Mitigation::None,
        Mitigation::Fence,
        Mitigation::CoarseMask,
        Mitigation::ExactMask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mitigation::None => "none",
            Mitigation::Fence => "fence",
            Mitigation::CoarseMask => "coarse_mask",
            Mitigation::ExactMask => "exact_mask",
        }
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mitigation {
    type Err = String;

    fn from_str(s: &str) -> Result<Mitigation, String> {
        let s = s.replace('-', "_");
        Mitigation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mitigation `{s}`"))
    }
}

/// A value the attacker supplies: a constant, a code label, or the base of
/// the probe plane currently being attacked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Imm(u64),
    Label(String),
    ProbePlane,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Sets registers (sp defaults to [`STACK_TOP`]) and runs from `entry`
    /// until `halt`.
    Call {
        entry: String,
        regs: Vec<(Reg, Value)>,
    },
    Poke {
        addr: u64,
        size: u8,
        value: Value,
    },
    /// Evicts the line holding `addr` (no architectural effect).
    Flush {
        addr: u64,
    },
}

impl Action {
    pub fn call(entry: &str, regs: &[(u8, Value)]) -> Action {
        Action::Call {
            entry: entry.to_string(),
            regs: regs
                .iter()
                .map(|(r, v)| (Reg::new(*r).expect("architectural register"), v.clone()))
                .collect(),
        }
    }
}

/// Where each mitigation is inserted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationSites {
    pub fence_at: String,
    pub mask_at: String,
    pub index: Reg,
    pub bound: Reg,
    /// Element count of the region the index selects from.
    pub region_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Secret {
    pub addr: u64,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub program: Program,
    pub setup: Vec<Action>,
    /// Run before every attack attempt.
    pub prime: Vec<Action>,
    pub attack: Vec<Action>,
    /// Attack attempts per probe plane.
    pub attempts: usize,
    pub secret: Secret,
    pub probe: ProbeSpec,
    pub sites: Option<MitigationSites>,
    /// Configuration `key=value` settings the scenario asks for, applied in
    /// order (`preset` is a key).
    pub config: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("scenario `{0}` has no mitigation sites")]
    NoSites(String),
    #[error("mitigation: {0}")]
    Transform(#[from] transforms::TransformError),
    #[error("cycle limit of {0} exceeded")]
    Timeout(u64),
    #[error("reference interpreter did not halt within {0} steps")]
    ReferenceStuck(u64),
}

impl Scenario {
    /// The victim program with `m` applied.
    pub fn program_for(&self, m: Mitigation) -> Result<Program, ScenarioError> {
        if m == Mitigation::None {
            return Ok(self.program.clone());
        }
        let s = self
            .sites
            .as_ref()
            .ok_or_else(|| ScenarioError::NoSites(self.name.clone()))?;
        let p = &self.program;
        Ok(match m {
            Mitigation::None => unreachable!(),
            Mitigation::Fence => transforms::insert_fence(p, &s.fence_at)?,
            Mitigation::CoarseMask => {
                transforms::coarse_mask(p, &s.mask_at, s.index, s.region_size)?
            }
            Mitigation::ExactMask => transforms::exact_mask(
                p,
                &s.mask_at,
                s.index,
                s.bound,
                Reg::new(MASK_SCRATCH).unwrap(),
            )?,
        })
    }

    /// Setup, then for each probe plane the priming and attack script,
    /// `attempts` times. Each step carries the plane base it runs against.
    pub fn script(&self) -> Vec<(Action, Option<u64>)> {
        let mut out: Vec<(Action, Option<u64>)> =
            self.setup.iter().map(|a| (a.clone(), None)).collect();
        for plane in 0..self.probe.amplification.max(1) {
            let base = Some(self.probe.plane_base(plane));
            for _ in 0..self.attempts.max(1) {
                out.extend(self.prime.iter().map(|a| (a.clone(), base)));
                out.extend(self.attack.iter().map(|a| (a.clone(), base)));
            }
        }
        out
    }
}

/// Something that can run the attacker's script: the speculative machine or
/// the in-order reference.
pub trait Executor {
    fn set_reg(&mut self, r: Reg, v: u64);
    fn poke(&mut self, addr: u64, size: u8, value: u64);
    fn flush(&mut self, addr: u64);
    fn call(&mut self, entry: u64) -> Result<Option<String>, ScenarioError>;
    fn arch_state(&self) -> ArchState;
}

impl Executor for Machine {
    fn set_reg(&mut self, r: Reg, v: u64) {
        Machine::set_reg(self, r, v)
    }

    fn poke(&mut self, addr: u64, size: u8, value: u64) {
        self.mem.backing.write(addr, size, value)
    }

    fn flush(&mut self, addr: u64) {
        self.mem.flush(addr)
    }

    fn call(&mut self, entry: u64) -> Result<Option<String>, ScenarioError> {
        match self.run_from(entry) {
            Ok(Completion::Halted) => Ok(None),
            Ok(Completion::Faulted(f)) => Ok(Some(f.to_string())),
            Err(crate::engine::RunError::Timeout(n)) => Err(ScenarioError::Timeout(n)),
        }
    }

    fn arch_state(&self) -> ArchState {
        Machine::arch_state(self)
    }
}

/// Reference steps allowed per call.
const REFERENCE_STEPS: u64 = 10_000_000;

impl Executor for Interpreter {
    fn set_reg(&mut self, r: Reg, v: u64) {
        if !r.is_zero() {
            self.regs[r.index()] = v;
        }
    }

    fn poke(&mut self, addr: u64, size: u8, value: u64) {
        self.memory.write(addr, size, value)
    }

    fn flush(&mut self, _addr: u64) {}

    fn call(&mut self, entry: u64) -> Result<Option<String>, ScenarioError> {
        match self.run_from(entry, REFERENCE_STEPS) {
            Stop::Halted => Ok(None),
            Stop::Fault(f) => Ok(Some(f.to_string())),
            Stop::StepLimit => Err(ScenarioError::ReferenceStuck(REFERENCE_STEPS)),
        }
    }

    fn arch_state(&self) -> ArchState {
        self.state()
    }
}

fn resolve(p: &Program, v: &Value, plane: Option<u64>) -> Result<u64, ScenarioError> {
    match v {
        Value::Imm(x) => Ok(*x),
        Value::ProbePlane => Ok(plane.unwrap_or(0)),
        Value::Label(l) => p
            .label(l)
            .ok_or_else(|| ScenarioError::UnknownLabel(l.clone())),
    }
}

/// Applies one action; returns the fault text of a faulting call.
pub fn apply(
    ex: &mut dyn Executor,
    p: &Program,
    action: &Action,
    plane: Option<u64>,
) -> Result<Option<String>, ScenarioError> {
    match action {
        Action::Call { entry, regs } => {
            let pc = resolve(p, &Value::Label(entry.clone()), plane)?;
            ex.set_reg(Reg::SP, STACK_TOP);
            for (r, v) in regs {
                ex.set_reg(*r, resolve(p, v, plane)?);
            }
            ex.call(pc)
        }
        Action::Poke { addr, size, value } => {
            ex.poke(*addr, *size, resolve(p, value, plane)?);
            Ok(None)
        }
        Action::Flush { addr } => {
            ex.flush(*addr);
            Ok(None)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mitigation: Option<Mitigation>,
    /// Active whitelist for the arctic policy.
    pub whitelist: BTreeSet<u64>,
    pub trace: bool,
    /// Compare committed state with the in-order reference after every call.
    pub check_arch: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: RunReport,
    pub reading: Option<ProbeReading>,
    pub trace: Vec<TraceEvent>,
    /// Load pcs the arctic policy learned during the run.
    pub learned: BTreeSet<u64>,
    /// First committed-state divergence from the reference, if any.
    pub divergence: Option<String>,
    pub error: Option<ScenarioError>,
}

/// Runs the whole script of `s` on a fresh machine, then the receiver.
pub fn run_scenario(s: &Scenario, cfg: &SimConfig, opts: &RunOptions) -> ScenarioRun {
    let mitigation = opts.mitigation.unwrap_or(Mitigation::None);
    let mut report = RunReport::new(&s.name, mitigation.name(), cfg);
    report.secret = Some(s.secret.value);
    report.expected_success = expected_success(
        &s.name,
        mitigation,
        cfg.forwarding_policy,
        cfg.tlb_enforcement,
    );
    let mut run = ScenarioRun {
        report,
        reading: None,
        trace: Vec::new(),
        learned: BTreeSet::new(),
        divergence: None,
        error: None,
    };
    let program = match s.program_for(mitigation) {
        Ok(p) => p,
        Err(e) => {
            run.report.error = Some(e.to_string());
            run.error = Some(e);
            return run;
        }
    };
    let mut m =
        Machine::with_whitelist(&program, cfg, ArcticWhitelist::new(opts.whitelist.clone()));
    if opts.trace {
        m.enable_trace();
    }
    let mut reference = opts.check_arch.then(|| Interpreter::new(&program));
    let mut flushed_probe = false;
    let result = (|| -> Result<(), ScenarioError> {
        for (action, plane) in s.script() {
            if plane.is_some() && !flushed_probe {
                s.probe.flush_all(&mut m.mem);
                flushed_probe = true;
            }
            let fault = apply(&mut m, &program, &action, plane)?;
            if let Some(f) = fault {
                run.report.fault.get_or_insert(f);
            }
            if let Some(r) = reference.as_mut() {
                apply(r, &program, &action, plane)?;
                if matches!(action, Action::Call { .. }) && run.divergence.is_none() {
                    run.divergence = m.arch_state().diff(&r.arch_state());
                }
            }
        }
        Ok(())
    })();
    run.report.record(&m);
    run.learned = m.whitelist.learned().clone();
    if opts.trace {
        run.trace = m.take_trace();
    }
    if let Some(r) = &reference {
        if run.divergence.is_none() {
            run.divergence = m.arch_state().diff(&r.arch_state());
        }
        run.report.arch_clean = Some(run.divergence.is_none());
    }
    if let Err(e) = result {
        run.report.error = Some(e.to_string());
        run.error = Some(e);
        return run;
    }
    let settled = m.mem.settle(m.cycle());
    let reading = probe::receive(&mut m.mem, &s.probe, settled, cfg.timer_granularity_cycles);
    m.advance_clock(reading.end_cycle);
    run.report.inferred_secret = reading.inferred.and_then(|v| u8::try_from(v).ok());
    run.report.attack_success = Some(run.report.inferred_secret == Some(s.secret.value));
    run.reading = Some(reading);
    run
}

/// All bundled attack scenarios built with default options.
pub fn bundled_scenarios() -> Vec<Scenario> {
    BUNDLED
        .iter()
        .map(|n| build(n, &GadgetOptions::default()).expect("bundled scenario builds"))
        .collect()
}
