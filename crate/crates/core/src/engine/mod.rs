//! The out-of-order engine: predicted-path fetch, reorder buffer, superscalar
//! issue, branch resolution with squash, and in-order retirement.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::arch::{ArchState, Fault};
use crate::colors::SpecColors;
use crate::config::SimConfig;
use crate::isa::semantics::truncate;
use crate::isa::{alu, compare_flags, decode, Cond, MicroOp, Program, Reg, UopKind, INSTR_BYTES};
use crate::lsu::{ArcticWhitelist, ForwardDecision, LoadQuery, StoreBuffer};
use crate::memory::{line_of, AccessKind, AccessOutcome, MemorySystem, TlbVerdict};
use crate::predictors::{Direction, PredictorState};
use crate::trace::{TraceEvent, TraceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Waiting,
    Executing { done: u64 },
    Done,
}

#[derive(Debug, Clone)]
pub struct RobEntry {
    pub seq: u64,
    pub uop: MicroOp,
    producers: [Option<u64>; 3],
    pub status: Status,
    pub result: u64,
    pub colors: SpecColors,
    /// Next pc the front end followed; `None` when fetch stalled on us.
    predicted_next: Option<u64>,
    actual_next: u64,
    taken: bool,
    /// This branch's tag is live in younger entries' colors.
    tagged: bool,
    rsb_checkpoint: Option<VecDeque<u64>>,
    store_seq: u64,
    pub addr: Option<u64>,
    pub forwarded_from: Option<u64>,
    policy_blocked: bool,
    fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FetchState {
    Running,
    /// An indirect jump with no usable prediction is in flight.
    WaitIndirect,
    OutOfRange,
    Stopped,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub core_cycles: u64,
    pub retired_instructions: u64,
    pub retired_uops: u64,
    pub squash_count: u64,
    pub squashed_uops: u64,
    pub forward_count: u64,
    pub resteer_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("cycle limit of {0} exceeded")]
    Timeout(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Halted,
    Faulted(Fault),
}

#[derive(Debug, Clone)]
pub struct Machine {
    cfg: SimConfig,
    program: Program,
    decoded: Vec<Vec<MicroOp>>,
    pub mem: MemorySystem,
    pub pred: PredictorState,
    pub whitelist: ArcticWhitelist,
    regs: [u64; Reg::TOTAL],
    rename: [Option<u64>; Reg::TOTAL],
    rob: VecDeque<RobEntry>,
    sb: StoreBuffer,
    live: SpecColors,
    fetch_pc: u64,
    fetch: FetchState,
    next_seq: u64,
    cycle: u64,
    stats: Stats,
    trace: Option<Vec<TraceEvent>>,
    fault: Option<Fault>,
    halted: bool,
}

impl Machine {
    pub fn new(program: &Program, cfg: &SimConfig) -> Machine {
        Machine::with_whitelist(program, cfg, ArcticWhitelist::default())
    }

    pub fn with_whitelist(
        program: &Program,
        cfg: &SimConfig,
        whitelist: ArcticWhitelist,
    ) -> Machine {
        Machine {
            cfg: cfg.clone(),
            decoded: program.instructions.iter().map(decode).collect(),
            program: program.clone(),
            mem: MemorySystem::new(program, cfg),
            pred: PredictorState::new(cfg.bht_size, cfg.rsb_depth),
            whitelist,
            regs: [0; Reg::TOTAL],
            rename: [None; Reg::TOTAL],
            rob: VecDeque::with_capacity(cfg.rob_capacity),
            sb: StoreBuffer::new(cfg.sb_capacity),
            live: SpecColors::new(),
            fetch_pc: program.code_base,
            fetch: FetchState::Stopped,
            next_seq: 0,
            cycle: 0,
            stats: Stats::default(),
            trace: None,
            fault: None,
            halted: true,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Moves the clock forward without stepping the core (receiver time).
    pub fn advance_clock(&mut self, to: u64) {
        self.cycle = self.cycle.max(to);
        self.mem.tick(self.cycle);
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn rob(&self) -> &VecDeque<RobEntry> {
        &self.rob
    }

    pub fn store_buffer(&self) -> &StoreBuffer {
        &self.sb
    }

    pub fn reg(&self, r: Reg) -> u64 {
        self.regs[r.index()]
    }

    /// Sets an architectural register; only valid between runs.
    pub fn set_reg(&mut self, r: Reg, v: u64) {
        debug_assert!(self.rob.is_empty());
        if !r.is_zero() {
            self.regs[r.index()] = v;
        }
    }

    pub fn is_idle(&self) -> bool {
        self.rob.is_empty() && self.sb.is_empty()
    }

    pub fn arch_state(&self) -> ArchState {
        let mut regs = [0; Reg::ARCH_COUNT];
        regs.copy_from_slice(&self.regs[..Reg::ARCH_COUNT]);
        ArchState {
            regs,
            flags: self.regs[Reg::FLAGS.index()],
            memory: self.mem.backing.clone(),
        }
    }

    fn emit(&mut self, kind: TraceKind, seq: u64, pc: u64, detail: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent {
                cycle: self.cycle,
                kind,
                seq,
                pc,
                detail: detail(),
            });
        }
    }

    /// Runs from `entry` until `halt` retires (or a fault) and the store
    /// buffer has drained. The cycle limit applies to this call.
    pub fn run_from(&mut self, entry: u64) -> Result<Completion, RunError> {
        assert!(self.is_idle(), "run_from needs an idle machine");
        self.fetch_pc = entry;
        self.fetch = FetchState::Running;
        self.halted = false;
        self.fault = None;
        let start = self.stats.core_cycles;
        while !self.halted || !self.sb.is_empty() {
            if self.stats.core_cycles - start >= self.cfg.cycle_limit {
                return Err(RunError::Timeout(self.cfg.cycle_limit));
            }
            self.step();
        }
        Ok(match self.fault {
            Some(f) => Completion::Faulted(f),
            None => Completion::Halted,
        })
    }

    /// Advances one cycle.
    pub fn step(&mut self) {
        self.cycle += 1;
        self.stats.core_cycles += 1;
        let now = self.cycle;
        for fill in self.mem.tick(now) {
            self.emit(TraceKind::Fill, fill.seq, 0, || {
                format!(
                    "line {:#x}{}",
                    fill.line * crate::memory::LINE_BYTES,
                    if fill.installed { "" } else { " (flushed)" }
                )
            });
        }
        self.complete(now);
        self.retire();
        self.write_back();
        self.issue(now);
        self.fetch_dispatch();
    }

    fn find(&self, seq: u64) -> Option<usize> {
        self.rob.binary_search_by_key(&seq, |e| e.seq).ok()
    }

    fn read_src(&self, reg: Reg, producer: Option<u64>) -> Option<u64> {
        if reg.is_zero() {
            return Some(0);
        }
        match producer.and_then(|p| self.find(p)) {
            None => Some(self.regs[reg.index()]),
            Some(i) => (self.rob[i].status == Status::Done).then_some(self.rob[i].result),
        }
    }

    fn complete(&mut self, now: u64) {
        let mut i = 0;
        while i < self.rob.len() {
            if let Status::Executing { done } = self.rob[i].status {
                if done <= now {
                    self.rob[i].status = Status::Done;
                    let (seq, pc, result) = (
                        self.rob[i].seq,
                        self.rob[i].uop.parent_pc,
                        self.rob[i].result,
                    );
                    let name = self.rob[i].uop.kind.name();
                    self.emit(TraceKind::Execute, seq, pc, || {
                        format!("{name} -> {result:#x}")
                    });
                    if self.rob[i].uop.kind.is_branch() {
                        self.resolve(i);
                    }
                }
            }
            i += 1;
        }
    }

    fn resolve(&mut self, i: usize) {
        let e = &self.rob[i];
        let (seq, pc, actual) = (e.seq, e.uop.parent_pc, e.actual_next);
        let is_jr = e.uop.kind == UopKind::JrIndirect;
        match e.predicted_next {
            None => {
                self.fetch_pc = actual;
                self.fetch = FetchState::Running;
                self.stats.resteer_count += 1;
                self.emit(TraceKind::Resteer, seq, pc, || {
                    format!("unpredicted target {actual:#x}")
                });
            }
            Some(p) if p == actual => {
                if e.tagged {
                    self.clear_tag(seq);
                }
            }
            Some(p) => {
                if is_jr {
                    self.stats.resteer_count += 1;
                    let live = self.live.len() - 1;
                    self.emit(TraceKind::Resteer, seq, pc, || {
                        format!(
                            "predicted {p:#x}, resteered to {actual:#x}; {live} older branch(es) unresolved"
                        )
                    });
                }
                self.squash_after(i, actual);
            }
        }
    }

    fn clear_tag(&mut self, tag: u64) {
        self.live.remove(tag);
        for e in &mut self.rob {
            e.colors.remove(tag);
        }
        self.sb.clear_color(tag);
    }

    /// Squashes everything younger than entry `i` and restarts fetch at
    /// `new_pc`.
    fn squash_after(&mut self, i: usize, new_pc: u64) {
        let bseq = self.rob[i].seq;
        while self.rob.len() > i + 1 {
            let e = self.rob.pop_back().unwrap();
            debug_assert!(e.colors.contains(bseq));
            self.stats.squashed_uops += 1;
            self.emit(TraceKind::Squash, e.seq, e.uop.parent_pc, || {
                format!("by branch seq {bseq}")
            });
        }
        let survivors: SpecColors = self.live.iter().filter(|&t| t < bseq).collect();
        self.live = survivors;
        self.sb.squash_from(bseq + 1);
        self.rebuild_rename();
        if let Some(cp) = self.rob[i].rsb_checkpoint.take() {
            self.pred.rsb_restore(cp);
        }
        self.rob[i].tagged = false;
        self.fetch_pc = new_pc;
        self.fetch = FetchState::Running;
        self.stats.squash_count += 1;
    }

    fn rebuild_rename(&mut self) {
        self.rename = [None; Reg::TOTAL];
        for e in &self.rob {
            if let Some(d) = e.uop.dst {
                self.rename[d.index()] = Some(e.seq);
            }
        }
    }

    fn raise(&mut self, f: Fault) {
        self.emit(TraceKind::Fault, 0, 0, || f.to_string());
        while let Some(e) = self.rob.pop_back() {
            self.stats.squashed_uops += 1;
            self.emit(TraceKind::Squash, e.seq, e.uop.parent_pc, || {
                "by fault".into()
            });
        }
        self.sb.squash_from(0);
        self.live = SpecColors::new();
        self.rename = [None; Reg::TOTAL];
        self.fetch = FetchState::Stopped;
        self.fault = Some(f);
        self.halted = true;
    }

    fn retire(&mut self) {
        for _ in 0..self.cfg.retire_width {
            let Some(head) = self.rob.front() else { break };
            if head.status != Status::Done || !head.colors.is_empty() {
                break;
            }
            let e = self.rob.pop_front().unwrap();
            if let Some(f) = e.fault {
                self.raise(f);
                return;
            }
            if let Some(d) = e.uop.dst {
                self.regs[d.index()] = e.result;
                if self.rename[d.index()] == Some(e.seq) {
                    self.rename[d.index()] = None;
                }
            }
            let pc = e.uop.parent_pc;
            match e.uop.kind {
                UopKind::Std => self.sb.seniorize(e.store_seq),
                UopKind::BrCond(c) if c != Cond::Always => {
                    self.pred.train_branch(pc, Direction::from_taken(e.taken))
                }
                UopKind::Lda if e.forwarded_from.is_some() || e.policy_blocked => {
                    self.whitelist.learn(pc)
                }
                _ => {}
            }
            self.stats.retired_uops += 1;
            if e.uop.last {
                self.stats.retired_instructions += 1;
            }
            let name = e.uop.kind.name();
            self.emit(TraceKind::Retire, e.seq, pc, || name.into());
            if e.uop.kind == UopKind::Halt {
                self.halted = true;
                self.fetch = FetchState::Stopped;
                return;
            }
        }
        if self.rob.is_empty() && self.fetch == FetchState::OutOfRange {
            self.raise(Fault::Fetch { pc: self.fetch_pc });
        }
    }

    fn write_back(&mut self) {
        if let Some(e) = self.sb.pop_senior() {
            let addr = e.addr.expect("senior stores have an address");
            let data = e.data.expect("senior stores have data");
            self.mem.write_back(addr, e.size, data);
        }
    }

    fn issue(&mut self, now: u64) {
        let mut issued = 0;
        let (mut loads, mut stds, mut branches) = (0, 0, 0);
        let mut older_done = true;
        for i in 0..self.rob.len() {
            if issued >= self.cfg.issue_width {
                break;
            }
            let kind = self.rob[i].uop.kind;
            match self.rob[i].status {
                Status::Done => continue,
                Status::Executing { .. } => {
                    older_done = false;
                    if kind == UopKind::Fence {
                        break;
                    }
                    continue;
                }
                Status::Waiting => {}
            }
            if kind == UopKind::Fence {
                if older_done {
                    self.start(i, now + 1);
                }
                break;
            }
            older_done = false;
            let capped = match kind {
                UopKind::Lda => loads >= 2,
                UopKind::Std => stds >= 1,
                k if k.is_branch() => branches >= 2,
                _ => false,
            };
            if capped {
                continue;
            }
            let e = &self.rob[i];
            let mut vals = [None; 3];
            let mut ready = true;
            for (k, val) in vals.iter_mut().enumerate() {
                if let Some(r) = e.uop.srcs[k] {
                    *val = self.read_src(r, e.producers[k]);
                    ready &= val.is_some();
                }
            }
            if !ready {
                continue;
            }
            if self.execute(i, vals, now) {
                issued += 1;
                match kind {
                    UopKind::Lda => loads += 1,
                    UopKind::Std => stds += 1,
                    k if k.is_branch() => branches += 1,
                    _ => {}
                }
            }
        }
    }

    fn start(&mut self, i: usize, done: u64) {
        let e = &mut self.rob[i];
        e.status = Status::Executing { done };
        let (seq, pc, name) = (e.seq, e.uop.parent_pc, e.uop.kind.name());
        self.emit(TraceKind::Issue, seq, pc, || name.into());
    }

    /// Begins executing entry `i`; false if it must retry later.
    fn execute(&mut self, i: usize, v: [Option<u64>; 3], now: u64) -> bool {
        let uop = self.rob[i].uop.clone();
        let imm = uop.imm as u64;
        let pc = uop.parent_pc;
        let seq = self.rob[i].seq;
        let done = now + 1;
        match uop.kind {
            UopKind::Alu(op) => {
                self.rob[i].result = alu(op, v[0].unwrap_or(0), v[1].unwrap_or(imm));
            }
            UopKind::Cmp => {
                self.rob[i].result = compare_flags(v[0].unwrap_or(0), v[1].unwrap_or(imm));
            }
            UopKind::Csel(c) => {
                let flags = v[2].unwrap_or(0);
                self.rob[i].result = if c.holds(flags) {
                    v[0].unwrap_or(imm)
                } else {
                    v[1].unwrap_or(0)
                };
            }
            UopKind::BrCond(c) => {
                let taken = c == Cond::Always || c.holds(v[0].unwrap_or(0));
                let e = &mut self.rob[i];
                e.taken = taken;
                e.actual_next = if taken { imm } else { pc + INSTR_BYTES };
            }
            UopKind::JrIndirect => {
                let e = &mut self.rob[i];
                e.actual_next = v[0].unwrap_or(0);
                e.taken = true;
                if uop.is_return {
                    e.result = v[1].unwrap_or(0).wrapping_add(imm);
                }
            }
            UopKind::Sta | UopKind::Call => {
                let base = v[0].unwrap_or(0);
                let addr = if uop.kind == UopKind::Call {
                    base.wrapping_sub(8)
                } else {
                    base.wrapping_add(imm)
                };
                let verdict = self.mem.tlb_check(AccessKind::Write, addr, uop.size);
                self.sb.resolve_addr(seq, addr, verdict);
                let e = &mut self.rob[i];
                e.addr = Some(addr);
                if uop.kind == UopKind::Call {
                    e.result = addr;
                }
                if verdict != TlbVerdict::Ok {
                    e.fault = Some(Fault::Write { pc, addr });
                }
            }
            UopKind::Std => {
                let data = v[0].unwrap_or(imm);
                let store_seq = self.rob[i].store_seq;
                self.sb.resolve_data(store_seq, data);
            }
            UopKind::Fence | UopKind::Halt => {}
            UopKind::Lda => return self.execute_load(i, v[0].unwrap_or(0), now),
        }
        self.start(i, done);
        true
    }

    fn execute_load(&mut self, i: usize, base: u64, now: u64) -> bool {
        let uop = self.rob[i].uop.clone();
        let seq = self.rob[i].seq;
        let pc = uop.parent_pc;
        let addr = base.wrapping_add(uop.imm as u64);
        if self.mem.tlb_check(AccessKind::Read, addr, uop.size) != TlbVerdict::Ok {
            let e = &mut self.rob[i];
            e.addr = Some(addr);
            e.result = 0;
            e.fault = Some(Fault::Read { pc, addr });
            self.start(i, now + 1);
            return true;
        }
        let query = LoadQuery {
            seq,
            pc,
            addr,
            size: uop.size,
            forwardable: uop.forwardable,
            colors: &self.rob[i].colors,
        };
        let decision = self.sb.forward_decision(
            query,
            self.cfg.forwarding_policy,
            self.cfg.tlb_enforcement,
            &self.whitelist,
        );
        let l1 = self.mem.l1_latency();
        let done = match decision {
            ForwardDecision::Wait { policy_blocked } => {
                self.rob[i].policy_blocked |= policy_blocked;
                return false;
            }
            ForwardDecision::Forward { value, store_seq } => {
                self.rob[i].result = value;
                self.rob[i].forwarded_from = Some(store_seq);
                self.stats.forward_count += 1;
                self.emit(TraceKind::Forward, seq, pc, || {
                    format!("{addr:#x} <- store seq {store_seq}, value {value:#x}")
                });
                now + l1
            }
            ForwardDecision::ForwardZero { store_seq } => {
                self.rob[i].result = 0;
                self.rob[i].forwarded_from = Some(store_seq);
                self.stats.forward_count += 1;
                self.emit(TraceKind::Forward, seq, pc, || {
                    format!("{addr:#x} <- store seq {store_seq}, zero (write fault)")
                });
                now + l1
            }
            ForwardDecision::GoToMemory => {
                let colors = self.rob[i].colors.clone();
                match self.mem.load_access(addr, now, seq, &colors) {
                    AccessOutcome::MshrFull => return false,
                    AccessOutcome::Hit { ready_cycle } => ready_cycle,
                    AccessOutcome::Miss {
                        ready_cycle,
                        allocated,
                    } => {
                        if allocated {
                            self.emit(TraceKind::MshrAlloc, seq, pc, || {
                                format!("line {:#x}", line_of(addr) * crate::memory::LINE_BYTES)
                            });
                        }
                        ready_cycle
                    }
                }
            }
        };
        if !matches!(
            decision,
            ForwardDecision::Forward { .. } | ForwardDecision::ForwardZero { .. }
        ) {
            self.rob[i].result = truncate(self.mem.backing.read(addr, uop.size), uop.size);
        }
        self.rob[i].addr = Some(addr);
        self.start(i, done);
        true
    }

    fn fetch_dispatch(&mut self) {
        let mut budget = self.cfg.issue_width;
        while budget > 0 && self.fetch == FetchState::Running {
            let pc = self.fetch_pc;
            let Some(idx) = self.program.index_of(pc) else {
                self.fetch = FetchState::OutOfRange;
                break;
            };
            let n = self.decoded[idx].len();
            if n > budget || self.rob.len() + n > self.cfg.rob_capacity {
                break;
            }
            if self.decoded[idx]
                .iter()
                .any(|u| u.kind == UopKind::Sta || u.kind == UopKind::Call)
                && self.sb.is_full()
            {
                break;
            }
            budget -= n;
            let first_seq = self.next_seq;
            self.emit(TraceKind::Fetch, first_seq, pc, String::new);
            let mut next_pc = pc + INSTR_BYTES;
            let mut store_seq = 0;
            for k in 0..n {
                let uop = self.decoded[idx][k].clone();
                let seq = self.next_seq;
                self.next_seq += 1;
                let mut producers = [None; 3];
                for (p, r) in producers.iter_mut().zip(uop.srcs) {
                    *p = r.and_then(|r| self.rename[r.index()]);
                }
                let mut e = RobEntry {
                    seq,
                    uop: uop.clone(),
                    producers,
                    status: Status::Waiting,
                    result: 0,
                    colors: self.live.clone(),
                    predicted_next: None,
                    actual_next: 0,
                    taken: false,
                    tagged: false,
                    rsb_checkpoint: None,
                    store_seq: 0,
                    addr: None,
                    forwarded_from: None,
                    policy_blocked: false,
                    fault: None,
                };
                match uop.kind {
                    UopKind::Sta | UopKind::Call => {
                        self.sb
                            .insert(seq, pc, uop.size, uop.forwardable, e.colors.clone())
                            .expect("store buffer space checked before dispatch");
                        store_seq = seq;
                        if uop.kind == UopKind::Call {
                            self.pred.rsb_push(pc + INSTR_BYTES);
                            next_pc = uop.imm as u64;
                        }
                    }
                    UopKind::Std => e.store_seq = store_seq,
                    UopKind::BrCond(Cond::Always) => {
                        next_pc = uop.imm as u64;
                        e.predicted_next = Some(next_pc);
                    }
                    UopKind::BrCond(_) => {
                        let target = uop.imm as u64;
                        next_pc = match self.pred.predict_branch(pc) {
                            Direction::Taken => target,
                            Direction::NotTaken => pc + INSTR_BYTES,
                        };
                        e.predicted_next = Some(next_pc);
                        e.tagged = true;
                    }
                    UopKind::JrIndirect => {
                        let predicted = if uop.is_return {
                            self.pred.rsb_pop()
                        } else {
                            None
                        };
                        match predicted {
                            Some(t) => {
                                next_pc = t;
                                e.predicted_next = Some(t);
                                e.tagged = true;
                            }
                            None => self.fetch = FetchState::WaitIndirect,
                        }
                    }
                    UopKind::Halt => self.fetch = FetchState::Stopped,
                    _ => {}
                }
                if e.tagged {
                    e.rsb_checkpoint = Some(self.pred.rsb_snapshot());
                }
                if let Some(d) = uop.dst {
                    self.rename[d.index()] = Some(seq);
                }
                let name = uop.kind.name();
                self.emit(TraceKind::Dispatch, seq, pc, || name.into());
                let tagged = e.tagged;
                self.rob.push_back(e);
                if tagged {
                    self.live.insert(seq);
                }
            }
            self.fetch_pc = next_pc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    fn run(src: &str, cfg: &SimConfig) -> Machine {
        let p = assemble(src).unwrap();
        let mut m = Machine::new(&p, cfg);
        m.set_reg(Reg::SP, 0x9000);
        assert_eq!(m.run_from(p.code_base).unwrap(), Completion::Halted);
        m
    }

    #[test]
    fn straight_line_alu() {
        let src = (1..=10)
            .map(|i| format!("addi r{i}, r0, {i}"))
            .collect::<Vec<_>>()
            .join("\n")
            + "\nhalt";
        let cfg = SimConfig::default();
        let a = run(&src, &cfg);
        assert_eq!(a.stats().retired_instructions, 11);
        assert_eq!(a.reg(Reg::new(7).unwrap()), 7);
        let b = run(&src, &cfg);
        assert_eq!(a.stats(), b.stats());
    }

    #[test]
    fn store_forwarding_and_write_back() {
        let src = "li r1, 0x1000\nli r2, 0xDEAD\nst.8 r2, [r1+0]\nld.8 r3, [r1+0]\nhalt\n.zero 0x1000 rw 64";
        let m = run(src, &SimConfig::default());
        assert_eq!(m.reg(Reg::new(3).unwrap()), 0xDEAD);
        assert_eq!(m.stats().forward_count, 1);
        assert_eq!(m.mem.backing.read(0x1000, 8), 0xDEAD);
        assert!(m.mem.is_resident(0x1000));
    }

    #[test]
    fn mispredicted_branch_squashes() {
        let src = "\
    li r1, 1
    cmpi r1, 1
    je skip
    li r2, 99
.label skip
    halt";
        let cfg = SimConfig {
            bht_size: 16,
            ..SimConfig::default()
        };
        let m = run(src, &cfg);
        assert_eq!(m.reg(Reg::new(2).unwrap()), 0);
        assert_eq!(m.stats().squash_count, 1);
        assert_eq!(m.pred.counter(8), 2);
    }

    #[test]
    fn call_return_uses_rsb() {
        let src = "\
    call f
    halt
.label f
    li r1, 5
    ret
.zero 0x8000 rw 0x1000";
        let mut cfg = SimConfig::default();
        let m = run(src, &cfg);
        assert_eq!(m.reg(Reg::new(1).unwrap()), 5);
        assert_eq!(m.stats().resteer_count, 0);
        assert_eq!(m.reg(Reg::SP), 0x9000);
        cfg.forwarding_policy = crate::config::ForwardingPolicy::SlothbearStores;
        let m = run(src, &cfg);
        assert_eq!(m.reg(Reg::new(1).unwrap()), 5);
    }

    #[test]
    fn write_fault_at_retire() {
        let p = assemble("li r1, 0x5000\nst.8 r1, [r1+0]\nhalt\n.data 0x5000 ro 0").unwrap();
        let mut m = Machine::new(&p, &SimConfig::default());
        assert_eq!(
            m.run_from(0).unwrap(),
            Completion::Faulted(Fault::Write {
                pc: 4,
                addr: 0x5000
            })
        );
        assert_eq!(m.mem.backing.read(0x5000, 8), 0);
    }

    #[test]
    fn timeout_reported() {
        let p = assemble(".label l\njmp l").unwrap();
        let cfg = SimConfig {
            cycle_limit: 100,
            ..SimConfig::default()
        };
        let mut m = Machine::new(&p, &cfg);
        assert_eq!(m.run_from(0), Err(RunError::Timeout(100)));
    }

    #[test]
    fn full_rob_blocks_dispatch() {
        let cfg = SimConfig {
            rob_capacity: 4,
            ..SimConfig::default()
        };
        let p =
            assemble("li r1, 0x1000\nld.8 r2, [r1+0]\nnop\nnop\nnop\nnop\nhalt\n.zero 0x1000 rw 8")
                .unwrap();
        let mut m = Machine::new(&p, &cfg);
        m.fetch_pc = 0;
        m.fetch = FetchState::Running;
        m.halted = false;
        for _ in 0..20 {
            m.step();
            assert!(m.rob.len() <= 4);
        }
        assert_eq!(m.rob.len(), 4);
        let before = m.next_seq;
        m.step();
        assert_eq!(m.next_seq, before);
    }
}
