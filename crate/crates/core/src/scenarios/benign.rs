//! A register-spilling loop with data-dependent branches, used to price the
//! forwarding policies.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{RunOptions, ScenarioError, ScenarioRun, STACK_TOP};
use crate::config::SimConfig;
use crate::engine::{Completion, Machine, RunError};
use crate::isa::{assemble, Program};
use crate::lsu::ArcticWhitelist;
use crate::reference::{Interpreter, Stop};
use crate::report::RunReport;

pub const BENIGN: &str = "benign";

const ITERATIONS: u64 = 200;
const DATA: u64 = 0x20000;

const BODY: &str = "\
.org 0x10000
.label start
    li r20, 0x20000
    li r21, 0
    li r22, 0
.label loop
    andi r23, r21, 63
    shli r23, r23, 3
    add r23, r23, r20
    ld.8 r1, [r23+0]
    andi r2, r1, 1
    cmpi r2, 0
    je even
    call odd_work
    jmp next
.label even
    call even_work
.label next
    add r22, r22, r1
    addi r21, r21, 1
    cmpi r21, ITER
    jb loop
    halt
.label odd_work
    addi sp, sp, -32
    st.8M r21, [sp+0]
    st.8M r22, [sp+8]
    shli r21, r1, 3
    xor r22, r21, r1
    call leaf
    add r1, r1, r22
    ld.8M r21, [sp+0]
    ld.8M r22, [sp+8]
    addi sp, sp, 32
    ret
.label leaf
    addi sp, sp, -16
    st.8M r22, [sp+0]
    muli r22, r1, 7
    addi r1, r22, 3
    ld.8M r22, [sp+0]
    addi sp, sp, 16
    ret
.label even_work
    addi sp, sp, -16
    st.8M r21, [sp+0]
    shri r21, r1, 1
    add r1, r1, r21
    ld.8M r21, [sp+0]
    addi sp, sp, 16
    ret
.zero 0x8000 rw 0x1000
";

/// The benchmark; with `marked` every spill and reload carries the
/// forwarding mark.
pub fn benign_program(marked: bool) -> Program {
    let mut src = BODY
        .replace("ITER", &ITERATIONS.to_string())
        .replace(".8M", if marked { ".8!" } else { ".8" });
    // fixed pseudo-random data so the parity branch is hard to predict
    let mut x: u64 = 0x2545_f491_4f6c_dd1d;
    write!(src, ".quad {DATA:#x} rw").unwrap();
    for _ in 0..64 {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        write!(src, " {:#x}", x >> 40).unwrap();
    }
    src.push('\n');
    assemble(&src).expect("benchmark assembles")
}

/// Runs the marked benchmark once on a fresh machine.
pub fn run_benign(cfg: &SimConfig, opts: &RunOptions) -> ScenarioRun {
    let program = benign_program(true);
    let mut report = RunReport::new(BENIGN, "none", cfg);
    let mut m =
        Machine::with_whitelist(&program, cfg, ArcticWhitelist::new(opts.whitelist.clone()));
    if opts.trace {
        m.enable_trace();
    }
    m.set_reg(crate::isa::Reg::SP, STACK_TOP);
    let start = program.label("start").unwrap();
    let mut error = None;
    match m.run_from(start) {
        Ok(Completion::Halted) => {}
        Ok(Completion::Faulted(f)) => report.fault = Some(f.to_string()),
        Err(RunError::Timeout(n)) => {
            let e = ScenarioError::Timeout(n);
            report.error = Some(e.to_string());
            error = Some(e);
        }
    }
    report.record(&m);
    let mut divergence = None;
    if opts.check_arch {
        let mut r = Interpreter::new(&program);
        r.regs[crate::isa::Reg::SP.index()] = STACK_TOP;
        if r.run_from(start, 10_000_000) != Stop::Halted {
            divergence = Some("reference did not halt".to_string());
        } else {
            divergence = m.arch_state().diff(&r.state());
        }
        report.arch_clean = Some(divergence.is_none());
    }
    ScenarioRun {
        report,
        reading: None,
        trace: if opts.trace {
            m.take_trace()
        } else {
            Vec::new()
        },
        learned: m.whitelist.learned().clone(),
        divergence,
        error,
    }
}

/// Whitelist learned by one cold run under `cfg`.
pub fn learn_whitelist(cfg: &SimConfig) -> BTreeSet<u64> {
    run_benign(cfg, &RunOptions::default()).learned
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_halts_and_matches_reference() {
        let run = run_benign(
            &SimConfig::default(),
            &RunOptions {
                check_arch: true,
                ..RunOptions::default()
            },
        );
        assert_eq!(run.report.error, None);
        assert_eq!(run.report.arch_clean, Some(true), "{:?}", run.divergence);
        assert!(run.report.forward_count > 0);
    }
}
