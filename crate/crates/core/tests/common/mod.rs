//! Random fault-free program generator shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specsim_core::arch::ArchState;
use specsim_core::config::{ForwardingPolicy, SimConfig};
use specsim_core::engine::{Completion, Machine};
use specsim_core::isa::{assemble, Program, Reg};
use specsim_core::reference::{Interpreter, Stop};

pub const DATA_BASE: u64 = 0x1000;
pub const DATA_LEN: u64 = 0x1000;
pub const STACK_TOP: u64 = 0x9000;
const WORK: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const ALU: [&str; 9] = ["add", "sub", "and", "or", "xor", "shl", "shr", "sar", "mul"];
const CONDS: [&str; 10] = ["e", "ne", "b", "be", "a", "ae", "l", "le", "g", "ge"];
const WIDTHS: [u8; 4] = [1, 2, 4, 8];

struct Gen {
    rng: ChaCha8Rng,
    labels: usize,
}

impl Gen {
    fn reg(&mut self) -> String {
        format!("r{}", WORK.choose(&mut self.rng).unwrap())
    }

    fn mark(&mut self) -> &'static str {
        if self.rng.gen_bool(0.4) {
            "!"
        } else {
            ""
        }
    }

    /// Memory operand inside the data region; r20 holds DATA_BASE.
    fn mem(&mut self, size: u8, out: &mut Vec<String>) -> String {
        if self.rng.gen_bool(0.3) {
            // register-computed address, resolved late
            let r = self.reg();
            out.push(format!("andi r11, {r}, 0x1f8"));
            out.push("add r11, r11, r20".into());
            format!(
                "[r11+{}]",
                self.rng.gen_range(0..8u64) / u64::from(size) * u64::from(size)
            )
        } else {
            // a few hot slots so stores and loads alias often
            let slot = self.rng.gen_range(0..12u64) * 8;
            let skew = if self.rng.gen_bool(0.15) {
                self.rng.gen_range(0..8u64)
            } else {
                0
            };
            format!("[r20+{}]", (slot + skew).min(DATA_LEN - 8))
        }
    }

    fn simple(&mut self, out: &mut Vec<String>, allow_mem: bool) {
        let choice = self.rng.gen_range(0..100);
        let (a, b, c) = (self.reg(), self.reg(), self.reg());
        match choice {
            0..=19 => {
                let op = ALU.choose(&mut self.rng).unwrap();
                out.push(format!("{op} {a}, {b}, {c}"));
            }
            20..=31 => {
                let op = ALU.choose(&mut self.rng).unwrap();
                let imm: i64 = self.rng.gen_range(-64..64);
                out.push(format!("{op}i {a}, {b}, {imm}"));
            }
            32..=36 => {
                let imm: i64 = self.rng.gen();
                out.push(format!("li {a}, {imm}"));
            }
            37..=39 => out.push(format!("mov {a}, {b}")),
            40..=44 => {
                if self.rng.gen_bool(0.5) {
                    out.push(format!("cmp {a}, {b}"));
                } else {
                    out.push(format!("cmpi {a}, {}", self.rng.gen_range(-8..8)));
                }
            }
            45..=48 => {
                let cc = CONDS.choose(&mut self.rng).unwrap();
                if self.rng.gen_bool(0.5) {
                    out.push(format!("csel.{cc} {a}, {b}, {c}"));
                } else {
                    out.push(format!("csetm.{cc} {a}"));
                }
            }
            49..=72 if allow_mem => {
                let size = *WIDTHS.choose(&mut self.rng).unwrap();
                let m = self.mark();
                let mem = self.mem(size, out);
                out.push(format!("ld.{size}{m} {a}, {mem}"));
            }
            73..=94 if allow_mem => {
                let size = *WIDTHS.choose(&mut self.rng).unwrap();
                let m = self.mark();
                let mem = self.mem(size, out);
                out.push(format!("st.{size}{m} {a}, {mem}"));
            }
            95..=96 => out.push("fence".into()),
            _ => out.push("nop".into()),
        }
    }

    fn label(&mut self) -> String {
        self.labels += 1;
        format!("L{}", self.labels)
    }
}

/// A random program of at most `max_len` instructions that terminates
/// without faulting. Entry point is the code base (0).
pub fn random_program(seed: u64, max_len: usize) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        labels: 0,
    };
    let n_funcs = g.rng.gen_range(0..3usize);
    let funcs: Vec<String> = (0..n_funcs).map(|i| format!("f{i}")).collect();
    let mut body: Vec<String> = vec![format!("li r20, {DATA_BASE}")];
    for r in WORK {
        body.push(format!("li r{r}, {}", g.rng.gen_range(-40i64..4000)));
    }
    // forward-branch targets still to be placed: (label, remaining distance)
    let mut pending: Vec<(String, usize)> = Vec::new();
    let budget = max_len.saturating_sub(12 + n_funcs * 8).max(8);
    let target_len = g.rng.gen_range(budget / 3..=budget);
    while body.len() < target_len {
        let mut chunk = Vec::new();
        match g.rng.gen_range(0..100) {
            0..=9 => {
                let cc = CONDS.choose(&mut g.rng).unwrap();
                let l = g.label();
                chunk.push(format!("j{cc} {l}"));
                pending.push((l, g.rng.gen_range(1..12)));
            }
            10..=11 => {
                let l = g.label();
                chunk.push(format!("jmp {l}"));
                pending.push((l, g.rng.gen_range(1..6)));
            }
            12..=13 => {
                let l = g.label();
                chunk.push(format!("la r13, {l}"));
                chunk.push("jr r13".into());
                pending.push((l, g.rng.gen_range(1..6)));
            }
            14..=18 if !funcs.is_empty() => {
                let f = funcs.choose(&mut g.rng).unwrap();
                chunk.push(format!("call {f}"));
            }
            19..=21 => {
                // bounded loop on r12
                let l = g.label();
                let trips = g.rng.gen_range(1..6);
                chunk.push(format!("li r12, {trips}"));
                chunk.push(format!(".label {l}"));
                for _ in 0..g.rng.gen_range(1..5) {
                    g.simple(&mut chunk, true);
                }
                chunk.push("subi r12, r12, 1".into());
                chunk.push("cmpi r12, 0".into());
                chunk.push(format!("jne {l}"));
            }
            _ => g.simple(&mut chunk, true),
        }
        let n = chunk.iter().filter(|l| !l.starts_with('.')).count();
        body.extend(chunk);
        for p in pending.iter_mut() {
            p.1 = p.1.saturating_sub(n);
        }
        // labels go between chunks so no branch lands inside a loop body
        while let Some(i) = pending.iter().position(|p| p.1 == 0) {
            let (l, _) = pending.remove(i);
            body.push(format!(".label {l}"));
        }
    }
    for (l, _) in pending {
        body.push(format!(".label {l}"));
    }
    body.push("halt".into());
    for f in &funcs {
        body.push(format!(".label {f}"));
        for _ in 0..g.rng.gen_range(1..6) {
            g.simple(&mut body, true);
        }
        body.push("ret".into());
    }
    body.push(format!(".zero {DATA_BASE:#x} rw {DATA_LEN}"));
    body.push(format!(".zero {:#x} rw 0x1000", STACK_TOP - 0x1000));
    body.join("\n")
}

/// Reference run: final state, or `None` if the program faulted (which the
/// generator should never produce).
pub fn reference_state(p: &Program) -> Option<ArchState> {
    let mut it = Interpreter::new(p);
    it.regs[Reg::SP.index()] = STACK_TOP;
    match it.run_from(p.code_base, 100_000) {
        Stop::Halted => Some(it.state()),
        _ => None,
    }
}

pub fn machine_state(p: &Program, cfg: &SimConfig) -> Result<ArchState, String> {
    let mut m = Machine::new(p, cfg);
    m.set_reg(Reg::SP, STACK_TOP);
    match m.run_from(p.code_base) {
        Ok(Completion::Halted) => Ok(m.arch_state()),
        Ok(Completion::Faulted(f)) => Err(format!("fault: {f}")),
        Err(e) => Err(e.to_string()),
    }
}

pub fn configs() -> Vec<SimConfig> {
    ForwardingPolicy::ALL
        .into_iter()
        .map(|p| SimConfig::default().with_policy(p))
        .collect()
}

/// Checks one seed against every policy; returns a description of the first
/// mismatch.
pub fn check_seed(seed: u64, max_len: usize) -> Result<(), String> {
    let src = random_program(seed, max_len);
    let p = assemble(&src).map_err(|e| format!("seed {seed}: {e}\n{src}"))?;
    if p.instructions.len() > max_len {
        return Err(format!(
            "seed {seed}: {} instructions",
            p.instructions.len()
        ));
    }
    let want = reference_state(&p).ok_or_else(|| format!("seed {seed}: reference faulted"))?;
    for cfg in configs() {
        let got = machine_state(&p, &cfg)
            .map_err(|e| format!("seed {seed} policy {}: {e}", cfg.forwarding_policy))?;
        if let Some(d) = want.diff(&got) {
            return Err(format!(
                "seed {seed} policy {}: {d}\n{src}",
                cfg.forwarding_policy
            ));
        }
    }
    Ok(())
}
