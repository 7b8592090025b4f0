//! Toy load/store ISA: instruction model, textual assembler, pretty-printer
//! and micro-op decoder.
//!
//! The assembly dialect is documented in `docs/isa.md`.

mod asm;
mod decode;
mod print;
pub(crate) mod semantics;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use asm::{assemble, AsmError, AsmErrorKind};
pub use decode::{decode, AluOp, MicroOp, UopKind};
pub use semantics::{alu, compare_flags, Cond};

/// Size of one instruction slot in the code address space.
pub const INSTR_BYTES: u64 = 4;
pub const PAGE_SIZE: u64 = 4096;

/// Register identifier. `r0`..`r31` are architectural; `r0` reads as zero
/// and `r31` doubles as the stack pointer. Two extra ids are internal to the
/// micro-op layer: the return-target temporary and the flags register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);
    pub const SP: Reg = Reg(31);
    /// Holds the loaded return address between a return's LDA and JR.
    pub const NIP: Reg = Reg(32);
    pub const FLAGS: Reg = Reg(33);
    pub const ARCH_COUNT: usize = 32;
    pub const TOTAL: usize = 34;

    /// Architectural register `rN`; `None` if out of range.
    pub fn new(n: u8) -> Option<Reg> {
        (usize::from(n) < Reg::ARCH_COUNT).then_some(Reg(n))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl std::str::FromStr for Reg {
    type Err = String;

    /// Architectural names only: `r0`..`r31` or `sp`.
    fn from_str(s: &str) -> Result<Reg, String> {
        asm::parse_reg(s).ok_or_else(|| format!("`{s}` is not a register"))
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Reg::SP => f.write_str("sp"),
            Reg::NIP => f.write_str("nip"),
            Reg::FLAGS => f.write_str("flags"),
            Reg(n) => write!(f, "r{n}"),
        }
    }
}

/// Memory access width in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    B1,
    B2,
    B4,
    B8,
}

impl Width {
    pub fn bytes(self) -> u8 {
        match self {
            Width::B1 => 1,
            Width::B2 => 2,
            Width::B4 => 4,
            Width::B8 => 8,
        }
    }

    pub fn from_bytes(n: u64) -> Option<Width> {
        match n {
            1 => Some(Width::B1),
            2 => Some(Width::B2),
            4 => Some(Width::B4),
            8 => Some(Width::B8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mnemonic {
    /// Three-register ALU operation (`add rd, ra, rb`).
    AluRR(AluOp),
    /// Register-immediate ALU operation (`addi rd, ra, imm`).
    AluRI(AluOp),
    Li,
    /// Load the code address of a label.
    La,
    Mov,
    Nop,
    Cmp,
    Cmpi,
    Csel(Cond),
    /// `csetm rd` sets all ones when the condition holds, zero otherwise.
    Csetm(Cond),
    /// Conditional jump on flags. `Cond::Always` is the unconditional `jmp`.
    Jcc(Cond),
    Jr,
    Call,
    Ret,
    Load(Width),
    Store(Width),
    Fence,
    Halt,
}

/// Operand kinds a mnemonic's signature is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    Reg,
    Imm,
    Mem,
    Target,
}

impl Mnemonic {
    pub fn signature(self) -> &'static [OperandKind] {
        use OperandKind::*;
        match self {
            Mnemonic::AluRR(_) => &[Reg, Reg, Reg],
            Mnemonic::AluRI(_) => &[Reg, Reg, Imm],
            Mnemonic::Li => &[Reg, Imm],
            Mnemonic::La => &[Reg, Target],
            Mnemonic::Mov => &[Reg, Reg],
            Mnemonic::Cmp => &[Reg, Reg],
            Mnemonic::Cmpi => &[Reg, Imm],
            Mnemonic::Csel(_) => &[Reg, Reg, Reg],
            Mnemonic::Csetm(_) => &[Reg],
            Mnemonic::Jcc(_) | Mnemonic::Call => &[Target],
            Mnemonic::Jr => &[Reg],
            Mnemonic::Load(_) | Mnemonic::Store(_) => &[Reg, Mem],
            Mnemonic::Nop | Mnemonic::Ret | Mnemonic::Fence | Mnemonic::Halt => &[],
        }
    }

    pub fn is_memory(self) -> bool {
        matches!(self, Mnemonic::Load(_) | Mnemonic::Store(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Imm(i64),
    Mem {
        base: Reg,
        offset: i64,
    },
    /// Resolved code address.
    Target(u64),
}

impl Operand {
    pub fn kind(&self) -> OperandKind {
        match self {
            Operand::Reg(_) => OperandKind::Reg,
            Operand::Imm(_) => OperandKind::Imm,
            Operand::Mem { .. } => OperandKind::Mem,
            Operand::Target(_) => OperandKind::Target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub pc: u64,
    pub mnemonic: Mnemonic,
    pub operands: Vec<Operand>,
    /// Compiler mark: this memory access is a store-to-load forwarding
    /// candidate (`!` suffix in assembly).
    pub forwardable: bool,
}

impl Instruction {
    /// Checks the operand signature and annotation rules.
    pub fn validate(&self) -> Result<(), String> {
        if !self.pc.is_multiple_of(INSTR_BYTES) {
            return Err(format!("pc {:#x} is not 4-byte aligned", self.pc));
        }
        let sig = self.mnemonic.signature();
        if sig.len() != self.operands.len()
            || sig.iter().zip(&self.operands).any(|(k, o)| *k != o.kind())
        {
            return Err(format!(
                "operands {:?} do not match signature {:?}",
                self.operands, sig
            ));
        }
        if self.forwardable && !self.mnemonic.is_memory() {
            return Err("forwardable mark only applies to loads and stores".into());
        }
        Ok(())
    }

    pub fn reg(&self, i: usize) -> Reg {
        match self.operands[i] {
            Operand::Reg(r) => r,
            ref o => panic!("operand {i} is {o:?}, not a register"),
        }
    }

    pub fn imm(&self, i: usize) -> i64 {
        match self.operands[i] {
            Operand::Imm(v) => v,
            ref o => panic!("operand {i} is {o:?}, not an immediate"),
        }
    }

    pub fn target(&self, i: usize) -> u64 {
        match self.operands[i] {
            Operand::Target(t) => t,
            ref o => panic!("operand {i} is {o:?}, not a target"),
        }
    }

    pub fn mem(&self, i: usize) -> (Reg, i64) {
        match self.operands[i] {
            Operand::Mem { base, offset } => (base, offset),
            ref o => panic!("operand {i} is {o:?}, not a memory operand"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perm {
    Rw,
    Ro,
}

impl Perm {
    pub fn writable(self) -> bool {
        self == Perm::Rw
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SegmentContents {
    Bytes(Vec<u8>),
    Zero(u64),
}

/// An initialized (or zero-filled) data region with its page permission.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataSegment {
    pub addr: u64,
    pub perm: Perm,
    pub contents: SegmentContents,
}

impl DataSegment {
    pub fn len(&self) -> u64 {
        match &self.contents {
            SegmentContents::Bytes(b) => b.len() as u64,
            SegmentContents::Zero(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> u64 {
        self.addr + self.len()
    }

    pub fn pages(&self) -> impl Iterator<Item = u64> {
        let first = self.addr / PAGE_SIZE;
        let last = if self.is_empty() {
            first
        } else {
            (self.end() - 1) / PAGE_SIZE + 1
        };
        first..last
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub code_base: u64,
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, u64>,
    pub data: Vec<DataSegment>,
    /// Data addresses holding the 8-byte address of a label (from `.quad`).
    pub relocs: BTreeMap<u64, String>,
}

impl Program {
    pub fn code_end(&self) -> u64 {
        self.code_base + self.instructions.len() as u64 * INSTR_BYTES
    }

    pub fn index_of(&self, pc: u64) -> Option<usize> {
        if pc < self.code_base || !pc.is_multiple_of(INSTR_BYTES) {
            return None;
        }
        let idx = ((pc - self.code_base) / INSTR_BYTES) as usize;
        (idx < self.instructions.len()).then_some(idx)
    }

    pub fn fetch(&self, pc: u64) -> Option<&Instruction> {
        self.index_of(pc).map(|i| &self.instructions[i])
    }

    pub fn label(&self, name: &str) -> Option<u64> {
        self.labels.get(name).copied()
    }

    /// Page number to permission map derived from the data segments.
    pub fn page_permissions(&self) -> Result<BTreeMap<u64, Perm>, String> {
        let mut pages = BTreeMap::new();
        for seg in &self.data {
            for page in seg.pages() {
                if let Some(prev) = pages.insert(page, seg.perm) {
                    if prev != seg.perm {
                        return Err(format!(
                            "page {:#x} has conflicting permissions",
                            page * PAGE_SIZE
                        ));
                    }
                }
            }
        }
        Ok(pages)
    }

    /// Checks the structural invariants: label range, segment overlap,
    /// per-page permission consistency and instruction validity.
    pub fn validate(&self) -> Result<(), String> {
        for (name, &addr) in &self.labels {
            if addr < self.code_base || addr > self.code_end() || addr % INSTR_BYTES != 0 {
                return Err(format!("label `{name}` at {addr:#x} is out of range"));
            }
        }
        let mut segs: Vec<&DataSegment> = self.data.iter().collect();
        segs.sort_by_key(|s| s.addr);
        for pair in segs.windows(2) {
            if pair[0].end() > pair[1].addr {
                return Err(format!(
                    "data segments at {:#x} and {:#x} overlap",
                    pair[0].addr, pair[1].addr
                ));
            }
        }
        self.page_permissions()?;
        for (&addr, label) in &self.relocs {
            let value = self
                .label(label)
                .ok_or_else(|| format!("relocation at {addr:#x} names unknown label `{label}`"))?;
            let seg = self
                .data
                .iter()
                .find(|s| s.addr <= addr && addr + 8 <= s.end())
                .ok_or_else(|| format!("relocation at {addr:#x} is outside the data"))?;
            match &seg.contents {
                SegmentContents::Bytes(b) => {
                    let off = (addr - seg.addr) as usize;
                    let stored = u64::from_le_bytes(b[off..off + 8].try_into().unwrap());
                    if stored != value {
                        return Err(format!("relocation at {addr:#x} is stale"));
                    }
                }
                SegmentContents::Zero(_) => {
                    return Err(format!("relocation at {addr:#x} is in a zero segment"))
                }
            }
        }
        for (i, ins) in self.instructions.iter().enumerate() {
            if ins.pc != self.code_base + i as u64 * INSTR_BYTES {
                return Err(format!("instruction {i} has pc {:#x}", ins.pc));
            }
            ins.validate()?;
        }
        Ok(())
    }

    /// Renders the program back to assembly text.
    pub fn disassemble(&self) -> String {
        print::render(self)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.disassemble())
    }
}
