//! Architectural state shared by the out-of-order machine and the
//! in-order reference interpreter.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::isa::Reg;
use crate::memory::Backing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// Load from an unmapped page.
    Read { pc: u64, addr: u64 },
    /// Store to a read-only or unmapped page.
    Write { pc: u64, addr: u64 },
    /// Control reached an address with no instruction.
    Fetch { pc: u64 },
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::Read { pc, addr } => write!(f, "read fault at {addr:#x} (pc {pc:#x})"),
            Fault::Write { pc, addr } => write!(f, "write fault at {addr:#x} (pc {pc:#x})"),
            Fault::Fetch { pc } => write!(f, "fetch fault at pc {pc:#x}"),
        }
    }
}

/// Committed registers, flags and memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchState {
    pub regs: [u64; Reg::ARCH_COUNT],
    pub flags: u64,
    pub memory: Backing,
}

impl ArchState {
    /// First difference against `other`, for test diagnostics.
    pub fn diff(&self, other: &ArchState) -> Option<String> {
        for i in 0..Reg::ARCH_COUNT {
            if self.regs[i] != other.regs[i] {
                return Some(format!("r{i}: {:#x} != {:#x}", self.regs[i], other.regs[i]));
            }
        }
        if self.flags != other.flags {
            return Some(format!("flags: {:#x} != {:#x}", self.flags, other.flags));
        }
        let (a, b) = (self.memory.nonzero_pages(), other.memory.nonzero_pages());
        if a != b {
            for (page, bytes) in &a {
                match b.get(page) {
                    None => return Some(format!("page {page:#x} only on the left")),
                    Some(other) => {
                        if let Some(i) = (0..bytes.len()).find(|&i| bytes[i] != other[i]) {
                            let addr = page * crate::isa::PAGE_SIZE + i as u64;
                            return Some(format!(
                                "memory {addr:#x}: {:#x} != {:#x}",
                                bytes[i], other[i]
                            ));
                        }
                    }
                }
            }
            return Some("page only on the right".into());
        }
        None
    }
}
