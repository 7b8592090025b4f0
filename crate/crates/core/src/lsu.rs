//! Store buffer and the store-to-load forwarding decision under each policy.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::colors::SpecColors;
use crate::config::{ForwardingPolicy, TlbEnforcement};
use crate::isa::semantics::truncate;
use crate::memory::TlbVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PermState {
    Unchecked,
    Ok,
    WriteFault,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreBufferEntry {
    /// Sequence number of the store's address micro-op.
    pub seq: u64,
    pub pc: u64,
    pub addr: Option<u64>,
    pub size: u8,
    pub data: Option<u64>,
    pub senior: bool,
    pub forwardable: bool,
    pub colors: SpecColors,
    pub perm: PermState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreBufferFull;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreBuffer {
    entries: VecDeque<StoreBufferEntry>,
    capacity: usize,
}

/// The load side of a forwarding query.
#[derive(Debug, Clone, Copy)]
pub struct LoadQuery<'a> {
    pub seq: u64,
    pub pc: u64,
    pub addr: u64,
    pub size: u8,
    pub forwardable: bool,
    pub colors: &'a SpecColors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    Forward {
        value: u64,
        store_seq: u64,
    },
    ForwardZero {
        store_seq: u64,
    },
    /// Retry later. `policy_blocked` marks a load that would have been
    /// forwarded to had the policy allowed it.
    Wait {
        policy_blocked: bool,
    },
    GoToMemory,
}

/// Load pcs allowed to receive forwarded data under ArcticSloth.
///
/// The active set is fixed for the lifetime of a machine; loads that needed
/// forwarding on the committed path are collected separately in `learned`
/// so a later run can start from them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArcticWhitelist {
    active: BTreeSet<u64>,
    learned: BTreeSet<u64>,
}

impl ArcticWhitelist {
    pub fn new(active: impl IntoIterator<Item = u64>) -> ArcticWhitelist {
        ArcticWhitelist {
            active: active.into_iter().collect(),
            learned: BTreeSet::new(),
        }
    }

    pub fn allows(&self, pc: u64) -> bool {
        self.active.contains(&pc)
    }

    pub fn learn(&mut self, pc: u64) {
        self.learned.insert(pc);
    }

    pub fn active(&self) -> &BTreeSet<u64> {
        &self.active
    }

    pub fn learned(&self) -> &BTreeSet<u64> {
        &self.learned
    }

    /// Active and learned pcs together.
    pub fn merged(&self) -> BTreeSet<u64> {
        self.active.union(&self.learned).copied().collect()
    }

    /// Parses the state file format: one hexadecimal pc per line, `#`
    /// comments allowed.
    pub fn parse(text: &str) -> Result<BTreeSet<u64>, String> {
        let mut set = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let digits = line.trim_start_matches("0x").trim_start_matches("0X");
            let pc = u64::from_str_radix(digits, 16)
                .map_err(|_| format!("line {}: `{line}` is not a hex pc", i + 1))?;
            set.insert(pc);
        }
        Ok(set)
    }

    pub fn render(pcs: &BTreeSet<u64>) -> String {
        let mut out = String::new();
        for pc in pcs {
            writeln!(out, "{pc:#x}").unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> std::io::Result<BTreeSet<u64>> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(path: &Path, pcs: &BTreeSet<u64>) -> std::io::Result<()> {
        std::fs::write(path, Self::render(pcs))
    }
}

fn overlaps(a: u64, asz: u8, b: u64, bsz: u8) -> bool {
    let a_end = a.saturating_add(u64::from(asz));
    let b_end = b.saturating_add(u64::from(bsz));
    a < b_end && b < a_end
}

impl StoreBuffer {
    pub fn new(capacity: usize) -> StoreBuffer {
        StoreBuffer {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &StoreBufferEntry> {
        self.entries.iter()
    }

    pub fn get(&self, seq: u64) -> Option<&StoreBufferEntry> {
        self.entries.iter().find(|e| e.seq == seq)
    }

    fn get_mut(&mut self, seq: u64) -> Option<&mut StoreBufferEntry> {
        self.entries.iter_mut().find(|e| e.seq == seq)
    }

    /// Allocates an entry at dispatch; entries arrive in program order.
    pub fn insert(
        &mut self,
        seq: u64,
        pc: u64,
        size: u8,
        forwardable: bool,
        colors: SpecColors,
    ) -> Result<(), StoreBufferFull> {
        if self.is_full() {
            return Err(StoreBufferFull);
        }
        debug_assert!(self.entries.back().is_none_or(|e| e.seq < seq));
        self.entries.push_back(StoreBufferEntry {
            seq,
            pc,
            addr: None,
            size,
            data: None,
            senior: false,
            forwardable,
            colors,
            perm: PermState::Unchecked,
        });
        Ok(())
    }

    pub fn resolve_addr(&mut self, seq: u64, addr: u64, verdict: TlbVerdict) {
        let e = self.get_mut(seq).expect("store buffer entry for STA");
        e.addr = Some(addr);
        e.perm = if verdict == TlbVerdict::Ok {
            PermState::Ok
        } else {
            PermState::WriteFault
        };
    }

    pub fn resolve_data(&mut self, seq: u64, data: u64) {
        let e = self.get_mut(seq).expect("store buffer entry for STD");
        e.data = Some(truncate(data, e.size));
    }

    /// Marks the store retired. Only permission-clean stores get here.
    pub fn seniorize(&mut self, seq: u64) {
        let e = self.get_mut(seq).expect("store buffer entry at retire");
        debug_assert!(e.colors.is_empty() && e.perm == PermState::Ok);
        e.senior = true;
    }

    pub fn clear_color(&mut self, tag: u64) {
        for e in &mut self.entries {
            e.colors.remove(tag);
        }
    }

    /// Removes every non-senior entry carrying `tag`; returns their seqs.
    pub fn squash(&mut self, tag: u64) -> Vec<u64> {
        let mut gone = Vec::new();
        self.entries.retain(|e| {
            let kill = !e.senior && e.colors.contains(tag);
            if kill {
                gone.push(e.seq);
            }
            !kill
        });
        gone
    }

    /// Removes every non-senior entry at or after `seq`.
    pub fn squash_from(&mut self, seq: u64) {
        self.entries.retain(|e| e.senior || e.seq < seq);
    }

    /// The oldest entry if it is senior and ready to write back.
    pub fn pop_senior(&mut self) -> Option<StoreBufferEntry> {
        if self.entries.front().is_some_and(|e| e.senior) {
            self.entries.pop_front()
        } else {
            None
        }
    }

    pub fn has_senior(&self) -> bool {
        self.entries.front().is_some_and(|e| e.senior)
    }

    pub fn forward_decision(
        &self,
        load: LoadQuery<'_>,
        policy: ForwardingPolicy,
        tlb: TlbEnforcement,
        whitelist: &ArcticWhitelist,
    ) -> ForwardDecision {
        let older = || self.entries.iter().rev().filter(|e| e.seq < load.seq);
        if older().any(|e| e.addr.is_none()) {
            return ForwardDecision::Wait {
                policy_blocked: false,
            };
        }
        let Some(store) = older().find(|e| overlaps(e.addr.unwrap(), e.size, load.addr, load.size))
        else {
            return ForwardDecision::GoToMemory;
        };
        let exact = store.addr == Some(load.addr) && store.size >= load.size;
        let Some(data) = store.data.filter(|_| exact) else {
            return ForwardDecision::Wait {
                policy_blocked: false,
            };
        };
        if store.perm == PermState::WriteFault {
            match tlb {
                TlbEnforcement::Lazy => {}
                TlbEnforcement::ForwardZero => {
                    return ForwardDecision::ForwardZero {
                        store_seq: store.seq,
                    }
                }
                TlbEnforcement::Eager => {
                    return ForwardDecision::Wait {
                        policy_blocked: false,
                    }
                }
            }
        }
        let allowed = match policy {
            ForwardingPolicy::Baseline => true,
            ForwardingPolicy::SlothbearStores => store.senior,
            ForwardingPolicy::SlothbearLoads => load.colors.is_empty(),
            ForwardingPolicy::SlothMarked => load.forwardable && store.forwardable,
            ForwardingPolicy::ArcticSloth => whitelist.allows(load.pc),
        };
        if allowed {
            ForwardDecision::Forward {
                value: truncate(data, load.size),
                store_seq: store.seq,
            }
        } else {
            ForwardDecision::Wait {
                policy_blocked: true,
            }
        }
    }
}
