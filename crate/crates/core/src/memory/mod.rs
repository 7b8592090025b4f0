//! Backing memory, the L1 tag cache with its MSHRs, and the TLB.

mod cache;
mod tlb;

use std::collections::BTreeMap;

pub use cache::{line_of, Cache, LINE_BYTES};
pub use tlb::{AccessKind, Tlb, TlbVerdict};

use crate::colors::SpecColors;
use crate::config::SimConfig;
use crate::isa::{Program, SegmentContents, PAGE_SIZE};

/// Sparse byte-addressed memory. Unwritten bytes read as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Backing {
    pages: BTreeMap<u64, Box<[u8]>>,
}

impl Backing {
    pub fn from_program(p: &Program) -> Backing {
        let mut b = Backing::default();
        for seg in &p.data {
            match &seg.contents {
                SegmentContents::Bytes(bytes) => {
                    for (i, &v) in bytes.iter().enumerate() {
                        b.write_byte(seg.addr + i as u64, v);
                    }
                }
                SegmentContents::Zero(_) => {}
            }
        }
        b
    }

    fn page_mut(&mut self, page: u64) -> &mut [u8] {
        self.pages
            .entry(page)
            .or_insert_with(|| vec![0u8; PAGE_SIZE as usize].into_boxed_slice())
    }

    pub fn read_byte(&self, addr: u64) -> u8 {
        self.pages
            .get(&(addr / PAGE_SIZE))
            .map_or(0, |p| p[(addr % PAGE_SIZE) as usize])
    }

    pub fn write_byte(&mut self, addr: u64, v: u8) {
        self.page_mut(addr / PAGE_SIZE)[(addr % PAGE_SIZE) as usize] = v;
    }

    /// Little-endian read of `size` bytes.
    pub fn read(&self, addr: u64, size: u8) -> u64 {
        (0..u64::from(size)).fold(0, |acc, i| {
            acc | u64::from(self.read_byte(addr.wrapping_add(i))) << (8 * i)
        })
    }

    pub fn write(&mut self, addr: u64, size: u8, value: u64) {
        for i in 0..u64::from(size) {
            self.write_byte(addr.wrapping_add(i), (value >> (8 * i)) as u8);
        }
    }

    /// Pages that hold at least one nonzero byte, for state comparison.
    pub fn nonzero_pages(&self) -> BTreeMap<u64, &[u8]> {
        self.pages
            .iter()
            .filter(|(_, p)| p.iter().any(|&b| b != 0))
            .map(|(&k, p)| (k, &p[..]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mshr {
    pub line: u64,
    pub issue_cycle: u64,
    pub fill_cycle: u64,
    /// Sequence number of the micro-op that missed.
    pub seq: u64,
    pub colors: SpecColors,
    /// Flushed while pending: the fill completes but installs nothing.
    pub flushed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit {
        ready_cycle: u64,
    },
    /// `allocated` is false when the miss merged into a pending MSHR.
    Miss {
        ready_cycle: u64,
        allocated: bool,
    },
    MshrFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fill {
    pub line: u64,
    pub seq: u64,
    pub installed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorySystem {
    pub backing: Backing,
    pub tlb: Tlb,
    pub cache: Cache,
    mshrs: Vec<Mshr>,
    mshr_count: usize,
    mshr_peak: usize,
    l1_latency: u64,
    dram_latency: u64,
}

impl MemorySystem {
    pub fn new(program: &Program, cfg: &SimConfig) -> MemorySystem {
        let pages = program
            .page_permissions()
            .expect("assembled programs have consistent page permissions");
        MemorySystem {
            backing: Backing::from_program(program),
            tlb: Tlb::new(pages),
            cache: Cache::new(cfg.cache_sets, cfg.cache_ways),
            mshrs: Vec::new(),
            mshr_count: cfg.mshr_count,
            mshr_peak: 0,
            l1_latency: cfg.l1_latency_cycles,
            dram_latency: cfg.dram_latency_cycles,
        }
    }

    pub fn l1_latency(&self) -> u64 {
        self.l1_latency
    }

    pub fn dram_latency(&self) -> u64 {
        self.dram_latency
    }

    pub fn mshrs(&self) -> &[Mshr] {
        &self.mshrs
    }

    /// Highest number of simultaneously outstanding misses seen.
    pub fn mshr_peak(&self) -> usize {
        self.mshr_peak
    }

    pub fn reset_mshr_peak(&mut self) {
        self.mshr_peak = self.mshrs.len();
    }

    pub fn tlb_check(&self, kind: AccessKind, addr: u64, size: u8) -> TlbVerdict {
        self.tlb.check(kind, addr, u64::from(size))
    }

    pub fn is_resident(&self, addr: u64) -> bool {
        self.cache.contains(line_of(addr))
    }

    fn pending(&self, line: u64) -> Option<&Mshr> {
        self.mshrs.iter().find(|m| m.line == line && !m.flushed)
    }

    /// Cache lookup for a load issued at `cycle`. Misses allocate (or merge
    /// into) an MSHR that is never cancelled, whatever happens to `seq`.
    pub fn load_access(
        &mut self,
        addr: u64,
        cycle: u64,
        seq: u64,
        colors: &SpecColors,
    ) -> AccessOutcome {
        let line = line_of(addr);
        if self.cache.contains(line) {
            return AccessOutcome::Hit {
                ready_cycle: cycle + self.l1_latency,
            };
        }
        if let Some(m) = self.pending(line) {
            return AccessOutcome::Miss {
                ready_cycle: m.fill_cycle.max(cycle + self.l1_latency),
                allocated: false,
            };
        }
        if self.mshrs.len() >= self.mshr_count {
            return AccessOutcome::MshrFull;
        }
        let fill_cycle = cycle + self.dram_latency;
        self.mshrs.push(Mshr {
            line,
            issue_cycle: cycle,
            fill_cycle,
            seq,
            colors: colors.clone(),
            flushed: false,
        });
        self.mshr_peak = self.mshr_peak.max(self.mshrs.len());
        AccessOutcome::Miss {
            ready_cycle: fill_cycle,
            allocated: true,
        }
    }

    /// Completes every MSHR whose fill is due by `cycle`.
    pub fn tick(&mut self, cycle: u64) -> Vec<Fill> {
        let mut fills = Vec::new();
        let mut i = 0;
        while i < self.mshrs.len() {
            if self.mshrs[i].fill_cycle <= cycle {
                let m = self.mshrs.remove(i);
                if !m.flushed {
                    self.cache.install(m.line);
                }
                fills.push(Fill {
                    line: m.line,
                    seq: m.seq,
                    installed: !m.flushed,
                });
            } else {
                i += 1;
            }
        }
        fills
    }

    /// Cycle by which every outstanding miss has filled; fills are applied.
    pub fn settle(&mut self, cycle: u64) -> u64 {
        let done = self
            .mshrs
            .iter()
            .map(|m| m.fill_cycle)
            .max()
            .unwrap_or(cycle);
        let done = done.max(cycle);
        self.tick(done);
        done
    }

    /// Senior store write-back: updates memory and installs the line.
    pub fn write_back(&mut self, addr: u64, size: u8, value: u64) {
        self.backing.write(addr, size, value);
        self.cache.install(line_of(addr));
    }

    /// Invalidates the line holding `addr`, including a pending fill.
    pub fn flush(&mut self, addr: u64) {
        let line = line_of(addr);
        self.cache.invalidate(line);
        for m in &mut self.mshrs {
            if m.line == line {
                m.flushed = true;
            }
        }
    }

    /// Receiver-side timed 8-byte read at `cycle`: returns the committed
    /// value and the observed latency, and leaves the line resident.
    pub fn timed_read(&mut self, addr: u64, cycle: u64) -> (u64, u64) {
        let line = line_of(addr);
        let latency = if self.cache.contains(line) {
            self.l1_latency
        } else if let Some(m) = self.pending(line) {
            m.fill_cycle.saturating_sub(cycle).max(self.l1_latency)
        } else {
            self.cache.install(line);
            self.dram_latency
        };
        (self.backing.read(addr, 8), latency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    fn mem(cfg: &SimConfig) -> MemorySystem {
        let p = assemble(".zero 0x10000 rw 0x10000\n.data 0x40000 ro 1 2 3 4").unwrap();
        MemorySystem::new(&p, cfg)
    }

    #[test]
    fn fill_then_hit() {
        let cfg = SimConfig::default();
        let mut m = mem(&cfg);
        let c = SpecColors::new();
        let r = m.load_access(0x10000, 10, 1, &c);
        assert_eq!(
            r,
            AccessOutcome::Miss {
                ready_cycle: 310,
                allocated: true
            }
        );
        assert!(m.tick(309).is_empty());
        assert_eq!(m.tick(310).len(), 1);
        assert_eq!(
            m.load_access(0x10008, 311, 2, &c),
            AccessOutcome::Hit { ready_cycle: 315 }
        );
    }

    #[test]
    fn mshr_capacity_and_merge() {
        let cfg = SimConfig::default();
        let mut m = mem(&cfg);
        let c = SpecColors::new();
        for i in 0..10 {
            assert!(matches!(
                m.load_access(0x10000 + i * 64, 0, i, &c),
                AccessOutcome::Miss {
                    allocated: true,
                    ..
                }
            ));
        }
        assert!(matches!(
            m.load_access(0x10000, 1, 20, &c),
            AccessOutcome::Miss {
                allocated: false,
                ready_cycle: 300
            }
        ));
        assert_eq!(
            m.load_access(0x10000 + 10 * 64, 1, 21, &c),
            AccessOutcome::MshrFull
        );
        assert_eq!(m.mshr_peak(), 10);
    }

    #[test]
    fn timed_read_latencies_and_flush() {
        let cfg = SimConfig::default();
        let mut m = mem(&cfg);
        m.backing.write(0x10000, 8, 77);
        assert_eq!(m.timed_read(0x10000, 0), (77, 300));
        assert_eq!(m.timed_read(0x10000, 300), (77, 4));
        m.flush(0x10000);
        assert_eq!(m.timed_read(0x10000, 400).1, 300);
    }

    #[test]
    fn flushed_pending_fill_does_not_install() {
        let cfg = SimConfig::default();
        let mut m = mem(&cfg);
        let c = SpecColors::new();
        m.load_access(0x10000, 0, 1, &c);
        m.flush(0x10000);
        let fills = m.settle(0);
        assert_eq!(fills, 300);
        assert!(!m.is_resident(0x10000));
    }

    #[test]
    fn backing_little_endian() {
        let cfg = SimConfig::default();
        let m = mem(&cfg);
        assert_eq!(m.backing.read(0x40000, 4), 0x0403_0201);
        assert_eq!(m.backing.read(0x40001, 2), 0x0302);
    }
}
