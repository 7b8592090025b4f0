//! Flush+reload receiver over a probe array, with optional amplification.

use serde::{Deserialize, Serialize};

use crate::memory::{MemorySystem, LINE_BYTES};

/// Probe array geometry. Entry `v` of plane `p` lives at
/// `base + p * plane_stride() + v * stride`; planes are offset by one extra
/// line so that the lines of one entry spread over different cache sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub base: u64,
    pub stride: u64,
    pub entries: usize,
    /// Lines timed per entry (one per plane).
    pub amplification: usize,
}

impl Default for ProbeSpec {
    fn default() -> ProbeSpec {
        ProbeSpec {
            base: 0x10_0000,
            stride: 512,
            entries: 256,
            amplification: 1,
        }
    }
}

impl ProbeSpec {
    pub fn plane_stride(&self) -> u64 {
        self.stride * self.entries as u64 + LINE_BYTES
    }

    pub fn plane_base(&self, plane: usize) -> u64 {
        self.base + plane as u64 * self.plane_stride()
    }

    pub fn entry_addr(&self, plane: usize, entry: usize) -> u64 {
        self.plane_base(plane) + entry as u64 * self.stride
    }

    pub fn len(&self) -> u64 {
        self.amplification.max(1) as u64 * self.plane_stride()
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn flush_all(&self, mem: &mut MemorySystem) {
        for plane in 0..self.amplification.max(1) {
            for v in 0..self.entries {
                mem.flush(self.entry_addr(plane, v));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReading {
    /// Timer-visible latency per entry, summed over the planes.
    pub measured: Vec<u64>,
    pub threshold: u64,
    /// The unique fastest entry, when it is under the threshold.
    pub inferred: Option<usize>,
    pub end_cycle: u64,
}

/// Timer reading at `cycle` for a clock of the given granularity.
pub fn coarse_time(cycle: u64, granularity: u64) -> u64 {
    let g = granularity.max(1);
    cycle / g * g
}

/// Times every entry starting at `start`. Each measurement begins on a timer
/// edge and performs the plane reads back to back (serialized, as if each
/// address depended on the previous value); every read line is flushed
/// afterwards so the receiver never leaves a footprint of its own.
pub fn receive(
    mem: &mut MemorySystem,
    spec: &ProbeSpec,
    start: u64,
    granularity: u64,
) -> ProbeReading {
    let g = granularity.max(1);
    let planes = spec.amplification.max(1);
    let mut t = start;
    let mut measured = Vec::with_capacity(spec.entries);
    for v in 0..spec.entries {
        t = t.div_ceil(g) * g;
        let t0 = coarse_time(t, g);
        for plane in 0..planes {
            let addr = spec.entry_addr(plane, v);
            let (_, latency) = mem.timed_read(addr, t);
            t += latency;
            mem.flush(addr);
        }
        measured.push(coarse_time(t, g) - t0);
    }
    let threshold = planes as u64 * (mem.l1_latency() + mem.dram_latency()) / 2;
    let min = measured.iter().copied().min().unwrap_or(u64::MAX);
    let inferred = if min < threshold && measured.iter().filter(|&&m| m == min).count() == 1 {
        measured.iter().position(|&m| m == min)
    } else {
        None
    };
    ProbeReading {
        measured,
        threshold,
        inferred,
        end_cycle: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::isa::assemble;
    use crate::memory::line_of;

    fn setup(amp: usize) -> (MemorySystem, ProbeSpec) {
        let spec = ProbeSpec {
            amplification: amp,
            ..ProbeSpec::default()
        };
        let p = assemble(&format!(".zero {:#x} rw {}", spec.base, spec.len())).unwrap();
        (MemorySystem::new(&p, &SimConfig::default()), spec)
    }

    fn touch(mem: &mut MemorySystem, addr: u64) {
        mem.cache.install(line_of(addr));
    }

    #[test]
    fn single_cached_entry_is_recovered() {
        let (mut mem, spec) = setup(1);
        touch(&mut mem, spec.entry_addr(0, 0x5a));
        let r = receive(&mut mem, &spec, 0, 1);
        assert_eq!(r.inferred, Some(0x5a));
        assert_eq!(r.measured[0x5a], 4);
        assert_eq!(r.measured[0], 300);
        assert!(!mem.is_resident(spec.entry_addr(0, 0x5a)));
    }

    #[test]
    fn nothing_cached_means_no_signal() {
        let (mut mem, spec) = setup(1);
        assert_eq!(receive(&mut mem, &spec, 0, 1).inferred, None);
    }

    #[test]
    fn coarse_timer_hides_a_single_line_but_not_an_amplified_one() {
        let (mut mem, spec) = setup(1);
        touch(&mut mem, spec.entry_addr(0, 7));
        assert_eq!(receive(&mut mem, &spec, 0, 10_000).inferred, None);

        let (mut mem, spec) = setup(64);
        for plane in 0..64 {
            touch(&mut mem, spec.entry_addr(plane, 7));
        }
        let r = receive(&mut mem, &spec, 123, 10_000);
        assert_eq!(r.inferred, Some(7));
    }

    #[test]
    fn plane_lines_of_one_entry_use_distinct_sets() {
        let spec = ProbeSpec {
            amplification: 64,
            ..ProbeSpec::default()
        };
        let sets: std::collections::BTreeSet<u64> = (0..64)
            .map(|p| line_of(spec.entry_addr(p, 9)) % 64)
            .collect();
        assert_eq!(sets.len(), 64);
    }
}
