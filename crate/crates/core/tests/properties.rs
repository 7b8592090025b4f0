mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use specsim_core::config::SimConfig;
use specsim_core::engine::{Completion, Machine};
use specsim_core::isa::{assemble, decode};
use specsim_core::trace::TraceKind;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disassembly_reassembles_to_the_same_program(seed in any::<u64>()) {
        let p = assemble(&common::random_program(seed, 200)).unwrap();
        prop_assert_eq!(assemble(&p.disassemble()).unwrap(), p);
    }

    #[test]
    fn one_or_two_uops_per_instruction(seed in any::<u64>()) {
        let p = assemble(&common::random_program(seed, 200)).unwrap();
        let uops: usize = p.instructions.iter().map(|i| decode(i).len()).sum();
        let n = p.instructions.len();
        prop_assert!(n <= uops && uops <= 2 * n);
        for ins in &p.instructions {
            prop_assert_eq!(decode(ins), decode(ins));
        }
    }

    #[test]
    fn squashed_misses_still_fill(
        lines in prop::collection::vec(0u64..64, 1..24),
        mshr_count in 1usize..12,
    ) {
        // every load below sits in the shadow of a branch that resolves
        // taken after a DRAM round trip
        let mut src = String::from("li r1, 0x1000\nld.8 r2, [r1+0]\ncmpi r2, 0\njne out\nli r3, 0x40000\n");
        for l in &lines {
            src.push_str(&format!("ld.8 r4, [r3+{}]\n", l * 64));
        }
        src.push_str(".label out\nhalt\n.quad 0x1000 rw 1\n.zero 0x40000 rw 0x1000\n");
        let p = assemble(&src).unwrap();
        let cfg = SimConfig { mshr_count, ..SimConfig::default() };
        let mut m = Machine::new(&p, &cfg);
        m.enable_trace();
        prop_assert_eq!(m.run_from(0).unwrap(), Completion::Halted);
        prop_assert!(m.mem.mshr_peak() <= mshr_count);
        let trace = m.take_trace();
        let squashed: BTreeSet<u64> =
            trace.iter().filter(|e| e.kind == TraceKind::Squash).map(|e| e.seq).collect();
        let allocated: Vec<u64> = trace
            .iter()
            .filter(|e| e.kind == TraceKind::MshrAlloc && squashed.contains(&e.seq))
            .map(|e| u64::from_str_radix(e.detail.trim_start_matches("line 0x"), 16).unwrap())
            .collect();
        prop_assert!(!allocated.is_empty());
        let mut now = m.mem.settle(m.cycle());
        for line in allocated {
            let (_, latency) = m.mem.timed_read(line, now);
            prop_assert_eq!(latency, cfg.l1_latency_cycles);
            m.mem.flush(line);
            let (_, latency) = m.mem.timed_read(line, now);
            prop_assert_eq!(latency, cfg.dram_latency_cycles);
            now += latency;
        }
    }
}
