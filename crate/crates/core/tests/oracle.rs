mod common;

use common::check_seed;
use specsim_core::config::SimConfig;
use specsim_core::isa::assemble;

#[test]
fn random_programs_match_reference_interpreter() {
    for seed in 0..300 {
        if let Err(e) = check_seed(seed, 200) {
            panic!("{e}");
        }
    }
}

#[test]
fn tiny_machine_matches_reference() {
    let cfg = SimConfig {
        rob_capacity: 6,
        issue_width: 2,
        retire_width: 1,
        sb_capacity: 2,
        mshr_count: 1,
        rsb_depth: 1,
        bht_size: 2,
        ..SimConfig::default()
    };
    for seed in 1000..1100 {
        let p = assemble(&common::random_program(seed, 120)).unwrap();
        let want = common::reference_state(&p).unwrap();
        let got = common::machine_state(&p, &cfg).unwrap();
        if let Some(d) = want.diff(&got) {
            panic!("seed {seed}: {d}");
        }
    }
}
