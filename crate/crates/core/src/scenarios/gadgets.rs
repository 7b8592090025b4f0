//! The bundled victims and their attacker scripts.
//!
//! All scenarios share one data layout and a fenced bounds-checked read whose
//! body (`transmit`) is the target of the control-flow variants: entered
//! directly it reads `b[r1]` and touches `probe[b[r1] * 512]` with the probe
//! base in `r3`.

use super::{transforms, Action, MitigationSites, ProbeSpec, Scenario, Secret, Value};
use crate::config::{ForwardingPolicy, TlbEnforcement};
use crate::isa::{assemble, Reg};
use crate::scenarios::Mitigation;

pub const BUNDLED: [&str; 6] = [
    "spectre_1_0",
    "spectre_1_1_data",
    "spectre_1_1_control",
    "spectre_1_2",
    "ghost",
    "halo",
];

/// Return-oriented form of the control variant: two speculative stores
/// chain two gadgets.
pub const ROP_VARIANT: &str = "spectre_1_1_rop";

pub const LENB: u64 = 0x1040;
pub const LENC: u64 = 0x1080;
pub const COND: u64 = 0x10c0;
pub const HALO_N: u64 = 0x1100;
pub const C_DATA: u64 = 0x1010;
pub const B: u64 = 0x2000;
pub const SECRET: u64 = 0x2800;
pub const HALO_B: u64 = 0x2100;
pub const HALO_C: u64 = 0x2200;
pub const C_TABLE: u64 = 0x4fd0;
pub const TABLE: u64 = 0x5000;
pub const TRAIN: u64 = 0x10000;

/// Out-of-bounds index with `b + x == SECRET`.
pub const SECRET_INDEX: u64 = SECRET - B;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetOptions {
    pub secret: u8,
    /// Nops between the mispredicted branch and the leaking code.
    pub padding: usize,
    pub amplification: usize,
    /// Leave the bounds variable cached, shrinking the window to a few
    /// cycles.
    pub warm_bounds: bool,
    /// Data variant: the speculative store overwrites the bound. Off, the
    /// attacker goes straight at the masked read.
    pub overwrite: bool,
    pub priming: usize,
    pub attempts: usize,
}

impl Default for GadgetOptions {
    fn default() -> GadgetOptions {
        GadgetOptions {
            secret: 0x5a,
            padding: 0,
            amplification: 1,
            warm_bounds: false,
            overwrite: true,
            priming: 4,
            attempts: 2,
        }
    }
}

const COMMON_CODE: &str = "\
; a stray jump to address zero stops here
    halt
.label fenced_read
    li r4, 0x1040
    ld.8 r5, [r4+0]
    cmp r1, r5
    jae fenced_out
    fence
.label transmit
    li r6, 0x2000
    add r6, r6, r1
    ld.1 r7, [r6+0]
    shli r7, r7, 9
    add r7, r7, r3
    ld.1 r8, [r7+0]
.label fenced_out
    ret
";

fn common_data(probe: &ProbeSpec) -> String {
    let b: Vec<String> = (0..16).map(|i| i.to_string()).collect();
    format!(
        "\
.zero 0x1000 rw 0x40
.quad {LENB:#x} rw 16
.quad {LENC:#x} rw 5
.quad {COND:#x} rw 0
.quad {HALO_N:#x} rw 2
.data {B:#x} rw {}
.data {HALO_B:#x} rw 0 1 6 3
.quad {HALO_C:#x} rw 11 22 transmit 33
.zero {SECRET:#x} rw 8
.zero 0x8000 rw 0x2000
.zero {TRAIN:#x} rw 0x2000
.zero {:#x} rw {}
",
        b.join(" "),
        probe.base,
        probe.len()
    )
}

const V1_0: &str = "\
.label main
    call victim
    halt
.label victim
    li r4, 0x1040
    ld.8 r5, [r4+0]
    cmp r1, r5
    jae v_out
.label v_in
    li r6, 0x2000
    add r6, r6, r1
    ld.1 r7, [r6+0]
    shli r7, r7, 9
    add r7, r7, r3
    ld.1 r8, [r7+0]
.label v_out
    ret
";

const V1_1_DATA: &str = "\
.label main
    call victim
    halt
.label victim
    li r4, 0x1080
    ld.8 r5, [r4+0]
    cmp r2, r5
    jae d_skip
.label d_store
    li r6, 0x1010
    shli r7, r2, 3
    add r6, r6, r7
    st.8 r9, [r6+0]
.label d_skip
    li r4, 0x1040
    ld.8 r5, [r4+0]
    cmp r1, r5
    jae d_out
    cmp r1, r5
    csetm.b r29
    and r1, r1, r29
    li r6, 0x2000
    add r6, r6, r1
    ld.1 r7, [r6+0]
    shli r7, r7, 9
    add r7, r7, r3
    ld.1 r8, [r7+0]
.label d_out
    ret
";

// c[5] sits in a 48-byte frame; c[6] is the return slot.
const V1_1_CONTROL: &str = "\
.label main
    call victim
    halt
.label victim
    addi sp, sp, -48
    li r4, 0x1080
    ld.8 r5, [r4+0]
    cmp r2, r5
    jae c_skip
.label c_store
    shli r7, r2, 3
    add r7, r7, sp
    st.8 r9, [r7+0]
.label c_skip
    addi sp, sp, 48
    ret
";

const V1_1_ROP: &str = "\
.label main
    call victim
    halt
.label victim
    addi sp, sp, -48
    li r4, 0x1080
    ld.8 r5, [r4+0]
    cmp r2, r5
    jae c_skip
.label c_store
    shli r7, r2, 3
    add r7, r7, sp
    st.8 r9, [r7+0]
    st.8 r10, [r7+8]
.label c_skip
    addi sp, sp, 48
    ret
.label rop_load
    ld.1 r7, [r1+0]
    shli r7, r7, 9
    ret
.label rop_touch
    add r7, r7, r3
    ld.1 r8, [r7+0]
    ret
";

// c[5] ends where the read-only function table starts.
const V1_2: &str = "\
.label main
    call victim
    halt
.label victim
    li r4, 0x1080
    ld.8 r5, [r4+0]
    cmp r2, r5
    jae t_skip
.label t_store
    li r6, 0x4fd0
    shli r7, r2, 3
    add r6, r6, r7
    st.8 r9, [r6+0]
.label t_skip
    li r6, 0x5000
    ld.8 r7, [r6+0]
    jr r7
.label handler
    ret
";

// buf[5] at sp, idx at sp+40, buf[6] is the return slot. Both branches test
// the same slow condition; the first is laid out inverted so the two
// counters can disagree.
const GHOST: &str = "\
.label main
    call victim
    halt
.label main_plant
    call plant
    halt
.label plant
    addi sp, sp, -48
    st.8 r2, [sp+40]
    addi sp, sp, 48
    ret
.label victim
    addi sp, sp, -48
    li r10, 5
    li r4, 0x10c0
    ld.8 r5, [r4+0]
    cmpi r5, 0
    jne gh_init
    jmp gh_after
.label gh_init
    li r6, 1
    st.8 r6, [sp+40]
.label gh_after
    cmpi r5, 0
    je gh_out
.label gh_store
    ld.8 r7, [sp+40]
.label gh_index
    shli r7, r7, 3
    add r7, r7, sp
    st.8 r9, [r7+0]
.label gh_out
    addi sp, sp, 48
    ret
";

// a[5] at sp, a[6] is the return slot; b[i] for i >= n is never validated.
const HALO: &str = "\
.label main
    call victim
    halt
.label victim
    addi sp, sp, -48
    li r10, 5
    li r4, 0x1100
    ld.8 r5, [r4+0]
    li r6, 0
.label h_loop
    cmp r6, r5
    jae h_done
.label h_body
    li r7, 0x2100
    add r7, r7, r6
    ld.1 r8, [r7+0]
.label h_index
    shli r8, r8, 3
    add r8, r8, sp
    shli r12, r6, 3
    li r13, 0x2200
    add r12, r12, r13
    ld.8 r13, [r12+0]
    st.8 r13, [r8+0]
    addi r6, r6, 1
    cmpi r6, 4
    jb h_loop
.label h_done
    addi sp, sp, 48
    ret
";

fn imm(v: u64) -> Value {
    Value::Imm(v)
}

fn label(l: &str) -> Value {
    Value::Label(l.to_string())
}

fn reg(n: u8) -> Reg {
    Reg::new(n).unwrap()
}

fn sites(fence_at: &str, mask_at: &str, index: u8, bound: u8, region_size: u64) -> MitigationSites {
    MitigationSites {
        fence_at: fence_at.into(),
        mask_at: mask_at.into(),
        index: reg(index),
        bound: reg(bound),
        region_size,
    }
}

fn flush(addr: u64) -> Action {
    Action::Flush { addr }
}

fn poke(addr: u64, value: u64) -> Action {
    Action::Poke {
        addr,
        size: 8,
        value: imm(value),
    }
}

/// Builds a bundled scenario (or [`ROP_VARIANT`]); `None` for unknown names.
pub fn build(name: &str, o: &GadgetOptions) -> Option<Scenario> {
    let probe = ProbeSpec {
        amplification: o.amplification.max(1),
        ..ProbeSpec::default()
    };
    let secret = Secret {
        addr: SECRET,
        value: o.secret,
    };
    let plant = Action::Poke {
        addr: SECRET,
        size: 1,
        value: imm(u64::from(o.secret)),
    };
    let slow = |addr: u64| {
        if o.warm_bounds {
            vec![]
        } else {
            vec![flush(addr)]
        }
    };
    let n = o.priming;

    let (victim, extra_data, pad_at, sites, setup, prime, attack): (
        &str,
        String,
        &str,
        MitigationSites,
        Vec<Action>,
        Vec<Action>,
        Vec<Action>,
    ) = match name {
        "spectre_1_0" => {
            let prime = (0..n)
                .map(|i| Action::call("main", &[(1, imm(i as u64 % 16)), (3, imm(TRAIN))]))
                .collect();
            let mut attack = slow(LENB);
            attack.push(Action::call(
                "main",
                &[(1, imm(SECRET_INDEX)), (3, Value::ProbePlane)],
            ));
            (
                V1_0,
                String::new(),
                "v_in",
                sites("v_in", "v_in", 1, 5, 16),
                vec![],
                prime,
                attack,
            )
        }
        "spectre_1_1_data" => {
            let prime = (0..n)
                .map(|i| {
                    let i = i as u64;
                    Action::call(
                        "main",
                        &[
                            (1, imm(i % 16)),
                            (2, imm(i % 5)),
                            (9, imm(i)),
                            (3, imm(TRAIN)),
                        ],
                    )
                })
                .collect();
            let (y, z) = if o.overwrite {
                (6, 0x7fff_ffff)
            } else {
                (1, 7)
            };
            let mut attack = slow(LENC);
            attack.extend(slow(LENB));
            attack.push(Action::call(
                "main",
                &[
                    (1, imm(SECRET_INDEX)),
                    (2, imm(y)),
                    (9, imm(z)),
                    (3, Value::ProbePlane),
                ],
            ));
            let s = sites("d_store", "d_store", 2, 5, 5);
            (V1_1_DATA, String::new(), "d_skip", s, vec![], prime, attack)
        }
        "spectre_1_1_control" => {
            let prime = (0..n)
                .map(|i| Action::call("main", &[(2, imm(i as u64 % 5)), (9, imm(i as u64))]))
                .collect();
            let mut attack = slow(LENC);
            attack.push(Action::call(
                "main",
                &[
                    (1, imm(SECRET_INDEX)),
                    (2, imm(6)),
                    (9, label("transmit")),
                    (3, Value::ProbePlane),
                ],
            ));
            let s = sites("c_store", "c_store", 2, 5, 5);
            (
                V1_1_CONTROL,
                String::new(),
                "c_skip",
                s,
                vec![],
                prime,
                attack,
            )
        }
        "spectre_1_1_rop" => {
            let prime = (0..n)
                .map(|i| Action::call("main", &[(2, imm(i as u64 % 4)), (9, imm(1)), (10, imm(2))]))
                .collect();
            let mut attack = slow(LENC);
            attack.push(Action::call(
                "main",
                &[
                    (1, imm(SECRET)),
                    (2, imm(6)),
                    (9, label("rop_load")),
                    (10, label("rop_touch")),
                    (3, Value::ProbePlane),
                ],
            ));
            let s = sites("c_store", "c_store", 2, 5, 5);
            (V1_1_ROP, String::new(), "c_skip", s, vec![], prime, attack)
        }
        "spectre_1_2" => {
            let prime = (0..n)
                .map(|i| Action::call("main", &[(2, imm(i as u64 % 5)), (9, imm(i as u64))]))
                .collect();
            let mut attack = slow(LENC);
            attack.push(Action::call(
                "main",
                &[
                    (1, imm(SECRET_INDEX)),
                    (2, imm(6)),
                    (9, label("transmit")),
                    (3, Value::ProbePlane),
                ],
            ));
            let data = format!(".zero {C_TABLE:#x} rw 48\n.quad {TABLE:#x} ro handler\n");
            let s = sites("t_store", "t_store", 2, 5, 5);
            (V1_2, data, "t_skip", s, vec![], prime, attack)
        }
        "ghost" => {
            // counters (first, second) go (1,1) -> (0,2) in setup; every
            // priming call brings them back to (1,1), where the first branch
            // predicts "skip the init" and the second "store".
            let setup = vec![poke(COND, 0), Action::call("main", &[(9, imm(0))])];
            let prime = vec![
                poke(COND, 1),
                Action::call("main", &[(9, imm(0x55))]),
                Action::call("main_plant", &[(2, imm(6))]),
            ];
            let mut attack = vec![poke(COND, 0)];
            attack.extend(slow(COND));
            attack.push(Action::call(
                "main",
                &[
                    (1, imm(SECRET_INDEX)),
                    (9, label("transmit")),
                    (3, Value::ProbePlane),
                ],
            ));
            let s = sites("gh_store", "gh_index", 7, 10, 5);
            (GHOST, String::new(), "gh_store", s, setup, prime, attack)
        }
        "halo" => {
            let mut attack = slow(HALO_N);
            attack.push(Action::call(
                "main",
                &[(1, imm(SECRET_INDEX)), (3, Value::ProbePlane)],
            ));
            // with n cached the loop exits before anything can forward
            let prime = vec![Action::call("main", &[(1, imm(0)), (3, imm(TRAIN))])];
            let s = sites("h_body", "h_index", 8, 10, 5);
            (HALO, String::new(), "h_body", s, vec![], prime, attack)
        }
        _ => return None,
    };

    let src = format!("{COMMON_CODE}{victim}{}{extra_data}", common_data(&probe));
    let program = assemble(&src).expect("bundled gadget assembles");
    let program = transforms::pad(&program, pad_at, o.padding).expect("pad site exists");
    let mut full_setup = vec![plant];
    full_setup.extend(setup);
    Some(Scenario {
        name: name.to_string(),
        program,
        setup: full_setup,
        prime,
        attack,
        attempts: o.attempts,
        secret,
        probe,
        sites: Some(sites),
        config: Vec::new(),
    })
}

pub fn bundled(name: &str) -> Option<Scenario> {
    build(name, &GadgetOptions::default())
}

/// Expected leak outcome for a bundled scenario, or `None` for other names.
///
/// Fences and exact masks stop every variant. The coarse mask only stops the
/// plain bounds-check bypass: the other variants index inside the padding
/// up to the next power of two. Every policy that restricts forwarding stops
/// the variants that need a forwarded value; and the read-only table write
/// forwards only when permissions are checked late.
pub fn expected_success(
    name: &str,
    m: Mitigation,
    policy: ForwardingPolicy,
    tlb: TlbEnforcement,
) -> Option<bool> {
    if !BUNDLED.contains(&name) && name != ROP_VARIANT {
        return None;
    }
    let plain = name == "spectre_1_0";
    let mitigation_allows = match m {
        Mitigation::None => true,
        Mitigation::Fence | Mitigation::ExactMask => false,
        Mitigation::CoarseMask => !plain,
    };
    let policy_allows = plain || policy == ForwardingPolicy::Baseline;
    let tlb_allows = name != "spectre_1_2" || tlb == TlbEnforcement::Lazy;
    Some(mitigation_allows && policy_allows && tlb_allows)
}
