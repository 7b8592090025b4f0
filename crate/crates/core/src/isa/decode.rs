use super::{Cond, Instruction, Mnemonic, Reg, INSTR_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Sar,
    Mul,
}

impl AluOp {
    pub const ALL: [AluOp; 9] = [
        AluOp::Add,
        AluOp::Sub,
        AluOp::And,
        AluOp::Or,
        AluOp::Xor,
        AluOp::Shl,
        AluOp::Shr,
        AluOp::Sar,
        AluOp::Mul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AluOp::Add => "add",
            AluOp::Sub => "sub",
            AluOp::And => "and",
            AluOp::Or => "or",
            AluOp::Xor => "xor",
            AluOp::Shl => "shl",
            AluOp::Shr => "shr",
            AluOp::Sar => "sar",
            AluOp::Mul => "mul",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UopKind {
    /// `dst = op(src0 or 0, src1 or imm)`.
    Alu(AluOp),
    /// `flags = compare(src0, src1 or imm)`.
    Cmp,
    /// Direct branch on `flags` (or unconditional for `Cond::Always`).
    BrCond(Cond),
    /// Indirect jump to `src0`; for returns also `sp = src1 + imm`.
    JrIndirect,
    /// Load `size` bytes from `src0 + imm`.
    Lda,
    /// Store address: `src0 + imm`.
    Sta,
    /// Store data: `src0`, or `imm` when there is no source.
    Std,
    Fence,
    /// `dst = cond(src2) ? (src0 or imm) : (src1 or 0)`.
    Csel(Cond),
    /// Push half of a call: `sp = src0 - 8` and the store address of the
    /// return slot. `imm` is the call target.
    Call,
    Halt,
}

impl UopKind {
    pub fn is_branch(self) -> bool {
        matches!(self, UopKind::BrCond(_) | UopKind::JrIndirect)
    }

    pub fn name(self) -> &'static str {
        match self {
            UopKind::Alu(_) => "ALU",
            UopKind::Cmp => "CMP",
            UopKind::BrCond(_) => "BR",
            UopKind::JrIndirect => "JR",
            UopKind::Lda => "LDA",
            UopKind::Sta => "STA",
            UopKind::Std => "STD",
            UopKind::Fence => "FENCE",
            UopKind::Csel(_) => "CSEL",
            UopKind::Call => "CALL",
            UopKind::Halt => "HALT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MicroOp {
    pub kind: UopKind,
    pub dst: Option<Reg>,
    pub srcs: [Option<Reg>; 3],
    pub imm: i64,
    /// Access width in bytes for memory micro-ops, 0 otherwise.
    pub size: u8,
    pub parent_pc: u64,
    pub forwardable: bool,
    /// Instruction-local store-buffer slot; STA/CALL and STD of one store
    /// carry the same id.
    pub store_slot: Option<u8>,
    /// JR produced by `ret`: predicted through the return stack buffer.
    pub is_return: bool,
    /// Last micro-op of its instruction (retiring it retires the instruction).
    pub last: bool,
}

impl MicroOp {
    fn new(kind: UopKind, pc: u64) -> MicroOp {
        MicroOp {
            kind,
            dst: None,
            srcs: [None; 3],
            imm: 0,
            size: 0,
            parent_pc: pc,
            forwardable: false,
            store_slot: None,
            is_return: false,
            last: false,
        }
    }

    fn dst(mut self, r: Reg) -> Self {
        // writes to r0 are discarded
        self.dst = (!r.is_zero()).then_some(r);
        self
    }

    fn src(mut self, i: usize, r: Reg) -> Self {
        self.srcs[i] = Some(r);
        self
    }

    fn imm(mut self, v: i64) -> Self {
        self.imm = v;
        self
    }
}

/// Splits an instruction into micro-ops. Stores become STA+STD, returns
/// become LDA+JR, calls become CALL+STD; everything else is one micro-op.
pub fn decode(ins: &Instruction) -> Vec<MicroOp> {
    let pc = ins.pc;
    let mut uops = match ins.mnemonic {
        Mnemonic::AluRR(op) => vec![MicroOp::new(UopKind::Alu(op), pc)
            .dst(ins.reg(0))
            .src(0, ins.reg(1))
            .src(1, ins.reg(2))],
        Mnemonic::AluRI(op) => vec![MicroOp::new(UopKind::Alu(op), pc)
            .dst(ins.reg(0))
            .src(0, ins.reg(1))
            .imm(ins.imm(2))],
        Mnemonic::Li => vec![MicroOp::new(UopKind::Alu(AluOp::Add), pc)
            .dst(ins.reg(0))
            .imm(ins.imm(1))],
        Mnemonic::La => vec![MicroOp::new(UopKind::Alu(AluOp::Add), pc)
            .dst(ins.reg(0))
            .imm(ins.target(1) as i64)],
        Mnemonic::Mov => vec![MicroOp::new(UopKind::Alu(AluOp::Add), pc)
            .dst(ins.reg(0))
            .src(0, ins.reg(1))],
        Mnemonic::Nop => vec![MicroOp::new(UopKind::Alu(AluOp::Add), pc)],
        Mnemonic::Cmp => vec![MicroOp::new(UopKind::Cmp, pc)
            .dst(Reg::FLAGS)
            .src(0, ins.reg(0))
            .src(1, ins.reg(1))],
        Mnemonic::Cmpi => vec![MicroOp::new(UopKind::Cmp, pc)
            .dst(Reg::FLAGS)
            .src(0, ins.reg(0))
            .imm(ins.imm(1))],
        Mnemonic::Csel(c) => vec![MicroOp::new(UopKind::Csel(c), pc)
            .dst(ins.reg(0))
            .src(0, ins.reg(1))
            .src(1, ins.reg(2))
            .src(2, Reg::FLAGS)],
        Mnemonic::Csetm(c) => vec![MicroOp::new(UopKind::Csel(c), pc)
            .dst(ins.reg(0))
            .src(2, Reg::FLAGS)
            .imm(-1)],
        Mnemonic::Jcc(Cond::Always) => {
            vec![MicroOp::new(UopKind::BrCond(Cond::Always), pc).imm(ins.target(0) as i64)]
        }
        Mnemonic::Jcc(c) => vec![MicroOp::new(UopKind::BrCond(c), pc)
            .src(0, Reg::FLAGS)
            .imm(ins.target(0) as i64)],
        Mnemonic::Jr => vec![MicroOp::new(UopKind::JrIndirect, pc).src(0, ins.reg(0))],
        Mnemonic::Call => {
            let mut push = MicroOp::new(UopKind::Call, pc)
                .dst(Reg::SP)
                .src(0, Reg::SP)
                .imm(ins.target(0) as i64);
            push.size = 8;
            push.store_slot = Some(0);
            let mut data = MicroOp::new(UopKind::Std, pc).imm((pc + INSTR_BYTES) as i64);
            data.size = 8;
            data.store_slot = Some(0);
            vec![push, data]
        }
        Mnemonic::Ret => {
            let mut load = MicroOp::new(UopKind::Lda, pc).dst(Reg::NIP).src(0, Reg::SP);
            load.size = 8;
            let mut jump = MicroOp::new(UopKind::JrIndirect, pc)
                .dst(Reg::SP)
                .src(0, Reg::NIP)
                .src(1, Reg::SP)
                .imm(8);
            jump.is_return = true;
            vec![load, jump]
        }
        Mnemonic::Load(w) => {
            let (base, off) = ins.mem(1);
            let mut u = MicroOp::new(UopKind::Lda, pc)
                .dst(ins.reg(0))
                .src(0, base)
                .imm(off);
            u.size = w.bytes();
            u.forwardable = ins.forwardable;
            vec![u]
        }
        Mnemonic::Store(w) => {
            let (base, off) = ins.mem(1);
            let mut addr = MicroOp::new(UopKind::Sta, pc).src(0, base).imm(off);
            let mut data = MicroOp::new(UopKind::Std, pc).src(0, ins.reg(0));
            for u in [&mut addr, &mut data] {
                u.size = w.bytes();
                u.forwardable = ins.forwardable;
                u.store_slot = Some(0);
            }
            vec![addr, data]
        }
        Mnemonic::Fence => vec![MicroOp::new(UopKind::Fence, pc)],
        Mnemonic::Halt => vec![MicroOp::new(UopKind::Halt, pc)],
    };
    if let Some(last) = uops.last_mut() {
        last.last = true;
    }
    uops
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    fn one(src: &str) -> Vec<MicroOp> {
        let p = assemble(src).unwrap();
        decode(&p.instructions[0])
    }

    #[test]
    fn store_is_sta_std_pair_sharing_a_slot() {
        let u = one("st.8 r3, [r1+0]");
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].kind, UopKind::Sta);
        assert_eq!(u[1].kind, UopKind::Std);
        assert_eq!(u[0].store_slot, u[1].store_slot);
        assert!(u[0].store_slot.is_some());
        assert_eq!(u[0].size, 8);
        assert_eq!(u[1].srcs[0], Reg::new(3));
    }

    #[test]
    fn alu_add_is_single_uop() {
        let u = one("add r1, r2, r3");
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].kind, UopKind::Alu(AluOp::Add));
        assert!(u[0].last);
    }

    #[test]
    fn ret_is_lda_then_jr_consuming_it() {
        let u = one("ret");
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].kind, UopKind::Lda);
        assert_eq!(u[1].kind, UopKind::JrIndirect);
        assert_eq!(u[0].dst, Some(Reg::NIP));
        assert_eq!(u[1].srcs[0], Some(Reg::NIP));
        assert!(u[1].is_return);
    }

    #[test]
    fn fence_has_no_registers() {
        let u = one("fence");
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].kind, UopKind::Fence);
        assert_eq!(u[0].dst, None);
        assert_eq!(u[0].srcs, [None; 3]);
    }

    #[test]
    fn call_pushes_return_address() {
        let p = assemble(".label f\nnop\ncall f").unwrap();
        let u = decode(&p.instructions[1]);
        assert_eq!(u[0].kind, UopKind::Call);
        assert_eq!(u[0].imm, 0);
        assert_eq!(u[1].kind, UopKind::Std);
        assert_eq!(u[1].imm, 8);
        assert_eq!(u[0].store_slot, u[1].store_slot);
    }

    #[test]
    fn writes_to_r0_are_dropped() {
        let u = one("addi r0, r1, 4");
        assert_eq!(u[0].dst, None);
    }

    #[test]
    fn decode_is_deterministic() {
        let p = assemble("ld.4! r2, [r1+8]\nst.2 r2, [sp-8]\nret\ncsetm.b r4\nfence").unwrap();
        for ins in &p.instructions {
            let a = decode(ins);
            assert_eq!(a, decode(ins));
            assert!((1..=2).contains(&a.len()));
        }
    }
}
