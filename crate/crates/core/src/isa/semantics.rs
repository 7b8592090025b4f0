use super::decode::AluOp;

/// Branch / select condition evaluated against the flags produced by `cmp`.
///
/// `B`/`Be`/`A`/`Ae` are unsigned, `L`/`Le`/`G`/`Ge` signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cond {
    Always,
    E,
    Ne,
    B,
    Be,
    A,
    Ae,
    L,
    Le,
    G,
    Ge,
}

const EQ: u64 = 1;
const ULT: u64 = 2;
const SLT: u64 = 4;

/// Flags word for `cmp a, b`.
pub fn compare_flags(a: u64, b: u64) -> u64 {
    let mut f = 0;
    if a == b {
        f |= EQ;
    }
    if a < b {
        f |= ULT;
    }
    if (a as i64) < (b as i64) {
        f |= SLT;
    }
    f
}

impl Cond {
    pub const ALL: [Cond; 11] = [
        Cond::Always,
        Cond::E,
        Cond::Ne,
        Cond::B,
        Cond::Be,
        Cond::A,
        Cond::Ae,
        Cond::L,
        Cond::Le,
        Cond::G,
        Cond::Ge,
    ];

    pub fn holds(self, flags: u64) -> bool {
        let eq = flags & EQ != 0;
        let ult = flags & ULT != 0;
        let slt = flags & SLT != 0;
        match self {
            Cond::Always => true,
            Cond::E => eq,
            Cond::Ne => !eq,
            Cond::B => ult,
            Cond::Be => ult || eq,
            Cond::A => !ult && !eq,
            Cond::Ae => !ult,
            Cond::L => slt,
            Cond::Le => slt || eq,
            Cond::G => !slt && !eq,
            Cond::Ge => !slt,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Cond::Always => "mp",
            Cond::E => "e",
            Cond::Ne => "ne",
            Cond::B => "b",
            Cond::Be => "be",
            Cond::A => "a",
            Cond::Ae => "ae",
            Cond::L => "l",
            Cond::Le => "le",
            Cond::G => "g",
            Cond::Ge => "ge",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Cond> {
        Cond::ALL.into_iter().find(|c| c.suffix() == s)
    }
}

pub fn alu(op: AluOp, a: u64, b: u64) -> u64 {
    match op {
        AluOp::Add => a.wrapping_add(b),
        AluOp::Sub => a.wrapping_sub(b),
        AluOp::And => a & b,
        AluOp::Or => a | b,
        AluOp::Xor => a ^ b,
        AluOp::Shl => a.wrapping_shl((b & 63) as u32),
        AluOp::Shr => a.wrapping_shr((b & 63) as u32),
        AluOp::Sar => ((a as i64).wrapping_shr((b & 63) as u32)) as u64,
        AluOp::Mul => a.wrapping_mul(b),
    }
}

/// Truncates `value` to the low `size` bytes.
pub fn truncate(value: u64, size: u8) -> u64 {
    if size >= 8 {
        value
    } else {
        value & ((1u64 << (size as u32 * 8)) - 1)
    }
}
