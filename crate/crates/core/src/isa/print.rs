use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Instruction, Mnemonic, Operand, Perm, Program, SegmentContents};

fn perm_name(p: Perm) -> &'static str {
    match p {
        Perm::Rw => "rw",
        Perm::Ro => "ro",
    }
}

fn mnemonic_text(m: Mnemonic) -> String {
    match m {
        Mnemonic::AluRR(op) => op.name().to_string(),
        Mnemonic::AluRI(op) => format!("{}i", op.name()),
        Mnemonic::Li => "li".into(),
        Mnemonic::La => "la".into(),
        Mnemonic::Mov => "mov".into(),
        Mnemonic::Nop => "nop".into(),
        Mnemonic::Cmp => "cmp".into(),
        Mnemonic::Cmpi => "cmpi".into(),
        Mnemonic::Csel(c) => format!("csel.{}", c.suffix()),
        Mnemonic::Csetm(c) => format!("csetm.{}", c.suffix()),
        Mnemonic::Jcc(c) => format!("j{}", c.suffix()),
        Mnemonic::Jr => "jr".into(),
        Mnemonic::Call => "call".into(),
        Mnemonic::Ret => "ret".into(),
        Mnemonic::Load(w) => format!("ld.{}", w.bytes()),
        Mnemonic::Store(w) => format!("st.{}", w.bytes()),
        Mnemonic::Fence => "fence".into(),
        Mnemonic::Halt => "halt".into(),
    }
}

fn signed(v: i64) -> String {
    if v < 0 {
        format!("-{}", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

/// One instruction in assembly syntax; `names` maps code addresses to the
/// label used for branch targets.
pub fn render_instruction(ins: &Instruction, names: &BTreeMap<u64, &str>) -> String {
    let mut s = mnemonic_text(ins.mnemonic);
    if ins.forwardable {
        s.push('!');
    }
    for (i, op) in ins.operands.iter().enumerate() {
        s.push_str(if i == 0 { " " } else { ", " });
        match *op {
            Operand::Reg(r) => write!(s, "{r}").unwrap(),
            Operand::Imm(v) => s.push_str(&signed(v)),
            Operand::Mem { base, offset } => {
                if offset < 0 {
                    write!(s, "[{base}-{}]", offset.unsigned_abs()).unwrap()
                } else {
                    write!(s, "[{base}+{offset}]").unwrap()
                }
            }
            Operand::Target(t) => match names.get(&t) {
                Some(name) => s.push_str(name),
                None => write!(s, "{t:#x}").unwrap(),
            },
        }
    }
    s
}

/// Address to label map, first label name wins when several share an address.
pub fn label_names(p: &Program) -> BTreeMap<u64, &str> {
    let mut names = BTreeMap::new();
    for (name, &addr) in &p.labels {
        names.entry(addr).or_insert(name.as_str());
    }
    names
}

pub fn render(p: &Program) -> String {
    let names = label_names(p);
    let mut by_addr: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
    for (name, &addr) in &p.labels {
        by_addr.entry(addr).or_default().push(name);
    }
    let mut out = String::new();
    if p.code_base != 0 {
        writeln!(out, ".org {:#x}", p.code_base).unwrap();
    }
    let emit_labels = |out: &mut String, addr: u64| {
        for name in by_addr.get(&addr).into_iter().flatten() {
            writeln!(out, ".label {name}").unwrap();
        }
    };
    for ins in &p.instructions {
        emit_labels(&mut out, ins.pc);
        writeln!(out, "    {}", render_instruction(ins, &names)).unwrap();
    }
    emit_labels(&mut out, p.code_end());
    for seg in &p.data {
        match &seg.contents {
            SegmentContents::Bytes(bytes)
                if p.relocs.range(seg.addr..seg.end()).next().is_some() =>
            {
                write!(out, ".quad {:#x} {}", seg.addr, perm_name(seg.perm)).unwrap();
                for (i, chunk) in bytes.chunks(8).enumerate() {
                    let addr = seg.addr + i as u64 * 8;
                    match p.relocs.get(&addr) {
                        Some(label) => write!(out, " {label}").unwrap(),
                        None => {
                            let v = u64::from_le_bytes(chunk.try_into().unwrap());
                            write!(out, " {v:#x}").unwrap()
                        }
                    }
                }
                out.push('\n');
            }
            SegmentContents::Bytes(bytes) => {
                write!(out, ".data {:#x} {}", seg.addr, perm_name(seg.perm)).unwrap();
                for b in bytes {
                    write!(out, " {b}").unwrap();
                }
                out.push('\n');
            }
            SegmentContents::Zero(n) => {
                writeln!(out, ".zero {:#x} {} {n}", seg.addr, perm_name(seg.perm)).unwrap()
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use crate::isa::assemble;

    #[test]
    fn round_trip_small_program() {
        let src = "\
.org 0x40
.label start
    li r1, -5
    ld.8! r2, [sp-16]
    st.1 r2, [r3+7]
    cmp r1, r2
    jbe start
    csel.ge r4, r5, r6
    csetm.b r7
    la r8, end
    call start
    jr r8
    ret
    fence
    halt
.label end
.data 0x1000 ro 1 2 3
.quad 0x3000 ro 5 end start
.zero 0x2000 rw 128
";
        let p = assemble(src).unwrap();
        let text = p.disassemble();
        assert_eq!(assemble(&text).unwrap(), p);
    }
}
