use std::collections::BTreeMap;

use thiserror::Error;

use super::{
    AluOp, Cond, DataSegment, Instruction, Mnemonic, Operand, OperandKind, Perm, Program, Reg,
    SegmentContents, Width, INSTR_BYTES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub column: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("misaligned directive: {0}")]
    Misaligned(String),
    #[error("bad operands for `{mnemonic}`: {detail}")]
    Operands { mnemonic: String, detail: String },
    #[error("invalid layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(u64),
    LBracket,
    RBracket,
    Plus,
    Minus,
    Comma,
    Bang,
}

fn tokenize(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, AsmError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            ',' => Some(Tok::Comma),
            '!' => Some(Tok::Bang),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, col));
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
            let v = parse_number(&s).ok_or_else(|| AsmError {
                line,
                column: col,
                kind: AsmErrorKind::Syntax(format!("bad number `{s}`")),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
            {
                i += 1;
            }
            out.push((Tok::Word(chars[start..i].iter().collect()), col));
        } else {
            return Err(AsmError {
                line,
                column: col,
                kind: AsmErrorKind::Syntax(format!("unexpected character `{c}`")),
            });
        }
    }
    Ok(out)
}

fn parse_number(s: &str) -> Option<u64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        s.parse().ok()
    }
}

pub(crate) fn parse_reg(s: &str) -> Option<Reg> {
    if s == "sp" {
        return Some(Reg::SP);
    }
    let n: u8 = s.strip_prefix('r')?.parse().ok()?;
    if s.len() > 2 && s.as_bytes()[1] == b'0' {
        return None;
    }
    Reg::new(n)
}

fn parse_mnemonic(s: &str) -> Option<Mnemonic> {
    let m = match s {
        "li" => Mnemonic::Li,
        "la" => Mnemonic::La,
        "mov" => Mnemonic::Mov,
        "nop" => Mnemonic::Nop,
        "cmp" => Mnemonic::Cmp,
        "cmpi" => Mnemonic::Cmpi,
        "jmp" => Mnemonic::Jcc(Cond::Always),
        "jr" => Mnemonic::Jr,
        "call" => Mnemonic::Call,
        "ret" => Mnemonic::Ret,
        "fence" => Mnemonic::Fence,
        "halt" => Mnemonic::Halt,
        _ => {
            if let Some(op) = AluOp::ALL.into_iter().find(|op| op.name() == s) {
                return Some(Mnemonic::AluRR(op));
            }
            if let Some(op) = s
                .strip_suffix('i')
                .and_then(|base| AluOp::ALL.into_iter().find(|op| op.name() == base))
            {
                return Some(Mnemonic::AluRI(op));
            }
            if let Some(w) = s.strip_prefix("ld.") {
                return Width::from_bytes(w.parse().ok()?).map(Mnemonic::Load);
            }
            if let Some(w) = s.strip_prefix("st.") {
                return Width::from_bytes(w.parse().ok()?).map(Mnemonic::Store);
            }
            if let Some(c) = s.strip_prefix("csel.") {
                return conditional(c).map(Mnemonic::Csel);
            }
            if let Some(c) = s.strip_prefix("csetm.") {
                return conditional(c).map(Mnemonic::Csetm);
            }
            if let Some(c) = s.strip_prefix('j') {
                return conditional(c).map(Mnemonic::Jcc);
            }
            return None;
        }
    };
    Some(m)
}

fn conditional(s: &str) -> Option<Cond> {
    Cond::from_suffix(s).filter(|c| *c != Cond::Always)
}

#[derive(Debug)]
enum RawOperand {
    Reg(Reg),
    Imm(i64),
    Mem { base: Reg, offset: i64 },
    Label(String),
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> AsmError {
        AsmError {
            line: self.line,
            column: self.col(),
            kind: AsmErrorKind::Syntax(msg.into()),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> Result<(), AsmError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing tokens"))
        }
    }

    fn signed(&mut self) -> Result<i64, AsmError> {
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.next() {
            Some(Tok::Num(v)) => Ok(if neg {
                (v as i64).wrapping_neg()
            } else {
                v as i64
            }),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a number"))
            }
        }
    }

    fn unsigned(&mut self) -> Result<u64, AsmError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(v),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a number"))
            }
        }
    }

    fn word(&mut self, what: &str) -> Result<String, AsmError> {
        match self.next() {
            Some(Tok::Word(w)) => Ok(w),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn operand(&mut self) -> Result<RawOperand, AsmError> {
        match self.peek() {
            Some(Tok::LBracket) => {
                self.pos += 1;
                let col = self.col();
                let name = self.word("a base register")?;
                let base = parse_reg(&name).ok_or(AsmError {
                    line: self.line,
                    column: col,
                    kind: AsmErrorKind::Syntax(format!("`{name}` is not a register")),
                })?;
                let offset = match self.peek() {
                    Some(Tok::Plus) => {
                        self.pos += 1;
                        self.signed()?
                    }
                    Some(Tok::Minus) => self.signed()?,
                    _ => 0,
                };
                match self.next() {
                    Some(Tok::RBracket) => Ok(RawOperand::Mem { base, offset }),
                    _ => {
                        self.pos -= 1;
                        Err(self.err("expected `]`"))
                    }
                }
            }
            Some(Tok::Num(_)) | Some(Tok::Minus) => Ok(RawOperand::Imm(self.signed()?)),
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(match parse_reg(&w) {
                    Some(r) => RawOperand::Reg(r),
                    None => RawOperand::Label(w),
                })
            }
            _ => Err(self.err("expected an operand")),
        }
    }
}

struct PendingInstr {
    line: usize,
    column: usize,
    mnemonic: Mnemonic,
    text: String,
    operands: Vec<RawOperand>,
    forwardable: bool,
}

enum PendingQuad {
    Value(u64),
    Label(String, usize),
}

struct PendingSegment {
    line: usize,
    addr: u64,
    perm: Perm,
    body: PendingBody,
}

enum PendingBody {
    Bytes(Vec<u8>),
    Quads(Vec<PendingQuad>),
    Zero(u64),
}

fn parse_perm(c: &mut Cursor<'_>) -> Result<Perm, AsmError> {
    let col = c.col();
    match c.word("a permission (rw or ro)")?.as_str() {
        "rw" => Ok(Perm::Rw),
        "ro" => Ok(Perm::Ro),
        other => Err(AsmError {
            line: c.line,
            column: col,
            kind: AsmErrorKind::Syntax(format!("unknown permission `{other}`")),
        }),
    }
}

/// Assembles toy assembly text into a [`Program`] with all labels resolved.
pub fn assemble(source: &str) -> Result<Program, AsmError> {
    let mut code_base: Option<u64> = None;
    let mut pending: Vec<PendingInstr> = Vec::new();
    let mut labels: BTreeMap<String, u64> = BTreeMap::new();
    let mut label_slots: Vec<(String, usize)> = Vec::new();
    let mut segments: Vec<PendingSegment> = Vec::new();

    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno + 1;
        let text = raw.split(';').next().unwrap_or("");
        let toks = tokenize(text, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor {
            toks: &toks,
            pos: 0,
            line,
            end_col: text.len() + 1,
        };
        let head_col = c.col();
        let head = match c.next() {
            Some(Tok::Word(w)) => w,
            _ => {
                return Err(AsmError {
                    line,
                    column: head_col,
                    kind: AsmErrorKind::Syntax("expected a mnemonic or directive".into()),
                })
            }
        };
        if let Some(directive) = head.strip_prefix('.') {
            match directive {
                "label" => {
                    let col = c.col();
                    let name = c.word("a label name")?;
                    if parse_reg(&name).is_some() || name.contains('.') {
                        return Err(AsmError {
                            line,
                            column: col,
                            kind: AsmErrorKind::Syntax(format!("`{name}` is not a valid label")),
                        });
                    }
                    c.expect_end()?;
                    if label_slots.iter().any(|(n, _)| *n == name) {
                        return Err(AsmError {
                            line,
                            column: col,
                            kind: AsmErrorKind::DuplicateLabel(name),
                        });
                    }
                    label_slots.push((name, pending.len()));
                }
                "org" => {
                    let addr = c.unsigned()?;
                    c.expect_end()?;
                    if !pending.is_empty() || !label_slots.is_empty() || code_base.is_some() {
                        return Err(AsmError {
                            line,
                            column: head_col,
                            kind: AsmErrorKind::Syntax(
                                ".org must appear once, before any code or label".into(),
                            ),
                        });
                    }
                    if addr % INSTR_BYTES != 0 {
                        return Err(AsmError {
                            line,
                            column: head_col,
                            kind: AsmErrorKind::Misaligned(format!(
                                ".org {addr:#x} is not 4-byte aligned"
                            )),
                        });
                    }
                    code_base = Some(addr);
                }
                "data" => {
                    let addr = c.unsigned()?;
                    let perm = parse_perm(&mut c)?;
                    let mut bytes = Vec::new();
                    while !c.at_end() {
                        let col = c.col();
                        let v = c.unsigned()?;
                        let b = u8::try_from(v).map_err(|_| AsmError {
                            line,
                            column: col,
                            kind: AsmErrorKind::Syntax(format!("byte value {v} out of range")),
                        })?;
                        bytes.push(b);
                    }
                    segments.push(PendingSegment {
                        line,
                        addr,
                        perm,
                        body: PendingBody::Bytes(bytes),
                    });
                }
                "quad" => {
                    let addr = c.unsigned()?;
                    if addr % 8 != 0 {
                        return Err(AsmError {
                            line,
                            column: head_col,
                            kind: AsmErrorKind::Misaligned(format!(
                                ".quad at {addr:#x} is not 8-byte aligned"
                            )),
                        });
                    }
                    let perm = parse_perm(&mut c)?;
                    let mut quads = Vec::new();
                    while !c.at_end() {
                        let col = c.col();
                        match c.operand()? {
                            RawOperand::Imm(v) => quads.push(PendingQuad::Value(v as u64)),
                            RawOperand::Label(l) => quads.push(PendingQuad::Label(l, col)),
                            _ => {
                                return Err(AsmError {
                                    line,
                                    column: col,
                                    kind: AsmErrorKind::Syntax(
                                        ".quad takes numbers or labels".into(),
                                    ),
                                })
                            }
                        }
                    }
                    segments.push(PendingSegment {
                        line,
                        addr,
                        perm,
                        body: PendingBody::Quads(quads),
                    });
                }
                "zero" => {
                    let addr = c.unsigned()?;
                    let perm = parse_perm(&mut c)?;
                    let len = c.unsigned()?;
                    c.expect_end()?;
                    segments.push(PendingSegment {
                        line,
                        addr,
                        perm,
                        body: PendingBody::Zero(len),
                    });
                }
                other => {
                    return Err(AsmError {
                        line,
                        column: head_col,
                        kind: AsmErrorKind::Syntax(format!("unknown directive `.{other}`")),
                    })
                }
            }
            continue;
        }

        let mnemonic = parse_mnemonic(&head).ok_or_else(|| AsmError {
            line,
            column: head_col,
            kind: AsmErrorKind::UnknownMnemonic(head.clone()),
        })?;
        let forwardable = if c.peek() == Some(&Tok::Bang) {
            c.pos += 1;
            true
        } else {
            false
        };
        if forwardable && !mnemonic.is_memory() {
            return Err(AsmError {
                line,
                column: head_col,
                kind: AsmErrorKind::Operands {
                    mnemonic: head,
                    detail: "only loads and stores may carry the forwardable mark".into(),
                },
            });
        }
        let mut operands = Vec::new();
        if !c.at_end() {
            loop {
                operands.push(c.operand()?);
                match c.next() {
                    None => break,
                    Some(Tok::Comma) => {}
                    Some(_) => {
                        c.pos -= 1;
                        return Err(c.err("expected `,`"));
                    }
                }
            }
        }
        pending.push(PendingInstr {
            line,
            column: head_col,
            mnemonic,
            text: head,
            operands,
            forwardable,
        });
    }

    let code_base = code_base.unwrap_or(0);
    for (name, idx) in label_slots {
        labels.insert(name, code_base + idx as u64 * INSTR_BYTES);
    }

    let mut instructions = Vec::with_capacity(pending.len());
    for (i, p) in pending.into_iter().enumerate() {
        let pc = code_base + i as u64 * INSTR_BYTES;
        let sig = p.mnemonic.signature();
        let bad = |detail: String| AsmError {
            line: p.line,
            column: p.column,
            kind: AsmErrorKind::Operands {
                mnemonic: p.text.clone(),
                detail,
            },
        };
        if sig.len() != p.operands.len() {
            return Err(bad(format!(
                "expected {} operand(s), found {}",
                sig.len(),
                p.operands.len()
            )));
        }
        let mut operands = Vec::with_capacity(sig.len());
        for (k, raw) in sig.iter().zip(p.operands) {
            let op = match (k, raw) {
                (OperandKind::Reg, RawOperand::Reg(r)) => Operand::Reg(r),
                (OperandKind::Imm, RawOperand::Imm(v)) => Operand::Imm(v),
                (OperandKind::Mem, RawOperand::Mem { base, offset }) => {
                    Operand::Mem { base, offset }
                }
                (OperandKind::Target, RawOperand::Imm(v)) => Operand::Target(v as u64),
                (OperandKind::Target, RawOperand::Label(l)) => match labels.get(&l) {
                    Some(&a) => Operand::Target(a),
                    None => {
                        return Err(AsmError {
                            line: p.line,
                            column: p.column,
                            kind: AsmErrorKind::UndefinedLabel(l),
                        })
                    }
                },
                (k, raw) => return Err(bad(format!("expected {k:?}, found {raw:?}"))),
            };
            operands.push(op);
        }
        instructions.push(Instruction {
            pc,
            mnemonic: p.mnemonic,
            operands,
            forwardable: p.forwardable,
        });
    }

    let mut data = Vec::with_capacity(segments.len());
    let mut relocs = BTreeMap::new();
    for seg in segments {
        let contents = match seg.body {
            PendingBody::Bytes(b) => SegmentContents::Bytes(b),
            PendingBody::Zero(n) => SegmentContents::Zero(n),
            PendingBody::Quads(qs) => {
                let mut bytes = Vec::with_capacity(qs.len() * 8);
                for q in qs {
                    let v = match q {
                        PendingQuad::Value(v) => v,
                        PendingQuad::Label(l, column) => {
                            let v = *labels.get(&l).ok_or_else(|| AsmError {
                                line: seg.line,
                                column,
                                kind: AsmErrorKind::UndefinedLabel(l.clone()),
                            })?;
                            relocs.insert(seg.addr + bytes.len() as u64, l);
                            v
                        }
                    };
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                SegmentContents::Bytes(bytes)
            }
        };
        data.push(DataSegment {
            addr: seg.addr,
            perm: seg.perm,
            contents,
        });
    }

    let program = Program {
        code_base,
        instructions,
        labels,
        data,
        relocs,
    };
    program.validate().map_err(|e| AsmError {
        line: 0,
        column: 0,
        kind: AsmErrorKind::Layout(e),
    })?;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_with_size_suffix() {
        let p = assemble("st.8 r3, [r1+0]").unwrap();
        assert_eq!(p.instructions.len(), 1);
        let ins = &p.instructions[0];
        assert_eq!(ins.mnemonic, Mnemonic::Store(Width::B8));
        assert_eq!(ins.operands[0], Operand::Reg(Reg::new(3).unwrap()));
        assert_eq!(
            ins.operands[1],
            Operand::Mem {
                base: Reg::new(1).unwrap(),
                offset: 0
            }
        );
        assert!(!ins.forwardable);
    }

    #[test]
    fn forwardable_mark() {
        let p = assemble("ld.8! r2, [r1+0]").unwrap();
        assert!(p.instructions[0].forwardable);
        assert_eq!(p.instructions[0].mnemonic, Mnemonic::Load(Width::B8));
    }

    #[test]
    fn forwardable_rejected_on_alu() {
        let e = assemble("add! r1, r2, r3").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Operands { .. }));
    }

    #[test]
    fn undefined_label() {
        let e = assemble("cmp r1, r2\njbe done").unwrap_err();
        assert_eq!(e.kind, AsmErrorKind::UndefinedLabel("done".into()));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn unknown_mnemonic() {
        let e = assemble("nop\n  frob r1").unwrap_err();
        assert_eq!(e.kind, AsmErrorKind::UnknownMnemonic("frob".into()));
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn syntax_error_has_position() {
        let e = assemble("ld.8 r1, [r2+8").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Syntax(_)));
        assert_eq!(e.line, 1);
        assert!(e.column > 1);
    }

    #[test]
    fn misaligned_directives() {
        let e = assemble(".org 0x102\nnop").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Misaligned(_)));
        let e = assemble(".quad 0x1004 rw 1").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Misaligned(_)));
    }

    #[test]
    fn duplicate_label() {
        let e = assemble(".label a\nnop\n.label a\nnop").unwrap_err();
        assert_eq!(e.kind, AsmErrorKind::DuplicateLabel("a".into()));
    }

    #[test]
    fn labels_and_org() {
        let src = ".org 0x100\n.label top\nnop\njmp top\n.label end";
        let p = assemble(src).unwrap();
        assert_eq!(p.label("top"), Some(0x100));
        assert_eq!(p.label("end"), Some(0x108));
        assert_eq!(p.instructions[1].operands[0], Operand::Target(0x100));
    }

    #[test]
    fn data_directives() {
        let src =
            ".label f\nret\n.data 0x1000 rw 1 2 0xff\n.quad 0x2000 ro 7 f\n.zero 0x3000 rw 64";
        let p = assemble(src).unwrap();
        assert_eq!(p.data.len(), 3);
        assert_eq!(p.data[0].contents, SegmentContents::Bytes(vec![1, 2, 255]));
        assert_eq!(p.data[1].len(), 16);
        assert_eq!(p.data[1].perm, Perm::Ro);
        assert_eq!(p.data[2].contents, SegmentContents::Zero(64));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let e = assemble(".zero 0x1000 rw 64\n.data 0x1020 rw 1").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Layout(_)));
    }

    #[test]
    fn conflicting_page_permissions_rejected() {
        let e = assemble(".zero 0x1000 rw 8\n.zero 0x1800 ro 8").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Layout(_)));
    }

    #[test]
    fn negative_offsets_and_immediates() {
        let p = assemble("st.4 r1, [sp-16]\naddi r2, r2, -1\nli r3, 0xffffffffffffffff").unwrap();
        assert_eq!(
            p.instructions[0].operands[1],
            Operand::Mem {
                base: Reg::SP,
                offset: -16
            }
        );
        assert_eq!(p.instructions[1].operands[2], Operand::Imm(-1));
        assert_eq!(p.instructions[2].operands[1], Operand::Imm(-1));
    }

    #[test]
    fn assemble_is_deterministic() {
        let src = ".label a\ncmp r1, r2\njae a\ncsel.b r3, r4, r5\ncsetm.ae r6\nhalt";
        assert_eq!(assemble(src).unwrap(), assemble(src).unwrap());
    }
}
