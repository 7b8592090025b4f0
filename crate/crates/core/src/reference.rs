//! In-order, one-instruction-at-a-time interpreter used as the oracle for
//! the out-of-order machine.

use crate::arch::{ArchState, Fault};
use crate::isa::semantics::truncate;
use crate::isa::{alu, compare_flags, Cond, Mnemonic, Program, Reg, INSTR_BYTES};
use crate::memory::{AccessKind, Backing, Tlb, TlbVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Halted,
    Fault(Fault),
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct Interpreter {
    program: Program,
    tlb: Tlb,
    pub regs: [u64; Reg::ARCH_COUNT],
    pub flags: u64,
    pub memory: Backing,
    pub pc: u64,
    pub retired: u64,
}

impl Interpreter {
    pub fn new(program: &Program) -> Interpreter {
        Interpreter {
            tlb: Tlb::new(
                program
                    .page_permissions()
                    .expect("assembled programs have consistent page permissions"),
            ),
            memory: Backing::from_program(program),
            program: program.clone(),
            regs: [0; Reg::ARCH_COUNT],
            flags: 0,
            pc: program.code_base,
            retired: 0,
        }
    }

    pub fn state(&self) -> ArchState {
        ArchState {
            regs: self.regs,
            flags: self.flags,
            memory: self.memory.clone(),
        }
    }

    fn get(&self, r: Reg) -> u64 {
        self.regs[r.index()]
    }

    fn set(&mut self, r: Reg, v: u64) {
        if !r.is_zero() {
            self.regs[r.index()] = v;
        }
    }

    fn load(&self, pc: u64, addr: u64, size: u8) -> Result<u64, Fault> {
        match self.tlb.check(AccessKind::Read, addr, u64::from(size)) {
            TlbVerdict::Ok => Ok(self.memory.read(addr, size)),
            _ => Err(Fault::Read { pc, addr }),
        }
    }

    fn store(&mut self, pc: u64, addr: u64, size: u8, v: u64) -> Result<(), Fault> {
        match self.tlb.check(AccessKind::Write, addr, u64::from(size)) {
            TlbVerdict::Ok => {
                self.memory.write(addr, size, v);
                Ok(())
            }
            _ => Err(Fault::Write { pc, addr }),
        }
    }

    /// Executes one instruction. `Ok(true)` means a `halt` retired.
    pub fn step(&mut self) -> Result<bool, Fault> {
        let pc = self.pc;
        let ins = self.program.fetch(pc).ok_or(Fault::Fetch { pc })?.clone();
        let mut next = pc.wrapping_add(INSTR_BYTES);
        let cond = |c: Cond, flags: u64| c.holds(flags);
        match ins.mnemonic {
            Mnemonic::AluRR(op) => {
                let v = alu(op, self.get(ins.reg(1)), self.get(ins.reg(2)));
                self.set(ins.reg(0), v);
            }
            Mnemonic::AluRI(op) => {
                let v = alu(op, self.get(ins.reg(1)), ins.imm(2) as u64);
                self.set(ins.reg(0), v);
            }
            Mnemonic::Li => self.set(ins.reg(0), ins.imm(1) as u64),
            Mnemonic::La => self.set(ins.reg(0), ins.target(1)),
            Mnemonic::Mov => self.set(ins.reg(0), self.get(ins.reg(1))),
            Mnemonic::Nop | Mnemonic::Fence => {}
            Mnemonic::Cmp => self.flags = compare_flags(self.get(ins.reg(0)), self.get(ins.reg(1))),
            Mnemonic::Cmpi => self.flags = compare_flags(self.get(ins.reg(0)), ins.imm(1) as u64),
            Mnemonic::Csel(c) => {
                let v = if cond(c, self.flags) {
                    self.get(ins.reg(1))
                } else {
                    self.get(ins.reg(2))
                };
                self.set(ins.reg(0), v);
            }
            Mnemonic::Csetm(c) => {
                let v = if cond(c, self.flags) { u64::MAX } else { 0 };
                self.set(ins.reg(0), v);
            }
            Mnemonic::Jcc(c) => {
                if cond(c, self.flags) {
                    next = ins.target(0);
                }
            }
            Mnemonic::Jr => next = self.get(ins.reg(0)),
            Mnemonic::Call => {
                let sp = self.get(Reg::SP).wrapping_sub(8);
                self.store(pc, sp, 8, next)?;
                self.set(Reg::SP, sp);
                next = ins.target(0);
            }
            Mnemonic::Ret => {
                let sp = self.get(Reg::SP);
                next = self.load(pc, sp, 8)?;
                self.set(Reg::SP, sp.wrapping_add(8));
            }
            Mnemonic::Load(w) => {
                let (base, off) = ins.mem(1);
                let addr = self.get(base).wrapping_add(off as u64);
                let v = self.load(pc, addr, w.bytes())?;
                self.set(ins.reg(0), v);
            }
            Mnemonic::Store(w) => {
                let (base, off) = ins.mem(1);
                let addr = self.get(base).wrapping_add(off as u64);
                let v = truncate(self.get(ins.reg(0)), w.bytes());
                self.store(pc, addr, w.bytes(), v)?;
            }
            Mnemonic::Halt => {
                self.retired += 1;
                return Ok(true);
            }
        }
        self.retired += 1;
        self.pc = next;
        Ok(false)
    }

    /// Runs from `pc` until `halt`, a fault, or `max_steps` instructions.
    pub fn run_from(&mut self, pc: u64, max_steps: u64) -> Stop {
        self.pc = pc;
        for _ in 0..max_steps {
            match self.step() {
                Ok(true) => return Stop::Halted,
                Ok(false) => {}
                Err(f) => return Stop::Fault(f),
            }
        }
        Stop::StepLimit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    #[test]
    fn call_ret_and_memory() {
        let src = "\
    li sp, 0x9000
    li r1, 0x1000
    li r2, 41
    call inc
    st.8 r2, [r1+0]
    ld.1 r3, [r1+0]
    halt
.label inc
    addi r2, r2, 1
    ret
.zero 0x8000 rw 0x1000
.zero 0x1000 rw 64
";
        let p = assemble(src).unwrap();
        let mut it = Interpreter::new(&p);
        assert_eq!(it.run_from(0, 100), Stop::Halted);
        assert_eq!(it.regs[2], 42);
        assert_eq!(it.regs[3], 42);
        assert_eq!(it.memory.read(0x1000, 8), 42);
        assert_eq!(it.regs[31], 0x9000);
        assert_eq!(it.memory.read(0x8ff8, 8), 16);
    }

    #[test]
    fn faults() {
        let p = assemble("li r1, 0x5000\nst.8 r1, [r1+0]\nhalt\n.data 0x5000 ro 0").unwrap();
        let mut it = Interpreter::new(&p);
        assert_eq!(
            it.run_from(0, 10),
            Stop::Fault(Fault::Write {
                pc: 4,
                addr: 0x5000
            })
        );
        let p = assemble("ld.8 r1, [r0+64]\nhalt").unwrap();
        assert!(matches!(
            Interpreter::new(&p).run_from(0, 10),
            Stop::Fault(Fault::Read { .. })
        ));
        let p = assemble("jmp 0x100").unwrap();
        assert_eq!(
            Interpreter::new(&p).run_from(0, 10),
            Stop::Fault(Fault::Fetch { pc: 0x100 })
        );
    }

    #[test]
    fn csel_and_csetm() {
        let p = assemble("li r1, 3\nli r2, 16\ncmp r1, r2\ncsetm.b r3\ncsel.ae r4, r1, r2\nhalt")
            .unwrap();
        let mut it = Interpreter::new(&p);
        it.run_from(0, 10);
        assert_eq!(it.regs[3], u64::MAX);
        assert_eq!(it.regs[4], 16);
    }
}
