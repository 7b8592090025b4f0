//! Source-level mitigations applied to an assembled program at a label.
//!
//! Inserted code shifts every later instruction, label, branch target and
//! relocated data word; targets that named the insertion label keep naming
//! it, so control that used to reach the label now runs the new code first.

use thiserror::Error;

use crate::isa::{assemble, Operand, Program, Reg, SegmentContents, INSTR_BYTES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("no label `{0}` in the program")]
    UnknownLabel(String),
    #[error("{0}")]
    Invalid(String),
}

/// Mask that keeps an index inside the next power of two above `region_size`.
pub fn coarse_mask_value(region_size: u64) -> u64 {
    region_size.max(1).next_power_of_two() - 1
}

/// Inserts the instructions in `text` (no labels or data) before the
/// instruction at label `at`.
pub fn insert_at(p: &Program, at: &str, text: &str) -> Result<Program, TransformError> {
    let addr = p
        .label(at)
        .ok_or_else(|| TransformError::UnknownLabel(at.to_string()))?;
    let snippet = assemble(text).map_err(|e| TransformError::Invalid(e.to_string()))?;
    if !snippet.labels.is_empty() || !snippet.data.is_empty() {
        return Err(TransformError::Invalid(
            "inserted code may not define labels or data".into(),
        ));
    }
    let shift = snippet.instructions.len() as u64 * INSTR_BYTES;
    let moved = |t: u64| if t > addr { t + shift } else { t };

    let mut out = p.clone();
    let idx = ((addr - p.code_base) / INSTR_BYTES) as usize;
    let mut inserted = snippet.instructions;
    for (k, ins) in inserted.iter_mut().enumerate() {
        ins.pc = addr + k as u64 * INSTR_BYTES;
    }
    out.instructions.splice(idx..idx, inserted);
    for (i, ins) in out.instructions.iter_mut().enumerate() {
        ins.pc = p.code_base + i as u64 * INSTR_BYTES;
        for op in &mut ins.operands {
            if let Operand::Target(t) = op {
                *t = moved(*t);
            }
        }
    }
    for v in out.labels.values_mut() {
        *v = moved(*v);
    }
    for (&at_addr, label) in &p.relocs {
        let value = out.labels[label];
        let seg = out
            .data
            .iter_mut()
            .find(|s| s.addr <= at_addr && at_addr + 8 <= s.end())
            .expect("validated program");
        if let SegmentContents::Bytes(bytes) = &mut seg.contents {
            let off = (at_addr - seg.addr) as usize;
            bytes[off..off + 8].copy_from_slice(&value.to_le_bytes());
        }
    }
    out.validate().map_err(TransformError::Invalid)?;
    Ok(out)
}

pub fn insert_fence(p: &Program, at: &str) -> Result<Program, TransformError> {
    insert_at(p, at, "fence")
}

/// `index &= next_pow2(region_size) - 1` before the access.
pub fn coarse_mask(
    p: &Program,
    at: &str,
    index: Reg,
    region_size: u64,
) -> Result<Program, TransformError> {
    let mask = coarse_mask_value(region_size);
    insert_at(p, at, &format!("andi {index}, {index}, {mask:#x}"))
}

/// Branch-free `index = index < bound ? index : 0`, using `scratch`.
pub fn exact_mask(
    p: &Program,
    at: &str,
    index: Reg,
    bound: Reg,
    scratch: Reg,
) -> Result<Program, TransformError> {
    if scratch == index || scratch == bound {
        return Err(TransformError::Invalid(format!(
            "scratch register {scratch} overlaps the operands"
        )));
    }
    insert_at(
        p,
        at,
        &format!("cmp {index}, {bound}\ncsetm.b {scratch}\nand {index}, {index}, {scratch}"),
    )
}

/// `count` nops at `at`.
pub fn pad(p: &Program, at: &str, count: usize) -> Result<Program, TransformError> {
    if count == 0 {
        return Ok(p.clone());
    }
    insert_at(p, at, &"nop\n".repeat(count))
}
