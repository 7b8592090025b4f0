use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::isa::{Perm, PAGE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TlbVerdict {
    Ok,
    /// Write to a read-only or unmapped page.
    WriteFault,
    /// Read from an unmapped page.
    ReadFault,
}

/// Flat page table: every mapped page is readable, `rw` pages are writable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tlb {
    pages: BTreeMap<u64, Perm>,
}

impl Tlb {
    pub fn new(pages: BTreeMap<u64, Perm>) -> Tlb {
        Tlb { pages }
    }

    pub fn perm(&self, addr: u64) -> Option<Perm> {
        self.pages.get(&(addr / PAGE_SIZE)).copied()
    }

    pub fn map(&mut self, page: u64, perm: Perm) {
        self.pages.insert(page, perm);
    }

    /// Verdict for an access of `size` bytes; every touched page must pass.
    pub fn check(&self, kind: AccessKind, addr: u64, size: u64) -> TlbVerdict {
        let last = addr.wrapping_add(size.max(1) - 1);
        let pages = if last < addr {
            vec![addr / PAGE_SIZE, u64::MAX / PAGE_SIZE]
        } else {
            (addr / PAGE_SIZE..=last / PAGE_SIZE).collect()
        };
        for page in pages {
            match (kind, self.pages.get(&page)) {
                (AccessKind::Read, None) => return TlbVerdict::ReadFault,
                (AccessKind::Write, None) | (AccessKind::Write, Some(Perm::Ro)) => {
                    return TlbVerdict::WriteFault
                }
                _ => {}
            }
        }
        TlbVerdict::Ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tlb() -> Tlb {
        Tlb::new(BTreeMap::from([(1, Perm::Rw), (2, Perm::Ro)]))
    }

    #[test]
    fn verdicts() {
        let t = tlb();
        assert_eq!(t.check(AccessKind::Write, 0x1000, 8), TlbVerdict::Ok);
        assert_eq!(
            t.check(AccessKind::Write, 0x2000, 8),
            TlbVerdict::WriteFault
        );
        assert_eq!(t.check(AccessKind::Read, 0x2000, 8), TlbVerdict::Ok);
        assert_eq!(t.check(AccessKind::Read, 0x3000, 1), TlbVerdict::ReadFault);
        assert_eq!(
            t.check(AccessKind::Write, 0x1ffc, 8),
            TlbVerdict::WriteFault
        );
        assert_eq!(t.check(AccessKind::Read, 0xfff, 2), TlbVerdict::ReadFault);
    }
}
