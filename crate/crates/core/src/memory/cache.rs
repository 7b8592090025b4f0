pub const LINE_BYTES: u64 = 64;

pub fn line_of(addr: u64) -> u64 {
    addr / LINE_BYTES
}

/// Tag-only set-associative cache; data always comes from backing memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cache {
    sets: Vec<Vec<Option<u64>>>,
    next_victim: Vec<usize>,
}

impl Cache {
    pub fn new(sets: usize, ways: usize) -> Cache {
        assert!(sets.is_power_of_two() && ways > 0);
        Cache {
            sets: vec![vec![None; ways]; sets],
            next_victim: vec![0; sets],
        }
    }

    fn set_of(&self, line: u64) -> usize {
        (line as usize) & (self.sets.len() - 1)
    }

    pub fn contains(&self, line: u64) -> bool {
        self.sets[self.set_of(line)].contains(&Some(line))
    }

    /// Installs `line`, evicting round-robin when the set is full. Returns
    /// the evicted line, if any.
    pub fn install(&mut self, line: u64) -> Option<u64> {
        let s = self.set_of(line);
        let set = &mut self.sets[s];
        if set.contains(&Some(line)) {
            return None;
        }
        if let Some(free) = set.iter().position(Option::is_none) {
            set[free] = Some(line);
            return None;
        }
        let way = self.next_victim[s];
        self.next_victim[s] = (way + 1) % set.len();
        set[way].replace(line)
    }

    pub fn invalidate(&mut self, line: u64) {
        let s = self.set_of(line);
        for way in &mut self.sets[s] {
            if *way == Some(line) {
                *way = None;
            }
        }
    }

    pub fn resident_lines(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.sets.iter().flatten().flatten().copied().collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_eviction() {
        let mut c = Cache::new(4, 2);
        assert_eq!(c.install(0), None);
        assert_eq!(c.install(4), None);
        assert_eq!(c.install(8), Some(0));
        assert_eq!(c.install(12), Some(4));
        assert!(c.contains(8) && c.contains(12));
        assert!(!c.contains(0));
        c.invalidate(8);
        assert!(!c.contains(8));
        assert_eq!(c.install(16), None);
    }
}
