/// Set of unresolved branch tags a micro-op is control-dependent on.
///
/// Tags are branch sequence numbers; the set is kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SpecColors(Vec<u64>);

impl SpecColors {
    pub fn new() -> SpecColors {
        SpecColors(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, tag: u64) -> bool {
        self.0.binary_search(&tag).is_ok()
    }

    pub fn insert(&mut self, tag: u64) {
        if let Err(i) = self.0.binary_search(&tag) {
            self.0.insert(i, tag);
        }
    }

    /// Returns whether the tag was present.
    pub fn remove(&mut self, tag: u64) -> bool {
        match self.0.binary_search(&tag) {
            Ok(i) => {
                self.0.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    pub fn oldest(&self) -> Option<u64> {
        self.0.first().copied()
    }
}

impl FromIterator<u64> for SpecColors {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut v: Vec<u64> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SpecColors(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_remove_keeps_order() {
        let mut c: SpecColors = [9, 3, 5, 3].into_iter().collect();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![3, 5, 9]);
        c.insert(4);
        assert!(c.contains(4));
        assert!(c.remove(3));
        assert!(!c.remove(3));
        assert_eq!(c.oldest(), Some(4));
        assert_eq!(c.len(), 3);
    }
}
