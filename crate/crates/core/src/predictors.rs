//! Bimodal branch direction predictor and return stack buffer.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Taken,
    NotTaken,
}

impl Direction {
    pub fn from_taken(taken: bool) -> Direction {
        if taken {
            Direction::Taken
        } else {
            Direction::NotTaken
        }
    }

    pub fn is_taken(self) -> bool {
        self == Direction::Taken
    }
}

/// Counter value every slot starts at: weakly not-taken.
pub const COUNTER_INIT: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorState {
    bht: Vec<u8>,
    rsb: VecDeque<u64>,
    rsb_depth: usize,
}

impl PredictorState {
    /// `bht_size` must be a power of two and `rsb_depth` at least 1.
    pub fn new(bht_size: usize, rsb_depth: usize) -> PredictorState {
        assert!(
            bht_size.is_power_of_two(),
            "bht_size must be a power of two"
        );
        assert!(rsb_depth >= 1, "rsb_depth must be at least 1");
        PredictorState {
            bht: vec![COUNTER_INIT; bht_size],
            rsb: VecDeque::with_capacity(rsb_depth),
            rsb_depth,
        }
    }

    fn slot(&self, pc: u64) -> usize {
        ((pc >> 2) as usize) & (self.bht.len() - 1)
    }

    pub fn counter(&self, pc: u64) -> u8 {
        self.bht[self.slot(pc)]
    }

    pub fn predict_branch(&self, pc: u64) -> Direction {
        Direction::from_taken(self.counter(pc) >= 2)
    }

    pub fn train_branch(&mut self, pc: u64, outcome: Direction) {
        let i = self.slot(pc);
        let c = &mut self.bht[i];
        *c = match outcome {
            Direction::Taken => (*c + 1).min(3),
            Direction::NotTaken => c.saturating_sub(1),
        };
    }

    pub fn rsb_push(&mut self, addr: u64) {
        if self.rsb.len() == self.rsb_depth {
            self.rsb.pop_front();
        }
        self.rsb.push_back(addr);
    }

    /// Predicted return target; `None` is the "unknown" underflow sentinel.
    pub fn rsb_pop(&mut self) -> Option<u64> {
        self.rsb.pop_back()
    }

    pub fn rsb_len(&self) -> usize {
        self.rsb.len()
    }

    pub fn rsb_snapshot(&self) -> VecDeque<u64> {
        self.rsb.clone()
    }

    /// Restores the stack captured at a mispredicted branch.
    pub fn rsb_restore(&mut self, snapshot: VecDeque<u64>) {
        self.rsb = snapshot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_state_predicts_not_taken() {
        let p = PredictorState::new(1024, 16);
        assert_eq!(p.predict_branch(0x40), Direction::NotTaken);
        assert_eq!(p.counter(0x40), 1);
    }

    #[test]
    fn two_taken_trainings_flip_prediction() {
        let mut p = PredictorState::new(1024, 16);
        p.train_branch(0x40, Direction::Taken);
        assert_eq!(p.counter(0x40), 2);
        assert_eq!(p.predict_branch(0x40), Direction::Taken);
        p.train_branch(0x40, Direction::Taken);
        assert_eq!(p.counter(0x40), 3);
    }

    #[test]
    fn counters_saturate() {
        let mut p = PredictorState::new(16, 16);
        for _ in 0..5 {
            p.train_branch(8, Direction::Taken);
        }
        assert_eq!(p.counter(8), 3);
        for _ in 0..5 {
            p.train_branch(8, Direction::NotTaken);
        }
        assert_eq!(p.counter(8), 0);
        p.train_branch(8, Direction::Taken);
        p.train_branch(8, Direction::Taken);
        p.train_branch(8, Direction::NotTaken);
        assert_eq!(p.counter(8), 1);
    }

    #[test]
    fn slots_alias_modulo_table_size() {
        let mut p = PredictorState::new(16, 16);
        p.train_branch(0, Direction::Taken);
        assert_eq!(p.counter(16 * 4), 2);
        assert_eq!(p.counter(4), 1);
    }

    #[test]
    fn rsb_is_lifo_with_underflow_sentinel() {
        let mut p = PredictorState::new(16, 16);
        p.rsb_push(0xA);
        p.rsb_push(0xB);
        assert_eq!(p.rsb_pop(), Some(0xB));
        assert_eq!(p.rsb_pop(), Some(0xA));
        assert_eq!(p.rsb_pop(), None);
    }
}
