use rand::Rng;
use serde::{Deserialize, Serialize};

/// A choice of exponents `n ∈ {0,1}` for every factor slot of a linear-forms
/// family. The slot order is fixed by the family that produced the pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentPattern {
    bits: Vec<u8>,
}

impl ExponentPattern {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        ExponentPattern { bits }
    }

    pub fn all_ones(slots: usize) -> Self {
        ExponentPattern { bits: vec![1; slots] }
    }

    pub fn all_zeros(slots: usize) -> Self {
        ExponentPattern { bits: vec![0; slots] }
    }

    /// The pattern whose slot `i` is bit `i` of `index`.
    pub fn from_index(slots: usize, index: u64) -> Self {
        ExponentPattern {
            bits: (0..slots).map(|i| ((index >> i) & 1) as u8).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(slots: usize, rng: &mut R) -> Self {
        ExponentPattern {
            bits: (0..slots).map(|_| rng.gen_range(0..=1u8)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, slot: usize) -> bool {
        self.bits[slot] == 1
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}
