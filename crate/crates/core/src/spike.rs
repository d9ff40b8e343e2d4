//! Spike vectors: the only message exchanged between populations.

use std::fmt;

/// Index of a population (sensory or circuit) inside a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PopulationId(pub usize);

/// Which neurons of one population fired at timestep `t` (1 timestep = 1 ms).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SpikeVector {
    pub population: PopulationId,
    pub t: u64,
    fired: Vec<usize>,
}

impl SpikeVector {
    pub fn empty(population: PopulationId, t: u64) -> Self {
        SpikeVector {
            population,
            t,
            fired: Vec::new(),
        }
    }

    /// Builds a spike vector, sorting and deduplicating the indices.
    pub fn new(population: PopulationId, t: u64, mut fired: Vec<usize>) -> Self {
        fired.sort_unstable();
        fired.dedup();
        SpikeVector {
            population,
            t,
            fired,
        }
    }

    pub fn fired(&self) -> &[usize] {
        &self.fired
    }

    pub fn len(&self) -> usize {
        self.fired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fired.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.fired.binary_search(&index).is_ok()
    }

    /// Checks that every index is below `size`.
    pub fn fits(&self, size: usize) -> bool {
        self.fired.last().is_none_or(|&last| last < size)
    }

    /// Reuses the allocation for a new timestep. Indices must be pushed in
    /// increasing order.
    pub(crate) fn reset(&mut self, t: u64) {
        self.t = t;
        self.fired.clear();
    }

    pub(crate) fn push(&mut self, index: usize) {
        debug_assert!(self.fired.last().is_none_or(|&last| last < index));
        self.fired.push(index);
    }
}

impl fmt::Display for SpikeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}@{}{:?}", self.population.0, self.t, self.fired)
    }
}
