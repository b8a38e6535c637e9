//! Symbol streams that a matcher can pull from one symbol at a time.

use crate::error::Result;
use crate::exact;
use crate::model::CtmcModel;

use super::rng::Rng;
use super::trajectory::{CumulativeTable, DiscretePath, Initial, Simulator};

pub trait SymbolSource {
    /// Next symbol, or `None` once a finite source is exhausted.
    fn next_symbol(&mut self) -> Option<usize>;
}

/// Reads a stored path from a starting index.
#[derive(Debug, Clone)]
pub struct PathSource<'a> {
    symbols: &'a [usize],
    pos: usize,
}

impl<'a> PathSource<'a> {
    pub fn new(path: &'a DiscretePath, start: usize) -> Self {
        Self::from_slice(&path.symbols, start)
    }

    pub fn from_slice(symbols: &'a [usize], start: usize) -> Self {
        Self { symbols, pos: start }
    }
}

impl SymbolSource for PathSource<'_> {
    #[inline]
    fn next_symbol(&mut self) -> Option<usize> {
        let s = self.symbols.get(self.pos).copied();
        self.pos += 1;
        s
    }
}

/// Simulates a CTMC lazily and reports its value at `0, delta, 2 delta, ...`.
pub struct LazyDiscretizer<'r> {
    sim: Simulator,
    rng: &'r mut Rng,
    delta: f64,
    index: u64,
    state: usize,
    next_jump: f64,
}

impl<'r> LazyDiscretizer<'r> {
    pub fn new(model: &CtmcModel, delta: f64, initial: Initial, rng: &'r mut Rng) -> Result<Self> {
        let sim = Simulator::new(model)?;
        let state = sim.initial_state(initial, rng);
        let next_jump = sim.holding_time(state, rng);
        Ok(Self {
            sim,
            rng,
            delta,
            index: 0,
            state,
            next_jump,
        })
    }
}

impl SymbolSource for LazyDiscretizer<'_> {
    fn next_symbol(&mut self) -> Option<usize> {
        let t = self.index as f64 * self.delta;
        while self.next_jump <= t {
            self.state = self.sim.next_state(self.state, self.rng);
            self.next_jump += self.sim.holding_time(self.state, self.rng);
        }
        self.index += 1;
        Some(self.state)
    }
}

/// The delta-discretized chain sampled directly from `exp(delta L)`; equal in
/// law to [`LazyDiscretizer`] and cheaper per symbol.
pub struct MarkovSource<'r> {
    table: CumulativeTable,
    rng: &'r mut Rng,
    state: Option<usize>,
    initial: CumulativeTable,
}

impl<'r> MarkovSource<'r> {
    pub fn new(model: &CtmcModel, delta: f64, initial: Initial, rng: &'r mut Rng) -> Result<Self> {
        let p = exact::discretized_transition_matrix(model, delta)?;
        let mu = crate::model::stationary_of(model)?;
        let initial_probs = match initial {
            Initial::Stationary => mu.probs().to_vec(),
            Initial::State(s) => (0..model.num_states()).map(|x| if x == s { 1.0 } else { 0.0 }).collect(),
        };
        Ok(Self {
            table: CumulativeTable::from_matrix(&p),
            rng,
            state: None,
            initial: CumulativeTable::from_probs(&initial_probs),
        })
    }

    /// Continues the chain from a known current state: the next symbol drawn
    /// is the successor of `prev`.
    pub fn after(model: &CtmcModel, delta: f64, prev: usize, rng: &'r mut Rng) -> Result<Self> {
        let mut s = Self::new(model, delta, Initial::State(prev), rng)?;
        s.state = Some(prev);
        Ok(s)
    }
}

impl SymbolSource for MarkovSource<'_> {
    #[inline]
    fn next_symbol(&mut self) -> Option<usize> {
        let next = match self.state {
            None => self.initial.sample(0, self.rng),
            Some(s) => self.table.sample(s, self.rng),
        };
        self.state = Some(next);
        Some(next)
    }
}
