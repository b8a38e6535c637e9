//! Waiting, return, hitting and shadowing times.
//!
//! Index conventions (the target sequence is `Y_0, Y_1, ...` with `Y_i` the
//! value at time `i delta`; `L` is the pattern length):
//!
//! | kind    | pattern                 | match condition                      | k   |
//! |---------|-------------------------|--------------------------------------|-----|
//! | waiting | `X_1..X_n`              | `Y_{k+1}..Y_{k+n}` equals the block  | >=1 |
//! | hitting | given, length `L`       | `Y_{k+1}..Y_{k+L}` equals the block  | >=1 |
//! | return  | `X_0..X_{n-1}`          | `X_k..X_{k+n-1}` equals the block    | >=1 |
//! | shadow  | `g(0), g(d), .., g(nd)` | `X_k..X_{k+n}` equals the block      | >=0 |
//!
//! A scan feeds the matcher from the first index a match may start at
//! (2, 2, 1 and 0 respectively); `scanned` counts only those symbols.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::linalg::Matrix;
use crate::model::{self, CtmcModel};
use crate::pathsim::{discretize, CumulativeTable, DiscretePath, Rng, SymbolSource, Trajectory};

use super::automaton::PrefixAutomaton;
use super::renewal::{RenewalSampler, Start};

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Waiting,
    Return,
    Hitting,
    Shadow,
}

impl MatchKind {
    /// Index of the first target symbol fed to the matcher.
    pub fn first_index(self) -> u64 {
        match self {
            MatchKind::Waiting | MatchKind::Hitting => 2,
            MatchKind::Return => 1,
            MatchKind::Shadow => 0,
        }
    }

    /// Converts "symbols read until the match completed" into `k`.
    pub fn index_from_scan(self, scanned: f64, len: usize) -> f64 {
        let start = self.first_index() as f64 + scanned - len as f64;
        match self {
            MatchKind::Waiting | MatchKind::Hitting => start - 1.0,
            MatchKind::Return | MatchKind::Shadow => start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchOutcome {
    /// The index `k`. Integer valued; stored as `f64` because regenerative
    /// sampling produces values far beyond `u64`.
    Found(f64),
    /// The budget ran out first.
    Censored,
    /// A finite stored target ended first.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub outcome: MatchOutcome,
    /// Target symbols fed to the matcher.
    pub scanned: f64,
}

impl MatchResult {
    pub fn value(&self) -> Option<f64> {
        match self.outcome {
            MatchOutcome::Found(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        self.outcome == MatchOutcome::Censored
    }
}

#[derive(Debug, Clone)]
pub struct MatchQuery {
    automaton: PrefixAutomaton,
    pub kind: MatchKind,
    pub budget: u64,
}

impl MatchQuery {
    pub fn new(pattern: &[usize], alphabet: usize, kind: MatchKind, budget: u64) -> Result<Self> {
        if (budget as u128) < pattern.len() as u128 {
            return Err(Error::InvalidInput(format!(
                "budget {budget} is shorter than the pattern ({})",
                pattern.len()
            )));
        }
        Ok(Self {
            automaton: PrefixAutomaton::new(pattern, alphabet)?,
            kind,
            budget,
        })
    }

    pub fn pattern(&self) -> &[usize] {
        self.automaton.pattern()
    }

    pub fn automaton(&self) -> &PrefixAutomaton {
        &self.automaton
    }

    /// Scans a target given from index 0.
    pub fn run<S: SymbolSource + ?Sized>(&self, target: &mut S) -> MatchResult {
        for _ in 0..self.kind.first_index() {
            if target.next_symbol().is_none() {
                return MatchResult {
                    outcome: MatchOutcome::Exhausted,
                    scanned: 0.0,
                };
            }
        }
        self.scan_from(0, target)
    }

    /// Feeds symbols already positioned at the first scan index, starting
    /// the automaton in `state`.
    pub fn scan_from<S: SymbolSource + ?Sized>(&self, mut state: usize, target: &mut S) -> MatchResult {
        let len = self.automaton.len();
        let mut scanned = 0u64;
        while scanned < self.budget {
            let Some(sym) = target.next_symbol() else {
                return MatchResult {
                    outcome: MatchOutcome::Exhausted,
                    scanned: scanned as f64,
                };
            };
            scanned += 1;
            if sym >= self.automaton.alphabet() {
                state = 0;
                continue;
            }
            state = self.automaton.step(state, sym);
            if self.automaton.is_accepting(state) {
                return MatchResult {
                    outcome: MatchOutcome::Found(self.kind.index_from_scan(scanned as f64, len)),
                    scanned: scanned as f64,
                };
            }
        }
        MatchResult {
            outcome: MatchOutcome::Censored,
            scanned: self.budget as f64,
        }
    }

    /// Fast path over a stored slice (already positioned at the first scan
    /// index).
    pub fn scan_slice(&self, symbols: &[usize]) -> MatchResult {
        let limit = (self.budget as usize).min(symbols.len());
        match self.automaton.feed(0, &symbols[..limit]) {
            Ok(t) => MatchResult {
                outcome: MatchOutcome::Found(self.kind.index_from_scan(t as f64, self.automaton.len())),
                scanned: t as f64,
            },
            Err(_) if limit as u64 == self.budget => MatchResult {
                outcome: MatchOutcome::Censored,
                scanned: self.budget as f64,
            },
            Err(_) => MatchResult {
                outcome: MatchOutcome::Exhausted,
                scanned: limit as f64,
            },
        }
    }
}

fn alphabet_of(path: &DiscretePath, other: &[usize]) -> usize {
    path.symbols.iter().chain(other).copied().max().map_or(1, |m| m + 1)
}

fn slice_from(symbols: &[usize], from: u64) -> &[usize] {
    symbols.get(from as usize..).unwrap_or(&[])
}

/// `W_n(X|Y)` against a stored target path.
pub fn waiting_time(x: &DiscretePath, y: &DiscretePath, n: usize, budget: u64) -> Result<MatchResult> {
    let block = waiting_block(x, n)?;
    let q = MatchQuery::new(block, alphabet_of(y, block), MatchKind::Waiting, budget)?;
    Ok(q.scan_slice(slice_from(&y.symbols, 2)))
}

/// `W_n(X|Y)` against a streamed target given from `Y_0`.
pub fn waiting_time_stream<S: SymbolSource + ?Sized>(
    x: &DiscretePath,
    y: &mut S,
    alphabet: usize,
    n: usize,
    budget: u64,
) -> Result<MatchResult> {
    let block = waiting_block(x, n)?;
    Ok(MatchQuery::new(block, alphabet, MatchKind::Waiting, budget)?.run(y))
}

pub fn waiting_block(x: &DiscretePath, n: usize) -> Result<&[usize]> {
    if n == 0 || x.len() < n + 1 {
        return Err(Error::InvalidInput(format!(
            "waiting time of order {n} needs at least {} symbols of X (got {})",
            n + 1,
            x.len()
        )));
    }
    Ok(&x.symbols[1..=n])
}

/// `R_n(X)`: first recurrence of `X_0..X_{n-1}` within a stored path.
pub fn return_time(path: &DiscretePath, n: usize, budget: u64) -> Result<MatchResult> {
    if n == 0 || path.len() < n {
        return Err(Error::InvalidInput(format!(
            "return time of order {n} needs at least {n} symbols (got {})",
            path.len()
        )));
    }
    let q = MatchQuery::new(&path.symbols[..n], alphabet_of(path, &[]), MatchKind::Return, budget)?;
    Ok(q.scan_slice(slice_from(&path.symbols, 1)))
}

/// `T(pattern)` within a stored target path.
pub fn hitting_time(pattern: &[usize], target: &DiscretePath, budget: u64) -> Result<MatchResult> {
    let q = MatchQuery::new(pattern, alphabet_of(target, pattern), MatchKind::Hitting, budget)?;
    Ok(q.scan_slice(slice_from(&target.symbols, 2)))
}

pub fn hitting_time_stream<S: SymbolSource + ?Sized>(
    pattern: &[usize],
    target: &mut S,
    alphabet: usize,
    budget: u64,
) -> Result<MatchResult> {
    Ok(MatchQuery::new(pattern, alphabet, MatchKind::Hitting, budget)?.run(target))
}

/// The shadowing pattern `g(0), g(delta), ..., g(n delta)`.
pub fn shadow_pattern(gamma: &Trajectory, delta: f64, n: usize) -> Result<Vec<usize>> {
    Ok(discretize(gamma, delta, n + 1)?.symbols)
}

/// `T_n(gamma|X)` within a stored target path.
pub fn shadow_hitting_time(
    gamma: &Trajectory,
    target: &DiscretePath,
    delta: f64,
    n: usize,
    budget: u64,
) -> Result<MatchResult> {
    let pattern = shadow_pattern(gamma, delta, n)?;
    let q = MatchQuery::new(&pattern, alphabet_of(target, &pattern), MatchKind::Shadow, budget)?;
    Ok(q.scan_slice(&target.symbols))
}

/// How a chain-valued target is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Scan when the expected search length is modest, otherwise sample.
    #[default]
    Auto,
    /// Generate and scan symbols one at a time, honouring the budget.
    Scan,
    /// Regenerative sampling; never censors.
    Renewal,
}

/// Expected-length threshold above which `Auto` switches to sampling.
pub const AUTO_SCAN_LIMIT: f64 = 1e6;

/// The delta-discretized chain as a target that is generated on demand.
#[derive(Debug, Clone)]
pub struct ChainTarget {
    p: Matrix,
    mu: Vec<f64>,
    table: CumulativeTable,
    initial: CumulativeTable,
}

impl ChainTarget {
    pub fn new(model: &CtmcModel, delta: f64) -> Result<Self> {
        let p = exact::discretized_transition_matrix(model, delta)?;
        let mu = model::stationary_of(model)?.probs().to_vec();
        Ok(Self::from_matrix(p, mu))
    }

    pub fn from_matrix(p: Matrix, mu: Vec<f64>) -> Self {
        let table = CumulativeTable::from_matrix(&p);
        let initial = CumulativeTable::from_probs(&mu);
        Self { p, mu, table, initial }
    }

    pub fn alphabet(&self) -> usize {
        self.mu.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.mu
    }

    /// `log P(Y_j = b_0, ..., Y_{j+L-1} = b_{L-1})` under stationarity.
    pub fn block_log_prob(&self, block: &[usize]) -> f64 {
        let mut lp = self.mu[block[0]].ln();
        for w in block.windows(2) {
            lp += self.p[(w[0], w[1])].ln();
        }
        lp
    }

    fn use_renewal(&self, mode: TargetMode, pattern: &[usize]) -> bool {
        match mode {
            TargetMode::Scan => false,
            TargetMode::Renewal => true,
            TargetMode::Auto => -self.block_log_prob(pattern) > AUTO_SCAN_LIMIT.ln(),
        }
    }

    /// Streams the stationary chain from index 0.
    pub fn stream<'r>(&'r self, rng: &'r mut Rng) -> ChainStream<'r> {
        ChainStream {
            target: self,
            rng,
            state: None,
        }
    }

    /// Streams the chain continuing after `prev`.
    pub fn stream_after<'r>(&'r self, prev: usize, rng: &'r mut Rng) -> ChainStream<'r> {
        ChainStream {
            target: self,
            rng,
            state: Some(prev),
        }
    }

    /// Searches the stationary chain for `pattern` under `kind`'s
    /// convention. The symbols before the first scan index are never needed:
    /// by stationarity the scanned stream starts in the stationary law.
    pub fn search(
        &self,
        pattern: &[usize],
        kind: MatchKind,
        budget: u64,
        mode: TargetMode,
        rng: &mut Rng,
    ) -> Result<MatchResult> {
        if self.use_renewal(mode, pattern) {
            let sampler = RenewalSampler::new(&self.p, &self.mu, pattern)?;
            let t = sampler.sample(Start::Stationary, rng)?;
            return Ok(MatchResult {
                outcome: MatchOutcome::Found(kind.index_from_scan(t, pattern.len())),
                scanned: t,
            });
        }
        let q = MatchQuery::new(pattern, self.alphabet(), kind, budget)?;
        let mut s = self.stream(rng);
        Ok(q.scan_from(0, &mut s))
    }

    /// `W_n(X|Y)` with `Y` this chain.
    pub fn waiting_time(
        &self,
        x: &DiscretePath,
        n: usize,
        budget: u64,
        mode: TargetMode,
        rng: &mut Rng,
    ) -> Result<MatchResult> {
        self.search(waiting_block(x, n)?, MatchKind::Waiting, budget, mode, rng)
    }

    pub fn hitting_time(
        &self,
        pattern: &[usize],
        budget: u64,
        mode: TargetMode,
        rng: &mut Rng,
    ) -> Result<MatchResult> {
        self.search(pattern, MatchKind::Hitting, budget, mode, rng)
    }

    pub fn shadow_hitting_time(
        &self,
        pattern: &[usize],
        budget: u64,
        mode: TargetMode,
        rng: &mut Rng,
    ) -> Result<MatchResult> {
        self.search(pattern, MatchKind::Shadow, budget, mode, rng)
    }

    /// `R_n(X)` where `prefix` holds the first stored symbols of a path of
    /// this chain (at least `n`) and the rest is generated on demand.
    pub fn return_time(
        &self,
        prefix: &[usize],
        n: usize,
        budget: u64,
        mode: TargetMode,
        rng: &mut Rng,
    ) -> Result<MatchResult> {
        if n == 0 || prefix.len() < n {
            return Err(Error::InvalidInput(format!(
                "return time of order {n} needs {n} stored symbols (got {})",
                prefix.len()
            )));
        }
        let pattern = &prefix[..n];
        let q = MatchQuery::new(pattern, self.alphabet(), MatchKind::Return, budget)?;
        let stored = &prefix[1..];
        let limit = (budget as usize).min(stored.len());
        let aut = q.automaton();
        let state = match aut.feed(0, &stored[..limit]) {
            Ok(t) => {
                return Ok(MatchResult {
                    outcome: MatchOutcome::Found(MatchKind::Return.index_from_scan(t as f64, n)),
                    scanned: t as f64,
                })
            }
            Err(state) => state,
        };
        if limit as u64 == budget {
            return Ok(MatchResult {
                outcome: MatchOutcome::Censored,
                scanned: budget as f64,
            });
        }
        let last = *stored.last().unwrap_or(&prefix[0]);
        let done = limit as f64;
        if self.use_renewal(mode, pattern) {
            let sampler = RenewalSampler::new(&self.p, &self.mu, pattern)?;
            let t = done + sampler.sample(Start::Automaton { state, last }, rng)?;
            return Ok(MatchResult {
                outcome: MatchOutcome::Found(MatchKind::Return.index_from_scan(t, n)),
                scanned: t,
            });
        }
        let rest = MatchQuery::new(pattern, self.alphabet(), MatchKind::Return, budget - limit as u64)?;
        let mut s = self.stream_after(last, rng);
        let r = rest.scan_from(state, &mut s);
        Ok(match r.outcome {
            MatchOutcome::Found(_) => {
                let t = done + r.scanned;
                MatchResult {
                    outcome: MatchOutcome::Found(MatchKind::Return.index_from_scan(t, n)),
                    scanned: t,
                }
            }
            _ => MatchResult {
                outcome: MatchOutcome::Censored,
                scanned: budget as f64,
            },
        })
    }
}

pub struct ChainStream<'r> {
    target: &'r ChainTarget,
    rng: &'r mut Rng,
    state: Option<usize>,
}

impl SymbolSource for ChainStream<'_> {
    #[inline]
    fn next_symbol(&mut self) -> Option<usize> {
        let next = match self.state {
            None => self.target.initial.sample(0, self.rng),
            Some(s) => self.target.table.sample(s, self.rng),
        };
        self.state = Some(next);
        Some(next)
    }
}

/// Draws a block `X_0..X_{len-1}` of the stationary chain.
pub fn sample_block(target: &ChainTarget, len: usize, rng: &mut Rng) -> Vec<usize> {
    let mut s = target.stream(rng);
    (0..len).map(|_| s.next_symbol().unwrap_or(0)).collect()
}

/// A fresh uniform in `[0, 1)`; used for continuity corrections.
pub fn uniform(rng: &mut Rng) -> f64 {
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pathsim::{PathSource, Role, Seed};

    fn path(s: &[usize]) -> DiscretePath {
        DiscretePath::new(0.1, s.to_vec())
    }

    #[test]
    fn waiting_time_offset_by_one() {
        // X_1 X_2 = a b; Y_1 Y_2 Y_3 = c a b  =>  k = 1
        let (a, b, c) = (0, 1, 2);
        let x = path(&[c, a, b]);
        let y = path(&[c, c, a, b, c]);
        let r = waiting_time(&x, &y, 2, 100).unwrap();
        assert_eq!(r.value(), Some(1.0));
    }

    #[test]
    fn waiting_time_constant_sequences() {
        let x = path(&[0; 6]);
        let y = path(&[0; 20]);
        assert_eq!(waiting_time(&x, &y, 4, 100).unwrap().value(), Some(1.0));
    }

    #[test]
    fn return_time_examples() {
        assert_eq!(return_time(&path(&[1; 10]), 3, 100).unwrap().value(), Some(1.0));
        assert_eq!(return_time(&path(&[0, 1, 0, 1, 0, 1]), 2, 100).unwrap().value(), Some(2.0));
    }

    #[test]
    fn hitting_time_examples() {
        // Y_1 = b, Y_2 = a
        let r = hitting_time(&[0], &path(&[1, 1, 0, 1]), 100).unwrap();
        assert_eq!(r.value(), Some(1.0));
        let r = hitting_time(&[2, 2], &path(&[0, 1, 0, 1, 0, 1, 0, 2]), 4).unwrap();
        assert_eq!(r.outcome, MatchOutcome::Censored);
        assert_eq!(r.scanned, 4.0);
        let r = hitting_time(&[2, 2], &path(&[0, 1, 0, 1]), 100).unwrap();
        assert_eq!(r.outcome, MatchOutcome::Exhausted);
    }

    #[test]
    fn shadow_time_can_be_zero() {
        let gamma = Trajectory::new(0, vec![0.15], vec![1], 1.0).unwrap();
        // pattern at delta = 0.1, n = 2: g(0), g(0.1), g(0.2) = 0, 0, 1
        let r = shadow_hitting_time(&gamma, &path(&[0, 0, 1, 1]), 0.1, 2, 100).unwrap();
        assert_eq!(r.value(), Some(0.0));
        let r = shadow_hitting_time(&gamma, &path(&[1, 0, 0, 1]), 0.1, 2, 100).unwrap();
        assert_eq!(r.value(), Some(1.0));
    }

    #[test]
    fn streamed_and_stored_agree() {
        let x = path(&[2, 0, 1, 1]);
        let y = path(&[1, 2, 2, 0, 0, 1, 1, 0, 1, 1, 2]);
        let stored = waiting_time(&x, &y, 3, 1000).unwrap();
        let mut src = PathSource::new(&y, 0);
        let streamed = waiting_time_stream(&x, &mut src, 3, 3, 1000).unwrap();
        assert_eq!(stored, streamed);
    }

    #[test]
    fn budget_smaller_than_pattern_rejected() {
        assert!(MatchQuery::new(&[0, 1, 0], 2, MatchKind::Hitting, 2).is_err());
    }

    #[test]
    fn chain_return_time_uses_stored_prefix_first() {
        let t = ChainTarget::new(&fixtures::two_state(1.0, 2.0), 0.1).unwrap();
        let mut rng = Seed::new(1, 0).rng(Role::X);
        let r = t.return_time(&[0, 1, 0, 1, 1], 2, 100, TargetMode::Scan, &mut rng).unwrap();
        assert_eq!(r.value(), Some(2.0));
    }

    #[test]
    fn chain_return_time_continues_past_prefix() {
        let t = ChainTarget::new(&fixtures::two_state(1.0, 2.0), 0.1).unwrap();
        for mode in [TargetMode::Scan, TargetMode::Renewal] {
            let mut rng = Seed::new(1, 0).rng(Role::X);
            let r = t.return_time(&[0, 1, 1], 3, 1_000_000, mode, &mut rng).unwrap();
            assert!(r.value().unwrap() >= 2.0);
        }
    }
}
