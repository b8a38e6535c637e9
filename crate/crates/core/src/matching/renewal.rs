//! Exact sampling of the first time a stationary finite Markov chain
//! completes a given pattern, without reading the symbols one by one.
//!
//! The chain and the prefix automaton run jointly on nodes `(q, last
//! symbol)`. One node `r = (0, y*)` is used as a regeneration point: the
//! passage time splits into a directly simulated run up to the first visit of
//! `r`, a geometric number of excursions that return to `r`, and one last
//! excursion that completes the pattern. The escape probability of an
//! excursion, the moments of a returning excursion and the harmonic function
//! needed to simulate the final excursion are computed by eliminating nodes
//! one at a time. Every quantity there is a sum of products of nonnegative
//! numbers, so nothing is lost to cancellation even when the escape
//! probability is far below machine epsilon.
//!
//! The returning excursions are simulated one by one while there are at most
//! [`MAX_SIMULATED_RETURNS`] of them. Beyond that their total length is drawn
//! from the normal approximation with the exact mean and variance; its
//! relative error is of order `1/sqrt(count)`.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pathsim::{CumulativeTable, Rng};

use super::automaton::PrefixAutomaton;

pub const MAX_SIMULATED_RETURNS: f64 = 1000.0;
const MAX_DIRECT_STEPS: u64 = 1 << 40;

/// Where the scanned symbol stream starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// First scanned symbol drawn from the stationary law.
    Stationary,
    /// First scanned symbol drawn from `P(prev, .)`.
    After(usize),
    /// Automaton already in `state` with `last` the most recent symbol.
    Automaton { state: usize, last: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Gf {
    /// `W(1)`, `W'(1)`, `W''(1)` of a generating function in the step count.
    a: f64,
    b: f64,
    c: f64,
}

impl Gf {
    fn step(p: f64) -> Self {
        Gf { a: p, b: p, c: 0.0 }
    }

    fn is_zero(&self) -> bool {
        self.a == 0.0
    }

    fn mul(self, o: Gf) -> Gf {
        Gf {
            a: self.a * o.a,
            b: self.b * o.a + self.a * o.b,
            c: self.c * o.a + 2.0 * self.b * o.b + self.a * o.c,
        }
    }

    fn add(&mut self, o: Gf) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }

    /// `1 / (1 - h)` given the loop `h` and the leak `1 - h(1)` computed
    /// without subtraction.
    fn geometric(h: Gf, leak: f64) -> Gf {
        let s = 1.0 / leak;
        Gf {
            a: s,
            b: h.b * s * s,
            c: h.c * s * s + 2.0 * h.b * h.b * s * s * s,
        }
    }
}

/// Precomputed first-passage structure for one pattern and one chain.
#[derive(Debug, Clone)]
pub struct RenewalSampler {
    automaton: PrefixAutomaton,
    p: Vec<f64>,
    table: CumulativeTable,
    initial: CumulativeTable,
    alphabet: usize,
    regen: usize,
    /// `P_node(pattern completes before visiting r)`, per node.
    h: Vec<f64>,
    escape: f64,
    return_mean: f64,
    return_var: f64,
}

impl RenewalSampler {
    /// `p` is the one-step transition matrix (strictly positive entries are
    /// not required, but the regeneration node must be reachable), `mu` its
    /// stationary law.
    pub fn new(p: &Matrix, mu: &[f64], pattern: &[usize]) -> Result<Self> {
        let a = p.nrows();
        if p.ncols() != a || mu.len() != a {
            return Err(Error::InvalidInput("transition matrix and law sizes differ".into()));
        }
        let automaton = PrefixAutomaton::new(pattern, a)?;
        let len = automaton.len();
        let regen = (0..a)
            .filter(|&y| y != pattern[0])
            .max_by(|&x, &y| mu[x].total_cmp(&mu[y]))
            .ok_or_else(|| Error::InvalidInput("need at least two symbols".into()))?;
        let pv: Vec<f64> = p.iter().copied().collect::<Vec<_>>();
        // nalgebra is column-major; store row-major
        let mut prow = vec![0.0; a * a];
        for i in 0..a {
            for j in 0..a {
                prow[i * a + j] = pv[j * a + i];
            }
        }
        let mut s = Self {
            automaton,
            p: prow,
            table: CumulativeTable::from_matrix(p),
            initial: CumulativeTable::from_probs(mu),
            alphabet: a,
            regen,
            h: Vec::new(),
            escape: 0.0,
            return_mean: 0.0,
            return_var: 0.0,
        };
        s.solve(len)?;
        Ok(s)
    }

    pub fn pattern(&self) -> &[usize] {
        self.automaton.pattern()
    }

    /// Probability that an excursion from the regeneration node completes the
    /// pattern before coming back.
    pub fn escape_probability(&self) -> f64 {
        self.escape
    }

    fn num_nodes(&self) -> usize {
        self.alphabet + self.automaton.len() - 1
    }

    /// Node id of automaton state `q < len` with last symbol `last`.
    #[inline]
    fn node(&self, q: usize, last: usize) -> usize {
        if q == 0 {
            last
        } else {
            self.alphabet + q - 1
        }
    }

    #[inline]
    fn node_state(&self, id: usize) -> (usize, usize) {
        if id < self.alphabet {
            (0, id)
        } else {
            let q = id - self.alphabet + 1;
            (q, self.automaton.pattern()[q - 1])
        }
    }

    /// Successor of `node` on symbol `z`; `None` means the pattern completed.
    #[inline]
    fn advance(&self, node: usize, z: usize) -> Option<usize> {
        let (q, _) = self.node_state(node);
        let q2 = self.automaton.step(q, z);
        if self.automaton.is_accepting(q2) {
            None
        } else {
            Some(self.node(q2, z))
        }
    }

    fn solve(&mut self, len: usize) -> Result<()> {
        let n = self.num_nodes();
        let abs = n;
        let ret = n + 1;
        let width = n + 2;
        let a = self.alphabet;
        let mut w = vec![Gf::default(); n * width];
        for node in 0..n {
            let (_, last) = self.node_state(node);
            for z in 0..a {
                let pz = self.p[last * a + z];
                if pz == 0.0 {
                    continue;
                }
                let target = match self.advance(node, z) {
                    None => abs,
                    Some(t) if t == self.regen => ret,
                    Some(t) => t,
                };
                w[node * width + target].add(Gf::step(pz));
            }
        }
        // Elimination order: partial-match nodes from the longest prefix
        // down, then the zero-state nodes other than r.
        let mut order: Vec<usize> = (a..n).rev().collect();
        order.extend((0..a).filter(|&y| y != self.regen));
        let mut alive = vec![true; n];
        let mut leaks = vec![0.0; n];
        for &k in &order {
            alive[k] = false;
            let row_k = k * width;
            let leak: f64 = (0..width)
                .filter(|&j| j != k)
                .map(|j| w[row_k + j].a)
                .sum();
            if !(leak > 0.0) {
                return Err(Error::Numeric(format!(
                    "pattern automaton node {k} cannot leave itself"
                )));
            }
            leaks[k] = leak;
            let loop_k = Gf::geometric(w[row_k + k], leak);
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                let wik = w[i * width + k];
                if wik.is_zero() {
                    continue;
                }
                w[i * width + k] = Gf::default();
                let via = wik.mul(loop_k);
                for j in 0..width {
                    if j == k {
                        continue;
                    }
                    let wkj = w[row_k + j];
                    if wkj.is_zero() {
                        continue;
                    }
                    w[i * width + j].add(via.mul(wkj));
                }
            }
        }
        let r = self.regen;
        let to_abs = w[r * width + abs];
        let to_ret = w[r * width + ret];
        let total = to_abs.a + to_ret.a;
        let escape = to_abs.a / total;
        if !(escape > 0.0) {
            return Err(Error::Numeric(format!(
                "escape probability underflowed for a pattern of length {len}"
            )));
        }
        self.escape = escape;
        if to_ret.a > 0.0 {
            let m1 = to_ret.b / to_ret.a;
            let m2 = to_ret.c / to_ret.a + m1;
            self.return_mean = m1;
            self.return_var = (m2 - m1 * m1).max(0.0);
        }
        // Back-substitute h in reverse elimination order. Rows of eliminated
        // nodes still hold their exits at elimination time.
        let mut h = vec![0.0; width];
        h[abs] = 1.0;
        h[ret] = 0.0;
        for &k in order.iter().rev() {
            let row_k = k * width;
            let mut acc = 0.0;
            for j in 0..width {
                if j != k {
                    acc += w[row_k + j].a * h[j];
                }
            }
            h[k] = acc / leaks[k];
        }
        h[r] = 0.0;
        self.h = h;
        Ok(())
    }

    /// Number of symbols read until the pattern is first completed.
    pub fn sample(&self, start: Start, rng: &mut Rng) -> Result<f64> {
        let mut steps: u64 = 0;
        let mut node = match start {
            Start::Stationary => {
                let z = self.initial.sample(0, rng);
                steps += 1;
                match self.automaton_after(0, z) {
                    None => return Ok(1.0),
                    Some(nd) => nd,
                }
            }
            Start::After(prev) => self.node(0, prev),
            Start::Automaton { state, last } => {
                if state >= self.automaton.len() {
                    return Err(Error::InvalidInput(format!(
                        "automaton state {state} is not below pattern length"
                    )));
                }
                if state > 0 && self.automaton.pattern()[state - 1] != last {
                    return Err(Error::InvalidInput(
                        "last symbol inconsistent with automaton state".into(),
                    ));
                }
                self.node(state, last)
            }
        };
        // Run directly until r or completion. A start at r counts as a visit.
        while node != self.regen {
            let (_, last) = self.node_state(node);
            let z = self.table.sample(last, rng);
            steps += 1;
            match self.advance(node, z) {
                None => return Ok(steps as f64),
                Some(nd) => node = nd,
            }
            if steps > MAX_DIRECT_STEPS {
                return Err(Error::Numeric("direct run to the regeneration node too long".into()));
            }
        }
        let mut total = steps as f64;
        let returns = self.returns(rng);
        if returns <= MAX_SIMULATED_RETURNS {
            for _ in 0..returns as u64 {
                total += self.returning_excursion(rng)? as f64;
            }
        } else {
            let z: f64 = StandardNormal.sample(rng);
            let mean = returns * self.return_mean;
            let sd = (returns * self.return_var).sqrt();
            total += (mean + sd * z).max(returns);
        }
        total += self.final_excursion(rng)? as f64;
        Ok(total)
    }

    fn automaton_after(&self, q: usize, z: usize) -> Option<usize> {
        let q2 = self.automaton.step(q, z);
        if self.automaton.is_accepting(q2) {
            None
        } else {
            Some(self.node(q2, z))
        }
    }

    /// Geometric number of returning excursions before the escaping one.
    fn returns(&self, rng: &mut Rng) -> f64 {
        if self.escape >= 1.0 {
            return 0.0;
        }
        let e: f64 = Exp1.sample(rng);
        (e / -(-self.escape).ln_1p()).floor()
    }

    /// Length of an excursion from r conditioned to come back before the
    /// pattern completes (rejection sampling).
    fn returning_excursion(&self, rng: &mut Rng) -> Result<u64> {
        loop {
            let mut node = self.regen;
            let mut steps = 0u64;
            let ok = loop {
                let (_, last) = self.node_state(node);
                let z = self.table.sample(last, rng);
                steps += 1;
                match self.advance(node, z) {
                    None => break false,
                    Some(nd) if nd == self.regen => break true,
                    Some(nd) => node = nd,
                }
                if steps > MAX_DIRECT_STEPS {
                    return Err(Error::Numeric("returning excursion too long".into()));
                }
            };
            if ok {
                return Ok(steps);
            }
        }
    }

    /// Length of an excursion from r conditioned to complete the pattern
    /// before coming back (Doob h-transform).
    fn final_excursion(&self, rng: &mut Rng) -> Result<u64> {
        let a = self.alphabet;
        let mut node = self.regen;
        let mut steps = 0u64;
        let mut weights = vec![0.0; a];
        loop {
            let (_, last) = self.node_state(node);
            let mut total = 0.0;
            for (z, w) in weights.iter_mut().enumerate() {
                let hz = match self.advance(node, z) {
                    None => 1.0,
                    Some(nd) => self.h[nd],
                };
                *w = self.p[last * a + z] * hz;
                total += *w;
            }
            if !(total > 0.0) {
                return Err(Error::Numeric("h-transform has no admissible move".into()));
            }
            let mut u = rng.random::<f64>() * total;
            let mut z = a - 1;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    z = i;
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            steps += 1;
            match self.advance(node, z) {
                None => return Ok(steps),
                Some(nd) => node = nd,
            }
            if steps > MAX_DIRECT_STEPS {
                return Err(Error::Numeric("final excursion too long".into()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::discretized_transition_matrix;
    use crate::fixtures;
    use crate::model::stationary_of;
    use crate::pathsim::{MarkovSource, Role, Seed, SymbolSource, Initial};

    fn scan_time(aut: &PrefixAutomaton, src: &mut impl SymbolSource) -> u64 {
        let mut q = 0;
        let mut t = 0;
        loop {
            q = aut.step(q, src.next_symbol().unwrap());
            t += 1;
            if aut.is_accepting(q) {
                return t;
            }
        }
    }

    #[test]
    fn escape_probability_of_single_symbol() {
        // pattern [1] on a two-symbol chain: r = (0, 0); escaping means the
        // very next symbol is 1.
        let p = Matrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let mu = [4.0 / 7.0, 3.0 / 7.0];
        let s = RenewalSampler::new(&p, &mu, &[1]).unwrap();
        assert!((s.escape_probability() - 0.3).abs() < 1e-15);
        // returning excursions have length exactly 1
        assert!((s.return_mean - 1.0).abs() < 1e-15);
        assert!(s.return_var.abs() < 1e-12);
    }

    #[test]
    fn mean_matches_scan_for_short_pattern() {
        let m = fixtures::biased_cycle(0.9);
        let d = 0.3;
        let p = discretized_transition_matrix(&m, d).unwrap();
        let mu = stationary_of(&m).unwrap();
        let pattern = [0, 0, 1, 1, 2];
        let s = RenewalSampler::new(&p, mu.probs(), &pattern).unwrap();
        let aut = PrefixAutomaton::new(&pattern, 3).unwrap();
        let reps = 4000;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..reps {
            let seed = Seed::new(5, i);
            a += s.sample(Start::Stationary, &mut seed.rng(Role::Target)).unwrap();
            let mut rng = seed.rng(Role::Aux);
            let mut src = MarkovSource::new(&m, d, Initial::Stationary, &mut rng).unwrap();
            b += scan_time(&aut, &mut src) as f64;
        }
        let (a, b) = (a / reps as f64, b / reps as f64);
        assert!((a - b).abs() / b < 0.08, "renewal {a} vs scan {b}");
    }

    #[test]
    fn automaton_start_is_checked() {
        let p = Matrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let s = RenewalSampler::new(&p, &[4.0 / 7.0, 3.0 / 7.0], &[1, 1, 0]).unwrap();
        let mut rng = Seed::new(1, 1).rng(Role::Target);
        assert!(s.sample(Start::Automaton { state: 2, last: 0 }, &mut rng).is_err());
        assert!(s.sample(Start::Automaton { state: 3, last: 1 }, &mut rng).is_err());
        assert!(s.sample(Start::Automaton { state: 2, last: 1 }, &mut rng).unwrap() >= 1.0);
    }

    #[test]
    fn long_pattern_escape_is_tiny_but_positive() {
        let m = fixtures::two_state(1.0, 2.0);
        let p = discretized_transition_matrix(&m, 0.1).unwrap();
        let mu = stationary_of(&m).unwrap();
        let pattern: Vec<usize> = (0..400).map(|i| (i / 7) % 2).collect();
        let s = RenewalSampler::new(&p, mu.probs(), &pattern).unwrap();
        assert!(s.escape_probability() > 0.0 && s.escape_probability() < 1e-30);
        let t = s.sample(Start::Stationary, &mut Seed::new(2, 0).rng(Role::Target)).unwrap();
        assert!(t.is_finite() && t > 1e20);
    }
}
