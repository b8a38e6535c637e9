use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{self, CtmcModel};

use super::rng::{Rng, Seed};

/// Right-continuous piecewise-constant path stored as its jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial_state: usize,
    jump_times: Vec<f64>,
    post_jump_states: Vec<usize>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(
        initial_state: usize,
        jump_times: Vec<f64>,
        post_jump_states: Vec<usize>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be positive (got {horizon})")));
        }
        if jump_times.len() != post_jump_states.len() {
            return Err(Error::InvalidInput(
                "jump_times and post_jump_states differ in length".into(),
            ));
        }
        let mut prev_t = 0.0;
        let mut prev_s = initial_state;
        for (&t, &s) in jump_times.iter().zip(&post_jump_states) {
            if !(t > prev_t) || t > horizon {
                return Err(Error::InvalidInput(format!(
                    "jump times must be strictly increasing in (0, {horizon}] (got {t} after {prev_t})"
                )));
            }
            if s == prev_s {
                return Err(Error::InvalidInput(format!(
                    "jump at t={t} does not change the state ({s})"
                )));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self {
            initial_state,
            jump_times,
            post_jump_states,
            horizon,
        })
    }

    /// A path that never leaves `state`.
    pub fn constant(state: usize, horizon: f64) -> Result<Self> {
        Self::new(state, Vec::new(), Vec::new(), horizon)
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn post_jump_states(&self) -> &[usize] {
        &self.post_jump_states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Value at time `t`; a jump exactly at `t` is already taken.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial_state
        } else {
            self.post_jump_states[k - 1]
        }
    }

    /// Iterates over `(from, to, time)` for jumps at times `<= t`.
    pub fn jumps_until(&self, t: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.jump_times.partition_point(|&s| s <= t);
        (0..k).map(move |i| {
            let from = if i == 0 {
                self.initial_state
            } else {
                self.post_jump_states[i - 1]
            };
            (from, self.post_jump_states[i], self.jump_times[i])
        })
    }

    /// Iterates over `(state, duration)` holding intervals clipped to `[0, t]`.
    pub fn holding_intervals(&self, t: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let k = self.jump_times.partition_point(|&s| s <= t);
        (0..=k).filter_map(move |i| {
            let start = if i == 0 { 0.0 } else { self.jump_times[i - 1] };
            let end = if i < k { self.jump_times[i] } else { t };
            let state = if i == 0 {
                self.initial_state
            } else {
                self.post_jump_states[i - 1]
            };
            (end > start).then_some((state, end - start))
        })
    }

    /// CSV with `# seed=..` / `# horizon=..` metadata lines, then `time,state`
    /// rows: the initial state at time 0 followed by every jump.
    pub fn write_csv<W: Write>(&self, mut w: W, labels: &[String], seed: Option<Seed>) -> Result<()> {
        if let Some(s) = seed {
            writeln!(w, "# seed={} replica={}", s.seed, s.replica)?;
        }
        writeln!(w, "# horizon={}", self.horizon)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "state"])?;
        let label = |s: usize| labels.get(s).cloned().unwrap_or_else(|| s.to_string());
        out.write_record(["0".to_string(), label(self.initial_state)])?;
        for (&t, &s) in self.jump_times.iter().zip(&self.post_jump_states) {
            out.write_record([t.to_string(), label(s)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Trajectory::write_csv`]. Without a
    /// horizon line the last event time is used (or 1 for a jump-free path).
    pub fn read_csv<R: Read>(r: R, labels: &[String]) -> Result<Self> {
        let mut text = String::new();
        BufReader::new(r).read_to_string(&mut text)?;
        let mut horizon = None;
        for line in text.lines() {
            if let Some(rest) = line.trim().strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some(v) = kv.strip_prefix("horizon=") {
                        horizon = Some(v.parse::<f64>().map_err(|e| {
                            Error::InvalidInput(format!("bad horizon '{v}': {e}"))
                        })?);
                    }
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut events: Vec<(f64, usize)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let t: f64 = rec
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::InvalidInput(format!("row {}: bad time: {e}", i + 1)))?;
            let s = parse_state(rec.get(1).unwrap_or(""), labels)
                .ok_or_else(|| Error::InvalidInput(format!("row {}: unknown state", i + 1)))?;
            events.push((t, s));
        }
        let Some(&(t0, s0)) = events.first() else {
            return Err(Error::InvalidInput("trajectory file has no events".into()));
        };
        if t0 != 0.0 {
            return Err(Error::InvalidInput(format!(
                "first event must be the initial state at time 0 (got t={t0})"
            )));
        }
        let times: Vec<f64> = events[1..].iter().map(|e| e.0).collect();
        let states: Vec<usize> = events[1..].iter().map(|e| e.1).collect();
        let horizon = horizon.unwrap_or_else(|| times.last().copied().unwrap_or(1.0));
        Self::new(s0, times, states, horizon)
    }
}

fn parse_state(field: &str, labels: &[String]) -> Option<usize> {
    labels
        .iter()
        .position(|l| l == field)
        .or_else(|| field.parse::<usize>().ok().filter(|&s| labels.is_empty() || s < labels.len()))
}

/// Symbols `s_i` of a path sampled at `t = i delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    pub delta: f64,
    pub symbols: Vec<usize>,
}

impl DiscretePath {
    pub fn new(delta: f64, symbols: Vec<usize>) -> Self {
        Self { delta, symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Every grid point of the trajectory: `floor(horizon / delta) + 1` symbols.
    pub fn from_trajectory(traj: &Trajectory, delta: f64) -> Result<Self> {
        let m = (traj.horizon() / delta * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
        discretize(traj, delta, m + 1)
    }

    /// One label per line after a `# delta=..` header.
    pub fn write<W: Write>(&self, mut w: W, labels: &[String]) -> Result<()> {
        writeln!(w, "# delta={}", self.delta)?;
        for &s in &self.symbols {
            match labels.get(s) {
                Some(l) => writeln!(w, "{l}")?,
                None => writeln!(w, "{s}")?,
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R, labels: &[String]) -> Result<Self> {
        let mut delta = None;
        let mut symbols = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("delta=") {
                    delta = Some(v.trim().parse::<f64>().map_err(|e| {
                        Error::InvalidInput(format!("bad delta '{v}': {e}"))
                    })?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let s = parse_state(line, labels).ok_or_else(|| {
                Error::InvalidInput(format!("line {}: unknown symbol '{line}'", i + 1))
            })?;
            symbols.push(s);
        }
        let delta = delta.ok_or_else(|| Error::InvalidInput("missing '# delta=' header".into()))?;
        Ok(Self { delta, symbols })
    }
}

/// `symbols[i] = traj(i delta)` for `i = 0..n_symbols`.
///
/// Requires `n_symbols * delta <= horizon`; a short path is an error, never
/// silently truncated.
pub fn discretize(traj: &Trajectory, delta: f64, n_symbols: usize) -> Result<DiscretePath> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive (got {delta})")));
    }
    let last = n_symbols.saturating_sub(1) as f64 * delta;
    if last > traj.horizon() * (1.0 + 1e-12) {
        return Err(Error::InsufficientHorizon {
            needed: last,
            horizon: traj.horizon(),
        });
    }
    let mut symbols = Vec::with_capacity(n_symbols);
    let times = traj.jump_times();
    let mut k = 0;
    let mut state = traj.initial_state();
    for i in 0..n_symbols {
        let t = i as f64 * delta;
        while k < times.len() && times[k] <= t {
            state = traj.post_jump_states()[k];
            k += 1;
        }
        symbols.push(state);
    }
    Ok(DiscretePath { delta, symbols })
}

/// Cumulative rows for inverse-CDF sampling from a row-stochastic matrix.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    n: usize,
    cum: Vec<f64>,
}

impl CumulativeTable {
    pub fn from_matrix(p: &Matrix) -> Self {
        let n = p.ncols();
        let mut cum = Vec::with_capacity(p.nrows() * n);
        for i in 0..p.nrows() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += p[(i, j)];
                cum.push(acc);
            }
            // make the last positive entry absorb rounding
            let row = &mut cum[i * n..(i + 1) * n];
            let total = row[n - 1];
            for v in row.iter_mut() {
                *v /= total;
            }
            if let Some(j) = (0..n).rev().find(|&j| p[(i, j)] > 0.0) {
                for v in row[j..].iter_mut() {
                    *v = 1.0;
                }
            }
        }
        Self { n, cum }
    }

    pub fn from_probs(probs: &[f64]) -> Self {
        Self::from_matrix(&Matrix::from_row_slice(1, probs.len(), probs))
    }

    #[inline]
    pub fn sample(&self, row: usize, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let r = &self.cum[row * self.n..(row + 1) * self.n];
        r.iter().position(|&c| u < c).unwrap_or(self.n - 1)
    }
}

/// Where a simulated path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Stationary,
    State(usize),
}

/// Reusable sampler for one model.
#[derive(Debug, Clone)]
pub struct Simulator {
    escape: Vec<f64>,
    jumps: CumulativeTable,
    stationary: CumulativeTable,
}

impl Simulator {
    pub fn new(model: &CtmcModel) -> Result<Self> {
        let mu = model::stationary_of(model)?;
        Ok(Self {
            escape: model.escape_rates().to_vec(),
            jumps: CumulativeTable::from_matrix(model.jump_matrix()),
            stationary: CumulativeTable::from_probs(mu.probs()),
        })
    }

    pub fn initial_state(&self, initial: Initial, rng: &mut Rng) -> usize {
        match initial {
            Initial::Stationary => self.stationary.sample(0, rng),
            Initial::State(s) => s,
        }
    }

    pub fn holding_time(&self, state: usize, rng: &mut Rng) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / self.escape[state]
    }

    pub fn next_state(&self, state: usize, rng: &mut Rng) -> usize {
        self.jumps.sample(state, rng)
    }

    pub fn run(&self, horizon: f64, initial: Initial, rng: &mut Rng) -> Result<Trajectory> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive (got {horizon})")));
        }
        let x0 = self.initial_state(initial, rng);
        if x0 >= self.escape.len() {
            return Err(Error::InvalidInput(format!("initial state {x0} out of range")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut t = 0.0;
        let mut x = x0;
        loop {
            t += self.holding_time(x, rng);
            if t > horizon {
                break;
            }
            x = self.next_state(x, rng);
            times.push(t);
            states.push(x);
        }
        Ok(Trajectory {
            initial_state: x0,
            jump_times: times,
            post_jump_states: states,
            horizon,
        })
    }
}

/// Exact simulation on `[0, horizon]`: Exponential(c(x)) holding times,
/// jumps drawn from `p(x, .)`.
pub fn simulate(model: &CtmcModel, horizon: f64, rng: &mut Rng, initial: Initial) -> Result<Trajectory> {
    Simulator::new(model)?.run(horizon, initial, rng)
}
