//! Finite-state continuous-time Markov chains.
//!
//! A chain is given by strictly positive escape rates `c(x)` and a jump
//! matrix `p(x, y)` with zero diagonal; its generator has off-diagonal
//! entries `c(x) p(x, y)` and diagonal `-c(x)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Serialized form of a model: `{"states": [...], "escape_rates": [...],
/// "jump_matrix": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub states: Vec<String>,
    pub escape_rates: Vec<f64>,
    pub jump_matrix: Vec<Vec<f64>>,
}

/// A validated, irreducible CTMC on a finite ordered state space.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcModel {
    states: Vec<String>,
    escape_rates: Vec<f64>,
    jump_matrix: Matrix,
}

impl CtmcModel {
    pub fn new(states: Vec<String>, escape_rates: Vec<f64>, jump_matrix: Matrix) -> Result<Self> {
        let model = Self {
            states,
            escape_rates,
            jump_matrix,
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds a model from rows of the jump matrix, labelling states `0..n`.
    pub fn from_rows(escape_rates: &[f64], jump_rows: &[&[f64]]) -> Result<Self> {
        let n = escape_rates.len();
        if jump_rows.len() != n || jump_rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!(
                "jump matrix must be {n}x{n} to match {n} escape rates"
            )));
        }
        let flat: Vec<f64> = jump_rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(
            (0..n).map(|i| i.to_string()).collect(),
            escape_rates.to_vec(),
            Matrix::from_row_slice(n, n, &flat),
        )
    }

    /// Builds a model from a rate matrix `r(x, y) = c(x) p(x, y)` (diagonal ignored).
    pub fn from_rate_matrix(states: Vec<String>, rates: &Matrix) -> Result<Self> {
        let n = rates.nrows();
        let mut escape = vec![0.0; n];
        let mut jump = Matrix::zeros(n, n);
        for x in 0..n {
            escape[x] = (0..n).filter(|&y| y != x).map(|y| rates[(x, y)]).sum();
            if escape[x] > 0.0 {
                for y in (0..n).filter(|&y| y != x) {
                    jump[(x, y)] = rates[(x, y)] / escape[x];
                }
            }
        }
        Self::new(states, escape, jump)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_label(&self, x: usize) -> &str {
        &self.states[x]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn escape_rates(&self) -> &[f64] {
        &self.escape_rates
    }

    pub fn escape_rate(&self, x: usize) -> f64 {
        self.escape_rates[x]
    }

    pub fn jump_matrix(&self) -> &Matrix {
        &self.jump_matrix
    }

    pub fn jump_prob(&self, x: usize, y: usize) -> f64 {
        self.jump_matrix[(x, y)]
    }

    /// Transition rate `c(x) p(x, y)`.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        if x == y {
            0.0
        } else {
            self.escape_rates[x] * self.jump_matrix[(x, y)]
        }
    }

    /// Returns a copy with every escape rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.escape_rates.iter().map(|c| c * factor).collect(),
            self.jump_matrix.clone(),
        )
    }

    pub fn spec(&self) -> ModelSpec {
        let n = self.num_states();
        ModelSpec {
            states: self.states.clone(),
            escape_rates: self.escape_rates.clone(),
            jump_matrix: (0..n)
                .map(|x| (0..n).map(|y| self.jump_matrix[(x, y)]).collect())
                .collect(),
        }
    }

    /// Checks every model invariant and reports the first one violated.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!(
                "state space needs at least 2 states (got {n})"
            )));
        }
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                return Err(Error::InvalidModel(format!("duplicate state label '{s}'")));
            }
        }
        if self.escape_rates.len() != n {
            return Err(Error::InvalidModel(format!(
                "escape_rates has {} entries for {n} states",
                self.escape_rates.len()
            )));
        }
        if self.jump_matrix.nrows() != n || self.jump_matrix.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "jump_matrix is {}x{}, expected {n}x{n}",
                self.jump_matrix.nrows(),
                self.jump_matrix.ncols()
            )));
        }
        for (x, &c) in self.escape_rates.iter().enumerate() {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "escape rate of state '{}' must be strictly positive and finite (got {c})",
                    self.states[x]
                )));
            }
        }
        for x in 0..n {
            if self.jump_matrix[(x, x)] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "jump matrix diagonal p({0},{0}) must be 0 (got {1})",
                    self.states[x],
                    self.jump_matrix[(x, x)]
                )));
            }
            let mut sum = 0.0;
            for y in 0..n {
                let v = self.jump_matrix[(x, y)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "jump matrix entry p({},{}) must be a nonnegative number (got {v})",
                        self.states[x], self.states[y]
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "jump matrix row {x} ('{}') sums to {sum}, expected 1 (row-stochastic)",
                    self.states[x]
                )));
            }
        }
        if let Some((from, to)) = self.first_unreachable_pair() {
            return Err(Error::InvalidModel(format!(
                "chain is not irreducible: state '{}' cannot reach state '{}'",
                self.states[from], self.states[to]
            )));
        }
        Ok(())
    }

    fn first_unreachable_pair(&self) -> Option<(usize, usize)> {
        let n = self.num_states();
        let reach = |forward: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(x) = queue.pop_front() {
                for y in 0..n {
                    let edge = if forward {
                        self.jump_matrix[(x, y)] > 0.0
                    } else {
                        self.jump_matrix[(y, x)] > 0.0
                    };
                    if edge && !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            seen
        };
        if let Some(y) = reach(true).iter().position(|s| !s) {
            return Some((0, y));
        }
        reach(false).iter().position(|s| !s).map(|x| (x, 0))
    }
}

impl TryFrom<ModelSpec> for CtmcModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        let n = spec.states.len();
        if spec.jump_matrix.len() != n {
            return Err(Error::InvalidModel(format!(
                "jump_matrix has {} rows for {n} states",
                spec.jump_matrix.len()
            )));
        }
        for (x, row) in spec.jump_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "jump_matrix row {x} has {} entries for {n} states",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = spec.jump_matrix.iter().flatten().copied().collect();
        CtmcModel::new(spec.states, spec.escape_rates, Matrix::from_row_slice(n, n, &flat))
    }
}

/// Dense generator `L` of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator(Matrix);

impl Generator {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn num_states(&self) -> usize {
        self.0.nrows()
    }
}

pub fn build_generator(model: &CtmcModel) -> Generator {
    let n = model.num_states();
    let mut l = Matrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if x != y {
                l[(x, y)] = model.rate(x, y);
            }
        }
        l[(x, x)] = -model.escape_rate(x);
    }
    Generator(l)
}

/// Stationary law of an irreducible chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDist(Vec<f64>);

impl StationaryDist {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.0[x]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Solves `mu L = 0`, `sum(mu) = 1` by replacing one balance equation with the
/// normalization and factoring the square system with partial pivoting.
pub fn stationary_distribution(gen: &Generator) -> Result<StationaryDist> {
    let l = gen.matrix();
    let n = l.nrows();
    let mut a = l.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = linalg::lu_solve(&a, &b)?;
    let total: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|v| v / total).collect();
    if let Some(x) = mu.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Numeric(format!(
            "stationary solve produced non-positive mass {} at state {x}",
            mu[x]
        )));
    }
    for y in 0..n {
        let r: f64 = (0..n).map(|x| mu[x] * l[(x, y)]).sum();
        if r.abs() > STATIONARY_RESIDUAL_TOL {
            return Err(Error::Numeric(format!(
                "stationary residual (mu L)_{y} = {r:e} exceeds {STATIONARY_RESIDUAL_TOL:e}"
            )));
        }
    }
    Ok(StationaryDist(mu))
}

/// Convenience: generator then stationary law.
pub fn stationary_of(model: &CtmcModel) -> Result<StationaryDist> {
    stationary_distribution(&build_generator(model))
}

/// Time reversal: rates `c(y) p(y, x) mu(y) / mu(x)`, re-factored into escape
/// rates and a jump matrix.
pub fn reverse(model: &CtmcModel, mu: &StationaryDist) -> Result<CtmcModel> {
    let n = model.num_states();
    if mu.len() != n {
        return Err(Error::InvalidInput(format!(
            "stationary law has {} entries for {n} states",
            mu.len()
        )));
    }
    let mut rates = Matrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if x != y {
                rates[(x, y)] = model.rate(y, x) * mu.prob(y) / mu.prob(x);
            }
        }
    }
    let reversed = CtmcModel::from_rate_matrix(model.states().to_vec(), &rates)?;
    let l = build_generator(&reversed);
    for y in 0..n {
        let r: f64 = (0..n).map(|x| mu.prob(x) * l.matrix()[(x, y)]).sum();
        if r.abs() > STATIONARY_RESIDUAL_TOL {
            return Err(Error::Numeric(format!(
                "reversed chain does not preserve the stationary law: residual {r:e}"
            )));
        }
    }
    Ok(reversed)
}

/// Reverses a model against its own stationary law.
pub fn reversed(model: &CtmcModel) -> Result<CtmcModel> {
    let mu = stationary_of(model)?;
    reverse(model, &mu)
}

/// Detailed balance `mu(x) c(x) p(x,y) = mu(y) c(y) p(y,x)` for all pairs.
pub fn satisfies_detailed_balance(model: &CtmcModel, mu: &StationaryDist, tol: f64) -> bool {
    let n = model.num_states();
    (0..n).all(|x| {
        (0..n).all(|y| (mu.prob(x) * model.rate(x, y) - mu.prob(y) * model.rate(y, x)).abs() <= tol)
    })
}
