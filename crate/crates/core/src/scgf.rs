//! Scaled cumulant generating functions of the log-likelihood ratio and their
//! Legendre transforms.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exact::{self, check_discrete_support};
use crate::linalg::{self, Matrix};
use crate::model::{CtmcModel, StationaryDist};

pub const PERRON_TOL: f64 = 1e-12;
/// Offset from `p = +-1` at which the edge slopes `c-`, `c+` are taken.
pub const EDGE_EPS: f64 = 1e-3;
const CONVEXITY_TOL: f64 = 1e-8;
const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScgfKind {
    /// `E(p)`, continuous time.
    Continuous,
    /// `F^delta(p)` for the given step.
    Discrete { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgfCurve {
    pub kind: ScgfKind,
    pub p: Vec<f64>,
    pub values: Vec<f64>,
    /// One-sided slopes near `p = -1` and `p = +1`, when known.
    pub edge_slopes: Option<(f64, f64)>,
}

impl ScgfCurve {
    pub fn new(kind: ScgfKind, p: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if p.len() != values.len() || p.is_empty() {
            return Err(Error::InvalidInput("curve grid and values differ in length".into()));
        }
        if p.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("curve grid must be strictly increasing".into()));
        }
        Ok(Self {
            kind,
            p,
            values,
            edge_slopes: None,
        })
    }

    /// Checks `F(0) = 0` (if 0 is on the grid) and convexity.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.p.iter().position(|&p| p == 0.0) {
            if self.values[i].abs() > ZERO_TOL {
                return Err(Error::Numeric(format!(
                    "SCGF at p = 0 is {:e}, expected 0",
                    self.values[i]
                )));
            }
        }
        if let Some(i) = self.convexity_violation() {
            return Err(Error::Numeric(format!(
                "SCGF is not convex near p = {}",
                self.p[i]
            )));
        }
        Ok(())
    }

    fn convexity_violation(&self) -> Option<usize> {
        (1..self.p.len().saturating_sub(1)).find(|&i| {
            let left = (self.values[i] - self.values[i - 1]) / (self.p[i] - self.p[i - 1]);
            let right = (self.values[i + 1] - self.values[i]) / (self.p[i + 1] - self.p[i]);
            let h = 0.5 * (self.p[i + 1] - self.p[i - 1]);
            (right - left) / h < -CONVEXITY_TOL / (h * h)
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["p", "value"])?;
        for (p, v) in self.p.iter().zip(&self.values) {
            out.write_record([p.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Default grid: 41 points evenly spaced on `[-0.95, 0.95]`.
pub fn default_p_grid() -> Vec<f64> {
    linspace(-0.95, 0.95, 41)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                // keep exact zero on symmetric grids
                if v.abs() < 1e-15 {
                    0.0
                } else {
                    v
                }
            })
            .collect(),
    }
}

/// Tilted generator `M_p`: off-diagonal `cp (cp / c~p~)^p`, diagonal
/// `-c - p (c - c~)`.
pub fn tilted_generator(x: &CtmcModel, y: &CtmcModel, p: f64) -> Result<Matrix> {
    exact::check_absolute_continuity(x, y)?;
    let n = x.num_states();
    let mut m = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let r = x.rate(a, b);
            if a != b && r > 0.0 {
                m[(a, b)] = r * (r / y.rate(a, b)).powf(p);
            }
        }
        m[(a, a)] = -x.escape_rate(a) - p * (x.escape_rate(a) - y.escape_rate(a));
    }
    Ok(m)
}

/// `E(p)`: Perron root of the tilted generator.
pub fn scgf_value(x: &CtmcModel, y: &CtmcModel, p: f64) -> Result<f64> {
    let m = tilted_generator(x, y, p)?;
    let cmax = x.escape_rates().iter().copied().fold(0.0, f64::max);
    let dmax = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let shift = (cmax * (1.0 + p.abs()) + 1.0).max(dmax + 1.0);
    linalg::perron_root(&m, shift, PERRON_TOL)
}

pub fn continuous_scgf(x: &CtmcModel, y: &CtmcModel, p_grid: &[f64]) -> Result<ScgfCurve> {
    let values = p_grid
        .iter()
        .map(|&p| scgf_value(x, y, p))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = ScgfCurve::new(ScgfKind::Continuous, p_grid.to_vec(), values)?;
    let f = |p: f64| scgf_value(x, y, p);
    curve.edge_slopes = Some(edge_slopes(f)?);
    Ok(curve)
}

fn edge_slopes(f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let a = 1.0 - EDGE_EPS;
    let b = 1.0 - 2.0 * EDGE_EPS;
    let lo = (f(-b)? - f(-a)?) / EDGE_EPS;
    let hi = (f(a)? - f(b)?) / EDGE_EPS;
    Ok((lo, hi))
}

/// `A_p(x, y) = P(x, y)^{1+p} P~(x, y)^{-p}`.
pub fn discrete_tilted(px: &Matrix, py: &Matrix, p: f64) -> Matrix {
    Matrix::from_fn(px.nrows(), px.ncols(), |a, b| {
        let v = px[(a, b)];
        if v > 0.0 {
            v * (v / py[(a, b)]).powf(p)
        } else {
            0.0
        }
    })
}

/// `log lambda_max(A_p)`, i.e. `delta F^delta(p)`.
pub fn discrete_log_lambda(px: &Matrix, py: &Matrix, p: f64) -> Result<f64> {
    if !(p.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "F^delta(p) = infinity for |p| >= 1 (got p = {p})"
        )));
    }
    check_discrete_support(px, py)?;
    let a = discrete_tilted(px, py, p);
    let lambda = linalg::perron_root(&a, 0.0, PERRON_TOL)?;
    if !(lambda > 0.0) {
        return Err(Error::Numeric(format!("non-positive Perron root {lambda}")));
    }
    Ok(lambda.ln())
}

/// `F^delta(p) = (1/delta) log lambda_max(A_p)` on a grid inside `(-1, 1)`.
///
/// `mu_check` must be stationary for `px`; this guards against passing the
/// matrices in the wrong order.
pub fn discrete_scgf(
    px: &Matrix,
    py: &Matrix,
    mu_check: &StationaryDist,
    delta: f64,
    p_grid: &[f64],
) -> Result<ScgfCurve> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive (got {delta})")));
    }
    check_discrete_support(px, py)?;
    let n = px.nrows();
    if mu_check.len() != n {
        return Err(Error::InvalidInput("stationary law size mismatch".into()));
    }
    for b in 0..n {
        let r: f64 = (0..n).map(|a| mu_check.prob(a) * px[(a, b)]).sum::<f64>() - mu_check.prob(b);
        if r.abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "stationary law is not invariant for the first matrix (residual {r:e})"
            )));
        }
    }
    let f = |p: f64| discrete_log_lambda(px, py, p).map(|v| v / delta);
    let values = p_grid.iter().map(|&p| f(p)).collect::<Result<Vec<_>>>()?;
    let mut curve = ScgfCurve::new(ScgfKind::Discrete { delta }, p_grid.to_vec(), values)?;
    curve.edge_slopes = Some(edge_slopes(f)?);
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    /// `(c-, c+)`.
    pub domain: (f64, f64),
}

impl RateFunction {
    /// Grid point with the smallest rate value.
    pub fn minimizer(&self) -> (f64, f64) {
        self.q
            .iter()
            .zip(&self.values)
            .map(|(&q, &v)| (q, v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0.0, 0.0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["q", "I"])?;
        for (q, v) in self.q.iter().zip(&self.values) {
            out.write_record([q.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `I(q) = max_p (p q - F(p))` over the curve's grid.
pub fn legendre_value(curve: &ScgfCurve, q: f64) -> f64 {
    curve
        .p
        .iter()
        .zip(&curve.values)
        .map(|(&p, &f)| p * q - f)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Legendre transform on a 201-point `q` grid spanning `[c-, c+]`, always
/// including `q = F'(0)` when 0 lies on the `p` grid.
pub fn legendre_transform(curve: &ScgfCurve) -> Result<RateFunction> {
    if let Some(i) = curve.convexity_violation() {
        return Err(Error::Numeric(format!(
            "cannot Legendre-transform a non-convex curve (violation near p = {})",
            curve.p[i]
        )));
    }
    let (lo, hi) = match curve.edge_slopes {
        Some(s) => s,
        None => {
            let k = curve.p.len();
            if k < 2 {
                (0.0, 0.0)
            } else {
                (
                    (curve.values[1] - curve.values[0]) / (curve.p[1] - curve.p[0]),
                    (curve.values[k - 1] - curve.values[k - 2]) / (curve.p[k - 1] - curve.p[k - 2]),
                )
            }
        }
    };
    let mut q = if (hi - lo).abs() < 1e-12 {
        vec![0.5 * (lo + hi)]
    } else {
        linspace(lo, hi, 201)
    };
    if let Some(d) = slope_at_zero(curve) {
        if d > lo && d < hi && !q.contains(&d) {
            q.push(d);
            q.sort_by(f64::total_cmp);
        }
    }
    let values = q.iter().map(|&v| legendre_value(curve, v).max(0.0)).collect();
    Ok(RateFunction {
        q,
        values,
        domain: (lo, hi),
    })
}

/// Central-difference slope at `p = 0` from the neighbouring grid points.
pub fn slope_at_zero(curve: &ScgfCurve) -> Option<f64> {
    let i = curve.p.iter().position(|&p| p == 0.0)?;
    if i == 0 || i + 1 >= curve.p.len() {
        return None;
    }
    Some((curve.values[i + 1] - curve.values[i - 1]) / (curve.p[i + 1] - curve.p[i - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{discretized_transition_matrix, relative_entropy_rate};
    use crate::fixtures;
    use crate::model::stationary_of;

    #[test]
    fn scgf_vanishes_at_zero_and_minus_one() {
        for (x, y) in [fixtures::standard_pair(), fixtures::cycle_pair()] {
            assert!(scgf_value(&x, &y, 0.0).unwrap().abs() < 1e-12);
            assert!(scgf_value(&x, &y, -1.0).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_fluctuation_symmetry() {
        let (x, y) = fixtures::cycle_pair();
        for p in linspace(-0.9, 0.9, 19) {
            let a = scgf_value(&x, &y, p).unwrap();
            let b = scgf_value(&x, &y, -1.0 - p).unwrap();
            assert!((a - b).abs() < 1e-10, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn derivative_at_zero_is_relative_entropy() {
        for (x, y) in [fixtures::standard_pair(), fixtures::cycle_pair()] {
            let h = 1e-5;
            let d = (scgf_value(&x, &y, h).unwrap() - scgf_value(&x, &y, -h).unwrap()) / (2.0 * h);
            let s = relative_entropy_rate(&x, &y).unwrap();
            assert!((d - s).abs() < 1e-6, "{d} vs {s}");
        }
    }

    #[test]
    fn discrete_scgf_basic_identities() {
        let (x, y) = fixtures::standard_pair();
        let d = 0.05;
        let px = discretized_transition_matrix(&x, d).unwrap();
        let py = discretized_transition_matrix(&y, d).unwrap();
        let mu = stationary_of(&x).unwrap();
        let grid = default_p_grid();
        let curve = discrete_scgf(&px, &py, &mu, d, &grid).unwrap();
        curve.validate().unwrap();
        let same = discrete_scgf(&px, &px, &mu, d, &grid).unwrap();
        assert!(same.values.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn discrete_scgf_rejects_boundary() {
        let (x, y) = fixtures::standard_pair();
        let px = discretized_transition_matrix(&x, 0.1).unwrap();
        let py = discretized_transition_matrix(&y, 0.1).unwrap();
        let mu = stationary_of(&x).unwrap();
        for p in [1.0, -1.0, 1.5] {
            let err = discrete_scgf(&px, &py, &mu, 0.1, &[p]).unwrap_err();
            assert!(matches!(err, Error::Domain(_)));
            assert!(err.to_string().contains("infinity"));
        }
    }

    #[test]
    fn discrete_scgf_rejects_swapped_stationary_law() {
        let (x, y) = fixtures::standard_pair();
        let px = discretized_transition_matrix(&x, 0.1).unwrap();
        let py = discretized_transition_matrix(&y, 0.1).unwrap();
        let mu_y = stationary_of(&y).unwrap();
        assert!(discrete_scgf(&px, &py, &mu_y, 0.1, &[0.0]).is_err());
    }

    #[test]
    fn discrete_error_halves_with_delta() {
        let (x, y) = fixtures::standard_pair();
        let mu = stationary_of(&x).unwrap();
        let e = scgf_value(&x, &y, 0.5).unwrap();
        let err = |d: f64| {
            let px = discretized_transition_matrix(&x, d).unwrap();
            let py = discretized_transition_matrix(&y, d).unwrap();
            (discrete_scgf(&px, &py, &mu, d, &[0.5]).unwrap().values[0] - e).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!(ratio > 1.4, "ratio {ratio}");
    }

    #[test]
    fn legendre_of_zero_curve_is_degenerate() {
        let x = fixtures::biased_cycle(0.7);
        let curve = continuous_scgf(&x, &x, &default_p_grid()).unwrap();
        let rate = legendre_transform(&curve).unwrap();
        assert_eq!(rate.q.len(), 1);
        assert!(rate.q[0].abs() < 1e-9);
        assert!(rate.values[0].abs() < 1e-9);
    }

    #[test]
    fn legendre_minimum_at_mean() {
        let (x, y) = fixtures::cycle_pair();
        let curve = continuous_scgf(&x, &y, &default_p_grid()).unwrap();
        let rate = legendre_transform(&curve).unwrap();
        assert!(rate.values.iter().all(|&v| v >= 0.0));
        let d = slope_at_zero(&curve).unwrap();
        assert!(legendre_value(&curve, d) <= 1e-6);
        assert!(rate.domain.0 < d && d < rate.domain.1);
    }

    #[test]
    fn legendre_gallavotti_cohen_on_mirror_closed_grid() {
        let (x, y) = fixtures::cycle_pair();
        // {-0.95, ..., -0.05} is closed under p -> -1 - p
        let grid = linspace(-0.95, -0.05, 19);
        let curve = continuous_scgf(&x, &y, &grid).unwrap();
        for q in linspace(-3.0, 3.0, 61) {
            let lhs = legendre_value(&curve, -q);
            let rhs = legendre_value(&curve, q) + q;
            assert!((lhs - rhs).abs() < 1e-6, "q={q}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn non_convex_curve_rejected() {
        let c = ScgfCurve::new(ScgfKind::Continuous, vec![-0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(legendre_transform(&c).is_err());
        assert!(c.validate().is_err());
    }

    #[test]
    fn curve_csv_has_header() {
        let (x, y) = fixtures::standard_pair();
        let curve = continuous_scgf(&x, &y, &[-0.5, 0.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p,value\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
