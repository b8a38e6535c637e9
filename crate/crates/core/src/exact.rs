//! Deterministic oracles: relative entropy rates, discretized transition
//! matrices, spectral gap, per-step moments of the discretized log-ratio and
//! block probabilities.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{self, CtmcModel, Generator, StationaryDist};
use crate::scgf;

/// Finite-difference step used for second derivatives of SCGFs at 0.
pub const FD_STEP: f64 = 1e-4;

fn same_space(x: &CtmcModel, y: &CtmcModel) -> Result<()> {
    if x.num_states() != y.num_states() {
        return Err(Error::InvalidInput(format!(
            "models live on different state spaces ({} vs {} states)",
            x.num_states(),
            y.num_states()
        )));
    }
    Ok(())
}

/// Checks that every transition `x` can make is also possible under `y`.
pub fn check_absolute_continuity(x: &CtmcModel, y: &CtmcModel) -> Result<()> {
    same_space(x, y)?;
    let n = x.num_states();
    for a in 0..n {
        for b in 0..n {
            if a != b && x.rate(a, b) > 0.0 && !(y.rate(a, b) > 0.0) {
                return Err(Error::AbsoluteContinuity {
                    from: x.state_label(a).to_string(),
                    to: x.state_label(b).to_string(),
                });
            }
        }
    }
    Ok(())
}

/// `s(P|P~)`: per-unit-time relative entropy of the stationary `x` path
/// measure with respect to `y`.
pub fn relative_entropy_rate(x: &CtmcModel, y: &CtmcModel) -> Result<f64> {
    check_absolute_continuity(x, y)?;
    let mu = model::stationary_of(x)?;
    let n = x.num_states();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            let r = x.rate(a, b);
            if a != b && r > 0.0 {
                s += mu.prob(a) * r * (r / y.rate(a, b)).ln();
            }
        }
        s -= mu.prob(a) * (x.escape_rate(a) - y.escape_rate(a));
    }
    Ok(s)
}

/// Mean entropy production per unit time: relative entropy against the
/// time reversal.
pub fn entropy_production_rate(model: &CtmcModel) -> Result<f64> {
    let rev = model::reversed(model)?;
    relative_entropy_rate(model, &rev)
}

/// `exp(delta L)`, the transition matrix of the delta-discretization.
pub fn discretized_transition_matrix(model: &CtmcModel, delta: f64) -> Result<Matrix> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "discretization step must be positive and finite (got {delta})"
        )));
    }
    let l = model::build_generator(model);
    let mut p = linalg::expm(&(l.matrix() * delta));
    // Clear rounding noise below zero and renormalize rows; the correction is
    // at the level of machine epsilon.
    let n = p.nrows();
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if p[(i, j)] < 0.0 {
                p[(i, j)] = 0.0;
            }
            sum += p[(i, j)];
        }
        for j in 0..n {
            p[(i, j)] /= sum;
        }
    }
    Ok(p)
}

/// `lambda_1 = -max{Re(lambda) : lambda != 0}` over the generator spectrum.
pub fn spectral_gap(gen: &Generator) -> Result<f64> {
    let ev = linalg::eigenvalues(gen.matrix())?;
    // The Perron eigenvalue 0 is simple; drop the one closest to it.
    let zero = ev
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numeric("empty spectrum".into()))?;
    let gap = ev
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != zero)
        .map(|(_, z)| -z.re)
        .fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::Numeric(format!("non-positive spectral gap {gap}")));
    }
    Ok(gap)
}

pub(crate) fn check_discrete_support(px: &Matrix, py: &Matrix) -> Result<()> {
    let n = px.nrows();
    if py.nrows() != n || px.ncols() != n || py.ncols() != n {
        return Err(Error::InvalidInput("transition matrices differ in shape".into()));
    }
    for a in 0..n {
        for b in 0..n {
            if px[(a, b)] > 0.0 && !(py[(a, b)] > 0.0) {
                return Err(Error::AbsoluteContinuity {
                    from: a.to_string(),
                    to: b.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Per-step mean `m_delta` and asymptotic variance `sigma_delta^2` of
/// `log(P^delta(X_1^n) / P~^delta(X_1^n))` under the stationary `X` chain.
///
/// The variance is the second derivative at 0 of `p -> log lambda_max(A_p)`
/// by central differences with step [`FD_STEP`].
pub fn discrete_mean_and_variance(
    px: &Matrix,
    py: &Matrix,
    mu: &StationaryDist,
    _delta: f64,
) -> Result<(f64, f64)> {
    check_discrete_support(px, py)?;
    let n = px.nrows();
    if mu.len() != n {
        return Err(Error::InvalidInput("stationary law size mismatch".into()));
    }
    let mut m = 0.0;
    for a in 0..n {
        for b in 0..n {
            let v = px[(a, b)];
            if v > 0.0 {
                m += mu.prob(a) * v * (v / py[(a, b)]).ln();
            }
        }
    }
    let h = FD_STEP;
    let lp = scgf::discrete_log_lambda(px, py, h)?;
    let l0 = scgf::discrete_log_lambda(px, py, 0.0)?;
    let lm = scgf::discrete_log_lambda(px, py, -h)?;
    let var = ((lp - 2.0 * l0 + lm) / (h * h)).max(0.0);
    Ok((m, var))
}

/// `theta^2 = E''(0)`, the limiting variance per unit time of the
/// continuous-time log-likelihood ratio.
pub fn continuous_variance(x: &CtmcModel, y: &CtmcModel) -> Result<f64> {
    let h = FD_STEP;
    let ep = scgf::scgf_value(x, y, h)?;
    let e0 = scgf::scgf_value(x, y, 0.0)?;
    let em = scgf::scgf_value(x, y, -h)?;
    Ok(((ep - 2.0 * e0 + em) / (h * h)).max(0.0))
}

/// `log P(X_0 = b_0, ..., X_{k} = b_k)` for the stationary chain with
/// transition matrix `pd`.
pub fn block_log_probability(pd: &Matrix, mu: &StationaryDist, block: &[usize]) -> f64 {
    let Some(&first) = block.first() else {
        return 0.0;
    };
    let mut lp = mu.prob(first).ln();
    for w in block.windows(2) {
        lp += pd[(w[0], w[1])].ln();
    }
    lp
}

/// `sum_x mu(x) sum_y P(x,y) log P(x,y)`: the almost-sure limit of
/// `-(1/n) log R_n` for the delta-discretized chain.
pub fn discrete_log_likelihood_rate(pd: &Matrix, mu: &StationaryDist) -> f64 {
    let n = pd.nrows();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            let v = pd[(a, b)];
            if v > 0.0 {
                acc += mu.prob(a) * v * v.ln();
            }
        }
    }
    acc
}

/// First-order small-delta expansion of [`discrete_log_likelihood_rate`]:
/// `sum mu (1 - delta c) log(1 - delta c) + sum mu delta c p log(delta c p)`.
pub fn naive_return_expansion(model: &CtmcModel, delta: f64) -> Result<f64> {
    let mu = model::stationary_of(model)?;
    let n = model.num_states();
    let mut acc = 0.0;
    for a in 0..n {
        let stay = 1.0 - delta * model.escape_rate(a);
        if !(stay > 0.0) {
            return Err(Error::Domain(format!(
                "delta * c({}) = {} must be below 1 for the expansion",
                model.state_label(a),
                delta * model.escape_rate(a)
            )));
        }
        acc += mu.prob(a) * stay * stay.ln();
        for b in 0..n {
            let j = delta * model.rate(a, b);
            if j > 0.0 {
                acc += mu.prob(a) * j * j.ln();
            }
        }
    }
    Ok(acc)
}

/// Coefficient of `delta log delta` in the expansion: `sum_x mu(x) c(x)`.
pub fn delta_log_delta_coefficient(model: &CtmcModel) -> Result<f64> {
    let mu = model::stationary_of(model)?;
    Ok((0..model.num_states()).map(|x| mu.prob(x) * model.escape_rate(x)).sum())
}

/// Stationary jump flux `mu(x) c(x) p(x, y)`.
pub fn stationary_flux(model: &CtmcModel) -> Result<Matrix> {
    let mu = model::stationary_of(model)?;
    let n = model.num_states();
    Ok(Matrix::from_fn(n, n, |a, b| mu.prob(a) * model.rate(a, b)))
}

/// Ergodic limit of the shadowing statistic when the target pattern is drawn
/// from a third chain `q`: `sum q(x,y) log(cp / c~p~) + sum q(x) (c~ - c)`.
pub fn shadow_flux_limit(q: &CtmcModel, x: &CtmcModel, y: &CtmcModel) -> Result<f64> {
    same_space(q, x)?;
    check_absolute_continuity(x, y)?;
    let mu_q = model::stationary_of(q)?;
    let n = q.num_states();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            let f = mu_q.prob(a) * q.rate(a, b);
            if f > 0.0 {
                if !(x.rate(a, b) > 0.0) {
                    return Err(Error::AbsoluteContinuity {
                        from: q.state_label(a).to_string(),
                        to: q.state_label(b).to_string(),
                    });
                }
                acc += f * (x.rate(a, b) / y.rate(a, b)).ln();
            }
        }
        acc += mu_q.prob(a) * (y.escape_rate(a) - x.escape_rate(a));
    }
    Ok(acc)
}
