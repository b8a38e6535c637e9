//! Replicated experiments. Replicas run in parallel; every replica owns its
//! seed streams and results are reduced in replica order, so output does not
//! depend on scheduling.

use rayon::prelude::*;

use super::plan::{ExperimentKind, ExperimentPlan, GammaSource};
use super::report::{EstimateReport, ExperimentOutput, Table};
use super::stats;
use crate::error::{Error, Result};
use crate::exact;
use crate::matching::{
    sample_block, sandwich_diagnostic, shadow_pattern, uniform, Band, ChainTarget, SandwichSample,
    TargetMode,
};
use crate::model::{self, CtmcModel};
use crate::pathsim::{discretize, path_log_ratio, shadow_functional, DiscretePath, Initial, Role, Seed, Simulator, Trajectory};
use crate::scgf;

/// Effective sample size below which the empirical generating function is
/// flagged as tail-dominated.
pub const MIN_ESS: f64 = 30.0;

/// Variance below which the central limit statistic is treated as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

pub fn run(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    match plan.kind {
        ExperimentKind::Lln => run_lln(plan),
        ExperimentKind::LlnSchedule => run_lln_schedule(plan),
        ExperimentKind::Clt => run_clt(plan),
        ExperimentKind::LdpEmpirical => run_ldp_empirical(plan),
        ExperimentKind::Expolaw => run_expolaw(plan),
        ExperimentKind::Shadow => run_shadow(plan),
        ExperimentKind::NaiveReturn => run_naive_return(plan),
    }
}

fn par_replicas<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

fn expect_kind(plan: &ExperimentPlan, kind: ExperimentKind) -> Result<()> {
    if plan.kind != kind {
        return Err(Error::InvalidPlan(format!(
            "plan '{}' has kind {}, expected {}",
            plan.name,
            plan.kind.name(),
            kind.name()
        )));
    }
    plan.validate()
}

fn fixed_delta(plan: &ExperimentPlan) -> Result<f64> {
    plan.delta
        .fixed()
        .ok_or_else(|| Error::InvalidPlan(format!("plan '{}' needs a fixed delta", plan.name)))
}

fn replica_seed(plan: &ExperimentPlan, block: usize, i: usize) -> Seed {
    Seed::new(plan.seed, (block * plan.replicas + i) as u64)
}

/// Everything one replica of a waiting-time experiment needs at a given delta.
struct PairContext {
    sim_x: Simulator,
    tx: ChainTarget,
    ty: ChainTarget,
    delta: f64,
    budget: u64,
    mode: TargetMode,
}

/// One replica of `W_n(X|Y)` and `W_n(X|X')`.
#[derive(Debug, Clone, Copy)]
struct WaitDraw {
    log_wy: Option<f64>,
    log_wx: Option<f64>,
    /// `log P~(X_1..X_n)`, for the sandwich band.
    log_block_y: f64,
}

impl WaitDraw {
    fn log_ratio(&self) -> Option<f64> {
        Some(self.log_wy? - self.log_wx?)
    }
}

impl PairContext {
    fn new(plan: &ExperimentPlan, delta: f64) -> Result<Self> {
        Ok(Self {
            sim_x: Simulator::new(&plan.model_x)?,
            tx: ChainTarget::new(&plan.model_x, delta)?,
            ty: ChainTarget::new(&plan.model_y, delta)?,
            delta,
            budget: plan.budget,
            mode: plan.target_mode,
        })
    }

    /// `X_0..X_{len-1}` from an exactly simulated path.
    fn draw_x(&self, len: usize, seed: Seed) -> Result<DiscretePath> {
        let horizon = (len.max(2) - 1) as f64 * self.delta;
        let traj = self.sim_x.run(horizon, Initial::Stationary, &mut seed.rng(Role::X))?;
        discretize(&traj, self.delta, len)
    }

    fn wait(&self, n: usize, seed: Seed) -> Result<WaitDraw> {
        let x = self.draw_x(n + 1, seed)?;
        let wy = self.ty.waiting_time(&x, n, self.budget, self.mode, &mut seed.rng(Role::Y))?;
        let wx = self.tx.waiting_time(&x, n, self.budget, self.mode, &mut seed.rng(Role::XPrime))?;
        Ok(WaitDraw {
            log_wy: wy.value().map(f64::ln),
            log_wx: wx.value().map(f64::ln),
            log_block_y: self.ty.block_log_prob(&x.symbols[1..=n]),
        })
    }
}

fn all_censored(plan: &ExperimentPlan, n: usize, count: usize) -> Error {
    Error::Experiment(format!(
        "plan '{}': all {count} replicas censored at n = {n} (budget {}); raise the budget or use target_mode renewal",
        plan.name, plan.budget
    ))
}

fn wait_table(name: &str) -> Table {
    Table::new(name, &["n", "delta", "replica", "log_w_y", "log_w_x", "statistic", "censored"])
}

fn push_wait_row(t: &mut Table, n: usize, delta: f64, i: usize, d: &WaitDraw, stat: Option<f64>) {
    t.push(vec![
        n as f64,
        delta,
        i as f64,
        d.log_wy.unwrap_or(f64::NAN),
        d.log_wx.unwrap_or(f64::NAN),
        stat.unwrap_or(f64::NAN),
        if stat.is_some() { 0.0 } else { 1.0 },
    ]);
}

/// `(1/(n delta)) log(W_n(X|Y) / W_n(X|X'))` averaged over replicas, against
/// the relative entropy rate. The estimate reported is the one at the largest
/// `n` of the grid.
pub fn run_lln(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::Lln)?;
    let delta = fixed_delta(plan)?;
    let ctx = PairContext::new(plan, delta)?;
    let oracle = exact::relative_entropy_rate(&plan.model_x, &plan.model_y)?;
    let mu = model::stationary_of(&plan.model_x)?;
    let (m_delta, _) = exact::discrete_mean_and_variance(ctx.tx.matrix(), ctx.ty.matrix(), &mu, delta)?;

    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    let mut table = wait_table("replicas");
    let mut per_n = Vec::new();
    let mut sandwich = Vec::new();
    for (g, &n) in plan.n_grid.iter().enumerate() {
        let draws = par_replicas(plan.replicas, |i| ctx.wait(n, replica_seed(plan, g, i)))?;
        let scale = n as f64 * delta;
        let mut vals = Vec::new();
        for (i, d) in draws.iter().enumerate() {
            let stat = d.log_ratio().map(|r| r / scale);
            push_wait_row(&mut table, n, delta, i, d, stat);
            vals.extend(stat);
            if let Some(lw) = d.log_wy {
                sandwich.push(SandwichSample {
                    n,
                    delta,
                    log_w: lw,
                    log_block_prob: d.log_block_y,
                });
            }
        }
        if vals.is_empty() {
            return Err(all_censored(plan, n, plan.replicas));
        }
        let (mean, se) = stats::mean_stderr(&vals);
        per_n.push(serde_json::json!({"n": n, "estimate": mean, "stderr": se, "used": vals.len()}));
        if n == plan.max_n() {
            rep.set_estimate(mean, Some(se), Some(oracle));
            rep.set_counts(plan.replicas, vals.len());
        }
    }
    rep.diag("per_n", per_n);
    rep.diag("discrete_oracle", m_delta / delta);
    rep.diag("relative_entropy_rate", oracle);
    rep.diag(
        "sandwich",
        sandwich_diagnostic(&sandwich, plan.kappa.0, plan.kappa.1, Band::FixedDelta),
    );
    if rep.censoring_rate > 0.0 {
        rep.warn(format!(
            "{:.1}% of replicas censored and dropped",
            100.0 * rep.censoring_rate
        ));
    }
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![table],
    })
}

/// The same estimator along `delta_n = a n^{-b}`; tracks the fraction of
/// replicas within `epsilon` of the continuous-time rate.
pub fn run_lln_schedule(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::LlnSchedule)?;
    let oracle = exact::relative_entropy_rate(&plan.model_x, &plan.model_y)?;
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    let mut table = wait_table("replicas");
    let mut summary = Table::new(
        "trajectory",
        &["n", "delta", "estimate", "stderr", "fraction_within", "censoring_rate"],
    );
    let mut sandwich = Vec::new();
    let mut fractions = Vec::new();
    let mut order: Vec<(usize, usize)> = plan.n_grid.iter().copied().enumerate().collect();
    order.sort_by_key(|&(_, n)| n);
    for &(g, n) in &order {
        let delta = plan.delta.delta(n);
        let ctx = PairContext::new(plan, delta)?;
        let draws = par_replicas(plan.replicas, |i| ctx.wait(n, replica_seed(plan, g, i)))?;
        let scale = n as f64 * delta;
        let mut vals = Vec::new();
        for (i, d) in draws.iter().enumerate() {
            let stat = d.log_ratio().map(|r| r / scale);
            push_wait_row(&mut table, n, delta, i, d, stat);
            vals.extend(stat);
            if let Some(lw) = d.log_wy {
                sandwich.push(SandwichSample {
                    n,
                    delta,
                    log_w: lw,
                    log_block_prob: d.log_block_y,
                });
            }
        }
        if vals.is_empty() {
            return Err(all_censored(plan, n, plan.replicas));
        }
        let (mean, se) = stats::mean_stderr(&vals);
        let within = vals.iter().filter(|v| (*v - oracle).abs() <= plan.epsilon).count();
        let frac = within as f64 / vals.len() as f64;
        let cens = 1.0 - vals.len() as f64 / plan.replicas as f64;
        summary.push(vec![n as f64, delta, mean, se, frac, cens]);
        fractions.push(frac);
        rep.set_estimate(mean, Some(se), Some(oracle));
        rep.set_counts(plan.replicas, vals.len());
    }
    let monotone = fractions.windows(2).all(|w| w[1] >= w[0]);
    rep.diag("fraction_within", fractions.last().copied());
    rep.diag("fractions", &fractions);
    rep.diag("fraction_monotone", monotone);
    rep.diag("epsilon", plan.epsilon);
    rep.diag(
        "sandwich",
        sandwich_diagnostic(&sandwich, plan.kappa.0, plan.kappa.1, Band::Schedule),
    );
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![table, summary],
    })
}

/// `(1/sqrt n)(log(W_n(X|Y)/W_n(X|X')) - n m_delta)` against
/// `Normal(0, sigma_delta^2)`. The alternative centering `n delta s` is
/// reported alongside.
pub fn run_clt(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::Clt)?;
    let delta = fixed_delta(plan)?;
    let n = plan.max_n();
    let ctx = PairContext::new(plan, delta)?;
    let mu = model::stationary_of(&plan.model_x)?;
    let (m_delta, var) = exact::discrete_mean_and_variance(ctx.tx.matrix(), ctx.ty.matrix(), &mu, delta)?;
    let s = exact::relative_entropy_rate(&plan.model_x, &plan.model_y)?;
    let theta2 = exact::continuous_variance(&plan.model_x, &plan.model_y)?;

    let draws = par_replicas(plan.replicas, |i| ctx.wait(n, replica_seed(plan, 0, i)))?;
    let sq = (n as f64).sqrt();
    let mut table = Table::new(
        "replicas",
        &["replica", "log_w_y", "log_w_x", "statistic", "statistic_alt", "censored"],
    );
    let mut vals = Vec::new();
    let mut alt = Vec::new();
    for (i, d) in draws.iter().enumerate() {
        let r = d.log_ratio();
        let stat = r.map(|r| (r - n as f64 * m_delta) / sq);
        let stat_alt = r.map(|r| (r - n as f64 * delta * s) / sq);
        table.push(vec![
            i as f64,
            d.log_wy.unwrap_or(f64::NAN),
            d.log_wx.unwrap_or(f64::NAN),
            stat.unwrap_or(f64::NAN),
            stat_alt.unwrap_or(f64::NAN),
            if r.is_some() { 0.0 } else { 1.0 },
        ]);
        vals.extend(stat);
        alt.extend(stat_alt);
    }
    if vals.is_empty() {
        return Err(all_censored(plan, n, plan.replicas));
    }
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    rep.set_counts(plan.replicas, vals.len());
    let m = vals.len();
    let sample_var = stats::sample_variance(&vals);
    let (mean, mean_se) = stats::mean_stderr(&vals);
    let degenerate = var < DEGENERATE_VARIANCE;
    rep.diag("degenerate", degenerate);
    rep.diag("m_delta", m_delta);
    rep.diag("sigma2_delta", var);
    rep.diag("sigma2_delta_over_delta", var / delta);
    rep.diag("theta2", theta2);
    rep.diag("mean_statistic", mean);
    rep.diag("mean_statistic_stderr", mean_se);
    rep.diag("mean_statistic_alt_centering", stats::mean_stderr(&alt).0);
    if degenerate {
        // the oracle law is a point mass: report the spread itself
        rep.set_estimate(sample_var, None, Some(0.0));
        rep.diag("max_abs_statistic", vals.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        rep.warn("sigma_delta^2 = 0: the limiting law is degenerate at 0");
    } else {
        let sd = var.sqrt();
        let d = stats::ks_statistic(&vals, |x| stats::normal_cdf(x, 0.0, sd));
        rep.diag("ks_statistic", d);
        rep.diag("ks_p_value", stats::ks_p_value(d, m as f64));
        rep.diag("variance_ratio", sample_var / var);
        // normal-theory stderr of a sample variance
        let se = sample_var * (2.0 / (m as f64 - 1.0)).sqrt();
        rep.set_estimate(sample_var, Some(se), Some(var));
    }
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![table],
    })
}

/// Empirical `(1/(n delta)) log mean [W(X|Y)/W(X|X')]^p` on the p grid.
pub fn run_ldp_empirical(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::LdpEmpirical)?;
    let delta = fixed_delta(plan)?;
    let n = plan.max_n();
    let ctx = PairContext::new(plan, delta)?;
    let draws = par_replicas(plan.replicas, |i| ctx.wait(n, replica_seed(plan, 0, i)))?;
    let mut per_rep = Table::new("replicas", &["replica", "log_ratio", "censored"]);
    let mut ratios = Vec::new();
    for (i, d) in draws.iter().enumerate() {
        let r = d.log_ratio();
        per_rep.push(vec![i as f64, r.unwrap_or(f64::NAN), if r.is_some() { 0.0 } else { 1.0 }]);
        ratios.extend(r);
    }
    if ratios.is_empty() {
        return Err(all_censored(plan, n, plan.replicas));
    }
    let scale = n as f64 * delta;
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    rep.set_counts(plan.replicas, ratios.len());
    let mut curve = Table::new(
        "curve",
        &["p", "estimate", "stderr", "f_delta", "e_continuous", "ess"],
    );
    let mut worst = 0.0f64;
    let mut estimates = Vec::new();
    for &p in &plan.p_grid {
        let v: Vec<f64> = ratios.iter().map(|r| p * r).collect();
        let est = stats::log_mean_exp(&v) / scale;
        let ess = stats::effective_sample_size(&v);
        // delta method on log of a mean
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
        let (wm, wse) = stats::mean_stderr(&w);
        let se = wse / wm / scale;
        let f = scgf::discrete_log_lambda(ctx.tx.matrix(), ctx.ty.matrix(), p)? / delta;
        let e = scgf::scgf_value(&plan.model_x, &plan.model_y, p)?;
        curve.push(vec![p, est, se, f, e, ess]);
        worst = worst.max((est - f).abs());
        estimates.push((p, est));
        if ess < MIN_ESS {
            rep.warn(format!(
                "p = {p}: effective sample size {ess:.1} below {MIN_ESS}; estimate is tail-dominated"
            ));
        }
    }
    if plan.y_is_reversed {
        let mut residuals = Vec::new();
        for &(p, ep) in &estimates {
            if let Some(&(_, eq)) = estimates.iter().find(|(q, _)| (q - (-1.0 - p)).abs() < 1e-9) {
                residuals.push(serde_json::json!({"p": p, "residual": (ep - eq).abs()}));
            }
        }
        rep.diag("symmetry_residuals", residuals);
    }
    rep.set_estimate(worst, None, None);
    rep.diag("max_abs_deviation_from_f_delta", worst);
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![per_rep, curve],
    })
}

/// Hitting times of patterns drawn from the discretized `X` chain, rescaled
/// by the pattern probability. The lattice is smoothed by subtracting an
/// independent uniform before rescaling.
pub fn run_expolaw(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::Expolaw)?;
    let delta = fixed_delta(plan)?;
    let target = ChainTarget::new(&plan.model_x, delta)?;
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    let mut rows = Table::new(
        "replicas",
        &["n", "pattern", "replica", "hitting_time", "rescaled", "censored"],
    );
    let mut per_pattern = Table::new(
        "patterns",
        &["n", "pattern", "log_prob", "eta_hat", "ks_statistic", "ks_p_value", "used"],
    );
    let mut pooled = Vec::new();
    let mut etas = Vec::new();
    let mut total = 0usize;
    let mut used = 0usize;
    for (g, &n) in plan.n_grid.iter().enumerate() {
        for j in 0..plan.patterns {
            let pid = g * plan.patterns + j;
            let pattern = sample_block(&target, n, &mut Seed::new(plan.seed, pid as u64).rng(Role::Pattern));
            let log_p = target.block_log_prob(&pattern);
            let prob = log_p.exp();
            let draws = par_replicas(plan.replicas, |i| {
                let seed = replica_seed(plan, pid, i);
                let r = target.hitting_time(&pattern, plan.budget, plan.target_mode, &mut seed.rng(Role::Target))?;
                let u = uniform(&mut seed.rng(Role::Aux));
                Ok(r.value().map(|t| (t, (t - u) * prob)))
            })?;
            let mut scaled = Vec::new();
            for (i, d) in draws.iter().enumerate() {
                rows.push(vec![
                    n as f64,
                    j as f64,
                    i as f64,
                    d.map_or(f64::NAN, |x| x.0),
                    d.map_or(f64::NAN, |x| x.1),
                    if d.is_some() { 0.0 } else { 1.0 },
                ]);
                scaled.extend(d.map(|x| x.1));
            }
            total += draws.len();
            used += scaled.len();
            if scaled.is_empty() {
                per_pattern.push(vec![n as f64, j as f64, log_p, f64::NAN, f64::NAN, f64::NAN, 0.0]);
                continue;
            }
            let eta = 1.0 / stats::mean_stderr(&scaled).0;
            let d = stats::ks_statistic(&scaled, |x| stats::exponential_cdf(x, eta));
            let p = stats::ks_p_value(d, scaled.len() as f64);
            per_pattern.push(vec![n as f64, j as f64, log_p, eta, d, p, scaled.len() as f64]);
            etas.push(eta);
            pooled.extend(scaled.iter().map(|x| x * eta));
        }
    }
    rep.set_counts(total, used);
    if pooled.is_empty() {
        rep.diag("inconclusive", true);
        rep.warn("every replica censored: the exponential law cannot be assessed");
        return Ok(ExperimentOutput {
            report: rep,
            tables: vec![rows, per_pattern],
        });
    }
    let d = stats::ks_statistic(&pooled, |x| stats::exponential_cdf(x, 1.0));
    let pval = stats::ks_p_value(d, pooled.len() as f64);
    let (eta_mean, eta_se) = stats::mean_stderr(&etas);
    rep.set_estimate(eta_mean, Some(eta_se), None);
    rep.diag("inconclusive", false);
    rep.diag("pooled_ks_statistic", d);
    rep.diag("pooled_ks_p_value", pval);
    rep.diag("min_pattern_ks_p_value", per_pattern.column("ks_p_value").map(|c| c.into_iter().filter(|x| x.is_finite()).fold(1.0, f64::min)));
    rep.diag("eta_min", etas.iter().copied().fold(f64::INFINITY, f64::min));
    rep.diag("eta_max", etas.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    rep.diag("eta_sd", stats::sample_variance(&etas).sqrt());
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![rows, per_pattern],
    })
}

/// Fit of `-(1/n) log R_n` against `a + b delta + c delta log delta`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DeltaLogDeltaFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn fit_delta_log_delta(deltas: &[f64], values: &[f64]) -> Option<DeltaLogDeltaFit> {
    let design: Vec<Vec<f64>> = deltas.iter().map(|&d| vec![1.0, d, d * d.ln()]).collect();
    let c = stats::least_squares(&design, values)?;
    Some(DeltaLogDeltaFit {
        a: c[0],
        b: c[1],
        c: c[2],
    })
}

/// `-(1/n) log R_n` of the discretized chain across the delta grid.
pub fn run_naive_return(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::NaiveReturn)?;
    let mu = model::stationary_of(&plan.model_x)?;
    let sim = Simulator::new(&plan.model_x)?;
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    let mut rows = Table::new("replicas", &["delta", "n", "replica", "log_r", "value", "censored"]);
    let mut per_delta = Table::new(
        "per_delta",
        &["delta", "n", "estimate", "stderr", "exact", "expansion", "relative_error"],
    );
    let n_top = plan.max_n();
    let (mut ds, mut est, mut ses, mut expansion, mut exact_v) = (vec![], vec![], vec![], vec![], vec![]);
    let mut total = 0;
    let mut used = 0;
    for (k, &delta) in plan.deltas.iter().enumerate() {
        let target = ChainTarget::new(&plan.model_x, delta)?;
        let exp_v = exact::naive_return_expansion(&plan.model_x, delta)?;
        let ex_v = exact::discrete_log_likelihood_rate(target.matrix(), &mu);
        for (g, &n) in plan.n_grid.iter().enumerate() {
            let block = k * plan.n_grid.len() + g;
            let draws = par_replicas(plan.replicas, |i| {
                let seed = replica_seed(plan, block, i);
                let traj = sim.run(n as f64 * delta, Initial::Stationary, &mut seed.rng(Role::X))?;
                let x = discretize(&traj, delta, n)?;
                let r = target.return_time(&x.symbols, n, plan.budget, plan.target_mode, &mut seed.rng(Role::Target))?;
                Ok(r.value().map(f64::ln))
            })?;
            let mut vals = Vec::new();
            for (i, lr) in draws.iter().enumerate() {
                let v = lr.map(|l| -l / n as f64);
                rows.push(vec![
                    delta,
                    n as f64,
                    i as f64,
                    lr.unwrap_or(f64::NAN),
                    v.unwrap_or(f64::NAN),
                    if v.is_some() { 0.0 } else { 1.0 },
                ]);
                vals.extend(v);
            }
            total += draws.len();
            used += vals.len();
            if vals.is_empty() {
                return Err(all_censored(plan, n, plan.replicas));
            }
            let (m, se) = stats::mean_stderr(&vals);
            per_delta.push(vec![delta, n as f64, m, se, ex_v, exp_v, ((m - exp_v) / exp_v).abs()]);
            if n == n_top {
                ds.push(delta);
                est.push(m);
                ses.push(se);
                expansion.push(exp_v);
                exact_v.push(ex_v);
            }
        }
    }
    rep.set_counts(total, used);
    let fit_err = || Error::Numeric("least-squares fit of a + b d + c d log d failed".into());
    let fit = fit_delta_log_delta(&ds, &est).ok_or_else(fit_err)?;
    let fit_exp = fit_delta_log_delta(&ds, &expansion).ok_or_else(fit_err)?;
    let fit_exact = fit_delta_log_delta(&ds, &exact_v).ok_or_else(fit_err)?;
    // c is linear in the data, so its stderr follows from the unit responses
    let mut var_c = 0.0;
    for (i, se) in ses.iter().enumerate() {
        let mut e = vec![0.0; ds.len()];
        e[i] = 1.0;
        let w = fit_delta_log_delta(&ds, &e).ok_or_else(fit_err)?.c;
        var_c += (w * se).powi(2);
    }
    rep.set_estimate(fit.c, Some(var_c.sqrt()), Some(fit_exp.c));
    rep.diag("fit", fit);
    rep.diag("fit_expansion", fit_exp);
    rep.diag("fit_exact", fit_exact);
    rep.diag("sum_mu_c", exact::delta_log_delta_coefficient(&plan.model_x)?);
    let rel: Vec<f64> = est.iter().zip(&expansion).map(|(m, e)| ((m - e) / e).abs()).collect();
    rep.diag("max_relative_error_vs_expansion", rel.iter().copied().fold(0.0, f64::max));
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![rows, per_delta],
    })
}

/// Shadowing of a path `gamma`: `(1/(n delta)) log(T_Y / T_X)` with both
/// hitting times floored at 1, against the pathwise log-likelihood ratio of
/// `gamma` and, for random `gamma`, its ergodic flux limit.
pub fn run_shadow(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    expect_kind(plan, ExperimentKind::Shadow)?;
    let delta = fixed_delta(plan)?;
    let tx = ChainTarget::new(&plan.model_x, delta)?;
    let ty = ChainTarget::new(&plan.model_y, delta)?;
    let source = plan.gamma.clone().unwrap_or_else(|| GammaSource::Model(plan.model_x.clone()));
    let sim_q = match &source {
        GammaSource::Model(q) => Some(Simulator::new(q)?),
        GammaSource::Fixed(_) => None,
    };
    let mut rep = EstimateReport::new(&plan.name, plan.kind, plan.params_json());
    let mut rows = Table::new(
        "replicas",
        &["n", "replica", "log_t_y", "log_t_x", "statistic", "functional", "censored"],
    );
    let mut per_n = Vec::new();
    for (g, &n) in plan.n_grid.iter().enumerate() {
        let t = n as f64 * delta;
        let draws = par_replicas(plan.replicas, |i| {
            let seed = replica_seed(plan, g, i);
            let drawn;
            let gamma: &Trajectory = match (&source, &sim_q) {
                (GammaSource::Fixed(tr), _) => tr,
                (GammaSource::Model(_), Some(sim)) => {
                    drawn = sim.run(t, Initial::Stationary, &mut seed.rng(Role::Gamma))?;
                    &drawn
                }
                _ => unreachable!(),
            };
            let pattern = shadow_pattern(gamma, delta, n)?;
            let f = shadow_functional(gamma, &plan.model_x, &plan.model_y, t)? / t;
            let a = ty.shadow_hitting_time(&pattern, plan.budget, plan.target_mode, &mut seed.rng(Role::Y))?;
            let b = tx.shadow_hitting_time(&pattern, plan.budget, plan.target_mode, &mut seed.rng(Role::XPrime))?;
            Ok((a.value().map(|v| v.max(1.0).ln()), b.value().map(|v| v.max(1.0).ln()), f))
        })?;
        let mut stat = Vec::new();
        let mut diff = Vec::new();
        let mut func = Vec::new();
        for (i, &(a, b, f)) in draws.iter().enumerate() {
            let s = match (a, b) {
                (Some(a), Some(b)) => Some((a - b) / t),
                _ => None,
            };
            rows.push(vec![
                n as f64,
                i as f64,
                a.unwrap_or(f64::NAN),
                b.unwrap_or(f64::NAN),
                s.unwrap_or(f64::NAN),
                f,
                if s.is_some() { 0.0 } else { 1.0 },
            ]);
            if let Some(s) = s {
                stat.push(s);
                diff.push(s - f);
                func.push(f);
            }
        }
        if stat.is_empty() {
            return Err(all_censored(plan, n, plan.replicas));
        }
        let (m, se) = stats::mean_stderr(&stat);
        let (md, sed) = stats::mean_stderr(&diff);
        let (mf, _) = stats::mean_stderr(&func);
        per_n.push(serde_json::json!({
            "n": n, "estimate": m, "stderr": se,
            "mean_minus_functional": md, "mean_minus_functional_stderr": sed,
            "functional_mean": mf,
        }));
        if g + 1 == plan.n_grid.len() {
            let oracle = match &source {
                GammaSource::Model(q) => exact::shadow_flux_limit(q, &plan.model_x, &plan.model_y)?,
                GammaSource::Fixed(_) => mf,
            };
            rep.set_estimate(m, Some(se), Some(oracle));
            rep.set_counts(plan.replicas, stat.len());
            rep.diag("mean_minus_functional", md);
            rep.diag("mean_minus_functional_stderr", sed);
            rep.diag("functional_mean", mf);
        }
    }
    rep.diag("per_n", per_n);
    if let GammaSource::Model(q) = &source {
        rep.diag("flux_oracle", exact::shadow_flux_limit(q, &plan.model_x, &plan.model_y)?);
        if q == &plan.model_x {
            rep.diag("relative_entropy_rate", exact::relative_entropy_rate(&plan.model_x, &plan.model_y)?);
        }
    }
    Ok(ExperimentOutput {
        report: rep,
        tables: vec![rows],
    })
}

/// Mean of `(1/t) log dP/dP~` over exactly simulated stationary paths.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GirsanovCheck {
    pub mean: f64,
    pub stderr: f64,
    pub oracle: f64,
}

impl GirsanovCheck {
    pub fn z(&self) -> f64 {
        (self.mean - self.oracle) / self.stderr
    }
}

pub fn run_girsanov(x: &CtmcModel, y: &CtmcModel, horizon: f64, replicas: usize, seed: u64) -> Result<GirsanovCheck> {
    if replicas < 2 {
        return Err(Error::InvalidPlan("girsanov check needs at least 2 replicas".into()));
    }
    let oracle = exact::relative_entropy_rate(x, y)?;
    let sim = Simulator::new(x)?;
    let vals = par_replicas(replicas, |i| {
        let traj = sim.run(horizon, Initial::Stationary, &mut Seed::new(seed, i as u64).rng(Role::X))?;
        Ok(path_log_ratio(&traj, x, y, horizon)? / horizon)
    })?;
    let (mean, stderr) = stats::mean_stderr(&vals);
    Ok(GirsanovCheck { mean, stderr, oracle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn plan(kind: ExperimentKind, x: CtmcModel, y: CtmcModel) -> ExperimentPlan {
        let mut p = ExperimentPlan::new("t", kind, x, y);
        p.replicas = 40;
        p.n_grid = vec![60];
        p
    }

    #[test]
    fn lln_is_deterministic_given_seed() {
        let (x, y) = fixtures::standard_pair();
        let p = plan(ExperimentKind::Lln, x, y);
        let a = run(&p).unwrap();
        let b = run(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.report.censoring_rate, 0.0);
    }

    #[test]
    fn lln_identical_models_centered() {
        let (x, _) = fixtures::standard_pair();
        let p = plan(ExperimentKind::Lln, x.clone(), x);
        let r = run(&p).unwrap().report;
        assert!(r.z.unwrap().abs() < 4.0, "{}", r.summary_line());
        assert_eq!(r.oracle, Some(0.0));
    }

    #[test]
    fn all_censored_is_error() {
        let (x, y) = fixtures::standard_pair();
        let mut p = plan(ExperimentKind::Lln, x, y);
        p.target_mode = TargetMode::Scan;
        p.budget = 61;
        assert!(matches!(run(&p), Err(Error::Experiment(_))));
    }

    #[test]
    fn clt_degenerate_for_identical_models() {
        let (x, _) = fixtures::standard_pair();
        let p = plan(ExperimentKind::Clt, x.clone(), x);
        let r = run(&p).unwrap().report;
        assert_eq!(r.diagnostics["degenerate"], serde_json::json!(true));
    }

    #[test]
    fn ldp_at_zero_is_zero() {
        let (x, y) = fixtures::standard_pair();
        let mut p = plan(ExperimentKind::LdpEmpirical, x, y);
        p.p_grid = vec![0.0, 0.25];
        let o = run(&p).unwrap();
        let curve = o.table("curve").unwrap();
        assert_eq!(curve.rows[0][1], 0.0);
    }

    #[test]
    fn expolaw_all_censored_is_inconclusive() {
        let (x, _) = fixtures::standard_pair();
        let mut p = plan(ExperimentKind::Expolaw, x.clone(), x);
        p.n_grid = vec![40];
        p.patterns = 2;
        p.replicas = 5;
        p.budget = 41;
        p.target_mode = TargetMode::Scan;
        let o = run(&p).unwrap();
        assert_eq!(o.report.diagnostics["inconclusive"], serde_json::json!(true));
    }

    #[test]
    fn fit_recovers_coefficients() {
        let ds = [0.2, 0.1, 0.05, 0.025];
        let vals: Vec<f64> = ds.iter().map(|d: &f64| 0.5 - 2.0 * d + 1.5 * d * d.ln()).collect();
        let f = fit_delta_log_delta(&ds, &vals).unwrap();
        assert!((f.c - 1.5).abs() < 1e-9 && (f.b + 2.0).abs() < 1e-9 && (f.a - 0.5).abs() < 1e-9);
    }

    #[test]
    fn shadow_fixed_gamma_uses_functional_oracle() {
        let (x, y) = fixtures::standard_pair();
        let gamma = Trajectory::new(0, vec![0.5, 1.2, 2.0], vec![1, 0, 1], 3.0).unwrap();
        let mut p = plan(ExperimentKind::Shadow, x.clone(), y.clone());
        p.n_grid = vec![30];
        p.gamma = Some(GammaSource::Fixed(gamma.clone()));
        let r = run(&p).unwrap().report;
        let f = shadow_functional(&gamma, &x, &y, 3.0).unwrap() / 3.0;
        assert!((r.oracle.unwrap() - f).abs() < 1e-12);
    }
}
