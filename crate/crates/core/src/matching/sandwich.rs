//! Eventual bounds on `log(W_n * P(block))`.
//!
//! For fixed `delta` the product should eventually lie in
//! `[-k1 log n, log(k2 log n)]`; along a schedule `delta_n` the band widens
//! to `[-k1 log n / delta_n, log(k2 log n / delta_n)]`.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichSample {
    pub n: usize,
    pub delta: f64,
    /// `log W_n` (or any matched index).
    pub log_w: f64,
    /// `log` of the block probability under the searched chain.
    pub log_block_prob: f64,
}

impl SandwichSample {
    pub fn log_product(&self) -> f64 {
        self.log_w + self.log_block_prob
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    FixedDelta,
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: usize,
    pub count: usize,
    pub below: usize,
    pub above: usize,
    pub violation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub kappa1: f64,
    pub kappa2: f64,
    pub band: Band,
    pub rows: Vec<SandwichRow>,
    /// Smallest constants for which every sample at the largest `n` is inside.
    pub fitted_kappa1: f64,
    pub fitted_kappa2: f64,
}

pub fn bounds(n: usize, delta: f64, kappa1: f64, kappa2: f64, band: Band) -> (f64, f64) {
    let ln = (n as f64).ln();
    let scale = match band {
        Band::FixedDelta => 1.0,
        Band::Schedule => 1.0 / delta,
    };
    (-kappa1 * ln * scale, (kappa2 * ln * scale).ln())
}

pub fn sandwich_diagnostic(samples: &[SandwichSample], kappa1: f64, kappa2: f64, band: Band) -> SandwichReport {
    let mut ns: Vec<usize> = samples.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let rows = ns
        .iter()
        .map(|&n| {
            let mut count = 0;
            let mut below = 0;
            let mut above = 0;
            for s in samples.iter().filter(|s| s.n == n) {
                let (lo, hi) = bounds(n, s.delta, kappa1, kappa2, band);
                let v = s.log_product();
                count += 1;
                if v < lo {
                    below += 1;
                } else if v > hi {
                    above += 1;
                }
            }
            SandwichRow {
                n,
                count,
                below,
                above,
                violation_fraction: if count == 0 {
                    0.0
                } else {
                    (below + above) as f64 / count as f64
                },
            }
        })
        .collect();
    let (fitted_kappa1, fitted_kappa2) = match ns.last() {
        Some(&n_max) if n_max > 1 => {
            let mut k1 = 0.0f64;
            let mut k2 = 0.0f64;
            for s in samples.iter().filter(|s| s.n == n_max) {
                let ln = (n_max as f64).ln();
                let scale = match band {
                    Band::FixedDelta => 1.0,
                    Band::Schedule => 1.0 / s.delta,
                };
                let v = s.log_product();
                k1 = k1.max(-v / (ln * scale));
                k2 = k2.max(v.exp() / (ln * scale));
            }
            (k1, k2)
        }
        _ => (f64::NAN, f64::NAN),
    };
    SandwichReport {
        kappa1,
        kappa2,
        band,
        rows,
        fitted_kappa1,
        fitted_kappa2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_products_inside_band() {
        // W * P in [1/n, log n] is inside the band for k1 = k2 = 1
        let mut samples = Vec::new();
        for n in [10usize, 100, 1000] {
            let ln = (n as f64).ln();
            for frac in [0.0, 0.5, 1.0] {
                let prod = (1.0 / n as f64) * (1.0 - frac) + ln * frac;
                samples.push(SandwichSample {
                    n,
                    delta: 0.1,
                    log_w: prod.ln() + 5.0,
                    log_block_prob: -5.0,
                });
            }
        }
        let rep = sandwich_diagnostic(&samples, 1.0 + 1e-9, 1.0 + 1e-9, Band::FixedDelta);
        assert!(rep.rows.iter().all(|r| r.violation_fraction == 0.0));
        assert_eq!(rep.rows.len(), 3);
    }

    #[test]
    fn violations_are_counted_by_side() {
        let s = |v: f64| SandwichSample {
            n: 100,
            delta: 0.1,
            log_w: v,
            log_block_prob: 0.0,
        };
        let rep = sandwich_diagnostic(&[s(-100.0), s(0.0), s(100.0)], 1.0, 1.0, Band::FixedDelta);
        assert_eq!((rep.rows[0].below, rep.rows[0].above), (1, 1));
    }

    #[test]
    fn schedule_band_is_wider() {
        let (lo_f, hi_f) = bounds(100, 0.1, 1.0, 1.0, Band::FixedDelta);
        let (lo_s, hi_s) = bounds(100, 0.1, 1.0, 1.0, Band::Schedule);
        assert!(lo_s < lo_f && hi_s > hi_f);
    }
}
