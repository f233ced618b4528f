//! Convergence study: deterministic CBC against the random-prime
//! fixed-vector rule over a range of budgets `n ~ 1.2^k`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cbc::cbc_construct;
use crate::errors::{Error, Result};
use crate::eval::{randomized_error_sq_fixed, worst_case_error_sq};
use crate::num::KorobovSpaceParams;
use crate::primes::{is_prime, PrimePool};
use crate::rpfv::{construct_with_options, ConstructOptions};

/// Default guard on the largest budget in a study.
pub const DEFAULT_MAX_N: u64 = 600;

/// The prime nearest to `x`; ties go to the smaller prime.
pub fn closest_prime(x: f64) -> u64 {
    assert!(x.is_finite() && x >= 0.0, "closest_prime needs a finite nonnegative target");
    let mut lo = x.floor() as u64;
    while lo >= 2 && !is_prime(lo) {
        lo -= 1;
    }
    let mut hi = (x.ceil() as u64).max(2);
    while !is_prime(hi) {
        hi += 1;
    }
    if lo < 2 || (hi as f64 - x) < (x - lo as f64) {
        hi
    } else {
        lo
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` below two points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Settings of a study run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub params: KorobovSpaceParams,
    pub k_min: u32,
    pub k_max: u32,
    pub construct: ConstructOptions,
    /// Rows with a larger budget are skipped.
    pub max_n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    SkippedOverCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub n: u64,
    pub e_det_cbc: Option<f64>,
    pub e_ran_rpfv: Option<f64>,
    pub construct_seconds: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub alpha: u32,
    pub rows: Vec<ConvergenceRow>,
    pub slope_det: Option<f64>,
    pub slope_ran: Option<f64>,
}

impl ConvergenceTable {
    fn completed(&self) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Ok)
    }

    fn fit(&mut self) {
        let rows: Vec<&ConvergenceRow> = self.completed().collect();
        let n: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let det: Vec<f64> = rows.iter().filter_map(|r| r.e_det_cbc).collect();
        let ran: Vec<f64> = rows.iter().filter_map(|r| r.e_ran_rpfv).collect();
        self.slope_det = loglog_slope(&n, &det);
        self.slope_ran = loglog_slope(&n, &ran);
    }

    /// Reference lines `e_det(n_0) (n/n_0)^-alpha` and
    /// `e_ran(n_0) (n/n_0)^(-alpha-1/2)`, anchored at the first completed row.
    pub fn reference_columns(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let first = self.completed().next();
        let a = self.alpha as f64;
        self.rows
            .iter()
            .map(|r| match first {
                Some(f) if r.status == RowStatus::Ok => {
                    let ratio = r.n as f64 / f.n as f64;
                    (
                        f.e_det_cbc.map(|e| e * ratio.powf(-a)),
                        f.e_ran_rpfv.map(|e| e * ratio.powf(-a - 0.5)),
                    )
                }
                _ => (None, None),
            })
            .collect()
    }

    /// CSV with a header row and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        let mut out = String::from(
            "k,n,e_det_cbc,e_ran_rpfv,ref_n_pow_minus_alpha,ref_n_pow_minus_alpha_half,construct_seconds,status\n",
        );
        for (r, (ra, rh)) in self.rows.iter().zip(self.reference_columns()) {
            let status = match r.status {
                RowStatus::Ok => "ok",
                RowStatus::SkippedOverCap => "skipped-over-cap",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                r.n,
                fmt(r.e_det_cbc),
                fmt(r.e_ran_rpfv),
                fmt(ra),
                fmt(rh),
                fmt(r.construct_seconds),
                status
            ));
        }
        out
    }
}

/// Budgets `n_k` = prime closest to `1.2^k`, with duplicates dropped.
pub fn study_budgets(k_min: u32, k_max: u32) -> Vec<(u32, u64)> {
    let mut out: Vec<(u32, u64)> = Vec::new();
    for k in k_min..=k_max {
        let n = closest_prime(1.2f64.powi(k as i32));
        if out.last().map_or(true, |&(_, m)| m < n) {
            out.push((k, n));
        }
    }
    out
}

/// Runs the study, calling `progress` after each row.
pub fn run_study(cfg: &StudyConfig, mut progress: impl FnMut(&ConvergenceRow)) -> Result<ConvergenceTable> {
    if cfg.k_min > cfg.k_max {
        return Err(Error::Config(format!("empty k range {}..={}", cfg.k_min, cfg.k_max)));
    }
    let mut table = ConvergenceTable {
        alpha: cfg.params.alpha().value(),
        rows: Vec::new(),
        slope_det: None,
        slope_ran: None,
    };
    for (k, n) in study_budgets(cfg.k_min, cfg.k_max) {
        let row = if n > cfg.max_n || n < 4 {
            ConvergenceRow {
                k,
                n,
                e_det_cbc: None,
                e_ran_rpfv: None,
                construct_seconds: None,
                status: RowStatus::SkippedOverCap,
            }
        } else {
            let z = cbc_construct(n, &cfg.params)?;
            let e_det = worst_case_error_sq(n, &z, &cfg.params).max(0.0).sqrt();
            let start = Instant::now();
            let built = construct_with_options(PrimePool::build(n)?, &cfg.params, &cfg.construct)?;
            let seconds = start.elapsed().as_secs_f64();
            let e_ran = randomized_error_sq_fixed(&built.vector, &cfg.params).error();
            ConvergenceRow {
                k,
                n,
                e_det_cbc: Some(e_det),
                e_ran_rpfv: Some(e_ran),
                construct_seconds: Some(seconds),
                status: RowStatus::Ok,
            }
        };
        progress(&row);
        table.rows.push(row);
    }
    table.fit();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_prime_examples() {
        assert_eq!(closest_prime(15.407), 17);
        assert_eq!(closest_prime(12.0), 11);
        assert_eq!(closest_prime(9.0), 7);
        assert_eq!(closest_prime(2.0), 2);
        assert_eq!(closest_prime(0.5), 2);
        assert_eq!(closest_prime(100.0), 101);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 20.0, 40.0, 80.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 1.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[2.0]), None);
    }

    #[test]
    fn budgets_are_increasing() {
        let b = study_budgets(15, 26);
        assert!(b.windows(2).all(|w| w[0].1 < w[1].1));
        assert_eq!(b.first().unwrap().1, 17);
    }

    #[test]
    fn single_row_has_no_slope() {
        let cfg = StudyConfig {
            params: KorobovSpaceParams::with_poly_weights(2, 1, 3.0).unwrap(),
            k_min: 15,
            k_max: 15,
            construct: ConstructOptions::default(),
            max_n: DEFAULT_MAX_N,
        };
        let t = run_study(&cfg, |_| {}).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.slope_ran, None);
        assert!(t.to_csv().lines().count() == 2);
    }

    #[test]
    fn cap_skips_rows() {
        let cfg = StudyConfig {
            params: KorobovSpaceParams::with_poly_weights(2, 1, 3.0).unwrap(),
            k_min: 15,
            k_max: 17,
            construct: ConstructOptions::default(),
            max_n: 18,
        };
        let t = run_study(&cfg, |_| {}).unwrap();
        assert_eq!(t.rows[0].status, RowStatus::Ok);
        assert!(t.rows[1..].iter().all(|r| r.status == RowStatus::SkippedOverCap));
        assert!(t.to_csv().contains("skipped-over-cap"));
    }
}
