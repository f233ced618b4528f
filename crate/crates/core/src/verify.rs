//! Oracle and property suites, each reporting named pass/fail checks.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::cbc::{cbc_construct, CbcState};
use crate::conv::rader_cbc_kernel;
use crate::errors::{Error, Result};
use crate::eval::{
    component_threshold, good_set_threshold, randomized_error_sq_fixed, randomized_error_sq_truncated,
    theorem_bound_min, truncation_tail_bound, worst_case_error_sq, worst_case_error_sq_truncated, BoundParams,
};
use crate::num::KorobovSpaceParams;
use crate::oracle::{cbc_naive, exhaustive_eran, rader_kernel_naive, t_hat_naive, theta_naive};
use crate::primes::{is_prime, primitive_root, PrimePool, ResidueVector};
use crate::rpfv::{construct_fixed_vector, ConstructOptions, MemoryMode, RpfvBuilder};
use crate::runtime::SplitMix64;
use crate::ties;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    LemmaAveraging,
    FftOracle,
    EranOracle,
    WceOracle,
    GoodSets,
    CbcOracle,
    TheoremBound,
    ExhaustiveMean,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::LemmaAveraging,
        Suite::FftOracle,
        Suite::EranOracle,
        Suite::WceOracle,
        Suite::GoodSets,
        Suite::CbcOracle,
        Suite::TheoremBound,
        Suite::ExhaustiveMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::LemmaAveraging => "lemma-averaging",
            Suite::FftOracle => "fft-oracle",
            Suite::EranOracle => "eran-oracle",
            Suite::WceOracle => "wce-oracle",
            Suite::GoodSets => "good-sets",
            Suite::CbcOracle => "cbc-oracle",
            Suite::TheoremBound => "theorem-bound",
            Suite::ExhaustiveMean => "exhaustive-mean",
        }
    }

    pub fn run(self) -> Result<SuiteReport> {
        let start = Instant::now();
        let checks = match self {
            Suite::LemmaAveraging => lemma_averaging(),
            Suite::FftOracle => fft_oracle()?,
            Suite::EranOracle => eran_oracle()?,
            Suite::WceOracle => wce_oracle()?,
            Suite::GoodSets => good_sets()?,
            Suite::CbcOracle => cbc_oracle()?,
            Suite::TheoremBound => theorem_bound()?,
            Suite::ExhaustiveMean => exhaustive_mean()?,
        };
        Ok(SuiteReport {
            suite: self,
            checks,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Parses a suite name, with `all` expanding to every suite.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>> {
    if s == "all" {
        Ok(Suite::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `max |a - b| / max |b|`.
pub fn normwise_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&p| is_prime(p)).collect()
}

/// Counts `z in Z_p^d` with `h . z = 0 (mod p)` and compares with
/// `p^(d-1) (1 + (p - 1) [h = 0 mod p])`.
pub fn lemma_averaging() -> Vec<Check> {
    let mut out = Vec::new();
    for p in [3u64, 5, 7] {
        for d in 1..=3u32 {
            let mut bad = 0usize;
            let mut total = 0usize;
            crate::eval::for_each_frequency(d as usize, p as i64, |h| {
                let hm: Vec<u64> = h.iter().map(|&x| x.rem_euclid(p as i64) as u64).collect();
                let mut count = 0u64;
                for idx in 0..p.pow(d) {
                    let mut t = idx;
                    let mut dot = 0u64;
                    for &hj in &hm {
                        dot += hj * (t % p);
                        t /= p;
                    }
                    count += (dot % p == 0) as u64;
                }
                let zero = hm.iter().all(|&x| x == 0) as u64;
                if count != p.pow(d - 1) * (1 + (p - 1) * zero) {
                    bad += 1;
                }
                total += 1;
            });
            out.push(Check::new(
                format!("averaging p={p} d={d}"),
                bad == 0,
                format!("{total} frequencies, {bad} mismatches"),
            ));
        }
    }
    out
}

/// Rader kernel against the double loop on random inputs, and `theta_all`
/// against direct evaluation for every prime up to 101.
pub fn fft_oracle() -> Result<Vec<Check>> {
    let mut rng = SplitMix64::new(0x5eed_0001);
    let primes = primes_in(2, 101);
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = primes[rng.below(primes.len() as u64) as usize];
        let v: Vec<f64> = (0..p).map(|_| rng.next_f64() - 0.5).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.next_f64() - 0.5).collect();
        let fast = rader_cbc_kernel(p, primitive_root(p)?, &v, &w)?;
        worst = worst.max(normwise_rel(&fast, &rader_kernel_naive(&v, &w)));
    }
    out.push(Check::new(
        "rader kernel vs naive, 20 random instances",
        worst <= 1e-9,
        format!("max rel {worst:.3e}"),
    ));
    let params = KorobovSpaceParams::with_poly_weights(4, 2, 1.5)?;
    let mut worst = 0.0f64;
    for &p in &primes {
        let mut st = CbcState::new(p, &params)?;
        for _ in 0..3 {
            st.push(rng.below(p))?;
            let fast = st.theta_all()?;
            worst = worst.max(normwise_rel(&fast, &theta_naive(p, st.z_prefix(), &params)));
        }
    }
    out.push(Check::new(
        "theta_all vs naive, all p <= 101",
        worst <= 1e-9,
        format!("max rel {worst:.3e}"),
    ));
    Ok(out)
}

/// Pairwise point formula against the truncated double-prime dual sum at
/// `n = 20`, `d = 2`, `alpha = 2`.
pub fn eran_oracle() -> Result<Vec<Check>> {
    let params = KorobovSpaceParams::with_poly_weights(2, 2, 2.0)?;
    let pool = PrimePool::build(20)?;
    let mut rng = SplitMix64::new(0x5eed_0002);
    let constructed = construct_fixed_vector(20, 2, &params, 0.5, MemoryMode::Auto)?;
    let random = ResidueVector::new(
        pool.clone(),
        pool.primes().iter().map(|&p| vec![1, rng.below(p)]).collect(),
    )?;
    let mut out = Vec::new();
    for (label, v) in [("constructed", constructed), ("random", random)] {
        let exact = randomized_error_sq_fixed(&v, &params).squared_error;
        let trunc = randomized_error_sq_truncated(&v, &params, 250).squared_error;
        let rel = (exact - trunc).abs() / exact;
        out.push(Check::new(
            format!("e_ran^2 pair formula vs truncated sum, {label} vector"),
            rel <= 1e-4,
            format!("exact {exact:.12e}, truncated {trunc:.12e}, rel {rel:.3e}"),
        ));
    }
    Ok(out)
}

/// Point formula against the truncated dual-lattice sum for 30 random rules.
pub fn wce_oracle() -> Result<Vec<Check>> {
    let params = KorobovSpaceParams::with_poly_weights(3, 2, 2.0)?;
    let primes = primes_in(11, 97);
    let mut rng = SplitMix64::new(0x5eed_0003);
    let h_max = 100;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    let mut used = 0.0f64;
    for _ in 0..30 {
        let p = primes[rng.below(primes.len() as u64) as usize];
        let d = 1 + rng.below(3) as usize;
        let z: Vec<u64> = (0..d).map(|_| rng.below(p)).collect();
        let exact = worst_case_error_sq(p, &z, &params);
        let trunc = worst_case_error_sq_truncated(p, &z, &params, h_max);
        let tail = truncation_tail_bound(&params, d, h_max);
        let diff = (exact - trunc).abs();
        worst = worst.max(diff / exact);
        used = used.max(diff / (1e-5 * exact + tail));
        if diff > 1e-5 * exact + tail {
            bad.push(format!("p={p} z={z:?}"));
        }
    }
    Ok(vec![Check::new(
        "e_det^2 point formula vs truncated dual sum, 30 instances",
        bad.is_empty(),
        if bad.is_empty() {
            format!("max rel diff {worst:.3e}, max diff / allowance {used:.3}")
        } else {
            format!("failed: {}", bad.join("; "))
        },
    )])
}

/// Exhaustive good-set counts for whole vectors and single components.
pub fn good_sets() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for alpha in [1, 2] {
        let params = KorobovSpaceParams::with_poly_weights(2, alpha, 2.0)?;
        for p in [5u64, 7, 11] {
            for tau in [0.25, 0.5] {
                let t = good_set_threshold(p, &params, &BoundParams::new(tau, alpha)?)?;
                let t2 = t * t;
                let count = (0..p * p)
                    .filter(|&i| worst_case_error_sq(p, &[i / p, i % p], &params) <= t2)
                    .count();
                let need = (tau * (p * p) as f64).ceil() as usize;
                out.push(Check::new(
                    format!("vector good set alpha={alpha} p={p} tau={tau}"),
                    count >= need,
                    format!("{count} >= {need}"),
                ));
            }
        }
    }
    let mut rng = SplitMix64::new(0x5eed_0004);
    for alpha in [1, 2] {
        let params = KorobovSpaceParams::with_poly_weights(3, alpha, 2.0)?;
        let bounds = BoundParams::new(0.5, alpha)?;
        let mut bad = Vec::new();
        let mut cases = 0;
        for p in primes_in(2, 31) {
            for s in 2..=3usize {
                let threshold = component_threshold(p, s, &params, &bounds)?;
                let need = ties::candidate_count(0.5, p as usize);
                let cbc = cbc_construct(p, &params)?;
                let random: Vec<u64> = (0..s - 1).map(|_| rng.below(p)).collect();
                for prefix in [cbc[..s - 1].to_vec(), random] {
                    let theta = theta_naive(p, &prefix, &params);
                    let count = theta.iter().filter(|&&t| t <= threshold).count();
                    cases += 1;
                    if count < need {
                        bad.push(format!("p={p} s={s} prefix={prefix:?}: {count} < {need}"));
                    }
                }
            }
        }
        out.push(Check::new(
            format!("component good sets alpha={alpha}, p <= 31"),
            bad.is_empty(),
            if bad.is_empty() {
                format!("{cases} prefixes")
            } else {
                bad.join("; ")
            },
        ));
    }
    Ok(out)
}

/// Fast CBC, `T^` and full construction against the naive references.
pub fn cbc_oracle() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let mut cases = 0;
    for p in [31u64, 61, 101] {
        for d in 1..=6 {
            let params = KorobovSpaceParams::with_poly_weights(d, 2, 1.0)?;
            if cbc_construct(p, &params)? != cbc_naive(p, &params) {
                bad.push(format!("p={p} d={d}"));
            }
            cases += 1;
        }
    }
    out.push(Check::new(
        "fast CBC equals naive CBC, p in {31,61,101}, d <= 6",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{cases} cases identical")
        } else {
            format!("differ: {}", bad.join("; "))
        },
    ));
    let mut worst = 0.0f64;
    for d in 2..=3 {
        for alpha in [1, 2] {
            let params = KorobovSpaceParams::with_poly_weights(d, alpha, 1.0)?;
            let pool = PrimePool::build(12)?;
            let mut b = RpfvBuilder::new(pool.clone(), &params, &ConstructOptions::default())?;
            while let Some((_, i)) = b.position() {
                let fast = b.t_hat_all(i)?;
                let slow = t_hat_naive(&pool, &params, &b.residues(), i);
                worst = worst.max(normwise_rel(&fast, &slow));
                b.step()?;
            }
        }
    }
    out.push(Check::new(
        "t_hat_all vs triple loop, n=12, d <= 3",
        worst <= 1e-9,
        format!("max rel {worst:.3e}"),
    ));
    Ok(out)
}

/// `e_ran` of constructed vectors against the minimised theorem bound.
pub fn theorem_bound() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for alpha in [1, 2] {
        let params = KorobovSpaceParams::with_poly_weights(5, alpha, 3.0)?;
        let bounds = BoundParams::new(0.5, alpha)?;
        for n in [20u64, 50, 100, 200] {
            let v = construct_fixed_vector(n, 5, &params, 0.5, MemoryMode::Auto)?;
            let e = randomized_error_sq_fixed(&v, &params).error();
            let (bound, lambda) = theorem_bound_min(n, &params, &bounds)?;
            out.push(Check::new(
                format!("theorem bound alpha={alpha} n={n}"),
                e <= bound,
                format!("e_ran {e:.6e} <= bound {bound:.6e} at lambda {lambda:.4}"),
            ));
        }
    }
    Ok(out)
}

/// Constructed `e_ran` at `n = 12`, `d = 2` against the mean over every
/// choice of second components from the `theta` candidate sets.
pub fn exhaustive_mean() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let tau = 0.5;
    for alpha in [1, 2] {
        let params = KorobovSpaceParams::with_poly_weights(2, alpha, 2.0)?;
        let pool = PrimePool::build(12)?;
        let v = construct_fixed_vector(12, 2, &params, tau, MemoryMode::Auto)?;
        let e = randomized_error_sq_fixed(&v, &params).error();
        let fixed = vec![vec![1u64]; pool.len()];
        let candidates: Vec<Vec<u64>> = pool
            .primes()
            .iter()
            .map(|&p| {
                let theta = theta_naive(p, &[1], &params);
                ties::best_candidates(&theta, tau).into_iter().map(|c| c as u64).collect()
            })
            .collect();
        let (mean, lo, hi, count) = exhaustive_eran(&pool, &params, &fixed, &candidates)?;
        out.push(Check::new(
            format!("exhaustive mean alpha={alpha}"),
            e <= mean,
            format!("e_ran {e:.6e} <= mean {mean:.6e} over {count} (min {lo:.6e}, max {hi:.6e})"),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(parse_suites("all").unwrap().len(), Suite::ALL.len());
        assert!(parse_suites("nope").is_err());
    }

    #[test]
    fn averaging_suite_passes() {
        assert!(lemma_averaging().iter().all(|c| c.passed));
    }

    #[test]
    fn normwise_handles_zero_reference() {
        assert_eq!(normwise_rel(&[0.5], &[0.0]), 0.5);
        assert_eq!(normwise_rel(&[1.0, 2.0], &[1.0, 4.0]), 0.5);
    }
}
