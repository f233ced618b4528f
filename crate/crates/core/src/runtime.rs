//! Online randomised lattice algorithms, the plain lattice rule, seeded
//! randomness and built-in test integrands.
//!
//! Randomness is SplitMix64. Repetition `r` of a run with seed `s` uses the
//! stream started from `mix(s ^ mix(r + 0x9E3779B97F4A7C15))`, where `mix`
//! is the SplitMix64 finaliser, so parallel and serial runs agree exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cbc::CbcState;
use crate::errors::{Error, Result};
use crate::eval::{good_set_threshold, worst_case_error_sq, BoundParams};
use crate::num::{r_alpha, FrequencyVector, KahanSum, KorobovSpaceParams, Smoothness};
use crate::par;
use crate::primes::{PrimePool, ResidueVector};
use crate::ties;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// The independent stream for repetition `stream` of a run.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        Self::new(mix64(seed ^ mix64(stream.wrapping_add(GOLDEN))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `{0, ..., m - 1}`, unbiased by rejection.
    pub fn below(&mut self, m: u64) -> u64 {
        assert!(m > 0, "empty range");
        let limit = u64::MAX - u64::MAX % m;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % m;
            }
        }
    }
}

/// A real function on the unit cube.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
    fn known_integral(&self) -> Option<f64> {
        None
    }
    fn description(&self) -> String;
}

/// `f = c`.
#[derive(Debug, Clone)]
pub struct Constant {
    pub d: usize,
    pub value: f64,
}

impl Integrand for Constant {
    fn dim(&self) -> usize {
        self.d
    }
    fn evaluate(&self, _: &[f64]) -> f64 {
        self.value
    }
    fn known_integral(&self) -> Option<f64> {
        Some(self.value)
    }
    fn description(&self) -> String {
        format!("constant {} in {} dimensions", self.value, self.d)
    }
}

/// `f(x) = prod_j (1 + a_j cos(2 pi x_j))`, integral 1.
#[derive(Debug, Clone)]
pub struct ProductCosine {
    pub a: Vec<f64>,
}

impl ProductCosine {
    /// `a_j = j^(-decay)`.
    pub fn with_decay(d: usize, decay: f64) -> Self {
        Self {
            a: (1..=d).map(|j| (j as f64).powf(-decay)).collect(),
        }
    }
}

impl Integrand for ProductCosine {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(x)
            .map(|(a, x)| 1.0 + a * (2.0 * PI * x).cos())
            .product()
    }
    fn known_integral(&self) -> Option<f64> {
        Some(1.0)
    }
    fn description(&self) -> String {
        format!("product-cosine, a = {:?}", self.a)
    }
}

/// `f(x) = prod_j (1 + gamma_j sigma_alpha(x_j))`, integral 1.
#[derive(Debug, Clone)]
pub struct ProductBernoulli {
    pub alpha: Smoothness,
    pub gamma: Vec<f64>,
}

impl Integrand for ProductBernoulli {
    fn dim(&self) -> usize {
        self.gamma.len()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.gamma
            .iter()
            .zip(x)
            .map(|(g, x)| 1.0 + g * self.alpha.sigma(*x))
            .product()
    }
    fn known_integral(&self) -> Option<f64> {
        Some(1.0)
    }
    fn description(&self) -> String {
        format!("product-Bernoulli, alpha = {}, gamma = {:?}", self.alpha.value(), self.gamma)
    }
}

/// `f(x) = sum_h c_h cos(2 pi h . x)` over a finite symmetric frequency set;
/// integral 0.
#[derive(Debug, Clone)]
pub struct CosineSeries {
    pub d: usize,
    pub terms: Vec<(Vec<i64>, f64)>,
    pub label: String,
}

impl CosineSeries {
    /// The unit-norm function with coefficients proportional to
    /// `omega(h) r_alpha^{-2}(h)`, `0 < max |h_j| <= h_max`. Every lattice
    /// rule of the vector integrates it with a nonnegative error, and its
    /// mean error under the random-prime algorithm is the truncated
    /// randomised error. Returns the function and that error.
    pub fn extremal(v: &ResidueVector, params: &KorobovSpaceParams, h_max: i64) -> Result<(Self, f64)> {
        let d = v.dim();
        let sp = params.truncated(d)?;
        let mut terms = Vec::new();
        let mut norm_sq = KahanSum::new();
        crate::eval::for_each_frequency(d, h_max, |h| {
            if h.iter().all(|&x| x == 0) {
                return;
            }
            let fv = FrequencyVector(h.to_vec());
            let w = crate::eval::omega_weight(&fv, v);
            if w > 0.0 {
                let r = r_alpha(&sp, &fv);
                let c = w / (r * r);
                norm_sq.add(w * c);
                terms.push((h.to_vec(), c));
            }
        });
        let norm = norm_sq.value().sqrt();
        if norm > 0.0 {
            terms.iter_mut().for_each(|t| t.1 /= norm);
        }
        let f = Self {
            d,
            terms,
            label: format!("extremal series, |h_j| <= {h_max}"),
        };
        Ok((f, norm))
    }
}

impl Integrand for CosineSeries {
    fn dim(&self) -> usize {
        self.d
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(h, c)| {
                let t: f64 = h.iter().zip(x).map(|(&h, x)| h as f64 * x).sum();
                c * (2.0 * PI * t).cos()
            })
            .sum()
    }
    fn known_integral(&self) -> Option<f64> {
        Some(0.0)
    }
    fn description(&self) -> String {
        self.label.clone()
    }
}

/// Wraps a closure.
pub struct FnIntegrand<F> {
    pub d: usize,
    pub f: F,
    pub integral: Option<f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Integrand for FnIntegrand<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn known_integral(&self) -> Option<f64> {
        self.integral
    }
    fn description(&self) -> String {
        "closure".into()
    }
}

/// `(1/n) sum_k f((k z mod n) / n)`.
pub fn lattice_rule(f: &dyn Integrand, n: u64, z: &[u64]) -> f64 {
    let d = z.len();
    let step: Vec<u64> = z.iter().map(|&zj| zj % n).collect();
    let mut idx = vec![0u64; d];
    let mut x = vec![0.0; d];
    let mut acc = KahanSum::new();
    let nf = n as f64;
    for _ in 0..n {
        for j in 0..d {
            x[j] = idx[j] as f64 / nf;
        }
        acc.add(f.evaluate(&x));
        for j in 0..d {
            idx[j] += step[j];
            if idx[j] >= n {
                idx[j] -= n;
            }
        }
    }
    acc.value() / nf
}

/// Which online algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Random prime, fixed pre-constructed vector.
    Rpfv,
    /// Random prime, randomised online CBC.
    RpCbc,
    /// Random prime, random good vector.
    RpRv,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rpfv" => Ok(Self::Rpfv),
            "rp-cbc" => Ok(Self::RpCbc),
            "rp-rv" => Ok(Self::RpRv),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Settings of an online run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub algorithm: Algorithm,
    pub tau: f64,
    /// Rejection-sampling cap per repetition of `rp-rv`.
    pub max_tries: u64,
}

impl RunConfig {
    pub fn new(seed: u64, repetitions: usize, algorithm: Algorithm) -> Self {
        Self {
            seed,
            repetitions,
            algorithm,
            tau: 0.5,
            max_tries: 100_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        crate::eval::check_tau(self.tau)
    }
}

fn check_dim(f: &dyn Integrand, d: usize) -> Result<()> {
    if f.dim() != d {
        return Err(Error::Validation(format!(
            "integrand has {} dimensions but the rule has {d}",
            f.dim()
        )));
    }
    Ok(())
}

/// The random-prime fixed-vector algorithm: each repetition draws `p`
/// uniformly from the pool and applies the rule with `z mod p`.
pub fn run_rpfv(f: &dyn Integrand, v: &ResidueVector, cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(f, v.dim())?;
    let primes = v.pool().primes();
    // a rule's value depends only on the drawn prime
    let values = par::map_range(primes.len(), |i| lattice_rule(f, primes[i], v.for_prime_index(i)));
    let l = primes.len() as u64;
    Ok(par::map_range(cfg.repetitions, |r| {
        let mut rng = SplitMix64::for_stream(cfg.seed, r as u64);
        values[rng.below(l) as usize]
    }))
}

/// Online randomised CBC: draw `p`, then each `z_s` uniformly among the
/// `ceil(tau p)` best `theta` candidates.
pub fn run_rp_cbc(f: &dyn Integrand, n: u64, params: &KorobovSpaceParams, cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(f, params.dim())?;
    let pool = PrimePool::build(n)?;
    let out = par::map_range(cfg.repetitions, |r| -> Result<f64> {
        let mut rng = SplitMix64::for_stream(cfg.seed, r as u64);
        let i = rng.below(pool.len() as u64) as usize;
        let z = random_cbc_vector(pool.primes()[i], pool.primitive_roots()[i], params, cfg.tau, &mut rng)?;
        Ok(lattice_rule(f, pool.primes()[i], &z))
    });
    out.into_iter().collect()
}

/// One draw of the randomised CBC vector for `p` points.
pub fn random_cbc_vector(p: u64, g: u64, params: &KorobovSpaceParams, tau: f64, rng: &mut SplitMix64) -> Result<Vec<u64>> {
    let mut state = CbcState::with_root(p, g, params)?;
    let mut scratch = state.rader().make_scratch();
    state.push(1 % p)?;
    for _ in 1..params.dim() {
        let theta = state.theta_all_with(&mut scratch)?;
        let cands = ties::best_candidates(&theta, tau);
        let pick = cands[rng.below(cands.len() as u64) as usize];
        state.push(pick as u64)?;
    }
    Ok(state.z_prefix().to_vec())
}

/// Random prime, random good vector: draw `p`, then draw `z` uniformly from
/// `Z_p^d` until `e_det(z) <= good_set_threshold(p)`.
pub fn run_rp_rv(f: &dyn Integrand, n: u64, params: &KorobovSpaceParams, cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(f, params.dim())?;
    let pool = PrimePool::build(n)?;
    let bounds = BoundParams::new(cfg.tau, params.alpha().value())?;
    let thresholds = pool
        .primes()
        .iter()
        .map(|&p| good_set_threshold(p, params, &bounds).map(|t| t * t))
        .collect::<Result<Vec<_>>>()?;
    let out = par::map_range(cfg.repetitions, |r| -> Result<f64> {
        let mut rng = SplitMix64::for_stream(cfg.seed, r as u64);
        let i = rng.below(pool.len() as u64) as usize;
        let p = pool.primes()[i];
        let z = sample_good_vector(p, params, thresholds[i], cfg.max_tries, &mut rng)?;
        Ok(lattice_rule(f, p, &z))
    });
    out.into_iter().collect()
}

/// Rejection sampling from the good set; `threshold_sq` bounds `e_det^2`.
pub fn sample_good_vector(
    p: u64,
    params: &KorobovSpaceParams,
    threshold_sq: f64,
    max_tries: u64,
    rng: &mut SplitMix64,
) -> Result<Vec<u64>> {
    let d = params.dim();
    let mut z = vec![0u64; d];
    for _ in 0..max_tries {
        z.iter_mut().for_each(|c| *c = rng.below(p));
        if worst_case_error_sq(p, &z, params) <= threshold_sq {
            return Ok(z);
        }
    }
    Err(Error::SamplingFailure { p, tries: max_tries })
}

/// Mean, standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub sem: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value() / (n - 1) as f64
    } else {
        0.0
    };
    let std_dev = var.sqrt();
    Summary {
        count: n,
        mean,
        std_dev,
        sem: std_dev / (n as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of SplitMix64 seeded with 0
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut r = SplitMix64::for_stream(1, 2);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[r.below(7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200));
    }

    #[test]
    fn constant_rule() {
        let f = Constant { d: 3, value: 2.5 };
        assert!((lattice_rule(&f, 17, &[1, 4, 9]) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn character_sums() {
        let n = 11u64;
        let z = [1u64, 3];
        for h in [[1i64, 7], [2, 3], [0, 0], [11, 0], [4, -5]] {
            let dual = (h[0] * z[0] as i64 + h[1] * z[1] as i64).rem_euclid(n as i64) == 0;
            let c = FnIntegrand {
                d: 2,
                f: move |x: &[f64]| (2.0 * PI * (h[0] as f64 * x[0] + h[1] as f64 * x[1])).cos(),
                integral: None,
            };
            let s = FnIntegrand {
                d: 2,
                f: move |x: &[f64]| (2.0 * PI * (h[0] as f64 * x[0] + h[1] as f64 * x[1])).sin(),
                integral: None,
            };
            let expect = if dual { 1.0 } else { 0.0 };
            assert!((lattice_rule(&c, n, &z) - expect).abs() < 1e-13);
            assert!(lattice_rule(&s, n, &z).abs() < 1e-13);
        }
    }

    #[test]
    fn bernoulli_integrand_gives_error_plus_one() {
        let params = KorobovSpaceParams::new(1, vec![1.0, 1.0]).unwrap();
        let f = ProductBernoulli {
            alpha: params.alpha(),
            gamma: params.gamma_sq().to_vec(),
        };
        let q = lattice_rule(&f, 5, &[1, 2]);
        assert!((q - 1.0 - worst_case_error_sq(5, &[1, 2], &params)).abs() < 1e-13);
    }

    #[test]
    fn summary_stats() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
