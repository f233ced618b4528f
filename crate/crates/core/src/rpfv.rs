//! Component-by-component, prime-by-prime construction of the fixed
//! residue vector for the random-prime fixed-vector algorithm.
//!
//! For every dimension `s >= 2` and every prime `p` in ascending order, the
//! `ceil(tau p)` candidates with the smallest `theta_s^(p)` are kept and the
//! one minimising the `T^_s^(p)` criterion is fixed. `T^` couples `p` to the
//! other primes through the pair tables
//! `P^(p,q)(k, l) = prod_{j<s} (1 + gamma_j^2 sigma(k z_j^(p) / p + l z_j^(q) / q))`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cbc::CbcState;
use crate::conv::RaderAccumulator;
use crate::errors::{Error, Result};
use crate::eval::check_tau;
use crate::num::{KorobovSpaceParams, Smoothness};
use crate::par;
use crate::primes::{mod_inv, PrimePool, ResidueVector};
use crate::ties;

/// Where the pair tables live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    /// Cached if the tables fit the memory budget, streaming otherwise.
    #[default]
    Auto,
    Cached,
    /// Recompute table rows from the residue prefixes on every use.
    Streaming,
}

impl std::str::FromStr for MemoryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "cached" => Ok(Self::Cached),
            "streaming" => Ok(Self::Streaming),
            other => Err(Error::Config(format!("unknown memory mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Cached => "cached",
            Self::Streaming => "streaming",
        })
    }
}

pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

/// Bytes needed by cached mode: a sigma table and a product table of
/// `p q` doubles for every unordered pair.
pub fn cached_bytes(primes: &[u64]) -> u64 {
    let mut total = 0u64;
    for (i, &p) in primes.iter().enumerate() {
        for &q in &primes[i + 1..] {
            total += p * q * 16;
        }
    }
    total
}

fn resolve_mode(mode: MemoryMode, primes: &[u64], budget: u64) -> Result<MemoryMode> {
    let required = cached_bytes(primes);
    match mode {
        MemoryMode::Streaming => Ok(MemoryMode::Streaming),
        MemoryMode::Cached if required > budget => Err(Error::Capacity { required, budget }),
        MemoryMode::Cached => Ok(MemoryMode::Cached),
        MemoryMode::Auto if required > budget => Ok(MemoryMode::Streaming),
        MemoryMode::Auto => Ok(MemoryMode::Cached),
    }
}

fn pair_index(l: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < l);
    i * l - i * (i + 1) / 2 + (j - i - 1)
}

/// `sigma(m / (p q))` for `m` in `Z_{pq}`, one table per unordered prime
/// pair. Empty in streaming mode, where values are computed on demand.
#[derive(Debug, Clone)]
pub struct SigmaGrid {
    alpha: Smoothness,
    primes: Vec<u64>,
    pairs: Vec<Vec<f64>>,
}

impl SigmaGrid {
    pub fn new(alpha: Smoothness, primes: &[u64], tabulate: bool) -> Self {
        let l = primes.len();
        let mut pairs = Vec::new();
        if tabulate {
            let idx: Vec<(usize, usize)> = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).collect();
            pairs = par::map_slice(&idx, |&(i, j)| {
                let m = primes[i] * primes[j];
                (0..m).map(|k| alpha.sigma_frac(k, m)).collect()
            });
        }
        Self {
            alpha,
            primes: primes.to_vec(),
            pairs,
        }
    }

    pub fn is_tabulated(&self) -> bool {
        !self.pairs.is_empty() || self.primes.len() < 2
    }

    /// `sigma(m / (p_i p_j))` for `i < j`.
    #[inline]
    pub fn pair(&self, i: usize, j: usize, m: u64) -> f64 {
        if self.pairs.is_empty() {
            self.alpha.sigma_frac(m, self.primes[i] * self.primes[j])
        } else {
            self.pairs[pair_index(self.primes.len(), i, j)][m as usize]
        }
    }

    /// The whole table for the pair, if tabulated.
    pub fn pair_table(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.pairs
            .get(pair_index(self.primes.len(), i, j))
            .map(Vec::as_slice)
    }
}

/// The pair tables `P^(p_i, p_j)_{s-1}(a, b)` for `i < j`, stored row-major
/// with `a` in `Z_{p_i}` indexing rows.
#[derive(Debug, Clone)]
pub struct PairProductCache {
    mode: MemoryMode,
    primes: Vec<u64>,
    gamma_sq: Vec<f64>,
    sigma: SigmaGrid,
    tables: Vec<Vec<f64>>,
    depth: usize,
}

impl PairProductCache {
    /// Empty tables (`depth = 0`, all entries 1). `mode` must be resolved.
    pub fn new(mode: MemoryMode, primes: &[u64], params: &KorobovSpaceParams) -> Self {
        assert!(mode != MemoryMode::Auto, "memory mode must be resolved");
        let cached = mode == MemoryMode::Cached;
        let l = primes.len();
        let mut tables = Vec::new();
        if cached {
            for i in 0..l {
                for j in i + 1..l {
                    tables.push(vec![1.0; (primes[i] * primes[j]) as usize]);
                }
            }
        }
        Self {
            mode,
            primes: primes.to_vec(),
            gamma_sq: params.gamma_sq().to_vec(),
            sigma: SigmaGrid::new(params.alpha(), primes, cached),
            tables,
            depth: 0,
        }
    }

    pub fn mode(&self) -> MemoryMode {
        self.mode
    }

    pub fn sigma(&self) -> &SigmaGrid {
        &self.sigma
    }

    /// Number of dimensions folded into the tables.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Multiplies factor `t` into `row[b] = P(a, b)`.
    #[allow(clippy::too_many_arguments)]
    fn fold_row(&self, i: usize, j: usize, a: u64, zi: u64, zj: u64, g: f64, row: &mut [f64]) {
        let (p, q) = (self.primes[i], self.primes[j]);
        let n = p * q;
        // sigma(a zi / p + b zj / q) sits at index (a zi q + b zj p) mod pq
        let mut m = (a * zi % p) * q;
        let step = (zj % q) * p;
        for r in row.iter_mut() {
            *r *= 1.0 + g * self.sigma.pair(i, j, m);
            m += step;
            if m >= n {
                m -= n;
            }
        }
    }

    /// Row `a` of the pair table for `i < j`; `prefixes[k]` are the residues
    /// of prime `k` with at least `depth` entries.
    pub fn row<'a>(&'a self, i: usize, j: usize, a: usize, prefixes: &[&[u64]], buf: &'a mut Vec<f64>) -> &'a [f64] {
        let q = self.primes[j] as usize;
        if self.mode == MemoryMode::Cached {
            let t = &self.tables[pair_index(self.primes.len(), i, j)];
            return &t[a * q..(a + 1) * q];
        }
        buf.clear();
        buf.resize(q, 1.0);
        let dims = prefixes[i].iter().zip(prefixes[j]).zip(&self.gamma_sq).take(self.depth);
        for ((&zi, &zj), &g) in dims {
            self.fold_row(i, j, a as u64, zi, zj, g, buf);
        }
        buf
    }

    /// Folds dimension `depth + 1` into the tables.
    pub fn advance(&mut self, prefixes: &[&[u64]]) -> Result<()> {
        let t = self.depth;
        if t >= self.gamma_sq.len() || prefixes.iter().any(|z| z.len() <= t) {
            return Err(Error::Sequencing(format!(
                "cannot fold dimension {} into the pair tables",
                t + 1
            )));
        }
        if self.mode == MemoryMode::Cached {
            let l = self.primes.len();
            let idx: Vec<(usize, usize)> = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).collect();
            let mut tables = std::mem::take(&mut self.tables);
            let this = &*self;
            par::for_each_mut(&mut tables, |k, table| {
                let (i, j) = idx[k];
                let q = this.primes[j] as usize;
                for (a, row) in table.chunks_mut(q).enumerate() {
                    this.fold_row(i, j, a as u64, prefixes[i][t], prefixes[j][t], this.gamma_sq[t], row);
                }
            });
            self.tables = tables;
        }
        self.depth += 1;
        Ok(())
    }
}

/// Options for [`construct_with_options`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructOptions {
    pub tau: f64,
    pub mode: MemoryMode,
    pub memory_budget: u64,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            tau: 0.5,
            mode: MemoryMode::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Incremental state of the construction.
#[derive(Debug, Clone)]
pub struct RpfvBuilder {
    pool: PrimePool,
    params: KorobovSpaceParams,
    tau: f64,
    cbc: Vec<CbcState>,
    cache: PairProductCache,
    /// Dimension currently being filled (1-based).
    dim: usize,
    /// Index of the prime whose residue is chosen next.
    next: usize,
}

impl RpfvBuilder {
    /// Fixes `z_1 = 1` for every prime.
    pub fn new(pool: PrimePool, params: &KorobovSpaceParams, opts: &ConstructOptions) -> Result<Self> {
        check_tau(opts.tau)?;
        let mode = resolve_mode(opts.mode, pool.primes(), opts.memory_budget)?;
        let mut cbc = pool
            .primes()
            .iter()
            .zip(pool.primitive_roots())
            .map(|(&p, &g)| CbcState::with_root(p, g, params))
            .collect::<Result<Vec<_>>>()?;
        for st in &mut cbc {
            st.push(1)?;
        }
        let mut cache = PairProductCache::new(mode, pool.primes(), params);
        let prefixes: Vec<&[u64]> = cbc.iter().map(CbcState::z_prefix).collect();
        cache.advance(&prefixes)?;
        Ok(Self {
            pool,
            params: params.clone(),
            tau: opts.tau,
            cbc,
            cache,
            dim: 2,
            next: 0,
        })
    }

    pub fn pool(&self) -> &PrimePool {
        &self.pool
    }

    pub fn mode(&self) -> MemoryMode {
        self.cache.mode()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `(s, prime index)` of the next choice, or `None` when complete.
    pub fn position(&self) -> Option<(usize, usize)> {
        (self.dim <= self.params.dim()).then_some((self.dim, self.next))
    }

    pub fn is_complete(&self) -> bool {
        self.position().is_none()
    }

    pub fn cbc_state(&self, i: usize) -> &CbcState {
        &self.cbc[i]
    }

    pub fn pair_cache(&self) -> &PairProductCache {
        &self.cache
    }

    fn prefixes(&self) -> Vec<&[u64]> {
        self.cbc.iter().map(CbcState::z_prefix).collect()
    }

    fn check_turn(&self, i: usize) -> Result<usize> {
        let Some((s, next)) = self.position() else {
            return Err(Error::Sequencing("construction already complete".into()));
        };
        if i != next {
            return Err(Error::Sequencing(format!(
                "dimension {s}: prime index {i} requested but the residue for index {next} is due"
            )));
        }
        Ok(s)
    }

    /// `theta_s^(p)` for prime index `i`.
    pub fn theta(&self, i: usize) -> Result<Vec<f64>> {
        self.check_turn(i)?;
        self.cbc[i].theta_all()
    }

    /// `T^_s^(p)(z)` for every `z` in `Z_p`, prime index `i`.
    pub fn t_hat_all(&self, i: usize) -> Result<Vec<f64>> {
        let theta = self.theta(i)?;
        self.t_hat_from_theta(i, theta)
    }

    fn t_hat_from_theta(&self, i: usize, theta: Vec<f64>) -> Result<Vec<f64>> {
        let s = self.check_turn(i)?;
        let primes = self.pool.primes();
        let l = primes.len();
        let p = primes[i];
        let pu = p as usize;
        let g = self.params.gamma_sq()[s - 1];
        let state = &self.cbc[i];
        let plan = state.rader();
        let prefixes = self.prefixes();

        // q < p: sum_l S_l with v_l[m] = sigma(m/p + l z^(q)/q), w_l = P(., l)
        let lower = par::map_range(i, |j| -> Result<Vec<f64>> {
            let q = primes[j];
            let zq = prefixes[j][s - 1];
            let mut scratch = plan.make_scratch();
            let mut acc = RaderAccumulator::new(plan);
            let mut buf = Vec::new();
            let mut v = vec![0.0; pu];
            let n = p * q;
            for ell in 0..q as usize {
                let row = self.cache.row(j, i, ell, &prefixes, &mut buf);
                let shift = (ell as u64 * zq % q) * p;
                let mut m = shift;
                for vm in v.iter_mut() {
                    *vm = self.cache.sigma().pair(j, i, m);
                    m += q;
                    if m >= n {
                        m -= n;
                    }
                }
                acc.add(plan, &v, row, &mut scratch)?;
            }
            let mut out = acc.finish(plan, &mut scratch)?;
            let c = 2.0 * g / (p * q) as f64;
            out.iter_mut().for_each(|x| *x *= c);
            Ok(out)
        });

        // q > p: row sums W_q[k] = sum_l P(k, l), merged through k -> k q
        let upper = par::map_range(l - i - 1, |t| -> Vec<f64> {
            let j = i + 1 + t;
            let mut buf = Vec::new();
            (0..pu)
                .map(|k| self.cache.row(i, j, k, &prefixes, &mut buf).iter().sum::<f64>())
                .collect()
        });
        let two_alpha_1 = 2 * self.params.alpha().value() as i32 + 1;
        let mut w_tot = vec![0.0; pu];
        for (t, w) in upper.iter().enumerate() {
            let q = primes[i + 1 + t];
            let c = 2.0 * g / ((q as f64).powi(two_alpha_1) * p as f64);
            let q_inv = mod_inv(q % p, p).expect("distinct primes");
            for (k, wt) in w_tot.iter_mut().enumerate() {
                *wt += c * w[(k as u64 * q_inv % p) as usize];
            }
        }
        let third = if upper.is_empty() {
            None
        } else {
            let mut scratch = plan.make_scratch();
            Some(plan.kernel(state.sigma(), &w_tot, &mut scratch)?)
        };

        let mut t_hat = theta;
        for part in lower {
            let part = part?;
            t_hat.iter_mut().zip(&part).for_each(|(t, x)| *t += x);
        }
        if let Some(third) = third {
            t_hat.iter_mut().zip(&third).for_each(|(t, x)| *t += x);
        }
        Ok(t_hat)
    }

    /// The candidate-independent amount by which `T^` exceeds the exact
    /// criterion `T` for prime index `i`: the `q < p` terms with
    /// `h_s = 0 (mod p)`.
    pub fn dropped_term(&self, i: usize) -> Result<f64> {
        let s = self.check_turn(i)?;
        let primes = self.pool.primes();
        let p = primes[i];
        let alpha = self.params.alpha();
        let g = self.params.gamma_sq()[s - 1];
        let prefixes = self.prefixes();
        let mut buf = Vec::new();
        let mut total = 0.0;
        for j in 0..i {
            let q = primes[j];
            let zq = prefixes[j][s - 1];
            let mut acc = 0.0;
            for ell in 0..q {
                let row_sum: f64 = self.cache.row(j, i, ell as usize, &prefixes, &mut buf).iter().sum();
                acc += alpha.sigma_frac(ell * p % q * zq % q, q) * row_sum;
            }
            total += 2.0 * g / ((p * q) as f64 * (p as f64).powi(2 * alpha.value() as i32)) * acc;
        }
        Ok(total)
    }

    /// Fixes the residue of prime index `i` in the current dimension.
    pub fn choose(&mut self, i: usize, z: u64) -> Result<()> {
        self.check_turn(i)?;
        let p = self.pool.primes()[i];
        if z >= p {
            return Err(Error::Validation(format!("residue {z} not reduced modulo {p}")));
        }
        self.cbc[i].push(z)?;
        self.next += 1;
        if self.next == self.pool.len() {
            self.next = 0;
            self.dim += 1;
            if self.dim <= self.params.dim() {
                let prefixes: Vec<&[u64]> = self.cbc.iter().map(CbcState::z_prefix).collect();
                self.cache.advance(&prefixes)?;
            }
        }
        Ok(())
    }

    /// One selection step: the `T^` minimiser among the `ceil(tau p)` best
    /// `theta` candidates. Returns the chosen residue.
    pub fn step(&mut self) -> Result<u64> {
        let (_, i) = self
            .position()
            .ok_or_else(|| Error::Sequencing("construction already complete".into()))?;
        let theta = self.cbc[i].theta_all()?;
        let t_hat = self.t_hat_from_theta(i, theta.clone())?;
        let z = ties::select_candidate(&theta, &t_hat, self.tau) as u64;
        self.choose(i, z)?;
        Ok(z)
    }

    /// The residues chosen so far, per prime.
    pub fn residues(&self) -> Vec<Vec<u64>> {
        self.cbc.iter().map(|c| c.z_prefix().to_vec()).collect()
    }

    pub fn finish(mut self) -> Result<ResidueVector> {
        while !self.is_complete() {
            self.step()?;
        }
        let residues = self.residues();
        ResidueVector::new(self.pool, residues)
    }
}

/// A constructed vector with its run metadata.
#[derive(Debug, Clone)]
pub struct Construction {
    pub vector: ResidueVector,
    pub mode: MemoryMode,
    pub seconds: f64,
}

pub fn construct_with_options(pool: PrimePool, params: &KorobovSpaceParams, opts: &ConstructOptions) -> Result<Construction> {
    let start = Instant::now();
    let builder = RpfvBuilder::new(pool, params, opts)?;
    let mode = builder.mode();
    let vector = builder.finish()?;
    Ok(Construction {
        vector,
        mode,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fixed residue vector for budget `n` in the first `d` dimensions of
/// `params`.
pub fn construct_fixed_vector(n: u64, d: usize, params: &KorobovSpaceParams, tau: f64, mode: MemoryMode) -> Result<ResidueVector> {
    check_tau(tau)?;
    let params = params.truncated(d)?;
    let pool = PrimePool::build(n)?;
    let opts = ConstructOptions {
        tau,
        mode,
        ..ConstructOptions::default()
    };
    Ok(construct_with_options(pool, &params, &opts)?.vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbc::cbc_construct;

    #[test]
    fn single_prime_reduces_to_cbc() {
        let params = KorobovSpaceParams::with_poly_weights(4, 2, 1.0).unwrap();
        let v = construct_fixed_vector(6, 4, &params, 0.5, MemoryMode::Cached).unwrap();
        assert_eq!(v.for_prime(5).unwrap(), cbc_construct(5, &params).unwrap().as_slice());
        let pool = PrimePool::build(6).unwrap();
        let b = RpfvBuilder::new(pool, &params, &ConstructOptions::default()).unwrap();
        assert_eq!(b.theta(0).unwrap(), b.t_hat_all(0).unwrap());
    }

    #[test]
    fn modes_are_bit_identical() {
        let params = KorobovSpaceParams::with_poly_weights(4, 1, 2.0).unwrap();
        let a = construct_fixed_vector(40, 4, &params, 0.5, MemoryMode::Cached).unwrap();
        let b = construct_fixed_vector(40, 4, &params, 0.5, MemoryMode::Streaming).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capacity_error_and_auto_fallback() {
        let pool = PrimePool::build(30).unwrap();
        let params = KorobovSpaceParams::with_poly_weights(2, 2, 2.0).unwrap();
        let opts = ConstructOptions {
            mode: MemoryMode::Cached,
            memory_budget: 10,
            ..Default::default()
        };
        assert!(matches!(
            RpfvBuilder::new(pool.clone(), &params, &opts),
            Err(Error::Capacity { .. })
        ));
        let auto = ConstructOptions {
            mode: MemoryMode::Auto,
            ..opts
        };
        assert_eq!(RpfvBuilder::new(pool, &params, &auto).unwrap().mode(), MemoryMode::Streaming);
    }

    #[test]
    fn rejects_bad_tau() {
        let params = KorobovSpaceParams::with_poly_weights(2, 2, 2.0).unwrap();
        assert!(construct_fixed_vector(12, 2, &params, 1.0, MemoryMode::Auto).is_err());
        assert!(construct_fixed_vector(12, 2, &params, 0.0, MemoryMode::Auto).is_err());
    }

    #[test]
    fn sequencing_is_enforced() {
        let params = KorobovSpaceParams::with_poly_weights(2, 2, 2.0).unwrap();
        let pool = PrimePool::build(12).unwrap();
        let mut b = RpfvBuilder::new(pool, &params, &ConstructOptions::default()).unwrap();
        assert!(matches!(b.t_hat_all(1), Err(Error::Sequencing(_))));
        b.step().unwrap();
        assert!(matches!(b.t_hat_all(0), Err(Error::Sequencing(_))));
        b.step().unwrap();
        assert!(b.is_complete());
        assert!(b.step().is_err());
    }

    #[test]
    fn memory_estimate() {
        assert_eq!(cached_bytes(&[7, 11]), 77 * 16);
        assert_eq!(cached_bytes(&[5]), 0);
    }
}
