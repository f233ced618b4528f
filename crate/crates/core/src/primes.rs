//! Prime pools `P_n = { p prime : n/2 < p <= n }`, primitive roots, and the
//! Chinese-remainder residue representation of a fixed generating vector.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::errors::{Error, Result};

/// `base^exp mod m`.
pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut b = (base % m) as u128;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn mod_inv(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &BASES {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes; `sieve(n)[k]` is true iff `k` is prime.
pub fn sieve(n: usize) -> Vec<bool> {
    let mut is_p = vec![true; n + 1];
    is_p[0] = false;
    if n >= 1 {
        is_p[1] = false;
    }
    let mut i = 2;
    while i * i <= n {
        if is_p[i] {
            for m in (i * i..=n).step_by(i) {
                is_p[m] = false;
            }
        }
        i += 1;
    }
    is_p
}

fn distinct_prime_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut f = 2;
    while f * f <= m {
        if m % f == 0 {
            out.push(f);
            while m % f == 0 {
                m /= f;
            }
        }
        f += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// True iff `g` generates the multiplicative group modulo the prime `p`.
pub fn is_primitive_root(g: u64, p: u64) -> bool {
    if p == 2 {
        return g % 2 == 1;
    }
    if g % p == 0 {
        return false;
    }
    distinct_prime_factors(p - 1)
        .into_iter()
        .all(|q| mod_pow(g, (p - 1) / q, p) != 1)
}

/// Smallest primitive root modulo the prime `p`.
pub fn primitive_root(p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Ok(1);
    }
    // a primitive root always exists below p
    Ok((2..p).find(|&g| is_primitive_root(g, p)).unwrap())
}

/// The primes in `(n/2, n]`, ascending, with a primitive root for each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePool {
    n: u64,
    primes: Vec<u64>,
    primitive_roots: Vec<u64>,
}

impl PrimePool {
    pub fn build(n: u64) -> Result<Self> {
        if n < 4 {
            return Err(Error::BudgetTooSmall(n));
        }
        let flags = sieve(n as usize);
        let primes: Vec<u64> = (n / 2 + 1..=n).filter(|&k| flags[k as usize]).collect();
        debug_assert!(
            primes.len() as f64 > 0.23 * n as f64 / (n as f64).ln(),
            "prime count below the 0.23 n / ln n floor"
        );
        Self::with_primes(n, primes)
    }

    /// A pool over an explicit list of distinct primes, e.g. for CRT tests.
    /// The recorded budget is the largest prime.
    pub fn from_primes(mut primes: Vec<u64>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::Config("empty prime list".into()));
        }
        primes.sort_unstable();
        if let Some(w) = primes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("prime {} listed twice", w[0])));
        }
        let n = *primes.last().unwrap();
        Self::with_primes(n, primes)
    }

    fn with_primes(n: u64, primes: Vec<u64>) -> Result<Self> {
        let primitive_roots = primes
            .iter()
            .map(|&p| primitive_root(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            primes,
            primitive_roots,
        })
    }

    pub fn budget(&self) -> u64 {
        self.n
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn primitive_roots(&self) -> &[u64] {
        &self.primitive_roots
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn index_of(&self, p: u64) -> Option<usize> {
        self.primes.binary_search(&p).ok()
    }

    /// `N = prod p` over the pool.
    pub fn modulus(&self) -> BigUint {
        self.primes.iter().map(|&p| BigUint::from(p)).product()
    }
}

/// Combine `a mod p` and `b mod q` (coprime moduli) into a residue mod `p q`.
pub fn crt_pair(a: u64, p: u64, b: u64, q: u64) -> u64 {
    // x = a + p * ((b - a) p^{-1} mod q)
    let p_inv = mod_inv(p % q, q).expect("moduli must be coprime");
    let diff = (b % q + q - a % q) % q;
    let t = (diff as u128 * p_inv as u128 % q as u128) as u64;
    a % p + p * t
}

/// A generating vector in `Z_N^d`, stored as its residues modulo each prime
/// of a pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueVector {
    pool: PrimePool,
    residues: Vec<Vec<u64>>,
}

impl ResidueVector {
    /// `residues[i]` holds `(z_1, ..., z_d) mod primes[i]`; every row must
    /// start with 1.
    pub fn new(pool: PrimePool, residues: Vec<Vec<u64>>) -> Result<Self> {
        if residues.len() != pool.len() {
            return Err(Error::LengthMismatch {
                expected: pool.len(),
                got: residues.len(),
            });
        }
        let d = residues.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::Validation("zero-dimensional residue vector".into()));
        }
        for (row, &p) in residues.iter().zip(pool.primes()) {
            if row.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if row[0] != 1 % p {
                return Err(Error::Validation(format!(
                    "first component modulo {p} is {}, expected 1",
                    row[0]
                )));
            }
            if let Some(r) = row.iter().find(|&&r| r >= p) {
                return Err(Error::Validation(format!("residue {r} not reduced modulo {p}")));
            }
        }
        Ok(Self { pool, residues })
    }

    /// All components equal to 1 modulo every prime.
    pub fn ones(pool: PrimePool, d: usize) -> Self {
        let residues = vec![vec![1; d]; pool.len()];
        Self { pool, residues }
    }

    pub fn pool(&self) -> &PrimePool {
        &self.pool
    }

    pub fn dim(&self) -> usize {
        self.residues[0].len()
    }

    pub fn residues(&self) -> &[Vec<u64>] {
        &self.residues
    }

    /// `z mod primes[i]`.
    pub fn for_prime_index(&self, i: usize) -> &[u64] {
        &self.residues[i]
    }

    /// `z mod p`, if `p` belongs to the pool.
    pub fn for_prime(&self, p: u64) -> Option<&[u64]> {
        self.pool.index_of(p).map(|i| self.residues[i].as_slice())
    }

    /// The first `d` components.
    pub fn truncated(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.dim() {
            return Err(Error::Validation(format!(
                "cannot truncate a {}-dimensional vector to {d}",
                self.dim()
            )));
        }
        Ok(Self {
            pool: self.pool.clone(),
            residues: self.residues.iter().map(|r| r[..d].to_vec()).collect(),
        })
    }

    /// Residues of the combined modulus `p q` for prime indices `i`, `j`.
    pub fn pair_residues(&self, i: usize, j: usize) -> Vec<u64> {
        let (p, q) = (self.pool.primes[i], self.pool.primes[j]);
        self.residues[i]
            .iter()
            .zip(&self.residues[j])
            .map(|(&a, &b)| crt_pair(a, p, b, q))
            .collect()
    }

    /// The integer `z_j` in `Z_N` (0-based component index).
    pub fn crt_reconstruct(&self, component: usize) -> BigUint {
        let n_big = self.pool.modulus();
        let mut acc = BigUint::zero();
        for (row, &p) in self.residues.iter().zip(self.pool.primes()) {
            let m_i = &n_big / p;
            let m_mod_p = (&m_i % p).to_u64_digits().first().copied().unwrap_or(0);
            let inv = mod_inv(m_mod_p, p).expect("pool primes are distinct");
            let coeff = (row[component] as u128 * inv as u128 % p as u128) as u64;
            acc += m_i * coeff;
        }
        acc % n_big
    }
}
