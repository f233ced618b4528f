//! Slow, direct reference implementations. They share no code with the
//! fast paths beyond the scalar kernel `sigma`, and exist to check them.

use crate::errors::Result;
use crate::eval::{check_tau, worst_case_error_sq};
use crate::num::{KahanSum, KorobovSpaceParams};
use crate::primes::{PrimePool, ResidueVector};
use crate::ties;

/// `S[z] = sum_k v[k z mod p] w[k]` by the double loop.
pub fn rader_kernel_naive(v: &[f64], w: &[f64]) -> Vec<f64> {
    let p = v.len();
    (0..p)
        .map(|z| (0..p).map(|k| v[k * z % p] * w[k]).sum())
        .collect()
}

/// `prod_{j < len} (1 + gamma_j^2 sigma(k z_j / n))`, evaluated afresh.
fn product(n: u64, k: u64, z: &[u64], params: &KorobovSpaceParams) -> f64 {
    let a = params.alpha();
    z.iter()
        .zip(params.gamma_sq())
        .map(|(&zj, g)| 1.0 + g * a.sigma_frac(k * zj % n, n))
        .product()
}

/// `theta_s(z)` for all `z`, where `s = prefix.len() + 1`.
pub fn theta_naive(p: u64, prefix: &[u64], params: &KorobovSpaceParams) -> Vec<f64> {
    let a = params.alpha();
    let g = params.gamma_sq()[prefix.len()];
    let prods: Vec<f64> = (0..p).map(|k| product(p, k, prefix, params)).collect();
    (0..p)
        .map(|z| {
            let s: f64 = (0..p).map(|k| a.sigma_frac(k * z % p, p) * prods[k as usize]).sum();
            g * s / p as f64
        })
        .collect()
}

/// CBC by exhaustive search: `z_s` minimises the increase of
/// `worst_case_error_sq` over the prefix.
pub fn cbc_naive(p: u64, params: &KorobovSpaceParams) -> Vec<u64> {
    let mut z = vec![1 % p];
    for _ in 1..params.dim() {
        let base = worst_case_error_sq(p, &z, params);
        let diffs: Vec<f64> = (0..p)
            .map(|c| {
                let mut t = z.clone();
                t.push(c);
                worst_case_error_sq(p, &t, params) - base
            })
            .collect();
        z.push(ties::argmin(&diffs) as u64);
    }
    z
}

/// `P^(p,q)_{s-1}(k, l)` with both prefixes of length `s - 1`.
fn pair_product(p: u64, q: u64, k: u64, l: u64, zp: &[u64], zq: &[u64], params: &KorobovSpaceParams) -> f64 {
    let a = params.alpha();
    let n = p * q;
    zp.iter()
        .zip(zq)
        .zip(params.gamma_sq())
        .map(|((&x, &y), g)| 1.0 + g * a.sigma_frac((k * x * q + l * y * p) % n, n))
        .product()
}

/// `T^_s^(p)(z)` for all `z`, prime index `i`, by the triple loop.
/// `residues[j]` must hold `s` entries for `j < i` and `s - 1` otherwise.
pub fn t_hat_naive(pool: &PrimePool, params: &KorobovSpaceParams, residues: &[Vec<u64>], i: usize) -> Vec<f64> {
    let primes = pool.primes();
    let p = primes[i];
    let s = residues[i].len() + 1;
    let a = params.alpha();
    let g = params.gamma_sq()[s - 1];
    let prefix = |j: usize| &residues[j][..s - 1];
    let mut out = theta_naive(p, prefix(i), params);
    for (j, &q) in primes.iter().enumerate() {
        if j == i {
            continue;
        }
        let table: Vec<f64> = (0..p * q)
            .map(|kl| pair_product(p, q, kl / q, kl % q, prefix(i), prefix(j), params))
            .collect();
        for (z, o) in out.iter_mut().enumerate() {
            let z = z as u64;
            let mut acc = 0.0;
            if q < p {
                let zq = residues[j][s - 1];
                for l in 0..q {
                    for k in 0..p {
                        let m = (k * z % p * q + l * zq % q * p) % (p * q);
                        acc += a.sigma_frac(m, p * q) * table[(k * q + l) as usize];
                    }
                }
                *o += 2.0 * g / (p * q) as f64 * acc;
            } else {
                for k in 0..p {
                    for l in 0..q {
                        acc += a.sigma_frac(k * q % p * z % p, p) * table[(k * q + l) as usize];
                    }
                }
                *o += 2.0 * g / ((q as f64).powi(2 * a.value() as i32 + 1) * p as f64) * acc;
            }
        }
    }
    out
}

/// Algorithm reference: every step uses [`theta_naive`] and
/// [`t_hat_naive`].
pub fn construct_naive(pool: &PrimePool, params: &KorobovSpaceParams, tau: f64) -> Result<ResidueVector> {
    check_tau(tau)?;
    let l = pool.len();
    let mut residues = vec![vec![1u64]; l];
    for s in 2..=params.dim() {
        for i in 0..l {
            let p = pool.primes()[i];
            let theta = theta_naive(p, &residues[i][..s - 1], params);
            let t_hat = t_hat_naive(pool, params, &residues, i);
            let z = ties::select_candidate(&theta, &t_hat, tau) as u64;
            residues[i].push(z);
        }
    }
    ResidueVector::new(pool.clone(), residues)
}

/// Average of `[e_ran]^2` over all residue vectors in a product of
/// candidate sets; returns `(mean, min, max)` of `e_ran` and the count.
pub fn exhaustive_eran(
    pool: &PrimePool,
    params: &KorobovSpaceParams,
    fixed: &[Vec<u64>],
    candidates: &[Vec<u64>],
) -> Result<(f64, f64, f64, usize)> {
    let l = pool.len();
    let mut idx = vec![0usize; l];
    let mut sum = KahanSum::new();
    let (mut lo, mut hi, mut count) = (f64::INFINITY, 0.0f64, 0usize);
    loop {
        let residues: Vec<Vec<u64>> = (0..l)
            .map(|i| {
                let mut r = fixed[i].clone();
                r.push(candidates[i][idx[i]]);
                r
            })
            .collect();
        let v = ResidueVector::new(pool.clone(), residues)?;
        let e = crate::eval::randomized_error_sq_fixed(&v, params).error();
        sum.add(e);
        lo = lo.min(e);
        hi = hi.max(e);
        count += 1;
        let mut t = 0;
        loop {
            if t == l {
                return Ok((sum.value() / count as f64, lo, hi, count));
            }
            idx[t] += 1;
            if idx[t] < candidates[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}
