//! Exact worst-case and randomised errors, the `omega` weights, and the
//! threshold and bound quantities built on `mu`.

use serde::{Deserialize, Serialize};

use crate::errors::{Error, Result};
use crate::num::{mu_quantity, r_alpha, FrequencyVector, KahanSum, KorobovSpaceParams};
use crate::par;
use crate::primes::ResidueVector;

/// Negative squared errors above this are treated as roundoff.
pub const ROUNDOFF_FLOOR: f64 = -1e-12;

/// `prod_j (1 + gamma_j^2 sigma(k z_j / n))` for every `k` in `Z_n`.
pub fn point_products(n: u64, z: &[u64], params: &KorobovSpaceParams) -> Vec<f64> {
    let alpha = params.alpha();
    let gsq = params.gamma_sq();
    debug_assert!(z.len() <= gsq.len());
    let mut prod = vec![1.0; n as usize];
    for (&zj, &g) in z.iter().zip(gsq) {
        let step = zj % n;
        let mut m = 0u64;
        for pk in prod.iter_mut() {
            *pk *= 1.0 + g * alpha.sigma_frac(m, n);
            m += step;
            if m >= n {
                m -= n;
            }
        }
    }
    prod
}

/// `[e_det]^2 = -1 + (1/n) sum_k prod_j (1 + gamma_j^2 sigma(k z_j / n))`,
/// using the first `z.len()` weights.
pub fn worst_case_error_sq(n: u64, z: &[u64], params: &KorobovSpaceParams) -> f64 {
    let mut acc: KahanSum = point_products(n, z, params).into_iter().collect();
    acc.add(-(n as f64));
    acc.value() / n as f64
}

/// Visits every `h` in `[-h_max, h_max]^d`.
pub fn for_each_frequency(d: usize, h_max: i64, mut f: impl FnMut(&[i64])) {
    let mut h = vec![-h_max; d];
    loop {
        f(&h);
        let mut j = 0;
        loop {
            if j == d {
                return;
            }
            if h[j] < h_max {
                h[j] += 1;
                break;
            }
            h[j] = -h_max;
            j += 1;
        }
    }
}

fn dot_mod(h: &[i64], z: &[u64], m: u64) -> u64 {
    let m = m as i128;
    let s: i128 = h
        .iter()
        .zip(z)
        .map(|(&a, &b)| (a as i128).rem_euclid(m) * b as i128)
        .sum();
    s.rem_euclid(m) as u64
}

/// `[e_det]^2` as the dual-lattice sum, truncated to `|h_j| <= h_max`.
pub fn worst_case_error_sq_truncated(n: u64, z: &[u64], params: &KorobovSpaceParams, h_max: i64) -> f64 {
    let p = params.truncated(z.len()).expect("dimension within params");
    let mut acc = KahanSum::new();
    for_each_frequency(z.len(), h_max, |h| {
        if h.iter().any(|&x| x != 0) && dot_mod(h, z, n) == 0 {
            let r = r_alpha(&p, &FrequencyVector(h.to_vec()));
            acc.add(1.0 / (r * r));
        }
    });
    acc.value()
}

/// Upper bound on `sum r_alpha^{-2}(h)` over all `h` outside the truncation
/// box, hence on the error of any truncated dual-lattice sum.
pub fn truncation_tail_bound(params: &KorobovSpaceParams, d: usize, h_max: i64) -> f64 {
    let alpha = params.alpha();
    let two_a = 2 * alpha.value() as i32;
    let partial: f64 = 2.0 * (1..=h_max).rev().map(|h| (h as f64).powi(-two_a)).sum::<f64>();
    let full = alpha.sigma_zero();
    let mut outer = 1.0;
    let mut inner = 1.0;
    for g in &params.gamma_sq()[..d] {
        outer *= 1.0 + g * full;
        inner *= 1.0 + g * partial;
    }
    (outer - inner).max(0.0)
}

/// How a reported error was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMethod {
    PointFormula,
    DualLatticeTruncated,
}

/// A squared error together with the terms that sum to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub squared_error: f64,
    /// Value before clamping at zero.
    pub raw_squared_error: f64,
    pub clamped: bool,
    /// `(p, E(p) / L^2)`.
    pub diagonal: Vec<(u64, f64)>,
    /// `((p, q), 2 E(p, q) / L^2)` for `p < q`; each pair covers both orders.
    pub off_diagonal: Vec<((u64, u64), f64)>,
    pub method: ErrorMethod,
}

impl ErrorReport {
    fn from_terms(diagonal: Vec<(u64, f64)>, off_diagonal: Vec<((u64, u64), f64)>, method: ErrorMethod) -> Self {
        let mut acc = KahanSum::new();
        diagonal.iter().for_each(|(_, v)| acc.add(*v));
        off_diagonal.iter().for_each(|(_, v)| acc.add(*v));
        let raw = acc.value();
        let clamped = raw < 0.0;
        Self {
            squared_error: raw.max(0.0),
            raw_squared_error: raw,
            clamped,
            diagonal,
            off_diagonal,
            method,
        }
    }

    pub fn error(&self) -> f64 {
        self.squared_error.sqrt()
    }

    /// True if clamping went beyond the roundoff floor.
    pub fn suspicious(&self) -> bool {
        self.raw_squared_error < ROUNDOFF_FLOOR
    }
}

fn pair_list(l: usize) -> Vec<(usize, usize)> {
    (0..l).flat_map(|i| (i..l).map(move |j| (i, j))).collect()
}

/// Exact `[e_ran]^2` of the random-prime fixed-vector algorithm:
/// `(1/L^2) [sum_p E(p) + sum_{p != q} E(p, q)]`, with `E(p, q)` the
/// worst-case error of the `pq`-point rule with the CRT-combined vector.
pub fn randomized_error_sq_fixed(v: &ResidueVector, params: &KorobovSpaceParams) -> ErrorReport {
    let primes = v.pool().primes();
    let l = primes.len();
    let scale = 1.0 / (l * l) as f64;
    let pairs = pair_list(l);
    let values = par::map_slice(&pairs, |&(i, j)| {
        if i == j {
            worst_case_error_sq(primes[i], v.for_prime_index(i), params)
        } else {
            worst_case_error_sq(primes[i] * primes[j], &v.pair_residues(i, j), params)
        }
    });
    let mut diagonal = Vec::with_capacity(l);
    let mut off = Vec::with_capacity(pairs.len() - l);
    for (&(i, j), e) in pairs.iter().zip(values) {
        if i == j {
            diagonal.push((primes[i], e * scale));
        } else {
            off.push(((primes[i], primes[j]), 2.0 * e * scale));
        }
    }
    ErrorReport::from_terms(diagonal, off, ErrorMethod::PointFormula)
}

/// `[e_ran]^2` as `sum_h omega(h)^2 r_alpha^{-2}(h)`, truncated to
/// `|h_j| <= h_max`. For cross-validation only.
pub fn randomized_error_sq_truncated(v: &ResidueVector, params: &KorobovSpaceParams, h_max: i64) -> ErrorReport {
    let primes = v.pool().primes().to_vec();
    let l = primes.len();
    let d = v.dim();
    let sp = params.truncated(d).expect("dimension within params");
    let mut pair_acc = vec![KahanSum::new(); l * l];
    let mut hits = Vec::with_capacity(l);
    for_each_frequency(d, h_max, |h| {
        if h.iter().all(|&x| x == 0) {
            return;
        }
        hits.clear();
        hits.extend((0..l).filter(|&i| dot_mod(h, v.for_prime_index(i), primes[i]) == 0));
        if hits.is_empty() {
            return;
        }
        let r = r_alpha(&sp, &FrequencyVector(h.to_vec()));
        let w = 1.0 / (r * r);
        for &i in &hits {
            for &j in &hits {
                if i <= j {
                    pair_acc[i * l + j].add(w);
                }
            }
        }
    });
    let scale = 1.0 / (l * l) as f64;
    let mut diagonal = Vec::new();
    let mut off = Vec::new();
    for (i, j) in pair_list(l) {
        let e = pair_acc[i * l + j].value();
        if i == j {
            diagonal.push((primes[i], e * scale));
        } else {
            off.push(((primes[i], primes[j]), 2.0 * e * scale));
        }
    }
    ErrorReport::from_terms(diagonal, off, ErrorMethod::DualLatticeTruncated)
}

/// Fraction of pool primes `p` with `h . z^(p) = 0 (mod p)`.
pub fn omega_weight(h: &FrequencyVector, v: &ResidueVector) -> f64 {
    let primes = v.pool().primes();
    let hits = (0..primes.len())
        .filter(|&i| dot_mod(&h.0, v.for_prime_index(i), primes[i]) == 0)
        .count();
    hits as f64 / primes.len() as f64
}

/// Relaxation `tau` and the `lambda` grid over which infima are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub tau: f64,
    pub lambda_grid: Vec<f64>,
    /// Golden-section steps around the grid optimum; 0 disables refinement.
    pub refine_iters: usize,
    pub c_prime: f64,
}

pub const DEFAULT_GRID_POINTS: usize = 32;
pub const DEFAULT_REFINE_ITERS: usize = 20;
pub const C_PRIME: f64 = 0.23;

/// Checks `tau` lies in the open unit interval.
pub fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain {
            name: "tau",
            value: tau,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

/// `points` equispaced values on `[1/2, alpha - 0.01]`.
pub fn default_lambda_grid(alpha: u32, points: usize) -> Vec<f64> {
    let hi = alpha as f64 - 0.01;
    if points <= 1 {
        return vec![0.5];
    }
    (0..points)
        .map(|i| 0.5 + (hi - 0.5) * i as f64 / (points - 1) as f64)
        .collect()
}

impl BoundParams {
    /// Default grid and refinement for smoothness `alpha`.
    pub fn new(tau: f64, alpha: u32) -> Result<Self> {
        Self::with_grid(tau, default_lambda_grid(alpha, DEFAULT_GRID_POINTS), DEFAULT_REFINE_ITERS)
    }

    pub fn with_grid(tau: f64, lambda_grid: Vec<f64>, refine_iters: usize) -> Result<Self> {
        check_tau(tau)?;
        if lambda_grid.is_empty() {
            return Err(Error::Config("empty lambda grid".into()));
        }
        if lambda_grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::Config("lambda grid must be strictly increasing".into()));
        }
        Ok(Self {
            tau,
            lambda_grid,
            refine_iters,
            c_prime: C_PRIME,
        })
    }

    fn check_grid(&self, params: &KorobovSpaceParams) -> Result<()> {
        let a = params.alpha().as_f64();
        match self.lambda_grid.iter().find(|&&l| !(0.5..a).contains(&l)) {
            Some(&l) => Err(Error::Domain {
                name: "lambda",
                value: l,
                domain: "[1/2, alpha)",
            }),
            None => Ok(()),
        }
    }

    /// Infimum of `f` over the grid, refined by golden-section search in
    /// the bracket around the best grid point. Returns `(value, lambda)`.
    pub fn minimize<F>(&self, params: &KorobovSpaceParams, f: F) -> Result<(f64, f64)>
    where
        F: Fn(f64) -> Result<f64>,
    {
        self.check_grid(params)?;
        let grid = &self.lambda_grid;
        let mut best = (f64::INFINITY, grid[0]);
        let mut best_i = 0;
        for (i, &l) in grid.iter().enumerate() {
            let v = f(l)?;
            if v < best.0 {
                best = (v, l);
                best_i = i;
            }
        }
        if self.refine_iters == 0 || grid.len() < 2 {
            return Ok(best);
        }
        let mut a = grid[best_i.saturating_sub(1)];
        let mut b = grid[(best_i + 1).min(grid.len() - 1)];
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        for _ in 0..self.refine_iters {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d)?;
            }
        }
        for (v, l) in [(fc, c), (fd, d)] {
            if v < best.0 {
                best = (v, l);
            }
        }
        Ok(best)
    }
}

/// `inf_lambda (2 mu(lambda) / ((1 - tau) p))^lambda`, the `e_det` level
/// defining good generating vectors for `p` points.
pub fn good_set_threshold(p: u64, params: &KorobovSpaceParams, bounds: &BoundParams) -> Result<f64> {
    let c = 2.0 / ((1.0 - bounds.tau) * p as f64);
    Ok(bounds
        .minimize(params, |l| Ok((c * mu_quantity(params, l)?).powf(l)))?
        .0)
}

/// `sum_{h in Z^s, h_s != 0} r_alpha^{-1/lambda}(h)` for product weights
/// (`s` is 1-based).
pub fn component_sum(params: &KorobovSpaceParams, s: usize, lambda: f64) -> Result<f64> {
    if s == 0 || s > params.dim() {
        return Err(Error::InvalidParams(format!("component index {s} out of range")));
    }
    let f = params.lambda_factors(lambda)?;
    Ok(f[s - 1] * f[..s - 1].iter().map(|x| 1.0 + x).product::<f64>())
}

/// `inf_lambda (2 / ((1 - tau) p) * component_sum)^(2 lambda)`, the `theta`
/// level defining good components for dimension `s` (1-based).
pub fn component_threshold(p: u64, s: usize, params: &KorobovSpaceParams, bounds: &BoundParams) -> Result<f64> {
    let c = 2.0 / ((1.0 - bounds.tau) * p as f64);
    Ok(bounds
        .minimize(params, |l| Ok((c * component_sum(params, s, l)?).powf(2.0 * l)))?
        .0)
}

/// `B_{n,tau} = sup_lambda n^lambda (4 mu / (1 - tau))^{-lambda}`.
pub fn b_n_tau(n: u64, params: &KorobovSpaceParams, bounds: &BoundParams) -> Result<f64> {
    let c = 4.0 / ((1.0 - bounds.tau) * n as f64);
    let (inf, _) = bounds.minimize(params, |l| Ok((c * mu_quantity(params, l)?).powf(l)))?;
    Ok(1.0 / inf)
}

/// `B~_{s,n,tau}`, the per-component analogue of [`b_n_tau`].
pub fn b_tilde(s: usize, n: u64, params: &KorobovSpaceParams, bounds: &BoundParams) -> Result<f64> {
    let c = 4.0 / ((1.0 - bounds.tau) * n as f64);
    let (inf, _) = bounds.minimize(params, |l| Ok((c * component_sum(params, s, l)?).powf(l)))?;
    Ok(1.0 / inf)
}

/// `C_{tau,lambda}` with the prime-density constant `c_prime`.
pub fn bound_constant(tau: f64, lambda: f64, c_prime: f64) -> f64 {
    let a = 2f64.powf(4.0 * lambda);
    let one_m = 1.0 - tau;
    a / (c_prime * one_m.powf(2.0 * lambda))
        + 2.0 * a / (tau * one_m.powf(2.0 * lambda))
        + a * (1.0 + tau) / (tau * one_m.powf(2.0 * lambda - 1.0))
}

/// `(C ln n)^{1/2} / n^{lambda + 1/2} * mu(lambda)^lambda`.
pub fn theorem_bound_eran(n: u64, params: &KorobovSpaceParams, tau: f64, lambda: f64) -> Result<f64> {
    check_tau(tau)?;
    let mu = mu_quantity(params, lambda)?;
    let nf = n as f64;
    let c = bound_constant(tau, lambda, C_PRIME);
    Ok((c * nf.ln()).sqrt() / nf.powf(lambda + 0.5) * mu.powf(lambda))
}

/// Minimum of [`theorem_bound_eran`] over the bound grid, with the
/// minimising `lambda`.
pub fn theorem_bound_min(n: u64, params: &KorobovSpaceParams, bounds: &BoundParams) -> Result<(f64, f64)> {
    bounds.minimize(params, |l| theorem_bound_eran(n, params, bounds.tau, l))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::primes::PrimePool;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn wce_examples() {
        let p1 = KorobovSpaceParams::new(1, vec![1.0]).unwrap();
        assert!(rel(worst_case_error_sq(3, &[1], &p1), PI * PI / 27.0) < 1e-13);
        assert!(rel(worst_case_error_sq(3, &[1], &p1), 0.365540903744050319) < 1e-13);
        assert!(rel(worst_case_error_sq(1, &[5], &p1), PI * PI / 3.0) < 1e-13);
        let p2 = KorobovSpaceParams::with_poly_weights(3, 2, 2.0).unwrap();
        let v = worst_case_error_sq(13, &[1, 5, 8], &p2);
        assert!(rel(v, 0.00247595530813354352) < 1e-12);
        // the axis terms (13m, 0, 0) with |13m| > 100 alone are 2.2e-5 relative
        let t = worst_case_error_sq_truncated(13, &[1, 5, 8], &p2, 100);
        assert!(t <= v && v - t <= truncation_tail_bound(&p2, 3, 100));
        assert!(rel(t, v) < 5e-5);
    }

    #[test]
    fn eran_single_prime() {
        let pool = PrimePool::build(6).unwrap();
        let v = ResidueVector::ones(pool, 1);
        let p = KorobovSpaceParams::new(1, vec![1.0]).unwrap();
        let r = randomized_error_sq_fixed(&v, &p);
        assert!(rel(r.squared_error, PI * PI / 3.0 / 25.0) < 1e-13);
        assert!(r.off_diagonal.is_empty());
    }

    #[test]
    fn eran_oracle_value() {
        let pool = PrimePool::build(20).unwrap();
        let v = ResidueVector::ones(pool, 2);
        let p = KorobovSpaceParams::new(2, vec![1.0, 1.0]).unwrap();
        let r = randomized_error_sq_fixed(&v, &p);
        assert!(rel(r.squared_error, 2.00826693792220840) < 1e-12);
        let sum: f64 = r.diagonal.iter().map(|t| t.1).chain(r.off_diagonal.iter().map(|t| t.1)).sum();
        assert!(rel(sum, r.squared_error) < 1e-12);
        assert_eq!(r.off_diagonal.len(), 6);
    }

    #[test]
    fn eran_vanishes_with_weights() {
        let pool = PrimePool::build(30).unwrap();
        let v = ResidueVector::ones(pool, 3);
        let p = KorobovSpaceParams::new(2, vec![1e-9; 3]).unwrap();
        assert!(randomized_error_sq_fixed(&v, &p).squared_error < 1e-15);
    }

    #[test]
    fn omega_examples() {
        let pool = PrimePool::build(20).unwrap();
        let v = ResidueVector::ones(pool, 1);
        assert_eq!(omega_weight(&FrequencyVector(vec![0]), &v), 1.0);
        assert_eq!(omega_weight(&FrequencyVector(vec![11]), &v), 0.25);
        assert_eq!(omega_weight(&FrequencyVector(vec![11 * 13]), &v), 0.5);
    }

    #[test]
    fn single_point_grid_threshold() {
        let p = KorobovSpaceParams::with_poly_weights(3, 2, 1.0).unwrap();
        let b = BoundParams::with_grid(0.5, vec![0.5], 20).unwrap();
        let t = good_set_threshold(31, &p, &b).unwrap();
        let mu = mu_quantity(&p, 0.5).unwrap();
        assert!(rel(t, (2.0 * mu / (0.5 * 31.0)).sqrt()) < 1e-14);
    }

    #[test]
    fn grid_threshold_is_grid_min() {
        let p = KorobovSpaceParams::new(2, vec![1.0]).unwrap();
        let grid: Vec<f64> = (0..6).map(|i| 0.5 + 0.25 * i as f64).collect();
        let b = BoundParams::with_grid(0.5, grid.clone(), 0).unwrap();
        let t = good_set_threshold(97, &p, &b).unwrap();
        let m = grid
            .iter()
            .map(|&l| (2.0 * mu_quantity(&p, l).unwrap() / (0.5 * 97.0)).powf(l))
            .fold(f64::INFINITY, f64::min);
        assert!(rel(t, m) < 1e-15);
        let refined = good_set_threshold(97, &p, &BoundParams::with_grid(0.5, grid, 20).unwrap()).unwrap();
        assert!(refined <= t);
    }

    #[test]
    fn threshold_monotone_in_tau() {
        let p = KorobovSpaceParams::with_poly_weights(2, 2, 2.0).unwrap();
        let mut last = 0.0;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let t = good_set_threshold(53, &p, &BoundParams::new(tau, 2).unwrap()).unwrap();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn component_sum_examples() {
        let p = KorobovSpaceParams::new(2, vec![1.0, 1.0]).unwrap();
        let z2 = PI * PI / 6.0;
        assert!(rel(component_sum(&p, 2, 1.0).unwrap(), 2.0 * z2 * (1.0 + 2.0 * z2)) < 1e-13);
        assert!(rel(component_sum(&p, 1, 1.0).unwrap(), 2.0 * z2) < 1e-13);
    }

    #[test]
    fn component_threshold_scaling() {
        let p = KorobovSpaceParams::with_poly_weights(3, 2, 2.0).unwrap();
        let b = BoundParams::with_grid(0.5, vec![1.0], 0).unwrap();
        let a = component_threshold(31, 2, &p, &b).unwrap();
        let c = component_threshold(62, 2, &p, &b).unwrap();
        assert!(rel(a / c, 4.0) < 1e-13);
    }

    #[test]
    fn bound_constant_formula() {
        let c = bound_constant(0.5, 0.5, C_PRIME);
        assert!(rel(c, 8.0 / C_PRIME + 32.0 + 12.0) < 1e-14);
    }

    #[test]
    fn theorem_bound_behaviour() {
        let p = KorobovSpaceParams::with_poly_weights(5, 1, 3.0).unwrap();
        let mut last = f64::INFINITY;
        for n in [3u64, 10, 100, 1000, 10000] {
            let b = theorem_bound_eran(n, &p, 0.5, 0.75).unwrap();
            assert!(b < last);
            last = b;
        }
        let near = theorem_bound_eran(100, &p, 0.5, 0.999).unwrap();
        let mid = theorem_bound_eran(100, &p, 0.5, 0.9).unwrap();
        assert!(near > mid);
        assert!(theorem_bound_eran(100, &p, 1.0, 0.7).is_err());
        assert!(theorem_bound_eran(100, &p, 0.5, 1.0).is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(BoundParams::with_grid(0.5, vec![], 0).is_err());
        assert!(BoundParams::with_grid(0.0, vec![0.5], 0).is_err());
        let p = KorobovSpaceParams::new(1, vec![1.0]).unwrap();
        let b = BoundParams::with_grid(0.5, vec![0.5, 1.5], 0).unwrap();
        assert!(good_set_threshold(7, &p, &b).is_err());
    }

    #[test]
    fn tail_bound_covers_truncation() {
        let p = KorobovSpaceParams::with_poly_weights(2, 1, 1.0).unwrap();
        let exact = worst_case_error_sq(7, &[1, 3], &p);
        let trunc = worst_case_error_sq_truncated(7, &[1, 3], &p, 50);
        let tail = truncation_tail_bound(&p, 2, 50);
        assert!(exact >= trunc && exact - trunc <= tail);
    }
}
