//! Fast component-by-component construction of a rank-1 lattice rule with a
//! prime number of points.

use crate::conv::{RaderPlan, RaderScratch};
use crate::errors::{Error, Result};
use crate::num::{KahanSum, KorobovSpaceParams};
use crate::primes::{is_prime, primitive_root};
use crate::ties;

/// `sigma(m / p)` for `m` in `Z_p`.
pub fn sigma_table(params: &KorobovSpaceParams, p: u64) -> Vec<f64> {
    let a = params.alpha();
    (0..p).map(|m| a.sigma_frac(m, p)).collect()
}

/// Running state of a CBC construction for `p` points.
#[derive(Debug, Clone)]
pub struct CbcState {
    p: u64,
    params: KorobovSpaceParams,
    z_prefix: Vec<u64>,
    /// `P_{s-1}(k) = prod_{j<s} (1 + gamma_j^2 sigma(k z_j / p))`.
    products: Vec<f64>,
    sigma: Vec<f64>,
    rader: RaderPlan,
}

impl CbcState {
    pub fn new(p: u64, params: &KorobovSpaceParams) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let g = primitive_root(p)?;
        Self::with_root(p, g, params)
    }

    pub fn with_root(p: u64, g: u64, params: &KorobovSpaceParams) -> Result<Self> {
        Ok(Self {
            p,
            params: params.clone(),
            z_prefix: Vec::with_capacity(params.dim()),
            products: vec![1.0; p as usize],
            sigma: sigma_table(params, p),
            rader: RaderPlan::new(p, g)?,
        })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// The dimension whose component is chosen next (1-based).
    pub fn next_dim(&self) -> usize {
        self.z_prefix.len() + 1
    }

    pub fn z_prefix(&self) -> &[u64] {
        &self.z_prefix
    }

    pub fn products(&self) -> &[f64] {
        &self.products
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rader(&self) -> &RaderPlan {
        &self.rader
    }

    pub fn params(&self) -> &KorobovSpaceParams {
        &self.params
    }

    fn next_gamma_sq(&self) -> Result<f64> {
        let s = self.next_dim();
        self.params
            .gamma_sq()
            .get(s - 1)
            .copied()
            .ok_or_else(|| Error::Sequencing(format!("all {} components already chosen", s - 1)))
    }

    /// `theta_s(z) = (gamma_s^2 / p) sum_k sigma(k z / p) P_{s-1}(k)` for
    /// every candidate `z`.
    pub fn theta_all(&self) -> Result<Vec<f64>> {
        let mut scratch = self.rader.make_scratch();
        self.theta_all_with(&mut scratch)
    }

    pub fn theta_all_with(&self, scratch: &mut RaderScratch) -> Result<Vec<f64>> {
        let scale = self.next_gamma_sq()? / self.p as f64;
        let mut s = self.rader.kernel(&self.sigma, &self.products, scratch)?;
        s.iter_mut().for_each(|x| *x *= scale);
        Ok(s)
    }

    /// Fixes `z_s = z` and folds it into the product table.
    pub fn push(&mut self, z: u64) -> Result<()> {
        let g = self.next_gamma_sq()?;
        let z = z % self.p;
        let p = self.p as usize;
        let mut m = 0usize;
        for pk in self.products.iter_mut() {
            *pk *= 1.0 + g * self.sigma[m];
            m += z as usize;
            if m >= p {
                m -= p;
            }
        }
        self.z_prefix.push(z);
        Ok(())
    }

    /// `[e_det]^2` of the current prefix.
    pub fn error_sq(&self) -> f64 {
        let mut acc: KahanSum = self.products.iter().copied().collect();
        acc.add(-(self.p as f64));
        acc.value() / self.p as f64
    }

    /// The product table rebuilt from the prefix.
    pub fn recompute_products(&self) -> Vec<f64> {
        let mut fresh = Self::with_root(self.p, self.rader.root(), &self.params).expect("validated");
        for &z in &self.z_prefix {
            fresh.push(z).expect("prefix within dimension");
        }
        fresh.products
    }
}

/// CBC generating vector for `p` points: `z_1 = 1`, then each `z_s` is the
/// tie-aware argmin of `theta_s`.
pub fn cbc_construct(p: u64, params: &KorobovSpaceParams) -> Result<Vec<u64>> {
    let mut state = CbcState::new(p, params)?;
    let mut scratch = state.rader().make_scratch();
    state.push(1 % p)?;
    for _ in 1..params.dim() {
        let theta = state.theta_all_with(&mut scratch)?;
        state.push(ties::argmin(&theta) as u64)?;
    }
    Ok(state.z_prefix)
}
