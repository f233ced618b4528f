//! Scalar kernels of the weighted Korobov space: the Bernoulli-polynomial
//! kernel `sigma_alpha`, Riemann zeta values, `r_alpha` and the
//! product-weight `mu` quantity.

use std::f64::consts::PI;

use crate::errors::{Error, Result};

/// Integer smoothness of the Korobov space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    One,
    Two,
    Three,
}

impl Smoothness {
    pub fn new(alpha: u32) -> Result<Self> {
        match alpha {
            1 => Ok(Smoothness::One),
            2 => Ok(Smoothness::Two),
            3 => Ok(Smoothness::Three),
            other => Err(Error::UnsupportedSmoothness(other)),
        }
    }

    pub fn value(self) -> u32 {
        match self {
            Smoothness::One => 1,
            Smoothness::Two => 2,
            Smoothness::Three => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    /// `(-1)^(alpha+1) (2 pi)^(2 alpha) / (2 alpha)!`
    fn bernoulli_scale(self) -> f64 {
        match self {
            Smoothness::One => 2.0 * PI * PI,
            Smoothness::Two => -(2.0 * PI).powi(4) / 24.0,
            Smoothness::Three => (2.0 * PI).powi(6) / 720.0,
        }
    }

    /// `sum_{h != 0} e^{2 pi i h x} / |h|^(2 alpha)`, for any real `x`.
    #[inline]
    pub fn sigma(self, x: f64) -> f64 {
        let t = x - x.floor();
        self.bernoulli_scale() * bernoulli_even(self, t)
    }

    /// `sigma(m / modulus)` with exact integer reduction of `m`.
    #[inline]
    pub fn sigma_frac(self, m: u64, modulus: u64) -> f64 {
        self.sigma((m % modulus) as f64 / modulus as f64)
    }

    /// `sigma(0) = 2 zeta(2 alpha)`.
    pub fn sigma_zero(self) -> f64 {
        self.sigma(0.0)
    }
}

/// `B_{2 alpha}(t)` for `t` in `[0, 1)`, Horner form.
#[inline]
fn bernoulli_even(alpha: Smoothness, t: f64) -> f64 {
    match alpha {
        // x^2 - x + 1/6
        Smoothness::One => (t - 1.0) * t + 1.0 / 6.0,
        // x^4 - 2x^3 + x^2 - 1/30
        Smoothness::Two => ((t - 2.0) * t + 1.0) * t * t - 1.0 / 30.0,
        // x^6 - 3x^5 + 5/2 x^4 - 1/2 x^2 + 1/42
        Smoothness::Three => {
            let t2 = t * t;
            (((t - 3.0) * t + 2.5) * t2 - 0.5) * t2 + 1.0 / 42.0
        }
    }
}

/// `sigma_alpha(x)` for an integer smoothness given as a plain number.
pub fn sigma_alpha(x: f64, alpha: u32) -> Result<f64> {
    Ok(Smoothness::new(alpha)?.sigma(x))
}

// B_{2j} / (2j)! for j = 1..=7
const EM_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// Riemann zeta for real `s > 1`, by direct summation with an
/// Euler-Maclaurin tail.
pub fn zeta(s: f64) -> Result<f64> {
    if !s.is_finite() || s <= 1.0 {
        return Err(Error::Domain {
            name: "s",
            value: s,
            domain: "(1, inf)",
        });
    }
    const N: u32 = 24;
    let n = N as f64;
    let mut head = 0.0;
    for k in (1..N).rev() {
        head += (k as f64).powf(-s);
    }
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times N^{-s-2j+1}
    let mut rising = s;
    let mut npow = n.powf(-s - 1.0);
    for (j, c) in EM_COEFFS.iter().enumerate() {
        tail += c * rising * npow;
        let a = s + (2 * j + 1) as f64;
        rising *= a * (a + 1.0);
        npow /= n * n;
    }
    Ok(head + tail)
}

/// Parameters of a weighted Korobov space with product weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KorobovSpaceParams {
    alpha: Smoothness,
    gamma: Vec<f64>,
    gamma_sq: Vec<f64>,
}

impl KorobovSpaceParams {
    pub fn new(alpha: u32, gamma: Vec<f64>) -> Result<Self> {
        let alpha = Smoothness::new(alpha)?;
        if gamma.is_empty() {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if let Some((j, g)) = gamma
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::InvalidParams(format!(
                "weight gamma_{} = {g} must be positive and finite",
                j + 1
            )));
        }
        let gamma_sq = gamma.iter().map(|g| g * g).collect();
        Ok(Self {
            alpha,
            gamma,
            gamma_sq,
        })
    }

    /// Weights `gamma_j = j^(-decay)` for `j = 1..=d`.
    pub fn with_poly_weights(d: usize, alpha: u32, decay: f64) -> Result<Self> {
        let gamma = (1..=d).map(|j| (j as f64).powf(-decay)).collect();
        Self::new(alpha, gamma)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn alpha(&self) -> Smoothness {
        self.alpha
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_sq(&self) -> &[f64] {
        &self.gamma_sq
    }

    /// The same space restricted to its first `s` coordinates.
    pub fn truncated(&self, s: usize) -> Result<Self> {
        if s == 0 || s > self.dim() {
            return Err(Error::InvalidParams(format!(
                "cannot truncate a {}-dimensional space to {s} dimensions",
                self.dim()
            )));
        }
        Self::new(self.alpha.value(), self.gamma[..s].to_vec())
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.5 && lambda < self.alpha.as_f64()) {
            return Err(Error::Domain {
                name: "lambda",
                value: lambda,
                domain: "[1/2, alpha)",
            });
        }
        Ok(())
    }

    /// Per-coordinate factors `gamma_j^(1/lambda) 2 zeta(alpha/lambda)`.
    pub fn lambda_factors(&self, lambda: f64) -> Result<Vec<f64>> {
        self.check_lambda(lambda)?;
        let two_zeta = 2.0 * zeta(self.alpha.as_f64() / lambda)?;
        Ok(self
            .gamma
            .iter()
            .map(|g| g.powf(1.0 / lambda) * two_zeta)
            .collect())
    }
}

/// A Fourier index `h` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrequencyVector(pub Vec<i64>);

impl FrequencyVector {
    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, h)| **h != 0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|h| *h == 0)
    }

    pub fn scaled(&self, factor: i64) -> Self {
        Self(self.0.iter().map(|h| h * factor).collect())
    }
}

/// `r_alpha(h) = prod_{j in supp h} |h_j|^alpha / gamma_j`; 1 for `h = 0`.
pub fn r_alpha(params: &KorobovSpaceParams, h: &FrequencyVector) -> f64 {
    let a = params.alpha().value() as i32;
    h.support()
        .into_iter()
        .map(|j| (h.0[j].unsigned_abs() as f64).powi(a) / params.gamma()[j])
        .product()
}

/// Product-weight closed form of
/// `mu(lambda) = sum_{h != 0} r_alpha(h)^(-1/lambda)`.
pub fn mu_quantity(params: &KorobovSpaceParams, lambda: f64) -> Result<f64> {
    let factors = params.lambda_factors(lambda)?;
    Ok(factors.iter().map(|f| 1.0 + f).product::<f64>() - 1.0)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
