//! Cyclic convolution of arbitrary length through zero-padded power-of-two
//! FFTs, and the Rader reindexing that turns `sum_k v[k z mod p] w[k]` for
//! all `z` into one convolution of length `p - 1`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::errors::{Error, Result};
use crate::primes::{is_primitive_root, mod_inv};

/// A reusable plan for cyclic convolutions of a fixed length.
#[derive(Clone)]
pub struct ConvolutionPlan {
    length: usize,
    padded_length: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("length", &self.length)
            .field("padded_length", &self.padded_length)
            .finish()
    }
}

/// Caller-owned work buffers for [`ConvolutionPlan`].
#[derive(Debug, Clone)]
pub struct ConvScratch {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl ConvolutionPlan {
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::Config("convolution length must be positive".into()));
        }
        let padded_length = (2 * length - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Ok(Self {
            length,
            padded_length,
            forward: planner.plan_fft_forward(padded_length),
            inverse: planner.plan_fft_inverse(padded_length),
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    pub fn make_scratch(&self) -> ConvScratch {
        let fft_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        ConvScratch {
            a: vec![Complex64::default(); self.padded_length],
            b: vec![Complex64::default(); self.padded_length],
            fft: vec![Complex64::default(); fft_len],
        }
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.length {
            return Err(Error::LengthMismatch {
                expected: self.length,
                got,
            });
        }
        Ok(())
    }

    fn load(x: &[f64], out: &mut [Complex64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = Complex64::new(v, 0.0);
        }
        out[x.len()..].fill(Complex64::default());
    }

    fn fold(&self, buf: &[Complex64], out: &mut [f64]) {
        let scale = 1.0 / self.padded_length as f64;
        let l = self.length;
        for m in 0..l {
            let wrap = if m + 1 < l { buf[m + l].re } else { 0.0 };
            out[m] = (buf[m].re + wrap) * scale;
        }
    }

    /// Zero-padded forward transform of `x` into `out`.
    pub fn forward_into(&self, x: &[f64], out: &mut [Complex64], scratch: &mut ConvScratch) -> Result<()> {
        self.check_len(x.len())?;
        if out.len() != self.padded_length {
            return Err(Error::LengthMismatch {
                expected: self.padded_length,
                got: out.len(),
            });
        }
        Self::load(x, out);
        self.forward.process_with_scratch(out, &mut scratch.fft);
        Ok(())
    }

    /// Inverse of a product spectrum, folded back to length `length`.
    pub fn inverse_cyclic(&self, spectrum: &[Complex64], out: &mut [f64], scratch: &mut ConvScratch) -> Result<()> {
        self.check_len(out.len())?;
        if spectrum.len() != self.padded_length {
            return Err(Error::LengthMismatch {
                expected: self.padded_length,
                got: spectrum.len(),
            });
        }
        scratch.a.copy_from_slice(spectrum);
        self.inverse.process_with_scratch(&mut scratch.a, &mut scratch.fft);
        self.fold(&scratch.a, out);
        Ok(())
    }

    /// `out[m] = sum_k a[k] b[(m - k) mod L]`.
    pub fn convolve(&self, a: &[f64], b: &[f64], out: &mut [f64], scratch: &mut ConvScratch) -> Result<()> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        self.check_len(out.len())?;
        let ConvScratch { a: fa, b: fb, fft } = scratch;
        Self::load(a, fa);
        Self::load(b, fb);
        self.forward.process_with_scratch(fa, fft);
        self.forward.process_with_scratch(fb, fft);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= y;
        }
        self.inverse.process_with_scratch(fa, fft);
        self.fold(fa, out);
        Ok(())
    }

    /// Raw forward transform, exposed for Parseval checks.
    pub fn transform(&self, x: &mut [Complex64], scratch: &mut ConvScratch) {
        self.forward.process_with_scratch(x, &mut scratch.fft);
    }
}

/// One-shot cyclic convolution.
pub fn cyclic_convolve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let plan = ConvolutionPlan::new(a.len())?;
    let mut scratch = plan.make_scratch();
    let mut out = vec![0.0; a.len()];
    plan.convolve(a, b, &mut out, &mut scratch)?;
    Ok(out)
}

/// Rader reindexing for a prime `p` and primitive root `g`.
#[derive(Debug, Clone)]
pub struct RaderPlan {
    p: usize,
    g: u64,
    /// `g^c mod p` for `c = 0..p-1`.
    powers: Vec<usize>,
    /// `g^{-c} mod p` for `c = 0..p-1`.
    inv_powers: Vec<usize>,
    conv: Option<ConvolutionPlan>,
}

impl RaderPlan {
    pub fn new(p: u64, g: u64) -> Result<Self> {
        if !is_primitive_root(g, p) {
            return Err(Error::InvalidRoot { g, p });
        }
        let n = (p - 1) as usize;
        let mut powers = Vec::with_capacity(n);
        let mut x = 1u64;
        for _ in 0..n {
            powers.push(x as usize);
            x = x * g % p;
        }
        let g_inv = mod_inv(g, p).unwrap_or(1);
        let mut inv_powers = Vec::with_capacity(n);
        let mut y = 1u64;
        for _ in 0..n {
            inv_powers.push(y as usize);
            y = y * g_inv % p;
        }
        // p = 2 has a trivial group and needs no transform
        let conv = if n > 1 { Some(ConvolutionPlan::new(n)?) } else { None };
        Ok(Self {
            p: p as usize,
            g,
            powers,
            inv_powers,
            conv,
        })
    }

    pub fn prime(&self) -> usize {
        self.p
    }

    pub fn root(&self) -> u64 {
        self.g
    }

    pub fn make_scratch(&self) -> RaderScratch {
        let n = self.p - 1;
        RaderScratch {
            conv: self.conv.as_ref().map(ConvolutionPlan::make_scratch),
            v_perm: vec![0.0; n],
            w_perm: vec![0.0; n],
            spec_w: self
                .conv
                .as_ref()
                .map_or_else(Vec::new, |c| vec![Complex64::default(); c.padded_length()]),
            spec_v: self
                .conv
                .as_ref()
                .map_or_else(Vec::new, |c| vec![Complex64::default(); c.padded_length()]),
            out: vec![0.0; n],
        }
    }

    fn check(&self, v: &[f64], w: &[f64]) -> Result<()> {
        for len in [v.len(), w.len()] {
            if len != self.p {
                return Err(Error::LengthMismatch {
                    expected: self.p,
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// `S[z] = sum_k v[k z mod p] w[k]` for every `z` in `Z_p`.
    pub fn kernel(&self, v: &[f64], w: &[f64], scratch: &mut RaderScratch) -> Result<Vec<f64>> {
        let mut acc = RaderAccumulator::new(self);
        acc.add(self, v, w, scratch)?;
        acc.finish(self, scratch)
    }
}

/// Work buffers for [`RaderPlan`].
#[derive(Debug, Clone)]
pub struct RaderScratch {
    conv: Option<ConvScratch>,
    v_perm: Vec<f64>,
    w_perm: Vec<f64>,
    spec_w: Vec<Complex64>,
    spec_v: Vec<Complex64>,
    out: Vec<f64>,
}

/// Sums `S` vectors of several `(v, w)` pairs, adding in the frequency
/// domain so that only one inverse transform is needed.
#[derive(Debug, Clone)]
pub struct RaderAccumulator {
    spectrum: Vec<Complex64>,
    /// `sum v[0] w[0]`, shared by every nonzero `z`.
    corner: f64,
    /// `S[0]` accumulated directly.
    at_zero: f64,
    /// Used only for `p = 2`, where the convolution has length 1.
    direct: f64,
}

impl RaderAccumulator {
    pub fn new(plan: &RaderPlan) -> Self {
        Self {
            spectrum: plan
                .conv
                .as_ref()
                .map_or_else(Vec::new, |c| vec![Complex64::default(); c.padded_length()]),
            corner: 0.0,
            at_zero: 0.0,
            direct: 0.0,
        }
    }

    pub fn add(&mut self, plan: &RaderPlan, v: &[f64], w: &[f64], scratch: &mut RaderScratch) -> Result<()> {
        plan.check(v, w)?;
        self.corner += v[0] * w[0];
        self.at_zero += v[0] * w.iter().sum::<f64>();
        let Some(conv) = plan.conv.as_ref() else {
            self.direct += v[1] * w[1];
            return Ok(());
        };
        for c in 0..plan.p - 1 {
            scratch.v_perm[c] = v[plan.powers[c]];
            scratch.w_perm[c] = w[plan.inv_powers[c]];
        }
        let cs = scratch.conv.as_mut().expect("scratch built for this plan");
        conv.forward_into(&scratch.w_perm, &mut scratch.spec_w, cs)?;
        conv.forward_into(&scratch.v_perm, &mut scratch.spec_v, cs)?;
        for ((acc, a), b) in self.spectrum.iter_mut().zip(&scratch.spec_w).zip(&scratch.spec_v) {
            *acc += a * b;
        }
        Ok(())
    }

    /// Adds a precomputed product spectrum together with its scalar parts.
    pub fn add_spectrum(&mut self, spectrum: &[Complex64], corner: f64, at_zero: f64) {
        for (acc, s) in self.spectrum.iter_mut().zip(spectrum) {
            *acc += s;
        }
        self.corner += corner;
        self.at_zero += at_zero;
    }

    pub fn finish(&self, plan: &RaderPlan, scratch: &mut RaderScratch) -> Result<Vec<f64>> {
        let mut s = vec![0.0; plan.p];
        s[0] = self.at_zero;
        let Some(conv) = plan.conv.as_ref() else {
            s[1] = self.corner + self.direct;
            return Ok(s);
        };
        let cs = scratch.conv.as_mut().expect("scratch built for this plan");
        conv.inverse_cyclic(&self.spectrum, &mut scratch.out, cs)?;
        for b in 0..plan.p - 1 {
            s[plan.powers[b]] = self.corner + scratch.out[b];
        }
        Ok(s)
    }
}

/// `S[z] = sum_k v[(k z) mod p] w[k]` for all `z`, via Rader reindexing.
pub fn rader_cbc_kernel(p: u64, g: u64, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let plan = RaderPlan::new(p, g)?;
    let mut scratch = plan.make_scratch();
    plan.kernel(v, w, &mut scratch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primes::primitive_root;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn naive_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
        let l = a.len();
        (0..l)
            .map(|m| (0..l).map(|k| a[k] * b[(m + l - k) % l]).sum())
            .collect()
    }

    fn naive_kernel(p: usize, v: &[f64], w: &[f64]) -> Vec<f64> {
        (0..p)
            .map(|z| (0..p).map(|k| v[k * z % p] * w[k]).sum())
            .collect()
    }

    #[test]
    fn convolution_examples() {
        let c = cyclic_convolve(&[1.0, 0.0, 0.0], &[2.0, 3.0, 5.0]).unwrap();
        for (x, y) in c.iter().zip([2.0, 3.0, 5.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        let c = cyclic_convolve(&[1.0, 1.0], &[1.0, -1.0]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-14));
        assert!(matches!(
            cyclic_convolve(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(cyclic_convolve(&[3.0], &[4.0]).unwrap(), vec![12.0]);
    }

    #[test]
    fn convolution_matches_naive_97() {
        let mut seed = 7;
        let a: Vec<f64> = (0..97).map(|_| lcg(&mut seed)).collect();
        let b: Vec<f64> = (0..97).map(|_| lcg(&mut seed)).collect();
        let fast = cyclic_convolve(&a, &b).unwrap();
        for (x, y) in fast.iter().zip(naive_conv(&a, &b)) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn parseval() {
        let plan = ConvolutionPlan::new(50).unwrap();
        let mut scratch = plan.make_scratch();
        let mut seed = 3;
        let mut x: Vec<Complex64> = (0..plan.padded_length())
            .map(|_| Complex64::new(lcg(&mut seed), lcg(&mut seed)))
            .collect();
        let energy: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        plan.transform(&mut x, &mut scratch);
        let fenergy: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let l = plan.padded_length() as f64;
        assert!((fenergy - l * energy).abs() <= 1e-10 * l * energy);
    }

    #[test]
    fn rader_p3_expansion() {
        let v = [2.0, 3.0, 7.0];
        let w = [11.0, 13.0, 17.0];
        let s = rader_cbc_kernel(3, 2, &v, &w).unwrap();
        let expect = [
            v[0] * (w[0] + w[1] + w[2]),
            v[0] * w[0] + v[1] * w[1] + v[2] * w[2],
            v[0] * w[0] + v[2] * w[1] + v[1] * w[2],
        ];
        for (x, y) in s.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rader_delta_weights() {
        for p in [2u64, 5, 13, 29] {
            let g = primitive_root(p).unwrap();
            let v: Vec<f64> = (0..p).map(|m| 1.5 + m as f64).collect();
            let mut w = vec![0.0; p as usize];
            w[0] = 1.0;
            let s = rader_cbc_kernel(p, g, &v, &w).unwrap();
            assert!(s.iter().all(|x| (x - v[0]).abs() < 1e-12), "p={p}");
        }
    }

    #[test]
    fn rader_matches_naive_all_small_primes() {
        let mut seed = 11;
        for p in (2..=101u64).filter(|&p| crate::primes::is_prime(p)) {
            let g = primitive_root(p).unwrap();
            let plan = RaderPlan::new(p, g).unwrap();
            let mut scratch = plan.make_scratch();
            for _ in 0..20 {
                let v: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
                let w: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
                let fast = plan.kernel(&v, &w, &mut scratch).unwrap();
                let slow = naive_kernel(p as usize, &v, &w);
                let scale = slow.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                for (x, y) in fast.iter().zip(&slow) {
                    assert!((x - y).abs() <= 1e-9 * scale, "p={p}");
                }
            }
        }
    }

    #[test]
    fn accumulator_sums_kernels() {
        let p = 23u64;
        let plan = RaderPlan::new(p, primitive_root(p).unwrap()).unwrap();
        let mut scratch = plan.make_scratch();
        let mut seed = 5;
        let mut acc = RaderAccumulator::new(&plan);
        let mut total = vec![0.0; p as usize];
        for _ in 0..4 {
            let v: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
            let w: Vec<f64> = (0..p).map(|_| lcg(&mut seed)).collect();
            acc.add(&plan, &v, &w, &mut scratch).unwrap();
            for (t, x) in total.iter_mut().zip(naive_kernel(p as usize, &v, &w)) {
                *t += x;
            }
        }
        let fast = acc.finish(&plan, &mut scratch).unwrap();
        for (x, y) in fast.iter().zip(&total) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_primitive_root() {
        assert_eq!(
            RaderPlan::new(7, 2).unwrap_err(),
            Error::InvalidRoot { g: 2, p: 7 }
        );
    }
}
