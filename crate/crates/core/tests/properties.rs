use proptest::prelude::*;

use rpfv_core::conv::rader_cbc_kernel;
use rpfv_core::eval::worst_case_error_sq;
use rpfv_core::num::{KorobovSpaceParams, Smoothness};
use rpfv_core::oracle::rader_kernel_naive;
use rpfv_core::primes::{crt_pair, is_prime, mod_inv, mod_pow, primitive_root};
use rpfv_core::ties;

fn prime_below(limit: u64) -> impl Strategy<Value = u64> {
    let primes: Vec<u64> = (2..limit).filter(|&p| is_prime(p)).collect();
    proptest::sample::select(primes)
}

proptest! {
    #[test]
    fn sigma_is_symmetric(alpha in 1u32..=3, x in 0.0f64..1.0) {
        let a = Smoothness::new(alpha).unwrap();
        let (l, r) = (a.sigma(x), a.sigma(1.0 - x));
        prop_assert!((l - r).abs() <= 1e-12 * a.sigma_zero());
    }

    #[test]
    fn sigma_frac_reflects(alpha in 1u32..=3, n in 2u64..500, m in 0u64..500) {
        let a = Smoothness::new(alpha).unwrap();
        let m = m % n;
        prop_assert!((a.sigma_frac(m, n) - a.sigma_frac((n - m) % n, n)).abs() <= 1e-12 * a.sigma_zero());
    }

    #[test]
    fn crt_recovers_residues(p in prime_below(2000), q in prime_below(2000), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(p != q);
        let (a, b) = (a % p, b % q);
        let x = crt_pair(a, p, b, q);
        prop_assert!(x < p * q);
        prop_assert_eq!(x % p, a);
        prop_assert_eq!(x % q, b);
    }

    #[test]
    fn inverse_and_root(p in prime_below(5000), a in 1u64..5000) {
        let a = a % p;
        prop_assume!(a != 0);
        prop_assert_eq!(a * mod_inv(a, p).unwrap() % p, 1);
        let g = primitive_root(p).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in 0..p - 1 {
            seen.insert(mod_pow(g, e, p));
        }
        prop_assert_eq!(seen.len() as u64, p - 1);
    }

    #[test]
    fn rader_matches_naive(p in prime_below(120), seed in any::<u64>()) {
        let mut rng = rpfv_core::runtime::SplitMix64::new(seed);
        let v: Vec<f64> = (0..p).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let fast = rader_cbc_kernel(p, primitive_root(p).unwrap(), &v, &w).unwrap();
        let slow = rader_kernel_naive(&v, &w);
        let scale = slow.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn select_candidate_matches_full_sort(
        theta in proptest::collection::vec(0.0f64..1.0, 1..60),
        seed in any::<u64>(),
        tau in 0.01f64..0.99,
    ) {
        let mut rng = rpfv_core::runtime::SplitMix64::new(seed);
        let t_hat: Vec<f64> = theta.iter().map(|_| rng.next_f64()).collect();
        let mut idx: Vec<usize> = (0..theta.len()).collect();
        idx.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]).then(a.cmp(&b)));
        let k = ((tau * theta.len() as f64).ceil() as usize).clamp(1, theta.len());
        let best = idx[..k]
            .iter()
            .copied()
            .min_by(|&a, &b| t_hat[a].total_cmp(&t_hat[b]).then(a.cmp(&b)))
            .unwrap();
        prop_assert_eq!(ties::select_candidate(&theta, &t_hat, tau), best);
    }

    #[test]
    fn wce_is_nonnegative_and_sign_invariant(p in prime_below(200), z2 in any::<u64>(), z3 in any::<u64>()) {
        let params = KorobovSpaceParams::with_poly_weights(3, 2, 1.0).unwrap();
        let z = [1, z2 % p, z3 % p];
        let neg: Vec<u64> = z.iter().map(|&x| (p - x) % p).collect();
        let e = worst_case_error_sq(p, &z, &params);
        prop_assert!(e >= -1e-12);
        prop_assert!((e - worst_case_error_sq(p, &neg, &params)).abs() <= 1e-12 * e.abs().max(1e-3));
    }
}
