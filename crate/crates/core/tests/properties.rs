use proptest::prelude::*;

use lmo_core::diagnostics::{alpha_ratio, fw_gap, noise_level_hat, period_avg_grad_metric, smoothness_hat, NoiseNorm, Smoothness};
use lmo_core::flops::{matrix_amortized_flops, ns_flops, ns_share, FlopOptions, ModelShape};
use lmo_core::linalg::{
    fro_norm, gaussian_matrix, inf_norm, l1_norm, lmo, msign, nuclear_norm, power_iter_sigma1, singular_values,
    spectral_norm, svd, LmoBall, Matrix,
};
use lmo_core::optim::{OptimConfig, Period};
use lmo_core::rng::stream;
use lmo_core::theory::{
    bound_rhs, period_constants, phi_approx, phi_exact, scan_optimal_p, PhiCriterion, SmoothnessVariant,
    TheoryInputs,
};

fn matrix(seed: u64, m: usize, n: usize) -> Matrix<f64> {
    gaussian_matrix(m, n, &mut stream(seed, &[0xA1]))
}

fn dims(max_m: usize, max_n: usize) -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1..=max_m, 1..=max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_chain((seed, m, n) in dims(32, 48)) {
        let x = matrix(seed, m, n);
        let root = ((m * n) as f64).sqrt();
        let (i, s, f, u, l) = (inf_norm(&x), spectral_norm(&x), fro_norm(&x), nuclear_norm(&x), l1_norm(&x));
        let tol = 1e-10 * l.max(1.0);
        prop_assert!(i <= s + tol);
        prop_assert!(s <= f + tol);
        prop_assert!(f <= root * i + tol);
        prop_assert!(l / root <= f + tol);
        prop_assert!(f <= u + tol);
        prop_assert!(u <= l + tol);
    }

    #[test]
    fn dual_pairing_is_tight((seed, m, n) in dims(16, 16)) {
        let x = matrix(seed, m, n);
        let spectral = lmo(&x, LmoBall::Spectral, 1.0).unwrap();
        let elem = lmo(&x, LmoBall::InfElem, 1.0).unwrap();
        prop_assert!((-x.dot(&spectral).unwrap() - nuclear_norm(&x)).abs() < 1e-9 * nuclear_norm(&x).max(1.0));
        prop_assert!((-x.dot(&elem).unwrap() - l1_norm(&x)).abs() < 1e-9 * l1_norm(&x).max(1.0));
    }

    #[test]
    fn msign_is_homogeneous_idempotent_and_orthogonal((seed, m, n) in dims(12, 12), c in 1e-3f64..1e3) {
        let x = matrix(seed, m, n);
        let s = msign(&x).unwrap();
        prop_assert!(msign(&x.scale(c)).unwrap().max_abs_diff(&s).unwrap() < 1e-9);
        prop_assert!(msign(&s).unwrap().max_abs_diff(&s).unwrap() < 1e-9);
        for v in singular_values(&s) {
            prop_assert!(v < 1e-9 || (v - 1.0).abs() < 1e-9, "singular value {}", v);
        }
    }

    #[test]
    fn svd_reconstructs_with_orthonormal_factors((seed, m, n) in dims(20, 20)) {
        let x = matrix(seed, m, n);
        let r = svd(&x).unwrap();
        prop_assert!(r.reconstruct().max_abs_diff(&x).unwrap() < 1e-10 * fro_norm(&x).max(1.0));
        let k = r.s.len();
        prop_assert!(r.u.transpose().matmul(&r.u).unwrap().max_abs_diff(&Matrix::identity(k)).unwrap() < 1e-10);
        prop_assert!(r.v.transpose().matmul(&r.v).unwrap().max_abs_diff(&Matrix::identity(k)).unwrap() < 1e-10);
        prop_assert!(r.s.windows(2).all(|w| w[0] >= w[1]) && r.s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn power_iteration_never_overshoots((seed, m, n) in dims(24, 24), iters in 1usize..30) {
        let x = matrix(seed, m, n);
        let est = power_iter_sigma1(&x, iters, seed);
        prop_assert!(est <= singular_values(&x)[0] * (1.0 + 1e-12));
    }

    #[test]
    fn diagnostic_ratios_respect_norm_bounds((seed, m, n) in dims(12, 12)) {
        let g = matrix(seed, m, n);
        let mom = matrix(seed ^ 1, m, n);
        let root = ((m * n) as f64).sqrt();
        let a = alpha_ratio(&g).unwrap();
        prop_assert!((1.0 - 1e-9..=root * (1.0 + 1e-9)).contains(&a));
        let rn = noise_level_hat(&g, &mom, NoiseNorm::Nuc).unwrap();
        let r1 = noise_level_hat(&g, &mom, NoiseNorm::L1).unwrap();
        prop_assert!(rn <= (m.min(n) as f64).sqrt() + 1e-9 && rn >= 1.0 - 1e-9);
        prop_assert!(r1 <= root + 1e-9);
        let dw = matrix(seed ^ 2, m, n);
        prop_assert!(smoothness_hat(&g, &dw, Smoothness::L2).unwrap() >= 0.0);
    }

    #[test]
    fn spectral_gap_never_exceeds_elementwise_gap((seed, m, n) in dims(10, 10), lambda in 0.1f64..5.0) {
        let w = matrix(seed, m, n);
        let g = matrix(seed ^ 3, m, n);
        let spec = fw_gap(&w, &g, lambda, LmoBall::Spectral).unwrap();
        let elem = fw_gap(&w, &g, lambda, LmoBall::InfElem).unwrap();
        prop_assert!(spec <= elem + 1e-9 * elem.abs().max(1.0));
    }

    #[test]
    fn period_metric_is_monotone(g in prop::collection::vec(0.0f64..100.0, 1..8), bump in 0.0f64..10.0, idx in 0usize..8) {
        let p = g.len() as u64;
        let base = period_avg_grad_metric(&g, 3e-3, 2e-5, p).unwrap();
        let mut h = g.clone();
        h[idx % g.len()] += bump;
        prop_assert!(period_avg_grad_metric(&h, 3e-3, 2e-5, p).unwrap() >= base);
        if p == 1 {
            prop_assert!((base - g[0]).abs() <= 1e-15 * g[0]);
        }
    }

    #[test]
    fn rho_bar_is_a_convex_combination(p in 2u64..50, eta_m in 1e-5f64..1.0, eta_l in 1e-6f64..1.0) {
        let inputs = inputs();
        let pc = period_constants(eta_m, eta_l, Period::Finite(p), &inputs, SmoothnessVariant::Plain).unwrap();
        let pf = p as f64;
        let w_m = eta_m / (pf * pc.eta_bar);
        let w_l = (pf - 1.0) * eta_l / (pf * pc.eta_bar);
        prop_assert!((w_m + w_l - 1.0).abs() < 1e-12);
        let (lo, hi) = (inputs.rho_nuc.min(inputs.rho_1), inputs.rho_nuc.max(inputs.rho_1));
        prop_assert!(pc.rho_bar >= lo * (1.0 - 1e-12) && pc.rho_bar <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn bound_is_non_increasing_in_horizon(t in 1u64..1_000_000, extra in 1u64..1000, beta in 0.0f64..0.999) {
        let inputs = inputs();
        let pc = period_constants(0.1, 0.001, Period::Finite(2), &inputs, SmoothnessVariant::Plain).unwrap();
        let a = bound_rhs(&inputs, &pc, beta, beta, t, pc.eta_max).unwrap();
        let b = bound_rhs(&inputs, &pc, beta, beta, t + extra, pc.eta_max).unwrap();
        prop_assert_eq!(a.momentum_mismatch, 0.0);
        prop_assert!(b.total <= a.total);
    }

    #[test]
    fn phi_at_one_and_case_one(r_l in 0.0f64..50.0, r_rho in 0.0f64..50.0, kappa in 1.01f64..2.0, k in 1u64..20) {
        prop_assert_eq!(phi_exact(1, r_l, r_rho, kappa, k), 1.0 + 1.0 / k as f64);
        prop_assert_eq!(phi_approx(1.0, r_l, r_rho, kappa), 1.0);
        let s = scan_optimal_p(1.0 + r_l, 1.0 + r_rho, kappa, k, 20, PhiCriterion::Approx).unwrap();
        prop_assert_eq!(s.p_star, 1);
    }

    #[test]
    fn amortized_cost_interpolates_the_extremes(m in 1u64..4096, n in 1u64..4096, p in 1u64..64, k in 1usize..10) {
        let at = |period| matrix_amortized_flops(m, n, period, k);
        let pf = p as f64;
        let expected = at(Period::Finite(1)) / pf + (pf - 1.0) / pf * at(Period::Infinite);
        prop_assert!((at(Period::Finite(p)) - expected).abs() <= 1e-9 * expected);
        prop_assert_eq!(at(Period::Finite(1)), ns_flops(m as usize, n as usize, k) as f64);
    }

    #[test]
    fn ns_share_falls_with_tokens_per_step(batch in 1u64..256, grow in 2u64..8) {
        let cfg = OptimConfig { period: Period::Finite(1), ..OptimConfig::default() };
        let opts = FlopOptions::default();
        let small = ModelShape::gpt2_like("a", 2, 64, 128, batch, 1000);
        let large = ModelShape::gpt2_like("b", 2, 64, 128, batch * grow, 1000);
        prop_assert!(ns_share(&large, &cfg, opts).unwrap() < ns_share(&small, &cfg, opts).unwrap());
    }
}

fn inputs() -> TheoryInputs {
    TheoryInputs {
        l2: 1.0,
        linf: 10.0,
        rho_nuc: 3.0,
        rho_1: 20.0,
        sigma: 0.5,
        kappa: 1.5,
        delta0: 2.0,
        e0_l1: 1.0,
        m: 8,
        n: 8,
        k_ns: 5,
    }
}
