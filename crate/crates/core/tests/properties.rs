//! Randomized invariants of the weights, the exact engine and calibration.

use basket_core::*;
use proptest::prelude::*;

fn prior() -> impl Strategy<Value = BetaParams> {
    (0.3f64..4.0, 0.3f64..4.0).prop_map(|(a, b)| BetaParams::new(a, b).unwrap())
}

fn weight_config() -> impl Strategy<Value = WeightConfig> {
    prop_oneof![
        (-3.0f64..4.0, 0.0f64..4.0).prop_map(|(a, b)| WeightConfig::cpp(a, b).unwrap()),
        (0.0f64..3.0, 0.0f64..0.95, any::<bool>()).prop_map(|(e, t, s)| WeightConfig::jsd(e, t, s).unwrap()),
        Just(WeightConfig::independent()),
    ]
}

fn interim() -> impl Strategy<Value = InterimConfig> {
    (any::<bool>(), 0.0f64..0.5, 0.5f64..1.0).prop_map(|(pp, f, e)| {
        let kind = if pp { InterimKind::PostPred } else { InterimKind::Posterior };
        InterimConfig::new(kind, f, e).unwrap()
    })
}

/// k, counts vectors of length k with their own sample sizes.
fn state() -> impl Strategy<Value = (usize, Vec<u32>, Vec<u32>)> {
    (2usize..=5).prop_flat_map(|k| {
        prop::collection::vec((1u32..30).prop_flat_map(|n| (Just(n), 0..=n)), k)
            .prop_map(move |v| (k, v.iter().map(|x| x.0).collect(), v.iter().map(|x| x.1).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_matrix_is_symmetric_with_unit_diagonal(
        (k, n, r) in state(), cfg in weight_config(), prior in prior(), p0 in 0.05f64..0.95,
    ) {
        let design = DesignSpec::new(k, prior, p0).unwrap();
        let m = weight_matrix(&TrialState::active(&n, &r).unwrap(), &design, &cfg).unwrap();
        for i in 0..k {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in 0..k {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn shared_posterior_lies_between_bounds(
        (k, n, r) in state(), cfg in weight_config(), prior in prior(),
    ) {
        let design = DesignSpec::new(k, prior, 0.3).unwrap();
        let state = TrialState::active(&n, &r).unwrap();
        let m = weight_matrix(&state, &design, &cfg).unwrap();
        let post = shared_posterior(&state, &m, &design, &cfg).unwrap();
        for i in 0..k {
            prop_assert!(post[i].alpha >= r[i] as f64);
            prop_assert!(post[i].beta >= (n[i] - r[i]) as f64);
            let total: f64 = (0..k).map(|j| n[j] as f64).sum::<f64>() + prior.alpha + prior.beta;
            let extra = if cfg.share_prior { (k - 1) as f64 * (prior.alpha + prior.beta) } else { 0.0 };
            prop_assert!(post[i].alpha + post[i].beta <= total + extra + 1e-9);
        }
    }

    #[test]
    fn permuting_baskets_permutes_results(
        k in 2usize..=3, n in 2u32..7, cfg in weight_config(),
        p in prop::collection::vec(0.0f64..1.0, 3), perm_seed in any::<u64>(), lambda in 0.5f64..0.99,
        two_stage in any::<bool>(), ic in interim(),
    ) {
        let design = DesignSpec::new(k, BetaParams::new(1.0, 1.0).unwrap(), 0.2).unwrap();
        let (layout, ic) = if two_stage {
            (StageLayout::two_stage(n, n / 2).unwrap_or(StageLayout::single(n).unwrap()), Some(ic))
        } else {
            (StageLayout::single(n).unwrap(), None)
        };
        let ic = layout.n1().and(ic);
        let engine = ExactEngine::new(design, layout, cfg, ic, lambda).unwrap();
        let p = &p[..k];
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left((perm_seed % k as u64) as usize);
        if perm_seed % 2 == 1 { perm.swap(0, 1); }
        let base = engine.oc(&TrueScenario::new(p.to_vec()).unwrap()).unwrap();
        let moved = engine.oc(&TrueScenario::new(perm.iter().map(|&i| p[i]).collect()).unwrap()).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((moved.rejection_prob[j] - base.rejection_prob[i]).abs() < 1e-12);
            prop_assert!((moved.ess[j] - base.ess[i]).abs() < 1e-12);
            prop_assert!((moved.estim[j].mse - base.estim[i].mse).abs() < 1e-12);
        }
        prop_assert!((moved.fwer - base.fwer).abs() < 1e-12);
        prop_assert!((moved.ecd - base.ecd).abs() < 1e-12);
    }

    #[test]
    fn engine_invariants(
        k in 2usize..=4, n in 2u32..8, cfg in weight_config(), lambda in 0.5f64..0.99,
        p in prop::collection::vec(0.0f64..1.0, 4), ic in interim(),
    ) {
        let design = DesignSpec::new(k, BetaParams::new(1.0, 1.0).unwrap(), 0.2).unwrap();
        let n1 = n / 2;
        let sc = TrueScenario::new(p[..k].to_vec()).unwrap();
        let two = ExactEngine::new(design, StageLayout::two_stage(n, n1).unwrap(), cfg, Some(ic), lambda).unwrap();
        let oc = two.oc(&sc).unwrap();
        prop_assert!((oc.total_mass - 1.0).abs() <= 1e-12);
        let null_max = (0..k).filter(|&i| sc.is_null(i, 0.2)).map(|i| oc.rejection_prob[i]).fold(0.0, f64::max);
        prop_assert!(oc.fwer >= null_max - 1e-12);
        prop_assert!(oc.ecd == basket_core::engine::ecd_from_rejections(&oc.rejection_prob, &sc, 0.2));
        for &e in &oc.ess {
            prop_assert!(e >= n1 as f64 - 1e-12 && e <= n as f64 + 1e-12);
        }
        let naive = two.clone().with_enumeration(Enumeration::Naive).oc(&sc).unwrap();
        prop_assert!((naive.fwer - oc.fwer).abs() < 1e-12);
        for i in 0..k {
            prop_assert!((naive.rejection_prob[i] - oc.rejection_prob[i]).abs() < 1e-12);
            prop_assert!((naive.estim[i].mean_posterior_mean - oc.estim[i].mean_posterior_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn fwer_is_monotone_in_lambda(
        k in 2usize..=3, n in 2u32..10, cfg in weight_config(), ic in interim(), two_stage in any::<bool>(),
    ) {
        let design = DesignSpec::new(k, BetaParams::new(1.0, 1.0).unwrap(), 0.2).unwrap();
        let engine = if two_stage {
            ExactEngine::new(design, StageLayout::two_stage(n, n / 2).unwrap(), cfg, Some(ic), 0.5).unwrap()
        } else {
            ExactEngine::new(design, StageLayout::single(n).unwrap(), cfg, None, 0.5).unwrap()
        };
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let f = engine.with_lambda(i as f64 / 100.0).unwrap().fwer_global_null();
            prop_assert!(f <= prev + 1e-15);
            prev = f;
        }
    }

    #[test]
    fn beta_binomial_normalizes(m in 0u32..60, a in 0.05f64..80.0, b in 0.05f64..80.0) {
        let p = BetaParams::new(a, b).unwrap();
        let total: f64 = (0..=m).map(|x| beta_binom_pmf(m, x, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_normalizes(n in 0u32..200, p in 0.0f64..=1.0) {
        let total: f64 = (0..=n).map(|r| binom_pmf(n, r, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_tail_reflection(a in 0.1f64..100.0, b in 0.1f64..100.0, x in 0.0f64..1.0) {
        let upper = beta_tail(BetaParams::new(a, b).unwrap(), x);
        let mirrored = beta_tail(BetaParams::new(b, a).unwrap(), 1.0 - x);
        prop_assert!((upper + mirrored - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&upper));
    }

    #[test]
    fn jsd_is_symmetric_and_bounded(a1 in 0.2f64..40.0, b1 in 0.2f64..40.0, a2 in 0.2f64..40.0, b2 in 0.2f64..40.0) {
        let p = BetaParams::new(a1, b1).unwrap();
        let q = BetaParams::new(a2, b2).unwrap();
        let d = jsd_beta(p, q).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - jsd_beta(q, p).unwrap()).abs() < 1e-9);
        prop_assert!(jsd_beta(p, p).unwrap() <= 1e-10);
    }
}
