use approx::assert_abs_diff_eq;
use nalgebra::{Quaternion, UnitQuaternion};
use ndarray::Array2;
use proptest::prelude::*;

use motion_forge::curriculum::{
    apply_level_floor, introduced_count, introduction_ratio, sampling_distribution, sampling_score,
    update_file_stats, FileRecord, SamplerConfig,
};
use motion_forge::generation::{cfg_combine, mirror_tag, sample_multiplier, asfo_multipliers, TagCatalog};
use motion_forge::motion::{denormalize, fit_norm_stats, normalize, rot_to_6d, sixd_to_rot, FeatureFrame, FEATURE_DIM};
use motion_forge::router::{load_balance_loss, softmax, top_k};

fn record(level: u8, err: f64, succ: f64, fail: f64, attempts: u64) -> FileRecord {
    let mut r = FileRecord::new("f", level).unwrap();
    r.ema_error = err;
    r.success_count = succ;
    r.failure_count = fail;
    r.attempts = attempts;
    r
}

prop_compose! {
    fn arb_record()(level in 1u8..=10, err in 0.0..2.0f64, s in 0.0..50.0f64, f in 0.0..50.0f64, n in 0u64..50_000)
        -> FileRecord { record(level, err, s, f, n) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sixd_round_trip(w in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
        let q = Quaternion::new(w, x, y, z);
        prop_assume!(q.norm() > 1e-3);
        let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        let back = sixd_to_rot(&rot_to_6d(&r).unwrap()).unwrap();
        prop_assert!((back - r).amax() < 1e-9);
    }

    #[test]
    fn sampling_distribution_is_floored_simplex(recs in prop::collection::vec(arb_record(), 1..30), iter in 0u64..20_000) {
        let cfg = SamplerConfig::default();
        let refs: Vec<&FileRecord> = recs.iter().collect();
        let p = sampling_distribution(&refs, &cfg, iter).unwrap();
        let floor = cfg.epsilon / recs.len() as f64;
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        prop_assert!(p.iter().all(|&x| x >= floor - 1e-15));
    }

    #[test]
    fn score_grows_with_error(err in 0.0..0.29f64, bump in 0.001..0.1f64, iter in 0u64..20_000) {
        let cfg = SamplerConfig::default();
        let lo = sampling_score(&record(1, err, 3.0, 3.0, 10), &cfg, iter);
        let hi = sampling_score(&record(1, (err + bump).min(0.3), 3.0, 3.0, 10), &cfg, iter);
        prop_assert!(hi >= lo);
    }

    #[test]
    fn level_floor_keeps_sum_and_floors(raw in prop::collection::vec(0.01..1.0f64, 2..20), seed in 0u64..1000) {
        let n = raw.len();
        let eps = 0.2;
        let z: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| (1.0 - eps) * v / z + eps / n as f64).collect();
        let levels: Vec<u8> = (0..n).map(|i| 1 + ((i as u64 * 7 + seed) % 4) as u8).collect();
        let out = apply_level_floor(&p, &levels, 0.02, eps);
        assert_abs_diff_eq!(out.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        prop_assert!(out.iter().all(|&x| x >= eps / n as f64 - 1e-15));
        for l in 1..=4u8 {
            let mass: f64 = out.iter().zip(&levels).filter(|(_, &lv)| lv == l).map(|(x, _)| x).sum();
            if levels.contains(&l) {
                prop_assert!(mass >= 0.02 - 1e-12);
            }
        }
    }

    #[test]
    fn introduction_is_monotone(level in 1u8..=10, a in 0u64..8000, b in 0u64..8000, n in 1usize..500) {
        let cfg = SamplerConfig::default();
        let (t0, t1) = (a.min(b), a.max(b));
        let r0 = introduction_ratio(t0, 0, level, &cfg);
        let r1 = introduction_ratio(t1, 0, level, &cfg);
        prop_assert!(r0 <= r1 && (0.2..=1.0).contains(&r0));
        let (c0, c1) = (introduced_count(r0, n), introduced_count(r1, n));
        prop_assert!(c0 <= c1 && c0 >= 1 && c1 <= n);
    }

    #[test]
    fn stats_update_counts_attempts(succ in 0u32..100, fail in 0u32..100, err in 0.0..1.0f64) {
        let cfg = SamplerConfig::default();
        let mut r = record(2, 0.1, 0.0, 0.0, 0);
        update_file_stats(&mut r, err, succ, fail, &cfg).unwrap();
        prop_assert_eq!(r.attempts, (succ + fail) as u64);
        prop_assert!(r.ema_error >= 0.0);
    }

    #[test]
    fn softmax_ignores_logit_shift(logits in prop::collection::vec(-20.0..20.0f64, 1..16), shift in -50.0..50.0f64) {
        let a = softmax(&logits, 1.0);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let b = softmax(&shifted, 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        prop_assert_eq!(top_k(&logits, 3), top_k(&shifted, 3));
    }

    #[test]
    fn balance_loss_bounds(rows in prop::collection::vec(prop::collection::vec(0.001..1.0f64, 4), 1..40)) {
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| { let z: f64 = r.iter().sum(); r.iter().map(|v| v / z).collect() }).collect();
        let l = load_balance_loss(&probs).unwrap();
        prop_assert!((0.0..=4.0 + 1e-12).contains(&l));
        // a repeated routing vector is at least as balanced as uniform
        let constant = load_balance_loss(&vec![probs[0].clone(); 5]).unwrap();
        prop_assert!(constant >= 1.0 - 1e-12);
    }

    #[test]
    fn normalization_round_trip(rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, FEATURE_DIM), 2..12)) {
        let frames: Vec<FeatureFrame> = rows.iter().map(|r| FeatureFrame::from_slice(r).unwrap()).collect();
        let stats = fit_norm_stats(&frames).unwrap();
        for f in &frames {
            let back = denormalize(&normalize(f, &stats), &stats);
            for d in 0..FEATURE_DIM {
                assert_abs_diff_eq!(back.0[d], f.0[d], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn tag_mirroring_is_involution(tag in "[a-z_]{0,12}(left|right)?[a-z_]{0,8}") {
        prop_assert_eq!(mirror_tag(&mirror_tag(&tag)), tag);
    }

    #[test]
    fn multipliers_within_bounds(counts in prop::collection::vec(1u64..10_000, 1..12)) {
        let cat = TagCatalog {
            counts: counts.iter().enumerate().map(|(i, c)| (format!("t{i}"), *c)).collect(),
            rho_max: 8,
            alpha_mir: 0.3,
        };
        let m = asfo_multipliers(&cat).unwrap();
        prop_assert!(m.values().all(|&r| (1..=8).contains(&r)));
        let all: Vec<String> = m.keys().cloned().collect();
        let top = sample_multiplier(&all, &m).unwrap();
        prop_assert_eq!(top, *m.values().max().unwrap());
    }

    #[test]
    fn guidance_is_affine(vals in prop::collection::vec(-5.0..5.0f64, 12), s in 0.0..4.0f64) {
        let c = Array2::from_shape_vec((2, 3), vals[..6].to_vec()).unwrap();
        let u = Array2::from_shape_vec((2, 3), vals[6..].to_vec()).unwrap();
        let g = cfg_combine(c.view(), u.view(), s).unwrap();
        for ((gv, cv), uv) in g.iter().zip(c.iter()).zip(u.iter()) {
            assert_abs_diff_eq!(*gv, uv + s * (cv - uv), epsilon = 1e-10);
        }
    }
}
