//! Property tests for the algebraic invariants.

use distillkit::dataset::FeatureSet;
use distillkit::diffusion::{
    forward_noise, predict_clean_embedding, simple_loss, NoiseSchedule, ScheduleKind, ZhatMode,
};
use distillkit::eval::{mmd_rbf, Bandwidth};
use distillkit::minimax::{bank_enqueue, MemoryBank, Partitioning};
use distillkit::vecmath::cosine_sim;
use proptest::prelude::*;

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim)
}

proptest! {
    #[test]
    fn cosine_bounded_and_symmetric(a in vec_strategy(4), b in vec_strategy(4)) {
        let ab = cosine_sim(&a, &b).unwrap();
        let ba = cosine_sim(&b, &a).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn simple_loss_symmetric_nonnegative(a in vec_strategy(5), b in vec_strategy(5)) {
        let ab = simple_loss(&a, &b).unwrap();
        let ba = simple_loss(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        if a == b {
            prop_assert_eq!(ab, 0.0);
        } else {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn exact_recovery_inverts_noising(
        z0 in vec_strategy(3),
        eps in vec_strategy(3),
        t in 1usize..100,
    ) {
        let schedule = NoiseSchedule::new(100, ScheduleKind::Linear).unwrap();
        let zt = forward_noise(&z0, t, &eps, &schedule).unwrap();
        let rec = predict_clean_embedding(&zt, &eps, ZhatMode::DdpmExact, t, &schedule).unwrap();
        for (r, z) in rec.iter().zip(&z0) {
            prop_assert!((r - z).abs() < 1e-9);
        }
    }

    #[test]
    fn bank_replay_matches_explicit_lists(
        ops in prop::collection::vec((vec_strategy(2), 0usize..3), 1..40),
        capacity in 1usize..6,
    ) {
        let mut bank = MemoryBank::new(capacity, 3, Partitioning::PerClass).unwrap();
        let mut oracle: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 3];
        for (v, label) in &ops {
            bank_enqueue(&mut bank, std::slice::from_ref(v), &[*label]).unwrap();
            oracle[*label].push(v.clone());
            if oracle[*label].len() > capacity {
                oracle[*label].remove(0);
            }
        }
        for class in 0..3 {
            let held: Vec<Vec<f64>> = bank.entries(class).cloned().collect();
            prop_assert_eq!(&held, &oracle[class]);
        }
    }

    #[test]
    fn mmd_identity_and_symmetry(
        rows_a in prop::collection::vec(vec_strategy(2), 2..8),
        rows_b in prop::collection::vec(vec_strategy(2), 2..8),
    ) {
        let fs = |rows: Vec<Vec<f64>>| {
            let n = rows.len();
            FeatureSet::new(rows, vec![0; n], (0..n).collect(), 1).unwrap()
        };
        let a = fs(rows_a);
        let b = fs(rows_b);
        let aa = mmd_rbf(&a, &a, Bandwidth::Fixed(1.0)).unwrap();
        prop_assert!(aa.abs() < 1e-12);
        let ab = mmd_rbf(&a, &b, Bandwidth::Fixed(1.0)).unwrap();
        let ba = mmd_rbf(&b, &a, Bandwidth::Fixed(1.0)).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab >= -1e-12);
    }
}
