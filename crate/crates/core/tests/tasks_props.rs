use proptest::prelude::*;
use rcopt::hyperspace::HyperPoint;
use rcopt::readout::TrainingConfig;
use rcopt::reservoir::ReservoirConfig;
use rcopt::tasks::{evaluate_objective, export_dataset, generate_synthetic, load_features, Split, SyntheticTaskSpec};

fn small_spec() -> impl Strategy<Value = SyntheticTaskSpec> {
    (1usize..5, 2usize..4, 2usize..5, 2usize..6, 0.0f64..3.0, 0.0f64..0.95, 0.0f64..2.0, any::<u64>()).prop_map(
        |(features, classes, per_class, min_length, separation, correlation, noise, seed)| SyntheticTaskSpec {
            features,
            classes,
            sequences_per_class: per_class,
            min_length,
            max_length: min_length + 6,
            separation,
            correlation,
            noise,
            train_fraction: 0.6,
            seed,
        },
    )
}

fn point() -> impl Strategy<Value = HyperPoint> {
    (0.1f64..1.5, -10.0f64..0.0, -10.0f64..0.0, -10.0f64..0.0)
        .prop_map(|(a, b, g, r)| HyperPoint::new(a, 10f64.powf(b), 10f64.powf(g), 10f64.powf(r)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn accuracy_is_a_fraction(spec in small_spec(), p in point(), seed in any::<u64>(), quantised in any::<bool>()) {
        let d = generate_synthetic(&spec).unwrap();
        let mut rc = ReservoirConfig::new(8, spec.features, p, seed);
        rc.quantisation_enabled = quantised;
        let acc = evaluate_objective(&d, &p, &rc, &TrainingConfig::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn sequence_order_within_splits_is_irrelevant(
        spec in small_spec(),
        p in point(),
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let d = generate_synthetic(&spec).unwrap();
        let rc = ReservoirConfig::new(8, spec.features, p, seed);
        let tc = TrainingConfig::default();
        let base = evaluate_objective(&d, &p, &rc, &tc).unwrap();

        // Reverse the training split and rotate the test split by a seeded
        // amount, keeping each sequence in its split.
        let mut train: Vec<_> = d.split(Split::Train).cloned().collect();
        let mut test: Vec<_> = d.split(Split::Test).cloned().collect();
        train.reverse();
        let k = (shuffle_seed % test.len() as u64) as usize;
        test.rotate_left(k);
        let mut permuted = d.clone();
        permuted.sequences = test.into_iter().chain(train).collect();
        let again = evaluate_objective(&permuted, &p, &rc, &tc).unwrap();
        prop_assert_eq!(base, again);
    }

    #[test]
    fn export_then_load_is_identity(spec in small_spec()) {
        let d = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(&d, dir.path()).unwrap();
        let back = load_features(dir.path(), None).unwrap();
        prop_assert_eq!(back.features, d.features);
        prop_assert_eq!(back.classes, d.classes);
        prop_assert_eq!(back.sequences.len(), d.sequences.len());
        for (a, b) in d.sequences.iter().zip(&back.sequences) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.split, b.split);
            prop_assert_eq!(a.frames.shape(), b.frames.shape());
            prop_assert!(a.frames.iter().zip(b.frames.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
