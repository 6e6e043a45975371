use proptest::prelude::*;
use rcopt::hyperspace::{GridSpec, HyperPoint, HyperSpace, Interval, DEFAULT_DUPLICATE_TOL};

fn in_bounds_point() -> impl Strategy<Value = HyperPoint> {
    (0.1f64..=1.5, -10.0f64..=0.0, -10.0f64..=0.0, -10.0f64..=0.0)
        .prop_map(|(a, lb, lg, lr)| HyperPoint::new(a, 10f64.powf(lb), 10f64.powf(lg), 10f64.powf(lr)))
        .prop_filter("in bounds", |p| HyperSpace::standard().contains(p))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn unit_round_trip(p in in_bounds_point()) {
        let space = HyperSpace::standard();
        let back = space.from_unit(&space.to_unit(&p).unwrap()).unwrap();
        for (x, y) in p.to_array().iter().zip(back.to_array()) {
            prop_assert!(close(*x, y), "{x} -> {y}");
        }
    }

    #[test]
    fn unit_round_trip_custom_bounds(
        lo in 1e-6f64..10.0,
        width in 1e-3f64..100.0,
        t in 0.0f64..=1.0,
        log in any::<bool>(),
    ) {
        let hi = lo + width;
        let iv = if log { Interval::log10(lo, hi) } else { Interval::linear(lo, hi) }.unwrap();
        let space = HyperSpace::new([iv; 4]).unwrap();
        let v = (lo + t * width).clamp(lo, hi);
        let p = HyperPoint::new(v, v, v, v);
        let back = space.from_unit(&space.to_unit(&p).unwrap()).unwrap();
        prop_assert!(close(v, back.alpha), "{v} -> {}", back.alpha);
    }

    #[test]
    fn grid_size_is_product_and_points_distinct(
        lists in proptest::array::uniform4(proptest::collection::btree_set(0u32..1000, 1..4)),
    ) {
        let space = HyperSpace::standard();
        // Map integer codes into each dimension's interval; sets keep them distinct.
        let values: [Vec<f64>; 4] = [0, 1, 2, 3].map(|d| {
            lists[d]
                .iter()
                .map(|&c| {
                    let u = c as f64 / 1000.0;
                    if d == 0 { 0.1 + 1.4 * u } else { 10f64.powf(-10.0 + 10.0 * u) }
                })
                .collect()
        });
        let expected: usize = values.iter().map(Vec::len).product();
        let grid = GridSpec::new(values);
        let points = space.grid_points(&grid).unwrap();
        prop_assert_eq!(points.len(), expected);
        prop_assert_eq!(grid.len(), expected);
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                prop_assert_ne!(points[i], points[j]);
            }
        }
    }

    #[test]
    fn added_point_is_a_duplicate(
        p in in_bounds_point(),
        others in proptest::collection::vec(in_bounds_point(), 0..6),
    ) {
        let space = HyperSpace::standard();
        let mut history = others;
        history.push(p);
        prop_assert!(space.is_duplicate(&p, &history, 0.0));
        prop_assert!(space.is_duplicate(&p, &history, DEFAULT_DUPLICATE_TOL));
    }
}
