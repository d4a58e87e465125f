use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use soit2fnn::clustering::Normalizer;
use soit2fnn::data::{extract_windows, Scheme, SeriesInput, SplitRule, WindowSpec};
use soit2fnn::fuzzy::{It2Mf, transform_grades};
use soit2fnn::gradients::random_network;
use soit2fnn::network::{forward, Ablation};
use soit2fnn::Model;

fn lag_set() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(1i64..12, 1..5).prop_map(|s| s.into_iter().rev().map(|v| -v).collect())
}

fn lead_set() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(0i64..6, 1..4).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn windows_index_the_series(
        lags in lag_set(),
        leads in lead_set(),
        len in 30usize..120,
        cut in 0.2f64..0.8,
    ) {
        let series: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let spec = WindowSpec { input_lags: lags.clone(), output_leads: leads.clone(), scheme: Scheme::Mo, calendar: false };
        let train_len = (len as f64 * cut) as usize;
        let input = SeriesInput { train: &series, test: &series, timestamps: None };
        let (train, test, dropped) = extract_windows(&input, &spec, &SplitRule::Range { train_len }).unwrap();
        let origins = len as i64 - leads.last().unwrap() + lags[0];
        prop_assert_eq!((train.len() + test.len() + dropped) as i64, origins);
        for w in [&train, &test] {
            for ((x, y), &t) in w.x.iter().zip(&w.y).zip(&w.origins) {
                for (v, lag) in x.iter().zip(&lags) {
                    prop_assert_eq!(*v, (t as i64 + lag) as f64);
                }
                for (v, lead) in y.iter().zip(&leads) {
                    prop_assert_eq!(*v, (t as i64 + lead) as f64);
                }
            }
        }
        for &t in &train.origins {
            prop_assert!(((t as i64) + leads.last().unwrap()) < train_len as i64);
        }
        for &t in &test.origins {
            prop_assert!((t as i64) + lags[0] >= train_len as i64);
        }
    }

    #[test]
    fn normalizer_round_trip(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..20)) {
        prop_assume!((0..3).all(|j| rows.iter().any(|r| r[j] != rows[0][j])));
        let norm = Normalizer::fit(&rows).unwrap();
        for r in &rows {
            let z = norm.apply(r);
            prop_assert!(z.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
            for (a, b) in norm.invert(&z).iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn membership_interval_is_ordered(a in -2.0f64..2.0, d in 0.0f64..1.0, sigma in 1e-3f64..2.0, x in -5.0f64..5.0) {
        let mf = It2Mf::new(a, a + d, sigma);
        let (lo, up) = (mf.lower(x), mf.upper(x));
        prop_assert!(0.0 <= lo && lo <= up && up <= 1.0);
        if (a..=a + d).contains(&x) {
            prop_assert_eq!(up, 1.0);
        }
    }

    #[test]
    fn transformation_orders_and_stays_positive(grades in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50)) {
        let lower: Vec<f64> = grades.iter().map(|(a, b)| a.min(*b)).collect();
        let upper: Vec<f64> = grades.iter().map(|(a, b)| a.max(*b)).collect();
        let f = transform_grades(&lower, &upper, &[]);
        prop_assert!(f.lower > 0.0 && f.lower <= f.upper && f.upper.is_finite());
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>(), n in 1usize..5, m in 1usize..4, k in 1usize..4, flags in 0u8..8) {
        let ablation = Ablation { no_layer4: flags & 1 != 0, no_layer9: flags & 2 != 0, shared_consequents: flags & 4 != 0 };
        let params = random_network(&mut ChaCha8Rng::seed_from_u64(seed), n, m, k, ablation);
        let model = Model::new(
            params,
            Normalizer::from_bounds(vec![-1.0; n], vec![3.0; n]).unwrap(),
            Normalizer::from_bounds(vec![0.5; k], vec![2.0; k]).unwrap(),
        );
        let back = Model::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &model);
        let x = vec![0.7; n];
        prop_assert_eq!(back.predict_raw(&x).unwrap(), model.predict_raw(&x).unwrap());
    }

    #[test]
    fn forward_is_finite_outside_training_range(seed in any::<u64>(), x in prop::collection::vec(-1e3f64..1e3, 3)) {
        let p = random_network(&mut ChaCha8Rng::seed_from_u64(seed), 3, 3, 2, Ablation::default());
        let (y, trace) = forward(&x, &p);
        prop_assert!(y.iter().all(|v| v.is_finite()));
        prop_assert!(trace.f_lower.iter().all(|f| *f > 0.0));
    }
}
