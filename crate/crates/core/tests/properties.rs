//! Property tests for the clip operator and LIBSVM serialization.

use clipopt::clipping::{clip, clip_in_place};
use clipopt::problems::{parse_libsvm, write_libsvm, SparseDataset, SparseRow};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=16, -6i32..6).prop_flat_map(|(n, exp)| {
        let scale = 10f64.powi(exp);
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| v.iter().map(|x| x * scale).collect())
    })
}

fn positive() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -6i32..6).prop_map(|(m, e)| m * 10f64.powi(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn clip_never_exceeds_level(g in vector(), lambda in positive()) {
        prop_assert!(norm(&clip(&g, lambda).unwrap()) <= lambda);
    }

    #[test]
    fn clip_is_identity_inside_the_ball(g in vector(), slack in 1.0f64..100.0) {
        let lambda = norm(&g) * slack;
        prop_assume!(lambda > 0.0);
        let c = clip(&g, lambda).unwrap();
        prop_assert_eq!(c.as_slice(), g.as_slice());
    }

    #[test]
    fn clip_is_positively_homogeneous(g in vector(), lambda in positive(), t in positive()) {
        let c = clip(&g, lambda).unwrap();
        let tg: Vec<f64> = g.iter().map(|v| t * v).collect();
        let lhs = clip(&tg, t * lambda).unwrap();
        let scale = t * norm(&c);
        for (a, b) in lhs.iter().zip(c.iter()) {
            prop_assert!((a - t * b).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn clip_keeps_direction(g in vector(), lambda in positive()) {
        let c = clip(&g, lambda).unwrap();
        let n = norm(&g);
        prop_assume!(n > 0.0);
        let cosine: f64 = g.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>() / (n * norm(&c));
        prop_assert!((cosine - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn clip_reports_activation(g in vector(), lambda in positive()) {
        let mut v = g.clone();
        let active = clip_in_place(&mut v, lambda);
        prop_assert_eq!(active, norm(&g) > lambda);
    }

    #[test]
    fn clip_of_zero_is_zero(n in 1usize..32, lambda in positive()) {
        let c = clip(&vec![0.0; n], lambda).unwrap();
        prop_assert!(c.iter().all(|&v| v == 0.0));
    }
}

fn sparse_dataset() -> impl Strategy<Value = SparseDataset> {
    let row = prop::collection::btree_map(0u32..40, -1e3f64..1e3, 0..8);
    prop::collection::vec((row, any::<bool>()), 100).prop_map(|rows| {
        let mut dimension = 0;
        let mut out = Vec::new();
        let mut labels = Vec::new();
        for (entries, positive) in rows {
            let (indices, values): (Vec<u32>, Vec<f64>) = entries.into_iter().filter(|(_, v)| *v != 0.0).unzip();
            if let Some(&j) = indices.last() {
                dimension = dimension.max(j as usize + 1);
            }
            out.push(SparseRow::new(indices, values));
            labels.push(if positive { 1.0 } else { -1.0 });
        }
        SparseDataset {
            rows: out,
            labels,
            dimension,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn libsvm_round_trip_is_identity(data in sparse_dataset()) {
        let mut text = Vec::new();
        write_libsvm(&data, &mut text).unwrap();
        let parsed = parse_libsvm(text.as_slice()).unwrap();
        prop_assert_eq!(parsed, data);
    }
}

#[test]
fn libsvm_zero_one_labels_map_to_signs() {
    let d = parse_libsvm("0 2:1\n1 1:3\n".as_bytes()).unwrap();
    assert_eq!(d.labels, vec![-1.0, 1.0]);
}

#[test]
fn libsvm_rejects_malformed_input() {
    for bad in ["", "1 3:1 2:1\n", "x 1:1\n", "1 1:y\n", "1 0:1\n", "2 1:1\n0 1:1\n", "1 1\n"] {
        assert!(parse_libsvm(bad.as_bytes()).is_err(), "accepted {bad:?}");
    }
}
