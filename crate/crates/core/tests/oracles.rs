//! Oracle contracts: exact gradients against finite differences, the
//! smoothness certificate, and the statistics of sampled gradients.

use clipopt::oracle::StochasticOracle;
use clipopt::problems::{make_logreg, make_toy, SparseDataset};
use clipopt::{NoiseFamily, NoiseModel, RngStream};
use rand::Rng;
use rand_distr::StandardNormal;

fn random_dataset(rows: usize, cols: usize, seed: u64) -> SparseDataset {
    let mut rng = RngStream::new(seed, 0);
    let dense: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random::<f64>() < 0.3 {
                        0.0
                    } else {
                        rng.sample::<f64, _>(StandardNormal)
                    }
                })
                .collect()
        })
        .collect();
    let labels: Vec<f64> = (0..rows)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    SparseDataset::from_dense(&dense, &labels).unwrap()
}

fn random_point(n: usize, scale: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences with `h = 1e-6 (1 + ||x||)`; every component must
/// agree to `1e-5` relative (absolute below unit magnitude).
fn assert_matches_finite_differences(f: impl Fn(&[f64]) -> f64, grad: &[f64], x: &[f64]) {
    let h = 1e-6 * (1.0 + norm(x));
    for i in 0..x.len() {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let err = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
        assert!(err <= 1e-5, "component {i}: analytic {} vs finite difference {fd}", grad[i]);
    }
}

#[test]
fn toy_gradient_matches_finite_differences() {
    let toy = make_toy(7, None).unwrap();
    let mut rng = RngStream::new(1, 0);
    for _ in 0..20 {
        let x = random_point(7, 3.0, &mut rng);
        let g = toy.full_gradient(&x).unwrap();
        assert_matches_finite_differences(|z| toy.eval(z), &g, &x);
    }
}

#[test]
fn toy_values_and_gradients_are_exact() {
    let toy = make_toy(4, None).unwrap();
    assert_eq!(toy.value(&[0.0; 4]).unwrap(), 0.0);
    assert_eq!(toy.value(&[3.0, 4.0, 0.0, 0.0]).unwrap(), 12.5);
    let x = [1.5, -2.0, 0.25, 8.0];
    assert_eq!(toy.full_gradient(&x).unwrap().as_slice(), &x);
    // Without noise every draw is the exact gradient.
    let mut rng = RngStream::new(3, 0);
    assert_eq!(toy.sample_gradient(&x, &mut rng).unwrap().as_slice(), &x);
    assert_eq!(toy.minibatch_gradient(&x, 17, &mut rng).unwrap().as_slice(), &x);
}

#[test]
fn logreg_gradient_matches_finite_differences() {
    let p = make_logreg(random_dataset(60, 9, 2)).unwrap();
    let mut rng = RngStream::new(2, 1);
    for _ in 0..20 {
        let x = random_point(9, 1.0, &mut rng);
        let g = p.full_gradient(&x).unwrap();
        assert_matches_finite_differences(|z| p.eval(z), &g, &x);
    }
}

#[test]
fn logreg_component_gradients_match_their_closed_form_and_finite_differences() {
    let data = random_dataset(25, 6, 4);
    let p = make_logreg(data.clone()).unwrap();
    let mut rng = RngStream::new(4, 1);
    let x = random_point(6, 1.0, &mut rng);
    let mut g = vec![0.0; 6];
    for i in 0..data.len() {
        p.component_gradient(i, &x, &mut g);
        let a = data.rows[i].to_dense(6);
        let y = data.labels[i];
        let margin: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum();
        let coef = -y / (1.0 + (y * margin).exp());
        for j in 0..6 {
            let expected = coef * a[j];
            assert!((g[j] - expected).abs() <= 1e-14 * expected.abs().max(1.0));
        }
        assert_matches_finite_differences(|z| p.component_value(i, z), &g, &x);
    }
}

#[test]
fn logreg_value_at_origin_is_ln2() {
    let p = make_logreg(random_dataset(40, 5, 5)).unwrap();
    assert!((p.value(&[0.0; 5]).unwrap() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn logreg_balanced_identical_rows_cancel_at_origin() {
    let rows = vec![vec![0.3, -1.0, 2.0]; 2];
    let p = make_logreg(SparseDataset::from_dense(&rows, &[1.0, -1.0]).unwrap()).unwrap();
    assert_eq!(p.full_gradient(&[0.0; 3]).unwrap().as_slice(), &[0.0; 3]);
}

#[test]
fn logreg_smoothness_examples() {
    let identity = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
    assert!((make_logreg(identity).unwrap().smoothness() - 0.125).abs() < 1e-9);
    let single = SparseDataset::from_dense(&[vec![2.0, 0.0]], &[-1.0]).unwrap();
    assert!((make_logreg(single).unwrap().smoothness() - 1.0).abs() < 1e-9);
    // Orthogonal rows (2, 0, 0) and (0, 1, 1): A^T A has eigenvalues 4, 2, 0.
    let ortho = SparseDataset::from_dense(&[vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]], &[1.0, -1.0]).unwrap();
    assert!((make_logreg(ortho).unwrap().smoothness() - 4.0 / 8.0).abs() < 1e-9);
}

#[test]
fn logreg_smoothness_certificate() {
    let p = make_logreg(random_dataset(80, 12, 6)).unwrap();
    let l = p.smoothness();
    let mut rng = RngStream::new(6, 1);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let x = random_point(12, 2.0, &mut rng);
        let y = random_point(12, 2.0, &mut rng);
        let gx = p.full_gradient(&x).unwrap();
        let gy = p.full_gradient(&y).unwrap();
        let dg: Vec<f64> = gx.iter().zip(gy.iter()).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let ratio = norm(&dg) / (l * norm(&dx));
        worst = worst.max(ratio);
    }
    assert!(worst <= 1.0001, "||grad f(x) - grad f(y)|| / (L ||x - y||) reached {worst}");
}

#[test]
fn logreg_draw_is_a_component_gradient() {
    let data = random_dataset(30, 4, 7);
    let p = make_logreg(data.clone()).unwrap();
    let x = [0.3, -0.2, 1.0, 0.5];
    let components: Vec<Vec<f64>> = (0..data.len())
        .map(|i| {
            let mut g = vec![0.0; 4];
            p.component_gradient(i, &x, &mut g);
            g
        })
        .collect();
    let mut rng = RngStream::new(7, 0);
    for _ in 0..200 {
        let g = p.sample_gradient(&x, &mut rng).unwrap();
        assert!(components.iter().any(|c| c.as_slice() == g.as_slice()));
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let toy = make_toy(3, None).unwrap();
    assert!(toy.value(&[1.0, 2.0]).is_err());
    assert!(toy.full_gradient(&[1.0; 4]).is_err());
    let mut rng = RngStream::new(0, 0);
    assert!(toy.minibatch_gradient(&[1.0; 3], 0, &mut rng).is_err());
}

#[test]
fn gaussian_toy_draws_are_unbiased_with_bounded_variance() {
    const DRAWS: usize = 100_000;
    let n = 10;
    let toy = make_toy(n, Some(NoiseModel::new(NoiseFamily::Gaussian, n).unwrap())).unwrap();
    let sigma_sq = toy.variance_bound();
    assert_eq!(sigma_sq, n as f64);
    let x = vec![0.5; n];
    let mut rng = RngStream::new(8, 0);
    let mut sum = vec![0.0; n];
    let mut second = 0.0;
    for _ in 0..DRAWS {
        let g = toy.sample_gradient(&x, &mut rng).unwrap();
        for i in 0..n {
            let d = g[i] - x[i];
            sum[i] += d;
            second += d * d;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / DRAWS as f64).collect();
    // Per coordinate within 4 sigma_i / sqrt(draws) with sigma_i = 1.
    for m in &mean {
        assert!(m.abs() <= 4.0 / (DRAWS as f64).sqrt());
    }
    assert!(norm(&mean) <= 5.0 * (sigma_sq / DRAWS as f64).sqrt());
    let m2 = second / DRAWS as f64;
    assert!(m2 <= 1.1 * sigma_sq);
    assert!((m2 / sigma_sq - 1.0).abs() <= 0.15);
}

#[test]
fn heavy_tailed_toy_draws_add_the_noise_model_draw() {
    // The distributional checks of the noise itself live with the noise
    // module; here the oracle must add exactly one model draw per
    // coordinate, from the same stream, to the exact gradient.
    let n = 6;
    let x = [0.5, -1.0, 2.0, 0.0, 3.0, -0.25];
    for family in [NoiseFamily::weibull(), NoiseFamily::burr()] {
        let model = NoiseModel::new(family, n).unwrap();
        let toy = make_toy(n, Some(model.clone())).unwrap();
        let mut a = RngStream::new(9, 0);
        let mut b = RngStream::new(9, 0);
        for _ in 0..1000 {
            let g = toy.sample_gradient(&x, &mut a).unwrap();
            let xi = model.sample_noise(&mut b);
            for i in 0..n {
                assert_eq!(g[i], x[i] + xi[i]);
            }
        }
    }
}

#[test]
fn minibatch_variance_scales_inversely_with_batch() {
    const BATCHES: usize = 10_000;
    let n = 4;
    let toy = make_toy(n, Some(NoiseModel::new(NoiseFamily::Gaussian, n).unwrap())).unwrap();
    let x = vec![1.0; n];
    for m in [1usize, 4, 16] {
        let mut rng = RngStream::new(10, m as u64);
        let total: f64 = (0..BATCHES)
            .map(|_| {
                let g = toy.minibatch_gradient(&x, m, &mut rng).unwrap();
                g.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        let ratio = total / BATCHES as f64 / (n as f64 / m as f64);
        assert!((ratio - 1.0).abs() <= 0.1, "m = {m}: variance ratio {ratio}");
    }
}

#[test]
fn single_draw_minibatch_equals_sample() {
    let n = 5;
    let toy = make_toy(n, Some(NoiseModel::new(NoiseFamily::burr(), n).unwrap())).unwrap();
    let x = vec![0.1; n];
    let a = toy.minibatch_gradient(&x, 1, &mut RngStream::new(11, 0)).unwrap();
    let b = toy.sample_gradient(&x, &mut RngStream::new(11, 0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_streams_give_identical_draws() {
    let p = make_logreg(random_dataset(50, 5, 12)).unwrap();
    let x = [0.1; 5];
    let a = p.minibatch_gradient(&x, 7, &mut RngStream::new(12, 3)).unwrap();
    let b = p.minibatch_gradient(&x, 7, &mut RngStream::new(12, 3)).unwrap();
    assert_eq!(a, b);
}
