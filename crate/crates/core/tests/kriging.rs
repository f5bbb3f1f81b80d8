mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{corr, dense, dense_predict};
use smbne_core::kriging::{concentrated_log_likelihood, expected_improvement, normal_cdf};
use smbne_core::{KrigingModel, Phenotype, ThetaBounds};

fn random_phenos<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Vec<Phenotype> {
    (0..n)
        .map(|_| Phenotype((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

#[test]
fn prediction_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..200 {
        let n = 2 + trial % 7;
        let dim = 1 + trial % 5;
        let phenos = random_phenos(n, dim, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m = KrigingModel::fit(&phenos, &y, ThetaBounds::default()).unwrap();
        let d = dense(&phenos, &y, m.theta(), m.nugget());
        assert!((m.mu_hat() - d.mu).abs() <= 1e-8 * (1.0 + d.mu.abs()));
        assert!((m.sigma2_hat() - d.sigma2).abs() <= 1e-8 * (1.0 + d.sigma2));
        for q in random_phenos(5, dim, &mut rng) {
            let got = m.predict(&q).unwrap();
            let (mean, var) = dense_predict(&d, &phenos, &q, m.theta());
            assert!((got.mean - mean).abs() <= 1e-8, "trial {trial}: {} vs {mean}", got.mean);
            assert!((got.variance - var).abs() <= 1e-8, "trial {trial}: {} vs {var}", got.variance);
        }
    }
}

#[test]
fn likelihood_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..200 {
        let n = 2 + trial % 7;
        let phenos = random_phenos(n, 3, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let theta = 10f64.powf(rng.random_range(-1.0..1.5));
        let got = concentrated_log_likelihood(&phenos, &y, theta, 1e-8).unwrap();
        let want = dense(&phenos, &y, theta, 1e-8).log_likelihood;
        assert!((got - want).abs() <= 1e-6, "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn two_point_closed_form() {
    let phenos = vec![Phenotype(vec![0.0, 0.0]), Phenotype(vec![0.3, -0.2])];
    let y = [1.0, 3.0];
    let theta = 2.0;
    let m = KrigingModel::fit_with_theta(&phenos, &y, theta).unwrap();
    let rho = (-theta * 0.5f64).exp();
    // Symmetric 2x2 system: the GLS mean is the plain average.
    assert!((m.mu_hat() - 2.0).abs() < 1e-12);
    let a = 1.0 + m.nugget();
    let sigma2 = 1.0 / (a - rho);
    assert!((m.sigma2_hat() - sigma2).abs() < 1e-12);
}

#[test]
fn interpolates_training_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let phenos = random_phenos(15, 6, &mut rng);
        let y: Vec<f64> = phenos.iter().map(|p| p.0.iter().sum::<f64>().sin()).collect();
        let m = KrigingModel::fit(&phenos, &y, ThetaBounds::default()).unwrap();
        assert_eq!(m.nugget(), 1e-8);
        for (p, &yi) in phenos.iter().zip(&y) {
            let pred = m.predict(p).unwrap();
            assert!((pred.mean - yi).abs() <= 1e-4, "{} vs {yi}", pred.mean);
            assert!(pred.variance <= 1e-6);
        }
    }
}

#[test]
fn variance_and_ei_are_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let phenos = random_phenos(20, 4, &mut rng);
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..10.0)).collect();
        let m = KrigingModel::fit(&phenos, &y, ThetaBounds::default()).unwrap();
        let y_best = y.iter().copied().fold(f64::INFINITY, f64::min);
        let mut probes = random_phenos(50, 4, &mut rng);
        probes.extend(phenos.iter().cloned());
        for q in &probes {
            assert!(m.predict(q).unwrap().variance >= 0.0);
            assert!(m.expected_improvement(q, y_best).unwrap() >= 0.0);
        }
    }
}

#[test]
fn far_points_revert_to_the_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phenos = random_phenos(10, 3, &mut rng);
    let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let m = KrigingModel::fit(&phenos, &y, ThetaBounds::default()).unwrap();
    let far = m.predict(&Phenotype(vec![1e6; 3])).unwrap();
    assert!((far.mean - m.mu_hat()).abs() < 1e-9);
    assert!((far.variance - m.sigma2_hat()).abs() < 1e-9);
}

#[test]
fn constant_fitness_gives_constant_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let phenos = random_phenos(8, 3, &mut rng);
    let m = KrigingModel::fit(&phenos, &[4.2; 8], ThetaBounds::default()).unwrap();
    assert!(m.sigma2_hat().abs() < 1e-12);
    for q in random_phenos(10, 3, &mut rng) {
        let p = m.predict(&q).unwrap();
        assert!((p.mean - 4.2).abs() < 1e-9);
        assert!(p.variance.abs() < 1e-12);
    }
}

#[test]
fn likelihood_prefers_the_generating_theta() {
    let theta_star: f64 = 0.5;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        // A wide domain keeps theta identifiable apart from the variance.
        let phenos: Vec<Phenotype> = (0..100)
            .map(|_| Phenotype(vec![rng.random_range(0.0..200.0)]))
            .collect();
        let r = corr(&phenos, theta_star, 1e-10);
        let l = r.cholesky().unwrap().l();
        // Standard normals by Box-Muller.
        let z = DVector::from_fn(100, |_, _| {
            let (u1, u2): (f64, f64) = (rng.random_range(1e-12..1.0), rng.random());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let y: Vec<f64> = (l * z).iter().map(|v| v + 3.0).collect();
        let at = concentrated_log_likelihood(&phenos, &y, theta_star, 1e-8).unwrap();
        let off = concentrated_log_likelihood(&phenos, &y, 10.0 * theta_star, 1e-8).unwrap();
        assert!(at >= off, "seed {seed}: {at} < {off}");
        let m = KrigingModel::fit(&phenos, &y, ThetaBounds::default()).unwrap();
        let fitted = concentrated_log_likelihood(&phenos, &y, m.theta(), 1e-8).unwrap();
        assert!(fitted >= at - 1e-9);
    }
}

#[test]
fn fit_rejects_bad_training_data() {
    let p = vec![Phenotype(vec![0.0]), Phenotype(vec![1.0])];
    assert!(KrigingModel::fit(&p[..1], &[1.0], ThetaBounds::default()).is_err());
    assert!(KrigingModel::fit(&p, &[1.0], ThetaBounds::default()).is_err());
    assert!(KrigingModel::fit(&p, &[1.0, f64::NAN], ThetaBounds::default()).is_err());
    let ragged = vec![Phenotype(vec![0.0]), Phenotype(vec![1.0, 2.0])];
    assert!(KrigingModel::fit(&ragged, &[1.0, 2.0], ThetaBounds::default()).is_err());
    let m = KrigingModel::fit(&p, &[1.0, 2.0], ThetaBounds::default()).unwrap();
    assert!(m.predict(&Phenotype(vec![0.0, 0.0])).is_err());
    assert!(KrigingModel::fit_with_theta(&p, &[1.0, 2.0], 0.0).is_err());
}

#[test]
fn ei_reference_values() {
    assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
    assert!((expected_improvement(0.0, 1.0, 0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-10);
    assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    // EI tends to the improvement when sd vanishes.
    assert!((expected_improvement(0.0, 1e-9, 1.0) - 1.0).abs() < 1e-12);
    assert!(expected_improvement(2.0, 1e-9, 1.0) < 1e-12);
}

#[test]
fn ei_increases_with_uncertainty() {
    for &mean in &[-2.0, 0.0, 0.5, 1.0, 2.5] {
        let mut last = 0.0;
        for k in 1..=400 {
            let sd = k as f64 * 0.01;
            if mean >= 1.0 + 3.0 * sd {
                continue;
            }
            let ei = expected_improvement(mean, sd, 1.0);
            assert!(ei >= last, "mean {mean} sd {sd}");
            last = ei;
        }
    }
}

proptest! {
    #[test]
    fn ei_is_nonnegative(mean in -1e3f64..1e3, sd in 0.0f64..1e3, best in -1e3f64..1e3) {
        prop_assert!(expected_improvement(mean, sd, best) >= 0.0);
    }
}

