use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smbne_core::harness::{conover_posthoc, kruskal_wallis};

/// Midrank by counting: values below plus half the ties.
fn count_rank(pooled: &[f64], x: f64) -> f64 {
    let below = pooled.iter().filter(|&&v| v < x).count() as f64;
    let equal = pooled.iter().filter(|&&v| v == x).count() as f64;
    below + (equal + 1.0) / 2.0
}

struct Oracle {
    h: f64,
    p: f64,
    posthoc: Vec<Vec<f64>>,
}

/// Upper tail of chi-square with an even number of degrees of freedom.
fn chi2_sf_even(x: f64, df: usize) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..df / 2 {
        term *= half / i as f64;
        sum += term;
    }
    (-half).exp() * sum
}

/// Two-sided Student t tail by Simpson's rule after substituting x = tan u.
fn t_two_sided(t: f64, nu: f64) -> f64 {
    let f = |u: f64| {
        let c = u.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let x = u.tan();
        (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0) / (c * c)
    };
    let simpson = |a: f64, b: f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let tail = simpson(t.atan(), half_pi);
    let total = simpson(0.0, half_pi);
    tail / total
}

fn oracle(groups: &[Vec<f64>]) -> Oracle {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let k = groups.len();
    let ranks: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.iter().map(|&x| count_rank(&pooled, x)).collect())
        .collect();
    let mut ties = 0.0;
    let mut seen: Vec<f64> = Vec::new();
    for &x in &pooled {
        if !seen.contains(&x) {
            seen.push(x);
            let t = pooled.iter().filter(|&&v| v == x).count() as f64;
            ties += t * t * t - t;
        }
    }
    let mut h = 0.0;
    for r in &ranks {
        let sum: f64 = r.iter().sum();
        h += sum * sum / r.len() as f64;
    }
    h = (12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0)) / (1.0 - ties / (n * n * n - n));
    let p = chi2_sf_even(h, k - 1);

    let all: Vec<f64> = ranks.iter().flatten().copied().collect();
    let s2 = (all.iter().map(|r| r * r).sum::<f64>() - n * (n + 1.0) * (n + 1.0) / 4.0) / (n - 1.0);
    let mut posthoc = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let mi = ranks[i].iter().sum::<f64>() / ranks[i].len() as f64;
            let mj = ranks[j].iter().sum::<f64>() / ranks[j].len() as f64;
            let se = (s2 * (n - 1.0 - h) / (n - k as f64)
                * (1.0 / ranks[i].len() as f64 + 1.0 / ranks[j].len() as f64))
                .sqrt();
            posthoc[i][j] = t_two_sided((mi - mj).abs() / se, n - k as f64);
        }
    }
    Oracle { h, p, posthoc }
}

fn random_groups<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|g| {
            let size = rng.random_range(2..=12);
            // Small integer range so ties are common.
            (0..size)
                .map(|_| (rng.random_range(0..15) + g) as f64)
                .collect()
        })
        .collect()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    while checked < 300 {
        let k = if checked % 2 == 0 { 3 } else { 5 };
        let groups = random_groups(&mut rng, k);
        let want = oracle(&groups);
        if !want.h.is_finite() {
            continue;
        }
        let kw = kruskal_wallis(&groups).unwrap();
        assert!((kw.h - want.h).abs() < 1e-9, "{} vs {}", kw.h, want.h);
        assert!((kw.p - want.p).abs() < 1e-9, "{} vs {}", kw.p, want.p);
        assert_eq!(kw.df, k - 1);
        let p = conover_posthoc(&groups).unwrap();
        for i in 0..k {
            for j in 0..k {
                assert!(
                    (p[i][j] - want.posthoc[i][j]).abs() < 1e-9,
                    "({i},{j}): {} vs {}",
                    p[i][j],
                    want.posthoc[i][j]
                );
            }
        }
        checked += 1;
    }
}

#[test]
fn separated_groups_differ_everywhere() {
    let groups: Vec<Vec<f64>> = [1.0, 101.0, 201.0]
        .iter()
        .map(|&s| (0..10).map(|i| s + i as f64).collect())
        .collect();
    assert!(kruskal_wallis(&groups).unwrap().p < 0.01);
    let p = conover_posthoc(&groups).unwrap();
    for (i, row) in p.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if i != j {
                assert!(pij < 0.01, "({i},{j}) = {pij}");
            }
        }
    }
}

proptest! {
    #[test]
    fn invariant_under_shift_and_scale(seed in any::<u64>(), shift in -1e3f64..1e3, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = random_groups(&mut rng, 3);
        let moved: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| g.iter().map(|x| x * scale + shift).collect())
            .collect();
        let a = kruskal_wallis(&groups).unwrap();
        let b = kruskal_wallis(&moved).unwrap();
        prop_assert!((a.h - b.h).abs() < 1e-9);
        let pa = conover_posthoc(&groups).unwrap();
        let pb = conover_posthoc(&moved).unwrap();
        for (ra, rb) in pa.iter().zip(&pb) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn posthoc_is_symmetric_and_follows_group_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = random_groups(&mut rng, 4);
        let p = conover_posthoc(&groups).unwrap();
        let reversed: Vec<Vec<f64>> = groups.iter().rev().cloned().collect();
        let q = conover_posthoc(&reversed).unwrap();
        for i in 0..4 {
            prop_assert_eq!(p[i][i], 1.0);
            for j in 0..4 {
                prop_assert_eq!(p[i][j], p[j][i]);
                prop_assert!((p[i][j] - q[3 - i][3 - j]).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&p[i][j]));
            }
        }
        let kw = kruskal_wallis(&groups).unwrap();
        prop_assert!((kw.h - kruskal_wallis(&reversed).unwrap().h).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&kw.p));
    }
}
