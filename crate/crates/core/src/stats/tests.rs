use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mann_whitney_basic_cases() {
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!(r.statistic, 0.0);
    let r = mann_whitney_u(&[1.0, 2.0, 2.0, 7.0], &[7.0, 2.0, 1.0, 2.0]).unwrap();
    assert_eq!(r.statistic, 8.0);
    assert_eq!(r.p_two_sided, 1.0);
    let r = mann_whitney_u(&[3.0, 3.0], &[3.0, 3.0, 3.0]).unwrap();
    assert_eq!((r.statistic, r.p_two_sided), (3.0, 1.0));
    assert!(mann_whitney_u(&[], &[1.0]).is_err());
}

#[test]
fn mann_whitney_hand_values() {
    // U = 3, mean 4.5, variance 9·7/12, z = (1.5 − 0.5)/√5.25.
    let r = mann_whitney_u(&[1.0, 3.0, 5.0], &[2.0, 4.0, 6.0]).unwrap();
    assert_eq!(r.statistic, 3.0);
    let z = 1.0 / 5.25f64.sqrt();
    assert!((r.z.unwrap() + z).abs() < 1e-12);
    assert!((r.p_two_sided - 0.662_521).abs() < 1e-5);
    // Enumeration: 14 of the 20 splits are at least as far from the mean.
    let e = mann_whitney_exact(&[1.0, 3.0, 5.0], &[2.0, 4.0, 6.0]).unwrap();
    assert!((e.p_two_sided - 0.7).abs() < 1e-12);
    let e = mann_whitney_exact(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert!((e.p_two_sided - 0.1).abs() < 1e-12);
}

#[test]
fn approximation_converges_to_exact_for_larger_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let a: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..9).map(|_| rng.gen_range(0.3..1.3)).collect();
        let approx = mann_whitney_u(&a, &b).unwrap().p_two_sided;
        let exact = mann_whitney_exact(&a, &b).unwrap().p_two_sided;
        assert!((approx - exact).abs() < 0.02, "{approx} vs {exact}");
    }
}

proptest! {
    #[test]
    fn mann_whitney_invariant_under_monotone_maps(
        a in prop::collection::vec(-5.0f64..5.0, 1..10),
        b in prop::collection::vec(-5.0f64..5.0, 1..10),
    ) {
        let f = |x: &f64| x.exp() * 3.0 + 1.0;
        let r1 = mann_whitney_u(&a, &b).unwrap();
        let r2 = mann_whitney_u(&a.iter().map(f).collect::<Vec<_>>(), &b.iter().map(f).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(r1.statistic, r2.statistic);
        prop_assert!(r1.statistic >= 0.0 && r1.statistic <= (a.len() * b.len()) as f64);
        prop_assert!((0.0..=1.0).contains(&r1.p_two_sided));
    }

    #[test]
    fn ks_invariant_under_increasing_maps(
        a in prop::collection::vec(-5.0f64..5.0, 1..12),
        b in prop::collection::vec(-5.0f64..5.0, 1..12),
    ) {
        let f = |x: &f64| x * x * x + x;
        let d1 = ks_two_sample(&a, &b).unwrap();
        let d2 = ks_two_sample(&a.iter().map(f).collect::<Vec<_>>(), &b.iter().map(f).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(d1.statistic, d2.statistic);
        prop_assert!((0.0..=1.0).contains(&d1.p_two_sided));
    }
}

#[test]
fn ks_hand_cases() {
    assert_eq!(
        ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().statistic,
        0.0
    );
    assert_eq!(ks_two_sample(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap().statistic, 1.0);
    assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.5, 2.5]).unwrap().statistic, 0.5);
    // Gaps at 1, 2, 3, 4: 1/6, 1/6, 1/2, 0.
    assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 4.0]).unwrap().statistic, 0.5);
    assert_eq!(ks_two_sample(&[1.0, 1.0], &[1.0]).unwrap().p_two_sided, 1.0);
}

#[test]
fn kolmogorov_survival_known_values() {
    assert!((kolmogorov_survival(1.0) - 0.269_999_7).abs() < 1e-6);
    assert!((kolmogorov_survival(1.36) - 0.049_4).abs() < 1e-3);
    assert!((kolmogorov_survival(0.5) - 0.963_945).abs() < 1e-5);
    // The two series agree where they hand over.
    let lo = kolmogorov_survival(1.18 - 1e-12);
    let hi = kolmogorov_survival(1.18);
    assert!((lo - hi).abs() < 1e-9);
}

#[test]
fn ols_noiseless_and_constant() {
    let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let f = ols_fit(&x, &y).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    assert!(f.slope_ci_95.1 - f.slope_ci_95.0 < 1e-9);
    let f = ols_fit(&x, &[0.3; 10]).unwrap();
    assert_eq!(f.slope, 0.0);
    assert!(f.slope_ci_contains_zero());
    assert!(matches!(
        ols_fit(&[1.0; 5], &x[..5]),
        Err(crate::Error::DegenerateDistribution(_))
    ));
    assert!(ols_fit(&x[..2], &y[..2]).is_err());
}

#[test]
fn ols_noisy_slope_and_residual_orthogonality() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
    let x: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..10.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.sample(normal)).collect();
    let f = ols_fit(&x, &y).unwrap();
    assert!((0.45..=0.55).contains(&f.slope));
    assert!(f.slope_ci_95.0 <= f.slope && f.slope <= f.slope_ci_95.1);
    let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - f.intercept - f.slope * a).collect();
    let scale: f64 = y.iter().map(|v| v.abs()).sum();
    assert!(resid.iter().sum::<f64>().abs() < 1e-8 * scale);
    assert!(resid.iter().zip(&x).map(|(r, a)| r * a).sum::<f64>().abs() < 1e-8 * scale * 10.0);
}

#[test]
fn pool_attention_averages_steps() {
    let traces = vec![vec![vec![0.5, 0.5], vec![1.0, 0.0]], vec![vec![0.2, 0.3, 0.5]]];
    let (x, y) = pool_attention(&traces);
    assert_eq!(x, vec![0.0, 1.0, 0.0, 1.0, 2.0]);
    assert_eq!(y, vec![0.75, 0.25, 0.2, 0.3, 0.5]);
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn clustering_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_vectors(&mut rng, 10, 4);
    for linkage in [Linkage::Max, Linkage::Average] {
        let c = agglomerative_cluster(&v, linkage, 0.0).unwrap();
        assert_eq!(c.n_clusters, 10);
        assert_eq!(c.assignments, (0..10).collect::<Vec<_>>());
        let c = agglomerative_cluster(&v, linkage, 2.0).unwrap();
        assert_eq!(c.n_clusters, 1);
        assert!(c.assignments.iter().all(|&a| a == 0));
        assert_eq!(c.dendrogram.merges.len(), 9);
    }
    assert!(agglomerative_cluster(&[vec![1.0], vec![1.0, 2.0]], Linkage::Max, 0.5).is_err());
}

#[test]
fn merge_distances_are_monotone_and_average_below_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_vectors(&mut rng, 25, 5);
    for linkage in [Linkage::Max, Linkage::Average] {
        let d = dendrogram(&v, linkage).unwrap();
        assert!(d.merges.windows(2).all(|w| w[0].distance <= w[1].distance + 1e-12));
        let curve = d.curve(&threshold_grid(2.0, 50));
        assert!(curve.windows(2).all(|w| w[0].1 >= w[1].1));
    }
    // Replay average-linkage merges and compare with the complete-linkage
    // distance of the same cluster pair.
    let d = dendrogram(&v, Linkage::Average).unwrap();
    let mut members: Vec<Vec<usize>> = (0..v.len()).map(|i| vec![i]).collect();
    for m in &d.merges {
        let max = members[m.a]
            .iter()
            .flat_map(|&i| members[m.b].iter().map(move |&j| (i, j)))
            .map(|(i, j)| cosine_distance(&v[i], &v[j]))
            .fold(0.0, f64::max);
        assert!(m.distance <= max + 1e-12);
        let moved = std::mem::take(&mut members[m.b]);
        members[m.a].extend(moved);
    }
}

#[test]
fn linkage_names() {
    assert_eq!("complete".parse::<Linkage>().unwrap(), Linkage::Max);
    assert_eq!("average".parse::<Linkage>().unwrap(), Linkage::Average);
    assert!("ward".parse::<Linkage>().is_err());
}

#[test]
fn uniform_attention_has_no_position_trend() {
    let traces: Vec<Vec<Vec<f64>>> = (0..20).map(|_| vec![vec![0.125; 8]; 5]).collect();
    let (x, y) = pool_attention(&traces);
    let f = ols_fit(&x, &y).unwrap();
    assert_eq!(f.slope, 0.0);
    assert!(f.slope_ci_contains_zero());
}
