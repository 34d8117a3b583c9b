mod common;

use std::collections::BTreeSet;

use blindsr::cluster::{build_user_estimates, kmeans_angles, KMeansFit};
use blindsr::scene::restrict_rows;
use common::{geo, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Angles around `centers`, uniform within `spread`, with their generating labels.
fn sample_clusters(seed: u64, centers: &[f64], spread: f64, per: usize) -> (Vec<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let mut pts: Vec<(f64, usize)> = centers
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| (0..per).map(move |_| (c, k)).collect::<Vec<_>>())
        .map(|(c, k)| (c + r.random_range(-spread..=spread), k))
        .collect();
    pts.shuffle(&mut r);
    pts.into_iter().unzip()
}

fn partition(labels: &[usize]) -> BTreeSet<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect()
}

#[test]
fn recovers_generating_partition_of_sixty_angles() {
    let (angles, truth) = sample_clusters(1, &[0.8, 1.4, 2.0], 0.05, 20);
    let fit = kmeans_angles(&angles, 3, 50, &mut rng(2)).unwrap();
    assert_eq!(partition(&fit.labels), partition(&truth));
}

#[test]
fn well_separated_clusters_always_recovered() {
    for seed in 0..50 {
        let mut r = rng(1000 + seed);
        let k = r.random_range(2..=5);
        let spread = 0.02;
        let centers: Vec<f64> = (0..k).map(|i| 0.5 + i as f64 * 0.45 + r.random_range(0.0..0.2)).collect();
        let per = r.random_range(1..=4);
        let (angles, truth) = sample_clusters(seed, &centers, spread, per);
        let fit = kmeans_angles(&angles, k, 50, &mut rng(seed)).unwrap();
        assert_eq!(partition(&fit.labels), partition(&truth), "seed {seed}");
    }
}

#[test]
fn columns_are_independently_computed_steering_vectors() {
    let g = geo(20);
    let omega = vec![0, 3, 4, 9, 11, 15, 19];
    for seed in 0..10 {
        let (angles, _) = sample_clusters(seed, &[0.9, 1.7, 2.3], 0.1, 3);
        let fit = kmeans_angles(&angles, 3, 10, &mut rng(seed)).unwrap();
        let res = build_user_estimates(&fit, &angles, &omega, &g).unwrap();
        for (members, a) in res.members.iter().zip(&res.steering) {
            assert_eq!(a.ncols(), members.len());
            for (l, &theta) in members.iter().enumerate() {
                let col = g.steering_vector(theta).unwrap();
                let expect = restrict_rows(&blindsr::linalg::CMat::from_column_slice(20, 1, col.as_slice()), &omega);
                for i in 0..omega.len() {
                    assert_eq!(a[(i, l)], expect[(i, 0)]);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn every_angle_lands_in_exactly_one_nonempty_cluster(
        angles in prop::collection::vec(0.1..3.0f64, 1..30),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        prop_assume!(angles.len() >= k);
        let fit = kmeans_angles(&angles, k, 5, &mut rng(seed)).unwrap();
        prop_assert_eq!(fit.labels.len(), angles.len());
        let res = build_user_estimates(&fit, &angles, &[0, 1, 2], &geo(4));
        if let Ok(res) = res {
            let total: usize = res.members.iter().map(Vec::len).sum();
            prop_assert_eq!(total, angles.len());
            prop_assert!(res.members.iter().all(|m| !m.is_empty() && m.windows(2).all(|w| w[0] <= w[1])));
        }
    }

    #[test]
    fn relabeling_keeps_the_partition(
        angles in prop::collection::vec(0.1..3.0f64, 3..20),
        seed in any::<u64>(),
    ) {
        let fit = kmeans_angles(&angles, 3, 5, &mut rng(seed)).unwrap();
        let perm = [2usize, 0, 1];
        let relabeled = KMeansFit {
            labels: fit.labels.iter().map(|&l| perm[l]).collect(),
            centers: vec![fit.centers[1], fit.centers[2], fit.centers[0]],
            inertia: fit.inertia,
        };
        let members = |f: &KMeansFit| -> BTreeSet<Vec<u64>> {
            (0..3)
                .map(|c| {
                    let mut m: Vec<u64> = angles
                        .iter()
                        .zip(&f.labels)
                        .filter(|(_, &l)| l == c)
                        .map(|(a, _)| a.to_bits())
                        .collect();
                    m.sort_unstable();
                    m
                })
                .collect()
        };
        prop_assert_eq!(members(&fit), members(&relabeled));
    }
}
