use kernclust::diagnostics::{
    check_sufficient, partition_agreement, separation_stats, SeparationReport,
};
use kernclust::kernel::{kernel_matrix, mmd_point_to_cluster, mmd_pointwise, BandwidthSplit};
use kernclust::mixtures::{Component, MixingMeasure};
use kernclust::Partition;
use proptest::prelude::*;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Partition> {
    prop::collection::vec(0..k, n).prop_map(move |l| Partition::new(l, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agreement_is_symmetric_and_detects_relabeling(a in labels(12, 3), b in labels(12, 3), perm in Just([2usize, 0, 1])) {
        let ab = partition_agreement(&a, &b).unwrap();
        prop_assert_eq!(ab, partition_agreement(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a.same_up_to_relabeling(&b));
        let relabeled = Partition::new(a.labels().iter().map(|&l| perm[l]).collect(), 3).unwrap();
        prop_assert_eq!(partition_agreement(&a, &relabeled).unwrap(), 1.0);
    }

    #[test]
    fn point_to_mean_within_cluster_diameter(
        xs in prop::collection::vec(-2.0f64..2.0, 12),
        p in labels(12, 3),
        beta in 0.1f64..1.0,
    ) {
        let x = ndarray::Array2::from_shape_vec((12, 1), xs).unwrap();
        let bw = BandwidthSplit::new(beta, 1.0, 1).unwrap();
        let g = kernel_matrix(x.view(), bw.eta()).unwrap();
        for c in p.clusters().iter().filter(|c| !c.is_empty()) {
            for &i in c {
                let to_mean = mmd_point_to_cluster(i, c, &g, &bw).unwrap();
                let widest = c.iter().map(|&j| mmd_pointwise(i, j, &g, &bw).unwrap()).fold(0.0, f64::max);
                prop_assert!(to_mean <= widest + 1e-10);
            }
        }
    }

    #[test]
    fn sufficiency_is_monotone(pair in 0.0f64..3.0, radius in 0.0f64..1.0, up in 0.0f64..1.0, down in 0.0f64..1.0, eps in 0.001f64..0.1) {
        let base = SeparationReport { min_pair_mmd: pair, max_radius: radius, max_diameter: 2.0 * radius, ratio: pair / radius, epsilon_margin: 0.0 };
        let better = SeparationReport { min_pair_mmd: pair + up, max_radius: radius * (1.0 - down), ..base };
        if check_sufficient(&base, eps) {
            prop_assert!(check_sufficient(&better, eps));
        }
    }
}

#[test]
fn report_fields_are_nonnegative() {
    let lam = MixingMeasure::new(
        vec![0.3, 0.7],
        vec![
            Component::gaussian(vec![0.0], 0.5).unwrap(),
            Component::uniform(1.0, 2.0).unwrap(),
        ],
    )
    .unwrap();
    let bw = BandwidthSplit::new(0.3, 1.0, 1).unwrap();
    for seed in 0..10 {
        let s = lam.sample_labeled(60, seed).unwrap();
        let r = separation_stats(&s, &lam, &bw).unwrap();
        for v in [
            r.min_pair_mmd,
            r.max_radius,
            r.max_diameter,
            r.ratio,
            r.epsilon_margin,
        ] {
            assert!(v >= 0.0);
        }
    }
}
