mod common;

use kernclust::clustering::{
    ffk, ffk_all_first_centers, kcenter, kernel_kmeans, kernel_kmeans_exact, kmeans_objective,
    linkage, linkage_tree, lloyd, objective_for, FarthestRule, KcenterMode, Linkage,
};
use kernclust::kernel::{kernel_matrix, BandwidthSplit};
use kernclust::Partition;
use ndarray::Array2;
use proptest::prelude::*;

fn dataset(min_n: usize, max_n: usize) -> impl Strategy<Value = (Array2<f64>, f64)> {
    (1usize..=3, min_n..=max_n).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(-4.0f64..4.0, n * d)
                .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap()),
            0.1f64..1.0,
        )
    })
}

fn setup(x: &Array2<f64>, beta: f64) -> (kernclust::KernelMatrix, BandwidthSplit) {
    let bw = BandwidthSplit::new(beta, 1.0, x.ncols()).unwrap();
    (kernel_matrix(x.view(), bw.eta()).unwrap(), bw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gram_objective_equals_rkhs_expansion((x, beta) in dataset(2, 16), k in 1usize..4, seed in 0u64..1000) {
        let (g, bw) = setup(&x, beta);
        let k = k.min(x.nrows());
        let labels = common::random_labels(&mut common::rng(seed), x.nrows(), k);
        let inner = common::embedding_gram(&x, beta, 1.0);
        let got = kmeans_objective(&g, &Partition::new(labels.clone(), k).unwrap(), &bw).unwrap();
        prop_assert!((got - common::rkhs_kmeans_objective(&inner, &labels, k)).abs() <= 1e-10);
    }

    #[test]
    fn reported_objectives_are_reproducible((x, beta) in dataset(3, 14), seed in 0u64..100) {
        let (g, bw) = setup(&x, beta);
        let k = 2;
        let runs = vec![
            kernel_kmeans(&g, k, &bw, 3, seed).unwrap(),
            ffk(&g, k, &bw, seed as usize % x.nrows()).unwrap(),
            kcenter(&g, k, &bw, KcenterMode::Heuristic, seed).unwrap(),
            linkage(&g, k, &bw, Linkage::Single).unwrap(),
            linkage(&g, k, &bw, Linkage::Complete).unwrap(),
            linkage(&g, k, &bw, Linkage::Average).unwrap(),
        ];
        for r in runs {
            let again = objective_for(&g, &r.partition, &bw, r.algorithm).unwrap();
            prop_assert!((again - r.objective).abs() <= 1e-10, "{}: {} vs {}", r.algorithm, again, r.objective);
        }
    }

    #[test]
    fn exact_solvers_match_brute_force((x, beta) in dataset(3, 8), k in 2usize..=3) {
        let (g, bw) = setup(&x, beta);
        let n = x.nrows();
        let k = k.min(n);
        let inner = common::embedding_gram(&x, beta, 1.0);
        let parts = common::all_partitions(n, k);
        let km = kernel_kmeans_exact(&g, k, &bw).unwrap();
        let best_km = parts.iter().map(|l| common::rkhs_kmeans_objective(&inner, l, k)).fold(f64::INFINITY, f64::min);
        prop_assert!((km.objective - best_km).abs() <= 1e-10);
        let kc = kcenter(&g, k, &bw, KcenterMode::Exact, 0).unwrap();
        let best_kc = parts.iter().map(|l| common::rkhs_kcenter_objective(&inner, l, k)).fold(f64::INFINITY, f64::min);
        prop_assert!((kc.objective - best_kc).abs() <= 1e-10);
    }

    #[test]
    fn permuting_points_permutes_the_partition((x, beta) in dataset(4, 20), shift in 1usize..19) {
        // Shrink into a range where the kernel does not saturate and require
        // distinct pairwise distances, so no merge or assignment is a tie.
        let x = x.mapv(|v| v * 0.35);
        let n = x.nrows();
        let mut d2: Vec<f64> = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        d2.sort_by(f64::total_cmp);
        prop_assume!(d2[0] > 1e-6 && d2.windows(2).all(|w| w[1] - w[0] > 1e-9));
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        prop_assume!({
            let mut s = perm.clone();
            s.sort();
            s == (0..n).collect::<Vec<_>>()
        });
        let y = Array2::from_shape_fn(x.dim(), |(i, j)| x[[perm[i], j]]);
        let (gx, bw) = setup(&x, beta);
        let (gy, _) = setup(&y, beta);
        for mode in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let px = linkage(&gx, 2, &bw, mode).unwrap().partition;
            let py = linkage(&gy, 2, &bw, mode).unwrap().partition;
            let back: Vec<usize> = (0..n).map(|i| py.label(perm.iter().position(|&p| p == i).unwrap())).collect();
            prop_assert!(common::same_partition(px.labels(), &back), "{:?}", mode);
        }
        let ex = kernel_kmeans_exact(&gx, 2, &bw);
        if let Ok(ex) = ex {
            let ey = kernel_kmeans_exact(&gy, 2, &bw).unwrap();
            let back: Vec<usize> = (0..n).map(|i| ey.partition.label(perm.iter().position(|&p| p == i).unwrap())).collect();
            prop_assert!(common::same_partition(ex.partition.labels(), &back));
        }
    }

    #[test]
    fn lloyd_never_increases_the_objective((x, beta) in dataset(3, 30), seed in 0u64..1000) {
        let (g, bw) = setup(&x, beta);
        let k = 3.min(x.nrows());
        let init = Partition::new(common::random_labels(&mut common::rng(seed), x.nrows(), k), k).unwrap();
        let (fit, _) = lloyd(&g, &init).unwrap();
        prop_assert!(kmeans_objective(&g, &fit, &bw).unwrap() <= kmeans_objective(&g, &init, &bw).unwrap() + 1e-12);
    }

    #[test]
    fn merge_heights_are_monotone((x, beta) in dataset(3, 25)) {
        let (g, bw) = setup(&x, beta);
        for mode in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let tree = linkage_tree(&g, 1, &bw, mode).unwrap();
            prop_assert_eq!(tree.merges.len(), x.nrows() - 1);
            for w in tree.merges.windows(2) {
                prop_assert!(w[1].height >= w[0].height - 1e-12);
            }
        }
    }

    #[test]
    fn first_center_sweep_matches_single_runs((x, beta) in dataset(3, 12)) {
        let (g, bw) = setup(&x, beta);
        let all = ffk_all_first_centers(&g, 2, &bw, FarthestRule::MinDistance).unwrap();
        for (first, p) in all.iter().enumerate() {
            prop_assert_eq!(p, &ffk(&g, 2, &bw, first).unwrap().partition);
        }
    }
}
