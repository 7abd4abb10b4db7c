use kernclust::estimation::{
    bayes_reassign, estimate_mixing_measure, kernel_sums, wasserstein, weighted_kde,
};
use kernclust::mixtures::{Component, MixingMeasure};
use kernclust::Partition;
use ndarray::Array2;
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = MixingMeasure> {
    prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0, 0.05f64..1.0), 1..=3).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let weights: Vec<f64> = parts.iter().map(|p| p.2 / total).collect();
        let weights = {
            // Make the weights sum to one exactly.
            let mut w = weights;
            let head: f64 = w[..w.len() - 1].iter().sum();
            *w.last_mut().unwrap() = 1.0 - head;
            w
        };
        let comps = parts
            .iter()
            .map(|p| Component::gaussian(vec![p.0], p.1).unwrap())
            .collect();
        MixingMeasure::new(weights, comps).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wasserstein_is_a_metric(a in measure(), b in measure(), c in measure()) {
        let ab = wasserstein(&a, &b, 1.0).unwrap();
        let bc = wasserstein(&b, &c, 1.0).unwrap();
        let ac = wasserstein(&a, &c, 1.0).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, wasserstein(&b, &a, 1.0).unwrap());
        prop_assert!(wasserstein(&a, &a, 1.0).unwrap() <= 1e-7);
        prop_assert!(ac <= ab + bc + 1e-8);
    }

    #[test]
    fn reassignment_formulations_agree(
        xs in prop::collection::vec(-3.0f64..3.0, 10),
        l in prop::collection::vec(0usize..2, 10),
        q in -4.0f64..4.0,
        beta in 0.2f64..1.0,
    ) {
        prop_assume!(l.contains(&0) && l.contains(&1));
        let x = Array2::from_shape_vec((10, 1), xs).unwrap();
        let est = estimate_mixing_measure(x.view(), &Partition::new(l, 2).unwrap(), beta).unwrap();
        let sums = kernel_sums(&est, x.view(), &[q]).unwrap();
        let kde = weighted_kde(&est, x.view(), &[q]).unwrap();
        let ratio = kde[0] / sums[0];
        prop_assert!((kde[1] / sums[1] - ratio).abs() <= 1e-12 * ratio);
        let label = bayes_reassign(&est, x.view(), &[q]).unwrap();
        if sums[0] != sums[1] && sums.iter().all(|&s| s > 0.0) {
            let by_sum = usize::from(sums[1] > sums[0]);
            let by_kde = usize::from(kde[1] > kde[0]);
            prop_assert_eq!(by_sum, by_kde);
            prop_assert_eq!(label.label, by_sum);
        }
    }
}
