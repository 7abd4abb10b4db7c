//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's kernel or objective code.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-spread..spread))
}

/// `E exp(-Z^2 / zeta)` for `Z ~ N(delta, s2)` by the trapezoid rule on the
/// integrand's effective support. The rule converges geometrically for
/// this smooth, rapidly decaying integrand.
fn smoothed_kernel_1d(delta: f64, s2: f64, zeta: f64) -> f64 {
    let half = zeta / 2.0;
    let width = (s2 * half / (s2 + half)).sqrt();
    let center = delta * half / (s2 + half);
    let h = width / 6.0;
    let steps = 12 * 6 * 2;
    let lo = center - 12.0 * width;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2).sqrt();
    let mut total = 0.0;
    for s in 0..=steps {
        let z = lo + h * s as f64;
        let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
        total += w * norm * (-(z - delta) * (z - delta) / (2.0 * s2)).exp() * (-z * z / zeta).exp();
    }
    total * h
}

/// `<N(a, va I), N(b, vb I)>` in the RKHS of `exp(-|x - y|^2 / zeta)`,
/// one coordinate at a time.
pub fn rkhs_inner(a: &[f64], b: &[f64], va: f64, vb: f64, zeta: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| smoothed_kernel_1d(x - y, va + vb, zeta))
        .product()
}

/// Matrix of embedding inner products of the KDE components `N(x_i, beta^2 I)`.
pub fn embedding_gram(points: &Array2<f64>, beta: f64, zeta: f64) -> Array2<f64> {
    let n = points.nrows();
    let v = beta * beta;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let a = points.row(i).to_vec();
            let b = points.row(j).to_vec();
            let val = rkhs_inner(&a, &b, v, v, zeta);
            out[[i, j]] = val;
            out[[j, i]] = val;
        }
    }
    out
}

/// `sum_k sum_{i in c_k} |mu_i - mean_k|^2` expanded in inner products.
pub fn rkhs_kmeans_objective(inner: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let m = members.len() as f64;
        let mean_sq: f64 = members
            .iter()
            .flat_map(|&a| members.iter().map(move |&b| (a, b)))
            .map(|(a, b)| inner[[a, b]])
            .sum::<f64>()
            / (m * m);
        for &i in &members {
            let cross: f64 = members.iter().map(|&j| inner[[i, j]]).sum::<f64>() / m;
            total += inner[[i, i]] - 2.0 * cross + mean_sq;
        }
    }
    total
}

/// `max_i |mu_i - mean of its cluster|`.
pub fn rkhs_kcenter_objective(inner: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..k {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let m = members.len() as f64;
        let mean_sq: f64 = members
            .iter()
            .flat_map(|&a| members.iter().map(move |&b| (a, b)))
            .map(|(a, b)| inner[[a, b]])
            .sum::<f64>()
            / (m * m);
        for &i in &members {
            let cross: f64 = members.iter().map(|&j| inner[[i, j]]).sum::<f64>() / m;
            worst = worst.max((inner[[i, i]] - 2.0 * cross + mean_sq).max(0.0).sqrt());
        }
    }
    worst
}

/// Every labeling in `{0..k}^n` that uses all `k` labels, with labels in
/// order of first appearance so each partition appears once.
pub fn all_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = (k as u64).pow(n as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let labels: Vec<usize> = (0..n)
            .map(|_| {
                let l = (c % k as u64) as usize;
                c /= k as u64;
                l
            })
            .collect();
        let mut next = 0;
        let mut canonical = true;
        for &l in &labels {
            if l > next {
                canonical = false;
                break;
            }
            if l == next {
                next += 1;
            }
        }
        if canonical && next == k {
            out.push(labels);
        }
    }
    out
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if (0..k).all(|c| labels.contains(&c)) {
            return labels;
        }
    }
}

/// Same partition up to renaming the labels.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
