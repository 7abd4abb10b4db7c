use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of `n` points to `k` cluster labels (`0..k`).
///
/// Clusters may be empty; algorithms that need every cluster populated
/// check it through [`Partition::first_empty`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("a partition needs k >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Builds a partition with `k = max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().map_or(1, |m| m + 1);
        Self::new(labels, k)
    }

    /// Every point in cluster 0.
    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: 1,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Member indices of every cluster, in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn first_empty(&self) -> Option<usize> {
        self.sizes().iter().position(|&s| s == 0)
    }

    pub fn require_nonempty(&self) -> Result<()> {
        match self.first_empty() {
            Some(c) => Err(Error::EmptyCluster(c)),
            None => Ok(()),
        }
    }

    /// Relabels clusters in order of first appearance. Two partitions are
    /// equal up to relabeling iff their canonical forms are equal.
    pub fn canonical(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect()
    }

    pub fn same_up_to_relabeling(&self, other: &Partition) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }
}

/// Calls `visit` once for every partition of `n` points into exactly `k`
/// nonempty clusters, each presented in canonical (first-appearance) form.
pub fn for_each_surjective_partition(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut labels = vec![0usize; n];
    // Restricted growth strings: labels[i] <= max(labels[..i]) + 1.
    fn recurse(
        i: usize,
        used: usize,
        n: usize,
        k: usize,
        labels: &mut [usize],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if i == n {
            if used == k {
                visit(labels);
            }
            return;
        }
        // Not enough remaining points to open the missing clusters.
        if k - used > n - i {
            return;
        }
        let limit = (used + 1).min(k);
        for l in 0..limit {
            labels[i] = l;
            let next_used = if l == used { used + 1 } else { used };
            recurse(i + 1, next_used, n, k, labels, visit);
        }
    }
    recurse(0, 0, n, k, &mut labels, &mut visit);
}

/// Stirling number of the second kind, saturating at `u128::MAX`.
pub fn stirling2(n: usize, k: usize) -> u128 {
    if k == 0 {
        return u128::from(n == 0);
    }
    if k > n {
        return 0;
    }
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = (j as u128)
                .saturating_mul(row[j])
                .saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[k]
}
