//! Partitions of units into clusters and the covariate-dependent product
//! partition prior.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::similarity::{log_similarity_cluster, SimilarityConfig};

/// An allocation of `n` units to `K` clusters with dense labels `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    /// Index of each unit within its cluster's member list.
    slot: Vec<usize>,
}

impl Partition {
    pub fn one_cluster(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    /// Builds a partition from arbitrary (possibly sparse) labels; the result
    /// is relabeled densely in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let mut dense = Vec::with_capacity(labels.len());
        for &l in labels {
            let k = match map.iter().find(|(old, _)| *old == l) {
                Some(&(_, k)) => k,
                None => {
                    map.push((l, map.len()));
                    map.len() - 1
                }
            };
            dense.push(k);
        }
        let mut clusters = vec![Vec::new(); map.len()];
        let mut slot = vec![0; labels.len()];
        for (i, &k) in dense.iter().enumerate() {
            slot[i] = clusters[k].len();
            clusters[k].push(i);
        }
        Self {
            labels: dense,
            clusters,
            slot,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.clusters[k]
    }

    pub fn size(&self, k: usize) -> usize {
        self.clusters[k].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Takes unit `i` out of its cluster. If that empties the cluster, it is
    /// deleted by moving the last cluster into its place; the return value is
    /// `Some((removed, moved_from))` in that case so callers can mirror the
    /// swap in their own per-cluster arrays.
    ///
    /// The unit is left unallocated (its label is `usize::MAX`) until
    /// [`Partition::assign`] is called.
    pub fn detach(&mut self, i: usize) -> Option<(usize, usize)> {
        let k = self.labels[i];
        let s = self.slot[i];
        let members = &mut self.clusters[k];
        members.swap_remove(s);
        if s < members.len() {
            let moved = members[s];
            self.slot[moved] = s;
        }
        self.labels[i] = usize::MAX;
        if !self.clusters[k].is_empty() {
            return None;
        }
        let last = self.clusters.len() - 1;
        self.clusters.swap_remove(k);
        if k != last {
            for &u in &self.clusters[k] {
                self.labels[u] = k;
            }
        }
        Some((k, last))
    }

    /// Places a detached unit into cluster `k`; `k == n_clusters()` opens a
    /// new cluster.
    pub fn assign(&mut self, i: usize, k: usize) {
        debug_assert_eq!(self.labels[i], usize::MAX);
        if k == self.clusters.len() {
            self.clusters.push(Vec::new());
        }
        self.slot[i] = self.clusters[k].len();
        self.clusters[k].push(i);
        self.labels[i] = k;
    }

    /// Cluster order implied by first appearance of each label: entry `k` is
    /// the old label that becomes `k`.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_clusters()];
        let mut order = Vec::with_capacity(self.n_clusters());
        for &l in &self.labels {
            if !seen[l] {
                seen[l] = true;
                order.push(l);
            }
        }
        order
    }

    /// Checks label density and membership consistency.
    pub fn is_valid(&self) -> bool {
        let mut count = 0;
        for (k, members) in self.clusters.iter().enumerate() {
            if members.is_empty() {
                return false;
            }
            for (s, &i) in members.iter().enumerate() {
                if self.labels.get(i) != Some(&k) || self.slot[i] != s {
                    return false;
                }
            }
            count += members.len();
        }
        count == self.labels.len()
    }

    /// Space-separated 1-based labels.
    pub fn to_line(&self) -> String {
        self.labels
            .iter()
            .map(|l| (l + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let labels = line
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(l) if l >= 1 => Ok(l - 1),
                _ => Err(Error::InvalidArgument(format!("bad partition label `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(&labels))
    }
}

/// Relabels densely in order of first appearance.
pub fn normalize_labels(part: &Partition) -> Partition {
    Partition::from_labels(part.labels())
}

/// Dirichlet-process cohesion `c(C) = M * (|C| - 1)!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohesionConfig {
    pub mass: f64,
}

impl Default for CohesionConfig {
    fn default() -> Self {
        Self { mass: 1.0 }
    }
}

impl CohesionConfig {
    pub fn new(mass: f64) -> Result<Self> {
        if mass > 0.0 && mass.is_finite() {
            Ok(Self { mass })
        } else {
            Err(Error::InvalidArgument(format!("mass {mass} must be positive")))
        }
    }
}

pub fn log_cohesion(size: usize, coh: &CohesionConfig) -> Result<f64> {
    if size == 0 {
        return Err(Error::InvalidArgument("cohesion of an empty cluster".into()));
    }
    Ok(coh.mass.ln() + ln_factorial(size as u64 - 1))
}

/// Unnormalized log prior `sum_k [log c(C_k) + log g(x*_k)]`.
pub fn log_ppmx_prior(
    part: &Partition,
    d: &Dataset,
    cfg: &SimilarityConfig,
    coh: &CohesionConfig,
) -> f64 {
    (0..part.n_clusters())
        .map(|k| {
            log_cohesion(part.size(k), coh).expect("clusters are nonempty")
                + log_similarity_cluster(d, part.members(k), cfg)
        })
        .sum()
}

pub const MAX_ENUMERATION: usize = 10;

/// All set partitions of `n` units in restricted-growth-string order.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to n <= {MAX_ENUMERATION}, got {n}"
        )));
    }
    if n == 0 {
        return Ok(vec![Partition::from_labels(&[])]);
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    // maxes[i] = max(rgs[0..i]), so rgs[i] may range over 0..=maxes[i] + 1.
    let mut maxes = vec![0usize; n];
    loop {
        out.push(Partition::from_labels(&rgs));
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if rgs[i] <= maxes[i] {
                rgs[i] += 1;
                let m = maxes[i].max(rgs[i]);
                for t in i + 1..n {
                    rgs[t] = 0;
                    maxes[t] = m;
                }
                break;
            }
            i -= 1;
        }
    }
}
