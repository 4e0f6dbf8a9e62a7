//! Greedy agglomeration of populations that share a copula.
//!
//! The two closest populations (smallest pairwise data-driven statistic)
//! seed the first cluster if their two-sample test accepts. The open
//! cluster then absorbs, one at a time, the unassigned population closest to
//! any of its members, as long as the simultaneous test on the enlarged
//! cluster accepts. A rejection closes the cluster and opens a new one
//! holding the rejected candidate.

use serde::{Deserialize, Serialize};

use crate::coeffs::{pseudo_observations, PseudoSample, Sample};
use crate::error::{Error, Result};
use crate::ksample::{PreparedSamples, TestConfig, TestResult};
use crate::tuning::{tune_alpha, TuningConfig};

/// One test performed by the clustering loop. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailRecord {
    /// Population proposed for the open cluster.
    pub candidate: usize,
    /// Members of the open cluster at the time of the test.
    pub cluster: Vec<usize>,
    pub statistic: f64,
    pub p_value: f64,
    /// Penalty factor used by this test.
    pub alpha: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Clusters in creation order, members in insertion order.
    pub clusters: Vec<Vec<usize>>,
    pub trail: Vec<TrailRecord>,
}

impl ClusterPartition {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Clusters as sorted member lists, sorted by smallest member.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        out.sort();
        out
    }
}

/// Pairwise data-driven statistics `V_D` between all populations.
pub fn pairwise_statistics(pseudo: &[PseudoSample], cfg: &TestConfig) -> Result<Vec<Vec<f64>>> {
    let k = pseudo.len();
    let mut out = vec![vec![0.0; k]; k];
    for ell in 0..k {
        for m in ell + 1..k {
            let prep = PreparedSamples::from_pseudo(vec![pseudo[ell].clone(), pseudo[m].clone()], cfg)?;
            let v = prep.pair_statistics(cfg.alpha_penalty)[0].selected();
            out[ell][m] = v;
            out[m][ell] = v;
        }
    }
    Ok(out)
}

fn subset_test(pseudo: &[PseudoSample], members: &[usize], cfg: &TestConfig) -> Result<TestResult> {
    let sub: Vec<PseudoSample> = members.iter().map(|&i| pseudo[i].clone()).collect();
    PreparedSamples::from_pseudo(sub, cfg)?.test(cfg)
}

/// Clusters `K` populations by repeated K-sample tests.
pub fn cluster_copulas(samples: &[Sample], cfg: &TestConfig) -> Result<ClusterPartition> {
    cfg.validate()?;
    let pseudo = samples
        .iter()
        .map(|s| pseudo_observations(s, cfg.ties))
        .collect::<Result<Vec<_>>>()?;
    cluster_pseudo(&pseudo, cfg)
}

/// [`cluster_copulas`] with `α` re-tuned for every test on the populations
/// it involves. `cfg.alpha_penalty` is only used to rank candidates.
pub fn cluster_copulas_tuned(samples: &[Sample], cfg: &TestConfig, tcfg: &TuningConfig) -> Result<ClusterPartition> {
    cfg.validate()?;
    tcfg.validate()?;
    let pseudo = samples
        .iter()
        .map(|s| pseudo_observations(s, cfg.ties))
        .collect::<Result<Vec<_>>>()?;
    let dist = pairwise_statistics(&pseudo, cfg)?;
    grow(&dist, |members| {
        let sub: Vec<Sample> = members.iter().map(|&i| samples[i].clone()).collect();
        let alpha = tune_alpha(&sub, tcfg, cfg)?.alpha_hat;
        subset_test(&pseudo, members, &cfg.with_alpha(alpha))
    })
}

/// [`cluster_copulas`] on precomputed pseudo-observations.
pub fn cluster_pseudo(pseudo: &[PseudoSample], cfg: &TestConfig) -> Result<ClusterPartition> {
    let dist = pairwise_statistics(pseudo, cfg)?;
    grow(&dist, |members| subset_test(pseudo, members, cfg))
}

fn record(candidate: usize, cluster: Vec<usize>, res: &TestResult) -> TrailRecord {
    TrailRecord {
        candidate,
        cluster,
        statistic: res.statistic,
        p_value: res.p_value,
        alpha: res.alpha_penalty,
        accepted: !res.reject,
    }
}

/// The agglomeration loop over a pairwise distance matrix; `test` runs the
/// simultaneous test on populations listed in increasing index order.
fn grow(dist: &[Vec<f64>], mut test: impl FnMut(&[usize]) -> Result<TestResult>) -> Result<ClusterPartition> {
    let k = dist.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("clustering needs at least two samples, got {k}")));
    }
    let (mut l0, mut m0) = (0, 1);
    for ell in 0..k {
        for m in ell + 1..k {
            if dist[ell][m] < dist[l0][m0] {
                (l0, m0) = (ell, m);
            }
        }
    }
    let seed = test(&[l0, m0])?;
    let mut trail = vec![record(m0, vec![l0], &seed)];
    if seed.reject {
        return Ok(ClusterPartition {
            clusters: Vec::new(),
            trail,
        });
    }

    let mut assigned = vec![false; k];
    assigned[l0] = true;
    assigned[m0] = true;
    let mut clusters = vec![vec![l0, m0]];
    while assigned.iter().any(|&a| !a) {
        let open = clusters.last_mut().expect("at least one cluster");
        let mut best: Option<(usize, f64)> = None;
        for &i in open.iter() {
            for j in (0..k).filter(|&j| !assigned[j]) {
                if best.is_none_or(|(_, d)| dist[i][j] < d) {
                    best = Some((j, dist[i][j]));
                }
            }
        }
        let (cand, _) = best.expect("an unassigned population exists");
        let mut members = open.clone();
        members.push(cand);
        members.sort_unstable();
        let res = test(&members)?;
        trail.push(record(cand, open.clone(), &res));
        assigned[cand] = true;
        if res.reject {
            clusters.push(vec![cand]);
        } else {
            open.push(cand);
        }
    }
    Ok(ClusterPartition { clusters, trail })
}
