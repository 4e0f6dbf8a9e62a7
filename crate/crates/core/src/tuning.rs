//! Calibration of the penalty factor `α` by merge-and-split resampling.
//!
//! All populations are pooled, the pool is split at random into `K′` equal
//! parts (which share one copula by construction), and the pair selection
//! rule is evaluated on the split over a grid of `α`. The calibrated value is
//! the smallest grid point for which every one of `N` random splits selects
//! a single pair.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::Sample;
use crate::error::{Error, Result};
use crate::ksample::{PreparedSamples, TestConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Number `K′` of sub-populations per split.
    pub k_prime: usize,
    /// Number `N` of random splits.
    pub n_reps: usize,
    /// Candidate values of `α`, ascending.
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            k_prime: 3,
            n_reps: 20,
            alpha_grid: default_grid(),
            seed: 0,
        }
    }
}

/// Steps of 0.002 on `[0.01, 0.1)`, 0.01 on `[0.1, 1)` and 0.1 on `[1, 10]`.
pub fn default_grid() -> Vec<f64> {
    let fine = (5..50).map(|i| i as f64 / 500.0);
    let mid = (10..100).map(|i| i as f64 / 100.0);
    let coarse = (10..=100).map(|i| i as f64 / 10.0);
    fine.chain(mid).chain(coarse).collect()
}

impl TuningConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_prime < 2 {
            return Err(Error::InvalidArgument(format!("k_prime must be >= 2, got {}", self.k_prime)));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidArgument("n_reps must be >= 1".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidArgument("alpha grid is empty".into()));
        }
        if self.alpha_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument("alpha grid values must be positive".into()));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("alpha grid must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// Number of splits selecting a single pair, for one grid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnanimityRow {
    pub alpha: f64,
    pub n_single: usize,
    pub unanimous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub alpha_hat: f64,
    /// No grid value reached unanimity; `alpha_hat` is the grid maximum.
    pub exhausted: bool,
    pub n_reps: usize,
    pub table: Vec<UnanimityRow>,
}

/// Splits the pooled rows of `samples` into `k_prime` equal parts after a
/// seeded shuffle. Leftover rows are dropped.
pub fn random_split(pool: &Sample, k_prime: usize, seed: u64) -> Result<Vec<Sample>> {
    let size = pool.n() / k_prime;
    if size < 2 {
        return Err(Error::InvalidArgument(format!(
            "pool of {} rows is too small to split into {k_prime} parts",
            pool.n()
        )));
    }
    let mut perm: Vec<usize> = (0..pool.n()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(perm.chunks_exact(size)
        .take(k_prime)
        .map(|idx| pool.permute_rows(idx))
        .collect::<Vec<_>>())
}

/// Whether `s = 1` for each grid value, on one split.
fn single_pair_flags(parts: &[Sample], grid: &[f64], cfg: &TestConfig) -> Result<Vec<bool>> {
    let prep = PreparedSamples::new(parts, cfg)?;
    Ok(grid.iter().map(|&a| prep.select_pair(a) == 1).collect())
}

/// Smallest grid `α` for which every random split selects `s = 1`.
pub fn tune_alpha(samples: &[Sample], tcfg: &TuningConfig, cfg: &TestConfig) -> Result<TuningResult> {
    tcfg.validate()?;
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to tune on".into()));
    }
    let pool = Sample::concat(samples)?;
    let flags = (0..tcfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            let parts = random_split(&pool, tcfg.k_prime, tcfg.seed.wrapping_add(rep as u64))?;
            single_pair_flags(&parts, &tcfg.alpha_grid, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<UnanimityRow> = tcfg
        .alpha_grid
        .iter()
        .enumerate()
        .map(|(g, &alpha)| {
            let n_single = flags.iter().filter(|f| f[g]).count();
            UnanimityRow {
                alpha,
                n_single,
                unanimous: n_single == tcfg.n_reps,
            }
        })
        .collect();
    for rep in &flags {
        if let Some(first) = rep.iter().position(|&f| f) {
            assert!(
                rep[first..].iter().all(|&f| f),
                "single-pair selection is not monotone in alpha"
            );
        }
    }
    Ok(match table.iter().find(|r| r.unanimous) {
        Some(r) => TuningResult {
            alpha_hat: r.alpha,
            exhausted: false,
            n_reps: tcfg.n_reps,
            table,
        },
        None => {
            let alpha_hat = *tcfg.alpha_grid.last().expect("grid validated nonempty");
            log::warn!("no alpha in the grid reached unanimity; using the grid maximum {alpha_hat}");
            TuningResult {
                alpha_hat,
                exhausted: true,
                n_reps: tcfg.n_reps,
                table,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::TiesPolicy;
    use crate::samplers::{sample_copula, CopulaFamily, CopulaSpec};

    fn gaussian_pool(n: usize, seeds: &[u64]) -> Vec<Sample> {
        let spec = CopulaSpec::new(CopulaFamily::Gaussian, 0.5, 2).unwrap();
        seeds.iter().map(|&s| sample_copula(&spec, n, s).unwrap()).collect()
    }

    fn cfg() -> TestConfig {
        TestConfig {
            ties: TiesPolicy::Average,
            ..TestConfig::default()
        }
    }

    #[test]
    fn default_grid_is_ascending() {
        let g = default_grid();
        assert!(TuningConfig::default().validate().is_ok());
        assert_eq!((g[0], *g.last().unwrap()), (0.01, 10.0));
        assert!(g.windows(2).all(|w| w[1] / w[0] <= 1.21));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let pool = Sample::concat(&gaussian_pool(100, &[1, 2])).unwrap();
        let parts = random_split(&pool, 3, 5).unwrap();
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|s| s.n() == 66));
        assert_eq!(parts, random_split(&pool, 3, 5).unwrap());
        assert_ne!(parts, random_split(&pool, 3, 6).unwrap());
        assert!(random_split(&pool, 150, 1).is_err());
    }

    #[test]
    fn split_rows_come_from_the_pool_without_repetition() {
        let pool = Sample::concat(&gaussian_pool(40, &[3])).unwrap();
        let parts = random_split(&pool, 3, 9).unwrap();
        let mut seen: Vec<Vec<u64>> = parts
            .iter()
            .flat_map(|s| s.rows().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect::<Vec<_>>())
            .collect();
        let total = seen.len();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), total);
        let pool_rows: Vec<Vec<u64>> = pool.rows().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
        assert!(seen.iter().all(|r| pool_rows.contains(r)));
    }

    #[test]
    fn large_alpha_is_unanimous() {
        let samples = gaussian_pool(150, &[11, 12]);
        let tcfg = TuningConfig {
            alpha_grid: vec![10.0],
            n_reps: 10,
            ..TuningConfig::default()
        };
        let r = tune_alpha(&samples, &tcfg, &cfg()).unwrap();
        assert!(!r.exhausted);
        assert_eq!(r.alpha_hat, 10.0);
    }

    #[test]
    fn tiny_alpha_is_not_unanimous() {
        let samples = gaussian_pool(150, &[21, 22]);
        let tcfg = TuningConfig {
            alpha_grid: vec![1e-6],
            n_reps: 10,
            ..TuningConfig::default()
        };
        let r = tune_alpha(&samples, &tcfg, &cfg()).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.alpha_hat, 1e-6);
        assert!(r.table[0].n_single < 10);
    }

    #[test]
    fn tuned_alpha_is_deterministic_and_on_the_grid() {
        let samples = gaussian_pool(200, &[31, 32]);
        let tcfg = TuningConfig {
            n_reps: 10,
            alpha_grid: (1..=16).map(|i| i as f64 * 0.25).collect(),
            seed: 4,
            ..TuningConfig::default()
        };
        let a = tune_alpha(&samples, &tcfg, &cfg()).unwrap();
        let b = tune_alpha(&samples, &tcfg, &cfg()).unwrap();
        assert_eq!(a, b);
        assert!(tcfg.alpha_grid.contains(&a.alpha_hat));
        let first = a.table.iter().position(|r| r.unanimous).unwrap();
        assert!(a.table[first..].iter().all(|r| r.unanimous));
        assert!(a.table[..first].iter().all(|r| !r.unanimous));
    }

    #[test]
    fn tuned_alpha_usually_inside_grid() {
        let tcfg = TuningConfig {
            n_reps: 10,
            alpha_grid: (1..=16).map(|i| i as f64 * 0.25).collect(),
            ..TuningConfig::default()
        };
        let mut inside = 0;
        let seeds = 40;
        for s in 0..seeds {
            let samples = gaussian_pool(200, &[1000 + 2 * s, 1001 + 2 * s]);
            let r = tune_alpha(&samples, &tcfg.clone().with_seed(s), &cfg()).unwrap();
            if !r.exhausted && r.alpha_hat > tcfg.alpha_grid[0] {
                inside += 1;
            }
        }
        assert!(inside * 10 >= seeds * 7, "{inside}/{seeds}");
    }

    #[test]
    fn rejects_bad_configs() {
        let samples = gaussian_pool(50, &[1]);
        let bad = [
            TuningConfig { k_prime: 1, ..TuningConfig::default() },
            TuningConfig { n_reps: 0, ..TuningConfig::default() },
            TuningConfig { alpha_grid: vec![], ..TuningConfig::default() },
            TuningConfig { alpha_grid: vec![1.0, 0.5], ..TuningConfig::default() },
            TuningConfig { alpha_grid: vec![-1.0], ..TuningConfig::default() },
        ];
        for t in bad {
            assert!(tune_alpha(&samples, &t, &cfg()).is_err());
        }
    }
}
