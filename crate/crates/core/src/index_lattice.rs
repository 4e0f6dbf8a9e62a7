//! Multi-index shells, their ordering, and the ranking of population pairs.
//!
//! A shell `S(d)` holds every `j ∈ N^p` with `|j|_1 = d` and at least two
//! positive coordinates. Within a shell indices are ordered by first
//! coordinate descending, then second descending, and so on, which runs from
//! `(d-1, 1, 0, ..., 0)` down to `(0, ..., 0, 1, d-1)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label `j = (j_1, ..., j_p)` of a copula coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn active(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0).count()
    }

    /// Whether `self` belongs to some shell `S(d)`, `d >= 2`.
    pub fn in_shell(&self) -> bool {
        self.active() >= 2
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

type ShellCache = RwLock<HashMap<(usize, usize), Arc<[MultiIndex]>>>;

fn cache() -> &'static ShellCache {
    static CACHE: OnceLock<ShellCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn build_shell(d: usize, p: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; p];
    compositions(d, 0, &mut cur, &mut out);
    out
}

// Emits weak compositions of `rest` into `cur[pos..]`, larger leading parts first.
fn compositions(rest: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    let p = cur.len();
    if pos == p - 1 {
        cur[pos] = rest;
        if cur.iter().filter(|&&x| x > 0).count() >= 2 {
            out.push(MultiIndex(cur.clone()));
        }
        return;
    }
    for v in (0..=rest).rev() {
        cur[pos] = v;
        compositions(rest - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// `S(d)` in shell order. Results are cached per `(d, p)`.
pub fn enumerate_shell(d: usize, p: usize) -> Result<Arc<[MultiIndex]>> {
    if d < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "shells need d >= 2 and p >= 2 (got d={d}, p={p})"
        )));
    }
    if let Some(s) = cache().read().expect("shell cache poisoned").get(&(d, p)) {
        return Ok(Arc::clone(s));
    }
    let shell: Arc<[MultiIndex]> = build_shell(d, p).into();
    let mut w = cache().write().expect("shell cache poisoned");
    Ok(Arc::clone(w.entry((d, p)).or_insert(shell)))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `c(d) = C(d+p-1, p-1) - p`, the size of `S(d)`.
pub fn shell_cardinality(d: usize, p: usize) -> Result<usize> {
    if d < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "shells need d >= 2 and p >= 2 (got d={d}, p={p})"
        )));
    }
    Ok((binomial(d + p - 1, p - 1) - p as u128) as usize)
}

/// Number of coefficients in `S(2) ∪ ... ∪ S(d_max)`.
pub fn lattice_size(d_max: usize, p: usize) -> Result<usize> {
    (2..=d_max).map(|d| shell_cardinality(d, p)).sum()
}

/// All indices of `S(2), ..., S(d_max)` in global order.
pub fn indices_up_to(d_max: usize, p: usize) -> Result<Vec<MultiIndex>> {
    let mut out = Vec::new();
    for d in 2..=d_max {
        out.extend(enumerate_shell(d, p)?.iter().cloned());
    }
    Ok(out)
}

/// `H(k)`: the first `k` indices of the global order.
pub fn cumulative_set(k: usize, p: usize) -> Result<Vec<MultiIndex>> {
    if k == 0 {
        return Err(Error::InvalidArgument("cumulative set needs k >= 1".into()));
    }
    let mut out = Vec::with_capacity(k);
    let mut d = 2;
    while out.len() < k {
        let shell = enumerate_shell(d, p)?;
        let take = (k - out.len()).min(shell.len());
        out.extend(shell[..take].iter().cloned());
        d += 1;
    }
    Ok(out)
}

/// `v(K) = K(K-1)/2`.
pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Row-major rank of the pair `(ell, m)` in the upper triangle, 1-based.
pub fn pair_rank(ell: usize, m: usize, k: usize) -> Result<usize> {
    if !(1 <= ell && ell < m && m <= k) {
        return Err(Error::PairOrder { ell, m, k });
    }
    Ok(k * (ell - 1) + m - ell * (ell + 1) / 2)
}

/// Inverse of [`pair_rank`].
pub fn pair_unrank(rank: usize, k: usize) -> Result<(usize, usize)> {
    let max = pair_count(k);
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    let mut remaining = rank;
    for ell in 1..k {
        let row = k - ell;
        if remaining <= row {
            return Ok((ell, ell + remaining));
        }
        remaining -= row;
    }
    unreachable!("rank within range always resolves")
}
