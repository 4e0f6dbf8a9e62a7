//! Samples, rank-based pseudo-observations and copula coefficient estimates.
//!
//! A copula coefficient is `ρ_j = E[L_{j_1}(U_1) ... L_{j_p}(U_p)]`. It is
//! estimated by the empirical mean of the same tensor product over the
//! pseudo-observations `Û_{i,c} = rank(X_{i,c}) / n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_lattice::{indices_up_to, MultiIndex};
use crate::legendre;

/// An `n × p` matrix of observations, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample has no rows".into()));
        }
        if p < 2 {
            return Err(Error::InvalidArgument(format!(
                "copulas need at least two columns, got {p}"
            )));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f` to every entry of column `c`.
    pub fn map_column<F: Fn(f64) -> f64>(&self, c: usize, f: F) -> Self {
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(self.p) {
            r[c] = f(r[c]);
        }
        out
    }

    /// Reorders rows so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in perm {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: perm.len(),
            p: self.p,
            data,
        }
    }

    /// Stacks the rows of several samples sharing `p`.
    pub fn concat(samples: &[Sample]) -> Result<Self> {
        let p = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?
            .p;
        let mut data = Vec::new();
        for s in samples {
            if s.p != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.p,
                });
            }
            data.extend_from_slice(&s.data);
        }
        Self::new(data.len() / p, p, data)
    }
}

/// How to rank tied observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiesPolicy {
    /// Ties are rejected; margins are assumed continuous.
    #[default]
    Error,
    /// Tied values share their average rank.
    Average,
}

impl std::str::FromStr for TiesPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "error" => Ok(TiesPolicy::Error),
            "average" => Ok(TiesPolicy::Average),
            other => Err(Error::InvalidArgument(format!("unknown ties policy '{other}'"))),
        }
    }
}

/// Rank-transformed sample with entries in `(0, 1]`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    n: usize,
    p: usize,
    cols: Vec<Vec<f64>>,
    ties: bool,
    // Rows sorted lexicographically; reductions run in this order so that
    // results do not depend on the input row order.
    order: Vec<usize>,
}

impl PseudoSample {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.cols[c]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.cols[c][i]
    }

    /// Whether any column had tied values (only possible with [`TiesPolicy::Average`]).
    pub fn had_ties(&self) -> bool {
        self.ties
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    /// Row indices in lexicographic order of the rows.
    pub fn canonical_order(&self) -> &[usize] {
        &self.order
    }

    /// Lexicographic comparison of rows `a` and `b`, starting at column `first`.
    pub(crate) fn cmp_rows_from(&self, first: usize, a: usize, b: usize) -> std::cmp::Ordering {
        (0..self.p)
            .map(|k| (first + k) % self.p)
            .map(|c| self.cols[c][a].total_cmp(&self.cols[c][b]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }

    fn with_order(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.cmp_rows_from(0, a, b));
        self.order = order;
        self
    }

    /// Builds a pseudo-sample from columns already in `(0, 1]`.
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map(Vec::len).unwrap_or(0);
        if p < 2 || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "pseudo-sample needs n >= 2 and p >= 2 (got n={n}, p={p})"
            )));
        }
        for c in &cols {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if let Some(&bad) = c.iter().find(|&&u| !(u > 0.0 && u <= 1.0)) {
                return Err(Error::Domain { value: bad });
            }
        }
        Ok(Self {
            n,
            p,
            cols,
            ties: false,
            order: Vec::new(),
        }
        .with_order())
    }
}

/// Ranks `x` (1-based), returning `(ranks, had_ties, argsort)`; ties get their midrank.
fn midranks(x: &[f64]) -> (Vec<f64>, bool, Vec<usize>) {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = false;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            ties = true;
        }
        // positions start..end hold ranks start+1..=end
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    (ranks, ties, order)
}

/// `Û_{i,c} = rank(X_{i,c}) / n` for every column.
pub fn pseudo_observations(s: &Sample, ties: TiesPolicy) -> Result<PseudoSample> {
    if s.n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pseudo-observations need n >= 2, got {}",
            s.n
        )));
    }
    let nf = s.n as f64;
    let mut cols = Vec::with_capacity(s.p);
    let mut any_ties = false;
    let mut first_order = Vec::new();
    let mut first_tied = false;
    for c in 0..s.p {
        let (r, tied, order) = midranks(&s.column(c));
        if tied {
            if ties == TiesPolicy::Error {
                return Err(Error::TiesPresent { column: c });
            }
            any_ties = true;
        }
        if c == 0 {
            first_order = order;
            first_tied = tied;
        }
        cols.push(r.into_iter().map(|v| v / nf).collect());
    }
    if any_ties {
        log::debug!("sample contains ties; midranks used");
    }
    let ps = PseudoSample {
        n: s.n,
        p: s.p,
        cols,
        ties: any_ties,
        order: first_order,
    };
    // distinct first-column ranks already fix the lexicographic row order
    Ok(if first_tied { ps.with_order() } else { ps })
}

/// `ρ̂_j = (1/n) Σ_i ∏_c L_{j_c}(Û_{i,c})`.
pub fn estimate_coefficient(ps: &PseudoSample, j: &MultiIndex) -> Result<f64> {
    if j.dim() != ps.p {
        return Err(Error::DimensionMismatch {
            expected: ps.p,
            got: j.dim(),
        });
    }
    let max_deg = j.0.iter().copied().max().unwrap_or(0);
    let mut buf = vec![0.0; max_deg + 1];
    let mut sum = 0.0;
    for &i in &ps.order {
        let mut prod = 1.0;
        for (c, &deg) in j.0.iter().enumerate() {
            if deg == 0 {
                continue;
            }
            legendre::fill(ps.cols[c][i], &mut buf[..=deg]);
            prod *= buf[deg];
        }
        sum += prod;
    }
    Ok(sum / ps.n as f64)
}

/// Estimated coefficients over `S(2) ∪ ... ∪ S(d_max)`, in global order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    d_max: usize,
    p: usize,
    entries: Vec<(MultiIndex, f64)>,
}

impl CoefficientTable {
    /// Table from explicit entries; every key must lie in a shell of norm `<= d_max`.
    pub fn from_entries(d_max: usize, p: usize, entries: Vec<(MultiIndex, f64)>) -> Result<Self> {
        for (j, _) in &entries {
            if j.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: j.dim(),
                });
            }
            if !j.in_shell() || j.norm() > d_max {
                return Err(Error::InvalidArgument(format!(
                    "{j} is not in a shell S(d) with 2 <= d <= {d_max}"
                )));
            }
        }
        Ok(Self { d_max, p, entries })
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    pub fn get(&self, j: &MultiIndex) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == j).map(|(_, v)| *v)
    }
}

/// Estimates every coefficient up to total degree `d_max`.
pub fn coefficient_table(ps: &PseudoSample, d_max: usize) -> Result<CoefficientTable> {
    if d_max < 2 {
        return Err(Error::InvalidArgument(format!("d_max must be >= 2, got {d_max}")));
    }
    let keys = indices_up_to(d_max, ps.p)?;
    // Highest single-coordinate degree in any shell is d_max - 1.
    let width = d_max;
    let mut lvals = vec![0.0; ps.p * width];
    let mut sums = vec![0.0; keys.len()];
    for &i in &ps.order {
        for c in 0..ps.p {
            legendre::fill(ps.cols[c][i], &mut lvals[c * width..(c + 1) * width]);
        }
        for (s, j) in sums.iter_mut().zip(&keys) {
            let mut prod = 1.0;
            for (c, &deg) in j.0.iter().enumerate() {
                if deg > 0 {
                    prod *= lvals[c * width + deg];
                }
            }
            *s += prod;
        }
    }
    let nf = ps.n as f64;
    Ok(CoefficientTable {
        d_max,
        p: ps.p,
        entries: keys.into_iter().zip(sums).map(|(j, s)| (j, s / nf)).collect(),
    })
}

/// Spearman's rho, which coincides with the coefficient `ρ̂_(1,1)`.
pub fn spearman_rho(ps: &PseudoSample) -> Result<f64> {
    if ps.p != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: ps.p,
        });
    }
    estimate_coefficient(ps, &MultiIndex(vec![1, 1]))
}

fn check_point(t: &CoefficientTable, u: &[f64]) -> Result<()> {
    if u.len() != t.p {
        return Err(Error::DimensionMismatch {
            expected: t.p,
            got: u.len(),
        });
    }
    Ok(())
}

/// Truncated density series `1 + Σ_j ρ_j ∏ L_{j_c}(u_c)`. May be negative.
pub fn density_series(t: &CoefficientTable, u: &[f64]) -> Result<f64> {
    check_point(t, u)?;
    let mut acc = 1.0;
    for (j, rho) in &t.entries {
        acc += rho * legendre::tensor_product(j.as_slice(), u)?;
    }
    Ok(acc)
}

/// Truncated copula series `∏ u_c + Σ_j ρ_j ∏ I_{j_c}(u_c)`.
pub fn copula_series(t: &CoefficientTable, u: &[f64]) -> Result<f64> {
    check_point(t, u)?;
    let mut acc = 1.0;
    for &x in u {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { value: x });
        }
        acc *= x;
    }
    for (j, rho) in &t.entries {
        let mut prod = 1.0;
        for (&deg, &x) in j.0.iter().zip(u) {
            prod *= legendre::antiderivative(deg, x)?;
        }
        acc += rho * prod;
    }
    Ok(acc)
}
