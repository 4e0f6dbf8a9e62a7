//! Data-driven K-sample test for equality of copulas.
//!
//! For every pair of populations `(ℓ, m)` the embedded statistics
//! `V_k = scale · Σ_{j ∈ H(k)} (ρ̂^(ℓ)_j − ρ̂^(m)_j)²` are built over the
//! global coefficient order, and a penalised rule picks the number of
//! coefficients `D`. Pairs are then accumulated in row-major order and a
//! second penalised rule picks how many pairs enter the final statistic,
//! which is normalised by the variance estimate of populations 1 and 2 and
//! referred to a χ²₁ law.

use serde::{Deserialize, Serialize};

use crate::coeffs::{coefficient_table, pseudo_observations, CoefficientTable, PseudoSample, Sample, TiesPolicy};
use crate::error::{Error, Result};
use crate::index_lattice::{lattice_size, pair_count};

/// Whether the K populations are observed on the same individuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    #[default]
    Paired,
    Independent,
}

impl std::str::FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paired" => Ok(Pairing::Paired),
            "independent" => Ok(Pairing::Independent),
            other => Err(Error::InvalidArgument(format!("unknown pairing '{other}'"))),
        }
    }
}

/// Shape of the penalty terms `q_n` and `p_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `α · log(n)` (or its unequal-size analogue).
    #[default]
    LogN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Largest coefficient norm compared.
    pub d_max: usize,
    /// Multiplier `α` of the penalty.
    pub alpha_penalty: f64,
    pub penalty: PenaltyKind,
    pub pairing: Pairing,
    /// Nominal level of the test.
    pub level: f64,
    pub ties: TiesPolicy,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            d_max: 3,
            alpha_penalty: 1.0,
            penalty: PenaltyKind::LogN,
            pairing: Pairing::Paired,
            level: 0.05,
            ties: TiesPolicy::Error,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max < 2 {
            return Err(Error::InvalidArgument(format!("d_max must be >= 2, got {}", self.d_max)));
        }
        if !(self.alpha_penalty > 0.0 && self.alpha_penalty.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "penalty factor must be positive, got {}",
                self.alpha_penalty
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_penalty = alpha;
        self
    }
}

/// Embedded statistics for one pair of populations (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub ell: usize,
    pub m: usize,
    /// `V_1 <= V_2 <= ... <= V_{k_max}`.
    pub v_sequence: Vec<f64>,
    /// Selected number of coefficients `D` (1-based).
    pub d_selected: usize,
    /// `n` (paired) or `n_ℓ n_m / (n_ℓ + n_m)` (independent).
    pub scale: f64,
    /// Effective size inside the logarithm of the dimension penalty.
    pub n_eff: f64,
}

impl PairStatistics {
    /// `V_D`, the data-driven statistic of the pair.
    pub fn selected(&self) -> f64 {
        self.v_sequence[self.d_selected - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDimension {
    pub ell: usize,
    pub m: usize,
    pub d: usize,
}

/// Outcome of the K-sample test. Population indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Normalised statistic `V = V_s / σ̂²`.
    pub statistic: f64,
    /// Unnormalised cumulative statistic `V_s`.
    pub raw_statistic: f64,
    /// Selected number of pairs `s` (1-based pair rank).
    pub s_selected: usize,
    pub selected_pair: (usize, usize),
    pub d_per_pair: Vec<PairDimension>,
    pub sigma2_hat: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Set when the variance estimate and the statistic are both zero.
    pub degenerate: bool,
    pub alpha_penalty: f64,
    pub level: f64,
}

/// Smallest maximiser (1-based) of `seq[k-1] − k·penalty`.
pub fn penalized_argmax(seq: &[f64], penalty: f64) -> usize {
    let mut best = 1;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in seq.iter().enumerate() {
        let obj = v - (i + 1) as f64 * penalty;
        if obj > best_val {
            best_val = obj;
            best = i + 1;
        }
    }
    best
}

/// `D = min argmax_k (V_k − k q)`.
pub fn select_dimension(v_sequence: &[f64], q: f64) -> usize {
    penalized_argmax(v_sequence, q)
}

/// `s = min argmax_k (Σ_{rank <= k} V^{(ℓ,m)}_D − k p)`, pairs given in rank order.
pub fn select_pair(pairs: &[PairStatistics], p: f64) -> usize {
    penalized_argmax(&cumulative(pairs), p)
}

fn cumulative(pairs: &[PairStatistics]) -> Vec<f64> {
    pairs
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.selected();
            Some(*acc)
        })
        .collect()
}

fn pair_scale(n_l: usize, n_m: usize, pairing: Pairing) -> Result<f64> {
    match pairing {
        Pairing::Paired if n_l != n_m => Err(Error::UnequalSizes(vec![n_l, n_m])),
        Pairing::Paired => Ok(n_l as f64),
        Pairing::Independent => Ok((n_l * n_m) as f64 / (n_l + n_m) as f64),
    }
}

/// Effective size in the dimension penalty `q = α log(n_eff)`.
pub fn dimension_n_eff(n_l: usize, n_m: usize, pairing: Pairing) -> f64 {
    match pairing {
        Pairing::Paired => n_l as f64,
        Pairing::Independent => 2.0 * (n_l * n_m) as f64 / (n_l + n_m) as f64,
    }
}

/// `log` of the effective size in the pair penalty `p = α log(·)`.
///
/// For unequal sizes this is `log(K^{K−1} n_1 ⋯ n_K / (n_1 + ⋯ + n_K)^{K−1})`,
/// which reduces to `log(n)` for equal sizes.
pub fn pair_log_size(sizes: &[usize], pairing: Pairing) -> f64 {
    let k = sizes.len() as f64;
    match pairing {
        Pairing::Paired => (sizes[0] as f64).ln(),
        Pairing::Independent => {
            let total: f64 = sizes.iter().map(|&n| n as f64).sum();
            (k - 1.0) * k.ln() + sizes.iter().map(|&n| (n as f64).ln()).sum::<f64>()
                - (k - 1.0) * total.ln()
        }
    }
}

fn sequence_from_tables(t_l: &CoefficientTable, t_m: &CoefficientTable, scale: f64) -> Vec<f64> {
    t_l.values()
        .zip(t_m.values())
        .scan(0.0, |acc, (a, b)| {
            let r = a - b;
            *acc += r * r;
            Some(scale * *acc)
        })
        .collect()
}

/// Embedded statistics of one pair with its selected dimension.
pub fn pair_statistic_sequence(
    ps_l: &PseudoSample,
    ps_m: &PseudoSample,
    cfg: &TestConfig,
) -> Result<PairStatistics> {
    cfg.validate()?;
    if ps_l.p() != ps_m.p() {
        return Err(Error::DimensionMismatch {
            expected: ps_l.p(),
            got: ps_m.p(),
        });
    }
    let scale = pair_scale(ps_l.n(), ps_m.n(), cfg.pairing)?;
    let t_l = coefficient_table(ps_l, cfg.d_max)?;
    let t_m = coefficient_table(ps_m, cfg.d_max)?;
    let v_sequence = sequence_from_tables(&t_l, &t_m, scale);
    let n_eff = dimension_n_eff(ps_l.n(), ps_m.n(), cfg.pairing);
    let d_selected = select_dimension(&v_sequence, cfg.alpha_penalty * n_eff.ln());
    Ok(PairStatistics {
        ell: 0,
        m: 1,
        v_sequence,
        d_selected,
        scale,
        n_eff,
    })
}

/// `M_{i}` terms: `L_1(Û_{i,1}) L_1(Û_{i,2})` plus the two rank-estimation corrections.
fn influence_terms(ps: &PseudoSample) -> Vec<f64> {
    let n = ps.n();
    let s3 = 3f64.sqrt();
    let a = ps.column(0);
    let b = ps.column(1);
    let la: Vec<f64> = a.iter().map(|&u| s3 * (2.0 * u - 1.0)).collect();
    let lb: Vec<f64> = b.iter().map(|&u| s3 * (2.0 * u - 1.0)).collect();
    let order = ps.canonical_order();
    let centre_a: f64 = order.iter().map(|&k| a[k] * lb[k]).sum();
    let centre_b: f64 = order.iter().map(|&k| b[k] * la[k]).sum();
    let up_a = upper_sums(ps, 0, &lb);
    let up_b = upper_sums(ps, 1, &la);
    let factor = 2.0 * s3 / n as f64;
    (0..n)
        .map(|i| la[i] * lb[i] + factor * ((up_a[i] - centre_a) + (up_b[i] - centre_b)))
        .collect()
}

/// `out[i] = Σ_{k : Û_{k,c} >= Û_{i,c}} w_k`, accumulated in a row-order-free way.
fn upper_sums(ps: &PseudoSample, c: usize, w: &[f64]) -> Vec<f64> {
    let n = ps.n();
    let key = ps.column(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| ps.cmp_rows_from(c, x, y));
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    let mut end = n;
    while end > 0 {
        let mut start = end - 1;
        while start > 0 && key[order[start - 1]] == key[order[end - 1]] {
            start -= 1;
        }
        for &k in order[start..end].iter().rev() {
            acc += w[k];
        }
        for &k in &order[start..end] {
            out[k] = acc;
        }
        end = start;
    }
    out
}

fn canonical_mean(ps: &PseudoSample, m: &[f64]) -> f64 {
    ps.canonical_order().iter().map(|&i| m[i]).sum::<f64>() / m.len() as f64
}

fn check_pair(ps1: &PseudoSample, ps2: &PseudoSample) -> Result<()> {
    if ps1.p() != ps2.p() {
        return Err(Error::DimensionMismatch {
            expected: ps1.p(),
            got: ps2.p(),
        });
    }
    Ok(())
}

/// Variance estimate of `√n r_(1,1,0,…)` for paired samples.
pub fn variance_paired(ps1: &PseudoSample, ps2: &PseudoSample) -> Result<f64> {
    check_pair(ps1, ps2)?;
    if ps1.n() != ps2.n() {
        return Err(Error::UnequalSizes(vec![ps1.n(), ps2.n()]));
    }
    let m1 = influence_terms(ps1);
    let m2 = influence_terms(ps2);
    let shift = canonical_mean(ps1, &m1) - canonical_mean(ps2, &m2);
    let mut order: Vec<usize> = (0..ps1.n()).collect();
    order.sort_by(|&x, &y| ps1.cmp_rows_from(0, x, y).then_with(|| ps2.cmp_rows_from(0, x, y)));
    let ss: f64 = order
        .iter()
        .map(|&i| {
            let d = m1[i] - m2[i] - shift;
            d * d
        })
        .sum();
    Ok(ss / ps1.n() as f64)
}

/// Weighted variance estimate for independent samples, `a = n_1 / (n_1 + n_2)`.
pub fn variance_independent(ps1: &PseudoSample, ps2: &PseudoSample) -> Result<f64> {
    check_pair(ps1, ps2)?;
    let (n1, n2) = (ps1.n() as f64, ps2.n() as f64);
    let a = n1 / (n1 + n2);
    let centred = |ps: &PseudoSample| {
        let m = influence_terms(ps);
        let mean = canonical_mean(ps, &m);
        ps.canonical_order()
            .iter()
            .map(|&i| (m[i] - mean).powi(2))
            .sum::<f64>()
    };
    Ok((1.0 - a) / n1 * centred(ps1) + a / n2 * centred(ps2))
}

/// Upper tail `P(χ²₁ > x) = erfc(√(x/2))`.
pub fn chi2_upper_tail(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("χ² statistic must be >= 0, got {x}")));
    }
    Ok(libm::erfc((x / 2.0).sqrt()))
}

/// Pseudo-observations, coefficient tables and pair sequences of K samples.
///
/// Everything here is independent of the penalty factor, so selections for
/// many values of `α` can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct PreparedSamples {
    pseudo: Vec<PseudoSample>,
    sizes: Vec<usize>,
    pairing: Pairing,
    // (ell, m, v_sequence, scale, n_eff) in pair-rank order
    pairs: Vec<(usize, usize, Vec<f64>, f64, f64)>,
}

impl PreparedSamples {
    pub fn new(samples: &[Sample], cfg: &TestConfig) -> Result<Self> {
        let pseudo = samples
            .iter()
            .map(|s| pseudo_observations(s, cfg.ties))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pseudo(pseudo, cfg)
    }

    pub fn from_pseudo(pseudo: Vec<PseudoSample>, cfg: &TestConfig) -> Result<Self> {
        cfg.validate()?;
        if pseudo.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two samples, got {}",
                pseudo.len()
            )));
        }
        let p = pseudo[0].p();
        if let Some(bad) = pseudo.iter().find(|ps| ps.p() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad.p() });
        }
        let sizes: Vec<usize> = pseudo.iter().map(PseudoSample::n).collect();
        if cfg.pairing == Pairing::Paired && sizes.iter().any(|&n| n != sizes[0]) {
            return Err(Error::UnequalSizes(sizes));
        }
        let tables = pseudo
            .iter()
            .map(|ps| coefficient_table(ps, cfg.d_max))
            .collect::<Result<Vec<_>>>()?;
        debug_assert_eq!(tables[0].len(), lattice_size(cfg.d_max, p).unwrap_or(0));
        let k = pseudo.len();
        let mut pairs = Vec::with_capacity(pair_count(k));
        for ell in 0..k {
            for m in ell + 1..k {
                let scale = pair_scale(sizes[ell], sizes[m], cfg.pairing)?;
                let seq = sequence_from_tables(&tables[ell], &tables[m], scale);
                let n_eff = dimension_n_eff(sizes[ell], sizes[m], cfg.pairing);
                pairs.push((ell, m, seq, scale, n_eff));
            }
        }
        Ok(Self {
            pseudo,
            sizes,
            pairing: cfg.pairing,
            pairs,
        })
    }

    pub fn k(&self) -> usize {
        self.pseudo.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn pseudo(&self) -> &[PseudoSample] {
        &self.pseudo
    }

    /// Pair statistics (in pair-rank order) with dimensions selected under `alpha`.
    pub fn pair_statistics(&self, alpha: f64) -> Vec<PairStatistics> {
        self.pairs
            .iter()
            .map(|(ell, m, seq, scale, n_eff)| PairStatistics {
                ell: *ell,
                m: *m,
                d_selected: select_dimension(seq, alpha * n_eff.ln()),
                v_sequence: seq.clone(),
                scale: *scale,
                n_eff: *n_eff,
            })
            .collect()
    }

    /// Penalty `p` on the number of pairs.
    pub fn pair_penalty(&self, alpha: f64) -> f64 {
        alpha * pair_log_size(&self.sizes, self.pairing)
    }

    /// Selected number of pairs under `alpha`.
    pub fn select_pair(&self, alpha: f64) -> usize {
        select_pair(&self.pair_statistics(alpha), self.pair_penalty(alpha))
    }

    /// Variance estimate for populations 1 and 2.
    pub fn sigma2_hat(&self) -> Result<f64> {
        match self.pairing {
            Pairing::Paired => variance_paired(&self.pseudo[0], &self.pseudo[1]),
            Pairing::Independent => variance_independent(&self.pseudo[0], &self.pseudo[1]),
        }
    }

    pub fn test(&self, cfg: &TestConfig) -> Result<TestResult> {
        cfg.validate()?;
        let alpha = cfg.alpha_penalty;
        let stats = self.pair_statistics(alpha);
        let cum = cumulative(&stats);
        let s = penalized_argmax(&cum, self.pair_penalty(alpha));
        let raw = cum[s - 1];
        let sigma2 = self.sigma2_hat()?;
        let (statistic, p_value, degenerate) = if sigma2 > 0.0 && sigma2.is_finite() {
            let v = raw / sigma2;
            (v, chi2_upper_tail(v)?, false)
        } else if raw == 0.0 {
            (0.0, 1.0, true)
        } else {
            return Err(Error::DegenerateVariance { statistic: raw });
        };
        let sel = &stats[s - 1];
        Ok(TestResult {
            statistic,
            raw_statistic: raw,
            s_selected: s,
            selected_pair: (sel.ell, sel.m),
            d_per_pair: stats
                .iter()
                .map(|st| PairDimension {
                    ell: st.ell,
                    m: st.m,
                    d: st.d_selected,
                })
                .collect(),
            sigma2_hat: sigma2,
            p_value,
            reject: p_value < cfg.level,
            degenerate,
            alpha_penalty: alpha,
            level: cfg.level,
        })
    }
}

/// Tests `C_1 = ⋯ = C_K`.
pub fn ksample_test(samples: &[Sample], cfg: &TestConfig) -> Result<TestResult> {
    PreparedSamples::new(samples, cfg)?.test(cfg)
}

/// Symmetric matrix of two-sample p-values with unit diagonal.
pub fn pairwise_anova(samples: &[Sample], cfg: &TestConfig) -> Result<Vec<Vec<f64>>> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least two samples, got {k}")));
    }
    let pseudo = samples
        .iter()
        .map(|s| pseudo_observations(s, cfg.ties))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![vec![1.0; k]; k];
    for ell in 0..k {
        for m in ell + 1..k {
            let prep = PreparedSamples::from_pseudo(vec![pseudo[ell].clone(), pseudo[m].clone()], cfg)?;
            let p = prep.test(cfg)?.p_value;
            out[ell][m] = p;
            out[m][ell] = p;
        }
    }
    Ok(out)
}
