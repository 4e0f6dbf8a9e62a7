//! Monte Carlo experiments: level, power and clustering recovery rates.
//!
//! An experiment is described by a flat `key = value` file:
//!
//! | key           | meaning                                                        |
//! |---------------|----------------------------------------------------------------|
//! | `design`      | identifier echoed in the report                                |
//! | `kind`        | `test` (rejection rates) or `cluster` (partition recovery)     |
//! | `p`           | dimension                                                      |
//! | `sizes`       | comma list; each entry `n` or `n1/n2/...` per population       |
//! | `families`    | comma list of families, one scenario each (with `taus`)        |
//! | `taus`        | per-population τ; `$` is replaced by each value of `sweep`     |
//! | `sweep`       | optional list of τ values substituted for `$`                  |
//! | `populations` | alternative to `families`/`taus`: `family:tau` per population   |
//! | `expected`    | cluster designs: groups separated by `|`, e.g. `0 | 1, 2`       |
//! | `replications`, `level`, `seed`, `pairing`, `alpha` (`tuned` or a number), |
//! | `dmax`, `df`, `tune_reps`, `tune_kprime`                                     |
//!
//! Lines starting with `#` are comments. With `alpha = tuned`, cluster designs
//! re-tune α for each test of the clustering loop
//! ([`cluster_copulas_tuned`](crate::clustering::cluster_copulas_tuned)).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_copulas, cluster_copulas_tuned};
use crate::coeffs::{Sample, TiesPolicy};
use crate::error::{Error, Result};
use crate::ksample::{ksample_test, Pairing, TestConfig};
use crate::samplers::{sample_copula_with, CopulaFamily, CopulaSpec};
use crate::tuning::{tune_alpha, TuningConfig};

const BUILTIN: &[(&str, &str)] = &[
    ("null5", include_str!("../designs/null5.cfg")),
    ("null10", include_str!("../designs/null10.cfg")),
    ("alt1", include_str!("../designs/alt1.cfg")),
    ("alt2", include_str!("../designs/alt2.cfg")),
    ("alt3", include_str!("../designs/alt3.cfg")),
    ("alt4", include_str!("../designs/alt4.cfg")),
    ("d1", include_str!("../designs/d1.cfg")),
    ("d2", include_str!("../designs/d2.cfg")),
    ("d3", include_str!("../designs/d3.cfg")),
    ("d4", include_str!("../designs/d4.cfg")),
    ("d5", include_str!("../designs/d5.cfg")),
    ("a2_5050", include_str!("../designs/a2_5050.cfg")),
    ("a2_50100", include_str!("../designs/a2_50100.cfg")),
    ("a2_10050", include_str!("../designs/a2_10050.cfg")),
    ("a2_100100", include_str!("../designs/a2_100100.cfg")),
];

/// Names of the designs shipped with the crate.
pub fn builtin_designs() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Config text of a shipped design.
pub fn builtin_design(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Test,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaChoice {
    Tuned,
    Fixed(f64),
}

/// One column of a report: the same populations under one family or τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub specs: Vec<CopulaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design_id: String,
    pub kind: DesignKind,
    pub k: usize,
    pub p: usize,
    /// Per-population sample sizes, one entry per row of the report.
    pub sizes: Vec<Vec<usize>>,
    pub scenarios: Vec<Scenario>,
    pub n_replications: usize,
    pub level: f64,
    pub seed: u64,
    pub pairing: Pairing,
    pub alpha: AlphaChoice,
    pub d_max: usize,
    pub tuning: TuningConfig,
    /// Target partition of cluster designs.
    pub expected: Option<Vec<Vec<usize>>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn split_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(format!("{key}: cannot parse '{v}'")))
}

/// Parses `key = value` lines.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: "config".into(),
            line: i + 1,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        out.insert(k.trim().to_ascii_lowercase(), v.trim().to_owned());
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Parses a config file, then applies `overrides` (same keys) on top.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = parse_key_values(text)?;
        for (k, v) in overrides {
            kv.insert(k.to_ascii_lowercase(), v.clone());
        }
        Self::from_map(&kv)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_design(name).ok_or_else(|| {
            bad(format!("unknown design '{name}'; available: {}", builtin_designs().join(", ")))
        })?;
        Self::parse(text, &[])
    }

    pub fn from_map(kv: &BTreeMap<String, String>) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "design", "kind", "p", "sizes", "families", "taus", "sweep", "populations", "expected",
            "replications", "level", "seed", "pairing", "alpha", "dmax", "df", "tune_reps",
            "tune_kprime",
        ];
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(bad(format!("unknown config key '{k}'")));
        }
        let get = |k: &str| kv.get(k).map(String::as_str);
        let req = |k: &str| get(k).ok_or_else(|| bad(format!("missing config key '{k}'")));

        let design_id = req("design")?.to_owned();
        let kind = match req("kind")?.to_ascii_lowercase().as_str() {
            "test" => DesignKind::Test,
            "cluster" => DesignKind::Cluster,
            other => return Err(bad(format!("kind must be 'test' or 'cluster', got '{other}'"))),
        };
        let p: usize = parse_num("p", req("p")?)?;
        let df: f64 = get("df").map_or(Ok(CopulaSpec::DEFAULT_DF), |v| parse_num("df", v))?;
        let spec = |fam: CopulaFamily, tau: f64| CopulaSpec::new(fam, tau, p).and_then(|s| s.with_df(df));

        let scenarios = if let Some(pops) = get("populations") {
            if get("families").is_some() || get("taus").is_some() {
                return Err(bad("use either 'populations' or 'families'/'taus', not both"));
            }
            let specs = split_list(pops)
                .into_iter()
                .map(|item| {
                    let (f, t) = item
                        .split_once(':')
                        .ok_or_else(|| bad(format!("population '{item}' is not family:tau")))?;
                    spec(f.parse()?, parse_num("populations", t)?)
                })
                .collect::<Result<Vec<_>>>()?;
            vec![Scenario {
                label: "mixed".into(),
                specs,
            }]
        } else {
            let families = split_list(req("families")?)
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<CopulaFamily>>>()?;
            let taus = split_list(req("taus")?);
            let sweep: Vec<Option<f64>> = match get("sweep") {
                Some(s) => split_list(s)
                    .into_iter()
                    .map(|t| parse_num("sweep", t).map(Some))
                    .collect::<Result<_>>()?,
                None => vec![None],
            };
            if taus.contains(&"$") != sweep[0].is_some() {
                return Err(bad("'$' in taus requires a sweep, and a sweep requires '$'"));
            }
            let mut out = Vec::new();
            for &fam in &families {
                for &sw in &sweep {
                    let specs = taus
                        .iter()
                        .map(|&t| {
                            let tau = if t == "$" { sw.expect("checked above") } else { parse_num("taus", t)? };
                            spec(fam, tau)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let label = match sw {
                        Some(t) => format!("{fam}@{t}"),
                        None => fam.to_string(),
                    };
                    out.push(Scenario { label, specs });
                }
            }
            out
        };
        let k = scenarios[0].specs.len();
        if k < 2 {
            return Err(bad("a design needs at least two populations"));
        }

        let sizes = split_list(req("sizes")?)
            .into_iter()
            .map(|entry| {
                let ns = entry
                    .split('/')
                    .map(|n| parse_num::<usize>("sizes", n))
                    .collect::<Result<Vec<_>>>()?;
                match ns.len() {
                    1 => Ok(vec![ns[0]; k]),
                    l if l == k => Ok(ns),
                    l => Err(bad(format!("size entry '{entry}' has {l} parts for {k} populations"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if sizes.is_empty() {
            return Err(bad("sizes is empty"));
        }

        let expected = match get("expected") {
            None => None,
            Some(e) => Some(
                e.split('|')
                    .map(|g| split_list(g).into_iter().map(|i| parse_num("expected", i)).collect())
                    .collect::<Result<Vec<Vec<usize>>>>()?,
            ),
        };
        if kind == DesignKind::Cluster && expected.is_none() {
            return Err(bad("cluster designs need an 'expected' partition"));
        }

        let alpha = match get("alpha").unwrap_or("tuned") {
            "tuned" => AlphaChoice::Tuned,
            v => AlphaChoice::Fixed(parse_num("alpha", v)?),
        };
        let mut tuning = TuningConfig::default();
        if let Some(v) = get("tune_reps") {
            tuning.n_reps = parse_num("tune_reps", v)?;
        }
        if let Some(v) = get("tune_kprime") {
            tuning.k_prime = parse_num("tune_kprime", v)?;
        }

        let cfg = Self {
            design_id,
            kind,
            k,
            p,
            sizes,
            scenarios,
            n_replications: get("replications").map_or(Ok(500), |v| parse_num("replications", v))?,
            level: get("level").map_or(Ok(0.05), |v| parse_num("level", v))?,
            seed: get("seed").map_or(Ok(0), |v| parse_num("seed", v))?,
            pairing: get("pairing").map_or(Ok(Pairing::Paired), str::parse)?,
            alpha,
            d_max: get("dmax").map_or(Ok(3), |v| parse_num("dmax", v))?,
            tuning,
            expected,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replications == 0 {
            return Err(bad("replications must be >= 1"));
        }
        if self.scenarios.iter().any(|s| s.specs.len() != self.k) {
            return Err(bad("every scenario needs the same number of populations"));
        }
        if self.sizes.iter().any(|s| s.len() != self.k || s.iter().any(|&n| n < 2)) {
            return Err(bad("every size entry needs one n >= 2 per population"));
        }
        if let Some(e) = &self.expected {
            let mut all: Vec<usize> = e.iter().flatten().copied().collect();
            all.sort_unstable();
            if all != (0..self.k).collect::<Vec<_>>() {
                return Err(bad("expected partition must cover populations 0..K exactly once"));
            }
        }
        self.test_config(1.0).validate()?;
        self.tuning.validate()
    }

    /// Test settings of the design at penalty factor `alpha`.
    pub fn test_config(&self, alpha: f64) -> TestConfig {
        TestConfig {
            d_max: self.d_max,
            alpha_penalty: alpha,
            pairing: self.pairing,
            level: self.level,
            ties: TiesPolicy::Average,
            ..TestConfig::default()
        }
    }
}

/// Seed of one replication, mixed from its coordinates.
pub fn replication_seed(base: u64, coords: &[u64]) -> u64 {
    // SplitMix64 finaliser applied after each coordinate
    let mut h = base;
    for &c in coords {
        h = h.wrapping_add(c).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Samples of one replication.
pub fn draw_replication(specs: &[CopulaSpec], sizes: &[usize], seed: u64) -> Result<(Vec<Sample>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = specs
        .iter()
        .zip(sizes)
        .map(|(s, &n)| sample_copula_with(s, n, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, rng.random()))
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    event: bool,
    n_clusters: usize,
    alpha: f64,
}

fn run_one(cfg: &ExperimentConfig, specs: &[CopulaSpec], sizes: &[usize], seed: u64) -> Result<Outcome> {
    let (samples, tune_seed) = draw_replication(specs, sizes, seed)?;
    let tcfg = cfg.tuning.clone().with_seed(tune_seed);
    let alpha = match cfg.alpha {
        AlphaChoice::Fixed(a) => a,
        AlphaChoice::Tuned => tune_alpha(&samples, &tcfg, &cfg.test_config(1.0))?.alpha_hat,
    };
    let tc = cfg.test_config(alpha);
    Ok(match cfg.kind {
        DesignKind::Test => Outcome {
            event: ksample_test(&samples, &tc)?.reject,
            n_clusters: 0,
            alpha,
        },
        DesignKind::Cluster => {
            let part = match cfg.alpha {
                AlphaChoice::Fixed(_) => cluster_copulas(&samples, &tc)?,
                AlphaChoice::Tuned => cluster_copulas_tuned(&samples, &tc, &tcfg)?,
            };
            let expected = canonical(cfg.expected.as_deref().unwrap_or(&[]));
            Outcome {
                event: part.canonical() == expected,
                n_clusters: part.n_clusters(),
                alpha,
            }
        }
    })
}

fn canonical(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g
        })
        .collect();
    out.sort();
    out
}

/// Aggregated outcome for one scenario and one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub design_id: String,
    pub scenario: String,
    /// Sample size, or sizes joined by `/` when they differ.
    pub n: String,
    pub replications: usize,
    /// Rejections (test designs) or exact partition recoveries (cluster designs).
    pub events: usize,
    pub rate: f64,
    /// Monte Carlo standard error `√(r(1 − r)/R)`.
    pub se: f64,
    pub mean_alpha: f64,
    /// Cluster designs: how many runs produced each number of clusters.
    #[serde(default)]
    pub cluster_counts: BTreeMap<usize, usize>,
}

impl ReportRow {
    pub fn new(design_id: &str, scenario: &str, n: String, replications: usize, events: usize) -> Self {
        let rate = events as f64 / replications as f64;
        Self {
            design_id: design_id.into(),
            scenario: scenario.into(),
            n,
            replications,
            events,
            rate,
            se: (rate * (1.0 - rate) / replications as f64).sqrt(),
            mean_alpha: 0.0,
            cluster_counts: BTreeMap::new(),
        }
    }

    /// Fraction of cluster-design runs that found exactly `c` clusters.
    pub fn cluster_rate(&self, c: usize) -> f64 {
        self.cluster_counts.get(&c).copied().unwrap_or(0) as f64 / self.replications as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub design_id: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    /// Wall-clock seconds; not serialised so that reports are reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

fn size_label(sizes: &[usize]) -> String {
    if sizes.iter().all(|&n| n == sizes[0]) {
        sizes[0].to_string()
    } else {
        sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("/")
    }
}

/// Runs every (scenario, size) cell of the design.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for (si, scen) in cfg.scenarios.iter().enumerate() {
        for (ni, sizes) in cfg.sizes.iter().enumerate() {
            let outcomes = (0..cfg.n_replications)
                .into_par_iter()
                .map(|r| {
                    let seed = replication_seed(cfg.seed, &[si as u64, ni as u64, r as u64]);
                    run_one(cfg, &scen.specs, sizes, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let events = outcomes.iter().filter(|o| o.event).count();
            let mut row = ReportRow::new(&cfg.design_id, &scen.label, size_label(sizes), cfg.n_replications, events);
            row.mean_alpha = outcomes.iter().map(|o| o.alpha).sum::<f64>() / outcomes.len() as f64;
            if cfg.kind == DesignKind::Cluster {
                for o in &outcomes {
                    *row.cluster_counts.entry(o.n_clusters).or_default() += 1;
                }
            }
            log::info!(
                "{} {} n={}: rate {:.4} ({}/{})",
                cfg.design_id,
                scen.label,
                row.n,
                row.rate,
                events,
                cfg.n_replications
            );
            rows.push(row);
        }
    }
    Ok(ExperimentReport {
        design_id: cfg.design_id.clone(),
        seed: cfg.seed,
        rows,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    /// Whitespace-separated blocks, one per scenario, readable by gnuplot.
    Dat,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "dat" | "gnuplot" => Ok(ReportFormat::Dat),
            other => Err(Error::UnsupportedFormat(other.into())),
        }
    }
}

const CSV_HEADER: &str = "design,scenario,n,replications,events,rate,se,mean_alpha,clusters";

fn counts_cell(c: &BTreeMap<usize, usize>) -> String {
    c.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(";")
}

/// Serialises a report. Rates and standard errors carry four decimals.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(report)?;
            out.push('\n');
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(','))?;
            for r in &report.rows {
                w.write_record([
                    r.design_id.clone(),
                    r.scenario.clone(),
                    r.n.clone(),
                    r.replications.to_string(),
                    r.events.to_string(),
                    format!("{:.4}", r.rate),
                    format!("{:.4}", r.se),
                    format!("{:.4}", r.mean_alpha),
                    counts_cell(&r.cluster_counts),
                ])?;
            }
            return w.into_inner().map_err(|e| Error::Io(e.into_error()));
        }
        ReportFormat::Dat => {
            writeln!(out, "# design {} seed {}", report.design_id, report.seed).ok();
            let mut scenarios: Vec<&str> = Vec::new();
            for r in &report.rows {
                if !scenarios.contains(&r.scenario.as_str()) {
                    scenarios.push(&r.scenario);
                }
            }
            for s in scenarios {
                writeln!(out, "\n\n# {s}\n# n rate se").ok();
                for r in report.rows.iter().filter(|r| r.scenario == s) {
                    writeln!(out, "{} {:.4} {:.4}", r.n, r.rate, r.se).ok();
                }
            }
        }
    }
    Ok(out.into_bytes())
}

/// Reads rows back from CSV produced by [`emit_report`].
pub fn read_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            path: "report".into(),
            line: 1,
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let perr = |m: &str| Error::Parse {
            path: "report".into(),
            line,
            message: m.into(),
        };
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| perr("bad number"));
        let int = |j: usize| rec[j].parse::<usize>().map_err(|_| perr("bad integer"));
        let mut counts = BTreeMap::new();
        for item in rec[8].split(';').filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once(':').ok_or_else(|| perr("bad cluster count"))?;
            counts.insert(
                k.parse().map_err(|_| perr("bad cluster count"))?,
                v.parse().map_err(|_| perr("bad cluster count"))?,
            );
        }
        rows.push(ReportRow {
            design_id: rec[0].to_owned(),
            scenario: rec[1].to_owned(),
            n: rec[2].to_owned(),
            replications: int(3)?,
            events: int(4)?,
            rate: num(5)?,
            se: num(6)?,
            mean_alpha: num(7)?,
            cluster_counts: counts,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, &[]).unwrap()
    }

    const TINY: &str = "design = tiny\nkind = test\np = 2\nsizes = 40, 60\nfamilies = frank, joe\n\
                        taus = 0.3, $\nsweep = 0.3, 0.7\nreplications = 12\nseed = 5\nalpha = 1\n";

    #[test]
    fn builtin_designs_parse() {
        for name in builtin_designs() {
            let cfg = ExperimentConfig::builtin(name).unwrap();
            assert_eq!(cfg.design_id, name);
        }
        let alt1 = ExperimentConfig::builtin("alt1").unwrap();
        assert_eq!((alt1.k, alt1.p, alt1.scenarios.len()), (5, 3, 6));
        assert_eq!(alt1.scenarios[0].specs[0].tau, 0.1);
        let a2 = ExperimentConfig::builtin("a2_50100").unwrap();
        assert_eq!(a2.sizes, vec![vec![50, 100]]);
        assert_eq!(a2.scenarios.len(), 54);
        assert_eq!(a2.scenarios[0].specs[1].df, 17.0);
        assert_eq!(a2.pairing, Pairing::Independent);
        let d1 = ExperimentConfig::builtin("d1").unwrap();
        assert_eq!(d1.expected, Some(vec![vec![0], vec![1, 2], vec![3, 4, 5]]));
        assert!(ExperimentConfig::builtin("nope").is_err());
    }

    #[test]
    fn sweep_labels_and_overrides() {
        let cfg = ExperimentConfig::parse(TINY, &[("seed".into(), "9".into()), ("level".into(), "0.1".into())]).unwrap();
        let labels: Vec<&str> = cfg.scenarios.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["frank@0.3", "frank@0.7", "joe@0.3", "joe@0.7"]);
        assert_eq!((cfg.seed, cfg.level), (9, 0.1));
        assert_eq!(cfg.alpha, AlphaChoice::Fixed(1.0));
    }

    #[test]
    fn config_errors() {
        for text in [
            "design = x\nkind = test\np = 2\nsizes = 10\nfamilies = frank\ntaus = 0.2, 0.3\nbogus = 1",
            "design = x\nkind = test\np = 2\nsizes = 10\nfamilies = frank\ntaus = 0.2, $",
            "design = x\nkind = test\np = 2\nsizes = 10/20/30\nfamilies = frank\ntaus = 0.2, 0.3",
            "design = x\nkind = cluster\np = 2\nsizes = 10\npopulations = frank:0.2, joe:0.3",
            "design = x\nkind = cluster\np = 2\nsizes = 10\npopulations = frank:0.2, joe:0.3\nexpected = 0 | 0",
            "design = x\nkind = test\np = 2\nsizes = 10\nfamilies = frank\ntaus = 0.2",
            "design x",
        ] {
            assert!(ExperimentConfig::parse(text, &[]).is_err(), "{text}");
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = small(TINY);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 8);
        for f in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Dat] {
            assert_eq!(emit_report(&a, f).unwrap(), emit_report(&b, f).unwrap());
        }
    }

    #[test]
    fn standard_error_matches_recount() {
        let cfg = small(TINY);
        let rep = run_experiment(&cfg).unwrap();
        for r in &rep.rows {
            let rate = r.events as f64 / r.replications as f64;
            assert_eq!(r.rate, rate);
            assert!((r.se - (rate * (1.0 - rate) / 12.0).sqrt()).abs() < 1e-15);
        }
        // recount one cell directly
        let row = &rep.rows[3];
        let scen = &cfg.scenarios[1];
        let events = (0..12)
            .filter(|&r| {
                let seed = replication_seed(cfg.seed, &[1, 1, r]);
                run_one(&cfg, &scen.specs, &cfg.sizes[1], seed).unwrap().event
            })
            .count();
        assert_eq!((row.scenario.as_str(), row.n.as_str()), ("frank@0.7", "60"));
        assert_eq!(row.events, events);
    }

    #[test]
    fn tuned_alpha_is_recorded() {
        let cfg = ExperimentConfig::parse(TINY, &[("alpha".into(), "tuned".into()), ("replications".into(), "3".into())])
            .unwrap();
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.rows.iter().all(|r| r.mean_alpha > 0.0));
    }

    #[test]
    fn empty_report_has_header_only() {
        let rep = ExperimentReport {
            design_id: "x".into(),
            seed: 0,
            rows: vec![],
            runtime_secs: 0.0,
        };
        let csv = String::from_utf8(emit_report(&rep, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert!(read_report_csv(&csv).unwrap().is_empty());
        let json: serde_json::Value = serde_json::from_slice(&emit_report(&rep, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(json["rows"], serde_json::json!([]));
    }

    #[test]
    fn one_row_has_four_decimals() {
        let rep = ExperimentReport {
            design_id: "x".into(),
            seed: 0,
            rows: vec![ReportRow::new("x", "gaussian", "100".into(), 3, 1)],
            runtime_secs: 0.0,
        };
        let csv = String::from_utf8(emit_report(&rep, ReportFormat::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "x,gaussian,100,3,1,0.3333,0.2722,0.0000,");
    }

    #[test]
    fn table_shaped_report_round_trips() {
        let families = ["gaussian", "student", "gumbel", "frank", "clayton", "joe"];
        let mut rows = Vec::new();
        for (i, n) in [50, 100, 200, 300].iter().enumerate() {
            for (j, f) in families.iter().enumerate() {
                let mut r = ReportRow::new("alt1", f, n.to_string(), 500, (37 * i + 53 * j + 150) % 501);
                r.mean_alpha = 1.25;
                rows.push(r);
            }
        }
        rows[0].cluster_counts = BTreeMap::from([(2, 10), (3, 490)]);
        let rep = ExperimentReport {
            design_id: "alt1".into(),
            seed: 1,
            rows,
            runtime_secs: 3.0,
        };
        let csv = String::from_utf8(emit_report(&rep, ReportFormat::Csv).unwrap()).unwrap();
        let back = read_report_csv(&csv).unwrap();
        assert_eq!(back.len(), rep.rows.len());
        for (a, b) in rep.rows.iter().zip(&back) {
            assert_eq!(a.rate, b.rate);
            assert_eq!(a.events, b.events);
            assert_eq!(a.cluster_counts, b.cluster_counts);
            assert_eq!((&a.scenario, &a.n), (&b.scenario, &b.n));
        }
        let json = emit_report(&rep, ReportFormat::Json).unwrap();
        let from_json: ExperimentReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(from_json.rows, rep.rows);
        assert!(matches!("xml".parse::<ReportFormat>(), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn cluster_design_counts() {
        let text = "design = c\nkind = cluster\np = 2\nsizes = 150\n\
                    populations = clayton:0.9, clayton:0.9, gaussian:0.1\nexpected = 0, 1 | 2\n\
                    replications = 8\nalpha = 1\nseed = 3\n";
        let rep = run_experiment(&small(text)).unwrap();
        let row = &rep.rows[0];
        assert_eq!(row.cluster_counts.values().sum::<usize>(), 8);
        assert!(row.events <= row.cluster_counts.get(&2).copied().unwrap_or(0));
    }
}
