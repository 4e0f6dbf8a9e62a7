//! K-sample tests for equality of copulas based on Legendre copula coefficients.
//!
//! The copula density of a `p`-variate distribution is expanded in tensor
//! products of orthonormal shifted Legendre polynomials. Samples are compared
//! through differences of their estimated coefficients, with the number of
//! coefficients and the pair of populations chosen by penalised selection.

pub mod clustering;
pub mod coeffs;
pub mod error;
pub mod harness;
pub mod index_lattice;
pub mod io;
pub mod ksample;
pub mod legendre;
pub mod quadrature;
pub mod samplers;
pub mod tuning;

pub use clustering::{cluster_copulas, cluster_copulas_tuned, ClusterPartition};
pub use coeffs::{
    coefficient_table, estimate_coefficient, pseudo_observations, spearman_rho, CoefficientTable,
    PseudoSample, Sample, TiesPolicy,
};
pub use error::{Error, Result};
pub use index_lattice::{cumulative_set, enumerate_shell, pair_rank, MultiIndex};
pub use ksample::{ksample_test, pairwise_anova, Pairing, PreparedSamples, TestConfig, TestResult};
pub use samplers::{sample_copula, CopulaFamily, CopulaSpec};
pub use tuning::{tune_alpha, TuningConfig, TuningResult};
pub use harness::{emit_report, run_experiment, ExperimentConfig, ExperimentReport, ReportFormat};
pub use io::{load_csv, CsvOptions};
