//! Exchangeable copula samplers parameterised by Kendall's τ.
//!
//! Elliptical families use correlated latent Gaussian (or Student) draws
//! with a single off-diagonal correlation. Archimedean families use the
//! frailty construction `U_c = ψ(E_c / V)` with `E_c ~ Exp(1)`:
//!
//! | family  | generator ψ(t)                        | frailty V               |
//! |---------|---------------------------------------|-------------------------|
//! | Clayton | `(1 + t)^(-1/θ)`                      | Gamma(1/θ)              |
//! | Gumbel  | `exp(-t^(1/θ))`                       | positive stable(1/θ)    |
//! | Frank   | `-log(1 - (1 - e^-θ) e^-t) / θ`       | log-series(1 - e^-θ)    |
//! | Joe     | `1 - (1 - e^-t)^(1/θ)`                | Sibuya(1/θ)             |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coeffs::Sample;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Largest τ used for the Archimedean families; `τ = 1` requests are clamped here.
pub const TAU_CLAMP: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gaussian,
    Student,
    Gumbel,
    Frank,
    Clayton,
    Joe,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 6] = [
        CopulaFamily::Gaussian,
        CopulaFamily::Student,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
        CopulaFamily::Clayton,
        CopulaFamily::Joe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Student => "student",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Joe => "joe",
        }
    }

    fn is_elliptical(self) -> bool {
        matches!(self, CopulaFamily::Gaussian | CopulaFamily::Student)
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gaus" | "normal" => Ok(CopulaFamily::Gaussian),
            "student" | "stud" | "t" => Ok(CopulaFamily::Student),
            "gumbel" | "gumb" => Ok(CopulaFamily::Gumbel),
            "frank" | "fran" => Ok(CopulaFamily::Frank),
            "clayton" | "clay" => Ok(CopulaFamily::Clayton),
            "joe" => Ok(CopulaFamily::Joe),
            other => Err(Error::InvalidArgument(format!("unknown copula family '{other}'"))),
        }
    }
}

/// A copula family at a given Kendall's τ in dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    pub tau: f64,
    pub p: usize,
    /// Degrees of freedom, used by the Student family only.
    pub df: f64,
}

impl CopulaSpec {
    pub const DEFAULT_DF: f64 = 4.0;

    pub fn new(family: CopulaFamily, tau: f64, p: usize) -> Result<Self> {
        let spec = Self {
            family,
            tau,
            p,
            df: Self::DEFAULT_DF,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_df(mut self, df: f64) -> Result<Self> {
        self.df = df;
        self.validate()?;
        Ok(self)
    }

    fn effective_tau(&self) -> f64 {
        if self.tau >= 1.0 && !self.family.is_elliptical() {
            TAU_CLAMP
        } else {
            self.tau
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {}", self.p)));
        }
        let tau = self.tau;
        let ok = if self.family.is_elliptical() {
            tau > -1.0 && tau < 1.0
        } else {
            tau > 0.0 && tau <= 1.0
        };
        if !ok || tau.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "tau = {tau} is outside the supported range for {}",
                self.family
            )));
        }
        if self.family.is_elliptical() {
            let rho = (PI * tau / 2.0).sin();
            if rho <= -1.0 / (self.p as f64 - 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "exchangeable correlation {rho} is not positive definite in dimension {}",
                    self.p
                )));
            }
        }
        if self.family == CopulaFamily::Student && !(self.df > 0.0 && self.df.is_finite()) {
            return Err(Error::InvalidArgument(format!("df must be positive, got {}", self.df)));
        }
        Ok(())
    }
}

/// Kendall's τ of the Frank copula with parameter `theta > 0`.
pub fn frank_tau(theta: f64) -> f64 {
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

/// Debye function `D_1(x) = (1/x) ∫_0^x t / (e^t − 1) dt`.
pub fn debye1(x: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let gl = RULE.get_or_init(|| GaussLegendre::new(16));
    let panels = x.abs().ceil().max(1.0) as usize;
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    gl.integrate_composite(0.0, x, panels, integrand) / x
}

/// Kendall's τ of the Joe copula with parameter `theta >= 1`.
pub fn joe_tau(theta: f64) -> f64 {
    // 1 − 4 Σ_k 1 / (k (θk + 2)(θ(k−1) + 2)), with an asymptotic tail beyond K terms
    const K: usize = 4000;
    let mut sum = 0.0;
    for k in (1..=K).rev() {
        let kf = k as f64;
        sum += 1.0 / (kf * (theta * kf + 2.0) * (theta * (kf - 1.0) + 2.0));
    }
    let n = K as f64 + 0.5;
    let tail = 1.0 / (2.0 * theta * theta * n * n) - (4.0 - theta) / (3.0 * theta.powi(3) * n.powi(3));
    1.0 - 4.0 * (sum + tail)
}

fn bisect<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Family parameter θ matching the requested Kendall's τ.
pub fn tau_to_param(spec: &CopulaSpec) -> Result<f64> {
    spec.validate()?;
    let tau = spec.effective_tau();
    if tau != spec.tau {
        log::warn!("tau = {} clamped to {} for the {} family", spec.tau, tau, spec.family);
    }
    Ok(match spec.family {
        CopulaFamily::Gaussian | CopulaFamily::Student => (PI * tau / 2.0).sin(),
        CopulaFamily::Clayton => 2.0 * tau / (1.0 - tau),
        CopulaFamily::Gumbel => 1.0 / (1.0 - tau),
        CopulaFamily::Frank => bisect(frank_tau, tau, 1e-9, 1.0),
        CopulaFamily::Joe => bisect(joe_tau, tau, 1.0, 2.0),
    })
}

/// Kendall's τ implied by a family parameter (inverse of [`tau_to_param`]).
pub fn param_to_tau(family: CopulaFamily, theta: f64) -> f64 {
    match family {
        CopulaFamily::Gaussian | CopulaFamily::Student => 2.0 / PI * theta.asin(),
        CopulaFamily::Clayton => theta / (theta + 2.0),
        CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
        CopulaFamily::Frank => frank_tau(theta),
        CopulaFamily::Joe => joe_tau(theta),
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Log of a Gamma(shape, 1) draw, stable for small shapes.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln();
    }
    // G_a = G_{a+1} · U^{1/a}
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    g.ln() + u.ln() / shape
}

/// Log of a positive stable draw with Laplace transform `exp(-t^a)`, `0 < a < 1`
/// (Kanter's representation).
fn ln_positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let theta = PI * rng.random::<f64>();
    let w: f64 = Exp1.sample(rng);
    let theta = theta.max(1e-300);
    (a * theta).sin().ln() - theta.sin().ln() / a + (1.0 - a) / a * (((1.0 - a) * theta).sin().ln() - w.ln())
}

/// Logarithmic series draw, `P(V = k) = -q^k / (k log(1 - q))` with `log(1 - q) = -theta`.
fn log_series<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let q = -(-theta).exp_m1();
    let v: f64 = rng.random();
    if v >= q {
        return 1.0;
    }
    let u: f64 = rng.random();
    // mixing parameter of the geometric component
    let r = -(-theta * u).exp_m1();
    if r <= 0.0 {
        return 1.0;
    }
    (1.0 + v.ln() / r.ln()).floor().max(1.0)
}

/// Sibuya draw, `P(V = k) = (-1)^{k+1} C(a, k)`, `0 < a < 1`.
fn sibuya<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    use libm::{lgamma as ln_gamma, tgamma as gamma};
    let u: f64 = rng.random();
    if u <= a {
        return 1.0;
    }
    let g1a = gamma(1.0 - a);
    let ginv = ((1.0 - u) * g1a).powf(-1.0 / a);
    let fl = ginv.floor();
    if ginv > 1.0 / f64::EPSILON {
        return fl;
    }
    // survival 1 − F(fl) = 1 / (fl · B(fl, 1 − a))
    let ln_beta = ln_gamma(fl) + ln_gamma(1.0 - a) - ln_gamma(fl + 1.0 - a);
    let survival = (-(fl.ln() + ln_beta)).exp();
    if 1.0 - u < survival {
        ginv.ceil()
    } else {
        fl.max(1.0)
    }
}

/// Standard normal vector with exchangeable correlation `rho`.
fn latent_normal_row<R: Rng + ?Sized>(rho: f64, rng: &mut R, out: &mut [f64]) {
    if rho >= 0.0 {
        let common: f64 = StandardNormal.sample(rng);
        let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
        for x in out.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *x = a * common + b * e;
        }
    } else {
        // Y = s (Z - c Z̄): corr = -t / (1 - t) with t = c(2 - c) / p
        let p = out.len() as f64;
        let t = -rho / (1.0 - rho);
        let c = 1.0 - (1.0 - p * t).max(0.0).sqrt();
        let s = 1.0 / (1.0 - t).sqrt();
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let mean = out.iter().sum::<f64>() / p;
        for x in out.iter_mut() {
            *x = s * (*x - c * mean);
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Draws `n` rows from the copula using `rng`.
pub fn sample_copula_with<R: Rng + ?Sized>(spec: &CopulaSpec, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let theta = tau_to_param(spec)?;
    let p = spec.p;
    let mut data = vec![0.0; n * p];
    match spec.family {
        CopulaFamily::Gaussian => {
            for row in data.chunks_exact_mut(p) {
                latent_normal_row(theta, rng, row);
                for x in row.iter_mut() {
                    *x = normal_cdf(*x);
                }
            }
        }
        CopulaFamily::Student => {
            use statrs::distribution::{ContinuousCDF, StudentsT};
            let t = StudentsT::new(0.0, 1.0, spec.df)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let chi = Gamma::new(spec.df / 2.0, 2.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for row in data.chunks_exact_mut(p) {
                latent_normal_row(theta, rng, row);
                let s: f64 = chi.sample(rng);
                let w = (s / spec.df).sqrt();
                for x in row.iter_mut() {
                    *x = t.cdf(*x / w);
                }
            }
        }
        CopulaFamily::Clayton => {
            for row in data.chunks_exact_mut(p) {
                let ln_v = ln_gamma_draw(1.0 / theta, rng);
                for x in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    // (1 + E/V)^(-1/θ)
                    *x = (-softplus(e.ln() - ln_v) / theta).exp();
                }
            }
        }
        CopulaFamily::Gumbel => {
            let a = 1.0 / theta;
            for row in data.chunks_exact_mut(p) {
                if a >= 1.0 {
                    for x in row.iter_mut() {
                        *x = rng.random::<f64>();
                    }
                    continue;
                }
                let ln_v = ln_positive_stable(a, rng);
                for x in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    // exp(-(E/V)^a)
                    *x = (-(a * (e.ln() - ln_v)).exp()).exp();
                }
            }
        }
        CopulaFamily::Frank => {
            let c = -(-theta).exp_m1();
            for row in data.chunks_exact_mut(p) {
                let v = log_series(theta, rng);
                for x in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *x = -(-c * (-e / v).exp()).ln_1p() / theta;
                }
            }
        }
        CopulaFamily::Joe => {
            let a = 1.0 / theta;
            for row in data.chunks_exact_mut(p) {
                let v = if a >= 1.0 { 1.0 } else { sibuya(a, rng) };
                for x in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    // 1 - (1 - e^{-E/V})^a
                    let inner = -(-e / v).exp_m1();
                    *x = -(a * inner.ln()).exp_m1();
                }
            }
        }
    }
    Sample::new(n, p, data)
}

/// Draws `n` rows with a ChaCha8 stream seeded by `seed`.
pub fn sample_copula(spec: &CopulaSpec, n: usize, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_copula_with(spec, n, &mut rng)
}
