//! Orthonormal shifted Legendre polynomials on `[0, 1]`.
//!
//! `L_0 = 1`, `L_1(u) = sqrt(3) (2u - 1)` and for `n >= 1`
//!
//! ```text
//! (n + 1) L_{n+1}(u) = sqrt((2n+1)(2n+3)) (2u - 1) L_n(u) - n sqrt(2n+3) / sqrt(2n-1) L_{n-1}(u)
//! ```
//!
//! so that `∫ L_j L_k = δ_jk` over the unit interval.

use crate::error::{Error, Result};

fn check_unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain { value: u })
    }
}

/// Fills `out[k] = L_k(u)` for `k < out.len()` without domain checks.
#[inline]
pub(crate) fn fill(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let x = 2.0 * u - 1.0;
    out[1] = 3f64.sqrt() * x;
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        let a = ((2.0 * nf + 1.0) * (2.0 * nf + 3.0)).sqrt();
        let b = nf * (2.0 * nf + 3.0).sqrt() / (2.0 * nf - 1.0).sqrt();
        out[n + 1] = (a * x * out[n] - b * out[n - 1]) / (nf + 1.0);
    }
}

/// Returns `(L_0(u), ..., L_max_deg(u))` from one pass of the forward recurrence.
pub fn eval_all(max_deg: usize, u: f64) -> Result<Vec<f64>> {
    check_unit(u)?;
    let mut out = vec![0.0; max_deg + 1];
    fill(u, &mut out);
    Ok(out)
}

/// `L_n(u)`.
pub fn eval(n: usize, u: f64) -> Result<f64> {
    eval_all(n, u).map(|v| v[n])
}

/// `I_n(u) = ∫_0^u L_n(x) dx`.
///
/// Uses `I_n = (L_{n+1} / sqrt(2n+3) - L_{n-1} / sqrt(2n-1)) / (2 sqrt(2n+1))` for `n >= 1`,
/// which is the shifted form of `∫ P_n = (P_{n+1} - P_{n-1}) / (2n+1)`.
pub fn antiderivative(n: usize, u: f64) -> Result<f64> {
    check_unit(u)?;
    if n == 0 {
        return Ok(u);
    }
    let mut vals = vec![0.0; n + 2];
    fill(u, &mut vals);
    let nf = n as f64;
    let up = vals[n + 1] / (2.0 * nf + 3.0).sqrt();
    let down = vals[n - 1] / (2.0 * nf - 1.0).sqrt();
    Ok((up - down) / (2.0 * (2.0 * nf + 1.0).sqrt()))
}

/// `∏_i L_{j_i}(u_i)`.
pub fn tensor_product(j: &[usize], u: &[f64]) -> Result<f64> {
    if j.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: j.len(),
            got: u.len(),
        });
    }
    j.iter()
        .zip(u)
        .try_fold(1.0, |acc, (&deg, &x)| Ok(acc * eval(deg, x)?))
}

/// Upper bound of `|L_n|` on `[0, 1]`, attained at the endpoints.
pub fn sup_norm(n: usize) -> f64 {
    (2.0 * n as f64 + 1.0).sqrt()
}
