//! Strong-coupling treatment: the pure-coupling chain is the leading-order
//! operator, whose modes are Chebyshev polynomials of the second kind, and
//! the site energies enter as a first-order correction.

use serde::Serialize;

use crate::crystal::CrystalParams;
use crate::error::{LatticeError, Result};

/// Rescale threshold for the running sums in the correction ratio.
const RESCALE_ABOVE: f64 = 1e200;

/// `[U_0(x), …, U_{n−1}(x)]` with `x = μ/(2λ)`. For `|μ| > 2λ` the entries
/// grow exponentially.
pub fn strong_leading_mode(params: &CrystalParams, mu: f64, n_coeffs: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if params.coupling == 0.0 {
        return Err(LatticeError::CouplingZero("the Chebyshev leading mode"));
    }
    let two_x = mu / params.coupling;
    let mut out = Vec::with_capacity(n_coeffs);
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..n_coeffs {
        out.push(cur);
        let next = two_x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// Truncated ratio `Σ_k U_k(x)²·a_k / Σ_k U_k(x)²` for `k = 0..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongCorrection {
    pub mu: f64,
    pub k_max: usize,
    pub value: f64,
    /// Same ratio truncated at `k_max / 2`.
    pub half_value: f64,
    /// `|value − half_value|`.
    pub delta: f64,
    /// `delta ≤ 1e-8·max(1, |value|)`.
    pub converged: bool,
}

impl StrongCorrection {
    /// `μ` plus the correction.
    pub fn dispersion(&self) -> f64 {
        self.mu + self.value
    }
}

pub fn strong_first_order_correction(
    params: &CrystalParams,
    mu: f64,
    k_max: usize,
) -> Result<StrongCorrection> {
    params.validate()?;
    if params.coupling == 0.0 {
        return Err(LatticeError::CouplingZero("the strong-coupling correction"));
    }
    if k_max < 1 {
        return Err(LatticeError::InvalidParameters("k_max must be at least 1".into()));
    }
    let two_x = mu / params.coupling;
    let half = k_max / 2;
    let (mut prev, mut cur) = (0.0_f64, 1.0_f64);
    let (mut num, mut den) = (0.0_f64, 0.0_f64);
    let mut half_value = f64::NAN;
    for k in 0..=k_max {
        let w = cur * cur;
        num += w * params.site_energy(k);
        den += w;
        if k == half {
            half_value = num / den;
        }
        if den > RESCALE_ABOVE || cur.abs() > RESCALE_ABOVE.sqrt() {
            let s = 1.0 / RESCALE_ABOVE.sqrt();
            num *= s * s;
            den *= s * s;
            cur *= s;
            prev *= s;
        }
        let next = two_x * cur - prev;
        prev = cur;
        cur = next;
    }
    let value = num / den;
    let delta = (value - half_value).abs();
    Ok(StrongCorrection {
        mu,
        k_max,
        value,
        half_value,
        delta,
        converged: delta <= 1e-8 * value.abs().max(1.0),
    })
}
