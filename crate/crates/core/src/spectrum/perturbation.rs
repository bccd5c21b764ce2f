//! Weak-coupling perturbative dispersion relation.

use serde::{Deserialize, Serialize};

use crate::crystal::CrystalParams;
use crate::error::{LatticeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationOrder {
    Zeroth,
    Second,
}

/// Default resonance guard, `1e-12·ω_f²`.
pub fn default_resonance_tolerance(params: &CrystalParams) -> f64 {
    1e-12 * params.omega_f * params.omega_f
}

/// `ω(q) ≈ ω_f q ∓ (ω₀/2)(−1)^q · (1 + 4λ²/(ω₀² − ω_f²))` (the bracket only
/// at second order).
pub fn weak_dispersion(params: &CrystalParams, q: usize, order: PerturbationOrder) -> Result<f64> {
    weak_dispersion_with_tolerance(params, q, order, default_resonance_tolerance(params))
}

pub fn weak_dispersion_with_tolerance(
    params: &CrystalParams,
    q: usize,
    order: PerturbationOrder,
    resonance_tolerance: f64,
) -> Result<f64> {
    params.validate()?;
    let alternating = if q % 2 == 0 { 1.0 } else { -1.0 };
    let binary = params.parity.binary_sign() * 0.5 * params.omega_0 * alternating;
    let factor = match order {
        PerturbationOrder::Zeroth => 1.0,
        PerturbationOrder::Second => {
            let lam = params.coupling;
            if lam == 0.0 {
                1.0
            } else {
                let denominator = params.omega_0 * params.omega_0 - params.omega_f * params.omega_f;
                if denominator.abs() <= resonance_tolerance {
                    return Err(LatticeError::ResonanceSingularity { denominator });
                }
                1.0 + 4.0 * lam * lam / denominator
            }
        }
    };
    Ok(params.omega_f * q as f64 + binary * factor)
}

/// For each site label `q`, the rank of `a_q` among the sorted diagonal.
///
/// At weak coupling the eigenvalue continuously connected to the bare level
/// `a_q` is the one with this rank, since levels of an unreduced tridiagonal
/// matrix never cross.
pub fn mode_ranks(params: &CrystalParams) -> Vec<usize> {
    let n = params.n_sites;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| params.site_energy(a).total_cmp(&params.site_energy(b)).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, q) in order.into_iter().enumerate() {
        rank[q] = r;
    }
    rank
}
