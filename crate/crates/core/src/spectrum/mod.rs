//! Dispersion relations of the binary lattice, by four routes: the
//! rotating-wave closed form, weak-coupling perturbation, the strong-coupling
//! Chebyshev expansion, and a numerical eigensolver that serves as the oracle
//! for the other three.

pub mod eigen;
pub mod perturbation;
pub mod rwa;
pub mod strong;

use serde::{Deserialize, Serialize};

use crate::crystal::{build_hamiltonian, CrystalParams};
use crate::error::{LatticeError, Result};

pub use eigen::{numerical_spectrum, SpectralDecomposition, RESIDUAL_TOLERANCE};
pub use perturbation::{mode_ranks, weak_dispersion, weak_dispersion_with_tolerance, PerturbationOrder};
pub use rwa::{rabi_frequency, rwa_lattice_levels, rwa_spectrum, RwaLevel, RwaSpectrum};
pub use strong::{strong_first_order_correction, strong_leading_mode, StrongCorrection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionMethod {
    RwaExact,
    PerturbZeroth,
    PerturbSecond,
    StrongLeading,
    StrongFirstOrder,
    NumericalOracle,
}

impl DispersionMethod {
    pub fn column_name(self) -> &'static str {
        match self {
            DispersionMethod::RwaExact => "rwa_exact",
            DispersionMethod::PerturbZeroth => "perturb_zeroth",
            DispersionMethod::PerturbSecond => "perturb_second",
            DispersionMethod::StrongLeading => "strong_leading",
            DispersionMethod::StrongFirstOrder => "strong_first_order",
            DispersionMethod::NumericalOracle => "numerical_oracle",
        }
    }
}

/// `ω(q)` sampled at a set of mode labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub mode_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub method: DispersionMethod,
}

/// Dispersion curve for the discrete-label methods, for modes `q = 0..count`.
///
/// The mode label is the site whose bare level `a_q` the mode continues
/// from. The RWA and oracle eigenvalues are attached to labels by rank (see
/// [`mode_ranks`]), so all discrete curves line up column by column.
pub fn dispersion_curve(
    params: &CrystalParams,
    method: DispersionMethod,
    count: usize,
) -> Result<DispersionCurve> {
    let n = params.n_sites;
    if count > n {
        return Err(LatticeError::IndexOutOfRange { index: count, len: n });
    }
    let ranks = mode_ranks(params);
    let values = match method {
        DispersionMethod::PerturbZeroth | DispersionMethod::PerturbSecond => {
            let order = if method == DispersionMethod::PerturbZeroth {
                PerturbationOrder::Zeroth
            } else {
                PerturbationOrder::Second
            };
            (0..count).map(|q| weak_dispersion(params, q, order)).collect::<Result<Vec<_>>>()?
        }
        DispersionMethod::RwaExact => {
            let levels = rwa_lattice_levels(params, n)?;
            (0..count).map(|q| levels[ranks[q]]).collect()
        }
        DispersionMethod::NumericalOracle => {
            let spectrum = numerical_spectrum(&build_hamiltonian(params)?)?;
            (0..count).map(|q| spectrum.eigenvalues()[ranks[q]]).collect()
        }
        DispersionMethod::StrongLeading | DispersionMethod::StrongFirstOrder => {
            return Err(LatticeError::InvalidParameters(
                "strong-coupling curves are labelled by a continuous μ; use strong_curve".into(),
            ))
        }
    };
    Ok(DispersionCurve { mode_indices: (0..count).collect(), values, method })
}

/// Strong-coupling curve over a grid of continuous labels μ.
pub fn strong_curve(
    params: &CrystalParams,
    mus: &[f64],
    first_order: bool,
    k_max: usize,
) -> Result<DispersionCurve> {
    let values = if first_order {
        mus.iter()
            .map(|&mu| strong_first_order_correction(params, mu, k_max).map(|c| c.dispersion()))
            .collect::<Result<Vec<_>>>()?
    } else {
        if params.coupling == 0.0 {
            return Err(LatticeError::CouplingZero("the Chebyshev leading mode"));
        }
        mus.to_vec()
    };
    let method = if first_order {
        DispersionMethod::StrongFirstOrder
    } else {
        DispersionMethod::StrongLeading
    };
    Ok(DispersionCurve { mode_indices: (0..mus.len()).collect(), values, method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::Parity;

    #[test]
    fn curves_line_up() {
        let p = CrystalParams::new(1.0, 1.1, 0.01, Parity::Minus, 60).unwrap();
        let zeroth = dispersion_curve(&p, DispersionMethod::PerturbZeroth, 20).unwrap();
        let oracle = dispersion_curve(&p, DispersionMethod::NumericalOracle, 20).unwrap();
        let rwa = dispersion_curve(&p, DispersionMethod::RwaExact, 20).unwrap();
        for q in 0..20 {
            assert!((zeroth.values[q] - oracle.values[q]).abs() < 2e-3);
            assert!((rwa.values[q] - oracle.values[q]).abs() < 5e-3);
        }
        assert!(dispersion_curve(&p, DispersionMethod::StrongLeading, 3).is_err());
        assert!(dispersion_curve(&p, DispersionMethod::RwaExact, 61).is_err());
    }

    #[test]
    fn strong_curve_labels() {
        let p = CrystalParams::new(0.0, 0.0, 1.0, Parity::Plus, 10).unwrap();
        let c = strong_curve(&p, &[-1.0, 0.0, 1.0], true, 20).unwrap();
        assert_eq!(c.values, vec![-1.0, 0.0, 1.0]);
        assert_eq!(c.method, DispersionMethod::StrongFirstOrder);
    }
}
