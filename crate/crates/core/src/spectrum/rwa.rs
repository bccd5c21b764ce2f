//! Closed-form spectrum of the rotating-wave (Jaynes-Cummings-like) limit.

use serde::Serialize;

use crate::crystal::{CrystalParams, Parity};
use crate::error::{LatticeError, Result};

/// One two-level manifold `{|n,e⟩, |n+1,g⟩}` of the RWA model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwaLevel {
    pub n: usize,
    pub energy_plus: f64,
    pub energy_minus: f64,
    pub rabi_frequency: f64,
    /// `α₊/β₊`; `None` when the coupling vanishes and the ratio is undefined.
    pub alpha_over_beta_plus: Option<f64>,
    pub alpha_over_beta_minus: Option<f64>,
}

impl RwaLevel {
    pub fn is_degenerate(&self) -> bool {
        self.alpha_over_beta_plus.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwaSpectrum {
    pub levels: Vec<RwaLevel>,
    /// Energy of the isolated `|0,g⟩` level, −ω₀/2.
    pub ground_energy: f64,
}

/// `Ω = sqrt(δ² + 4λ²)` with δ = ω_f − ω₀.
pub fn rabi_frequency(params: &CrystalParams) -> f64 {
    params.detuning().hypot(2.0 * params.coupling)
}

/// `E±,n = ω_f(n + 1/2) ± Ω/2` for `n = 0..=n_max`, plus the ground level.
pub fn rwa_spectrum(params: &CrystalParams, n_max: usize) -> Result<RwaSpectrum> {
    params.validate()?;
    let omega = rabi_frequency(params);
    let delta = params.detuning();
    let lam = params.coupling;
    let (plus, minus) = if lam > 0.0 {
        (Some((-delta + omega) / (2.0 * lam)), Some((-delta - omega) / (2.0 * lam)))
    } else {
        (None, None)
    };
    let levels = (0..=n_max)
        .map(|n| {
            let centre = params.omega_f * (n as f64 + 0.5);
            RwaLevel {
                n,
                energy_plus: centre + 0.5 * omega,
                energy_minus: centre - 0.5 * omega,
                rabi_frequency: omega,
                alpha_over_beta_plus: plus,
                alpha_over_beta_minus: minus,
            }
        })
        .collect();
    Ok(RwaSpectrum { levels, ground_energy: -0.5 * params.omega_0 })
}

/// RWA prediction for the lowest `count` eigenvalues of one parity chain,
/// ascending.
///
/// Sites `(2p, 2p+1)` of the `Minus` chain form manifold `n = 2p`. The
/// `Plus` chain starts with the isolated ground site and then pairs sites
/// `(2p+1, 2p+2)` into manifold `n = 2p+1`. Trailing unpaired sites of the
/// truncated lattice keep their bare energy.
pub fn rwa_lattice_levels(params: &CrystalParams, count: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.n_sites;
    if count > n {
        return Err(LatticeError::IndexOutOfRange { index: count, len: n });
    }
    let omega = rabi_frequency(params);
    let mut values = Vec::with_capacity(n);
    let mut site = 0;
    if params.parity == Parity::Plus {
        values.push(-0.5 * params.omega_0);
        site = 1;
    }
    while site + 1 < n {
        let centre = params.omega_f * (site as f64 + 0.5);
        values.push(centre - 0.5 * omega);
        values.push(centre + 0.5 * omega);
        site += 2;
    }
    if site < n {
        values.push(params.site_energy(site));
    }
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn resonant_manifold() {
        let p = CrystalParams::new(1.0, 1.0, 0.1, Parity::Minus, 10).unwrap();
        let s = rwa_spectrum(&p, 3).unwrap();
        let l0 = s.levels[0];
        assert_abs_diff_eq!(l0.rabi_frequency, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(l0.energy_plus, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(l0.energy_minus, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(l0.alpha_over_beta_plus.unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l0.alpha_over_beta_minus.unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(s.ground_energy, -0.5);
    }

    #[test]
    fn zero_coupling_is_flagged() {
        let p = CrystalParams::new(1.0, 0.8, 0.0, Parity::Plus, 10).unwrap();
        let s = rwa_spectrum(&p, 2).unwrap();
        let l2 = s.levels[2];
        assert!(l2.is_degenerate());
        assert_abs_diff_eq!(l2.energy_plus, 2.6, epsilon = 1e-14);
        assert_abs_diff_eq!(l2.energy_minus, 2.4, epsilon = 1e-14);
        assert!(s.levels.iter().all(|l| l.energy_plus.is_finite()));
    }

    #[test]
    fn invariants_hold() {
        let p = CrystalParams::new(1.0, 1.3, 0.2, Parity::Plus, 10).unwrap();
        for l in rwa_spectrum(&p, 5).unwrap().levels {
            assert!(l.rabi_frequency >= p.detuning().abs());
            assert_abs_diff_eq!(l.energy_plus - l.energy_minus, l.rabi_frequency, epsilon = 1e-14);
        }
    }

    #[test]
    fn lattice_levels_follow_parity_chain() {
        let p = CrystalParams::new(1.0, 1.1, 0.0, Parity::Plus, 5).unwrap();
        let v = rwa_lattice_levels(&p, 5).unwrap();
        // λ = 0: the prediction is the sorted bare diagonal.
        let expected = [-0.55, 1.45, 1.55, 3.45, 3.55];
        for (a, b) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let m = p.with_parity(Parity::Minus);
        let v = rwa_lattice_levels(&m, 5).unwrap();
        for (a, b) in v.iter().zip([0.45, 0.55, 2.45, 2.55, 4.55]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert!(rwa_lattice_levels(&m, 6).is_err());
    }
}
