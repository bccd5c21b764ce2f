use num_complex::Complex64;

use crate::error::{LatticeError, Result};

/// Allowed deviation of `‖c‖²` from one for observables that need a
/// normalized state.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Complex field amplitudes over the waveguides at one propagation time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl FieldState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || !time.is_finite() {
            return Err(LatticeError::InvalidParameters("field state must be finite".into()));
        }
        Ok(FieldState { amplitudes, time })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(LatticeError::NormViolation { norm_sqr: n });
        }
        let inv = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|c| *c *= inv);
        Ok(())
    }

    /// `|c_j|²` per site.
    pub fn intensities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn with_global_phase(mut self, phase: f64) -> Self {
        let z = Complex64::from_polar(1.0, phase);
        self.amplitudes.iter_mut().for_each(|c| *c *= z);
        self
    }
}

/// Unit amplitude at site `k`.
pub fn single_site_state(n_sites: usize, k: usize) -> Result<FieldState> {
    if k >= n_sites {
        return Err(LatticeError::IndexOutOfRange { index: k, len: n_sites });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
    amplitudes[k] = Complex64::new(1.0, 0.0);
    Ok(FieldState { amplitudes, time: 0.0 })
}

/// `(|k⟩ + e^{iφ}|k+1⟩)/√2`.
pub fn two_site_phase_state(n_sites: usize, k: usize, phi: f64) -> Result<FieldState> {
    if k + 1 >= n_sites {
        return Err(LatticeError::IndexOutOfRange { index: k + 1, len: n_sites });
    }
    if !phi.is_finite() {
        return Err(LatticeError::InvalidParameters("phase must be finite".into()));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
    amplitudes[k] = Complex64::new(r, 0.0);
    amplitudes[k + 1] = Complex64::from_polar(r, phi);
    Ok(FieldState { amplitudes, time: 0.0 })
}

/// Unnormalized inner product `⟨a|b⟩`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|⟨ψ(0)|ψ(t)⟩|²`.
pub fn fidelity(reference: &FieldState, current: &FieldState) -> Result<f64> {
    if reference.len() != current.len() {
        return Err(LatticeError::DimensionMismatch { expected: reference.len(), found: current.len() });
    }
    Ok(inner(&reference.amplitudes, &current.amplitudes).norm_sqr())
}

/// `Σ_j j·|c_j|²` of a normalized state.
pub fn center_of_mass(state: &FieldState) -> Result<f64> {
    let norm_sqr = state.norm_sqr();
    if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
        return Err(LatticeError::NormViolation { norm_sqr });
    }
    Ok(state.amplitudes.iter().enumerate().map(|(j, c)| j as f64 * c.norm_sqr()).sum())
}
