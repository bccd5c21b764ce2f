//! Lattice parameterization and the truncated tridiagonal operators H₊ / H₋.
//!
//! Site `j` of the lattice carries the propagation constant
//!
//! ```text
//! a_j = ω_f·j ∓ (ω₀/2)·(−1)^j
//! ```
//!
//! with the upper sign for [`Parity::Plus`], and neighbouring sites are
//! coupled with strength λ. The semi-infinite lattice is truncated at
//! `n_sites` with a hard edge after the last site.

use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};

/// Which parity chain (and hence which photonic crystal) is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Plus,
    Minus,
}

impl Parity {
    /// Sign multiplying `(ω₀/2)(−1)^j` on the diagonal: −1 for `Plus`, +1 for `Minus`.
    pub fn binary_sign(self) -> f64 {
        match self {
            Parity::Plus => -1.0,
            Parity::Minus => 1.0,
        }
    }

    pub fn flipped(self) -> Parity {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }
}

/// Physical parameters of one crystal. Frequencies are in units of ω_f
/// whenever ω_f > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    pub omega_f: f64,
    pub omega_0: f64,
    pub coupling: f64,
    pub parity: Parity,
    pub n_sites: usize,
}

impl CrystalParams {
    pub fn new(
        omega_f: f64,
        omega_0: f64,
        coupling: f64,
        parity: Parity,
        n_sites: usize,
    ) -> Result<Self> {
        let params = CrystalParams { omega_f, omega_0, coupling, parity, n_sites };
        params.validate()?;
        Ok(params)
    }

    /// Returns every violated invariant, or an empty list.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in [
            ("omega_f", self.omega_f),
            ("omega_0", self.omega_0),
            ("coupling", self.coupling),
        ] {
            if !value.is_finite() {
                out.push(format!("{name} must be finite (got {value})"));
            } else if value < 0.0 {
                out.push(format!("{name} must be non-negative (got {value})"));
            }
        }
        if self.n_sites < 2 {
            out.push(format!("n_sites must be at least 2 (got {})", self.n_sites));
        }
        if out.is_empty() && self.omega_f == 0.0 && self.omega_0 == 0.0 && self.coupling == 0.0 {
            out.push("at least one of omega_f, omega_0, coupling must be positive".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(LatticeError::InvalidParameters(v.join("; ")))
        }
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn with_sites(mut self, n_sites: usize) -> Self {
        self.n_sites = n_sites;
        self
    }

    /// Detuning δ = ω_f − ω₀.
    pub fn detuning(&self) -> f64 {
        self.omega_f - self.omega_0
    }

    /// `a_j` for any `j`, including sites beyond the truncation. The
    /// continued fractions of the semi-infinite problem need those.
    pub fn site_energy(&self, j: usize) -> f64 {
        let alternating = if j % 2 == 0 { 1.0 } else { -1.0 };
        self.omega_f * j as f64 + self.parity.binary_sign() * (0.5 * self.omega_0) * alternating
    }
}

/// `a_j` for a site of the truncated lattice.
pub fn diagonal_entry(params: &CrystalParams, j: usize) -> Result<f64> {
    if j >= params.n_sites {
        return Err(LatticeError::IndexOutOfRange { index: j, len: params.n_sites });
    }
    Ok(params.site_energy(j))
}

/// Real symmetric tridiagonal matrix. A single off-diagonal array serves
/// both bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diagonal: Vec<f64>,
    offdiagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>, offdiagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(LatticeError::InvalidParameters("operator must have at least one site".into()));
        }
        if offdiagonal.len() + 1 != diagonal.len() {
            return Err(LatticeError::DimensionMismatch {
                expected: diagonal.len() - 1,
                found: offdiagonal.len(),
            });
        }
        if diagonal.iter().chain(&offdiagonal).any(|x| !x.is_finite()) {
            return Err(LatticeError::InvalidParameters("operator entries must be finite".into()));
        }
        Ok(TridiagonalOperator { diagonal, offdiagonal })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn offdiagonal(&self) -> &[f64] {
        &self.offdiagonal
    }

    /// Entry `(i, j)` of the dense matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diagonal[i]
        } else if i + 1 == j {
            self.offdiagonal[i]
        } else if j + 1 == i {
            self.offdiagonal[j]
        } else {
            0.0
        }
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i].abs();
                if i > 0 {
                    s += self.offdiagonal[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.offdiagonal[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// `out = H·x` for real vectors.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut s = self.diagonal[i] * x[i];
            if i > 0 {
                s += self.offdiagonal[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.offdiagonal[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Dense row-major copy, for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Builds the N×N operator with diagonal `a_j` and uniform coupling λ.
pub fn build_hamiltonian(params: &CrystalParams) -> Result<TridiagonalOperator> {
    params.validate()?;
    let diagonal = (0..params.n_sites).map(|j| params.site_energy(j)).collect();
    let offdiagonal = vec![params.coupling; params.n_sites - 1];
    TridiagonalOperator::new(diagonal, offdiagonal)
}
