//! Cross-validation suites. Each check becomes one row of a pass/fail table.

use serde::Serialize;

use crate::crystal::{build_hamiltonian, CrystalParams, Parity};
use crate::error::Result;
use crate::modes::{
    bessel_mode_coefficients, default_depth, interior_residual, matched_mode, mode_coefficients, overlap,
    refine_proper_value,
};
use crate::spectrum::{
    dispersion_curve, mode_ranks, numerical_spectrum, strong_leading_mode, DispersionCurve, DispersionMethod,
    RESIDUAL_TOLERANCE,
};

pub const RWA_PAIRING_TOLERANCE: f64 = 5e-3;
pub const MODE_OVERLAP_TOLERANCE: f64 = 1e-6;
pub const BESSEL_AGREEMENT_TOLERANCE: f64 = 1e-6;
pub const BESSEL_MAX_INDEX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub subject: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckRow {
    /// Passes when `value < threshold`.
    pub fn below(check: &str, subject: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckRow { check: check.into(), subject: subject.into(), value, threshold, passed: value < threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(check: &str, subject: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckRow { check: check.into(), subject: subject.into(), value, threshold, passed: value > threshold }
    }
}

pub fn all_passed(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.passed)
}

/// The four discrete dispersion curves over modes `0..count`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub rwa: DispersionCurve,
    pub zeroth: DispersionCurve,
    pub second: DispersionCurve,
    pub oracle: DispersionCurve,
}

pub fn dispersion_table(params: &CrystalParams, count: usize) -> Result<DispersionTable> {
    Ok(DispersionTable {
        rwa: dispersion_curve(params, DispersionMethod::RwaExact, count)?,
        zeroth: dispersion_curve(params, DispersionMethod::PerturbZeroth, count)?,
        second: dispersion_curve(params, DispersionMethod::PerturbSecond, count)?,
        oracle: dispersion_curve(params, DispersionMethod::NumericalOracle, count)?,
    })
}

/// Per mode: RWA level within tolerance of the oracle, and second order
/// strictly closer to the oracle than zeroth order. The second-order row is
/// skipped for sites with a single neighbour (the Plus edge site and the
/// upper half of the lattice), where the shift is not meant to apply.
pub fn dispersion_checks(params: &CrystalParams, table: &DispersionTable) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let first = usize::from(params.parity == Parity::Plus);
    for q in 0..table.oracle.values.len() {
        let exact = table.oracle.values[q];
        let subject = format!("q={q}");
        rows.push(CheckRow::below(
            "rwa_pairing",
            subject.clone(),
            (table.rwa.values[q] - exact).abs(),
            RWA_PAIRING_TOLERANCE,
        ));
        if q < first || q >= params.n_sites / 2 {
            continue;
        }
        let e0 = (table.zeroth.values[q] - exact).abs();
        let e2 = (table.second.values[q] - exact).abs();
        rows.push(CheckRow::below("second_order_improves", subject, e2 - e0, 0.0));
    }
    rows
}

/// Residual, orthonormality and trace of the numerical eigendecomposition.
pub fn eigensolver_checks(params: &CrystalParams) -> Result<Vec<CheckRow>> {
    let op = build_hamiltonian(params)?;
    let spec = numerical_spectrum(&op)?;
    let scale = op.norm_inf().max(1.0);
    let subject = format!("n={}", op.dim());
    let trace: f64 = op.diagonal().iter().sum();
    let eig_sum: f64 = spec.eigenvalues().iter().sum();
    let sorted = spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]);
    Ok(vec![
        CheckRow::below("eigen_residual", subject.clone(), spec.max_residual(&op), RESIDUAL_TOLERANCE * scale),
        CheckRow::below("eigen_orthonormality", subject.clone(), spec.max_orthonormality_error(), 1e-10),
        CheckRow::below(
            "eigen_trace",
            subject.clone(),
            (trace - eig_sum).abs(),
            1e-12 * scale * op.dim() as f64,
        ),
        CheckRow::below("eigen_sorted", subject, if sorted { 0.0 } else { 1.0 }, 0.5),
    ])
}

/// Continued-fraction modes at the oracle eigenvalues of the lowest `count`
/// eigenpairs against the oracle eigenvectors.
pub fn mode_checks(params: &CrystalParams, count: usize, depth: Option<usize>, tol: f64) -> Result<(Vec<CheckRow>, bool)> {
    let op = build_hamiltonian(params)?;
    let spec = numerical_spectrum(&op)?;
    let n = params.n_sites;
    let depth = depth.unwrap_or_else(|| default_depth(n));
    let mut rows = Vec::new();
    let mut all_converged = true;
    for (q, &rank) in mode_ranks(params).iter().enumerate().filter(|(_, &r)| r < count) {
        let omega = spec.eigenvalues()[rank];
        let mode = matched_mode(params, omega, n, depth, tol)?;
        all_converged &= mode.converged;
        let subject = format!("q={q}");
        rows.push(CheckRow::above(
            "cf_overlap",
            subject.clone(),
            overlap(&mode.coefficients, spec.eigenvector(rank)),
            1.0 - MODE_OVERLAP_TOLERANCE,
        ));
        let unit = mode.into_normalized();
        rows.push(CheckRow::below(
            "cf_interior_residual",
            subject,
            interior_residual(params, &unit) / unit.max_abs(),
            1e-10 * omega.abs().max(1.0),
        ));
    }
    Ok((rows, all_converged))
}

/// Lattice used for the closed-form comparison at ω₀ = 0. Chosen so the
/// orders `j − ν` stay in the oscillatory range of the Bessel functions for
/// `j ≤ 20`.
pub fn bessel_reference_params() -> CrystalParams {
    CrystalParams { omega_f: 1.0, omega_0: 0.0, coupling: 20.0, parity: Parity::Plus, n_sites: 400 }
}

/// Bessel closed form against the continued-fraction mode at a certified
/// proper value near `target`, both normalized to `c_0 = 1`.
pub fn bessel_checks(params: &CrystalParams, target: f64) -> Result<Vec<CheckRow>> {
    let op = build_hamiltonian(params)?;
    let spec = numerical_spectrum(&op)?;
    let seed = spec
        .eigenvalues()
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(target);
    let depth = default_depth(params.n_sites);
    let proper = refine_proper_value(params, seed, depth, 1e-15)?;
    let n = BESSEL_MAX_INDEX + 1;
    let closed = bessel_mode_coefficients(params.omega_f, params.coupling, proper.omega, n)?;
    let cf = mode_coefficients(params, proper.omega, n, depth, 1e-15)?;
    let scale = closed.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let diff = closed
        .iter()
        .zip(&cf.coefficients)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let subject = format!("omega={:.12}", proper.omega);
    Ok(vec![
        CheckRow::below("proper_value_residual", subject.clone(), proper.residual, 1e-10),
        CheckRow::below("bessel_vs_cf", subject, diff / scale, BESSEL_AGREEMENT_TOLERANCE),
    ])
}

/// Interior recurrence `λ(U_{j−1} + U_{j+1}) = μU_j` of the Chebyshev
/// leading modes, relative to the largest entry.
pub fn chebyshev_checks(coupling: f64, mus: &[f64], n_coeffs: usize) -> Result<Vec<CheckRow>> {
    let params = CrystalParams { omega_f: 0.0, omega_0: 0.0, coupling, parity: Parity::Plus, n_sites: n_coeffs.max(2) };
    let mut rows = Vec::new();
    for &mu in mus {
        let u = strong_leading_mode(&params, mu, n_coeffs)?;
        let scale = u.iter().fold(0.0_f64, |m, x| m.max(x.abs())) * (mu.abs() + 2.0 * coupling);
        let worst = (1..n_coeffs.saturating_sub(1))
            .map(|j| (coupling * (u[j - 1] + u[j + 1]) - mu * u[j]).abs())
            .fold(0.0, f64::max);
        rows.push(CheckRow::below(
            "chebyshev_recurrence",
            format!("mu={mu}"),
            worst / scale,
            64.0 * f64::EPSILON,
        ));
    }
    Ok(rows)
}
