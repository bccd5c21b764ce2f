//! Normal modes of the semi-infinite lattice from the three-term recurrence
//!
//! ```text
//! (a_0 − ω)c_0 + λc_1 = 0
//! (a_j − ω)c_j + λ(c_{j−1} + c_{j+1}) = 0
//! ```
//!
//! The ratios `s_j = c_{j+1}/c_j` obey the descending continued fraction
//! `s_j = λ / (ω − a_{j+1} − λ·s_{j+1})`, evaluated here bottom-up from a
//! zero tail. The interior rows hold for any ω; ω is a proper value when the
//! boundary row holds as well, which is what [`boundary_residual`] measures.
//!
//! For ω₀ = 0 the recurrence is solved in closed form by Bessel functions,
//! see [`bessel_mode_coefficients`].

use serde::Serialize;

use crate::crystal::CrystalParams;
use crate::error::{LatticeError, Result};
use crate::special::bessel_jy;

/// Relative pole guard: a denominator below `POLE_GUARD·max(1, |ω|)` is a pole.
pub const POLE_GUARD: f64 = 1e-14;

/// Default continued-fraction depth for a mode with `n_coeffs` coefficients.
pub fn default_depth(n_coeffs: usize) -> usize {
    4 * n_coeffs + 200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionValue {
    pub value: f64,
    pub converged: bool,
    pub depth_used: usize,
}

/// Coefficients `c_j` of one normal mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeVector {
    pub omega: f64,
    pub coefficients: Vec<f64>,
    /// Ratios `s_j` for `j ≥ matching_site` the coefficients were built
    /// from; empty for modes imported from elsewhere.
    pub ratios: Vec<f64>,
    /// Site normalized to one; the boundary for plain continued-fraction modes.
    pub matching_site: usize,
    pub normalized: bool,
    pub depth_used: usize,
    pub converged: bool,
}

impl ModeVector {
    /// Wraps externally computed coefficients, e.g. an oracle eigenvector.
    pub fn from_coefficients(omega: f64, coefficients: Vec<f64>) -> Self {
        let norm_sqr: f64 = coefficients.iter().map(|c| c * c).sum();
        ModeVector {
            omega,
            normalized: (norm_sqr - 1.0).abs() <= 1e-12,
            coefficients,
            ratios: Vec::new(),
            matching_site: 0,
            depth_used: 0,
            converged: true,
        }
    }

    pub fn normalize(&mut self) {
        let norm = self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            self.coefficients.iter_mut().for_each(|c| *c /= norm);
            self.normalized = true;
        }
    }

    pub fn into_normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn check_coupling(params: &CrystalParams, what: &'static str) -> Result<()> {
    params.validate()?;
    if params.coupling == 0.0 {
        return Err(LatticeError::CouplingZero(what));
    }
    Ok(())
}

/// One bottom-up evaluation with tail `s_{j+depth} = 0`.
fn evaluate_fraction(params: &CrystalParams, omega: f64, j: usize, depth: usize, guard: f64) -> Result<f64> {
    let lam = params.coupling;
    let mut s = 0.0;
    for level in (j..j + depth).rev() {
        let denominator = omega - params.site_energy(level + 1) - lam * s;
        if !(denominator.abs() >= guard) {
            return Err(LatticeError::Pole { site: level + 1, denominator });
        }
        s = lam / denominator;
    }
    Ok(s)
}

/// `s_j` by the continued fraction, at depths 1, 2, 4, … capped at `depth`.
/// Stops once two successive depths differ by less than `tol`; otherwise
/// returns the full-depth value flagged as not converged.
pub fn continued_fraction_ratio(
    params: &CrystalParams,
    omega: f64,
    j: usize,
    depth: usize,
    tol: f64,
) -> Result<FractionValue> {
    check_coupling(params, "the continued fraction")?;
    if depth < 1 {
        return Err(LatticeError::InvalidParameters("continued-fraction depth must be at least 1".into()));
    }
    let guard = POLE_GUARD * omega.abs().max(1.0);
    let mut previous: Option<f64> = None;
    let mut d = 1;
    loop {
        let at_cap = d >= depth;
        let d_eval = d.min(depth);
        match evaluate_fraction(params, omega, j, d_eval, guard) {
            Ok(value) => {
                if let Some(p) = previous {
                    if (value - p).abs() < tol {
                        return Ok(FractionValue { value, converged: true, depth_used: d_eval });
                    }
                }
                if at_cap {
                    return Ok(FractionValue { value, converged: false, depth_used: d_eval });
                }
                previous = Some(value);
            }
            // A shallow truncation may land on a pole the full fraction avoids.
            Err(e) if at_cap => return Err(e),
            Err(_) => previous = None,
        }
        d *= 2;
    }
}

/// `c_0 = 1`, `c_{j+1} = c_j·s_j`, unnormalized.
pub fn mode_coefficients(
    params: &CrystalParams,
    omega: f64,
    n_coeffs: usize,
    depth: usize,
    tol: f64,
) -> Result<ModeVector> {
    check_coupling(params, "the continued-fraction mode")?;
    if n_coeffs == 0 {
        return Err(LatticeError::InvalidParameters("a mode needs at least one coefficient".into()));
    }
    let mut coefficients = Vec::with_capacity(n_coeffs);
    let mut ratios = Vec::with_capacity(n_coeffs - 1);
    let mut depth_used = 0;
    let mut converged = true;
    coefficients.push(1.0);
    for j in 0..n_coeffs - 1 {
        let s = continued_fraction_ratio(params, omega, j, depth, tol)?;
        depth_used = depth_used.max(s.depth_used);
        converged &= s.converged;
        ratios.push(s.value);
        coefficients.push(coefficients[j] * s.value);
    }
    Ok(ModeVector { omega, coefficients, ratios, matching_site: 0, normalized: false, depth_used, converged })
}

/// Site below `limit` whose bare level lies closest to `omega`.
pub fn nearest_site(params: &CrystalParams, omega: f64, limit: usize) -> usize {
    (0..limit.max(1))
        .min_by(|&a, &b| {
            let da = (params.site_energy(a) - omega).abs();
            let db = (params.site_energy(b) - omega).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0)
}

/// Ascending ratios `r_j = c_{j−1}/c_j` for `j = 1..=m`, from the boundary
/// row: `r_1 = λ/(ω − a_0)`, `r_{j+1} = λ/(ω − a_j − λ·r_j)`.
fn ascending_ratios(params: &CrystalParams, omega: f64, m: usize) -> Result<Vec<f64>> {
    let lam = params.coupling;
    let guard = POLE_GUARD * omega.abs().max(1.0);
    let mut out = Vec::with_capacity(m);
    let mut r = 0.0;
    for j in 0..m {
        let den = omega - params.site_energy(j) - lam * r;
        if !(den.abs() >= guard) {
            return Err(LatticeError::Pole { site: j, denominator: den });
        }
        r = lam / den;
        out.push(r);
    }
    Ok(out)
}

/// Mode with `c_m = 1` at the site `m` whose bare level is nearest ω:
/// continued-fraction ratios above `m`, ascending ratios off the boundary
/// row below it. Each side runs the recurrence in its stable direction, so
/// modes with negligible weight at the boundary keep full accuracy, which
/// the `c_0 = 1` construction of [`mode_coefficients`] cannot offer.
pub fn matched_mode(
    params: &CrystalParams,
    omega: f64,
    n_coeffs: usize,
    depth: usize,
    tol: f64,
) -> Result<ModeVector> {
    check_coupling(params, "the continued-fraction mode")?;
    if n_coeffs == 0 {
        return Err(LatticeError::InvalidParameters("a mode needs at least one coefficient".into()));
    }
    let m = nearest_site(params, omega, n_coeffs);
    let lower = ascending_ratios(params, omega, m)?;
    let mut coefficients = vec![0.0; n_coeffs];
    coefficients[m] = 1.0;
    for j in (1..=m).rev() {
        coefficients[j - 1] = coefficients[j] * lower[j - 1];
    }
    let mut ratios = Vec::with_capacity(n_coeffs - 1 - m);
    let mut depth_used = 0;
    let mut converged = true;
    for j in m..n_coeffs - 1 {
        let s = continued_fraction_ratio(params, omega, j, depth, tol)?;
        depth_used = depth_used.max(s.depth_used);
        converged &= s.converged;
        ratios.push(s.value);
        coefficients[j + 1] = coefficients[j] * s.value;
    }
    Ok(ModeVector { omega, coefficients, ratios, matching_site: m, normalized: false, depth_used, converged })
}

/// Same as [`mode_coefficients`] with the default depth and tolerance.
pub fn default_mode(params: &CrystalParams, omega: f64, n_coeffs: usize) -> Result<ModeVector> {
    mode_coefficients(params, omega, n_coeffs, default_depth(n_coeffs), 1e-15)
}

/// The weak-coupling shortcut: every ratio cut after its first level,
/// `s_j = λ/(ω − a_{j+1})`.
pub fn weak_shortcut_mode(params: &CrystalParams, omega: f64, n_coeffs: usize) -> Result<ModeVector> {
    mode_coefficients(params, omega, n_coeffs, 1, 0.0)
}

/// `|(a_0 − ω)c_0 + λc_1| / max(1, |ω|)`.
pub fn boundary_residual(params: &CrystalParams, mode: &ModeVector) -> f64 {
    let c0 = mode.coefficients.first().copied().unwrap_or(0.0);
    let c1 = mode.coefficients.get(1).copied().unwrap_or(0.0);
    ((params.site_energy(0) - mode.omega) * c0 + params.coupling * c1).abs() / mode.omega.abs().max(1.0)
}

/// `max_j |(a_j − ω)c_j + λ(c_{j−1} + c_{j+1})|` over interior rows
/// `1 ≤ j ≤ n−2`.
pub fn interior_residual(params: &CrystalParams, mode: &ModeVector) -> f64 {
    let c = &mode.coefficients;
    (1..c.len().saturating_sub(1))
        .map(|j| {
            ((params.site_energy(j) - mode.omega) * c[j] + params.coupling * (c[j - 1] + c[j + 1])).abs()
        })
        .fold(0.0, f64::max)
}

/// `|⟨a, b⟩| / (‖a‖‖b‖)` over the common prefix.
pub fn overlap(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let dot: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum();
    let na = a[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProperValue {
    pub omega: f64,
    pub matching_site: usize,
    /// Row-function magnitude at `omega` over `max(1, |ω|)`.
    pub residual: f64,
    pub iterations: usize,
}

/// Row function at the matching site `m`:
/// `(a_m − ω) + λ·(c_{m−1}/c_m + c_{m+1}/c_m)`, with the lower ratio from the
/// upward recurrence off the boundary row and the upper one from the
/// continued fraction. Zero exactly at a proper value.
fn matching_function(params: &CrystalParams, m: usize, omega: f64, depth: usize, tol: f64) -> Result<f64> {
    let r = ascending_ratios(params, omega, m)?.last().copied().unwrap_or(0.0);
    let s = continued_fraction_ratio(params, omega, m, depth, tol)?.value;
    Ok(params.site_energy(m) - omega + params.coupling * (r + s))
}

/// Certifies a proper value near `seed` (typically an oracle eigenvalue of
/// the truncated lattice) with secant steps on the row function at the site
/// whose bare level lies closest to the seed. Matching there keeps the
/// function well scaled for modes localized away from the boundary.
pub fn refine_proper_value(params: &CrystalParams, seed: f64, depth: usize, tol: f64) -> Result<ProperValue> {
    check_coupling(params, "the proper-value search")?;
    let m = nearest_site(params, seed, depth);
    let f = |w: f64| matching_function(params, m, w, depth, tol);
    let scale = seed.abs().max(1.0);
    let mut w0 = seed;
    let mut f0 = f(w0)?;
    let mut w1 = seed + 1e-7 * scale;
    let mut f1 = f(w1)?;
    let mut iterations = 0;
    while iterations < 60 && f1 != 0.0 && f1 != f0 {
        iterations += 1;
        let w2 = w1 - f1 * (w1 - w0) / (f1 - f0);
        if !w2.is_finite() {
            break;
        }
        let step = (w2 - w1).abs();
        w0 = w1;
        f0 = f1;
        w1 = w2;
        f1 = f(w1)?;
        if step <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    let (omega, fv) = if f1.abs() <= f0.abs() { (w1, f1) } else { (w0, f0) };
    Ok(ProperValue { omega, matching_site: m, residual: fv.abs() / omega.abs().max(1.0), iterations })
}

/// Closed form for ω₀ = 0 with `x = 2λ/ω_f`, `ν = ω/ω_f`:
///
/// ```text
/// c_j = (π/ω_f)·(−1)^j·{ Y_{j−ν}(x)·[ω·J_{−ν}(x) + λ·J_{1−ν}(x)]
///                       − J_{j−ν}(x)·[ω·Y_{−ν}(x) + λ·Y_{1−ν}(x)] }
/// ```
///
/// This is the combination of ordinary Bessel functions at the negative
/// argument −x rewritten through `C_μ(−x) ∝ (−1)^j C_{j−ν}(x)`; the
/// brackets are the boundary row, so `c_0 = 1` up to rounding.
pub fn bessel_mode_coefficients(omega_f: f64, coupling: f64, omega: f64, n_coeffs: usize) -> Result<Vec<f64>> {
    if !(omega_f > 0.0) || !omega_f.is_finite() || !omega.is_finite() {
        return Err(LatticeError::InvalidParameters(
            "the Bessel closed form needs a finite omega_f > 0".into(),
        ));
    }
    if !(coupling > 0.0) || !coupling.is_finite() {
        return Err(LatticeError::CouplingZero("the Bessel closed form"));
    }
    let x = 2.0 * coupling / omega_f;
    let nu = omega / omega_f;
    let (j0, y0) = bessel_jy(-nu, x)?;
    let (j1, y1) = bessel_jy(1.0 - nu, x)?;
    let a = omega * j0 + coupling * j1;
    let b = omega * y0 + coupling * y1;
    let prefactor = std::f64::consts::PI / omega_f;
    (0..n_coeffs)
        .map(|j| {
            let (jj, yj) = bessel_jy(j as f64 - nu, x)?;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            Ok(prefactor * sign * (yj * a - jj * b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_hamiltonian, Parity};
    use crate::spectrum::numerical_spectrum;
    use approx::assert_abs_diff_eq;

    fn weak() -> CrystalParams {
        CrystalParams::new(1.0, 1.1, 0.01, Parity::Minus, 200).unwrap()
    }

    #[test]
    fn vanishing_coupling_limit() {
        let p = CrystalParams::new(1.0, 1.1, 1e-12, Parity::Minus, 50).unwrap();
        let s = continued_fraction_ratio(&p, 0.3, 4, 50, 1e-20).unwrap();
        assert!(s.value.abs() < 1e-11);
    }

    #[test]
    fn depth_one_is_a_single_level() {
        let p = weak();
        let omega = 0.7;
        let s = continued_fraction_ratio(&p, omega, 3, 1, 1e-15).unwrap();
        assert_eq!(s.value, p.coupling / (omega - p.site_energy(4)));
        assert_eq!(s.depth_used, 1);
        assert!(!s.converged);
    }

    #[test]
    fn ratio_matches_oracle_eigenvector() {
        let p = weak();
        let spec = numerical_spectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        let omega = spec.eigenvalues()[0];
        let v = spec.eigenvector(0);
        let s = continued_fraction_ratio(&p, omega, 0, default_depth(40), 1e-15).unwrap();
        assert!((s.value - v[1] / v[0]).abs() < 1e-6, "{} vs {}", s.value, v[1] / v[0]);
    }

    #[test]
    fn errors() {
        let p = CrystalParams::new(1.0, 0.0, 0.0, Parity::Plus, 10).unwrap();
        assert!(matches!(continued_fraction_ratio(&p, 0.5, 0, 10, 1e-12), Err(LatticeError::CouplingZero(_))));
        let q = weak();
        assert!(continued_fraction_ratio(&q, 0.5, 0, 0, 1e-12).is_err());
        // ω exactly on a bare level at depth one.
        let pole = continued_fraction_ratio(&q, q.site_energy(1), 0, 1, 1e-12);
        assert!(matches!(pole, Err(LatticeError::Pole { site: 1, .. })));
        assert!(mode_coefficients(&q, 0.5, 0, 10, 1e-12).is_err());
    }

    #[test]
    fn single_coefficient_mode() {
        let m = default_mode(&weak(), 0.37, 1).unwrap();
        assert_eq!(m.coefficients, vec![1.0]);
        assert!(!m.normalized);
    }

    #[test]
    fn ratios_reproduce_the_fraction() {
        let p = weak();
        let omega = 2.4489;
        let depth = default_depth(30);
        let m = mode_coefficients(&p, omega, 30, depth, 1e-15).unwrap();
        for j in [0, 3, 11, 28] {
            let s = continued_fraction_ratio(&p, omega, j, depth, 1e-15).unwrap();
            assert_eq!(m.ratios[j].to_bits(), s.value.to_bits());
            let quotient = m.coefficients[j + 1] / m.coefficients[j];
            assert!((quotient - s.value).abs() <= 4.0 * f64::EPSILON * s.value.abs());
        }
    }

    #[test]
    fn oracle_mode_boundary_residual() {
        let p = weak();
        let spec = numerical_spectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        let q = 40;
        let mode = ModeVector::from_coefficients(spec.eigenvalues()[q], spec.eigenvector(q).to_vec());
        assert!(mode.normalized);
        assert!(boundary_residual(&p, &mode) < 1e-8);
    }

    #[test]
    fn decoupled_site_residual() {
        let p = CrystalParams::new(1.0, 0.6, 0.0, Parity::Plus, 10).unwrap();
        let mode = ModeVector::from_coefficients(p.site_energy(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(boundary_residual(&p, &mode), 0.0);
    }

    #[test]
    fn off_resonant_omega_is_not_proper() {
        let p = weak();
        let spec = numerical_spectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        let omega = spec.eigenvalues()[1];
        let exact = default_mode(&p, omega, 20).unwrap();
        assert!(boundary_residual(&p, &exact) < 1e-10);
        let shifted = default_mode(&p, omega + 0.1, 20).unwrap();
        let r = boundary_residual(&p, &shifted);
        // Weak coupling: the residual is dominated by the −0.1·c_0 term.
        assert!((r - 0.1 / (omega + 0.1).max(1.0)).abs() < 0.02, "{r}");
        // Midway between two bare levels the mode still decays but fails the boundary row.
        let mid = 0.5 * (p.site_energy(0) + p.site_energy(2));
        let m = default_mode(&p, mid, 20).unwrap();
        assert!(m.coefficients[19].abs() < 1e-20);
        assert!(boundary_residual(&p, &m) > 0.1);
    }

    #[test]
    fn shortcut_reproduces_dressed_ratio() {
        let p = CrystalParams::new(1.0, 1.1, 0.01, Parity::Minus, 10).unwrap();
        let rwa = crate::spectrum::rwa_spectrum(&p, 0).unwrap().levels[0];
        for (energy, ratio) in [
            (rwa.energy_plus, rwa.alpha_over_beta_plus.unwrap()),
            (rwa.energy_minus, rwa.alpha_over_beta_minus.unwrap()),
        ] {
            let m = weak_shortcut_mode(&p, energy, 2).unwrap();
            // c_1/c_0 = β/α
            assert_abs_diff_eq!(m.coefficients[1], 1.0 / ratio, epsilon = 1e-12);
        }
    }

    #[test]
    fn matched_mode_resolves_interior_modes() {
        let p = CrystalParams::new(1.0, 1.1, 0.01, Parity::Minus, 400).unwrap();
        let spec = numerical_spectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        for rank in [0, 5, 9, 37] {
            let omega = spec.eigenvalues()[rank];
            let m = matched_mode(&p, omega, 400, default_depth(400), 1e-15).unwrap();
            assert!(m.converged);
            let o = overlap(&m.coefficients, spec.eigenvector(rank));
            assert!(o > 1.0 - 1e-12, "rank {rank}: {o}");
            assert_eq!(m.coefficients[m.matching_site], 1.0);
        }
        // Boundary modes match at the boundary and agree with the plain construction.
        let omega = spec.eigenvalues()[1];
        let a = matched_mode(&p, omega, 30, default_depth(30), 1e-15).unwrap();
        let b = default_mode(&p, omega, 30).unwrap();
        assert_eq!(a.matching_site, 0);
        assert_eq!(a.coefficients, b.coefficients);
    }

    #[test]
    fn proper_value_refinement_converges() {
        let p = weak();
        let spec = numerical_spectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        for q in [0, 1, 7, 30] {
            let seed = spec.eigenvalues()[q] + 1e-6;
            let pv = refine_proper_value(&p, seed, default_depth(40), 1e-15).unwrap();
            assert!(pv.residual < 1e-12);
            assert!((pv.omega - spec.eigenvalues()[q]).abs() < 1e-10, "q={q} {pv:?} {}", spec.eigenvalues()[q]);
        }
    }

    #[test]
    fn bessel_form_starts_at_one_and_obeys_recurrence() {
        let (wf, lam, omega) = (1.0, 1.3, 2.37);
        let c = bessel_mode_coefficients(wf, lam, omega, 12).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], omega / lam, epsilon = 1e-12);
        for j in 1..11 {
            let lhs = (omega - j as f64 * wf) * c[j];
            let rhs = lam * (c[j - 1] + c[j + 1]);
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()).max(1.0), "j={j}");
        }
    }

    #[test]
    fn bessel_form_preconditions() {
        assert!(bessel_mode_coefficients(0.0, 1.0, 0.5, 3).is_err());
        assert!(matches!(bessel_mode_coefficients(1.0, 0.0, 0.5, 3), Err(LatticeError::CouplingZero(_))));
    }
}
