use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{inner, FieldState, NORM_TOLERANCE};
use crate::crystal::TridiagonalOperator;
use crate::error::{LatticeError, Result};
use crate::spectrum::{numerical_spectrum, SpectralDecomposition};

/// Above this many sites the automatic choice switches to the integrator.
pub const SPECTRAL_SITE_LIMIT: usize = 2500;
/// Leakage into the far boundary above which a run is tainted.
pub const LEAKAGE_THRESHOLD: f64 = 1e-3;
/// Local error allowed per unit propagation distance.
pub const DEFAULT_STEP_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    SpectralExact,
    SteppedIntegrator,
}

impl PropagationMethod {
    pub fn auto(n_sites: usize) -> Self {
        if n_sites <= SPECTRAL_SITE_LIMIT {
            PropagationMethod::SpectralExact
        } else {
            PropagationMethod::SteppedIntegrator
        }
    }
}

/// Which sites get their intensities recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteWindow {
    /// The whole lattice up to 200 sites, else 25 sites either side of the
    /// brightest input site.
    Auto,
    Full,
    Range { start: usize, end: usize },
}

impl SiteWindow {
    pub fn resolve(self, initial: &FieldState) -> Result<(usize, usize)> {
        let n = initial.len();
        match self {
            SiteWindow::Full => Ok((0, n)),
            SiteWindow::Auto if n <= 200 => Ok((0, n)),
            SiteWindow::Auto => {
                let centre = initial
                    .intensities()
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0;
                Ok((centre.saturating_sub(25), (centre + 26).min(n)))
            }
            SiteWindow::Range { start, end } => {
                if start >= end || end > n {
                    return Err(LatticeError::IndexOutOfRange { index: end, len: n });
                }
                Ok((start, end))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOptions {
    /// `None` picks by lattice size.
    pub method: Option<PropagationMethod>,
    pub window: SiteWindow,
    pub keep_snapshots: bool,
    pub step_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            method: None,
            window: SiteWindow::Auto,
            keep_snapshots: false,
            step_tolerance: DEFAULT_STEP_TOLERANCE,
        }
    }
}

/// Observables sampled at each output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub window: (usize, usize),
    /// `intensities[t][j − window.0]`.
    pub intensities: Vec<Vec<f64>>,
    pub fidelity: Vec<f64>,
    /// Normalized by the instantaneous norm.
    pub center_of_mass: Vec<f64>,
    pub norm: Vec<f64>,
    pub boundary_leakage: Vec<f64>,
}

impl ObservableSeries {
    fn with_capacity(window: (usize, usize), n: usize) -> Self {
        ObservableSeries {
            times: Vec::with_capacity(n),
            window,
            intensities: Vec::with_capacity(n),
            fidelity: Vec::with_capacity(n),
            center_of_mass: Vec::with_capacity(n),
            norm: Vec::with_capacity(n),
            boundary_leakage: Vec::with_capacity(n),
        }
    }

    fn record(&mut self, reference: &FieldState, state: &[Complex64], time: f64) {
        let n = state.len();
        let (mut norm, mut moment) = (0.0, 0.0);
        for (j, c) in state.iter().enumerate() {
            let p = c.norm_sqr();
            norm += p;
            moment += j as f64 * p;
        }
        let tail = boundary_sites(n);
        let leakage = state[n - tail..].iter().map(|c| c.norm_sqr()).sum();
        self.times.push(time);
        self.intensities
            .push(state[self.window.0..self.window.1].iter().map(|c| c.norm_sqr()).collect());
        self.fidelity.push(inner(&reference.amplitudes, state).norm_sqr());
        self.center_of_mass.push(if norm > 0.0 { moment / norm } else { f64::NAN });
        self.norm.push(norm);
        self.boundary_leakage.push(leakage);
    }

    /// Intensity history of one site inside the window.
    pub fn site_intensity(&self, site: usize) -> Result<Vec<f64>> {
        if site < self.window.0 || site >= self.window.1 {
            return Err(LatticeError::IndexOutOfRange { index: site, len: self.window.1 });
        }
        Ok(self.intensities.iter().map(|row| row[site - self.window.0]).collect())
    }

    pub fn max_leakage(&self) -> f64 {
        self.boundary_leakage.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn leakage_tainted(&self) -> bool {
        self.max_leakage() > LEAKAGE_THRESHOLD
    }

    pub fn norm_tainted(&self) -> bool {
        self.max_norm_drift() > NORM_TOLERANCE
    }
}

/// `|c_k(t)|²` over the series for an input site.
pub fn return_intensity(series: &ObservableSeries, k: usize) -> Result<Vec<f64>> {
    series.site_intensity(k)
}

/// Sites counted as the far boundary: the last 5%, at least one.
pub fn boundary_sites(n_sites: usize) -> usize {
    n_sites.div_ceil(20).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub series: ObservableSeries,
    pub snapshots: Vec<FieldState>,
    pub method: PropagationMethod,
}

fn check_times(initial: &FieldState, times: &[f64]) -> Result<()> {
    let mut prev = initial.time;
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(LatticeError::InvalidTimeGrid(format!("time {i} is not finite")));
        }
        if t < 0.0 {
            return Err(LatticeError::InvalidTimeGrid(format!("time {i} is negative")));
        }
        if t < prev {
            return Err(LatticeError::InvalidTimeGrid(format!(
                "time {i} = {t} precedes {prev}"
            )));
        }
        prev = t;
    }
    Ok(())
}

fn check_initial(op: &TridiagonalOperator, initial: &FieldState) -> Result<()> {
    if op.dim() != initial.len() {
        return Err(LatticeError::DimensionMismatch { expected: op.dim(), found: initial.len() });
    }
    if initial.is_empty() {
        return Err(LatticeError::InvalidParameters("empty field state".into()));
    }
    let norm_sqr = initial.norm_sqr();
    if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
        return Err(LatticeError::NormViolation { norm_sqr });
    }
    Ok(())
}

/// Propagate with default options and the given method.
pub fn propagate(
    op: &TridiagonalOperator,
    initial: &FieldState,
    times: &[f64],
    method: PropagationMethod,
) -> Result<Propagation> {
    let options = PropagationOptions { method: Some(method), ..Default::default() };
    propagate_with(op, initial, times, &options)
}

pub fn propagate_with(
    op: &TridiagonalOperator,
    initial: &FieldState,
    times: &[f64],
    options: &PropagationOptions,
) -> Result<Propagation> {
    check_initial(op, initial)?;
    check_times(initial, times)?;
    match options.method.unwrap_or_else(|| PropagationMethod::auto(op.dim())) {
        PropagationMethod::SpectralExact => SpectralPropagator::new(op)?.run(initial, times, options),
        PropagationMethod::SteppedIntegrator => run_stepped(op, initial, times, options),
    }
}

/// Eigenbasis propagation, `c(t) = V e^{−iΛt} Vᵀ c(0)`. Reusable across
/// initial states on the same lattice.
pub struct SpectralPropagator {
    decomposition: SpectralDecomposition,
    /// Index range outside which each eigenvector is negligible.
    support: Vec<(usize, usize)>,
}

const SUPPORT_CUTOFF: f64 = 1e-20;
const WEIGHT_CUTOFF: f64 = 1e-20;

impl SpectralPropagator {
    pub fn new(op: &TridiagonalOperator) -> Result<Self> {
        let decomposition = numerical_spectrum(op)?;
        let support = decomposition
            .eigenvectors()
            .map(|v| {
                let lo = v.iter().position(|x| x.abs() > SUPPORT_CUTOFF).unwrap_or(0);
                let hi = v.iter().rposition(|x| x.abs() > SUPPORT_CUTOFF).map_or(0, |i| i + 1);
                (lo, hi.max(lo))
            })
            .collect();
        Ok(SpectralPropagator { decomposition, support })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    /// Mode weights `Vᵀ c` with negligible ones dropped.
    fn weights(&self, c: &[Complex64]) -> Vec<(usize, Complex64)> {
        let w: Vec<Complex64> = self
            .decomposition
            .eigenvectors()
            .zip(&self.support)
            .map(|(v, &(lo, hi))| (lo..hi).map(|i| c[i] * v[i]).sum())
            .collect();
        let total = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        w.into_iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > WEIGHT_CUTOFF * total)
            .collect()
    }

    fn evolve_into(&self, initial: &[Complex64], weights: &[(usize, Complex64)], dt: f64, out: &mut [Complex64]) {
        if dt == 0.0 {
            out.copy_from_slice(initial);
            return;
        }
        out.iter_mut().for_each(|c| *c = ZERO);
        let lambda = self.decomposition.eigenvalues();
        for &(q, w) in weights {
            let z = w * Complex64::from_polar(1.0, -lambda[q] * dt);
            let v = self.decomposition.eigenvector(q);
            let (lo, hi) = self.support[q];
            for i in lo..hi {
                out[i] += z * v[i];
            }
        }
    }

    pub fn evolve(&self, initial: &FieldState, time: f64) -> Result<FieldState> {
        check_times(initial, &[time])?;
        if initial.len() != self.decomposition.dim() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.decomposition.dim(),
                found: initial.len(),
            });
        }
        let weights = self.weights(&initial.amplitudes);
        let mut out = vec![ZERO; initial.len()];
        self.evolve_into(&initial.amplitudes, &weights, time - initial.time, &mut out);
        Ok(FieldState { amplitudes: out, time })
    }

    pub fn run(&self, initial: &FieldState, times: &[f64], options: &PropagationOptions) -> Result<Propagation> {
        if initial.len() != self.decomposition.dim() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.decomposition.dim(),
                found: initial.len(),
            });
        }
        check_times(initial, times)?;
        let window = options.window.resolve(initial)?;
        let weights = self.weights(&initial.amplitudes);
        let mut series = ObservableSeries::with_capacity(window, times.len());
        let mut snapshots = Vec::new();
        let mut buf = vec![ZERO; initial.len()];
        for &t in times {
            self.evolve_into(&initial.amplitudes, &weights, t - initial.time, &mut buf);
            series.record(initial, &buf, t);
            if options.keep_snapshots {
                snapshots.push(FieldState { amplitudes: buf.clone(), time: t });
            }
        }
        Ok(Propagation { series, snapshots, method: PropagationMethod::SpectralExact })
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Right-hand side in the frame rotating with the site energies:
/// `u' = −i e^{iDt} P e^{−iDt} u`, with `P` the couplings alone.
struct InteractionFrame<'a> {
    offdiagonal: &'a [f64],
    /// `d_j − d_{j+1}` per bond.
    bond_detuning: Vec<f64>,
}

impl InteractionFrame<'_> {
    fn eval(&self, t: f64, u: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|c| *c = ZERO);
        for (b, (&e, &dd)) in self.offdiagonal.iter().zip(&self.bond_detuning).enumerate() {
            if e == 0.0 {
                continue;
            }
            let (s, c) = (dd * t).sin_cos();
            // −i·e·e^{iθ}
            let z = Complex64::new(e * s, -e * c);
            let zc = Complex64::new(-e * s, -e * c);
            out[b] += z * u[b + 1];
            out[b + 1] += zc * u[b];
        }
    }
}

fn lab_frame(diagonal: &[f64], u: &[Complex64], t: f64) -> Vec<Complex64> {
    diagonal
        .iter()
        .zip(u)
        .map(|(&d, &x)| x * Complex64::from_polar(1.0, -d * t))
        .collect()
}

fn run_stepped(
    op: &TridiagonalOperator,
    initial: &FieldState,
    times: &[f64],
    options: &PropagationOptions,
) -> Result<Propagation> {
    let tol = options.step_tolerance;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LatticeError::InvalidParameters("step tolerance must be positive".into()));
    }
    let window = options.window.resolve(initial)?;
    let n = op.dim();
    let d = op.diagonal();
    let frame = InteractionFrame {
        offdiagonal: op.offdiagonal(),
        bond_detuning: d.windows(2).map(|w| w[0] - w[1]).collect(),
    };
    let t0 = initial.time;
    // Frame time is measured from the initial time, where u = c.
    let mut u = initial.amplitudes.clone();
    let mut t = 0.0;
    let mut k: Vec<Vec<Complex64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut next = vec![ZERO; n];

    let rate = 2.0 * frame.offdiagonal.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
        + frame.bond_detuning.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut h = if rate > 0.0 { 0.1 / rate } else { 1.0 };
    frame.eval(t, &u, &mut k[0]);

    let mut series = ObservableSeries::with_capacity(window, times.len());
    let mut snapshots = Vec::new();
    for &t_abs in times {
        let target = t_abs - t0;
        let h_min = 1e-12 * target.abs().max(1.0);
        while t < target {
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = u[i];
                    for (r, a) in A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += k[r][i] * (a * step);
                        }
                    }
                    stage[i] = acc;
                }
                frame.eval(t + C[s] * step, &stage, &mut k[s]);
                if s == 6 {
                    next.copy_from_slice(&stage);
                }
            }
            let mut err = 0.0_f64;
            for i in 0..n {
                let mut e = ZERO;
                for (r, w) in E.iter().enumerate() {
                    if *w != 0.0 {
                        e += k[r][i] * *w;
                    }
                }
                err = err.max(e.norm() * step);
            }
            let allowed = tol * step;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 5.0) };
            if err <= allowed {
                t = if last { target } else { t + step };
                std::mem::swap(&mut u, &mut next);
                k.swap(0, 6);
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor;
                if h < h_min {
                    return Err(LatticeError::StepControlFailure { time: t0 + t, step: h });
                }
            }
        }
        let c = lab_frame(d, &u, t);
        series.record(initial, &c, t_abs);
        if options.keep_snapshots {
            snapshots.push(FieldState { amplitudes: c, time: t_abs });
        }
    }
    Ok(Propagation { series, snapshots, method: PropagationMethod::SteppedIntegrator })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_hamiltonian, CrystalParams, Parity};
    use crate::dynamics::state::{single_site_state, two_site_phase_state};

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn two_site_rabi_oscillation() {
        // Degenerate dimer: |c_0|² = cos²(λt).
        let op = TridiagonalOperator::new(vec![0.3, 0.3], vec![0.8]).unwrap();
        let psi = single_site_state(2, 0).unwrap();
        let times = grid(5.0, 40);
        for method in [PropagationMethod::SpectralExact, PropagationMethod::SteppedIntegrator] {
            let run = propagate(&op, &psi, &times, method).unwrap();
            let i0 = run.series.site_intensity(0).unwrap();
            for (t, p) in times.iter().zip(&i0) {
                assert!((p - (0.8 * t).cos().powi(2)).abs() < 1e-8, "{method:?} t={t}");
            }
        }
    }

    #[test]
    fn uncoupled_sites_only_rotate() {
        let p = CrystalParams::new(1.0, 0.5, 0.0, Parity::Plus, 30).unwrap();
        let op = build_hamiltonian(&p).unwrap();
        let psi = two_site_phase_state(30, 10, 0.3).unwrap();
        for method in [PropagationMethod::SpectralExact, PropagationMethod::SteppedIntegrator] {
            let options = PropagationOptions { method: Some(method), keep_snapshots: true, ..Default::default() };
            let run = propagate_with(&op, &psi, &[0.0, 2.5, 7.0], &options).unwrap();
            for snap in &run.snapshots {
                let expected = psi.amplitudes[11] * Complex64::from_polar(1.0, -p.site_energy(11) * snap.time);
                assert!((snap.amplitudes[11] - expected).norm() < 1e-12);
            }
            assert!(run.series.max_norm_drift() < 1e-13);
        }
    }

    #[test]
    fn methods_agree_on_binary_lattice() {
        let p = CrystalParams::new(1.0, 1.0, 2.0, Parity::Minus, 80).unwrap();
        let op = build_hamiltonian(&p).unwrap();
        let psi = single_site_state(80, 0).unwrap();
        let times = grid(6.0, 12);
        let options = |m| PropagationOptions { method: Some(m), keep_snapshots: true, ..Default::default() };
        let a = propagate_with(&op, &psi, &times, &options(PropagationMethod::SpectralExact)).unwrap();
        let b = propagate_with(&op, &psi, &times, &options(PropagationMethod::SteppedIntegrator)).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            let diff = x.amplitudes.iter().zip(&y.amplitudes).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-7, "t={} diff={diff}", x.time);
        }
    }

    #[test]
    fn time_grid_and_state_checks() {
        let op = TridiagonalOperator::new(vec![0.0; 4], vec![1.0; 3]).unwrap();
        let psi = single_site_state(4, 1).unwrap();
        let m = PropagationMethod::SpectralExact;
        assert!(matches!(propagate(&op, &psi, &[0.0, 2.0, 1.0], m), Err(LatticeError::InvalidTimeGrid(_))));
        assert!(matches!(propagate(&op, &psi, &[-1.0], m), Err(LatticeError::InvalidTimeGrid(_))));
        assert!(matches!(propagate(&op, &psi, &[f64::NAN], m), Err(LatticeError::InvalidTimeGrid(_))));
        let short = single_site_state(3, 1).unwrap();
        assert!(matches!(propagate(&op, &short, &[1.0], m), Err(LatticeError::DimensionMismatch { .. })));
        let mut big = psi.clone();
        big.amplitudes[1] = Complex64::new(2.0, 0.0);
        assert!(matches!(propagate(&op, &big, &[1.0], m), Err(LatticeError::NormViolation { .. })));
        let run = propagate(&op, &psi, &[], m).unwrap();
        assert!(run.series.times.is_empty());
    }

    #[test]
    fn windows() {
        let psi = single_site_state(500, 300).unwrap();
        assert_eq!(SiteWindow::Auto.resolve(&psi).unwrap(), (275, 326));
        assert_eq!(SiteWindow::Full.resolve(&psi).unwrap(), (0, 500));
        assert!(SiteWindow::Range { start: 10, end: 600 }.resolve(&psi).is_err());
        let small = single_site_state(50, 3).unwrap();
        assert_eq!(SiteWindow::Auto.resolve(&small).unwrap(), (0, 50));
        assert_eq!(boundary_sites(41), 3);
        assert_eq!(boundary_sites(5), 1);
    }

    #[test]
    fn leakage_taints_short_lattice() {
        let op = TridiagonalOperator::new(vec![0.0; 10], vec![1.0; 9]).unwrap();
        let psi = single_site_state(10, 0).unwrap();
        let run = propagate(&op, &psi, &grid(10.0, 50), PropagationMethod::SpectralExact).unwrap();
        assert!(run.series.leakage_tainted());
        assert!(!run.series.norm_tainted());
    }
}
