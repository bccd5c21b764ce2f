//! Eigendecomposition of real symmetric tridiagonal matrices.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from
//! inverse iteration with a partially pivoted tridiagonal LU. Vectors whose
//! eigenvalues sit closer than `CLUSTER_GAP·‖T‖` are re-orthogonalized
//! against each other (modified Gram-Schmidt) while they iterate. The
//! matrix is first split into unreduced blocks at negligible couplings.
//!
//! Every result is checked against the residual bound before it is
//! returned; nothing here depends on thread scheduling, so the output is
//! bit-reproducible.

use rayon::prelude::*;

use crate::crystal::TridiagonalOperator;
use crate::error::{LatticeError, Result};

const EPS: f64 = f64::EPSILON;
/// Relative eigenvalue gap below which eigenvectors are orthogonalized together.
const CLUSTER_GAP: f64 = 1e-4;
/// Components below this fraction of the largest one do not fix the sign.
const SIGN_THRESHOLD: f64 = 1e-8;
const MAX_INVERSE_ITERATIONS: usize = 8;
/// Residual bound, relative to `max(1, ‖H‖∞)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Sorted eigenvalues with orthonormal eigenvectors stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector paired with `eigenvalues()[q]`.
    pub fn eigenvector(&self, q: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[q * n..(q + 1) * n]
    }

    pub fn eigenvectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.dim().max(1))
    }

    /// `max_q ‖(H − ω_q)v_q‖∞`.
    pub fn max_residual(&self, op: &TridiagonalOperator) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|q| pair_residual(op, self.eigenvalues[q], self.eigenvector(q)))
            .reduce(|| 0.0, f64::max)
    }

    /// `max_{p,q} |⟨v_p, v_q⟩ − δ_pq|`. Quadratic in memory traffic, cubic in
    /// flops; meant for verification.
    pub fn max_orthonormality_error(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|p| {
                let vp = self.eigenvector(p);
                (p..n)
                    .map(|q| {
                        let dot: f64 = vp.iter().zip(self.eigenvector(q)).map(|(a, b)| a * b).sum();
                        let target = if p == q { 1.0 } else { 0.0 };
                        (dot - target).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn pair_residual(op: &TridiagonalOperator, value: f64, v: &[f64]) -> f64 {
    let d = op.diagonal();
    let e = op.offdiagonal();
    let n = d.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut s = (d[i] - value) * v[i];
        if i > 0 {
            s += e[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            s += e[i] * v[i + 1];
        }
        worst = worst.max(s.abs());
    }
    worst
}

/// Full eigendecomposition of `op`, eigenvalues ascending, each eigenvector
/// signed so that its first component above `1e-8·‖v‖∞` is positive.
pub fn numerical_spectrum(op: &TridiagonalOperator) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let d = op.diagonal();
    let e = op.offdiagonal();

    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n.saturating_sub(1) {
        if e[i] == 0.0 || e[i].abs() <= EPS * (d[i].abs() + d[i + 1].abs()) {
            blocks.push(start..i + 1);
            start = i + 1;
        }
    }
    blocks.push(start..n);

    // (eigenvalue, block offset, local vector)
    let mut pairs: Vec<(f64, usize, Vec<f64>)> = blocks
        .par_iter()
        .flat_map_iter(|r| {
            let block = solve_block(&d[r.clone()], &e[r.start..r.end - 1], r.start);
            block.into_iter().map(move |(value, vec)| (value, r.start, vec))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (q, (value, offset, local)) in pairs.into_iter().enumerate() {
        eigenvalues.push(value);
        let column = &mut vectors[q * n..(q + 1) * n];
        column[offset..offset + local.len()].copy_from_slice(&local);
        fix_sign(column);
    }

    let decomposition = SpectralDecomposition { eigenvalues, vectors };
    let bound = RESIDUAL_TOLERANCE * op.norm_inf().max(1.0);
    let residuals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|q| pair_residual(op, decomposition.eigenvalues[q], decomposition.eigenvector(q)))
        .collect();
    if let Some((index, &residual)) = residuals
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r <= bound))
    {
        return Err(LatticeError::ConvergenceFailure { index, residual });
    }
    Ok(decomposition)
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(d: &[f64], e_sq: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = (d[i] - x) - e_sq[i - 1] / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn solve_block(d: &[f64], e: &[f64], seed: usize) -> Vec<(f64, Vec<f64>)> {
    let m = d.len();
    if m == 1 {
        return vec![(d[0], vec![1.0])];
    }
    let e_sq: Vec<f64> = e.iter().map(|x| x * x).collect();
    let mut gl = f64::INFINITY;
    let mut gu = f64::NEG_INFINITY;
    for i in 0..m {
        let radius = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < m { e[i].abs() } else { 0.0 };
        gl = gl.min(d[i] - radius);
        gu = gu.max(d[i] + radius);
    }
    let bnorm = gl.abs().max(gu.abs()).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE.max(e_sq.iter().fold(0.0_f64, |a, &b| a.max(b)) * f64::MIN_POSITIVE);
    let width = gu - gl;
    gl -= 2.0 * EPS * bnorm + width * 2.0 * EPS;
    gu += 2.0 * EPS * bnorm + width * 2.0 * EPS;

    let values: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| bisect(d, &e_sq, k, gl, gu, bnorm, pivmin))
        .collect();

    // Group into clusters of nearly equal eigenvalues.
    let mut clusters = Vec::new();
    let mut c_start = 0;
    for k in 1..m {
        if values[k] - values[k - 1] > CLUSTER_GAP * bnorm {
            clusters.push(c_start..k);
            c_start = k;
        }
    }
    clusters.push(c_start..m);

    let vectors: Vec<Vec<f64>> = clusters
        .par_iter()
        .flat_map_iter(|c| inverse_iteration_cluster(d, e, &values[c.clone()], c.start, bnorm, seed))
        .collect();

    values.into_iter().zip(vectors).collect()
}

fn bisect(d: &[f64], e_sq: &[f64], k: usize, gl: f64, gu: f64, bnorm: f64, pivmin: f64) -> f64 {
    let mut lo = gl;
    let mut hi = gu;
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 2.0 * EPS * lo.abs().max(hi.abs()) + EPS * bnorm * 1e-2 || mid == lo || mid == hi {
            break;
        }
        if sturm_count(d, e_sq, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Partially pivoted LU of `T − σI`; `U` has two superdiagonals.
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(d: &[f64], e: &[f64], shift: f64, pivmin: f64) -> Self {
        let m = d.len();
        let mut a: Vec<f64> = d.iter().map(|x| x - shift).collect();
        let mut b: Vec<f64> = e.to_vec();
        let mut u0 = vec![0.0; m];
        let mut u1 = vec![0.0; m.saturating_sub(1)];
        let mut u2 = vec![0.0; m.saturating_sub(2)];
        let mut mult = vec![0.0; m.saturating_sub(1)];
        let mut swapped = vec![false; m.saturating_sub(1)];
        for k in 0..m - 1 {
            let c = e[k];
            if a[k].abs() >= c.abs() {
                let pivot = if a[k].abs() < pivmin { pivmin.copysign(a[k]) } else { a[k] };
                let l = c / pivot;
                u0[k] = pivot;
                u1[k] = b[k];
                mult[k] = l;
                a[k + 1] -= l * b[k];
            } else {
                let l = a[k] / c;
                u0[k] = c;
                u1[k] = a[k + 1];
                if k + 2 < m {
                    u2[k] = b[k + 1];
                    b[k + 1] = -l * u2[k];
                }
                a[k + 1] = b[k] - l * u1[k];
                mult[k] = l;
                swapped[k] = true;
            }
        }
        u0[m - 1] = if a[m - 1].abs() < pivmin { pivmin.copysign(a[m - 1]) } else { a[m - 1] };
        TridiagLu { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, y: &mut [f64]) {
        let m = y.len();
        for k in 0..m - 1 {
            if self.swapped[k] {
                y.swap(k, k + 1);
            }
            y[k + 1] -= self.mult[k] * y[k];
        }
        y[m - 1] /= self.u0[m - 1];
        for k in (0..m - 1).rev() {
            let mut s = y[k] - self.u1[k] * y[k + 1];
            if k + 2 < m {
                s -= self.u2[k] * y[k + 2];
            }
            y[k] = s / self.u0[k];
        }
    }
}

/// Deterministic start vector in (−1, 1).
fn start_vector(m: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..m)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let norm = scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    norm
}

fn local_residual(d: &[f64], e: &[f64], value: f64, v: &[f64]) -> f64 {
    let m = d.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let mut s = (d[i] - value) * v[i];
        if i > 0 {
            s += e[i - 1] * v[i - 1];
        }
        if i + 1 < m {
            s += e[i] * v[i + 1];
        }
        worst = worst.max(s.abs());
    }
    worst
}

fn inverse_iteration_cluster(
    d: &[f64],
    e: &[f64],
    values: &[f64],
    first_index: usize,
    bnorm: f64,
    seed: usize,
) -> Vec<Vec<f64>> {
    let m = d.len();
    let pivmin = EPS * bnorm;
    let target = 10.0 * EPS * bnorm.max(1.0) * (m as f64).sqrt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut previous_shift = f64::NEG_INFINITY;
    for (offset, &value) in values.iter().enumerate() {
        // Coincident eigenvalues get slightly separated shifts.
        let mut shift = value;
        if shift - previous_shift < 10.0 * EPS * bnorm {
            shift = previous_shift + 10.0 * EPS * bnorm;
        }
        previous_shift = shift;

        let lu = TridiagLu::factor(d, e, shift, pivmin);
        let mut x = start_vector(m, (seed + first_index + offset) as u64);
        normalize(&mut x);
        for iteration in 0..MAX_INVERSE_ITERATIONS {
            let mut y = x.clone();
            lu.solve(&mut y);
            if y.iter().any(|v| !v.is_finite()) {
                y = x.iter().map(|v| v * 1e-150).collect();
                lu.solve(&mut y);
            }
            for prev in &out {
                let dot: f64 = prev.iter().zip(&y).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(prev).for_each(|(yi, pi)| *yi -= dot * pi);
            }
            normalize(&mut y);
            x = y;
            if iteration >= 1 && local_residual(d, e, value, &x) <= target {
                break;
            }
        }
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_hamiltonian, CrystalParams, Parity};
    use approx::assert_abs_diff_eq;

    #[test]
    fn already_diagonal() {
        let op = TridiagonalOperator::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        let s = numerical_spectrum(&op).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 1.0]);
        assert_eq!(s.eigenvector(0), &[1.0, 0.0]);
        assert_eq!(s.eigenvector(1), &[0.0, 1.0]);
    }

    #[test]
    fn two_by_two_coupled() {
        let lam = 0.3;
        let op = TridiagonalOperator::new(vec![0.0, 0.0], vec![lam]).unwrap();
        let s = numerical_spectrum(&op).unwrap();
        assert_abs_diff_eq!(s.eigenvalues()[0], -lam, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eigenvalues()[1], lam, epsilon = 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.eigenvector(0)[0], r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvector(0)[1], -r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvector(1)[0], r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvector(1)[1], r, epsilon = 1e-14);
    }

    #[test]
    fn free_chain_matches_cosine_band() {
        // Eigenvalues of the uniform chain are 2λ cos(kπ/(n+1)).
        let n = 60;
        let lam = 0.7;
        let op = TridiagonalOperator::new(vec![0.0; n], vec![lam; n - 1]).unwrap();
        let s = numerical_spectrum(&op).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 * lam * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in s.eigenvalues().iter().zip(&exact) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
        assert!(s.max_orthonormality_error() < 1e-12);
    }

    #[test]
    fn degenerate_split_blocks() {
        // λ = 0 with a two-valued diagonal: fully degenerate, split into 1×1 blocks.
        let p = CrystalParams::new(0.0, 2.0, 0.0, Parity::Plus, 6).unwrap();
        let op = build_hamiltonian(&p).unwrap();
        let s = numerical_spectrum(&op).unwrap();
        assert_eq!(s.eigenvalues(), &[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.max_orthonormality_error(), 0.0);
    }

    #[test]
    fn nearly_degenerate_bands_stay_orthogonal() {
        let p = CrystalParams::new(0.0, 1.0, 1e-7, Parity::Minus, 120).unwrap();
        let op = build_hamiltonian(&p).unwrap();
        let s = numerical_spectrum(&op).unwrap();
        assert!(s.max_orthonormality_error() < 1e-10);
        assert!(s.max_residual(&op) < 1e-10);
    }

    #[test]
    fn sturm_count_brackets() {
        let d = [0.0, 1.0, 2.0];
        let e_sq = [0.0, 0.0];
        assert_eq!(sturm_count(&d, &e_sq, 1.5, f64::MIN_POSITIVE), 2);
        assert_eq!(sturm_count(&d, &e_sq, -0.5, f64::MIN_POSITIVE), 0);
    }
}
