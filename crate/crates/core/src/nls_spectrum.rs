//! Transverse spectrum of the NLS ground state.
//!
//! With `L⁺ = -∂² + 1 - 3Q²`, `L⁻ = -∂² + 1 - Q²` and `ε = k/L`, the modes
//! `e^{σt} e^{iky/L} (V₁, V₂)` solve `(L⁺+ε²)V₁ = -σV₂`, `(L⁻+ε²)V₂ = σV₁`.
//! Eliminating `V₂` gives `(L⁻+ε²)(L⁺+ε²)V₁ = -σ²V₁`; since `P = L⁻+ε² ≥ 0`, the
//! product is similar to the symmetric `P^{1/2}(L⁺+ε²)P^{1/2}`, so every eigenvalue
//! `σ` of the block operator is real or purely imaginary and is obtained from a
//! symmetric eigensolve.

use crate::error::{Error, Result};
use crate::grid::{self, Grid1D};
use crate::kp_spectrum::{multiplier_matrix, symmetrize};
use crate::solitons::{nls_q, nls_q_prime};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Growth rates at or below this are treated as neutral.
pub const UNSTABLE_THRESHOLD: f64 = 1e-6;

/// `(L⁺, L⁻)` as symmetric matrices in the physical sample basis.
pub fn assemble_lpm(grid: &Grid1D) -> (DMatrix<f64>, DMatrix<f64>) {
    let lap = multiplier_matrix(grid, &grid.derivative_symbol(2));
    let mut lp = -lap.clone();
    let mut lm = -lap;
    for i in 0..grid.n {
        let q2 = nls_q(grid.x(i)).powi(2);
        lp[(i, i)] += 1.0 - 3.0 * q2;
        lm[(i, i)] += 1.0 - q2;
    }
    (symmetrize(lp), symmetrize(lm))
}

/// Eigenvalues of a symmetric operator below the continuum edge `1`, ascending.
pub fn discrete_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().filter(|&e| e < 1.0).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue at or above the continuum edge (up to discretization error).
pub fn continuum_onset(m: &DMatrix<f64>, discrete: usize) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev[discrete]
}

struct Reduction {
    sqrt_p: DMatrix<f64>,
    k: DMatrix<f64>,
    s_values: Vec<f64>,
    s_vectors: DMatrix<f64>,
}

fn reduce(grid: &Grid1D, eps: f64) -> Reduction {
    let (lp, lm) = assemble_lpm(grid);
    let n = grid.n;
    let shift = DMatrix::<f64>::identity(n, n) * (eps * eps);
    let k = lp + &shift;
    let pe = SymmetricEigen::new(lm + shift);
    let root = DVector::from_iterator(n, pe.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()));
    let sqrt_p = symmetrize(&pe.eigenvectors * DMatrix::from_diagonal(&root) * pe.eigenvectors.transpose());
    let s = symmetrize(&sqrt_p * &k * &sqrt_p);
    let se = SymmetricEigen::new(s);
    let floor = 64.0 * f64::EPSILON * se.eigenvalues.amax();
    let s_values = se.eigenvalues.iter().map(|&v| if v.abs() < floor { 0.0 } else { v }).collect();
    Reduction { sqrt_p, k, s_values, s_vectors: se.eigenvectors }
}

/// The real block operator `[[0, -(L⁻+ε²)], [L⁺+ε², 0]]`.
fn block_matrix(grid: &Grid1D, eps: f64) -> DMatrix<f64> {
    let (lp, lm) = assemble_lpm(grid);
    let n = grid.n;
    let shift = DMatrix::<f64>::identity(n, n) * (eps * eps);
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&(-(lm + &shift)));
    m.view_mut((n, 0), (n, n)).copy_from(&(lp + shift));
    m
}

/// Inverse iteration on the block operator starting from `(v, σ)`.
fn polish(m: &DMatrix<f64>, mut v: DVector<f64>, mut sigma: f64) -> (DVector<f64>, f64) {
    for _ in 0..2 {
        let shifted = m + DMatrix::<f64>::identity(m.nrows(), m.ncols()) * sigma;
        let Some(next) = shifted.lu().solve(&v) else { break };
        let norm = next.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v = next / norm;
        sigma = -v.dot(&(m * &v));
    }
    (v, sigma)
}

/// All `2N` eigenvalues `σ` of the block operator at transverse wavenumber `ε`.
pub fn block_eigenvalues(grid: &Grid1D, eps: f64) -> Vec<Complex64> {
    let r = reduce(grid, eps);
    let mut out = Vec::with_capacity(2 * grid.n);
    for &s in &r.s_values {
        let root = Complex64::new(-s, 0.0).sqrt();
        out.push(root);
        out.push(-root);
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableModeNLS {
    pub epsilon: f64,
    pub sigma: Complex64,
    pub v1: Vec<Complex64>,
    pub v2: Vec<Complex64>,
    pub k: i64,
    pub l: f64,
    pub grid: Grid1D,
}

impl UnstableModeNLS {
    pub fn growth_rate(&self) -> f64 {
        self.sigma.re
    }

    /// `‖σV + MV‖ / ‖V‖` for the block operator `M`.
    pub fn eigen_residual(&self) -> f64 {
        let (lp, lm) = assemble_lpm(&self.grid);
        let e2 = self.epsilon * self.epsilon;
        let v1 = DVector::from_column_slice(&self.v1);
        let v2 = DVector::from_column_slice(&self.v2);
        let lpc = lp.map(|x| Complex64::new(x, 0.0));
        let lmc = lm.map(|x| Complex64::new(x, 0.0));
        let e2 = Complex64::new(e2, 0.0);
        let r1 = v1.clone() * self.sigma - (&lmc * &v2 + v2.clone() * e2);
        let r2 = v2.clone() * self.sigma + (&lpc * &v1 + v1.clone() * e2);
        ((r1.norm_squared() + r2.norm_squared()) / (v1.norm_squared() + v2.norm_squared())).sqrt()
    }

    /// Relative size of `Re σ((L⁺V₁,V₁) + (L⁻V₂,V₂) + ε²|V|²)`.
    pub fn conservation_residual(&self) -> f64 {
        let (lp, lm) = assemble_lpm(&self.grid);
        let g = &self.grid;
        let apply = |m: &DMatrix<f64>, v: &[Complex64]| -> Vec<Complex64> {
            let vc = DVector::from_column_slice(v);
            let out = m.map(|x| Complex64::new(x, 0.0)) * vc;
            out.iter().cloned().collect()
        };
        let a = grid::inner(g, &apply(&lp, &self.v1), &self.v1);
        let b = grid::inner(g, &apply(&lm, &self.v2), &self.v2);
        let e2 = self.epsilon * self.epsilon;
        let mass = grid::l2(g, &self.v1).powi(2) + grid::l2(g, &self.v2).powi(2);
        let value = self.sigma.re * (a + b + e2 * mass);
        let scale = self.sigma.re.abs() * (a.norm() + b.norm() + e2 * mass);
        value.norm() / scale.max(f64::MIN_POSITIVE)
    }
}

/// The unique unstable mode at wavenumber `ε = k/L`, if any.
pub fn transverse_mode(grid: &Grid1D, k: i64, l: f64) -> Result<Option<UnstableModeNLS>> {
    let eps = k as f64 / l;
    if !(eps >= 0.0) {
        return Err(Error::DomainError(format!("epsilon={eps} must be nonnegative")));
    }
    let r = reduce(grid, eps);
    let limit = -UNSTABLE_THRESHOLD * UNSTABLE_THRESHOLD;
    let unstable: Vec<usize> = (0..grid.n).filter(|&i| r.s_values[i] < limit).collect();
    if unstable.len() > 1 {
        return Err(Error::DegenerateSpectrum { count: unstable.len() });
    }
    let Some(&idx) = unstable.first() else {
        return Ok(None);
    };
    let sigma = (-r.s_values[idx]).sqrt();
    let y = r.s_vectors.column(idx).into_owned();
    let u = &r.sqrt_p * y;
    let w = -(&r.k * &u) / sigma;
    let n = grid.n;
    let mut start = DVector::<f64>::zeros(2 * n);
    start.rows_mut(0, n).copy_from(&u);
    start.rows_mut(n, n).copy_from(&w);
    let start = start.normalize();
    let (v, sigma) = polish(&block_matrix(grid, eps), start, sigma);
    let mut v1: Vec<f64> = v.rows(0, n).iter().cloned().collect();
    let mut v2: Vec<f64> = v.rows(n, n).iter().cloned().collect();
    let norm = ((v1.iter().chain(&v2).map(|x| x * x).sum::<f64>()) * grid.dx()).sqrt();
    let mut s = 1.0 / norm;
    let centre = grid.n / 2;
    let anchor = if v1[centre].abs() > 1e-12 { v1[centre] } else { v2[centre] };
    if anchor < 0.0 {
        s = -s;
    }
    for v in v1.iter_mut().chain(v2.iter_mut()) {
        *v *= s;
    }
    let c = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    Ok(Some(UnstableModeNLS {
        epsilon: eps,
        sigma: Complex64::new(sigma, 0.0),
        v1: c(v1),
        v2: c(v2),
        k,
        l,
        grid: *grid,
    }))
}

/// The unstable mode at transverse wavenumber `ε` (reported with `k = 1`, `L = 1/ε`).
pub fn transverse_eigen(grid: &Grid1D, eps: f64) -> Result<Option<UnstableModeNLS>> {
    if eps == 0.0 {
        return transverse_mode(grid, 0, 1.0);
    }
    transverse_mode(grid, 1, 1.0 / eps)
}

/// Growth rate at `ε`, zero when stable.
pub fn growth_rate(grid: &Grid1D, eps: f64) -> Result<f64> {
    Ok(transverse_eigen(grid, eps)?.map_or(0.0, |m| m.growth_rate()))
}

/// Smallest `ε` beyond which no unstable mode exists, by bisection to `tol`.
pub fn measure_cutoff(grid: &Grid1D, tol: f64) -> Result<f64> {
    let unstable = |e: f64| -> Result<bool> { Ok(transverse_eigen(grid, e)?.is_some()) };
    let mut lo = 0.25;
    if !unstable(lo)? {
        return Err(Error::NoUnstableMode { l: 1.0 / lo });
    }
    let mut hi = 0.5;
    while unstable(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::DomainError("no transverse cutoff found".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest period with an unstable `k = 1` mode, `L₀ = 1/ε_c`.
pub fn measure_l0(grid: &Grid1D, tol: f64) -> Result<f64> {
    Ok(1.0 / measure_cutoff(grid, tol)?)
}

pub fn most_unstable_nls(l: f64, grid: &Grid1D) -> Result<UnstableModeNLS> {
    if !(l > 0.0) {
        return Err(Error::DomainError(format!("L={l} must be positive")));
    }
    let cutoff = measure_cutoff(grid, 1e-3)?;
    let kmax = ((cutoff + 1e-3) * l).floor() as i64;
    let modes: Vec<Option<UnstableModeNLS>> =
        (1..=kmax).into_par_iter().map(|k| transverse_mode(grid, k, l)).collect::<Result<_>>()?;
    let mut best: Option<UnstableModeNLS> = None;
    for m in modes.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| m.growth_rate() > b.growth_rate()) {
            best = Some(m);
        }
    }
    best.ok_or(Error::NoUnstableMode { l })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationReport {
    /// `‖Q'‖ / ‖Q‖`.
    pub theta: f64,
    /// Richardson-extrapolated `lim σ(ε)/ε` on the unstable branch.
    pub omega1_unstable: f64,
    /// `|ω₁|` on the neutral branch `ω₁² = -4θ²`, i.e. `2θ`.
    pub omega1_stable_imag: f64,
    /// Same quantity read off the discrete spectrum.
    pub omega1_stable_fitted: f64,
    /// Largest number of unstable pairs seen over the tested `ε`.
    pub max_unstable_count: usize,
}

/// `θ = ‖Q'‖/‖Q‖` by spectrally exact quadrature.
pub fn theta(grid: &Grid1D) -> f64 {
    let q = grid.sample(nls_q);
    let dq = grid.sample(nls_q_prime);
    grid::l2(grid, &dq) / grid::l2(grid, &q)
}

fn neutral_rate(grid: &Grid1D, eps: f64) -> f64 {
    let r = reduce(grid, eps);
    // Smallest positive eigenvalue of the reduction is the neutral branch bending off zero.
    let mut pos: Vec<f64> = r.s_values.iter().cloned().filter(|&s| s > 1e-14).collect();
    pos.sort_by(f64::total_cmp);
    pos.first().map_or(0.0, |s| s.sqrt())
}

/// Extrapolates `ω + aε² + bε⁴` sampled at `ε, 2ε, 4ε` to `ε = 0`.
fn richardson(values: &[f64; 3]) -> f64 {
    let r1 = (4.0 * values[0] - values[1]) / 3.0;
    let r2 = (4.0 * values[1] - values[2]) / 3.0;
    (16.0 * r1 - r2) / 15.0
}

pub fn bifurcation_check(grid: &Grid1D) -> Result<BifurcationReport> {
    let eps = [0.01, 0.02, 0.04];
    let mut slopes = [0.0; 3];
    let mut neutral = [0.0; 3];
    let mut max_count = 0;
    for (i, &e) in eps.iter().enumerate() {
        let count = block_eigenvalues(grid, e).iter().filter(|s| s.re > UNSTABLE_THRESHOLD).count();
        max_count = max_count.max(count);
        let mode = transverse_eigen(grid, e)?.ok_or(Error::NoUnstableMode { l: 1.0 / e })?;
        slopes[i] = mode.growth_rate() / e;
        neutral[i] = neutral_rate(grid, e) / e;
    }
    let th = theta(grid);
    Ok(BifurcationReport {
        theta: th,
        omega1_unstable: richardson(&slopes),
        omega1_stable_imag: 2.0 * th,
        omega1_stable_fitted: richardson(&neutral),
        max_unstable_count: max_count,
    })
}
