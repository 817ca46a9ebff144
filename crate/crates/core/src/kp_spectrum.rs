//! Transverse instability of the KdV soliton under KP-I: the explicit eigenmode algebra,
//! the linearized operators `A` and `A_j`, and resolvent diagnostics.
//!
//! The unstable branch is parametrized by `μ ∈ (1, 2)`:
//! `2σ = μ(μ-1)(2-μ)`, `k = (√3 L / 4) μ(2-μ)`, and the eigenfunction is
//! `V(x) = g''(x/2)` with `g(z) = 3μ² e^{μz}(1 - tanh z)`.

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid1D, Kind, Spectrum1D, ZERO_MODE_TOL};
use crate::solitons::kdv_q;
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Critical transverse period: modes exist iff `L > 4/√3`.
pub const KP_THRESHOLD: f64 = 2.309_401_076_758_503; // 4/√3

fn sqrt3() -> f64 {
    3f64.sqrt()
}

fn check_branch(mu: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&mu) {
        return Err(Error::DomainError(format!("mu={mu} outside [1, 2]")));
    }
    Ok(())
}

pub fn sigma_of_mu(mu: f64) -> Result<f64> {
    check_branch(mu)?;
    Ok(0.5 * mu * (mu - 1.0) * (2.0 - mu))
}

pub fn k_of_mu(mu: f64, l: f64) -> Result<f64> {
    check_branch(mu)?;
    Ok(sqrt3() * l / 4.0 * mu * (2.0 - mu))
}

/// `4k/(√3 L)`; a mode exists iff this lies strictly inside `(0, 1)`.
fn branch_ratio(k: f64, l: f64) -> f64 {
    4.0 * k / (sqrt3() * l)
}

/// Inverts `k = (√3 L/4) μ(2-μ)` on the unstable branch `μ ∈ (1, 2)`.
pub fn mu_of_k(k: i64, l: f64) -> Result<f64> {
    let a = branch_ratio(k as f64, l);
    if !(k > 0 && l > 0.0 && 1.0 - a > 4.0 * f64::EPSILON) {
        return Err(Error::NoSuchMode { k, l });
    }
    Ok(1.0 + (1.0 - a).sqrt())
}

/// Largest admissible transverse mode index for period `L` (possibly zero).
pub fn max_mode(l: f64) -> i64 {
    let mut k = (sqrt3() * l / 4.0).floor() as i64 + 1;
    while k > 0 && mu_of_k(k, l).is_err() {
        k -= 1;
    }
    k
}

/// Whether the period `L` admits at least one unstable transverse mode.
pub fn is_unstable_period(l: f64) -> bool {
    mu_of_k(1, l).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub mu: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub eta: f64,
    pub k: i64,
    pub l: f64,
}

impl DispersionPoint {
    pub fn new(k: i64, l: f64) -> Result<Self> {
        let mu = mu_of_k(k, l)?;
        let sigma = sigma_of_mu(mu)?;
        Ok(DispersionPoint { mu, lambda: 2.0 * sigma, sigma, eta: mu * (2.0 - mu), k, l })
    }

    /// Physical transverse wavenumber `k/L`.
    pub fn wavenumber(&self) -> f64 {
        self.k as f64 / self.l
    }
}

pub fn admissible_modes(l: f64) -> Vec<DispersionPoint> {
    (1..=max_mode(l)).filter_map(|k| DispersionPoint::new(k, l).ok()).collect()
}

/// Fastest-growing admissible mode; ties go to the smallest `k`.
pub fn most_unstable_point(l: f64) -> Result<DispersionPoint> {
    let mut best: Option<DispersionPoint> = None;
    for p in admissible_modes(l) {
        if best.map_or(true, |b| p.sigma > b.sigma) {
            best = Some(p);
        }
    }
    best.ok_or(Error::NoUnstableMode { l })
}

/// `P(μ) = μ⁴ - 4μ² + 4λμ + 3η²`.
pub fn quartic_p(mu: Complex64, lambda: Complex64, eta: f64) -> Complex64 {
    mu.powu(4) - 4.0 * mu * mu + 4.0 * lambda * mu + 3.0 * eta * eta
}

fn quartic_dp(mu: Complex64, lambda: Complex64) -> Complex64 {
    4.0 * mu.powu(3) - 8.0 * mu + 4.0 * lambda
}

/// Roots of `P` from the companion matrix, Newton-polished and sorted by real part.
pub fn quartic_roots(lambda: Complex64, eta: f64) -> Result<[Complex64; 4]> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let coeffs = [zero, Complex64::new(-4.0, 0.0), 4.0 * lambda, Complex64::new(3.0 * eta * eta, 0.0)];
    let companion = DMatrix::from_fn(4, 4, |i, j| {
        if i == 0 {
            -coeffs[j]
        } else if i == j + 1 {
            one
        } else {
            zero
        }
    });
    let eig = Schur::try_new(companion, 1e-15, 10_000)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::SingularSystem("companion eigensolve did not converge".into()))?;
    let mut roots = [zero; 4];
    for (r, e) in roots.iter_mut().zip(eig.iter()) {
        let mut z = *e;
        for _ in 0..50 {
            let dp = quartic_dp(z, lambda);
            if dp.norm() == 0.0 {
                break;
            }
            let step = quartic_p(z, lambda, eta) / dp;
            z -= step;
            if step.norm() <= 1e-13 * z.norm().max(1.0) {
                break;
            }
        }
        *r = z;
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Leading coefficient of `g_μ` at `+∞`: `C₊(μ) = μ³ + 2μ + λ - 3μ²`.
pub fn c_plus(mu: f64, lambda: f64) -> f64 {
    mu.powi(3) + 2.0 * mu + lambda - 3.0 * mu * mu
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraReport {
    /// `|P(μ)|` with `λ = 2σ`, `η = μ(2-μ)`.
    pub quartic: f64,
    /// `|C₊(μ)|`.
    pub c_plus: f64,
    /// `|λ + μ(μ-1)(μ-2)|`.
    pub lambda_identity: f64,
    /// `|η² - μ²(μ-2)²|`.
    pub eta_identity: f64,
    /// `|3η² - 16k²/L²|`.
    pub eta_of_k: f64,
    /// `|2σ - μ(μ-1)(2-μ)|`.
    pub growth_identity: f64,
}

impl AlgebraReport {
    pub fn max_residual(&self) -> f64 {
        [self.quartic, self.c_plus, self.lambda_identity, self.eta_identity, self.eta_of_k, self.growth_identity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn verify_algebraic_system(p: &DispersionPoint) -> AlgebraReport {
    let mu = p.mu;
    let lam = Complex64::new(p.lambda, 0.0);
    AlgebraReport {
        quartic: quartic_p(Complex64::new(mu, 0.0), lam, p.eta).norm(),
        c_plus: c_plus(mu, p.lambda).abs(),
        lambda_identity: (p.lambda + mu * (mu - 1.0) * (mu - 2.0)).abs(),
        eta_identity: (p.eta * p.eta - (mu * (mu - 2.0)).powi(2)).abs(),
        eta_of_k: (3.0 * p.eta * p.eta - 16.0 * (p.k as f64 / p.l).powi(2)).abs(),
        growth_identity: (2.0 * p.sigma - mu * (mu - 1.0) * (2.0 - mu)).abs(),
    }
}

/// General solution `g_μ(z) = e^{μz}(μ³ + 2μ + λ - 3μ² tanh z)` of the profile ODE.
pub fn g_mu(z: f64, mu: f64, lambda: f64) -> f64 {
    (mu * z).exp() * (mu.powi(3) + 2.0 * mu + lambda - 3.0 * mu * mu * z.tanh())
}

/// `g(z) = 3μ² e^{μz}(1 - tanh z)` and its first two derivatives, evaluated without
/// cancellation on both half-lines.
pub fn g_closed(z: f64, mu: f64) -> [f64; 3] {
    let c = 3.0 * mu * mu;
    if z >= 0.0 {
        let e = (-2.0 * z).exp();
        let p = 1.0 + e;
        let a = c * ((mu - 2.0) * z).exp();
        [
            a * 2.0 / p,
            a * (2.0 * mu / p - 4.0 / (p * p)),
            a * (2.0 * mu * mu / p - 8.0 * mu / (p * p) + 8.0 * (1.0 - e) / p.powi(3)),
        ]
    } else {
        let f = (2.0 * z).exp();
        let p = 1.0 + f;
        let a = c * (mu * z).exp();
        [
            a * 2.0 / p,
            a * (2.0 * mu / p - 4.0 * f / (p * p)),
            a * (2.0 * mu * mu / p - 8.0 * mu * f / (p * p) + 8.0 * f * (f - 1.0) / p.powi(3)),
        ]
    }
}

/// Box half-width for which the slow eigenmode tail `e^{-(2-μ)X/2}` drops below `tol`.
pub fn tail_half_width(mu: f64, tol: f64) -> f64 {
    -tol.ln() / (0.5 * (2.0 - mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableModeKP {
    pub point: DispersionPoint,
    pub grid: Grid1D,
    /// `V(x)`, unit `L²` norm, `V(0) > 0`.
    pub profile: Vec<Complex64>,
    /// Factor applied to `g''(x/2)` to normalize.
    pub scale: f64,
}

impl UnstableModeKP {
    pub fn sigma(&self) -> f64 {
        self.point.sigma
    }

    pub fn spectrum(&self) -> Spectrum1D {
        Spectrum1D { grid: self.grid, mode: self.point.k, values: self.profile.clone() }
    }

    /// `∂_x^{-1} V = 2 g'(x/2)`, scaled consistently with `V`.
    pub fn antiderivative(&self) -> Vec<Complex64> {
        self.grid.sample(|x| 2.0 * self.scale * g_closed(0.5 * x, self.point.mu)[1])
    }
}

pub fn eigenprofile(point: &DispersionPoint, grid: &Grid1D) -> Result<UnstableModeKP> {
    let cp = c_plus(point.mu, point.lambda);
    if cp.abs() > 1e-10 {
        return Err(Error::DomainError(format!("C+(mu) = {cp:.3e} is not zero")));
    }
    let raw = grid.sample(|x| g_closed(0.5 * x, point.mu)[2]);
    let norm = grid::l2(grid, &raw);
    let mut scale = 1.0 / norm;
    if raw[grid.n / 2].re < 0.0 {
        scale = -scale;
    }
    let profile = raw.iter().map(|v| v * scale).collect();
    Ok(UnstableModeKP { point: *point, grid: *grid, profile, scale })
}

pub fn most_unstable(l: f64, grid: &Grid1D) -> Result<UnstableModeKP> {
    eigenprofile(&most_unstable_point(l)?, grid)
}

fn kdv_line(grid: &Grid1D) -> Vec<Complex64> {
    grid.sample(kdv_q)
}

/// `A_j v = -v_x + (Qv)_x + v_xxx + j² ∂_x^{-1} v`.
pub fn apply_aj(v: &Spectrum1D, j: f64) -> Result<Spectrum1D> {
    let g = v.grid;
    if j != 0.0 {
        let scale = v.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mean = v.mean().norm();
        if mean > ZERO_MODE_TOL * scale {
            return Err(Error::ZeroModeViolation { mode: v.mode, mean });
        }
    }
    Ok(Spectrum1D { grid: g, mode: v.mode, values: aj_values(&g, &v.values, j) })
}

/// `A_j` with the zero-frequency content of `∂_x^{-1}` discarded rather than checked.
fn aj_values(g: &Grid1D, v: &[Complex64], j: f64) -> Vec<Complex64> {
    let q = kdv_line(g);
    let qv: Vec<Complex64> = q.iter().zip(v).map(|(a, b)| a * b).collect();
    let d1 = g.derivative_symbol(1);
    let d3 = g.derivative_symbol(3);
    let inv = g.antiderivative_symbol();
    let mut c = crate::fft::forward(v);
    let cq = crate::fft::forward(&qv);
    for i in 0..g.n {
        c[i] = -d1[i] * c[i] + d1[i] * cq[i] + d3[i] * c[i] + j * j * inv[i] * c[i];
    }
    crate::fft::inverse_batch(&mut c, g.n);
    c
}

/// `Au = -u_x + (Qu)_x + u_xxx - ∂_x^{-1} ∂_yy u` on the cylinder.
pub fn apply_a(f: &Field) -> Result<Field> {
    let sp = f.transform_forward();
    sp.check_zero_modes()?;
    let g = f.grid;
    let line = g.line();
    let q = kdv_line(&line);
    let mut qu = f.clone();
    for row in qu.values.chunks_mut(g.nx) {
        for (v, qi) in row.iter_mut().zip(&q) {
            *v *= qi;
        }
    }
    let cq = qu.transform_forward();
    let d1 = line.derivative_symbol(1);
    let d3 = line.derivative_symbol(3);
    let inv = line.antiderivative_symbol();
    let mut out = sp.clone();
    for jy in 0..g.ny {
        let ky = g.ky(jy);
        for i in 0..g.nx {
            let idx = jy * g.nx + i;
            out.coeffs[idx] = (-d1[i] + d3[i] + ky * ky * inv[i]) * sp.coeffs[idx] + d1[i] * cq.coeffs[idx];
        }
    }
    let mut r = out.transform_inverse();
    r.kind = f.kind;
    if f.kind == Kind::Real {
        for v in &mut r.values {
            v.im = 0.0;
        }
    }
    Ok(r)
}

/// `‖σV + A_{k/L} V‖ / ‖V‖` for a constructed mode. On a box too short for the tails,
/// the truncated profile picks up a spurious x-mean, which `∂_x^{-1}` discards.
pub fn eigen_residual(mode: &UnstableModeKP) -> f64 {
    let av = aj_values(&mode.grid, &mode.profile, mode.point.wavenumber());
    let r: Vec<Complex64> = mode.profile.iter().zip(&av).map(|(a, b)| mode.sigma() * a + b).collect();
    grid::l2(&mode.grid, &r) / grid::l2(&mode.grid, &mode.profile)
}

/// Dense real matrix of a Fourier multiplier in the physical sample basis.
pub(crate) fn multiplier_matrix(grid: &Grid1D, symbol: &[Complex64]) -> DMatrix<f64> {
    let n = grid.n;
    let mut e0 = vec![Complex64::new(0.0, 0.0); n];
    e0[0] = Complex64::new(1.0, 0.0);
    let col = grid::apply_symbol(&e0, symbol);
    DMatrix::from_fn(n, n, |i, k| col[(i + n - k) % n].re)
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `𝓛w = -w_xx - Qw + w` as a symmetric matrix.
pub fn l_operator_matrix(grid: &Grid1D) -> DMatrix<f64> {
    let mut m = -multiplier_matrix(grid, &grid.derivative_symbol(2));
    for i in 0..grid.n {
        m[(i, i)] += 1.0 - kdv_q(grid.x(i));
    }
    symmetrize(m)
}

/// Eigenvalues of `𝓛` below the continuum threshold `1`, ascending.
pub fn l_operator_spectrum(grid: &Grid1D) -> Vec<f64> {
    let eig = SymmetricEigen::new(l_operator_matrix(grid));
    let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().filter(|&e| e < 1.0).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn l_operator_apply(grid: &Grid1D, w: &[Complex64]) -> Vec<Complex64> {
    let d2 = grid::diff(grid, w, 2);
    (0..grid.n).map(|i| -d2[i] + (1.0 - kdv_q(grid.x(i))) * w[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub tau: f64,
    pub w: Spectrum1D,
    /// Relative residual of the energy identity for the solve.
    pub identity_residual: f64,
    /// `|w|_0 / |H|_1`.
    pub ratio_s0: f64,
    /// `|w|_1 / |H|_2`.
    pub ratio_s1: f64,
}

/// Solves `(γ₀ + iτ) w + A_j w = H_x` densely.
pub fn resolvent_solve(j: f64, gamma0: f64, tau: f64, h: &Spectrum1D) -> Result<ResolventSolution> {
    let g = h.grid;
    let n = g.n;
    let d1 = multiplier_matrix(&g, &g.derivative_symbol(1));
    let d3 = multiplier_matrix(&g, &g.derivative_symbol(3));
    let inv = multiplier_matrix(&g, &g.antiderivative_symbol());
    let mut dq = d1.clone();
    for k in 0..n {
        let qk = kdv_q(g.x(k));
        for i in 0..n {
            dq[(i, k)] *= qk;
        }
    }
    let a = -&d1 + dq + d3 + inv * (j * j);
    let shift = Complex64::new(gamma0, tau);
    let m = DMatrix::from_fn(n, n, |r, c| {
        let v = Complex64::new(a[(r, c)], 0.0);
        if r == c {
            v + shift
        } else {
            v
        }
    });
    let hx = grid::diff(&g, &h.values, 1);
    let rhs = DVector::from_column_slice(&hx);
    let lu = m.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-14 * dmax) {
        return Err(Error::SingularSystem(format!("resolvent at gamma0={gamma0}, tau={tau}")));
    }
    let sol = lu.solve(&rhs).ok_or_else(|| Error::SingularSystem("LU solve failed".into()))?;
    let w = Spectrum1D { grid: g, mode: h.mode, values: sol.iter().cloned().collect() };
    let identity_residual = conservation_identity_residual(&w, h, j, gamma0);
    let hn1 = h.sobolev(1);
    let hn2 = h.sobolev(2);
    Ok(ResolventSolution {
        tau,
        ratio_s0: if hn1 > 0.0 { w.l2() / hn1 } else { 0.0 },
        ratio_s1: if hn2 > 0.0 { w.sobolev(1) / hn2 } else { 0.0 },
        w,
        identity_residual,
    })
}

pub fn resolvent_sweep(j: f64, gamma0: f64, taus: &[f64], h: &Spectrum1D) -> Result<Vec<ResolventSolution>> {
    taus.par_iter().map(|&t| resolvent_solve(j, gamma0, t, h)).collect()
}

/// Relative defect of `γ₀((w,𝓛w) + j²|∂⁻¹w|²) = Re((H_x,𝓛w) + j²(H,∂⁻¹w))`.
pub fn conservation_identity_residual(w: &Spectrum1D, h: &Spectrum1D, j: f64, gamma0: f64) -> f64 {
    let g = w.grid;
    let lw = l_operator_apply(&g, &w.values);
    let iw = grid::antideriv(&g, &w.values);
    let hx = grid::diff(&g, &h.values, 1);
    let energy = grid::inner(&g, &w.values, &lw).re + j * j * grid::l2(&g, &iw).powi(2);
    let lhs = gamma0 * energy;
    let a = grid::inner(&g, &hx, &lw);
    let b = grid::inner(&g, &h.values, &iw);
    let rhs = (a + j * j * b).re;
    let scale = gamma0 * (grid::inner(&g, &w.values, &lw).re.abs() + j * j * grid::l2(&g, &iw).powi(2))
        + a.norm()
        + j * j * b.norm();
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}
