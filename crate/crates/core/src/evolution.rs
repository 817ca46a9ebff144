//! Pseudospectral time stepping for KP-I in the soliton frame and for cubic NLS.
//!
//! KP-I is `u_t - c u_x + u u_x + u_xxx - ∂_x^{-1} u_yy = 0` (frame speed `c = 1` makes the
//! unit soliton stationary). NLS is `i u_t + Δu - u + |u|²u = 0`. The state is advanced in
//! Fourier space: the linear part `Λ` is propagated exactly and the nonlinearity is
//! integrated by ETDRK4, or (NLS only) by Strang splitting with the exact pointwise
//! phase rotation. Dealiasing by the two-thirds rule applies to the ETDRK4 nonlinearity;
//! the split-step scheme integrates the plain pseudospectral system.

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Field, Grid2D, Kind, SpectralField};
use crate::orbit::{orbital_distance_kp, orbital_distance_nls};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const CONTOUR_POINTS: usize = 32;

/// ETDRK4 is stable for nonlinear rates up to this multiple of `1/dt`.
pub const ETDRK4_BOUND: f64 = 2.0;
/// Largest nonlinear rotation `dt·sup|u|²` accepted by the Strang scheme.
pub const STRANG_BOUND: f64 = 0.5;
/// `BlowUpSuspected` is raised when `sup|u|` exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Kp,
    Nls,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Kp => "kp",
            Equation::Nls => "nls",
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Equation::Kp => Kind::Real,
            Equation::Nls => Kind::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExponentialRk4,
    StrangSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub dealias: bool,
    /// Diagnostics are taken every `sample_stride` steps.
    pub sample_stride: usize,
    /// Fields are stored every `snapshot_stride` samples; 0 stores none.
    pub snapshot_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, t_end: f64) -> Result<Self> {
        let c = IntegratorConfig { dt, scheme, t_end, dealias: true, sample_stride: 1, snapshot_stride: 0 };
        c.validate()?;
        Ok(c)
    }

    pub fn kp_default() -> Self {
        IntegratorConfig {
            dt: 0.02,
            scheme: Scheme::ExponentialRk4,
            t_end: 10.0,
            dealias: true,
            sample_stride: 5,
            snapshot_stride: 0,
        }
    }

    pub fn nls_default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            scheme: Scheme::ExponentialRk4,
            t_end: 10.0,
            dealias: true,
            sample_stride: 10,
            snapshot_stride: 0,
        }
    }

    pub fn default_for(equation: Equation) -> Self {
        match equation {
            Equation::Kp => Self::kp_default(),
            Equation::Nls => Self::nls_default(),
        }
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_sample_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::DomainError(format!("dt={} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::DomainError(format!("t_end={} must be nonnegative", self.t_end)));
        }
        if self.sample_stride == 0 {
            return Err(Error::DomainError("sample_stride must be at least 1".into()));
        }
        self.steps().map(|_| ())
    }

    /// Number of steps covering `[0, t_end]`; `t_end` must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::DomainError(format!(
                "t_end={} is not a whole number of steps dt={}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// ETDRK4 coefficients for a diagonal linear part, by contour averaging.
#[derive(Debug, Clone)]
pub struct EtdCoefficients {
    pub e: Vec<Complex64>,
    pub e2: Vec<Complex64>,
    pub q: Vec<Complex64>,
    pub f1: Vec<Complex64>,
    pub f2: Vec<Complex64>,
    pub f3: Vec<Complex64>,
}

impl EtdCoefficients {
    pub fn new(symbol: &[Complex64], dt: f64) -> Self {
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let n = symbol.len();
        let mut c = EtdCoefficients {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        let m = CONTOUR_POINTS as f64;
        for &s in symbol {
            let z = s * dt;
            c.e.push(z.exp());
            c.e2.push((z * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (ZERO, ZERO, ZERO, ZERO);
            for root in &roots {
                let r = z + root;
                let er = r.exp();
                let r3 = r * r * r;
                q += ((r * 0.5).exp() - 1.0) / r;
                f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                f2 += (2.0 + r + er * (r - 2.0)) / r3;
                f3 += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            c.q.push(q * (dt / m));
            c.f1.push(f1 * (dt / m));
            c.f2.push(f2 * (dt / m));
            c.f3.push(f3 * (dt / m));
        }
        c
    }
}

/// One ETDRK4 step of `v' = Λv + N(v)`. The state may stack several copies of the
/// coefficient layout; coefficients are applied cyclically.
pub fn etdrk4_step<F>(v: &mut [Complex64], c: &EtdCoefficients, mut nonlinear: F) -> Result<()>
where
    F: FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let len = c.e.len();
    let nv = nonlinear(v)?;
    let a: Vec<Complex64> = (0..v.len()).map(|i| c.e2[i % len] * v[i] + c.q[i % len] * nv[i]).collect();
    let na = nonlinear(&a)?;
    let b: Vec<Complex64> = (0..v.len()).map(|i| c.e2[i % len] * v[i] + c.q[i % len] * na[i]).collect();
    let nb = nonlinear(&b)?;
    let cc: Vec<Complex64> =
        (0..v.len()).map(|i| c.e2[i % len] * a[i] + c.q[i % len] * (2.0 * nb[i] - nv[i])).collect();
    let nc = nonlinear(&cc)?;
    for i in 0..v.len() {
        let k = i % len;
        v[i] = c.e[k] * v[i] + c.f1[k] * nv[i] + 2.0 * c.f2[k] * (na[i] + nb[i]) + c.f3[k] * nc[i];
    }
    Ok(())
}

/// Linear symbol of KP-I with frame speed `c`: `i(cξ + ξ³ + η²/ξ)`, zero where `ξ = 0`.
pub fn kp_symbol(grid: &Grid2D, frame_speed: f64) -> Vec<Complex64> {
    let xi = grid.line().odd_wavenumbers();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let eta = grid.ky(j);
        for &k in &xi {
            out.push(if k == 0.0 { ZERO } else { Complex64::new(0.0, frame_speed * k + k * k * k + eta * eta / k) });
        }
    }
    out
}

/// Linear symbol of NLS: `-i(1 + ξ² + η²)`.
pub fn nls_symbol(grid: &Grid2D) -> Vec<Complex64> {
    let xi = grid.line().wavenumbers();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let eta = grid.ky(j);
        for &k in &xi {
            out.push(Complex64::new(0.0, -(1.0 + k * k + eta * eta)));
        }
    }
    out
}

/// Pseudospectral stepper for one equation on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub equation: Equation,
    pub grid: Grid2D,
    pub config: IntegratorConfig,
    pub frame_speed: f64,
    symbol: Vec<Complex64>,
    etd: Option<EtdCoefficients>,
    half: Vec<Complex64>,
    mask: Vec<bool>,
    /// `iξ` with the Nyquist slot zeroed.
    dx_symbol: Vec<Complex64>,
    xi_cut: f64,
}

impl Stepper {
    pub fn new(equation: Equation, grid: Grid2D, config: IntegratorConfig) -> Result<Self> {
        Self::with_frame_speed(equation, grid, config, 1.0)
    }

    /// KP stepper in a frame moving at speed `c`; for NLS only `c = 1` is accepted.
    pub fn with_frame_speed(equation: Equation, grid: Grid2D, config: IntegratorConfig, c: f64) -> Result<Self> {
        config.validate()?;
        if equation == Equation::Kp && config.scheme == Scheme::StrangSplit {
            return Err(Error::DomainError("strang splitting is only available for nls".into()));
        }
        if equation == Equation::Nls && c != 1.0 {
            return Err(Error::DomainError("frame speed applies to kp only".into()));
        }
        let symbol = match equation {
            Equation::Kp => kp_symbol(&grid, c),
            Equation::Nls => nls_symbol(&grid),
        };
        let etd = (config.scheme == Scheme::ExponentialRk4).then(|| EtdCoefficients::new(&symbol, config.dt));
        let half = if config.scheme == Scheme::StrangSplit {
            symbol.iter().map(|s| (s * (0.5 * config.dt)).exp()).collect()
        } else {
            Vec::new()
        };
        let mut mask = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                mask.push(!config.dealias || grid.keeps(i, j));
            }
        }
        let line = grid.line();
        let dx_symbol = line.derivative_symbol(1);
        let xi_cut = (0..grid.nx)
            .filter(|&i| !config.dealias || line.keeps(i))
            .map(|i| line.odd_wavenumbers()[i].abs())
            .fold(0.0, f64::max);
        Ok(Stepper { equation, grid, config, frame_speed: c, symbol, etd, half, mask, dx_symbol, xi_cut })
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn etd(&self) -> Option<&EtdCoefficients> {
        self.etd.as_ref()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Largest admissible `dt` for data with the given `sup|u|`.
    pub fn stability_bound(&self, sup: f64) -> f64 {
        match (self.equation, self.config.scheme) {
            (Equation::Kp, _) => ETDRK4_BOUND / (sup * self.xi_cut),
            (Equation::Nls, Scheme::ExponentialRk4) => ETDRK4_BOUND / (2.0 * sup * sup),
            (Equation::Nls, Scheme::StrangSplit) => STRANG_BOUND / (sup * sup),
        }
    }

    fn check_cfl(&self, sup: f64) -> Result<()> {
        let bound = self.stability_bound(sup);
        if self.config.dt > bound {
            return Err(Error::CflViolation { dt: self.config.dt, bound });
        }
        Ok(())
    }

    fn masked(&self, v: &[Complex64]) -> Vec<Complex64> {
        v.iter().zip(&self.mask).map(|(c, &k)| if k { *c } else { ZERO }).collect()
    }

    /// Physical samples of the coefficient vector `v` after dealiasing.
    pub fn to_physical(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut u = self.masked(v);
        fft::inverse_2d(&mut u, self.grid.nx, self.grid.ny);
        if self.equation == Equation::Kp {
            for z in &mut u {
                z.im = 0.0;
            }
        }
        u
    }

    /// Forward transform followed by the dealiasing mask.
    pub fn forward_masked(&self, mut w: Vec<Complex64>) -> Vec<Complex64> {
        fft::forward_2d(&mut w, self.grid.nx, self.grid.ny);
        for (c, &k) in w.iter_mut().zip(&self.mask) {
            if !k {
                *c = ZERO;
            }
        }
        w
    }

    /// `∂_x` of a coefficient vector.
    pub fn dx_coeffs(&self, w: &mut [Complex64]) {
        let nx = self.grid.nx;
        for (idx, c) in w.iter_mut().enumerate() {
            *c *= self.dx_symbol[idx % nx];
        }
    }

    /// Nonlinear term in Fourier space from physical samples `u`.
    pub fn nonlinear_from_physical(&self, u: &[Complex64]) -> Vec<Complex64> {
        match self.equation {
            Equation::Kp => {
                let w = u.iter().map(|z| Complex64::new(-0.5 * z.re * z.re, 0.0)).collect();
                let mut w = self.forward_masked(w);
                self.dx_coeffs(&mut w);
                w
            }
            Equation::Nls => {
                let w = u.iter().map(|z| Complex64::new(0.0, z.norm_sqr()) * z).collect();
                self.forward_masked(w)
            }
        }
    }

    pub fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.nonlinear_from_physical(&self.to_physical(v))
    }

    /// Zeroes the `(ξ = 0, m ≠ 0)` slots (KP only).
    pub fn enforce_constraint(&self, v: &mut [Complex64]) {
        if self.equation == Equation::Kp {
            for j in 1..self.grid.ny {
                v[j * self.grid.nx] = ZERO;
            }
        }
    }

    /// Advances the coefficient vector by one step and returns `sup|u|` at the start.
    pub fn step(&self, v: &mut [Complex64]) -> Result<f64> {
        let u = match self.config.scheme {
            Scheme::ExponentialRk4 => self.to_physical(v),
            Scheme::StrangSplit => {
                let mut u = v.to_vec();
                fft::inverse_2d(&mut u, self.grid.nx, self.grid.ny);
                u
            }
        };
        let sup = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.check_cfl(sup)?;
        match self.config.scheme {
            Scheme::ExponentialRk4 => {
                let etd = self.etd.as_ref().expect("etd coefficients for exponential scheme");
                let mut first = Some(self.nonlinear_from_physical(&u));
                etdrk4_step(v, etd, |s| Ok(first.take().unwrap_or_else(|| self.nonlinear(s))))?;
            }
            Scheme::StrangSplit => {
                for (c, h) in v.iter_mut().zip(&self.half) {
                    *c *= h;
                }
                // No projection here: a mask after the exact rotation breaks the symmetry
                // of the splitting and drops it to first order.
                let mut u = v.to_vec();
                fft::inverse_2d(&mut u, self.grid.nx, self.grid.ny);
                let dt = self.config.dt;
                for z in &mut u {
                    *z *= Complex64::from_polar(1.0, z.norm_sqr() * dt);
                }
                fft::forward_2d(&mut u, self.grid.nx, self.grid.ny);
                for ((c, w), h) in v.iter_mut().zip(u).zip(&self.half) {
                    *c = w * h;
                }
            }
        }
        self.enforce_constraint(v);
        Ok(sup)
    }

    /// Checks that `u` lives on this grid and satisfies the equation's preconditions.
    pub fn admit(&self, u: &Field) -> Result<SpectralField> {
        if u.grid != self.grid {
            return Err(Error::SizeMismatch { expected: self.grid.len(), got: u.grid.len() });
        }
        let s = u.transform_forward();
        if self.equation == Equation::Kp {
            if u.kind != Kind::Real {
                return Err(Error::DomainError("kp data must be real".into()));
            }
            s.check_zero_modes()?;
        }
        Ok(s)
    }

    pub fn field_from_coeffs(&self, v: &[Complex64]) -> Field {
        SpectralField { grid: self.grid, kind: self.equation.kind(), coeffs: v.to_vec() }.transform_inverse()
    }

    /// Advances `u` by `steps` steps.
    pub fn advance(&self, u: &Field, steps: usize) -> Result<Field> {
        let mut v = self.admit(u)?.coeffs;
        self.enforce_constraint(&mut v);
        for _ in 0..steps {
            self.step(&mut v)?;
        }
        Ok(self.field_from_coeffs(&v))
    }
}

/// One step of KP-I (unit frame speed).
pub fn step_kp(u: &Field, config: &IntegratorConfig) -> Result<Field> {
    Stepper::new(Equation::Kp, u.grid, *config)?.advance(u, 1)
}

/// One step of NLS with the configured scheme.
pub fn step_nls(u: &Field, config: &IntegratorConfig) -> Result<Field> {
    Stepper::new(Equation::Nls, u.grid, *config)?.advance(u, 1)
}

/// Conserved quantities: `∫u`, `∫|u|²` and, for NLS, `∫(|∇u|² + |u|² - |u|⁴/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    pub integral: Complex64,
    pub mass: f64,
    pub hamiltonian: Option<f64>,
}

pub fn invariants(u: &Field, equation: Equation) -> Invariants {
    let g = u.grid;
    let cell = g.dx() * g.dy();
    let mass = u.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
    let hamiltonian = (equation == Equation::Nls).then(|| {
        let s = u.transform_forward();
        let k = g.line().wavenumbers();
        let mut grad = 0.0;
        for j in 0..g.ny {
            let eta = g.ky(j);
            for i in 0..g.nx {
                grad += (k[i] * k[i] + eta * eta) * s.coeffs[j * g.nx + i].norm_sqr();
            }
        }
        let quartic = u.values.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() * cell;
        grad * g.area() + mass - 0.5 * quartic
    });
    Invariants { integral: u.integral(), mass, hamiltonian }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub l2: f64,
    pub integral: f64,
    pub mass: f64,
    pub hamiltonian: Option<f64>,
    pub orbital_distance: f64,
    pub sup: f64,
}

pub fn diagnostics(t: f64, u: &Field, equation: Equation) -> Diagnostics {
    let inv = invariants(u, equation);
    let orbital_distance = match equation {
        Equation::Kp => orbital_distance_kp(u).distance,
        Equation::Nls => orbital_distance_nls(u).distance,
    };
    Diagnostics {
        t,
        l2: inv.mass.sqrt(),
        integral: inv.integral.re,
        mass: inv.mass,
        hamiltonian: inv.hamiltonian,
        orbital_distance,
        sup: u.sup(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub equation: Equation,
    pub times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub snapshot_times: Vec<f64>,
    pub fields: Vec<Field>,
    pub final_state: Field,
    pub final_time: f64,
    pub stopped_early: bool,
}

/// Evolves `u0` from `t = 0` to `config.t_end`.
pub fn evolve<F>(u0: &Field, equation: Equation, config: &IntegratorConfig, on_sample: F) -> Result<Trajectory>
where
    F: FnMut(&Diagnostics, &Field) -> Control,
{
    let stepper = Stepper::new(equation, u0.grid, *config)?;
    evolve_with(&stepper, u0, 0.0, on_sample)
}

/// Evolves `u0` from `t0` for `config.t_end` time units with a prepared stepper.
///
/// Diagnostics are sampled at `t0` and every `sample_stride` steps (and at the final
/// step). `on_sample` may stop the run early.
pub fn evolve_with<F>(stepper: &Stepper, u0: &Field, t0: f64, mut on_sample: F) -> Result<Trajectory>
where
    F: FnMut(&Diagnostics, &Field) -> Control,
{
    let cfg = stepper.config;
    let steps = cfg.steps()?;
    let equation = stepper.equation;
    let mut v = stepper.admit(u0)?.coeffs;
    stepper.enforce_constraint(&mut v);
    let initial_sup = u0.sup();
    let mut traj = Trajectory {
        equation,
        times: Vec::new(),
        diagnostics: Vec::new(),
        snapshot_times: Vec::new(),
        fields: Vec::new(),
        final_state: u0.clone(),
        final_time: t0,
        stopped_early: false,
    };
    let mut sample = |n: usize, v: &[Complex64], traj: &mut Trajectory| -> Control {
        let t = t0 + n as f64 * cfg.dt;
        let u = stepper.field_from_coeffs(v);
        let d = diagnostics(t, &u, equation);
        let count = traj.times.len();
        traj.times.push(t);
        traj.diagnostics.push(d);
        if cfg.snapshot_stride > 0 && count % cfg.snapshot_stride == 0 {
            traj.snapshot_times.push(t);
            traj.fields.push(u.clone());
        }
        let control = on_sample(&d, &u);
        traj.final_state = u;
        traj.final_time = t;
        control
    };
    if sample(0, &v, &mut traj) == Control::Stop {
        traj.stopped_early = true;
        return Ok(traj);
    }
    for n in 1..=steps {
        let sup = stepper.step(&mut v)?;
        if initial_sup > 0.0 && sup > BLOWUP_FACTOR * initial_sup {
            return Err(Error::BlowUpSuspected { t: t0 + (n - 1) as f64 * cfg.dt, ratio: sup / initial_sup });
        }
        if n % cfg.sample_stride == 0 || n == steps {
            if sample(n, &v, &mut traj) == Control::Stop {
                traj.stopped_early = n < steps;
                return Ok(traj);
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub lambda: f64,
    /// `max |v - λ²u| / max |λ²u|` at the final time.
    pub mismatch: f64,
    /// Transverse period of the scaled run divided by the original one.
    pub period_ratio: f64,
    pub t_original: f64,
    pub t_scaled: f64,
}

/// Compares the evolution of `u0` with that of `λ²u0(λx, λ²y)` under KP-I.
///
/// The scaled run uses the box `X/λ`, period `L/λ²`, time step `dt/λ³`, the same number
/// of steps, and frame speed `λ²` so that the soliton frame maps onto itself.
pub fn kp_scaling_symmetry_check(u0: &Field, config: &IntegratorConfig, lambda: f64) -> Result<ScalingReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::DomainError(format!("lambda={lambda} must be positive")));
    }
    let g = u0.grid;
    let steps = config.steps()?;
    let base = Stepper::new(Equation::Kp, g, *config)?;
    let u_t = base.advance(u0, steps)?;
    let g2 = Grid2D::new(g.nx, g.ny, g.x_half / lambda, g.l / (lambda * lambda))?;
    let l3 = lambda.powi(3);
    let mut cfg2 = *config;
    cfg2.dt = config.dt / l3;
    cfg2.t_end = steps as f64 * cfg2.dt;
    let scaled = Stepper::with_frame_speed(Equation::Kp, g2, cfg2, lambda * lambda)?;
    let s0 = Field::new(g2, Kind::Real, u0.values.iter().map(|v| v * (lambda * lambda)).collect())?;
    let v_t = scaled.advance(&s0, steps)?;
    let reference = u_t.sup() * lambda * lambda;
    let diff = v_t.values.iter().zip(&u_t.values).map(|(a, b)| (a - b * (lambda * lambda)).norm()).fold(0.0, f64::max);
    Ok(ScalingReport {
        lambda,
        mismatch: diff / reference.max(f64::MIN_POSITIVE),
        period_ratio: g2.l / g.l,
        t_original: steps as f64 * config.dt,
        t_scaled: cfg2.t_end,
    })
}
