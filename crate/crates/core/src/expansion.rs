//! High-order approximate solutions `u^ap = δ(u⁰ + Σ_{k=1}^M δ^k u^k)` seeded by the most
//! unstable transverse mode.
//!
//! The iterates solve the linearized equation forced by products of lower iterates. They
//! are integrated together as one stacked system with the same exponential RK4 scheme,
//! symbol and dealiasing as the nonlinear stepper, so `Q + u^ap` and the full evolution
//! of `Q + δu⁰` differ by `O(δ^{M+2})` at the discrete level too.

use crate::error::{Error, Result};
use crate::evolution::{etdrk4_step, Equation, IntegratorConfig, Scheme, Stepper};
use crate::fft;
use crate::grid::{Field, Grid2D, Kind};
use crate::kp_spectrum::{self, most_unstable};
use crate::nls_spectrum::most_unstable_nls;
use crate::solitons::SolitonSpec;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// The unstable mode `u⁰(0) = 2cos(k₀y/L)·V(x)` (KP) or `2cos(k₀y/L)(V₁ + iV₂)` (NLS).
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMode {
    pub equation: Equation,
    pub grid: Grid2D,
    pub k0: i64,
    pub sigma0: f64,
    /// x-profile carried by both modes `±k₀`.
    pub profile: Vec<Complex64>,
}

pub fn seed_mode(equation: Equation, grid: Grid2D) -> Result<SeedMode> {
    let line = grid.line();
    let (k0, sigma0, profile) = match equation {
        Equation::Kp => {
            let m = most_unstable(grid.l, &line)?;
            (m.point.k, m.sigma(), m.profile)
        }
        Equation::Nls => {
            let m = most_unstable_nls(grid.l, &line)?;
            let p = m.v1.iter().zip(&m.v2).map(|(a, b)| a + Complex64::i() * b).collect();
            (m.k, m.growth_rate(), p)
        }
    };
    let seed = SeedMode { equation, grid, k0, sigma0, profile };
    seed.check_capacity(0)?;
    Ok(seed)
}

impl SeedMode {
    /// Errors unless modes up to `(order + 1)k₀` survive the transverse dealiasing.
    pub fn check_capacity(&self, order: usize) -> Result<()> {
        let top = (order as i64 + 1) * self.k0;
        if 3 * top >= self.grid.ny as i64 {
            return Err(Error::DomainError(format!(
                "order {order} needs transverse modes up to {top}; Ny={} keeps |m| < Ny/3",
                self.grid.ny
            )));
        }
        Ok(())
    }

    pub fn modes(&self, t: f64) -> BTreeMap<i64, Vec<Complex64>> {
        let g = (self.sigma0 * t).exp();
        let p: Vec<Complex64> = self.profile.iter().map(|v| v * g).collect();
        BTreeMap::from([(-self.k0, p.clone()), (self.k0, p)])
    }

    /// `u⁰(t) = e^{σ₀t}u⁰(0)`.
    pub fn field(&self, t: f64) -> Field {
        Field::from_modes(self.grid, self.equation.kind(), &self.modes(t)).expect("seed modes fit the grid")
    }

    /// `c_s = ‖u⁰(0)‖` over the box.
    pub fn norm(&self) -> f64 {
        self.field(0.0).l2()
    }

    /// `‖σ₀u⁰ + Au⁰‖/‖u⁰‖` (KP) or `‖iσ₀u⁰ + Au⁰‖/‖u⁰‖` (NLS) at `t = 0`.
    pub fn residual(&self) -> Result<f64> {
        let u = self.field(0.0);
        let r = match self.equation {
            Equation::Kp => kp_spectrum::apply_a(&u)?.add_scaled(&u, Complex64::new(self.sigma0, 0.0))?,
            Equation::Nls => {
                let q = SolitonSpec::nls(1.0).field(&self.grid);
                let mut r = u.laplacian();
                for ((r, v), q) in r.values.iter_mut().zip(&u.values).zip(&q.values) {
                    let q2 = q.norm_sqr();
                    *r += Complex64::new(0.0, self.sigma0) * v - v + 2.0 * q2 * v + q2 * v.conj();
                }
                r
            }
        };
        Ok(r.l2() / u.l2())
    }

    /// Analytic samples of `u⁰` as an iterate.
    pub fn iterate(&self, times: &[f64]) -> Iterate {
        let mut modes: BTreeMap<i64, Vec<Vec<Complex64>>> = BTreeMap::new();
        for &t in times {
            for (m, p) in self.modes(t) {
                modes.entry(m).or_default().push(p);
            }
        }
        Iterate { k: 0, times: times.to_vec(), modes }
    }
}

/// Transverse modes `m` that `u^k` may occupy: multiples of `k₀` with `|m| ≤ (k+1)k₀` and
/// `m/k₀ ≡ k+1 (mod 2)`.
pub fn support(k: usize, k0: i64) -> Vec<i64> {
    let top = k as i64 + 1;
    (0..=top).map(|s| (2 * s - top) * k0).collect()
}

/// One iterate, sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub k: usize,
    pub times: Vec<f64>,
    /// `modes[m][n]` is the x-profile of transverse mode `m` at `times[n]`.
    pub modes: BTreeMap<i64, Vec<Vec<Complex64>>>,
}

impl Iterate {
    pub fn support(&self) -> Vec<i64> {
        self.modes.keys().copied().collect()
    }

    pub fn field(&self, grid: Grid2D, kind: Kind, sample: usize) -> Result<Field> {
        let modes: BTreeMap<i64, Vec<Complex64>> = self
            .modes
            .iter()
            .map(|(&m, s)| {
                s.get(sample)
                    .map(|p| (m, p.clone()))
                    .ok_or_else(|| Error::DomainError(format!("sample {sample} out of range")))
            })
            .collect::<Result<_>>()?;
        Field::from_modes(grid, kind, &modes)
    }

    /// `‖u^k_m(t)‖_{L²(dx)}` per mode and sample.
    pub fn mode_norms(&self, grid: &Grid2D) -> BTreeMap<i64, Vec<f64>> {
        let dx = grid.dx();
        self.modes
            .iter()
            .map(|(&m, s)| (m, s.iter().map(|p| (p.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()).collect()))
            .collect()
    }

    /// `‖u^k(t)‖` over the box per sample.
    pub fn norms(&self, grid: &Grid2D) -> Vec<f64> {
        let per_mode = self.mode_norms(grid);
        let scale = 2.0 * std::f64::consts::PI * grid.l;
        (0..self.times.len()).map(|n| (scale * per_mode.values().map(|v| v[n] * v[n]).sum::<f64>()).sqrt()).collect()
    }
}

/// The coupled system for `u⁰ … u^M`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub seed: SeedMode,
    pub order: usize,
    stepper: Stepper,
    /// Dealiased soliton samples.
    q: Vec<Complex64>,
    /// Allowed transverse rows per order.
    rows: Vec<Vec<bool>>,
    state: Vec<Complex64>,
    steps: usize,
}

impl Hierarchy {
    pub fn new(seed: &SeedMode, order: usize, config: IntegratorConfig) -> Result<Self> {
        if config.scheme != Scheme::ExponentialRk4 {
            return Err(Error::DomainError("the iterate hierarchy uses the exponential-rk4 scheme".into()));
        }
        seed.check_capacity(order)?;
        let grid = seed.grid;
        let stepper = Stepper::new(seed.equation, grid, config)?;
        let q_field = match seed.equation {
            Equation::Kp => SolitonSpec::kdv(1.0).field(&grid),
            Equation::Nls => SolitonSpec::nls(1.0).field(&grid),
        };
        let q = stepper.to_physical(&stepper.admit(&q_field)?.coeffs);
        let rows = (0..=order)
            .map(|k| {
                let allowed = support(k, seed.k0);
                (0..grid.ny).map(|j| allowed.contains(&grid.mode_index(j))).collect()
            })
            .collect();
        let n = grid.len();
        let mut state = vec![ZERO; n * (order + 1)];
        state[..n].copy_from_slice(&stepper.admit(&seed.field(0.0))?.coeffs);
        stepper.enforce_constraint(&mut state[..n]);
        Ok(Hierarchy { seed: seed.clone(), order, stepper, q, rows, state, steps: 0 })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.stepper.config.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn coefficients(&self, k: usize) -> &[Complex64] {
        let n = self.seed.grid.len();
        &self.state[k * n..(k + 1) * n]
    }

    pub fn step(&mut self) -> Result<()> {
        let mut state = std::mem::take(&mut self.state);
        let etd = self.stepper.etd().expect("exponential scheme");
        let res = etdrk4_step(&mut state, etd, |v| Ok(self.explicit(v)));
        self.state = state;
        res?;
        let n = self.seed.grid.len();
        for block in self.state.chunks_mut(n) {
            self.stepper.enforce_constraint(block);
        }
        self.steps += 1;
        Ok(())
    }

    /// Explicit part of every order: the coupling to `Q` plus the forcing by lower orders.
    fn explicit(&self, v: &[Complex64]) -> Vec<Complex64> {
        let g = self.seed.grid;
        let n = g.len();
        let phys: Vec<Vec<Complex64>> = v.par_chunks(n).map(|b| self.stepper.to_physical(b)).collect();
        let out: Vec<Vec<Complex64>> = (0..=self.order)
            .into_par_iter()
            .map(|k| {
                let w = match self.seed.equation {
                    Equation::Kp => {
                        let mut w: Vec<Complex64> = (0..n).map(|i| self.q[i] * phys[k][i]).collect();
                        for j in 0..k {
                            let l = k - 1 - j;
                            for i in 0..n {
                                w[i] += 0.5 * phys[j][i] * phys[l][i];
                            }
                        }
                        let mut c = self.stepper.forward_masked(w);
                        self.stepper.dx_coeffs(&mut c);
                        c.iter_mut().for_each(|z| *z = -*z);
                        c
                    }
                    Equation::Nls => {
                        let mut w: Vec<Complex64> = (0..n)
                            .map(|i| {
                                let q2 = self.q[i].norm_sqr();
                                2.0 * q2 * phys[k][i] + q2 * phys[k][i].conj()
                            })
                            .collect();
                        for j in 0..k {
                            let l = k - 1 - j;
                            for i in 0..n {
                                let (a, b) = (phys[j][i], phys[l][i]);
                                w[i] += self.q[i] * (2.0 * a * b.conj() + a * b);
                            }
                        }
                        for j in 0..k.saturating_sub(1) {
                            for l in 0..(k - 1 - j) {
                                let m = k - 2 - j - l;
                                for i in 0..n {
                                    w[i] += phys[j][i] * phys[l][i].conj() * phys[m][i];
                                }
                            }
                        }
                        w.iter_mut().for_each(|z| *z *= Complex64::i());
                        self.stepper.forward_masked(w)
                    }
                };
                self.restrict(k, w)
            })
            .collect();
        out.concat()
    }

    fn restrict(&self, k: usize, mut c: Vec<Complex64>) -> Vec<Complex64> {
        let nx = self.seed.grid.nx;
        for (row, &keep) in c.chunks_mut(nx).zip(&self.rows[k]) {
            if !keep {
                row.fill(ZERO);
            }
        }
        c
    }

    /// Physical `u^k` at the current time.
    pub fn field(&self, k: usize) -> Field {
        self.stepper.field_from_coeffs(self.coefficients(k))
    }

    /// `u^ap = Σ_k δ^{k+1} u^k` at the current time.
    pub fn assemble(&self, delta: f64) -> Field {
        let n = self.seed.grid.len();
        let mut c = vec![ZERO; n];
        let mut p = delta;
        for k in 0..=self.order {
            for (dst, src) in c.iter_mut().zip(self.coefficients(k)) {
                *dst += src * p;
            }
            p *= delta;
        }
        self.stepper.field_from_coeffs(&c)
    }

    /// x-profiles of the allowed modes of `u^k`.
    fn profiles(&self, k: usize) -> BTreeMap<i64, Vec<Complex64>> {
        let g = self.seed.grid;
        let block = self.coefficients(k);
        support(k, self.seed.k0)
            .into_iter()
            .map(|m| {
                let slot = fft::slot_of(m, g.ny).expect("support checked against Ny");
                let mut row = block[slot * g.nx..(slot + 1) * g.nx].to_vec();
                fft::inverse_batch(&mut row, g.nx);
                (m, row)
            })
            .collect()
    }
}

/// Iterates `u⁰ … u^M` sampled every `sample_stride` steps up to `config.t_end`.
pub fn build_iterates(seed: &SeedMode, order: usize, config: IntegratorConfig) -> Result<Vec<Iterate>> {
    let steps = config.steps()?;
    let mut h = Hierarchy::new(seed, order, config)?;
    let mut iterates: Vec<Iterate> =
        (0..=order).map(|k| Iterate { k, times: Vec::new(), modes: BTreeMap::new() }).collect();
    let record = |h: &Hierarchy, its: &mut Vec<Iterate>| {
        let t = h.time();
        for (k, it) in its.iter_mut().enumerate() {
            it.times.push(t);
            for (m, p) in h.profiles(k) {
                it.modes.entry(m).or_default().push(p);
            }
        }
    };
    record(&h, &mut iterates);
    for n in 1..=steps {
        h.step()?;
        if n % config.sample_stride == 0 || n == steps {
            record(&h, &mut iterates);
        }
    }
    Ok(iterates)
}

pub fn build_iterates_kp(order: usize, grid: Grid2D, config: IntegratorConfig) -> Result<Vec<Iterate>> {
    build_iterates(&seed_mode(Equation::Kp, grid)?, order, config)
}

pub fn build_iterates_nls(order: usize, grid: Grid2D, config: IntegratorConfig) -> Result<Vec<Iterate>> {
    build_iterates(&seed_mode(Equation::Nls, grid)?, order, config)
}

/// `u^ap` for one amplitude, backed by sampled iterates.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub equation: Equation,
    pub grid: Grid2D,
    pub delta: f64,
    pub sigma0: f64,
    pub k0: i64,
    pub iterates: Vec<Iterate>,
    stepper: Stepper,
    q: Vec<Complex64>,
}

impl ApproxSolution {
    pub fn build(seed: &SeedMode, order: usize, delta: f64, config: IntegratorConfig) -> Result<Self> {
        let iterates = build_iterates(seed, order, config)?;
        Self::from_iterates(seed, iterates, delta, config)
    }

    pub fn from_iterates(
        seed: &SeedMode,
        iterates: Vec<Iterate>,
        delta: f64,
        config: IntegratorConfig,
    ) -> Result<Self> {
        if iterates.is_empty() {
            return Err(Error::DomainError("at least the seed iterate is required".into()));
        }
        let h = Hierarchy::new(seed, iterates.len() - 1, config)?;
        Ok(ApproxSolution {
            equation: seed.equation,
            grid: seed.grid,
            delta,
            sigma0: seed.sigma0,
            k0: seed.k0,
            iterates,
            stepper: h.stepper,
            q: h.q,
        })
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ApproxSolution { delta, ..self.clone() }
    }

    pub fn order(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.iterates[0].times
    }

    /// Index of the sample at time `t`.
    pub fn sample_index(&self, t: f64) -> Result<usize> {
        let times = self.times();
        let tol = 1e-9 * (1.0 + t.abs());
        times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::DomainError(format!("t={t} is not a sample time of the iterates")))
    }

    fn fields(&self, sample: usize) -> Result<Vec<Vec<Complex64>>> {
        let kind = self.equation.kind();
        self.iterates.iter().map(|it| Ok(it.field(self.grid, kind, sample)?.values)).collect()
    }

    pub fn assemble(&self, t: f64) -> Result<Field> {
        let n = self.sample_index(t)?;
        let kind = self.equation.kind();
        let mut out = Field::zeros(self.grid, kind);
        let mut p = self.delta;
        for it in &self.iterates {
            out = out.add_scaled(&it.field(self.grid, kind, n)?, Complex64::new(p, 0.0))?;
            p *= self.delta;
        }
        Ok(out)
    }

    /// Residual `F` of `Q + u^ap` in the equation, from the terms the iterates leave
    /// uncancelled:
    /// KP `½∂_x P[Σ_{j+l≥M} δ^{j+l+2} u^j u^l]`,
    /// NLS `P[Σ_{j+l≥M} δ^{j+l+2}(2Q u^j ū^l + Q u^j u^l) + Σ_{j+l+m≥M-1} δ^{j+l+m+3} u^j ū^l u^m]`.
    pub fn residual(&self, t: f64) -> Result<Field> {
        let n = self.sample_index(t)?;
        let u = self.fields(n)?;
        let order = self.order();
        let d = self.delta;
        let size = self.grid.len();
        let mut w = vec![ZERO; size];
        for j in 0..=order {
            for l in 0..=order {
                if j + l < order {
                    continue;
                }
                let c = d.powi((j + l + 2) as i32);
                for i in 0..size {
                    let (a, b) = (u[j][i], u[l][i]);
                    w[i] += match self.equation {
                        Equation::Kp => 0.5 * c * a * b,
                        Equation::Nls => c * self.q[i] * (2.0 * a * b.conj() + a * b),
                    };
                }
            }
        }
        if self.equation == Equation::Nls {
            for j in 0..=order {
                for l in 0..=order {
                    for m in 0..=order {
                        if j + l + m + 1 < order {
                            continue;
                        }
                        let c = d.powi((j + l + m + 3) as i32);
                        for i in 0..size {
                            w[i] += c * u[j][i] * u[l][i].conj() * u[m][i];
                        }
                    }
                }
            }
        }
        let mut c = self.stepper.forward_masked(w);
        if self.equation == Equation::Kp {
            self.stepper.dx_coeffs(&mut c);
        }
        Ok(self.stepper.field_from_coeffs(&c))
    }
}

pub fn assemble(approx: &ApproxSolution, t: f64) -> Result<Field> {
    approx.assemble(t)
}

pub fn residual(approx: &ApproxSolution, t: f64) -> Result<Field> {
    approx.residual(t)
}
