//! Escape-time experiments: seed `Q + δu⁰`, evolve, and record when the orbital distance
//! first reaches a threshold `η`.

use crate::error::{Error, Result};
use crate::evolution::{evolve_with, Control, Equation, IntegratorConfig, Stepper};
use crate::expansion::{seed_mode, Hierarchy, SeedMode};
use crate::fit::{fit_line, LinearFit};
use crate::grid::Grid2D;
use crate::solitons::{kdv_field, nls_field};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub equation: Equation,
    /// Carries the transverse period `L`.
    pub grid: Grid2D,
    pub delta: f64,
    /// Expansion order used for the remainder `w = u^δ - Q - u^ap`.
    pub order: usize,
    pub kappa: f64,
    /// Escape threshold; `None` means `c_s κ / 4`.
    pub eta_threshold: Option<f64>,
    pub t_max: f64,
    pub integrator: IntegratorConfig,
    /// Integrate the iterates alongside and record `‖w‖`.
    pub track_remainder: bool,
}

impl ExperimentSpec {
    pub fn default_for(equation: Equation) -> Self {
        let (grid, t_max) = match equation {
            Equation::Kp => (Grid2D { nx: 2048, ny: 16, x_half: 160.0, l: 4.0 }, 100.0),
            Equation::Nls => (Grid2D { nx: 512, ny: 16, x_half: 30.0, l: 1.0 }, 20.0),
        };
        ExperimentSpec {
            equation,
            grid,
            delta: 1e-4,
            order: 3,
            kappa: 0.1,
            eta_threshold: None,
            t_max,
            integrator: IntegratorConfig::default_for(equation),
            track_remainder: false,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Grid2D::new(self.grid.nx, self.grid.ny, self.grid.x_half, self.grid.l)?;
        if !(self.kappa > 0.0) {
            return Err(Error::DomainError(format!("kappa={} must be positive", self.kappa)));
        }
        if !(self.delta >= 0.0 && self.delta <= self.kappa) {
            return Err(Error::DomainError(format!("delta={} must lie in [0, kappa={}]", self.delta, self.kappa)));
        }
        if let Some(eta) = self.eta_threshold {
            if !(eta > 0.0) {
                return Err(Error::DomainError(format!("eta_threshold={eta} must be positive")));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(Error::DomainError(format!("t_max={} must be positive", self.t_max)));
        }
        self.integrator.with_t_end(self.t_max).steps()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeReport {
    pub equation: Equation,
    pub l: f64,
    pub delta: f64,
    pub order: usize,
    pub k0: i64,
    pub sigma0: f64,
    /// `c_s = ‖u⁰(0)‖`.
    pub c_s: f64,
    pub kappa: f64,
    pub eta: f64,
    pub escaped: bool,
    /// First time the distance reaches `η`, interpolated in `log distance`.
    pub t_escape: Option<f64>,
    /// `log(κ/δ)/σ₀`.
    pub t_predicted: Option<f64>,
    /// `(t, distance)` samples.
    pub distance_series: Vec<[f64; 2]>,
    /// `(t, ‖w‖)` samples when the remainder is tracked.
    pub remainder_series: Vec<[f64; 2]>,
    /// `‖w‖` at the first sample at or after escape.
    pub remainder_norm: Option<f64>,
    pub final_time: f64,
}

impl EscapeReport {
    pub fn remainder_at(&self, t: f64) -> Option<f64> {
        self.remainder_series.iter().find(|p| (p[0] - t).abs() < 1e-9 * (1.0 + t)).map(|p| p[1])
    }
}

fn soliton(equation: Equation, grid: &Grid2D) -> crate::grid::Field {
    match equation {
        Equation::Kp => kdv_field(grid),
        Equation::Nls => nls_field(grid),
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<EscapeReport> {
    spec.validate()?;
    let seed = seed_mode(spec.equation, spec.grid)?;
    run_with_seed(spec, &seed)
}

/// Runs an experiment with a precomputed seed mode for the same equation and grid.
pub fn run_with_seed(spec: &ExperimentSpec, seed: &SeedMode) -> Result<EscapeReport> {
    spec.validate()?;
    if seed.equation != spec.equation || seed.grid != spec.grid {
        return Err(Error::DomainError("seed mode does not match the experiment".into()));
    }
    let grid = spec.grid;
    let config = spec.integrator.with_t_end(spec.t_max);
    let c_s = seed.norm();
    let eta = spec.eta_threshold.unwrap_or(0.25 * c_s * spec.kappa);
    let q = soliton(spec.equation, &grid);
    let u0 = q.add_scaled(&seed.field(0.0), Complex64::new(spec.delta, 0.0))?;
    let stepper = Stepper::new(spec.equation, grid, config)?;
    let mut hierarchy = if spec.track_remainder { Some(Hierarchy::new(seed, spec.order, config)?) } else { None };

    let mut distance_series: Vec<[f64; 2]> = Vec::new();
    let mut remainder_series: Vec<[f64; 2]> = Vec::new();
    let mut t_escape = None;
    let mut remainder_norm = None;
    let mut failure = None;
    let steps_per_sample = |t: f64| (t / config.dt).round() as usize;
    let traj = evolve_with(&stepper, &u0, 0.0, |d, u| {
        if let Some(h) = hierarchy.as_mut() {
            while h.steps_taken() < steps_per_sample(d.t) {
                if let Err(e) = h.step() {
                    failure = Some(e);
                    return Control::Stop;
                }
            }
            let w = u.sub(&q).and_then(|r| r.sub(&h.assemble(spec.delta)));
            match w {
                Ok(w) => remainder_series.push([d.t, w.l2()]),
                Err(e) => {
                    failure = Some(e);
                    return Control::Stop;
                }
            }
        }
        let dist = d.orbital_distance;
        if dist >= eta && t_escape.is_none() {
            t_escape = Some(match distance_series.last() {
                Some(&[t1, d1]) if d1 > 0.0 && dist > d1 => t1 + (d.t - t1) * (eta / d1).ln() / (dist / d1).ln(),
                _ => d.t,
            });
            remainder_norm = remainder_series.last().map(|p| p[1]);
        }
        distance_series.push([d.t, dist]);
        if t_escape.is_some() {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let t_predicted = (spec.delta > 0.0).then(|| (spec.kappa / spec.delta).ln() / seed.sigma0);
    Ok(EscapeReport {
        equation: spec.equation,
        l: grid.l,
        delta: spec.delta,
        order: spec.order,
        k0: seed.k0,
        sigma0: seed.sigma0,
        c_s,
        kappa: spec.kappa,
        eta,
        escaped: t_escape.is_some(),
        t_escape,
        t_predicted,
        distance_series,
        remainder_series,
        remainder_norm,
        final_time: traj.final_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sigma0: f64,
    /// `1/σ₀`.
    pub expected_slope: f64,
    /// `T^δ` against `ln(1/δ)`.
    pub fit: LinearFit,
    /// `κ = δ_max e^{σ₀ T(δ_max)}`, calibrated on the largest amplitude.
    pub kappa_calibrated: f64,
    /// `log(κ_cal/δ)/σ₀` per run, in the order of `reports`.
    pub t_calibrated: Vec<f64>,
    /// `T^δ` strictly decreases as `δ` grows.
    pub monotone: bool,
    pub reports: Vec<EscapeReport>,
}

impl ScalingFit {
    pub fn slope_error(&self) -> f64 {
        (self.fit.slope / self.expected_slope - 1.0).abs()
    }
}

/// Runs the template at every amplitude (in parallel) and fits `T^δ` against `ln(1/δ)`.
pub fn scaling_fit(template: &ExperimentSpec, deltas: &[f64]) -> Result<ScalingFit> {
    if deltas.len() < 2 {
        return Err(Error::DomainError("a scaling fit needs at least two amplitudes".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::DomainError("amplitudes must be positive".into()));
    }
    let seed = seed_mode(template.equation, template.grid)?;
    let reports: Vec<EscapeReport> =
        deltas.par_iter().map(|&d| run_with_seed(&template.with_delta(d), &seed)).collect::<Result<_>>()?;
    let mut times = Vec::with_capacity(reports.len());
    for r in &reports {
        times.push(r.t_escape.ok_or_else(|| {
            Error::DomainError(format!("no escape before t_max={} for delta={}", template.t_max, r.delta))
        })?);
    }
    let x: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let fit = fit_line(&x, &times)?;
    let (imax, &dmax) = deltas.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let sigma0 = seed.sigma0;
    let kappa_calibrated = dmax * (sigma0 * times[imax]).exp();
    let t_calibrated = deltas.iter().map(|d| (kappa_calibrated / d).ln() / sigma0).collect();
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let monotone = order.windows(2).all(|w| deltas[w[0]] < deltas[w[1]] && times[w[0]] > times[w[1]]);
    Ok(ScalingFit { sigma0, expected_slope: 1.0 / sigma0, fit, kappa_calibrated, t_calibrated, monotone, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderRatio {
    pub delta: f64,
    pub order: usize,
    /// Comparison time: the first sample at or after the escape of the `δ` run.
    pub t: f64,
    pub norm_full: f64,
    pub norm_half: f64,
    pub ratio: f64,
    /// `2^{M+2}`.
    pub expected: f64,
}

/// `‖w‖` for amplitudes `δ` and `δ/2` at the escape time of the `δ` run.
pub fn remainder_ratio(template: &ExperimentSpec, delta: f64) -> Result<RemainderRatio> {
    let seed = seed_mode(template.equation, template.grid)?;
    let spec = ExperimentSpec { track_remainder: true, ..template.with_delta(delta) };
    let full = run_with_seed(&spec, &seed)?;
    let t = full.remainder_series.last().map(|p| p[0]).ok_or_else(|| Error::DomainError("empty run".into()))?;
    if !full.escaped {
        return Err(Error::DomainError(format!("no escape before t_max={} for delta={delta}", template.t_max)));
    }
    let norm_full = full.remainder_norm.expect("tracked remainder");
    // The half-amplitude run only needs to reach `t`.
    let half_spec = ExperimentSpec { t_max: t, eta_threshold: Some(f64::INFINITY), ..spec.with_delta(0.5 * delta) };
    let half = run_with_seed(&half_spec, &seed)?;
    let norm_half = half.remainder_at(t).ok_or_else(|| Error::DomainError(format!("no sample at t={t}")))?;
    Ok(RemainderRatio {
        delta,
        order: template.order,
        t,
        norm_full,
        norm_half,
        ratio: norm_full / norm_half,
        expected: 2f64.powi(template.order as i32 + 2),
    })
}
