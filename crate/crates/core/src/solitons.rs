//! Closed-form solitary waves: the KdV profile `3 sech²(x/2)` and the NLS ground
//! state `√2 sech x`, with their scaling families.

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid1D, Grid2D, Kind};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

pub fn kdv_q(x: f64) -> f64 {
    3.0 * sech(0.5 * x).powi(2)
}

pub fn kdv_q_prime(x: f64) -> f64 {
    -3.0 * sech(0.5 * x).powi(2) * (0.5 * x).tanh()
}

pub fn nls_q(x: f64) -> f64 {
    std::f64::consts::SQRT_2 * sech(x)
}

pub fn nls_q_prime(x: f64) -> f64 {
    -std::f64::consts::SQRT_2 * sech(x) * x.tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Kdv,
    Nls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub family: Family,
    /// Speed `c` (kdv) or amplitude `λ` (nls).
    pub scale: f64,
    pub center: f64,
    /// Only meaningful for nls.
    pub phase: f64,
}

impl SolitonSpec {
    pub fn kdv(c: f64) -> Self {
        SolitonSpec { family: Family::Kdv, scale: c, center: 0.0, phase: 0.0 }
    }

    pub fn nls(lambda: f64) -> Self {
        SolitonSpec { family: Family::Nls, scale: lambda, center: 0.0, phase: 0.0 }
    }

    pub fn centered_at(mut self, a: f64) -> Self {
        self.center = a;
        self
    }

    pub fn with_phase(mut self, gamma: f64) -> Self {
        self.phase = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::DomainError(format!("soliton scale {} must be positive", self.scale)));
        }
        Ok(())
    }

    /// Profile at offset `d = x - a` from the center.
    pub fn value_at_offset(&self, d: f64) -> Complex64 {
        let s = self.scale;
        match self.family {
            Family::Kdv => Complex64::new(s * kdv_q(s.sqrt() * d), 0.0),
            Family::Nls => Complex64::from_polar(s * nls_q(s * d), self.phase),
        }
    }

    /// Samples on the periodic line, wrapping `x - a` into `[-X, X)`.
    pub fn sample(&self, grid: &Grid1D) -> Vec<Complex64> {
        let period = 2.0 * grid.x_half;
        grid.sample_complex(|x| {
            let d = x - self.center;
            self.value_at_offset(d - period * (d / period).round())
        })
    }

    /// The y-independent field on the cylinder.
    pub fn field(&self, grid: &Grid2D) -> Field {
        let line = self.sample(&grid.line());
        let kind = match self.family {
            Family::Kdv => Kind::Real,
            Family::Nls => Kind::Complex,
        };
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.ny {
            values.extend_from_slice(&line);
        }
        Field { grid: *grid, kind, values }
    }
}

/// The unit KdV soliton `Q(x) = 3 sech²(x/2)` as a field.
pub fn kdv_field(grid: &Grid2D) -> Field {
    SolitonSpec::kdv(1.0).field(grid)
}

/// The NLS ground state `√2 sech x` as a complex field.
pub fn nls_field(grid: &Grid2D) -> Field {
    SolitonSpec::nls(1.0).field(grid)
}

/// Sup-norm of the stationary-equation residual on the line.
///
/// kdv with speed `c`: `-c φ' + φ φ' + φ'''` (profile at rest in the frame moving at `c`);
/// nls with amplitude `λ`: `-φ'' + λ² φ - |φ|² φ`.
pub fn stationarity_residual(spec: &SolitonSpec, grid: &Grid1D) -> Result<f64> {
    spec.validate()?;
    let phi = spec.sample(grid);
    let r: Vec<Complex64> = match spec.family {
        Family::Kdv => {
            let d1 = grid::diff(grid, &phi, 1);
            let d3 = grid::diff(grid, &phi, 3);
            (0..grid.n).map(|i| -spec.scale * d1[i] + phi[i] * d1[i] + d3[i]).collect()
        }
        Family::Nls => {
            let d2 = grid::diff(grid, &phi, 2);
            let l2 = spec.scale * spec.scale;
            (0..grid.n).map(|i| -d2[i] + l2 * phi[i] - phi[i].norm_sqr() * phi[i]).collect()
        }
    };
    Ok(r.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
