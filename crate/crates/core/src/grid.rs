//! Periodic discretization of the cylinder `[-X, X) x [0, 2πL)`.
//!
//! Samples are stored row-major with rows indexed by `y`: the value at `(x_i, y_j)` lives
//! at `values[j * nx + i]`. Spectral coefficients use the same layout with FFT ordering
//! in both directions.

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Tolerance on the x-mean of a nonzero transverse mode, relative to the field scale.
pub const ZERO_MODE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    pub x_half: f64,
}

impl Grid1D {
    pub fn new(n: usize, x_half: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("Nx={n} must be a power of two >= 2")));
        }
        if !(x_half > 0.0 && x_half.is_finite()) {
            return Err(Error::InvalidGrid(format!("X={x_half} must be positive")));
        }
        Ok(Grid1D { n, x_half })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.x_half + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        PI * fft::signed_index(i, self.n) as f64 / self.x_half
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// Wavenumbers for odd-order derivatives: the Nyquist slot is set to zero so that
    /// real data stays real.
    pub fn odd_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.n / 2] = 0.0;
        k
    }

    /// Symbol of `d^order/dx^order`.
    pub fn derivative_symbol(&self, order: u32) -> Vec<Complex64> {
        let k = if order % 2 == 1 { self.odd_wavenumbers() } else { self.wavenumbers() };
        k.iter().map(|&xi| Complex64::new(0.0, xi).powu(order)).collect()
    }

    /// Symbol of the antiderivative; zero at `ξ = 0` and at the Nyquist slot.
    pub fn antiderivative_symbol(&self) -> Vec<Complex64> {
        self.odd_wavenumbers().iter().map(|&xi| if xi == 0.0 { ZERO } else { Complex64::new(0.0, -1.0 / xi) }).collect()
    }

    /// Two-thirds rule: slot `i` survives dealiasing.
    pub fn keeps(&self, i: usize) -> bool {
        3 * fft::signed_index(i, self.n).unsigned_abs() < self.n as u64
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
        (0..self.n).map(|i| Complex64::new(f(self.x(i)), 0.0)).collect()
    }

    pub fn sample_complex(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

/// Applies a Fourier multiplier to a line of samples.
pub fn apply_symbol(v: &[Complex64], symbol: &[Complex64]) -> Vec<Complex64> {
    let mut c = fft::forward(v);
    for (a, s) in c.iter_mut().zip(symbol) {
        *a *= s;
    }
    fft::inverse_batch(&mut c, v.len());
    c
}

pub fn diff(grid: &Grid1D, v: &[Complex64], order: u32) -> Vec<Complex64> {
    apply_symbol(v, &grid.derivative_symbol(order))
}

/// Antiderivative with the zero-frequency content discarded.
pub fn antideriv(grid: &Grid1D, v: &[Complex64]) -> Vec<Complex64> {
    apply_symbol(v, &grid.antiderivative_symbol())
}

pub fn dealias_line(grid: &Grid1D, coeffs: &mut [Complex64]) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        if !grid.keeps(i) {
            *c = ZERO;
        }
    }
}

/// `∫ a b̄ dx` by the trapezoid (spectrally exact) rule.
pub fn inner(grid: &Grid1D, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(p, q)| p * q.conj()).sum::<Complex64>() * grid.dx()
}

pub fn l2(grid: &Grid1D, v: &[Complex64]) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt()
}

/// `(Σ_{m ≤ s} ‖∂^m v‖²)^{1/2}`, the integer-order Sobolev norm on the line.
pub fn sobolev(grid: &Grid1D, v: &[Complex64], s: u32) -> f64 {
    let c = fft::forward(v);
    let k = grid.wavenumbers();
    let total: f64 = c
        .iter()
        .zip(&k)
        .map(|(z, &xi)| {
            let w: f64 = (0..=s).map(|m| xi.powi(2 * m as i32)).sum();
            w * z.norm_sqr()
        })
        .sum();
    (total * 2.0 * grid.x_half).sqrt()
}

/// A single transverse Fourier mode `u_j(x) e^{i j y / L}` sampled in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    pub grid: Grid1D,
    pub mode: i64,
    pub values: Vec<Complex64>,
}

impl Spectrum1D {
    pub fn new(grid: Grid1D, mode: i64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::SizeMismatch { expected: grid.n, got: values.len() });
        }
        Ok(Spectrum1D { grid, mode, values })
    }

    pub fn d_dx(&self, order: u32) -> Spectrum1D {
        Spectrum1D { grid: self.grid, mode: self.mode, values: diff(&self.grid, &self.values, order) }
    }

    pub fn l2(&self) -> f64 {
        l2(&self.grid, &self.values)
    }

    pub fn sobolev(&self, s: u32) -> f64 {
        sobolev(&self.grid, &self.values, s)
    }

    /// The x-mean, i.e. the zero-frequency coefficient.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.grid.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_half: f64,
    pub l: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x_half: f64, l: f64) -> Result<Self> {
        Grid1D::new(nx, x_half)?;
        if ny == 0 || !ny.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("Ny={ny} must be a power of two")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidGrid(format!("L={l} must be positive")));
        }
        Ok(Grid2D { nx, ny, x_half, l })
    }

    pub fn line(&self) -> Grid1D {
        Grid1D { n: self.nx, x_half: self.x_half }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.line().dx()
    }

    pub fn dy(&self) -> f64 {
        2.0 * PI * self.l / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.line().x(i)
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    /// Measure of the periodic box.
    pub fn area(&self) -> f64 {
        2.0 * self.x_half * 2.0 * PI * self.l
    }

    /// Integer transverse mode index of row slot `j`.
    pub fn mode_index(&self, j: usize) -> i64 {
        fft::signed_index(j, self.ny)
    }

    /// Transverse wavenumber `m/L` of row slot `j`.
    pub fn ky(&self, j: usize) -> f64 {
        self.mode_index(j) as f64 / self.l
    }

    pub fn keeps(&self, i: usize, j: usize) -> bool {
        self.line().keeps(i) && 3 * self.mode_index(j).unsigned_abs() < self.ny as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub hs: f64,
    pub z2: f64,
}

/// Per-mode Sobolev norms: supremum and root-sum-of-squares over transverse modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeNorms {
    pub sup: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid2D,
    pub kind: Kind,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid2D,
    pub kind: Kind,
    pub coeffs: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid2D, kind: Kind, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Field { grid, kind, values })
    }

    pub fn zeros(grid: Grid2D, kind: Kind) -> Self {
        Field { grid, kind, values: vec![ZERO; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, kind: Kind, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                let v = f(grid.x(i), y);
                values.push(if kind == Kind::Real { Complex64::new(v.re, 0.0) } else { v });
            }
        }
        Field { grid, kind, values }
    }

    pub fn from_real_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, Kind::Real, |x, y| Complex64::new(f(x, y), 0.0))
    }

    /// Builds `Σ_m u_m(x) e^{i m y / L}` from per-mode x-profiles.
    pub fn from_modes(grid: Grid2D, kind: Kind, modes: &BTreeMap<i64, Vec<Complex64>>) -> Result<Self> {
        let mut buf = vec![ZERO; grid.len()];
        for (&m, profile) in modes {
            if profile.len() != grid.nx {
                return Err(Error::SizeMismatch { expected: grid.nx, got: profile.len() });
            }
            let slot = fft::slot_of(m, grid.ny).ok_or_else(|| {
                Error::DomainError(format!("transverse mode {m} not representable with Ny={}", grid.ny))
            })?;
            for (dst, src) in buf[slot * grid.nx..(slot + 1) * grid.nx].iter_mut().zip(profile) {
                *dst += src;
            }
        }
        // buf holds x-samples per mode; synthesize along y.
        if grid.ny > 1 {
            let mut t = vec![ZERO; grid.len()];
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    t[i * grid.ny + j] = buf[j * grid.nx + i];
                }
            }
            fft::inverse_batch(&mut t, grid.ny);
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    buf[j * grid.nx + i] = t[i * grid.ny + j];
                }
            }
        }
        let mut f = Field { grid, kind, values: buf };
        f.enforce_kind();
        Ok(f)
    }

    /// Per-mode x-profiles `u_m(x)`, keyed by the integer transverse index.
    pub fn mode_profiles(&self) -> BTreeMap<i64, Vec<Complex64>> {
        let g = self.grid;
        let mut t = vec![ZERO; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                t[i * g.ny + j] = self.values[j * g.nx + i];
            }
        }
        if g.ny > 1 {
            fft::forward_batch(&mut t, g.ny);
        }
        (0..g.ny).map(|j| (g.mode_index(j), (0..g.nx).map(|i| t[i * g.ny + j]).collect())).collect()
    }

    fn enforce_kind(&mut self) {
        if self.kind == Kind::Real {
            for v in &mut self.values {
                v.im = 0.0;
            }
        }
    }

    pub fn transform_forward(&self) -> SpectralField {
        let mut coeffs = self.values.clone();
        fft::forward_2d(&mut coeffs, self.grid.nx, self.grid.ny);
        SpectralField { grid: self.grid, kind: self.kind, coeffs }
    }

    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx() * self.grid.dy()).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `∫ u dx dy`.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.dx() * self.grid.dy()
    }

    /// `∫ u v̄ dx dy`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<Complex64>()
            * self.grid.dx()
            * self.grid.dy()
    }

    pub fn scaled(&self, s: Complex64) -> Field {
        let mut f = Field { grid: self.grid, kind: self.kind, values: self.values.iter().map(|v| v * s).collect() };
        f.enforce_kind();
        f
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Field, s: Complex64) -> Result<Field> {
        if other.grid != self.grid {
            return Err(Error::SizeMismatch { expected: self.grid.len(), got: other.grid.len() });
        }
        let kind =
            if self.kind == Kind::Real && other.kind == Kind::Real && s.im == 0.0 { Kind::Real } else { Kind::Complex };
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b * s).collect();
        Ok(Field { grid: self.grid, kind, values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    pub fn d_dx(&self, order: u32) -> Result<Field> {
        if !(1..=3).contains(&order) {
            return Err(Error::DomainError(format!("derivative order {order} not in 1..=3")));
        }
        let sym = self.grid.line().derivative_symbol(order);
        Ok(self.apply_x_symbol(&sym))
    }

    pub fn laplacian(&self) -> Field {
        let g = self.grid;
        let k = g.line().wavenumbers();
        let mut s = self.transform_forward();
        for j in 0..g.ny {
            let ky = g.ky(j);
            for i in 0..g.nx {
                s.coeffs[j * g.nx + i] *= -(k[i] * k[i] + ky * ky);
            }
        }
        s.transform_inverse()
    }

    /// Division by `iξ`; requires zero x-mean on every nonzero transverse mode.
    pub fn antideriv_x(&self) -> Result<Field> {
        let s = self.transform_forward();
        s.check_zero_modes()?;
        Ok(self.apply_x_symbol(&self.grid.line().antiderivative_symbol()))
    }

    fn apply_x_symbol(&self, sym: &[Complex64]) -> Field {
        let g = self.grid;
        let mut buf = self.values.clone();
        fft::forward_batch(&mut buf, g.nx);
        for row in buf.chunks_mut(g.nx) {
            for (c, s) in row.iter_mut().zip(sym) {
                *c *= s;
            }
        }
        fft::inverse_batch(&mut buf, g.nx);
        let mut f = Field { grid: g, kind: self.kind, values: buf };
        f.enforce_kind();
        f
    }

    /// Removes the y-mean at every x (the projection onto nonzero transverse modes).
    pub fn project_nonzero_y(&self) -> Field {
        let g = self.grid;
        let mut values = self.values.clone();
        for i in 0..g.nx {
            let mean = (0..g.ny).map(|j| self.values[j * g.nx + i]).sum::<Complex64>() / g.ny as f64;
            for j in 0..g.ny {
                values[j * g.nx + i] -= mean;
            }
        }
        Field { grid: g, kind: self.kind, values }
    }

    /// The y-average `(1/2πL)∫ u dy` as an x-profile.
    pub fn y_mean(&self) -> Vec<Complex64> {
        let g = self.grid;
        (0..g.nx).map(|i| (0..g.ny).map(|j| self.values[j * g.nx + i]).sum::<Complex64>() / g.ny as f64).collect()
    }

    /// `L²`, `H^s` (weight `(1+ξ²+η²)^s`) and `Z²` (weight `1+ξ²+(η/ξ)²`) norms.
    pub fn norms(&self, s: f64) -> Result<Norms> {
        let sp = self.transform_forward();
        sp.check_zero_modes()?;
        let g = self.grid;
        let k = g.line().wavenumbers();
        let (mut l2, mut hs, mut z2) = (0.0, 0.0, 0.0);
        for j in 0..g.ny {
            let ky = g.ky(j);
            for i in 0..g.nx {
                let a = sp.coeffs[j * g.nx + i].norm_sqr();
                let xi = k[i];
                l2 += a;
                hs += (1.0 + xi * xi + ky * ky).powf(s) * a;
                let w = if xi == 0.0 { 1.0 } else { 1.0 + xi * xi + (ky / xi).powi(2) };
                z2 += w * w * a;
            }
        }
        let area = g.area();
        Ok(Norms { l2: (l2 * area).sqrt(), hs: (hs * area).sqrt(), z2: (z2 * area).sqrt() })
    }

    /// Sup and root-sum-of-squares over transverse modes of the line Sobolev norms.
    pub fn mode_norms(&self, s: u32) -> ModeNorms {
        let line = self.grid.line();
        let norms: Vec<f64> = self.mode_profiles().values().map(|p| sobolev(&line, p, s)).collect();
        ModeNorms {
            sup: norms.iter().cloned().fold(0.0, f64::max),
            rss: norms.iter().map(|n| n * n).sum::<f64>().sqrt(),
        }
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Writes the binary container: little-endian `nx: u64, ny: u64, X: f64, L: f64,
    /// kind: u64` (0 real, 1 complex) followed by row-major samples (`re` or `re, im`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid;
        w.write_all(&(g.nx as u64).to_le_bytes())?;
        w.write_all(&(g.ny as u64).to_le_bytes())?;
        w.write_all(&g.x_half.to_le_bytes())?;
        w.write_all(&g.l.to_le_bytes())?;
        let kind: u64 = if self.kind == Kind::Real { 0 } else { 1 };
        w.write_all(&kind.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            if self.kind == Kind::Complex {
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let nx = u64::from_le_bytes(next(&mut r)?) as usize;
        let ny = u64::from_le_bytes(next(&mut r)?) as usize;
        let x_half = f64::from_le_bytes(next(&mut r)?);
        let l = f64::from_le_bytes(next(&mut r)?);
        let kind = match u64::from_le_bytes(next(&mut r)?) {
            0 => Kind::Real,
            1 => Kind::Complex,
            other => return Err(Error::Io(format!("unknown field kind tag {other}"))),
        };
        let grid = Grid2D::new(nx, ny, x_half, l)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = if kind == Kind::Complex { f64::from_le_bytes(next(&mut r)?) } else { 0.0 };
            values.push(Complex64::new(re, im));
        }
        Ok(Field { grid, kind, values })
    }

    /// CSV export of the x-slice at row `j`: columns `x,re,im`.
    pub fn write_slice_csv<W: Write>(&self, j: usize, mut w: W) -> Result<()> {
        let g = self.grid;
        if j >= g.ny {
            return Err(Error::DomainError(format!("row {j} outside 0..{}", g.ny)));
        }
        writeln!(w, "x,re,im")?;
        for i in 0..g.nx {
            let v = self.values[j * g.nx + i];
            writeln!(w, "{:.17e},{:.17e},{:.17e}", g.x(i), v.re, v.im)?;
        }
        Ok(())
    }
}

impl SpectralField {
    pub fn transform_inverse(&self) -> Field {
        let mut values = self.coeffs.clone();
        fft::inverse_2d(&mut values, self.grid.nx, self.grid.ny);
        let mut f = Field { grid: self.grid, kind: self.kind, values };
        f.enforce_kind();
        f
    }

    pub fn dealias(&self) -> SpectralField {
        let g = self.grid;
        let mut coeffs = self.coeffs.clone();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if !g.keeps(i, j) {
                    coeffs[j * g.nx + i] = ZERO;
                }
            }
        }
        SpectralField { grid: g, kind: self.kind, coeffs }
    }

    pub fn coeff(&self, n: i64, m: i64) -> Option<Complex64> {
        let i = fft::slot_of(n, self.grid.nx)?;
        let j = fft::slot_of(m, self.grid.ny)?;
        Some(self.coeffs[j * self.grid.nx + i])
    }

    pub fn l2(&self) -> f64 {
        (self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.area()).sqrt()
    }

    /// Largest violation of `c(n,m) = conj(c(-n,-m))`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst: f64 = 0.0;
        for j in 0..g.ny {
            let jm = (g.ny - j) % g.ny;
            for i in 0..g.nx {
                let im = (g.nx - i) % g.nx;
                let d = self.coeffs[j * g.nx + i] - self.coeffs[jm * g.nx + im].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub(crate) fn check_zero_modes(&self) -> Result<()> {
        let g = self.grid;
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for j in 1..g.ny {
            let mean = self.coeffs[j * g.nx].norm();
            if mean > ZERO_MODE_TOL * scale {
                return Err(Error::ZeroModeViolation { mode: g.mode_index(j), mean });
            }
        }
        Ok(())
    }
}
