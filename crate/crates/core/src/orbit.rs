//! Distance from a field to the orbit of translated (and, for NLS, phase-rotated)
//! solitons.
//!
//! Both distances reduce to maximizing the correlation `c(a) = ∫ ū(x) Q(x - a) dx` of the
//! transverse mean `ū` with the soliton. The correlation is evaluated on every grid shift
//! with one inverse FFT, the best shift is refined by quadratic interpolation and then by
//! Newton's method on the trigonometric interpolant, and the distance is measured directly
//! against the translated profile.

use crate::fft;
use crate::grid::{Field, Grid1D};
use crate::solitons::{kdv_q, nls_q};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitFit {
    pub distance: f64,
    /// Optimal translation `a`, in `[-X, X)`.
    pub shift: f64,
    /// Optimal phase `γ` (always 0 for KP).
    pub phase: f64,
}

/// `inf_a ‖u - Q(· - a)‖` over the box, with `Q` the unit-speed KdV soliton.
pub fn orbital_distance_kp(u: &Field) -> OrbitFit {
    fit(u, kdv_q, false)
}

/// `inf_{a,γ} ‖u - e^{iγ} Q(· - a)‖` over the box, with `Q = √2 sech x`.
pub fn orbital_distance_nls(u: &Field) -> OrbitFit {
    fit(u, nls_q, true)
}

struct Correlation {
    /// Spectral products `û_n conj(Q̂_n)`, Nyquist dropped.
    p: Vec<Complex64>,
    xi: Vec<f64>,
    scale: f64,
}

impl Correlation {
    /// `(c, c', c'')` at shift `a`.
    fn eval(&self, a: f64) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (p, &k) in self.p.iter().zip(&self.xi) {
            let t = p * Complex64::from_polar(1.0, k * a);
            out[0] += t;
            out[1] += t * Complex64::new(0.0, k);
            out[2] -= t * (k * k);
        }
        out.map(|v| v * self.scale)
    }
}

fn objective(c: Complex64, phased: bool) -> f64 {
    if phased {
        c.norm_sqr()
    } else {
        c.re
    }
}

fn fit(u: &Field, profile: fn(f64) -> f64, phased: bool) -> OrbitFit {
    let g = u.grid;
    let line = g.line();
    let n = line.n;
    let mean = u.y_mean();
    let q = line.sample(profile);
    let uh = fft::forward(&mean);
    let qh = fft::forward(&q);
    let xi = line.wavenumbers();
    let mut p: Vec<Complex64> = uh.iter().zip(&qh).map(|(a, b)| a * b.conj()).collect();
    p[n / 2] = Complex64::new(0.0, 0.0);
    let corr = Correlation { p: p.clone(), xi, scale: 2.0 * line.x_half };

    // Grid shifts a_m = m·dx.
    let mut c = p;
    fft::inverse_batch(&mut c, n);
    let vals: Vec<f64> = c.iter().map(|v| objective(v * corr.scale, phased)).collect();
    let m = (0..n).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let dx = line.dx();
    let (fm, f0, fp) = (vals[(m + n - 1) % n], vals[m], vals[(m + 1) % n]);
    let curv = fm - 2.0 * f0 + fp;
    let offset = if curv < 0.0 { (0.5 * (fm - fp) / curv).clamp(-0.5, 0.5) } else { 0.0 };
    let mut a = (fft::signed_index(m, n) as f64 + offset) * dx;

    for _ in 0..30 {
        let [c0, c1, c2] = corr.eval(a);
        let (grad, hess) =
            if phased { ((c1 * c0.conj()).re, c1.norm_sqr() + (c2 * c0.conj()).re) } else { (c1.re, c2.re) };
        if !(hess < 0.0) {
            break;
        }
        let step = (grad / hess).clamp(-dx, dx);
        a -= step;
        if step.abs() < 1e-15 * line.x_half {
            break;
        }
    }
    let a = wrap(a, line.x_half);
    let c0 = corr.eval(a)[0];
    let phase = if phased && c0.norm() > 0.0 { c0.arg() } else { 0.0 };
    let shifted = translate(&line, &qh, a);
    let rot = Complex64::from_polar(1.0, phase);
    let mut sum = 0.0;
    for row in u.values.chunks(g.nx) {
        for (v, s) in row.iter().zip(&shifted) {
            sum += (v - rot * s).norm_sqr();
        }
    }
    OrbitFit { distance: (sum * g.dx() * g.dy()).sqrt(), shift: a, phase }
}

fn wrap(a: f64, x_half: f64) -> f64 {
    (a + x_half).rem_euclid(2.0 * x_half) - x_half
}

/// Samples of the trigonometric interpolant of `q` translated by `a` (Nyquist dropped).
fn translate(line: &Grid1D, qh: &[Complex64], a: f64) -> Vec<Complex64> {
    let n = line.n;
    let mut c: Vec<Complex64> =
        qh.iter().enumerate().map(|(i, v)| v * Complex64::from_polar(1.0, -line.wavenumber(i) * a)).collect();
    c[n / 2] = Complex64::new(0.0, 0.0);
    fft::inverse_batch(&mut c, n);
    c
}
