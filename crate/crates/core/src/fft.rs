//! Cached FFT plans and normalized transforms.
//!
//! Forward transforms return coefficients `c_n = (1/N) Σ f_j e^{-2πi jn/N}` so that a
//! constant field maps to a unit coefficient at the zero frequency; inverse transforms
//! are the plain synthesis sum.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().expect("fft planner poisoned");
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// In-place forward transform of every consecutive chunk of length `n`.
pub fn forward_batch(buf: &mut [Complex64], n: usize) {
    plan(n, false).process(buf);
    let s = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// In-place inverse transform of every consecutive chunk of length `n`.
pub fn inverse_batch(buf: &mut [Complex64], n: usize) {
    plan(n, true).process(buf);
}

pub fn forward(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    forward_batch(&mut buf, values.len());
    buf
}

pub fn inverse(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    inverse_batch(&mut buf, coeffs.len());
    buf
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// 2-D transform of a row-major array with `ny` rows of length `nx`.
pub fn forward_2d(buf: &mut [Complex64], nx: usize, ny: usize) {
    forward_batch(buf, nx);
    if ny > 1 {
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, ny, nx, &mut t);
        forward_batch(&mut t, ny);
        transpose(&t, nx, ny, buf);
    }
}

pub fn inverse_2d(buf: &mut [Complex64], nx: usize, ny: usize) {
    inverse_batch(buf, nx);
    if ny > 1 {
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, ny, nx, &mut t);
        inverse_batch(&mut t, ny);
        transpose(&t, nx, ny, buf);
    }
}

/// Signed frequency index of FFT slot `i` for length `n`; the Nyquist slot maps to `-n/2`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 || n == 1 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT slot holding signed frequency `m`, if it is representable.
pub fn slot_of(m: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if n == 1 {
        return (m == 0).then_some(0);
    }
    if m >= -half && m < half {
        Some(if m >= 0 { m as usize } else { (m + n as i64) as usize })
    } else {
        None
    }
}
