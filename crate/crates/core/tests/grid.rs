mod common;

use common::{max_abs_diff, random_field, smooth_field};
use proptest::prelude::*;
use std::f64::consts::PI;
use translab::grid::{self, Field, Grid1D, Grid2D, Kind};
use translab::solitons::{kdv_q, kdv_q_prime};
use translab::{Complex64, Error};

fn grid2(nx: usize, ny: usize, x: f64, l: f64) -> Grid2D {
    Grid2D::new(nx, ny, x, l).unwrap()
}

#[test]
fn rejects_non_power_of_two_sizes() {
    assert!(matches!(Grid2D::new(100, 8, 10.0, 1.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid2D::new(64, 6, 10.0, 1.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid2D::new(64, 8, -1.0, 1.0), Err(Error::InvalidGrid(_))));
    assert!(Field::new(grid2(8, 4, 1.0, 1.0), Kind::Real, vec![Complex64::new(0.0, 0.0); 31]).is_err());
}

#[test]
fn wavenumbers_follow_box_convention() {
    let g = grid2(16, 8, 5.0, 2.0);
    let line = g.line();
    assert_eq!(line.wavenumber(1), PI / 5.0);
    assert_eq!(line.wavenumber(15), -PI / 5.0);
    assert_eq!(line.wavenumber(8), -8.0 * PI / 5.0);
    assert_eq!(g.ky(1), 0.5);
    assert_eq!(g.ky(7), -0.5);
    assert_eq!(g.x(0), -5.0);
}

#[test]
fn constant_field_maps_to_zero_frequency() {
    let g = grid2(32, 8, 3.0, 1.5);
    let f = Field::from_real_fn(g, |_, _| 1.0);
    let s = f.transform_forward();
    assert!((s.coeff(0, 0).unwrap() - 1.0).norm() < 1e-14);
    let rest: f64 = s.coeffs.iter().skip(1).map(|c| c.norm()).sum();
    assert!(rest < 1e-13);
}

#[test]
fn single_harmonic_gives_two_lines() {
    let x_half = 4.0;
    let g = grid2(64, 4, x_half, 1.0);
    let f = Field::from_real_fn(g, |x, _| (PI * x / x_half).cos());
    let s = f.transform_forward();
    // x starts at -X, so cos(πx/X) picks up the phase e^{∓iπ} = -1 per line.
    assert!((s.coeff(1, 0).unwrap().norm() - 0.5).abs() < 1e-14);
    assert!((s.coeff(-1, 0).unwrap().norm() - 0.5).abs() < 1e-14);
    let total: f64 = s.coeffs.iter().map(|c| c.norm()).sum();
    assert!((total - 1.0).abs() < 1e-13);
}

#[test]
fn derivative_exact_on_harmonics() {
    let x_half = 7.0;
    let g = grid2(64, 2, x_half, 1.0);
    let f = Field::from_real_fn(g, |x, _| (PI * x / x_half).sin());
    let d = f.d_dx(1).unwrap();
    let exact = Field::from_real_fn(g, |x, _| PI / x_half * (PI * x / x_half).cos());
    assert!(max_abs_diff(&d.values, &exact.values) < 1e-12);
    let c = Field::from_real_fn(g, |_, _| 2.5);
    for order in 1..=3 {
        assert!(c.d_dx(order).unwrap().sup() < 1e-12);
    }
    assert!(matches!(f.d_dx(4), Err(Error::DomainError(_))));
}

#[test]
fn derivative_of_soliton_matches_analytic() {
    let g = grid2(1024, 1, 40.0, 1.0);
    let q = Field::from_real_fn(g, |x, _| kdv_q(x));
    let d = q.d_dx(1).unwrap();
    let exact = Field::from_real_fn(g, |x, _| kdv_q_prime(x));
    assert!(max_abs_diff(&d.values, &exact.values) < 1e-10);
}

#[test]
fn antiderivative_of_harmonic() {
    let x_half = 6.0;
    let g = grid2(64, 4, x_half, 1.0);
    let f = Field::from_real_fn(g, |x, _| (PI * x / x_half).cos());
    let a = f.antideriv_x().unwrap();
    let exact = Field::from_real_fn(g, |x, _| x_half / PI * (PI * x / x_half).sin());
    assert!(max_abs_diff(&a.values, &exact.values) < 1e-12);
}

#[test]
fn antiderivative_inverts_derivative_up_to_mean() {
    let g = grid2(256, 8, 20.0, 1.0);
    let f = smooth_field(g);
    let back = f.d_dx(1).unwrap().antideriv_x().unwrap();
    let mean = f.transform_forward();
    let mut expected = f.clone();
    for j in 0..g.ny {
        let row_mean = f.values[j * g.nx..(j + 1) * g.nx].iter().sum::<Complex64>() / g.nx as f64;
        for v in &mut expected.values[j * g.nx..(j + 1) * g.nx] {
            *v -= row_mean;
        }
    }
    assert!(mean.coeff(0, 0).unwrap().norm() > 0.01);
    assert!(max_abs_diff(&back.values, &expected.values) < 1e-12);
}

#[test]
fn antiderivative_rejects_transverse_mean() {
    let g = grid2(32, 8, 5.0, 1.0);
    let l = g.l;
    let f = Field::from_real_fn(g, |_, y| (y / l).cos());
    match f.antideriv_x() {
        Err(Error::ZeroModeViolation { mode, .. }) => assert_eq!(mode.abs(), 1),
        other => panic!("expected ZeroModeViolation, got {other:?}"),
    }
    assert!(matches!(f.norms(1.0), Err(Error::ZeroModeViolation { .. })));
}

#[test]
fn projection_removes_y_mean() {
    let g = grid2(64, 8, 8.0, 1.0);
    let q = Field::from_real_fn(g, |x, _| kdv_q(x));
    assert!(q.project_nonzero_y().sup() < 1e-14);
    let l = g.l;
    let wave = Field::from_fn(g, Kind::Complex, |x, y| Complex64::from_polar((-x * x).exp(), y / l));
    assert!(max_abs_diff(&wave.project_nonzero_y().values, &wave.values) < 1e-14);
    let f = smooth_field(g);
    let p = f.project_nonzero_y();
    assert!(max_abs_diff(&p.project_nonzero_y().values, &p.values) < 1e-14);
    let rest = f.sub(&p).unwrap();
    assert!(p.inner(&rest).norm() < 1e-12 * f.l2().powi(2));
}

#[test]
fn soliton_norm_matches_closed_form() {
    let l = 4.0;
    let g = grid2(1024, 4, 40.0, l);
    let q = Field::from_real_fn(g, |x, _| kdv_q(x));
    let n = q.norms(1.0).unwrap();
    let exact = (2.0 * PI * l * 24.0).sqrt();
    assert!((n.l2 - exact).abs() < 1e-10 * exact);
    assert!(n.hs >= n.l2);
    let zero = Field::zeros(g, Kind::Real).norms(2.0).unwrap();
    assert_eq!((zero.l2, zero.hs, zero.z2), (0.0, 0.0, 0.0));
}

#[test]
fn z2_norm_weights_transverse_modes() {
    let x_half = 5.0;
    let l = 2.0;
    let g = grid2(64, 8, x_half, l);
    // Single line at ξ = π/X, η = 1/L with unit-modulus coefficients.
    let f = Field::from_real_fn(g, |x, y| (PI * x / x_half + y / l).cos());
    let n = f.norms(1.0).unwrap();
    let xi = PI / x_half;
    let eta = 1.0 / l;
    let w = 1.0 + xi * xi + (eta / xi).powi(2);
    let l2 = (g.area() * 0.5).sqrt();
    assert!((n.l2 - l2).abs() < 1e-12);
    assert!((n.z2 - w * l2).abs() < 1e-11);
    assert!((n.hs - (1.0 + xi * xi + eta * eta).sqrt() * l2).abs() < 1e-11);
}

#[test]
fn mode_norms_report_sup_and_rss() {
    let x_half = 20.0;
    let l = 1.0;
    let g = grid2(256, 8, x_half, l);
    let f = Field::from_fn(g, Kind::Complex, |x, y| {
        let a = (-x * x).exp();
        Complex64::new(a, 0.0) + Complex64::from_polar(2.0 * a, 2.0 * y / l)
    });
    let base = grid::sobolev(&g.line(), &g.line().sample(|x| (-x * x).exp()), 1);
    let m = f.mode_norms(1);
    assert!((m.sup - 2.0 * base).abs() < 1e-12);
    assert!((m.rss - 5f64.sqrt() * base).abs() < 1e-12);
}

#[test]
fn dealias_keeps_band_limited_and_zeroes_top_third() {
    let g = grid2(64, 8, 3.0, 1.0);
    let band = Field::from_real_fn(g, |x, y| (PI * 5.0 * x / 3.0).cos() * (1.0 + (2.0 * y).cos()));
    let s = band.transform_forward();
    assert!(max_abs_diff(&s.dealias().coeffs, &s.coeffs) < 1e-15);
    let top = Field::from_real_fn(g, |x, _| (PI * 25.0 * x / 3.0).cos());
    assert!(top.transform_forward().dealias().l2() < 1e-14);
}

#[test]
fn dealiased_product_matches_double_resolution() {
    let x_half = 4.0;
    let g = grid2(32, 8, x_half, 1.0);
    let fine = grid2(64, 16, x_half, 1.0);
    // Band-limited data: |n| ≤ 10 < 32/3, |m| ≤ 2 < 8/3.
    let f = |x: f64, y: f64| (PI * 10.0 * x / x_half).cos() + (PI * 3.0 * x / x_half + 2.0 * y).sin();
    let h = |x: f64, y: f64| (PI * 9.0 * x / x_half + y).cos() + 0.5;
    let coarse_prod = Field::from_real_fn(g, |x, y| f(x, y) * h(x, y)).transform_forward().dealias();
    let fine_prod = Field::from_real_fn(fine, |x, y| f(x, y) * h(x, y)).transform_forward();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let n = translab::fft::signed_index(i, g.nx);
            let m = g.mode_index(j);
            let kept = g.keeps(i, j);
            let reference = if kept { fine_prod.coeff(n, m).unwrap() } else { Complex64::new(0.0, 0.0) };
            assert!((coarse_prod.coeffs[j * g.nx + i] - reference).norm() < 1e-13, "n={n} m={m}");
        }
    }
}

#[test]
fn binary_round_trip_and_csv_slice() {
    let g = grid2(16, 4, 2.0, 0.75);
    for kind in [Kind::Real, Kind::Complex] {
        let f = random_field(g, kind, 7);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let expected_len = 40 + g.len() * if kind == Kind::Real { 8 } else { 16 };
        assert_eq!(buf.len(), expected_len);
        let back = Field::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }
    let f = random_field(g, Kind::Real, 3);
    let mut csv = Vec::new();
    f.write_slice_csv(2, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,re,im");
    assert_eq!(lines.len(), 17);
    let first: Vec<f64> = lines[1].split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(first[0], -2.0);
    assert_eq!(first[1], f.values[2 * 16].re);
}

#[test]
fn modes_round_trip_through_field() {
    let g = grid2(64, 8, 6.0, 1.3);
    let f = random_field(g, Kind::Complex, 11);
    let modes = f.mode_profiles();
    assert_eq!(modes.len(), 8);
    let back = Field::from_modes(g, Kind::Complex, &modes).unwrap();
    assert!(max_abs_diff(&back.values, &f.values) < 1e-14);
    let mut bad = modes.clone();
    bad.insert(9, vec![Complex64::new(1.0, 0.0); 64]);
    assert!(Field::from_modes(g, Kind::Complex, &bad).is_err());
}

#[test]
fn line_norms() {
    let g = Grid1D::new(512, 20.0).unwrap();
    let v = g.sample(|x| (-x * x / 2.0).exp());
    // ∫ e^{-x²} = √π ; ∫ x² e^{-x²} = √π/2.
    assert!((grid::l2(&g, &v).powi(2) - PI.sqrt()).abs() < 1e-13);
    assert!((grid::sobolev(&g, &v, 1).powi(2) - 1.5 * PI.sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>(), complex in any::<bool>()) {
        let g = grid2(32, 8, 3.0, 0.7);
        let kind = if complex { Kind::Complex } else { Kind::Real };
        let f = random_field(g, kind, seed);
        let s = f.transform_forward();
        prop_assert!((s.l2() - f.l2()).abs() <= 1e-12 * f.l2());
        let back = s.transform_inverse();
        prop_assert!(max_abs_diff(&back.values, &f.values) <= 1e-12);
        if !complex {
            prop_assert!(s.hermitian_defect() < 1e-14);
            let mut raw = s.coeffs.clone();
            translab::fft::inverse_2d(&mut raw, g.nx, g.ny);
            prop_assert!(raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn derivative_after_antiderivative_is_identity(seed in any::<u64>()) {
        let g = grid2(32, 4, 5.0, 1.0);
        let f = random_field(g, Kind::Real, seed);
        // Project out the x-mean of every mode and the Nyquist column.
        let mut s = f.transform_forward();
        for j in 0..g.ny {
            s.coeffs[j * g.nx] = Complex64::new(0.0, 0.0);
            s.coeffs[j * g.nx + g.nx / 2] = Complex64::new(0.0, 0.0);
        }
        let clean = s.transform_inverse();
        let back = clean.antideriv_x().unwrap().d_dx(1).unwrap();
        prop_assert!(max_abs_diff(&back.values, &clean.values) < 1e-12);
    }

    #[test]
    fn projection_is_orthogonal(seed in any::<u64>()) {
        let g = grid2(16, 8, 2.0, 1.0);
        let f = random_field(g, Kind::Complex, seed);
        let p = f.project_nonzero_y();
        let rest = f.sub(&p).unwrap();
        prop_assert!(p.inner(&rest).norm() < 1e-12);
        prop_assert!(f.norms(1.0).is_err() || f.l2() <= f.norms(1.0).unwrap().hs + 1e-12);
    }
}
