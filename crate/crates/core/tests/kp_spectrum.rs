mod common;

use common::{max_abs_diff, smooth_field};
use translab::grid::{self, Grid1D, Grid2D, Kind, Spectrum1D};
use translab::kp_spectrum::*;
use translab::solitons::kdv_q_prime;
use translab::{Complex64, Error};

/// Bisection for `k_of_mu(μ, L) = k` on the decreasing branch `μ ∈ (1, 2)`.
fn mu_by_bisection(k: f64, l: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k_of_mu(mid, l).unwrap() > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn growth_rate_on_branch() {
    assert_eq!(sigma_of_mu(1.0).unwrap(), 0.0);
    assert_eq!(sigma_of_mu(2.0).unwrap(), 0.0);
    assert!((sigma_of_mu(1.5).unwrap() - 0.1875).abs() < 1e-15);
    assert!(matches!(sigma_of_mu(2.1), Err(Error::DomainError(_))));
    assert!(matches!(k_of_mu(0.9, 4.0), Err(Error::DomainError(_))));
    // Fine scan for the maximum.
    let (mut best_mu, mut best) = (0.0, 0.0);
    for i in 1..1_000_000 {
        let mu = 1.0 + i as f64 * 1e-6;
        let s = sigma_of_mu(mu).unwrap();
        if s > best {
            best = s;
            best_mu = mu;
        }
    }
    assert!((best_mu - (1.0 + 1.0 / 3f64.sqrt())).abs() < 2e-6);
    assert!((best - 1.0 / (3.0 * 3f64.sqrt())).abs() < 1e-12);
    assert!((best_mu - 1.577_350).abs() < 2e-6 && (best - 0.192_450).abs() < 1e-6);
}

#[test]
fn inverse_branch_map() {
    let mu = mu_of_k(1, 4.0).unwrap();
    assert!((mu - mu_by_bisection(1.0, 4.0)).abs() < 1e-13);
    assert!((mu - 1.650_115).abs() < 1e-6);
    assert!((sigma_of_mu(mu).unwrap() - 0.187_672).abs() < 1e-6);
    assert!(matches!(mu_of_k(2, 2.0), Err(Error::NoSuchMode { k: 2, .. })));
    assert!(matches!(mu_of_k(0, 4.0), Err(Error::NoSuchMode { .. })));
    // Approaching the branch endpoint from inside.
    let l = 4.0 / 3f64.sqrt() * (1.0 + 1e-9);
    assert!((mu_of_k(1, l).unwrap() - 1.0) < 1e-4);
    for i in 1..100 {
        let mu = 1.0 + i as f64 / 100.0;
        let l = 10.0;
        let k = k_of_mu(mu, l).unwrap();
        let a = 4.0 * k / (3f64.sqrt() * l);
        let back = 1.0 + (1.0 - a).sqrt();
        assert!((back - mu).abs() < 1e-12);
    }
}

#[test]
fn threshold_and_admissible_sets() {
    assert!((KP_THRESHOLD - 4.0 / 3f64.sqrt()).abs() < 1e-15);
    assert!(admissible_modes(2.0).is_empty());
    assert!(matches!(most_unstable_point(2.0), Err(Error::NoUnstableMode { .. })));
    let m = admissible_modes(2.5);
    assert_eq!(m.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1]);
    assert!(!is_unstable_period(KP_THRESHOLD - 1e-12));
    assert!(is_unstable_period(KP_THRESHOLD + 1e-12));
    assert!(!is_unstable_period(KP_THRESHOLD));

    let m8 = admissible_modes(8.0);
    let sig: Vec<f64> = m8.iter().map(|p| p.sigma).collect();
    assert_eq!(m8.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1, 2, 3]);
    for (s, expected) in sig.iter().zip([0.121_734, 0.187_672, 0.158_494]) {
        assert!((s - expected).abs() < 1e-6, "{s} vs {expected}");
    }
    for p in &m8 {
        let brute = sigma_of_mu(mu_by_bisection(p.k as f64, 8.0)).unwrap();
        assert!((brute - p.sigma).abs() < 1e-12);
    }
    let best = most_unstable_point(8.0).unwrap();
    assert_eq!(best.k, 2);
    // Mode count tracks √3L/4.
    for l in [3.0, 5.0, 9.9, 23.0] {
        let n = admissible_modes(l).len() as f64;
        assert!(n <= 3f64.sqrt() * l / 4.0 && n + 1.0 > 3f64.sqrt() * l / 4.0);
    }
}

#[test]
fn tie_break_prefers_smallest_mode() {
    let l = 8.0;
    let best = most_unstable_point(l).unwrap();
    for p in admissible_modes(l) {
        assert!(p.sigma <= best.sigma);
        if p.sigma == best.sigma {
            assert!(p.k >= best.k);
        }
    }
}

#[test]
fn dispersion_point_satisfies_algebra() {
    for (k, l) in [(1, 4.0), (2, 8.0), (3, 8.0), (1, 2.5), (5, 12.0)] {
        let p = DispersionPoint::new(k, l).unwrap();
        let r = verify_algebraic_system(&p);
        assert!(r.max_residual() < 1e-10, "{r:?}");
        assert!((p.lambda - 2.0 * p.sigma).abs() < 1e-15);
    }
    let p = DispersionPoint::new(1, 4.0).unwrap();
    assert!(c_plus(p.mu, p.lambda).abs() < 1e-12);
    assert!(c_plus(p.mu + 0.01, p.lambda).abs() > 1e-4);
}

#[test]
fn quartic_root_structure() {
    let p = DispersionPoint::new(1, 4.0).unwrap();
    let lam = Complex64::new(p.lambda, 0.0);
    let roots = quartic_roots(lam, p.eta).unwrap();
    let sum: Complex64 = roots.iter().sum();
    assert!(sum.norm() < 1e-12);
    for r in &roots {
        assert!(quartic_p(*r, lam, p.eta).norm() < 1e-12);
        assert!(r.re.abs() > 1e-6);
    }
    for w in roots.windows(2) {
        assert!(w[0].re <= w[1].re);
    }
    assert_eq!(roots.iter().filter(|r| r.re > 0.0).count(), 2);
    assert!(roots.iter().any(|r| (r - p.mu).norm() < 1e-12));
    // Complex λ with positive real part keeps the two-and-two split.
    let lam = Complex64::new(0.3, 0.8);
    let roots = quartic_roots(lam, 0.7).unwrap();
    assert_eq!(roots.iter().filter(|r| r.re > 0.0).count(), 2);
    for r in &roots {
        assert!(quartic_p(*r, lam, 0.7).norm() < 1e-12);
    }
}

#[test]
fn closed_form_profile() {
    let p = DispersionPoint::new(1, 4.0).unwrap();
    assert!((g_mu(0.0, p.mu, p.lambda) - 3.0 * p.mu * p.mu).abs() < 1e-12);
    assert!((g_closed(0.0, p.mu)[0] - 3.0 * p.mu * p.mu).abs() < 1e-13);
    assert!(g_closed(200.0, p.mu)[0] < 1e-25);
    assert!(g_closed(-200.0, p.mu)[0] < 1e-100);
    // Agreement with the naive expression where it does not cancel.
    for i in 0..50 {
        let z = -5.0 + i as f64 * 0.14;
        let t = z.tanh();
        let s2 = 1.0 - t * t;
        let c = 3.0 * p.mu * p.mu * (p.mu * z).exp();
        let naive = [
            c * (1.0 - t),
            c * (p.mu * (1.0 - t) - s2),
            c * (p.mu * p.mu * (1.0 - t) - 2.0 * p.mu * s2 + 2.0 * s2 * t),
        ];
        let g = g_closed(z, p.mu);
        for d in 0..3 {
            assert!((g[d] - naive[d]).abs() < 1e-12 * (1.0 + naive[d].abs()), "z={z} d={d}");
        }
        // g_μ with C₊ = 0 coincides with the closed form.
        assert!((g_mu(z, p.mu, p.lambda) - g[0]).abs() < 1e-10 * (1.0 + g[0].abs()));
    }
}

#[test]
fn closed_form_derivatives_match_spectral() {
    let p = DispersionPoint::new(1, 4.0).unwrap();
    let g = Grid1D::new(4096, 90.0).unwrap();
    let vals = g.sample(|z| g_closed(z, p.mu)[0]);
    let d1 = grid::diff(&g, &vals, 1);
    let d2 = grid::diff(&g, &vals, 2);
    let e1 = g.sample(|z| g_closed(z, p.mu)[1]);
    let e2 = g.sample(|z| g_closed(z, p.mu)[2]);
    assert!(max_abs_diff(&d1, &e1) < 1e-9);
    assert!(max_abs_diff(&d2, &e2) < 1e-9);
}

#[test]
fn eigenprofile_normalization_and_tails() {
    let p = most_unstable_point(4.0).unwrap();
    let x_half = tail_half_width(p.mu, 1e-10);
    assert!(x_half > 130.0 && x_half < 133.0);
    let g = Grid1D::new(2048, 160.0).unwrap();
    let mode = eigenprofile(&p, &g).unwrap();
    assert!((grid::l2(&g, &mode.profile) - 1.0).abs() < 1e-13);
    assert!(mode.profile[g.n / 2].re > 0.0);
    assert!(mode.profile.iter().all(|v| v.im == 0.0));
    // Log-slope of the right tail against -(2-μ)/2.
    let at = |x: f64| mode.profile[((x + 160.0) / g.dx()).round() as usize].re.abs().ln();
    let slope = (at(70.0) - at(40.0)) / 30.0;
    let expected = -(2.0 - p.mu) / 2.0;
    assert!((slope - expected).abs() < 0.05 * expected.abs(), "{slope} vs {expected}");
    let left = (at(-20.0) - at(-30.0)) / 10.0;
    assert!((left - p.mu / 2.0).abs() < 0.05 * p.mu / 2.0);
    // ∂⁻¹V = 2g'(x/2).
    let anti = mode.antiderivative();
    let spectral = grid::antideriv(&g, &mode.profile);
    assert!(max_abs_diff(&anti, &spectral) < 1e-9);
    let mut bad = p;
    bad.mu += 0.01;
    assert!(matches!(eigenprofile(&bad, &g), Err(Error::DomainError(_))));
}

#[test]
fn eigen_residual_converges_on_adequate_box() {
    let p = most_unstable_point(4.0).unwrap();
    let coarse = eigen_residual(&eigenprofile(&p, &Grid1D::new(512, 160.0).unwrap()).unwrap());
    let fine = eigen_residual(&eigenprofile(&p, &Grid1D::new(1024, 160.0).unwrap()).unwrap());
    assert!(fine < 1e-8, "fine residual {fine}");
    assert!(coarse / fine >= 10.0, "{coarse} -> {fine}");
    // Other admissible modes at a larger period.
    for p in admissible_modes(8.0) {
        let x_half = tail_half_width(p.mu, 1e-12).max(40.0);
        let n = (x_half * 8.0).log2().ceil().exp2() as usize;
        let r = eigen_residual(&eigenprofile(&p, &Grid1D::new(n, x_half).unwrap()).unwrap());
        assert!(r < 1e-8, "k={} residual {r}", p.k);
    }
}

#[test]
fn linear_operator_basic_identities() {
    let g = Grid1D::new(1024, 40.0).unwrap();
    let qx = Spectrum1D::new(g, 0, g.sample(kdv_q_prime)).unwrap();
    let a = apply_aj(&qx, 0.0).unwrap();
    assert!(a.values.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-9);

    let f = Spectrum1D::new(g, 1, grid::diff(&g, &g.sample(|x| (-x * x / 3.0).exp()), 1)).unwrap();
    let h = Spectrum1D::new(g, 1, grid::diff(&g, &g.sample(|x| (x / 2.0).tanh() / x.cosh()), 1)).unwrap();
    let (alpha, beta) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
    let comb =
        Spectrum1D::new(g, 1, f.values.iter().zip(&h.values).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
    let lhs = apply_aj(&comb, 0.7).unwrap();
    let fa = apply_aj(&f, 0.7).unwrap();
    let ha = apply_aj(&h, 0.7).unwrap();
    let rhs: Vec<Complex64> = fa.values.iter().zip(&ha.values).map(|(a, b)| alpha * a + beta * b).collect();
    assert!(max_abs_diff(&lhs.values, &rhs) < 1e-11);

    let mean_full = Spectrum1D::new(g, 1, g.sample(|x| (-x * x).exp())).unwrap();
    assert!(matches!(apply_aj(&mean_full, 0.5), Err(Error::ZeroModeViolation { .. })));
    assert!(apply_aj(&mean_full, 0.0).is_ok());
}

#[test]
fn two_dimensional_operator_matches_modes() {
    let grid = Grid2D::new(512, 8, 30.0, 1.5).unwrap();
    let f = smooth_field(grid).d_dx(1).unwrap();
    let af = apply_a(&f).unwrap();
    assert_eq!(af.kind, Kind::Real);
    let modes = f.mode_profiles();
    let amodes = af.mode_profiles();
    for (m, prof) in &modes {
        let s = Spectrum1D::new(grid.line(), *m, prof.clone()).unwrap();
        let a = apply_aj(&s, *m as f64 / grid.l).unwrap();
        assert!(max_abs_diff(&a.values, &amodes[m]) < 1e-10, "mode {m}");
    }
}

#[test]
fn soliton_operator_spectrum() {
    let g = Grid1D::new(512, 30.0).unwrap();
    let ev = l_operator_spectrum(&g);
    assert_eq!(ev.len(), 3, "{ev:?}");
    for (e, expected) in ev.iter().zip([-1.25, 0.0, 0.75]) {
        assert!((e - expected).abs() < 1e-6, "{e} vs {expected}");
    }
    // The zero eigenvector is Q'.
    let m = l_operator_matrix(&g);
    let q = nalgebra::DVector::from_iterator(g.n, g.points().into_iter().map(kdv_q_prime));
    assert!((&m * &q).norm() < 1e-8 * q.norm());
}

fn test_forcing(g: &Grid1D) -> Spectrum1D {
    Spectrum1D::new(*g, 1, g.sample(|x| (-(x - 1.0).powi(2) / 2.0).exp() * (2.0 * x).cos() + 0.5 / (x + 2.0).cosh()))
        .unwrap()
}

#[test]
fn resolvent_identity_and_bounds() {
    let l = 4.0;
    let p = most_unstable_point(l).unwrap();
    let g = Grid1D::new(512, 40.0).unwrap();
    let h = test_forcing(&g);
    let j = p.wavenumber();
    let gamma0 = p.sigma + 0.1;
    let sols = resolvent_sweep(j, gamma0, &[0.0, 1.0, 10.0, 100.0], &h).unwrap();
    for s in &sols {
        assert!(s.identity_residual < 1e-10, "tau={} residual {}", s.tau, s.identity_residual);
        // Direct substitution into (γ₀ + iτ)w + A_j w = H_x.
        let aw = apply_aj(&Spectrum1D::new(g, 1, s.w.values.clone()).unwrap(), j);
        let aw = match aw {
            Ok(v) => v.values,
            Err(_) => {
                let mut w = s.w.values.clone();
                let mean = s.w.mean();
                for v in &mut w {
                    *v -= mean;
                }
                apply_aj(&Spectrum1D::new(g, 1, w).unwrap(), j).unwrap().values
            }
        };
        let hx = grid::diff(&g, &h.values, 1);
        let shift = Complex64::new(gamma0, s.tau);
        let r: Vec<Complex64> = (0..g.n).map(|i| shift * s.w.values[i] + aw[i] - hx[i]).collect();
        assert!(grid::l2(&g, &r) < 1e-8 * grid::l2(&g, &hx));
    }
    let ratios: Vec<f64> = sols.iter().map(|s| s.ratio_s1).collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(ratios[3] <= ratios[0] * 1.5 && max < 10.0, "{ratios:?}");
    let zero = Spectrum1D::new(g, 1, vec![Complex64::new(0.0, 0.0); g.n]).unwrap();
    let z = resolvent_solve(j, gamma0, 3.0, &zero).unwrap();
    assert!(z.w.values.iter().all(|v| v.norm() == 0.0));
}

mod properties {
    use proptest::prelude::*;
    use translab::kp_spectrum::*;

    proptest! {
        #[test]
        fn branch_map_round_trip(l in 2.32f64..60.0) {
            for p in admissible_modes(l) {
                let k = k_of_mu(p.mu, l).unwrap();
                prop_assert!((k - p.k as f64).abs() < 1e-12 * p.k as f64, "L={} k={} -> {}", l, p.k, k);
                prop_assert!(p.mu > 1.0 && p.mu < 2.0);
            }
        }

        #[test]
        fn every_point_satisfies_the_algebra(l in 2.32f64..60.0) {
            let modes = admissible_modes(l);
            prop_assert_eq!(modes.len() as i64, max_mode(l));
            for p in &modes {
                prop_assert!(verify_algebraic_system(p).max_residual() < 1e-10, "{:?}", p);
            }
        }

        #[test]
        fn most_unstable_beats_every_mode(l in 2.32f64..60.0) {
            let best = most_unstable_point(l).unwrap();
            prop_assert!(admissible_modes(l).iter().all(|p| p.sigma <= best.sigma));
        }
    }
}
