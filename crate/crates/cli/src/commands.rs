use crate::config::{Command, RunConfig};
use crate::output::{num, opt, Table};
use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use translab::evolution::{evolve, Control};
use translab::expansion::{build_iterates, seed_mode, ApproxSolution};
use translab::fit::{log_slope, LinearFit};
use translab::grid::{Field, Spectrum1D};
use translab::kp_spectrum::{
    admissible_modes, eigen_residual, eigenprofile, most_unstable_point, resolvent_sweep, verify_algebraic_system,
    KP_THRESHOLD,
};
use translab::lab::{remainder_ratio, run_experiment, scaling_fit};
use translab::nls_spectrum::{bifurcation_check, growth_rate, measure_cutoff, most_unstable_nls, transverse_mode};
use translab::solitons::{kdv_field, nls_field};
use translab::{verify, Complex64, Equation};

/// A command ran to completion but some of its checks failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChecksFailed(pub String);

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "checks failed: {}", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

/// What a command produced; persisted by the caller.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub fields: Vec<(String, Field)>,
    pub report: Value,
    /// Human-readable text for stdout.
    pub summary: String,
    /// Set when the command ran but its checks did not pass.
    pub failure: Option<String>,
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::Spectrum => spectrum(config),
        Command::NlsSpectrum => nls_spectrum(config),
        Command::Evolve => evolve_run(config),
        Command::Expand => expand(config),
        Command::Instability => instability(config),
        Command::Sweep => sweep(config),
        Command::Verify => verify_run(config),
    }
}

const RESOLVENT_TAUS: [f64; 4] = [0.0, 1.0, 10.0, 100.0];

fn spectrum(config: &RunConfig) -> Result<Outcome> {
    let l = config.l;
    let best = most_unstable_point(l)?;
    let mut modes = Table::new("spectrum", &["k", "mu", "sigma", "lambda", "eta", "wavenumber", "most_unstable"]);
    let mut summary = format!("KP-I transverse modes, L = {l}\n{:>4} {:>10} {:>10}\n", "k", "mu", "sigma");
    let points = admissible_modes(l);
    let mut worst_algebra: f64 = 0.0;
    for p in &points {
        worst_algebra = worst_algebra.max(verify_algebraic_system(p).max_residual());
        let mut row: Vec<String> = [p.k as f64, p.mu, p.sigma, p.lambda, p.eta, p.wavenumber()].map(num).to_vec();
        row[0] = p.k.to_string();
        row.push(u8::from(p.k == best.k).to_string());
        modes.push(row);
        writeln!(summary, "{:>4} {:>10.6} {:>10.6}", p.k, p.mu, p.sigma)?;
    }

    let line = config.grid2d().line();
    let mode = eigenprofile(&best, &line)?;
    let h = Spectrum1D::new(
        line,
        best.k,
        line.sample(|x| (-(x - 1.0).powi(2) / 2.0).exp() * (2.0 * x).cos() + 0.5 / (x + 2.0).cosh()),
    )?;
    let sols = resolvent_sweep(best.wavenumber(), best.sigma + 0.1, &RESOLVENT_TAUS, &h)?;
    let mut resolvent = Table::new("resolvent", &["tau", "identity_residual", "ratio_s0", "ratio_s1"]);
    for s in &sols {
        resolvent.push_numbers(&[s.tau, s.identity_residual, s.ratio_s0, s.ratio_s1]);
    }
    let seed = seed_mode(Equation::Kp, config.grid2d())?;
    Ok(Outcome {
        tables: vec![modes, resolvent],
        fields: vec![("seed_mode".into(), seed.field(0.0))],
        report: json!({
            "L": l,
            "threshold": KP_THRESHOLD,
            "mode_count": points.len(),
            "most_unstable": best,
            "algebra_max_residual": worst_algebra,
            "eigen_residual": eigen_residual(&mode),
            "resolvent_gamma0": best.sigma + 0.1,
        }),
        summary,
        failure: None,
    })
}

fn nls_spectrum(config: &RunConfig) -> Result<Outcome> {
    let l = config.l;
    let line = config.grid2d().line();
    let best = most_unstable_nls(l, &line)?;
    let cutoff = measure_cutoff(&line, 1e-3)?;
    let kmax = ((cutoff + 1e-3) * l).floor() as i64;
    let found: Vec<_> = (1..=kmax).into_par_iter().map(|k| transverse_mode(&line, k, l)).collect::<Result<_, _>>()?;
    let mut modes =
        Table::new("nls_modes", &["k", "epsilon", "sigma", "eigen_residual", "conservation_residual", "most_unstable"]);
    let mut summary = format!("NLS transverse modes, L = {l}\n{:>4} {:>10} {:>10}\n", "k", "epsilon", "sigma");
    for m in found.iter().flatten() {
        modes.push(vec![
            m.k.to_string(),
            num(m.epsilon),
            num(m.growth_rate()),
            num(m.eigen_residual()),
            num(m.conservation_residual()),
            u8::from(m.k == best.k).to_string(),
        ]);
        writeln!(summary, "{:>4} {:>10.6} {:>10.6}", m.k, m.epsilon, m.growth_rate())?;
    }
    let eps: Vec<f64> = (1..=24).map(|i| 1.2 * cutoff * i as f64 / 24.0).collect();
    let rates: Vec<f64> = eps.par_iter().map(|&e| growth_rate(&line, e)).collect::<Result<_, _>>()?;
    let mut curve = Table::new("nls_growth_curve", &["epsilon", "sigma"]);
    for (e, s) in eps.iter().zip(&rates) {
        curve.push_numbers(&[*e, *s]);
    }
    let bif = bifurcation_check(&line)?;
    Ok(Outcome {
        tables: vec![modes, curve],
        fields: Vec::new(),
        report: json!({
            "L": l,
            "epsilon_cutoff": cutoff,
            "L0": 1.0 / cutoff,
            "most_unstable": { "k": best.k, "epsilon": best.epsilon, "sigma": best.growth_rate() },
            "bifurcation": bif,
        }),
        summary,
        failure: None,
    })
}

fn soliton(equation: Equation, config: &RunConfig) -> Field {
    match equation {
        Equation::Kp => kdv_field(&config.grid2d()),
        Equation::Nls => nls_field(&config.grid2d()),
    }
}

fn evolve_run(config: &RunConfig) -> Result<Outcome> {
    let q = soliton(config.equation, config);
    let (u0, sigma0) = if config.delta > 0.0 {
        let seed = seed_mode(config.equation, config.grid2d())?;
        (q.add_scaled(&seed.field(0.0), Complex64::new(config.delta, 0.0))?, Some(seed.sigma0))
    } else {
        (q, None)
    };
    let integ = config.integrator_config();
    let traj = evolve(&u0, config.equation, &integ, |_, _| Control::Continue)?;
    let mut table =
        Table::new("diagnostics", &["t", "l2", "integral", "mass", "hamiltonian", "orbital_distance", "sup"]);
    for d in &traj.diagnostics {
        table.push(vec![
            num(d.t),
            num(d.l2),
            num(d.integral),
            num(d.mass),
            opt(d.hamiltonian),
            num(d.orbital_distance),
            num(d.sup),
        ]);
    }
    let mut fields: Vec<(String, Field)> =
        traj.fields.iter().enumerate().map(|(i, f)| (format!("snapshot_{i:04}"), f.clone())).collect();
    fields.push(("final".into(), traj.final_state.clone()));
    let first = traj.diagnostics.first().expect("initial sample");
    let last = traj.diagnostics.last().expect("initial sample");
    let mass_drift = (last.mass - first.mass).abs() / first.mass;
    let snapshot_times = traj.snapshot_times.clone();
    Ok(Outcome {
        summary: format!(
            "{} evolution to t = {}: mass drift {:.3e}, orbital distance {:.6e} -> {:.6e}\n",
            config.equation.name(),
            traj.final_time,
            mass_drift,
            first.orbital_distance,
            last.orbital_distance
        ),
        tables: vec![table],
        fields,
        report: json!({
            "equation": config.equation,
            "delta": config.delta,
            "sigma0": sigma0,
            "final_time": traj.final_time,
            "samples": traj.times.len(),
            "snapshot_times": snapshot_times,
            "mass_drift": mass_drift,
            "initial_distance": first.orbital_distance,
            "final_distance": last.orbital_distance,
        }),
        failure: None,
    })
}

#[derive(Serialize)]
struct IterateGrowth {
    k: usize,
    slope: f64,
    expected: f64,
    r_squared: f64,
}

fn expand(config: &RunConfig) -> Result<Outcome> {
    let grid = config.grid2d();
    let integ = config.integrator_config();
    let seed = seed_mode(config.equation, grid)?;
    let iterates = build_iterates(&seed, config.order, integ)?;
    let mut modes = Table::new("iterate_modes", &["k", "mode", "t", "norm"]);
    let mut norms = Table::new("iterate_norms", &["k", "t", "norm"]);
    let mut growth = Vec::new();
    let window = (config.t_max / 3.0, config.t_max);
    for it in &iterates {
        for (m, series) in it.mode_norms(&grid) {
            for (t, v) in it.times.iter().zip(series) {
                modes.push(vec![it.k.to_string(), m.to_string(), num(*t), num(v)]);
            }
        }
        let total = it.norms(&grid);
        for (t, v) in it.times.iter().zip(&total) {
            norms.push(vec![it.k.to_string(), num(*t), num(*v)]);
        }
        let fit: LinearFit = log_slope(&it.times, &total, window.0, window.1)?;
        growth.push(IterateGrowth {
            k: it.k,
            slope: fit.slope,
            expected: (it.k + 1) as f64 * seed.sigma0,
            r_squared: fit.r_squared,
        });
    }
    let approx = ApproxSolution::from_iterates(&seed, iterates, config.delta, integ)?;
    let t_end = *approx.times().last().expect("samples");
    let assembled = approx.assemble(t_end)?;
    let residual = approx.residual(t_end)?.l2();
    let mut summary = format!("{} iterates to t = {t_end}, sigma0 = {:.6}\n", config.equation.name(), seed.sigma0);
    for g in &growth {
        writeln!(summary, "  k = {}: growth {:.6} (expected {:.6})", g.k, g.slope, g.expected)?;
    }
    Ok(Outcome {
        tables: vec![modes, norms],
        fields: vec![("assembled_final".into(), assembled)],
        report: json!({
            "equation": config.equation,
            "k0": seed.k0,
            "sigma0": seed.sigma0,
            "c_s": seed.norm(),
            "M": config.order,
            "delta": config.delta,
            "fit_window": [window.0, window.1],
            "growth": growth,
            "final_time": t_end,
            "residual_norm_final": residual,
        }),
        summary,
        failure: None,
    })
}

fn instability(config: &RunConfig) -> Result<Outcome> {
    let r = run_experiment(&config.experiment())?;
    let mut distance = Table::new("distance", &["t", "distance"]);
    for p in &r.distance_series {
        distance.push_numbers(p);
    }
    let mut tables = vec![distance];
    if config.track_remainder {
        let mut rem = Table::new("remainder", &["t", "remainder"]);
        for p in &r.remainder_series {
            rem.push_numbers(p);
        }
        tables.push(rem);
    }
    let summary = match r.t_escape {
        Some(t) => format!(
            "{} escape at T = {t:.6} (log(kappa/delta)/sigma0 = {:.6}), eta = {:.6e}\n",
            r.equation.name(),
            r.t_predicted.unwrap_or(f64::NAN),
            r.eta
        ),
        None => format!("{} no escape before t = {}\n", r.equation.name(), r.final_time),
    };
    Ok(Outcome {
        tables,
        fields: Vec::new(),
        report: json!({
            "equation": r.equation,
            "L": r.l,
            "delta": r.delta,
            "M": r.order,
            "k0": r.k0,
            "sigma0": r.sigma0,
            "c_s": r.c_s,
            "kappa": r.kappa,
            "eta": r.eta,
            "escaped": r.escaped,
            "t_escape": r.t_escape,
            "t_predicted": r.t_predicted,
            "remainder_norm": r.remainder_norm,
            "final_time": r.final_time,
        }),
        summary,
        failure: None,
    })
}

fn sweep(config: &RunConfig) -> Result<Outcome> {
    let template = config.experiment();
    let f = scaling_fit(&template, &config.deltas)?;
    let mut times = Table::new("escape_times", &["delta", "ln_inv_delta", "t_escape", "t_calibrated", "t_predicted"]);
    let mut distance = Table::new("distance", &["delta", "t", "distance"]);
    for (r, tc) in f.reports.iter().zip(&f.t_calibrated) {
        times.push(vec![num(r.delta), num(-r.delta.ln()), opt(r.t_escape), num(*tc), opt(r.t_predicted)]);
        for p in &r.distance_series {
            distance.push_numbers(&[r.delta, p[0], p[1]]);
        }
    }
    let remainder = if config.track_remainder {
        let dmax = config.deltas.iter().copied().fold(0.0, f64::max);
        Some(remainder_ratio(&template, dmax)?)
    } else {
        None
    };
    let summary = format!(
        "{} escape-time fit over {} amplitudes: slope {:.6} vs 1/sigma0 = {:.6} (r2 = {:.6}), monotone = {}\n",
        config.equation.name(),
        f.reports.len(),
        f.fit.slope,
        f.expected_slope,
        f.fit.r_squared,
        f.monotone
    );
    Ok(Outcome {
        tables: vec![times, distance],
        fields: Vec::new(),
        report: json!({
            "equation": config.equation,
            "L": config.l,
            "sigma0": f.sigma0,
            "expected_slope": f.expected_slope,
            "fit": f.fit,
            "slope_error": f.slope_error(),
            "kappa_calibrated": f.kappa_calibrated,
            "monotone": f.monotone,
            "eta": f.reports.first().map(|r| r.eta),
            "remainder_ratio": remainder,
        }),
        summary,
        failure: None,
    })
}

fn verify_run(config: &RunConfig) -> Result<Outcome> {
    let ids: &[u8] = if config.quick { &verify::QUICK } else { &verify::ALL };
    let mut table = Table::new("acceptance", &["id", "title", "passed", "measured", "tolerance"]);
    let mut summary = String::new();
    let mut passed = 0;
    for &id in ids {
        let r = verify::run(id);
        if config.output.verbosity > 0 {
            eprintln!("{}", r.line());
        }
        writeln!(summary, "{}", r.line())?;
        passed += usize::from(r.passed);
        table.push(vec![
            r.id.to_string(),
            r.title.to_string(),
            r.passed.to_string(),
            r.measured.clone(),
            r.tolerance.to_string(),
        ]);
    }
    writeln!(summary, "{passed} of {} criteria passed", ids.len())?;
    let failure = (passed < ids.len()).then(|| format!("{} of {} criteria failed", ids.len() - passed, ids.len()));
    Ok(Outcome {
        tables: vec![table],
        fields: Vec::new(),
        report: json!({ "quick": config.quick, "criteria": ids.len(), "passed": passed }),
        summary,
        failure,
    })
}
