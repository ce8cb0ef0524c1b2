//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};
use std::time::Instant;

use kitaev_thermal::ansatz::{spectrum_entropy, variational_state, AnsatzParams};
use kitaev_thermal::dense::von_neumann_entropy;
use kitaev_thermal::model::{build_kitaev_ring, ModelParams};
use kitaev_thermal::observables::{
    crossover_scan, default_spacings, default_time_grid, dynamical_correlation_direct, dynamical_correlation_hadamard,
    measure_correlations, scaling_study, NoCache, ScalingSettings, ScanSettings, TimeEvolution,
};
use kitaev_thermal::oracle::{exact_crossover, exact_free_energy, exact_gibbs, exact_susceptibility};
use kitaev_thermal::vqa::{anneal_schedule, free_energy, gradient, solve, Init, SolveRequest, SolverConfig, ThermalSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    details: Vec<String>,
    /// Every solve performed, for the variational-bound check.
    solves: Vec<ThermalSolution>,
    seconds: f64,
}

/// Relative free-energy differences below this are round-off in both the
/// variational and the exact value.
const ERROR_RESOLUTION: f64 = 1e-12;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn cold(model: ModelParams, t: f64, p: usize, seed: u64) -> ThermalSolution {
    solve(&SolveRequest { model, temperature: t, blocks_p: p, init: Init::Random { seed }, solver: SolverConfig::default(), record_trace: false })
        .expect("solve")
}

fn r_squared(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (sxy * sxy / (sxx * syy), my - slope * mx, slope)
}

fn infinite_temperature() -> Outcome {
    let (n, t) = (3, 100.0);
    let s = cold(ModelParams::new(n, 1.0), t, 5, 1);
    let target = -t * n as f64 * LN_2;
    let f_err = rel(s.free_energy, target);
    let theta_err = s.params.theta.iter().map(|th| (th.rem_euclid(FRAC_PI_2) - FRAC_PI_4).abs()).fold(0.0, f64::max);
    Outcome {
        id: 1,
        title: "infinite-temperature limit",
        passed: f_err <= 1e-2 && theta_err <= 1e-2,
        details: vec![format!("F rel err {f_err:.3e} (tol 1e-2), max |theta - pi/4| {theta_err:.3e} (tol 1e-2)")],
        solves: vec![s],
        seconds: 0.0,
    }
}

fn free_energy_accuracy() -> Outcome {
    let temps = [2.0, 1.0, 0.5, 0.25, 0.1];
    let mut passed = true;
    let mut details = Vec::new();
    let mut solves = Vec::new();
    let jobs: Vec<(usize, f64)> = [3, 4, 5].iter().flat_map(|&n| [0.9, 1.1].map(|l| (n, l))).collect();
    let chains: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(n, l)| scope.spawn(move || anneal_schedule(&ModelParams::new(n, l), &temps, 5, 100 + n as u64, &SolverConfig::default())))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap().expect("anneal")).collect()
    });
    for (&(n, l), chain) in jobs.iter().zip(chains) {
        let tol = if n == 3 { 1e-3 } else { 1e-2 };
        let mut worst: f64 = 0.0;
        for s in &chain {
            worst = worst.max(rel(s.free_energy, exact_free_energy(&s.model, s.temperature).unwrap()));
        }
        passed &= worst <= tol;
        details.push(format!("N={n} lambda={l}: worst F rel err {worst:.3e} (tol {tol:e})"));
        solves.extend(chain);
    }
    Outcome { id: 2, title: "free-energy accuracy vs oracle", passed, details, solves, seconds: 0.0 }
}

fn block_convergence() -> Outcome {
    let m = ModelParams::new(4, 1.0);
    let exact = exact_free_energy(&m, 0.5).unwrap();
    let ps = [1, 2, 3, 5];
    let solves: Vec<ThermalSolution> = std::thread::scope(|scope| {
        let hs: Vec<_> = ps.iter().map(|&p| scope.spawn(move || cold(m, 0.5, p, 31))).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let errs: Vec<f64> = solves.iter().map(|s| rel(s.free_energy, exact)).collect();
    // Errors below the oracle's own resolution are all equal to zero.
    let resolved: Vec<f64> = errs.iter().map(|&e| if e < ERROR_RESOLUTION { 0.0 } else { e }).collect();
    let monotone = resolved.windows(2).all(|w| w[1] <= w[0]);
    let final_ok = errs[3] < 1e-3;
    Outcome {
        id: 3,
        title: "block convergence",
        passed: monotone && final_ok,
        details: vec![format!(
            "rel err by p {:?}: {}; non-increasing above {ERROR_RESOLUTION:e} {monotone}, p=5 below 1e-3 {final_ok}",
            ps,
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
        )],
        solves,
        seconds: 0.0,
    }
}

fn crossover_line() -> Outcome {
    let m = ModelParams::new(3, 1.0);
    let lambdas: Vec<f64> = (5..=15).map(|k| k as f64 / 10.0).collect();
    // Half-open (0.05, 1]: 0.10, 0.15, ..., 1.00.
    let temps: Vec<f64> = (2..=20).rev().map(|k| k as f64 * 0.05).collect();
    let step = 0.05;
    let exact = exact_crossover(&m, &lambdas, &temps, 1e-3).unwrap();
    let settings = ScanSettings { blocks_p: 5, delta_lambda: 1e-3, seed: 7, solver: SolverConfig::default() };
    let lines = crossover_scan(&m, &lambdas, &temps, &settings, &NoCache).unwrap();
    let mut within = 0;
    let mut details = Vec::new();
    for (e, v) in exact.iter().zip(&lines) {
        let t_var = v.peak.map(|p| p.t_star);
        let ok = t_var.is_some_and(|t| (t - e.peak.t_star).abs() <= step + 1e-12);
        within += ok as usize;
        details.push(format!("lambda={:.1}: T* exact {:.4} var {}", e.lambda, e.peak.t_star, t_var.map_or("none".into(), |t| format!("{t:.4}"))));
    }
    let t_exact: Vec<f64> = exact.iter().map(|e| e.peak.t_star).collect();
    let k = (0..t_exact.len()).min_by(|&a, &b| t_exact[a].total_cmp(&t_exact[b])).unwrap();
    let v_shape = t_exact[..=k].windows(2).all(|w| w[1] <= w[0]) && t_exact[k..].windows(2).all(|w| w[1] >= w[0]);
    let min_near_one = (lambdas[k] - 1.0).abs() <= 0.1 + 1e-12;
    details.insert(
        0,
        format!("{within}/11 within one T step (need 10); exact line V-shaped {v_shape}, minimum at lambda={} (need within 0.1 of 1)", lambdas[k]),
    );
    let solves = lines.into_iter().flat_map(|l| l.cells.into_iter().flat_map(|c| [c.minus, c.center, c.plus])).collect();
    Outcome { id: 4, title: "crossover line", passed: within >= 10 && v_shape && min_near_one, details, solves, seconds: 0.0 }
}

fn two_site_anchor() -> Outcome {
    let m = ModelParams::new(2, 0.5);
    let e = std::f64::consts::E;
    let closed_f = -(e * e + e + 1.0 / e + 1.0 / (e * e)).ln();
    let f_oracle = exact_free_energy(&m, 1.0).unwrap();
    // χ = 8β[cosh(2βλ) Z - 2 sinh²(2βλ)]/Z² with Z = 2cosh(2βλ) + 2cosh(2β), at β = 1.
    let z = 2.0 * (1.0f64).cosh() + 2.0 * (2.0f64).cosh();
    let chi_closed = 8.0 * ((1.0f64).cosh() * z - 2.0 * (1.0f64).sinh().powi(2)) / (z * z);
    let chi_oracle = exact_susceptibility(&m, 1.0, 1e-3).unwrap();
    let s = cold(m, 1.0, 3, 5);
    let f_ok = (f_oracle - closed_f).abs() <= 1e-9;
    let chi_ok = (chi_closed - 0.9671).abs() <= 1e-3 && (chi_oracle - 0.9671).abs() <= 1e-3;
    let var_ok = (s.free_energy - f_oracle).abs() <= 1e-3;
    Outcome {
        id: 5,
        title: "two-site closed-form anchor",
        passed: f_ok && chi_ok && var_ok,
        details: vec![format!(
            "oracle F {f_oracle:.12} vs closed form {closed_f:.12}; chi closed {chi_closed:.5} oracle {chi_oracle:.5}; variational F {:.12}",
            s.free_energy
        )],
        solves: vec![s],
        seconds: 0.0,
    }
}

fn scaling_behavior() -> Outcome {
    let m = ModelParams::new(6, 1.0);
    let temps = [1.0, 0.7, 0.5, 0.4, 0.3];
    let settings = ScalingSettings {
        blocks_p: 5,
        seed: 61,
        solver: SolverConfig::default(),
        time_grid: default_time_grid(),
        spacings: default_spacings(6),
    };
    let cells = scaling_study(&m, &[0.95, 1.0], &temps, &settings, &NoCache).unwrap();
    let mut details = Vec::new();
    let at = |l: f64| cells.iter().filter(move |c| c.lambda == l);
    let inv_t: Vec<f64> = at(1.0).map(|c| 1.0 / c.temperature).collect();
    let xi: Vec<Option<f64>> = at(1.0).map(|c| c.xi()).collect();
    let tau: Vec<Option<f64>> = at(1.0).map(|c| c.tau()).collect();
    let mut passed = true;
    let mut trend = None;
    for (name, ys) in [("xi", &xi), ("tau", &tau)] {
        if ys.iter().all(Option::is_some) {
            let ys: Vec<f64> = ys.iter().map(|y| y.unwrap()).collect();
            let (r2, a, b) = r_squared(&inv_t, &ys);
            passed &= r2 >= 0.95;
            details.push(format!("lambda=1.0 {name} vs 1/T: R^2 {r2:.4} (need 0.95); values {ys:.4?}"));
            if name == "xi" {
                trend = Some((a, b));
            }
        } else {
            passed = false;
            details.push(format!("lambda=1.0 {name}: some fits failed"));
        }
    }
    let low = at(0.95).next_back().and_then(|c| c.xi().map(|x| (c.temperature, x)));
    match (low, trend) {
        (Some((t, x)), Some((a, b))) => {
            let predicted = a + b / t;
            passed &= x > predicted;
            details.push(format!("lambda=0.95 at T={t}: xi {x:.4} vs lambda=1.0 trend {predicted:.4}"));
        }
        _ => {
            passed = false;
            details.push("lambda=0.95 comparison unavailable".into());
        }
    }

    // Diagnostic only: the same fits on exact Gibbs states.
    let mut ex_xi = Vec::new();
    let mut ex_tau = Vec::new();
    for &t in &temps {
        let g = exact_gibbs(&m, t).unwrap();
        let evo = TimeEvolution::from_spectral(g.spectral.clone());
        let c = measure_correlations(&g.density_matrix(), &evo, &settings.spacings, &settings.time_grid).unwrap();
        ex_xi.push(c.xi_fit.map(|f| f.length_scale).unwrap_or(f64::NAN));
        ex_tau.push(c.tau_fit.map(|f| f.length_scale).unwrap_or(f64::NAN));
    }
    details.push(format!(
        "exact-state reference at lambda=1.0: R^2 xi {:.4}, R^2 tau {:.4}",
        r_squared(&inv_t, &ex_xi).0,
        r_squared(&inv_t, &ex_tau).0
    ));
    let solves = cells.into_iter().map(|c| c.solution).collect();
    Outcome { id: 6, title: "scaling behavior", passed, details, solves, seconds: 0.0 }
}

fn circuit_identities(all_solves: &[ThermalSolution]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut details = Vec::new();

    let mut worst_h: f64 = 0.0;
    for draw in 0..50 {
        let n = 2 + draw % 3;
        let model = ModelParams::new(n, rng.gen_range(0.0..2.0));
        let terms = build_kitaev_ring(&model).unwrap();
        let params = random_params(n, 2, &mut rng);
        let state = variational_state(&params, &terms).unwrap();
        let evo = TimeEvolution::from_model(&model).unwrap();
        let site = rng.gen_range(1..=n);
        let t = rng.gen_range(0.0..3.0);
        let d = dynamical_correlation_direct(&state, &evo, site, t).unwrap();
        let h = dynamical_correlation_hadamard(&state, &evo, site, t).unwrap();
        worst_h = worst_h.max((d - h).norm());
    }
    details.push(format!("Hadamard vs direct: worst {worst_h:.3e} over 50 draws (tol 1e-10)"));

    let mut worst_g: f64 = 0.0;
    for draw in 0..50 {
        let n = 2 + draw % 3;
        let p = 1 + (draw / 3) % 3;
        let model = ModelParams::new(n, rng.gen_range(0.0..2.0));
        let t = rng.gen_range(0.1..3.0);
        let terms = build_kitaev_ring(&model).unwrap();
        let params = random_params(n, p, &mut rng);
        let g = gradient(&params, &terms, t).unwrap();
        let x = params.to_vec();
        let h = 1e-5;
        let fd: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let f = |v: &[f64]| free_energy(&AnsatzParams::from_slice(n, p, v).unwrap(), &terms, t).unwrap().free_energy;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst_g = worst_g.max(diff / norm);
    }
    details.push(format!("gradient vs central differences: worst rel {worst_g:.3e} over 50 draws (tol 1e-6)"));

    let mut worst_s: f64 = 0.0;
    let terms = build_kitaev_ring(&ModelParams::new(4, 1.0)).unwrap();
    let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.4)).collect();
    for _ in 0..20 {
        let mut params = random_params(4, 3, &mut rng);
        params.theta = theta.clone();
        let s = von_neumann_entropy(&variational_state(&params, &terms).unwrap()).unwrap();
        worst_s = worst_s.max((s - spectrum_entropy(&theta)).abs());
    }
    details.push(format!("entropy invariance: worst {worst_s:.3e} over 20 draws (tol 1e-10)"));

    let converged: Vec<&ThermalSolution> = all_solves.iter().filter(|s| s.converged).collect();
    let mut violations = 0;
    let mut worst_b = f64::NEG_INFINITY;
    for s in &converged {
        let gap = exact_free_energy(&s.model, s.temperature).unwrap() - s.free_energy;
        worst_b = worst_b.max(gap);
        if gap > 1e-9 {
            violations += 1;
        }
    }
    details.push(format!(
        "variational bound: {violations} violations over {} converged solves of {} total (largest F_exact - F_var {worst_b:.3e}, tol 1e-9)",
        converged.len(),
        all_solves.len()
    ));

    Outcome {
        id: 7,
        title: "circuit-identity suite",
        passed: worst_h <= 1e-10 && worst_g <= 1e-6 && worst_s <= 1e-10 && violations == 0,
        details,
        solves: Vec::new(),
        seconds: 0.0,
    }
}

fn random_params(n: usize, p: usize, rng: &mut ChaCha8Rng) -> AnsatzParams {
    let flat: Vec<f64> = (0..n * (1 + 2 * p)).map(|_| rng.gen_range(-3.2..3.2)).collect();
    AnsatzParams::from_slice(n, p, &flat).unwrap()
}

fn timed(f: fn() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    o.seconds = start.elapsed().as_secs_f64();
    o
}

fn main() {
    // `cargo test -- --list` and filters: this gate has a single entry.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let criteria: [fn() -> Outcome; 6] =
        [infinite_temperature, free_energy_accuracy, block_convergence, crossover_line, two_site_anchor, scaling_behavior];
    let mut outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let hs: Vec<_> = criteria.iter().map(|&f| scope.spawn(move || timed(f))).collect();
        hs.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let all: Vec<ThermalSolution> = outcomes.iter().flat_map(|o| o.solves.iter().cloned()).collect();
    let start = Instant::now();
    let mut c7 = circuit_identities(&all);
    c7.seconds = start.elapsed().as_secs_f64();
    outcomes.push(c7);

    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        failed += !o.passed as usize;
        println!("{status} criterion {}: {} ({:.1}s)", o.id, o.title, o.seconds);
        for d in &o.details {
            println!("    {d}");
        }
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
