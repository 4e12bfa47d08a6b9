//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line.
//!
//! The binary exits successfully even when a criterion fails so that the rest
//! of the test suite still runs; set `IONSHUTTLE_ACCEPTANCE_STRICT=1` to turn a
//! failure into a non-zero exit status.

use std::f64::consts::PI;
use std::time::Instant;

use ionshuttle::chain::{self, potential_forces};
use ionshuttle::config::{Preset, SeriesName, TfGrid};
use ionshuttle::design::{ComFamily, DESIGN_TOLERANCE};
use ionshuttle::dynamics::{self, IntegratorOptions};
use ionshuttle::sweep::{self, Context, Dataset};
use ionshuttle::trajectory::KindName;
use ionshuttle::{ChainConfig, PhaseState, Species, Trajectory};

const D: f64 = 370e-6;
const NU1: f64 = 2e6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn omega1() -> f64 {
    2.0 * PI * NU1
}

fn period() -> f64 {
    1.0 / NU1
}

fn pair(m2: Species) -> ChainConfig {
    ChainConfig::from_trap_frequency(vec![Species::beryllium9(), m2], omega1(), D).unwrap()
}

fn be_mg_context() -> Context {
    Context::new(pair(Species::magnesium24()), D, IntegratorOptions::default()).unwrap()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Mass-weighted Hessian of two ions at equilibrium, solved by hand: the
/// Coulomb curvature at the equilibrium spacing equals `u0 / 2`, so the
/// stiffness matrix is `u0 [[2, -1], [-1, 2]]`.
fn two_ion_oracle(m1: f64, m2: f64, u0: f64) -> [(f64, [f64; 2]); 2] {
    let (d11, d22, d12) = (2.0 * u0 / m1, 2.0 * u0 / m2, -u0 / (m1 * m2).sqrt());
    let tr = d11 + d22;
    let disc = ((d11 - d22).powi(2) + 4.0 * d12 * d12).sqrt();
    let mut out = [(0.0, [0.0; 2]); 2];
    for (k, lambda) in [0.5 * (tr - disc), 0.5 * (tr + disc)].into_iter().enumerate() {
        // (d11 - lambda) a + d12 b = 0; d12 never vanishes here.
        let (a, b) = (-d12, d11 - lambda);
        let n = a.hypot(b);
        out[k] = (lambda.sqrt(), [(a / n).abs(), (b / n).abs()]);
    }
    out
}

fn criterion_1() -> Outcome {
    let m1 = Species::beryllium9().mass;
    let mut worst: f64 = 0.0;
    for mu in [1.0, 23.985 / 9.012, 5.0, 10.0] {
        let config = ChainConfig::from_trap_frequency(
            vec![Species::new(m1).unwrap(), Species::new(mu * m1).unwrap()],
            omega1(),
            D,
        )
        .unwrap();
        let basis = chain::normal_modes(&config).unwrap();
        for (nu, (w, ab)) in two_ion_oracle(m1, mu * m1, config.u0()).iter().enumerate() {
            worst = worst.max((basis.omega[nu] / w - 1.0).abs());
            for (a, expect) in basis.modes[nu].iter().zip(ab) {
                worst = worst.max((a.abs() - expect).abs() / expect.max(1e-300));
            }
        }
    }
    let config = pair(Species::beryllium9());
    let basis = chain::normal_modes(&config).unwrap();
    let w = omega1();
    let freq_err = (basis.omega[0] / w - 1.0)
        .abs()
        .max((basis.omega[1] / (3f64.sqrt() * w) - 1.0).abs());
    let gmax = basis.gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let zero_gamma = basis.gamma.iter().filter(|g| g.abs() <= 1e-12 * gmax).count();
    let pass = worst < 1e-10 && freq_err < 1e-10 && zero_gamma == 1;
    outcome(
        pass,
        format!(
            "max rel deviation {worst:.2e} (< 1e-10); equal-mass frequency error {freq_err:.2e}; modes with zero Gamma: {zero_gamma}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let ctx = be_mg_context();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for k in linspace(2.0, 20.0, 20) {
        let tf = k * period();
        match ctx.design(tf).and_then(|r| ctx.uncoupled(&r.trajectory()?)) {
            Ok(rep) => worst = rep.quanta().into_iter().fold(worst, f64::max),
            Err(e) => failures.push(format!("{k:.2} periods: {e}")),
        }
    }
    outcome(
        failures.is_empty() && worst < 1e-6,
        format!(
            "20 designs, worst uncoupled mode excitation {worst:.2e} quanta (< 1e-6); failed designs: {}",
            failures.len()
        ) + &failures.iter().map(|f| format!("; {f}")).collect::<String>(),
    )
}

fn criterion_3() -> Outcome {
    let config = pair(Species::beryllium9());
    let ctx = Context::new(config, D, IntegratorOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for k in linspace(2.0, 20.0, 10) {
        let traj = ctx.analytic(ComFamily::Nonic, k * period(), 1.0).unwrap();
        let rep = ctx.simulate(&traj).unwrap();
        worst = worst.max(rep.modes[0].quanta);
    }
    outcome(
        worst < 1e-8,
        format!("centre-of-mass excitation at 10 durations: max {worst:.2e} quanta (< 1e-8)"),
    )
}

fn is_local_min(v: &[f64], i: usize) -> bool {
    i > 0 && i + 1 < v.len() && v[i] < v[i - 1] && v[i] <= v[i + 1]
}

fn criterion_4() -> Outcome {
    let mut spec = Preset::Fig4a.spec();
    let dense = spec.tf_values().unwrap();
    let h = dense[1] - dense[0];
    let sparse: Vec<f64> = (0..16).map(|i| 1e-3 * 20f64.powf(i as f64 / 15.0)).collect();
    spec.tf = TfGrid::Values {
        values_s: dense.iter().chain(&sparse).copied().collect(),
    };
    let data: Dataset = sweep::run_sweep(&spec, sweep::default_workers()).unwrap();
    let errors = data.rows.iter().filter(|r| r.error.is_some()).count();
    let ctx = Context::from_spec(&spec).unwrap();
    let dense_rows = &data.rows[..dense.len()];
    let t: Vec<f64> = dense_rows.iter().map(|r| r.tf).collect();
    let total: Vec<f64> = dense_rows.iter().map(|r| r.total_quanta_omega1).collect();
    let per_mode: Vec<Vec<f64>> = (0..ctx.num_modes())
        .map(|nu| dense_rows.iter().map(|r| r.quanta[nu]).collect())
        .collect();

    // (a) every predicted per-mode minimum has a sampled local minimum within one step.
    let mut a_pass = true;
    let mut a_detail = Vec::new();
    for (nu, v) in per_mode.iter().enumerate() {
        let minima: Vec<f64> = (0..v.len()).filter(|&i| is_local_min(v, i)).map(|i| t[i]).collect();
        let predicted = dynamics::spectral_minima(ctx.basis.omega[nu], t[0], t[t.len() - 1]);
        let unmatched: Vec<f64> = predicted
            .iter()
            .copied()
            .filter(|p| !minima.iter().any(|m| (m - p).abs() <= h * (1.0 + 1e-9)))
            .collect();
        a_pass &= unmatched.is_empty();
        let tail = unmatched
            .last()
            .map_or(String::from("none"), |u| format!("{:.3} us", u * 1e6));
        a_detail.push(format!(
            "mode {}: {}/{} matched, last unmatched {tail}",
            nu + 1,
            predicted.len() - unmatched.len(),
            predicted.len()
        ));
    }

    // (b) a joint minimum within 2% of 99 us at least 100x below its local envelope.
    let joint = |i: usize| {
        is_local_min(&total, i)
            && per_mode
                .iter()
                .all(|v| (i.saturating_sub(1)..=i + 1).any(|j| is_local_min(v, j)))
    };
    let envelope = |i: usize| {
        (0..t.len())
            .filter(|&j| (t[j] - t[i]).abs() <= 2e-6)
            .map(|j| total[j])
            .fold(0.0, f64::max)
    };
    let best_b = (0..t.len())
        .filter(|&i| (t[i] / 99e-6 - 1.0).abs() <= 0.02 && joint(i))
        .map(|i| (t[i], total[i], total[i] / envelope(i)))
        .min_by(|a, b| a.2.total_cmp(&b.2));
    let b_pass = best_b.is_some_and(|(_, _, ratio)| ratio <= 1e-2);
    let b_detail = best_b.map_or("no joint minimum in [97.02, 100.98] us".into(), |(tf, e, r)| {
        format!("joint minimum at {:.2} us, {e:.3} quanta, {r:.2e} of local envelope", tf * 1e6)
    });

    // (c) upper envelope A / tf^2 through the sparse samples, crossing 0.1 quanta.
    let a = data.rows[dense.len()..]
        .iter()
        .map(|r| r.total_quanta_omega1 * r.tf * r.tf)
        .fold(0.0, f64::max);
    let crossing = (a / 0.1).sqrt();
    let c_pass = (9.5e-3 / 1.5..=9.5e-3 * 1.5).contains(&crossing);

    outcome(
        errors == 0 && a_pass && b_pass && c_pass,
        format!(
            "(a) {} [{}]; (b) {} [{b_detail}]; (c) {} [envelope crosses 0.1 quanta at {:.2} ms]; failed points {errors}",
            if a_pass { "ok" } else { "fail" },
            a_detail.join(", "),
            if b_pass { "ok" } else { "fail" },
            if c_pass { "ok" } else { "fail" },
            crossing * 1e3,
        ),
    )
}

fn criterion_5() -> Outcome {
    let ctx = be_mg_context();
    let tf = 10.0 * period();
    let linear = ctx.simulate(&Trajectory::linear(tf, D).unwrap()).unwrap().total_quanta_omega1;
    let nonic = ctx.simulate(&ctx.analytic(ComFamily::Nonic, tf, 1.0).unwrap()).unwrap().total_quanta_omega1;
    let cosine = ctx.simulate(&ctx.analytic(ComFamily::Cosine, tf, 1.0).unwrap()).unwrap().total_quanta_omega1;
    outcome(
        nonic * 100.0 <= linear && cosine * 100.0 <= linear,
        format!("linear {linear:.3e}, nonic {nonic:.3e}, cosine {cosine:.3e} quanta"),
    )
}

fn criteria_6_7() -> (Outcome, Outcome) {
    let spec = Preset::Fig4b.spec();
    let ctx = Context::from_spec(&spec).unwrap();
    let mut ratios = Vec::new();
    let mut losses = Vec::new();
    let mut sigmas = Vec::new();
    for tf in spec.tf_values().unwrap() {
        let opt = sweep::optimize_sigma(&ctx, tf).unwrap();
        let nonic = ctx.simulate(&ctx.analytic(ComFamily::Nonic, tf, 1.0).unwrap()).unwrap().total_quanta_omega1;
        let ratio = opt.excitation / nonic;
        if nonic > opt.excitation {
            losses.push(format!("{:.1} us ({ratio:.3})", tf * 1e6));
        }
        ratios.push(ratio);
        sigmas.push(opt.sigma);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let c6 = outcome(
        losses.is_empty() && (1.2..=4.0).contains(&median),
        format!(
            "median erf/nonic ratio {median:.3} over {n} durations; nonic worse at {} of them{}",
            losses.len(),
            if losses.is_empty() {
                String::new()
            } else {
                format!(": {}", losses.join(", "))
            }
        ),
    );
    let (lo, hi) = sigmas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    let c7 = outcome(
        lo >= 3e-7 && hi <= 3e-6,
        format!("optimal sigma in [{lo:.3e}, {hi:.3e}] s over the grid"),
    );
    (c6, c7)
}

fn criterion_8() -> Outcome {
    let spec = Preset::Fig3.spec();
    let data = sweep::run_sweep(&spec, sweep::default_workers()).unwrap();
    let base = SeriesName::full(KindName::NonicAnalytic);
    let nominal: Vec<f64> = data
        .series(&sweep::series_label(base, 1.0))
        .map(|r| r.total_quanta_omega1)
        .collect();
    let tuned: Vec<f64> = data
        .series(&sweep::series_label(base, 0.983))
        .map(|r| r.total_quanta_omega1)
        .collect();
    let wins = nominal.iter().zip(&tuned).filter(|(a, b)| b < a).count();
    let fraction = wins as f64 / nominal.len().max(1) as f64;
    let ctx = Context::from_spec(&spec).unwrap();
    let scan = sweep::scan_omega_scale(
        &ctx,
        ComFamily::Nonic,
        &spec.omega_scan.values().unwrap(),
        &spec.tf_values().unwrap(),
    )
    .unwrap();
    outcome(
        nominal.len() == tuned.len() && !nominal.is_empty() && fraction > 0.7 && (scan.best - 0.983).abs() <= 0.005,
        format!(
            "0.983 lower at {wins}/{} durations; scan best {:.3}",
            nominal.len(),
            scan.best
        ),
    )
}

fn total_energy(config: &ChainConfig, state: &PhaseState) -> f64 {
    let kinetic: f64 = state
        .p
        .iter()
        .zip(config.masses())
        .map(|(p, m)| p * p / (2.0 * m))
        .sum();
    kinetic + potential_forces(config, &state.q, 0.0).unwrap().0
}

fn criterion_9() -> Outcome {
    let ctx = be_mg_context();
    let config = &ctx.config;
    let offsets = &ctx.basis.offsets;

    // Static trap, a few quanta in both modes, 100 trap periods at default tolerances.
    let mut start = PhaseState::at_rest(0.0, offsets.clone());
    start.q[0] += 20e-9;
    start.q[1] -= 5e-9;
    start.p[1] = 3e-27;
    let run = dynamics::propagate(
        config,
        &Trajectory::stationary(period()).unwrap(),
        (0.0, 100.0 * period()),
        &start,
        &IntegratorOptions::default(),
    )
    .unwrap();
    let (e0, e1) = (total_energy(config, &start), total_energy(config, &run.final_state));
    let drift = (e1 / e0 - 1.0).abs();
    let osc0 = dynamics::energy_above_minimum(config, offsets, &start, 0.0);
    let osc1 = dynamics::energy_above_minimum(config, offsets, &run.final_state, 0.0);
    let osc_drift = (osc1 / osc0 - 1.0).abs();

    // Boundary residuals: positions for every family, velocities and
    // accelerations for the families built to satisfy them.
    let gmax = ctx.basis.gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut worst_boundary: f64 = 0.0;
    let mut worst_design: f64 = 0.0;
    let mut halving: f64 = 0.0;
    let halved = Context::new(config.clone(), D, IntegratorOptions::with_rel_tol(0.5 * ctx.integrator.rel_tol)).unwrap();
    for k in linspace(2.0, 20.0, 20) {
        let tf = k * period();
        let designed = ctx.design(tf).unwrap();
        worst_design = worst_design.max(designed.max_residual() / (gmax * D));
        let smooth = [
            designed.trajectory().unwrap(),
            ctx.analytic(ComFamily::Nonic, tf, 1.0).unwrap(),
            ctx.analytic(ComFamily::Cosine, tf, 1.0).unwrap(),
        ];
        for traj in &smooth {
            worst_boundary = worst_boundary.max(traj.verify_boundaries().max_scaled());
        }
        for traj in [Trajectory::linear(tf, D).unwrap(), Trajectory::erf(tf, D, tf / 8.0).unwrap()] {
            let r = traj.verify_boundaries();
            worst_boundary = worst_boundary.max(r.q0_start.abs().max(r.q0_end.abs()) / D);
        }
        for traj in smooth.iter().chain([&Trajectory::linear(tf, D).unwrap()]) {
            let a = ctx.simulate(traj).unwrap().total_quanta_omega1;
            let b = halved.simulate(traj).unwrap().total_quanta_omega1;
            halving = halving.max((b / a - 1.0).abs());
        }
    }
    let pass = drift < 1e-9 && worst_boundary < 1e-9 && worst_design < DESIGN_TOLERANCE && halving < 0.01;
    outcome(
        pass,
        format!(
            "energy drift {drift:.2e} of total energy (oscillation energy alone {osc_drift:.2e}); boundary residual {worst_boundary:.2e}; design residual {worst_design:.2e}; tolerance halving {halving:.2e}"
        ),
    )
}

fn report(id: &str, name: &str, elapsed: f64, o: &Outcome) {
    println!(
        "{} criterion {id} ({name}): {} [{elapsed:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn main() {
    let strict = std::env::var("IONSHUTTLE_ACCEPTANCE_STRICT").is_ok_and(|v| v != "0");
    let mut passed = 0;
    let mut tally = |id: &str, name: &str, o: Outcome, elapsed: f64| {
        report(id, name, elapsed, &o);
        passed += o.pass as usize;
    };
    let (o, s) = timed(criterion_1);
    tally("1", "two-ion closed forms", o, s);
    let (o, s) = timed(criterion_2);
    tally("2", "uncoupled-model zero excitation", o, s);
    let (o, s) = timed(criterion_3);
    tally("3", "equal-mass centre of mass", o, s);
    let (o, s) = timed(criterion_4);
    tally("4", "linear-ramp anchors", o, s);
    let (o, s) = timed(criterion_5);
    tally("5", "designed versus linear ramp", o, s);
    // Both criteria come from the same sigma optimisation.
    let ((c6, c7), s) = timed(criteria_6_7);
    tally("6", "erf comparison", c6, s);
    tally("7", "optimal erf width", c7, 0.0);
    let (o, s) = timed(criterion_8);
    tally("8", "four-ion frequency tuning", o, s);
    let (o, s) = timed(criterion_9);
    tally("9", "numerical hygiene", o, s);
    println!("acceptance: {passed} of 9 criteria passed");
    if strict && passed < 9 {
        std::process::exit(1);
    }
}
