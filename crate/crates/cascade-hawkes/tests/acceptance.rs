//! End-to-end acceptance suite: parameter recovery on simulated data, EM
//! guarantees, independent numerical oracles, and simulator calibration.
//! Each criterion prints one PASS/FAIL line; the test fails if any criterion
//! fails.

use std::fmt::Write as _;
use std::time::Instant;

use cascade_hawkes::em::{self, EmConfig};
use cascade_hawkes::io;
use cascade_hawkes::model::{
    log_likelihood, rescaled_interarrivals, stance_intensity, total_intensity, Cascade, Event,
    ModelParams, Stance, TweetType,
};
use cascade_hawkes::sim::{self, SimConfig, UserAssignment};
use cascade_hawkes::stats;

/// Ground-truth parameters of the simulated-data recovery study.
fn recovery_truth() -> ModelParams {
    ModelParams {
        mu: [0.15, 0.015],
        x_scale: 1000.0,
        delta: [1.5e-3, 2e-5, 2.5e-6, 5e-6],
        gamma: [[0.9, 0.1], [0.5, 0.5]],
        omega: [3.0, 1.5],
        p_type: [0.0, 0.7393, 0.1208, 0.1399],
        beta_follow: 0.95,
        beta_reply_view: 0.05,
        horizon_t: 6000.0,
    }
}

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(results: &mut Vec<Outcome>, name: &'static str, pass: bool, detail: String) {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    results.push(Outcome { name, pass, detail });
}

fn within_rel(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target.abs()
}

/// Criterion 1: simulate once at the truth, fit, and recover the parameters
/// within the stated bands. Returns the fitted report and the cascade for
/// reuse by criteria 2 and 3.
fn criterion_1(results: &mut Vec<Outcome>) -> Option<(em::FitReport, Cascade)> {
    let started = Instant::now();
    let truth = recovery_truth();
    // A high-reach network makes the rare retweet-triggered children (true
    // delta_ret = 2e-5) numerous enough to be identifiable while keeping the
    // event count inside the band.
    let graph = sim::generate_network(5000, 3000.0, 20_240_001).expect("network");
    let report = sim::simulate_cascade(&SimConfig {
        params: &truth,
        graph: &graph,
        seed: 20_240_002,
        max_events: 50_000,
        user_assignment: UserAssignment::FollowerProportional,
    })
    .expect("simulation");
    let n = report.cascade.len();
    if !(1500..=7000).contains(&n) {
        check(
            results,
            "1 (parameter recovery)",
            false,
            format!("simulated event count {n} outside [1500, 7000]"),
        );
        return None;
    }
    // Deep convergence: the quote/reply influence factors collapse toward
    // zero only near the likelihood optimum, which is what makes the ordinal
    // delta check meaningful.
    let config = EmConfig {
        epsilon: 1e-6,
        max_iters: 800,
        ..EmConfig::default()
    };
    let fitted = match em::fit(&report.cascade, Some(&graph), &config) {
        Ok(f) => f,
        Err(e) => {
            check(results, "1 (parameter recovery)", false, format!("fit failed: {e}"));
            return None;
        }
    };
    let p = &fitted.params;
    let mut failures = Vec::new();
    if !within_rel(p.mu[0], 0.15, 0.10) {
        failures.push(format!("mu_s {} not within 10% of 0.15", p.mu[0]));
    }
    if !within_rel(p.x_scale, 1000.0, 0.10) {
        failures.push(format!("x {} not within 10% of 1000", p.x_scale));
    }
    if (p.gamma[0][0] - 0.9).abs() > 0.05 {
        failures.push(format!("gamma_ss {} not within 0.05 of 0.9", p.gamma[0][0]));
    }
    if (p.gamma[1][0] - 0.5).abs() > 0.20 {
        failures.push(format!("gamma_ns {} not within 0.20 of 0.5", p.gamma[1][0]));
    }
    if !within_rel(p.mu[1], 0.015, 0.50) {
        failures.push(format!("mu_n {} not within 50% of 0.015", p.mu[1]));
    }
    let (d_ori, d_ret, d_quo, d_rply) = (p.delta[0], p.delta[1], p.delta[2], p.delta[3]);
    if !(d_ori > d_ret && d_ret > 10.0 * d_quo.max(d_rply)) {
        failures.push(format!(
            "delta ordering violated: ori {d_ori:.3e} ret {d_ret:.3e} quo {d_quo:.3e} rply {d_rply:.3e}"
        ));
    }
    if !(p.omega[0] > p.omega[1]) {
        failures.push(format!(
            "omega ordering violated: omega_s {} <= omega_n {}",
            p.omega[0], p.omega[1]
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let mut detail = format!(
        "{n} events, {} iterations in {elapsed:.1}s; mu_s {:.4} x {:.1} gamma_ss {:.4} gamma_ns {:.4} mu_n {:.5}",
        fitted.iterations, p.mu[0], p.x_scale, p.gamma[0][0], p.gamma[1][0], p.mu[1]
    );
    if !failures.is_empty() {
        let _ = write!(detail, "; {}", failures.join("; "));
    }
    check(results, "1 (parameter recovery)", failures.is_empty(), detail);
    Some((fitted, report.cascade))
}

/// Deterministic pseudo-random small parameter sets for criteria 2 and 3.
fn small_random_params(seed: u64) -> ModelParams {
    // Spread the seed bits over a few scales; values stay subcritical for the
    // small graphs used below.
    let f = |k: u64, lo: f64, hi: f64| {
        let h = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let u = ((h >> 11) as f64) / ((1u64 << 53) as f64);
        lo + u * (hi - lo)
    };
    let g_ss = f(1, 0.55, 0.95);
    let g_ns = f(2, 0.2, 0.8);
    // Retweet-free offspring: with no retweet events the complete-data model
    // is coherent and the per-iteration bound increase is an exact guarantee
    // rather than an empirical one (the gamma update's retweet carve-out
    // makes the loop a generalized EM otherwise).
    let p_quo = f(4, 0.1, 0.3);
    ModelParams {
        mu: [f(5, 0.5, 2.0), f(6, 0.1, 0.6)],
        x_scale: f(7, 5.0, 18.0),
        delta: [
            f(8, 2e-3, 8e-3),
            f(9, 5e-4, 2e-3),
            f(10, 2e-4, 1e-3),
            f(11, 2e-4, 1e-3),
        ],
        gamma: [[g_ss, 1.0 - g_ss], [g_ns, 1.0 - g_ns]],
        omega: [f(12, 1.5, 4.0), f(13, 1.2, 2.5)],
        p_type: [0.0, 0.0, p_quo, 1.0 - p_quo],
        beta_follow: 0.95,
        beta_reply_view: 0.05,
        horizon_t: 100.0,
    }
}

fn small_cascade(seed: u64) -> Cascade {
    let params = small_random_params(seed);
    let graph = sim::generate_network(400, 25.0, seed).expect("network");
    sim::simulate_cascade(&SimConfig {
        params: &params,
        graph: &graph,
        seed: seed.wrapping_add(1),
        max_events: 10_000,
        user_assignment: UserAssignment::Uniform,
    })
    .expect("simulation")
    .cascade
}

/// Criterion 2: the fit objective trace is nondecreasing within 1e-8 per
/// iteration on criterion 1's fit and on 20 random small fits.
fn criterion_2(results: &mut Vec<Outcome>, main_fit: Option<&em::FitReport>) {
    let mut violations = Vec::new();
    let mut traces = 0;
    let check_trace = |label: String, trace: &[f64], violations: &mut Vec<String>| {
        for (i, w) in trace.windows(2).enumerate() {
            if w[1] - w[0] < -1e-8 {
                violations.push(format!(
                    "{label}: step {i} decreased {:.6} -> {:.6}",
                    w[0], w[1]
                ));
            }
        }
    };
    if let Some(fit) = main_fit {
        traces += 1;
        check_trace("recovery fit".into(), &fit.q_trace, &mut violations);
    }
    for seed in 0..20u64 {
        let cascade = small_cascade(1000 + seed);
        if cascade.is_empty() {
            continue;
        }
        let config = EmConfig {
            epsilon: 1e-8,
            max_iters: 60,
            ..EmConfig::default()
        };
        match em::fit(&cascade, None, &config) {
            Ok(fit) => {
                traces += 1;
                check_trace(format!("small fit {seed}"), &fit.q_trace, &mut violations);
            }
            Err(e) => violations.push(format!("small fit {seed} failed: {e}")),
        }
    }
    check(
        results,
        "2 (EM monotonicity)",
        violations.is_empty(),
        if violations.is_empty() {
            format!("{traces} traces nondecreasing within 1e-8")
        } else {
            violations.join("; ")
        },
    );
}

/// Criterion 3: responsibility rows sum to 1 within 1e-10 on every E-step.
fn criterion_3(results: &mut Vec<Outcome>, main: Option<&(em::FitReport, Cascade)>) {
    let mut max_dev: f64 = 0.0;
    let mut rows = 0usize;
    let mut scan = |params: &ModelParams, cascade: &Cascade| {
        let resp = em::e_step(params, cascade).expect("e-step");
        for row in &resp.rows {
            max_dev = max_dev.max((row.total() - 1.0).abs());
        }
        rows += resp.rows.len();
    };
    if let Some((fit, cascade)) = main {
        let init = em::param_init(cascade, cascade.horizon_t()).expect("init");
        scan(&init, cascade);
        scan(&fit.params, cascade);
    }
    for seed in 0..5u64 {
        let cascade = small_cascade(2000 + seed);
        if cascade.is_empty() {
            continue;
        }
        let init = em::param_init(&cascade, cascade.horizon_t()).expect("init");
        scan(&init, &cascade);
        scan(&small_random_params(seed), &cascade);
    }
    check(
        results,
        "3 (responsibility normalization)",
        max_dev < 1e-10,
        format!("max |row sum - 1| = {max_dev:.3e} over {rows} rows"),
    );
}

/// Criterion 4: central-finite-difference partials of Q vanish at the M-step
/// output for every updated parameter family.
fn criterion_4(results: &mut Vec<Outcome>) {
    // ~50 events with T = 50 >= 10 / min(omega) = 10 / 1.5.
    let gen = ModelParams {
        mu: [0.7, 0.2],
        x_scale: 12.0,
        delta: [6e-3, 2e-3, 1.5e-3, 1.5e-3],
        gamma: [[0.85, 0.15], [0.4, 0.6]],
        omega: [3.0, 1.5],
        p_type: [0.0, 0.5, 0.25, 0.25],
        beta_follow: 0.95,
        beta_reply_view: 0.05,
        horizon_t: 50.0,
    };
    let graph = sim::generate_network(300, 25.0, 77).expect("network");
    let cascade = sim::simulate_cascade(&SimConfig {
        params: &gen,
        graph: &graph,
        seed: 78,
        max_events: 10_000,
        user_assignment: UserAssignment::Uniform,
    })
    .expect("simulation")
    .cascade;
    let init = em::param_init(&cascade, cascade.horizon_t()).expect("init");
    let resp = em::e_step(&init, &cascade).expect("e-step");
    let config = EmConfig::default();
    let (theta, _) = em::m_step(&resp, &cascade, &init, &config).expect("m-step");
    let q0 = em::q_value(&theta, &resp, &cascade).expect("q").abs().max(1.0);

    let mut worst: (f64, String) = (0.0, String::new());
    let mut probe = |label: String, apply: &dyn Fn(&mut ModelParams, f64), scale: f64| {
        let h = 1e-5 * scale;
        let mut plus = theta.clone();
        apply(&mut plus, h);
        let mut minus = theta.clone();
        apply(&mut minus, -h);
        let qp = em::q_value(&plus, &resp, &cascade).expect("q+");
        let qm = em::q_value(&minus, &resp, &cascade).expect("q-");
        // Relative partial: slope scaled by the parameter scale and |Q|.
        let rel = ((qp - qm) / (2.0 * h)) * scale / q0;
        if rel.abs() > worst.0 {
            worst = (rel.abs(), label);
        }
    };
    for k in 0..2 {
        let s = theta.mu[k];
        probe(format!("mu[{k}]"), &move |p, h| p.mu[k] += h, s);
        let s = theta.omega[k];
        probe(format!("omega[{k}]"), &move |p, h| p.omega[k] += h, s);
        // Within-row gamma direction: move mass between the two columns.
        let s = theta.gamma[k][0].min(theta.gamma[k][1]);
        probe(
            format!("gamma row {k}"),
            &move |p, h| {
                p.gamma[k][0] += h;
                p.gamma[k][1] -= h;
            },
            s,
        );
    }
    for r in 0..4 {
        let s = theta.delta[r];
        if s > 0.0 {
            probe(format!("delta[{r}]"), &move |p, h| p.delta[r] += h, s);
        }
    }
    let s = theta.x_scale;
    probe("x".into(), &move |p, h| p.x_scale += h, s);
    check(
        results,
        "4 (M-step stationarity)",
        worst.0 < 1e-4,
        format!(
            "{} events; worst relative FD partial {:.3e} ({})",
            cascade.len(),
            worst.0,
            worst.1
        ),
    );
}

/// Adaptive Simpson quadrature, used as an independent compensator oracle.
fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn s<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    let m = 0.5 * (a + b);
    let whole = s(&f, a, b);
    let left = s(&f, a, m);
    let right = s(&f, m, b);
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
    }
}

fn oracle_event(
    id: &str,
    time: f64,
    tweet_type: TweetType,
    stance: Stance,
    reach: f64,
) -> Event {
    Event {
        id: id.into(),
        time,
        user: format!("u_{id}"),
        tweet_type,
        stance,
        parent_id: None,
        reach: Some(reach),
    }
}

/// Criterion 5: exact log-likelihood matches the quadrature-compensator
/// evaluation on a 10-event hand-built cascade.
fn criterion_5(results: &mut Vec<Outcome>) {
    use Stance::*;
    use TweetType::*;
    let params = ModelParams {
        mu: [0.4, 0.12],
        x_scale: 4.0,
        delta: [0.03, 0.012, 0.006, 0.009],
        gamma: [[0.8, 0.2], [0.35, 0.65]],
        omega: [2.2, 1.1],
        p_type: [0.0, 0.5, 0.25, 0.25],
        beta_follow: 0.95,
        beta_reply_view: 0.05,
        horizon_t: 20.0,
    };
    let events = vec![
        oracle_event("e0", 0.4, Original, Supporting, 12.0),
        oracle_event("e1", 1.1, Retweet, Supporting, 3.0),
        oracle_event("e2", 1.9, Original, NotSupporting, 8.0),
        oracle_event("e3", 2.4, Quote, Supporting, 5.0),
        oracle_event("e4", 3.3, Reply, NotSupporting, 2.0),
        oracle_event("e5", 4.8, Retweet, Supporting, 6.0),
        oracle_event("e6", 5.9, Original, Supporting, 9.0),
        oracle_event("e7", 7.2, Quote, NotSupporting, 4.0),
        oracle_event("e8", 8.8, Reply, Supporting, 7.0),
        oracle_event("e9", 9.0, Retweet, NotSupporting, 3.5),
    ];
    let times: Vec<f64> = events.iter().map(|e| e.time).collect();
    let cascade = Cascade::new(events, params.horizon_t).expect("cascade");
    let exact = log_likelihood(&params, &cascade).expect("loglik");

    // Quadrature compensator: integrate the total intensity piecewise between
    // event times, where the integrand is smooth.
    let total = |t: f64| {
        total_intensity(&params, &cascade, t)
            .expect("intensity")
            .total
    };
    let mut knots = vec![0.0];
    knots.extend(&times);
    knots.push(params.horizon_t);
    let mut big_lambda = 0.0;
    for w in knots.windows(2) {
        if w[1] > w[0] {
            big_lambda += simpson(&total, w[0], w[1], 1e-12, 40);
        }
    }
    let mut sum_log = 0.0;
    for (j, &t) in times.iter().enumerate() {
        let k = cascade.events()[j].stance;
        // Left-limit intensity via the strict-history event form.
        let lambda = cascade_hawkes::model::event_intensity(&params, &cascade, j).expect("lambda");
        let _ = (t, k);
        sum_log += lambda.ln();
    }
    let oracle = sum_log - big_lambda;
    let rel = (exact - oracle).abs() / oracle.abs();
    check(
        results,
        "5 (likelihood quadrature oracle)",
        rel < 1e-6,
        format!("exact {exact:.9}, quadrature {oracle:.9}, rel diff {rel:.3e}"),
    );
}

/// Criterion 6: immigrant-count calibration over 200 seeds and universal
/// retweet stance inheritance.
fn criterion_6(results: &mut Vec<Outcome>) {
    let mut params = recovery_truth();
    // Keep descendants sparse: the immigrant count is what is calibrated.
    params.delta = [1.5e-3, 2e-5, 2.5e-6, 5e-6];
    let graph = sim::generate_network(300, 10.0, 909).expect("network");
    let mut counts = Vec::with_capacity(200);
    let mut retweets = 0usize;
    let mut inherited = 0usize;
    for seed in 0..200u64 {
        let report = sim::simulate_cascade(&SimConfig {
            params: &params,
            graph: &graph,
            seed: 40_000 + seed,
            max_events: 20_000,
            user_assignment: UserAssignment::Uniform,
        })
        .expect("simulation");
        let cascade = report.cascade;
        let supporting_originals = cascade
            .events()
            .iter()
            .filter(|e| e.tweet_type == TweetType::Original && e.stance == Stance::Supporting)
            .count();
        counts.push(supporting_originals as f64);
        for ev in cascade.events() {
            if ev.tweet_type == TweetType::Retweet {
                retweets += 1;
                let parent = ev
                    .parent_id
                    .as_deref()
                    .and_then(|p| cascade.index_of(p))
                    .map(|i| cascade.events()[i].stance);
                if parent == Some(ev.stance) {
                    inherited += 1;
                }
            }
        }
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    // Immigrant counts are Poisson(mu_s * T = 900).
    let se = (900.0f64 / n).sqrt();
    let dev = (mean - 900.0).abs();
    let calibrated = dev <= 3.0 * se;
    let all_inherit = retweets > 0 && inherited == retweets;
    check(
        results,
        "6 (simulator calibration)",
        calibrated && all_inherit,
        format!(
            "mean supporting immigrants {mean:.2} (target 900, 3 SE = {:.2}); {inherited}/{retweets} retweets inherit stance",
            3.0 * se
        ),
    );
}

/// Criterion 7: time-rescaling KS calibration — residuals pass under the
/// generating parameters and fail under omega inflated x10.
fn criterion_7(results: &mut Vec<Outcome>) {
    let params = ModelParams {
        mu: [1.0, 0.3],
        x_scale: 30.0,
        delta: [3.2e-2, 2.8e-2, 2.8e-2, 2.8e-2],
        gamma: [[0.85, 0.15], [0.45, 0.55]],
        omega: [8.0, 3.84],
        p_type: [0.0, 0.5, 0.25, 0.25],
        beta_follow: 0.95,
        beta_reply_view: 0.05,
        horizon_t: 200.0,
    };
    let mut wrong = params.clone();
    wrong.omega = [80.0, 38.4];
    let graph = sim::generate_network(500, 30.0, 701).expect("network");
    let mut pass_true = 0usize;
    let mut fail_wrong = 0usize;
    let runs = 100u64;
    for seed in 0..runs {
        let cascade = sim::simulate_cascade(&SimConfig {
            params: &params,
            graph: &graph,
            seed: 70_000 + seed,
            max_events: 30_000,
            user_assignment: UserAssignment::Uniform,
        })
        .expect("simulation")
        .cascade;
        if cascade.len() < 10 {
            continue;
        }
        let resid = rescaled_interarrivals(&params, &cascade).expect("residuals");
        if stats::ks_test_exp1(&resid).expect("ks").p_value >= 0.01 {
            pass_true += 1;
        }
        let resid = rescaled_interarrivals(&wrong, &cascade).expect("residuals");
        if stats::ks_test_exp1(&resid).expect("ks").p_value < 0.01 {
            fail_wrong += 1;
        }
    }
    let ok = pass_true >= 95 && fail_wrong >= 95;
    check(
        results,
        "7 (goodness-of-fit calibration)",
        ok,
        format!("true params pass {pass_true}/{runs}; omega x10 rejected {fail_wrong}/{runs}"),
    );
}

/// Criterion 8: the shipped case-study parameter file simulates, and the
/// supporting-stance intensity dominates at every grid point.
fn criterion_8(results: &mut Vec<Outcome>) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_study_params.json");
    let file = std::fs::File::open(path).expect("case-study params file");
    let params_file = io::read_params(std::io::BufReader::new(file)).expect("parse params");
    let params = params_file.to_model().expect("valid params");
    let graph =
        sim::generate_network(params_file.user_count as usize, 50.0, 808).expect("network");
    let ratio = sim::branching_ratio(&params, &graph);
    let cascade = sim::simulate_cascade(&SimConfig {
        params: &params,
        graph: &graph,
        seed: 809,
        max_events: 100_000,
        user_assignment: UserAssignment::FollowerProportional,
    })
    .expect("simulation")
    .cascade;
    let grid = 200;
    let mut dominated = true;
    let mut min_gap = f64::INFINITY;
    for i in 0..grid {
        let t = params.horizon_t * i as f64 / (grid - 1) as f64;
        let ls = stance_intensity(&params, &cascade, Stance::Supporting, t).expect("lambda_s");
        let ln = stance_intensity(&params, &cascade, Stance::NotSupporting, t).expect("lambda_n");
        min_gap = min_gap.min(ls - ln);
        if ls <= ln {
            dominated = false;
        }
    }
    check(
        results,
        "8 (case-study dominance)",
        dominated,
        format!(
            "{} events (branching ratio {ratio:.3}); min lambda_s - lambda_n over {grid} grid points = {min_gap:.4}",
            cascade.len()
        ),
    );
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let main = criterion_1(&mut results);
    criterion_2(&mut results, main.as_ref().map(|(f, _)| f));
    criterion_3(&mut results, main.as_ref());
    criterion_4(&mut results);
    criterion_5(&mut results);
    criterion_6(&mut results);
    criterion_7(&mut results);
    criterion_8(&mut results);
    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.pass).collect();
    assert!(
        failed.is_empty(),
        "{} criterion(s) failed: {}",
        failed.len(),
        failed
            .iter()
            .map(|o| format!("{}: {}", o.name, o.detail))
            .collect::<Vec<_>>()
            .join(" | ")
    );
}
