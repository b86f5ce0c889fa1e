//! EM parameter estimation: E-step responsibilities, closed-form M-step
//! updates, and the Q-function convergence loop.
//!
//! For each event j (stance k_j) the E-step attributes a unit of probability
//! between the background process and every admissible earlier event:
//!
//! ```text
//! p_jj ∝ mu_{k_j} * T * f(t_j; x)
//! p_jl ∝ delta_{r_l} * gamma_{k_l,k_j} * n_l * omega_{k_j} * e^{-omega_{k_j}(t_j - t_l)}
//! ```
//!
//! The M-step maximizes the expected complete-data log-likelihood (up to an
//! additive constant) with closed forms for mu, gamma, omega, and delta; the
//! immigrant-profile scale x has no closed form and is found by root-finding
//! on the weighted truncated-exponential score. The gamma update is restricted
//! to quote/reply children because retweets inherit their parent's stance.
//!
//! The default omega update and Q compensator drop the e^{-omega (T - t_j)}
//! tail factors, which is exact in the limit of events arriving well before T;
//! the pre-simplification fixed-point omega update is available behind
//! `exact_omega` for short-horizon data.

use rayon::prelude::*;

use crate::error::{HawkesError, Result};
use crate::io;
use crate::model::{
    log_likelihood, trunc_exp_mean, trunc_exp_pdf, AncestorSet, Cascade, FollowerGraph,
    ModelParams, Stance, TweetType, BETA_FOLLOW, BETA_REPLY_VIEW, EXP_UNDERFLOW,
};

/// Attribution row for one event: immigrant probability plus ancestor weights.
#[derive(Debug, Clone)]
pub struct EventResponsibility {
    pub immigrant: f64,
    /// (ancestor index, weight) pairs; zero-weight ancestors are omitted.
    pub ancestors: Vec<(u32, f64)>,
}

impl EventResponsibility {
    pub fn total(&self) -> f64 {
        self.immigrant + self.ancestors.iter().map(|&(_, p)| p).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Responsibilities {
    pub rows: Vec<EventResponsibility>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    /// All earlier events are admissible ancestors.
    Full,
    /// Only the resolved parent chain is admissible; events with no resolved
    /// parent fall back to all earlier events.
    NetworkRestricted,
}

#[derive(Debug, Clone)]
pub enum ParamInit {
    /// Moment-style heuristics from the cascade itself.
    Heuristic,
    Fixed(Box<ModelParams>),
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Convergence threshold on |Q^{(s+1)} - Q^{(s)}|.
    pub epsilon: f64,
    pub max_iters: usize,
    pub history_mode: HistoryMode,
    pub init: ParamInit,
    pub x_solver_tol: f64,
    /// Use the pre-simplification fixed-point omega update.
    pub exact_omega: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            epsilon: 1e-6,
            max_iters: 500,
            history_mode: HistoryMode::Full,
            init: ParamInit::Heuristic,
            x_solver_tol: 1e-10,
            exact_omega: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: ModelParams,
    /// Per-iteration objective: the Jensen lower bound on the log-likelihood,
    /// [`q_value`] plus the entropy of that iteration's responsibilities,
    /// evaluated after each M-step. This is the quantity the EM loop ascends;
    /// it coincides with the log-likelihood at a fixed point. The raw
    /// expected complete-data value from [`q_value`] alone is not monotone
    /// across iterations (responsibility entropy grows as attribution mass
    /// spreads), so it is unsuitable as a convergence trace.
    pub q_trace: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Parameter families whose update had no attribution mass and kept their
    /// previous value.
    pub warnings: Vec<String>,
}

fn responsibility_row(
    params: &ModelParams,
    cascade: &Cascade,
    j: usize,
    ancestors: Option<&[AncestorSet]>,
) -> Result<EventResponsibility> {
    let events = cascade.events();
    let ev = &events[j];
    let k = ev.stance;
    let omega = params.omega_k(k);
    let immigrant =
        params.mu_k(k) * params.horizon_t * trunc_exp_pdf(ev.time, params.x_scale, params.horizon_t);
    let mut terms: Vec<(u32, f64)> = Vec::new();
    let mut push_term = |l: usize| -> Result<()> {
        let anc = &events[l];
        let dt = ev.time - anc.time;
        if dt <= 0.0 {
            return Ok(());
        }
        let z = omega * dt;
        if z > EXP_UNDERFLOW {
            return Ok(());
        }
        let n_l = cascade.cached_reach(l)?;
        let term = params.delta_r(anc.tweet_type)
            * params.gamma_kk(anc.stance, k)
            * n_l
            * omega
            * (-z).exp();
        if term > 0.0 {
            terms.push((l as u32, term));
        }
        Ok(())
    };
    match ancestors.map(|a| &a[j]) {
        Some(AncestorSet::Chain(chain)) => {
            for &l in chain {
                if l < j {
                    push_term(l)?;
                }
            }
        }
        _ => {
            // Full history: walk backwards, stop once the kernel underflows.
            for l in (0..j).rev() {
                if omega * (ev.time - events[l].time) > EXP_UNDERFLOW {
                    break;
                }
                push_term(l)?;
            }
            terms.reverse();
        }
    }
    let denom = immigrant + terms.iter().map(|&(_, t)| t).sum::<f64>();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(HawkesError::DegenerateResponsibility(ev.id.clone()));
    }
    for t in &mut terms {
        t.1 /= denom;
    }
    Ok(EventResponsibility {
        immigrant: immigrant / denom,
        ancestors: terms,
    })
}

/// E-step over the full history (all l < j admissible).
pub fn e_step(params: &ModelParams, cascade: &Cascade) -> Result<Responsibilities> {
    e_step_with(params, cascade, None)
}

/// E-step with an optional admissible-ancestor restriction. Rows are
/// independent and computed in parallel.
pub fn e_step_with(
    params: &ModelParams,
    cascade: &Cascade,
    ancestors: Option<&[AncestorSet]>,
) -> Result<Responsibilities> {
    params.validate()?;
    let rows: Result<Vec<EventResponsibility>> = (0..cascade.len())
        .into_par_iter()
        .map(|j| responsibility_row(params, cascade, j, ancestors))
        .collect();
    Ok(Responsibilities { rows: rows? })
}

/// Weighted truncated-exponential MLE for the immigrant scale x: the unique
/// root of the score, i.e. the x whose truncated-exponential mean equals the
/// p_jj-weighted mean arrival time. Requires that mean to lie below T/2.
pub fn solve_x(resp: &Responsibilities, cascade: &Cascade, horizon_t: f64, tol: f64) -> Result<f64> {
    let mut weight = 0.0;
    let mut weighted_time = 0.0;
    for (row, ev) in resp.rows.iter().zip(cascade.events()) {
        weight += row.immigrant;
        weighted_time += row.immigrant * ev.time;
    }
    if !(weight > 0.0) {
        return Err(HawkesError::EmAborted(
            "no immigrant attribution mass; cannot update x".into(),
        ));
    }
    let mean = weighted_time / weight;
    let half_t = 0.5 * horizon_t;
    if mean >= half_t {
        return Err(HawkesError::ScaleNotBracketable { mean, half_t });
    }
    let mut lo = 1e-12 * horizon_t;
    if mean <= lo {
        return Ok(lo);
    }
    let mut hi = horizon_t;
    while trunc_exp_mean(hi, horizon_t) < mean {
        hi *= 2.0;
        if hi > 1e9 * horizon_t {
            return Err(HawkesError::ScaleNotBracketable { mean, half_t });
        }
    }
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if trunc_exp_mean(mid, horizon_t) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected complete-data log-likelihood (up to the resp-entropy constant and
/// the constant C). The immigrant penalty is mu_k * T, and gamma log-terms
/// cover non-retweet attributions only (retweets copy the parent stance), so
/// the value is exactly stationary at the closed-form M-step output.
pub fn q_value(params: &ModelParams, resp: &Responsibilities, cascade: &Cascade) -> Result<f64> {
    q_value_with(params, resp, cascade, false)
}

/// Shannon entropy of the attribution distributions, -sum p log p over every
/// row. Added to [`q_value`] it gives the Jensen lower bound the EM ascends.
pub fn responsibility_entropy(resp: &Responsibilities) -> f64 {
    let mut h = 0.0;
    for row in &resp.rows {
        if row.immigrant > 0.0 {
            h -= row.immigrant * row.immigrant.ln();
        }
        for &(_, p) in &row.ancestors {
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
    }
    h
}

pub fn q_value_with(
    params: &ModelParams,
    resp: &Responsibilities,
    cascade: &Cascade,
    exact_compensator: bool,
) -> Result<f64> {
    let events = cascade.events();
    let mut q = 0.0;
    for (j, row) in resp.rows.iter().enumerate() {
        let ev = &events[j];
        let k = ev.stance;
        if row.immigrant > 0.0 {
            let imm = params.mu_k(k)
                * params.horizon_t
                * trunc_exp_pdf(ev.time, params.x_scale, params.horizon_t);
            q += row.immigrant * imm.ln();
        }
        let omega = params.omega_k(k);
        // Retweets copy their parent's stance, so their complete-data term
        // carries no gamma factor; every other child type samples a stance.
        let gamma_applies = ev.tweet_type != TweetType::Retweet;
        for &(l, p) in &row.ancestors {
            if p <= 0.0 {
                continue;
            }
            let anc = &events[l as usize];
            let dt = ev.time - anc.time;
            let mut base =
                params.delta_r(anc.tweet_type) * cascade.cached_reach(l as usize)? * omega;
            if gamma_applies {
                base *= params.gamma_kk(anc.stance, k);
            }
            q += p * (base.ln() - omega * dt);
        }
    }
    for k in Stance::ALL {
        q -= params.mu_k(k) * params.horizon_t;
    }
    for (j, ev) in events.iter().enumerate() {
        let n_j = cascade.cached_reach(j)?;
        let d = params.delta_r(ev.tweet_type);
        if exact_compensator {
            for k in Stance::ALL {
                let z = params.omega_k(k) * (params.horizon_t - ev.time);
                let mass = if z > EXP_UNDERFLOW { 1.0 } else { -(-z).exp_m1() };
                q -= d * params.gamma_kk(ev.stance, k) * n_j * mass;
            }
        } else {
            // gamma rows sum to 1, so the stance sum collapses.
            q -= d * n_j;
        }
    }
    Ok(q)
}

struct MStepSums {
    /// Immigrant mass per stance of the event.
    pjj_by_stance: [f64; 2],
    /// Descendant mass and lag-weighted mass per stance of the child.
    attribution: [f64; 2],
    lag_weighted: [f64; 2],
    /// gamma numerators restricted to quote/reply children:
    /// [ancestor stance][child stance].
    gamma_num: [[f64; 2]; 2],
    /// Attribution mass to ancestors of each tweet type.
    delta_num: [f64; 4],
    /// Total reach of events of each tweet type.
    delta_den: [f64; 4],
}

fn accumulate(resp: &Responsibilities, cascade: &Cascade) -> Result<MStepSums> {
    let events = cascade.events();
    let mut sums = MStepSums {
        pjj_by_stance: [0.0; 2],
        attribution: [0.0; 2],
        lag_weighted: [0.0; 2],
        gamma_num: [[0.0; 2]; 2],
        delta_num: [0.0; 4],
        delta_den: [0.0; 4],
    };
    for (j, row) in resp.rows.iter().enumerate() {
        let ev = &events[j];
        let k = ev.stance.idx();
        sums.pjj_by_stance[k] += row.immigrant;
        let gamma_applies = ev.tweet_type != TweetType::Retweet;
        for &(l, p) in &row.ancestors {
            let anc = &events[l as usize];
            sums.attribution[k] += p;
            sums.lag_weighted[k] += p * (ev.time - anc.time);
            sums.delta_num[anc.tweet_type.idx()] += p;
            if gamma_applies {
                sums.gamma_num[anc.stance.idx()][k] += p;
            }
        }
    }
    for (j, ev) in events.iter().enumerate() {
        sums.delta_den[ev.tweet_type.idx()] += cascade.cached_reach(j)?;
    }
    Ok(sums)
}

fn exact_omega_fixed_point(
    k: Stance,
    simplified: f64,
    sums: &MStepSums,
    gamma: &[[f64; 2]; 2],
    delta: &[f64; 4],
    cascade: &Cascade,
) -> Result<f64> {
    let ki = k.idx();
    let numerator = sums.attribution[ki];
    let lag = sums.lag_weighted[ki];
    let mut omega = simplified;
    for _ in 0..100 {
        let mut tail = 0.0;
        for (j, ev) in cascade.events().iter().enumerate() {
            let dt = cascade.horizon_t() - ev.time;
            let z = omega * dt;
            if z > EXP_UNDERFLOW {
                continue;
            }
            tail += delta[ev.tweet_type.idx()]
                * gamma[ev.stance.idx()][ki]
                * cascade.cached_reach(j)?
                * dt
                * (-z).exp();
        }
        let next = numerator / (lag + tail);
        if (next - omega).abs() <= 1e-12 * omega.max(1.0) {
            return Ok(next);
        }
        omega = next;
    }
    Ok(omega)
}

/// Closed-form M-step. Families with no attribution mass keep their previous
/// value and are reported in the returned warning list.
pub fn m_step(
    resp: &Responsibilities,
    cascade: &Cascade,
    prev: &ModelParams,
    config: &EmConfig,
) -> Result<(ModelParams, Vec<String>)> {
    let sums = accumulate(resp, cascade)?;
    let mut warnings = Vec::new();
    let mut params = prev.clone();
    let horizon_t = prev.horizon_t;

    for k in Stance::ALL {
        let mass = sums.pjj_by_stance[k.idx()];
        if mass > 0.0 {
            params.mu[k.idx()] = mass / horizon_t;
        } else {
            warnings.push(format!("mu_{}: no immigrant mass, retained", k.label()));
        }
    }

    for parent in Stance::ALL {
        let row = &sums.gamma_num[parent.idx()];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for k in Stance::ALL {
                params.gamma[parent.idx()][k.idx()] = row[k.idx()] / total;
            }
        } else {
            warnings.push(format!(
                "gamma row {}: no quote/reply attribution mass, retained",
                parent.label()
            ));
        }
    }

    for k in Stance::ALL {
        let ki = k.idx();
        if sums.attribution[ki] > 0.0 && sums.lag_weighted[ki] > 0.0 {
            let simplified = sums.attribution[ki] / sums.lag_weighted[ki];
            params.omega[ki] = if config.exact_omega {
                exact_omega_fixed_point(k, simplified, &sums, &params.gamma, &prev.delta, cascade)?
            } else {
                simplified
            };
        } else {
            warnings.push(format!("omega_{}: no descendant mass, retained", k.label()));
        }
    }

    for r in TweetType::ALL {
        let ri = r.idx();
        if sums.delta_den[ri] > 0.0 {
            params.delta[ri] = sums.delta_num[ri] / sums.delta_den[ri];
        } else {
            warnings.push(format!("delta_{}: no reach mass, retained", r.label()));
        }
    }

    let total_pjj: f64 = sums.pjj_by_stance.iter().sum();
    if total_pjj > 0.0 {
        params.x_scale = solve_x(resp, cascade, horizon_t, config.x_solver_tol)?;
    } else {
        warnings.push("x: no immigrant mass, retained".into());
    }

    // p_type is the empirical descendant type distribution; it only feeds the
    // simulator and cancels in the intensity.
    let counts = cascade.counts();
    let descendants: usize = TweetType::DESCENDANT
        .iter()
        .map(|&r| Stance::ALL.iter().map(|&k| counts.get(k, r)).sum::<usize>())
        .sum();
    if descendants > 0 {
        params.p_type = [0.0; 4];
        for r in TweetType::DESCENDANT {
            let c: usize = Stance::ALL.iter().map(|&k| counts.get(k, r)).sum();
            params.p_type[r.idx()] = c as f64 / descendants as f64;
        }
    } else {
        warnings.push("p_type: no descendants, retained".into());
    }

    Ok((params, warnings))
}

/// Moment-style initialization from the cascade itself.
pub fn param_init(cascade: &Cascade, horizon_t: f64) -> Result<ModelParams> {
    if cascade.is_empty() {
        return Err(HawkesError::InvalidCascade(
            "cannot initialize parameters from an empty cascade".into(),
        ));
    }
    let events = cascade.events();
    let counts = cascade.counts();
    let mut mu = [0.0; 2];
    for k in Stance::ALL {
        let originals = counts.get(k, TweetType::Original);
        // Keep the rate strictly positive even with no observed originals.
        mu[k.idx()] = (originals as f64).max(0.5) / horizon_t;
    }
    let original_times: Vec<f64> = events
        .iter()
        .filter(|e| e.tweet_type == TweetType::Original)
        .map(|e| e.time)
        .collect();
    let x_scale = if original_times.is_empty() {
        0.25 * horizon_t
    } else {
        let mean = original_times.iter().sum::<f64>() / original_times.len() as f64;
        mean.clamp(1e-4 * horizon_t, 0.45 * horizon_t)
    };
    let mean_reach = {
        let mut total = 0.0;
        for j in 0..cascade.len() {
            total += cascade.cached_reach(j)?;
        }
        total / cascade.len() as f64
    };
    let delta_0 = if mean_reach > 0.0 {
        1.0 / (mean_reach * cascade.len() as f64)
    } else {
        1e-3
    };
    let descendants: usize = events.iter().filter(|e| e.is_descendant()).count();
    let omega_0 = if descendants == 0 {
        1.0
    } else {
        let mut gaps: Vec<f64> = events
            .windows(2)
            .map(|w| w[1].time - w[0].time)
            .filter(|&g| g > 0.0)
            .collect();
        if gaps.is_empty() {
            1.0
        } else {
            gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
            let median = gaps[gaps.len() / 2];
            1.0 / median
        }
    };
    let mut p_type = [0.0; 4];
    if descendants > 0 {
        for r in TweetType::DESCENDANT {
            let c: usize = Stance::ALL.iter().map(|&k| counts.get(k, r)).sum();
            p_type[r.idx()] = c as f64 / descendants as f64;
        }
    } else {
        for r in TweetType::DESCENDANT {
            p_type[r.idx()] = 1.0 / 3.0;
        }
    }
    let params = ModelParams {
        mu,
        x_scale,
        delta: [delta_0; 4],
        gamma: [[0.5, 0.5], [0.5, 0.5]],
        omega: [omega_0; 2],
        p_type,
        beta_follow: BETA_FOLLOW,
        beta_reply_view: BETA_REPLY_VIEW,
        horizon_t,
    };
    params.validate()?;
    Ok(params)
}

/// Full EM loop: alternate E and M steps until the Q difference falls below
/// epsilon or the iteration cap.
pub fn fit(
    cascade: &Cascade,
    graph: Option<&FollowerGraph>,
    config: &EmConfig,
) -> Result<FitReport> {
    if cascade.is_empty() {
        return Err(HawkesError::InvalidCascade("cannot fit an empty cascade".into()));
    }
    let resolved;
    let cascade = if cascade.all_reaches_cached() {
        cascade
    } else {
        let mut report = io::IngestReport::default();
        resolved = io::resolve_influence(cascade, graph, None, &mut report)?;
        &resolved
    };
    let ancestor_sets = match config.history_mode {
        HistoryMode::Full => None,
        HistoryMode::NetworkRestricted => Some(cascade.ancestor_sets()),
    };
    let mut params = match &config.init {
        ParamInit::Heuristic => param_init(cascade, cascade.horizon_t())?,
        ParamInit::Fixed(p) => {
            p.validate()?;
            (**p).clone()
        }
    };
    let mut q_trace = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        let resp = e_step_with(&params, cascade, ancestor_sets.as_deref())?;
        let (next, step_warnings) = m_step(&resp, cascade, &params, config)?;
        params = next;
        for w in step_warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        let q = q_value(&params, &resp, cascade)? + responsibility_entropy(&resp);
        if !q.is_finite() {
            return Err(HawkesError::EmAborted(format!(
                "non-finite Q at iteration {iterations}"
            )));
        }
        if let Some(&prev_q) = q_trace.last() {
            q_trace.push(q);
            if (q - prev_q).abs() <= config.epsilon {
                converged = true;
                break;
            }
        } else {
            q_trace.push(q);
        }
    }
    let loglik = log_likelihood(&params, cascade)?;
    Ok(FitReport {
        params,
        q_trace,
        loglik,
        iterations,
        converged,
        warnings,
    })
}
