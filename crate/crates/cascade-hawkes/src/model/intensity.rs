use crate::error::{HawkesError, Result};
use crate::model::types::{Cascade, IntensityBreakdown, ModelParams, Stance};

/// Exponent beyond which exp(-z) underflows to zero; used to skip dead history.
pub(crate) const EXP_UNDERFLOW: f64 = 745.0;

/// Density of the truncated exponential arrival profile on [0, T] with scale x:
/// f(t) = (1/x) e^{-t/x} / (1 - e^{-T/x}).
pub fn trunc_exp_pdf(t: f64, x: f64, horizon_t: f64) -> f64 {
    (-t / x).exp() / (x * (-(-horizon_t / x).exp_m1()))
}

/// CDF of the truncated exponential on [0, T].
pub fn trunc_exp_cdf(t: f64, x: f64, horizon_t: f64) -> f64 {
    (-t / x).exp_m1() / (-horizon_t / x).exp_m1()
}

/// Mean of the truncated exponential on [0, T]: x - T / (e^{T/x} - 1).
pub fn trunc_exp_mean(x: f64, horizon_t: f64) -> f64 {
    let z = horizon_t / x;
    if z > EXP_UNDERFLOW {
        x
    } else {
        x - horizon_t / z.exp_m1()
    }
}

fn check_window(t: f64, horizon_t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 || t > horizon_t {
        return Err(HawkesError::TimeOutOfWindow {
            t,
            horizon: horizon_t,
        });
    }
    Ok(())
}

/// Immigrant intensity mu_k * T * f(t). The factor T makes the expected
/// immigrant count over [0, T] equal to mu_k * T, matching the Poisson
/// immigrant-count convention used throughout estimation.
pub fn immigrant_intensity(params: &ModelParams, stance: Stance, t: f64) -> Result<f64> {
    check_window(t, params.horizon_t)?;
    Ok(params.mu_k(stance) * params.horizon_t * trunc_exp_pdf(t, params.x_scale, params.horizon_t))
}

/// Excitation contribution of the event at index `j` into stance `k` at
/// elapsed time `dt > 0`: delta_{r_j} gamma_{k_j,k} n_j omega_k e^{-omega_k dt}.
#[inline]
pub(crate) fn excitation_term(
    params: &ModelParams,
    cascade: &Cascade,
    j: usize,
    k: Stance,
    dt: f64,
) -> Result<f64> {
    let ev = &cascade.events()[j];
    let omega = params.omega_k(k);
    let z = omega * dt;
    if z > EXP_UNDERFLOW {
        return Ok(0.0);
    }
    let n_j = cascade.cached_reach(j)?;
    Ok(params.delta_r(ev.tweet_type) * params.gamma_kk(ev.stance, k) * n_j * omega * (-z).exp())
}

/// Conditional intensity of stance `k` at time `t`: the immigrant term plus
/// the excitation sum over strictly earlier events.
pub fn stance_intensity(params: &ModelParams, cascade: &Cascade, k: Stance, t: f64) -> Result<f64> {
    let mut total = immigrant_intensity(params, k, t)?;
    total += stance_excitation(params, cascade, k, t)?;
    Ok(total)
}

/// Excitation part of `stance_intensity` (no immigrant term).
pub(crate) fn stance_excitation(
    params: &ModelParams,
    cascade: &Cascade,
    k: Stance,
    t: f64,
) -> Result<f64> {
    check_window(t, params.horizon_t)?;
    let events = cascade.events();
    // Events are time-sorted: walk backwards and stop once the kernel underflows.
    let omega = params.omega_k(k);
    let mut sum = 0.0;
    for j in (0..events.len()).rev() {
        let dt = t - events[j].time;
        if dt <= 0.0 {
            continue;
        }
        if omega * dt > EXP_UNDERFLOW {
            break;
        }
        sum += excitation_term(params, cascade, j, k, dt)?;
    }
    Ok(sum)
}

/// Total intensity with its per-stance immigrant/excitation breakdown.
pub fn total_intensity(
    params: &ModelParams,
    cascade: &Cascade,
    t: f64,
) -> Result<IntensityBreakdown> {
    let mut breakdown = IntensityBreakdown {
        immigrant: [0.0; 2],
        excitation: [0.0; 2],
        total: 0.0,
    };
    for k in Stance::ALL {
        let imm = immigrant_intensity(params, k, t)?;
        let exc = stance_excitation(params, cascade, k, t)?;
        breakdown.immigrant[k.idx()] = imm;
        breakdown.excitation[k.idx()] = exc;
        breakdown.total += imm + exc;
    }
    Ok(breakdown)
}

/// Compensator Lambda(t) = integral of the total intensity over [0, t], in
/// closed form from the exponential kernel antiderivative.
pub fn compensator(params: &ModelParams, cascade: &Cascade, t: f64) -> Result<f64> {
    check_window(t, params.horizon_t)?;
    let mut total = 0.0;
    for k in Stance::ALL {
        total += params.mu_k(k)
            * params.horizon_t
            * trunc_exp_cdf(t, params.x_scale, params.horizon_t);
        let omega = params.omega_k(k);
        for (j, ev) in cascade.events().iter().enumerate() {
            let dt = t - ev.time;
            if dt <= 0.0 {
                break;
            }
            let n_j = cascade.cached_reach(j)?;
            let decay_mass = if omega * dt > EXP_UNDERFLOW {
                1.0
            } else {
                -(-omega * dt).exp_m1()
            };
            total += params.delta_r(ev.tweet_type) * params.gamma_kk(ev.stance, k) * n_j * decay_mass;
        }
    }
    Ok(total)
}
