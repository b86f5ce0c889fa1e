//! Synthetic cascade generation from known parameters over a follower graph.
//!
//! Cascades are sampled by cluster (branching) expansion: immigrant counts are
//! Poisson with mean `mu_k * T` and truncated-exponential arrival times, and
//! each event independently spawns `Poisson(delta_{r_j} * n_j)` children whose
//! offsets follow the stance-specific exponential kernel. This is exact for
//! the model because the conditional intensity is a sum of per-ancestor
//! densities; the time-rescaling test in the acceptance suite checks the
//! equivalence against the intensity form.

use std::collections::VecDeque;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Pareto, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::model::{
    trunc_exp_pdf, Cascade, CountsTable, Event, FollowerGraph, ModelParams, Stance, TweetType,
    BETA_FOLLOW, BETA_REPLY_VIEW,
};

/// How simulated immigrant authors are drawn from the user universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAssignment {
    Uniform,
    FollowerProportional,
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a FollowerGraph,
    pub seed: u64,
    pub max_events: usize,
    pub user_assignment: UserAssignment,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub cascade: Cascade,
    pub counts: CountsTable,
    /// True when the event cap stopped the expansion early.
    pub truncated: bool,
}

/// Event under construction; indices refer to creation order.
#[derive(Debug, Clone)]
struct PendingEvent {
    time: f64,
    user: u32,
    tweet_type: TweetType,
    stance: Stance,
    parent: Option<usize>,
    reach: f64,
}

/// Generates a directed follower graph with heavy-tailed follower counts
/// (power-law tail exponent `exponent`, default 2.5 via [`generate_network`])
/// and the requested mean follower count.
pub fn generate_network_with_exponent(
    user_count: usize,
    mean_followers: f64,
    seed: u64,
    exponent: f64,
) -> Result<FollowerGraph> {
    if user_count < 1 {
        return Err(HawkesError::Graph("user count must be at least 1".into()));
    }
    if !(mean_followers >= 0.0) {
        return Err(HawkesError::Graph("mean followers must be nonnegative".into()));
    }
    if mean_followers >= user_count as f64 {
        return Err(HawkesError::Graph(format!(
            "mean followers {mean_followers} must be below the user count {user_count}"
        )));
    }
    if !(exponent > 1.0) {
        return Err(HawkesError::Graph("power-law exponent must exceed 1".into()));
    }
    let user_ids: Vec<String> = (0..user_count).map(|i| format!("u{i:06}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_followers = user_count - 1;
    let mut followers: Vec<Vec<u32>> = vec![Vec::new(); user_count];
    if user_count > 1 && mean_followers > 0.0 {
        // Tail exponent of the count density is `exponent`, so the Pareto
        // shape parameter is `exponent - 1`.
        let pareto = Pareto::new(1.0, exponent - 1.0)
            .map_err(|e| HawkesError::Graph(e.to_string()))?;
        let weights: Vec<f64> = (0..user_count).map(|_| pareto.sample(&mut rng)).collect();
        let weight_sum: f64 = weights.iter().sum();
        // Clamping at U-1 trims heavy-tail mass; rescale until the realized
        // mean is on target.
        let target_total = mean_followers * user_count as f64;
        let mut scale = target_total / weight_sum;
        let mut counts: Vec<usize> = Vec::new();
        for _ in 0..8 {
            counts = weights
                .iter()
                .map(|w| ((scale * w).round() as usize).min(max_followers))
                .collect();
            let realized = counts.iter().sum::<usize>() as f64;
            if realized >= 0.98 * target_total {
                break;
            }
            scale *= target_total / realized.max(1.0);
        }
        for (u, &count) in counts.iter().enumerate() {
            let picks = rand::seq::index::sample(&mut rng, max_followers, count);
            let list = &mut followers[u];
            list.reserve(count);
            for p in picks {
                // Skip the user itself in the index space.
                let follower = if p < u { p } else { p + 1 };
                list.push(follower as u32);
            }
        }
    }
    Ok(FollowerGraph::from_follower_lists(user_ids, followers))
}

/// [`generate_network_with_exponent`] with the default tail exponent 2.5.
pub fn generate_network(user_count: usize, mean_followers: f64, seed: u64) -> Result<FollowerGraph> {
    generate_network_with_exponent(user_count, mean_followers, seed, 2.5)
}

/// Mean audience mass of a non-reply event from an average author.
pub fn mean_reach(graph: &FollowerGraph) -> f64 {
    BETA_FOLLOW * graph.mean_follower_count()
}

/// Expected direct descendants of an event of type `r` whose author has the
/// given audience mass.
pub fn expected_offspring(params: &ModelParams, r: TweetType, reach: f64) -> f64 {
    params.delta_r(r) * reach
}

/// Descendant-generation branching ratio: the expected number of children of a
/// typical descendant event, averaged over the descendant type distribution
/// and the graph's mean audience mass. Values at or above 1 mean the cascade
/// does not die out.
pub fn branching_ratio(params: &ModelParams, graph: &FollowerGraph) -> f64 {
    let n_bar = mean_reach(graph);
    TweetType::DESCENDANT
        .iter()
        .map(|&r| params.p_r(r) * expected_offspring(params, r, n_bar))
        .sum()
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn truncated_exp_time(rng: &mut ChaCha8Rng, x: f64, horizon_t: f64) -> f64 {
    let u: f64 = rng.gen();
    -x * (u * (-horizon_t / x).exp_m1()).ln_1p()
}

fn immigrant_author(rng: &mut ChaCha8Rng, config: &SimConfig<'_>) -> u32 {
    let users = config.graph.known_users();
    debug_assert!(users > 0);
    match config.user_assignment {
        UserAssignment::Uniform => rng.gen_range(0..users) as u32,
        UserAssignment::FollowerProportional => {
            let weights: Vec<f64> = (0..users)
                .map(|u| config.graph.follower_indices(u as u32).len() as f64)
                .collect();
            match WeightedIndex::new(&weights) {
                Ok(dist) => dist.sample(rng) as u32,
                Err(_) => rng.gen_range(0..users) as u32, // no followers anywhere
            }
        }
    }
}

fn sample_stance(rng: &mut ChaCha8Rng, row: &[f64; 2]) -> Stance {
    if rng.gen::<f64>() < row[Stance::Supporting.idx()] {
        Stance::Supporting
    } else {
        Stance::NotSupporting
    }
}

fn sample_descendant_type(rng: &mut ChaCha8Rng, params: &ModelParams) -> TweetType {
    let u: f64 = rng.gen::<f64>()
        * TweetType::DESCENDANT
            .iter()
            .map(|&r| params.p_r(r))
            .sum::<f64>();
    let mut acc = 0.0;
    for &r in &TweetType::DESCENDANT {
        acc += params.p_r(r);
        if u < acc {
            return r;
        }
    }
    TweetType::Reply
}

/// Audience of an event: the author's followers at weight 0.95 plus, for
/// replies, the parent author's followers at weight 0.05.
struct Audience<'a> {
    followers: &'a [u32],
    reply_viewers: &'a [u32],
}

impl<'a> Audience<'a> {
    fn of(graph: &'a FollowerGraph, author: u32, is_reply: bool, parent_author: Option<u32>) -> Self {
        let followers = graph.follower_indices(author);
        let reply_viewers = match (is_reply, parent_author) {
            (true, Some(pa)) => graph.follower_indices(pa),
            _ => &[],
        };
        Audience {
            followers,
            reply_viewers,
        }
    }

    fn reach(&self) -> f64 {
        BETA_FOLLOW * self.followers.len() as f64
            + BETA_REPLY_VIEW * self.reply_viewers.len() as f64
    }

    fn sample_observer(&self, rng: &mut ChaCha8Rng) -> Option<u32> {
        let w_follow = BETA_FOLLOW * self.followers.len() as f64;
        let w_view = BETA_REPLY_VIEW * self.reply_viewers.len() as f64;
        let total = w_follow + w_view;
        if total <= 0.0 {
            return None;
        }
        let u: f64 = rng.gen::<f64>() * total;
        if u < w_follow {
            Some(self.followers[rng.gen_range(0..self.followers.len())])
        } else {
            Some(self.reply_viewers[rng.gen_range(0..self.reply_viewers.len())])
        }
    }
}

fn sample_offspring_internal(
    parent_idx: usize,
    parent: &PendingEvent,
    grandparent_author: Option<u32>,
    config: &SimConfig<'_>,
    rng: &mut ChaCha8Rng,
) -> Vec<PendingEvent> {
    let params = config.params;
    let mean = params.delta_r(parent.tweet_type) * parent.reach;
    let count = poisson_count(rng, mean);
    let audience = Audience::of(
        config.graph,
        parent.user,
        parent.tweet_type == TweetType::Reply,
        grandparent_author,
    );
    let mut children = Vec::with_capacity(count);
    for _ in 0..count {
        // Stance first (gamma row of the parent), then type; retweets inherit
        // the parent's stance, so gamma only governs quotes and replies.
        let mut stance = sample_stance(rng, &params.gamma[parent.stance.idx()]);
        let tweet_type = sample_descendant_type(rng, params);
        if tweet_type == TweetType::Retweet {
            stance = parent.stance;
        }
        let offset = Exp::new(params.omega_k(stance))
            .expect("positive omega")
            .sample(rng);
        let time = parent.time + offset;
        if time > params.horizon_t {
            continue;
        }
        let Some(user) = audience.sample_observer(rng) else {
            continue;
        };
        let child_audience = Audience::of(
            config.graph,
            user,
            tweet_type == TweetType::Reply,
            Some(parent.user),
        );
        children.push(PendingEvent {
            time,
            user,
            tweet_type,
            stance,
            parent: Some(parent_idx),
            reach: child_audience.reach(),
        });
    }
    children
}

fn sample_immigrants_internal(config: &SimConfig<'_>, rng: &mut ChaCha8Rng) -> Vec<PendingEvent> {
    let params = config.params;
    let mut immigrants = Vec::new();
    for k in Stance::ALL {
        let count = poisson_count(rng, params.mu_k(k) * params.horizon_t);
        for _ in 0..count {
            let time = truncated_exp_time(rng, params.x_scale, params.horizon_t);
            let user = immigrant_author(rng, config);
            let reach = Audience::of(config.graph, user, false, None).reach();
            immigrants.push(PendingEvent {
                time,
                user,
                tweet_type: TweetType::Original,
                stance: k,
                parent: None,
                reach,
            });
        }
    }
    immigrants.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
    immigrants
}

fn to_events(pending: &[PendingEvent], graph: &FollowerGraph) -> Vec<Event> {
    // Stable sort by time; creation order breaks exact ties deterministically.
    let mut order: Vec<usize> = (0..pending.len()).collect();
    order.sort_by(|&a, &b| {
        pending[a]
            .time
            .partial_cmp(&pending[b].time)
            .expect("finite times")
            .then(a.cmp(&b))
    });
    let mut id_of = vec![String::new(); pending.len()];
    for (pos, &i) in order.iter().enumerate() {
        id_of[i] = format!("e{pos:06}");
    }
    order
        .iter()
        .map(|&i| {
            let p = &pending[i];
            Event {
                id: id_of[i].clone(),
                time: p.time,
                user: graph.user_ids()[p.user as usize].clone(),
                tweet_type: p.tweet_type,
                stance: p.stance,
                parent_id: p.parent.map(|pi| id_of[pi].clone()),
                reach: Some(p.reach),
            }
        })
        .collect()
}

/// Draws the immigrant (original-tweet) layer: per stance, a Poisson count
/// with mean `mu_k * T` and i.i.d. truncated-exponential arrival times.
pub fn sample_immigrants(config: &SimConfig<'_>) -> Result<Vec<Event>> {
    config.params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pending = sample_immigrants_internal(config, &mut rng);
    Ok(to_events(&pending, config.graph))
}

/// Draws the direct children of one parent event. The grandparent author is
/// only consulted when the parent is a reply (its audience gains the 0.05
/// viewer tier).
pub fn sample_offspring(
    parent: &Event,
    grandparent_author: Option<&str>,
    config: &SimConfig<'_>,
    seed: u64,
) -> Result<Vec<Event>> {
    config.params.validate()?;
    let reach = parent
        .reach
        .ok_or_else(|| HawkesError::ReachNotCached(parent.id.clone()))?;
    let user = config
        .graph
        .user_index(&parent.user)
        .ok_or_else(|| HawkesError::UnknownUser(parent.user.clone()))?;
    let grandparent = match grandparent_author {
        Some(ga) => Some(
            config
                .graph
                .user_index(ga)
                .ok_or_else(|| HawkesError::UnknownUser(ga.to_string()))?,
        ),
        None => None,
    };
    let pending_parent = PendingEvent {
        time: parent.time,
        user,
        tweet_type: parent.tweet_type,
        stance: parent.stance,
        parent: None,
        reach,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let children =
        sample_offspring_internal(0, &pending_parent, grandparent, config, &mut rng);
    let mut events = to_events(&children, config.graph);
    for ev in &mut events {
        ev.parent_id = Some(parent.id.clone());
    }
    Ok(events)
}

/// Breadth-first branching expansion of immigrants through offspring sampling
/// until the horizon or the event cap. Deterministic given the seed.
pub fn simulate_cascade(config: &SimConfig<'_>) -> Result<SimReport> {
    config.params.validate()?;
    if config.max_events == 0 {
        return Err(HawkesError::Usage("max_events must be positive".into()));
    }
    if config.graph.known_users() == 0 {
        return Err(HawkesError::Graph("cannot simulate over an empty graph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pending = sample_immigrants_internal(config, &mut rng);
    let mut queue: VecDeque<usize> = (0..pending.len()).collect();
    let mut truncated = pending.len() > config.max_events;
    if truncated {
        pending.truncate(config.max_events);
        queue.truncate(config.max_events);
    }
    while let Some(i) = queue.pop_front() {
        if pending.len() >= config.max_events {
            truncated = true;
            break;
        }
        let grandparent = pending[i].parent.map(|p| pending[p].user);
        let parent = pending[i].clone();
        let mut children =
            sample_offspring_internal(i, &parent, grandparent, config, &mut rng);
        children.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
        for child in children {
            if pending.len() >= config.max_events {
                truncated = true;
                break;
            }
            pending.push(child);
            queue.push_back(pending.len() - 1);
        }
    }
    let events = to_events(&pending, config.graph);
    let counts = CountsTable::from_events(&events);
    let cascade = Cascade::new(events, config.params.horizon_t)?;
    Ok(SimReport {
        cascade,
        counts,
        truncated,
    })
}

/// Closed-form mean arrival time of the immigrant profile, exposed for
/// simulator calibration checks.
pub fn immigrant_mean_arrival(params: &ModelParams) -> f64 {
    crate::model::trunc_exp_mean(params.x_scale, params.horizon_t)
}

/// Density of the immigrant arrival profile, exposed for plotting.
pub fn immigrant_arrival_pdf(params: &ModelParams, t: f64) -> f64 {
    trunc_exp_pdf(t, params.x_scale, params.horizon_t)
}
