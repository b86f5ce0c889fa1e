//! Event-log and edge-list parsing, influence resolution (reach caching with
//! the missing-network fallback), stance-assumption validation, and the flat
//! parameter file format.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::model::{Cascade, CountsTable, Event, FollowerGraph, ModelParams, Stance, TweetType};

/// One line of the JSONL event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawEventRecord {
    pub id: String,
    /// Arrival time in hours.
    pub t: f64,
    pub user: String,
    #[serde(rename = "type")]
    pub tweet_type: TweetType,
    pub stance: Stance,
    pub parent: Option<String>,
}

impl From<&Event> for RawEventRecord {
    fn from(ev: &Event) -> Self {
        RawEventRecord {
            id: ev.id.clone(),
            t: ev.time,
            user: ev.user.clone(),
            tweet_type: ev.tweet_type,
            stance: ev.stance,
            parent: ev.parent_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub events_loaded: usize,
    pub counts: CountsTable,
    /// Descendants whose parent link is absent or points outside the dataset;
    /// these fall back to all-prior-events attribution.
    pub parents_unresolved: usize,
    pub assumption2_violations_found: usize,
    pub assumption2_violations_corrected: usize,
    /// Events whose author has no follower data.
    pub users_without_network: usize,
    /// Events whose reach was filled with the median-reach fallback.
    pub reach_fallbacks_applied: usize,
}

/// Parses a JSONL event log into a sorted cascade. The horizon defaults to
/// the last event time unless overridden; an empty log requires the override.
pub fn parse_events<R: BufRead>(
    reader: R,
    horizon_override: Option<f64>,
) -> Result<(Cascade, IngestReport)> {
    let mut events = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawEventRecord =
            serde_json::from_str(&line).map_err(|e| HawkesError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        if !rec.t.is_finite() || rec.t < 0.0 {
            return Err(HawkesError::Parse {
                line: lineno + 1,
                msg: format!("time_hours must be nonnegative, got {}", rec.t),
            });
        }
        events.push(Event {
            id: rec.id,
            time: rec.t,
            user: rec.user,
            tweet_type: rec.tweet_type,
            stance: rec.stance,
            parent_id: rec.parent,
            reach: None,
        });
    }
    let horizon_t = match horizon_override {
        Some(t) => t,
        None => events
            .iter()
            .map(|e| e.time)
            .fold(f64::NEG_INFINITY, f64::max),
    };
    if !horizon_t.is_finite() || horizon_t <= 0.0 {
        return Err(HawkesError::InvalidCascade(
            "empty or degenerate event log: an explicit horizon T override is required".into(),
        ));
    }
    let cascade = Cascade::new(events, horizon_t)?;
    // Parent links must point strictly backwards in time.
    for ev in cascade.events() {
        if let Some(pid) = &ev.parent_id {
            if let Some(pi) = cascade.index_of(pid) {
                let pt = cascade.events()[pi].time;
                if pt >= ev.time {
                    return Err(HawkesError::InvalidCascade(format!(
                        "parent {pid} (t={pt}) not strictly earlier than child {} (t={})",
                        ev.id, ev.time
                    )));
                }
            }
        }
    }
    let mut report = IngestReport {
        events_loaded: cascade.len(),
        counts: cascade.counts(),
        ..IngestReport::default()
    };
    for ev in cascade.events() {
        if ev.is_descendant()
            && ev
                .parent_id
                .as_deref()
                .and_then(|p| cascade.index_of(p))
                .is_none()
        {
            report.parents_unresolved += 1;
        }
    }
    Ok((cascade, report))
}

/// Writes the canonical JSONL form (one object per line, LF endings).
pub fn write_events<W: Write>(cascade: &Cascade, mut writer: W) -> Result<()> {
    for ev in cascade.events() {
        let rec = RawEventRecord::from(ev);
        serde_json::to_writer(&mut writer, &rec)
            .map_err(|e| HawkesError::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edges_loaded: usize,
    pub self_loops_rejected: usize,
    pub duplicates_ignored: usize,
}

/// Parses a `follower,followee` CSV edge list. A `follower,followee` header
/// line is optional; duplicate edges collapse, self-loops are rejected with a
/// warning count.
pub fn parse_edges<R: BufRead>(reader: R) -> Result<(FollowerGraph, EdgeReport)> {
    let mut report = EdgeReport::default();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 0 && trimmed.eq_ignore_ascii_case("follower,followee") {
            continue;
        }
        let mut parts = trimmed.splitn(2, ',');
        let follower = parts.next().unwrap_or("").trim();
        let followee = parts.next().unwrap_or("").trim();
        if follower.is_empty() || followee.is_empty() {
            return Err(HawkesError::Parse {
                line: lineno + 1,
                msg: format!("expected `follower,followee`, got {trimmed:?}"),
            });
        }
        if follower == followee {
            report.self_loops_rejected += 1;
            continue;
        }
        let key = (follower.to_string(), followee.to_string());
        if seen.insert(key.clone()) {
            edges.push(key);
        } else {
            report.duplicates_ignored += 1;
        }
    }
    report.edges_loaded = edges.len();
    let graph = FollowerGraph::from_edges(edges, None)?;
    Ok((graph, report))
}

/// Caches n_j for every event. Authors without follower data get the median
/// reach of resolved events (or `fallback_override`); with no network data at
/// all, a unit reach keeps estimation runnable and is reported as a fallback.
pub fn resolve_influence(
    cascade: &Cascade,
    graph: Option<&FollowerGraph>,
    fallback_override: Option<f64>,
    report: &mut IngestReport,
) -> Result<Cascade> {
    let events = cascade.events();
    let parent_author = |ev: &Event| -> Option<String> {
        ev.parent_id
            .as_deref()
            .and_then(|p| cascade.index_of(p))
            .map(|pi| events[pi].user.clone())
    };
    let mut reaches: Vec<Option<f64>> = vec![None; events.len()];
    if let Some(g) = graph {
        for (j, ev) in events.iter().enumerate() {
            if !g.contains_user(&ev.user) {
                continue;
            }
            // A reply whose parent author lacks network data keeps the
            // follower tier only.
            let pa = parent_author(ev).filter(|p| g.contains_user(p));
            reaches[j] = Some(g.event_reach(ev, pa.as_deref())?);
        }
    }
    let mut known: Vec<f64> = reaches.iter().flatten().copied().collect();
    let fallback = fallback_override.unwrap_or_else(|| {
        if known.is_empty() {
            1.0
        } else {
            known.sort_by(|a, b| a.partial_cmp(b).expect("finite reach"));
            let mid = known.len() / 2;
            if known.len() % 2 == 1 {
                known[mid]
            } else {
                0.5 * (known[mid - 1] + known[mid])
            }
        }
    });
    let mut resolved = cascade.clone();
    for (j, ev) in resolved.events_mut().iter_mut().enumerate() {
        match reaches[j] {
            Some(r) => ev.reach = Some(r),
            None => {
                ev.reach = Some(fallback);
                report.users_without_network += 1;
                report.reach_fallbacks_applied += 1;
            }
        }
    }
    Ok(resolved)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionPolicy {
    Warn,
    AutoCorrect,
}

/// Flags retweets whose stance differs from their resolved parent's stance
/// (Assumption 2); retweets with unresolved parents are unverifiable and left
/// alone. `AutoCorrect` rewrites the stance to the parent's.
pub fn validate_assumptions(
    cascade: &Cascade,
    policy: AssumptionPolicy,
    report: &mut IngestReport,
) -> Result<Cascade> {
    let parent_stance: Vec<Option<Stance>> = cascade
        .events()
        .iter()
        .map(|ev| {
            ev.parent_id
                .as_deref()
                .and_then(|p| cascade.index_of(p))
                .map(|pi| cascade.events()[pi].stance)
        })
        .collect();
    let mut corrected = cascade.clone();
    for (j, ev) in corrected.events_mut().iter_mut().enumerate() {
        if ev.tweet_type != TweetType::Retweet {
            continue;
        }
        if let Some(ps) = parent_stance[j] {
            if ev.stance != ps {
                report.assumption2_violations_found += 1;
                if policy == AssumptionPolicy::AutoCorrect {
                    ev.stance = ps;
                    report.assumption2_violations_corrected += 1;
                }
            }
        }
    }
    report.counts = corrected.counts();
    Ok(corrected)
}

/// Flat parameter file keyed by the conventional parameter names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub mu_s: f64,
    pub mu_n: f64,
    pub x: f64,
    pub delta_ori: f64,
    pub delta_ret: f64,
    pub delta_quo: f64,
    pub delta_rply: f64,
    pub gamma_ss: f64,
    pub gamma_sn: f64,
    pub gamma_ns: f64,
    pub gamma_nn: f64,
    pub omega_s: f64,
    pub omega_n: f64,
    pub p_ret: f64,
    pub p_quo: f64,
    pub p_rply: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
    #[serde(rename = "U")]
    pub user_count: u64,
}

impl ParamsFile {
    pub fn from_model(params: &ModelParams, user_count: u64) -> Self {
        ParamsFile {
            mu_s: params.mu[Stance::Supporting.idx()],
            mu_n: params.mu[Stance::NotSupporting.idx()],
            x: params.x_scale,
            delta_ori: params.delta_r(TweetType::Original),
            delta_ret: params.delta_r(TweetType::Retweet),
            delta_quo: params.delta_r(TweetType::Quote),
            delta_rply: params.delta_r(TweetType::Reply),
            gamma_ss: params.gamma_kk(Stance::Supporting, Stance::Supporting),
            gamma_sn: params.gamma_kk(Stance::Supporting, Stance::NotSupporting),
            gamma_ns: params.gamma_kk(Stance::NotSupporting, Stance::Supporting),
            gamma_nn: params.gamma_kk(Stance::NotSupporting, Stance::NotSupporting),
            omega_s: params.omega[Stance::Supporting.idx()],
            omega_n: params.omega[Stance::NotSupporting.idx()],
            p_ret: params.p_r(TweetType::Retweet),
            p_quo: params.p_r(TweetType::Quote),
            p_rply: params.p_r(TweetType::Reply),
            horizon_t: params.horizon_t,
            user_count,
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        let params = ModelParams {
            mu: [self.mu_s, self.mu_n],
            x_scale: self.x,
            delta: [self.delta_ori, self.delta_ret, self.delta_quo, self.delta_rply],
            gamma: [[self.gamma_ss, self.gamma_sn], [self.gamma_ns, self.gamma_nn]],
            omega: [self.omega_s, self.omega_n],
            p_type: [0.0, self.p_ret, self.p_quo, self.p_rply],
            beta_follow: crate::model::BETA_FOLLOW,
            beta_reply_view: crate::model::BETA_REPLY_VIEW,
            horizon_t: self.horizon_t,
        };
        params.validate()?;
        Ok(params)
    }
}

pub fn read_params<R: std::io::Read>(reader: R) -> Result<ParamsFile> {
    serde_json::from_reader(reader)
        .map_err(|e| HawkesError::Parse {
            line: 0,
            msg: format!("params file: {e}"),
        })
}

pub fn write_params<W: Write>(params: &ParamsFile, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, params)
        .map_err(|e| HawkesError::Io(std::io::Error::other(e)))
}
