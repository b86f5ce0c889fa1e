use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// Tolerance for simplex-constrained parameter rows (gamma rows, p_type).
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Audience weight for a direct follower of an event's author.
pub const BETA_FOLLOW: f64 = 0.95;
/// Audience weight for users who can see a reply under a tweet of someone they follow.
pub const BETA_REPLY_VIEW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetType {
    Original,
    Retweet,
    Quote,
    Reply,
}

impl TweetType {
    pub const ALL: [TweetType; 4] = [
        TweetType::Original,
        TweetType::Retweet,
        TweetType::Quote,
        TweetType::Reply,
    ];

    /// Descendant types: everything except originals.
    pub const DESCENDANT: [TweetType; 3] = [TweetType::Retweet, TweetType::Quote, TweetType::Reply];

    #[inline]
    pub fn idx(self) -> usize {
        match self {
            TweetType::Original => 0,
            TweetType::Retweet => 1,
            TweetType::Quote => 2,
            TweetType::Reply => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TweetType::Original => "original",
            TweetType::Retweet => "retweet",
            TweetType::Quote => "quote",
            TweetType::Reply => "reply",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Supporting,
    NotSupporting,
}

impl Stance {
    pub const ALL: [Stance; 2] = [Stance::Supporting, Stance::NotSupporting];

    #[inline]
    pub fn idx(self) -> usize {
        match self {
            Stance::Supporting => 0,
            Stance::NotSupporting => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stance::Supporting => "supporting",
            Stance::NotSupporting => "not_supporting",
        }
    }
}

/// One tweet in a cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    /// Arrival time in hours, within [0, T].
    pub time: f64,
    pub user: String,
    pub tweet_type: TweetType,
    pub stance: Stance,
    /// Id of the triggering event, if known. Descendants with unresolved
    /// parents are allowed; they fall back to all-prior attribution.
    pub parent_id: Option<String>,
    /// Cached audience mass n_j, set during influence resolution.
    pub reach: Option<f64>,
}

impl Event {
    pub fn is_descendant(&self) -> bool {
        self.tweet_type != TweetType::Original
    }
}

/// Per-event admissible-ancestor set used by the network-restricted history mode.
#[derive(Debug, Clone, PartialEq)]
pub enum AncestorSet {
    /// All prior events are admissible (the fallback for unresolved parents).
    AllPrior,
    /// Indices (into the sorted cascade) of the resolved parent chain.
    Chain(Vec<usize>),
}

/// Counts by stance and tweet type, in the shape of the dataset summary table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    /// counts[stance][tweet_type]
    pub counts: [[usize; 4]; 2],
}

impl CountsTable {
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut table = CountsTable::default();
        for ev in events {
            table.counts[ev.stance.idx()][ev.tweet_type.idx()] += 1;
        }
        table
    }

    pub fn get(&self, k: Stance, r: TweetType) -> usize {
        self.counts[k.idx()][r.idx()]
    }

    pub fn stance_total(&self, k: Stance) -> usize {
        self.counts[k.idx()].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Time-ordered event log over the observation window [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    events: Vec<Event>,
    horizon_t: f64,
}

impl Cascade {
    /// Builds a cascade, sorting events by time (ties broken by id) and
    /// validating times and id uniqueness.
    pub fn new(mut events: Vec<Event>, horizon_t: f64) -> Result<Self> {
        if !(horizon_t > 0.0) {
            return Err(HawkesError::InvalidCascade(format!(
                "horizon T must be positive, got {horizon_t}"
            )));
        }
        for ev in &events {
            if !ev.time.is_finite() || ev.time < 0.0 || ev.time > horizon_t {
                return Err(HawkesError::InvalidCascade(format!(
                    "event {} has time {} outside [0, {horizon_t}]",
                    ev.id, ev.time
                )));
            }
        }
        events.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .expect("finite times")
                .then_with(|| a.id.cmp(&b.id))
        });
        let mut seen = std::collections::HashSet::new();
        for ev in &events {
            if !seen.insert(ev.id.as_str()) {
                return Err(HawkesError::InvalidCascade(format!(
                    "duplicate event id {}",
                    ev.id
                )));
            }
        }
        // ids are borrowed from `events`; drop the borrow before moving.
        drop(seen);
        Ok(Cascade { events, horizon_t })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn horizon_t(&self) -> f64 {
        self.horizon_t
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.events.iter().position(|e| e.id == id)
    }

    /// Cached reach of event `j`, or an error if influence was never resolved.
    pub fn cached_reach(&self, j: usize) -> Result<f64> {
        self.events[j]
            .reach
            .ok_or_else(|| HawkesError::ReachNotCached(self.events[j].id.clone()))
    }

    pub fn all_reaches_cached(&self) -> bool {
        self.events.iter().all(|e| e.reach.is_some())
    }

    /// Mutable access used by influence resolution.
    pub(crate) fn events_mut(&mut self) -> &mut [Event] {
        &mut self.events
    }

    pub fn counts(&self) -> CountsTable {
        CountsTable::from_events(&self.events)
    }

    /// Admissible-ancestor set per event: the resolved parent chain when the
    /// parent link is present and resolvable in this cascade, otherwise all
    /// prior events.
    pub fn ancestor_sets(&self) -> Vec<AncestorSet> {
        let by_id: std::collections::HashMap<&str, usize> = self
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();
        self.events
            .iter()
            .map(|ev| match ev.parent_id.as_deref().and_then(|p| by_id.get(p)) {
                Some(&parent_idx) => {
                    let mut chain = vec![parent_idx];
                    let mut cur = parent_idx;
                    while let Some(&next) = self.events[cur]
                        .parent_id
                        .as_deref()
                        .and_then(|p| by_id.get(p))
                    {
                        chain.push(next);
                        cur = next;
                    }
                    AncestorSet::Chain(chain)
                }
                None => AncestorSet::AllPrior,
            })
            .collect()
    }
}

/// Full parameter vector of the marked Hawkes model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Base immigrant rate per stance (events per hour).
    pub mu: [f64; 2],
    /// Scale of the truncated-exponential immigrant arrival profile (hours).
    pub x_scale: f64,
    /// Tweet-type influence factor per type (per unit reach).
    pub delta: [f64; 4],
    /// Row-stochastic stance influence matrix: gamma[parent stance][child stance].
    pub gamma: [[f64; 2]; 2],
    /// Exponential kernel decay per stance (1/hours).
    pub omega: [f64; 2],
    /// Descendant tweet-type distribution; p_type[Original] must be 0.
    pub p_type: [f64; 4],
    /// Audience weight for followers (fixed model constant).
    pub beta_follow: f64,
    /// Audience weight for reply viewers (fixed model constant).
    pub beta_reply_view: f64,
    /// Observation window length in hours.
    pub horizon_t: f64,
}

impl ModelParams {
    pub fn mu_k(&self, k: Stance) -> f64 {
        self.mu[k.idx()]
    }

    pub fn delta_r(&self, r: TweetType) -> f64 {
        self.delta[r.idx()]
    }

    pub fn gamma_kk(&self, parent: Stance, child: Stance) -> f64 {
        self.gamma[parent.idx()][child.idx()]
    }

    pub fn omega_k(&self, k: Stance) -> f64 {
        self.omega[k.idx()]
    }

    pub fn p_r(&self, r: TweetType) -> f64 {
        self.p_type[r.idx()]
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(HawkesError::InvalidParams(format!(
                    "{name} must be strictly positive, got {v}"
                )))
            }
        };
        for k in Stance::ALL {
            pos(&format!("mu_{}", k.label()), self.mu_k(k))?;
            pos(&format!("omega_{}", k.label()), self.omega_k(k))?;
        }
        pos("x", self.x_scale)?;
        pos("T", self.horizon_t)?;
        for r in TweetType::ALL {
            let d = self.delta_r(r);
            if !d.is_finite() || d < 0.0 {
                return Err(HawkesError::InvalidParams(format!(
                    "delta_{} must be nonnegative, got {d}",
                    r.label()
                )));
            }
        }
        for row in &self.gamma {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL || row.iter().any(|&g| !(0.0..=1.0).contains(&g)) {
                return Err(HawkesError::InvalidParams(format!(
                    "gamma rows must be probability vectors, got {row:?}"
                )));
            }
        }
        if self.p_type[TweetType::Original.idx()] != 0.0 {
            return Err(HawkesError::InvalidParams(
                "p_ori must be exactly 0".to_string(),
            ));
        }
        let psum: f64 = self.p_type.iter().sum();
        if (psum - 1.0).abs() > SIMPLEX_TOL
            || self.p_type.iter().any(|&p| !(0.0..=1.0).contains(&p))
        {
            return Err(HawkesError::InvalidParams(format!(
                "p_type must sum to 1, got {:?}",
                self.p_type
            )));
        }
        Ok(())
    }
}

/// Per-stance decomposition of the total intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityBreakdown {
    /// Immigrant term per stance.
    pub immigrant: [f64; 2],
    /// Excitation term per stance.
    pub excitation: [f64; 2],
    pub total: f64,
}

impl IntensityBreakdown {
    pub fn stance_total(&self, k: Stance) -> f64 {
        self.immigrant[k.idx()] + self.excitation[k.idx()]
    }
}
