use std::collections::HashMap;

use crate::error::{HawkesError, Result};
use crate::model::types::{Event, TweetType, BETA_FOLLOW, BETA_REPLY_VIEW};

/// Directed follow graph: edge (follower, followee) means the follower sees
/// the followee's tweets.
#[derive(Debug, Clone)]
pub struct FollowerGraph {
    user_ids: Vec<String>,
    index: HashMap<String, u32>,
    /// followers[u] = sorted, deduplicated follower indices of user u.
    followers: Vec<Vec<u32>>,
    /// Total user count U; may exceed the number of users with edges.
    user_count: usize,
}

impl FollowerGraph {
    pub fn empty() -> Self {
        FollowerGraph {
            user_ids: Vec::new(),
            index: HashMap::new(),
            followers: Vec::new(),
            user_count: 0,
        }
    }

    /// Builds a graph from (follower, followee) pairs. Self-loops must be
    /// filtered out by the caller (the parser rejects them with a warning).
    pub fn from_edges<I, S>(edges: I, user_count: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut g = FollowerGraph::empty();
        for (follower, followee) in edges {
            let (follower, followee) = (follower.as_ref(), followee.as_ref());
            if follower == followee {
                return Err(HawkesError::Graph(format!(
                    "self-loop on user {follower}"
                )));
            }
            let fi = g.intern(follower);
            let ei = g.intern(followee);
            g.followers[ei as usize].push(fi);
        }
        for list in &mut g.followers {
            list.sort_unstable();
            list.dedup();
        }
        g.user_count = match user_count {
            Some(u) if u < g.user_ids.len() => {
                return Err(HawkesError::Graph(format!(
                    "user count {u} below the {} distinct users in the edge list",
                    g.user_ids.len()
                )))
            }
            Some(u) => u,
            None => g.user_ids.len(),
        };
        Ok(g)
    }

    /// Builds a graph from per-user follower lists (indices into `user_ids`).
    pub fn from_follower_lists(user_ids: Vec<String>, mut followers: Vec<Vec<u32>>) -> Self {
        assert_eq!(user_ids.len(), followers.len());
        let index = user_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        for list in &mut followers {
            list.sort_unstable();
            list.dedup();
        }
        let user_count = user_ids.len();
        FollowerGraph {
            user_ids,
            index,
            followers,
            user_count,
        }
    }

    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.user_ids.len() as u32;
        self.user_ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        self.followers.push(Vec::new());
        i
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn known_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn contains_user(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn follower_indices(&self, user: u32) -> &[u32] {
        &self.followers[user as usize]
    }

    pub fn follower_count(&self, id: &str) -> Option<usize> {
        self.user_index(id).map(|u| self.followers[u as usize].len())
    }

    pub fn follows(&self, follower: &str, followee: &str) -> Option<bool> {
        let fi = self.user_index(follower)?;
        let ei = self.user_index(followee)?;
        Some(self.followers[ei as usize].binary_search(&fi).is_ok())
    }

    /// Mean follower count over users with network data.
    pub fn mean_follower_count(&self) -> f64 {
        if self.followers.is_empty() {
            return 0.0;
        }
        let total: usize = self.followers.iter().map(Vec::len).sum();
        total as f64 / self.followers.len() as f64
    }

    /// Audience weight beta_{i, u_j} of `observer` toward `event`: 0.95 for a
    /// follower of the author, 0.05 if the event is a reply and the observer
    /// follows the author of the replied-to tweet, 0 otherwise.
    pub fn reach_weight(
        &self,
        observer: &str,
        event: &Event,
        parent_author: Option<&str>,
    ) -> Result<f64> {
        let obs = self
            .user_index(observer)
            .ok_or_else(|| HawkesError::UnknownUser(observer.to_string()))?;
        let author = self
            .user_index(&event.user)
            .ok_or_else(|| HawkesError::UnknownUser(event.user.clone()))?;
        if self.followers[author as usize].binary_search(&obs).is_ok() {
            return Ok(BETA_FOLLOW);
        }
        if event.tweet_type == TweetType::Reply {
            if let Some(pa) = parent_author {
                let pa = self
                    .user_index(pa)
                    .ok_or_else(|| HawkesError::UnknownUser(pa.to_string()))?;
                if self.followers[pa as usize].binary_search(&obs).is_ok() {
                    return Ok(BETA_REPLY_VIEW);
                }
            }
        }
        Ok(0.0)
    }

    /// Audience mass n_j = sum_i beta_{i, u_j}: 0.95 per follower of the
    /// author plus, for replies, 0.05 per follower of the parent's author.
    pub fn event_reach(&self, event: &Event, parent_author: Option<&str>) -> Result<f64> {
        let author_followers = self
            .follower_count(&event.user)
            .ok_or_else(|| HawkesError::UnknownUser(event.user.clone()))?;
        let mut reach = BETA_FOLLOW * author_followers as f64;
        if event.tweet_type == TweetType::Reply {
            if let Some(pa) = parent_author {
                let pa_followers = self
                    .follower_count(pa)
                    .ok_or_else(|| HawkesError::UnknownUser(pa.to_string()))?;
                reach += BETA_REPLY_VIEW * pa_followers as f64;
            }
        }
        Ok(reach)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::Stance;

    fn event(user: &str, tweet_type: TweetType) -> Event {
        Event {
            id: "e1".into(),
            time: 1.0,
            user: user.into(),
            tweet_type,
            stance: Stance::Supporting,
            parent_id: None,
            reach: None,
        }
    }

    fn toy_graph() -> FollowerGraph {
        // b and c follow a; a follows b.
        FollowerGraph::from_edges(
            vec![("b", "a"), ("c", "a"), ("a", "b")],
            None,
        )
        .unwrap()
    }

    #[test]
    fn reach_weight_follower() {
        let g = toy_graph();
        let ev = event("a", TweetType::Original);
        assert_eq!(g.reach_weight("b", &ev, None).unwrap(), 0.95);
    }

    #[test]
    fn reach_weight_non_follower_non_reply() {
        let g = toy_graph();
        let ev = event("b", TweetType::Original);
        assert_eq!(g.reach_weight("c", &ev, None).unwrap(), 0.0);
    }

    #[test]
    fn reach_weight_reply_viewer() {
        let g = toy_graph();
        // c does not follow b, but follows the parent author a.
        let ev = event("b", TweetType::Reply);
        assert_eq!(g.reach_weight("c", &ev, Some("a")).unwrap(), 0.05);
    }

    #[test]
    fn reach_weight_unknown_user_errors() {
        let g = toy_graph();
        let ev = event("a", TweetType::Original);
        assert!(g.reach_weight("nobody", &ev, None).is_err());
    }

    #[test]
    fn event_reach_sums_weights() {
        let g = toy_graph();
        let ev = event("a", TweetType::Original);
        // a has followers {b, c}.
        assert_eq!(g.event_reach(&ev, None).unwrap(), 0.95 * 2.0);
        // reply by b (1 follower: a), parent author a (2 followers).
        let ev = event("b", TweetType::Reply);
        let reach = g.event_reach(&ev, Some("a")).unwrap();
        assert!((reach - (0.95 + 0.05 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn event_reach_no_followers_is_zero() {
        let g = FollowerGraph::from_edges(vec![("a", "b")], None).unwrap();
        let ev = event("a", TweetType::Original);
        assert_eq!(g.event_reach(&ev, None).unwrap(), 0.0);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(FollowerGraph::from_edges(vec![("a", "a")], None).is_err());
    }

    #[test]
    fn user_count_override_checked() {
        assert!(FollowerGraph::from_edges(vec![("a", "b")], Some(1)).is_err());
        let g = FollowerGraph::from_edges(vec![("a", "b")], Some(10)).unwrap();
        assert_eq!(g.user_count(), 10);
    }
}
