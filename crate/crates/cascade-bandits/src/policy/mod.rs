//! Ranked-list bandit policies over cascade feedback: change-detecting,
//! stationary, passively adaptive, and oracle-restart variants.

mod glrt;
mod oracle;
mod passive;
mod stationary;

pub use glrt::GlrtCascade;
pub use oracle::OracleRestart;
pub use passive::{CascadeDucb, CascadeSwUcb};
pub use stationary::StationaryCascade;

use rand_chacha::ChaCha8Rng;

use crate::env::Feedback;
use crate::error::{Error, Result};
use crate::math;

/// Which optimism rule turns (mean, count, elapsed) into a selection index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexRule {
    Ucb,
    KlUcb,
}

impl IndexRule {
    pub fn index(self, mean: f64, n: u64, elapsed: u64) -> f64 {
        match self {
            IndexRule::Ucb => math::ucb_index(mean, n, elapsed),
            IndexRule::KlUcb => math::klucb_index(mean, n, elapsed),
        }
    }
}

/// An ordered list of K distinct item ids (1-based), position 1 shown first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationList {
    items: Vec<usize>,
}

impl RecommendationList {
    /// Validates length, range, and distinctness against a ground set of `l`
    /// items.
    pub fn new(items: Vec<usize>, l: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::validation("recommendation list must be non-empty"));
        }
        if items.len() > l {
            return Err(Error::validation(format!(
                "list of {} items exceeds ground set of {l}",
                items.len()
            )));
        }
        for (k, &a) in items.iter().enumerate() {
            if a == 0 || a > l {
                return Err(Error::validation(format!("item id {a} outside 1..={l}")));
            }
            if items[..k].contains(&a) {
                return Err(Error::validation(format!("duplicate item id {a} in list")));
            }
        }
        Ok(Self { items })
    }

    /// Wraps items whose validity is guaranteed by construction.
    pub(crate) fn from_ranked(items: Vec<usize>) -> Self {
        debug_assert!(!items.is_empty());
        Self { items }
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A restart of a policy's statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Restart {
    /// Slot during which the reset was applied.
    pub slot: u64,
    /// The new reference slot: statistics restart from `tau + 1`. For oracle
    /// restarts this is exactly the change-point.
    pub tau: u64,
}

/// One slot of interaction: `select` a list for slot `t`, then `update` with
/// the resulting feedback. Slots are 1-based and strictly increasing.
pub trait CascadePolicy {
    fn select(&mut self, t: u64, rng: &mut ChaCha8Rng) -> RecommendationList;

    /// Consumes the slot's feedback; reports a restart when one happened.
    fn update(&mut self, t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart>;
}

/// Items and 0/1 values observed under the cascade protocol: positions up to
/// the click (the clicked one counts 1), or the whole list on no-click.
pub(crate) fn observed_updates<'a>(
    list: &'a RecommendationList,
    fb: Feedback,
) -> impl Iterator<Item = (usize, bool)> + 'a {
    let observed = fb.observed_count(list.len());
    list.items()[..observed]
        .iter()
        .enumerate()
        .map(move |(pos0, &item)| (item, fb.clicked_position == Some(pos0 + 1)))
}

/// Top-K list under an index rule: unobserved items come first (forced
/// sampling), then descending index, ties toward the lower id.
pub(crate) fn ranked_by_index(
    l: usize,
    k: usize,
    rule: IndexRule,
    elapsed: u64,
    stats: impl Fn(usize) -> Option<(f64, u64)>,
) -> RecommendationList {
    let items = math::top_k_by(l, k, |item| match stats(item) {
        None => f64::INFINITY,
        Some((mean, n)) => rule.index(mean, n, elapsed),
    });
    RecommendationList::from_ranked(items)
}
