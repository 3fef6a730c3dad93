//! Cascading bandit policy with a per-item change-point detector and global
//! restarts.
//!
//! Each slot is either a forced-exploration slot (a deterministic sweep that
//! guarantees every item a sample once per window) or an index slot (top-K by
//! UCB or KL-UCB over the statistics gathered since the last restart). Every
//! observation also feeds the shown item's detector; the first detection
//! wipes all statistics and restarts the clock.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::changepoint::GlrtDetector;
use crate::env::Feedback;
use crate::error::{Error, Result};
use crate::policy::{
    observed_updates, ranked_by_index, CascadePolicy, IndexRule, RecommendationList, Restart,
};

#[derive(Debug, Clone)]
pub struct GlrtCascade {
    l: usize,
    k: usize,
    rule: IndexRule,
    /// Forced-exploration window length `floor(L / p)`; the first `L` slots
    /// of each window (counted from the last restart) explore one item each.
    window: u64,
    tau: u64,
    detectors: Vec<GlrtDetector>,
}

impl GlrtCascade {
    /// `p` is the exploration fraction in (0, 1]; `delta`, `stride`, and
    /// `check_period` parameterize the per-item detectors.
    pub fn new(
        l: usize,
        k: usize,
        rule: IndexRule,
        p: f64,
        delta: f64,
        stride: usize,
        check_period: usize,
    ) -> Result<Self> {
        if l == 0 || k == 0 || k > l {
            return Err(Error::validation(format!("K = {k} outside 1..={l}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::validation(format!("p = {p} outside (0, 1]")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::validation(format!("delta = {delta} outside (0, 1)")));
        }
        if stride < 1 || check_period < 1 {
            return Err(Error::validation(
                "stride and check_period must be at least 1".to_string(),
            ));
        }
        let window = (l as f64 / p).floor() as u64;
        if window < l as u64 {
            return Err(Error::validation(format!(
                "exploration window floor(L/p) = {window} cannot cover all {l} items; lower p"
            )));
        }
        Ok(Self {
            l,
            k,
            rule,
            window,
            tau: 0,
            detectors: vec![GlrtDetector::new(delta, stride, check_period); l],
        })
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    fn explore_list(&self, first: usize, rng: &mut ChaCha8Rng) -> RecommendationList {
        let mut items = Vec::with_capacity(self.k);
        items.push(first);
        // partial Fisher-Yates over the other L - 1 items
        let mut others: Vec<usize> = (1..=self.l).filter(|&i| i != first).collect();
        for j in 0..self.k - 1 {
            let pick = rng.random_range(j..others.len());
            others.swap(j, pick);
            items.push(others[j]);
        }
        RecommendationList::from_ranked(items)
    }
}

impl CascadePolicy for GlrtCascade {
    fn select(&mut self, t: u64, rng: &mut ChaCha8Rng) -> RecommendationList {
        let a = (t - self.tau) % self.window;
        if a >= 1 && a <= self.l as u64 {
            return self.explore_list(a as usize, rng);
        }
        let elapsed = t - self.tau;
        ranked_by_index(self.l, self.k, self.rule, elapsed, |item| {
            let det = &self.detectors[item - 1];
            if det.n() == 0 {
                None
            } else {
                Some((det.mean(), det.n() as u64))
            }
        })
    }

    fn update(&mut self, t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart> {
        for (item, x) in observed_updates(list, fb) {
            if self.detectors[item - 1].push(x) {
                // Global restart: drop every buffer, including this slot's
                // earlier pushes, and discard the remaining positions.
                for det in &mut self.detectors {
                    det.reset();
                }
                self.tau = t;
                return Some(Restart { slot: t, tau: t });
            }
        }
        None
    }
}
