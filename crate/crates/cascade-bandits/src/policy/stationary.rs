//! Stationary cascading bandit baselines: top-K by UCB or KL-UCB over
//! all-time statistics, no change detection.

use rand_chacha::ChaCha8Rng;

use crate::env::Feedback;
use crate::policy::{
    observed_updates, ranked_by_index, CascadePolicy, IndexRule, RecommendationList, Restart,
};

#[derive(Debug, Clone)]
pub struct StationaryCascade {
    l: usize,
    k: usize,
    rule: IndexRule,
    tau: u64,
    counts: Vec<u64>,
    ones: Vec<u64>,
}

impl StationaryCascade {
    pub fn new(l: usize, k: usize, rule: IndexRule) -> Self {
        assert!(l >= 1 && k >= 1 && k <= l, "K = {k} outside 1..={l}");
        Self {
            l,
            k,
            rule,
            tau: 0,
            counts: vec![0; l],
            ones: vec![0; l],
        }
    }

    /// Forgets all statistics; the selection clock restarts from `tau + 1`.
    /// Used by the oracle wrapper; the plain baselines never call it.
    pub(crate) fn restart(&mut self, tau: u64) {
        self.tau = tau;
        self.counts.fill(0);
        self.ones.fill(0);
    }
}

impl CascadePolicy for StationaryCascade {
    fn select(&mut self, t: u64, _rng: &mut ChaCha8Rng) -> RecommendationList {
        let elapsed = t - self.tau;
        ranked_by_index(self.l, self.k, self.rule, elapsed, |item| {
            let n = self.counts[item - 1];
            if n == 0 {
                None
            } else {
                Some((self.ones[item - 1] as f64 / n as f64, n))
            }
        })
    }

    fn update(&mut self, _t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart> {
        for (item, x) in observed_updates(list, fb) {
            self.counts[item - 1] += 1;
            self.ones[item - 1] += u64::from(x);
        }
        None
    }
}
