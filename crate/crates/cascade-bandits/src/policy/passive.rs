//! Passively adaptive baselines: statistics that age out on their own,
//! either by geometric discounting or by a sliding window, with no explicit
//! change detection.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::env::Feedback;
use crate::math;
use crate::policy::{
    observed_updates, CascadePolicy, RecommendationList, Restart,
};

/// Discounted UCB over cascade feedback: every slot multiplies all per-item
/// sums by `gamma`, so old observations fade geometrically. Index:
/// `discounted mean + 2 sqrt(xi ln(n_gamma) / count_gamma)` with `n_gamma`
/// the total discounted count over all items.
#[derive(Debug, Clone)]
pub struct CascadeDucb {
    l: usize,
    k: usize,
    gamma: f64,
    xi: f64,
    disc_count: Vec<f64>,
    disc_ones: Vec<f64>,
}

impl CascadeDucb {
    pub fn new(l: usize, k: usize, gamma: f64, xi: f64) -> Self {
        assert!(l >= 1 && k >= 1 && k <= l, "K = {k} outside 1..={l}");
        assert!(gamma > 0.0 && gamma <= 1.0, "gamma = {gamma} outside (0, 1]");
        assert!(xi > 0.0, "xi must be positive");
        Self {
            l,
            k,
            gamma,
            xi,
            disc_count: vec![0.0; l],
            disc_ones: vec![0.0; l],
        }
    }
}

impl CascadePolicy for CascadeDucb {
    fn select(&mut self, _t: u64, _rng: &mut ChaCha8Rng) -> RecommendationList {
        // The most recent update still carries weight 1, so n_gamma >= 1 and
        // the logarithm is safe whenever any item has been observed.
        let n_gamma: f64 = self.disc_count.iter().sum();
        let ln_n = if n_gamma > 0.0 { n_gamma.ln().max(0.0) } else { 0.0 };
        let items = math::top_k_by(self.l, self.k, |item| {
            let count = self.disc_count[item - 1];
            if count == 0.0 {
                f64::INFINITY
            } else {
                let mean = self.disc_ones[item - 1] / count;
                mean + 2.0 * (self.xi * ln_n / count).sqrt()
            }
        });
        RecommendationList::from_ranked(items)
    }

    fn update(&mut self, _t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart> {
        for x in &mut self.disc_count {
            *x *= self.gamma;
        }
        for x in &mut self.disc_ones {
            *x *= self.gamma;
        }
        for (item, x) in observed_updates(list, fb) {
            self.disc_count[item - 1] += 1.0;
            self.disc_ones[item - 1] += f64::from(u8::from(x));
        }
        None
    }
}

/// Sliding-window UCB over cascade feedback: only the observations from the
/// last `window` slots count. Index:
/// `window mean + sqrt(xi ln(min(t, window)) / count)`.
#[derive(Debug, Clone)]
pub struct CascadeSwUcb {
    l: usize,
    k: usize,
    window: u64,
    xi: f64,
    /// (slot, item, outcome) records still inside the window, oldest first.
    records: VecDeque<(u64, usize, bool)>,
    counts: Vec<u64>,
    ones: Vec<u64>,
}

impl CascadeSwUcb {
    pub fn new(l: usize, k: usize, window: u64, xi: f64) -> Self {
        assert!(l >= 1 && k >= 1 && k <= l, "K = {k} outside 1..={l}");
        assert!(window >= 1, "window must be at least one slot");
        assert!(xi > 0.0, "xi must be positive");
        Self {
            l,
            k,
            window,
            xi,
            records: VecDeque::new(),
            counts: vec![0; l],
            ones: vec![0; l],
        }
    }
}

impl CascadePolicy for CascadeSwUcb {
    fn select(&mut self, t: u64, _rng: &mut ChaCha8Rng) -> RecommendationList {
        let horizon = (t.min(self.window)) as f64;
        let ln_h = horizon.ln().max(0.0);
        let items = math::top_k_by(self.l, self.k, |item| {
            let n = self.counts[item - 1];
            if n == 0 {
                f64::INFINITY
            } else {
                let mean = self.ones[item - 1] as f64 / n as f64;
                mean + (self.xi * ln_h / n as f64).sqrt()
            }
        });
        RecommendationList::from_ranked(items)
    }

    fn update(&mut self, t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart> {
        for (item, x) in observed_updates(list, fb) {
            self.records.push_back((t, item, x));
            self.counts[item - 1] += 1;
            self.ones[item - 1] += u64::from(x);
        }
        // evict whole slots that fell out of the window [t - window + 1, t]
        while let Some(&(slot, item, x)) = self.records.front() {
            if slot + self.window > t {
                break;
            }
            self.records.pop_front();
            self.counts[item - 1] -= 1;
            self.ones[item - 1] -= u64::from(x);
        }
        None
    }
}
