//! Clairvoyant restart wrapper: a stationary policy whose statistics are
//! wiped at every true change-point, as an upper benchmark for the
//! change-detecting policies.

use rand_chacha::ChaCha8Rng;

use crate::env::Feedback;
use crate::policy::{CascadePolicy, RecommendationList, Restart, StationaryCascade};

#[derive(Debug, Clone)]
pub struct OracleRestart {
    base: StationaryCascade,
    /// Sorted slots after which the attraction vector changes.
    change_points: Vec<u64>,
}

impl OracleRestart {
    pub fn new(base: StationaryCascade, mut change_points: Vec<u64>) -> Self {
        change_points.sort_unstable();
        change_points.dedup();
        Self { base, change_points }
    }
}

impl CascadePolicy for OracleRestart {
    fn select(&mut self, t: u64, rng: &mut ChaCha8Rng) -> RecommendationList {
        self.base.select(t, rng)
    }

    fn update(&mut self, t: u64, list: &RecommendationList, fb: Feedback) -> Option<Restart> {
        self.base.update(t, list, fb);
        if self.change_points.binary_search(&t).is_ok() {
            // The new segment starts at t + 1; statistics restart with it.
            self.base.restart(t);
            return Some(Restart { slot: t + 1, tau: t });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::IndexRule;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_segment_is_the_base_policy() {
        let mut rng_a = ChaCha8Rng::seed_from_u64(0);
        let mut rng_b = ChaCha8Rng::seed_from_u64(0);
        let mut fb_rng = ChaCha8Rng::seed_from_u64(1);
        let mut oracle = OracleRestart::new(StationaryCascade::new(5, 2, IndexRule::Ucb), vec![]);
        let mut base = StationaryCascade::new(5, 2, IndexRule::Ucb);
        for t in 1..=150u64 {
            let a = oracle.select(t, &mut rng_a);
            let b = base.select(t, &mut rng_b);
            assert_eq!(a, b, "divergence at slot {t}");
            let fb = if fb_rng.random_bool(0.4) {
                Feedback::click_at(fb_rng.random_range(1..=2))
            } else {
                Feedback::NONE
            };
            assert!(oracle.update(t, &a, fb).is_none());
            base.update(t, &b, fb);
        }
    }

    #[test]
    fn restarts_land_exactly_on_change_points() {
        let mut oracle =
            OracleRestart::new(StationaryCascade::new(3, 1, IndexRule::Ucb), vec![40, 20]);
        let list = RecommendationList::new(vec![1], 3).unwrap();
        let mut restarts = Vec::new();
        for t in 1..=60u64 {
            if let Some(r) = oracle.update(t, &list, Feedback::NONE) {
                restarts.push(r);
            }
        }
        assert_eq!(
            restarts,
            vec![
                Restart { slot: 21, tau: 20 },
                Restart { slot: 41, tau: 40 }
            ]
        );
    }
}
