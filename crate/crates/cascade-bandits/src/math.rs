//! Pure numeric kernels shared by the detector, the policies, and the
//! environment: Bernoulli KL divergence, cascade reward, UCB and KL-UCB
//! indices, and the detection threshold.
//!
//! All logarithms are natural. Kernels assert their domain preconditions and
//! panic on violations; fallible validation belongs to the types that feed
//! them.

use crate::error::{Error, Result};

/// Attraction probabilities for the `L` ground items, addressed by 1-based
/// item id.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionVector(Vec<f64>);

impl AttractionVector {
    /// Wraps a probability vector. Every entry must be finite and in [0, 1].
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::validation("attraction vector must be non-empty"));
        }
        for (i, &x) in w.iter().enumerate() {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(Error::validation(format!(
                    "attraction w{} = {x} is outside [0, 1]",
                    i + 1
                )));
            }
        }
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Attraction probability of `item` (1-based id).
    pub fn get(&self, item: usize) -> f64 {
        self.0[item - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// KL divergence between Bernoulli(x) and Bernoulli(y), in nats.
///
/// Conventions: 0·ln(0/·) = 0, and the divergence is +inf when y is at a
/// boundary that x is not. Panics if either argument leaves [0, 1].
pub fn kl_bernoulli(x: f64, y: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "kl_bernoulli: x = {x} outside [0, 1]");
    assert!((0.0..=1.0).contains(&y), "kl_bernoulli: y = {y} outside [0, 1]");
    if x == y {
        return 0.0;
    }
    if y <= 0.0 || y >= 1.0 {
        return f64::INFINITY;
    }
    let head = if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let tail = if x == 1.0 {
        0.0
    } else {
        (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln()
    };
    head + tail
}

/// Probability that a user clicks at least one item of `items` when item `a`
/// attracts independently with probability `w.get(a)`:
/// `1 - prod_k (1 - w(a_k))`.
///
/// `items` must hold distinct 1-based ids within `1..=w.len()`.
pub fn expected_reward(items: &[usize], w: &AttractionVector) -> Result<f64> {
    validate_items(items, w.len())?;
    let survive: f64 = items.iter().map(|&a| 1.0 - w.get(a)).product();
    Ok(1.0 - survive)
}

/// Expected reward of the best `k`-item list under `w`: the top `k` items by
/// attraction, ties resolved toward the lower id.
pub fn optimal_expected_reward(w: &AttractionVector, k: usize) -> Result<f64> {
    if k == 0 || k > w.len() {
        return Err(Error::validation(format!(
            "list length {k} outside 1..={}",
            w.len()
        )));
    }
    let top = top_k_by(w.len(), k, |item| w.get(item));
    expected_reward(&top, w)
}

/// The `k` highest-scoring item ids out of `1..=l`, in descending score order,
/// ties resolved toward the lower id. Scores must not be NaN.
pub fn top_k_by(l: usize, k: usize, mut score: impl FnMut(usize) -> f64) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = (1..=l).map(|item| (score(item), item)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, item)| item).collect()
}

/// UCB1-style index `mean + sqrt(3 ln(elapsed) / (2 n))`, not clipped to 1.
///
/// `n` is the observation count and `elapsed` the number of slots since the
/// last restart; both must be at least 1.
pub fn ucb_index(mean: f64, n: u64, elapsed: u64) -> f64 {
    assert!(n >= 1, "ucb_index: n = 0 has no finite index");
    assert!(elapsed >= 1, "ucb_index: elapsed = {elapsed} must be >= 1");
    mean + (3.0 * (elapsed as f64).ln() / (2.0 * n as f64)).sqrt()
}

/// Exploration budget for the KL-UCB index:
/// `max(ln t + 3 ln(max(ln t, 1)), 0)`. The inner clamp keeps the iterated
/// logarithm real for small `t`; the outer one keeps the budget usable as an
/// upper-confidence radius.
pub fn klucb_exploration(elapsed: u64) -> f64 {
    assert!(elapsed >= 1, "klucb_exploration: elapsed must be >= 1");
    let lt = (elapsed as f64).ln();
    (lt + 3.0 * lt.max(1.0).ln()).max(0.0)
}

/// Largest f64 strictly below 1.0. Divergences to values above it are not
/// representable, so it acts as the right-hand wall for the KL-UCB search.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// KL-UCB index: the largest `q` in `[mean, 1]` with
/// `n * kl_bernoulli(mean, q) <= klucb_exploration(elapsed)`.
///
/// Returns exactly 1.0 when even the largest representable `q < 1` satisfies
/// the constraint. Otherwise bisects until the bracket is at most 1e-9 wide
/// and the constraint residual is small, capped at 64 iterations.
pub fn klucb_index(mean: f64, n: u64, elapsed: u64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&mean),
        "klucb_index: mean = {mean} outside [0, 1]"
    );
    assert!(n >= 1, "klucb_index: n = 0 has no finite index");
    let g = klucb_exploration(elapsed);
    if mean >= 1.0 {
        return 1.0;
    }
    if g <= 0.0 {
        return mean;
    }
    let n_f = n as f64;
    if n_f * kl_bernoulli(mean, BELOW_ONE) <= g {
        return 1.0;
    }
    let (mut lo, mut hi) = (mean, BELOW_ONE);
    // Invariant: n * kl(mean, lo) <= g < n * kl(mean, hi).
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at float resolution
        }
        if n_f * kl_bernoulli(mean, mid) <= g {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 && g - n_f * kl_bernoulli(mean, lo) <= 1e-7 {
            break;
        }
    }
    lo
}

/// Detection threshold `beta(t, delta)` for the generalized likelihood ratio
/// test over `t` samples at confidence `delta`:
/// `2 * gt(ln(3 t sqrt(t) / delta) / 2) + 6 ln(1 + ln t)` with
/// `gt(x) = x + 4 ln(1 + x + sqrt(2 x))`.
///
/// Nondecreasing in `t`, nonincreasing in `delta`.
pub fn threshold_beta(t: u64, delta: f64) -> f64 {
    assert!(t >= 1, "threshold_beta: t must be >= 1");
    assert!(
        delta > 0.0 && delta < 1.0,
        "threshold_beta: delta = {delta} outside (0, 1)"
    );
    let t = t as f64;
    let x = (3.0 * t * t.sqrt() / delta).ln() / 2.0;
    let gt = x + 4.0 * (1.0 + x + (2.0 * x).sqrt()).ln();
    2.0 * gt + 6.0 * (1.0 + t.ln()).ln()
}

fn validate_items(items: &[usize], l: usize) -> Result<()> {
    for (k, &a) in items.iter().enumerate() {
        if a == 0 || a > l {
            return Err(Error::validation(format!("item id {a} outside 1..={l}")));
        }
        if items[..k].contains(&a) {
            return Err(Error::validation(format!("duplicate item id {a} in list")));
        }
    }
    Ok(())
}
