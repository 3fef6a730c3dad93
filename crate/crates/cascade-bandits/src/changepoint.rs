//! Sequential change-point detection on Bernoulli streams via a generalized
//! likelihood ratio test: split the observations seen so far at every
//! candidate point, score each split by the likelihood gain over the pooled
//! fit, and report a change when the best split clears `threshold_beta`.

use crate::math::{kl_bernoulli, threshold_beta};

/// A 0/1 observation stream stored as a prefix-sum of ones, so any contiguous
/// segment mean is O(1).
///
/// Invariant: `prefix[0] = 0`, `prefix` is nondecreasing, and consecutive
/// entries differ by at most 1.
#[derive(Debug, Clone, Default)]
pub struct ObservationBuffer {
    prefix: Vec<u32>,
}

impl ObservationBuffer {
    pub fn new() -> Self {
        Self { prefix: vec![0] }
    }

    /// Number of observations held.
    pub fn n(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    /// Total number of ones.
    pub fn ones(&self) -> u32 {
        *self.prefix.last().unwrap()
    }

    /// Ones among the first `s` observations.
    pub fn ones_in_first(&self, s: usize) -> u32 {
        self.prefix[s]
    }

    pub fn push(&mut self, x: bool) {
        let total = self.ones() + u32::from(x);
        self.prefix.push(total);
    }

    /// Mean of all observations. Panics when empty.
    pub fn mean(&self) -> f64 {
        assert!(self.n() > 0, "mean of an empty buffer");
        f64::from(self.ones()) / self.n() as f64
    }

    /// Drop all observations, keeping the allocation.
    pub fn clear(&mut self) {
        self.prefix.truncate(1);
    }
}

impl FromIterator<bool> for ObservationBuffer {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut buf = Self::new();
        for x in iter {
            buf.push(x);
        }
        buf
    }
}

/// Best split score over the buffer: the supremum over split points `s` on
/// the grid `{1, 1+stride, ...} ∩ [1, n-1]` of
/// `s * kl(mean(1..=s), mean(all)) + (n-s) * kl(mean(s+1..=n), mean(all))`.
///
/// Returns 0 when fewer than two observations are held or all observations
/// are identical.
pub fn glr_statistic(buffer: &ObservationBuffer, stride: usize) -> f64 {
    assert!(stride >= 1, "glr_statistic: stride must be >= 1");
    let n = buffer.n();
    if n < 2 {
        return 0.0;
    }
    let ones = buffer.ones();
    if ones == 0 || ones as usize == n {
        return 0.0;
    }
    let total = f64::from(ones);
    let mu_all = total / n as f64;
    let mut best = 0.0;
    let mut s = 1;
    while s <= n - 1 {
        let head_ones = f64::from(buffer.ones_in_first(s));
        let head_len = s as f64;
        let tail_len = (n - s) as f64;
        let mu_head = head_ones / head_len;
        let mu_tail = (total - head_ones) / tail_len;
        let score = head_len * kl_bernoulli(mu_head, mu_all) + tail_len * kl_bernoulli(mu_tail, mu_all);
        if score > best {
            best = score;
        }
        s += stride;
    }
    best
}

/// Whether the buffer's best split clears `threshold_beta(n, delta)`.
pub fn glrt_detect(buffer: &ObservationBuffer, delta: f64, stride: usize) -> bool {
    let n = buffer.n();
    n >= 2 && glr_statistic(buffer, stride) >= threshold_beta(n as u64, delta)
}

/// Pooled log-likelihood deficit `n * H(mean)` in nats, where `H` is the
/// Bernoulli entropy. Zero for pure or empty buffers.
fn pooled_entropy(buffer: &ObservationBuffer) -> f64 {
    let n = buffer.n();
    let ones = buffer.ones();
    if n == 0 || ones == 0 || ones as usize == n {
        return 0.0;
    }
    let ones = f64::from(ones);
    let zeros = n as f64 - ones;
    let n = n as f64;
    -(ones * (ones / n).ln() + zeros * (zeros / n).ln())
}

/// Absorbs floating-point slack in the scan-skip bound so a skipped scan can
/// never hide a borderline detection.
const BOUND_MARGIN: f64 = 1e-9;

/// Streaming wrapper around `glrt_detect` whose `push` is amortized O(1) at
/// stride 1.
///
/// Between full scans it tracks the bound
/// `glr(m) <= scan_stat + m*H(mean_m) - scan_ll`, where `scan_stat` is the
/// statistic from the last full scan, `scan_ll` the pooled deficit at that
/// point, and `H` the Bernoulli entropy. The bound holds because the best
/// split log-likelihood never increases as observations arrive while the
/// pooled term only grows, so a full scan is needed only when the bound
/// reaches the threshold. Detection slots are identical to scanning on every
/// push; only the work is skipped. Strides above 1 restrict the split grid,
/// which breaks the bound, so they fall back to a full scan per check.
#[derive(Debug, Clone)]
pub struct GlrtDetector {
    buffer: ObservationBuffer,
    delta: f64,
    stride: usize,
    check_period: usize,
    scan_stat: f64,
    scan_ll: f64,
    beta_floor: f64,
}

impl GlrtDetector {
    /// `delta` is the per-detector confidence level; the detector is checked
    /// on every `check_period`-th observation.
    pub fn new(delta: f64, stride: usize, check_period: usize) -> Self {
        assert!(delta > 0.0 && delta < 1.0, "delta = {delta} outside (0, 1)");
        assert!(stride >= 1, "stride must be >= 1");
        assert!(check_period >= 1, "check_period must be >= 1");
        Self {
            buffer: ObservationBuffer::new(),
            delta,
            stride,
            check_period,
            scan_stat: 0.0,
            scan_ll: 0.0,
            beta_floor: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.buffer.n()
    }

    /// Empirical mean of the observations since the last reset. Panics when
    /// none have arrived.
    pub fn mean(&self) -> f64 {
        self.buffer.mean()
    }

    pub fn buffer(&self) -> &ObservationBuffer {
        &self.buffer
    }

    /// Appends one observation and reports whether a change is detected at
    /// this point. Non-check observations (between `check_period` multiples)
    /// never detect.
    pub fn push(&mut self, x: bool) -> bool {
        self.buffer.push(x);
        let m = self.buffer.n();
        if m < 2 || m % self.check_period != 0 {
            return false;
        }
        if self.stride > 1 {
            return glrt_detect(&self.buffer, self.delta, self.stride);
        }
        let pooled = pooled_entropy(&self.buffer);
        let bound = self.scan_stat + pooled - self.scan_ll + BOUND_MARGIN;
        if bound < self.beta_floor {
            return false;
        }
        let beta = threshold_beta(m as u64, self.delta);
        self.beta_floor = beta; // beta is nondecreasing in m
        if bound < beta {
            return false;
        }
        let stat = glr_statistic(&self.buffer, 1);
        self.scan_stat = stat;
        self.scan_ll = pooled;
        stat >= beta
    }

    /// Drops all state back to an empty stream.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.scan_stat = 0.0;
        self.scan_ll = 0.0;
        self.beta_floor = 0.0;
    }
}

/// 1-based index of the first observation at which the detector fires, if
/// any.
pub fn first_detection<I>(stream: I, delta: f64, stride: usize, check_period: usize) -> Option<usize>
where
    I: IntoIterator<Item = bool>,
{
    let mut detector = GlrtDetector::new(delta, stride, check_period);
    for (i, x) in stream.into_iter().enumerate() {
        if detector.push(x) {
            return Some(i + 1);
        }
    }
    None
}
