//! Piecewise-stationary cascade environments: segment specifications,
//! synthetic and adversarial constructions, CSV ingestion, click simulation,
//! and per-step regret accounting.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, AttractionVector};
use crate::policy::RecommendationList;

/// One stationary stretch of slots with a fixed attraction vector. Slot
/// bounds are 1-based and inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub start: u64,
    pub end: u64,
    pub w: AttractionVector,
}

/// A full piecewise-stationary environment over the horizon `1..=T`:
/// segments tile the horizon, consecutive segments differ in at least one
/// attraction entry, and every recommendation shows `K` of the `L` items.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    l: usize,
    k: usize,
    t: u64,
    segments: Vec<SegmentSpec>,
    /// Best achievable expected reward per segment, precomputed so per-slot
    /// regret is O(K).
    optimal_rewards: Vec<f64>,
}

impl EnvironmentSpec {
    pub fn new(k: usize, segments: Vec<SegmentSpec>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::validation("environment needs at least one segment"))?;
        let l = first.w.len();
        if first.start != 1 {
            return Err(Error::validation(format!(
                "first segment starts at {}, expected 1",
                first.start
            )));
        }
        if k == 0 || k > l {
            return Err(Error::validation(format!("K = {k} outside 1..={l}")));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.start > seg.end {
                return Err(Error::validation(format!(
                    "segment {} has start {} after end {}",
                    i + 1,
                    seg.start,
                    seg.end
                )));
            }
            if seg.w.len() != l {
                return Err(Error::validation(format!(
                    "segment {} has {} attractions, expected {l}",
                    i + 1,
                    seg.w.len()
                )));
            }
            if i > 0 {
                let prev = &segments[i - 1];
                if seg.start != prev.end + 1 {
                    return Err(Error::validation(format!(
                        "segment {} starts at {} but segment {} ends at {}",
                        i + 1,
                        seg.start,
                        i,
                        prev.end
                    )));
                }
                if seg.w == prev.w {
                    return Err(Error::validation(format!(
                        "segments {} and {} have identical attractions; merge them",
                        i,
                        i + 1
                    )));
                }
            }
        }
        let t = segments.last().unwrap().end;
        let optimal_rewards = segments
            .iter()
            .map(|seg| math::optimal_expected_reward(&seg.w, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            l,
            k,
            t,
            segments,
            optimal_rewards,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[SegmentSpec] {
        &self.segments
    }

    /// Slots after which the attraction vector changes: the ends of all
    /// segments but the last.
    pub fn change_points(&self) -> Vec<u64> {
        self.segments[..self.segments.len() - 1]
            .iter()
            .map(|seg| seg.end)
            .collect()
    }

    /// Index of the segment containing slot `t` (binary search over starts).
    pub fn segment_index_at(&self, t: u64) -> Result<usize> {
        if t < 1 || t > self.t {
            return Err(Error::validation(format!(
                "slot {t} outside horizon 1..={}",
                self.t
            )));
        }
        Ok(self.segments.partition_point(|seg| seg.start <= t) - 1)
    }

    /// Attraction vector in force at slot `t`.
    pub fn attraction_at(&self, t: u64) -> Result<&AttractionVector> {
        Ok(&self.segments[self.segment_index_at(t)?].w)
    }

    /// Gap between the best achievable expected reward at slot `t` and the
    /// list's expected reward. Clamped at zero: reordering the optimal set
    /// can leave a few ulps of rounding noise.
    pub fn step_regret(&self, t: u64, list: &RecommendationList) -> Result<f64> {
        let idx = self.segment_index_at(t)?;
        let reward = math::expected_reward(list.items(), &self.segments[idx].w)?;
        Ok((self.optimal_rewards[idx] - reward).max(0.0))
    }

    pub(crate) fn optimal_reward_in_segment(&self, idx: usize) -> f64 {
        self.optimal_rewards[idx]
    }
}

/// Outcome of presenting a list: the feedback the policy sees, whether a
/// click happened, and how many positions the user browsed.
pub type ClickOutcome = (Feedback, bool, usize);

/// What the policy observes at the end of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feedback {
    /// Position (1-based) of the click, absent when the user browsed the
    /// whole list without clicking.
    pub clicked_position: Option<usize>,
}

impl Feedback {
    pub const NONE: Feedback = Feedback {
        clicked_position: None,
    };

    pub fn click_at(position: usize) -> Feedback {
        Feedback {
            clicked_position: Some(position),
        }
    }

    /// Number of browsed positions for a `k`-item list: everything up to the
    /// click, or all `k` without one.
    pub fn observed_count(&self, k: usize) -> usize {
        self.clicked_position.unwrap_or(k)
    }
}

/// Simulates one user pass over the list: positions attract independently,
/// draws are taken lazily in display order, and browsing stops at the first
/// attractive item.
pub fn simulate_click<R: Rng + ?Sized>(
    w: &AttractionVector,
    list: &RecommendationList,
    rng: &mut R,
) -> ClickOutcome {
    for (pos0, &item) in list.items().iter().enumerate() {
        if rng.random_bool(w.get(item)) {
            return (Feedback::click_at(pos0 + 1), true, pos0 + 1);
        }
    }
    (Feedback::NONE, false, list.len())
}

/// Ten-segment benchmark environment: `L = 10`, `K = 3`, segments of 2500
/// slots. The three best items keep attractions (0.80, 0.75, 0.70)
/// throughout; the other seven get base values drawn once uniformly from
/// [0.10, 0.50). Odd segments use the base vector; each even segment boosts
/// three seed-chosen suboptimal items to 0.9.
pub fn make_synthetic(seed: u64) -> EnvironmentSpec {
    const L: usize = 10;
    const K: usize = 3;
    const N: usize = 10;
    const SEGMENT_LEN: u64 = 2500;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = vec![0.80, 0.75, 0.70];
    base.extend((0..L - 3).map(|_| rng.random_range(0.10..0.50)));

    let mut segments = Vec::with_capacity(N);
    for i in 0..N {
        let mut w = base.clone();
        if i % 2 == 1 {
            // 0-based indices of the seven suboptimal items
            let mut pool: Vec<usize> = (3..L).collect();
            for j in 0..3 {
                let pick = rng.random_range(j..pool.len());
                pool.swap(j, pick);
                w[pool[j]] = 0.9;
            }
        }
        segments.push(SegmentSpec {
            start: i as u64 * SEGMENT_LEN + 1,
            end: (i as u64 + 1) * SEGMENT_LEN,
            w: AttractionVector::new(w).expect("synthetic attractions lie in [0, 1]"),
        });
    }
    EnvironmentSpec::new(K, segments).expect("synthetic construction satisfies all invariants")
}

/// Separation used by `make_hard_instance`:
/// `(L - 1) / (4 sqrt(T L ln(4/3)))`.
pub fn hard_instance_epsilon(l: usize, t: u64) -> f64 {
    (l as f64 - 1.0) / (4.0 * (t as f64 * l as f64 * (4.0f64 / 3.0).ln()).sqrt())
}

/// Worst-case environment: `N` blocks, the first `N - 1` of length
/// `ceil(T / N)`; every block puts one best item at `1/2 + epsilon` and the
/// rest at `1/2`. The first block's best item is uniform over all `L`; each
/// later block's is uniform over the other `L - 1`, so consecutive blocks
/// never share a best item.
pub fn make_hard_instance(
    l: usize,
    k: usize,
    n: usize,
    t: u64,
    seed: u64,
) -> Result<EnvironmentSpec> {
    if l < 3 {
        return Err(Error::validation(format!("hard instance needs L >= 3, got {l}")));
    }
    if n < 1 {
        return Err(Error::validation("hard instance needs at least one block"));
    }
    if t < n as u64 {
        return Err(Error::validation(format!(
            "horizon {t} shorter than block count {n}"
        )));
    }
    let block = (t + n as u64 - 1) / n as u64; // ceil(T / N)
    let head = block * (n as u64 - 1);
    if head >= t {
        return Err(Error::validation(format!(
            "N = {n} blocks of length {block} leave no room for the last block in T = {t}"
        )));
    }
    let eps = hard_instance_epsilon(l, t);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = rng.random_range(1..=l);
    let mut segments = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            // uniform over the other L - 1 items
            let mut next = rng.random_range(1..=l - 1);
            if next >= best {
                next += 1;
            }
            best = next;
        }
        let mut w = vec![0.5; l];
        w[best - 1] = 0.5 + eps;
        let start = i as u64 * block + 1;
        let end = if i == n - 1 { t } else { (i as u64 + 1) * block };
        segments.push(SegmentSpec {
            start,
            end,
            w: AttractionVector::new(w)?,
        });
    }
    EnvironmentSpec::new(k, segments)
}

/// Parses the segment CSV format (`start,end,w1,...,wL` header, one row per
/// segment, 1-based inclusive slot bounds). `k` is the list length for the
/// resulting spec; the format itself does not carry it. Probabilities are
/// multiplied by `scale` and then clipped to [0, 1] with a warning; raw cells
/// must already lie in [0, 1].
pub fn load_segments_csv(path: &Path, k: usize, scale: f64) -> Result<EnvironmentSpec> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::validation(format!("scale = {scale} must be positive")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: format!("reading segment csv {}", path.display()),
        source: e,
    })?;
    let err = |row: usize, message: String| Error::CsvParse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty());

    let (header_row, header) = rows
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "start" || cols[1] != "end" {
        return Err(err(
            header_row,
            format!("expected header start,end,w1,...,wL; got {header}"),
        ));
    }
    for (i, col) in cols[2..].iter().enumerate() {
        let want = format!("w{}", i + 1);
        if *col != want {
            return Err(err(
                header_row,
                format!("expected column {want}, got {col}"),
            ));
        }
    }
    let l = cols.len() - 2;

    let mut segments: Vec<SegmentSpec> = Vec::new();
    for (row, line) in rows {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != l + 2 {
            return Err(err(
                row,
                format!("expected {} cells, got {}", l + 2, cells.len()),
            ));
        }
        let start: u64 = cells[0]
            .parse()
            .map_err(|_| err(row, format!("bad start slot {:?}", cells[0])))?;
        let end: u64 = cells[1]
            .parse()
            .map_err(|_| err(row, format!("bad end slot {:?}", cells[1])))?;
        let expected_start = segments.last().map_or(1, |prev: &SegmentSpec| prev.end + 1);
        if start != expected_start {
            return Err(err(
                row,
                format!("segment starts at {start}, expected {expected_start} (gap or overlap)"),
            ));
        }
        if end < start {
            return Err(err(row, format!("segment ends at {end} before start {start}")));
        }
        let mut w = Vec::with_capacity(l);
        for (j, cell) in cells[2..].iter().enumerate() {
            let raw: f64 = cell
                .parse()
                .map_err(|_| err(row, format!("bad probability {cell:?} in w{}", j + 1)))?;
            if !raw.is_finite() || !(0.0..=1.0).contains(&raw) {
                return Err(err(
                    row,
                    format!("probability w{} = {raw} outside [0, 1]", j + 1),
                ));
            }
            let scaled = raw * scale;
            if scaled > 1.0 {
                log::warn!(
                    "{}: row {row}: w{} = {scaled} after scaling, clipped to 1",
                    path.display(),
                    j + 1
                );
            }
            w.push(scaled.clamp(0.0, 1.0));
        }
        segments.push(SegmentSpec {
            start,
            end,
            w: AttractionVector::new(w).map_err(|e| err(row, e.to_string()))?,
        });
    }
    EnvironmentSpec::new(k, segments)
}

/// Writes a spec in the CSV format `load_segments_csv` reads.
pub fn write_segments_csv(spec: &EnvironmentSpec, path: &Path) -> Result<()> {
    let mut out = String::from("start,end");
    for i in 1..=spec.l() {
        let _ = write!(out, ",w{i}");
    }
    out.push('\n');
    for seg in spec.segments() {
        let _ = write!(out, "{},{}", seg.start, seg.end);
        for &x in seg.w.as_slice() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        context: format!("writing segment csv {}", path.display()),
        source: e,
    })
}

/// Detection budget for one change: the largest attraction shift it causes
/// and the number of post-change slots the detector may need.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeBudget {
    /// 0 for the synthetic "change" from an all-zero prior into segment 1;
    /// `i >= 1` for the shift between segments `i` and `i + 1`.
    pub index: usize,
    /// Largest per-item attraction difference across the change.
    pub largest_shift: f64,
    /// `ceil(4 L beta(T, delta) / (p * shift^2) + L / p)`.
    pub budget: f64,
}

/// One segment-length requirement: the segment must be at least twice the
/// larger of the budgets on its two sides (only the left budget for the last
/// segment).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCheck {
    /// 1-based segment number.
    pub segment: usize,
    pub length: u64,
    pub required: f64,
    pub ok: bool,
}

/// Whether every segment is long enough for its adjacent changes to be
/// detected quickly and without false alarms at the given exploration rate
/// and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectabilityReport {
    pub beta_horizon: f64,
    pub budgets: Vec<ChangeBudget>,
    pub checks: Vec<SegmentCheck>,
    pub satisfied: bool,
}

/// Evaluates the segment-length condition under which every change is
/// detectable in time: segment `i` must span at least `2 max(d_i, d_{i-1})`
/// slots, where `d_i` is the detection budget of the change at its right
/// boundary. A single-segment spec is vacuously satisfied.
pub fn check_detectability(spec: &EnvironmentSpec, p: f64, delta: f64) -> Result<DetectabilityReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("p = {p} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::validation(format!("delta = {delta} outside (0, 1)")));
    }
    let l = spec.l() as f64;
    let beta_horizon = math::threshold_beta(spec.t(), delta);
    let n = spec.n_segments();
    let budget_for = |shift: f64| -> f64 {
        (4.0 * l * beta_horizon / (p * shift * shift) + l / p).ceil()
    };

    let mut budgets = Vec::with_capacity(n);
    let first = spec.segments().first().unwrap();
    let base_shift = first
        .w
        .as_slice()
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    budgets.push(ChangeBudget {
        index: 0,
        largest_shift: base_shift,
        budget: budget_for(base_shift),
    });
    for i in 1..n {
        let prev = &spec.segments()[i - 1].w;
        let next = &spec.segments()[i].w;
        let shift = prev
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((b - a).abs()));
        budgets.push(ChangeBudget {
            index: i,
            largest_shift: shift,
            budget: budget_for(shift),
        });
    }

    let mut checks = Vec::new();
    let mut satisfied = true;
    if n > 1 {
        for i in 1..=n {
            let seg = &spec.segments()[i - 1];
            let length = seg.end - seg.start + 1;
            let required = if i < n {
                2.0 * budgets[i].budget.max(budgets[i - 1].budget)
            } else {
                2.0 * budgets[n - 1].budget
            };
            let ok = length as f64 >= required;
            satisfied &= ok;
            checks.push(SegmentCheck {
                segment: i,
                length,
                required,
                ok,
            });
        }
    }
    Ok(DetectabilityReport {
        beta_horizon,
        budgets,
        checks,
        satisfied,
    })
}
