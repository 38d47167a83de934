//! Prescribed-step sets: ladders of allowed distance bands, the inductive
//! covering construction with its explicit cardinality bound, the Lebesgue
//! measure bound, a Cantor-style instance generator and brute-force grid
//! oracles for the measure.
//!
//! A schedule lists bands `[eps1_i, eps2_i]` for `i = 0..=n` with
//! `0 < eps2_{i+1} < eps1_i < eps2_i` and `eps1_N = 0`; a set has prescribed
//! steps when every pairwise distance falls inside some band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StepsError {
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("band {index} must satisfy 0 <= eps1 < eps2; got ({eps1}, {eps2})")]
    BadBand { index: usize, eps1: f64, eps2: f64 },
    #[error("final band must have eps1 = 0; got {eps1}")]
    FinalBandNotClosed { eps1: f64 },
    #[error("band {index} does not interleave: its eps2 = {eps2} is not below eps1 = {eps1_prev} of band {prev}")]
    NotInterleaved { index: usize, prev: usize, eps2: f64, eps1_prev: f64 },
    #[error("strict condition violated at band {index}: eps2 = {eps2} is not below half the previous eps1 = {half}")]
    StrictViolation { index: usize, eps2: f64, half: f64 },
    #[error("points at indices {i} and {j} have distance {dist} outside every band")]
    StepViolation { i: usize, j: usize, dist: f64 },
    #[error("atom diameter 2*{atom_radius} exceeds the final band eps2 = {eps2}")]
    AtomTooLarge { atom_radius: f64, eps2: f64 },
    #[error("cannot place {branching} children with gaps in [{eps1}, {eps2}] inside diameter {parent}")]
    Infeasible { branching: usize, eps1: f64, eps2: f64, parent: f64 },
    #[error("grid resolution {resolution} too coarse; need below atom_radius/4 = {limit}")]
    ResolutionTooCoarse { resolution: f64, limit: f64 },
    #[error("radii pair {index} violates the gap conditions: {detail}")]
    BadRadii { index: usize, detail: String },
    #[error("arcsin argument {value} exceeds 1 at band {index}: eps too large for that radius")]
    ArcsinDomain { index: usize, value: f64 },
}

/// Ladder of allowed distance bands, outermost first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSchedule {
    pub bands: Vec<(f64, f64)>,
}

impl StepSchedule {
    pub fn new(bands: Vec<(f64, f64)>) -> Self {
        StepSchedule { bands }
    }

    /// Number of refinement levels `N` (bands minus one).
    pub fn levels(&self) -> usize {
        self.bands.len().saturating_sub(1)
    }

    pub fn last_eps2(&self) -> f64 {
        self.bands.last().map(|b| b.1).unwrap_or(0.0)
    }

    /// Does `dist` land inside some band?
    pub fn admits(&self, dist: f64) -> bool {
        self.bands.iter().any(|&(e1, e2)| dist >= e1 && dist <= e2)
    }

    /// Widen every band by `delta` on both sides (clamping eps1 at 0).
    pub fn inflated(&self, delta: f64) -> StepSchedule {
        StepSchedule {
            bands: self
                .bands
                .iter()
                .map(|&(e1, e2)| ((e1 - delta).max(0.0), e2 + delta))
                .collect(),
        }
    }
}

/// Check the interleaving inequalities; `strict` additionally demands
/// `eps2_i < eps1_{i-1} / 2`, the hypothesis of the measure bound.
pub fn validate_schedule(schedule: &StepSchedule, strict: bool) -> Result<(), StepsError> {
    let bands = &schedule.bands;
    if bands.is_empty() {
        return Err(StepsError::EmptySchedule);
    }
    for (i, &(e1, e2)) in bands.iter().enumerate() {
        let interior = i + 1 < bands.len();
        if e1 < 0.0 || e2 <= 0.0 || e1 >= e2 || (interior && e1 == 0.0) {
            return Err(StepsError::BadBand { index: i, eps1: e1, eps2: e2 });
        }
    }
    let last = bands.len() - 1;
    if bands[last].0 != 0.0 {
        return Err(StepsError::FinalBandNotClosed { eps1: bands[last].0 });
    }
    for i in 1..bands.len() {
        if bands[i].1 >= bands[i - 1].0 {
            return Err(StepsError::NotInterleaved {
                index: i,
                prev: i - 1,
                eps2: bands[i].1,
                eps1_prev: bands[i - 1].0,
            });
        }
        if strict && bands[i].1 >= bands[i - 1].0 / 2.0 {
            return Err(StepsError::StrictViolation {
                index: i,
                eps2: bands[i].1,
                half: bands[i - 1].0 / 2.0,
            });
        }
    }
    Ok(())
}

/// Volume of the unit ball in `R^n`: `pi^{n/2} / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // Gamma at integer/half-integer arguments by the recursion from 1 and 1/2
    let mut gamma = if n % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 + 1.0 - 0.25 {
        gamma *= x;
        x += 1.0;
    }
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma
}

/// Maximal count of covering balls: `p_N = 3^{nN} prod (eps2_i/eps1_i)^n`.
pub fn covering_count_bound(schedule: &StepSchedule, n: usize) -> f64 {
    let levels = schedule.levels();
    let mut p = 3f64.powi((n * levels) as i32);
    for i in 0..levels {
        let (e1, e2) = schedule.bands[i];
        p *= (e2 / e1).powi(n as i32);
    }
    p
}

/// Lebesgue-measure bound `V_n eps_{N,2}^n 3^{nN} prod (eps2_i/eps1_i)^n`
/// for sets with prescribed steps under the strict schedule condition.
pub fn measure_bound(schedule: &StepSchedule, n: usize) -> Result<f64, StepsError> {
    validate_schedule(schedule, true)?;
    let e2n = schedule.last_eps2();
    Ok(unit_ball_volume(n) * e2n.powi(n as i32) * covering_count_bound(schedule, n))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Verify the pairwise prescribed-step condition on raw points.
pub fn check_pairwise(points: &[Vec<f64>], schedule: &StepSchedule) -> Result<(), StepsError> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = dist(&points[i], &points[j]);
            if !schedule.admits(d) {
                return Err(StepsError::StepViolation { i, j, dist: d });
            }
        }
    }
    Ok(())
}

/// Ball of the cover returned by [`cover`].
#[derive(Debug, Clone)]
pub struct CoverBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Cover a prescribed-step point set by balls of radius `eps2_N`.
///
/// Greedy maximal-separated subsets are extracted level by level in input
/// order, mirroring the inductive construction behind the covering bound;
/// the output count never exceeds `p_N` and every point lies within
/// `eps2_N` of some returned center.
pub fn cover(points: &[Vec<f64>], schedule: &StepSchedule) -> Result<Vec<CoverBall>, StepsError> {
    validate_schedule(schedule, true)?;
    check_pairwise(points, schedule)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let radius = schedule.last_eps2();
    let mut clusters: Vec<Vec<usize>> = vec![(0..points.len()).collect()];
    for level in 1..=schedule.levels() {
        let sep = schedule.bands[level].1;
        let mut next = Vec::new();
        for cluster in &clusters {
            // greedy maximal sep-separated subset, deterministic in input order
            let mut centers: Vec<usize> = Vec::new();
            for &p in cluster {
                if centers.iter().all(|&c| dist(&points[p], &points[c]) > sep) {
                    centers.push(p);
                }
            }
            let mut buckets: Vec<Vec<usize>> = centers.iter().map(|&c| vec![c]).collect();
            for &p in cluster {
                if centers.contains(&p) {
                    continue;
                }
                let (k, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (k, dist(&points[p], &points[c])))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .expect("nonempty centers");
                buckets[k].push(p);
            }
            next.extend(buckets);
        }
        clusters = next;
    }
    Ok(clusters
        .into_iter()
        .map(|cluster| CoverBall {
            center: points[cluster[0]].clone(),
            radius,
        })
        .collect())
}

/// Finite representation of a prescribed-step set: closed balls of
/// `atom_radius` around the centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrescribedStepSet {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    pub atom_radius: f64,
}

impl PrescribedStepSet {
    /// The set (union of closed balls) has prescribed steps iff every center
    /// pair keeps the whole interval `[d - 2a, d + 2a]` inside one band and
    /// the atom diameter fits inside the final band.
    pub fn check(&self, schedule: &StepSchedule) -> Result<(), StepsError> {
        if 2.0 * self.atom_radius > schedule.last_eps2() {
            return Err(StepsError::AtomTooLarge {
                atom_radius: self.atom_radius,
                eps2: schedule.last_eps2(),
            });
        }
        let a2 = 2.0 * self.atom_radius;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = dist(&self.points[i], &self.points[j]);
                let ok = schedule
                    .bands
                    .iter()
                    .any(|&(e1, e2)| d - a2 >= e1 && d + a2 <= e2)
                    || d == 0.0;
                if !ok {
                    return Err(StepsError::StepViolation { i, j, dist: d });
                }
            }
        }
        Ok(())
    }
}

/// Generate a Cantor-style prescribed-step set: a `branching`-ary tree of
/// depth `N` whose level-`i` siblings sit at distances inside band `i`.
///
/// All offsets lie along one random direction, so the construction is the
/// classical one-dimensional Cantor induction embedded in `R^n`. A pair in
/// different level-`i` blocks is displaced by `k * g_i` plus subtree tails in
/// `[0, L_{i+1}]`, so the level gap `g_i` must satisfy
/// `g_i - L >= eps1_i + 2a` and `(branching-1) g_i + L <= eps2_i - 2a`,
/// where `L = sum of deeper eps2` bounds the subtree extent.
pub fn generate_cantor(
    schedule: &StepSchedule,
    branching: usize,
    n: usize,
    seed: u64,
) -> Result<PrescribedStepSet, StepsError> {
    validate_schedule(schedule, true)?;
    if branching < 2 {
        return Err(StepsError::Infeasible {
            branching,
            eps1: 0.0,
            eps2: 0.0,
            parent: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = schedule.levels();
    let atom_radius = schedule.last_eps2() / 8.0;
    let slack = 2.0 * atom_radius;

    // tail extents: tail_bound[i] = sum of eps2_j for j >= i (overestimates
    // any subtree rooted at level i, since block diameters sit inside bands)
    let mut tail_bound = vec![0.0; levels + 2];
    for i in (0..=levels).rev() {
        tail_bound[i] = tail_bound[i + 1] + schedule.bands[i].1;
    }

    let mut dir = vec![0.0; n];
    loop {
        let mut norm = 0.0;
        for d in dir.iter_mut() {
            *d = rng.gen::<f64>() * 2.0 - 1.0;
            norm += *d * *d;
        }
        if norm > 1e-3 {
            let norm = norm.sqrt();
            dir.iter_mut().for_each(|d| *d /= norm);
            break;
        }
    }

    let mut offsets: Vec<f64> = vec![0.0];
    for level in 0..levels {
        let (e1, e2) = schedule.bands[level];
        let tail = tail_bound[level + 1];
        let lo = e1 + slack + tail;
        let hi = (e2 - slack - tail) / (branching as f64 - 1.0);
        if !(lo < hi) {
            return Err(StepsError::Infeasible {
                branching,
                eps1: e1,
                eps2: e2,
                parent: e2 - slack - tail,
            });
        }
        let g = lo + rng.gen::<f64>() * (hi - lo);
        let mut next = Vec::with_capacity(offsets.len() * branching);
        for &parent in &offsets {
            for k in 0..branching {
                next.push(parent + g * k as f64);
            }
        }
        offsets = next;
    }
    let points = offsets
        .into_iter()
        .map(|t| dir.iter().map(|d| d * t).collect())
        .collect();
    let set = PrescribedStepSet {
        dimension: n,
        points,
        atom_radius,
    };
    set.check(schedule)?;
    Ok(set)
}

/// Inner/outer grid estimates of the Lebesgue measure of the union of balls.
#[derive(Debug, Clone, Copy)]
pub struct MeasureBracket {
    pub inner: f64,
    pub outer: f64,
}

/// Brute-force grid measure of a prescribed-step set.
///
/// Cells fully inside some ball count toward `inner`; cells meeting some ball
/// count toward `outer`. The true measure lies in between.
pub fn brute_measure(
    set: &PrescribedStepSet,
    resolution: f64,
) -> Result<MeasureBracket, StepsError> {
    let limit = set.atom_radius / 4.0;
    if !(resolution > 0.0) || resolution >= limit {
        return Err(StepsError::ResolutionTooCoarse { resolution, limit });
    }
    let n = set.dimension;
    let h = resolution;
    use std::collections::HashMap;
    // cell index -> fully-covered flag; visited cells only (balls are tiny
    // compared to the diameter, so a dense grid over the hull would waste work)
    let mut cells: HashMap<Vec<i64>, bool> = HashMap::new();
    let r = set.atom_radius;
    for center in &set.points {
        let lo: Vec<i64> = center.iter().map(|c| ((c - r) / h).floor() as i64 - 1).collect();
        let hi: Vec<i64> = center.iter().map(|c| ((c + r) / h).ceil() as i64 + 1).collect();
        let mut idx = lo.clone();
        'cells: loop {
            // nearest and farthest points of the cell to the ball center
            let mut near = 0.0;
            let mut far = 0.0;
            for d in 0..n {
                let a = idx[d] as f64 * h;
                let b = a + h;
                let c = center[d];
                let lo_d = (a - c).max(0.0).max(c - b).max(0.0);
                let nearest = if c < a { a - c } else if c > b { c - b } else { 0.0 };
                let _ = lo_d;
                let farthest = (c - a).abs().max((b - c).abs());
                near += nearest * nearest;
                far += farthest * farthest;
            }
            if near <= r * r {
                let entry = cells.entry(idx.clone()).or_insert(false);
                if far <= r * r {
                    *entry = true;
                }
            }
            // odometer increment
            for d in 0..n {
                idx[d] += 1;
                if idx[d] <= hi[d] {
                    continue 'cells;
                }
                idx[d] = lo[d];
            }
            break;
        }
    }
    let cell_vol = h.powi(n as i32);
    let outer = cells.len() as f64 * cell_vol;
    let inner = cells.values().filter(|&&full| full).count() as f64 * cell_vol;
    Ok(MeasureBracket { inner, outer })
}

/// Which displacement law a schedule is derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleVariant {
    /// Band edges `2 asin(8 c eps e^{-R_{i,1}})`, `2 asin(16 c eps e^{-R_{i,2}})`.
    Rotation,
    /// Band edges `(4/3) c C1 eps e^{-R_{i,1}}`, `16 c C1 eps e^{-R_{i,2}}`.
    Automorphism,
}

/// Constant `C1` of the automorphism displacement window, fixed so the lower
/// extreme of the window chain collapses to eps1 (see the displacement lemma
/// machinery in `entropy`): `C1 = 8 pi / sqrt(2)`.
pub const AUT_BAND_C1: f64 = 17.771_531_752_633_464;

/// Build a step schedule from singular radius windows `(R_{i,2}, R_{i,1})`.
///
/// `R_{N,1} = +inf` maps to `eps1_N = 0`. Gap conditions (`4 < R_{0,2}`,
/// in-window and between-window gaps at least 4) guarantee the output passes
/// strict validation, since `e^4 > 32`.
pub fn schedule_from_radii(
    radii: &[(f64, f64)],
    eps: f64,
    c: f64,
    variant: ScheduleVariant,
) -> Result<StepSchedule, StepsError> {
    if radii.is_empty() {
        return Err(StepsError::EmptySchedule);
    }
    for (i, &(r2, r1)) in radii.iter().enumerate() {
        if i == 0 && r2 <= 4.0 {
            return Err(StepsError::BadRadii {
                index: 0,
                detail: format!("R_02 = {r2} must exceed 4"),
            });
        }
        if r1 - r2 < 4.0 {
            return Err(StepsError::BadRadii {
                index: i,
                detail: format!("window length {} below 4", r1 - r2),
            });
        }
        if i + 1 < radii.len() {
            let next2 = radii[i + 1].0;
            if next2 - r1 < 4.0 {
                return Err(StepsError::BadRadii {
                    index: i,
                    detail: format!("gap to next window {} below 4", next2 - r1),
                });
            }
        } else if !r1.is_infinite() {
            return Err(StepsError::BadRadii {
                index: i,
                detail: "last window must end at +inf".into(),
            });
        }
    }
    let mut bands = Vec::with_capacity(radii.len());
    for (i, &(r2, r1)) in radii.iter().enumerate() {
        let (e1, e2) = match variant {
            ScheduleVariant::Rotation => {
                let a1 = 8.0 * c * eps * (-r1).exp();
                let a2 = 16.0 * c * eps * (-r2).exp();
                if a2 > 1.0 {
                    return Err(StepsError::ArcsinDomain { index: i, value: a2 });
                }
                (2.0 * a1.asin(), 2.0 * a2.asin())
            }
            ScheduleVariant::Automorphism => (
                4.0 / 3.0 * c * AUT_BAND_C1 * eps * (-r1).exp(),
                16.0 * c * AUT_BAND_C1 * eps * (-r2).exp(),
            ),
        };
        bands.push((e1, e2));
    }
    let schedule = StepSchedule::new(bands);
    validate_schedule(&schedule, true)?;
    Ok(schedule)
}
