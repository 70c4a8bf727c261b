//! Greedy assignment of robot-action tuples to targets.
//!
//! Every round scores all `(tuple, target)` candidates over the robots and
//! targets still free, commits the best one, and retires the chosen robots
//! together with their whole action sets. With tuples of size `n` the total
//! quality is at least `1/(n+1)` of the optimum; `n = 1` and `n = 2` are the
//! sufficient and limited sensing cases.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{quality, QualityMetric};
use crate::model::{Action, ActionRoster, Assignment, RobotState, TargetBelief};
use crate::motion::{robot_step, MotionConfig};
use crate::sensing::{build_observation, SensorConfig};

/// Scores a tuple of robot-actions (distinct robots, sorted by robot id)
/// against one target.
pub trait QualityModel: Sync {
    fn quality(&self, tuple: &[Action], target: usize) -> f64;
}

impl<F> QualityModel for F
where
    F: Fn(&[Action], usize) -> f64 + Sync,
{
    fn quality(&self, tuple: &[Action], target: usize) -> f64 {
        self(tuple, target)
    }
}

/// Non-finite or negative scores count as zero.
pub(crate) fn sanitized<Q: QualityModel + ?Sized>(model: &Q, tuple: &[Action], target: usize) -> f64 {
    let q = model.quality(tuple, target);
    if q.is_finite() && q > 0.0 {
        q
    } else {
        0.0
    }
}

/// Quality of moving each robot in the tuple by its action and then
/// observing the (already predicted) target from the new poses.
pub fn evaluate_candidate(
    actions: &[Action],
    robots: &[RobotState],
    belief: &TargetBelief,
    sensor: &SensorConfig,
    motion: &MotionConfig,
    metric: QualityMetric,
) -> Result<f64> {
    let moved: Vec<RobotState> = actions
        .iter()
        .map(|a| robot_step(&robots[a.robot_id], a, motion.dt))
        .collect();
    let obs = build_observation(&moved, &belief.mean, sensor)?;
    quality(belief, &obs, metric)
}

/// The EKF-based tracking quality used by the planner. Candidates with
/// degenerate geometry score zero.
#[derive(Debug, Clone, Copy)]
pub struct TrackingQuality<'a> {
    pub robots: &'a [RobotState],
    pub beliefs: &'a [TargetBelief],
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
    pub metric: QualityMetric,
}

impl QualityModel for TrackingQuality<'_> {
    fn quality(&self, tuple: &[Action], target: usize) -> f64 {
        evaluate_candidate(
            tuple,
            self.robots,
            &self.beliefs[target],
            &self.sensor,
            &self.motion,
            self.metric,
        )
        .unwrap_or(0.0)
    }
}

/// Counts calls to the wrapped model.
#[derive(Debug)]
pub struct Instrumented<Q> {
    inner: Q,
    calls: AtomicUsize,
}

impl<Q> Instrumented<Q> {
    pub fn new(inner: Q) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(AtomicOrdering::Relaxed)
    }
}

impl<Q: QualityModel> QualityModel for Instrumented<Q> {
    fn quality(&self, tuple: &[Action], target: usize) -> f64 {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        self.inner.quality(tuple, target)
    }
}

/// A scored `(tuple, target)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTuple {
    pub actions: Vec<Action>,
    pub target: usize,
    pub q: f64,
}

/// What happened in one greedy round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub chosen: CandidateTuple,
    pub evaluated: usize,
    /// Largest quality seen among all candidates of the round.
    pub round_max: f64,
}

pub(crate) fn check_sizes(n: usize, robots: usize, targets: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("tuple size must be at least 1".into()));
    }
    if robots < n.saturating_mul(targets) {
        return Err(Error::Infeasible {
            robots,
            targets,
            tuple_size: n,
        });
    }
    Ok(())
}

/// All tuples of `n` actions from distinct robots in `robots`, ordered by
/// robot ids and then action indices.
pub(crate) fn tuples_over(robots: &[usize], n: usize, roster: &ActionRoster) -> Vec<Vec<Action>> {
    let mut out = Vec::new();
    for combo in robots.iter().copied().combinations(n) {
        for actions in combo
            .iter()
            .map(|&r| roster.actions(r).iter().copied())
            .multi_cartesian_product()
        {
            out.push(actions);
        }
    }
    out
}

/// Lexicographic order on `(target, robot₀, action₀, robot₁, …)`.
pub(crate) fn candidate_key_cmp(ta: usize, a: &[Action], tb: usize, b: &[Action]) -> Ordering {
    ta.cmp(&tb)
        .then_with(|| a.iter().map(Action::key).cmp(b.iter().map(Action::key)))
}

pub fn greedy_assign<Q: QualityModel + ?Sized>(
    n: usize,
    roster: &ActionRoster,
    targets: usize,
    model: &Q,
) -> Result<Assignment> {
    greedy_assign_traced(n, roster, targets, model).map(|(a, _)| a)
}

/// Greedy assignment plus a per-round log.
pub fn greedy_assign_traced<Q: QualityModel + ?Sized>(
    n: usize,
    roster: &ActionRoster,
    targets: usize,
    model: &Q,
) -> Result<(Assignment, Vec<Round>)> {
    check_sizes(n, roster.robots(), targets)?;

    let mut free_robots: Vec<usize> = (0..roster.robots()).collect();
    let mut free_targets: Vec<usize> = (0..targets).collect();
    let mut per_target: Vec<Option<(Vec<Action>, f64)>> = vec![None; targets];
    let mut rounds = Vec::with_capacity(targets);
    let mut total = 0.0;

    while !free_targets.is_empty() {
        let tuples = tuples_over(&free_robots, n, roster);
        let evaluated = tuples.len() * free_targets.len();

        // (q, target, tuple index); ties go to the smallest key
        let better = |x: (f64, usize, usize), y: (f64, usize, usize)| -> (f64, usize, usize) {
            match x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal) {
                Ordering::Greater => x,
                Ordering::Less => y,
                Ordering::Equal => {
                    if candidate_key_cmp(x.1, &tuples[x.2], y.1, &tuples[y.2]) != Ordering::Greater {
                        x
                    } else {
                        y
                    }
                }
            }
        };
        let scores: Vec<(f64, usize, usize)> = free_targets
            .par_iter()
            .flat_map_iter(|&t| (0..tuples.len()).map(move |i| (t, i)))
            .map(|(t, i)| (sanitized(model, &tuples[i], t), t, i))
            .collect();
        let round_max = scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let (q, target, idx) = scores
            .iter()
            .copied()
            .reduce(better)
            .expect("at least one candidate while targets remain");
        debug_assert!(q >= round_max);
        let chosen = tuples[idx].clone();
        log::trace!("greedy round {}: target {target} q={q}", rounds.len());

        free_robots.retain(|r| chosen.iter().all(|a| a.robot_id != *r));
        free_targets.retain(|&t| t != target);
        total += q;
        per_target[target] = Some((chosen.clone(), q));
        rounds.push(Round {
            chosen: CandidateTuple {
                actions: chosen,
                target,
                q,
            },
            evaluated,
            round_max,
        });
    }

    let (per_target, per_target_quality) = per_target
        .into_iter()
        .map(|slot| slot.expect("every target is assigned"))
        .unzip();
    Ok((
        Assignment {
            tuple_size: n,
            per_target,
            per_target_quality,
            total_quality: total,
        },
        rounds,
    ))
}
