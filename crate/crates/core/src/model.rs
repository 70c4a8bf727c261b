//! Domain types shared by every stage of the tracker: robot poses, the
//! per-robot action sets, target beliefs and ground truth, and the
//! assignment of robot-action tuples to targets.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
///
/// Angles already inside the interval are returned untouched, which makes the
/// function exactly idempotent.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_finite(theta))
}

pub(crate) fn wrap_finite(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar robot pose. `theta` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub x1: f64,
    pub x2: f64,
    theta: f64,
}

impl RobotState {
    pub fn new(id: usize, x1: f64, x2: f64, theta: f64) -> Self {
        Self {
            id,
            x1,
            x2,
            theta: wrap_finite(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = wrap_finite(theta);
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x1, self.x2)
    }
}

/// One velocity command available to one robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub robot_id: usize,
    pub action_idx: usize,
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

impl Action {
    pub fn is_null(&self) -> bool {
        self.v == 0.0 && self.omega == 0.0
    }

    pub(crate) fn key(&self) -> (usize, usize) {
        (self.robot_id, self.action_idx)
    }
}

/// The joint action set: one finite, non-empty list of actions per robot.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRoster {
    per_robot: Vec<Vec<Action>>,
}

impl ActionRoster {
    /// Builds a roster from `(v, omega)` lists, one list per robot.
    pub fn new(commands: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let mut per_robot = Vec::with_capacity(commands.len());
        for (robot_id, list) in commands.into_iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "robot {robot_id} has an empty action set"
                )));
            }
            let actions = list
                .into_iter()
                .enumerate()
                .map(|(action_idx, (v, omega))| {
                    if !v.is_finite() || !omega.is_finite() {
                        return Err(Error::NonFinite("action velocity"));
                    }
                    Ok(Action {
                        robot_id,
                        action_idx,
                        v,
                        omega,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            per_robot.push(actions);
        }
        Ok(Self { per_robot })
    }

    /// Every robot gets the same command list.
    pub fn uniform(robots: usize, commands: &[(f64, f64)]) -> Result<Self> {
        Self::new(vec![commands.to_vec(); robots])
    }

    pub fn robots(&self) -> usize {
        self.per_robot.len()
    }

    pub fn actions(&self, robot: usize) -> &[Action] {
        &self.per_robot[robot]
    }

    pub fn get(&self, robot: usize, action_idx: usize) -> Option<&Action> {
        self.per_robot.get(robot)?.get(action_idx)
    }

    /// `|A|`, the size of the joint action set.
    pub fn total_size(&self) -> usize {
        self.per_robot.iter().map(Vec::len).sum()
    }

    /// Common action count if every robot has the same number of actions.
    pub fn uniform_size(&self) -> Option<usize> {
        let first = self.per_robot.first()?.len();
        self.per_robot.iter().all(|a| a.len() == first).then_some(first)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.per_robot.iter().flatten()
    }

    /// The action an idle robot executes: its null action if it has one,
    /// otherwise its first action.
    pub fn idle_action(&self, robot: usize) -> Action {
        let actions = &self.per_robot[robot];
        actions.iter().copied().find(Action::is_null).unwrap_or(actions[0])
    }
}

/// Gaussian belief over a target's planar position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBelief {
    pub id: usize,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl TargetBelief {
    pub fn new(id: usize, mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        Self { id, mean, cov }
    }

    pub fn is_valid(&self) -> bool {
        crate::linalg::is_symmetric(&self.cov, 1e-9) && crate::linalg::min_eigenvalue(&self.cov) >= -1e-9
    }
}

/// Simulated ground truth for a target on a noisy circular path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub id: usize,
    pub pos: Vector2<f64>,
    /// Displacement per step, m.
    pub v: f64,
    /// Turn rate, rad/s.
    pub omega: f64,
    /// Accumulated heading, rad.
    pub phase: f64,
    /// Process noise standard deviation, m.
    pub sigma: f64,
}

/// Targets mapped to disjoint robot-action tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub tuple_size: usize,
    /// Indexed by target id. Each tuple is sorted by robot id.
    pub per_target: Vec<Vec<Action>>,
    /// Quality credited to each target's tuple.
    pub per_target_quality: Vec<f64>,
    pub total_quality: f64,
}

impl Assignment {
    /// Robot ids that received no action.
    pub fn idle_robots(&self, robots: usize) -> Vec<usize> {
        let used: HashSet<usize> = self.per_target.iter().flatten().map(|a| a.robot_id).collect();
        (0..robots).filter(|r| !used.contains(r)).collect()
    }

    /// The action each robot executes this step, if any.
    pub fn action_of(&self, robot: usize) -> Option<Action> {
        self.per_target.iter().flatten().find(|a| a.robot_id == robot).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RobotReused {
        robot: usize,
    },
    OneActionPerRobot {
        target: usize,
        robot: usize,
    },
    TupleSize {
        target: usize,
        expected: usize,
        found: usize,
    },
    TargetCount {
        expected: usize,
        found: usize,
    },
    UnknownAction {
        robot: usize,
        action_idx: usize,
    },
    ActionMismatch {
        robot: usize,
        action_idx: usize,
    },
    Unordered {
        target: usize,
    },
    ZeroTupleSize,
    BadQuality {
        total: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RobotReused { robot } => write!(f, "robot reused: {robot}"),
            Violation::OneActionPerRobot { target, robot } => write!(
                f,
                "one action per robot per step: robot {robot} twice in tuple of target {target}"
            ),
            Violation::TupleSize {
                target,
                expected,
                found,
            } => write!(f, "target {target} has {found} actions, expected {expected}"),
            Violation::TargetCount { expected, found } => {
                write!(f, "{found} tuples for {expected} targets")
            }
            Violation::UnknownAction { robot, action_idx } => {
                write!(f, "action {action_idx} of robot {robot} is not in the roster")
            }
            Violation::ActionMismatch { robot, action_idx } => {
                write!(f, "action {action_idx} of robot {robot} differs from the roster entry")
            }
            Violation::Unordered { target } => {
                write!(f, "tuple of target {target} is not sorted by robot id")
            }
            Violation::ZeroTupleSize => write!(f, "tuple size must be at least 1"),
            Violation::BadQuality { total } => write!(f, "total quality {total} is not a nonnegative number"),
        }
    }
}

/// Checks every structural constraint on an assignment. An empty list means
/// the assignment is feasible.
pub fn validate_assignment(a: &Assignment, roster: &ActionRoster, targets: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    if a.tuple_size == 0 {
        out.push(Violation::ZeroTupleSize);
    }
    if a.per_target.len() != targets {
        out.push(Violation::TargetCount {
            expected: targets,
            found: a.per_target.len(),
        });
    }
    if !(a.total_quality >= 0.0) || !a.total_quality.is_finite() {
        out.push(Violation::BadQuality { total: a.total_quality });
    }

    let mut owner: Vec<Option<usize>> = vec![None; roster.robots()];
    for (target, tuple) in a.per_target.iter().enumerate() {
        if tuple.len() != a.tuple_size {
            out.push(Violation::TupleSize {
                target,
                expected: a.tuple_size,
                found: tuple.len(),
            });
        }
        if tuple.windows(2).any(|w| w[0].robot_id > w[1].robot_id) {
            out.push(Violation::Unordered { target });
        }
        let mut seen = HashSet::new();
        for action in tuple {
            match roster.get(action.robot_id, action.action_idx) {
                None => {
                    out.push(Violation::UnknownAction {
                        robot: action.robot_id,
                        action_idx: action.action_idx,
                    });
                    continue;
                }
                Some(entry) if entry != action => out.push(Violation::ActionMismatch {
                    robot: action.robot_id,
                    action_idx: action.action_idx,
                }),
                Some(_) => {}
            }
            if !seen.insert(action.robot_id) {
                out.push(Violation::OneActionPerRobot {
                    target,
                    robot: action.robot_id,
                });
                continue;
            }
            match owner[action.robot_id] {
                Some(prev) if prev != target => out.push(Violation::RobotReused { robot: action.robot_id }),
                _ => owner[action.robot_id] = Some(target),
            }
        }
    }
    out
}
