//! Scenario generation, the closed tracking loop, and the solver comparison
//! harness.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::assign::{greedy_assign, TrackingQuality};
use crate::baselines::{exhaustive_assign, random_assign, relaxed_upper_bound, ExhaustiveOptions, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::filter::{predict, update, QualityMetric};
use crate::model::{validate_assignment, ActionRoster, Assignment, RobotState, TargetBelief, TargetTruth};
use crate::motion::{robot_step, target_step_sample, MotionConfig};
use crate::rng::{mix, stream, Purpose};
use crate::sensing::{build_observation, predict_measurement, sample_measurement, SensorConfig, SensorKind};

/// `{0, ±1.5} m/s × {0, ±0.7} rad/s`, null action first.
pub const DEFAULT_ACTIONS: [(f64, f64); 9] = [
    (0.0, 0.0),
    (1.5, 0.0),
    (-1.5, 0.0),
    (0.0, 0.7),
    (0.0, -0.7),
    (1.5, 0.7),
    (1.5, -0.7),
    (-1.5, 0.7),
    (-1.5, -0.7),
];

pub const TARGET_TURN_RATES: [f64; 4] = [0.15, 0.2, 0.3, 0.6];
pub const DEFAULT_TARGET_SPEED: f64 = 1.2;
pub const DEFAULT_TARGET_SIGMA: f64 = 0.1;
pub const DEFAULT_SIGMA_INIT: f64 = 1.0;
pub const DEFAULT_STEPS: usize = 100;

/// Everything needed to build a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub robots: usize,
    pub targets: usize,
    pub tuple_size: usize,
    /// Leading entries of [`DEFAULT_ACTIONS`] given to every robot.
    pub actions: usize,
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
    pub metric: QualityMetric,
    pub sigma_init: f64,
    pub target_speed: f64,
    /// Fixed turn rate for all targets; drawn from [`TARGET_TURN_RATES`] when
    /// absent.
    pub target_omega: Option<f64>,
    pub target_sigma: f64,
}

impl ScenarioSpec {
    /// Defaults: range-bearing sensing for single robots, range
    /// only for tuples.
    pub fn new(seed: u64, tuple_size: usize, robots: usize, targets: usize) -> Self {
        let kind = if tuple_size == 1 {
            SensorKind::RangeBearing
        } else {
            SensorKind::RangeOnly
        };
        Self {
            seed,
            robots,
            targets,
            tuple_size,
            actions: DEFAULT_ACTIONS.len(),
            sensor: SensorConfig::with_kind(kind),
            motion: MotionConfig::default(),
            metric: QualityMetric::default(),
            sigma_init: DEFAULT_SIGMA_INIT,
            target_speed: DEFAULT_TARGET_SPEED,
            target_omega: None,
            target_sigma: DEFAULT_TARGET_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub robots: Vec<RobotState>,
    pub targets: Vec<TargetTruth>,
    pub roster: ActionRoster,
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
    pub tuple_size: usize,
    pub metric: QualityMetric,
    pub sigma_init: f64,
    /// Simulated measurements carry no noise. The filter still uses the
    /// configured noise model.
    pub noiseless_measurements: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.sensor.validate()?;
        crate::assign::check_sizes(self.tuple_size, self.robots.len(), self.targets.len())?;
        if self.roster.robots() != self.robots.len() {
            return Err(Error::LengthMismatch {
                left: self.roster.robots(),
                right: self.robots.len(),
            });
        }
        if self.sensor.kind == SensorKind::RangeBearing && self.tuple_size != 1 {
            return Err(Error::InvalidConfig(
                "range-bearing sensing assigns one robot per target".into(),
            ));
        }
        if !(self.sigma_init > 0.0 && self.sigma_init.is_finite()) {
            return Err(Error::InvalidConfig("sigma_init must be positive".into()));
        }
        if self.targets.iter().any(|t| !(t.sigma >= 0.0) || !t.omega.is_finite()) {
            return Err(Error::InvalidConfig(
                "target sigma must be >= 0 and omega finite".into(),
            ));
        }
        Ok(())
    }
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    crate::model::wrap_finite(rng.random_range(-PI..PI))
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    crate::assign::check_sizes(spec.tuple_size, spec.robots, spec.targets)?;
    if spec.actions == 0 || spec.actions > DEFAULT_ACTIONS.len() {
        return Err(Error::InvalidConfig(format!(
            "actions per robot must be in 1..={}, got {}",
            DEFAULT_ACTIONS.len(),
            spec.actions
        )));
    }
    spec.motion.validate()?;
    let h = spec.motion.world_half_extent;
    let mut rng = stream(spec.seed, Purpose::Scenario, 0);
    let robots = (0..spec.robots)
        .map(|id| {
            let x1 = rng.random_range(-h..=h);
            let x2 = rng.random_range(-h..=h);
            RobotState::new(id, x1, x2, uniform_angle(&mut rng))
        })
        .collect();
    let targets = (0..spec.targets)
        .map(|id| {
            let x1 = rng.random_range(-h..=h);
            let x2 = rng.random_range(-h..=h);
            let phase = uniform_angle(&mut rng);
            let omega = spec
                .target_omega
                .unwrap_or_else(|| TARGET_TURN_RATES[rng.random_range(0..TARGET_TURN_RATES.len())]);
            TargetTruth {
                id,
                pos: Vector2::new(x1, x2),
                v: spec.target_speed,
                omega,
                phase,
                sigma: spec.target_sigma,
            }
        })
        .collect();
    let scenario = Scenario {
        seed: spec.seed,
        robots,
        targets,
        roster: ActionRoster::uniform(spec.robots, &DEFAULT_ACTIONS[..spec.actions])?,
        sensor: spec.sensor,
        motion: spec.motion,
        tuple_size: spec.tuple_size,
        metric: spec.metric,
        sigma_init: spec.sigma_init,
        noiseless_measurements: false,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Initial beliefs: truth plus an `N(0, σ_init²I)` offset, covariance
/// `σ_init²I`.
pub fn initial_beliefs(s: &Scenario) -> Vec<TargetBelief> {
    s.targets
        .iter()
        .map(|t| {
            let mut rng = stream(s.seed, Purpose::BeliefInit, t.id as u64);
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            TargetBelief::new(
                t.id,
                t.pos + Vector2::new(e1, e2) * s.sigma_init,
                Matrix2::identity() * (s.sigma_init * s.sigma_init),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Greedy,
    Exhaustive,
    Random,
}

/// Solves one assignment epoch on predicted beliefs.
pub fn solve(
    s: &Scenario,
    robots: &[RobotState],
    predicted: &[TargetBelief],
    solver: Solver,
    budget: u128,
    random_stream: &mut impl Rng,
) -> Result<Assignment> {
    let model = TrackingQuality {
        robots,
        beliefs: predicted,
        sensor: s.sensor,
        motion: s.motion,
        metric: s.metric,
    };
    let n = s.tuple_size;
    let m = predicted.len();
    match solver {
        Solver::Greedy => greedy_assign(n, &s.roster, m, &model),
        Solver::Exhaustive => exhaustive_assign(
            n,
            &s.roster,
            m,
            &model,
            &ExhaustiveOptions {
                budget,
                branch_and_bound: false,
            },
        )
        .map(|o| o.assignment),
        Solver::Random => random_assign(n, &s.roster, m, &model, random_stream),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMetrics {
    pub id: usize,
    pub trace: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mean_trace: f64,
    /// Mean Euclidean estimation error over targets, m.
    pub err_t: f64,
    pub per_target: Vec<TargetMetrics>,
}

pub fn compute_metrics(beliefs: &[TargetBelief], truths: &[TargetTruth]) -> Result<Metrics> {
    if beliefs.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: beliefs.len(),
            right: truths.len(),
        });
    }
    let per_target: Vec<TargetMetrics> = beliefs
        .iter()
        .zip(truths)
        .map(|(b, t)| TargetMetrics {
            id: t.id,
            trace: b.cov.trace(),
            err: (b.mean - t.pos).norm(),
        })
        .collect();
    let m = per_target.len().max(1) as f64;
    Ok(Metrics {
        mean_trace: per_target.iter().map(|p| p.trace).sum::<f64>() / m,
        err_t: per_target.iter().map(|p| p.err).sum::<f64>() / m,
        per_target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleSummary {
    pub target: usize,
    pub robots: Vec<usize>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based; step 0 is the initial belief.
    pub t: usize,
    pub assignment: Vec<TupleSummary>,
    pub metrics: Metrics,
    pub total_quality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub initial: Metrics,
    pub steps: Vec<StepRecord>,
    /// Robots left without a target (same at every step).
    pub idle_robots: Vec<usize>,
}

/// Mutable state of a rollout: robots, ground truth, beliefs and the
/// per-target noise streams.
struct World {
    robots: Vec<RobotState>,
    truths: Vec<TargetTruth>,
    beliefs: Vec<TargetBelief>,
    process: Vec<ChaCha8Rng>,
    sensing: Vec<ChaCha8Rng>,
}

impl World {
    fn new(s: &Scenario) -> Self {
        let m = s.targets.len() as u64;
        Self {
            robots: s.robots.clone(),
            truths: s.targets.clone(),
            beliefs: initial_beliefs(s),
            process: (0..m).map(|j| stream(s.seed, Purpose::ProcessNoise, j)).collect(),
            sensing: (0..m).map(|j| stream(s.seed, Purpose::MeasurementNoise, j)).collect(),
        }
    }

    fn predicted(&self, dt: f64) -> Vec<TargetBelief> {
        self.beliefs
            .iter()
            .zip(&self.truths)
            .map(|(b, truth)| predict(b, truth, dt))
            .collect()
    }

    /// Moves robots (idle ones hold their idle action), moves targets, then
    /// fuses each target's measurement into its predicted belief. Targets
    /// whose observers sit on top of them keep the prediction.
    fn advance(&mut self, s: &Scenario, predicted: &[TargetBelief], assignment: &Assignment) {
        let dt = s.motion.dt;
        self.robots = self
            .robots
            .iter()
            .map(|r| {
                let a = assignment.action_of(r.id).unwrap_or_else(|| s.roster.idle_action(r.id));
                robot_step(r, &a, dt)
            })
            .collect();
        self.truths = self
            .truths
            .iter()
            .zip(self.process.iter_mut())
            .map(|(tr, rng)| target_step_sample(tr, dt, rng))
            .collect();
        let robots = &self.robots;
        self.beliefs = predicted
            .iter()
            .zip(&assignment.per_target)
            .zip(self.truths.iter().zip(self.sensing.iter_mut()))
            .map(|((prior, tuple), (truth, rng))| {
                let observers: Vec<RobotState> = tuple.iter().map(|a| robots[a.robot_id]).collect();
                measure_and_update(s, prior, &observers, &truth.pos, rng).unwrap_or(*prior)
            })
            .collect();
    }
}

/// Closed loop. Each step predicts the beliefs, solves the assignment on
/// them, moves the robots and targets, senses from the new poses and runs
/// the EKF update.
pub fn run_tracking(s: &Scenario, solver: Solver, steps: usize, budget: u128) -> Result<TrackingRun> {
    s.validate()?;
    if steps == 0 {
        return Err(Error::InvalidConfig("at least one step is required".into()));
    }
    let m = s.targets.len();
    let mut world = World::new(s);
    let mut random_stream = stream(s.seed, Purpose::RandomSolver, 0);

    let initial = compute_metrics(&world.beliefs, &world.truths)?;
    let mut records = Vec::with_capacity(steps);
    let mut idle_robots = Vec::new();

    for t in 1..=steps {
        let predicted = world.predicted(s.motion.dt);
        let assignment = solve(s, &world.robots, &predicted, solver, budget, &mut random_stream)?;
        let violations = validate_assignment(&assignment, &s.roster, m);
        debug_assert!(violations.is_empty(), "{violations:?}");
        idle_robots = assignment.idle_robots(world.robots.len());

        world.advance(s, &predicted, &assignment);

        records.push(StepRecord {
            t,
            assignment: assignment
                .per_target
                .iter()
                .enumerate()
                .map(|(target, tuple)| TupleSummary {
                    target,
                    robots: tuple.iter().map(|a| a.robot_id).collect(),
                    actions: tuple.iter().map(|a| a.action_idx).collect(),
                })
                .collect(),
            metrics: compute_metrics(&world.beliefs, &world.truths)?,
            total_quality: assignment.total_quality,
        });
    }
    Ok(TrackingRun {
        initial,
        steps: records,
        idle_robots,
    })
}

fn measure_and_update(
    s: &Scenario,
    prior: &TargetBelief,
    observers: &[RobotState],
    truth: &Vector2<f64>,
    rng: &mut impl Rng,
) -> Result<TargetBelief> {
    let z = if s.noiseless_measurements {
        predict_measurement(observers, truth, &s.sensor)?
    } else {
        sample_measurement(observers, truth, &s.sensor, rng)?
    };
    let obs = build_observation(observers, &prior.mean, &s.sensor)?;
    let z_pred = predict_measurement(observers, &prior.mean, &s.sensor)?;
    update(prior, &obs, &z, &z_pred)
}

/// Settings for a greedy-versus-baselines sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSpec {
    pub tuple_size: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub actions: usize,
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
    pub metric: QualityMetric,
    pub sigma_init: f64,
    pub target_sigma: f64,
    pub budget: u128,
    /// Greedy closed-loop steps run before the compared epoch; 0 compares on
    /// a fresh scenario.
    pub warmup_steps: usize,
}

impl ComparisonSpec {
    pub fn new(tuple_size: usize, m_min: usize, m_max: usize, trials: usize) -> Self {
        let base = ScenarioSpec::new(0, tuple_size, tuple_size, 1);
        Self {
            tuple_size,
            m_min,
            m_max,
            trials,
            base_seed: 0,
            actions: base.actions,
            sensor: base.sensor,
            motion: base.motion,
            metric: base.metric,
            sigma_init: base.sigma_init,
            target_sigma: base.target_sigma,
            budget: DEFAULT_BUDGET,
            warmup_steps: 0,
        }
    }

    fn scenario_spec(&self, seed: u64, targets: usize) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            robots: self.tuple_size * targets,
            targets,
            tuple_size: self.tuple_size,
            actions: self.actions,
            sensor: self.sensor,
            motion: self.motion,
            metric: self.metric,
            sigma_init: self.sigma_init,
            target_speed: DEFAULT_TARGET_SPEED,
            target_omega: None,
            target_sigma: self.target_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub n: usize,
    pub robots: usize,
    pub targets: usize,
    pub actions: usize,
    pub seed: u64,
    pub q_greedy: f64,
    pub q_opt: Option<f64>,
    pub q_bound: f64,
    pub t_greedy_s: f64,
    pub t_opt_s: Option<f64>,
    pub t_bound_s: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}

impl ComparisonRecord {
    /// `q_greedy / q_opt`; 1 when both are zero.
    pub fn ratio_opt(&self) -> Option<f64> {
        self.q_opt.map(|o| ratio(self.q_greedy, o))
    }

    pub fn ratio_bound(&self) -> f64 {
        ratio(self.q_greedy, self.q_bound)
    }
}

/// Seed of trial `trial` at size `targets`.
pub fn trial_seed(base: u64, targets: usize, trial: usize) -> u64 {
    mix(mix(base ^ ((targets as u64) << 32)) ^ trial as u64)
}

/// Robot poses and predicted beliefs a comparison epoch is solved on, after
/// `warmup_steps` greedy closed-loop steps.
pub fn comparison_instance(s: &Scenario, warmup_steps: usize) -> Result<(Vec<RobotState>, Vec<TargetBelief>)> {
    let mut world = World::new(s);
    let mut unused = stream(s.seed, Purpose::RandomSolver, 0);
    for _ in 0..warmup_steps {
        let predicted = world.predicted(s.motion.dt);
        let a = solve(s, &world.robots, &predicted, Solver::Greedy, 0, &mut unused)?;
        world.advance(s, &predicted, &a);
    }
    let predicted = world.predicted(s.motion.dt);
    Ok((world.robots, predicted))
}

fn compare_one(spec: &ComparisonSpec, targets: usize, trial: usize) -> Result<ComparisonRecord> {
    let seed = trial_seed(spec.base_seed, targets, trial);
    let s = generate_scenario(&spec.scenario_spec(seed, targets))?;
    let (robots, predicted) = comparison_instance(&s, spec.warmup_steps)?;
    let model = TrackingQuality {
        robots: &robots,
        beliefs: &predicted,
        sensor: s.sensor,
        motion: s.motion,
        metric: s.metric,
    };
    let n = s.tuple_size;

    let clock = Instant::now();
    let greedy = greedy_assign(n, &s.roster, targets, &model)?;
    let t_greedy_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let opt = match exhaustive_assign(
        n,
        &s.roster,
        targets,
        &model,
        &ExhaustiveOptions {
            budget: spec.budget,
            branch_and_bound: false,
        },
    ) {
        Ok(o) => Some(o.assignment.total_quality),
        Err(Error::BudgetExceeded { count, budget }) => {
            log::info!("exhaustive skipped for M={targets}: {count} combinations exceed budget {budget}");
            None
        }
        Err(Error::CountOverflow) => {
            log::info!("exhaustive skipped for M={targets}: combination count overflows 128 bits");
            None
        }
        Err(e) => return Err(e),
    };
    let t_opt_s = opt.map(|_| clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let bound = relaxed_upper_bound(n, &s.roster, targets, &model)?;
    let t_bound_s = clock.elapsed().as_secs_f64();

    Ok(ComparisonRecord {
        n,
        robots: s.robots.len(),
        targets,
        actions: spec.actions,
        seed,
        q_greedy: greedy.total_quality,
        q_opt: opt,
        q_bound: bound.value,
        t_greedy_s,
        t_opt_s,
        t_bound_s,
    })
}

/// One record per `(M, trial)`, sorted by `(M, seed)`. Trials run in
/// parallel.
pub fn run_comparison(spec: &ComparisonSpec) -> Result<Vec<ComparisonRecord>> {
    if spec.m_min == 0 || spec.m_min > spec.m_max {
        return Err(Error::InvalidConfig(format!(
            "target range {}..={} is empty or starts at zero",
            spec.m_min, spec.m_max
        )));
    }
    let jobs: Vec<(usize, usize)> = (spec.m_min..=spec.m_max)
        .flat_map(|m| (0..spec.trials).map(move |t| (m, t)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(m, t)| compare_one(spec, m, t))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.targets, r.seed));
    Ok(records)
}

/// Per-size means of a comparison sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub targets: usize,
    pub trials: usize,
    pub mean_ratio_opt: Option<f64>,
    pub min_ratio_opt: Option<f64>,
    pub mean_ratio_bound: f64,
    pub min_ratio_bound: f64,
}

pub fn summarize(records: &[ComparisonRecord]) -> Vec<SizeSummary> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.targets).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|m| {
            let rs: Vec<&ComparisonRecord> = records.iter().filter(|r| r.targets == m).collect();
            let k = rs.len() as f64;
            let opt: Vec<f64> = rs.iter().filter_map(|r| r.ratio_opt()).collect();
            let (mean_ratio_opt, min_ratio_opt) = if opt.len() == rs.len() && !opt.is_empty() {
                (
                    Some(opt.iter().sum::<f64>() / opt.len() as f64),
                    Some(opt.iter().copied().fold(f64::INFINITY, f64::min)),
                )
            } else {
                (None, None)
            };
            SizeSummary {
                targets: m,
                trials: rs.len(),
                mean_ratio_opt,
                min_ratio_opt,
                mean_ratio_bound: rs.iter().map(|r| r.ratio_bound()).sum::<f64>() / k,
                min_ratio_bound: rs.iter().map(|r| r.ratio_bound()).fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}
