//! Range and bearing sensors with distance-dependent noise, and the stacked
//! linearized observation model for a tuple of robots watching one target.

use nalgebra::{DMatrix, RowVector2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{wrap_finite, RobotState};

/// Robots closer than this to a target make the 1/d terms blow up.
pub const MIN_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    RangeBearing,
    RangeOnly,
    BearingOnly,
}

impl SensorKind {
    pub fn channels(self) -> &'static [Channel] {
        match self {
            SensorKind::RangeBearing => &[Channel::Range, Channel::Bearing],
            SensorKind::RangeOnly => &[Channel::Range],
            SensorKind::BearingOnly => &[Channel::Bearing],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Range,
    Bearing,
}

/// Noise std grows affinely with distance: `σ₀ + κ·d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub kind: SensorKind,
    pub sigma_r0: f64,
    pub kappa_r: f64,
    pub sigma_b0: f64,
    pub kappa_b: f64,
}

impl SensorConfig {
    pub fn with_kind(kind: SensorKind) -> Self {
        Self {
            kind,
            sigma_r0: 0.25,
            kappa_r: 0.03,
            sigma_b0: 0.02,
            kappa_b: 0.004,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let base_ok = self.sigma_r0 > 0.0 && self.sigma_b0 > 0.0;
        let growth_ok = self.kappa_r >= 0.0 && self.kappa_b >= 0.0;
        let finite = [self.sigma_r0, self.kappa_r, self.sigma_b0, self.kappa_b]
            .iter()
            .all(|x| x.is_finite());
        if base_ok && growth_ok && finite {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "sensor base stds must be positive and growth rates nonnegative".into(),
            ))
        }
    }
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self::with_kind(SensorKind::RangeBearing)
    }
}

/// Linearized measurement model: `H` is k×2, `R` is diagonal with the
/// variances in `noise_var`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub h: DMatrix<f64>,
    pub noise_var: Vec<f64>,
    pub channels: Vec<Channel>,
}

impl ObservationModel {
    pub fn new(h: DMatrix<f64>, noise_var: Vec<f64>, channels: Vec<Channel>) -> Self {
        debug_assert_eq!(h.nrows(), noise_var.len());
        debug_assert_eq!(h.nrows(), channels.len());
        debug_assert_eq!(h.ncols(), 2);
        Self { h, noise_var, channels }
    }

    pub fn rows(&self) -> usize {
        self.noise_var.len()
    }

    pub fn r(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.noise_var))
    }
}

fn offset(robot_pos: &Vector2<f64>, target: &Vector2<f64>) -> Result<(Vector2<f64>, f64)> {
    let delta = target - robot_pos;
    let d = delta.norm();
    if !d.is_finite() {
        return Err(Error::NonFinite("robot-target distance"));
    }
    if d <= MIN_DISTANCE {
        return Err(Error::DegenerateGeometry { distance: d });
    }
    Ok((delta, d))
}

pub fn range_measure(robot: &RobotState, target_pos: &Vector2<f64>) -> Result<f64> {
    offset(&robot.position(), target_pos).map(|(_, d)| d)
}

pub fn bearing_measure(robot: &RobotState, target_pos: &Vector2<f64>) -> Result<f64> {
    let (delta, _) = offset(&robot.position(), target_pos)?;
    Ok(wrap_finite(delta.y.atan2(delta.x) - robot.theta()))
}

/// Derivative of range w.r.t. target position: the unit vector from robot
/// to target.
pub fn range_jacobian(robot_pos: &Vector2<f64>, target_mean: &Vector2<f64>) -> Result<RowVector2<f64>> {
    let (delta, d) = offset(robot_pos, target_mean)?;
    Ok(RowVector2::new(delta.x / d, delta.y / d))
}

/// Derivative of bearing w.r.t. target position.
pub fn bearing_jacobian(robot_pos: &Vector2<f64>, target_mean: &Vector2<f64>) -> Result<RowVector2<f64>> {
    let (delta, d) = offset(robot_pos, target_mean)?;
    let d2 = d * d;
    Ok(RowVector2::new(-delta.y / d2, delta.x / d2))
}

pub fn noise_std(channel: Channel, d: f64, cfg: &SensorConfig) -> f64 {
    match channel {
        Channel::Range => cfg.sigma_r0 + cfg.kappa_r * d,
        Channel::Bearing => cfg.sigma_b0 + cfg.kappa_b * d,
    }
}

fn check_tuple(robots: &[RobotState], cfg: &SensorConfig) -> Result<()> {
    match (cfg.kind, robots.len()) {
        (_, 0) => Err(Error::InvalidConfig("observation needs at least one robot".into())),
        (SensorKind::RangeBearing, 1) => Ok(()),
        (SensorKind::RangeBearing, k) => Err(Error::InvalidConfig(format!(
            "range-bearing sensing uses one robot per target, got {k}"
        ))),
        _ => Ok(()),
    }
}

/// Stacks one block of rows per robot, linearized at `target_mean`.
pub fn build_observation(
    robots: &[RobotState],
    target_mean: &Vector2<f64>,
    cfg: &SensorConfig,
) -> Result<ObservationModel> {
    check_tuple(robots, cfg)?;
    let per = cfg.kind.channels();
    let k = robots.len() * per.len();
    let mut h = DMatrix::zeros(k, 2);
    let mut noise_var = Vec::with_capacity(k);
    let mut channels = Vec::with_capacity(k);
    let mut row = 0;
    for robot in robots {
        let p = robot.position();
        let (_, d) = offset(&p, target_mean)?;
        for &ch in per {
            let jac = match ch {
                Channel::Range => range_jacobian(&p, target_mean)?,
                Channel::Bearing => bearing_jacobian(&p, target_mean)?,
            };
            h.set_row(row, &jac);
            let s = noise_std(ch, d, cfg);
            noise_var.push(s * s);
            channels.push(ch);
            row += 1;
        }
    }
    Ok(ObservationModel::new(h, noise_var, channels))
}

/// Noise-free stacked measurement `h(x, y)`, in the same row order as
/// [`build_observation`].
pub fn predict_measurement(robots: &[RobotState], target_pos: &Vector2<f64>, cfg: &SensorConfig) -> Result<Vec<f64>> {
    check_tuple(robots, cfg)?;
    let mut z = Vec::with_capacity(robots.len() * cfg.kind.channels().len());
    for robot in robots {
        for &ch in cfg.kind.channels() {
            z.push(match ch {
                Channel::Range => range_measure(robot, target_pos)?,
                Channel::Bearing => bearing_measure(robot, target_pos)?,
            });
        }
    }
    Ok(z)
}

/// Noisy stacked measurement of the true target position. Noise stds are
/// evaluated at the true distances.
pub fn sample_measurement<R: Rng + ?Sized>(
    robots: &[RobotState],
    target_true: &Vector2<f64>,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let nominal = predict_measurement(robots, target_true, cfg)?;
    let per = cfg.kind.channels();
    let mut z = Vec::with_capacity(nominal.len());
    for (i, robot) in robots.iter().enumerate() {
        let d = range_measure(robot, target_true)?;
        for (c, &ch) in per.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            let value = nominal[i * per.len() + c] + noise_std(ch, d, cfg) * e;
            z.push(match ch {
                Channel::Range => value,
                Channel::Bearing => wrap_finite(value),
            });
        }
    }
    Ok(z)
}
