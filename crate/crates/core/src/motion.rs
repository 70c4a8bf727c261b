//! Discrete-time kinematics: unicycle robots and noisy circular targets.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{wrap_finite, Action, RobotState, TargetTruth};

pub const DEFAULT_DT: f64 = 0.5;
/// Half side of the default 20 m × 20 m world.
pub const DEFAULT_WORLD_HALF_EXTENT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    /// Time between steps, s.
    pub dt: f64,
    /// Scenarios place everything inside `[-h, h]²`.
    pub world_half_extent: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            world_half_extent: DEFAULT_WORLD_HALF_EXTENT,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.world_half_extent > 0.0 && self.world_half_extent.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "world half extent must be positive, got {}",
                self.world_half_extent
            )));
        }
        Ok(())
    }
}

/// Unicycle update. The position increment uses the heading from before the
/// step.
pub fn robot_step(s: &RobotState, a: &Action, dt: f64) -> RobotState {
    let theta = s.theta();
    RobotState::new(
        s.id,
        s.x1 + a.v * dt * theta.cos(),
        s.x2 + a.v * dt * theta.sin(),
        theta + dt * a.omega,
    )
}

/// Deterministic part of the target motion: one step along the circle with
/// the accumulated phase advanced by `dt·ω`. The displacement length is `v`
/// per step.
pub fn target_mean_step(t: &TargetTruth, dt: f64) -> Vector2<f64> {
    circular_step(&t.pos, t.v, t.omega, t.phase, dt)
}

pub(crate) fn circular_step(pos: &Vector2<f64>, v: f64, omega: f64, phase: f64, dt: f64) -> Vector2<f64> {
    let heading = phase + dt * omega;
    pos + Vector2::new(v * heading.cos(), v * heading.sin())
}

/// Samples the next ground-truth state with `N(0, σ²I)` process noise.
pub fn target_step_sample<R: Rng + ?Sized>(t: &TargetTruth, dt: f64, rng: &mut R) -> TargetTruth {
    let mean = target_mean_step(t, dt);
    let w1: f64 = rng.sample(StandardNormal);
    let w2: f64 = rng.sample(StandardNormal);
    TargetTruth {
        pos: mean + Vector2::new(w1, w2) * t.sigma,
        phase: wrap_finite(t.phase + dt * t.omega),
        ..*t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn act(v: f64, omega: f64) -> Action {
        Action {
            robot_id: 0,
            action_idx: 0,
            v,
            omega,
        }
    }

    fn truth(v: f64, omega: f64, sigma: f64) -> TargetTruth {
        TargetTruth {
            id: 0,
            pos: Vector2::zeros(),
            v,
            omega,
            phase: 0.0,
            sigma,
        }
    }

    #[test]
    fn robot_translation() {
        let s = robot_step(&RobotState::new(0, 0.0, 0.0, 0.0), &act(1.5, 0.0), 1.0);
        assert_eq!((s.x1, s.x2, s.theta()), (1.5, 0.0, 0.0));
    }

    #[test]
    fn null_action_is_identity() {
        let s0 = RobotState::new(3, -2.0, 4.5, 1.1);
        assert_eq!(robot_step(&s0, &act(0.0, 0.0), 0.5), s0);
    }

    #[test]
    fn heading_update_uses_pre_step_heading() {
        let s = robot_step(&RobotState::new(0, 0.0, 0.0, FRAC_PI_2), &act(2.0, 0.5), 0.1);
        assert!(s.x1.abs() < 1e-15);
        assert!((s.x2 - 0.2).abs() < 1e-15);
        assert!((s.theta() - (FRAC_PI_2 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn heading_stays_wrapped() {
        let mut s = RobotState::new(0, 0.0, 0.0, 3.0);
        for _ in 0..50 {
            s = robot_step(&s, &act(1.5, 0.7), 0.5);
            assert!(s.theta() > -PI && s.theta() <= PI);
        }
    }

    #[test]
    fn straight_line_is_exact() {
        let theta = 0.3;
        let start = RobotState::new(0, 1.0, 2.0, theta);
        let a = act(1.5, 0.0);
        let mut s = start;
        for k in 1..=20 {
            s = robot_step(&s, &a, 0.5);
            let mut x1 = start.x1;
            let mut x2 = start.x2;
            for _ in 0..k {
                x1 += 1.5 * 0.5 * theta.cos();
                x2 += 1.5 * 0.5 * theta.sin();
            }
            assert_eq!((s.x1, s.x2), (x1, x2));
        }
    }

    #[test]
    fn target_mean_examples() {
        assert_eq!(target_mean_step(&truth(1.2, 0.0, 0.0), 0.5), Vector2::new(1.2, 0.0));
        let still = TargetTruth {
            pos: Vector2::new(3.0, -1.0),
            ..truth(0.0, 0.4, 0.0)
        };
        assert_eq!(target_mean_step(&still, 0.5), still.pos);
        let dt = 0.5;
        let p = target_mean_step(&truth(1.0, FRAC_PI_2 / dt, 0.0), dt);
        assert!(p.x.abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_sample_matches_mean_and_advances_phase() {
        let t = truth(1.2, 0.3, 0.0);
        let mut rng = stream(1, Purpose::ProcessNoise, 0);
        let next = target_step_sample(&t, 0.5, &mut rng);
        assert_eq!(next.pos, target_mean_step(&t, 0.5));
        assert_eq!(next.phase, 0.15);
        assert_eq!((next.v, next.omega, next.sigma, next.id), (t.v, t.omega, t.sigma, t.id));
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = truth(1.2, 0.3, 0.5);
        let a = target_step_sample(&t, 0.5, &mut stream(9, Purpose::ProcessNoise, 2));
        let b = target_step_sample(&t, 0.5, &mut stream(9, Purpose::ProcessNoise, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn process_noise_moments() {
        let t = truth(0.0, 0.0, 0.1);
        let mut rng = stream(42, Purpose::ProcessNoise, 0);
        let n = 100_000;
        let (mut s1, mut s2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let w = target_step_sample(&t, 0.5, &mut rng).pos;
            s1 += w.x;
            s2 += w.y;
            q1 += w.x * w.x;
            q2 += w.y * w.y;
        }
        let nf = n as f64;
        let tol = 3.0 * 0.1 / nf.sqrt();
        assert!((s1 / nf).abs() < tol && (s2 / nf).abs() < tol);
        for q in [q1, q2] {
            let var = q / nf;
            assert!((var - 0.01).abs() < 0.05 * 0.01, "variance {var}");
        }
    }

    #[test]
    fn noiseless_targets_turn_by_dt_omega() {
        let dt = 0.5;
        let mut t = TargetTruth {
            pos: Vector2::new(2.0, -3.0),
            phase: 0.7,
            ..truth(1.2, 0.6, 0.0)
        };
        let mut rng = stream(0, Purpose::ProcessNoise, 0);
        let mut pts = vec![t.pos];
        for _ in 0..40 {
            t = target_step_sample(&t, dt, &mut rng);
            pts.push(t.pos);
        }
        for w in pts.windows(3) {
            let d0 = w[1] - w[0];
            let d1 = w[2] - w[1];
            let turn = wrap_finite(d1.y.atan2(d1.x) - d0.y.atan2(d0.x));
            assert!((turn - dt * 0.6).abs() < 1e-9);
        }
    }

    #[test]
    fn per_target_streams_ignore_update_order() {
        let targets: Vec<TargetTruth> = (0..3)
            .map(|id| TargetTruth {
                id,
                ..truth(1.2, 0.2, 0.3)
            })
            .collect();
        let run = |order: &[usize]| {
            let mut ts = targets.clone();
            let mut rngs: Vec<_> = (0..3).map(|j| stream(5, Purpose::ProcessNoise, j as u64)).collect();
            for _ in 0..10 {
                for &j in order {
                    ts[j] = target_step_sample(&ts[j], 0.5, &mut rngs[j]);
                }
            }
            ts
        };
        assert_eq!(run(&[0, 1, 2]), run(&[2, 0, 1]));
    }

    #[test]
    fn config_validation() {
        assert!(MotionConfig::default().validate().is_ok());
        assert!(MotionConfig {
            dt: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MotionConfig {
            world_half_extent: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
