//! Per-target extended Kalman filter and the tracking-quality functional.

use nalgebra::{DMatrix, Dyn, Matrix2, OMatrix, RowVector2, Vector2, U2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{wrap_finite, TargetBelief, TargetTruth};
use crate::motion::circular_step;
use crate::sensing::{Channel, ObservationModel};

/// Innovation covariances worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Scalar summary of a covariance. Quality is the drop in this value caused
/// by a measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum QualityMetric {
    #[default]
    TraceReduction,
    LogDetReduction,
    MaxEigReduction,
}

impl QualityMetric {
    fn functional(self, cov: &Matrix2<f64>) -> Result<f64> {
        match self {
            QualityMetric::TraceReduction => Ok(cov.trace()),
            QualityMetric::MaxEigReduction => Ok(linalg::max_eigenvalue(cov)),
            QualityMetric::LogDetReduction => {
                let det = cov.determinant();
                if det > 0.0 {
                    Ok(det.ln())
                } else {
                    Err(Error::FilterDegenerate {
                        condition: f64::INFINITY,
                    })
                }
            }
        }
    }
}

/// Time update. The displacement does not depend on the state, so the motion
/// Jacobian is the identity and only `σ²I` is added to the covariance.
pub fn predict(b: &TargetBelief, motion: &TargetTruth, dt: f64) -> TargetBelief {
    let mean = circular_step(&b.mean, motion.v, motion.omega, motion.phase, dt);
    let cov = linalg::symmetrize(&(b.cov + Matrix2::identity() * (motion.sigma * motion.sigma)));
    TargetBelief { id: b.id, mean, cov }
}

struct Gain {
    /// Kᵀ, one row per measurement.
    kt: OMatrix<f64, Dyn, U2>,
    posterior: Matrix2<f64>,
}

fn gain(cov: &Matrix2<f64>, obs: &ObservationModel) -> Result<Gain> {
    let h = &obs.h;
    let r = &obs.noise_var;
    let k = obs.rows();
    let hp: OMatrix<f64, Dyn, U2> =
        OMatrix::from_fn_generic(Dyn(k), U2, |i, j| h[(i, 0)] * cov[(0, j)] + h[(i, 1)] * cov[(1, j)]);
    let s = DMatrix::from_fn(k, k, |i, j| {
        let v = hp[(i, 0)] * h[(j, 0)] + hp[(i, 1)] * h[(j, 1)];
        if i == j {
            v + r[i]
        } else {
            v
        }
    });
    let condition = linalg::condition_estimate(&s);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::FilterDegenerate { condition });
    }
    let chol = s.cholesky().ok_or(Error::FilterDegenerate { condition })?;
    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let kt = chol.solve(&hp);
    let mut kh = Matrix2::zeros();
    let mut krk = Matrix2::zeros();
    for i in 0..k {
        let ki = Vector2::new(kt[(i, 0)], kt[(i, 1)]);
        kh += ki * RowVector2::new(h[(i, 0)], h[(i, 1)]);
        krk += ki * ki.transpose() * r[i];
    }
    let i_kh = Matrix2::identity() - kh;
    let joseph = i_kh * cov * i_kh.transpose() + krk;
    Ok(Gain {
        kt,
        posterior: linalg::symmetrize(&joseph),
    })
}

/// Posterior covariance after incorporating `obs`, Joseph form. Independent
/// of the measured values.
pub fn posterior_cov(cov: &Matrix2<f64>, obs: &ObservationModel) -> Result<Matrix2<f64>> {
    gain(cov, obs).map(|g| g.posterior)
}

/// Measurement update. Bearing innovations are wrapped to `(-π, π]`.
pub fn update(b: &TargetBelief, obs: &ObservationModel, z: &[f64], z_pred: &[f64]) -> Result<TargetBelief> {
    let k = obs.rows();
    if z.len() != k {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: k,
        });
    }
    if z_pred.len() != k {
        return Err(Error::LengthMismatch {
            left: z_pred.len(),
            right: k,
        });
    }
    let g = gain(&b.cov, obs)?;
    let mut dx = Vector2::zeros();
    for (i, (ch, (zi, pi))) in obs.channels.iter().zip(z.iter().zip(z_pred)).enumerate() {
        let nu = match ch {
            Channel::Range => zi - pi,
            Channel::Bearing => wrap_finite(zi - pi),
        };
        dx += Vector2::new(g.kt[(i, 0)], g.kt[(i, 1)]) * nu;
    }
    Ok(TargetBelief {
        id: b.id,
        mean: b.mean + dx,
        cov: g.posterior,
    })
}

/// Tracking quality: `metric(prior) − metric(posterior)`.
pub fn quality(b_prior: &TargetBelief, obs: &ObservationModel, metric: QualityMetric) -> Result<f64> {
    let post = posterior_cov(&b_prior.cov, obs)?;
    let q = metric.functional(&b_prior.cov)? - metric.functional(&post)?;
    if !q.is_finite() {
        return Err(Error::NonFinite("quality"));
    }
    // rounding can leave a few ulps below zero
    Ok(q.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use nalgebra::Vector2;
    use proptest::prelude::*;
    use rand::Rng;

    fn belief(cov: Matrix2<f64>) -> TargetBelief {
        TargetBelief::new(0, Vector2::new(1.0, -2.0), cov)
    }

    fn obs(rows: &[[f64; 2]], var: &[f64], channels: Vec<Channel>) -> ObservationModel {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        ObservationModel::new(DMatrix::from_row_slice(rows.len(), 2, &flat), var.to_vec(), channels)
    }

    fn range_rows(rows: &[[f64; 2]], var: &[f64]) -> ObservationModel {
        obs(rows, var, vec![Channel::Range; rows.len()])
    }

    fn motion(v: f64, omega: f64, sigma: f64) -> TargetTruth {
        TargetTruth {
            id: 0,
            pos: Vector2::zeros(),
            v,
            omega,
            phase: 0.3,
            sigma,
        }
    }

    /// Scalar Kalman updates applied one channel at a time, written without
    /// any shared code from the stacked path.
    fn sequential_scalar(
        mut mean: [f64; 2],
        mut p: [[f64; 2]; 2],
        rows: &[[f64; 2]],
        var: &[f64],
        innov: &[f64],
    ) -> ([f64; 2], [[f64; 2]; 2]) {
        for ((h, &r), &nu0) in rows.iter().zip(var).zip(innov) {
            let ph = [p[0][0] * h[0] + p[0][1] * h[1], p[1][0] * h[0] + p[1][1] * h[1]];
            let s = h[0] * ph[0] + h[1] * ph[1] + r;
            let k = [ph[0] / s, ph[1] / s];
            // innovation relative to the running mean keeps this equal to the batch update
            let nu = nu0 - (h[0] * (mean[0]) + h[1] * (mean[1]));
            mean = [mean[0] + k[0] * nu, mean[1] + k[1] * nu];
            let mut np = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    np[i][j] = p[i][j] - k[i] * ph[j];
                }
            }
            p = np;
        }
        (mean, p)
    }

    #[test]
    fn predict_examples() {
        let b = belief(Matrix2::new(2.0, 0.1, 0.1, 1.0));
        assert_eq!(predict(&b, &motion(0.0, 0.4, 0.0), 0.5), b);
        let p = predict(&belief(Matrix2::identity()), &motion(1.2, 0.0, 0.5), 0.5);
        assert_eq!(p.cov, Matrix2::identity() * 1.25);
        assert!(p.cov.trace() >= 2.0);
        let expected = Vector2::new(1.0 + 1.2 * 0.3f64.cos(), -2.0 + 1.2 * 0.3f64.sin());
        assert!((p.mean - expected).norm() < 1e-15);
    }

    #[test]
    fn scalar_update_example() {
        let b = belief(Matrix2::identity());
        let o = range_rows(&[[1.0, 0.0]], &[1.0]);
        let post = update(&b, &o, &[3.0], &[3.0]).unwrap();
        assert!((post.cov - Matrix2::new(0.5, 0.0, 0.0, 1.0)).norm() < 1e-15);
        assert_eq!(post.mean, b.mean);
        let q = quality(&b, &o, QualityMetric::TraceReduction).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uninformative_measurement() {
        let b = belief(Matrix2::new(2.0, 0.3, 0.3, 1.0));
        let o = range_rows(&[[0.6, 0.8]], &[1e12]);
        let post = update(&b, &o, &[1.0], &[0.0]).unwrap();
        assert!((post.cov - b.cov).norm() <= 1e-6 * b.cov.norm());
        assert!(quality(&b, &o, QualityMetric::TraceReduction).unwrap() < 1e-9);
    }

    #[test]
    fn perfect_full_state_measurement() {
        let b = belief(Matrix2::new(2.0, 0.3, 0.3, 1.0));
        let o = range_rows(&[[1.0, 0.0], [0.0, 1.0]], &[1e-12, 1e-12]);
        let post = update(&b, &o, &[0.5, -0.25], &[0.0, 0.0]).unwrap();
        assert!(post.cov.trace() < 1e-9);
        assert!((post.mean - (b.mean + Vector2::new(0.5, -0.25))).norm() < 1e-9);
    }

    #[test]
    fn stacked_identical_rows_beat_one_row() {
        let b = belief(Matrix2::new(1.5, 0.2, 0.2, 0.8));
        let one = range_rows(&[[0.6, 0.8]], &[0.3]);
        let two = range_rows(&[[0.6, 0.8], [0.6, 0.8]], &[0.3, 0.3]);
        let q1 = quality(&b, &one, QualityMetric::TraceReduction).unwrap();
        let q2 = quality(&b, &two, QualityMetric::TraceReduction).unwrap();
        assert!(q2 > q1, "{q2} <= {q1}");
    }

    #[test]
    fn bearing_innovation_is_wrapped() {
        let b = belief(Matrix2::identity());
        let o = obs(&[[0.0, 0.2]], &[0.01], vec![Channel::Bearing]);
        let pi = std::f64::consts::PI;
        let wrapped = update(&b, &o, &[pi - 0.01], &[-pi + 0.01]).unwrap();
        let direct = update(&b, &o, &[-0.02], &[0.0]).unwrap();
        assert!((wrapped.mean - direct.mean).norm() < 1e-12);
    }

    #[test]
    fn errors() {
        let b = belief(Matrix2::identity());
        let o = range_rows(&[[1.0, 0.0]], &[1.0]);
        assert!(matches!(
            update(&b, &o, &[1.0, 2.0], &[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(update(&b, &o, &[1.0], &[]), Err(Error::LengthMismatch { .. })));
        // identical rows with negligible noise make S rank one
        let o = range_rows(&[[1.0, 0.0], [1.0, 0.0]], &[1e-30, 1e-30]);
        assert!(matches!(
            posterior_cov(&Matrix2::identity(), &o),
            Err(Error::FilterDegenerate { .. })
        ));
    }

    fn random_cov<R: Rng>(rng: &mut R) -> Matrix2<f64> {
        let a = Matrix2::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        a * a.transpose() + Matrix2::identity() * 0.05
    }

    fn random_obs<R: Rng>(rng: &mut R, min_var: f64) -> ObservationModel {
        let k = rng.random_range(1..=4);
        let mut rows = Vec::new();
        let mut var = Vec::new();
        let mut channels = Vec::new();
        for _ in 0..k {
            let ang: f64 = rng.random_range(-3.1..3.1);
            let d: f64 = rng.random_range(0.5..20.0);
            if rng.random_bool(0.5) {
                rows.push([ang.cos(), ang.sin()]);
                channels.push(Channel::Range);
            } else {
                rows.push([-ang.sin() / d, ang.cos() / d]);
                channels.push(Channel::Bearing);
            }
            var.push(10f64.powf(rng.random_range(min_var.log10()..0.0)));
        }
        obs(&rows, &var, channels)
    }

    #[test]
    fn posterior_never_exceeds_prior() {
        let mut rng = stream(2024, Purpose::Scenario, 0);
        for _ in 0..1000 {
            let cov = random_cov(&mut rng);
            let o = random_obs(&mut rng, 1e-4);
            let post = posterior_cov(&cov, &o).unwrap();
            assert!(linalg::min_eigenvalue(&(cov - post)) >= -1e-9);
            assert!(linalg::min_eigenvalue(&post) >= -1e-9);
            let b = belief(cov);
            for m in [
                QualityMetric::TraceReduction,
                QualityMetric::LogDetReduction,
                QualityMetric::MaxEigReduction,
            ] {
                assert!(quality(&b, &o, m).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn joseph_matches_simple_form_and_stays_psd() {
        let mut rng = stream(77, Purpose::Scenario, 0);
        for _ in 0..300 {
            let cov = random_cov(&mut rng);
            let o = random_obs(&mut rng, 1e-2);
            let p = DMatrix::from_column_slice(2, 2, cov.as_slice());
            let s = &o.h * &p * o.h.transpose() + o.r();
            let k = &p * o.h.transpose() * s.try_inverse().unwrap();
            let simple = (DMatrix::identity(2, 2) - &k * &o.h) * &p;
            let joseph = posterior_cov(&cov, &o).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((joseph[(i, j)] - simple[(i, j)]).abs() < 1e-8);
                }
            }
        }
        for _ in 0..300 {
            let cov = random_cov(&mut rng);
            let ang: f64 = rng.random_range(-3.0..3.0);
            let o = range_rows(&[[ang.cos(), ang.sin()]], &[1e-10]);
            let post = posterior_cov(&cov, &o).unwrap();
            assert!(linalg::min_eigenvalue(&post) >= -1e-9);
        }
    }

    #[test]
    fn stacked_update_equals_sequential_scalar_updates() {
        let mut rng = stream(5, Purpose::Scenario, 0);
        for _ in 0..500 {
            let cov = random_cov(&mut rng);
            let k = rng.random_range(1..=4);
            let rows: Vec<[f64; 2]> = (0..k)
                .map(|_| {
                    let a: f64 = rng.random_range(-3.1..3.1);
                    [a.cos(), a.sin()]
                })
                .collect();
            let var: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..2.0)).collect();
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b = TargetBelief::new(0, Vector2::new(0.7, -0.4), cov);
            // linear model: z_pred = H·mean
            let zp: Vec<f64> = rows.iter().map(|h| h[0] * b.mean.x + h[1] * b.mean.y).collect();
            let stacked = update(&b, &range_rows(&rows, &var), &z, &zp).unwrap();
            let (m, p) = sequential_scalar(
                [b.mean.x, b.mean.y],
                [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
                &rows,
                &var,
                &z,
            );
            assert!((stacked.mean.x - m[0]).abs() < 1e-8 && (stacked.mean.y - m[1]).abs() < 1e-8);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((stacked.cov[(i, j)] - p[i][j]).abs() < 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn quality_ignores_measurement_values(seed in 0u64..10_000, z0 in -5.0f64..5.0, z1 in -5.0f64..5.0) {
            let mut rng = stream(seed, Purpose::Scenario, 0);
            let cov = random_cov(&mut rng);
            let o = range_rows(&[[0.6, 0.8], [-0.8, 0.6]], &[0.2, 0.4]);
            let b = belief(cov);
            let before = quality(&b, &o, QualityMetric::TraceReduction).unwrap();
            let updated = update(&b, &o, &[z0, z1], &[0.0, 0.0]).unwrap();
            let again = update(&b, &o, &[z1, z0], &[0.0, 0.0]).unwrap();
            prop_assert_eq!(updated.cov, again.cov);
            prop_assert!((b.cov.trace() - updated.cov.trace() - before).abs() < 1e-12);
        }

        #[test]
        fn quality_matches_information_form(seed in 0u64..10_000) {
            let mut rng = stream(seed, Purpose::Scenario, 1);
            let cov = random_cov(&mut rng);
            let o = random_obs(&mut rng, 1e-2);
            let mut info = cov.try_inverse().unwrap();
            for i in 0..o.rows() {
                let h = nalgebra::Vector2::new(o.h[(i, 0)], o.h[(i, 1)]);
                info += h * h.transpose() / o.noise_var[i];
            }
            let post = info.try_inverse().unwrap();
            let b = belief(cov);
            let q = quality(&b, &o, QualityMetric::TraceReduction).unwrap();
            prop_assert!((q - (cov.trace() - post.trace())).abs() < 1e-8 * cov.trace().max(1.0));
            let ql = quality(&b, &o, QualityMetric::LogDetReduction).unwrap();
            prop_assert!((ql - (cov.determinant().ln() - post.determinant().ln())).abs() < 1e-7);
        }
    }
}
