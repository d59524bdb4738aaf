use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::kinematics::{body_velocity_from_wheels, wheel_speeds, BodyVelocity, RobotPose, WheelSpeeds};
use crate::mapping::OccupancyGridMap;

/// Gaussian std-devs per channel. Pose units are camera units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub pose: f64,
    pub theta: f64,
    /// Per-wheel rim speed noise at each encoder sample.
    pub wheel: f64,
    /// Added to the commanded translational velocity once per tick.
    pub actuation: f64,
    pub actuation_omega: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            pose: 0.005,
            theta: 0.01,
            wheel: 0.002,
            actuation: 0.002,
            actuation_omega: 0.01,
        }
    }
}

impl NoiseModel {
    pub const OFF: NoiseModel = NoiseModel {
        pose: 0.0,
        theta: 0.0,
        wheel: 0.0,
        actuation: 0.0,
        actuation_omega: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        [self.pose, self.theta, self.wheel, self.actuation, self.actuation_omega]
            .iter()
            .all(|s| *s >= 0.0 && s.is_finite())
    }
}

/// Ground truth for the kinematic simulation.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub pose: RobotPose,
    pub map: OccupancyGridMap,
    pub dt: f64,
    /// Encoder samples per tick.
    pub substeps: usize,
    pub wheel_radius: f64,
    pub noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl SimWorld {
    pub fn new(pose: RobotPose, map: OccupancyGridMap, dt: f64, noise: NoiseModel, seed: u64) -> Self {
        SimWorld {
            pose,
            map,
            dt,
            substeps: 17,
            wheel_radius: 0.1,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma).expect("validated std-dev").sample(&mut self.rng)
    }

    /// Noisy `(x, z, θ)` from localization.
    pub fn measure_pose(&mut self) -> [f64; 3] {
        let (sp, st) = (self.noise.pose, self.noise.theta);
        [
            self.pose.x + self.gauss(sp),
            self.pose.z + self.gauss(sp),
            wrap_angle(self.pose.theta + self.gauss(st)),
        ]
    }

    /// Advances one tick and returns the body velocity averaged over the
    /// encoder samples taken during it.
    pub fn step(&mut self, cmd: &BodyVelocity) -> BodyVelocity {
        let actual = BodyVelocity {
            vx: cmd.vx + self.gauss(self.noise.actuation),
            vz: cmd.vz + self.gauss(self.noise.actuation),
            omega: cmd.omega + self.gauss(self.noise.actuation_omega),
        };
        let n = self.substeps.max(1);
        let h = self.dt / n as f64;
        let ideal = wheel_speeds(&actual, self.wheel_radius).expect("positive wheel radius");
        let mut acc = BodyVelocity::ZERO;
        for _ in 0..n {
            let (dx, dz) = actual.to_world(self.pose.theta);
            self.pose.x += dx * h;
            self.pose.z += dz * h;
            self.pose.theta = wrap_angle(self.pose.theta + actual.omega * h);
            let sw = self.noise.wheel;
            let sample = WheelSpeeds {
                v1: ideal.v1 + self.gauss(sw),
                v2: ideal.v2 + self.gauss(sw),
                v3: ideal.v3 + self.gauss(sw),
            };
            let b = body_velocity_from_wheels(&sample, self.wheel_radius).expect("positive wheel radius");
            acc.vx += b.vx;
            acc.vz += b.vz;
            acc.omega += b.omega;
        }
        let k = 1.0 / n as f64;
        BodyVelocity::new(acc.vx * k, acc.vz * k, acc.omega * k)
    }

    /// Std-devs of the averaged encoder velocity `(vx, vz, ω)`.
    pub fn odometry_sigmas(&self) -> [f64; 3] {
        let n = self.substeps.max(1) as f64;
        let s = self.noise.wheel / n.sqrt();
        let lateral = s * (2.0f64 / 3.0).sqrt();
        [lateral, lateral, s / (3.0f64.sqrt() * self.wheel_radius)]
    }
}

/// Advances `world` by one tick of `dt` under `cmd`.
pub fn step_world(world: &mut SimWorld, cmd: &BodyVelocity, dt: f64) -> BodyVelocity {
    world.dt = dt;
    world.step(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn world(noise: NoiseModel) -> SimWorld {
        SimWorld::new(
            RobotPose::default(),
            OccupancyGridMap::empty(0.02, 0.02, 5),
            1.0 / 60.0,
            noise,
            1,
        )
    }

    #[test]
    fn zero_command_stays_put() {
        let mut w = world(NoiseModel::OFF);
        for _ in 0..100 {
            let v = w.step(&BodyVelocity::ZERO);
            assert_eq!(v, BodyVelocity::ZERO);
        }
        assert_eq!(w.pose, RobotPose::default());
    }

    #[test]
    fn forward_motion_advances_z() {
        let mut w = world(NoiseModel::OFF);
        for _ in 0..120 {
            w.step(&BodyVelocity::new(0.0, 0.3, 0.0));
        }
        assert!((w.pose.z - 0.6).abs() < 1e-12);
        assert!(w.pose.x.abs() < 1e-15);
    }

    #[test]
    fn pure_rotation_wraps() {
        let mut w = world(NoiseModel::OFF);
        let omega = 2.0;
        let ticks = 150; // 2.5 s
        for _ in 0..ticks {
            let v = w.step(&BodyVelocity::new(0.0, 0.0, omega));
            assert!((v.omega - omega).abs() < 1e-12);
        }
        assert!(w.pose.x.abs() < 1e-15 && w.pose.z.abs() < 1e-15);
        let expected = wrap_angle(omega * 2.5);
        assert!((w.pose.theta - expected).abs() < 1e-9);
        assert!(w.pose.theta > -PI && w.pose.theta <= PI);
    }

    #[test]
    fn same_seed_same_noise() {
        let mut a = world(NoiseModel::default());
        let mut b = world(NoiseModel::default());
        for _ in 0..50 {
            let cmd = BodyVelocity::new(0.01, 0.05, 0.2);
            assert_eq!(a.step(&cmd), b.step(&cmd));
            assert_eq!(a.measure_pose(), b.measure_pose());
        }
        assert_eq!(a.pose, b.pose);
    }

    #[test]
    fn odometry_noise_matches_prediction() {
        let mut w = world(NoiseModel {
            wheel: 0.01,
            ..NoiseModel::OFF
        });
        let n = 4000;
        let samples: Vec<BodyVelocity> = (0..n).map(|_| w.step(&BodyVelocity::ZERO)).collect();
        let sd = |f: fn(&BodyVelocity) -> f64| (samples.iter().map(|s| f(s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let predicted = w.odometry_sigmas();
        for (got, want) in [sd(|s| s.vx), sd(|s| s.vz), sd(|s| s.omega)].into_iter().zip(predicted) {
            assert!((got / want - 1.0).abs() < 0.06, "{got} vs {want}");
        }
    }
}
