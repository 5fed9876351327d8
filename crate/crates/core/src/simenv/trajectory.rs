//! Predefined pan and tilt motion profiles.
//!
//! Each axis follows one of three families: a sinusoidal oscillation, a
//! constant-speed sweep that reflects off the amplitude bounds, or a sweep
//! that jumps back to its start when it reaches the far bound. Pairing every
//! pan profile with every tilt profile gives the 2-D trajectories.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::motion::PoseAngles;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Oscillation,
    Reflective,
    Resetting,
}

/// Motion of one axis, in radians and radians per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisProfile {
    pub family: Family,
    pub amplitude: f64,
    /// Peak speed for oscillations, constant speed for the sweeps.
    pub speed: f64,
    /// Starting point as a fraction of one period, in `[0, 1)`.
    pub phase: f64,
    /// `+1.0` or `−1.0`; `−1.0` runs the profile in reverse.
    pub direction: f64,
}

impl AxisProfile {
    pub fn at(&self, step: u64) -> f64 {
        let a = self.amplitude;
        if a == 0.0 {
            return 0.0;
        }
        let t = step as f64;
        let x = match self.family {
            Family::Oscillation => {
                let omega = self.speed / a;
                a * (omega * t + TAU * self.phase).sin()
            }
            Family::Reflective => {
                // position along a 4A-long round trip
                let s = (4.0 * a * self.phase + self.speed * t).rem_euclid(4.0 * a);
                if s < 2.0 * a {
                    -a + s
                } else {
                    3.0 * a - s
                }
            }
            Family::Resetting => {
                let s = (2.0 * a * self.phase + self.speed * t).rem_euclid(2.0 * a);
                -a + s
            }
        };
        (self.direction * x).clamp(-a, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub pan: AxisProfile,
    pub tilt: AxisProfile,
}

impl Trajectory {
    pub fn pose(&self, step: u64) -> PoseAngles {
        PoseAngles::new(self.pan.at(step), self.tilt.at(step))
    }

    pub fn families(&self) -> (Family, Family) {
        (self.pan.family, self.tilt.family)
    }
}

/// Ranges the profile generator draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub pan_amplitude: f64,
    pub tilt_amplitude: f64,
    pub min_speed: f64,
    pub max_speed: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            pan_amplitude: 60f64.to_radians(),
            tilt_amplitude: 20f64.to_radians(),
            min_speed: 0.5f64.to_radians(),
            max_speed: 2.5f64.to_radians(),
        }
    }
}

fn profiles(count: usize, amplitude: f64, cfg: &TrajectoryConfig, rng: &mut ChaCha8Rng) -> Vec<AxisProfile> {
    (0..count)
        .map(|i| {
            let family = match i % 3 {
                0 => Family::Oscillation,
                1 => Family::Reflective,
                _ => Family::Resetting,
            };
            let direction = if (i / 3) % 2 == 0 { 1.0 } else { -1.0 };
            let speed = if cfg.max_speed > cfg.min_speed {
                rng.random_range(cfg.min_speed..cfg.max_speed)
            } else {
                cfg.min_speed
            };
            AxisProfile {
                family,
                amplitude,
                speed,
                phase: rng.random::<f64>(),
                direction,
            }
        })
        .collect()
}

/// Cross product of `count_pan` pan profiles and `count_tilt` tilt profiles.
/// Pure in its arguments.
pub fn make_trajectories(count_pan: usize, count_tilt: usize, seed: u64, cfg: &TrajectoryConfig) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pans = profiles(count_pan, cfg.pan_amplitude, cfg, &mut rng);
    let tilts = profiles(count_tilt, cfg.tilt_amplitude, cfg, &mut rng);
    let mut out = Vec::with_capacity(count_pan * count_tilt);
    for pan in &pans {
        for tilt in &tilts {
            out.push(Trajectory {
                id: out.len(),
                pan: *pan,
                tilt: *tilt,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::RigLimits;

    #[test]
    fn four_hundred_distinct() {
        let t = make_trajectories(20, 20, 7, &TrajectoryConfig::default());
        assert_eq!(t.len(), 400);
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                assert_ne!((t[i].pan, t[i].tilt), (t[j].pan, t[j].tilt));
            }
        }
        // and distinct as motions, not only as parameter sets
        let sig = |tr: &Trajectory| (0..5).map(|s| tr.pose(s * 17)).map(|p| (p.pan.to_bits(), p.tilt.to_bits())).collect::<Vec<_>>();
        let mut sigs: Vec<_> = t.iter().map(sig).collect();
        sigs.sort();
        sigs.dedup();
        assert_eq!(sigs.len(), 400);
    }

    #[test]
    fn single_trajectory() {
        assert_eq!(make_trajectories(1, 1, 0, &TrajectoryConfig::default()).len(), 1);
    }

    #[test]
    fn poses_within_rig_limits() {
        let limits = RigLimits::default();
        for tr in make_trajectories(20, 20, 3, &TrajectoryConfig::default()) {
            for s in 0..1000 {
                assert!(limits.contains(tr.pose(s)));
            }
        }
    }

    #[test]
    fn pure_in_seed() {
        let c = TrajectoryConfig::default();
        assert_eq!(make_trajectories(4, 3, 11, &c), make_trajectories(4, 3, 11, &c));
        assert_ne!(make_trajectories(4, 3, 11, &c), make_trajectories(4, 3, 12, &c));
    }

    #[test]
    fn families_cycle_and_speeds_hold() {
        let c = TrajectoryConfig::default();
        let t = make_trajectories(6, 1, 1, &c);
        assert_eq!(t[0].pan.family, Family::Oscillation);
        assert_eq!(t[1].pan.family, Family::Reflective);
        assert_eq!(t[2].pan.family, Family::Resetting);
        assert_eq!(t[3].pan.direction, -1.0);
        for tr in &t {
            for s in 0..300 {
                let d = (tr.pan.at(s + 1) - tr.pan.at(s)).abs();
                // sweeps move at the set speed except at a reset jump
                if tr.pan.family != Family::Resetting {
                    assert!(d <= tr.pan.speed + 1e-12);
                }
            }
        }
    }
}
