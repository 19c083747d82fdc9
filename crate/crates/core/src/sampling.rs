//! Seedable random measurement directions.
//!
//! Every trial owns a [`RandomSource`] keyed by `(master seed, trial index)`.
//! The index selects a ChaCha stream, so a trial's draws never depend on how
//! many numbers another trial consumed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SamplingError;
use crate::quantum::MeasurementDirection;

pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial_index);
        Self { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Three mutually perpendicular, right-handed measurement axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTriad {
    pub d1: MeasurementDirection,
    pub d2: MeasurementDirection,
    pub d3: MeasurementDirection,
}

impl MeasurementTriad {
    pub fn axes(&self) -> [MeasurementDirection; 3] {
        [self.d1, self.d2, self.d3]
    }
}

/// Bloch vector of `sin φ|0⟩ + e^{iθ} cos φ|1⟩` with `φ = ½·arccos(2v − 1)`
/// and `θ = 2πu`.
///
/// Since `cos 2φ = 2v − 1` the vector is `(sin 2φ cos θ, sin 2φ sin θ, 1 − 2v)`,
/// which is how it is evaluated here.
pub fn direction_from_angles(u: f64, v: f64) -> Result<MeasurementDirection, SamplingError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(SamplingError::Domain { name: "u", value: u });
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(SamplingError::Domain { name: "v", value: v });
    }
    Ok(bloch_from_unit_square(u, v))
}

#[inline]
fn bloch_from_unit_square(u: f64, v: f64) -> MeasurementDirection {
    let cos_2phi = 2.0 * v - 1.0;
    let sin_2phi = (1.0 - cos_2phi * cos_2phi).max(0.0).sqrt();
    let (s, c) = (TAU * u).sin_cos();
    MeasurementDirection::new_unchecked([sin_2phi * c, sin_2phi * s, -cos_2phi])
}

/// Uniform direction on the Bloch sphere.
pub fn sample_direction(rng: &mut RandomSource) -> MeasurementDirection {
    let u = rng.uniform();
    let v = rng.uniform();
    bloch_from_unit_square(u, v)
}

/// A uniform first axis and a second axis uniform on the great circle
/// perpendicular to it.
pub fn sample_orthogonal_pair(
    rng: &mut RandomSource,
) -> (MeasurementDirection, MeasurementDirection) {
    let first = sample_direction(rng);
    let angle = TAU * rng.uniform();
    (first, perpendicular_at_angle(&first, angle))
}

/// Point on the great circle perpendicular to `axis`, at `angle` from a
/// fixed reference vector in that plane.
pub(crate) fn perpendicular_at_angle(
    axis: &MeasurementDirection,
    angle: f64,
) -> MeasurementDirection {
    let n = axis.components();
    // cross with the coordinate axis least aligned with n
    let reference = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
        MeasurementDirection::x()
    } else if n[1].abs() <= n[2].abs() {
        MeasurementDirection::y()
    } else {
        MeasurementDirection::z()
    };
    let w = MeasurementDirection::normalized(axis.cross(&reference))
        .expect("reference axis is never parallel to a unit vector's smallest component");
    let v = axis.cross(&w);
    let (s, c) = angle.sin_cos();
    let d = [
        w.components()[0] * c + v[0] * s,
        w.components()[1] * c + v[1] * s,
        w.components()[2] * c + v[2] * s,
    ];
    MeasurementDirection::normalized(d).expect("combination of orthonormal vectors is non-zero")
}

/// Images of the coordinate axes under a Haar-random rotation.
///
/// The rotation comes from a uniformly random unit quaternion (four standard
/// normals, normalized).
pub fn sample_orthogonal_triad(rng: &mut RandomSource) -> MeasurementTriad {
    let mut q = [0.0f64; 4];
    let mut norm2 = 0.0;
    while norm2 < 1e-24 {
        for c in q.iter_mut() {
            *c = rng.standard_normal();
        }
        norm2 = q.iter().map(|c| c * c).sum();
    }
    let inv = norm2.sqrt().recip();
    let [w, x, y, z] = q.map(|c| c * inv);

    let unit = |v: [f64; 3]| {
        MeasurementDirection::normalized(v).expect("rotation columns have unit length")
    };
    let d1 = unit([
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y + w * z),
        2.0 * (x * z - w * y),
    ]);
    let d2 = unit([
        2.0 * (x * y - w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z + w * x),
    ]);
    let d3 = unit([
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]);
    MeasurementTriad { d1, d2, d3 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn angle_parametrization_poles_and_equator() {
        for u in [0.0, 0.3, 0.99, 1.0] {
            assert!(close(direction_from_angles(u, 0.0).unwrap().components(), [0.0, 0.0, 1.0], 1e-15));
            assert!(close(direction_from_angles(u, 1.0).unwrap().components(), [0.0, 0.0, -1.0], 1e-15));
        }
        assert!(close(direction_from_angles(0.0, 0.5).unwrap().components(), [1.0, 0.0, 0.0], 1e-15));
        assert!(close(direction_from_angles(0.25, 0.5).unwrap().components(), [0.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn angle_parametrization_matches_amplitude_formula() {
        // direct route: amplitudes (sin φ, e^{iθ} cos φ) → Bloch vector
        for &(u, v) in &[(0.1, 0.2), (0.7, 0.9), (0.45, 0.5), (0.95, 0.05)] {
            let phi = 0.5 * (2.0f64 * v - 1.0).acos();
            let theta = TAU * u;
            let (a, b) = (phi.sin(), phi.cos());
            let expected = [2.0 * a * b * theta.cos(), 2.0 * a * b * theta.sin(), a * a - b * b];
            let n = direction_from_angles(u, v).unwrap().components();
            assert!(close(n, expected, 1e-12), "{n:?} vs {expected:?}");
        }
    }

    #[test]
    fn angle_domain_errors() {
        assert!(direction_from_angles(-0.1, 0.5).is_err());
        assert!(direction_from_angles(0.5, 1.5).is_err());
        assert!(direction_from_angles(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn stream_is_a_pure_function_of_seed_and_index() {
        let draw = |seed, idx| {
            let mut rng = RandomSource::new(seed, idx);
            (sample_direction(&mut rng), sample_orthogonal_triad(&mut rng))
        };
        assert_eq!(draw(42, 7), draw(42, 7));
        assert_ne!(draw(42, 7), draw(42, 8));
        assert_ne!(draw(42, 7), draw(43, 7));
    }

    #[test]
    fn orthogonal_pair_from_pole_lies_on_equator() {
        for k in 0..16 {
            let angle = TAU * k as f64 / 16.0;
            let d2 = perpendicular_at_angle(&MeasurementDirection::z(), angle);
            assert!(d2.components()[2].abs() < 1e-15);
        }
    }

    #[test]
    fn orthogonality_and_handedness() {
        for trial in 0..2000 {
            let mut rng = RandomSource::new(3, trial);
            let (a, b) = sample_orthogonal_pair(&mut rng);
            assert!(a.dot(&b).abs() < 1e-10);
            let t = sample_orthogonal_triad(&mut rng);
            assert!(t.d1.dot(&t.d2).abs() < 1e-10);
            assert!(t.d1.dot(&t.d3).abs() < 1e-10);
            assert!(t.d2.dot(&t.d3).abs() < 1e-10);
            assert!(close(t.d1.cross(&t.d2), t.d3.components(), 1e-10));
        }
    }
}
