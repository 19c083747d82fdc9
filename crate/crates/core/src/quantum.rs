//! Two-qubit states, rank-1 projective measurements and outcome probabilities.
//!
//! Basis ordering is `(|00⟩, |01⟩, |10⟩, |11⟩)` with Alice in the high
//! (left) slot of every tensor product.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::QuantumError;
use crate::TOL;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which side of the Bell test a local operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// `α|01⟩ + β|10⟩` with real, non-negative amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureTwoQubitState {
    alpha: f64,
    beta: f64,
}

impl PureTwoQubitState {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, QuantumError> {
        if !(alpha >= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(QuantumError::InvalidState(format!(
                "amplitudes must be finite and non-negative, got alpha={alpha}, beta={beta}"
            )));
        }
        let norm = alpha * alpha + beta * beta;
        if (norm - 1.0).abs() > TOL {
            return Err(QuantumError::InvalidState(format!(
                "alpha^2 + beta^2 = {norm}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Builds the state from the amplitude ratio `r = α/β`.
    pub fn from_ratio(ratio: f64) -> Result<Self, QuantumError> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(QuantumError::InvalidState(format!(
                "alpha/beta ratio must be positive and finite, got {ratio}"
            )));
        }
        let scale = (1.0 + ratio * ratio).sqrt();
        Self::new(ratio / scale, 1.0 / scale)
    }

    /// The maximally entangled member of the family.
    pub fn maximally_entangled() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self { alpha: a, beta: a }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn concurrence(&self) -> f64 {
        2.0 * self.alpha * self.beta
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [
            ZERO,
            Complex64::new(self.alpha, 0.0),
            Complex64::new(self.beta, 0.0),
            ZERO,
        ]
    }
}

/// Pure state mixed with white noise: `ρ = V|Ψ⟩⟨Ψ| + (1 − V)·𝟙/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyState {
    pure: PureTwoQubitState,
    visibility: f64,
}

impl NoisyState {
    pub fn new(pure: PureTwoQubitState, visibility: f64) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(QuantumError::InvalidState(format!(
                "visibility must lie in [0, 1], got {visibility}"
            )));
        }
        Ok(Self { pure, visibility })
    }

    pub fn pure(pure: PureTwoQubitState) -> Self {
        Self {
            pure,
            visibility: 1.0,
        }
    }

    pub fn state(&self) -> &PureTwoQubitState {
        &self.pure
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn density_matrix(&self) -> [[Complex64; 4]; 4] {
        let psi = self.pure.amplitudes();
        let noise = (1.0 - self.visibility) / 4.0;
        let mut rho = [[ZERO; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = psi[i] * psi[j].conj() * self.visibility;
                if i == j {
                    *entry += noise;
                }
            }
        }
        rho
    }
}

/// Unit Bloch vector of a qubit measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDirection([f64; 3]);

impl MeasurementDirection {
    pub fn new(n: [f64; 3]) -> Result<Self, QuantumError> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > TOL {
            return Err(QuantumError::InvalidDirection { norm });
        }
        Ok(Self(n))
    }

    /// Rescales `n` onto the sphere. Fails only for the zero vector.
    pub fn normalized(n: [f64; 3]) -> Result<Self, QuantumError> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QuantumError::InvalidDirection { norm });
        }
        Ok(Self([n[0] / norm, n[1] / norm, n[2] / norm]))
    }

    pub(crate) fn new_unchecked(n: [f64; 3]) -> Self {
        debug_assert!(Self::new(n).is_ok(), "non-unit direction {n:?}");
        Self(n)
    }

    pub fn x() -> Self {
        Self([1.0, 0.0, 0.0])
    }

    pub fn y() -> Self {
        Self([0.0, 1.0, 0.0])
    }

    pub fn z() -> Self {
        Self([0.0, 0.0, 1.0])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &Self) -> [f64; 3] {
        let (a, b) = (self.0, other.0);
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }
}

impl std::ops::Neg for MeasurementDirection {
    type Output = Self;

    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Rank-1 projector on a qubit, stored as a 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector([[Complex64; 2]; 2]);

impl Projector {
    /// `(𝟙 + n·σ)/2`, the projector onto the +1 eigenstate of `n·σ`.
    pub fn from_direction(n: &MeasurementDirection) -> Self {
        let [x, y, z] = n.0;
        Self([
            [
                Complex64::new((1.0 + z) / 2.0, 0.0),
                Complex64::new(x / 2.0, -y / 2.0),
            ],
            [
                Complex64::new(x / 2.0, y / 2.0),
                Complex64::new((1.0 - z) / 2.0, 0.0),
            ],
        ])
    }

    /// Checks the projector invariants on an arbitrary matrix.
    pub fn from_matrix(m: [[Complex64; 2]; 2]) -> Result<Self, QuantumError> {
        let p = Self(m);
        p.check()?;
        Ok(p)
    }

    /// `𝟙 − P`, the projector for the opposite outcome.
    pub fn complement(&self) -> Self {
        let m = self.0;
        Self([[ONE - m[0][0], -m[0][1]], [-m[1][0], ONE - m[1][1]]])
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    fn check(&self) -> Result<(), QuantumError> {
        let m = &self.0;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((m[i][j] - m[j][i].conj()).norm());
                let sq = m[i][0] * m[0][j] + m[i][1] * m[1][j];
                worst = worst.max((sq - m[i][j]).norm());
            }
        }
        worst = worst.max((self.trace() - ONE).norm());
        if worst > TOL {
            return Err(QuantumError::InvalidProjector { residual: worst });
        }
        Ok(())
    }
}

/// Entry `(i, j)` of `mA ⊗ mB` in A-slot-major ordering.
#[inline]
fn kron_entry(ma: &Projector, mb: &Projector, i: usize, j: usize) -> Complex64 {
    ma.0[i >> 1][j >> 1] * mb.0[i & 1][j & 1]
}

fn real_part(value: Complex64) -> Result<f64, QuantumError> {
    if value.im.abs() > TOL {
        return Err(QuantumError::ImaginaryResidue(value.im));
    }
    Ok(value.re)
}

/// `tr(ρ · (mA ⊗ mB))`.
pub fn joint_probability(
    state: &NoisyState,
    ma: &Projector,
    mb: &Projector,
) -> Result<f64, QuantumError> {
    if state.visibility == 1.0 {
        // ⟨Ψ|mA ⊗ mB|Ψ⟩ over the two non-zero amplitudes
        let psi = state.pure.amplitudes();
        let mut acc = ZERO;
        for i in 1..3 {
            for j in 1..3 {
                acc += psi[i].conj() * kron_entry(ma, mb, i, j) * psi[j];
            }
        }
        return real_part(acc);
    }
    let rho = state.density_matrix();
    let mut acc = ZERO;
    for (i, row) in rho.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            acc += entry * kron_entry(ma, mb, j, i);
        }
    }
    real_part(acc)
}

/// `tr(ρ · (m ⊗ 𝟙))` for Alice or `tr(ρ · (𝟙 ⊗ m))` for Bob.
pub fn marginal_probability(
    state: &NoisyState,
    m: &Projector,
    party: Party,
) -> Result<f64, QuantumError> {
    let identity = Projector([[ONE, ZERO], [ZERO, ONE]]);
    match party {
        Party::A => joint_probability(state, m, &identity),
        Party::B => joint_probability(state, &identity, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_matrix(p: &Projector, expected: [[Complex64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (p.0[i][j] - expected[i][j]).norm() < 1e-15,
                    "entry ({i},{j}) = {} expected {}",
                    p.0[i][j],
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn projector_along_axes() {
        assert_matrix(
            &Projector::from_direction(&MeasurementDirection::z()),
            [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]],
        );
        assert_matrix(
            &Projector::from_direction(&MeasurementDirection::x()),
            [[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]],
        );
        assert_matrix(
            &Projector::from_direction(&MeasurementDirection::y()),
            [[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.5, 0.0)]],
        );
    }

    #[test]
    fn antipodal_direction_is_complement() {
        let n = MeasurementDirection::normalized([0.3, -0.4, 0.5]).unwrap();
        let p = Projector::from_direction(&n);
        let q = Projector::from_direction(&-n);
        assert_matrix(&q, p.complement().0);
        assert!(Projector::from_matrix(q.0).is_ok());
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(matches!(
            MeasurementDirection::new([1.0, 1.0, 0.0]),
            Err(QuantumError::InvalidDirection { .. })
        ));
        assert!(MeasurementDirection::normalized([0.0; 3]).is_err());
    }

    #[test]
    fn rejects_non_projector_matrix() {
        let m = [[c(1.0, 0.0), c(0.1, 0.0)], [c(0.1, 0.0), c(0.0, 0.0)]];
        assert!(Projector::from_matrix(m).is_err());
    }

    #[test]
    fn state_construction() {
        let mes = PureTwoQubitState::maximally_entangled();
        assert!((mes.concurrence() - 1.0).abs() < 1e-15);
        let from_ratio = PureTwoQubitState::from_ratio(1.0).unwrap();
        assert!((from_ratio.alpha() - FRAC_1_SQRT_2).abs() < 1e-15);
        let half = PureTwoQubitState::from_ratio(0.5).unwrap();
        assert!((half.alpha() / half.beta() - 0.5).abs() < 1e-14);
        assert!(PureTwoQubitState::new(0.6, 0.6).is_err());
        assert!(PureTwoQubitState::from_ratio(0.0).is_err());
        let pure = PureTwoQubitState::new(1.0, 0.0).unwrap();
        assert!(NoisyState::new(pure, 1.5).is_err());
    }

    #[test]
    fn joint_probability_examples() {
        let up = Projector::from_direction(&MeasurementDirection::z());
        let down = up.complement();
        let mes = NoisyState::pure(PureTwoQubitState::maximally_entangled());
        assert!(joint_probability(&mes, &up, &up).unwrap().abs() < 1e-15);

        let product = NoisyState::pure(PureTwoQubitState::new(1.0, 0.0).unwrap());
        assert!((joint_probability(&product, &up, &down).unwrap() - 1.0).abs() < 1e-15);

        let n = MeasurementDirection::normalized([0.1, 0.7, -0.2]).unwrap();
        let mixed = NoisyState::new(PureTwoQubitState::maximally_entangled(), 0.0).unwrap();
        let p = joint_probability(&mixed, &Projector::from_direction(&n), &up).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn marginal_probability_examples() {
        let up = Projector::from_direction(&MeasurementDirection::z());
        let mes = NoisyState::pure(PureTwoQubitState::maximally_entangled());
        let n = MeasurementDirection::normalized([0.3, 0.2, -0.9]).unwrap();
        let m = Projector::from_direction(&n);
        assert!((marginal_probability(&mes, &m, Party::A).unwrap() - 0.5).abs() < 1e-12);
        assert!((marginal_probability(&mes, &m, Party::B).unwrap() - 0.5).abs() < 1e-12);

        let state = NoisyState::pure(PureTwoQubitState::new(0.8f64.sqrt(), 0.2f64.sqrt()).unwrap());
        assert!((marginal_probability(&state, &up, Party::A).unwrap() - 0.8).abs() < 1e-12);
        assert!((marginal_probability(&state, &up, Party::B).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn imaginary_residue_is_reported() {
        // not Hermitian, so the trace picks up an imaginary part
        let skew = Projector([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 1.0), c(0.0, 0.0)]]);
        let x = Projector::from_direction(&MeasurementDirection::x());
        let state = NoisyState::pure(PureTwoQubitState::maximally_entangled());
        assert!(matches!(
            joint_probability(&state, &skew, &x),
            Err(QuantumError::ImaginaryResidue(_))
        ));
    }
}
