//! Initial states in both representations: closed-form Husimi distributions
//! on phase space and amplitude vectors in the truncated number basis.
//!
//! The state families are the displaced number states `D(z_c)|n⟩` (with the
//! coherent states as the `n = 0` case). For the damped oscillator
//! `K = (ω - iγ)(a†a + 1/2)` this module also provides the closed-form
//! time-evolved Husimi distribution and norm landscape, which the rest of
//! the crate uses as exact references.

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::hamiltonian::PhasePoint;
use crate::scalar::Real;

/// Number of top basis levels inspected for truncation leakage.
pub const TAIL_LEVELS: usize = 5;
/// Maximum tolerated fraction of the norm living in those top levels when
/// constructing a displaced number state.
pub const TAIL_FRACTION: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("truncation too small: fraction {fraction:e} of the norm sits in the top {TAIL_LEVELS} levels")]
    TailLeakage { fraction: f64 },
    #[error("coherent states have n = 0, got n = {n}")]
    CoherentWithExcitation { n: usize },
}

/// Complex amplitude vector over `|0⟩ … |n_max⟩`.
///
/// States are deliberately *not* kept normalised: under non-Hermitian
/// evolution the norm carries physics.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState<T> {
    amps: Vec<Complex<T>>,
}

impl<T: Real> FockState<T> {
    pub fn new(amps: Vec<Complex<T>>) -> Self {
        assert!(!amps.is_empty(), "state needs at least the vacuum level");
        Self { amps }
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::number(0, n_max)
    }

    /// Basis state `|n⟩`.
    pub fn number(n: usize, n_max: usize) -> Self {
        assert!(n <= n_max);
        let mut amps = vec![Complex::zero(); n_max + 1];
        amps[n] = Complex::one();
        Self { amps }
    }

    /// Coherent state `|z_c⟩` truncated at `n_max`:
    /// amplitudes `e^{-|z_c|²/2} z_c^k / √(k!)`, accumulated multiplicatively.
    pub fn coherent(zc: Complex<T>, n_max: usize) -> Self {
        let mut amps = Vec::with_capacity(n_max + 1);
        let mut cur = Complex::new((-zc.norm_sqr() * T::of(0.5)).exp(), T::zero());
        amps.push(cur);
        for k in 1..=n_max {
            cur = cur * zc / Complex::new(T::from_usize(k).unwrap().sqrt(), T::zero());
            amps.push(cur);
        }
        Self { amps }
    }

    pub fn n_max(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amp(&self, n: usize) -> Complex<T> {
        self.amps[n]
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self {
            amps: self.amps.iter().map(|a| *a * factor).collect(),
        }
    }

    /// Fraction of the norm in the top [`TAIL_LEVELS`] levels; the signal
    /// that the truncation is too small for this state.
    pub fn tail_fraction(&self) -> T {
        let norm = self.norm_sqr();
        if norm == T::zero() {
            return T::zero();
        }
        let start = self.amps.len().saturating_sub(TAIL_LEVELS);
        let tail: T = self.amps[start..].iter().map(|a| a.norm_sqr()).sum();
        tail / norm
    }

    /// Coherent-state overlap `⟨z|ψ⟩ = e^{-|z|²/2} Σ_n (z*)^n/√(n!) ψ_n`,
    /// with the `(z*)^n/√(n!)` factor built by a stable recurrence.
    pub fn coherent_overlap(&self, pt: PhasePoint<T>) -> Complex<T> {
        let zc = pt.z().conj();
        let mut basis = Complex::<T>::one();
        let mut acc = self.amps[0];
        for (n, amp) in self.amps.iter().enumerate().skip(1) {
            basis = basis * zc / Complex::new(T::from_usize(n).unwrap().sqrt(), T::zero());
            acc = acc + *amp * basis;
        }
        acc * Complex::new((-pt.abs2() * T::of(0.5)).exp(), T::zero())
    }

    /// Husimi value `|⟨z|ψ⟩|²` at one point.
    pub fn husimi_at(&self, pt: PhasePoint<T>) -> T {
        self.coherent_overlap(pt).norm_sqr()
    }

    /// Combined parity/time reflection `ψ_n ↦ (-1)^n conj(ψ_n)`
    /// (`q → -q` together with complex conjugation).
    pub fn parity_time_reflected(&self) -> Self {
        Self {
            amps: self
                .amps
                .iter()
                .enumerate()
                .map(|(n, a)| if n % 2 == 0 { a.conj() } else { -a.conj() })
                .collect(),
        }
    }
}

/// Closed-form Husimi distribution of the displaced number state `D(z_c)|n⟩`:
/// `|z - z_c|^{2n} e^{-|z - z_c|²} / n!`.
pub fn displaced_fock_husimi<T: Real>(n: usize, zc: Complex<T>, pt: PhasePoint<T>) -> T {
    let d = (pt.z() - zc).norm_sqr();
    // Π_{j=1..n} (d/j), then the Gaussian; keeps intermediates bounded.
    let mut acc = T::one();
    for j in 1..=n {
        acc = acc * d / T::from_usize(j).unwrap();
    }
    acc * (-d).exp()
}

/// Amplitudes of the displaced number state `D(z_c)|n⟩` at truncation
/// `n_max`, built by repeated application of the displaced raising operator
/// `D(z_c) a† D(z_c)† = a† - z_c*` to the truncated coherent state:
/// `D|n⟩ = (a† - z_c*)^n / √(n!) · |z_c⟩`.
///
/// Fails if more than [`TAIL_FRACTION`] of the norm ends up in the top
/// [`TAIL_LEVELS`] levels (the truncation would be corrupting the state).
pub fn displaced_fock_vector<T: Real>(
    n: usize,
    zc: Complex<T>,
    n_max: usize,
) -> Result<FockState<T>, StateError> {
    let mut amps = FockState::coherent(zc, n_max).amps;
    let zc_conj = zc.conj();
    for step in 1..=n {
        let inv_sqrt_step = Complex::new(T::from_usize(step).unwrap().sqrt().recip(), T::zero());
        let mut next = vec![Complex::zero(); amps.len()];
        for k in 0..amps.len() {
            let raised = if k > 0 {
                amps[k - 1] * Complex::new(T::from_usize(k).unwrap().sqrt(), T::zero())
            } else {
                Complex::zero()
            };
            next[k] = (raised - zc_conj * amps[k]) * inv_sqrt_step;
        }
        amps = next;
    }
    let state = FockState { amps };
    let fraction = state.tail_fraction();
    if fraction.to_f64().unwrap_or(f64::INFINITY) > TAIL_FRACTION {
        return Err(StateError::TailLeakage {
            fraction: fraction.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(state)
}

/// Supported initial-state families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateFamily {
    Coherent,
    DisplacedFock,
}

/// An initial state: a number state `|n⟩` displaced to `center`
/// (`n = 0` and `Coherent` coincide).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialState<T> {
    family: StateFamily,
    n: usize,
    center: PhasePoint<T>,
}

impl<T: Real> InitialState<T> {
    pub fn coherent(center: PhasePoint<T>) -> Self {
        Self {
            family: StateFamily::Coherent,
            n: 0,
            center,
        }
    }

    pub fn displaced_fock(n: usize, center: PhasePoint<T>) -> Self {
        Self {
            family: StateFamily::DisplacedFock,
            n,
            center,
        }
    }

    /// Validating constructor used by configuration loading.
    pub fn new(family: StateFamily, n: usize, center: PhasePoint<T>) -> Result<Self, StateError> {
        if family == StateFamily::Coherent && n != 0 {
            return Err(StateError::CoherentWithExcitation { n });
        }
        Ok(Self { family, n, center })
    }

    pub fn family(&self) -> StateFamily {
        self.family
    }
    pub fn excitation(&self) -> usize {
        self.n
    }
    pub fn center(&self) -> PhasePoint<T> {
        self.center
    }

    /// Closed-form initial Husimi distribution.
    pub fn husimi(&self, pt: PhasePoint<T>) -> T {
        displaced_fock_husimi(self.n, self.center.z(), pt)
    }

    /// Truncated number-basis realisation.
    pub fn fock_state(&self, n_max: usize) -> Result<FockState<T>, StateError> {
        displaced_fock_vector(self.n, self.center.z(), n_max)
    }

    /// Truncation heuristic: mean photon number plus ten standard deviations
    /// of the displaced-state Poisson tail, plus margin for the excitation.
    pub fn suggested_n_max(&self) -> usize {
        let nbar = self.center.abs2().to_f64().unwrap_or(0.0);
        (nbar + 10.0 * nbar.sqrt() + 20.0).ceil() as usize + self.n
    }
}

/// Closed-form time-evolved Husimi distribution of `D(z_c)|n⟩` under the
/// damped oscillator `K = (ω - iγ)(a†a + 1/2)`:
///
/// `e^{-2γ(n+1/2)t - |z - z_c e^{-i(ω-iγ)t}|²} · |z - z_c e^{-i(ω+iγ)t}|^{2n} / n!`
///
/// Note the two different transported centres: the Gaussian envelope follows
/// the coherent-state trajectory (`ω - iγ`, spiralling inwards) while the
/// ring factor follows the characteristics (`ω + iγ`, spiralling outwards).
/// The overall state-independent norm factor of the exact quantum evolution
/// is omitted here, matching renormalised comparisons.
pub fn complex_ho_husimi<T: Real>(
    n: usize,
    zc: Complex<T>,
    omega: T,
    gamma: T,
    t: T,
    pt: PhasePoint<T>,
) -> T {
    let z = pt.z();
    let coherent_center = zc * Complex::new(-gamma * t, -omega * t).exp();
    let characteristic_center = zc * Complex::new(gamma * t, -omega * t).exp();
    let envelope = -T::of(2.0) * gamma * (T::from_usize(n).unwrap() + T::of(0.5)) * t
        - (z - coherent_center).norm_sqr();
    let ring = (z - characteristic_center).norm_sqr();
    let mut acc = T::one();
    for j in 1..=n {
        acc = acc * ring / T::from_usize(j).unwrap();
    }
    acc * envelope.exp()
}

/// Closed-form norm landscape of the damped oscillator:
/// `w(z, t) = e^{-γt} e^{-|z|²(1 - e^{-2γt})}`.
pub fn complex_ho_norm_landscape<T: Real>(omega: T, gamma: T, t: T, pt: PhasePoint<T>) -> T {
    let _ = omega; // the landscape is phase-free
    (-gamma * t - pt.abs2() * (T::one() - (-T::of(2.0) * gamma * t).exp())).exp()
}
