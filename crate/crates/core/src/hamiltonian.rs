//! Normal-ordered polynomial Hamiltonians on the oscillator phase plane.
//!
//! A Hamiltonian is a finite sum `K = Σ K_mn (a†)^m a^n` stored sparsely by
//! the exponent pair `(m, n)`. From it we derive
//!
//! - the classical symbol `K(z) = Σ K_mn z*^m z^n` with `z = (q + ip)/√2`,
//! - its real split `K = H + iΓ` (`H = Re K` generates the conservative
//!   motion, `Γ = Im K` is the local norm growth/decay rate),
//! - the characteristic transport field `ζ̇ = -i ∂K*/∂ζ*`, which in real
//!   coordinates reads `q̇ = ∂H/∂p - ∂Γ/∂q`, `ṗ = -∂H/∂q - ∂Γ/∂p`,
//! - the truncated matrix of `K` in the number basis.
//!
//! Sign convention: `Γ = Im K` throughout. For a damped oscillator
//! `K = (ω - iγ)(a†a + 1/2)` this makes `Γ = -γ(|z|² + 1/2)` negative, so
//! norms decay while the characteristics spiral outwards; the closed-form
//! oracles in the test suite pin this convention.
//!
//! All derivatives are exact term shifts of the coefficient table
//! (`∂/∂z*` maps `(m, n) ↦ m·(m-1, n)` and `∂/∂z` maps `(m, n) ↦ n·(m, n-1)`);
//! no finite differences are used anywhere in the flow evaluation.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::Real;

/// A point of the real phase plane.
///
/// `q` and `p` are the stored representation; the complex coordinate
/// `z = (q + ip)/√2` is always derived on demand, never stored, so reading
/// `q`/`p` back from a `PhasePoint` is exact. (Materialising `z` costs one
/// rounding per component; [`PhasePoint::from_z`] costs one more.)
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint<T> {
    pub q: T,
    pub p: T,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(q: T, p: T) -> Self {
        Self { q, p }
    }

    /// The complex coordinate `z = (q + ip)/√2`.
    pub fn z(&self) -> Complex<T> {
        Complex::new(self.q * T::FRAC_1_SQRT_2(), self.p * T::FRAC_1_SQRT_2())
    }

    /// Inverse of [`PhasePoint::z`]: `q = √2 Re z`, `p = √2 Im z`.
    pub fn from_z(z: Complex<T>) -> Self {
        Self {
            q: z.re * T::SQRT_2(),
            p: z.im * T::SQRT_2(),
        }
    }

    /// `|z|² = (q² + p²)/2`.
    pub fn abs2(&self) -> T {
        (self.q * self.q + self.p * self.p) * T::of(0.5)
    }

    /// Euclidean distance to another point in the `(q, p)` plane.
    pub fn distance(&self, other: &Self) -> T {
        let dq = self.q - other.q;
        let dp = self.p - other.p;
        (dq * dq + dp * dp).sqrt()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HamiltonianError {
    /// The requested number-basis truncation cannot hold the highest ladder
    /// monomial; the top rows of the matrix would be silently wrong.
    #[error("Fock truncation n_max = {n_max} is below the polynomial degree {max_degree}")]
    TruncationBelowDegree { n_max: usize, max_degree: usize },
}

/// Normal-ordered polynomial `Σ K_mn (a†)^m a^n` with complex coefficients.
///
/// Canonical form: exact-zero coefficients are never stored, so term-by-term
/// equality is meaningful. Values are immutable after construction and all
/// operations are pure; sharing across threads is safe.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian<T> {
    terms: BTreeMap<(usize, usize), Complex<T>>,
}

impl<T: Real> Default for Hamiltonian<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Hamiltonian<T> {
    /// Build from `(m, n, coefficient)` triples. Duplicate `(m, n)` keys are
    /// summed; coefficients that end up exactly zero are dropped. The empty
    /// list yields the zero Hamiltonian.
    pub fn new(terms: impl IntoIterator<Item = (usize, usize, Complex<T>)>) -> Self {
        let mut map: BTreeMap<(usize, usize), Complex<T>> = BTreeMap::new();
        for (m, n, c) in terms {
            let entry = map.entry((m, n)).or_insert_with(Complex::zero);
            *entry = *entry + c;
        }
        map.retain(|_, c| *c != Complex::zero());
        Self { terms: map }
    }

    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Stored terms in ascending `(m, n)` order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        self.terms.iter().map(|(&(m, n), &c)| (m, n, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `(a†)^m a^n`; zero if the term is absent.
    pub fn term(&self, m: usize, n: usize) -> Complex<T> {
        self.terms.get(&(m, n)).copied().unwrap_or_else(Complex::zero)
    }

    /// Largest `m + n` over the stored terms; 0 for the zero Hamiltonian.
    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|&(m, n)| m + n).max().unwrap_or(0)
    }

    /// Classical symbol `K(z) = Σ K_mn z*^m z^n` at a complex coordinate.
    pub fn symbol_at(&self, z: Complex<T>) -> Complex<T> {
        let zc = z.conj();
        let mut acc = Complex::zero();
        for (&(m, n), &c) in &self.terms {
            acc = acc + c * zc.powu(m as u32) * z.powu(n as u32);
        }
        acc
    }

    /// Classical symbol evaluated at a phase point.
    pub fn classical_symbol(&self, pt: PhasePoint<T>) -> Complex<T> {
        self.symbol_at(pt.z())
    }

    /// `H(z) = Re K(z)`, the symbol of the Hermitian part `(K + K†)/2`.
    pub fn hermitian_part(&self, pt: PhasePoint<T>) -> T {
        self.classical_symbol(pt).re
    }

    /// `Γ(z) = Im K(z)`, the symbol of the anti-Hermitian part `(K - K†)/2i`.
    /// This is the local rate of norm growth (`Γ > 0`) or decay (`Γ < 0`).
    pub fn gamma(&self, pt: PhasePoint<T>) -> T {
        self.classical_symbol(pt).im
    }

    /// Adjoint operator: `K_mn ↦ conj(K_nm)`. Pointwise on symbols this is
    /// complex conjugation: `adjoint(K)(z) = conj(K(z))`.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(&(m, n), &c)| ((n, m), c.conj()))
                .collect(),
        }
    }

    /// `K = K†` term by term (exact coefficient equality, no tolerance).
    pub fn is_hermitian(&self) -> bool {
        self.terms
            .iter()
            .all(|(&(m, n), &c)| c == self.term(n, m).conj())
    }

    /// All coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self::new(self.terms().map(|(m, n, c)| (m, n, c * factor)))
    }

    /// `self_factor · self + other_factor · other`.
    pub fn combined(&self, other: &Self, self_factor: Complex<T>, other_factor: Complex<T>) -> Self {
        Self::new(
            self.terms()
                .map(|(m, n, c)| (m, n, c * self_factor))
                .chain(other.terms().map(|(m, n, c)| (m, n, c * other_factor))),
        )
    }

    /// Operator Hermitian part `(K + K†)/2`.
    pub fn hermitian_component(&self) -> Self {
        let half = Complex::new(T::of(0.5), T::zero());
        self.combined(&self.adjoint(), half, half)
    }

    /// Operator anti-Hermitian part `Γ̂ = (K - K†)/2i`, so that `K = Ĥ + iΓ̂`.
    pub fn anti_hermitian_component(&self) -> Self {
        let half_over_i = Complex::new(T::zero(), -T::of(0.5));
        self.combined(&self.adjoint(), half_over_i, -half_over_i)
    }

    /// Exact `∂/∂z` term shift: `(m, n) ↦ n·(m, n-1)`.
    pub fn d_dz(&self) -> Self {
        Self::new(self.terms.iter().filter(|(&(_, n), _)| n > 0).map(
            |(&(m, n), &c)| {
                (
                    m,
                    n - 1,
                    c * Complex::new(T::from_usize(n).unwrap(), T::zero()),
                )
            },
        ))
    }

    /// Exact `∂/∂z*` term shift: `(m, n) ↦ m·(m-1, n)`.
    pub fn d_dzstar(&self) -> Self {
        Self::new(self.terms.iter().filter(|(&(m, _), _)| m > 0).map(
            |(&(m, n), &c)| {
                (
                    m - 1,
                    n,
                    c * Complex::new(T::from_usize(m).unwrap(), T::zero()),
                )
            },
        ))
    }

    /// Characteristic transport velocity `(q̇, ṗ)` at a phase point.
    ///
    /// Computed from the complex form `ζ̇ = -i conj(∂K/∂ζ)` via exact term
    /// shifts; equals `(∂H/∂p - ∂Γ/∂q, -∂H/∂q - ∂Γ/∂p)` identically.
    pub fn flow_velocity(&self, pt: PhasePoint<T>) -> (T, T) {
        let z = pt.z();
        let zc = z.conj();
        // -i * conj(Σ K_mn n z*^m z^(n-1)), accumulated without materialising
        // the shifted polynomial.
        let mut kz = Complex::zero();
        for (&(m, n), &c) in &self.terms {
            if n == 0 {
                continue;
            }
            let coeff = c * Complex::new(T::from_usize(n).unwrap(), T::zero());
            kz = kz + coeff * zc.powu(m as u32) * z.powu(n as u32 - 1);
        }
        let v = -Complex::<T>::i() * kz.conj();
        (v.re * T::SQRT_2(), v.im * T::SQRT_2())
    }

    /// Compiled evaluator for the transport field; build once before a grid
    /// sweep or an ODE run.
    pub fn flow_field(&self) -> FlowField<T> {
        FlowField::new(self)
    }

    /// Matrix of `Σ K_mn (a†)^m a^n` on the number basis `|0⟩ … |n_max⟩`.
    ///
    /// Each ladder monomial sends column `k` (for `k ≥ n`) to row
    /// `k - n + m` with weight `K_mn √(k!/(k-n)!) √((k-n+m)!/(k-n)!)`;
    /// components raised past `n_max` are truncated away.
    pub fn fock_matrix(&self, n_max: usize) -> Result<FockMatrix<T>, HamiltonianError> {
        let max_degree = self.max_degree();
        if n_max < max_degree {
            return Err(HamiltonianError::TruncationBelowDegree { n_max, max_degree });
        }
        let dim = n_max + 1;
        let mut bands: BTreeMap<isize, Vec<Complex<T>>> = BTreeMap::new();
        for (&(m, n), &c) in &self.terms {
            let offset = m as isize - n as isize;
            let band = bands
                .entry(offset)
                .or_insert_with(|| vec![Complex::zero(); dim]);
            for k in n..dim {
                let row = k - n + m;
                if row >= dim {
                    break;
                }
                let weight = sqrt_falling_factorial::<T>(k, n) * sqrt_falling_factorial::<T>(row, m);
                band[k] = band[k] + c * Complex::new(weight, T::zero());
            }
        }
        Ok(FockMatrix {
            dim,
            bands: bands.into_iter().collect(),
        })
    }

    /// Short content hash of the coefficient table (used to tag exported
    /// fields with the Hamiltonian they came from).
    pub fn digest(&self) -> String {
        let mut hasher = crc32fast::Hasher::new();
        for (&(m, n), c) in &self.terms {
            hasher.update(&(m as u64).to_le_bytes());
            hasher.update(&(n as u64).to_le_bytes());
            hasher.update(&c.re.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
            hasher.update(&c.im.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
        }
        format!("{:08x}", hasher.finalize())
    }
}

/// `√(a!/(a-b)!)` via a running product of the `b` falling factors; switches
/// to summed logarithms if the plain product overflows.
fn sqrt_falling_factorial<T: Real>(a: usize, b: usize) -> T {
    debug_assert!(b <= a + 1);
    let mut prod = T::one();
    for j in (a + 1 - b)..=a {
        prod = prod * T::from_usize(j).unwrap();
    }
    if prod.is_finite() {
        prod.sqrt()
    } else {
        let log_sum: T = ((a + 1 - b)..=a)
            .map(|j| T::from_usize(j).unwrap().ln())
            .sum();
        (log_sum * T::of(0.5)).exp()
    }
}

/// Precompiled characteristic field of a Hamiltonian.
///
/// Holds the velocity polynomial `V(z) = -i conj(∂K/∂ζ)` together with its
/// own `z`/`z*` derivatives (for Newton Jacobians) and the symbol itself
/// (for `Γ`), each flattened into plain term lists for cheap evaluation in
/// inner loops. Immutable and `Sync`; one instance can serve every grid cell.
#[derive(Clone, Debug)]
pub struct FlowField<T> {
    symbol: Vec<(u32, u32, Complex<T>)>,
    velocity: Vec<(u32, u32, Complex<T>)>,
    velocity_dz: Vec<(u32, u32, Complex<T>)>,
    velocity_dzstar: Vec<(u32, u32, Complex<T>)>,
}

fn flatten<T: Real>(h: &Hamiltonian<T>) -> Vec<(u32, u32, Complex<T>)> {
    h.terms().map(|(m, n, c)| (m as u32, n as u32, c)).collect()
}

fn eval_terms<T: Real>(terms: &[(u32, u32, Complex<T>)], z: Complex<T>) -> Complex<T> {
    let zc = z.conj();
    let mut acc = Complex::zero();
    for &(m, n, c) in terms {
        acc = acc + c * zc.powu(m) * z.powu(n);
    }
    acc
}

impl<T: Real> FlowField<T> {
    pub fn new(h: &Hamiltonian<T>) -> Self {
        // conj(K_z) as a polynomial is the adjoint of the z-shifted table.
        let v = h.d_dz().adjoint().scaled(-Complex::<T>::i());
        Self {
            symbol: flatten(h),
            velocity_dz: flatten(&v.d_dz()),
            velocity_dzstar: flatten(&v.d_dzstar()),
            velocity: flatten(&v),
        }
    }

    /// `(q̇, ṗ)` of the characteristic flow.
    pub fn velocity(&self, pt: PhasePoint<T>) -> (T, T) {
        let v = eval_terms(&self.velocity, pt.z());
        (v.re * T::SQRT_2(), v.im * T::SQRT_2())
    }

    /// Local norm rate `Γ = Im K`.
    pub fn gamma(&self, pt: PhasePoint<T>) -> T {
        eval_terms(&self.symbol, pt.z()).im
    }

    /// Jacobian `[[∂q̇/∂q, ∂q̇/∂p], [∂ṗ/∂q, ∂ṗ/∂p]]` of the velocity field.
    pub fn jacobian(&self, pt: PhasePoint<T>) -> [[T; 2]; 2] {
        let z = pt.z();
        let a = eval_terms(&self.velocity_dz, z);
        let b = eval_terms(&self.velocity_dzstar, z);
        // ∂/∂q = (∂_z + ∂_z*)/√2, ∂/∂p = i(∂_z - ∂_z*)/√2, and the real
        // velocity components carry a further factor √2.
        let sum = a + b;
        let diff = a - b;
        [[sum.re, -diff.im], [sum.im, diff.re]]
    }
}

/// Banded matrix of a normal-ordered polynomial on the truncated number
/// basis. Each ladder monomial `(a†)^m a^n` populates the single diagonal
/// at offset `m - n`, so the bandwidth is bounded by the polynomial degree
/// and matrix-vector products cost `O(dim · degree)`.
#[derive(Clone, Debug)]
pub struct FockMatrix<T> {
    dim: usize,
    /// `(offset d, coefficients)`: entry `(k + d, k)` is `band[k]`.
    bands: Vec<(isize, Vec<Complex<T>>)>,
}

impl<T: Real> FockMatrix<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix element `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        let offset = row as isize - col as isize;
        self.bands
            .iter()
            .find(|(d, _)| *d == offset)
            .map(|(_, band)| band[col])
            .unwrap_or_else(Complex::zero)
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        out.fill(Complex::zero());
        for (d, band) in &self.bands {
            let lo = (-d).max(0) as usize;
            let hi = (self.dim as isize - 1).min(self.dim as isize - 1 - d) as usize;
            for k in lo..=hi {
                let row = (k as isize + d) as usize;
                out[row] = out[row] + band[k] * x[k];
            }
        }
    }

    /// Dense copy, row-major; intended for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let mut dense = vec![vec![Complex::zero(); self.dim]; self.dim];
        for (d, band) in &self.bands {
            let lo = (-d).max(0) as usize;
            let hi = (self.dim as isize - 1).min(self.dim as isize - 1 - d) as usize;
            for k in lo..=hi {
                dense[(k as isize + d) as usize][k] = band[k];
            }
        }
        dense
    }
}

/// The damped oscillator `K = (ω - iγ)(a†a + 1/2)`; the workhorse of the
/// closed-form oracle tests and the first preset.
pub fn complex_harmonic_oscillator<T: Real>(omega: T, gamma: T) -> Hamiltonian<T> {
    let freq = Complex::new(omega, -gamma);
    Hamiltonian::new([
        (1, 1, freq),
        (0, 0, freq * Complex::new(T::of(0.5), T::zero())),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn cho(omega: f64, gamma: f64) -> Hamiltonian<f64> {
        complex_harmonic_oscillator(omega, gamma)
    }

    #[test]
    fn phase_point_keeps_coordinates_exact() {
        // (q, p) is the stored representation; z is derived. Reading the
        // fields back never re-rounds.
        let pts = [(0.1, -0.7), (4.0, 2.0), (-3.0, 5.0), (1e-12, 8.25)];
        for (q, p) in pts {
            let pt = PhasePoint::new(q, p);
            assert_eq!(pt.q, q);
            assert_eq!(pt.p, p);
        }
    }

    #[test]
    fn phase_point_z_matches_definition() {
        let pt = PhasePoint::new(4.0, 2.0);
        let z = pt.z();
        assert_eq!(z.re, 4.0 * std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(z.im, 2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let back = PhasePoint::from_z(z);
        // One rounding each way: exact on these anchors, and never more
        // than an ulp adrift in general.
        assert!((back.q - pt.q).abs() <= f64::EPSILON * pt.q.abs());
        assert!((back.p - pt.p).abs() <= f64::EPSILON * pt.p.abs());
    }

    #[test]
    fn duplicate_terms_merge_and_zeros_drop() {
        let h = Hamiltonian::new([
            (1, 1, C64::new(1.0, 0.0)),
            (1, 1, C64::new(2.0, 0.0)),
            (2, 0, C64::new(3.0, 0.0)),
            (2, 0, C64::new(-3.0, 0.0)),
        ]);
        assert_eq!(h.num_terms(), 1);
        assert_eq!(h.term(1, 1), C64::new(3.0, 0.0));
        assert_eq!(h.term(2, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_hamiltonian_is_legal_everywhere() {
        let h: Hamiltonian<f64> = Hamiltonian::new([]);
        assert!(h.is_zero());
        assert_eq!(h.max_degree(), 0);
        let pt = PhasePoint::new(1.3, -2.1);
        assert_eq!(h.classical_symbol(pt), C64::new(0.0, 0.0));
        assert_eq!(h.flow_velocity(pt), (0.0, 0.0));
        assert!(h.is_hermitian());
    }

    #[test]
    fn complex_ho_symbol_at_origin() {
        // K(0) = (ω - iγ)/2.
        let h = cho(1.0, 0.15);
        let k = h.classical_symbol(PhasePoint::new(0.0, 0.0));
        assert!((k - C64::new(0.5, -0.075)).norm() < 1e-15);
    }

    #[test]
    fn complex_ho_gamma_on_unit_circle() {
        // Γ = -γ(|z|² + 1/2), so Γ = -1.5γ at |z|² = 1.
        let h = cho(1.0, 0.15);
        let pt = PhasePoint::new(2.0_f64.sqrt(), 0.0); // |z|² = q²/2 = 1
        assert!((h.gamma(pt) + 1.5 * 0.15).abs() < 1e-14);
    }

    #[test]
    fn hermitian_ho_velocity_is_rotation() {
        let h = cho(1.0, 0.0);
        let (qd, pd) = h.flow_velocity(PhasePoint::new(1.0, 0.0));
        assert!(qd.abs() < 1e-15);
        assert!((pd + 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_ho_velocity_matches_closed_form() {
        // ζ̇ = -i(ω + iγ)ζ
        let (omega, gamma) = (1.0, 0.15);
        let h = cho(omega, gamma);
        for (q, p) in [(1.0, 0.0), (0.3, -2.0), (-4.0, 2.5)] {
            let pt = PhasePoint::new(q, p);
            let v_expected = -C64::i() * C64::new(omega, gamma) * pt.z();
            let (qd, pd) = h.flow_velocity(pt);
            let v = C64::new(qd, pd) * std::f64::consts::FRAC_1_SQRT_2;
            assert!((v - v_expected).norm() < 1e-14);
        }
    }

    /// Example anharmonic system with a linear gain/loss profile:
    /// `K = a†a + β a†a†aa - iε(a† + a)/√2`.
    fn gain_loss_oscillator(beta: f64, eps: f64) -> Hamiltonian<f64> {
        let drive = C64::new(0.0, -eps / 2.0_f64.sqrt());
        Hamiltonian::new([
            (1, 1, C64::new(1.0, 0.0)),
            (2, 2, C64::new(beta, 0.0)),
            (1, 0, drive),
            (0, 1, drive),
        ])
    }

    #[test]
    fn gain_loss_symbol_matches_polynomial_form() {
        // K = (p² + q²)/2 + (β/4)(p² + q²)² - iεq
        let (beta, eps) = (0.25, 1.0);
        let h = gain_loss_oscillator(beta, eps);
        for (q, p) in [(1.0, 0.0), (0.5, -1.5), (-2.0, 3.0)] {
            let r2 = q * q + p * p;
            let expected = C64::new(r2 / 2.0 + beta / 4.0 * r2 * r2, -eps * q);
            let got = h.classical_symbol(PhasePoint::new(q, p));
            assert!(
                (got - expected).norm() < 1e-13,
                "symbol mismatch at ({q}, {p}): {got} vs {expected}"
            );
        }
        // Γ = -εq: equals -1 at (q, p) = (1, 0) for ε = 1.
        assert!((h.gamma(PhasePoint::new(1.0, 0.0)) + 1.0).abs() < 1e-14);
    }

    /// Bisection oracle for a scalar root; used to pin fixed-point locations
    /// independently of the Newton implementation.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gain_loss_fixed_point_has_zero_velocity() {
        // The stationary point sits at q = 0, p = p0 with
        // p0³ + p0/β + ε/β = 0; for β = 1/4, ε = 1: p0³ + 4 p0 + 4 = 0.
        let h = gain_loss_oscillator(0.25, 1.0);
        let p0 = bisect(|p| p * p * p + 4.0 * p + 4.0, -2.0, 0.0);
        let (qd, pd) = h.flow_velocity(PhasePoint::new(0.0, p0));
        assert!(qd.abs() < 1e-12, "q̇ = {qd}");
        assert!(pd.abs() < 1e-12, "ṗ = {pd}");
    }

    #[test]
    fn adjoint_conjugates_coefficients() {
        let h = cho(1.0, 0.15);
        assert_eq!(h.adjoint().term(1, 1), C64::new(1.0, 0.15));
        let hermitian = cho(2.0, 0.0);
        assert_eq!(hermitian.adjoint(), hermitian);
    }

    #[test]
    fn hermitian_split_reassembles_operator() {
        let h = gain_loss_oscillator(0.25, 1.0);
        let hh = h.hermitian_component();
        let gg = h.anti_hermitian_component();
        assert!(hh.is_hermitian());
        assert!(gg.is_hermitian());
        // K = Ĥ + iΓ̂
        let back = hh.combined(&gg, C64::new(1.0, 0.0), C64::i());
        assert_eq!(back, h);
        // and pointwise H = Re K, Γ = Im K.
        let pt = PhasePoint::new(0.7, -1.1);
        assert!((hh.classical_symbol(pt).re - h.hermitian_part(pt)).abs() < 1e-14);
        assert!((gg.classical_symbol(pt).re - h.gamma(pt)).abs() < 1e-14);
    }

    #[test]
    fn number_operator_matrix_is_diagonal() {
        let h: Hamiltonian<f64> = Hamiltonian::new([(1, 1, C64::new(1.0, 0.0))]);
        let m = h.fock_matrix(3).unwrap();
        for row in 0..4 {
            for col in 0..4 {
                let expected = if row == col {
                    C64::new(row as f64, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert_eq!(m.entry(row, col), expected);
            }
        }
    }

    #[test]
    fn quartic_ladder_matrix_matches_ladder_algebra() {
        // ⟨k| a†²a² |k⟩ = k(k-1): diag(0, 0, 2) at n_max = 2.
        let h: Hamiltonian<f64> = Hamiltonian::new([(2, 2, C64::new(1.0, 0.0))]);
        let m = h.fock_matrix(2).unwrap();
        let dense = m.to_dense();
        for row in 0..3 {
            for col in 0..3 {
                let expected = if row == col {
                    (row * row).saturating_sub(row) as f64
                } else {
                    0.0
                };
                assert_eq!(dense[row][col], C64::new(expected, 0.0), "({row},{col})");
            }
        }
    }

    #[test]
    fn complex_ho_matrix_has_closed_form_spectrum() {
        // The matrix is diagonal with λ_n = (ω - iγ)(n + 1/2).
        let (omega, gamma) = (1.0, 0.15);
        let m = cho(omega, gamma).fock_matrix(16).unwrap();
        let dense = m.to_dense();
        for n in 0..=16 {
            let lam = C64::new(omega, -gamma) * (n as f64 + 0.5);
            assert!((dense[n][n] - lam).norm() < 1e-12);
            for col in 0..=16 {
                if col != n {
                    assert_eq!(dense[n][col], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn truncation_below_degree_is_rejected() {
        let h: Hamiltonian<f64> = Hamiltonian::new([(2, 2, C64::new(1.0, 0.0))]);
        match h.fock_matrix(3) {
            Err(HamiltonianError::TruncationBelowDegree { n_max, max_degree }) => {
                assert_eq!((n_max, max_degree), (3, 4));
            }
            Ok(_) => panic!("n_max below degree must be rejected"),
        }
        assert!(h.fock_matrix(4).is_ok());
    }

    #[test]
    fn banded_apply_agrees_with_dense() {
        let h = gain_loss_oscillator(0.25, 1.0);
        let m = h.fock_matrix(12).unwrap();
        let dense = m.to_dense();
        let x: Vec<C64> = (0..13)
            .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.61).cos()))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); 13];
        m.apply(&x, &mut out);
        for row in 0..13 {
            let expected: C64 = (0..13).map(|col| dense[row][col] * x[col]).sum();
            assert!((out[row] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn sqrt_falling_factorial_survives_large_arguments() {
        // √(512!/509!) fits comfortably; the log path handles what does not.
        let direct: f64 = sqrt_falling_factorial(512, 3);
        let expected = (512.0_f64 * 511.0 * 510.0).sqrt();
        assert!((direct - expected).abs() / expected < 1e-14);
        let log_path: f64 = sqrt_falling_factorial(400, 200);
        assert!(log_path.is_finite());
        let reference: f64 = ((201..=400).map(|j| (j as f64).ln()).sum::<f64>() * 0.5).exp();
        assert!((log_path - reference).abs() / reference < 1e-12);
    }

    #[test]
    fn flow_field_matches_direct_velocity() {
        let h = gain_loss_oscillator(0.25, 1.0);
        let field = h.flow_field();
        for (q, p) in [(0.0, 0.0), (1.5, -0.4), (-3.0, 5.0)] {
            let pt = PhasePoint::new(q, p);
            let (a, b) = h.flow_velocity(pt);
            let (c, d) = field.velocity(pt);
            assert_eq!(a, c);
            assert_eq!(b, d);
            assert_eq!(h.gamma(pt), field.gamma(pt));
        }
    }

    #[test]
    fn generic_scalar_instantiates_at_f32() {
        let h: Hamiltonian<f32> = Hamiltonian::new([(1, 1, Complex::new(1.0_f32, -0.1))]);
        let k = h.classical_symbol(PhasePoint::new(1.0_f32, 0.0));
        assert!((k.re - 0.5).abs() < 1e-6);
        assert!((k.im + 0.05).abs() < 1e-6);
    }
}
