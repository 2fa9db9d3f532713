//! Semiclassical Husimi evolution by the method of characteristics.
//!
//! The first-order transport equation for the Husimi distribution is solved
//! exactly along the characteristics `ζ̇ = -i ∂K*/∂ζ*`: the value at `(z, t)`
//! is the initial distribution evaluated at the backward-traced point
//! `ζ₀(z, t)`, weighted by the norm landscape
//! `w(z, t) = exp(2 ∫₀ᵗ Γ(ζ(s)) ds)` accumulated along the same trajectory.
//!
//! The exponent is carried as an extra ODE component (`λ̇ = 2Γ`) integrated
//! by the same scheme as the trajectory, so `w` never leaves the log domain
//! until the final exponential. Grid sweeps are embarrassingly parallel: each
//! cell's backtrace is pure and written to its own slot, so results are
//! bitwise identical for any worker count.

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid_io::{FieldKind, FieldMeta, PhaseGrid, ScalarField};
use crate::hamiltonian::{FlowField, Hamiltonian, PhasePoint};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError<T: Real> {
    /// The trajectory left the representable range (divergent flow).
    #[error("trajectory became non-finite at t = {time}")]
    NonFinite { time: T },
    /// No Poincaré return was detected within the horizon.
    #[error("no first return within horizon {horizon}")]
    NoReturn { horizon: T },
    /// The start point is (numerically) an equilibrium; there is no orbit.
    #[error("flow velocity vanishes at the start point")]
    Stationary,
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(&'static str),
}

/// Time-stepping scheme for the characteristic ODE.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Classic fixed-step fourth-order Runge-Kutta (the default; deterministic
    /// step count, reproducible outputs).
    Rk4,
    /// Adaptive Dormand-Prince 5(4) with relative tolerance `rk45_tol`.
    Rk45,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSettings<T> {
    /// Step size for [`Scheme::Rk4`]; initial step for [`Scheme::Rk45`].
    pub dt: T,
    pub scheme: Scheme,
    /// Relative tolerance for the adaptive scheme.
    pub rk45_tol: T,
    /// Clamp bound on the accumulated exponent `|log w|`.
    pub max_log_w: T,
}

impl<T: Real> Default for IntegratorSettings<T> {
    fn default() -> Self {
        Self {
            dt: T::of(1e-3),
            scheme: Scheme::Rk4,
            rk45_tol: T::of(1e-9),
            max_log_w: T::of(700.0),
        }
    }
}

impl<T: Real> IntegratorSettings<T> {
    pub fn with_dt(dt: T) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), FlowError<T>> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(FlowError::InvalidSettings("dt must be positive and finite"));
        }
        if !(self.rk45_tol > T::zero()) {
            return Err(FlowError::InvalidSettings("rk45_tol must be positive"));
        }
        if !(self.max_log_w > T::zero()) {
            return Err(FlowError::InvalidSettings("max_log_w must be positive"));
        }
        Ok(())
    }
}

/// A characteristic trajectory with its accumulated norm exponent.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub points: Vec<PhasePoint<T>>,
    /// Running `2∫Γ ds` along the path; starts at zero.
    pub log_w: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn end_point(&self) -> PhasePoint<T> {
        *self.points.last().expect("trajectory has samples")
    }
}

/// Result of tracing one phase-space point backwards for a duration `t`.
#[derive(Clone, Copy, Debug)]
pub struct Backtrace<T> {
    /// The initial condition `ζ₀(z, t)` whose forward flow reaches `z` at `t`.
    pub zeta0: PhasePoint<T>,
    /// `log w(z, t) = 2 ∫₀ᵗ Γ(ζ(s)) ds`; `w` grows where `Γ > 0`.
    pub log_w: T,
    /// Whether `|log_w|` hit the clamp bound along the way.
    pub saturated: bool,
}

/// Augmented ODE state `(q, p, λ)` with `λ̇ = 2Γ`.
type Aug<T> = [T; 3];

fn rhs<T: Real>(field: &FlowField<T>, y: Aug<T>) -> Aug<T> {
    let pt = PhasePoint::new(y[0], y[1]);
    let (qd, pd) = field.velocity(pt);
    [qd, pd, T::of(2.0) * field.gamma(pt)]
}

fn rk4_step<T: Real>(field: &FlowField<T>, y: Aug<T>, h: T) -> Aug<T> {
    let half = T::of(0.5);
    let k1 = rhs(field, y);
    let k2 = rhs(field, add(y, scale(k1, h * half)));
    let k3 = rhs(field, add(y, scale(k2, h * half)));
    let k4 = rhs(field, add(y, scale(k3, h)));
    let sixth = h / T::of(6.0);
    [
        y[0] + sixth * (k1[0] + T::of(2.0) * (k2[0] + k3[0]) + k4[0]),
        y[1] + sixth * (k1[1] + T::of(2.0) * (k2[1] + k3[1]) + k4[1]),
        y[2] + sixth * (k1[2] + T::of(2.0) * (k2[2] + k3[2]) + k4[2]),
    ]
}

fn add<T: Real>(a: Aug<T>, b: Aug<T>) -> Aug<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale<T: Real>(a: Aug<T>, s: T) -> Aug<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Dormand-Prince 5(4) tableau (the classic DOPRI5 coefficients).
mod dopri5 {
    pub const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// 5th-order weights (same as the last A row; FSAL pair).
    pub const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    /// Embedded 4th-order weights.
    pub const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
}

struct StepOutcome<T> {
    state: Aug<T>,
    saturated: bool,
}

/// Integrate the augmented characteristic ODE from `start` over `t_final`
/// (which may be negative), calling `observe(t, state)` after every accepted
/// step. Returns the final state and whether the exponent clamp engaged.
fn integrate_augmented<T: Real>(
    field: &FlowField<T>,
    start: Aug<T>,
    t_final: T,
    settings: &IntegratorSettings<T>,
    mut observe: impl FnMut(T, Aug<T>),
) -> Result<StepOutcome<T>, FlowError<T>> {
    settings.check()?;
    let mut saturated = false;
    let mut y = start;
    if t_final == T::zero() {
        return Ok(StepOutcome {
            state: y,
            saturated,
        });
    }

    let mut clamp = |y: &mut Aug<T>| {
        if y[2] > settings.max_log_w {
            y[2] = settings.max_log_w;
            saturated = true;
        } else if y[2] < -settings.max_log_w {
            y[2] = -settings.max_log_w;
            saturated = true;
        }
    };

    match settings.scheme {
        Scheme::Rk4 => {
            let steps = (t_final.abs() / settings.dt).ceil();
            let n = steps.to_usize().unwrap_or(usize::MAX).max(1);
            let h = t_final / T::from_usize(n).unwrap();
            for step in 1..=n {
                y = rk4_step(field, y, h);
                let t = h * T::from_usize(step).unwrap();
                if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite()) {
                    return Err(FlowError::NonFinite { time: t });
                }
                clamp(&mut y);
                observe(t, y);
            }
        }
        Scheme::Rk45 => {
            let a: Vec<Vec<T>> = dopri5::A
                .iter()
                .map(|row| row.iter().map(|&c| T::of(c)).collect())
                .collect();
            let b5: Vec<T> = dopri5::B5.iter().map(|&c| T::of(c)).collect();
            let b4: Vec<T> = dopri5::B4.iter().map(|&c| T::of(c)).collect();
            let dir = if t_final > T::zero() { T::one() } else { -T::one() };
            let t_abs = t_final.abs();
            let mut t = T::zero();
            let mut h = settings.dt.min(t_abs);
            let h_min = t_abs * T::of(1e-14);
            let mut k = [[T::zero(); 3]; 7];
            while t < t_abs {
                h = h.min(t_abs - t);
                k[0] = rhs(field, y);
                for stage in 1..7 {
                    let mut yi = y;
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        let coeff = if stage < 7 && j < 6 { a[stage - 1][j] } else { T::zero() };
                        yi = add(yi, scale(*kj, dir * h * coeff));
                    }
                    if stage < 6 {
                        k[stage] = rhs(field, yi);
                    } else {
                        // 7th stage is the FSAL evaluation at the 5th-order result.
                        k[6] = rhs(field, yi);
                    }
                }
                let mut y5 = y;
                let mut err = T::zero();
                let mut y_err = [T::zero(); 3];
                for j in 0..7 {
                    y5 = add(y5, scale(k[j], dir * h * b5[j]));
                    y_err = add(y_err, scale(k[j], dir * h * (b5[j] - b4[j])));
                }
                for i in 0..3 {
                    let tol = settings.rk45_tol * (T::one() + y[i].abs().max(y5[i].abs()));
                    err = err.max((y_err[i] / tol).abs());
                }
                if err <= T::one() {
                    t += h;
                    y = y5;
                    if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite()) {
                        return Err(FlowError::NonFinite { time: dir * t });
                    }
                    clamp(&mut y);
                    observe(dir * t, y);
                }
                let factor = if err > T::zero() {
                    (T::of(0.9) * err.powf(T::of(-0.2))).min(T::of(5.0)).max(T::of(0.2))
                } else {
                    T::of(5.0)
                };
                h = h * factor;
                if h < h_min || !h.is_finite() {
                    return Err(FlowError::NonFinite { time: dir * t });
                }
            }
        }
    }
    Ok(StepOutcome {
        state: y,
        saturated,
    })
}

/// Integrate the characteristic through `start` for a (possibly negative)
/// duration, recording every accepted step. `log_w` accumulates `2∫Γ ds`
/// along the path with the quadrature of the trajectory scheme itself.
pub fn integrate_characteristic<T: Real>(
    h: &Hamiltonian<T>,
    start: PhasePoint<T>,
    t_final: T,
    settings: &IntegratorSettings<T>,
) -> Result<Trajectory<T>, FlowError<T>> {
    let field = h.flow_field();
    integrate_characteristic_in(&field, start, t_final, settings)
}

/// As [`integrate_characteristic`], reusing a prebuilt [`FlowField`].
pub fn integrate_characteristic_in<T: Real>(
    field: &FlowField<T>,
    start: PhasePoint<T>,
    t_final: T,
    settings: &IntegratorSettings<T>,
) -> Result<Trajectory<T>, FlowError<T>> {
    let mut traj = Trajectory {
        times: vec![T::zero()],
        points: vec![start],
        log_w: vec![T::zero()],
    };
    integrate_augmented(
        field,
        [start.q, start.p, T::zero()],
        t_final,
        settings,
        |t, y| {
            traj.times.push(t);
            traj.points.push(PhasePoint::new(y[0], y[1]));
            traj.log_w.push(y[2]);
        },
    )?;
    Ok(traj)
}

/// Trace the point `z` backwards for duration `t ≥ 0`, returning the
/// initial condition `ζ₀(z, t)` and the exponent of the norm landscape.
pub fn backtrace<T: Real>(
    h: &Hamiltonian<T>,
    z: PhasePoint<T>,
    t: T,
    settings: &IntegratorSettings<T>,
) -> Result<Backtrace<T>, FlowError<T>> {
    let field = h.flow_field();
    backtrace_in(&field, z, t, settings)
}

/// As [`backtrace`], reusing a prebuilt [`FlowField`].
pub fn backtrace_in<T: Real>(
    field: &FlowField<T>,
    z: PhasePoint<T>,
    t: T,
    settings: &IntegratorSettings<T>,
) -> Result<Backtrace<T>, FlowError<T>> {
    if t < T::zero() {
        return Err(FlowError::InvalidSettings("backtrace duration must be ≥ 0"));
    }
    // Integrate to -t; the exponent accumulated over the reversed time axis
    // is the negative of 2∫₀ᵗ Γ ds along the forward parametrisation.
    let outcome = integrate_augmented(field, [z.q, z.p, T::zero()], -t, settings, |_, _| {})?;
    Ok(Backtrace {
        zeta0: PhasePoint::new(outcome.state[0], outcome.state[1]),
        log_w: -outcome.state[2],
        saturated: outcome.saturated,
    })
}

/// Backtrace every grid cell in parallel. Cells where the backward flow
/// diverges carry their per-cell error instead of a fabricated value.
pub fn backtrace_grid<T: Real>(
    h: &Hamiltonian<T>,
    grid: &PhaseGrid<T>,
    t: T,
    settings: &IntegratorSettings<T>,
) -> Result<Vec<Result<Backtrace<T>, FlowError<T>>>, FlowError<T>> {
    settings.check()?;
    if t < T::zero() {
        return Err(FlowError::InvalidSettings("backtrace duration must be ≥ 0"));
    }
    let field = h.flow_field();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|idx| backtrace_in(&field, grid.point_at(idx), t, settings))
        .collect())
}

/// Combine per-cell backtraces with an initial distribution:
/// `Q(z, t) = Q₀(ζ₀) · e^{log w}`, evaluated in the log domain where
/// `Q₀ > 0` to avoid premature underflow. Diverged or saturated cells are
/// flagged invalid.
pub fn apply_initial_distribution<T: Real>(
    grid: &PhaseGrid<T>,
    backtraces: &[Result<Backtrace<T>, FlowError<T>>],
    q0: impl Fn(PhasePoint<T>) -> T + Sync,
    meta: FieldMeta<T>,
) -> ScalarField<T> {
    assert_eq!(backtraces.len(), grid.len());
    let cells: Vec<Option<T>> = backtraces
        .par_iter()
        .map(|bt| match bt {
            Ok(b) if !b.saturated => {
                let q0v = q0(b.zeta0);
                if q0v > T::zero() {
                    Some((q0v.ln() + b.log_w).exp())
                } else {
                    Some(T::zero())
                }
            }
            _ => None,
        })
        .collect();
    ScalarField::from_cells(*grid, meta, cells)
}

/// Transported-and-weighted Husimi field at time `t`:
/// per cell `Q₀(ζ₀(z, t)) w(z, t)`.
pub fn classical_husimi<T: Real>(
    h: &Hamiltonian<T>,
    q0: impl Fn(PhasePoint<T>) -> T + Sync,
    grid: &PhaseGrid<T>,
    t: T,
    settings: &IntegratorSettings<T>,
) -> Result<ScalarField<T>, FlowError<T>> {
    let backtraces = backtrace_grid(h, grid, t, settings)?;
    let meta = FieldMeta::new(FieldKind::HusimiClassical, t, h.digest());
    Ok(apply_initial_distribution(grid, &backtraces, q0, meta))
}

/// The norm landscape `w(z, t)` and its logarithm as grid fields.
pub fn norm_landscape<T: Real>(
    h: &Hamiltonian<T>,
    grid: &PhaseGrid<T>,
    t: T,
    settings: &IntegratorSettings<T>,
) -> Result<(ScalarField<T>, ScalarField<T>), FlowError<T>> {
    let backtraces = backtrace_grid(h, grid, t, settings)?;
    Ok(norm_landscape_from_backtraces(h, grid, t, &backtraces))
}

/// As [`norm_landscape`], from precomputed backtraces.
pub fn norm_landscape_from_backtraces<T: Real>(
    h: &Hamiltonian<T>,
    grid: &PhaseGrid<T>,
    t: T,
    backtraces: &[Result<Backtrace<T>, FlowError<T>>],
) -> (ScalarField<T>, ScalarField<T>) {
    let ok = |bt: &Result<Backtrace<T>, FlowError<T>>| match bt {
        Ok(b) if !b.saturated => Some(b.log_w),
        _ => None,
    };
    let w_cells: Vec<Option<T>> = backtraces.iter().map(|bt| ok(bt).map(|lw| lw.exp())).collect();
    let log_cells: Vec<Option<T>> = backtraces.iter().map(ok).collect();
    let w = ScalarField::from_cells(
        *grid,
        FieldMeta::new(FieldKind::NormLandscape, t, h.digest()),
        w_cells,
    );
    let log_w = ScalarField::from_cells(
        *grid,
        FieldMeta::new(FieldKind::LogNormLandscape, t, h.digest()),
        log_cells,
    );
    (w, log_w)
}

/// A located equilibrium of the characteristic flow with the eigenvalues of
/// its linearisation (complex pair: spiral/centre; real pair: node/saddle).
#[derive(Clone, Copy, Debug)]
pub struct FixedPoint<T> {
    pub point: PhasePoint<T>,
    pub eigenvalues: [Complex<T>; 2],
    /// `|velocity|` remaining at the converged point.
    pub residual: T,
}

impl<T: Real> FixedPoint<T> {
    /// All eigenvalues strictly in the right half-plane (unstable in every
    /// direction; for a complex pair, an outward spiral).
    pub fn is_source(&self) -> bool {
        self.eigenvalues.iter().all(|ev| ev.re > T::zero())
    }

    /// Complex-conjugate eigenvalue pair (rotating linearisation).
    pub fn is_spiral(&self) -> bool {
        self.eigenvalues[0].im != T::zero()
    }
}

/// Outcome of a multi-seed Newton search.
#[derive(Clone, Debug)]
pub struct FixedPointSearch<T> {
    /// Deduplicated fixed points, sorted by `(q, p)`.
    pub points: Vec<FixedPoint<T>>,
    /// Seeds that failed to converge to the residual tolerance.
    pub nonconvergent: usize,
}

/// Newton search for equilibria of the characteristic flow from a list of
/// seeds. A seed counts as converged when the remaining `|velocity|` is at
/// most `tol`. Distinct seeds landing within `√tol` of each other are merged,
/// keeping the smaller residual.
pub fn find_fixed_points<T: Real>(
    h: &Hamiltonian<T>,
    seeds: &[PhasePoint<T>],
    tol: T,
) -> FixedPointSearch<T> {
    let field = h.flow_field();
    let dedup_radius = tol.sqrt();
    let mut points: Vec<FixedPoint<T>> = Vec::new();
    let mut nonconvergent = 0;

    'seed: for &seed in seeds {
        let mut pt = seed;
        let mut converged = false;
        for _ in 0..60 {
            let (vq, vp) = field.velocity(pt);
            let res = (vq * vq + vp * vp).sqrt();
            if !res.is_finite() {
                break;
            }
            if res <= tol {
                converged = true;
                break;
            }
            let j = field.jacobian(pt);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < T::of(1e-30) {
                break;
            }
            let dq = (-vq * j[1][1] + vp * j[0][1]) / det;
            let dp = (vq * j[1][0] - vp * j[0][0]) / det;
            pt = PhasePoint::new(pt.q + dq, pt.p + dp);
            if !(pt.q.is_finite() && pt.p.is_finite()) {
                break;
            }
        }
        if !converged {
            nonconvergent += 1;
            continue;
        }
        let (vq, vp) = field.velocity(pt);
        let residual = (vq * vq + vp * vp).sqrt();
        let j = field.jacobian(pt);
        let eigenvalues = eig2(j);
        // Merge with an earlier find if within the dedup radius.
        for existing in &mut points {
            if existing.point.distance(&pt) <= dedup_radius {
                if residual < existing.residual {
                    *existing = FixedPoint {
                        point: pt,
                        eigenvalues,
                        residual,
                    };
                }
                continue 'seed;
            }
        }
        points.push(FixedPoint {
            point: pt,
            eigenvalues,
            residual,
        });
    }

    points.sort_by(|a, b| {
        (a.point.q, a.point.p)
            .partial_cmp(&(b.point.q, b.point.p))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    FixedPointSearch {
        points,
        nonconvergent,
    }
}

/// Eigenvalues of a real 2×2 matrix.
fn eig2<T: Real>(j: [[T; 2]; 2]) -> [Complex<T>; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let half = T::of(0.5);
    let disc = tr * tr - T::of(4.0) * det;
    if disc >= T::zero() {
        let root = disc.sqrt();
        [
            Complex::new((tr + root) * half, T::zero()),
            Complex::new((tr - root) * half, T::zero()),
        ]
    } else {
        let root = (-disc).sqrt();
        [
            Complex::new(tr * half, root * half),
            Complex::new(tr * half, -root * half),
        ]
    }
}

/// Uniform lattice of Newton seeds over the grid bounds.
pub fn seed_lattice<T: Real>(grid: &PhaseGrid<T>, per_axis: usize) -> Vec<PhasePoint<T>> {
    let (q_min, q_max, p_min, p_max) = grid.bounds();
    let step = |lo: T, hi: T, k: usize| {
        lo + (hi - lo) * T::from_usize(k).unwrap() / T::from_usize(per_axis - 1).unwrap()
    };
    let mut seeds = Vec::with_capacity(per_axis * per_axis);
    for j in 0..per_axis {
        for i in 0..per_axis {
            seeds.push(PhasePoint::new(
                step(q_min, q_max, i),
                step(p_min, p_max, j),
            ));
        }
    }
    seeds
}

/// First-return time to the Poincaré section through `start` (the line
/// orthogonal to the local velocity, crossed in the forward direction),
/// detected on the fixed-step RK4 trajectory with linear interpolation
/// between the bracketing steps.
pub fn orbit_period<T: Real>(
    h: &Hamiltonian<T>,
    start: PhasePoint<T>,
    settings: &IntegratorSettings<T>,
    horizon: T,
) -> Result<T, FlowError<T>> {
    settings.check()?;
    let field = h.flow_field();
    let (v0q, v0p) = field.velocity(start);
    let speed2 = v0q * v0q + v0p * v0p;
    if !(speed2 > T::zero()) {
        return Err(FlowError::Stationary);
    }

    let section = |pt: PhasePoint<T>| (pt.q - start.q) * v0q + (pt.p - start.p) * v0p;
    let h_step = settings.dt;
    let mut y = [start.q, start.p, T::zero()];
    let mut t = T::zero();
    let mut prev_g = T::zero();
    let steps = (horizon / h_step).ceil().to_usize().unwrap_or(usize::MAX);
    for _ in 0..steps {
        let y_next = rk4_step(&field, y, h_step);
        let t_next = t + h_step;
        if !(y_next[0].is_finite() && y_next[1].is_finite()) {
            return Err(FlowError::NonFinite { time: t_next });
        }
        let pt = PhasePoint::new(y_next[0], y_next[1]);
        let g = section(pt);
        if prev_g < T::zero() && g >= T::zero() {
            let (vq, vp) = field.velocity(pt);
            if vq * v0q + vp * v0p > T::zero() {
                let frac = prev_g / (prev_g - g);
                return Ok(t + frac * h_step);
            }
        }
        prev_g = g;
        y = y_next;
        t = t_next;
    }
    Err(FlowError::NoReturn { horizon })
}
