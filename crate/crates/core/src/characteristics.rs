//! Stochastic characteristics `X_t` and the slope `Y_t = ∂ₓu(t, X_t)` carried along them.
//!
//! ```text
//! dX = u(0, X_0) dt + Σ ξ_k(X) ∘ dW_k
//! dY = −Y² dt − Σ ∂ₓξ_k(X) Y ∘ dW_k
//! ```
//!
//! Both integrators advance `Y` by the exact Riccati flow of `−Y²` over the step
//! followed by a multiplicative noise factor, so that `Y = 0` stays an invariant
//! line and noise-free slopes follow `Y_0 / (1 + Y_0 t)` to rounding.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::noise::{CorrectionFields, NoiseBasis};
use crate::paths::BrownianPath;
use crate::scalar::{lit, wrap, Scalar};
use crate::spline::PeriodicSpline;

/// Default `|Y|` beyond which a slope counts as blown up.
pub const DEFAULT_SLOPE_CAP: f64 = 1e6;

/// Shape of an initial velocity profile `u_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind<T> {
    /// `u_0(x) = −σ x + offset`.
    NegativeLine { sigma: T, offset: T },
    /// `u_0(x) = offset + amplitude · sin(wavenumber · x)`.
    SineWave { amplitude: T, wavenumber: T, offset: T },
    /// `left` on `[0, position)`, `right` elsewhere; periodic when `period` is set,
    /// otherwise `left` for `x < position` on the line.
    Riemann { left: T, right: T, position: T, period: Option<T> },
    /// Periodic cubic spline through samples.
    Tabulated(PeriodicSpline<T>),
}

/// Initial profile `u_0` together with its exact derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile<T> {
    pub kind: ProfileKind<T>,
}

impl<T: Scalar> InitialProfile<T> {
    pub fn new(kind: ProfileKind<T>) -> Self {
        Self { kind }
    }

    pub fn negative_line(sigma: T, offset: T) -> Self {
        Self::new(ProfileKind::NegativeLine { sigma, offset })
    }

    pub fn sine(amplitude: T, wavenumber: T, offset: T) -> Self {
        Self::new(ProfileKind::SineWave { amplitude, wavenumber, offset })
    }

    pub fn riemann(left: T, right: T, position: T, period: Option<T>) -> Self {
        Self::new(ProfileKind::Riemann { left, right, position, period })
    }

    pub fn u0(&self, x: T) -> T {
        match &self.kind {
            ProfileKind::NegativeLine { sigma, offset } => *offset - *sigma * x,
            ProfileKind::SineWave { amplitude, wavenumber, offset } => {
                *offset + *amplitude * (*wavenumber * x).sin()
            }
            ProfileKind::Riemann { left, right, position, period } => {
                let s = match period {
                    Some(p) => wrap(x, *p),
                    None => x,
                };
                let inside = match period {
                    Some(_) => s < *position,
                    None => s < *position,
                };
                if inside {
                    *left
                } else {
                    *right
                }
            }
            ProfileKind::Tabulated(sp) => sp.eval(x, 0),
        }
    }

    pub fn du0(&self, x: T) -> T {
        match &self.kind {
            ProfileKind::NegativeLine { sigma, .. } => -*sigma,
            ProfileKind::SineWave { amplitude, wavenumber, .. } => {
                *amplitude * *wavenumber * (*wavenumber * x).cos()
            }
            ProfileKind::Riemann { .. } => T::zero(),
            ProfileKind::Tabulated(sp) => sp.eval(x, 1),
        }
    }

    /// Largest gap between `du0` and a centered difference of `u0` over `probe`.
    /// Piecewise-constant profiles report zero.
    pub fn derivative_mismatch(&self, probe: &[T]) -> T {
        if matches!(self.kind, ProfileKind::Riemann { .. }) {
            return T::zero();
        }
        let h = lit::<T>(1e-5);
        let two = lit::<T>(2.0);
        probe
            .iter()
            .map(|&x| {
                let fd = (self.u0(x + h) - self.u0(x - h)) / (two * h);
                (fd - self.du0(x)).abs() / T::one().max(self.du0(x).abs())
            })
            .fold(T::zero(), T::max)
    }

    /// Whether `u_0 > 0` on every probe point. Reported, never enforced.
    pub fn is_positive_on(&self, probe: &[T]) -> bool {
        probe.iter().all(|&x| self.u0(x) > T::zero())
    }
}

/// Why a characteristic stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeathReason {
    BlowUp,
    SignFlip,
    NonFinite,
    OutOfDomain,
}

impl DeathReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DeathReason::BlowUp => "blow-up",
            DeathReason::SignFlip => "sign-flip",
            DeathReason::NonFinite => "non-finite",
            DeathReason::OutOfDomain => "out-of-domain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Death<T> {
    pub reason: DeathReason,
    pub time: T,
}

/// Position, slope and transported velocity of one characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState<T> {
    pub x: T,
    pub y: T,
    pub u_val: T,
    pub alive: bool,
    pub death: Option<Death<T>>,
}

impl<T: Scalar> CharState<T> {
    pub fn new(x: T, y: T, u_val: T) -> Self {
        Self { x, y, u_val, alive: true, death: None }
    }

    /// Characteristic starting at `x0` with `Y_0 = u_0'(x0)`.
    pub fn from_profile(profile: &InitialProfile<T>, x0: T) -> Self {
        Self::new(x0, profile.du0(x0), profile.u0(x0))
    }

    fn kill(&mut self, reason: DeathReason, time: T) {
        self.alive = false;
        self.death = Some(Death { reason, time });
    }
}

/// Integration scheme for the characteristic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler-Maruyama on the Itô form.
    Ito,
    /// Stratonovich predictor-corrector.
    Heun,
}

/// One Euler-Maruyama step of the Itô system
/// `dX = (u + φ(X)) dt + Σ ξ_k(X) dW_k`, `dY = (−Y² + ψ(X) Y) dt − Σ ∂ₓξ_k(X) Y dW_k`.
///
/// `t` is the time at the start of the step; it is only used to date deaths.
pub fn step_ito<T: Scalar>(
    states: &mut [CharState<T>],
    corrections: &CorrectionFields<T>,
    dw: &[T],
    t: T,
    dt: T,
    cap: T,
) {
    let basis = corrections.basis();
    for s in states.iter_mut().filter(|s| s.alive) {
        let (noise, slope_noise) = basis.weighted_sums(s.x, dw);
        let drift = s.u_val + corrections.phi(s.x);
        let factor = T::one() + corrections.psi(s.x) * dt - slope_noise;
        let x_new = s.x + drift * dt + noise;
        finish_step(s, x_new, factor, basis, t, dt, cap);
    }
}

/// One Heun (Stratonovich trapezoidal) step of
/// `dX = u dt + Σ ξ_k(X) ∘ dW_k`, `dY = −Y² dt − Σ ∂ₓξ_k(X) Y ∘ dW_k`.
pub fn step_stratonovich_heun<T: Scalar>(
    states: &mut [CharState<T>],
    basis: &NoiseBasis<T>,
    dw: &[T],
    t: T,
    dt: T,
    cap: T,
) {
    for s in states.iter_mut().filter(|s| s.alive) {
        let (x_new, x_pred, a0) = heun_position(s.x, s.u_val, basis, dw, dt);
        let factor = if basis.is_empty() {
            T::one()
        } else {
            let (_, a1) = basis.weighted_sums(x_pred, dw);
            let half = lit::<T>(0.5);
            T::one() - half * a0 - half * a1 * (T::one() - a0)
        };
        finish_step(s, x_new, factor, basis, t, dt, cap);
    }
}

/// Heun update of the position alone. Returns the new position, the predictor,
/// and `Σ ∂ₓξ_k(X) dW_k` at the old position.
#[inline]
fn heun_position<T: Scalar>(x: T, u: T, basis: &NoiseBasis<T>, dw: &[T], dt: T) -> (T, T, T) {
    if basis.is_empty() {
        let x_new = x + u * dt;
        return (x_new, x_new, T::zero());
    }
    let (v0, a0) = basis.weighted_sums(x, dw);
    let x_pred = x + u * dt + v0;
    let v1 = basis.velocity(x_pred, dw);
    let half = lit::<T>(0.5);
    (x + u * dt + half * (v0 + v1), x_pred, a0)
}

/// Position after one step of the frozen-noise flow `dx/dτ = u dt + Σ ξ_k(x) ΔW_k`,
/// `τ ∈ [0, 1]`, solved with one classical RK4 step.
#[inline]
fn wong_zakai_position<T: Scalar>(x: T, u: T, basis: &NoiseBasis<T>, dw: &[T], dt: T) -> T {
    let drift = u * dt;
    if basis.is_empty() {
        return x + drift;
    }
    let half = lit::<T>(0.5);
    let k1 = drift + basis.velocity(x, dw);
    let k2 = drift + basis.velocity(x + half * k1, dw);
    let k3 = drift + basis.velocity(x + half * k2, dw);
    let k4 = drift + basis.velocity(x + k3, dw);
    x + (k1 + lit::<T>(2.0) * (k2 + k3) + k4) / lit(6.0)
}

/// Applies the exact Riccati flow and the noise factor to `Y`, and commits `x_new`.
#[inline]
fn finish_step<T: Scalar>(
    s: &mut CharState<T>,
    x_new: T,
    factor: T,
    basis: &NoiseBasis<T>,
    t: T,
    dt: T,
    cap: T,
) {
    let y = s.y;
    let denom = T::one() + y * dt;
    if denom <= T::zero() {
        // 1/Y decreases by exactly dt per unit time under dY = −Y² dt
        s.kill(DeathReason::BlowUp, t - T::one() / y);
        return;
    }
    let y_new = y / denom * factor;
    if !x_new.is_finite() {
        s.kill(DeathReason::NonFinite, t + dt);
        return;
    }
    if !basis.domain().contains(x_new) {
        s.kill(DeathReason::OutOfDomain, t + dt);
        return;
    }
    if y != T::zero() && factor <= T::zero() {
        s.kill(DeathReason::SignFlip, t + dt);
        return;
    }
    if !y_new.is_finite() || y_new.abs() > cap {
        // 1/Y is close to linear in time near a Riccati blow-up
        let r0 = T::one() / y;
        let r1 = if y_new.is_finite() { T::one() / y_new } else { T::zero() };
        let frac = if r0 != r1 { r0 / (r0 - r1) } else { T::one() };
        s.kill(DeathReason::BlowUp, t + dt * frac);
        return;
    }
    s.x = x_new;
    s.y = y_new;
}

/// Drives an ensemble of characteristics with a scheme and a slope cap.
#[derive(Debug, Clone)]
pub struct Integrator<'a, T> {
    pub corrections: &'a CorrectionFields<T>,
    pub scheme: Scheme,
    pub cap: T,
}

impl<'a, T: Scalar> Integrator<'a, T> {
    pub fn new(corrections: &'a CorrectionFields<T>, scheme: Scheme) -> Self {
        Self { corrections, scheme, cap: lit(DEFAULT_SLOPE_CAP) }
    }

    pub fn with_cap(mut self, cap: T) -> Self {
        self.cap = cap;
        self
    }

    pub fn advance(&self, states: &mut [CharState<T>], dw: &[T], t: T, dt: T) {
        match self.scheme {
            Scheme::Ito => step_ito(states, self.corrections, dw, t, dt, self.cap),
            Scheme::Heun => {
                step_stratonovich_heun(states, self.corrections.basis(), dw, t, dt, self.cap)
            }
        }
    }

    /// Integrates over the whole path, calling `observe(step, t, states)` at every
    /// grid node including the initial one.
    pub fn run<F>(&self, states: &mut [CharState<T>], path: &BrownianPath<T>, mut observe: F)
    where
        F: FnMut(usize, T, &[CharState<T>]),
    {
        let grid = *path.grid();
        let dt = grid.dt();
        observe(0, grid.t0, states);
        for i in 0..grid.n_steps {
            self.advance(states, path.step(i), grid.time(i), dt);
            observe(i + 1, grid.time(i + 1), states);
        }
    }
}

/// Closed-form characteristic for `ξ(x) = αx + β` driven by mode `k` of `path`:
///
/// ```text
/// X_t = e^{αW_t} (γ + u_0(γ) ∫₀ᵗ e^{−αW_s} ds + β ∫₀ᵗ e^{−αW_s} ∘ dW_s)
/// ```
///
/// Both integrals use the trapezoidal rule on the path grid; for the stochastic
/// one this is the Stratonovich (midpoint-average) convention.
pub fn exact_linear_solution<T: Scalar>(
    gamma: T,
    profile: &InitialProfile<T>,
    alpha: T,
    beta: T,
    path: &BrownianPath<T>,
    k: usize,
) -> Vec<T> {
    let w = path.cumulative(k);
    let dt = path.grid().dt();
    let half = lit::<T>(0.5);
    let u = profile.u0(gamma);
    let mut out = Vec::with_capacity(w.len());
    let mut ds_integral = T::zero();
    let mut dw_integral = T::zero();
    out.push(gamma);
    for i in 0..w.len() - 1 {
        let e0 = (-alpha * w[i]).exp();
        let e1 = (-alpha * w[i + 1]).exp();
        ds_integral = ds_integral + half * (e0 + e1) * dt;
        dw_integral = dw_integral + half * (e0 + e1) * (w[i + 1] - w[i]);
        out.push((alpha * w[i + 1]).exp() * (gamma + u * ds_integral + beta * dw_integral));
    }
    out
}

/// Earliest time at which two initially adjacent characteristics of the fan swap
/// order, all driven by the same path. `None` if no pair crosses by the end of the grid.
///
/// Positions follow the frozen-noise flow over each step (RK4), which keeps the
/// second-order drift-noise interaction a Heun step drops; the crossing time within
/// a step is the root of the linearly interpolated gap.
pub fn first_crossing<T: Scalar>(
    fan: &[T],
    profile: &InitialProfile<T>,
    basis: &NoiseBasis<T>,
    path: &BrownianPath<T>,
) -> Result<Option<T>> {
    if fan.len() < 2 {
        return Err(Error::InvalidParameter("crossing needs at least two characteristics".into()));
    }
    if fan.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("fan positions must be strictly increasing".into()));
    }
    if path.n_modes() != basis.len() {
        return Err(Error::InvalidParameter(format!(
            "path has {} modes but basis has {}",
            path.n_modes(),
            basis.len()
        )));
    }
    let grid = *path.grid();
    let dt = grid.dt();
    let speeds: Vec<T> = fan.iter().map(|&x| profile.u0(x)).collect();
    let mut xs = fan.to_vec();
    let mut next = xs.clone();
    for i in 0..grid.n_steps {
        let dw = path.step(i);
        for j in 0..xs.len() {
            next[j] = wong_zakai_position(xs[j], speeds[j], basis, dw, dt);
        }
        let mut earliest: Option<T> = None;
        for j in 0..xs.len() - 1 {
            let g0 = xs[j + 1] - xs[j];
            let g1 = next[j + 1] - next[j];
            if g1 <= T::zero() {
                let frac = g0 / (g0 - g1);
                let tc = grid.time(i) + frac * dt;
                earliest = Some(earliest.map_or(tc, |e: T| e.min(tc)));
            }
        }
        if earliest.is_some() {
            return Ok(earliest);
        }
        std::mem::swap(&mut xs, &mut next);
    }
    Ok(None)
}

/// `θ(u_0)`: the steepest negative slope of the profile over the probe points,
/// clamped at zero.
pub fn steepest_negative_slope<T: Scalar>(profile: &InitialProfile<T>, probe: &[T]) -> T {
    let mut pts = probe.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite probe points"));
    let mut theta = T::zero();
    // any difference quotient is an average of adjacent ones, so adjacent pairs suffice
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let q = (profile.u0(w[1]) - profile.u0(w[0])) / (w[1] - w[0]);
            theta = theta.max(-q);
        }
    }
    if !matches!(profile.kind, ProfileKind::Riemann { .. }) {
        for &x in &pts {
            theta = theta.max(-profile.du0(x));
        }
    }
    theta.max(T::zero())
}

/// Characteristic states recorded at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CharSnapshot<T> {
    pub t: T,
    pub states: Vec<CharState<T>>,
}

/// `max |u(t, X_t) − u(0, X_0)|` over alive characteristics and paired field
/// snapshots. Snapshots are matched by index and must share their times.
pub fn advection_residual<T: Scalar>(trajectory: &[CharSnapshot<T>], fields: &[GridField<T>]) -> Result<T> {
    if trajectory.len() != fields.len() {
        return Err(Error::GridMismatch(format!(
            "{} characteristic snapshots vs {} field snapshots",
            trajectory.len(),
            fields.len()
        )));
    }
    let mut worst = T::zero();
    for (snap, field) in trajectory.iter().zip(fields) {
        let tol = lit::<T>(1e-9) * (T::one() + snap.t.abs());
        if (snap.t - field.t).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "snapshot times differ: {} vs {}",
                snap.t, field.t
            )));
        }
        for s in snap.states.iter().filter(|s| s.alive) {
            let u = field.sample(s.x)?;
            worst = worst.max((u - s.u_val).abs());
        }
    }
    Ok(worst)
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow<T> {
    pub t: T,
    pub path_index: u64,
    pub char_index: usize,
    pub x: T,
    pub y: T,
    pub u_val: T,
    pub alive: bool,
}

/// Writes rows as CSV with header `t,path_index,char_index,X,Y,u_val,alive`.
pub fn write_trajectory_csv<T: Scalar, W: Write>(rows: &[TrajectoryRow<T>], mut w: W) -> Result<()> {
    writeln!(w, "t,path_index,char_index,X,Y,u_val,alive")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            r.path_index,
            r.char_index,
            r.x,
            r.y,
            r.u_val,
            u8::from(r.alive)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{correction_fields, Domain, NoiseMode};
    use crate::paths::{sample_path, TimeGrid};

    fn linear_basis(alpha: f64, beta: f64) -> NoiseBasis<f64> {
        NoiseBasis::new(vec![NoiseMode::linear(alpha, beta)], Domain::real_line())
    }

    fn fields(basis: &NoiseBasis<f64>) -> CorrectionFields<f64> {
        correction_fields(basis, &[-1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn noise_free_slope_follows_riccati() {
        let basis = NoiseBasis::empty(Domain::real_line());
        let cf = fields(&basis);
        let sigma = 2.0;
        let grid = TimeGrid::new(0.0, 0.45, 4500).unwrap();
        let path = sample_path(0, 0, grid, 0);
        let mut states = vec![CharState::new(0.3, -sigma, 1.0)];
        Integrator::new(&cf, Scheme::Heun).run(&mut states, &path, |i, t, s| {
            let want = -sigma / (1.0 - sigma * t);
            assert!((s[0].y - want).abs() <= 1e-12 * want.abs(), "step {i}: {} vs {want}", s[0].y);
            assert!((s[0].x - (0.3 + t)).abs() < 1e-12);
        });
    }

    #[test]
    fn noise_free_blow_up_is_dated_exactly() {
        let basis = NoiseBasis::empty(Domain::real_line());
        let cf = fields(&basis);
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let path = sample_path(0, 0, grid, 0);
        let mut states = vec![CharState::new(0.0, -4.0, 0.0)];
        Integrator::new(&cf, Scheme::Ito).run(&mut states, &path, |_, _, _| {});
        let death = states[0].death.unwrap();
        assert_eq!(death.reason, DeathReason::BlowUp);
        assert!((death.time - 0.25).abs() < 1e-6, "{}", death.time);
    }

    #[test]
    fn zero_slope_stays_zero() {
        let basis = NoiseBasis::fourier(3, 1.0, Domain::torus(std::f64::consts::TAU));
        let cf = fields(&basis);
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let path = sample_path(4, 0, grid, basis.len());
        let mut states = vec![CharState::new(0.2, 0.0, 0.5)];
        Integrator::new(&cf, Scheme::Heun).run(&mut states, &path, |_, _, s| assert_eq!(s[0].y, 0.0));
        let empty = NoiseBasis::empty(Domain::real_line());
        let cfe = fields(&empty);
        let p0 = sample_path(0, 0, grid, 0);
        let mut st = vec![CharState::new(1.0, 0.0, 0.5)];
        Integrator::new(&cfe, Scheme::Ito).run(&mut st, &p0, |_, t, s| {
            assert!((s[0].x - (1.0 + 0.5 * t)).abs() < 1e-12);
        });
    }

    #[test]
    fn empty_basis_schemes_agree_bitwise() {
        let basis = NoiseBasis::empty(Domain::real_line());
        let cf = fields(&basis);
        let grid = TimeGrid::new(0.0, 0.4, 400).unwrap();
        let path = sample_path(0, 0, grid, 0);
        let init = vec![CharState::new(0.1, -1.5, 0.7), CharState::new(0.4, 0.8, -0.2)];
        let mut a = init.clone();
        let mut b = init;
        Integrator::new(&cf, Scheme::Ito).run(&mut a, &path, |_, _, _| {});
        Integrator::new(&cf, Scheme::Heun).run(&mut b, &path, |_, _, _| {});
        assert_eq!(a, b);
    }

    #[test]
    fn exact_solution_deterministic_limits() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let path = sample_path(8, 0, grid, 1);
        let profile = InitialProfile::negative_line(1.0, 2.0);
        let x: Vec<f64> = exact_linear_solution(0.5, &profile, 0.0, 0.0, &path, 0);
        let w = path.cumulative(0);
        for (i, xi) in x.iter().enumerate() {
            let t = grid.time(i);
            assert!((xi - (0.5 + 1.5 * t)).abs() < 1e-12);
        }
        let x1: Vec<f64> = exact_linear_solution(0.5, &profile, 0.0, 1.0, &path, 0);
        for (i, xi) in x1.iter().enumerate() {
            let t = grid.time(i);
            assert!((xi - (0.5 + 1.5 * t + w[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn stratonovich_integral_uses_chain_rule() {
        // ∫ e^{−αW} ∘ dW = (1 − e^{−αW_t}) / α exactly in Stratonovich calculus
        let alpha: f64 = 0.7;
        let grid = TimeGrid::new(0.0, 1.0, 20_000).unwrap();
        let path = sample_path(12, 3, grid, 1);
        let profile = InitialProfile::negative_line(0.0, 0.0);
        let x = exact_linear_solution(0.0, &profile, alpha, 1.0, &path, 0);
        let w = path.cumulative(0);
        let n = w.len() - 1;
        let want = (alpha * w[n]).exp() * (1.0 - (-alpha * w[n]).exp()) / alpha;
        // trapezoid error per step is f''ΔW³/12, a zero-mean sum of size ~1e-5 here
        assert!((x[n] - want).abs() < 1e-4, "{} vs {want}", x[n]);
    }

    #[test]
    fn noise_free_line_crosses_at_inverse_slope() {
        let sigma: f64 = 2.5;
        let profile = InitialProfile::negative_line(sigma, 1.0);
        let basis = NoiseBasis::empty(Domain::real_line());
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let path = sample_path(0, 0, grid, 0);
        let tau = first_crossing(&[-0.3, 0.0, 0.4], &profile, &basis, &path).unwrap().unwrap();
        assert!((tau - 1.0 / sigma).abs() <= 1e-4, "{tau}");
    }

    #[test]
    fn increasing_profile_never_crosses() {
        let profile = InitialProfile::negative_line(-1.0, 0.0);
        let basis = NoiseBasis::empty(Domain::real_line());
        let grid = TimeGrid::new(0.0, 10.0, 1000).unwrap();
        let path = sample_path(0, 0, grid, 0);
        assert_eq!(first_crossing(&[0.0, 1.0], &profile, &basis, &path).unwrap(), None);
        assert!(first_crossing(&[1.0, 0.0], &profile, &basis, &path).is_err());
        assert!(first_crossing(&[1.0], &profile, &basis, &path).is_err());
    }

    #[test]
    fn steepest_slope_examples() {
        let probe: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let line = InitialProfile::negative_line(3.0, 0.0);
        assert!((steepest_negative_slope(&line, &probe) - 3.0).abs() < 1e-12);
        let sine = InitialProfile::sine(1.0, std::f64::consts::TAU, 0.0);
        assert!((steepest_negative_slope(&sine, &probe) - std::f64::consts::TAU).abs() < 1e-9);
        let up = InitialProfile::negative_line(-1.0, 0.0);
        assert_eq!(steepest_negative_slope(&up, &probe), 0.0);
    }

    #[test]
    fn profile_derivatives_are_consistent() {
        let probe: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let sine = InitialProfile::sine(1.3, std::f64::consts::TAU, 2.0);
        assert!(sine.derivative_mismatch(&probe) < 1e-8);
        assert!(sine.is_positive_on(&probe));
        let line = InitialProfile::negative_line(2.0, 0.0);
        assert!(line.derivative_mismatch(&probe) < 1e-8);
        assert!(!line.is_positive_on(&probe));
    }

    #[test]
    fn riemann_profile_is_periodic() {
        let r = InitialProfile::riemann(1.0, 0.0, 0.5, Some(1.0));
        assert_eq!(r.u0(0.25), 1.0);
        assert_eq!(r.u0(0.75), 0.0);
        assert_eq!(r.u0(1.25), 1.0);
        assert_eq!(r.u0(-0.25), 0.0);
    }

    #[test]
    fn linear_noise_crossing_ignores_beta() {
        let profile = InitialProfile::negative_line(1.0, 0.0);
        let grid = TimeGrid::new(0.0, 4.0, 4000).unwrap();
        let path = sample_path(31, 2, grid, 1);
        let fan = [-0.5, 0.0, 0.5];
        let a = first_crossing(&fan, &profile, &linear_basis(1.0, 0.0), &path).unwrap();
        let b = first_crossing(&fan, &profile, &linear_basis(1.0, 5.0), &path).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 2e-3),
            (None, None) => {}
            other => panic!("crossing disagreement {other:?}"),
        }
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let rows = vec![TrajectoryRow { t: 0.5, path_index: 1, char_index: 2, x: 1.25, y: -3.0, u_val: 0.5, alive: true }];
        let mut buf = Vec::new();
        write_trajectory_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,path_index,char_index,X,Y,u_val,alive\n0.5,1,2,1.25,-3,0.5,1\n");
    }
}
