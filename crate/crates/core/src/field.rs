//! Periodic finite-volume solver for Burgers' equation with transport noise.
//!
//! One step is the Strang composition
//! `transport(ΔW/2) ∘ viscous(dt) ∘ burgers(dt) ∘ transport(ΔW/2)` with the noise
//! frozen over the step, so the split scheme converges to the Stratonovich solution.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::noise::{Domain, NoiseBasis};
use crate::paths::{hitting_time, BrownianPath};
use crate::scalar::{lit, wrap, Scalar};
use crate::spline::solve_cyclic_tridiagonal;

/// Cell-centred samples of `u(t, ·)` on a torus of length `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub length: T,
    pub values: Vec<T>,
    pub t: T,
}

impl<T: Scalar> GridField<T> {
    pub fn new(length: T, values: Vec<T>, t: T) -> Result<Self> {
        if !values.len().is_power_of_two() || values.len() < 4 {
            return Err(Error::InvalidParameter(format!(
                "cell count must be a power of two >= 4, got {}",
                values.len()
            )));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!("domain length must be positive, got {length}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial value at cell {i}")));
        }
        Ok(Self { length, values, t })
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn(n: usize, length: T, f: impl Fn(T) -> T) -> Result<Self> {
        let dx = length / T::from_usize_lossy(n);
        let half = lit::<T>(0.5);
        let values = (0..n).map(|i| f((T::from_usize_lossy(i) + half) * dx)).collect();
        Self::new(length, values, T::zero())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> T {
        self.length / T::from_usize_lossy(self.n())
    }

    /// Centre of cell `i`.
    pub fn x(&self, i: usize) -> T {
        (T::from_usize_lossy(i) + lit(0.5)) * self.dx()
    }

    /// Four-point cubic interpolation at any `x`, wrapped onto the torus.
    pub fn sample(&self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("sample position {x}")));
        }
        let (j, f) = self.locate(x);
        Ok(cubic(&self.values, j, f))
    }

    /// Bracketing cell index and fractional offset of `x` in cell-centre units.
    fn locate(&self, x: T) -> (usize, T) {
        let n = self.n();
        let q = wrap(x, self.length) / self.dx() - lit(0.5);
        let fl = q.floor();
        let f = q - fl;
        let j = fl.to_i64().unwrap_or(0).rem_euclid(n as i64) as usize;
        (j, f)
    }

    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.dx()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |u_{i+1} − u_i| / Δx`.
    pub fn grad_sup(&self) -> T {
        let n = self.n();
        let mut g = T::zero();
        for i in 0..n {
            g = g.max((self.values[(i + 1) % n] - self.values[i]).abs());
        }
        g / self.dx()
    }

    /// Discrete `H²` norm from centred first and second differences.
    pub fn h2_norm(&self) -> T {
        let n = self.n();
        let dx = self.dx();
        let two = lit::<T>(2.0);
        let u = &self.values;
        let mut acc = T::zero();
        for i in 0..n {
            let (l, c, r) = (u[(i + n - 1) % n], u[i], u[(i + 1) % n]);
            let d1 = (r - l) / (two * dx);
            let d2 = (r - two * c + l) / (dx * dx);
            acc = acc + c * c + d1 * d1 + d2 * d2;
        }
        (acc * dx).sqrt()
    }

    pub fn l2_norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() * self.dx()
    }

    fn check_finite(&self, stage: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{stage} produced a non-finite value at cell {i}, t = {}", self.t))),
            None => Ok(()),
        }
    }
}

/// Lagrange cubic through cells `j−1 .. j+2` at offset `f ∈ [0, 1)` from cell `j`.
#[inline]
fn cubic<T: Scalar>(u: &[T], j: usize, f: T) -> T {
    let n = u.len();
    let (a, b, c, d) = (u[(j + n - 1) % n], u[j], u[(j + 1) % n], u[(j + 2) % n]);
    let one = T::one();
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let wa = -f * (f - one) * (f - two) / six;
    let wb = (f + one) * (f - one) * (f - two) / two;
    let wc = -(f + one) * f * (f - two) / two;
    let wd = (f + one) * f * (f - one) / six;
    wa * a + wb * b + wc * c + wd * d
}

#[inline]
fn minmod<T: Scalar>(a: T, b: T) -> T {
    if a * b <= T::zero() {
        T::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Exact Godunov flux for `f(u) = u²/2`.
#[inline]
fn godunov_flux<T: Scalar>(ul: T, ur: T) -> T {
    let half = lit::<T>(0.5);
    let a = ul.max(T::zero());
    let b = ur.min(T::zero());
    (half * a * a).max(half * b * b)
}

/// Flux-difference tendency `−(F_{i+1/2} − F_{i−1/2})/Δx` with minmod slopes.
fn burgers_tendency<T: Scalar>(u: &[T], dx: T, slopes: &mut [T], flux: &mut [T], out: &mut [T]) {
    let n = u.len();
    let half = lit::<T>(0.5);
    for i in 0..n {
        slopes[i] = minmod(u[i] - u[(i + n - 1) % n], u[(i + 1) % n] - u[i]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        flux[i] = godunov_flux(u[i] + half * slopes[i], u[j] - half * slopes[j]);
    }
    for i in 0..n {
        out[i] = -(flux[i] - flux[(i + n - 1) % n]) / dx;
    }
}

/// One SSP-RK2 step of the inviscid Burgers flux with MUSCL-minmod reconstruction.
///
/// Fails with [`Error::Cfl`] when `dt·‖u‖∞/Δx` exceeds `cfl_max`; the field is left untouched.
pub fn burgers_substep<T: Scalar>(field: &mut GridField<T>, dt: T, cfl_max: T) -> Result<()> {
    let dx = field.dx();
    let cfl = dt * field.sup_norm() / dx;
    if cfl > cfl_max {
        return Err(Error::Cfl { cfl: cfl.to_f64_lossy(), limit: cfl_max.to_f64_lossy() });
    }
    let n = field.n();
    let mut slopes = vec![T::zero(); n];
    let mut flux = vec![T::zero(); n];
    let mut k = vec![T::zero(); n];
    let half = lit::<T>(0.5);
    burgers_tendency(&field.values, dx, &mut slopes, &mut flux, &mut k);
    let stage: Vec<T> = field.values.iter().zip(&k).map(|(&u, &d)| u + dt * d).collect();
    burgers_tendency(&stage, dx, &mut slopes, &mut flux, &mut k);
    for ((u, &s), &d) in field.values.iter_mut().zip(&stage).zip(&k) {
        *u = half * *u + half * (s + dt * d);
    }
    field.check_finite("burgers substep")
}

/// How the transport substep interpolates at the feet of characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Cubic clipped to the bracketing cells; rigid shifts use a limited
    /// flux-form update that conserves mass.
    #[default]
    MonotoneCubic,
    /// Fourier phase shift for rigid shifts; falls back to monotone cubic otherwise.
    Spectral,
}

/// Solves `∂_τ u + v(x) ∂ₓu = 0` over one unit of pseudo-time, `v = Σ ξ_k ΔW_k`.
///
/// `dw` holds the increments for this substep. A basis on a torus must share the
/// field's period; on a bounded line the feet of characteristics must stay inside.
pub fn transport_substep<T: Scalar>(
    field: &mut GridField<T>,
    basis: &NoiseBasis<T>,
    dw: &[T],
    interpolation: Interpolation,
) -> Result<()> {
    if dw.len() != basis.len() {
        return Err(Error::GridMismatch(format!("{} increments for {} modes", dw.len(), basis.len())));
    }
    if let Domain::Torus { length } = basis.domain() {
        let tol = lit::<T>(1e-12) * length;
        if (length - field.length).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "noise period {length} differs from field length {}",
                field.length
            )));
        }
    }
    if dw.iter().all(|w| *w == T::zero()) {
        return Ok(());
    }
    if let Some(speeds) = basis.uniform_speeds() {
        let shift = speeds.iter().zip(dw).fold(T::zero(), |a, (&s, &w)| a + s * w);
        match interpolation {
            Interpolation::MonotoneCubic => conservative_shift(field, shift),
            Interpolation::Spectral => spectral_shift(field, shift),
        }
        return field.check_finite("transport substep");
    }
    let n = field.n();
    let domain = basis.domain();
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let two = lit::<T>(2.0);
    let old = field.values.clone();
    for i in 0..n {
        let x = field.x(i);
        // trace back: dx/dτ = −v(x), τ ∈ [0, 1]
        let k1 = -basis.velocity(x, dw);
        let k2 = -basis.velocity(x + half * k1, dw);
        let k3 = -basis.velocity(x + half * k2, dw);
        let k4 = -basis.velocity(x + k3, dw);
        let foot = x + sixth * (k1 + two * k2 + two * k3 + k4);
        if let Domain::Line { .. } = domain {
            domain.check(foot)?;
        }
        if !foot.is_finite() {
            return Err(Error::NonFinite(format!("foot of characteristic from x = {x}")));
        }
        let (j, f) = field.locate(foot);
        let (a, b) = (old[j], old[(j + 1) % n]);
        field.values[i] = cubic(&old, j, f).max(a.min(b)).min(a.max(b));
    }
    field.check_finite("transport substep")
}

/// `u(x) ← u(x − d)` as an integer roll plus one limited upwind flux step.
fn conservative_shift<T: Scalar>(field: &mut GridField<T>, d: T) {
    let n = field.n();
    let cells = d / field.dx();
    let whole = cells.floor();
    let theta = cells - whole;
    let m = whole.to_i64().unwrap_or(0).rem_euclid(n as i64) as usize;
    field.values.rotate_right(m);
    if theta == T::zero() {
        return;
    }
    let u = field.values.clone();
    let half = lit::<T>(0.5);
    let flux: Vec<T> = (0..n)
        .map(|i| {
            let s = minmod(u[i] - u[(i + n - 1) % n], u[(i + 1) % n] - u[i]);
            theta * (u[i] + half * (T::one() - theta) * s)
        })
        .collect();
    for i in 0..n {
        field.values[i] = u[i] - (flux[i] - flux[(i + n - 1) % n]);
    }
}

/// Signed wavenumber `2πm/L` of FFT bin `i`.
fn wavenumber<T: Scalar>(i: usize, n: usize, length: T) -> T {
    let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    T::lit(m) * T::TAU() / length
}

fn spectral_map<T: Scalar>(field: &mut GridField<T>, multiplier: impl Fn(T) -> Complex<T>) {
    let n = field.n();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<T>> = field.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fwd.process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(n);
    for (i, c) in buf.iter_mut().enumerate() {
        let mut m = multiplier(wavenumber(i, n, field.length));
        if n.is_multiple_of(2) && i == n / 2 {
            // Nyquist bin has no signed partner; keep it real
            m = Complex::new(m.re, T::zero());
        }
        *c = *c * m * scale;
    }
    inv.process(&mut buf);
    for (v, c) in field.values.iter_mut().zip(&buf) {
        *v = c.re;
    }
}

fn spectral_shift<T: Scalar>(field: &mut GridField<T>, d: T) {
    spectral_map(field, |k| {
        let phase = -k * d;
        Complex::new(phase.cos(), phase.sin())
    });
}

/// Discretisation of the viscous term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscousMethod {
    /// Backward Euler with the periodic three-point Laplacian.
    #[default]
    Implicit,
    /// Exact heat multiplier `e^{−νκ²dt}` in Fourier space.
    Spectral,
}

/// Heat step `∂ₜu = ν ∂ₓₓu` over `dt`.
pub fn viscous_substep<T: Scalar>(field: &mut GridField<T>, nu: T, dt: T, method: ViscousMethod) -> Result<()> {
    if !(nu > T::zero()) {
        return Err(Error::InvalidParameter(format!("viscosity must be positive, got {nu}")));
    }
    match method {
        ViscousMethod::Implicit => {
            let n = field.n();
            let dx = field.dx();
            let r = nu * dt / (dx * dx);
            let off = vec![-r; n];
            let diag = vec![T::one() + lit::<T>(2.0) * r; n];
            field.values = solve_cyclic_tridiagonal(&off, &diag, &off, &field.values)?;
        }
        ViscousMethod::Spectral => {
            spectral_map(field, |k| Complex::new((-nu * k * k * dt).exp(), T::zero()));
        }
    }
    field.check_finite("viscous substep")
}

/// Physical and numerical parameters of a field run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldModel<T> {
    /// Viscosity `ν ≥ 0`; zero skips the viscous substep.
    pub nu: T,
    /// Coefficient `b₀` of a zeroth-order term `b₀ u ∘ dW₀` tied to the first mode.
    pub zeroth_order: Option<T>,
    pub cfl_max: T,
    pub viscous: ViscousMethod,
    pub interpolation: Interpolation,
}

impl<T: Scalar> Default for FieldModel<T> {
    fn default() -> Self {
        Self {
            nu: T::zero(),
            zeroth_order: None,
            cfl_max: lit(0.5),
            viscous: ViscousMethod::default(),
            interpolation: Interpolation::default(),
        }
    }
}

impl<T: Scalar> FieldModel<T> {
    pub fn viscous(nu: T) -> Self {
        Self { nu, ..Self::default() }
    }
}

fn transport_half<T: Scalar>(field: &mut GridField<T>, basis: &NoiseBasis<T>, dw: &[T], model: &FieldModel<T>) -> Result<()> {
    let half = lit::<T>(0.5);
    let halves: Vec<T> = dw.iter().map(|&w| half * w).collect();
    transport_substep(field, basis, &halves, model.interpolation)?;
    if let Some(b0) = model.zeroth_order {
        let factor = (-b0 * halves[0]).exp();
        for v in &mut field.values {
            *v = *v * factor;
        }
    }
    Ok(())
}

/// One Strang-split step of length `dt` driven by the increments `dw`.
/// The Burgers part subcycles when `dt` violates the CFL limit.
pub fn step<T: Scalar>(field: &mut GridField<T>, basis: &NoiseBasis<T>, dw: &[T], dt: T, model: &FieldModel<T>) -> Result<()> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if model.zeroth_order.is_some() && basis.is_empty() {
        return Err(Error::InvalidParameter("zeroth-order noise needs at least one mode".into()));
    }
    transport_half(field, basis, dw, model)?;
    let speed = field.sup_norm() / field.dx();
    let sub = (dt * speed / model.cfl_max).ceil().to_usize().unwrap_or(1).max(1);
    let h = dt / T::from_usize_lossy(sub);
    for _ in 0..sub {
        burgers_substep(field, h, model.cfl_max)?;
    }
    if model.nu > T::zero() {
        viscous_substep(field, model.nu, dt, model.viscous)?;
    }
    transport_half(field, basis, dw, model)?;
    field.t = field.t + dt;
    Ok(())
}

/// Time series of the norms the blow-up criterion and maximum principle use.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics<T> {
    pub times: Vec<T>,
    pub sup: Vec<T>,
    pub grad_sup: Vec<T>,
    /// `A(t) = ∫₀ᵗ ‖∂ₓu‖∞ ds` by the trapezoidal rule.
    pub grad_integral: Vec<T>,
    pub h2: Vec<T>,
    pub mass: Vec<T>,
}

impl<T: Scalar> Diagnostics<T> {
    pub fn new() -> Self {
        Self { times: Vec::new(), sup: Vec::new(), grad_sup: Vec::new(), grad_integral: Vec::new(), h2: Vec::new(), mass: Vec::new() }
    }

    pub fn record(&mut self, field: &GridField<T>) {
        let g = field.grad_sup();
        let a = match (self.times.last(), self.grad_sup.last(), self.grad_integral.last()) {
            (Some(&t0), Some(&g0), Some(&a0)) => a0 + lit::<T>(0.5) * (g0 + g) * (field.t - t0),
            _ => T::zero(),
        };
        self.times.push(field.t);
        self.sup.push(field.sup_norm());
        self.grad_sup.push(g);
        self.grad_integral.push(a);
        self.h2.push(field.h2_norm());
        self.mass.push(field.mass());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|mass(t) − mass(0)|`.
    pub fn mass_drift(&self) -> T {
        let m0 = self.mass.first().copied().unwrap_or_else(T::zero);
        self.mass.iter().fold(T::zero(), |d, &m| d.max((m - m0).abs()))
    }

    /// Index of the last sample with `t ≤ horizon`.
    pub fn index_at(&self, horizon: T) -> Option<usize> {
        let tol = lit::<T>(1e-9) * (T::one() + horizon.abs());
        self.times.iter().rposition(|&t| t <= horizon + tol)
    }

    /// Writes `t,sup,grad_sup,A,H2,mass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,sup,grad_sup,A,H2,mass")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.times[i], self.sup[i], self.grad_sup[i], self.grad_integral[i], self.h2[i], self.mass[i]
            )?;
        }
        Ok(())
    }
}

/// Writes a snapshot as `x,u`.
pub fn write_snapshot_csv<T: Scalar, W: Write>(field: &GridField<T>, mut w: W) -> Result<()> {
    writeln!(w, "x,u")?;
    for (i, v) in field.values.iter().enumerate() {
        writeln!(w, "{},{}", field.x(i), v)?;
    }
    Ok(())
}

/// Steps `field` along the whole path, recording diagnostics at every node.
/// `observe(step_index, field)` runs after the initial record and after each step.
pub fn run<T: Scalar, F>(
    field: &mut GridField<T>,
    basis: &NoiseBasis<T>,
    path: &BrownianPath<T>,
    model: &FieldModel<T>,
    mut observe: F,
) -> Result<Diagnostics<T>>
where
    F: FnMut(usize, &GridField<T>) -> Result<()>,
{
    if path.n_modes() != basis.len() {
        return Err(Error::GridMismatch(format!("path has {} modes, basis has {}", path.n_modes(), basis.len())));
    }
    let grid = *path.grid();
    let dt = grid.dt();
    field.t = grid.t0;
    let mut diag = Diagnostics::new();
    diag.record(field);
    observe(0, field)?;
    for i in 0..grid.n_steps {
        step(field, basis, path.step(i), dt, model)?;
        // pin the clock to the grid so snapshots line up with characteristics
        field.t = grid.time(i + 1);
        diag.record(field);
        observe(i + 1, field)?;
    }
    Ok(diag)
}

/// Outcome of comparing a sup-norm series against its envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleReport<T> {
    pub violated: bool,
    /// Largest `‖u_t‖∞ / (envelope(t) ‖u_0‖∞)`.
    pub worst_ratio: T,
    /// Time at which the worst ratio occurred.
    pub worst_time: T,
}

/// Checks `‖u_t‖∞ ≤ e^{−c W_t} ‖u_0‖∞ (1 + tol·t)` along `diag`.
///
/// `envelope` is `None` for pure transport noise (envelope 1); otherwise it
/// carries the driving path `W` sampled on the diagnostics times and the rate `c`.
pub fn max_principle_monitor<T: Scalar>(diag: &Diagnostics<T>, envelope: Option<(&[T], T)>, tol_per_time: T) -> Result<MaxPrincipleReport<T>> {
    let Some(&sup0) = diag.sup.first() else {
        return Err(Error::EmptyEstimate);
    };
    if let Some((w, _)) = envelope {
        if w.len() != diag.len() {
            return Err(Error::GridMismatch(format!("{} path values for {} diagnostics", w.len(), diag.len())));
        }
    }
    let t0 = diag.times[0];
    let mut report = MaxPrincipleReport { violated: false, worst_ratio: T::zero(), worst_time: t0 };
    for i in 0..diag.len() {
        let env = match envelope {
            Some((w, c)) => (-c * w[i]).exp(),
            None => T::one(),
        };
        let bound = env * sup0;
        let ratio = if bound > T::zero() { diag.sup[i] / bound } else if diag.sup[i] > T::zero() { T::infinity() } else { T::zero() };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_time = diag.times[i];
        }
        if ratio > T::one() + tol_per_time * (diag.times[i] - t0) {
            report.violated = true;
        }
    }
    Ok(report)
}

/// Gradient blow-up time from the first times `‖∂ₓu‖∞` reaches 4 and 16 times its
/// initial value, extrapolating `1/‖∂ₓu‖∞` linearly to zero.
pub fn gradient_blowup_time<T: Scalar>(diag: &Diagnostics<T>) -> Option<T> {
    let g0 = *diag.grad_sup.first()?;
    if !(g0 > T::zero()) {
        return None;
    }
    let four = lit::<T>(4.0);
    let sixteen = lit::<T>(16.0);
    let ta = first_exceedance(&diag.times, &diag.grad_sup, four * g0)?;
    let tb = first_exceedance(&diag.times, &diag.grad_sup, sixteen * g0)?;
    // 1/g falls from 1/(4g0) to 1/(16g0) between ta and tb
    Some(tb + (tb - ta) / lit(3.0))
}

/// First crossing of `level` by a series that need not be monotone.
fn first_exceedance<T: Scalar>(times: &[T], series: &[T], level: T) -> Option<T> {
    let i = series.iter().position(|&v| v >= level)?;
    if i == 0 {
        return times.first().copied();
    }
    hitting_time(&times[i - 1..=i], &series[i - 1..=i], level)
}

/// Resolution study of the blow-up criterion at one horizon: how the `H²` norm
/// and `A(t)` change when the grid is refined by two on the same path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupClass<T> {
    pub horizon: T,
    pub h2_ratio: T,
    pub grad_integral_ratio: T,
    /// `H²` grows like `Δx^{-3/2}` across a discontinuity, so a refinement ratio
    /// above `2^{3/4}` means the norm is not converging.
    pub h2_diverges: bool,
    /// `A` grows like `Δx^{-1}` after a shock; threshold `2^{1/2}`.
    pub grad_integral_diverges: bool,
}

impl<T: Scalar> BlowupClass<T> {
    pub fn agrees(&self) -> bool {
        self.h2_diverges == self.grad_integral_diverges
    }
}

/// Classifies a coarse/fine pair of runs at `horizon`.
pub fn classify_blowup<T: Scalar>(coarse: &Diagnostics<T>, fine: &Diagnostics<T>, horizon: T) -> Result<BlowupClass<T>> {
    let ic = coarse.index_at(horizon).ok_or(Error::EmptyEstimate)?;
    let jf = fine.index_at(horizon).ok_or(Error::EmptyEstimate)?;
    let h2_ratio = fine.h2[jf] / coarse.h2[ic];
    let grad_integral_ratio = if coarse.grad_integral[ic] > T::zero() {
        fine.grad_integral[jf] / coarse.grad_integral[ic]
    } else {
        T::one()
    };
    Ok(BlowupClass {
        horizon,
        h2_ratio,
        grad_integral_ratio,
        h2_diverges: h2_ratio > lit::<T>(2.0).powf(lit(0.75)),
        grad_integral_diverges: grad_integral_ratio > lit::<T>(2.0).sqrt(),
    })
}
