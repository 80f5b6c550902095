//! Shock detection on grid fields and the stochastic Rankine-Hugoniot curve
//! `ds = ½(u₋ + u₊) dt + Σ ξ_k(s) ∘ dW_k`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::noise::NoiseBasis;
use crate::paths::BrownianPath;
use crate::scalar::{lit, periodic_delta, wrap, Scalar};

/// Cells between the steepest interface and the cells read as plateau states.
pub const PLATEAU_OFFSET: usize = 3;

/// Shock position and the states on either side over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShockCurve<T> {
    pub times: Vec<T>,
    /// Positions in `[0, period)` for a periodic curve.
    pub positions: Vec<T>,
    pub u_minus: Vec<T>,
    pub u_plus: Vec<T>,
    /// Period of the domain, or `None` on the real line.
    pub period: Option<T>,
}

impl<T: Scalar> ShockCurve<T> {
    pub fn new(period: Option<T>) -> Self {
        Self { times: Vec::new(), positions: Vec::new(), u_minus: Vec::new(), u_plus: Vec::new(), period }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, point: ShockPoint<T>) {
        let s = match self.period {
            Some(p) => wrap(point.position, p),
            None => point.position,
        };
        self.times.push(point.t);
        self.positions.push(s);
        self.u_minus.push(point.u_minus);
        self.u_plus.push(point.u_plus);
    }

    /// Positions lifted off the torus so consecutive samples differ by less than half a period.
    pub fn unwrapped(&self) -> Vec<T> {
        let Some(p) = self.period else {
            return self.positions.clone();
        };
        let mut out = Vec::with_capacity(self.len());
        for (i, &s) in self.positions.iter().enumerate() {
            if i == 0 {
                out.push(s);
            } else {
                let prev = out[i - 1];
                out.push(prev + periodic_delta(s - wrap(prev, p), p));
            }
        }
        out
    }

    /// Writes `t,s,u_minus,u_plus`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,s,u_minus,u_plus")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{},{}", self.times[i], self.positions[i], self.u_minus[i], self.u_plus[i])?;
        }
        Ok(())
    }
}

/// One detected or integrated shock sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockPoint<T> {
    pub t: T,
    pub position: T,
    pub u_minus: T,
    pub u_plus: T,
}

/// Locates the single shock of a snapshot.
///
/// Picks the interface with the most negative jump, reads `u₋`, `u₊` from the cells
/// [`PLATEAU_OFFSET`] away on either side, and places the discontinuity where a
/// step between those states carries the same mass as the cells in between.
pub fn locate_shock<T: Scalar>(field: &GridField<T>, threshold: T) -> Result<ShockPoint<T>> {
    let n = field.n();
    let u = &field.values;
    let mut best = 0;
    let mut jump = T::infinity();
    for i in 0..n {
        let d = u[(i + 1) % n] - u[i];
        if d < jump {
            jump = d;
            best = i;
        }
    }
    if !(jump < -threshold) {
        return Err(Error::NoShockFound { t: field.t.to_f64_lossy() });
    }
    let k = PLATEAU_OFFSET;
    let left = (best + n - (k - 1)) % n;
    let u_minus = u[(best + n - k) % n];
    let u_plus = u[(best + 1 + k) % n];
    if !(u_minus > u_plus) {
        return Err(Error::NoShockFound { t: field.t.to_f64_lossy() });
    }
    // window of cells strictly between the plateau cells
    let width = 2 * k;
    let dx = field.dx();
    let mass = (0..width).map(|j| u[(left + j) % n]).sum::<T>() * dx;
    let span = T::from_usize_lossy(width) * dx;
    let x_a = T::from_usize_lossy(left) * dx;
    let offset = (mass - u_plus * span) / (u_minus - u_plus);
    Ok(ShockPoint { t: field.t, position: wrap(x_a + offset, field.length), u_minus, u_plus })
}

/// Runs [`locate_shock`] over a sequence of snapshots; every snapshot must contain a shock.
pub fn detect_shock<T: Scalar>(snapshots: &[GridField<T>], threshold: T) -> Result<ShockCurve<T>> {
    let period = snapshots.first().map(|f| f.length);
    let mut curve = ShockCurve::new(period);
    for f in snapshots {
        curve.push(locate_shock(f, threshold)?);
    }
    Ok(curve)
}

/// Heun integration of the stochastic Rankine-Hugoniot curve from `s0` along `path`.
/// `states(t, s)` supplies `(u₋, u₊)` at the current point of the curve.
pub fn integrate_srh<T: Scalar, F>(s0: T, mut states: F, basis: &NoiseBasis<T>, path: &BrownianPath<T>, period: Option<T>) -> Result<ShockCurve<T>>
where
    F: FnMut(T, T) -> Result<(T, T)>,
{
    if path.n_modes() != basis.len() {
        return Err(Error::GridMismatch(format!("path has {} modes, basis has {}", path.n_modes(), basis.len())));
    }
    let grid = *path.grid();
    let dt = grid.dt();
    let half = lit::<T>(0.5);
    let mut curve = ShockCurve::new(period);
    let mut s = s0;
    let mut t = grid.t0;
    let (mut um, mut up) = states(t, s)?;
    curve.push(ShockPoint { t, position: s, u_minus: um, u_plus: up });
    for i in 0..grid.n_steps {
        let dw = path.step(i);
        let speed0 = half * (um + up);
        let pred = s + speed0 * dt + basis.velocity(s, dw);
        let t1 = grid.time(i + 1);
        let (pm, pp) = states(t1, pred)?;
        let speed1 = half * (pm + pp);
        s = s + half * (speed0 + speed1) * dt + half * (basis.velocity(s, dw) + basis.velocity(pred, dw));
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("shock position at t = {t1}")));
        }
        t = t1;
        (um, up) = states(t, s)?;
        curve.push(ShockPoint { t, position: s, u_minus: um, u_plus: up });
    }
    Ok(curve)
}

/// `sup_t |s_a(t) − s_b(t)|`, measured modulo the period when there is one.
/// `b` is resampled linearly onto the times of `a` that fall inside its range.
pub fn srh_residual<T: Scalar>(a: &ShockCurve<T>, b: &ShockCurve<T>) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyEstimate);
    }
    let (b0, b1) = (b.times[0], b.times[b.len() - 1]);
    let tol = lit::<T>(1e-9) * (T::one() + b1.abs());
    let sb = b.unwrapped();
    let period = a.period.or(b.period);
    let mut worst = T::zero();
    let mut any = false;
    let mut j = 0;
    for (&t, &sa) in a.times.iter().zip(&a.positions) {
        if t < b0 - tol || t > b1 + tol {
            continue;
        }
        while j + 1 < b.len() - 1 && b.times[j + 1] < t {
            j += 1;
        }
        let s = if b.len() == 1 {
            sb[0]
        } else {
            let (t0, t1) = (b.times[j], b.times[j + 1]);
            let f = if t1 > t0 { ((t - t0) / (t1 - t0)).max(T::zero()).min(T::one()) } else { T::zero() };
            sb[j] + f * (sb[j + 1] - sb[j])
        };
        let d = match period {
            Some(p) => periodic_delta(sa - s, p).abs(),
            None => (sa - s).abs(),
        };
        worst = worst.max(d);
        any = true;
    }
    if !any {
        return Err(Error::GridMismatch("shock curves share no time range".into()));
    }
    Ok(worst)
}
