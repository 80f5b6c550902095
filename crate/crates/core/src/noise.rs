//! Transport noise basis `{ξ_k}` and the functionals derived from it.
//!
//! The cylindrical noise `Σ_k ξ_k(x) ∂ₓu ∘ dW_k` is truncated to a finite list of
//! modes. Two fields built from the modes drive everything downstream:
//!
//! ```text
//! φ(x) = ½ Σ_k ξ_k ξ_k'                  (Stratonovich → Itô drift of the characteristic)
//! ψ(x) = ½ Σ_k ((ξ_k')² − ξ_k ξ_k'')     (linear growth rate of the slope along it)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::spline::PeriodicSpline;

/// Default number of probe points used to bound `ψ` and estimate Lipschitz constants.
pub const DEFAULT_PROBE_POINTS: usize = 4096;

/// Spatial domain the noise lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    /// Periodic interval `[0, length)`.
    Torus { length: T },
    /// Real line restricted to a bounding box; either end may be infinite.
    Line { min: T, max: T },
}

impl<T: Scalar> Domain<T> {
    pub fn torus(length: T) -> Self {
        Domain::Torus { length }
    }

    /// Whole real line.
    pub fn real_line() -> Self {
        Domain::Line { min: T::neg_infinity(), max: T::infinity() }
    }

    pub fn contains(&self, x: T) -> bool {
        match *self {
            Domain::Torus { .. } => x.is_finite(),
            Domain::Line { min, max } => x >= min && x <= max,
        }
    }

    pub fn check(&self, x: T) -> Result<()> {
        if self.contains(x) {
            return Ok(());
        }
        let (min, max) = match *self {
            Domain::Torus { length } => (0.0, length.to_f64_lossy()),
            Domain::Line { min, max } => (min.to_f64_lossy(), max.to_f64_lossy()),
        };
        Err(Error::Domain { x: x.to_f64_lossy(), min, max })
    }

    /// `n` equispaced probe points: `[0, L)` on the torus, `[min, max]` on a bounded line.
    pub fn probe_grid(&self, n: usize) -> Result<Vec<T>> {
        match *self {
            Domain::Torus { length } => {
                let h = length / T::from_usize_lossy(n.max(1));
                Ok((0..n).map(|i| h * T::from_usize_lossy(i)).collect())
            }
            Domain::Line { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err(Error::InvalidParameter(
                        "probe grid on an unbounded line needs an explicit box".into(),
                    ));
                }
                Ok(uniform_probe(min, max, n))
            }
        }
    }
}

/// `n` equispaced points covering `[a, b]` inclusive.
pub fn uniform_probe<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    if n < 2 {
        return vec![a; n];
    }
    let h = (b - a) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| a + h * T::from_usize_lossy(i)).collect()
}

/// `ξ`, `∂ₓξ` and `∂ₓₓξ` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeValues<T> {
    pub xi: T,
    pub dxi: T,
    pub ddxi: T,
}

/// A single spatial noise mode `ξ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode<T> {
    /// `α x + β`.
    Linear { alpha: T, beta: T },
    /// `amp · sin(k · base · x)`; `base = 1` gives `amp · sin(kx)`.
    FourierSin { k: u32, amp: T, base: T },
    /// `amp · cos(k · base · x)`.
    FourierCos { k: u32, amp: T, base: T },
    /// Periodic cubic spline through tabulated samples.
    Tabulated(PeriodicSpline<T>),
}

impl<T: Scalar> NoiseMode<T> {
    pub fn linear(alpha: T, beta: T) -> Self {
        NoiseMode::Linear { alpha, beta }
    }

    pub fn sin(k: u32, amp: T) -> Self {
        NoiseMode::FourierSin { k, amp, base: T::one() }
    }

    pub fn cos(k: u32, amp: T) -> Self {
        NoiseMode::FourierCos { k, amp, base: T::one() }
    }

    /// Tabulated mode from a two-column CSV file `x, ξ` on a torus of the given period.
    pub fn from_csv(path: impl AsRef<Path>, period: T) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let (xs, ys) = read_two_columns::<T, _>(file)?;
        Ok(NoiseMode::Tabulated(PeriodicSpline::new(xs, ys, period)?))
    }

    pub fn values(&self, x: T) -> ModeValues<T> {
        match self {
            NoiseMode::Linear { alpha, beta } => {
                ModeValues { xi: *alpha * x + *beta, dxi: *alpha, ddxi: T::zero() }
            }
            NoiseMode::FourierSin { k, amp, base } => {
                let w = T::from_u32(*k).expect("wavenumber") * *base;
                let (s, c) = (w * x).sin_cos();
                ModeValues { xi: *amp * s, dxi: *amp * w * c, ddxi: -*amp * w * w * s }
            }
            NoiseMode::FourierCos { k, amp, base } => {
                let w = T::from_u32(*k).expect("wavenumber") * *base;
                let (s, c) = (w * x).sin_cos();
                ModeValues { xi: *amp * c, dxi: -*amp * w * s, ddxi: -*amp * w * w * c }
            }
            NoiseMode::Tabulated(sp) => {
                let (xi, dxi, ddxi) = sp.eval_all(x);
                ModeValues { xi, dxi, ddxi }
            }
        }
    }

    /// `ξ`, `∂ₓξ` or `∂ₓₓξ` at `x` for `order` 0, 1 or 2.
    pub fn eval(&self, x: T, order: u8) -> Result<T> {
        let v = self.values(x);
        match order {
            0 => Ok(v.xi),
            1 => Ok(v.dxi),
            2 => Ok(v.ddxi),
            _ => Err(Error::InvalidParameter(format!("derivative order {order} not in 0..=2"))),
        }
    }

    /// True when `ξ` is constant in space.
    pub fn is_constant(&self) -> bool {
        match self {
            NoiseMode::Linear { alpha, .. } => *alpha == T::zero(),
            NoiseMode::FourierSin { amp, .. } | NoiseMode::FourierCos { amp, .. } => {
                *amp == T::zero()
            }
            NoiseMode::Tabulated(_) => false,
        }
    }
}

fn read_two_columns<T: Scalar, R: std::io::Read>(reader: R) -> Result<(Vec<T>, Vec<T>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("row {}: expected two columns", line + 1)));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(y)) => {
                xs.push(T::lit(x));
                ys.push(T::lit(y));
            }
            // a non-numeric first row is a header
            _ if line == 0 => continue,
            _ => return Err(Error::Parse(format!("row {}: non-numeric value", line + 1))),
        }
    }
    Ok((xs, ys))
}

/// Truncated noise basis `{ξ_1, …, ξ_K}` on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBasis<T> {
    modes: Vec<NoiseMode<T>>,
    domain: Domain<T>,
}

impl<T: Scalar> NoiseBasis<T> {
    pub fn new(modes: Vec<NoiseMode<T>>, domain: Domain<T>) -> Self {
        Self { modes, domain }
    }

    pub fn empty(domain: Domain<T>) -> Self {
        Self::new(Vec::new(), domain)
    }

    /// `{ (s/k²) sin(k ω x), (s/k²) cos(k ω x) }` for `k = 1..=kmax`, with `ω = 2π/L`
    /// on a torus of length `L` and `ω = 1` on the line. `2·kmax` modes in total.
    pub fn fourier(kmax: u32, scale: T, domain: Domain<T>) -> Self {
        let base = match domain {
            Domain::Torus { length } => T::TAU() / length,
            Domain::Line { .. } => T::one(),
        };
        let mut modes = Vec::with_capacity(2 * kmax as usize);
        for k in 1..=kmax {
            let kk = T::from_u32(k).expect("wavenumber");
            let amp = scale / (kk * kk);
            modes.push(NoiseMode::FourierSin { k, amp, base });
            modes.push(NoiseMode::FourierCos { k, amp, base });
        }
        Self::new(modes, domain)
    }

    /// Truncation level `K`.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[NoiseMode<T>] {
        &self.modes
    }

    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    /// Adds a mode at the end of the basis.
    pub fn push(&mut self, mode: NoiseMode<T>) {
        self.modes.push(mode);
    }

    /// True when every mode is spatially constant, so the noise is a rigid shift.
    pub fn is_uniform(&self) -> bool {
        self.modes.iter().all(NoiseMode::is_constant)
    }

    /// Constant value of each mode for a uniform basis.
    pub fn uniform_speeds(&self) -> Option<Vec<T>> {
        if !self.is_uniform() {
            return None;
        }
        Some(self.modes.iter().map(|m| m.values(T::zero()).xi).collect())
    }

    /// `ξ_k(x)`, `∂ₓξ_k(x)` or `∂ₓₓξ_k(x)` with the domain enforced.
    pub fn eval_mode(&self, k: usize, x: T, order: u8) -> Result<T> {
        self.domain.check(x)?;
        let mode = self
            .modes
            .get(k)
            .ok_or_else(|| Error::InvalidParameter(format!("mode index {k} out of range")))?;
        mode.eval(x, order)
    }

    /// `(Σ ξ_k(x) dW_k, Σ ∂ₓξ_k(x) dW_k)` in one pass over the modes.
    #[inline]
    pub fn weighted_sums(&self, x: T, dw: &[T]) -> (T, T) {
        debug_assert_eq!(dw.len(), self.modes.len());
        let mut s0 = T::zero();
        let mut s1 = T::zero();
        for (m, &w) in self.modes.iter().zip(dw) {
            let v = m.values(x);
            s0 = s0 + v.xi * w;
            s1 = s1 + v.dxi * w;
        }
        (s0, s1)
    }

    /// `Σ ξ_k(x) dW_k` only.
    #[inline]
    pub fn velocity(&self, x: T, dw: &[T]) -> T {
        self.modes.iter().zip(dw).fold(T::zero(), |acc, (m, &w)| acc + m.values(x).xi * w)
    }

    /// Itô correction `φ(x) = ½ Σ ξ_k ∂ₓξ_k`.
    pub fn phi(&self, x: T) -> T {
        let half = lit::<T>(0.5);
        half * self.modes.iter().map(|m| {
            let v = m.values(x);
            v.xi * v.dxi
        }).sum::<T>()
    }

    /// `φ'(x) = ½ Σ ((∂ₓξ_k)² + ξ_k ∂ₓₓξ_k)`.
    pub fn phi_derivative(&self, x: T) -> T {
        let half = lit::<T>(0.5);
        half * self.modes.iter().map(|m| {
            let v = m.values(x);
            v.dxi * v.dxi + v.xi * v.ddxi
        }).sum::<T>()
    }

    /// Slope growth functional `ψ(x) = ½ Σ ((∂ₓξ_k)² − ξ_k ∂ₓₓξ_k)`.
    pub fn psi(&self, x: T) -> T {
        let half = lit::<T>(0.5);
        half * self.modes.iter().map(|m| {
            let v = m.values(x);
            v.dxi * v.dxi - v.xi * v.ddxi
        }).sum::<T>()
    }
}

/// `φ`, `ψ` and the probe-grid bounds on `2ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionFields<T> {
    basis: NoiseBasis<T>,
    /// `C = min 2ψ` over the probe grid.
    pub psi_lower_bound: T,
    /// `D = max 2ψ` over the probe grid.
    pub psi_upper_bound: T,
}

impl<T: Scalar> CorrectionFields<T> {
    pub fn phi(&self, x: T) -> T {
        self.basis.phi(x)
    }

    pub fn psi(&self, x: T) -> T {
        self.basis.psi(x)
    }

    pub fn basis(&self) -> &NoiseBasis<T> {
        &self.basis
    }

    /// Range of `ψ` itself (not doubled) seen on the probe grid.
    pub fn psi_range(&self) -> (T, T) {
        let half = lit::<T>(0.5);
        (self.psi_lower_bound * half, self.psi_upper_bound * half)
    }
}

/// Builds `φ`, `ψ` and the bounds `C ≤ 2ψ ≤ D` sampled on `probe`.
pub fn correction_fields<T: Scalar>(basis: &NoiseBasis<T>, probe: &[T]) -> Result<CorrectionFields<T>> {
    if probe.is_empty() {
        return Err(Error::InvalidParameter("probe grid is empty".into()));
    }
    let two = lit::<T>(2.0);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &x in probe {
        basis.domain.check(x)?;
        let p = two * basis.psi(x);
        if !p.is_finite() {
            return Err(Error::NonFinite(format!("psi at x = {x}")));
        }
        lo = lo.min(p);
        hi = hi.max(p);
    }
    Ok(CorrectionFields { basis: basis.clone(), psi_lower_bound: lo, psi_upper_bound: hi })
}

/// Regularity constants of the basis estimated on a probe grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<T> {
    /// `C_k = max |∂ₓξ_k|`.
    pub lipschitz: Vec<T>,
    /// `D_k = max |ξ_k| / (1 + |x|)`.
    pub growth: Vec<T>,
    pub sum_lipschitz_sq: T,
    pub sum_growth_sq: T,
    /// Lipschitz constant `C_0` of `φ`.
    pub phi_lipschitz: T,
    /// Linear growth constant `D_0` of `φ`.
    pub phi_growth: T,
    pub pass: bool,
}

/// Estimates the Lipschitz and linear-growth constants of every mode and of `φ`.
pub fn assumption_report<T: Scalar>(basis: &NoiseBasis<T>, probe: &[T]) -> Result<AssumptionReport<T>> {
    if probe.len() < 2 {
        return Err(Error::InvalidParameter("assumption report needs at least 2 probe points".into()));
    }
    let k = basis.len();
    let mut lipschitz = vec![T::zero(); k];
    let mut growth = vec![T::zero(); k];
    let mut phi_lipschitz = T::zero();
    let mut phi_growth = T::zero();
    for &x in probe {
        basis.domain.check(x)?;
        let weight = T::one() + x.abs();
        for (j, m) in basis.modes.iter().enumerate() {
            let v = m.values(x);
            lipschitz[j] = lipschitz[j].max(v.dxi.abs());
            growth[j] = growth[j].max(v.xi.abs() / weight);
        }
        phi_lipschitz = phi_lipschitz.max(basis.phi_derivative(x).abs());
        phi_growth = phi_growth.max(basis.phi(x).abs() / weight);
    }
    let sum_lipschitz_sq: T = lipschitz.iter().map(|&c| c * c).sum();
    let sum_growth_sq: T = growth.iter().map(|&d| d * d).sum();
    let pass = sum_lipschitz_sq.is_finite()
        && sum_growth_sq.is_finite()
        && phi_lipschitz.is_finite()
        && phi_growth.is_finite();
    Ok(AssumptionReport {
        lipschitz,
        growth,
        sum_lipschitz_sq,
        sum_growth_sq,
        phi_lipschitz,
        phi_growth,
        pass,
    })
}
