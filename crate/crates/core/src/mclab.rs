//! Monte Carlo drivers: slope moments against the expectation bound, crossing
//! times against integrated-GBM hitting times, and path ensembles of field runs.
//!
//! Work is spread over paths with rayon and collected in path order, so results
//! do not depend on the number of workers.

use rayon::prelude::*;

use crate::characteristics::{
    advection_residual, first_crossing, steepest_negative_slope, CharSnapshot, CharState, DeathReason,
    InitialProfile, Integrator, Scheme,
};
use crate::error::{Error, Result};
use crate::field::{self, classify_blowup, max_principle_monitor, BlowupClass, Diagnostics, FieldModel, GridField, MaxPrincipleReport};
use crate::noise::{correction_fields, Domain, NoiseBasis, NoiseMode};
use crate::paths::{hitting_time, integrated_gbm_with, sample_path, BrownianPath, Quadrature, TimeGrid};
use crate::scalar::{lit, periodic_delta, Scalar};
use crate::shocks::{integrate_srh, locate_shock, srh_residual, ShockCurve};

/// Per-time moments of a path ensemble with censoring.
///
/// Means and squared deviations are merged with the pairwise update of Chan et al.,
/// so combining partial ensembles in any order agrees to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate<T> {
    pub n_paths: usize,
    pub times: Vec<T>,
    /// Paths still alive at each time.
    pub n_alive: Vec<usize>,
    pub mean: Vec<T>,
    /// Sum of squared deviations from the mean over alive paths.
    pub m2: Vec<T>,
    /// Paths dead at or before each time.
    pub censored: Vec<usize>,
    /// Mean over all paths with censored ones counted as `−cap`.
    pub lower_mean: Vec<T>,
    pub cap: T,
}

impl<T: Scalar> McEstimate<T> {
    pub fn empty(times: Vec<T>, cap: T) -> Self {
        let n = times.len();
        Self {
            n_paths: 0,
            times,
            n_alive: vec![0; n],
            mean: vec![T::zero(); n],
            m2: vec![T::zero(); n],
            censored: vec![0; n],
            lower_mean: vec![T::zero(); n],
            cap,
        }
    }

    /// Adds one path; `None` marks a censored sample.
    pub fn push(&mut self, samples: &[Option<T>]) -> Result<()> {
        if samples.len() != self.times.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} times", samples.len(), self.times.len())));
        }
        let mut one = Self::empty(self.times.clone(), self.cap);
        one.n_paths = 1;
        for (i, s) in samples.iter().enumerate() {
            match s {
                Some(v) => {
                    one.n_alive[i] = 1;
                    one.mean[i] = *v;
                    one.lower_mean[i] = *v;
                }
                None => {
                    one.censored[i] = 1;
                    one.lower_mean[i] = -self.cap;
                }
            }
        }
        *self = self.merge(&one)?;
        Ok(())
    }

    pub fn from_paths(times: Vec<T>, paths: &[Vec<Option<T>>], cap: T) -> Result<Self> {
        let mut est = Self::empty(times, cap);
        for p in paths {
            est.push(p)?;
        }
        Ok(est)
    }

    /// Pools two estimates over the same time grid.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::GridMismatch("estimates use different time grids".into()));
        }
        let mut out = Self::empty(self.times.clone(), self.cap);
        out.n_paths = self.n_paths + other.n_paths;
        for i in 0..self.times.len() {
            let (na, nb) = (self.n_alive[i], other.n_alive[i]);
            let n = na + nb;
            out.n_alive[i] = n;
            out.censored[i] = self.censored[i] + other.censored[i];
            if n > 0 {
                let (fa, fb, fnn) = (T::from_usize_lossy(na), T::from_usize_lossy(nb), T::from_usize_lossy(n));
                let delta = other.mean[i] - self.mean[i];
                out.mean[i] = if na == 0 {
                    other.mean[i]
                } else if nb == 0 {
                    self.mean[i]
                } else {
                    (fa * self.mean[i] + fb * other.mean[i]) / fnn
                };
                out.m2[i] = self.m2[i] + other.m2[i] + delta * delta * fa * fb / fnn;
            }
            if out.n_paths > 0 {
                let (pa, pb) = (T::from_usize_lossy(self.n_paths), T::from_usize_lossy(other.n_paths));
                out.lower_mean[i] = (pa * self.lower_mean[i] + pb * other.lower_mean[i]) / (pa + pb);
            }
        }
        Ok(out)
    }

    /// Unbiased variance over the alive paths.
    pub fn variance(&self, i: usize) -> T {
        let n = self.n_alive[i];
        if n < 2 {
            T::zero()
        } else {
            self.m2[i] / T::from_usize_lossy(n - 1)
        }
    }

    /// `√(variance / n_alive)`.
    pub fn std_error(&self, i: usize) -> T {
        let n = self.n_alive[i];
        if n == 0 {
            T::zero()
        } else {
            (self.variance(i) / T::from_usize_lossy(n)).sqrt()
        }
    }

    /// Writes `t,n_alive,mean,variance,std_error,censored,lower_mean`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,n_alive,mean,variance,std_error,censored,lower_mean")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.times[i],
                self.n_alive[i],
                self.mean[i],
                self.variance(i),
                self.std_error(i),
                self.censored[i],
                self.lower_mean[i]
            )?;
        }
        Ok(())
    }
}

/// Pools partial estimates by pairwise reduction.
pub fn aggregate<T: Scalar>(parts: &[McEstimate<T>]) -> Result<McEstimate<T>> {
    match parts {
        [] => Err(Error::EmptyEstimate),
        [one] => Ok(one.clone()),
        _ => {
            let (a, b) = parts.split_at(parts.len() / 2);
            aggregate(a)?.merge(&aggregate(b)?)
        }
    }
}

/// Upper bound `B(t)` on `E[Y_t]` for `Y_0 = −σ` when `2ψ ≥ C` everywhere:
/// the solution of `m' = −m² + (C/2) m`, `m(0) = −σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurve<T> {
    pub sigma: T,
    pub c: T,
}

impl<T: Scalar> BoundCurve<T> {
    pub fn new(sigma: T, c: T) -> Result<Self> {
        if !(sigma > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("bound needs sigma > 0 and finite C, got {sigma}, {c}")));
        }
        Ok(Self { sigma, c })
    }

    pub fn value(&self, t: T) -> T {
        let (s, c) = (self.sigma, self.c);
        if c == T::zero() {
            return T::one() / (t - T::one() / s);
        }
        let half = lit::<T>(0.5);
        let e = (c * t * half).exp();
        -s * e / (T::one() - lit::<T>(2.0) * s / c * (e - T::one()))
    }

    /// Pole of `B`: `(2/C) ln(1 + C/(2σ))`, or `1/σ` when `C = 0`; finite iff `−σ < C/2`.
    pub fn blowup_time(&self) -> Option<T> {
        let (s, c) = (self.sigma, self.c);
        let half = lit::<T>(0.5);
        if !(-s < half * c) {
            return None;
        }
        if c == T::zero() {
            return Some(T::one() / s);
        }
        Some(lit::<T>(2.0) / c * (c / (lit::<T>(2.0) * s)).ln_1p())
    }
}

/// Ceiling on `E[Y_t]` for `Y_0 > 0`: the solution of `m' = −m² + r m` with
/// `r ≥ max ψ` taken from the upper bound `D` on `2ψ`.
pub fn logistic_ceiling<T: Scalar>(y0: T, d: T, t: T) -> T {
    let r = d.max(d * lit(0.5));
    if r == T::zero() {
        return y0 / (T::one() + y0 * t);
    }
    r / (T::one() + (r / y0 - T::one()) * (-r * t).exp())
}

/// Default probe points for the correction-field bounds around `center`.
pub fn default_probe<T: Scalar>(domain: &Domain<T>, center: T, n: usize) -> Vec<T> {
    match domain.probe_grid(n) {
        Ok(p) => p,
        Err(_) => crate::noise::uniform_probe(center - T::one(), center + T::one(), n),
    }
}

/// Grid-node indices `0, k, 2k, …` plus the last node.
fn output_steps(n_steps: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut v: Vec<usize> = (0..=n_steps).step_by(every).collect();
    if *v.last().unwrap_or(&0) != n_steps {
        v.push(n_steps);
    }
    v
}

/// Monte Carlo estimate of `E[Y_t]` along the characteristic from `x0`.
#[derive(Debug, Clone)]
pub struct SlopeExperiment<T> {
    pub basis: NoiseBasis<T>,
    pub profile: InitialProfile<T>,
    pub x0: T,
    pub n_paths: usize,
    pub grid: TimeGrid<T>,
    pub record_every: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    pub cap: T,
    pub probe: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct SlopeReport<T> {
    pub estimate: McEstimate<T>,
    /// `C = min 2ψ` and `D = max 2ψ` on the probe grid.
    pub c: T,
    pub d: T,
    /// Bound for `Y_0 < 0`.
    pub bound: Option<BoundCurve<T>>,
    /// Output times that entered the bound check.
    pub checked: usize,
    /// Largest `mean − ref − 3 SE` over checked times; positive means violated.
    pub worst_excess: T,
    pub bound_respected: bool,
    /// First time the censoring-aware lower mean falls below `−cap/10`.
    pub divergence_time: Option<T>,
    pub predicted_blowup: Option<T>,
    pub blowups: usize,
    pub sign_flips: usize,
}

pub fn expected_slope_experiment<T: Scalar>(exp: &SlopeExperiment<T>) -> Result<SlopeReport<T>> {
    if exp.n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be ≥ 1".into()));
    }
    let cf = correction_fields(&exp.basis, &exp.probe)?;
    let steps = output_steps(exp.grid.n_steps, exp.record_every);
    let times: Vec<T> = steps.iter().map(|&i| exp.grid.time(i)).collect();
    let k = exp.basis.len();
    let y0 = exp.profile.du0(exp.x0);
    let init = CharState::from_profile(&exp.profile, exp.x0);
    let integrator = Integrator::new(&cf, exp.scheme).with_cap(exp.cap);
    let runs: Vec<(Vec<Option<T>>, Option<DeathReason>)> = (0..exp.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = sample_path(exp.master_seed, p, exp.grid, k);
            let mut states = [init];
            let mut samples = Vec::with_capacity(steps.len());
            let mut next = 0;
            integrator.run(&mut states, &path, |i, _, s| {
                if next < steps.len() && steps[next] == i {
                    samples.push(s[0].alive.then_some(s[0].y));
                    next += 1;
                }
            });
            (samples, states[0].death.map(|d| d.reason))
        })
        .collect();
    let mut estimate = McEstimate::empty(times.clone(), exp.cap);
    let (mut blowups, mut sign_flips) = (0, 0);
    for (samples, death) in &runs {
        estimate.push(samples)?;
        match death {
            Some(DeathReason::BlowUp) => blowups += 1,
            Some(DeathReason::SignFlip) => sign_flips += 1,
            _ => {}
        }
    }
    if estimate.n_alive.iter().skip(1).all(|&n| n == 0) && times.len() > 1 {
        return Err(Error::EmptyEstimate);
    }
    let (c, d) = (cf.psi_lower_bound, cf.psi_upper_bound);
    let bound = if y0 < T::zero() { Some(BoundCurve::new(-y0, c)?) } else { None };
    let predicted_blowup = bound.and_then(|b| b.blowup_time());
    let max_censored = exp.n_paths as f64 * 0.01;
    let three = lit::<T>(3.0);
    let mut worst = T::neg_infinity();
    let mut checked = 0;
    for (i, &t) in times.iter().enumerate() {
        if estimate.n_alive[i] == 0 || estimate.censored[i] as f64 > max_censored {
            continue;
        }
        let reference = match (bound, predicted_blowup) {
            (Some(_), Some(ts)) if t >= ts => continue,
            (Some(b), _) => b.value(t),
            (None, _) if y0 > T::zero() => logistic_ceiling(y0, d, t),
            (None, _) => continue,
        };
        let excess = estimate.mean[i] - reference - three * estimate.std_error(i);
        // rounding in the reference itself
        let slack = lit::<T>(1e-12) * (T::one() + reference.abs());
        worst = worst.max(excess - slack);
        checked += 1;
    }
    let divergence_time = times
        .iter()
        .zip(&estimate.lower_mean)
        .find(|(_, &m)| m < -exp.cap / lit(10.0))
        .map(|(&t, _)| t);
    Ok(SlopeReport {
        estimate,
        c,
        d,
        bound,
        checked,
        worst_excess: worst,
        bound_respected: worst <= T::zero(),
        divergence_time,
        predicted_blowup,
        blowups,
        sign_flips,
    })
}

/// Crossing times of a fan of characteristics under `ξ(x) = αx + β`.
#[derive(Debug, Clone)]
pub struct CrossingExperiment<T> {
    pub alpha: T,
    pub beta: T,
    pub profile: InitialProfile<T>,
    pub fan: Vec<T>,
    pub n_paths: usize,
    pub grid: TimeGrid<T>,
    pub master_seed: u64,
    pub probe: Vec<T>,
    /// Horizons at which the crossed fraction is reported.
    pub horizons: Vec<T>,
    /// Rule for the integrated GBM whose hitting time is compared.
    pub quadrature: Quadrature,
}

#[derive(Debug, Clone)]
pub struct CrossingReport<T> {
    pub theta: T,
    pub crossing: Vec<Option<T>>,
    pub hitting: Vec<Option<T>>,
    /// Largest `|τ − τ_I|` over paths where both are finite.
    pub max_discrepancy: T,
    /// Fraction of paths where the two estimators agree within `2·dt`.
    pub agreement: f64,
    /// `(T, fraction of paths crossed by T)`.
    pub crossed_fraction: Vec<(T, f64)>,
}

impl<T: Scalar> CrossingReport<T> {
    /// Empirical CDF of the crossing time at the sorted finite crossing times.
    pub fn cdf(&self) -> Vec<(T, f64)> {
        let mut taus: Vec<T> = self.crossing.iter().flatten().copied().collect();
        taus.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing times"));
        let n = self.crossing.len() as f64;
        taus.iter().enumerate().map(|(i, &t)| (t, (i + 1) as f64 / n)).collect()
    }

    /// Writes `path_index,tau_crossing,tau_hitting` with empty fields for no event.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_index,tau_crossing,tau_hitting")?;
        let cell = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, (c, h)) in self.crossing.iter().zip(&self.hitting).enumerate() {
            writeln!(w, "{},{},{}", i, cell(*c), cell(*h))?;
        }
        Ok(())
    }
}

pub fn crossing_time_experiment<T: Scalar>(exp: &CrossingExperiment<T>) -> Result<CrossingReport<T>> {
    if exp.n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be ≥ 1".into()));
    }
    let theta = steepest_negative_slope(&exp.profile, &exp.probe);
    let basis = NoiseBasis::new(vec![NoiseMode::linear(exp.alpha, exp.beta)], Domain::real_line());
    let times = exp.grid.times();
    let results: Vec<Result<(Option<T>, Option<T>)>> = (0..exp.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = sample_path(exp.master_seed, p, exp.grid, 1);
            let tau = first_crossing(&exp.fan, &exp.profile, &basis, &path)?;
            let hit = if theta > T::zero() {
                hitting_time(&times, &integrated_gbm_with(&path, 0, exp.alpha, exp.quadrature), T::one() / theta)
            } else {
                None
            };
            Ok((tau, hit))
        })
        .collect();
    let mut crossing = Vec::with_capacity(exp.n_paths);
    let mut hitting = Vec::with_capacity(exp.n_paths);
    for r in results {
        let (c, h) = r?;
        crossing.push(c);
        hitting.push(h);
    }
    let tol = lit::<T>(2.0) * exp.grid.dt();
    let t_end = exp.grid.t_end;
    let mut max_discrepancy = T::zero();
    let mut agree = 0usize;
    for (c, h) in crossing.iter().zip(&hitting) {
        let ok = match (c, h) {
            (Some(a), Some(b)) => {
                max_discrepancy = max_discrepancy.max((*a - *b).abs());
                (*a - *b).abs() <= tol
            }
            (None, None) => true,
            (Some(a), None) | (None, Some(a)) => *a >= t_end - tol,
        };
        agree += usize::from(ok);
    }
    let n = exp.n_paths as f64;
    let crossed_fraction = exp
        .horizons
        .iter()
        .map(|&h| (h, crossing.iter().filter(|c| c.is_some_and(|t| t <= h)).count() as f64 / n))
        .collect();
    Ok(CrossingReport { theta, crossing, hitting, max_discrepancy, agreement: agree as f64 / n, crossed_fraction })
}

/// A field run family: one initial profile and model, many paths.
#[derive(Debug, Clone)]
pub struct FieldRun<T> {
    pub n: usize,
    pub length: T,
    pub profile: InitialProfile<T>,
    pub basis: NoiseBasis<T>,
    pub model: FieldModel<T>,
    pub grid: TimeGrid<T>,
    pub master_seed: u64,
}

impl<T: Scalar> FieldRun<T> {
    pub fn initial(&self, n: usize) -> Result<GridField<T>> {
        let mut f = GridField::from_fn(n, self.length, |x| self.profile.u0(x))?;
        f.t = self.grid.t0;
        Ok(f)
    }

    pub fn path(&self, index: u64) -> BrownianPath<T> {
        sample_path(self.master_seed, index, self.grid, self.basis.len())
    }

    /// Runs path `index` at `n` cells.
    pub fn run<F>(&self, index: u64, n: usize, observe: F) -> Result<(GridField<T>, Diagnostics<T>)>
    where
        F: FnMut(usize, &GridField<T>) -> Result<()>,
    {
        let mut f = self.initial(n)?;
        let diag = field::run(&mut f, &self.basis, &self.path(index), &self.model, observe)?;
        Ok((f, diag))
    }

    fn indices(n_paths: usize) -> Result<Vec<u64>> {
        if n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be ≥ 1".into()));
        }
        Ok((0..n_paths as u64).collect())
    }
}

/// Advects a fan of characteristics alongside the field on path `index` and
/// returns the advection residual over snapshots every `check_every` steps.
pub fn advection_check<T: Scalar>(run: &FieldRun<T>, index: u64, fan: &[T], check_every: usize) -> Result<T> {
    let path = run.path(index);
    let probe = default_probe(&run.basis.domain(), T::zero(), 64);
    let cf = correction_fields(&run.basis, &probe)?;
    let integrator = Integrator::new(&cf, Scheme::Heun).with_cap(T::infinity());
    let grid = *path.grid();
    let dt = grid.dt();
    let every = check_every.max(1);
    let mut states: Vec<CharState<T>> = fan.iter().map(|&x| CharState::from_profile(&run.profile, x)).collect();
    let mut chars = vec![CharSnapshot { t: grid.t0, states: states.clone() }];
    let mut fields = Vec::new();
    let mut f = run.initial(run.n)?;
    fields.push(f.clone());
    for i in 0..grid.n_steps {
        let dw = path.step(i);
        field::step(&mut f, &run.basis, dw, dt, &run.model)?;
        f.t = grid.time(i + 1);
        integrator.advance(&mut states, dw, grid.time(i), dt);
        if (i + 1) % every == 0 || i + 1 == grid.n_steps {
            chars.push(CharSnapshot { t: f.t, states: states.clone() });
            fields.push(f.clone());
        }
    }
    advection_residual(&chars, &fields)
}

/// Sup-norm monitor over an ensemble of viscous runs. With `envelope_rate = Some(c)`
/// the bound is `e^{−c W₀(t)}` on the first mode's path.
pub fn max_principle_ensemble<T: Scalar>(
    run: &FieldRun<T>,
    n_paths: usize,
    envelope_rate: Option<T>,
    tol_per_time: T,
) -> Result<Vec<MaxPrincipleReport<T>>> {
    let idx = FieldRun::<T>::indices(n_paths)?;
    idx.into_par_iter()
        .map(|p| {
            let (_, diag) = run.run(p, run.n, |_, _| Ok(()))?;
            match envelope_rate {
                Some(c) => {
                    let w = run.path(p).cumulative(0);
                    max_principle_monitor(&diag, Some((&w, c)), tol_per_time)
                }
                None => max_principle_monitor(&diag, None, tol_per_time),
            }
        })
        .collect()
}

/// Blow-up classification of path `index` at each horizon, comparing `n` and `2n` cells.
pub fn blowup_coupling<T: Scalar>(run: &FieldRun<T>, index: u64, horizons: &[T]) -> Result<Vec<BlowupClass<T>>> {
    let (_, coarse) = run.run(index, run.n, |_, _| Ok(()))?;
    let (_, fine) = run.run(index, 2 * run.n, |_, _| Ok(()))?;
    horizons.iter().map(|&h| classify_blowup(&coarse, &fine, h)).collect()
}

/// Per-path outcome of tracking a single shock.
#[derive(Debug, Clone)]
pub struct ShockTrack<T> {
    pub detected: ShockCurve<T>,
    pub integrated: ShockCurve<T>,
    /// `sup |s_detected − s_integrated|` modulo the period.
    pub residual: T,
    /// `sup |s_detected − Σ∫ξ_k(s)∘dW_k − (s₀ + ½(u₋+u₊)t)|` with constant states.
    pub stripped_error: T,
}

/// Tracks the shock of a Riemann-type run on path `index`, detecting it every step,
/// and integrates the Rankine-Hugoniot curve with constant states `(u₋, u₊)`.
pub fn shock_track<T: Scalar>(run: &FieldRun<T>, index: u64, s0: T, states: (T, T), threshold: T) -> Result<ShockTrack<T>> {
    let path = run.path(index);
    let period = Some(run.length);
    let mut detected = ShockCurve::new(period);
    run.run(index, run.n, |_, f| {
        detected.push(locate_shock(f, threshold)?);
        Ok(())
    })?;
    let integrated = integrate_srh(s0, |_, _| Ok(states), &run.basis, &path, period)?;
    let residual = srh_residual(&detected, &integrated)?;
    let half = lit::<T>(0.5);
    let speed = half * (states.0 + states.1);
    let lifted = detected.unwrapped();
    let mut noise = T::zero();
    let mut stripped_error = T::zero();
    for i in 0..detected.len() {
        if i > 0 {
            let dw = path.step(i - 1);
            noise = noise + half * (run.basis.velocity(lifted[i - 1], dw) + run.basis.velocity(lifted[i], dw));
        }
        let line = s0 + speed * (detected.times[i] - run.grid.t0);
        stripped_error = stripped_error.max(periodic_delta(lifted[i] - noise - line, run.length).abs());
    }
    Ok(ShockTrack { detected, integrated, residual, stripped_error })
}

/// Runs [`shock_track`] on paths `0..n_paths`.
pub fn shock_track_ensemble<T: Scalar>(run: &FieldRun<T>, n_paths: usize, s0: T, states: (T, T), threshold: T) -> Result<Vec<ShockTrack<T>>> {
    FieldRun::<T>::indices(n_paths)?
        .into_par_iter()
        .map(|p| shock_track(run, p, s0, states, threshold))
        .collect()
}
