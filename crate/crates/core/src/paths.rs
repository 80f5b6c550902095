//! Reproducible multi-mode Brownian paths.
//!
//! Every increment is a pure function of `(master seed, path index, mode, step)`
//! and the refinement history: each `(path, mode)` pair owns an independent
//! ChaCha stream and every step consumes exactly two 64-bit words, so a step's
//! normal draw sits at a fixed counter position. Paths can be generated in any
//! order and on any worker.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DUMP_MAGIC: &[u8; 8] = b"SBPATH01";

/// Uniform time grid `t0 < t0 + dt < … < t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub t_end: T,
    pub n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, t_end: T, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_end > t0) {
            return Err(Error::InvalidParameter(format!(
                "time grid needs t_end > t0 and n_steps >= 1 (got {t0}..{t_end}, {n_steps})"
            )));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    /// Grid on `[0, t_end]` with step as close to `dt` as an integer count allows.
    pub fn with_step(t_end: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let n = (t_end / dt).round().to_usize().unwrap_or(0).max(1);
        Self::new(T::zero(), t_end, n)
    }

    pub fn dt(&self) -> T {
        (self.t_end - self.t0) / T::from_usize_lossy(self.n_steps)
    }

    /// Time of grid node `i` (`0..=n_steps`).
    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt() * T::from_usize_lossy(i)
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_steps: self.n_steps * factor, ..*self }
    }
}

/// Where a path's random numbers come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub path_index: u64,
    /// Factors of successive Brownian-bridge refinements, oldest first.
    pub refinements: Vec<u32>,
}

/// Per-step increments of `K` independent Brownian motions.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath<T> {
    grid: TimeGrid<T>,
    n_modes: usize,
    /// Row-major `[n_steps × n_modes]`.
    increments: Vec<T>,
    lineage: SeedLineage,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one `(lineage, mode)` pair.
fn stream_for(lineage: &SeedLineage, mode: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h = splitmix64(lineage.master_seed);
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        h = splitmix64(h ^ lineage.path_index.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ i as u64);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    // stream id separates modes and refinement generations
    let mut stream = mode as u64;
    for (depth, f) in lineage.refinements.iter().enumerate() {
        stream = splitmix64(stream ^ ((depth as u64 + 1) << 32) ^ u64::from(*f));
    }
    rng.set_stream(stream);
    rng
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws the increments of path `path_index` under `master_seed`.
pub fn sample_path<T: Scalar>(master_seed: u64, path_index: u64, grid: TimeGrid<T>, n_modes: usize) -> BrownianPath<T> {
    let lineage = SeedLineage { master_seed, path_index, refinements: Vec::new() };
    let n = grid.n_steps;
    let sd = grid.dt().to_f64_lossy().sqrt();
    let mut increments = vec![T::zero(); n * n_modes];
    for k in 0..n_modes {
        let mut rng = stream_for(&lineage, k);
        for i in 0..n {
            increments[i * n_modes + k] = T::lit(sd * standard_normal(&mut rng));
        }
    }
    BrownianPath { grid, n_modes, increments, lineage }
}

impl<T: Scalar> BrownianPath<T> {
    /// Path with prescribed increments, e.g. for tests or replay.
    pub fn from_increments(grid: TimeGrid<T>, n_modes: usize, increments: Vec<T>, lineage: SeedLineage) -> Result<Self> {
        if increments.len() != grid.n_steps * n_modes {
            return Err(Error::InvalidParameter(format!(
                "expected {} increments, got {}",
                grid.n_steps * n_modes,
                increments.len()
            )));
        }
        Ok(Self { grid, n_modes, increments, lineage })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn lineage(&self) -> &SeedLineage {
        &self.lineage
    }

    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    /// `ΔW_k` for every mode over step `i`.
    pub fn step(&self, i: usize) -> &[T] {
        &self.increments[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn increment(&self, i: usize, k: usize) -> T {
        self.increments[i * self.n_modes + k]
    }

    /// `W_k` at every grid node, starting from `W_k(t0) = 0`.
    pub fn cumulative(&self, k: usize) -> Vec<T> {
        let mut w = Vec::with_capacity(self.grid.n_steps + 1);
        let mut acc = T::zero();
        w.push(acc);
        for i in 0..self.grid.n_steps {
            acc = acc + self.increment(i, k);
            w.push(acc);
        }
        w
    }

    /// Brownian-bridge refinement inserting `factor − 1` nodes per step.
    ///
    /// The refined increments of each coarse step sum to the coarse increment.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::InvalidParameter(format!("refinement factor must be >= 2, got {factor}")));
        }
        let f = u32::try_from(factor).map_err(|_| Error::InvalidParameter("refinement factor too large".into()))?;
        let mut lineage = self.lineage.clone();
        lineage.refinements.push(f);
        let grid = self.grid.refined(factor);
        let n_coarse = self.grid.n_steps;
        let h = self.grid.dt().to_f64_lossy() / factor as f64;
        let k_modes = self.n_modes;
        let mut increments = vec![T::zero(); n_coarse * factor * k_modes];
        for k in 0..k_modes {
            let mut rng = stream_for(&lineage, k);
            for i in 0..n_coarse {
                let total = self.increment(i, k);
                let mut remaining = total.to_f64_lossy();
                let mut used = T::zero();
                for j in 0..factor {
                    let slot = (i * factor + j) * k_modes + k;
                    if j + 1 == factor {
                        increments[slot] = total - used;
                        break;
                    }
                    let tau = h * (factor - j) as f64;
                    let mean = remaining * h / tau;
                    let var = h * (tau - h) / tau;
                    let d = mean + var.sqrt() * standard_normal(&mut rng);
                    let d_t = T::lit(d);
                    increments[slot] = d_t;
                    used = used + d_t;
                    remaining -= d;
                }
            }
        }
        Ok(Self { grid, n_modes: k_modes, increments, lineage })
    }

    /// Binary dump: header with seed lineage and grid, then little-endian `f64`
    /// increments in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&self.lineage.master_seed.to_le_bytes())?;
        w.write_all(&self.lineage.path_index.to_le_bytes())?;
        w.write_all(&(self.lineage.refinements.len() as u64).to_le_bytes())?;
        for f in &self.lineage.refinements {
            w.write_all(&u64::from(*f).to_le_bytes())?;
        }
        w.write_all(&self.grid.t0.to_f64_lossy().to_le_bytes())?;
        w.write_all(&self.grid.t_end.to_f64_lossy().to_le_bytes())?;
        w.write_all(&(self.grid.n_steps as u64).to_le_bytes())?;
        w.write_all(&(self.n_modes as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn word<R: Read>(r: &mut R) -> Result<[u8; 8]> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        if &word(&mut r)? != DUMP_MAGIC {
            return Err(Error::Parse("not a Brownian path dump".into()));
        }
        let master_seed = u64::from_le_bytes(word(&mut r)?);
        let path_index = u64::from_le_bytes(word(&mut r)?);
        let depth = u64::from_le_bytes(word(&mut r)?);
        if depth > 64 {
            return Err(Error::Parse("implausible refinement depth".into()));
        }
        let mut refinements = Vec::with_capacity(depth as usize);
        for _ in 0..depth {
            let f = u64::from_le_bytes(word(&mut r)?);
            refinements.push(u32::try_from(f).map_err(|_| Error::Parse("refinement factor".into()))?);
        }
        let t0 = f64::from_le_bytes(word(&mut r)?);
        let t_end = f64::from_le_bytes(word(&mut r)?);
        let n_steps = u64::from_le_bytes(word(&mut r)?) as usize;
        let n_modes = u64::from_le_bytes(word(&mut r)?) as usize;
        let mut increments = Vec::with_capacity(n_steps.saturating_mul(n_modes).min(1 << 28));
        for _ in 0..n_steps * n_modes {
            increments.push(T::lit(f64::from_le_bytes(word(&mut r)?)));
        }
        let grid = TimeGrid::new(T::lit(t0), T::lit(t_end), n_steps)?;
        Self::from_increments(grid, n_modes, increments, SeedLineage { master_seed, path_index, refinements })
    }
}

/// Quadrature rule for `∫ e^{−αW} ds` on the path grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    #[default]
    LeftEndpoint,
    Trapezoid,
}

/// `I_t = ∫₀ᵗ e^{−α W_k(s)} ds` by the left-endpoint rule, one value per grid node.
pub fn integrated_gbm<T: Scalar>(path: &BrownianPath<T>, k: usize, alpha: T) -> Vec<T> {
    integrated_gbm_with(path, k, alpha, Quadrature::LeftEndpoint)
}

/// `I_t` with an explicit quadrature rule.
pub fn integrated_gbm_with<T: Scalar>(path: &BrownianPath<T>, k: usize, alpha: T, rule: Quadrature) -> Vec<T> {
    let dt = path.grid().dt();
    let w = path.cumulative(k);
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(w.len());
    out.push(T::zero());
    let mut acc = T::zero();
    for pair in w.windows(2) {
        let left = (-alpha * pair[0]).exp();
        acc = acc
            + match rule {
                Quadrature::LeftEndpoint => left * dt,
                Quadrature::Trapezoid => half * (left + (-alpha * pair[1]).exp()) * dt,
            };
        out.push(acc);
    }
    out
}

/// First time a nondecreasing series crosses `level`, linearly interpolated.
pub fn hitting_time<T: Scalar>(times: &[T], series: &[T], level: T) -> Option<T> {
    if series.first().is_some_and(|&v| v >= level) {
        return times.first().copied();
    }
    for i in 1..series.len() {
        if series[i] >= level {
            let (a, b) = (series[i - 1], series[i]);
            let frac = if b > a { (level - a) / (b - a) } else { T::zero() };
            return Some(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid<f64> {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn empty_mode_path_is_empty() {
        let p = sample_path(1, 0, grid(10), 0);
        assert!(p.increments().is_empty());
        assert!(p.refine(2).unwrap().increments().is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_order_independent() {
        let a = sample_path(42, 7, grid(100), 3);
        let _ = sample_path::<f64>(42, 3, grid(100), 3);
        let b = sample_path(42, 7, grid(100), 3);
        assert_eq!(a, b);
        let c = sample_path(42, 8, grid(100), 3);
        assert_ne!(a.increments(), c.increments());
        // mode streams are independent of how many modes were drawn
        let d = sample_path(42, 7, grid(100), 1);
        for i in 0..100 {
            assert_eq!(d.increment(i, 0), a.increment(i, 0));
        }
    }

    #[test]
    fn increments_have_brownian_moments() {
        let n_paths = 100_000;
        let dt = 1e-3;
        let g = TimeGrid::new(0.0, dt, 1).unwrap();
        let draws: Vec<f64> = (0..n_paths).map(|p| sample_path(9, p, g, 1).increment(0, 0)).collect();
        let mean = draws.iter().sum::<f64>() / n_paths as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
        let sigma = dt.sqrt();
        assert!(mean.abs() < 4.0 * sigma / (n_paths as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn refinement_preserves_coarse_increments() {
        let p = sample_path(5, 1, grid(50), 2);
        let r = p.refine(2).unwrap();
        assert_eq!(r.grid().n_steps, 100);
        for i in 0..50 {
            for k in 0..2 {
                let s = r.increment(2 * i, k) + r.increment(2 * i + 1, k);
                assert!((s - p.increment(i, k)).abs() <= 1e-15, "{s} vs {}", p.increment(i, k));
            }
        }
        assert!(p.refine(1).is_err());
    }

    #[test]
    fn double_refinement_matches_quadruple_in_variance() {
        let n_paths = 4000;
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let mut var_twice: f64 = 0.0;
        let mut var_once: f64 = 0.0;
        for p in 0..n_paths {
            let base: BrownianPath<f64> = sample_path(3, p, g, 1);
            let a = base.refine(2).unwrap().refine(2).unwrap();
            let b = base.refine(4).unwrap();
            var_twice += a.increment(1, 0).powi(2);
            var_once += b.increment(1, 0).powi(2);
        }
        var_twice /= n_paths as f64;
        var_once /= n_paths as f64;
        // each sub-increment has variance 1/4; MC standard error ~ 0.25·sqrt(2/n)
        let se = 0.25 * (2.0 / n_paths as f64).sqrt();
        assert!((var_twice - 0.25).abs() < 4.0 * se, "{var_twice}");
        assert!((var_once - 0.25).abs() < 4.0 * se, "{var_once}");
    }

    #[test]
    fn integrated_gbm_basic_properties() {
        let p = sample_path(11, 0, grid(1000), 1);
        let flat = integrated_gbm(&p, 0, 0.0);
        for (i, v) in flat.iter().enumerate() {
            assert!((v - i as f64 * 1e-3).abs() < 1e-12);
        }
        let i1 = integrated_gbm(&p, 0, 1.0);
        assert_eq!(i1[0], 0.0);
        assert!(i1.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn integrated_gbm_mean_matches_quadrature() {
        // E e^{-W_s} = e^{s/2}; ∫₀¹ e^{s/2} ds = 2(e^{1/2} − 1)
        let exact = 2.0 * (0.5f64.exp() - 1.0);
        let n_paths = 10_000;
        let g = grid(200);
        let vals: Vec<f64> = (0..n_paths)
            .map(|p| *integrated_gbm(&sample_path(21, p, g, 1), 0, 1.0).last().unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / n_paths as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
        let se = (var / n_paths as f64).sqrt();
        // left-endpoint bias is O(dt)
        assert!((mean - exact).abs() < 4.0 * se + 5e-3, "mean {mean} exact {exact} se {se}");
    }

    #[test]
    fn binary_dump_round_trips() {
        let p = sample_path(77, 4, grid(16), 3).refine(2).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * 9 + 8 * 32 * 3);
        let q = BrownianPath::<f64>::read_binary(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert!(BrownianPath::<f64>::read_binary(&b"garbage!"[..]).is_err());
    }

    #[test]
    fn hitting_time_interpolates() {
        let t = [0.0, 1.0, 2.0];
        let s = [0.0, 1.0, 3.0];
        assert_eq!(hitting_time(&t, &s, 2.0), Some(1.5));
        assert_eq!(hitting_time(&t, &s, 5.0), None);
    }
}
