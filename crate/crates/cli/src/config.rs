//! Experiment configuration: a TOML file deserialized into [`ExperimentConfig`] and
//! checked by [`ExperimentConfig::validate`] before anything runs.

use std::path::{Path, PathBuf};

use burgers_core::characteristics::{InitialProfile, Scheme};
use burgers_core::field::{FieldModel, Interpolation, ViscousMethod};
use burgers_core::noise::{Domain, NoiseBasis, NoiseMode};
use burgers_core::paths::{Quadrature, TimeGrid};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spde,
    Characteristics,
    Crossing,
    SlopeMoments,
    ShockTrack,
    MaxPrinciple,
    BlowupCriterion,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spde => "spde",
            Self::Characteristics => "characteristics",
            Self::Crossing => "crossing",
            Self::SlopeMoments => "slope-moments",
            Self::ShockTrack => "shock-track",
            Self::MaxPrinciple => "max-principle",
            Self::BlowupCriterion => "blowup-criterion",
        }
    }

    /// Experiments that solve the field equation on a grid.
    pub fn needs_grid(self) -> bool {
        matches!(self, Self::Spde | Self::ShockTrack | Self::MaxPrinciple | Self::BlowupCriterion)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub n_paths: usize,
    pub output: Option<PathBuf>,
    pub domain: DomainConfig,
    #[serde(default)]
    pub noise: Vec<ModeConfig>,
    pub u0: Option<ProfileConfig>,
    pub time: TimeConfig,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub nu: f64,
    pub b0: Option<f64>,
    #[serde(default = "default_probe_points")]
    pub probe_points: usize,
    #[serde(default)]
    pub characteristics: CharacteristicsConfig,
    #[serde(default)]
    pub crossing: CrossingConfig,
    #[serde(default)]
    pub slope: SlopeConfig,
    pub shock: Option<ShockConfig>,
    #[serde(default)]
    pub max_principle: MaxPrincipleConfig,
    #[serde(default)]
    pub blowup: BlowupConfig,
    /// Directory that relative file names resolve against; set by [`load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

fn default_probe_points() -> usize {
    4096
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Torus { length: f64 },
    Line,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeConfig {
    Linear {
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
    /// `amp · sin(k ω x)` with `ω = 2π/L` on a torus, 1 on the line.
    Sin { k: u32, amp: f64 },
    Cos { k: u32, amp: f64 },
    /// Sine and cosine pairs `k = 1..=kmax` with amplitude `scale/k²`.
    Fourier { kmax: u32, scale: f64 },
    /// Two-column CSV `x, ξ`, periodic over the torus.
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileConfig {
    /// `amplitude · sin(wavenumber · x) + offset`.
    Sine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset − sigma · x`.
    Line {
        sigma: f64,
        #[serde(default)]
        offset: f64,
    },
    Riemann { left: f64, right: f64, position: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViscousConfig {
    #[default]
    Implicit,
    Spectral,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationConfig {
    #[default]
    MonotoneCubic,
    Spectral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub viscous: ViscousConfig,
    #[serde(default)]
    pub interpolation: InterpolationConfig,
    /// Snapshot CSVs are written every this many steps; 0 writes only the final state.
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    Ito,
    #[default]
    Heun,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Self {
        match s {
            SchemeConfig::Ito => Scheme::Ito,
            SchemeConfig::Heun => Scheme::Heun,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicsConfig {
    #[serde(default = "default_positions")]
    pub positions: Vec<f64>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

impl Default for CharacteristicsConfig {
    fn default() -> Self {
        Self { positions: default_positions(), scheme: SchemeConfig::default(), cap: default_cap(), record_every: 1 }
    }
}

fn default_positions() -> Vec<f64> {
    vec![0.0]
}

fn default_cap() -> f64 {
    1e6
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureConfig {
    LeftEndpoint,
    #[default]
    Trapezoid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    #[serde(default = "default_fan")]
    pub fan: Vec<f64>,
    #[serde(default)]
    pub horizons: Vec<f64>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Required fraction of paths where crossing and hitting times agree within `2·dt`.
    #[serde(default = "default_agreement")]
    pub min_agreement: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self { fan: default_fan(), horizons: Vec::new(), quadrature: QuadratureConfig::default(), min_agreement: default_agreement() }
    }
}

fn default_fan() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}

fn default_agreement() -> f64 {
    0.99
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeConfig {
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        Self { x0: 0.0, scheme: SchemeConfig::default(), cap: default_cap(), record_every: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockConfig {
    /// Initial shock position; defaults to the Riemann step position.
    pub s0: Option<f64>,
    pub u_minus: Option<f64>,
    pub u_plus: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Allowed `sup |s_detected − s_integrated|` in cells.
    #[serde(default = "default_residual_cells")]
    pub residual_cells: f64,
}

fn default_threshold() -> f64 {
    0.25
}

fn default_residual_cells() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxPrincipleConfig {
    #[serde(default = "default_mp_tol")]
    pub tolerance: f64,
    /// Check the `e^{−b₀ W₀}` envelope instead of the plain bound.
    #[serde(default)]
    pub envelope: bool,
}

impl Default for MaxPrincipleConfig {
    fn default() -> Self {
        Self { tolerance: default_mp_tol(), envelope: false }
    }
}

fn default_mp_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    #[serde(default)]
    pub horizons: Vec<f64>,
}

/// Reads and validates `path`.
pub fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), Failure> {
    let raw = std::fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw).map_err(|_| Failure::Config("config is not valid UTF-8".into()))?;
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Failure::Config(one_line(&e.to_string())))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    Ok((cfg, raw))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be > 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.n_paths == 0 {
            return Err(bad("n_paths must be ≥ 1"));
        }
        if self.u0.is_none() {
            return Err(bad("u0 is required"));
        }
        positive("time.dt", self.time.dt)?;
        if !(self.time.t_end > self.time.t0) {
            return Err(bad("time.t_end must exceed time.t0"));
        }
        if let DomainConfig::Torus { length } = self.domain {
            positive("domain.length", length)?;
        }
        if self.probe_points < 2 {
            return Err(bad("probe_points must be ≥ 2"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(bad(format!("nu must be ≥ 0, got {}", self.nu)));
        }
        for m in &self.noise {
            if let ModeConfig::Tabulated { file } = m {
                let p = self.base_dir.join(file);
                if !p.is_file() {
                    return Err(bad(format!("noise file {} does not exist", p.display())));
                }
                if !matches!(self.domain, DomainConfig::Torus { .. }) {
                    return Err(bad("tabulated noise needs a torus domain"));
                }
            }
        }
        if self.experiment.needs_grid() {
            let g = self.grid.as_ref().ok_or_else(|| bad(format!("{} needs a [grid] table", self.experiment.as_str())))?;
            if g.n < 4 || !g.n.is_power_of_two() {
                return Err(bad(format!("grid.n must be a power of two ≥ 4, got {}", g.n)));
            }
            positive("grid.cfl", g.cfl)?;
            if !matches!(self.domain, DomainConfig::Torus { .. }) {
                return Err(bad("grid experiments need a torus domain"));
            }
        }
        match self.experiment {
            ExperimentKind::Crossing => {
                self.linear_mode()?;
                if !matches!(self.u0, Some(ProfileConfig::Line { .. })) {
                    return Err(bad("crossing needs a line u0"));
                }
                if self.crossing.fan.len() < 2 {
                    return Err(bad("crossing.fan needs at least 2 positions"));
                }
            }
            ExperimentKind::ShockTrack => {
                let (_, um, up) = self.shock_states()?;
                if !(um > up) {
                    return Err(bad("shock-track needs u_minus > u_plus"));
                }
            }
            ExperimentKind::MaxPrinciple if self.max_principle.envelope && (self.b0.is_none() || self.noise.is_empty()) => {
                return Err(bad("max_principle.envelope needs b0 and at least one noise mode"));
            }
            ExperimentKind::BlowupCriterion if self.blowup.horizons.is_empty() => {
                return Err(bad("blowup.horizons must not be empty"));
            }
            ExperimentKind::Characteristics if self.characteristics.positions.is_empty() => {
                return Err(bad("characteristics.positions must not be empty"));
            }
            _ => {}
        }
        if self.b0.is_some() && self.noise.is_empty() {
            return Err(bad("b0 needs at least one noise mode"));
        }
        self.basis()?;
        self.grid_times()?;
        Ok(())
    }

    pub fn domain(&self) -> Domain<f64> {
        match self.domain {
            DomainConfig::Torus { length } => Domain::torus(length),
            DomainConfig::Line => Domain::real_line(),
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.domain {
            DomainConfig::Torus { length } => Some(length),
            DomainConfig::Line => None,
        }
    }

    pub fn basis(&self) -> Result<NoiseBasis<f64>, Failure> {
        let domain = self.domain();
        let base = self.period().map_or(1.0, |l| std::f64::consts::TAU / l);
        let mut basis = NoiseBasis::empty(domain);
        for m in &self.noise {
            match m {
                ModeConfig::Linear { alpha, beta } => basis.push(NoiseMode::linear(*alpha, *beta)),
                ModeConfig::Sin { k, amp } => basis.push(NoiseMode::FourierSin { k: *k, amp: *amp, base }),
                ModeConfig::Cos { k, amp } => basis.push(NoiseMode::FourierCos { k: *k, amp: *amp, base }),
                ModeConfig::Fourier { kmax, scale } => {
                    for mode in NoiseBasis::fourier(*kmax, *scale, domain).modes() {
                        basis.push(mode.clone());
                    }
                }
                ModeConfig::Tabulated { file } => {
                    let period = self.period().ok_or_else(|| bad("tabulated noise needs a torus domain"))?;
                    let mode = NoiseMode::from_csv(self.base_dir.join(file), period).map_err(|e| bad(format!("noise file {}: {e}", file.display())))?;
                    basis.push(mode);
                }
            }
        }
        Ok(basis)
    }

    pub fn profile(&self) -> Result<InitialProfile<f64>, Failure> {
        Ok(match self.u0.as_ref().ok_or_else(|| bad("u0 is required"))? {
            ProfileConfig::Sine { amplitude, wavenumber, offset } => InitialProfile::sine(*amplitude, *wavenumber, *offset),
            ProfileConfig::Line { sigma, offset } => InitialProfile::negative_line(*sigma, *offset),
            ProfileConfig::Riemann { left, right, position } => InitialProfile::riemann(*left, *right, *position, self.period()),
        })
    }

    pub fn grid_times(&self) -> Result<TimeGrid<f64>, Failure> {
        let span = self.time.t_end - self.time.t0;
        let steps = (span / self.time.dt).round();
        if !(steps >= 1.0) || ((steps * self.time.dt - span).abs() > 1e-9 * span.max(1.0)) {
            return Err(bad(format!("time.dt = {} does not divide the interval [{}, {}]", self.time.dt, self.time.t0, self.time.t_end)));
        }
        TimeGrid::new(self.time.t0, self.time.t_end, steps as usize).map_err(|e| bad(e.to_string()))
    }

    pub fn field_model(&self) -> FieldModel<f64> {
        let g = self.grid.as_ref();
        FieldModel {
            nu: self.nu,
            zeroth_order: self.b0,
            cfl_max: g.map_or(0.5, |g| g.cfl),
            viscous: match g.map(|g| g.viscous).unwrap_or_default() {
                ViscousConfig::Implicit => ViscousMethod::Implicit,
                ViscousConfig::Spectral => ViscousMethod::Spectral,
            },
            interpolation: match g.map(|g| g.interpolation).unwrap_or_default() {
                InterpolationConfig::MonotoneCubic => Interpolation::MonotoneCubic,
                InterpolationConfig::Spectral => Interpolation::Spectral,
            },
        }
    }

    /// `(α, β)` of the single linear mode the crossing experiment needs.
    pub fn linear_mode(&self) -> Result<(f64, f64), Failure> {
        match self.noise.as_slice() {
            [ModeConfig::Linear { alpha, beta }] => Ok((*alpha, *beta)),
            _ => Err(bad("crossing needs exactly one linear noise mode")),
        }
    }

    pub fn quadrature(&self) -> Quadrature {
        match self.crossing.quadrature {
            QuadratureConfig::LeftEndpoint => Quadrature::LeftEndpoint,
            QuadratureConfig::Trapezoid => Quadrature::Trapezoid,
        }
    }

    /// `(s0, u₋, u₊)`, falling back to the Riemann data of `u0`.
    pub fn shock_states(&self) -> Result<(f64, f64, f64), Failure> {
        let riemann = match self.u0 {
            Some(ProfileConfig::Riemann { left, right, position }) => Some((position, left, right)),
            _ => None,
        };
        let opts = self.shock.as_ref();
        let pick = |v: Option<f64>, fallback: Option<f64>, name: &str| {
            v.or(fallback).ok_or_else(|| bad(format!("shock.{name} is required unless u0 is a Riemann step")))
        };
        Ok((
            pick(opts.and_then(|s| s.s0), riemann.map(|r| r.0), "s0")?,
            pick(opts.and_then(|s| s.u_minus), riemann.map(|r| r.1), "u_minus")?,
            pick(opts.and_then(|s| s.u_plus), riemann.map(|r| r.2), "u_plus")?,
        ))
    }

    pub fn shock_threshold(&self) -> f64 {
        self.shock.as_ref().map_or(default_threshold(), |s| s.threshold)
    }

    pub fn shock_residual_cells(&self) -> f64 {
        self.shock.as_ref().map_or(default_residual_cells(), |s| s.residual_cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, Failure> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    const BASE: &str = r#"
experiment = "spde"
[domain]
kind = "torus"
length = 1.0
[u0]
kind = "sine"
amplitude = 1.0
wavenumber = 6.283185307179586
[time]
t_end = 0.1
dt = 0.001
[grid]
n = 64
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.n_paths, 1);
        assert_eq!(cfg.grid_times().unwrap().n_steps, 100);
        assert!(cfg.basis().unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_grid_and_steps() {
        assert!(matches!(parse(&BASE.replace("n = 64", "n = 100")), Err(Failure::Config(_))));
        assert!(matches!(parse(&BASE.replace("dt = 0.001", "dt = 0.003")), Err(Failure::Config(_))));
        assert!(matches!(parse(&BASE.replace("dt = 0.001", "dt = -0.001")), Err(Failure::Config(_))));
        assert!(matches!(parse(&BASE.replace("[grid]\nn = 64", "")), Err(Failure::Config(_))));
    }

    #[test]
    fn fourier_mode_expands_to_pairs() {
        let cfg = parse(&format!("{BASE}[[noise]]\nkind = \"fourier\"\nkmax = 3\nscale = 0.1\n")).unwrap();
        assert_eq!(cfg.basis().unwrap().len(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(&format!("{BASE}bogus = 1\n")).is_err());
    }
}
