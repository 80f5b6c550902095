//! One function per experiment kind. Each writes its CSVs into the output directory
//! and returns summary values plus the invariant checks it evaluated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use burgers_core::characteristics::{write_trajectory_csv, CharState, DeathReason, Integrator, TrajectoryRow};
use burgers_core::field::{self, write_snapshot_csv, Diagnostics, GridField};
use burgers_core::mclab::{
    self, crossing_time_experiment, default_probe, expected_slope_experiment, CrossingExperiment, FieldRun, SlopeExperiment,
};
use burgers_core::noise::correction_fields;
use burgers_core::paths::sample_path;
use rayon::prelude::*;
use toml::Value;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::Failure;

/// Result of one pass/fail check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.push((key.into(), v.into()));
    }
}

/// Output directory plus the list of files written so far.
struct Sink<'a> {
    dir: &'a Path,
}

impl Sink<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path: PathBuf = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Failure::Config(format!("cannot create {}: {e}", parent.display())))?;
        }
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
    }

    fn write<F>(&self, out: &mut Outcome, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> burgers_core::Result<()>,
    {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| Failure::Config(format!("cannot write {name}: {e}")))?;
        out.outputs.push(name.into());
        Ok(())
    }
}

fn floats(v: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(v.into_iter().map(Value::Float).collect())
}

pub fn run(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    let sink = Sink { dir };
    match cfg.experiment {
        ExperimentKind::Spde => spde(cfg, seed, &sink),
        ExperimentKind::Characteristics => characteristics(cfg, seed, &sink),
        ExperimentKind::Crossing => crossing(cfg, seed, &sink),
        ExperimentKind::SlopeMoments => slope_moments(cfg, seed, &sink),
        ExperimentKind::ShockTrack => shock_track(cfg, seed, &sink),
        ExperimentKind::MaxPrinciple => max_principle(cfg, seed, &sink),
        ExperimentKind::BlowupCriterion => blowup_criterion(cfg, seed, &sink),
    }
}

fn field_run(cfg: &ExperimentConfig, seed: u64) -> Result<FieldRun<f64>, Failure> {
    let grid = cfg.grid.as_ref().ok_or_else(|| Failure::Config("missing [grid]".into()))?;
    Ok(FieldRun {
        n: grid.n,
        length: cfg.period().ok_or_else(|| Failure::Config("grid experiments need a torus domain".into()))?,
        profile: cfg.profile()?,
        basis: cfg.basis()?,
        model: cfg.field_model(),
        grid: cfg.grid_times()?,
        master_seed: seed,
    })
}

/// Final field, diagnostics and snapshots of one path.
type FieldOutput = (GridField<f64>, Diagnostics<f64>, Vec<GridField<f64>>);

/// Trajectory rows, final states and whether every slope kept its sign.
type CharOutput = (Vec<TrajectoryRow<f64>>, Vec<CharState<f64>>, bool);

fn path_name(stem: &str, p: usize) -> String {
    format!("{stem}_path{p:04}.csv")
}

fn spde(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let run = field_run(cfg, seed)?;
    let every = cfg.grid.as_ref().map_or(0, |g| g.snapshot_every);
    let results: Vec<Result<FieldOutput, Failure>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut snaps = Vec::new();
            let (f, d) = run.run(p as u64, run.n, |i, f| {
                if every > 0 && i % every == 0 {
                    snaps.push(f.clone());
                }
                Ok(())
            })?;
            Ok((f, d, snaps))
        })
        .collect();
    let mut out = Outcome::default();
    let mut shock_times = Vec::new();
    let mut drift: f64 = 0.0;
    for (p, r) in results.into_iter().enumerate() {
        let (f, d, snaps) = r?;
        sink.write(&mut out, &path_name("diagnostics", p), |w| d.write_csv(w))?;
        for (j, s) in snaps.iter().enumerate() {
            sink.write(&mut out, &format!("snapshots/path{p:04}_{:06}.csv", j * every), |w| write_snapshot_csv(s, w))?;
        }
        sink.write(&mut out, &path_name("final", p), |w| write_snapshot_csv(&f, w))?;
        shock_times.push(field::gradient_blowup_time(&d).unwrap_or(f64::NAN));
        drift = drift.max(d.mass_drift());
    }
    let found: Vec<f64> = shock_times.iter().copied().filter(|t| t.is_finite()).collect();
    out.put("shock_time", floats(shock_times.iter().copied()));
    out.put("shock_time_found", found.len() as i64);
    if !found.is_empty() {
        out.put("shock_time_mean", found.iter().sum::<f64>() / found.len() as f64);
    }
    out.put("mass_drift", drift);
    if run.basis.is_uniform() && cfg.b0.is_none() {
        out.checks.push(Check::new("mass_conservation", drift < 1e-10, format!("max mass drift {drift:e}")));
    }
    Ok(out)
}

fn characteristics(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let opts = &cfg.characteristics;
    let basis = cfg.basis()?;
    let profile = cfg.profile()?;
    let grid = cfg.grid_times()?;
    let center = opts.positions.iter().sum::<f64>() / opts.positions.len() as f64;
    let cf = correction_fields(&basis, &default_probe(&cfg.domain(), center, cfg.probe_points))?;
    let integrator = Integrator::new(&cf, opts.scheme.into()).with_cap(opts.cap);
    let every = opts.record_every.max(1);
    let init: Vec<CharState<f64>> = opts.positions.iter().map(|&x| CharState::from_profile(&profile, x)).collect();
    let runs: Vec<CharOutput> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = sample_path(seed, p, grid, basis.len());
            let mut states = init.clone();
            let mut rows = Vec::new();
            let mut signs_kept = true;
            integrator.run(&mut states, &path, |i, t, st| {
                for (c, s) in st.iter().enumerate() {
                    if s.alive {
                        let y0 = init[c].y;
                        signs_kept &= !(y0 < 0.0 && s.y >= 0.0) && !(y0 > 0.0 && s.y < 0.0);
                    }
                    if i % every == 0 || i == grid.n_steps {
                        rows.push(TrajectoryRow { t, path_index: p, char_index: c, x: s.x, y: s.y, u_val: s.u_val, alive: s.alive });
                    }
                }
            });
            (rows, states, signs_kept)
        })
        .collect();
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let (mut blowups, mut flips, mut other, mut alive) = (0i64, 0i64, 0i64, 0i64);
    let mut signs_kept = true;
    let mut blowup_times = Vec::new();
    for (r, states, kept) in runs {
        rows.extend(r);
        signs_kept &= kept;
        for s in states {
            match s.death {
                None => alive += 1,
                Some(d) => match d.reason {
                    DeathReason::BlowUp => {
                        blowups += 1;
                        blowup_times.push(d.time);
                    }
                    DeathReason::SignFlip => flips += 1,
                    _ => other += 1,
                },
            }
        }
    }
    sink.write(&mut out, "trajectories.csv", |w| write_trajectory_csv(&rows, w))?;
    out.put("alive", alive);
    out.put("blowups", blowups);
    out.put("sign_flips", flips);
    out.put("other_deaths", other);
    if !blowup_times.is_empty() {
        out.put("blowup_time_mean", blowup_times.iter().sum::<f64>() / blowup_times.len() as f64);
    }
    out.checks.push(Check::new("slope_sign", signs_kept, "slopes keep the sign of du0 while alive".into()));
    Ok(out)
}

fn crossing(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let (alpha, beta) = cfg.linear_mode()?;
    let opts = &cfg.crossing;
    let lo = opts.fan.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = opts.fan.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut horizons = opts.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    let exp = CrossingExperiment {
        alpha,
        beta,
        profile: cfg.profile()?,
        fan: opts.fan.clone(),
        n_paths: cfg.n_paths,
        grid: cfg.grid_times()?,
        master_seed: seed,
        probe: burgers_core::noise::uniform_probe(lo, hi, cfg.probe_points),
        horizons,
        quadrature: cfg.quadrature(),
    };
    let r = crossing_time_experiment(&exp)?;
    let mut out = Outcome::default();
    sink.write(&mut out, "crossing.csv", |w| r.write_csv(w))?;
    sink.write(&mut out, "crossing_cdf.csv", |w| {
        writeln!(w, "t,cdf")?;
        for (t, f) in r.cdf() {
            writeln!(w, "{t},{f}")?;
        }
        Ok(())
    })?;
    let crossed = r.crossing.iter().filter(|c| c.is_some()).count();
    out.put("theta", r.theta);
    out.put("agreement", r.agreement);
    out.put("max_discrepancy", r.max_discrepancy);
    out.put("crossed", crossed as i64);
    out.put(
        "crossed_fraction",
        Value::Array(r.crossed_fraction.iter().map(|&(t, f)| floats([t, f])).collect()),
    );
    out.checks.push(Check::new(
        "estimator_agreement",
        r.agreement >= opts.min_agreement,
        format!("{:.4} of paths agree within 2 dt, need {}", r.agreement, opts.min_agreement),
    ));
    let monotone = r.crossed_fraction.windows(2).all(|w| w[1].1 >= w[0].1);
    out.checks.push(Check::new("crossed_fraction_monotone", monotone, "crossed fraction nondecreasing in the horizon".into()));
    Ok(out)
}

fn slope_moments(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let opts = &cfg.slope;
    let exp = SlopeExperiment {
        basis: cfg.basis()?,
        profile: cfg.profile()?,
        x0: opts.x0,
        n_paths: cfg.n_paths,
        grid: cfg.grid_times()?,
        record_every: opts.record_every,
        master_seed: seed,
        scheme: opts.scheme.into(),
        cap: opts.cap,
        probe: default_probe(&cfg.domain(), opts.x0, cfg.probe_points),
    };
    let r = expected_slope_experiment(&exp)?;
    let mut out = Outcome::default();
    sink.write(&mut out, "slope_moments.csv", |w| r.estimate.write_csv(w))?;
    if let Some(b) = r.bound {
        let ts = r.predicted_blowup.unwrap_or(f64::INFINITY);
        sink.write(&mut out, "bound.csv", |w| {
            writeln!(w, "t,bound")?;
            for &t in r.estimate.times.iter().filter(|&&t| t < ts) {
                writeln!(w, "{t},{}", b.value(t))?;
            }
            Ok(())
        })?;
    }
    out.put("C", r.c);
    out.put("D", r.d);
    out.put("y0", exp.profile.du0(opts.x0));
    if let Some(t) = r.predicted_blowup {
        out.put("t_star", t);
    }
    if let Some(t) = r.divergence_time {
        out.put("divergence_time", t);
    }
    out.put("blowups", r.blowups as i64);
    out.put("sign_flips", r.sign_flips as i64);
    out.put("times_checked", r.checked as i64);
    out.put("worst_excess", r.worst_excess);
    if r.checked > 0 {
        out.checks.push(Check::new(
            "expectation_bound",
            r.bound_respected,
            format!("mean − bound − 3 SE peaks at {:e} over {} times", r.worst_excess, r.checked),
        ));
    }
    Ok(out)
}

fn shock_track(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let run = field_run(cfg, seed)?;
    let (s0, um, up) = cfg.shock_states()?;
    let tracks = mclab::shock_track_ensemble(&run, cfg.n_paths, s0, (um, up), cfg.shock_threshold())?;
    let dx = run.length / run.n as f64;
    let mut out = Outcome::default();
    for (p, t) in tracks.iter().enumerate() {
        sink.write(&mut out, &path_name("shock_detected", p), |w| t.detected.write_csv(w))?;
        sink.write(&mut out, &path_name("shock_srh", p), |w| t.integrated.write_csv(w))?;
    }
    let worst = tracks.iter().map(|t| t.residual).fold(0.0, f64::max);
    let stripped = tracks.iter().map(|t| t.stripped_error).fold(0.0, f64::max);
    out.put("dx", dx);
    out.put("residual", floats(tracks.iter().map(|t| t.residual)));
    out.put("residual_max_cells", worst / dx);
    out.put("stripped_error_max_cells", stripped / dx);
    let limit = cfg.shock_residual_cells();
    out.checks.push(Check::new(
        "srh_residual",
        worst < limit * dx,
        format!("worst residual {:.3} cells, limit {limit}", worst / dx),
    ));
    Ok(out)
}

fn max_principle(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let run = field_run(cfg, seed)?;
    let opts = &cfg.max_principle;
    let rate = if opts.envelope { cfg.b0 } else { None };
    let reports = mclab::max_principle_ensemble(&run, cfg.n_paths, rate, opts.tolerance)?;
    let mut out = Outcome::default();
    sink.write(&mut out, "max_principle.csv", |w| {
        writeln!(w, "path_index,worst_ratio,worst_time,violated")?;
        for (p, r) in reports.iter().enumerate() {
            writeln!(w, "{p},{},{},{}", r.worst_ratio, r.worst_time, u8::from(r.violated))?;
        }
        Ok(())
    })?;
    let violations = reports.iter().filter(|r| r.violated).count();
    out.put("violations", violations as i64);
    out.put("worst_ratio", reports.iter().map(|r| r.worst_ratio).fold(f64::NEG_INFINITY, f64::max));
    out.checks.push(Check::new(
        "max_principle",
        violations == 0,
        format!("{violations} of {} paths exceed the sup-norm bound", reports.len()),
    ));
    Ok(out)
}

fn blowup_criterion(cfg: &ExperimentConfig, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let run = field_run(cfg, seed)?;
    let horizons = &cfg.blowup.horizons;
    let classes: Vec<_> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| mclab::blowup_coupling(&run, p, horizons))
        .collect::<Result<_, _>>()?;
    let mut out = Outcome::default();
    sink.write(&mut out, "blowup.csv", |w| {
        writeln!(w, "path_index,horizon,h2_ratio,A_ratio,h2_diverges,A_diverges")?;
        for (p, cs) in classes.iter().enumerate() {
            for c in cs {
                writeln!(
                    w,
                    "{p},{},{},{},{},{}",
                    c.horizon,
                    c.h2_ratio,
                    c.grad_integral_ratio,
                    u8::from(c.h2_diverges),
                    u8::from(c.grad_integral_diverges)
                )?;
            }
        }
        Ok(())
    })?;
    let agree = classes.iter().filter(|cs| cs.iter().all(|c| c.agrees())).count();
    out.put("agreeing_paths", agree as i64);
    out.put("paths", classes.len() as i64);
    out.checks.push(Check::new(
        "blowup_classification",
        agree == classes.len(),
        format!("{agree} of {} paths classify H² and A alike", classes.len()),
    ));
    Ok(out)
}
