use burgers_core::characteristics::InitialProfile;
use burgers_core::field::{FieldModel, GridField};
use burgers_core::mclab::{shock_track, FieldRun};
use burgers_core::noise::{Domain, NoiseBasis, NoiseMode};
use burgers_core::paths::{sample_path, TimeGrid};
use burgers_core::shocks::{detect_shock, integrate_srh, locate_shock, srh_residual, ShockCurve};

fn step_down(n: usize, s: f64, t: f64) -> GridField<f64> {
    let dx = 1.0 / n as f64;
    let v = (0..n).map(|i| 0.25 + 0.75 * ((s - i as f64 * dx) / dx).clamp(0.0, 1.0)).collect();
    GridField::new(1.0, v, t).unwrap()
}

#[test]
fn embedded_riemann_fan_is_detected_within_a_cell() {
    // exact entropy solution of the step 1 → 0.25 at 0.4: shock speed 0.625
    let snaps: Vec<_> = (0..20).map(|i| {
        let t = i as f64 * 0.02;
        step_down(256, 0.4 + 0.625 * t, t)
    }).collect();
    let c = detect_shock(&snaps, 0.1).unwrap();
    for (t, s) in c.times.iter().zip(&c.positions) {
        assert!((s - (0.4 + 0.625 * t)).abs() < 1.0 / 256.0);
    }
    assert!(c.u_minus.iter().all(|&u| u == 1.0));
    assert!(c.u_plus.iter().all(|&u| u == 0.25));
}

#[test]
fn shock_wraps_across_the_period() {
    // 1 on [0.5, s) and 0.25 elsewhere, with s just below the period
    let n = 128;
    let dx = 1.0 / n as f64;
    for &s in &[0.9951, 0.9996] {
        let v = (0..n)
            .map(|i| {
                let a = i as f64 * dx;
                let covered = ((s - a).min(dx) - (0.5 - a).max(0.0)).clamp(0.0, dx) / dx;
                0.25 + 0.75 * covered
            })
            .collect();
        let p = locate_shock(&GridField::new(1.0, v, 0.0).unwrap(), 0.1).unwrap();
        assert!(p.position >= 0.0 && p.position < 1.0);
        assert!((p.position - s).abs() < 1e-12, "{} vs {s}", p.position);
    }
    let mut c = ShockCurve::new(Some(1.0));
    for (i, s) in [0.98, 0.995, 1.01, 1.03].iter().enumerate() {
        c.push(burgers_core::shocks::ShockPoint { t: i as f64, position: *s, u_minus: 1.0, u_plus: 0.0 });
    }
    let u = c.unwrapped();
    assert!(u.windows(2).all(|w| w[1] > w[0]));
    assert!((u[3] - 1.03).abs() < 1e-12);
}

#[test]
fn equal_states_give_a_noise_driven_contact() {
    // u₋ = u₊ = c: ds = c dt + Σ ξ ∘ dW
    let basis = NoiseBasis::new(vec![NoiseMode::linear(0.0, 0.3), NoiseMode::linear(0.0, -0.2)], Domain::torus(1.0));
    let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
    let path = sample_path(5, 2, grid, 2);
    let c: ShockCurve<f64> = integrate_srh(0.1, |_, _| Ok((0.4, 0.4)), &basis, &path, Some(1.0)).unwrap();
    let (w0, w1): (Vec<f64>, Vec<f64>) = (path.cumulative(0), path.cumulative(1));
    let u = c.unwrapped();
    for i in 0..c.len() {
        let exact = 0.1 + 0.4 * c.times[i] + 0.3 * w0[i] - 0.2 * w1[i];
        assert!((u[i] - exact).abs() < 1e-12);
    }
}

#[test]
fn shifted_riemann_under_constant_noise_follows_the_curve() {
    let run = FieldRun {
        n: 512,
        length: 1.0,
        profile: InitialProfile::riemann(1.0, 0.0, 0.3, Some(1.0)),
        basis: NoiseBasis::new(vec![NoiseMode::linear(0.0, 0.5)], Domain::torus(1.0)),
        model: FieldModel::default(),
        grid: TimeGrid::with_step(0.3, 5e-4).unwrap(),
        master_seed: 21,
    };
    let dx = 1.0 / 512.0;
    for p in 0..3 {
        let tr = shock_track(&run, p, 0.3, (1.0, 0.0), 0.25).unwrap();
        assert!(tr.residual < dx, "path {p}: {}", tr.residual);
        assert!(tr.stripped_error < dx, "path {p}: {}", tr.stripped_error);
    }
}

#[test]
fn residual_is_symmetric_on_shared_grids() {
    let basis = NoiseBasis::new(vec![NoiseMode::linear(0.0, 0.5)], Domain::torus(1.0));
    let grid = TimeGrid::new(0.0, 0.5, 100).unwrap();
    let a: ShockCurve<f64> = integrate_srh(0.2, |_, _| Ok((1.0, 0.0)), &basis, &sample_path(1, 0, grid, 1), Some(1.0)).unwrap();
    let b: ShockCurve<f64> = integrate_srh(0.2, |_, _| Ok((1.0, 0.0)), &basis, &sample_path(1, 1, grid, 1), Some(1.0)).unwrap();
    assert!((srh_residual(&a, &b).unwrap() - srh_residual(&b, &a).unwrap()).abs() < 1e-12);
}
