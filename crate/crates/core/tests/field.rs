use std::f64::consts::TAU;

use burgers_core::characteristics::InitialProfile;
use burgers_core::field::{self, step, transport_substep, FieldModel, GridField, Interpolation};
use burgers_core::mclab::FieldRun;
use burgers_core::noise::{Domain, NoiseBasis, NoiseMode};
use burgers_core::paths::{sample_path, TimeGrid};
use burgers_core::shocks::locate_shock;

fn riemann(n: usize) -> GridField<f64> {
    GridField::from_fn(n, 1.0, |x| if x < 0.5 { 1.0 } else { 0.0 }).unwrap()
}

#[test]
fn riemann_shock_moves_at_half_speed() {
    let mut f = riemann(512);
    let basis = NoiseBasis::empty(Domain::torus(1.0));
    let model = FieldModel::default();
    let dx = f.dx();
    let dt = 5e-4;
    for i in 0..1000 {
        step(&mut f, &basis, &[], dt, &model).unwrap();
        if (i + 1) % 100 == 0 {
            let s = locate_shock(&f, 0.25).unwrap();
            assert!((s.position - (0.5 + f.t / 2.0)).abs() < dx, "t = {}: {}", f.t, s.position);
        }
    }
}

#[test]
fn constant_noise_equals_shifted_deterministic_run() {
    let beta = 0.4;
    let grid = TimeGrid::with_step(0.12, 2e-4).unwrap();
    let make = |basis: NoiseBasis<f64>| FieldRun {
        n: 512,
        length: 1.0,
        profile: InitialProfile::sine(1.0, TAU, 0.0),
        basis,
        model: FieldModel { interpolation: Interpolation::Spectral, ..FieldModel::default() },
        grid,
        master_seed: 3,
    };
    let noisy = make(NoiseBasis::new(vec![NoiseMode::linear(0.0, beta)], Domain::torus(1.0)));
    let det = make(NoiseBasis::empty(Domain::torus(1.0)));
    let (fn_, _) = noisy.run(2, 512, |_, _| Ok(())).unwrap();
    let (fd, _) = det.run(0, 512, |_, _| Ok(())).unwrap();
    let w = *noisy.path(2).cumulative(0).last().unwrap();
    let mut worst = 0.0f64;
    for i in 0..512 {
        let shifted = fd.sample(fn_.x(i) - beta * w).unwrap();
        worst = worst.max((fn_.values[i] - shifted).abs());
    }
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn constant_noise_conserves_mass_to_rounding() {
    let run = FieldRun {
        n: 256,
        length: 1.0,
        profile: InitialProfile::sine(0.8, TAU, 0.3),
        basis: NoiseBasis::new(vec![NoiseMode::linear(0.0, 1.0), NoiseMode::linear(0.0, 0.25)], Domain::torus(1.0)),
        model: FieldModel::default(),
        grid: TimeGrid::with_step(0.5, 1e-3).unwrap(),
        master_seed: 4,
    };
    let (_, d) = run.run(0, 256, |_, _| Ok(())).unwrap();
    assert!(d.mass_drift() < 1e-12, "{}", d.mass_drift());
}

#[test]
fn pre_shock_sine_matches_characteristics() {
    // classical solution u(t, x) = u0(x0) along x = x0 + u0(x0) t; invert by Newton
    let t = 0.12;
    let n = 1024;
    let mut f = GridField::from_fn(n, 1.0, |x| (TAU * x).sin()).unwrap();
    let basis = NoiseBasis::empty(Domain::torus(1.0));
    let steps = 1200;
    for _ in 0..steps {
        step(&mut f, &basis, &[], t / steps as f64, &FieldModel::default()).unwrap();
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        let x = f.x(i);
        let mut x0 = x;
        for _ in 0..50 {
            let g = x0 + (TAU * x0).sin() * t - x;
            x0 -= g / (1.0 + TAU * (TAU * x0).cos() * t);
        }
        worst = worst.max((f.values[i] - (TAU * x0).sin()).abs());
    }
    assert!(worst < 5.0 * f.dx(), "worst {worst}");
}

#[test]
fn sine_norms_blow_up_together() {
    let run = FieldRun {
        n: 512,
        length: 1.0,
        profile: InitialProfile::sine(1.0, TAU, 0.0),
        basis: NoiseBasis::empty(Domain::torus(1.0)),
        model: FieldModel::default(),
        grid: TimeGrid::with_step(0.25, 2e-4).unwrap(),
        master_seed: 0,
    };
    let (_, d) = run.run(0, 512, |_, _| Ok(())).unwrap();
    let t_grad = field::gradient_blowup_time(&d).unwrap();
    let t_star = 1.0 / TAU;
    assert!((t_grad - t_star).abs() / t_star < 0.02, "{t_grad}");
    // H² stays near its initial value early and is much larger once the gradient has blown up
    let h0 = d.h2[0];
    let early = d.index_at(0.5 * t_star).unwrap();
    let late = d.index_at(t_star + 0.02).unwrap();
    assert!(d.h2[early] < 2.0 * h0, "{}", d.h2[early] / h0);
    assert!(d.h2[late] > 50.0 * h0, "{}", d.h2[late] / h0);
    assert!(d.grad_integral.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn strang_split_commutes_with_shift() {
    // transport by a constant speed then Burgers equals Burgers on the shifted field
    let n = 256;
    let base = GridField::from_fn(n, 1.0, |x| 0.5 + 0.3 * (TAU * x).sin()).unwrap();
    let basis = NoiseBasis::new(vec![NoiseMode::linear(0.0, 1.0)], Domain::torus(1.0));
    let dw = 0.0371;
    let dt = 1e-3;
    let model = FieldModel { interpolation: Interpolation::Spectral, ..FieldModel::default() };
    let mut a = base.clone();
    step(&mut a, &basis, &[dw], dt, &model).unwrap();
    let mut b = base.clone();
    field::burgers_substep(&mut b, dt, 0.5).unwrap();
    transport_substep(&mut b, &basis, &[dw], Interpolation::Spectral).unwrap();
    let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 10.0 * dt * dt, "worst {worst}");
}

#[test]
fn viscous_run_respects_max_principle_under_noise() {
    let run = FieldRun {
        n: 128,
        length: 1.0,
        profile: InitialProfile::sine(1.0, TAU, 0.2),
        basis: NoiseBasis::fourier(2, 0.1, Domain::torus(1.0)),
        model: FieldModel::viscous(0.01),
        grid: TimeGrid::with_step(0.5, 2e-3).unwrap(),
        master_seed: 11,
    };
    for p in 0..5 {
        let (_, d) = run.run(p, 128, |_, _| Ok(())).unwrap();
        let r = field::max_principle_monitor(&d, None, 1e-6).unwrap();
        assert!(!r.violated, "path {p}: {r:?}");
    }
}

#[test]
fn zeroth_order_noise_scales_the_solution() {
    // with no transport and ν = 0, b₀ u ∘ dW makes u = e^{−b₀W} u_0 up to the Burgers flow
    let basis = NoiseBasis::new(vec![NoiseMode::linear(0.0, 0.0)], Domain::torus(1.0));
    let mut f = GridField::new(1.0, vec![0.6; 64], 0.0).unwrap();
    let model = FieldModel { zeroth_order: Some(0.5), ..FieldModel::default() };
    let path = sample_path(12, 0, TimeGrid::with_step(1.0, 1e-2).unwrap(), 1);
    let d = field::run(&mut f, &basis, &path, &model, |_, _| Ok(())).unwrap();
    let w: Vec<f64> = path.cumulative(0);
    for (i, s) in d.sup.iter().enumerate() {
        assert!((s - 0.6 * (-0.5 * w[i]).exp()).abs() < 1e-12);
    }
}
