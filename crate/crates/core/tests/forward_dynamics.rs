use cosserat_ocp::experiments::{initial_bent_state, Case, ExperimentConfig, Profile};
use cosserat_ocp::{
    energies, simulate_forward, ControlField, RodParameters, RodProperties, RodState, Vec2,
};

fn rod(segments: usize, damping: f64) -> RodProperties {
    RodProperties::new(RodParameters {
        segments,
        damping,
        ..Default::default()
    })
    .unwrap()
}

fn bent(props: &RodProperties) -> RodState {
    initial_bent_state(
        &ExperimentConfig::preset(Case::Shoot, Profile::Fine).bumps,
        props,
    )
}

fn energy_history(props: &RodProperties, initial: &RodState, steps: usize) -> Vec<f64> {
    let u = ControlField::zeros(steps, props.segments(), 1e-5);
    simulate_forward(initial, &u, props)
        .unwrap()
        .states
        .iter()
        .map(|s| energies(s, props).unwrap().total)
        .collect()
}

#[test]
fn conservative_core_keeps_energy() {
    let p = rod(100, 0.0);
    let h = energy_history(&p, &bent(&p), 10_000);
    let drift = h.iter().map(|e| (e - h[0]).abs()).fold(0.0, f64::max) / h[0];
    println!("max relative energy deviation {drift:.3e}");
    assert!(drift < 1e-3);
}

#[test]
fn damped_energy_never_increases() {
    let p = rod(100, 0.01);
    let h = energy_history(&p, &bent(&p), 10_000);
    let worst = h
        .windows(2)
        .map(|w| (w[1] - w[0]) / h[0])
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "largest relative per-step increase {worst:.3e}, final/initial {:.4}",
        h[h.len() - 1] / h[0]
    );
    assert!(worst <= 1e-12);
}

#[test]
fn straight_rod_stays_at_rest() {
    let p = rod(50, 0.01);
    let s = RodState::straight(&p);
    let u = ControlField::zeros(10_000, 50, 1e-5);
    let traj = simulate_forward(&s, &u, &p).unwrap();
    let moved = traj
        .states
        .iter()
        .flat_map(|t| t.r.iter().zip(&s.r).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    assert!(moved < 1e-10, "{moved}");
}

#[test]
fn conservative_core_is_time_reversible() {
    let p = rod(50, 0.0);
    let start = bent(&p);
    let u = ControlField::zeros(1000, 50, 1e-5);
    let mut end = simulate_forward(&start, &u, &p).unwrap().last().clone();
    end.p_r.iter_mut().for_each(|v| *v = -*v);
    end.p_theta.iter_mut().for_each(|v| *v = -*v);
    let back = simulate_forward(&end, &u, &p).unwrap().last().clone();
    let scale = start.r.iter().map(|r| r.norm()).fold(0.0, f64::max);
    for (a, b) in back.r.iter().zip(&start.r) {
        assert!((a - b).norm() < 1e-8 * scale, "{a:?} vs {b:?}");
    }
    for (a, b) in back.theta.iter().zip(&start.theta) {
        assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
    }
}

#[test]
fn uniform_drift_is_exact() {
    let p = RodProperties::new(RodParameters {
        segments: 10,
        damping: 0.0,
        boundary: cosserat_ocp::BaseBoundary::Free,
        ..Default::default()
    })
    .unwrap();
    let v = Vec2::new(0.3, -0.2);
    let mut s = RodState::straight(&p);
    for (pr, m) in s.p_r.iter_mut().zip(&p.node_mass) {
        *pr = v * *m;
    }
    let u = ControlField::zeros(100, 10, 1e-4);
    let end = simulate_forward(&s, &u, &p).unwrap().last().clone();
    for (a, b) in end.r.iter().zip(&s.r) {
        assert!((a - b - v * 1e-2).norm() < 1e-14);
    }
}

#[test]
fn trajectory_has_every_step() {
    let p = rod(10, 0.01);
    let s = bent(&p);
    let u = ControlField::zeros(37, 10, 1e-5);
    let traj = simulate_forward(&s, &u, &p).unwrap();
    assert_eq!(traj.states.len(), 38);
    assert_eq!(traj.states[0], s);
}
