//! Forward rod dynamics under a distributed control, integrated with
//! position Verlet.
//!
//! The semi-discrete system on lumped momenta is
//!
//! ```text
//! r'      = p_r / m
//! theta'  = p_theta / J
//! p_r'    = dtilde(Q n) - zeta v w + w u_F
//! p_theta'= dtilde(m) + (nu x n) ds - zeta omega ds + ds u_C
//! ```
//!
//! where `w` is the length attributed to each node and the controls are
//! force and couple densities. The damping term is applied trapezoidally
//! inside the momentum kick, which keeps the scheme time-symmetric when
//! `zeta = 0` and strictly dissipative otherwise.

use crate::error::{check_len, positive, Result, SolverError};
use crate::ops::dtilde_into;
use crate::rod::{cross, ForwardSlice, RodProperties, RodState, Vec2};

/// Values above this magnitude are treated as a blown-up run.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Piecewise-constant controls: sample `k` acts over `[k dt, (k + 1) dt)`.
///
/// `force` holds `N + 1` node force densities per step [N/m], `couple` holds
/// `N` element couple densities per step [N m/m].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    dt: f64,
    segments: usize,
    steps: usize,
    force: Vec<Vec2>,
    couple: Vec<f64>,
}

impl ControlField {
    pub fn zeros(steps: usize, segments: usize, dt: f64) -> Self {
        Self {
            dt,
            segments,
            steps,
            force: vec![Vec2::zeros(); steps * (segments + 1)],
            couple: vec![0.0; steps * segments],
        }
    }

    /// Builds a field by evaluating `force(t, s)` on nodes and `couple(t, s)`
    /// on element midpoints at the step midpoints.
    pub fn from_fn(
        steps: usize,
        props: &RodProperties,
        dt: f64,
        force: impl Fn(f64, f64) -> Vec2,
        couple: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut field = Self::zeros(steps, props.segments(), dt);
        for k in 0..steps {
            let t = field.time_at(k);
            for (i, f) in field.force_at_mut(k).iter_mut().enumerate() {
                *f = force(t, props.node_s(i));
            }
            for (j, c) in field.couple_at_mut(k).iter_mut().enumerate() {
                *c = couple(t, props.element_s(j));
            }
        }
        field
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Time at which sample `k` is centred.
    pub fn time_at(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }

    pub fn force_at(&self, k: usize) -> &[Vec2] {
        let n = self.segments + 1;
        &self.force[k * n..(k + 1) * n]
    }

    pub fn couple_at(&self, k: usize) -> &[f64] {
        let n = self.segments;
        &self.couple[k * n..(k + 1) * n]
    }

    pub fn force_at_mut(&mut self, k: usize) -> &mut [Vec2] {
        let n = self.segments + 1;
        &mut self.force[k * n..(k + 1) * n]
    }

    pub fn couple_at_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.segments;
        &mut self.couple[k * n..(k + 1) * n]
    }

    pub fn forces(&self) -> &[Vec2] {
        &self.force
    }

    pub fn couples(&self) -> &[f64] {
        &self.couple
    }

    pub fn check_shape(&self, other: &ControlField) -> Result<()> {
        check_len("control steps", other.steps, self.steps)?;
        check_len("control segments", other.segments, self.segments)
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &ControlField, scale: f64) -> Result<ControlField> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.force
            .iter_mut()
            .zip(&other.force)
            .for_each(|(a, b)| *a += b * scale);
        out.couple
            .iter_mut()
            .zip(&other.couple)
            .for_each(|(a, b)| *a += b * scale);
        Ok(out)
    }

    /// Largest absolute entry over time, space and components.
    pub fn max_abs(&self) -> f64 {
        let f = self
            .force
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0, f64::max);
        self.couple.iter().map(|c| c.abs()).fold(f, f64::max)
    }

    /// `sum_k dt [sum_i w_i <a_i, b_i> + sum_j ds a_j b_j]`.
    pub fn inner(&self, other: &ControlField, props: &RodProperties) -> Result<f64> {
        self.check_shape(other)?;
        let mut total = 0.0;
        for k in 0..self.steps {
            total += sample_inner(
                self.force_at(k),
                self.couple_at(k),
                other.force_at(k),
                other.couple_at(k),
                props,
            );
        }
        Ok(total * self.dt)
    }
}

/// Quadrature-weighted inner product of one time sample.
pub(crate) fn sample_inner(
    fa: &[Vec2],
    ca: &[f64],
    fb: &[Vec2],
    cb: &[f64],
    props: &RodProperties,
) -> f64 {
    let force: f64 = fa
        .iter()
        .zip(fb)
        .zip(&props.node_weight)
        .map(|((a, b), w)| w * a.dot(b))
        .sum();
    let couple: f64 = ca.iter().zip(cb).map(|(a, b)| a * b).sum();
    force + couple * props.ds
}

/// Stored rod states at every macro step `t_k = k dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<RodState>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial(&self) -> &RodState {
        &self.states[0]
    }

    pub fn last(&self) -> &RodState {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Configuration at `t_k + dt / 2`, exactly as seen by the kick of step `k`.
    pub fn half_step_configuration(
        &self,
        k: usize,
        props: &RodProperties,
    ) -> (Vec<Vec2>, Vec<f64>) {
        let mut r = Vec::new();
        let mut theta = Vec::new();
        half_drift_into(&self.states[k], props, 0.5 * self.dt, &mut r, &mut theta);
        (r, theta)
    }
}

pub(crate) fn half_drift_into(
    state: &RodState,
    props: &RodProperties,
    half_dt: f64,
    r: &mut Vec<Vec2>,
    theta: &mut Vec<f64>,
) {
    r.clear();
    r.extend(
        state
            .r
            .iter()
            .zip(&state.p_r)
            .zip(&props.node_mass)
            .map(|((r, p), m)| r + p * (half_dt / m)),
    );
    theta.clear();
    theta.extend(
        state
            .theta
            .iter()
            .zip(&state.p_theta)
            .zip(&props.element_inertia)
            .map(|((t, p), j)| t + p * half_dt / j),
    );
    if props.clamped() {
        r[0] = state.r[0];
        theta[0] = state.theta[0];
    }
}

/// Internal elastic forces `-dV/dq` at the configuration held in `slice`.
pub(crate) fn elastic_forces(
    slice: &ForwardSlice,
    props: &RodProperties,
    f_r: &mut [Vec2],
    f_theta: &mut [f64],
) {
    dtilde_into(&slice.qn, f_r);
    dtilde_into(&slice.m, &mut f_theta[..]);
    for (j, f) in f_theta.iter_mut().enumerate() {
        *f += cross(slice.nu[j], slice.n[j]) * props.ds;
    }
}

fn check_control_slice(props: &RodProperties, force: &[Vec2], couple: &[f64]) -> Result<()> {
    check_len("control force", force.len(), props.nodes())?;
    check_len("control couple", couple.len(), props.segments())
}

/// Momentum rates of the rod at `state` under one control sample.
pub fn forward_rhs(
    state: &RodState,
    force: &[Vec2],
    couple: &[f64],
    props: &RodProperties,
) -> Result<(Vec<Vec2>, Vec<f64>)> {
    state.validate(props.segments())?;
    check_control_slice(props, force, couple)?;
    let n = props.segments();
    let mut slice = ForwardSlice::new(n);
    slice.update(&state.r, &state.theta, props);
    let mut dp_r = vec![Vec2::zeros(); n + 1];
    let mut dp_theta = vec![0.0; n];
    elastic_forces(&slice, props, &mut dp_r, &mut dp_theta);
    for i in 0..=n {
        dp_r[i] += force[i] * props.node_weight[i] - state.p_r[i] * props.node_damping_rate(i);
    }
    for j in 0..n {
        dp_theta[j] += couple[j] * props.ds - state.p_theta[j] * props.element_damping_rate(j);
    }
    if props.clamped() {
        dp_r[0] = Vec2::zeros();
        dp_theta[0] = 0.0;
    }
    let finite = dp_r.iter().all(|v| v.x.is_finite() && v.y.is_finite())
        && dp_theta.iter().all(|v| v.is_finite());
    if !finite {
        return Err(SolverError::Blowup {
            sweep: "forward",
            step: 0,
        });
    }
    Ok((dp_r, dp_theta))
}

/// Reusable buffers for stepping one rod.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    slice: ForwardSlice,
    f_r: Vec<Vec2>,
    f_theta: Vec<f64>,
    r_half: Vec<Vec2>,
    theta_half: Vec<f64>,
}

impl Stepper {
    pub fn new(segments: usize) -> Self {
        Self {
            slice: ForwardSlice::new(segments),
            f_r: vec![Vec2::zeros(); segments + 1],
            f_theta: vec![0.0; segments],
            r_half: Vec::with_capacity(segments + 1),
            theta_half: Vec::with_capacity(segments),
        }
    }

    /// Advances `state` by one position-Verlet step.
    pub fn step(
        &mut self,
        state: &RodState,
        force: &[Vec2],
        couple: &[f64],
        props: &RodProperties,
        dt: f64,
    ) -> RodState {
        let half = 0.5 * dt;
        half_drift_into(state, props, half, &mut self.r_half, &mut self.theta_half);
        self.slice.update(&self.r_half, &self.theta_half, props);
        elastic_forces(&self.slice, props, &mut self.f_r, &mut self.f_theta);

        let first = usize::from(props.clamped());
        let mut next = state.clone();
        for i in first..props.nodes() {
            let a = half * props.node_damping_rate(i);
            let impulse = (self.f_r[i] + force[i] * props.node_weight[i]) * dt;
            let p = (state.p_r[i] * (1.0 - a) + impulse) / (1.0 + a);
            next.p_r[i] = p;
            next.r[i] = self.r_half[i] + p * (half / props.node_mass[i]);
        }
        for j in first..props.segments() {
            let a = half * props.element_damping_rate(j);
            let impulse = (self.f_theta[j] + couple[j] * props.ds) * dt;
            let p = (state.p_theta[j] * (1.0 - a) + impulse) / (1.0 + a);
            next.p_theta[j] = p;
            next.theta[j] = self.theta_half[j] + p * half / props.element_inertia[j];
        }
        if props.clamped() {
            next.p_r[0] = Vec2::zeros();
            next.p_theta[0] = 0.0;
        }
        next
    }
}

/// One position-Verlet step: half drift, full kick at the half-step
/// configuration, half drift.
pub fn verlet_step(
    state: &RodState,
    force: &[Vec2],
    couple: &[f64],
    props: &RodProperties,
    dt: f64,
) -> Result<RodState> {
    positive("dt", dt)?;
    state.validate(props.segments())?;
    check_control_slice(props, force, couple)?;
    let next = Stepper::new(props.segments()).step(state, force, couple, props, dt);
    if !next.is_finite() || next.max_abs() > BLOWUP_LIMIT {
        return Err(SolverError::Blowup {
            sweep: "forward",
            step: 0,
        });
    }
    Ok(next)
}

/// Integrates from `initial` over the whole control horizon.
pub fn simulate_forward(
    initial: &RodState,
    control: &ControlField,
    props: &RodProperties,
) -> Result<Trajectory> {
    initial.validate(props.segments())?;
    check_len("control segments", control.segments(), props.segments())?;
    positive("dt", control.dt())?;
    let mut stepper = Stepper::new(props.segments());
    let mut states = Vec::with_capacity(control.steps() + 1);
    states.push(initial.clone());
    for k in 0..control.steps() {
        let next = stepper.step(
            &states[k],
            control.force_at(k),
            control.couple_at(k),
            props,
            control.dt(),
        );
        if !next.is_finite() || next.max_abs() > BLOWUP_LIMIT {
            return Err(SolverError::Blowup {
                sweep: "forward",
                step: k,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        dt: control.dt(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{energies, BaseBoundary, RodParameters};
    use approx::assert_relative_eq;

    fn props(n: usize) -> RodProperties {
        RodProperties::new(RodParameters {
            segments: n,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn rest_state_has_zero_rates() {
        let p = props(20);
        let s = RodState::straight(&p);
        let (dr, dt) = forward_rhs(&s, &vec![Vec2::zeros(); 21], &[0.0; 20], &p).unwrap();
        assert!(dr.iter().all(|v| v.norm() < 1e-12));
        assert!(dt.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn tip_control_enters_additively() {
        let p = props(20);
        let s = RodState::straight(&p);
        let mut force = vec![Vec2::zeros(); 21];
        force[20] = Vec2::new(0.0, 3.0);
        let (dr, _) = forward_rhs(&s, &force, &[0.0; 20], &p).unwrap();
        for (i, v) in dr.iter().enumerate() {
            if i == 20 {
                assert_relative_eq!(v.y, 3.0 * p.node_weight[20], max_relative = 1e-12);
                assert!(v.x.abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bent_element_restores_toward_rest_curvature() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        // rotate the director of element 5 alone: curvature jumps on both sides
        s.theta[5] = 1e-3;
        let (_, dtheta) = forward_rhs(&s, &[Vec2::zeros(); 11], &[0.0; 10], &p).unwrap();
        assert!(dtheta[5] < 0.0, "restoring couple must oppose the rotation");
        // linearisation: bending -(B4 + B5)/ds * dtheta, shear -GA ds * dtheta
        let expected = -(p.bend[4] + p.bend[5]) / p.ds * 1e-3 - p.stiffness[5].y * p.ds * 1e-3;
        assert_relative_eq!(dtheta[5], expected, max_relative = 1e-3);
        assert!(dtheta[4] > 0.0 && dtheta[6] > 0.0);
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let p = props(10);
        let s = RodState::straight(&p);
        let next = verlet_step(&s, &[Vec2::zeros(); 11], &[0.0; 10], &p, 1e-5).unwrap();
        for (a, b) in next.r.iter().zip(&s.r) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn free_translation_drifts_exactly() {
        let p = RodProperties::new(RodParameters {
            segments: 8,
            damping: 0.0,
            boundary: BaseBoundary::Free,
            ..Default::default()
        })
        .unwrap();
        let mut s = RodState::straight(&p);
        let v = Vec2::new(0.3, -0.1);
        for (pr, m) in s.p_r.iter_mut().zip(&p.node_mass) {
            *pr = v * *m;
        }
        let dt = 1e-4;
        let next = verlet_step(&s, &[Vec2::zeros(); 9], &[0.0; 8], &p, dt).unwrap();
        for i in 0..9 {
            let expected = s.r[i] + s.p_r[i] / p.node_mass[i] * dt;
            assert!((next.r[i] - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_control_rest_start_stays_put() {
        let p = props(10);
        let s = RodState::straight(&p);
        let traj = simulate_forward(&s, &ControlField::zeros(200, 10, 1e-5), &p).unwrap();
        assert_eq!(traj.states.len(), 201);
        assert_eq!(traj.states[0], s);
        for st in &traj.states {
            for (a, b) in st.r.iter().zip(&s.r) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn damped_motion_loses_energy() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        for (j, t) in s.theta.iter_mut().enumerate().skip(1) {
            *t = 0.02 * j as f64;
        }
        let traj = simulate_forward(&s, &ControlField::zeros(500, 10, 1e-5), &p).unwrap();
        let h0 = energies(&traj.states[0], &p).unwrap().total;
        let h1 = energies(traj.last(), &p).unwrap().total;
        assert!(h1 < h0);
    }

    #[test]
    fn blowup_is_reported_with_step() {
        let p = props(4);
        let s = RodState::straight(&p);
        let mut control = ControlField::zeros(50, 4, 1e-2);
        control.force_at_mut(3)[4] = Vec2::new(1e20, 0.0);
        match simulate_forward(&s, &control, &p) {
            Err(SolverError::Blowup { step, .. }) => assert_eq!(step, 3),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn control_inner_product_weights() {
        let p = props(4);
        let a = ControlField::from_fn(3, &p, 0.1, |_, _| Vec2::new(1.0, 0.0), |_, _| 2.0);
        let ip = a.inner(&a, &p).unwrap();
        // sum of node weights is L0, couples weigh ds each
        let expected = 3.0 * 0.1 * (0.2 + 4.0 * 4.0 * p.ds);
        assert_relative_eq!(ip, expected, max_relative = 1e-12);
    }
}
