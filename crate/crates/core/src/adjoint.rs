//! Costate dynamics integrated backward along a stored forward trajectory.
//!
//! With the normal-extremal normalisation, the costate `(mu, gamma)` dual to
//! `(q, p)` obeys
//!
//! ```text
//! w mu_r'      = -dtilde(Q S Q^T dbar(gamma_r) / ds) - dtilde(Q (M2 n - S M2 nu) gamma_theta)
//!                - chi1 dtilde(Q n)
//! ds mu_theta' = -dtilde(B dbar(gamma_theta) / ds) + [Q (M2 n - S M2 nu)] . dbar(gamma_r)
//!                + [(M2 nu) x n + nu x (S M2 nu)] gamma_theta ds
//!                - chi1 (dtilde(m) + (nu x n) ds)
//! gamma_r'     = -(mu_r - zeta gamma_r) / (rho A)
//! gamma_theta' = -(mu_theta - zeta gamma_theta) / (rho I)
//! ```
//!
//! `mu` is a line density (per unit length, `w` the node quadrature weight)
//! and `gamma` is dual to the lumped momenta, so it is directly comparable
//! with the control densities.
//!
//! The backward integrator is the exact transpose of the forward
//! position-Verlet step, so the control gradient it produces is the gradient
//! of the discrete cost to round-off.

use crate::error::{check_len, positive, Result, SolverError};
use crate::forward::{elastic_forces, half_drift_into, ControlField, Trajectory, BLOWUP_LIMIT};
use crate::ops::{diff_into, dtilde_into};
use crate::rod::{cross, perp, rotate, rotate_back, ForwardSlice, RodProperties, RodState, Vec2};

/// Costate fields at one instant, sized like [`RodState`].
///
/// `mu_r` and `mu_theta` are per unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateState {
    pub mu_r: Vec<Vec2>,
    pub mu_theta: Vec<f64>,
    pub gamma_r: Vec<Vec2>,
    pub gamma_theta: Vec<f64>,
}

impl CostateState {
    pub fn zeros(segments: usize) -> Self {
        Self {
            mu_r: vec![Vec2::zeros(); segments + 1],
            mu_theta: vec![0.0; segments],
            gamma_r: vec![Vec2::zeros(); segments + 1],
            gamma_theta: vec![0.0; segments],
        }
    }

    pub fn validate(&self, segments: usize) -> Result<()> {
        check_len("mu_r", self.mu_r.len(), segments + 1)?;
        check_len("mu_theta", self.mu_theta.len(), segments)?;
        check_len("gamma_r", self.gamma_r.len(), segments + 1)?;
        check_len("gamma_theta", self.gamma_theta.len(), segments)
    }

    fn max_abs(&self) -> f64 {
        let v = self
            .mu_r
            .iter()
            .chain(&self.gamma_r)
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0, f64::max);
        self.mu_theta
            .iter()
            .chain(&self.gamma_theta)
            .map(|x| x.abs())
            .fold(v, f64::max)
    }

    fn is_finite(&self) -> bool {
        let v = self
            .mu_r
            .iter()
            .chain(&self.gamma_r)
            .all(|v| v.x.is_finite() && v.y.is_finite());
        v && self
            .mu_theta
            .iter()
            .chain(&self.gamma_theta)
            .all(|x| x.is_finite())
    }

    /// Multiplies `mu` by the node/element lengths (`lumped = true`) or
    /// divides by them.
    fn scale_mu(&mut self, props: &RodProperties, lumped: bool) {
        for (mu, w) in self.mu_r.iter_mut().zip(&props.node_weight) {
            *mu = if lumped { *mu * *w } else { *mu / *w };
        }
        for mu in &mut self.mu_theta {
            *mu = if lumped {
                *mu * props.ds
            } else {
                *mu / props.ds
            };
        }
    }

    fn pin_base(&mut self) {
        self.mu_r[0] = Vec2::zeros();
        self.gamma_r[0] = Vec2::zeros();
        self.mu_theta[0] = 0.0;
        self.gamma_theta[0] = 0.0;
    }
}

/// Time derivatives of every costate field.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateRates {
    pub mu_r: Vec<Vec2>,
    pub mu_theta: Vec<f64>,
    pub gamma_r: Vec<Vec2>,
    pub gamma_theta: Vec<f64>,
}

/// How the point load of the terminal cost is spread onto the tip node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TipDelta {
    /// `mu_r` at the tip is `-chi2 (r_tip - target)` with no length factor.
    /// The discrete terminal cost it is the exact dual of is
    /// `chi2 w_tip |miss|^2 / 2`.
    #[default]
    Kronecker,
    /// `mu_r` at the tip is `-chi2 (r_tip - target) / w_tip`, the dual of
    /// `chi2 |miss|^2 / 2`.
    Consistent,
}

impl TipDelta {
    /// Factor multiplying `chi2 |miss|^2 / 2` in the discrete cost whose
    /// gradient the backward sweep computes.
    pub fn terminal_scale(self, props: &RodProperties) -> f64 {
        match self {
            TipDelta::Kronecker => props.node_weight[props.segments()],
            TipDelta::Consistent => 1.0,
        }
    }
}

/// Transversality for the tip-distance terminal cost: only the tip node's
/// `mu_r` is non-zero, and equals `-chi2 (r_tip - target)`.
pub fn terminal_costate(final_state: &RodState, target: Vec2, chi2: f64) -> CostateState {
    let n = final_state.segments();
    let mut costate = CostateState::zeros(n);
    costate.mu_r[n] = -(final_state.tip() - target) * chi2;
    costate
}

/// [`terminal_costate`] under the given tip-load convention.
pub fn terminal_costate_with(
    final_state: &RodState,
    target: Vec2,
    chi2: f64,
    delta: TipDelta,
    props: &RodProperties,
) -> CostateState {
    let mut costate = terminal_costate(final_state, target, chi2);
    if delta == TipDelta::Consistent {
        let n = props.segments();
        costate.mu_r[n] /= props.node_weight[n];
    }
    costate
}

/// Buffers for the `mu` rates, reused across backward steps.
#[derive(Debug, Clone)]
struct MuRates {
    grad_gamma: Vec<Vec2>,
    flux_r: Vec<Vec2>,
    bend_flux: Vec<f64>,
    coupling: Vec<Vec2>,
    dtilde_r: Vec<Vec2>,
    dtilde_theta: Vec<f64>,
    elastic_r: Vec<Vec2>,
    elastic_theta: Vec<f64>,
    mu_r: Vec<Vec2>,
    mu_theta: Vec<f64>,
}

impl MuRates {
    fn new(n: usize) -> Self {
        Self {
            grad_gamma: vec![Vec2::zeros(); n],
            flux_r: vec![Vec2::zeros(); n],
            bend_flux: vec![0.0; n - 1],
            coupling: vec![Vec2::zeros(); n],
            dtilde_r: vec![Vec2::zeros(); n + 1],
            dtilde_theta: vec![0.0; n],
            elastic_r: vec![Vec2::zeros(); n + 1],
            elastic_theta: vec![0.0; n],
            mu_r: vec![Vec2::zeros(); n + 1],
            mu_theta: vec![0.0; n],
        }
    }

    /// Fills `self.mu_r`, `self.mu_theta` with the `mu` rates for the given
    /// `gamma` at the configuration in `slice`.
    fn compute(
        &mut self,
        gamma_r: &[Vec2],
        gamma_theta: &[f64],
        slice: &ForwardSlice,
        props: &RodProperties,
        chi1: f64,
    ) {
        let n = props.segments();
        let ds = props.ds;
        diff_into(gamma_r, &mut self.grad_gamma);
        for j in 0..n {
            let (c, s) = (slice.cos[j], slice.sin[j]);
            let stiff = props.stiffness[j];
            let nu = slice.nu[j];
            // Q (M2 n - S M2 nu): sensitivity of Q n to the element angle
            let coupling = rotate(c, s, perp(slice.n[j]) - stiff.component_mul(&perp(nu)));
            self.coupling[j] = coupling;
            let material = rotate_back(c, s, self.grad_gamma[j]);
            self.flux_r[j] =
                rotate(c, s, stiff.component_mul(&material)) / ds + coupling * gamma_theta[j];
        }
        for l in 0..n - 1 {
            self.bend_flux[l] = props.bend[l] * (gamma_theta[l + 1] - gamma_theta[l]) / ds;
        }
        dtilde_into(&self.flux_r, &mut self.dtilde_r);
        dtilde_into(&self.bend_flux, &mut self.dtilde_theta);

        if chi1 != 0.0 {
            elastic_forces(slice, props, &mut self.elastic_r, &mut self.elastic_theta);
        } else {
            self.elastic_r.iter_mut().for_each(|v| *v = Vec2::zeros());
            self.elastic_theta.iter_mut().for_each(|v| *v = 0.0);
        }

        for i in 0..=n {
            self.mu_r[i] = -self.dtilde_r[i] - self.elastic_r[i] * chi1;
        }
        for j in 0..n {
            let nu = slice.nu[j];
            let nf = slice.n[j];
            let stiff = props.stiffness[j];
            let self_coupling = cross(perp(nu), nf) + cross(nu, stiff.component_mul(&perp(nu)));
            self.mu_theta[j] = -self.dtilde_theta[j]
                + self.coupling[j].dot(&self.grad_gamma[j])
                + self_coupling * gamma_theta[j] * ds
                - self.elastic_theta[j] * chi1;
        }
        if props.clamped() {
            self.mu_r[0] = Vec2::zeros();
            self.mu_theta[0] = 0.0;
        }
    }
}

/// Costate rates at one instant, given the forward configuration it is
/// paired with.
pub fn adjoint_rhs(
    costate: &CostateState,
    slice: &ForwardSlice,
    props: &RodProperties,
    chi1: f64,
) -> Result<CostateRates> {
    let n = props.segments();
    costate.validate(n)?;
    check_len("forward slice", slice.nu.len(), n)?;
    let mut mu = MuRates::new(n);
    mu.compute(&costate.gamma_r, &costate.gamma_theta, slice, props, chi1);
    for (rate, w) in mu.mu_r.iter_mut().zip(&props.node_weight) {
        *rate /= *w;
    }
    mu.mu_theta.iter_mut().for_each(|rate| *rate /= props.ds);
    // rho A and rho I of the lumped model: mass per unit length
    let mut gamma_r: Vec<Vec2> = (0..=n)
        .map(|i| {
            let line_mass = props.node_mass[i] / props.node_weight[i];
            -(costate.mu_r[i] - costate.gamma_r[i] * props.params.damping) / line_mass
        })
        .collect();
    let mut gamma_theta: Vec<f64> = (0..n)
        .map(|j| {
            let line_inertia = props.element_inertia[j] / props.ds;
            -(costate.mu_theta[j] - costate.gamma_theta[j] * props.params.damping) / line_inertia
        })
        .collect();
    if props.clamped() {
        gamma_r[0] = Vec2::zeros();
        gamma_theta[0] = 0.0;
    }
    let rates = CostateRates {
        mu_r: mu.mu_r,
        mu_theta: mu.mu_theta,
        gamma_r,
        gamma_theta,
    };
    let finite = rates
        .mu_r
        .iter()
        .chain(&rates.gamma_r)
        .all(|v| v.x.is_finite() && v.y.is_finite())
        && rates
            .mu_theta
            .iter()
            .chain(&rates.gamma_theta)
            .all(|v| v.is_finite());
    if !finite {
        return Err(SolverError::Blowup {
            sweep: "backward",
            step: 0,
        });
    }
    Ok(rates)
}

/// Result of one backward sweep.
#[derive(Debug, Clone)]
pub struct AdjointSweep {
    /// Costates at every macro step, index-aligned with the trajectory.
    /// Empty when the sweep was run without storing them.
    pub costates: Vec<CostateState>,
    /// `gamma` seen by the momentum kick of each step; the pointwise
    /// maximiser of the pre-Hamiltonian for the matching control sample.
    pub kick_gamma: ControlField,
}

/// Weights and target of the tracking problem, as seen by the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointParams {
    pub chi1: f64,
    pub chi2: f64,
    pub target: Vec2,
    pub tip_delta: TipDelta,
}

/// Runs the costate from `t = T` back to `t = 0` with the transposed
/// position-Verlet scheme.
pub fn simulate_backward(
    trajectory: &Trajectory,
    control: &ControlField,
    props: &RodProperties,
    params: AdjointParams,
) -> Result<AdjointSweep> {
    backward_sweep(trajectory, control, props, params, true)
}

pub(crate) fn backward_sweep(
    trajectory: &Trajectory,
    control: &ControlField,
    props: &RodProperties,
    params: AdjointParams,
    keep_costates: bool,
) -> Result<AdjointSweep> {
    let n = props.segments();
    let steps = trajectory.steps();
    check_len("control steps", control.steps(), steps)?;
    check_len("control segments", control.segments(), n)?;
    positive("dt", trajectory.dt)?;
    let dt = trajectory.dt;
    let half = 0.5 * dt;

    let mut costate = terminal_costate_with(
        trajectory.last(),
        params.target,
        params.chi2,
        params.tip_delta,
        props,
    );
    if props.clamped() {
        costate.pin_base();
    }
    let mut kick_gamma = ControlField::zeros(steps, n, dt);
    let mut costates = Vec::new();
    if keep_costates {
        costates.reserve(steps + 1);
        costates.push(costate.clone());
    }
    // the sweep itself runs on the duals of the lumped positions
    costate.scale_mu(props, true);

    let mut slice = ForwardSlice::new(n);
    let mut mu = MuRates::new(n);
    let mut r_half = Vec::with_capacity(n + 1);
    let mut theta_half = Vec::with_capacity(n);
    let first = usize::from(props.clamped());

    for k in (0..steps).rev() {
        // transpose of the second half drift
        for i in first..=n {
            costate.gamma_r[i] += costate.mu_r[i] * (half / props.node_mass[i]);
        }
        for j in first..n {
            costate.gamma_theta[j] += costate.mu_theta[j] * half / props.element_inertia[j];
        }
        // transpose of the damped kick
        for i in first..=n {
            costate.gamma_r[i] /= 1.0 + half * props.node_damping_rate(i);
        }
        for j in first..n {
            costate.gamma_theta[j] /= 1.0 + half * props.element_damping_rate(j);
        }
        kick_gamma.force_at_mut(k).copy_from_slice(&costate.gamma_r);
        kick_gamma
            .couple_at_mut(k)
            .copy_from_slice(&costate.gamma_theta);

        half_drift_into(
            &trajectory.states[k],
            props,
            half,
            &mut r_half,
            &mut theta_half,
        );
        slice.update(&r_half, &theta_half, props);
        mu.compute(
            &costate.gamma_r,
            &costate.gamma_theta,
            &slice,
            props,
            params.chi1,
        );
        for i in first..=n {
            costate.mu_r[i] -= mu.mu_r[i] * dt;
            costate.gamma_r[i] *= 1.0 - half * props.node_damping_rate(i);
        }
        for j in first..n {
            costate.mu_theta[j] -= mu.mu_theta[j] * dt;
            costate.gamma_theta[j] *= 1.0 - half * props.element_damping_rate(j);
        }
        // transpose of the first half drift
        for i in first..=n {
            costate.gamma_r[i] += costate.mu_r[i] * (half / props.node_mass[i]);
        }
        for j in first..n {
            costate.gamma_theta[j] += costate.mu_theta[j] * half / props.element_inertia[j];
        }

        if !costate.is_finite() || costate.max_abs() > BLOWUP_LIMIT {
            return Err(SolverError::Blowup {
                sweep: "backward",
                step: k,
            });
        }
        if keep_costates {
            let mut stored = costate.clone();
            stored.scale_mu(props, false);
            costates.push(stored);
        }
    }
    costates.reverse();
    Ok(AdjointSweep {
        costates,
        kick_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::simulate_forward;
    use crate::rod::RodParameters;
    use approx::assert_relative_eq;

    fn props(n: usize) -> RodProperties {
        RodProperties::new(RodParameters {
            segments: n,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn terminal_costate_on_target_is_zero() {
        let p = props(10);
        let s = RodState::straight(&p);
        let c = terminal_costate(&s, s.tip(), 2e4);
        assert_eq!(c, CostateState::zeros(10));
    }

    #[test]
    fn terminal_costate_miss() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        s.r[10] = Vec2::new(0.10, 0.10);
        let c = terminal_costate(&s, Vec2::new(0.09, 0.09), 2e4);
        assert_relative_eq!(c.mu_r[10].x, -200.0, max_relative = 1e-12);
        assert_relative_eq!(c.mu_r[10].y, -200.0, max_relative = 1e-12);
        assert!(c.mu_r[..10].iter().all(|v| *v == Vec2::zeros()));
        assert!(c.gamma_r.iter().all(|v| *v == Vec2::zeros()));
        assert!(c.mu_theta.iter().chain(&c.gamma_theta).all(|v| *v == 0.0));

        let c = terminal_costate(&s, Vec2::new(0.09, 0.09), 0.0);
        assert!(c.mu_r.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn consistent_delta_divides_by_tip_weight() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        s.r[10] = Vec2::new(0.10, 0.10);
        let target = Vec2::new(0.09, 0.09);
        let k = terminal_costate_with(&s, target, 2e4, TipDelta::Kronecker, &p);
        assert_eq!(k, terminal_costate(&s, target, 2e4));
        let c = terminal_costate_with(&s, target, 2e4, TipDelta::Consistent, &p);
        assert_relative_eq!(
            c.mu_r[10].x * p.node_weight[10],
            -200.0,
            max_relative = 1e-12
        );
        assert_eq!(TipDelta::Kronecker.terminal_scale(&p), p.ds / 2.0);
        assert_eq!(TipDelta::Consistent.terminal_scale(&p), 1.0);
    }

    #[test]
    fn gamma_rates_use_line_density() {
        let p = props(10);
        let s = RodState::straight(&p);
        let mut slice = ForwardSlice::new(10);
        slice.update(&s.r, &s.theta, &p);
        let mut c = CostateState::zeros(10);
        c.mu_r[5] = Vec2::new(1.0, -2.0);
        c.gamma_r[5] = Vec2::new(0.5, 0.0);
        c.mu_theta[3] = 0.25;
        let rates = adjoint_rhs(&c, &slice, &p, 0.0).unwrap();
        let rho = p.params.density;
        let zeta = p.params.damping;
        let rho_a = rho * 0.5 * (p.area[4] + p.area[5]);
        let expect = -(c.mu_r[5] - c.gamma_r[5] * zeta) / rho_a;
        assert_relative_eq!(rates.gamma_r[5].x, expect.x, max_relative = 1e-12);
        assert_relative_eq!(rates.gamma_r[5].y, expect.y, max_relative = 1e-12);
        let expect = -0.25 / (rho * p.inertia[3]);
        assert_relative_eq!(rates.gamma_theta[3], expect, max_relative = 1e-12);
    }

    #[test]
    fn zero_costate_without_chi1_has_zero_rates() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        s.theta
            .iter_mut()
            .enumerate()
            .for_each(|(j, t)| *t = 0.1 * j as f64);
        let mut slice = ForwardSlice::new(10);
        slice.update(&s.r, &s.theta, &p);
        let rates = adjoint_rhs(&CostateState::zeros(10), &slice, &p, 0.0).unwrap();
        assert!(rates.mu_r.iter().all(|v| v.norm() == 0.0));
        assert!(rates.mu_theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn chi1_forcing_is_isolated() {
        let p = props(10);
        let mut s = RodState::straight(&p);
        s.theta
            .iter_mut()
            .enumerate()
            .for_each(|(j, t)| *t = 0.1 * j as f64);
        let mut slice = ForwardSlice::new(10);
        slice.update(&s.r, &s.theta, &p);
        let chi1 = 3.0;
        let rates = adjoint_rhs(&CostateState::zeros(10), &slice, &p, chi1).unwrap();
        let (f_r, f_t) =
            crate::forward::forward_rhs(&s, &[Vec2::zeros(); 11], &[0.0; 10], &p).unwrap();
        for i in 1..=10 {
            let w = p.node_weight[i];
            assert_relative_eq!(rates.mu_r[i].x, -chi1 * f_r[i].x / w, max_relative = 1e-12);
            assert_relative_eq!(rates.mu_r[i].y, -chi1 * f_r[i].y / w, max_relative = 1e-12);
        }
        for j in 1..10 {
            assert_relative_eq!(
                rates.mu_theta[j],
                -chi1 * f_t[j] / p.ds,
                max_relative = 1e-12
            );
        }
        assert!(rates.gamma_r.iter().all(|v| v.norm() == 0.0));
        assert!(rates.gamma_theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn on_target_without_chi1_stays_zero() {
        let p = props(8);
        let s = RodState::straight(&p);
        let control = ControlField::zeros(100, 8, 1e-5);
        let traj = simulate_forward(&s, &control, &p).unwrap();
        let sweep = simulate_backward(
            &traj,
            &control,
            &p,
            AdjointParams {
                chi1: 0.0,
                chi2: 2e4,
                target: traj.last().tip(),
                tip_delta: TipDelta::Kronecker,
            },
        )
        .unwrap();
        assert_eq!(sweep.costates.len(), 101);
        for c in &sweep.costates {
            assert!(c.mu_r.iter().all(|v| v.norm() == 0.0));
            assert!(c.gamma_r.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn single_small_step_moves_only_the_tip_mu() {
        let p = props(8);
        let s = RodState::straight(&p);
        let dt = 1e-9;
        let control = ControlField::zeros(1, 8, dt);
        let traj = simulate_forward(&s, &control, &p).unwrap();
        let target = Vec2::new(0.1, 0.1);
        let sweep = simulate_backward(
            &traj,
            &control,
            &p,
            AdjointParams {
                chi1: 0.0,
                chi2: 2e4,
                target,
                tip_delta: TipDelta::Kronecker,
            },
        )
        .unwrap();
        let start = &sweep.costates[0];
        let end = &sweep.costates[1];
        assert!(start.gamma_r.iter().all(|g| g.norm() < 1e-2));
        for i in 0..8 {
            assert!((start.mu_r[i] - end.mu_r[i]).norm() < 1e-6);
        }
        assert!((start.mu_r[8] - end.mu_r[8]).norm() < 1e-6 * end.mu_r[8].norm());
    }

    #[test]
    fn sweep_is_linear_in_terminal_miss() {
        let p = props(6);
        let mut s = RodState::straight(&p);
        s.theta
            .iter_mut()
            .enumerate()
            .for_each(|(j, t)| *t = 0.05 * j as f64);
        let control = ControlField::zeros(300, 6, 1e-5);
        let traj = simulate_forward(&s, &control, &p).unwrap();
        let tip = traj.last().tip();
        let run = |chi2: f64| {
            simulate_backward(
                &traj,
                &control,
                &p,
                AdjointParams {
                    chi1: 0.0,
                    chi2,
                    target: tip - Vec2::new(0.02, -0.01),
                    tip_delta: TipDelta::Kronecker,
                },
            )
            .unwrap()
        };
        let one = run(1.0);
        let two = run(2.0);
        for (a, b) in one.costates.iter().zip(&two.costates) {
            for (x, y) in a.gamma_r.iter().zip(&b.gamma_r) {
                assert!((x * 2.0 - y).norm() <= 1e-12 * y.norm().max(1e-300));
            }
            for (x, y) in a.mu_theta.iter().zip(&b.mu_theta) {
                assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
            }
        }
    }
}
