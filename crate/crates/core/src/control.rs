//! Cost functional and the forward-backward iteration.

use log::{debug, warn};
use thiserror::Error;

use crate::adjoint::{backward_sweep, AdjointParams, AdjointSweep, TipDelta};
use crate::error::{positive, Result, SolverError};
use crate::forward::{half_drift_into, sample_inner, simulate_forward, ControlField, Trajectory};
use crate::rod::{ForwardSlice, RodProperties, RodState, Vec2};

/// Learning rate per iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// Rate for iteration `k` (1-based) is `schedule[k - 1]`; the last entry
    /// repeats once the schedule runs out.
    Schedule(Vec<f64>),
}

impl LearningRate {
    pub fn at(&self, iteration: usize) -> f64 {
        match self {
            LearningRate::Constant(eta) => *eta,
            LearningRate::Schedule(etas) => {
                let idx = iteration
                    .saturating_sub(1)
                    .min(etas.len().saturating_sub(1));
                etas.get(idx).copied().unwrap_or(0.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            LearningRate::Constant(eta) => eta.is_finite() && *eta > 0.0,
            LearningRate::Schedule(etas) => {
                !etas.is_empty() && etas.iter().all(|e| e.is_finite() && *e > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidParameter {
                name: "eta",
                reason: "learning rates must be positive".into(),
            })
        }
    }
}

/// Weights of the running and terminal costs, learning rate and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    /// Weight on the stored elastic energy in the running cost.
    pub chi1: f64,
    /// Weight on the terminal tip miss.
    pub chi2: f64,
    pub eta: LearningRate,
    /// Horizon `T` [s].
    pub horizon: f64,
    /// Convention for the tip point load of the terminal cost.
    pub tip_delta: TipDelta,
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi1.is_finite() && self.chi1 >= 0.0) {
            return Err(SolverError::InvalidParameter {
                name: "chi1",
                reason: format!("must be non-negative, got {}", self.chi1),
            });
        }
        if !(self.chi2.is_finite() && self.chi2 >= 0.0) {
            return Err(SolverError::InvalidParameter {
                name: "chi2",
                reason: format!("must be non-negative, got {}", self.chi2),
            });
        }
        self.eta.validate()?;
        positive("horizon", self.horizon)
    }
}

/// Cost split into its running and terminal parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    pub total: f64,
    pub running: f64,
    pub terminal: f64,
}

/// `J = sum_k dt [ |u_k|^2 / 2 + chi1 V(q_(k+1/2)) ] + chi2 |r_tip(T) - target|^2 / 2`.
///
/// The potential is sampled at the half-step configuration used by the
/// momentum kick of step `k`, the same point at which the control acts.
/// [`Problem`] passes `chi2` already multiplied by
/// [`TipDelta::terminal_scale`].
pub fn evaluate_cost(
    trajectory: &Trajectory,
    control: &ControlField,
    props: &RodProperties,
    chi1: f64,
    chi2: f64,
    target: Vec2,
) -> Result<Cost> {
    let steps = trajectory.steps();
    crate::error::check_len("control steps", control.steps(), steps)?;
    let dt = trajectory.dt;
    let mut slice = ForwardSlice::new(props.segments());
    let mut r = Vec::new();
    let mut theta = Vec::new();
    let mut running = 0.0;
    for k in 0..steps {
        let (f, c) = (control.force_at(k), control.couple_at(k));
        let mut sample = 0.5 * sample_inner(f, c, f, c, props);
        if chi1 != 0.0 {
            half_drift_into(&trajectory.states[k], props, 0.5 * dt, &mut r, &mut theta);
            slice.update(&r, &theta, props);
            sample += chi1 * slice.potential(props);
        }
        running += sample * dt;
    }
    let miss = trajectory.last().tip() - target;
    let terminal = 0.5 * chi2 * miss.norm_squared();
    Ok(Cost {
        total: running + terminal,
        running,
        terminal,
    })
}

/// Ascent direction of the pre-Hamiltonian, `gamma - u`, sample by sample.
///
/// In the quadrature-weighted inner product of [`ControlField::inner`] this is
/// minus the gradient of the discrete cost.
pub fn control_gradient(sweep: &AdjointSweep, control: &ControlField) -> Result<ControlField> {
    sweep.kick_gamma.add_scaled(control, -1.0)
}

/// `u + eta (gamma - u)`.
pub fn update_control(
    control: &ControlField,
    gradient: &ControlField,
    eta: f64,
) -> Result<ControlField> {
    positive("eta", eta)?;
    control.add_scaled(gradient, eta)
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub running: f64,
    pub terminal: f64,
    /// Max-abs change between this control and the next one.
    pub control_change: f64,
    pub tip_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveLog {
    pub records: Vec<IterationRecord>,
    /// Set when the cost failed to decrease for five consecutive iterations.
    pub learning_rate_warning: bool,
}

impl SolveLog {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    /// Control of the last iteration performed.
    pub control: ControlField,
    /// Trajectory driven by `control`.
    pub trajectory: Trajectory,
    /// Control after the final update; what the next iteration would use.
    pub next_control: ControlField,
    pub log: SolveLog,
}

/// A solve that stopped on an error, with everything logged up to it.
#[derive(Debug, Error)]
#[error("solve aborted at iteration {iteration}: {source}")]
pub struct SolveFailure {
    pub iteration: usize,
    #[source]
    pub source: SolverError,
    pub log: SolveLog,
}

impl From<SolveFailure> for SolverError {
    fn from(f: SolveFailure) -> Self {
        SolverError::Aborted {
            iteration: f.iteration,
            source: Box::new(f.source),
        }
    }
}

/// Problem definition shared by every iteration of [`solve`].
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub initial: &'a RodState,
    pub props: &'a RodProperties,
    pub weights: &'a CostWeights,
    pub target: Vec2,
    pub dt: f64,
}

impl Problem<'_> {
    pub fn steps(&self) -> usize {
        (self.weights.horizon / self.dt).round() as usize
    }

    /// Weight on `|miss|^2 / 2` in the discrete cost.
    pub fn terminal_weight(&self) -> f64 {
        self.weights.chi2 * self.weights.tip_delta.terminal_scale(self.props)
    }

    fn adjoint(&self) -> AdjointParams {
        AdjointParams {
            chi1: self.weights.chi1,
            chi2: self.weights.chi2,
            target: self.target,
            tip_delta: self.weights.tip_delta,
        }
    }

    /// Forward sweep and cost for `control`.
    pub fn evaluate(&self, control: &ControlField) -> Result<(Trajectory, Cost)> {
        let trajectory = simulate_forward(self.initial, control, self.props)?;
        let cost = evaluate_cost(
            &trajectory,
            control,
            self.props,
            self.weights.chi1,
            self.terminal_weight(),
            self.target,
        )?;
        Ok((trajectory, cost))
    }

    /// Cost and ascent direction `gamma - u` at `control`.
    pub fn gradient(&self, control: &ControlField) -> Result<(Trajectory, Cost, ControlField)> {
        let (trajectory, cost) = self.evaluate(control)?;
        let sweep = backward_sweep(&trajectory, control, self.props, self.adjoint(), false)?;
        let direction = control_gradient(&sweep, control)?;
        Ok((trajectory, cost, direction))
    }

    fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        positive("dt", self.dt)?;
        self.initial.validate(self.props.segments())?;
        let steps = self.weights.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) || steps.round() < 1.0 {
            return Err(SolverError::InvalidParameter {
                name: "dt",
                reason: format!(
                    "horizon {} s is not a whole number of {} s steps",
                    self.weights.horizon, self.dt
                ),
            });
        }
        Ok(())
    }
}

/// Forward-backward iteration from a zero control.
pub fn solve(
    problem: &Problem<'_>,
    max_iters: usize,
    epsilon: f64,
) -> std::result::Result<Solution, SolveFailure> {
    let steps = problem.steps();
    let zero = ControlField::zeros(steps, problem.props.segments(), problem.dt);
    solve_from(problem, zero, max_iters, epsilon, |_, _| {})
}

/// Forward-backward iteration from `control`, calling `observe` with the
/// control and trajectory of every iteration.
pub fn solve_from(
    problem: &Problem<'_>,
    mut control: ControlField,
    max_iters: usize,
    epsilon: f64,
    mut observe: impl FnMut(&IterationRecord, &Trajectory),
) -> std::result::Result<Solution, SolveFailure> {
    let mut log = SolveLog::default();
    let fail = |iteration, source, log: &SolveLog| SolveFailure {
        iteration,
        source,
        log: log.clone(),
    };
    if let Err(e) = problem.validate() {
        return Err(fail(0, e, &log));
    }
    if max_iters == 0 {
        let e = SolverError::InvalidParameter {
            name: "max_iters",
            reason: "need at least one iteration".into(),
        };
        return Err(fail(0, e, &log));
    }
    if let Err(e) = control.check_shape(&ControlField::zeros(
        problem.steps(),
        problem.props.segments(),
        problem.dt,
    )) {
        return Err(fail(0, e, &log));
    }

    let mut stalled = 0usize;
    let mut k = 1;
    loop {
        let (trajectory, cost, direction) = match problem.gradient(&control) {
            Ok(v) => v,
            Err(e) => return Err(fail(k, e, &log)),
        };
        let eta = problem.weights.eta.at(k);
        let next = match update_control(&control, &direction, eta) {
            Ok(v) => v,
            Err(e) => return Err(fail(k, e, &log)),
        };
        let record = IterationRecord {
            iteration: k,
            cost: cost.total,
            running: cost.running,
            terminal: cost.terminal,
            control_change: eta * direction.max_abs(),
            tip_distance: (trajectory.last().tip() - problem.target).norm(),
        };
        debug!(
            "iteration {k}: J = {:.6e}, tip distance = {:.4e} m, du = {:.3e}",
            record.cost, record.tip_distance, record.control_change
        );
        if let Some(prev) = log.last() {
            if record.cost >= prev.cost {
                stalled += 1;
                if stalled == 5 {
                    warn!(
                        "cost has not decreased for 5 iterations; learning rate may be too large"
                    );
                    log.learning_rate_warning = true;
                }
            } else {
                stalled = 0;
            }
        }
        observe(&record, &trajectory);
        log.records.push(record);

        if record.control_change < epsilon || k >= max_iters {
            return Ok(Solution {
                control,
                trajectory,
                next_control: next,
                log,
            });
        }
        control = next;
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::RodParameters;
    use approx::assert_relative_eq;

    fn props(n: usize) -> RodProperties {
        RodProperties::new(RodParameters {
            segments: n,
            ..Default::default()
        })
        .unwrap()
    }

    fn weights(chi1: f64, chi2: f64, horizon: f64) -> CostWeights {
        CostWeights {
            chi1,
            chi2,
            eta: LearningRate::Constant(3e-5),
            horizon,
            tip_delta: TipDelta::Kronecker,
        }
    }

    #[test]
    fn cost_is_zero_on_target_at_rest() {
        let p = props(10);
        let s = RodState::straight(&p);
        let control = ControlField::zeros(50, 10, 1e-5);
        let traj = simulate_forward(&s, &control, &p).unwrap();
        let cost = evaluate_cost(&traj, &control, &p, 10.0, 2e4, s.tip()).unwrap();
        assert!(cost.total.abs() < 1e-20);
    }

    #[test]
    fn terminal_term_for_straight_rod() {
        let p = props(10);
        let s = RodState::straight(&p);
        let control = ControlField::zeros(10, 10, 1e-5);
        let traj = simulate_forward(&s, &control, &p).unwrap();
        let cost = evaluate_cost(&traj, &control, &p, 0.0, 2e4, Vec2::new(0.09, 0.09)).unwrap();
        let expected = 0.5 * 2e4 * (0.11f64.powi(2) + 0.09f64.powi(2));
        assert_relative_eq!(cost.terminal, expected, max_relative = 1e-9);
        assert_eq!(cost.running, 0.0);
    }

    #[test]
    fn update_law_algebra() {
        let p = props(4);
        let g = ControlField::from_fn(3, &p, 0.1, |t, s| Vec2::new(t + s, s), |t, s| t - s);
        let u0 = ControlField::zeros(3, 4, 0.1);
        let step = update_control(&u0, &g, 0.25).unwrap();
        assert_eq!(
            step,
            ControlField::zeros(3, 4, 0.1).add_scaled(&g, 0.25).unwrap()
        );

        // gamma == u gives a zero direction and an unchanged control
        let sweep = AdjointSweep {
            costates: vec![],
            kick_gamma: g.clone(),
        };
        let dir = control_gradient(&sweep, &g).unwrap();
        assert_eq!(dir.max_abs(), 0.0);
        assert_eq!(update_control(&g, &dir, 0.3).unwrap(), g);
        // u == 0 gives gamma itself
        assert_eq!(control_gradient(&sweep, &u0).unwrap(), g);
        // eta == 1 jumps to gamma
        let full = update_control(&u0, &control_gradient(&sweep, &u0).unwrap(), 1.0).unwrap();
        assert_eq!(full, g);
        assert!(update_control(&u0, &g, 0.0).is_err());
    }

    #[test]
    fn infinite_epsilon_stops_after_one_iteration() {
        let p = props(6);
        let s = RodState::straight(&p);
        let w = weights(10.0, 2e4, 1e-3);
        let problem = Problem {
            initial: &s,
            props: &p,
            weights: &w,
            target: Vec2::new(0.09, 0.09),
            dt: 1e-5,
        };
        let sol = solve(&problem, 20, f64::INFINITY).unwrap();
        assert_eq!(sol.log.records.len(), 1);
    }

    #[test]
    fn trivial_problem_converges_immediately() {
        let p = props(6);
        let s = RodState::straight(&p);
        let w = weights(0.0, 0.0, 1e-3);
        let problem = Problem {
            initial: &s,
            props: &p,
            weights: &w,
            target: Vec2::new(0.09, 0.09),
            dt: 1e-5,
        };
        let sol = solve(&problem, 20, 1e-8).unwrap();
        assert_eq!(sol.log.records.len(), 1);
        assert_eq!(sol.next_control.max_abs(), 0.0);
        assert_eq!(sol.log.records[0].control_change, 0.0);
    }

    #[test]
    fn horizon_must_be_whole_steps() {
        let p = props(6);
        let s = RodState::straight(&p);
        let w = weights(0.0, 1.0, 1.00005e-3);
        let problem = Problem {
            initial: &s,
            props: &p,
            weights: &w,
            target: Vec2::zeros(),
            dt: 1e-5,
        };
        let err = solve(&problem, 2, 1e-8).unwrap_err();
        assert_eq!(err.iteration, 0);
        assert!(err.log.records.is_empty());
    }

    #[test]
    fn schedule_repeats_last_rate() {
        let s = LearningRate::Schedule(vec![1.0, 2.0]);
        assert_eq!(s.at(1), 1.0);
        assert_eq!(s.at(2), 2.0);
        assert_eq!(s.at(7), 2.0);
    }
}
