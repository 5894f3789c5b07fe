//! Closed-loop hybrid simulation: swing flow to touchdown, impact, Poincaré
//! return map on the pre-impact surface and multi-step switched runs.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::control::{self, ConstraintReading, ControllerConfig};
use crate::error::{Error, Result};
use crate::model::{Biped, GroundForce, State, Vector10};
use crate::ode::{self, Tolerances};
use crate::outputs::GaitParams;

pub type Matrix10 = SMatrix<f64, 10, 10>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub controller: ControllerConfig,
    pub tolerances: Tolerances,
    /// Longest admissible swing phase before declaring a fall (s).
    pub max_step_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { controller: ControllerConfig::default(), tolerances: Tolerances::default(), max_step_time: 2.0 }
    }
}

impl SimConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tolerances: Tolerances::with_tol(tol), ..Self::default() }
    }
}

/// One recorded integrator sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: State,
    pub u: [f64; 4],
    pub force: GroundForce,
    pub theta: f64,
    pub zeta: f64,
    pub output_norm: f64,
}

/// Worst constraint values seen over a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargins {
    pub max_torque: f64,
    pub min_normal_force: f64,
    pub max_friction_ratio: f64,
}

impl Default for ConstraintMargins {
    fn default() -> Self {
        // f64::MAX rather than infinity so the value survives JSON
        Self { max_torque: 0.0, min_normal_force: f64::MAX, max_friction_ratio: 0.0 }
    }
}

impl ConstraintMargins {
    pub fn absorb(&mut self, r: &ConstraintReading) {
        self.max_torque = self.max_torque.max(r.max_torque);
        self.min_normal_force = self.min_normal_force.min(r.normal_force);
        self.max_friction_ratio = self.max_friction_ratio.max(r.friction_ratio);
    }

    pub fn merge(&mut self, other: &ConstraintMargins) {
        self.max_torque = self.max_torque.max(other.max_torque);
        self.min_normal_force = self.min_normal_force.min(other.min_normal_force);
        self.max_friction_ratio = self.max_friction_ratio.max(other.max_friction_ratio);
    }

    /// Reasons these worst-case values break the model limits.
    pub fn violations(&self, model: &Biped) -> Vec<String> {
        ConstraintReading {
            max_torque: self.max_torque,
            normal_force: self.min_normal_force,
            friction_ratio: self.max_friction_ratio,
        }
        .violations(model)
    }

    /// Smallest normalized slack (negative when violated).
    pub fn min_slack(&self, model: &Biped) -> f64 {
        let p = model.params();
        let torque = (p.torque_limit - self.max_torque) / p.torque_limit;
        let normal = (self.min_normal_force - p.min_normal_force) / p.min_normal_force.max(1.0);
        let friction = (p.friction_limit - self.max_friction_ratio) / p.friction_limit;
        torque.min(normal).min(friction)
    }
}

/// One swing phase from a post-impact state to the next touchdown.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub x_plus: State,
    /// Pre-impact state on the switching surface.
    pub x_minus: State,
    pub duration: f64,
    pub step_length: f64,
    pub average_speed: f64,
    pub margins: ConstraintMargins,
    pub violations: Vec<String>,
    pub max_output_norm: f64,
    /// Dense samples, present when recording was requested.
    pub samples: Vec<TrajectorySample>,
    pub rhs_evals: usize,
    pub rejected_steps: usize,
}

impl StepResult {
    pub fn zeta_minus(&self, model: &Biped) -> f64 {
        model.zeta(&self.x_minus)
    }
}

fn closed_loop_rhs<'a>(
    gait: &'a GaitParams,
    model: &'a Biped,
    cfg: &'a ControllerConfig,
) -> impl FnMut(f64, &Vector10<f64>) -> Result<Vector10<f64>> + 'a {
    move |_t, v| {
        let x = State::from_vector(v);
        let out = control::evaluate(&x, gait, model, cfg)?;
        let mut d = Vector10::zeros();
        d.fixed_rows_mut::<5>(0).copy_from(&x.dq);
        d.fixed_rows_mut::<5>(5).copy_from(&out.ddq);
        Ok(d)
    }
}

/// Swing flow in two legs: up to `theta_s`, where the modulation ends and
/// the closed loop is only twice differentiable, then on to touchdown.
/// Restarting at the kink keeps every Runge–Kutta step on a smooth piece,
/// which makes the return map smooth in the initial state.
fn integrate_swing(x_plus: &State, gait: &GaitParams, model: &Biped, cfg: &SimConfig) -> Result<ode::Solution<10>> {
    let height = |v: &Vector10<f64>| model.swing_foot_height(&v.fixed_rows::<5>(0).into_owned());
    let phase = |v: &Vector10<f64>| Biped::theta(&v.fixed_rows::<5>(0).into_owned());
    let theta_s = gait.bump.theta_s;
    let y0 = x_plus.to_vector();
    let mut first = None;
    if phase(&y0) < theta_s {
        let sol = ode::integrate_to_event(
            closed_loop_rhs(gait, model, &cfg.controller),
            |v| (theta_s - phase(v)).min(height(v)),
            0.0,
            y0,
            cfg.max_step_time,
            &cfg.tolerances,
        )?;
        let end = sol.samples.last().expect("initial sample");
        if !sol.event {
            return Err(Error::NoImpact(cfg.max_step_time));
        }
        if height(&end.y) < theta_s - phase(&end.y) {
            // touched down before the modulation ended
            return Ok(sol);
        }
        first = Some(sol);
    }
    let (t1, y1) = first.as_ref().map_or((0.0, y0), |s| {
        let e = s.samples.last().expect("event sample");
        (e.t, e.y)
    });
    let sol = ode::integrate_to_event(
        closed_loop_rhs(gait, model, &cfg.controller),
        height,
        t1,
        y1,
        cfg.max_step_time,
        &cfg.tolerances,
    )?;
    if !sol.event {
        return Err(Error::NoImpact(cfg.max_step_time));
    }
    Ok(match first {
        None => sol,
        Some(mut a) => {
            a.samples.extend(sol.samples.into_iter().skip(1));
            a.rhs_evals += sol.rhs_evals;
            a.rejected_steps += sol.rejected_steps;
            a.event = true;
            a
        }
    })
}

/// Integrates the closed-loop swing phase until the swing toe touches down.
pub fn integrate_step(x_plus: &State, gait: &GaitParams, model: &Biped, cfg: &SimConfig) -> Result<StepResult> {
    integrate_step_opts(x_plus, gait, model, cfg, true)
}

/// As [`integrate_step`]; `record = false` skips storing dense samples while
/// still monitoring constraints at every integrator sample.
pub fn integrate_step_opts(
    x_plus: &State,
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    record: bool,
) -> Result<StepResult> {
    if !x_plus.is_finite() {
        return Err(Error::Integration("non-finite initial state".into()));
    }
    let sol = integrate_swing(x_plus, gait, model, cfg)?;
    let mut margins = ConstraintMargins::default();
    let mut max_output_norm = 0.0f64;
    let mut samples = Vec::with_capacity(if record { sol.samples.len() } else { 0 });
    for s in &sol.samples {
        let x = State::from_vector(&s.y);
        let rate = Biped::theta_rate(&x.dq);
        if rate <= 0.0 {
            return Err(Error::NonMonotonicPhase { t: s.t, rate });
        }
        let out = control::evaluate(&x, gait, model, &cfg.controller)?;
        let reading = out.reading();
        margins.absorb(&reading);
        let ynorm = out.y.norm();
        max_output_norm = max_output_norm.max(ynorm);
        if record {
            samples.push(TrajectorySample {
                t: s.t,
                x,
                u: out.u.into(),
                force: out.force,
                theta: Biped::theta(&x.q),
                zeta: model.zeta(&x),
                output_norm: ynorm,
            });
        }
    }
    let last = sol.samples.last().expect("event sample");
    let x_minus = State::from_vector(&last.y);
    if model.swing_foot_velocity(&x_minus).y >= 0.0 {
        return Err(Error::InvalidImpact("swing toe not descending at touchdown".into()));
    }
    let step_length = model.swing_foot_position(&x_minus.q).x;
    let violations = margins.violations(model);
    Ok(StepResult {
        x_plus: *x_plus,
        x_minus,
        duration: last.t,
        step_length,
        average_speed: step_length / last.t,
        margins,
        violations,
        max_output_norm,
        samples,
        rhs_evals: sol.rhs_evals,
        rejected_steps: sol.rejected_steps,
    })
}

/// Full step from a pre-impact state: impact, then swing to the next
/// touchdown.
pub fn step_from_pre_impact(
    x: &State,
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    record: bool,
) -> Result<StepResult> {
    let x_plus = model.impact(x)?.post;
    integrate_step_opts(&x_plus, gait, model, cfg, record)
}

/// Poincaré return map on the pre-impact surface: `P(x) = phi(T_I, Delta(x))`.
pub fn poincare(x: &State, gait: &GaitParams, model: &Biped, cfg: &SimConfig) -> Result<State> {
    Ok(step_from_pre_impact(x, gait, model, cfg, false)?.x_minus)
}

/// Central-difference Jacobian of the return map with per-coordinate step
/// `rel_step * max(1, |x_i|)`.
pub fn poincare_jacobian_with_step(
    x: &State,
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    rel_step: f64,
) -> Result<Matrix10> {
    let base = x.to_vector();
    let mut jac = Matrix10::zeros();
    for i in 0..10 {
        let h = rel_step * base[i].abs().max(1.0);
        let mut xp = base;
        xp[i] += h;
        let mut xm = base;
        xm[i] -= h;
        let fp = poincare(&State::from_vector(&xp), gait, model, cfg)?.to_vector();
        let fm = poincare(&State::from_vector(&xm), gait, model, cfg)?.to_vector();
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration("non-finite Poincaré Jacobian column".into()));
        }
        jac.set_column(i, &col);
    }
    Ok(jac)
}

pub fn poincare_jacobian(x: &State, gait: &GaitParams, model: &Biped, cfg: &SimConfig) -> Result<Matrix10> {
    poincare_jacobian_with_step(x, gait, model, cfg, 1e-6)
}

/// Eigenvalue magnitudes of a return-map Jacobian, descending, and the
/// distance of the nearest eigenvalue to `1 + 0i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<(f64, f64)>,
    pub spectral_radius: f64,
    pub distance_to_one: f64,
}

pub fn spectrum(jac: &Matrix10) -> Spectrum {
    let eig = jac.complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    let spectral_radius = eigenvalues.first().map(|e| e.0.hypot(e.1)).unwrap_or(0.0);
    let distance_to_one = eigenvalues.iter().map(|e| (e.0 - 1.0).hypot(e.1)).fold(f64::INFINITY, f64::min);
    Spectrum { eigenvalues, spectral_radius, distance_to_one }
}

/// Step index to gait index, `p = sigma(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSignal(pub Vec<usize>);

impl SwitchSignal {
    pub fn constant(p: usize, steps: usize) -> Self {
        Self(vec![p; steps])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, k: usize) -> usize {
        self.0[k]
    }
}

/// Runs `x[k+1] = P_{sigma(k)}(x[k])` from a pre-impact state. Constraint
/// violations are recorded in each [`StepResult`], not raised.
pub fn run_switched(
    x0: &State,
    signal: &SwitchSignal,
    gaits: &[GaitParams],
    model: &Biped,
    cfg: &SimConfig,
    record: bool,
) -> Result<Vec<StepResult>> {
    let mut x = *x0;
    let mut out = Vec::with_capacity(signal.len());
    for &p in &signal.0 {
        let gait = gaits.get(p).ok_or_else(|| Error::InvalidArgument(format!("gait index {p} out of range")))?;
        let step = step_from_pre_impact(&x, gait, model, cfg, record)?;
        x = step.x_minus;
        out.push(step);
    }
    Ok(out)
}

/// Pre-impact state on `S ∩ Z` with the given `zeta` for a gait's base
/// constraints (the modulation vanishes at the end of the step).
pub fn surface_state(gait: &GaitParams, model: &Biped, zeta: f64) -> Result<State> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidArgument(format!("zeta must be positive, got {zeta}")));
    }
    let (q, dq_dtheta, _) = gait.configuration(gait.base.theta_minus);
    let d = model.mass_matrix(&q);
    let inertia = d.row(0).transpose().dot(&dq_dtheta);
    let theta_rate = (2.0 * zeta).sqrt() / inertia;
    Ok(State::new(q, dq_dtheta * theta_rate))
}
