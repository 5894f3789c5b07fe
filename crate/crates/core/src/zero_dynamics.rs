//! Semi-analytic evaluation of a gait restricted to its zero-dynamics
//! surface.
//!
//! On the surface the configuration is a function of `theta` alone and the
//! stance angular momentum `sigma = D_1(q) dq` obeys `d sigma/dt = -G_1(q)`
//! (kinetic energy is invariant to the unactuated rotation `q1`). With
//! `I(theta) = D_1(q(theta)) q'(theta)` and `zeta = sigma^2 / 2`,
//!
//! ```text
//! d zeta / d theta = -I(theta) G_1(q(theta))
//! ```
//!
//! so `V(theta) = zeta(theta+) - zeta(theta)` is a quadrature independent of
//! the energy level, and the impact scales `sigma` by a constant `delta_z`.
//! This gives the whole periodic orbit without integrating the full model,
//! which is what the gait optimizer iterates on.

use crate::control::{self, ControllerConfig};
use crate::error::{Error, Result};
use crate::model::{Biped, State};
use crate::outputs::GaitParams;
use crate::sim::ConstraintMargins;

/// Grid resolution of the quadrature over one step.
pub const DEFAULT_INTERVALS: usize = 1200;

/// `V(theta)` sampled on a uniform-in-panels phase grid.
#[derive(Debug, Clone)]
pub struct VProfile {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    /// `I(theta)` at the grid nodes.
    pub inertia: Vec<f64>,
}

impl VProfile {
    pub fn v_minus(&self) -> f64 {
        *self.v.last().expect("non-empty profile")
    }

    /// `max V(theta)` over the step.
    pub fn k_max(&self) -> f64 {
        self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn integrand(gait: &GaitParams, model: &Biped, theta: f64) -> (f64, f64) {
    let (q, dq, _) = gait.configuration(theta);
    let d = model.mass_matrix(&q);
    let inertia = d.row(0).transpose().dot(&dq);
    let g1 = model.gravity_vector(&q)[0];
    (inertia * g1, inertia)
}

/// Integrates `V' = I(theta) G_1(q(theta))` with classical RK4, splitting
/// the grid at `theta_s` where the modulation stops.
pub fn v_profile(gait: &GaitParams, model: &Biped, intervals: usize) -> VProfile {
    let (tp, tm) = (gait.base.theta_plus, gait.base.theta_minus);
    let ts = gait.bump.theta_s;
    let n1 = ((intervals as f64) * 0.9).round().max(1.0) as usize;
    let n2 = intervals.saturating_sub(n1).max(1);
    let mut theta = vec![tp];
    let mut v = vec![0.0];
    let mut inertia = vec![integrand(gait, model, tp).1];
    let mut acc = 0.0;
    for (a, b, n) in [(tp, ts, n1), (ts, tm, n2)] {
        let h = (b - a) / n as f64;
        for i in 0..n {
            let t0 = a + h * i as f64;
            let k1 = integrand(gait, model, t0).0;
            let (k2, _) = integrand(gait, model, t0 + 0.5 * h);
            let (k4, i4) = integrand(gait, model, t0 + h);
            acc += h / 6.0 * (k1 + 4.0 * k2 + k4);
            theta.push(if i + 1 == n { b } else { t0 + h });
            v.push(acc);
            inertia.push(i4);
        }
    }
    VProfile { theta, v, inertia }
}

/// Impact restricted to the surface: the pre-impact rates are `q'(theta-)`
/// times `dtheta-`; returns `(delta_z, post-impact rates per unit dtheta-)`.
pub fn impact_on_surface(gait: &GaitParams, model: &Biped) -> Result<(f64, State)> {
    let (q, dq, _) = gait.configuration(gait.base.theta_minus);
    let x = State::new(q, dq);
    let r = model.impact(&x)?;
    let sigma_minus = model.stance_momentum(&x);
    let sigma_plus = model.stance_momentum(&r.post);
    Ok((sigma_plus / sigma_minus, r.post))
}

/// Periodic orbit of a gait computed on its zero-dynamics surface.
#[derive(Debug, Clone)]
pub struct SurfaceOrbit {
    pub delta_sq: f64,
    pub v_minus: f64,
    pub k_max: f64,
    pub zeta_star: f64,
    pub period: f64,
    pub step_length: f64,
    pub speed: f64,
    pub margins: ConstraintMargins,
    /// Smallest swing-toe height divided by `4 s (1 - s)` over the interior.
    pub clearance: f64,
    /// Smallest `dtheta` along the orbit.
    pub min_theta_rate: f64,
    /// Vertical velocity of the lifting toe right after impact.
    pub liftoff_velocity: f64,
    pub impact_normal_impulse: f64,
    /// Swing toe vertical velocity at touchdown (must be negative).
    pub touchdown_velocity: f64,
    /// Post-impact output and output-rate residual (impact invariance).
    pub invariance_residual: f64,
    pub max_abs_torque_profile: Vec<f64>,
}

/// Evaluates the periodic orbit of `gait` on its surface. Fails when the
/// reduced map has no admissible fixed point.
pub fn surface_orbit(gait: &GaitParams, model: &Biped, intervals: usize, force_stride: usize) -> Result<SurfaceOrbit> {
    let prof = v_profile(gait, model, intervals);
    let (delta, post) = impact_on_surface(gait, model)?;
    let delta_sq = delta * delta;
    let v_minus = prof.v_minus();
    let k_max = prof.k_max();
    if !(delta_sq < 1.0) {
        return Err(Error::Design(format!("impact does not contract: delta_z^2 = {delta_sq:.4}")));
    }
    let zeta_star = -v_minus / (1.0 - delta_sq);
    let zeta_plus = delta_sq * zeta_star;
    if !(zeta_star > 0.0) || zeta_plus <= k_max {
        return Err(Error::Design(format!(
            "no admissible fixed point: zeta* = {zeta_star:.3}, K = {k_max:.3}, delta^2 = {delta_sq:.4}"
        )));
    }

    let (tp, tm) = (gait.base.theta_plus, gait.base.theta_minus);
    let cfg = ControllerConfig::default();
    let mut margins = ConstraintMargins::default();
    let mut clearance = f64::INFINITY;
    let mut min_rate = f64::INFINITY;
    let mut torque_profile = Vec::new();
    let n = prof.theta.len();
    // step time by the trapezoid rule on 1 / dtheta = I / sqrt(2 zeta)
    let mut period = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let th = prof.theta[i];
        let zeta = zeta_plus - prof.v[i];
        let inertia = prof.inertia[i];
        let rate = (2.0 * zeta).sqrt() / inertia;
        if !(rate > 0.0) {
            return Err(Error::Design(format!("phase stalls at theta = {th:.4}")));
        }
        min_rate = min_rate.min(rate);
        let inv = 1.0 / rate;
        if let Some((t0, f0)) = prev {
            period += 0.5 * (th - t0) * (f0 + inv);
        }
        prev = Some((th, inv));
        let (q, dq, _) = gait.configuration(th);
        if i > 0 && i + 1 < n {
            let s = (th - tp) / (tm - tp);
            clearance = clearance.min(model.swing_foot_height(&q) / (4.0 * s * (1.0 - s)));
        }
        if i % force_stride == 0 || i + 1 == n {
            let x = State::new(q, dq * rate);
            let out = control::evaluate(&x, gait, model, &cfg)?;
            margins.absorb(&out.reading());
            torque_profile.push(out.u.amax());
        }
    }
    let (q_minus, dq_minus, _) = gait.configuration(tm);
    let rate_minus = (2.0 * (zeta_plus - v_minus)).sqrt() / prof.inertia[n - 1];
    let x_minus = State::new(q_minus, dq_minus * rate_minus);
    let step_length = model.swing_foot_position(&q_minus).x;
    let touchdown_velocity = model.swing_foot_velocity(&x_minus).y;
    let imp = model.impact(&x_minus)?;
    let y_post = gait.output(&post.q);
    let ydot_post = gait.output_jacobian(&post.q) * post.dq;
    let invariance_residual = y_post.amax().max(ydot_post.amax());
    Ok(SurfaceOrbit {
        delta_sq,
        v_minus,
        k_max,
        zeta_star,
        period,
        step_length,
        speed: step_length / period,
        margins,
        clearance,
        min_theta_rate: min_rate,
        liftoff_velocity: imp.liftoff_velocity.y,
        impact_normal_impulse: imp.impulse.y,
        touchdown_velocity,
        invariance_residual,
        max_abs_torque_profile: torque_profile,
    })
}

/// One step on the surface from post-impact `zeta_plus`: returns
/// `(duration, zeta at touchdown)`.
pub fn surface_step(gait: &GaitParams, model: &Biped, zeta_plus: f64, intervals: usize) -> Result<(f64, f64)> {
    let prof = v_profile(gait, model, intervals);
    let mut period = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (i, &th) in prof.theta.iter().enumerate() {
        let zeta = zeta_plus - prof.v[i];
        let rate = (2.0 * zeta).sqrt() / prof.inertia[i];
        if !(rate > 0.0) {
            return Err(Error::Design(format!("phase stalls at theta = {th:.4}")));
        }
        if let Some((t0, f0)) = prev {
            period += 0.5 * (th - t0) * (f0 + 1.0 / rate);
        }
        prev = Some((th, 1.0 / rate));
    }
    Ok((period, zeta_plus - prof.v_minus()))
}
