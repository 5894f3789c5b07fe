//! Input-output linearizing control of the virtual constraints.
//!
//! `u = u* + (L_g L_f h)^{-1} nu`, where `u*` cancels the output dynamics
//! and `nu` is either a PD term or the minimizer of a relaxed CLF-QP with
//! torque, friction and normal-force constraints.

use nalgebra::{DMatrix, DVector, Vector2, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Biped, GroundForce, State};
use crate::outputs::{GaitParams, LieDerivatives};
use crate::qp::{self, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Exact linearization plus PD on the outputs.
    Pd,
    /// CLF-QP for `nu` with actuator and contact constraints.
    ClfQp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControlMode,
    pub kp: f64,
    pub kd: f64,
    /// Time scale of the output dynamics (s).
    #[serde(rename = "epsilon_s")]
    pub epsilon: f64,
    /// Weight of the CLF relaxation in the QP cost.
    pub relaxation_penalty: f64,
    /// CLF decrease rate multiplier, applied as `rate / epsilon`.
    pub clf_rate: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            mode: ControlMode::Pd,
            kp: 2.0,
            kd: 2.0,
            epsilon: 0.05,
            relaxation_penalty: 1e4,
            clf_rate: 1.0 / (1.0 + 3f64.sqrt()),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.kd > 0.0 && self.epsilon > 0.0) {
            return Err(crate::Error::InvalidArgument(
                "PD gains and epsilon must be positive (Hurwitz output dynamics)".into(),
            ));
        }
        if !(self.relaxation_penalty > 0.0 && self.clf_rate >= 0.0) {
            return Err(crate::Error::InvalidArgument("invalid CLF-QP weights".into()));
        }
        Ok(())
    }
}

/// Feedback-linearizing torque `u* = -(L_g L_f h)^{-1} L_f^2 h`.
pub fn u_star(x: &State, gait: &GaitParams, model: &Biped) -> Result<Vector4<f64>> {
    let lie = LieDerivatives::compute(x, gait, model)?;
    Ok(-lie.lg_lf_h_inv * lie.lf2_h)
}

/// PD auxiliary input `nu = -(kp / eps^2) y - (kd / eps) ydot`.
pub fn aux_nu(y: &Vector4<f64>, ydot: &Vector4<f64>, cfg: &ControllerConfig) -> Vector4<f64> {
    let e = cfg.epsilon;
    -(cfg.kp / (e * e)) * y - (cfg.kd / e) * ydot
}

/// Per-sample constraint readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReading {
    pub max_torque: f64,
    pub normal_force: f64,
    pub friction_ratio: f64,
}

impl ConstraintReading {
    pub fn new(u: &Vector4<f64>, f: &GroundForce) -> Self {
        Self { max_torque: u.amax(), normal_force: f.normal, friction_ratio: f.friction_ratio() }
    }

    /// Reasons this reading violates the model limits, if any.
    pub fn violations(&self, model: &Biped) -> Vec<String> {
        let p = model.params();
        let mut out = Vec::new();
        if self.max_torque > p.torque_limit {
            out.push(format!("torque {:.2} N·m > {:.2}", self.max_torque, p.torque_limit));
        }
        if self.normal_force < p.min_normal_force {
            out.push(format!("normal force {:.2} N < {:.2}", self.normal_force, p.min_normal_force));
        }
        if self.friction_ratio > p.friction_limit {
            out.push(format!("friction ratio {:.3} > {:.3}", self.friction_ratio, p.friction_limit));
        }
        out
    }
}

/// Everything the closed loop produces at one state.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub u: Vector4<f64>,
    pub nu: Vector4<f64>,
    pub ddq: Vector5<f64>,
    pub y: Vector4<f64>,
    pub ydot: Vector4<f64>,
    pub force: GroundForce,
    /// False when the QP was infeasible and saturated PD was applied.
    pub qp_ok: bool,
}

impl ControlOutput {
    pub fn reading(&self) -> ConstraintReading {
        ConstraintReading::new(&self.u, &self.force)
    }
}

/// Evaluates the closed-loop torque and acceleration at `x`.
pub fn evaluate(x: &State, gait: &GaitParams, model: &Biped, cfg: &ControllerConfig) -> Result<ControlOutput> {
    let lie = LieDerivatives::compute(x, gait, model)?;
    let ustar = -lie.lg_lf_h_inv * lie.lf2_h;
    let (nu, u, qp_ok) = match cfg.mode {
        ControlMode::Pd => {
            let nu = aux_nu(&lie.y, &lie.lf_h, cfg);
            (nu, ustar + lie.lg_lf_h_inv * nu, true)
        }
        ControlMode::ClfQp => match clf_qp_from_lie(x, &lie, &ustar, model, cfg) {
            Some(nu) => (nu, ustar + lie.lg_lf_h_inv * nu, true),
            None => {
                let nu = aux_nu(&lie.y, &lie.lf_h, cfg);
                let lim = model.params().torque_limit;
                let u = (ustar + lie.lg_lf_h_inv * nu).map(|v| v.clamp(-lim, lim));
                log::warn!("CLF-QP infeasible; applying saturated PD torque");
                (nu, u, false)
            }
        },
    };
    let ddq = lie.drift_accel + lie.input_accel * u;
    let force = model.ground_reaction_with_accel(x, &ddq);
    Ok(ControlOutput { u, nu, ddq, y: lie.y, ydot: lie.lf_h, force, qp_ok })
}

/// CLF-QP auxiliary input. Falls back to the PD term when the QP is
/// infeasible even with the relaxation.
pub fn clf_qp_nu(x: &State, gait: &GaitParams, model: &Biped, cfg: &ControllerConfig) -> Result<Vector4<f64>> {
    let lie = LieDerivatives::compute(x, gait, model)?;
    let ustar = -lie.lg_lf_h_inv * lie.lf2_h;
    Ok(clf_qp_from_lie(x, &lie, &ustar, model, cfg).unwrap_or_else(|| {
        log::warn!("CLF-QP infeasible; falling back to PD");
        aux_nu(&lie.y, &lie.lf_h, cfg)
    }))
}

/// The QP assembled at a state: `z = (nu, relaxation)`.
#[derive(Debug, Clone)]
pub struct ClfQpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Builds the CLF-QP. With `eta = (y, ydot)` per channel the Lyapunov
/// function is `V = eta' P_eps eta`, `P_eps = S P S`, `S = diag(1/eps, 1)`,
/// where `P = [[sqrt3, 1], [1, sqrt3]]` solves the double-integrator CARE.
pub fn clf_qp_problem(
    x: &State,
    lie: &LieDerivatives,
    ustar: &Vector4<f64>,
    model: &Biped,
    cfg: &ControllerConfig,
) -> ClfQpProblem {
    let e = cfg.epsilon;
    let r3 = 3f64.sqrt();
    let (p11, p12, p22) = (r3 / (e * e), 1.0 / e, r3);
    let (y, yd) = (&lie.y, &lie.lf_h);
    let mut v = 0.0;
    let mut lf_v = 0.0;
    let mut lg_v = Vector4::zeros();
    for i in 0..4 {
        v += p11 * y[i] * y[i] + 2.0 * p12 * y[i] * yd[i] + p22 * yd[i] * yd[i];
        // eta_dot = (ydot, nu): drift part contributes 2 eta' P (ydot, 0)
        lf_v += 2.0 * (p11 * y[i] + p12 * yd[i]) * yd[i];
        lg_v[i] = 2.0 * (p12 * y[i] + p22 * yd[i]);
    }
    let lim = model.params().torque_limit;
    let mu = model.params().friction_limit;
    let f_min = model.params().min_normal_force;
    let a_inv = &lie.lg_lf_h_inv;

    // ground force as an affine function of nu
    let x_star = lie.drift_accel + lie.input_accel * ustar;
    let f_star = model.ground_reaction_with_accel(x, &x_star);
    let w = model.com_jacobian_weighted(&x.q);
    let f_nu = w * lie.input_accel * a_inv; // 2x4

    let rows = 1 + 8 + 3;
    let mut a = DMatrix::zeros(rows, 5);
    let mut b = DVector::zeros(rows);
    // CLF: lf_v + lg_v nu + (rate/eps) v <= relax
    for i in 0..4 {
        a[(0, i)] = lg_v[i];
    }
    a[(0, 4)] = -1.0;
    b[0] = -lf_v - cfg.clf_rate / e * v;
    // torque box
    for r in 0..4 {
        for c in 0..4 {
            a[(1 + r, c)] = a_inv[(r, c)];
            a[(5 + r, c)] = -a_inv[(r, c)];
        }
        b[1 + r] = lim - ustar[r];
        b[5 + r] = lim + ustar[r];
    }
    // friction cone |F_t| <= mu F_n
    let ft = Vector2::new(f_star.tangential, f_star.normal);
    for c in 0..4 {
        a[(9, c)] = f_nu[(0, c)] - mu * f_nu[(1, c)];
        a[(10, c)] = -f_nu[(0, c)] - mu * f_nu[(1, c)];
        a[(11, c)] = -f_nu[(1, c)];
    }
    b[9] = -(ft.x - mu * ft.y);
    b[10] = -(-ft.x - mu * ft.y);
    b[11] = ft.y - f_min;

    let mut hessian = DMatrix::identity(5, 5) * 2.0;
    hessian[(4, 4)] = 2.0 * cfg.relaxation_penalty;
    ClfQpProblem { hessian, gradient: DVector::zeros(5), a, b }
}

fn clf_qp_from_lie(
    x: &State,
    lie: &LieDerivatives,
    ustar: &Vector4<f64>,
    model: &Biped,
    cfg: &ControllerConfig,
) -> Option<Vector4<f64>> {
    let prob = clf_qp_problem(x, lie, ustar, model, cfg);
    let sol = qp::solve(&prob.hessian, &prob.gradient, &prob.a, &prob.b, 1e-12);
    (sol.status == QpStatus::Optimal).then(|| Vector4::new(sol.x[0], sol.x[1], sol.x[2], sol.x[3]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn nu_vanishes_on_manifold() {
        let cfg = ControllerConfig::default();
        assert_eq!(aux_nu(&Vector4::zeros(), &Vector4::zeros(), &cfg), Vector4::zeros());
    }

    #[test]
    fn invalid_gains_rejected() {
        let cfg = ControllerConfig { kp: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(ControllerConfig::default().validate().is_ok());
    }

    #[test]
    fn violations_reported() {
        let model = Biped::new(ModelParams::default()).unwrap();
        let r = ConstraintReading { max_torque: 120.0, normal_force: 50.0, friction_ratio: 0.9 };
        assert_eq!(r.violations(&model).len(), 3);
        let ok = ConstraintReading { max_torque: 20.0, normal_force: 250.0, friction_ratio: 0.1 };
        assert!(ok.violations(&model).is_empty());
    }
}
