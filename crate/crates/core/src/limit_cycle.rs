//! Periodic orbits of a gait on the full model: fixed points of the return
//! map, the affine step-to-step map of `zeta`, and certification.

use nalgebra::{SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Biped, State, Vector10};
use crate::outputs::GaitParams;
use crate::sim::{self, ConstraintMargins, SimConfig, Spectrum};
use crate::zero_dynamics;

/// Residual below which Newton stops.
pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
/// Relative spacing of the `zeta` samples used to fit the reduced map.
const FIT_SPREAD: f64 = 0.08;
/// Maximum relative deviation from affinity tolerated by the fit.
pub const AFFINITY_TOLERANCE: f64 = 1e-8;

/// Result of a return-map root solve.
#[derive(Debug, Clone, Copy)]
pub struct FixedPoint {
    pub x: State,
    /// `max |P(x) - x|`.
    pub residual: f64,
    /// Return-map evaluations spent on residual checks.
    pub iterations: usize,
}

/// Newton iteration on `H(x) = P(x) - x` with a central-difference Jacobian.
pub fn fixed_point_solve(gait: &GaitParams, model: &Biped, cfg: &SimConfig, x_guess: &State) -> Result<FixedPoint> {
    let mut x = x_guess.to_vector();
    let mut residual = f64::INFINITY;
    for it in 1..=NEWTON_MAX_ITERATIONS {
        let state = State::from_vector(&x);
        let h = sim::poincare(&state, gait, model, cfg)?.to_vector() - x;
        residual = h.amax();
        if residual < NEWTON_TOLERANCE {
            return Ok(FixedPoint { x: state, residual, iterations: it });
        }
        let jac = sim::poincare_jacobian(&state, gait, model, cfg)?;
        let lhs = jac - SMatrix::<f64, 10, 10>::identity();
        let dx = lhs
            .lu()
            .solve(&(-h))
            .ok_or_else(|| Error::Singular("return-map Jacobian has an eigenvalue at 1".into()))?;
        x += dx;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITERATIONS, residual })
}

/// Fixed point reached on `S ∩ Z` by the affine reduced map: two steps
/// pin the map, the predicted `zeta*` is then polished by full Newton.
pub fn fixed_point_on_surface(
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    zeta_guess: f64,
) -> Result<FixedPoint> {
    let fit = fit_reduced_map(gait, model, cfg, zeta_guess, 2)?;
    let x0 = sim::surface_state(gait, model, fit.zeta_star())?;
    fixed_point_solve(gait, model, cfg, &x0)
}

/// Affine step-to-step map `zeta -> delta_sq * zeta - v_minus` fitted from
/// simulated steps that start on `S ∩ Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedMapFit {
    pub delta_sq: f64,
    pub v_minus: f64,
    /// Largest relative deviation of any sample from the fitted line.
    pub affinity_residual: f64,
    /// `(zeta in, zeta out)` pairs.
    pub samples: Vec<(f64, f64)>,
}

impl ReducedMapFit {
    pub fn zeta_star(&self) -> f64 {
        zeta_star(self.delta_sq, self.v_minus)
    }

    pub fn apply(&self, zeta: f64) -> f64 {
        self.delta_sq * zeta - self.v_minus
    }
}

/// `zeta* = -V(theta-) / (1 - delta_z^2)`.
pub fn zeta_star(delta_sq: f64, v_minus: f64) -> f64 {
    -v_minus / (1.0 - delta_sq)
}

/// Simulates `n >= 2` steps from `S ∩ Z` at `zeta` values spread around
/// `zeta_center`. The first two fix the line, the rest validate it.
pub fn fit_reduced_map(
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    zeta_center: f64,
    n: usize,
) -> Result<ReducedMapFit> {
    if n < 2 {
        return Err(Error::InvalidArgument("the reduced map needs at least two samples".into()));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        // endpoints first so the defining pair is well separated
        let s = match i {
            0 => -1.0,
            1 => 1.0,
            _ => -1.0 + 2.0 * (i - 1) as f64 / (n - 1) as f64,
        };
        let z_in = zeta_center * (1.0 + FIT_SPREAD * s);
        let x = sim::surface_state(gait, model, z_in)?;
        let step = sim::step_from_pre_impact(&x, gait, model, cfg, false)?;
        samples.push((z_in, model.zeta(&step.x_minus)));
    }
    let (a, b) = (samples[0], samples[1]);
    let delta_sq = (b.1 - a.1) / (b.0 - a.0);
    let v_minus = delta_sq * a.0 - a.1;
    let affinity_residual =
        samples.iter().map(|&(zi, zo)| ((delta_sq * zi - v_minus) - zo).abs() / zo.abs()).fold(0.0, f64::max);
    if affinity_residual > AFFINITY_TOLERANCE {
        return Err(Error::NotAffine(affinity_residual));
    }
    Ok(ReducedMapFit { delta_sq, v_minus, affinity_residual, samples })
}

/// `V(theta)` over one step and its maximum `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VProfileSummary {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub k_max: f64,
}

/// Integrates the zero dynamics over one step on a phase grid of
/// `intervals` panels (at least 10³ samples by default).
pub fn v_profile_and_k(gait: &GaitParams, model: &Biped, intervals: usize) -> VProfileSummary {
    let p = zero_dynamics::v_profile(gait, model, intervals);
    let k_max = p.k_max();
    VProfileSummary { theta: p.theta, v: p.v, k_max }
}

/// One certified member of a gait family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleRecord {
    pub index: usize,
    pub beta: [f64; 4],
    /// Pre-impact fixed point `x*`.
    pub fixed_point: State,
    pub fixed_point_residual: f64,
    pub zeta_star: f64,
    pub delta_sq: f64,
    pub v_minus: f64,
    pub k_max: f64,
    pub affinity_residual: f64,
    pub speed: f64,
    pub period: f64,
    pub step_length: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub spectrum: Spectrum,
    pub margins: ConstraintMargins,
    /// Largest `|y|` along the periodic orbit.
    pub max_output_norm: f64,
}

impl LimitCycleRecord {
    pub fn beta_vector(&self) -> Vector4<f64> {
        Vector4::from(self.beta)
    }

    /// Failed certification checks; empty when the orbit is certified.
    pub fn certification_failures(&self, model: &Biped) -> Vec<String> {
        let mut out = Vec::new();
        if self.fixed_point_residual >= 1e-8 {
            out.push(format!("periodicity residual {:.2e}", self.fixed_point_residual));
        }
        if !(self.delta_sq > 0.0 && self.delta_sq < 1.0) {
            out.push(format!("delta_z^2 = {:.6} outside (0, 1)", self.delta_sq));
        }
        if self.spectrum.spectral_radius >= 1.0 {
            out.push(format!("spectral radius {:.4} >= 1", self.spectrum.spectral_radius));
        }
        if self.spectrum.distance_to_one < 1e-3 {
            out.push("return-map eigenvalue within 1e-3 of 1".into());
        }
        if self.zeta_star * self.delta_sq <= self.k_max {
            out.push(format!(
                "post-impact zeta {:.3} does not exceed K = {:.3}",
                self.zeta_star * self.delta_sq,
                self.k_max
            ));
        }
        out.extend(self.margins.violations(model));
        out
    }
}

/// Solves, fits and checks the periodic orbit of `gait`, warm-started at
/// `zeta_guess`. Returns the record even when a check fails so callers
/// can report why; see [`LimitCycleRecord::certification_failures`].
pub fn analyze_gait(
    index: usize,
    gait: &GaitParams,
    model: &Biped,
    cfg: &SimConfig,
    zeta_guess: f64,
) -> Result<LimitCycleRecord> {
    let fit = fit_reduced_map(gait, model, cfg, zeta_guess, 5)?;
    let x0 = sim::surface_state(gait, model, fit.zeta_star())?;
    let fp = fixed_point_solve(gait, model, cfg, &x0)?;
    let step = sim::step_from_pre_impact(&fp.x, gait, model, cfg, false)?;
    let jac = sim::poincare_jacobian(&fp.x, gait, model, cfg)?;
    let spectrum = sim::spectrum(&jac);
    let profile = v_profile_and_k(gait, model, zero_dynamics::DEFAULT_INTERVALS);
    Ok(LimitCycleRecord {
        index,
        beta: gait.beta,
        fixed_point: fp.x,
        fixed_point_residual: (step.x_minus.to_vector() - fp.x.to_vector()).amax(),
        zeta_star: model.zeta(&fp.x),
        delta_sq: fit.delta_sq,
        v_minus: fit.v_minus,
        k_max: profile.k_max,
        affinity_residual: fit.affinity_residual,
        speed: step.average_speed,
        period: step.duration,
        step_length: step.step_length,
        theta_plus: gait.base.theta_plus,
        theta_minus: Biped::theta(&fp.x.q),
        spectrum,
        margins: step.margins,
        max_output_norm: step.max_output_norm,
    })
}

/// Distance between two states, used for continuity bookkeeping.
pub fn state_distance(a: &State, b: &State) -> f64 {
    let d: Vector10<f64> = a.to_vector() - b.to_vector();
    d.norm()
}
