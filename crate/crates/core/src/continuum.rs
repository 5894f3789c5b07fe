//! Speed-indexed family of gaits obtained by modulating a certified base
//! gait with the bump amplitudes `beta`.

use nalgebra::{RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::{self, LimitCycleRecord, NEWTON_TOLERANCE};
use crate::model::{Biped, State};
use crate::outputs::{BezierOutputs, BumpPolynomial, GaitParams};
use crate::sim::{self, SimConfig};

/// Finite-difference step on each `beta_i` for the speed sensitivity.
pub const SENSITIVITY_STEP: f64 = 1e-4;

/// `dv/dbeta` of the one-step average speed from the base fixed point.
pub fn speed_sensitivity(base: &GaitParams, x_star: &State, model: &Biped, cfg: &SimConfig) -> Result<RowVector4<f64>> {
    let mut row = RowVector4::zeros();
    for i in 0..4 {
        let mut e = Vector4::zeros();
        e[i] = SENSITIVITY_STEP;
        let speed = |b: Vector4<f64>| -> Result<f64> {
            let g = base.with_beta(b);
            Ok(sim::step_from_pre_impact(x_star, &g, model, cfg, false)?.average_speed)
        };
        row[i] = (speed(base.beta() + e)? - speed(base.beta() - e)?) / (2.0 * SENSITIVITY_STEP);
    }
    Ok(row)
}

/// Right pseudoinverse step `beta = J^T (J J^T)^{-1} (v_des - v*)`.
pub fn beta_for_speed(v_des: f64, v_star: f64, sensitivity: &RowVector4<f64>) -> Result<Vector4<f64>> {
    let jj = sensitivity.norm_squared();
    if !(jj > 0.0) || !jj.is_finite() {
        return Err(Error::ZeroSensitivity);
    }
    Ok(sensitivity.transpose() * ((v_des - v_star) / jj))
}

/// Provenance stored alongside a family so results can be traced back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_fingerprint: String,
    pub integrator_abs_tol: f64,
    pub integrator_rel_tol: f64,
    pub event_tol: f64,
    pub newton_tol: f64,
    pub sensitivity_step: f64,
    pub max_gap: f64,
    pub controller: crate::control::ControllerConfig,
}

/// Certified gaits in increasing speed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitFamily {
    pub base: BezierOutputs,
    pub bump: BumpPolynomial,
    /// Index of the unmodulated gait.
    pub base_index: usize,
    pub sensitivity: [f64; 4],
    pub members: Vec<LimitCycleRecord>,
    /// Speed targets that were tried and rejected, with the reason.
    pub rejected: Vec<(f64, String)>,
    pub provenance: Provenance,
}

impl GaitFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn gait(&self, p: usize) -> GaitParams {
        GaitParams { base: self.base.clone(), bump: self.bump.clone(), beta: self.members[p].beta }
    }

    pub fn gaits(&self) -> Vec<GaitParams> {
        (0..self.len()).map(|p| self.gait(p)).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.speed).collect()
    }

    pub fn zeta_stars(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.zeta_star).collect()
    }

    /// `(min, max)` certified speed.
    pub fn speed_range(&self) -> (f64, f64) {
        let s = self.speeds();
        (s.first().copied().unwrap_or(f64::NAN), s.last().copied().unwrap_or(f64::NAN))
    }

    /// Largest speed difference between consecutive members.
    pub fn max_gap(&self) -> f64 {
        self.members.windows(2).map(|w| w[1].speed - w[0].speed).fold(0.0, f64::max)
    }

    /// Member whose speed is nearest `v`, ties to the slower gait.
    pub fn nearest(&self, v: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, m) in self.members.iter().enumerate() {
            let d = (m.speed - v).abs();
            // members are sorted by speed, so strict < keeps the slower on ties
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Continuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuumOptions {
    pub speed_lo: f64,
    pub speed_hi: f64,
    /// Largest admissible speed gap between neighbors (m/s).
    pub max_gap: f64,
    /// Smallest target increment before a branch is declared stalled.
    pub min_increment: f64,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self { speed_lo: 0.55, speed_hi: 0.90, max_gap: 0.01, min_increment: 1e-4 }
    }
}

/// Certifies the gait for target `v_des`; `Err` carries the rejection.
fn try_member(
    base: &GaitParams,
    v_des: f64,
    base_record: &LimitCycleRecord,
    sens: &RowVector4<f64>,
    zeta_guess: f64,
    model: &Biped,
    cfg: &SimConfig,
) -> std::result::Result<LimitCycleRecord, String> {
    let beta = beta_for_speed(v_des, base_record.speed, sens).map_err(|e| e.to_string())?;
    let gait = base.with_beta(beta);
    let rec = limit_cycle::analyze_gait(0, &gait, model, cfg, zeta_guess).map_err(|e| e.to_string())?;
    let fails = rec.certification_failures(model);
    if fails.is_empty() {
        Ok(rec)
    } else {
        Err(fails.join("; "))
    }
}

/// Continues the family outward from the base gait in both directions.
/// Each branch targets the next speed `gap` beyond the last certified one
/// and halves its increment whenever the realized gap is too large or the
/// gait fails certification; a branch ends when it leaves the requested
/// range or the increment drops below `min_increment`.
pub fn generate_continuum(
    base: &GaitParams,
    base_record: &LimitCycleRecord,
    model: &Biped,
    cfg: &SimConfig,
    opts: &ContinuumOptions,
) -> Result<GaitFamily> {
    if !(opts.speed_lo < opts.speed_hi && opts.max_gap > 0.0) {
        return Err(Error::InvalidArgument("need speed_lo < speed_hi and a positive gap".into()));
    }
    if base.beta().amax() != 0.0 {
        return Err(Error::InvalidArgument("the base gait must be unmodulated".into()));
    }
    let sens = speed_sensitivity(base, &base_record.fixed_point, model, cfg)?;
    let mut rejected = Vec::new();
    let mut branches: [Vec<LimitCycleRecord>; 2] = [Vec::new(), Vec::new()];
    for (dir, branch) in [-1.0f64, 1.0].into_iter().zip(branches.iter_mut()) {
        let mut last = base_record.clone();
        // target offset in the pseudoinverse coordinates, separate from the realized speed
        let mut last_target = base_record.speed;
        let mut inc = opts.max_gap * 0.9;
        loop {
            let within = |v: f64| v >= opts.speed_lo - 1e-12 && v <= opts.speed_hi + 1e-12;
            if !within(last.speed)
                || (dir > 0.0 && last.speed >= opts.speed_hi)
                || (dir < 0.0 && last.speed <= opts.speed_lo)
            {
                break;
            }
            if inc < opts.min_increment {
                log::warn!("continuation stalled near {:.4} m/s", last.speed);
                break;
            }
            let target = last_target + dir * inc;
            match try_member(base, target, base_record, &sens, last.zeta_star, model, cfg) {
                Ok(rec) => {
                    let gap = (rec.speed - last.speed) * dir;
                    if gap <= 0.0 {
                        rejected.push((target, format!("speed not monotone: {:.6}", rec.speed)));
                        inc *= 0.5;
                    } else if gap > opts.max_gap {
                        inc *= 0.5;
                    } else {
                        if !within(rec.speed) {
                            break;
                        }
                        log::info!("gait at {:.4} m/s (target {:.4})", rec.speed, target);
                        // grow back toward the gap when the map is locally flat
                        inc = (inc * opts.max_gap * 0.9 / gap).min(4.0 * opts.max_gap);
                        last_target = target;
                        last = rec.clone();
                        branch.push(rec);
                    }
                }
                Err(reason) => {
                    log::info!("rejected target {target:.4}: {reason}");
                    rejected.push((target, reason));
                    inc *= 0.5;
                }
            }
        }
    }
    let [mut slow, fast] = branches;
    slow.reverse();
    let base_index = slow.len();
    let mut members = slow;
    members.push(base_record.clone());
    members.extend(fast);
    for (i, m) in members.iter_mut().enumerate() {
        m.index = i;
    }
    Ok(GaitFamily {
        base: base.base.clone(),
        bump: base.bump.clone(),
        base_index,
        sensitivity: [sens[0], sens[1], sens[2], sens[3]],
        members,
        rejected,
        provenance: Provenance {
            model_fingerprint: model.params().fingerprint(),
            integrator_abs_tol: cfg.tolerances.abs,
            integrator_rel_tol: cfg.tolerances.rel,
            event_tol: cfg.tolerances.event,
            newton_tol: NEWTON_TOLERANCE,
            sensitivity_step: SENSITIVITY_STEP,
            max_gap: opts.max_gap,
            controller: cfg.controller,
        },
    })
}

/// Family-wide invariants, each as a worst case over the members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub gaits: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    pub base_speed: f64,
    pub max_gap: f64,
    pub speed_strictly_increasing: bool,
    /// `max |delta_p^2 - delta_base^2|`.
    pub delta_sq_spread: f64,
    /// Worst relative gap between `zeta(x*_p)` and `-V_p / (1 - delta^2)`.
    pub zeta_star_closure: f64,
    pub affinity_residual: f64,
    pub fixed_point_residual: f64,
    pub theta_plus_spread: f64,
    pub theta_minus_spread: f64,
    pub step_length_spread: f64,
    pub spectral_radius_max: f64,
    /// Members faster (slower) than the base have a larger (smaller)
    /// pseudoinverse target than the base speed.
    pub sign_property: bool,
    /// Pseudoinverse targets are strictly increasing with the realized speed.
    pub ordering_property: bool,
}

impl GaitFamily {
    /// Pseudoinverse target speed behind member `p`, recovered from its
    /// modulation as `v*_base + J beta_p`.
    pub fn target_speed(&self, p: usize) -> f64 {
        let j = RowVector4::from(self.sensitivity);
        self.members[self.base_index].speed + (j * Vector4::from(self.members[p].beta))[0]
    }

    pub fn report(&self) -> FamilyReport {
        let m = &self.members;
        let base = &m[self.base_index];
        let spread =
            |f: &dyn Fn(&LimitCycleRecord) -> f64| m.iter().map(|r| (f(r) - f(base)).abs()).fold(0.0, f64::max);
        let worst = |f: &dyn Fn(&LimitCycleRecord) -> f64| m.iter().map(f).fold(0.0, f64::max);
        let v0 = base.speed;
        let targets: Vec<f64> = (0..self.len()).map(|p| self.target_speed(p)).collect();
        let (speed_min, speed_max) = self.speed_range();
        FamilyReport {
            gaits: self.len(),
            speed_min,
            speed_max,
            base_speed: v0,
            max_gap: self.max_gap(),
            speed_strictly_increasing: m.windows(2).all(|w| w[1].speed > w[0].speed),
            delta_sq_spread: spread(&|r| r.delta_sq),
            zeta_star_closure: worst(&|r| {
                (r.zeta_star - limit_cycle::zeta_star(r.delta_sq, r.v_minus)).abs() / r.zeta_star.abs()
            }),
            affinity_residual: worst(&|r| r.affinity_residual),
            fixed_point_residual: worst(&|r| r.fixed_point_residual),
            theta_plus_spread: spread(&|r| r.theta_plus),
            theta_minus_spread: spread(&|r| r.theta_minus),
            step_length_spread: spread(&|r| r.step_length),
            spectral_radius_max: worst(&|r| r.spectrum.spectral_radius),
            sign_property: m.iter().zip(&targets).all(|(r, &t)| {
                let dv = r.speed - v0;
                let dt = t - v0;
                (dv == 0.0 && dt.abs() < 1e-12) || dv * dt > 0.0
            }),
            ordering_property: targets.windows(2).all(|w| w[1] > w[0]),
        }
    }
}
