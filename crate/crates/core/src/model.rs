//! Rigid-body model of the planar five-link biped.
//!
//! # Coordinates
//!
//! `q = (q1, q2, q3, q4, q5)`:
//!
//! * `q1` torso angle from the upward vertical, positive when leaning toward
//!   the direction of travel (+x). It is the only unactuated coordinate.
//! * `q2` stance hip, `q3` swing hip: relative angle between the torso and the
//!   thigh, zero when the thigh continues the torso line straight down.
//! * `q4` stance knee, `q5` swing knee: relative angle between thigh and shank,
//!   zero when straight, positive for a human-like flexed knee.
//!
//! The absolute angles of the links are then
//! `torso = q1`, `stance thigh = q1 + q2`, `swing thigh = q1 + q3`,
//! `stance shank = q1 + q2 + q4`, `swing shank = q1 + q3 + q5`, all measured
//! so that increasing angle rotates the link clockwise (hip moves toward +x
//! relative to a fixed foot). With equal thigh and shank lengths,
//! `theta(q) = q1 + q2 + q4 / 2` is exactly the angle of the line from the
//! stance toe to the hip, which grows monotonically over a forward step.
//!
//! Every link point is a linear combination `sum_j c_j * (sin a_j, cos a_j)`
//! of the absolute angles `a_j`, measured from the stance toe pivot. Mass
//! matrix, Christoffel terms and gravity all follow from these coefficient
//! tables in closed form.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix2x5, Matrix5, SMatrix, SVector, Vector2, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix5x4 = SMatrix<f64, 5, 4>;
pub type Vector10<T> = SVector<T, 10>;

/// Inertial description of one rigid link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    #[serde(rename = "mass_kg")]
    pub mass: f64,
    #[serde(rename = "length_m")]
    pub length: f64,
    /// Distance of the center of mass from the proximal joint (the hip for the
    /// torso and thighs, the knee for the shanks).
    #[serde(rename = "com_offset_m")]
    pub com_offset: f64,
    /// Rotational inertia about the center of mass.
    #[serde(rename = "inertia_kgm2")]
    pub inertia: f64,
}

/// Physical parameters and modeling limits.
///
/// Both legs share the same thigh and shank parameters; the swing/stance
/// relabeling at impact relies on that symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub torso: LinkParams,
    pub thigh: LinkParams,
    pub shank: LinkParams,
    #[serde(rename = "gravity_mps2")]
    pub gravity: f64,
    #[serde(rename = "torque_limit_nm")]
    pub torque_limit: f64,
    /// Largest admissible |F_t| / F_n at the stance toe.
    #[serde(rename = "friction_limit")]
    pub friction_limit: f64,
    #[serde(rename = "min_normal_force_n")]
    pub min_normal_force: f64,
}

impl Default for ModelParams {
    /// Approximation of the RABBIT testbed.
    fn default() -> Self {
        Self {
            torso: LinkParams { mass: 12.0, length: 0.625, com_offset: 0.24, inertia: 1.33 },
            thigh: LinkParams { mass: 6.8, length: 0.4, com_offset: 0.11, inertia: 0.47 },
            shank: LinkParams { mass: 3.2, length: 0.4, com_offset: 0.24, inertia: 0.20 },
            gravity: 9.81,
            torque_limit: 100.0,
            friction_limit: 0.8,
            min_normal_force: 100.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, link) in [("torso", &self.torso), ("thigh", &self.thigh), ("shank", &self.shank)] {
            if !(link.mass > 0.0 && link.length > 0.0 && link.inertia > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name}: mass, length and inertia must be strictly positive"
                )));
            }
            if !(link.com_offset >= 0.0 && link.com_offset <= link.length) {
                return Err(Error::InvalidParams(format!("{name}: com offset must lie on the link")));
            }
        }
        if (self.thigh.length - self.shank.length).abs() > 1e-12 {
            return Err(Error::InvalidParams(
                "thigh and shank must have equal length for the virtual-leg phase variable".into(),
            ));
        }
        if !(self.gravity > 0.0) {
            return Err(Error::InvalidParams("gravity must be positive".into()));
        }
        if !(self.torque_limit > 0.0) {
            return Err(Error::InvalidParams("torque limit must be positive".into()));
        }
        if !(self.friction_limit > 0.0 && self.friction_limit <= 1.0) {
            return Err(Error::InvalidParams("friction limit must lie in (0, 1]".into()));
        }
        if !(self.min_normal_force >= 0.0) {
            return Err(Error::InvalidParams("minimum normal force must be >= 0".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass + 2.0 * self.thigh.mass + 2.0 * self.shank.mass
    }

    /// Reads the `[model]` table of a TOML config file.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrapper {
            model: ModelParams,
        }
        let w: Wrapper = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        w.model.validate()?;
        Ok(w.model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Stable 64-bit fingerprint of the parameter values (FNV-1a over the bit
    /// patterns), used to tie artifacts to the model that produced them.
    pub fn fingerprint(&self) -> String {
        let vals = [
            self.torso.mass,
            self.torso.length,
            self.torso.com_offset,
            self.torso.inertia,
            self.thigh.mass,
            self.thigh.length,
            self.thigh.com_offset,
            self.thigh.inertia,
            self.shank.mass,
            self.shank.length,
            self.shank.com_offset,
            self.shank.inertia,
            self.gravity,
            self.torque_limit,
            self.friction_limit,
            self.min_normal_force,
        ];
        let mut h: u64 = 0xcbf29ce484222325;
        for v in vals {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Full robot state `x = (q, dq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vector5<f64>,
    pub dq: Vector5<f64>,
}

impl State {
    pub fn new(q: Vector5<f64>, dq: Vector5<f64>) -> Self {
        Self { q, dq }
    }

    pub fn to_vector(&self) -> Vector10<f64> {
        let mut v = Vector10::zeros();
        v.fixed_rows_mut::<5>(0).copy_from(&self.q);
        v.fixed_rows_mut::<5>(5).copy_from(&self.dq);
        v
    }

    pub fn from_vector(v: &Vector10<f64>) -> Self {
        Self { q: v.fixed_rows::<5>(0).into_owned(), dq: v.fixed_rows::<5>(5).into_owned() }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.dq.iter()).all(|v| v.is_finite())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q=[")?;
        for (i, v) in self.q.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, "] dq=[")?;
        for (i, v) in self.dq.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, "]")
    }
}

/// Reaction force at the stance toe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundForce {
    /// Tangential component, positive along +x.
    pub tangential: f64,
    /// Normal component, positive upward.
    pub normal: f64,
}

impl GroundForce {
    /// |F_t| / F_n, infinite when the normal force is not positive.
    pub fn friction_ratio(&self) -> f64 {
        if self.normal > 0.0 {
            self.tangential.abs() / self.normal
        } else {
            f64::INFINITY
        }
    }
}

/// Result of the plastic impact solve.
#[derive(Debug, Clone, Copy)]
pub struct ImpactResult {
    pub post: State,
    /// Impulse delivered by the ground at the touchdown toe (N·s).
    pub impulse: Vector2<f64>,
    /// Velocity of the lifting (previous stance) toe right after impact.
    pub liftoff_velocity: Vector2<f64>,
}

impl ImpactResult {
    /// The previous stance leg must leave the ground and the ground may only
    /// push.
    pub fn is_valid(&self) -> bool {
        self.liftoff_velocity.y > 0.0 && self.impulse.y > 0.0
    }
}

/// Maps generalized to absolute link angles.
const ABS: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0], // torso
    [1.0, 1.0, 0.0, 0.0, 0.0], // stance thigh
    [1.0, 0.0, 1.0, 0.0, 0.0], // swing thigh
    [1.0, 1.0, 0.0, 1.0, 0.0], // stance shank
    [1.0, 0.0, 1.0, 0.0, 1.0], // swing shank
];

/// Gradient of the phase variable.
pub const THETA_GRADIENT: [f64; 5] = [1.0, 1.0, 0.0, 0.5, 0.0];

/// Precomputed geometry and inertia tables for a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Biped {
    params: ModelParams,
    abs_map: Matrix5<f64>,
    /// `sum_i m_i c_ij c_ik`.
    mass_coupling: Matrix5<f64>,
    /// `sum_i m_i c_ij`.
    mass_moment: Vector5<f64>,
    inertia: Vector5<f64>,
    /// Swing toe coefficients.
    swing_toe: Vector5<f64>,
    hip: Vector5<f64>,
    link_com: [Vector5<f64>; 5],
    link_mass: [f64; 5],
    total_mass: f64,
}

impl Biped {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let ModelParams { torso, thigh, shank, .. } = params;
        let (lf, lt) = (thigh.length, shank.length);
        let hip = Vector5::new(0.0, lf, 0.0, lt, 0.0);
        let link_com = [
            Vector5::new(torso.com_offset, lf, 0.0, lt, 0.0),
            Vector5::new(0.0, lf - thigh.com_offset, 0.0, lt, 0.0),
            Vector5::new(0.0, lf, -thigh.com_offset, lt, 0.0),
            Vector5::new(0.0, 0.0, 0.0, lt - shank.com_offset, 0.0),
            Vector5::new(0.0, lf, -lf, lt, -shank.com_offset),
        ];
        let link_mass = [torso.mass, thigh.mass, thigh.mass, shank.mass, shank.mass];
        let inertia = Vector5::new(torso.inertia, thigh.inertia, thigh.inertia, shank.inertia, shank.inertia);
        let mut mass_coupling = Matrix5::zeros();
        let mut mass_moment = Vector5::zeros();
        for (c, m) in link_com.iter().zip(link_mass) {
            mass_coupling += m * c * c.transpose();
            mass_moment += m * c;
        }
        let abs_map = Matrix5::from_fn(|r, c| ABS[r][c]);
        Ok(Self {
            params,
            abs_map,
            mass_coupling,
            mass_moment,
            inertia,
            swing_toe: Vector5::new(0.0, lf, -lf, lt, -lt),
            hip,
            link_com,
            link_mass,
            total_mass: params.total_mass(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Absolute link angles `(torso, stance thigh, swing thigh, stance shank, swing shank)`.
    pub fn absolute_angles(&self, q: &Vector5<f64>) -> Vector5<f64> {
        self.abs_map * q
    }

    /// Inertia matrix `D(q)`.
    pub fn mass_matrix(&self, q: &Vector5<f64>) -> Matrix5<f64> {
        let a = self.absolute_angles(q);
        let mut d_abs = Matrix5::from_fn(|j, k| self.mass_coupling[(j, k)] * (a[j] - a[k]).cos());
        for j in 0..5 {
            d_abs[(j, j)] += self.inertia[j];
        }
        let d = self.abs_map.transpose() * d_abs * self.abs_map;
        // the triple product is symmetric only up to round-off
        (d + d.transpose()) * 0.5
    }

    /// Christoffel-symbol Coriolis matrix `C(q, dq)`.
    pub fn coriolis_matrix(&self, q: &Vector5<f64>, dq: &Vector5<f64>) -> Matrix5<f64> {
        let a = self.absolute_angles(q);
        let da = self.abs_map * dq;
        let c_abs = Matrix5::from_fn(|j, k| self.mass_coupling[(j, k)] * (a[j] - a[k]).sin() * da[k]);
        self.abs_map.transpose() * c_abs * self.abs_map
    }

    /// Gravity vector `G(q) = dV/dq`.
    pub fn gravity_vector(&self, q: &Vector5<f64>) -> Vector5<f64> {
        let a = self.absolute_angles(q);
        let g = self.params.gravity;
        let g_abs = Vector5::from_fn(|j, _| -g * self.mass_moment[j] * a[j].sin());
        self.abs_map.transpose() * g_abs
    }

    /// `C(q, dq) dq + G(q)`.
    pub fn bias_forces(&self, q: &Vector5<f64>, dq: &Vector5<f64>) -> Vector5<f64> {
        let a = self.absolute_angles(q);
        let da = self.abs_map * dq;
        let g = self.params.gravity;
        let h_abs = Vector5::from_fn(|j, _| {
            let mut s = -g * self.mass_moment[j] * a[j].sin();
            for k in 0..5 {
                s += self.mass_coupling[(j, k)] * (a[j] - a[k]).sin() * da[k] * da[k];
            }
            s
        });
        self.abs_map.transpose() * h_abs
    }

    /// Actuator distribution matrix: torques act on `q2..q5`.
    pub fn input_matrix(&self) -> Matrix5x4 {
        Matrix5x4::from_fn(|r, c| if r == c + 1 { 1.0 } else { 0.0 })
    }

    pub fn potential_energy(&self, q: &Vector5<f64>) -> f64 {
        let a = self.absolute_angles(q);
        self.params.gravity * (0..5).map(|j| self.mass_moment[j] * a[j].cos()).sum::<f64>()
    }

    pub fn kinetic_energy(&self, x: &State) -> f64 {
        0.5 * x.dq.dot(&(self.mass_matrix(&x.q) * x.dq))
    }

    pub fn total_energy(&self, x: &State) -> f64 {
        self.kinetic_energy(x) + self.potential_energy(&x.q)
    }

    fn point(&self, coeff: &Vector5<f64>, q: &Vector5<f64>) -> Vector2<f64> {
        let a = self.absolute_angles(q);
        (0..5).fold(Vector2::zeros(), |acc, j| acc + coeff[j] * Vector2::new(a[j].sin(), a[j].cos()))
    }

    /// Jacobian of a chain point with respect to `q`.
    fn point_jacobian(&self, coeff: &Vector5<f64>, q: &Vector5<f64>) -> Matrix2x5<f64> {
        let a = self.absolute_angles(q);
        let j_abs = Matrix2x5::from_fn(|r, j| {
            let d = if r == 0 { a[j].cos() } else { -a[j].sin() };
            coeff[j] * d
        });
        j_abs * self.abs_map
    }

    fn point_velocity(&self, coeff: &Vector5<f64>, x: &State) -> Vector2<f64> {
        self.point_jacobian(coeff, &x.q) * x.dq
    }

    /// Swing toe position relative to the stance toe.
    pub fn swing_foot_position(&self, q: &Vector5<f64>) -> Vector2<f64> {
        self.point(&self.swing_toe, q)
    }

    /// Height of the swing toe, `p_v(q)`.
    pub fn swing_foot_height(&self, q: &Vector5<f64>) -> f64 {
        self.swing_foot_position(q).y
    }

    pub fn swing_foot_velocity(&self, x: &State) -> Vector2<f64> {
        self.point_velocity(&self.swing_toe, x)
    }

    pub fn hip_position(&self, q: &Vector5<f64>) -> Vector2<f64> {
        self.point(&self.hip, q)
    }

    pub fn hip_velocity(&self, x: &State) -> Vector2<f64> {
        self.point_velocity(&self.hip, x)
    }

    /// Position of the center of mass of link `i` (ordering as in
    /// [`Biped::absolute_angles`]).
    pub fn link_com(&self, i: usize, q: &Vector5<f64>) -> Vector2<f64> {
        self.point(&self.link_com[i], q)
    }

    pub fn link_mass(&self, i: usize) -> f64 {
        self.link_mass[i]
    }

    pub fn center_of_mass(&self, q: &Vector5<f64>) -> Vector2<f64> {
        self.point(&self.mass_moment, q) / self.total_mass
    }

    /// `m_total * d(com)/dq`.
    pub fn com_jacobian_weighted(&self, q: &Vector5<f64>) -> Matrix2x5<f64> {
        self.point_jacobian(&self.mass_moment, q)
    }

    pub fn com_velocity(&self, x: &State) -> Vector2<f64> {
        self.point_velocity(&self.mass_moment, x) / self.total_mass
    }

    /// Center-of-mass acceleration for a given `ddq`.
    pub fn com_acceleration(&self, x: &State, ddq: &Vector5<f64>) -> Vector2<f64> {
        let a = self.absolute_angles(&x.q);
        let da = self.abs_map * x.dq;
        let dda = self.abs_map * ddq;
        let mut acc = Vector2::zeros();
        for j in 0..5 {
            let (s, c) = a[j].sin_cos();
            let m = self.mass_moment[j];
            acc += m * (Vector2::new(c, -s) * dda[j] - Vector2::new(s, c) * da[j] * da[j]);
        }
        acc / self.total_mass
    }

    /// Phase variable `theta(q) = q1 + q2 + q4 / 2`.
    pub fn theta(q: &Vector5<f64>) -> f64 {
        q[0] + q[1] + 0.5 * q[3]
    }

    pub fn theta_rate(dq: &Vector5<f64>) -> f64 {
        dq[0] + dq[1] + 0.5 * dq[3]
    }

    pub fn theta_gradient() -> Vector5<f64> {
        Vector5::from_column_slice(&THETA_GRADIENT)
    }

    /// Angular momentum about the stance toe, `D_1(q) dq`.
    pub fn stance_momentum(&self, x: &State) -> f64 {
        let d = self.mass_matrix(&x.q);
        d.row(0).transpose().dot(&x.dq)
    }

    /// `zeta = (D_1(q) dq)^2 / 2`.
    pub fn zeta(&self, x: &State) -> f64 {
        let s = self.stance_momentum(x);
        0.5 * s * s
    }

    /// Unconstrained forward dynamics `ddq = D^{-1}(B u - C dq - G)`.
    pub fn forward_dynamics(&self, x: &State, u: &Vector4<f64>) -> Result<Vector5<f64>> {
        let d = self.mass_matrix(&x.q);
        let rhs = self.input_matrix() * u - self.bias_forces(&x.q, &x.dq);
        d.cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| Error::Singular("mass matrix is not positive definite".into()))
    }

    /// Reaction at the stance toe from the center-of-mass acceleration:
    /// `F = m (a_com + g e_y)`.
    pub fn ground_reaction(&self, x: &State, u: &Vector4<f64>) -> Result<GroundForce> {
        let ddq = self.forward_dynamics(x, u)?;
        Ok(self.ground_reaction_with_accel(x, &ddq))
    }

    pub fn ground_reaction_with_accel(&self, x: &State, ddq: &Vector5<f64>) -> GroundForce {
        let a = self.com_acceleration(x, ddq);
        GroundForce { tangential: self.total_mass * a.x, normal: self.total_mass * (a.y + self.params.gravity) }
    }

    /// Swaps the stance and swing legs: `q2 <-> q3`, `q4 <-> q5`. An involution.
    pub fn relabel(v: &Vector5<f64>) -> Vector5<f64> {
        Vector5::new(v[0], v[2], v[1], v[4], v[3])
    }

    /// Plastic impact at swing-toe touchdown followed by leg relabeling.
    ///
    /// The pinned chain is extended by the stance toe position `(p_x, p_y)`;
    /// the post-impact velocity and toe impulse come from the block solve
    /// `[D_e  -J^T; J  0] [dq_e+; F] = [D_e dq_e-; 0]` where `J` is the
    /// touchdown toe Jacobian.
    pub fn impact(&self, x_minus: &State) -> Result<ImpactResult> {
        let q = &x_minus.q;
        let m_tot = self.total_mass;
        let d = self.mass_matrix(q);
        let w = self.point_jacobian(&self.mass_moment, q);
        let e = self.point_jacobian(&self.swing_toe, q);
        let mut kkt = SMatrix::<f64, 9, 9>::zeros();
        kkt.fixed_view_mut::<5, 5>(0, 0).copy_from(&d);
        kkt.fixed_view_mut::<5, 2>(0, 5).copy_from(&w.transpose());
        kkt.fixed_view_mut::<2, 5>(5, 0).copy_from(&w);
        kkt[(5, 5)] = m_tot;
        kkt[(6, 6)] = m_tot;
        // constraint rows: J = [E, I]
        kkt.fixed_view_mut::<2, 5>(7, 0).copy_from(&e);
        kkt[(7, 5)] = 1.0;
        kkt[(8, 6)] = 1.0;
        kkt.fixed_view_mut::<5, 2>(0, 7).copy_from(&(-e.transpose()));
        kkt[(5, 7)] = -1.0;
        kkt[(6, 8)] = -1.0;

        let mut rhs = SVector::<f64, 9>::zeros();
        let p = d * x_minus.dq;
        rhs.fixed_rows_mut::<5>(0).copy_from(&p);
        let lin = w * x_minus.dq;
        rhs[5] = lin.x;
        rhs[6] = lin.y;

        let lu = kkt.lu();
        let sol = lu
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("impact system is singular".into()))?;
        let growth = sol.amax() / (rhs.amax().max(1e-300) / kkt.amax());
        if !growth.is_finite() || growth > 1e12 {
            return Err(Error::Singular("impact system is ill-conditioned".into()));
        }
        let dq_plus: Vector5<f64> = sol.fixed_rows::<5>(0).into_owned();
        Ok(ImpactResult {
            post: State::new(Self::relabel(q), Self::relabel(&dq_plus)),
            impulse: Vector2::new(sol[7], sol[8]),
            liftoff_velocity: Vector2::new(sol[5], sol[6]),
        })
    }

    /// Post-impact state, failing when the impact is physically invalid.
    pub fn impact_map(&self, x_minus: &State) -> Result<State> {
        let r = self.impact(x_minus)?;
        if !r.is_valid() {
            return Err(Error::InvalidImpact(format!(
                "liftoff vertical velocity {:.3e}, normal impulse {:.3e}",
                r.liftoff_velocity.y, r.impulse.y
            )));
        }
        Ok(r.post)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn biped() -> Biped {
        Biped::new(ModelParams::default()).unwrap()
    }

    #[test]
    fn mass_matrix_symmetric_at_origin() {
        let b = biped();
        let d = b.mass_matrix(&Vector5::zeros());
        assert_eq!((d - d.transpose()).amax(), 0.0);
    }

    #[test]
    fn theta_is_zero_at_zero() {
        assert_eq!(Biped::theta(&Vector5::zeros()), 0.0);
    }

    #[test]
    fn symmetric_double_support_has_zero_foot_height() {
        let b = biped();
        // stance virtual leg at +0.2 rad, swing virtual leg at -0.2 rad, knees 0.3
        let (phi, k, torso) = (0.2, 0.3, 0.1);
        let q = Vector5::new(torso, phi - 0.5 * k - torso, -phi - 0.5 * k - torso, k, k);
        assert_relative_eq!(Biped::theta(&q), phi, epsilon = 1e-15);
        assert!(b.swing_foot_height(&q).abs() < 1e-15);
    }

    #[test]
    fn standing_straight_heights() {
        let b = biped();
        let q = Vector5::zeros();
        assert_relative_eq!(b.hip_position(&q).y, 0.8, epsilon = 1e-15);
        assert_relative_eq!(b.swing_foot_height(&q), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn relabel_is_an_involution() {
        let v = Vector5::new(1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(Biped::relabel(&Biped::relabel(&v)), v);
    }

    #[test]
    fn rest_stays_at_rest_through_impact() {
        let b = biped();
        let q = Vector5::new(0.1, 0.05, -0.45, 0.3, 0.3);
        let r = b.impact(&State::new(q, Vector5::zeros())).unwrap();
        assert!(r.post.dq.amax() < 1e-14);
        assert_eq!(r.post.q, Biped::relabel(&q));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ModelParams { friction_limit: 1.5, ..ModelParams::default() };
        assert!(matches!(Biped::new(p), Err(Error::InvalidParams(_))));
        let mut p = ModelParams::default();
        p.torso.mass = 0.0;
        assert!(Biped::new(p).is_err());
    }

    #[test]
    fn static_posture_reaction_is_weight() {
        let b = biped();
        // rotate the whole posture about the toe until the COM sits above it
        let mut q = Vector5::new(0.05, -0.1, 0.3, 0.2, 0.4);
        for _ in 0..50 {
            let c = b.center_of_mass(&q);
            q[0] -= c.x / c.y;
        }
        let x = State::new(q, Vector5::zeros());
        let u = b.gravity_vector(&q).fixed_rows::<4>(1).into_owned();
        let f = b.ground_reaction(&x, &u).unwrap();
        assert!(f.tangential.abs() < 1e-6);
        assert_relative_eq!(f.normal, b.total_mass() * 9.81, epsilon = 1e-6);
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
[model]
gravity_mps2 = 9.81
torque_limit_nm = 100.0
friction_limit = 0.8
min_normal_force_n = 100.0
[model.torso]
mass_kg = 12.0
length_m = 0.625
com_offset_m = 0.24
inertia_kgm2 = 1.33
[model.thigh]
mass_kg = 6.8
length_m = 0.4
com_offset_m = 0.11
inertia_kgm2 = 0.47
[model.shank]
mass_kg = 3.2
length_m = 0.4
com_offset_m = 0.24
inertia_kgm2 = 0.2
"#;
        let p = ModelParams::from_toml_str(text).unwrap();
        assert_eq!(p, ModelParams::default());
        assert_eq!(p.fingerprint(), ModelParams::default().fingerprint());
    }
}
