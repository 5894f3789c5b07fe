//! Phase-based virtual constraints.
//!
//! The controlled outputs are `y = q_a - h_d(theta) - beta * b(theta)` with
//! `q_a = (q2, q3, q4, q5)`, a Bézier base trajectory `h_d` and a shared
//! quintic bump `b` that vanishes (with its slope) at the start of the step
//! and (with two derivatives) from 90% of the step onward. The modulation
//! therefore leaves the outputs untouched around the impact, which keeps the
//! zero-dynamics surface hybrid invariant for every `beta`.

use nalgebra::{Cholesky, Matrix4, SMatrix, Vector4, Vector5, U5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Biped, Matrix5x4, State};

pub type Matrix4x5 = SMatrix<f64, 4, 5>;

/// Fraction of the step after which the bump is identically zero.
pub const BUMP_END_FRACTION: f64 = 0.9;

/// Base virtual constraints `h_d(theta)` as a Bézier polynomial in the
/// normalized phase `s = (theta - theta_plus) / (theta_minus - theta_plus)`.
///
/// `coefficients[k]` holds the k-th control point for the four actuated
/// joints; the degree is `coefficients.len() - 1`. Evaluation outside
/// `[0, 1]` extrapolates the polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierOutputs {
    pub coefficients: Vec<[f64; 4]>,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl BezierOutputs {
    pub fn new(coefficients: Vec<[f64; 4]>, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        if coefficients.len() < 3 {
            return Err(Error::InvalidArgument("Bézier degree must be at least 2".into()));
        }
        if !(theta_minus - theta_plus).is_normal() {
            return Err(Error::DegenerateInterval(theta_plus));
        }
        Ok(Self { coefficients, theta_plus, theta_minus })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn phase(&self, theta: f64) -> f64 {
        (theta - self.theta_plus) / (self.theta_minus - self.theta_plus)
    }

    fn column(&self, k: usize) -> Vector4<f64> {
        Vector4::from(self.coefficients[k])
    }

    /// Value and first two derivatives with respect to `theta`.
    pub fn eval(&self, theta: f64) -> (Vector4<f64>, Vector4<f64>, Vector4<f64>) {
        let m = self.degree();
        let s = self.phase(theta);
        let span = self.theta_minus - self.theta_plus;
        let bern = |n: usize, k: usize| -> f64 { binomial(n, k) * s.powi(k as i32) * (1.0 - s).powi((n - k) as i32) };
        let mut h = Vector4::zeros();
        for k in 0..=m {
            h += self.column(k) * bern(m, k);
        }
        let mut dh = Vector4::zeros();
        for k in 0..m {
            dh += (self.column(k + 1) - self.column(k)) * bern(m - 1, k);
        }
        dh *= m as f64 / span;
        let mut ddh = Vector4::zeros();
        for k in 0..m - 1 {
            ddh += (self.column(k + 2) - 2.0 * self.column(k + 1) + self.column(k)) * bern(m - 2, k);
        }
        ddh *= (m * (m - 1)) as f64 / (span * span);
        (h, dh, ddh)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Quintic bump `b(theta)` on `[theta_plus, theta_s]`, zero afterwards.
///
/// Coefficients are monomial in `r = (theta - theta_plus) / (theta_s - theta_plus)`
/// and scaled so that the peak of `|b|` on the interval is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpPolynomial {
    pub coefficients: [f64; 6],
    pub theta_plus: f64,
    pub theta_s: f64,
}

impl BumpPolynomial {
    /// Null space of the five boundary conditions
    /// `b(θ+) = b'(θ+) = 0`, `b(θs) = b'(θs) = b''(θs) = 0`.
    pub fn build(theta_plus: f64, theta_minus: f64) -> Result<Self> {
        let span = theta_minus - theta_plus;
        if !span.is_normal() || !theta_plus.is_finite() {
            return Err(Error::DegenerateInterval(theta_plus));
        }
        let theta_s = theta_plus + BUMP_END_FRACTION * span;
        // rows: value/derivatives at r = 0 and r = 1 for monomials r^0..r^5
        let mut conds = SMatrix::<f64, 6, 6>::zeros();
        conds[(0, 0)] = 1.0;
        conds[(1, 1)] = 1.0;
        for k in 0..6 {
            let kf = k as f64;
            conds[(2, k)] = 1.0;
            conds[(3, k)] = kf;
            conds[(4, k)] = kf * (kf - 1.0);
        }
        // the sixth row stays zero so the SVD exposes all six right singular vectors
        let svd = conds.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Singular("bump null space".into()))?;
        let idx = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(5);
        let mut c = [0.0; 6];
        for k in 0..6 {
            c[k] = v_t[(idx, k)];
        }
        let mut bump = Self { coefficients: c, theta_plus, theta_s };
        let (_, peak) = bump.peak();
        for v in bump.coefficients.iter_mut() {
            *v /= peak;
        }
        Ok(bump)
    }

    fn poly(&self, r: f64) -> (f64, f64, f64) {
        let c = &self.coefficients;
        let mut p = 0.0;
        let mut dp = 0.0;
        let mut ddp = 0.0;
        for k in (0..6).rev() {
            ddp = ddp * r + 2.0 * dp;
            dp = dp * r + p;
            p = p * r + c[k];
        }
        (p, dp, ddp)
    }

    /// Location and signed value of the extremum of largest magnitude on `[0, 1]`.
    fn peak(&self) -> (f64, f64) {
        let n = 1000;
        let (mut best_r, mut best) = (0.0, 0.0f64);
        for i in 0..=n {
            let r = i as f64 / n as f64;
            let v = self.poly(r).0;
            if v.abs() > best.abs() {
                best = v;
                best_r = r;
            }
        }
        let mut r = best_r;
        for _ in 0..50 {
            let (_, d1, d2) = self.poly(r);
            if d2 == 0.0 {
                break;
            }
            let step = d1 / d2;
            r -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        (r, self.poly(r).0)
    }

    /// Value and first two derivatives with respect to `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        if theta >= self.theta_s {
            return (0.0, 0.0, 0.0);
        }
        let span = self.theta_s - self.theta_plus;
        let r = (theta - self.theta_plus) / span;
        let (p, dp, ddp) = self.poly(r);
        (p, dp / span, ddp / (span * span))
    }
}

/// A gait: base constraints, bump and modulation amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub base: BezierOutputs,
    pub bump: BumpPolynomial,
    /// Bump amplitude per actuated joint (rad).
    pub beta: [f64; 4],
}

impl GaitParams {
    pub fn new(base: BezierOutputs, beta: Vector4<f64>) -> Result<Self> {
        let bump = BumpPolynomial::build(base.theta_plus, base.theta_minus)?;
        Ok(Self { base, bump, beta: beta.into() })
    }

    pub fn with_beta(&self, beta: Vector4<f64>) -> Self {
        Self { beta: beta.into(), ..self.clone() }
    }

    pub fn beta(&self) -> Vector4<f64> {
        Vector4::from(self.beta)
    }

    /// `h_s(theta, beta)` and its first two theta-derivatives.
    pub fn modulation(&self, theta: f64) -> (Vector4<f64>, Vector4<f64>, Vector4<f64>) {
        let (b, db, ddb) = self.bump.eval(theta);
        let beta = self.beta();
        (beta * b, beta * db, beta * ddb)
    }

    /// Desired actuated coordinates `h_d + h_s` and theta-derivatives.
    pub fn desired(&self, theta: f64) -> (Vector4<f64>, Vector4<f64>, Vector4<f64>) {
        let (h, dh, ddh) = self.base.eval(theta);
        let (s, ds, dds) = self.modulation(theta);
        (h + s, dh + ds, ddh + dds)
    }

    /// Configuration on the zero-dynamics surface at phase `theta`, with the
    /// first two theta-derivatives of `q`.
    pub fn configuration(&self, theta: f64) -> (Vector5<f64>, Vector5<f64>, Vector5<f64>) {
        let (h, dh, ddh) = self.desired(theta);
        let lift = |v: Vector4<f64>, base: f64| Vector5::new(base - v[0] - 0.5 * v[2], v[0], v[1], v[2], v[3]);
        (lift(h, theta), lift(dh, 1.0), lift(ddh, 0.0))
    }

    /// `y = q_a - h_d(theta) - h_s(theta, beta)`.
    pub fn output(&self, q: &Vector5<f64>) -> Vector4<f64> {
        let (h, _, _) = self.desired(Biped::theta(q));
        q.fixed_rows::<4>(1) - h
    }

    pub fn output_jacobian(&self, q: &Vector5<f64>) -> Matrix4x5 {
        let (_, dh, _) = self.desired(Biped::theta(q));
        output_jacobian_from_slope(&dh)
    }
}

fn output_jacobian_from_slope(dh: &Vector4<f64>) -> Matrix4x5 {
    let c = Biped::theta_gradient();
    let mut j = Matrix4x5::zeros();
    for r in 0..4 {
        j[(r, r + 1)] = 1.0;
        for k in 0..5 {
            j[(r, k)] -= dh[r] * c[k];
        }
    }
    j
}

/// Condition estimate (1-norm) beyond which the decoupling matrix is
/// treated as singular.
pub const DECOUPLING_COND_LIMIT: f64 = 1e8;

/// Relative-degree-two output quantities at a state, plus the pieces of the
/// forward dynamics the controller reuses.
#[derive(Debug, Clone)]
pub struct LieDerivatives {
    pub y: Vector4<f64>,
    /// `L_f h = (dh/dq) dq`.
    pub lf_h: Vector4<f64>,
    pub lf2_h: Vector4<f64>,
    pub lg_lf_h: Matrix4<f64>,
    pub lg_lf_h_inv: Matrix4<f64>,
    /// Drift acceleration `D^{-1}(-C dq - G)`.
    pub drift_accel: Vector5<f64>,
    /// `D^{-1} B`.
    pub input_accel: Matrix5x4,
    /// 1-norm condition estimate of `L_g L_f h`.
    pub condition: f64,
}

impl LieDerivatives {
    pub fn compute(x: &State, gait: &GaitParams, model: &Biped) -> Result<Self> {
        let d = model.mass_matrix(&x.q);
        let chol = Cholesky::<f64, U5>::new(d)
            .ok_or_else(|| Error::Singular("mass matrix is not positive definite".into()))?;
        let bias = model.bias_forces(&x.q, &x.dq);
        let drift_accel = -chol.solve(&bias);
        let input_accel = chol.solve(&model.input_matrix());

        let theta = Biped::theta(&x.q);
        let dtheta = Biped::theta_rate(&x.dq);
        let (h, dh, ddh) = gait.desired(theta);
        let y = x.q.fixed_rows::<4>(1) - h;
        let jac = output_jacobian_from_slope(&dh);
        let lf_h = jac * x.dq;
        let lf2_h = -ddh * dtheta * dtheta + jac * drift_accel;
        let lg_lf_h = jac * input_accel;
        let lg_lf_h_inv = lg_lf_h.try_inverse().ok_or(Error::DecouplingSingular(f64::INFINITY))?;
        let condition = norm1(&lg_lf_h) * norm1(&lg_lf_h_inv);
        if !condition.is_finite() || condition > DECOUPLING_COND_LIMIT {
            return Err(Error::DecouplingSingular(condition));
        }
        Ok(Self { y, lf_h, lf2_h, lg_lf_h, lg_lf_h_inv, drift_accel, input_accel, condition })
    }
}

fn norm1(m: &Matrix4<f64>) -> f64 {
    (0..4).map(|c| m.column(c).abs().sum()).fold(0.0, f64::max)
}
