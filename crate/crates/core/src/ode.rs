//! Dormand–Prince 5(4) integration with downward zero-crossing location.

use nalgebra::SVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    /// Event function threshold for the located crossing.
    pub event: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10, event: 1e-13, max_steps: 200_000 }
    }
}

impl Tolerances {
    pub fn with_tol(tol: f64) -> Self {
        Self { abs: tol, rel: tol, ..Self::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// A single accepted sample of the solution.
#[derive(Debug, Clone)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub y: SVector<f64, N>,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    /// Accepted samples including the initial point and, when an event
    /// fired, the located event point as the last entry.
    pub samples: Vec<Sample<N>>,
    pub event: bool,
    pub rhs_evals: usize,
    /// Steps rejected by the error controller.
    pub rejected_steps: usize,
}

struct Stepper<'a, const N: usize, F> {
    rhs: &'a mut F,
    evals: usize,
}

impl<'a, const N: usize, F> Stepper<'a, N, F>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    fn eval(&mut self, t: f64, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        self.evals += 1;
        let d = (self.rhs)(t, y)?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!("non-finite derivative at t = {t}")));
        }
        Ok(d)
    }

    /// One Dormand–Prince step; returns the 5th-order solution, the last
    /// stage (derivative at the new point) and the scaled error norm.
    fn step(
        &mut self,
        t: f64,
        y: &SVector<f64, N>,
        k1: &SVector<f64, N>,
        h: f64,
        tol: &Tolerances,
    ) -> Result<(SVector<f64, N>, SVector<f64, N>, f64)> {
        let mut k: [SVector<f64, N>; 7] = [*k1; 7];
        for s in 1..7 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    yi += kj * (h * a);
                }
            }
            if s == 6 {
                // FSAL: stage 7 is evaluated at the propagated solution
                k[6] = self.eval(t + h, &yi)?;
                let mut err = SVector::<f64, N>::zeros();
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        err += kj * (h * E[j]);
                    }
                }
                let mut acc = 0.0;
                for i in 0..N {
                    let sc = tol.abs + tol.rel * y[i].abs().max(yi[i].abs());
                    let r = err[i] / sc;
                    acc += r * r;
                }
                let norm = (acc / N as f64).sqrt();
                return Ok((yi, k[6], norm));
            }
            k[s] = self.eval(t + C[s] * h, &yi)?;
        }
        unreachable!()
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` until `event(y)` crosses zero
/// from above, or `t_max` is reached.
///
/// The crossing is bracketed by an accepted step and refined by re-stepping
/// from the left end of the bracket with a shortened step (Illinois
/// regula falsi), so the located point carries the same local accuracy as any
/// other sample.
pub fn integrate_to_event<const N: usize, F, G>(
    mut rhs: F,
    event: G,
    t0: f64,
    y0: SVector<f64, N>,
    t_max: f64,
    tol: &Tolerances,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    G: Fn(&SVector<f64, N>) -> f64,
{
    let mut st = Stepper { rhs: &mut rhs, evals: 0 };
    let mut samples = vec![Sample { t: t0, y: y0 }];
    let mut t = t0;
    let mut y = y0;
    let mut k1 = st.eval(t, &y)?;
    let mut g_prev = event(&y);
    let mut h = initial_step(&y, &k1, tol).min(t_max - t0);
    let h_min = 1e-14 * (1.0 + t0.abs());
    let mut rejected = 0usize;

    for _ in 0..tol.max_steps {
        if t >= t_max {
            return Ok(Solution { samples, event: false, rhs_evals: st.evals, rejected_steps: rejected });
        }
        h = h.min(t_max - t);
        let (y_new, k_new, err) = st.step(t, &y, &k1, h, tol)?;
        let g_new = event(&y_new);
        // A bracketing trial goes to location even if its own error is too
        // large: the crossing may sit on a kink of the right-hand side that
        // the shortened steps no longer straddle.
        if g_prev > 0.0 && g_new <= 0.0 {
            let (tc, yc, err_c) = locate(&mut st, t, &y, &k1, h, g_prev, g_new, &event, tol)?;
            if err_c <= 1.0 || err <= 1.0 {
                samples.push(Sample { t: tc, y: yc });
                return Ok(Solution { samples, event: true, rhs_evals: st.evals, rejected_steps: rejected });
            }
        }
        if err > 1.0 {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < h_min {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
            continue;
        }
        t += h;
        y = y_new;
        k1 = k_new;
        g_prev = g_new;
        samples.push(Sample { t, y });
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Err(Error::Integration(format!("exceeded {} steps", tol.max_steps)))
}

#[allow(clippy::too_many_arguments)]
fn locate<const N: usize, F, G>(
    st: &mut Stepper<'_, N, F>,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    h: f64,
    g_left: f64,
    g_right: f64,
    event: &G,
    tol: &Tolerances,
) -> Result<(f64, SVector<f64, N>, f64)>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    G: Fn(&SVector<f64, N>) -> f64,
{
    let (mut lo, mut hi) = (0.0, h);
    let (mut g_lo, mut g_hi) = (g_left, g_right);
    let mut best = None;
    let mut side = 0i8;
    for _ in 0..200 {
        let mut hm = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(hm > lo && hm < hi) {
            hm = 0.5 * (lo + hi);
        }
        let (ym, _, err) = st.step(t, y, k1, hm, tol)?;
        let gm = event(&ym);
        best = Some((t + hm, ym, err));
        if gm.abs() < tol.event || (hi - lo) < 1e-15 * (1.0 + t.abs()) {
            break;
        }
        if gm > 0.0 {
            lo = hm;
            g_lo = gm;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = hm;
            g_hi = gm;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    best.ok_or_else(|| Error::Integration("event location failed".into()))
}

fn initial_step<const N: usize>(y: &SVector<f64, N>, dy: &SVector<f64, N>, tol: &Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).min(1e-2)
    }
}
