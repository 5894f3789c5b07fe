//! Dense dual active-set solver for small strictly convex QPs
//!
//! ```text
//! minimize  0.5 x' H x + g' x   subject to  A x <= b
//! ```
//!
//! Follows the Goldfarb–Idnani scheme: start from the unconstrained minimum
//! and repeatedly add the most violated constraint, dropping active ones
//! whose multipliers would turn negative. No feasible starting point is
//! needed and infeasibility is detected when a violated row cannot be
//! satisfied by any multiplier step. The KKT systems are re-solved from
//! scratch each iteration; problems here have a handful of variables.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per inequality row (zero for inactive rows).
    pub lambda: DVector<f64>,
    pub active: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
}

impl QpSolution {
    /// Largest violation among stationarity, primal feasibility, dual
    /// feasibility and complementarity.
    pub fn kkt_residual(&self, h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        let stat = (h * &self.x + g + a.transpose() * &self.lambda).amax();
        let slack = a * &self.x - b;
        let primal = slack.iter().fold(0.0f64, |m, &s| m.max(s));
        let dual = self.lambda.iter().fold(0.0f64, |m, &l| m.max(-l));
        let comp = slack.iter().zip(self.lambda.iter()).fold(0.0f64, |m, (s, l)| m.max((s * l).abs()));
        stat.max(primal).max(dual).max(comp)
    }
}

pub fn solve(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> QpSolution {
    let n = g.len();
    let m = b.len();
    let h_inv = h.clone().try_inverse().expect("QP Hessian must be positive definite");
    let mut x = -&h_inv * g;
    let mut lambda = DVector::zeros(m);
    let mut active: Vec<usize> = Vec::new();
    let mut iterations = 0;
    let max_iter = 50 * (m + n) + 50;

    let finish = |x, lambda, active, status, iterations| QpSolution { x, lambda, active, status, iterations };

    loop {
        // most violated constraint
        let mut p = None;
        let mut worst = tol;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let s = a.row(i).dot(&x.transpose()) - b[i];
            let scale = 1.0 + a.row(i).amax() + b[i].abs();
            if s / scale > worst {
                worst = s / scale;
                p = Some(i);
            }
        }
        let Some(p) = p else {
            return finish(x, lambda, active, QpStatus::Optimal, iterations);
        };
        let ap: DVector<f64> = a.row(p).transpose();
        loop {
            iterations += 1;
            if iterations > max_iter {
                return finish(x, lambda, active, QpStatus::IterationLimit, iterations);
            }
            let (z, r) = step_directions(h, &h_inv, a, &active, &ap);
            let s_p = ap.dot(&x) - b[p];
            // partial (dual) step limit
            let mut t1 = f64::INFINITY;
            let mut blocking = None;
            for (j, &idx) in active.iter().enumerate() {
                if r[j] > 1e-14 {
                    let t = lambda[idx] / r[j];
                    if t < t1 {
                        t1 = t;
                        blocking = Some(j);
                    }
                }
            }
            let zz = ap.dot(&z);
            let dependent = z.amax() <= 1e-12 * (1.0 + ap.amax());
            if dependent {
                let Some(j) = blocking else {
                    return finish(x, lambda, active, QpStatus::Infeasible, iterations);
                };
                for (k, &idx) in active.iter().enumerate() {
                    lambda[idx] -= t1 * r[k];
                }
                lambda[p] += t1;
                let idx = active.remove(j);
                lambda[idx] = 0.0;
                continue;
            }
            let t2 = if zz < 0.0 { s_p / -zz } else { f64::INFINITY };
            let t = t1.min(t2);
            x += &z * t;
            for (k, &idx) in active.iter().enumerate() {
                lambda[idx] -= t * r[k];
            }
            lambda[p] += t;
            if t2 <= t1 {
                active.push(p);
                break;
            }
            let j = blocking.expect("finite partial step implies a blocking constraint");
            let idx = active.remove(j);
            lambda[idx] = 0.0;
        }
    }
}

/// Primal direction `z` and active-multiplier direction `r` for adding row
/// `ap`: `H z - A_W' r = -ap`, `A_W z = 0`.
fn step_directions(
    h: &DMatrix<f64>,
    h_inv: &DMatrix<f64>,
    a: &DMatrix<f64>,
    active: &[usize],
    ap: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n = ap.len();
    let k = active.len();
    if k == 0 {
        return (-(h_inv * ap), DVector::zeros(0));
    }
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    for (j, &idx) in active.iter().enumerate() {
        for c in 0..n {
            kkt[(n + j, c)] = a[(idx, c)];
            kkt[(c, n + j)] = -a[(idx, c)];
        }
    }
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-ap));
    match kkt.lu().solve(&rhs) {
        Some(sol) => (sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()),
        None => (DVector::zeros(n), DVector::zeros(k)),
    }
}
