mod common;

use common::*;
use hzd_gaits::model::Vector10;
use hzd_gaits::ode::{self, Tolerances};
use hzd_gaits::sim::{self, SimConfig};
use hzd_gaits::{Biped, State};
use nalgebra::{Matrix5, Vector2, Vector4, Vector5};
use rand::Rng;

/// Link centers of mass and their velocities, built link by link from the
/// joint chain starting at the stance toe. Independent of the coefficient
/// tables inside the model.
struct Links {
    com: [Vector2<f64>; 5],
    vel: [Vector2<f64>; 5],
    rate: [f64; 5],
}

fn links(m: &Biped, x: &State) -> Links {
    let p = m.params();
    let (lf, lt) = (p.thigh.length, p.shank.length);
    let (ct, cf, cs) = (p.torso.com_offset, p.thigh.com_offset, p.shank.com_offset);
    let (q, dq) = (x.q, x.dq);
    let ang = [q[0], q[0] + q[1], q[0] + q[2], q[0] + q[1] + q[3], q[0] + q[2] + q[4]];
    let rate = [dq[0], dq[0] + dq[1], dq[0] + dq[2], dq[0] + dq[1] + dq[3], dq[0] + dq[2] + dq[4]];
    let u = |i: usize| Vector2::new(ang[i].sin(), ang[i].cos());
    let du = |i: usize| Vector2::new(ang[i].cos(), -ang[i].sin()) * rate[i];
    let knee = lt * u(3);
    let dknee = lt * du(3);
    let hip = knee + lf * u(1);
    let dhip = dknee + lf * du(1);
    let swing_knee = hip - lf * u(2);
    let dswing_knee = dhip - lf * du(2);
    Links {
        com: [hip + ct * u(0), knee + (lf - cf) * u(1), hip - cf * u(2), (lt - cs) * u(3), swing_knee - cs * u(4)],
        vel: [
            dhip + ct * du(0),
            dknee + (lf - cf) * du(1),
            dhip - cf * du(2),
            (lt - cs) * du(3),
            dswing_knee - cs * du(4),
        ],
        rate,
    }
}

fn masses(m: &Biped) -> [f64; 5] {
    let p = m.params();
    [p.torso.mass, p.thigh.mass, p.thigh.mass, p.shank.mass, p.shank.mass]
}

fn inertias(m: &Biped) -> [f64; 5] {
    let p = m.params();
    [p.torso.inertia, p.thigh.inertia, p.thigh.inertia, p.shank.inertia, p.shank.inertia]
}

#[test]
fn kinetic_energy_matches_link_by_link_sum() {
    let m = model();
    let mut r = rng(11);
    for _ in 0..200 {
        let x = random_state(&mut r);
        let l = links(&m, &x);
        let (ms, is) = (masses(&m), inertias(&m));
        let oracle: f64 = (0..5).map(|i| 0.5 * ms[i] * l.vel[i].norm_squared() + 0.5 * is[i] * l.rate[i].powi(2)).sum();
        let ke = 0.5 * x.dq.dot(&(m.mass_matrix(&x.q) * x.dq));
        assert!(rel_err(ke, oracle) < 1e-10, "KE {ke} vs {oracle}");
    }
}

#[test]
fn potential_energy_and_gravity_match_link_heights() {
    let m = model();
    let mut r = rng(12);
    let g = m.params().gravity;
    for _ in 0..100 {
        let q = random_q(&mut r);
        let l = links(&m, &State::new(q, Vector5::zeros()));
        let oracle: f64 = (0..5).map(|i| masses(&m)[i] * g * l.com[i].y).sum();
        assert!((m.potential_energy(&q) - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
        // with zero rates the bias is the gradient of the potential
        let bias = m.bias_forces(&q, &Vector5::zeros());
        for k in 0..5 {
            let h = 1e-6;
            let mut qp = q;
            qp[k] += h;
            let mut qm = q;
            qm[k] -= h;
            let fd = (m.potential_energy(&qp) - m.potential_energy(&qm)) / (2.0 * h);
            assert!((bias[k] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "dV/dq{k}: {} vs {fd}", bias[k]);
        }
    }
}

#[test]
fn mass_matrix_is_symmetric_positive_definite_on_ten_thousand_samples() {
    let m = model();
    let mut r = rng(13);
    for _ in 0..10_000 {
        let q = Vector5::from_fn(|_, _| r.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let d = m.mass_matrix(&q);
        assert_eq!(d, d.transpose());
        let min_eig = d.symmetric_eigenvalues().min();
        assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
    }
}

#[test]
fn d_dot_minus_two_c_is_skew_symmetric() {
    let m = model();
    let mut r = rng(14);
    for _ in 0..200 {
        let x = State::new(random_q(&mut r), Vector5::from_fn(|_, _| r.random_range(-1.0..1.0)));
        // sixth-order central difference of D along the flow
        let h = 1e-2;
        let d_at = |s: f64| m.mass_matrix(&(x.q + s * x.dq));
        let d_dot: Matrix5<f64> = (d_at(3.0 * h) - 9.0 * d_at(2.0 * h) + 45.0 * d_at(h) - 45.0 * d_at(-h)
            + 9.0 * d_at(-2.0 * h)
            - d_at(-3.0 * h))
            / (60.0 * h);
        let n = d_dot - 2.0 * m.coriolis_matrix(&x.q, &x.dq);
        let val = x.dq.dot(&(n * x.dq));
        let scale = x.dq.dot(&(d_dot * x.dq)).abs().max(1.0);
        assert!(val.abs() < 1e-10 * scale, "qdot'(Ddot - 2C)qdot = {val:e}");
    }
}

#[test]
fn coriolis_and_gravity_assemble_the_bias() {
    let m = model();
    let mut r = rng(15);
    for _ in 0..100 {
        let x = random_state(&mut r);
        let direct = m.coriolis_matrix(&x.q, &x.dq) * x.dq + m.gravity_vector(&x.q);
        assert!((direct - m.bias_forces(&x.q, &x.dq)).amax() < 1e-10 * (1.0 + direct.amax()));
    }
}

#[test]
fn unforced_motion_conserves_energy() {
    let m = model();
    let x0 = State::new(Vector5::new(0.1, 0.2, -0.3, 0.2, 0.4), Vector5::new(0.3, -0.5, 0.8, 0.1, -0.2));
    let rhs = |_t: f64, y: &Vector10<f64>| -> hzd_gaits::Result<Vector10<f64>> {
        let x = State::from_vector(y);
        let ddq = m.forward_dynamics(&x, &Vector4::zeros())?;
        let mut out = Vector10::zeros();
        out.fixed_rows_mut::<5>(0).copy_from(&x.dq);
        out.fixed_rows_mut::<5>(5).copy_from(&ddq);
        Ok(out)
    };
    let sol = ode::integrate_to_event(rhs, |_| 1.0, 0.0, x0.to_vector(), 0.5, &Tolerances::with_tol(1e-10)).unwrap();
    assert!(!sol.event);
    let e0 = m.total_energy(&x0);
    let drift = sol
        .samples
        .iter()
        .map(|s| (m.total_energy(&State::from_vector(&s.y)) - e0).abs() / e0.abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "relative energy drift {drift:e}");
    assert!((sol.samples.last().unwrap().t - 0.5).abs() < 1e-12);
}

#[test]
fn ground_reaction_matches_momentum_rate_plus_weight() {
    let m = model();
    let mut r = rng(16);
    let mass = masses(&m);
    let momentum = |x: &State| -> Vector2<f64> {
        let l = links(&m, x);
        (0..5).fold(Vector2::zeros(), |acc, i| acc + mass[i] * l.vel[i])
    };
    for _ in 0..100 {
        let x = State::new(
            Vector5::new(
                r.random_range(-0.3..0.3),
                r.random_range(-0.4..0.4),
                r.random_range(-0.4..0.4),
                r.random_range(0.0..0.6),
                r.random_range(0.0..0.8),
            ),
            random_dq(&mut r),
        );
        let u = Vector4::from_fn(|_, _| r.random_range(-50.0..50.0));
        let ddq = m.forward_dynamics(&x, &u).unwrap();
        let f = m.ground_reaction(&x, &u).unwrap();
        // second-order Taylor states a time h before and after; the
        // mismatch with the true flow is O(h^2) in the difference quotient
        let h = 1e-5;
        let at = |s: f64| State::new(x.q + s * x.dq + 0.5 * s * s * ddq, x.dq + s * ddq);
        let rate = (momentum(&at(h)) - momentum(&at(-h))) / (2.0 * h);
        let oracle = rate + Vector2::new(0.0, m.total_mass() * m.params().gravity);
        let got = Vector2::new(f.tangential, f.normal);
        assert!((got - oracle).norm() < 1e-6 * oracle.norm(), "{got:?} vs {oracle:?}");
    }
}

#[test]
fn impact_relabels_configuration_and_dissipates() {
    let m = model();
    let g = base_gait();
    let mut r = rng(17);
    let (q, dq_dir, _) = g.configuration(g.base.theta_minus);
    assert!(m.swing_foot_height(&q).abs() < 1e-12);
    for _ in 0..100 {
        let dq = dq_dir * r.random_range(0.5..2.0) + 0.3 * random_dq(&mut r);
        let x = State::new(q, dq);
        if m.swing_foot_velocity(&x).y >= 0.0 {
            continue;
        }
        let imp = m.impact(&x).unwrap();
        assert_eq!(imp.post.q, Biped::relabel(&q));
        assert_eq!(Biped::relabel(&Biped::relabel(&q)), q);
        assert!(m.kinetic_energy(&imp.post) <= m.kinetic_energy(&x) * (1.0 + 1e-12));
        // the lifting toe is the new swing toe
        assert!((m.swing_foot_velocity(&imp.post) - imp.liftoff_velocity).norm() < 1e-9);
        // positions are preserved: the new swing toe sits where the old stance toe was
        let toe = m.swing_foot_position(&imp.post.q);
        let old_swing = m.swing_foot_position(&q);
        assert!((toe + old_swing).norm() < 1e-12);
    }
}

#[test]
fn phase_increases_along_a_nominal_step() {
    let m = model();
    let rec = base_record();
    let step = sim::step_from_pre_impact(&rec.fixed_point, &base_gait(), &m, &SimConfig::default(), true).unwrap();
    assert!(step.samples.windows(2).all(|w| w[1].theta > w[0].theta));
    assert!(step.samples.iter().all(|s| s.force.normal >= 100.0));
}
