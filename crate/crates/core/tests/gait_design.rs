mod common;

use common::*;
use hzd_gaits::continuum::{self, speed_sensitivity};
use hzd_gaits::limit_cycle::{self, state_distance};
use hzd_gaits::sim::{self, SimConfig};
use hzd_gaits::zero_dynamics;
use nalgebra::{RowVector4, Vector4};

#[test]
fn exact_root_returns_after_one_evaluation() {
    let m = model();
    let rec = base_record();
    let fp = limit_cycle::fixed_point_solve(&base_gait(), &m, &SimConfig::default(), &rec.fixed_point).unwrap();
    assert_eq!(fp.iterations, 1);
    assert!(fp.residual < 1e-10);
    assert!(state_distance(&fp.x, &rec.fixed_point) == 0.0);
}

#[test]
fn base_gait_is_certified() {
    let m = model();
    let rec = base_record();
    assert!(rec.certification_failures(&m).is_empty(), "{:?}", rec.certification_failures(&m));
    assert!(rec.fixed_point_residual < 1e-8);
    assert!(rec.delta_sq > 0.0 && rec.delta_sq < 1.0);
    assert!(
        rec.zeta_star > rec.k_max / rec.delta_sq,
        "zeta* {} vs K/delta^2 {}",
        rec.zeta_star,
        rec.k_max / rec.delta_sq
    );
    assert!((rec.speed - 0.75).abs() < 0.02, "speed {}", rec.speed);
    assert!(rec.spectrum.spectral_radius < 1.0);
    // the full-order dominant eigenvalue is the reduced-map rate
    assert!((rec.spectrum.spectral_radius - rec.delta_sq).abs() < 1e-3);
}

#[test]
fn surface_solve_agrees_with_full_newton() {
    let m = model();
    let rec = base_record();
    let fp = limit_cycle::fixed_point_on_surface(&base_gait(), &m, &SimConfig::default(), 0.8 * rec.zeta_star).unwrap();
    assert!(state_distance(&fp.x, &rec.fixed_point) < 1e-8);
}

#[test]
fn zeta_star_arithmetic() {
    assert_eq!(limit_cycle::zeta_star(0.5, -60.0), 120.0);
    let fit = limit_cycle::ReducedMapFit { delta_sq: 0.5, v_minus: -60.0, affinity_residual: 0.0, samples: vec![] };
    assert_eq!(fit.apply(fit.zeta_star()), fit.zeta_star());
}

#[test]
fn reduced_map_is_affine_in_zeta() {
    let m = model();
    let g = base_gait().with_beta(Vector4::new(0.02, -0.01, 0.01, 0.015));
    let fit = limit_cycle::fit_reduced_map(&g, &m, &SimConfig::default(), base_record().zeta_star, 5).unwrap();
    assert!(fit.affinity_residual < 1e-8);
    // every pair of samples defines the same line
    for i in 0..5 {
        for j in (i + 1)..5 {
            let (a, b) = (fit.samples[i], fit.samples[j]);
            let slope = (b.1 - a.1) / (b.0 - a.0);
            let v = slope * a.0 - a.1;
            assert!(rel_err(slope, fit.delta_sq) < 1e-8, "pair ({i},{j}) slope {slope}");
            assert!(rel_err(v, fit.v_minus) < 1e-8, "pair ({i},{j}) V {v}");
        }
    }
    assert!((fit.delta_sq - base_record().delta_sq).abs() < 1e-6);
}

#[test]
fn potential_profile_matches_the_fit() {
    let m = model();
    let fam = small_family();
    for rec in &fam.members {
        let prof = zero_dynamics::v_profile(&fam.gait(rec.index), &m, zero_dynamics::DEFAULT_INTERVALS);
        assert_eq!(prof.v[0], 0.0);
        assert!(prof.v.len() > 1000);
        assert!(
            rel_err(prof.v_minus(), rec.v_minus) < 1e-8,
            "gait {}: {} vs {}",
            rec.index,
            prof.v_minus(),
            rec.v_minus
        );
        assert_eq!(prof.k_max(), rec.k_max);
    }
}

#[test]
fn pseudoinverse_step_signs() {
    let m = model();
    let rec = base_record();
    let g = base_gait();
    let cfg = SimConfig::default();
    let j = speed_sensitivity(&g, &rec.fixed_point, &m, &cfg).unwrap();
    assert_eq!(continuum::beta_for_speed(rec.speed, rec.speed, &j).unwrap(), Vector4::zeros());
    assert!(continuum::beta_for_speed(0.8, 0.75, &RowVector4::zeros()).is_err());
    let faster = continuum::beta_for_speed(rec.speed + 0.02, rec.speed, &j).unwrap();
    let r = limit_cycle::analyze_gait(1, &g.with_beta(faster), &m, &cfg, rec.zeta_star).unwrap();
    assert!(r.certification_failures(&m).is_empty());
    assert!(r.speed > rec.speed, "{} not faster than {}", r.speed, rec.speed);
}

#[test]
fn small_family_properties() {
    let fam = small_family();
    let rep = fam.report();
    let base = &fam.members[fam.base_index];
    assert!(fam.len() >= 5);
    assert_eq!(base.beta, [0.0; 4]);
    assert!(rep.speed_strictly_increasing);
    assert!(rep.max_gap <= 0.01);
    assert!(rep.delta_sq_spread < 1e-6);
    assert!(rep.zeta_star_closure < 1e-8);
    assert!(rep.affinity_residual < 1e-8);
    assert!(rep.fixed_point_residual < 1e-8);
    assert!(rep.theta_plus_spread < 1e-8 && rep.theta_minus_spread < 1e-8);
    assert!(rep.step_length_spread < 1e-8);
    assert!(rep.spectral_radius_max < 1.0);
    assert!(rep.sign_property && rep.ordering_property);
}

#[test]
fn fixed_points_depend_continuously_on_beta() {
    let fam = small_family();
    let mut worst = 0.0f64;
    for a in &fam.members {
        for b in &fam.members {
            if a.index == b.index {
                continue;
            }
            let db = (a.beta_vector() - b.beta_vector()).norm();
            worst = worst.max(state_distance(&a.fixed_point, &b.fixed_point) / db);
        }
    }
    assert!(worst.is_finite() && worst > 0.0);
    // the measured constant also bounds a fresh member between neighbors
    let m = model();
    let (a, b) = (&fam.members[fam.base_index], &fam.members[fam.base_index + 1]);
    let mid = 0.5 * (a.beta_vector() + b.beta_vector());
    let fp =
        limit_cycle::fixed_point_solve(&fam.gait(a.index).with_beta(mid), &m, &SimConfig::default(), &a.fixed_point)
            .unwrap();
    let d = state_distance(&fp.x, &a.fixed_point);
    assert!(d <= 1.5 * worst * (mid - a.beta_vector()).norm(), "distance {d} vs L = {worst}");
}

#[test]
fn continuum_rejects_bad_ranges() {
    let m = model();
    let opts = continuum::ContinuumOptions { speed_lo: 0.8, speed_hi: 0.7, ..Default::default() };
    assert!(continuum::generate_continuum(&base_gait(), base_record(), &m, &SimConfig::default(), &opts).is_err());
    let modulated = base_gait().with_beta(Vector4::new(0.01, 0.0, 0.0, 0.0));
    let ok = continuum::ContinuumOptions::default();
    assert!(continuum::generate_continuum(&modulated, base_record(), &m, &SimConfig::default(), &ok).is_err());
}

#[test]
fn surface_state_has_requested_zeta_and_touchdown() {
    let m = model();
    let g = base_gait();
    let x = sim::surface_state(&g, &m, 200.0).unwrap();
    assert!(rel_err(m.zeta(&x), 200.0) < 1e-12);
    assert!(m.swing_foot_height(&x.q).abs() < 1e-12);
    assert!(sim::surface_state(&g, &m, -1.0).is_err());
}
