mod common;

use common::*;
use hzd_gaits::continuum::beta_for_speed;
use hzd_gaits::supervisor::{SpeedSchedule, Trigger};
use hzd_gaits::switching::{self, SwitchGraph};
use hzd_gaits::Biped;
use nalgebra::{RowVector4, Vector5};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dwell_bound_is_enough_steps(z_from in 50.0f64..400.0, z_to in 50.0f64..400.0, delta_sq in 0.05f64..0.95, eps in 0.1f64..10.0) {
        let n = switching::dwell_time_bound(z_from, z_to, delta_sq, eps).unwrap();
        prop_assert!(n >= 1);
        // the target's affine map contracts the gap by delta_sq per step
        let err = (z_from - z_to).abs() * delta_sq.powi(n as i32);
        prop_assert!(err < eps, "after {} steps the gap is {} >= {}", n, err, eps);
    }

    #[test]
    fn dwell_bound_monotone(gap in 0.0f64..300.0, extra in 0.0f64..50.0, delta_sq in 0.05f64..0.95, eps in 0.1f64..10.0) {
        let a = switching::dwell_time_bound(100.0, 100.0 + gap, delta_sq, eps).unwrap();
        let b = switching::dwell_time_bound(100.0, 100.0 + gap + extra, delta_sq, eps).unwrap();
        prop_assert!(b >= a);
        let wider = switching::dwell_time_bound(100.0, 100.0 + gap, delta_sq, eps * 2.0).unwrap();
        prop_assert!(wider <= a);
    }

    #[test]
    fn boundedness_verdict_is_the_threshold_test(
        zetas in prop::collection::vec(10.0f64..500.0, 1..20),
        ks in prop::collection::vec(1.0f64..200.0, 20),
        delta_sq in 0.1f64..0.95,
    ) {
        let ks = &ks[..zetas.len()];
        let v = switching::boundedness_check_values(&zetas, ks, delta_sq).unwrap();
        let lb = zetas.iter().copied().fold(f64::INFINITY, f64::min);
        let k = ks.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(v.pass, lb >= k / delta_sq);
        prop_assert!((v.margin - (lb - k / delta_sq)).abs() < 1e-9);
        prop_assert_eq!(v.offending.is_empty(), v.pass);
    }

    #[test]
    fn planned_costs_obey_the_triangle_inequality(seed in any::<u64>(), n in 3usize..9) {
        let mut r = rng(seed);
        use rand::Rng;
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b)
            .filter(|_| r.random_bool(0.4))
            .map(|(a, b)| (a, b, 1 + (a * 7 + b * 3) % 9))
            .collect();
        let g = SwitchGraph::from_weights(n, &edges);
        let cost = |a: usize, b: usize| switching::plan_path(&g, a, b).ok().map(|p| p.total_steps);
        for a in 0..n {
            prop_assert_eq!(cost(a, a), Some(0));
            for b in 0..n {
                for c in 0..n {
                    if let (Some(ab), Some(bc)) = (cost(a, b), cost(b, c)) {
                        let ac = cost(a, c);
                        prop_assert!(ac.is_some_and(|ac| ac <= ab + bc));
                    }
                }
            }
        }
    }

    #[test]
    fn step_schedules_round_trip(steps in prop::collection::btree_set(0usize..10_000, 1..8), speed in 0.3f64..1.2) {
        let text: Vec<String> = steps.iter().map(|s| format!("{s}:{speed}")).collect();
        let sched = SpeedSchedule::parse(&text.join(", ")).unwrap();
        let got: Vec<usize> = sched.entries.iter().map(|e| match e.trigger {
            Trigger::Step(s) => s,
            Trigger::Time(_) => usize::MAX,
        }).collect();
        prop_assert_eq!(got, steps.into_iter().collect::<Vec<_>>());
        prop_assert!(sched.entries.iter().all(|e| e.speed == speed));
    }

    #[test]
    fn pseudoinverse_hits_the_requested_speed_change(j in prop::array::uniform4(-2.0f64..2.0), dv in -0.2f64..0.2) {
        let j = RowVector4::from(j);
        prop_assume!(j.norm() > 1e-3);
        let beta = beta_for_speed(0.75 + dv, 0.75, &j).unwrap();
        prop_assert!(((j * beta)[0] - dv).abs() < 1e-12);
        // minimum norm: beta is parallel to the sensitivity row
        prop_assert!((beta.norm() * j.norm() - (j * beta)[0].abs()).abs() < 1e-12);
    }

    #[test]
    fn relabeling_is_an_involution(q in prop::array::uniform5(-3.0f64..3.0)) {
        let q = Vector5::from(q);
        prop_assert_eq!(Biped::relabel(&Biped::relabel(&q)), q);
    }

    #[test]
    fn mass_matrix_positive_definite(q in prop::array::uniform5(-3.2f64..3.2)) {
        let d = model().mass_matrix(&Vector5::from(q));
        prop_assert_eq!(d, d.transpose());
        prop_assert!(d.cholesky().is_some());
    }

    #[test]
    fn outputs_vanish_on_the_constraint_curve(s in 0.0f64..1.0, beta in prop::array::uniform4(-0.2f64..0.2)) {
        let g = base_gait().with_beta(nalgebra::Vector4::from(beta));
        let theta = g.base.theta_plus + s * (g.base.theta_minus - g.base.theta_plus);
        let (q, _, _) = g.configuration(theta);
        prop_assert!(g.output(&q).amax() < 1e-12);
        prop_assert!((Biped::theta(&q) - theta).abs() < 1e-12);
    }
}
