//! Headline acceptance run: designs the base gait from scratch, grows the
//! family, certifies switching, builds the graph and flies the speed-change
//! scenario, then prints one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the verdict lines always reach stdout.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use hzd_gaits::config::Config;
use hzd_gaits::pipeline::Pipeline;
use hzd_gaits::supervisor::{StepLog, TransitionSummary};
use hzd_gaits::switching::{self, SwitchGraph};
use hzd_gaits::Error;

const PERIODIC_TOL: f64 = 1e-8;
const AFFINITY_TOL: f64 = 1e-8;
const DELTA_SPREAD_TOL: f64 = 1e-6;
const CLOSURE_TOL: f64 = 1e-8;
const GEOMETRY_TOL: f64 = 1e-8;
const MIN_GAITS: usize = 20;
const SPAN_FRACTION: f64 = 0.15;
const MAX_GAP: f64 = 0.01;
const EXCURSION_TOL: f64 = 1e-6;
const REPLAY_TOL: f64 = 1e-6;
const RANDOM_SIGNALS: usize = 100;
const SIGNAL_STEPS: usize = 1000;
const SPEED_TOL: f64 = 0.01;
const BASE_BUDGET: Duration = Duration::from_secs(600);
const CONTINUUM_BUDGET: Duration = Duration::from_secs(1800);
const SCENARIO_BUDGET: Duration = Duration::from_secs(300);

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(pass);
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn main() -> ExitCode {
    // libtest flags such as `--nocapture` are accepted and ignored; a name
    // filter that does not match skips the run
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            println!("FAIL pipeline: {}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<bool, Error> {
    let dir = tempfile::tempdir()?;
    let mut config = Config::default();
    config.analyze.random_signals = RANDOM_SIGNALS;
    config.analyze.signal_steps = SIGNAL_STEPS;
    let p = Pipeline::new(config, dir.path())?;
    let mut v = Verdicts(Vec::new());

    let t = Instant::now();
    let base = p.design_base()?;
    let base_time = t.elapsed();
    let r = &base.record;
    let limits = p.model().params();
    let constraints_ok = r.margins.violations(p.model()).is_empty();
    v.report(
        "base gait",
        r.fixed_point_residual < PERIODIC_TOL && r.delta_sq < 1.0 && r.spectrum.spectral_radius < 1.0 && constraints_ok && base_time < BASE_BUDGET,
        format!(
            "|P(x*)-x*| = {:.1e} (< {PERIODIC_TOL:.0e}), delta^2 = {:.5}, spectral radius = {:.5}, max torque {:.1} (<= {}), min F_n {:.1} (>= {}), max |F_t|/F_n {:.3} (<= {}), speed {:.4} m/s, {}",
            r.fixed_point_residual, r.delta_sq, r.spectrum.spectral_radius, r.margins.max_torque, limits.torque_limit,
            r.margins.min_normal_force, limits.min_normal_force, r.margins.max_friction_ratio, limits.friction_limit,
            r.speed, secs(base_time)
        ),
    );

    let t = Instant::now();
    let family = p.continuum(None)?;
    let continuum_time = t.elapsed();
    let rep = family.report();
    v.report(
        "affine reduced map",
        rep.affinity_residual < AFFINITY_TOL,
        format!(
            "worst 5-sample residual {:.1e} over {} gaits (< {AFFINITY_TOL:.0e})",
            rep.affinity_residual, rep.gaits
        ),
    );
    v.report(
        "shared impact factor and fixed-point closure",
        rep.delta_sq_spread < DELTA_SPREAD_TOL && rep.zeta_star_closure < CLOSURE_TOL,
        format!(
            "delta^2 spread {:.1e} (< {DELTA_SPREAD_TOL:.0e}), zeta* closure {:.1e} relative (< {CLOSURE_TOL:.0e})",
            rep.delta_sq_spread, rep.zeta_star_closure
        ),
    );
    v.report(
        "invariant step geometry",
        rep.theta_plus_spread < GEOMETRY_TOL
            && rep.theta_minus_spread < GEOMETRY_TOL
            && rep.step_length_spread < GEOMETRY_TOL,
        format!(
            "theta+ spread {:.1e}, theta- spread {:.1e}, step length spread {:.1e} (< {GEOMETRY_TOL:.0e})",
            rep.theta_plus_spread, rep.theta_minus_spread, rep.step_length_spread
        ),
    );
    let v0 = rep.base_speed;
    let span_ok = rep.speed_min <= v0 * (1.0 - SPAN_FRACTION) && rep.speed_max >= v0 * (1.0 + SPAN_FRACTION);
    v.report(
        "continuum",
        rep.gaits >= MIN_GAITS
            && span_ok
            && rep.max_gap <= MAX_GAP
            && rep.speed_strictly_increasing
            && rep.sign_property
            && rep.ordering_property
            && continuum_time < CONTINUUM_BUDGET,
        format!(
            "{} gaits (>= {MIN_GAITS}) over {:.4}-{:.4} m/s vs required {:.4}-{:.4}, max gap {:.4} (<= {MAX_GAP}), monotone {}, sign {}, ordering {}, {}",
            rep.gaits, rep.speed_min, rep.speed_max, v0 * (1.0 - SPAN_FRACTION), v0 * (1.0 + SPAN_FRACTION), rep.max_gap,
            rep.speed_strictly_increasing, rep.sign_property, rep.ordering_property, secs(continuum_time)
        ),
    );

    let t = Instant::now();
    let analysis = p.analyze()?;
    let analyze_time = t.elapsed();
    let b = &analysis.boundedness;
    let rs = analysis.random_switching.as_ref().expect("signals requested");
    v.report(
        "uniform boundedness under arbitrary switching",
        b.pass
            && rs.signals == RANDOM_SIGNALS
            && rs.steps == SIGNAL_STEPS
            && rs.max_excursion <= EXCURSION_TOL
            && rs.max_replay_residual < REPLAY_TOL,
        format!(
            "zeta*_lb {:.2} >= K/delta^2 {:.2} (margin {:.2}); {}x{} random steps span zeta {:.2}-{:.2} within [{:.2}, {:.2}], excursion {:.1e} (<= {EXCURSION_TOL:.0e}), replay {:.1e} (< {REPLAY_TOL:.0e}), {} steps over a physical limit (reported, not part of the criterion), {}",
            b.zeta_lb, b.threshold(), b.margin, rs.signals, rs.steps, rs.zeta_min, rs.zeta_max, b.zeta_lb, b.zeta_ub,
            rs.max_excursion, rs.max_replay_residual, rs.constraint_violations, secs(analyze_time)
        ),
    );

    let t = Instant::now();
    let graph = p.graph()?;
    let graph_time = t.elapsed();
    let feasible: Vec<_> = graph.feasible_edges().collect();
    let within_bound = feasible.iter().filter(|e| e.measured_steps.is_some_and(|m| m <= e.weight)).count();
    let worked = switching::dwell_time_bound(100.0, 94.0, 0.5, 2.0)?;
    let mut z: f64 = 100.0;
    for _ in 0..worked {
        z = 0.5 * z + 0.5 * 94.0;
    }
    v.report(
        "dwell-time bound",
        within_bound == feasible.len() && worked == 3 && (z - 94.0).abs() < 2.0,
        format!(
            "{within_bound}/{} feasible edges reach the epsilon = {} ball within the bound ({} of {} edges feasible, {}); worked example N = {worked}, gap after N steps {:.3}",
            feasible.len(), graph.epsilon, feasible.len(), graph.edges.len(), secs(graph_time), (z - 94.0).abs()
        ),
    );

    let (agree, cases) = planner_matches_enumeration();
    let scc_ok = scc_fixtures();
    v.report(
        "graph and planner",
        agree == cases && scc_ok,
        format!(
            "Dijkstra equals enumeration on {agree}/{cases} random digraphs; ring/star/disconnected/complete verdicts {}; family graph strongly connected: {}",
            if scc_ok { "correct" } else { "wrong" },
            graph.is_strongly_connected()
        ),
    );

    let t = Instant::now();
    let (art, summary) = p.run()?;
    let scenario_time = t.elapsed();
    let trs = &summary.transitions;
    let converged =
        trs.iter().all(|tr| tr.converged_at.is_some() && (tr.final_speed - tr.desired_speed).abs() < SPEED_TOL);
    let (down, up) = (trs.get(1).map_or(0, |t| t.switches), trs.get(2).map_or(0, |t| t.switches));
    let exported: Vec<StepLog> =
        csv::Reader::from_path(p.path("steps.csv"))?.deserialize().collect::<Result<_, _>>()?;
    let staircase = exported == art.steps && is_staircase(&exported, &summary.transitions);
    let speeds: Vec<String> = trs.iter().map(|t| format!("{:.3}->{:.4}", t.desired_speed, t.final_speed)).collect();
    v.report(
        "speed-change scenario",
        trs.len() == 3 && converged && art.margins.violations(p.model()).is_empty() && down >= up && staircase && scenario_time < SCENARIO_BUDGET,
        format!(
            "targets {} (within {SPEED_TOL}), slow-down switches {down} >= speed-up switches {up}, max torque {:.1}, min F_n {:.1}, staircase in steps.csv {staircase}, {}",
            speeds.join(", "), art.margins.max_torque, art.margins.min_normal_force, secs(scenario_time)
        ),
    );

    Ok(v.0.iter().all(|&b| b))
}

fn planner_matches_enumeration() -> (usize, usize) {
    use rand::Rng;
    let mut r = rng(2024);
    let mut agree = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=10);
        let density = r.random_range(0.15..0.5);
        let edges = random_digraph(&mut r, n, density);
        let g = SwitchGraph::from_weights(n, &edges);
        let ok = (0..n).all(|s| {
            (0..n).all(|d| {
                let planned = switching::plan_path(&g, s, d).ok().map(|p| p.total_steps);
                planned == brute_force(n, &edges, s, d)
            })
        });
        agree += usize::from(ok);
    }
    (agree, 100)
}

fn scc_fixtures() -> bool {
    let ring: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, 1)).collect();
    let star: Vec<_> = (1..5).map(|i| (0, i, 1)).collect();
    let split = [(0, 1, 1), (1, 2, 1), (2, 0, 1), (3, 4, 1), (4, 3, 1), (2, 3, 1)];
    let complete: Vec<_> = (0..5).flat_map(|a| (0..5).filter(move |&b| b != a).map(move |b| (a, b, 1))).collect();
    SwitchGraph::from_weights(6, &ring).is_strongly_connected()
        && SwitchGraph::from_weights(5, &star).components().len() == 5
        && SwitchGraph::from_weights(5, &split).components() == vec![vec![0, 1, 2], vec![3, 4]]
        && SwitchGraph::from_weights(5, &complete).is_strongly_connected()
}

/// Speed moves in one direction per schedule entry, in discrete plateaus:
/// within each entry the gait index only steps toward the target and the
/// distinct gaits visited are exactly the planned nodes.
fn is_staircase(steps: &[StepLog], transitions: &[TransitionSummary]) -> bool {
    // consecutive steps sharing a desired speed belong to one entry
    let mut segments: Vec<&[StepLog]> = Vec::new();
    let mut begin = 0;
    for k in 1..=steps.len() {
        if k == steps.len() || steps[k].desired_speed != steps[begin].desired_speed {
            segments.push(&steps[begin..k]);
            begin = k;
        }
    }
    segments.len() == transitions.len()
        && segments.iter().zip(transitions).all(|(seg, tr)| {
            let gaits: Vec<usize> = seg.iter().map(|s| s.gait).collect();
            let toward = |a: usize, b: usize| if tr.to < tr.from { b <= a } else { b >= a };
            let mut visited = gaits.clone();
            visited.dedup();
            let planned_after_start = &tr.planned[1.min(tr.planned.len() - 1)..];
            gaits.windows(2).all(|w| toward(w[0], w[1])) && (visited == tr.planned || visited == planned_after_start)
        })
}
