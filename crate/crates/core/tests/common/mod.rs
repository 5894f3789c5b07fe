#![allow(dead_code)]

use std::sync::OnceLock;

use hzd_gaits::continuum::{self, ContinuumOptions, GaitFamily};
use hzd_gaits::design::GaitDesign;
use hzd_gaits::limit_cycle::{self, LimitCycleRecord};
use hzd_gaits::sim::SimConfig;
use hzd_gaits::{Biped, GaitParams, ModelParams, State};
use nalgebra::Vector5;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn model() -> Biped {
    Biped::new(ModelParams::default()).unwrap()
}

pub fn design() -> GaitDesign {
    serde_json::from_str(include_str!("../fixtures/base_design.json")).unwrap()
}

pub fn base_gait() -> GaitParams {
    design().to_gait(&model()).unwrap()
}

/// Certified record of the fixture gait, computed once per test binary.
pub fn base_record() -> &'static LimitCycleRecord {
    static REC: OnceLock<LimitCycleRecord> = OnceLock::new();
    REC.get_or_init(|| {
        let m = model();
        let g = base_gait();
        let orbit = hzd_gaits::zero_dynamics::surface_orbit(&g, &m, 1200, 6).unwrap();
        limit_cycle::analyze_gait(0, &g, &m, &SimConfig::default(), orbit.zeta_star).unwrap()
    })
}

/// A few gaits around the base speed, computed once per test binary.
pub fn small_family() -> &'static GaitFamily {
    static FAM: OnceLock<GaitFamily> = OnceLock::new();
    FAM.get_or_init(|| {
        let v0 = base_record().speed;
        let opts = ContinuumOptions { speed_lo: v0 - 0.025, speed_hi: v0 + 0.025, max_gap: 0.01, min_increment: 1e-4 };
        continuum::generate_continuum(&base_gait(), base_record(), &model(), &SimConfig::default(), &opts).unwrap()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Configuration near walking postures, with a wide spread.
pub fn random_q(r: &mut ChaCha8Rng) -> Vector5<f64> {
    Vector5::from_fn(|_, _| r.random_range(-1.5..1.5))
}

pub fn random_dq(r: &mut ChaCha8Rng) -> Vector5<f64> {
    Vector5::from_fn(|_, _| r.random_range(-3.0..3.0))
}

pub fn random_state(r: &mut ChaCha8Rng) -> State {
    State::new(random_q(r), random_dq(r))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Cheapest simple path by exhaustive depth-first enumeration.
pub fn brute_force(n: usize, edges: &[(usize, usize, usize)], src: usize, dst: usize) -> Option<usize> {
    fn dfs(
        u: usize,
        dst: usize,
        cost: usize,
        seen: &mut Vec<bool>,
        adj: &[Vec<(usize, usize)>],
        best: &mut Option<usize>,
    ) {
        if u == dst {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        for &(v, w) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                dfs(v, dst, cost + w, seen, adj, best);
                seen[v] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
    }
    let mut seen = vec![false; n];
    seen[src] = true;
    let mut best = None;
    dfs(src, dst, 0, &mut seen, &adj, &mut best);
    best
}

pub fn random_digraph(r: &mut impl Rng, n: usize, density: f64) -> Vec<(usize, usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && r.random_bool(density) {
                edges.push((a, b, r.random_range(1..12)));
            }
        }
    }
    edges
}
