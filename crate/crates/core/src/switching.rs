//! Safe switching among family members: the uniform boundedness check, the
//! dwell-time bound, pairwise feasibility simulation, the transition digraph
//! and minimum-dwell planning over it.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::continuum::GaitFamily;
use crate::error::{Error, Result};
use crate::model::Biped;
use crate::sim::{self, ConstraintMargins, SimConfig};

/// Default radius of the `zeta` ball around a target fixed point.
pub const DEFAULT_EPSILON: f64 = 2.0;

/// Outcome of the uniform boundedness check on a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessVerdict {
    pub pass: bool,
    pub zeta_lb: f64,
    pub zeta_ub: f64,
    /// `max_p K_p`.
    pub k_max: f64,
    pub delta_sq: f64,
    /// `zeta_lb - K / delta_z^2`.
    pub margin: f64,
    /// Members whose `zeta*` falls below `K / delta_z^2`.
    pub offending: Vec<usize>,
}

impl BoundednessVerdict {
    pub fn threshold(&self) -> f64 {
        self.k_max / self.delta_sq
    }
}

/// Checks `zeta*_lb >= K / delta_z^2` from per-gait `(zeta*, K)` values and
/// the shared impact factor.
pub fn boundedness_check_values(zeta_stars: &[f64], k_values: &[f64], delta_sq: f64) -> Result<BoundednessVerdict> {
    if zeta_stars.is_empty() || zeta_stars.len() != k_values.len() {
        return Err(Error::InvalidArgument("need one K per gait and at least one gait".into()));
    }
    if !(delta_sq > 0.0 && delta_sq < 1.0) {
        return Err(Error::InvalidArgument(format!("delta_z^2 = {delta_sq} outside (0, 1)")));
    }
    let zeta_lb = zeta_stars.iter().copied().fold(f64::INFINITY, f64::min);
    let zeta_ub = zeta_stars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_max = k_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = k_max / delta_sq;
    let offending: Vec<usize> = zeta_stars.iter().enumerate().filter(|(_, &z)| z < threshold).map(|(i, _)| i).collect();
    Ok(BoundednessVerdict {
        pass: offending.is_empty(),
        zeta_lb,
        zeta_ub,
        k_max,
        delta_sq,
        margin: zeta_lb - threshold,
        offending,
    })
}

/// Boundedness check of a certified family. The impact factor is shared by
/// construction; the smallest member value is used, which is conservative.
pub fn boundedness_check(family: &GaitFamily) -> Result<BoundednessVerdict> {
    let delta_sq = family.members.iter().map(|m| m.delta_sq).fold(f64::INFINITY, f64::min);
    let k: Vec<f64> = family.members.iter().map(|m| m.k_max).collect();
    boundedness_check_values(&family.zeta_stars(), &k, delta_sq)
}

/// Smallest integer `N > log(|dz| / eps + 1) / (2 log(1 / delta_z))`:
/// steps after which a switch from `zeta*_p` lands in the `eps` ball of
/// `zeta*_q`.
pub fn dwell_time_bound(zeta_from: f64, zeta_to: f64, delta_sq: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta_sq > 0.0 && delta_sq < 1.0) {
        return Err(Error::InvalidArgument(format!("delta_z^2 = {delta_sq} outside (0, 1)")));
    }
    let gap = (zeta_from - zeta_to).abs();
    // log(1/delta_z) = -log(delta_z^2) / 2, so the bound is log(..) / -log(delta^2)
    let x = (gap / epsilon + 1.0).ln() / (-delta_sq.ln());
    // smallest integer strictly greater than x (x >= 0)
    Ok(x.floor() as usize + 1)
}

/// One ordered pair of the transition graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub feasible: bool,
    /// Analytic dwell bound, the planning weight.
    pub weight: usize,
    /// Steps until `zeta` entered the target ball, when it did.
    pub measured_steps: Option<usize>,
    pub margins: ConstraintMargins,
    /// Largest relative gap between simulated `zeta` and the affine replay.
    pub replay_residual: f64,
    pub reason: Option<String>,
    /// Simulated touchdown `zeta` values, starting at the source fixed point.
    pub zeta_trace: Vec<f64>,
}

/// Simulates the switch `p -> q` from the fixed point of `p` until `zeta`
/// enters the `epsilon` ball of `zeta*_q`, capped at twice the analytic
/// bound plus ten steps. Constraints are checked at every integrator sample.
pub fn feasibility_sim(
    p: usize,
    q: usize,
    epsilon: f64,
    family: &GaitFamily,
    model: &Biped,
    cfg: &SimConfig,
) -> Result<EdgeRecord> {
    let (mp, mq) = (&family.members[p], &family.members[q]);
    let weight = dwell_time_bound(mp.zeta_star, mq.zeta_star, mq.delta_sq, epsilon)?;
    let mut rec = EdgeRecord {
        from: p,
        to: q,
        feasible: true,
        weight,
        measured_steps: None,
        margins: ConstraintMargins::default(),
        replay_residual: 0.0,
        reason: None,
        zeta_trace: vec![model.zeta(&mp.fixed_point)],
    };
    if p == q {
        rec.measured_steps = Some(0);
        rec.margins = mp.margins;
        return Ok(rec);
    }
    let gait = family.gait(q);
    let cap = 2 * weight + 10;
    let mut x = mp.fixed_point;
    let mut replay = mp.zeta_star;
    for k in 1..=cap {
        let step = match sim::step_from_pre_impact(&x, &gait, model, cfg, false) {
            Ok(s) => s,
            Err(e) => {
                rec.feasible = false;
                rec.reason = Some(format!("simulation failed at step {k}: {e}"));
                return Ok(rec);
            }
        };
        rec.margins.merge(&step.margins);
        x = step.x_minus;
        let z = model.zeta(&x);
        rec.zeta_trace.push(z);
        replay = mq.delta_sq * replay - mq.v_minus;
        rec.replay_residual = rec.replay_residual.max((z - replay).abs() / z.abs());
        if !step.violations.is_empty() {
            rec.feasible = false;
            rec.reason = Some(format!("step {k}: {}", step.violations.join("; ")));
            return Ok(rec);
        }
        if (z - mq.zeta_star).abs() < epsilon {
            rec.measured_steps = Some(k);
            return Ok(rec);
        }
    }
    rec.feasible = false;
    rec.reason = Some(format!("zeta did not enter the {epsilon} ball within {cap} steps"));
    Ok(rec)
}

/// Outcome of simulating random switching signals over a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSwitchingReport {
    pub signals: usize,
    pub steps: usize,
    pub seed: u64,
    /// Largest `max(zeta_lb - zeta, zeta - zeta_ub, 0) / zeta_ub` seen.
    pub max_excursion: f64,
    /// Largest relative gap between simulated `zeta` and the affine replay.
    pub max_replay_residual: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    /// Steps that broke a constraint. Boundedness does not need them to be
    /// zero, but they are reported.
    pub constraint_violations: usize,
}

/// Draws `signals` switching signals of `steps` steps, each step choosing a
/// gait uniformly, and runs each from the fixed point of a random member.
/// Every simulated touchdown `zeta` is compared with the interval
/// `[zeta*_lb, zeta*_ub]` and with the affine-map replay of the same signal.
pub fn random_switching_check(
    family: &GaitFamily,
    model: &Biped,
    cfg: &SimConfig,
    signals: usize,
    steps: usize,
    seed: u64,
) -> Result<RandomSwitchingReport> {
    use rand::{Rng, SeedableRng};
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let n = family.len();
    let gaits = family.gaits();
    let zs = family.zeta_stars();
    let lb = zs.iter().copied().fold(f64::INFINITY, f64::min);
    let ub = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // draw every signal up front so the result does not depend on scheduling
    let runs: Vec<(usize, sim::SwitchSignal)> = (0..signals)
        .map(|_| (rng.random_range(0..n), sim::SwitchSignal((0..steps).map(|_| rng.random_range(0..n)).collect())))
        .collect();
    let one = |(start, signal): &(usize, sim::SwitchSignal)| -> Result<(f64, f64, f64, f64, usize)> {
        let out = sim::run_switched(&family.members[*start].fixed_point, signal, &gaits, model, cfg, false)?;
        let mut replay = family.members[*start].zeta_star;
        let (mut exc, mut res, mut lo, mut hi, mut viol) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0);
        for (k, step) in out.iter().enumerate() {
            let m = &family.members[signal.at(k)];
            replay = m.delta_sq * replay - m.v_minus;
            let z = model.zeta(&step.x_minus);
            exc = exc.max((lb - z).max(z - ub).max(0.0) / ub);
            res = res.max((z - replay).abs() / z.abs());
            lo = lo.min(z);
            hi = hi.max(z);
            viol += usize::from(!step.violations.is_empty());
        }
        Ok((exc, res, lo, hi, viol))
    };
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(runs.len().max(1));
    let chunk = runs.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
        let handles: Vec<_> = runs.chunks(chunk).map(|c| s.spawn(move || c.iter().map(one).collect())).collect();
        handles.into_iter().map(|h| h.join().expect("switching worker panicked")).collect()
    });
    let mut report = RandomSwitchingReport {
        signals,
        steps,
        seed,
        max_excursion: 0.0,
        max_replay_residual: 0.0,
        zeta_min: f64::MAX,
        zeta_max: f64::MIN,
        constraint_violations: 0,
    };
    for part in parts {
        for (exc, res, lo, hi, viol) in part? {
            report.max_excursion = report.max_excursion.max(exc);
            report.max_replay_residual = report.max_replay_residual.max(res);
            report.zeta_min = report.zeta_min.min(lo);
            report.zeta_max = report.zeta_max.max(hi);
            report.constraint_violations += viol;
        }
    }
    Ok(report)
}

/// Node attributes of the transition graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub index: usize,
    pub speed: f64,
    pub zeta_star: f64,
}

/// Directed graph of gait switches; only feasible edges are plannable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchGraph {
    pub epsilon: f64,
    pub delta_sq: f64,
    pub nodes: Vec<GraphNode>,
    /// All simulated ordered pairs, feasible or not.
    pub edges: Vec<EdgeRecord>,
}

impl SwitchGraph {
    /// Graph with the given feasible weighted edges and no simulation data,
    /// for planning on hand-built or random instances.
    pub fn from_weights(n: usize, edges: &[(usize, usize, usize)]) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            delta_sq: 0.5,
            nodes: (0..n).map(|i| GraphNode { index: i, speed: i as f64, zeta_star: 0.0 }).collect(),
            edges: edges
                .iter()
                .map(|&(from, to, weight)| EdgeRecord {
                    from,
                    to,
                    feasible: true,
                    weight,
                    measured_steps: None,
                    margins: ConstraintMargins::default(),
                    replay_residual: 0.0,
                    reason: None,
                    zeta_trace: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn feasible_edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.iter().filter(|e| e.feasible)
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&EdgeRecord> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Adjacency lists of feasible edges, neighbors in increasing order.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.len()];
        for e in self.feasible_edges() {
            adj[e.from].push((e.to, e.weight));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Strongly connected components (each sorted, listed by smallest member).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<usize, usize>::with_capacity(self.len(), self.edges.len());
        let ids: Vec<_> = (0..self.len()).map(|i| g.add_node(i)).collect();
        for e in self.feasible_edges() {
            g.add_edge(ids[e.from], ids[e.to], e.weight);
        }
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }

    pub fn is_strongly_connected(&self) -> bool {
        !self.is_empty() && self.components().len() == 1
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Simulates every ordered pair `p != q` of the family. Work is spread over
/// the available cores; the result does not depend on the thread count.
pub fn build_graph(family: &GaitFamily, epsilon: f64, model: &Biped, cfg: &SimConfig) -> Result<SwitchGraph> {
    let n = family.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q))).collect();
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(pairs.len().max(1));
    let chunk = pairs.len().div_ceil(workers.max(1)).max(1);
    let results: Vec<Result<Vec<EdgeRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || part.iter().map(|&(p, q)| feasibility_sim(p, q, epsilon, family, model, cfg)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("graph worker panicked")).collect()
    });
    let mut edges = Vec::with_capacity(pairs.len());
    for r in results {
        edges.extend(r?);
    }
    let delta_sq = family.members.iter().map(|m| m.delta_sq).fold(f64::INFINITY, f64::min);
    Ok(SwitchGraph {
        epsilon,
        delta_sq,
        nodes: family
            .members
            .iter()
            .map(|m| GraphNode { index: m.index, speed: m.speed, zeta_star: m.zeta_star })
            .collect(),
        edges,
    })
}

/// A planned sequence of gaits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    /// Nodes from source to destination inclusive; a single node when they
    /// coincide.
    pub nodes: Vec<usize>,
    pub total_steps: usize,
}

impl Plan {
    pub fn switches(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// Dijkstra over feasible edges minimizing summed dwell bounds. Among
/// equal-cost routes the predecessor with the lower index wins.
pub fn plan_path(graph: &SwitchGraph, src: usize, dst: usize) -> Result<Plan> {
    let n = graph.len();
    if src >= n || dst >= n {
        return Err(Error::InvalidArgument(format!("node out of range (graph has {n} nodes)")));
    }
    if src == dst {
        return Ok(Plan { nodes: vec![src], total_steps: 0 });
    }
    let adj = graph.adjacency();
    let mut dist = vec![usize::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[src] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0usize, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] || (nd == dist[v] && !done[v] && u < prev[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if dist[dst] == usize::MAX {
        let component = graph.components().into_iter().find(|c| c.contains(&src)).unwrap_or_default();
        return Err(Error::Unreachable { src, dst, component });
    }
    let mut nodes = vec![dst];
    while *nodes.last().expect("non-empty") != src {
        nodes.push(prev[*nodes.last().expect("non-empty")]);
    }
    nodes.reverse();
    Ok(Plan { nodes, total_steps: dist[dst] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_fixed_points_need_one_step() {
        assert_eq!(dwell_time_bound(100.0, 100.0, 0.6, 2.0).unwrap(), 1);
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        assert!(dwell_time_bound(1.0, 2.0, 0.5, 0.0).is_err());
        assert!(dwell_time_bound(1.0, 2.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn same_node_plan_is_empty() {
        let g = SwitchGraph::from_weights(3, &[(0, 1, 1), (1, 2, 1)]);
        let plan = plan_path(&g, 1, 1).unwrap();
        assert_eq!(plan.nodes, vec![1]);
        assert_eq!(plan.total_steps, 0);
        assert_eq!(plan.switches(), 0);
    }

    #[test]
    fn tie_break_prefers_lower_index() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3 both cost 2
        let g = SwitchGraph::from_weights(4, &[(0, 2, 1), (2, 3, 1), (0, 1, 1), (1, 3, 1)]);
        assert_eq!(plan_path(&g, 0, 3).unwrap().nodes, vec![0, 1, 3]);
    }

    #[test]
    fn unreachable_reports_component() {
        let g = SwitchGraph::from_weights(3, &[(0, 1, 1), (1, 0, 1)]);
        match plan_path(&g, 0, 2) {
            Err(Error::Unreachable { component, .. }) => assert_eq!(component, vec![0, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
