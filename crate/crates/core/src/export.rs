//! CSV exports consumed by the plotting scripts.
//!
//! | file | columns |
//! |---|---|
//! | trajectory | `t, q1..q5, dq1..dq5, u1..u4, F_t, F_n, theta, zeta, y_norm, step, gait` |
//! | steps | `step, t_start, t_end, gait, speed, desired_speed, zeta, zeta_star, in_ball, max_torque, min_normal_force, max_friction_ratio` |
//! | switches | `step, time, from, to, zeta` |
//! | orbits | `gait, speed, theta, zeta` |
//! | gaits | `gait, speed, zeta_star, delta_sq, v_minus, k_max, period, step_length, spectral_radius, max_torque, min_normal_force, max_friction_ratio` |
//! | edges | `from, to, from_speed, to_speed, feasible, weight, measured_steps, max_torque, min_normal_force, max_friction_ratio, reason` |
//! | path | `order, gait, speed, zeta_star, edge_weight` |
//!
//! Column order is part of the interface. Angles are in rad, rates in
//! rad/s, torques in N·m, forces in N, `zeta` in (kg m²/s)², speeds in m/s.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::continuum::GaitFamily;
use crate::error::Result;
use crate::model::Biped;
use crate::sim::{self, SimConfig};
use crate::supervisor::{StepLog, SwitchEvent, TrajectoryRow};
use crate::switching::{Plan, SwitchGraph};

pub const TRAJECTORY_COLUMNS: [&str; 22] = [
    "t", "q1", "q2", "q3", "q4", "q5", "dq1", "dq2", "dq3", "dq4", "dq5", "u1", "u2", "u3", "u4", "F_t", "F_n",
    "theta", "zeta", "y_norm", "step", "gait",
];

/// Writes serializable rows with a header taken from the field names.
pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T], header: Option<&[&str]>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(out);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file<T: Serialize>(path: &Path, rows: &[T], header: Option<&[&str]>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(f), rows, header)
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    to_file(path, rows, Some(&TRAJECTORY_COLUMNS))
}

pub fn write_steps(path: &Path, rows: &[StepLog]) -> Result<()> {
    to_file(path, rows, None)
}

pub fn write_switches(path: &Path, rows: &[SwitchEvent]) -> Result<()> {
    if rows.is_empty() {
        // csv derives the header from the first row, so write it by hand
        std::fs::write(path, "step,time,from,to,zeta\n")?;
        return Ok(());
    }
    to_file(path, rows, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitRow {
    pub gait: usize,
    pub speed: f64,
    pub theta: f64,
    pub zeta: f64,
}

/// `(theta, zeta)` along one full-order step from each fixed point.
pub fn orbit_rows(family: &GaitFamily, model: &Biped, cfg: &SimConfig) -> Result<Vec<OrbitRow>> {
    let mut rows = Vec::new();
    for (p, m) in family.members.iter().enumerate() {
        let step = sim::step_from_pre_impact(&m.fixed_point, &family.gait(p), model, cfg, true)?;
        rows.extend(step.samples.iter().map(|s| OrbitRow { gait: p, speed: m.speed, theta: s.theta, zeta: s.zeta }));
    }
    Ok(rows)
}

pub fn write_orbits(path: &Path, rows: &[OrbitRow]) -> Result<()> {
    to_file(path, rows, Some(&["gait", "speed", "theta", "zeta"]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaitRow {
    pub gait: usize,
    pub speed: f64,
    pub zeta_star: f64,
    pub delta_sq: f64,
    pub v_minus: f64,
    pub k_max: f64,
    pub period: f64,
    pub step_length: f64,
    pub spectral_radius: f64,
    pub max_torque: f64,
    pub min_normal_force: f64,
    pub max_friction_ratio: f64,
}

pub fn gait_rows(family: &GaitFamily) -> Vec<GaitRow> {
    family
        .members
        .iter()
        .enumerate()
        .map(|(p, m)| GaitRow {
            gait: p,
            speed: m.speed,
            zeta_star: m.zeta_star,
            delta_sq: m.delta_sq,
            v_minus: m.v_minus,
            k_max: m.k_max,
            period: m.period,
            step_length: m.step_length,
            spectral_radius: m.spectrum.spectral_radius,
            max_torque: m.margins.max_torque,
            min_normal_force: m.margins.min_normal_force,
            max_friction_ratio: m.margins.max_friction_ratio,
        })
        .collect()
}

pub fn write_gaits(path: &Path, family: &GaitFamily) -> Result<()> {
    to_file(path, &gait_rows(family), None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRow {
    pub from: usize,
    pub to: usize,
    pub from_speed: f64,
    pub to_speed: f64,
    pub feasible: bool,
    pub weight: usize,
    pub measured_steps: Option<usize>,
    pub max_torque: f64,
    pub min_normal_force: f64,
    pub max_friction_ratio: f64,
    pub reason: String,
}

pub fn edge_rows(graph: &SwitchGraph) -> Vec<EdgeRow> {
    graph
        .edges
        .iter()
        .map(|e| EdgeRow {
            from: e.from,
            to: e.to,
            from_speed: graph.nodes[e.from].speed,
            to_speed: graph.nodes[e.to].speed,
            feasible: e.feasible,
            weight: e.weight,
            measured_steps: e.measured_steps,
            max_torque: e.margins.max_torque,
            min_normal_force: e.margins.min_normal_force,
            max_friction_ratio: e.margins.max_friction_ratio,
            reason: e.reason.clone().unwrap_or_default(),
        })
        .collect()
}

pub const EDGE_COLUMNS: [&str; 11] = [
    "from",
    "to",
    "from_speed",
    "to_speed",
    "feasible",
    "weight",
    "measured_steps",
    "max_torque",
    "min_normal_force",
    "max_friction_ratio",
    "reason",
];

pub fn write_edges(path: &Path, graph: &SwitchGraph) -> Result<()> {
    to_file(path, &edge_rows(graph), Some(&EDGE_COLUMNS))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRow {
    pub order: usize,
    pub gait: usize,
    pub speed: f64,
    pub zeta_star: f64,
    /// Weight of the edge into this node, 0 for the source.
    pub edge_weight: usize,
}

pub fn path_rows(plan: &Plan, graph: &SwitchGraph) -> Vec<PathRow> {
    plan.nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| PathRow {
            order: i,
            gait: n,
            speed: graph.nodes[n].speed,
            zeta_star: graph.nodes[n].zeta_star,
            edge_weight: if i == 0 { 0 } else { graph.edge(plan.nodes[i - 1], n).map_or(0, |e| e.weight) },
        })
        .collect()
}

pub fn write_path(path: &Path, plan: &Plan, graph: &SwitchGraph) -> Result<()> {
    to_file(path, &path_rows(plan, graph), Some(&["order", "gait", "speed", "zeta_star", "edge_weight"]))
}

/// Pretty JSON for any artifact.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
