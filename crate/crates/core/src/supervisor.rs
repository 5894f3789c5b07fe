//! Online speed changes: plan a route through the transition graph and
//! advance along it each time `zeta` enters the ball of the active gait.

use serde::{Deserialize, Serialize};

use crate::continuum::GaitFamily;
use crate::error::{Error, Result};
use crate::model::{Biped, State};
use crate::sim::{self, ConstraintMargins, SimConfig};
use crate::switching::{plan_path, SwitchGraph};

/// When a schedule entry takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// At the start of this step index.
    Step(usize),
    /// At the first step starting at or after this time (s).
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub trigger: Trigger,
    /// Desired average speed (m/s).
    pub speed: f64,
}

/// Desired speeds over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl SpeedSchedule {
    /// Parses `"0:0.85, 60:0.6"` (step triggers) or `"0s:0.85, 30s:0.6"`
    /// (time triggers).
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (at, speed) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("schedule entry `{part}` is not trigger:speed")))?;
            let bad = |what: &str| Error::InvalidArgument(format!("bad {what} in schedule entry `{part}`"));
            let speed: f64 = speed.trim().parse().map_err(|_| bad("speed"))?;
            let at = at.trim();
            let trigger = match at.strip_suffix('s') {
                Some(t) => Trigger::Time(t.trim().parse().map_err(|_| bad("time"))?),
                None => Trigger::Step(at.parse().map_err(|_| bad("step"))?),
            };
            entries.push(ScheduleEntry { trigger, speed });
        }
        let s = Self { entries };
        s.validate_order()?;
        Ok(s)
    }

    fn validate_order(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidArgument("empty speed schedule".into()));
        }
        for w in self.entries.windows(2) {
            let increasing = match (w[0].trigger, w[1].trigger) {
                (Trigger::Step(a), Trigger::Step(b)) => a < b,
                (Trigger::Time(a), Trigger::Time(b)) => a < b,
                _ => return Err(Error::InvalidArgument("mixed step and time triggers".into())),
            };
            if !increasing {
                return Err(Error::InvalidArgument("schedule triggers must increase".into()));
            }
        }
        Ok(())
    }

    /// Checks ordering and that every speed lies in the certified range.
    pub fn validate(&self, family: &GaitFamily) -> Result<()> {
        self.validate_order()?;
        let (lo, hi) = family.speed_range();
        for e in &self.entries {
            if !(e.speed >= lo - 0.005 && e.speed <= hi + 0.005) {
                return Err(Error::InvalidArgument(format!(
                    "desired speed {:.3} m/s outside the certified range [{lo:.3}, {hi:.3}]",
                    e.speed
                )));
            }
        }
        Ok(())
    }

    fn fires(&self, i: usize, step: usize, time: f64) -> bool {
        match self.entries[i].trigger {
            Trigger::Step(s) => step >= s,
            Trigger::Time(t) => time >= t - 1e-12,
        }
    }
}

/// Supervisor bookkeeping between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorState {
    /// Gait whose controller is applied.
    pub current: usize,
    /// Remaining planned nodes after `current`.
    pub path: Vec<usize>,
    pub zeta: f64,
    /// Whether `zeta` lies in the ball of `current`.
    pub converged: bool,
}

/// One completed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub gait: usize,
    pub speed: f64,
    pub desired_speed: f64,
    pub zeta: f64,
    pub zeta_star: f64,
    pub in_ball: bool,
    pub max_torque: f64,
    pub min_normal_force: f64,
    pub max_friction_ratio: f64,
}

/// A controller change, effective from `step` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub step: usize,
    pub time: f64,
    pub from: usize,
    pub to: usize,
    pub zeta: f64,
}

/// Per schedule entry: where it led and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSummary {
    pub entry: usize,
    pub desired_speed: f64,
    pub from: usize,
    pub to: usize,
    pub planned: Vec<usize>,
    pub planned_steps: usize,
    pub switches: usize,
    /// Step at which `zeta` entered the target ball, if it did.
    pub converged_at: Option<usize>,
    /// Speed of the last step under this entry.
    pub final_speed: f64,
}

/// Row of the dense trajectory export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub q5: f64,
    pub dq1: f64,
    pub dq2: f64,
    pub dq3: f64,
    pub dq4: f64,
    pub dq5: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
    pub f_t: f64,
    pub f_n: f64,
    pub theta: f64,
    pub zeta: f64,
    pub y_norm: f64,
    pub step: usize,
    pub gait: usize,
}

/// Everything a supervised run produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub steps: Vec<StepLog>,
    pub switches: Vec<SwitchEvent>,
    pub transitions: Vec<TransitionSummary>,
    pub margins: ConstraintMargins,
    /// Dense samples, when requested.
    pub trajectory: Vec<TrajectoryRow>,
}

impl RunArtifacts {
    /// Touchdown `zeta` sequence, starting with the initial state.
    pub fn zeta_sequence(&self, initial: f64) -> Vec<f64> {
        std::iter::once(initial).chain(self.steps.iter().map(|s| s.zeta)).collect()
    }

    /// Gait applied at each step.
    pub fn signal(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.gait).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub total_steps: usize,
    pub epsilon: f64,
    pub record_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { total_steps: 200, epsilon: crate::switching::DEFAULT_EPSILON, record_trajectory: false }
    }
}

/// Runs the schedule. Starts at the fixed point of the gait nearest the
/// first desired speed; on each new entry plans from the active gait to the
/// gait nearest the desired speed and moves one node along the plan
/// whenever `zeta` is inside the ball of the active gait.
pub fn supervise(
    schedule: &SpeedSchedule,
    family: &GaitFamily,
    graph: &SwitchGraph,
    model: &Biped,
    cfg: &SimConfig,
    opts: &RunOptions,
) -> Result<RunArtifacts> {
    schedule.validate(family)?;
    if graph.len() != family.len() {
        return Err(Error::InvalidArgument("graph and family sizes differ".into()));
    }
    let gaits = family.gaits();
    let nearest = |v: f64| family.nearest(v).expect("validated non-empty family");
    let start = nearest(schedule.entries[0].speed);
    let mut x: State = family.members[start].fixed_point;
    let mut state = SupervisorState { current: start, path: Vec::new(), zeta: model.zeta(&x), converged: true };
    let mut art = RunArtifacts::default();
    let mut next_entry = 0usize;
    let mut desired = schedule.entries[0].speed;
    let mut time = 0.0;

    for k in 0..opts.total_steps {
        while next_entry < schedule.entries.len() && schedule.fires(next_entry, k, time) {
            desired = schedule.entries[next_entry].speed;
            let target = nearest(desired);
            let plan = plan_path(graph, state.current, target)?;
            art.transitions.push(TransitionSummary {
                entry: next_entry,
                desired_speed: desired,
                from: state.current,
                to: target,
                planned: plan.nodes.clone(),
                planned_steps: plan.total_steps,
                switches: 0,
                converged_at: None,
                final_speed: f64::NAN,
            });
            state.path = plan.nodes[1..].to_vec();
            next_entry += 1;
        }
        // advance along the plan once the active gait has captured zeta
        if state.converged && !state.path.is_empty() {
            let next = state.path.remove(0);
            art.switches.push(SwitchEvent { step: k, time, from: state.current, to: next, zeta: state.zeta });
            if let Some(tr) = art.transitions.last_mut() {
                tr.switches += 1;
            }
            state.current = next;
        }
        let p = state.current;
        let step = sim::step_from_pre_impact(&x, &gaits[p], model, cfg, opts.record_trajectory)?;
        if !step.violations.is_empty() {
            return Err(Error::ConstraintViolation { step: k, reason: step.violations.join("; ") });
        }
        art.margins.merge(&step.margins);
        if opts.record_trajectory {
            for s in &step.samples {
                let (q, dq) = (s.x.q, s.x.dq);
                art.trajectory.push(TrajectoryRow {
                    t: time + s.t,
                    q1: q[0],
                    q2: q[1],
                    q3: q[2],
                    q4: q[3],
                    q5: q[4],
                    dq1: dq[0],
                    dq2: dq[1],
                    dq3: dq[2],
                    dq4: dq[3],
                    dq5: dq[4],
                    u1: s.u[0],
                    u2: s.u[1],
                    u3: s.u[2],
                    u4: s.u[3],
                    f_t: s.force.tangential,
                    f_n: s.force.normal,
                    theta: s.theta,
                    zeta: s.zeta,
                    y_norm: s.output_norm,
                    step: k,
                    gait: p,
                });
            }
        }
        x = step.x_minus;
        state.zeta = model.zeta(&x);
        let zeta_star = family.members[p].zeta_star;
        state.converged = (state.zeta - zeta_star).abs() < opts.epsilon;
        art.steps.push(StepLog {
            step: k,
            t_start: time,
            t_end: time + step.duration,
            gait: p,
            speed: step.average_speed,
            desired_speed: desired,
            zeta: state.zeta,
            zeta_star,
            in_ball: state.converged,
            max_torque: step.margins.max_torque,
            min_normal_force: step.margins.min_normal_force,
            max_friction_ratio: step.margins.max_friction_ratio,
        });
        time += step.duration;
        if let Some(tr) = art.transitions.last_mut() {
            tr.final_speed = step.average_speed;
            if tr.converged_at.is_none() && state.path.is_empty() && p == tr.to && state.converged {
                tr.converged_at = Some(k);
            }
        }
    }
    Ok(art)
}
