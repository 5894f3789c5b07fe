//! The pipeline stages as functions over an artifact directory. Each stage
//! reads what earlier stages wrote and fails with
//! [`Error::MissingArtifact`] naming the stage to run when something is
//! absent.
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | `design-base` | | `base_gait.json` |
//! | `continuum` | `base_gait.json` | `family.json`, `gaits.csv` |
//! | `analyze` | `family.json` | `analysis.json` |
//! | `graph` | `family.json` | `graph.json`, `edges.csv` |
//! | `plan` | `family.json`, `graph.json` | `plan.json`, `path.csv` |
//! | `run` | `family.json`, `graph.json` | `run.json`, `steps.csv`, `switches.csv`, `trajectory.csv` |
//! | `export` | `family.json`, `graph.json` if present | `orbits.csv`, `gaits.csv`, `edges.csv` |

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::continuum::{self, ContinuumOptions, FamilyReport, GaitFamily};
use crate::design::{self, BaseGait};
use crate::error::{Error, Result};
use crate::export;
use crate::model::Biped;
use crate::supervisor::{self, RunArtifacts, TransitionSummary};
use crate::switching::{self, BoundednessVerdict, Plan, RandomSwitchingReport, SwitchGraph};

pub const BASE_GAIT_FILE: &str = "base_gait.json";
pub const FAMILY_FILE: &str = "family.json";
pub const GRAPH_FILE: &str = "graph.json";

/// Artifact directory plus the configuration that governs every stage.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: Config,
    pub dir: PathBuf,
    model: Biped,
}

/// What `analyze` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub family: FamilyReport,
    pub boundedness: BoundednessVerdict,
    /// Absent when the configured signal count is zero.
    pub random_switching: Option<RandomSwitchingReport>,
}

/// What `run` reports besides its CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub duration_s: f64,
    pub switches: usize,
    pub transitions: Vec<TransitionSummary>,
    pub margins: crate::sim::ConstraintMargins,
}

impl Pipeline {
    pub fn new(config: Config, dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let model = Biped::new(config.model)?;
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { config, dir, model })
    }

    pub fn model(&self) -> &Biped {
        &self.model
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn require(&self, name: &str, command: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { path: p.display().to_string(), command: command.into() })
        }
    }

    fn check_model(&self, fingerprint: &str, what: &str, command: &str) -> Result<()> {
        if fingerprint == self.model.params().fingerprint() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} was produced with different model parameters; rerun `{command}`")))
        }
    }

    pub fn load_base(&self) -> Result<BaseGait> {
        let b = BaseGait::load(&self.require(BASE_GAIT_FILE, "design-base")?)?;
        self.check_model(&b.model_fingerprint, BASE_GAIT_FILE, "design-base")?;
        Ok(b)
    }

    pub fn load_family(&self) -> Result<GaitFamily> {
        let f = GaitFamily::load(&self.require(FAMILY_FILE, "continuum")?)?;
        self.check_model(&f.provenance.model_fingerprint, FAMILY_FILE, "continuum")?;
        Ok(f)
    }

    pub fn load_graph(&self) -> Result<SwitchGraph> {
        SwitchGraph::load(&self.require(GRAPH_FILE, "graph")?)
    }

    pub fn design_base(&self) -> Result<BaseGait> {
        let base = design::design_base_gait(&self.model, &self.config.design, &self.config.sim(), None)?;
        base.save(&self.path(BASE_GAIT_FILE))?;
        Ok(base)
    }

    /// Generates the family; `range` overrides the configured speed window
    /// and gap.
    pub fn continuum(&self, range: Option<ContinuumOptions>) -> Result<GaitFamily> {
        let base = self.load_base()?;
        let opts = range.unwrap_or(self.config.continuum);
        let family = continuum::generate_continuum(&base.gait, &base.record, &self.model, &self.config.sim(), &opts)?;
        family.save(&self.path(FAMILY_FILE))?;
        export::write_gaits(&self.path("gaits.csv"), &family)?;
        Ok(family)
    }

    pub fn analyze(&self) -> Result<Analysis> {
        let family = self.load_family()?;
        let a = &self.config.analyze;
        let random_switching = if a.random_signals > 0 && a.signal_steps > 0 {
            Some(switching::random_switching_check(
                &family,
                &self.model,
                &self.config.analyze_sim(),
                a.random_signals,
                a.signal_steps,
                a.seed,
            )?)
        } else {
            None
        };
        let analysis =
            Analysis { family: family.report(), boundedness: switching::boundedness_check(&family)?, random_switching };
        export::write_json(&self.path("analysis.json"), &analysis)?;
        Ok(analysis)
    }

    pub fn graph(&self) -> Result<SwitchGraph> {
        let family = self.load_family()?;
        let verdict = switching::boundedness_check(&family)?;
        if !verdict.pass {
            return Err(Error::InvalidArgument(format!(
                "family fails the boundedness check (margin {:.3}, offending {:?})",
                verdict.margin, verdict.offending
            )));
        }
        let graph = switching::build_graph(&family, self.config.graph.epsilon, &self.model, &self.config.sim())?;
        graph.save(&self.path(GRAPH_FILE))?;
        export::write_edges(&self.path("edges.csv"), &graph)?;
        Ok(graph)
    }

    /// Plans between the gaits nearest the two speeds.
    pub fn plan(&self, from_speed: f64, to_speed: f64) -> Result<Plan> {
        let family = self.load_family()?;
        let graph = self.load_graph()?;
        let pick = |v: f64| family.nearest(v).ok_or_else(|| Error::InvalidArgument("empty family".into()));
        let plan = switching::plan_path(&graph, pick(from_speed)?, pick(to_speed)?)?;
        export::write_json(&self.path("plan.json"), &plan)?;
        export::write_path(&self.path("path.csv"), &plan, &graph)?;
        Ok(plan)
    }

    /// Runs the configured schedule under the supervisor and writes the run
    /// CSVs. A run aborted by a constraint violation writes nothing.
    pub fn run(&self) -> Result<(RunArtifacts, RunSummary)> {
        let family = self.load_family()?;
        let graph = self.load_graph()?;
        let verdict = switching::boundedness_check(&family)?;
        if !verdict.pass {
            return Err(Error::InvalidArgument("family fails the boundedness check".into()));
        }
        let schedule = self.config.schedule()?;
        let art = supervisor::supervise(
            &schedule,
            &family,
            &graph,
            &self.model,
            &self.config.sim(),
            &self.config.run_options(),
        )?;
        let summary = RunSummary {
            steps: art.steps.len(),
            duration_s: art.steps.last().map_or(0.0, |s| s.t_end),
            switches: art.switches.len(),
            transitions: art.transitions.clone(),
            margins: art.margins,
        };
        export::write_steps(&self.path("steps.csv"), &art.steps)?;
        export::write_switches(&self.path("switches.csv"), &art.switches)?;
        if self.config.run.record_trajectory {
            export::write_trajectory(&self.path("trajectory.csv"), &art.trajectory)?;
        }
        export::write_json(&self.path("run.json"), &summary)?;
        Ok((art, summary))
    }

    /// Plot inputs: orbit projections, the gait table and, when a graph
    /// exists, its edge list. Returns the files written.
    pub fn export(&self) -> Result<Vec<PathBuf>> {
        let family = self.load_family()?;
        let mut written = Vec::new();
        let orbits = export::orbit_rows(&family, &self.model, &self.config.sim())?;
        let p = self.path("orbits.csv");
        export::write_orbits(&p, &orbits)?;
        written.push(p);
        let p = self.path("gaits.csv");
        export::write_gaits(&p, &family)?;
        written.push(p);
        if self.path(GRAPH_FILE).is_file() {
            let p = self.path("edges.csv");
            export::write_edges(&p, &self.load_graph()?)?;
            written.push(p);
        }
        Ok(written)
    }
}
