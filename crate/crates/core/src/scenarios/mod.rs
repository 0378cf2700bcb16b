//! One configurable experiment per measurement: single-phonon splitting,
//! Hong-Ou-Mandel interference, the scattering phase gate in one- and two-phonon
//! form, modulated two-phonon capture with its optimizer, and the frequency-domain
//! scattering curves.

pub mod catch;
pub mod config;
pub mod interferometer;
pub mod setup;
pub mod theory;

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;
use crate::io;
use crate::lattice::Trace;
use crate::par::ExecPolicy;
use crate::readout::{Extremum, JointTable, Metrics};

pub use catch::{optimize_catch, run_two_phonon_catch, time_reversal_catch, CatchRun, Tuning};
pub use config::{ScenarioConfig, ScenarioId, SweepSpec};
pub use interferometer::{run_hom_sweep, run_mz_single, run_single_split, run_two_phonon_phase};
pub use theory::run_scatter_theory;

/// Tabulated sweep with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let h: Vec<&str> = self.header.iter().map(String::as_str).collect();
        io::numeric_csv(&h, self.rows.iter().cloned())
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub metrics: Metrics,
    pub extrema: Map<String, Value>,
    /// Quantities solved or tuned during the run (calibrated η, thermal floor, optimizer result).
    pub derived: Map<String, Value>,
    pub config_echo: Value,
}

impl Summary {
    pub fn new(cfg: &ScenarioConfig, id: ScenarioId) -> Result<Self> {
        let mut echo = cfg.clone();
        echo.topology.arm_phase = Some(cfg.arm_phase()?);
        echo.sweep = cfg.sweep_spec()?;
        Ok(Self {
            scenario: id.as_str().into(),
            metrics: Metrics::default(),
            extrema: Map::new(),
            derived: Map::new(),
            config_echo: echo.to_json(),
        })
    }

    pub fn extremum(&mut self, key: &str, e: Extremum) {
        self.extrema.insert(key.into(), serde_json::to_value(e).expect("plain struct"));
    }

    pub fn derive(&mut self, key: &str, v: impl Serialize) {
        self.derived.insert(key.into(), serde_json::to_value(v).expect("serializable"));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Everything a scenario produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Reported populations versus time (after floor and optional correction).
    pub trace: Option<Trace>,
    pub sweep: Option<SweepTable>,
    /// Reported table at the scenario's measurement time.
    pub final_table: Option<JointTable>,
    pub summary: Summary,
}

impl RunOutput {
    /// Writes `trace.csv`, `sweep.csv` and `summary.json` into `dir`, each atomically.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if let Some(t) = &self.trace {
            io::atomic_write(&dir.join("trace.csv"), t.to_csv()?.as_bytes())?;
        }
        if let Some(s) = &self.sweep {
            io::atomic_write(&dir.join("sweep.csv"), s.to_csv()?.as_bytes())?;
        }
        io::atomic_write(&dir.join("summary.json"), self.summary.to_json().as_bytes())
    }
}

/// Validates `cfg` and runs its scenario.
pub fn run(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.id()? {
        ScenarioId::SingleSplit => run_single_split(cfg),
        ScenarioId::Hom => run_hom_sweep(cfg, policy),
        ScenarioId::MzSingle => run_mz_single(cfg, policy),
        ScenarioId::TwoPhononPhase => run_two_phonon_phase(cfg, policy),
        ScenarioId::TwoPhononCatch => run_two_phonon_catch(cfg, policy),
        ScenarioId::OptimizeCatch => {
            let mut c = cfg.clone();
            c.catch.optimize = true;
            run_two_phonon_catch(&c, policy)
        }
        ScenarioId::ScatterTheory => run_scatter_theory(cfg, policy),
    }
}
