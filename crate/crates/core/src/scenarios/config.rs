//! Scenario configuration: JSON schema, defaults, dotted overrides and validation.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::envelope::steps_for;
use crate::error::{Error, Result};
use crate::lattice::{BeamSplitter, LossMode, ModulationMode};

/// Experiment identifiers accepted by `scenario`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    SingleSplit,
    Hom,
    MzSingle,
    TwoPhononPhase,
    TwoPhononCatch,
    OptimizeCatch,
    ScatterTheory,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::SingleSplit,
        ScenarioId::Hom,
        ScenarioId::MzSingle,
        ScenarioId::TwoPhononPhase,
        ScenarioId::TwoPhononCatch,
        ScenarioId::OptimizeCatch,
        ScenarioId::ScatterTheory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::SingleSplit => "single_split",
            ScenarioId::Hom => "hom",
            ScenarioId::MzSingle => "mz_single",
            ScenarioId::TwoPhononPhase => "two_phonon_phase",
            ScenarioId::TwoPhononCatch => "two_phonon_catch",
            ScenarioId::OptimizeCatch => "optimize_catch",
            ScenarioId::ScatterTheory => "scatter_theory",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// Sweep axes a scenario understands; the first is its default.
    pub fn sweep_axes(self) -> &'static [&'static str] {
        match self {
            ScenarioId::Hom => &["tau_ns"],
            ScenarioId::MzSingle | ScenarioId::ScatterTheory => &["delta_MHz"],
            ScenarioId::TwoPhononPhase => &["delta_MHz", "kappa_scale"],
            ScenarioId::SingleSplit | ScenarioId::TwoPhononCatch | ScenarioId::OptimizeCatch => &[],
        }
    }

    /// Right-arm round-trip phase used when `topology.arm_phase` is unset.
    pub fn default_arm_phase(self) -> f64 {
        match self {
            // Routing extrema sit at the quarter-turn scattering phases.
            ScenarioId::MzSingle => PI / 2.0,
            // Same interferometer plus an illustrative structural offset.
            ScenarioId::TwoPhononPhase => PI / 2.0 + 0.3,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'; valid ids: {}", Self::valid_ids())))
    }
}

/// Inclusive linear sweep `start:stop:count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn new(name: &str, start: f64, stop: f64, count: usize) -> Self {
        Self { name: name.to_string(), start, stop, count }
    }

    /// Parses `name=start:stop:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep '{s}' must look like name=start:stop:count"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 || name.trim().is_empty() {
            return Err(bad());
        }
        let start = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let stop = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let count = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        Ok(Self::new(name.trim(), start, stop, count))
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.stop - self.start).abs() / (self.count - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    /// sech width σ, ns.
    pub sigma: f64,
    /// Emission centre of the first released phonon, ns.
    pub center: f64,
    /// Coupler ceiling of the emitting nodes, rad/ns.
    pub kappa_max: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { sigma: 20.0, center: 200.0, kappa_max: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub bs: BeamSplitter,
    pub arm_delay_left: f64,
    pub arm_delay_right: f64,
    /// Right-arm round-trip phase, rad; `null` picks the scenario default.
    pub arm_phase: Option<f64>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self { bs: BeamSplitter::balanced(), arm_delay_left: 250.0, arm_delay_right: 250.0, arm_phase: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSection {
    /// Constant coupling of the scattering node, rad/ns.
    pub kappa_max: f64,
    /// Detuning of the scattering node during the scattering window, MHz.
    #[serde(rename = "delta_MHz")]
    pub delta_mhz: f64,
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self { kappa_max: 0.5, delta_mhz: 0.0 }
    }
}

/// Coupling-strength scan of the two-phonon phase at fixed detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseScanSection {
    #[serde(rename = "delta_MHz")]
    pub delta_mhz: f64,
    /// Coupling at scale 1, rad/ns; `null` means 2|Δ| (a quarter-turn monochromatic phase).
    pub kappa_max: Option<f64>,
    /// Right-arm phase during the scan, rad.
    pub arm_phase: f64,
}

impl Default for PhaseScanSection {
    fn default() -> Self {
        Self { delta_mhz: -9.2, kappa_max: None, arm_phase: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeSection {
    #[serde(rename = "chi1_MHz")]
    pub chi1_mhz: f64,
    #[serde(rename = "chi2_MHz")]
    pub chi2_mhz: f64,
}

impl Default for NodeSection {
    fn default() -> Self {
        Self { chi1_mhz: 185.0, chi2_mhz: 189.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub mode: LossMode,
    /// End-to-end single-phonon transfer efficiency, split evenly over the arm traversals.
    pub eta: f64,
    /// |e⟩ lifetime, ns; `null` for none.
    pub t1_e_ns: Option<f64>,
    /// |f⟩ → |e⟩ lifetime, ns; `null` for none.
    pub t1_f_ns: Option<f64>,
    pub trajectories: usize,
    /// Per-node thermal excitation probability.
    pub p_th: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self { mode: LossMode::Leak, eta: 1.0, t1_e_ns: None, t1_f_ns: None, trajectories: 1000, p_th: 0.0 }
    }
}

/// Targets that override `eta` and `p_th` by solving for them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    /// P_ee level of a measurement with no true coincidences.
    pub floor: Option<f64>,
    /// Target for the large-delay HOM coincidence level (solves η).
    pub p_ee_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatchSection {
    /// Coupler ceiling of the catching nodes, rad/ns.
    pub kappa_max: f64,
    /// Modulation index δ/Ω; `null` for the Bessel balance root.
    pub ratio: Option<f64>,
    /// Global factor on the catch schedule (1 = mirrored release divided by J0²).
    pub scale: f64,
    /// Shift of the mirror point, ns.
    pub mirror_offset_ns: f64,
    pub modulation: bool,
    pub modulation_mode: ModulationMode,
    /// Run the schedule optimizer before the final evolution.
    pub optimize: bool,
    /// Time of the reported final populations, ns; `null` for the end of the catch window.
    pub measure_at_ns: Option<f64>,
}

impl Default for CatchSection {
    fn default() -> Self {
        Self {
            kappa_max: 0.5,
            ratio: None,
            scale: 1.0,
            mirror_offset_ns: 0.0,
            modulation: true,
            modulation_mode: ModulationMode::Effective,
            optimize: false,
            measure_at_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSection {
    /// Apply the inverse confusion matrix to reported populations.
    pub correct: bool,
    /// Two-qubit matrix JSON; `null` for the built-in measured matrix.
    pub two_qubit: Option<PathBuf>,
    pub qutrit1: Option<PathBuf>,
    pub qutrit2: Option<PathBuf>,
}

/// Complete scenario configuration. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Source node (1 or 2) for single-phonon scenarios.
    pub source: u8,
    pub pulse: PulseSection,
    pub topology: TopologySection,
    pub scatter: ScatterSection,
    pub phase_scan: PhaseScanSection,
    pub nodes: NodeSection,
    pub loss: LossSection,
    pub calibration: CalibrationSection,
    pub catch: CatchSection,
    pub readout: ReadoutSection,
    /// `null` picks the scenario default sweep.
    pub sweep: Option<SweepSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "single_split".into(),
            dt: 0.5,
            t_end: 1600.0,
            seed: 1,
            source: 1,
            pulse: PulseSection::default(),
            topology: TopologySection::default(),
            scatter: ScatterSection::default(),
            phase_scan: PhaseScanSection::default(),
            nodes: NodeSection::default(),
            loss: LossSection::default(),
            calibration: CalibrationSection::default(),
            catch: CatchSection::default(),
            readout: ReadoutSection::default(),
            sweep: None,
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(id: ScenarioId) -> Self {
        Self { scenario: id.as_str().into(), ..Self::default() }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn id(&self) -> Result<ScenarioId> {
        self.scenario.parse()
    }

    /// Sets a dotted key (`scatter.kappa_max`) from a JSON literal or bare string.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let mut root = self.to_json();
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("'{}' is not a section", parts[..i].join("."))))?;
            node = obj.get_mut(*part).ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        }
        *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        *self = serde_json::from_value(root).map_err(|e| Error::Config(format!("--set {key}={raw}: {e}")))?;
        Ok(())
    }

    /// Resolved right-arm phase; the coupling scan has its own default.
    pub fn arm_phase(&self) -> Result<f64> {
        if let Some(p) = self.topology.arm_phase {
            return Ok(p);
        }
        if self.sweep.as_ref().is_some_and(|s| s.name == "kappa_scale") {
            return Ok(self.phase_scan.arm_phase);
        }
        Ok(self.id()?.default_arm_phase())
    }

    /// The sweep to run: the configured one or the scenario default.
    pub fn sweep_spec(&self) -> Result<Option<SweepSpec>> {
        let id = self.id()?;
        if let Some(s) = &self.sweep {
            return Ok(Some(s.clone()));
        }
        Ok(match id {
            ScenarioId::Hom => Some(SweepSpec::new("tau_ns", -80.0, 80.0, 17)),
            ScenarioId::MzSingle => Some(SweepSpec::new("delta_MHz", -100.0, 100.0, 101)),
            ScenarioId::TwoPhononPhase => Some(SweepSpec::new("delta_MHz", -100.0, 100.0, 101)),
            ScenarioId::ScatterTheory => Some(SweepSpec::new("delta_MHz", -40.0, 40.0, 81)),
            _ => None,
        })
    }

    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let id = match self.id() {
            Ok(id) => Some(id),
            Err(e) => {
                v.push(format!("scenario: {e}"));
                None
            }
        };
        let positive = |v: &mut Vec<String>, name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive, got {x}"));
            }
        };
        positive(&mut v, "dt", self.dt);
        positive(&mut v, "t_end", self.t_end);
        positive(&mut v, "pulse.sigma", self.pulse.sigma);
        positive(&mut v, "pulse.kappa_max", self.pulse.kappa_max);
        positive(&mut v, "scatter.kappa_max", self.scatter.kappa_max);
        positive(&mut v, "catch.kappa_max", self.catch.kappa_max);
        positive(&mut v, "catch.scale", self.catch.scale);
        positive(&mut v, "nodes.chi1_MHz", self.nodes.chi1_mhz);
        positive(&mut v, "nodes.chi2_MHz", self.nodes.chi2_mhz);
        if !self.pulse.center.is_finite() {
            v.push("pulse.center must be finite".into());
        }
        if !self.scatter.delta_mhz.is_finite() || !self.phase_scan.delta_mhz.is_finite() {
            v.push("detunings must be finite".into());
        }
        if let Some(k) = self.phase_scan.kappa_max {
            positive(&mut v, "phase_scan.kappa_max", k);
        }
        if let Some(viol) = self.topology.bs.violation() {
            v.push(format!("topology.bs: {viol}"));
        }
        for (name, d) in [("topology.arm_delay_left", self.topology.arm_delay_left), ("topology.arm_delay_right", self.topology.arm_delay_right)] {
            if !(d > 0.0) {
                v.push(format!("{name} must be positive, got {d}"));
            } else if self.dt > 0.0 && steps_for(d, self.dt).is_none() {
                v.push(format!("{name} = {d} ns is not a multiple of dt = {} ns", self.dt));
            }
        }
        if let Some(p) = self.topology.arm_phase {
            if !p.is_finite() {
                v.push("topology.arm_phase must be finite".into());
            }
        }
        if !(self.source == 1 || self.source == 2) {
            v.push(format!("source must be 1 or 2, got {}", self.source));
        }
        if !(self.loss.eta > 0.0 && self.loss.eta <= 1.0) {
            v.push(format!("loss.eta must lie in (0, 1], got {}", self.loss.eta));
        }
        for (name, t) in [("loss.t1_e_ns", self.loss.t1_e_ns), ("loss.t1_f_ns", self.loss.t1_f_ns)] {
            if let Some(t) = t {
                if !(t > 0.0) {
                    v.push(format!("{name} must be positive, got {t}"));
                }
            }
        }
        if self.loss.trajectories == 0 {
            v.push("loss.trajectories must be at least 1".into());
        }
        if !(0.0..0.5).contains(&self.loss.p_th) {
            v.push(format!("loss.p_th must lie in [0, 0.5), got {}", self.loss.p_th));
        }
        if let Some(f) = self.calibration.floor {
            if !(f > 0.0 && f < 0.5) {
                v.push(format!("calibration.floor must lie in (0, 0.5), got {f}"));
            }
        }
        if let Some(m) = self.calibration.p_ee_max {
            if !(m > 0.0 && m <= 0.5) {
                v.push(format!("calibration.p_ee_max must lie in (0, 0.5], got {m}"));
            }
        }
        if let Some(r) = self.catch.ratio {
            if !(r > 0.0 && r < 2.4) {
                v.push(format!("catch.ratio must lie in (0, 2.4), got {r}"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.count == 0 {
                v.push(format!("sweep {}: count must be at least 1", s.name));
            }
            if !(s.start.is_finite() && s.stop.is_finite()) {
                v.push(format!("sweep {}: bounds must be finite", s.name));
            }
            if let Some(id) = id {
                if !id.sweep_axes().contains(&s.name.as_str()) {
                    let axes = id.sweep_axes();
                    v.push(if axes.is_empty() {
                        format!("scenario {id} does not sweep")
                    } else {
                        format!("sweep axis '{}' not valid for {id}; expected one of {}", s.name, axes.join(", "))
                    });
                }
                if s.name == "tau_ns" && self.dt > 0.0 {
                    if let Some(bad) = s.values().into_iter().find(|t| steps_for(t.abs() / 2.0, self.dt).is_none() && t.abs() > 1e-12) {
                        v.push(format!("sweep tau_ns: {bad} ns is not an even multiple of dt"));
                    }
                }
                if s.name == "kappa_scale" && s.values().iter().any(|x| *x < 0.0) {
                    v.push("sweep kappa_scale: values must be nonnegative".into());
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Balanced splitter expressed with explicit amplitudes, as it appears in JSON.
pub fn bs_amplitudes(t: (f64, f64), r: (f64, f64)) -> BeamSplitter {
    BeamSplitter { t: C64::new(t.0, t.1), r: C64::new(r.0, r.1) }
}
