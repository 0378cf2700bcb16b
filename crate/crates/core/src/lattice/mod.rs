//! Time-bin propagator for two acoustic arms joined by a beamsplitter, with a
//! qubit or qutrit behind a tunable coupler at the far end of each arm.
//!
//! The channel is discretized into bins of one time step. Every step applies,
//! in order: loss on bins arriving at the beamsplitter and at the boundaries
//! and on excited nodes; the beamsplitter mode unitary; the boundary exchange
//! between each node and its incident bin (followed by the node phases); and
//! one bin of propagation. All operations are local two-location unitaries or
//! single-location damping, applied exactly inside the ≤2-excitation sector.

mod engine;
pub mod state;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::envelope::{steps_for, TimeGrid};
use crate::error::{Error, Result};
use crate::pulse::{CouplerSchedule, LadderCoefficients, ModulationDrive};
use crate::readout::JointTable;

pub use engine::{ArmCounts, EvolveOptions, Evolution, Trace, TraceRow};
pub use state::{FewExcState, Layout, Loc, Side};

/// Beamsplitter mode unitary `[[r, t], [t, r]]` acting on (left, right) bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    pub t: C64,
    pub r: C64,
}

impl BeamSplitter {
    /// Balanced splitter, `t` real and `r = i|r|`.
    pub fn balanced() -> Self {
        Self::with_transmission(0.5).expect("valid")
    }

    /// Power transmission `T` with the symmetric phase convention.
    pub fn with_transmission(tp: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tp) {
            return Err(Error::Topology(format!("transmission {tp} outside [0, 1]")));
        }
        Ok(Self { t: C64::new(tp.sqrt(), 0.0), r: C64::new(0.0, (1.0 - tp).sqrt()) })
    }

    pub fn new(t: C64, r: C64) -> Result<Self> {
        let b = Self { t, r };
        match b.violation() {
            Some(v) => Err(Error::Topology(v)),
            None => Ok(b),
        }
    }

    pub fn violation(&self) -> Option<String> {
        let p = self.t.norm_sqr() + self.r.norm_sqr();
        if (p - 1.0).abs() > 1e-12 {
            return Some(format!("beamsplitter not unitary: |t|^2 + |r|^2 = {p}"));
        }
        let cross = (self.t * self.r.conj()).re;
        if cross.abs() > 1e-12 {
            return Some(format!("beamsplitter not unitary: Re(t r*) = {cross}, need r = ±i|r| relative to t"));
        }
        None
    }

    pub fn matrix(&self) -> state::M2 {
        [[self.r, self.t], [self.t, self.r]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub bs: BeamSplitter,
    /// One-way beamsplitter-to-boundary delay, ns.
    pub arm_delay_left: f64,
    pub arm_delay_right: f64,
    /// Phase acquired per round trip of the right arm, rad.
    pub arm_phase: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { bs: BeamSplitter::balanced(), arm_delay_left: 250.0, arm_delay_right: 250.0, arm_phase: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    pub bs: BeamSplitter,
    pub delay_steps: [usize; 2],
    pub arm_phase: f64,
    pub dt: f64,
}

/// Validates a geometry against the time step.
pub fn build(cfg: &TopologyConfig, dt: f64) -> Result<Topology> {
    if let Some(v) = cfg.bs.violation() {
        return Err(Error::Topology(v));
    }
    let steps = |d: f64, name: &str| -> Result<usize> {
        let s = steps_for(d, dt)
            .ok_or_else(|| Error::Topology(format!("{name} = {d} ns is not a multiple of dt = {dt} ns")))?;
        if s == 0 {
            return Err(Error::Topology(format!("{name} must be at least one step")));
        }
        Ok(s)
    };
    if !cfg.arm_phase.is_finite() {
        return Err(Error::Topology("arm_phase must be finite".into()));
    }
    Ok(Topology {
        bs: cfg.bs,
        delay_steps: [steps(cfg.arm_delay_left, "arm_delay_left")?, steps(cfg.arm_delay_right, "arm_delay_right")?],
        arm_phase: cfg.arm_phase,
        dt,
    })
}

/// Detuning from the carrier, rad/ns, constant or per grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    Sampled(Vec<f64>),
}

impl Profile {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Profile::Constant(x) => *x,
            Profile::Sampled(v) => v.get(k).copied().unwrap_or(0.0),
        }
    }

    /// `base` everywhere except `value` on `[t_on, t_off)`.
    pub fn window(grid: &TimeGrid, base: f64, t_on: f64, t_off: f64, value: f64) -> Self {
        Profile::Sampled(grid.times().map(|t| if t >= t_on - 1e-9 && t < t_off - 1e-9 { value } else { base }).collect())
    }
}

/// Sideband drive switched on over `[t_on, t_off)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationWindow {
    pub drive: ModulationDrive,
    pub t_on: f64,
    pub t_off: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeParams {
    /// 2 (qubit) or 3 (qutrit).
    pub levels: u8,
    pub detuning: Profile,
    /// Anharmonicity χ = ω_ge − ω_ef, rad/ns.
    pub chi: f64,
    pub kappa_max: f64,
    pub schedule: CouplerSchedule,
    pub modulation: Option<ModulationWindow>,
    /// Lifetime of |e⟩, ns (infinite for none).
    pub t1_e: f64,
    /// Lifetime of |f⟩ against decay to |e⟩, ns.
    pub t1_f: f64,
    /// Linewidth of an optional transducer resonance between node and channel, rad/ns.
    pub transducer: Option<f64>,
}

impl NodeParams {
    /// Lossless qubit with its coupler off.
    pub fn qubit(grid: TimeGrid, kappa_max: f64) -> Self {
        Self {
            levels: 2,
            detuning: Profile::Constant(0.0),
            chi: 0.0,
            kappa_max,
            schedule: CouplerSchedule::zeros(grid),
            modulation: None,
            t1_e: f64::INFINITY,
            t1_f: f64::INFINITY,
            transducer: None,
        }
    }

    /// Lossless qutrit with anharmonicity `chi` and its coupler off.
    pub fn qutrit(grid: TimeGrid, kappa_max: f64, chi: f64) -> Self {
        Self { levels: 3, chi, ..Self::qubit(grid, kappa_max) }
    }

    pub fn violations(&self, grid: &TimeGrid) -> Vec<String> {
        let mut v = Vec::new();
        if self.levels != 2 && self.levels != 3 {
            v.push(format!("levels must be 2 or 3, got {}", self.levels));
        }
        if self.modulation.is_some() && self.levels != 3 {
            v.push("modulation requires a 3-level node".into());
        }
        if !(self.kappa_max > 0.0) {
            v.push("kappa_max must be positive".into());
        }
        if !self.schedule.grid.same_as(grid) {
            v.push("coupler schedule grid differs from the simulation grid".into());
        } else if let Err(e) = self.schedule.check_cap(self.kappa_max) {
            v.push(e.to_string());
        }
        if !(self.t1_e > 0.0) || !(self.t1_f > 0.0) {
            v.push("lifetimes must be positive or infinite".into());
        }
        if let Some(k) = self.transducer {
            if !(k > 0.0 && k.is_finite()) {
                v.push("transducer linewidth must be positive".into());
            }
        }
        if let Profile::Sampled(s) = &self.detuning {
            if s.len() != grid.n {
                v.push("detuning profile length differs from the grid".into());
            }
        }
        v
    }

    /// Ladder coefficients in effect at time `t` for the effective model.
    pub fn ladder_at(&self, t: f64) -> LadderCoefficients {
        if self.levels == 2 {
            return LadderCoefficients::QUBIT;
        }
        match &self.modulation {
            Some(m) if t >= m.t_on - 1e-9 && t < m.t_off - 1e-9 => m.drive.ladder(),
            _ => LadderCoefficients::BARE,
        }
    }
}

/// How the sideband drive enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationMode {
    /// Bessel-weighted static ladder in the modulated frame.
    #[default]
    Effective,
    /// Explicit time-dependent level phases with the bare ladder.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Damped amplitudes; lost norm accumulates in a bucket.
    #[default]
    Leak,
    /// Seeded quantum-jump trajectories.
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    /// Single-path transfer efficiency per arm (BS to boundary and back counts as one path).
    pub arm_efficiency: [f64; 2],
    pub mode: LossMode,
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for LossModel {
    fn default() -> Self {
        Self { arm_efficiency: [1.0, 1.0], mode: LossMode::Leak, trajectories: 1000, seed: 1 }
    }
}

impl LossModel {
    /// Amplitude transmitted per one-way traversal of an arm.
    pub fn traversal_amplitude(&self, side: Side) -> f64 {
        self.arm_efficiency[side.index()].powf(0.25)
    }
}

/// A configured simulation.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub topology: Topology,
    pub nodes: [NodeParams; 2],
    pub grid: TimeGrid,
    pub loss: LossModel,
    pub modulation_mode: ModulationMode,
}

impl Lattice {
    pub fn new(topology: Topology, nodes: [NodeParams; 2], grid: TimeGrid) -> Result<Self> {
        let l = Self { topology, nodes, grid, loss: LossModel::default(), modulation_mode: ModulationMode::Effective };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if (self.topology.dt - self.grid.dt).abs() > 1e-12 * self.grid.dt {
            v.push("topology and grid use different dt".to_string());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            v.extend(n.violations(&self.grid).into_iter().map(|m| format!("node {}: {m}", i + 1)));
        }
        for &e in &self.loss.arm_efficiency {
            if !(0.0..=1.0).contains(&e) {
                v.push(format!("arm efficiency {e} outside [0, 1]"));
            }
        }
        if self.loss.mode == LossMode::Jump && self.loss.trajectories == 0 {
            v.push("jump mode needs at least one trajectory".into());
        }
        if self.modulation_mode == ModulationMode::Full {
            for n in &self.nodes {
                if let Some(m) = &n.modulation {
                    let limit = std::f64::consts::TAU / m.drive.omega_mod / 40.0;
                    if self.grid.dt > limit * (1.0 + 1e-9) {
                        v.push(format!("full modulation needs dt <= {limit:.4} ns"));
                    }
                }
            }
        }
        match v.is_empty() {
            true => Ok(()),
            false => Err(Error::Config(v.join("; "))),
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(
            self.topology.delay_steps,
            [self.nodes[0].transducer.is_some(), self.nodes[1].transducer.is_some()],
        )
    }

    /// Vacuum state sized for this lattice.
    pub fn vacuum(&self, two_sector: bool) -> FewExcState {
        FewExcState::vacuum(&self.layout(), two_sector)
    }

    /// Node 1 and node 2 in the given levels (0 = g, 1 = e, 2 = f), channel empty.
    pub fn node_state(&self, levels: [u8; 2]) -> Result<FewExcState> {
        let l = self.layout();
        let total = levels[0] + levels[1];
        let mut s = FewExcState::vacuum(&l, total >= 2);
        s.c0 = C64::new(0.0, 0.0);
        let (a, b) = (l.node(Side::Left), l.node(Side::Right));
        match (levels[0], levels[1]) {
            (0, 0) => s.c0 = C64::new(1.0, 0.0),
            (1, 0) => s.c1[a] = C64::new(1.0, 0.0),
            (0, 1) => s.c1[b] = C64::new(1.0, 0.0),
            (1, 1) => s.set_c2(a, b, C64::new(1.0, 0.0))?,
            (2, 0) => s.set_c2(a, a, C64::new(1.0, 0.0))?,
            (0, 2) => s.set_c2(b, b, C64::new(1.0, 0.0))?,
            _ => return Err(Error::param("levels", "at most two excitations")),
        }
        for (i, &lv) in levels.iter().enumerate() {
            if lv as usize >= self.nodes[i].levels as usize {
                return Err(Error::param("levels", format!("node {} has only {} levels", i + 1, self.nodes[i].levels)));
            }
        }
        Ok(s)
    }

    pub fn evolve(&self, initial: FewExcState, opts: &EvolveOptions) -> Result<Evolution> {
        self.validate()?;
        engine::evolve(self, initial, opts)
    }
}

/// Joint node populations of a state; channel excitations count as |g⟩.
pub fn populations(layout: &Layout, s: &FewExcState) -> JointTable {
    engine::joint_table(layout, s, s.norm_sq()).0
}
