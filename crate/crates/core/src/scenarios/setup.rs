//! Pieces shared by the scenarios: grids, geometry timing, schedules,
//! idealized arm detection and the readout pipeline.

use crate::envelope::{make_sech, TimeGrid};
use crate::error::{Error, Result};
use crate::lattice::{build, ArmCounts, Lattice, LossModel, NodeParams, TopologyConfig};
use crate::pulse::{catch_schedule, emission_schedule, CouplerSchedule};
use crate::readout::{self, ConfusionMatrix, JointTable};

use super::config::ScenarioConfig;

/// Arrival times implied by the geometry for packets released at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub delays: [f64; 2],
    /// First beamsplitter pass of the packet released at `pulse.center`.
    pub t_bs: f64,
}

impl Timing {
    /// Timing referenced to a release from `source` (0 = node 1).
    pub fn new(cfg: &ScenarioConfig, source: usize) -> Self {
        let delays = [cfg.topology.arm_delay_left, cfg.topology.arm_delay_right];
        Self { delays, t_bs: cfg.pulse.center + delays[source] }
    }

    /// Emission centre of `node` so that its packet meets node 1's at the splitter.
    pub fn emit_center(&self, node: usize) -> f64 {
        self.t_bs - self.delays[node]
    }

    /// Arrival at `node` after `passes` beamsplitter crossings (1 or 2).
    pub fn arrival(&self, node: usize, passes: usize) -> f64 {
        self.t_bs + 2.0 * self.delays[1] * (passes as f64 - 1.0) + self.delays[node]
    }

    /// Midway between the boundary reflection and the next splitter pass.
    pub fn snapshot(&self, passes: usize) -> f64 {
        self.t_bs + 2.0 * self.delays[1] * (passes as f64 - 1.0) + self.delays[0].min(self.delays[1])
    }
}

pub fn grid(cfg: &ScenarioConfig, t_end: f64) -> Result<TimeGrid> {
    TimeGrid::spanning(0.0, t_end.min(cfg.t_end), cfg.dt)
}

pub fn topology(cfg: &ScenarioConfig, arm_phase: f64) -> TopologyConfig {
    TopologyConfig {
        bs: cfg.topology.bs,
        arm_delay_left: cfg.topology.arm_delay_left,
        arm_delay_right: cfg.topology.arm_delay_right,
        arm_phase,
    }
}

/// Shaped release of a sech packet centred at `center`.
pub fn emission(cfg: &ScenarioConfig, grid: TimeGrid, center: f64) -> Result<CouplerSchedule> {
    let target = make_sech(cfg.pulse.sigma, center, grid)?;
    emission_schedule(&target, cfg.pulse.kappa_max)
}

/// Time-reversed release, mirrored so the packet emitted at `center` is caught at `arrival`.
pub fn capture(release: &CouplerSchedule, center: f64, arrival: f64, offset: f64) -> Result<CouplerSchedule> {
    catch_schedule(release, 0.5 * (center + arrival) + offset)
}

pub fn row_at(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.nearest(t).ok_or_else(|| Error::Config(format!("time {t} ns lies outside the simulated window")))
}

/// Lattice with the configured losses and seed.
pub fn lattice(
    cfg: &ScenarioConfig,
    topo: &TopologyConfig,
    nodes: [NodeParams; 2],
    grid: TimeGrid,
    eta: f64,
) -> Result<Lattice> {
    let mut lat = Lattice::new(build(topo, cfg.dt)?, nodes, grid)?;
    lat.loss = LossModel { arm_efficiency: [eta, eta], mode: cfg.loss.mode, trajectories: cfg.loss.trajectories, seed: cfg.seed };
    lat.validate()?;
    Ok(lat)
}

pub fn apply_lifetimes(cfg: &ScenarioConfig, n: &mut NodeParams) {
    n.t1_e = cfg.loss.t1_e_ns.unwrap_or(f64::INFINITY);
    n.t1_f = cfg.loss.t1_f_ns.unwrap_or(f64::INFINITY);
}

/// Node excitations for arm photon numbers, each phonon surviving the transfer with
/// probability `eta` and a node registering |e⟩ when at least one arrives.
pub fn detect(counts: &ArmCounts, eta: f64) -> JointTable {
    let miss = |n: usize| (1.0 - eta).powi(n as i32);
    let mut t = JointTable::default();
    for nl in 0..3 {
        for nr in 0..3 - nl {
            let p = counts.p[nl][nr];
            if p == 0.0 {
                continue;
            }
            let (l0, r0) = (miss(nl), miss(nr));
            t.0[0][0] += p * l0 * r0;
            t.0[1][0] += p * (1.0 - l0) * r0;
            t.0[0][1] += p * l0 * (1.0 - r0);
            t.0[1][1] += p * (1.0 - l0) * (1.0 - r0);
        }
    }
    t
}

/// Reference table of one phonon split evenly and caught with efficiency `eta`.
pub fn split_reference(eta: f64) -> JointTable {
    JointTable([[1.0 - eta, 0.5 * eta, 0.0], [0.5 * eta, 0.0, 0.0], [0.0; 3]])
}

/// Thermal floor plus optional confusion-matrix inversion, applied to every reported table.
#[derive(Debug, Clone)]
pub struct Readout {
    pub p_th: f64,
    pub levels: usize,
    pub correction: Option<ConfusionMatrix>,
}

impl Readout {
    pub fn new(cfg: &ScenarioConfig, levels: usize, p_th: f64) -> Result<Self> {
        let correction = if cfg.readout.correct { Some(confusion(cfg, levels)?) } else { None };
        Ok(Self { p_th, levels, correction })
    }

    /// Raw floor-injected table, without correction.
    pub fn raw(&self, t: &JointTable) -> JointTable {
        readout::inject_thermal_floor(t, [self.p_th, self.p_th])
    }

    pub fn process(&self, t: &JointTable) -> Result<JointTable> {
        let raw = self.raw(t);
        match &self.correction {
            None => Ok(raw),
            Some(c) => JointTable::from_vec(self.levels, &c.correct(&raw.to_vec(self.levels))?),
        }
    }
}

/// Configured or built-in readout matrix for `levels`-level nodes.
pub fn confusion(cfg: &ScenarioConfig, levels: usize) -> Result<ConfusionMatrix> {
    let c = if levels == 2 {
        match &cfg.readout.two_qubit {
            Some(p) => ConfusionMatrix::load(p)?,
            None => readout::measured_two_qubit(),
        }
    } else {
        let q1 = match &cfg.readout.qutrit1 {
            Some(p) => ConfusionMatrix::load(p)?,
            None => readout::measured_qutrit_1(),
        };
        let q2 = match &cfg.readout.qutrit2 {
            Some(p) => ConfusionMatrix::load(p)?,
            None => readout::measured_qutrit_2(),
        };
        q1.tensor(&q2)
    };
    if c.dim() != levels * levels {
        return Err(Error::Config(format!("readout matrix has {} outcomes, expected {}", c.dim(), levels * levels)));
    }
    c.validate()?;
    Ok(c)
}

/// Bisection for an increasing function on `[lo, hi]`.
pub fn solve_increasing(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, what: &str) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    if f(a) > target || f(b) < target {
        return Err(Error::Config(format!("{what}: target {target} outside [{:.6}, {:.6}]", f(a), f(b))));
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_of_one_phonon_is_linear_in_eta() {
        let mut c = ArmCounts::default();
        c.p[1][0] = 0.5;
        c.p[0][1] = 0.5;
        let t = detect(&c, 0.64);
        assert!((t.get(1, 0) - 0.32).abs() < 1e-15);
        assert!((t.get(0, 0) - 0.36).abs() < 1e-15);
        assert_eq!(t.get(1, 1), 0.0);
    }

    #[test]
    fn two_phonons_in_one_arm_register_once() {
        let mut c = ArmCounts::default();
        c.p[2][0] = 1.0;
        let t = detect(&c, 0.5);
        assert!((t.get(1, 0) - 0.75).abs() < 1e-15);
        assert!((t.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn default_timing() {
        let cfg = ScenarioConfig::default();
        let tm = Timing::new(&cfg, 0);
        assert_eq!(tm.t_bs, 450.0);
        assert_eq!(tm.arrival(1, 1), 700.0);
        assert_eq!(tm.arrival(0, 2), 1200.0);
        assert_eq!(tm.snapshot(1), 700.0);
        assert_eq!(tm.snapshot(2), 1200.0);
    }
}
