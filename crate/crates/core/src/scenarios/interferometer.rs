//! Qubit scenarios on the beamsplitter interferometer.
//!
//! Time traces come from full evolutions with timed captures. Sweeps evolve the
//! lossless channel up to a snapshot where every phonon sits in an arm, then
//! apply the transfer efficiency analytically per phonon (see [`detect`]).

use crate::envelope::{make_sech, TimeGrid};
use crate::error::{Error, Result};
use crate::lattice::{ArmCounts, EvolveOptions, NodeParams, Profile, Trace, TraceRow};
use crate::par::{self, ExecPolicy};
use crate::pulse::CouplerSchedule;
use crate::readout::{self, calibrate_thermal_floor, JointTable};
use crate::scatter::{mhz_to_rad_ns, scattering_overlap, ScatterParams};

use super::config::{ScenarioConfig, ScenarioId};
use super::setup::{self, detect, split_reference, Readout, Timing};
use super::{RunOutput, Summary, SweepTable};

/// Floor-inject and optionally correct every row of a trace.
pub(crate) fn report_trace(trace: &Trace, ro: &Readout) -> Result<Trace> {
    let rows = trace
        .rows
        .iter()
        .map(|r| Ok(TraceRow { joint: ro.process(&r.joint)?, ..*r }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trace { rows })
}

fn qubit(cfg: &ScenarioConfig, grid: TimeGrid, kappa_max: f64, schedule: CouplerSchedule) -> NodeParams {
    let mut n = NodeParams::qubit(grid, kappa_max);
    n.schedule = schedule;
    setup::apply_lifetimes(cfg, &mut n);
    n
}

/// Thermal probability from `calibration.floor` against `reference`, or the configured `p_th`.
fn floor_p_th(cfg: &ScenarioConfig, reference: &JointTable) -> Result<f64> {
    match cfg.calibration.floor {
        Some(f) => calibrate_thermal_floor(reference, f),
        None => Ok(cfg.loss.p_th),
    }
}

fn check_id(cfg: &ScenarioConfig, ids: &[ScenarioId]) -> Result<ScenarioId> {
    let id = cfg.id()?;
    if !ids.contains(&id) {
        return Err(Error::Config(format!("config is for scenario {id}")));
    }
    Ok(id)
}

/// One phonon released from the source node, split, and caught by both nodes.
pub fn run_single_split(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let id = check_id(cfg, &[ScenarioId::SingleSplit])?;
    let src = cfg.source as usize - 1;
    let tm = Timing::new(cfg, src);
    let grid = setup::grid(cfg, cfg.t_end)?;
    let release = setup::emission(cfg, grid, cfg.pulse.center)?;
    let catches = [0, 1].map(|i| setup::capture(&release, cfg.pulse.center, tm.arrival(i, 1), cfg.catch.mirror_offset_ns));
    let [c1, c2] = catches;
    let (c1, c2) = (c1?, c2?);
    let sched = |i: usize, c: CouplerSchedule| if i == src { release.combine(&c) } else { Ok(c) };
    let k = cfg.pulse.kappa_max;
    let nodes = [qubit(cfg, grid, k, sched(0, c1)?), qubit(cfg, grid, k, sched(1, c2)?)];
    let topo = setup::topology(cfg, cfg.arm_phase()?);
    let lat = setup::lattice(cfg, &topo, nodes, grid, cfg.loss.eta)?;
    let levels = if src == 0 { [1, 0] } else { [0, 1] };
    let ev = lat.evolve(lat.node_state(levels)?, &EvolveOptions::default())?;
    let last = ev.trace.last().joint;
    let p_th = floor_p_th(cfg, &last)?;
    let ro = Readout::new(cfg, 2, p_th)?;
    let trace = report_trace(&ev.trace, &ro)?;
    let fin = trace.last().joint;

    let mut summary = Summary::new(cfg, id)?;
    summary.metrics = readout::n_metrics(&fin);
    summary.derive("eta", cfg.loss.eta);
    summary.derive("p_th", p_th);
    summary.derive("P_Q1", fin.marginal(0)[1]);
    summary.derive("P_Q2", fin.marginal(1)[1]);
    summary.derive("P_ee", fin.get(1, 1));
    summary.derive("loss", trace.last().loss);
    Ok(RunOutput { trace: Some(trace), sweep: None, final_table: Some(fin), summary })
}

/// Arm photon numbers after the HOM pass, node 1 released `tau` earlier than node 2.
pub fn hom_counts(cfg: &ScenarioConfig, tau: f64) -> Result<ArmCounts> {
    let tm = Timing::new(cfg, 0);
    let t_snap = tm.snapshot(1);
    let grid = setup::grid(cfg, t_snap + cfg.dt)?;
    let k = cfg.pulse.kappa_max;
    let e1 = setup::emission(cfg, grid, tm.emit_center(0) - 0.5 * tau)?;
    let e2 = setup::emission(cfg, grid, tm.emit_center(1) + 0.5 * tau)?;
    let mut nodes = [NodeParams::qubit(grid, k), NodeParams::qubit(grid, k)];
    nodes[0].schedule = e1;
    nodes[1].schedule = e2;
    let mut lossless = cfg.clone();
    lossless.loss.mode = crate::lattice::LossMode::Leak;
    let lat = setup::lattice(&lossless, &setup::topology(cfg, cfg.arm_phase()?), nodes, grid, 1.0)?;
    let opts = EvolveOptions { snapshots: vec![setup::row_at(&grid, t_snap)?], ..Default::default() };
    let ev = lat.evolve(lat.node_state([1, 1])?, &opts)?;
    Ok(ev.snapshots[0])
}

/// Coincidence probability versus release delay, plus a capture trace at zero delay.
pub fn run_hom_sweep(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    let id = check_id(cfg, &[ScenarioId::Hom])?;
    let spec = cfg.sweep_spec()?.ok_or(Error::EmptySweep)?;
    let taus = spec.values();
    if taus.is_empty() {
        return Err(Error::EmptySweep);
    }
    let counts = par::try_map(policy, &taus, |&tau| hom_counts(cfg, tau))?;

    // Calibration: η from the large-delay level, p_th from the zero-delay point.
    let i0 = (0..taus.len()).min_by(|&a, &b| taus[a].abs().total_cmp(&taus[b].abs())).expect("non-empty");
    let mut eta = cfg.loss.eta;
    let mut p_th = cfg.loss.p_th;
    if cfg.calibration.floor.is_some() || cfg.calibration.p_ee_max.is_some() {
        for _ in 0..60 {
            let (eta0, p0) = (eta, p_th);
            if let Some(target) = cfg.calibration.p_ee_max {
                let peak = |e: f64| {
                    counts
                        .iter()
                        .map(|c| readout::inject_thermal_floor(&detect(c, e), [p_th, p_th]).get(1, 1))
                        .fold(0.0, f64::max)
                };
                eta = setup::solve_increasing(peak, target, 1e-9, 1.0, "calibration.p_ee_max")?;
            }
            if let Some(floor) = cfg.calibration.floor {
                p_th = calibrate_thermal_floor(&detect(&counts[i0], eta), floor)?;
            }
            if (eta - eta0).abs() < 1e-14 && (p_th - p0).abs() < 1e-14 {
                break;
            }
        }
    }
    let ro = Readout::new(cfg, 2, p_th)?;
    let tables = counts.iter().map(|c| ro.process(&detect(c, eta))).collect::<Result<Vec<_>>>()?;
    let mut sweep = SweepTable::new(&["tau_ns", "P_gg", "P_ge", "P_eg", "P_ee"]);
    for (tau, t) in taus.iter().zip(&tables) {
        sweep.rows.push(vec![*tau, t.get(0, 0), t.get(0, 1), t.get(1, 0), t.get(1, 1)]);
    }
    let p_ee = sweep.column("P_ee").expect("column");
    let (metrics, max, min) = readout::hom_metrics(&taus, &p_ee)?;

    // Zero-delay run with both nodes catching.
    let tm = Timing::new(cfg, 0);
    let grid = setup::grid(cfg, cfg.t_end)?;
    let k = cfg.pulse.kappa_max;
    let mut nodes = Vec::new();
    for i in 0..2 {
        let c = tm.emit_center(i);
        let e = setup::emission(cfg, grid, c)?;
        let catch = setup::capture(&e, c, tm.arrival(i, 1), cfg.catch.mirror_offset_ns)?;
        nodes.push(qubit(cfg, grid, k, e.combine(&catch)?));
    }
    let nodes: [NodeParams; 2] = nodes.try_into().expect("two nodes");
    let lat = setup::lattice(cfg, &setup::topology(cfg, cfg.arm_phase()?), nodes, grid, eta)?;
    let ev = lat.evolve(lat.node_state([1, 1])?, &EvolveOptions { policy, ..Default::default() })?;
    let trace = report_trace(&ev.trace, &ro)?;
    let fin = trace.last().joint;

    let mut summary = Summary::new(cfg, id)?;
    summary.metrics = metrics;
    summary.metrics.n_mean = readout::n_metrics(&fin).n_mean;
    summary.extremum("P_ee_max", max);
    summary.extremum("P_ee_min", min);
    summary.derive("eta", eta);
    summary.derive("p_th", p_th);
    Ok(RunOutput { trace: Some(trace), sweep: Some(sweep), final_table: Some(fin), summary })
}

/// Scattering node settings for the phase-gate scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSetting {
    pub kappa: f64,
    /// rad/ns.
    pub delta: f64,
    pub arm_phase: f64,
}

/// Lattice with node 2 scattering at constant coupling while the packets make their round trip.
fn phase_gate_lattice(
    cfg: &ScenarioConfig,
    s: ScatterSetting,
    grid: TimeGrid,
    emitters: [bool; 2],
    capture: bool,
    eta: f64,
) -> Result<crate::lattice::Lattice> {
    let tm = Timing::new(cfg, 0);
    let (t_on, t_off) = (tm.t_bs, tm.t_bs + 2.0 * tm.delays[1]);
    let k_node = cfg.pulse.kappa_max.max(s.kappa);
    let mut nodes = Vec::new();
    for i in 0..2 {
        let c = tm.emit_center(i);
        let release = setup::emission(cfg, grid, c)?;
        let mut sched = if emitters[i] { release.clone() } else { CouplerSchedule::zeros(grid) };
        if capture {
            sched = sched.combine(&setup::capture(&release, c, tm.arrival(i, 2), cfg.catch.mirror_offset_ns)?)?;
        }
        if i == 1 {
            sched = sched.combine(&CouplerSchedule::window(grid, t_on, t_off, s.kappa)?)?;
        }
        let mut n = qubit(cfg, grid, k_node, sched);
        if i == 1 {
            n.detuning = Profile::window(&grid, 0.0, t_on, t_off, s.delta);
        }
        nodes.push(n);
    }
    let nodes: [NodeParams; 2] = nodes.try_into().expect("two nodes");
    setup::lattice(cfg, &setup::topology(cfg, s.arm_phase), nodes, grid, eta)
}

/// Lossless arm photon numbers after the second splitter pass.
pub fn phase_gate_counts(cfg: &ScenarioConfig, s: ScatterSetting, emitters: [bool; 2]) -> Result<ArmCounts> {
    let tm = Timing::new(cfg, 0);
    let t_snap = tm.snapshot(2);
    let grid = setup::grid(cfg, t_snap + cfg.dt)?;
    let mut lossless = cfg.clone();
    lossless.loss.mode = crate::lattice::LossMode::Leak;
    lossless.loss.t1_e_ns = None;
    lossless.loss.t1_f_ns = None;
    let lat = phase_gate_lattice(&lossless, s, grid, emitters, false, 1.0)?;
    let levels = [emitters[0] as u8, emitters[1] as u8];
    let opts = EvolveOptions { snapshots: vec![setup::row_at(&grid, t_snap)?], ..Default::default() };
    let ev = lat.evolve(lat.node_state(levels)?, &opts)?;
    Ok(ev.snapshots[0])
}

fn phase_gate_trace(cfg: &ScenarioConfig, s: ScatterSetting, emitters: [bool; 2], ro: &Readout, eta: f64) -> Result<Trace> {
    let grid = setup::grid(cfg, cfg.t_end)?;
    let lat = phase_gate_lattice(cfg, s, grid, emitters, true, eta)?;
    let levels = [emitters[0] as u8, emitters[1] as u8];
    let ev = lat.evolve(lat.node_state(levels)?, &EvolveOptions::default())?;
    report_trace(&ev.trace, ro)
}

/// Wrapped scattering phase of the configured sech packet.
pub fn packet_phase(cfg: &ScenarioConfig, kappa: f64, delta: f64) -> Result<f64> {
    let span = 40.0 * cfg.pulse.sigma;
    let grid = TimeGrid::spanning(0.0, span, cfg.dt.min(cfg.pulse.sigma / 20.0))?;
    let u = make_sech(cfg.pulse.sigma, 0.5 * span, grid)?;
    Ok(scattering_overlap(&u, &ScatterParams::new(kappa, delta)?)?.phase)
}

/// Routed single-phonon populations versus the scattering detuning.
pub fn run_mz_single(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    let id = check_id(cfg, &[ScenarioId::MzSingle])?;
    let spec = cfg.sweep_spec()?.ok_or(Error::EmptySweep)?;
    let deltas = spec.values();
    if deltas.is_empty() {
        return Err(Error::EmptySweep);
    }
    let arm_phase = cfg.arm_phase()?;
    let kappa = cfg.scatter.kappa_max;
    let eta = cfg.loss.eta;
    let p_th = floor_p_th(cfg, &split_reference(eta))?;
    let ro = Readout::new(cfg, 2, p_th)?;
    let points = par::try_map(policy, &deltas, |&d| {
        let s = ScatterSetting { kappa, delta: mhz_to_rad_ns(d), arm_phase };
        let counts = phase_gate_counts(cfg, s, [true, false])?;
        Ok::<_, Error>((ro.process(&detect(&counts, eta))?, packet_phase(cfg, kappa, s.delta)?))
    })?;
    let mut sweep = SweepTable::new(&["delta_MHz", "P_Q1", "P_Q2", "P_ee", "scatter_phase_rad"]);
    for (d, (t, phase)) in deltas.iter().zip(&points) {
        sweep.rows.push(vec![*d, t.marginal(0)[1], t.marginal(1)[1], t.get(1, 1), *phase]);
    }
    let p1 = sweep.column("P_Q1").expect("column");
    let p2 = sweep.column("P_Q2").expect("column");
    let (metrics, max, min) = readout::mz_metrics(&deltas, &p1)?;
    let (max2, min2) = readout::extrema(&deltas, &p2)?;

    let s = ScatterSetting { kappa, delta: mhz_to_rad_ns(cfg.scatter.delta_mhz), arm_phase };
    let trace = phase_gate_trace(cfg, s, [true, false], &ro, eta)?;
    let fin = trace.last().joint;

    let mut summary = Summary::new(cfg, id)?;
    summary.metrics = metrics;
    summary.metrics.n_mean = readout::n_metrics(&fin).n_mean;
    summary.extremum("P_Q1_max", max);
    summary.extremum("P_Q1_min", min);
    summary.extremum("P_Q2_max", max2);
    summary.extremum("P_Q2_min", min2);
    summary.derive("eta", eta);
    summary.derive("p_th", p_th);
    Ok(RunOutput { trace: Some(trace), sweep: Some(sweep), final_table: Some(fin), summary })
}

/// Two-phonon interference through the phase gate, versus detuning or coupling scale.
pub fn run_two_phonon_phase(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    let id = check_id(cfg, &[ScenarioId::TwoPhononPhase])?;
    let spec = cfg.sweep_spec()?.ok_or(Error::EmptySweep)?;
    let xs = spec.values();
    if xs.is_empty() {
        return Err(Error::EmptySweep);
    }
    let eta = cfg.loss.eta;
    let p_th = floor_p_th(cfg, &split_reference(eta))?;
    let ro = Readout::new(cfg, 2, p_th)?;
    let scan = spec.name == "kappa_scale";
    let arm_phase = cfg.arm_phase()?;
    let setting = |x: f64| -> ScatterSetting {
        if scan {
            let delta = mhz_to_rad_ns(cfg.phase_scan.delta_mhz);
            let k = cfg.phase_scan.kappa_max.unwrap_or(2.0 * delta.abs());
            ScatterSetting { kappa: x * k, delta, arm_phase }
        } else {
            ScatterSetting { kappa: cfg.scatter.kappa_max, delta: mhz_to_rad_ns(x), arm_phase }
        }
    };
    let counts = par::try_map(policy, &xs, |&x| phase_gate_counts(cfg, setting(x), [true, true]))?;
    let mut sweep = SweepTable::new(&[spec.name.as_str(), "P_Q1", "P_Q2", "P_ee", "w11", "w20_02"]);
    for (x, c) in xs.iter().zip(&counts) {
        let t = ro.process(&detect(c, eta))?;
        sweep.rows.push(vec![*x, t.marginal(0)[1], t.marginal(1)[1], t.get(1, 1), c.p[1][1], c.p[2][0] + c.p[0][2]]);
    }
    let p_ee = sweep.column("P_ee").expect("column");
    let (metrics, max, min) = readout::ee_metrics(&xs, &p_ee)?;

    let trace_setting = if scan {
        setting(1.0)
    } else {
        ScatterSetting { delta: mhz_to_rad_ns(cfg.scatter.delta_mhz), ..setting(0.0) }
    };
    let trace = phase_gate_trace(cfg, trace_setting, [true, true], &ro, eta)?;
    let fin = trace.last().joint;

    let mut summary = Summary::new(cfg, id)?;
    summary.metrics = metrics;
    summary.metrics.n_mean = readout::n_metrics(&fin).n_mean;
    summary.extremum("P_ee_max", max);
    summary.extremum("P_ee_min", min);
    summary.derive("eta", eta);
    summary.derive("p_th", p_th);
    summary.derive("arm_phase", trace_setting.arm_phase);
    Ok(RunOutput { trace: Some(trace), sweep: Some(sweep), final_table: Some(fin), summary })
}
