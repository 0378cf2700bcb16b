//! Modulated two-phonon capture by qutrits, its schedule optimizer, and the
//! time-reversal consistency check.

use crate::envelope::TimeGrid;
use crate::error::{Error, Result};
use crate::lattice::{BeamSplitter, EvolveOptions, Lattice, ModulationWindow, NodeParams, Trace};
use crate::par::ExecPolicy;
use crate::pulse::{bessel_balance_ratio, modulation_for, CouplerSchedule, ModulationDrive};
use crate::readout::{self, calibrate_thermal_floor, JointTable};
use crate::scatter::mhz_to_rad_ns;

use super::config::{ScenarioConfig, ScenarioId};
use super::interferometer::report_trace;
use super::setup::{self, split_reference, Readout, Timing};
use super::{RunOutput, Summary, SweepTable};

/// Golden-section iterations per stage.
const GOLDEN_ITERS: usize = 14;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Catch schedule scale and modulation index with the objective they reach.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tuning {
    pub scale: f64,
    pub ratio: f64,
    pub objective: f64,
}

/// Raw (pre-readout) result of one two-phonon capture evolution.
#[derive(Debug, Clone)]
pub struct CatchRun {
    pub trace: Trace,
    /// Row of the reported populations.
    pub measure_row: usize,
    pub table: JointTable,
}

impl CatchRun {
    /// P(gf) + P(fg).
    pub fn objective(&self) -> f64 {
        self.table.get(0, 2) + self.table.get(2, 0)
    }
}

fn chis(cfg: &ScenarioConfig) -> [f64; 2] {
    [mhz_to_rad_ns(cfg.nodes.chi1_mhz), mhz_to_rad_ns(cfg.nodes.chi2_mhz)]
}

fn drive(chi: f64, ratio: f64) -> Result<ModulationDrive> {
    modulation_for(chi)?.with_ratio(ratio)
}

/// Schedule clipped to the coupler ceiling.
fn saturate(s: &CouplerSchedule, cap: f64) -> Result<CouplerSchedule> {
    CouplerSchedule::new(s.grid, s.kappa.iter().map(|k| k.min(cap)).collect())
}

fn window(s: &CouplerSchedule, grid: &TimeGrid) -> Option<(f64, f64)> {
    s.support().map(|(a, b)| (a, b + grid.dt))
}

/// Both nodes release one phonon; the bunched pair is caught by modulated qutrits.
fn catch_lattice(cfg: &ScenarioConfig, scale: f64, ratio: f64, grid: TimeGrid) -> Result<(Lattice, f64)> {
    let tm = Timing::new(cfg, 0);
    let cap = cfg.catch.kappa_max;
    let k_node = cfg.pulse.kappa_max.max(cap);
    let mut nodes = Vec::new();
    let mut end = f64::NEG_INFINITY;
    for (i, chi) in chis(cfg).into_iter().enumerate() {
        let c = tm.emit_center(i);
        let release = setup::emission(cfg, grid, c)?;
        let d = drive(chi, ratio)?;
        let gain = if cfg.catch.modulation { scale / d.ladder().c_ge.powi(2) } else { scale };
        let catch = setup::capture(&release, c, tm.arrival(i, 1), cfg.catch.mirror_offset_ns)?;
        let catch = saturate(&catch.scaled(gain)?, cap)?;
        let span = window(&catch, &grid).ok_or_else(|| Error::Config("empty catch schedule".into()))?;
        end = end.max(span.1);
        let mut n = NodeParams::qutrit(grid, k_node, chi);
        n.schedule = release.combine(&catch)?;
        if cfg.catch.modulation {
            n.modulation = Some(ModulationWindow { drive: d, t_on: span.0, t_off: span.1 });
        }
        setup::apply_lifetimes(cfg, &mut n);
        nodes.push(n);
    }
    let nodes: [NodeParams; 2] = nodes.try_into().expect("two nodes");
    let mut lat = setup::lattice(cfg, &setup::topology(cfg, cfg.arm_phase()?), nodes, grid, cfg.loss.eta)?;
    lat.modulation_mode = cfg.catch.modulation_mode;
    lat.validate()?;
    Ok((lat, cfg.catch.measure_at_ns.unwrap_or(end)))
}

/// Evolves the capture; `full_window` keeps the whole configured time span.
pub fn catch_evolution(cfg: &ScenarioConfig, scale: f64, ratio: f64, full_window: bool, policy: ExecPolicy) -> Result<CatchRun> {
    let grid = setup::grid(cfg, cfg.t_end)?;
    let (_, t_meas) = catch_lattice(cfg, scale, ratio, grid)?;
    let t_meas = t_meas.min(grid.t_end());
    let grid = if full_window { grid } else { setup::grid(cfg, t_meas + cfg.dt)? };
    let (lat, _) = catch_lattice(cfg, scale, ratio, grid)?;
    let ev = lat.evolve(lat.node_state([1, 1])?, &EvolveOptions { policy, ..Default::default() })?;
    let measure_row = setup::row_at(&grid, t_meas)?.min(ev.trace.rows.len() - 1);
    let table = ev.trace.rows[measure_row].joint;
    Ok(CatchRun { trace: ev.trace, measure_row, table })
}

fn default_ratio(cfg: &ScenarioConfig) -> f64 {
    cfg.catch.ratio.unwrap_or_else(bessel_balance_ratio)
}

/// Golden-section maximization on `[a, b]`; every evaluation goes through `eval`.
fn golden(mut a: f64, mut b: f64, eval: &mut dyn FnMut(f64) -> Result<f64>) -> Result<()> {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..GOLDEN_ITERS {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
    }
    Ok(())
}

/// Tunes the catch schedule scale over [0.25, 2], then δ/Ω over [0.5, 1.5]·x*,
/// maximizing P(gf) + P(fg). Returns the best point and every evaluation with an
/// "accepted" flag marking improvements of the best objective.
pub fn optimize_catch(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<(Tuning, Vec<(Tuning, bool)>)> {
    let x_star = bessel_balance_ratio();
    let mut trail: Vec<(Tuning, bool)> = Vec::new();
    let mut best = Tuning { scale: cfg.catch.scale, ratio: default_ratio(cfg), objective: f64::NEG_INFINITY };
    let evaluate = |scale: f64, ratio: f64, best: &mut Tuning, trail: &mut Vec<(Tuning, bool)>| -> Result<f64> {
        let objective = catch_evolution(cfg, scale, ratio, false, policy)?.objective();
        if !objective.is_finite() {
            return Err(Error::NonFinite("catch objective"));
        }
        let t = Tuning { scale, ratio, objective };
        let accepted = objective > best.objective;
        if accepted {
            *best = t;
        }
        trail.push((t, accepted));
        Ok(objective)
    };
    evaluate(best.scale, best.ratio, &mut best, &mut trail)?;
    let ratio0 = best.ratio;
    golden(0.25, 2.0, &mut |s| evaluate(s, ratio0, &mut best, &mut trail))?;
    let scale1 = best.scale;
    golden(0.5 * x_star, 1.5 * x_star, &mut |r| evaluate(scale1, r, &mut best, &mut trail))?;
    Ok((best, trail))
}

/// Two-phonon capture with optional optimization of the schedule.
pub fn run_two_phonon_catch(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    let id = cfg.id()?;
    if !matches!(id, ScenarioId::TwoPhononCatch | ScenarioId::OptimizeCatch) {
        return Err(Error::Config(format!("config is for scenario {id}")));
    }
    let (tuning, sweep) = if cfg.catch.optimize {
        let (best, trail) = optimize_catch(cfg, policy)?;
        let mut table = SweepTable::new(&["step", "scale", "ratio", "objective", "accepted"]);
        for (i, (t, acc)) in trail.iter().enumerate() {
            table.rows.push(vec![i as f64, t.scale, t.ratio, t.objective, *acc as u8 as f64]);
        }
        (best, Some(table))
    } else {
        (Tuning { scale: cfg.catch.scale, ratio: default_ratio(cfg), objective: f64::NAN }, None)
    };
    let run = catch_evolution(cfg, tuning.scale, tuning.ratio, true, policy)?;
    let p_th = match cfg.calibration.floor {
        Some(f) => calibrate_thermal_floor(&split_reference(cfg.loss.eta), f)?,
        None => cfg.loss.p_th,
    };
    let ro = Readout::new(cfg, 3, p_th)?;
    let trace = report_trace(&run.trace, &ro)?;
    let fin = trace.rows[run.measure_row].joint;

    let mut summary = Summary::new(cfg, id)?;
    summary.metrics = readout::n_metrics(&fin);
    summary.derive("scale", tuning.scale);
    summary.derive("ratio", tuning.ratio);
    summary.derive("objective", run.objective());
    summary.derive("measure_t_ns", trace.rows[run.measure_row].t);
    summary.derive("p_th", p_th);
    for (name, a, b) in [("P_gf", 0, 2), ("P_fg", 2, 0), ("P_ge", 0, 1), ("P_eg", 1, 0), ("P_ee", 1, 1), ("P_ef", 1, 2), ("P_fe", 2, 1), ("P_ff", 2, 2)] {
        summary.derive(name, fin.get(a, b));
    }
    Ok(RunOutput { trace: Some(trace), sweep, final_table: Some(fin), summary })
}

/// Node 1 releases both phonons from |f⟩ through the modulated ladder; node 2
/// catches them with the mirrored schedule. Returns node 2's final P(f).
pub fn time_reversal_catch(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<f64> {
    let tm = Timing::new(cfg, 0);
    let grid = setup::grid(cfg, cfg.t_end)?;
    let x = default_ratio(cfg);
    let cap = cfg.catch.kappa_max;
    let c = cfg.pulse.center;
    let release = setup::emission(cfg, grid, c)?;
    let mut nodes = Vec::new();
    for (i, chi) in chis(cfg).into_iter().enumerate() {
        let d = drive(chi, x)?;
        let gain = 1.0 / d.ladder().c_ge.powi(2);
        let base = if i == 0 { release.clone() } else { setup::capture(&release, c, tm.arrival(1, 1), 0.0)? };
        let sched = base.scaled(gain)?;
        sched.check_cap(cap)?;
        let span = window(&sched, &grid).ok_or_else(|| Error::Config("empty schedule".into()))?;
        let mut n = NodeParams::qutrit(grid, cap, chi);
        n.schedule = sched;
        n.modulation = Some(ModulationWindow { drive: d, t_on: span.0, t_off: span.1 });
        nodes.push(n);
    }
    let nodes: [NodeParams; 2] = nodes.try_into().expect("two nodes");
    let mut topo = setup::topology(cfg, 0.0);
    topo.bs = BeamSplitter::with_transmission(1.0)?;
    let mut lossless = cfg.clone();
    lossless.loss.mode = crate::lattice::LossMode::Leak;
    let mut lat = setup::lattice(&lossless, &topo, nodes, grid, 1.0)?;
    lat.modulation_mode = cfg.catch.modulation_mode;
    lat.validate()?;
    let ev = lat.evolve(lat.node_state([2, 0])?, &EvolveOptions { policy, ..Default::default() })?;
    Ok(ev.trace.last().p(1)[2])
}
