//! Frequency-domain scattering phase and distortion of the configured packet.

use std::f64::consts::PI;

use crate::envelope::{make_sech, TimeGrid};
use crate::error::{Error, Result};
use crate::par::ExecPolicy;
use crate::readout::Extremum;
use crate::scatter::{detuning_sweep_with, mhz_to_rad_ns, phase_crossing, rad_ns_to_mhz};

use super::config::{ScenarioConfig, ScenarioId};
use super::{RunOutput, Summary, SweepTable};

/// Phase and distortion versus detuning; no time evolution, so no trace.
pub fn run_scatter_theory(cfg: &ScenarioConfig, policy: ExecPolicy) -> Result<RunOutput> {
    let id = cfg.id()?;
    if id != ScenarioId::ScatterTheory {
        return Err(Error::Config(format!("config is for scenario {id}")));
    }
    let spec = cfg.sweep_spec()?.ok_or(Error::EmptySweep)?;
    let deltas: Vec<f64> = spec.values().into_iter().map(mhz_to_rad_ns).collect();
    if deltas.is_empty() {
        return Err(Error::EmptySweep);
    }
    let span = 40.0 * cfg.pulse.sigma;
    let grid = TimeGrid::spanning(0.0, span, cfg.dt.min(cfg.pulse.sigma / 20.0))?;
    let u = make_sech(cfg.pulse.sigma, 0.5 * span, grid)?;
    let kappa = cfg.scatter.kappa_max;
    let sw = detuning_sweep_with(policy, &u, kappa, &deltas)?;

    let mut sweep = SweepTable::new(&["delta_MHz", "phase_rad", "distortion"]);
    for p in &sw.points {
        sweep.rows.push(vec![rad_ns_to_mhz(p.delta), p.unwrapped_phase, p.result.distortion]);
    }

    let mut summary = Summary::new(cfg, id)?;
    // Quarter-turn crossings bracket the resonance within a few linewidths.
    let reach = 20.0 * kappa.max(1.0 / cfg.pulse.sigma);
    for (name, target) in [("phase_pi_2", PI / 2.0), ("phase_3pi_2", 1.5 * PI)] {
        let d = phase_crossing(&u, kappa, target, -reach, reach)?;
        summary.extremum(name, Extremum { at: rad_ns_to_mhz(d), value: target });
    }
    Ok(RunOutput { trace: None, sweep: Some(sweep), final_table: None, summary })
}
