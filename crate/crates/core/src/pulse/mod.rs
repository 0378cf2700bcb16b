//! Coupler schedules for shaped emission and time-reversed capture, and the
//! sideband drive that turns a transmon ladder into an effective oscillator.

pub mod bessel;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, TimeGrid};
use crate::error::{Error, Result};
use crate::io;

/// Tail norm below which the shaping law is clipped to zero.
pub const CLIP_TAIL: f64 = 1e-8;

/// Relative slack allowed between a required rate and the cap.
const CAP_SLACK: f64 = 1e-6;

/// Coupling rate κ(t) into the channel, rad/ns, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerSchedule {
    pub grid: TimeGrid,
    pub kappa: Vec<f64>,
}

impl CouplerSchedule {
    pub fn new(grid: TimeGrid, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != grid.n {
            return Err(Error::Dimension { expected: grid.n, got: kappa.len() });
        }
        if let Some(k) = kappa.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(Error::param("kappa", format!("must be finite and nonnegative, got {k}")));
        }
        Ok(Self { grid, kappa })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, kappa: vec![0.0; grid.n] }
    }

    /// Constant `kappa` on `[t_on, t_off)`, zero elsewhere.
    pub fn window(grid: TimeGrid, t_on: f64, t_off: f64, kappa: f64) -> Result<Self> {
        let k = grid.times().map(|t| if t >= t_on - 1e-9 && t < t_off - 1e-9 { kappa } else { 0.0 }).collect();
        Self::new(grid, k)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.kappa.get(k).copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.kappa.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, self.kappa.iter().map(|k| k * factor).collect())
    }

    /// Pointwise sum of two schedules on the same grid.
    pub fn combine(&self, other: &CouplerSchedule) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Self::new(self.grid, self.kappa.iter().zip(&other.kappa).map(|(a, b)| a + b).collect())
    }

    /// Rejects schedules exceeding `cap` (beyond round-off slack).
    pub fn check_cap(&self, cap: f64) -> Result<()> {
        let m = self.max();
        if m > cap * (1.0 + CAP_SLACK) {
            return Err(Error::InfeasibleSchedule { required: m, cap, deficit: m - cap });
        }
        Ok(())
    }

    /// First and last grid times with nonzero coupling.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.kappa.iter().position(|&k| k > 0.0)?;
        let last = self.kappa.iter().rposition(|&k| k > 0.0)?;
        Some((self.grid.t(first), self.grid.t(last)))
    }

    fn interpolate(&self, t: f64) -> Option<f64> {
        let x = (t - self.grid.t0) / self.grid.dt;
        let n = self.grid.n;
        if x < -1e-9 || x > (n - 1) as f64 + 1e-9 {
            return None;
        }
        let x = x.clamp(0.0, (n - 1) as f64);
        let i = x.floor() as usize;
        if i + 1 >= n {
            return Some(self.kappa[n - 1]);
        }
        let f = x - i as f64;
        if f < 1e-9 {
            return Some(self.kappa[i]);
        }
        if f > 1.0 - 1e-9 {
            return Some(self.kappa[i + 1]);
        }
        Some(self.kappa[i] * (1.0 - f) + self.kappa[i + 1] * f)
    }

    pub fn to_csv(&self) -> Result<String> {
        io::numeric_csv(
            &["t_ns", "kappa_rad_per_ns"],
            self.grid.times().zip(&self.kappa).map(|(t, k)| vec![t, *k]),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_csv()?.as_bytes())
    }
}

/// Raw output of the emission shaping law before feasibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingLaw {
    pub kappa: Vec<f64>,
    /// Norm left in the emitter when the law is clipped.
    pub residual: f64,
    /// Index of the first clipped sample (`n` if none).
    pub clip_index: usize,
}

/// Tail integrals `D_k = ∫_{t_k}^{t_end} f dt`, fourth order per interval.
fn tail_integrals(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let interval = |j: usize| -> f64 {
        if n < 4 {
            return 0.5 * h * (f[j] + f[j + 1]);
        }
        if j == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if j == n - 2 {
            h / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1])
        } else {
            h / 24.0 * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2])
        }
    };
    let mut d = vec![0.0; n];
    for j in (0..n - 1).rev() {
        d[j] = d[j + 1] + interval(j).max(0.0);
    }
    d
}

/// `κ(t) = |u(t)|² / (1 − ∫_{−∞}^{t}|u|²)`, zero once the remaining norm drops below [`CLIP_TAIL`].
pub fn shaping_law(target: &Envelope) -> ShapingLaw {
    let f: Vec<f64> = target.amp.iter().map(|a| a.norm_sqr()).collect();
    let d = tail_integrals(&f, target.grid.dt);
    let mut kappa = vec![0.0; f.len()];
    let mut clip_index = f.len();
    for k in 0..f.len() {
        if d[k] < CLIP_TAIL {
            clip_index = k;
            break;
        }
        kappa[k] = f[k] / d[k];
    }
    let residual = if clip_index < f.len() { d[clip_index] } else { 0.0 };
    ShapingLaw { kappa, residual, clip_index }
}

/// Schedule that releases `target` from an excited emitter.
pub fn emission_schedule(target: &Envelope, kappa_cap: f64) -> Result<CouplerSchedule> {
    if !(kappa_cap > 0.0) {
        return Err(Error::param("kappa_cap", "must be positive"));
    }
    let norm = target.norm_sq();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::param("target", format!("must be normalized, norm is {norm}")));
    }
    let law = shaping_law(target);
    let s = CouplerSchedule::new(target.grid, law.kappa)?;
    s.check_cap(kappa_cap)?;
    Ok(s)
}

/// Closed-form emission rate for a sech of width σ centred at `center`.
pub fn sech_emission_rate(sigma: f64, center: f64, t: f64) -> f64 {
    (1.0 + ((t - center) / sigma).tanh()) / sigma
}

/// Time reversal of `release` about `t_mirror`, resampled on the same grid.
pub fn catch_schedule(release: &CouplerSchedule, t_mirror: f64) -> Result<CouplerSchedule> {
    let g = release.grid;
    if t_mirror < g.t0 || t_mirror > g.t_end() {
        return Err(Error::param("t_mirror", format!("{t_mirror} ns lies outside the grid")));
    }
    let peak = release.max();
    let lost = release
        .kappa
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = 2.0 * t_mirror - g.t(*k);
            t < g.t0 - 1e-9 || t > g.t_end() + 1e-9
        })
        .map(|(_, &k)| k)
        .fold(0.0, f64::max);
    if peak > 0.0 && lost > 1e-6 * peak {
        return Err(Error::Truncation { lost: lost / peak });
    }
    let kappa = g.times().map(|t| release.interpolate(2.0 * t_mirror - t).unwrap_or(0.0)).collect();
    CouplerSchedule::new(g, kappa)
}

/// Sideband drive on the qubit frequency: `δ·cos(Ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationDrive {
    /// Ω, rad/ns.
    pub omega_mod: f64,
    /// δ, rad/ns.
    pub delta_amp: f64,
    /// δ/Ω.
    pub ratio: f64,
}

impl ModulationDrive {
    pub fn new(omega_mod: f64, delta_amp: f64) -> Result<Self> {
        if !(omega_mod > 0.0 && omega_mod.is_finite()) {
            return Err(Error::param("omega_mod", "must be positive"));
        }
        if !delta_amp.is_finite() {
            return Err(Error::param("delta_amp", "must be finite"));
        }
        Ok(Self { omega_mod, delta_amp, ratio: delta_amp / omega_mod })
    }

    pub fn with_ratio(&self, ratio: f64) -> Result<Self> {
        Self::new(self.omega_mod, ratio * self.omega_mod)
    }

    pub fn ladder(&self) -> LadderCoefficients {
        ladder_coefficients(self)
    }
}

/// Effective exchange matrix elements of the g–e and e–f transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderCoefficients {
    pub c_ge: f64,
    pub c_ef: f64,
}

impl LadderCoefficients {
    /// Bare transmon ladder (harmonic-oscillator matrix elements 1 and √2).
    pub const BARE: Self = Self { c_ge: 1.0, c_ef: std::f64::consts::SQRT_2 };
    /// Two-level node.
    pub const QUBIT: Self = Self { c_ge: 1.0, c_ef: 0.0 };
}

/// `(J0(δ/Ω), √2·J1(δ/Ω))`.
pub fn ladder_coefficients(d: &ModulationDrive) -> LadderCoefficients {
    LadderCoefficients {
        c_ge: bessel::j0(d.ratio),
        c_ef: std::f64::consts::SQRT_2 * bessel::j1(d.ratio),
    }
}

/// Smallest positive root of `J0(x) = J1(x)`.
pub fn bessel_balance_ratio() -> f64 {
    bessel::balance_root_with(bessel::BesselMethod::Series)
}

/// Drive at Ω = χ with δ = x*·χ, which equalizes the two ladder rungs.
pub fn modulation_for(chi: f64) -> Result<ModulationDrive> {
    if !(chi > 0.0) {
        return Err(Error::param("chi", "must be positive"));
    }
    ModulationDrive::new(chi, bessel_balance_ratio() * chi)
}
