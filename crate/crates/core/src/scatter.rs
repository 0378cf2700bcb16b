//! Frequency-domain theory of a single phonon reflecting off a qubit-coupled boundary.
//!
//! The boundary is an all-pass filter `r(ω) = (i(ω−Δ)+κ/2)/(i(ω−Δ)−κ/2)`; the
//! scattered state is `v(ω) = r(ω)·u(ω)` and its overlap with the incident
//! packet gives the imparted phase and the shape distortion.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, SpectralAmplitude};
use crate::error::{Error, Result};
use crate::io;
use crate::par::{self, ExecPolicy};

/// Quadrature tolerance for [`scattering_overlap`].
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterParams {
    /// Maximum decay rate into the channel, rad/ns.
    pub kappa_max: f64,
    /// Detuning of the scatterer from the phonon carrier, rad/ns.
    pub delta: f64,
}

impl ScatterParams {
    pub fn new(kappa_max: f64, delta: f64) -> Result<Self> {
        if !(kappa_max > 0.0 && kappa_max.is_finite()) {
            return Err(Error::param("kappa_max", format!("must be positive, got {kappa_max}")));
        }
        if !delta.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        Ok(Self { kappa_max, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterResult {
    /// `arg⟨u|v⟩` in `[0, 2π)`.
    pub phase: f64,
    /// `1 − |⟨u|v⟩|`.
    pub distortion: f64,
    pub overlap: C64,
}

impl ScatterResult {
    pub fn from_overlap(overlap: C64) -> Self {
        Self { phase: wrap_phase(overlap.arg()), distortion: (1.0 - overlap.norm()).clamp(0.0, 1.0), overlap }
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

pub fn reflection_coefficient(omega: f64, p: &ScatterParams) -> C64 {
    let x = omega - p.delta;
    let h = p.kappa_max / 2.0;
    C64::new(h, x) / C64::new(-h, x)
}

/// Phase of a monochromatic carrier (ω = 0) reflecting off the boundary.
pub fn monochromatic_phase(p: &ScatterParams) -> f64 {
    wrap_phase(reflection_coefficient(0.0, p).arg())
}

pub fn apply_filter(s: &SpectralAmplitude, p: &ScatterParams) -> SpectralAmplitude {
    let amp = s.omega.iter().zip(&s.amp).map(|(&w, a)| a * reflection_coefficient(w, p)).collect();
    SpectralAmplitude { amp, ..s.clone() }
}

/// Scatters an envelope in the time domain: transform, filter, invert.
pub fn scatter_envelope(u: &Envelope, p: &ScatterParams) -> Result<Envelope> {
    apply_filter(&u.to_spectrum(), p).to_envelope()
}

fn overlap_on(s: &SpectralAmplitude, p: &ScatterParams) -> C64 {
    let sum: C64 = s.omega.iter().zip(&s.amp).map(|(&w, a)| a.norm_sqr() * reflection_coefficient(w, p)).sum();
    sum * (s.d_omega / (2.0 * PI))
}

/// `⟨u|v⟩ = ∫|u(ω)|² r(ω) dω/2π`, checked by refining the frequency grid.
pub fn scattering_overlap(u: &Envelope, p: &ScatterParams) -> Result<ScatterResult> {
    let mut coarse = overlap_on(&u.to_spectrum(), p);
    let mut estimate = f64::INFINITY;
    for factor in [2usize, 4, 8, 16] {
        let fine = overlap_on(&u.zero_padded(factor).to_spectrum(), p);
        estimate = (fine - coarse).norm();
        coarse = fine;
        if estimate <= QUADRATURE_TOL {
            return Ok(ScatterResult::from_overlap(fine));
        }
    }
    Err(Error::Quadrature { estimate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub result: ScatterResult,
    /// Phase continued from the previous sweep point onto the nearest branch.
    pub unwrapped_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetuningSweep {
    pub kappa: f64,
    pub points: Vec<SweepPoint>,
}

pub fn detuning_sweep(u: &Envelope, kappa: f64, deltas: &[f64]) -> Result<DetuningSweep> {
    detuning_sweep_with(ExecPolicy::from_env(), u, kappa, deltas)
}

pub fn detuning_sweep_with(policy: ExecPolicy, u: &Envelope, kappa: f64, deltas: &[f64]) -> Result<DetuningSweep> {
    let results = par::try_map(policy, deltas, |&d| scattering_overlap(u, &ScatterParams::new(kappa, d)?))?;
    let mut points = Vec::with_capacity(results.len());
    let mut prev: Option<f64> = None;
    for (&delta, result) in deltas.iter().zip(results) {
        let unwrapped = match prev {
            None => result.phase,
            Some(q) => result.phase + TAU * ((q - result.phase) / TAU).round(),
        };
        prev = Some(unwrapped);
        points.push(SweepPoint { delta, result, unwrapped_phase: unwrapped });
    }
    Ok(DetuningSweep { kappa, points })
}

impl DetuningSweep {
    pub fn to_csv(&self) -> Result<String> {
        io::numeric_csv(
            &["delta_MHz", "phase_rad", "distortion"],
            self.points.iter().map(|p| vec![rad_ns_to_mhz(p.delta), p.unwrapped_phase, p.result.distortion]),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_csv()?.as_bytes())
    }
}

/// Detuning in rad/ns to frequency in MHz.
pub fn rad_ns_to_mhz(x: f64) -> f64 {
    x / TAU * 1e3
}

/// Frequency in MHz to detuning in rad/ns.
pub fn mhz_to_rad_ns(f: f64) -> f64 {
    f * 1e-3 * TAU
}

/// Detuning in `[lo, hi]` at which the scattering phase equals `target`.
///
/// The phase falls monotonically from 2π to 0 as Δ runs from −∞ to +∞ for
/// packets with a symmetric spectrum, so bisection on the wrapped phase is safe.
pub fn phase_crossing(u: &Envelope, kappa: f64, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |d: f64| -> Result<f64> { Ok(scattering_overlap(u, &ScatterParams::new(kappa, d)?)?.phase - target) };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::param("bracket", format!("phase {target} not bracketed by [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < 1e-13 * kappa.max(1.0) {
            break;
        }
        if f(m)?.signum() == fa.signum() {
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
    use crate::envelope::{make_sech, TimeGrid};
    use approx::assert_relative_eq;

    fn sech() -> Envelope {
        make_sech(20.0, 800.0, TimeGrid::new(0.0, 0.5, 3200).unwrap()).unwrap()
    }

    #[test]
    fn reflection_special_values() {
        let p = ScatterParams::new(0.1, 0.03).unwrap();
        let r = reflection_coefficient(0.03, &p);
        assert!((r + 1.0).norm() < 1e-15);
        assert!((reflection_coefficient(1e9, &p) - 1.0).norm() < 1e-9);
        assert!(ScatterParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn monochromatic_phase_sign() {
        // Blue detuning by κ/2 leaves a quarter-turn.
        let p = ScatterParams::new(0.1, 0.05).unwrap();
        assert_relative_eq!(monochromatic_phase(&p), PI / 2.0, epsilon = 1e-12);
        let q = ScatterParams::new(0.1, -0.05).unwrap();
        assert_relative_eq!(monochromatic_phase(&q), 3.0 * PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn resonant_phase_is_pi() {
        let r = scattering_overlap(&sech(), &ScatterParams::new(0.1, 0.0).unwrap()).unwrap();
        assert!((r.phase - PI).abs() < 1e-9);
        assert!(r.distortion > 0.0 && r.distortion < 1.0);
    }

    #[test]
    fn filter_preserves_norm() {
        let s = sech().to_spectrum();
        let v = apply_filter(&s, &ScatterParams::new(0.1, 0.02).unwrap());
        assert_relative_eq!(v.norm_sq(), s.norm_sq(), epsilon = 1e-12);
    }

    #[test]
    fn single_point_sweep_matches_overlap() {
        let u = sech();
        let sw = detuning_sweep(&u, 0.1, &[0.0]).unwrap();
        let r = scattering_overlap(&u, &ScatterParams::new(0.1, 0.0).unwrap()).unwrap();
        assert_eq!(sw.points[0].result, r);
    }

    #[test]
    fn unwrapping_is_continuous() {
        let u = sech();
        let deltas: Vec<f64> = (0..41).map(|k| -0.4 + 0.02 * k as f64).collect();
        let sw = detuning_sweep(&u, 0.1, &deltas).unwrap();
        for w in sw.points.windows(2) {
            assert!((w[1].unwrapped_phase - w[0].unwrapped_phase).abs() < PI);
        }
    }
}
