//! Temporal wavepackets on a uniform grid and their spectra.
//!
//! Spectra use the causal convention `u(ω) = ∫ u(t) e^{+iωt} dt`, which is the
//! one under which the reflection kernel in [`crate::scatter`] describes a
//! retarded response. Overlaps of envelopes do not depend on the choice.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Norm fraction that may fall outside a grid before it counts as truncation.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// Uniform sampling `t0 + k·dt`, `k ∈ [0, n)`, in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Grid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::Grid("t0 must be finite".into()));
        }
        if n < 2 {
            return Err(Error::Grid(format!("need at least 2 samples, got {n}")));
        }
        Ok(Self { t0, dt, n })
    }

    /// Grid covering `[t0, t_end]` with step `dt`; `t_end − t0` must be a multiple of `dt`.
    pub fn spanning(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        let steps = steps_for(t_end - t0, dt)
            .ok_or_else(|| Error::Grid(format!("span {} ns is not a multiple of dt = {dt}", t_end - t0)))?;
        Self::new(t0, dt, steps + 1)
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.t(k))
    }

    /// Index of the grid point nearest to `t`, if `t` lies within half a step of the grid.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        let x = ((t - self.t0) / self.dt).round();
        (x >= 0.0 && x < self.n as f64).then_some(x as usize)
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        let tol = 1e-9 * self.dt;
        self.n == other.n && (self.dt - other.dt).abs() < tol && (self.t0 - other.t0).abs() < tol
    }
}

/// Number of whole steps of `dt` in `span`, if `span` is a multiple of `dt`.
pub fn steps_for(span: f64, dt: f64) -> Option<usize> {
    let x = span / dt;
    let r = x.round();
    ((x - r).abs() < 1e-9 * r.abs().max(1.0) && r >= 0.0).then_some(r as usize)
}

/// Complex amplitude per grid point, in ns^{-1/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub grid: TimeGrid,
    pub amp: Vec<C64>,
}

impl Envelope {
    pub fn new(grid: TimeGrid, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != grid.n {
            return Err(Error::Dimension { expected: grid.n, got: amp.len() });
        }
        if amp.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("envelope amplitude"));
        }
        Ok(Self { grid, amp })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> C64) -> Result<Self> {
        let amp = grid.times().map(f).collect();
        Self::new(grid, amp)
    }

    /// `Σ|amp|²·dt`.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(Error::param("envelope", "cannot normalize a zero envelope"));
        }
        let s = 1.0 / n.sqrt();
        self.amp.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// `⟨self|other⟩ = Σ conj(a)·b·dt`.
    pub fn overlap(&self, other: &Envelope) -> Result<C64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: C64 = self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.dt)
    }

    /// Shifts the envelope later by `tau` (a multiple of dt; negative moves it earlier).
    pub fn delay(&self, tau: f64) -> Result<Self> {
        let dt = self.grid.dt;
        let m = steps_for(tau.abs(), dt).ok_or(Error::OffGridDelay { tau, dt })? as isize;
        let m = if tau < 0.0 { -m } else { m };
        let n = self.grid.n as isize;
        let mut out = vec![C64::new(0.0, 0.0); self.grid.n];
        let mut lost = 0.0;
        for (k, a) in self.amp.iter().enumerate() {
            let j = k as isize + m;
            if (0..n).contains(&j) {
                out[j as usize] = *a;
            } else {
                lost += a.norm_sqr() * dt;
            }
        }
        let total = self.norm_sq();
        if total > 0.0 && lost / total > TRUNCATION_TOL {
            return Err(Error::Truncation { lost: lost / total });
        }
        Ok(Self { grid: self.grid, amp: out })
    }

    /// Grid time of the largest |amp|.
    pub fn peak_time(&self) -> f64 {
        let k = self
            .amp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.grid.t(k)
    }

    /// Full width at half maximum of |amp| (amplitude, not intensity), linearly interpolated.
    pub fn fwhm(&self) -> f64 {
        let mag: Vec<f64> = self.amp.iter().map(|a| a.norm()).collect();
        let (kmax, &peak) = mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty envelope");
        let half = peak / 2.0;
        let dt = self.grid.dt;
        let mut left = self.grid.t(0);
        for k in (1..=kmax).rev() {
            if mag[k - 1] < half {
                let f = (mag[k] - half) / (mag[k] - mag[k - 1]);
                left = self.grid.t(k) - f * dt;
                break;
            }
        }
        let mut right = self.grid.t_end();
        for k in kmax..mag.len() - 1 {
            if mag[k + 1] < half {
                let f = (mag[k] - half) / (mag[k] - mag[k + 1]);
                right = self.grid.t(k) + f * dt;
                break;
            }
        }
        right - left
    }

    pub fn to_spectrum(&self) -> SpectralAmplitude {
        SpectralAmplitude::from_envelope(self)
    }

    /// Same samples on a grid extended with zeros to `n·factor` points.
    pub fn zero_padded(&self, factor: usize) -> Self {
        let n = self.grid.n * factor.max(1);
        let mut amp = self.amp.clone();
        amp.resize(n, C64::new(0.0, 0.0));
        Self { grid: TimeGrid { n, ..self.grid }, amp }
    }

    pub fn to_csv(&self) -> Result<String> {
        io::numeric_csv(
            &["t_ns", "re_amp", "im_amp"],
            self.grid.times().zip(&self.amp).map(|(t, a)| vec![t, a.re, a.im]),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_csv()?.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = io::read_numeric_csv(path, &["t_ns", "re_amp", "im_amp"])?;
        if rows.len() < 2 {
            return Err(Error::Grid("envelope CSV needs at least 2 rows".into()));
        }
        let t0 = rows[0][0];
        let dt = rows[1][0] - t0;
        let grid = TimeGrid::new(t0, dt, rows.len())?;
        for (k, r) in rows.iter().enumerate() {
            if (r[0] - grid.t(k)).abs() > 1e-6 * dt {
                return Err(Error::Grid(format!("non-uniform time column at row {k}")));
            }
        }
        Self::new(grid, rows.iter().map(|r| C64::new(r[1], r[2])).collect())
    }
}

/// Normalized sech envelope `A·sech((t−center)/σ)` with `A = 1/√(2σ)`.
pub fn make_sech(sigma: f64, center: f64, grid: TimeGrid) -> Result<Envelope> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    // Closed-form norm contained in [t0, t_end]: (tanh(b) − tanh(a))/2.
    let a = (grid.t0 - center) / sigma;
    let b = (grid.t_end() - center) / sigma;
    let contained = 0.5 * (b.tanh() - a.tanh());
    let lost = 1.0 - contained;
    if lost > TRUNCATION_TOL {
        return Err(Error::Truncation { lost });
    }
    let amp0 = 1.0 / (2.0 * sigma).sqrt();
    Envelope::from_fn(grid, |t| C64::new(amp0 / ((t - center) / sigma).cosh(), 0.0))?.normalized()
}

/// Amplitude FWHM of a sech of width σ: `2·arccosh(2)·σ`.
pub fn sech_fwhm(sigma: f64) -> f64 {
    2.0 * 2f64.acosh() * sigma
}

/// Closed-form overlap of a sech with itself delayed by `tau`.
pub fn sech_delay_overlap(sigma: f64, tau: f64) -> f64 {
    let x = tau / sigma;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x / x.sinh()
    }
}

/// Spectrum of an envelope on the DFT frequency grid, in ns^{1/2}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    /// Time grid the spectrum was taken from (needed for the inverse).
    pub time_grid: TimeGrid,
    /// Frequency spacing `2π/(n·dt)`, rad/ns.
    pub d_omega: f64,
    /// Ascending angular frequencies, rad/ns.
    pub omega: Vec<f64>,
    pub amp: Vec<C64>,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = FftPlanner::new();
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// Signed DFT index of bin `k` for length `n`, in `[−⌊n/2⌋, ⌈n/2⌉)`.
fn signed_index(k: usize, n: usize) -> isize {
    let half = n / 2;
    if k < n - half {
        k as isize
    } else {
        k as isize - n as isize
    }
}

impl SpectralAmplitude {
    pub fn from_envelope(e: &Envelope) -> Self {
        let g = e.grid;
        let n = g.n;
        let d_omega = 2.0 * std::f64::consts::PI / (n as f64 * g.dt);
        let mut buf = e.amp.clone();
        // Unnormalized inverse FFT computes Σ_j x_j e^{+2πi jk/n}.
        plan(n, true).process(&mut buf);
        let mut pairs: Vec<(isize, C64)> = buf
            .into_iter()
            .enumerate()
            .map(|(k, x)| {
                let m = signed_index(k, n);
                let w = m as f64 * d_omega;
                (m, x * C64::from_polar(g.dt, w * g.t0))
            })
            .collect();
        pairs.sort_by_key(|p| p.0);
        Self {
            time_grid: g,
            d_omega,
            omega: pairs.iter().map(|p| p.0 as f64 * d_omega).collect(),
            amp: pairs.into_iter().map(|p| p.1).collect(),
        }
    }

    /// `Σ|amp|²·dω/2π`.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.d_omega / (2.0 * std::f64::consts::PI)
    }

    /// `∫ conj(a(ω))·b(ω)·dω/2π` on the shared grid.
    pub fn inner(&self, other: &SpectralAmplitude) -> Result<C64> {
        if !self.time_grid.same_as(&other.time_grid) {
            return Err(Error::GridMismatch);
        }
        let s: C64 = self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum();
        Ok(s * (self.d_omega / (2.0 * std::f64::consts::PI)))
    }

    /// Inverse transform back onto the originating time grid.
    pub fn to_envelope(&self) -> Result<Envelope> {
        let g = self.time_grid;
        let n = g.n;
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for (w, a) in self.omega.iter().zip(&self.amp) {
            let m = (w / self.d_omega).round() as isize;
            let k = m.rem_euclid(n as isize) as usize;
            buf[k] = a * C64::from_polar(1.0, -w * g.t0);
        }
        plan(n, false).process(&mut buf);
        let scale = 1.0 / (n as f64 * g.dt);
        Envelope::new(g, buf.into_iter().map(|x| x * scale).collect())
    }
}
