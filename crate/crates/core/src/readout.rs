//! Readout modelling: confusion matrices, correction, thermal floors and visibility metrics.
//!
//! Matrices are stored column-stochastic: entry `(m, p)` is the probability of
//! measuring outcome `m` given prepared state `p`, so `p_meas = C·p_true`
//! conserves probability. Tables that list prepared states as rows
//! are transposed on load.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest condition number accepted by [`ConfusionMatrix::correct`].
pub const MAX_CONDITION: f64 = 1e6;

/// Column-sum tolerance for matrices without quoted uncertainties.
pub const COLUMN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// Level count per node (outcome order is node 1 major).
    pub dims: Vec<usize>,
    /// Row-major `dim × dim`, rows = measured, columns = prepared.
    pub entries: Vec<f64>,
    /// Per-entry standard deviations, same layout, when known.
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionJson {
    pub dims: Vec<usize>,
    pub rows_are_prepared: bool,
    pub entries: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Validates a column-stochastic matrix.
    pub fn new(dims: Vec<usize>, entries: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let c = Self { dims, entries, sigma };
        c.validate()?;
        Ok(c)
    }

    /// Builds from a table whose rows are prepared states.
    pub fn from_rows_prepared(dims: Vec<usize>, rows: &[Vec<f64>], sigma: Option<&[Vec<f64>]>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension { expected: d, got: rows.len() });
        }
        let t = |m: &[Vec<f64>]| -> Vec<f64> { (0..d * d).map(|i| m[i % d][i / d]).collect() };
        Self::new(dims, t(rows), sigma.map(t))
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        let entries = (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect();
        Self { dims, entries, sigma: None }
    }

    pub fn get(&self, measured: usize, prepared: usize) -> f64 {
        self.entries[measured * self.dim() + prepared]
    }

    /// Column `prepared` as a measured-outcome distribution.
    pub fn column(&self, prepared: usize) -> Vec<f64> {
        (0..self.dim()).map(|m| self.get(m, prepared)).collect()
    }

    /// Lists every violated invariant (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dims.is_empty() || self.dims.iter().any(|&d| d != 2 && d != 3) {
            v.push(format!("dims must be 2 or 3 per node, got {:?}", self.dims));
            return v;
        }
        let d = self.dim();
        if self.entries.len() != d * d {
            v.push(format!("expected {} entries, got {}", d * d, self.entries.len()));
            return v;
        }
        if let Some(s) = &self.sigma {
            if s.len() != d * d {
                v.push("uncertainty table has the wrong size".into());
                return v;
            }
        }
        if self.entries.iter().any(|x| !x.is_finite() || *x < 0.0) {
            v.push("entries must be finite and nonnegative".into());
        }
        for p in 0..d {
            let sum: f64 = (0..d).map(|m| self.get(m, p)).sum();
            let tol = match &self.sigma {
                Some(s) => (0..d).map(|m| s[m * d + p].powi(2)).sum::<f64>().sqrt().max(COLUMN_TOL),
                None => COLUMN_TOL,
            };
            if (sum - 1.0).abs() > tol {
                v.push(format!("column {p} sums to {sum:.6}, outside 1 ± {tol:.2e}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            Some(msg) => Err(Error::Confusion(msg.clone())),
            None => Ok(()),
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.entries)
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// `p_meas = C·p_true`.
    pub fn apply(&self, p_true: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if p_true.len() != d {
            return Err(Error::Dimension { expected: d, got: p_true.len() });
        }
        Ok((0..d).map(|m| (0..d).map(|p| self.get(m, p) * p_true[p]).sum()).collect())
    }

    /// `p_corr = C⁻¹·p_meas`; entries may come out slightly negative.
    pub fn correct(&self, p_meas: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if p_meas.len() != d {
            return Err(Error::Dimension { expected: d, got: p_meas.len() });
        }
        let cond = self.condition_number();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned { cond });
        }
        let lu = self.matrix().lu();
        let x = lu
            .solve(&nalgebra::DVector::from_column_slice(p_meas))
            .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        Ok(x.iter().copied().collect())
    }

    /// Kronecker product, node 1 major.
    pub fn tensor(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let (a, b) = (self.dim(), other.dim());
        let d = a * b;
        let kron = |x: &[f64], y: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; d * d];
            for i in 0..a {
                for j in 0..a {
                    for k in 0..b {
                        for l in 0..b {
                            out[(i * b + k) * d + (j * b + l)] = x[i * a + j] * y[k * b + l];
                        }
                    }
                }
            }
            out
        };
        // First-order propagation of independent entry uncertainties.
        let sigma = match (&self.sigma, &other.sigma) {
            (None, None) => None,
            (sa, sb) => {
                let za = vec![0.0; a * a];
                let zb = vec![0.0; b * b];
                let sa = sa.as_deref().unwrap_or(&za);
                let sb = sb.as_deref().unwrap_or(&zb);
                let t1 = kron(sa, &other.entries);
                let t2 = kron(&self.entries, sb);
                Some(t1.iter().zip(&t2).map(|(x, y)| x.hypot(*y)).collect())
            }
        };
        let mut dims = self.dims.clone();
        dims.extend(&other.dims);
        ConfusionMatrix { dims, entries: kron(&self.entries, &other.entries), sigma }
    }

    pub fn from_json(j: &ConfusionJson) -> Result<Self> {
        let d: usize = j.dims.iter().product();
        if j.rows_are_prepared {
            Self::from_rows_prepared(j.dims.clone(), &j.entries, None)
        } else {
            if j.entries.len() != d {
                return Err(Error::Dimension { expected: d, got: j.entries.len() });
            }
            Self::new(j.dims.clone(), j.entries.concat(), None)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// Projects a corrected vector onto the probability simplex by clipping and renormalizing.
pub fn project_simplex(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if s > 0.0 {
        clipped.iter().map(|x| x / s).collect()
    } else {
        clipped
    }
}

/// Parses `0.988(1)` style values into (value, standard deviation).
pub fn parse_uncertain(s: &str) -> Result<(f64, f64)> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse uncertain value `{s}`"));
    let (num, unc) = match s.split_once('(') {
        Some((n, rest)) => (n, Some(rest.strip_suffix(')').ok_or_else(bad)?)),
        None => (s, None),
    };
    let value: f64 = num.parse().map_err(|_| bad())?;
    let sigma = match unc {
        None => 0.0,
        Some(u) => {
            let digits: f64 = u.parse().map_err(|_| bad())?;
            let decimals = num.split_once('.').map(|(_, f)| f.len()).unwrap_or(0);
            digits * 10f64.powi(-(decimals as i32))
        }
    };
    Ok((value, sigma))
}

fn measured_table(dims: Vec<usize>, rows: &[&[&str]]) -> ConfusionMatrix {
    let parsed: Vec<Vec<(f64, f64)>> =
        rows.iter().map(|r| r.iter().map(|s| parse_uncertain(s).expect("table literal")).collect()).collect();
    let vals: Vec<Vec<f64>> = parsed.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let sig: Vec<Vec<f64>> = parsed.iter().map(|r| r.iter().map(|x| x.1).collect()).collect();
    ConfusionMatrix::from_rows_prepared(dims, &vals, Some(&sig)).expect("measured table validates")
}

/// Measured two-qubit readout table (prepared gg, ge, eg, ee as rows).
pub fn measured_two_qubit() -> ConfusionMatrix {
    measured_table(
        vec![2, 2],
        &[
            &["0.988(1)", "0.006(1)", "0.006(1)", "0.00002(6)"],
            &["0.050(3)", "0.944(4)", "0.0002(2)", "0.006(1)"],
            &["0.082(3)", "0.0005(2)", "0.912(3)", "0.005(1)"],
            &["0.005(1)", "0.090(3)", "0.045(3)", "0.861(5)"],
        ],
    )
}

/// Measured single-qutrit readout table of node 1.
pub fn measured_qutrit_1() -> ConfusionMatrix {
    measured_table(
        vec![3],
        &[
            &["0.983(1)", "0.017(1)", "0.0003(2)"],
            &["0.104(9)", "0.884(9)", "0.011(1)"],
            &["0.028(3)", "0.108(7)", "0.864(7)"],
        ],
    )
}

/// Measured single-qutrit readout table of node 2.
pub fn measured_qutrit_2() -> ConfusionMatrix {
    measured_table(
        vec![3],
        &[
            &["0.988(1)", "0.010(1)", "0.0016(6)"],
            &["0.10(3)", "0.90(3)", "0.003(2)"],
            &["0.020(3)", "0.079(4)", "0.901(5)"],
        ],
    )
}

/// Joint level distribution of the two nodes, node 1 major: index `3·a + b` for levels a, b.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointTable(pub [[f64; 3]; 3]);

impl JointTable {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[a][b]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }

    /// Marginal of node 1 (`which = 0`) or node 2 over levels g, e, f.
    pub fn marginal(&self, which: usize) -> [f64; 3] {
        let mut m = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[if which == 0 { a } else { b }] += self.0[a][b];
            }
        }
        m
    }

    /// ⟨n⟩ = P(e) + 2P(f) for one node.
    pub fn n_mean(&self, which: usize) -> f64 {
        let m = self.marginal(which);
        m[1] + 2.0 * m[2]
    }

    /// Vector in the outcome order of a confusion matrix with `levels` per node.
    pub fn to_vec(&self, levels: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(levels * levels);
        for a in 0..levels {
            for b in 0..levels {
                v.push(self.0[a][b]);
            }
        }
        v
    }

    pub fn from_vec(levels: usize, v: &[f64]) -> Result<Self> {
        if v.len() != levels * levels || !(2..=3).contains(&levels) {
            return Err(Error::Dimension { expected: levels * levels, got: v.len() });
        }
        let mut t = JointTable::default();
        for a in 0..levels {
            for b in 0..levels {
                t.0[a][b] = v[a * levels + b];
            }
        }
        Ok(t)
    }
}

/// Independent per-node `|g⟩ → |e⟩` excitation with probability `p_th[i]`.
pub fn inject_thermal_floor(p: &JointTable, p_th: [f64; 2]) -> JointTable {
    let t = |q: f64| [[1.0 - q, 0.0, 0.0], [q, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let (t1, t2) = (t(p_th[0]), t(p_th[1]));
    let mut out = JointTable::default();
    for a in 0..3 {
        for b in 0..3 {
            for a0 in 0..3 {
                for b0 in 0..3 {
                    out.0[a][b] += t1[a][a0] * t2[b][b0] * p.0[a0][b0];
                }
            }
        }
    }
    out
}

/// Per-node thermal probability giving `P_ee = floor` for the given table.
///
/// Solves `P_ee(p) = floor` with both nodes sharing `p`, by bisection.
pub fn calibrate_thermal_floor(p: &JointTable, floor: f64) -> Result<f64> {
    let f = |q: f64| inject_thermal_floor(p, [q, q]).get(1, 1) - floor;
    if f(0.0) > 0.0 {
        return Err(Error::Config(format!("P_ee already exceeds the floor {floor} without thermal excitation")));
    }
    let (mut a, mut b) = (0.0, 1.0);
    if f(b) < 0.0 {
        return Err(Error::Config(format!("floor {floor} unreachable")));
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Extremum of a sweep with its coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub at: f64,
    pub value: f64,
}

/// Maximum and minimum of `values` over `coords`.
pub fn extrema(coords: &[f64], values: &[f64]) -> Result<(Extremum, Extremum)> {
    if values.is_empty() || coords.len() != values.len() {
        return Err(Error::EmptySweep);
    }
    let mut max = Extremum { at: coords[0], value: values[0] };
    let mut min = max;
    for (&c, &v) in coords.iter().zip(values) {
        if v > max.value {
            max = Extremum { at: c, value: v };
        }
        if v < min.value {
            min = Extremum { at: c, value: v };
        }
    }
    Ok((max, min))
}

/// `(max − min)/max`, used for the HOM dip and the two-phonon fringe.
pub fn dip_visibility(max: f64, min: f64) -> f64 {
    if max > 0.0 {
        (max - min) / max
    } else {
        0.0
    }
}

/// `(max − min)/(max + min)`, used for single-phonon routing.
pub fn fringe_visibility(max: f64, min: f64) -> f64 {
    if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub v_hom: Option<f64>,
    pub v_mz: Option<f64>,
    pub v_ee: Option<f64>,
    pub n_mean: Option<[f64; 2]>,
}

/// 𝒱_HOM of a P_ee(τ) sweep.
pub fn hom_metrics(taus: &[f64], p_ee: &[f64]) -> Result<(Metrics, Extremum, Extremum)> {
    let (max, min) = extrema(taus, p_ee)?;
    Ok((Metrics { v_hom: Some(dip_visibility(max.value, min.value)), ..Default::default() }, max, min))
}

/// 𝒱_MZ of a routed population sweep.
pub fn mz_metrics(deltas: &[f64], p: &[f64]) -> Result<(Metrics, Extremum, Extremum)> {
    let (max, min) = extrema(deltas, p)?;
    Ok((Metrics { v_mz: Some(fringe_visibility(max.value, min.value)), ..Default::default() }, max, min))
}

/// 𝒱_ee of a two-phonon P_ee(Δ) sweep.
pub fn ee_metrics(deltas: &[f64], p_ee: &[f64]) -> Result<(Metrics, Extremum, Extremum)> {
    let (max, min) = extrema(deltas, p_ee)?;
    Ok((Metrics { v_ee: Some(dip_visibility(max.value, min.value)), ..Default::default() }, max, min))
}

/// ⟨n⟩ per node of a final joint table.
pub fn n_metrics(final_table: &JointTable) -> Metrics {
    Metrics { n_mean: Some([final_table.n_mean(0), final_table.n_mean(1)]), ..Default::default() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_parenthetical_uncertainty() {
        assert_eq!(parse_uncertain("0.988(1)").unwrap(), (0.988, 0.001));
        let (v, s) = parse_uncertain("0.00002(6)").unwrap();
        assert_eq!(v, 0.00002);
        assert!((s - 0.00006).abs() < 1e-18);
        assert_eq!(parse_uncertain("0.10(3)").unwrap(), (0.10, 0.03));
        assert!(parse_uncertain("abc").is_err());
    }

    #[test]
    fn stored_transposed() {
        let c = measured_two_qubit();
        assert_eq!(c.column(0), vec![0.988, 0.006, 0.006, 0.00002]);
        assert_eq!(c.column(3), vec![0.005, 0.090, 0.045, 0.861]);
    }

    #[test]
    fn rejects_bad_columns() {
        assert!(ConfusionMatrix::new(vec![2], vec![0.9, 0.0, 0.0, 1.0], None).is_err());
        assert!(ConfusionMatrix::new(vec![4], vec![1.0; 16], None).is_err());
    }

    #[test]
    fn ill_conditioned_rejected() {
        let c = ConfusionMatrix::new(vec![2], vec![0.5, 0.5, 0.5, 0.5], None).unwrap();
        assert!(matches!(c.correct(&[0.5, 0.5]), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn thermal_floor_examples() {
        let mut gg = JointTable::default();
        gg.0[0][0] = 1.0;
        assert_eq!(inject_thermal_floor(&gg, [0.0, 0.0]), gg);
        let p = calibrate_thermal_floor(&gg, 0.0014).unwrap();
        assert!((p - 0.0014f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metric_arithmetic() {
        assert!((dip_visibility(0.08, 0.004) - 0.95).abs() < 1e-12);
        assert!((fringe_visibility(0.99, 0.01) - 0.98).abs() < 1e-12);
        let mut t = JointTable::default();
        t.0[1][0] = 0.24;
        t.0[2][0] = 0.185;
        t.0[0][0] = 1.0 - 0.425;
        assert!((t.n_mean(0) - 0.61).abs() < 1e-12);
        assert!(matches!(extrema(&[], &[]), Err(Error::EmptySweep)));
    }
}
