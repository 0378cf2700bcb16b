//! Step loop, loss handling and quantum-jump trajectories.

use std::path::Path;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::{self, diag2, diag3, mul2, mul3, FewExcState, Layout, Side, M2, M3};
use super::{Lattice, LossMode, ModulationMode};
use crate::error::{Error, Result};
use crate::io;
use crate::par::{self, ExecPolicy};
use crate::readout::JointTable;

/// Largest tolerated gap between the tracked and the summed norm.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Trajectories per deterministic accumulation chunk.
const CHUNK: usize = 64;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Record the amplitude leaving each boundary every step (meaningful for one excitation).
    pub record_outputs: bool,
    /// Row indices (states after that many steps) at which to record arm photon counts.
    pub snapshots: Vec<usize>,
    pub policy: ExecPolicy,
    /// Steps between full norm recomputations.
    pub norm_check_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { record_outputs: false, snapshots: Vec::new(), policy: ExecPolicy::from_env(), norm_check_every: 1024 }
    }
}

/// Node populations after a given number of steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub joint: JointTable,
    /// Probability that some excitation is still in the channel.
    pub in_flight: f64,
    /// Norm lost to the environment (leak) or fraction of trajectories with a jump.
    pub loss: f64,
}

impl TraceRow {
    /// P(e) and P(f) of node `which` (0 = node 1).
    pub fn p(&self, which: usize) -> [f64; 3] {
        self.joint.marginal(which)
    }

    pub fn p_ee(&self) -> f64 {
        self.joint.get(1, 1)
    }

    fn to_vals(self) -> RowVals {
        let mut v = [0.0; 11];
        for a in 0..3 {
            for b in 0..3 {
                v[3 * a + b] = self.joint.0[a][b];
            }
        }
        v[9] = self.in_flight;
        v[10] = self.loss;
        v
    }

    fn from_vals(t: f64, v: &RowVals) -> Self {
        let mut j = JointTable::default();
        for a in 0..3 {
            for b in 0..3 {
                j.0[a][b] = v[3 * a + b];
            }
        }
        Self { t, joint: j, in_flight: v[9], loss: v[10] }
    }
}

type RowVals = [f64; 11];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has the initial row")
    }

    pub const CSV_HEADER: [&'static str; 14] =
        ["t_ns", "P1_e", "P1_f", "P2_e", "P2_f", "P_gg", "P_ge", "P_eg", "P_ee", "P_gf", "P_fg", "n1", "n2", "loss"];

    pub fn csv_row(r: &TraceRow) -> Vec<f64> {
        let (m1, m2) = (r.joint.marginal(0), r.joint.marginal(1));
        let j = &r.joint;
        vec![
            r.t,
            m1[1],
            m1[2],
            m2[1],
            m2[2],
            j.get(0, 0),
            j.get(0, 1),
            j.get(1, 0),
            j.get(1, 1),
            j.get(0, 2),
            j.get(2, 0),
            m1[1] + 2.0 * m1[2],
            m2[1] + 2.0 * m2[2],
            r.loss,
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        io::numeric_csv(&Self::CSV_HEADER, self.rows.iter().map(Self::csv_row))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_csv()?.as_bytes())
    }
}

/// Distribution of excitations between the two sides, `p[n_left][n_right]`.
/// A side comprises its arm, transducer and node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmCounts {
    pub p: [[f64; 3]; 3],
}

impl ArmCounts {
    fn add_scaled(&mut self, o: &ArmCounts, w: f64) {
        for a in 0..3 {
            for b in 0..3 {
                self.p[a][b] += w * o.p[a][b];
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub trace: Trace,
    /// Final amplitudes (leak mode only).
    pub final_state: Option<FewExcState>,
    /// Amplitude envelope leaving each boundary per step, ns^{-1/2}.
    pub outputs: [Vec<C64>; 2],
    /// Arm counts at the requested snapshot rows, in request order.
    pub snapshots: Vec<ArmCounts>,
}

#[derive(Debug, Clone, Copy)]
struct LossOp {
    loc: usize,
    d1: f64,
    d2: f64,
    k10: f64,
    k21: f64,
    k20: f64,
}

impl LossOp {
    fn bin(loc: usize, a: f64) -> Self {
        let q = (1.0 - a * a).max(0.0);
        Self { loc, d1: a, d2: a * a, k10: q.sqrt(), k21: std::f64::consts::SQRT_2 * a * q.sqrt(), k20: q }
    }

    fn node(loc: usize, p_e: f64, p_f: f64) -> Self {
        Self { loc, d1: (1.0 - p_e).sqrt(), d2: (1.0 - p_f).sqrt(), k10: p_e.sqrt(), k21: p_f.sqrt(), k20: 0.0 }
    }

    /// Weights of the one-quantum and two-quanta loss branches.
    fn weights(&self, s: &FewExcState) -> (f64, f64) {
        let (off, diag) = s.row_weights(self.loc);
        let single = s.c1[self.loc].norm_sqr() + off;
        (self.k10 * self.k10 * single + self.k21 * self.k21 * diag, self.k20 * self.k20 * diag)
    }

    fn apply(&self, s: &mut FewExcState) {
        s.damp(self.loc, self.d1, self.d2);
    }

    /// Unnormalized state after losing one quantum at `loc`.
    fn branch(&self, s: &FewExcState) -> FewExcState {
        let mut b = s.without_two_sector();
        b.c0 = s.c1[self.loc] * self.k10;
        for z in 0..s.n_locations() {
            b.c1[z] = if z == self.loc { s.c2(z, z) * self.k21 } else { s.c2(self.loc, z) * self.k10 };
        }
        b
    }
}

struct Stepper<'a> {
    lat: &'a Lattice,
    layout: Layout,
    bs: (M2, M3),
    amp: [f64; 2],
    decay: [(f64, f64); 2],
    arm_phase: C64,
}

impl<'a> Stepper<'a> {
    fn new(lat: &'a Lattice) -> Self {
        let m = lat.topology.bs.matrix();
        let dt = lat.grid.dt;
        let p = |t1: f64| if t1.is_finite() { 1.0 - (-dt / t1).exp() } else { 0.0 };
        Self {
            lat,
            layout: lat.layout(),
            bs: (m, state::sym2(&m)),
            amp: [lat.loss.traversal_amplitude(Side::Left), lat.loss.traversal_amplitude(Side::Right)],
            decay: [
                (p(lat.nodes[0].t1_e), p(lat.nodes[0].t1_f)),
                (p(lat.nodes[1].t1_e), p(lat.nodes[1].t1_f)),
            ],
            arm_phase: C64::from_polar(1.0, lat.topology.arm_phase),
        }
    }

    fn steps(&self) -> usize {
        self.lat.grid.n - 1
    }

    fn loss_ops(&self, k: usize) -> Vec<LossOp> {
        let mut ops = Vec::new();
        for side in [Side::Left, Side::Right] {
            let a = self.amp[side.index()];
            if a < 1.0 {
                ops.push(LossOp::bin(self.layout.splitter_slot(side, k), a));
                ops.push(LossOp::bin(self.layout.boundary_slot(side, k), a));
            }
        }
        for side in [Side::Left, Side::Right] {
            let (pe, pf) = self.decay[side.index()];
            if pe > 0.0 || pf > 0.0 {
                ops.push(LossOp::node(self.layout.node(side), pe, pf));
            }
        }
        ops
    }

    /// Level phases `(p1, p2)` of a node over step `k` and its ladder.
    fn node_step(&self, which: usize, k: usize) -> (C64, C64, f64, f64) {
        let n = &self.lat.nodes[which];
        let dt = self.lat.grid.dt;
        let t = self.lat.grid.t(k);
        let delta = n.detuning.at(k);
        let p1_eff = C64::from_polar(1.0, -delta * dt);
        if n.levels == 2 {
            return (p1_eff, ONE, 1.0, 0.0);
        }
        match (self.lat.modulation_mode, &n.modulation) {
            (ModulationMode::Full, Some(m)) => {
                let w = m.drive.omega_mod;
                // Drive phase referenced to t = 0, like the anharmonic phase.
                let s = |x: f64| (w * x.clamp(m.t_on, m.t_off)).sin();
                let dphi = m.drive.delta_amp / w * (s(t + dt / 2.0) - s(t - dt / 2.0));
                let p1 = C64::from_polar(1.0, -(delta * dt + dphi));
                let p2 = C64::from_polar(1.0, -(2.0 * delta * dt - n.chi * dt + 2.0 * dphi));
                let l = super::LadderCoefficients::BARE;
                (p1, p2, l.c_ge, l.c_ef)
            }
            _ => {
                let l = n.ladder_at(t);
                let modulated = n.modulation.as_ref().is_some_and(|m| t >= m.t_on - 1e-9 && t < m.t_off - 1e-9);
                let e2 = if modulated { 2.0 * delta } else { 2.0 * delta - n.chi };
                (p1_eff, C64::from_polar(1.0, -e2 * dt), l.c_ge, l.c_ef)
            }
        }
    }

    fn unitaries(&self, k: usize, s: &mut FewExcState) {
        let l = &self.layout;
        let dt = self.lat.grid.dt;
        s.apply_pair(l.splitter_slot(Side::Left, k), l.splitter_slot(Side::Right, k), &self.bs.0, &self.bs.1);
        for side in [Side::Left, Side::Right] {
            let i = side.index();
            let node = l.node(side);
            let slot = l.boundary_slot(side, k);
            let kappa = self.lat.nodes[i].schedule.at(k);
            let (p1, p2, c_ge, c_ef) = self.node_step(i, k);
            let phi = if side == Side::Right { self.arm_phase } else { ONE };
            match l.transducer(side) {
                None => {
                    if kappa > 0.0 {
                        let (beta, alpha) = angles(kappa, dt, c_ge, c_ef);
                        let (x1, x2) = state::exchange(beta, alpha);
                        let u1 = mul2(&diag2([p1, phi]), &x1);
                        let u2 = mul3(&diag3([p2, p1 * phi, phi * phi]), &x2);
                        s.apply_pair(node, slot, &u1, &u2);
                    } else {
                        if p1 != ONE || p2 != ONE {
                            s.phase(node, p1, p2);
                        }
                        if phi != ONE {
                            s.phase(slot, phi, phi * phi);
                        }
                    }
                }
                Some(tr) => {
                    let kt = self.lat.nodes[i].transducer.expect("layout mirrors params");
                    let g = (kappa * kt).sqrt() / 2.0;
                    if g > 0.0 {
                        let (x1, x2) = state::coherent_exchange(g * c_ge * dt, g * c_ef * dt);
                        let u1 = mul2(&diag2([p1, ONE]), &x1);
                        let u2 = mul3(&diag3([p2, p1, ONE]), &x2);
                        s.apply_pair(node, tr, &u1, &u2);
                    } else if p1 != ONE || p2 != ONE {
                        s.phase(node, p1, p2);
                    }
                    let (beta, alpha) = angles(kt, dt, 1.0, std::f64::consts::SQRT_2);
                    let (x1, x2) = state::exchange(beta, alpha);
                    let u1 = mul2(&diag2([ONE, phi]), &x1);
                    let u2 = mul3(&diag3([ONE, phi, phi * phi]), &x2);
                    s.apply_pair(tr, slot, &u1, &u2);
                }
            }
        }
    }
}

/// Exchange angles matching the exact decay `e^{−c²κdt/2}` of the amplitude per step.
fn angles(kappa: f64, dt: f64, c_ge: f64, c_ef: f64) -> (f64, f64) {
    let ang = |c: f64| c.signum() * (-(c * c) * kappa * dt / 2.0).exp().clamp(-1.0, 1.0).acos();
    if c_ge.abs() > 1e-9 {
        let beta = ang(c_ge);
        (beta, c_ef / c_ge * beta)
    } else {
        (0.0, ang(c_ef))
    }
}

/// Joint node table; `c2_total` is the two-excitation norm when already known.
pub(crate) fn joint_table(layout: &Layout, s: &FewExcState, norm_total: f64) -> (JointTable, f64) {
    let (a, b) = (layout.node(Side::Left), layout.node(Side::Right));
    let mut t = JointTable::default();
    let c0 = s.c0.norm_sqr();
    let c1: f64 = s.c1_norm_sq();
    let (e1, e2) = (s.c1[a].norm_sqr(), s.c1[b].norm_sqr());
    let c1_channel = (c1 - e1 - e2).max(0.0);
    t.0[0][0] = c0 + c1_channel;
    t.0[1][0] = e1;
    t.0[0][1] = e2;
    let mut in_flight = c1_channel;
    if s.has_two_sector() {
        let c2_total = (norm_total - c0 - c1).max(0.0);
        let f1 = s.c2(a, a).norm_sqr();
        let f2 = s.c2(b, b).norm_sqr();
        let ee = s.c2(a, b).norm_sqr();
        let (ra, _) = s.row_weights(a);
        let (rb, _) = s.row_weights(b);
        let (ra, rb) = ((ra - ee).max(0.0), (rb - ee).max(0.0));
        let channel_pairs = (c2_total - f1 - f2 - ee - ra - rb).max(0.0);
        t.0[2][0] += f1;
        t.0[0][2] += f2;
        t.0[1][1] += ee;
        t.0[1][0] += ra;
        t.0[0][1] += rb;
        t.0[0][0] += channel_pairs;
        in_flight += ra + rb + channel_pairs;
    }
    (t, in_flight)
}

fn arm_counts(layout: &Layout, s: &FewExcState) -> ArmCounts {
    let mut c = ArmCounts::default();
    c.p[0][0] += s.c0.norm_sqr();
    let n = s.n_locations();
    let side: Vec<usize> = (0..n).map(|z| layout.side_of(z).index()).collect();
    for z in 0..n {
        let w = s.c1[z].norm_sqr();
        if side[z] == 0 {
            c.p[1][0] += w;
        } else {
            c.p[0][1] += w;
        }
    }
    if let Some(c2) = s.c2_slice() {
        for i in 0..n {
            for j in i..n {
                let w = c2[s.idx(i, j)].norm_sqr();
                if w == 0.0 {
                    continue;
                }
                let nl = (side[i] == 0) as usize + (side[j] == 0) as usize;
                c.p[nl][2 - nl] += w;
            }
        }
    }
    c
}

pub(crate) fn evolve(lat: &Lattice, initial: FewExcState, opts: &EvolveOptions) -> Result<Evolution> {
    let st = Stepper::new(lat);
    if initial.n_locations() != st.layout.len() {
        return Err(Error::Dimension { expected: st.layout.len(), got: initial.n_locations() });
    }
    let norm0 = initial.norm_sq();
    if (norm0 - 1.0).abs() > 1e-9 {
        return Err(Error::param("initial", format!("state must be normalized, norm is {norm0}")));
    }
    match lat.loss.mode {
        LossMode::Leak => evolve_leak(&st, initial, opts),
        LossMode::Jump => evolve_jump(&st, initial, opts),
    }
}

fn check_finite(s: &FewExcState) -> Result<()> {
    if !s.c0.re.is_finite() || s.c1.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFinite("state amplitude"));
    }
    Ok(())
}

fn evolve_leak(st: &Stepper, mut s: FewExcState, opts: &EvolveOptions) -> Result<Evolution> {
    let grid = st.lat.grid;
    let steps = st.steps();
    let mut lost = 0.0;
    let mut rows = Vec::with_capacity(steps + 1);
    let row = |s: &FewExcState, lost: f64, k: usize| {
        let (joint, in_flight) = joint_table(&st.layout, s, 1.0 - lost);
        TraceRow { t: grid.t(k), joint, in_flight, loss: lost }
    };
    rows.push(row(&s, lost, 0));
    let mut outputs = [Vec::new(), Vec::new()];
    let mut snaps = vec![None; opts.snapshots.len()];
    let take_snaps = |s: &FewExcState, r: usize, snaps: &mut Vec<Option<ArmCounts>>| {
        for (i, &want) in opts.snapshots.iter().enumerate() {
            if want == r {
                snaps[i] = Some(arm_counts(&st.layout, s));
            }
        }
    };
    take_snaps(&s, 0, &mut snaps);
    let sqrt_dt = grid.dt.sqrt();
    for k in 0..steps {
        for op in st.loss_ops(k) {
            let (w1, w2) = op.weights(&s);
            op.apply(&mut s);
            lost += w1 + w2;
        }
        st.unitaries(k, &mut s);
        if opts.record_outputs {
            for side in [Side::Left, Side::Right] {
                outputs[side.index()].push(s.c1[st.layout.boundary_slot(side, k)] / sqrt_dt);
            }
        }
        rows.push(row(&s, lost, k + 1));
        take_snaps(&s, k + 1, &mut snaps);
        if opts.norm_check_every > 0 && ((k + 1) % opts.norm_check_every == 0 || k + 1 == steps) {
            check_finite(&s)?;
            let drift = (s.norm_sq() + lost - 1.0).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(Error::NormDrift { drift, step: k + 1 });
            }
        }
    }
    Ok(Evolution {
        trace: Trace { rows },
        final_state: Some(s),
        outputs,
        snapshots: snaps.into_iter().map(|x| x.unwrap_or_default()).collect(),
    })
}

/// A post-jump state shared by every trajectory that took that branch.
struct Branch {
    step: usize,
    next_op: usize,
    /// `None` for the vacuum left after losing both quanta.
    state: Option<FewExcState>,
    count: usize,
}

struct Accum {
    rows: Vec<RowVals>,
    snaps: Vec<ArmCounts>,
}

impl Accum {
    fn new(n_rows: usize, n_snaps: usize) -> Self {
        Self { rows: vec![[0.0; 11]; n_rows], snaps: vec![ArmCounts::default(); n_snaps] }
    }

    fn add(&mut self, o: &Accum) {
        for (a, b) in self.rows.iter_mut().zip(&o.rows) {
            for i in 0..11 {
                a[i] += b[i];
            }
        }
        for (a, b) in self.snaps.iter_mut().zip(&o.snaps) {
            a.add_scaled(b, 1.0);
        }
    }
}

fn evolve_jump(st: &Stepper, mut s: FewExcState, opts: &EvolveOptions) -> Result<Evolution> {
    let grid = st.lat.grid;
    let steps = st.steps();
    let k_traj = st.lat.loss.trajectories;
    let seed = st.lat.loss.seed;
    // Per-trajectory jump threshold and branch selector.
    let draws: Vec<(f64, f64)> = (0..k_traj)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (rng.gen::<f64>(), rng.gen::<f64>())
        })
        .collect();
    let mut order: Vec<usize> = (0..k_traj).collect();
    order.sort_by(|&a, &b| draws[b].0.total_cmp(&draws[a].0).then(a.cmp(&b)));
    let mut next = 0usize;

    let mut norm = 1.0;
    let mut alive_rows = Vec::with_capacity(steps + 1);
    let mut nojump_rows: Vec<RowVals> = Vec::with_capacity(steps + 1);
    let mut nojump_snaps = vec![ArmCounts::default(); opts.snapshots.len()];
    let mut branches: Vec<Branch> = Vec::new();

    let record = |s: &FewExcState, norm: f64| -> RowVals {
        let (joint, in_flight) = joint_table(&st.layout, s, norm);
        let mut v = TraceRow { t: 0.0, joint, in_flight, loss: 0.0 }.to_vals();
        for x in v.iter_mut().take(10) {
            *x /= norm;
        }
        v
    };
    let snap_now = |s: &FewExcState, norm: f64, r: usize, out: &mut Vec<ArmCounts>| {
        for (i, &want) in opts.snapshots.iter().enumerate() {
            if want == r {
                let mut c = arm_counts(&st.layout, s);
                c.p.iter_mut().flatten().for_each(|x| *x /= norm);
                out[i] = c;
            }
        }
    };
    nojump_rows.push(record(&s, norm));
    alive_rows.push(k_traj);
    snap_now(&s, norm, 0, &mut nojump_snaps);

    for k in 0..steps {
        for (j, op) in st.loss_ops(k).into_iter().enumerate() {
            let (w1, w2) = op.weights(&s);
            let after = norm - w1 - w2;
            let start = next;
            while next < k_traj && draws[order[next]].0 > after {
                next += 1;
            }
            if next > start {
                let mut c1 = 0;
                let mut c2 = 0;
                for &i in &order[start..next] {
                    if draws[i].1 * (w1 + w2) < w1 {
                        c1 += 1;
                    } else {
                        c2 += 1;
                    }
                }
                if c1 > 0 {
                    let mut b = op.branch(&s);
                    let bn = b.norm_sq();
                    if bn > 0.0 {
                        b.scale(1.0 / bn.sqrt());
                    }
                    branches.push(Branch { step: k, next_op: j + 1, state: Some(b), count: c1 });
                }
                if c2 > 0 {
                    branches.push(Branch { step: k, next_op: j + 1, state: None, count: c2 });
                }
            }
            op.apply(&mut s);
            norm = after;
        }
        st.unitaries(k, &mut s);
        if norm > 0.0 {
            nojump_rows.push(record(&s, norm));
            snap_now(&s, norm, k + 1, &mut nojump_snaps);
        } else {
            nojump_rows.push([0.0; 11]);
        }
        alive_rows.push(k_traj - next);
        if opts.norm_check_every > 0 && ((k + 1) % opts.norm_check_every == 0 || k + 1 == steps) {
            check_finite(&s)?;
            let drift = (s.norm_sq() - norm).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(Error::NormDrift { drift, step: k + 1 });
            }
        }
    }
    drop(s);

    let n_rows = steps + 1;
    let chunks: Vec<&[Branch]> = branches.chunks(CHUNK).collect();
    let partial: Vec<Result<Accum>> = par::map(opts.policy, &chunks, |chunk| {
        let mut acc = Accum::new(n_rows, opts.snapshots.len());
        for b in chunk.iter() {
            continue_branch(st, b, opts, &mut acc)?;
        }
        Ok(acc)
    });
    let mut total = Accum::new(n_rows, opts.snapshots.len());
    for p in partial {
        total.add(&p?);
    }

    let kf = k_traj as f64;
    let mut rows = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let alive = alive_rows[r] as f64;
        let mut v = [0.0; 11];
        for i in 0..10 {
            v[i] = (alive * nojump_rows[r][i] + total.rows[r][i]) / kf;
        }
        v[10] = (kf - alive) / kf;
        rows.push(TraceRow::from_vals(grid.t(r), &v));
    }
    let snapshots = opts
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut c = ArmCounts::default();
            let alive = alive_rows.get(r).copied().unwrap_or(0) as f64;
            c.add_scaled(&nojump_snaps[i], alive / kf);
            c.add_scaled(&total.snaps[i], 1.0 / kf);
            c
        })
        .collect();
    Ok(Evolution { trace: Trace { rows }, final_state: None, outputs: [Vec::new(), Vec::new()], snapshots })
}

/// Runs a ≤1-excitation branch to the end; later losses leave the vacuum.
fn continue_branch(st: &Stepper, b: &Branch, opts: &EvolveOptions, acc: &mut Accum) -> Result<()> {
    let w = b.count as f64;
    let first_row = b.step + 1;
    let n_rows = acc.rows.len();
    let Some(init) = &b.state else {
        for r in first_row..n_rows {
            acc.rows[r][0] += w;
        }
        for (i, &r) in opts.snapshots.iter().enumerate() {
            if r >= first_row {
                acc.snaps[i].p[0][0] += w;
            }
        }
        return Ok(());
    };
    let mut s = init.clone();
    let mut lost = 0.0;
    let mut k = b.step;
    let mut first_op = b.next_op;
    while k < st.steps() {
        for op in st.loss_ops(k).into_iter().skip(first_op) {
            let (w1, w2) = op.weights(&s);
            op.apply(&mut s);
            lost += w1 + w2;
        }
        first_op = 0;
        st.unitaries(k, &mut s);
        let r = k + 1;
        let (joint, in_flight) = joint_table(&st.layout, &s, 1.0 - lost);
        let mut v = TraceRow { t: 0.0, joint, in_flight, loss: 0.0 }.to_vals();
        v[0] += lost;
        for i in 0..10 {
            acc.rows[r][i] += w * v[i];
        }
        for (i, &want) in opts.snapshots.iter().enumerate() {
            if want == r {
                let mut c = arm_counts(&st.layout, &s);
                c.p[0][0] += lost;
                acc.snaps[i].add_scaled(&c, w);
            }
        }
        k += 1;
    }
    check_finite(&s)
}
