//! Amplitudes over the vacuum, one- and two-excitation configurations.

use num_complex::Complex64 as C64;

use crate::envelope::Envelope;
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Which side of the beamsplitter a location belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
}

impl Side {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Role of a location in the sector basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    /// Slot of a channel ring.
    Bin(Side, usize),
    /// Qubit or qutrit behind the coupler of one side.
    Node(Side),
    /// Optional transducer resonance between a node and its channel.
    Transducer(Side),
}

/// Enumeration of locations.
///
/// Each arm is a ring of `2·delay` slots; ring position `p` of a slot at step
/// `s` is `(slot + s) mod size`. Position `delay − 1` sits at the boundary
/// and position `size − 1` at the beamsplitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub ring: [usize; 2],
    pub transducer: [bool; 2],
    offsets: [usize; 2],
    node: [usize; 2],
    transducer_id: [Option<usize>; 2],
    n: usize,
}

impl Layout {
    pub fn new(delay_steps: [usize; 2], transducer: [bool; 2]) -> Self {
        let ring = [2 * delay_steps[0], 2 * delay_steps[1]];
        let offsets = [0, ring[0]];
        let mut n = ring[0] + ring[1];
        let node = [n, n + 1];
        n += 2;
        let mut transducer_id = [None, None];
        for s in 0..2 {
            if transducer[s] {
                transducer_id[s] = Some(n);
                n += 1;
            }
        }
        Self { ring, transducer, offsets, node, transducer_id, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn delay_steps(&self, side: Side) -> usize {
        self.ring[side.index()] / 2
    }

    pub fn node(&self, side: Side) -> usize {
        self.node[side.index()]
    }

    pub fn transducer(&self, side: Side) -> Option<usize> {
        self.transducer_id[side.index()]
    }

    /// Location id of the slot at ring position `pos` after `step` advances.
    pub fn slot_at(&self, side: Side, pos: usize, step: usize) -> usize {
        let m = self.ring[side.index()];
        self.offsets[side.index()] + (pos + m - step % m) % m
    }

    pub fn boundary_slot(&self, side: Side, step: usize) -> usize {
        self.slot_at(side, self.delay_steps(side) - 1, step)
    }

    pub fn splitter_slot(&self, side: Side, step: usize) -> usize {
        self.slot_at(side, self.ring[side.index()] - 1, step)
    }

    pub fn kind(&self, id: usize) -> Loc {
        if id < self.ring[0] {
            Loc::Bin(Side::Left, id)
        } else if id < self.ring[0] + self.ring[1] {
            Loc::Bin(Side::Right, id - self.ring[0])
        } else if id == self.node[0] {
            Loc::Node(Side::Left)
        } else if id == self.node[1] {
            Loc::Node(Side::Right)
        } else if Some(id) == self.transducer_id[0] {
            Loc::Transducer(Side::Left)
        } else {
            Loc::Transducer(Side::Right)
        }
    }

    pub fn side_of(&self, id: usize) -> Side {
        match self.kind(id) {
            Loc::Bin(s, _) | Loc::Node(s) | Loc::Transducer(s) => s,
        }
    }

    pub fn is_node(&self, id: usize) -> bool {
        id == self.node[0] || id == self.node[1]
    }
}

/// Start of row `i` in the packed upper triangle.
fn row_start(n: usize, i: usize) -> usize {
    i * (2 * n - i + 1) / 2
}

/// Sector amplitudes. Two-excitation amplitudes are stored once per
/// unordered pair; a repeated location `(m, m)` is `(a_m†)²/√2 |0⟩` for a
/// channel bin and the `|f⟩` level for a node.
#[derive(Debug, Clone, PartialEq)]
pub struct FewExcState {
    pub c0: C64,
    pub c1: Vec<C64>,
    c2: Option<Vec<C64>>,
    rows: Vec<usize>,
}

impl FewExcState {
    /// Vacuum; the two-excitation block is allocated only when `two_sector` is set.
    pub fn vacuum(layout: &Layout, two_sector: bool) -> Self {
        let n = layout.len();
        let rows = (0..n).map(|i| row_start(n, i)).collect();
        Self {
            c0: C64::new(1.0, 0.0),
            c1: vec![ZERO; n],
            c2: two_sector.then(|| vec![ZERO; n * (n + 1) / 2]),
            rows,
        }
    }

    /// Empty (all-zero) state with the same shape.
    pub fn zeroed_like(&self) -> Self {
        let mut s = self.clone();
        s.c0 = ZERO;
        s.c1.iter_mut().for_each(|a| *a = ZERO);
        if let Some(c2) = s.c2.as_mut() {
            c2.iter_mut().for_each(|a| *a = ZERO);
        }
        s
    }

    /// Same one-excitation content without the two-excitation block.
    pub fn without_two_sector(&self) -> Self {
        Self { c0: self.c0, c1: self.c1.clone(), c2: None, rows: self.rows.clone() }
    }

    pub fn n_locations(&self) -> usize {
        self.c1.len()
    }

    pub fn has_two_sector(&self) -> bool {
        self.c2.is_some()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.rows[a] + (b - a)
    }

    pub fn c2(&self, i: usize, j: usize) -> C64 {
        match &self.c2 {
            Some(c) => c[self.idx(i, j)],
            None => ZERO,
        }
    }

    pub fn set_c2(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        let k = self.idx(i, j);
        match self.c2.as_mut() {
            Some(c) => {
                c[k] = v;
                Ok(())
            }
            None => Err(Error::param("state", "two-excitation block not allocated")),
        }
    }

    pub fn c2_slice(&self) -> Option<&[C64]> {
        self.c2.as_deref()
    }

    /// `|c0|² + Σ|c1|² + Σ|c2|²` by direct summation.
    pub fn norm_sq(&self) -> f64 {
        self.c0.norm_sqr() + self.c1_norm_sq() + self.c2.as_ref().map_or(0.0, |c| c.iter().map(|a| a.norm_sqr()).sum())
    }

    pub fn c1_norm_sq(&self) -> f64 {
        self.c1.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn c2_norm_sq(&self) -> f64 {
        self.c2.as_ref().map_or(0.0, |c| c.iter().map(|a| a.norm_sqr()).sum())
    }

    pub fn scale(&mut self, s: f64) {
        self.c0 *= s;
        self.c1.iter_mut().for_each(|a| *a *= s);
        if let Some(c) = self.c2.as_mut() {
            c.iter_mut().for_each(|a| *a *= s);
        }
    }

    /// `⟨self|other⟩` over all sectors.
    pub fn inner(&self, other: &FewExcState) -> C64 {
        let mut s = self.c0.conj() * other.c0;
        s += self.c1.iter().zip(&other.c1).map(|(a, b)| a.conj() * b).sum::<C64>();
        if let (Some(a), Some(b)) = (&self.c2, &other.c2) {
            s += a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
        }
        s
    }

    /// Places a single-excitation wavepacket on the slots that reach the
    /// boundary of `side` at the grid times of `env` (relative to step 0 at `env.grid.t0`).
    pub fn inject_incoming(&mut self, layout: &Layout, side: Side, env: &Envelope) -> Result<()> {
        let m = layout.ring[side.index()];
        let d = layout.delay_steps(side);
        let dt_sqrt = env.grid.dt.sqrt();
        let nonzero = env.amp.iter().rposition(|a| a.norm_sqr() > 0.0).map_or(0, |k| k + 1);
        if nonzero > m {
            return Err(Error::Topology(format!("wavepacket spans {nonzero} bins but the ring holds {m}")));
        }
        self.c0 = ZERO;
        for (k, a) in env.amp.iter().enumerate().take(nonzero) {
            // Slot at position d−1−k reaches the boundary after k steps.
            let pos = (d as isize - 1 - k as isize).rem_euclid(m as isize) as usize;
            self.c1[layout.slot_at(side, pos, 0)] = a * dt_sqrt;
        }
        Ok(())
    }

    /// Applies a number-conserving unitary on locations `a ≠ b`.
    ///
    /// `u1` acts on `(|1_a⟩, |1_b⟩)`, also on every pair with a spectator;
    /// `u2` acts on `(|2_a⟩, |1_a 1_b⟩, |2_b⟩)`.
    pub fn apply_pair(&mut self, a: usize, b: usize, u1: &M2, u2: &M3) {
        debug_assert!(a != b);
        let (xa, xb) = (self.c1[a], self.c1[b]);
        self.c1[a] = u1[0][0] * xa + u1[0][1] * xb;
        self.c1[b] = u1[1][0] * xa + u1[1][1] * xb;
        let n = self.c1.len();
        let rows = &self.rows;
        let Some(c2) = self.c2.as_mut() else { return };
        let id = |i: usize, j: usize| if i <= j { rows[i] + (j - i) } else { rows[j] + (i - j) };
        for z in 0..n {
            if z == a || z == b {
                continue;
            }
            let (ia, ib) = (id(a, z), id(b, z));
            let (pa, pb) = (c2[ia], c2[ib]);
            if pa == ZERO && pb == ZERO {
                continue;
            }
            c2[ia] = u1[0][0] * pa + u1[0][1] * pb;
            c2[ib] = u1[1][0] * pa + u1[1][1] * pb;
        }
        let (iaa, iab, ibb) = (id(a, a), id(a, b), id(b, b));
        let v = [c2[iaa], c2[iab], c2[ibb]];
        c2[iaa] = u2[0][0] * v[0] + u2[0][1] * v[1] + u2[0][2] * v[2];
        c2[iab] = u2[1][0] * v[0] + u2[1][1] * v[1] + u2[1][2] * v[2];
        c2[ibb] = u2[2][0] * v[0] + u2[2][1] * v[1] + u2[2][2] * v[2];
    }

    /// Multiplies single occupation of `m` by `d1` and double occupation by `d2`.
    pub fn damp(&mut self, m: usize, d1: f64, d2: f64) {
        self.c1[m] *= d1;
        let rows = &self.rows;
        let Some(c2) = self.c2.as_mut() else { return };
        for z in 0..self.c1.len() {
            let k = if m <= z { rows[m] + (z - m) } else { rows[z] + (m - z) };
            c2[k] *= if z == m { d2 } else { d1 };
        }
    }

    /// Applies a diagonal phase to single (`p1`) and double (`p2`) occupation of `m`.
    pub fn phase(&mut self, m: usize, p1: C64, p2: C64) {
        self.c1[m] *= p1;
        let rows = &self.rows;
        let Some(c2) = self.c2.as_mut() else { return };
        for z in 0..self.c1.len() {
            let k = if m <= z { rows[m] + (z - m) } else { rows[z] + (m - z) };
            c2[k] *= if z == m { p2 } else { p1 };
        }
    }

    /// Weight `Σ_z |c2{m,z}|²` over spectators `z ≠ m`, and `|c2{m,m}|²`.
    pub fn row_weights(&self, m: usize) -> (f64, f64) {
        let Some(c2) = self.c2.as_ref() else { return (0.0, 0.0) };
        let mut off = 0.0;
        for z in 0..self.c1.len() {
            if z != m {
                off += c2[self.idx(m, z)].norm_sqr();
            }
        }
        (off, c2[self.idx(m, m)].norm_sqr())
    }

    /// Two-excitation amplitudes pairing `m` with each location (diagonal included).
    pub fn row(&self, m: usize) -> Vec<C64> {
        (0..self.c1.len()).map(|z| self.c2(m, z)).collect()
    }
}

pub type M2 = [[C64; 2]; 2];
pub type M3 = [[C64; 3]; 3];

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const I2: M2 = [[C64 { re: 1.0, im: 0.0 }, ZERO], [ZERO, C64 { re: 1.0, im: 0.0 }]];

pub fn mul2(a: &M2, b: &M2) -> M2 {
    let mut o = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

pub fn mul3(a: &M3, b: &M3) -> M3 {
    let mut o = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    o
}

pub fn diag2(d: [C64; 2]) -> M2 {
    [[d[0], ZERO], [ZERO, d[1]]]
}

pub fn diag3(d: [C64; 3]) -> M3 {
    [[d[0], ZERO, ZERO], [ZERO, d[1], ZERO], [ZERO, ZERO, d[2]]]
}

/// Two-boson representation of a single-particle mode unitary `m`
/// (`c' = m·c`) on the basis `(|2_a⟩, |1_a 1_b⟩, |2_b⟩)`.
pub fn sym2(m: &M2) -> M3 {
    let s = std::f64::consts::SQRT_2;
    let (aa, ab, ba, bb) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    [
        [aa * aa, s * aa * ab, ab * ab],
        [s * aa * ba, aa * bb + ab * ba, s * ab * bb],
        [ba * ba, s * ba * bb, bb * bb],
    ]
}

/// `exp(X)` for a 2×2 or 3×3 generator obeying `X³ = −w²X`.
fn exp_cubic<const N: usize>(x: &[[C64; N]; N], w: f64) -> [[C64; N]; N] {
    let mut x2 = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            for k in 0..N {
                x2[i][j] += x[i][k] * x[k][j];
            }
        }
    }
    let (s, cc) = if w.abs() < 1e-8 { (1.0 - w * w / 6.0, 0.5 - w * w / 24.0) } else { (w.sin() / w, (1.0 - w.cos()) / (w * w)) };
    let mut o = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            o[i][j] = x[i][j] * s + x2[i][j] * cc;
        }
        o[i][i] += C64::new(1.0, 0.0);
    }
    o
}

/// Exchange `exp(β(a†b − ab†))` between a ladder `a` (with `g–e` element
/// scaled into `beta` and `e–f` into `alpha`) and a bosonic mode `b`.
///
/// Returns the one-excitation block on `(|e,0⟩, |g,1⟩)` and the two-excitation
/// block on `(|f,0⟩, |e,1⟩, |g,2⟩)`.
pub fn exchange(beta: f64, alpha: f64) -> (M2, M3) {
    let u1 = [[c(beta.cos(), 0.0), c(beta.sin(), 0.0)], [c(-beta.sin(), 0.0), c(beta.cos(), 0.0)]];
    let s2b = std::f64::consts::SQRT_2 * beta;
    let k = [[ZERO, c(alpha, 0.0), ZERO], [c(-alpha, 0.0), ZERO, c(s2b, 0.0)], [ZERO, c(-s2b, 0.0), ZERO]];
    let w = (alpha * alpha + s2b * s2b).sqrt();
    (u1, exp_cubic(&k, w))
}

/// Coherent exchange `exp(−i·(g_ge·(a†b + ab†) restricted))` for a Hamiltonian
/// coupling with angles `theta_ge = g·c_ge·dt` and `theta_ef = g·c_ef·dt`.
pub fn coherent_exchange(theta_ge: f64, theta_ef: f64) -> (M2, M3) {
    let u1 = [[c(theta_ge.cos(), 0.0), c(0.0, -theta_ge.sin())], [c(0.0, -theta_ge.sin()), c(theta_ge.cos(), 0.0)]];
    let s2b = std::f64::consts::SQRT_2 * theta_ge;
    let mi = |x: f64| c(0.0, -x);
    let x = [[ZERO, mi(theta_ef), ZERO], [mi(theta_ef), ZERO, mi(s2b)], [ZERO, mi(s2b), ZERO]];
    let w = (theta_ef * theta_ef + s2b * s2b).sqrt();
    (u1, exp_cubic(&x, w))
}
