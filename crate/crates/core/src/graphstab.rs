//! Stabilizer tableaux for graph and cluster states, with the fusion and
//! failure-recovery operations used to grow chains.
//!
//! Only the stabilizer generators are stored (no destabilizers). Qubit `q`
//! of a Pauli string lives in bit `q` of the `x` and `z` masks, so a tableau
//! holds at most 64 qubits.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::{Correction, LocalOp, QubitState};

pub const MAX_TABLEAU_QUBITS: usize = 64;
/// Largest register accepted by [`StabilizerTableau::from_state_vector`].
pub const MAX_ORACLE_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_negative(negative: bool) -> Self {
        if negative {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Minus
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

/// Signed tensor product of `I, X, Y, Z`; `Y` is stored as `x = z = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
    pub negative: bool,
}

fn bit(q: usize) -> u64 {
    1u64 << q
}

fn parity(v: u64) -> bool {
    v.count_ones() % 2 == 1
}

impl PauliString {
    pub const fn identity() -> Self {
        Self {
            x: 0,
            z: 0,
            negative: false,
        }
    }

    pub fn single(q: usize, basis: PauliBasis) -> Self {
        let m = bit(q);
        let (x, z) = match basis {
            PauliBasis::X => (m, 0),
            PauliBasis::Y => (m, m),
            PauliBasis::Z => (0, m),
        };
        Self {
            x,
            z,
            negative: false,
        }
    }

    /// `Z_a Z_b`
    pub fn zz(a: usize, b: usize) -> Self {
        Self {
            x: 0,
            z: bit(a) ^ bit(b),
            negative: false,
        }
    }

    /// Parses `[+-]?[IXYZ]*`; character `q` acts on qubit `q`.
    pub fn parse(text: &str) -> Result<(usize, Self)> {
        let (negative, body) = match text.as_bytes().first() {
            Some(b'-') => (true, &text[1..]),
            Some(b'+') => (false, &text[1..]),
            _ => (false, text),
        };
        if body.len() > MAX_TABLEAU_QUBITS {
            return Err(Error::InvalidRegister {
                got: body.len(),
                max: MAX_TABLEAU_QUBITS,
            });
        }
        let mut p = Self {
            x: 0,
            z: 0,
            negative,
        };
        for (q, ch) in body.chars().enumerate() {
            match ch {
                'I' | '_' => {}
                'X' => p.x |= bit(q),
                'Y' => {
                    p.x |= bit(q);
                    p.z |= bit(q)
                }
                'Z' => p.z |= bit(q),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "'{other}' is not a Pauli letter"
                    )))
                }
            }
        }
        Ok((body.chars().count(), p))
    }

    pub fn letter(&self, q: usize) -> char {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn negated(mut self) -> Self {
        self.negative = !self.negative;
        self
    }

    pub fn commutes(&self, other: &Self) -> bool {
        !parity((self.x & other.z) ^ (self.z & other.x))
    }

    /// Product `self · other = i^k P`, returning `(P, k mod 4)` with the sign of
    /// `P` folded into its `negative` flag.
    pub fn mul(&self, other: &Self) -> (Self, u8) {
        let mut e: i32 = 0;
        let mut m = self.support() & other.support();
        while m != 0 {
            let q = m.trailing_zeros();
            m &= m - 1;
            let (x1, z1) = ((self.x >> q) & 1, (self.z >> q) & 1);
            let (x2, z2) = ((other.x >> q) as i32 & 1, (other.z >> q) as i32 & 1);
            e += match (x1, z1) {
                (1, 1) => z2 - x2,
                (1, 0) => z2 * (2 * x2 - 1),
                (0, 1) => x2 * (1 - 2 * z2),
                _ => 0,
            };
        }
        e += 2 * (self.negative as i32 + other.negative as i32);
        let e = e.rem_euclid(4) as u8;
        (
            Self {
                x: self.x ^ other.x,
                z: self.z ^ other.z,
                negative: e >= 2,
            },
            e % 2,
        )
    }

    /// Product of two commuting strings.
    pub fn mul_commuting(&self, other: &Self) -> Self {
        let (p, odd) = self.mul(other);
        debug_assert_eq!(odd, 0, "product of anticommuting Paulis");
        p
    }

    /// `⟨ψ|P|ψ⟩` on a dense register (qubit `q` ↔ tableau qubit `q`).
    pub fn expectation(&self, state: &QubitState) -> Result<f64> {
        let n = state.qubit_count();
        if (self.support() >> n) != 0 {
            return Err(Error::RegisterSize {
                expected: (64 - self.support().leading_zeros()) as usize,
                got: n,
            });
        }
        let (xd, zd) = (dense_mask(self.x, n), dense_mask(self.z, n));
        let ys = (self.x & self.z).count_ones();
        let iy = C64::new(0.0, 1.0).powu(ys);
        let amps = state.amplitudes();
        let mut acc = C64::new(0.0, 0.0);
        for (i, a) in amps.iter().enumerate() {
            let s = if parity(i as u64 & zd) { -1.0 } else { 1.0 };
            acc += amps[i ^ xd as usize].conj() * *a * s;
        }
        let v = (acc * iy).re;
        Ok(if self.negative { -v } else { v })
    }

    /// Renders the string over `n` qubits, e.g. `+XZI`.
    pub fn render(&self, n: usize) -> String {
        let mut s = String::with_capacity(n + 1);
        s.push(if self.negative { '-' } else { '+' });
        for q in 0..n {
            s.push(self.letter(q));
        }
        s
    }
}

/// Maps a tableau mask (qubit `q` in bit `q`) onto a dense basis-index mask.
fn dense_mask(mask: u64, n: usize) -> u64 {
    let mut out = 0;
    for q in 0..n {
        if mask & bit(q) != 0 {
            out |= bit(n - 1 - q);
        }
    }
    out
}

/// Symplectic coordinates packed as `x | z << 64`.
fn packed(p: &PauliString) -> u128 {
    p.x as u128 | (p.z as u128) << 64
}

/// Column order used for row reduction: all `x` bits, then all `z` bits.
fn column_bit(col: usize, n: usize) -> u128 {
    if col < n {
        1u128 << col
    } else {
        1u128 << (64 + col - n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    gens: Vec<PauliString>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasureReport {
    pub outcome: Sign,
    pub deterministic: bool,
}

impl MeasureReport {
    pub fn probability(&self) -> f64 {
        if self.deterministic {
            1.0
        } else {
            0.5
        }
    }
}

impl StabilizerTableau {
    /// Checks that the generators commute and are independent.
    pub fn from_generators(n: usize, gens: Vec<PauliString>) -> Result<Self> {
        if n > MAX_TABLEAU_QUBITS {
            return Err(Error::InvalidRegister {
                got: n,
                max: MAX_TABLEAU_QUBITS,
            });
        }
        if gens.len() != n || gens.iter().any(|g| n < 64 && g.support() >> n != 0) {
            return Err(Error::InvalidTableau);
        }
        for (i, a) in gens.iter().enumerate() {
            if gens[i + 1..].iter().any(|b| !a.commutes(b)) {
                return Err(Error::InvalidTableau);
            }
        }
        let t = Self { n, gens };
        if t.rank() != n {
            return Err(Error::InvalidTableau);
        }
        Ok(t)
    }

    /// Parses generators such as `["XZ", "ZX"]`.
    pub fn from_strings(rows: &[&str]) -> Result<Self> {
        let mut gens = Vec::with_capacity(rows.len());
        for r in rows {
            let (len, p) = PauliString::parse(r)?;
            if len != rows.len() {
                return Err(Error::InvalidTableau);
            }
            gens.push(p);
        }
        Self::from_generators(rows.len(), gens)
    }

    /// Generator `i` is `X_i ∏_{j ∈ N(i)} Z_j`.
    pub fn graph_state(spec: &GraphSpec) -> Result<Self> {
        let n = spec.vertex_count();
        if n > MAX_TABLEAU_QUBITS {
            return Err(Error::InvalidRegister {
                got: n,
                max: MAX_TABLEAU_QUBITS,
            });
        }
        let gens = (0..n)
            .map(|v| PauliString {
                x: bit(v),
                z: spec.neighbour_mask(v),
                negative: false,
            })
            .collect();
        Ok(Self { n, gens })
    }

    /// Stabilizer group of a dense state, found by scanning all `4^n` Paulis.
    pub fn from_state_vector(state: &QubitState) -> Result<Self> {
        let n = state.qubit_count();
        if n > MAX_ORACLE_QUBITS {
            return Err(Error::InvalidRegister {
                got: n,
                max: MAX_ORACLE_QUBITS,
            });
        }
        let mut basis: Vec<u128> = Vec::new();
        let mut gens = Vec::new();
        'scan: for x in 0..1u64 << n {
            for z in 0..1u64 << n {
                if x == 0 && z == 0 {
                    continue;
                }
                let p = PauliString {
                    x,
                    z,
                    negative: false,
                };
                let e = p.expectation(state)?;
                if (e.abs() - 1.0).abs() > 1e-9 {
                    continue;
                }
                let mut v = packed(&p);
                for b in &basis {
                    let pivot = 1u128 << (127 - b.leading_zeros());
                    if v & pivot != 0 {
                        v ^= b;
                    }
                }
                if v != 0 {
                    basis.push(v);
                    basis.sort_unstable_by(|a, b| b.cmp(a));
                    gens.push(PauliString {
                        negative: e < 0.0,
                        ..p
                    });
                    if gens.len() == n {
                        break 'scan;
                    }
                }
            }
        }
        Self::from_generators(n, gens).map_err(|_| {
            Error::InvalidParameter("state is not a stabilizer state".into())
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.gens
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            Err(Error::QubitOutOfRange {
                index: q,
                count: self.n,
            })
        } else {
            Ok(())
        }
    }

    fn rank(&self) -> usize {
        let mut rows: Vec<u128> = self.gens.iter().map(packed).collect();
        let mut rank = 0;
        for col in 0..2 * self.n {
            let m = column_bit(col, self.n);
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r] & m != 0) {
                rows.swap(rank, p);
                for r in 0..rows.len() {
                    if r != rank && rows[r] & m != 0 {
                        rows[r] ^= rows[rank];
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    pub fn is_valid(&self) -> bool {
        Self::from_generators(self.n, self.gens.clone()).is_ok()
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = bit(q);
        for g in &mut self.gens {
            let (x, z) = (g.x & m, g.z & m);
            g.negative ^= x != 0 && z != 0;
            g.x = (g.x & !m) | z;
            g.z = (g.z & !m) | x;
        }
        Ok(())
    }

    /// Phase gate `diag(1, i)`.
    pub fn apply_s(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = bit(q);
        for g in &mut self.gens {
            g.negative ^= g.x & g.z & m != 0;
            g.z ^= g.x & m;
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::InvalidParameter("CZ needs two distinct qubits".into()));
        }
        let (ma, mb) = (bit(a), bit(b));
        for g in &mut self.gens {
            let (xa, xb) = (g.x & ma != 0, g.x & mb != 0);
            let (za, zb) = (g.z & ma != 0, g.z & mb != 0);
            g.negative ^= xa && xb && (za ^ zb);
            if xa {
                g.z ^= mb;
            }
            if xb {
                g.z ^= ma;
            }
        }
        Ok(())
    }

    /// Conjugation by a Pauli operator.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        for g in &mut self.gens {
            g.negative ^= !g.commutes(p);
        }
    }

    /// Clifford local operation; `ZPhase` must be a multiple of `π/2`.
    pub fn apply_local(&mut self, q: usize, op: LocalOp) -> Result<()> {
        self.check_qubit(q)?;
        match op {
            LocalOp::X => self.apply_pauli(&PauliString::single(q, PauliBasis::X)),
            LocalOp::Y => self.apply_pauli(&PauliString::single(q, PauliBasis::Y)),
            LocalOp::Z => self.apply_pauli(&PauliString::single(q, PauliBasis::Z)),
            LocalOp::H => self.apply_h(q)?,
            LocalOp::ZPhase(phi) => {
                let k = phi / core::f64::consts::FRAC_PI_2;
                let kr = libm::round(k);
                if (k - kr).abs() > 1e-9 {
                    return Err(Error::NonClifford(format!("{op}")));
                }
                for _ in 0..(kr as i64).rem_euclid(4) {
                    self.apply_s(q)?;
                }
            }
        }
        Ok(())
    }

    pub fn apply_corrections(&mut self, corrections: &[Correction]) -> Result<()> {
        for c in corrections {
            self.apply_local(c.qubit, c.op)?;
        }
        Ok(())
    }

    /// Writes `(x, z)` as a product of generators; `None` if outside the group.
    fn decompose(&self, target: u128) -> Option<u64> {
        let mut rows: Vec<(u128, u64)> = self
            .gens
            .iter()
            .enumerate()
            .map(|(i, g)| (packed(g), bit(i)))
            .collect();
        let mut rank = 0;
        let mut t = (target, 0u64);
        for col in 0..2 * self.n {
            let m = column_bit(col, self.n);
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r].0 & m != 0) {
                rows.swap(rank, p);
                let pivot = rows[rank];
                for r in rows.iter_mut().skip(rank + 1) {
                    if r.0 & m != 0 {
                        r.0 ^= pivot.0;
                        r.1 ^= pivot.1;
                    }
                }
                if t.0 & m != 0 {
                    t.0 ^= pivot.0;
                    t.1 ^= pivot.1;
                }
                rank += 1;
            }
        }
        (t.0 == 0).then_some(t.1)
    }

    /// Sign with which `±obs` belongs to the group, or `None` if neither does.
    pub fn group_sign(&self, obs: &PauliString) -> Option<Sign> {
        if self.gens.iter().any(|g| !g.commutes(obs)) {
            return None;
        }
        let combo = self.decompose(packed(obs))?;
        let mut prod = PauliString::identity();
        for (i, g) in self.gens.iter().enumerate() {
            if combo & bit(i) != 0 {
                prod = prod.mul_commuting(g);
            }
        }
        Some(Sign::from_negative(prod.negative != obs.negative))
    }

    fn measure_with(&mut self, obs: &PauliString, pick: Option<Sign>, random: bool) -> Result<MeasureReport> {
        if self.n < 64 && (obs.support() >> self.n) != 0 {
            return Err(Error::QubitOutOfRange {
                index: 63 - obs.support().leading_zeros() as usize,
                count: self.n,
            });
        }
        let anti: Vec<usize> = (0..self.n).filter(|&i| !self.gens[i].commutes(obs)).collect();
        match anti.first() {
            None => {
                let outcome = self.group_sign(obs).ok_or(Error::InvalidTableau)?;
                if pick.is_some_and(|p| p != outcome) {
                    return Err(Error::ZeroProbability);
                }
                Ok(MeasureReport {
                    outcome,
                    deterministic: true,
                })
            }
            Some(&k) => {
                let outcome = pick.unwrap_or(Sign::from_negative(random));
                let pivot = self.gens[k];
                for &i in &anti[1..] {
                    self.gens[i] = self.gens[i].mul_commuting(&pivot);
                }
                self.gens[k] = PauliString {
                    negative: obs.negative ^ outcome.is_negative(),
                    ..*obs
                };
                Ok(MeasureReport {
                    outcome,
                    deterministic: false,
                })
            }
        }
    }

    /// Measures `obs` and post-selects `outcome`; zero-probability outcomes are errors.
    pub fn measure_forced(&mut self, obs: &PauliString, outcome: Sign) -> Result<MeasureReport> {
        self.measure_with(obs, Some(outcome), false)
    }

    pub fn measure_random<R: Rng + ?Sized>(&mut self, obs: &PauliString, rng: &mut R) -> Result<MeasureReport> {
        let coin = rng.random_bool(0.5);
        self.measure_with(obs, None, coin)
    }

    /// Single-qubit Pauli measurement; `forced` post-selects, otherwise `rng` decides.
    pub fn measure_pauli<R: Rng + ?Sized>(
        &mut self,
        q: usize,
        basis: PauliBasis,
        forced: Option<Sign>,
        rng: &mut R,
    ) -> Result<MeasureReport> {
        self.check_qubit(q)?;
        let obs = PauliString::single(q, basis);
        match forced {
            Some(s) => self.measure_forced(&obs, s),
            None => self.measure_random(&obs, rng),
        }
    }

    /// Reduced row-echelon generators; equal groups give equal forms.
    pub fn canonical(&self) -> Vec<PauliString> {
        let mut rows = self.gens.clone();
        let mut rank = 0;
        for col in 0..2 * self.n {
            let m = column_bit(col, self.n);
            if let Some(p) = (rank..rows.len()).find(|&r| packed(&rows[r]) & m != 0) {
                rows.swap(rank, p);
                let pivot = rows[rank];
                for (r, row) in rows.iter_mut().enumerate() {
                    if r != rank && packed(row) & m != 0 {
                        *row = row.mul_commuting(&pivot);
                    }
                }
                rank += 1;
            }
        }
        rows
    }

    pub fn same_group(&self, other: &Self) -> bool {
        self.n == other.n && self.canonical() == other.canonical()
    }

    /// Drops qubit `q`, which must be in a `Z` eigenstate; returns its eigenvalue.
    pub fn remove_qubit(&mut self, q: usize) -> Result<Sign> {
        self.check_qubit(q)?;
        let m = bit(q);
        if self.gens.iter().any(|g| g.x & m != 0) {
            return Err(Error::NotProjected(q));
        }
        let k = self
            .gens
            .iter()
            .position(|g| g.z & m != 0)
            .ok_or(Error::InvalidTableau)?;
        let pivot = self.gens[k];
        for (i, g) in self.gens.iter_mut().enumerate() {
            if i != k && g.z & m != 0 {
                *g = g.mul_commuting(&pivot);
            }
        }
        // the remaining generators no longer touch q, so the pivot must be ±Z_q
        let outcome = self
            .group_sign(&PauliString::single(q, PauliBasis::Z))
            .ok_or(Error::NotProjected(q))?;
        self.gens.remove(k);
        let low = m - 1;
        for g in &mut self.gens {
            g.x = (g.x & low) | ((g.x >> 1) & !low);
            g.z = (g.z & low) | ((g.z >> 1) & !low);
        }
        self.n -= 1;
        Ok(outcome)
    }

    /// Graph and generator signs when the group is a graph state up to a Pauli-`Z` frame.
    pub fn graph_form(&self) -> Option<(GraphSpec, Vec<Sign>)> {
        let rows = self.canonical();
        let mut edges = Vec::new();
        let mut signs = Vec::with_capacity(self.n);
        for (i, r) in rows.iter().enumerate() {
            if r.x != bit(i) || r.z & bit(i) != 0 {
                return None;
            }
            for j in 0..self.n {
                if r.z & bit(j) != 0 {
                    if rows[j].z & bit(i) == 0 {
                        return None;
                    }
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
            signs.push(Sign::from_negative(r.negative));
        }
        GraphSpec::new(self.n, &edges).ok().map(|g| (g, signs))
    }

    /// Pauli `F` with `F·self·F = target`, preferring `Z` factors.
    pub fn pauli_frame_to(&self, target: &Self) -> Result<PauliString> {
        if self.n != target.n {
            return Err(Error::RegisterSize {
                expected: target.n,
                got: self.n,
            });
        }
        let n = self.n;
        // unknown vector: fz bits in 0..n, fx bits in 64..64+n
        let mut rows: Vec<(u128, bool)> = Vec::with_capacity(n);
        for g in &target.gens {
            let current = self
                .group_sign(&PauliString {
                    negative: false,
                    ..*g
                })
                .ok_or_else(|| Error::Mismatch("stabilizer groups differ beyond signs".into()))?;
            let flip = current.is_negative() != g.negative;
            rows.push((g.x as u128 | (g.z as u128) << 64, flip));
        }
        let mut rank = 0;
        let mut pivots = Vec::new();
        for col in 0..2 * n {
            let m = column_bit(col, n);
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r].0 & m != 0) {
                rows.swap(rank, p);
                let pivot = rows[rank];
                for (r, row) in rows.iter_mut().enumerate() {
                    if r != rank && row.0 & m != 0 {
                        row.0 ^= pivot.0;
                        row.1 ^= pivot.1;
                    }
                }
                pivots.push(m);
                rank += 1;
            }
        }
        let mut f: u128 = 0;
        for (r, m) in pivots.iter().enumerate() {
            if rows[r].1 {
                f |= m;
            }
        }
        Ok(PauliString {
            z: f as u64,
            x: (f >> 64) as u64,
            negative: false,
        })
    }
}

impl fmt::Display for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.gens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&g.render(self.n))?;
        }
        Ok(())
    }
}

/// Corrections that realize a Pauli string qubit by qubit.
pub fn pauli_corrections(p: &PauliString, n: usize) -> Vec<Correction> {
    (0..n)
        .filter_map(|q| {
            let op = match p.letter(q) {
                'X' => LocalOp::X,
                'Y' => LocalOp::Y,
                'Z' => LocalOp::Z,
                _ => return None,
            };
            Some(Correction::new(q, op))
        })
        .collect()
}

/// Whether `corrections` map `tab` exactly onto the graph state of `spec`.
pub fn equals_up_to_corrections(
    tab: &StabilizerTableau,
    spec: &GraphSpec,
    corrections: &[Correction],
) -> Result<bool> {
    if tab.qubit_count() != spec.vertex_count() {
        return Err(Error::RegisterSize {
            expected: spec.vertex_count(),
            got: tab.qubit_count(),
        });
    }
    let mut t = tab.clone();
    t.apply_corrections(corrections)?;
    Ok(t.same_group(&StabilizerTableau::graph_state(spec)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(vertices);
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {u}")));
            }
            if u >= vertices || v >= vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) outside {vertices} vertices"
                )));
            }
            g.edges.insert((u.min(v), u.max(v)));
        }
        Ok(g)
    }

    pub fn empty(vertices: usize) -> Self {
        Self {
            vertices,
            edges: BTreeSet::new(),
        }
    }

    pub fn chain(vertices: usize) -> Self {
        let mut g = Self::empty(vertices);
        for v in 1..vertices {
            g.edges.insert((v - 1, v));
        }
        g
    }

    /// Vertex 0 joined to every other vertex.
    pub fn star(vertices: usize) -> Self {
        let mut g = Self::empty(vertices);
        for v in 1..vertices {
            g.edges.insert((0, v));
        }
        g
    }

    pub fn triangle() -> Self {
        let mut g = Self::chain(3);
        g.edges.insert((0, 2));
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn toggle_edge(&mut self, u: usize, v: usize) {
        let e = (u.min(v), u.max(v));
        if u != v && !self.edges.remove(&e) {
            self.edges.insert(e);
        }
    }

    pub fn neighbours(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn neighbour_mask(&self, v: usize) -> u64 {
        self.neighbours(v).iter().fold(0, |m, &u| m | bit(u))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbours(v).len()
    }

    pub fn isolate(&mut self, v: usize) {
        self.edges.retain(|&(a, b)| a != v && b != v);
    }

    /// Sorted degrees, useful for shape checks.
    pub fn degree_census(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (0..self.vertices).map(|v| self.degree(v)).collect();
        d.sort_unstable();
        d
    }

    /// Subgraph on `keep` (relabelled in the given order).
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut g = Self::empty(keep.len());
        for (i, &u) in keep.iter().enumerate() {
            for (j, &v) in keep.iter().enumerate().skip(i + 1) {
                if self.has_edge(u, v) {
                    g.edges.insert((i, j));
                }
            }
        }
        g
    }

    /// `b`'s other neighbours toggle onto `a`, then `b` hangs off `a` alone.
    fn absorb(&mut self, a: usize, b: usize) {
        for u in self.neighbours(b) {
            if u != a {
                self.toggle_edge(a, u);
            }
        }
        self.isolate(b);
        self.edges.insert((a.min(b), a.max(b)));
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (u, v) in &self.edges {
            writeln!(f, "{u} {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionVariant {
    /// two-qubit parity projection followed by a Hadamard
    Parity2,
    /// three-qubit gate with GHZ, Bell and product outcomes
    Gate3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionOutcome {
    /// `Z_a Z_b = +1`
    Even,
    /// `Z_a Z_b = -1`
    Odd,
    Ghz,
    /// first two qubits linked, third projected to `Z = spectator`
    Bell { spectator: Sign },
    /// all three projected
    Product { values: [Sign; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FuseLabel {
    /// two chains merged, one dangling bond
    ChainJoin,
    /// three chains merged around one qubit
    TJoin,
    /// two of three chains merged, the third end awaits recovery
    PairJoin,
    Failure,
}

impl fmt::Display for FuseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuseLabel::ChainJoin => "chain-join",
            FuseLabel::TJoin => "t-join",
            FuseLabel::PairJoin => "pair-join",
            FuseLabel::Failure => "failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseReport {
    pub label: FuseLabel,
    pub corrections: Vec<Correction>,
    /// probability of the post-selected projections
    pub probability: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub outcome: Sign,
    pub corrections: Vec<Correction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitStatus {
    Active,
    /// projected onto a `Z` eigenstate, edges kept until recovery
    Pending(Sign),
    Removed(Sign),
}

/// Tableau plus the graph bookkeeping needed to grow chains by fusion.
///
/// The tableau always equals `graph_state(graph)` with every pending or
/// removed qubit projected onto its recorded `Z` value.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    tableau: StabilizerTableau,
    graph: GraphSpec,
    status: Vec<QubitStatus>,
}

impl Cluster {
    pub fn new(graph: GraphSpec) -> Result<Self> {
        let tableau = StabilizerTableau::graph_state(&graph)?;
        let status = vec![QubitStatus::Active; graph.vertex_count()];
        Ok(Self {
            tableau,
            graph,
            status,
        })
    }

    /// Disjoint chains laid out consecutively; returns the qubits of each.
    pub fn disjoint_chains(lengths: &[usize]) -> Result<(Self, Vec<Vec<usize>>)> {
        let total: usize = lengths.iter().sum();
        let mut g = GraphSpec::empty(total);
        let mut chains = Vec::new();
        let mut start = 0;
        for &len in lengths {
            let qs: Vec<usize> = (start..start + len).collect();
            for w in qs.windows(2) {
                g.toggle_edge(w[0], w[1]);
            }
            chains.push(qs);
            start += len;
        }
        Ok((Self::new(g)?, chains))
    }

    pub fn tableau(&self) -> &StabilizerTableau {
        &self.tableau
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn status(&self, q: usize) -> QubitStatus {
        self.status[q]
    }

    pub fn active_qubits(&self) -> Vec<usize> {
        (0..self.status.len())
            .filter(|&q| !matches!(self.status[q], QubitStatus::Removed(_)))
            .collect()
    }

    pub fn pending_qubits(&self) -> Vec<usize> {
        (0..self.status.len())
            .filter(|&q| matches!(self.status[q], QubitStatus::Pending(_)))
            .collect()
    }

    /// Tableau the bookkeeping predicts.
    pub fn expected_tableau(&self) -> Result<StabilizerTableau> {
        let mut t = StabilizerTableau::graph_state(&self.graph)?;
        for (q, s) in self.status.iter().enumerate() {
            if let QubitStatus::Pending(v) | QubitStatus::Removed(v) = *s {
                t.measure_forced(&PauliString::single(q, PauliBasis::Z), v)?;
            }
        }
        Ok(t)
    }

    pub fn consistent(&self) -> bool {
        self.tableau.is_valid()
            && self
                .expected_tableau()
                .is_ok_and(|e| e.same_group(&self.tableau))
    }

    /// Tableau and graph restricted to non-removed qubits, with their original indices.
    pub fn active_tableau(&self) -> Result<(StabilizerTableau, Vec<usize>)> {
        let mut t = self.tableau.clone();
        for q in (0..self.status.len()).rev() {
            if matches!(self.status[q], QubitStatus::Removed(_)) {
                t.remove_qubit(q)?;
            }
        }
        Ok((t, self.active_qubits()))
    }

    pub fn active_graph(&self) -> (GraphSpec, Vec<usize>) {
        let keep = self.active_qubits();
        (self.graph.induced(&keep), keep)
    }

    fn check_fusable(&self, qubits: &[usize], warnings: &mut Vec<String>) -> Result<()> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.status.len() {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    count: self.status.len(),
                });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidParameter(format!("qubit {q} named twice")));
            }
            if self.status[q] != QubitStatus::Active {
                return Err(Error::InvalidParameter(format!("qubit {q} is not active")));
            }
            let d = self.graph.degree(q);
            if d > 1 {
                warnings.push(format!("qubit {q} has degree {d}; it is not a chain end"));
            }
        }
        Ok(())
    }

    /// Applies a fusion with a known outcome and restores the graph-state frame.
    pub fn fuse(
        &mut self,
        variant: FusionVariant,
        qubits: &[usize],
        outcome: FusionOutcome,
    ) -> Result<FuseReport> {
        let arity = match variant {
            FusionVariant::Parity2 => 2,
            FusionVariant::Gate3 => 3,
        };
        if qubits.len() != arity {
            return Err(Error::InvalidParameter(format!(
                "{variant:?} fusion acts on {arity} qubits, got {}",
                qubits.len()
            )));
        }
        let allowed = match variant {
            FusionVariant::Parity2 => matches!(outcome, FusionOutcome::Even | FusionOutcome::Odd),
            FusionVariant::Gate3 => matches!(
                outcome,
                FusionOutcome::Ghz | FusionOutcome::Bell { .. } | FusionOutcome::Product { .. }
            ),
        };
        if !allowed {
            return Err(Error::InvalidOutcome(format!("{outcome:?} for {variant:?}")));
        }
        let mut warnings = Vec::new();
        self.check_fusable(qubits, &mut warnings)?;
        let mut work = self.tableau.clone();
        let mut graph = self.graph.clone();
        let mut status = self.status.clone();
        let mut probability = 1.0;
        let z = |q| PauliString::single(q, PauliBasis::Z);
        let label = match outcome {
            FusionOutcome::Even | FusionOutcome::Odd => {
                let (a, b) = (qubits[0], qubits[1]);
                if graph.has_edge(a, b) {
                    return Err(Error::InvalidParameter(format!(
                        "qubits {a} and {b} are already adjacent"
                    )));
                }
                let s = Sign::from_negative(outcome == FusionOutcome::Odd);
                probability *= work.measure_forced(&PauliString::zz(a, b), s)?.probability();
                work.apply_h(b)?;
                graph.absorb(a, b);
                FuseLabel::ChainJoin
            }
            FusionOutcome::Ghz => {
                let (a, b, c) = (qubits[0], qubits[1], qubits[2]);
                if graph.has_edge(a, b) || graph.has_edge(a, c) || graph.has_edge(b, c) {
                    return Err(Error::InvalidParameter("fused qubits are already adjacent".into()));
                }
                probability *= work.measure_forced(&PauliString::zz(a, b), Sign::Plus)?.probability();
                probability *= work.measure_forced(&PauliString::zz(b, c), Sign::Plus)?.probability();
                work.apply_h(b)?;
                work.apply_h(c)?;
                let mut rewired = graph.clone();
                rewired.absorb(a, b);
                for u in graph.neighbours(c) {
                    rewired.toggle_edge(a, u);
                }
                rewired.isolate(c);
                rewired.toggle_edge(a, c);
                graph = rewired;
                FuseLabel::TJoin
            }
            FusionOutcome::Bell { spectator } => {
                let (a, b, c) = (qubits[0], qubits[1], qubits[2]);
                if graph.has_edge(a, b) {
                    return Err(Error::InvalidParameter(format!(
                        "qubits {a} and {b} are already adjacent"
                    )));
                }
                probability *= work.measure_forced(&z(c), spectator)?.probability();
                probability *= work.measure_forced(&PauliString::zz(a, b), Sign::Minus)?.probability();
                work.apply_h(b)?;
                graph.absorb(a, b);
                status[c] = QubitStatus::Pending(spectator);
                FuseLabel::PairJoin
            }
            FusionOutcome::Product { values } => {
                for (&q, &v) in qubits.iter().zip(&values) {
                    probability *= work.measure_forced(&z(q), v)?.probability();
                    status[q] = QubitStatus::Pending(v);
                }
                FuseLabel::Failure
            }
        };
        let candidate = Cluster {
            tableau: work.clone(),
            graph: graph.clone(),
            status: status.clone(),
        };
        let expected = candidate.expected_tableau()?;
        let frame = work.pauli_frame_to(&expected)?;
        work.apply_pauli(&frame);
        if !work.same_group(&expected) {
            return Err(Error::Mismatch("fusion result is not the predicted graph".into()));
        }
        self.tableau = work;
        self.graph = graph;
        self.status = status;
        Ok(FuseReport {
            label,
            corrections: pauli_corrections(&frame, self.tableau.qubit_count()),
            probability,
            warnings,
        })
    }

    /// Measures a chain end in `Z`, repairs its neighbour and retires it.
    pub fn recover_failure<R: Rng + ?Sized>(
        &mut self,
        q: usize,
        forced: Option<Sign>,
        rng: &mut R,
    ) -> Result<RecoveryReport> {
        if q >= self.status.len() {
            return Err(Error::QubitOutOfRange {
                index: q,
                count: self.status.len(),
            });
        }
        let degree = self.graph.degree(q);
        if degree > 1 {
            return Err(Error::InteriorQubit { qubit: q, degree });
        }
        let outcome = match self.status[q] {
            QubitStatus::Removed(_) => {
                return Err(Error::InvalidParameter(format!("qubit {q} was already removed")))
            }
            QubitStatus::Pending(v) => {
                if forced.is_some_and(|f| f != v) {
                    return Err(Error::ZeroProbability);
                }
                v
            }
            QubitStatus::Active => self.tableau.measure_pauli(q, PauliBasis::Z, forced, rng)?.outcome,
        };
        let mut corrections = Vec::new();
        if outcome == Sign::Minus {
            for u in self.graph.neighbours(q) {
                self.tableau.apply_local(u, LocalOp::Z)?;
                corrections.push(Correction::new(u, LocalOp::Z));
            }
        }
        self.graph.isolate(q);
        self.status[q] = QubitStatus::Removed(outcome);
        Ok(RecoveryReport {
            outcome,
            corrections,
        })
    }
}
