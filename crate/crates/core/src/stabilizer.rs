//! Qubit stabilizer tableaux with destabilizers (Aaronson-Gottesman form).
//!
//! A [`PauliString`] is `i^k X^x Z^z` with bit masks `x`, `z` packed into
//! 64-bit words. Hermitian strings have `k = popcount(x & z) mod 2`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{GameDirection, Loop, LoopKind, TorusLattice};
use crate::statevector::DenseState;

/// Largest tableau that [`Tableau::to_dense`] expands.
pub const MAX_DENSE_QUBITS: usize = 20;

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            phase: 0,
        }
    }

    /// `prod_{q in qubits} X_q`.
    pub fn x_on(n: usize, qubits: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::identity(n);
        for q in qubits {
            p.set(q, true, p.get(q).1);
        }
        p
    }

    /// `prod_{q in qubits} Z_q`.
    pub fn z_on(n: usize, qubits: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::identity(n);
        for q in qubits {
            p.set(q, p.get(q).0, true);
        }
        p
    }

    /// Parses strings such as `"+XIZY"`, `"-iZZ"` or `"XX"`. Letter `q` acts
    /// on qubit `q`; `Y` is the Hermitian `iXZ`.
    pub fn from_text(text: &str) -> Result<Self> {
        let (sign, body) = if let Some(r) = text.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = text.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = text.strip_prefix('+') {
            (0, r)
        } else if let Some(r) = text.strip_prefix('-') {
            (2, r)
        } else {
            (0, text)
        };
        let mut p = Self::identity(body.chars().count());
        let mut ys = 0u8;
        for (q, ch) in body.chars().enumerate() {
            match ch {
                'I' => {}
                'X' => p.set(q, true, false),
                'Z' => p.set(q, false, true),
                'Y' => {
                    p.set(q, true, true);
                    ys += 1;
                }
                other => {
                    return Err(Error::InvalidConfiguration(format!(
                        "unknown Pauli letter {other:?} in {text:?}"
                    )))
                }
            }
        }
        p.phase = (sign + ys) % 4;
        Ok(p)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Exponent `k` of the `i^k` prefactor in `i^k X^x Z^z`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn set_phase(&mut self, k: u8) {
        self.phase = k % 4;
    }

    pub fn get(&self, q: usize) -> (bool, bool) {
        let (w, b) = (q / 64, q % 64);
        ((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, x: bool, z: bool) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (w, b) = (q / 64, q % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn x_bits(&self) -> &[u64] {
        &self.x
    }

    pub fn z_bits(&self) -> &[u64] {
        &self.z
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    fn y_count(&self) -> u32 {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    pub fn is_hermitian(&self) -> bool {
        (self.phase as u32 + self.y_count()) % 2 == 0
    }

    /// Phase of the Hermitian representative, `+1` or `-1`; `None` when the
    /// string carries an odd power of `i`.
    pub fn sign(&self) -> Option<i8> {
        if !self.is_hermitian() {
            return None;
        }
        Some(if (self.phase as u32 + 4 - self.y_count() % 4) % 4 == 0 { 1 } else { -1 })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut c = 0u32;
        for w in 0..self.x.len() {
            c += (self.x[w] & other.z[w]).count_ones() + (self.z[w] & other.x[w]).count_ones();
        }
        c % 2 == 0
    }

    /// `self <- self * other`.
    pub fn mul_assign(&mut self, other: &PauliString) {
        debug_assert_eq!(self.n, other.n);
        let mut swaps = 0u32;
        for w in 0..self.x.len() {
            swaps += (self.z[w] & other.x[w]).count_ones();
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
        self.phase = ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8;
    }

    pub fn mul(&self, other: &PauliString) -> PauliString {
        let mut out = self.clone();
        out.mul_assign(other);
        out
    }

    pub fn negate(&mut self) {
        self.phase = (self.phase + 2) % 4;
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = (self.phase as u32 + 4 - self.y_count() % 4) % 4;
        f.write_str(["+", "+i", "-", "-i"][k as usize])?;
        for q in 0..self.n {
            f.write_str(match self.get(q) {
                (false, false) => "I",
                (true, false) => "X",
                (false, true) => "Z",
                (true, true) => "Y",
            })?;
        }
        Ok(())
    }
}

/// Outcome of a Pauli measurement: `false` for eigenvalue `+1`, `true` for `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub outcome: bool,
    pub deterministic: bool,
}

impl Measurement {
    pub fn eigenvalue(&self) -> i8 {
        if self.outcome {
            -1
        } else {
            1
        }
    }

    pub fn bit(&self) -> u8 {
        self.outcome as u8
    }
}

/// Rows `0..n` are destabilizers, rows `n..2n` stabilizers.
#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    n: usize,
    rows: Vec<PauliString>,
}

impl Tableau {
    /// `|0...0>`: stabilizers `Z_q`, destabilizers `X_q`.
    pub fn zero_state(n: usize) -> Self {
        let mut rows: Vec<_> = (0..n).map(|q| PauliString::x_on(n, [q])).collect();
        rows.extend((0..n).map(|q| PauliString::z_on(n, [q])));
        Self { n, rows }
    }

    /// Builds a tableau from `n` independent, commuting, Hermitian generators
    /// on `n` qubits, solving for matching destabilizers.
    pub fn from_stabilizers(stabilizers: Vec<PauliString>) -> Result<Self> {
        let n = stabilizers.len();
        for (i, s) in stabilizers.iter().enumerate() {
            if s.num_qubits() != n {
                return Err(Error::InvalidStabilizers(format!(
                    "generator {i} acts on {} qubits, expected {n}",
                    s.num_qubits()
                )));
            }
            if !s.is_hermitian() {
                return Err(Error::InvalidStabilizers(format!("generator {i} is not Hermitian")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if !stabilizers[i].commutes_with(&stabilizers[j]) {
                    return Err(Error::InvalidStabilizers(format!(
                        "generators {i} and {j} anticommute"
                    )));
                }
            }
        }
        let mut destabs = solve_destabilizers(&stabilizers)?;
        for j in 0..n {
            for i in 0..j {
                if !destabs[i].commutes_with(&destabs[j]) {
                    destabs[j].mul_assign(&stabilizers[i]);
                }
            }
            let y = destabs[j].y_count();
            destabs[j].set_phase((y % 4) as u8);
        }
        let mut rows = destabs;
        rows.extend(stabilizers);
        let t = Self { n, rows };
        t.check_invariants().map_err(Error::InvalidStabilizers)?;
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.rows[self.n..]
    }

    pub fn destabilizers(&self) -> &[PauliString] {
        &self.rows[..self.n]
    }

    /// Symplectic structure and Hermiticity of every row.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.n;
        for (i, r) in self.rows.iter().enumerate() {
            if !r.is_hermitian() {
                return Err(format!("row {i} ({r}) is not Hermitian"));
            }
        }
        for i in 0..2 * n {
            for j in i + 1..2 * n {
                let should_anticommute = j == i + n && i < n;
                if self.rows[i].commutes_with(&self.rows[j]) == should_anticommute {
                    return Err(format!(
                        "rows {i} and {j} have the wrong commutation relation"
                    ));
                }
            }
        }
        Ok(())
    }

    fn debug_check(&self) {
        if cfg!(debug_assertions) && self.n <= 32 {
            if let Err(e) = self.check_invariants() {
                panic!("tableau invariant broken: {e}");
            }
        }
    }

    /// Applies `W^(a/2)` for a Z-type loop `W = prod_{b in loop} Z_b` and
    /// `a` in `{0, 1}`. On stabilizer rows this is the Clifford map
    /// `P -> i P W` for every `P` anticommuting with `W`.
    pub fn apply_half_wilson(&mut self, lp: &Loop, a: u32) -> Result<()> {
        if lp.kind() != LoopKind::Direct {
            return Err(Error::WrongKind { expected: "direct" });
        }
        if a > 1 {
            return Err(Error::InvalidConfiguration(format!(
                "team input {a} outside Z_2"
            )));
        }
        if a == 0 {
            return Ok(());
        }
        if let Some(&b) = lp.bonds().iter().find(|&&b| b >= self.n) {
            return Err(Error::BondOutOfRange {
                bond: b,
                num_bonds: self.n,
            });
        }
        let w = PauliString::z_on(self.n, lp.bonds().iter().copied());
        for r in self.rows.iter_mut() {
            if !r.commutes_with(&w) {
                r.mul_assign(&w);
                r.phase = (r.phase + 1) % 4;
            }
        }
        self.debug_check();
        Ok(())
    }

    /// `Some(+-1)` when `+-p` is in the stabilizer group, `None` when the
    /// measurement of `p` would be random.
    pub fn expectation_sign(&self, p: &PauliString) -> Result<Option<i8>> {
        self.check_operator(p)?;
        if self.stabilizers().iter().any(|s| !s.commutes_with(p)) {
            return Ok(None);
        }
        let prod = self.stabilizer_product(p);
        Ok(Some(if prod.phase == p.phase { 1 } else { -1 }))
    }

    fn check_operator(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "operator on {} qubits, tableau on {}",
                p.num_qubits(),
                self.n
            )));
        }
        if !p.is_hermitian() {
            return Err(Error::InvalidConfiguration(format!("{p} is not Hermitian")));
        }
        Ok(())
    }

    /// Product of the stabilizers whose destabilizer anticommutes with `p`;
    /// equals `+-p` when `p` commutes with the whole group.
    fn stabilizer_product(&self, p: &PauliString) -> PauliString {
        let mut acc = PauliString::identity(self.n);
        for i in 0..self.n {
            if !self.rows[i].commutes_with(p) {
                acc.mul_assign(&self.rows[i + self.n]);
            }
        }
        acc
    }

    /// Measures a Hermitian Pauli string with a random outcome where required.
    pub fn measure<R: Rng + ?Sized>(&mut self, p: &PauliString, rng: &mut R) -> Result<Measurement> {
        self.measure_inner(p, || rng.gen::<bool>())
    }

    /// Like [`Tableau::measure`], but a random outcome is replaced by `forced`.
    pub fn measure_forced(&mut self, p: &PauliString, forced: bool) -> Result<Measurement> {
        self.measure_inner(p, || forced)
    }

    fn measure_inner(
        &mut self,
        p: &PauliString,
        mut coin: impl FnMut() -> bool,
    ) -> Result<Measurement> {
        self.check_operator(p)?;
        let n = self.n;
        let Some(pivot) = (n..2 * n).find(|&i| !self.rows[i].commutes_with(p)) else {
            let prod = self.stabilizer_product(p);
            return Ok(Measurement {
                outcome: prod.phase != p.phase,
                deterministic: true,
            });
        };
        let pivot_row = self.rows[pivot].clone();
        for i in 0..2 * n {
            if i != pivot && !self.rows[i].commutes_with(p) {
                self.rows[i].mul_assign(&pivot_row);
            }
        }
        let outcome = coin();
        self.rows[pivot - n] = pivot_row;
        let mut new = p.clone();
        if outcome {
            new.negate();
        }
        self.rows[pivot] = new;
        self.debug_check();
        Ok(Measurement {
            outcome,
            deterministic: false,
        })
    }

    pub fn measure_x<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<Measurement> {
        self.check_qubit(qubit)?;
        self.measure(&PauliString::x_on(self.n, [qubit]), rng)
    }

    pub fn measure_z<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<Measurement> {
        self.check_qubit(qubit)?;
        self.measure(&PauliString::z_on(self.n, [qubit]), rng)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::BondOutOfRange {
                bond: q,
                num_bonds: self.n,
            });
        }
        Ok(())
    }

    /// Dense amplitudes of the stabilized state (up to global phase), for at
    /// most [`MAX_DENSE_QUBITS`] qubits.
    pub fn to_dense(&self) -> Result<DenseState> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::MemoryBudget {
                amplitudes: 1u128.checked_shl(self.n as u32).unwrap_or(u128::MAX),
                budget: 1 << MAX_DENSE_QUBITS,
            });
        }
        let mut probe = self.clone();
        let mut index = 0usize;
        for q in 0..self.n {
            let m = probe.measure_forced(&PauliString::z_on(self.n, [q]), false)?;
            if m.outcome {
                index |= 1 << q;
            }
        }
        let mut state = DenseState::basis_index(2, self.n, index)?;
        for s in self.stabilizers() {
            let mut t = state.applied(&crate::statevector::ClockShiftString::from_pauli(s))?;
            t.add_scaled(&state, num_complex::Complex64::new(1.0, 0.0))?;
            state = t;
        }
        state.normalize()?;
        Ok(state)
    }
}

/// Solves `<D_i, S_j> = delta_ij` over GF(2) for the destabilizer bit patterns.
fn solve_destabilizers(stabs: &[PauliString]) -> Result<Vec<PauliString>> {
    let n = stabs.len();
    // Row j: symplectic dual of S_j, (z | x), then an identity block.
    let cols = 2 * n + n;
    let cw = cols.div_ceil(64);
    let get = |row: &[u64], c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;
    let flip = |row: &mut [u64], c: usize| row[c / 64] ^= 1 << (c % 64);
    let mut m: Vec<Vec<u64>> = stabs
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut row = vec![0u64; cw];
            for q in 0..n {
                let (x, z) = s.get(q);
                if z {
                    flip(&mut row, q);
                }
                if x {
                    flip(&mut row, n + q);
                }
            }
            flip(&mut row, 2 * n + j);
            row
        })
        .collect();
    let mut pivots = Vec::with_capacity(n);
    let mut r = 0;
    for c in 0..2 * n {
        if r == n {
            break;
        }
        let Some(p) = (r..n).find(|&i| get(&m[i], c)) else {
            continue;
        };
        m.swap(r, p);
        let pr = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && get(row, c) {
                row.iter_mut().zip(&pr).for_each(|(a, b)| *a ^= b);
            }
        }
        pivots.push(c);
        r += 1;
    }
    if r < n {
        return Err(Error::InvalidStabilizers(format!(
            "generators are dependent (rank {r} < {n})"
        )));
    }
    // RREF = C A with C stored in the identity block; D_i sets pivot column
    // k to C[k][i].
    Ok((0..n)
        .map(|i| {
            let mut d = PauliString::identity(n);
            for (k, &c) in pivots.iter().enumerate() {
                if get(&m[k], 2 * n + i) {
                    let q = c % n;
                    let (x, z) = d.get(q);
                    // Column c < n multiplies S_z, so it is an x bit of D.
                    if c < n {
                        d.set(q, !x, z);
                    } else {
                        d.set(q, x, !z);
                    }
                }
            }
            d
        })
        .collect())
}

/// Stabilizer tableau of the qubit cat state `(|00> + |01>)/sqrt 2` on the
/// torus, fixing `W_x = w_sign` (`+1` or `-1`) and `V_x = +1`.
pub fn prepare_cat_tableau(lattice: &TorusLattice, w_sign: i8) -> Result<Tableau> {
    prepare_cat_tableau_for(lattice, GameDirection::Vertical, w_sign)
}

/// Cat tableau for either game direction. Horizontal games fix `W_y` and
/// `V_y` instead.
pub fn prepare_cat_tableau_for(
    lattice: &TorusLattice,
    direction: GameDirection,
    w_sign: i8,
) -> Result<Tableau> {
    if w_sign != 1 && w_sign != -1 {
        return Err(Error::InvalidConfiguration(format!(
            "Wilson loop eigenvalue must be +1 or -1, got {w_sign}"
        )));
    }
    let n = lattice.num_bonds();
    let mut gens = Vec::with_capacity(n);
    for y in 0..lattice.ly() {
        for x in 0..lattice.lx() {
            if (x, y) != (lattice.lx() - 1, lattice.ly() - 1) {
                gens.push(PauliString::z_on(n, lattice.plaquette_bonds(x, y)?));
                gens.push(PauliString::x_on(n, lattice.star_bonds(x, y)?));
            }
        }
    }
    let (w, v) = match direction {
        GameDirection::Vertical => (lattice.row_loop(0)?, lattice.row_dual_loop(0)?),
        GameDirection::Horizontal => (lattice.column_loop(0)?, lattice.column_dual_loop(0)?),
    };
    let mut w = PauliString::z_on(n, w.bonds().iter().copied());
    if w_sign < 0 {
        w.negate();
    }
    gens.push(w);
    gens.push(PauliString::x_on(n, v.bonds().iter().copied()));
    Tableau::from_stabilizers(gens)
}
