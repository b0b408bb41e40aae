//! Dense state vectors over `M^(2N)` basis states, for qubits and Z_M qudits.
//!
//! Site `b` (a bond id) is digit `b` of the basis index in base `M`, least
//! significant first. The clock operator acts as `C|k> = w^k |k>` and the
//! shift as `S|k> = |k+1>`, with `w = exp(2 pi i / M)`, so `C S = w S C`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{GameDirection, Loop, LoopKind, TorusLattice};
use crate::stabilizer::PauliString;

/// Default cap on the number of stored amplitudes (4 GiB of `Complex64`).
pub const DEFAULT_MAX_AMPLITUDES: usize = 1 << 28;

/// Norm and probability tolerance.
pub const NORM_TOL: f64 = 1e-9;

fn omega(modulus: u32, k: i64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k.rem_euclid(modulus as i64) as f64) / modulus as f64)
}

fn check_modulus(modulus: u32) -> Result<()> {
    if modulus < 2 {
        return Err(Error::InvalidModulus(modulus));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    modulus: u32,
    sites: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    /// Checked `modulus^sites`.
    pub fn dimension(modulus: u32, sites: usize, budget: usize) -> Result<usize> {
        check_modulus(modulus)?;
        let mut n: u128 = 1;
        for _ in 0..sites {
            n = n.saturating_mul(modulus as u128);
            if n > budget as u128 {
                return Err(Error::MemoryBudget {
                    amplitudes: n,
                    budget,
                });
            }
        }
        Ok(n as usize)
    }

    /// The all-zero basis state `|0...0>`.
    pub fn zero(modulus: u32, sites: usize) -> Result<Self> {
        Self::zero_with_budget(modulus, sites, DEFAULT_MAX_AMPLITUDES)
    }

    pub fn zero_with_budget(modulus: u32, sites: usize, budget: usize) -> Result<Self> {
        let len = Self::dimension(modulus, sites, budget)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            modulus,
            sites,
            amps,
        })
    }

    pub fn basis(modulus: u32, digits: &[u32]) -> Result<Self> {
        let mut s = Self::zero(modulus, digits.len())?;
        let idx = s.index_of(digits)?;
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn basis_index(modulus: u32, sites: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(modulus, sites)?;
        if index >= s.amps.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis index {index} >= {}",
                s.amps.len()
            )));
        }
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(modulus: u32, sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        let len = Self::dimension(modulus, sites, DEFAULT_MAX_AMPLITUDES)?;
        if amps.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {sites} sites of dimension {modulus}",
                amps.len()
            )));
        }
        Ok(Self {
            modulus,
            sites,
            amps,
        })
    }

    /// Haar-like random unit state from complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(modulus: u32, sites: usize, rng: &mut R) -> Result<Self> {
        let len = Self::dimension(modulus, sites, DEFAULT_MAX_AMPLITUDES)?;
        let amps = (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut s = Self {
            modulus,
            sites,
            amps,
        };
        s.normalize()?;
        Ok(s)
    }

    /// Uniform superposition: the `+1` eigenstate of every single-site shift.
    pub fn uniform(modulus: u32, sites: usize) -> Result<Self> {
        let len = Self::dimension(modulus, sites, DEFAULT_MAX_AMPLITUDES)?;
        let a = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
        Ok(Self {
            modulus,
            sites,
            amps: vec![a; len],
        })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn stride(&self, site: usize) -> usize {
        (self.modulus as usize).pow(site as u32)
    }

    pub fn digit(&self, index: usize, site: usize) -> u32 {
        ((index / self.stride(site)) % self.modulus as usize) as u32
    }

    pub fn index_of(&self, digits: &[u32]) -> Result<usize> {
        if digits.len() != self.sites {
            return Err(Error::DimensionMismatch(format!(
                "{} digits for {} sites",
                digits.len(),
                self.sites
            )));
        }
        let m = self.modulus as usize;
        let mut idx = 0;
        for (b, &d) in digits.iter().enumerate().rev() {
            if d >= self.modulus {
                return Err(Error::DimensionMismatch(format!(
                    "digit {d} at site {b} exceeds modulus {}",
                    self.modulus
                )));
            }
            idx = idx * m + d as usize;
        }
        Ok(idx)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n < 1e-14 {
            return Err(Error::ZeroProjection("cannot normalize a zero vector".into()));
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    fn check_same_shape(&self, other: &DenseState) -> Result<()> {
        if self.modulus != other.modulus || self.sites != other.sites {
            return Err(Error::DimensionMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.modulus, self.sites, other.modulus, other.sites
            )));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &DenseState) -> Result<Complex64> {
        self.check_same_shape(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2 / (<self|self><other|other>)`: phase-insensitive overlap.
    pub fn fidelity(&self, other: &DenseState) -> Result<f64> {
        let ip = self.inner(other)?;
        Ok(ip.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    pub fn scale(&mut self, c: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= c);
    }

    pub fn add_scaled(&mut self, other: &DenseState, c: Complex64) -> Result<()> {
        self.check_same_shape(other)?;
        self.amps
            .iter_mut()
            .zip(&other.amps)
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &DenseState) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Calls `f(index, digits)` for every basis index in order.
    fn for_each_digits(&self, mut f: impl FnMut(usize, &[u32])) {
        let mut digits = vec![0u32; self.sites];
        for idx in 0..self.amps.len() {
            f(idx, &digits);
            for d in digits.iter_mut() {
                *d += 1;
                if *d == self.modulus {
                    *d = 0;
                } else {
                    break;
                }
            }
        }
    }

    /// Multiplies every amplitude by `phase(digits)`.
    pub fn apply_diagonal(&mut self, mut phase: impl FnMut(&[u32]) -> Complex64) {
        let mut factors = Vec::with_capacity(self.amps.len());
        self.for_each_digits(|_, d| factors.push(phase(d)));
        self.amps
            .iter_mut()
            .zip(factors)
            .for_each(|(a, f)| *a *= f);
    }

    pub fn apply(&mut self, op: &ClockShiftString) -> Result<()> {
        if op.modulus != self.modulus || op.sites() != self.sites {
            return Err(Error::DimensionMismatch(format!(
                "operator on ({}, {}) applied to state on ({}, {})",
                op.modulus,
                op.sites(),
                self.modulus,
                self.sites
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        if self.modulus == 2 {
            let xmask = mask(&op.shift);
            let zmask = mask(&op.clock);
            for (idx, a) in self.amps.iter().enumerate() {
                let t = idx ^ xmask;
                let v = if (t & zmask).count_ones() % 2 == 1 { -*a } else { *a };
                out[t] = op.phase * v;
            }
        } else {
            let m = self.modulus;
            let strides: Vec<usize> = (0..self.sites).map(|b| self.stride(b)).collect();
            let roots: Vec<Complex64> = (0..m).map(|k| omega(m, k as i64)).collect();
            let amps = &self.amps;
            self.for_each_digits(|idx, d| {
                let mut t = 0usize;
                let mut e = 0u64;
                for b in 0..d.len() {
                    let nd = (d[b] + op.shift[b]) % m;
                    t += nd as usize * strides[b];
                    e += (op.clock[b] * nd) as u64;
                }
                out[t] = op.phase * roots[(e % m as u64) as usize] * amps[idx];
            });
        }
        self.amps = out;
        Ok(())
    }

    pub fn applied(&self, op: &ClockShiftString) -> Result<DenseState> {
        let mut s = self.clone();
        s.apply(op)?;
        Ok(s)
    }

    /// `<psi|O|psi>`.
    pub fn expectation(&self, op: &ClockShiftString) -> Result<Complex64> {
        let o = self.applied(op)?;
        self.inner(&o)
    }

    /// Applies a qubit Pauli string (modulus 2 only).
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if self.modulus != 2 {
            return Err(Error::Unsupported(
                "Pauli strings act on qubit states only".into(),
            ));
        }
        self.apply(&ClockShiftString::from_pauli(p))
    }

    /// `(1/M) sum_r U^r`, the projector onto the `U = 1` eigenspace of a
    /// unitary with `U^M = 1`.
    pub fn apply_eigenprojector(&mut self, op: &ClockShiftString) -> Result<()> {
        let mut acc = self.clone();
        let mut cur = self.clone();
        for _ in 1..self.modulus {
            cur.apply(op)?;
            acc.add_scaled(&cur, Complex64::new(1.0, 0.0))?;
        }
        acc.scale(Complex64::new(1.0 / self.modulus as f64, 0.0));
        *self = acc;
        Ok(())
    }

    /// Rotates the listed sites into the shift eigenbasis
    /// `|y~> = M^(-1/2) sum_k w^(-y k) |k>`, so digit `y` afterwards means
    /// shift eigenvalue `w^y`.
    pub fn to_shift_basis(&mut self, sites: &[usize]) -> Result<()> {
        let m = self.modulus as usize;
        let norm = 1.0 / (m as f64).sqrt();
        let roots: Vec<Complex64> = (0..m).map(|k| omega(self.modulus, k as i64)).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for &site in sites {
            if site >= self.sites {
                return Err(Error::DimensionMismatch(format!(
                    "site {site} >= {}",
                    self.sites
                )));
            }
            let stride = self.stride(site);
            let block = stride * m;
            for hi in (0..self.amps.len()).step_by(block) {
                for base in hi..hi + stride {
                    if m == 2 {
                        let (a, b) = (self.amps[base], self.amps[base + stride]);
                        self.amps[base] = (a + b) * norm;
                        self.amps[base + stride] = (a - b) * norm;
                        continue;
                    }
                    for (k, slot) in buf.iter_mut().enumerate() {
                        *slot = self.amps[base + k * stride];
                    }
                    for y in 0..m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (k, b) in buf.iter().enumerate() {
                            acc += roots[(y * k) % m] * b;
                        }
                        self.amps[base + y * stride] = acc * norm;
                    }
                }
            }
        }
        Ok(())
    }

    /// Raw little-endian dump: `u32 M`, `u32 sites`, then interleaved
    /// `f64` real and imaginary parts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.amps.len());
        out.extend_from_slice(&self.modulus.to_le_bytes());
        out.extend_from_slice(&(self.sites as u32).to_le_bytes());
        for a in &self.amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::DimensionMismatch(format!("amplitude dump: {msg}"));
        if bytes.len() < 8 {
            return Err(bad("missing header"));
        }
        let modulus = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let sites = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let len = Self::dimension(modulus, sites, DEFAULT_MAX_AMPLITUDES)?;
        let body = &bytes[8..];
        if body.len() != 16 * len {
            return Err(bad("body length does not match header"));
        }
        let amps = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            modulus,
            sites,
            amps,
        })
    }
}

fn mask(exps: &[u32]) -> usize {
    exps.iter()
        .enumerate()
        .filter(|(_, &e)| e % 2 == 1)
        .fold(0usize, |m, (b, _)| m | (1 << b))
}

/// `phase * prod_b C_b^clock[b] S_b^shift[b]` (shift applied first on each site).
#[derive(Clone, Debug, PartialEq)]
pub struct ClockShiftString {
    modulus: u32,
    clock: Vec<u32>,
    shift: Vec<u32>,
    phase: Complex64,
}

impl ClockShiftString {
    pub fn identity(modulus: u32, sites: usize) -> Self {
        Self {
            modulus,
            clock: vec![0; sites],
            shift: vec![0; sites],
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn new(modulus: u32, clock: Vec<u32>, shift: Vec<u32>, phase: Complex64) -> Result<Self> {
        check_modulus(modulus)?;
        if clock.len() != shift.len() {
            return Err(Error::DimensionMismatch("clock and shift lengths differ".into()));
        }
        let clock = clock.into_iter().map(|c| c % modulus).collect();
        let shift = shift.into_iter().map(|s| s % modulus).collect();
        Ok(Self {
            modulus,
            clock,
            shift,
            phase,
        })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn sites(&self) -> usize {
        self.clock.len()
    }

    pub fn clock(&self) -> &[u32] {
        &self.clock
    }

    pub fn shift(&self) -> &[u32] {
        &self.shift
    }

    pub fn phase(&self) -> Complex64 {
        self.phase
    }

    fn with_exponents(
        modulus: u32,
        sites: usize,
        clock: &[(usize, i64)],
        shift: &[(usize, i64)],
    ) -> Self {
        let mut s = Self::identity(modulus, sites);
        let m = modulus as i64;
        for &(b, e) in clock {
            s.clock[b] = ((s.clock[b] as i64 + e).rem_euclid(m)) as u32;
        }
        for &(b, e) in shift {
            s.shift[b] = ((s.shift[b] as i64 + e).rem_euclid(m)) as u32;
        }
        s
    }

    /// Clock Wilson loop `prod C_b^(sign_b)` along a direct loop.
    pub fn wilson(lattice: &TorusLattice, lp: &Loop, modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        if lp.kind() != LoopKind::Direct {
            return Err(Error::WrongKind { expected: "direct" });
        }
        let ex: Vec<_> = lp.signed_bonds().map(|(b, s)| (b, s as i64)).collect();
        Ok(Self::with_exponents(modulus, lattice.num_bonds(), &ex, &[]))
    }

    /// Shift Wilson loop `prod S_b^(sign_b)` along a dual loop.
    pub fn dual_wilson(lattice: &TorusLattice, lp: &Loop, modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        if lp.kind() != LoopKind::Dual {
            return Err(Error::WrongKind { expected: "dual" });
        }
        let ex: Vec<_> = lp.signed_bonds().map(|(b, s)| (b, s as i64)).collect();
        Ok(Self::with_exponents(modulus, lattice.num_bonds(), &[], &ex))
    }

    /// Unitary plaquette `C_E C_S C_N^dag C_W^dag` (daggers on north and west).
    pub fn plaquette(lattice: &TorusLattice, x: usize, y: usize, modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        let ex: Vec<_> = lattice
            .plaquette_boundary(x, y)?
            .iter()
            .map(|&(b, s)| (b, s as i64))
            .collect();
        Ok(Self::with_exponents(modulus, lattice.num_bonds(), &ex, &[]))
    }

    /// Unitary star: `S` on outgoing bonds, `S^dag` on incoming (west and south).
    pub fn star(lattice: &TorusLattice, x: usize, y: usize, modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        let ex: Vec<_> = lattice
            .star_coboundary(x, y)?
            .iter()
            .map(|&(b, s)| (b, s as i64))
            .collect();
        Ok(Self::with_exponents(modulus, lattice.num_bonds(), &[], &ex))
    }

    /// Qubit string from `i^k X^x Z^z`, reordered as `Z^z X^x`.
    pub fn from_pauli(p: &PauliString) -> Self {
        let n = p.num_qubits();
        let mut clock = vec![0; n];
        let mut shift = vec![0; n];
        let mut flips = 0u32;
        for q in 0..n {
            let (x, z) = p.get(q);
            clock[q] = z as u32;
            shift[q] = x as u32;
            flips += (x && z) as u32;
        }
        let k = (p.phase() as u32 + 2 * flips) % 4;
        let phase = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ][k as usize];
        Self {
            modulus: 2,
            clock,
            shift,
            phase,
        }
    }
}

fn dual_row(lattice: &TorusLattice, modulus: u32) -> Result<ClockShiftString> {
    ClockShiftString::dual_wilson(lattice, &lattice.row_dual_loop(0)?, modulus)
}

fn dual_column(lattice: &TorusLattice, modulus: u32) -> Result<ClockShiftString> {
    ClockShiftString::dual_wilson(lattice, &lattice.column_dual_loop(0)?, modulus)
}

/// Zero-flux ground state: every star projector applied to `|C_b = 1>`.
fn zero_flux(lattice: &TorusLattice, modulus: u32) -> Result<DenseState> {
    let mut s = DenseState::zero(modulus, lattice.num_bonds())?;
    for y in 0..lattice.ly() {
        for x in 0..lattice.lx() {
            s.apply_eigenprojector(&ClockShiftString::star(lattice, x, y, modulus)?)?;
        }
    }
    if s.norm_sqr() < 1e-12 {
        return Err(Error::ZeroProjection(
            "star projectors annihilated the clock product state".into(),
        ));
    }
    s.normalize()?;
    Ok(s)
}

/// Ground state `|jk> = V_y^j V_x^k |00>`, labelled by `W_x = w^j`, `W_y = w^k`.
pub fn prepare_ground_state(
    lattice: &TorusLattice,
    modulus: u32,
    j: u32,
    k: u32,
) -> Result<DenseState> {
    let mut s = zero_flux(lattice, modulus)?;
    let vy = dual_column(lattice, modulus)?;
    let vx = dual_row(lattice, modulus)?;
    for _ in 0..(j % modulus) {
        s.apply(&vy)?;
    }
    for _ in 0..(k % modulus) {
        s.apply(&vx)?;
    }
    Ok(s)
}

/// Topological cat state `M^(-1/2) sum_k |0k>` for the vertical game.
pub fn prepare_cat_dense(lattice: &TorusLattice, modulus: u32) -> Result<DenseState> {
    prepare_cat_dense_for(lattice, modulus, GameDirection::Vertical)
}

/// Cat state for either game direction: `sum_k |0k>` (vertical teams) or
/// `sum_j |j0>` (horizontal teams), normalised.
pub fn prepare_cat_dense_for(
    lattice: &TorusLattice,
    modulus: u32,
    direction: GameDirection,
) -> Result<DenseState> {
    let v = match direction {
        GameDirection::Vertical => dual_row(lattice, modulus)?,
        GameDirection::Horizontal => dual_column(lattice, modulus)?,
    };
    let mut cur = zero_flux(lattice, modulus)?;
    let mut acc = cur.clone();
    for _ in 1..modulus {
        cur.apply(&v)?;
        acc.add_scaled(&cur, Complex64::new(1.0, 0.0))?;
    }
    acc.normalize()?;
    Ok(acc)
}

/// `(1/M) sum_{j,k} |jk>`: the shared state for simultaneous play in both
/// directions.
pub fn prepare_full_cat(lattice: &TorusLattice, modulus: u32) -> Result<DenseState> {
    let vx = dual_row(lattice, modulus)?;
    let vy = dual_column(lattice, modulus)?;
    let mut row = zero_flux(lattice, modulus)?;
    let mut acc = DenseState {
        modulus,
        sites: row.sites,
        amps: vec![Complex64::new(0.0, 0.0); row.len()],
    };
    for _ in 0..modulus {
        let mut cur = row.clone();
        for _ in 0..modulus {
            acc.add_scaled(&cur, Complex64::new(1.0, 0.0))?;
            cur.apply(&vx)?;
        }
        row.apply(&vy)?;
    }
    acc.normalize()?;
    Ok(acc)
}

/// Fractional Wilson loop `W^(sign a / M)` on the eigenspace branch: basis
/// state `sigma` picks up `exp(sign 2 pi i a w / M^2)` with
/// `w = sum_b s_b sigma_b mod M` in `0..M`.
pub fn apply_wilson_root(
    state: &mut DenseState,
    team_loop: &Loop,
    a: u32,
    sign: i32,
) -> Result<()> {
    if team_loop.kind() != LoopKind::Direct {
        return Err(Error::WrongKind { expected: "direct" });
    }
    let m = state.modulus;
    if a >= m {
        return Err(Error::InvalidConfiguration(format!(
            "team input {a} outside Z_{m}"
        )));
    }
    if a == 0 {
        return Ok(());
    }
    let mut terms = Vec::with_capacity(team_loop.len());
    for (b, s) in team_loop.signed_bonds() {
        if b >= state.sites {
            return Err(Error::DimensionMismatch(format!(
                "loop bond {b} outside state with {} sites",
                state.sites
            )));
        }
        terms.push((b, s as i64));
    }
    let mm = (m as f64) * (m as f64);
    let phases: Vec<Complex64> = (0..m)
        .map(|w| Complex64::from_polar(1.0, sign as f64 * 2.0 * PI * (a * w) as f64 / mm))
        .collect();
    if m == 2 {
        let mask = terms.iter().fold(0usize, |acc, &(b, _)| acc | (1 << b));
        for (idx, amp) in state.amps.iter_mut().enumerate() {
            *amp *= phases[((idx & mask).count_ones() % 2) as usize];
        }
        return Ok(());
    }
    state.apply_diagonal(|d| {
        let w: i64 = terms.iter().map(|&(b, s)| s * d[b] as i64).sum();
        phases[w.rem_euclid(m as i64) as usize]
    });
    Ok(())
}

/// Joint distribution of the signed shift-basis sums over several disjoint
/// dual loops. Entry `r_0 + M r_1 + ...` is the probability that loop `i`
/// reports `r_i`.
pub fn loop_sums_distribution(state: &DenseState, loops: &[&Loop]) -> Result<Vec<f64>> {
    let m = state.modulus as usize;
    let mut sites = Vec::new();
    for lp in loops {
        if lp.kind() != LoopKind::Dual {
            return Err(Error::WrongKind { expected: "dual" });
        }
        for &b in lp.bonds() {
            if sites.contains(&b) {
                return Err(Error::InvalidConfiguration(format!(
                    "bond {b} appears in more than one measured loop"
                )));
            }
            sites.push(b);
        }
    }
    let mut t = state.clone();
    t.to_shift_basis(&sites)?;
    let signed: Vec<Vec<(usize, i64)>> = loops
        .iter()
        .map(|lp| lp.signed_bonds().map(|(b, s)| (b, s as i64)).collect())
        .collect();
    let mut out = vec![0.0; m.pow(loops.len() as u32)];
    if m == 2 {
        let masks: Vec<usize> = loops
            .iter()
            .map(|lp| lp.bonds().iter().fold(0, |acc, &b| acc | (1 << b)))
            .collect();
        for (idx, a) in t.amps.iter().enumerate() {
            let key = masks
                .iter()
                .rev()
                .fold(0usize, |k, mask| 2 * k + ((idx & mask).count_ones() % 2) as usize);
            out[key] += a.norm_sqr();
        }
        return Ok(out);
    }
    t.for_each_digits(|idx, d| {
        let mut key = 0usize;
        for terms in signed.iter().rev() {
            let r: i64 = terms.iter().map(|&(b, s)| s * d[b] as i64).sum();
            key = key * m + r.rem_euclid(m as i64) as usize;
        }
        out[key] += t.amps[idx].norm_sqr();
    });
    Ok(out)
}

/// Exact distribution of `r' = sum_b y_b mod M` for shift-basis measurements
/// on a dual loop. Players on bonds crossed with negative orientation report
/// `-y_b`.
pub fn dual_outcome_distribution(state: &DenseState, dual_loop: &Loop) -> Result<Vec<f64>> {
    loop_sums_distribution(state, &[dual_loop])
}

/// Samples one full outcome vector for the dual-loop players, in the loop's
/// bond order, already sign-adjusted as reported values.
pub fn sample_dual_outcomes<R: Rng + ?Sized>(
    state: &DenseState,
    dual_loop: &Loop,
    rng: &mut R,
) -> Result<Vec<u32>> {
    Ok(sample_loop_outcomes(state, &[dual_loop], rng)?.remove(0))
}

/// Joint sample of the reported outcomes on several disjoint dual loops.
pub fn sample_loop_outcomes<R: Rng + ?Sized>(
    state: &DenseState,
    loops: &[&Loop],
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    let sites: Vec<usize> = loops.iter().flat_map(|lp| lp.bonds().iter().copied()).collect();
    let joint = joint_outcome_distribution(state, &sites)?;
    let m = state.modulus as usize;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut pick = joint.len() - 1;
    for (i, p) in joint.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = i;
            break;
        }
    }
    let mut rest = pick;
    Ok(loops
        .iter()
        .map(|lp| {
            lp.signed_bonds()
                .map(|(_, s)| {
                    let y = (rest % m) as i64;
                    rest /= m;
                    (s as i64 * y).rem_euclid(m as i64) as u32
                })
                .collect()
        })
        .collect())
}

/// Joint shift-basis outcome distribution over `sites`; entry
/// `y_0 + M y_1 + ...` follows the order of `sites`.
pub fn joint_outcome_distribution(state: &DenseState, sites: &[usize]) -> Result<Vec<f64>> {
    let m = state.modulus as usize;
    for (i, b) in sites.iter().enumerate() {
        if sites[..i].contains(b) {
            return Err(Error::InvalidConfiguration(format!(
                "bond {b} measured twice"
            )));
        }
    }
    let size = DenseState::dimension(state.modulus, sites.len(), 1 << 24)?;
    let mut t = state.clone();
    t.to_shift_basis(sites)?;
    let mut out = vec![0.0; size];
    if m == 2 {
        for (idx, a) in t.amps.iter().enumerate() {
            let key = sites
                .iter()
                .rev()
                .fold(0usize, |k, &b| 2 * k + ((idx >> b) & 1));
            out[key] += a.norm_sqr();
        }
        return Ok(out);
    }
    t.for_each_digits(|idx, d| {
        let key = sites.iter().rev().fold(0usize, |k, &b| k * m + d[b] as usize);
        out[key] += t.amps[idx].norm_sqr();
    });
    Ok(out)
}

/// Fidelities with `phi+-(sigma) = (1 +- V)|sigma> / sqrt 2` for a qubit
/// dual loop `V`.
pub fn cat_fidelities(state: &DenseState, dual_loop: &Loop, sigma: usize) -> Result<(f64, f64)> {
    if state.modulus != 2 {
        return Err(Error::Unsupported("cat fidelities are defined for qubits".into()));
    }
    if sigma >= state.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis index {sigma} >= {}",
            state.len()
        )));
    }
    let flip = dual_loop.bonds().iter().fold(0usize, |m, &b| m | (1 << b));
    let c = state.amps[sigma];
    let cv = state.amps[sigma ^ flip];
    Ok((0.5 * (c + cv).norm_sqr(), 0.5 * (c - cv).norm_sqr()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat(lx: usize, ly: usize) -> TorusLattice {
        TorusLattice::new(lx, ly).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Explicit M x M matrix of a single-site string, by columns.
    fn single_site_matrix(op: &ClockShiftString) -> Vec<Vec<Complex64>> {
        let m = op.modulus();
        (0..m)
            .map(|k| {
                let mut s = DenseState::basis(m, &[k]).unwrap();
                s.apply(op).unwrap();
                s.amplitudes().to_vec()
            })
            .collect()
    }

    fn matmul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        // Column-major: (AB)[:,k] = A * b[:,k].
        let n = a.len();
        b.iter()
            .map(|col| {
                (0..n)
                    .map(|r| (0..n).map(|j| a[j][r] * col[j]).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn clock_shift_relation_against_matrices() {
        for m in 2..=5u32 {
            let cl = ClockShiftString::new(m, vec![1], vec![0], c(1.0, 0.0)).unwrap();
            let sh = ClockShiftString::new(m, vec![0], vec![1], c(1.0, 0.0)).unwrap();
            let cm = single_site_matrix(&cl);
            let sm = single_site_matrix(&sh);
            // Explicit clock: diag(w^k); shift: S|k> = |k+1>.
            for k in 0..m as usize {
                for r in 0..m as usize {
                    let want_c = if r == k { omega(m, k as i64) } else { c(0.0, 0.0) };
                    let want_s = if r == (k + 1) % m as usize { c(1.0, 0.0) } else { c(0.0, 0.0) };
                    assert!((cm[k][r] - want_c).norm() < 1e-12);
                    assert!((sm[k][r] - want_s).norm() < 1e-12);
                }
            }
            let cs = matmul(&cm, &sm);
            let sc = matmul(&sm, &cm);
            let w = omega(m, 1);
            for k in 0..m as usize {
                for r in 0..m as usize {
                    assert!((cs[k][r] - w * sc[k][r]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pauli_conversion_matches_matrices() {
        // Y = iXZ: Y|0> = i|1>, Y|1> = -i|0>.
        let y = PauliString::from_text("+Y").unwrap();
        let mut s0 = DenseState::basis(2, &[0]).unwrap();
        s0.apply_pauli(&y).unwrap();
        assert!((s0.amplitudes()[1] - c(0.0, 1.0)).norm() < 1e-12);
        let mut s1 = DenseState::basis(2, &[1]).unwrap();
        s1.apply_pauli(&y).unwrap();
        assert!((s1.amplitudes()[0] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn unitary_strings_preserve_norm_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [2u32, 3, 4] {
            let sites = if m == 4 { 4 } else { 5 };
            let a = DenseState::random(m, sites, &mut rng).unwrap();
            let b = DenseState::random(m, sites, &mut rng).unwrap();
            let clock: Vec<u32> = (0..sites).map(|_| rng.gen_range(0..m)).collect();
            let shift: Vec<u32> = (0..sites).map(|_| rng.gen_range(0..m)).collect();
            let op = ClockShiftString::new(m, clock, shift, omega(m, 1)).unwrap();
            let oa = a.applied(&op).unwrap();
            assert!((oa.norm_sqr() - 1.0).abs() < 1e-12);
            let alpha = c(0.3, -0.7);
            let mut sum = a.clone();
            sum.add_scaled(&b, alpha).unwrap();
            let lhs = sum.applied(&op).unwrap();
            let mut rhs = oa.clone();
            rhs.add_scaled(&b.applied(&op).unwrap(), alpha).unwrap();
            assert!(lhs.distance(&rhs).unwrap() < 1e-12);
        }
    }

    fn lattice_operators(l: &TorusLattice, m: u32) -> Vec<ClockShiftString> {
        let mut ops = Vec::new();
        for y in 0..l.ly() {
            for x in 0..l.lx() {
                ops.push(ClockShiftString::plaquette(l, x, y, m).unwrap());
                ops.push(ClockShiftString::star(l, x, y, m).unwrap());
            }
        }
        for x in 0..l.lx() {
            let col = l.column_loop(x).unwrap();
            ops.push(ClockShiftString::wilson(l, &col, m).unwrap());
            let bent = col
                .symmetric_difference(l, l.plaquette_bonds(x, 0).unwrap())
                .unwrap();
            ops.push(ClockShiftString::wilson(l, &bent, m).unwrap());
        }
        for y in 0..l.ly() {
            let row = l.row_dual_loop(y).unwrap();
            ops.push(ClockShiftString::dual_wilson(l, &row, m).unwrap());
            let bent = row
                .symmetric_difference(l, l.star_bonds(1, y).unwrap())
                .unwrap();
            ops.push(ClockShiftString::dual_wilson(l, &bent, m).unwrap());
        }
        ops
    }

    #[test]
    fn stabilizers_commute_with_each_other_and_logicals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, l) in [(2u32, lat(3, 2)), (3, lat(2, 2))] {
            let ops = lattice_operators(&l, m);
            let psi = DenseState::random(m, l.num_bonds(), &mut rng).unwrap();
            // Stabilizers (first 2 * cells) against everything; straight and
            // bent loops of the same kind against each other.
            let cells = l.num_plaquettes();
            for (i, a) in ops.iter().enumerate() {
                for (j, b) in ops.iter().enumerate() {
                    let both_logical = i >= 2 * cells && j >= 2 * cells;
                    let mixed_logical =
                        both_logical && (a.clock().iter().any(|&e| e != 0)) != (b.clock().iter().any(|&e| e != 0));
                    if mixed_logical {
                        continue;
                    }
                    let ab = psi.applied(b).unwrap().applied(a).unwrap();
                    let ba = psi.applied(a).unwrap().applied(b).unwrap();
                    assert!(ab.distance(&ba).unwrap() < 1e-12, "ops {i} {j} (M={m})");
                }
            }
        }
    }

    #[test]
    fn qubit_ground_states() {
        let l = lat(3, 2);
        let wx = ClockShiftString::wilson(&l, &l.row_loop(0).unwrap(), 2).unwrap();
        let wy = ClockShiftString::wilson(&l, &l.column_loop(0).unwrap(), 2).unwrap();
        let mut states = Vec::new();
        for j in 0..2 {
            for k in 0..2 {
                let s = prepare_ground_state(&l, 2, j, k).unwrap();
                assert!((s.norm_sqr() - 1.0).abs() < NORM_TOL);
                for y in 0..2 {
                    for x in 0..3 {
                        let ap = ClockShiftString::plaquette(&l, x, y, 2).unwrap();
                        let bs = ClockShiftString::star(&l, x, y, 2).unwrap();
                        assert!((s.expectation(&ap).unwrap() - 1.0).norm() < NORM_TOL);
                        assert!((s.expectation(&bs).unwrap() - 1.0).norm() < NORM_TOL);
                    }
                }
                let sj = if j == 0 { 1.0 } else { -1.0 };
                let sk = if k == 0 { 1.0 } else { -1.0 };
                assert!((s.expectation(&wx).unwrap() - sj).norm() < NORM_TOL);
                assert!((s.expectation(&wy).unwrap() - sk).norm() < NORM_TOL);
                states.push(s);
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(states[a].inner(&states[b]).unwrap().norm() < NORM_TOL);
            }
        }
    }

    #[test]
    fn qutrit_ground_states() {
        let l = lat(2, 2);
        let wx = ClockShiftString::wilson(&l, &l.row_loop(0).unwrap(), 3).unwrap();
        let wy = ClockShiftString::wilson(&l, &l.column_loop(1).unwrap(), 3).unwrap();
        let mut states = Vec::new();
        for j in 0..3 {
            for k in 0..3 {
                let s = prepare_ground_state(&l, 3, j, k).unwrap();
                for y in 0..2 {
                    for x in 0..2 {
                        let up = ClockShiftString::plaquette(&l, x, y, 3).unwrap();
                        let us = ClockShiftString::star(&l, x, y, 3).unwrap();
                        assert!((s.expectation(&up).unwrap() - 1.0).norm() < NORM_TOL);
                        assert!((s.expectation(&us).unwrap() - 1.0).norm() < NORM_TOL);
                    }
                }
                assert!((s.expectation(&wx).unwrap() - omega(3, j as i64)).norm() < NORM_TOL);
                assert!((s.expectation(&wy).unwrap() - omega(3, k as i64)).norm() < NORM_TOL);
                states.push(s);
            }
        }
        for a in 0..9 {
            for b in a + 1..9 {
                assert!(states[a].inner(&states[b]).unwrap().norm() < NORM_TOL);
            }
        }
    }

    #[test]
    fn cat_states_are_dual_loop_eigenstates() {
        for (m, l) in [(2u32, lat(3, 2)), (3, lat(2, 2))] {
            let cat = prepare_cat_dense(&l, m).unwrap();
            for y in 0..l.ly() {
                let v = ClockShiftString::dual_wilson(&l, &l.row_dual_loop(y).unwrap(), m).unwrap();
                assert!((cat.applied(&v).unwrap().inner(&cat).unwrap() - 1.0).norm() < NORM_TOL);
            }
        }
        let l = lat(3, 2);
        let cat = prepare_cat_dense(&l, 2).unwrap();
        let mut want = prepare_ground_state(&l, 2, 0, 0).unwrap();
        want.add_scaled(&prepare_ground_state(&l, 2, 0, 1).unwrap(), c(1.0, 0.0))
            .unwrap();
        want.normalize().unwrap();
        assert!((cat.fidelity(&want).unwrap() - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn wilson_root_phases() {
        let l = lat(3, 2);
        let cat = prepare_cat_dense(&l, 2).unwrap();
        let mut s = cat.clone();
        apply_wilson_root(&mut s, &l.column_loop(0).unwrap(), 0, 1).unwrap();
        assert_eq!(s, cat);
        apply_wilson_root(&mut s, &l.column_loop(0).unwrap(), 1, 1).unwrap();
        apply_wilson_root(&mut s, &l.column_loop(1).unwrap(), 1, 1).unwrap();
        let mut want = prepare_ground_state(&l, 2, 0, 0).unwrap();
        want.add_scaled(&prepare_ground_state(&l, 2, 0, 1).unwrap(), c(-1.0, 0.0))
            .unwrap();
        want.scale(c(1.0 / 2f64.sqrt(), 0.0));
        assert!(s.distance(&want).unwrap() < NORM_TOL);

        assert!(matches!(
            apply_wilson_root(&mut s, &l.row_dual_loop(0).unwrap(), 1, 1),
            Err(Error::WrongKind { .. })
        ));
    }

    #[test]
    fn qutrit_roots_produce_shift_eigenstate() {
        let l = lat(2, 2);
        let mut s = prepare_cat_dense(&l, 3).unwrap();
        // Two columns on a 2x2 torus; teams (1, 2) with sum 3 give r = 1.
        apply_wilson_root(&mut s, &l.column_loop(0).unwrap(), 1, -1).unwrap();
        apply_wilson_root(&mut s, &l.column_loop(1).unwrap(), 2, -1).unwrap();
        let v = ClockShiftString::dual_wilson(&l, &l.row_dual_loop(0).unwrap(), 3).unwrap();
        let ev = s.applied(&v).unwrap().inner(&s).unwrap();
        // <s|V|s> = w^1.
        assert!((ev.conj() - omega(3, 1)).norm() < NORM_TOL);
    }

    #[test]
    fn qutrit_three_teams_on_three_columns() {
        let l = lat(3, 2);
        let mut s = prepare_cat_dense(&l, 3).unwrap();
        for x in 0..3 {
            apply_wilson_root(&mut s, &l.column_loop(x).unwrap(), 1, -1).unwrap();
        }
        let v = ClockShiftString::dual_wilson(&l, &l.row_dual_loop(1).unwrap(), 3).unwrap();
        let ev = s.applied(&v).unwrap().inner(&s).unwrap();
        assert!((ev.conj() - omega(3, 1)).norm() < NORM_TOL);
        let d = dual_outcome_distribution(&s, &l.row_dual_loop(0).unwrap()).unwrap();
        assert!((d[1] - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn outcome_distributions() {
        let l = lat(3, 2);
        let dual = l.row_dual_loop(0).unwrap();
        let cat = prepare_cat_dense(&l, 2).unwrap();
        let d = dual_outcome_distribution(&cat, &dual).unwrap();
        assert!((d[0] - 1.0).abs() < NORM_TOL);

        let plus = DenseState::uniform(2, 12).unwrap();
        let d = dual_outcome_distribution(&plus, &dual).unwrap();
        assert!((d[0] - 1.0).abs() < NORM_TOL);

        let zero = DenseState::zero(2, 12).unwrap();
        let d = dual_outcome_distribution(&zero, &dual).unwrap();
        assert!((d[0] - 0.5).abs() < NORM_TOL && (d[1] - 0.5).abs() < NORM_TOL);

        let l3 = lat(2, 2);
        let cat3 = prepare_cat_dense(&l3, 3).unwrap();
        let d = dual_outcome_distribution(&cat3, &l3.row_dual_loop(1).unwrap()).unwrap();
        assert!((d[0] - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn sampled_outcomes_follow_joint_law() {
        let l = lat(3, 2);
        let dual = l.row_dual_loop(1).unwrap();
        let cat = prepare_cat_dense(&l, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let y = sample_dual_outcomes(&cat, &dual, &mut rng).unwrap();
            assert_eq!(y.iter().sum::<u32>() % 2, 0);
        }
    }

    #[test]
    fn cat_fidelity_cases() {
        let l = lat(3, 2);
        let dual = l.row_dual_loop(0).unwrap();
        let sigma = 0b000_000_101_001usize;
        let basis = DenseState::basis_index(2, 12, sigma).unwrap();
        let (fp, fm) = cat_fidelities(&basis, &dual, sigma).unwrap();
        assert!((fp - 0.5).abs() < 1e-12 && (fm - 0.5).abs() < 1e-12);

        let flip: usize = dual.bonds().iter().map(|b| 1 << b).sum();
        let mut phi = DenseState::basis_index(2, 12, sigma).unwrap();
        phi.amplitudes_mut()[sigma] = c(1.0 / 2f64.sqrt(), 0.0);
        phi.amplitudes_mut()[sigma ^ flip] = c(1.0 / 2f64.sqrt(), 0.0);
        let (fp, fm) = cat_fidelities(&phi, &dual, sigma).unwrap();
        assert!((fp - 1.0).abs() < 1e-12 && fm.abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = DenseState::random(2, 12, &mut rng).unwrap();
        for s in 0..64 {
            let (fp, fm) = cat_fidelities(&r, &dual, s).unwrap();
            assert!(fp + fm <= 1.0 + 1e-12);
        }
        assert!(cat_fidelities(&r, &dual, 1 << 12).is_err());
    }

    #[test]
    fn budget_and_dump() {
        assert!(matches!(
            DenseState::zero_with_budget(2, 20, 1 << 10),
            Err(Error::MemoryBudget { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = DenseState::random(3, 3, &mut rng).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[0..4], &3u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(DenseState::from_bytes(&bytes).unwrap(), s);
        assert!(DenseState::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn expectation_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DenseState::random(3, 4, &mut rng).unwrap();
        let id = ClockShiftString::identity(3, 4);
        assert!((s.expectation(&id).unwrap() - 1.0).norm() < 1e-12);
        assert!((s.inner(&s).unwrap() - 1.0).norm() < 1e-12);
        let other = DenseState::zero(2, 4).unwrap();
        assert!(s.inner(&other).is_err());
    }
}
