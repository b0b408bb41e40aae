//! Closed-form quantum win probability, instance projectors and the
//! numerical uniqueness certificate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FamilyDescription, GameInstance, InstanceFamily, TorusLattice};
use crate::statevector::{cat_fidelities, prepare_ground_state, DenseState};

fn require_qubits(state: &DenseState, what: &str) -> Result<()> {
    if state.modulus() != 2 {
        return Err(Error::Unsupported(format!("{what} is defined for M = 2 only")));
    }
    Ok(())
}

fn bond_mask(bonds: &[usize]) -> usize {
    bonds.iter().fold(0, |m, &b| m | (1 << b))
}

fn check_instance(state: &DenseState, instance: &GameInstance) -> Result<()> {
    if instance.modulus() != 2 {
        return Err(Error::Unsupported("instance modulus must be 2".into()));
    }
    if state.sites() != instance.lattice().num_bonds() {
        return Err(Error::DimensionMismatch(format!(
            "state on {} sites, lattice has {} bonds",
            state.sites(),
            instance.lattice().num_bonds()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma1Terms {
    pub probability: f64,
    /// Sum of `|<psi|phi+(sigma)>|^2` over the summation domain.
    pub sum_f_plus: f64,
    pub sum_f_minus: f64,
    /// Number of basis states in the domain.
    pub terms: usize,
}

/// Quantum win probability of the qubit game as a sum over cat-state
/// fidelities, `1/2 (1 + sum_sigma f+(sigma) - f-(sigma))` with `sigma`
/// ranging over basis states fixed by every team loop.
pub fn lemma1_terms(state: &DenseState, instance: &GameInstance) -> Result<Lemma1Terms> {
    require_qubits(state, "the fidelity formula")?;
    check_instance(state, instance)?;
    let masks: Vec<usize> = instance.teams().iter().map(|t| bond_mask(t.bonds())).collect();
    let (mut fp, mut fm, mut terms) = (0.0, 0.0, 0usize);
    for sigma in 0..state.len() {
        if masks.iter().all(|m| (sigma & m).count_ones() % 2 == 0) {
            let (p, m) = cat_fidelities(state, instance.dual_loop(), sigma)?;
            fp += p;
            fm += m;
            terms += 1;
        }
    }
    Ok(Lemma1Terms {
        probability: 0.5 * (1.0 + fp - fm),
        sum_f_plus: fp,
        sum_f_minus: fm,
        terms,
    })
}

pub fn lemma1_probability(state: &DenseState, instance: &GameInstance) -> Result<f64> {
    Ok(lemma1_terms(state, instance)?.probability)
}

/// `P = 1/2 (1 + V) (prod_j (1 + W_j)/2 + prod_j (1 - W_j)/2)` for a qubit
/// instance, stored as bit masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceProjector {
    teams: Vec<usize>,
    dual: usize,
    sites: usize,
}

impl InstanceProjector {
    pub fn new(instance: &GameInstance) -> Result<Self> {
        if instance.modulus() != 2 {
            return Err(Error::Unsupported("instance projectors need M = 2".into()));
        }
        let sites = instance.lattice().num_bonds();
        if sites >= usize::BITS as usize {
            return Err(Error::Unsupported(format!("{sites} bonds exceed the mask width")));
        }
        Ok(Self {
            teams: instance.teams().iter().map(|t| bond_mask(t.bonds())).collect(),
            dual: bond_mask(instance.dual_loop().bonds()),
            sites,
        })
    }

    /// Team parities all equal (all `W_j = +1` or all `W_j = -1`).
    fn keeps(&self, sigma: usize) -> bool {
        let mut parities = self.teams.iter().map(|m| (sigma & m).count_ones() % 2);
        let first = parities.next().unwrap_or(0);
        parities.all(|p| p == first)
    }

    pub fn apply(&self, state: &DenseState) -> Result<DenseState> {
        let mut out = state.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, state: &mut DenseState) -> Result<()> {
        require_qubits(state, "the instance projector")?;
        if state.sites() != self.sites {
            return Err(Error::DimensionMismatch(format!(
                "state on {} sites, projector on {}",
                state.sites(),
                self.sites
            )));
        }
        let amps = state.amplitudes_mut();
        for (sigma, a) in amps.iter_mut().enumerate() {
            if !self.keeps(sigma) {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        for sigma in 0..amps.len() {
            let partner = sigma ^ self.dual;
            if sigma < partner {
                let avg = 0.5 * (amps[sigma] + amps[partner]);
                amps[sigma] = avg;
                amps[partner] = avg;
            }
        }
        Ok(())
    }
}

pub fn apply_instance_projector(state: &DenseState, instance: &GameInstance) -> Result<DenseState> {
    InstanceProjector::new(instance)?.apply(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub probes: usize,
    /// Relative singular-value threshold for the rank decision.
    pub tol: f64,
    /// A probe has converged when one full cycle moves it by less than this.
    pub convergence: f64,
    pub max_cycles: usize,
    pub seed: u64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            probes: 12,
            tol: 1e-8,
            convergence: 1e-12,
            max_cycles: 5_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub family: FamilyDescription,
    pub instances: usize,
    pub options: CertificateOptions,
    pub cycles: usize,
    pub last_change: f64,
    /// Singular values of the probe matrix, descending.
    pub singular_values: Vec<f64>,
    pub dimension: usize,
    /// The rank equals the probe count, so the true dimension may be larger.
    pub saturated: bool,
    /// `max_k ||P_i c_k - c_k||` over instance projectors and cat states.
    pub cat_fixed_residual: f64,
    /// Largest distance of a cat state from the span of the basis.
    pub cat_in_span_residual: f64,
    /// Largest distance of a basis vector from the span of the cat states.
    pub basis_in_cat_span_residual: f64,
    #[serde(skip)]
    pub basis: Vec<DenseState>,
}

impl CertificateReport {
    pub fn max_residual(&self) -> f64 {
        self.cat_fixed_residual
            .max(self.cat_in_span_residual)
            .max(self.basis_in_cat_span_residual)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The two cat states `(|j0> + |j1>)/sqrt 2` of the vertical game.
pub fn vertical_cat_states(lattice: &TorusLattice) -> Result<Vec<DenseState>> {
    (0..2)
        .map(|j| {
            let mut s = prepare_ground_state(lattice, 2, j, 0)?;
            s.add_scaled(&prepare_ground_state(lattice, 2, j, 1)?, Complex64::new(1.0, 0.0))?;
            s.normalize()?;
            Ok(s)
        })
        .collect()
}

fn project_onto(basis: &[DenseState], v: &DenseState) -> Result<f64> {
    let mut r = v.clone();
    for b in basis {
        let c = b.inner(v)?;
        r.add_scaled(b, -c)?;
    }
    Ok(r.norm_sqr().sqrt())
}

/// Estimates the common fixed space of every instance projector in the
/// family by cycling the projectors over seeded random probes, then reads
/// off the numerical rank of the converged probes.
pub fn uniqueness_certificate(
    lattice: &TorusLattice,
    family: &InstanceFamily,
    options: &CertificateOptions,
) -> Result<CertificateReport> {
    if family.instances.is_empty() {
        return Err(Error::InvalidConfiguration("empty instance family".into()));
    }
    if options.probes == 0 {
        return Err(Error::InvalidConfiguration("need at least one probe".into()));
    }
    let projectors = family
        .instances
        .iter()
        .map(|i| {
            if i.lattice() != lattice {
                return Err(Error::InvalidConfiguration(
                    "family instance on a different lattice".into(),
                ));
            }
            InstanceProjector::new(i)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = lattice.num_bonds();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut probes = (0..options.probes)
        .map(|_| DenseState::random(2, n, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let cycle = |s: &mut DenseState| -> Result<f64> {
        let before = s.clone();
        for p in &projectors {
            p.apply_in_place(s)?;
        }
        let scale = before.norm_sqr().sqrt();
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(s.distance(&before)? / scale)
    };

    let mut cycles = 0;
    let mut last_change = f64::INFINITY;
    while last_change >= options.convergence {
        if cycles == options.max_cycles {
            return Err(Error::Inconclusive {
                cycles,
                last_change,
            });
        }
        #[cfg(feature = "parallel")]
        let changes: Vec<f64> = {
            use rayon::prelude::*;
            probes.par_iter_mut().map(cycle).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let changes: Vec<f64> = probes.iter_mut().map(cycle).collect::<Result<_>>()?;
        last_change = changes.into_iter().fold(0.0, f64::max);
        cycles += 1;
    }

    let k = probes.len();
    let len = probes[0].len();
    let stacked = DMatrix::from_fn(len, k, |row, col| probes[col].amplitudes()[row]);
    let svd = stacked.svd(true, false);
    let u = svd.u.as_ref().expect("left vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let dimension = if top == 0.0 {
        0
    } else {
        singular_values.iter().filter(|&&s| s > options.tol * top).count()
    };
    let basis = order[..dimension]
        .iter()
        .map(|&col| DenseState::from_amplitudes(2, n, u.column(col).iter().copied().collect()))
        .collect::<Result<Vec<_>>>()?;

    let cats = vertical_cat_states(lattice)?;
    let mut cat_fixed_residual: f64 = 0.0;
    for c in &cats {
        for p in &projectors {
            cat_fixed_residual = cat_fixed_residual.max(p.apply(c)?.distance(c)?);
        }
    }
    let mut cat_in_span_residual: f64 = 0.0;
    for c in &cats {
        cat_in_span_residual = cat_in_span_residual.max(project_onto(&basis, c)?);
    }
    let mut basis_in_cat_span_residual: f64 = 0.0;
    for b in &basis {
        basis_in_cat_span_residual = basis_in_cat_span_residual.max(project_onto(&cats, b)?);
    }

    Ok(CertificateReport {
        family: family.description.clone(),
        instances: family.instances.len(),
        options: *options,
        cycles,
        last_change,
        singular_values,
        dimension,
        saturated: dimension == k,
        cat_fixed_residual,
        cat_in_span_residual,
        basis_in_cat_span_residual,
        basis,
    })
}

/// Longest `z` accepted by [`parity_identity_check`].
pub const MAX_PARITY_LEN: usize = 24;

/// Both sides of
/// `sum_{y: sum y = r mod 2} prod z_j^(y_j) = 1/2 (prod (1 + z_j) + (-1)^r prod (1 - z_j))`.
pub fn parity_identity_check(z: &[Complex64], r: u32) -> Result<(Complex64, Complex64)> {
    if z.len() > MAX_PARITY_LEN {
        return Err(Error::InvalidConfiguration(format!(
            "{} factors exceed the direct-sum limit of {MAX_PARITY_LEN}",
            z.len()
        )));
    }
    let r = r % 2;
    let one = Complex64::new(1.0, 0.0);
    let mut lhs = Complex64::new(0.0, 0.0);
    for y in 0u32..(1 << z.len()) {
        if y.count_ones() % 2 == r {
            lhs += z
                .iter()
                .enumerate()
                .filter(|(j, _)| (y >> j) & 1 == 1)
                .fold(one, |acc, (_, &zj)| acc * zj);
        }
    }
    let plus: Complex64 = z.iter().fold(one, |acc, &zj| acc * (one + zj));
    let minus: Complex64 = z.iter().fold(one, |acc, &zj| acc * (one - zj));
    let sign = if r == 0 { 1.0 } else { -1.0 };
    Ok((lhs, 0.5 * (plus + sign * minus)))
}
