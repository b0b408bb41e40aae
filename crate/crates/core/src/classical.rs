//! Deterministic classical strategies and the exhaustive optimum.
//!
//! Mixed strategies are convex combinations of deterministic ones, so their
//! average payoff never exceeds the deterministic optimum computed here.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{promised_inputs, referee_target};

/// Default cap on `strategies x inputs` evaluated by [`optimal_classical`].
pub const DEFAULT_SEARCH_BUDGET: u128 = 1_000_000_000;

/// Player `t_i` answers `tables[i][a_i]`; the remaining dual-loop players
/// answer `constants`, in the dual loop's bond order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassicalStrategy {
    modulus: u32,
    tables: Vec<Vec<u32>>,
    constants: Vec<u32>,
}

impl ClassicalStrategy {
    pub fn new(modulus: u32, tables: Vec<Vec<u32>>, constants: Vec<u32>) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        for (i, t) in tables.iter().enumerate() {
            if t.len() != modulus as usize {
                return Err(Error::ShapeMismatch(format!(
                    "table {i} has {} entries, expected {modulus}",
                    t.len()
                )));
            }
        }
        if tables.iter().flatten().chain(&constants).any(|&v| v >= modulus) {
            return Err(Error::ShapeMismatch(format!("entries must lie in Z_{modulus}")));
        }
        Ok(Self {
            modulus,
            tables,
            constants,
        })
    }

    /// Everyone answers 0.
    pub fn zero(teams: usize, modulus: u32, dual_loop_size: usize) -> Result<Self> {
        if dual_loop_size < teams {
            return Err(Error::ShapeMismatch(format!(
                "dual loop of {dual_loop_size} bonds cannot host {teams} intersections"
            )));
        }
        Self::new(
            modulus,
            vec![vec![0; modulus as usize]; teams],
            vec![0; dual_loop_size - teams],
        )
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn tables(&self) -> &[Vec<u32>] {
        &self.tables
    }

    pub fn constants(&self) -> &[u32] {
        &self.constants
    }

    pub fn num_teams(&self) -> usize {
        self.tables.len()
    }

    pub fn dual_loop_size(&self) -> usize {
        self.tables.len() + self.constants.len()
    }

    pub fn respond(&self, team: usize, input: u32) -> u32 {
        self.tables[team][(input % self.modulus) as usize]
    }

    pub fn check_shape(&self, teams: usize, dual_loop_size: usize, modulus: u32) -> Result<()> {
        if self.modulus != modulus || self.num_teams() != teams || self.dual_loop_size() != dual_loop_size {
            return Err(Error::ShapeMismatch(format!(
                "strategy for (T={}, |dual|={}, M={}) used with (T={teams}, |dual|={dual_loop_size}, M={modulus})",
                self.num_teams(),
                self.dual_loop_size(),
                self.modulus
            )));
        }
        Ok(())
    }

    /// Exact success probability under the uniform promised-input law.
    pub fn win_probability(&self) -> Result<Ratio<i64>> {
        let inputs = promised_inputs(self.num_teams(), self.modulus)?;
        let offset: u32 = self.constants.iter().sum::<u32>() % self.modulus;
        let mut wins = 0i64;
        for a in &inputs {
            let s: u32 = a
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| self.respond(i, v))
                .sum::<u32>()
                + offset;
            if s % self.modulus == referee_target(a, self.modulus)? {
                wins += 1;
            }
        }
        Ok(Ratio::new(wins, inputs.len() as i64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalOptimum {
    pub probability: Ratio<i64>,
    pub strategy: ClassicalStrategy,
    /// Number of `(strategy, input)` evaluations performed.
    pub work: u128,
}

/// `1/2 + 2^(-ceil(T/2))`, the optimal classical value of the qubit game.
pub fn closed_form_classical(teams: usize) -> Result<Ratio<i64>> {
    if !(2..=120).contains(&teams) {
        return Err(Error::InvalidConfiguration(format!(
            "closed form needs 2 <= T <= 120, got {teams}"
        )));
    }
    Ok(Ratio::new(1, 2) + Ratio::new(1, 1i64 << teams.div_ceil(2)))
}

pub fn optimal_classical(teams: usize, modulus: u32, dual_loop_size: usize) -> Result<ClassicalOptimum> {
    optimal_classical_with_budget(teams, modulus, dual_loop_size, DEFAULT_SEARCH_BUDGET)
}

fn search_work(teams: usize, modulus: u32, offsets: u32) -> u128 {
    let m = modulus as u128;
    let mut w = offsets as u128;
    for _ in 0..(modulus as usize * teams + teams - 1) {
        w = w.saturating_mul(m);
    }
    w
}

/// Exhaustive search over all response tables and, when the dual loop has
/// bonds off the team loops, their aggregate constant offset. The witness
/// is the lexicographically first maximizer over `(tables..., offset)`.
pub fn optimal_classical_with_budget(
    teams: usize,
    modulus: u32,
    dual_loop_size: usize,
    budget: u128,
) -> Result<ClassicalOptimum> {
    if modulus < 2 {
        return Err(Error::InvalidModulus(modulus));
    }
    if teams < 2 {
        return Err(Error::InvalidConfiguration(format!("need at least 2 teams, got {teams}")));
    }
    if dual_loop_size < teams {
        return Err(Error::ShapeMismatch(format!(
            "dual loop of {dual_loop_size} bonds cannot host {teams} intersections"
        )));
    }
    let offsets = if dual_loop_size > teams { modulus } else { 1 };
    let work = search_work(teams, modulus, offsets);
    if work > budget {
        return Err(Error::SearchBudget { work, budget });
    }

    let m = modulus as usize;
    let inputs = promised_inputs(teams, modulus)?;
    let cases: Vec<(Vec<usize>, u32)> = inputs
        .iter()
        .map(|a| {
            let idx = a.values().iter().map(|&v| v as usize).collect();
            (idx, referee_target(a, modulus).expect("promised"))
        })
        .collect();
    let table_count = m.pow(m as u32);

    // Partition by the first table; each part scans the rest in order.
    let scan = |first: usize| -> (usize, Vec<u32>) {
        let mut digits = vec![0u32; m * teams + 1];
        write_table(&mut digits[..m], first, modulus);
        let free = m * (teams - 1);
        let mut best = (0usize, Vec::new());
        loop {
            for c in 0..offsets {
                digits[m * teams] = c;
                let wins = cases
                    .iter()
                    .filter(|(a, r)| {
                        let s: u32 = a.iter().enumerate().map(|(i, &v)| digits[i * m + v]).sum::<u32>() + c;
                        s % modulus == *r
                    })
                    .count();
                if wins > best.0 || best.1.is_empty() {
                    best = (wins, digits.clone());
                }
            }
            // Odometer over tables 1.., most significant digit first.
            let mut pos = m + free;
            loop {
                if pos == m {
                    return best;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] == modulus {
                    digits[pos] = 0;
                } else {
                    break;
                }
            }
        }
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<(usize, Vec<u32>)> = {
        use rayon::prelude::*;
        (0..table_count).into_par_iter().map(scan).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(usize, Vec<u32>)> = (0..table_count).map(scan).collect();

    // Parts are in lexicographic order of the first table: keep the first
    // strict maximum.
    let mut best = parts[0].clone();
    for p in parts.into_iter().skip(1) {
        if p.0 > best.0 {
            best = p;
        }
    }
    let (wins, digits) = best;
    let tables = (0..teams).map(|i| digits[i * m..(i + 1) * m].to_vec()).collect();
    let mut constants = vec![0; dual_loop_size - teams];
    if let Some(first) = constants.first_mut() {
        *first = digits[m * teams];
    }
    Ok(ClassicalOptimum {
        probability: Ratio::new(wins as i64, cases.len() as i64),
        strategy: ClassicalStrategy::new(modulus, tables, constants)?,
        work,
    })
}

/// Table number `code` in lexicographic order, first entry most significant.
fn write_table(out: &mut [u32], mut code: usize, modulus: u32) {
    for slot in out.iter_mut().rev() {
        *slot = (code % modulus as usize) as u32;
        code /= modulus as usize;
    }
}
