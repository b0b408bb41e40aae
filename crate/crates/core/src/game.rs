//! Referee, round play and win statistics.
//!
//! Inputs are uniform over the promised vectors (`sum a_i = 0 mod M`). The
//! referee's target is `r = (sum a_i) / M mod M`, and the dual-loop players
//! win when their outputs sum to `r` mod `M`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalStrategy;
use crate::error::{Error, Result};
use crate::lattice::{GameDirection, GameInstance};
use crate::stabilizer::{prepare_cat_tableau_for, Tableau};
use crate::statevector::{
    apply_wilson_root, dual_outcome_distribution, loop_sums_distribution, prepare_cat_dense_for,
    prepare_full_cat, sample_dual_outcomes, sample_loop_outcomes, DenseState,
};

/// Team inputs satisfying the promise.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputVector(Vec<u32>);

impl InputVector {
    pub fn new(values: Vec<u32>, modulus: u32) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        let sum: u64 = values.iter().map(|&v| v as u64).sum();
        if values.iter().any(|&v| v >= modulus) || sum % modulus as u64 != 0 {
            return Err(Error::PromiseViolated {
                input: values,
                modulus,
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform draw from the promised inputs: `T - 1` free values, the last fixed.
pub fn sample_promised_input<R: Rng + ?Sized>(
    teams: usize,
    modulus: u32,
    rng: &mut R,
) -> Result<InputVector> {
    if teams == 0 {
        return Err(Error::InvalidConfiguration("need at least one team".into()));
    }
    if modulus < 2 {
        return Err(Error::InvalidModulus(modulus));
    }
    let mut a: Vec<u32> = (0..teams - 1).map(|_| rng.gen_range(0..modulus)).collect();
    let s: u32 = a.iter().fold(0, |acc, &v| (acc + v) % modulus);
    a.push((modulus - s) % modulus);
    Ok(InputVector(a))
}

/// All `M^(T-1)` promised inputs in lexicographic order.
pub fn promised_inputs(teams: usize, modulus: u32) -> Result<Vec<InputVector>> {
    if teams == 0 {
        return Err(Error::InvalidConfiguration("need at least one team".into()));
    }
    if modulus < 2 {
        return Err(Error::InvalidModulus(modulus));
    }
    let count = (modulus as u64)
        .checked_pow(teams as u32 - 1)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| {
            Error::InvalidConfiguration(format!("too many promised inputs for T={teams}, M={modulus}"))
        })?;
    let mut out = Vec::with_capacity(count as usize);
    for code in 0..count {
        let mut a = vec![0u32; teams];
        let mut c = code;
        for slot in a[..teams - 1].iter_mut().rev() {
            *slot = (c % modulus as u64) as u32;
            c /= modulus as u64;
        }
        let s: u32 = a.iter().fold(0, |acc, &v| (acc + v) % modulus);
        a[teams - 1] = (modulus - s) % modulus;
        out.push(InputVector(a));
    }
    Ok(out)
}

pub fn referee_target(input: &InputVector, modulus: u32) -> Result<u32> {
    let sum: u64 = input.0.iter().map(|&v| v as u64).sum();
    if modulus < 2 || sum % modulus as u64 != 0 {
        return Err(Error::PromiseViolated {
            input: input.0.clone(),
            modulus,
        });
    }
    Ok(((sum / modulus as u64) % modulus as u64) as u32)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    pub input: Vec<u32>,
    /// One reported value per dual-loop bond, in bond-id order.
    pub outcomes: Vec<u32>,
    pub target: u32,
    pub won: bool,
}

impl RoundResult {
    pub fn new(input: &InputVector, outcomes: Vec<u32>, modulus: u32) -> Result<Self> {
        let target = referee_target(input, modulus)?;
        let sum: u64 = outcomes.iter().map(|&v| v as u64).sum();
        Ok(Self {
            input: input.0.clone(),
            won: sum % modulus as u64 == target as u64,
            outcomes,
            target,
        })
    }

    /// One line of the round log, without a trailing newline.
    pub fn log_line(&self, round: u64) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            round: u64,
            input: &'a [u32],
            outcomes: &'a [u32],
            target: u32,
            won: bool,
        }
        serde_json::to_string(&Line {
            round,
            input: &self.input,
            outcomes: &self.outcomes,
            target: self.target,
            won: self.won,
        })
        .expect("plain data serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputStats {
    pub input: Vec<u32>,
    pub rounds: u64,
    pub wins: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinStats {
    pub rounds: u64,
    pub wins: u64,
    pub win_rate: f64,
    /// Wilson score 95% interval for the win rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub exact_probability: Option<f64>,
    pub per_input: Vec<InputStats>,
}

impl WinStats {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a RoundResult>) -> Self {
        let mut per: BTreeMap<Vec<u32>, (u64, u64)> = BTreeMap::new();
        let (mut rounds, mut wins) = (0u64, 0u64);
        for r in results {
            rounds += 1;
            wins += r.won as u64;
            let e = per.entry(r.input.clone()).or_default();
            e.0 += 1;
            e.1 += r.won as u64;
        }
        let (wilson_low, wilson_high) = wilson_interval(wins, rounds);
        Self {
            rounds,
            wins,
            win_rate: if rounds == 0 { 0.0 } else { wins as f64 / rounds as f64 },
            wilson_low,
            wilson_high,
            exact_probability: None,
            per_input: per
                .into_iter()
                .map(|(input, (rounds, wins))| InputStats {
                    input,
                    rounds,
                    wins,
                })
                .collect(),
        }
    }

    pub fn losses(&self) -> u64 {
        self.rounds - self.wins
    }
}

/// Wilson score interval at 95% confidence; `(0, 1)` for no data.
pub fn wilson_interval(wins: u64, rounds: u64) -> (f64, f64) {
    if rounds == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = rounds as f64;
    let p = wins as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Exponent sign of the team operation: `W^(a/2)` for qubits, `W^(-a/M)` above.
pub fn root_sign(modulus: u32) -> i32 {
    if modulus == 2 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Tableau,
    Dense,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tableau" => Ok(Self::Tableau),
            "dense" => Ok(Self::Dense),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown backend {other:?} (expected tableau or dense)"
            ))),
        }
    }
}

/// Prepared shared state, cloned afresh for every round.
#[derive(Clone, Debug)]
pub enum QuantumBackend {
    Tableau(Tableau),
    Dense(DenseState),
}

impl QuantumBackend {
    /// The cat state matching the instance's direction.
    pub fn cat(instance: &GameInstance, kind: BackendKind) -> Result<Self> {
        let direction = instance.direction().ok_or_else(|| {
            Error::InvalidConfiguration("instance teams wind in no single direction".into())
        })?;
        match kind {
            BackendKind::Tableau => {
                if instance.modulus() != 2 {
                    return Err(Error::Unsupported(
                        "the tableau backend supports M = 2 only".into(),
                    ));
                }
                Ok(Self::Tableau(prepare_cat_tableau_for(instance.lattice(), direction, 1)?))
            }
            BackendKind::Dense => Ok(Self::Dense(prepare_cat_dense_for(
                instance.lattice(),
                instance.modulus(),
                direction,
            )?)),
        }
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Self::Tableau(_) => BackendKind::Tableau,
            Self::Dense(_) => BackendKind::Dense,
        }
    }

    fn check(&self, instance: &GameInstance) -> Result<()> {
        let n = instance.lattice().num_bonds();
        let (m, sites) = match self {
            Self::Tableau(t) => (2, t.num_qubits()),
            Self::Dense(d) => (d.modulus(), d.sites()),
        };
        if m != instance.modulus() || sites != n {
            return Err(Error::DimensionMismatch(format!(
                "backend on {sites} sites of dimension {m}, instance has {n} bonds with M = {}",
                instance.modulus()
            )));
        }
        Ok(())
    }
}

fn check_input(instance: &GameInstance, input: &InputVector) -> Result<()> {
    if input.len() != instance.num_teams() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs for {} teams",
            input.len(),
            instance.num_teams()
        )));
    }
    InputVector::new(input.0.clone(), instance.modulus()).map(|_| ())
}

/// One round of the quantum strategy: each team applies its root of the
/// Wilson loop, then every dual-loop player measures in the shift basis.
pub fn play_round_quantum<R: Rng + ?Sized>(
    instance: &GameInstance,
    backend: &QuantumBackend,
    input: &InputVector,
    rng: &mut R,
) -> Result<RoundResult> {
    backend.check(instance)?;
    check_input(instance, input)?;
    let m = instance.modulus();
    let outcomes = match backend {
        QuantumBackend::Tableau(t) => {
            let mut t = t.clone();
            for (team, &a) in instance.teams().iter().zip(input.values()) {
                t.apply_half_wilson(team, a)?;
            }
            instance
                .dual_loop()
                .bonds()
                .iter()
                .map(|&b| t.measure_x(b, rng).map(|r| r.bit() as u32))
                .collect::<Result<Vec<_>>>()?
        }
        QuantumBackend::Dense(d) => {
            let mut d = d.clone();
            for (team, &a) in instance.teams().iter().zip(input.values()) {
                apply_wilson_root(&mut d, team, a, root_sign(m))?;
            }
            sample_dual_outcomes(&d, instance.dual_loop(), rng)?
        }
    };
    RoundResult::new(input, outcomes, m)
}

/// Per-round generator: stream `round` of a ChaCha8 keyed by `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

fn map_rounds<T: Send>(
    rounds: u64,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..rounds).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..rounds).map(f).collect()
    }
}

/// Plays `rounds` independent rounds with promised inputs drawn uniformly.
/// Round `n` uses only [`round_rng`]`(seed, n)`, so results do not depend on
/// scheduling.
pub fn play_rounds(
    instance: &GameInstance,
    backend: &QuantumBackend,
    rounds: u64,
    seed: u64,
) -> Result<Vec<RoundResult>> {
    backend.check(instance)?;
    map_rounds(rounds, |n| {
        let mut rng = round_rng(seed, n);
        let input = sample_promised_input(instance.num_teams(), instance.modulus(), &mut rng)?;
        play_round_quantum(instance, backend, &input, &mut rng)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputWinProbability {
    pub input: Vec<u32>,
    pub probability: f64,
}

/// Exact win probability for each promised input.
pub fn exact_win_by_input(
    instance: &GameInstance,
    state: &DenseState,
) -> Result<Vec<InputWinProbability>> {
    QuantumBackend::Dense(state.clone()).check(instance)?;
    let m = instance.modulus();
    promised_inputs(instance.num_teams(), m)?
        .into_iter()
        .map(|a| {
            let mut d = state.clone();
            for (team, &v) in instance.teams().iter().zip(a.values()) {
                apply_wilson_root(&mut d, team, v, root_sign(m))?;
            }
            let dist = dual_outcome_distribution(&d, instance.dual_loop())?;
            let r = referee_target(&a, m)?;
            Ok(InputWinProbability {
                input: a.0,
                probability: dist[r as usize],
            })
        })
        .collect()
}

/// Uniform average over promised inputs of the exact win probability.
pub fn win_probability_quantum_exact(instance: &GameInstance, state: &DenseState) -> Result<f64> {
    let per = exact_win_by_input(instance, state)?;
    Ok(per.iter().map(|p| p.probability).sum::<f64>() / per.len() as f64)
}

/// Deterministic classical round: `t_i` answers `f_i(a_i)`, everyone else a
/// constant.
pub fn play_round_classical(
    instance: &GameInstance,
    strategy: &ClassicalStrategy,
    input: &InputVector,
) -> Result<RoundResult> {
    let dual = instance.dual_loop();
    strategy.check_shape(instance.num_teams(), dual.len(), instance.modulus())?;
    check_input(instance, input)?;
    let hits = instance.intersections();
    let mut constants = strategy.constants().iter();
    let outcomes = dual
        .bonds()
        .iter()
        .map(|b| match hits.iter().position(|h| h == b) {
            Some(team) => strategy.respond(team, input.values()[team]),
            None => *constants.next().expect("shape checked"),
        })
        .collect();
    RoundResult::new(input, outcomes, instance.modulus())
}

/// Vertical and horizontal games played on one shared full cat state.
#[derive(Clone, Debug)]
pub struct SimultaneousGame {
    vertical: GameInstance,
    horizontal: GameInstance,
}

impl SimultaneousGame {
    pub fn new(vertical: GameInstance, horizontal: GameInstance) -> Result<Self> {
        if vertical.lattice() != horizontal.lattice() || vertical.modulus() != horizontal.modulus() {
            return Err(Error::InvalidConfiguration(
                "both games must share the lattice and modulus".into(),
            ));
        }
        vertical.validate().map_err(Error::InvalidInstance)?;
        horizontal.validate().map_err(Error::InvalidInstance)?;
        if vertical.direction() != Some(GameDirection::Vertical)
            || horizontal.direction() != Some(GameDirection::Horizontal)
        {
            return Err(Error::InvalidConfiguration(
                "expected one vertical and one horizontal game".into(),
            ));
        }
        let shared = vertical.dual_loop().shared_bonds(horizontal.dual_loop());
        if !shared.is_empty() {
            return Err(Error::InvalidConfiguration(format!(
                "dual loops overlap on bonds {shared:?}"
            )));
        }
        Ok(Self {
            vertical,
            horizontal,
        })
    }

    pub fn vertical(&self) -> &GameInstance {
        &self.vertical
    }

    pub fn horizontal(&self) -> &GameInstance {
        &self.horizontal
    }

    /// `(1/M) sum_{jk} |jk>`.
    pub fn shared_state(&self) -> Result<DenseState> {
        prepare_full_cat(self.vertical.lattice(), self.vertical.modulus())
    }

    /// Applies both teams' operations. `vertical_first` picks the order.
    pub fn apply_strategies(
        &self,
        state: &mut DenseState,
        vertical_input: &InputVector,
        horizontal_input: &InputVector,
        vertical_first: bool,
    ) -> Result<()> {
        check_input(&self.vertical, vertical_input)?;
        check_input(&self.horizontal, horizontal_input)?;
        let sign = root_sign(self.vertical.modulus());
        let mut sets = [
            (&self.vertical, vertical_input),
            (&self.horizontal, horizontal_input),
        ];
        if !vertical_first {
            sets.reverse();
        }
        for (game, input) in sets {
            for (team, &a) in game.teams().iter().zip(input.values()) {
                apply_wilson_root(state, team, a, sign)?;
            }
        }
        Ok(())
    }

    /// Exact `(P(vertical wins), P(horizontal wins), P(both win))`.
    pub fn exact(
        &self,
        state: &DenseState,
        vertical_input: &InputVector,
        horizontal_input: &InputVector,
    ) -> Result<(f64, f64, f64)> {
        let m = self.vertical.modulus() as usize;
        let mut d = state.clone();
        self.apply_strategies(&mut d, vertical_input, horizontal_input, true)?;
        let joint = loop_sums_distribution(
            &d,
            &[self.vertical.dual_loop(), self.horizontal.dual_loop()],
        )?;
        let rv = referee_target(vertical_input, m as u32)? as usize;
        let rh = referee_target(horizontal_input, m as u32)? as usize;
        let pv: f64 = (0..m).map(|h| joint[rv + m * h]).sum();
        let ph: f64 = (0..m).map(|v| joint[v + m * rh]).sum();
        Ok((pv, ph, joint[rv + m * rh]))
    }
}

/// One simultaneous round with independent promised inputs for both games.
pub fn play_simultaneous<R: Rng + ?Sized>(
    game: &SimultaneousGame,
    state: &DenseState,
    rng: &mut R,
) -> Result<(RoundResult, RoundResult)> {
    let m = game.vertical.modulus();
    let iv = sample_promised_input(game.vertical.num_teams(), m, rng)?;
    let ih = sample_promised_input(game.horizontal.num_teams(), m, rng)?;
    let mut d = state.clone();
    game.apply_strategies(&mut d, &iv, &ih, true)?;
    let mut out = sample_loop_outcomes(
        &d,
        &[game.vertical.dual_loop(), game.horizontal.dual_loop()],
        rng,
    )?;
    let h = out.pop().expect("two loops");
    let v = out.pop().expect("two loops");
    Ok((RoundResult::new(&iv, v, m)?, RoundResult::new(&ih, h, m)?))
}
