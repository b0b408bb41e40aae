use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use toric_game::analysis::{lemma1_terms, uniqueness_certificate, CertificateOptions};
use toric_game::classical::{closed_form_classical, optimal_classical};
use toric_game::game::{
    exact_win_by_input, play_rounds, play_simultaneous, promised_inputs, round_rng, BackendKind,
    QuantumBackend, SimultaneousGame, WinStats,
};
use toric_game::lattice::{instance_family, EnumerateOptions, GameDirection, GameInstance, TorusLattice};
use toric_game::statevector::{prepare_cat_dense_for, prepare_ground_state, DenseState};

use crate::config::{config_hash, Flags, Settings, StateChoice};

pub const ARTIFACT: &str = "toric-game";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest dense vector `play` builds for its exact reference value.
const EXACT_REFERENCE_LIMIT: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sampled rounds of the quantum strategy: JSON-lines log plus win statistics.
    Play,
    /// Exact dense win probability of a state.
    Exact,
    /// Classical optimum by exhaustive search, compared with the closed form.
    ClassicalOpt,
    /// Fidelity formula against the direct win probability.
    Lemma1,
    /// Numerical certificate for the common fixed space of an instance family.
    Uniqueness,
    /// Vertical and horizontal games on one shared state.
    Simul,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Play => "play",
            Self::Exact => "exact",
            Self::ClassicalOpt => "classical-opt",
            Self::Lemma1 => "lemma1",
            Self::Uniqueness => "uniqueness",
            Self::Simul => "simul",
        }
    }
}

/// Result of a run that did not hit a configuration error.
#[derive(Debug, PartialEq)]
pub enum Status {
    Passed,
    CheckFailed(String),
}

impl Status {
    fn check(ok: bool, message: impl FnOnce() -> String) -> Self {
        if ok {
            Self::Passed
        } else {
            Self::CheckFailed(message())
        }
    }
}

pub fn run(command: Command, flags: Flags) -> Result<Status> {
    let settings = Settings::resolve(command.name(), flags)?;
    match command {
        Command::Play => play(&settings),
        Command::Exact => exact(&settings),
        Command::ClassicalOpt => classical_opt(&settings),
        Command::Lemma1 => lemma1(&settings),
        Command::Uniqueness => uniqueness(&settings),
        Command::Simul => simul(&settings),
    }
}

struct Header {
    command: &'static str,
    params: Value,
    hash: String,
}

impl Header {
    fn new(command: Command, params: Value) -> Self {
        Self {
            command: command.name(),
            hash: config_hash(command.name(), &params),
            params,
        }
    }

    fn json(&self) -> Value {
        json!({
            "artifact": ARTIFACT,
            "version": VERSION,
            "config_hash": self.hash,
            "command": self.command,
            "config": self.params,
        })
    }

    /// Structured result: the header fields plus `result`.
    fn document(&self, result: Value) -> String {
        let mut doc = self.json();
        doc["result"] = result;
        serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
    }

    fn csv_comment(&self) -> String {
        format!(
            "# artifact={ARTIFACT} version={VERSION} config_hash={}\n",
            self.hash
        )
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let mut w = sink(out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn instance(s: &Settings, lx: usize, ly: usize, teams: usize) -> Result<GameInstance> {
    if let Some(spec) = &s.instance {
        if s.lx.is_some() || s.ly.is_some() || s.teams.is_some() {
            bail!("--lx/--ly/--teams cannot be combined with an explicit instance");
        }
        let mut spec = spec.clone();
        if let Some(m) = s.modulus {
            spec.modulus = m;
        }
        return Ok(spec.build()?);
    }
    let lx = s.lx.unwrap_or(lx);
    let lattice = TorusLattice::new(lx, s.ly.unwrap_or(ly))?;
    let t = s.single_team_count(teams.min(lx))?;
    let cols: Vec<usize> = (0..t).collect();
    Ok(GameInstance::straight(lattice, s.modulus.unwrap_or(2), &cols, 0)?)
}

fn direction(inst: &GameInstance) -> GameDirection {
    inst.direction().expect("validated instance has a direction")
}

fn state_for(choice: StateChoice, inst: &GameInstance, seed: u64) -> Result<DenseState> {
    let l = inst.lattice();
    let m = inst.modulus();
    Ok(match choice {
        StateChoice::Cat => prepare_cat_dense_for(l, m, direction(inst))?,
        StateChoice::Ground => prepare_ground_state(l, m, 0, 0)?,
        StateChoice::Random => {
            DenseState::random(m, l.num_bonds(), &mut ChaCha8Rng::seed_from_u64(seed))?
        }
        StateChoice::Uniform => DenseState::uniform(m, l.num_bonds())?,
    })
}

fn play(s: &Settings) -> Result<Status> {
    let inst = instance(s, 3, 2, 3)?;
    let m = inst.modulus();
    let kind = s
        .backend
        .unwrap_or(if m == 2 { BackendKind::Tableau } else { BackendKind::Dense });
    if kind == BackendKind::Tableau && m != 2 {
        bail!("the tableau backend needs M = 2, got M = {m}");
    }
    let rounds = s.rounds(10_000)?;
    let header = Header::new(
        Command::Play,
        json!({ "instance": inst.to_spec(), "backend": kind, "rounds": rounds, "seed": s.seed }),
    );

    let backend = QuantumBackend::cat(&inst, kind)?;
    let results = play_rounds(&inst, &backend, rounds, s.seed)?;
    let mut stats = WinStats::from_results(&results);
    let n = inst.lattice().num_bonds();
    if (m as usize).checked_pow(n as u32).is_some_and(|len| len <= EXACT_REFERENCE_LIMIT) {
        let cat = state_for(StateChoice::Cat, &inst, 0)?;
        let per = exact_win_by_input(&inst, &cat)?;
        stats.exact_probability =
            Some(per.iter().map(|p| p.probability).sum::<f64>() / per.len() as f64);
    }

    let summary = json!({ "summary": stats }).to_string();
    let mut w = sink(s.out.as_deref())?;
    writeln!(w, "{}", header.json())?;
    for (round, r) in results.iter().enumerate() {
        writeln!(w, "{}", r.log_line(round as u64))?;
    }
    writeln!(w, "{summary}")?;
    w.flush()?;
    drop(w);
    if s.out.is_some() {
        println!("{summary}");
    }
    Ok(Status::check(stats.losses() == 0, || {
        format!("{} of {} rounds lost", stats.losses(), stats.rounds)
    }))
}

fn exact(s: &Settings) -> Result<Status> {
    let inst = instance(s, 3, 2, 3)?;
    let choice = s.state.unwrap_or(StateChoice::Cat);
    let header = Header::new(
        Command::Exact,
        json!({ "instance": inst.to_spec(), "state": choice, "seed": s.seed }),
    );
    let state = state_for(choice, &inst, s.seed)?;
    let per = exact_win_by_input(&inst, &state)?;
    let probability = per.iter().map(|p| p.probability).sum::<f64>() / per.len() as f64;
    emit(
        s.out.as_deref(),
        &header.document(json!({ "probability": probability, "per_input": per })),
    )?;
    let tol = s.tolerances.probability;
    Ok(Status::check(choice != StateChoice::Cat || probability >= 1.0 - tol, || {
        format!("cat state wins with probability {probability}, expected 1")
    }))
}

fn classical_opt(s: &Settings) -> Result<Status> {
    let m = s.modulus.unwrap_or(2);
    let teams = s.teams.clone().unwrap_or_else(|| vec![3]);
    if let Some(d) = s.dual_size {
        if let Some(&t) = teams.iter().find(|&&t| d < t) {
            bail!("dual size {d} is smaller than the team count {t}");
        }
    }
    let header = Header::new(
        Command::ClassicalOpt,
        json!({ "modulus": m, "teams": teams, "dual_size": s.dual_size }),
    );
    let mut csv = header.csv_comment();
    csv.push_str("T,M,optimal_probability,closed_form,match\n");
    let mut mismatches = Vec::new();
    for &t in &teams {
        let opt = optimal_classical(t, m, s.dual_size.unwrap_or(t))?;
        let (closed, matched) = if m == 2 {
            let c = closed_form_classical(t)?;
            if c != opt.probability {
                mismatches.push(t);
            }
            (c.to_string(), (c == opt.probability).to_string())
        } else {
            ("NA".to_string(), "NA".to_string())
        };
        csv.push_str(&format!("{t},{m},{},{closed},{matched}\n", opt.probability));
    }
    emit(s.out.as_deref(), &csv)?;
    Ok(Status::check(mismatches.is_empty(), || {
        format!("search disagrees with the closed form for T = {mismatches:?}")
    }))
}

fn lemma1(s: &Settings) -> Result<Status> {
    let inst = instance(s, 3, 2, 3)?;
    if inst.modulus() != 2 {
        bail!("lemma1 is defined for M = 2, got M = {}", inst.modulus());
    }
    let choice = s.state.unwrap_or(StateChoice::Random);
    let header = Header::new(
        Command::Lemma1,
        json!({ "instance": inst.to_spec(), "state": choice, "seed": s.seed }),
    );
    let state = state_for(choice, &inst, s.seed)?;
    let terms = lemma1_terms(&state, &inst)?;
    let per = exact_win_by_input(&inst, &state)?;
    let direct = per.iter().map(|p| p.probability).sum::<f64>() / per.len() as f64;
    let difference = (terms.probability - direct).abs();
    emit(
        s.out.as_deref(),
        &header.document(json!({
            "closed_form": terms.probability,
            "direct": direct,
            "difference": difference,
            "sum_f_plus": terms.sum_f_plus,
            "sum_f_minus": terms.sum_f_minus,
            "terms": terms.terms,
        })),
    )?;
    Ok(Status::check(difference <= s.tolerances.probability, || {
        format!("closed form {} and direct {direct} differ by {difference:e}", terms.probability)
    }))
}

fn uniqueness(s: &Settings) -> Result<Status> {
    if s.instance.is_some() {
        bail!("uniqueness enumerates its own family; drop the instance from the config");
    }
    let m = s.modulus.unwrap_or(2);
    if m != 2 {
        bail!("the certificate is implemented for M = 2, got M = {m}");
    }
    let lattice = TorusLattice::new(s.lx.unwrap_or(3), s.ly.unwrap_or(2))?;
    let team_counts = s.teams.clone().unwrap_or_else(|| vec![2, 3]);
    let deformations = !s.straight_only;
    let probes = s.probes.unwrap_or(if deformations { 12 } else { 320 });
    let options = CertificateOptions {
        probes,
        seed: s.seed,
        ..CertificateOptions::default()
    };
    let header = Header::new(
        Command::Uniqueness,
        json!({
            "lx": lattice.lx(),
            "ly": lattice.ly(),
            "teams": team_counts,
            "deformations": deformations,
            "options": options,
        }),
    );
    let family = instance_family(
        &lattice,
        &team_counts,
        &EnumerateOptions {
            modulus: 2,
            deformations,
        },
    )?;
    let report = uniqueness_certificate(&lattice, &family, &options)?;
    emit(s.out.as_deref(), &header.document(serde_json::to_value(&report)?))?;
    if !deformations {
        return Ok(Status::Passed);
    }
    let residual = report.max_residual();
    Ok(Status::check(
        report.dimension == 2 && residual <= s.tolerances.residual,
        || format!("dimension {} with residual {residual:e}, expected 2", report.dimension),
    ))
}

fn simul(s: &Settings) -> Result<Status> {
    let m = s.modulus.unwrap_or(2);
    let game = match (&s.instance, &s.horizontal_instance) {
        (Some(v), Some(h)) => {
            let (mut v, mut h) = (v.clone(), h.clone());
            if let Some(m) = s.modulus {
                v.modulus = m;
                h.modulus = m;
            }
            SimultaneousGame::new(v.build()?, h.build()?)?
        }
        (None, None) => {
            let lattice = TorusLattice::new(s.lx.unwrap_or(3), s.ly.unwrap_or(3))?;
            let t = s.single_team_count(3.min(lattice.lx()).min(lattice.ly()))?;
            let lines: Vec<usize> = (0..t).collect();
            SimultaneousGame::new(
                GameInstance::straight(lattice, m, &lines, 0)?,
                GameInstance::straight_horizontal(lattice, m, &lines, 0)?,
            )?
        }
        _ => bail!("simul needs both instance and horizontal_instance, or neither"),
    };
    let m = game.vertical().modulus();
    let rounds = s.rounds(200)?;
    let header = Header::new(
        Command::Simul,
        json!({
            "vertical": game.vertical().to_spec(),
            "horizontal": game.horizontal().to_spec(),
            "rounds": rounds,
            "seed": s.seed,
        }),
    );

    let state = game.shared_state()?;
    let mut w = sink(s.out.as_deref())?;
    writeln!(w, "{}", header.json())?;
    let (mut vw, mut hw, mut bw) = (0u64, 0u64, 0u64);
    for round in 0..rounds {
        let mut rng = round_rng(s.seed, round);
        let (v, h) = play_simultaneous(&game, &state, &mut rng)?;
        vw += v.won as u64;
        hw += h.won as u64;
        bw += (v.won && h.won) as u64;
        writeln!(
            w,
            "{{\"round\":{round},\"vertical\":{},\"horizontal\":{}}}",
            serde_json::to_string(&v)?,
            serde_json::to_string(&h)?
        )?;
    }
    let mut worst = 1.0f64;
    let mut pairs = 0usize;
    for iv in promised_inputs(game.vertical().num_teams(), m)? {
        for ih in promised_inputs(game.horizontal().num_teams(), m)? {
            let (_, _, both) = game.exact(&state, &iv, &ih)?;
            worst = worst.min(both);
            pairs += 1;
        }
    }
    let summary = json!({ "summary": {
        "rounds": rounds,
        "vertical_wins": vw,
        "horizontal_wins": hw,
        "both_wins": bw,
        "exact_pairs": pairs,
        "exact_min_both": worst,
    }})
    .to_string();
    writeln!(w, "{summary}")?;
    w.flush()?;
    drop(w);
    if s.out.is_some() {
        println!("{summary}");
    }
    let tol = s.tolerances.probability;
    Ok(Status::check(bw == rounds && worst >= 1.0 - tol, || {
        format!("both games won in {bw} of {rounds} rounds; worst exact pair {worst}")
    }))
}
