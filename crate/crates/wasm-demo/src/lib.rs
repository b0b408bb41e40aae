//! Browser bindings for the toric code game. Each export returns a JSON
//! string; the `*_json` functions behind them are plain Rust so they can be
//! tested natively.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use toric_game::analysis::lemma1_probability;
use toric_game::classical::{closed_form_classical, optimal_classical};
use toric_game::game::{play_rounds, win_probability_quantum_exact, BackendKind, QuantumBackend, WinStats};
use toric_game::lattice::{GameInstance, TorusLattice};
use toric_game::statevector::{prepare_cat_dense, DenseState};
use wasm_bindgen::prelude::*;

/// Exhaustive search stays interactive up to this many teams.
pub const MAX_CLASSICAL_TEAMS: usize = 6;
pub const MAX_ROUNDS: u64 = 100_000;
/// The fidelity curve runs on the dense backend.
pub const MAX_LEMMA_BONDS: usize = 12;

type Res = Result<Value, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Classical optimum against the closed form for `T = 2..=max_teams`,
/// alongside the quantum value 1.
pub fn classical_curve_json(max_teams: usize) -> Res {
    if !(2..=MAX_CLASSICAL_TEAMS).contains(&max_teams) {
        return Err(format!("max_teams must lie in 2..={MAX_CLASSICAL_TEAMS}"));
    }
    let rows = (2..=max_teams)
        .map(|t| {
            let opt = optimal_classical(t, 2, t).map_err(err)?;
            let closed = closed_form_classical(t).map_err(err)?;
            Ok(json!({
                "teams": t,
                "optimum": opt.probability.to_string(),
                "optimum_value": ratio_f64(*opt.probability.numer(), *opt.probability.denom()),
                "closed_form": closed.to_string(),
                "tables": opt.strategy.tables(),
                "quantum": 1.0,
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "rows": rows }))
}

fn ratio_f64(n: i64, d: i64) -> f64 {
    n as f64 / d as f64
}

/// Straight instance with teams on columns `0..teams` and the dual loop on
/// row 0, played with the stabilizer backend. Returns the geometry so the
/// page can draw it.
pub fn play_json(lx: usize, ly: usize, teams: usize, rounds: u64, seed: u64) -> Res {
    if !(1..=MAX_ROUNDS).contains(&rounds) {
        return Err(format!("rounds must lie in 1..={MAX_ROUNDS}"));
    }
    let lattice = TorusLattice::new(lx, ly).map_err(err)?;
    let cols: Vec<usize> = (0..teams).collect();
    let inst = GameInstance::straight(lattice, 2, &cols, 0).map_err(err)?;
    let backend = QuantumBackend::cat(&inst, BackendKind::Tableau).map_err(err)?;
    let results = play_rounds(&inst, &backend, rounds, seed).map_err(err)?;
    let stats = WinStats::from_results(&results);
    let shown: Vec<&_> = results.iter().take(50).collect();
    Ok(json!({
        "instance": inst.to_spec(),
        "intersections": inst.intersections(),
        "stats": stats,
        "rounds": shown,
    }))
}

/// Win probability along `cos(t) |cat> + sin(t) |random>` for `t` in
/// `[0, pi/2]`, from the fidelity formula and from direct simulation.
pub fn lemma1_curve_json(lx: usize, ly: usize, teams: usize, steps: usize, seed: u64) -> Res {
    if !(2..=200).contains(&steps) {
        return Err("steps must lie in 2..=200".into());
    }
    let lattice = TorusLattice::new(lx, ly).map_err(err)?;
    if lattice.num_bonds() > MAX_LEMMA_BONDS {
        return Err(format!("at most {MAX_LEMMA_BONDS} bonds for the dense curve"));
    }
    let cols: Vec<usize> = (0..teams).collect();
    let inst = GameInstance::straight(lattice, 2, &cols, 0).map_err(err)?;
    let cat = prepare_cat_dense(&lattice, 2).map_err(err)?;
    let noise = DenseState::random(2, lattice.num_bonds(), &mut ChaCha8Rng::seed_from_u64(seed))
        .map_err(err)?;
    let points = (0..steps)
        .map(|i| {
            let t = std::f64::consts::FRAC_PI_2 * i as f64 / (steps - 1) as f64;
            let mut psi = cat.clone();
            psi.scale(Complex64::new(t.cos(), 0.0));
            psi.add_scaled(&noise, Complex64::new(t.sin(), 0.0)).map_err(err)?;
            psi.normalize().map_err(err)?;
            let closed = lemma1_probability(&psi, &inst).map_err(err)?;
            let direct = win_probability_quantum_exact(&inst, &psi).map_err(err)?;
            Ok(json!({ "t": t, "closed_form": closed, "direct": direct }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "instance": inst.to_spec(), "points": points }))
}

fn export(r: Res) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn classical_curve(max_teams: usize) -> Result<String, JsValue> {
    export(classical_curve_json(max_teams))
}

#[wasm_bindgen]
pub fn play(lx: usize, ly: usize, teams: usize, rounds: u32, seed: u32) -> Result<String, JsValue> {
    export(play_json(lx, ly, teams, rounds as u64, seed as u64))
}

#[wasm_bindgen]
pub fn lemma1_curve(
    lx: usize,
    ly: usize,
    teams: usize,
    steps: usize,
    seed: u32,
) -> Result<String, JsValue> {
    export(lemma1_curve_json(lx, ly, teams, steps, seed as u64))
}
