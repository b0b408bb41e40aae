//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line reaches stdout; the
//! process exits nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toric_game::analysis::{
    lemma1_probability, parity_identity_check, uniqueness_certificate, vertical_cat_states,
    CertificateOptions, InstanceProjector,
};
use toric_game::classical::{closed_form_classical, optimal_classical};
use toric_game::game::{
    exact_win_by_input, play_rounds, promised_inputs, win_probability_quantum_exact, BackendKind,
    InputVector, QuantumBackend, SimultaneousGame,
};
use toric_game::lattice::{instance_family, EnumerateOptions, GameInstance, TorusLattice};
use toric_game::stabilizer::{prepare_cat_tableau, PauliString};
use toric_game::statevector::{
    apply_wilson_root, joint_outcome_distribution, prepare_cat_dense, DenseState,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lat(lx: usize, ly: usize) -> TorusLattice {
    TorusLattice::new(lx, ly).unwrap()
}

fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (lx, ly) in [(3, 2), (3, 3)] {
        let g = GameInstance::straight(lat(lx, ly), 2, &[0, 1, 2], 0).map_err(|e| e.to_string())?;
        let cat = prepare_cat_dense(g.lattice(), 2).map_err(|e| e.to_string())?;
        for p in exact_win_by_input(&g, &cat).map_err(|e| e.to_string())? {
            worst = worst.max((p.probability - 1.0).abs());
            cases += 1;
            ensure((p.probability - 1.0).abs() < 1e-9, || {
                format!("{lx}x{ly} input {:?}: p = {}", p.input, p.probability)
            })?;
        }
    }
    Ok(format!("{cases} promised inputs on 3x2 and 3x3 win with p = 1 (max deviation {worst:.1e})"))
}

fn criterion_2() -> Check {
    let l = lat(8, 8);
    let mut parts = Vec::new();
    for cols in [&[0usize, 3, 5][..], &[0, 2, 4, 6][..]] {
        let g = GameInstance::straight(l.clone(), 2, cols, 3).map_err(|e| e.to_string())?;
        let backend = QuantumBackend::cat(&g, BackendKind::Tableau).map_err(|e| e.to_string())?;
        let first = play_rounds(&g, &backend, 10_000, 2024).map_err(|e| e.to_string())?;
        let losses = first.iter().filter(|r| !r.won).count();
        ensure(losses == 0, || format!("T={}: {losses} losses in 10^4 rounds", cols.len()))?;
        let again = play_rounds(&g, &backend, 10_000, 2024).map_err(|e| e.to_string())?;
        ensure(first == again, || format!("T={}: rerun with the same seed differs", cols.len()))?;
        parts.push(format!("T={}: 0/10000 losses", cols.len()));
    }
    Ok(format!("8x8 tableau, {}; reruns identical", parts.join(", ")))
}

fn criterion_3() -> Check {
    let want = [(3, Ratio::new(3, 4)), (4, Ratio::new(3, 4)), (5, Ratio::new(5, 8))];
    let mut parts = Vec::new();
    for (t, expected) in want {
        let opt = optimal_classical(t, 2, t).map_err(|e| e.to_string())?;
        let closed = closed_form_classical(t).map_err(|e| e.to_string())?;
        ensure(opt.probability == closed && closed == expected, || {
            format!("T={t}: search {} closed form {closed} expected {expected}", opt.probability)
        })?;
        parts.push(format!("T={t}: {}", opt.probability));
    }
    Ok(format!("search equals closed form ({})", parts.join(", ")))
}

fn criterion_4() -> Check {
    let l = lat(3, 2);
    let g = GameInstance::straight(l.clone(), 2, &[0, 1, 2], 0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let s = DenseState::random(2, l.num_bonds(), &mut rng).map_err(|e| e.to_string())?;
        let a = lemma1_probability(&s, &g).map_err(|e| e.to_string())?;
        let b = win_probability_quantum_exact(&g, &s).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
        ensure((a - b).abs() < 1e-9, || format!("state {i}: lemma {a} direct {b}"))?;
    }

    let cat = prepare_cat_dense(&l, 2).map_err(|e| e.to_string())?;
    let basis = DenseState::basis_index(2, 12, 0b0110_1001_0011).map_err(|e| e.to_string())?;
    let flip: usize = g.dual_loop().bonds().iter().map(|b| 1usize << b).sum();
    let h = 1.0 / 2f64.sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << 12];
    amps[0] = Complex64::new(h, 0.0);
    amps[flip] = Complex64::new(-h, 0.0);
    let anti = DenseState::from_amplitudes(2, 12, amps).map_err(|e| e.to_string())?;
    for (name, state, want) in [("cat", &cat, 1.0), ("basis", &basis, 0.5), ("anti-cat", &anti, 0.0)] {
        let a = lemma1_probability(state, &g).map_err(|e| e.to_string())?;
        let b = win_probability_quantum_exact(&g, state).map_err(|e| e.to_string())?;
        ensure((a - want).abs() < 1e-9 && (b - want).abs() < 1e-9, || {
            format!("{name}: lemma {a} direct {b}, expected {want}")
        })?;
    }
    Ok(format!(
        "50 random states agree (max |diff| {worst:.1e}); cat -> 1, basis -> 1/2, anti-cat -> 0"
    ))
}

fn criterion_5() -> Check {
    let l = lat(3, 2);
    let opts = CertificateOptions::default();
    let deformed = instance_family(
        &l,
        &[2, 3],
        &EnumerateOptions {
            modulus: 2,
            deformations: true,
        },
    )
    .map_err(|e| e.to_string())?;
    let rep = uniqueness_certificate(&l, &deformed, &opts).map_err(|e| e.to_string())?;
    ensure(rep.dimension == 2, || {
        format!("deformed family: dimension {} ({:?})", rep.dimension, rep.singular_values)
    })?;
    ensure(rep.max_residual() < 1e-8, || format!("residual {:.2e}", rep.max_residual()))?;
    let cats = vertical_cat_states(&l).map_err(|e| e.to_string())?;
    for inst in &deformed.instances {
        let p = InstanceProjector::new(inst).map_err(|e| e.to_string())?;
        for c in &cats {
            let d = p.apply(c).and_then(|pc| pc.distance(c)).map_err(|e| e.to_string())?;
            ensure(d < 1e-10, || format!("cat state moved by {d:.2e}"))?;
        }
    }

    let straight = instance_family(
        &l,
        &[2, 3],
        &EnumerateOptions {
            modulus: 2,
            deformations: false,
        },
    )
    .map_err(|e| e.to_string())?;
    let wide = CertificateOptions { probes: 320, ..opts };
    let loose = uniqueness_certificate(&l, &straight, &wide).map_err(|e| e.to_string())?;
    ensure(loose.dimension > 2, || {
        format!("straight-only family unexpectedly gives dimension {}", loose.dimension)
    })?;
    Ok(format!(
        "deformed family ({} instances): dimension 2, residual {:.1e}; straight-only ({} instances): dimension {}{}",
        rep.instances,
        rep.max_residual(),
        loose.instances,
        if loose.saturated { ">= " } else { "" },
        loose.dimension
    ))
}

fn criterion_6() -> Check {
    let g = GameInstance::straight(lat(2, 2), 3, &[0, 1], 0).map_err(|e| e.to_string())?;
    let cat = prepare_cat_dense(g.lattice(), 3).map_err(|e| e.to_string())?;
    let per = exact_win_by_input(&g, &cat).map_err(|e| e.to_string())?;
    for p in &per {
        ensure((p.probability - 1.0).abs() < 1e-9, || {
            format!("qutrit input {:?}: p = {}", p.input, p.probability)
        })?;
    }
    let opt = optimal_classical(3, 3, 3).map_err(|e| e.to_string())?;
    let oracle = common::boyer_optimum(3, 3, 3);
    let oracle_extra = common::boyer_optimum(3, 3, 4);
    ensure(opt.probability == oracle && oracle == oracle_extra, || {
        format!("search {} vs enumerator {oracle} / {oracle_extra}", opt.probability)
    })?;
    ensure(opt.probability < Ratio::new(1, 1), || "classical optimum reached 1".into())?;
    let t2 = optimal_classical(2, 3, 2).map_err(|e| e.to_string())?.probability;
    let t4 = optimal_classical(4, 3, 4).map_err(|e| e.to_string())?.probability;
    ensure(t2 >= opt.probability && opt.probability >= t4, || {
        format!("not monotone: T=2 {t2}, T=3 {}, T=4 {t4}", opt.probability)
    })?;
    Ok(format!(
        "2x2 qutrits win all {} inputs; classical T=2,3,4: {t2}, {}, {t4} (enumerator agrees at T=3)",
        per.len(),
        opt.probability
    ))
}

fn criterion_7() -> Check {
    let l = lat(3, 2);
    let tab = prepare_cat_tableau(&l, 1).map_err(|e| e.to_string())?;
    let dense = prepare_cat_dense(&l, 2).map_err(|e| e.to_string())?;
    let overlap = tab
        .to_dense()
        .and_then(|d| d.fidelity(&dense))
        .map_err(|e| e.to_string())?;
    ensure(overlap >= 1.0 - 1e-9, || format!("overlap {overlap}"))?;

    // X outcomes on the dual loop plus one off-loop bond, after two teams act.
    let g = GameInstance::straight(l.clone(), 2, &[0, 1, 2], 0).map_err(|e| e.to_string())?;
    let input = InputVector::new(vec![1, 1, 0], 2).map_err(|e| e.to_string())?;
    let mut sites: Vec<usize> = g.dual_loop().bonds().to_vec();
    sites.push(l.h(1, 1));
    let mut t = tab.clone();
    let mut d = dense.clone();
    for (team, &a) in g.teams().iter().zip(input.values()) {
        t.apply_half_wilson(team, a).map_err(|e| e.to_string())?;
        apply_wilson_root(&mut d, team, a, 1).map_err(|e| e.to_string())?;
    }
    let exact = joint_outcome_distribution(&d, &sites).map_err(|e| e.to_string())?;
    let n = 10_000usize;
    let mut counts = vec![0usize; exact.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..n {
        let mut c = t.clone();
        let mut key = 0;
        for (i, &b) in sites.iter().enumerate() {
            let m = c
                .measure(&PauliString::x_on(l.num_bonds(), [b]), &mut rng)
                .map_err(|e| e.to_string())?;
            key |= (m.bit() as usize) << i;
        }
        counts[key] += 1;
    }
    let mut worst_z: f64 = 0.0;
    for (k, (&cnt, &p)) in counts.iter().zip(&exact).enumerate() {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        if sd == 0.0 {
            ensure(cnt as f64 == mean.round(), || format!("pattern {k:04b}: {cnt} vs {mean}"))?;
            continue;
        }
        let z = (cnt as f64 - mean).abs() / sd;
        worst_z = worst_z.max(z);
        ensure(z <= 3.0, || format!("pattern {k:04b}: {cnt} samples vs mean {mean:.1} ({z:.2} sigma)"))?;
    }
    Ok(format!(
        "tableau/dense overlap {overlap:.12}; 16-pattern X statistics within {worst_z:.2} sigma"
    ))
}

fn criterion_8() -> Check {
    let l = lat(3, 3);
    let game = SimultaneousGame::new(
        GameInstance::straight(l.clone(), 2, &[0, 1, 2], 0).map_err(|e| e.to_string())?,
        GameInstance::straight_horizontal(l, 2, &[0, 1, 2], 0).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let state = game.shared_state().map_err(|e| e.to_string())?;
    let inputs = promised_inputs(3, 2).map_err(|e| e.to_string())?;
    let mut pairs = 0;
    for iv in &inputs {
        for ih in &inputs {
            let (_, _, both) = game.exact(&state, iv, ih).map_err(|e| e.to_string())?;
            ensure((both - 1.0).abs() < 1e-9, || {
                format!("inputs {:?} / {:?}: P(both win) = {both}", iv.values(), ih.values())
            })?;
            pairs += 1;
        }
    }
    Ok(format!("3x3 full cat: both games win with p = 1 for all {pairs} input pairs"))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.gen_range(0..=10);
        let z: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = rng.gen_range(0..2);
        let (lhs, rhs) = parity_identity_check(&z, r).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).norm());
        ensure((lhs - rhs).norm() < 1e-12, || format!("len {len}: |lhs - rhs| = {:e}", (lhs - rhs).norm()))?;
    }
    Ok(format!("100 random inputs, max |lhs - rhs| = {worst:.1e}"))
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "perfect strategy, exact", limit: Some(Duration::from_secs(30)), run: criterion_1 },
        Criterion { id: 2, title: "perfect strategy, sampled 8x8", limit: Some(Duration::from_secs(60)), run: criterion_2 },
        Criterion { id: 3, title: "classical optimum", limit: Some(Duration::from_secs(60)), run: criterion_3 },
        Criterion { id: 4, title: "fidelity formula vs direct simulation", limit: Some(Duration::from_secs(120)), run: criterion_4 },
        Criterion { id: 5, title: "uniqueness certificate", limit: Some(Duration::from_secs(300)), run: criterion_5 },
        Criterion { id: 6, title: "Z_3 game", limit: None, run: criterion_6 },
        Criterion { id: 7, title: "backend equivalence", limit: None, run: criterion_7 },
        Criterion { id: 8, title: "simultaneous play", limit: None, run: criterion_8 },
        Criterion { id: 9, title: "parity identity", limit: None, run: criterion_9 },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("{detail}; took {elapsed:.1?}, limit {limit:?}"));
            }
        }
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("criterion {} [{status}] {}: {detail} ({:.1}s)", c.id, c.title, elapsed.as_secs_f64());
        failed += outcome.is_err() as u32;
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() as u32 - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
