mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toric_game::analysis::lemma1_probability;
use toric_game::classical::optimal_classical;
use toric_game::game::{
    play_rounds, win_probability_quantum_exact, BackendKind, QuantumBackend, WinStats,
};
use toric_game::lattice::{instance_family, EnumerateOptions, GameDirection, GameInstance, TorusLattice};
use toric_game::stabilizer::prepare_cat_tableau_for;
use toric_game::statevector::{prepare_cat_dense_for, DenseState};

#[test]
fn search_agrees_with_direct_enumeration() {
    for (teams, m, players) in [(2, 2, 2), (3, 2, 3), (3, 2, 5), (4, 2, 4), (2, 3, 3), (3, 3, 3), (3, 3, 4)] {
        let fast = optimal_classical(teams, m, players).unwrap();
        assert_eq!(
            fast.probability,
            common::boyer_optimum(teams, m, players),
            "T={teams} M={m} players={players}"
        );
    }
}

#[test]
fn cat_wins_every_instance_of_the_deformed_family() {
    let l = TorusLattice::new(3, 2).unwrap();
    let family = instance_family(
        &l,
        &[2, 3],
        &EnumerateOptions {
            modulus: 2,
            deformations: true,
        },
    )
    .unwrap();
    let cat = prepare_cat_dense_for(&l, 2, GameDirection::Vertical).unwrap();
    for inst in &family.instances {
        let p = win_probability_quantum_exact(inst, &cat).unwrap();
        assert!((p - 1.0).abs() < 1e-9, "{}", inst.to_json());
        assert!((lemma1_probability(&cat, inst).unwrap() - p).abs() < 1e-9);
    }
}

#[test]
fn tableau_and_dense_cats_coincide() {
    for (lx, ly) in [(2, 2), (3, 2), (2, 3), (3, 3)] {
        let l = TorusLattice::new(lx, ly).unwrap();
        for dir in [GameDirection::Vertical, GameDirection::Horizontal] {
            let t = prepare_cat_tableau_for(&l, dir, 1).unwrap().to_dense().unwrap();
            let d = prepare_cat_dense_for(&l, 2, dir).unwrap();
            let f = t.fidelity(&d).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "{lx}x{ly} {dir:?}: {f}");
        }
    }
}

#[test]
fn lemma1_matches_direct_on_random_states() {
    let l = TorusLattice::new(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for cols in [vec![0, 1], vec![0, 2], vec![0, 1, 2]] {
        let inst = GameInstance::straight(l, 2, &cols, 1).unwrap();
        for _ in 0..5 {
            let psi = DenseState::random(2, l.num_bonds(), &mut rng).unwrap();
            let a = lemma1_probability(&psi, &inst).unwrap();
            let b = win_probability_quantum_exact(&inst, &psi).unwrap();
            assert!((a - b).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&b));
        }
    }
}

#[test]
fn both_backends_win_sampled_rounds() {
    let l = TorusLattice::new(4, 2).unwrap();
    let inst = GameInstance::straight(l, 2, &[0, 1, 3], 1).unwrap();
    for kind in [BackendKind::Tableau, BackendKind::Dense] {
        let backend = QuantumBackend::cat(&inst, kind).unwrap();
        let results = play_rounds(&inst, &backend, 2_000, 5).unwrap();
        let stats = WinStats::from_results(&results);
        assert_eq!(stats.losses(), 0, "{kind:?}");
        assert_eq!(stats.per_input.len(), 4);
        assert_eq!(results, play_rounds(&inst, &backend, 2_000, 5).unwrap());
    }
}

#[test]
fn instance_json_round_trip() {
    let l = TorusLattice::new(3, 3).unwrap();
    let family = instance_family(
        &l,
        &[3],
        &EnumerateOptions {
            modulus: 3,
            deformations: true,
        },
    )
    .unwrap();
    assert!(family.description.dual_deformed + family.description.team_deformed > 0);
    for inst in &family.instances {
        let back = GameInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.to_json(), inst.to_json());
    }
}
