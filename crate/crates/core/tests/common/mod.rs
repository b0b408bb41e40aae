//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use num_rational::Ratio;

/// Direct enumeration of the Boyer game: every player on the dual loop gets
/// its own strategy (tables for the `teams` players who see an input,
/// constants for the rest) with no symmetry reduction. Inputs are all of
/// `Z_M^T`, filtered by the promise.
pub fn boyer_optimum(teams: usize, modulus: u32, players: usize) -> Ratio<i64> {
    assert!(players >= teams);
    let m = modulus as u64;
    let mut inputs = Vec::new();
    for code in 0..m.pow(teams as u32) {
        let a: Vec<u64> = (0..teams).map(|i| (code / m.pow(i as u32)) % m).collect();
        let s: u64 = a.iter().sum();
        if s % m == 0 {
            inputs.push((a, (s / m) % m));
        }
    }
    let per_table = m.pow(modulus);
    let extra = (players - teams) as u32;
    let mut best = 0usize;
    let mut tables = vec![0u64; teams];
    loop {
        let answer = |t: usize, a: u64| (tables[t] / m.pow(a as u32)) % m;
        for consts in 0..m.pow(extra) {
            let c: u64 = (0..extra).map(|i| (consts / m.pow(i)) % m).sum();
            let wins = inputs
                .iter()
                .filter(|(a, r)| {
                    let s: u64 = a.iter().enumerate().map(|(t, &v)| answer(t, v)).sum::<u64>() + c;
                    s % m == *r
                })
                .count();
            best = best.max(wins);
        }
        let mut i = 0;
        loop {
            if i == teams {
                return Ratio::new(best as i64, inputs.len() as i64);
            }
            tables[i] += 1;
            if tables[i] == per_table {
                tables[i] = 0;
                i += 1;
            } else {
                break;
            }
        }
    }
}
