//! Hungarian assignment against exhaustive enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vruik_core::matching::{greedy_assign, hungarian_assign, CostMatrix};

/// Exhaustive search over every partial matching on valid pairs.
///
/// Rows are visited in order with columns ascending and "unmatched" last, so
/// the first strict minimum found is the lexicographically smallest optimum.
fn brute_force(cost: &[Vec<f64>], max_cost: f64) -> (Vec<(usize, usize)>, f64) {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    let mut used = vec![false; m];
    let mut chosen: Vec<Option<usize>> = Vec::new();

    fn recurse(
        row: usize,
        cost: &[Vec<f64>],
        max_cost: f64,
        used: &mut Vec<bool>,
        chosen: &mut Vec<Option<usize>>,
        best: &mut Option<(Vec<(usize, usize)>, f64)>,
    ) {
        let n = cost.len();
        let m = used.len();
        if row == n {
            let pairs: Vec<(usize, usize)> = chosen
                .iter()
                .enumerate()
                .filter_map(|(r, c)| c.map(|c| (r, c)))
                .collect();
            let mut total = 0.0;
            for &(r, c) in &pairs {
                total += cost[r][c];
            }
            total += max_cost * (n.max(m) - pairs.len()) as f64;
            if best.as_ref().is_none_or(|(_, b)| total < *b) {
                *best = Some((pairs, total));
            }
            return;
        }
        for c in 0..m {
            if !used[c] && cost[row][c] < max_cost {
                used[c] = true;
                chosen.push(Some(c));
                recurse(row + 1, cost, max_cost, used, chosen, best);
                chosen.pop();
                used[c] = false;
            }
        }
        chosen.push(None);
        recurse(row + 1, cost, max_cost, used, chosen, best);
        chosen.pop();
    }

    recurse(0, cost, max_cost, &mut used, &mut chosen, &mut best);
    let _ = n;
    best.expect("the empty matching is always feasible")
}

fn random_matrix(rng: &mut ChaCha8Rng, quantized: bool) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if quantized {
                        f64::from(rng.random_range(0..=8u32)) / 8.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn hungarian_matches_brute_force_and_dominates_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..1000 {
        let rows = random_matrix(&mut rng, trial % 2 == 1);
        let cost = CostMatrix::from_rows(&rows).unwrap();
        let (pairs, total) = brute_force(&rows, 0.7);
        let h = hungarian_assign(&cost, 0.7).unwrap();
        assert_eq!(h.pairs, pairs, "trial {trial}: {rows:?}");
        assert_eq!(h.total_cost, total, "trial {trial}");
        let g = greedy_assign(&cost, 0.7);
        assert!(h.total_cost <= g.total_cost, "trial {trial}");
        assert!(h.pairs.iter().all(|&(r, c)| rows[r][c] < 0.7));
    }
}

#[test]
fn row_permutation_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let rows = random_matrix(&mut rng, false);
        let cost = CostMatrix::from_rows(&rows).unwrap();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let base = hungarian_assign(&cost, 0.7).unwrap();
        let permuted = hungarian_assign(&cost.permute_rows(&order), 0.7).unwrap();
        let mut mapped: Vec<(usize, usize)> =
            permuted.pairs.iter().map(|&(r, c)| (order[r], c)).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, base.pairs);
    }
}
