use agdt_core::mst::tree_score;
use agdt_core::treebank::validate_heads;
use agdt_core::{decode, ScoreMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix() -> impl Strategy<Value = ScoreMatrix> {
    (1usize..10).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, n + 1), n).prop_map(|mut rows| {
            for (i, row) in rows.iter_mut().enumerate() {
                row[i + 1] = f64::NEG_INFINITY;
            }
            ScoreMatrix::from_rows(rows).unwrap()
        })
    })
}

/// A uniformly shuffled chain below a random root child, with random
/// extra attachments to earlier chain members.
fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.random_range(0..k)];
    }
    heads
}

proptest! {
    #[test]
    fn decoded_trees_are_valid_and_beat_random_trees(m in matrix(), seed in any::<u64>()) {
        let single = decode(&m, true).unwrap();
        let multi = decode(&m, false).unwrap();
        prop_assert!(validate_heads(&single.heads, true).is_ok());
        prop_assert!(validate_heads(&multi.heads, false).is_ok());
        prop_assert_eq!(tree_score(&m, &single.heads), single.total_score);
        prop_assert!(multi.total_score >= single.total_score);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let heads = random_tree(&mut rng, m.n());
            prop_assert!(tree_score(&m, &heads) <= single.total_score + 1e-9);
        }
    }

    #[test]
    fn shifting_a_row_shifts_the_score(m in matrix(), row in 0usize..10, c in -5.0f64..5.0) {
        let before = decode(&m, true).unwrap();
        let dep = row % m.n() + 1;
        let mut shifted = m.clone();
        for h in 0..=m.n() {
            if h != dep {
                shifted.set(dep, h, m.get(dep, h) + c);
            }
        }
        let after = decode(&shifted, true).unwrap();
        prop_assert!((after.total_score - before.total_score - c).abs() < 1e-9);
    }
}
