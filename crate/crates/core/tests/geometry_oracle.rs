mod common;

use common::oracles::geometry_oracle;
use common::*;
use embedding_debias::geometry::compute_gender_subspace;
use embedding_debias::PairRole;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn subspace_matches_dense_eigendecomposition() {
    let start = std::time::Instant::now();
    geometry_oracle(100, 7).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn orientation_follows_second_word() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let e = random_unit_set(&mut rng, 12, 6);
        let defining = adjacent_pairs(6, PairRole::Defining);
        let b = compute_gender_subspace(&e, &defining, 1).unwrap();
        let dir = b.direction().unwrap();
        let mean: f64 = defining
            .pairs
            .iter()
            .map(|(a, c)| dot(e.vector(c).unwrap(), dir) - dot(e.vector(a).unwrap(), dir))
            .sum::<f64>();
        assert!(mean >= 0.0);
    }
}
