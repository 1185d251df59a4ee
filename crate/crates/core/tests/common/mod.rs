#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracles;

use embedding_debias::data::Split;
use embedding_debias::embeddings::EmbeddingSet;
use embedding_debias::{Biography, Gender, PairRole, WordPairList};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `n` random unit vectors named `w0..`.
pub fn random_unit_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingSet<f64> {
    let rows = (0..n).map(|i| (format!("w{i}"), unit(gaussian(rng, d))));
    EmbeddingSet::from_rows(d, rows).unwrap().0
}

/// Pairs `(w{2i}, w{2i+1})` for the first `n` pairs.
pub fn adjacent_pairs(n: usize, role: PairRole) -> WordPairList {
    WordPairList::new(role, (0..n).map(|i| (format!("w{}", 2 * i), format!("w{}", 2 * i + 1))).collect()).unwrap()
}

pub fn bio(id: &str, tokens: &[&str], occupation: &str, gender: Gender, split: Split) -> Biography {
    Biography {
        id: id.into(),
        tokens: tokens.iter().map(|s| s.to_string()).collect(),
        occupation: occupation.into(),
        gender,
        split: Some(split),
    }
}
