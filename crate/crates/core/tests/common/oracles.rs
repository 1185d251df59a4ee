//! Independent reference computations shared by the focused tests and the
//! acceptance harness. Each check returns a short description on success.

use super::*;
use embedding_debias::classifier::{ClassifierModel, Example, ProbeModel};
use embedding_debias::fairness::{build_report, Prediction};
use embedding_debias::geometry::compute_gender_subspace;
use embedding_debias::PairRole;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub type Check = Result<String, String>;

/// Dense scatter `1/2 sum (w - mu)(w - mu)^T`, eigenpairs by decreasing
/// eigenvalue.
pub fn dense_eigen(pairs: &[(Vec<f64>, Vec<f64>)], d: usize) -> Vec<(f64, Vec<f64>)> {
    let mut s = DMatrix::<f64>::zeros(d, d);
    for (a, b) in pairs {
        let mu: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
        for w in [a, b] {
            let c = DMatrix::from_iterator(d, 1, w.iter().zip(&mu).map(|(x, m)| x - m));
            s += &c * c.transpose() * 0.5;
        }
    }
    let eig = SymmetricEigen::new(s);
    let mut out: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors.column(j).iter().copied().collect()))
        .collect();
    out.sort_by(|x, y| y.0.total_cmp(&x.0));
    out
}

pub fn geometry_oracle(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < instances {
        let d = rng.random_range(2..=10);
        let n_pairs = rng.random_range(1..=20);
        let e = random_unit_set(&mut rng, 2 * n_pairs, d);
        let defining = adjacent_pairs(n_pairs, PairRole::Defining);
        let vectors: Vec<(Vec<f64>, Vec<f64>)> = defining
            .pairs
            .iter()
            .map(|(a, b)| (e.vector(a).unwrap().to_vec(), e.vector(b).unwrap().to_vec()))
            .collect();
        let dense = dense_eigen(&vectors, d);
        let k = rng.random_range(1..=d.min(n_pairs).min(3));
        // Eigenvectors are only identifiable with a gap below them.
        let next = |i: usize| dense.get(i + 1).map_or(0.0, |p| p.0);
        if !(0..k).all(|i| dense[i].0 - next(i) > 1e-3 * dense[0].0.max(1e-12)) {
            continue;
        }
        let b = compute_gender_subspace(&e, &defining, k).map_err(|err| err.to_string())?;
        for i in 0..k {
            let (lambda, v) = &dense[i];
            let de = (b.eigenvalues()[i] - lambda).abs();
            let sign = if dot(&b.basis()[i], v) < 0.0 { -1.0 } else { 1.0 };
            let dv = b.basis()[i].iter().zip(v).map(|(x, y)| (x - sign * y).abs()).fold(0.0, f64::max);
            worst = worst.max(de).max(dv);
            if de >= 1e-8 || dv >= 1e-8 {
                return Err(format!("instance {checked} (d={d}, pairs={n_pairs}, k={k}) direction {i}: eigenvalue err {de:e}, vector err {dv:e}"));
            }
        }
        checked += 1;
    }
    Ok(format!("{instances} instances, max error {worst:.1e}"))
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps gradients that are zero
/// up to rounding from dominating.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_classifier(rng: &mut ChaCha8Rng, d: usize, h: usize, c: usize) -> ClassifierModel<f64> {
    let labels = (0..c).map(|i| format!("c{i}")).collect();
    let mut m = ClassifierModel::<f64>::init(d, h, labels, rng.random());
    // Nonzero biases exercise every gradient path.
    for b in m.hidden_bias.iter_mut().chain(m.output_bias.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }
    for a in m.attention.iter_mut() {
        *a *= 3.0;
    }
    m
}

pub fn random_batch(rng: &mut ChaCha8Rng, vocab: usize, classes: usize, n: usize) -> Vec<Example> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..8);
            Example {
                tokens: (0..len).map(|_| rng.random_range(0..vocab)).collect(),
                label: rng.random_range(0..classes),
            }
        })
        .collect()
}

pub fn gradient_check(models: usize, seed: u64) -> Check {
    const STEP: f64 = 1e-5;
    let (d, h, c) = (8, 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for m in 0..models {
        let e = {
            let rows = (0..15).map(|i| (format!("t{i}"), gaussian(&mut rng, d)));
            embedding_debias::embeddings::EmbeddingSet::from_rows(d, rows).unwrap().0
        };
        let model = random_classifier(&mut rng, d, h, c);
        let batch = random_batch(&mut rng, e.len(), c, 6);
        let (_, grad) = model.loss_and_gradient(&e, &batch).map_err(|x| x.to_string())?;
        let analytic: Vec<Vec<f64>> = grad.groups().iter().map(|(_, g)| g.to_vec()).collect();
        for group in 0..5 {
            for j in 0..analytic[group].len() {
                let mut plus = model.clone();
                plus.groups_mut()[group][j] += STEP;
                let mut minus = model.clone();
                minus.groups_mut()[group][j] -= STEP;
                let lp = plus.loss(&e, &batch).unwrap();
                let lm = minus.loss(&e, &batch).unwrap();
                let numeric = (lp - lm) / (2.0 * STEP);
                let err = relative_error(analytic[group][j], numeric);
                worst = worst.max(err);
                if err >= 1e-4 {
                    let name = model.groups()[group].0;
                    return Err(format!("classifier {m} {name}[{j}]: analytic {} numeric {numeric} (rel {err:.2e})", analytic[group][j]));
                }
            }
        }

        let xs: Vec<Vec<f64>> = (0..10).map(|_| gaussian(&mut rng, h)).collect();
        let ys: Vec<bool> = (0..10).map(|_| rng.random()).collect();
        let probe = ProbeModel {
            weights: gaussian(&mut rng, h),
            bias: rng.random_range(-1.0..1.0),
            feature_mean: vec![0.0; h],
            feature_scale: vec![1.0; h],
        };
        let (_, gw, gb) = probe.loss_and_gradient(&xs, &ys);
        let loss_at = |p: &ProbeModel<f64>| p.loss_and_gradient(&xs, &ys).0;
        for j in 0..=h {
            let (mut plus, mut minus) = (probe.clone(), probe.clone());
            if j < h {
                plus.weights[j] += STEP;
                minus.weights[j] -= STEP;
            } else {
                plus.bias += STEP;
                minus.bias -= STEP;
            }
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * STEP);
            let analytic = if j < h { gw[j] } else { gb };
            let err = relative_error(analytic, numeric);
            worst = worst.max(err);
            if err >= 1e-4 {
                return Err(format!("probe {m} parameter {j}: analytic {analytic} numeric {numeric} (rel {err:.2e})"));
            }
        }
    }
    Ok(format!("{models} models, max relative error {worst:.1e}"))
}

pub fn random_predictions(rng: &mut ChaCha8Rng) -> Vec<Prediction> {
    let n = rng.random_range(1..=1000);
    let occs = rng.random_range(1..=10);
    (0..n)
        .map(|i| Prediction {
            id: format!("p{i}"),
            true_occupation: format!("occ{}", rng.random_range(0..occs)),
            predicted_occupation: format!("occ{}", rng.random_range(0..occs)),
            gender: if rng.random::<bool>() { embedding_debias::Gender::Female } else { embedding_debias::Gender::Male },
        })
        .collect()
}

/// Per-occupation brute-force tally: `(occupation, frac_female, [tpr_f,
/// tpr_m, tnr_f, tnr_m])`, sorted the same way as the report, plus
/// accuracy.
#[allow(clippy::type_complexity)]
pub fn brute_force_tally(preds: &[Prediction]) -> (Vec<(String, f64, [Option<f64>; 4])>, f64) {
    // counts[occ] = [[tp, pos], [tn, neg]] per gender slot
    let mut counts: BTreeMap<String, [[usize; 4]; 2]> = BTreeMap::new();
    for p in preds {
        counts.entry(p.true_occupation.clone()).or_default();
    }
    for occ in counts.clone().keys() {
        for p in preds {
            let g = if p.gender.is_female() { 0 } else { 1 };
            let c = counts.get_mut(occ).unwrap();
            if &p.true_occupation == occ {
                c[g][1] += 1;
                if &p.predicted_occupation == occ {
                    c[g][0] += 1;
                }
            } else {
                c[g][3] += 1;
                if &p.predicted_occupation != occ {
                    c[g][2] += 1;
                }
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let mut rows: Vec<(String, f64, [Option<f64>; 4])> = counts
        .into_iter()
        .map(|(occ, c)| {
            let frac = c[0][1] as f64 / (c[0][1] + c[1][1]) as f64;
            let rates = [ratio(c[0][0], c[0][1]), ratio(c[1][0], c[1][1]), ratio(c[0][2], c[0][3]), ratio(c[1][2], c[1][3])];
            (occ, frac, rates)
        })
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let correct = preds.iter().filter(|p| p.true_occupation == p.predicted_occupation).count();
    (rows, correct as f64 / preds.len() as f64)
}

fn gap(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    }
}

pub fn fairness_oracle(sets: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..sets {
        let preds = random_predictions(&mut rng);
        let report = build_report(&preds).map_err(|e| e.to_string())?;
        let (rows, accuracy) = brute_force_tally(&preds);
        if report.rows.len() != rows.len() {
            return Err(format!("set {s}: {} rows vs {}", report.rows.len(), rows.len()));
        }
        let (mut tpr_sum, mut tpr_n, mut tnr_sum, mut tnr_n, mut undefined) = (0.0, 0, 0.0, 0, 0);
        for (got, (occ, frac, r)) in report.rows.iter().zip(&rows) {
            let want_tpr = gap(r[0], r[1]);
            let want_tnr = gap(r[2], r[3]);
            let same = &got.occupation == occ
                && got.frac_female == *frac
                && [got.tpr_f, got.tpr_m, got.tnr_f, got.tnr_m] == *r
                && got.tpr_gap == want_tpr
                && got.tnr_gap == want_tnr;
            if !same {
                return Err(format!("set {s}: row {got:?} vs ({occ}, {frac}, {r:?})"));
            }
            match want_tpr {
                Some(g) => {
                    tpr_sum += g.abs();
                    tpr_n += 1;
                }
                None => undefined += 1,
            }
            match want_tnr {
                Some(g) => {
                    tnr_sum += g.abs();
                    tnr_n += 1;
                }
                None => undefined += 1,
            }
        }
        let mean = |s: f64, n: usize| if n == 0 { None } else { Some(s / n as f64) };
        let agg = &report.aggregate;
        if agg.accuracy != accuracy
            || agg.mean_abs_tpr_gap != mean(tpr_sum, tpr_n)
            || agg.mean_abs_tnr_gap != mean(tnr_sum, tnr_n)
            || agg.undefined_gap_count != undefined
        {
            return Err(format!("set {s}: aggregate {agg:?} disagrees with tally"));
        }
    }
    Ok(format!("{sets} random prediction sets match exactly"))
}

/// Four female and four male nurses: 3/4 vs 2/4 correct.
pub fn fairness_hand_case() -> Check {
    use embedding_debias::Gender::{Female, Male};
    let p = |i: usize, pred: &str, g| Prediction {
        id: format!("h{i}"),
        true_occupation: "nurse".into(),
        predicted_occupation: pred.into(),
        gender: g,
    };
    let preds = vec![
        p(0, "nurse", Female),
        p(1, "nurse", Female),
        p(2, "nurse", Female),
        p(3, "surgeon", Female),
        p(4, "nurse", Male),
        p(5, "nurse", Male),
        p(6, "surgeon", Male),
        p(7, "surgeon", Male),
    ];
    let report = build_report(&preds).map_err(|e| e.to_string())?;
    let row = &report.rows[0];
    if row.tpr_gap == Some(0.25) && report.aggregate.mean_abs_tpr_gap == Some(0.25) {
        Ok("hand case gap 0.25".into())
    } else {
        Err(format!("hand case gave {:?}", row.tpr_gap))
    }
}
