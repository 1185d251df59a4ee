//! Embedding transforms that remove or reshape the gender component, and
//! the token-scrubbing text baseline.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingSet, GenderWordList, WordPairList};
use crate::error::{Error, Result};
use crate::geometry::GenderSubspace;
use crate::linalg::{self, dot};
use crate::Scalar;

/// Below this norm a vector is treated as zero when it has to be divided by.
pub const DEGENERATE_NORM: f64 = 1e-9;

/// Experimental condition applied before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DebiasMode {
    None,
    Hard,
    Strong,
    ProjectOnly,
    EqualizeOnly,
    /// Text-level: gender tokens are removed, embeddings stay as they are.
    Scrub,
}

impl DebiasMode {
    pub const ALL: [DebiasMode; 6] = [
        DebiasMode::None,
        DebiasMode::Hard,
        DebiasMode::Strong,
        DebiasMode::ProjectOnly,
        DebiasMode::EqualizeOnly,
        DebiasMode::Scrub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DebiasMode::None => "none",
            DebiasMode::Hard => "hard",
            DebiasMode::Strong => "strong",
            DebiasMode::ProjectOnly => "project-only",
            DebiasMode::EqualizeOnly => "equalize-only",
            DebiasMode::Scrub => "scrub",
        }
    }

    pub fn scrubs_text(self) -> bool {
        self == DebiasMode::Scrub
    }
}

impl fmt::Display for DebiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DebiasMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('_', "-");
        DebiasMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown debias mode {s:?}")))
    }
}

/// What a transform did, including everything it had to skip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub neutralized: usize,
    pub neutral_oov: usize,
    /// Words whose vector lies (numerically) inside the subspace.
    pub skipped_parallel: Vec<String>,
    pub equalized_sets: usize,
    /// Equality sets with fewer than two in-vocabulary members.
    pub skipped_sets_oov: usize,
    /// Sets that could not be equalized (zero mean or zero orthogonal mean).
    pub skipped_sets_degenerate: Vec<Vec<String>>,
    /// Members with no in-subspace deviation from the set mean.
    pub degenerate_members: Vec<String>,
}

impl TransformReport {
    fn merge(mut self, other: TransformReport) -> Self {
        self.neutralized += other.neutralized;
        self.neutral_oov += other.neutral_oov;
        self.skipped_parallel.extend(other.skipped_parallel);
        self.equalized_sets += other.equalized_sets;
        self.skipped_sets_oov += other.skipped_sets_oov;
        self.skipped_sets_degenerate.extend(other.skipped_sets_degenerate);
        self.degenerate_members.extend(other.degenerate_members);
        self
    }

    /// Words that were left as they were because of a degenerate geometry.
    pub fn skipped_words(&self) -> BTreeSet<&str> {
        self.skipped_parallel
            .iter()
            .chain(self.degenerate_members.iter())
            .chain(self.skipped_sets_degenerate.iter().flatten())
            .map(String::as_str)
            .collect()
    }
}

fn unit<T: Scalar>(v: &[T]) -> Option<Vec<T>> {
    let n = linalg::norm(v);
    (n >= T::of(DEGENERATE_NORM)).then(|| v.iter().map(|&x| x / n).collect())
}

fn neutralize_indices<T: Scalar>(
    out: &mut EmbeddingSet<T>,
    indices: impl IntoIterator<Item = usize>,
    subspace: &GenderSubspace<T>,
    report: &mut TransformReport,
) {
    for i in indices {
        match unit(&subspace.reject(out.row(i))) {
            Some(v) => {
                out.row_mut(i).copy_from_slice(&v);
                report.neutralized += 1;
            }
            None => report.skipped_parallel.push(out.word(i).to_string()),
        }
    }
}

/// Removes the subspace component of every word in `neutral` and rescales
/// it to unit length. Other words are copied unchanged.
pub fn neutralize<T: Scalar, S: AsRef<str>>(
    e: &EmbeddingSet<T>,
    neutral: impl IntoIterator<Item = S>,
    subspace: &GenderSubspace<T>,
) -> (EmbeddingSet<T>, TransformReport) {
    let mut report = TransformReport::default();
    let mut indices = Vec::new();
    let mut seen = BTreeSet::new();
    for w in neutral {
        match e.index_of(w.as_ref()) {
            Some(i) => {
                if seen.insert(i) {
                    indices.push(i);
                }
            }
            None => report.neutral_oov += 1,
        }
    }
    let mut out = e.clone();
    neutralize_indices(&mut out, indices, subspace, &mut report);
    (out, report)
}

/// In-vocabulary members of each set, deduplicated, or `None` when fewer
/// than two remain.
fn usable_members<T: Scalar>(e: &EmbeddingSet<T>, set: &[String]) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = Vec::new();
    for w in set {
        if let Some(i) = e.index_of(w) {
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
    }
    (idx.len() >= 2).then_some(idx)
}

fn mean_of<T: Scalar>(e: &EmbeddingSet<T>, members: &[usize]) -> Vec<T> {
    let mut mu = vec![T::zero(); e.dim()];
    for &i in members {
        linalg::axpy(T::one(), e.row(i), &mut mu);
    }
    linalg::scale(T::one() / T::of(members.len() as f64), &mut mu);
    mu
}

/// Re-embeds each equality set so its members share the orthogonal part
/// `nu` of the set mean and differ only inside the subspace:
/// `w <- nu + sqrt(1 - |nu|^2) * (w_B - mu_B) / |w_B - mu_B|`.
///
/// All sets read from `e`; if a word sits in several sets the last one wins.
pub fn equalize<T: Scalar>(
    e: &EmbeddingSet<T>,
    sets: &[Vec<String>],
    subspace: &GenderSubspace<T>,
) -> (EmbeddingSet<T>, TransformReport) {
    let mut report = TransformReport::default();
    let mut out = e.clone();
    for set in sets {
        let Some(members) = usable_members(e, set) else {
            report.skipped_sets_oov += 1;
            continue;
        };
        let mu = mean_of(e, &members);
        let nu = subspace.reject(&mu);
        let mu_in = subspace.project(&mu);
        let nu_norm = linalg::norm(&nu);
        let height = (T::one() - nu_norm * nu_norm).max(T::zero()).sqrt();
        for &i in &members {
            let w_in = subspace.project(e.row(i));
            let dev: Vec<T> = w_in.iter().zip(&mu_in).map(|(&a, &b)| a - b).collect();
            let row = match unit(&dev) {
                Some(dir) => nu.iter().zip(&dir).map(|(&n, &d)| n + height * d).collect(),
                None => {
                    report.degenerate_members.push(e.word(i).to_string());
                    match unit(&nu) {
                        Some(v) => v,
                        None => continue,
                    }
                }
            };
            out.row_mut(i).copy_from_slice(&row);
        }
        report.equalized_sets += 1;
    }
    (out, report)
}

/// Neutralize the neutral words, then equalize the equality sets.
pub fn hard_debias<T: Scalar, S: AsRef<str>>(
    e: &EmbeddingSet<T>,
    neutral: impl IntoIterator<Item = S>,
    sets: &[Vec<String>],
    subspace: &GenderSubspace<T>,
) -> (EmbeddingSet<T>, TransformReport) {
    let (neutralized, r1) = neutralize(e, neutral, subspace);
    let (out, r2) = equalize(&neutralized, sets, subspace);
    (out, r1.merge(r2))
}

/// Neutralize the whole vocabulary, then collapse every equality set onto
/// the unit vector along the orthogonal part of its original mean.
pub fn strong_debias<T: Scalar>(
    e: &EmbeddingSet<T>,
    sets: &[Vec<String>],
    subspace: &GenderSubspace<T>,
) -> (EmbeddingSet<T>, TransformReport) {
    let (mut out, mut report) = project_only(e, subspace);
    for set in sets {
        let Some(members) = usable_members(e, set) else {
            report.skipped_sets_oov += 1;
            continue;
        };
        let nu = subspace.reject(&mean_of(e, &members));
        match unit(&nu) {
            Some(v) => {
                for &i in &members {
                    out.row_mut(i).copy_from_slice(&v);
                }
                report.equalized_sets += 1;
            }
            None => report
                .skipped_sets_degenerate
                .push(members.iter().map(|&i| e.word(i).to_string()).collect()),
        }
    }
    (out, report)
}

/// Neutralize the whole vocabulary without any equalization.
pub fn project_only<T: Scalar>(
    e: &EmbeddingSet<T>,
    subspace: &GenderSubspace<T>,
) -> (EmbeddingSet<T>, TransformReport) {
    let mut report = TransformReport::default();
    let mut out = e.clone();
    neutralize_indices(&mut out, 0..e.len(), subspace, &mut report);
    (out, report)
}

/// Replaces both members of every pair by their unit-length mean.
pub fn equalize_only<T: Scalar>(
    e: &EmbeddingSet<T>,
    pairs: &WordPairList,
) -> (EmbeddingSet<T>, TransformReport) {
    let mut report = TransformReport::default();
    let mut out = e.clone();
    for (a, b) in &pairs.pairs {
        let (Some(ia), Some(ib)) = (e.index_of(a), e.index_of(b)) else {
            report.skipped_sets_oov += 1;
            continue;
        };
        let mu = mean_of(e, &[ia, ib]);
        match unit(&mu) {
            Some(v) => {
                out.row_mut(ia).copy_from_slice(&v);
                out.row_mut(ib).copy_from_slice(&v);
                report.equalized_sets += 1;
            }
            None => report
                .skipped_sets_degenerate
                .push(vec![a.clone(), b.clone()]),
        }
    }
    (out, report)
}

/// Drops every token that is an explicit gender indicator. Returns the
/// surviving tokens in order and the number removed.
pub fn scrub_tokens<S: AsRef<str> + Clone>(
    tokens: &[S],
    gender_words: &GenderWordList,
) -> (Vec<S>, usize) {
    let kept: Vec<S> = tokens
        .iter()
        .filter(|t| !gender_words.contains(t.as_ref()))
        .cloned()
        .collect();
    let removed = tokens.len() - kept.len();
    (kept, removed)
}

/// Applies `mode` to a normalized embedding set. Hard debiasing treats every
/// vocabulary word outside `gender_words` as neutral.
pub fn apply_mode<T: Scalar>(
    e: &EmbeddingSet<T>,
    mode: DebiasMode,
    subspace: &GenderSubspace<T>,
    equalize_pairs: &WordPairList,
    gender_words: &GenderWordList,
) -> (EmbeddingSet<T>, TransformReport) {
    let sets = equalize_pairs.as_sets();
    match mode {
        DebiasMode::None | DebiasMode::Scrub => (e.clone(), TransformReport::default()),
        DebiasMode::Hard => {
            let neutral = e.words().iter().filter(|w| !gender_words.contains(w));
            hard_debias(e, neutral, &sets, subspace)
        }
        DebiasMode::Strong => strong_debias(e, &sets, subspace),
        DebiasMode::ProjectOnly => project_only(e, subspace),
        DebiasMode::EqualizeOnly => equalize_only(e, equalize_pairs),
    }
}

/// Largest absolute projection of any row on any subspace direction.
pub fn max_abs_component<T: Scalar>(e: &EmbeddingSet<T>, subspace: &GenderSubspace<T>) -> T {
    e.rows()
        .flat_map(|w| subspace.basis().iter().map(move |b| dot(w, b).abs()))
        .fold(T::zero(), T::max)
}
