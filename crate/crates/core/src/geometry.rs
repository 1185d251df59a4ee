//! Gender subspace identification and signed gender components.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Biography, Gender};
use crate::embeddings::{EmbeddingSet, GenderWordList, WordPairList};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::Scalar;

/// How the sign of each direction was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// The mean of `<second - first, b>` over the defining pairs is positive,
    /// so with (male, female) pairs female-leaning words project positively.
    SecondWordPositive,
    /// The pair mean was exactly zero; the first nonzero coordinate is
    /// made positive instead.
    FirstCoordinatePositive,
}

/// Orthonormal basis of the gender subspace, one direction per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GenderSubspace<T> {
    basis: Vec<Vec<T>>,
    /// Eigenvalues of the pair scatter matrix belonging to each direction.
    eigenvalues: Vec<T>,
    orientation: Vec<Orientation>,
}

impl<T: Scalar> GenderSubspace<T> {
    /// Wraps a caller-supplied single direction, normalizing it.
    pub fn from_direction(direction: &[T]) -> Result<Self> {
        let n = linalg::norm(direction);
        if n == T::zero() {
            return Err(Error::Data("gender direction is the zero vector".into()));
        }
        let b: Vec<T> = direction.iter().map(|&x| x / n).collect();
        Ok(GenderSubspace {
            basis: vec![b],
            eigenvalues: vec![T::zero()],
            orientation: vec![Orientation::SecondWordPositive],
        })
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, Vec::len)
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn orientation(&self) -> &[Orientation] {
        &self.orientation
    }

    /// The single gender direction; errors unless `k == 1`.
    pub fn direction(&self) -> Result<&[T]> {
        match self.basis.as_slice() {
            [b] => Ok(b),
            _ => Err(Error::RequiresOneDirection(self.k())),
        }
    }

    /// Component of `w` inside the subspace.
    pub fn project(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); w.len()];
        for b in &self.basis {
            linalg::axpy(dot(w, b), b, &mut out);
        }
        out
    }

    /// Component of `w` orthogonal to the subspace.
    pub fn reject(&self, w: &[T]) -> Vec<T> {
        let mut out = w.to_vec();
        for b in &self.basis {
            linalg::axpy(-dot(w, b), b, &mut out);
        }
        out
    }
}

/// Top-`k` principal directions of the defining-pair scatter
/// `1/2 sum_i sum_{w in D_i} (w - mu_i)^T (w - mu_i)`.
///
/// The centered pair vectors are stacked into `C` and the directions are
/// the right singular vectors of `C`, so the `d x d` scatter is never built.
/// Pairs that are out of vocabulary, touch a zero vector, or have identical
/// members contribute nothing and are skipped.
pub fn compute_gender_subspace<T: Scalar>(
    e: &EmbeddingSet<T>,
    defining: &WordPairList,
    k: usize,
) -> Result<GenderSubspace<T>> {
    if k == 0 || k > e.dim() {
        return Err(Error::Config(format!(
            "subspace size k={k} must be in 1..={}",
            e.dim()
        )));
    }
    let mut centered = Vec::new();
    let mut diffs = Vec::new();
    for (a, b) in &defining.pairs {
        let (Some(wa), Some(wb)) = (e.vector(a), e.vector(b)) else {
            continue;
        };
        if linalg::norm(wa) == T::zero() || linalg::norm(wb) == T::zero() {
            continue;
        }
        let diff: Vec<T> = wb.iter().zip(wa).map(|(&y, &x)| y - x).collect();
        if linalg::norm(&diff) <= T::epsilon() {
            continue;
        }
        let half = T::of(0.5);
        // w - mu for the two members of the pair is -diff/2 and +diff/2.
        centered.push(diff.iter().map(|&x| -x * half).collect::<Vec<T>>());
        centered.push(diff.iter().map(|&x| x * half).collect::<Vec<T>>());
        diffs.push(diff);
    }
    if diffs.is_empty() {
        return Err(Error::NoUsablePairs);
    }
    let svd = linalg::right_singular_vectors(&centered);
    if svd.values.len() < k {
        return Err(Error::RankDeficient {
            requested: k,
            available: svd.values.len(),
        });
    }

    let half = T::of(0.5);
    let mut basis = Vec::with_capacity(k);
    let mut orientation = Vec::with_capacity(k);
    for mut b in svd.vectors.into_iter().take(k) {
        let mean = diffs.iter().map(|d| dot(d, &b)).sum::<T>() / T::of(diffs.len() as f64);
        let flip = if mean != T::zero() {
            orientation.push(Orientation::SecondWordPositive);
            mean < T::zero()
        } else {
            orientation.push(Orientation::FirstCoordinatePositive);
            b.iter().find(|x| **x != T::zero()).is_some_and(|x| *x < T::zero())
        };
        if flip {
            linalg::scale(-T::one(), &mut b);
        }
        basis.push(b);
    }
    let eigenvalues = svd.values.iter().take(k).map(|&s| s * s * half).collect();
    Ok(GenderSubspace {
        basis,
        eigenvalues,
        orientation,
    })
}

/// Signed projection of a word on the gender direction.
pub fn gender_component<T: Scalar>(
    e: &EmbeddingSet<T>,
    word: &str,
    subspace: &GenderSubspace<T>,
) -> Result<T> {
    let b = subspace.direction()?;
    let w = e
        .vector(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    Ok(dot(w, b))
}

/// Which tokens of a biography enter its gender component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentFilter {
    All,
    GenderSpecificOnly,
    NeutralOnly,
}

impl ComponentFilter {
    pub const ALL: [ComponentFilter; 3] = [
        ComponentFilter::All,
        ComponentFilter::GenderSpecificOnly,
        ComponentFilter::NeutralOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComponentFilter::All => "all",
            ComponentFilter::GenderSpecificOnly => "gender_specific_only",
            ComponentFilter::NeutralOnly => "neutral_only",
        }
    }

    fn keeps(self, word: &str, gender_words: &GenderWordList) -> bool {
        match self {
            ComponentFilter::All => true,
            ComponentFilter::GenderSpecificOnly => gender_words.contains(word),
            ComponentFilter::NeutralOnly => !gender_words.contains(word),
        }
    }
}

impl fmt::Display for ComponentFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComponentFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "all" => Ok(ComponentFilter::All),
            "gender_specific_only" | "gender_specific" => Ok(ComponentFilter::GenderSpecificOnly),
            "neutral_only" | "neutral" => Ok(ComponentFilter::NeutralOnly),
            _ => Err(Error::Config(format!("unknown component filter {s:?}"))),
        }
    }
}

/// Mean gender component over the retained in-vocabulary tokens, counting
/// every occurrence.
pub fn biography_gender_component<T: Scalar, S: AsRef<str>>(
    e: &EmbeddingSet<T>,
    tokens: &[S],
    subspace: &GenderSubspace<T>,
    filter: ComponentFilter,
    gender_words: &GenderWordList,
) -> Result<T> {
    let b = subspace.direction()?;
    let mut sum = T::zero();
    let mut count = 0usize;
    for tok in tokens {
        let tok = tok.as_ref();
        if !filter.keeps(tok, gender_words) {
            continue;
        }
        if let Some(w) = e.vector(tok) {
            sum = sum + dot(w, b);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(sum / T::of(count as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count_female: usize,
    pub count_male: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiographyComponent {
    pub id: String,
    pub component: f64,
    pub gender: Gender,
}

/// Distribution of biography gender components, split by subject gender.
#[derive(Debug, Clone, PartialEq)]
pub struct GenderComponentStats {
    pub filter: ComponentFilter,
    pub per_biography: Vec<BiographyComponent>,
    /// `None` when no biography of that gender survived filtering.
    pub mean_female: Option<f64>,
    pub mean_male: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    pub excluded_count: usize,
}

/// JSON sidecar written next to the histogram CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSidecar {
    pub mean_female: Option<f64>,
    pub mean_male: Option<f64>,
    pub excluded_count: usize,
    pub filter: ComponentFilter,
}

impl GenderComponentStats {
    /// Fraction of biographies whose sign relative to `threshold` matches
    /// their gender (female above, male below).
    pub fn separation_accuracy(&self, threshold: f64) -> f64 {
        if self.per_biography.is_empty() {
            return f64::NAN;
        }
        let correct = self
            .per_biography
            .iter()
            .filter(|b| match b.gender {
                Gender::Female => b.component > threshold,
                Gender::Male => b.component < threshold,
            })
            .count();
        correct as f64 / self.per_biography.len() as f64
    }

    /// Standard error of `mean_female - mean_male`.
    pub fn mean_difference_stderr(&self) -> Option<f64> {
        let var_and_n = |g: Gender| {
            let xs: Vec<f64> = self
                .per_biography
                .iter()
                .filter(|b| b.gender == g)
                .map(|b| b.component)
                .collect();
            if xs.len() < 2 {
                return None;
            }
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            Some(v / n)
        };
        Some((var_and_n(Gender::Female)? + var_and_n(Gender::Male)?).sqrt())
    }

    pub fn sidecar(&self) -> ComponentSidecar {
        ComponentSidecar {
            mean_female: self.mean_female,
            mean_male: self.mean_male,
            excluded_count: self.excluded_count,
            filter: self.filter,
        }
    }

    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_low,bin_high,count_female,count_male")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{},{}", b.bin_low, b.bin_high, b.count_female, b.count_male)?;
        }
        w.flush()
    }
}

/// Histogram and per-gender means of biography gender components.
///
/// Bins are `bins` equal-width intervals over the observed `[min, max]`;
/// the last bin is closed on the right.
pub fn gender_component_distribution<T: Scalar>(
    e: &EmbeddingSet<T>,
    bios: &[Biography],
    subspace: &GenderSubspace<T>,
    filter: ComponentFilter,
    gender_words: &GenderWordList,
    bins: usize,
) -> Result<GenderComponentStats> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if bios.is_empty() {
        return Err(Error::Data("no biographies to analyse".into()));
    }
    subspace.direction()?;
    let mut per_biography = Vec::with_capacity(bios.len());
    let mut excluded_count = 0;
    for bio in bios {
        match biography_gender_component(e, &bio.tokens, subspace, filter, gender_words) {
            Ok(c) => per_biography.push(BiographyComponent {
                id: bio.id.clone(),
                component: c.as_f64(),
                gender: bio.gender,
            }),
            Err(Error::EmptySelection) => excluded_count += 1,
            Err(other) => return Err(other),
        }
    }
    if per_biography.is_empty() {
        return Err(Error::Data(format!(
            "every biography is empty under filter {filter}"
        )));
    }

    let mean_of = |g: Gender| {
        let (sum, n) = per_biography
            .iter()
            .filter(|b| b.gender == g)
            .fold((0.0, 0usize), |(s, n), b| (s + b.component, n + 1));
        (n > 0).then(|| sum / n as f64)
    };
    let mean_female = mean_of(Gender::Female);
    let mean_male = mean_of(Gender::Male);

    let lo = per_biography.iter().map(|b| b.component).fold(f64::INFINITY, f64::min);
    let hi = per_biography.iter().map(|b| b.component).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            bin_low: lo + width * i as f64,
            bin_high: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count_female: 0,
            count_male: 0,
        })
        .collect();
    for b in &per_biography {
        let slot = if width > 0.0 {
            (((b.component - lo) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        match b.gender {
            Gender::Female => histogram[slot].count_female += 1,
            Gender::Male => histogram[slot].count_male += 1,
        }
    }

    Ok(GenderComponentStats {
        filter,
        per_biography,
        mean_female,
        mean_male,
        histogram,
        excluded_count,
    })
}
