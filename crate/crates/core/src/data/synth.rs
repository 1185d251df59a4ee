//! Synthetic biography corpora with a planted gender direction.
//!
//! Gender-specific words sit at `±gender_signal_strength` along a planted
//! unit direction `g`. Neutral words get a noisy component along `g`, and
//! filler words are drawn with a gender-dependent tilt toward words whose
//! component agrees with the subject's gender. Non-defining gendered pairs
//! also differ along a second direction that a one-dimensional subspace
//! fitted on the defining pairs cannot see. Occupations come in confusable
//! pairs that share topic words, so ambiguous biographies can only be
//! resolved through gender cues.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Biography, Gender};
use crate::embeddings::{EmbeddingSet, GenderWordList, PairRole, WordPairList};
use crate::error::{Error, Result};

/// Occupation name and female fraction.
pub type Occupation = (&'static str, f64);

/// Confusable occupation pairs (female-skewed first) with their female
/// fraction from the reference per-occupation table.
pub const OCCUPATION_PAIRS: [(Occupation, Occupation); 14] = [
    (("nurse", 0.915), ("surgeon", 0.154)),
    (("paralegal", 0.866), ("attorney", 0.367)),
    (("dietitian", 0.921), ("chiropractor", 0.298)),
    (("yoga_teacher", 0.860), ("personal_trainer", 0.468)),
    (("model", 0.819), ("photographer", 0.357)),
    (("interior_designer", 0.784), ("architect", 0.225)),
    (("teacher", 0.605), ("professor", 0.452)),
    (("psychologist", 0.621), ("pastor", 0.231)),
    (("poet", 0.484), ("rapper", 0.086)),
    (("journalist", 0.492), ("filmmaker", 0.322)),
    (("physician", 0.492), ("dentist", 0.346)),
    (("painter", 0.452), ("comedian", 0.221)),
    (("accountant", 0.375), ("software_engineer", 0.157)),
    (("composer", 0.153), ("dj", 0.145)),
];

/// Defining pairs, ordered (male, female).
pub const DEFINING_PAIRS: [(&str, &str); 10] = [
    ("he", "she"),
    ("his", "hers"),
    ("him", "her"),
    ("man", "woman"),
    ("men", "women"),
    ("boy", "girl"),
    ("male", "female"),
    ("father", "mother"),
    ("son", "daughter"),
    ("mr.", "mrs."),
];

const EXTRA_GENDERED_PAIRS: usize = 30;
const GROUP_WORDS: usize = 40;
const SPECIFIC_WORDS: usize = 25;
const MIN_FILLER: usize = 100;
const DEFINING_JITTER: f64 = 0.05;
const ZETA_CLIP: f64 = 2.5;

fn default_indirect_bias() -> f64 {
    0.1
}
fn default_secondary_ratio() -> f64 {
    0.6
}
fn default_bio_length() -> usize {
    40
}
fn default_ambiguity() -> f64 {
    0.4
}
fn default_occupation_word_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Even, at most 28.
    pub num_occupations: usize,
    pub num_bios: usize,
    pub gender_signal_strength: f64,
    pub neutral_noise_strength: f64,
    /// 0 makes every occupation gender-balanced; 1 uses the reference skew.
    pub occupation_gender_correlation: f64,
    pub seed: u64,
    /// Probability that a filler token is drawn from the half of the filler
    /// vocabulary leaning toward the subject's gender.
    #[serde(default = "default_indirect_bias")]
    pub indirect_bias: f64,
    /// Size of the off-subspace gender difference of non-defining pairs,
    /// relative to `gender_signal_strength`.
    #[serde(default = "default_secondary_ratio")]
    pub secondary_ratio: f64,
    #[serde(default = "default_bio_length")]
    pub bio_length: usize,
    /// Fraction of biographies without occupation-specific words.
    #[serde(default = "default_ambiguity")]
    pub ambiguity: f64,
    /// Probability that a biography uses its occupation's gendered word.
    #[serde(default = "default_occupation_word_rate")]
    pub occupation_word_rate: f64,
    /// List the gendered occupation titles as equalize pairs. When unset
    /// they appear only in the gender word list, so equalization leaves them
    /// alone while neutralization still keeps them out of the neutral set.
    #[serde(default)]
    pub equalize_occupation_pairs: bool,
}

impl SyntheticCorpusSpec {
    /// Desk-scale corpus with clear gendered tokens masked by neutral noise.
    pub fn preset(seed: u64) -> Self {
        SyntheticCorpusSpec {
            vocab_size: 5000,
            embed_dim: 50,
            num_occupations: 8,
            num_bios: 20_000,
            gender_signal_strength: 0.6,
            neutral_noise_strength: 0.3,
            occupation_gender_correlation: 1.0,
            seed,
            indirect_bias: default_indirect_bias(),
            secondary_ratio: default_secondary_ratio(),
            bio_length: default_bio_length(),
            ambiguity: default_ambiguity(),
            occupation_word_rate: default_occupation_word_rate(),
            equalize_occupation_pairs: false,
        }
    }

    /// Same shape as [`preset`](Self::preset) with no gender structure at all.
    pub fn null(seed: u64) -> Self {
        SyntheticCorpusSpec {
            gender_signal_strength: 0.0,
            occupation_gender_correlation: 0.0,
            indirect_bias: 0.0,
            ..Self::preset(seed)
        }
    }

    fn minimum_vocab(&self) -> usize {
        let groups = self.num_occupations / 2;
        2 * DEFINING_PAIRS.len()
            + 2 * EXTRA_GENDERED_PAIRS
            + 2 * self.num_occupations
            + groups * GROUP_WORDS
            + self.num_occupations * SPECIFIC_WORDS
            + MIN_FILLER
    }

    fn secondary_strength(&self) -> f64 {
        let s = self.gender_signal_strength;
        (self.secondary_ratio * s).min((1.0 - s * s).max(0.0).sqrt() * 0.9)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("gender_signal_strength", self.gender_signal_strength),
            ("neutral_noise_strength", self.neutral_noise_strength),
            ("occupation_gender_correlation", self.occupation_gender_correlation),
            ("indirect_bias", self.indirect_bias),
            ("secondary_ratio", self.secondary_ratio),
            ("ambiguity", self.ambiguity),
            ("occupation_word_rate", self.occupation_word_rate),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.num_occupations < 2 || !self.num_occupations.is_multiple_of(2) || self.num_occupations > 2 * OCCUPATION_PAIRS.len() {
            return Err(Error::Config(format!(
                "num_occupations must be even and in 2..={}, got {}",
                2 * OCCUPATION_PAIRS.len(),
                self.num_occupations
            )));
        }
        if self.embed_dim < 4 {
            return Err(Error::Config("embed_dim must be at least 4".into()));
        }
        if self.bio_length < 4 {
            return Err(Error::Config("bio_length must be at least 4".into()));
        }
        if self.num_bios == 0 {
            return Err(Error::Config("num_bios must be positive".into()));
        }
        if self.vocab_size < self.minimum_vocab() {
            return Err(Error::Config(format!(
                "vocab_size {} too small for the word lists, need at least {}",
                self.vocab_size,
                self.minimum_vocab()
            )));
        }
        Ok(())
    }
}

/// Everything a synthetic experiment needs.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub embeddings: EmbeddingSet<f64>,
    pub defining: WordPairList,
    pub equalize: WordPairList,
    pub gender_words: GenderWordList,
    pub bios: Vec<Biography>,
    pub planted_direction: Vec<f64>,
    pub occupations: Vec<String>,
}

struct Geometry {
    dim: usize,
}

impl Geometry {
    fn gaussian(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    /// Random unit vector orthogonal to every (unit) vector in `avoid`.
    fn unit_orthogonal(&self, rng: &mut ChaCha8Rng, avoid: &[&[f64]]) -> Vec<f64> {
        loop {
            let mut v = self.gaussian(rng);
            for a in avoid {
                let p: f64 = v.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= p * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn reject(v: &mut [f64], dirs: &[&[f64]]) {
    for d in dirs {
        let p: f64 = v.iter().zip(d.iter()).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(d.iter()).for_each(|(x, y)| *x -= p * y);
    }
}

/// `sqrt(1 - z^2) * base + z * g` for a unit `base` orthogonal to `g`.
fn with_component(base: &[f64], g: &[f64], z: f64) -> Vec<f64> {
    let h = (1.0 - z * z).max(0.0).sqrt();
    base.iter().zip(g).map(|(b, gi)| h * b + z * gi).collect()
}

pub fn generate_synthetic(spec: &SyntheticCorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-corpus"));
    let geo = Geometry { dim: spec.embed_dim };
    let d = spec.embed_dim;

    let g = geo.unit_orthogonal(&mut rng, &[]);
    let g2 = geo.unit_orthogonal(&mut rng, &[&g]);
    let s = spec.gender_signal_strength;
    let r = spec.secondary_strength();

    let mut rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(spec.vocab_size);

    // Gendered pairs. `female = base + s g (+ r g2)`, `male = base - s g (- r g2)`.
    let mut defining = Vec::new();
    for &(m, f) in &DEFINING_PAIRS {
        let base = geo.unit_orthogonal(&mut rng, &[&g, &g2]);
        for (word, sign) in [(m, -1.0), (f, 1.0)] {
            let mut v = with_component(&base, &g, sign * s);
            let jitter = geo.gaussian(&mut rng);
            let scale = DEFINING_JITTER / (d as f64).sqrt();
            v.iter_mut().zip(&jitter).for_each(|(x, j)| *x += scale * j);
            rows.push((word.to_string(), unit(v)));
        }
        defining.push((m.to_string(), f.to_string()));
    }
    let gendered_pair = |base: &[f64], sign: f64| -> Vec<f64> {
        let h = (1.0 - s * s - r * r).max(0.0).sqrt();
        (0..d).map(|i| h * base[i] + sign * (s * g[i] + r * g2[i])).collect()
    };
    let mut extra = Vec::new();
    for i in 0..EXTRA_GENDERED_PAIRS {
        let base = geo.unit_orthogonal(&mut rng, &[&g, &g2]);
        let (m, f) = (format!("mgen{i}"), format!("fgen{i}"));
        rows.push((m.clone(), gendered_pair(&base, -1.0)));
        rows.push((f.clone(), gendered_pair(&base, 1.0)));
        extra.push((m, f));
    }

    let groups = spec.num_occupations / 2;
    let mut occupations = Vec::with_capacity(spec.num_occupations);
    let mut frac_female = Vec::with_capacity(spec.num_occupations);
    for ((fo, ff), (mo, mf)) in OCCUPATION_PAIRS.iter().take(groups) {
        for (name, frac) in [(fo, ff), (mo, mf)] {
            occupations.push(name.to_string());
            frac_female.push(0.5 + spec.occupation_gender_correlation * (frac - 0.5));
        }
    }

    // Topics: one per confusable group, one per occupation.
    let group_topic: Vec<Vec<f64>> = (0..groups).map(|_| geo.unit_orthogonal(&mut rng, &[&g])).collect();
    let occ_topic: Vec<Vec<f64>> = (0..spec.num_occupations)
        .map(|_| geo.unit_orthogonal(&mut rng, &[&g]))
        .collect();
    let noise = spec.neutral_noise_strength;
    let neutral_word = |rng: &mut ChaCha8Rng, topic: Option<&[f64]>| -> (Vec<f64>, f64) {
        let mut base = geo.gaussian(rng);
        let n = base.iter().map(|x| x * x).sum::<f64>().sqrt();
        base.iter_mut().for_each(|x| *x /= n);
        if let Some(t) = topic {
            base.iter_mut().zip(t).for_each(|(x, ti)| *x += ti);
        }
        reject(&mut base, &[&g]);
        let base = unit(base);
        let zeta = rng.sample::<f64, _>(StandardNormal).clamp(-ZETA_CLIP, ZETA_CLIP);
        (with_component(&base, &g, (noise * zeta).clamp(-0.95, 0.95)), zeta)
    };

    let mut occ_pairs = Vec::new();
    for (o, name) in occupations.iter().enumerate() {
        let mut base = occ_topic[o].clone();
        let mix = geo.gaussian(&mut rng);
        let n = mix.iter().map(|x| x * x).sum::<f64>().sqrt();
        base.iter_mut().zip(&mix).for_each(|(b, m)| *b += m / n);
        reject(&mut base, &[&g, &g2]);
        let base = unit(base);
        let (m, f) = (format!("m_{name}"), format!("f_{name}"));
        rows.push((m.clone(), gendered_pair(&base, -1.0)));
        rows.push((f.clone(), gendered_pair(&base, 1.0)));
        occ_pairs.push((m, f));
    }

    let mut group_words: Vec<Vec<String>> = Vec::with_capacity(groups);
    for (j, topic) in group_topic.iter().enumerate() {
        let mut words = Vec::with_capacity(GROUP_WORDS);
        for i in 0..GROUP_WORDS {
            let w = format!("grp{j}w{i}");
            rows.push((w.clone(), neutral_word(&mut rng, Some(topic)).0));
            words.push(w);
        }
        group_words.push(words);
    }
    let mut specific_words: Vec<Vec<String>> = Vec::with_capacity(spec.num_occupations);
    for (o, topic) in occ_topic.iter().enumerate() {
        let mut words = Vec::with_capacity(SPECIFIC_WORDS);
        for i in 0..SPECIFIC_WORDS {
            let w = format!("{}w{i}", occupations[o]);
            rows.push((w.clone(), neutral_word(&mut rng, Some(topic)).0));
            words.push(w);
        }
        specific_words.push(words);
    }
    let n_filler = spec.vocab_size - rows.len();
    let mut filler = Vec::with_capacity(n_filler);
    let mut filler_female = Vec::new();
    let mut filler_male = Vec::new();
    for i in 0..n_filler {
        let w = format!("w{i}");
        let (v, zeta) = neutral_word(&mut rng, None);
        rows.push((w.clone(), v));
        if zeta > 0.0 {
            filler_female.push(w.clone());
        } else {
            filler_male.push(w.clone());
        }
        filler.push(w);
    }

    let generic_pairs: Vec<(String, String)> = defining.iter().chain(&extra).cloned().collect();
    let mut bios = Vec::with_capacity(spec.num_bios);
    for i in 0..spec.num_bios {
        let o = rng.random_range(0..spec.num_occupations);
        let gender = if rng.random::<f64>() < frac_female[o] {
            Gender::Female
        } else {
            Gender::Male
        };
        let pick = |pair: &(String, String)| match gender {
            Gender::Female => pair.1.clone(),
            Gender::Male => pair.0.clone(),
        };
        let lo = spec.bio_length * 3 / 4;
        let hi = spec.bio_length * 5 / 4;
        let len = rng.random_range(lo..=hi);
        let n_gendered = ((len as f64 * 0.05).round() as usize).max(1);
        let n_group = (len as f64 * 0.2).round() as usize;
        let n_specific = if rng.random::<f64>() < spec.ambiguity {
            0
        } else {
            ((len as f64 * 0.06).round() as usize).max(1)
        };

        let mut tokens = Vec::with_capacity(len);
        let mut gendered_left = n_gendered;
        if rng.random::<f64>() < spec.occupation_word_rate {
            tokens.push(pick(&occ_pairs[o]));
            gendered_left -= 1;
        }
        for _ in 0..gendered_left {
            tokens.push(pick(generic_pairs.choose(&mut rng).expect("pairs exist")));
        }
        for _ in 0..n_group {
            tokens.push(group_words[o / 2].choose(&mut rng).expect("group words").clone());
        }
        for _ in 0..n_specific {
            tokens.push(specific_words[o].choose(&mut rng).expect("specific words").clone());
        }
        while tokens.len() < len {
            let pool = if rng.random::<f64>() < spec.indirect_bias {
                match gender {
                    Gender::Female => &filler_female,
                    Gender::Male => &filler_male,
                }
            } else {
                &filler
            };
            tokens.push(pool.choose(&mut rng).unwrap_or(&filler[0]).clone());
        }
        tokens.shuffle(&mut rng);
        bios.push(Biography {
            id: format!("bio-{i:06}"),
            tokens,
            occupation: occupations[o].clone(),
            gender,
            split: None,
        });
    }

    let mut equalize_pairs: Vec<(String, String)> = defining.iter().chain(&extra).cloned().collect();
    let mut unlisted = Vec::new();
    if spec.equalize_occupation_pairs {
        equalize_pairs.extend(occ_pairs.iter().cloned());
    } else {
        unlisted.extend(occ_pairs.iter().flat_map(|(m, f)| [m.clone(), f.clone()]));
    }
    let defining = WordPairList::new(PairRole::Defining, defining)?;
    let equalize = WordPairList::new(PairRole::Equalize, equalize_pairs)?;
    let gender_words = GenderWordList::from_pairs([&equalize], unlisted)?;
    let (embeddings, duplicates) = EmbeddingSet::from_rows(d, rows)?;
    debug_assert_eq!(duplicates, 0);

    Ok(SyntheticCorpus {
        embeddings,
        defining,
        equalize,
        gender_words,
        bios,
        planted_direction: g,
        occupations,
    })
}
