//! Word embeddings and the word lists that drive debiasing.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// A vocabulary together with one dense vector per word.
///
/// Rows are stored contiguously in vocabulary order. Words are unique and
/// lowercase.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
    dim: usize,
}

/// Counters reported while reading an embedding file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub duplicates: usize,
    pub header_skipped: bool,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn empty(dim: usize) -> Self {
        EmbeddingSet {
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            dim,
        }
    }

    /// Builds a set from words and rows. Words are lowercased; later
    /// duplicates are dropped and counted.
    pub fn from_rows<S, I>(dim: usize, rows: I) -> Result<(Self, usize)>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, Vec<T>)>,
    {
        let mut set = Self::empty(dim);
        let mut duplicates = 0;
        for (word, row) in rows {
            if row.len() != dim {
                return Err(Error::Data(format!(
                    "row for {:?} has {} values, expected {dim}",
                    word.as_ref(),
                    row.len()
                )));
            }
            if !set.push(word.as_ref(), &row) {
                duplicates += 1;
            }
        }
        Ok((set, duplicates))
    }

    /// Appends a word; returns false (and leaves the set unchanged) when the
    /// lowercased word is already present.
    fn push(&mut self, word: &str, row: &[T]) -> bool {
        let word = word.to_lowercase();
        if self.index.contains_key(&word) {
            return false;
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(row);
        true
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, idx: usize) -> &[T] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, idx: usize) -> &mut [T] {
        &mut self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[T]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    /// Converts every coordinate to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingSet<U> {
        EmbeddingSet {
            words: self.words.clone(),
            index: self.index.clone(),
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
            dim: self.dim,
        }
    }

    /// Divides every nonzero row by its Euclidean norm. Returns the
    /// normalized copy and the number of all-zero rows left untouched.
    pub fn normalize_rows(&self) -> (Self, usize) {
        let mut out = self.clone();
        let mut zero_rows = 0;
        for i in 0..out.len() {
            let row = out.row_mut(i);
            let n = linalg::norm(row);
            if n == T::zero() {
                zero_rows += 1;
            } else {
                linalg::scale(T::one() / n, row);
            }
        }
        if zero_rows > 0 {
            warn!("{zero_rows} zero vectors left unnormalized");
        }
        (out, zero_rows)
    }

    /// Writes the set in GloVe text format (no header line).
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for x in self.row(i) {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

fn looks_like_header(fields: &[&str], expected_dim: usize) -> bool {
    expected_dim != 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

/// Reads GloVe text from any buffered reader. `origin` only labels errors.
pub fn read_embeddings<T: Scalar, R: BufRead>(
    reader: R,
    expected_dim: usize,
    origin: &Path,
) -> Result<(EmbeddingSet<T>, ReadStats)> {
    let mut set = EmbeddingSet::empty(expected_dim);
    let mut stats = ReadStats::default();
    let mut row = Vec::with_capacity(expected_dim);
    let mut first_content = true;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if first_content {
            first_content = false;
            if looks_like_header(&fields, expected_dim) {
                stats.header_skipped = true;
                continue;
            }
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        };
        if fields.len() - 1 != expected_dim {
            return Err(parse_err(format!(
                "expected {expected_dim} values, found {}",
                fields.len() - 1
            )));
        }
        row.clear();
        for tok in &fields[1..] {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(format!("cannot parse {tok:?} as a number")))?;
            row.push(T::of(v));
        }
        if !set.push(fields[0], &row) {
            stats.duplicates += 1;
        }
    }
    if stats.duplicates > 0 {
        warn!(
            "{}: {} duplicate words ignored (first occurrence kept)",
            origin.display(),
            stats.duplicates
        );
    }
    Ok((set, stats))
}

/// Loads a GloVe text file. Words are lowercased on the way in.
pub fn load_embeddings<T: Scalar>(
    path: impl AsRef<Path>,
    expected_dim: usize,
) -> Result<EmbeddingSet<T>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(f), expected_dim, path).map(|(e, _)| e)
}

/// Counts the values on the first non-header line, for callers that do not
/// know the dimension in advance.
pub fn sniff_dim(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || looks_like_header(&fields, 0) {
            continue;
        }
        return Ok(fields.len() - 1);
    }
    Err(Error::Data(format!("{}: no embedding rows", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    Defining,
    Equalize,
}

/// Ordered word pairs. Defining pairs are ordered (male, female).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPairList {
    pub pairs: Vec<(String, String)>,
    pub role: PairRole,
}

impl WordPairList {
    pub fn new(role: PairRole, pairs: Vec<(String, String)>) -> Result<Self> {
        for (i, (a, b)) in pairs.iter().enumerate() {
            if a == b {
                return Err(Error::Data(format!("pair {i} repeats the word {a:?}")));
            }
        }
        Ok(WordPairList { pairs, role })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps only pairs whose two words are both in `e`; returns the
    /// filtered list and the number of dropped pairs.
    pub fn in_vocabulary<T: Scalar>(&self, e: &EmbeddingSet<T>) -> (WordPairList, usize) {
        let kept: Vec<_> = self
            .pairs
            .iter()
            .filter(|(a, b)| e.contains(a) && e.contains(b))
            .cloned()
            .collect();
        let dropped = self.pairs.len() - kept.len();
        if dropped > 0 {
            warn!("{dropped} {:?} pairs dropped as out of vocabulary", self.role);
        }
        (
            WordPairList {
                pairs: kept,
                role: self.role,
            },
            dropped,
        )
    }

    /// The pairs as two-element equality sets.
    pub fn as_sets(&self) -> Vec<Vec<String>> {
        self.pairs
            .iter()
            .map(|(a, b)| vec![a.clone(), b.clone()])
            .collect()
    }

    pub fn to_json(&self) -> String {
        let v: Vec<[&str; 2]> = self.pairs.iter().map(|(a, b)| [a.as_str(), b.as_str()]).collect();
        serde_json::to_string(&v).expect("pairs serialize")
    }
}

/// Parses a JSON array of two-element string arrays.
pub fn parse_word_pairs(text: &str, role: PairRole, origin: &Path) -> Result<WordPairList> {
    let bad = |message: String| Error::WordList {
        path: origin.to_path_buf(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| bad("top level must be an array".into()))?;
    let mut pairs = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let words = match item.as_array() {
            Some(a) if a.len() == 2 => a,
            _ => return Err(bad(format!("element {i} is not a two-element array"))),
        };
        let (a, b) = match (words[0].as_str(), words[1].as_str()) {
            (Some(a), Some(b)) => (a.to_lowercase(), b.to_lowercase()),
            _ => return Err(bad(format!("element {i} must contain two strings"))),
        };
        if a == b {
            return Err(bad(format!("element {i} repeats the word {a:?}")));
        }
        pairs.push((a, b));
    }
    Ok(WordPairList { pairs, role })
}

pub fn load_word_pairs(path: impl AsRef<Path>, role: PairRole) -> Result<WordPairList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_pairs(&text, role, path)
}

/// Explicit gender-indicator tokens: the scrub vocabulary, and the
/// complement of the neutral set for hard debiasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenderWordList {
    words: BTreeSet<String>,
}

impl GenderWordList {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let words: BTreeSet<String> = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        if words.is_empty() {
            return Err(Error::Data("gender word list is empty".into()));
        }
        Ok(GenderWordList { words })
    }

    /// Union of the words of the given pair lists and any extra words.
    pub fn from_pairs<'a>(
        lists: impl IntoIterator<Item = &'a WordPairList>,
        extra: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut words: Vec<String> = extra.into_iter().collect();
        for list in lists {
            for (a, b) in &list.pairs {
                words.push(a.clone());
                words.push(b.clone());
            }
        }
        Self::new(words)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.words.iter()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.words).expect("words serialize")
    }
}

pub fn load_gender_words(path: impl AsRef<Path>) -> Result<GenderWordList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let words: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::WordList {
        path: path.to_path_buf(),
        message: format!("expected a JSON array of strings: {e}"),
    })?;
    GenderWordList::new(words).map_err(|_| Error::WordList {
        path: path.to_path_buf(),
        message: "gender word list is empty".into(),
    })
}
