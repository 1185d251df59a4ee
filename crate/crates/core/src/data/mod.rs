//! Biography datasets: ingestion, tokenization, splits, summaries, and the
//! synthetic corpus generator.

mod split;
pub mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{derive_seed, fnv1a64, split_for, split_unit, splitmix64, Split, DEV_FRACTION, TRAIN_FRACTION};
pub use synth::{generate_synthetic, SyntheticCorpus, SyntheticCorpusSpec};

/// Binary gender label; `Female` is the protected attribute value `A = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }

    pub fn is_female(self) -> bool {
        self == Gender::Female
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Biography {
    pub id: String,
    pub tokens: Vec<String>,
    pub occupation: String,
    pub gender: Gender,
    pub split: Option<Split>,
}

/// Abbreviations whose trailing period is part of the token.
const HONORIFICS: &[&str] = &[
    "mr.", "mrs.", "ms.", "mx.", "messrs.", "mmes.", "dr.", "prof.", "sr.", "jr.", "st.",
];

fn is_joiner(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '\'' | '-' | '_' | '.')
}

/// Lowercases, splits on whitespace and punctuation, and strips punctuation
/// around each token. Honorifics such as `mr.` keep their period.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for piece in lower.split(|c: char| !is_joiner(c)) {
        let core = piece.trim_matches(|c: char| !c.is_alphanumeric());
        if core.is_empty() {
            continue;
        }
        let start = piece.find(core).unwrap_or(0);
        let with_period = &piece[start..(start + core.len() + 1).min(piece.len())];
        if with_period.ends_with('.') && HONORIFICS.contains(&with_period) {
            out.push(with_period.to_string());
        } else {
            out.push(core.to_string());
        }
    }
    out
}

#[derive(Debug, Deserialize, Serialize)]
struct BiographyRecord {
    id: String,
    text: String,
    occupation: String,
    gender: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub bios: Vec<Biography>,
    pub dropped_empty: usize,
    pub rejected_unknown_occupation: usize,
}

/// Reads JSON-lines biographies. With `occupations` set, records whose
/// occupation is not listed are rejected and counted.
pub fn read_dataset<R: BufRead>(
    reader: R,
    occupations: Option<&[String]>,
    origin: &Path,
) -> Result<LoadedDataset> {
    let mut out = LoadedDataset::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        };
        let rec: BiographyRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let gender = match rec.gender.trim().to_ascii_uppercase().as_str() {
            "F" => Gender::Female,
            "M" => Gender::Male,
            other => return Err(parse_err(format!("gender must be \"F\" or \"M\", got {other:?}"))),
        };
        if let Some(known) = occupations {
            if !known.contains(&rec.occupation) {
                out.rejected_unknown_occupation += 1;
                continue;
            }
        }
        let tokens = tokenize(&rec.text);
        if tokens.is_empty() {
            out.dropped_empty += 1;
            continue;
        }
        out.bios.push(Biography {
            id: rec.id,
            tokens,
            occupation: rec.occupation,
            gender,
            split: None,
        });
    }
    if out.dropped_empty > 0 || out.rejected_unknown_occupation > 0 {
        warn!(
            "{}: dropped {} empty and {} unknown-occupation biographies",
            origin.display(),
            out.dropped_empty,
            out.rejected_unknown_occupation
        );
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, occupations: Option<&[String]>) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(f), occupations, path)
}

/// Writes biographies as JSON lines, joining tokens with single spaces.
pub fn write_dataset<W: Write>(bios: &[Biography], mut w: W) -> std::io::Result<()> {
    for b in bios {
        let rec = BiographyRecord {
            id: b.id.clone(),
            text: b.tokens.join(" "),
            occupation: b.occupation.clone(),
            gender: b.gender.code().to_string(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_dataset(bios: &[Biography], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(bios, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

/// Sets every biography's split from `(id, seed)`.
pub fn assign_splits(mut bios: Vec<Biography>, seed: u64) -> Result<Vec<Biography>> {
    let mut seen = HashSet::with_capacity(bios.len());
    for b in &bios {
        if !seen.insert(b.id.as_str()) {
            return Err(Error::Data(format!("duplicate biography id {:?}", b.id)));
        }
    }
    for b in &mut bios {
        b.split = Some(split_for(&b.id, seed));
    }
    Ok(bios)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationCounts {
    pub occupation: String,
    pub female: usize,
    pub male: usize,
    pub frac_female: f64,
}

/// Per-occupation gender counts, sorted by occupation name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSummary {
    pub rows: Vec<OccupationCounts>,
}

impl DatasetSummary {
    pub fn get(&self, occupation: &str) -> Option<&OccupationCounts> {
        self.rows.iter().find(|r| r.occupation == occupation)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "occupation,female,male,frac_female")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.occupation, r.female, r.male, r.frac_female)?;
        }
        w.flush()
    }
}

pub fn summarize(bios: &[Biography]) -> DatasetSummary {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for b in bios {
        let c = counts.entry(b.occupation.as_str()).or_default();
        match b.gender {
            Gender::Female => c.0 += 1,
            Gender::Male => c.1 += 1,
        }
    }
    DatasetSummary {
        rows: counts
            .into_iter()
            .map(|(occ, (female, male))| OccupationCounts {
                occupation: occ.to_string(),
                female,
                male,
                frac_female: female as f64 / (female + male) as f64,
            })
            .collect(),
    }
}
