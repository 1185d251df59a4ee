//! Equality-of-opportunity deviations per occupation.
//!
//! Each occupation is scored as its own binary decision. A rate whose
//! denominator is zero is undefined; undefined gaps are left out of the
//! macro averages and counted instead.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Gender;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub true_occupation: String,
    pub predicted_occupation: String,
    pub gender: Gender,
}

/// Per-gender rates for one occupation and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGap {
    pub female: Option<f64>,
    pub male: Option<f64>,
    pub gap: Option<f64>,
}

impl RateGap {
    fn from_counts(hits: [usize; 2], totals: [usize; 2]) -> Self {
        let rate = |h: usize, t: usize| (t > 0).then(|| h as f64 / t as f64);
        let female = rate(hits[0], totals[0]);
        let male = rate(hits[1], totals[1]);
        let gap = female.zip(male).map(|(f, m)| (f - m).abs());
        RateGap { female, male, gap }
    }

    pub fn signed(&self) -> Option<f64> {
        self.female.zip(self.male).map(|(f, m)| f - m)
    }
}

fn slot(g: Gender) -> usize {
    match g {
        Gender::Female => 0,
        Gender::Male => 1,
    }
}

/// True-positive rates by gender for `occupation`.
pub fn tpr_gap(predictions: &[Prediction], occupation: &str) -> RateGap {
    let mut hits = [0; 2];
    let mut totals = [0; 2];
    for p in predictions.iter().filter(|p| p.true_occupation == occupation) {
        totals[slot(p.gender)] += 1;
        if p.predicted_occupation == occupation {
            hits[slot(p.gender)] += 1;
        }
    }
    RateGap::from_counts(hits, totals)
}

/// True-negative rates by gender for `occupation`.
pub fn tnr_gap(predictions: &[Prediction], occupation: &str) -> RateGap {
    let mut hits = [0; 2];
    let mut totals = [0; 2];
    for p in predictions.iter().filter(|p| p.true_occupation != occupation) {
        totals[slot(p.gender)] += 1;
        if p.predicted_occupation != occupation {
            hits[slot(p.gender)] += 1;
        }
    }
    RateGap::from_counts(hits, totals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationFairness {
    pub occupation: String,
    pub frac_female: f64,
    pub tpr_f: Option<f64>,
    pub tpr_m: Option<f64>,
    pub tnr_f: Option<f64>,
    pub tnr_m: Option<f64>,
    /// `tpr_f - tpr_m`
    pub tpr_gap: Option<f64>,
    /// `tnr_f - tnr_m`
    pub tnr_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessAggregate {
    pub accuracy: f64,
    pub mean_abs_tpr_gap: Option<f64>,
    pub mean_abs_tnr_gap: Option<f64>,
    pub undefined_gap_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    /// Sorted by `frac_female` descending, then by name.
    pub rows: Vec<OccupationFairness>,
    pub aggregate: FairnessAggregate,
}

fn mean_abs(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut undefined = 0;
    for v in values {
        match v {
            Some(x) => {
                sum += x.abs();
                n += 1;
            }
            None => undefined += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), undefined)
}

/// Macro averages of absolute gaps over the rows, in row order.
pub fn aggregate_rows(rows: &[OccupationFairness], accuracy: f64) -> FairnessAggregate {
    let (mean_abs_tpr_gap, u1) = mean_abs(rows.iter().map(|r| r.tpr_gap));
    let (mean_abs_tnr_gap, u2) = mean_abs(rows.iter().map(|r| r.tnr_gap));
    FairnessAggregate {
        accuracy,
        mean_abs_tpr_gap,
        mean_abs_tnr_gap,
        undefined_gap_count: u1 + u2,
    }
}

/// Scores every occupation that occurs as a true label.
pub fn build_report(predictions: &[Prediction]) -> Result<FairnessReport> {
    if predictions.is_empty() {
        return Err(Error::Data("no predictions to evaluate".into()));
    }
    let occupations: BTreeSet<&str> = predictions.iter().map(|p| p.true_occupation.as_str()).collect();
    let mut rows: Vec<OccupationFairness> = occupations
        .into_iter()
        .map(|occ| {
            let (mut female, mut total) = (0usize, 0usize);
            for p in predictions.iter().filter(|p| p.true_occupation == occ) {
                total += 1;
                if p.gender == Gender::Female {
                    female += 1;
                }
            }
            let tpr = tpr_gap(predictions, occ);
            let tnr = tnr_gap(predictions, occ);
            OccupationFairness {
                occupation: occ.to_string(),
                frac_female: female as f64 / total as f64,
                tpr_f: tpr.female,
                tpr_m: tpr.male,
                tnr_f: tnr.female,
                tnr_m: tnr.male,
                tpr_gap: tpr.signed(),
                tnr_gap: tnr.signed(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.frac_female
            .total_cmp(&a.frac_female)
            .then_with(|| a.occupation.cmp(&b.occupation))
    });
    let correct = predictions
        .iter()
        .filter(|p| p.true_occupation == p.predicted_occupation)
        .count();
    let aggregate = aggregate_rows(&rows, correct as f64 / predictions.len() as f64);
    Ok(FairnessReport { rows, aggregate })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

pub const REPORT_HEADER: &str = "occupation,frac_female,tpr_F,tpr_M,tnr_F,tnr_M,tpr_gap,tnr_gap";

impl FairnessReport {
    /// Per-occupation table; undefined values are empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.occupation,
                r.frac_female,
                fmt_opt(r.tpr_f),
                fmt_opt(r.tpr_m),
                fmt_opt(r.tnr_f),
                fmt_opt(r.tnr_m),
                fmt_opt(r.tpr_gap),
                fmt_opt(r.tnr_gap)
            )?;
        }
        w.flush()
    }
}

/// Parses rows written by [`FairnessReport::write_csv`].
pub fn read_report_rows(text: &str) -> Result<Vec<OccupationFairness>> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::Data("fairness CSV has an unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Data(format!("fairness CSV row {} is malformed", i + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            let opt = |s: &str| parse_opt(s).map_err(|_| bad());
            Ok(OccupationFairness {
                occupation: f[0].to_string(),
                frac_female: f[1].parse().map_err(|_| bad())?,
                tpr_f: opt(f[2])?,
                tpr_m: opt(f[3])?,
                tnr_f: opt(f[4])?,
                tnr_m: opt(f[5])?,
                tpr_gap: opt(f[6])?,
                tnr_gap: opt(f[7])?,
            })
        })
        .collect()
}

pub fn write_predictions_csv<W: Write>(predictions: &[Prediction], mut w: W) -> std::io::Result<()> {
    writeln!(w, "id,true_occupation,predicted_occupation,gender")?;
    for p in predictions {
        writeln!(
            w,
            "{},{},{},{}",
            p.id,
            p.true_occupation,
            p.predicted_occupation,
            p.gender.code()
        )?;
    }
    w.flush()
}
