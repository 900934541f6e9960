//! Classifier score files, sanitization, sum-rule fusion and recognition
//! rate.
//!
//! Sanitization zeroes NaN scores and turns any row whose scores are all
//! equal into an all-zero row. [`fuse_sum`] always sanitizes its inputs.
//! Sums are correctly rounded, so fusion does not depend on input order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub fold: usize,
    pub scores: Vec<f64>,
    pub true_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub classifier_id: String,
    pub class_names: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    pub fn new(
        classifier_id: impl Into<String>,
        class_names: Vec<String>,
        rows: Vec<ScoreRow>,
    ) -> Result<Self> {
        let m = Self {
            classifier_id: classifier_id.into(),
            class_names,
            rows,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mismatch = |d: String| Error::FusionMismatch(format!("{}: {d}", self.classifier_id));
        let classes: HashSet<&str> = self.class_names.iter().map(String::as_str).collect();
        if classes.len() != self.class_names.len() {
            return Err(mismatch("duplicate class names".into()));
        }
        let mut ids = HashSet::new();
        for r in &self.rows {
            if r.scores.len() != self.class_names.len() {
                return Err(mismatch(format!(
                    "sample `{}` has {} scores for {} classes",
                    r.sample_id,
                    r.scores.len(),
                    self.class_names.len()
                )));
            }
            if !ids.insert(r.sample_id.as_str()) {
                return Err(mismatch(format!("duplicate sample `{}`", r.sample_id)));
            }
            if !classes.contains(r.true_label.as_str()) {
                return Err(mismatch(format!("unknown label `{}`", r.true_label)));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

pub fn sanitize_scores(scores: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = scores
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { v })
        .collect();
    if let Some(&first) = out.first() {
        if out.iter().all(|&v| v == first) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

pub fn sanitize(m: &ScoreMatrix) -> ScoreMatrix {
    ScoreMatrix {
        classifier_id: m.classifier_id.clone(),
        class_names: m.class_names.clone(),
        rows: m
            .rows
            .iter()
            .map(|r| ScoreRow {
                scores: sanitize_scores(&r.scores),
                ..r.clone()
            })
            .collect(),
    }
}

/// Correctly rounded floating-point sum (Shewchuk's partials with a final
/// half-way correction). Falls back to plain summation when any term is
/// infinite or NaN.
pub fn exact_sum(xs: &[f64]) -> f64 {
    if xs.iter().any(|x| !x.is_finite()) {
        return xs.iter().sum();
    }
    let mut partials: Vec<f64> = Vec::new();
    for &x0 in xs {
        let mut x = x0;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Sum-rule fusion. Inputs must share class names and the same samples
/// (with matching folds and labels); rows follow the first matrix's order.
pub fn fuse_sum(matrices: &[ScoreMatrix]) -> Result<ScoreMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::FusionMismatch("no score matrices to fuse".into()))?;
    let lookups: Vec<HashMap<&str, &ScoreRow>> = matrices
        .iter()
        .map(|m| m.rows.iter().map(|r| (r.sample_id.as_str(), r)).collect())
        .collect();
    for (m, lookup) in matrices.iter().zip(&lookups).skip(1) {
        if m.class_names != first.class_names {
            return Err(Error::FusionMismatch(format!(
                "`{}` has classes {:?}, `{}` has {:?}",
                m.classifier_id, m.class_names, first.classifier_id, first.class_names
            )));
        }
        if m.rows.len() != first.rows.len() {
            return Err(Error::FusionMismatch(format!(
                "`{}` has {} samples, `{}` has {}",
                m.classifier_id,
                m.rows.len(),
                first.classifier_id,
                first.rows.len()
            )));
        }
        for r in &first.rows {
            match lookup.get(r.sample_id.as_str()) {
                None => {
                    return Err(Error::FusionMismatch(format!(
                        "sample `{}` missing from `{}`",
                        r.sample_id, m.classifier_id
                    )))
                }
                Some(o) if o.true_label != r.true_label || o.fold != r.fold => {
                    return Err(Error::FusionMismatch(format!(
                        "sample `{}` has a different label or fold in `{}`",
                        r.sample_id, m.classifier_id
                    )))
                }
                Some(_) => {}
            }
        }
    }

    let classes = first.class_names.len();
    let rows = first
        .rows
        .iter()
        .map(|r| {
            let members: Vec<Vec<f64>> = lookups
                .iter()
                .map(|l| sanitize_scores(&l[r.sample_id.as_str()].scores))
                .collect();
            let scores = (0..classes)
                .map(|c| exact_sum(&members.iter().map(|s| s[c]).collect::<Vec<_>>()))
                .collect();
            ScoreRow {
                scores,
                ..r.clone()
            }
        })
        .collect();
    Ok(ScoreMatrix {
        classifier_id: matrices
            .iter()
            .map(|m| m.classifier_id.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        class_names: first.class_names.clone(),
        rows,
    })
}

/// Index of the highest score; ties go to the lowest index and NaN never
/// wins.
pub fn predict(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldAccuracy {
    pub fold: usize,
    pub correct: usize,
    pub total: usize,
}

impl FoldAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionRate {
    /// Folds in ascending order.
    pub per_fold: Vec<FoldAccuracy>,
    /// Mean of the per-fold accuracies.
    pub mean: f64,
    /// Accuracy over all samples pooled.
    pub pooled: f64,
}

pub fn recognition_rate(m: &ScoreMatrix) -> Result<RecognitionRate> {
    if m.rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut folds: BTreeMap<usize, FoldAccuracy> = BTreeMap::new();
    for r in &m.rows {
        let truth = m
            .class_index(&r.true_label)
            .ok_or_else(|| Error::FusionMismatch(format!("unknown label `{}`", r.true_label)))?;
        let acc = folds.entry(r.fold).or_insert(FoldAccuracy {
            fold: r.fold,
            correct: 0,
            total: 0,
        });
        acc.total += 1;
        if predict(&r.scores) == truth {
            acc.correct += 1;
        }
    }
    let per_fold: Vec<FoldAccuracy> = folds.into_values().collect();
    let mean = per_fold.iter().map(FoldAccuracy::accuracy).sum::<f64>() / per_fold.len() as f64;
    let correct: usize = per_fold.iter().map(|f| f.correct).sum();
    Ok(RecognitionRate {
        mean,
        pooled: correct as f64 / m.rows.len() as f64,
        per_fold,
    })
}

const FIXED_COLUMNS: [&str; 3] = ["sample_id", "fold", "true_label"];

/// Reads a `sample_id,fold,true_label,<class>...` score file. The
/// classifier id is the file stem. The literal `NaN` is accepted in score
/// cells.
pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    let schema = |line: u64, detail: String| Error::Schema {
        path: path.to_owned(),
        line,
        detail,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers()?.clone();
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            got => {
                return Err(schema(
                    1,
                    format!(
                        "column {} must be `{want}`, found `{}`",
                        i + 1,
                        got.unwrap_or("")
                    ),
                ))
            }
        }
    }
    let class_names: Vec<String> = header.iter().skip(3).map(str::to_owned).collect();
    if class_names.is_empty() {
        return Err(schema(1, "no class columns".into()));
    }
    if let Some(dup) = class_names
        .iter()
        .enumerate()
        .find(|(i, c)| class_names[..*i].contains(c))
    {
        return Err(schema(1, format!("duplicate class column `{}`", dup.1)));
    }

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(schema(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let fold = rec[1].parse::<usize>().map_err(|_| {
            schema(
                line,
                format!("column `fold`: `{}` is not a fold index", &rec[1]),
            )
        })?;
        let true_label = rec[2].to_owned();
        if !class_names.contains(&true_label) {
            return Err(schema(
                line,
                format!("column `true_label`: unknown class `{true_label}`"),
            ));
        }
        let scores = rec
            .iter()
            .skip(3)
            .zip(&class_names)
            .map(|(cell, class)| {
                cell.parse::<f64>().map_err(|_| {
                    schema(line, format!("column `{class}`: `{cell}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(rec[0].to_owned()) {
            return Err(schema(line, format!("duplicate sample_id `{}`", &rec[0])));
        }
        rows.push(ScoreRow {
            sample_id: rec[0].to_owned(),
            fold,
            scores,
            true_label,
        });
    }
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scores")
        .to_owned();
    ScoreMatrix::new(id, class_names, rows)
}

pub fn write_scores_csv(m: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(m.class_names.iter().map(String::as_str));
    w.write_record(&header)?;
    for r in &m.rows {
        let mut rec = vec![
            r.sample_id.clone(),
            r.fold.to_string(),
            r.true_label.clone(),
        ];
        rec.extend(r.scores.iter().map(|s| s.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A named fusion variant and the score files it combines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionRecipe {
    pub variant: String,
    pub classifiers: Vec<PathBuf>,
}

impl FusionRecipe {
    /// Reads a recipe; relative classifier paths are resolved against the
    /// recipe's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut recipe: FusionRecipe = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_owned(),
            line: e.line() as u64,
            detail: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut recipe.classifiers {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
        Ok(recipe)
    }
}

/// Loads every score file named by the recipe and fuses them.
pub fn fuse_spec(recipe: &FusionRecipe) -> Result<ScoreMatrix> {
    if recipe.classifiers.is_empty() {
        return Err(Error::FusionMismatch(format!(
            "recipe `{}` names no classifiers",
            recipe.variant
        )));
    }
    if let Some(missing) = recipe.classifiers.iter().find(|p| !p.is_file()) {
        return Err(Error::MissingFile(missing.clone()));
    }
    let matrices = recipe
        .classifiers
        .iter()
        .map(read_scores_csv)
        .collect::<Result<Vec<_>>>()?;
    fuse_sum(&matrices)
}
