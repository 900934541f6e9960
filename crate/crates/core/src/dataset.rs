//! Corpus manifests, stratified k-fold assignment and leakage-safe export of
//! augmented training sets.
//!
//! Only samples outside the test fold are augmented, and mixing partners are
//! drawn from the same class within the training portion only. Test-fold
//! samples are exported unmodified into a separate `test/` directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dgt::{dgt, render, save_png, save_spec, DgtParams};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::protocols::{apply_protocol, AugmentationProtocol, Item, ProtocolKind};
use crate::rng::RngStream;
use crate::wav::{read_wav, write_wav};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Builds a manifest, checking that sample ids are unique. File
    /// existence is checked by [`load_manifest`], not here.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::DuplicateId(e.sample_id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sample ids grouped by label; labels sorted, ids in manifest order.
    pub fn by_class(&self) -> BTreeMap<&str, Vec<&ManifestEntry>> {
        let mut classes: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in &self.entries {
            classes.entry(e.label.as_str()).or_default().push(e);
        }
        classes
    }
}

/// Reads a `sample_id,path,label` CSV. Relative paths are resolved against
/// the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let malformed = |line: u64, detail: String| Error::Manifest {
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
    if header.iter().collect::<Vec<_>>() != ["sample_id", "path", "label"] {
        return Err(malformed(
            1,
            format!(
                "expected header `sample_id,path,label`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(malformed(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        if record.iter().any(str::is_empty) {
            return Err(malformed(line, "empty field".into()));
        }
        let p = Path::new(&record[1]);
        let resolved = if p.is_absolute() {
            p.to_owned()
        } else {
            base.join(p)
        };
        if !resolved.is_file() {
            return Err(Error::MissingFile(resolved));
        }
        entries.push(ManifestEntry {
            sample_id: record[0].to_owned(),
            path: resolved,
            label: record[2].to_owned(),
        });
    }
    Manifest::new(entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    #[serde(rename = "folds")]
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold(&self, sample_id: &str) -> Option<usize> {
        self.fold_of.get(sample_id).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold assignment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: FoldAssignment = serde_json::from_str(text)?;
        if f.k < 2 {
            return Err(Error::param("k", "fold count must be at least 2"));
        }
        if let Some((id, fold)) = f.fold_of.iter().find(|(_, &v)| v >= f.k) {
            return Err(Error::param(
                "folds",
                format!("`{id}` assigned to fold {fold} >= k"),
            ));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Shuffles each class with `seed` and deals its samples round-robin into
/// `k` folds. Dealing continues where the previous class stopped so that
/// overall fold sizes stay balanced as well.
///
/// Returns the assignment and one warning per class smaller than `k`.
pub fn stratified_folds(
    m: &Manifest,
    k: usize,
    seed: u64,
) -> Result<(FoldAssignment, Vec<String>)> {
    if k < 2 {
        return Err(Error::param("k", "fold count must be at least 2"));
    }
    let classes = m.by_class();
    if classes.len() < 2 {
        return Err(Error::param(
            "manifest",
            format!("need at least 2 classes, found {}", classes.len()),
        ));
    }
    let mut rng = RngStream::new(seed);
    let mut fold_of = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut next = 0;
    for (label, members) in classes {
        if members.len() < k {
            let w = format!(
                "class `{label}` has {} samples, fewer than k = {k}; some folds lack it",
                members.len()
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        let mut ids: Vec<&str> = members.iter().map(|e| e.sample_id.as_str()).collect();
        ids.shuffle(&mut rng);
        for id in ids {
            fold_of.insert(id.to_owned(), next);
            next = (next + 1) % k;
        }
    }
    Ok((FoldAssignment { k, seed, fold_of }, warnings))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub derived_id: String,
    pub origin_id: String,
    pub protocol: ProtocolKind,
    pub transform: String,
    /// Path relative to the fold directory.
    pub path: String,
    /// Same-class partner used by mixing transforms, if any.
    pub partner_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AugmentedIndex {
    pub rows: Vec<IndexRow>,
}

impl AugmentedIndex {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["derived_id", "origin_id", "protocol", "transform", "path"])?;
        for r in &self.rows {
            w.write_record([
                &r.derived_id,
                &r.origin_id,
                r.protocol.token(),
                &r.transform,
                &r.path,
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 5 {
                return Err(Error::Manifest {
                    path: path.to_owned(),
                    line,
                    detail: "expected 5 fields".into(),
                });
            }
            rows.push(IndexRow {
                derived_id: rec[0].to_owned(),
                origin_id: rec[1].to_owned(),
                protocol: rec[2].parse()?,
                transform: rec[3].to_owned(),
                path: rec[4].to_owned(),
                partner_id: None,
            });
        }
        Ok(Self { rows })
    }
}

/// Fails if any row originates in, or mixes with, a sample of `test_fold`.
pub fn check_leakage(
    index: &AugmentedIndex,
    folds: &FoldAssignment,
    test_fold: usize,
) -> Result<()> {
    for r in &index.rows {
        for id in std::iter::once(&r.origin_id).chain(r.partner_id.as_ref()) {
            match folds.fold(id) {
                Some(f) if f != test_fold => {}
                Some(_) => {
                    return Err(Error::Leakage(format!(
                        "`{}` depends on test-fold sample `{id}`",
                        r.derived_id
                    )))
                }
                None => return Err(Error::param("folds", format!("`{id}` has no fold"))),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub dgt: DgtParams,
    pub exec: Execution,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    /// Training rows: originals and their derived items.
    pub index: AugmentedIndex,
    /// Test-fold passthrough rows.
    pub test_index: AugmentedIndex,
    pub warnings: Vec<String>,
    pub fold_dir: PathBuf,
}

fn extension(item: &Item) -> &'static str {
    match item {
        Item::Audio(_) => "wav",
        Item::Spectrogram(_) => "spg",
        Item::Image(_) => "png",
    }
}

fn write_item(item: &Item, path: &Path) -> Result<()> {
    match item {
        Item::Audio(a) => write_wav(a, path),
        Item::Spectrogram(s) => save_spec(s, path),
        Item::Image(i) => save_png(i, path),
    }
}

/// Loads a manifest entry in the representation the protocol works on.
fn load_item(entry: &ManifestEntry, kind: ProtocolKind, dgt_params: &DgtParams) -> Result<Item> {
    let audio = read_wav(&entry.path)?;
    Ok(match kind {
        ProtocolKind::NoAug | ProtocolKind::StandardSgn | ProtocolKind::Signal => {
            Item::Audio(audio)
        }
        ProtocolKind::Spectro => Item::Spectrogram(dgt(&audio, dgt_params)?),
        ProtocolKind::StandardImg => Item::Image(render(&dgt(&audio, dgt_params)?, dgt_params)),
    })
}

/// Partner spectrograms are cropped or zero-padded to the item's width so
/// that clips of different lengths can be mixed.
fn align_partner(item: &Item, partner: Item) -> Item {
    match (item, partner) {
        (Item::Spectrogram(s), Item::Spectrogram(p)) if p.cols() != s.cols() => {
            Item::Spectrogram(p.fit_width(s.cols()))
        }
        (_, p) => p,
    }
}

struct Job<'a> {
    entry: &'a ManifestEntry,
    classmates: Vec<&'a ManifestEntry>,
    is_test: bool,
}

/// Exports the augmented training set for `test_fold` under
/// `out_dir/fold_<test_fold>/`: `train/` and `index.csv` for the training
/// portion, `test/` and `test_index.csv` for the untouched test fold.
pub fn build_training_set(
    m: &Manifest,
    folds: &FoldAssignment,
    test_fold: usize,
    protocol: &AugmentationProtocol,
    opts: &BuildOptions,
) -> Result<BuildReport> {
    if test_fold >= folds.k {
        return Err(Error::param(
            "test_fold",
            format!("{test_fold} is not below k = {}", folds.k),
        ));
    }
    for e in &m.entries {
        if folds.fold(&e.sample_id).is_none() {
            return Err(Error::param(
                "folds",
                format!("sample `{}` has no fold", e.sample_id),
            ));
        }
    }
    let in_test = |e: &ManifestEntry| folds.fold(&e.sample_id) == Some(test_fold);

    let mut train_by_class: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in m.entries.iter().filter(|e| !in_test(e)) {
        train_by_class.entry(e.label.as_str()).or_default().push(e);
    }
    let jobs: Vec<Job> = m
        .entries
        .iter()
        .map(|e| {
            let is_test = in_test(e);
            let classmates = if is_test {
                Vec::new()
            } else {
                train_by_class[e.label.as_str()]
                    .iter()
                    .copied()
                    .filter(|c| c.sample_id != e.sample_id)
                    .collect()
            };
            Job {
                entry: e,
                classmates,
                is_test,
            }
        })
        .collect();

    let fold_dir = opts.out_dir.join(format!("fold_{test_fold}"));
    for sub in ["train", "test"] {
        let d = fold_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let kind = protocol.kind();
    let results = exec::map(&jobs, opts.exec, |job| {
        run_job(job, protocol, kind, &fold_dir, opts)
    });

    let mut report = BuildReport {
        fold_dir: fold_dir.clone(),
        ..BuildReport::default()
    };
    for (job, result) in jobs.iter().zip(results) {
        let (rows, warnings) = result?;
        report.warnings.extend(warnings);
        if job.is_test {
            report.test_index.rows.extend(rows);
        } else {
            report.index.rows.extend(rows);
        }
    }
    report.index.write_csv(fold_dir.join("index.csv"))?;
    report
        .test_index
        .write_csv(fold_dir.join("test_index.csv"))?;
    Ok(report)
}

fn run_job(
    job: &Job,
    protocol: &AugmentationProtocol,
    kind: ProtocolKind,
    fold_dir: &Path,
    opts: &BuildOptions,
) -> Result<(Vec<IndexRow>, Vec<String>)> {
    let entry = job.entry;
    let item = load_item(entry, kind, &opts.dgt)?;
    let mut warnings = Vec::new();

    let row = |n: usize, transform: &str, sub: &str, ext: &str, partner: Option<String>| {
        let derived_id = format!(
            "{}__{}__{}__{}",
            entry.sample_id,
            kind.token(),
            transform,
            n
        );
        IndexRow {
            path: format!("{sub}/{derived_id}.{ext}"),
            derived_id,
            origin_id: entry.sample_id.clone(),
            protocol: kind,
            transform: transform.to_owned(),
            partner_id: partner,
        }
    };

    if job.is_test {
        let r = row(0, "identity", "test", extension(&item), None);
        write_item(&item, &fold_dir.join(&r.path))?;
        return Ok((vec![r], warnings));
    }

    let mut rng = RngStream::for_task(opts.seed, &entry.sample_id, 0);
    let (pool, partner_id) = if protocol.needs_partner() {
        let partner = if job.classmates.is_empty() {
            let w = format!(
                "sample `{}` has no training classmate; mixing with itself",
                entry.sample_id
            );
            log::warn!("{w}");
            warnings.push(w);
            entry
        } else {
            job.classmates[rng.random_range(0..job.classmates.len())]
        };
        let p = if partner.sample_id == entry.sample_id {
            item.clone()
        } else {
            align_partner(&item, load_item(partner, kind, &opts.dgt)?)
        };
        (vec![p], Some(partner.sample_id.clone()))
    } else {
        (Vec::new(), None)
    };

    let outputs = apply_protocol(&item, protocol, &pool, &mut rng)?;
    let mut rows = Vec::with_capacity(outputs.len());
    for (n, aug) in outputs.iter().enumerate() {
        let mixes = n > 0 && is_mixing(&aug.transform);
        let r = row(
            n,
            &aug.transform,
            "train",
            extension(&aug.item),
            if mixes { partner_id.clone() } else { None },
        );
        write_item(&aug.item, &fold_dir.join(&r.path))?;
        rows.push(r);
    }
    Ok((rows, warnings))
}

fn is_mixing(transform: &str) -> bool {
    matches!(transform, "sound_mix" | "same_class_sum" | "emda")
}
