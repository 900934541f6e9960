use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use audioaug::dataset::{
    build_training_set, check_leakage, load_manifest, stratified_folds, BuildOptions,
    FoldAssignment,
};
use audioaug::dgt::{render, save_png};
use audioaug::exec;
use audioaug::fusion::{
    fuse_spec, read_scores_csv, recognition_rate, sanitize, write_scores_csv, FusionRecipe,
};
use audioaug::{dgt, read_wav, save_spec, DgtParams};

use crate::{AugmentArgs, Context, EvalArgs, Failure, FuseArgs, SpectrogramArgs, SplitArgs};

fn output_dir(flag: &Option<PathBuf>, ctx: &Context) -> Result<PathBuf, Failure> {
    flag.clone()
        .or_else(|| ctx.config.output_dir.clone())
        .ok_or_else(|| {
            Failure::Usage("--out is required unless the config sets `output_dir`".into())
        })
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Processing(format!("cannot create {}: {e}", dir.display())))
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::Processing(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn convert(path: &Path, out: &Path, params: &DgtParams) -> audioaug::Result<String> {
    let signal = read_wav(path)?;
    let spec = dgt(&signal, params)?;
    let stem = path.file_stem().unwrap_or_default();
    let spg = out.join(stem).with_extension("spg");
    save_spec(&spec, &spg)?;
    save_png(&render(&spec, params), spg.with_extension("png"))?;
    Ok(format!(
        "{}: {} x {} bins, {:.2} Hz x {:.2} ms -> {}",
        path.display(),
        spec.rows(),
        spec.cols(),
        spec.freq_resolution,
        spec.time_resolution * 1e3,
        spg.display()
    ))
}

pub fn spectrogram(ctx: &Context, a: &SpectrogramArgs) -> Result<ExitCode, Failure> {
    let out = output_dir(&a.out, ctx)?;
    let inputs = if a.input.is_dir() {
        wav_files(&a.input)?
    } else if a.input.is_file() {
        vec![a.input.clone()]
    } else {
        return Err(Failure::Usage(format!(
            "input {} does not exist",
            a.input.display()
        )));
    };
    if inputs.is_empty() {
        log::warn!("no WAV files in {}; nothing to do", a.input.display());
        return Ok(ExitCode::SUCCESS);
    }
    create_dir(&out)?;

    let results = exec::map(&inputs, ctx.exec, |p| convert(p, &out, &ctx.config.dgt));
    let mut failures = Vec::new();
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok(line) => println!("{line}"),
            Err(e) => failures.push(format!("{}: {e}", path.display())),
        }
    }
    if failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} of {} files failed:", failures.len(), inputs.len());
    for f in &failures {
        eprintln!("  {f}");
    }
    Ok(ExitCode::from(1))
}

pub fn augment(ctx: &Context, a: &AugmentArgs) -> Result<ExitCode, Failure> {
    let out = output_dir(&a.out, ctx)?;
    let seed = a.seed.or(ctx.config.seed).unwrap_or(0);
    let manifest = load_manifest(&a.manifest)?;
    let folds = FoldAssignment::load(&a.folds_file)?;
    let protocol = ctx.config.protocol(a.protocol);
    let opts = BuildOptions {
        out_dir: out,
        seed,
        dgt: ctx.config.dgt.clone(),
        exec: ctx.exec,
    };
    let report = build_training_set(&manifest, &folds, a.test_fold, &protocol, &opts)?;
    check_leakage(&report.index, &folds, a.test_fold)?;
    let originals = report
        .index
        .rows
        .iter()
        .filter(|r| r.transform == "identity")
        .count();
    println!(
        "{}: {} training rows from {} originals, {} test rows -> {}",
        protocol.kind().name(),
        report.index.rows.len(),
        originals,
        report.test_index.rows.len(),
        report.fold_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn split(ctx: &Context, a: &SplitArgs) -> Result<ExitCode, Failure> {
    let k = a.k.or(ctx.config.folds).unwrap_or(10);
    let seed = a.seed.or(ctx.config.seed).unwrap_or(0);
    let manifest = load_manifest(&a.manifest)?;
    let (folds, _warnings) = stratified_folds(&manifest, k, seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    folds.save(&a.out)?;
    println!(
        "{} samples in {k} folds -> {}",
        manifest.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn fuse(a: &FuseArgs) -> Result<ExitCode, Failure> {
    let recipe = FusionRecipe::load(&a.recipe)?;
    let fused = fuse_spec(&recipe)?;
    write_scores_csv(&fused, &a.out)?;
    println!(
        "{}: {} score files over {} samples -> {}",
        recipe.variant,
        recipe.classifiers.len(),
        fused.rows.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn eval(a: &EvalArgs) -> Result<ExitCode, Failure> {
    let scores = sanitize(&read_scores_csv(&a.scores)?);
    let rate = recognition_rate(&scores)?;
    for f in &rate.per_fold {
        println!(
            "fold {}: {:.4} ({}/{})",
            f.fold,
            f.accuracy(),
            f.correct,
            f.total
        );
    }
    println!("mean over folds: {:.4}", rate.mean);
    println!("pooled: {:.4}", rate.pooled);
    Ok(ExitCode::SUCCESS)
}
