//! Command-line surface: argument parsing, batch orchestration, and run
//! artifacts (masks, JSON sidecars, CSV tables, manifests).
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence
//! under `--strict`. Per-file failures in batch runs are collected into the
//! run report instead of aborting; a batch fails (exit 2) only when nothing
//! could be processed at all.
//!
//! Every run writes `manifest.json` embedding the fully resolved config and
//! root seed. Batch work is farmed to a worker pool, but per-file seeds are
//! derived from the file's position in the sorted input list and all files
//! are written by the coordinator, so any `--jobs` setting produces
//! byte-identical outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{quality_report, stage_delta_from_stats, StageDeltaReport};
use crate::mask::{load_mask, save_mask, BinaryMask};
use crate::morphometry::{
    mean_thickness, partition_stages, severity_from_parts, stage_statistics_from_pairs, StageStats,
};
use crate::propagation::{derive_seed, propagate_skeleton};
use crate::report::{
    self, AnalyzeReport, ElongateSidecar, EvaluateReport, FileError, Manifest, MaskRecord,
    PairMeans, PairRecord, StageSummary, TraceRecord, TranslateSidecar,
};
use crate::skeleton::skeletonize_with;
use crate::synthesis::{translate_stage, TranslationRequest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

/// Seed environment fallback, consulted when neither `--seed` nor the
/// config pins one.
pub const SEED_ENV_VAR: &str = "CRACKFORGE_SEED";

const MASK_EXTENSIONS: [&str; 2] = ["png", "pgm"];

#[derive(Parser, Debug)]
#[command(
    name = "crackforge",
    version,
    about = "Grow, thicken, and measure binary crack masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure every mask in a directory and split them into severity stages
    Analyze(AnalyzeArgs),
    /// Thin a mask and grow each skeleton endpoint once
    Elongate(ElongateArgs),
    /// Re-synthesize masks until they match target stage statistics
    Translate(TranslateArgs),
    /// Compare a generated mask population (and optional pairs) to a real one
    Evaluate(EvaluateArgs),
    /// Write masks into stage0/ stage1/ stage2/ buckets by severity
    StageSplit(StageSplitArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat `key = value` config file; command-line flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root random seed (overrides config and CRACKFORGE_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Foreground threshold: luma strictly above it is foreground
    #[arg(long)]
    threshold: Option<u8>,
    /// Resize inputs to 256x256 (nearest neighbor) before processing
    #[arg(long)]
    resize: bool,
    /// Worker threads for batch work; 0 uses all cores
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory, created if missing
    #[arg(long, default_value = "crackforge-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Directory of mask images (.png/.pgm), scanned recursively
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ElongateArgs {
    /// Mask image to grow
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct TranslateArgs {
    /// Mask file, or directory of masks to translate as a batch
    input: PathBuf,
    /// Target stage label, looked up in --stats
    #[arg(
        long,
        value_name = "N",
        conflicts_with_all = ["target_s", "target_t"],
        requires = "stats"
    )]
    to_stage: Option<u8>,
    /// Stage statistics JSON from a prior analyze run
    #[arg(long, value_name = "FILE")]
    stats: Option<PathBuf>,
    /// Explicit target saturation (requires --target-t)
    #[arg(long, value_name = "S", requires = "target_t")]
    target_s: Option<f64>,
    /// Explicit target mean half-thickness (requires --target-s)
    #[arg(long, value_name = "T", requires = "target_s")]
    target_t: Option<f64>,
    /// Exit 3 when any input fails to converge
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory of reference masks (flat, or with stage0..stage2 subdirs)
    real: PathBuf,
    /// Directory of generated masks with the same layout
    generated: PathBuf,
    /// CSV pairing file, one `real,generated` relative path pair per line
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
    /// Stage label to report for flat directory comparisons
    #[arg(long, default_value_t = 0)]
    stage: u8,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct StageSplitArgs {
    /// Directory of mask images to bucket by severity
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

/// Parses `std::env::args` and runs the selected command, returning the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Elongate(args) => cmd_elongate(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::StageSplit(args) => cmd_stage_split(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Usage(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

/// Loads the config, applies flag overrides, and resolves the root seed
/// (flag, then config, then CRACKFORGE_SEED, then 0). The returned config
/// has the seed folded in so manifests are self-describing.
fn resolve_run(common: &CommonArgs) -> Result<(RunConfig, u64)> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(threshold) = common.threshold {
        cfg.threshold = threshold;
    }
    let seed = match (common.seed, cfg.seed) {
        (Some(seed), _) => seed,
        (None, Some(seed)) => seed,
        (None, None) => seed_from_env()?,
    };
    cfg.seed = Some(seed);
    Ok((cfg, seed))
}

fn seed_from_env() -> Result<u64> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.trim().parse().map_err(|_| {
            Error::Usage(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got `{text}`"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Data(format!("cannot build worker pool: {e}")))
}

fn prepare_out(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn is_mask_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| MASK_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Mask files under `dir` (recursive) as (relative name, full path), sorted
/// by relative name so every run sees the same order on every platform.
fn collect_mask_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("{}: not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).follow_links(true) {
        let entry =
            entry.map_err(|e| Error::Data(format!("cannot scan {}: {e}", dir.display())))?;
        if entry.file_type().is_file() && is_mask_file(entry.path()) {
            let rel = entry
                .path()
                .strip_prefix(dir)
                .unwrap_or(entry.path())
                .to_string_lossy()
                .replace('\\', "/");
            files.push((rel, entry.path().to_path_buf()));
        }
    }
    files.sort();
    Ok(files)
}

/// Either the single named file, or every mask file in the directory.
fn gather_inputs(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    if input.is_dir() {
        collect_mask_files(input)
    } else if input.is_file() {
        let rel = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Data(format!("{}: not a file name", input.display())))?;
        Ok(vec![(rel, input.to_path_buf())])
    } else {
        Err(Error::Data(format!(
            "{}: no such file or directory",
            input.display()
        )))
    }
}

/// Flattens a relative name ("a/b.png") into an output stem ("a__b").
fn flat_stem(rel: &str) -> String {
    let no_ext = rel.rsplit_once('.').map_or(rel, |(stem, _)| stem);
    no_ext.replace('/', "__")
}

fn load_input(path: &Path, cfg: &RunConfig, resize: bool) -> Result<BinaryMask> {
    let mask = load_mask(path, cfg.threshold)?;
    if resize {
        mask.resize_nearest(256, 256)
    } else {
        Ok(mask)
    }
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    common: &CommonArgs,
    inputs: &[&Path],
    cfg: &RunConfig,
) -> Result<()> {
    let manifest = Manifest {
        command: command.to_owned(),
        seed,
        resize: common.resize,
        inputs: inputs
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        out_dir: out.to_string_lossy().into_owned(),
        config: cfg.clone(),
    };
    report::write_json(&out.join("manifest.json"), &manifest)
}

/// One fully measured mask.
struct Measured {
    rel: String,
    mask: BinaryMask,
    saturation: f64,
    thickness: f64,
    severity: f64,
}

/// Loads and measures every file, in parallel, preserving input order.
/// Failures become per-file error records instead of aborting the batch.
fn measure_directory(
    files: &[(String, PathBuf)],
    cfg: &RunConfig,
    resize: bool,
    pool: &rayon::ThreadPool,
) -> (Vec<Measured>, Vec<FileError>) {
    let results: Vec<std::result::Result<Measured, FileError>> = pool.install(|| {
        files
            .par_iter()
            .map(|(rel, path)| {
                let run = || -> Result<Measured> {
                    let mask = load_input(path, cfg, resize)?;
                    let thickness = mean_thickness(&mask)?;
                    let saturation = mask.saturation();
                    let severity = severity_from_parts(saturation, thickness, &cfg.severity_norm())?;
                    Ok(Measured {
                        rel: rel.clone(),
                        mask,
                        saturation,
                        thickness,
                        severity,
                    })
                };
                run().map_err(|e| FileError {
                    file: rel.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    });
    let mut measured = Vec::new();
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok(m) => measured.push(m),
            Err(e) => errors.push(e),
        }
    }
    (measured, errors)
}

fn standard_notes(resize: bool) -> Vec<String> {
    let mut notes = vec![
        "stage thresholds are the one-third and two-thirds interpolated percentiles \
         of the severity score"
            .to_owned(),
        "saturation and thickness statistics depend on the working resolution".to_owned(),
    ];
    if resize {
        notes.push(
            "inputs were resized to 256x256 with nearest-neighbor sampling, which keeps \
             masks binary but can shift statistics relative to native-resolution references"
                .to_owned(),
        );
    }
    notes
}

/// Builds the analysis report: stage labels (when at least 3 masks scored),
/// per-stage and overall statistics, and per-mask records.
fn assemble_report(
    measured: &[Measured],
    errors: Vec<FileError>,
    mut notes: Vec<String>,
) -> (AnalyzeReport, Vec<Option<u8>>) {
    let mut labels: Vec<Option<u8>> = vec![None; measured.len()];
    let mut stages = Vec::new();
    if measured.len() >= 3 {
        let scores: Vec<f64> = measured.iter().map(|m| m.severity).collect();
        let assigned = partition_stages(&scores).expect("length checked above");
        for (slot, stage) in labels.iter_mut().zip(&assigned) {
            *slot = Some(*stage);
        }
        for stage in 0..=2u8 {
            let pairs: Vec<(f64, f64)> = measured
                .iter()
                .zip(&assigned)
                .filter(|(_, s)| **s == stage)
                .map(|(m, _)| (m.saturation, m.thickness))
                .collect();
            if !pairs.is_empty() {
                stages.push(StageSummary {
                    stage,
                    stats: stage_statistics_from_pairs(&pairs).expect("nonempty bucket"),
                });
            }
        }
    } else if !measured.is_empty() {
        notes.push(format!(
            "only {} mask(s) scored; at least 3 are needed to split stages",
            measured.len()
        ));
    }
    let overall = if measured.is_empty() {
        None
    } else {
        let pairs: Vec<(f64, f64)> = measured.iter().map(|m| (m.saturation, m.thickness)).collect();
        Some(stage_statistics_from_pairs(&pairs).expect("nonempty"))
    };
    let records = measured
        .iter()
        .zip(&labels)
        .map(|(m, stage)| MaskRecord {
            file: m.rel.clone(),
            width: m.mask.width(),
            height: m.mask.height(),
            saturation: m.saturation,
            mean_thickness: m.thickness,
            severity: m.severity,
            stage: *stage,
        })
        .collect();
    let report = AnalyzeReport {
        records,
        stages,
        overall,
        errors,
        notes,
    };
    (report, labels)
}

/// Exit code for a batch: data error when there were inputs but none
/// succeeded, success otherwise.
fn batch_exit(candidates: usize, successes: usize) -> i32 {
    if candidates > 0 && successes == 0 {
        EXIT_DATA
    } else {
        EXIT_OK
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let (cfg, seed) = resolve_run(&args.common)?;
    let out = prepare_out(&args.common.out)?;
    let files = collect_mask_files(&args.input)?;
    if files.is_empty() {
        eprintln!(
            "warning: no mask files (.png/.pgm) under {}",
            args.input.display()
        );
    }
    let pool = build_pool(args.common.jobs)?;
    let (measured, errors) = measure_directory(&files, &cfg, args.common.resize, &pool);
    let (report, _) = assemble_report(&measured, errors, standard_notes(args.common.resize));
    report::write_json(&out.join("analyze.json"), &report)?;
    write_text(&out.join("records.csv"), &report::mask_records_csv(&report.records))?;
    write_text(&out.join("stages.csv"), &report::stage_summaries_csv(&report.stages))?;
    write_manifest(&out, "analyze", seed, &args.common, &[&args.input], &cfg)?;
    println!(
        "analyze: {} mask(s), {} error(s), {} stage group(s) -> {}",
        report.records.len(),
        report.errors.len(),
        report.stages.len(),
        out.display()
    );
    Ok(batch_exit(files.len(), report.records.len()))
}

fn cmd_elongate(args: ElongateArgs) -> Result<i32> {
    let (cfg, seed) = resolve_run(&args.common)?;
    let out = prepare_out(&args.common.out)?;
    let mask = load_input(&args.input, &cfg, args.common.resize)?;
    let skeleton = skeletonize_with(&mask, cfg.thinning);
    let saturation_before = skeleton.as_mask().saturation();
    let outcome = propagate_skeleton(
        skeleton,
        &cfg.propagation_params(seed),
        &cfg.orientation_params(),
    )?;
    let grown = outcome.skeleton.into_mask();
    let rel = args
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Data(format!("{}: not a file name", args.input.display())))?;
    let stem = flat_stem(&rel);
    let mask_name = format!("{stem}.elongated.png");
    save_mask(&grown, out.join(&mask_name))?;
    let sidecar = ElongateSidecar {
        input: args.input.to_string_lossy().into_owned(),
        output: mask_name,
        seed,
        saturation_before,
        saturation_after: grown.saturation(),
        skipped: outcome.skipped,
        walks: outcome
            .traces
            .iter()
            .map(|t| TraceRecord {
                origin: t.origin,
                theta0: t.theta0,
                budget: t.budget,
                steps_taken: t.steps_taken,
                termination: t.termination,
            })
            .collect(),
    };
    report::write_json(&out.join(format!("{stem}.elongated.json")), &sidecar)?;
    write_manifest(&out, "elongate", seed, &args.common, &[&args.input], &cfg)?;
    println!(
        "elongate: {} walk(s), saturation {:.6} -> {:.6} -> {}",
        sidecar.walks.len(),
        sidecar.saturation_before,
        sidecar.saturation_after,
        out.display()
    );
    Ok(EXIT_OK)
}

/// Target resolution order: explicit flags, then --to-stage lookup, then
/// config-file targets. Flags always win over the config file.
fn resolve_targets(args: &TranslateArgs, cfg: &RunConfig) -> Result<StageStats> {
    if let (Some(s), Some(t)) = (args.target_s, args.target_t) {
        return Ok(StageStats::from_means(s, t));
    }
    if let Some(stage) = args.to_stage {
        let stats_path = args.stats.as_ref().expect("clap enforces --stats");
        return stage_target_from_stats(stats_path, stage);
    }
    if let (Some(s), Some(t)) = (cfg.target_s, cfg.target_t) {
        return Ok(StageStats::from_means(s, t));
    }
    Err(Error::Usage(
        "no targets: pass --target-s with --target-t, or --to-stage with --stats, \
         or set target.s and target.t in the config"
            .into(),
    ))
}

/// Reads stage statistics for `stage` from an analyze-run JSON report
/// (either the full report or just its `stages` array).
fn stage_target_from_stats(path: &Path, stage: u8) -> Result<StageStats> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: not valid JSON: {e}", path.display())))?;
    let stages = value
        .get("stages")
        .and_then(|v| v.as_array())
        .or_else(|| value.as_array())
        .ok_or_else(|| Error::Data(format!("{}: no `stages` array", path.display())))?;
    for entry in stages {
        if let Ok(summary) = serde_json::from_value::<StageSummary>(entry.clone()) {
            if summary.stage == stage {
                return Ok(summary.stats);
            }
        }
    }
    Err(Error::Data(format!(
        "{}: no statistics for stage {stage}",
        path.display()
    )))
}

fn cmd_translate(args: TranslateArgs) -> Result<i32> {
    let (mut cfg, seed) = resolve_run(&args.common)?;
    let target = resolve_targets(&args, &cfg)?;
    cfg.target_s = Some(target.saturation_mean);
    cfg.target_t = Some(target.thickness_mean);
    let out = prepare_out(&args.common.out)?;
    let files = gather_inputs(&args.input)?;
    if files.is_empty() {
        eprintln!(
            "warning: no mask files (.png/.pgm) under {}",
            args.input.display()
        );
    }
    let pool = build_pool(args.common.jobs)?;
    let results: Vec<std::result::Result<(TranslateSidecar, BinaryMask), FileError>> =
        pool.install(|| {
            files
                .par_iter()
                .enumerate()
                .map(|(idx, (rel, path))| {
                    let run = || -> Result<(TranslateSidecar, BinaryMask)> {
                        let source = load_input(path, &cfg, args.common.resize)?;
                        let file_seed = derive_seed(seed, idx as u64);
                        let mut request = TranslationRequest::new(source, target);
                        request.prop = cfg.propagation_params(file_seed);
                        request.lee = cfg.orientation_params();
                        request.thinning = cfg.thinning;
                        request.tol_rel = cfg.tol_rel;
                        request.max_iters = cfg.max_iters;
                        request.branching = cfg.branching;
                        request.weights = cfg.morphology_weights();
                        let result = translate_stage(&request)?;
                        let sidecar = TranslateSidecar {
                            input: rel.clone(),
                            output: format!("{}.translated.png", flat_stem(rel)),
                            seed: file_seed,
                            target_s: target.saturation_mean,
                            target_t: target.thickness_mean,
                            achieved_s: result.achieved.0,
                            achieved_t: result.achieved.1,
                            iterations: result.iterations,
                            converged: result.converged,
                            morphology_score: result.morphology_score,
                        };
                        Ok((sidecar, result.mask))
                    };
                    run().map_err(|e| FileError {
                        file: rel.clone(),
                        error: e.to_string(),
                    })
                })
                .collect()
        });
    let mut sidecars = Vec::new();
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok((sidecar, mask)) => {
                save_mask(&mask, out.join(&sidecar.output))?;
                let stem = flat_stem(&sidecar.input);
                report::write_json(&out.join(format!("{stem}.translated.json")), &sidecar)?;
                sidecars.push(sidecar);
            }
            Err(e) => errors.push(e),
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        results: &'a [TranslateSidecar],
        errors: &'a [FileError],
    }
    report::write_json(
        &out.join("summary.json"),
        &Summary {
            results: &sidecars,
            errors: &errors,
        },
    )?;
    write_manifest(&out, "translate", seed, &args.common, &[&args.input], &cfg)?;
    let unconverged = sidecars.iter().filter(|s| !s.converged).count();
    println!(
        "translate: {} ok ({} unconverged), {} error(s) -> {}",
        sidecars.len(),
        unconverged,
        errors.len(),
        out.display()
    );
    let code = batch_exit(files.len(), sidecars.len());
    if code != EXIT_OK {
        return Ok(code);
    }
    if args.strict && unconverged > 0 {
        eprintln!("error: {unconverged} mask(s) did not converge under --strict");
        return Ok(EXIT_STRICT);
    }
    Ok(EXIT_OK)
}

/// Stage subdirectories (`stage0`..`stage2`) present under `dir`.
fn stage_layout(dir: &Path) -> Vec<(u8, PathBuf)> {
    (0..=2u8)
        .filter_map(|k| {
            let sub = dir.join(format!("stage{k}"));
            sub.is_dir().then_some((k, sub))
        })
        .collect()
}

/// Population statistics of every readable mask under `dir`.
fn population_stats(
    dir: &Path,
    cfg: &RunConfig,
    resize: bool,
    pool: &rayon::ThreadPool,
    label: &str,
    errors: &mut Vec<FileError>,
) -> Result<StageStats> {
    let files = collect_mask_files(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no mask files", dir.display())));
    }
    let (measured, errs) = measure_directory(&files, cfg, resize, pool);
    errors.extend(errs.into_iter().map(|mut e| {
        e.file = format!("{label}/{}", e.file);
        e
    }));
    if measured.is_empty() {
        return Err(Error::Data(format!(
            "{}: no readable masks",
            dir.display()
        )));
    }
    let pairs: Vec<(f64, f64)> = measured.iter().map(|m| (m.saturation, m.thickness)).collect();
    Ok(stage_statistics_from_pairs(&pairs).expect("nonempty"))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32> {
    let (cfg, seed) = resolve_run(&args.common)?;
    let out = prepare_out(&args.common.out)?;
    let pool = build_pool(args.common.jobs)?;
    let mut errors = Vec::new();
    let mut notes = standard_notes(args.common.resize);

    let real_stages = stage_layout(&args.real);
    let gen_stages = stage_layout(&args.generated);
    let common_stages: Vec<(u8, PathBuf, PathBuf)> = real_stages
        .iter()
        .filter_map(|(k, real_dir)| {
            gen_stages
                .iter()
                .find(|(g, _)| g == k)
                .map(|(_, gen_dir)| (*k, real_dir.clone(), gen_dir.clone()))
        })
        .collect();

    let mut deltas: Vec<StageDeltaReport> = Vec::new();
    if common_stages.is_empty() {
        let real = population_stats(
            &args.real,
            &cfg,
            args.common.resize,
            &pool,
            "real",
            &mut errors,
        )?;
        let generated = population_stats(
            &args.generated,
            &cfg,
            args.common.resize,
            &pool,
            "generated",
            &mut errors,
        )?;
        deltas.push(stage_delta_from_stats(args.stage, real, generated));
    } else {
        notes.push("stage subdirectories detected; deltas are reported per stage".to_owned());
        for (stage, real_dir, gen_dir) in &common_stages {
            let real = population_stats(
                real_dir,
                &cfg,
                args.common.resize,
                &pool,
                &format!("real/stage{stage}"),
                &mut errors,
            )?;
            let generated = population_stats(
                gen_dir,
                &cfg,
                args.common.resize,
                &pool,
                &format!("generated/stage{stage}"),
                &mut errors,
            )?;
            deltas.push(stage_delta_from_stats(*stage, real, generated));
        }
    }

    let mut pair_records: Vec<PairRecord> = Vec::new();
    if let Some(pairs_path) = &args.pairs {
        for (real_rel, gen_rel) in parse_pairs(pairs_path)? {
            let a = load_input(&args.real.join(&real_rel), &cfg, args.common.resize)?;
            let b = load_input(&args.generated.join(&gen_rel), &cfg, args.common.resize)?;
            let q = quality_report(&a, &b)?;
            pair_records.push(PairRecord {
                real: real_rel,
                generated: gen_rel,
                l1: q.l1,
                ssim: q.ssim,
                psnr_db: q.psnr_db,
            });
        }
    } else {
        notes.push("no pairing file given; only population deltas are reported".to_owned());
    }
    let pair_means = if pair_records.is_empty() {
        None
    } else {
        let n = pair_records.len() as f64;
        Some(PairMeans {
            l1: pair_records.iter().map(|p| p.l1).sum::<f64>() / n,
            ssim: pair_records.iter().map(|p| p.ssim).sum::<f64>() / n,
            psnr_db: pair_records.iter().map(|p| p.psnr_db).sum::<f64>() / n,
        })
    };

    let report = EvaluateReport {
        stages: deltas,
        pairs: pair_records,
        pair_means,
        errors,
        notes,
    };
    report::write_json(&out.join("evaluate.json"), &report)?;
    write_text(&out.join("stage_deltas.csv"), &report::stage_deltas_csv(&report.stages))?;
    if !report.pairs.is_empty() {
        write_text(&out.join("pairs.csv"), &report::pair_records_csv(&report.pairs))?;
    }
    let mut inputs: Vec<&Path> = vec![&args.real, &args.generated];
    if let Some(p) = &args.pairs {
        inputs.push(p);
    }
    write_manifest(&out, "evaluate", seed, &args.common, &inputs, &cfg)?;
    println!(
        "evaluate: {} stage delta(s), {} pair(s), {} error(s) -> {}",
        report.stages.len(),
        report.pairs.len(),
        report.errors.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

/// Parses a `real,generated` CSV pairing file; an optional header line and
/// `#` comments are tolerated.
fn parse_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("real,generated") {
            continue;
        }
        let Some((a, b)) = line.split_once(',') else {
            return Err(Error::Data(format!(
                "{}:{}: expected `real,generated`",
                path.display(),
                idx + 1
            )));
        };
        out.push((a.trim().to_owned(), b.trim().to_owned()));
    }
    Ok(out)
}

fn cmd_stage_split(args: StageSplitArgs) -> Result<i32> {
    let (cfg, seed) = resolve_run(&args.common)?;
    let out = prepare_out(&args.common.out)?;
    let files = collect_mask_files(&args.input)?;
    if files.is_empty() {
        eprintln!(
            "warning: no mask files (.png/.pgm) under {}",
            args.input.display()
        );
        write_manifest(&out, "stage-split", seed, &args.common, &[&args.input], &cfg)?;
        return Ok(EXIT_OK);
    }
    let pool = build_pool(args.common.jobs)?;
    let (measured, errors) = measure_directory(&files, &cfg, args.common.resize, &pool);
    if measured.len() < 3 {
        return Err(Error::Data(format!(
            "stage split needs at least 3 scored masks, found {}",
            measured.len()
        )));
    }
    let (report, labels) = assemble_report(&measured, errors, standard_notes(args.common.resize));
    for k in 0..=2u8 {
        std::fs::create_dir_all(out.join(format!("stage{k}")))
            .map_err(|e| Error::io(&out, e))?;
    }
    let mut counts = [0usize; 3];
    for (m, label) in measured.iter().zip(&labels) {
        let stage = label.expect("all labeled when n >= 3");
        counts[stage as usize] += 1;
        save_mask(
            &m.mask,
            out.join(format!("stage{stage}"))
                .join(format!("{}.png", flat_stem(&m.rel))),
        )?;
    }
    report::write_json(&out.join("split.json"), &report)?;
    write_text(&out.join("records.csv"), &report::mask_records_csv(&report.records))?;
    write_manifest(&out, "stage-split", seed, &args.common, &[&args.input], &cfg)?;
    println!(
        "stage-split: {}/{}/{} mask(s) into stage0/stage1/stage2, {} error(s) -> {}",
        counts[0],
        counts[1],
        counts[2],
        report.errors.len(),
        out.display()
    );
    Ok(EXIT_OK)
}
