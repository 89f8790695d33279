//! Serializable run artifacts: per-mask records, stage summaries, sidecars,
//! manifests, and their CSV renderings.
//!
//! Every artifact is deterministic for a given input set, config, and seed;
//! nothing here records wall-clock time or host details, so reruns are
//! byte-comparable.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::StageDeltaReport;
use crate::mask::PixelCoord;
use crate::morphometry::StageStats;
use crate::propagation::Termination;

/// Measurements of one mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    /// Path relative to the scanned input directory.
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub saturation: f64,
    pub mean_thickness: f64,
    pub severity: f64,
    /// Assigned stage label; absent when too few masks were scored to split.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage: Option<u8>,
}

/// A per-file failure that did not abort the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub file: String,
    pub error: String,
}

/// Statistics of one stage bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: u8,
    #[serde(flatten)]
    pub stats: StageStats,
}

/// Output of a directory analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub records: Vec<MaskRecord>,
    /// Per-stage statistics; empty when fewer than three masks were scored.
    pub stages: Vec<StageSummary>,
    /// Statistics over every scored mask regardless of stage.
    pub overall: Option<StageStats>,
    pub errors: Vec<FileError>,
    pub notes: Vec<String>,
}

/// Record of one endpoint walk, for sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub origin: PixelCoord,
    pub theta0: f64,
    pub budget: u32,
    pub steps_taken: u32,
    pub termination: Termination,
}

/// Sidecar written next to each elongated mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElongateSidecar {
    pub input: String,
    pub output: String,
    pub seed: u64,
    pub saturation_before: f64,
    pub saturation_after: f64,
    /// Endpoints skipped because their orientation window was degenerate.
    pub skipped: Vec<PixelCoord>,
    pub walks: Vec<TraceRecord>,
}

/// Sidecar written next to each stage-translated mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateSidecar {
    pub input: String,
    pub output: String,
    pub seed: u64,
    pub target_s: f64,
    pub target_t: f64,
    pub achieved_s: f64,
    pub achieved_t: f64,
    pub iterations: u32,
    pub converged: bool,
    pub morphology_score: f64,
}

/// Paired-mask quality metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub real: String,
    pub generated: String,
    pub l1: f64,
    pub ssim: f64,
    pub psnr_db: f64,
}

/// Output of a population or paired evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    /// Population-level stat deltas, one entry per evaluated stage.
    pub stages: Vec<StageDeltaReport>,
    /// Per-pair metrics; empty when no pairing manifest was given.
    pub pairs: Vec<PairRecord>,
    /// Unweighted means over `pairs`, when any.
    pub pair_means: Option<PairMeans>,
    pub errors: Vec<FileError>,
    pub notes: Vec<String>,
}

/// Unweighted means of paired metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeans {
    pub l1: f64,
    pub ssim: f64,
    pub psnr_db: f64,
}

/// Reproducibility record written once per run.
///
/// Deliberately excludes the parallelism degree: worker count never changes
/// outputs, and keeping it out lets runs at different `--jobs` settings be
/// compared byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub resize: bool,
    pub inputs: Vec<String>,
    pub out_dir: String,
    pub config: RunConfig,
}

/// Serializes `value` as pretty JSON (with trailing newline) to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Quotes a CSV field when it contains a delimiter, quote, or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// CSV rendering of per-mask records, header included.
pub fn mask_records_csv(records: &[MaskRecord]) -> String {
    let mut out = String::from("file,width,height,saturation,mean_thickness,severity,stage\n");
    for r in records {
        let stage = r.stage.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.file),
            r.width,
            r.height,
            r.saturation,
            r.mean_thickness,
            r.severity,
            stage
        );
    }
    out
}

/// CSV rendering of stage summaries, header included.
pub fn stage_summaries_csv(stages: &[StageSummary]) -> String {
    let mut out =
        String::from("stage,n,saturation_mean,saturation_std,thickness_mean,thickness_std\n");
    for s in stages {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.stage,
            s.stats.n,
            s.stats.saturation_mean,
            s.stats.saturation_std,
            s.stats.thickness_mean,
            s.stats.thickness_std
        );
    }
    out
}

/// CSV rendering of paired metrics, header included.
pub fn pair_records_csv(pairs: &[PairRecord]) -> String {
    let mut out = String::from("real,generated,l1,ssim,psnr_db\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&p.real),
            csv_field(&p.generated),
            p.l1,
            p.ssim,
            p.psnr_db
        );
    }
    out
}

/// CSV rendering of stage deltas, header included.
pub fn stage_deltas_csv(stages: &[StageDeltaReport]) -> String {
    let mut out = String::from(
        "stage,real_n,real_sat_mean,real_thick_mean,\
         gen_n,gen_sat_mean,gen_thick_mean,delta_s,delta_t\n",
    );
    for d in stages {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            d.stage,
            d.real.n,
            d.real.saturation_mean,
            d.real.thickness_mean,
            d.generated.n,
            d.generated.saturation_mean,
            d.generated.thickness_mean,
            d.delta_s,
            d.delta_t
        );
    }
    out
}
