//! Mask-to-mask quality metrics and real-vs-generated statistic deltas.
//!
//! All metrics treat masks as images with values 0 and 1 and dynamic range 1.
//! They are computed on hard binary masks; comparisons against numbers
//! obtained from grayscale outputs are only indicative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::morphometry::{stage_statistics, StageStats};

/// PSNR reported for identical images (mean squared error zero).
pub const PSNR_CAP_DB: f64 = 100.0;

/// Side length of the SSIM window.
pub const SSIM_WINDOW: u32 = 11;

const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Similarity summary of one mask pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Fraction of differing pixels.
    pub l1: f64,
    pub ssim: f64,
    pub psnr_db: f64,
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Mean absolute difference: the fraction of pixels where the masks differ.
pub fn l1_distance(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a, b)?;
    let mut differing = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if a.get(x, y) != b.get(x, y) {
                differing += 1;
            }
        }
    }
    Ok(differing as f64 / a.len() as f64)
}

/// Peak signal-to-noise ratio in decibels with unit dynamic range, capped at
/// [`PSNR_CAP_DB`] for identical inputs.
pub fn psnr(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let mse = l1_distance(a, b)?; // squared differences of 0/1 values equal their absolute values
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Single-scale structural similarity with an 11x11 Gaussian window
/// (sigma 1.5), stabilizers k1 = 0.01 and k2 = 0.03, dynamic range 1, and
/// the mean taken over fully valid window positions only.
pub fn ssim(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a, b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::TooSmallForSsim(a.width(), a.height(), SSIM_WINDOW));
    }

    let kernel = gaussian_kernel_2d(SSIM_WINDOW as usize, SSIM_SIGMA);
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let w = a.width() as usize;
    let h = a.height() as usize;
    let win = SSIM_WINDOW as usize;

    let mut total = 0.0f64;
    let mut windows = 0usize;
    for top in 0..=(h - win) {
        for left in 0..=(w - win) {
            let mut mu_a = 0.0f64;
            let mut mu_b = 0.0f64;
            let mut aa = 0.0f64;
            let mut bb = 0.0f64;
            let mut ab = 0.0f64;
            for dy in 0..win {
                for dx in 0..win {
                    let wgt = kernel[dy * win + dx];
                    let va = f64::from(a.get((left + dx) as u32, (top + dy) as u32));
                    let vb = f64::from(b.get((left + dx) as u32, (top + dy) as u32));
                    mu_a += wgt * va;
                    mu_b += wgt * vb;
                    aa += wgt * va * va;
                    bb += wgt * vb * vb;
                    ab += wgt * va * vb;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// All three pairwise metrics at once.
pub fn quality_report(a: &BinaryMask, b: &BinaryMask) -> Result<QualityReport> {
    Ok(QualityReport {
        l1: l1_distance(a, b)?,
        ssim: ssim(a, b)?,
        psnr_db: psnr(a, b)?,
    })
}

fn gaussian_kernel_2d(side: usize, sigma: f64) -> Vec<f64> {
    let center = (side as f64 - 1.0) / 2.0;
    let mut kernel = vec![0.0f64; side * side];
    let mut sum = 0.0f64;
    for (i, k) in kernel.iter_mut().enumerate() {
        let dx = (i % side) as f64 - center;
        let dy = (i / side) as f64 - center;
        *k = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        sum += *k;
    }
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Per-stage comparison of a real and a generated mask population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDeltaReport {
    pub stage: u8,
    pub real: StageStats,
    pub generated: StageStats,
    /// Absolute difference of mean saturations.
    pub delta_s: f64,
    /// Absolute difference of mean thicknesses.
    pub delta_t: f64,
}

/// Builds the delta report from already-computed statistics.
pub fn stage_delta_from_stats(
    stage: u8,
    real: StageStats,
    generated: StageStats,
) -> StageDeltaReport {
    StageDeltaReport {
        stage,
        real,
        generated,
        delta_s: (real.saturation_mean - generated.saturation_mean).abs(),
        delta_t: (real.thickness_mean - generated.thickness_mean).abs(),
    }
}

/// Measures both mask populations and reports their mean-statistic deltas.
pub fn stage_delta_report(
    real: &[BinaryMask],
    generated: &[BinaryMask],
    stage: u8,
) -> Result<StageDeltaReport> {
    let real_stats = stage_statistics(real)?;
    let generated_stats = stage_statistics(generated)?;
    Ok(stage_delta_from_stats(stage, real_stats, generated_stats))
}
