//! Morphological measurements of crack masks: half-thickness, saturation and
//! continuity losses, severity scoring and balanced stage partitioning.
//!
//! The half-thickness of a foreground pixel is its exact Euclidean distance
//! to the nearest background pixel, so a hairline one pixel wide measures 1.0
//! everywhere. The image border is not background: distances are taken to
//! actual background pixels only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PixelCoord};

/// Which pixel set distances are measured to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceSources {
    Foreground,
    Background,
}

/// Exact Euclidean distance transform with nearest-site tracking.
#[derive(Debug, Clone)]
pub struct DistanceTransform {
    width: u32,
    dist_sq: Vec<f64>,
    site: Vec<usize>,
}

impl DistanceTransform {
    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Squared Euclidean distance to the nearest source pixel.
    pub fn distance_sq(&self, x: u32, y: u32) -> f64 {
        self.dist_sq[self.idx(x, y)]
    }

    pub fn distance(&self, x: u32, y: u32) -> f64 {
        self.distance_sq(x, y).sqrt()
    }

    /// A nearest source pixel. Ties are resolved deterministically but no
    /// particular tie winner is promised.
    pub fn nearest_site(&self, x: u32, y: u32) -> PixelCoord {
        let s = self.site[self.idx(x, y)];
        PixelCoord::new((s % self.width as usize) as u32, (s / self.width as usize) as u32)
    }
}

/// Exact two-pass Euclidean distance transform (per-column nearest source
/// row, then a lower-envelope sweep along each row). Squared distances are
/// integers well below 2^53, so the result matches brute force exactly.
pub fn exact_edt(mask: &BinaryMask, sources: DistanceSources) -> Result<DistanceTransform> {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let source_count = match sources {
        DistanceSources::Foreground => mask.foreground_count(),
        DistanceSources::Background => mask.len() - mask.foreground_count(),
    };
    if source_count == 0 {
        return Err(match sources {
            DistanceSources::Foreground => Error::EmptyForeground,
            DistanceSources::Background => Error::NoBackground,
        });
    }
    let is_source = |x: usize, y: usize| {
        let fg = mask.get(x as u32, y as u32);
        match sources {
            DistanceSources::Foreground => fg,
            DistanceSources::Background => !fg,
        }
    };

    // Pass 1: nearest source row within each column, None when the column
    // holds no source. Ties prefer the smaller row.
    let mut nearest_row: Vec<Option<u32>> = vec![None; w * h];
    for x in 0..w {
        let mut above: Option<u32> = None;
        for y in 0..h {
            if is_source(x, y) {
                above = Some(y as u32);
            }
            nearest_row[y * w + x] = above;
        }
        let mut below: Option<u32> = None;
        for y in (0..h).rev() {
            if is_source(x, y) {
                below = Some(y as u32);
            }
            if let Some(b) = below {
                let replace = match nearest_row[y * w + x] {
                    None => true,
                    Some(a) => (b as i64 - y as i64) < (y as i64 - a as i64),
                };
                if replace {
                    nearest_row[y * w + x] = Some(b);
                }
            }
        }
    }

    // Pass 2: per row, lower envelope of the parabolas
    // x' -> (x - x')^2 + vertical_sq(x'), restricted to columns that have a
    // source at all.
    let mut dist_sq = vec![0.0f64; w * h];
    let mut site = vec![0usize; w * h];
    let mut cand_x: Vec<usize> = Vec::with_capacity(w);
    let mut cand_f: Vec<f64> = Vec::with_capacity(w);
    let mut hull: Vec<usize> = Vec::with_capacity(w);
    let mut bound: Vec<f64> = Vec::with_capacity(w + 1);
    for y in 0..h {
        cand_x.clear();
        cand_f.clear();
        for x in 0..w {
            if let Some(r) = nearest_row[y * w + x] {
                let dy = y as f64 - r as f64;
                cand_x.push(x);
                cand_f.push(dy * dy);
            }
        }
        debug_assert!(!cand_x.is_empty());

        hull.clear();
        bound.clear();
        hull.push(0);
        bound.push(f64::NEG_INFINITY);
        bound.push(f64::INFINITY);
        for i in 1..cand_x.len() {
            let xi = cand_x[i] as f64;
            let fi = cand_f[i];
            loop {
                let j = *hull.last().unwrap();
                let xj = cand_x[j] as f64;
                let fj = cand_f[j];
                let s = ((fi + xi * xi) - (fj + xj * xj)) / (2.0 * (xi - xj));
                if s <= bound[hull.len() - 1] {
                    hull.pop();
                    bound.pop();
                } else {
                    hull.push(i);
                    bound.pop();
                    bound.push(s);
                    bound.push(f64::INFINITY);
                    break;
                }
            }
        }

        let mut k = 0usize;
        for x in 0..w {
            while bound[k + 1] < x as f64 {
                k += 1;
            }
            let i = hull[k];
            let sx = cand_x[i];
            let dx = x as f64 - sx as f64;
            let idx = y * w + x;
            dist_sq[idx] = dx * dx + cand_f[i];
            let sr = nearest_row[y * w + sx].unwrap();
            site[idx] = sr as usize * w + sx;
        }
    }

    Ok(DistanceTransform {
        width: w as u32,
        dist_sq,
        site,
    })
}

/// Per-pixel crack half-thickness: Euclidean distance to the nearest
/// background pixel at foreground, zero at background.
#[derive(Debug, Clone)]
pub struct HalfThicknessMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl HalfThicknessMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Row-major distances, zero on background.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Computes the half-thickness map. All-background masks yield all zeros;
/// all-foreground masks have no reference background and error.
pub fn half_thickness(mask: &BinaryMask) -> Result<HalfThicknessMap> {
    if mask.is_empty() {
        return Ok(HalfThicknessMap {
            width: mask.width(),
            height: mask.height(),
            values: vec![0.0; mask.len()],
        });
    }
    let edt = exact_edt(mask, DistanceSources::Background)?;
    let values = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .map(|(x, y)| if mask.get(x, y) { edt.distance(x, y) } else { 0.0 })
        .collect();
    Ok(HalfThicknessMap {
        width: mask.width(),
        height: mask.height(),
        values,
    })
}

/// Mean half-thickness over foreground pixels.
pub fn mean_thickness(mask: &BinaryMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyForeground);
    }
    let edt = exact_edt(mask, DistanceSources::Background)?;
    let sum: f64 = mask
        .iter_foreground()
        .map(|p| edt.distance(p.x, p.y))
        .sum();
    Ok(sum / mask.foreground_count() as f64)
}

/// Absolute deviation of the mask's mean thickness from a target.
pub fn thickness_loss(mask: &BinaryMask, target_thickness: f64) -> Result<f64> {
    Ok((mean_thickness(mask)? - target_thickness).abs())
}

/// Absolute deviation of the mask's saturation from a target.
pub fn saturation_loss(mask: &BinaryMask, target_saturation: f64) -> f64 {
    (mask.saturation() - target_saturation).abs()
}

/// Mean absolute response of the 5-point Laplacian (4-cross of ones, center
/// -4, zero padding) over all pixels, the mask read as 0/1 reals. Low values
/// mean smooth, connected strokes; speckle scores high.
pub fn continuity_loss(mask: &BinaryMask) -> f64 {
    let mut sum = 0.0f64;
    for y in 0..mask.height() as i64 {
        for x in 0..mask.width() as i64 {
            let center = i32::from(mask.get_padded(x, y));
            let cross = i32::from(mask.get_padded(x + 1, y))
                + i32::from(mask.get_padded(x - 1, y))
                + i32::from(mask.get_padded(x, y + 1))
                + i32::from(mask.get_padded(x, y - 1));
            sum += (cross - 4 * center).abs() as f64;
        }
    }
    sum / mask.len() as f64
}

/// Normalization bounds and weights for the severity score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityNorm {
    /// Saturation that maps to a full score contribution (dataset maximum).
    pub s_max: f64,
    /// Mean thickness that maps to a full score contribution.
    pub t_max: f64,
    pub w_sat: f64,
    pub w_thick: f64,
}

impl Default for SeverityNorm {
    fn default() -> Self {
        Self {
            s_max: 0.25,
            t_max: 12.0,
            w_sat: 0.5,
            w_thick: 0.5,
        }
    }
}

impl SeverityNorm {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_max > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::InvalidParam(format!(
                "severity normalization bounds must be positive, got s_max={} t_max={}",
                self.s_max, self.t_max
            )));
        }
        if self.w_sat < 0.0 || self.w_thick < 0.0 {
            return Err(Error::InvalidParam(
                "severity weights must be nonnegative".into(),
            ));
        }
        if ((self.w_sat + self.w_thick) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "severity weights must sum to 1 to keep scores in [0,1], got {}",
                self.w_sat + self.w_thick
            )));
        }
        Ok(())
    }
}

/// Weighted sum of normalized saturation and mean thickness, clamped into
/// [0, 1]: higher is more severe cracking.
pub fn severity_score(mask: &BinaryMask, norm: &SeverityNorm) -> Result<f64> {
    let t = mean_thickness(mask)?;
    severity_from_parts(mask.saturation(), t, norm)
}

/// Severity from already-measured saturation and mean half-thickness,
/// avoiding a second distance transform when both are at hand.
pub fn severity_from_parts(saturation: f64, thickness: f64, norm: &SeverityNorm) -> Result<f64> {
    norm.validate()?;
    Ok(norm.w_sat * (saturation / norm.s_max).clamp(0.0, 1.0)
        + norm.w_thick * (thickness / norm.t_max).clamp(0.0, 1.0))
}

/// Linear-interpolation percentile of unsorted finite values at `fraction`
/// in [0, 1] of the rank range: rank `fraction * (n - 1)` interpolated
/// between the surrounding order statistics.
pub fn interpolated_percentile(values: &[f64], fraction: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewSamples(0));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParam(format!(
            "percentile fraction must be in [0,1], got {fraction}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam(
            "percentile input must be finite".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = fraction * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Splits severity scores into three balanced stages at the one-third and
/// two-thirds interpolated percentiles.
///
/// Labels in input order: 0 where `score <= p_lo`, 1 where
/// `p_lo < score <= p_hi`, else 2. With all scores equal both thresholds
/// coincide and everything lands in stage 0. When all scores are distinct
/// and `n` is divisible by 3 the split is exactly `n/3` per stage.
pub fn partition_stages(scores: &[f64]) -> Result<Vec<u8>> {
    if scores.len() < 3 {
        return Err(Error::TooFewSamples(scores.len()));
    }
    let p_lo = interpolated_percentile(scores, 1.0 / 3.0)?;
    let p_hi = interpolated_percentile(scores, 2.0 / 3.0)?;
    Ok(scores
        .iter()
        .map(|&s| {
            if s <= p_lo {
                0
            } else if s <= p_hi {
                1
            } else {
                2
            }
        })
        .collect())
}

/// Sample mean and standard deviation of saturation and mean thickness over
/// a set of masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub n: usize,
    pub saturation_mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 when n == 1.
    pub saturation_std: f64,
    pub thickness_mean: f64,
    pub thickness_std: f64,
}

impl StageStats {
    /// Builds target statistics directly from known means (deviations zero).
    pub fn from_means(saturation_mean: f64, thickness_mean: f64) -> Self {
        Self {
            n: 1,
            saturation_mean,
            saturation_std: 0.0,
            thickness_mean,
            thickness_std: 0.0,
        }
    }
}

/// Aggregates per-mask (saturation, mean thickness) pairs.
pub fn stage_statistics_from_pairs(pairs: &[(f64, f64)]) -> Result<StageStats> {
    let n = pairs.len();
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let inv_n = 1.0 / n as f64;
    let sat_mean = pairs.iter().map(|p| p.0).sum::<f64>() * inv_n;
    let thick_mean = pairs.iter().map(|p| p.1).sum::<f64>() * inv_n;
    let (sat_std, thick_std) = if n == 1 {
        (0.0, 0.0)
    } else {
        let inv_dof = 1.0 / (n as f64 - 1.0);
        let sv = pairs.iter().map(|p| (p.0 - sat_mean).powi(2)).sum::<f64>() * inv_dof;
        let tv = pairs.iter().map(|p| (p.1 - thick_mean).powi(2)).sum::<f64>() * inv_dof;
        (sv.sqrt(), tv.sqrt())
    };
    Ok(StageStats {
        n,
        saturation_mean: sat_mean,
        saturation_std: sat_std,
        thickness_mean: thick_mean,
        thickness_std: thick_std,
    })
}

/// Measures each mask and aggregates; masks must all have nonempty
/// foreground (mean thickness is undefined otherwise).
pub fn stage_statistics(masks: &[BinaryMask]) -> Result<StageStats> {
    let pairs = masks
        .iter()
        .map(|m| Ok((m.saturation(), mean_thickness(m)?)))
        .collect::<Result<Vec<_>>>()?;
    stage_statistics_from_pairs(&pairs)
}
