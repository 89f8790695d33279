//! Stage translation: grow a source crack's skeleton, then thicken it with a
//! spatially varying width until the mask's saturation and mean thickness
//! match a target stage.
//!
//! The controller has two knobs. Skeleton length is driven by repeated
//! endpoint elongation toward a saturation budget; width is driven by
//! stamping a Euclidean disk on every skeleton pixel, the per-pixel radius
//! following the source's local thickness, with one global scale found by
//! bisection. An outer loop re-runs elongation from the base skeleton with a
//! re-derived seed and a corrected budget until both statistics land within
//! tolerance or the iteration cap is hit. Everything is deterministic for a
//! fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PixelCoord};
use crate::morphometry::{
    continuity_loss, exact_edt, half_thickness, mean_thickness, saturation_loss, thickness_loss,
    DistanceSources, HalfThicknessMap, StageStats,
};
use crate::orientation::OrientationParams;
use crate::propagation::{
    derive_seed, elongate_skeleton_to_target, grow_single_walk, PropagationParams,
};
use crate::skeleton::{neighbor_counts, skeletonize_with, Skeleton, ThinningAlgorithm};

/// Weights of the morphology score terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MorphologyWeights {
    pub thickness: f64,
    pub saturation: f64,
    pub continuity: f64,
}

impl Default for MorphologyWeights {
    fn default() -> Self {
        Self {
            thickness: 2.0,
            saturation: 2.0,
            continuity: 4.0,
        }
    }
}

/// Weighted sum of the three morphology losses against a target's means.
pub fn morphology_score(
    mask: &BinaryMask,
    target: &StageStats,
    weights: &MorphologyWeights,
) -> Result<f64> {
    Ok(weights.thickness * thickness_loss(mask, target.thickness_mean)?
        + weights.saturation * saturation_loss(mask, target.saturation_mean)
        + weights.continuity * continuity_loss(mask))
}

/// Output of [`thicken`].
#[derive(Debug, Clone)]
pub struct ThickenOutcome {
    pub mask: BinaryMask,
    /// Global radius scale selected by bisection.
    pub alpha: f64,
    pub achieved_thickness: f64,
    /// True when the achieved mean thickness is within the relative
    /// tolerance of the target.
    pub converged: bool,
}

/// Dilates every skeleton pixel by a disk whose radius follows the source's
/// local thickness: `r(p) = alpha * max(base(nearest source pixel), 1)`,
/// with `alpha` bisected in [0.25, 8] until the mean thickness of the result
/// is within `tol_rel` of `target_thickness`.
///
/// `base` is the half-thickness map of the source crack; its positive pixels
/// define the source. A map with no positive pixels falls back to a uniform
/// base of 1, which turns the call into plain uniform-width thickening.
/// If the bracket cannot reach the target the best-scoring scale is returned
/// with `converged` false.
pub fn thicken(
    skeleton: &BinaryMask,
    base: &HalfThicknessMap,
    target_thickness: f64,
    tol_rel: f64,
    max_iters: u32,
) -> Result<ThickenOutcome> {
    if skeleton.is_empty() {
        return Err(Error::EmptyForeground);
    }
    if skeleton.width() != base.width() || skeleton.height() != base.height() {
        return Err(Error::DimensionMismatch(
            skeleton.width(),
            skeleton.height(),
            base.width(),
            base.height(),
        ));
    }
    if !(target_thickness >= 1.0) {
        return Err(Error::InvalidParam(format!(
            "target thickness must be >= 1 (any nonempty mask measures at least 1), got {target_thickness}"
        )));
    }
    if !(tol_rel > 0.0) || max_iters == 0 {
        return Err(Error::InvalidParam(
            "thickening needs tol_rel > 0 and at least one iteration".into(),
        ));
    }

    let centers: Vec<PixelCoord> = skeleton.iter_foreground().collect();
    let base_at = base_per_center(base, &centers)?;

    let tol_abs = tol_rel * target_thickness;
    let evaluate = |alpha: f64| -> Result<(BinaryMask, f64)> {
        let stamped = stamp_disks(skeleton, &centers, &base_at, alpha);
        match mean_thickness(&stamped) {
            Ok(t) => Ok((stamped, t)),
            // the dilation swallowed the whole image: too thick to measure
            Err(Error::NoBackground) => Ok((stamped, f64::INFINITY)),
            Err(e) => Err(e),
        }
    };

    let (mut lo, mut hi) = (0.25f64, 8.0f64);
    let (lo_mask, lo_t) = evaluate(lo)?;
    let mut best = (lo, lo_t, lo_mask);
    let track = |best: &mut (f64, f64, BinaryMask), alpha: f64, t: f64, mask: BinaryMask| {
        let current_gap = (best.1 - target_thickness).abs();
        let gap = (t - target_thickness).abs();
        if gap < current_gap {
            *best = (alpha, t, mask);
        }
    };

    if lo_t < target_thickness - tol_abs {
        let (hi_mask, hi_t) = evaluate(hi)?;
        track(&mut best, hi, hi_t, hi_mask);
        if hi_t > target_thickness + tol_abs {
            // bracket established; bisect
            for _ in 0..max_iters {
                let mid = 0.5 * (lo + hi);
                let (mask, t) = evaluate(mid)?;
                track(&mut best, mid, t, mask);
                if (t - target_thickness).abs() <= tol_abs {
                    break;
                }
                if t < target_thickness {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }

    let (alpha, achieved, mask) = best;
    Ok(ThickenOutcome {
        mask,
        alpha,
        achieved_thickness: achieved,
        converged: (achieved - target_thickness).abs() <= tol_abs,
    })
}

/// Base thickness for each stamp center: the source's half-thickness at the
/// nearest source pixel, or 1.0 when the map has no positive pixels.
fn base_per_center(base: &HalfThicknessMap, centers: &[PixelCoord]) -> Result<Vec<f64>> {
    let source = BinaryMask::from_fn(base.width(), base.height(), |x, y| base.get(x, y) > 0.0)?;
    if source.is_empty() {
        return Ok(vec![1.0; centers.len()]);
    }
    let edt = exact_edt(&source, DistanceSources::Foreground)?;
    Ok(centers
        .iter()
        .map(|p| {
            let site = edt.nearest_site(p.x, p.y);
            base.get(site.x, site.y)
        })
        .collect())
}

/// Stamps a Euclidean disk (center distance <= r) on every center.
fn stamp_disks(
    skeleton: &BinaryMask,
    centers: &[PixelCoord],
    base_at: &[f64],
    alpha: f64,
) -> BinaryMask {
    let mut out = skeleton.clone();
    let w = out.width() as i64;
    let h = out.height() as i64;
    // a disk this large covers any pixel of the image already
    let radius_cap = (w + h) as f64;
    for (p, &b) in centers.iter().zip(base_at) {
        let r = (alpha * b.max(1.0)).min(radius_cap);
        let reach = r.floor() as i64;
        let r_sq = r * r;
        for dy in -reach..=reach {
            let y = p.y as i64 + dy;
            if y < 0 || y >= h {
                continue;
            }
            for dx in -reach..=reach {
                let x = p.x as i64 + dx;
                if x < 0 || x >= w {
                    continue;
                }
                if (dx * dx + dy * dy) as f64 <= r_sq {
                    out.set(x as u32, y as u32, true);
                }
            }
        }
    }
    out
}

/// Inputs of [`translate_stage`].
#[derive(Debug, Clone)]
pub struct TranslationRequest {
    pub source: BinaryMask,
    /// Target stage statistics; only the means steer the controller.
    pub target: StageStats,
    pub prop: PropagationParams,
    pub lee: OrientationParams,
    pub thinning: ThinningAlgorithm,
    /// Relative tolerance required of both achieved statistics.
    pub tol_rel: f64,
    /// Outer-loop iteration cap.
    pub max_iters: u32,
    /// Seed extra walks from skeleton interior pixels before thickening.
    pub branching: bool,
    pub weights: MorphologyWeights,
}

impl TranslationRequest {
    pub fn new(source: BinaryMask, target: StageStats) -> Self {
        Self {
            source,
            target,
            prop: PropagationParams::default(),
            lee: OrientationParams::default(),
            thinning: ThinningAlgorithm::default(),
            tol_rel: 0.10,
            max_iters: 24,
            branching: false,
            weights: MorphologyWeights::default(),
        }
    }
}

/// Output of [`translate_stage`].
#[derive(Debug, Clone)]
pub struct TranslationResult {
    pub mask: BinaryMask,
    /// The grown skeleton the mask was thickened from; the mask's foreground
    /// always contains it.
    pub elongated_skeleton: BinaryMask,
    /// Achieved (saturation, mean thickness).
    pub achieved: (f64, f64),
    /// Outer iterations executed.
    pub iterations: u32,
    /// True iff both relative errors are within `tol_rel` for the returned
    /// mask.
    pub converged: bool,
    pub morphology_score: f64,
}

/// Elongates and thickens `request.source` until its saturation and mean
/// thickness match `request.target`'s means within `tol_rel`, or returns the
/// closest attempt with `converged` false.
pub fn translate_stage(request: &TranslationRequest) -> Result<TranslationResult> {
    let source = &request.source;
    if source.is_empty() {
        return Err(Error::EmptyForeground);
    }
    request.prop.validate()?;
    let target_s = request.target.saturation_mean;
    let target_t = request.target.thickness_mean;
    if !(target_s > 0.0 && target_s < 1.0) || !(target_t >= 1.0) {
        return Err(Error::InvalidParam(format!(
            "target means must satisfy 0 < saturation < 1 and thickness >= 1, got ({target_s}, {target_t})"
        )));
    }
    if !(request.tol_rel > 0.0) || request.max_iters == 0 {
        return Err(Error::InvalidParam(
            "translation needs tol_rel > 0 and at least one outer iteration".into(),
        ));
    }

    let base_skeleton = skeletonize_with(source, request.thinning);
    if base_skeleton.as_mask().is_empty() {
        return Err(Error::EmptyForeground);
    }
    let base_map = half_thickness(source)?;
    let source_t = mean_thickness(source)?;
    let source_s = source.saturation();
    let skeleton_s = base_skeleton.as_mask().saturation();

    // First-guess skeleton saturation: scale the source's skeleton share by
    // the saturation ratio, corrected by the thickness ratio (thicker target
    // strokes need less centerline per unit of area). For 1-px-thin sources
    // this reduces to target_s * source_t / target_t. Feedback below fixes
    // the remaining model error.
    let mut budget =
        (skeleton_s * (target_s / source_s) * (source_t / target_t)).clamp(0.0, 0.9);

    let base_count = base_skeleton.as_mask().foreground_count();
    let mut best: Option<(f64, TranslationResult)> = None;
    let mut iterations = 0u32;
    for iter in 0..request.max_iters {
        iterations = iter + 1;
        let mut pass_params = request.prop;
        pass_params.seed = derive_seed(request.prop.seed, iter as u64);
        let grown = elongate_skeleton_to_target(
            base_skeleton.clone(),
            budget,
            &pass_params,
            &request.lee,
        )?;
        let grew_nothing = grown.skeleton.as_mask().foreground_count() == base_count;
        let mut skeleton = grown.skeleton;
        if request.branching {
            seed_branches(
                &mut skeleton,
                source_t,
                target_t,
                iter as u64,
                &pass_params,
                &request.lee,
            )?;
        }

        let thickened = thicken(
            skeleton.as_mask(),
            &base_map,
            target_t,
            request.tol_rel,
            24,
        )?;
        let achieved_s = thickened.mask.saturation();
        let achieved_t = thickened.achieved_thickness;
        let rel_s = (achieved_s - target_s).abs() / target_s;
        let rel_t = (achieved_t - target_t).abs() / target_t;
        let converged = rel_s <= request.tol_rel && rel_t <= request.tol_rel;

        let score = morphology_score(&thickened.mask, &request.target, &request.weights)?;
        let candidate = TranslationResult {
            mask: thickened.mask,
            elongated_skeleton: skeleton.as_mask().clone(),
            achieved: (achieved_s, achieved_t),
            iterations,
            converged,
            morphology_score: score,
        };
        let badness = rel_s.max(rel_t);
        if best.as_ref().is_none_or(|(b, _)| badness < *b) {
            best = Some((badness, candidate));
        }
        if converged {
            break;
        }

        // Multiplicative feedback on the skeleton budget: the final
        // saturation responds almost linearly to skeleton length at fixed
        // width. Damped to avoid oscillating on jagged responses.
        let factor = (target_s / achieved_s.max(1e-12)).clamp(0.2, 5.0);
        budget = (budget * factor).clamp(0.0, 0.9);

        // Response floor: this round ran on the bare base skeleton (growth
        // cannot remove pixels) and the next budget asks for even less, so
        // every later round would repeat this exact candidate. Branch
        // seeding is the exception: its extra walks vary by iteration.
        if grew_nothing && budget <= skeleton_s && !request.branching {
            break;
        }
    }

    let (_, mut result) = best.expect("at least one outer iteration ran");
    result.iterations = iterations;
    Ok(result)
}

/// Launches extra walks from uniformly chosen interior skeleton pixels
/// (foreground with exactly two foreground neighbors), one per branch. The
/// branch count grows with the thickness ratio between target and source.
fn seed_branches(
    skeleton: &mut Skeleton,
    source_t: f64,
    target_t: f64,
    iter: u64,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<()> {
    let counts = neighbor_counts(skeleton.as_mask());
    let candidates: Vec<PixelCoord> = skeleton
        .as_mask()
        .iter_foreground()
        .filter(|p| counts.get(p.x, p.y) == 2)
        .collect();
    if candidates.is_empty() {
        return Ok(());
    }
    let wanted = ((target_t / source_t).ceil() as usize).clamp(1, 16).min(candidates.len());

    let mut branch_params = *params;
    branch_params.seed = derive_seed(params.seed, 0xB7A2_C000 + iter);
    let mut selector = ChaCha8Rng::seed_from_u64(branch_params.seed);
    selector.set_stream(u64::MAX);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    for i in 0..wanted {
        let j = selector.gen_range(i..order.len());
        order.swap(i, j);
    }

    for (stream, &pick) in order[..wanted].iter().enumerate() {
        grow_single_walk(
            skeleton,
            candidates[pick],
            stream as u64,
            &branch_params,
            lee,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Connectivity;

    fn line_64px_in(w: u32, h: u32) -> BinaryMask {
        let mid = h / 2;
        BinaryMask::from_fn(w, h, |x, y| y == mid && (96..160).contains(&x)).unwrap()
    }

    fn polyline(w: u32, h: u32) -> BinaryMask {
        let mut m = BinaryMask::new(w, h).unwrap();
        m.draw_line(PixelCoord::new(10, 10), PixelCoord::new(40, 25)).unwrap();
        m.draw_line(PixelCoord::new(40, 25), PixelCoord::new(55, 55)).unwrap();
        m
    }

    #[test]
    fn thicken_identity_scale() {
        let mut line = BinaryMask::new(64, 64).unwrap();
        line.draw_line(PixelCoord::new(4, 32), PixelCoord::new(59, 32)).unwrap();
        let base = half_thickness(&line).unwrap();
        let out = thicken(&line, &base, 1.0, 0.10, 24).unwrap();
        assert!(out.converged);
        assert!((out.achieved_thickness - 1.0).abs() <= 0.10);
    }

    #[test]
    fn thicken_line_to_target_three() {
        let line = line_64px_in(256, 256);
        assert_eq!(line.foreground_count(), 64);
        let base = half_thickness(&line).unwrap();
        let out = thicken(&line, &base, 3.0, 0.10, 24).unwrap();
        assert!(
            (2.7..=3.3).contains(&out.achieved_thickness),
            "achieved {}",
            out.achieved_thickness
        );
    }

    #[test]
    fn thicken_is_monotone_in_target() {
        let line = line_64px_in(256, 256);
        let base = half_thickness(&line).unwrap();
        let mut previous = 0.0;
        for target in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
            let out = thicken(&line, &base, target, 0.10, 24).unwrap();
            assert!(
                out.achieved_thickness >= previous - 1e-12,
                "target {target}: {} < {previous}",
                out.achieved_thickness
            );
            previous = out.achieved_thickness;
        }
    }

    #[test]
    fn thicken_keeps_superset_and_connectivity() {
        let skel = polyline(64, 64);
        let base = half_thickness(&skel).unwrap();
        let out = thicken(&skel, &base, 2.0, 0.10, 24).unwrap();
        for p in skel.iter_foreground() {
            assert!(out.mask.get(p.x, p.y));
        }
        assert!(
            out.mask.count_components(Connectivity::Eight)
                <= skel.count_components(Connectivity::Eight)
        );
    }

    #[test]
    fn thicken_follows_the_source_profile() {
        // source: a thick blob on the left, hairline on the right; stamping
        // radii must be larger near the blob than near the thin end
        let source = BinaryMask::from_fn(96, 33, |x, y| {
            let blob = x < 24 && (8..25).contains(&y);
            let hair = y == 16 && x < 90;
            blob || hair
        })
        .unwrap();
        let skel = BinaryMask::from_fn(96, 33, |x, y| y == 16 && x < 90).unwrap();
        let base = half_thickness(&source).unwrap();
        let out = thicken(&skel, &base, 3.0, 0.10, 24).unwrap();
        let column_height = |x: u32| (0..33).filter(|&y| out.mask.get(x, y)).count();
        assert!(
            column_height(10) > column_height(80),
            "left {} right {}",
            column_height(10),
            column_height(80)
        );
    }

    #[test]
    fn thicken_rejects_bad_inputs() {
        let skel = polyline(64, 64);
        let base = half_thickness(&skel).unwrap();
        assert!(matches!(
            thicken(&BinaryMask::new(64, 64).unwrap(), &base, 2.0, 0.1, 24),
            Err(Error::EmptyForeground)
        ));
        assert!(matches!(
            thicken(&skel, &base, 0.5, 0.1, 24),
            Err(Error::InvalidParam(_))
        ));
        let other = half_thickness(&BinaryMask::new(32, 32).unwrap()).unwrap();
        assert!(matches!(
            thicken(&skel, &other, 2.0, 0.1, 24),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn translate_quasi_identity() {
        // a 7-px-wide strip: translating to its own statistics should hold
        // both statistics without elongating
        let source = BinaryMask::from_fn(96, 64, |x, y| (29..36).contains(&y) && x < 90).unwrap();
        let target = StageStats::from_means(source.saturation(), mean_thickness(&source).unwrap());
        let request = TranslationRequest::new(source.clone(), target);
        let result = translate_stage(&request).unwrap();
        assert!(result.converged, "achieved {:?}", result.achieved);
        assert_eq!(result.iterations, 1);
        // output keeps the source's skeleton
        let skel = skeletonize_with(&source, ThinningAlgorithm::ZhangSuen);
        for p in skel.as_mask().iter_foreground() {
            assert!(result.mask.get(p.x, p.y));
        }
    }

    #[test]
    fn translate_reaches_heavier_stage() {
        let source = polyline(128, 128);
        let target = StageStats::from_means(0.028, 1.7);
        let mut request = TranslationRequest::new(source, target);
        request.prop.seed = 11;
        let result = translate_stage(&request).unwrap();
        let (s, t) = result.achieved;
        assert!(result.converged, "achieved ({s}, {t}) in {} iters", result.iterations);
        assert!((s - 0.028).abs() / 0.028 <= 0.10);
        assert!((t - 1.7).abs() / 1.7 <= 0.10);
    }

    #[test]
    fn translate_superset_and_truthful_flag() {
        let source = polyline(128, 128);
        let target = StageStats::from_means(0.02, 1.5);
        let mut request = TranslationRequest::new(source, target);
        request.prop.seed = 5;
        let result = translate_stage(&request).unwrap();
        for p in result.elongated_skeleton.iter_foreground() {
            assert!(result.mask.get(p.x, p.y), "skeleton pixel missing from mask");
        }
        let (s, t) = result.achieved;
        let rel_s = (s - 0.02).abs() / 0.02;
        let rel_t = (t - 1.5).abs() / 1.5;
        assert_eq!(result.converged, rel_s <= request.tol_rel && rel_t <= request.tol_rel);
        // achieved must match a recomputation on the emitted mask
        assert!((s - result.mask.saturation()).abs() < 1e-12);
        assert!((t - mean_thickness(&result.mask).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn translate_is_deterministic() {
        let source = polyline(96, 96);
        let target = StageStats::from_means(0.03, 1.8);
        let mut request = TranslationRequest::new(source, target);
        request.prop.seed = 77;
        let a = translate_stage(&request).unwrap();
        let b = translate_stage(&request).unwrap();
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.achieved, b.achieved);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn translate_with_branching_still_converges() {
        let source = polyline(128, 128);
        let target = StageStats::from_means(0.03, 1.8);
        let mut request = TranslationRequest::new(source, target);
        request.prop.seed = 21;
        request.branching = true;
        let result = translate_stage(&request).unwrap();
        let (s, t) = result.achieved;
        assert!(
            result.converged,
            "achieved ({s}, {t}) in {} iterations",
            result.iterations
        );
    }

    #[test]
    fn translate_rejects_bad_requests() {
        let empty = BinaryMask::new(32, 32).unwrap();
        let target = StageStats::from_means(0.03, 1.8);
        assert!(matches!(
            translate_stage(&TranslationRequest::new(empty, target)),
            Err(Error::EmptyForeground)
        ));

        let source = polyline(64, 64);
        let bad_target = StageStats::from_means(0.0, 1.8);
        assert!(matches!(
            translate_stage(&TranslationRequest::new(source.clone(), bad_target)),
            Err(Error::InvalidParam(_))
        ));
        let bad_thickness = StageStats::from_means(0.02, 0.5);
        assert!(matches!(
            translate_stage(&TranslationRequest::new(source, bad_thickness)),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn morphology_score_examples() {
        let strip = BinaryMask::from_fn(32, 32, |_, y| (14..17).contains(&y)).unwrap();
        let s = strip.saturation();
        let t = mean_thickness(&strip).unwrap();
        let at_target = StageStats::from_means(s, t);
        let weights = MorphologyWeights::default();
        assert_eq!(
            (weights.thickness, weights.saturation, weights.continuity),
            (2.0, 2.0, 4.0)
        );

        // at the exact targets only the continuity term remains
        let score = morphology_score(&strip, &at_target, &weights).unwrap();
        assert!((score - 4.0 * continuity_loss(&strip)).abs() < 1e-12);

        // doubling the weights doubles the score
        let off_target = StageStats::from_means(s + 0.01, t + 0.5);
        let doubled = MorphologyWeights {
            thickness: 4.0,
            saturation: 4.0,
            continuity: 8.0,
        };
        let one = morphology_score(&strip, &off_target, &weights).unwrap();
        let two = morphology_score(&strip, &off_target, &doubled).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);

        assert!(matches!(
            morphology_score(&BinaryMask::new(16, 16).unwrap(), &at_target, &weights),
            Err(Error::EmptyForeground)
        ));
    }
}
