//! Directional random-walk elongation of skeleton endpoints.
//!
//! Each retained endpoint launches a walk: a fixed base direction is read
//! from the local orientation estimate, then steps of length `l` are taken
//! at angles jittered uniformly within `±delta` of that base, rasterized as
//! digital lines onto the growing skeleton. A walk stops when its sampled
//! step budget runs out, the next position would leave the image, or the
//! skeleton's saturation has reached the target density.
//!
//! Endpoints are processed sequentially in row-major order and the density
//! check reads the live, growing skeleton; this order is normative. Random
//! draws come from per-endpoint counter-based streams, so the draws
//! themselves never depend on what earlier walks did.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::{line_pixels, BinaryMask, PixelCoord};
use crate::orientation::{estimate_orientation, filter_endpoints, OrientationParams};
use crate::skeleton::{detect_endpoints, skeletonize, Skeleton};

/// Walk inputs: endpoint separation, angular jitter, step geometry, budget
/// range, density target and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Minimum pairwise endpoint separation kept by the greedy filter.
    pub d_min: f64,
    /// Maximum angular deviation per step, radians, in [0, pi].
    pub delta: f64,
    /// Step length in pixels, at least 1.
    pub step_length: f64,
    /// Inclusive step-budget range sampled per endpoint.
    pub s_min: u32,
    pub s_max: u32,
    /// Walks stop stepping once skeleton saturation reaches this fraction.
    pub target_density: f64,
    pub seed: u64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            d_min: 4.0,
            delta: std::f64::consts::FRAC_PI_2,
            step_length: 2.0,
            s_min: 3,
            s_max: 50,
            target_density: 1.0,
            seed: 0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.delta) {
            return Err(Error::InvalidParam(format!(
                "delta must be in [0, pi], got {}",
                self.delta
            )));
        }
        if !(self.step_length >= 1.0) {
            return Err(Error::InvalidParam(format!(
                "step_length must be >= 1, got {}",
                self.step_length
            )));
        }
        if self.s_min < 1 || self.s_min > self.s_max {
            return Err(Error::InvalidParam(format!(
                "step budget range must satisfy 1 <= s_min <= s_max, got [{}, {}]",
                self.s_min, self.s_max
            )));
        }
        if !(0.0..=1.0).contains(&self.target_density) {
            return Err(Error::InvalidParam(format!(
                "target_density must be in [0, 1], got {}",
                self.target_density
            )));
        }
        if !self.d_min.is_finite() || self.d_min < 0.0 {
            return Err(Error::InvalidParam(format!(
                "d_min must be finite and >= 0, got {}",
                self.d_min
            )));
        }
        Ok(())
    }
}

/// Why a walk stopped.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The sampled step budget was spent.
    BudgetExhausted,
    /// The next position would have left the image.
    LeftImage,
    /// Skeleton saturation reached the target density at a step check.
    DensityReached,
}

/// Record of one endpoint's walk.
#[derive(Debug, Clone)]
pub struct WalkTrace {
    pub origin: PixelCoord,
    /// Base direction sampled once for the whole walk, radians.
    pub theta0: f64,
    /// Step budget drawn from `[s_min, s_max]`.
    pub budget: u32,
    pub steps_taken: u32,
    /// Rasterized segments in step order; consecutive segments share an
    /// endpoint.
    pub segments: Vec<(PixelCoord, PixelCoord)>,
    pub termination: Termination,
}

/// Result of one propagation pass.
#[derive(Debug, Clone)]
pub struct PropagationOutcome {
    pub skeleton: Skeleton,
    pub traces: Vec<WalkTrace>,
    /// Endpoints skipped because their orientation window was degenerate.
    pub skipped: Vec<PixelCoord>,
}

/// Result of repeated propagation toward a saturation target.
#[derive(Debug, Clone)]
pub struct ElongationOutcome {
    pub skeleton: Skeleton,
    pub passes: u32,
    /// True when a pass added no pixels before the target was reached; the
    /// skeleton is then a best effort.
    pub stalled: bool,
}

/// Derives an independent sub-seed from a root seed and a salt
/// (splitmix64 finalizer over the combined value). Used to hand unrelated
/// random streams to elongation retries and batch workers.
pub fn derive_seed(root: u64, salt: u64) -> u64 {
    let mut z = root
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Thins `mask` and elongates every retained endpoint once.
pub fn propagate(
    mask: &BinaryMask,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<PropagationOutcome> {
    propagate_skeleton(skeletonize(mask), params, lee)
}

/// Elongates every retained endpoint of an existing skeleton once.
pub fn propagate_skeleton(
    skeleton: Skeleton,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<PropagationOutcome> {
    params.validate()?;
    let mut skeleton = skeleton;
    let mut traces = Vec::new();
    let mut skipped = Vec::new();
    walk_pass(&mut skeleton, 0, params, lee, &mut traces, &mut skipped)?;
    Ok(PropagationOutcome {
        skeleton,
        traces,
        skipped,
    })
}

/// Repeats propagation passes, re-detecting endpoints before each, until the
/// skeleton saturation reaches `target_saturation` or a pass adds nothing.
///
/// Within a pass the walks use `target_saturation` as their density target,
/// so the final saturation overshoots by at most one rasterized segment. The
/// `target_density` field of `params` is ignored here. Passes grow the
/// skeleton in place without re-thinning: thinning could erase pixels grown
/// earlier, and monotone growth is part of this function's contract.
pub fn elongate_to_target(
    mask: &BinaryMask,
    target_saturation: f64,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<ElongationOutcome> {
    elongate_skeleton_to_target(skeletonize(mask), target_saturation, params, lee)
}

/// [`elongate_to_target`] starting from an existing skeleton.
pub fn elongate_skeleton_to_target(
    skeleton: Skeleton,
    target_saturation: f64,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<ElongationOutcome> {
    params.validate()?;
    if !(0.0..=1.0).contains(&target_saturation) {
        return Err(Error::InvalidParam(format!(
            "target saturation must be in [0, 1], got {target_saturation}"
        )));
    }
    let mut skeleton = skeleton;
    let mut pass_params = *params;
    pass_params.target_density = target_saturation;
    let mut passes = 0u32;
    let mut stalled = false;
    let mut traces = Vec::new();
    let mut skipped = Vec::new();
    while skeleton.as_mask().saturation() < target_saturation {
        traces.clear();
        skipped.clear();
        let added = walk_pass(
            &mut skeleton,
            passes as u64,
            &pass_params,
            lee,
            &mut traces,
            &mut skipped,
        )?;
        passes += 1;
        if added == 0 {
            stalled = true;
            break;
        }
    }
    Ok(ElongationOutcome {
        skeleton,
        passes,
        stalled,
    })
}

/// Grows one walk from an arbitrary start pixel, drawing random draws from
/// the given stream id. Returns `None` when the orientation window at the
/// start pixel is degenerate. Used by branch seeding, which launches walks
/// from skeleton interiors instead of endpoints.
pub(crate) fn grow_single_walk(
    skeleton: &mut Skeleton,
    origin: PixelCoord,
    stream: u64,
    params: &PropagationParams,
    lee: &OrientationParams,
) -> Result<Option<WalkTrace>> {
    let theta0 = match estimate_orientation(skeleton.as_mask(), origin, lee) {
        Ok(theta) => theta,
        Err(Error::DegenerateWindow { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);
    Ok(Some(walk_endpoint(skeleton, origin, theta0, params, &mut rng)))
}

/// One pass over all retained endpoints; returns pixels added.
fn walk_pass(
    skeleton: &mut Skeleton,
    pass: u64,
    params: &PropagationParams,
    lee: &OrientationParams,
    traces: &mut Vec<WalkTrace>,
    skipped: &mut Vec<PixelCoord>,
) -> Result<usize> {
    let before = skeleton.as_mask().foreground_count();
    let endpoints = filter_endpoints(&detect_endpoints(skeleton.as_mask()), params.d_min);
    for (index, endpoint) in endpoints.into_iter().enumerate() {
        // Orientation is estimated on the live skeleton, so earlier walks in
        // the same pass influence later estimates; that mirrors drawing onto
        // the working image inside the loop.
        let theta0 = match estimate_orientation(skeleton.as_mask(), endpoint, lee) {
            Ok(theta) => theta,
            Err(Error::DegenerateWindow { .. }) => {
                skipped.push(endpoint);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream((pass << 32) | index as u64);
        traces.push(walk_endpoint(skeleton, endpoint, theta0, params, &mut rng));
    }
    Ok(skeleton.as_mask().foreground_count() - before)
}

/// Runs a single endpoint's walk, drawing onto the skeleton.
fn walk_endpoint(
    skeleton: &mut Skeleton,
    origin: PixelCoord,
    theta0: f64,
    params: &PropagationParams,
    rng: &mut ChaCha8Rng,
) -> WalkTrace {
    let budget: u32 = rng.gen_range(params.s_min..=params.s_max);
    let width = skeleton.as_mask().width();
    let height = skeleton.as_mask().height();
    let round_to_pixel = |p: (f64, f64)| {
        PixelCoord::new(
            p.0.round().clamp(0.0, (width - 1) as f64) as u32,
            p.1.round().clamp(0.0, (height - 1) as f64) as u32,
        )
    };

    let mut segments = Vec::new();
    let mut pos = (origin.x as f64, origin.y as f64);
    let mut remaining = budget;
    let mut steps_taken = 0u32;
    let mut termination = Termination::BudgetExhausted;
    while remaining > 0 {
        if skeleton.as_mask().saturation() >= params.target_density {
            termination = Termination::DensityReached;
            break;
        }
        let dtheta: f64 = rng.gen_range(-params.delta..=params.delta);
        let theta = theta0 + dtheta;
        let next = (
            pos.0 + params.step_length * theta.cos(),
            pos.1 + params.step_length * theta.sin(),
        );
        if next.0 < 0.0 || next.1 < 0.0 || next.0 >= width as f64 || next.1 >= height as f64 {
            termination = Termination::LeftImage;
            break;
        }
        let a = round_to_pixel(pos);
        let b = round_to_pixel(next);
        for p in line_pixels(a, b) {
            skeleton.mask_mut().set(p.x, p.y, true);
        }
        segments.push((a, b));
        pos = next;
        remaining -= 1;
        steps_taken += 1;
    }

    WalkTrace {
        origin,
        theta0,
        budget,
        steps_taken,
        segments,
        termination,
    }
}
