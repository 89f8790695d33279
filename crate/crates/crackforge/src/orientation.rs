//! Local orientation of a skeleton at its endpoints.
//!
//! Growth needs to know which way a crack tip is heading. The estimator takes
//! a square window around an endpoint, gathers the foreground pixels inside,
//! and reads the direction off the principal axis of their coordinate
//! covariance. The principal eigenvector is only defined up to sign, so a
//! sign convention picks one: toward the local mass of the crack (inward) or
//! away from it (outward). Elongation wants outward.

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PixelCoord};

/// Resolves the sign ambiguity of the principal axis.
///
/// Let `mu` be the centroid of the window's foreground and `e` the endpoint.
/// `Inward` orients the axis so it has non-negative dot product with
/// `mu - e`; `Outward` is its exact negation and points into free space,
/// which is the direction a growing tip extends.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    Inward,
    #[default]
    Outward,
}

impl std::str::FromStr for SignConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inward" => Ok(Self::Inward),
            "outward" => Ok(Self::Outward),
            other => Err(format!(
                "unknown sign convention `{other}` (expected inward or outward)"
            )),
        }
    }
}

impl std::fmt::Display for SignConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Inward => "inward",
            Self::Outward => "outward",
        })
    }
}

/// Window size and sign convention for local endpoint estimation (LEE),
/// the windowed orientation fit; config keys and fields elsewhere use the
/// short form `lee`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationParams {
    /// Side length of the square window, odd and at least 3.
    pub window: u32,
    pub convention: SignConvention,
}

impl Default for OrientationParams {
    fn default() -> Self {
        Self {
            window: 15,
            convention: SignConvention::default(),
        }
    }
}

impl OrientationParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "orientation window must be odd and >= 3, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Full output of the estimator, for diagnostics and tests.
#[derive(Debug, Clone, Copy)]
pub struct OrientationEstimate {
    /// `atan2(v_y, v_x)` of the oriented axis, in radians, x right, y down.
    pub theta: f64,
    /// Unit vector along the oriented axis.
    pub direction: [f64; 2],
    /// Centroid of foreground samples in the window.
    pub mean: [f64; 2],
    /// Sample covariance `[[cxx, cxy], [cxy, cyy]]`, denominator `n - 1`.
    pub covariance: [[f64; 2]; 2],
    /// Eigenvalues of the covariance, major first.
    pub eigenvalues: [f64; 2],
    /// Number of foreground pixels in the clipped window.
    pub sample_count: usize,
}

/// Greedy minimum-separation filter over endpoints in their given order.
///
/// An endpoint is kept iff its distance to every previously kept endpoint is
/// strictly greater than `d_min`. Dropped endpoints do not suppress later
/// ones. With the row-major order produced by endpoint detection this is
/// deterministic.
pub fn filter_endpoints(endpoints: &[PixelCoord], d_min: f64) -> Vec<PixelCoord> {
    let mut kept: Vec<PixelCoord> = Vec::new();
    for &e in endpoints {
        if kept.iter().all(|k| k.distance(&e) > d_min) {
            kept.push(e);
        }
    }
    kept
}

/// Orientation angle at `endpoint`; see [`estimate_orientation_detailed`].
pub fn estimate_orientation(
    mask: &BinaryMask,
    endpoint: PixelCoord,
    params: &OrientationParams,
) -> Result<f64> {
    estimate_orientation_detailed(mask, endpoint, params).map(|est| est.theta)
}

/// Estimates the crack direction at `endpoint` from the principal axis of
/// foreground coordinates in a window clipped to the image.
///
/// Errors with [`Error::DegenerateWindow`] when the window holds fewer than
/// two foreground pixels, since no axis can be formed from one sample.
pub fn estimate_orientation_detailed(
    mask: &BinaryMask,
    endpoint: PixelCoord,
    params: &OrientationParams,
) -> Result<OrientationEstimate> {
    params.validate()?;
    if !mask.contains(endpoint.x, endpoint.y) {
        return Err(Error::OutOfBounds {
            x: endpoint.x,
            y: endpoint.y,
            width: mask.width(),
            height: mask.height(),
        });
    }
    let r = (params.window / 2) as i64;
    let (ex, ey) = (endpoint.x as i64, endpoint.y as i64);
    let x_lo = (ex - r).max(0);
    let x_hi = (ex + r).min(mask.width() as i64 - 1);
    let y_lo = (ey - r).max(0);
    let y_hi = (ey + r).min(mask.height() as i64 - 1);

    let mut samples: Vec<(f64, f64)> = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            if mask.get(x as u32, y as u32) {
                samples.push((x as f64, y as f64));
            }
        }
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateWindow {
            x: endpoint.x,
            y: endpoint.y,
            found: n,
        });
    }

    let inv_n = 1.0 / n as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() * inv_n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() * inv_n;
    let inv_dof = 1.0 / (n as f64 - 1.0);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for &(x, y) in &samples {
        let dx = x - mx;
        let dy = y - my;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    cxx *= inv_dof;
    cxy *= inv_dof;
    cyy *= inv_dof;

    let (lambda_major, lambda_minor, mut v) = principal_axis(cxx, cxy, cyy);

    // Inward convention: axis agrees with the vector from the endpoint to
    // the centroid. Outward is its exact negation, ties included.
    let toward_mass = (mx - endpoint.x as f64) * v[0] + (my - endpoint.y as f64) * v[1];
    if toward_mass < 0.0 {
        v = [-v[0], -v[1]];
    }
    if params.convention == SignConvention::Outward {
        v = [-v[0], -v[1]];
    }
    // strip negative zeros so a leftward axis reads as +pi, not -pi
    v = [v[0] + 0.0, v[1] + 0.0];

    Ok(OrientationEstimate {
        theta: v[1].atan2(v[0]),
        direction: v,
        mean: [mx, my],
        covariance: [[cxx, cxy], [cxy, cyy]],
        eigenvalues: [lambda_major, lambda_minor],
        sample_count: n,
    })
}

/// Closed-form eigen decomposition of the symmetric 2x2 matrix
/// `[[cxx, cxy], [cxy, cyy]]`: returns (major eigenvalue, minor eigenvalue,
/// unit eigenvector of the major one).
///
/// For the off-diagonal-free case the axis is the larger diagonal entry,
/// with the x axis winning ties. Otherwise two algebraically equivalent
/// eigenvector forms exist; the larger-norm one is picked for numerical
/// stability before normalizing.
fn principal_axis(cxx: f64, cxy: f64, cyy: f64) -> (f64, f64, [f64; 2]) {
    let half_trace = 0.5 * (cxx + cyy);
    let half_gap = 0.5 * (cxx - cyy);
    let root = (half_gap * half_gap + cxy * cxy).sqrt();
    let lambda_major = half_trace + root;
    let lambda_minor = half_trace - root;

    let v = if cxy == 0.0 {
        if cyy > cxx {
            [0.0, 1.0]
        } else {
            [1.0, 0.0]
        }
    } else {
        let a = [lambda_major - cyy, cxy];
        let b = [cxy, lambda_major - cxx];
        let na = a[0] * a[0] + a[1] * a[1];
        let nb = b[0] * b[0] + b[1] * b[1];
        let (raw, norm_sq) = if na >= nb { (a, na) } else { (b, nb) };
        let inv = norm_sq.sqrt().recip();
        [raw[0] * inv, raw[1] * inv]
    };
    (lambda_major, lambda_minor, v)
}
