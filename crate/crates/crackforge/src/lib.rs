//! Crack-mask growth synthesis and morphology measurement.
//!
//! A crack mask is a binary image whose foreground traces a crack. This
//! crate turns masks of early, hairline cracks into plausible later
//! versions of themselves and measures how closely any mask population
//! matches a target's statistics:
//!
//! - [`skeleton`]: thin a mask to a one-pixel skeleton, find its endpoints.
//! - [`orientation`]: fit a growth direction to the pixels near an endpoint.
//! - [`propagation`]: extend endpoints with seeded directional random walks.
//! - [`synthesis`]: thicken grown skeletons and translate masks to target
//!   stage statistics.
//! - [`morphometry`]: saturation, half-thickness, severity scores, stage
//!   partitioning.
//! - [`evaluation`]: L1 / PSNR / SSIM and population-level comparisons.
//! - [`cli`] + [`config`] + [`report`]: the `crackforge` binary.
//!
//! Every random decision flows from a single `u64` seed; results are
//! reproducible bit for bit at any parallelism level.
//!
//! ```
//! use crackforge::mask::BinaryMask;
//! use crackforge::morphometry::StageStats;
//! use crackforge::synthesis::{translate_stage, TranslationRequest};
//!
//! // An early-stage stub...
//! let stub = BinaryMask::from_fn(128, 128, |x, y| y == 64 && (34..94).contains(&x)).unwrap();
//!
//! // ...re-synthesized to later-stage statistics.
//! let mut request = TranslationRequest::new(stub, StageStats::from_means(0.02, 1.6));
//! request.prop.seed = 42;
//! let result = translate_stage(&request).unwrap();
//! assert!(result.converged);
//! ```
//!
//! The `book/` directory holds a chapter-by-chapter guide; its code
//! examples compile and run as doctests of this crate, so guide and
//! library cannot drift apart.

// Validation code writes `!(x >= bound)` on purpose: unlike `x < bound`, it
// also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod mask;
pub mod morphometry;
pub mod orientation;
pub mod propagation;
pub mod report;
pub mod skeleton;
pub mod synthesis;

pub use error::{Error, Result};
pub use mask::{BinaryMask, PixelCoord};
pub use skeleton::{skeletonize, Skeleton};

/// Compiles every code block in the guide as a doctest.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(overview, "../../../book/src/overview.md");
    chapter!(masks, "../../../book/src/masks.md");
    chapter!(skeletons, "../../../book/src/skeletons.md");
    chapter!(orientation, "../../../book/src/orientation.md");
    chapter!(growth, "../../../book/src/growth.md");
    chapter!(morphology, "../../../book/src/morphology.md");
    chapter!(translation, "../../../book/src/translation.md");
    chapter!(comparison, "../../../book/src/comparison.md");
    chapter!(cli, "../../../book/src/cli.md");
}
