//! Shared fixtures and independent oracles for integration tests.
//!
//! Oracles here deliberately use naive formulations (all-pairs scans,
//! direct neighbor loops, a separately written line rasterizer) so they
//! cannot share a bug with the library implementations they check.

// Compiled once per test target; each target uses a different subset.
#![allow(dead_code)]

use crackforge::mask::{BinaryMask, PixelCoord};
use rand::Rng;

/// Endpoints by direct definition: foreground with exactly one foreground
/// 8-neighbor, scanned row by row.
pub fn brute_endpoints(mask: &BinaryMask) -> Vec<PixelCoord> {
    let mut out = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbors = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if mask.get_padded(x as i64 + dx, y as i64 + dy) {
                        neighbors += 1;
                    }
                }
            }
            if neighbors == 1 {
                out.push(PixelCoord::new(x, y));
            }
        }
    }
    out
}

/// Half-thickness by all-pairs scan: for each foreground pixel the minimum
/// Euclidean distance to any background pixel; zero on background. `None`
/// when the mask has no background pixel at all.
pub fn brute_half_thickness(mask: &BinaryMask) -> Option<Vec<f64>> {
    let w = mask.width();
    let h = mask.height();
    let background: Vec<(u32, u32)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| !mask.get(x, y))
        .collect();
    if background.is_empty() && !mask.is_empty() {
        return None;
    }
    let mut values = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let best = background
                .iter()
                .map(|&(bx, by)| {
                    let dx = bx as f64 - x as f64;
                    let dy = by as f64 - y as f64;
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            values[(y * w + x) as usize] = best;
        }
    }
    Some(values)
}

/// Line rasterization written as per-axis stepping with a floating error
/// term, structurally unlike the library's integer formulation.
pub fn oracle_line(a: (u32, u32), b: (u32, u32)) -> Vec<(u32, u32)> {
    // Canonicalize the direction the same way the library defines it:
    // lexicographically smaller (x, y) endpoint first.
    let (start, end) = if (a.0, a.1) <= (b.0, b.1) { (a, b) } else { (b, a) };
    let (x0, y0) = (start.0 as f64, start.1 as f64);
    let (x1, y1) = (end.0 as f64, end.1 as f64);
    let steps = (x1 - x0).abs().max((y1 - y0).abs()) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    if steps == 0 {
        out.push(start);
        return out;
    }
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = x0 + t * (x1 - x0);
        let y = y0 + t * (y1 - y0);
        out.push((x.round() as u32, y.round() as u32));
    }
    out.dedup();
    out
}

/// Random mask with per-pixel foreground probability `density`.
pub fn random_mask<R: Rng>(rng: &mut R, width: u32, height: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |_, _| rng.gen_bool(density))
        .expect("nonzero dimensions")
}

/// Sparse hairline polyline entirely inside the central region of the
/// image: a stand-in for an early-stage crack seed.
pub fn polyline_seed<R: Rng>(rng: &mut R, width: u32, height: u32, segments: u32) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height).expect("nonzero dimensions");
    let margin_x = width / 5;
    let margin_y = height / 5;
    let mut x = rng.gen_range(margin_x..width - margin_x);
    let mut y = rng.gen_range(margin_y..height - margin_y);
    for _ in 0..segments {
        let nx = (x as i64 + rng.gen_range(-40i64..=40)).clamp(margin_x as i64, (width - margin_x) as i64) as u32;
        let ny = (y as i64 + rng.gen_range(-40i64..=40)).clamp(margin_y as i64, (height - margin_y) as i64) as u32;
        mask.draw_line(PixelCoord::new(x, y), PixelCoord::new(nx, ny))
            .expect("in bounds");
        x = nx;
        y = ny;
    }
    mask
}

/// Straight line of `len` pixels from `start` stepping by the unit move
/// `(dx, dy)` with entries in {-1, 0, 1}.
pub fn straight_line(
    width: u32,
    height: u32,
    start: (u32, u32),
    step: (i32, i32),
    len: u32,
) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        (0..len).any(|i| {
            let px = start.0 as i64 + i as i64 * step.0 as i64;
            let py = start.1 as i64 + i as i64 * step.1 as i64;
            px == x as i64 && py == y as i64
        })
    })
    .expect("nonzero dimensions")
}

/// Smallest absolute angular difference in radians.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d = std::f64::consts::TAU - d;
    }
    d
}

/// Foreground as a sorted coordinate list, for exact set comparison.
pub fn foreground_set(mask: &BinaryMask) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = mask.iter_foreground().map(|p| (p.x, p.y)).collect();
    v.sort_unstable();
    v
}
