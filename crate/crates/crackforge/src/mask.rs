//! Binary crack masks: storage, file I/O, line rasterization and density.
//!
//! A [`BinaryMask`] is the currency every other module trades in. Coordinates
//! follow raster conventions: `x` grows rightward along columns, `y` grows
//! downward along rows, and every angle in this crate is `atan2(y, x)` in that
//! frame.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::ImageEncoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binarization threshold used when the caller does not supply one.
pub const DEFAULT_THRESHOLD: u8 = 127;

/// A pixel position bound to some mask: `0 <= x < width`, `0 <= y < height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: u32,
    pub y: u32,
}

impl PixelCoord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Euclidean distance between pixel centres.
    pub fn distance(&self, other: &PixelCoord) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Neighborhood used when counting connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Row-major boolean raster; `true` marks crack foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    pixels: Vec<bool>,
    foreground: usize,
}

impl BinaryMask {
    /// All-background mask. Both dimensions must be at least 1.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            width,
            height,
            pixels: vec![false; width as usize * height as usize],
            foreground: 0,
        })
    }

    /// Builds a mask by evaluating `f(x, y)` over the grid.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Total pixel count `width * height`.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground == 0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(self.contains(x, y));
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.pixels[self.idx(x, y)]
    }

    /// Reads with zero padding: anything outside the raster is background.
    #[inline]
    pub fn get_padded(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            false
        } else {
            self.pixels[y as usize * self.width as usize + x as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.idx(x, y);
        match (self.pixels[i], value) {
            (false, true) => self.foreground += 1,
            (true, false) => self.foreground -= 1,
            _ => {}
        }
        self.pixels[i] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground
    }

    /// Fraction of foreground pixels, also called the mask's density.
    pub fn saturation(&self) -> f64 {
        self.foreground as f64 / self.pixels.len() as f64
    }

    /// Foreground pixels in row-major order.
    pub fn iter_foreground(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        let w = self.width as usize;
        self.pixels
            .iter()
            .enumerate()
            .filter(|&(_, &on)| on)
            .map(move |(i, _)| PixelCoord::new((i % w) as u32, (i / w) as u32))
    }

    /// Rasterizes the 8-connected digital line from `a` to `b`, keeping any
    /// foreground already present. Errors if either endpoint is out of bounds.
    pub fn draw_line(&mut self, a: PixelCoord, b: PixelCoord) -> Result<()> {
        for p in [a, b] {
            if !self.contains(p.x, p.y) {
                return Err(Error::OutOfBounds {
                    x: p.x,
                    y: p.y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        for p in line_pixels(a, b) {
            self.set(p.x, p.y, true);
        }
        Ok(())
    }

    /// Number of foreground connected components.
    pub fn count_components(&self, connectivity: Connectivity) -> usize {
        let offsets: &[(i64, i64)] = match connectivity {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        };
        let mut seen = vec![false; self.pixels.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.pixels.len() {
            if !self.pixels[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let x = (i % self.width as usize) as i64;
                let y = (i / self.width as usize) as i64;
                for (dx, dy) in offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if self.get_padded(nx, ny) {
                        let ni = ny as usize * self.width as usize + nx as usize;
                        if !seen[ni] {
                            seen[ni] = true;
                            stack.push(ni);
                        }
                    }
                }
            }
        }
        count
    }

    /// Nearest-neighbor resample; the only resampling that keeps a mask binary.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Result<BinaryMask> {
        let mut out = BinaryMask::new(width, height)?;
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        for y in 0..height {
            let src_y = (((y as f64 + 0.5) * sy) as u32).min(self.height - 1);
            for x in 0..width {
                let src_x = (((x as f64 + 0.5) * sx) as u32).min(self.width - 1);
                if self.get(src_x, src_y) {
                    out.set(x, y, true);
                }
            }
        }
        Ok(out)
    }
}

/// Pixels of the 8-connected Bresenham line from `a` to `b`, both inclusive.
///
/// Endpoints are ordered canonically before stepping so that `(a, b)` and
/// `(b, a)` always yield the same pixel set; plain Bresenham can break ties
/// differently under reversal.
pub fn line_pixels(a: PixelCoord, b: PixelCoord) -> Vec<PixelCoord> {
    let (a, b) = if (b.x, b.y) < (a.x, a.y) { (b, a) } else { (a, b) };
    let (mut x0, mut y0) = (a.x as i64, a.y as i64);
    let (x1, y1) = (b.x as i64, b.y as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity(dx.max(-dy) as usize + 1);
    loop {
        out.push(PixelCoord::new(x0 as u32, y0 as u32));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    out
}

/// Loads a PNG or PGM raster and binarizes it: a pixel is foreground iff its
/// gray value (luma for RGB inputs) is strictly greater than `threshold`.
pub fn load_mask(path: impl AsRef<Path>, threshold: u8) -> Result<BinaryMask> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::image(path, e))?;
    match img.color() {
        image::ColorType::L8
        | image::ColorType::La8
        | image::ColorType::Rgb8
        | image::ColorType::Rgba8 => {}
        other => return Err(Error::UnsupportedColor(format!("{other:?}"))),
    }
    let gray = img.to_luma8();
    if gray.width() == 0 || gray.height() == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut mask = BinaryMask::new(gray.width(), gray.height())?;
    for (x, y, p) in gray.enumerate_pixels() {
        if p.0[0] > threshold {
            mask.set(x, y, true);
        }
    }
    Ok(mask)
}

/// Writes a mask as an 8-bit grayscale raster: foreground 255, background 0.
/// The format follows the extension: `.png` or `.pgm` (binary P5).
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .map(|(x, y)| if mask.get(x, y) { 255u8 } else { 0u8 })
        .collect();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    match ext.as_str() {
        "png" => image::codecs::png::PngEncoder::new(writer)
            .write_image(&bytes, mask.width(), mask.height(), image::ExtendedColorType::L8)
            .map_err(|e| Error::image(path, e)),
        "pgm" => image::codecs::pnm::PnmEncoder::new(writer)
            .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(
                image::codecs::pnm::SampleEncoding::Binary,
            ))
            .write_image(&bytes, mask.width(), mask.height(), image::ExtendedColorType::L8)
            .map_err(|e| Error::image(path, e)),
        other => Err(Error::UnsupportedFormat(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn gray_image(w: u32, h: u32, value: u8) -> image::GrayImage {
        image::GrayImage::from_pixel(w, h, image::Luma([value]))
    }

    #[test]
    fn threshold_is_strictly_greater() {
        let dir = tempfile::tempdir().unwrap();
        let all_black = dir.path().join("black.png");
        gray_image(4, 4, 0).save(&all_black).unwrap();
        assert_eq!(load_mask(&all_black, 127).unwrap().foreground_count(), 0);

        let all_white = dir.path().join("white.png");
        gray_image(4, 4, 255).save(&all_white).unwrap();
        assert_eq!(load_mask(&all_white, 127).unwrap().foreground_count(), 16);

        // exactly at the threshold stays background
        let boundary = dir.path().join("boundary.png");
        gray_image(4, 4, 127).save(&boundary).unwrap();
        assert_eq!(load_mask(&boundary, 127).unwrap().foreground_count(), 0);
        let above = dir.path().join("above.png");
        gray_image(4, 4, 128).save(&above).unwrap();
        assert_eq!(load_mask(&above, 127).unwrap().foreground_count(), 16);
    }

    #[test]
    fn rgb_input_uses_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        image::RgbImage::from_pixel(3, 3, image::Rgb([255, 255, 255]))
            .save(&path)
            .unwrap();
        assert_eq!(load_mask(&path, 127).unwrap().foreground_count(), 9);
    }

    #[test]
    fn save_load_round_trip_png_and_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let mask = BinaryMask::from_fn(9, 7, |x, y| (x * 31 + y * 17) % 5 == 0).unwrap();
        for name in ["roundtrip.png", "roundtrip.pgm"] {
            let path = dir.path().join(name);
            save_mask(&mask, &path).unwrap();
            assert_eq!(load_mask(&path, DEFAULT_THRESHOLD).unwrap(), mask, "{name}");
        }
    }

    #[test]
    fn save_single_foreground_pixel_is_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.png");
        let mut mask = BinaryMask::new(1, 1).unwrap();
        mask.set(0, 0, true);
        save_mask(&mask, &path).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        assert_eq!(img.get_pixel(0, 0).0[0], 255);
    }

    #[test]
    fn save_empty_mask_is_all_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.pgm");
        save_mask(&BinaryMask::new(5, 4).unwrap(), &path).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        assert!(img.pixels().all(|p| p.0[0] == 0));
    }

    #[test]
    fn missing_file_and_zero_dim_are_errors() {
        assert!(load_mask("/nonexistent/у.png", 127).is_err());
        assert!(matches!(BinaryMask::new(0, 3), Err(Error::ZeroDimension)));
    }

    #[test]
    fn sixteen_bit_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(
            2,
            2,
            image::Luma([40_000u16]),
        );
        img.save(&path).unwrap();
        assert!(matches!(
            load_mask(&path, 127),
            Err(Error::UnsupportedColor(_))
        ));
    }

    #[test]
    fn saturation_counts_pixels() {
        assert_eq!(BinaryMask::new(8, 8).unwrap().saturation(), 0.0);
        let block = BinaryMask::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y))
            .unwrap();
        assert_eq!(block.saturation(), 9.0 / 25.0);
    }

    #[test]
    fn draw_line_axis_and_diagonal() {
        let mut m = BinaryMask::new(6, 6).unwrap();
        m.draw_line(PixelCoord::new(0, 0), PixelCoord::new(4, 0)).unwrap();
        for x in 0..=4 {
            assert!(m.get(x, 0));
        }
        assert_eq!(m.foreground_count(), 5);

        let mut d = BinaryMask::new(6, 6).unwrap();
        d.draw_line(PixelCoord::new(0, 0), PixelCoord::new(3, 3)).unwrap();
        let got: BTreeSet<_> = d.iter_foreground().collect();
        let want: BTreeSet<_> = (0..=3).map(|i| PixelCoord::new(i, i)).collect();
        assert_eq!(got, want);
    }

    // Independent oracle: for each column along the major axis, the nearest
    // minor coordinate of the ideal segment.
    fn column_rounding_oracle(a: PixelCoord, b: PixelCoord) -> BTreeSet<PixelCoord> {
        let (x0, y0, x1, y1) = (a.x as f64, a.y as f64, b.x as f64, b.y as f64);
        let dx = x1 - x0;
        let dy = y1 - y0;
        let steps = dx.abs().max(dy.abs()) as i64;
        (0..=steps)
            .map(|i| {
                let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
                PixelCoord::new(
                    (x0 + t * dx).round() as u32,
                    (y0 + t * dy).round() as u32,
                )
            })
            .collect()
    }

    #[test]
    fn draw_line_matches_sampling_oracle() {
        // frozen from the oracle: y = 2x/5 rounded per column
        let want: BTreeSet<_> = [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2)]
            .into_iter()
            .map(|(x, y)| PixelCoord::new(x, y))
            .collect();
        assert_eq!(
            column_rounding_oracle(PixelCoord::new(0, 0), PixelCoord::new(5, 2)),
            want
        );
        let got: BTreeSet<_> = line_pixels(PixelCoord::new(0, 0), PixelCoord::new(5, 2))
            .into_iter()
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn draw_line_rejects_out_of_bounds() {
        let mut m = BinaryMask::new(4, 4).unwrap();
        assert!(matches!(
            m.draw_line(PixelCoord::new(0, 0), PixelCoord::new(4, 0)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn resize_nearest_keeps_binarity_and_dims() {
        let mask = BinaryMask::from_fn(10, 6, |x, _| x < 5).unwrap();
        let out = mask.resize_nearest(20, 12).unwrap();
        assert_eq!((out.width(), out.height()), (20, 12));
        assert_eq!(out.foreground_count(), 120);
    }

    #[test]
    fn component_counting() {
        let mut m = BinaryMask::new(8, 8).unwrap();
        m.set(0, 0, true);
        m.set(1, 1, true); // diagonal touch: one component under 8-connectivity
        m.set(5, 5, true);
        assert_eq!(m.count_components(Connectivity::Eight), 2);
        assert_eq!(m.count_components(Connectivity::Four), 3);
    }
}
