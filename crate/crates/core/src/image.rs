//! RGB image buffer, rectangles, and frame file I/O.
//!
//! Binary PPM (`P6`) is always supported. PNG decoding is available with the
//! `png` feature.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on decoded pixel count, guards allocations on hostile headers.
pub const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions {width}x{height} are invalid")]
    InvalidDimensions { width: usize, height: usize },
    #[error("pixel buffer has {found} bytes, expected {expected}")]
    BufferSize { expected: usize, found: usize },
    #[error("not a binary PPM (P6) or PNG file")]
    UnknownFormat,
    #[error("malformed PPM header: {0}")]
    BadHeader(&'static str),
    #[error("unsupported PPM maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("PPM pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PNG support is disabled in this build")]
    PngDisabled,
    #[error("PNG decode failed: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dimensions(width, height)?;
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        check_dimensions(width, height)?;
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Luma plane, `0.299 R + 0.587 G + 0.114 B`.
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels()
            .map(|[r, g, b]| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
            .collect()
    }

    /// Horizontal mirror.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set_pixel(self.width - 1 - x, y, self.pixel(x, y));
            }
        }
        out
    }

    /// Fills `rect` (clamped) with `rgb`.
    pub fn fill_rect(&mut self, rect: &RegionRect, rgb: [u8; 3]) {
        if let Some(c) = rect.clamp_to(self.width, self.height) {
            for y in c.y0..c.y1 {
                for x in c.x0..c.x1 {
                    self.set_pixel(x, y, rgb);
                }
            }
        }
    }

    /// Draws a one-pixel rectangle outline, clipped to the image.
    pub fn draw_rect_outline(&mut self, rect: &RegionRect, rgb: [u8; 3]) {
        let Some(c) = rect.clamp_to(self.width, self.height) else {
            return;
        };
        for x in c.x0..c.x1 {
            self.set_pixel(x, c.y0, rgb);
            self.set_pixel(x, c.y1 - 1, rgb);
        }
        for y in c.y0..c.y1 {
            self.set_pixel(c.x0, y, rgb);
            self.set_pixel(c.x1 - 1, y, rgb);
        }
    }
}

fn check_dimensions(width: usize, height: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 || width.saturating_mul(height) > MAX_PIXELS {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Axis-aligned rectangle in pixel coordinates. May extend past the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

/// Half-open pixel bounds `[x0, x1) x [y0, y1)` inside an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClampedRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl ClampedRect {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

impl RegionRect {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    /// Rectangle of size `w x h` centred on `(cx, cy)`, rounded to pixels.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        let w = w.round().max(1.0);
        let h = h.round().max(1.0);
        Self {
            x: (cx - w / 2.0).round() as i64,
            y: (cy - h / 2.0).round() as i64,
            w: w as i64,
            h: h as i64,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    /// Intersection with a `width x height` image; `None` when empty.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<ClampedRect> {
        if self.w <= 0 || self.h <= 0 {
            return None;
        }
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = self.x.saturating_add(self.w).min(width as i64);
        let y1 = self.y.saturating_add(self.h).min(height as i64);
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        Some(ClampedRect {
            x0: x0 as usize,
            y0: y0 as usize,
            x1: x1 as usize,
            y1: y1 as usize,
        })
    }
}

/// Decodes a binary PPM (`P6`) image. 16-bit samples are reduced to 8 bits.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    if bytes.get(..2) != Some(b"P6") {
        return Err(ImageError::UnknownFormat);
    }
    cursor.pos = 2;
    let width = cursor.next_number()? as usize;
    let height = cursor.next_number()? as usize;
    let maxval = cursor.next_number()?;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(ImageError::BadHeader("missing raster separator")),
    }
    check_dimensions(width, height)?;
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let expected = width * height * 3 * sample_bytes;
    let raster = &bytes[cursor.pos..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    let raster = &raster[..expected];
    let scale = |v: u32| -> u8 {
        if maxval == 255 {
            v.min(255) as u8
        } else {
            ((v.min(maxval) as f64 * 255.0 / maxval as f64).round()) as u8
        }
    };
    let data = if sample_bytes == 1 {
        raster.iter().map(|&b| scale(b as u32)).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| scale(u16::from_be_bytes([c[0], c[1]]) as u32))
            .collect()
    };
    ImageBuffer::new(width, height, data)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self) -> Result<u32, ImageError> {
        let start = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == start {
            return Err(ImageError::BadHeader("expected whitespace before field"));
        }
        let digits_start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u32))
                .ok_or(ImageError::BadHeader("numeric field overflows"))?;
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ImageError::BadHeader("expected a decimal number"));
        }
        Ok(value)
    }
}

pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| ImageError::Png(e.to_string()))?
        .into_rgb8();
    let (w, h) = decoded.dimensions();
    ImageBuffer::new(w as usize, h as usize, decoded.into_raw())
}

#[cfg(not(feature = "png"))]
fn decode_png(_bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    Err(ImageError::PngDisabled)
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes a frame, dispatching on the file signature.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        Err(ImageError::UnknownFormat)
    }
}

pub fn load_image(path: &Path) -> Result<ImageBuffer, ImageError> {
    decode_image(&fs::read(path)?)
}

pub fn save_ppm(img: &ImageBuffer, path: &Path) -> Result<(), ImageError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm(img))?;
    Ok(())
}
