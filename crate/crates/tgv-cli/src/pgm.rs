//! Reading and writing portable graymap (PGM) images, both the ASCII (`P2`)
//! and binary (`P5`) variants.
//!
//! The parser is strict: header tokens may be separated by any whitespace and
//! `#` comments, the binary raster must follow the maxval after exactly one
//! whitespace byte, every sample must be at most the declared maximum, and
//! nothing but whitespace may trail the raster. Samples wider than one byte
//! (maxval above 255) are big-endian, as the format requires. Errors carry
//! the byte offset where parsing stopped.

use std::fmt;
use std::path::Path;

use tgv_core::grid::{Grid, Image};
use tgv_core::{Result as CoreResult, TgvError};

/// Upper bound on image extents; keeps corrupt headers from driving huge
/// allocations.
pub const MAX_DIMENSION: usize = 1 << 16;

/// Upper bound on the total pixel count.
pub const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug)]
pub enum PgmError {
    /// Malformed content at a byte offset.
    Parse { offset: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for PgmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PgmError::Parse { offset, message } => {
                write!(f, "invalid pgm data at byte {offset}: {message}")
            }
            PgmError::Io(e) => write!(f, "pgm io error: {e}"),
        }
    }
}

impl std::error::Error for PgmError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PgmError::Io(e) => Some(e),
            PgmError::Parse { .. } => None,
        }
    }
}

impl From<std::io::Error> for PgmError {
    fn from(e: std::io::Error) -> Self {
        PgmError::Io(e)
    }
}

pub type PgmResult<T> = std::result::Result<T, PgmError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`, samples as ASCII decimals.
    Ascii,
    /// `P5`, samples as raw bytes.
    Binary,
}

/// A decoded graymap: integer samples in row scan order.
#[derive(Clone, Debug, PartialEq)]
pub struct PgmImage {
    pub format: PgmFormat,
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn fail<T>(&self, message: impl Into<String>) -> PgmResult<T> {
        Err(PgmError::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    /// Skips whitespace and `#` comments (which run to the end of the line).
    fn skip_separators(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.bump() {
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Reads an unsigned decimal token of at most `limit`.
    fn read_number(&mut self, what: &str, limit: u64) -> PgmResult<u64> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        let mut digits = 0;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() {
                value = value * 10 + u64::from(b - b'0');
                digits += 1;
                self.pos += 1;
                if value > limit {
                    self.pos = start;
                    return self.fail(format!("{what} exceeds the limit {limit}"));
                }
            } else {
                break;
            }
        }
        if digits == 0 {
            return self.fail(format!("expected a decimal {what}"));
        }
        Ok(value)
    }

    fn expect_trailing_whitespace_only(&mut self) -> PgmResult<()> {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                return self.fail("unexpected data after the raster");
            }
        }
        Ok(())
    }
}

/// Decodes a `P2` or `P5` graymap from raw bytes.
pub fn parse_pgm(bytes: &[u8]) -> PgmResult<PgmImage> {
    let mut cur = Cursor::new(bytes);
    let format = match (cur.bump(), cur.bump()) {
        (Some(b'P'), Some(b'2')) => PgmFormat::Ascii,
        (Some(b'P'), Some(b'5')) => PgmFormat::Binary,
        _ => {
            cur.pos = 0;
            return cur.fail("expected a P2 or P5 magic number");
        }
    };
    if !cur.peek().is_some_and(|b| b.is_ascii_whitespace() || b == b'#') {
        return cur.fail("the magic number must be followed by whitespace");
    }

    let width = cur.read_number("width", MAX_DIMENSION as u64)? as usize;
    let height = cur.read_number("height", MAX_DIMENSION as u64)? as usize;
    if width == 0 || height == 0 {
        return cur.fail("image dimensions must be positive");
    }
    if width * height > MAX_PIXELS {
        return cur.fail(format!("pixel count exceeds the limit {MAX_PIXELS}"));
    }
    let maxval = cur.read_number("maxval", u64::from(u16::MAX))? as u16;
    if maxval == 0 {
        return cur.fail("maxval must be positive");
    }

    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    match format {
        PgmFormat::Ascii => {
            for _ in 0..count {
                let v = cur.read_number("sample", u64::from(maxval))? as u16;
                samples.push(v);
            }
            cur.expect_trailing_whitespace_only()?;
        }
        PgmFormat::Binary => {
            // Exactly one whitespace byte separates the header from the
            // raster; a comment here would be ambiguous with raster bytes.
            let sep = cur.bump();
            if !sep.is_some_and(|b| b.is_ascii_whitespace()) {
                if sep.is_some() {
                    cur.pos -= 1;
                }
                return cur.fail("maxval must be followed by a single whitespace byte");
            }
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if cur.bytes.len() - cur.pos < need {
                let have = cur.bytes.len() - cur.pos;
                cur.pos = cur.bytes.len();
                return cur.fail(format!("raster truncated: expected {need} bytes, found {have}"));
            }
            for _ in 0..count {
                let v = if wide {
                    let hi = cur.bump().unwrap();
                    let lo = cur.bump().unwrap();
                    u16::from_be_bytes([hi, lo])
                } else {
                    u16::from(cur.bump().unwrap())
                };
                if v > maxval {
                    cur.pos -= if wide { 2 } else { 1 };
                    return cur.fail(format!("sample {v} exceeds maxval {maxval}"));
                }
                samples.push(v);
            }
            cur.expect_trailing_whitespace_only()?;
        }
    }

    Ok(PgmImage {
        format,
        width,
        height,
        maxval,
        samples,
    })
}

/// Encodes a graymap in its own format.
pub fn encode_pgm(img: &PgmImage) -> Vec<u8> {
    let mut out = Vec::new();
    match img.format {
        PgmFormat::Ascii => {
            out.extend_from_slice(
                format!("P2\n{} {}\n{}\n", img.width, img.height, img.maxval).as_bytes(),
            );
            // Keep lines comfortably short regardless of image width.
            for chunk in img.samples.chunks(16) {
                let line = chunk
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                out.extend_from_slice(line.as_bytes());
                out.push(b'\n');
            }
        }
        PgmFormat::Binary => {
            out.extend_from_slice(
                format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).as_bytes(),
            );
            if img.maxval > 255 {
                for v in &img.samples {
                    out.extend_from_slice(&v.to_be_bytes());
                }
            } else {
                out.extend(img.samples.iter().map(|&v| v as u8));
            }
        }
    }
    out
}

impl PgmImage {
    /// Converts to a unit-range image: sample / maxval.
    pub fn to_image(&self) -> CoreResult<Image> {
        let grid = Grid::new(self.width, self.height)?;
        let scale = 1.0 / f64::from(self.maxval);
        let data = self.samples.iter().map(|&v| f64::from(v) * scale).collect();
        Image::new(grid, data)
    }

    /// Quantizes a unit-range image: values are clamped to [0, 1] and rounded
    /// to the nearest of `maxval + 1` levels. Non-finite pixels are rejected.
    pub fn from_image(img: &Image, maxval: u16, format: PgmFormat) -> CoreResult<Self> {
        if maxval == 0 {
            return Err(TgvError::InvalidArgument("maxval must be positive".into()));
        }
        let mut samples = Vec::with_capacity(img.grid().n_pixels());
        for &v in img.data() {
            if !v.is_finite() {
                return Err(TgvError::InconsistentInput(
                    "image contains a non-finite pixel".into(),
                ));
            }
            let q = (v.clamp(0.0, 1.0) * f64::from(maxval)).round() as u16;
            samples.push(q);
        }
        Ok(Self {
            format,
            width: img.grid().width(),
            height: img.grid().height(),
            maxval,
            samples,
        })
    }
}

pub fn read_pgm(path: &Path) -> PgmResult<PgmImage> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes)
}

pub fn write_pgm(path: &Path, img: &PgmImage) -> PgmResult<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}
