//! Single-channel float images and PGM/PNG I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error("unsupported bit depth {0}; expected 8 or 16")]
    BitDepth(u8),
    #[error("pixel buffer of {len} does not match {width}x{height}")]
    Shape { width: usize, height: usize, len: usize },
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::Shape {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn mirrored_horizontally(&self) -> Image {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x, y, self.get(self.width - 1 - x, y));
            }
        }
        out
    }

    /// Rescale to `[0, 1]` by the image's own min/max (constant images map to 0).
    pub fn normalized(&self) -> Image {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let span = hi - lo;
        let data = self
            .data
            .iter()
            .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect();
        Image { data, ..*self }
    }

    /// Quantize a `[0, 1]` pixel to `2^bits - 1` levels.
    fn quantize(v: f64, bits: u8) -> u16 {
        let max = ((1u32 << bits) - 1) as f64;
        (v.clamp(0.0, 1.0) * max).round() as u16
    }

    pub fn to_pgm_bytes(&self, bits: u8) -> Result<Vec<u8>, ImageError> {
        let maxval: u32 = match bits {
            8 => 255,
            16 => 65535,
            other => return Err(ImageError::BitDepth(other)),
        };
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        for &v in &self.data {
            let q = Self::quantize(v, bits);
            if bits == 8 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&q.to_be_bytes());
            }
        }
        Ok(out)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>, bits: u8) -> Result<(), ImageError> {
        let bytes = self.to_pgm_bytes(bits)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_png(&self, path: impl AsRef<Path>, bits: u8) -> Result<(), ImageError> {
        let (w, h) = (self.width as u32, self.height as u32);
        let result = match bits {
            8 => {
                let buf: Vec<u8> = self.data.iter().map(|&v| Self::quantize(v, 8) as u8).collect();
                image::GrayImage::from_raw(w, h, buf).map(|img| img.save(path.as_ref()))
            }
            16 => {
                let buf: Vec<u16> = self.data.iter().map(|&v| Self::quantize(v, 16)).collect();
                image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, buf)
                    .map(|img| img.save(path.as_ref()))
            }
            other => return Err(ImageError::BitDepth(other)),
        };
        match result {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(ImageError::Png(e.to_string())),
            None => Err(ImageError::Png("buffer size mismatch".into())),
        }
    }

    /// Parse a binary (P5) PGM, mapping samples onto `[0, 1]`.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Image, ImageError> {
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::Pgm("unexpected end of header".into()));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if tokens[0] != "P5" {
            return Err(ImageError::Pgm(format!("unsupported magic {:?}", tokens[0])));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| ImageError::Pgm(format!("bad header number {s:?}")))
        };
        let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(ImageError::Pgm(format!("bad maxval {maxval}")));
        }
        // exactly one whitespace byte separates header and raster
        pos += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let need = width * height * bpp;
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| ImageError::Pgm("truncated raster".into()))?;
        let data = if bpp == 1 {
            raster.iter().map(|&b| b as f64 / maxval as f64).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64)
                .collect()
        };
        Image::new(width, height, data)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image, ImageError> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_pgm_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_16_bit() {
        let img = Image::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.1]).unwrap();
        let back = Image::from_pgm_bytes(&img.to_pgm_bytes(16).unwrap()).unwrap();
        assert_eq!((back.width, back.height), (3, 2));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn pgm_8_bit_quantization() {
        let img = Image::new(2, 1, vec![0.5, 1.0]).unwrap();
        let bytes = img.to_pgm_bytes(8).unwrap();
        assert_eq!(&bytes[..bytes.len() - 2], b"P5\n2 1\n255\n");
        assert_eq!(&bytes[bytes.len() - 2..], &[128, 255]);
        assert!(img.to_pgm_bytes(12).is_err());
    }

    #[test]
    fn pgm_header_comments_and_truncation() {
        let bytes = b"P5\n# comment\n2 1\n255\n\x00\xff";
        let img = Image::from_pgm_bytes(bytes).unwrap();
        assert_eq!(img.data, vec![0.0, 1.0]);
        assert!(Image::from_pgm_bytes(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P2\n1 1\n255\n0").is_err());
    }
}
