//! Binary PGM (P5, 8-bit) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Maps an intensity to a byte: clamp to [0, 255], round half up.
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Serializes as `P5\n<width>\n<height>\n255\n` followed by the payload.
pub fn encode_pgm(image: &ImageGrid) -> Vec<u8> {
    let header = format!("P5\n{}\n{}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(image.data().iter().map(|&v| quantize(v)));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut cursor = HeaderCursor {
        bytes,
        pos: 0,
        last_start: 0,
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(parse_err(0, "expected magic \"P5\""));
    }
    cursor.pos = 2;
    let width = cursor.next_number("width")?;
    let height = cursor.next_number("height")?;
    let maxval = cursor.next_number("maxval")?;
    let maxval_at = cursor.last_start;
    if maxval != 255 {
        return Err(parse_err(maxval_at, format!("maxval must be 255, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(parse_err(maxval_at, "zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(parse_err(cursor.pos, "missing whitespace after maxval")),
    }
    let start = cursor.pos;
    let needed = width * height;
    let available = bytes.len() - start;
    if available < needed {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: need {needed} bytes, found {available}"),
        ));
    }
    let data = bytes[start..start + needed].iter().map(|&b| f64::from(b)).collect();
    ImageGrid::new(width, height, data)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&bytes)
}

pub fn write_pgm(image: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Offset of the most recently parsed number.
    last_start: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<usize> {
        let before = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == before {
            return Err(parse_err(self.pos, format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        self.last_start = start;
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(start, format!("{what} out of range")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_maps_to_intensities() {
        let bytes = b"P5\n2 2\n255\n\x00\x80\xc8\xff";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 128.0, 200.0, 255.0]);
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(127.6), 128);
        assert_eq!(quantize(127.5), 128);
        assert_eq!(quantize(127.49), 127);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(300.0), 255);
    }

    #[test]
    fn header_is_normalized() {
        let img = ImageGrid::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(encode_pgm(&img), b"P5\n3\n1\n255\n\x01\x02\x03".to_vec());
    }

    #[test]
    fn comments_are_skipped() {
        let bytes = b"P5 # made by hand\n1 # w\n1\n255\n\x07";
        assert_eq!(decode_pgm(bytes).unwrap().data(), &[7.0]);
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let cases: [(&[u8], usize); 4] = [
            (b"P2\n1 1\n255\n\x00", 0),
            (b"P5\n1 1\n65535\n\x00\x00", 7),
            (b"P5\n2 2\n255\n\x00", 12),
            (b"P5\nx 1\n255\n\x00", 3),
        ];
        for (bytes, expected) in cases {
            match decode_pgm(bytes) {
                Err(Error::Parse { offset, .. }) => assert_eq!(offset, expected, "{bytes:?}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }
}
