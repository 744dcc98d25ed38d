use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{Image, Map};

/// Round-half-up quantization of a `[0,1]` value to a byte.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn write_image_ppm(path: &Path, image: &Image) -> Result<()> {
    if image.channels() != 3 {
        return Err(Error::Shape(format!(
            "PPM needs 3 channels, got {}",
            image.channels()
        )));
    }
    let mut out = header(b"P6", image.width(), image.height());
    out.extend(image.as_slice().iter().map(|&v| quantize(v)));
    super::write_bytes(path, &out)
}

pub fn read_image_ppm(path: &Path) -> Result<Image> {
    let bytes = super::read_bytes(path)?;
    let (w, h, pixels) = parse(path, &bytes, b"P6", 3)?;
    Map::from_vec(h, w, 3, pixels.iter().map(|&b| f32::from(b) / 255.0).collect())
}

/// Writes a single-channel binary mask as 0/255 bytes.
pub fn write_mask_pgm(path: &Path, mask: &Map<u8>) -> Result<()> {
    if mask.channels() != 1 {
        return Err(Error::Shape(format!(
            "PGM mask needs 1 channel, got {}",
            mask.channels()
        )));
    }
    let mut out = header(b"P5", mask.width(), mask.height());
    out.extend(mask.as_slice().iter().map(|&v| if v != 0 { 255 } else { 0 }));
    super::write_bytes(path, &out)
}

/// Reads a PGM mask; bytes ≥ 128 become 1.
pub fn read_mask_pgm(path: &Path) -> Result<Map<u8>> {
    let bytes = super::read_bytes(path)?;
    let (w, h, pixels) = parse(path, &bytes, b"P5", 1)?;
    Map::from_vec(h, w, 1, pixels.iter().map(|&b| u8::from(b >= 128)).collect())
}

fn header(magic: &[u8], w: usize, h: usize) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(format!("\n{w} {h}\n255\n").as_bytes());
    out
}

fn parse<'a>(path: &Path, bytes: &'a [u8], magic: &[u8], channels: usize) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format(
            path,
            format!("expected {} header", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "malformed header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(path, "malformed header"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(path, format!("maxval {maxval} != 255")));
    }
    let need = w * h * channels;
    if bytes.len() - pos != need {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {need}", bytes.len() - pos),
        ));
    }
    Ok((w, h, &bytes[pos..]))
}
