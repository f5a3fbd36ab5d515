//! Image file I/O: binary PPM/PGM (P6/P5, maxval 255) and PNG.
//!
//! Samples are quantized as `round(v * 255)` on write and `v / 255` on read,
//! so a PPM/PGM round trip of an 8-bit-representable image is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::RasterImage;
use crate::error::{Error, Result};

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn to_bytes_u8(img: &RasterImage) -> Vec<u8> {
    img.data().iter().map(|&v| quantize(v)).collect()
}

pub fn from_bytes_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<RasterImage> {
    RasterImage::new(width, height, channels, bytes.iter().map(|&b| b as f32 / 255.0).collect())
}

/// Encodes as P6 (3 channels) or P5 (1 channel).
pub fn encode_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(to_bytes_u8(img));
    out
}

pub fn decode_pnm(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 0usize;
    let mut next_token = || -> Result<String> {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated PNM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token()?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(Error::Format(format!("unsupported PNM magic {other:?}"))),
    };
    let parse = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PNM header field {s:?}")));
    let width = parse(next_token()?)?;
    let height = parse(next_token()?)?;
    let maxval = parse(next_token()?)?;
    if maxval != 255 {
        return Err(Error::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format("truncated PNM raster".into()))?;
    from_bytes_u8(width, height, channels, raster)
}

fn is_pnm_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("ppm" | "pgm" | "pnm")
    )
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let color = if img.channels() == 3 {
        image::ExtendedColorType::Rgb8
    } else {
        image::ExtendedColorType::L8
    };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&to_bytes_u8(img), img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    match dynimg {
        image::DynamicImage::ImageLuma8(g) => from_bytes_u8(w, h, 1, g.as_raw()),
        other => from_bytes_u8(w, h, 3, other.to_rgb8().as_raw()),
    }
}

/// Encodes by file extension: `.ppm`/`.pgm`/`.pnm` as PNM, anything else as PNG.
pub fn encode_for_path(img: &RasterImage, path: &Path) -> Result<Vec<u8>> {
    if is_pnm_path(path) {
        Ok(encode_pnm(img))
    } else {
        encode_png(img)
    }
}

pub fn write_image(img: &RasterImage, path: &Path) -> Result<()> {
    let bytes = encode_for_path(img, path)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads PNM or PNG, sniffing the magic bytes.
pub fn read_image(path: &Path) -> Result<RasterImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        Err(Error::Format(format!("{} is neither PNG nor binary PPM/PGM", path.display())))
    }
}
