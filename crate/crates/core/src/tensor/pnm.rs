//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, &path.display().to_string())
}

pub fn decode_pnm(bytes: &[u8], source: &str) -> Result<Image> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| fmt_err(source, 0, "empty file"))?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(fmt_err(source, 0, "expected P5 or P6 magic")),
    };
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        let at = pos;
        let tok = next_token(bytes, &mut pos)
            .ok_or_else(|| fmt_err(source, at, &format!("missing {name}")))?;
        fields[i] = std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt_err(source, at, &format!("bad {name}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(fmt_err(source, pos, "only 8-bit samples are supported"));
    }
    if width == 0 || height == 0 {
        return Err(fmt_err(source, pos, "empty image"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| fmt_err(source, pos, "truncated raster"))?;
    let scale = 255.0 / maxval as f32;
    let pixels = raster.iter().map(|&b| f32::from(b) * scale).collect();
    Image::new(height, width, channels, pixels)
}

/// Writes P5 or P6 depending on the channel count. Pixels are rounded to u8.
pub fn write_pnm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

fn fmt_err(source: &str, offset: usize, msg: &str) -> Error {
    Error::format(source, format!("byte {offset}"), msg)
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_color_and_gray() {
        let px: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = Image::from_u8(4, 3, 3, &px).unwrap();
        assert_eq!(decode_pnm(&encode_pnm(&img), "mem").unwrap(), img);

        let g = Image::from_u8(2, 5, 1, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]).unwrap();
        assert_eq!(decode_pnm(&encode_pnm(&g), "mem").unwrap(), g);
    }

    #[test]
    fn header_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = decode_pnm(&bytes, "mem").unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pnm(b"P3\n1 1\n255\n0 0 0", "mem").is_err());
        assert!(decode_pnm(b"P6\n2 2\n255\n\x00\x00", "mem").is_err());
        assert!(decode_pnm(b"P6\n1 1\n65535\n", "mem").is_err());
    }
}
