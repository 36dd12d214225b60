//! NetPBM (8-bit PGM/PPM) and LKM1 float raster files.
//!
//! LKM1 layout: magic `LKM1`, little-endian `u32` width and height, then
//! `width * height` little-endian `f32` values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::MultiChannelRaster;
use crate::error::{Error, Result};

const LKM_MAGIC: &[u8; 4] = b"LKM1";

pub fn write_lkm<W: Write>(map: &MultiChannelRaster, mut w: W) -> Result<()> {
    map.require_single_channel()?;
    w.write_all(LKM_MAGIC)?;
    w.write_all(&(map.width() as u32).to_le_bytes())?;
    w.write_all(&(map.height() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(map.data().len() * 4);
    for v in map.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_lkm<R: Read>(mut r: R) -> Result<MultiChannelRaster> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != LKM_MAGIC {
        return Err(Error::Format("not an LKM1 file".into()));
    }
    let width = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let mut bytes = vec![0u8; width * height * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    MultiChannelRaster::new(width, height, 1, data)
}

pub fn save_lkm(map: &MultiChannelRaster, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_lkm(map, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_lkm(path: impl AsRef<Path>) -> Result<MultiChannelRaster> {
    read_lkm(fs::read(path)?.as_slice())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Quantizes `[0, 1]` values to 8 bits (values outside are clamped).
fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1-channel raster as binary PGM (P5) or a 3-channel raster as
/// binary PPM (P6).
pub fn write_pnm<W: Write>(img: &MultiChannelRaster, mut w: W) -> Result<()> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Shape(format!("NetPBM needs 1 or 3 channels, got {c}"))),
    };
    write!(w, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads binary PGM/PPM with maxval <= 255, scaling samples to `[0, 1]`.
pub fn read_pnm<R: Read>(mut r: R) -> Result<MultiChannelRaster> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = next_token(&bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Format(format!("unsupported NetPBM magic {m:?}"))),
    };
    let width = parse_header_int(&bytes, &mut pos)?;
    let height = parse_header_int(&bytes, &mut pos)?;
    let maxval = parse_header_int(&bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let n = width * height * channels;
    let samples = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Format("truncated NetPBM data".into()))?;
    let data = samples.iter().map(|&b| b as f32 / maxval as f32).collect();
    MultiChannelRaster::new(width, height, channels, data)
}

pub fn save_pnm(img: &MultiChannelRaster, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_pnm(img, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<MultiChannelRaster> {
    read_pnm(fs::read(path)?.as_slice())
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated NetPBM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    tok.parse().map_err(|_| Error::Format(format!("bad NetPBM header value {tok:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lkm_round_trip_is_bit_exact() {
        let map = MultiChannelRaster::from_fn(5, 3, |x, y| (x as f32 * 0.1) - y as f32 / 3.0);
        let mut a = Vec::new();
        write_lkm(&map, &mut a).unwrap();
        assert_eq!(&a[..4], b"LKM1");
        assert_eq!(a.len(), 12 + 15 * 4);
        let back = read_lkm(a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_lkm(&back, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(back, map);
    }

    #[test]
    fn lkm_bad_magic() {
        assert!(read_lkm(&b"LKM2\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn pnm_round_trip_quantized() {
        let img = MultiChannelRaster::new(2, 1, 3, vec![0.0, 0.5, 1.0, 0.25, 0.75, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_pnm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n2 1\n255\n"));
        let back = read_pnm(buf.as_slice()).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn pgm_with_comment_header() {
        let bytes = b"P5\n# made by hand\n2 2\n255\n\x00\x40\x80\xff";
        let img = read_pnm(&bytes[..]).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.get(1, 1, 0), 1.0);
    }
}
