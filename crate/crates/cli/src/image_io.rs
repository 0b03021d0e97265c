//! Scene image files: a binary PGM of the pixel luma plus a sidecar with the
//! per-pixel 3D lookup and colors.
//!
//! Sidecar layout, little endian: magic `WKLU`, version `u32`, width `u32`,
//! height `u32`, then per row-major pixel `r g b` bytes, a validity byte and
//! three `f64` coordinates (zero when invalid).

use std::io::{self, Read, Write};

use wrapkit::geometry::Rgb;
use wrapkit::recognition::SceneImage;
use wrapkit::Vec3;

const MAGIC: &[u8; 4] = b"WKLU";
const VERSION: u32 = 1;

pub fn write_pgm(img: &SceneImage<f64>, out: &mut impl Write) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    let luma: Vec<u8> = img.rgb.iter().map(Rgb::luma).collect();
    out.write_all(&luma)
}

pub fn write_lookup(img: &SceneImage<f64>, out: &mut impl Write) -> io::Result<()> {
    out.write_all(MAGIC)?;
    for v in [VERSION, img.width as u32, img.height as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    for (c, p) in img.rgb.iter().zip(&img.lookup) {
        out.write_all(&c.0)?;
        let (valid, q) = match p {
            Some(q) => (1u8, *q),
            None => (0u8, Vec3::zeros()),
        };
        out.write_all(&[valid])?;
        for v in q.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a sidecar written by [`write_lookup`].
pub fn read_lookup(input: &mut impl Read) -> io::Result<SceneImage<f64>> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a lookup sidecar"));
    }
    let mut word = [0u8; 4];
    let mut next_u32 = |input: &mut dyn Read| -> io::Result<u32> {
        input.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    if next_u32(input)? != VERSION {
        return Err(bad("unsupported lookup version"));
    }
    let width = next_u32(input)? as usize;
    let height = next_u32(input)? as usize;
    let n = width.checked_mul(height).ok_or_else(|| bad("image too large"))?;
    let mut rgb = Vec::with_capacity(n);
    let mut lookup = Vec::with_capacity(n);
    let mut px = [0u8; 28];
    for _ in 0..n {
        input.read_exact(&mut px)?;
        rgb.push(Rgb([px[0], px[1], px[2]]));
        let coord = |i: usize| f64::from_le_bytes(px[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes"));
        lookup.push((px[3] != 0).then(|| Vec3::new(coord(0), coord(1), coord(2))));
    }
    SceneImage::new(width, height, rgb, lookup).map_err(|e| bad(&e.to_string()))
}
